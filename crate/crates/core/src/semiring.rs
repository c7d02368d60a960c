//! Exact (max,plus) arithmetic over ℝ ∪ {⊥}.
//!
//! `⊕` is `max`, `⊗` is `+`, and the bottom element `⊥` plays the role of
//! −∞. Bottom is an explicit variant rather than `f64::NEG_INFINITY`, so
//! every rule involving it is decided by pattern matching and never by IEEE
//! arithmetic.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Range;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar of the (max,plus) semiring.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum MaxPlus {
    /// The zero element ⊥ (−∞).
    #[default]
    Bottom,
    Finite(f64),
}

impl MaxPlus {
    /// The unit element of `⊗`.
    pub const ONE: MaxPlus = MaxPlus::Finite(0.0);
    /// The unit element of `⊕`.
    pub const ZERO: MaxPlus = MaxPlus::Bottom;

    #[inline]
    pub fn finite(x: f64) -> Self {
        debug_assert!(x.is_finite(), "finite max-plus value must be a real number, got {x}");
        MaxPlus::Finite(x)
    }

    #[inline]
    pub fn is_bottom(self) -> bool {
        matches!(self, MaxPlus::Bottom)
    }

    #[inline]
    pub fn value(self) -> Option<f64> {
        match self {
            MaxPlus::Bottom => None,
            MaxPlus::Finite(x) => Some(x),
        }
    }

    /// Value as an extended real, ⊥ mapped to −∞.
    #[inline]
    pub fn to_f64(self) -> f64 {
        match self {
            MaxPlus::Bottom => f64::NEG_INFINITY,
            MaxPlus::Finite(x) => x,
        }
    }

    /// Inverse of [`MaxPlus::to_f64`]: −∞ becomes ⊥.
    #[inline]
    pub fn from_ext(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            MaxPlus::Bottom
        } else {
            MaxPlus::Finite(x)
        }
    }

    #[inline]
    pub fn oplus(self, other: MaxPlus) -> MaxPlus {
        match (self, other) {
            (MaxPlus::Bottom, y) => y,
            (x, MaxPlus::Bottom) => x,
            (MaxPlus::Finite(x), MaxPlus::Finite(y)) => MaxPlus::Finite(if y > x { y } else { x }),
        }
    }

    #[inline]
    pub fn otimes(self, other: MaxPlus) -> MaxPlus {
        match (self, other) {
            (MaxPlus::Finite(x), MaxPlus::Finite(y)) => MaxPlus::Finite(x + y),
            _ => MaxPlus::Bottom,
        }
    }
}

impl From<f64> for MaxPlus {
    fn from(x: f64) -> Self {
        MaxPlus::finite(x)
    }
}

impl PartialOrd for MaxPlus {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (MaxPlus::Bottom, MaxPlus::Bottom) => Some(Ordering::Equal),
            (MaxPlus::Bottom, MaxPlus::Finite(_)) => Some(Ordering::Less),
            (MaxPlus::Finite(_), MaxPlus::Bottom) => Some(Ordering::Greater),
            (MaxPlus::Finite(x), MaxPlus::Finite(y)) => x.partial_cmp(y),
        }
    }
}

impl fmt::Display for MaxPlus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxPlus::Bottom => f.write_str("-inf"),
            MaxPlus::Finite(x) => write!(f, "{x}"),
        }
    }
}

const BOTTOM_TOKEN: &str = "-inf";

impl Serialize for MaxPlus {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MaxPlus::Bottom => serializer.serialize_str(BOTTOM_TOKEN),
            MaxPlus::Finite(x) => serializer.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for MaxPlus {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct MaxPlusVisitor;

        impl Visitor<'_> for MaxPlusVisitor {
            type Value = MaxPlus;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a finite number or the string \"-inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<MaxPlus, E> {
                if v.is_finite() {
                    Ok(MaxPlus::Finite(v))
                } else {
                    Err(E::custom("non-finite number; use \"-inf\" for bottom"))
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<MaxPlus, E> {
                Ok(MaxPlus::Finite(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<MaxPlus, E> {
                Ok(MaxPlus::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<MaxPlus, E> {
                if v == BOTTOM_TOKEN {
                    Ok(MaxPlus::Bottom)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        deserializer.deserialize_any(MaxPlusVisitor)
    }
}

/// Dense row-major matrix over the (max,plus) semiring.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxPlusMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<MaxPlus>,
}

impl MaxPlusMatrix {
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<MaxPlus>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("matrix shape {rows}x{cols} must be positive")));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries do not fill a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_rows(rows: Vec<Vec<MaxPlus>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_entries(r, c, rows.into_iter().flatten().collect())
    }

    /// All-⊥ matrix.
    pub fn bottom(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix shape must be positive");
        Self { rows, cols, entries: vec![MaxPlus::Bottom; rows * cols] }
    }

    /// The identity E: 0 on the diagonal, ⊥ elsewhere.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::bottom(dim, dim);
        for i in 0..dim {
            m.set(i, i, MaxPlus::ONE);
        }
        m
    }

    /// Column vector.
    pub fn column(values: Vec<MaxPlus>) -> Result<Self> {
        let n = values.len();
        Self::from_entries(n, 1, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[MaxPlus] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> MaxPlus {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: MaxPlus) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[MaxPlus] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<MaxPlus>> {
        self.entries.chunks(self.cols).map(<[MaxPlus]>::to_vec).collect()
    }

    /// Entrywise `self ≤ other`.
    pub fn le(&self, other: &MaxPlusMatrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.entries.iter().zip(&other.entries).all(|(a, b)| a <= b)
    }

    pub fn oplus(&self, other: &MaxPlusMatrix) -> Result<MaxPlusMatrix> {
        oplus(self, other)
    }

    pub fn otimes(&self, other: &MaxPlusMatrix) -> Result<MaxPlusMatrix> {
        otimes(self, other)
    }

    /// `⊕` over all entries.
    pub fn max_entry(&self) -> MaxPlus {
        self.entries.iter().fold(MaxPlus::Bottom, |acc, &x| acc.oplus(x))
    }

    /// Submatrix on the given row and column index sets.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> MaxPlusMatrix {
        let entries = rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        MaxPlusMatrix { rows: rows.len(), cols: cols.len(), entries }
    }
}

impl Serialize for MaxPlusMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MaxPlusMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<MaxPlus>>::deserialize(deserializer)?;
        MaxPlusMatrix::from_rows(rows).map_err(de::Error::custom)
    }
}

pub fn oplus(a: &MaxPlusMatrix, b: &MaxPlusMatrix) -> Result<MaxPlusMatrix> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::Dimension(format!(
            "oplus of {}x{} and {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let entries = a.entries.iter().zip(&b.entries).map(|(&x, &y)| x.oplus(y)).collect();
    Ok(MaxPlusMatrix { rows: a.rows, cols: a.cols, entries })
}

pub fn otimes(a: &MaxPlusMatrix, b: &MaxPlusMatrix) -> Result<MaxPlusMatrix> {
    if a.cols != b.rows {
        return Err(Error::Dimension(format!(
            "otimes of {}x{} and {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = MaxPlusMatrix::bottom(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            if aik.is_bottom() {
                continue;
            }
            for j in 0..b.cols {
                let v = out.get(i, j).oplus(aik.otimes(b.get(k, j)));
                out.set(i, j, v);
            }
        }
    }
    Ok(out)
}

/// `matrices[end-1] ⊗ … ⊗ matrices[start]`, later indices on the left.
///
/// An empty range yields the identity of the common dimension.
pub fn product_range(matrices: &[MaxPlusMatrix], range: Range<usize>) -> Result<MaxPlusMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::Dimension("product over an empty matrix sequence".into()))?;
    let dim = first.rows;
    if let Some(bad) = matrices.iter().find(|m| !m.is_square() || m.rows != dim) {
        return Err(Error::Dimension(format!(
            "product_range needs square {dim}x{dim} matrices, found {}x{}",
            bad.rows, bad.cols
        )));
    }
    if range.start > range.end || range.end > matrices.len() {
        return Err(Error::Dimension(format!(
            "range {range:?} outside 0..{}",
            matrices.len()
        )));
    }
    let mut acc = MaxPlusMatrix::identity(dim);
    for m in &matrices[range] {
        acc = otimes(m, &acc)?;
    }
    Ok(acc)
}

/// `y = A ⊗ x ⊕ c`, written into `out`. `c` may be `None` for no additive term.
#[inline]
pub fn mat_vec_into(a: &MaxPlusMatrix, x: &[MaxPlus], c: Option<&[MaxPlus]>, out: &mut [MaxPlus]) {
    debug_assert_eq!(a.cols, x.len());
    debug_assert_eq!(a.rows, out.len());
    for (i, slot) in out.iter_mut().enumerate() {
        let mut acc = c.map_or(MaxPlus::Bottom, |c| c[i]);
        for (aij, &xj) in a.row(i).iter().zip(x) {
            acc = acc.oplus(aij.otimes(xj));
        }
        *slot = acc;
    }
}
