//! Tail decay rates of stationary maximal daters in stochastic
//! (max,plus)-linear networks.
//!
//! A model is a recursion `X_{n+1} = A_{n+1} ⊗ X_n ⊕ B_{n+1} ⊗ T_{n+1}`
//! whose matrices are symbolic expressions over i.i.d. component times.
//! The decay rate `θ*` of `P(Z > x)` is obtained three ways: closed-form
//! block cumulant functions, Monte Carlo estimates of those functions, and
//! direct regression on simulated daters.

pub mod decay;
pub mod error;
pub mod library;
pub mod mgf;
pub mod model;
pub mod recursion;
pub mod rng;
pub mod semiring;
pub mod stats;
pub mod structure;
pub mod tail;

pub use error::{Error, Result};
pub use model::{parse_model, ArrivalSpec, Distribution, Entry, NetworkModel, Term};
pub use semiring::{MaxPlus, MaxPlusMatrix};
