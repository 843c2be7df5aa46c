//! Exact solvers and certifiers for stopping games on finite filtered probability trees.
//!
//! Time runs over a finite grid whose last point stands in for the infinite horizon.
//! All arithmetic is exact (`BigRational`), so every certificate is a hard number.

#![allow(clippy::result_large_err)]

pub mod classic;
pub mod coalition;
pub mod equilibrium3;
pub mod error;
pub mod guard;
pub mod payoff;
pub mod space;
pub mod strategy;
pub mod two_player;
pub mod verify;
pub mod zero_sum2;

pub use error::{Result, StopGameError};
pub use guard::Guards;
pub use payoff::{PayoffField, Modulus};
pub use space::{AdaptedProcess, FilteredSpace, RandomVariable, Real, StoppingTime, TimeGrid};
pub use strategy::{StopRule, StrategyOrder2, StrategyOrder3};
