#![no_std]

//! Numerics for Dawson–Watanabe superprocesses with immigration over a finite
//! site set.
//!
//! The crate is split along the objects it computes with:
//!
//! * [`measure`]: finite measures and nonnegative test functions on a site set.
//! * [`motion`]: the Q-matrix chain that particles follow, its killed
//!   semigroup and h-transforms.
//! * [`mechanism`] and [`cumulant`]: the branching mechanism and the nonlinear
//!   cumulant flow `V_t f`, the occupation-time flow, S-functionals and first
//!   moments.
//! * [`skew`]: log-Laplace algebra of skew convolution semigroups: entrance
//!   laws, homogeneous and inhomogeneous immigration functionals, identity
//!   residuals and long-time limits.
//! * [`particle`]: exact branching particle approximations of the
//!   superprocess and of its Poisson-cluster immigration processes.
//! * [`stats`]: Monte Carlo summaries used to compare the two sides.
//!
//! Everything here is `no_std` with `alloc`. File formats, the experiment
//! runner and the command line live in the `scsim` crate.

extern crate alloc;

pub mod cumulant;
pub mod error;
pub mod linalg;
pub mod measure;
pub mod mechanism;
pub mod motion;
pub mod particle;
pub mod skew;
pub mod stats;

pub use cumulant::{
    moment_flow, s_functional, s_functional_occupation, solve_cumulant,
    solve_cumulant_occupation, CumulantSolution, PEntranceLaw,
};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use measure::{integrate, normalize, FiniteMeasure, Normalized, SiteSet, TestFunction};
pub use mechanism::{phi_eval, BranchingMechanism, JumpAtom};
pub use motion::{KillingRate, MotionModel};
