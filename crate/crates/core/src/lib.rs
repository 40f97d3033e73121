//! Online identification of spatially varying coefficients in parabolic PDEs
//! with a model reference adaptive system (MRAS).
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`] structured triangulations of rectangles and disks,
//! * [`sparse`] CSR storage and a Jacobi-preconditioned CG solver,
//! * [`fem`] P1 (state) / P0 (parameter) assembly, norms and transfer,
//! * [`mras`] the semi-implicit prediction-correction stepper,
//! * [`benchmarks`] the Darcy, Fisher-KPP, nonlinear potential and
//!   modified Allen-Cahn update laws,
//! * [`synth`] ground truths, forward simulation and noise,
//! * [`diag`] error series, decay fits and CSV/VTK output,
//! * [`config`] and [`driver`] for batch runs.

pub mod benchmarks;
pub mod config;
pub mod diag;
pub mod driver;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod mras;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
