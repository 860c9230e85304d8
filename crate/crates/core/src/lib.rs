//! Numerical toolkit for adiabatic quantum annealing with a rank-one driver.
//!
//! The central object is the one-parameter Hamiltonian family
//!
//! ```text
//!     H(z) = -|phi><phi| + z H_f ,        z >= 0,
//! ```
//!
//! where `|phi>` is the uniform superposition over all `N = 2^n` computational
//! basis states and `H_f` is diagonal with non-negative integer energies
//! `E(s) <= m`. Annealing interpolates from the projector ground state at
//! `z = 0` towards the ground states of `H_f` (the `E = 0` states) at large
//! `z`. Everything spectral about `H(z)` is a function of the density of
//! states `N_E` alone, which keeps exact computations polynomial in `m`
//! even though the Hilbert space is exponential in `n`.
//!
//! Modules:
//!
//! * [`instances`]: problem generators (random 3-SAT, 3-spin, explicit energy
//!   tables), energy evaluation, density-of-states enumeration.
//! * [`spectrum`]: the characteristic equation of `H(z)`, exact low-lying
//!   eigenvalues, the closed-form gap approximation through partition sums,
//!   minimum gap, validity windows, stopping point, detection ratio.
//! * [`schedule`]: locally optimized annealing schedules `zdot = c g(z)^2`,
//!   adiabatic-theorem run-time bounds, and the algebraic lower bound on T.
//! * [`dynamics`]: Schrodinger evolution in the energy-shell basis (and a
//!   full-space cross-check integrator), success probabilities, minimal
//!   run-time searches.
//! * [`transverse`]: minimum-gap scans for the conventional transverse-field
//!   interpolation `(1-A) (-sum_i sigma^x_i) + A H_f`, matrix-free via
//!   the restarted Lanczos solver in [`eig`].
//! * [`satstats`]: moments of the random 3-SAT density of states, the
//!   analytic covariance of shell occupations, and Gaussian surrogate
//!   sampling of large-`n` densities.

// `!(x > 0.0)` style guards are deliberate throughout: unlike `x <= 0.0`
// they also reject NaN. Index loops over matrix entries and energy bins
// keep the index because it carries meaning (bin energy, matrix column).
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod dynamics;
pub mod eig;
pub mod error;
pub mod fit;
pub mod instances;
pub mod quad;
pub mod rng;
pub mod roots;
pub mod satstats;
pub mod schedule;
pub mod spectrum;
pub mod transverse;

pub use error::{Error, Result};
