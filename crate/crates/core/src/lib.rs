//! Numerical study of the squared singular values of `P = X2 * X1`, a product
//! of two independent complex Gaussian (Ginibre) matrices.
//!
//! The crate covers every computable object attached to that ensemble:
//!
//! * [`specfun`] — Macdonald functions `K_nu`, the `rho_gamma` family
//!   `rho_gamma(x) = 2 x^{gamma/2} K_gamma(2 sqrt x)`, the two-variable weight
//!   `w(x,y) = y^{-1} exp(-x/y - y)`, and exact Mellin moments used as oracles.
//! * [`quad`] — adaptive Gauss–Kronrod quadrature on finite and semi-infinite
//!   intervals with endpoint-singularity substitutions.
//! * [`mop`] — the multiple orthogonal polynomials `P_k^{(gamma,kappa)}`
//!   associated with Macdonald functions: exact rational coefficients, the
//!   four-term recurrence, stable scaled evaluation, and zero sets.
//! * [`limitlaw`] — the limiting spectral density, its CDF, moments, edge
//!   constants, and the Marchenko–Pastur baseline.
//! * [`ensemble`] — seeded, reproducible Monte Carlo sampling of the product
//!   ensemble with empirical-CDF and Kolmogorov–Smirnov comparators.
//! * [`dppkernel`] — the finite-`N` determinantal correlation kernel, its
//!   biorthogonality structure, and the equivalence of the two joint-density
//!   representations.
//! * [`verify`] — named check suites driving the above, consumed by the CLI.

pub mod bigf;
pub mod dd;
pub mod dppkernel;
pub mod ensemble;
pub mod limitlaw;
pub mod logval;
pub mod mop;
pub mod quad;
pub mod specfun;
pub mod verify;

pub use logval::LogVal;

/// Version string stamped into output manifests.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
