//! Numerical laboratory for second moments of the symbiotic branching model
//! and related interacting diffusions on Z^d.
//!
//! The library is organized around one analytic pipeline:
//!
//! 1. [`kernels`] — random-walk kernels, return probabilities p_t(0,0) by
//!    Fourier quadrature over the torus, Green functions, power-law tails.
//! 2. [`localtime`] — the renewal equation g(t) = 1 + κ∫ p_r g(t-r) dr for
//!    exponential moments of local times, its Volterra solver, Laplace
//!    transforms, exponential growth rates, and Tauberian asymptotics.
//! 3. [`moments`] — second moments of the symbiotic branching model via the
//!    moment duality, intermittency classification, Lyapunov exponent curves.
//! 4. [`aging`] — two-time correlations and their scaling limits.
//! 5. [`montecarlo`] — independent stochastic verification: lattice
//!    Euler-Maruyama simulation and event-driven dual-particle estimators.
//!
//! The `book/` directory of the repository walks through the same pipeline
//! chapter by chapter; its code snippets compile and run as doctests via the
//! [`book`] module.

pub mod aging;
pub mod book;
pub mod cache;
pub mod error;
pub mod export;
pub mod interp;
pub mod kernels;
pub mod localtime;
pub mod moments;
pub mod montecarlo;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use kernels::{GreenValues, Kernel, KernelSpec, PowerTail, ReturnCurve};
pub use localtime::{
    exact_chain_moment, lyapunov_rate, volterra_solve, volterra_solve_refined, ChainGenerator,
    LatticeReturn, MomentCurve, ReturnKernel,
};
pub use moments::{
    classify_intermittency, critical_moment, gamma2_curve, second_moments, ModelParams, Verdict,
};

/// Library version recorded into cache files and provenance blocks.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
