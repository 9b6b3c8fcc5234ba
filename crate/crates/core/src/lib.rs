//! Numerical laboratory for linearized compressible Navier–Stokes systems:
//! symbol spectra, Gaussian beams, finite-difference solvers on an interval,
//! observability experiments and penalized-HUM controls.

pub mod beam;
pub mod exec;
pub mod experiments;
pub mod fit;
pub mod hum;
pub mod io;
pub mod params;
pub mod pde;
pub mod quadrature;
pub mod spectral;

