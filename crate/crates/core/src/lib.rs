//! Surface-integral measures of global and tail dependence for bivariate
//! copulas, with the supporting copula families, generalized hyperbolic
//! implied copulas, estimation and simulation drivers.

pub mod benchmarks;
pub mod copulas;
pub mod estimation;
pub mod ghdist;
pub mod measures;
pub mod numerics;
pub mod surfaces;
