//! Fractional-step Runge-Kutta schemes as generalized additive Runge-Kutta
//! methods: tableaux, splitting tables, extended-tableau assembly,
//! stability analysis and a reference integrator.

pub mod coef;
pub mod error;
pub mod gark;
pub mod integrator;
pub mod poly;
pub mod problems;
pub mod splitting;
pub mod stability;
pub mod tableau;

pub use coef::{Coef, CoefMatrix};
pub use error::{FsrkError, Result};
pub use gark::{
    build_compact, build_extended, CompactTableau, ExtendedTableau, FsrkScheme, StageIndex,
};
pub use integrator::{integrate, step, AdditiveOdeProblem, IntegrationResult, Stepper};
pub use problems::{
    brusselator, linear_split, BrusselatorMol, BrusselatorParams, DiagonalLinearProblem,
    LinearSplitProblem,
};
pub use splitting::{catalogue_splitting, SplittingMethod};
pub use stability::{
    product_stability, real_axis_intercept, sample_left_half_plane, scan_region, GridSpec, Hole,
    Intercept, Pole, ProductStabilityFunction, RayRestriction, RegionScan,
};
pub use tableau::{catalogue, ButcherTableau};
