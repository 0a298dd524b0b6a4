//! Discrete Fourier-restriction diagnostics: space-time transforms, Bourgain-type
//! norms, random-ensemble estimate ratios and the resonance symbol scan.
//!
//! Fields live on `x ∈ 𝕋` times a uniform time grid of `m` samples; the time
//! direction is treated as periodic, so products are formed pointwise on the
//! collocation grid.

mod ensemble;
mod estimates;
mod field;
mod norms;
mod symbol;

pub use ensemble::{random_field, Characteristic, EnsembleConfig};
pub use estimates::{
    bilinear_ratio, derivative_coupling_ratio, run_suite, strichartz_ratio, time_localization_ratio,
    trilinear_ratio, BilinearReport, RatioStats, SuiteConfig, SuiteReport,
};
pub use field::{product, psi, spacetime_coefficients, Component, SpaceTimeField, SpaceTimeGrid, WindowSpec};
pub use norms::{norm, Family, NormSpec};
pub use symbol::{scan_symbol_bound, SymbolScan, TauSpec};
