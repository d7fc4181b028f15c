//! Torus-invariant Monge-Ampere problems in logarithmic coordinates.

mod checks;
mod ladder;
mod scheme;

pub use checks::{calibrate_tau, check_comparison, check_max_lemma, compliant_density_from_radial, ComparisonReport, CompliantDensity, MaxLemmaReport, COMPARISON_TOL};
pub use ladder::{laplace_extension, lower_truncation_ladder, upper_truncation_ladder, MAProblem, MaLadder, IDENTITY_TOL, LADDER_TOL};
pub use scheme::{
    ma_operator, solve_dirichlet_bounded, solve_dirichlet_with, Init, MaOptions, MaSolve, MeasureDensity, ToricField, CONE_TOL,
    PAIRS, TOL_MA,
};
