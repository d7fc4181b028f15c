//! Harmonic analysis on the unit disk.

mod majorant;
mod measure;
mod poisson;
mod riesz;

pub use measure::{
    delta_bpolar, harmonic_measure, harmonic_measure_field, nonuniqueness_witness, radial_limit, HarmonicMeasure,
    WitnessPair,
};
pub use majorant::{build_majorant, check_quasibounded, gauge_value, EpsBound, QuasiboundCertificate, QuasiboundReport, EPS_SCHEDULE, MAX_TERMS};
pub use riesz::{poisson_solve_complex, riesz_demo, RieszChain};
pub use poisson::{adaptive_levels, poisson_solve, truncation_ladder, Direction, Part, PoissonIntegral, TruncationLadder};
