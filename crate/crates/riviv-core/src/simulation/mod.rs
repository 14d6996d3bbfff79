//! Monte Carlo harness: contaminated data-generating processes, power curves
//! and the null block-diagonality diagnostic.

mod dgp;
mod lemma;
mod power;

pub use dgp::{
    apply_contamination, generate_baseline, generate_scenario, Contamination, ScenarioConfig, OUTLIER_Y,
    OUTLIER_Z, T3_CONTAMINATED_ROWS,
};
pub use lemma::{check_lemma_config, lemma1_diagnostic, lemma_aggregate, lemma_replicate, LemmaDraw, LemmaReport};
pub use power::{
    default_beta_grid, linspace, power_curve, PowerCurve, PowerSeries, PowerStudy, Rejections, Tally, TestSpec,
    CLR_BANK_STREAM, MAX_FAILURE_RATE,
};
