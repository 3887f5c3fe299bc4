pub mod adaptive;
pub mod basis;
pub mod error;
pub mod events;
pub mod exec;
pub mod features;
pub mod gibbs;
pub mod intensity;
pub mod link;
pub mod metrics;
pub mod model;
pub mod params;
pub mod pg;
pub mod quadrature;
pub mod scenarios;
pub mod simulate;
pub mod vi;

pub use adaptive::{
    detect_gap_threshold, expected_l1_norm, fully_adaptive, model_weights, two_step,
    AdaptiveResult, AveragingMode, FitOptions, GraphEstimate, ModelPrior, ModelSet, Threshold,
    TwoStepResult,
};
pub use basis::HistogramBasis;
pub use error::{Error, Result};
pub use events::EventData;
pub use exec::Execution;
pub use gibbs::{gibbs_sample, GibbsChain, GibbsConfig};
pub use intensity::{basis_features, intensity, linear_drive, log_likelihood};
pub use link::{LinkFunction, LinkKind};
pub use metrics::{dim_accuracy, evaluate, graph_accuracy, l1_risk, EvalReport};
pub use model::{Model, SubModel};
pub use params::HawkesParams;
pub use pg::{log_g, pg_mean, pg_sample};
pub use quadrature::{QuadratureGrid, QuadratureRule};
pub use simulate::{excursion_stats, simulate, ExcursionStats, SimConfig};
pub use vi::{cavi_fixed_model, elbo, GaussianPosterior, GaussianPrior, PriorSpec, ViConfig};
