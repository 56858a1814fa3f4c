//! Configuration, sample persistence, the certify/sweep/oracle-check
//! commands and their JSON and CSV outputs.

mod check;
mod config;
mod pipeline;
mod report;
mod samples;
mod sweep;

pub use check::{run_oracle_check, OracleCheckReport};
pub use config::{
    CertKind, InputConfig, ModelConfig, MonteCarloConfig, NoiseFamily, PartitioningConfig, ResolvedThreat, RunConfig,
    SchemeKind, SmoothingConfig, ThreatConfig,
};
pub use pipeline::{build_scheme, run_certify, stream_id, Prepared};
pub use report::{AcrSummary, BoundCounts, CertReport, CurvePoint, PredictionReport, VERSION};
pub use samples::{SampleBatch, SampleSet};
pub use sweep::{pareto_dominated, run_sweep, sweep_csv, SweepGrid, SweepPoint, SweepRow};
