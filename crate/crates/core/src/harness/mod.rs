//! Orchestration: configuration, experiment runners, artifacts, score
//! tables, the prediction endpoint and the command line.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod experiments;
pub mod serve;
pub mod table;

pub use artifacts::{ArtifactRef, ArtifactStore, Manifest};
pub use config::ExperimentConfig;
pub use experiments::{
    attack_family, attack_table, expand_family, families, interface_attack, interpret_models, monotonicity_run,
    sensitivity_run, utility_table, Family, FamilyRun, InterfaceTrial, InterpretModels, Probes, UtilityTable,
};
pub use serve::{Server, ServeOptions};
pub use table::{ScoreRow, ScoreTable};
