//! Experiment orchestration: scenario configs, presets and the deterministic
//! Monte-Carlo runners behind the CLI.

pub mod config;
pub mod runner;

pub use config::{
    preset, preset_json, preset_names, CcdfStatistic, ExperimentKind, FilterSpec, ImpairmentSpec,
    ScenarioConfig, SnrSetting, WelchSpec,
};
pub use runner::{run, RunReport};
