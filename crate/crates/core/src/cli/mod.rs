//! Configuration, experiment drivers and file emitters behind the `modify`
//! binary.

pub mod ablation;
pub mod config;
pub mod emit;
pub mod svg;

pub use ablation::{run_ablation, AblationReport, AblationRow};
pub use config::{parse_config, parse_kv_text, Mode, TrainConfig, KEYS};
