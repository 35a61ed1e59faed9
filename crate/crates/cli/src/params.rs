//! Subcommand parameters. Every field is optional so that a JSON config
//! file can supply it; flags win over file values.

use std::path::PathBuf;

use clap::Args;
use memfail::fengine::Mode;
use memfail::simgen::FleetConfig;
use serde::{Deserialize, Serialize};

macro_rules! params {
    ($(#[$m:meta])* $name:ident { $( $(#[$fm:meta])* $field:ident : $ty:ty ),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            $( $(#[$fm])* pub $field: Option<$ty>, )*
        }

        impl $name {
            /// Fills fields not given on the command line from `file`.
            pub fn or(self, file: Self) -> Self {
                $name { $( $field: self.$field.or(file.$field), )* }
            }
        }
    };
}

params!(SimulateParams {
    /// Output CE log (JSON lines)
    #[arg(long)]
    log: PathBuf,
    /// Output failures CSV
    #[arg(long)]
    failures: PathBuf,
    /// Output ground-truth manifest (JSON)
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    n_normal: usize,
    #[arg(long)]
    n_failing: usize,
    #[arg(long)]
    duration_hours: f64,
    /// Fraction of normal DIMMs with a burst that does not end in failure
    #[arg(long)]
    benign_burst_fraction: f64,
    #[arg(long)]
    seed: u64,
    /// Full fleet configuration (config file only)
    #[arg(skip)]
    fleet: FleetConfig,
});

params!(ExtractParams {
    /// Input CE log (JSON lines)
    #[arg(long)]
    log: PathBuf,
    /// Output feature CSV
    #[arg(long)]
    out: PathBuf,
    #[arg(long, alias = "w")]
    window_hours: f64,
    #[arg(long, value_parser = parse_mode)]
    mode: Mode,
});

params!(LabelParams {
    /// Input feature CSV from `extract`
    #[arg(long)]
    features: PathBuf,
    /// Failures CSV
    #[arg(long)]
    failures: PathBuf,
    /// Output labeled feature CSV
    #[arg(long)]
    out: PathBuf,
    /// Output split manifest (JSON)
    #[arg(long)]
    splits: PathBuf,
    #[arg(long)]
    lead_hours: f64,
    #[arg(long)]
    n_normal: usize,
    #[arg(long)]
    repeats: usize,
    #[arg(long)]
    seed: u64,
});

params!(ForestFlags {
    #[arg(long)]
    n_trees: usize,
    #[arg(long)]
    max_depth: usize,
    #[arg(long)]
    min_samples_split: usize,
    #[arg(long)]
    features_per_split: usize,
    /// Forest seed
    #[arg(long)]
    forest_seed: u64,
});

params!(TrainParams {
    /// Labeled feature CSV
    #[arg(long)]
    features: PathBuf,
    /// Output model file (JSON)
    #[arg(long)]
    model: PathBuf,
    /// Restrict training to one repeat of a split manifest
    #[arg(long)]
    splits: PathBuf,
    #[arg(long, requires = "splits")]
    repeat: usize,
});

params!(PredictParams {
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV (labels are ignored)
    #[arg(long)]
    features: PathBuf,
    /// Output verdict CSV
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threshold: f64,
});

params!(EvaluateParams {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    failures: PathBuf,
    /// Directory for report.json, report.txt and baseline CSVs
    #[arg(long)]
    out_dir: PathBuf,
    /// Window length in hours (repeatable)
    #[arg(long = "w", alias = "window-hours")]
    windows: Vec<f64>,
    /// Normal-DIMM subsample size (repeatable)
    #[arg(long = "n-normal")]
    n_normals: Vec<usize>,
    #[arg(long, value_parser = ["overall", "fixed", "both"])]
    mode: String,
    #[arg(long)]
    lead_hours: f64,
    #[arg(long)]
    repeats: usize,
    #[arg(long)]
    folds: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    threshold: f64,
});

params!(CatalogParams {
    /// Write the document here instead of standard output
    #[arg(long)]
    out: PathBuf,
});

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

/// Contents of a `--config` file: one optional section per subcommand.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub simulate: SimulateParams,
    pub extract: ExtractParams,
    pub label: LabelParams,
    pub train: TrainParams,
    pub predict: PredictParams,
    pub evaluate: EvaluateParams,
    pub catalog: CatalogParams,
    /// Forest hyperparameters for `train` and `evaluate`
    pub forest: ForestFlags,
}
