use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{best_of, train_with, TrainConfig};
use crate::cells::{Activation, CellRegistry};
use crate::data::Dataset;
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";

/// The first six columns are the summary contract; `best_test_epoch` and
/// `status` trail them.
pub const SUMMARY_HEADER: &str =
    "variant,activation,eta,best_train,best_test,params,best_test_epoch,status";

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub variants: Vec<String>,
    pub activations: Vec<Activation>,
    pub etas: Vec<f64>,
}

impl GridSpec {
    pub fn cells(&self) -> usize {
        self.variants.len() * self.activations.len() * self.etas.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub variant: String,
    pub activation: Activation,
    pub eta: f64,
    pub best_train: f64,
    pub best_test: f64,
    pub params: usize,
    pub best_test_epoch: usize,
    pub metrics_path: PathBuf,
    /// `None` on success.
    pub error: Option<String>,
}

impl GridRow {
    fn csv_line(&self) -> String {
        let status = match &self.error {
            None => "ok".to_string(),
            // Keep the status a single CSV field.
            Some(e) => format!("\"error: {}\"", e.replace('"', "'")),
        };
        format!(
            "{},{},{},{},{},{},{},{}",
            self.variant,
            self.activation,
            self.eta,
            self.best_train,
            self.best_test,
            self.params,
            self.best_test_epoch,
            status
        )
    }
}

pub fn metrics_file_name(variant: &str, activation: Activation, eta: f64) -> String {
    format!(
        "{}_{}_eta{:e}.csv",
        variant.to_ascii_lowercase(),
        activation,
        eta
    )
}

/// Trains every (variant, activation, η) cell in turn, writing one metrics
/// CSV per cell and a summary CSV into `out_dir`. A failing cell is recorded
/// in the summary and the grid continues.
pub fn run_grid(
    grid: &GridSpec,
    base: &TrainConfig,
    dataset: &Dataset,
    registry: &CellRegistry,
    out_dir: &Path,
    mut on_cell: impl FnMut(&GridRow),
) -> Result<Vec<GridRow>> {
    if grid.cells() == 0 {
        return Err(Error::Config("grid axes must be nonempty".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let summary_path = out_dir.join(SUMMARY_FILE);
    let mut summary = File::create(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    writeln!(summary, "{SUMMARY_HEADER}").map_err(|e| Error::io(&summary_path, e))?;

    let mut rows = Vec::with_capacity(grid.cells());
    for variant in &grid.variants {
        for &activation in &grid.activations {
            for &eta in &grid.etas {
                let metrics_path = out_dir.join(metrics_file_name(variant, activation, eta));
                let config = TrainConfig {
                    variant: variant.clone(),
                    activation,
                    eta,
                    metrics_path: Some(metrics_path.clone()),
                    ..base.clone()
                };
                let outcome = train_with(&config, dataset, registry, |_| {})
                    .and_then(|o| Ok((best_of(&o.metrics)?, o.param_count)));
                let label = registry
                    .build(variant, activation)
                    .map(|c| c.name().to_string())
                    .unwrap_or_else(|_| variant.clone());
                let row = match outcome {
                    Ok((best, params)) => GridRow {
                        variant: label,
                        activation,
                        eta,
                        best_train: best.train,
                        best_test: best.test,
                        params,
                        best_test_epoch: best.test_epoch,
                        metrics_path,
                        error: None,
                    },
                    Err(e) => GridRow {
                        variant: label,
                        activation,
                        eta,
                        best_train: f64::NAN,
                        best_test: f64::NAN,
                        params: 0,
                        best_test_epoch: 0,
                        metrics_path,
                        error: Some(e.to_string()),
                    },
                };
                writeln!(summary, "{}", row.csv_line())
                    .and_then(|_| summary.flush())
                    .map_err(|e| Error::io(&summary_path, e))?;
                on_cell(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}
