use std::fmt::Write as _;

use efignn::experiment::{mean_std, ModelKind, Precision, Preset};
use efignn::model::ModelConfig;
use efignn::train::TrainReport;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub best_test_acc: f64,
    pub final_val_acc: f64,
    pub final_test_acc: f64,
    pub final_loss: f64,
}

impl SeedRun {
    pub fn new(seed: u64, r: &TrainReport) -> Self {
        Self {
            seed,
            best_epoch: r.best_epoch,
            best_val_acc: r.best_val_acc,
            best_test_acc: r.best_test_acc,
            final_val_acc: r.final_val_acc,
            final_test_acc: r.final_test_acc,
            final_loss: r.history.last().map_or(f64::NAN, |e| e.loss),
        }
    }
}

/// One JSON-lines record per `train` invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub command: &'static str,
    pub dataset: String,
    pub model: ModelKind,
    pub precision: Precision,
    pub settings: Preset,
    pub config: ModelConfig,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedRun>,
    /// Test accuracy at the best-validation snapshot.
    pub test_acc: MeanStd,
    pub final_test_acc: MeanStd,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

impl RunSummary {
    pub fn human(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} on {} ({}), {} seed(s)",
            self.model,
            self.dataset,
            self.precision,
            self.seeds.len()
        );
        for r in &self.runs {
            let _ = writeln!(
                s,
                "  seed {:>4}: best epoch {:>4}  val {:.4}  test {:.4} | final val {:.4}  test {:.4}  loss {:.4}",
                r.seed, r.best_epoch, r.best_val_acc, r.best_test_acc, r.final_val_acc, r.final_test_acc, r.final_loss
            );
        }
        let _ = writeln!(
            s,
            "test accuracy: {:.2} ± {:.2} (best-val snapshot), {:.2} ± {:.2} (final epoch)",
            100.0 * self.test_acc.mean,
            100.0 * self.test_acc.std,
            100.0 * self.final_test_acc.mean,
            100.0 * self.final_test_acc.std
        );
        if let Some(t) = self.wall_time_secs {
            let _ = writeln!(s, "wall time: {t:.1}s");
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub schema_version: u32,
    pub command: &'static str,
    pub dataset: String,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}
