//! Per-dataset default settings and seeded training runs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bundle::Dataset;
use crate::csr::CsrMat;
use crate::error::{Error, Result};
use crate::model::{EfiGnnConfig, GcnConfig, ModelConfig, ModelParams, SkipMode};
use crate::train::{train, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Efignn,
    Gcn,
    Joint,
}

impl ModelKind {
    pub fn has_efi(self) -> bool {
        self != ModelKind::Gcn
    }

    pub fn has_gcn(self) -> bool {
        self != ModelKind::Efignn
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "efignn" | "efi" => Ok(ModelKind::Efignn),
            "gcn" => Ok(ModelKind::Gcn),
            "joint" => Ok(ModelKind::Joint),
            _ => Err(Error::InvalidArgument(format!(
                "unknown model {s:?} (efignn, gcn, joint)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Efignn => "efignn",
            ModelKind::Gcn => "gcn",
            ModelKind::Joint => "joint",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(Error::InvalidArgument(format!(
                "unknown precision {s:?} (f32, f64)"
            ))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

/// Flat hyper-parameter set from which model and training configs are built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub gnn_layers: usize,
    pub efi_layers: usize,
    pub units: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub skip: SkipMode,
    pub batch_norm: bool,
    pub epochs: usize,
    pub slope: f64,
    pub include_block0: bool,
}

impl Preset {
    /// Tuned settings for the citation datasets; anything else gets the
    /// large-graph settings.
    pub fn for_dataset(name: &str) -> Self {
        let citation = Preset {
            gnn_layers: 3,
            efi_layers: 2,
            units: 128,
            learning_rate: 1e-3,
            weight_decay: 1e-2,
            dropout: 0.9,
            skip: SkipMode::None,
            batch_norm: false,
            epochs: 200,
            slope: 0.01,
            include_block0: true,
        };
        match name.to_ascii_lowercase().as_str() {
            "cora" | "citeseer" => citation,
            "pubmed" => Preset {
                units: 1024,
                weight_decay: 1e-3,
                dropout: 0.85,
                skip: SkipMode::Dense,
                batch_norm: true,
                ..citation
            },
            _ => Preset {
                gnn_layers: 1,
                efi_layers: 1,
                learning_rate: 0.01,
                weight_decay: 0.0,
                dropout: 0.3,
                batch_norm: true,
                epochs: 1000,
                ..citation
            },
        }
    }

    pub fn model_config(&self, kind: ModelKind, in_features: usize, classes: usize) -> ModelConfig {
        ModelConfig {
            in_features,
            classes,
            efi: kind.has_efi().then(|| EfiGnnConfig {
                num_layers: self.efi_layers,
                units: self.units,
                dropout: self.dropout,
                include_block0: self.include_block0,
            }),
            gcn: kind.has_gcn().then(|| GcnConfig {
                num_layers: self.gnn_layers,
                units: self.units,
                slope: self.slope,
                dropout: self.dropout,
                skip: self.skip,
                batch_norm: self.batch_norm,
                bn_eps: 1e-5,
                bn_momentum: 0.9,
            }),
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            seed,
            ..Default::default()
        }
    }
}

/// Trains one seed at the requested precision. Parameters come back in f64.
pub fn train_dataset(
    ds: &Dataset,
    cfg: &ModelConfig,
    tc: &TrainConfig,
    precision: Precision,
) -> Result<(TrainReport, ModelParams<f64>)> {
    let adj = ds.adjacency()?;
    let x = CsrMat::from_dense(&ds.features);
    match precision {
        Precision::F64 => train(&adj, &x, &ds.labels, &ds.masks, cfg, tc),
        Precision::F32 => {
            let (r, p) = train(
                &adj.cast::<f32>(),
                &x.cast::<f32>(),
                &ds.labels,
                &ds.masks,
                cfg,
                tc,
            )?;
            Ok((r, p.cast()))
        }
    }
}

/// Trains every seed, `threads` runs at a time, results in seed order.
pub fn train_seeds(
    ds: &Dataset,
    cfg: &ModelConfig,
    preset: &Preset,
    seeds: &[u64],
    precision: Precision,
    threads: usize,
) -> Vec<Result<(TrainReport, ModelParams<f64>)>> {
    let run = |&seed: &u64| train_dataset(ds, cfg, &preset.train_config(seed), precision);
    if threads <= 1 {
        return seeds.iter().map(run).collect();
    }
    let mut out = Vec::with_capacity(seeds.len());
    for chunk in seeds.chunks(threads) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|seed| s.spawn(move || run(seed)))
                .collect();
            out.extend(
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training thread panicked")),
            );
        });
    }
    out
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_by_name() {
        let cora = Preset::for_dataset("cora");
        assert_eq!((cora.gnn_layers, cora.efi_layers, cora.units), (3, 2, 128));
        assert_eq!(
            (cora.learning_rate, cora.weight_decay, cora.dropout),
            (1e-3, 1e-2, 0.9)
        );
        assert_eq!(Preset::for_dataset("CiteSeer"), cora);
        let pubmed = Preset::for_dataset("pubmed");
        assert_eq!(
            (pubmed.units, pubmed.skip, pubmed.batch_norm),
            (1024, SkipMode::Dense, true)
        );
        let other = Preset::for_dataset("ogbn-arxiv");
        assert_eq!(
            (other.gnn_layers, other.efi_layers, other.epochs),
            (1, 1, 1000)
        );
        assert_eq!(
            (other.learning_rate, other.weight_decay, other.dropout),
            (0.01, 0.0, 0.3)
        );
    }

    #[test]
    fn kinds_select_branches() {
        let p = Preset::for_dataset("cora");
        let gcn = p.model_config(ModelKind::Gcn, 10, 3);
        assert!(gcn.efi.is_none() && gcn.gcn.is_some());
        let joint = p.model_config("joint".parse().unwrap(), 10, 3);
        assert!(joint.efi.is_some() && joint.gcn.is_some());
        assert!("mlp".parse::<ModelKind>().is_err());
    }

    #[test]
    fn threaded_sweep_matches_sequential() {
        let ds = crate::verify::toy_dataset();
        let preset = Preset {
            units: 4,
            epochs: 5,
            ..Preset::for_dataset("cora")
        };
        let cfg = preset.model_config(ModelKind::Joint, 5, 2);
        let seeds = [3, 1, 4];
        let summary = |runs: Vec<Result<(TrainReport, ModelParams<f64>)>>| -> Vec<String> {
            runs.into_iter()
                .map(|r| serde_json::to_string(&r.unwrap().0).unwrap())
                .collect()
        };
        let a = summary(train_seeds(&ds, &cfg, &preset, &seeds, Precision::F64, 1));
        let b = summary(train_seeds(&ds, &cfg, &preset, &seeds, Precision::F64, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn statistics() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
