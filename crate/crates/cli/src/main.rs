mod args;
mod summary;

use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Parser;
use efignn::experiment::{train_seeds, ModelKind, Precision, Preset};
use efignn::heatmap::{to_csv, to_svg};
use efignn::interpret::{effects, EffectQuery};
use efignn::model::predict;
use efignn::model_file::{load_model, save_model, SavedModel};
use efignn::train::evaluate_accuracy;
use efignn::verify::{run_all, VerifyOptions};
use efignn::{load_bundle, CsrMat, Dataset, OpKind};

use args::{Cli, Command, EvaluateArgs, ExplainArgs, Format, TrainArgs, VerifyArgs};
use summary::{EvalSummary, MeanStd, RunSummary, SeedRun, SCHEMA_VERSION};

const EXIT_USAGE: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Raised when verification ran but some check failed.
#[derive(Debug, thiserror::Error)]
#[error("{0} verification check(s) failed")]
struct VerifyFailed(usize);

fn threads() -> usize {
    std::env::var("EFIGNN_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1usize)
        .max(1)
}

fn load(path: &std::path::Path) -> anyhow::Result<Dataset> {
    load_bundle(path).with_context(|| format!("loading bundle {}", path.display()))
}

/// Rejects flags that name a branch the chosen model does not have.
fn check_flags(a: &TrainArgs) -> anyhow::Result<()> {
    let kind = ModelKind::from(a.model);
    let efi_only = [
        ("--efi-layers", a.efi_layers.is_some()),
        ("--include-block0", a.include_block0.is_some()),
    ];
    let gcn_only = [
        ("--gnn-layers", a.gnn_layers.is_some()),
        ("--batch-norm", a.batch_norm.is_some()),
        ("--skip", a.skip.is_some()),
        ("--slope", a.slope.is_some()),
    ];
    for (flag, set) in efi_only {
        if set && !kind.has_efi() {
            bail!("{flag} has no effect with --model {kind}");
        }
    }
    for (flag, set) in gcn_only {
        if set && !kind.has_gcn() {
            bail!("{flag} has no effect with --model {kind}");
        }
    }
    if a.seeds.is_empty() {
        bail!("--seeds needs at least one seed");
    }
    let mut sorted = a.seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != a.seeds.len() {
        bail!("--seeds lists a seed twice");
    }
    if a.epochs == Some(0) {
        bail!("--epochs must be at least 1");
    }
    if let Some(d) = a.dropout {
        if !(0.0..1.0).contains(&d) {
            bail!("--dropout must be in [0, 1)");
        }
    }
    Ok(())
}

fn effective_preset(a: &TrainArgs, name: &str) -> Preset {
    let mut p = Preset::for_dataset(name);
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                p.$field = v;
            }
        };
    }
    set!(efi_layers, a.efi_layers);
    set!(gnn_layers, a.gnn_layers);
    set!(units, a.units);
    set!(learning_rate, a.lr);
    set!(weight_decay, a.weight_decay);
    set!(dropout, a.dropout);
    set!(epochs, a.epochs);
    set!(slope, a.slope);
    set!(batch_norm, a.batch_norm.map(|t| t.on()));
    set!(skip, a.skip.map(Into::into));
    set!(include_block0, a.include_block0.map(|t| t.on()));
    p
}

fn cmd_train(a: TrainArgs) -> anyhow::Result<()> {
    check_flags(&a)?;
    let ds = load(&a.dataset)?;
    let kind = ModelKind::from(a.model);
    let precision = Precision::from(a.precision);
    let preset = effective_preset(&a, &ds.meta.name);
    let cfg = preset.model_config(kind, ds.meta.features, ds.meta.classes);
    cfg.validate()?;
    preset.train_config(0).validate()?;

    let start = Instant::now();
    let mut runs = Vec::new();
    let mut first = None;
    for (&seed, result) in a.seeds.iter().zip(train_seeds(
        &ds,
        &cfg,
        &preset,
        &a.seeds,
        precision,
        threads(),
    )) {
        let (report, params) = result.with_context(|| format!("seed {seed}"))?;
        runs.push(SeedRun::new(seed, &report));
        first.get_or_insert((seed, report.best_epoch, params));
    }
    let best: Vec<f64> = runs.iter().map(|r| r.best_test_acc).collect();
    let last: Vec<f64> = runs.iter().map(|r| r.final_test_acc).collect();
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        command: "train",
        dataset: ds.meta.name.clone(),
        model: kind,
        precision,
        settings: preset,
        config: cfg.clone(),
        seeds: a.seeds.clone(),
        runs,
        test_acc: MeanStd::of(&best),
        final_test_acc: MeanStd::of(&last),
        wall_time_secs: (!a.no_timing).then(|| start.elapsed().as_secs_f64()),
    };

    if let (Some(path), Some((seed, epoch, params))) = (&a.out, first) {
        let info = BTreeMap::from([
            ("dataset".to_string(), ds.meta.name.clone()),
            ("model".to_string(), kind.to_string()),
            ("seed".to_string(), seed.to_string()),
            ("best_epoch".to_string(), epoch.to_string()),
            ("precision".to_string(), precision.to_string()),
        ]);
        save_model(
            path,
            &SavedModel {
                config: cfg,
                params,
                info,
            },
        )
        .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("model of seed {seed} written to {}", path.display());
    }
    print!("{}", summary.human());
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn load_pair(
    model: &std::path::Path,
    dataset: &std::path::Path,
) -> anyhow::Result<(SavedModel, Dataset)> {
    let saved = load_model(model).with_context(|| format!("loading model {}", model.display()))?;
    let ds = load(dataset)?;
    if (saved.config.in_features, saved.config.classes) != (ds.meta.features, ds.meta.classes) {
        bail!(
            "model expects {} features / {} classes, dataset has {} / {}",
            saved.config.in_features,
            saved.config.classes,
            ds.meta.features,
            ds.meta.classes
        );
    }
    Ok((saved, ds))
}

fn cmd_evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let (saved, ds) = load_pair(&a.model, &a.dataset)?;
    let logits = predict(
        &ds.adjacency()?,
        &CsrMat::from_dense(&ds.features),
        &saved.params,
        &saved.config,
    )?;
    let acc = |mask: &[usize]| evaluate_accuracy(&logits, &ds.labels, mask);
    let s = EvalSummary {
        schema_version: SCHEMA_VERSION,
        command: "evaluate",
        dataset: ds.meta.name.clone(),
        train_acc: acc(&ds.masks.train)?,
        val_acc: acc(&ds.masks.val)?,
        test_acc: acc(&ds.masks.test)?,
    };
    println!(
        "{}: train {:.4}  val {:.4}  test {:.4}",
        s.dataset, s.train_acc, s.val_acc, s.test_acc
    );
    println!("{}", serde_json::to_string(&s)?);
    Ok(())
}

fn cmd_explain(a: ExplainArgs) -> anyhow::Result<()> {
    let (saved, ds) = load_pair(&a.model, &a.dataset)?;
    if a.node >= ds.meta.nodes {
        bail!("node {} outside 0..{}", a.node, ds.meta.nodes);
    }
    if a.class >= ds.meta.classes {
        bail!("class {} outside 0..{}", a.class, ds.meta.classes);
    }
    let query = EffectQuery {
        top_k: Some(a.top_k),
        rule: a.rule.into(),
        ..EffectQuery::active(a.node, a.class, a.order)
    };
    let mut full = effects(
        &saved.params,
        &saved.config,
        &ds.features,
        &EffectQuery {
            top_k: None,
            ..query.clone()
        },
    )?;
    fs::create_dir_all(&a.out_dir)?;
    let stem = a.out_dir.join(format!(
        "effects_node{}_class{}_order{}",
        a.node, a.class, a.order
    ));
    if full.is_empty() {
        eprintln!(
            "warning: node {} has no active features; the table is empty",
            a.node
        );
    }
    if a.format != Format::Svg {
        let path = stem.with_extension("csv");
        fs::write(&path, to_csv(&full))?;
        eprintln!("wrote {}", path.display());
    }
    if a.format != Format::Csv {
        if full.is_empty() {
            eprintln!("warning: nothing to draw, no SVG written");
        } else if a.order > 2 {
            eprintln!(
                "warning: order {} has no SVG rendering; use --format csv",
                a.order
            );
        } else {
            let path = stem.with_extension("svg");
            fs::write(&path, to_svg(&full)?)?;
            eprintln!("wrote {}", path.display());
        }
    }
    full.top_k(a.top_k);
    println!(
        "order {} effects, node {}, class {} (top {}):",
        a.order,
        a.node,
        a.class,
        full.len()
    );
    for e in &full.entries {
        let feats: Vec<String> = e.features.iter().map(usize::to_string).collect();
        println!("  {:>16}  {:+.6e}", feats.join("x"), e.effect);
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> anyhow::Result<()> {
    let fault = match a.inject_fault.as_deref() {
        Some(name) => Some(OpKind::parse(name).with_context(|| format!("unknown op {name:?}"))?),
        None => None,
    };
    let start = Instant::now();
    let results = run_all(VerifyOptions { fault });
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "{} checks, {} failed, {:.1}s",
        results.len(),
        failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        return Err(VerifyFailed(failed).into());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<VerifyFailed>().is_some() {
        return EXIT_VERIFY;
    }
    let numeric = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<efignn::Error>(),
            Some(efignn::Error::NumericAbort { .. } | efignn::Error::NonFinite { .. })
        )
    });
    if numeric {
        EXIT_NUMERIC
    } else {
        EXIT_USAGE
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
