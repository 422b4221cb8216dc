//! Self-checks: gradient checks, oracle equivalences and model invariants.
//!
//! Every check is small and deterministic. The CLI `verify` command and the
//! acceptance harness both run [`run_all`].

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::{Dataset, Meta};
use crate::csr::CsrMat;
use crate::dense::DenseMat;
use crate::error::Result;
use crate::gradcheck::{compare_with_central_differences, finite_diff_check, GradCheckOptions};
use crate::interpret::{
    active_features, block_contribution, effects, EffectQuery, FeatureSelection,
};
use crate::model::{
    forward, predict, EfiGnnConfig, GcnConfig, Mode, ModelConfig, ModelParams, SkipMode,
};
use crate::model_file::{from_bytes, to_bytes, SavedModel};
use crate::oracle::{
    all_graphs, dense_normalized_adjacency, efi_blocks_by_enumeration, first_order_terms,
};
use crate::sparse::{normalized_adjacency, EdgeList, SparseAdj};
use crate::tape::{BatchNormOptions, BatchNormState, OpKind, Tape, Var};
use crate::train::{train, SplitMasks, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// The measured error (or other statistic) compared to `tolerance`.
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.3e} (tol {:.0e}){}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            if self.detail.is_empty() {
                String::new()
            } else {
                format!(" {}", self.detail)
            }
        )
    }
}

fn below(
    name: impl Into<String>,
    measured: f64,
    tolerance: f64,
    detail: impl Into<String>,
) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: measured < tolerance,
        measured,
        tolerance,
        detail: detail.into(),
    }
}

fn errored(name: impl Into<String>, err: impl fmt::Display) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: false,
        measured: f64::NAN,
        tolerance: 0.0,
        detail: format!("error: {err}"),
    }
}

fn check(name: &str, r: Result<CheckResult>) -> CheckResult {
    r.unwrap_or_else(|e| errored(name, e))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Corrupt one backward rule; the gradient checks must then fail.
    pub fault: Option<OpKind>,
}

/// Four nodes on a path, two classes, five binary features. Features 0–1
/// mark class 0 and 2–4 mark class 1.
pub fn toy_dataset() -> Dataset {
    let features = DenseMat::from_rows(&[
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0, 0.0],
        [0.0, 0.0, 1.0, 1.0, 1.0],
    ])
    .expect("rectangular");
    Dataset {
        meta: Meta {
            name: "toy".into(),
            nodes: 4,
            features: 5,
            classes: 2,
            extra: BTreeMap::new(),
        },
        features,
        edges: EdgeList {
            num_nodes: 4,
            edges: vec![(0, 1), (1, 2), (2, 3)],
        },
        labels: vec![0, 0, 1, 1],
        masks: SplitMasks {
            train: vec![0, 3],
            val: vec![1],
            test: vec![2],
        },
    }
}

fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMat {
    DenseMat::uniform(rows, cols, 1.0, rng)
}

/// Random values in [−1, 1] kept at least `gap` away from zero.
fn away_from_zero(rows: usize, cols: usize, gap: f64, rng: &mut ChaCha8Rng) -> DenseMat {
    let data = (0..rows * cols)
        .map(|_| loop {
            let v: f64 = rng.gen_range(-1.0..=1.0);
            if v.abs() > gap {
                break v;
            }
        })
        .collect();
    DenseMat::from_vec(rows, cols, data).expect("shape")
}

fn toy_adjacency() -> SparseAdj {
    toy_dataset().adjacency().expect("valid toy graph")
}

/// `sum(op(params) ⊙ R)` for a fixed random `R`, so every output entry
/// carries a distinct upstream gradient.
fn weighted<'g>(tape: &mut Tape<'g, f64>, out: Var, seed: u64) -> Result<Var> {
    let (r, c) = tape.value(out).shape();
    let w = tape.constant(uniform(r, c, &mut ChaCha8Rng::seed_from_u64(seed)));
    let prod = tape.hadamard(out, w)?;
    tape.sum(prod)
}

/// Finite-difference checks of every tape operation.
pub fn op_gradient_checks(opts: VerifyOptions) -> Vec<CheckResult> {
    let g = GradCheckOptions {
        fault: opts.fault,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let adj = toy_adjacency();
    let sparse_x = CsrMat::from_dense(&toy_dataset().features);
    let mut out = Vec::new();
    fn run<'g>(
        out: &mut Vec<CheckResult>,
        g: GradCheckOptions,
        name: &str,
        tol: f64,
        params: Vec<DenseMat>,
        build: &dyn Fn(&mut Tape<'g, f64>, &[Var]) -> Result<Var>,
    ) {
        let r = finite_diff_check(&params, build, g).map(|r| {
            below(
                format!("grad/{name}"),
                r.max_rel_error,
                tol,
                format!("{} coords", r.coordinates),
            )
        });
        out.push(check(name, r));
    }
    run(
        &mut out,
        g,
        "matmul",
        1e-6,
        vec![uniform(3, 4, &mut rng), uniform(4, 2, &mut rng)],
        &|t, v| {
            let y = t.matmul(v[0], v[1])?;
            weighted(t, y, 1)
        },
    );
    run(
        &mut out,
        g,
        "sparse_matmul",
        1e-6,
        vec![uniform(5, 3, &mut rng)],
        &|t, v| {
            let y = t.sparse_matmul(Cow::Borrowed(&sparse_x), v[0])?;
            weighted(t, y, 2)
        },
    );
    run(
        &mut out,
        g,
        "spmm",
        1e-6,
        vec![uniform(4, 3, &mut rng)],
        &|t, v| {
            let y = t.spmm(&adj, v[0])?;
            weighted(t, y, 3)
        },
    );
    run(
        &mut out,
        g,
        "hadamard",
        1e-6,
        vec![uniform(3, 3, &mut rng), uniform(3, 3, &mut rng)],
        &|t, v| {
            let y = t.hadamard(v[0], v[1])?;
            weighted(t, y, 4)
        },
    );
    run(
        &mut out,
        g,
        "add",
        1e-6,
        vec![uniform(2, 3, &mut rng), uniform(2, 3, &mut rng)],
        &|t, v| {
            let y = t.add(v[0], v[1])?;
            weighted(t, y, 5)
        },
    );
    run(
        &mut out,
        g,
        "concat_cols",
        1e-6,
        vec![
            uniform(3, 1, &mut rng),
            uniform(3, 2, &mut rng),
            uniform(3, 3, &mut rng),
        ],
        &|t, v| {
            let y = t.concat_cols(v)?;
            weighted(t, y, 6)
        },
    );
    run(
        &mut out,
        g,
        "leaky_relu",
        1e-6,
        vec![away_from_zero(4, 4, 1e-3, &mut rng)],
        &|t, v| {
            let y = t.leaky_relu(v[0], 0.01)?;
            weighted(t, y, 7)
        },
    );
    run(
        &mut out,
        g,
        "dropout",
        1e-6,
        vec![uniform(6, 5, &mut rng)],
        &|t, v| {
            let mut r = ChaCha8Rng::seed_from_u64(8);
            let y = t.dropout(v[0], 0.5, true, &mut r)?;
            weighted(t, y, 9)
        },
    );
    let bn_params = vec![
        uniform(5, 4, &mut rng),
        away_from_zero(1, 4, 0.1, &mut rng),
        uniform(1, 4, &mut rng),
    ];
    run(
        &mut out,
        g,
        "batch_norm/train",
        1e-5,
        bn_params.clone(),
        &|t, v| {
            let mut state = BatchNormState::new(4);
            let y = t.batch_norm(v[0], v[1], v[2], &mut state, BatchNormOptions::default())?;
            weighted(t, y, 10)
        },
    );
    run(&mut out, g, "batch_norm/eval", 1e-5, bn_params, &|t, v| {
        let mut state = BatchNormState {
            running_mean: vec![0.1, -0.2, 0.3, 0.0],
            running_var: vec![0.5, 1.5, 2.0, 0.9],
        };
        let opts = BatchNormOptions {
            training: false,
            ..Default::default()
        };
        let y = t.batch_norm(v[0], v[1], v[2], &mut state, opts)?;
        weighted(t, y, 12)
    });
    run(
        &mut out,
        g,
        "softmax_cross_entropy",
        1e-6,
        vec![uniform(5, 3, &mut rng)],
        &|t, v| t.softmax_cross_entropy(v[0], &[0, 2, 1, 1, 0], &[0, 1, 3]),
    );
    run(
        &mut out,
        g,
        "sum",
        1e-6,
        vec![uniform(3, 2, &mut rng)],
        &|t, v| t.sum(v[0]),
    );
    out
}

/// Configurations exercised by the model-level checks.
pub fn model_variants(in_features: usize, classes: usize) -> Vec<(&'static str, ModelConfig)> {
    let efi = EfiGnnConfig {
        num_layers: 2,
        units: 3,
        dropout: 0.3,
        include_block0: true,
    };
    let gcn = GcnConfig {
        num_layers: 2,
        units: 3,
        slope: 0.01,
        dropout: 0.3,
        skip: SkipMode::None,
        batch_norm: false,
        bn_eps: 1e-5,
        bn_momentum: 0.9,
    };
    let base = ModelConfig {
        in_features,
        classes,
        efi: None,
        gcn: None,
    };
    vec![
        (
            "efi",
            ModelConfig {
                efi: Some(efi.clone()),
                ..base.clone()
            },
        ),
        (
            "efi-no-block0",
            ModelConfig {
                efi: Some(EfiGnnConfig {
                    include_block0: false,
                    ..efi.clone()
                }),
                ..base.clone()
            },
        ),
        (
            "gcn",
            ModelConfig {
                gcn: Some(gcn.clone()),
                ..base.clone()
            },
        ),
        (
            "gcn-bn-dense",
            ModelConfig {
                gcn: Some(GcnConfig {
                    num_layers: 3,
                    skip: SkipMode::Dense,
                    batch_norm: true,
                    ..gcn.clone()
                }),
                ..base.clone()
            },
        ),
        (
            "gcn-additive",
            ModelConfig {
                gcn: Some(GcnConfig {
                    skip: SkipMode::Additive,
                    ..gcn.clone()
                }),
                ..base.clone()
            },
        ),
        (
            "joint",
            ModelConfig {
                efi: Some(efi),
                gcn: Some(gcn),
                ..base
            },
        ),
    ]
}

fn with_tensors(base: &ModelParams, values: &[DenseMat]) -> ModelParams {
    let mut p = base.clone();
    for ((_, slot), v) in p.tensors_mut().into_iter().zip(values) {
        *slot = v.clone();
    }
    p
}

/// Training-mode masked loss and its parameter gradients, with dropout
/// masks drawn from `seed`.
pub fn model_loss(
    adj: &SparseAdj,
    x: &CsrMat,
    labels: &[usize],
    mask: &[usize],
    params: &ModelParams,
    cfg: &ModelConfig,
    seed: u64,
    fault: Option<OpKind>,
) -> Result<(f64, Vec<DenseMat>)> {
    let mut tape = Tape::new();
    if let Some(k) = fault {
        tape.inject_fault(k);
    }
    let mut p = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = forward(&mut tape, adj, x, &mut p, cfg, Mode::Train, &mut rng)?;
    let loss = tape.softmax_cross_entropy(out.logits, labels, mask)?;
    let mut grads = tape.backward(loss)?;
    let g = out
        .param_vars
        .iter()
        .map(|v| grads.take(*v).expect("parameter gradient"))
        .collect();
    Ok((tape.value(loss).item(), g))
}

/// Finite-difference checks of full model losses on the toy graph.
pub fn model_gradient_checks(opts: VerifyOptions) -> Vec<CheckResult> {
    let ds = toy_dataset();
    let adj = toy_adjacency();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    // Real-valued features exercise more of the arithmetic than 0/1 ones.
    let scale: Vec<f64> = (0..20).map(|_| rng.gen_range(0.5..1.5)).collect();
    let mut feats = ds.features.clone();
    feats
        .as_mut_slice()
        .iter_mut()
        .zip(&scale)
        .for_each(|(v, s)| *v *= s);
    let x = CsrMat::from_dense(&feats);
    let all: Vec<usize> = (0..4).collect();
    model_variants(5, 2)
        .into_iter()
        .map(|(name, cfg)| {
            let label = format!("grad/model/{name}");
            let r = (|| {
                let params = ModelParams::init(&cfg, &mut rng)?;
                let (_, analytic) =
                    model_loss(&adj, &x, &ds.labels, &all, &params, &cfg, 3, opts.fault)?;
                let values: Vec<DenseMat> = params
                    .tensors()
                    .into_iter()
                    .map(|(_, m)| m.clone())
                    .collect();
                let report = compare_with_central_differences(
                    &values,
                    &analytic,
                    |v| {
                        Ok(model_loss(
                            &adj,
                            &x,
                            &ds.labels,
                            &all,
                            &with_tensors(&params, v),
                            &cfg,
                            3,
                            None,
                        )?
                        .0)
                    },
                    GradCheckOptions::default(),
                )?;
                Ok(below(
                    &label,
                    report.max_rel_error,
                    1e-5,
                    format!("{} coords", report.coordinates),
                ))
            })();
            check(&label, r)
        })
        .collect()
}

fn explicit_blocks(
    adj: &SparseAdj,
    x: &DenseMat,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<Vec<DenseMat>> {
    let xs = CsrMat::from_dense(x);
    let mut tape = Tape::new();
    let mut p = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = forward(&mut tape, adj, &xs, &mut p, cfg, Mode::Eval, &mut rng)?;
    Ok(out
        .efi_blocks
        .iter()
        .map(|&b| tape.value(b).clone())
        .collect())
}

fn efi_only(m: usize, layers: usize, k: usize) -> ModelConfig {
    ModelConfig {
        in_features: m,
        classes: 2,
        efi: Some(EfiGnnConfig {
            num_layers: layers,
            units: k,
            dropout: 0.0,
            include_block0: true,
        }),
        gcn: None,
    }
}

/// Matrix forward against scalar term enumeration on every graph with up to
/// four nodes.
pub fn enumeration_check() -> CheckResult {
    let r = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut worst: f64 = 0.0;
        let mut cases = 0;
        for n in 1..=4 {
            for edges in all_graphs(n) {
                let adj = normalized_adjacency(&edges, true)?;
                let dense = dense_normalized_adjacency(&edges);
                for m in 1..=4 {
                    for k in 1..=3 {
                        let cfg = efi_only(m, 2, k);
                        let params = ModelParams::init(&cfg, &mut rng)?;
                        let x = uniform(n, m, &mut rng);
                        let fast = explicit_blocks(&adj, &x, &params, &cfg)?;
                        let slow = efi_blocks_by_enumeration(&dense, &x, &params.efi);
                        let direct = first_order_terms(&x, &params.efi[0]);
                        worst = worst.max(fast[0].max_abs_diff(&direct));
                        for (f, s) in fast.iter().zip(&slow) {
                            worst = worst.max(f.max_abs_diff(s));
                        }
                        cases += 1;
                    }
                }
            }
        }
        Ok(below(
            "oracle/enumeration",
            worst,
            1e-10,
            format!("{cases} cases"),
        ))
    })();
    check("oracle/enumeration", r)
}

/// Scaling the features by α scales block `l` by `α^{l+1}`.
pub fn homogeneity_check() -> CheckResult {
    let r = (|| {
        let adj = toy_adjacency();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut worst: f64 = 0.0;
        for layers in 1..=4 {
            let cfg = efi_only(5, layers, 3);
            let params = ModelParams::init(&cfg, &mut rng)?;
            let x = uniform(4, 5, &mut rng);
            let base = explicit_blocks(&adj, &x, &params, &cfg)?;
            for alpha in [0.5, 2.0, 3.0] {
                let scaled = explicit_blocks(&adj, &x.scale(alpha), &params, &cfg)?;
                for (l, (s, b)) in scaled.iter().zip(&base).enumerate() {
                    let expected = b.scale(alpha.powi(l as i32 + 1));
                    worst = worst.max(elementwise_rel_err(s, &expected));
                }
            }
        }
        Ok(below(
            "invariant/order-homogeneity",
            worst,
            1e-10,
            "L=1..4, alpha 0.5/2/3",
        ))
    })();
    check("invariant/order-homogeneity", r)
}

/// Largest `|a − e| / |e|` over entries, with `|e|` floored at 1e-8 of the
/// block's largest magnitude so exact cancellations do not divide by ~0.
pub fn elementwise_rel_err(actual: &DenseMat, expected: &DenseMat) -> f64 {
    let floor = expected.max_abs() * 1e-8;
    actual
        .as_slice()
        .iter()
        .zip(expected.as_slice())
        .map(|(a, e)| (a - e).abs() / e.abs().max(floor).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// `X_prev ↦ (Â X_prev W) ⊙ X⁽⁰⁾` is additive.
pub fn linearity_check() -> CheckResult {
    let r = (|| {
        let adj = toy_adjacency();
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let w = uniform(3, 3, &mut rng);
        let x0 = uniform(4, 3, &mut rng);
        let layer = |prev: &DenseMat| -> Result<DenseMat> {
            let mut t = Tape::new();
            let p = t.constant(prev.clone());
            let wv = t.constant(w.clone());
            let x0v = t.constant(x0.clone());
            let y = crate::model::efignn_layer(&mut t, &adj, p, wv, x0v)?;
            Ok(t.value(y).clone())
        };
        let p = uniform(4, 3, &mut rng);
        let q = uniform(4, 3, &mut rng);
        let lhs = layer(&p.add(&q)?)?;
        let rhs = layer(&p)?.add(&layer(&q)?)?;
        Ok(below(
            "invariant/layer-linearity",
            lhs.max_abs_diff(&rhs),
            1e-12,
            "",
        ))
    })();
    check("invariant/layer-linearity", r)
}

/// Without edges, perturbing one node's features leaves every other node's
/// logits bitwise unchanged.
pub fn isolation_check() -> CheckResult {
    let r = (|| {
        let n = 5;
        let adj = SparseAdj::identity(n);
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let (_, cfg) = model_variants(4, 3).pop().expect("joint variant");
        let params = ModelParams::init(&cfg, &mut rng)?;
        let x = uniform(n, 4, &mut rng);
        let base = predict(&adj, &CsrMat::from_dense(&x), &params, &cfg)?;
        let mut changed = 0usize;
        for u in 0..n {
            let mut xp = x.clone();
            xp.row_mut(u).iter_mut().for_each(|v| *v += 0.7);
            let out = predict(&adj, &CsrMat::from_dense(&xp), &params, &cfg)?;
            for v in (0..n).filter(|&v| v != u) {
                let same = out
                    .row(v)
                    .iter()
                    .zip(base.row(v))
                    .all(|(a, b)| a.to_bits() == b.to_bits());
                changed += usize::from(!same);
            }
        }
        Ok(below(
            "invariant/edgeless-isolation",
            changed as f64,
            0.5,
            "rows changed",
        ))
    })();
    check("invariant/edgeless-isolation", r)
}

/// Joint logits equal the concatenated branch outputs times the shared
/// output weight, and a joint model without GCN branch is the explicit model.
pub fn joint_composition_check() -> CheckResult {
    let r = (|| {
        let ds = toy_dataset();
        let adj = toy_adjacency();
        let x = CsrMat::from_dense(&ds.features);
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let (_, cfg) = model_variants(5, 2).pop().expect("joint variant");
        let params = ModelParams::init(&cfg, &mut rng)?;
        let mut tape = Tape::new();
        let mut p = params.clone();
        let out = forward(&mut tape, &adj, &x, &mut p, &cfg, Mode::Eval, &mut rng)?;
        let mut parts: Vec<&DenseMat> = out.efi_blocks.iter().map(|&v| tape.value(v)).collect();
        parts.extend(out.gcn_layers.iter().map(|&v| tape.value(v)));
        let mut manual = DenseMat::zeros(4, 2);
        for (b, part) in parts.iter().enumerate() {
            let rows = params
                .out
                .slice_rows(out.block_offsets[b], out.block_offsets[b + 1]);
            manual = manual.add(&part.matmul(&rows)?)?;
        }
        let joint_err = manual.max_abs_diff(tape.value(out.logits));

        let efi_cfg = ModelConfig {
            gcn: None,
            ..cfg.clone()
        };
        let efi_params = ModelParams {
            gcn: vec![],
            bn: vec![],
            out: params.out.slice_rows(0, efi_cfg.head_width()),
            ..params.clone()
        };
        let degenerate = predict(&adj, &x, &efi_params, &efi_cfg)?;
        let mut tape = Tape::new();
        let mut p = efi_params.clone();
        let direct = forward(&mut tape, &adj, &x, &mut p, &efi_cfg, Mode::Eval, &mut rng)?;
        let degenerate_err = degenerate.max_abs_diff(tape.value(direct.logits));
        Ok(below(
            "invariant/joint-composition",
            joint_err.max(degenerate_err),
            1e-12,
            "",
        ))
    })();
    check("invariant/joint-composition", r)
}

/// Effect sums against block logit contributions.
pub fn completeness_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(81);

    let r = (|| {
        // First order holds on any graph.
        let adj = toy_adjacency();
        let cfg = efi_only(6, 2, 3);
        let params = ModelParams::init(&cfg, &mut rng)?;
        let mut x = uniform(4, 6, &mut rng);
        x.set(0, 1, 0.0);
        x.set(2, 4, 0.0);
        let blocks = explicit_blocks(&adj, &x, &params, &cfg)?;
        let mut worst: f64 = 0.0;
        for node in 0..4 {
            for class in 0..2 {
                let t = effects(&params, &cfg, &x, &EffectQuery::active(node, class, 1))?;
                let want = block_contribution(&params, &cfg, blocks[0].row(node), 0, class)?;
                worst = worst.max((t.total() - want).abs());
            }
        }
        Ok(below("interpret/first-order-completeness", worst, 1e-9, ""))
    })();
    out.push(check("interpret/first-order-completeness", r));

    for order in [2, 3] {
        let name = format!("interpret/order{order}-completeness-edgeless");
        let r = (|| {
            let n = 3;
            let adj = SparseAdj::identity(n);
            let cfg = efi_only(6, 2, 3);
            let params = ModelParams::init(&cfg, &mut rng)?;
            let mut x = uniform(n, 6, &mut rng);
            x.set(1, 2, 0.0);
            let blocks = explicit_blocks(&adj, &x, &params, &cfg)?;
            let mut worst: f64 = 0.0;
            for node in 0..n {
                for class in 0..2 {
                    let t = effects(&params, &cfg, &x, &EffectQuery::active(node, class, order))?;
                    let want = block_contribution(
                        &params,
                        &cfg,
                        blocks[order - 1].row(node),
                        order - 1,
                        class,
                    )?;
                    worst = worst.max((t.total() - want).abs());
                }
            }
            Ok(below(&name, worst, 1e-8, "6 features, full enumeration"))
        })();
        out.push(check(&name, r));
    }

    let r = (|| {
        let cfg = efi_only(5, 2, 3);
        let params = ModelParams::init(&cfg, &mut rng)?;
        let x = DenseMat::from_rows(&[[0.5, 0.0, 1.0, 2.0, 0.0]])?;
        let mut nonzero = 0usize;
        let mut asym: f64 = 0.0;
        for order in 1..=3 {
            for t in
                crate::interpret::effects(&params, &cfg, &x, &EffectQuery::active(0, 1, order))?
                    .entries
            {
                let mut q = EffectQuery::active(0, 1, order);
                let mut rev = t.features.clone();
                rev.reverse();
                q.features = FeatureSelection::Tuple(rev);
                let e = effects(&params, &cfg, &x, &q)?.entries[0].effect;
                asym = asym.max((e - t.effect).abs());
            }
            let mut q = EffectQuery::active(0, 1, order);
            let mut tuple = vec![2; order];
            tuple[order - 1] = 4;
            q.features = FeatureSelection::Tuple(tuple);
            nonzero += usize::from(effects(&params, &cfg, &x, &q)?.entries[0].effect != 0.0);
        }
        let active = active_features(&x, 0).len();
        Ok(below(
            "interpret/annihilation-and-symmetry",
            asym + nonzero as f64,
            1e-12,
            format!("{active} active features"),
        ))
    })();
    out.push(check("interpret/annihilation-and-symmetry", r));
    out
}

/// Saved and reloaded models give bitwise-identical eval logits.
pub fn model_file_check() -> CheckResult {
    let r = (|| {
        let ds = toy_dataset();
        let adj = toy_adjacency();
        let x = CsrMat::from_dense(&ds.features);
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let (_, cfg) = model_variants(5, 2).swap_remove(3);
        let params = ModelParams::init(&cfg, &mut rng)?;
        let saved = SavedModel {
            config: cfg.clone(),
            params,
            info: BTreeMap::new(),
        };
        let bytes = to_bytes(&saved)?;
        let loaded = from_bytes(&bytes)?;
        let a = predict(&adj, &x, &saved.params, &cfg)?;
        let b = predict(&adj, &x, &loaded.params, &loaded.config)?;
        let same = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(p, q)| p.to_bits() == q.to_bits())
            && to_bytes(&loaded)? == bytes;
        Ok(below(
            "model-file/round-trip",
            f64::from(u8::from(!same)),
            0.5,
            "bitwise",
        ))
    })();
    check("model-file/round-trip", r)
}

/// The toy fixture is separable: every model fits its training nodes.
pub fn toy_training_check() -> CheckResult {
    let r = (|| {
        let ds = toy_dataset();
        let adj = toy_adjacency();
        let x = CsrMat::from_dense(&ds.features);
        let tc = TrainConfig {
            learning_rate: 0.01,
            epochs: 200,
            seed: 1,
            ..Default::default()
        };
        let mut worst: f64 = 0.0;
        for (_, cfg) in model_variants(5, 2) {
            let (report, _) = train(&adj, &x, &ds.labels, &ds.masks, &cfg, &tc)?;
            let first = report.history.first().map_or(f64::NAN, |r| r.loss);
            let last = report.history.last().map_or(f64::NAN, |r| r.loss);
            worst = worst.max(last / first);
        }
        Ok(below(
            "train/toy-fixture",
            worst,
            0.5,
            "max final/initial loss",
        ))
    })();
    check("train/toy-fixture", r)
}

pub fn run_all(opts: VerifyOptions) -> Vec<CheckResult> {
    let mut out = op_gradient_checks(opts);
    out.extend(model_gradient_checks(opts));
    out.push(enumeration_check());
    out.push(homogeneity_check());
    out.push(linearity_check());
    out.push(isolation_check());
    out.push(joint_composition_check());
    out.extend(completeness_checks());
    out.push(model_file_check());
    out.push(toy_training_check());
    out
}
