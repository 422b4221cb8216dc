//! Closed-form feature-interaction effects of the explicit branch.
//!
//! Because the explicit branch is linear in each `X⁽⁰⁾` factor, every block
//! `X⁽ˡ⁻¹⁾` of a node splits into a sum over ordered feature tuples of length
//! `l`. With the per-feature embeddings `a_i = x[n,i] · W⁽⁰⁾[i,:]` and a
//! self-loop-only graph, the term of the tuple `(g₁, …, g_l)` is the chain
//!
//! ```text
//! c₁ = a_{g₁},   c_k = (c_{k−1} · W⁽ᵏ⁻¹⁾) ⊙ a_{g_k}
//! ```
//!
//! and its effect on class `c` is `c_l · W_out[block l−1, c]`. The default
//! [`EffectRule::Forward`] averages the chain over all orderings of the
//! tuple, so the table is symmetric and summing it over every ordered tuple
//! of active features reproduces the block's logit contribution exactly on
//! edgeless graphs. On graphs with edges the values are self-node
//! attributions: neighbour aggregation is not part of the formula.
//!
//! [`EffectRule::Verbatim`] instead crosses the embeddings before mixing,
//! `a⁽ˡ⁾ = (a⁽ˡ⁻¹⁾ ⊙ a_k) · W⁽ˡ⁻¹⁾`. It is symmetric at order 2 but does not
//! sum to the forward pass.

use serde::{Deserialize, Serialize};

use crate::dense::DenseMat;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectRule {
    #[default]
    Forward,
    Verbatim,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSelection {
    /// Every ordered tuple of the node's nonzero features.
    Active,
    Tuple(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectQuery {
    pub node: usize,
    pub class: usize,
    pub order: usize,
    pub features: FeatureSelection,
    pub top_k: Option<usize>,
    pub rule: EffectRule,
}

impl EffectQuery {
    pub fn active(node: usize, class: usize, order: usize) -> Self {
        Self {
            node,
            class,
            order,
            features: FeatureSelection::Active,
            top_k: None,
            rule: EffectRule::Forward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEntry {
    pub features: Vec<usize>,
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectTable {
    pub node: usize,
    pub class: usize,
    pub order: usize,
    pub entries: Vec<EffectEntry>,
}

impl EffectTable {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.effect).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, features: &[usize]) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.features == features)
            .map(|e| e.effect)
    }

    /// Keeps the `k` entries of largest magnitude (stable on ties).
    pub fn top_k(&mut self, k: usize) {
        self.entries
            .sort_by(|a, b| b.effect.abs().total_cmp(&a.effect.abs()));
        self.entries.truncate(k);
    }

    /// Distinct features in first-appearance order.
    pub fn features(&self) -> Vec<usize> {
        let mut seen = Vec::new();
        for f in self.entries.iter().flat_map(|e| &e.features) {
            if !seen.contains(f) {
                seen.push(*f);
            }
        }
        seen
    }
}

/// Nonzero feature indices of row `node`.
pub fn active_features(x_init: &DenseMat, node: usize) -> Vec<usize> {
    x_init
        .row(node)
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// `block · W_out[rows of block l, class]`, the logit share of explicit
/// block `X⁽ˡ⁾` for one node.
pub fn block_contribution(
    params: &ModelParams,
    cfg: &ModelConfig,
    block_row: &[f64],
    l: usize,
    class: usize,
) -> Result<f64> {
    let rows = cfg.efi_block_rows(l).ok_or(Error::OrderExceedsDepth {
        order: l + 1,
        max: max_order(cfg)?,
    })?;
    if block_row.len() != rows.len() {
        return Err(Error::shape("block_contribution", "block width"));
    }
    Ok(rows
        .zip(block_row)
        .map(|(r, &v)| v * params.out.get(r, class))
        .sum())
}

fn max_order(cfg: &ModelConfig) -> Result<usize> {
    Ok(cfg.efi.as_ref().ok_or(Error::NoExplicitBranch)?.num_layers + 1)
}

struct Context<'a> {
    params: &'a ModelParams,
    w_out: Vec<f64>,
    embeddings: Vec<(usize, Vec<f64>)>,
}

impl Context<'_> {
    fn embedding(&self, feature: usize) -> &[f64] {
        &self
            .embeddings
            .iter()
            .find(|(f, _)| *f == feature)
            .expect("embedding precomputed")
            .1
    }

    /// `v · W` for a row vector.
    fn mix(&self, v: &[f64], layer: usize) -> Vec<f64> {
        let w = &self.params.efi[layer];
        let mut out = vec![0.0; w.cols()];
        for (k, &a) in v.iter().enumerate() {
            if a != 0.0 {
                crate::dense::axpy(&mut out, a, w.row(k));
            }
        }
        out
    }

    fn chain(&self, tuple: &[usize]) -> Vec<f64> {
        let mut c = self.embedding(tuple[0]).to_vec();
        for (k, &g) in tuple.iter().enumerate().skip(1) {
            let mixed = self.mix(&c, k);
            c = mixed
                .iter()
                .zip(self.embedding(g))
                .map(|(m, a)| m * a)
                .collect();
        }
        c
    }

    fn verbatim(&self, tuple: &[usize]) -> Vec<f64> {
        let mut a = self.embedding(tuple[0]).to_vec();
        for (k, &g) in tuple.iter().enumerate().skip(1) {
            let crossed: Vec<f64> = a
                .iter()
                .zip(self.embedding(g))
                .map(|(x, y)| x * y)
                .collect();
            a = self.mix(&crossed, k);
        }
        a
    }

    fn effect(&self, tuple: &[usize], rule: EffectRule) -> f64 {
        let dot = |v: &[f64]| v.iter().zip(&self.w_out).map(|(a, b)| a * b).sum::<f64>();
        match rule {
            EffectRule::Verbatim => dot(&self.verbatim(tuple)),
            EffectRule::Forward => {
                let perms = permutations(tuple);
                let n = perms.len() as f64;
                perms.iter().map(|p| dot(&self.chain(p))).sum::<f64>() / n
            }
        }
    }
}

/// All `len!` orderings (duplicates kept when the tuple repeats features).
fn permutations(tuple: &[usize]) -> Vec<Vec<usize>> {
    if tuple.len() <= 1 {
        return vec![tuple.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..tuple.len() {
        let mut rest = tuple.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Ordered tuples with repetition over `features`, lexicographic.
fn ordered_tuples(features: &[usize], order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..order {
        out = out
            .into_iter()
            .flat_map(|t| {
                features.iter().map(move |&f| {
                    let mut t = t.clone();
                    t.push(f);
                    t
                })
            })
            .collect();
    }
    out
}

/// Effects of order `query.order` for one node and class.
pub fn effects(
    params: &ModelParams,
    cfg: &ModelConfig,
    x_init: &DenseMat,
    query: &EffectQuery,
) -> Result<EffectTable> {
    let efi = cfg.efi.as_ref().ok_or(Error::NoExplicitBranch)?;
    params.check_shapes(cfg)?;
    let max = efi.num_layers + 1;
    if query.order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    if query.order > max {
        return Err(Error::OrderExceedsDepth {
            order: query.order,
            max,
        });
    }
    if query.order == 1 && !efi.include_block0 {
        return Err(Error::FirstOrderUnavailable);
    }
    if x_init.shape() != (x_init.rows(), cfg.in_features) || query.node >= x_init.rows() {
        return Err(Error::InvalidArgument(format!(
            "node {} outside 0..{}",
            query.node,
            x_init.rows()
        )));
    }
    if query.class >= cfg.classes {
        return Err(Error::InvalidArgument(format!(
            "class {} outside 0..{}",
            query.class, cfg.classes
        )));
    }
    let tuples = match &query.features {
        FeatureSelection::Active => {
            ordered_tuples(&active_features(x_init, query.node), query.order)
        }
        FeatureSelection::Tuple(t) => {
            if t.len() != query.order {
                return Err(Error::InvalidArgument(format!(
                    "tuple of {} features for order {}",
                    t.len(),
                    query.order
                )));
            }
            if let Some(&f) = t.iter().find(|&&f| f >= cfg.in_features) {
                return Err(Error::InvalidArgument(format!(
                    "feature {f} outside 0..{}",
                    cfg.in_features
                )));
            }
            vec![t.clone()]
        }
    };
    let mut embeddings: Vec<(usize, Vec<f64>)> = Vec::new();
    for &f in tuples.iter().flatten() {
        if !embeddings.iter().any(|(g, _)| *g == f) {
            let x = x_init.get(query.node, f);
            embeddings.push((f, params.efi[0].row(f).iter().map(|w| x * w).collect()));
        }
    }
    let rows = cfg
        .efi_block_rows(query.order - 1)
        .expect("order checked against depth");
    let w_out = rows.map(|r| params.out.get(r, query.class)).collect();
    let ctx = Context {
        params,
        w_out,
        embeddings,
    };
    let entries = tuples
        .into_iter()
        .map(|t| {
            let effect = ctx.effect(&t, query.rule);
            EffectEntry {
                features: t,
                effect,
            }
        })
        .collect();
    let mut table = EffectTable {
        node: query.node,
        class: query.class,
        order: query.order,
        entries,
    };
    if let Some(k) = query.top_k {
        table.top_k(k);
    }
    Ok(table)
}

pub fn first_order_effects(
    params: &ModelParams,
    cfg: &ModelConfig,
    x_init: &DenseMat,
    query: &EffectQuery,
) -> Result<EffectTable> {
    check_order(query, 1)?;
    effects(params, cfg, x_init, query)
}

pub fn second_order_effects(
    params: &ModelParams,
    cfg: &ModelConfig,
    x_init: &DenseMat,
    query: &EffectQuery,
) -> Result<EffectTable> {
    check_order(query, 2)?;
    effects(params, cfg, x_init, query)
}

pub fn higher_order_effects(
    params: &ModelParams,
    cfg: &ModelConfig,
    x_init: &DenseMat,
    query: &EffectQuery,
) -> Result<EffectTable> {
    effects(params, cfg, x_init, query)
}

fn check_order(query: &EffectQuery, order: usize) -> Result<()> {
    if query.order == order {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "query of order {} passed to the order-{order} extractor",
            query.order
        )))
    }
}
