//! The explicit-interaction stack, the GCN branch and the shared output head.

use std::borrow::Cow;
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::csr::CsrMat;
use crate::dense::DenseMat;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::SparseAdj;
use crate::tape::{BatchNormOptions, BatchNormState, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

impl Mode {
    pub fn training(self) -> bool {
        self == Mode::Train
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfiGnnConfig {
    pub num_layers: usize,
    pub units: usize,
    pub dropout: f64,
    #[serde(default = "default_true")]
    pub include_block0: bool,
}

fn default_true() -> bool {
    true
}

impl EfiGnnConfig {
    pub fn num_blocks(&self) -> usize {
        self.num_layers + usize::from(self.include_block0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.units == 0 {
            return Err(Error::InvalidArgument("efi units must be positive".into()));
        }
        if self.num_blocks() == 0 {
            return Err(Error::InvalidArgument(
                "efi branch with zero layers needs block 0 in the output".into(),
            ));
        }
        check_rate(self.dropout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkipMode {
    None,
    /// `H_i += H_{i−1}` after the activation (from the second layer on).
    Additive,
    /// Layer `i ≥ 2` consumes the concatenation of all previous layer outputs.
    Dense,
}

impl std::str::FromStr for SkipMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "additive" => Ok(Self::Additive),
            "dense" => Ok(Self::Dense),
            _ => Err(Error::InvalidArgument(format!("unknown skip mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnConfig {
    pub num_layers: usize,
    pub units: usize,
    pub slope: f64,
    pub dropout: f64,
    pub skip: SkipMode,
    pub batch_norm: bool,
    #[serde(default = "default_bn_eps")]
    pub bn_eps: f64,
    #[serde(default = "default_bn_momentum")]
    pub bn_momentum: f64,
}

fn default_bn_eps() -> f64 {
    1e-5
}

fn default_bn_momentum() -> f64 {
    0.9
}

impl GcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.units == 0 {
            return Err(Error::InvalidArgument(
                "gcn branch needs at least one layer of positive width".into(),
            ));
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "leaky relu slope {} outside (0, 1)",
                self.slope
            )));
        }
        check_rate(self.dropout)
    }

    fn input_width(&self, layer: usize, in_features: usize) -> usize {
        match (layer, self.skip) {
            (0, _) => in_features,
            (l, SkipMode::Dense) => l * self.units,
            _ => self.units,
        }
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "dropout rate {rate} outside [0, 1)"
        )))
    }
}

/// Which branches feed the output head. At least one must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub in_features: usize,
    pub classes: usize,
    pub efi: Option<EfiGnnConfig>,
    pub gcn: Option<GcnConfig>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_features == 0 || self.classes == 0 {
            return Err(Error::InvalidArgument(
                "feature and class counts must be positive".into(),
            ));
        }
        if self.efi.is_none() && self.gcn.is_none() {
            return Err(Error::InvalidArgument("model has no branch".into()));
        }
        if let Some(e) = &self.efi {
            e.validate()?;
        }
        if let Some(g) = &self.gcn {
            g.validate()?;
        }
        Ok(())
    }

    /// Row ranges of the output weight owned by each concatenated block:
    /// explicit blocks first, then GCN layers.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut offsets = vec![0];
        let mut push = |w: usize| offsets.push(offsets.last().unwrap() + w);
        if let Some(e) = &self.efi {
            (0..e.num_blocks()).for_each(|_| push(e.units));
        }
        if let Some(g) = &self.gcn {
            (0..g.num_layers).for_each(|_| push(g.units));
        }
        offsets
    }

    pub fn head_width(&self) -> usize {
        *self.block_offsets().last().unwrap()
    }

    /// Output-weight rows that multiply explicit block `X⁽ˡ⁾`.
    pub fn efi_block_rows(&self, l: usize) -> Option<Range<usize>> {
        let e = self.efi.as_ref()?;
        if l > e.num_layers {
            return None;
        }
        let slot = if e.include_block0 {
            l
        } else {
            l.checked_sub(1)?
        };
        Some(slot * e.units..(slot + 1) * e.units)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormParams<T: Scalar = f64> {
    pub gamma: DenseMat<T>,
    pub beta: DenseMat<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

impl<T: Scalar> BatchNormParams<T> {
    pub fn new(width: usize) -> Self {
        let state = BatchNormState::<T>::new(width);
        Self {
            gamma: DenseMat::filled(1, width, T::one()),
            beta: DenseMat::zeros(1, width),
            running_mean: state.running_mean,
            running_var: state.running_var,
        }
    }
}

/// Trainable state of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T: Scalar = f64> {
    /// `W⁽⁰⁾ (M×K), W⁽¹⁾ … W⁽ᴸ⁾ (K×K)`.
    pub efi: Vec<DenseMat<T>>,
    pub gcn: Vec<DenseMat<T>>,
    /// One entry per GCN layer when batch norm is on, otherwise empty.
    pub bn: Vec<BatchNormParams<T>>,
    pub out: DenseMat<T>,
}

/// How a trainable matrix is treated by the optimiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Norm,
}

pub fn glorot_init<T: Scalar, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> DenseMat<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    DenseMat::<f64>::uniform(rows, cols, bound, rng).cast()
}

impl<T: Scalar> ModelParams<T> {
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut efi = Vec::new();
        if let Some(e) = &cfg.efi {
            efi.push(glorot_init(cfg.in_features, e.units, rng));
            for _ in 0..e.num_layers {
                efi.push(glorot_init(e.units, e.units, rng));
            }
        }
        let mut gcn = Vec::new();
        let mut bn = Vec::new();
        if let Some(g) = &cfg.gcn {
            for l in 0..g.num_layers {
                gcn.push(glorot_init(g.input_width(l, cfg.in_features), g.units, rng));
                if g.batch_norm {
                    bn.push(BatchNormParams::new(g.units));
                }
            }
        }
        let out = glorot_init(cfg.head_width(), cfg.classes, rng);
        Ok(Self { efi, gcn, bn, out })
    }

    /// Checks every matrix against the shapes implied by `cfg`.
    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<()> {
        let bad = |what: String| Err(Error::shape("model params", what));
        let mut expected = Vec::new();
        if let Some(e) = &cfg.efi {
            expected.push((cfg.in_features, e.units));
            expected.extend((0..e.num_layers).map(|_| (e.units, e.units)));
        }
        if self.efi.len() != expected.len()
            || self.efi.iter().zip(&expected).any(|(w, &s)| w.shape() != s)
        {
            return bad("explicit branch weights".into());
        }
        let mut expected = Vec::new();
        let mut bn_expected = 0;
        if let Some(g) = &cfg.gcn {
            expected
                .extend((0..g.num_layers).map(|l| (g.input_width(l, cfg.in_features), g.units)));
            if g.batch_norm {
                bn_expected = g.num_layers;
            }
        }
        if self.gcn.len() != expected.len()
            || self.gcn.iter().zip(&expected).any(|(w, &s)| w.shape() != s)
        {
            return bad("gcn weights".into());
        }
        if self.bn.len() != bn_expected {
            return bad(format!(
                "{} batch-norm layers, expected {bn_expected}",
                self.bn.len()
            ));
        }
        if let Some(g) = &cfg.gcn {
            for b in &self.bn {
                if b.gamma.shape() != (1, g.units)
                    || b.beta.shape() != (1, g.units)
                    || b.running_mean.len() != g.units
                    || b.running_var.len() != g.units
                {
                    return bad("batch-norm width".into());
                }
            }
        }
        if self.out.shape() != (cfg.head_width(), cfg.classes) {
            return bad(format!(
                "output weight {:?}, expected {:?}",
                self.out.shape(),
                (cfg.head_width(), cfg.classes)
            ));
        }
        Ok(())
    }

    /// Every trainable matrix in a fixed order (the order [`forward`]
    /// reports its parameter vars in).
    pub fn tensors(&self) -> Vec<(ParamRole, &DenseMat<T>)> {
        let mut v: Vec<(ParamRole, &DenseMat<T>)> = Vec::new();
        v.extend(self.efi.iter().map(|w| (ParamRole::Weight, w)));
        v.extend(self.gcn.iter().map(|w| (ParamRole::Weight, w)));
        for b in &self.bn {
            v.push((ParamRole::Norm, &b.gamma));
            v.push((ParamRole::Norm, &b.beta));
        }
        v.push((ParamRole::Weight, &self.out));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(ParamRole, &mut DenseMat<T>)> {
        let mut v: Vec<(ParamRole, &mut DenseMat<T>)> = Vec::new();
        v.extend(self.efi.iter_mut().map(|w| (ParamRole::Weight, w)));
        v.extend(self.gcn.iter_mut().map(|w| (ParamRole::Weight, w)));
        for b in &mut self.bn {
            v.push((ParamRole::Norm, &mut b.gamma));
            v.push((ParamRole::Norm, &mut b.beta));
        }
        v.push((ParamRole::Weight, &mut self.out));
        v
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.as_f64())).collect();
        ModelParams {
            efi: self.efi.iter().map(DenseMat::cast).collect(),
            gcn: self.gcn.iter().map(DenseMat::cast).collect(),
            bn: self
                .bn
                .iter()
                .map(|b| BatchNormParams {
                    gamma: b.gamma.cast(),
                    beta: b.beta.cast(),
                    running_mean: conv(&b.running_mean),
                    running_var: conv(&b.running_var),
                })
                .collect(),
            out: self.out.cast(),
        }
    }
}

/// Vars produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutputs {
    pub logits: Var,
    /// `X⁽⁰⁾ … X⁽ᴸ⁾`, including `X⁽⁰⁾` even when it is not concatenated.
    pub efi_blocks: Vec<Var>,
    pub gcn_layers: Vec<Var>,
    /// Row offsets of each concatenated block into the output weight.
    pub block_offsets: Vec<usize>,
    /// Tape leaves of the parameters, in [`ModelParams::tensors`] order.
    pub param_vars: Vec<Var>,
}

/// `X⁽⁰⁾ = X_init · W⁽⁰⁾`.
pub fn first_order<'g, T: Scalar>(
    tape: &mut Tape<'g, T>,
    x_init: Cow<'g, CsrMat<T>>,
    w0: Var,
) -> Result<Var> {
    tape.sparse_matmul(x_init, w0)
}

/// Input of a GCN layer: the sparse features for the first layer, an
/// earlier representation otherwise.
pub enum LayerInput<'g, T: Scalar> {
    Dense(Var),
    Sparse(Cow<'g, CsrMat<T>>),
}

fn dropped<'g, T: Scalar, R: Rng + ?Sized>(
    x: &'g CsrMat<T>,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Cow<'g, CsrMat<T>> {
    if training && rate > 0.0 {
        Cow::Owned(x.dropout(rate, rng))
    } else {
        Cow::Borrowed(x)
    }
}

/// `X⁽ˡ⁾ = (Â · X⁽ˡ⁻¹⁾ · W⁽ˡ⁾) ⊙ X⁽⁰⁾`.
pub fn efignn_layer<'g, T: Scalar>(
    tape: &mut Tape<'g, T>,
    adj: &'g SparseAdj<T>,
    x_prev: Var,
    w: Var,
    x0: Var,
) -> Result<Var> {
    let agg = tape.spmm(adj, x_prev)?;
    let lin = tape.matmul(agg, w)?;
    tape.hadamard(lin, x0)
}

/// Batch-norm inputs for one GCN layer.
pub struct BatchNormArgs<'s, T: Scalar> {
    pub gamma: Var,
    pub beta: Var,
    pub state: &'s mut BatchNormState<T>,
    pub opts: BatchNormOptions,
}

/// `H = leaky_relu(bn?(Â · H_prev · W))`.
pub fn gcn_layer<'g, T: Scalar>(
    tape: &mut Tape<'g, T>,
    adj: &'g SparseAdj<T>,
    input: LayerInput<'g, T>,
    w: Var,
    slope: f64,
    bn: Option<BatchNormArgs<'_, T>>,
) -> Result<Var> {
    let xw = match input {
        LayerInput::Dense(h) => tape.matmul(h, w)?,
        LayerInput::Sparse(x) => tape.sparse_matmul(x, w)?,
    };
    let mut h = tape.spmm(adj, xw)?;
    if let Some(b) = bn {
        h = tape.batch_norm(h, b.gamma, b.beta, b.state, b.opts)?;
    }
    tape.leaky_relu(h, slope)
}

/// Records the full model on `tape` for the node features `x_init`. In training mode dropout is drawn from `rng` and batch-norm
/// running statistics in `params` are updated.
pub fn forward<'g, T: Scalar, R: Rng + ?Sized>(
    tape: &mut Tape<'g, T>,
    adj: &'g SparseAdj<T>,
    x_init: &'g CsrMat<T>,
    params: &mut ModelParams<T>,
    cfg: &ModelConfig,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardOutputs> {
    params.check_shapes(cfg)?;
    let (n, m) = x_init.shape();
    if n != adj.num_nodes() || m != cfg.in_features {
        return Err(Error::shape(
            "forward",
            format!(
                "features {n}x{m} for {} nodes and {} features",
                adj.num_nodes(),
                cfg.in_features
            ),
        ));
    }
    let training = mode.training();
    let param_vars: Vec<Var> = params
        .tensors()
        .into_iter()
        .map(|(_, w)| tape.param(w.clone()))
        .collect();
    let mut pv = param_vars.iter().copied();
    let efi_w: Vec<Var> = pv.by_ref().take(params.efi.len()).collect();
    let gcn_w: Vec<Var> = pv.by_ref().take(params.gcn.len()).collect();
    let bn_v: Vec<(Var, Var)> = (0..params.bn.len())
        .map(|_| (pv.next().unwrap(), pv.next().unwrap()))
        .collect();
    let out_w = pv.next().unwrap();

    let mut concat = Vec::new();
    let mut efi_blocks = Vec::new();
    if let Some(e) = &cfg.efi {
        let x = dropped(x_init, e.dropout, training, rng);
        let x0 = first_order(tape, x, efi_w[0])?;
        efi_blocks.push(x0);
        let mut prev = x0;
        for &w in &efi_w[1..] {
            let input = tape.dropout(prev, e.dropout, training, rng)?;
            prev = efignn_layer(tape, adj, input, w, x0)?;
            efi_blocks.push(prev);
        }
        let skip = usize::from(!e.include_block0);
        concat.extend_from_slice(&efi_blocks[skip..]);
    }

    let mut gcn_layers: Vec<Var> = Vec::new();
    if let Some(g) = &cfg.gcn {
        let opts = BatchNormOptions {
            eps: g.bn_eps,
            momentum: g.bn_momentum,
            training,
        };
        for (l, &w) in gcn_w.iter().enumerate() {
            let input = match (l, g.skip) {
                (0, _) => LayerInput::Sparse(dropped(x_init, g.dropout, training, rng)),
                (_, skip) => {
                    let h = if skip == SkipMode::Dense {
                        tape.concat_cols(&gcn_layers)?
                    } else {
                        gcn_layers[l - 1]
                    };
                    LayerInput::Dense(tape.dropout(h, g.dropout, training, rng)?)
                }
            };
            let mut h = if g.batch_norm {
                let mut state = BatchNormState {
                    running_mean: std::mem::take(&mut params.bn[l].running_mean),
                    running_var: std::mem::take(&mut params.bn[l].running_var),
                };
                let args = BatchNormArgs {
                    gamma: bn_v[l].0,
                    beta: bn_v[l].1,
                    state: &mut state,
                    opts,
                };
                let h = gcn_layer(tape, adj, input, w, g.slope, Some(args));
                params.bn[l].running_mean = state.running_mean;
                params.bn[l].running_var = state.running_var;
                h?
            } else {
                gcn_layer(tape, adj, input, w, g.slope, None)?
            };
            if g.skip == SkipMode::Additive && l > 0 {
                h = tape.add(h, gcn_layers[l - 1])?;
            }
            gcn_layers.push(h);
        }
        concat.extend_from_slice(&gcn_layers);
    }

    let features = tape.concat_cols(&concat)?;
    let logits = tape.matmul(features, out_w)?;
    Ok(ForwardOutputs {
        logits,
        efi_blocks,
        gcn_layers,
        block_offsets: cfg.block_offsets(),
        param_vars,
    })
}

/// Eval-mode logits without keeping the tape.
pub fn predict<T: Scalar>(
    adj: &SparseAdj<T>,
    x_init: &CsrMat<T>,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
) -> Result<DenseMat<T>> {
    let mut tape = Tape::new();
    let mut p = params.clone();
    // Eval mode draws no random numbers.
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let out = forward(&mut tape, adj, x_init, &mut p, cfg, Mode::Eval, &mut rng)?;
    Ok(tape.value(out.logits).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn efi_cfg(m: usize, c: usize, layers: usize, k: usize) -> ModelConfig {
        ModelConfig {
            in_features: m,
            classes: c,
            efi: Some(EfiGnnConfig {
                num_layers: layers,
                units: k,
                dropout: 0.0,
                include_block0: true,
            }),
            gcn: None,
        }
    }

    #[test]
    fn glorot_bounds_and_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w: DenseMat = glorot_init(1, 1, &mut rng);
        assert!(w.item().abs() <= 3f64.sqrt());
        let w: DenseMat = glorot_init(100, 100, &mut rng);
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let expected = 2.0 / 200.0;
        assert!((var / expected - 1.0).abs() < 0.2, "var {var}");
        let a: DenseMat = glorot_init(3, 4, &mut ChaCha8Rng::seed_from_u64(9));
        let b: DenseMat = glorot_init(3, 4, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn first_order_selects_weight_rows() {
        let mut t = Tape::<f64>::new();
        let x = CsrMat::from_dense(&DenseMat::from_rows(&[[1.0, 0.0]]).unwrap());
        let w = t.constant(DenseMat::from_rows(&[[2.0, 0.0], [5.0, 7.0]]).unwrap());
        let x0 = first_order(&mut t, Cow::Owned(x), w).unwrap();
        assert_eq!(t.value(x0).as_slice(), &[2.0, 0.0]);
        let z = CsrMat::from_dense(&DenseMat::zeros(1, 2));
        let x0 = first_order(&mut t, Cow::Owned(z), w).unwrap();
        assert_eq!(t.value(x0).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn scalar_layer_and_forward() {
        let adj = SparseAdj::<f64>::identity(1);
        let mut t = Tape::new();
        let x0 = t.constant(DenseMat::scalar(2.0));
        let w = t.constant(DenseMat::scalar(1.0));
        let x1 = efignn_layer(&mut t, &adj, x0, w, x0).unwrap();
        assert_eq!(t.value(x1).item(), 4.0);
        let zero = t.constant(DenseMat::scalar(0.0));
        let x1 = efignn_layer(&mut t, &adj, x0, w, zero).unwrap();
        assert_eq!(t.value(x1).item(), 0.0);

        let cfg = efi_cfg(1, 1, 1, 1);
        let params = ModelParams {
            efi: vec![DenseMat::scalar(2.0), DenseMat::scalar(1.0)],
            gcn: vec![],
            bn: vec![],
            out: DenseMat::column(&[3.0, 5.0]),
        };
        let x = CsrMat::from_dense(&DenseMat::scalar(1.0));
        let logits = predict(&adj, &x, &params, &cfg).unwrap();
        assert_eq!(logits.item(), 2.0 * 3.0 + 4.0 * 5.0);
    }

    #[test]
    fn gcn_identity_and_slope() {
        let adj = SparseAdj::<f64>::identity(2);
        let mut t = Tape::new();
        let h = t.constant(DenseMat::from_rows(&[[1.0, 0.0], [2.0, 3.0]]).unwrap());
        let w = t.constant(DenseMat::identity(2));
        let out = gcn_layer(&mut t, &adj, LayerInput::Dense(h), w, 0.01, None).unwrap();
        assert_eq!(t.value(out), t.value(h));
        let neg = t.constant(DenseMat::from_rows(&[[-1.0, 2.0], [0.0, -4.0]]).unwrap());
        let out = gcn_layer(&mut t, &adj, LayerInput::Dense(neg), w, 0.01, None).unwrap();
        assert_eq!(t.value(out).as_slice(), &[-0.01, 2.0, 0.0, -0.04]);
    }

    #[test]
    fn block_offsets_partition_head() {
        let mut cfg = efi_cfg(5, 3, 2, 4);
        cfg.gcn = Some(GcnConfig {
            num_layers: 3,
            units: 6,
            slope: 0.01,
            dropout: 0.0,
            skip: SkipMode::Dense,
            batch_norm: true,
            bn_eps: 1e-5,
            bn_momentum: 0.9,
        });
        assert_eq!(cfg.block_offsets(), vec![0, 4, 8, 12, 18, 24, 30]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = ModelParams::<f64>::init(&cfg, &mut rng).unwrap();
        p.check_shapes(&cfg).unwrap();
        assert_eq!(p.gcn[2].shape(), (12, 6));
        assert_eq!(p.out.shape(), (30, 3));
        assert_eq!(cfg.efi_block_rows(2), Some(8..12));
        cfg.efi.as_mut().unwrap().include_block0 = false;
        assert_eq!(cfg.efi_block_rows(0), None);
        assert_eq!(cfg.efi_block_rows(1), Some(0..4));
    }

    #[test]
    fn config_validation() {
        let mut cfg = efi_cfg(2, 2, 0, 2);
        cfg.validate().unwrap();
        cfg.efi.as_mut().unwrap().include_block0 = false;
        assert!(cfg.validate().is_err());
        cfg.efi = None;
        assert!(cfg.validate().is_err());
    }
}
