//! Central finite-difference checking of tape gradients.

use crate::dense::DenseMat;
use crate::error::{Error, Result};
use crate::tape::{OpKind, Tape, Var};

/// Denominator floor of the relative error `|a − n| / max(|a|, |n|, floor)`.
/// Below it the comparison is effectively absolute, so coordinates whose true
/// gradient is ~0 are not judged on rounding noise alone.
pub const DEFAULT_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub h: f64,
    pub floor: f64,
    /// Perturb the analytic backward rule of one op kind (negative control).
    pub fault: Option<OpKind>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            h: 1e-5,
            floor: DEFAULT_FLOOR,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter index, flat entry)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub coordinates: usize,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the tape gradient of a scalar function against central
/// differences in every coordinate of every parameter.
///
/// `build` receives a fresh tape with `params` already registered as
/// trainable leaves (same order) and must return a 1x1 output.
pub fn finite_diff_check<'g, F>(
    params: &[DenseMat<f64>],
    build: F,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'g, f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    if let Some(kind) = opts.fault {
        tape.inject_fault(kind);
    }
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = build(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let analytic = vars
        .iter()
        .enumerate()
        .map(|(i, v)| {
            grads
                .get(*v)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("no gradient for parameter {i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    compare_with_central_differences(
        params,
        &analytic,
        |values| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = values.iter().map(|p| tape.param(p.clone())).collect();
            let out = build(&mut tape, &vars)?;
            Ok(tape.value(out).item())
        },
        opts,
    )
}

/// Checks precomputed `analytic` gradients of `eval` at `params`.
pub fn compare_with_central_differences<F>(
    params: &[DenseMat<f64>],
    analytic: &[DenseMat<f64>],
    eval: F,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&[DenseMat<f64>]) -> Result<f64>,
{
    if !(opts.h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step {} must be positive",
            opts.h
        )));
    }
    if analytic.len() != params.len()
        || analytic
            .iter()
            .zip(params)
            .any(|(a, p)| a.shape() != p.shape())
    {
        return Err(Error::shape(
            "gradient check",
            "gradients must match parameters",
        ));
    }
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    let mut work: Vec<DenseMat<f64>> = params.to_vec();
    for (pi, grad) in analytic.iter().enumerate() {
        for e in 0..params[pi].len() {
            let orig = params[pi].as_slice()[e];
            work[pi].as_mut_slice()[e] = orig + opts.h;
            let plus = eval(&work)?;
            work[pi].as_mut_slice()[e] = orig - opts.h;
            let minus = eval(&work)?;
            work[pi].as_mut_slice()[e] = orig;
            let numeric = (plus - minus) / (2.0 * opts.h);
            let err = relative_error(grad.as_slice()[e], numeric, opts.floor);
            report.coordinates += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((pi, e));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact_up_to_rounding() {
        let r = finite_diff_check(
            &[DenseMat::scalar(3.0)],
            |t, v| {
                let sq = t.hadamard(v[0], v[0])?;
                t.sum(sq)
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(r.max_rel_error < 1e-8, "{r:?}");
        assert_eq!(r.coordinates, 1);
    }

    #[test]
    fn injected_fault_is_detected() {
        let opts = GradCheckOptions {
            fault: Some(OpKind::Hadamard),
            ..Default::default()
        };
        let r = finite_diff_check(
            &[DenseMat::scalar(3.0)],
            |t, v| {
                let sq = t.hadamard(v[0], v[0])?;
                t.sum(sq)
            },
            opts,
        )
        .unwrap();
        assert!(r.max_rel_error > 1e-3);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 1e-9, 1e-3), 1e-6);
        assert_eq!(relative_error(2.0, 1.0, 1e-3), 0.5);
    }
}
