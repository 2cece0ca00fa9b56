//! Central finite-difference comparison of tape gradients.
//!
//! The objective is `sum(out * probe)` for a random probe tensor. A
//! coordinate whose `±step` interval straddles a ReLU kink (the ReLU sign
//! pattern at either end differs from the base point) has no valid central
//! difference at that step, so the step is halved until the interval lies on
//! one linear piece.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tape::{Tape, Tensor, Var};

/// Records a graph on `tape` from the leaf inputs and returns its output.
pub type Build<'a> = dyn Fn(&mut Tape<'_, f64>, &[Var]) -> Result<Var> + 'a;

const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Largest `|a - b| / max(|a|, |b|, 1e-6)` over all checked coordinates.
    pub max_rel_error: f64,
    /// Parameter name or `input.{i}` of the worst coordinate.
    pub worst: String,
    pub checked: usize,
    /// Coordinates that needed a step below the requested one.
    pub refined: usize,
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn objective(params: &ParamStore<f64>, inputs: &[Tensor<f64>], probe: &Tensor<f64>, build: &Build<'_>) -> Result<(f64, Vec<bool>)> {
    let mut tape = Tape::new(params);
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let y = build(&mut tape, &vars)?;
    Ok(((tape.value(y) * probe).sum(), tape.relu_pattern()))
}

fn central_difference(
    eval: &mut dyn FnMut(f64) -> Result<(f64, Vec<bool>)>,
    base: &[bool],
    step: f64,
) -> Result<(f64, bool)> {
    let mut h = step;
    for _ in 0..MAX_HALVINGS {
        let (up, pu) = eval(h)?;
        let (down, pd) = eval(-h)?;
        if pu == base && pd == base {
            return Ok(((up - down) / (2.0 * h), h < step));
        }
        h *= 0.5;
    }
    Err(Error::Config("coordinate sits on a ReLU kink".into()))
}

/// Compares every parameter and every input element.
pub fn check_gradients(
    params: &ParamStore<f64>,
    inputs: &[Tensor<f64>],
    build: &Build<'_>,
    step: f64,
    seed: u64,
) -> Result<GradCheck> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut tape = Tape::new(params);
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let y = build(&mut tape, &vars)?;
    let probe = tape.value(y).mapv(|_| rng.random_range(-1.0..1.0));
    let grads = tape.backward(y, probe.clone())?;
    let base = tape.relu_pattern();

    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
        refined: 0,
    };
    let note = |report: &mut GradCheck, analytic: f64, (fd, refined): (f64, bool), name: &str| {
        let e = rel_err(analytic, fd);
        if e > report.max_rel_error || report.checked == 0 {
            report.max_rel_error = e;
            report.worst = name.to_string();
        }
        report.checked += 1;
        report.refined += usize::from(refined);
    };

    let mut p = params.clone();
    for (pi, g) in grads.params.iter().enumerate() {
        let name = params.params[pi].name.clone();
        for k in 0..g.len() {
            let orig = p.params[pi].data[k];
            let fd = central_difference(
                &mut |h| {
                    p.params[pi].data[k] = orig + h;
                    let r = objective(&p, inputs, &probe, build);
                    p.params[pi].data[k] = orig;
                    r
                },
                &base,
                step,
            )?;
            note(&mut report, g[k], fd, &name);
        }
    }
    let mut xs = inputs.to_vec();
    for (vi, v) in vars.iter().enumerate() {
        let g = grads.value(*v).cloned().unwrap_or_else(|| Tensor::zeros(inputs[vi].dim()));
        let name = format!("input.{vi}");
        for (idx, &gv) in g.indexed_iter() {
            let orig = xs[vi][idx];
            let fd = central_difference(
                &mut |h| {
                    xs[vi][idx] = orig + h;
                    let r = objective(params, &xs, &probe, build);
                    xs[vi][idx] = orig;
                    r
                },
                &base,
                step,
            )?;
            note(&mut report, gv, fd, &name);
        }
    }
    Ok(report)
}
