//! Uniform Gronwall-type bound and an a-posteriori verifier for sampled
//! trajectories.

use crate::error::{Error, Result};

/// `max{y0 + B, B/(Aσ) + 2B}`.
pub fn gronwall_bound(y0: f64, a: f64, b: f64, sigma: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Config(format!("A must be > 0 (got {a})")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be > 0 (got {sigma})")));
    }
    if !(b >= 0.0) {
        return Err(Error::Config(format!("B must be >= 0 (got {b})")));
    }
    if !y0.is_finite() {
        return Err(Error::Config("y0 must be finite".into()));
    }
    Ok((y0 + b).max(b / (a * sigma) + 2.0 * b))
}

/// Sampled `y` and forcing `h` on strictly increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct GronwallProblem {
    pub y0: f64,
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GronwallReport {
    pub holds: bool,
    /// `bound − max y`.
    pub margin: f64,
    pub bound: f64,
    pub max_y: f64,
}

/// Checks the hypotheses at sample resolution, then compares `max y` with
/// the bound.
///
/// The differential inequality is tested in integrated (trapezoid) form on
/// every sample interval and the window condition on every window starting
/// at a sample, each with slack `1e-6·scale`. A violated hypothesis is a
/// [`Error::Hypothesis`], since the bound then says nothing.
pub fn verify_gronwall(prob: &GronwallProblem) -> Result<GronwallReport> {
    let bound = gronwall_bound(prob.y0, prob.a, prob.b, prob.sigma)?;
    let (t, y, h) = (&prob.t, &prob.y, &prob.h);
    if t.is_empty() || t.len() != y.len() || t.len() != h.len() {
        return Err(Error::Config("series must be non-empty and of equal length".into()));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("sample times must be strictly increasing".into()));
    }
    if y.iter().chain(h).any(|v| !v.is_finite()) {
        return Err(Error::Config("series must be finite".into()));
    }
    let max_y = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_h = h.iter().copied().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = max_y.abs().max(prob.y0.abs()).max(prob.b).max(max_h * prob.sigma).max(1.0);
    let slack = 1e-6 * scale;

    if (y[0] - prob.y0).abs() > slack {
        return Err(Error::Hypothesis(format!(
            "y(t0) = {} differs from y0 = {}",
            y[0], prob.y0
        )));
    }
    if let Some(i) = y.iter().position(|&v| v < -slack) {
        return Err(Error::Hypothesis(format!("y < 0 at t = {}", t[i])));
    }
    if let Some(i) = h.iter().position(|&v| v < -slack) {
        return Err(Error::Hypothesis(format!("h < 0 at t = {}", t[i])));
    }
    for i in 0..t.len() - 1 {
        let d = t[i + 1] - t[i];
        let lhs = y[i + 1] - y[i] + prob.a * d * 0.5 * (y[i] + y[i + 1]);
        let rhs = d * 0.5 * (h[i] + h[i + 1]);
        if lhs > rhs + slack {
            return Err(Error::Hypothesis(format!(
                "y' + Ay > h on [{}, {}] (excess {:e})",
                t[i],
                t[i + 1],
                lhs - rhs
            )));
        }
    }

    let mut cum = Vec::with_capacity(t.len());
    cum.push(0.0);
    for i in 0..t.len() - 1 {
        let prev = cum[i];
        cum.push(prev + 0.5 * (t[i + 1] - t[i]) * (h[i] + h[i + 1]));
    }
    let end = t[t.len() - 1];
    for i in 0..t.len() {
        let stop = t[i] + prob.sigma;
        if stop > end {
            break;
        }
        let j = t.partition_point(|&x| x <= stop) - 1;
        let at_stop = if j + 1 < t.len() {
            let s = (stop - t[j]) / (t[j + 1] - t[j]);
            cum[j] + s * (cum[j + 1] - cum[j])
        } else {
            cum[j]
        };
        let window = at_stop - cum[i];
        if window > prob.b + slack {
            return Err(Error::Hypothesis(format!(
                "window integral {window} over [{}, {stop}] exceeds B = {}",
                t[i], prob.b
            )));
        }
    }

    Ok(GronwallReport {
        holds: max_y <= bound * (1.0 + 1e-9),
        margin: bound - max_y,
        bound,
        max_y,
    })
}
