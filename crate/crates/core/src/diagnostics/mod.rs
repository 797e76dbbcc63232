//! Runtime monitors: the functionals controlling boundedness, their window
//! integrals, the Gronwall bound, weak-form residuals and a blow-up proxy.

mod gronwall;
mod weak;

use std::io::Write;

pub use gronwall::{gronwall_bound, verify_gronwall, GronwallProblem, GronwallReport};
pub use weak::{weak_residual, TestFunction, WeakResidual};

use crate::grid::{cell_dot, face_dot, integrate, ScalarField};
use crate::model::ModelParams;
use crate::ops::{cell_grad_sq, cell_gradient, divergence, enstrophy};
use crate::scalar::Real;
use crate::stepper::SimState;

/// One row of the diagnostics time series.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    pub mass_n: f64,
    pub mass_c: f64,
    /// `∫(n+ε)^m + ∫|∇c|²`
    pub f_key: f64,
    /// `∫n + ∫(n+ε)^{m−1} + ∫c² + ∫|u|²`
    pub e_base: f64,
    /// `∫|∇u|²`
    pub enstrophy: f64,
    /// `‖∇c‖_{L^{2m}}` from cell-averaged gradients.
    pub grad_c_2m: f64,
    pub n_l2: f64,
    pub n_l2m: f64,
    pub n_linf: f64,
    pub c_max: f64,
    pub grad_c_max: f64,
    /// Largest cell-centered speed.
    pub u_inf: f64,
    pub div_u_max: f64,
    /// Largest per-step clipped mass since the previous record.
    pub truncation_mass: f64,
    /// `∫(n+ε)^{2m−4}|∇n|²`
    pub diss_n: f64,
    /// `∫|∇c|²`
    pub grad_c_sq: f64,
    /// `∫(n+ε)^{2m}`
    pub n_pow_2m: f64,
}

impl DiagnosticsRecord {
    pub const FIELDS: [&'static str; 19] = [
        "t",
        "dt",
        "mass_n",
        "mass_c",
        "F_key",
        "E_base",
        "enstrophy",
        "grad_c_2m",
        "n_l2",
        "n_l2m",
        "n_linf",
        "c_max",
        "grad_c_max",
        "u_inf",
        "div_u_max",
        "truncation_mass",
        "diss_n",
        "grad_c_sq",
        "n_pow_2m",
    ];

    pub fn values(&self) -> [f64; 19] {
        [
            self.t,
            self.dt,
            self.mass_n,
            self.mass_c,
            self.f_key,
            self.e_base,
            self.enstrophy,
            self.grad_c_2m,
            self.n_l2,
            self.n_l2m,
            self.n_linf,
            self.c_max,
            self.grad_c_max,
            self.u_inf,
            self.div_u_max,
            self.truncation_mass,
            self.diss_n,
            self.grad_c_sq,
            self.n_pow_2m,
        ]
    }

    pub fn from_values(v: &[f64; 19]) -> Self {
        Self {
            t: v[0],
            dt: v[1],
            mass_n: v[2],
            mass_c: v[3],
            f_key: v[4],
            e_base: v[5],
            enstrophy: v[6],
            grad_c_2m: v[7],
            n_l2: v[8],
            n_l2m: v[9],
            n_linf: v[10],
            c_max: v[11],
            grad_c_max: v[12],
            u_inf: v[13],
            div_u_max: v[14],
            truncation_mass: v[15],
            diss_n: v[16],
            grad_c_sq: v[17],
            n_pow_2m: v[18],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    pub fn csv_header() -> String {
        Self::FIELDS.join(",")
    }

    /// CSV row with 17 significant digits.
    pub fn csv_row(&self) -> String {
        self.values()
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// `(n+ε)^q`, reading `0^q` as 0 for `q > 0` and 1 for `q = 0`.
fn shifted_pow<T: Real>(v: T, eps: T, q: T) -> T {
    let base = (v + eps).max(T::zero());
    if q == T::zero() {
        T::one()
    } else if q == T::one() {
        base
    } else {
        base.powf(q)
    }
}

/// Evaluates every monitored functional on `state`.
///
/// `dt` and `truncation_mass` are left at zero; the driver fills them.
pub fn compute_record<T: Real>(state: &SimState<T>, p: &ModelParams<T>) -> DiagnosticsRecord {
    let grid = state.grid();
    let area = grid.cell_area();
    let (m, eps) = (p.m, p.eps);
    let n = &state.n;
    let c = &state.c;
    let sum = |f: &dyn Fn(usize) -> T| -> T { (0..n.values.len()).map(f).sum::<T>() * area };

    let grad_c_sq_cells = cell_grad_sq(c);
    let grad_c_sq = sum(&|k| grad_c_sq_cells[k]);
    let f_key = sum(&|k| shifted_pow(n.values[k], eps, m)) + grad_c_sq;
    let u_sq = face_dot(&state.u, &state.u);
    let e_base = integrate(n) + sum(&|k| shifted_pow(n.values[k], eps, m - T::one())) + cell_dot(c, c) + u_sq;

    let (gx, gy) = cell_gradient(c);
    let gmag: Vec<T> = gx.iter().zip(&gy).map(|(&a, &b)| (a * a + b * b).sqrt()).collect();
    let two_m = m + m;
    let grad_c_2m = (sum(&|k| gmag[k].powf(two_m))).powf(two_m.recip());
    let grad_c_max = gmag.iter().fold(T::zero(), |a, &b| a.max(b));

    let lp = |p: T| -> T { (sum(&|k| n.values[k].abs().powf(p))).powf(p.recip()) };
    let grad_n_sq = cell_grad_sq(n);
    let q = two_m - T::of(4.0);
    let diss_n = sum(&|k| {
        let base = (n.values[k] + eps).max(T::zero());
        if base == T::zero() || grad_n_sq[k] == T::zero() {
            T::zero()
        } else {
            base.powf(q) * grad_n_sq[k]
        }
    });

    let (ucx, ucy) = state.u.cell_centered();
    let u_inf = ucx
        .values
        .iter()
        .zip(&ucy.values)
        .fold(T::zero(), |a, (&x, &y)| a.max((x * x + y * y).sqrt()));

    DiagnosticsRecord {
        t: state.t.as_f64(),
        dt: 0.0,
        mass_n: integrate(n).as_f64(),
        mass_c: integrate(c).as_f64(),
        f_key: f_key.as_f64(),
        e_base: e_base.as_f64(),
        enstrophy: enstrophy(&state.u).as_f64(),
        grad_c_2m: grad_c_2m.as_f64(),
        n_l2: lp(T::two()).as_f64(),
        n_l2m: lp(two_m).as_f64(),
        n_linf: n.max_abs().as_f64(),
        c_max: c.max_abs().as_f64(),
        grad_c_max: grad_c_max.as_f64(),
        u_inf: u_inf.as_f64(),
        div_u_max: divergence(&state.u).max_abs().as_f64(),
        truncation_mass: 0.0,
        diss_n: diss_n.as_f64(),
        grad_c_sq: grad_c_sq.as_f64(),
        n_pow_2m: sum(&|k| shifted_pow(n.values[k], eps, two_m)).as_f64(),
    }
}

/// Writes a diagnostics CSV (header plus one row per record).
pub fn write_csv(mut w: impl Write, records: &[DiagnosticsRecord]) -> std::io::Result<()> {
    writeln!(w, "{}", DiagnosticsRecord::csv_header())?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Parses a CSV written by [`write_csv`].
pub fn read_csv(text: &str) -> Option<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    if lines.next()? != DiagnosticsRecord::csv_header() {
        return None;
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().ok()).collect::<Option<_>>()?;
            let arr: [f64; 19] = v.try_into().ok()?;
            Some(DiagnosticsRecord::from_values(&arr))
        })
        .collect()
}

/// Running time integrals of the dissipation densities, accumulated by the
/// trapezoid rule over the record times.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowIntegrals {
    pub tau: f64,
    pub times: Vec<f64>,
    /// Cumulative `∫_0^t ∫(n+ε)^{2m−4}|∇n|²`.
    pub diss_n: Vec<f64>,
    /// Cumulative `∫_0^t ∫|∇c|²`.
    pub grad_c: Vec<f64>,
    /// Cumulative `∫_0^t ∫|∇u|²`.
    pub grad_u: Vec<f64>,
    /// Cumulative `∫_0^t ∫(n+ε)^{2m}`.
    pub n_pow_2m: Vec<f64>,
}

/// Window sums over `[t, t+τ]` of the four accumulated densities.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WindowValues {
    pub diss_n: f64,
    pub grad_c: f64,
    pub grad_u: f64,
    pub n_pow_2m: f64,
}

impl WindowIntegrals {
    /// Default window length `min{1, T/6}`.
    pub fn default_tau(t_final: f64) -> f64 {
        (t_final / 6.0).min(1.0)
    }

    pub fn from_records(records: &[DiagnosticsRecord], tau: f64) -> Self {
        let mut cum = [0.0f64; 4];
        let mut w = Self {
            tau,
            times: Vec::with_capacity(records.len()),
            diss_n: Vec::with_capacity(records.len()),
            grad_c: Vec::with_capacity(records.len()),
            grad_u: Vec::with_capacity(records.len()),
            n_pow_2m: Vec::with_capacity(records.len()),
        };
        let dens = |r: &DiagnosticsRecord| [r.diss_n, r.grad_c_sq, r.enstrophy, r.n_pow_2m];
        for (i, r) in records.iter().enumerate() {
            if i > 0 {
                let prev = &records[i - 1];
                let (a, b) = (dens(prev), dens(r));
                for j in 0..4 {
                    cum[j] += 0.5 * (r.t - prev.t) * (a[j] + b[j]);
                }
            }
            w.times.push(r.t);
            w.diss_n.push(cum[0]);
            w.grad_c.push(cum[1]);
            w.grad_u.push(cum[2]);
            w.n_pow_2m.push(cum[3]);
        }
        w
    }

    /// Integrals over `[a, b]` (clamped to the recorded span), with linear
    /// interpolation of the cumulative sums between records.
    pub fn between(&self, a: f64, b: f64) -> WindowValues {
        let at = |series: &[f64], t: f64| interp(&self.times, series, t);
        WindowValues {
            diss_n: at(&self.diss_n, b) - at(&self.diss_n, a),
            grad_c: at(&self.grad_c, b) - at(&self.grad_c, a),
            grad_u: at(&self.grad_u, b) - at(&self.grad_u, a),
            n_pow_2m: at(&self.n_pow_2m, b) - at(&self.n_pow_2m, a),
        }
    }

    /// Componentwise maximum of the window integrals over `[t, t+τ]` for
    /// every record time `t` with `t + τ` inside the recorded span.
    pub fn max_window(&self) -> WindowValues {
        let end = self.times.last().copied().unwrap_or(0.0);
        let mut out = WindowValues::default();
        for &t in &self.times {
            if t + self.tau > end * (1.0 + 1e-12) {
                break;
            }
            let w = self.between(t, t + self.tau);
            out.diss_n = out.diss_n.max(w.diss_n);
            out.grad_c = out.grad_c.max(w.grad_c);
            out.grad_u = out.grad_u.max(w.grad_u);
            out.n_pow_2m = out.n_pow_2m.max(w.n_pow_2m);
        }
        out
    }
}

fn interp(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    if ts.is_empty() {
        return 0.0;
    }
    if t <= ts[0] {
        return ys[0];
    }
    let last = ts.len() - 1;
    if t >= ts[last] {
        return ys[last];
    }
    let i = ts.partition_point(|&x| x <= t) - 1;
    let s = (t - ts[i]) / (ts[i + 1] - ts[i]);
    ys[i] + s * (ys[i + 1] - ys[i])
}

/// Largest value over the first and second halves of the time span.
pub fn half_maxima(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let (Some(&t0), Some(&t1)) = (ts.first(), ts.last()) else {
        return (0.0, 0.0);
    };
    let mid = 0.5 * (t0 + t1);
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for (&t, &y) in ts.iter().zip(ys) {
        if t <= mid {
            first = first.max(y);
        } else {
            second = second.max(y);
        }
    }
    (first, second)
}

/// Plateau test: the maximum over the second half of the run is at most
/// `factor` times the maximum over the first half.
pub fn plateaus(ts: &[f64], ys: &[f64], factor: f64) -> bool {
    let (first, second) = half_maxima(ts, ys);
    second <= factor * first || second == f64::NEG_INFINITY
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlowupIndicator {
    Bounded,
    /// Fitted exponential growth rate of `‖n‖_∞`.
    Growing(f64),
    DtCollapse,
}

impl BlowupIndicator {
    pub fn label(&self) -> &'static str {
        match self {
            BlowupIndicator::Bounded => "bounded",
            BlowupIndicator::Growing(_) => "growing",
            BlowupIndicator::DtCollapse => "dt_collapse",
        }
    }
}

impl std::fmt::Display for BlowupIndicator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlowupIndicator::Growing(r) => write!(f, "growing({r:.4})"),
            other => f.write_str(other.label()),
        }
    }
}

pub const DEFAULT_PLATEAU_FACTOR: f64 = 1.2;

/// Classifies a run from its `‖n‖_∞` history. Intended for at least ten
/// records; shorter series are classified on whatever is available.
pub fn blowup_indicator(records: &[DiagnosticsRecord], collapsed: bool) -> BlowupIndicator {
    blowup_indicator_with(records, collapsed, DEFAULT_PLATEAU_FACTOR)
}

pub fn blowup_indicator_with(
    records: &[DiagnosticsRecord],
    collapsed: bool,
    factor: f64,
) -> BlowupIndicator {
    if collapsed {
        return BlowupIndicator::DtCollapse;
    }
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.n_linf).collect();
    if plateaus(&ts, &ys, factor) {
        return BlowupIndicator::Bounded;
    }
    BlowupIndicator::Growing(log_linear_rate(&ts, &ys))
}

/// Least-squares slope of `ln y` against `t` over the positive samples.
pub fn log_linear_rate(ts: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&t, &y)| (t, y.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// `‖a − b‖_{L²}` for two cell fields on the same grid.
pub fn l2_distance<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> T {
    let d = a.axpby(T::one(), b, -T::one());
    cell_dot(&d, &d).sqrt()
}
