//! Drives one simulation from a [`SimConfig`] to its final time.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use crate::config::SimConfig;
use crate::diagnostics::{
    blowup_indicator_with, compute_record, plateaus, BlowupIndicator, DiagnosticsRecord,
    WindowIntegrals,
};
use crate::error::{Error, Result};
use crate::grid::integrate;
use crate::io::write_snapshot;
use crate::model::ModelParams;
use crate::ops::divergence;
use crate::scenarios::build_spec;
use crate::stepper::{SimState, Stepper};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Termination {
    Completed,
    /// Reached the final time with `‖n‖_∞` failing the plateau test.
    CompletedWithGrowth,
    /// The adaptive step fell below `dt_min`.
    DtCollapse { t: f64, dt: f64 },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::CompletedWithGrowth => "completed-with-growth",
            Termination::DtCollapse { .. } => "dt_collapse",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub final_state: SimState<f64>,
    pub params: ModelParams<f64>,
    pub termination: Termination,
    pub records: Vec<DiagnosticsRecord>,
    pub diagnostics_path: Option<PathBuf>,
    /// Invariant violations observed while running, one line each.
    pub failures: Vec<String>,
    pub steps: u64,
    pub rejected_steps: usize,
    /// Largest per-step clipped mass.
    pub max_truncation: f64,
    /// Largest `max |div u|` over accepted steps.
    pub max_divergence: f64,
    pub initial_mass_n: f64,
    pub initial_mass_c: f64,
}

impl RunResult {
    pub fn blowup(&self, factor: f64) -> BlowupIndicator {
        let collapsed = matches!(self.termination, Termination::DtCollapse { .. });
        blowup_indicator_with(&self.records, collapsed, factor)
    }

    pub fn max_n_inf(&self) -> f64 {
        self.records.iter().map(|r| r.n_linf).fold(0.0, f64::max)
    }

    pub fn max_f_key(&self) -> f64 {
        self.records.iter().map(|r| r.f_key).fold(0.0, f64::max)
    }

    pub fn windows(&self) -> WindowIntegrals {
        let t_end = self.records.last().map_or(0.0, |r| r.t);
        WindowIntegrals::from_records(&self.records, WindowIntegrals::default_tau(t_end))
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `cfg`, writing `config.resolved`, `diagnostics.csv` and snapshots
/// into its output directory.
pub fn run(cfg: &SimConfig) -> Result<RunResult> {
    run_observed(cfg, true, &mut |_| {})
}

/// Runs `cfg` without touching the file system.
pub fn run_in_memory(cfg: &SimConfig) -> Result<RunResult> {
    run_observed(cfg, false, &mut |_| {})
}

struct Checks {
    failures: Vec<String>,
    seen: std::collections::BTreeSet<&'static str>,
}

impl Checks {
    fn fail(&mut self, suite: &'static str, msg: String) {
        if self.seen.insert(suite) {
            self.failures.push(format!("{suite}: {msg}"));
        }
    }
}

/// As [`run`], calling `observer` on the initial state and after every
/// accepted step.
pub fn run_observed(
    cfg: &SimConfig,
    write: bool,
    observer: &mut dyn FnMut(&SimState<f64>),
) -> Result<RunResult> {
    cfg.validate()?;
    let scenario = build_spec::<f64>(&cfg.scenario)?;
    let params = scenario.params.clone();
    let mut stepper = Stepper::new(params.clone(), cfg.control.clone())?;
    let t_final = cfg.scenario.t_final;
    let v = &cfg.verify;

    let mut csv = None;
    let mut diagnostics_path = None;
    if write {
        cfg.echo_resolved()?;
        let path = cfg.output_dir.join("diagnostics.csv");
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "{}", DiagnosticsRecord::csv_header()).map_err(|e| Error::io(&path, e))?;
        csv = Some((w, path.clone()));
        diagnostics_path = Some(path);
    }
    let mut emit = |rec: &DiagnosticsRecord| -> Result<()> {
        if let Some((w, path)) = csv.as_mut() {
            writeln!(w, "{}", rec.csv_row()).map_err(|e| Error::io(&*path, e))?;
        }
        if cfg.progress {
            println!(
                "t={:.6} dt={:.3e} mass_n={:.12e} F_key={:.6e} |n|inf={:.6e} |u|inf={:.3e}",
                rec.t, rec.dt, rec.mass_n, rec.f_key, rec.n_linf, rec.u_inf
            );
        }
        Ok(())
    };
    let snapshot = |state: &SimState<f64>, idx: usize| -> Result<()> {
        if !write {
            return Ok(());
        }
        let dir = cfg.output_dir.join("snapshots");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let ext = cfg.snapshot_format.extension();
        let (ux, uy) = state.u.cell_centered();
        for (name, field) in [("n", &state.n), ("c", &state.c), ("p", &state.p), ("ux", &ux), ("uy", &uy)] {
            let path = dir.join(format!("{name}_{idx:05}.{ext}"));
            write_snapshot(&path, field, cfg.snapshot_format)?;
        }
        Ok(())
    };

    let mut state = scenario.initial.clone();
    let mass_n0 = integrate(&state.n);
    let mass_c0 = integrate(&state.c);
    let c_cap = mass_n0.max(mass_c0) * (1.0 + v.c_mass_tol);
    let mut checks = Checks {
        failures: Vec::new(),
        seen: Default::default(),
    };

    let mut records = vec![compute_record(&state, &params)];
    emit(&records[0])?;
    observer(&state);
    if cfg.snapshot_interval.is_some() {
        snapshot(&state, 0)?;
    }

    let mut k_rec = 1u64;
    let mut k_snap = 1u64;
    let mut termination = Termination::Completed;
    let mut rejected_steps = 0;
    let mut max_truncation = 0.0f64;
    let mut trunc_since_record = 0.0f64;
    let mut max_divergence = divergence(&state.u).max_abs();
    let mut last_dt = 0.0;
    let at = |t: f64, stop: f64| (t - stop).abs() <= 1e-12 * stop.abs().max(1.0);

    while state.t < t_final && !at(state.t, t_final) {
        let next_rec = (k_rec as f64 * cfg.record_interval).min(t_final);
        let next_snap = cfg
            .snapshot_interval
            .map_or(f64::INFINITY, |s| k_snap as f64 * s);
        let stop = next_rec.min(next_snap).min(t_final);
        let remaining = stop - state.t;
        let trial = stepper.dt();
        let cap = if remaining > trial * (1.0 + 1e-9) && remaining < 2.0 * trial {
            0.5 * remaining
        } else {
            remaining
        };
        let (mut next, rep) = match stepper.step(&state, cap) {
            Ok(x) => x,
            Err(Error::Step { t, dt, .. }) => {
                termination = Termination::DtCollapse { t, dt };
                break;
            }
            Err(e) => return Err(e),
        };
        if at(next.t, stop) {
            next.t = stop;
        }
        state = next;
        last_dt = rep.dt;
        rejected_steps += rep.rejected;
        max_truncation = max_truncation.max(rep.truncation_mass);
        trunc_since_record = trunc_since_record.max(rep.truncation_mass);

        let div = divergence(&state.u).max_abs();
        max_divergence = max_divergence.max(div);
        let t = state.t;
        if v.finite && !(state.n.is_finite() && state.c.is_finite() && state.u.is_finite()) {
            checks.fail("finite", format!("non-finite field at t = {t}"));
        }
        if v.positivity && (state.n.min() < -1e-12 || state.c.min() < -1e-12) {
            checks.fail("positivity", format!("negative density at t = {t}"));
        }
        if v.mass {
            let drift = (integrate(&state.n) - mass_n0).abs();
            if drift > v.mass_tol * mass_n0.abs().max(f64::MIN_POSITIVE) && drift > 0.0 {
                checks.fail("mass", format!("relative drift {:e} at t = {t}", drift / mass_n0));
            }
        }
        if v.c_mass && integrate(&state.c) > c_cap {
            checks.fail("c_mass", format!("∫c = {} exceeds cap {c_cap} at t = {t}", integrate(&state.c)));
        }
        if v.truncation && rep.truncation_mass > v.truncation_tol * mass_n0 {
            checks.fail(
                "truncation",
                format!("clipped mass {:e} at t = {t}", rep.truncation_mass),
            );
        }
        if v.divergence && div > cfg.control.projection_tol * 1.01 {
            checks.fail("divergence", format!("max |div u| = {div:e} at t = {t}"));
        }
        observer(&state);

        if at(state.t, next_rec) {
            let mut rec = compute_record(&state, &params);
            rec.dt = last_dt;
            rec.truncation_mass = trunc_since_record;
            trunc_since_record = 0.0;
            if v.finite && !rec.is_finite() {
                checks.fail("finite", format!("non-finite diagnostics at t = {t}"));
            }
            emit(&rec)?;
            records.push(rec);
            k_rec += 1;
        }
        if at(state.t, next_snap) {
            snapshot(&state, k_snap as usize)?;
            k_snap += 1;
        }
    }
    if let Termination::DtCollapse { .. } = termination {
        if records.last().map(|r| r.t) != Some(state.t) {
            let mut rec = compute_record(&state, &params);
            rec.dt = last_dt;
            rec.truncation_mass = trunc_since_record;
            emit(&rec)?;
            records.push(rec);
        }
    }
    if let Some((mut w, path)) = csv {
        w.flush().map_err(|e| Error::io(&path, e))?;
    }

    if v.plateau && termination == Termination::Completed {
        let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
        let series: [(&str, fn(&DiagnosticsRecord) -> f64); 5] = [
            ("F_key", |r| r.f_key),
            ("n_linf", |r| r.n_linf),
            ("c_max", |r| r.c_max),
            ("grad_c_max", |r| r.grad_c_max),
            ("u_inf", |r| r.u_inf),
        ];
        for (name, get) in series {
            let ys: Vec<f64> = records.iter().map(get).collect();
            if !plateaus(&ts, &ys, v.plateau_factor) {
                checks.fail("plateau", format!("{name} grows over the second half"));
            }
        }
    }

    let mut result = RunResult {
        final_state: state,
        params,
        termination,
        records,
        diagnostics_path,
        failures: checks.failures,
        steps: 0,
        rejected_steps,
        max_truncation,
        max_divergence,
        initial_mass_n: mass_n0,
        initial_mass_c: mass_c0,
    };
    result.steps = result.final_state.step_index;
    if result.termination == Termination::Completed
        && matches!(result.blowup(v.plateau_factor), BlowupIndicator::Growing(_))
    {
        result.termination = Termination::CompletedWithGrowth;
    }
    Ok(result)
}
