//! IMEX time integration of the regularized system.
//!
//! Each step updates `c`, then `n` (using the fresh `c`), then `u`:
//! diffusion, decay and viscosity are implicit, transport, chemotaxis,
//! convection and buoyancy explicit. Incompressibility is restored by a
//! final Leray projection.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Bc, Grid, ScalarField, VectorField};
use crate::model::{buoyancy, ModelParams};
use crate::ops::{
    advect_upwind, advect_vector, chemotactic_velocity, divergence, gradient_faces, AdvectionScheme,
};
use crate::scalar::Real;
use crate::solver::{
    helmholtz_project_from, solve_with_guess, vector_helmholtz, LinearSolveSpec, OperatorKind,
    DEFAULT_PROJECTION_TOL,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scheme {
    #[default]
    ImexEuler,
    /// Variable-step BDF2 with extrapolated explicit terms; the first step
    /// (and any step with an extreme step ratio) falls back to Euler.
    ImexBdf2,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ImexEuler => "imex_euler",
            Scheme::ImexBdf2 => "imex_bdf2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "imex_euler" | "euler" => Some(Scheme::ImexEuler),
            "imex_bdf2" | "bdf2" => Some(Scheme::ImexBdf2),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepControl<T> {
    /// Initial trial step.
    pub dt: T,
    /// Target outflow Courant number of the explicit transport.
    pub cfl_target: T,
    pub dt_min: T,
    pub dt_max: T,
    pub scheme: Scheme,
    /// Relative residual target of the implicit scalar and viscous solves.
    pub diffusion_tol: T,
    /// Max-norm divergence target of the projection.
    pub projection_tol: T,
}

impl<T: Real> Default for StepControl<T> {
    fn default() -> Self {
        Self {
            dt: T::of(1e-3),
            cfl_target: T::of(0.4),
            dt_min: T::of(1e-8),
            dt_max: T::of(1e-2),
            scheme: Scheme::ImexEuler,
            diffusion_tol: T::of(1e-12),
            projection_tol: T::of(DEFAULT_PROJECTION_TOL),
        }
    }
}

impl<T: Real> StepControl<T> {
    pub fn fixed(dt: T) -> Self {
        Self {
            dt,
            dt_max: dt,
            dt_min: dt.min(T::of(1e-8)),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_target > T::zero() && self.cfl_target <= T::half()) {
            return Err(Error::Config(format!(
                "cfl target must lie in (0, 0.5] (got {})",
                self.cfl_target
            )));
        }
        if !(self.dt_min > T::zero() && self.dt_min <= self.dt && self.dt <= self.dt_max) {
            return Err(Error::Config(format!(
                "need 0 < dt_min <= dt <= dt_max (got {}, {}, {})",
                self.dt_min, self.dt, self.dt_max
            )));
        }
        for (name, tol) in [
            ("diffusion_tol", self.diffusion_tol),
            ("projection_tol", self.projection_tol),
        ] {
            if !(tol > T::zero() && tol < T::one()) {
                return Err(Error::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SimState<T> {
    pub t: T,
    pub n: ScalarField<T>,
    pub c: ScalarField<T>,
    pub u: VectorField<T>,
    /// Pressure from the last projection.
    pub p: ScalarField<T>,
    pub step_index: u64,
}

impl<T: Real> SimState<T> {
    pub fn new(n: ScalarField<T>, c: ScalarField<T>, u: VectorField<T>) -> Self {
        let p = ScalarField::zeros(n.grid());
        Self {
            t: T::zero(),
            n,
            c,
            u,
            p,
            step_index: 0,
        }
    }

    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Self::new(
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
            VectorField::zeros(grid),
        )
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.n.grid()
    }

    /// Checks the state invariants: finite, nonnegative densities and a
    /// discretely divergence-free velocity.
    pub fn check(&self, projection_tol: T) -> Result<()> {
        if !(self.n.is_finite() && self.c.is_finite() && self.u.is_finite()) {
            return Err(Error::State("non-finite entries".into()));
        }
        let floor = T::of(-1e-12);
        if self.n.min() < floor || self.c.min() < floor {
            return Err(Error::State(format!(
                "negative density (min n = {:e}, min c = {:e})",
                self.n.min(),
                self.c.min()
            )));
        }
        let div = divergence(&self.u).max_abs();
        if div > projection_tol {
            return Err(Error::State(format!("max |div u| = {div:e} exceeds {projection_tol:e}")));
        }
        Ok(())
    }
}

/// Bookkeeping of one accepted step.
#[derive(Clone, Debug)]
pub struct StepReport<T> {
    pub dt: T,
    /// Mass removed by clipping negative densities before the rescale.
    pub truncation_mass: T,
    /// Outflow Courant number of the accepted step.
    pub courant: T,
    pub rejected: usize,
}

struct History<T> {
    dt: T,
    n: ScalarField<T>,
    c: ScalarField<T>,
    u: VectorField<T>,
    en: Vec<T>,
    ec: Vec<T>,
    eu: VectorField<T>,
}

struct Trial<T> {
    state: SimState<T>,
    truncation_mass: T,
    courant: T,
    dt_cfl: T,
    en: Vec<T>,
    ec: Vec<T>,
    eu: VectorField<T>,
    yosida: Option<(VectorField<T>, ScalarField<T>)>,
}

enum Attempt<T> {
    Accepted(Box<Trial<T>>),
    Rejected { dt_suggest: T },
}

/// Sequential integrator holding the adaptive step and solver warm starts.
pub struct Stepper<T: Real> {
    params: ModelParams<T>,
    ctl: StepControl<T>,
    grad_phi: Option<VectorField<T>>,
    dt: T,
    history: Option<History<T>>,
    yosida_guess: Option<(VectorField<T>, ScalarField<T>)>,
}

impl<T: Real> Stepper<T> {
    pub fn new(params: ModelParams<T>, ctl: StepControl<T>) -> Result<Self> {
        params.validate()?;
        ctl.validate()?;
        Ok(Self {
            dt: ctl.dt,
            params,
            ctl,
            grad_phi: None,
            history: None,
            yosida_guess: None,
        })
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn control(&self) -> &StepControl<T> {
        &self.ctl
    }

    /// Current trial step size.
    pub fn dt(&self) -> T {
        self.dt
    }

    /// Advances `state` by one accepted step of size at most `dt_cap`.
    ///
    /// Steps violating the transport restriction are retried with a smaller
    /// `dt`; falling below `dt_min` is a [`Error::Step`].
    pub fn step(&mut self, state: &SimState<T>, dt_cap: T) -> Result<(SimState<T>, StepReport<T>)> {
        let mut rejected = 0;
        loop {
            if !(self.dt >= self.ctl.dt_min) {
                return Err(Error::Step {
                    t: state.t.as_f64(),
                    dt: self.dt.as_f64(),
                    dt_min: self.ctl.dt_min.as_f64(),
                });
            }
            let dt = self.dt.min(dt_cap);
            match self.attempt(state, dt)? {
                Attempt::Accepted(trial) => {
                    let trial = *trial;
                    let base = if dt < self.dt { self.dt } else { dt * T::of(1.25) };
                    self.dt = base.min(self.ctl.dt_max).min(trial.dt_cfl);
                    self.history = Some(History {
                        dt,
                        n: state.n.clone(),
                        c: state.c.clone(),
                        u: state.u.clone(),
                        en: trial.en,
                        ec: trial.ec,
                        eu: trial.eu,
                    });
                    if trial.yosida.is_some() {
                        self.yosida_guess = trial.yosida;
                    }
                    return Ok((
                        trial.state,
                        StepReport {
                            dt,
                            truncation_mass: trial.truncation_mass,
                            courant: trial.courant,
                            rejected,
                        },
                    ));
                }
                Attempt::Rejected { dt_suggest } => {
                    rejected += 1;
                    self.dt = dt_suggest.min(T::half() * dt);
                }
            }
        }
    }

    fn grad_phi(&mut self, grid: &Arc<Grid<T>>) -> Option<VectorField<T>> {
        if self.params.phi.is_constant() {
            return None;
        }
        if self.grad_phi.is_none() {
            self.grad_phi = Some(self.params.phi.face_gradient(grid));
        }
        self.grad_phi.clone()
    }

    fn attempt(&mut self, s: &SimState<T>, dt: T) -> Result<Attempt<T>> {
        let grid = s.grid().clone();
        let grad_phi = self.grad_phi(&grid);
        let h = grid.h();
        let p = &self.params;
        let tol = self.ctl.diffusion_tol;

        // BDF2 coefficients for (a y^{k+1} - b y^k + c2 y^{k-1}) / dt
        let bdf = match (&self.history, self.ctl.scheme) {
            (Some(hist), Scheme::ImexBdf2) => {
                let w = dt / hist.dt;
                (w > T::of(0.2) && w < T::of(3.0)).then_some((w, hist))
            }
            _ => None,
        };
        let (a, b, c2, w) = match bdf {
            Some((w, _)) => {
                let one = T::one();
                ((one + w + w) / (one + w), one + w, w * w / (one + w), w)
            }
            None => (T::one(), T::one(), T::zero(), T::zero()),
        };
        let dte = dt / a;
        let hist = bdf.map(|(_, h)| h);
        let combine = |cur: &[T], prev: Option<&[T]>, e_cur: &[T], e_prev: Option<&[T]>| -> Vec<T> {
            (0..cur.len())
                .map(|i| {
                    let (base, e) = match (prev, e_prev) {
                        (Some(pv), Some(pe)) => (
                            (b * cur[i] - c2 * pv[i]) / a,
                            (T::one() + w) * e_cur[i] - w * pe[i],
                        ),
                        _ => (cur[i], e_cur[i]),
                    };
                    base + dte * e
                })
                .collect()
        };

        // c: ((1 + dt) I - dt Δ) c = c^k + dt (n^k - u^k·∇c^k)
        let adv_c = advect_upwind(&s.u, &s.c, p.advection);
        let ec: Vec<T> = (0..s.c.values.len())
            .map(|k| s.n.values[k] - adv_c.values[k])
            .collect();
        let rhs_c = combine(
            &s.c.values,
            hist.map(|h| h.c.values.as_slice()),
            &ec,
            hist.map(|h| h.ec.as_slice()),
        );
        let target_c = rhs_c.iter().copied().sum::<T>() / (T::one() + dte);
        let spec = LinearSolveSpec::new(
            OperatorKind::Helmholtz {
                shift: T::one() + dte,
                alpha: dte,
                bc: Bc::NeumannZero,
            },
            tol,
        );
        let rhs_c = ScalarField::from_values(&grid, rhs_c);
        let (mut c_new, _) = solve_with_guess(&spec, &rhs_c, Some(&s.c))?;
        clip_and_rescale(&mut c_new.values, target_c);
        if !c_new.is_finite() {
            return Ok(Attempt::Rejected { dt_suggest: T::half() * dt });
        }

        // transport restriction with the fresh chemotactic drift
        let drift = chemotactic_velocity(&s.n, &c_new, &p.sensitivity);
        let outflow = max_outflow(&grid, &[&s.u, &drift]);
        let courant = dt * outflow / h;
        let dt_cfl = if outflow > T::zero() {
            self.ctl.cfl_target * h / outflow
        } else {
            T::infinity()
        };
        let reject_at = (T::two() * self.ctl.cfl_target).min(T::one());
        if courant > reject_at {
            return Ok(Attempt::Rejected { dt_suggest: dt_cfl });
        }

        // n: (I - dt ∇·D∇) n = n^k - dt ∇·(n^k (S∇c^{k+1} + u^k))
        let taxis = advect_upwind(&drift, &s.n, AdvectionScheme::Upwind);
        let adv_n = advect_upwind(&s.u, &s.n, p.advection);
        let en: Vec<T> = (0..s.n.values.len())
            .map(|k| -taxis.values[k] - adv_n.values[k])
            .collect();
        let rhs_n = combine(
            &s.n.values,
            hist.map(|h| h.n.values.as_slice()),
            &en,
            hist.map(|h| h.en.as_slice()),
        );
        let target_n: T = rhs_n.iter().copied().sum();
        let m1 = p.m - T::one();
        let coeff: Vec<T> = s
            .n
            .values
            .iter()
            .map(|&v| {
                let base = (v + p.eps).max(T::zero());
                if m1 == T::zero() {
                    p.m
                } else {
                    p.m * base.powf(m1)
                }
            })
            .collect();
        let spec = LinearSolveSpec::new(
            OperatorKind::VariableCoeffHelmholtz { alpha: dte, coeff },
            tol,
        );
        let rhs_n = ScalarField::from_values(&grid, rhs_n);
        let (mut n_new, _) = solve_with_guess(&spec, &rhs_n, Some(&s.n))?;
        let truncation = clip_and_rescale(&mut n_new.values, target_n) * grid.cell_area();
        if !n_new.is_finite() {
            return Ok(Attempt::Rejected { dt_suggest: T::half() * dt });
        }

        // u: (I - dt Δ) u* = u^k + dt(-κ (Y u^k·∇) u^k + n^{k+1} ∇φ - ∇P^k), then project
        // and update the pressure by the projection increment
        let mut eu = VectorField::zeros(&grid);
        let mut yosida = None;
        if p.kappa != T::zero() {
            let (yu, guess) = self.smoothed_velocity(&s.u)?;
            eu = eu.axpby(T::one(), &advect_vector(&yu, &s.u), -p.kappa);
            yosida = guess;
        }
        if let Some(gp) = &grad_phi {
            eu = eu.axpby(T::one(), &buoyancy(&n_new, gp), T::one());
        }
        let ux = combine(
            &s.u.ux,
            hist.map(|h| h.u.ux.as_slice()),
            &eu.ux,
            hist.map(|h| h.eu.ux.as_slice()),
        );
        let uy = combine(
            &s.u.uy,
            hist.map(|h| h.u.uy.as_slice()),
            &eu.uy,
            hist.map(|h| h.eu.uy.as_slice()),
        );
        let rhs_u = VectorField::from_faces(&grid, ux, uy).axpby(T::one(), &gradient_faces(&s.p), -dte);
        let (u_star, _) = vector_helmholtz(&rhs_u, T::one(), dte, tol, Some(&s.u))?;
        let (u_new, phi) = helmholtz_project_from(&u_star, self.ctl.projection_tol, None)?;
        if !u_new.is_finite() {
            return Ok(Attempt::Rejected { dt_suggest: T::half() * dt });
        }
        let p_new = s.p.axpby(T::one(), &phi, dte.recip());

        Ok(Attempt::Accepted(Box::new(Trial {
            state: SimState {
                t: s.t + dt,
                n: n_new,
                c: c_new,
                u: u_new,
                p: p_new,
                step_index: s.step_index + 1,
            },
            truncation_mass: truncation,
            courant,
            dt_cfl,
            en,
            ec,
            eu,
            yosida,
        })))
    }

    /// `Y_ε u` with warm-started inner solves.
    fn smoothed_velocity(
        &self,
        u: &VectorField<T>,
    ) -> Result<(VectorField<T>, Option<(VectorField<T>, ScalarField<T>)>)> {
        let eps = self.params.yosida();
        let ptol = self.ctl.projection_tol;
        let (pu, _) = helmholtz_project_from(u, ptol, None)?;
        if eps == T::zero() {
            return Ok((pu, None));
        }
        let (hg, pg) = match &self.yosida_guess {
            Some((hg, pg)) => (Some(hg), Some(pg)),
            None => (None, None),
        };
        let (s, _) = vector_helmholtz(&pu, T::one(), eps, self.ctl.diffusion_tol, hg)?;
        let (w, phi) = helmholtz_project_from(&s, ptol, pg)?;
        Ok((w, Some((s, phi))))
    }
}

/// Clips negative entries and rescales the positive part so that the sum
/// equals `target`. Returns the clipped amount (sum of negative parts).
fn clip_and_rescale<T: Real>(v: &mut [T], target: T) -> T {
    let mut clipped = T::zero();
    for x in v.iter_mut() {
        if *x < T::zero() {
            clipped = clipped - *x;
            *x = T::zero();
        }
    }
    let sum: T = v.iter().copied().sum();
    if sum > T::zero() && target >= T::zero() {
        let s = target / sum;
        v.iter_mut().for_each(|x| *x = *x * s);
    }
    clipped
}

/// Largest per-cell sum of outgoing face velocities over the given fields.
fn max_outflow<T: Real>(grid: &Grid<T>, fields: &[&VectorField<T>]) -> T {
    let mut worst = T::zero();
    for f in grid.cell_faces() {
        let mut out = T::zero();
        for v in fields {
            out = out
                + (-v.ux[f[0]]).max(T::zero())
                + v.ux[f[1]].max(T::zero())
                + (-v.uy[f[2]]).max(T::zero())
                + v.uy[f[3]].max(T::zero());
        }
        worst = worst.max(out);
    }
    worst
}

/// One accepted step starting from `ctl.dt`.
pub fn advance<T: Real>(
    state: &SimState<T>,
    p: &ModelParams<T>,
    ctl: &StepControl<T>,
) -> Result<SimState<T>> {
    let mut stepper = Stepper::new(p.clone(), ctl.clone())?;
    stepper.step(state, ctl.dt).map(|(s, _)| s)
}
