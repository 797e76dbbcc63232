//! Weak-form residuals of a stored trajectory against separable test
//! functions `P(x) θ(t)`.
//!
//! The time derivative is moved onto the test function and both time
//! integrals use the trapezoidal rule, so that for a step sequence
//! `t_0 < … < t_K` with `θ(t_K) = 0`
//!
//! ```text
//! −Σ_k (n^k + n^{k+1}, φ^{k+1} − φ^k) / 2 − (n^0, φ^0) = Σ_k Δt_k (R^k + R^{k+1}) / 2
//! ```
//!
//! where `R^k` pairs the right-hand side at step `k` with `φ^k` after integrating by parts
//! in space. Spatial derivatives of the test function are analytic.

use std::f64::consts::PI;

use crate::error::Result;
use crate::grid::{face_dot, Grid, VectorField};
use crate::model::{buoyancy, ModelParams};
use crate::ops::{advect_vector, cell_gradient};
use crate::scalar::Real;
use crate::solver::yosida_apply;
use crate::stepper::SimState;

/// `cos(aπx/Lx) cos(bπy/Ly) θ(t)` for the scalar equations and the
/// divergence-free field `curl(sin²(a'πx/Lx) sin²(b'πy/Ly)) θ(t)` with
/// `a' = max(a, 1)`, `b' = max(b, 1)` for the momentum equation, where
/// `θ(t) = exp(1 − 1/(1 − (t/T)²))` on `[0, T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestFunction {
    pub a: u32,
    pub b: u32,
    pub amplitude: f64,
}

impl TestFunction {
    pub fn cosine(a: u32, b: u32) -> Self {
        Self { a, b, amplitude: 1.0 }
    }

    /// Spatially constant test; the scalar identities reduce to the mass balance.
    pub fn constant() -> Self {
        Self::cosine(0, 0)
    }

    pub fn zero() -> Self {
        Self { a: 0, b: 0, amplitude: 0.0 }
    }

    /// The documented family used by the refinement study.
    pub fn family() -> Vec<Self> {
        vec![
            Self::cosine(0, 1),
            Self::cosine(1, 0),
            Self::cosine(1, 1),
            Self::cosine(2, 1),
            Self::constant(),
        ]
    }

    pub fn theta(t: f64, t_final: f64) -> f64 {
        let s = t / t_final;
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }

    fn wavenumbers(&self, lx: f64, ly: f64) -> (f64, f64) {
        (self.a as f64 * PI / lx, self.b as f64 * PI / ly)
    }

    /// `(P, ∂xP, ∂yP, ΔP)` of the scalar test.
    fn scalar(&self, x: f64, y: f64, lx: f64, ly: f64) -> [f64; 4] {
        let (ka, kb) = self.wavenumbers(lx, ly);
        let (sx, cx) = (ka * x).sin_cos();
        let (sy, cy) = (kb * y).sin_cos();
        let amp = self.amplitude;
        [
            amp * cx * cy,
            -amp * ka * sx * cy,
            -amp * kb * cx * sy,
            -amp * (ka * ka + kb * kb) * cx * cy,
        ]
    }

    /// `(ψ, Δψ)` of the vector test, both as `(x, y)` pairs.
    fn vector(&self, x: f64, y: f64, lx: f64, ly: f64) -> ((f64, f64), (f64, f64)) {
        let ka = self.a.max(1) as f64 * PI / lx;
        let kb = self.b.max(1) as f64 * PI / ly;
        // f = sin²(kx) and its first three derivatives
        let d = |k: f64, z: f64| {
            let (s2, c2) = (2.0 * k * z).sin_cos();
            [0.5 * (1.0 - c2), k * s2, 2.0 * k * k * c2, -4.0 * k * k * k * s2]
        };
        let f = d(ka, x);
        let g = d(kb, y);
        let amp = self.amplitude;
        let psi = (amp * f[0] * g[1], -amp * f[1] * g[0]);
        let lap = (
            amp * (f[2] * g[1] + f[0] * g[3]),
            -amp * (f[3] * g[0] + f[1] * g[2]),
        );
        (psi, lap)
    }
}

/// Residuals of the `n`, `c` and `u` identities, each relative to the sum
/// of the magnitudes of its terms (zero when every term vanishes).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeakResidual {
    pub n: f64,
    pub c: f64,
    pub u: f64,
    pub abs_n: f64,
    pub abs_c: f64,
    pub abs_u: f64,
}

impl WeakResidual {
    pub fn max(&self) -> f64 {
        self.n.max(self.c).max(self.u)
    }
}

struct Sampled<T> {
    p: Vec<T>,
    px: Vec<T>,
    py: Vec<T>,
    lap: Vec<T>,
    psi: VectorField<T>,
    lap_psi: VectorField<T>,
}

fn sample<T: Real>(test: &TestFunction, grid: &std::sync::Arc<Grid<T>>) -> Sampled<T> {
    let (lx, ly) = (grid.lx().as_f64(), grid.ly().as_f64());
    let nc = grid.num_cells();
    let mut s = Sampled {
        p: Vec::with_capacity(nc),
        px: Vec::with_capacity(nc),
        py: Vec::with_capacity(nc),
        lap: Vec::with_capacity(nc),
        psi: VectorField::zeros(grid),
        lap_psi: VectorField::zeros(grid),
    };
    for k in 0..nc {
        let (x, y) = grid.cell_center(k);
        let v = test.scalar(x.as_f64(), y.as_f64(), lx, ly);
        s.p.push(T::of(v[0]));
        s.px.push(T::of(v[1]));
        s.py.push(T::of(v[2]));
        s.lap.push(T::of(v[3]));
    }
    let vx = |k: usize, axis_x: bool| {
        let (x, y) = if axis_x { grid.xface_center(k) } else { grid.yface_center(k) };
        test.vector(x.as_f64(), y.as_f64(), lx, ly)
    };
    let (mut psx, mut lpx) = (Vec::new(), Vec::new());
    for k in 0..grid.xfaces().len() {
        let (p, l) = vx(k, true);
        psx.push(T::of(p.0));
        lpx.push(T::of(l.0));
    }
    let (mut psy, mut lpy) = (Vec::new(), Vec::new());
    for k in 0..grid.yfaces().len() {
        let (p, l) = vx(k, false);
        psy.push(T::of(p.1));
        lpy.push(T::of(l.1));
    }
    s.psi = VectorField::from_faces(grid, psx, psy);
    s.lap_psi = VectorField::from_faces(grid, lpx, lpy);
    s
}

fn dot<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>().as_f64()
}

/// Per-state spatial pairings: `(state, P)` and the right-hand side terms.
struct Pairings {
    n: f64,
    c: f64,
    u: f64,
    rhs_n: [f64; 3],
    rhs_c: [f64; 4],
    rhs_u: [f64; 3],
}

fn pair<T: Real>(s: &SimState<T>, p: &ModelParams<T>, tf: &Sampled<T>, tol: T) -> Result<Pairings> {
    let grid = s.grid();
    let area = grid.cell_area().as_f64();
    let (n, c) = (&s.n.values, &s.c.values);
    let (ucx, ucy) = s.u.cell_centered();
    let (gx, gy) = cell_gradient(&s.c);
    let dist = grid.wall_distance_cells();
    let h = grid.h();

    let pow: Vec<T> = n
        .iter()
        .map(|&v| {
            let b = (v + p.eps).max(T::zero());
            if p.m == T::one() {
                b
            } else {
                b.powf(p.m)
            }
        })
        .collect();
    let mut taxis = T::zero();
    let mut transport_n = T::zero();
    let mut transport_c = T::zero();
    for k in 0..n.len() {
        if !p.sensitivity.is_zero() {
            let sm = p.sensitivity.eval_at(grid.cell_center(k), dist[k], h, n[k], c[k]);
            let (fx, fy) = sm.apply((gx[k], gy[k]));
            taxis = taxis + n[k] * (fx * tf.px[k] + fy * tf.py[k]);
        }
        let adv = ucx.values[k] * tf.px[k] + ucy.values[k] * tf.py[k];
        transport_n = transport_n + n[k] * adv;
        transport_c = transport_c + c[k] * adv;
    }

    let mut rhs_u = [face_dot(&s.u, &tf.lap_psi).as_f64(), 0.0, 0.0];
    if p.kappa != T::zero() {
        let yu = yosida_apply(&s.u, p.yosida(), tol)?;
        rhs_u[1] = -(p.kappa * face_dot(&advect_vector(&yu, &s.u), &tf.psi)).as_f64();
    }
    if !p.phi.is_constant() {
        let b = buoyancy(&s.n, &p.phi.face_gradient(grid));
        rhs_u[2] = face_dot(&b, &tf.psi).as_f64();
    }

    Ok(Pairings {
        n: area * dot(n, &tf.p),
        c: area * dot(c, &tf.p),
        u: face_dot(&s.u, &tf.psi).as_f64(),
        rhs_n: [
            area * dot(&pow, &tf.lap),
            area * taxis.as_f64(),
            area * transport_n.as_f64(),
        ],
        rhs_c: [
            area * dot(c, &tf.lap),
            -area * dot(c, &tf.p),
            area * dot(n, &tf.p),
            area * transport_c.as_f64(),
        ],
        rhs_u,
    })
}

/// Evaluates the three weak identities on `traj`, a sequence of states at
/// consecutive accepted steps ending at the support edge `t_K` of `θ`.
pub fn weak_residual<T: Real>(
    traj: &[SimState<T>],
    p: &ModelParams<T>,
    test: &TestFunction,
) -> Result<WeakResidual> {
    if traj.len() < 2 || test.amplitude == 0.0 {
        return Ok(WeakResidual::default());
    }
    let grid = traj[0].grid();
    let tf = sample(test, grid);
    let t0 = traj[0].t.as_f64();
    let t_final = traj[traj.len() - 1].t.as_f64() - t0;
    let theta: Vec<f64> = traj
        .iter()
        .map(|s| TestFunction::theta(s.t.as_f64() - t0, t_final))
        .collect();
    let tol = T::of(crate::solver::DEFAULT_PROJECTION_TOL);
    let pairs: Vec<Pairings> = traj.iter().map(|s| pair(s, p, &tf, tol)).collect::<Result<_>>()?;

    let mut terms_n: Vec<f64> = Vec::new();
    let mut terms_c: Vec<f64> = Vec::new();
    let mut terms_u: Vec<f64> = Vec::new();
    // left-hand sides (moved to the residual with their sign)
    terms_n.push(-pairs[0].n * theta[0]);
    terms_c.push(-pairs[0].c * theta[0]);
    terms_u.push(-pairs[0].u * theta[0]);
    for k in 0..traj.len() - 1 {
        let dth = 0.5 * (theta[k + 1] - theta[k]);
        for q in [&pairs[k], &pairs[k + 1]] {
            terms_n.push(-q.n * dth);
            terms_c.push(-q.c * dth);
            terms_u.push(-q.u * dth);
        }
    }
    // right-hand sides, trapezoidal in time
    for k in 0..traj.len() - 1 {
        let half_dt = 0.5 * (traj[k + 1].t - traj[k].t).as_f64();
        for (q, th) in [(&pairs[k], theta[k]), (&pairs[k + 1], theta[k + 1])] {
            let w = half_dt * th;
            terms_n.extend(q.rhs_n.iter().map(|v| -w * v));
            terms_c.extend(q.rhs_c.iter().map(|v| -w * v));
            terms_u.extend(q.rhs_u.iter().map(|v| -w * v));
        }
    }
    let rel = |terms: &[f64]| {
        let r: f64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|v| v.abs()).sum();
        let rel = if scale == 0.0 { 0.0 } else { r.abs() / scale };
        (rel, r.abs())
    };
    let (n, abs_n) = rel(&terms_n);
    let (c, abs_c) = rel(&terms_c);
    let (u, abs_u) = rel(&terms_u);
    Ok(WeakResidual {
        n,
        c,
        u,
        abs_n,
        abs_c,
        abs_u,
    })
}
