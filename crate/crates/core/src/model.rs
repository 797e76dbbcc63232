//! Coefficients and right-hand sides of the regularized
//! chemotaxis–Navier–Stokes system
//!
//! ```text
//! n_t + u·∇n = Δ(n+ε)^m − ∇·(n S_ε(x,n,c) ∇c)
//! c_t + u·∇c = Δc − c + n
//! u_t + ∇P   = Δu − κ (Y_ε u·∇) u + n ∇φ,   ∇·u = 0
//! ```
//!
//! with `S_ε = ρ_ε(x) χ_ε(n) S(x,n,c)` and `Y_ε = (1 + εA)^{-1}`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::ops::{
    advect_upwind, advect_vector, gradient_faces, laplacian, porous_rhs, tensor_flux_div,
    vector_laplacian, AdvectionScheme, Mat2,
};
use crate::scalar::{smoothstep, Real};
use crate::solver::yosida_apply;

#[derive(Clone, Debug, PartialEq)]
pub enum SensitivityKind<T> {
    /// `chi · I`
    ScalarIdentity { chi: T },
    /// `chi · [[cos θ, sin θ], [−sin θ, cos θ]]`
    Rotation { chi: T, theta: T },
    /// `chi · n_half / (n_half + n) · I`
    Saturating { chi: T, n_half: T },
    /// Piecewise-linear in `n` between knots (sorted ascending), constant
    /// beyond the ends.
    Table { n_knots: Vec<T>, matrices: Vec<Mat2<T>> },
}

/// Sensitivity tensor with the boundary cutoff `ρ_ε` and optional
/// large-density cutoff `χ_ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityTensor<T> {
    pub kind: SensitivityKind<T>,
    /// Width of the boundary cutoff in units of the cell size. Zero disables it.
    pub boundary_cutoff_cells: T,
    /// Density threshold for the smooth magnitude cutoff; `None` disables it.
    pub magnitude_cutoff: Option<T>,
}

impl<T: Real> SensitivityTensor<T> {
    pub fn new(kind: SensitivityKind<T>) -> Self {
        Self {
            kind,
            boundary_cutoff_cells: T::two(),
            magnitude_cutoff: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(SensitivityKind::ScalarIdentity { chi: T::zero() })
    }

    pub fn without_cutoffs(mut self) -> Self {
        self.boundary_cutoff_cells = T::zero();
        self.magnitude_cutoff = None;
        self
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            SensitivityKind::ScalarIdentity { chi }
            | SensitivityKind::Rotation { chi, .. }
            | SensitivityKind::Saturating { chi, .. } => *chi == T::zero(),
            SensitivityKind::Table { matrices, .. } => {
                matrices.iter().all(|m| m.norm() == T::zero())
            }
        }
    }

    /// Supremum of the uncut tensor norm over all arguments.
    pub fn bound(&self) -> T {
        match &self.kind {
            SensitivityKind::ScalarIdentity { chi }
            | SensitivityKind::Rotation { chi, .. }
            | SensitivityKind::Saturating { chi, .. } => chi.abs(),
            SensitivityKind::Table { matrices, .. } => {
                matrices.iter().fold(T::zero(), |m, s| m.max(s.norm()))
            }
        }
    }

    fn validate(&self, cs: T) -> Result<()> {
        if let SensitivityKind::Table { n_knots, matrices } = &self.kind {
            if n_knots.is_empty() || n_knots.len() != matrices.len() {
                return Err(Error::Config("sensitivity table needs matching, non-empty knots".into()));
            }
            if n_knots.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config("sensitivity table knots must increase".into()));
            }
        }
        if let SensitivityKind::Saturating { n_half, .. } = &self.kind {
            if *n_half <= T::zero() {
                return Err(Error::Config("saturating sensitivity needs n_half > 0".into()));
            }
        }
        if self.boundary_cutoff_cells < T::zero() {
            return Err(Error::Config("boundary cutoff width must be >= 0".into()));
        }
        if self.bound() > cs * (T::one() + T::of(1e-12)) {
            return Err(Error::Config(format!(
                "sensitivity norm {} exceeds C_S = {cs}",
                self.bound()
            )));
        }
        Ok(())
    }

    fn base(&self, n: T) -> Mat2<T> {
        match &self.kind {
            SensitivityKind::ScalarIdentity { chi } => Mat2::identity().scale(*chi),
            SensitivityKind::Rotation { chi, theta } => {
                let (s, c) = theta.sin_cos();
                Mat2([[c, s], [-s, c]]).scale(*chi)
            }
            SensitivityKind::Saturating { chi, n_half } => {
                Mat2::identity().scale(*chi * *n_half / (*n_half + n.max(T::zero())))
            }
            SensitivityKind::Table { n_knots, matrices } => {
                let last = n_knots.len() - 1;
                if n <= n_knots[0] {
                    return matrices[0];
                }
                if n >= n_knots[last] {
                    return matrices[last];
                }
                let i = n_knots.partition_point(|&k| k <= n) - 1;
                let s = (n - n_knots[i]) / (n_knots[i + 1] - n_knots[i]);
                let (a, b) = (matrices[i].0, matrices[i + 1].0);
                let lerp = |p: T, q: T| p + s * (q - p);
                Mat2([
                    [lerp(a[0][0], b[0][0]), lerp(a[0][1], b[0][1])],
                    [lerp(a[1][0], b[1][0]), lerp(a[1][1], b[1][1])],
                ])
            }
        }
    }

    /// Boundary cutoff `ρ_ε` at wall distance `d`: zero within one cell of the
    /// wall, one beyond the cutoff width, smoothstep in between.
    pub fn rho(&self, d: T, h: T) -> T {
        let w = self.boundary_cutoff_cells * h;
        if w <= T::zero() {
            return T::one();
        }
        if w <= h {
            return if d > h { T::one() } else { T::zero() };
        }
        smoothstep((d - h) / (w - h))
    }

    /// Magnitude cutoff `χ_ε(n)`: one below the threshold, smoothly zero at
    /// twice the threshold.
    pub fn chi_cut(&self, n: T) -> T {
        match self.magnitude_cutoff {
            None => T::one(),
            Some(th) => T::one() - smoothstep((n - th) / th),
        }
    }

    /// `S_ε` at a point with known wall distance.
    pub fn eval_at(&self, _x: (T, T), wall_distance: T, h: T, n: T, _c: T) -> Mat2<T> {
        let rho = self.rho(wall_distance, h);
        if rho == T::zero() {
            return Mat2::zero();
        }
        self.base(n).scale(rho * self.chi_cut(n))
    }
}

/// `S_ε(x, n, c)` at an arbitrary point of the grid's domain.
pub fn eval_sensitivity<T: Real>(
    sens: &SensitivityTensor<T>,
    grid: &Grid<T>,
    x: (T, T),
    n: T,
    c: T,
) -> Mat2<T> {
    let d = if sens.boundary_cutoff_cells > T::zero() {
        grid.distance_to_boundary(x.0, x.1)
    } else {
        T::infinity()
    };
    sens.eval_at(x, d, grid.h(), n, c)
}

#[derive(Clone, Debug)]
pub enum Potential<T> {
    /// `φ(x) = g·x`, so `∇φ = g`.
    LinearGravity { g: (T, T) },
    /// Values at active cell centers.
    Custom(ScalarField<T>),
}

impl<T: Real> Potential<T> {
    pub fn none() -> Self {
        Potential::LinearGravity {
            g: (T::zero(), T::zero()),
        }
    }

    /// Cell samples of `φ`.
    pub fn field(&self, grid: &Arc<Grid<T>>) -> ScalarField<T> {
        match self {
            Potential::LinearGravity { g } => ScalarField::from_fn(grid, |x, y| g.0 * x + g.1 * y),
            Potential::Custom(f) => f.clone(),
        }
    }

    /// Discrete face gradient of the sampled potential, so that `n̄ ∇φ` is an
    /// exact discrete gradient for constant `n̄`.
    pub fn face_gradient(&self, grid: &Arc<Grid<T>>) -> VectorField<T> {
        gradient_faces(&self.field(grid))
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Potential::LinearGravity { g } => g.0 == T::zero() && g.1 == T::zero(),
            Potential::Custom(f) => f.max() == f.min(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelParams<T> {
    /// Diffusion exponent `m ≥ 1`.
    pub m: T,
    /// Convection strength `κ`.
    pub kappa: T,
    /// Bound `C_S` on the sensitivity norm.
    pub cs: T,
    /// Regularization `ε ∈ [0, 1)` in `(n+ε)^m`.
    pub eps: T,
    pub sensitivity: SensitivityTensor<T>,
    pub phi: Potential<T>,
    /// Yosida smoothing parameter; `None` ties it to `eps`.
    pub yosida_eps: Option<T>,
    pub advection: AdvectionScheme,
}

impl<T: Real> ModelParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.m >= T::one()) {
            return Err(Error::Config(format!("m must be >= 1 (got {})", self.m)));
        }
        if !(self.cs >= T::zero()) {
            return Err(Error::Config("C_S must be >= 0".into()));
        }
        if !(self.eps >= T::zero() && self.eps < T::one()) {
            return Err(Error::Config(format!("eps must lie in [0, 1) (got {})", self.eps)));
        }
        if let Some(y) = self.yosida_eps {
            if !(y >= T::zero()) {
                return Err(Error::Config("yosida_eps must be >= 0".into()));
            }
        }
        if !self.kappa.is_finite() {
            return Err(Error::Config("kappa must be finite".into()));
        }
        self.sensitivity.validate(self.cs)
    }

    pub fn yosida(&self) -> T {
        self.yosida_eps.unwrap_or(self.eps)
    }

    /// Heat-equation limit: `m = 1`, `ε = 0`, no chemotaxis, convection or buoyancy.
    pub fn decoupled() -> Self {
        Self {
            m: T::one(),
            kappa: T::zero(),
            cs: T::zero(),
            eps: T::zero(),
            sensitivity: SensitivityTensor::zero(),
            phi: Potential::none(),
            yosida_eps: None,
            advection: AdvectionScheme::Upwind,
        }
    }
}

/// Right-hand side of the cell equation.
pub fn rhs_n<T: Real>(
    n: &ScalarField<T>,
    c: &ScalarField<T>,
    u: &VectorField<T>,
    p: &ModelParams<T>,
) -> Result<ScalarField<T>> {
    let diffusion = porous_rhs(n, p.eps, p.m)?;
    let taxis = tensor_flux_div(n, c, &p.sensitivity);
    let transport = advect_upwind(u, n, p.advection);
    Ok(ScalarField::from_values(
        n.grid(),
        diffusion
            .values
            .iter()
            .zip(&taxis.values)
            .zip(&transport.values)
            .map(|((&d, &t), &a)| d - t - a)
            .collect(),
    ))
}

/// Right-hand side of the chemoattractant equation.
pub fn rhs_c<T: Real>(
    n: &ScalarField<T>,
    c: &ScalarField<T>,
    u: &VectorField<T>,
    scheme: AdvectionScheme,
) -> ScalarField<T> {
    let lap = laplacian(c);
    let transport = advect_upwind(u, c, scheme);
    ScalarField::from_values(
        c.grid(),
        (0..c.values.len())
            .map(|k| lap.values[k] - c.values[k] + n.values[k] - transport.values[k])
            .collect(),
    )
}

/// Buoyancy `n ∇φ` on faces with `n` averaged from the adjacent cells.
pub fn buoyancy<T: Real>(n: &ScalarField<T>, grad_phi: &VectorField<T>) -> VectorField<T> {
    let g = n.grid();
    let avg = |faces: &[crate::grid::Face], gp: &[T]| -> Vec<T> {
        faces
            .iter()
            .zip(gp)
            .map(|(f, &gv)| match (f.lo, f.hi) {
                (Some(a), Some(b)) => T::half() * (n.values[a] + n.values[b]) * gv,
                _ => T::zero(),
            })
            .collect()
    };
    VectorField::from_faces(g, avg(g.xfaces(), &grad_phi.ux), avg(g.yfaces(), &grad_phi.uy))
}

/// Pre-projection momentum right-hand side
/// `Δu − κ (Y_ε u·∇) u + n∇φ`.
pub fn rhs_u<T: Real>(
    n: &ScalarField<T>,
    u: &VectorField<T>,
    p: &ModelParams<T>,
    tol: T,
) -> Result<VectorField<T>> {
    let grid = u.grid();
    let mut out = vector_laplacian(u);
    if p.kappa != T::zero() {
        let smoothed = yosida_apply(u, p.yosida(), tol)?;
        let conv = advect_vector(&smoothed, u);
        out = out.axpby(T::one(), &conv, -p.kappa);
    }
    if !p.phi.is_constant() {
        let b = buoyancy(n, &p.phi.face_gradient(grid));
        out = out.axpby(T::one(), &b, T::one());
    }
    Ok(out)
}
