//! Multigrid-preconditioned conjugate gradient for the symmetric operators of
//! the scheme: the Neumann pressure Poisson problem behind the Leray
//! projection, scalar Helmholtz problems for implicit diffusion, and the
//! vector Helmholtz problem behind the Yosida smoothing.

use std::sync::Arc;

use crate::amg::{Amg, Csr};
use crate::error::{Error, Result};
use crate::grid::{Bc, Grid, Nbr, ScalarField, VectorField, NO_CELL};
use crate::ops::{divergence, gradient_faces};
use crate::scalar::Real;

/// Projection target on `max |div w|`.
pub const DEFAULT_PROJECTION_TOL: f64 = 1e-10;
/// Relative residual target for implicit diffusion solves.
pub const DEFAULT_DIFFUSION_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub enum OperatorKind<T> {
    /// `-Δ` with homogeneous Neumann walls. Singular; solutions are gauged
    /// to mean zero. With `auto_project` the mean of the right-hand side is
    /// removed first, otherwise a non-zero mean is an error.
    PoissonNeumann { auto_project: bool },
    /// `shift·I - alpha·Δ`.
    Helmholtz { shift: T, alpha: T, bc: Bc },
    /// `I - alpha·∇·(coeff ∇)` with Neumann walls; `coeff` is per cell.
    VariableCoeffHelmholtz { alpha: T, coeff: Vec<T> },
}

#[derive(Clone, Debug)]
pub struct LinearSolveSpec<T> {
    pub operator: OperatorKind<T>,
    /// Relative residual target `‖b - Ax‖₂ ≤ tol ‖b‖₂`.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> LinearSolveSpec<T> {
    pub fn new(operator: OperatorKind<T>, tol: T) -> Self {
        Self {
            operator,
            tol,
            max_iter: 20_000,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.tol > T::zero() && self.tol < T::one()) {
            return Err(Error::Config(format!("solver tol must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("solver max_iter must be >= 1".into()));
        }
        if let OperatorKind::VariableCoeffHelmholtz { coeff, .. } = &self.operator {
            if coeff.len() != n {
                return Err(Error::Config("coefficient field has wrong length".into()));
            }
        }
        Ok(())
    }
}

/// Convergence record of one CG call.
#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual `‖r‖₂/‖b‖₂` (0 when `b = 0`).
    pub residual: f64,
    /// Relative residual after every iteration, starting with the initial guess.
    pub history: Vec<f64>,
}

pub(crate) struct CgOptions<T> {
    pub rel_tol: T,
    /// When set, convergence is judged on `‖r‖_∞ ≤ abs_inf_tol` instead.
    pub abs_inf_tol: Option<T>,
    pub max_iter: usize,
    /// Keep residuals orthogonal to constants (singular Neumann problems).
    pub remove_mean: bool,
    /// `‖A‖_∞`, used to place the rounding floor of relative solves.
    pub op_norm: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn inf_norm<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

fn subtract_mean<T: Real>(v: &mut [T]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().copied().sum::<T>() / T::from_usize(v.len()).unwrap();
    for x in v.iter_mut() {
        *x = *x - mean;
    }
}

/// Preconditioned CG. `x` holds the initial guess on entry.
pub(crate) fn pcg<T: Real>(
    apply: impl Fn(&[T], &mut [T]),
    precond: impl Fn(&[T], &mut [T]),
    b: &[T],
    x: &mut [T],
    opts: &CgOptions<T>,
) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut stats = SolveStats::default();
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        stats.history.push(0.0);
        return Ok(stats);
    }
    // relative residuals below 32 ε ‖A‖ ‖x‖ are rounding noise
    let floor = T::of(32.0) * T::epsilon() * opts.op_norm;
    let converged = |r: &[T], rn: T, x: &[T]| match opts.abs_inf_tol {
        Some(tol) => inf_norm(r) <= tol,
        None => rn <= (opts.rel_tol * bnorm).max(floor * dot(x, x).sqrt()),
    };

    let mut r = vec![T::zero(); n];
    let mut ap = vec![T::zero(); n];
    let true_residual = |x: &[T], r: &mut [T], scratch: &mut [T]| {
        apply(x, scratch);
        for i in 0..n {
            r[i] = b[i] - scratch[i];
        }
        if opts.remove_mean {
            subtract_mean(r);
        }
    };
    true_residual(x, &mut r, &mut ap);
    let mut rn = dot(&r, &r).sqrt();
    stats.history.push((rn / bnorm).as_f64());
    if converged(&r, rn, x) {
        stats.residual = (rn / bnorm).as_f64();
        return Ok(stats);
    }
    let mut z = vec![T::zero(); n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let replace_every = 64;
    for it in 1..=opts.max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= T::zero() || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        if opts.remove_mean {
            subtract_mean(&mut r);
        }
        if it % replace_every == 0 {
            true_residual(x, &mut r, &mut ap);
        }
        rn = dot(&r, &r).sqrt();
        stats.iterations = it;
        stats.history.push((rn / bnorm).as_f64());
        if converged(&r, rn, x) {
            // confirm against the true residual before accepting
            true_residual(x, &mut r, &mut ap);
            rn = dot(&r, &r).sqrt();
            if converged(&r, rn, x) {
                stats.residual = (rn / bnorm).as_f64();
                return Ok(stats);
            }
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        if !(rz_new > T::zero()) || !rz_new.is_finite() {
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver {
        iterations: stats.iterations,
        residual: match opts.abs_inf_tol {
            Some(_) => inf_norm(&r).as_f64(),
            None => (rn / bnorm).as_f64(),
        },
    })
}

/// `shift·x - alpha·∇·(coeff ∇x)` (coefficient `None` means 1), with
/// Neumann or Dirichlet ghosts, and its multigrid preconditioner.
fn scalar_system<T: Real>(
    grid: &Grid<T>,
    shift: T,
    alpha: T,
    coeff: Option<&[T]>,
    bc: Bc,
) -> (Csr<T>, Amg<T>) {
    let s = alpha / (grid.h() * grid.h());
    let nbrs = grid.cell_neighbors();
    let a = Csr::from_rows(grid.num_cells(), |k, out| {
        let mut d = shift;
        for &q in &nbrs[k] {
            if q != NO_CELL {
                let w = s * match coeff {
                    Some(c) => T::half() * (c[k] + c[q]),
                    None => T::one(),
                };
                d = d + w;
                out.push((q, -w));
            } else if bc == Bc::DirichletZero {
                d = d + T::two() * s;
            }
        }
        out.push((k, d));
    });
    let keys = grid.cells().iter().map(|&(i, j)| (i, j, 0)).collect();
    let amg = Amg::new(a.clone(), keys);
    (a, amg)
}

fn poisson_system<T: Real>(grid: &Grid<T>) -> &(Csr<T>, Amg<T>) {
    grid.poisson
        .get_or_init(|| scalar_system(grid, T::zero(), T::one(), None, Bc::NeumannZero))
}

/// Solves `A x = rhs` for the operator described by `spec`.
pub fn solve<T: Real>(spec: &LinearSolveSpec<T>, rhs: &ScalarField<T>) -> Result<ScalarField<T>> {
    solve_with_guess(spec, rhs, None).map(|(x, _)| x)
}

/// As [`solve`], starting from `guess` and returning the iteration record.
pub fn solve_with_guess<T: Real>(
    spec: &LinearSolveSpec<T>,
    rhs: &ScalarField<T>,
    guess: Option<&ScalarField<T>>,
) -> Result<(ScalarField<T>, SolveStats)> {
    let grid = rhs.grid().clone();
    spec.validate(grid.num_cells())?;
    if !rhs.is_finite() {
        return Err(Error::State("non-finite right-hand side".into()));
    }
    let mut x = match guess {
        Some(g) => g.values.clone(),
        None => vec![T::zero(); grid.num_cells()],
    };
    let mut b = rhs.values.clone();
    let stats = match &spec.operator {
        OperatorKind::PoissonNeumann { auto_project } => {
            check_compatible(&b, *auto_project)?;
            subtract_mean(&mut b);
            let (a, amg) = poisson_system(&grid);
            let opts = CgOptions {
                rel_tol: spec.tol,
                abs_inf_tol: None,
                max_iter: spec.max_iter,
                remove_mean: true,
                op_norm: a.norm_inf(),
            };
            let s = pcg(
                |v, o| a.apply(v, o),
                |r, z| amg.apply(r, z),
                &b,
                &mut x,
                &opts,
            )?;
            subtract_mean(&mut x);
            s
        }
        OperatorKind::Helmholtz { shift, alpha, bc } => {
            let (a, amg) = scalar_system(&grid, *shift, *alpha, None, *bc);
            let opts = CgOptions {
                rel_tol: spec.tol,
                abs_inf_tol: None,
                max_iter: spec.max_iter,
                remove_mean: false,
                op_norm: a.norm_inf(),
            };
            pcg(
                |v, o| a.apply(v, o),
                |r, z| amg.apply(r, z),
                &b,
                &mut x,
                &opts,
            )?
        }
        OperatorKind::VariableCoeffHelmholtz { alpha, coeff } => {
            let (a, amg) = scalar_system(&grid, T::one(), *alpha, Some(coeff), Bc::NeumannZero);
            let opts = CgOptions {
                rel_tol: spec.tol,
                abs_inf_tol: None,
                max_iter: spec.max_iter,
                remove_mean: false,
                op_norm: a.norm_inf(),
            };
            pcg(
                |v, o| a.apply(v, o),
                |r, z| amg.apply(r, z),
                &b,
                &mut x,
                &opts,
            )?
        }
    };
    Ok((ScalarField::from_values(&grid, x).with_bc(rhs.bc), stats))
}

fn check_compatible<T: Real>(b: &[T], auto_project: bool) -> Result<()> {
    if auto_project {
        return Ok(());
    }
    let sum: T = b.iter().copied().sum();
    let scale: T = b.iter().map(|v| v.abs()).sum();
    if sum.abs() > T::of(1e-10) * scale.max(T::min_positive_value()) {
        let mean = sum / T::from_usize(b.len()).unwrap();
        return Err(Error::Compatibility { mean: mean.as_f64() });
    }
    Ok(())
}

/// Leray projection `w = v - ∇P` with `max |div w| ≤ tol`; `P` has mean zero.
/// The target never drops below the rounding floor `1024 ε max|v| / h`.
pub fn helmholtz_project<T: Real>(
    v: &VectorField<T>,
    tol: T,
) -> Result<(VectorField<T>, ScalarField<T>)> {
    helmholtz_project_from(v, tol, None)
}

/// As [`helmholtz_project`], warm-started from a previous potential.
pub fn helmholtz_project_from<T: Real>(
    v: &VectorField<T>,
    tol: T,
    guess: Option<&ScalarField<T>>,
) -> Result<(VectorField<T>, ScalarField<T>)> {
    if !v.is_finite() {
        return Err(Error::State("non-finite velocity in projection".into()));
    }
    if !(tol > T::zero()) {
        return Err(Error::Config("projection tolerance must be positive".into()));
    }
    let grid = v.grid().clone();
    // Solve -L P = -div v; the CG residual is then -div w.
    let mut b = divergence(v).values;
    b.iter_mut().for_each(|x| *x = -*x);
    subtract_mean(&mut b);
    let mut x = match guess {
        Some(g) => g.values.clone(),
        None => vec![T::zero(); grid.num_cells()],
    };
    let (a, amg) = poisson_system(&grid);
    // below this the residual is rounding noise of the stencil itself
    let floor = T::of(1024.0) * T::epsilon() * v.max_abs() / grid.h();
    let opts = CgOptions {
        rel_tol: T::zero(),
        abs_inf_tol: Some(tol.max(floor)),
        max_iter: 10 * grid.num_cells().max(100),
        remove_mean: true,
        op_norm: a.norm_inf(),
    };
    pcg(
        |v, o| a.apply(v, o),
        |r, z| amg.apply(r, z),
        &b,
        &mut x,
        &opts,
    )?;
    subtract_mean(&mut x);
    let p = ScalarField::from_values(&grid, x);
    let gp = gradient_faces(&p);
    let w = v.axpby(T::one(), &gp, -T::one());
    Ok((w, p))
}

/// `(shift·I - alpha·Δ)` on MAC faces with no-slip walls, as a flat operator
/// over `ux ++ uy`. Boundary rows are the identity.
fn vector_system<T: Real>(grid: &Grid<T>, shift: T, alpha: T) -> (Csr<T>, Amg<T>) {
    let s = alpha / (grid.h() * grid.h());
    let nxf = grid.xfaces().len();
    let mut keys = Vec::with_capacity(nxf + grid.yfaces().len());
    for (tag, faces) in [(0u8, grid.xfaces()), (1, grid.yfaces())] {
        for f in faces {
            keys.push((f.i, f.j, if f.is_boundary() { tag + 2 } else { tag }));
        }
    }
    let a = Csr::from_rows(keys.len(), |k, out| {
        let (face, st, off, local) = if k < nxf {
            (&grid.xfaces()[k], grid.xstencil(), 0, k)
        } else {
            (&grid.yfaces()[k - nxf], grid.ystencil(), nxf, k - nxf)
        };
        if face.is_boundary() {
            out.push((k, T::one()));
            return;
        }
        let mut d = shift + T::of(4.0) * s;
        for nb in st.nbrs[local] {
            match nb {
                Nbr::Link(q) => out.push((q + off, -s)),
                Nbr::Wall => {}
                Nbr::Ghost => d = d + s,
            }
        }
        out.push((k, d));
    });
    let amg = Amg::new(a.clone(), keys);
    (a, amg)
}

/// Solves `(shift·I - alpha·Δ_h) w = rhs` componentwise with no-slip walls.
pub fn vector_helmholtz<T: Real>(
    rhs: &VectorField<T>,
    shift: T,
    alpha: T,
    tol: T,
    guess: Option<&VectorField<T>>,
) -> Result<(VectorField<T>, SolveStats)> {
    let grid: Arc<Grid<T>> = rhs.grid().clone();
    let b = rhs.as_flat();
    let mut x = match guess {
        Some(g) => g.as_flat(),
        None => vec![T::zero(); b.len()],
    };
    let (a, amg) = vector_system(&grid, shift, alpha);
    let opts = CgOptions {
        rel_tol: tol,
        abs_inf_tol: None,
        max_iter: 20 * b.len().max(100),
        remove_mean: false,
        op_norm: a.norm_inf(),
    };
    let stats = pcg(
        |v, o| a.apply(v, o),
        |r, z| amg.apply(r, z),
        &b,
        &mut x,
        &opts,
    )?;
    Ok((VectorField::from_flat(&grid, &x), stats))
}

/// Discrete Yosida smoothing `(I + eps A_h)^{-1} 𝒫 v`, realized as
/// project, Helmholtz solve, project. `eps = 0` returns `𝒫 v`.
pub fn yosida_apply<T: Real>(v: &VectorField<T>, eps: T, tol: T) -> Result<VectorField<T>> {
    yosida_apply_from(v, eps, tol, None)
}

pub fn yosida_apply_from<T: Real>(
    v: &VectorField<T>,
    eps: T,
    tol: T,
    guess: Option<&VectorField<T>>,
) -> Result<VectorField<T>> {
    if eps < T::zero() {
        return Err(Error::Config("Yosida parameter must be >= 0".into()));
    }
    let (pv, _) = helmholtz_project(v, tol)?;
    if eps == T::zero() {
        return Ok(pv);
    }
    let inner_tol = tol.max(T::of(1e-12));
    let (s, _) = vector_helmholtz(&pv, T::one(), eps, inner_tol, guess)?;
    let (w, _) = helmholtz_project(&s, tol)?;
    Ok(w)
}
