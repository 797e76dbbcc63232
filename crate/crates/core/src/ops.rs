//! Second-order finite-volume operators on the masked MAC grid.
//!
//! `gradient_faces` and `divergence` are exact negative adjoints under the
//! face and cell inner products, so `divergence ∘ gradient_faces` is the
//! symmetric Neumann Laplacian used by the pressure solve.

use crate::error::{Error, Result};
use crate::grid::{Bc, Nbr, ScalarField, VectorField};
use crate::model::SensitivityTensor;
use crate::scalar::Real;

/// Reconstruction used for transported cell quantities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AdvectionScheme {
    #[default]
    Upwind,
    /// Second-order upwind with a minmod-limited slope.
    Minmod,
}

impl AdvectionScheme {
    pub fn name(&self) -> &'static str {
        match self {
            AdvectionScheme::Upwind => "upwind",
            AdvectionScheme::Minmod => "minmod",
        }
    }
}

/// 2×2 matrix in row-major order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2<T>(pub [[T; 2]; 2]);

impl<T: Real> Mat2<T> {
    pub fn zero() -> Self {
        Mat2([[T::zero(); 2]; 2])
    }

    pub fn identity() -> Self {
        Mat2([[T::one(), T::zero()], [T::zero(), T::one()]])
    }

    pub fn scale(self, s: T) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2([[s * a, s * b], [s * c, s * d]])
    }

    pub fn apply(&self, v: (T, T)) -> (T, T) {
        let [[a, b], [c, d]] = self.0;
        (a * v.0 + b * v.1, c * v.0 + d * v.1)
    }

    /// Spectral (operator 2-) norm.
    pub fn norm(&self) -> T {
        let [[a, b], [c, d]] = self.0;
        // largest eigenvalue of SᵀS
        let p = a * a + c * c;
        let q = a * b + c * d;
        let r = b * b + d * d;
        let tr = p + r;
        let disc = ((p - r) * (p - r) + T::of(4.0) * q * q).sqrt();
        (T::half() * (tr + disc)).max(T::zero()).sqrt()
    }
}

/// Five-point Laplacian with ghost values set by `f.bc`.
pub fn laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let g = f.grid();
    let inv_h2 = (g.h() * g.h()).recip();
    let xf = g.xfaces();
    let yf = g.yfaces();
    let dirichlet = f.bc == Bc::DirichletZero;
    let mut out = Vec::with_capacity(g.num_cells());
    for (k, faces) in g.cell_faces().iter().enumerate() {
        let fk = f.values[k];
        let mut acc = T::zero();
        for (side, &fi) in faces.iter().enumerate() {
            let face = if side < 2 { &xf[fi] } else { &yf[fi] };
            let nb = if side % 2 == 0 { face.lo } else { face.hi };
            match nb {
                Some(q) => acc = acc + (f.values[q] - fk),
                None if dirichlet => acc = acc - T::two() * fk,
                None => {}
            }
        }
        out.push(acc * inv_h2);
    }
    ScalarField::from_values(g, out).with_bc(f.bc)
}

/// Face-normal differences `(f_hi - f_lo)/h`; zero on boundary faces.
pub fn gradient_faces<T: Real>(f: &ScalarField<T>) -> VectorField<T> {
    let g = f.grid();
    let inv_h = g.h().recip();
    let diff = |faces: &[crate::grid::Face]| -> Vec<T> {
        faces
            .iter()
            .map(|face| match (face.lo, face.hi) {
                (Some(a), Some(b)) => (f.values[b] - f.values[a]) * inv_h,
                _ => T::zero(),
            })
            .collect()
    };
    VectorField::from_faces(g, diff(g.xfaces()), diff(g.yfaces()))
}

/// Cell divergence of a face field.
pub fn divergence<T: Real>(v: &VectorField<T>) -> ScalarField<T> {
    let g = v.grid();
    let inv_h = g.h().recip();
    let out = g
        .cell_faces()
        .iter()
        .map(|f| (v.ux[f[1]] - v.ux[f[0]] + v.uy[f[3]] - v.uy[f[2]]) * inv_h)
        .collect();
    ScalarField::from_values(g, out)
}

/// Cell-centered gradient obtained by averaging the two face differences
/// in each direction (boundary faces contribute zero).
pub fn cell_gradient<T: Real>(f: &ScalarField<T>) -> (Vec<T>, Vec<T>) {
    let gf = gradient_faces(f);
    let faces = f.grid().cell_faces();
    let gx = faces
        .iter()
        .map(|c| T::half() * (gf.ux[c[0]] + gf.ux[c[1]]))
        .collect();
    let gy = faces
        .iter()
        .map(|c| T::half() * (gf.uy[c[2]] + gf.uy[c[3]]))
        .collect();
    (gx, gy)
}

/// Per-cell `|∇f|²` averaged from the four face differences.
pub fn cell_grad_sq<T: Real>(f: &ScalarField<T>) -> Vec<T> {
    let gf = gradient_faces(f);
    f.grid()
        .cell_faces()
        .iter()
        .map(|c| {
            T::half()
                * (gf.ux[c[0]] * gf.ux[c[0]]
                    + gf.ux[c[1]] * gf.ux[c[1]]
                    + gf.uy[c[2]] * gf.uy[c[2]]
                    + gf.uy[c[3]] * gf.uy[c[3]])
        })
        .collect()
}

#[inline]
fn minmod<T: Real>(a: T, b: T) -> T {
    if a * b <= T::zero() {
        T::zero()
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Face value of `f` reconstructed from the upwind side of `vel`.
fn upwind_faces<T: Real>(
    vel: &VectorField<T>,
    f: &ScalarField<T>,
    scheme: AdvectionScheme,
) -> VectorField<T> {
    let g = f.grid();
    let cf = g.cell_faces();
    let xf = g.xfaces();
    let yf = g.yfaces();
    let recon = |vel_n: T, lo: usize, hi: usize, upup: Option<usize>, dndn: Option<usize>| -> T {
        let (up, down, far) = if vel_n > T::zero() {
            (lo, hi, upup)
        } else {
            (hi, lo, dndn)
        };
        let base = f.values[up];
        match (scheme, far) {
            (AdvectionScheme::Minmod, Some(q)) => {
                base + T::half() * minmod(base - f.values[q], f.values[down] - base)
            }
            _ => base,
        }
    };
    let mut fx = vec![T::zero(); xf.len()];
    for (k, face) in xf.iter().enumerate() {
        if let (Some(a), Some(b)) = (face.lo, face.hi) {
            let w = xf[cf[a][0]].lo;
            let e = xf[cf[b][1]].hi;
            fx[k] = vel.ux[k] * recon(vel.ux[k], a, b, w, e);
        }
    }
    let mut fy = vec![T::zero(); yf.len()];
    for (k, face) in yf.iter().enumerate() {
        if let (Some(a), Some(b)) = (face.lo, face.hi) {
            let s = yf[cf[a][2]].lo;
            let n = yf[cf[b][3]].hi;
            fy[k] = vel.uy[k] * recon(vel.uy[k], a, b, s, n);
        }
    }
    VectorField::from_faces(g, fx, fy)
}

/// Conservative transport term `∇·(v f)`. Equals `v·∇f` when `v` is
/// discretely divergence-free.
pub fn advect_upwind<T: Real>(
    v: &VectorField<T>,
    f: &ScalarField<T>,
    scheme: AdvectionScheme,
) -> ScalarField<T> {
    divergence(&upwind_faces(v, f, scheme))
}

/// Face-normal components of the chemotactic drift `S(x, n, c) ∇c`.
///
/// The tangential gradient at a face is the mean of the cell-centered
/// gradients on either side; `n` and `c` at the face are arithmetic means.
/// Boundary faces carry zero drift, which imposes the no-flux condition on
/// the total chemotactic flux.
pub fn chemotactic_velocity<T: Real>(
    n: &ScalarField<T>,
    c: &ScalarField<T>,
    sens: &SensitivityTensor<T>,
) -> VectorField<T> {
    let g = n.grid();
    let h = g.h();
    let inv_h = h.recip();
    let (gx, gy) = cell_gradient(c);
    let dx = g.wall_distance_xfaces();
    let dy = g.wall_distance_yfaces();
    let mut vx = vec![T::zero(); g.xfaces().len()];
    if !sens.is_zero() {
        for (k, face) in g.xfaces().iter().enumerate() {
            if let (Some(a), Some(b)) = (face.lo, face.hi) {
                let grad = (
                    (c.values[b] - c.values[a]) * inv_h,
                    T::half() * (gy[a] + gy[b]),
                );
                let nf = T::half() * (n.values[a] + n.values[b]);
                let cc = T::half() * (c.values[a] + c.values[b]);
                let s = sens.eval_at(g.xface_center(k), dx[k], h, nf, cc);
                vx[k] = s.apply(grad).0;
            }
        }
    }
    let mut vy = vec![T::zero(); g.yfaces().len()];
    if !sens.is_zero() {
        for (k, face) in g.yfaces().iter().enumerate() {
            if let (Some(a), Some(b)) = (face.lo, face.hi) {
                let grad = (
                    T::half() * (gx[a] + gx[b]),
                    (c.values[b] - c.values[a]) * inv_h,
                );
                let nf = T::half() * (n.values[a] + n.values[b]);
                let cc = T::half() * (c.values[a] + c.values[b]);
                let s = sens.eval_at(g.yface_center(k), dy[k], h, nf, cc);
                vy[k] = s.apply(grad).1;
            }
        }
    }
    VectorField::from_faces(g, vx, vy)
}

/// `∇·(n S ∇c)` with `n` upwinded along the drift direction.
pub fn tensor_flux_div<T: Real>(
    n: &ScalarField<T>,
    c: &ScalarField<T>,
    sens: &SensitivityTensor<T>,
) -> ScalarField<T> {
    let drift = chemotactic_velocity(n, c, sens);
    advect_upwind(&drift, n, AdvectionScheme::Upwind)
}

/// `Δ(n + eps)^m` with homogeneous Neumann ghosts.
pub fn porous_rhs<T: Real>(n: &ScalarField<T>, eps: T, m: T) -> Result<ScalarField<T>> {
    let floor = T::of(-1e-12);
    if let Some(v) = n.values.iter().find(|&&v| v < floor || v.is_nan()) {
        return Err(Error::State(format!("negative density {v:e} in porous term")));
    }
    let pow = n.map(|v| {
        let base = (v + eps).max(T::zero());
        if m == T::one() {
            base
        } else {
            base.powf(m)
        }
    });
    Ok(laplacian(&pow.with_bc(Bc::NeumannZero)))
}

/// `∇·(D ∇f)` with face coefficients from the arithmetic mean of `D`.
/// Boundary faces carry zero flux.
pub fn div_coeff_grad<T: Real>(coeff: &[T], f: &[T], grid: &crate::grid::Grid<T>) -> Vec<T> {
    let inv_h2 = (grid.h() * grid.h()).recip();
    let xf = grid.xfaces();
    let yf = grid.yfaces();
    grid.cell_faces()
        .iter()
        .enumerate()
        .map(|(k, faces)| {
            let mut acc = T::zero();
            for (side, &fi) in faces.iter().enumerate() {
                let face = if side < 2 { &xf[fi] } else { &yf[fi] };
                let nb = if side % 2 == 0 { face.lo } else { face.hi };
                if let Some(q) = nb {
                    acc = acc + T::half() * (coeff[k] + coeff[q]) * (f[q] - f[k]);
                }
            }
            acc * inv_h2
        })
        .collect()
}

#[inline]
fn nbr_value<T: Real>(nb: Nbr, u: &[T], own: T) -> T {
    match nb {
        Nbr::Link(q) => u[q],
        Nbr::Wall => T::zero(),
        Nbr::Ghost => -own,
    }
}

fn component_laplacian<T: Real>(
    u: &[T],
    faces: &[crate::grid::Face],
    stencil: &crate::grid::FaceStencil,
    inv_h2: T,
) -> Vec<T> {
    let four = T::of(4.0);
    faces
        .iter()
        .enumerate()
        .map(|(k, face)| {
            if face.is_boundary() {
                return T::zero();
            }
            let own = u[k];
            let s: T = stencil.nbrs[k]
                .iter()
                .map(|&nb| nbr_value(nb, u, own))
                .sum();
            (s - four * own) * inv_h2
        })
        .collect()
}

/// Componentwise Laplacian of a MAC field under no-slip walls.
pub fn vector_laplacian<T: Real>(u: &VectorField<T>) -> VectorField<T> {
    let g = u.grid();
    let inv_h2 = (g.h() * g.h()).recip();
    VectorField::from_faces(
        g,
        component_laplacian(&u.ux, g.xfaces(), g.xstencil(), inv_h2),
        component_laplacian(&u.uy, g.yfaces(), g.ystencil(), inv_h2),
    )
}

/// First-order upwind `(a·∇)u` on the MAC faces.
pub fn advect_vector<T: Real>(a: &VectorField<T>, u: &VectorField<T>) -> VectorField<T> {
    let g = u.grid();
    let inv_h = g.h().recip();
    let quarter = T::of(0.25);
    let one_comp = |own_u: &[T],
                    own_a: &[T],
                    other_a: &[T],
                    faces: &[crate::grid::Face],
                    st: &crate::grid::FaceStencil,
                    along_x: bool|
     -> Vec<T> {
        faces
            .iter()
            .enumerate()
            .map(|(k, face)| {
                if face.is_boundary() {
                    return T::zero();
                }
                let uk = own_u[k];
                let cr = st.cross[k];
                let transverse = quarter
                    * (other_a[cr[0]] + other_a[cr[1]] + other_a[cr[2]] + other_a[cr[3]]);
                let (ax, ay) = if along_x {
                    (own_a[k], transverse)
                } else {
                    (transverse, own_a[k])
                };
                let [w, e, s, n] = st.nbrs[k];
                let ddx = if ax > T::zero() {
                    uk - nbr_value(w, own_u, uk)
                } else {
                    nbr_value(e, own_u, uk) - uk
                };
                let ddy = if ay > T::zero() {
                    uk - nbr_value(s, own_u, uk)
                } else {
                    nbr_value(n, own_u, uk) - uk
                };
                (ax * ddx + ay * ddy) * inv_h
            })
            .collect()
    };
    let ox = one_comp(&u.ux, &a.ux, &a.uy, g.xfaces(), g.xstencil(), true);
    let oy = one_comp(&u.uy, &a.uy, &a.ux, g.yfaces(), g.ystencil(), false);
    VectorField::from_faces(g, ox, oy)
}

/// `-⟨u, Δ_h u⟩`, the discrete Dirichlet energy `∫|∇u|²`.
pub fn enstrophy<T: Real>(u: &VectorField<T>) -> T {
    -crate::grid::face_dot(u, &vector_laplacian(u))
}
