//! Uniform masked grid, cell-centered scalar fields and MAC-staggered
//! velocity fields.
//!
//! Cells are indexed `(i, j)` with `i` along x and `j` along y; `j` grows
//! upward. Only active cells carry values. An x-face `(i, j)` sits between
//! cells `(i-1, j)` and `(i, j)`, a y-face `(i, j)` between `(i, j-1)` and
//! `(i, j)`. A face is stored when at least one neighbouring cell is
//! active; it is a boundary face when exactly one is.

use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::scalar::Real;

const NONE: usize = usize::MAX;

/// Sentinel in [`Grid::cell_neighbors`] for a missing neighbour.
pub const NO_CELL: usize = NONE;

#[derive(Clone, Debug, PartialEq)]
pub enum MaskKind {
    Full,
    /// Removes the upper-right quadrant (`i >= nx/2` and `j >= ny/2`).
    LShape,
    /// Row-major activity flags, `nx * ny` entries, `j` outer.
    Custom(Vec<bool>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bc {
    NeumannZero,
    DirichletZero,
}

/// A stored face and the active cells on either side.
#[derive(Clone, Copy, Debug)]
pub struct Face {
    pub i: usize,
    pub j: usize,
    /// Cell on the low side (west for x-faces, south for y-faces).
    pub lo: Option<usize>,
    pub hi: Option<usize>,
}

impl Face {
    #[inline]
    pub fn is_boundary(&self) -> bool {
        self.lo.is_none() || self.hi.is_none()
    }
}

/// Neighbour of a velocity degree of freedom in the vector stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nbr {
    /// Another interior face of the same component.
    Link(usize),
    /// A boundary face one spacing away, value pinned to zero.
    Wall,
    /// No face: the wall lies half a spacing away, mirrored ghost `-u`.
    Ghost,
}

/// Per-face stencil data for one velocity component.
#[derive(Clone, Debug)]
pub struct FaceStencil {
    /// `[west, east, south, north]` neighbours; only meaningful on interior faces.
    pub nbrs: Vec<[Nbr; 4]>,
    /// The four faces of the other component surrounding this face, used to
    /// interpolate the transverse velocity.
    pub cross: Vec<[usize; 4]>,
}

#[derive(Debug)]
pub struct Grid<T> {
    lx: T,
    ly: T,
    nx: usize,
    ny: usize,
    h: T,
    mask: Vec<bool>,
    cells: Vec<(usize, usize)>,
    cell_of: Vec<usize>,
    xfaces: Vec<Face>,
    yfaces: Vec<Face>,
    xface_of: Vec<usize>,
    yface_of: Vec<usize>,
    /// `[west, east, south, north]`: west/east index x-faces, south/north y-faces.
    cell_faces: Vec<[usize; 4]>,
    cell_nbrs: Vec<[usize; 4]>,
    xstencil: FaceStencil,
    ystencil: FaceStencil,
    wall: OnceLock<WallDistance<T>>,
    pub(crate) poisson: OnceLock<(crate::amg::Csr<T>, crate::amg::Amg<T>)>,
}

#[derive(Debug)]
struct WallDistance<T> {
    cells: Vec<T>,
    xfaces: Vec<T>,
    yfaces: Vec<T>,
}

impl<T: Real> Grid<T> {
    /// Builds a grid. Spacing must be isotropic and the mask non-empty and
    /// edge-connected.
    pub fn new(lx: T, ly: T, nx: usize, ny: usize, mask_kind: MaskKind) -> Result<Arc<Self>> {
        if nx < 2 || ny < 2 {
            return Err(Error::Config(format!("grid needs nx, ny >= 2 (got {nx} x {ny})")));
        }
        if !(lx > T::zero() && ly > T::zero()) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::Config("domain lengths must be positive and finite".into()));
        }
        let hx = lx / T::from_usize(nx).unwrap();
        let hy = ly / T::from_usize(ny).unwrap();
        if ((hx - hy).abs() / hx.max(hy)).as_f64() > 1e-12 {
            return Err(Error::Config(format!(
                "anisotropic spacing: Lx/nx = {hx}, Ly/ny = {hy}"
            )));
        }
        let mask = match mask_kind {
            MaskKind::Full => vec![true; nx * ny],
            MaskKind::LShape => (0..ny)
                .flat_map(|j| (0..nx).map(move |i| !(i >= nx / 2 && j >= ny / 2)))
                .collect(),
            MaskKind::Custom(m) => {
                if m.len() != nx * ny {
                    return Err(Error::Config(format!(
                        "custom mask has {} entries, expected {}",
                        m.len(),
                        nx * ny
                    )));
                }
                m
            }
        };
        check_connected(&mask, nx, ny)?;
        Ok(Arc::new(Self::assemble(lx, ly, nx, ny, hx, mask)))
    }

    fn assemble(lx: T, ly: T, nx: usize, ny: usize, h: T, mask: Vec<bool>) -> Self {
        let mut cells = Vec::new();
        let mut cell_of = vec![NONE; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                if mask[j * nx + i] {
                    cell_of[j * nx + i] = cells.len();
                    cells.push((i, j));
                }
            }
        }
        let cell_at = |i: isize, j: isize| -> Option<usize> {
            if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                return None;
            }
            let k = cell_of[j as usize * nx + i as usize];
            (k != NONE).then_some(k)
        };

        let mut xfaces = Vec::new();
        let mut xface_of = vec![NONE; (nx + 1) * ny];
        for j in 0..ny {
            for i in 0..=nx {
                let lo = cell_at(i as isize - 1, j as isize);
                let hi = cell_at(i as isize, j as isize);
                if lo.is_some() || hi.is_some() {
                    xface_of[j * (nx + 1) + i] = xfaces.len();
                    xfaces.push(Face { i, j, lo, hi });
                }
            }
        }
        let mut yfaces = Vec::new();
        let mut yface_of = vec![NONE; nx * (ny + 1)];
        for j in 0..=ny {
            for i in 0..nx {
                let lo = cell_at(i as isize, j as isize - 1);
                let hi = cell_at(i as isize, j as isize);
                if lo.is_some() || hi.is_some() {
                    yface_of[j * nx + i] = yfaces.len();
                    yfaces.push(Face { i, j, lo, hi });
                }
            }
        }
        let cell_faces = cells
            .iter()
            .map(|&(i, j)| {
                [
                    xface_of[j * (nx + 1) + i],
                    xface_of[j * (nx + 1) + i + 1],
                    yface_of[j * nx + i],
                    yface_of[(j + 1) * nx + i],
                ]
            })
            .collect::<Vec<_>>();

        let xget = |i: isize, j: isize| -> Option<usize> {
            if i < 0 || j < 0 || i > nx as isize || j >= ny as isize {
                return None;
            }
            let k = xface_of[j as usize * (nx + 1) + i as usize];
            (k != NONE).then_some(k)
        };
        let yget = |i: isize, j: isize| -> Option<usize> {
            if i < 0 || j < 0 || i >= nx as isize || j > ny as isize {
                return None;
            }
            let k = yface_of[j as usize * nx + i as usize];
            (k != NONE).then_some(k)
        };
        let classify = |k: Option<usize>, faces: &[Face]| match k {
            Some(k) if faces[k].is_boundary() => Nbr::Wall,
            Some(k) => Nbr::Link(k),
            None => Nbr::Ghost,
        };

        let mut xstencil = FaceStencil {
            nbrs: Vec::with_capacity(xfaces.len()),
            cross: Vec::with_capacity(xfaces.len()),
        };
        for f in &xfaces {
            let (i, j) = (f.i as isize, f.j as isize);
            xstencil.nbrs.push([
                classify(xget(i - 1, j), &xfaces),
                classify(xget(i + 1, j), &xfaces),
                classify(xget(i, j - 1), &xfaces),
                classify(xget(i, j + 1), &xfaces),
            ]);
            xstencil.cross.push(match (f.lo, f.hi) {
                (Some(a), Some(b)) => [
                    cell_faces[a][2],
                    cell_faces[a][3],
                    cell_faces[b][2],
                    cell_faces[b][3],
                ],
                _ => [NONE; 4],
            });
        }
        let mut ystencil = FaceStencil {
            nbrs: Vec::with_capacity(yfaces.len()),
            cross: Vec::with_capacity(yfaces.len()),
        };
        for f in &yfaces {
            let (i, j) = (f.i as isize, f.j as isize);
            ystencil.nbrs.push([
                classify(yget(i - 1, j), &yfaces),
                classify(yget(i + 1, j), &yfaces),
                classify(yget(i, j - 1), &yfaces),
                classify(yget(i, j + 1), &yfaces),
            ]);
            ystencil.cross.push(match (f.lo, f.hi) {
                (Some(a), Some(b)) => [
                    cell_faces[a][0],
                    cell_faces[a][1],
                    cell_faces[b][0],
                    cell_faces[b][1],
                ],
                _ => [NONE; 4],
            });
        }

        let cell_nbrs = cell_faces
            .iter()
            .map(|f| {
                [
                    xfaces[f[0]].lo.unwrap_or(NONE),
                    xfaces[f[1]].hi.unwrap_or(NONE),
                    yfaces[f[2]].lo.unwrap_or(NONE),
                    yfaces[f[3]].hi.unwrap_or(NONE),
                ]
            })
            .collect();

        Self {
            lx,
            ly,
            nx,
            ny,
            h,
            mask,
            cells,
            cell_of,
            xfaces,
            yfaces,
            xface_of,
            yface_of,
            cell_faces,
            cell_nbrs,
            xstencil,
            ystencil,
            wall: OnceLock::new(),
            poisson: OnceLock::new(),
        }
    }

    pub fn lx(&self) -> T {
        self.lx
    }
    pub fn ly(&self) -> T {
        self.ly
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn h(&self) -> T {
        self.h
    }
    pub fn cell_area(&self) -> T {
        self.h * self.h
    }
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }
    pub fn xfaces(&self) -> &[Face] {
        &self.xfaces
    }
    pub fn yfaces(&self) -> &[Face] {
        &self.yfaces
    }
    pub fn cell_faces(&self) -> &[[usize; 4]] {
        &self.cell_faces
    }
    /// `[west, east, south, north]` active neighbours, [`NO_CELL`] where absent.
    pub fn cell_neighbors(&self) -> &[[usize; 4]] {
        &self.cell_nbrs
    }
    pub fn xstencil(&self) -> &FaceStencil {
        &self.xstencil
    }
    pub fn ystencil(&self) -> &FaceStencil {
        &self.ystencil
    }

    /// Active index of cell `(i, j)`, if it is active.
    pub fn cell_index(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.nx || j >= self.ny {
            return None;
        }
        let k = self.cell_of[j * self.nx + i];
        (k != NONE).then_some(k)
    }

    pub fn xface_index(&self, i: usize, j: usize) -> Option<usize> {
        if i > self.nx || j >= self.ny {
            return None;
        }
        let k = self.xface_of[j * (self.nx + 1) + i];
        (k != NONE).then_some(k)
    }

    pub fn yface_index(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.nx || j > self.ny {
            return None;
        }
        let k = self.yface_of[j * self.nx + i];
        (k != NONE).then_some(k)
    }

    pub fn cell_center(&self, k: usize) -> (T, T) {
        let (i, j) = self.cells[k];
        (
            (T::from_usize(i).unwrap() + T::half()) * self.h,
            (T::from_usize(j).unwrap() + T::half()) * self.h,
        )
    }

    pub fn xface_center(&self, k: usize) -> (T, T) {
        let f = &self.xfaces[k];
        (
            T::from_usize(f.i).unwrap() * self.h,
            (T::from_usize(f.j).unwrap() + T::half()) * self.h,
        )
    }

    pub fn yface_center(&self, k: usize) -> (T, T) {
        let f = &self.yfaces[k];
        (
            (T::from_usize(f.i).unwrap() + T::half()) * self.h,
            T::from_usize(f.j).unwrap() * self.h,
        )
    }

    /// Area of the active region.
    pub fn area(&self) -> T {
        T::from_usize(self.cells.len()).unwrap() * self.cell_area()
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = (Axis, usize)> + '_ {
        let xs = self
            .xfaces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_boundary())
            .map(|(k, _)| (Axis::X, k));
        let ys = self
            .yfaces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_boundary())
            .map(|(k, _)| (Axis::Y, k));
        xs.chain(ys)
    }

    /// Euclidean distance from `(x, y)` to the staircase boundary.
    pub fn distance_to_boundary(&self, x: T, y: T) -> T {
        let h = self.h;
        let mut best = T::infinity();
        for (axis, k) in self.boundary_faces() {
            let (a0, a1, b0, b1) = match axis {
                Axis::X => {
                    let f = &self.xfaces[k];
                    let fx = T::from_usize(f.i).unwrap() * h;
                    let fy = T::from_usize(f.j).unwrap() * h;
                    (fx, fx, fy, fy + h)
                }
                Axis::Y => {
                    let f = &self.yfaces[k];
                    let fx = T::from_usize(f.i).unwrap() * h;
                    let fy = T::from_usize(f.j).unwrap() * h;
                    (fx, fx + h, fy, fy)
                }
            };
            let dx = if x < a0 { a0 - x } else if x > a1 { x - a1 } else { T::zero() };
            let dy = if y < b0 { b0 - y } else if y > b1 { y - b1 } else { T::zero() };
            best = best.min((dx * dx + dy * dy).sqrt());
        }
        best
    }

    fn wall(&self) -> &WallDistance<T> {
        self.wall.get_or_init(|| WallDistance {
            cells: (0..self.cells.len())
                .map(|k| {
                    let (x, y) = self.cell_center(k);
                    self.distance_to_boundary(x, y)
                })
                .collect(),
            xfaces: (0..self.xfaces.len())
                .map(|k| {
                    let (x, y) = self.xface_center(k);
                    self.distance_to_boundary(x, y)
                })
                .collect(),
            yfaces: (0..self.yfaces.len())
                .map(|k| {
                    let (x, y) = self.yface_center(k);
                    self.distance_to_boundary(x, y)
                })
                .collect(),
        })
    }

    pub fn wall_distance_cells(&self) -> &[T] {
        &self.wall().cells
    }
    pub fn wall_distance_xfaces(&self) -> &[T] {
        &self.wall().xfaces
    }
    pub fn wall_distance_yfaces(&self) -> &[T] {
        &self.wall().yfaces
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

fn check_connected(mask: &[bool], nx: usize, ny: usize) -> Result<()> {
    let Some(start) = mask.iter().position(|&a| a) else {
        return Err(Error::Config("mask has no active cells".into()));
    };
    let mut seen = vec![false; mask.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut count = 1;
    while let Some(k) = queue.pop_front() {
        let (i, j) = (k % nx, k / nx);
        let mut visit = |q: usize| {
            if mask[q] && !seen[q] {
                seen[q] = true;
                count += 1;
                queue.push_back(q);
            }
        };
        if i > 0 {
            visit(k - 1);
        }
        if i + 1 < nx {
            visit(k + 1);
        }
        if j > 0 {
            visit(k - nx);
        }
        if j + 1 < ny {
            visit(k + nx);
        }
    }
    let total = mask.iter().filter(|&&a| a).count();
    if count != total {
        return Err(Error::Config(format!(
            "mask is not edge-connected ({count} of {total} cells reachable)"
        )));
    }
    Ok(())
}

/// Cell-centered field, one value per active cell.
#[derive(Clone, Debug)]
pub struct ScalarField<T> {
    grid: Arc<Grid<T>>,
    pub values: Vec<T>,
    pub bc: Bc,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: &Arc<Grid<T>>, value: T) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![value; grid.num_cells()],
            bc: Bc::NeumannZero,
        }
    }

    pub fn from_values(grid: &Arc<Grid<T>>, values: Vec<T>) -> Self {
        assert_eq!(values.len(), grid.num_cells(), "one value per active cell");
        Self {
            grid: grid.clone(),
            values,
            bc: Bc::NeumannZero,
        }
    }

    /// Samples `f(x, y)` at active cell centers.
    pub fn from_fn(grid: &Arc<Grid<T>>, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..grid.num_cells())
            .map(|k| {
                let (x, y) = grid.cell_center(k);
                f(x, y)
            })
            .collect();
        Self::from_values(grid, values)
    }

    /// Gathers active entries from a dense row-major `nx * ny` array.
    /// Inactive entries are never read.
    pub fn from_dense(grid: &Arc<Grid<T>>, dense: &[T]) -> Self {
        assert_eq!(dense.len(), grid.nx() * grid.ny());
        let values = grid
            .cells()
            .iter()
            .map(|&(i, j)| dense[j * grid.nx() + i])
            .collect();
        Self::from_values(grid, values)
    }

    pub fn with_bc(mut self, bc: Bc) -> Self {
        self.bc = bc;
        self
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            bc: self.bc,
        }
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: T, other: &Self, b: T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
            bc: self.bc,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    /// Midpoint quadrature `h² Σ f`.
    pub fn integrate(&self) -> T {
        integrate(self)
    }

    pub fn lp_norm(&self, p: T) -> Result<T> {
        lp_norm(self, p)
    }
}

/// Midpoint-rule integral over the active region.
pub fn integrate<T: Real>(f: &ScalarField<T>) -> T {
    f.grid.cell_area() * f.values.iter().copied().sum::<T>()
}

/// Discrete `L^p` norm; `p = +inf` gives the max norm.
pub fn lp_norm<T: Real>(f: &ScalarField<T>, p: T) -> Result<T> {
    if p.is_nan() || p < T::one() {
        return Err(Error::Config(format!("L^p norm needs p >= 1 (got {p})")));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    if p == T::one() {
        return Ok(f.grid.cell_area() * f.values.iter().map(|v| v.abs()).sum::<T>());
    }
    if p == T::two() {
        let s: T = f.values.iter().map(|&v| v * v).sum();
        return Ok((f.grid.cell_area() * s).sqrt());
    }
    let s: T = f.values.iter().map(|v| v.abs().powf(p)).sum();
    Ok((f.grid.cell_area() * s).powf(p.recip()))
}

/// `h² Σ f g` over active cells.
pub fn cell_dot<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>) -> T {
    f.grid.cell_area()
        * f.values
            .iter()
            .zip(&g.values)
            .map(|(&a, &b)| a * b)
            .sum::<T>()
}

/// MAC velocity field: one value per stored x-face and y-face.
///
/// Boundary faces always hold exactly zero (no-slip normal component).
#[derive(Clone, Debug)]
pub struct VectorField<T> {
    grid: Arc<Grid<T>>,
    pub ux: Vec<T>,
    pub uy: Vec<T>,
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Self {
            grid: grid.clone(),
            ux: vec![T::zero(); grid.xfaces().len()],
            uy: vec![T::zero(); grid.yfaces().len()],
        }
    }

    /// Builds from raw face arrays; boundary entries are forced to zero.
    pub fn from_faces(grid: &Arc<Grid<T>>, ux: Vec<T>, uy: Vec<T>) -> Self {
        assert_eq!(ux.len(), grid.xfaces().len());
        assert_eq!(uy.len(), grid.yfaces().len());
        let mut v = Self {
            grid: grid.clone(),
            ux,
            uy,
        };
        v.enforce_no_slip();
        v
    }

    /// Samples the normal component of `(fx, fy)` at face centers.
    pub fn from_fn(grid: &Arc<Grid<T>>, fx: impl Fn(T, T) -> T, fy: impl Fn(T, T) -> T) -> Self {
        let ux = (0..grid.xfaces().len())
            .map(|k| {
                let (x, y) = grid.xface_center(k);
                fx(x, y)
            })
            .collect();
        let uy = (0..grid.yfaces().len())
            .map(|k| {
                let (x, y) = grid.yface_center(k);
                fy(x, y)
            })
            .collect();
        Self::from_faces(grid, ux, uy)
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn enforce_no_slip(&mut self) {
        for (v, f) in self.ux.iter_mut().zip(self.grid.xfaces()) {
            if f.is_boundary() {
                *v = T::zero();
            }
        }
        for (v, f) in self.uy.iter_mut().zip(self.grid.yfaces()) {
            if f.is_boundary() {
                *v = T::zero();
            }
        }
    }

    pub fn axpby(&self, a: T, other: &Self, b: T) -> Self {
        Self {
            grid: self.grid.clone(),
            ux: self.ux.iter().zip(&other.ux).map(|(&x, &y)| a * x + b * y).collect(),
            uy: self.uy.iter().zip(&other.uy).map(|(&x, &y)| a * x + b * y).collect(),
        }
    }

    pub fn scale(&self, a: T) -> Self {
        Self {
            grid: self.grid.clone(),
            ux: self.ux.iter().map(|&x| a * x).collect(),
            uy: self.uy.iter().map(|&x| a * x).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.ux.iter().chain(&self.uy).all(|v| v.is_finite())
    }

    /// Largest face-normal component magnitude.
    pub fn max_abs(&self) -> T {
        self.ux
            .iter()
            .chain(&self.uy)
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Discrete `L²` norm with the face inner product.
    pub fn l2_norm(&self) -> T {
        face_dot(self, self).sqrt()
    }

    /// Cell-centered velocity obtained by averaging opposite faces.
    pub fn cell_centered(&self) -> (ScalarField<T>, ScalarField<T>) {
        let g = &self.grid;
        let mut cx = Vec::with_capacity(g.num_cells());
        let mut cy = Vec::with_capacity(g.num_cells());
        for f in g.cell_faces() {
            cx.push(T::half() * (self.ux[f[0]] + self.ux[f[1]]));
            cy.push(T::half() * (self.uy[f[2]] + self.uy[f[3]]));
        }
        (ScalarField::from_values(g, cx), ScalarField::from_values(g, cy))
    }

    pub(crate) fn as_flat(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.ux.len() + self.uy.len());
        v.extend_from_slice(&self.ux);
        v.extend_from_slice(&self.uy);
        v
    }

    pub(crate) fn from_flat(grid: &Arc<Grid<T>>, flat: &[T]) -> Self {
        let nxf = grid.xfaces().len();
        Self::from_faces(grid, flat[..nxf].to_vec(), flat[nxf..].to_vec())
    }
}

/// `h² Σ_faces u·v`.
pub fn face_dot<T: Real>(u: &VectorField<T>, v: &VectorField<T>) -> T {
    let sx: T = u.ux.iter().zip(&v.ux).map(|(&a, &b)| a * b).sum();
    let sy: T = u.uy.iter().zip(&v.uy).map(|(&a, &b)| a * b).sum();
    u.grid.cell_area() * (sx + sy)
}
