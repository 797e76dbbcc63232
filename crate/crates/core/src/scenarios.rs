//! Named initial-value problems and the builder that materializes them.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Grid, MaskKind, ScalarField, VectorField};
use crate::model::{ModelParams, Potential, SensitivityKind, SensitivityTensor};
use crate::ops::AdvectionScheme;
use crate::scalar::Real;
use crate::solver::{helmholtz_project, DEFAULT_PROJECTION_TOL};
use crate::stepper::SimState;

pub const PRESETS: [&str; 7] = [
    "homogeneous",
    "gaussian_bump",
    "two_bumps",
    "aggregation_m1",
    "bounded_m15",
    "rotational_flux",
    "nonconvex_L",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskSpec {
    Full,
    LShape,
}

impl MaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MaskSpec::Full => "full",
            MaskSpec::LShape => "l_shape",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SensitivitySpec {
    Identity,
    Rotation { theta: f64 },
    Saturating { n_half: f64 },
}

impl SensitivitySpec {
    pub fn name(&self) -> &'static str {
        match self {
            SensitivitySpec::Identity => "identity",
            SensitivitySpec::Rotation { .. } => "rotation",
            SensitivitySpec::Saturating { .. } => "saturating",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CutoffSpec {
    Off,
    /// Threshold `1/ε`.
    InverseEps,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityKind {
    Constant,
    Gaussian,
    TwoBumps,
}

impl DensityKind {
    pub fn name(&self) -> &'static str {
        match self {
            DensityKind::Constant => "constant",
            DensityKind::Gaussian => "gaussian",
            DensityKind::TwoBumps => "two_bumps",
        }
    }
}

/// Fully resolved description of a run's domain, coefficients and data.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub mask: MaskSpec,

    pub m: f64,
    pub kappa: f64,
    pub cs: f64,
    pub eps: f64,
    pub yosida_eps: Option<f64>,
    pub sensitivity: SensitivitySpec,
    pub chi: f64,
    pub boundary_cutoff_cells: f64,
    pub magnitude_cutoff: CutoffSpec,
    pub gravity: (f64, f64),
    pub advection: AdvectionScheme,

    pub density: DensityKind,
    /// Constant density level (`DensityKind::Constant`).
    pub n_bar: f64,
    /// Total cell mass of the bump profiles.
    pub mass: f64,
    pub sigma: f64,
    pub center: (f64, f64),
    pub center2: (f64, f64),
    /// Relative amplitude of the seeded multiplicative perturbation.
    pub noise: f64,
    /// Constant initial chemoattractant level.
    pub c_bar: f64,
    /// Amplitude of the initial vortex.
    pub u0_amplitude: f64,

    pub t_final: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Preset `name` with default resolution.
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self {
            name: name.to_string(),
            lx: 1.0,
            ly: 1.0,
            nx: 64,
            ny: 64,
            mask: MaskSpec::Full,
            m: 1.5,
            kappa: 1.0,
            cs: 1.0,
            eps: 0.01,
            yosida_eps: None,
            sensitivity: SensitivitySpec::Identity,
            chi: 1.0,
            boundary_cutoff_cells: 2.0,
            magnitude_cutoff: CutoffSpec::Off,
            gravity: (0.0, -1.0),
            advection: AdvectionScheme::Upwind,
            density: DensityKind::Gaussian,
            n_bar: 1.0,
            mass: 50.0,
            sigma: 0.05,
            center: (0.5, 0.5),
            center2: (0.7, 0.65),
            noise: 0.0,
            c_bar: 25.0,
            u0_amplitude: 0.1,
            t_final: 1.0,
            seed: 1,
        };
        let spec = match name {
            "homogeneous" => Self {
                density: DensityKind::Constant,
                c_bar: 1.0,
                u0_amplitude: 0.0,
                ..base
            },
            "gaussian_bump" => base,
            "two_bumps" => Self {
                density: DensityKind::TwoBumps,
                center: (0.3, 0.35),
                noise: 0.05,
                ..base
            },
            "aggregation_m1" => Self {
                m: 1.0,
                center: (0.35, 0.45),
                ..base
            },
            "bounded_m15" => Self {
                center: (0.35, 0.45),
                ..base
            },
            "rotational_flux" => Self {
                sensitivity: SensitivitySpec::Rotation { theta: FRAC_PI_2 },
                center: (0.35, 0.45),
                ..base
            },
            "nonconvex_L" => Self {
                mask: MaskSpec::LShape,
                center: (0.3, 0.3),
                c_bar: 0.5 * 50.0 / 0.75,
                ..base
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown scenario '{other}' (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(spec)
    }

    pub fn mask_kind(&self) -> MaskKind {
        match self.mask {
            MaskSpec::Full => MaskKind::Full,
            MaskSpec::LShape => MaskKind::LShape,
        }
    }

    pub fn model_params<T: Real>(&self) -> ModelParams<T> {
        let kind = match self.sensitivity {
            SensitivitySpec::Identity => SensitivityKind::ScalarIdentity { chi: T::of(self.chi) },
            SensitivitySpec::Rotation { theta } => SensitivityKind::Rotation {
                chi: T::of(self.chi),
                theta: T::of(theta),
            },
            SensitivitySpec::Saturating { n_half } => SensitivityKind::Saturating {
                chi: T::of(self.chi),
                n_half: T::of(n_half),
            },
        };
        let magnitude_cutoff = match self.magnitude_cutoff {
            CutoffSpec::Off => None,
            CutoffSpec::InverseEps if self.eps > 0.0 => Some(T::of(1.0 / self.eps)),
            CutoffSpec::InverseEps => None,
            CutoffSpec::Fixed(v) => Some(T::of(v)),
        };
        ModelParams {
            m: T::of(self.m),
            kappa: T::of(self.kappa),
            cs: T::of(self.cs),
            eps: T::of(self.eps),
            sensitivity: SensitivityTensor {
                kind,
                boundary_cutoff_cells: T::of(self.boundary_cutoff_cells),
                magnitude_cutoff,
            },
            phi: Potential::LinearGravity {
                g: (T::of(self.gravity.0), T::of(self.gravity.1)),
            },
            yosida_eps: self.yosida_eps.map(T::of),
            advection: self.advection,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be > 0 (got {v})")))
            }
        };
        pos("grid.lx", self.lx)?;
        pos("grid.ly", self.ly)?;
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("time.T must be >= 0 (got {})", self.t_final)));
        }
        match self.density {
            DensityKind::Constant if !(self.n_bar >= 0.0) => {
                return Err(Error::Config("scenario.n_bar must be >= 0".into()))
            }
            DensityKind::Gaussian | DensityKind::TwoBumps => {
                if !(self.mass >= 0.0) {
                    return Err(Error::Config("scenario.mass must be >= 0".into()));
                }
                pos("scenario.sigma", self.sigma)?;
            }
            _ => {}
        }
        if !(self.noise >= 0.0 && self.noise < 1.0) {
            return Err(Error::Config("scenario.noise must lie in [0, 1)".into()));
        }
        if !(self.c_bar >= 0.0) {
            return Err(Error::Config("scenario.c_bar must be >= 0".into()));
        }
        self.model_params::<f64>().validate()
    }
}

/// A materialized initial-value problem.
#[derive(Clone, Debug)]
pub struct Scenario<T: Real> {
    pub spec: ScenarioSpec,
    pub grid: Arc<Grid<T>>,
    pub params: ModelParams<T>,
    pub initial: SimState<T>,
    pub t_final: T,
}

/// `M/(2πσ²) exp(−|x−x₀|²/(2σ²))`.
pub fn gaussian(mass: f64, sigma: f64, center: (f64, f64), x: f64, y: f64) -> f64 {
    let r2 = (x - center.0).powi(2) + (y - center.1).powi(2);
    mass / (2.0 * PI * sigma * sigma) * (-r2 / (2.0 * sigma * sigma)).exp()
}

/// Preset by name.
pub fn build<T: Real>(name: &str) -> Result<Scenario<T>> {
    build_spec(&ScenarioSpec::preset(name)?)
}

pub fn build_spec<T: Real>(spec: &ScenarioSpec) -> Result<Scenario<T>> {
    spec.validate()?;
    let grid = Grid::new(T::of(spec.lx), T::of(spec.ly), spec.nx, spec.ny, spec.mask_kind())?;
    let params = spec.model_params::<T>();

    let mut n0: Vec<f64> = (0..grid.num_cells())
        .map(|k| {
            let (x, y) = grid.cell_center(k);
            let (x, y) = (x.as_f64(), y.as_f64());
            match spec.density {
                DensityKind::Constant => spec.n_bar,
                DensityKind::Gaussian => gaussian(spec.mass, spec.sigma, spec.center, x, y),
                DensityKind::TwoBumps => {
                    gaussian(0.5 * spec.mass, spec.sigma, spec.center, x, y)
                        + gaussian(0.5 * spec.mass, spec.sigma, spec.center2, x, y)
                }
            }
        })
        .collect();
    if spec.noise > 0.0 {
        let before: f64 = n0.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for v in n0.iter_mut() {
            *v *= 1.0 + spec.noise * rng.gen_range(-1.0..1.0);
        }
        let after: f64 = n0.iter().sum();
        if after > 0.0 {
            n0.iter_mut().for_each(|v| *v *= before / after);
        }
    }
    let n = ScalarField::from_values(&grid, n0.into_iter().map(T::of).collect());
    let c = ScalarField::constant(&grid, T::of(spec.c_bar));

    let u = if spec.u0_amplitude != 0.0 {
        // curl of ψ = A sin²(πx/Lx) sin²(πy/Ly)
        let (a, lx, ly) = (spec.u0_amplitude, spec.lx, spec.ly);
        let (kx, ky) = (PI / lx, PI / ly);
        let raw = VectorField::from_fn(
            &grid,
            |x, y| {
                let (x, y) = (x.as_f64(), y.as_f64());
                T::of(a * (kx * x).sin().powi(2) * ky * (2.0 * ky * y).sin())
            },
            |x, y| {
                let (x, y) = (x.as_f64(), y.as_f64());
                T::of(-a * kx * (2.0 * kx * x).sin() * (ky * y).sin().powi(2))
            },
        );
        helmholtz_project(&raw, T::of(DEFAULT_PROJECTION_TOL))?.0
    } else {
        VectorField::zeros(&grid)
    };

    let initial = SimState::new(n, c, u);
    initial.check(T::of(DEFAULT_PROJECTION_TOL))?;
    Ok(Scenario {
        spec: spec.clone(),
        grid,
        params,
        initial,
        t_final: T::of(spec.t_final),
    })
}
