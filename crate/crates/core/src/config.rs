//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! scenario = bounded_m15
//! grid.nx = 128
//! model.m = 1.5
//! sweep.eps = [0.1, 0.05, 0.025]
//! ```
//!
//! The scenario preset is applied first; every other key overrides it.
//! [`SimConfig::to_config_string`] writes every resolved key, so parsing
//! the echo reproduces the same configuration.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::SnapshotFormat;
use crate::ops::AdvectionScheme;
use crate::scenarios::{CutoffSpec, DensityKind, MaskSpec, ScenarioSpec, SensitivitySpec};
use crate::stepper::{Scheme, StepControl};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub m: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
}

/// Invariant suites asserted while a run progresses.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyFlags {
    pub finite: bool,
    pub positivity: bool,
    /// `|∫n(t) − ∫n₀| ≤ mass_tol·∫n₀`.
    pub mass: bool,
    pub mass_tol: f64,
    /// `∫c(t) ≤ max{∫n₀, ∫c₀}(1 + c_mass_tol)`.
    pub c_mass: bool,
    pub c_mass_tol: f64,
    /// Per-step clipped mass at most `truncation_tol·∫n₀`.
    pub truncation: bool,
    pub truncation_tol: f64,
    /// `max |div u|` at most the projection tolerance.
    pub divergence: bool,
    /// Plateau of `F_key` and the sup-norms over the run.
    pub plateau: bool,
    pub plateau_factor: f64,
}

impl Default for VerifyFlags {
    fn default() -> Self {
        Self {
            finite: true,
            positivity: true,
            mass: true,
            mass_tol: 1e-8,
            c_mass: true,
            c_mass_tol: 1e-6,
            truncation: true,
            truncation_tol: 1e-8,
            divergence: true,
            plateau: false,
            plateau_factor: 1.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub scenario: ScenarioSpec,
    pub control: StepControl<f64>,
    pub output_dir: PathBuf,
    pub record_interval: f64,
    pub snapshot_interval: Option<f64>,
    pub snapshot_format: SnapshotFormat,
    pub progress: bool,
    pub sweep: Option<SweepSpec>,
    pub verify: VerifyFlags,
}

impl SimConfig {
    pub fn from_scenario(scenario: ScenarioSpec) -> Self {
        Self {
            scenario,
            control: StepControl::default(),
            output_dir: PathBuf::from("ksns-out"),
            record_interval: 0.01,
            snapshot_interval: None,
            snapshot_format: SnapshotFormat::Binary,
            progress: false,
            sweep: None,
            verify: VerifyFlags::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        Ok(Self::from_scenario(ScenarioSpec::preset(name)?))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.control.validate()?;
        if !(self.record_interval > 0.0) {
            return Err(Error::Config("output.record_interval must be > 0".into()));
        }
        if let Some(s) = self.snapshot_interval {
            if !(s > 0.0) {
                return Err(Error::Config("output.snapshot_interval must be > 0".into()));
            }
        }
        if let Some(sw) = &self.sweep {
            for (name, list) in [("sweep.m", &sw.m), ("sweep.eps", &sw.eps)] {
                if let Some(l) = list {
                    if l.is_empty() {
                        return Err(Error::Config(format!("{name} must be non-empty")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Child configurations of a sweep: the product of the `m` and `ε`
    /// lists, in list order with `m` outermost. Without a sweep, the
    /// configuration itself.
    pub fn expand_sweep(&self) -> Vec<(String, SimConfig)> {
        let Some(sw) = &self.sweep else {
            return vec![(self.scenario.name.clone(), self.clone())];
        };
        let ms = sw.m.clone().unwrap_or_else(|| vec![self.scenario.m]);
        let es = sw.eps.clone().unwrap_or_else(|| vec![self.scenario.eps]);
        let mut out = Vec::with_capacity(ms.len() * es.len());
        for &m in &ms {
            for &eps in &es {
                let mut child = self.clone();
                child.sweep = None;
                child.scenario.m = m;
                child.scenario.eps = eps;
                let label = format!("m{m}_eps{eps}");
                child.output_dir = self.output_dir.join(&label);
                out.push((label, child));
            }
        }
        out
    }

    /// Every resolved key, one per line.
    pub fn to_config_string(&self) -> String {
        let s = &self.scenario;
        let c = &self.control;
        let pair = |p: (f64, f64)| format!("[{:?}, {:?}]", p.0, p.1);
        let list = |l: &[f64]| {
            format!(
                "[{}]",
                l.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")
            )
        };
        let (theta, n_half) = match s.sensitivity {
            SensitivitySpec::Rotation { theta } => (theta, 1.0),
            SensitivitySpec::Saturating { n_half } => (FRAC_PI_2, n_half),
            SensitivitySpec::Identity => (FRAC_PI_2, 1.0),
        };
        let mut lines = vec![
            format!("scenario = {}", s.name),
            format!("scenario.density = {}", s.density.name()),
            format!("scenario.n_bar = {:?}", s.n_bar),
            format!("scenario.mass = {:?}", s.mass),
            format!("scenario.sigma = {:?}", s.sigma),
            format!("scenario.center = {}", pair(s.center)),
            format!("scenario.center2 = {}", pair(s.center2)),
            format!("scenario.noise = {:?}", s.noise),
            format!("scenario.c_bar = {:?}", s.c_bar),
            format!("scenario.u0_amplitude = {:?}", s.u0_amplitude),
            format!("scenario.seed = {}", s.seed),
            format!("grid.lx = {:?}", s.lx),
            format!("grid.ly = {:?}", s.ly),
            format!("grid.nx = {}", s.nx),
            format!("grid.ny = {}", s.ny),
            format!("grid.mask = {}", s.mask.name()),
            format!("model.m = {:?}", s.m),
            format!("model.kappa = {:?}", s.kappa),
            format!("model.cs = {:?}", s.cs),
            format!("model.eps = {:?}", s.eps),
            format!(
                "model.yosida_eps = {}",
                s.yosida_eps.map_or("tied".to_string(), |v| format!("{v:?}"))
            ),
            format!("model.sensitivity = {}", s.sensitivity.name()),
            format!("model.chi = {:?}", s.chi),
            format!("model.theta = {theta:?}"),
            format!("model.n_half = {n_half:?}"),
            format!("model.boundary_cutoff_cells = {:?}", s.boundary_cutoff_cells),
            format!(
                "model.magnitude_cutoff = {}",
                match s.magnitude_cutoff {
                    CutoffSpec::Off => "off".to_string(),
                    CutoffSpec::InverseEps => "inverse_eps".to_string(),
                    CutoffSpec::Fixed(v) => format!("{v:?}"),
                }
            ),
            format!("model.gravity = {}", pair(s.gravity)),
            format!("model.advection = {}", s.advection.name()),
            format!("time.T = {:?}", s.t_final),
            format!("time.dt = {:?}", c.dt),
            format!("time.dt_min = {:?}", c.dt_min),
            format!("time.dt_max = {:?}", c.dt_max),
            format!("time.cfl = {:?}", c.cfl_target),
            format!("time.scheme = {}", c.scheme.name()),
            format!("time.diffusion_tol = {:?}", c.diffusion_tol),
            format!("time.projection_tol = {:?}", c.projection_tol),
            format!("output.dir = {}", self.output_dir.display()),
            format!("output.record_interval = {:?}", self.record_interval),
            format!(
                "output.snapshot_interval = {}",
                self.snapshot_interval.map_or("off".to_string(), |v| format!("{v:?}"))
            ),
            format!("output.snapshot_format = {}", self.snapshot_format.name()),
            format!("output.progress = {}", self.progress),
        ];
        if let Some(sw) = &self.sweep {
            if let Some(m) = &sw.m {
                lines.push(format!("sweep.m = {}", list(m)));
            }
            if let Some(e) = &sw.eps {
                lines.push(format!("sweep.eps = {}", list(e)));
            }
        }
        let v = &self.verify;
        lines.extend([
            format!("verify.finite = {}", v.finite),
            format!("verify.positivity = {}", v.positivity),
            format!("verify.mass = {}", v.mass),
            format!("verify.mass_tol = {:?}", v.mass_tol),
            format!("verify.c_mass = {}", v.c_mass),
            format!("verify.c_mass_tol = {:?}", v.c_mass_tol),
            format!("verify.truncation = {}", v.truncation),
            format!("verify.truncation_tol = {:?}", v.truncation_tol),
            format!("verify.divergence = {}", v.divergence),
            format!("verify.plateau = {}", v.plateau),
            format!("verify.plateau_factor = {:?}", v.plateau_factor),
        ]);
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    /// Writes `config.resolved` into the output directory.
    pub fn echo_resolved(&self) -> Result<PathBuf> {
        fs::create_dir_all(&self.output_dir).map_err(|e| Error::io(&self.output_dir, e))?;
        let path = self.output_dir.join("config.resolved");
        fs::write(&path, self.to_config_string()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_str(&text)
}

struct Line<'a> {
    no: usize,
    key: &'a str,
    value: &'a str,
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2 && ((v.starts_with('"') && v.ends_with('"')) || (v.starts_with('\'') && v.ends_with('\''))) {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

impl Line<'_> {
    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::ConfigLine {
            line: self.no,
            msg: format!("{}: {msg}", self.key),
        }
    }

    fn str(&self) -> &str {
        unquote(self.value)
    }

    fn f64(&self) -> Result<f64> {
        self.str()
            .parse::<f64>()
            .map_err(|_| self.err(format!("expected a number, got '{}'", self.value)))
    }

    fn usize(&self) -> Result<usize> {
        self.str()
            .parse::<usize>()
            .map_err(|_| self.err(format!("expected a non-negative integer, got '{}'", self.value)))
    }

    fn u64(&self) -> Result<u64> {
        self.str()
            .parse::<u64>()
            .map_err(|_| self.err(format!("expected a non-negative integer, got '{}'", self.value)))
    }

    fn bool(&self) -> Result<bool> {
        match self.str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            other => Err(self.err(format!("expected true/false, got '{other}'"))),
        }
    }

    fn list(&self) -> Result<Vec<f64>> {
        let v = self.str().trim();
        let inner = v
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| self.err(format!("expected a list [a, b, ...], got '{v}'")))?;
        if inner.trim().is_empty() {
            return Ok(Vec::new());
        }
        inner
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| self.err(format!("expected numbers in list, got '{}'", x.trim())))
            })
            .collect()
    }

    fn pair(&self) -> Result<(f64, f64)> {
        let l = self.list()?;
        match l.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(self.err("expected a pair [x, y]")),
        }
    }
}

/// Parses configuration text.
pub fn parse_str(text: &str) -> Result<SimConfig> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigLine {
            line: no,
            msg: format!("expected 'key = value', got '{content}'"),
        })?;
        lines.push(Line {
            no,
            key: key.trim(),
            value: value.trim(),
        });
    }

    let name = lines
        .iter()
        .rev()
        .find(|l| l.key == "scenario" || l.key == "scenario.name")
        .map(|l| (l.no, l.str().to_string()))
        .ok_or_else(|| Error::Config("missing required key 'scenario'".into()))?;
    let mut cfg = SimConfig::preset(&name.1).map_err(|e| match e {
        Error::Config(msg) => Error::ConfigLine { line: name.0, msg },
        other => other,
    })?;

    let (mut theta, mut n_half) = match cfg.scenario.sensitivity {
        SensitivitySpec::Rotation { theta } => (theta, 1.0),
        SensitivitySpec::Saturating { n_half } => (FRAC_PI_2, n_half),
        SensitivitySpec::Identity => (FRAC_PI_2, 1.0),
    };
    let mut sens_kind = cfg.scenario.sensitivity.name().to_string();
    let mut sweep = SweepSpec { m: None, eps: None };

    for l in &lines {
        let s = &mut cfg.scenario;
        let c = &mut cfg.control;
        let v = &mut cfg.verify;
        match l.key {
            "scenario" | "scenario.name" => {}
            "scenario.density" => {
                s.density = match l.str() {
                    "constant" => DensityKind::Constant,
                    "gaussian" => DensityKind::Gaussian,
                    "two_bumps" => DensityKind::TwoBumps,
                    other => return Err(l.err(format!("unknown density '{other}'"))),
                }
            }
            "scenario.n_bar" => s.n_bar = l.f64()?,
            "scenario.mass" => s.mass = l.f64()?,
            "scenario.sigma" => s.sigma = l.f64()?,
            "scenario.center" => s.center = l.pair()?,
            "scenario.center2" => s.center2 = l.pair()?,
            "scenario.noise" => s.noise = l.f64()?,
            "scenario.c_bar" => s.c_bar = l.f64()?,
            "scenario.u0_amplitude" => s.u0_amplitude = l.f64()?,
            "scenario.seed" => s.seed = l.u64()?,
            "grid.lx" => s.lx = l.f64()?,
            "grid.ly" => s.ly = l.f64()?,
            "grid.nx" => s.nx = l.usize()?,
            "grid.ny" => s.ny = l.usize()?,
            "grid.n" => {
                s.nx = l.usize()?;
                s.ny = s.nx;
            }
            "grid.mask" => {
                s.mask = match l.str() {
                    "full" => MaskSpec::Full,
                    "l_shape" | "lshape" => MaskSpec::LShape,
                    other => return Err(l.err(format!("unknown mask '{other}'"))),
                }
            }
            "model.m" => s.m = l.f64()?,
            "model.kappa" => s.kappa = l.f64()?,
            "model.cs" => s.cs = l.f64()?,
            "model.eps" => s.eps = l.f64()?,
            "model.yosida_eps" => {
                s.yosida_eps = match l.str() {
                    "tied" => None,
                    _ => Some(l.f64()?),
                }
            }
            "model.sensitivity" => sens_kind = l.str().to_string(),
            "model.chi" => s.chi = l.f64()?,
            "model.theta" => theta = l.f64()?,
            "model.n_half" => n_half = l.f64()?,
            "model.boundary_cutoff_cells" => s.boundary_cutoff_cells = l.f64()?,
            "model.magnitude_cutoff" => {
                s.magnitude_cutoff = match l.str() {
                    "off" => CutoffSpec::Off,
                    "inverse_eps" | "on" => CutoffSpec::InverseEps,
                    _ => CutoffSpec::Fixed(l.f64()?),
                }
            }
            "model.gravity" => s.gravity = l.pair()?,
            "model.advection" => {
                s.advection = match l.str() {
                    "upwind" => AdvectionScheme::Upwind,
                    "minmod" => AdvectionScheme::Minmod,
                    other => return Err(l.err(format!("unknown advection scheme '{other}'"))),
                }
            }
            "time.T" => s.t_final = l.f64()?,
            "time.dt" => c.dt = l.f64()?,
            "time.dt_min" => c.dt_min = l.f64()?,
            "time.dt_max" => c.dt_max = l.f64()?,
            "time.cfl" => c.cfl_target = l.f64()?,
            "time.scheme" => {
                c.scheme = Scheme::parse(l.str())
                    .ok_or_else(|| l.err(format!("unknown scheme '{}'", l.str())))?
            }
            "time.diffusion_tol" => c.diffusion_tol = l.f64()?,
            "time.projection_tol" => c.projection_tol = l.f64()?,
            "output.dir" => cfg.output_dir = PathBuf::from(l.str()),
            "output.record_interval" => cfg.record_interval = l.f64()?,
            "output.snapshot_interval" => {
                cfg.snapshot_interval = match l.str() {
                    "off" | "none" => None,
                    _ => Some(l.f64()?),
                }
            }
            "output.snapshot_format" => {
                cfg.snapshot_format = match l.str() {
                    "binary" => SnapshotFormat::Binary,
                    "csv" => SnapshotFormat::Csv,
                    other => return Err(l.err(format!("unknown snapshot format '{other}'"))),
                }
            }
            "output.progress" => cfg.progress = l.bool()?,
            "sweep.m" => sweep.m = Some(l.list()?),
            "sweep.eps" => sweep.eps = Some(l.list()?),
            "verify.finite" => v.finite = l.bool()?,
            "verify.positivity" => v.positivity = l.bool()?,
            "verify.mass" => v.mass = l.bool()?,
            "verify.mass_tol" => v.mass_tol = l.f64()?,
            "verify.c_mass" => v.c_mass = l.bool()?,
            "verify.c_mass_tol" => v.c_mass_tol = l.f64()?,
            "verify.truncation" => v.truncation = l.bool()?,
            "verify.truncation_tol" => v.truncation_tol = l.f64()?,
            "verify.divergence" => v.divergence = l.bool()?,
            "verify.plateau" => v.plateau = l.bool()?,
            "verify.plateau_factor" => v.plateau_factor = l.f64()?,
            other => {
                return Err(Error::ConfigLine {
                    line: l.no,
                    msg: format!("unknown key '{other}'"),
                })
            }
        }
    }

    cfg.scenario.sensitivity = match sens_kind.as_str() {
        "identity" => SensitivitySpec::Identity,
        "rotation" => SensitivitySpec::Rotation { theta },
        "saturating" => SensitivitySpec::Saturating { n_half },
        other => return Err(Error::Config(format!("unknown sensitivity '{other}'"))),
    };
    if sweep.m.is_some() || sweep.eps.is_some() {
        cfg.sweep = Some(sweep);
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = parse_str("scenario = \"homogeneous\"\n").unwrap();
        assert_eq!((cfg.scenario.nx, cfg.scenario.ny), (64, 64));
        assert_eq!(cfg.control.dt, 1e-3);
        assert_eq!(cfg.scenario.t_final, 1.0);
    }

    #[test]
    fn m_below_one_rejected() {
        let e = parse_str("scenario = homogeneous\nmodel.m = 0.5\n").unwrap_err();
        assert!(matches!(e, Error::Config(ref m) if m.contains("m must be >= 1")), "{e}");
    }

    #[test]
    fn unknown_key_named() {
        let e = parse_str("scenario = homogeneous\nmodel.mm = 2\n").unwrap_err();
        assert!(e.to_string().contains("model.mm"));
        assert!(matches!(e, Error::ConfigLine { line: 2, .. }));
    }

    #[test]
    fn type_mismatch_has_line_number() {
        let e = parse_str("scenario = homogeneous\n\ngrid.nx = lots\n").unwrap_err();
        assert!(matches!(e, Error::ConfigLine { line: 3, .. }), "{e}");
    }

    #[test]
    fn sweep_expansion() {
        let cfg = parse_str("scenario = aggregation_m1\nsweep.m = [1.0, 1.25, 1.5, 2.0]\n").unwrap();
        let kids = cfg.expand_sweep();
        assert_eq!(kids.len(), 4);
        assert_eq!(kids[2].1.scenario.m, 1.5);
    }

    #[test]
    fn resolved_round_trip() {
        let text = "scenario = rotational_flux\nmodel.theta = 1.0\ngrid.nx = 32\ngrid.ny = 32\n\
                    sweep.eps = [0.1, 0.05]\noutput.snapshot_interval = 0.25\n";
        let cfg = parse_str(text).unwrap();
        let again = parse_str(&cfg.to_config_string()).unwrap();
        assert_eq!(cfg, again);
    }
}
