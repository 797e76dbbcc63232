use std::f64::consts::PI;
use std::sync::Arc;

use ksns::config::SimConfig;
use ksns::grid::{cell_dot, integrate, Grid, MaskKind, ScalarField, VectorField};
use ksns::model::{ModelParams, Potential, SensitivityKind, SensitivityTensor};
use ksns::ops::divergence;
use ksns::run::run_in_memory;
use ksns::stepper::{advance, Scheme, SimState, StepControl, Stepper};
use ksns::{Grid32, ModelParams32, SimState32};

fn unit(n: usize) -> Arc<Grid<f64>> {
    Grid::new(1.0, 1.0, n, n, MaskKind::Full).unwrap()
}

#[test]
fn zero_state_stays_zero() {
    let g = unit(16);
    let s = SimState::zeros(&g);
    let next = advance(&s, &ModelParams::decoupled(), &StepControl::fixed(1e-3)).unwrap();
    assert!(next.t > 0.0);
    assert_eq!(next.step_index, 1);
    assert_eq!(next.n.max_abs(), 0.0);
    assert_eq!(next.c.max_abs(), 0.0);
    assert_eq!(next.u.max_abs(), 0.0);
}

#[test]
fn homogeneous_state_is_a_fixed_point() {
    let g = Grid::new(1.0, 1.0, 24, 24, MaskKind::LShape).unwrap();
    let nbar = 2.0;
    let p = ModelParams {
        m: 1.5,
        kappa: 1.0,
        cs: 1.0,
        eps: 0.01,
        sensitivity: SensitivityTensor::new(SensitivityKind::Rotation { chi: 1.0, theta: 1.0 }),
        phi: Potential::LinearGravity { g: (0.2, -1.0) },
        yosida_eps: None,
        advection: Default::default(),
    };
    let s0 = SimState::new(
        ScalarField::constant(&g, nbar),
        ScalarField::constant(&g, nbar),
        VectorField::zeros(&g),
    );
    let mut stepper = Stepper::new(p, StepControl::fixed(1e-3)).unwrap();
    let mut s = s0.clone();
    for _ in 0..100 {
        s = stepper.step(&s, 1.0).unwrap().0;
    }
    assert_eq!(s.step_index, 100);
    assert!(s.n.axpby(1.0, &s0.n, -1.0).max_abs() <= 1e-8);
    assert!(s.c.axpby(1.0, &s0.c, -1.0).max_abs() <= 1e-8);
    assert!(s.u.max_abs() <= 1e-8);
}

/// Heat equation with the lowest mixed Neumann mode; its amplitude decays
/// at rate `2π²`.
#[test]
fn cosine_mode_decays_at_heat_rate() {
    let g = unit(64);
    let mode = ScalarField::from_fn(&g, |x, y| (PI * x).cos() * (PI * y).cos());
    let amp = |f: &ScalarField<f64>| cell_dot(f, &mode) / cell_dot(&mode, &mode);
    let n0 = ScalarField::from_fn(&g, |x, y| 1.0 + 0.5 * (PI * x).cos() * (PI * y).cos());
    let mut s = SimState::new(n0.clone(), ScalarField::zeros(&g), VectorField::zeros(&g));
    let mut stepper = Stepper::new(ModelParams::decoupled(), StepControl::fixed(1e-4)).unwrap();
    for _ in 0..200 {
        s = stepper.step(&s, 1.0).unwrap().0;
    }
    let rate = -(amp(&s.n) / amp(&n0)).ln() / s.t;
    let exact = 2.0 * PI * PI;
    assert!(((rate - exact) / exact).abs() <= 0.01, "rate {rate} vs {exact}");
    assert!((integrate(&s.n) - integrate(&n0)).abs() <= 1e-12 * integrate(&n0));
}

#[test]
fn bdf2_tracks_the_heat_mode_more_closely() {
    let g = unit(32);
    let n0 = ScalarField::from_fn(&g, |x, y| 1.0 + 0.5 * (PI * x).cos() * (PI * y).cos());
    let mode = ScalarField::from_fn(&g, |x, y| (PI * x).cos() * (PI * y).cos());
    let h = g.h();
    // semi-discrete decay rate of the sampled mode
    let lam = 2.0 * (2.0 - 2.0 * (PI * h).cos()) / (h * h);
    let err = |scheme| {
        let mut ctl = StepControl::fixed(0.01);
        ctl.scheme = scheme;
        let mut st = Stepper::new(ModelParams::decoupled(), ctl).unwrap();
        let mut s = SimState::new(n0.clone(), ScalarField::zeros(&g), VectorField::zeros(&g));
        for _ in 0..10 {
            s = st.step(&s, 1.0).unwrap().0;
        }
        let a = cell_dot(&s.n, &mode) / cell_dot(&mode, &mode);
        (a - 0.5 * (-lam * s.t).exp()).abs()
    };
    assert!(err(Scheme::ImexBdf2) < 0.5 * err(Scheme::ImexEuler));
}

#[test]
fn zero_final_time_gives_initial_row_only() {
    let mut cfg = SimConfig::preset("gaussian_bump").unwrap();
    cfg.scenario.nx = 16;
    cfg.scenario.ny = 16;
    cfg.scenario.t_final = 0.0;
    let r = run_in_memory(&cfg).unwrap();
    assert_eq!(r.records.len(), 1);
    assert_eq!(r.steps, 0);
    assert_eq!(r.records[0].t, 0.0);
}

#[test]
fn short_runs_are_deterministic_and_keep_invariants() {
    let mut cfg = SimConfig::preset("two_bumps").unwrap();
    cfg.scenario.nx = 24;
    cfg.scenario.ny = 24;
    cfg.scenario.t_final = 0.05;
    let a = run_in_memory(&cfg).unwrap();
    let b = run_in_memory(&cfg).unwrap();
    assert!(a.passed(), "{:?}", a.failures);
    assert_eq!(a.records, b.records);
    assert_eq!(a.final_state.n.values, b.final_state.n.values);
    assert!(a.final_state.n.min() >= -1e-12);
    assert!(divergence(&a.final_state.u).max_abs() <= cfg.control.projection_tol);
    let m0 = a.initial_mass_n;
    assert!(a.records.iter().all(|r| (r.mass_n - m0).abs() <= 1e-8 * m0));
}

#[test]
fn single_precision_stepper_runs() {
    let g = Grid32::new(1.0, 1.0, 16, 16, MaskKind::LShape).unwrap();
    let n0 = ksns::ScalarField32::from_fn(&g, |x, y| 1.0 + 0.5 * (3.0 * x).cos() * y);
    let u0 = ksns::VectorField32::from_fn(&g, |_, y| 0.1 * (y - 0.5), |x, _| -0.1 * (x - 0.5));
    let mut s = SimState32::new(n0.clone(), n0.clone(), u0);
    let p = ModelParams32 {
        phi: Potential::LinearGravity { g: (0.0, -1.0) },
        ..ModelParams32::decoupled()
    };
    let mut ctl = StepControl::<f32>::fixed(1e-3);
    ctl.diffusion_tol = 1e-5;
    ctl.projection_tol = 1e-4;
    let mut stepper = Stepper::new(p, ctl).unwrap();
    for _ in 0..5 {
        s = stepper.step(&s, 1.0).unwrap().0;
    }
    assert!(s.n.is_finite() && s.u.is_finite());
    let (m, m0) = (integrate(&s.n), integrate(&n0));
    assert!((m - m0).abs() <= 1e-5 * m0);
}
