use std::f64::consts::PI;
use std::sync::Arc;

use ksns::grid::{integrate, Grid, MaskKind, ScalarField, VectorField};
use ksns::model::{
    eval_sensitivity, rhs_c, rhs_n, rhs_u, ModelParams, Potential, SensitivityKind, SensitivityTensor,
};
use ksns::ops::{divergence, enstrophy, porous_rhs, vector_laplacian, AdvectionScheme, Mat2};
use ksns::solver::helmholtz_project;
use ksns::stepper::{advance, SimState, StepControl};
use proptest::prelude::*;

fn unit(n: usize, mask: MaskKind) -> Arc<Grid<f64>> {
    Grid::new(1.0, 1.0, n, n, mask).unwrap()
}

fn params(m: f64, chi: f64, kappa: f64, g: (f64, f64)) -> ModelParams<f64> {
    ModelParams {
        m,
        kappa,
        cs: chi,
        eps: 0.01,
        sensitivity: SensitivityTensor::new(SensitivityKind::Rotation { chi, theta: 0.7 }),
        phi: Potential::LinearGravity { g },
        yosida_eps: None,
        advection: AdvectionScheme::Upwind,
    }
}

fn swirl(grid: &Arc<Grid<f64>>, amp: f64) -> VectorField<f64> {
    let raw = VectorField::from_fn(
        grid,
        |x, y| amp * (PI * x).sin().powi(2) * (2.0 * PI * y).sin(),
        |x, y| -amp * (2.0 * PI * x).sin() * (PI * y).sin().powi(2),
    );
    helmholtz_project(&raw, 1e-12).unwrap().0
}

fn sensitivity(kind: u8, chi: f64, theta: f64) -> SensitivityTensor<f64> {
    let kind = match kind % 4 {
        0 => SensitivityKind::ScalarIdentity { chi },
        1 => SensitivityKind::Rotation { chi, theta },
        2 => SensitivityKind::Saturating { chi, n_half: 0.5 },
        _ => SensitivityKind::Table {
            n_knots: vec![0.0, 1.0, 4.0],
            matrices: vec![
                Mat2::identity().scale(chi),
                Mat2([[0.0, chi], [-chi, 0.0]]),
                Mat2([[0.6 * chi, 0.8 * chi], [-0.8 * chi, 0.6 * chi]]),
            ],
        },
    };
    SensitivityTensor::new(kind)
}

#[test]
fn sensitivity_examples() {
    let g = unit(32, MaskKind::Full);
    let rot = SensitivityTensor::new(SensitivityKind::Rotation { chi: 1.0, theta: PI / 2.0 }).without_cutoffs();
    let s = eval_sensitivity(&rot, &g, (0.5, 0.5), 1.0, 1.0);
    let expect = [[0.0, 1.0], [-1.0, 0.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((s.0[i][j] - expect[i][j]).abs() < 1e-15);
        }
    }
    assert!((s.norm() - 1.0).abs() < 1e-15);
    let cut = SensitivityTensor::new(SensitivityKind::Rotation { chi: 1.0, theta: 0.3 });
    assert_eq!(eval_sensitivity(&cut, &g, (0.0, 0.4), 1.0, 1.0).norm(), 0.0);
    let half = SensitivityTensor::new(SensitivityKind::ScalarIdentity { chi: 0.5 }).without_cutoffs();
    assert!((eval_sensitivity(&half, &g, (0.3, 0.3), 2.0, 0.0).norm() - 0.5).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn cut_sensitivity_bounded_by_uncut(
        kind in 0u8..4,
        chi in 0.0..3.0f64,
        theta in -PI..PI,
        x in 0.0..1.0f64,
        y in 0.0..1.0f64,
        n in 0.0..50.0f64,
        c in 0.0..50.0f64,
        cutoff in prop::option::of(0.5..20.0f64),
        l_shape in any::<bool>(),
    ) {
        let g = if l_shape { unit(16, MaskKind::LShape) } else { unit(16, MaskKind::Full) };
        let x = if l_shape && x > 0.5 && y > 0.5 { x - 0.5 } else { x };
        let mut s = sensitivity(kind, chi, theta);
        s.magnitude_cutoff = cutoff;
        let uncut = eval_sensitivity(&s.clone().without_cutoffs(), &g, (x, y), n, c).norm();
        let cut = eval_sensitivity(&s, &g, (x, y), n, c).norm();
        prop_assert!(cut <= uncut * (1.0 + 1e-14) + 1e-15);
        prop_assert!(uncut <= s.bound() * (1.0 + 1e-14) + 1e-15);
        prop_assert!(s.bound() <= chi * (1.0 + 1e-14));
    }
}

#[test]
fn rhs_n_term_isolation() {
    let g = unit(32, MaskKind::LShape);
    let p = params(1.5, 1.0, 1.0, (0.0, -1.0));
    let nbar = ScalarField::constant(&g, 2.0);
    let cbar = ScalarField::constant(&g, 3.0);
    assert_eq!(rhs_n(&nbar, &cbar, &VectorField::zeros(&g), &p).unwrap().max_abs(), 0.0);

    let n = ScalarField::from_fn(&g, |x, y| 1.0 + x * y);
    let c = ScalarField::from_fn(&g, |x, y| (3.0 * x).sin() + y);
    let mut p0 = p.clone();
    p0.sensitivity = SensitivityTensor::zero();
    let got = rhs_n(&n, &c, &VectorField::zeros(&g), &p0).unwrap();
    assert_eq!(got.values, porous_rhs(&n, p.eps, p.m).unwrap().values);
    assert!(rhs_n(&n.map(|v| v - 1.5), &c, &VectorField::zeros(&g), &p).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rhs_n_conserves_mass(
        nv in prop::collection::vec(0.0..3.0f64, 192),
        cv in prop::collection::vec(0.0..3.0f64, 192),
        m in 1.0..3.0f64,
        amp in 0.0..2.0f64,
    ) {
        let g = unit(16, MaskKind::LShape);
        let nc = g.num_cells();
        let n = ScalarField::from_values(&g, nv[..nc].to_vec());
        let c = ScalarField::from_values(&g, cv[..nc].to_vec());
        let u = swirl(&g, amp);
        let r = rhs_n(&n, &c, &u, &params(m, 1.0, 1.0, (0.0, -1.0))).unwrap();
        let scale = r.values.iter().map(|v| v.abs()).sum::<f64>() * g.cell_area();
        prop_assert!(integrate(&r).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn rhs_c_integral_identity(
        nv in prop::collection::vec(0.0..3.0f64, 256),
        cv in prop::collection::vec(0.0..3.0f64, 256),
        amp in 0.0..2.0f64,
    ) {
        let g = unit(16, MaskKind::Full);
        let n = ScalarField::from_values(&g, nv);
        let c = ScalarField::from_values(&g, cv);
        let u = swirl(&g, amp);
        let r = rhs_c(&n, &c, &u, AdvectionScheme::Upwind);
        let expect = integrate(&n) - integrate(&c);
        prop_assert!((integrate(&r) - expect).abs() <= 1e-12 * (integrate(&n) + integrate(&c)).max(1.0));
    }
}

#[test]
fn rhs_c_examples() {
    let g = unit(16, MaskKind::Full);
    let z = VectorField::zeros(&g);
    let nbar = ScalarField::constant(&g, 1.5);
    assert_eq!(rhs_c(&nbar, &nbar, &z, AdvectionScheme::Upwind).max_abs(), 0.0);
    let r = rhs_c(&ScalarField::zeros(&g), &ScalarField::constant(&g, 2.0), &z, AdvectionScheme::Upwind);
    assert!(r.values.iter().all(|&v| v == -2.0));
}

#[test]
fn buoyancy_of_constant_density_is_a_gradient() {
    let g = unit(32, MaskKind::LShape);
    let p = params(1.5, 1.0, 0.0, (0.3, -1.0));
    let tol = 1e-10;
    let f = rhs_u(&ScalarField::constant(&g, 2.0), &VectorField::zeros(&g), &p, tol).unwrap();
    assert!(f.max_abs() > 1.0);
    let (w, _) = helmholtz_project(&f, tol).unwrap();
    assert!(w.max_abs() <= 10.0 * tol);
}

#[test]
fn rhs_u_without_convection_or_potential() {
    let g = unit(24, MaskKind::Full);
    let u = swirl(&g, 1.0);
    let n = ScalarField::from_fn(&g, |x, _| x);
    let mut p = params(1.5, 1.0, 0.0, (0.0, -1.0));
    let a = rhs_u(&n, &u, &p, 1e-10).unwrap();
    p.yosida_eps = Some(0.5);
    let b = rhs_u(&n, &u, &p, 1e-10).unwrap();
    assert_eq!(a.ux, b.ux);
    assert_eq!(a.uy, b.uy);
    p.phi = Potential::none();
    let stokes = rhs_u(&n, &u, &p, 1e-10).unwrap();
    let lap = vector_laplacian(&u);
    assert_eq!(stokes.ux, lap.ux);
    assert_eq!(stokes.uy, lap.uy);
}

#[test]
fn kinetic_energy_decays_at_enstrophy_rate() {
    let g = unit(64, MaskKind::Full);
    let u = swirl(&g, 1.0);
    let state = SimState::new(ScalarField::zeros(&g), ScalarField::zeros(&g), u.clone());
    let p = ModelParams::<f64>::decoupled();
    let dt = 1e-5;
    let next = advance(&state, &p, &StepControl::fixed(dt)).unwrap();
    let rate = 0.5 * (next.u.l2_norm().powi(2) - u.l2_norm().powi(2)) / dt;
    let expect = -enstrophy(&u);
    assert!(((rate - expect) / expect).abs() <= 0.05, "rate {rate} vs {expect}");
    assert!(divergence(&next.u).max_abs() <= 1e-10);
}

#[test]
fn params_reject_sensitivity_above_bound() {
    let mut p = params(1.5, 1.0, 1.0, (0.0, -1.0));
    p.cs = 0.5;
    assert!(matches!(p.validate(), Err(ksns::Error::Config(_))));
    p.cs = 1.0;
    p.m = 0.9;
    assert!(p.validate().is_err());
}
