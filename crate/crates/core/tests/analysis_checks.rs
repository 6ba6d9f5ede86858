use std::sync::OnceLock;

use ohx_core::analysis::{
    energy_balance_residual, entropy_tolerance, gronwall_energy_check, kruzkov_certificate,
    kruzkov_residual, l2_norm, quantile_constants, random_test_functions, self_convergence_order,
    stability_check, weak_form_residual, EstimateReport, TestFunction, ENTROPY_KAPPA,
    REFINEMENT_FACTOR,
};
use ohx_core::flux::make_flux;
use ohx_core::grid::{make_grid, project_initial};
use ohx_core::nonlocal::cumulative_primitive;
use ohx_core::rng::SeededStream;
use ohx_core::solver::{solve, Snapshot};
use ohx_core::{
    Error, Field, FluxFamily, FluxModel, FluxSpec, InitialData, NumericalFluxKind, RunHistory,
    SolverConfig,
};
use proptest::prelude::*;

fn burgers() -> FluxModel {
    make_flux(&FluxSpec::new(FluxFamily::Burgers)).unwrap()
}

fn weighted() -> &'static FluxModel {
    static M: OnceLock<FluxModel> = OnceLock::new();
    M.get_or_init(|| {
        make_flux(&FluxSpec::new(FluxFamily::WeightedBurgers {
            a: 4.0,
            s: 1.0,
        }))
        .unwrap()
    })
}

fn dipole() -> InitialData {
    InitialData::GaussianDipole { mu: 5.0, w: 1.0 }
}

fn config(kind: NumericalFluxKind, eps: f64, cfl: f64) -> SolverConfig {
    SolverConfig {
        epsilon: eps,
        numerical_flux: kind,
        cfl,
        t_end: 0.5,
        ..Default::default()
    }
}

/// Weighted Burgers, gaussian dipole, x_max = 10, T = 0.5.
fn run(n: usize, data: &InitialData, model: &FluxModel, cfg: &SolverConfig) -> RunHistory {
    let grid = make_grid(10.0, n).unwrap();
    let u0 = project_initial(data, &grid, true).unwrap();
    solve(&u0, model, cfg).unwrap()
}

fn short(n: usize, kind: NumericalFluxKind) -> RunHistory {
    run(n, &dipole(), weighted(), &config(kind, 0.0, 0.1))
}

fn zero_run(model: &FluxModel) -> RunHistory {
    run(
        400,
        &InitialData::Zero,
        model,
        &config(NumericalFluxKind::EngquistOsher, 0.0, 0.02),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn test_function_partials_match_differences(
        x0 in 1.0f64..9.0, t0 in 0.2f64..0.8, rx in 0.2f64..1.0, rt in 0.05f64..0.2,
        zx in -0.95f64..0.95, zt in -0.95f64..0.95,
    ) {
        let phi = TestFunction::new(x0, t0, rx, rt).unwrap();
        let (x, t) = (x0 + zx * rx, t0 + zt * rt);
        let h = 1e-6 * rx.min(rt);
        let fx = (phi.value(x + h, t) - phi.value(x - h, t)) / (2.0 * h);
        let ft = (phi.value(x, t + h) - phi.value(x, t - h)) / (2.0 * h);
        let fxx = (phi.dx(x + h, t) - phi.dx(x - h, t)) / (2.0 * h);
        let scale = phi.c1_norm() / rx.min(rt);
        prop_assert!((fx - phi.dx(x, t)).abs() <= 1e-5 * scale);
        prop_assert!((ft - phi.dt(x, t)).abs() <= 1e-5 * scale);
        prop_assert!((fxx - phi.dxx(x, t)).abs() <= 1e-5 * scale / rx);
        prop_assert!(phi.value(x, t) <= phi.c1_norm());
    }

    #[test]
    fn random_test_functions_are_interior(seed in 0u64..u64::MAX, n in 20usize..2000, t_end in 0.1f64..3.0) {
        let grid = make_grid(10.0, n).unwrap();
        match random_test_functions(seed, &grid, t_end, 8) {
            Ok(phis) => {
                for phi in phis {
                    prop_assert!(phi.check_support(&grid, t_end).is_ok());
                }
            }
            // The clearance of two cells does not fit inside (0, t_end).
            Err(e) => prop_assert!(matches!(e, Error::Precondition(_)) && 4.0 * grid.dx() >= t_end),
        }
    }
}

#[test]
fn supports_touching_the_boundary_are_rejected() {
    let grid = make_grid(10.0, 100).unwrap();
    assert!(TestFunction::new(0.5, 0.5, 0.5, 0.1)
        .unwrap()
        .check_support(&grid, 1.0)
        .is_err());
    assert!(TestFunction::new(5.0, 0.95, 1.0, 0.1)
        .unwrap()
        .check_support(&grid, 1.0)
        .is_err());
    assert!(TestFunction::new(5.0, 0.5, 1.0, 0.1)
        .unwrap()
        .check_support(&grid, 1.0)
        .is_ok());
    assert!(TestFunction::new(5.0, 0.5, 0.0, 0.1).is_err());
}

#[test]
fn l2_norm_examples() {
    let grid = make_grid(2.0, 8).unwrap();
    assert_eq!(l2_norm(&Field::zeros(grid)), 0.0);
    let one = Field::new(grid, vec![1.0; 8], 0.0).unwrap();
    assert!((l2_norm(&one) - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn gronwall_holds_on_zero_and_short_runs() {
    let z = zero_run(weighted());
    let r = gronwall_energy_check(&z, z.constants.c).unwrap();
    assert!(r.pass && r.lhs.iter().all(|&v| v == 0.0));
    for kind in [NumericalFluxKind::EngquistOsher, NumericalFluxKind::Rusanov] {
        for eps in [0.0, 0.05, 0.1] {
            let h = run(200, &dipole(), weighted(), &config(kind, eps, 0.1));
            let r = gronwall_energy_check(&h, h.constants.c).unwrap();
            assert!(r.pass, "{kind} ε = {eps}: margin {}", r.margin);
        }
    }
    let h = short(100, NumericalFluxKind::EngquistOsher);
    assert!(matches!(
        gronwall_energy_check(&h, 0.5 * h.constants.c),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn energy_of_zero_flux_run_matches_series() {
    // u_t = ∫₀ˣu: u(t) = Σ tᵏ/k!·Iᵏu₀, evaluated on a fine trapezoid grid.
    let (x_max, nf, t_end) = (10.0, 40_960usize, 0.5);
    let h = x_max / nf as f64;
    let g0 = |x: f64| (x - 5.0) * (-(x - 5.0) * (x - 5.0)).exp();
    let mut term: Vec<f64> = (0..=nf).map(|j| g0(j as f64 * h)).collect();
    let mut sum = term.clone();
    let mut coef = 1.0;
    for k in 1..60 {
        let mut next = vec![0.0; nf + 1];
        for j in 1..=nf {
            next[j] = next[j - 1] + 0.5 * h * (term[j - 1] + term[j]);
        }
        coef *= t_end / k as f64;
        for (s, v) in sum.iter_mut().zip(&next) {
            *s += coef * v;
        }
        term = next;
    }
    let exact = (h * sum.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let history = run(
        400,
        &InitialData::function(g0),
        &FluxModel::zero(),
        &SolverConfig {
            t_end,
            ..Default::default()
        },
    );
    let report = gronwall_energy_check(&history, 0.0).unwrap();
    let last = *report.lhs.last().unwrap();
    assert!((last - exact).abs() <= 0.01 * exact, "{last} vs {exact}");
    // The energy grows through P(x_max)², so Ĉ = 0 is (correctly) violated.
    assert!(!report.pass);
}

#[test]
fn energy_balance_needs_viscosity_and_dense_snapshots() {
    let h = short(100, NumericalFluxKind::EngquistOsher);
    assert!(matches!(
        energy_balance_residual(&h, weighted()),
        Err(Error::Precondition(_))
    ));
    let cfg = SolverConfig {
        output_stride: 1000,
        ..config(NumericalFluxKind::EngquistOsher, 0.05, 0.1)
    };
    let h = run(100, &dipole(), weighted(), &cfg);
    assert!(matches!(
        energy_balance_residual(&h, weighted()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn energy_balance_for_x_independent_flux_without_source() {
    let cfg = SolverConfig {
        include_source: false,
        ..config(NumericalFluxKind::EngquistOsher, 0.05, 0.1)
    };
    let residuals: Vec<f64> = [200usize, 400, 800]
        .iter()
        .map(|&n| {
            let h = run(n, &dipole(), &burgers(), &cfg);
            let b = energy_balance_residual(&h, &burgers()).unwrap();
            // No interior production: the right side is the initial energy.
            assert!(b
                .report
                .rhs
                .iter()
                .all(|r| (r - b.report.rhs[0]).abs() < 1e-12));
            assert!(b.report.pass);
            b.residual
        })
        .collect();
    let r = EstimateReport::refinement("energy", residuals, REFINEMENT_FACTOR);
    assert!(r.pass, "{:?}", r.trend);
}

#[test]
fn energy_balance_residual_refines_for_weighted_burgers() {
    let residuals: Vec<f64> = [200usize, 400, 800]
        .iter()
        .map(|&n| {
            let h = run(
                n,
                &dipole(),
                weighted(),
                &config(NumericalFluxKind::EngquistOsher, 0.05, 0.1),
            );
            let b = energy_balance_residual(&h, weighted()).unwrap();
            assert!(b.report.pass, "n = {n}: margin {}", b.report.margin);
            b.residual
        })
        .collect();
    let r = EstimateReport::refinement("energy", residuals, REFINEMENT_FACTOR);
    assert!(r.pass, "{:?}", r.trend);
}

#[test]
fn residuals_vanish_on_the_zero_state() {
    for model in [burgers(), weighted().clone()] {
        let z = zero_run(&model);
        let phis = random_test_functions(3, &z.grid, z.config.t_end, 10).unwrap();
        for phi in &phis {
            assert_eq!(weak_form_residual(&z, &model, phi).unwrap(), 0.0);
            assert_eq!(kruzkov_residual(&z, &model, 0.0, phi).unwrap(), 0.0);
            // For c ≠ 0 the flux and f_x(x, c) terms cancel after integration
            // by parts; what is left is the midpoint error on φ_x.
            for c in [-0.7, 0.3, 2.0] {
                let r = kruzkov_residual(&z, &model, c, phi).unwrap();
                let tol = entropy_tolerance(ENTROPY_KAPPA, z.grid.dx(), phi);
                assert!(r.abs() <= 0.05 * tol, "c = {c}: {r} vs {tol}");
            }
        }
    }
}

#[test]
fn weak_residual_refines() {
    let phi = TestFunction::new(5.0, 0.25, 1.5, 0.15).unwrap();
    let res: Vec<f64> = [200usize, 400, 800]
        .iter()
        .map(|&n| {
            let cfg = config(
                NumericalFluxKind::EngquistOsher,
                0.0,
                0.1 * 200.0 / n as f64,
            );
            let h = run(n, &dipole(), weighted(), &cfg);
            weak_form_residual(&h, weighted(), &phi).unwrap().abs()
        })
        .collect();
    assert!(res[0] < 1e-3, "{res:?}");
    assert!(
        res[0] / res[1] >= REFINEMENT_FACTOR && res[1] / res[2] >= REFINEMENT_FACTOR,
        "{res:?}"
    );
}

#[test]
fn kruzkov_certificate_passes_on_compliant_runs() {
    for kind in [NumericalFluxKind::EngquistOsher, NumericalFluxKind::Rusanov] {
        let h = short(200, kind);
        let cs = quantile_constants(&h, 9);
        assert_eq!(cs.len(), 9);
        let phis = random_test_functions(11, &h.grid, h.config.t_end, 20).unwrap();
        let r = kruzkov_certificate(&h, weighted(), &cs, &phis, ENTROPY_KAPPA).unwrap();
        assert_eq!(r.lhs.len(), 180);
        assert!(r.pass, "{kind}: margin {}", r.margin);
    }
}

fn frozen_history(
    model: &FluxModel,
    values: Vec<f64>,
    x_max: f64,
    t_end: f64,
    steps: usize,
) -> RunHistory {
    let grid = make_grid(x_max, values.len()).unwrap();
    let cfg = SolverConfig {
        t_end,
        include_source: false,
        ..Default::default()
    };
    let snapshots = (0..=steps)
        .map(|k| {
            let field = Field::new(grid, values.clone(), t_end * k as f64 / steps as f64).unwrap();
            let primitive = cumulative_primitive(&field);
            Snapshot { field, primitive }
        })
        .collect();
    RunHistory {
        grid,
        flux_name: model.name(),
        constants: model.constants(),
        state_box_m: model.state_box_m(),
        config: cfg,
        snapshots,
        steps: Vec::new(),
        initial_primitive_moments: (0.0, 0.0),
        warnings: Vec::new(),
    }
}

#[test]
fn expansion_shock_is_rejected() {
    // Stationary −1 | +1 jump at x = 2: a weak solution but not an entropy one.
    let model = burgers();
    let grid = make_grid(4.0, 80).unwrap();
    let values = grid
        .centers()
        .iter()
        .map(|&x| if x < 2.0 { -1.0 } else { 1.0 })
        .collect();
    let h = frozen_history(&model, values, 4.0, 1.0, 80);
    let phi = TestFunction::new(2.0, 0.5, 0.15, 0.35).unwrap();
    let weak = weak_form_residual(&h, &model, &phi).unwrap();
    assert!(weak.abs() < 1e-12, "weak residual {weak}");
    let r = kruzkov_residual(&h, &model, 0.0, &phi).unwrap();
    let tol = entropy_tolerance(ENTROPY_KAPPA, grid.dx(), &phi);
    assert!(r < -10.0 * tol, "residual {r}, tolerance {tol}");
    let cert = kruzkov_certificate(&h, &model, &[0.0], &[phi], ENTROPY_KAPPA).unwrap();
    assert!(!cert.pass);
}

#[test]
fn residuals_scale_linearly_in_phi() {
    let h = short(200, NumericalFluxKind::EngquistOsher);
    let phi = TestFunction::new(4.0, 0.25, 1.0, 0.15).unwrap();
    for c in [-0.2, 0.0, 0.1] {
        let r = kruzkov_residual(&h, weighted(), c, &phi).unwrap();
        let r2 = kruzkov_residual(&h, weighted(), c, &phi.scaled(2.0)).unwrap();
        assert_eq!(r2, 2.0 * r);
        let r3 = kruzkov_residual(&h, weighted(), c, &phi.scaled(3.0)).unwrap();
        assert!(
            (r3 - 3.0 * r).abs() <= 1e-12 * r.abs() + 1e-18,
            "{r3} vs {}",
            3.0 * r
        );
    }
    let w = weak_form_residual(&h, weighted(), &phi).unwrap();
    assert_eq!(
        weak_form_residual(&h, weighted(), &phi.scaled(0.5)).unwrap(),
        0.5 * w
    );
}

#[test]
fn stability_estimate() {
    let grid = make_grid(10.0, 200).unwrap();
    let u0 = project_initial(&dipole(), &grid, true).unwrap();
    let bump = InitialData::GaussianDipole { mu: 3.0, w: 0.25 }.sampler();
    let v0: Vec<f64> = u0
        .values()
        .iter()
        .enumerate()
        .map(|(i, u)| u + 0.01 * bump(grid.center(i)))
        .collect();
    let v0 = Field::new(grid, v0, 0.0).unwrap();
    let cfg = config(NumericalFluxKind::EngquistOsher, 0.0, 0.1);
    let hu = solve(&u0, weighted(), &cfg).unwrap();
    let hv = solve(&v0, weighted(), &cfg).unwrap();

    let same = stability_check(&hu, &hu, 3.0).unwrap();
    assert!(same.pass && same.lhs.iter().all(|&v| v == 0.0));
    let r = stability_check(&hu, &hv, 3.0).unwrap();
    assert!(r.pass && r.lhs.iter().skip(1).any(|&v| v > 0.0));
    assert!(matches!(
        stability_check(&hu, &hv, 5.0),
        Err(Error::Precondition(_))
    ));

    let other = solve(
        &u0,
        weighted(),
        &config(NumericalFluxKind::Rusanov, 0.0, 0.1),
    )
    .unwrap();
    assert!(matches!(
        stability_check(&hu, &other, 3.0),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn self_convergence() {
    let same: Vec<RunHistory> = (0..3)
        .map(|_| short(100, NumericalFluxKind::EngquistOsher))
        .collect();
    assert!(self_convergence_order(&same).is_err());

    // Source-free Burgers hump e^{−(x−3)²}: the front breaks at t ≈ 1.17.
    let hump = InitialData::function(|x| (-(x - 3.0) * (x - 3.0)).exp());
    let post_shock: Vec<RunHistory> = [200usize, 400, 800, 1600]
        .iter()
        .map(|&n| {
            let grid = make_grid(10.0, n).unwrap();
            let u0 = project_initial(&hump, &grid, false).unwrap();
            let cfg = SolverConfig {
                t_end: 2.0,
                include_source: false,
                ..Default::default()
            };
            solve(&u0, &burgers(), &cfg).unwrap()
        })
        .collect();
    let c = self_convergence_order(&post_shock).unwrap();
    assert!(c.orders.iter().all(|&p| p >= 0.7), "{c:?}");

    let smooth: Vec<RunHistory> = [100usize, 200, 400, 800]
        .iter()
        .map(|&n| {
            run(
                n,
                &dipole(),
                weighted(),
                &config(
                    NumericalFluxKind::EngquistOsher,
                    0.0,
                    0.1 * 200.0 / n as f64,
                ),
            )
        })
        .collect();
    let c = self_convergence_order(&smooth).unwrap();
    assert!(c.order() >= 0.8, "{c:?}");
}

#[test]
fn random_streams_feed_reproducible_test_functions() {
    let grid = make_grid(10.0, 100).unwrap();
    let a = random_test_functions(5, &grid, 1.0, 4).unwrap();
    let b = random_test_functions(5, &grid, 1.0, 4).unwrap();
    assert_eq!(a, b);
    let mut s = SeededStream::new(5);
    assert_eq!(TestFunction::random(&mut s, &grid, 1.0).unwrap(), a[0]);
}
