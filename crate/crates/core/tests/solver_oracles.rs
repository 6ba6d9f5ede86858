use std::f64::consts::PI;
use std::sync::OnceLock;

use ohx_core::flux::make_flux;
use ohx_core::grid::{make_grid, project_initial};
use ohx_core::solver::{
    l1_distance, numerical_flux_value, semi_discrete_rhs, solve, viscosity_sweep, RunHistory,
};
use ohx_core::{
    Error, FluxFamily, FluxModel, FluxSpec, InitialData, Integrator, NumericalFluxKind,
    SolverConfig,
};
use proptest::prelude::*;

const KINDS: [NumericalFluxKind; 2] =
    [NumericalFluxKind::EngquistOsher, NumericalFluxKind::Rusanov];

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

/// Weighted Burgers, gaussian dipole, x_max = 10, T = 0.5: long enough for
/// shocks to form, short enough to stay in the state box.
fn short_run(n: usize, kind: NumericalFluxKind, eps: f64) -> RunHistory {
    let grid = make_grid(10.0, n).unwrap();
    let u0 = project_initial(&dipole(), &grid, true).unwrap();
    let cfg = SolverConfig {
        epsilon: eps,
        numerical_flux: kind,
        cfl: 0.1,
        t_end: 0.5,
        ..Default::default()
    };
    solve(&u0, weighted(), &cfg).unwrap()
}

fn order(e: &[f64]) -> Vec<f64> {
    e.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// `Σ_k t^k/k!·(I^k u₀)(x)` with `I` the antiderivative from 0, built by
/// repeated trapezoid integration on a fine uniform grid `x_j = j·x_max/nf`.
fn zero_flux_series(x_max: f64, nf: usize, t: f64, u0: impl Fn(f64) -> f64) -> Vec<f64> {
    let h = x_max / nf as f64;
    let mut term: Vec<f64> = (0..=nf).map(|j| u0(j as f64 * h)).collect();
    let mut sum = term.clone();
    let mut coef = 1.0;
    for k in 1..400 {
        let mut next = vec![0.0; nf + 1];
        for j in 1..=nf {
            next[j] = next[j - 1] + 0.5 * h * (term[j - 1] + term[j]);
        }
        coef *= t / k as f64;
        let size = coef * next.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for (s, v) in sum.iter_mut().zip(&next) {
            *s += coef * v;
        }
        term = next;
        if k > 5 && size < 1e-15 * sum.iter().fold(0.0_f64, |a, v| a.max(v.abs())) {
            break;
        }
    }
    sum
}

#[test]
fn zero_flux_matches_series_solution_at_second_order() {
    let (x_max, t_end, nf) = (10.0, 1.0, 51_200);
    let g0 = |x: f64| (x - 5.0) * (-(x - 5.0) * (x - 5.0)).exp();
    let exact = zero_flux_series(x_max, nf, t_end, g0);
    for integrator in [Integrator::SspRk2, Integrator::SspRk3] {
        let mut errs = Vec::new();
        for n in [200usize, 400, 800] {
            let grid = make_grid(x_max, n).unwrap();
            let u0 = project_initial(&InitialData::function(g0), &grid, false).unwrap();
            let cfg = SolverConfig {
                t_end,
                integrator,
                cfl: 0.5 * 200.0 / n as f64,
                ..Default::default()
            };
            let h = solve(&u0, &FluxModel::zero(), &cfg).unwrap();
            let stride = nf / (2 * n);
            let err: f64 = h
                .last()
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| (v - exact[(2 * i + 1) * stride]).abs())
                .sum::<f64>()
                * grid.dx();
            errs.push(err);
        }
        let p = order(&errs);
        assert!(
            p.iter().all(|&q| q >= 1.8),
            "{integrator}: errors {errs:?}, orders {p:?}"
        );
    }
}

#[test]
fn heat_equation_dipole() {
    // Zero flux without source: the dipole spreads as a heat-kernel derivative.
    let (eps, t_end, w) = (0.05, 1.0, 1.0_f64);
    let exact = |x: f64| {
        let s = w + 4.0 * eps * t_end;
        (x - 5.0) * (w / s).powf(1.5) * (-(x - 5.0) * (x - 5.0) / s).exp()
    };
    let mut errs = Vec::new();
    for n in [100usize, 200, 400] {
        let grid = make_grid(10.0, n).unwrap();
        let u0 = project_initial(&dipole(), &grid, false).unwrap();
        let cfg = SolverConfig {
            epsilon: eps,
            t_end,
            include_source: false,
            ..Default::default()
        };
        let h = solve(&u0, &FluxModel::zero(), &cfg).unwrap();
        let err = h
            .last()
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - exact(grid.center(i))).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(order(&errs).iter().all(|&q| q >= 1.8), "{errs:?}");
}

fn step_data(left: f64, right: f64, at: f64) -> InitialData {
    InitialData::function(move |x| if x < at { left } else { right })
}

fn source_free(kind: NumericalFluxKind, t_end: f64) -> SolverConfig {
    SolverConfig {
        numerical_flux: kind,
        t_end,
        include_source: false,
        ..Default::default()
    }
}

#[test]
fn riemann_shock_travels_at_rankine_hugoniot_speed() {
    for kind in KINDS {
        let grid = make_grid(10.0, 400).unwrap();
        let u0 = project_initial(&step_data(1.0, 0.0, 2.0), &grid, false).unwrap();
        let h = solve(&u0, &burgers(), &source_free(kind, 1.0)).unwrap();
        let u = h.last().values();
        // Shock location: the 1/2 crossing to the right of the left fan.
        let i = (0..u.len() - 1)
            .rev()
            .find(|&i| u[i] >= 0.5 && u[i + 1] < 0.5)
            .unwrap();
        let x = grid.center(i) + grid.dx() * (u[i] - 0.5) / (u[i] - u[i + 1]);
        assert!((x - 2.5).abs() <= 2.0 * grid.dx(), "{kind}: shock at {x}");
    }
}

#[test]
fn rarefaction_converges() {
    // The L1 error of a monotone scheme on a centred fan behaves like
    // dx·log(1/dx), so the observed order only approaches 1 slowly and
    // the fixture needs dx ≤ 0.02.
    let exact = |x: f64, t: f64| ((x - 2.0) / t).clamp(0.0, 1.0);
    let mut errs = Vec::new();
    for n in [200usize, 400, 800] {
        let grid = make_grid(4.0, n).unwrap();
        let u0 = project_initial(&step_data(0.0, 1.0, 2.0), &grid, false).unwrap();
        let h = solve(
            &u0,
            &burgers(),
            &source_free(NumericalFluxKind::EngquistOsher, 1.0),
        )
        .unwrap();
        let err: f64 = h
            .last()
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - exact(grid.center(i), 1.0)).abs())
            .sum::<f64>()
            * grid.dx();
        errs.push(err);
    }
    assert!(order(&errs).iter().all(|&q| q >= 0.7), "{errs:?}");
}

#[test]
fn flux_kinds_agree_to_first_order() {
    let diffs: Vec<f64> = [100usize, 200, 400]
        .iter()
        .map(|&n| {
            let eo = short_run(n, NumericalFluxKind::EngquistOsher, 0.0);
            let ru = short_run(n, NumericalFluxKind::Rusanov, 0.0);
            l1_distance(eo.last(), ru.last()).unwrap()
        })
        .collect();
    assert!(order(&diffs).iter().all(|&q| q >= 0.8), "{diffs:?}");
}

#[test]
fn smooth_burgers_tendency_is_consistent() {
    // u = d·e^{−d²}, d = x − 5: u_t = −u·u_x + ∫₀ˣu with the integral in closed form.
    let exact = |x: f64| {
        let d = x - 5.0;
        let e = (-d * d).exp();
        -(d * e) * e * (1.0 - 2.0 * d * d) + 0.5 * ((-25.0_f64).exp() - e)
    };
    let cfg = SolverConfig::default();
    let errs: Vec<f64> = [200usize, 400, 800]
        .iter()
        .map(|&n| {
            let grid = make_grid(10.0, n).unwrap();
            let u = project_initial(&dipole(), &grid, false).unwrap();
            let r = semi_discrete_rhs(&u, &burgers(), &cfg).unwrap();
            r.iter()
                .enumerate()
                .filter(|(i, _)| (1.0..9.0).contains(&grid.center(*i)))
                .map(|(i, v)| (v - exact(grid.center(i))).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(order(&errs).iter().all(|&q| q >= 0.9), "{errs:?}");
}

#[test]
fn source_free_mean_is_conserved() {
    let grid = make_grid(10.0, 400).unwrap();
    let u0 = project_initial(&dipole(), &grid, true).unwrap();
    for kind in KINDS {
        let h = solve(&u0, weighted(), &source_free(kind, 0.5)).unwrap();
        assert!(h.max_abs_mean() < 1e-12, "{kind}: {}", h.max_abs_mean());
    }
}

#[test]
fn initial_mean_drift_is_minus_first_moment() {
    // d/dt ∫u = ∫₀^X P = −∫x·u₀ for zero-mean data; −√π/2 for the dipole.
    let target = -PI.sqrt() / 2.0;
    let errs: Vec<f64> = [200usize, 400]
        .iter()
        .map(|&n| {
            let grid = make_grid(10.0, n).unwrap();
            let u0 = project_initial(&dipole(), &grid, true).unwrap();
            let r = semi_discrete_rhs(&u0, weighted(), &SolverConfig::default()).unwrap();
            (grid.dx() * r.iter().sum::<f64>() - target).abs()
        })
        .collect();
    // Both levels sit at the e^{−25} truncation of the dipole tail.
    assert!(errs.iter().all(|&e| e < 1e-9), "{errs:?}");
}

#[test]
fn local_sup_monitor_is_stable_under_refinement() {
    let sups: Vec<f64> = [200usize, 400, 800]
        .iter()
        .map(|&n| {
            let h = short_run(n, NumericalFluxKind::EngquistOsher, 0.0);
            h.steps.iter().map(|s| s.sup_u).fold(0.0, f64::max)
        })
        .collect();
    assert!(sups.iter().all(|&s| s <= 1.1 * sups[0]), "{sups:?}");
}

#[test]
fn viscosity_sweep_forms_a_cauchy_sequence() {
    let grid = make_grid(10.0, 400).unwrap();
    let u0 = project_initial(&dipole(), &grid, true).unwrap();
    let base = SolverConfig {
        cfl: 0.1,
        t_end: 0.5,
        ..Default::default()
    };
    let r = viscosity_sweep(&u0, weighted(), &base, &[0.1, 0.05, 0.025, 0.0]).unwrap();
    assert_eq!(r.successive.len(), 3);
    assert!(r.successive[0] > r.successive[1], "{:?}", r.successive);
    assert!(
        r.to_inviscid[0] > r.to_inviscid[1] && r.to_inviscid[1] > r.to_inviscid[2],
        "{:?}",
        r.to_inviscid
    );
    let same = viscosity_sweep(&u0, weighted(), &base, &[0.05, 0.05]).unwrap();
    assert_eq!(same.successive, vec![0.0]);
    assert!(viscosity_sweep(&u0, weighted(), &base, &[0.01, 0.05]).is_err());
}

#[test]
fn runs_are_deterministic() {
    let a = short_run(200, NumericalFluxKind::EngquistOsher, 0.01);
    let b = short_run(200, NumericalFluxKind::EngquistOsher, 0.01);
    assert_eq!(a.snapshots.len(), b.snapshots.len());
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        assert_eq!(x.field, y.field);
        assert_eq!(x.primitive, y.primitive);
    }
}

#[test]
fn zero_state_is_steady() {
    let grid = make_grid(10.0, 100).unwrap();
    let u0 = project_initial(&InitialData::Zero, &grid, true).unwrap();
    for integrator in [Integrator::SspRk2, Integrator::SspRk3] {
        let cfg = SolverConfig {
            integrator,
            ..Default::default()
        };
        let h = solve(&u0, weighted(), &cfg).unwrap();
        assert!(h
            .snapshots
            .iter()
            .all(|s| s.field.values().iter().all(|&v| v == 0.0)));
    }
}

#[test]
fn standard_fixture_leaves_the_state_box() {
    // x_max = 30, T = 2: the source drives the far field out of [−8, 8]
    // before T; the fault carries the history up to the last good state.
    let grid = make_grid(30.0, 300).unwrap();
    let u0 = project_initial(&dipole(), &grid, true).unwrap();
    let cfg = SolverConfig {
        t_end: 2.0,
        ..Default::default()
    };
    match solve(&u0, weighted(), &cfg) {
        Err(Error::SolverFault { time, partial, .. }) => {
            assert!(time > 0.5 && time < 0.8, "fault at {time}");
            let last = partial.snapshots.last().unwrap();
            assert!(last.field.values().iter().all(|v| v.is_finite()));
            assert!(last.field.sup_norm() <= 8.0);
            assert!(!partial.warnings.is_empty());
        }
        other => panic!(
            "expected a solver fault, got {:?}",
            other.map(|h| h.last().sup_norm())
        ),
    }
}

fn any_model() -> impl Strategy<Value = FluxModel> {
    prop_oneof![Just(burgers()), Just(weighted().clone())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn numerical_fluxes_are_consistent(m in any_model(), x in 0.0f64..30.0, u in -8.0f64..8.0) {
        for kind in KINDS {
            prop_assert_eq!(numerical_flux_value(&m, x, u, u, kind).unwrap(), m.eval(x, u));
        }
    }

    #[test]
    fn engquist_osher_is_monotone(m in any_model(), x in 0.0f64..30.0, a in -8.0f64..8.0, b in -8.0f64..8.0, d in 0.0f64..1.0) {
        let eo = |l: f64, r: f64| numerical_flux_value(&m, x, l, r, NumericalFluxKind::EngquistOsher).unwrap();
        let base = eo(a, b);
        let tol = 1e-12 * (1.0 + base.abs());
        prop_assert!(eo(a + d, b) >= base - tol);
        prop_assert!(eo(a, b + d) <= base + tol);
    }
}
