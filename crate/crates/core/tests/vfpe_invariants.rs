use std::f64::consts::TAU;

use graphop_core::metrics::{d_alpha, d_bm, d_bm_series, d_fiber};
use graphop_core::summability::{fejer, regularize};
use graphop_core::torus::circle_dist;
use graphop_core::vfpe::{
    continuity_in_x_diagnostic, flow_map, picard_solve_from, refinement_trend, FieldEvaluator, PicardStart,
};
use graphop_core::{
    picard_solve, quantile_family, CouplingFunction, CouplingSpec, Graphop, InitialDensity, MeasureFamily,
    PhaseMeasure, PicardConfig, TorusGrid,
};
use proptest::prelude::*;

const CELLS: usize = 8;

fn family_strategy() -> impl Strategy<Value = MeasureFamily> {
    prop::collection::vec(prop::collection::vec((0.0..TAU, 0.0..1.0f64), 1..6), CELLS).prop_map(|fibers| {
        let fibers = fibers
            .into_iter()
            .map(|f| {
                let total: f64 = f.iter().map(|p| p.1).sum::<f64>().max(1e-9);
                let scale = 0.999 / total.max(1.0);
                PhaseMeasure::new(f.into_iter().map(|(u, w)| (u, w * scale)).collect()).unwrap()
            })
            .collect();
        MeasureFamily::new(TorusGrid::new(CELLS).unwrap(), 1.0, fibers).unwrap()
    })
}

fn graphops() -> Vec<Graphop> {
    vec![
        Graphop::constant(1.0).unwrap(),
        Graphop::atomic_shift(0.125).unwrap(),
        Graphop::arc_band(0.0, 0.1, 5.0).unwrap(),
        Graphop::mixture(vec![
            (0.5, Graphop::atomic_shift(0.125).unwrap()),
            (0.5, Graphop::arc_band(0.0, 0.1, 5.0).unwrap()),
        ])
        .unwrap(),
    ]
}

fn couplings() -> Vec<CouplingSpec> {
    vec![
        CouplingSpec::sine(1.0).unwrap(),
        CouplingSpec::new(CouplingFunction::SineSecondHarmonic { beta: 0.7 }, 0.5).unwrap(),
    ]
}

fn probes() -> Vec<f64> {
    (0..16).map(|k| (k as f64 + 0.3) * TAU / 16.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn field_is_lipschitz_in_the_measure(mu in family_strategy(), ka in family_strategy()) {
        for a in graphops() {
            for c in couplings() {
                let vm = FieldEvaluator::from_family(&a, &c, &mu).unwrap();
                let vk = FieldEvaluator::from_family(&a, &c, &ka).unwrap();
                for x in 0..CELLS {
                    let d = d_fiber(&a, &mu, &ka, x).unwrap();
                    for u in probes() {
                        let diff = (vm.at_stamp(0, u, x).unwrap() - vk.at_stamp(0, u, x).unwrap()).abs();
                        prop_assert!(diff <= 2.0 * c.strength * d + 1e-9, "{diff} > 2C {d}");
                    }
                }
            }
        }
    }

    #[test]
    fn node_integrated_field_difference(mu in family_strategy(), ka in family_strategy()) {
        let grid = TorusGrid::new(CELLS).unwrap();
        let dm = d_bm(&mu, &ka).unwrap();
        for a in graphops() {
            let norm = a.norm_1_to_1(&grid);
            for c in couplings() {
                let vm = FieldEvaluator::from_family(&a, &c, &mu).unwrap();
                let vk = FieldEvaluator::from_family(&a, &c, &ka).unwrap();
                for u in probes() {
                    let lhs: f64 = (0..CELLS)
                        .map(|x| (vm.at_stamp(0, u, x).unwrap() - vk.at_stamp(0, u, x).unwrap()).abs())
                        .sum::<f64>()
                        / CELLS as f64;
                    prop_assert!(lhs <= 2.0 * c.strength * norm * dm + 1e-9);
                }
            }
        }
    }

    #[test]
    fn field_is_bounded_and_lipschitz_in_phase(mu in family_strategy()) {
        for a in graphops() {
            for c in couplings() {
                let v = FieldEvaluator::from_family(&a, &c, &mu).unwrap();
                let bound = c.strength * c.function.sup_norm() * mu.cap() * a.gamma();
                prop_assert!((v.bound() - bound).abs() <= 1e-12);
                let lip = c.strength * c.function.lipschitz_bound() * mu.cap() * a.gamma();
                let h = 1e-4;
                for x in 0..CELLS {
                    for u in probes() {
                        let v0 = v.at_stamp(0, u, x).unwrap();
                        let v1 = v.at_stamp(0, u + h, x).unwrap();
                        prop_assert!(v0.abs() <= bound + 1e-12);
                        prop_assert!((v1 - v0).abs() <= lip * h * (1.0 + 1e-6) + 1e-15);
                    }
                }
            }
        }
    }
}

fn shift_instance(cells: usize, particles: usize) -> (Graphop, MeasureFamily, CouplingSpec) {
    let grid = TorusGrid::new(cells).unwrap();
    (
        Graphop::atomic_shift(0.125).unwrap(),
        quantile_family(&InitialDensity::bump(1.0, 1.0), grid, particles).unwrap(),
        CouplingSpec::sine(1.0).unwrap(),
    )
}

#[test]
fn flow_lipschitz_constant_is_bounded_by_the_growth_factor() {
    let (a, mu0, c) = shift_instance(16, 50);
    let state = picard_solve(&a, &mu0, &c, &PicardConfig::default()).unwrap();
    let field = FieldEvaluator::from_trajectory(&a, &c, &state.trajectory().unwrap()).unwrap();
    let bound = (1.0 * mu0.cap() * a.gamma()).exp() * 1.001;
    let starts: Vec<f64> = (0..64).map(|k| k as f64 * TAU / 64.0).collect();
    let delta = 1e-3;
    let shifted: Vec<f64> = starts.iter().map(|u| u + delta).collect();
    let mut worst: f64 = 0.0;
    for cell in 0..16 {
        let p = flow_map(&field, cell, &starts, 0.0, 1.0, 0.01).unwrap();
        let q = flow_map(&field, cell, &shifted, 0.0, 1.0, 0.01).unwrap();
        for (x, y) in p.iter().zip(&q) {
            worst = worst.max(circle_dist(*x, *y, TAU) / delta);
        }
    }
    assert!(worst <= bound, "{worst} > {bound}");
    assert!(worst > 1.0, "the instance should stretch some pair, got {worst}");
}

#[test]
fn limit_does_not_depend_on_the_start() {
    let (a, mu0, c) = shift_instance(16, 64);
    let cfg = PicardConfig::default();
    let one = picard_solve(&a, &mu0, &c, &cfg).unwrap();
    // rigidly rotated start, far from the solution
    let times = cfg.stamp_times();
    let start: Vec<Vec<Vec<f64>>> = times
        .iter()
        .map(|t| {
            mu0.fibers()
                .iter()
                .map(|f| f.positions().map(|u| u + 2.0 * t + 1.0).collect())
                .collect()
        })
        .collect();
    let two = picard_solve_from(&a, &mu0, &c, &cfg, PicardStart::Positions(start)).unwrap();
    let gap = d_alpha(&one.trajectory().unwrap(), &two.trajectory().unwrap(), &a, one.alpha).unwrap();
    assert!(gap <= 2.0 * cfg.tol, "{gap}");
    assert!(two.iterations >= one.iterations);
}

#[test]
fn weights_are_carried_unchanged() {
    let (a, mu0, c) = shift_instance(8, 40);
    let s = picard_solve(&a, &mu0, &c, &PicardConfig::default()).unwrap();
    let traj = s.trajectory().unwrap();
    for fam in traj.families() {
        for (f, f0) in fam.fibers().iter().zip(mu0.fibers()) {
            assert!((f.mass() - f0.mass()).abs() <= 1e-12);
        }
    }
}

#[test]
fn regularized_solutions_approach_the_limit() {
    let (a, mu0, c) = shift_instance(16, 100);
    let cfg = PicardConfig::default();
    let base = picard_solve(&a, &mu0, &c, &cfg).unwrap().trajectory().unwrap();
    let medians: Vec<f64> = [4, 9, 19, 49]
        .iter()
        .map(|&n| {
            let k = fejer(n);
            let ar = regularize(&a, &k, &TorusGrid::new(k.default_resolution()).unwrap()).unwrap();
            let s = picard_solve(&ar, &mu0, &c, &cfg).unwrap().trajectory().unwrap();
            let mut series = d_bm_series(&s, &base).unwrap();
            series.sort_by(f64::total_cmp);
            series[series.len() / 2]
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}

#[test]
fn continuity_modulus_shrinks_under_refinement() {
    let c = CouplingSpec::sine(1.0).unwrap();
    let a = Graphop::atomic_shift(0.125).unwrap();
    let report = |cells| {
        let mu0 = quantile_family(&InitialDensity::bump(1.0, 1.0), TorusGrid::new(cells).unwrap(), 64).unwrap();
        let cfg = PicardConfig {
            stamps: 10,
            ..PicardConfig::default()
        };
        continuity_in_x_diagnostic(&picard_solve(&a, &mu0, &c, &cfg).unwrap().trajectory().unwrap())
    };
    let (coarse, fine, shrinks) = refinement_trend(&report(32), &report(64));
    assert!(shrinks, "{coarse} -> {fine}");
}
