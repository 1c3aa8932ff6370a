mod common;

use bethe_zeta::diagnostics::{self, FactorTable, TrajectoryOptions, WeightCache, WeightKind, WeightOptions};
use bethe_zeta::experiments::{self, uniform_ising};
use bethe_zeta::{generators, ModelSpec, VertexKind};
use nalgebra::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spin_table(log: Vec<f64>) -> FactorTable {
    let n = log.len().trailing_zeros() as usize;
    FactorTable::new(vec![2; n], log).unwrap()
}

/// `N_ij` of a three-spin table by direct enumeration of both role assignments.
fn n_oracle(log: &[f64], i: usize, j: usize) -> f64 {
    let k = 3 - i - j;
    let at = |xi: usize, xj: usize, xk: usize| {
        let mut s = [0usize; 3];
        s[i] = xi;
        s[j] = xj;
        s[k] = xk;
        log[s[0] * 4 + s[1] * 2 + s[2]]
    };
    let mut best: f64 = 0.0;
    for (a, a2) in [(0, 1), (1, 0)] {
        for (b, b2) in [(0, 1), (1, 0)] {
            for g in 0..2 {
                for g2 in 0..2 {
                    let one = at(a, b, g) + at(a2, b2, g2) - at(a2, b, g) - at(a, b2, g2);
                    let two = at(a, b, g) + at(a2, b2, g2) - at(a, b2, g) - at(a2, b, g2);
                    best = best.max((one / 4.0).tanh()).max((two / 4.0).tanh());
                }
            }
        }
    }
    best
}

/// Largest `|Corr[x_i, x_j]|` seen over random positive unary reweightings.
fn w_lower_bound(log: &[f64], i: usize, j: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut best: f64 = 0.0;
    for _ in 0..4000 {
        let f: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
        let mut w = [0.0; 8];
        for s in 0..8 {
            let x = [s >> 2 & 1, s >> 1 & 1, s & 1];
            w[s] = (log[s] + (0..3).map(|m| if x[m] == 0 { f[m] } else { 0.0 }).sum::<f64>()).exp();
        }
        let z: f64 = w.iter().sum();
        let spin = |s: usize, m: usize| if (s >> (2 - m)) & 1 == 0 { 1.0 } else { -1.0 };
        let e = |fun: &dyn Fn(usize) -> f64| (0..8).map(|s| w[s] * fun(s)).sum::<f64>() / z;
        let (mi, mj) = (e(&|s| spin(s, i)), e(&|s| spin(s, j)));
        let c = e(&|s| spin(s, i) * spin(s, j)) - mi * mj;
        best = best.max(c.abs() / ((1.0 - mi * mi) * (1.0 - mj * mj)).sqrt());
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn n_weight_by_enumeration(log in prop::collection::vec(-1.5f64..1.5, 8), i in 0usize..3, d in 1usize..3) {
        let j = (i + d) % 3;
        let t = spin_table(log.clone());
        let n = diagnostics::n_weight_table(&t, i, j).unwrap();
        prop_assert!((n - n_oracle(&log, i, j)).abs() < 1e-12);
        prop_assert!((n - diagnostics::n_weight_table(&t, j, i).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn w_weight_is_bracketed(log in prop::collection::vec(-1.5f64..1.5, 8), seed in any::<u64>()) {
        let t = spin_table(log.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = diagnostics::w_weight_table(&t, 0, 1, &WeightOptions::default()).unwrap();
        let n = diagnostics::n_weight_table(&t, 0, 1).unwrap();
        prop_assert!(w.value <= n + 1e-6);
        prop_assert!(w.value >= w_lower_bound(&log, 0, 1, &mut rng) - 1e-6);
    }
}

#[test]
fn pairwise_weights_are_tanh_of_coupling() {
    for j in [-1.7, -0.4, 0.0, 0.25, 1.3] {
        let log = vec![j + 0.3 - 0.2, -j + 0.3 + 0.2, -j - 0.3 - 0.2, j - 0.3 + 0.2];
        let t = FactorTable::new(vec![2, 2], log).unwrap();
        let n = diagnostics::n_weight_table(&t, 0, 1).unwrap();
        let w = diagnostics::w_weight_table(&t, 0, 1, &WeightOptions::default()).unwrap();
        let want = f64::tanh(f64::abs(j));
        assert!((n - want).abs() < 1e-12);
        assert!((w.value - want).abs() < 1e-4);
    }
}

#[test]
fn nelder_mead_finds_the_rosenbrock_minimum() {
    let (x, v, _, converged) = diagnostics::nelder_mead(
        |p| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2),
        &[-1.2, 1.0],
        0.5,
        5000,
        1e-12,
    );
    assert!(converged && v < 1e-8);
    assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3);
}

#[test]
fn trees_are_always_certified() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = generators::random_pairwise_tree(&mut rng, 6);
    let model = ModelSpec::ising(g, &[3.0; 5], &[0.5; 6]).unwrap();
    let mut cache = WeightCache::new(WeightOptions::default());
    for kind in [WeightKind::W, WeightKind::N] {
        let c = diagnostics::uniqueness_certificate(&model, kind, &mut cache).unwrap();
        assert!(c.certified && c.rho < 1e-6, "{}", c.rho);
    }
}

#[test]
fn cycle_certificate_matches_closed_form() {
    // ρ(𝓜(u)) on a cycle is the product of the weights around it, to the power 1/n
    let model = uniform_ising(&generators::cycle(5), 0.9).unwrap();
    let mut cache = WeightCache::new(WeightOptions::default());
    let n = diagnostics::uniqueness_certificate(&model, WeightKind::N, &mut cache).unwrap();
    assert!((n.rho - 0.9f64.tanh()).abs() < 1e-9);
    assert!(n.certified);
}

#[test]
fn stability_flags_from_spectra() {
    let c = |re: f64, im: f64| Complex::new(re, im);
    let s = diagnostics::stability_from_spectrum(vec![c(0.5, 0.0), c(-0.9, 0.1)], 0.0);
    assert!(s.locally_stable && s.stable_with_damping && s.local_min_certified && !s.marginal);
    let s = diagnostics::stability_from_spectrum(vec![c(-1.2, 0.0)], 0.0);
    assert!(!s.locally_stable && s.stable_with_damping && s.local_min_certified);
    let s = diagnostics::stability_from_spectrum(vec![c(1.3, 0.0)], 0.0);
    assert!(!s.stable_with_damping && !s.local_min_certified);
    let s = diagnostics::stability_from_spectrum(vec![c(0.0, 1.0)], 0.0);
    assert!(s.marginal && !s.locally_stable);
}

#[test]
fn one_cycle_trajectories_have_no_onset() {
    let grid = diagnostics::t_grid(2.0, 40);
    let opts = TrajectoryOptions::default();
    for g in [generators::cycle(3), generators::star(4)] {
        let tr = diagnostics::trajectory(|t| uniform_ising(&g, t), &grid, &opts).unwrap();
        assert!(tr.truncated.is_none());
        assert!(tr.onset_interval.is_none() && tr.hessian_interval.is_none());
        assert!(tr.rows.iter().all(|r| r.stable && r.min_eig_restricted_hessian > 0.0));
    }
}

#[test]
fn torus_onset_brackets_the_critical_coupling() {
    let tr = experiments::torus_ising_trajectory(3, 3, &diagnostics::t_grid(0.5, 100), &TrajectoryOptions::default()).unwrap();
    let (lo, hi) = tr.onset_interval.unwrap();
    let target = (1.0f64 / 3.0).atanh();
    assert!(lo < target && target <= hi);
    assert_eq!(tr.onset_interval, tr.hessian_interval);
}

#[test]
fn weight_cache_is_permutation_aware() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let fam = bethe_zeta::family::ExpFamily::new(&[VertexKind::Spin; 3]).unwrap();
    let theta = nalgebra::DVector::from_fn(fam.dim(), |_, _| rng.random_range(-1.0..1.0));
    let t = FactorTable::from_family(&fam, &theta).unwrap();
    let mut cache = WeightCache::new(WeightOptions::default());
    let a = cache.weight(WeightKind::N, &t, 0, 2).unwrap();
    let p = t.permuted(&[2, 1, 0]);
    let b = cache.weight(WeightKind::N, &p, 2, 0).unwrap();
    assert!((a - b).abs() < 1e-14);
    assert!((a - diagnostics::n_weight_table(&t, 0, 2).unwrap()).abs() < 1e-14);
}
