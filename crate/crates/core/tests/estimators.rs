use benign_core::bounds::{localized_width_bound, quadratic_proxy};
use benign_core::designs::{sample_design, DesignSpec, Family};
use benign_core::estimators::{
    boundary_candidates, empirical_process_suprema, estimate_coordinate_smallball_prob,
    estimate_gaussian_width, estimate_smin_distribution, localized_sup, DEFAULT_CANDIDATES,
};
use benign_core::interpolator::RegressionInstance;
use benign_core::rng;
use benign_core::spectra::Spectrum;
use benign_core::Error;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

/// Sup of ⟨g, Σ^{1/2}α⟩ over the 2-d set, by scanning boundary directions.
fn planar_sup(l: [f64; 2], g: [f64; 2], rho: f64, r: f64) -> f64 {
    let steps = 200_000;
    (0..steps)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / steps as f64;
            let (c, s) = (t.cos(), t.sin());
            let radius = rho.min(r / (l[0] * c * c + l[1] * s * s).sqrt());
            radius * (g[0] * l[0].sqrt() * c + g[1] * l[1].sqrt() * s)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn localized_sup_matches_planar_oracle() {
    let l = [4.0, 1.0];
    let mut rng = rng::stream(31, 0);
    for (rho, r) in [(1.0, 0.5), (1.0, 1.5), (1.0, 3.0), (2.0, 1.0), (0.3, 10.0)] {
        for _ in 0..20 {
            let g = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
            let got = localized_sup(&l, &g, rho, r, 64).unwrap();
            let want = planar_sup(l, g, rho, r);
            assert!((got - want).abs() <= 1e-6 * want.max(1e-3), "rho={rho} r={r}: {got} vs {want}");
        }
    }
}

#[test]
fn localized_sup_limits() {
    let l = [3.0, 2.0, 0.5, 0.1];
    let g = [0.3, -1.2, 0.8, 2.0];
    let sig_g: f64 = l.iter().zip(&g).map(|(a, b)| a * b * b).sum::<f64>().sqrt();
    let g_norm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    // r → ∞ leaves the ρ-ball, ρ → ∞ leaves the Σ-ellipsoid.
    assert!((localized_sup(&l, &g, 2.0, f64::INFINITY, 64).unwrap() - 2.0 * sig_g).abs() < 1e-12);
    assert!((localized_sup(&l, &g, f64::INFINITY, 0.7, 64).unwrap() - 0.7 * g_norm).abs() < 1e-12);
    // Large finite values approach the same limits.
    assert!((localized_sup(&l, &g, 2.0, 1e6, 64).unwrap() - 2.0 * sig_g).abs() < 1e-6);
    assert!((localized_sup(&l, &g, 1e6, 0.7, 64).unwrap() - 0.7 * g_norm).abs() < 1e-6);
    assert_eq!(localized_sup(&l, &[0.0; 4], 1.0, 1.0, 64), Some(0.0));
}

#[test]
fn gaussian_width_is_deterministic_and_below_bound() {
    let s = Spectrum::new(vec![4.0, 2.0, 1.0, 0.5, 0.25, 0.1]).unwrap();
    let a = estimate_gaussian_width(&s, 1.0, 0.8, 4000, 64, 3).unwrap();
    let b = estimate_gaussian_width(&s, 1.0, 0.8, 4000, 64, 3).unwrap();
    assert_eq!(a.value, b.value);
    assert!(a.value <= localized_width_bound(&s, 0.8, 1.0) + 3.0 * a.stderr);
    assert!(matches!(estimate_gaussian_width(&s, 0.0, 1.0, 10, 8, 0), Err(Error::InvalidParameter { .. })));
}

fn identity_design(p: usize, seed: u64) -> DesignSpec {
    DesignSpec::new(Spectrum::identity(p).unwrap(), Family::Gaussian, seed).unwrap()
}

#[test]
fn smallball_monotone_in_epsilon_and_c0() {
    let d = identity_design(50, 12);
    let trials = 4000;
    let at = |eps: f64, c0: f64| estimate_coordinate_smallball_prob(&d, eps, c0, trials).unwrap().value;
    // Same seeds per trial: raising ε lowers every row's count and raising
    // c₀ raises the threshold, so both directions are exact on paths.
    let eps_path: Vec<f64> = [0.5, 0.6, 0.7, 0.8, 0.95].iter().map(|e| at(*e, 0.5)).collect();
    assert!(eps_path.windows(2).all(|w| w[0] <= w[1]), "{eps_path:?}");
    let c0_path: Vec<f64> = [0.3, 0.45, 0.5, 0.6].iter().map(|c| at(0.7, *c)).collect();
    assert!(c0_path.windows(2).all(|w| w[0] <= w[1]), "{c0_path:?}");
    assert!(c0_path[3] > c0_path[0]);
    assert!(matches!(
        estimate_coordinate_smallball_prob(&d, 0.5, 0.5, 10),
        Err(Error::InsufficientTrials { .. })
    ));
}

#[test]
fn smin_quantiles_decrease_in_n() {
    // Marchenko–Pastur edge √p − √N falls as N grows.
    let d = identity_design(800, 5);
    let mut medians = Vec::new();
    for n in [50usize, 100, 200] {
        let dist = estimate_smin_distribution(&d, n, 100, 0.0).unwrap();
        assert!(dist.q01 <= dist.q05 && dist.q05 <= dist.q50);
        let edge = 800f64.sqrt() - (n as f64).sqrt();
        assert!((dist.q50 - edge).abs() < 0.05 * edge, "N={n}: {} vs {edge}", dist.q50);
        assert_eq!(dist.exceed_rate, 1.0);
        medians.push(dist.q50);
    }
    assert!(medians.windows(2).all(|w| w[0] > w[1]), "{medians:?}");
    assert!(estimate_smin_distribution(&d, 800, 100, 0.0).is_err());
    assert!(estimate_smin_distribution(&d, 50, 10, 0.0).is_err());
}

fn instance(p: usize, n: usize, seed: u64) -> RegressionInstance {
    let x = sample_design(&identity_design(p, seed), n).unwrap();
    let mut rng = rng::stream(seed, 1);
    let alpha = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
    let noise = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    RegressionInstance::new(x, alpha, noise, 1.0).unwrap()
}

#[test]
fn suprema_of_single_candidates() {
    let inst = instance(30, 10, 2);
    let s = Spectrum::identity(30).unwrap();
    let zero = empirical_process_suprema(&inst, std::slice::from_ref(&inst.alpha_star), &s, 1.0, 1.0).unwrap();
    assert_eq!((zero.q_sup, zero.m_sup), (0.0, 0.0));
    let mut h = DVector::zeros(30);
    h[0] = 0.6;
    h[1] = -0.3;
    let xh: DVector<f64> = &inst.design * &h;
    let q = (xh.norm_squared() / 10.0 - 0.45).abs();
    let m = (2.0 * inst.noise.dot(&xh) / 10.0).abs();
    let got = empirical_process_suprema(&inst, &[&inst.alpha_star + &h], &s, 1.0, 1.0).unwrap();
    assert!((got.q_sup - q).abs() < 1e-12 && (got.m_sup - m).abs() < 1e-12);
    let far = &inst.alpha_star + h * 3.0;
    assert!(matches!(
        empirical_process_suprema(&inst, &[far], &s, 1.0, 1.0),
        Err(Error::CandidateOutsideLocalization { index: 0 })
    ));
}

#[test]
fn boundary_candidates_stay_below_quadratic_proxy() {
    let p = 200;
    let n = 50;
    let s = Spectrum::identity(p).unwrap();
    let (r, rho) = (1.0, 1.0);
    let proxy = quadratic_proxy(&s, r, rho, 4.0);
    let trials = 100;
    let mut below = 0;
    for t in 0..trials {
        let inst = instance(p, n, 500 + t);
        let cands = boundary_candidates(&inst.alpha_star, &s, r, rho, DEFAULT_CANDIDATES, t).unwrap();
        for c in &cands {
            let h = c - &inst.alpha_star;
            assert!(h.norm() <= rho * (1.0 + 1e-12));
        }
        let sup = empirical_process_suprema(&inst, &cands, &s, r, rho).unwrap();
        below += (sup.q_sup <= proxy) as usize;
    }
    assert!(below as f64 >= 0.95 * trials as f64, "{below}/{trials}");
}

#[test]
fn boundary_candidates_touch_the_tighter_constraint() {
    let s = Spectrum::new(vec![9.0, 4.0, 1.0]).unwrap();
    let a = DVector::from_vec(vec![0.5, 0.0, -1.0]);
    let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
    for c in boundary_candidates(&a, &s, 1.0, 2.0, 50, 9).unwrap() {
        let h = c - &a;
        let pop = (&diag * &h).norm();
        let hit_rho = (h.norm() - 2.0).abs() < 1e-12 && pop <= 1.0 + 1e-12;
        let hit_r = (pop - 1.0).abs() < 1e-12 && h.norm() <= 2.0 + 1e-12;
        assert!(hit_rho || hit_r);
    }
}
