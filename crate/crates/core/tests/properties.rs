use proptest::prelude::*;

use syment::cyclic_test::joint_distribution;
use syment::estimators::{allocate, newton_girard_extrapolate, AllocMode, Method};
use syment::measures::{
    accept, accept_spectrum, accept_symmetric_partition, accept_symmetric_recurrence,
    accept_symmetric_spectral, max_entanglement_bound,
};
use syment::{GroupKind, PureState, Spectrum};

/// Dirichlet(1, ..., 1) spectrum from uniform draws.
fn dirichlet(u: &[f64]) -> Spectrum {
    let e: Vec<f64> = u.iter().map(|x| -x.ln()).collect();
    let total: f64 = e.iter().sum();
    Spectrum::new(e.iter().map(|x| x / total).collect()).unwrap()
}

fn spectrum_strategy(max_rank: usize) -> impl Strategy<Value = Spectrum> {
    prop::collection::vec(1e-6f64..1.0, 1..=max_rank).prop_map(|u| dirichlet(&u))
}

fn group_strategy() -> impl Strategy<Value = GroupKind> {
    prop::sample::select(GroupKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn symmetric_routes_agree(spec in spectrum_strategy(8), k in 1usize..=20) {
        let tau = spec.moments(k);
        let p = accept_symmetric_partition(&tau, k).unwrap();
        let r = accept_symmetric_recurrence(&tau, k).unwrap();
        let h = accept_symmetric_spectral(&spec, k);
        prop_assert!((p - r).abs() <= 1e-10);
        prop_assert!((r - h).abs() <= 1e-10);
    }

    #[test]
    fn group_chain(spec in spectrum_strategy(8), k in 2usize..=12) {
        let tau = spec.moments(k);
        let s = accept(&tau, GroupKind::Symmetric, k).unwrap();
        let d = accept(&tau, GroupKind::Dihedral, k).unwrap();
        let c = accept(&tau, GroupKind::Cyclic, k).unwrap();
        prop_assert!(tau.get(k).unwrap() <= s + 1e-12);
        prop_assert!(s <= d + 1e-12);
        prop_assert!(d <= c + 1e-12);
        prop_assert!(c <= 1.0 + 1e-12);
    }

    #[test]
    fn symmetric_monotone_in_k(spec in spectrum_strategy(8)) {
        let mut prev = 1.0;
        for k in 2..=20 {
            let c = accept_spectrum(&spec, GroupKind::Symmetric, k).unwrap();
            prop_assert!(c <= prev + 1e-12);
            prev = c;
        }
    }

    #[test]
    fn separable_spectra_accept(k in 1usize..=30, g in group_strategy()) {
        let one = Spectrum::new(vec![1.0]).unwrap();
        prop_assert_eq!(accept_spectrum(&one, g, k).unwrap(), 1.0);
    }

    /// A T-transform moves mass from a larger to a smaller eigenvalue, so
    /// the result is majorized by the input.
    #[test]
    fn schur_convexity(spec in spectrum_strategy(6), i in 0usize..6, j in 0usize..6, t in 0.0f64..1.0, k in 2usize..=10) {
        let mu = spec.eigenvalues().to_vec();
        let (i, j) = (i % mu.len(), j % mu.len());
        let mut lambda = mu.clone();
        lambda[i] = t * mu[i] + (1.0 - t) * mu[j];
        lambda[j] = (1.0 - t) * mu[i] + t * mu[j];
        let lambda = Spectrum::new(lambda).unwrap();
        let c_lambda = accept_spectrum(&lambda, GroupKind::Symmetric, k).unwrap();
        let c_mu = accept_spectrum(&spec, GroupKind::Symmetric, k).unwrap();
        prop_assert!(c_lambda <= c_mu + 1e-12);
    }

    #[test]
    fn bounds_hold(seed in 0u64..10_000, k in 2usize..=8, g in group_strategy()) {
        let s = PureState::haar_random(4, 2, seed).unwrap();
        for subset in [vec![0], vec![0, 1], vec![1, 3]] {
            let c = accept_spectrum(&s.reduced_spectrum(&subset).unwrap(), g, k).unwrap();
            let bound = max_entanglement_bound(g, k, 2, subset.len()).unwrap();
            prop_assert!(1.0 - c <= bound + 1e-12);
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn continuity(seed in 0u64..10_000, eps in 0.0f64..0.3, k in 2usize..=10, g in group_strategy()) {
        let a = PureState::haar_random(3, 2, seed).unwrap();
        let b = PureState::haar_random(3, 2, seed + 1_000_000).unwrap();
        let mixed: Vec<_> = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x * (1.0 - eps) + y * eps).collect();
        let c = PureState::normalized(3, 2, mixed).unwrap();
        let t = a.trace_distance(&c);
        let ca = accept_spectrum(&a.reduced_spectrum(&[0]).unwrap(), g, k).unwrap();
        let cc = accept_spectrum(&c.reduced_spectrum(&[0]).unwrap(), g, k).unwrap();
        prop_assert!((ca - cc).abs() <= (k as f64).sqrt() * t + 1e-9);
    }

    #[test]
    fn newton_girard_reproduces_moments(spec in spectrum_strategy(6)) {
        let r = spec.rank();
        let direct = spec.moments(20);
        let ext = newton_girard_extrapolate(&spec.moments(r), r, 20).unwrap();
        for l in 1..=20 {
            prop_assert!((ext.get(l).unwrap() - direct.get(l).unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn allocation_conserves_budget(
        k in 2usize..=12,
        n_tot in 1_000u64..10_000_000,
        g in group_strategy(),
        m in prop::sample::select(Method::ALL.to_vec()),
        equal in any::<bool>(),
    ) {
        let mode = if equal { AllocMode::Equal } else { AllocMode::Table };
        let plan = allocate(g, m, k, n_tot, mode).unwrap();
        let used: u64 = plan.counts.iter().map(|(&j, &c)| j as u64 * c).sum();
        prop_assert_eq!(used, plan.total_copies);
        prop_assert!(used <= n_tot);
        prop_assert!(n_tot - used < k as u64);
        prop_assert!(plan.counts.values().all(|&c| c > 0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cyclic_marginals(seed in 0u64..10_000, n in 2usize..=3, k in 2usize..=4) {
        let s = PureState::haar_random(n, 2, seed).unwrap();
        let dist = joint_distribution(&s, k).unwrap();
        let total: f64 = dist.probs().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        prop_assert!(dist.probs().iter().all(|&p| p >= 0.0));
        for s_size in 1..n {
            for subset in syment::combinatorics::subsets_of_size(n, s_size) {
                let spec = s.reduced_spectrum(&subset).unwrap();
                let exact = accept_spectrum(&spec, GroupKind::Cyclic, k).unwrap();
                prop_assert!((dist.marginal(&subset).unwrap() - exact).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn reduced_spectra_are_probability_vectors(seed in 0u64..10_000, d in 2usize..=3) {
        let s = PureState::haar_random(3, d, seed).unwrap();
        for subset in [vec![0], vec![2], vec![0, 2]] {
            let spec = s.reduced_spectrum(&subset).unwrap();
            let total: f64 = spec.eigenvalues().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(spec.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
