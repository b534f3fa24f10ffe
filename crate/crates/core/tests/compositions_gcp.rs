use mgcp_core::compositions::{count_compositions, enumerate_compositions, CompositionCache};
use mgcp_core::gcp::{gcp_mean_var, gcp_pgf, gcp_pmf, multi_gcp_pmf, GcpParams, MultiGcpParams};
use proptest::prelude::*;
use statrs::distribution::{Discrete, Poisson};

fn colex_key(parts: &[u64]) -> Vec<u64> {
    parts.iter().rev().copied().collect()
}

proptest! {
    #[test]
    fn enumeration_is_complete_ordered_and_weighted(k in 1usize..=6, n in 0u64..=24) {
        let all: Vec<_> = enumerate_compositions(k, n).unwrap().collect();
        prop_assert_eq!(all.len() as u128, count_compositions(k, n).unwrap());
        for c in &all {
            let w: u64 = c.parts.iter().enumerate().map(|(j, &p)| (j as u64 + 1) * p).sum();
            prop_assert_eq!(w, n);
            prop_assert_eq!(c.eta, c.parts.iter().sum::<u64>());
        }
        // strictly decreasing in reversed-lexicographic order of the large sizes,
        // hence no duplicates
        for pair in all.windows(2) {
            prop_assert!(colex_key(&pair[0].parts) < colex_key(&pair[1].parts));
        }
    }

    #[test]
    fn cache_returns_the_same_sets(k in 1usize..=5, n in 0u64..=15) {
        let cache = CompositionCache::new(8);
        let a = cache.get(k, n).unwrap();
        let b = cache.get(k, n).unwrap();
        prop_assert!(std::sync::Arc::ptr_eq(&a, &b));
        let direct: Vec<_> = enumerate_compositions(k, n).unwrap().collect();
        prop_assert_eq!(&*a, &direct);
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gcp_pmf_normalizes_and_matches_pgf(
        rates in prop::collection::vec(0.05f64..1.0, 1..=3),
        t in prop::sample::select(vec![0.1, 1.0, 5.0]),
    ) {
        let p = GcpParams::new(rates).unwrap();
        // M(t) ≤ k·J with J ~ Poisson(λt) the number of jumps; mean + 12 sd
        // alone is too short when λt is small
        let m = p.total_rate() * t;
        let jumps = Poisson::new(m).unwrap();
        // Pr{J > j} ≤ pmf(j+1) / (1 − m/(j+2)) once j + 2 > m
        let j_max = (0u64..)
            .find(|&j| (j + 2) as f64 > 2.0 * m && 2.0 * jumps.pmf(j + 1) < 1e-12)
            .unwrap();
        let top = p.k() as u64 * j_max;
        let pmf: Vec<f64> = (0..=top).map(|n| gcp_pmf(&p, n, t).unwrap()).collect();
        let mass: f64 = pmf.iter().sum();
        prop_assert!((1.0 - 1e-10..=1.0 + 1e-10).contains(&mass), "mass {mass}");
        for u in [0.0f64, 0.5, -0.5, 1.0] {
            let series: f64 = pmf.iter().enumerate().map(|(n, p)| u.powi(n as i32) * p).sum();
            let closed = gcp_pgf(&p, u, t).unwrap();
            prop_assert!((series - closed).abs() <= 1e-10, "u={u}: {series} vs {closed}");
        }
    }

    #[test]
    fn single_size_is_poisson(rate in 0.01f64..10.0, t in 0.01f64..10.0, n in 0u64..=50) {
        let p = GcpParams::poisson(rate).unwrap();
        let m = rate * t;
        let poisson = (1..=n).fold((-m).exp(), |acc, i| acc * m / i as f64);
        prop_assume!(poisson > 1e-290);
        let got = gcp_pmf(&p, n, t).unwrap();
        prop_assert!((got - poisson).abs() <= 1e-14 * poisson, "{got} vs {poisson}");
    }
}

#[test]
fn enumeration_examples() {
    let parts = |k, n| -> Vec<Vec<u64>> { enumerate_compositions(k, n).unwrap().map(|c| c.parts).collect() };
    assert_eq!(parts(2, 2), vec![vec![2, 0], vec![0, 1]]);
    assert_eq!(parts(4, 0), vec![vec![0, 0, 0, 0]]);
    assert_eq!(
        parts(3, 4),
        vec![vec![4, 0, 0], vec![2, 1, 0], vec![0, 2, 0], vec![1, 0, 1]]
    );
    assert_eq!(count_compositions(1, 17).unwrap(), 1);
    assert_eq!(count_compositions(2, 5).unwrap(), 3);
}

#[test]
fn gcp_examples() {
    let pair = MultiGcpParams::from_rates(vec![vec![1.0], vec![1.0]]).unwrap();
    assert!((multi_gcp_pmf(&pair, &[1, 1], 1.0).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
    let two = GcpParams::new(vec![0.5, 0.5]).unwrap();
    let (m, v) = gcp_mean_var(&two, 1.0);
    assert!((m - 1.5).abs() < 1e-15 && (v - 2.5).abs() < 1e-15);
    assert_eq!(gcp_mean_var(&two, 0.0), (0.0, 0.0));
    let series: f64 = (0..=60).map(|n| gcp_pmf(&two, n, 1.0).unwrap() * 0.5f64.powi(n as i32)).sum();
    assert!((series - gcp_pgf(&two, 0.5, 1.0).unwrap()).abs() < 1e-14);
}
