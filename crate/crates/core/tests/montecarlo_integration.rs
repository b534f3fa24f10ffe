use mgcp_core::gcp::{gcp_pmf, GcpParams};
use mgcp_core::montecarlo::{
    estimate, estimate_covariance, estimate_histogram, mc_gcp_pmf, mc_sub_cov, mc_sub_lst, mc_sub_mean, mc_tc_mean,
    mc_tc_pgf, sample_gcp, sample_increment, sample_negbin, sample_tc, McConfig, McRng,
};
use mgcp_core::presets::baseline_model;
use mgcp_core::special::SeriesControl;
use mgcp_core::subordinator::{nb_pmf, sub_cov, sub_lst, sub_mean, SubordinatorParams};
use mgcp_core::timechanged::{tc_mean, tc_pgf, tc_pmf_grid};
use mgcp_core::Execution;
use rand::SeedableRng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn cfg(samples: u64, seed: u64) -> McConfig {
    McConfig::new(samples, seed)
}

#[test]
fn tc_samples_fit_the_pmf() {
    let m = baseline_model();
    let t = 1.0;
    let n = 1_000_000u64;
    let hist = estimate_histogram(&cfg(n, 2024), |rng| sample_tc(&m, t, rng)).unwrap();
    let grid = tc_pmf_grid(&m, 40, t, &SeriesControl::default(), Execution::Parallel).unwrap();

    // chi-square over cells with expected count ≥ 10, the rest pooled
    let mut chi2 = 0.0;
    let mut cells = 0usize;
    let (mut pooled_p, mut pooled_count) = (1.0, n as f64);
    for (cell, &p) in grid.cells.iter().zip(&grid.values) {
        let expected = p * n as f64;
        if expected < 10.0 {
            continue;
        }
        let observed = *hist.counts.get(cell).unwrap_or(&0) as f64;
        chi2 += (observed - expected).powi(2) / expected;
        cells += 1;
        pooled_p -= p;
        pooled_count -= observed;
    }
    let pooled_expected = pooled_p * n as f64;
    chi2 += (pooled_count - pooled_expected).powi(2) / pooled_expected;
    let df = cells as f64;
    let p_value = ChiSquared::new(df).unwrap().sf(chi2);
    assert!(p_value > 1e-3, "chi2 {chi2} on {df} df, p = {p_value}");

    // cellwise agreement where the probability is not negligible
    for (cell, &p) in grid.cells.iter().zip(&grid.values) {
        if p > 1e-3 {
            let e = hist.probability(cell);
            assert!(e.agrees_with(p, 3.0), "cell {cell:?}: {p} vs {} ± {}", e.value, e.std_err);
        }
    }
}

#[test]
fn negbin_sampler_matches_its_law() {
    let c = cfg(1_000_000, 5);
    let zero = estimate(&c, |rng| Ok(f64::from(sample_negbin(0.5, 1.0, rng)? == 0))).unwrap();
    assert!(zero.agrees_with(0.5, 3.0));

    let (theta, size) = (0.3, 2.5);
    let mean = estimate(&c, |rng| Ok(sample_negbin(theta, size, rng)? as f64)).unwrap();
    assert!(mean.agrees_with(size * theta / (1.0 - theta), 3.0));
    let var = estimate_covariance(&c, |rng| {
        let x = sample_negbin(theta, size, rng)? as f64;
        Ok((x, x))
    })
    .unwrap();
    assert!(var.agrees_with(size * theta / (1.0 - theta).powi(2), 3.0));
    let four = estimate(&c, |rng| Ok(f64::from(sample_negbin(theta, size, rng)? == 4))).unwrap();
    assert!(four.agrees_with(nb_pmf(theta, size, 4).unwrap(), 3.0));
}

#[test]
fn gcp_sampler_matches_the_pmf() {
    let p = GcpParams::new(vec![0.4, 0.3, 0.3]).unwrap();
    let x = 2.0;
    let c = cfg(1_000_000, 9);
    let hist = estimate_histogram(&c, |rng| Ok(vec![sample_gcp(&p, x, rng)?])).unwrap();
    for n in 0..40 {
        let want = gcp_pmf(&p, n, x).unwrap();
        if want > 1e-3 {
            assert!(hist.probability(&[n]).agrees_with(want, 3.0), "n = {n}");
        }
    }
    let mut rng = McRng::seed_from_u64(1);
    assert_eq!(sample_gcp(&p, 0.0, &mut rng).unwrap(), 0);
    assert!(mc_gcp_pmf(&p, 2, x, &cfg(200_000, 3)).unwrap().agrees_with(gcp_pmf(&p, 2, x).unwrap(), 3.0));
}

#[test]
fn subordinator_moments_and_transform() {
    let p = SubordinatorParams::new(1.2, 0.4, vec![0.7, 1.9]).unwrap();
    let t = 1.3;
    let c = cfg(1_000_000, 11);
    for i in 0..2 {
        assert!(mc_sub_mean(&p, i, t, &c).unwrap().agrees_with(sub_mean(&p, i, t).unwrap(), 3.0));
    }
    assert!(mc_sub_cov(&p, 0, 1, t, &c).unwrap().agrees_with(sub_cov(&p, 0, 1, t).unwrap(), 3.0));
    let s = [0.4, 1.1];
    assert!(mc_sub_lst(&p, &s, t, &c).unwrap().agrees_with(sub_lst(&p, &s, t).unwrap(), 3.0));
}

#[test]
fn tc_mean_and_pgf() {
    let m = baseline_model();
    let c = cfg(1_000_000, 13);
    for i in 0..2 {
        assert!(mc_tc_mean(&m, i, 1.5, &c).unwrap().agrees_with(tc_mean(&m, i, 1.5).unwrap(), 3.0));
    }
    let u = [0.3, 0.7];
    assert!(mc_tc_pgf(&m, &u, 1.0, &c).unwrap().agrees_with(tc_pgf(&m, &u, 1.0).unwrap(), 3.0));
}

#[test]
fn increments_are_small_and_uncorrelated() {
    let m = baseline_model();
    let c = cfg(1_000_000, 17);
    let still = estimate(&c, |rng| Ok(f64::from(sample_increment(&m, 1e-4, rng)?.iter().all(|&d| d == 0)))).unwrap();
    assert!(still.value > 0.999);
    // two disjoint windows of the same path are independent draws
    let cov = estimate_covariance(&c, |rng| {
        let a: u64 = sample_increment(&m, 0.5, rng)?.iter().sum();
        let b: u64 = sample_increment(&m, 0.5, rng)?.iter().sum();
        Ok((a as f64, b as f64))
    })
    .unwrap();
    assert!(cov.agrees_with(0.0, 3.0), "cov {} ± {}", cov.value, cov.std_err);
}

#[test]
fn estimates_are_reproducible_across_runs_workers_and_modes() {
    let m = baseline_model();
    let run = |workers: usize, execution: Execution| {
        let c = McConfig {
            workers,
            execution,
            ..cfg(100_000, 99)
        };
        mc_tc_pgf(&m, &[0.3, 0.7], 1.0, &c).unwrap()
    };
    let reference = run(1, Execution::Sequential);
    assert_eq!(run(1, Execution::Sequential), reference);
    assert_eq!(run(4, Execution::Parallel), reference);
    assert_eq!(run(3, Execution::Parallel), reference);
}
