//! Cross-checks between the analytic evaluators, their closed forms, and
//! the Monte Carlo oracle. Each check reports an observed discrepancy and
//! the tolerance it is held to.

use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::Result;
use crate::exec::Execution;
use crate::gcp::{gcp_pmf, GcpParams, MultiGcpParams};
use crate::montecarlo::{
    mc_failure_survival, mc_gcp_pmf, mc_hazard, mc_sub_codifference, mc_sub_cov, mc_sub_lst, mc_sub_mean,
    mc_tc_codifference, mc_tc_cov, mc_tc_pgf, mc_tc_pmf, McConfig, McRng,
};
use crate::presets::{baseline_model, baseline_model_with_lambda, baseline_shock, geometric, small_hypergeometric};
use crate::shock::{
    cause_probability, failure_subdensity, failure_survival, hazard_rate, total_failure_density, QuadControl,
    ShockModel,
};
use crate::special::{CompensatedSum, SeriesControl};
use crate::subordinator::{
    de1_residual, de2_psi_minus_one, de2_residual, sub_codifference, sub_cov, sub_lst, sub_mean, SubordinatorParams,
};
use crate::threshold::ThresholdDistribution;
use crate::timechanged::{
    mz_pmf, mz_pmf_component, tc_codifference, tc_cov, tc_levy_grid, tc_pgf, tc_pgf_log_base,
    tc_pmf, tc_pmf_grid, tc_pmf_zero, total_count_moments, TcModelParams,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    /// Discrepancy measure; the check passes when it is at most `tolerance`.
    pub observed: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(suite: &'static str, name: impl Into<String>, observed: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            suite,
            name: name.into(),
            observed,
            tolerance,
            passed: observed <= tolerance,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Analytic,
    Pde,
    Mc,
    Shock,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub mc: McConfig,
    /// Increment draws per hazard configuration.
    pub hazard_samples: u64,
    pub ctl: SeriesControl,
    pub exec: Execution,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            mc: McConfig::default(),
            hazard_samples: 10_000_000,
            ctl: SeriesControl::default(),
            exec: Execution::Parallel,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Analytic {
        out.extend(zero_state_consistency(opts)?);
        out.extend(normalization(opts)?);
        out.extend(levy_exponent(opts)?);
        out.extend(threshold_oracle()?);
        out.extend(reductions()?);
    }
    if all || suite == Suite::Pde {
        out.extend(pde_residuals()?);
    }
    if all || suite == Suite::Mc {
        out.extend(mc_master(opts)?);
    }
    if all || suite == Suite::Shock {
        out.extend(hazard_limit(opts)?);
        out.extend(shock_calculus(opts)?);
        out.extend(monotonicity(opts)?);
    }
    Ok(out)
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn random_model(rng: &mut McRng) -> Result<TcModelParams> {
    let q = rng.random_range(1..=3usize);
    let rates = (0..q)
        .map(|_| {
            let k = rng.random_range(1..=3usize);
            (0..k).map(|_| rng.random_range(0.1..2.0)).collect()
        })
        .collect();
    let a = (0..q).map(|_| rng.random_range(0.5..2.0)).collect();
    TcModelParams::new(
        MultiGcpParams::from_rates(rates)?,
        SubordinatorParams::new(rng.random_range(0.3..2.0), rng.random_range(0.05..0.95), a)?,
    )
}

/// `Pr{𝓜̄(t) = 0̄}` from the series, the pgf at the origin, and the closed form.
pub fn zero_state_consistency(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = McRng::seed_from_u64(opts.mc.seed ^ 0x2E80);
    let mut out = Vec::new();
    for case in 0..20 {
        let m = random_model(&mut rng)?;
        let t = rng.random_range(0.1..3.0);
        let zero = vec![0; m.q()];
        let series = tc_pmf(&m, &zero, t, &opts.ctl)?.value;
        let pgf = tc_pgf(&m, &vec![0.0; m.q()], t)?;
        let closed = tc_pmf_zero(&m, t);
        let err = rel_err(series, pgf).max(rel_err(series, closed));
        out.push(Check::new(
            "analytic",
            format!("zero state, random set {case}"),
            err,
            1e-12,
            format!("q={} t={t:.3} p={series:.6e}", m.q()),
        ));
    }
    Ok(out)
}

/// Mass over `Σn_i ≤ N` plus truncation bounds, baseline parameters.
pub fn normalization(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let m = baseline_model();
    let mut out = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        let (mean, var) = total_count_moments(&m, t)?;
        let n = 4 * (mean + 12.0 * var.sqrt()).ceil() as u64;
        let grid = tc_pmf_grid(&m, n, t, &opts.ctl, opts.exec)?;
        let mass = grid.total() + grid.tail_bound;
        out.push(Check::new(
            "analytic",
            format!("normalization t={t}"),
            (1.0 - mass).max(0.0),
            1e-6,
            format!("N={n} cells={} mass={mass:.15}", grid.cells.len()),
        ));
    }
    Ok(out)
}

/// `Σ_{n̄≻0̄} (Πu_i^{n_i} − 1) ν(n̄)` against `λ ln((1−θ)/(ΠD_i − θ))`.
///
/// The truncation is grown until the Lévy mass left out, which bounds the
/// error, is below `1e-8`.
pub fn levy_exponent(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let m = baseline_model();
    let u = [0.3, 0.7];
    let exact = m.lambda() * tc_pgf_log_base(&m, &u);
    let total_mass = -m.lambda() * tc_pgf_log_base(&m, &[0.0, 0.0]);
    let truncated = |n: u64| -> Result<(f64, f64)> {
        let grid = tc_levy_grid(&m, n, &opts.ctl, opts.exec)?;
        let mut sum = CompensatedSum::default();
        let mut seen = CompensatedSum::default();
        for (c, v) in grid.cells.iter().zip(&grid.values) {
            sum.add((u[0].powi(c[0] as i32) * u[1].powi(c[1] as i32) - 1.0) * v);
            seen.add(*v);
        }
        Ok((sum.value(), (total_mass - seen.value()).max(0.0) + grid.tail_bound))
    };
    let (at30, left30) = truncated(30)?;
    let mut n = 60;
    let (value, left) = loop {
        let (v, left) = truncated(n)?;
        if left <= 1e-8 || n >= 480 {
            break (v, left);
        }
        n *= 2;
    };
    Ok(vec![Check::new(
        "analytic",
        "levy exponent at u=(0.3,0.7)",
        (value - exact).abs(),
        1e-6,
        format!(
            "N={n} mass left {left:.2e}; at N=30 error {:.2e} with mass left {left30:.2e}",
            (at30 - exact).abs()
        ),
    )])
}

fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Hypergeometric survival against exact integer tail sums, all `N ≤ 20`.
pub fn threshold_oracle() -> Result<Vec<Check>> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for nn in 0..=20u64 {
        for kk in 0..=nn {
            for n in 0..=nn {
                let dist = ThresholdDistribution::Hypergeometric {
                    population: nn,
                    marked: kk,
                    draws: n,
                };
                let denom = binomial_u128(nn, kk);
                for k in 0..=nn {
                    let want = if k == 0 {
                        1.0
                    } else {
                        let num: u128 = (k + 1..=n.min(kk))
                            .map(|j| binomial_u128(n, j) * binomial_u128(nn - n, kk - j))
                            .sum();
                        num as f64 / denom as f64
                    };
                    worst = worst.max((dist.survival(k) - want).abs());
                    cases += 1;
                }
            }
        }
    }
    Ok(vec![Check::new(
        "analytic",
        "hypergeometric threshold survival, N <= 20",
        worst,
        1e-12,
        format!("{cases} cases"),
    )])
}

/// Special cases that must reproduce known laws.
pub fn reductions() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    // q = 1 subordinator is a gamma subordinator on a rescaled rate
    let mut worst: f64 = 0.0;
    for (lambda, theta, a, s, t) in [(1.0, 0.5, 1.0, 0.7, 1.0), (2.3, 0.2, 0.4, 1.9, 0.6), (0.5, 0.8, 3.0, 0.1, 4.0)] {
        let p = SubordinatorParams::new(lambda, theta, vec![a])?;
        let want = (1.0 + s / ((1.0 - theta) * a)).powf(-lambda * t);
        worst = worst.max(rel_err(sub_lst(&p, &[s], t)?, want));
    }
    out.push(Check::new("analytic", "q=1 Laplace transform", worst, 1e-13, ""));

    let mut worst: f64 = 0.0;
    for rate in [0.3, 1.0, 4.5] {
        let p = GcpParams::poisson(rate)?;
        let mut direct = (-rate).exp();
        for n in 0..=40u64 {
            if n > 0 {
                direct *= rate / n as f64;
            }
            worst = worst.max(rel_err(gcp_pmf(&p, n, 1.0)?, direct));
        }
    }
    out.push(Check::new("analytic", "k=1 Poisson pmf", worst, 1e-14, ""));

    let m = baseline_model();
    let mut worst: f64 = 0.0;
    for n in [[0u64, 0u64], [1, 2], [3, 0], [4, 5]] {
        let joint = mz_pmf(&m, &n, 1.3)?;
        let prod = mz_pmf_component(&m, 0, n[0], 1.3)? * mz_pmf_component(&m, 1, n[1], 1.3)?;
        worst = worst.max(rel_err(joint, prod));
    }
    out.push(Check::new("analytic", "independent-clock pmf factorizes", worst, 1e-14, ""));
    Ok(out)
}

/// Residuals of the two Fourier-domain evolution equations.
pub fn pde_residuals() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for q in 1..=3usize {
        let p = SubordinatorParams::new(1.0, 0.5, vec![1.0; q])?;
        let alphas: [Vec<f64>; 3] = [
            vec![0.3; q],
            (0..q).map(|i| 0.5 - 0.4 * i as f64).collect(),
            (0..q).map(|i| 1.2 + 0.1 * i as f64).collect(),
        ];
        let mut worst: f64 = 0.0;
        for alpha in &alphas {
            for t in [1.5, 2.0, 3.5] {
                worst = worst.max(de1_residual(&p, alpha, t)?.relative());
            }
        }
        out.push(Check::new("pde", format!("shift-operator equation q={q}"), worst, 1e-10, "3x3 grid"));
    }

    let points: [(usize, f64, f64, Vec<f64>); 5] = [
        (1, 0.5, 1.0, vec![0.3]),
        (1, 0.5, 1.0, vec![-0.35]),
        (2, 0.5, 1.0, vec![0.5, -0.6]),
        (2, 0.5, 1.0, vec![0.2, 0.2]),
        (3, 0.3, 2.0, vec![0.7, -0.8, 0.75]),
    ];
    for (q, theta, a, alpha) in points {
        let p = SubordinatorParams::new(1.0, theta, vec![a; q])?;
        let w = de2_psi_minus_one(&p, &alpha)?.norm();
        let r20 = de2_residual(&p, &alpha, 1.0, 20)?.residual.norm();
        let r40 = de2_residual(&p, &alpha, 1.0, 40)?.residual.norm();
        // the remainder behaves like |w|^{N+1}/(N+1)
        let rate = (r40 * 41.0 / (r20 * 21.0)).powf(1.0 / 20.0);
        out.push(Check::new(
            "pde",
            format!("logarithmic operator decay q={q} alpha={alpha:?}"),
            (rate / w - 1.0).abs(),
            0.1,
            format!("|psi-1|={w:.4} observed rate={rate:.4}"),
        ));
    }
    Ok(out)
}

fn mc_check(name: &str, z: f64, analytic: String, mc: String) -> Check {
    Check::new("mc", name, z, 3.0, format!("analytic {analytic}, mc {mc}"))
}

/// Every analytic evaluator against its Monte Carlo estimator.
pub fn mc_master(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let cfg = |k: u64| McConfig {
        seed: opts.mc.seed.wrapping_add(k),
        ..opts.mc
    };
    let m = baseline_model();
    let sub = m.sub().clone();
    let mut out = Vec::new();

    let g = GcpParams::new(vec![0.5, 0.5])?;
    let (a, e) = (gcp_pmf(&g, 2, 1.0)?, mc_gcp_pmf(&g, 2, 1.0, &cfg(1))?);
    out.push(mc_check("gcp_pmf n=2 t=1", e.z_score(a), format!("{a:.6}"), format!("{:.6}±{:.1e}", e.value, e.std_err)));

    let s = [0.3, 0.7];
    let (a, e) = (sub_lst(&sub, &s, 1.0)?, mc_sub_lst(&sub, &s, 1.0, &cfg(2))?);
    out.push(mc_check("sub_lst s=(0.3,0.7)", e.z_score(a), format!("{a:.6}"), format!("{:.6}±{:.1e}", e.value, e.std_err)));

    let (a, e) = (sub_mean(&sub, 0, 1.0)?, mc_sub_mean(&sub, 0, 1.0, &cfg(3))?);
    out.push(mc_check("sub_mean i=1", e.z_score(a), format!("{a:.6}"), format!("{:.6}±{:.1e}", e.value, e.std_err)));

    let (a, e) = (sub_cov(&sub, 0, 1, 1.0)?, mc_sub_cov(&sub, 0, 1, 1.0, &cfg(4))?);
    out.push(mc_check("sub_cov (1,2)", e.z_score(a), format!("{a:.6}"), format!("{:.6}±{:.1e}", e.value, e.std_err)));

    let (a, e) = (sub_codifference(&sub, 0, 1, 0.8)?, mc_sub_codifference(&sub, 0, 1, 0.8, &cfg(5))?);
    out.push(mc_check("sub_codifference (1,2) t=0.8", e.z_score(a), format!("{a:.6}"), format!("{:.6}±{:.1e}", e.value, e.std_err)));

    let n = [1u64, 1u64];
    let (a, e) = (tc_pmf(&m, &n, 1.0, &opts.ctl)?.value, mc_tc_pmf(&m, &n, 1.0, &cfg(6))?);
    out.push(mc_check("tc_pmf n=(1,1)", e.z_score(a), format!("{a:.6}"), format!("{:.6}±{:.1e}", e.value, e.std_err)));

    let (a, e) = (tc_pgf(&m, &s, 1.0)?, mc_tc_pgf(&m, &s, 1.0, &cfg(7))?);
    out.push(mc_check("tc_pgf u=(0.3,0.7)", e.z_score(a), format!("{a:.6}"), format!("{:.6}±{:.1e}", e.value, e.std_err)));

    let (a, e) = (tc_cov(&m, 0, 1, 1.0)?, mc_tc_cov(&m, 0, 1, 1.0, &cfg(8))?);
    out.push(mc_check("tc_cov (1,2)", e.z_score(a), format!("{a:.6}"), format!("{:.6}±{:.1e}", e.value, e.std_err)));

    let (a, e) = (tc_codifference(&m, 0, 1, 1.0)?, mc_tc_codifference(&m, 0, 1, 1.0, &cfg(9))?);
    out.push(mc_check("tc_codifference (1,2)", e.z_score(a), format!("{a:.6}"), format!("{:.6}±{:.1e}", e.value, e.std_err)));

    let sm = baseline_shock(geometric(0.5));
    let (a, e) = (failure_survival(&sm, 1.0, &opts.ctl)?.value, mc_failure_survival(&sm, 1.0, &cfg(10))?);
    out.push(mc_check("failure_survival t=1", e.z_score(a), format!("{a:.6}"), format!("{:.6}±{:.1e}", e.value, e.std_err)));
    Ok(out)
}

/// Hazard rate against `(1/h)·Pr{Δ = l·e_r}` over a short window.
pub fn hazard_limit(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let m = baseline_model();
    let mut rng = McRng::seed_from_u64(opts.mc.seed ^ 0xA2A2);
    let h = 1e-3;
    let mut out = Vec::new();
    for case in 0..5u64 {
        let n = [rng.random_range(0..4u64), rng.random_range(0..4u64)];
        let r = rng.random_range(0..2usize);
        let l = rng.random_range(1..=m.gcp().component(r).k() as u64);
        let t = rng.random_range(0.2..2.0);
        let analytic = hazard_rate(&m, &n, r, l, t, &opts.ctl)?.value;
        let cfg = McConfig {
            samples: opts.hazard_samples,
            seed: opts.mc.seed.wrapping_add(100 + case),
            ..opts.mc
        };
        let e = mc_hazard(&m, r, l, h, &cfg)?;
        out.push(Check::new(
            "shock",
            format!("hazard n={n:?} r={} l={l} t={t:.2}", r + 1),
            e.z_score(analytic),
            3.0,
            format!("analytic {analytic:.6}, mc {:.6}±{:.1e}", e.value, e.std_err),
        ));
    }
    Ok(out)
}

fn survival_derivative(sm: &ShockModel, t: f64, ctl: &SeriesControl) -> Result<f64> {
    let h = 1e-4;
    Ok((failure_survival(sm, t - h, ctl)?.value - failure_survival(sm, t + h, ctl)?.value) / (2.0 * h))
}

/// Sub-densities against the derivative of the survival function, and
/// cause probabilities against total probability.
pub fn shock_calculus(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let sm = baseline_shock(geometric(0.5));
    let mut out = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        let fd = survival_derivative(&sm, t, &opts.ctl)?;
        let sub: f64 = (0..sm.model.q())
            .map(|r| failure_subdensity(&sm, r, t, &opts.ctl))
            .sum::<Result<f64>>()?;
        let total = total_failure_density(&sm, t, &opts.ctl)?.value;
        out.push(Check::new(
            "shock",
            format!("sum of sub-densities vs -dF/dt, t={t}"),
            rel_err(sub, fd),
            1e-5,
            format!("sub-densities {sub:.8}, -dF/dt {fd:.8}"),
        ));
        out.push(Check::new(
            "shock",
            format!("jump-rate failure density vs -dF/dt, t={t}"),
            rel_err(total, fd),
            1e-5,
            format!("density {total:.8}, -dF/dt {fd:.8}"),
        ));
    }
    let quad = QuadControl::default();
    let causes = (0..sm.model.q())
        .map(|r| cause_probability(&sm, r, &quad, &opts.ctl))
        .collect::<Result<Vec<_>>>()?;
    let sum: f64 = causes.iter().map(|c| c.value).sum();
    out.push(Check::new(
        "shock",
        "cause probabilities sum to one",
        (sum - 1.0).abs(),
        1e-4,
        causes.iter().map(|c| format!("{:.6}", c.value)).collect::<Vec<_>>().join(" + ").to_string(),
    ));
    Ok(out)
}

/// Survival decreases in `λ` and in `p` on `t ∈ (0, 5]`.
pub fn monotonicity(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let grid: Vec<f64> = (1..=50).map(|i| i as f64 * 0.1).collect();
    let curve = |model: TcModelParams, th: ThresholdDistribution| -> Result<Vec<f64>> {
        let sm = ShockModel::new(model, th)?;
        Ok(crate::shock::survival_curve(&sm, &grid, &opts.ctl, opts.exec)?
            .into_iter()
            .map(|r| r.1)
            .collect())
    };
    let violation = |hi: &[f64], lo: &[f64]| hi.iter().zip(lo).map(|(h, l)| (l - h).max(0.0)).fold(0.0, f64::max);
    let mut out = Vec::new();
    for (label, th) in [("geometric p=0.5", geometric(0.5)), ("hypergeometric N=2 K=1 n=1", small_hypergeometric())] {
        let slow = curve(baseline_model_with_lambda(1.0), th.clone())?;
        let fast = curve(baseline_model_with_lambda(2.0), th)?;
        out.push(Check::new(
            "shock",
            format!("survival decreases in lambda, {label}"),
            violation(&slow, &fast),
            1e-9,
            "lambda 1 vs 2",
        ));
    }
    let low = curve(baseline_model(), geometric(0.25))?;
    let high = curve(baseline_model(), geometric(0.75))?;
    out.push(Check::new(
        "shock",
        "survival decreases in p",
        violation(&low, &high),
        1e-9,
        "p 0.25 vs 0.75",
    ));
    Ok(out)
}
