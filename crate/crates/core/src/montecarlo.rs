//! Exact samplers and a deterministic batched Monte Carlo engine.
//!
//! Samples are drawn in fixed-size batches. Batch `b` uses a ChaCha8 stream
//! keyed by `(seed, b)` and partial results are merged in batch order, so an
//! estimate depends only on `(seed, samples)`.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Geometric, Hypergeometric, Poisson};

use crate::error::{MgcpError, Result};
use crate::exec::{default_workers, map_indexed, with_workers, Execution};
use crate::gcp::GcpParams;
use crate::shock::ShockModel;
use crate::special::{Complex, I};
use crate::subordinator::SubordinatorParams;
use crate::threshold::ThresholdDistribution;
use crate::timechanged::TcModelParams;

pub type McRng = ChaCha8Rng;

/// Samples per RNG stream.
pub const BATCH: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub execution: Execution,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 0x5EED,
            workers: default_workers(),
            execution: Execution::Parallel,
        }
    }
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(MgcpError::param("samples", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(MgcpError::param("workers", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate<T = f64> {
    pub value: T,
    pub std_err: f64,
    pub n: u64,
}

impl McEstimate<f64> {
    /// `|value − target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_err
        }
    }

    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        self.z_score(target) <= k
    }
}

impl McEstimate<Complex> {
    pub fn z_score(&self, target: Complex) -> f64 {
        let d = (self.value - target).norm();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_err
        }
    }

    pub fn agrees_with(&self, target: Complex, k: f64) -> bool {
        self.z_score(target) <= k
    }
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(MgcpError::param(name, format!("{v} must be positive and finite")));
    }
    Ok(())
}

/// One `Γ(shape, rate)` variate.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    positive("shape", shape)?;
    positive("rate", rate)?;
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| MgcpError::param("shape", e.to_string()))?;
    Ok(g.sample(rng))
}

/// Poisson draw; a zero mean gives zero.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    positive("mean", mean)?;
    let p = Poisson::new(mean).map_err(|e| MgcpError::param("mean", e.to_string()))?;
    Ok(p.sample(rng) as u64)
}

/// Negative binomial with `E = size·θ/(1−θ)` as a gamma–Poisson mixture.
pub fn sample_negbin<R: Rng + ?Sized>(theta: f64, size: f64, rng: &mut R) -> Result<u64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(MgcpError::param("theta", format!("{theta} must lie in (0, 1)")));
    }
    let w = sample_gamma(size, (1.0 - theta) / theta, rng)?;
    sample_poisson(w, rng)
}

/// `M(x) = Σ_j j·Poisson(λ_j x)`.
pub fn sample_gcp<R: Rng + ?Sized>(params: &GcpParams, x: f64, rng: &mut R) -> Result<u64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(MgcpError::InvalidArgument(format!("operational time {x} must be nonnegative")));
    }
    let mut total = 0;
    for (j, rate) in params.rates().iter().enumerate() {
        total += (j as u64 + 1) * sample_poisson(rate * x, rng)?;
    }
    Ok(total)
}

/// Joint draw of `Ḡ(t)`: one shared negative binomial clock perturbation,
/// then independent gammas.
pub fn sample_subordinator<R: Rng + ?Sized>(params: &SubordinatorParams, t: f64, rng: &mut R) -> Result<Vec<f64>> {
    positive("t", t)?;
    let lt = params.lambda() * t;
    let b = sample_negbin(params.theta(), lt, rng)?;
    params.a().iter().map(|&a| sample_gamma(lt + b as f64, a, rng)).collect()
}

/// Joint draw of `𝓜̄(t)`; `𝓜̄(0) = 0̄`.
pub fn sample_tc<R: Rng + ?Sized>(params: &TcModelParams, t: f64, rng: &mut R) -> Result<Vec<u64>> {
    if t == 0.0 {
        return Ok(vec![0; params.q()]);
    }
    let g = sample_subordinator(params.sub(), t, rng)?;
    g.iter()
        .enumerate()
        .map(|(i, &x)| sample_gcp(params.gcp().component(i), x, rng))
        .collect()
}

/// Increment of `𝓜̄` over any window of length `h`.
pub fn sample_increment<R: Rng + ?Sized>(params: &TcModelParams, h: f64, rng: &mut R) -> Result<Vec<u64>> {
    sample_tc(params, h, rng)
}

/// Threshold draw, with zero mapped to one so that `F̄_S(0) = 1`.
pub fn sample_threshold<R: Rng + ?Sized>(dist: &ThresholdDistribution, rng: &mut R) -> Result<u64> {
    dist.validate()?;
    let s = match dist {
        ThresholdDistribution::Geometric { p } => {
            let g = Geometric::new(*p).map_err(|e| MgcpError::param("threshold.p", e.to_string()))?;
            1 + g.sample(rng)
        }
        ThresholdDistribution::Hypergeometric {
            population,
            marked,
            draws,
        } => {
            let h = Hypergeometric::new(*population, *marked, *draws)
                .map_err(|e| MgcpError::param("threshold", e.to_string()))?;
            h.sample(rng)
        }
        ThresholdDistribution::Explicit { pmf } => {
            let w = WeightedIndex::new(pmf.iter().map(|e| e.1))
                .map_err(|e| MgcpError::param("threshold.pmf", e.to_string()))?;
            pmf[w.sample(rng)].0
        }
    };
    Ok(s.max(1))
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Running means and co-moments of a `d`-vector, mergeable in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    n: u64,
    mean: Vec<f64>,
    /// Row-major `d × d` sums of centered cross products.
    comoment: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.dim();
        self.n += 1;
        let n = self.n as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl / n;
        }
        for i in 0..d {
            let post = x[i] - self.mean[i];
            for j in 0..d {
                self.comoment[i * d + j] += delta[j] * post;
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let d = self.dim();
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..d {
            for j in 0..d {
                self.comoment[i * d + j] += other.comoment[i * d + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl * nb / n;
        }
        self.n += other.n;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample covariance of coordinates `i` and `j`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.comoment[i * self.dim() + j] / (self.n as f64 - 1.0)
    }

    /// Standard error of `g·mean` (delta method for a smooth functional
    /// with gradient `g` at the sample mean).
    pub fn linear_std_err(&self, g: &[f64]) -> f64 {
        let d = self.dim();
        let mut var = 0.0;
        for i in 0..d {
            for j in 0..d {
                var += g[i] * g[j] * self.covariance(i, j);
            }
        }
        (var.max(0.0) / self.n as f64).sqrt()
    }
}

fn batches(cfg: &McConfig) -> u64 {
    cfg.samples.div_ceil(BATCH)
}

fn batch_rng(seed: u64, batch: u64) -> McRng {
    let mut rng = McRng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

/// Run `draw` once per sample; each batch folds into its own accumulator.
fn run_batches<A, F>(cfg: &McConfig, init: impl Fn() -> A + Sync, draw: F, merge: impl Fn(&mut A, A)) -> Result<A>
where
    A: Send,
    F: Fn(&mut McRng, &mut A) -> Result<()> + Sync + Send,
{
    cfg.validate()?;
    let nb = batches(cfg);
    let parts: Vec<Result<A>> = with_workers(cfg.execution, cfg.workers, || {
        map_indexed(cfg.execution, nb as usize, |b| {
            let b = b as u64;
            let mut rng = batch_rng(cfg.seed, b);
            let mut acc = init();
            let size = BATCH.min(cfg.samples - b * BATCH);
            for _ in 0..size {
                draw(&mut rng, &mut acc)?;
            }
            Ok(acc)
        })
    });
    let mut total = init();
    for p in parts {
        merge(&mut total, p?);
    }
    Ok(total)
}

/// Means and co-moments of a vector functional of one draw.
pub fn estimate_moments<F>(cfg: &McConfig, dim: usize, f: F) -> Result<MomentAccumulator>
where
    F: Fn(&mut McRng, &mut [f64]) -> Result<()> + Sync + Send,
{
    run_batches(
        cfg,
        || MomentAccumulator::new(dim),
        |rng, acc| {
            let mut buf = vec![0.0; dim];
            f(rng, &mut buf)?;
            acc.push(&buf);
            Ok(())
        },
        |a, b| a.merge(&b),
    )
}

/// `E f` with its standard error.
pub fn estimate<F>(cfg: &McConfig, f: F) -> Result<McEstimate>
where
    F: Fn(&mut McRng) -> Result<f64> + Sync + Send,
{
    let m = estimate_moments(cfg, 1, |rng, out| {
        out[0] = f(rng)?;
        Ok(())
    })?;
    Ok(McEstimate {
        value: m.mean()[0],
        std_err: m.linear_std_err(&[1.0]),
        n: m.count(),
    })
}

/// `E f` for a complex functional; the error combines both parts.
pub fn estimate_complex<F>(cfg: &McConfig, f: F) -> Result<McEstimate<Complex>>
where
    F: Fn(&mut McRng) -> Result<Complex> + Sync + Send,
{
    let m = estimate_moments(cfg, 2, |rng, out| {
        let z = f(rng)?;
        out[0] = z.re;
        out[1] = z.im;
        Ok(())
    })?;
    let se = (m.linear_std_err(&[1.0, 0.0]).powi(2) + m.linear_std_err(&[0.0, 1.0]).powi(2)).sqrt();
    Ok(McEstimate {
        value: Complex::new(m.mean()[0], m.mean()[1]),
        std_err: se,
        n: m.count(),
    })
}

/// `Cov(X, Y)` for a pair functional, with a delta-method error.
pub fn estimate_covariance<F>(cfg: &McConfig, f: F) -> Result<McEstimate>
where
    F: Fn(&mut McRng) -> Result<(f64, f64)> + Sync + Send,
{
    let m = estimate_moments(cfg, 3, |rng, out| {
        let (x, y) = f(rng)?;
        out[0] = x;
        out[1] = y;
        out[2] = x * y;
        Ok(())
    })?;
    let (mx, my) = (m.mean()[0], m.mean()[1]);
    Ok(McEstimate {
        value: m.covariance(0, 1),
        std_err: m.linear_std_err(&[-my, -mx, 1.0]),
        n: m.count(),
    })
}

/// Codifference `ln E e^{i(X−Y)} − ln E e^{iX} − ln E e^{−iY}` estimated
/// from a pair functional.
pub fn estimate_codifference<F>(cfg: &McConfig, f: F) -> Result<McEstimate<Complex>>
where
    F: Fn(&mut McRng) -> Result<(f64, f64)> + Sync + Send,
{
    let m = estimate_moments(cfg, 6, |rng, out| {
        let (x, y) = f(rng)?;
        for (k, arg) in [x - y, x, -y].iter().enumerate() {
            let z = (I * *arg).exp();
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
        Ok(())
    })?;
    let phi: Vec<Complex> = (0..3).map(|k| Complex::new(m.mean()[2 * k], m.mean()[2 * k + 1])).collect();
    let value = phi[0].ln() - phi[1].ln() - phi[2].ln();
    // influence: Σ_k s_k (Z_k − φ_k)/φ_k, split into real and imaginary parts
    let signs = [1.0, -1.0, -1.0];
    let mut g_re = vec![0.0; 6];
    let mut g_im = vec![0.0; 6];
    for k in 0..3 {
        let c = signs[k] / phi[k];
        // c·(a + ib) = (c.re a − c.im b) + i(c.im a + c.re b)
        g_re[2 * k] = c.re;
        g_re[2 * k + 1] = -c.im;
        g_im[2 * k] = c.im;
        g_im[2 * k + 1] = c.re;
    }
    let se = (m.linear_std_err(&g_re).powi(2) + m.linear_std_err(&g_im).powi(2)).sqrt();
    Ok(McEstimate {
        value,
        std_err: se,
        n: m.count(),
    })
}

/// Empirical law of a vector-valued draw.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Histogram {
    pub counts: BTreeMap<Vec<u64>, u64>,
    pub n: u64,
}

impl Histogram {
    pub fn probability(&self, cell: &[u64]) -> McEstimate {
        let c = self.counts.get(cell).copied().unwrap_or(0) as f64;
        let n = self.n as f64;
        let p = c / n;
        McEstimate {
            value: p,
            std_err: (p * (1.0 - p) / n).sqrt(),
            n: self.n,
        }
    }
}

pub fn estimate_histogram<F>(cfg: &McConfig, f: F) -> Result<Histogram>
where
    F: Fn(&mut McRng) -> Result<Vec<u64>> + Sync + Send,
{
    run_batches(
        cfg,
        Histogram::default,
        |rng, h| {
            *h.counts.entry(f(rng)?).or_insert(0) += 1;
            h.n += 1;
            Ok(())
        },
        |a, b| {
            for (k, v) in b.counts {
                *a.counts.entry(k).or_insert(0) += v;
            }
            a.n += b.n;
        },
    )
}

// ---------------------------------------------------------------------------
// Oracles for the analytic evaluators
// ---------------------------------------------------------------------------

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn mc_gcp_pmf(params: &GcpParams, n: u64, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate(cfg, |rng| Ok(indicator(sample_gcp(params, t, rng)? == n)))
}

pub fn mc_sub_lst(params: &SubordinatorParams, s: &[f64], t: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate(cfg, |rng| {
        let g = sample_subordinator(params, t, rng)?;
        Ok((-g.iter().zip(s).map(|(x, s)| x * s).sum::<f64>()).exp())
    })
}

pub fn mc_sub_mean(params: &SubordinatorParams, i: usize, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate(cfg, |rng| Ok(sample_subordinator(params, t, rng)?[i]))
}

pub fn mc_sub_cov(params: &SubordinatorParams, i: usize, j: usize, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate_covariance(cfg, |rng| {
        let g = sample_subordinator(params, t, rng)?;
        Ok((g[i], g[j]))
    })
}

pub fn mc_sub_codifference(
    params: &SubordinatorParams,
    i: usize,
    j: usize,
    t: f64,
    cfg: &McConfig,
) -> Result<McEstimate<Complex>> {
    estimate_codifference(cfg, |rng| {
        let g = sample_subordinator(params, t, rng)?;
        Ok((g[i], g[j]))
    })
}

pub fn mc_tc_pmf(params: &TcModelParams, n: &[u64], t: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate(cfg, |rng| Ok(indicator(sample_tc(params, t, rng)? == n)))
}

pub fn mc_tc_pgf(params: &TcModelParams, u: &[f64], t: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate(cfg, |rng| {
        let m = sample_tc(params, t, rng)?;
        Ok(m.iter().zip(u).map(|(&c, &u)| u.powi(c as i32)).product())
    })
}

pub fn mc_tc_mean(params: &TcModelParams, i: usize, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate(cfg, |rng| Ok(sample_tc(params, t, rng)?[i] as f64))
}

pub fn mc_tc_cov(params: &TcModelParams, i: usize, l: usize, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate_covariance(cfg, |rng| {
        let m = sample_tc(params, t, rng)?;
        Ok((m[i] as f64, m[l] as f64))
    })
}

pub fn mc_tc_codifference(
    params: &TcModelParams,
    i: usize,
    l: usize,
    t: f64,
    cfg: &McConfig,
) -> Result<McEstimate<Complex>> {
    estimate_codifference(cfg, |rng| {
        let m = sample_tc(params, t, rng)?;
        Ok((m[i] as f64, m[l] as f64))
    })
}

/// `Pr{Σ_i 𝓜_i(t) < S}`, which is `Pr{T > t}` because paths never decrease.
pub fn mc_failure_survival(sm: &ShockModel, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate(cfg, |rng| {
        let m = sample_tc(&sm.model, t, rng)?;
        let s = sample_threshold(&sm.threshold, rng)?;
        Ok(indicator(m.iter().sum::<u64>() < s))
    })
}

/// `(1/h)·Pr{Δ𝓜̄ = l·e_r}` over a window of length `h`.
pub fn mc_hazard(params: &TcModelParams, r: usize, l: u64, h: f64, cfg: &McConfig) -> Result<McEstimate> {
    let p = estimate(cfg, |rng| {
        let d = sample_increment(params, h, rng)?;
        Ok(indicator(
            d.iter().enumerate().all(|(i, &v)| if i == r { v == l } else { v == 0 }),
        ))
    })?;
    Ok(McEstimate {
        value: p.value / h,
        std_err: p.std_err / h,
        n: p.n,
    })
}

/// Cause of failure from paths on a time lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct CauseEstimate {
    /// Crossing steps in which only component `r` moved.
    pub by_component: Vec<McEstimate>,
    /// Crossing steps in which several components moved.
    pub simultaneous: McEstimate,
}

/// Walk `𝓜̄` in increments of length `dt` until the total reaches `S`.
pub fn mc_cause(sm: &ShockModel, dt: f64, cfg: &McConfig) -> Result<CauseEstimate> {
    positive("dt", dt)?;
    let q = sm.model.q();
    let m = estimate_moments(cfg, q + 1, |rng, out| {
        let s = sample_threshold(&sm.threshold, rng)?;
        let mut total = 0;
        loop {
            let d = sample_increment(&sm.model, dt, rng)?;
            let step: u64 = d.iter().sum();
            if total + step >= s {
                let movers: Vec<usize> = (0..q).filter(|&i| d[i] > 0).collect();
                if movers.len() == 1 {
                    out[movers[0]] = 1.0;
                } else {
                    out[q] = 1.0;
                }
                return Ok(());
            }
            total += step;
        }
    })?;
    let one = |k: usize| {
        let mut g = vec![0.0; q + 1];
        g[k] = 1.0;
        McEstimate {
            value: m.mean()[k],
            std_err: m.linear_std_err(&g),
            n: m.count(),
        }
    };
    Ok(CauseEstimate {
        by_component: (0..q).map(one).collect(),
        simultaneous: one(q),
    })
}
