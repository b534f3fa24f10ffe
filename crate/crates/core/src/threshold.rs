//! Random failure thresholds `S` for the shock model.
//!
//! Survival always satisfies `F̄_S(0) = 1`. A hypergeometric law with mass at
//! zero therefore behaves as `max(S, 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{MgcpError, Result};
use crate::special::{hyp3f2_terminating, ln_factorial, CompensatedSum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "parameters", rename_all = "lowercase", deny_unknown_fields)]
pub enum ThresholdDistribution {
    /// `Pr{S > k} = (1 − p)^k`.
    Geometric { p: f64 },
    /// `Pr{S = j} = C(n, j) C(N − n, K − j) / C(N, K)`.
    Hypergeometric {
        #[serde(rename = "N")]
        population: u64,
        #[serde(rename = "K")]
        marked: u64,
        #[serde(rename = "n")]
        draws: u64,
    },
    /// Finite pmf as `(k, Pr{S = k})` pairs with `k ≥ 1`.
    Explicit { pmf: Vec<(u64, f64)> },
}

fn ln_binomial(n: u64, k: u64) -> Option<f64> {
    (k <= n).then(|| ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k))
}

impl ThresholdDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Geometric { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(MgcpError::param("threshold.p", format!("{p} must lie in (0, 1]")));
                }
            }
            Self::Hypergeometric {
                population,
                marked,
                draws,
            } => {
                if marked > population {
                    return Err(MgcpError::param("threshold.K", format!("{marked} exceeds N = {population}")));
                }
                if draws > population {
                    return Err(MgcpError::param("threshold.n", format!("{draws} exceeds N = {population}")));
                }
            }
            Self::Explicit { pmf } => {
                if pmf.is_empty() {
                    return Err(MgcpError::param("threshold.pmf", "must not be empty"));
                }
                let mut total = CompensatedSum::default();
                for &(k, p) in pmf {
                    if k == 0 {
                        return Err(MgcpError::param("threshold.pmf", "support must start at 1"));
                    }
                    if !(p >= 0.0) || !p.is_finite() {
                        return Err(MgcpError::param("threshold.pmf", format!("probability {p} at k = {k}")));
                    }
                    total.add(p);
                }
                if (total.value() - 1.0).abs() > 1e-12 {
                    return Err(MgcpError::param(
                        "threshold.pmf",
                        format!("probabilities sum to {}", total.value()),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Raw hypergeometric `Pr{S = j}`, including `j = 0`.
    pub fn hypergeometric_pmf(population: u64, marked: u64, draws: u64, j: u64) -> f64 {
        let (Some(a), Some(b), Some(c)) = (
            ln_binomial(draws, j),
            marked.checked_sub(j).and_then(|r| ln_binomial(population - draws, r)),
            ln_binomial(population, marked),
        ) else {
            return 0.0;
        };
        (a + b - c).exp()
    }

    /// `F̄_S(k) = Pr{S > k}`, with `F̄_S(0) = 1`.
    pub fn survival(&self, k: u64) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match self {
            Self::Geometric { p } => (1.0 - p).powf(k as f64),
            Self::Hypergeometric {
                population,
                marked,
                draws,
            } => hypergeometric_tail(*population, *marked, *draws, k),
            Self::Explicit { pmf } => {
                let mut acc = CompensatedSum::default();
                pmf.iter().filter(|e| e.0 > k).for_each(|e| acc.add(e.1));
                acc.value().clamp(0.0, 1.0)
            }
        }
    }

    /// `p_S(k) = F̄_S(k−1) − F̄_S(k)` for `k ≥ 1`; zero at `k = 0`.
    pub fn pmf(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match self {
            Self::Geometric { p } => p * (1.0 - p).powf(k as f64 - 1.0),
            _ => (self.survival(k - 1) - self.survival(k)).max(0.0),
        }
    }

    /// Smallest `k` with `F̄_S(k) = 0`, when the support is finite.
    pub fn support_end(&self) -> Option<u64> {
        match self {
            Self::Geometric { p } => (*p == 1.0).then_some(1),
            Self::Hypergeometric { marked, draws, .. } => Some((*marked).min(*draws).max(1)),
            Self::Explicit { pmf } => pmf.iter().filter(|e| e.1 > 0.0).map(|e| e.0).max(),
        }
    }
}

/// `Pr{S > k}` for `k ≥ 1` through the terminating `₃F₂` representation.
///
/// Below the support minimum `K + n − N` the leading binomial of that
/// representation vanishes although the whole mass lies above `k`, so that
/// range is handled directly.
fn hypergeometric_tail(population: u64, marked: u64, draws: u64, k: u64) -> f64 {
    let (nn, kk, n) = (population, marked, draws);
    if k + 1 + nn < kk + n {
        return 1.0;
    }
    let lead = (
        ln_binomial(n, k + 1),
        (kk).checked_sub(k + 1).and_then(|r| ln_binomial(nn - n, r)),
        ln_binomial(nn, kk),
    );
    let (Some(a), Some(b), Some(c)) = lead else {
        return 0.0;
    };
    let (k, nn, kk, n) = (k as f64, nn as f64, kk as f64, n as f64);
    let f = hyp3f2_terminating(1.0, k + 1.0 - kk, k + 1.0 - n, k + 2.0, nn + k + 2.0 - kk - n)
        .expect("upper parameter k+1-K is a nonpositive integer whenever the prefactor is nonzero");
    ((a + b - c).exp() * f).clamp(0.0, 1.0)
}
