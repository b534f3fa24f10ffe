//! Generalized counting process (GCP): jumps of size `1..=k` arriving as
//! independent Poisson streams with rates `λ_1..λ_k`, and its multivariate
//! version with independent components.

use serde::{Deserialize, Serialize};

use crate::compositions::{enumerate_compositions, DEFAULT_MAX_JUMP_SIZES};
use crate::error::{MgcpError, Result};
use crate::special::{ln_factorial, Scaled};

/// Jump rates of one GCP; `rates[j]` is the rate of jumps of size `j + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GcpParams {
    rates: Vec<f64>,
}

impl GcpParams {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(MgcpError::param("rates", "at least one jump size is required"));
        }
        if rates.len() > DEFAULT_MAX_JUMP_SIZES {
            return Err(MgcpError::param(
                "rates",
                format!("{} jump sizes exceeds the maximum of {DEFAULT_MAX_JUMP_SIZES}", rates.len()),
            ));
        }
        if let Some(bad) = rates.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(MgcpError::param("rates", format!("rate {bad} must be positive and finite")));
        }
        Ok(Self { rates })
    }

    /// Poisson process with the given rate.
    pub fn poisson(rate: f64) -> Result<Self> {
        Self::new(vec![rate])
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Number of jump sizes `k`.
    pub fn k(&self) -> usize {
        self.rates.len()
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    /// `Σ_j j λ_j`, the mean count per unit time.
    pub fn mean_rate(&self) -> f64 {
        self.rates.iter().enumerate().map(|(j, r)| (j + 1) as f64 * r).sum()
    }

    /// `Σ_j j² λ_j`.
    pub fn second_moment_rate(&self) -> f64 {
        self.rates
            .iter()
            .enumerate()
            .map(|(j, r)| ((j + 1) * (j + 1)) as f64 * r)
            .sum()
    }
}

/// `q` independent GCP components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiGcpParams {
    components: Vec<GcpParams>,
}

impl MultiGcpParams {
    pub fn new(components: Vec<GcpParams>) -> Result<Self> {
        if components.is_empty() {
            return Err(MgcpError::param("rates", "at least one component is required"));
        }
        Ok(Self { components })
    }

    pub fn from_rates(rates: Vec<Vec<f64>>) -> Result<Self> {
        let components = rates
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                GcpParams::new(r).map_err(|e| match e {
                    MgcpError::InvalidParameter { detail, .. } => {
                        MgcpError::param(format!("rates[{i}]"), detail)
                    }
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    pub fn q(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[GcpParams] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &GcpParams {
        &self.components[i]
    }
}

/// `Pr{M(t) = n}`.
///
/// Each composition's term is a direct product carried in extended range, so
/// the `k = 1` case reproduces the Poisson pmf to a few ulps.
pub fn gcp_pmf(params: &GcpParams, n: u64, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(MgcpError::InvalidArgument(format!("time t = {t} must be nonnegative")));
    }
    if t == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let decay = Scaled::from_exp(-params.total_rate() * t);
    let mut terms = Vec::new();
    for comp in enumerate_compositions(params.k(), n)? {
        let mut term = decay;
        for (count, rate) in comp.parts.iter().zip(params.rates()) {
            let x = rate * t;
            for i in 1..=*count {
                term = term.mul_f64(x / i as f64);
            }
        }
        terms.push(term);
    }
    Ok(Scaled::sum(&terms).to_f64())
}

/// `ln Pr{M(t) = n}`, usable where the pmf itself underflows.
pub fn gcp_ln_pmf(params: &GcpParams, n: u64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Ok(if n == 0 && t == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    let mut acc = crate::special::LogSumExp::default();
    for comp in enumerate_compositions(params.k(), n)? {
        let mut ln = -params.total_rate() * t;
        for (count, rate) in comp.parts.iter().zip(params.rates()) {
            ln += *count as f64 * (rate * t).ln() - ln_factorial(*count);
        }
        acc.add(ln);
    }
    Ok(acc.ln_value())
}

/// Joint pmf of independent components, `Π_i Pr{M_i(t) = n_i}`.
pub fn multi_gcp_pmf(params: &MultiGcpParams, counts: &[u64], t: f64) -> Result<f64> {
    if counts.len() != params.q() {
        return Err(MgcpError::InvalidArgument(format!(
            "count vector has {} entries but the process has {} components",
            counts.len(),
            params.q()
        )));
    }
    params
        .components()
        .iter()
        .zip(counts)
        .try_fold(1.0, |acc, (c, &n)| Ok(acc * gcp_pmf(c, n, t)?))
}

/// `E u^{M(t)} = exp(−t Σ_j λ_j (1 − u^j))`.
pub fn gcp_pgf(params: &GcpParams, u: f64, t: f64) -> Result<f64> {
    if !(u.abs() <= 1.0) {
        return Err(MgcpError::InvalidArgument(format!("pgf argument u = {u} must satisfy |u| <= 1")));
    }
    let exponent: f64 = params
        .rates()
        .iter()
        .enumerate()
        .map(|(j, r)| r * (1.0 - u.powi(j as i32 + 1)))
        .sum();
    Ok((-t * exponent).exp())
}

/// Lévy measure as atoms `(jump size, rate)`.
pub fn gcp_levy_measure(params: &GcpParams) -> Vec<(u64, f64)> {
    params
        .rates()
        .iter()
        .enumerate()
        .map(|(j, &r)| (j as u64 + 1, r))
        .collect()
}

/// Mean and variance of `M(t)`.
pub fn gcp_mean_var(params: &GcpParams, t: f64) -> (f64, f64) {
    (t * params.mean_rate(), t * params.second_moment_rate())
}
