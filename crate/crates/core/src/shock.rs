//! Shock model: the system fails once the total shock count
//! `Σ_i 𝓜_i(t)` reaches an independent random threshold `S`.

use crate::error::{MgcpError, Result};
use crate::exec::{map_indexed, Execution};
use crate::quadrature::{adaptive_simpson, Quadrature};
use crate::special::{
    ln_factorial, ln_poch_unchecked, sum_series_with_ratio_limit, CompensatedSum, LogSumExp, SeriesControl, SeriesSum,
    Term,
};
use crate::threshold::ThresholdDistribution;
use crate::timechanged::{
    composition_weights, levy_total_masses, tc_pgf_log_base, tc_pmf, total_count_moments, total_count_pmf,
    TcModelParams, TotalValues,
};

/// Absolute accuracy targeted by the truncated sums over the total count.
pub const SURVIVAL_ABS_TOL: f64 = 1e-13;
const MAX_CUTOFF: u64 = 1 << 13;

#[derive(Debug, Clone, PartialEq)]
pub struct ShockModel {
    pub model: TcModelParams,
    pub threshold: ThresholdDistribution,
}

impl ShockModel {
    pub fn new(model: TcModelParams, threshold: ThresholdDistribution) -> Result<Self> {
        threshold.validate()?;
        Ok(Self { model, threshold })
    }
}

/// A truncated sum with a bound on everything it leaves out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncated {
    pub value: f64,
    pub error_bound: f64,
    /// Largest total count included.
    pub cutoff: u64,
}

/// `F̄_S(k)` for an `h`-independent threshold.
pub fn threshold_survival(dist: &ThresholdDistribution, k: u64) -> f64 {
    dist.survival(k)
}

/// Law of the total count up to a cutoff beyond which, weighted by the
/// threshold survival, the neglected mass is below `SURVIVAL_ABS_TOL`.
fn count_law(sm: &ShockModel, t: f64, ctl: &SeriesControl) -> Result<(TotalValues, f64)> {
    let (mean, var) = total_count_moments(&sm.model, t)?;
    let mut cutoff = ((mean + 12.0 * var.sqrt()).ceil() as u64).max(8);
    if let Some(end) = sm.threshold.support_end() {
        cutoff = cutoff.min(end.saturating_sub(1));
    }
    loop {
        let law = total_count_pmf(&sm.model, cutoff, t, ctl)?;
        let mut mass = CompensatedSum::default();
        law.values.iter().for_each(|v| mass.add(*v));
        let missing = (1.0 - mass.value()).max(0.0) + law.tail_bound;
        let bound = missing * sm.threshold.survival(cutoff + 1) + law.tail_bound;
        if bound <= SURVIVAL_ABS_TOL {
            return Ok((law, bound));
        }
        if cutoff >= MAX_CUTOFF {
            return Err(MgcpError::NonConvergence {
                partial: mass.value(),
                terms: cutoff as usize,
            });
        }
        cutoff = (2 * cutoff).min(MAX_CUTOFF);
    }
}

/// `F̄_T(t) = Σ_k F̄_S(k) Pr{Σ_i 𝓜_i(t) = k}`.
pub fn failure_survival(sm: &ShockModel, t: f64, ctl: &SeriesControl) -> Result<Truncated> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(MgcpError::InvalidArgument(format!("time t = {t} must be nonnegative")));
    }
    if t == 0.0 {
        return Ok(Truncated {
            value: 1.0,
            error_bound: 0.0,
            cutoff: 0,
        });
    }
    let (law, bound) = count_law(sm, t, ctl)?;
    let mut acc = CompensatedSum::default();
    for (k, p) in law.values.iter().enumerate() {
        acc.add(sm.threshold.survival(k as u64) * p);
    }
    Ok(Truncated {
        value: acc.value().clamp(0.0, 1.0),
        error_bound: bound,
        cutoff: law.values.len() as u64 - 1,
    })
}

/// `F̄_T(t) = E (1−p)^{Σ𝓜_i(t)}` for a geometric threshold, straight from
/// the pgf.
pub fn geometric_failure_survival(model: &TcModelParams, p: f64, t: f64) -> f64 {
    let u = vec![1.0 - p; model.q()];
    (model.lambda() * t * tc_pgf_log_base(model, &u)).exp()
}

/// Hazard rate `R_{r,l}(n̄; t)` as the ratio `A / Pr{𝓜̄(t) = n̄}`.
///
/// `A` is a double series over `(h1, h2)`; it is summed over square shells
/// `max(h1, h2) = H` until the shell sums certify convergence.
pub fn hazard_rate(
    model: &TcModelParams,
    n: &[u64],
    r: usize,
    l: u64,
    t: f64,
    ctl: &SeriesControl,
) -> Result<SeriesSum> {
    if n.len() != model.q() {
        return Err(MgcpError::InvalidArgument(format!(
            "count vector has {} entries but q = {}",
            n.len(),
            model.q()
        )));
    }
    if r >= model.q() {
        return Err(MgcpError::InvalidArgument(format!("component index {r} out of range")));
    }
    let k_r = model.gcp().component(r).k() as u64;
    if l == 0 || l > k_r {
        return Err(MgcpError::InvalidArgument(format!("jump size {l} outside 1..={k_r}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(MgcpError::InvalidArgument(format!("time t = {t} must be nonnegative")));
    }
    ctl.validate()?;

    let p = tc_pmf(model, n, t, ctl)?;
    if !(p.value >= 1e-300) {
        return Err(MgcpError::Conditioning(format!(
            "state probability {:e} at {n:?} is too small to condition on",
            p.value
        )));
    }

    let lt = model.lambda() * t;
    let th = model.theta();
    let ln_theta = th.ln();
    let ln_rho: Vec<f64> = (0..model.q()).map(|i| model.rho(i).ln()).collect();
    let ln_rho_sum: f64 = ln_rho.iter().sum();
    let jump = composition_weights(model, r, l)?;
    let state = (0..model.q())
        .map(|i| composition_weights(model, i, n[i]))
        .collect::<Result<Vec<_>>>()?;
    let ln_lambda = model.lambda().ln();

    let row = |h1: u64| -> f64 {
        let mut acc = LogSumExp::default();
        for (xi, w) in jump.iter().enumerate().skip(1) {
            acc.add(w + ln_factorial(h1 + xi as u64 - 1));
        }
        ln_lambda + h1 as f64 * (ln_theta + ln_rho_sum) - ln_factorial(h1) + acc.ln_value()
    };
    let col = |h2: u64| -> f64 {
        let shift = h2 as f64 + lt;
        let mut ln = lt * (-th).ln_1p() + h2 as f64 * ln_theta - ln_factorial(h2) + ln_poch_unchecked(lt, h2);
        for (w, lr) in state.iter().zip(&ln_rho) {
            let mut acc = LogSumExp::default();
            for (eta, lw) in w.iter().enumerate() {
                acc.add(lw + ln_poch_unchecked(shift, eta as u64));
            }
            ln += shift * lr + acc.ln_value();
        }
        ln
    };

    let mut rows: Vec<f64> = Vec::new();
    let mut cols: Vec<f64> = Vec::new();
    let shells = (0u64..).map(move |h| {
        rows.push(row(h));
        cols.push(col(h));
        let hi = h as usize;
        let mut acc = LogSumExp::default();
        for j in 0..=hi {
            acc.add(rows[hi] + cols[j]);
        }
        for i in 0..hi {
            acc.add(rows[i] + cols[hi]);
        }
        Term::positive(acc.ln_value())
    });
    let a = sum_series_with_ratio_limit(shells, ctl, model.clock_ratio())?;
    let value = a.value / p.value;
    Ok(SeriesSum {
        value,
        ln_abs: a.ln_abs - p.ln_abs,
        terms: a.terms,
        tail_bound: (a.tail_bound + value * p.tail_bound) / p.value,
    })
}

/// Sub-density of failure with cause `r`, summing the hazard-weighted state
/// probabilities over the states from which a jump of size `≤ k_r` in
/// component `r` crosses the threshold.
pub fn failure_subdensity(sm: &ShockModel, r: usize, t: f64, ctl: &SeriesControl) -> Result<f64> {
    if r >= sm.model.q() {
        return Err(MgcpError::InvalidArgument(format!("component index {r} out of range")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(MgcpError::InvalidArgument(format!("time t = {t} must be nonnegative")));
    }
    let (law, _) = count_law(sm, t, ctl)?;
    let k_r = sm.model.gcp().component(r).k() as u64;
    let origin = vec![0u64; sm.model.q()];
    let hazards = (1..=k_r)
        .map(|l| Ok(hazard_rate(&sm.model, &origin, r, l, t, ctl)?.value))
        .collect::<Result<Vec<f64>>>()?;
    let mut acc = CompensatedSum::default();
    for (m, p) in law.values.iter().enumerate() {
        let m = m as u64;
        let here = sm.threshold.survival(m);
        for (l, h) in (1..=k_r).zip(&hazards) {
            acc.add(p * h * (here - sm.threshold.survival(m + l)));
        }
    }
    Ok(acc.value())
}

/// `−dF̄_T/dt` from the forward equation of the total count: every jump of
/// total size `j` out of a state with count `m` fails the system with
/// probability `Pr{m < S ≤ m + j}`.
pub fn total_failure_density(sm: &ShockModel, t: f64, ctl: &SeriesControl) -> Result<Truncated> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(MgcpError::InvalidArgument(format!("time t = {t} must be nonnegative")));
    }
    let (law, bound) = if t == 0.0 {
        (total_count_pmf(&sm.model, 0, 0.0, ctl)?, 0.0)
    } else {
        count_law(sm, t, ctl)?
    };
    let zeros = vec![0.0; sm.model.q()];
    let total_rate = -sm.model.lambda() * tc_pgf_log_base(&sm.model, &zeros);
    let mut jmax = (law.values.len() as u64).max(16);
    loop {
        let levy = levy_total_masses(&sm.model, jmax, ctl)?;
        let mut seen = CompensatedSum::default();
        levy.values.iter().for_each(|v| seen.add(*v));
        let rest = (total_rate - seen.value()).max(0.0) + levy.tail_bound;
        if rest <= SURVIVAL_ABS_TOL || jmax >= MAX_CUTOFF {
            let mut acc = CompensatedSum::default();
            for (m, p) in law.values.iter().enumerate() {
                let m = m as u64;
                let here = sm.threshold.survival(m);
                for (j, nu) in levy.values.iter().enumerate().skip(1) {
                    acc.add(p * nu * (here - sm.threshold.survival(m + j as u64)));
                }
            }
            return Ok(Truncated {
                value: acc.value(),
                error_bound: rest + bound * total_rate,
                cutoff: jmax,
            });
        }
        jmax *= 2;
    }
}

/// Controls for [`cause_probability`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadControl {
    pub abs_tol: f64,
    pub max_depth: u32,
    /// The integration range grows until `F̄_T` drops below this.
    pub survival_cutoff: f64,
}

impl Default for QuadControl {
    fn default() -> Self {
        Self {
            abs_tol: 1e-7,
            max_depth: 40,
            survival_cutoff: 1e-8,
        }
    }
}

/// Smallest `2^j` with `F̄_T(2^j) < cutoff`.
pub fn survival_horizon(sm: &ShockModel, cutoff: f64, ctl: &SeriesControl) -> Result<f64> {
    let mut t_max: f64 = 1.0;
    for _ in 0..40 {
        if failure_survival(sm, t_max, ctl)?.value < cutoff {
            return Ok(t_max);
        }
        t_max *= 2.0;
    }
    Err(MgcpError::NonConvergence {
        partial: failure_survival(sm, t_max, ctl)?.value,
        terms: 40,
    })
}

/// `Pr{C = r} = ∫_0^∞ f_r(t) dt`.
pub fn cause_probability(
    sm: &ShockModel,
    r: usize,
    quad: &QuadControl,
    ctl: &SeriesControl,
) -> Result<Quadrature> {
    let t_max = survival_horizon(sm, quad.survival_cutoff, ctl)?;
    adaptive_simpson(
        |t| failure_subdensity(sm, r, t, ctl),
        0.0,
        t_max,
        quad.abs_tol,
        quad.max_depth,
    )
}

/// `(t, F̄_T(t))` rows for an ascending grid.
pub fn survival_curve(
    sm: &ShockModel,
    grid: &[f64],
    ctl: &SeriesControl,
    exec: Execution,
) -> Result<Vec<(f64, f64)>> {
    if let Some(bad) = grid.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(MgcpError::InvalidArgument(format!("grid time {bad} must be nonnegative")));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(MgcpError::InvalidArgument("time grid must be ascending".into()));
    }
    map_indexed(exec, grid.len(), |i| {
        failure_survival(sm, grid[i], ctl).map(|s| (grid[i], s.value))
    })
    .into_iter()
    .collect()
}
