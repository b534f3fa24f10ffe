//! The time-changed process `𝓜_i(t) = M_i(G_i(t))`: independent GCP
//! components read off the dependent gamma clocks.
//!
//! State probabilities and Lévy masses are series over the negative binomial
//! clock index `h`. Per component they only involve the weights
//! `W_i[n][η] = Σ_{Ω(k_i,n), η} Π_j (λ_ij/(a_i+λ_i))^{n_j}/n_j!`, so bulk
//! evaluation precomputes those once and sweeps `h` for all cells together.

use crate::compositions::enumerate_compositions;
use crate::error::{MgcpError, Result};
use crate::exec::{for_each_mut, Execution};
use crate::gcp::MultiGcpParams;
use crate::special::{
    ln_factorial, ln_gamma_unchecked, ln_poch_unchecked, sum_series_with_ratio_limit, CompensatedSum, Complex,
    LogSumExp, SeriesControl, SeriesSum, Term, I,
};
use crate::subordinator::SubordinatorParams;

/// A GCP with `q` components and the gamma subordinator driving it.
#[derive(Debug, Clone, PartialEq)]
pub struct TcModelParams {
    gcp: MultiGcpParams,
    sub: SubordinatorParams,
}

impl TcModelParams {
    pub fn new(gcp: MultiGcpParams, sub: SubordinatorParams) -> Result<Self> {
        if gcp.q() != sub.q() {
            return Err(MgcpError::param(
                "rates",
                format!("{} rate rows but {} subordinator rates a_i", gcp.q(), sub.q()),
            ));
        }
        Ok(Self { gcp, sub })
    }

    pub fn gcp(&self) -> &MultiGcpParams {
        &self.gcp
    }

    pub fn sub(&self) -> &SubordinatorParams {
        &self.sub
    }

    pub fn q(&self) -> usize {
        self.gcp.q()
    }

    pub fn lambda(&self) -> f64 {
        self.sub.lambda()
    }

    pub fn theta(&self) -> f64 {
        self.sub.theta()
    }

    /// `λ_i = Σ_j λ_ij`.
    pub fn component_rate(&self, i: usize) -> f64 {
        self.gcp.component(i).total_rate()
    }

    /// `ρ_i = a_i / (a_i + λ_i)`.
    pub fn rho(&self, i: usize) -> f64 {
        let a = self.sub.a()[i];
        a / (a + self.component_rate(i))
    }

    pub fn rho_product(&self) -> f64 {
        (0..self.q()).map(|i| self.rho(i)).product()
    }

    /// `x_ij = λ_ij / (a_i + λ_i)`.
    pub fn jump_weights(&self, i: usize) -> Vec<f64> {
        let denom = self.sub.a()[i] + self.component_rate(i);
        self.gcp.component(i).rates().iter().map(|r| r / denom).collect()
    }

    /// Asymptotic ratio `θ·Πρ_i` of the clock series.
    pub fn clock_ratio(&self) -> f64 {
        self.theta() * self.rho_product()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.q() {
            return Err(MgcpError::InvalidArgument(format!(
                "component index {i} out of range for q = {}",
                self.q()
            )));
        }
        Ok(())
    }

    fn check_counts(&self, n: &[u64]) -> Result<()> {
        if n.len() != self.q() {
            return Err(MgcpError::InvalidArgument(format!(
                "count vector has {} entries but q = {}",
                n.len(),
                self.q()
            )));
        }
        Ok(())
    }
}

/// `ln W_i[n][η]` for `η = 0..=n`, summed over the compositions of `n`.
pub fn composition_weights(params: &TcModelParams, i: usize, n: u64) -> Result<Vec<f64>> {
    params.check_index(i)?;
    let x = params.jump_weights(i);
    let mut acc = vec![LogSumExp::default(); n as usize + 1];
    for comp in enumerate_compositions(x.len(), n)? {
        let ln: f64 = comp
            .parts
            .iter()
            .zip(&x)
            .map(|(&c, xj)| c as f64 * xj.ln() - ln_factorial(c))
            .sum();
        acc[comp.eta as usize].add(ln);
    }
    Ok(acc.iter().map(|a| a.ln_value()).collect())
}

/// `ln W_i[n][η]` for all `n ≤ nmax`, through the recursion
/// `W[n][η] = (1/η) Σ_j x_j W[n−j][η−1]`.
pub fn weight_table(params: &TcModelParams, i: usize, nmax: usize) -> Result<Vec<Vec<f64>>> {
    params.check_index(i)?;
    let ln_x: Vec<f64> = params.jump_weights(i).iter().map(|x| x.ln()).collect();
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(nmax + 1);
    for n in 0..=nmax {
        let mut row = vec![f64::NEG_INFINITY; n + 1];
        if n == 0 {
            row[0] = 0.0;
        }
        for eta in 1..=n {
            let mut acc = LogSumExp::default();
            for (j, lx) in ln_x.iter().enumerate() {
                let size = j + 1;
                if size > n {
                    break;
                }
                let prev = &table[n - size];
                if eta - 1 < prev.len() {
                    acc.add(lx + prev[eta - 1]);
                }
            }
            row[eta] = acc.ln_value() - (eta as f64).ln();
        }
        table.push(row);
    }
    Ok(table)
}

fn ln_rising_table(x: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for j in 0..len {
        acc += (x + j as f64).ln();
        out.push(acc);
    }
    out
}

fn ln_dot_rising(ln_w: &[f64], rising: &[f64]) -> f64 {
    let mut acc = LogSumExp::default();
    for (eta, w) in ln_w.iter().enumerate() {
        acc.add(w + rising[eta]);
    }
    acc.ln_value()
}

/// `Pr{𝓜̄(t) = n̄}`. The returned sum carries the truncation bound of the
/// clock series.
pub fn tc_pmf(params: &TcModelParams, n: &[u64], t: f64, ctl: &SeriesControl) -> Result<SeriesSum> {
    params.check_counts(n)?;
    ctl.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(MgcpError::InvalidArgument(format!("time t = {t} must be nonnegative")));
    }
    if t == 0.0 {
        let value = if n.iter().all(|&v| v == 0) { 1.0 } else { 0.0 };
        return Ok(SeriesSum {
            value,
            ln_abs: value.ln(),
            terms: 0,
            tail_bound: 0.0,
        });
    }
    let weights = (0..params.q())
        .map(|i| composition_weights(params, i, n[i]))
        .collect::<Result<Vec<_>>>()?;
    let lt = params.lambda() * t;
    let ln_rho: Vec<f64> = (0..params.q()).map(|i| params.rho(i).ln()).collect();
    let base = lt * (-params.theta()).ln_1p();
    let ln_theta = params.theta().ln();
    let terms = (0u64..).map(|h| {
        let shift = h as f64 + lt;
        let mut ln = base + h as f64 * ln_theta - ln_factorial(h) + ln_poch_unchecked(lt, h);
        for (w, lr) in weights.iter().zip(&ln_rho) {
            let rising = ln_rising_table(shift, w.len() - 1);
            ln += shift * lr + ln_dot_rising(w, &rising);
        }
        Term::positive(ln)
    });
    sum_series_with_ratio_limit(terms, ctl, params.clock_ratio())
}

/// Closed form of `Pr{𝓜̄(t) = 0̄} = ((1−θ)ρ / (1−θρ))^{λt}`, `ρ = Πρ_i`.
pub fn tc_pmf_zero(params: &TcModelParams, t: f64) -> f64 {
    let rho = params.rho_product();
    let th = params.theta();
    (params.lambda() * t * ((1.0 - th) * rho / (1.0 - th * rho)).ln()).exp()
}

/// One component of the independent-clock process `M_i(Z_i(t))`.
pub fn mz_pmf_component(params: &TcModelParams, i: usize, n: u64, t: f64) -> Result<f64> {
    params.check_index(i)?;
    if !(t > 0.0) {
        return Err(MgcpError::InvalidArgument(format!("time t = {t} must be positive")));
    }
    let lt = params.lambda() * t;
    let w = composition_weights(params, i, n)?;
    let rising = ln_rising_table(lt, n as usize);
    Ok((lt * params.rho(i).ln() + ln_dot_rising(&w, &rising)).exp())
}

/// `Pr{M̄(Z̄(t)) = n̄}` with independent gamma clocks `Z_i`.
pub fn mz_pmf(params: &TcModelParams, n: &[u64], t: f64) -> Result<f64> {
    params.check_counts(n)?;
    (0..params.q()).try_fold(1.0, |acc, i| Ok(acc * mz_pmf_component(params, i, n[i], t)?))
}

/// `D_i(ū) = 1 + Σ_j λ_ij (1 − u_i^j) / a_i`.
fn pgf_factor<T>(params: &TcModelParams, i: usize, u: T) -> T
where
    T: Copy + std::ops::Mul<Output = T> + std::ops::Sub<Output = T> + std::ops::Add<Output = T> + From<f64>,
{
    let a = params.sub().a()[i];
    let mut pow = u;
    let mut acc = T::from(1.0);
    for r in params.gcp().component(i).rates() {
        acc = acc + T::from(r / a) * (T::from(1.0) - pow);
        pow = pow * u;
    }
    acc
}

/// Joint probability generating function `E Π u_i^{𝓜_i(t)}`.
pub fn tc_pgf(params: &TcModelParams, u: &[f64], t: f64) -> Result<f64> {
    if u.len() != params.q() {
        return Err(MgcpError::InvalidArgument(format!("u has {} entries but q = {}", u.len(), params.q())));
    }
    if let Some(v) = u.iter().find(|v| !(v.abs() <= 1.0)) {
        return Err(MgcpError::InvalidArgument(format!("pgf argument {v} must satisfy |u| <= 1")));
    }
    if !(t >= 0.0) {
        return Err(MgcpError::InvalidArgument(format!("time t = {t} must be nonnegative")));
    }
    Ok((params.lambda() * t * tc_pgf_log_base(params, u)).exp())
}

/// `ln((1−θ) / (Π_i D_i(ū) − θ))`; `λ` times this is the Lévy exponent.
pub fn tc_pgf_log_base(params: &TcModelParams, u: &[f64]) -> f64 {
    let prod: f64 = (0..params.q()).map(|i| pgf_factor(params, i, u[i])).product();
    ((1.0 - params.theta()) / (prod - params.theta())).ln()
}

/// `E 𝓜_i(t)`.
pub fn tc_mean(params: &TcModelParams, i: usize, t: f64) -> Result<f64> {
    params.check_index(i)?;
    let a = params.sub().a()[i];
    Ok(params.gcp().component(i).mean_rate() * params.lambda() * t / (a * (1.0 - params.theta())))
}

/// `Cov(𝓜_i(t), 𝓜_l(t))`.
pub fn tc_cov(params: &TcModelParams, i: usize, l: usize, t: f64) -> Result<f64> {
    params.check_index(i)?;
    params.check_index(l)?;
    let lt = params.lambda() * t;
    let om = 1.0 - params.theta();
    let (ai, al) = (params.sub().a()[i], params.sub().a()[l]);
    let (mi, ml) = (params.gcp().component(i).mean_rate(), params.gcp().component(l).mean_rate());
    let cross = mi * ml * lt / (ai * al * om * om);
    if i == l {
        Ok(params.gcp().component(i).second_moment_rate() * lt / (ai * om) + cross)
    } else {
        Ok(params.theta() * cross)
    }
}

/// `c(ū) = −Σ_j λ_j (1 − e^{±ij})` for one component.
fn char_shift(params: &TcModelParams, i: usize, sign: f64) -> Complex {
    params
        .gcp()
        .component(i)
        .rates()
        .iter()
        .enumerate()
        .map(|(j, r)| -r * (1.0 - (I * (sign * (j + 1) as f64)).exp()))
        .sum()
}

/// Codifference of `𝓜_i(t)` and `𝓜_l(t)`.
pub fn tc_codifference(params: &TcModelParams, i: usize, l: usize, t: f64) -> Result<Complex> {
    params.check_index(i)?;
    params.check_index(l)?;
    let lt = params.lambda() * t;
    let th = params.theta();
    let om = 1.0 - th;
    let (ai, al) = (params.sub().a()[i], params.sub().a()[l]);
    let ci = char_shift(params, i, 1.0);
    let cl = char_shift(params, l, -1.0);
    let marg = Complex::from(ai * al * om * om) / ((ai * om - ci) * (al * om - cl));
    let mut out = -lt * marg.ln();
    if i != l {
        let joint = Complex::from(ai * al * om) / ((ai - ci) * (al - cl) - th * ai * al);
        out += lt * joint.ln();
    }
    Ok(out)
}

/// Mass of the Lévy measure at `n̄ ≻ 0̄`. The tail bound refers to the
/// simultaneous-jump series.
pub fn tc_levy_measure(params: &TcModelParams, n: &[u64], ctl: &SeriesControl) -> Result<SeriesSum> {
    params.check_counts(n)?;
    ctl.validate()?;
    if n.iter().all(|&v| v == 0) {
        return Err(MgcpError::domain("tc_levy_measure", "the Lévy measure has no mass at the origin"));
    }
    let weights = (0..params.q())
        .map(|i| composition_weights(params, i, n[i]))
        .collect::<Result<Vec<_>>>()?;
    let ln_lambda = params.lambda().ln();
    let nonzero: Vec<usize> = (0..params.q()).filter(|&i| n[i] > 0).collect();
    let axis = if nonzero.len() == 1 {
        let w = &weights[nonzero[0]];
        let mut acc = LogSumExp::default();
        for (eta, lw) in w.iter().enumerate().skip(1) {
            acc.add(lw + ln_gamma_unchecked(eta as f64));
        }
        (ln_lambda + acc.ln_value()).exp()
    } else {
        0.0
    };
    let ln_rho: Vec<f64> = (0..params.q()).map(|i| params.rho(i).ln()).collect();
    let ln_theta = params.theta().ln();
    let terms = (1u64..).map(|k| {
        let kf = k as f64;
        let mut ln = ln_lambda + kf * ln_theta - kf.ln();
        for (w, lr) in weights.iter().zip(&ln_rho) {
            let rising = ln_rising_table(kf, w.len() - 1);
            ln += kf * lr + ln_dot_rising(w, &rising);
        }
        Term::positive(ln)
    });
    let joint = sum_series_with_ratio_limit(terms, ctl, params.clock_ratio())?;
    let value = axis + joint.value;
    Ok(SeriesSum {
        value,
        ln_abs: value.ln(),
        terms: joint.terms,
        tail_bound: joint.tail_bound,
    })
}

/// Lévy mass of a pure `l`-jump in component `r`, in closed form:
/// `λ Σ_η W_r[l][η] (η−1)! (1 − θρ)^{−η}`.
pub fn axis_jump_intensity(params: &TcModelParams, r: usize, l: u64) -> Result<f64> {
    params.check_index(r)?;
    if l == 0 {
        return Err(MgcpError::InvalidArgument("jump size must be at least 1".into()));
    }
    let w = composition_weights(params, r, l)?;
    let ln_base = -(1.0 - params.clock_ratio()).ln();
    let mut acc = LogSumExp::default();
    for (eta, lw) in w.iter().enumerate().skip(1) {
        acc.add(lw + ln_factorial(eta as u64 - 1) + eta as f64 * ln_base);
    }
    Ok(params.lambda() * acc.ln_value().exp())
}

// ---------------------------------------------------------------------------
// Bulk evaluation
// ---------------------------------------------------------------------------

/// Per-entry state of a streamed positive series, with the same stopping
/// rule as `sum_series_with_ratio_limit`.
#[derive(Debug, Clone, Copy, Default)]
struct Lane {
    sum: CompensatedSum,
    last_ln: Option<f64>,
    run: usize,
    tail: f64,
    done: bool,
}

impl Lane {
    fn push(&mut self, ln_term: f64, ctl: &SeriesControl, ratio_limit: f64) {
        let term = if ln_term == f64::NEG_INFINITY { 0.0 } else { ln_term.exp() };
        self.sum.add(term);
        let partial = self.sum.value();
        let small = term <= ctl.rel_tol * partial || term <= ctl.abs_tol;
        self.run = if small { self.run + 1 } else { 0 };
        let ratio = match self.last_ln {
            Some(prev) if ln_term != f64::NEG_INFINITY => (ln_term - prev).exp(),
            Some(_) => 0.0,
            None => f64::INFINITY,
        };
        self.last_ln = Some(ln_term);
        let r = ratio.max(ratio_limit);
        self.tail = if term == 0.0 {
            0.0
        } else if r < 1.0 {
            term * r / (1.0 - r)
        } else {
            f64::INFINITY
        };
        self.done = self.run >= ctl.decreasing_run && self.tail <= (ctl.rel_tol * partial).max(ctl.abs_tol);
    }
}

/// Clock-series description: the term at index `h` is
/// `exp(prefix(h)) · Π_i ρ_i^{s(h)} Σ_η W_i[n_i][η] (s(h))_η`.
struct ClockSeries<'a> {
    tables: &'a [Vec<Vec<f64>>],
    ln_rho: Vec<f64>,
    start: u64,
    shift: &'a (dyn Fn(u64) -> f64 + Sync),
    prefix: &'a (dyn Fn(u64) -> f64 + Sync),
    ratio_limit: f64,
}

impl ClockSeries<'_> {
    /// `ln(ρ_i^{s} S_i(s; n))` for every `n` in component `i`'s table.
    fn component_vector(&self, i: usize, s: f64) -> Vec<f64> {
        let table = &self.tables[i];
        let rising = ln_rising_table(s, table.len().saturating_sub(1));
        let lr = s * self.ln_rho[i];
        table.iter().map(|row| lr + ln_dot_rising(row, &rising)).collect()
    }

    fn run_cells(&self, cells: &[Vec<u64>], ctl: &SeriesControl, exec: Execution) -> Result<Vec<Lane>> {
        let mut lanes = vec![Lane::default(); cells.len()];
        let q = self.tables.len();
        for (count, h) in (self.start..).enumerate() {
            if count >= ctl.max_terms {
                let partial = lanes.iter().map(|l| l.sum.value()).sum();
                return Err(MgcpError::NonConvergence { partial, terms: count });
            }
            let s = (self.shift)(h);
            let prefix = (self.prefix)(h);
            let vecs: Vec<Vec<f64>> = (0..q).map(|i| self.component_vector(i, s)).collect();
            for_each_mut(exec, &mut lanes, |c, lane| {
                let ln: f64 = prefix + (0..q).map(|i| vecs[i][cells[c][i] as usize]).sum::<f64>();
                lane.push(ln, ctl, self.ratio_limit);
            });
            if lanes.iter().all(|l| l.done) {
                return Ok(lanes);
            }
        }
        unreachable!("unbounded index range")
    }

    /// Sums grouped by total count `m = Σ n_i ≤ max_total`.
    fn run_totals(&self, max_total: usize, ctl: &SeriesControl) -> Result<Vec<Lane>> {
        let mut lanes = vec![Lane::default(); max_total + 1];
        let q = self.tables.len();
        for (count, h) in (self.start..).enumerate() {
            if count >= ctl.max_terms {
                let partial = lanes.iter().map(|l| l.sum.value()).sum();
                return Err(MgcpError::NonConvergence { partial, terms: count });
            }
            let s = (self.shift)(h);
            let mut shift_ln = (self.prefix)(h);
            let mut conv: Vec<f64> = vec![1.0];
            for i in 0..q {
                let v = self.component_vector(i, s);
                let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                shift_ln += top;
                let lin: Vec<f64> = v.iter().map(|x| (x - top).exp()).collect();
                let mut next = vec![0.0; (conv.len() + lin.len() - 1).min(max_total + 1)];
                for (a, ca) in conv.iter().enumerate() {
                    if *ca == 0.0 {
                        continue;
                    }
                    for (b, lb) in lin.iter().enumerate() {
                        if a + b > max_total {
                            break;
                        }
                        next[a + b] += ca * lb;
                    }
                }
                conv = next;
            }
            for (m, lane) in lanes.iter_mut().enumerate() {
                let c = conv.get(m).copied().unwrap_or(0.0);
                let ln = if c > 0.0 { shift_ln + c.ln() } else { f64::NEG_INFINITY };
                lane.push(ln, ctl, self.ratio_limit);
            }
            if lanes.iter().all(|l| l.done) {
                return Ok(lanes);
            }
        }
        unreachable!("unbounded index range")
    }
}

fn tables_for(params: &TcModelParams, max_total: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    (0..params.q()).map(|i| weight_table(params, i, max_total)).collect()
}

/// All `n̄ ≥ 0̄` with `Σ n_i ≤ max_total`, in lexicographic order.
pub fn cells_up_to(q: usize, max_total: u64) -> Vec<Vec<u64>> {
    fn rec(q: usize, budget: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if prefix.len() == q {
            out.push(prefix.clone());
            return;
        }
        for v in 0..=budget {
            prefix.push(v);
            rec(q, budget - v, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(q, max_total, &mut Vec::with_capacity(q), &mut out);
    out
}

/// Values of a series over a set of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellValues {
    pub cells: Vec<Vec<u64>>,
    pub values: Vec<f64>,
    /// Truncation bound of each cell's series.
    pub bounds: Vec<f64>,
    /// Sum of `bounds`.
    pub tail_bound: f64,
}

impl CellValues {
    fn new(cells: Vec<Vec<u64>>, values: Vec<f64>, lanes: &[Lane]) -> Self {
        let bounds: Vec<f64> = lanes.iter().map(|l| l.tail).collect();
        Self {
            tail_bound: bounds.iter().sum(),
            cells,
            values,
            bounds,
        }
    }

    pub fn total(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        self.values.iter().for_each(|v| acc.add(*v));
        acc.value()
    }
}

/// Values of a series grouped by total count.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalValues {
    /// Entry `m` belongs to total count `m`.
    pub values: Vec<f64>,
    pub tail_bound: f64,
}

fn pmf_series<'a>(
    params: &TcModelParams,
    tables: &'a [Vec<Vec<f64>>],
    t: f64,
    shift: &'a (dyn Fn(u64) -> f64 + Sync),
    prefix: &'a (dyn Fn(u64) -> f64 + Sync),
) -> ClockSeries<'a> {
    let _ = t;
    ClockSeries {
        tables,
        ln_rho: (0..params.q()).map(|i| params.rho(i).ln()).collect(),
        start: 0,
        shift,
        prefix,
        ratio_limit: params.clock_ratio(),
    }
}

fn check_positive_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(MgcpError::InvalidArgument(format!("time t = {t} must be positive")));
    }
    Ok(())
}

/// `Pr{𝓜̄(t) = n̄}` for every `n̄` with `Σ n_i ≤ max_total`.
pub fn tc_pmf_grid(
    params: &TcModelParams,
    max_total: u64,
    t: f64,
    ctl: &SeriesControl,
    exec: Execution,
) -> Result<CellValues> {
    ctl.validate()?;
    let cells = cells_up_to(params.q(), max_total);
    if t == 0.0 {
        let values = cells.iter().map(|c| if c.iter().all(|&n| n == 0) { 1.0 } else { 0.0 }).collect();
        let lanes = vec![Lane::default(); cells.len()];
        return Ok(CellValues::new(cells, values, &lanes));
    }
    check_positive_time(t)?;
    let tables = tables_for(params, max_total as usize)?;
    let lt = params.lambda() * t;
    let base = lt * (-params.theta()).ln_1p();
    let ln_theta = params.theta().ln();
    let shift = move |h: u64| h as f64 + lt;
    let prefix = move |h: u64| base + h as f64 * ln_theta - ln_factorial(h) + ln_poch_unchecked(lt, h);
    let series = pmf_series(params, &tables, t, &shift, &prefix);
    let lanes = series.run_cells(&cells, ctl, exec)?;
    let values = lanes.iter().map(|l| l.sum.value()).collect();
    Ok(CellValues::new(cells, values, &lanes))
}

/// `Pr{Σ_i 𝓜_i(t) = m}` for `m = 0..=max_total`.
pub fn total_count_pmf(params: &TcModelParams, max_total: u64, t: f64, ctl: &SeriesControl) -> Result<TotalValues> {
    ctl.validate()?;
    if t == 0.0 {
        let mut values = vec![0.0; max_total as usize + 1];
        values[0] = 1.0;
        return Ok(TotalValues { values, tail_bound: 0.0 });
    }
    check_positive_time(t)?;
    let tables = tables_for(params, max_total as usize)?;
    let lt = params.lambda() * t;
    let base = lt * (-params.theta()).ln_1p();
    let ln_theta = params.theta().ln();
    let shift = move |h: u64| h as f64 + lt;
    let prefix = move |h: u64| base + h as f64 * ln_theta - ln_factorial(h) + ln_poch_unchecked(lt, h);
    let series = pmf_series(params, &tables, t, &shift, &prefix);
    let lanes = series.run_totals(max_total as usize, ctl)?;
    Ok(TotalValues {
        values: lanes.iter().map(|l| l.sum.value()).collect(),
        tail_bound: lanes.iter().map(|l| l.tail).sum(),
    })
}

fn levy_series<'a>(
    params: &TcModelParams,
    tables: &'a [Vec<Vec<f64>>],
    shift: &'a (dyn Fn(u64) -> f64 + Sync),
    prefix: &'a (dyn Fn(u64) -> f64 + Sync),
) -> ClockSeries<'a> {
    ClockSeries {
        tables,
        ln_rho: (0..params.q()).map(|i| params.rho(i).ln()).collect(),
        start: 1,
        shift,
        prefix,
        ratio_limit: params.clock_ratio(),
    }
}

fn axis_mass(params: &TcModelParams, tables: &[Vec<Vec<f64>>], i: usize, n: usize) -> f64 {
    let mut acc = LogSumExp::default();
    for (eta, lw) in tables[i][n].iter().enumerate().skip(1) {
        acc.add(lw + ln_gamma_unchecked(eta as f64));
    }
    params.lambda() * acc.ln_value().exp()
}

/// Lévy masses of every nonzero `n̄` with `Σ n_i ≤ max_total`.
pub fn tc_levy_grid(params: &TcModelParams, max_total: u64, ctl: &SeriesControl, exec: Execution) -> Result<CellValues> {
    ctl.validate()?;
    let cells: Vec<Vec<u64>> = cells_up_to(params.q(), max_total)
        .into_iter()
        .filter(|c| c.iter().any(|&v| v > 0))
        .collect();
    let tables = tables_for(params, max_total as usize)?;
    let ln_lambda = params.lambda().ln();
    let ln_theta = params.theta().ln();
    let shift = |k: u64| k as f64;
    let prefix = move |k: u64| ln_lambda + k as f64 * ln_theta - (k as f64).ln();
    let series = levy_series(params, &tables, &shift, &prefix);
    let lanes = series.run_cells(&cells, ctl, exec)?;
    let values = cells
        .iter()
        .zip(&lanes)
        .map(|(c, lane)| {
            let nz: Vec<usize> = (0..c.len()).filter(|&i| c[i] > 0).collect();
            let axis = if nz.len() == 1 {
                axis_mass(params, &tables, nz[0], c[nz[0]] as usize)
            } else {
                0.0
            };
            axis + lane.sum.value()
        })
        .collect();
    Ok(CellValues::new(cells, values, &lanes))
}

/// Lévy mass of jumps with total size `j`, for `j = 0..=max_total`
/// (entry 0 is zero).
pub fn levy_total_masses(params: &TcModelParams, max_total: u64, ctl: &SeriesControl) -> Result<TotalValues> {
    ctl.validate()?;
    let tables = tables_for(params, max_total as usize)?;
    let ln_lambda = params.lambda().ln();
    let ln_theta = params.theta().ln();
    let shift = |k: u64| k as f64;
    let prefix = move |k: u64| ln_lambda + k as f64 * ln_theta - (k as f64).ln();
    let series = levy_series(params, &tables, &shift, &prefix);
    let lanes = series.run_totals(max_total as usize, ctl)?;
    let mut values: Vec<f64> = lanes.iter().map(|l| l.sum.value()).collect();
    values[0] = 0.0;
    for (j, v) in values.iter_mut().enumerate().skip(1) {
        for i in 0..params.q() {
            *v += axis_mass(params, &tables, i, j);
        }
    }
    Ok(TotalValues {
        values,
        tail_bound: lanes.iter().skip(1).map(|l| l.tail).sum(),
    })
}

/// Mean and variance of the total count `Σ_i 𝓜_i(t)`.
pub fn total_count_moments(params: &TcModelParams, t: f64) -> Result<(f64, f64)> {
    let q = params.q();
    let mut mean = 0.0;
    let mut var = 0.0;
    for i in 0..q {
        mean += tc_mean(params, i, t)?;
        for l in 0..q {
            var += tc_cov(params, i, l, t)?;
        }
    }
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcp::gcp_pmf;
    use approx::assert_relative_eq;

    pub(crate) fn model(rates: Vec<Vec<f64>>, a: Vec<f64>, theta: f64, lambda: f64) -> TcModelParams {
        TcModelParams::new(
            MultiGcpParams::from_rates(rates).unwrap(),
            SubordinatorParams::new(lambda, theta, a).unwrap(),
        )
        .unwrap()
    }

    fn baseline() -> TcModelParams {
        model(vec![vec![0.5], vec![0.5, 0.5]], vec![1.0, 1.0], 0.5, 1.0)
    }

    #[test]
    fn dimension_mismatch() {
        let e = TcModelParams::new(
            MultiGcpParams::from_rates(vec![vec![1.0]]).unwrap(),
            SubordinatorParams::new(1.0, 0.5, vec![1.0, 1.0]).unwrap(),
        );
        assert!(e.is_err());
        assert!(tc_pmf(&baseline(), &[0], 1.0, &SeriesControl::default()).is_err());
    }

    #[test]
    fn weight_table_matches_enumeration() {
        let m = model(vec![vec![0.3, 0.2, 0.6], vec![1.0]], vec![0.7, 2.0], 0.4, 1.0);
        for i in 0..2 {
            let table = weight_table(&m, i, 25).unwrap();
            for n in 0..=25u64 {
                let direct = composition_weights(&m, i, n).unwrap();
                for (a, b) in table[n as usize].iter().zip(&direct) {
                    if b.is_finite() {
                        assert_relative_eq!(a, b, max_relative = 1e-12);
                    } else {
                        assert_eq!(a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_state_closed_form() {
        let ctl = SeriesControl::default();
        let m = model(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0], 0.5, 1.0);
        let p = tc_pmf(&m, &[0, 0], 1.0, &ctl).unwrap();
        assert_relative_eq!(p.value, 1.0 / 7.0, max_relative = 1e-12);
        assert_relative_eq!(tc_pmf_zero(&m, 1.0), 1.0 / 7.0, max_relative = 1e-14);
        let b = baseline();
        for &t in &[0.2, 1.0, 3.5] {
            let p = tc_pmf(&b, &[0, 0], t, &ctl).unwrap().value;
            assert_relative_eq!(p, tc_pmf_zero(&b, t), max_relative = 1e-12);
            assert_relative_eq!(p, tc_pgf(&b, &[0.0, 0.0], t).unwrap(), max_relative = 1e-12);
        }
        assert_eq!(tc_pmf(&b, &[0, 0], 0.0, &ctl).unwrap().value, 1.0);
        assert_eq!(tc_pmf(&b, &[1, 0], 0.0, &ctl).unwrap().value, 0.0);
    }

    #[test]
    fn grid_agrees_with_pointwise() {
        let ctl = SeriesControl::default();
        let b = model(vec![vec![0.5], vec![0.2, 0.5, 0.1]], vec![1.3, 0.6], 0.35, 1.4);
        let grid = tc_pmf_grid(&b, 12, 0.8, &ctl, Execution::Parallel).unwrap();
        for (cell, v) in grid.cells.iter().zip(&grid.values) {
            let p = tc_pmf(&b, cell, 0.8, &ctl).unwrap().value;
            assert_relative_eq!(*v, p, max_relative = 1e-11);
        }
        let seq = tc_pmf_grid(&b, 12, 0.8, &ctl, Execution::Sequential).unwrap();
        assert_eq!(grid, seq);
        let totals = total_count_pmf(&b, 12, 0.8, &ctl).unwrap();
        for m in 0..=12u64 {
            let direct: f64 = grid
                .cells
                .iter()
                .zip(&grid.values)
                .filter(|(c, _)| c.iter().sum::<u64>() == m)
                .map(|(_, v)| v)
                .sum();
            assert_relative_eq!(totals.values[m as usize], direct, max_relative = 1e-11);
        }
    }

    #[test]
    fn normalization() {
        let ctl = SeriesControl::default();
        let b = baseline();
        let t = 1.0;
        let (mean, var) = total_count_moments(&b, t).unwrap();
        // the total count has a geometric tail, so go well past mean + 12 sd
        let n = 4 * (mean + 12.0 * var.sqrt()).ceil() as u64;
        let totals = total_count_pmf(&b, n, t, &ctl).unwrap();
        let mass: f64 = totals.values.iter().sum();
        assert!((1.0 - 1e-10..=1.0 + 1e-10).contains(&mass), "{mass}");
    }

    #[test]
    fn pgf_duality_and_marginal() {
        let ctl = SeriesControl::default();
        let b = baseline();
        let grid = tc_pmf_grid(&b, 70, 1.0, &ctl, Execution::Parallel).unwrap();
        let u = [0.3f64, 0.7];
        let sum: f64 = grid
            .cells
            .iter()
            .zip(&grid.values)
            .map(|(c, v)| v * u[0].powi(c[0] as i32) * u[1].powi(c[1] as i32))
            .sum();
        assert_relative_eq!(sum, tc_pgf(&b, &u, 1.0).unwrap(), max_relative = 1e-8);

        // marginal of component 1 is a one-dimensional model with its own clock
        let single = model(vec![vec![0.5]], vec![1.0], 0.5, 1.0);
        for n1 in 0..5u64 {
            let marg: f64 = grid
                .cells
                .iter()
                .zip(&grid.values)
                .filter(|(c, _)| c[0] == n1)
                .map(|(_, v)| v)
                .sum();
            let want = tc_pmf(&single, &[n1], 1.0, &ctl).unwrap().value;
            assert_relative_eq!(marg, want, max_relative = 1e-6);
        }
    }

    #[test]
    fn bivariate_poisson_special_case() {
        // k = (1, 1), a_1 = a_2 = a: direct double series in closed form
        let (l1, l2, a, th, lam, t) = (0.7, 1.3, 1.1, 0.45, 1.2, 0.9);
        let m = model(vec![vec![l1], vec![l2]], vec![a, a], th, lam);
        let lt = lam * t;
        let direct = |n1: u64, n2: u64| -> f64 {
            (0..400u64)
                .map(|h| {
                    let s = h as f64 + lt;
                    (lt * (1.0 - th).ln() + h as f64 * th.ln() - ln_factorial(h) + ln_poch_unchecked(lt, h)
                        + s * (a / (a + l1)).ln()
                        + s * (a / (a + l2)).ln()
                        + ln_poch_unchecked(s, n1)
                        + ln_poch_unchecked(s, n2)
                        + n1 as f64 * (l1 / (a + l1)).ln()
                        + n2 as f64 * (l2 / (a + l2)).ln()
                        - ln_factorial(n1)
                        - ln_factorial(n2))
                        .exp()
                })
                .sum()
        };
        let ctl = SeriesControl::default();
        for (n1, n2) in [(0, 0), (1, 0), (2, 3), (5, 1)] {
            let got = tc_pmf(&m, &[n1, n2], t, &ctl).unwrap().value;
            assert_relative_eq!(got, direct(n1, n2), max_relative = 1e-12);
        }
    }

    #[test]
    fn mz_factorizes_and_reduces() {
        let b = baseline();
        let p = mz_pmf(&b, &[2, 3], 1.3).unwrap();
        let f = mz_pmf_component(&b, 0, 2, 1.3).unwrap() * mz_pmf_component(&b, 1, 3, 1.3).unwrap();
        assert_relative_eq!(p, f, max_relative = 1e-15);
        assert_relative_eq!(mz_pmf(&b, &[0, 0], 1.3).unwrap(), (b.rho(0) * b.rho(1)).powf(1.3), max_relative = 1e-14);

        // q = 1, k = 1: negative binomial with success weight λ_1/(a+λ_1)
        let one = model(vec![vec![2.0]], vec![0.5], 0.5, 1.0);
        let lt: f64 = 1.7;
        for n in 0..6u64 {
            let x: f64 = 2.0 / 2.5;
            let want = ((1.0 - x).ln() * lt + ln_poch_unchecked(lt, n) - ln_factorial(n) + n as f64 * x.ln()).exp();
            assert_relative_eq!(mz_pmf(&one, &[n], lt).unwrap(), want, max_relative = 1e-13);
        }
        // mixture check against the GCP pmf integrated over the gamma law
        let x = crate::quadrature::gauss_kronrod_semi_infinite(
            |g| Ok(gcp_pmf(one.gcp().component(0), 2, g)? * crate::subordinator::gamma_ln_pdf(g, lt, 0.5).exp()),
            0.0,
            1e-13,
            1e-12,
            500,
        )
        .unwrap();
        assert_relative_eq!(mz_pmf(&one, &[2], lt).unwrap(), x.value, max_relative = 1e-9);
    }

    #[test]
    fn moments_and_codifference() {
        let m = model(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0], 0.5, 1.0);
        assert_relative_eq!(tc_cov(&m, 0, 0, 1.0).unwrap(), 6.0);
        assert_relative_eq!(tc_cov(&m, 0, 1, 1.0).unwrap(), 2.0);
        assert_relative_eq!(tc_mean(&m, 0, 1.0).unwrap(), 2.0);

        let b = model(vec![vec![0.4, 0.3], vec![0.8]], vec![1.2, 0.7], 0.3, 0.9);
        let t = 0.8;
        // codifference from the pgf continued to the unit circle
        let cf = |w0: f64, w1: f64| -> Complex {
            let z = [(I * w0).exp(), (I * w1).exp()];
            let prod: Complex = (0..2).map(|i| pgf_factor(&b, i, z[i])).product();
            (b.lambda() * t * (Complex::from(1.0 - b.theta()) / (prod - b.theta())).ln()).exp()
        };
        let want = cf(1.0, -1.0).ln() - cf(1.0, 0.0).ln() - cf(0.0, -1.0).ln();
        let got = tc_codifference(&b, 0, 1, t).unwrap();
        assert!((got - want).norm() < 1e-13, "{got} vs {want}");
        let diag = tc_codifference(&b, 1, 1, t).unwrap();
        assert!(diag.im.abs() < 1e-15 && diag.re > 0.0);
    }

    #[test]
    fn pgf_time_derivative() {
        let b = baseline();
        let u = [0.3, 0.7];
        let (t, h) = (1.0, 1e-4);
        let fd = (tc_pgf(&b, &u, t + h).unwrap() - tc_pgf(&b, &u, t - h).unwrap()) / (2.0 * h);
        let ode = b.lambda() * tc_pgf(&b, &u, t).unwrap() * tc_pgf_log_base(&b, &u);
        assert_relative_eq!(fd, ode, max_relative = 1e-8);
        assert_eq!(tc_pgf(&b, &[1.0, 1.0], 2.0).unwrap(), 1.0);
    }

    #[test]
    fn levy_measure_structure() {
        let ctl = SeriesControl::default();
        let b = baseline();
        assert!(tc_levy_measure(&b, &[0, 0], &ctl).is_err());
        for (r, n) in [(0usize, [1u64, 0u64]), (1, [0, 1]), (1, [0, 2])] {
            let mass = tc_levy_measure(&b, &n, &ctl).unwrap().value;
            let l = n[r];
            assert_relative_eq!(mass, axis_jump_intensity(&b, r, l).unwrap(), max_relative = 1e-12);
        }
        let grid = tc_levy_grid(&b, 10, &ctl, Execution::Sequential).unwrap();
        for (c, v) in grid.cells.iter().zip(&grid.values) {
            assert_relative_eq!(*v, tc_levy_measure(&b, c, &ctl).unwrap().value, max_relative = 1e-11);
        }
        let totals = levy_total_masses(&b, 10, &ctl).unwrap();
        for j in 1..=10u64 {
            let direct: f64 = grid
                .cells
                .iter()
                .zip(&grid.values)
                .filter(|(c, _)| c.iter().sum::<u64>() == j)
                .map(|(_, v)| v)
                .sum();
            assert_relative_eq!(totals.values[j as usize], direct, max_relative = 1e-11);
        }
    }

    #[test]
    fn levy_exponent_one_dimension() {
        // q = 1: λ ln((1−θ)/(D(u) − θ)) = Σ_n (u^n − 1) ν(n)
        let ctl = SeriesControl::default();
        let m = model(vec![vec![0.3, 0.4]], vec![1.5], 0.4, 1.2);
        let grid = tc_levy_grid(&m, 120, &ctl, Execution::Parallel).unwrap();
        let u: f64 = 0.6;
        let lhs = m.lambda() * tc_pgf_log_base(&m, &[u]);
        let rhs: f64 = grid
            .cells
            .iter()
            .zip(&grid.values)
            .map(|(c, v)| (u.powi(c[0] as i32) - 1.0) * v)
            .sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }
}
