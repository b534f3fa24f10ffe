//! Special functions and controlled summation of slowly varying positive series.
//!
//! Every infinite sum in the crate goes through [`sum_series`]: terms arrive
//! as a log-magnitude plus a sign, are accumulated with compensated summation
//! on a floating scale, and the sum stops once a run of negligible terms has
//! been observed *and* the geometric tail certificate is below tolerance.

use std::f64::consts::LN_2;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{MgcpError, Result};

/// Complex numbers; `ln()` is the principal branch with `Im ∈ (−π, π]`.
pub type Complex = num_complex::Complex64;

/// The imaginary unit.
pub const I: Complex = Complex::new(0.0, 1.0);

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Truncation controls for infinite series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_terms: usize,
    pub decreasing_run: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_terms: 100_000,
            decreasing_run: 3,
        }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(MgcpError::param("series.rel_tol", "must be positive"));
        }
        if !(self.abs_tol > 0.0) {
            return Err(MgcpError::param("series.abs_tol", "must be positive"));
        }
        if self.max_terms == 0 {
            return Err(MgcpError::param("series.max_terms", "must be at least 1"));
        }
        if self.decreasing_run == 0 {
            return Err(MgcpError::param("series.decreasing_run", "must be at least 1"));
        }
        Ok(())
    }

    /// Same control with a different relative tolerance.
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

// ---------------------------------------------------------------------------
// Gamma family
// ---------------------------------------------------------------------------

/// `ζ(k) − 1` for `k = 0..ZETA_TERMS` (entries 0 and 1 unused).
const ZETA_TERMS: usize = 40;

fn zeta_minus_one() -> &'static [f64; ZETA_TERMS] {
    static TABLE: OnceLock<[f64; ZETA_TERMS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Euler-Maclaurin on sum_{n>=2} n^{-s} with cutoff N = 20.
        const N: f64 = 20.0;
        const B: [f64; 6] = [
            1.0 / 6.0,
            -1.0 / 30.0,
            1.0 / 42.0,
            -1.0 / 30.0,
            5.0 / 66.0,
            -691.0 / 2730.0,
        ];
        let mut out = [0.0; ZETA_TERMS];
        for (k, slot) in out.iter_mut().enumerate().skip(2) {
            let s = k as f64;
            let mut acc = CompensatedSum::default();
            for n in (2..20).rev() {
                acc.add((n as f64).powf(-s));
            }
            acc.add(N.powf(1.0 - s) / (s - 1.0));
            acc.add(0.5 * N.powf(-s));
            // B_{2j}/(2j)! * s (s+1) ... (s+2j-2) N^{-s-2j+1}
            let mut rising = s;
            let mut fact = 2.0;
            for (j, b) in B.iter().enumerate() {
                let j2 = 2 * (j + 1);
                acc.add(b / fact * rising * N.powf(-s - j2 as f64 + 1.0));
                rising *= (s + j2 as f64 - 1.0) * (s + j2 as f64);
                fact *= ((j2 + 1) * (j2 + 2)) as f64;
            }
            *slot = acc.value();
        }
        out
    })
}

/// `ln Γ(2 + z)` for `|z| ≤ 1/2`, exact zero at `z = 0`.
fn ln_gamma_two_plus(z: f64) -> f64 {
    let table = zeta_minus_one();
    let mut acc = CompensatedSum::default();
    let mut zk = -z;
    for (k, zm1) in table.iter().enumerate().skip(2) {
        zk *= -z;
        let term = zm1 * zk / k as f64;
        acc.add(term);
        if term.abs() < 1e-18 * (z.abs() + f64::MIN_POSITIVE) {
            break;
        }
    }
    // lnΓ(2+z) = z(1-γ) + Σ_{k≥2} (-1)^k (ζ(k)-1) z^k / k
    acc.add(z * (1.0 - EULER_GAMMA));
    acc.value()
}

fn ln_gamma_stirling(x: f64) -> f64 {
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut corr = 0.0;
    for c in C.iter().rev() {
        corr = corr * inv2 + c;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_TWO_PI + corr * inv
}

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(MgcpError::domain("log_gamma", format!("x = {x} is not a positive finite number")));
    }
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(x+1)/x, x+1 in [1, 1.5)
        ln_gamma_unchecked(x + 1.0) - x.ln()
    } else if x < 1.5 {
        let z = x - 1.0;
        ln_gamma_two_plus(z) - z.ln_1p()
    } else if x < 2.5 {
        ln_gamma_two_plus(x - 2.0)
    } else if x < 10.0 {
        let mut y = x;
        let mut prod = 1.0;
        while y >= 2.5 {
            y -= 1.0;
            prod *= y;
        }
        prod.ln() + ln_gamma_two_plus(y - 2.0)
    } else {
        ln_gamma_stirling(x)
    }
}

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma_unchecked(n as f64 + 1.0)
    }
}

/// Log of the rising factorial `(x)_k = x (x+1) ... (x+k-1)`, with `(x)_0 = 1`.
pub fn log_pochhammer(x: f64, k: u64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(MgcpError::domain("log_pochhammer", format!("x = {x} must be positive")));
    }
    Ok(ln_poch_unchecked(x, k))
}

pub(crate) fn ln_poch_unchecked(x: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k <= 256 {
        // chunked direct product; far more accurate than a Γ difference
        let mut sum = 0.0;
        let mut acc = 1.0;
        for i in 0..k {
            acc *= x + i as f64;
            if acc > 1e250 {
                sum += acc.ln();
                acc = 1.0;
            }
        }
        sum + acc.ln()
    } else {
        ln_gamma_unchecked(x + k as f64) - ln_gamma_unchecked(x)
    }
}

/// Log of the binomial coefficient with real upper argument,
/// `ln C(top, k) = ln Γ(top+1) − ln Γ(k+1) − ln Γ(top−k+1)`.
pub fn log_real_binomial(top: f64, k: u64) -> Result<f64> {
    let base = top - k as f64 + 1.0;
    if !(base > 0.0) || !top.is_finite() {
        return Err(MgcpError::domain(
            "log_real_binomial",
            format!("top - k + 1 = {base} must be positive"),
        ));
    }
    Ok(ln_poch_unchecked(base, k) - ln_factorial(k))
}

// ---------------------------------------------------------------------------
// Terminating 3F2
// ---------------------------------------------------------------------------

fn nonpositive_integer(a: f64) -> Option<u64> {
    (a <= 0.0 && a.fract() == 0.0 && a.is_finite()).then(|| (-a) as u64)
}

/// Terminating `₃F₂(a1, a2, a3; b1, b2; 1)`.
///
/// At least one upper parameter must be a nonpositive integer `−M`; the
/// finite sum over `m = 0..=M` is accumulated term-by-term.
pub fn hyp3f2_terminating(a1: f64, a2: f64, a3: f64, b1: f64, b2: f64) -> Result<f64> {
    let last = [a1, a2, a3]
        .iter()
        .filter_map(|&a| nonpositive_integer(a))
        .min()
        .ok_or_else(|| {
            MgcpError::domain(
                "hyp3f2_terminating",
                format!("no upper parameter of ({a1}, {a2}, {a3}) is a nonpositive integer"),
            )
        })?;
    for b in [b1, b2] {
        if let Some(pole) = nonpositive_integer(b) {
            if pole < last {
                return Err(MgcpError::domain(
                    "hyp3f2_terminating",
                    format!("lower parameter {b} hits a pole before the series terminates"),
                ));
            }
        }
    }
    let mut sum = CompensatedSum::default();
    let mut term = 1.0;
    sum.add(term);
    for m in 0..last {
        let m = m as f64;
        term *= (a1 + m) * (a2 + m) * (a3 + m) / ((b1 + m) * (b2 + m) * (m + 1.0));
        sum.add(term);
    }
    Ok(sum.value())
}

// ---------------------------------------------------------------------------
// Summation machinery
// ---------------------------------------------------------------------------

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    fn scale(&mut self, factor: f64) {
        self.sum *= factor;
        self.comp *= factor;
    }
}

/// Streaming `ln Σ exp(x_i)` over positive terms given by their logs.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    shift: f64,
    acc: CompensatedSum,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            acc: CompensatedSum::default(),
        }
    }
}

impl LogSumExp {
    pub fn add(&mut self, ln_x: f64) {
        if ln_x == f64::NEG_INFINITY {
            return;
        }
        if ln_x > self.shift {
            if self.shift != f64::NEG_INFINITY {
                self.acc.scale((self.shift - ln_x).exp());
            }
            self.shift = ln_x;
        }
        self.acc.add((ln_x - self.shift).exp());
    }

    pub fn ln_value(&self) -> f64 {
        if self.shift == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.shift + self.acc.value().ln()
        }
    }

    pub fn value(&self) -> f64 {
        self.ln_value().exp()
    }
}

/// One series term: `sign · exp(ln_mag)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub ln_mag: f64,
    pub negative: bool,
}

impl Term {
    pub fn positive(ln_mag: f64) -> Self {
        Self {
            ln_mag,
            negative: false,
        }
    }

    pub fn from_value(v: f64) -> Self {
        Self {
            ln_mag: v.abs().ln(),
            negative: v < 0.0,
        }
    }
}

/// Result of a truncated series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    /// `ln |value|`, valid even when `value` underflows.
    pub ln_abs: f64,
    pub terms: usize,
    /// Geometric bound on the neglected tail (absolute).
    pub tail_bound: f64,
}

/// Sum a series whose terms eventually decay geometrically.
///
/// The tail certificate uses the last observed term ratio.
pub fn sum_series<I>(terms: I, ctl: &SeriesControl) -> Result<SeriesSum>
where
    I: IntoIterator<Item = Term>,
{
    sum_series_with_ratio_limit(terms, ctl, 0.0)
}

/// As [`sum_series`], with a known asymptotic term ratio that the tail
/// certificate never goes below (for series whose ratios increase towards it).
pub fn sum_series_with_ratio_limit<I>(terms: I, ctl: &SeriesControl, ratio_limit: f64) -> Result<SeriesSum>
where
    I: IntoIterator<Item = Term>,
{
    let ln_abs_tol = ctl.abs_tol.ln();
    let ln_rel_tol = ctl.rel_tol.ln();
    // partial sum = shift-scaled accumulator
    let mut shift = f64::NEG_INFINITY;
    let mut acc = CompensatedSum::default();
    let mut prev: Option<f64> = None;
    let mut run = 0usize;
    let mut count = 0usize;

    let finish = |shift: f64, acc: &CompensatedSum, count: usize, tail_ln: f64| {
        let scaled = acc.value();
        let ln_abs = if shift == f64::NEG_INFINITY || scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            shift + scaled.abs().ln()
        };
        let value = if ln_abs == f64::NEG_INFINITY {
            0.0
        } else {
            scaled.signum() * ln_abs.exp()
        };
        SeriesSum {
            value,
            ln_abs,
            terms: count,
            tail_bound: tail_ln.exp(),
        }
    };

    for term in terms {
        if count >= ctl.max_terms {
            let s = finish(shift, &acc, count, f64::INFINITY);
            return Err(MgcpError::NonConvergence {
                partial: s.value,
                terms: count,
            });
        }
        count += 1;
        if term.ln_mag == f64::NEG_INFINITY {
            // an exactly zero term ends the series
            return Ok(finish(shift, &acc, count, f64::NEG_INFINITY));
        }
        if term.ln_mag.is_nan() || term.ln_mag == f64::INFINITY {
            return Err(MgcpError::domain("sum_series", format!("non-finite term at index {}", count - 1)));
        }
        if term.ln_mag > shift {
            if shift != f64::NEG_INFINITY {
                acc.scale((shift - term.ln_mag).exp());
            }
            shift = term.ln_mag;
        }
        let v = (term.ln_mag - shift).exp();
        acc.add(if term.negative { -v } else { v });

        let scaled = acc.value().abs();
        let ln_partial = if scaled > 0.0 { shift + scaled.ln() } else { f64::NEG_INFINITY };
        let small = term.ln_mag <= ln_rel_tol + ln_partial || term.ln_mag <= ln_abs_tol;
        run = if small { run + 1 } else { 0 };

        let ratio = prev.map(|p| (term.ln_mag - p).exp()).unwrap_or(f64::INFINITY);
        prev = Some(term.ln_mag);
        if run >= ctl.decreasing_run {
            let r = ratio.max(ratio_limit);
            if r < 1.0 {
                let tail_ln = term.ln_mag + (r / (1.0 - r)).ln();
                let tol_ln = (ln_rel_tol + ln_partial).max(ln_abs_tol);
                if tail_ln <= tol_ln {
                    return Ok(finish(shift, &acc, count, tail_ln));
                }
            }
        }
    }
    // finite sequence exhausted
    Ok(finish(shift, &acc, count, f64::NEG_INFINITY))
}

// ---------------------------------------------------------------------------
// Extended-range positive reals
// ---------------------------------------------------------------------------

/// A nonnegative real `m · 2^e` whose exponent does not overflow; used where a
/// product of many factors must keep full relative precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    mant: f64,
    exp: i64,
}

const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;

fn pow2(e: i64) -> f64 {
    if e > 1023 {
        f64::INFINITY
    } else if e < -1074 {
        0.0
    } else if e < -1022 {
        f64::from_bits(1u64 << (e + 1074))
    } else {
        f64::from_bits(((e + 1023) as u64) << 52)
    }
}

impl Scaled {
    pub const ONE: Scaled = Scaled { mant: 1.0, exp: 0 };
    pub const ZERO: Scaled = Scaled { mant: 0.0, exp: 0 };

    fn normalized(mant: f64, exp: i64) -> Self {
        if mant == 0.0 {
            return Self::ZERO;
        }
        let bits = mant.to_bits();
        let raw = ((bits >> 52) & 0x7ff) as i64;
        debug_assert!(raw != 0 && raw != 0x7ff, "mantissa left normal range");
        let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1023u64 << 52));
        Self { mant: m, exp: exp + raw - 1023 }
    }

    pub fn from_f64(x: f64) -> Self {
        debug_assert!(x >= 0.0 && x.is_finite());
        Self::normalized(x, 0)
    }

    /// `exp(x)` without overflow or underflow.
    pub fn from_exp(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let k = (x / LN_2).round();
        let r = (x - k * LN2_HI) - k * LN2_LO;
        Self::normalized(r.exp(), k as i64)
    }

    pub fn mul_f64(self, x: f64) -> Self {
        Self::normalized(self.mant * x, self.exp)
    }

    pub fn mul(self, other: Scaled) -> Self {
        Self::normalized(self.mant * other.mant, self.exp + other.exp)
    }

    pub fn to_f64(self) -> f64 {
        if self.mant == 0.0 {
            return 0.0;
        }
        // split the scaling so subnormal results round once
        let half = self.exp / 2;
        self.mant * pow2(half) * pow2(self.exp - half)
    }

    pub fn ln(self) -> f64 {
        if self.mant == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.mant.ln() + self.exp as f64 * LN_2
        }
    }

    /// Sum of nonnegative scaled values, aligned to the largest exponent.
    pub fn sum(values: &[Scaled]) -> Scaled {
        let top = values
            .iter()
            .filter(|v| v.mant != 0.0)
            .map(|v| v.exp)
            .max();
        let Some(top) = top else { return Self::ZERO };
        let mut acc = CompensatedSum::default();
        for v in values {
            acc.add(v.mant * pow2(v.exp - top));
        }
        Self::normalized(acc.value(), top)
    }
}
