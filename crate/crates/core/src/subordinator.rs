//! Multivariate gamma subordinator `G_i(t) = Z_i(t + B⁻(λt)/λ)`: gamma
//! processes with rates `a_i` read off a shared clock perturbed by a negative
//! binomial process with parameter `θ`.

use crate::error::{MgcpError, Result};
use crate::special::{
    ln_factorial, ln_gamma_unchecked, log_gamma, log_real_binomial, sum_series, Complex, SeriesControl, SeriesSum,
    Term, I,
};

/// Parameters `(λ, θ, a_1..a_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorParams {
    lambda: f64,
    theta: f64,
    a: Vec<f64>,
}

impl SubordinatorParams {
    pub fn new(lambda: f64, theta: f64, a: Vec<f64>) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(MgcpError::param("lambda", format!("{lambda} must be positive and finite")));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(MgcpError::param("theta", format!("{theta} must lie in (0, 1)")));
        }
        if a.is_empty() {
            return Err(MgcpError::param("a", "at least one component is required"));
        }
        if let Some((i, v)) = a.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(MgcpError::param(format!("a[{i}]"), format!("{v} must be positive and finite")));
        }
        Ok(Self { lambda, theta, a })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn q(&self) -> usize {
        self.a.len()
    }

    /// Common rate when all `a_i` coincide.
    pub fn common_rate(&self) -> Option<f64> {
        let a0 = self.a[0];
        self.a.iter().all(|&v| v == a0).then_some(a0)
    }

    fn index(&self, i: usize) -> Result<()> {
        if i >= self.q() {
            return Err(MgcpError::InvalidArgument(format!(
                "component index {i} out of range for q = {}",
                self.q()
            )));
        }
        Ok(())
    }
}

/// The clock `Y(t) = t + B⁻(λt)/λ`: unit drift plus atoms `λθ^k/k` at `k/λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YProcessParams {
    lambda: f64,
    theta: f64,
}

impl YProcessParams {
    pub fn new(lambda: f64, theta: f64) -> Result<Self> {
        SubordinatorParams::new(lambda, theta, vec![1.0])?;
        Ok(Self { lambda, theta })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn drift(&self) -> f64 {
        1.0
    }

    /// Lévy atom `(location, mass)` number `k ≥ 1`.
    pub fn atom(&self, k: u64) -> (f64, f64) {
        (k as f64 / self.lambda, self.lambda * self.theta.powi(k as i32) / k as f64)
    }
}

impl From<&SubordinatorParams> for YProcessParams {
    fn from(p: &SubordinatorParams) -> Self {
        Self {
            lambda: p.lambda,
            theta: p.theta,
        }
    }
}

fn check_time(t: f64, strict: bool) -> Result<()> {
    let ok = if strict { t > 0.0 } else { t >= 0.0 };
    if !ok || !t.is_finite() {
        return Err(MgcpError::InvalidArgument(format!(
            "time t = {t} must be {}",
            if strict { "positive" } else { "nonnegative" }
        )));
    }
    Ok(())
}

/// Negative binomial pmf `(1−θ)^size C(n+size−1, n) θ^n`.
pub fn nb_pmf(theta: f64, size: f64, n: u64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(MgcpError::domain("nb_pmf", format!("theta = {theta} outside (0, 1)")));
    }
    if !(size > 0.0) {
        return Err(MgcpError::domain("nb_pmf", format!("size = {size} must be positive")));
    }
    let ln = size * (-theta).ln_1p() + log_real_binomial(n as f64 + size - 1.0, n)? + n as f64 * theta.ln();
    Ok(ln.exp())
}

/// `ln` of the Γ(shape, rate) density.
pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma_unchecked(shape)
}

/// Joint density of `Ḡ(t)` as a series over the clock's negative binomial
/// jumps. `value` is the density; `tail_bound` bounds the neglected mass.
pub fn sub_pdf(params: &SubordinatorParams, x: &[f64], t: f64, ctl: &SeriesControl) -> Result<SeriesSum> {
    check_time(t, true)?;
    if x.len() != params.q() {
        return Err(MgcpError::InvalidArgument(format!(
            "point has {} coordinates but q = {}",
            x.len(),
            params.q()
        )));
    }
    if let Some(v) = x.iter().find(|v| !(**v > 0.0)) {
        return Err(MgcpError::InvalidArgument(format!("density requires x > 0, got {v}")));
    }
    let lt = params.lambda * t;
    let q = params.q() as f64;
    let ln_ax: f64 = params.a.iter().zip(x).map(|(a, x)| (a * x).ln()).sum();
    let base: f64 = lt * (-params.theta).ln_1p() - log_gamma(lt)?
        + params
            .a
            .iter()
            .zip(x)
            .map(|(a, x)| lt * (a * x).ln() - x.ln() - a * x)
            .sum::<f64>();
    let ln_theta = params.theta.ln();
    let terms = (0u64..).map(|n| {
        let nf = n as f64;
        Term::positive(
            base + nf * (ln_theta + ln_ax) - ln_factorial(n) - (q - 1.0) * ln_gamma_unchecked(nf + lt),
        )
    });
    sum_series(terms, ctl)
}

/// Joint Laplace–Stieltjes transform `E e^{−s̄·Ḡ(t)}`.
pub fn sub_lst(params: &SubordinatorParams, s: &[f64], t: f64) -> Result<f64> {
    check_time(t, false)?;
    if s.len() != params.q() {
        return Err(MgcpError::InvalidArgument(format!("s has {} entries but q = {}", s.len(), params.q())));
    }
    if let Some(v) = s.iter().find(|v| !(**v >= 0.0)) {
        return Err(MgcpError::InvalidArgument(format!("LST argument {v} must be nonnegative")));
    }
    let prod: f64 = params.a.iter().zip(s).map(|(a, s)| 1.0 + s / a).product();
    let ratio = (1.0 - params.theta) / (prod - params.theta);
    Ok((params.lambda * t * ratio.ln()).exp())
}

/// The transform at complex arguments, `exp(λt·Log(·))` on the principal
/// branch. `E e^{iα·Ḡ}` is the value at `s = −iα`.
pub fn sub_lst_complex(params: &SubordinatorParams, s: &[Complex], t: f64) -> Result<Complex> {
    check_time(t, false)?;
    if s.len() != params.q() {
        return Err(MgcpError::InvalidArgument(format!("s has {} entries but q = {}", s.len(), params.q())));
    }
    let prod: Complex = params.a.iter().zip(s).map(|(a, s)| 1.0 + s / a).product();
    let ratio = Complex::from(1.0 - params.theta) / (prod - params.theta);
    Ok((params.lambda * t * ratio.ln()).exp())
}

/// `E G_i(t) = λt / (a_i(1−θ))`.
pub fn sub_mean(params: &SubordinatorParams, i: usize, t: f64) -> Result<f64> {
    params.index(i)?;
    check_time(t, false)?;
    Ok(params.lambda * t / (params.a[i] * (1.0 - params.theta)))
}

/// `Cov(G_i(t), G_j(t))`.
pub fn sub_cov(params: &SubordinatorParams, i: usize, j: usize, t: f64) -> Result<f64> {
    params.index(i)?;
    params.index(j)?;
    check_time(t, false)?;
    let om = 1.0 - params.theta;
    let factor = if i == j { 1.0 } else { params.theta };
    Ok(params.lambda * t * factor / (params.a[i] * params.a[j] * om * om))
}

/// Codifference `ln E e^{i(G_i−G_j)} − ln E e^{iG_i} − ln E e^{−iG_j}`.
pub fn sub_codifference(params: &SubordinatorParams, i: usize, j: usize, t: f64) -> Result<Complex> {
    params.index(i)?;
    params.index(j)?;
    check_time(t, false)?;
    let lt = params.lambda * t;
    let om = 1.0 - params.theta;
    if i == j {
        let c = params.a[i] * om;
        return Ok(Complex::from(-lt * (c * c / (c * c + 1.0)).ln()));
    }
    let (ai, aj) = (params.a[i], params.a[j]);
    let joint = Complex::from(ai * aj * om) / (ai * aj * om + I * ai - I * aj + 1.0);
    let marg = Complex::from(ai * aj * om * om) / ((ai * om - I) * (aj * om + I));
    Ok(lt * joint.ln() - lt * marg.ln())
}

/// Characteristic function of the clock `Y(t)`.
pub fn y_char(params: &YProcessParams, u: f64, t: f64) -> Result<Complex> {
    check_time(t, false)?;
    let e = (I * (u / params.lambda)).exp();
    let base = (1.0 - params.theta) * e / (1.0 - params.theta * e);
    Ok((params.lambda * t * base.ln()).exp())
}

/// `y_char` rebuilt from the drift and the first `atoms` Lévy atoms; the
/// second value bounds the effect of the omitted atoms on the exponent.
pub fn y_char_from_atoms(params: &YProcessParams, u: f64, t: f64, atoms: u64) -> Result<(Complex, f64)> {
    check_time(t, false)?;
    let mut exponent = I * u;
    for k in 1..=atoms {
        let (x, mass) = params.atom(k);
        exponent += ((I * (u * x)).exp() - 1.0) * mass;
    }
    let theta = params.theta;
    let tail = 2.0 * params.lambda * theta.powi(atoms as i32 + 1) / ((atoms + 1) as f64 * (1.0 - theta));
    Ok(((exponent * t).exp(), t * tail))
}

fn common_rate(params: &SubordinatorParams) -> Result<f64> {
    params
        .common_rate()
        .ok_or_else(|| MgcpError::Unsupported("Fourier-domain evaluation requires equal rates a_i".into()))
}

fn psi(params: &SubordinatorParams, alpha: &[f64]) -> Result<Complex> {
    let a = common_rate(params)?;
    if alpha.len() != params.q() {
        return Err(MgcpError::InvalidArgument(format!(
            "alpha has {} entries but q = {}",
            alpha.len(),
            params.q()
        )));
    }
    let aq = a.powi(params.q() as i32);
    let prod: Complex = alpha.iter().map(|&al| a - I * al).product();
    Ok((prod - params.theta * aq) / ((1.0 - params.theta) * aq))
}

/// Fourier transform `E e^{iΣα_jG_j(t)}` for equal rates `a_i = a`.
pub fn sub_fourier(params: &SubordinatorParams, alpha: &[f64], t: f64) -> Result<Complex> {
    check_time(t, false)?;
    let base = psi(params, alpha)?.inv();
    Ok((params.lambda * t * base.ln()).exp())
}

/// A residual together with the magnitude it should be compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeResidual {
    pub residual: Complex,
    pub scale: f64,
}

impl PdeResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual.norm()
        } else {
            self.residual.norm() / self.scale
        }
    }
}

/// Elementary symmetric sums `e_1..e_q` of `z`, by subset enumeration.
fn elementary_symmetric(z: &[Complex]) -> Vec<Complex> {
    let q = z.len();
    let mut e = vec![Complex::from(0.0); q + 1];
    for mask in 1u32..(1u32 << q) {
        let prod: Complex = (0..q).filter(|j| mask & (1 << j) != 0).map(|j| z[j]).product();
        e[mask.count_ones() as usize] += prod;
    }
    e
}

/// Fourier-space residual of the shift-operator equation: mixed spatial
/// derivatives on the left, `−(1−θ)a^q (1 − e^{−∂_t/λ})` on the right.
pub fn de1_residual(params: &SubordinatorParams, alpha: &[f64], t: f64) -> Result<PdeResidual> {
    let a = common_rate(params)?;
    let shift = 1.0 / params.lambda;
    if !(t > shift) {
        return Err(MgcpError::InvalidArgument(format!(
            "t = {t} must exceed the shift 1/lambda = {shift}"
        )));
    }
    let q = params.q();
    let phi = sub_fourier(params, alpha, t)?;
    let phi_shifted = sub_fourier(params, alpha, t - shift)?;
    let z: Vec<Complex> = alpha.iter().map(|&al| -I * al).collect();
    let e = elementary_symmetric(&z);
    let symbol: Complex = (1..=q).map(|m| a.powi((q - m) as i32) * e[m]).sum();
    let lhs = symbol * phi;
    let c = (1.0 - params.theta) * a.powi(q as i32);
    let rhs = -c * (phi - phi_shifted);
    Ok(PdeResidual {
        residual: lhs - rhs,
        scale: lhs.norm().max(rhs.norm()).max(c * phi.norm()),
    })
}

/// `ψ(ᾱ) − 1`, whose powers are the Fourier symbols of the terms of the
/// logarithmic operator series.
pub fn de2_psi_minus_one(params: &SubordinatorParams, alpha: &[f64]) -> Result<Complex> {
    Ok(psi(params, alpha)? - 1.0)
}

/// Fourier symbol of the order-`n` term of the operator series expanded
/// literally as the binomial triple sum. Cancellation grows with `n`.
pub fn de2_term_literal(params: &SubordinatorParams, alpha: &[f64], n: u32) -> Result<Complex> {
    let a = common_rate(params)?;
    let q = params.q() as i32;
    if alpha.len() != params.q() {
        return Err(MgcpError::InvalidArgument("alpha dimension mismatch".into()));
    }
    let b1 = (1.0 - params.theta) * a.powi(q);
    let b2 = params.theta * a.powi(q);
    let binom = |n: u32, k: u32| -> f64 { (ln_factorial(n as u64) - ln_factorial(k as u64) - ln_factorial((n - k) as u64)).exp().round() };
    let mut outer = Complex::from(0.0);
    for k in 0..=n {
        let mut mid = Complex::from(0.0);
        for l in 0..=k {
            let mut prod = Complex::from(1.0);
            for &al in alpha {
                let mut inner = Complex::from(0.0);
                for lj in 0..=l {
                    inner += binom(l, lj) * a.powi(lj as i32) * (-I * al).powu(l - lj);
                }
                prod *= inner;
            }
            mid += binom(k, l) * (-b2).powi((k - l) as i32) * prod;
        }
        let sign = if (n - k).is_multiple_of(2) { 1.0 } else { -1.0 };
        outer += binom(n, k) * sign / b1.powi(k as i32) * mid;
    }
    Ok(outer)
}

/// Fourier-space residual `∂_tφ + λ·D_N φ` of the logarithmic operator
/// equation, with the operator series truncated after `order` terms.
///
/// Only defined where the logarithmic series converges, `|ψ − 1| < 1`.
pub fn de2_residual(params: &SubordinatorParams, alpha: &[f64], t: f64, order: u32) -> Result<PdeResidual> {
    if order == 0 {
        return Err(MgcpError::InvalidArgument("truncation order must be at least 1".into()));
    }
    let w = de2_psi_minus_one(params, alpha)?;
    if !(w.norm() < 1.0) {
        return Err(MgcpError::domain(
            "de2_residual",
            format!("|psi - 1| = {} is outside the convergence disc of the operator series", w.norm()),
        ));
    }
    let phi = sub_fourier(params, alpha, t)?;
    let dphi = -params.lambda * (1.0 + w).ln() * phi;
    let mut series = Complex::from(0.0);
    let mut power = Complex::from(1.0);
    for n in 1..=order {
        power *= w;
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        series += sign / n as f64 * power;
    }
    let applied = params.lambda * series * phi;
    Ok(PdeResidual {
        residual: dphi + applied,
        scale: dphi.norm().max(phi.norm() * params.lambda),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(q: usize) -> SubordinatorParams {
        SubordinatorParams::new(1.0, 0.5, vec![1.0; q]).unwrap()
    }

    #[test]
    fn validation() {
        assert!(SubordinatorParams::new(0.0, 0.5, vec![1.0]).is_err());
        assert!(SubordinatorParams::new(1.0, 1.0, vec![1.0]).is_err());
        assert!(SubordinatorParams::new(1.0, 0.0, vec![1.0]).is_err());
        let e = SubordinatorParams::new(1.0, 0.5, vec![1.0, -2.0]).unwrap_err();
        assert!(e.to_string().contains("a[1]"));
        assert!(SubordinatorParams::new(1.0, 0.5, vec![]).is_err());
        assert!(YProcessParams::new(1.0, 1.5).is_err());
    }

    #[test]
    fn negative_binomial() {
        assert_relative_eq!(nb_pmf(0.5, 1.0, 2).unwrap(), 0.125, max_relative = 1e-14);
        assert_relative_eq!(nb_pmf(0.3, 2.5, 0).unwrap(), 0.7f64.powf(2.5), max_relative = 1e-14);
        // C(4+1.5, 4) = 5.5·4.5·3.5·2.5/24
        let want = 0.7f64.powf(2.5) * (5.5 * 4.5 * 3.5 * 2.5 / 24.0) * 0.3f64.powi(4);
        assert_relative_eq!(nb_pmf(0.3, 2.5, 4).unwrap(), want, max_relative = 1e-13);
        let total: f64 = (0..400).map(|n| nb_pmf(0.3, 2.5, n).unwrap()).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-13);
        assert!(nb_pmf(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn univariate_pdf_is_gamma() {
        let p = SubordinatorParams::new(1.3, 0.4, vec![2.0]).unwrap();
        let ctl = SeriesControl::default();
        for &x in &[0.5, 1.0, 2.0] {
            for &t in &[0.4, 1.0, 3.0] {
                let got = sub_pdf(&p, &[x], t, &ctl).unwrap().value;
                let want = gamma_ln_pdf(x, 1.3 * t, 0.6 * 2.0).exp();
                assert_relative_eq!(got, want, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn bivariate_pdf_matches_mixture() {
        let p = SubordinatorParams::new(0.8, 0.6, vec![1.5, 0.7]).unwrap();
        let ctl = SeriesControl::default();
        let (x, t) = ([0.9, 2.2], 1.7);
        let lt = 0.8 * t;
        let mix: f64 = (0..300)
            .map(|n| {
                let s = n as f64 + lt;
                nb_pmf(0.6, lt, n).unwrap() * (gamma_ln_pdf(x[0], s, 1.5) + gamma_ln_pdf(x[1], s, 0.7)).exp()
            })
            .sum();
        let got = sub_pdf(&p, &x, t, &ctl).unwrap();
        assert_relative_eq!(got.value, mix, max_relative = 1e-12);
        assert!(got.tail_bound <= 1e-12 * got.value);

        let swapped = SubordinatorParams::new(0.8, 0.6, vec![0.7, 1.5]).unwrap();
        let other = sub_pdf(&swapped, &[2.2, 0.9], t, &ctl).unwrap();
        assert_relative_eq!(other.value, got.value, max_relative = 1e-14);
    }

    #[test]
    fn lst_values() {
        let p = unit(1);
        assert_eq!(sub_lst(&p, &[0.0], 2.0).unwrap(), 1.0);
        assert_relative_eq!(sub_lst(&p, &[1.0], 1.0).unwrap(), 1.0 / 3.0, max_relative = 1e-15);
        let p = SubordinatorParams::new(1.7, 0.35, vec![2.5]).unwrap();
        for &s in &[0.1, 1.0, 4.0] {
            let want = (1.0f64 + s / (0.65 * 2.5)).powf(-1.7 * 0.8);
            assert_relative_eq!(sub_lst(&p, &[s], 0.8).unwrap(), want, max_relative = 1e-14);
        }
        let p2 = unit(2);
        let z = sub_lst_complex(&p2, &[Complex::from(0.4), Complex::from(1.1)], 1.3).unwrap();
        assert_relative_eq!(z.re, sub_lst(&p2, &[0.4, 1.1], 1.3).unwrap(), max_relative = 1e-14);
        assert!(z.im.abs() < 1e-15);
        assert!(sub_lst(&p2, &[0.1], 1.0).is_err());
        assert!(sub_lst(&p2, &[-0.1, 0.0], 1.0).is_err());
    }

    #[test]
    fn moments() {
        let p = SubordinatorParams::new(1.0, 0.5, vec![2.0, 1.0]).unwrap();
        assert_relative_eq!(sub_mean(&p, 0, 2.0).unwrap(), 2.0);
        let u = unit(2);
        assert_relative_eq!(sub_cov(&u, 0, 1, 1.0).unwrap(), 2.0);
        assert_relative_eq!(sub_cov(&u, 1, 1, 1.0).unwrap(), 4.0);
        assert!(sub_cov(&u, 0, 2, 1.0).is_err());
    }

    #[test]
    fn codifference() {
        let u = unit(2);
        let d = sub_codifference(&u, 0, 0, 1.0).unwrap();
        assert_relative_eq!(d.re, 5f64.ln(), max_relative = 1e-14);
        assert_eq!(d.im, 0.0);

        // direct from the characteristic functions
        let p = SubordinatorParams::new(0.9, 0.3, vec![1.4, 0.6]).unwrap();
        let t = 0.7;
        let cf = |s0: f64, s1: f64| sub_lst_complex(&p, &[Complex::new(0.0, -s0), Complex::new(0.0, -s1)], t).unwrap();
        let want = cf(1.0, -1.0).ln() - cf(1.0, 0.0).ln() - cf(0.0, -1.0).ln();
        let got = sub_codifference(&p, 0, 1, t).unwrap();
        assert_relative_eq!(got.re, want.re, max_relative = 1e-12);
        assert_relative_eq!(got.im, want.im, epsilon = 1e-14);

        let eq = SubordinatorParams::new(1.0, 0.5, vec![2.0, 2.0]).unwrap();
        let joint = Complex::from(2.0) / (2.0 + I * 2.0 - I * 2.0 + 1.0);
        assert_eq!(joint.im, 0.0);
        assert!(sub_codifference(&eq, 0, 1, 1.0).unwrap().im.abs() < 1e-15);
    }

    #[test]
    fn clock_characteristic_function() {
        let y = YProcessParams::new(1.3, 0.45).unwrap();
        assert_eq!(y_char(&y, 0.0, 2.0).unwrap(), Complex::from(1.0));
        for &u in &[-2.0, 0.3, 1.7] {
            let direct = y_char(&y, u, 0.9).unwrap();
            assert!(direct.norm() <= 1.0 + 1e-15);
            let (atoms, tail) = y_char_from_atoms(&y, u, 0.9, 60).unwrap();
            assert!((direct - atoms).norm() <= 1e-12 + tail * 1.01);
        }
        assert_eq!(y.drift(), 1.0);
    }

    #[test]
    fn fourier_transform() {
        let p = SubordinatorParams::new(1.2, 0.4, vec![1.5, 1.5, 1.5]).unwrap();
        assert_eq!(sub_fourier(&p, &[0.0; 3], 1.0).unwrap(), Complex::from(1.0));
        let al = [0.3, -0.8, 1.1];
        let f = sub_fourier(&p, &al, 0.9).unwrap();
        let g = sub_fourier(&p, &[-0.3, 0.8, -1.1], 0.9).unwrap();
        assert_relative_eq!(f.re, g.re, max_relative = 1e-14);
        assert_relative_eq!(f.im, -g.im, max_relative = 1e-14);
        let s: Vec<Complex> = al.iter().map(|&a| -I * a).collect();
        let z = sub_lst_complex(&p, &s, 0.9).unwrap();
        assert!((z - f).norm() < 1e-14);
        let uneq = SubordinatorParams::new(1.0, 0.5, vec![1.0, 2.0]).unwrap();
        assert!(matches!(sub_fourier(&uneq, &[0.1, 0.2], 1.0), Err(MgcpError::Unsupported(_))));
    }

    #[test]
    fn shift_operator_equation() {
        let cases: [(usize, &[f64], f64); 3] = [(1, &[0.7], 2.0), (2, &[0.3, -0.9], 2.0), (3, &[0.2, 0.4, -0.5], 3.0)];
        for (q, alpha, t) in cases {
            let r = de1_residual(&unit(q), alpha, t).unwrap();
            assert!(r.relative() < 1e-12, "q={q}: {}", r.relative());
        }
        assert!(de1_residual(&unit(1), &[0.7], 0.5).is_err());
    }

    #[test]
    fn log_operator_equation() {
        let p = unit(2);
        assert_eq!(de2_residual(&p, &[0.0, 0.0], 1.0, 1).unwrap().residual.norm(), 0.0);
        let alpha = [0.15, -0.2];
        let w = de2_psi_minus_one(&p, &alpha).unwrap();
        for n in 1..=6 {
            let lit = de2_term_literal(&p, &alpha, n).unwrap();
            assert!((lit - w.powu(n)).norm() < 1e-12, "n={n}");
        }
        let alpha = [0.5, -0.6];
        let w = de2_psi_minus_one(&p, &alpha).unwrap();
        let r20 = de2_residual(&p, &alpha, 1.0, 20).unwrap().residual.norm();
        let r40 = de2_residual(&p, &alpha, 1.0, 40).unwrap().residual.norm();
        let rate = (r40 / r20).powf(1.0 / 20.0);
        assert!((rate / w.norm() - 1.0).abs() < 0.1, "rate {rate} vs {}", w.norm());
        assert!(de2_residual(&p, &[3.0, 3.0], 1.0, 5).is_err());
    }
}
