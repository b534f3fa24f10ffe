//! One-dimensional adaptive quadrature.

use crate::error::{MgcpError, Result};

/// Integral estimate with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Adaptive Simpson on `[a, b]` with Richardson correction.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<f64>,
{
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut evals = 3;
    let (value, error) = simpson_rec(&f, a, b, fa, fm, fb, whole, tol, max_depth, &mut evals)?;
    Ok(Quadrature {
        value,
        error,
        evaluations: evals,
    })
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    *evals += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok((left + right + delta / 15.0, delta.abs() / 15.0));
    }
    if depth == 0 {
        return Err(MgcpError::NonConvergence {
            partial: left + right,
            terms: *evals,
        });
    }
    let (lv, le) = simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals)?;
    let (rv, re) = simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals)?;
    Ok((lv + rv, le + re))
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x)? + f(c + x)?;
        kronrod += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += G_WEIGHTS[i / 2] * s;
        }
    }
    Ok((kronrod * h, ((kronrod - gauss) * h).abs()))
}

/// Globally adaptive Gauss–Kronrod (7/15) on a finite interval.
pub fn gauss_kronrod<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_intervals: usize) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<f64>,
{
    let (v, e) = gk15(&f, a, b)?;
    let mut parts = vec![(a, b, v, e)];
    let mut evals = 15;
    loop {
        let value: f64 = parts.iter().map(|p| p.2).sum();
        let error: f64 = parts.iter().map(|p| p.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Quadrature {
                value,
                error,
                evaluations: evals,
            });
        }
        if parts.len() >= max_intervals {
            return Err(MgcpError::NonConvergence {
                partial: value,
                terms: evals,
            });
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (lv, le) = gk15(&f, lo, mid)?;
        let (rv, re) = gk15(&f, mid, hi)?;
        evals += 30;
        parts.push((lo, mid, lv, le));
        parts.push((mid, hi, rv, re));
    }
}

/// Gauss–Kronrod on `[a, ∞)` through the map `x = a + u/(1−u)`.
pub fn gauss_kronrod_semi_infinite<F>(f: F, a: f64, abs_tol: f64, rel_tol: f64, max_intervals: usize) -> Result<Quadrature>
where
    F: Fn(f64) -> Result<f64>,
{
    gauss_kronrod(
        |u| {
            if u >= 1.0 {
                return Ok(0.0);
            }
            let w = 1.0 - u;
            let v = f(a + u / w)?;
            Ok(if v == 0.0 { 0.0 } else { v / (w * w) })
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
        max_intervals,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_polynomials_and_exp() {
        let q = adaptive_simpson(|x| Ok(x * x * x), 0.0, 2.0, 1e-12, 30).unwrap();
        assert_relative_eq!(q.value, 4.0, max_relative = 1e-14);
        let q = adaptive_simpson(|x: f64| Ok((-x).exp()), 0.0, 10.0, 1e-12, 40).unwrap();
        assert_relative_eq!(q.value, 1.0 - (-10f64).exp(), max_relative = 1e-11);
        assert!(q.error < 1e-10);
    }

    #[test]
    fn simpson_reports_depth_exhaustion() {
        let r = adaptive_simpson(|x: f64| Ok((1.0 / x.max(1e-300)).sin()), 1e-9, 1.0, 1e-14, 4);
        assert!(matches!(r, Err(MgcpError::NonConvergence { .. })));
    }

    #[test]
    fn kronrod_smooth_and_singular() {
        let q = gauss_kronrod(|x: f64| Ok(x.cos()), 0.0, 1.0, 1e-14, 1e-14, 50).unwrap();
        assert_relative_eq!(q.value, 1f64.sin(), max_relative = 1e-14);
        // integrable endpoint singularity
        let q = gauss_kronrod(|x: f64| Ok(x.powf(-0.5)), 0.0, 1.0, 1e-10, 1e-10, 500).unwrap();
        assert_relative_eq!(q.value, 2.0, max_relative = 1e-8);
        let q = gauss_kronrod_semi_infinite(|x: f64| Ok(x * (-x).exp()), 0.0, 1e-12, 1e-12, 200).unwrap();
        assert_relative_eq!(q.value, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn errors_propagate() {
        let r = gauss_kronrod(|_| Err(MgcpError::InvalidArgument("boom".into())), 0.0, 1.0, 1e-6, 1e-6, 10);
        assert!(r.is_err());
    }
}
