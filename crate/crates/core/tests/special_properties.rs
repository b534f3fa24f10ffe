use mgcp_core::special::{
    hyp3f2_terminating, log_gamma, log_pochhammer, log_real_binomial, sum_series, SeriesControl, Term,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Exact term-by-term sum for a nonpositive integer `a2`, and the sum of the
/// absolute terms.
fn hyp3f2_exact(a1: f64, a2: i64, a3: f64, b1: f64, b2: f64) -> (f64, f64) {
    let (a1, a2q, a3, b1, b2) = (rational(a1), BigRational::from_integer(a2.into()), rational(a3), rational(b1), rational(b2));
    let mut term = BigRational::from_integer(BigInt::from(1));
    let mut total = term.clone();
    let mut abs_total = term.clone();
    for m in 0..(-a2) {
        let mq = BigRational::from_integer(m.into());
        term = term * (&a1 + &mq) * (&a2q + &mq) * (&a3 + &mq)
            / ((&b1 + &mq) * (&b2 + &mq) * (&mq + BigRational::from_integer(1.into())));
        total += &term;
        abs_total += num_traits::Signed::abs(&term);
    }
    (total.to_f64().expect("representable"), abs_total.to_f64().expect("representable"))
}

proptest! {
    #[test]
    fn pochhammer_ratio_is_next_factor(x in 1e-3f64..200.0, k in 0u64..400) {
        let next = log_pochhammer(x, k + 1).unwrap();
        let r = (next - log_pochhammer(x, k).unwrap()).exp();
        // a log of size L carries L·ε of rounding, which the ratio inherits
        let tol = 1e-12f64.max(4.0 * f64::EPSILON * next.abs());
        prop_assert!((r - (x + k as f64)).abs() <= tol * (x + k as f64));
    }

    #[test]
    fn log_gamma_recursion(x in 0.05f64..150.0) {
        let lhs = log_gamma(x + 1.0).unwrap();
        let rhs = log_gamma(x).unwrap() + x.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1.0));
    }

    #[test]
    fn real_binomial_pascal(top in 0.5f64..60.0, k in 1u64..30) {
        // C(t+1, k) = C(t, k) + C(t, k−1) for t ≥ k − 1
        prop_assume!(top + 1.0 > k as f64);
        prop_assume!(top > k as f64);
        let b = |t: f64, k: u64| log_real_binomial(t, k).unwrap().exp();
        let lhs = b(top + 1.0, k);
        let rhs = b(top, k) + b(top, k - 1);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
    }

    #[test]
    fn hyp3f2_matches_exact_rational_sum(
        a1 in 0.25f64..6.0,
        terms in 1i64..=25,
        a3 in -8.0f64..8.0,
        b1 in 0.5f64..10.0,
        b2 in 0.5f64..30.0,
    ) {
        let a2 = -terms;
        let got = hyp3f2_terminating(a1, a2 as f64, a3, b1, b2).unwrap();
        let (want, scale) = hyp3f2_exact(a1, a2, a3, b1, b2);
        // relative to the largest value the partial sums could reach
        prop_assert!((got - want).abs() <= 1e-13 * scale, "{got} vs {want}");
    }

    #[test]
    fn geometric_series_and_tail_certificate(ratio_step in 1u32..=9) {
        let r = ratio_step as f64 / 10.0;
        let ctl = SeriesControl::default().with_rel_tol(1e-10);
        let s = sum_series((0..).map(|h| Term::positive(h as f64 * r.ln())), &ctl).unwrap();
        let exact = 1.0 / (1.0 - r);
        prop_assert!((s.value - exact).abs() <= 1e-10 * exact);
        let neglected = exact - s.value;
        prop_assert!(s.tail_bound >= neglected - 1e-15 * exact);
    }
}
