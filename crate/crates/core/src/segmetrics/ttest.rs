//! Two-sided paired t-test with the t CDF evaluated through the regularized
//! incomplete beta function.

use crate::error::{CoreError, Result};

/// Lanczos approximation of ln Γ(x), |error| < 2e-10 for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_7e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000_000_000_190_015;
    for c in COEF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-14;
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub(crate) fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_bt = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let bt = ln_bt.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * betacf(a, b, x) / a
    } else {
        1.0 - bt * betacf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom:
/// `p = I_x(df/2, 1/2)` with `x = df / (df + t^2)`.
fn two_sided_p(t: f64, df: f64) -> f64 {
    inc_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// Paired two-sided t-test on `a - b`. Zero-variance differences map to
/// `(0, 1)` when the mean is zero and `(±inf, 0)` otherwise.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(CoreError::Contract(format!(
            "paired_ttest: {} vs {} scores",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(CoreError::Contract(
            "paired_ttest needs at least 2 pairs".into(),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let p = two_sided_p(t, (n - 1) as f64);
    Ok((t, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_samples() {
        let a = [0.3, 0.5, 0.7];
        let (t, p) = paired_ttest(&a, &a).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn hand_derived_df2_case() {
        // differences [1,2,3]: mean 2, sd 1, t = 2*sqrt(3), df 2
        // closed form: p = 1 - t/sqrt(2 + t^2)
        let a = [2.0, 4.0, 6.0];
        let b = [1.0, 2.0, 3.0];
        let (t, p) = paired_ttest(&a, &b).unwrap();
        assert!((t - 2.0 * 3.0_f64.sqrt()).abs() < 1e-12);
        let expected = 1.0 - t / (2.0 + t * t).sqrt();
        assert!((p - expected).abs() < 1e-10, "p={p} expected={expected}");
        assert!((p - 0.0742).abs() < 5e-4);
    }

    #[test]
    fn zero_variance_nonzero_mean() {
        let a = [2.0, 2.0];
        let b = [1.0, 1.0];
        let (t, p) = paired_ttest(&a, &b).unwrap();
        assert!(t.is_infinite() && t > 0.0);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn too_short_rejected() {
        assert!(paired_ttest(&[1.0], &[2.0]).is_err());
        assert!(paired_ttest(&[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn matches_reference_cdf() {
        // statrs as an independent oracle across a few (t, df) pairs
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for &(t, df) in &[(0.5, 3.0), (1.0, 5.0), (2.228, 10.0), (3.0, 29.0)] {
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            let expected = 2.0 * (1.0 - dist.cdf(t));
            let got = two_sided_p(t, df);
            assert!(
                (got - expected).abs() < 1e-8,
                "t={t} df={df}: {got} vs {expected}"
            );
        }
    }
}
