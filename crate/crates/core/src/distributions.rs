//! Chi-square, normal and Student-t distribution functions.
//!
//! The regularised incomplete gamma function uses its power series below
//! `a + 1` and a Lentz continued fraction above; the chi-square quantile is a
//! bracketed Newton iteration that falls back to bisection whenever a step
//! leaves the bracket.

use alloc::format;

use crate::{Error, Result};

const EPS: f64 = 1e-16;
const MAX_TERMS: usize = 10_000;
const TINY: f64 = 1e-300;

fn gamma_series(a: f64, x: f64) -> f64 {
    // P(a, x) = x^a e^{-x} / Gamma(a+1) * sum_n x^n / ((a+1)...(a+n))
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_TERMS {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if libm::fabs(term) < libm::fabs(sum) * EPS {
            break;
        }
    }
    sum * libm::exp(-x + a * libm::log(x) - libm::lgamma(a))
}

fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    // Q(a, x) by modified Lentz on the Legendre continued fraction.
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = b + an / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if libm::fabs(delta - 1.0) < EPS {
            break;
        }
    }
    libm::exp(-x + a * libm::log(x) - libm::lgamma(a)) * h
}

/// Regularised lower incomplete gamma `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularised upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn check_df(df: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::DomainError("chi-square degrees of freedom must be >= 1".into()));
    }
    Ok(df as f64)
}

fn check_x(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::DomainError(format!("chi-square argument {x} is negative or NaN")));
    }
    Ok(())
}

pub fn chi2_cdf(x: f64, df: u32) -> Result<f64> {
    let k = check_df(df)?;
    check_x(x)?;
    Ok(regularized_gamma_p(k / 2.0, x / 2.0))
}

/// Upper tail `1 - F(x)`, computed directly to keep small p-values accurate.
pub fn chi2_sf(x: f64, df: u32) -> Result<f64> {
    let k = check_df(df)?;
    check_x(x)?;
    Ok(regularized_gamma_q(k / 2.0, x / 2.0))
}

pub fn chi2_pdf(x: f64, df: u32) -> Result<f64> {
    let k = check_df(df)?;
    check_x(x)?;
    if x == 0.0 {
        return Ok(match df {
            1 => f64::INFINITY,
            2 => 0.5,
            _ => 0.0,
        });
    }
    let h = k / 2.0;
    Ok(libm::exp((h - 1.0) * libm::log(x) - x / 2.0 - h * core::f64::consts::LN_2 - libm::lgamma(h)))
}

/// Inverse of [`chi2_cdf`]. `p = 0` gives 0 and `p = 1` gives infinity.
pub fn chi2_quantile(p: f64, df: u32) -> Result<f64> {
    let k = check_df(df)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::DomainError(format!("probability {p} outside [0, 1]")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }

    // Wilson-Hilferty starting point.
    let z = normal_quantile(p);
    let c = 2.0 / (9.0 * k);
    let wh = k * libm::pow(1.0 - c + z * libm::sqrt(c), 3.0);
    let mut x = if wh > 0.0 { wh } else { k * 0.5 * p };

    let mut lo = 0.0;
    let mut hi = x.max(1.0);
    while chi2_cdf(hi, df)? < p {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Ok(f64::INFINITY);
        }
    }

    for _ in 0..200 {
        let f = chi2_cdf(x, df)? - p;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let dens = chi2_pdf(x, df)?;
        let mut next = if dens > 0.0 && dens.is_finite() { x - f / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if libm::fabs(next - x) <= 1e-15 * x.max(1e-300) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Upper tail `P(Z > x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
}

/// Standard normal quantile (Acklam's rational approximation refined by one
/// Halley step).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let plow = 0.02425;
    let x = if p < plow {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * libm::sqrt(2.0 * core::f64::consts::PI) * libm::exp(x * x / 2.0);
    x - u / (1.0 + x * u / 2.0)
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if libm::fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_TERMS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if libm::fabs(delta - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Regularised incomplete beta `I_x(a, b)`.
pub fn regularized_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log(1.0 - x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value `P(|T| > |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::DomainError(format!("t degrees of freedom {df} must be positive")));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    Ok(regularized_beta(df / 2.0, 0.5, df / (df + t * t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn boundaries() {
        assert_eq!(chi2_cdf(0.0, 3).unwrap(), 0.0);
        assert_eq!(chi2_quantile(1.0, 2).unwrap(), f64::INFINITY);
        assert_eq!(chi2_quantile(0.0, 2).unwrap(), 0.0);
        assert!(chi2_quantile(1.0 - 1e-16, 1).unwrap().is_finite());
        assert!(matches!(chi2_cdf(-1.0, 1), Err(Error::DomainError(_))));
        assert!(matches!(chi2_cdf(1.0, 0), Err(Error::DomainError(_))));
        assert!(matches!(chi2_quantile(1.5, 1), Err(Error::DomainError(_))));
    }

    #[test]
    fn known_values() {
        // df = 2 has the closed form 1 - exp(-x/2).
        for x in [0.1, 1.0, 5.0, 30.0] {
            assert_relative_eq!(chi2_cdf(x, 2).unwrap(), 1.0 - (-x / 2.0f64).exp(), epsilon = 1e-14);
        }
        // df = 1 is erf(sqrt(x/2)).
        for x in [0.01, 0.5, 3.84, 12.0] {
            let expected = libm::erf((x / 2.0f64).sqrt());
            assert_relative_eq!(chi2_cdf(x, 1).unwrap(), expected, epsilon = 1e-13);
        }
        assert!((chi2_quantile(0.95, 1).unwrap() - 3.841458820694124).abs() < 1e-9);
    }

    #[test]
    fn quantile_round_trip() {
        for df in [1, 2, 5, 10] {
            for p in [0.01, 0.5, 0.95, 0.99] {
                let q = chi2_quantile(p, df).unwrap();
                assert!((chi2_cdf(q, df).unwrap() - p).abs() < 1e-9, "df={df} p={p}");
            }
        }
    }

    #[test]
    fn survival_complements_cdf() {
        for df in 1..8 {
            for x in [0.2, 2.0, 9.0, 40.0] {
                let s = chi2_sf(x, df).unwrap() + chi2_cdf(x, df).unwrap();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normal_functions() {
        assert_relative_eq!(normal_cdf(1.959963984540054), 0.975, epsilon = 1e-14);
        assert_relative_eq!(normal_quantile(0.975), 1.959963984540054, epsilon = 1e-12);
        assert_relative_eq!(normal_quantile(1e-5), -4.264890793922825, epsilon = 1e-10);
        assert_relative_eq!(normal_sf(5.47) * 2.0, 4.5e-8, max_relative = 0.05);
    }

    #[test]
    fn student_t_matches_reference() {
        // t(10) two-sided p at 2.228138851986 is 0.05.
        assert_relative_eq!(student_t_two_sided(2.228138851986, 10.0).unwrap(), 0.05, epsilon = 1e-10);
        // t(1) is Cauchy: P(|T| > 1) = 0.5.
        assert_relative_eq!(student_t_two_sided(1.0, 1.0).unwrap(), 0.5, epsilon = 1e-12);
    }
}
