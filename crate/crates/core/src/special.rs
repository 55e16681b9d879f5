//! Log-gamma, digamma, trigamma and the regularized incomplete gamma and
//! beta functions.
//!
//! The checked entry points (`log_gamma`, `digamma`, `trigamma`, `log_beta`)
//! reject nonpositive arguments. The unchecked variants (`ln_gamma`, `psi`,
//! `psi1`) are used in the likelihood inner loops and return NaN there.

// coefficient tables keep every digit they were tabulated with
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const PI_SQ_OVER_6: f64 = 1.644_934_066_848_226_4;
const ZETA3: f64 = 1.202_056_903_159_594_3;

/// Below this the leading singular terms are used directly.
const SMALL_ARG: f64 = 1e-6;

// zeta(k) - 1 for k = 2..=26.
const ZETA_MINUS_ONE: [f64; 25] = [
    0.644_934_066_848_226_4,
    0.202_056_903_159_594_3,
    0.082_323_233_711_138_19,
    0.036_927_755_143_369_93,
    0.017_343_061_984_449_14,
    0.008_349_277_381_922_827,
    0.004_077_356_197_944_339,
    0.002_008_392_826_082_214,
    0.000_994_575_127_818_085_3,
    0.000_494_188_604_119_464_6,
    0.000_246_086_553_308_048_3,
    0.000_122_713_347_578_489_1,
    6.124_813_505_870_483e-5,
    3.058_823_630_702_049e-5,
    1.528_225_940_865_187e-5,
    7.637_197_637_899_762e-6,
    3.817_293_264_999_840e-6,
    1.908_212_716_553_939e-6,
    9.539_620_338_727_961e-7,
    4.769_329_867_878_065e-7,
    2.384_505_027_277_330e-7,
    1.192_199_259_653_111e-7,
    5.960_818_905_125_948e-8,
    2.980_350_351_465_228e-8,
    1.490_155_482_836_504e-8,
];

// Lanczos coefficients, g = 671/128, 14 terms.
const LANCZOS_G: f64 = 5.242_187_5;
const LANCZOS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

fn check(function: &'static str, z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { function, value: z })
    }
}

/// log Γ(z) for z > 0.
pub fn log_gamma(z: f64) -> Result<f64> {
    check("log_gamma", z)?;
    Ok(ln_gamma(z))
}

/// ψ(z) for z > 0.
pub fn digamma(z: f64) -> Result<f64> {
    check("digamma", z)?;
    Ok(psi(z))
}

/// ψ′(z) for z > 0.
pub fn trigamma(z: f64) -> Result<f64> {
    check("trigamma", z)?;
    Ok(psi1(z))
}

/// log B(a, b) for a, b > 0.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    check("log_beta", a)?;
    check("log_beta", b)?;
    Ok(ln_beta(a, b))
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Unchecked log Γ(z); NaN for z ≤ 0.
pub fn ln_gamma(z: f64) -> f64 {
    if !(z > 0.0) {
        return f64::NAN;
    }
    if z < SMALL_ARG {
        return -z.ln() - EULER_GAMMA * z + 0.5 * PI_SQ_OVER_6 * z * z;
    }
    if z < 0.5 {
        return ln_gamma(z + 1.0) - z.ln();
    }
    let near_one = z - 1.0;
    if near_one.abs() < 0.2 {
        return lgamma1p_series(near_one);
    }
    let near_two = z - 2.0;
    if near_two.abs() < 0.2 {
        return lgamma2p_series(near_two);
    }
    if z.is_infinite() {
        return f64::INFINITY;
    }
    lanczos(z)
}

/// log Γ(1 + e) for small |e|.
fn lgamma1p_series(e: f64) -> f64 {
    // sum_{k>=2} (-1)^k zeta(k) e^k / k, with zeta(k) = 1 + (zeta(k) - 1)
    let mut acc = -EULER_GAMMA * e;
    let mut pow = -e;
    for (j, zm1) in ZETA_MINUS_ONE.iter().enumerate() {
        let k = (j + 2) as f64;
        pow *= -e;
        acc += (1.0 + zm1) * pow / k;
    }
    acc
}

/// log Γ(2 + e) for small |e|.
fn lgamma2p_series(e: f64) -> f64 {
    let mut acc = (1.0 - EULER_GAMMA) * e;
    let mut pow = -e;
    for (j, zm1) in ZETA_MINUS_ONE.iter().enumerate() {
        let k = (j + 2) as f64;
        pow *= -e;
        acc += zm1 * pow / k;
    }
    acc
}

fn lanczos(x: f64) -> f64 {
    let tmp = x + LANCZOS_G;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = 0.999_999_999_999_997_092;
    let mut y = x;
    for c in LANCZOS.iter() {
        y += 1.0;
        ser += c / y;
    }
    tmp + HALF_LN_2PI + (ser / x).ln()
}

/// Unchecked digamma; NaN for z ≤ 0.
pub fn psi(z: f64) -> f64 {
    if !(z > 0.0) {
        return f64::NAN;
    }
    if z < SMALL_ARG {
        return -1.0 / z - EULER_GAMMA + PI_SQ_OVER_6 * z;
    }
    let mut x = z;
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0
                    - r * (1.0 / 240.0
                        - r * (1.0 / 132.0 - r * (691.0 / 32760.0 - r / 12.0))))));
    shift + x.ln() - 0.5 / x - series
}

/// Unchecked trigamma; NaN for z ≤ 0.
pub fn psi1(z: f64) -> f64 {
    if !(z > 0.0) {
        return f64::NAN;
    }
    if z < SMALL_ARG {
        return 1.0 / (z * z) + PI_SQ_OVER_6 - 2.0 * ZETA3 * z;
    }
    let mut x = z;
    let mut shift = 0.0;
    while x < 10.0 {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    // 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1)
    let tail = r
        * (1.0 / 6.0
            - r * (1.0 / 30.0
                - r * (1.0 / 42.0
                    - r * (1.0 / 30.0 - r * (5.0 / 66.0 - r * (691.0 / 2730.0 - r * 7.0 / 6.0))))));
    shift + 1.0 / x + 0.5 * r + tail / x
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cf(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (h.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front + beta_cf(a, b, x).ln() - a.ln()).exp()
    } else {
        1.0 - (ln_front + beta_cf(b, a, 1.0 - x).ln() - b.ln()).exp()
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// log(Σ exp(v)) over a slice; −∞ for an empty or all −∞ slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// log(exp(a) + exp(b)).
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    // (z, log Γ(z), ψ(z), ψ′(z)) at 40 digits, truncated.
    const REFERENCE: [(f64, f64, f64, f64); 12] = [
        (1e-6, 13.815_509_980_749_432, -1_000_000.577_214_02, 1_000_000_000_001.644_9),
        (1e-3, 6.907_178_885_383_853_7, -1_000.575_571_931_810_3, 1_000_001.642_533_195_9),
        (0.1, 2.252_712_651_734_206, -10.423_754_940_411_077, 101.433_299_150_792_76),
        (0.5, 0.572_364_942_924_700_1, -1.963_510_026_021_423_5, 4.934_802_200_544_679),
        (1.5, -0.120_782_237_635_245_22, 0.036_489_973_978_576_52, 0.934_802_200_544_679_3),
        (2.5, 0.284_682_870_472_919_16, 0.703_156_640_645_243_2, 0.490_357_756_100_234_9),
        (7.3, 7.147_892_523_022_249, 1.917_820_335_637_986, 0.146_795_768_131_427_1),
        (10.0, 12.801_827_480_081_469, 2.251_752_589_066_721, 0.105_166_335_681_685_75),
        (33.3, 82.603_723_581_654_95, 3.490_467_238_520_243, 0.030_485_444_095_338_885),
        (100.5, 361.435_540_467_777_6, 4.605_174_352_581_845, 0.009_999_916_669_583_103),
        (12345.678, 103_959.919_905_546_06, 9.421_020_820_741_761, 8.100_328_723_111_207e-5),
        (1e8, 1_742_068_066.103_834_7, 18.420_680_738_952_367, 1.000_000_005e-8),
    ];

    #[test]
    fn log_gamma_matches_reference() {
        for &(z, lg, _, _) in REFERENCE.iter() {
            let got = log_gamma(z).unwrap();
            assert!(((got - lg) / lg).abs() < 1e-12, "z={z}: {got} vs {lg}");
        }
    }

    #[test]
    fn log_gamma_trivial_values() {
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-16);
        let half = 0.5 * std::f64::consts::PI.ln();
        assert!((log_gamma(0.5).unwrap() - half).abs() < 1e-15);
        let fact9 = 362_880f64.ln();
        assert!((log_gamma(10.0).unwrap() - fact9).abs() / fact9 < 1e-14);
    }

    #[test]
    fn log_gamma_factorial_oracle() {
        let mut ln_fact = 0.0f64;
        for n in 1..170u32 {
            let got = log_gamma(n as f64 + 1.0).unwrap();
            ln_fact += (n as f64).ln();
            let tol = 1e-13 * ln_fact.abs().max(1e-3);
            assert!((got - ln_fact).abs() < tol, "n={n}");
        }
    }

    #[test]
    fn digamma_trigamma_match_reference() {
        for &(z, _, dg, tg) in REFERENCE.iter() {
            let d = digamma(z).unwrap();
            let t = trigamma(z).unwrap();
            assert!((d - dg).abs() < 1e-10_f64.max(1e-15 * dg.abs()), "psi z={z}: {d} vs {dg}");
            assert!(((t - tg) / tg).abs() < 1e-13, "psi1 z={z}: {t} vs {tg}");
        }
    }

    #[test]
    fn classical_values() {
        assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() < 1e-15);
        assert!((trigamma(1.0).unwrap() - PI_SQ_OVER_6).abs() < 1e-14);
        let diff = trigamma(1.0).unwrap() - trigamma(3.0).unwrap();
        assert!((diff - 1.25).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(log_gamma(0.0), Err(Error::Domain { .. })));
        assert!(matches!(digamma(-1.0), Err(Error::Domain { .. })));
        assert!(matches!(trigamma(f64::NAN), Err(Error::Domain { .. })));
        assert!(log_beta(1.0, 0.0).is_err());
    }

    #[test]
    fn trigamma_laplace_bounds() {
        // z ψ′(z) − 1 and 1/z + 1 − z ψ′(z) are both nonnegative,
        // so z²ψ′(z) − z lies in (0, 1).
        let mut z: f64 = 1e-5;
        while z < 1e7 {
            let v = psi1(z) * z * z - z;
            assert!(v > 0.0 && v < 1.0, "z={z}: {v}");
            z *= 1.37;
        }
    }

    #[test]
    fn incomplete_gamma_and_beta() {
        // P(1, x) = 1 − e^{−x}
        for &x in &[0.01, 0.5, 1.0, 3.0, 20.0] {
            assert!((gamma_p(1.0, x) - (1.0 - (-x).exp())).abs() < 1e-14);
            assert!((gamma_p(2.5, x) + gamma_q(2.5, x) - 1.0).abs() < 1e-14);
        }
        // I_x(1, b) = 1 − (1 − x)^b
        for &x in &[0.01, 0.3, 0.7, 0.99] {
            let want = 1.0 - (1.0f64 - x).powf(3.5);
            assert!((beta_inc(1.0, 3.5, x) - want).abs() < 1e-14);
            let sym = beta_inc(0.3, 2.0, x) + beta_inc(2.0, 0.3, 1.0 - x);
            assert!((sym - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn log_sum_exp_basics() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - 1000.0 - 2f64.ln()).abs() < 1e-12);
        assert!((log_add_exp(0.0, f64::NEG_INFINITY)).abs() < 1e-300);
    }
}
