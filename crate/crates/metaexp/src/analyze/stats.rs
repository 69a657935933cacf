//! Statistical primitives: two-sample Kolmogorov-Smirnov test and the
//! inverse standard normal CDF.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sample KS test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// Supremum of |ECDF_a - ECDF_b| over the pooled sample points.
    pub d: f64,
    /// Asymptotic two-sided p-value.
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Two-sample Kolmogorov-Smirnov test.
///
/// D is the exact ECDF supremum; the p-value uses the asymptotic
/// Kolmogorov distribution at effective sample size
/// `n_a * n_b / (n_a + n_b)`.
pub fn ks_test(sample_a: &[f64], sample_b: &[f64]) -> Result<KsResult> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample_a.iter().chain(sample_b).any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite sample value".into()));
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let (na, nb) = (a.len(), b.len());
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d: f64 = 0.0;
    // Advance through the pooled order; at every step both ECDFs are
    // evaluated just after the smaller current value.
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        let fa = i as f64 / na as f64;
        let fb = j as f64 / nb as f64;
        d = d.max((fa - fb).abs());
    }

    let n_eff = (na as f64 * nb as f64) / (na as f64 + nb as f64);
    let lambda = n_eff.sqrt() * d;
    let p_value = kolmogorov_survival(lambda).clamp(f64::MIN_POSITIVE, 1.0);

    Ok(KsResult { d, p_value, n_a: na, n_b: nb })
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)`, with the
/// theta-transformed series for small arguments. Terms are truncated below
/// 1e-12.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // Dual series converges fast for small x:
        // K(x) = sqrt(2 pi) / x * sum_{j>=1} exp(-(2j-1)^2 pi^2 / (8 x^2))
        let mut cdf = 0.0;
        let factor = (2.0 * std::f64::consts::PI).sqrt() / x;
        for j in 1..100 {
            let e = ((2 * j - 1) as f64 * std::f64::consts::PI).powi(2) / (8.0 * x * x);
            let term = (-e).exp();
            cdf += term;
            if term < 1e-12 {
                break;
            }
        }
        return (1.0 - factor * cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..100 {
        let term = (-2.0 * (j as f64).powi(2) * x * x).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Standard normal CDF via an erfc approximation (absolute error ~1e-7,
/// ample for significance stars and reported p-values).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Two-sided p-value for a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    if !z.is_finite() {
        return if z.is_nan() { f64::NAN } else { 0.0 };
    }
    (2.0 * (1.0 - normal_cdf(z.abs()))).clamp(0.0, 1.0)
}

fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.265_512_23
            + t * (1.000_023_68
                + t * (0.374_091_96
                    + t * (0.096_784_18
                        + t * (-0.186_288_06
                            + t * (0.278_868_07
                                + t * (-1.135_203_98
                                    + t * (1.488_515_87
                                        + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
            .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Inverse standard normal CDF (quantile function).
///
/// Wichura's AS 241 (PPND16) rational approximations; absolute error well
/// below 1e-9 across (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile probability must be in (0,1), got {p}")));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * poly(&A, r) / poly(&B, r));
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    Ok(if q < 0.0 { -val } else { val })
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[allow(clippy::excessive_precision)]
const A: [f64; 8] = [
    3.387_132_872_796_366_608,
    133.141_667_891_784_377_45,
    1_971.590_950_306_551_442_7,
    13_731.693_765_509_461_125,
    45_921.953_931_549_871_457,
    67_265.770_927_008_700_853,
    33_430.575_583_588_128_105,
    2_509.080_928_730_122_672_7,
];
#[allow(clippy::excessive_precision)]
const B: [f64; 8] = [
    1.0,
    42.313_330_701_600_911_252,
    687.187_007_492_057_908_3,
    5_394.196_021_424_751_107_7,
    21_213.794_301_586_595_867,
    39_307.895_800_092_710_61,
    28_729.085_735_721_942_674,
    5_226.495_278_852_545_561,
];
#[allow(clippy::excessive_precision)]
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    0.241_780_725_177_450_611_77,
    0.022_723_844_989_269_184_583_3,
    0.000_774_545_014_278_341_407_64,
];
#[allow(clippy::excessive_precision)]
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    0.689_767_334_985_100_004_55,
    0.148_103_976_427_480_074_59,
    0.015_198_666_563_616_457_196_6,
    0.000_547_593_808_499_534_494_6,
    1.050_750_071_644_416_843_24e-9,
];
#[allow(clippy::excessive_precision)]
const E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    0.296_560_571_828_504_891_23,
    0.026_532_189_526_576_123_093,
    0.001_242_660_947_388_078_438_6,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
#[allow(clippy::excessive_precision)]
const F: [f64; 8] = [
    1.0,
    0.599_832_206_555_887_937_69,
    0.136_929_880_922_735_805_31,
    0.014_875_361_290_850_614_852_5,
    0.000_786_869_131_145_613_259_1,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_samples_give_zero_statistic() {
        let xs = [1.0, 2.0, 3.0, 4.5, 9.0];
        let r = ks_test(&xs, &xs).unwrap();
        assert_eq!(r.d, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn disjoint_supports_give_d_one() {
        let a = [0.0, 0.0, 0.0, 0.0];
        let b = [1.0, 1.0, 1.0, 1.0];
        let r = ks_test(&a, &b).unwrap();
        assert_eq!(r.d, 1.0);
        assert!(r.p_value < 0.1);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(matches!(ks_test(&[], &[1.0]), Err(Error::EmptySample)));
        assert!(matches!(ks_test(&[1.0], &[]), Err(Error::EmptySample)));
    }

    /// Brute-force oracle: evaluate |ECDF_a - ECDF_b| at every pooled point.
    fn brute_force_d(a: &[f64], b: &[f64]) -> f64 {
        let ecdf = |xs: &[f64], t: f64| xs.iter().filter(|&&x| x <= t).count() as f64 / xs.len() as f64;
        a.iter()
            .chain(b.iter())
            .map(|&t| (ecdf(a, t) - ecdf(b, t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn statistic_matches_brute_force_on_random_pairs() {
        let mut rng = crate::seeds::rng(77, "ks-test", 0);
        for case in 0..100 {
            let na = rng.random_range(1..60);
            let nb = rng.random_range(1..60);
            // Mix of continuous values and ties.
            let a: Vec<f64> = (0..na)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        rng.random_range(0..5) as f64
                    } else {
                        rng.random_range(-2.0..6.0)
                    }
                })
                .collect();
            let b: Vec<f64> = (0..nb)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        rng.random_range(0..5) as f64
                    } else {
                        rng.random_range(-1.0..7.0)
                    }
                })
                .collect();
            let got = ks_test(&a, &b).unwrap().d;
            let want = brute_force_d(&a, &b);
            assert!((got - want).abs() < 1e-12, "case {case}: {got} vs {want}");
        }
    }

    #[test]
    fn symmetric_and_monotone_invariant() {
        let mut rng = crate::seeds::rng(78, "ks-sym", 0);
        for _ in 0..20 {
            let a: Vec<f64> = (0..30).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..4.0)).collect();
            let ab = ks_test(&a, &b).unwrap();
            let ba = ks_test(&b, &a).unwrap();
            assert_eq!(ab.d, ba.d);
            assert_eq!(ab.p_value, ba.p_value);
            // Strictly monotone transform of both samples preserves D.
            let ta: Vec<f64> = a.iter().map(|&x| (x * 0.5).exp()).collect();
            let tb: Vec<f64> = b.iter().map(|&x| (x * 0.5).exp()).collect();
            let t = ks_test(&ta, &tb).unwrap();
            assert!((t.d - ab.d).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_distributions_detected() {
        let mut rng = crate::seeds::rng(79, "ks-shift", 0);
        let a: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|&x| x + 10.0).collect();
        let r = ks_test(&a, &b).unwrap();
        assert_eq!(r.d, 1.0);
        assert!(r.p_value < 0.01);
    }

    #[test]
    fn survival_function_sane() {
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(0.2) > 0.999);
        // Known value: Q(1.0) ~ 0.26999967...
        assert!((kolmogorov_survival(1.0) - 0.270_000).abs() < 1e-4);
        assert!(kolmogorov_survival(2.0) < 0.001);
        // Continuity across the series switch at x = 1.
        let lo = kolmogorov_survival(1.0 - 1e-9);
        let hi = kolmogorov_survival(1.0 + 1e-9);
        assert!((lo - hi).abs() < 1e-6);
    }

    #[test]
    fn quantile_reference_values() {
        // Classic two-sided 95% and one-sided 80% points.
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((normal_quantile(0.80).unwrap() - 0.841_621_233_572_914_3).abs() < 1e-9);
        assert!((normal_quantile(0.5).unwrap()).abs() < 1e-12);
        assert!((normal_quantile(0.025).unwrap() + 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(-0.1).is_err());
    }
}
