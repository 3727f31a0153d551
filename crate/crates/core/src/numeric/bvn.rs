//! Bivariate standard normal CDF.
//!
//! Drezner–Wesolowsky single-integral reduction evaluated with fixed-order
//! Gauss–Legendre rules (6, 12 or 20 nodes by |ρ|), following Genz's BVNU.
//! For |ρ| ≥ 0.925 the integrand is rewritten around the singular point and
//! the asymptotic correction terms are added back.

use std::f64::consts::PI;

use super::normal::{inverse_mills, log_normal_cdf, phi_cdf, LN_SQRT_2PI, LOG_PROB_FLOOR};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

// (weight, abscissa) on [-1, 1], positive half of each symmetric rule.
const GL6: [(f64, f64); 3] = [
    (0.171_324_492_379_170_5, 0.932_469_514_203_152_2),
    (0.360_761_573_048_138_4, 0.661_209_386_466_264_7),
    (0.467_913_934_572_690_4, 0.238_619_186_083_197_0),
];

const GL12: [(f64, f64); 6] = [
    (0.047_175_336_386_511_77, 0.981_560_634_246_719_1),
    (0.106_939_325_995_318_3, 0.904_117_256_370_475_0),
    (0.160_078_328_543_346_4, 0.769_902_674_194_305_0),
    (0.203_167_426_723_065_9, 0.587_317_954_286_617_1),
    (0.233_492_536_538_354_7, 0.367_831_498_998_180_2),
    (0.249_147_045_813_402_9, 0.125_233_408_511_469_2),
];

const GL20: [(f64, f64); 10] = [
    (0.017_614_007_139_152_12, 0.993_128_599_185_094_9),
    (0.040_601_429_800_386_94, 0.963_971_927_277_913_8),
    (0.062_672_048_334_109_06, 0.912_234_428_251_325_9),
    (0.083_276_741_576_704_75, 0.839_116_971_822_218_8),
    (0.101_930_119_817_240_4, 0.746_331_906_460_150_8),
    (0.118_194_531_961_518_4, 0.636_053_680_726_515_0),
    (0.131_688_638_449_176_6, 0.510_867_001_950_827_1),
    (0.142_096_109_318_382_1, 0.373_706_088_715_419_6),
    (0.149_172_986_472_603_7, 0.227_785_851_141_645_1),
    (0.152_753_387_130_725_9, 0.076_526_521_133_497_33),
];

fn rule(abs_rho: f64) -> &'static [(f64, f64)] {
    if abs_rho < 0.3 {
        &GL6
    } else if abs_rho < 0.75 {
        &GL12
    } else {
        &GL20
    }
}

/// `P(X ≤ h, Y ≤ k)` for a standard bivariate normal with correlation `rho`.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> Result<f64> {
    if h.is_nan() || k.is_nan() || rho.is_nan() {
        return Err(Error::domain("bivariate_normal_cdf with NaN argument"));
    }
    if rho.abs() > 1.0 {
        return Err(Error::domain(format!("correlation {rho} outside [-1, 1]")));
    }
    Ok(bvn_lower(h, k, rho))
}

/// Unchecked lower-orthant probability.
#[inline]
pub(crate) fn bvn_lower(h: f64, k: f64, rho: f64) -> f64 {
    bvn_upper(-h, -k, rho)
}

/// `P(X > h, Y > k)`.
fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { phi_cdf(-k) };
    }
    if k == f64::NEG_INFINITY {
        return phi_cdf(-h);
    }
    if r == 0.0 {
        return phi_cdf(-h) * phi_cdf(-k);
    }

    let quad = rule(r.abs());
    let mut hk = h * k;
    let mut bvn = 0.0;

    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        for &(w, x) in quad {
            for node in [1.0 - x, 1.0 + x] {
                let sn = (asr * node).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / TWO_PI + phi_cdf(-h) * phi_cdf(-k);
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let a_sq = (1.0 - r) * (1.0 + r);
            let mut a = a_sq.sqrt();
            let b_sq = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            let asr = -0.5 * (b_sq / a_sq + hk);
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (b_sq - a_sq) * (1.0 - d * b_sq) / 3.0 + c * d * a_sq * a_sq);
            }
            if hk > -100.0 {
                let b = b_sq.sqrt();
                let sp = TWO_PI.sqrt() * phi_cdf(-b / a);
                bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * b_sq * (1.0 - d * b_sq) / 3.0);
            }
            a *= 0.5;
            let mut acc = 0.0;
            for &(w, x) in quad {
                for node in [1.0 - x, 1.0 + x] {
                    let xs = (a * node) * (a * node);
                    let asr = -0.5 * (b_sq / xs + hk);
                    if asr > -100.0 {
                        let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                        let rs = (1.0 - xs).sqrt();
                        let ep = (-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                        acc += w * asr.exp() * (sp - ep);
                    }
                }
            }
            bvn = (a * acc - bvn) / TWO_PI;
        }
        if r > 0.0 {
            bvn += phi_cdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let band = if h < 0.0 {
                phi_cdf(k) - phi_cdf(h)
            } else {
                phi_cdf(-h) - phi_cdf(-k)
            };
            bvn = band - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// `ln P(X ≤ h, Y ≤ k)` with relative accuracy in the far tails, where the
/// fixed-rule value above only carries absolute accuracy.
pub(crate) fn ln_bvn_lower(h: f64, k: f64, rho: f64) -> f64 {
    let p = bvn_lower(h, k, rho);
    if p > TAIL_SWITCH || rho.abs() >= 1.0 || !h.is_finite() || !k.is_finite() {
        return p.max(LOG_PROB_FLOOR).ln();
    }
    // Integrate over the more extreme coordinate.
    let (h, k) = if h <= k { (h, k) } else { (k, h) };
    tail_log_integral(h, k, rho)
}

const TAIL_SWITCH: f64 = 1e-8;

/// `ln ∫_{-∞}^{h} φ(x) Φ((k − ρx)/s) dx`, s = √(1−ρ²). The log-integrand is
/// concave with curvature at least 1, so on each side of its mode it falls
/// monotonically and is integrated by Gauss–Legendre over the stretch where
/// it stays within `TAIL_DROP` of the peak.
fn tail_log_integral(h: f64, k: f64, rho: f64) -> f64 {
    let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let f = |x: f64| -0.5 * x * x - LN_SQRT_2PI + log_normal_cdf((k - rho * x) / s);
    let df = |x: f64| -x - rho / s * inverse_mills((k - rho * x) / s);
    let mode = if df(h) >= 0.0 {
        h
    } else {
        let (mut lo, mut hi) = (h - 1.0, h);
        while df(lo) < 0.0 {
            lo -= 2.0 * (hi - lo);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if df(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let peak = f(mode);
    let g = |x: f64| (f(x) - peak).exp();
    // Curvature ≥ 1 puts the drop point within √(2·TAIL_DROP) of the mode.
    let reach = (2.0 * TAIL_DROP).sqrt();
    let left_end = drop_point(&f, peak, mode, mode - reach);
    let mut total = gauss_legendre(&g, left_end, mode);
    if mode < h {
        let right_end = drop_point(&f, peak, mode, h.min(mode + reach));
        total += gauss_legendre(&g, mode, right_end);
    }
    peak + total.ln()
}

const TAIL_DROP: f64 = 46.0;

/// Point between `mode` and `far` where `f` first falls to `peak − TAIL_DROP`
/// (or `far` if it never does), located to a small fraction of the span.
fn drop_point(f: &impl Fn(f64) -> f64, peak: f64, mode: f64, far: f64) -> f64 {
    if f(far) >= peak - TAIL_DROP {
        return far;
    }
    let (mut near, mut out) = (mode, far);
    for _ in 0..20 {
        let mid = 0.5 * (near + out);
        if f(mid) >= peak - TAIL_DROP {
            near = mid;
        } else {
            out = mid;
        }
    }
    out
}

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    legendre_rule().iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// 48-node Gauss–Legendre rule on [-1, 1], built once by Newton iteration.
fn legendre_rule() -> &'static [(f64, f64)] {
    static RULE: std::sync::OnceLock<Vec<(f64, f64)>> = std::sync::OnceLock::new();
    RULE.get_or_init(|| {
        let n = 48;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    })
}

/// `ln φ₂(x, y; ρ)`.
#[inline]
pub(crate) fn ln_bivariate_normal_pdf(x: f64, y: f64, rho: f64) -> f64 {
    let one_minus = (1.0 - rho) * (1.0 + rho);
    let q = (x * x - 2.0 * rho * x * y + y * y) / one_minus;
    -0.5 * q - TWO_PI.ln() - 0.5 * one_minus.ln()
}

/// Standard bivariate normal density; also `∂/∂ρ` of the lower-orthant CDF.
#[inline]
pub fn bivariate_normal_pdf(x: f64, y: f64, rho: f64) -> f64 {
    if x.is_infinite() || y.is_infinite() {
        return 0.0;
    }
    let one_minus = 1.0 - rho * rho;
    let q = (x * x - 2.0 * rho * x * y + y * y) / one_minus;
    (-0.5 * q).exp() / (TWO_PI * one_minus.sqrt())
}
