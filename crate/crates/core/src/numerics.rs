//! Gaussian tail utilities and the deterministic random-number contract.
//!
//! `Q(x)` is the standard normal upper-tail probability. It is evaluated
//! through `erfc` so that far tails keep full relative precision, which
//! matters because optimized operating points routinely push false-alarm
//! rates far below `1e-6`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// A probability value, guaranteed to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);
    pub const HALF: Probability = Probability(0.5);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::OutOfRange {
                name: "probability",
                value,
                expected: "within [0, 1]",
            })
        }
    }

    /// Builds a probability from a value already known to be in range,
    /// clamping away rounding excursions.
    pub(crate) fn saturating(value: f64) -> Self {
        debug_assert!(!value.is_nan());
        Probability(value.clamp(0.0, 1.0))
    }

    /// Like [`Probability::new`] but also rejects the endpoints 0 and 1.
    pub fn interior(value: f64) -> Result<Self> {
        let p = Self::new(value)?;
        if p.0 == 0.0 || p.0 == 1.0 {
            Err(Error::BoundaryProbability(value))
        } else {
            Ok(p)
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// `1 - p`.
    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal upper-tail probability `Q(x)`.
pub fn q_func(x: f64) -> Result<Probability> {
    ensure_finite("x", x)?;
    Ok(Probability::saturating(q(x)))
}

/// Inverse of [`q_func`] on the open interval `(0, 1)`.
///
/// Callers operating near the ends of the interval must clamp first; the
/// boundary values themselves are rejected.
pub fn q_inv(p: Probability) -> Result<f64> {
    let p = p.get();
    if p <= 0.0 || p >= 1.0 {
        return Err(Error::BoundaryProbability(p));
    }
    Ok(q_inverse(p))
}

/// Standard normal density `exp(-x^2/2) / sqrt(2 pi)`.
pub fn std_normal_pdf(x: f64) -> Result<f64> {
    ensure_finite("x", x)?;
    Ok(pdf(x))
}

#[inline]
pub(crate) fn q(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `Q^{-1}(p)` for `p` strictly inside `(0, 1)`.
pub(crate) fn q_inverse(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    if p == 0.5 {
        0.0
    } else if p < 0.5 {
        upper_quantile(p)
    } else {
        // 1 - p is exact here (Sterbenz), so the tail keeps its precision.
        -upper_quantile(1.0 - p)
    }
}

/// Positive root of `Q(x) = p` for `p` in `(0, 0.5)`.
fn upper_quantile(p: f64) -> f64 {
    let mut x = -acklam_lower_quantile(p);
    for _ in 0..2 {
        let density = pdf(x);
        if density == 0.0 || !density.is_finite() {
            break;
        }
        x += (q(x) - p) / density;
    }
    x
}

/// Rational approximation of the lower standard-normal quantile
/// (relative error about 1.15e-9), used as the Newton starting point.
fn acklam_lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let r = (-2.0 * p.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else {
        let r = p - 0.5;
        let s = r * r;
        (((((A[0] * s + A[1]) * s + A[2]) * s + A[3]) * s + A[4]) * s + A[5]) * r
            / (((((B[0] * s + B[1]) * s + B[2]) * s + B[3]) * s + B[4]) * s + 1.0)
    }
}

/// Identifies one reproducible random sequence.
///
/// Two streams with the same `(seed, stream_id)` yield identical draws;
/// distinct stream ids select independent ChaCha streams under the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Derives a child stream keyed by `index`; used to hand every trial or
    /// work unit its own sequence regardless of scheduling.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(1))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, RngCore};
    use std::f64::consts::PI;

    /// Composite Simpson integration of the density from `x` to `x + 40`.
    fn q_by_quadrature(x: f64) -> f64 {
        let n = 200_000;
        let h = 40.0 / n as f64;
        let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        let mut acc = f(x) + f(x + 40.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(x + i as f64 * h);
        }
        acc * h / 3.0
    }

    fn q_inv_by_bisection(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if q(mid) > p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn probability_rejects_out_of_range() {
        assert!(Probability::new(-1e-12).is_err());
        assert!(Probability::new(1.0 + 1e-12).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert!(Probability::new(0.0).is_ok());
        assert!(matches!(Probability::interior(1.0), Err(Error::BoundaryProbability(_))));
    }

    #[test]
    fn q_func_examples() {
        assert_eq!(q_func(0.0).unwrap().get(), 0.5);
        let tail = q_func(40.0).unwrap().get();
        assert!((0.0..1e-300).contains(&tail));
        let oracle = q_by_quadrature(1.2816);
        assert!((oracle - 0.1).abs() < 1e-4);
        assert!((q_func(1.2816).unwrap().get() - oracle).abs() < 1e-10);
        assert!(q_func(f64::INFINITY).is_err());
        assert!(q_func(f64::NAN).is_err());
    }

    #[test]
    fn q_func_symmetry() {
        for &x in &[0.1, 0.7, 1.3, 2.9, 5.0] {
            let a = q_func(-x).unwrap().get();
            let b = 1.0 - q_func(x).unwrap().get();
            assert!((a - b).abs() < 1e-15, "x = {x}");
        }
    }

    #[test]
    fn q_inv_examples() {
        assert_eq!(q_inv(Probability::HALF).unwrap(), 0.0);
        let x = q_inv(q_func(2.0).unwrap()).unwrap();
        assert!((x - 2.0).abs() < 1e-10);
        let oracle = q_inv_by_bisection(0.1);
        assert!((oracle - 1.2816).abs() < 1e-4);
        let got = q_inv(Probability::new(0.1).unwrap()).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn q_inv_rejects_boundaries() {
        assert!(matches!(q_inv(Probability::ZERO), Err(Error::BoundaryProbability(_))));
        assert!(matches!(q_inv(Probability::ONE), Err(Error::BoundaryProbability(_))));
    }

    #[test]
    fn q_inv_roundtrip_relative_precision() {
        // log-spaced sweep over [1e-10, 1 - 1e-10], both tails
        for i in 0..=400 {
            let e = -10.0 + 10.0 * i as f64 / 400.0;
            let small = 10f64.powf(e).min(0.5);
            for p in [small, 1.0 - small] {
                let x = q_inv(Probability::new(p).unwrap()).unwrap();
                let back = q(x);
                assert!(((back - p) / p).abs() <= 1e-12, "p = {p:e}: roundtrip {back:e}");
            }
        }
    }

    #[test]
    fn q_inv_handles_extreme_tails() {
        for p in [1e-30, 1e-100, 1e-300] {
            let x = q_inv(Probability::new(p).unwrap()).unwrap();
            assert!(x.is_finite() && x > 0.0);
            assert!(((q(x) - p) / p).abs() < 1e-10, "p = {p:e}");
        }
    }

    #[test]
    fn pdf_examples() {
        assert!((std_normal_pdf(0.0).unwrap() - 0.398_942_280_4).abs() < 1e-9);
        assert_eq!(std_normal_pdf(1.7).unwrap(), std_normal_pdf(-1.7).unwrap());
        let h = 1e-5;
        let fd = ((1.0 - q(0.8 + h)) - (1.0 - q(0.8 - h))) / (2.0 * h);
        assert!((fd - std_normal_pdf(0.8).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn pdf_is_negative_derivative_of_q() {
        let h = 1e-5;
        for i in 0..=1200 {
            let x = -6.0 + 12.0 * i as f64 / 1200.0;
            let fd = -(q(x + h) - q(x - h)) / (2.0 * h);
            assert!((fd - pdf(x)).abs() < 1e-6, "x = {x}");
        }
    }

    #[test]
    fn q_strictly_decreasing_on_random_points() {
        let mut rng = RngStream::new(7, 0).generator();
        let mut xs: Vec<f64> = (0..1000).map(|_| rng.gen_range(-8.0..8.0)).collect();
        xs.sort_by(f64::total_cmp);
        for pair in xs.windows(2) {
            let (a, b) = (q(pair[0]), q(pair[1]));
            assert!(a >= b);
            // Below about x = -5 neighbouring values of 1 - tail can round to
            // the same double; strictness is only observable when the true
            // gap spans a few ulps.
            let gap = pdf(pair[1]) * (pair[1] - pair[0]);
            if pair[0] < pair[1] && gap > 4.0 * f64::EPSILON * a {
                assert!(a > b, "{pair:?}");
            }
        }
    }

    #[test]
    fn q_inv_of_q_roundtrip_on_random_points() {
        // Q(x) for x < 0 is stored as 1 - tail, so the representable spacing
        // near 1 bounds how well x can be recovered: |dx| >= ulp(Q) / pdf(x).
        let mut rng = RngStream::new(11, 0).generator();
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-8.0..8.0);
            let p = q(x);
            let back = q_inverse(p);
            let conditioning = 2.0 * f64::EPSILON * p / pdf(x);
            let tol = 1e-10_f64.max(conditioning);
            assert!((back - x).abs() <= tol, "x = {x}: got {back}");
            if x >= -4.5 {
                assert!((back - x).abs() <= 1e-10, "x = {x}: got {back}");
            }
        }
    }

    #[test]
    fn rng_streams_are_reproducible_and_distinct() {
        let a = RngStream::new(42, 3);
        let first: Vec<u64> = {
            let mut g = a.generator();
            (0..8).map(|_| g.next_u64()).collect()
        };
        let again: Vec<u64> = {
            let mut g = a.generator();
            (0..8).map(|_| g.next_u64()).collect()
        };
        assert_eq!(first, again);
        let mut other = RngStream::new(42, 4).generator();
        assert_ne!(first[0], other.next_u64());
        assert_ne!(a.substream(0), a.substream(1));
        assert_eq!(a.substream(5), a.substream(5));
    }
}
