//! Closed-form model of an energy detector running on a full-duplex radio.
//!
//! Powers are expressed as ratios against the noise floor: `alpha_i` is the
//! residual self-interference to noise ratio and `alpha_s` the primary-user
//! signal to noise ratio. The detector compares the normalized window energy
//! `(1/N) sum |r|^2 / sigma_w^2` against a threshold `gamma`; under H0 the
//! statistic centres on `alpha_i + 1`, under H1 on `alpha_i + alpha_s + 1`.
//!
//! Eliminating `gamma` between the false-alarm and missed-detection
//! expressions gives the ROC as `P_fa = Q(c * Q^{-1}(P_md) + k)` with
//!
//! ```text
//! c = -sqrt((2 a_i + 2 a_s + 2 a_s a_i + 1) / (2 a_i + 1))
//! k = a_s * sqrt(N / (2 a_i + 1))
//! ```
//!
//! [`empirical_rates`] draws sensing windows from an explicit sample model
//! and is used to check the closed forms.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, ChiSquared, Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::numerics::{q, q_inverse, Probability, RngStream};

/// Probabilities handed to `Q^{-1}` are clamped to `[P_MIN, 1 - P_MIN]`.
pub const P_MIN: f64 = 1e-15;

#[inline]
pub(crate) fn clamp_probability(p: f64) -> f64 {
    p.clamp(P_MIN, 1.0 - P_MIN)
}

/// Sensing physics of one radio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Samples per sensing window (N).
    pub n_samples: u32,
    /// Residual self-interference to noise power ratio, linear.
    pub alpha_i: f64,
    /// Primary-user signal to noise power ratio, linear.
    pub alpha_s: f64,
}

impl DetectorParams {
    pub fn new(n_samples: u32, alpha_i: f64, alpha_s: f64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::OutOfRange {
                name: "n_samples",
                value: 0.0,
                expected: ">= 1",
            });
        }
        ensure_finite("alpha_i", alpha_i)?;
        if alpha_i < 0.0 {
            return Err(Error::OutOfRange {
                name: "alpha_i",
                value: alpha_i,
                expected: ">= 0",
            });
        }
        ensure_finite("alpha_s", alpha_s)?;
        if alpha_s <= 0.0 {
            return Err(Error::OutOfRange {
                name: "alpha_s",
                value: alpha_s,
                expected: "> 0",
            });
        }
        Ok(DetectorParams {
            n_samples,
            alpha_i,
            alpha_s,
        })
    }

    fn n(&self) -> f64 {
        f64::from(self.n_samples)
    }

    /// Variance numerator of the statistic under H0.
    fn h0_spread(&self) -> f64 {
        2.0 * self.alpha_i + 1.0
    }

    /// Variance numerator of the statistic under H1.
    fn h1_spread(&self) -> f64 {
        2.0 * self.alpha_i + 2.0 * self.alpha_s + 2.0 * self.alpha_s * self.alpha_i + 1.0
    }

    /// False-alarm probability at threshold `gamma`.
    pub fn p_fa_of_threshold(&self, gamma: f64) -> Result<Probability> {
        ensure_finite("gamma", gamma)?;
        let arg = (gamma - self.alpha_i - 1.0) * (self.n() / self.h0_spread()).sqrt();
        Ok(Probability::saturating(q(arg)))
    }

    /// Missed-detection probability at threshold `gamma`.
    pub fn p_md_of_threshold(&self, gamma: f64) -> Result<Probability> {
        ensure_finite("gamma", gamma)?;
        let arg = (self.alpha_i + self.alpha_s + 1.0 - gamma) * (self.n() / self.h1_spread()).sqrt();
        Ok(Probability::saturating(q(arg)))
    }

    /// Threshold whose missed-detection probability equals `target`.
    pub fn threshold_for_p_md(&self, target: Probability) -> Result<f64> {
        let t = target.get();
        if t <= 0.0 || t >= 1.0 {
            return Err(Error::BoundaryProbability(t));
        }
        Ok(self.alpha_i + self.alpha_s + 1.0 - q_inverse(t) * (self.h1_spread() / self.n()).sqrt())
    }

    /// The `(c, k)` pair describing this detector's ROC.
    pub fn roc_constants(&self) -> RocConstants {
        RocConstants {
            c: -(self.h1_spread() / self.h0_spread()).sqrt(),
            k: self.alpha_s * (self.n() / self.h0_spread()).sqrt(),
        }
    }
}

/// ROC constants: `P_fa = Q(c * Q^{-1}(P_md) + k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocConstants {
    pub c: f64,
    pub k: f64,
}

impl RocConstants {
    pub fn new(c: f64, k: f64) -> Result<Self> {
        ensure_finite("c", c)?;
        ensure_finite("k", k)?;
        if c >= 0.0 {
            return Err(Error::OutOfRange {
                name: "c",
                value: c,
                expected: "< 0",
            });
        }
        if k < 0.0 {
            return Err(Error::OutOfRange {
                name: "k",
                value: k,
                expected: ">= 0",
            });
        }
        Ok(RocConstants { c, k })
    }

    /// False-alarm rate on the ROC at missed-detection rate `p_md`.
    ///
    /// `p_md` is clamped to `[P_MIN, 1 - P_MIN]`, so the endpoints map to
    /// the (numerically) limiting values instead of diverging.
    pub fn p_fa_of_p_md(&self, p_md: Probability) -> Probability {
        Probability::saturating(self.p_fa_raw(p_md.get()))
    }

    #[inline]
    pub(crate) fn p_fa_raw(&self, p_md: f64) -> f64 {
        q(self.c * q_inverse(clamp_probability(p_md)) + self.k)
    }

    /// Slope `dP_fa / dP_md` of the ROC, always negative.
    pub fn roc_derivative(&self, p_md: Probability) -> f64 {
        self.derivative_raw(p_md.get())
    }

    #[inline]
    pub(crate) fn derivative_raw(&self, p_md: f64) -> f64 {
        let x = q_inverse(clamp_probability(p_md));
        let y = self.c * x + self.k;
        // c * pdf(y) / pdf(x), folded into one exponent so neither density
        // underflows on its own.
        self.c * (-0.5 * (y - x) * (y + x)).exp()
    }

    /// Equality within a relative tolerance on both constants.
    pub fn approx_eq(&self, other: &RocConstants, rel: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        close(self.c, other.c) && close(self.k, other.k)
    }
}

/// Which hypothesis a sensing window is drawn under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Primary user absent: noise plus residual self-interference.
    H0,
    /// Primary user active.
    H1,
}

/// Explicit per-sample signal model behind the closed forms.
///
/// Samples are complex baseband. Noise is circular Gaussian with power
/// `sigma_w2`. The residual self-interference has constant envelope
/// `sqrt(sigma_i2)` and a uniformly random carrier phase per sample. The
/// primary user transmits QPSK symbols of power `sigma_s2` referenced to
/// that carrier phase. Both interferers are zero-mean with the configured
/// variances, and the normalized energy statistic then has exactly the
/// mean and variance used by the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleModel {
    pub sigma_w2: f64,
    pub sigma_i2: f64,
    pub sigma_s2: f64,
    pub hypothesis: Hypothesis,
}

impl SampleModel {
    /// Unit noise power with the detector's interference and signal ratios.
    pub fn from_params(params: &DetectorParams, hypothesis: Hypothesis) -> Self {
        SampleModel {
            sigma_w2: 1.0,
            sigma_i2: params.alpha_i,
            sigma_s2: params.alpha_s,
            hypothesis,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_w2", self.sigma_w2),
            ("sigma_i2", self.sigma_i2),
            ("sigma_s2", self.sigma_s2),
        ] {
            ensure_finite(name, v)?;
            if v < 0.0 {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    expected: ">= 0",
                });
            }
        }
        if self.sigma_w2 == 0.0 {
            return Err(Error::OutOfRange {
                name: "sigma_w2",
                value: 0.0,
                expected: "> 0",
            });
        }
        Ok(())
    }

    fn signal_power(&self) -> f64 {
        match self.hypothesis {
            Hypothesis::H0 => 0.0,
            Hypothesis::H1 => self.sigma_s2,
        }
    }

    /// Generates one window of `n` received samples.
    pub fn draw_window<R: Rng + ?Sized>(&self, n: u32, rng: &mut R) -> Vec<Complex64> {
        let noise = Normal::new(0.0, (self.sigma_w2 / 2.0).sqrt()).expect("validated variance");
        let si_amp = self.sigma_i2.sqrt();
        let pu_amp = self.signal_power().sqrt();
        (0..n)
            .map(|_| {
                let w = Complex64::new(noise.sample(rng), noise.sample(rng));
                let carrier: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let mut r = w + Complex64::from_polar(si_amp, carrier);
                if pu_amp > 0.0 {
                    let symbol = f64::from(rng.gen_range(0u8..4));
                    r += Complex64::from_polar(pu_amp, carrier + FRAC_PI_4 + symbol * FRAC_PI_2);
                }
                r
            })
            .collect()
    }

    /// Normalized energy statistic of a window.
    pub fn energy_statistic(&self, window: &[Complex64]) -> f64 {
        let energy: f64 = window.iter().map(|r| r.norm_sqr()).sum();
        energy / (window.len() as f64 * self.sigma_w2)
    }
}

/// How [`empirical_rates`] produces the energy of each window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SamplingMode {
    /// Generate all `N` samples and sum their energy.
    SampleLevel,
    /// Draw the window energy from its exact distribution under the same
    /// sample model. Conditional on the QPSK symbols, twice the energy is
    /// noncentral chi-square with `2N` degrees of freedom; the symbols only
    /// enter through a Binomial(N, 1/2) count.
    #[default]
    ExactStatistic,
}

/// Draws normalized energy statistics from the exact window distribution.
pub struct StatisticSampler {
    n: f64,
    model: SampleModel,
    central: ChiSquared<f64>,
    symbols: Option<Binomial>,
}

impl StatisticSampler {
    pub fn new(model: SampleModel, n_samples: u32) -> Result<Self> {
        model.validate()?;
        if n_samples == 0 {
            return Err(Error::OutOfRange {
                name: "n_samples",
                value: 0.0,
                expected: ">= 1",
            });
        }
        let n = f64::from(n_samples);
        let central = ChiSquared::new(2.0 * n - 1.0).expect("positive degrees of freedom");
        let symbols = (model.signal_power() > 0.0 && model.sigma_i2 > 0.0)
            .then(|| Binomial::new(u64::from(n_samples), 0.5).expect("valid binomial"));
        Ok(StatisticSampler {
            n,
            model,
            central,
            symbols,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let m = &self.model;
        let ai = m.sigma_i2 / m.sigma_w2;
        let as_ = m.signal_power() / m.sigma_w2;
        let cross = match &self.symbols {
            // cos of the symbol offset is +-1/sqrt(2) with equal odds
            Some(binom) => {
                let plus = binom.sample(rng) as f64;
                SQRT_2 * (ai * as_).sqrt() * (2.0 * plus - self.n)
            }
            None => 0.0,
        };
        let noncentrality = (2.0 * (self.n * (ai + as_) + cross)).max(0.0);
        let z: f64 = StandardNormal.sample(rng);
        let shifted = z + noncentrality.sqrt();
        (self.central.sample(rng) + shifted * shifted) / (2.0 * self.n)
    }
}

const TRIALS_PER_CHUNK: u64 = 4096;

/// Fraction of `trials` windows whose energy statistic exceeds `gamma`.
///
/// Under H0 this is the empirical false-alarm rate, under H1 the empirical
/// detection rate. Work is split into fixed chunks with their own
/// substreams, so the result depends only on `rng` and not on the thread
/// count.
pub fn empirical_rates(
    model: &SampleModel,
    params: &DetectorParams,
    gamma: f64,
    trials: u64,
    rng: &RngStream,
    mode: SamplingMode,
) -> Result<Probability> {
    ensure_finite("gamma", gamma)?;
    if trials == 0 {
        return Err(Error::OutOfRange {
            name: "trials",
            value: 0.0,
            expected: ">= 1",
        });
    }
    model.validate()?;
    let n = params.n_samples;
    let sampler = StatisticSampler::new(*model, n)?;
    let chunks = trials.div_ceil(TRIALS_PER_CHUNK);
    let exceed: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut g = rng.substream(chunk).generator();
            let count = TRIALS_PER_CHUNK.min(trials - chunk * TRIALS_PER_CHUNK);
            (0..count)
                .filter(|_| {
                    let stat = match mode {
                        SamplingMode::ExactStatistic => sampler.sample(&mut g),
                        SamplingMode::SampleLevel => {
                            let window = model.draw_window(n, &mut g);
                            model.energy_statistic(&window)
                        }
                    };
                    stat > gamma
                })
                .count() as u64
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(Probability::saturating(exceed as f64 / trials as f64))
}
