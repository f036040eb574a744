//! Physical scene: link budget, radio settings, deployment geometry and the
//! primary user's ON/OFF activity.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::detector::DetectorParams;
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::numerics::RngStream;

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Log-distance path loss from the primary transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    /// Primary transmit power, dBm.
    pub e_t_dbm: f64,
    /// Path-loss exponent.
    pub beta: f64,
    /// Receiver noise floor, dBm.
    pub noise_dbm: f64,
    /// Keep-out radius around the primary transmitter, meters.
    pub keep_out_m: f64,
}

impl Default for Propagation {
    fn default() -> Self {
        Propagation {
            e_t_dbm: 90.0,
            beta: 3.6,
            // thermal noise over a 6 MHz channel
            noise_dbm: -106.0,
            keep_out_m: 150_000.0,
        }
    }
}

impl Propagation {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("e_t_dbm", self.e_t_dbm)?;
        ensure_positive("beta", self.beta)?;
        ensure_finite("noise_dbm", self.noise_dbm)?;
        ensure_positive("keep_out_m", self.keep_out_m)?;
        Ok(())
    }

    /// Received primary power in dBm at `distance_m` meters.
    pub fn received_power_dbm(&self, distance_m: f64) -> Result<f64> {
        ensure_positive("distance_m", distance_m)?;
        Ok(self.e_t_dbm - 10.0 * self.beta * distance_m.log10())
    }

    /// Primary signal to noise ratio (linear) at `distance_m` meters.
    pub fn alpha_s_at(&self, distance_m: f64) -> Result<f64> {
        Ok(db_to_linear(self.received_power_dbm(distance_m)? - self.noise_dbm))
    }
}

/// Secondary radio settings shared by both ends of the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    /// Residual self-interference after cancellation, dBm. Negative
    /// infinity means perfect cancellation.
    pub si_dbm: f64,
    pub su_link_snr_db: f64,
    /// Samples per sensing window.
    pub n_samples: u32,
    /// Sensing sample rate; the bandwidth when unset.
    pub sample_rate_hz: Option<f64>,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            bandwidth_hz: 6e6,
            si_dbm: -86.0,
            su_link_snr_db: 10.0,
            n_samples: 100,
            sample_rate_hz: None,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("bandwidth_hz", self.bandwidth_hz)?;
        if self.si_dbm.is_nan() || self.si_dbm == f64::INFINITY {
            return Err(Error::NonFinite {
                name: "si_dbm",
                value: self.si_dbm,
            });
        }
        ensure_finite("su_link_snr_db", self.su_link_snr_db)?;
        if self.n_samples == 0 {
            return Err(Error::OutOfRange {
                name: "n_samples",
                value: 0.0,
                expected: ">= 1",
            });
        }
        if let Some(rate) = self.sample_rate_hz {
            ensure_positive("sample_rate_hz", rate)?;
        }
        Ok(())
    }

    /// Residual self-interference to noise ratio, linear.
    pub fn alpha_i_of(&self, prop: &Propagation) -> f64 {
        if self.si_dbm == f64::NEG_INFINITY {
            return 0.0;
        }
        db_to_linear(self.si_dbm - prop.noise_dbm)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate_hz.unwrap_or(self.bandwidth_hz)
    }

    /// Duration of one sensing window, seconds.
    pub fn window_s(&self) -> f64 {
        f64::from(self.n_samples) / self.sample_rate()
    }

    /// Shannon rate of the secondary link while transmitting, bit/s.
    pub fn link_rate_bps(&self) -> f64 {
        self.bandwidth_hz * (1.0 + db_to_linear(self.su_link_snr_db)).log2()
    }
}

/// Distances of the two secondary radios from the primary transmitter. The
/// three radios sit on one line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub d_tx_m: f64,
    pub d_rx_m: f64,
}

impl Geometry {
    pub fn new(d_tx_m: f64, d_rx_m: f64) -> Result<Self> {
        ensure_positive("d_tx_m", d_tx_m)?;
        ensure_positive("d_rx_m", d_rx_m)?;
        Ok(Geometry { d_tx_m, d_rx_m })
    }

    pub fn separation_m(&self) -> f64 {
        (self.d_tx_m - self.d_rx_m).abs()
    }
}

/// Whether each radio runs full duplex (self-interference present).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Duplex {
    Half,
    Full,
}

/// Complete physical scene for one secondary link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub propagation: Propagation,
    pub radio: RadioConfig,
    pub geometry: Geometry,
    pub activity: PuActivity,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.propagation.validate()?;
        self.radio.validate()?;
        Geometry::new(self.geometry.d_tx_m, self.geometry.d_rx_m)?;
        PuActivity::new(self.activity.mean_on_s, self.activity.mean_off_s)?;
        Ok(())
    }

    fn params_at(&self, distance_m: f64, duplex: Duplex) -> Result<DetectorParams> {
        let alpha_i = match duplex {
            Duplex::Half => 0.0,
            Duplex::Full => self.radio.alpha_i_of(&self.propagation),
        };
        let alpha_s = self.propagation.alpha_s_at(distance_m)?;
        // Far beyond the keep-out radius the PU can drop below f64 range;
        // keep the parameters valid and let the ROC report "no detection".
        DetectorParams::new(self.radio.n_samples, alpha_i, alpha_s.max(f64::MIN_POSITIVE))
    }

    /// Detector physics at the transmitter.
    pub fn tx_params(&self, duplex: Duplex) -> Result<DetectorParams> {
        self.params_at(self.geometry.d_tx_m, duplex)
    }

    /// Detector physics at the receiver.
    pub fn rx_params(&self, duplex: Duplex) -> Result<DetectorParams> {
        self.params_at(self.geometry.d_rx_m, duplex)
    }
}

/// Two-state continuous-time Markov activity of the primary user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PuActivity {
    pub mean_on_s: f64,
    pub mean_off_s: f64,
}

impl PuActivity {
    pub fn new(mean_on_s: f64, mean_off_s: f64) -> Result<Self> {
        ensure_positive("mean_on_s", mean_on_s)?;
        ensure_positive("mean_off_s", mean_off_s)?;
        Ok(PuActivity { mean_on_s, mean_off_s })
    }

    /// Activity with a given ON/OFF switch cycle and ON fraction.
    pub fn from_cycle(switch_cycle_s: f64, payload: f64) -> Result<Self> {
        ensure_positive("switch_cycle_s", switch_cycle_s)?;
        ensure_finite("payload", payload)?;
        if !(payload > 0.0 && payload < 1.0) {
            return Err(Error::OutOfRange {
                name: "payload",
                value: payload,
                expected: "in (0, 1)",
            });
        }
        PuActivity::new(switch_cycle_s * payload, switch_cycle_s * (1.0 - payload))
    }

    /// Long-run fraction of time the PU is ON.
    pub fn payload(&self) -> f64 {
        self.mean_on_s / (self.mean_on_s + self.mean_off_s)
    }

    pub fn switch_cycle_s(&self) -> f64 {
        self.mean_on_s + self.mean_off_s
    }

    /// Probability that the PU is OFF `tau` seconds after it was observed
    /// in state `was_on`.
    pub fn p_off_after(&self, was_on: bool, tau: f64) -> f64 {
        let pi_on = self.payload();
        let pi_off = 1.0 - pi_on;
        let decay = (-tau.max(0.0) * (1.0 / self.mean_on_s + 1.0 / self.mean_off_s)).exp();
        if was_on {
            pi_off * (1.0 - decay)
        } else {
            pi_off + pi_on * decay
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PuState {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub state: PuState,
    pub start_s: f64,
    pub end_s: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn is_empty(&self) -> bool {
        self.end_s <= self.start_s
    }
}

/// Alternating ON/OFF intervals tiling `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuTrajectory {
    pub intervals: Vec<Interval>,
}

impl PuTrajectory {
    pub fn duration_s(&self) -> f64 {
        self.intervals.last().map_or(0.0, |iv| iv.end_s)
    }

    /// Index of the interval containing `t` (the later one at a boundary).
    pub fn index_at(&self, t: f64) -> usize {
        let i = self.intervals.partition_point(|iv| iv.end_s <= t);
        i.min(self.intervals.len().saturating_sub(1))
    }

    pub fn state_at(&self, t: f64) -> PuState {
        self.intervals[self.index_at(t)].state
    }

    /// Time the PU spends ON within `[from, to)`.
    pub fn on_time_in(&self, from: f64, to: f64) -> f64 {
        if to <= from {
            return 0.0;
        }
        let mut total = 0.0;
        for iv in &self.intervals[self.index_at(from)..] {
            if iv.start_s >= to {
                break;
            }
            if iv.state == PuState::On {
                total += iv.end_s.min(to) - iv.start_s.max(from);
            }
        }
        total
    }

    pub fn total_on_s(&self) -> f64 {
        self.intervals
            .iter()
            .filter(|iv| iv.state == PuState::On)
            .map(Interval::len)
            .sum()
    }
}

/// Samples an activity trajectory over `[0, duration_s]`, starting from the
/// stationary distribution.
pub fn sample_trajectory(activity: &PuActivity, duration_s: f64, rng: &RngStream) -> Result<PuTrajectory> {
    ensure_positive("duration_s", duration_s)?;
    let activity = PuActivity::new(activity.mean_on_s, activity.mean_off_s)?;
    let mut g = rng.generator();
    Ok(sample_trajectory_with(&activity, duration_s, &mut g))
}

pub(crate) fn sample_trajectory_with<R: Rng + ?Sized>(
    activity: &PuActivity,
    duration_s: f64,
    rng: &mut R,
) -> PuTrajectory {
    let on = Exp::new(1.0 / activity.mean_on_s).expect("positive rate");
    let off = Exp::new(1.0 / activity.mean_off_s).expect("positive rate");
    let mut state = if rng.gen::<f64>() < activity.payload() {
        PuState::On
    } else {
        PuState::Off
    };
    let mut intervals = Vec::new();
    let mut t = 0.0;
    while t < duration_s {
        let dwell = match state {
            PuState::On => on.sample(rng),
            PuState::Off => off.sample(rng),
        };
        let end = (t + dwell).min(duration_s);
        if end > t {
            intervals.push(Interval {
                state,
                start_s: t,
                end_s: end,
            });
        }
        t = end;
        state = match state {
            PuState::On => PuState::Off,
            PuState::Off => PuState::On,
        };
    }
    // A zero-length dwell would leave two equal states adjacent; merge them.
    intervals.dedup_by(|next, prev| {
        if next.state == prev.state {
            prev.end_s = next.end_s;
            true
        } else {
            false
        }
    });
    PuTrajectory { intervals }
}
