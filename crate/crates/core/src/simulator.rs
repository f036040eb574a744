//! Protocol-level Monte Carlo of one secondary link.
//!
//! Stage 1: with the link silent, SU-Tx senses in back-to-back windows
//! (half duplex, no self-interference). Once it sees the channel free the
//! strategy decides whether the receiver end is free too: FDJS and CSS send
//! a query and wait for SU-Rx's verdict, IJS asks its predictor, SINGLE_TX
//! does not check at all.
//!
//! Stage 2: SU-Tx sends frames while both radios keep sensing in full-duplex
//! mode. The last window of each frame produces a joint verdict; a busy
//! verdict drops the frame and sends the link back to stage 1. A frame that
//! overlaps any ON time of the primary user collides with it.
//!
//! Detector outcomes are Bernoulli draws at the analytic per-window rates,
//! conditioned on the PU state that occupies most of the window.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{DetectorParams, Hypothesis, SampleModel, P_MIN};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::fusion::{objective, optimize_eta, EtaSolution, JointDetector, OptimizerConfig};
use crate::numerics::{Probability, RngStream};
use crate::scenario::{
    sample_trajectory_with, Duplex, Geometry, Propagation, PuActivity, PuState, PuTrajectory, RadioConfig, Scene,
};

/// Sensing strategy of the secondary link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Full-duplex joint sensing with the optimized weight.
    Fdjs,
    /// Cooperative sensing with an even split of the miss budget.
    Css,
    /// SU-Tx sensing plus a Markov predictor standing in for SU-Rx.
    Ijs,
    /// SU-Tx alone.
    SingleTx,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Fdjs, Strategy::Css, Strategy::Ijs, Strategy::SingleTx];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Fdjs => "FDJS",
            Strategy::Css => "CSS",
            Strategy::Ijs => "IJS",
            Strategy::SingleTx => "SINGLE_TX",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy {s:?}")))
    }
}

/// How each sensing window's verdict is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DecisionModel {
    /// Bernoulli draws at the closed-form rates.
    #[default]
    Analytic,
    /// Literal sample windows compared against the operating threshold.
    /// Slow; meant for short spot checks.
    SampleLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub frame_s: f64,
    /// Stage-1 query and confirmation exchange.
    pub query_s: f64,
    pub duration_s: f64,
    pub trials: u32,
    /// Upper bound `b` on the joint missed-detection rate.
    pub md_bound: f64,
    /// Period of the receiver reports IJS learns from.
    pub ijs_report_s: f64,
    /// IJS predicts "free" above this OFF probability.
    pub ijs_confidence: f64,
    pub decisions: DecisionModel,
    pub optimizer: OptimizerConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            frame_s: 0.01,
            query_s: 0.002,
            duration_s: 200.0,
            trials: 30,
            md_bound: 0.1,
            ijs_report_s: 0.02,
            ijs_confidence: 0.9,
            decisions: DecisionModel::Analytic,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("frame_s", self.frame_s)?;
        ensure_finite("query_s", self.query_s)?;
        if self.query_s < 0.0 {
            return Err(Error::OutOfRange {
                name: "query_s",
                value: self.query_s,
                expected: ">= 0",
            });
        }
        ensure_positive("duration_s", self.duration_s)?;
        if self.trials == 0 {
            return Err(Error::OutOfRange {
                name: "trials",
                value: 0.0,
                expected: ">= 1",
            });
        }
        self.bound()?;
        ensure_positive("ijs_report_s", self.ijs_report_s)?;
        ensure_finite("ijs_confidence", self.ijs_confidence)?;
        if !(0.0..1.0).contains(&self.ijs_confidence) {
            return Err(Error::OutOfRange {
                name: "ijs_confidence",
                value: self.ijs_confidence,
                expected: "in [0, 1)",
            });
        }
        self.optimizer.validate()
    }

    fn bound(&self) -> Result<Probability> {
        ensure_finite("md_bound", self.md_bound)?;
        if !(self.md_bound > 0.0 && self.md_bound < 1.0) {
            return Err(Error::OutOfRange {
                name: "md_bound",
                value: self.md_bound,
                expected: "in (0, 1)",
            });
        }
        Probability::new(self.md_bound)
    }
}

/// Whether IJS treats the receiver end as free `elapsed_s` seconds after a
/// report of `last_state`.
pub fn ijs_predict(activity: &PuActivity, last_state: PuState, elapsed_s: f64, confidence: f64) -> bool {
    activity.p_off_after(last_state == PuState::On, elapsed_s) > confidence
}

/// One radio's miss and false-alarm rates per window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioOperatingPoint {
    pub m: f64,
    pub f: f64,
}

/// Operating points of one strategy in one stage. `rx` is absent when the
/// receiver does not sense.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StagePoints {
    pub tx: RadioOperatingPoint,
    pub rx: Option<RadioOperatingPoint>,
    pub eta: Option<f64>,
}

impl StagePoints {
    fn feasible(&self) -> bool {
        let ok = |p: &RadioOperatingPoint| p.f < 1.0 - P_MIN;
        ok(&self.tx) && self.rx.as_ref().is_none_or(ok)
    }
}

fn stage_points(
    strategy: Strategy,
    tx: &DetectorParams,
    rx: &DetectorParams,
    b: Probability,
    opt: &OptimizerConfig,
) -> Result<StagePoints> {
    let joint = JointDetector::new(tx.roc_constants(), rx.roc_constants(), b)?;
    let split = |sol: crate::fusion::JointOperatingPoint| StagePoints {
        tx: RadioOperatingPoint {
            m: sol.m_t.get(),
            f: sol.f_t.get(),
        },
        rx: Some(RadioOperatingPoint {
            m: sol.m_r.get(),
            f: sol.f_r.get(),
        }),
        eta: Some(sol.eta),
    };
    Ok(match strategy {
        Strategy::Fdjs => {
            let EtaSolution { point, .. } = optimize_eta(&joint, opt)?;
            split(point)
        }
        Strategy::Css => split(objective(&joint, 0.5)?),
        Strategy::Ijs | Strategy::SingleTx => StagePoints {
            tx: RadioOperatingPoint {
                m: b.get(),
                f: joint.single_tx_p_fa().get(),
            },
            rx: None,
            eta: None,
        },
    })
}

/// Per-window rates used in both stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkPlan {
    pub strategy: Strategy,
    /// Stage 1, half duplex.
    pub search: StagePoints,
    /// Stage 2, full duplex.
    pub transmit: StagePoints,
    pub feasible: bool,
}

impl LinkPlan {
    pub fn new(strategy: Strategy, scene: &Scene, sim: &SimConfig) -> Result<Self> {
        scene.validate()?;
        sim.validate()?;
        let b = sim.bound()?;
        let search = stage_points(
            strategy,
            &scene.tx_params(Duplex::Half)?,
            &scene.rx_params(Duplex::Half)?,
            b,
            &sim.optimizer,
        )?;
        let transmit = stage_points(
            strategy,
            &scene.tx_params(Duplex::Full)?,
            &scene.rx_params(Duplex::Full)?,
            b,
            &sim.optimizer,
        )?;
        Ok(LinkPlan {
            strategy,
            search,
            transmit,
            feasible: search.feasible() && transmit.feasible(),
        })
    }
}

/// Aggregate outcome of [`run_link`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub strategy: Strategy,
    /// Mean over trials.
    pub throughput_bps: f64,
    /// Standard error of the mean throughput.
    pub throughput_stderr: f64,
    /// Fraction of PU ON time overlapped by secondary frames.
    pub disruption_rate: f64,
    /// Fraction of PU OFF time not used by successful frames.
    pub false_alarm_loss: f64,
    pub frames_attempted: u64,
    pub frames_ok: u64,
    pub frames_collided: u64,
    /// Frames dropped on a busy verdict while the PU was actually OFF.
    pub frames_aborted: u64,
    pub queries_sent: u64,
    /// Some required operating point has a false-alarm rate of one; the
    /// link never transmits.
    pub infeasible: bool,
    pub plan: LinkPlan,
}

/// Raw counters of one trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub ok_airtime_s: f64,
    pub disrupted_s: f64,
    pub on_s: f64,
    pub off_s: f64,
    pub frames_attempted: u64,
    pub frames_ok: u64,
    pub frames_collided: u64,
    pub frames_aborted: u64,
    pub queries_sent: u64,
}

/// Simulates `sim.trials` independent trajectories of the link.
///
/// Trial `i` draws its PU trajectory from substream `2i` of `rng` and its
/// sensing outcomes from substream `2i + 1`, so different strategies and
/// different switch cycles see coupled traffic.
pub fn run_link(strategy: Strategy, scene: &Scene, sim: &SimConfig, rng: &RngStream) -> Result<SimResult> {
    let plan = LinkPlan::new(strategy, scene, sim)?;
    let trials: Vec<TrialStats> = (0..u64::from(sim.trials))
        .into_par_iter()
        .map(|i| {
            let mut traj_rng = rng.substream(2 * i).generator();
            let traj = sample_trajectory_with(&scene.activity, sim.duration_s, &mut traj_rng);
            run_trial(&plan, scene, sim, &traj, &rng.substream(2 * i + 1))
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(plan, scene, sim, &trials))
}

fn aggregate(plan: LinkPlan, scene: &Scene, sim: &SimConfig, trials: &[TrialStats]) -> SimResult {
    let rate = scene.radio.link_rate_bps();
    let per_trial: Vec<f64> = trials.iter().map(|t| rate * t.ok_airtime_s / sim.duration_s).collect();
    let n = per_trial.len() as f64;
    let mean = per_trial.iter().sum::<f64>() / n;
    let stderr = if per_trial.len() > 1 {
        (per_trial.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    let sum = |f: fn(&TrialStats) -> f64| trials.iter().map(f).sum::<f64>();
    let count = |f: fn(&TrialStats) -> u64| trials.iter().map(f).sum::<u64>();
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let off = sum(|t| t.off_s);
    SimResult {
        strategy: plan.strategy,
        throughput_bps: mean,
        throughput_stderr: stderr,
        disruption_rate: ratio(sum(|t| t.disrupted_s), sum(|t| t.on_s)),
        false_alarm_loss: ratio(off - sum(|t| t.ok_airtime_s), off),
        frames_attempted: count(|t| t.frames_attempted),
        frames_ok: count(|t| t.frames_ok),
        frames_collided: count(|t| t.frames_collided),
        frames_aborted: count(|t| t.frames_aborted),
        queries_sent: count(|t| t.queries_sent),
        infeasible: !plan.feasible,
        plan,
    }
}

/// A radio sensing at a fixed operating point.
struct Sensor {
    point: RadioOperatingPoint,
    sample: Option<SampleSensor>,
}

struct SampleSensor {
    n: u32,
    gamma: f64,
    h0: SampleModel,
    h1: SampleModel,
}

impl Sensor {
    fn new(point: RadioOperatingPoint, params: DetectorParams, decisions: DecisionModel) -> Result<Self> {
        let sample = match decisions {
            DecisionModel::Analytic => None,
            DecisionModel::SampleLevel => {
                let target = Probability::new(point.m.clamp(P_MIN, 1.0 - P_MIN))?;
                Some(SampleSensor {
                    n: params.n_samples,
                    gamma: params.threshold_for_p_md(target)?,
                    h0: SampleModel::from_params(&params, Hypothesis::H0),
                    h1: SampleModel::from_params(&params, Hypothesis::H1),
                })
            }
        };
        Ok(Sensor { point, sample })
    }

    fn p_free(&self, state: PuState) -> f64 {
        match state {
            PuState::Off => 1.0 - self.point.f,
            PuState::On => self.point.m,
        }
    }

    fn says_free<R: Rng>(&self, state: PuState, rng: &mut R) -> bool {
        match &self.sample {
            None => rng.gen::<f64>() < self.p_free(state),
            Some(s) => {
                let model = if state == PuState::On { &s.h1 } else { &s.h0 };
                model.energy_statistic(&model.draw_window(s.n, rng)) <= s.gamma
            }
        }
    }

    /// Index of the first of `count` identical windows that reads free.
    fn first_free<R: Rng>(&self, state: PuState, count: u64, rng: &mut R) -> Option<u64> {
        if self.sample.is_some() {
            return (0..count).find(|_| self.says_free(state, rng));
        }
        let p = self.p_free(state);
        if p <= 0.0 {
            return None;
        }
        let k = Geometric::new(p.min(1.0)).expect("probability in (0, 1]").sample(rng);
        (k < count).then_some(k)
    }
}

/// Last thing SU-Tx learned about the receiver side, for IJS.
#[derive(Clone, Copy)]
struct Report {
    state: PuState,
    at_s: f64,
}

struct Trial<'a, R: Rng> {
    strategy: Strategy,
    sim: &'a SimConfig,
    activity: PuActivity,
    traj: &'a PuTrajectory,
    window_s: f64,
    tx1: Sensor,
    rx1: Option<Sensor>,
    tx2: Sensor,
    rx2: Option<Sensor>,
    rng: R,
    frame_report: Option<Report>,
    stats: TrialStats,
}

fn run_trial(
    plan: &LinkPlan,
    scene: &Scene,
    sim: &SimConfig,
    traj: &PuTrajectory,
    rng: &RngStream,
) -> Result<TrialStats> {
    let on_s = traj.total_on_s();
    let mut stats = TrialStats {
        on_s,
        off_s: sim.duration_s - on_s,
        ..TrialStats::default()
    };
    if !plan.feasible {
        return Ok(stats);
    }
    let d = sim.decisions;
    let rx_sensor = |p: Option<RadioOperatingPoint>, duplex| -> Result<Option<Sensor>> {
        p.map(|p| Sensor::new(p, scene.rx_params(duplex)?, d)).transpose()
    };
    let mut trial = Trial {
        strategy: plan.strategy,
        sim,
        activity: scene.activity,
        traj,
        window_s: scene.radio.window_s(),
        tx1: Sensor::new(plan.search.tx, scene.tx_params(Duplex::Half)?, d)?,
        rx1: rx_sensor(plan.search.rx, Duplex::Half)?,
        tx2: Sensor::new(plan.transmit.tx, scene.tx_params(Duplex::Full)?, d)?,
        rx2: rx_sensor(plan.transmit.rx, Duplex::Full)?,
        rng: rng.generator(),
        frame_report: None,
        stats,
    };
    trial.run();
    stats = trial.stats;
    Ok(stats)
}

impl<R: Rng> Trial<'_, R> {
    fn duration(&self) -> f64 {
        self.sim.duration_s
    }

    fn majority(&self, from: f64, to: f64) -> PuState {
        if self.traj.on_time_in(from, to) * 2.0 > to - from {
            PuState::On
        } else {
            PuState::Off
        }
    }

    fn run(&mut self) {
        let mut t = 0.0;
        while t < self.duration() {
            let Some(free_at) = self.search(t) else {
                return;
            };
            t = match self.confirm(free_at) {
                Ok(start) => self.transmit(start),
                Err(retry_at) => retry_at,
            };
        }
    }

    /// Stage 1: end time of the first window in which SU-Tx reads free.
    fn search(&mut self, mut t: f64) -> Option<f64> {
        let w = self.window_s;
        loop {
            if t + w > self.duration() {
                return None;
            }
            let iv = self.traj.intervals[self.traj.index_at(t)];
            let whole = ((iv.end_s.min(self.duration()) - t) / w).floor();
            if whole >= 1.0 {
                let count = whole as u64;
                if let Some(k) = self.tx1.first_free(iv.state, count, &mut self.rng) {
                    return Some(t + (k + 1) as f64 * w);
                }
                t += count as f64 * w;
                continue;
            }
            // window straddles a state change
            let state = self.majority(t, t + w);
            t += w;
            if self.tx1.says_free(state, &mut self.rng) {
                return Some(t);
            }
        }
    }

    /// Receiver step after SU-Tx reads free at `t`. Returns the start of
    /// stage 2, or the time to resume stage 1.
    fn confirm(&mut self, t: f64) -> std::result::Result<f64, f64> {
        match self.strategy {
            Strategy::SingleTx => Ok(t),
            Strategy::Fdjs | Strategy::Css => {
                self.stats.queries_sent += 1;
                let state = self.majority(t, t + self.window_s);
                let rx = self.rx1.as_ref().expect("joint strategies sense at SU-Rx");
                let free = rx.says_free(state, &mut self.rng);
                let after = t + self.sim.query_s;
                if free {
                    Ok(after)
                } else {
                    Err(after)
                }
            }
            Strategy::Ijs => {
                if self.predict_free(t) {
                    Ok(t)
                } else {
                    let r = self.sim.ijs_report_s;
                    Err(((t / r).floor() + 1.0) * r)
                }
            }
        }
    }

    fn latest_report(&self, now: f64) -> Report {
        let r = self.sim.ijs_report_s;
        let beacon_at = (now / r).floor() * r;
        match self.frame_report {
            Some(rep) if rep.at_s >= beacon_at => rep,
            _ => Report {
                state: self.traj.state_at(beacon_at),
                at_s: beacon_at,
            },
        }
    }

    /// IJS: will the receiver side stay free through the next frame?
    fn predict_free(&self, now: f64) -> bool {
        let rep = self.latest_report(now);
        let horizon = now - rep.at_s + self.sim.frame_s;
        ijs_predict(&self.activity, rep.state, horizon, self.sim.ijs_confidence)
    }

    /// Stage 2 from `t`; returns the time stage 1 resumes.
    fn transmit(&mut self, mut t: f64) -> f64 {
        let f = self.sim.frame_s;
        let w = self.window_s.min(f);
        while t + f <= self.duration() {
            let end = t + f;
            self.stats.frames_attempted += 1;
            let on = self.traj.on_time_in(t, end);
            let state = self.majority(end - w, end);
            let tx_free = self.tx2.says_free(state, &mut self.rng);
            let rx_free = match self.strategy {
                Strategy::Fdjs | Strategy::Css => {
                    let rx = self.rx2.as_ref().expect("joint strategies sense at SU-Rx");
                    rx.says_free(state, &mut self.rng)
                }
                Strategy::Ijs => {
                    self.frame_report = Some(Report {
                        state: if on > 0.0 { PuState::On } else { PuState::Off },
                        at_s: end,
                    });
                    self.predict_free(end)
                }
                Strategy::SingleTx => true,
            };
            let free = tx_free && rx_free;
            if on > 0.0 {
                self.stats.frames_collided += 1;
                self.stats.disrupted_s += on;
            } else if free {
                self.stats.frames_ok += 1;
                self.stats.ok_airtime_s += f;
            } else {
                self.stats.frames_aborted += 1;
            }
            t = end;
            if !free {
                break;
            }
        }
        if t + f > self.duration() {
            // not enough time left for another frame
            return self.duration();
        }
        t
    }
}

/// One cell of the false-alarm improvement map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub d_tx_m: f64,
    pub d_rx_m: f64,
    pub pfa_single: f64,
    pub pfa_css: f64,
    pub pfa_fdjs: f64,
    pub ratio_css: f64,
    pub ratio_fdjs: f64,
    pub eta: f64,
    /// Some rate underflowed and was raised to the smallest positive
    /// double before taking ratios.
    pub clamped: bool,
}

/// False-alarm rates of a single SU-Tx detector, CSS and FDJS on each
/// geometry, with full-duplex radios and joint miss bound `bound`.
pub fn heatmap_pfa(
    propagation: &Propagation,
    radio: &RadioConfig,
    geometries: &[Geometry],
    bound: Probability,
    optimizer: &OptimizerConfig,
) -> Result<Vec<HeatmapCell>> {
    propagation.validate()?;
    radio.validate()?;
    optimizer.validate()?;
    if geometries.is_empty() {
        return Err(Error::InvalidConfig("empty distance grid".into()));
    }
    geometries
        .par_iter()
        .map(|g| heatmap_cell(propagation, radio, g, bound, optimizer))
        .collect()
}

fn heatmap_cell(
    prop: &Propagation,
    radio: &RadioConfig,
    g: &Geometry,
    bound: Probability,
    opt: &OptimizerConfig,
) -> Result<HeatmapCell> {
    let g = Geometry::new(g.d_tx_m, g.d_rx_m)?;
    let scene = Scene {
        propagation: *prop,
        radio: *radio,
        geometry: g,
        activity: PuActivity::new(1.0, 1.0)?,
    };
    let tx = scene.tx_params(Duplex::Full)?;
    let rx = scene.rx_params(Duplex::Full)?;
    let mut clamped = [prop.alpha_s_at(g.d_tx_m)?, prop.alpha_s_at(g.d_rx_m)?]
        .iter()
        .any(|a| *a < f64::MIN_POSITIVE);
    let joint = JointDetector::new(tx.roc_constants(), rx.roc_constants(), bound)?;
    let fdjs = optimize_eta(&joint, opt)?.point;
    let mut floor = |p: f64| {
        if p < f64::MIN_POSITIVE {
            clamped = true;
            f64::MIN_POSITIVE
        } else {
            p
        }
    };
    let pfa_single = floor(joint.single_tx_p_fa().get());
    let pfa_css = floor(objective(&joint, 0.5)?.p_fa.get());
    let pfa_fdjs = floor(fdjs.p_fa.get());
    Ok(HeatmapCell {
        d_tx_m: g.d_tx_m,
        d_rx_m: g.d_rx_m,
        pfa_single,
        pfa_css,
        pfa_fdjs,
        ratio_css: pfa_single / pfa_css,
        ratio_fdjs: pfa_single / pfa_fdjs,
        eta: fdjs.eta,
        clamped,
    })
}
