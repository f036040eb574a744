//! Flat JSON experiment configuration.
//!
//! Every field is optional; missing fields take the defaults below. Values
//! given with `--set key=value` on the command line override the file.

use std::path::Path;

use anyhow::{bail, Context, Result};
use fdjs_core::{
    DecisionModel, DetectorParams, Geometry, OptimizerConfig, Probability, Propagation, PuActivity, RadioConfig, Scene,
    SimConfig, Strategy,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,

    // propagation
    pub e_t_dbm: f64,
    pub beta: f64,
    pub noise_dbm: f64,
    pub keep_out_m: f64,

    // radio; `si_dbm: null` means perfect self-interference cancellation
    pub bandwidth_hz: f64,
    pub si_dbm: Option<f64>,
    pub su_link_snr_db: f64,
    pub n_samples: u32,
    pub sample_rate_hz: Option<f64>,

    // geometry: distances of SU-Tx and SU-Rx from the PU transmitter
    pub d_tx_m: f64,
    pub d_rx_m: f64,

    // detector overrides; when unset they follow from the geometry
    pub alpha_i: Option<f64>,
    pub alpha_s: Option<f64>,
    pub alpha_s_tx: Option<f64>,
    pub alpha_s_rx: Option<f64>,

    // PU activity
    pub payload: f64,
    pub switch_cycle_s: f64,

    // link simulation
    pub frame_s: f64,
    pub query_s: f64,
    pub duration_s: f64,
    pub trials: u32,
    pub md_bound: f64,
    pub ijs_report_s: f64,
    pub ijs_confidence: f64,
    pub sample_level: bool,

    // optimizer
    pub epsilon: f64,
    pub eta_tol: f64,
    pub eta_floor: f64,
    pub max_iter: u32,

    // roc
    pub gamma_points: u32,

    // optimize
    pub curve_points: u32,
    pub verify_grid_points: u32,

    // heatmap: both axes span [grid_min_m, grid_max_m] in grid_step_m steps
    pub grid_min_m: f64,
    pub grid_max_m: f64,
    pub grid_step_m: f64,
    pub svg_column: String,

    // throughput
    pub switch_cycles_s: Vec<f64>,
    pub separations_m: Vec<f64>,
    pub strategies: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = Propagation::default();
        let r = RadioConfig::default();
        let s = SimConfig::default();
        let o = OptimizerConfig::default();
        ExperimentConfig {
            seed: 1,
            e_t_dbm: p.e_t_dbm,
            beta: p.beta,
            noise_dbm: p.noise_dbm,
            keep_out_m: p.keep_out_m,
            bandwidth_hz: r.bandwidth_hz,
            si_dbm: Some(r.si_dbm),
            su_link_snr_db: r.su_link_snr_db,
            n_samples: r.n_samples,
            sample_rate_hz: r.sample_rate_hz,
            d_tx_m: 150_000.0,
            d_rx_m: 180_000.0,
            alpha_i: None,
            alpha_s: None,
            alpha_s_tx: None,
            alpha_s_rx: None,
            payload: 0.4,
            switch_cycle_s: 1.0,
            frame_s: s.frame_s,
            query_s: s.query_s,
            duration_s: s.duration_s,
            trials: s.trials,
            md_bound: s.md_bound,
            ijs_report_s: s.ijs_report_s,
            ijs_confidence: s.ijs_confidence,
            sample_level: false,
            epsilon: o.epsilon,
            eta_tol: o.eta_tol,
            eta_floor: o.eta_floor,
            max_iter: o.max_iter,
            gamma_points: 201,
            curve_points: 999,
            verify_grid_points: 100_000,
            grid_min_m: 100_000.0,
            grid_max_m: 290_000.0,
            grid_step_m: 10_000.0,
            svg_column: "ratio_fdjs".into(),
            switch_cycles_s: vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0],
            separations_m: vec![30_000.0, 10_000.0],
            strategies: Strategy::ALL.iter().map(|s| s.name().to_owned()).collect(),
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (if any), applies `key=value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut tree = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                let v: Value =
                    serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
                match v {
                    Value::Object(m) => m,
                    _ => bail!("config {} must be a JSON object", p.display()),
                }
            }
            None => Map::new(),
        };
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .with_context(|| format!("--set expects key=value, got {item:?}"))?;
            // Bare words that are not JSON are taken as strings.
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
            tree.insert(key.trim().to_owned(), value);
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(Value::Object(tree)).context("invalid configuration")?;
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.propagation().validate()?;
        self.radio().validate()?;
        self.sim().validate()?;
        Geometry::new(self.d_tx_m, self.d_rx_m)?;
        PuActivity::from_cycle(self.switch_cycle_s, self.payload)?;
        if let Some(a) = self.alpha_i {
            if !(a.is_finite() && a >= 0.0) {
                bail!("alpha_i must be finite and >= 0, got {a}");
            }
        }
        for (name, v) in [
            ("alpha_s", self.alpha_s),
            ("alpha_s_tx", self.alpha_s_tx),
            ("alpha_s_rx", self.alpha_s_rx),
        ] {
            if let Some(a) = v {
                if !(a.is_finite() && a > 0.0) {
                    bail!("{name} must be finite and > 0, got {a}");
                }
            }
        }
        if self.gamma_points < 2 || self.curve_points < 2 || self.verify_grid_points < 2 {
            bail!("gamma_points, curve_points and verify_grid_points must be >= 2");
        }
        if !(self.grid_step_m.is_finite() && self.grid_step_m > 0.0) {
            bail!("grid_step_m must be > 0, got {}", self.grid_step_m);
        }
        if !(self.grid_min_m > 0.0 && self.grid_min_m <= self.grid_max_m && self.grid_max_m.is_finite()) {
            bail!(
                "empty distance range: grid_min_m = {}, grid_max_m = {}",
                self.grid_min_m,
                self.grid_max_m
            );
        }
        if !matches!(self.svg_column.as_str(), "ratio_css" | "ratio_fdjs") {
            bail!(
                "svg_column must be \"ratio_css\" or \"ratio_fdjs\", got {:?}",
                self.svg_column
            );
        }
        if self.switch_cycles_s.is_empty() || self.switch_cycles_s.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            bail!("switch_cycles_s must be a non-empty list of positive values");
        }
        if self.separations_m.is_empty() || self.separations_m.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            bail!("separations_m must be a non-empty list of non-negative values");
        }
        self.strategy_list()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn propagation(&self) -> Propagation {
        Propagation {
            e_t_dbm: self.e_t_dbm,
            beta: self.beta,
            noise_dbm: self.noise_dbm,
            keep_out_m: self.keep_out_m,
        }
    }

    pub fn radio(&self) -> RadioConfig {
        RadioConfig {
            bandwidth_hz: self.bandwidth_hz,
            si_dbm: self.si_dbm.unwrap_or(f64::NEG_INFINITY),
            su_link_snr_db: self.su_link_snr_db,
            n_samples: self.n_samples,
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            epsilon: self.epsilon,
            eta_tol: self.eta_tol,
            eta_floor: self.eta_floor,
            max_iter: self.max_iter,
        }
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            frame_s: self.frame_s,
            query_s: self.query_s,
            duration_s: self.duration_s,
            trials: self.trials,
            md_bound: self.md_bound,
            ijs_report_s: self.ijs_report_s,
            ijs_confidence: self.ijs_confidence,
            decisions: if self.sample_level {
                DecisionModel::SampleLevel
            } else {
                DecisionModel::Analytic
            },
            optimizer: self.optimizer(),
        }
    }

    pub fn bound(&self) -> Result<Probability> {
        Ok(Probability::new(self.md_bound)?)
    }

    pub fn scene(&self, d_rx_m: f64, switch_cycle_s: f64) -> Result<Scene> {
        Ok(Scene {
            propagation: self.propagation(),
            radio: self.radio(),
            geometry: Geometry::new(self.d_tx_m, d_rx_m)?,
            activity: PuActivity::from_cycle(switch_cycle_s, self.payload)?,
        })
    }

    fn alpha_i_value(&self) -> f64 {
        self.alpha_i
            .unwrap_or_else(|| self.radio().alpha_i_of(&self.propagation()))
    }

    fn alpha_s_value(&self, distance_m: f64) -> Result<f64> {
        Ok(self.propagation().alpha_s_at(distance_m)?.max(f64::MIN_POSITIVE))
    }

    /// Detector physics of a full-duplex SU-Tx for the `roc` command.
    pub fn detector(&self) -> Result<DetectorParams> {
        let alpha_s = match self.alpha_s {
            Some(a) => a,
            None => self.alpha_s_value(self.d_tx_m)?,
        };
        Ok(DetectorParams::new(self.n_samples, self.alpha_i_value(), alpha_s)?)
    }

    /// Full-duplex SU-Tx and SU-Rx detectors for the `optimize` command.
    pub fn detector_pair(&self) -> Result<(DetectorParams, DetectorParams)> {
        let tx = match self.alpha_s_tx {
            Some(a) => a,
            None => self.alpha_s_value(self.d_tx_m)?,
        };
        let rx = match self.alpha_s_rx {
            Some(a) => a,
            None => self.alpha_s_value(self.d_rx_m)?,
        };
        let ai = self.alpha_i_value();
        Ok((
            DetectorParams::new(self.n_samples, ai, tx)?,
            DetectorParams::new(self.n_samples, ai, rx)?,
        ))
    }

    pub fn grid_axis(&self) -> Vec<f64> {
        let steps = ((self.grid_max_m - self.grid_min_m) / self.grid_step_m + 1e-9).floor() as usize;
        (0..=steps)
            .map(|i| self.grid_min_m + self.grid_step_m * i as f64)
            .collect()
    }

    pub fn strategy_list(&self) -> Result<Vec<Strategy>> {
        if self.strategies.is_empty() {
            bail!("strategies must not be empty");
        }
        self.strategies
            .iter()
            .map(|s| s.parse::<Strategy>().map_err(anyhow::Error::from))
            .collect()
    }
}
