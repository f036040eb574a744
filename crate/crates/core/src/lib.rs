//! Full-duplex joint spectrum sensing for secondary-user links.
//!
//! * [`numerics`]: Gaussian tail functions and reproducible random streams.
//! * [`detector`]: closed-form energy-detector model for a full-duplex radio.
//! * [`fusion`]: AND-rule fusion of two detectors and the optimal threshold
//!   weight.
//! * [`scenario`]: geometry, link budget and primary-user activity.
//! * [`simulator`]: protocol-level Monte Carlo of a secondary link.

pub mod detector;
pub mod error;
pub mod fusion;
pub mod numerics;
pub mod scenario;
pub mod simulator;

pub use detector::{empirical_rates, DetectorParams, Hypothesis, RocConstants, SampleModel, SamplingMode, P_MIN};
pub use error::{Error, Result};
pub use fusion::{
    fuse_availability, gradient, joint_p_fa, joint_p_md, objective, objective_with, optimize_eta, EtaSolution,
    JointDetector, JointOperatingPoint, OptimizerConfig, SearchStatus,
};
pub use numerics::{q_func, q_inv, std_normal_pdf, Probability, RngStream};
pub use scenario::{
    sample_trajectory, Duplex, Geometry, Interval, Propagation, PuActivity, PuState, PuTrajectory, RadioConfig, Scene,
};
pub use simulator::{
    heatmap_pfa, ijs_predict, run_link, DecisionModel, HeatmapCell, LinkPlan, SimConfig, SimResult, Strategy,
};
