//! AND-rule fusion of the transmitter and receiver detectors and the search
//! for the threshold weight that minimizes the joint false-alarm rate.
//!
//! The link is declared free only when both radios see the channel idle, so
//! the joint miss rate is `m_T * m_R` and the joint false-alarm rate is
//! `1 - (1 - f_T)(1 - f_R)`. Holding the joint miss rate at the bound `b`
//! and splitting it as `m_T = b^eta`, `m_R = b^(1 - eta)` leaves a single
//! free variable `eta`.

use serde::{Deserialize, Serialize};

use crate::detector::{clamp_probability, RocConstants};
use crate::error::{ensure_finite, Error, Result};
use crate::numerics::Probability;

/// Link-level availability: free only if both ends report free.
pub fn fuse_availability(l_t: bool, l_r: bool) -> bool {
    l_t && l_r
}

/// Joint missed-detection rate under the AND rule.
pub fn joint_p_md(m_t: Probability, m_r: Probability) -> Probability {
    Probability::saturating(m_t.get() * m_r.get())
}

/// Joint false-alarm rate under the AND rule.
pub fn joint_p_fa(f_t: Probability, f_r: Probability) -> Probability {
    Probability::saturating(or_rate(f_t.get(), f_r.get()))
}

#[inline]
fn or_rate(a: f64, b: f64) -> f64 {
    a + b - a * b
}

/// A transmitter/receiver detector pair sharing a miss-rate budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDetector {
    pub tx: RocConstants,
    pub rx: RocConstants,
    /// Upper bound `b` on the joint missed-detection rate.
    pub bound: Probability,
}

impl JointDetector {
    pub fn new(tx: RocConstants, rx: RocConstants, bound: Probability) -> Result<Self> {
        let tx = RocConstants::new(tx.c, tx.k)?;
        let rx = RocConstants::new(rx.c, rx.k)?;
        let b = bound.get();
        if b <= 0.0 || b >= 1.0 {
            return Err(Error::OutOfRange {
                name: "bound",
                value: b,
                expected: "in (0, 1)",
            });
        }
        Ok(JointDetector { tx, rx, bound })
    }

    /// True when both detectors share the same ROC (to 1e-12 relative).
    pub fn is_symmetric(&self) -> bool {
        self.tx.approx_eq(&self.rx, 1e-12)
    }

    /// False-alarm rate of the transmitter alone at miss rate `b`, the
    /// `eta -> 1` limit of the joint scheme.
    pub fn single_tx_p_fa(&self) -> Probability {
        self.tx.p_fa_of_p_md(self.bound)
    }

    fn ln_b(&self) -> f64 {
        self.bound.get().ln()
    }

    /// Joint false-alarm rate at `eta` without range checks.
    fn p_fa_at(&self, eta: f64) -> f64 {
        let ln_b = self.ln_b();
        let f_t = self.tx.p_fa_raw((eta * ln_b).exp());
        let f_r = self.rx.p_fa_raw(((1.0 - eta) * ln_b).exp());
        or_rate(f_t, f_r)
    }

    fn gradient_at(&self, eta: f64) -> f64 {
        let ln_b = self.ln_b();
        let m_t = clamp_probability((eta * ln_b).exp());
        let m_r = clamp_probability(((1.0 - eta) * ln_b).exp());
        let f_t = self.tx.p_fa_raw(m_t);
        let f_r = self.rx.p_fa_raw(m_r);
        let d_t = self.tx.derivative_raw(m_t);
        let d_r = self.rx.derivative_raw(m_r);
        ln_b * (m_t * d_t * (1.0 - f_r) - m_r * d_r * (1.0 - f_t))
    }
}

/// Per-radio and joint rates at one weight `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointOperatingPoint {
    /// Weight of SU-Tx. Exactly 0 or 1 only for the single-radio limits
    /// returned by [`optimize_eta`].
    pub eta: f64,
    pub m_t: Probability,
    pub m_r: Probability,
    pub f_t: Probability,
    pub f_r: Probability,
    pub p_md: Probability,
    pub p_fa: Probability,
}

/// Settings for [`optimize_eta`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Stop once the endpoint false-alarm rates agree to this fraction of
    /// the larger one.
    pub epsilon: f64,
    /// Stop once the bracket is narrower than this.
    pub eta_tol: f64,
    /// Distance kept from 0 and 1 when evaluating `eta`.
    pub eta_floor: f64,
    pub max_iter: u32,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            epsilon: 1e-9,
            eta_tol: 1e-6,
            eta_floor: 1e-6,
            max_iter: 200,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("epsilon", self.epsilon)?;
        ensure_finite("eta_tol", self.eta_tol)?;
        ensure_finite("eta_floor", self.eta_floor)?;
        if self.epsilon <= 0.0 {
            return Err(Error::OutOfRange {
                name: "epsilon",
                value: self.epsilon,
                expected: "> 0",
            });
        }
        if self.eta_tol <= 0.0 {
            return Err(Error::OutOfRange {
                name: "eta_tol",
                value: self.eta_tol,
                expected: "> 0",
            });
        }
        if !(self.eta_floor > 0.0 && self.eta_floor < 0.5) {
            return Err(Error::OutOfRange {
                name: "eta_floor",
                value: self.eta_floor,
                expected: "in (0, 0.5)",
            });
        }
        if self.max_iter == 0 {
            return Err(Error::OutOfRange {
                name: "max_iter",
                value: 0.0,
                expected: ">= 1",
            });
        }
        Ok(())
    }

    fn check_eta(&self, eta: f64) -> Result<()> {
        ensure_finite("eta", eta)?;
        let ceil = 1.0 - self.eta_floor;
        if eta < self.eta_floor || eta > ceil {
            return Err(Error::EtaOutOfRange {
                eta,
                floor: self.eta_floor,
                ceil,
            });
        }
        Ok(())
    }
}

/// Operating point of the joint detector at weight `eta`, which must lie in
/// `[eta_floor, 1 - eta_floor]` of the default optimizer settings.
pub fn objective(joint: &JointDetector, eta: f64) -> Result<JointOperatingPoint> {
    objective_with(joint, eta, &OptimizerConfig::default())
}

/// [`objective`] with an explicit clamp interval.
pub fn objective_with(joint: &JointDetector, eta: f64, config: &OptimizerConfig) -> Result<JointOperatingPoint> {
    config.check_eta(eta)?;
    Ok(point_at(joint, eta))
}

fn point_at(joint: &JointDetector, eta: f64) -> JointOperatingPoint {
    let ln_b = joint.ln_b();
    let m_t = Probability::saturating((eta * ln_b).exp());
    let m_r = Probability::saturating(((1.0 - eta) * ln_b).exp());
    let f_t = joint.tx.p_fa_of_p_md(m_t);
    let f_r = joint.rx.p_fa_of_p_md(m_r);
    JointOperatingPoint {
        eta,
        m_t,
        m_r,
        f_t,
        f_r,
        // m_t * m_r reproduces b up to a rounding step; report the budget
        // itself so the constraint holds exactly.
        p_md: joint.bound,
        p_fa: joint_p_fa(f_t, f_r),
    }
}

/// Derivative of the joint false-alarm rate with respect to `eta`.
pub fn gradient(joint: &JointDetector, eta: f64) -> Result<f64> {
    OptimizerConfig::default().check_eta(eta)?;
    Ok(joint.gradient_at(eta))
}

/// How [`optimize_eta`] terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SearchStatus {
    /// Identical detectors; the even split is optimal.
    Symmetric,
    /// The bisection converged.
    Converged,
    /// The gradient kept one sign over the whole bracket; the better
    /// endpoint was returned.
    BoundarySolution,
    /// The iteration cap was hit; the best point seen was returned.
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaSolution {
    pub point: JointOperatingPoint,
    pub status: SearchStatus,
    pub iterations: u32,
    /// Final search bracket.
    pub bracket: (f64, f64),
}

/// Finds the weight that minimizes the joint false-alarm rate.
///
/// Besides the clamped interval, the limits `eta = 0` and `eta = 1` (one
/// radio alone) are considered, so the result is never worse than the
/// stronger detector on its own.
///
/// When SU-Tx is the stronger detector the optimum sits in `(0.5, 1)`,
/// otherwise in `(0, 0.5)`; the sign of the gradient at 0.5 tells which.
/// Inside that half the objective is unimodal and the search bisects on the
/// sign of the gradient.
pub fn optimize_eta(joint: &JointDetector, config: &OptimizerConfig) -> Result<EtaSolution> {
    config.validate()?;
    let half = point_at(joint, 0.5);
    if joint.is_symmetric() {
        return Ok(EtaSolution {
            point: half,
            status: SearchStatus::Symmetric,
            iterations: 0,
            bracket: (0.5, 0.5),
        });
    }

    // Moving weight toward the stronger detector lowers the objective, so
    // the slope at the even split points into the half holding the optimum.
    let g_half = joint.gradient_at(0.5);
    let tx_stronger = if g_half != 0.0 {
        g_half < 0.0
    } else {
        // The slope underflowed; compare the two ROCs at the even split.
        let root_b = joint.bound.get().sqrt();
        let (ft, fr) = (joint.tx.p_fa_raw(root_b), joint.rx.p_fa_raw(root_b));
        if ft == fr {
            return Ok(EtaSolution {
                point: half,
                status: SearchStatus::Converged,
                iterations: 0,
                bracket: (0.5, 0.5),
            });
        }
        ft < fr
    };
    let (mut lo, mut hi) = if tx_stronger {
        (0.5, 1.0 - config.eta_floor)
    } else {
        (config.eta_floor, 0.5)
    };

    let g_lo = joint.gradient_at(lo);
    let g_hi = joint.gradient_at(hi);
    let mut candidates = vec![half, point_at(joint, lo), point_at(joint, hi)];

    // The minimum is interior only if the slope turns from negative to
    // positive across the bracket.
    if !(g_lo < 0.0 && g_hi > 0.0) {
        let point = if g_lo == 0.0 {
            point_at(joint, lo)
        } else if g_hi == 0.0 {
            point_at(joint, hi)
        } else {
            candidates.push(single_radio_limit(joint, tx_stronger));
            best_of(&candidates)
        };
        let status = if g_lo == 0.0 || g_hi == 0.0 {
            SearchStatus::Converged
        } else {
            SearchStatus::BoundarySolution
        };
        return Ok(EtaSolution {
            point,
            status,
            iterations: 0,
            bracket: (lo, hi),
        });
    }

    let mut p_lo = candidates[1].p_fa.get();
    let mut p_hi = candidates[2].p_fa.get();
    let mut status = SearchStatus::MaxIterations;
    let mut iterations = 0;
    while iterations < config.max_iter {
        if hi - lo <= config.eta_tol || (p_lo - p_hi).abs() <= config.epsilon * p_lo.max(p_hi) {
            status = SearchStatus::Converged;
            break;
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let g = joint.gradient_at(mid);
        if g == 0.0 {
            lo = mid;
            hi = mid;
            status = SearchStatus::Converged;
            break;
        }
        let p_mid = joint.p_fa_at(mid);
        if g < 0.0 {
            lo = mid;
            p_lo = p_mid;
        } else {
            hi = mid;
            p_hi = p_mid;
        }
    }
    if status == SearchStatus::MaxIterations
        && (hi - lo <= config.eta_tol || (p_lo - p_hi).abs() <= config.epsilon * p_lo.max(p_hi))
    {
        status = SearchStatus::Converged;
    }

    candidates.push(point_at(joint, 0.5 * (lo + hi)));
    candidates.push(point_at(joint, lo));
    candidates.push(point_at(joint, hi));
    let best = best_of(&candidates);
    let limit = single_radio_limit(joint, tx_stronger);
    if limit.p_fa < best.p_fa {
        return Ok(EtaSolution {
            point: limit,
            status: SearchStatus::BoundarySolution,
            iterations,
            bracket: (lo, hi),
        });
    }
    Ok(EtaSolution {
        point: best,
        status,
        iterations,
        bracket: (lo, hi),
    })
}

/// The `eta -> 1` (or `eta -> 0`) limit: one radio carries the whole miss
/// budget and the other never reports busy.
fn single_radio_limit(joint: &JointDetector, tx_alone: bool) -> JointOperatingPoint {
    let alone = |roc: &RocConstants| roc.p_fa_of_p_md(joint.bound);
    let (eta, m_t, m_r, f_t, f_r) = if tx_alone {
        (1.0, joint.bound, Probability::ONE, alone(&joint.tx), Probability::ZERO)
    } else {
        (0.0, Probability::ONE, joint.bound, Probability::ZERO, alone(&joint.rx))
    };
    JointOperatingPoint {
        eta,
        m_t,
        m_r,
        f_t,
        f_r,
        p_md: joint.bound,
        p_fa: joint_p_fa(f_t, f_r),
    }
}

/// Lowest false-alarm rate; ties go to the earliest candidate.
fn best_of(candidates: &[JointOperatingPoint]) -> JointOperatingPoint {
    *candidates
        .iter()
        .reduce(|best, c| if c.p_fa < best.p_fa { c } else { best })
        .expect("non-empty candidate list")
}
