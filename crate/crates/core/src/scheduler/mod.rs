//! Integrated feedback scheduling.
//!
//! Every invocation the scheduler turns the measured deadline miss ratio
//! into a total utilization command (PI with a deadzone), splits the free
//! bandwidth among loops in proportion to their instantaneous control error,
//! and re-ranks loop priorities so the worst-performing loops win
//! arbitration, with a hysteresis threshold to avoid needless switches.

mod priority;

pub use priority::modify_priorities;

use serde::{Deserialize, Serialize};

use crate::bus::PriorityLevel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Integrated feedback scheduling.
    Ifs,
    /// Fixed periods and priorities.
    NonFs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerParams {
    /// Invocation interval (s).
    pub t_fs: f64,
    /// Miss-ratio setpoint.
    pub rho_r: f64,
    pub k_p: f64,
    pub k_i: f64,
    /// Longest allowed sampling period (s).
    pub h_max: f64,
    /// Shortest allowed period (s); `None` means each loop's transmission time.
    pub h_min: Option<f64>,
    /// Below this total weighted cost the free bandwidth is split evenly.
    pub epsilon: f64,
    /// Priority switch threshold.
    pub delta: f64,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        SchedulerParams {
            t_fs: 0.5,
            rho_r: 0.05,
            k_p: 0.3,
            k_i: 0.8,
            h_max: 0.02,
            h_min: None,
            epsilon: 0.2,
            delta: 0.2,
        }
    }
}

impl SchedulerParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("scheduler.{field}"), msg))
            }
        };
        check(
            self.t_fs.is_finite() && self.t_fs > 0.0,
            "t_fs",
            "must be positive",
        )?;
        check(
            self.rho_r > 0.0 && self.rho_r < 1.0,
            "rho_r",
            "must lie in (0, 1)",
        )?;
        check(self.k_p.is_finite(), "k_p", "must be finite")?;
        check(self.k_i.is_finite(), "k_i", "must be finite")?;
        check(
            self.h_max.is_finite() && self.h_max > 0.0,
            "h_max",
            "must be positive",
        )?;
        if let Some(h_min) = self.h_min {
            check(
                h_min.is_finite() && h_min > 0.0 && h_min <= self.h_max,
                "h_min",
                "must satisfy 0 < h_min <= h_max",
            )?;
        }
        check(self.epsilon >= 0.0, "epsilon", "must be non-negative")?;
        check(self.delta >= 0.0, "delta", "must be non-negative")?;
        Ok(())
    }
}

/// Per-loop quantities the allocator needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopBudget {
    /// Transmission time (s).
    pub c: f64,
    pub h_min: f64,
    pub w: f64,
}

/// Deadzone error of the miss ratio.
pub fn compute_err(rho: f64, rho_r: f64) -> f64 {
    if rho == 0.0 {
        rho_r
    } else if rho <= rho_r {
        0.0
    } else {
        -rho
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    /// Total utilization command.
    pub u: f64,
    pub err_prev: f64,
    pub h: Vec<f64>,
    pub prio: Vec<PriorityLevel>,
    pub j: Vec<f64>,
    pub jp: Vec<f64>,
}

/// Incremental PI step on the utilization command, clamped to
/// `[u_floor, 1]`. The clamped excess is discarded; `err_prev` always
/// advances.
pub fn update_utilization(
    state: &mut SchedulerState,
    err: f64,
    params: &SchedulerParams,
    u_floor: f64,
) -> f64 {
    let delta_u = params.k_p * (err - state.err_prev) + params.k_i * err;
    state.u = (state.u + delta_u).clamp(u_floor, 1.0);
    state.err_prev = err;
    state.u
}

/// `J_i = |e_i|`, `J'_i = w_i J_i`.
pub fn loop_costs(errors: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let j: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    let jp = j.iter().zip(w).map(|(j, w)| j * w).collect();
    (j, jp)
}

/// Sum of per-loop minimum utilizations `c_i / h_max`.
pub fn utilization_floor(loops: &[LoopBudget], h_max: f64) -> f64 {
    loops.iter().map(|l| l.c / h_max).sum()
}

/// Splits utilization `u` into sampling periods.
///
/// Each loop keeps `c_i / h_max`; the rest goes out in proportion to
/// `w_i J_i`, or evenly when the total weighted cost is below `epsilon`.
/// Results are clamped to `[h_min, h_max]`.
pub fn allocate_periods(
    u: f64,
    j: &[f64],
    loops: &[LoopBudget],
    params: &SchedulerParams,
) -> Result<Vec<f64>> {
    let h_max = params.h_max;
    let floor = utilization_floor(loops, h_max);
    if u < floor {
        return Err(Error::UtilizationBelowFloor { u, floor });
    }
    let free = u - floor;
    let n = loops.len();
    let total_cost: f64 = loops.iter().zip(j).map(|(l, j)| l.w * j).sum();
    let even = total_cost < params.epsilon || total_cost == 0.0;

    let periods = loops
        .iter()
        .zip(j)
        .map(|(l, &j_i)| {
            let extra = if even {
                free / n as f64
            } else {
                free * (l.w * j_i / total_cost)
            };
            // A loop with no extra share sits exactly at h_max.
            let h = if extra == 0.0 {
                h_max
            } else {
                l.c / (l.c / h_max + extra)
            };
            h.clamp(l.h_min, h_max)
        })
        .collect();
    Ok(periods)
}

/// Output of one scheduler invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerDecision {
    pub err: f64,
    pub u: f64,
    pub h: Vec<f64>,
    pub prio: Vec<PriorityLevel>,
    pub j: Vec<f64>,
    pub jp: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FeedbackScheduler {
    params: SchedulerParams,
    loops: Vec<LoopBudget>,
    u_floor: f64,
    state: SchedulerState,
}

impl FeedbackScheduler {
    /// Starts from the configured operating point; the utilization command
    /// is the initial requested utilization clamped to `[u_floor, 1]`.
    pub fn new(
        params: SchedulerParams,
        loops: Vec<LoopBudget>,
        initial_h: Vec<f64>,
        initial_prio: Vec<PriorityLevel>,
    ) -> Self {
        let u_floor = utilization_floor(&loops, params.h_max);
        let requested: f64 = loops.iter().zip(&initial_h).map(|(l, h)| l.c / h).sum();
        let n = loops.len();
        FeedbackScheduler {
            u_floor,
            state: SchedulerState {
                u: requested.clamp(u_floor, 1.0),
                err_prev: 0.0,
                h: initial_h,
                prio: initial_prio,
                j: vec![0.0; n],
                jp: vec![0.0; n],
            },
            params,
            loops,
        }
    }

    pub fn state(&self) -> &SchedulerState {
        &self.state
    }

    pub fn params(&self) -> &SchedulerParams {
        &self.params
    }

    pub fn u_floor(&self) -> f64 {
        self.u_floor
    }

    /// One invocation: miss ratio and per-loop control errors in, new
    /// periods and priorities out.
    pub fn invoke(&mut self, rho: f64, errors: &[f64]) -> Result<SchedulerDecision> {
        if errors.len() != self.loops.len() {
            return Err(Error::Internal(format!(
                "scheduler got {} errors for {} loops",
                errors.len(),
                self.loops.len()
            )));
        }
        let err = compute_err(rho, self.params.rho_r);
        let u = update_utilization(&mut self.state, err, &self.params, self.u_floor);

        let w: Vec<f64> = self.loops.iter().map(|l| l.w).collect();
        let (j, jp) = loop_costs(errors, &w);
        let h = allocate_periods(u, &j, &self.loops, &self.params)?;
        let prio = modify_priorities(&jp, &self.state.prio, self.params.delta);

        self.state.h = h.clone();
        self.state.prio = prio.clone();
        self.state.j = j.clone();
        self.state.jp = jp.clone();
        Ok(SchedulerDecision {
            err,
            u,
            h,
            prio,
            j,
            jp,
        })
    }
}
