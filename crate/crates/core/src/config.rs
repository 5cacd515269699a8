//! Scenario configuration: JSON document format, validation and the two
//! built-in presets.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::bus::PriorityLevel;
use crate::error::{Error, Result};
use crate::metrics::{Task, TaskSetSpec};
use crate::plant::{PlantModel, Pole};
use crate::scheduler::{LoopBudget, Mode, SchedulerParams};
use crate::time::SimTime;

fn default_mode() -> Mode {
    Mode::Ifs
}
fn default_duration() -> f64 {
    10.0
}
fn default_log_grid() -> f64 {
    1e-4
}
fn default_packet_bytes() -> u32 {
    10
}
fn default_poles() -> [[f64; 2]; 2] {
    [[0.8, 0.3], [0.8, -0.3]]
}
fn default_weight() -> f64 {
    1.0
}
fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Bus data rate in bits per second.
    pub data_rate: f64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub scheduler: SchedulerParams,
    /// Simulated time span in seconds.
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// State logging and IAE integration step in seconds.
    #[serde(default = "default_log_grid")]
    pub log_grid: f64,
    pub loops: Vec<LoopConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    #[serde(default = "default_packet_bytes")]
    pub packet_bytes: u32,
    #[serde(default)]
    pub plant: PlantConfig,
    /// Desired closed-loop poles as `[re, im]` pairs.
    #[serde(default = "default_poles")]
    pub poles: [[f64; 2]; 2],
    pub h_initial: f64,
    /// Arbitration level; greater wins.
    pub priority: u32,
    pub reference: ReferenceConfig,
    #[serde(default = "default_weight")]
    pub w: f64,
    /// Initial plant state; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            a: vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
            b: vec![1.0, 0.0],
            c: vec![0.0, 1.0],
        }
    }
}

impl PlantConfig {
    pub fn to_model(&self) -> std::result::Result<PlantModel, String> {
        let n = self.a.len();
        if self.a.iter().any(|row| row.len() != n) {
            return Err(format!("`a` must be a square {n}x{n} matrix"));
        }
        let flat: Vec<f64> = self.a.iter().flatten().copied().collect();
        PlantModel::new(
            DMatrix::from_row_slice(n, n, &flat),
            DVector::from_column_slice(&self.b),
            RowDVector::from_row_slice(&self.c),
        )
        .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Square-wave period in seconds.
    pub period: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

impl LoopConfig {
    pub fn poles(&self) -> [Pole; 2] {
        self.poles.map(|[re, im]| Pole::new(re, im))
    }

    pub fn initial_state(&self, n: usize) -> DVector<f64> {
        match &self.x0 {
            Some(x) => DVector::from_column_slice(x),
            None => DVector::zeros(n),
        }
    }
}

impl ScenarioConfig {
    /// Transmission time of loop `i`, exact to the nanosecond.
    pub fn tx_time(&self, i: usize) -> SimTime {
        let bits = self.loops[i].packet_bytes as f64 * 8.0;
        SimTime::from_nanos((bits * 1e9 / self.data_rate).round() as u64)
    }

    /// Transmission time of loop `i` in seconds.
    pub fn c(&self, i: usize) -> f64 {
        self.tx_time(i).as_secs_f64()
    }

    pub fn h_min(&self, i: usize) -> f64 {
        self.scheduler.h_min.unwrap_or_else(|| self.c(i))
    }

    pub fn loop_budgets(&self) -> Vec<LoopBudget> {
        (0..self.loops.len())
            .map(|i| LoopBudget {
                c: self.c(i),
                h_min: self.h_min(i),
                w: self.loops[i].w,
            })
            .collect()
    }

    pub fn initial_priorities(&self) -> Vec<PriorityLevel> {
        self.loops
            .iter()
            .map(|l| PriorityLevel(l.priority))
            .collect()
    }

    pub fn task_set(&self) -> TaskSetSpec {
        TaskSetSpec::new((0..self.loops.len()).map(|i| Task {
            c: self.c(i),
            h: self.loops[i].h_initial,
        }))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.data_rate) {
            return Err(Error::config("data_rate", "must be positive"));
        }
        if !positive(self.duration) {
            return Err(Error::config("duration", "must be positive"));
        }
        if !positive(self.log_grid) || SimTime::from_secs_f64(self.log_grid) == Some(SimTime::ZERO)
        {
            return Err(Error::config("log_grid", "must be at least 1 ns"));
        }
        if SimTime::from_secs_f64(self.duration).is_none() {
            return Err(Error::config("duration", "out of range"));
        }
        self.scheduler.validate()?;

        let n = self.loops.len();
        let mut seen = vec![false; n];
        for (i, l) in self.loops.iter().enumerate() {
            let path = |field: &str| format!("loops[{i}].{field}");
            if l.packet_bytes == 0 {
                return Err(Error::config(path("packet_bytes"), "must be positive"));
            }
            let model = l
                .plant
                .to_model()
                .map_err(|m| Error::config(path("plant"), m))?;
            if model.order() != 2 {
                return Err(Error::config(
                    path("plant"),
                    "pole placement supports second-order plants only",
                ));
            }
            if l.poles.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::config(path("poles"), "must be finite"));
            }
            let p = l.poles();
            let conj = (p[0] - p[1].conj()).norm() <= 1e-12;
            let real = p[0].im == 0.0 && p[1].im == 0.0;
            if !(conj || real) {
                return Err(Error::config(
                    path("poles"),
                    "must be real or a complex-conjugate pair",
                ));
            }
            let c = self.c(i);
            if c <= 0.0 {
                return Err(Error::config(
                    path("packet_bytes"),
                    "transmission time rounds to zero",
                ));
            }
            let h_min = self.h_min(i);
            if !(l.h_initial.is_finite()
                && l.h_initial >= h_min
                && l.h_initial <= self.scheduler.h_max)
            {
                return Err(Error::config(
                    path("h_initial"),
                    format!("must lie in [{h_min}, {}]", self.scheduler.h_max),
                ));
            }
            if !positive(l.reference.period)
                || SimTime::from_secs_f64(l.reference.period) == Some(SimTime::ZERO)
            {
                return Err(Error::config(path("reference.period"), "must be positive"));
            }
            if !l.reference.amplitude.is_finite() {
                return Err(Error::config(path("reference.amplitude"), "must be finite"));
            }
            if !(l.w.is_finite() && l.w >= 0.0) {
                return Err(Error::config(path("w"), "must be finite and non-negative"));
            }
            if let Some(x0) = &l.x0 {
                if x0.len() != model.order() || x0.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config(
                        path("x0"),
                        format!("must hold {} finite values", model.order()),
                    ));
                }
            }
            let level = l.priority as usize;
            if level == 0 || level > n || seen[level - 1] {
                return Err(Error::config(
                    path("priority"),
                    format!("priorities must be a permutation of 1..={n}"),
                ));
            }
            seen[level - 1] = true;
        }

        let floor: f64 = (0..n).map(|i| self.c(i) / self.scheduler.h_max).sum();
        if floor > 1.0 {
            return Err(Error::config(
                "scheduler.h_max",
                format!("loops need utilization {floor:.3} even at h_max"),
            ));
        }
        Ok(())
    }
}

/// Parses and validates a JSON scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
        Error::config(
            format!("<document> line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn to_json(cfg: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

pub const PRESET_NAMES: [&str; 2] = ["scenario-1", "scenario-2"];

fn preset_loop(h_initial: f64, priority: u32, ref_period: f64) -> LoopConfig {
    LoopConfig {
        packet_bytes: 10,
        plant: PlantConfig::default(),
        poles: default_poles(),
        h_initial,
        priority,
        reference: ReferenceConfig {
            period: ref_period,
            amplitude: 1.0,
        },
        w: 1.0,
        x0: None,
    }
}

/// Built-in scenarios: an underloaded two-loop bus and an overloaded
/// four-loop bus, both at 25 kb/s with 10-byte samples.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let loops = match name {
        "scenario-1" => vec![preset_loop(0.010, 2, 4.0), preset_loop(0.012, 1, 2.0)],
        "scenario-2" => vec![
            preset_loop(0.010, 4, 4.0),
            preset_loop(0.010, 3, 4.0),
            preset_loop(0.012, 2, 2.0),
            preset_loop(0.012, 1, 2.0),
        ],
        other => {
            return Err(Error::config(
                "preset",
                format!("unknown preset `{other}` (expected one of {PRESET_NAMES:?})"),
            ))
        }
    };
    Ok(ScenarioConfig {
        data_rate: 25_000.0,
        mode: Mode::Ifs,
        scheduler: SchedulerParams::default(),
        duration: default_duration(),
        log_grid: default_log_grid(),
        loops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{requested_utilization, rm_schedulable};

    const MINIMAL: &str = r#"{
        "data_rate": 25000,
        "loops": [
            {"h_initial": 0.01, "priority": 1, "reference": {"period": 4}, "packet_bytes": 10}
        ]
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = parse_scenario(MINIMAL).unwrap();
        assert_eq!(cfg.tx_time(0).as_nanos(), 3_200_000);
        assert_eq!(cfg.loops[0].poles, [[0.8, 0.3], [0.8, -0.3]]);
        assert_eq!(cfg.loops[0].reference.amplitude, 1.0);
        assert_eq!(cfg.mode, Mode::Ifs);
        assert_eq!(cfg.scheduler, SchedulerParams::default());
        assert_eq!(cfg.duration, 10.0);
    }

    #[test]
    fn duplicate_priorities_rejected() {
        let mut cfg = preset("scenario-1").unwrap();
        cfg.loops[1].priority = 2;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("loops[1].priority"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("\"data_rate\"", "\"bogus\": 1, \"data_rate\"");
        assert!(matches!(parse_scenario(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn h_initial_outside_bounds_rejected() {
        let mut cfg = preset("scenario-1").unwrap();
        cfg.loops[0].h_initial = 0.03;
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("h_initial"));
        cfg.loops[0].h_initial = 0.001;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn presets() {
        let one = preset("scenario-1").unwrap();
        one.validate().unwrap();
        let c: Vec<f64> = (0..2).map(|i| one.c(i)).collect();
        let h: Vec<f64> = one.loops.iter().map(|l| l.h_initial).collect();
        assert!((requested_utilization(&h, &c) - 0.587).abs() < 5e-4);
        assert!(rm_schedulable(&one.task_set()));

        let two = preset("scenario-2").unwrap();
        two.validate().unwrap();
        let c: Vec<f64> = (0..4).map(|i| two.c(i)).collect();
        let h: Vec<f64> = two.loops.iter().map(|l| l.h_initial).collect();
        assert!((requested_utilization(&h, &c) - 1.174).abs() < 1e-3);
        assert!(!rm_schedulable(&two.task_set()));
        let levels: Vec<u32> = two.loops.iter().map(|l| l.priority).collect();
        assert_eq!(levels, vec![4, 3, 2, 1]);

        assert!(preset("scenario-3").is_err());
    }

    #[test]
    fn round_trip() {
        for name in PRESET_NAMES {
            let mut cfg = preset(name).unwrap();
            cfg.loops[0].x0 = Some(vec![0.5, -0.25]);
            cfg.scheduler.h_min = Some(0.004);
            assert_eq!(parse_scenario(&to_json(&cfg)).unwrap(), cfg);
        }
    }
}
