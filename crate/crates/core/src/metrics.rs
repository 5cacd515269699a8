//! Schedulability analysis and run-time measurements: per-window deadline
//! miss ratio, per-loop IAE and the requested-utilization trace.

use crate::time::SimTime;

/// One periodic message stream: transmission time `c` and period `h`, in
/// seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub c: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskSetSpec {
    pub tasks: Vec<Task>,
}

impl TaskSetSpec {
    pub fn new(tasks: impl IntoIterator<Item = Task>) -> Self {
        TaskSetSpec {
            tasks: tasks.into_iter().collect(),
        }
    }
}

/// Sufficient rate-monotonic test for non-preemptive transmission with
/// one-frame blocking. `false` does not prove the set unschedulable.
pub fn rm_schedulable(spec: &TaskSetSpec) -> bool {
    // RM order: shorter period first, ties by index.
    let mut order: Vec<usize> = (0..spec.tasks.len()).collect();
    order.sort_by(|&a, &b| spec.tasks[a].h.total_cmp(&spec.tasks[b].h).then(a.cmp(&b)));
    let sorted: Vec<Task> = order.iter().map(|&i| spec.tasks[i]).collect();

    let mut load = 0.0;
    for (idx, task) in sorted.iter().enumerate() {
        let i = (idx + 1) as f64;
        load += task.c / task.h;
        let blocking = sorted[idx + 1..].iter().map(|t| t.c).fold(0.0, f64::max);
        let bound = i * (2f64.powf(1.0 / i) - 1.0);
        if load + blocking / task.h > bound {
            return false;
        }
    }
    true
}

/// `sum_i c_i / h_i`.
pub fn requested_utilization(h: &[f64], c: &[f64]) -> f64 {
    h.iter().zip(c).map(|(h, c)| c / h).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Met,
    Missed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WindowCount {
    pub resolved: u64,
    pub missed: u64,
}

impl WindowCount {
    /// Miss ratio, with an empty window counting as zero.
    pub fn rho(&self) -> f64 {
        if self.resolved == 0 {
            0.0
        } else {
            self.missed as f64 / self.resolved as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoopMetrics {
    pub iae: f64,
    last_abs_err: Option<f64>,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub late: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    window: SimTime,
    /// Index `j - 1` holds window `((j-1) T, j T]`.
    windows: Vec<WindowCount>,
    pub loops: Vec<LoopMetrics>,
    /// Step trace of requested utilization: value holds from its time on.
    utilization: Vec<(SimTime, f64)>,
}

impl MetricsRecord {
    pub fn new(n_loops: usize, window: SimTime) -> Self {
        assert!(window.as_nanos() > 0, "window length must be positive");
        MetricsRecord {
            window,
            windows: Vec::new(),
            loops: vec![LoopMetrics::default(); n_loops],
            utilization: Vec::new(),
        }
    }

    /// 1-based index of the window `((j-1) T, j T]` that contains `t`.
    pub fn window_index(&self, t: SimTime) -> usize {
        let w = self.window.as_nanos();
        (t.as_nanos().div_ceil(w)).max(1) as usize
    }

    /// Counts a resolved packet in the window holding its deadline.
    pub fn record_outcome(&mut self, outcome: Outcome, deadline: SimTime) {
        let j = self.window_index(deadline);
        if self.windows.len() < j {
            self.windows.resize(j, WindowCount::default());
        }
        let w = &mut self.windows[j - 1];
        w.resolved += 1;
        if outcome == Outcome::Missed {
            w.missed += 1;
        }
    }

    pub fn window_count(&self, j: usize) -> WindowCount {
        j.checked_sub(1)
            .and_then(|i| self.windows.get(i))
            .copied()
            .unwrap_or_default()
    }

    pub fn window_rho(&self, j: usize) -> f64 {
        self.window_count(j).rho()
    }

    /// Pooled miss ratio over windows `1..=last`.
    pub fn pooled_rho(&self, last: usize) -> f64 {
        let total = self
            .windows
            .iter()
            .take(last)
            .fold(WindowCount::default(), |acc, w| WindowCount {
                resolved: acc.resolved + w.resolved,
                missed: acc.missed + w.missed,
            });
        total.rho()
    }

    /// Trapezoidal IAE increment. The first call only records `e_abs`.
    pub fn iae_step(&mut self, loop_id: usize, e_abs: f64, dt: f64) {
        let m = &mut self.loops[loop_id];
        if let Some(prev) = m.last_abs_err {
            m.iae += 0.5 * (prev + e_abs) * dt;
        }
        m.last_abs_err = Some(e_abs);
    }

    pub fn push_utilization(&mut self, t: SimTime, value: f64) {
        match self.utilization.last_mut() {
            Some(last) if last.0 == t => last.1 = value,
            _ => self.utilization.push((t, value)),
        }
    }

    pub fn utilization_trace(&self) -> &[(SimTime, f64)] {
        &self.utilization
    }

    /// Pieces of the utilization step function overlapping `[from, to)`.
    fn utilization_pieces(&self, from: SimTime, to: SimTime) -> Vec<(SimTime, SimTime, f64)> {
        let mut pieces = Vec::new();
        for (i, &(start, value)) in self.utilization.iter().enumerate() {
            let end = self.utilization.get(i + 1).map(|p| p.0).unwrap_or(to);
            let (a, b) = (start.max(from), end.min(to));
            if a < b {
                pieces.push((a, b, value));
            }
        }
        pieces
    }

    /// Time average of requested utilization over `[from, to)`.
    pub fn mean_utilization(&self, from: SimTime, to: SimTime) -> f64 {
        let span = to.saturating_sub(from).as_nanos();
        if span == 0 {
            return self.utilization.last().map(|p| p.1).unwrap_or(0.0);
        }
        let weighted: f64 = self
            .utilization_pieces(from, to)
            .iter()
            .map(|(a, b, v)| (*b - *a).as_nanos() as f64 * v)
            .sum();
        weighted / span as f64
    }

    /// Minimum and maximum requested utilization on `[from, to)`.
    pub fn utilization_range(&self, from: SimTime, to: SimTime) -> Option<(f64, f64)> {
        let pieces = self.utilization_pieces(from, to);
        let min = pieces.iter().map(|p| p.2).reduce(f64::min)?;
        let max = pieces.iter().map(|p| p.2).reduce(f64::max)?;
        Some((min, max))
    }
}
