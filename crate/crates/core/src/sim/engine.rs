//! Wires sensors (time triggered), the bus, controllers and actuators (event
//! triggered) and the periodic feedback scheduler into one run.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;

use super::calendar::{Event, EventCalendar, EventId, EventKind};
use crate::bus::{Bus, MissKind, PacketId, PacketState, PriorityLevel, SamplePacket};
use crate::config::ScenarioConfig;
use crate::error::{DesignError, Error, Result};
use crate::metrics::{requested_utilization, MetricsRecord, Outcome};
use crate::plant::{
    control_output, design_controller, ControllerGains, Pole, SquareWave, ZohPropagator,
};
use crate::scheduler::{FeedbackScheduler, Mode};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct LoopLog {
    pub r: f64,
    pub y: f64,
    pub u: f64,
    pub h: SimTime,
    pub priority: PriorityLevel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub time: SimTime,
    pub loops: Vec<LoopLog>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerRow {
    pub time: SimTime,
    pub miss_ratio: f64,
    pub err: f64,
    pub u_total: f64,
    pub j: Vec<f64>,
    pub jp: Vec<f64>,
    /// Assigned periods in seconds (after rounding to the clock).
    pub h: Vec<f64>,
    pub prio: Vec<PriorityLevel>,
}

/// One finished transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxRecord {
    pub loop_id: usize,
    pub priority: PriorityLevel,
    pub release: SimTime,
    pub start: SimTime,
    pub end: SimTime,
    pub deadline: SimTime,
    pub state: PacketState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub metrics: MetricsRecord,
    /// Time-average requested utilization over the second half of the run.
    pub mean_utilization_final_half: f64,
    /// Pooled miss ratio over all complete windows.
    pub run_miss_ratio: f64,
    /// Miss ratio of the last complete window.
    pub final_window_miss_ratio: f64,
    pub complete_windows: usize,
    /// Bus busy time over the run divided by its length.
    pub bus_busy_fraction: f64,
    /// Packets still queued or on the wire at the end, per loop.
    pub in_flight: Vec<u64>,
}

impl Summary {
    pub fn total_iae(&self) -> f64 {
        self.metrics.loops.iter().map(|l| l.iae).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub n_loops: usize,
    pub duration: SimTime,
    pub timeseries: Vec<LogRow>,
    pub scheduler_trace: Vec<SchedulerRow>,
    pub summary: Summary,
    pub transmissions: Vec<TxRecord>,
    /// Every `(loop, period)` a controller was designed for.
    pub designed_periods: Vec<(usize, SimTime)>,
    pub events_processed: u64,
}

struct LoopRuntime {
    propagator: ZohPropagator,
    poles: [Pole; 2],
    wave: SquareWave,
    tx_time: SimTime,
    h_min: SimTime,
    x: DVector<f64>,
    u: f64,
    r: f64,
    h: SimTime,
    priority: PriorityLevel,
    gains: ControllerGains,
    gains_cache: BTreeMap<SimTime, ControllerGains>,
    /// `r - y` at the most recently delivered sample.
    e_last: f64,
    last_sample: SimTime,
    next_sample: Option<EventId>,
}

impl LoopRuntime {
    fn output(&self) -> f64 {
        self.propagator.model().output(&self.x)
    }

    fn gains_for(&mut self, h: SimTime) -> std::result::Result<ControllerGains, DesignError> {
        if let Some(g) = self.gains_cache.get(&h) {
            return Ok(g.clone());
        }
        let g = design_controller(self.propagator.model(), self.poles, h.as_secs_f64())?;
        self.gains_cache.insert(h, g.clone());
        Ok(g)
    }
}

struct InFlight {
    start: SimTime,
}

struct Simulation {
    mode: Mode,
    duration: SimTime,
    log_grid: SimTime,
    t_fs: SimTime,
    h_max: SimTime,
    cal: EventCalendar,
    bus: Bus,
    loops: Vec<LoopRuntime>,
    metrics: MetricsRecord,
    scheduler: FeedbackScheduler,
    advanced_to: SimTime,
    last_log: Option<SimTime>,
    next_packet: u64,
    on_wire: BTreeMap<PacketId, InFlight>,
    timeseries: Vec<LogRow>,
    scheduler_trace: Vec<SchedulerRow>,
    transmissions: Vec<TxRecord>,
    designed: BTreeSet<(usize, SimTime)>,
    events_processed: u64,
}

fn secs(v: f64) -> SimTime {
    SimTime::from_secs_f64(v).expect("validated time value")
}

/// Simulates `[0, duration]` for a validated scenario.
pub fn run(config: &ScenarioConfig) -> Result<SimulationResult> {
    config.validate()?;
    let mut sim = Simulation::new(config)?;
    sim.prime()?;
    sim.run_loop()?;
    Ok(sim.finish())
}

impl Simulation {
    fn new(config: &ScenarioConfig) -> Result<Self> {
        let n = config.loops.len();
        let h_max = SimTime::from_secs_f64(config.scheduler.h_max).expect("validated h_max");
        let mut loops = Vec::with_capacity(n);
        let mut designed = BTreeSet::new();
        for (i, lc) in config.loops.iter().enumerate() {
            let model = lc
                .plant
                .to_model()
                .map_err(|m| Error::config(format!("loops[{i}].plant"), m))?;
            let h = secs(lc.h_initial);
            let x = lc.initial_state(model.order());
            let wave = SquareWave::new(secs(lc.reference.period), lc.reference.amplitude);
            let r = wave.value_at(SimTime::ZERO);
            let e_last = r - model.output(&x);
            let mut rt = LoopRuntime {
                propagator: ZohPropagator::new(model),
                poles: lc.poles(),
                wave,
                tx_time: config.tx_time(i),
                h_min: SimTime::from_secs_f64_ceil(config.h_min(i)).expect("validated h_min"),
                x,
                u: 0.0,
                r,
                h,
                priority: PriorityLevel(lc.priority),
                gains: placeholder_gains(),
                gains_cache: BTreeMap::new(),
                e_last,
                last_sample: SimTime::ZERO,
                next_sample: None,
            };
            rt.gains = rt
                .gains_for(h)
                .map_err(|source| Error::Design { loop_id: i, source })?;
            designed.insert((i, h));
            loops.push(rt);
        }

        let scheduler = FeedbackScheduler::new(
            config.scheduler.clone(),
            config.loop_budgets(),
            loops.iter().map(|l| l.h.as_secs_f64()).collect(),
            config.initial_priorities(),
        );
        let t_fs = secs(config.scheduler.t_fs);

        Ok(Simulation {
            mode: config.mode,
            duration: secs(config.duration),
            log_grid: secs(config.log_grid),
            t_fs,
            h_max,
            cal: EventCalendar::new(),
            bus: Bus::new(),
            metrics: MetricsRecord::new(n, t_fs),
            loops,
            scheduler,
            advanced_to: SimTime::ZERO,
            last_log: None,
            next_packet: 0,
            on_wire: BTreeMap::new(),
            timeseries: Vec::new(),
            scheduler_trace: Vec::new(),
            transmissions: Vec::new(),
            designed,
            events_processed: 0,
        })
    }

    fn schedule_if_in_run(&mut self, time: SimTime, kind: EventKind) -> Result<Option<EventId>> {
        if time > self.duration {
            return Ok(None);
        }
        self.cal.schedule(Event::new(time, kind)).map(Some)
    }

    fn prime(&mut self) -> Result<()> {
        for i in 0..self.loops.len() {
            let id = self.schedule_if_in_run(SimTime::ZERO, EventKind::SensorSample(i))?;
            self.loops[i].next_sample = id;
            let toggle = self.loops[i].wave.next_toggle_after(SimTime::ZERO);
            self.schedule_if_in_run(toggle, EventKind::ReferenceToggle(i))?;
        }
        if self.mode == Mode::Ifs {
            self.schedule_if_in_run(self.t_fs, EventKind::SchedulerInvoke)?;
        }
        self.schedule_if_in_run(SimTime::ZERO, EventKind::LogTick)?;
        self.push_utilization(SimTime::ZERO);
        Ok(())
    }

    fn push_utilization(&mut self, t: SimTime) {
        let h: Vec<f64> = self.loops.iter().map(|l| l.h.as_secs_f64()).collect();
        let c: Vec<f64> = self.loops.iter().map(|l| l.tx_time.as_secs_f64()).collect();
        self.metrics
            .push_utilization(t, requested_utilization(&h, &c));
    }

    fn run_loop(&mut self) -> Result<()> {
        while let Some(next) = self.cal.peek() {
            if next.time > self.duration {
                break;
            }
            let event = self.cal.pop_next().expect("peeked event");
            self.events_processed += 1;
            self.advance_plants(event.time)?;
            match event.kind {
                EventKind::TransmissionComplete(id) => self.on_complete(event.time, id)?,
                EventKind::SensorSample(i) => self.on_sample(event.time, i)?,
                EventKind::SchedulerInvoke => self.on_invoke(event.time)?,
                EventKind::ReferenceToggle(i) => self.on_toggle(event.time, i)?,
                EventKind::LogTick => self.on_log(event.time)?,
            }
            if matches!(
                event.kind,
                EventKind::TransmissionComplete(_) | EventKind::SensorSample(_)
            ) && !self.more_releases_at(event.time)
            {
                self.arbitrate(event.time)?;
            }
            if self.bus.work_conservation_violated() && !self.more_releases_at(event.time) {
                return Err(Error::Internal(format!(
                    "bus idle with pending packets at {:?}",
                    event.time
                )));
            }
        }
        Ok(())
    }

    /// Whether further completions or releases are due at `t`; arbitration
    /// waits for all of them.
    fn more_releases_at(&mut self, t: SimTime) -> bool {
        matches!(
            self.cal.peek(),
            Some(Event { time, kind: EventKind::TransmissionComplete(_) | EventKind::SensorSample(_) })
                if time == t
        )
    }

    fn advance_plants(&mut self, t: SimTime) -> Result<()> {
        let dt = t - self.advanced_to;
        if dt == SimTime::ZERO {
            return Ok(());
        }
        for (i, l) in self.loops.iter_mut().enumerate() {
            l.x = l
                .propagator
                .advance(&l.x, l.u, dt)
                .map_err(|_| Error::NumericalBlowUp {
                    loop_id: i,
                    time_s: t.as_secs_f64(),
                })?;
        }
        self.advanced_to = t;
        Ok(())
    }

    fn record_miss(&mut self, miss: &MissKind) {
        self.metrics
            .record_outcome(Outcome::Missed, miss.deadline());
        let m = &mut self.metrics.loops[miss.loop_id()];
        match miss {
            MissKind::Dropped(_) => m.dropped += 1,
            MissKind::Late { .. } => m.late += 1,
        }
    }

    fn expire(&mut self, t: SimTime) {
        for miss in self.bus.expire(t) {
            self.record_miss(&miss);
        }
    }

    fn arbitrate(&mut self, t: SimTime) -> Result<()> {
        self.expire(t);
        if let Some((id, end)) = self.bus.start_next(t) {
            self.on_wire.insert(id, InFlight { start: t });
            self.cal
                .schedule(Event::new(end, EventKind::TransmissionComplete(id)))?;
        }
        Ok(())
    }

    fn on_complete(&mut self, t: SimTime, id: PacketId) -> Result<()> {
        let done = self.bus.complete(t)?;
        let pkt = done.packet;
        if pkt.id != id {
            return Err(Error::Internal(format!(
                "completion event for {id:?} but {:?} was on the wire",
                pkt.id
            )));
        }
        let start = self
            .on_wire
            .remove(&id)
            .map(|w| w.start)
            .ok_or_else(|| Error::Internal(format!("no start record for {id:?}")))?;
        self.transmissions.push(TxRecord {
            loop_id: pkt.loop_id,
            priority: pkt.priority,
            release: pkt.release,
            start,
            end: t,
            deadline: pkt.deadline,
            state: pkt.state,
        });

        match pkt.state {
            PacketState::Delivered => {
                let l = &mut self.loops[pkt.loop_id];
                l.u = control_output(&l.gains, &pkt.x, pkt.r);
                l.e_last = pkt.r - l.propagator.model().output(&pkt.x);
                self.metrics.loops[pkt.loop_id].delivered += 1;
                self.metrics.record_outcome(Outcome::Met, pkt.deadline);
            }
            PacketState::Late if !done.miss_reported => {
                self.record_miss(&MissKind::Late {
                    id,
                    loop_id: pkt.loop_id,
                    deadline: pkt.deadline,
                });
            }
            _ => {}
        }
        Ok(())
    }

    fn on_sample(&mut self, t: SimTime, i: usize) -> Result<()> {
        if let Some(miss) = self.bus.supersede_or_drop(i) {
            self.record_miss(&miss);
        }
        let id = PacketId(self.next_packet);
        self.next_packet += 1;
        let l = &mut self.loops[i];
        let pkt = SamplePacket {
            id,
            loop_id: i,
            priority: l.priority,
            release: t,
            deadline: t + l.h,
            tx_time: l.tx_time,
            x: l.x.clone(),
            r: l.wave.value_at(t),
            state: PacketState::Queued,
        };
        l.last_sample = t;
        let next = t + l.h;
        self.metrics.loops[i].generated += 1;
        self.bus.submit(pkt, t)?;
        self.loops[i].next_sample = self.schedule_if_in_run(next, EventKind::SensorSample(i))?;
        Ok(())
    }

    fn on_invoke(&mut self, t: SimTime) -> Result<()> {
        // Everything due by t is resolved before the window closes.
        self.expire(t);
        let window = self.metrics.window_index(t);
        let rho = self.metrics.window_rho(window);
        let errors: Vec<f64> = self.loops.iter().map(|l| l.e_last).collect();
        let decision = self.scheduler.invoke(rho, &errors)?;

        for i in 0..self.loops.len() {
            let h_min = self.loops[i].h_min;
            let h = SimTime::from_secs_f64_ceil(decision.h[i])
                .ok_or_else(|| Error::Internal(format!("bad period {}", decision.h[i])))?
                .clamp(h_min, self.h_max);
            self.loops[i].priority = decision.prio[i];
            if h == self.loops[i].h {
                continue;
            }
            let gains = self.loops[i]
                .gains_for(h)
                .map_err(|source| Error::Design { loop_id: i, source })?;
            self.designed.insert((i, h));
            let l = &mut self.loops[i];
            l.h = h;
            l.gains = gains;
            if let Some(pending) = l.next_sample.take() {
                self.cal.cancel(pending);
            }
            let at = (l.last_sample + h).max(t);
            self.loops[i].next_sample = self.schedule_if_in_run(at, EventKind::SensorSample(i))?;
        }
        self.push_utilization(t);

        self.scheduler_trace.push(SchedulerRow {
            time: t,
            miss_ratio: rho,
            err: decision.err,
            u_total: decision.u,
            j: decision.j,
            jp: decision.jp,
            h: self.loops.iter().map(|l| l.h.as_secs_f64()).collect(),
            prio: decision.prio,
        });
        self.schedule_if_in_run(t + self.t_fs, EventKind::SchedulerInvoke)?;
        Ok(())
    }

    fn on_toggle(&mut self, t: SimTime, i: usize) -> Result<()> {
        let l = &mut self.loops[i];
        l.r = l.wave.value_at(t);
        let next = l.wave.next_toggle_after(t);
        self.schedule_if_in_run(next, EventKind::ReferenceToggle(i))?;
        Ok(())
    }

    fn on_log(&mut self, t: SimTime) -> Result<()> {
        let dt = self
            .last_log
            .map(|prev| (t - prev).as_secs_f64())
            .unwrap_or(0.0);
        let mut row = Vec::with_capacity(self.loops.len());
        for (i, l) in self.loops.iter().enumerate() {
            let y = l.output();
            self.metrics.iae_step(i, (l.r - y).abs(), dt);
            row.push(LoopLog {
                r: l.r,
                y,
                u: l.u,
                h: l.h,
                priority: l.priority,
            });
        }
        self.timeseries.push(LogRow {
            time: t,
            loops: row,
        });
        self.last_log = Some(t);
        self.schedule_if_in_run(t + self.log_grid, EventKind::LogTick)?;
        Ok(())
    }

    fn finish(mut self) -> SimulationResult {
        self.expire(self.duration);
        let n = self.loops.len();
        let mut in_flight = vec![0u64; n];
        for (i, slot) in in_flight.iter_mut().enumerate() {
            let m = &self.metrics.loops[i];
            *slot = m.generated - m.delivered - m.dropped - m.late;
        }
        let half = SimTime::from_nanos(self.duration.as_nanos() / 2);
        let complete_windows = (self.duration.as_nanos() / self.t_fs.as_nanos()) as usize;
        let busy = self.bus.busy_time_until(self.duration);
        let summary = Summary {
            mean_utilization_final_half: self.metrics.mean_utilization(half, self.duration),
            run_miss_ratio: self.metrics.pooled_rho(complete_windows),
            final_window_miss_ratio: self.metrics.window_rho(complete_windows),
            complete_windows,
            bus_busy_fraction: busy.as_nanos() as f64 / self.duration.as_nanos() as f64,
            in_flight,
            metrics: self.metrics,
        };
        SimulationResult {
            n_loops: n,
            duration: self.duration,
            timeseries: self.timeseries,
            scheduler_trace: self.scheduler_trace,
            summary,
            transmissions: self.transmissions,
            designed_periods: self.designed.into_iter().collect(),
            events_processed: self.events_processed,
        }
    }
}

fn placeholder_gains() -> ControllerGains {
    ControllerGains {
        k: nalgebra::RowDVector::zeros(0),
        nff: 0.0,
        h: 0.0,
        phi: nalgebra::DMatrix::zeros(0, 0),
        gamma: DVector::zeros(0),
    }
}
