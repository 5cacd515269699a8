//! Shared priority-driven, non-preemptive network.
//!
//! When the bus is idle the pending packet with the greatest priority level
//! starts transmitting and always runs to completion. A packet that cannot be
//! delivered by its deadline is a miss: queued packets are removed at the
//! deadline, transmitting packets finish but are marked late and discarded
//! by the receiver.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::time::SimTime;

/// Arbitration priority. Greater level wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PriorityLevel(pub u32);

impl PriorityLevel {
    /// Display encoding used in logs, where 1 is the highest priority.
    pub fn display_rank(self, n_loops: usize) -> u32 {
        n_loops as u32 + 1 - self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketState {
    Queued,
    Transmitting,
    Delivered,
    Dropped,
    /// Finished transmitting after its deadline; payload discarded.
    Late,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePacket {
    pub id: PacketId,
    pub loop_id: usize,
    pub priority: PriorityLevel,
    pub release: SimTime,
    pub deadline: SimTime,
    pub tx_time: SimTime,
    /// Sampled plant state.
    pub x: DVector<f64>,
    /// Reference value at release.
    pub r: f64,
    pub state: PacketState,
}

/// What happened to a packet that was resolved as a deadline miss.
#[derive(Debug, Clone, PartialEq)]
pub enum MissKind {
    /// Removed from the queue.
    Dropped(SamplePacket),
    /// Still on the wire; will complete but be discarded.
    Late {
        id: PacketId,
        loop_id: usize,
        deadline: SimTime,
    },
}

impl MissKind {
    pub fn loop_id(&self) -> usize {
        match self {
            MissKind::Dropped(p) => p.loop_id,
            MissKind::Late { loop_id, .. } => *loop_id,
        }
    }

    pub fn deadline(&self) -> SimTime {
        match self {
            MissKind::Dropped(p) => p.deadline,
            MissKind::Late { deadline, .. } => *deadline,
        }
    }
}

/// A finished transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct Completed {
    pub packet: SamplePacket,
    /// The miss was already reported by [`Bus::expire`] or
    /// [`Bus::supersede_or_drop`].
    pub miss_reported: bool,
}

#[derive(Debug, Clone)]
struct OnWire {
    packet: SamplePacket,
    started: SimTime,
    ends: SimTime,
    late: bool,
}

#[derive(Debug, Default)]
pub struct Bus {
    pending: Vec<SamplePacket>,
    current: Option<OnWire>,
    busy: SimTime,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_idle(&self) -> bool {
        self.current.is_none()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn busy_until(&self) -> Option<SimTime> {
        self.current.as_ref().map(|w| w.ends)
    }

    /// Id of the packet on the wire, if any.
    pub fn transmitting(&self) -> Option<PacketId> {
        self.current.as_ref().map(|w| w.packet.id)
    }

    /// Total completed transmission time.
    pub fn busy_time(&self) -> SimTime {
        self.busy
    }

    /// Busy time on `[0, t]`, counting the in-progress transmission partially.
    pub fn busy_time_until(&self, t: SimTime) -> SimTime {
        let partial = self
            .current
            .as_ref()
            .map(|w| t.min(w.ends).saturating_sub(w.started))
            .unwrap_or(SimTime::ZERO);
        self.busy + partial
    }

    /// True when the bus is idle while packets wait, which never holds
    /// between events in a correct run.
    pub fn work_conservation_violated(&self) -> bool {
        self.current.is_none() && !self.pending.is_empty()
    }

    fn has_live_packet(&self, loop_id: usize) -> bool {
        self.pending.iter().any(|p| p.loop_id == loop_id)
            || self
                .current
                .as_ref()
                .is_some_and(|w| w.packet.loop_id == loop_id && !w.late)
    }

    /// Releases a packet onto the bus. The packet waits in the pending set
    /// until the next arbitration point ([`Bus::start_next`]); the engine
    /// arbitrates once all releases and completions at an instant are in, so
    /// simultaneous releases compete fairly.
    pub fn submit(&mut self, mut pkt: SamplePacket, _t: SimTime) -> Result<()> {
        if self.has_live_packet(pkt.loop_id) {
            return Err(Error::Internal(format!(
                "loop {} already has a live packet on the bus",
                pkt.loop_id
            )));
        }
        pkt.state = PacketState::Queued;
        self.pending.push(pkt);
        Ok(())
    }

    /// Removes and returns the pending packet with the greatest priority.
    pub fn arbitrate(&mut self) -> Option<SamplePacket> {
        let idx = self
            .pending
            .iter()
            .enumerate()
            .max_by_key(|(_, p)| p.priority)
            .map(|(i, _)| i)?;
        Some(self.pending.remove(idx))
    }

    fn start(&mut self, mut pkt: SamplePacket, t: SimTime) -> SimTime {
        pkt.state = PacketState::Transmitting;
        let ends = t + pkt.tx_time;
        self.current = Some(OnWire {
            packet: pkt,
            started: t,
            ends,
            late: false,
        });
        ends
    }

    /// Arbitrates and starts the winner if the bus is idle. Returns the
    /// started packet's id and completion time.
    pub fn start_next(&mut self, t: SimTime) -> Option<(PacketId, SimTime)> {
        if self.current.is_some() {
            return None;
        }
        let pkt = self.arbitrate()?;
        let id = pkt.id;
        Some((id, self.start(pkt, t)))
    }

    /// Finishes the transmission in progress. The returned packet is
    /// `Delivered` if it made its deadline and `Late` otherwise.
    pub fn complete(&mut self, t: SimTime) -> Result<Completed> {
        let wire = self
            .current
            .take()
            .ok_or_else(|| Error::Internal("completion with idle bus".into()))?;
        if wire.ends != t {
            return Err(Error::Internal(format!(
                "completion at {t:?} but transmission ends at {:?}",
                wire.ends
            )));
        }
        self.busy = self.busy + (wire.ends - wire.started);
        let mut packet = wire.packet;
        packet.state = if wire.late || t > packet.deadline {
            PacketState::Late
        } else {
            PacketState::Delivered
        };
        Ok(Completed {
            packet,
            miss_reported: wire.late,
        })
    }

    /// Resolves every packet whose deadline has passed by `t`: queued ones
    /// are dropped, the one on the wire is marked late. Late packets already
    /// marked are not reported twice.
    pub fn expire(&mut self, t: SimTime) -> Vec<MissKind> {
        let mut misses = Vec::new();
        let mut i = 0;
        while i < self.pending.len() {
            if self.pending[i].deadline <= t {
                let mut p = self.pending.remove(i);
                p.state = PacketState::Dropped;
                misses.push(MissKind::Dropped(p));
            } else {
                i += 1;
            }
        }
        if let Some(w) = self.current.as_mut() {
            // Anything still on the wire at t completes after t.
            if !w.late && w.packet.deadline <= t && w.ends > w.packet.deadline {
                w.late = true;
                misses.push(MissKind::Late {
                    id: w.packet.id,
                    loop_id: w.packet.loop_id,
                    deadline: w.packet.deadline,
                });
            }
        }
        misses
    }

    /// Called at a loop's new sampling instant: a fresher sample exists, so
    /// any previous packet of the loop that is still queued or on the wire is
    /// a miss.
    pub fn supersede_or_drop(&mut self, loop_id: usize) -> Option<MissKind> {
        if let Some(idx) = self.pending.iter().position(|p| p.loop_id == loop_id) {
            let mut p = self.pending.remove(idx);
            p.state = PacketState::Dropped;
            return Some(MissKind::Dropped(p));
        }
        match self.current.as_mut() {
            Some(w) if w.packet.loop_id == loop_id && !w.late => {
                w.late = true;
                Some(MissKind::Late {
                    id: w.packet.id,
                    loop_id,
                    deadline: w.packet.deadline,
                })
            }
            _ => None,
        }
    }
}
