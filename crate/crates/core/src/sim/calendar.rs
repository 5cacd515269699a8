//! Event calendar with a deterministic total order.
//!
//! Events are ordered by time, then by a fixed kind precedence, then by
//! insertion sequence. Cancellation is lazy: cancelled entries stay in the
//! heap and are skipped on pop.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::bus::PacketId;
use crate::error::{Error, Result};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    TransmissionComplete(PacketId),
    SensorSample(usize),
    SchedulerInvoke,
    ReferenceToggle(usize),
    LogTick,
}

impl EventKind {
    /// Same-time precedence: lower runs first.
    fn precedence(&self) -> u8 {
        match self {
            EventKind::TransmissionComplete(_) => 0,
            EventKind::SensorSample(_) => 1,
            EventKind::SchedulerInvoke => 2,
            EventKind::ReferenceToggle(_) => 3,
            EventKind::LogTick => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub time: SimTime,
    pub kind: EventKind,
}

impl Event {
    pub fn new(time: SimTime, kind: EventKind) -> Self {
        Event { time, kind }
    }
}

/// Handle returned by [`EventCalendar::schedule`]; doubles as the sequence
/// number used for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(u64);

#[derive(Debug)]
struct Entry {
    event: Event,
    seq: u64,
}

impl Entry {
    fn key(&self) -> (SimTime, u8, u64) {
        (self.event.time, self.event.kind.precedence(), self.seq)
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // BinaryHeap is a max-heap; reverse for earliest-first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

#[derive(Debug, Default)]
pub struct EventCalendar {
    heap: BinaryHeap<Entry>,
    pending: HashSet<u64>,
    now: SimTime,
    next_seq: u64,
}

impl EventCalendar {
    pub fn new() -> Self {
        Self::default()
    }

    /// Time of the most recently popped event.
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Inserts an event. Scheduling before the current clock is a causality
    /// bug and is rejected.
    pub fn schedule(&mut self, event: Event) -> Result<EventId> {
        if event.time < self.now {
            return Err(Error::Causality {
                event: event.time,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert(seq);
        self.heap.push(Entry { event, seq });
        Ok(EventId(seq))
    }

    /// Returns true if the event was still pending.
    pub fn cancel(&mut self, id: EventId) -> bool {
        self.pending.remove(&id.0)
    }

    pub fn peek(&mut self) -> Option<Event> {
        self.skip_cancelled();
        self.heap.peek().map(|e| e.event)
    }

    pub fn pop_next(&mut self) -> Option<Event> {
        self.skip_cancelled();
        let entry = self.heap.pop()?;
        self.pending.remove(&entry.seq);
        self.now = entry.event.time;
        Some(entry.event)
    }

    fn skip_cancelled(&mut self) {
        while let Some(top) = self.heap.peek() {
            if self.pending.contains(&top.seq) {
                break;
            }
            self.heap.pop();
        }
    }
}
