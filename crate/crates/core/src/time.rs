use std::fmt;
use std::ops::{Add, Sub};

const NANOS_PER_SEC: f64 = 1e9;

/// Simulation time, stored as integer nanoseconds so that event ordering and
/// window attribution are exact.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    /// Converts seconds to the nearest nanosecond. `None` for negative or
    /// non-finite input.
    pub fn from_secs_f64(secs: f64) -> Option<Self> {
        if !secs.is_finite() || secs < 0.0 {
            return None;
        }
        let ns = (secs * NANOS_PER_SEC).round();
        if ns > u64::MAX as f64 {
            return None;
        }
        Some(SimTime(ns as u64))
    }

    /// Converts seconds to nanoseconds, rounding up unless the value is
    /// within 1e-6 ns of an integer. Used for periods, where rounding down
    /// would request slightly more bandwidth than allocated.
    pub fn from_secs_f64_ceil(secs: f64) -> Option<Self> {
        if !secs.is_finite() || secs < 0.0 {
            return None;
        }
        let raw = secs * NANOS_PER_SEC;
        let nearest = raw.round();
        let ns = if (raw - nearest).abs() < 1e-6 {
            nearest
        } else {
            raw.ceil()
        };
        if ns > u64::MAX as f64 {
            return None;
        }
        Some(SimTime(ns as u64))
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.as_secs_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(
            SimTime::from_secs_f64(0.0032).unwrap().as_nanos(),
            3_200_000
        );
        assert_eq!(SimTime::from_secs_f64(-1e-9), None);
        assert_eq!(SimTime::from_secs_f64(f64::NAN), None);
        assert_eq!(
            SimTime::from_secs_f64_ceil(0.02).unwrap().as_nanos(),
            20_000_000
        );
        assert_eq!(
            SimTime::from_secs_f64_ceil(0.0032 / 0.7)
                .unwrap()
                .as_nanos(),
            4_571_429
        );
    }
}
