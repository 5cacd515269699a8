use crate::time::SimTime;

/// Square wave: `+amplitude` on the first half of each period, `-amplitude`
/// on the second half.
pub fn reference_value(t: f64, period: f64, amplitude: f64) -> f64 {
    let phase = t.rem_euclid(period);
    if phase < period / 2.0 {
        amplitude
    } else {
        -amplitude
    }
}

/// Square-wave reference evaluated on the integer simulation clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareWave {
    period: SimTime,
    amplitude: f64,
}

impl SquareWave {
    pub fn new(period: SimTime, amplitude: f64) -> Self {
        assert!(period.as_nanos() > 0, "square wave period must be positive");
        SquareWave { period, amplitude }
    }

    pub fn value_at(&self, t: SimTime) -> f64 {
        let phase = t.as_nanos() % self.period.as_nanos();
        if 2 * phase < self.period.as_nanos() {
            self.amplitude
        } else {
            -self.amplitude
        }
    }

    /// First sign change strictly after `t`.
    pub fn next_toggle_after(&self, t: SimTime) -> SimTime {
        let p = self.period.as_nanos();
        // Toggle instants are k*p/2; use 2t to stay exact for odd p.
        let k = (2 * t.as_nanos()) / p + 1;
        SimTime::from_nanos((k * p).div_ceil(2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_convention() {
        assert_eq!(reference_value(0.0, 4.0, 1.0), 1.0);
        assert_eq!(reference_value(2.0, 4.0, 1.0), -1.0);
        assert_eq!(reference_value(3.999, 2.0, 1.0), -1.0);
        assert_eq!(reference_value(4.0, 2.0, 1.0), 1.0);
        assert_eq!(reference_value(1.0, 4.0, 2.5), 2.5);
    }

    #[test]
    fn integer_wave_agrees() {
        let w = SquareWave::new(SimTime::from_nanos(2_000_000_000), 1.0);
        for (t, r) in [
            (0.0, 1.0),
            (0.999_999_999, 1.0),
            (1.0, -1.0),
            (3.999, -1.0),
            (4.0, 1.0),
        ] {
            assert_eq!(w.value_at(SimTime::from_secs_f64(t).unwrap()), r, "t={t}");
            assert_eq!(reference_value(t, 2.0, 1.0), r);
        }
    }

    #[test]
    fn toggles() {
        let w = SquareWave::new(SimTime::from_nanos(4_000_000_000), 1.0);
        assert_eq!(w.next_toggle_after(SimTime::ZERO).as_nanos(), 2_000_000_000);
        assert_eq!(
            w.next_toggle_after(SimTime::from_nanos(2_000_000_000))
                .as_nanos(),
            4_000_000_000
        );
        let odd = SquareWave::new(SimTime::from_nanos(3), 1.0);
        assert_eq!(odd.next_toggle_after(SimTime::ZERO).as_nanos(), 2);
    }
}
