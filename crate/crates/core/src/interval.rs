//! Closed real intervals, just enough for quotients of enclosures.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn centered(mid: f64, half_width: f64) -> Self {
        Self::new(mid - half_width, mid + half_width)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Quotient of two intervals; `None` when the divisor contains zero.
    pub fn checked_div(&self, rhs: &Interval) -> Option<Interval> {
        if rhs.contains_zero() {
            return None;
        }
        let c = [
            self.lo / rhs.lo,
            self.lo / rhs.hi,
            self.hi / rhs.lo,
            self.hi / rhs.hi,
        ];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Interval::new(lo, hi))
    }

    pub fn ln(&self) -> Option<Interval> {
        (self.lo > 0.0).then(|| Interval::new(self.lo.ln(), self.hi.ln()))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn division_by_zero_interval() {
        let a = Interval::new(1.0, 2.0);
        assert!(a.checked_div(&Interval::new(-0.1, 0.1)).is_none());
    }

    proptest! {
        #[test]
        fn quotient_encloses_pointwise_quotients(
            a in 0.1f64..5.0, wa in 0.0f64..1.0,
            b in 0.1f64..5.0, wb in 0.0f64..1.0,
            s in 0.0f64..1.0, t in 0.0f64..1.0,
        ) {
            let x = Interval::new(a, a + wa);
            let y = Interval::new(b, b + wb);
            let q = x.checked_div(&y).unwrap();
            let v = (a + s * wa) / (b + t * wb);
            prop_assert!(q.lo <= v * (1.0 + 1e-15) && v <= q.hi * (1.0 + 1e-15));
        }
    }
}
