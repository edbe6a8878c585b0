use super::lift::CircleLift;
use crate::error::{Error, Result};
use crate::interval::Interval;

/// `e: x ↦ x + 1`, the unit translation.
pub fn translation_e() -> CircleLift {
    CircleLift::translation(1.0)
}

/// The time-`t` map `x ↦ x + t` of the unit-speed rotation flow.
pub fn flow(t: f64) -> CircleLift {
    CircleLift::translation(t)
}

/// `Rot(f)` enclosed as `f^n(0)/n ± 1/n`, using `|f^n(x) - x - n Rot(f)| < 1`.
///
/// Pure translations return the exact shift as a point interval.
pub fn rotation_number(f: &CircleLift, n: u64) -> Result<Interval> {
    if n == 0 {
        return Err(Error::InvalidParameter("iteration count must be at least 1".into()));
    }
    if let Some(s) = f.canonical().translation_shift() {
        return Ok(Interval::point(s));
    }
    let mut x = 0.0;
    for _ in 0..n {
        x = f.evaluate(x)?;
    }
    let n = n as f64;
    Ok(Interval::centered(x / n, 1.0 / n))
}

/// `γ(f, g) = Rot(g) / Rot(f)` as a quotient of rotation enclosures.
pub fn gamma_exact(f: &CircleLift, g: &CircleLift, n: u64) -> Result<Interval> {
    let rf = rotation_number(f, n)?;
    let rg = rotation_number(g, n)?;
    rg.checked_div(&rf)
        .ok_or(Error::RotFNearZero { lo: rf.lo, hi: rf.hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translations_have_exact_rotation() {
        for a in [0.0, 0.37, 1.0, -2.5] {
            let r = rotation_number(&CircleLift::translation(a), 10).unwrap();
            assert_eq!(r, Interval::point(a));
        }
    }

    #[test]
    fn enclosures_at_two_depths_overlap() {
        let f = CircleLift::arnold(0.5, 0.1, 0.0).unwrap();
        let a = rotation_number(&f, 100_000).unwrap();
        let b = rotation_number(&f, 1_000_000).unwrap();
        assert!(a.intersects(&b), "{a} vs {b}");
        assert!((a.mid() - b.mid()).abs() <= a.width() / 2.0 + b.width() / 2.0);
    }

    #[test]
    fn gamma_exact_of_translations() {
        let q = gamma_exact(&flow(0.5), &flow(2.0), 1).unwrap();
        assert_eq!(q, Interval::point(4.0));
        let f = CircleLift::arnold(0.3, 0.05, 0.2).unwrap();
        assert!(gamma_exact(&f, &f, 1000).unwrap().contains(1.0));
    }

    #[test]
    fn zero_rotation_denominator_is_an_error() {
        let f = CircleLift::arnold(0.01, 0.05, 0.0).unwrap();
        assert!(matches!(
            gamma_exact(&f, &translation_e(), 50),
            Err(Error::RotFNearZero { .. })
        ));
    }
}
