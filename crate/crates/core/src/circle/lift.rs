use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Evaluation tolerance: comparisons of lift values closer than this are ties.
pub const TAU_EVAL: f64 = 1e-10;

const BISECTION_MAX_ITER: usize = 200;

/// One term `b sin(2π j x + φ)` of a primitive map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub j: u32,
    pub b: f64,
    pub phi: f64,
}

/// `x ↦ x + a + Σ b_j sin(2π j x + φ_j)`, or its inverse when `inv` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Primitive {
    pub a: f64,
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
    #[serde(default)]
    pub inv: bool,
}

impl Primitive {
    pub fn translation(a: f64) -> Self {
        Self {
            a,
            harmonics: Vec::new(),
            inv: false,
        }
    }

    /// A member of the Arnold family `x + a + b sin(2πx + φ)`.
    pub fn arnold(a: f64, b: f64, phi: f64) -> Self {
        Self {
            a,
            harmonics: vec![Harmonic { j: 1, b, phi }],
            inv: false,
        }
    }

    /// `Σ 2π j |b_j|`; the forward map has derivative in `[1 - s, 1 + s]`.
    pub fn slope_excess(&self) -> f64 {
        self.harmonics
            .iter()
            .map(|h| TAU * h.j as f64 * h.b.abs())
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() {
            return Err(Error::InvalidLift(format!("non-finite shift {}", self.a)));
        }
        for h in &self.harmonics {
            if h.j == 0 || !h.b.is_finite() || !h.phi.is_finite() {
                return Err(Error::InvalidLift(format!(
                    "bad harmonic j={} b={} phi={}",
                    h.j, h.b, h.phi
                )));
            }
        }
        let s = self.slope_excess();
        if s >= 1.0 {
            return Err(Error::InvalidLift(format!(
                "Σ 2πj|b_j| = {s} must be < 1 for a monotone lift"
            )));
        }
        Ok(())
    }

    pub fn is_translation(&self) -> bool {
        self.harmonics.iter().all(|h| h.b == 0.0)
    }

    /// Signed shift of a translation primitive.
    fn shift(&self) -> f64 {
        if self.inv {
            -self.a
        } else {
            self.a
        }
    }

    pub fn inverted(&self) -> Self {
        Self {
            inv: !self.inv,
            ..self.clone()
        }
    }

    fn forward(&self, x: f64) -> f64 {
        let osc: f64 = self
            .harmonics
            .iter()
            .map(|h| h.b * (TAU * h.j as f64 * x + h.phi).sin())
            .sum();
        x + self.a + osc
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.inv {
            return Ok(self.forward(x));
        }
        if self.is_translation() {
            return Ok(x - self.a);
        }
        // forward(y) - y - a lies in [-B, B]; bisect on the monotone forward map.
        let amp: f64 = self.harmonics.iter().map(|h| h.b.abs()).sum();
        let mut lo = x - self.a - amp;
        let mut hi = x - self.a + amp;
        for _ in 0..BISECTION_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if self.forward(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::BisectionStall {
            x,
            iterations: BISECTION_MAX_ITER,
        })
    }

    /// Bounds on the derivative of this map (or its inverse).
    pub fn derivative_bounds(&self) -> (f64, f64) {
        let s = self.slope_excess();
        if self.inv {
            (1.0 / (1.0 + s), 1.0 / (1.0 - s))
        } else {
            (1.0 - s, 1.0 + s)
        }
    }

    fn push_key(&self, out: &mut Vec<u64>) {
        out.push(self.a.to_bits());
        out.push(self.inv as u64);
        out.push(self.harmonics.len() as u64);
        for h in &self.harmonics {
            out.push(h.j as u64);
            out.push(h.b.to_bits());
            out.push(h.phi.to_bits());
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLift {
    word: Vec<Primitive>,
}

/// A lift `f: ℝ → ℝ` of an orientation-preserving circle diffeomorphism,
/// `f(x + 1) = f(x) + 1`, stored as a word of primitive maps.
///
/// The word is applied left to right: `word[0]` acts first. Words are never
/// refit into a single primitive; composition concatenates them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLift")]
pub struct CircleLift {
    word: Vec<Primitive>,
}

impl TryFrom<RawLift> for CircleLift {
    type Error = Error;
    fn try_from(raw: RawLift) -> Result<Self> {
        CircleLift::new(raw.word)
    }
}

impl CircleLift {
    pub fn new(word: Vec<Primitive>) -> Result<Self> {
        for p in &word {
            p.validate()?;
        }
        Ok(Self { word })
    }

    pub fn identity() -> Self {
        Self { word: Vec::new() }
    }

    pub fn translation(t: f64) -> Self {
        Self {
            word: vec![Primitive::translation(t)],
        }
    }

    pub fn arnold(a: f64, b: f64, phi: f64) -> Result<Self> {
        Self::new(vec![Primitive::arnold(a, b, phi)])
    }

    pub fn word(&self) -> &[Primitive] {
        &self.word
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        self.word.iter().try_fold(x, |y, p| p.eval(y))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &CircleLift) -> CircleLift {
        let mut word = other.word.clone();
        word.extend(self.word.iter().cloned());
        CircleLift { word }.canonical()
    }

    pub fn inverse(&self) -> CircleLift {
        let word = self.word.iter().rev().map(Primitive::inverted).collect();
        CircleLift { word }.canonical()
    }

    pub fn power(&self, p: i64) -> CircleLift {
        let base = if p < 0 { self.inverse() } else { self.canonical() };
        if let Some(s) = base.translation_shift() {
            // Scale instead of summing |p| copies of the shift.
            return CircleLift::translation(s * p.unsigned_abs() as f64).canonical();
        }
        let n = p.unsigned_abs() as usize;
        let mut word = Vec::with_capacity(base.word.len() * n);
        for _ in 0..n {
            word.extend(base.word.iter().cloned());
        }
        CircleLift { word }.canonical()
    }

    /// Merge adjacent translations, drop zero shifts, cancel adjacent
    /// primitive/inverse pairs.
    pub fn canonical(&self) -> CircleLift {
        let mut out: Vec<Primitive> = Vec::with_capacity(self.word.len());
        for p in &self.word {
            if p.is_translation() {
                let s = p.shift();
                match out.last_mut() {
                    Some(top) if top.is_translation() => {
                        top.a += s;
                        if top.a == 0.0 {
                            out.pop();
                        }
                    }
                    _ => {
                        if s != 0.0 {
                            out.push(Primitive::translation(s));
                        }
                    }
                }
            } else if out.last().is_some_and(|top| *top == p.inverted()) {
                out.pop();
            } else {
                out.push(p.clone());
            }
        }
        CircleLift { word: out }
    }

    /// Total shift when every primitive is a translation.
    pub fn translation_shift(&self) -> Option<f64> {
        self.word
            .iter()
            .try_fold(0.0, |acc, p| p.is_translation().then(|| acc + p.shift()))
    }

    /// Upper and lower bounds on `f'`, from products of per-primitive bounds.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        self.word.iter().fold((1.0, 1.0), |(lo, hi), p| {
            let (a, b) = p.derivative_bounds();
            (lo * a, hi * b)
        })
    }

    /// Exact structural key of the canonical word, for caches.
    pub fn key(&self) -> Vec<u64> {
        let c = self.canonical();
        let mut out = Vec::with_capacity(c.word.len() * 6);
        for p in &c.word {
            p.push_key(&mut out);
        }
        out
    }

    /// Split the canonical word into translation slots around the
    /// non-translation primitives: `T(s_0) N_1 T(s_1) … N_m T(s_m)`.
    pub(crate) fn slots(&self) -> (Vec<f64>, Vec<Primitive>) {
        let c = self.canonical();
        let mut shifts = vec![0.0];
        let mut nontrivial = Vec::new();
        for p in c.word {
            if p.is_translation() {
                *shifts.last_mut().unwrap() += p.shift();
            } else {
                nontrivial.push(p);
                shifts.push(0.0);
            }
        }
        (shifts, nontrivial)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn translation_evaluates() {
        assert_eq!(CircleLift::translation(0.25).evaluate(0.0).unwrap(), 0.25);
        let w = CircleLift::new(vec![Primitive::translation(0.5), Primitive::translation(0.5)]).unwrap();
        assert_abs_diff_eq!(w.evaluate(0.1).unwrap(), 1.1, epsilon = 1e-15);
    }

    #[test]
    fn inverse_primitive_solves_equation() {
        let f = CircleLift::arnold(0.3, 0.05, 0.0).unwrap();
        let y = f.inverse().evaluate(0.35).unwrap();
        let residual = y + 0.3 + 0.05 * (TAU * y).sin() - 0.35;
        assert!(residual.abs() < TAU_EVAL, "residual {residual}");
    }

    #[test]
    fn rejects_non_monotone_primitive() {
        assert!(matches!(
            CircleLift::arnold(0.3, 0.2, 0.0),
            Err(Error::InvalidLift(_))
        ));
    }

    #[test]
    fn periodicity_of_composite_word() {
        let f = CircleLift::new(vec![
            Primitive::arnold(0.3, 0.05, 0.2),
            Primitive::arnold(0.1, -0.03, 1.0).inverted(),
            Primitive {
                a: 0.2,
                harmonics: vec![
                    Harmonic { j: 1, b: 0.02, phi: 0.0 },
                    Harmonic { j: 3, b: 0.01, phi: 0.5 },
                ],
                inv: false,
            },
        ])
        .unwrap();
        for i in 0..50 {
            let x = -2.0 + i as f64 * 0.0917;
            let d = f.evaluate(x + 1.0).unwrap() - f.evaluate(x).unwrap();
            assert_abs_diff_eq!(d, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn canonical_form_cancels_and_merges() {
        let h = CircleLift::arnold(0.1, 0.05, 0.3).unwrap();
        let t = CircleLift::translation(0.25);
        let c = h.compose(&t).compose(&h.inverse());
        assert_eq!(c.power(4).word().len(), 3);
        assert_eq!(c.compose(&c.inverse()).word().len(), 0);
        assert_eq!(t.power(4).translation_shift(), Some(1.0));
    }

    #[test]
    fn json_shape() {
        let f: CircleLift = serde_json::from_str(
            r#"{"word":[{"a":0.3,"harmonics":[{"j":1,"b":0.05,"phi":0.0}],"inv":false}]}"#,
        )
        .unwrap();
        assert_eq!(f, CircleLift::arnold(0.3, 0.05, 0.0).unwrap());
        assert!(serde_json::from_str::<CircleLift>(
            r#"{"word":[{"a":0.3,"harmonics":[{"j":1,"b":0.5,"phi":0.0}]}]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<CircleLift>(r#"{"word":[],"extra":1}"#).is_err());
    }
}
