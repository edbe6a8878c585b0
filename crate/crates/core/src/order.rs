//! Groups carrying a normal cone, and the growth invariants they induce.
//!
//! A normal cone `C` in a group is a product-closed, conjugation-stable
//! subset containing the identity. It defines `f >= g` iff `f g^-1 ∈ C`.
//! For a dominant `f` (an element of `C` whose powers eventually exceed
//! every element) and any `g`, the integers
//!
//! ```text
//! γ_k(f, g) = min { p ∈ ℤ : f^p >= g^k }
//! ```
//!
//! are finite and subadditive in `k`, so `γ_k / k` converges to the
//! relative growth `γ(f, g) = inf_k γ_k / k`.
//!
//! This module is model-agnostic: concrete groups implement
//! [`GroupModel`] and supply an order oracle that may answer
//! [`Verdict::Inconclusive`] when it cannot certify a comparison.
//! Inconclusive answers are never treated as `No`.

use crate::error::{Error, Result};
use crate::report::{Record, Report};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Yes,
    No,
    Inconclusive,
}

/// Answer of an order oracle for `f >= g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderVerdict {
    pub verdict: Verdict,
    /// A point where `f < g` by more than the evaluation tolerance (`No` only).
    pub witness: Option<Vec<f64>>,
    /// Certified lower bound of `f - g` for `Yes`, the most negative sampled
    /// value of `f - g` otherwise.
    pub margin: f64,
    /// Number of evaluation points the oracle used.
    pub resolution: usize,
}

impl OrderVerdict {
    pub fn yes(margin: f64, resolution: usize) -> Self {
        Self {
            verdict: Verdict::Yes,
            witness: None,
            margin,
            resolution,
        }
    }

    pub fn no(witness: Vec<f64>, margin: f64, resolution: usize) -> Self {
        Self {
            verdict: Verdict::No,
            witness: Some(witness),
            margin,
            resolution,
        }
    }

    pub fn inconclusive(margin: f64, resolution: usize) -> Self {
        Self {
            verdict: Verdict::Inconclusive,
            witness: None,
            margin,
            resolution,
        }
    }

    pub fn is_yes(&self) -> bool {
        self.verdict == Verdict::Yes
    }
}

/// A group with a normal cone, exposed through an order oracle.
///
/// Oracle answers must be deterministic functions of their arguments.
/// Implementations may cache powers internally; the cache must tolerate
/// concurrent insertion of identical entries.
pub trait GroupModel: Sync {
    type Element: Clone + Send + Sync;

    fn identity(&self) -> Self::Element;

    /// The product `f g` (apply `g` first).
    fn multiply(&self, f: &Self::Element, g: &Self::Element) -> Self::Element;

    fn invert(&self, f: &Self::Element) -> Self::Element;

    fn power(&self, f: &Self::Element, p: i64) -> Self::Element {
        let base = if p < 0 { self.invert(f) } else { f.clone() };
        let mut n = p.unsigned_abs();
        let mut acc = self.identity();
        let mut sq = base;
        while n > 0 {
            if n & 1 == 1 {
                acc = self.multiply(&acc, &sq);
            }
            n >>= 1;
            if n > 0 {
                sq = self.multiply(&sq, &sq);
            }
        }
        acc
    }

    /// Decide `f >= g`.
    fn dominates(&self, f: &Self::Element, g: &Self::Element) -> OrderVerdict;

    /// Decide `f^p >= g^k`. Models override this to reuse cached powers.
    fn dominates_powers(
        &self,
        f: &Self::Element,
        p: i64,
        g: &Self::Element,
        k: i64,
    ) -> OrderVerdict {
        self.dominates(&self.power(f, p), &self.power(g, k))
    }

    fn conjugate(&self, h: &Self::Element, f: &Self::Element) -> Self::Element {
        self.multiply(&self.multiply(h, f), &self.invert(h))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSettings {
    /// Largest exponent tried when searching for a dominant witness.
    pub q_max: i64,
    /// Largest exponent the `γ_k` search may query.
    pub p_max: i64,
}

impl Default for GrowthSettings {
    fn default() -> Self {
        Self {
            q_max: 10_000,
            p_max: 1 << 40,
        }
    }
}

/// Exponents certifying that `f` dominates the pair: `f^q >= g^-1` and
/// `f^q' >= g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominantWitness {
    pub q: i64,
    pub q_prime: i64,
}

fn smallest_exponent<M: GroupModel>(
    model: &M,
    f: &M::Element,
    g: &M::Element,
    k: i64,
    q_max: i64,
) -> Option<i64> {
    (0..=q_max).find(|&q| model.dominates_powers(f, q, g, k).is_yes())
}

fn require_in_cone<M: GroupModel>(model: &M, f: &M::Element) -> Result<()> {
    let v = model.dominates(f, &model.identity());
    match v.verdict {
        Verdict::Yes => Ok(()),
        Verdict::No => Err(Error::HypothesisFailed(
            "the growth base is not in the cone (f >= 1 fails)".into(),
        )),
        Verdict::Inconclusive => Err(Error::OrderInconclusive {
            context: "f >= 1".into(),
            margin: v.margin,
            resolution: v.resolution,
        }),
    }
}

/// Find the dominant witnesses for `(f, g)` by linear scan up to `q_max`.
pub fn dominant_witness<M: GroupModel>(
    model: &M,
    f: &M::Element,
    g: &M::Element,
    settings: &GrowthSettings,
) -> Result<DominantWitness> {
    require_in_cone(model, f)?;
    let not_found = Error::DominantWitnessNotFound {
        q_max: settings.q_max,
    };
    let q = smallest_exponent(model, f, g, -1, settings.q_max).ok_or(not_found)?;
    let q_prime = smallest_exponent(model, f, g, 1, settings.q_max).ok_or(
        Error::DominantWitnessNotFound {
            q_max: settings.q_max,
        },
    )?;
    Ok(DominantWitness { q, q_prime })
}

fn inconclusive(p: i64, k: i64, v: &OrderVerdict) -> Error {
    Error::OrderInconclusive {
        context: format!("f^{p} >= g^{k}"),
        margin: v.margin,
        resolution: v.resolution,
    }
}

/// `γ_k(f, g)` given precomputed dominant witnesses.
pub fn gamma_k_with<M: GroupModel>(
    model: &M,
    f: &M::Element,
    g: &M::Element,
    k: i64,
    witness: DominantWitness,
    settings: &GrowthSettings,
) -> Result<i64> {
    if k < 1 {
        return Err(Error::InvalidParameter(format!("k must be positive, got {k}")));
    }
    let lo_bound = -k * witness.q;
    let mut hi = k * witness.q_prime;

    // f^{k q'} >= g^k holds in theory; the oracle may still fail to certify a
    // tight comparison, in which case larger exponents only add margin.
    let mut step = hi.abs().max(1);
    loop {
        let v = model.dominates_powers(f, hi, g, k);
        if v.is_yes() {
            break;
        }
        hi += step;
        step = step.saturating_mul(2);
        if hi > settings.p_max {
            return Err(inconclusive(hi, k, &v));
        }
    }

    let v = model.dominates_powers(f, lo_bound, g, k);
    match v.verdict {
        Verdict::Yes => return Ok(lo_bound),
        Verdict::Inconclusive => return Err(inconclusive(lo_bound, k, &v)),
        Verdict::No => {}
    }
    let mut lo = lo_bound;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let v = model.dominates_powers(f, mid, g, k);
        match v.verdict {
            Verdict::Yes => hi = mid,
            Verdict::No => lo = mid,
            Verdict::Inconclusive => return Err(inconclusive(mid, k, &v)),
        }
    }
    Ok(hi)
}

/// `γ_k(f, g)`: the least integer `p` with `f^p >= g^k`.
pub fn gamma_k<M: GroupModel>(
    model: &M,
    f: &M::Element,
    g: &M::Element,
    k: i64,
    settings: &GrowthSettings,
) -> Result<i64> {
    let w = dominant_witness(model, f, g, settings)?;
    gamma_k_with(model, f, g, k, w, settings)
}

/// Finite-horizon data for the relative growth `γ(f, g)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    /// `γ_k` for `k = 1..=horizon`.
    pub gammas: Vec<i64>,
    /// `min_k γ_k / k`, an upper bound of `γ(f, g)`.
    pub upper_envelope: f64,
    /// `γ_K / K`, the reported point estimate.
    pub trend: f64,
    pub horizon: usize,
    pub q_used: i64,
}

impl GrowthEstimate {
    pub fn from_gammas(gammas: Vec<i64>, q_used: i64) -> Self {
        let horizon = gammas.len();
        let upper_envelope = gammas
            .iter()
            .enumerate()
            .map(|(i, &g)| g as f64 / (i + 1) as f64)
            .fold(f64::INFINITY, f64::min);
        let trend = gammas.last().map_or(f64::NAN, |&g| g as f64 / horizon as f64);
        Self {
            gammas,
            upper_envelope,
            trend,
            horizon,
            q_used,
        }
    }

    /// `γ_k` (1-based).
    pub fn gamma(&self, k: usize) -> i64 {
        self.gammas[k - 1]
    }

    /// Largest `γ_{m+n} - γ_m - γ_n` over the computed range; `<= 0` for a
    /// subadditive sequence.
    pub fn max_subadditivity_excess(&self) -> i64 {
        let k_max = self.horizon;
        let mut worst = i64::MIN;
        for m in 1..k_max {
            for n in 1..=(k_max - m).min(m) {
                worst = worst.max(self.gamma(m + n) - self.gamma(m) - self.gamma(n));
            }
        }
        worst
    }

    /// Whether `γ_k >= -k q` holds for every computed `k`.
    pub fn respects_lower_bound(&self) -> bool {
        self.gammas
            .iter()
            .enumerate()
            .all(|(i, &g)| g >= -((i + 1) as i64) * self.q_used)
    }

    /// The envelope after only the first `k` terms.
    pub fn envelope_at(&self, k: usize) -> f64 {
        self.gammas[..k]
            .iter()
            .enumerate()
            .map(|(i, &g)| g as f64 / (i + 1) as f64)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Compute `γ_1..γ_K` for the pair and summarize.
pub fn relative_growth<M: GroupModel>(
    model: &M,
    f: &M::Element,
    g: &M::Element,
    horizon: usize,
    settings: &GrowthSettings,
) -> Result<GrowthEstimate> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let w = dominant_witness(model, f, g, settings)?;
    let gammas = (1..=horizon as i64)
        .into_par_iter()
        .map(|k| gamma_k_with(model, f, g, k, w, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(GrowthEstimate::from_gammas(gammas, w.q))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    /// `max(log γ(f,g), log γ(g,f))` from the trend estimates.
    pub value: f64,
    /// The same expression on the upper envelopes; an upper bound of κ.
    pub certified_upper: f64,
    pub forward: GrowthEstimate,
    pub backward: GrowthEstimate,
}

/// The pseudo-distance `κ(f, g) = max(log γ(f,g), log γ(g,f))` between two
/// dominants.
pub fn kappa<M: GroupModel>(
    model: &M,
    f: &M::Element,
    g: &M::Element,
    horizon: usize,
    settings: &GrowthSettings,
    tolerance: f64,
) -> Result<KappaEstimate> {
    let forward = relative_growth(model, f, g, horizon, settings)?;
    let backward = relative_growth(model, g, f, horizon, settings)?;
    let value = forward.trend.ln().max(backward.trend.ln());
    let certified_upper = forward.upper_envelope.ln().max(backward.upper_envelope.ln());
    if value.is_nan() || value < -tolerance {
        return Err(Error::NegativeUnderTolerance { value, tolerance });
    }
    Ok(KappaEstimate {
        value,
        certified_upper,
        forward,
        backward,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    /// Cone membership `s >= 1` of each sample.
    pub membership: Vec<Verdict>,
    pub report: Report,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

/// Test the normal-cone axioms on the given samples: the identity lies in
/// the cone, products of members are members, and conjugates of members by
/// any sample are members.
pub fn check_cone_axioms<M: GroupModel>(model: &M, samples: &[M::Element]) -> AxiomReport {
    let id = model.identity();
    let mut report = Report::default();
    let record = |report: &mut Report, name: String, v: OrderVerdict| match v.verdict {
        Verdict::Inconclusive => report.note(format!("{name}: inconclusive (margin {:e})", v.margin)),
        _ => report.push(Record::new(name, None, v.margin, 0.0, v.is_yes())),
    };

    record(&mut report, "identity_in_cone".into(), model.dominates(&id, &id));

    let membership: Vec<Verdict> = samples
        .iter()
        .map(|s| model.dominates(s, &id).verdict)
        .collect();
    let members: Vec<usize> = (0..samples.len())
        .filter(|&i| membership[i] == Verdict::Yes)
        .collect();
    for (i, m) in membership.iter().enumerate() {
        if *m != Verdict::Yes {
            report.note(format!("sample {i}: membership {m:?}, closure tests skipped"));
        }
    }

    for &i in &members {
        for &j in &members {
            let prod = model.multiply(&samples[i], &samples[j]);
            record(
                &mut report,
                format!("product_closure[{i},{j}]"),
                model.dominates(&prod, &id),
            );
        }
        for (j, h) in samples.iter().enumerate() {
            let c = model.conjugate(h, &samples[i]);
            record(
                &mut report,
                format!("conjugation[{i} by {j}]"),
                model.dominates(&c, &id),
            );
        }
    }
    AxiomReport { membership, report }
}

/// Central elements used by [`check_growth_inequalities`]; they must commute
/// with everything in the group.
pub struct CentralPair<'a, E> {
    pub e1: &'a E,
    pub e2: &'a E,
}

/// Check, at every finite `k <= horizon`:
///
/// * `γ_k(f,g) γ_k(g,f) >= k²`;
/// * `γ_k(f,h) <= γ_m(f,g)` with `m = γ_k(g,h)` (finite triangle form), and
///   the triangle inequality on trend estimates within `tolerance`;
/// * `γ_k(f, e1 e2) <= γ_k(f, e1) + γ_k(f, e2)` for central `e1, e2`;
/// * subadditivity of the computed `γ_k(f, g)` sequence.
#[allow(clippy::too_many_arguments)]
pub fn check_growth_inequalities<M: GroupModel>(
    model: &M,
    f: &M::Element,
    g: &M::Element,
    h: &M::Element,
    central: CentralPair<'_, M::Element>,
    horizon: usize,
    settings: &GrowthSettings,
    tolerance: f64,
) -> Result<Report> {
    let mut report = Report::default();
    let fg = relative_growth(model, f, g, horizon, settings)?;
    let gf = relative_growth(model, g, f, horizon, settings)?;
    for k in 1..=horizon {
        let lhs = fg.gamma(k) as i128 * gf.gamma(k) as i128;
        let rhs = (k * k) as i128;
        report.push(Record::new(
            "product_bound",
            Some(k as i64),
            lhs as f64,
            rhs as f64,
            lhs >= rhs,
        ));
    }
    report.push(Record::le(
        "subadditivity(f,g)",
        None,
        fg.max_subadditivity_excess() as f64,
        0.0,
        0.0,
    ));

    let fh = relative_growth(model, f, h, horizon, settings)?;
    let gh = relative_growth(model, g, h, horizon, settings)?;
    let w_fg = dominant_witness(model, f, g, settings)?;
    for k in 1..=horizon {
        let m = gh.gamma(k);
        let rhs = if m >= 1 {
            gamma_k_with(model, f, g, m, w_fg, settings)?
        } else {
            0
        };
        let lhs = fh.gamma(k);
        report.push(Record::new(
            "triangle_finite",
            Some(k as i64),
            lhs as f64,
            rhs as f64,
            lhs <= rhs,
        ));
    }
    report.push(Record::le(
        "triangle_trend",
        Some(horizon as i64),
        fh.trend,
        fg.trend * gh.trend,
        tolerance,
    ));

    let e12 = model.multiply(central.e1, central.e2);
    let a = relative_growth(model, f, &e12, horizon, settings)?;
    let b1 = relative_growth(model, f, central.e1, horizon, settings)?;
    let b2 = relative_growth(model, f, central.e2, horizon, settings)?;
    for k in 1..=horizon {
        let lhs = a.gamma(k);
        let rhs = b1.gamma(k) + b2.gamma(k);
        report.push(Record::new(
            "central_subadditivity",
            Some(k as i64),
            lhs as f64,
            rhs as f64,
            lhs <= rhs,
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The integers under addition with the cone of nonnegative numbers:
    /// comparisons are exact and every positive element is a dominant.
    struct Integers;

    impl GroupModel for Integers {
        type Element = i64;
        fn identity(&self) -> i64 {
            0
        }
        fn multiply(&self, f: &i64, g: &i64) -> i64 {
            f + g
        }
        fn invert(&self, f: &i64) -> i64 {
            -f
        }
        fn dominates(&self, f: &i64, g: &i64) -> OrderVerdict {
            if f >= g {
                OrderVerdict::yes((f - g) as f64, 1)
            } else {
                OrderVerdict::no(vec![], (f - g) as f64, 1)
            }
        }
    }

    /// A model that never answers.
    struct Mute;

    impl GroupModel for Mute {
        type Element = i64;
        fn identity(&self) -> i64 {
            0
        }
        fn multiply(&self, f: &i64, g: &i64) -> i64 {
            f + g
        }
        fn invert(&self, f: &i64) -> i64 {
            -f
        }
        fn dominates(&self, f: &i64, g: &i64) -> OrderVerdict {
            if f == g {
                OrderVerdict::yes(0.0, 1)
            } else {
                OrderVerdict::inconclusive(0.0, 1)
            }
        }
    }

    fn ceil_div(a: i64, b: i64) -> i64 {
        -((-a).div_euclid(b))
    }

    #[test]
    fn integer_gamma_is_ceiling_ratio() {
        let s = GrowthSettings::default();
        for f in 1..6 {
            for g in -7..8 {
                for k in 1..10 {
                    let got = gamma_k(&Integers, &f, &g, k, &s).unwrap();
                    assert_eq!(got, ceil_div(k * g, f), "f={f} g={g} k={k}");
                }
            }
        }
    }

    #[test]
    fn default_power_matches_repeated_product() {
        assert_eq!(Integers.power(&3, 5), 15);
        assert_eq!(Integers.power(&3, -4), -12);
        assert_eq!(Integers.power(&3, 0), 0);
    }

    #[test]
    fn identity_is_not_a_growth_base() {
        let s = GrowthSettings { q_max: 50, ..Default::default() };
        // 0 is in the cone but not a dominant: no witness for g = 1.
        assert!(matches!(
            gamma_k(&Integers, &0, &1, 1, &s),
            Err(Error::DominantWitnessNotFound { .. })
        ));
        assert!(matches!(
            gamma_k(&Integers, &-1, &1, 1, &s),
            Err(Error::HypothesisFailed(_))
        ));
    }

    #[test]
    fn inconclusive_oracle_aborts_search() {
        let s = GrowthSettings { q_max: 5, p_max: 100 };
        let err = gamma_k(&Mute, &2, &3, 1, &s).unwrap_err();
        assert!(
            matches!(err, Error::DominantWitnessNotFound { .. } | Error::OrderInconclusive { .. }),
            "{err}"
        );
    }

    #[test]
    fn relative_growth_envelope_and_trend() {
        let s = GrowthSettings::default();
        let est = relative_growth(&Integers, &3, &2, 30, &s).unwrap();
        assert_eq!(est.gammas[0], 1);
        assert_eq!(est.trend, 20.0 / 30.0);
        assert!(est.upper_envelope >= 2.0 / 3.0);
        assert!(est.max_subadditivity_excess() <= 0);
        assert!(est.respects_lower_bound());
    }

    #[test]
    fn kappa_of_identical_elements_is_zero() {
        let s = GrowthSettings::default();
        let k = kappa(&Integers, &4, &4, 10, &s, 1e-12).unwrap();
        assert_eq!(k.value, 0.0);
    }

    #[test]
    fn axioms_hold_for_integers() {
        let r = check_cone_axioms(&Integers, &[0, 1, 5, -2]);
        assert!(r.passed());
        assert_eq!(r.membership[3], Verdict::No);
        assert!(check_cone_axioms(&Integers, &[]).passed());
    }

    #[test]
    fn growth_inequalities_for_integers() {
        let s = GrowthSettings::default();
        let r = check_growth_inequalities(
            &Integers,
            &3,
            &5,
            &7,
            CentralPair { e1: &1, e2: &2 },
            20,
            &s,
            0.2,
        )
        .unwrap();
        assert!(r.passed(), "{:?}", r.violations().collect::<Vec<_>>());
    }

    proptest::proptest! {
        #[test]
        fn product_bound_holds(f in 1i64..20, g in 1i64..20, k in 1i64..40) {
            let s = GrowthSettings::default();
            let a = gamma_k(&Integers, &f, &g, k, &s).unwrap();
            let b = gamma_k(&Integers, &g, &f, k, &s).unwrap();
            proptest::prop_assert!(a * b >= k * k);
        }
    }
}
