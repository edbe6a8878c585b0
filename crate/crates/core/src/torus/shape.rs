use super::hamiltonian::HomogeneousHamiltonian;
use super::sphere::SphereGrid;
use super::TorusGroup;
use crate::error::{Error, Result};
use crate::order::{GroupModel, Verdict};
use crate::report::{Record, Report};
use serde::{Deserialize, Serialize};

/// `(r₋(a, f), r₊(a, f))` for a nonzero class `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeValues {
    pub a: Vec<f64>,
    pub r_minus: f64,
    pub r_plus: f64,
}

/// For the time-one map of an autonomous `p`-only Hamiltonian the split
/// domains `{r + F ≥ 0}` and `{r + F ≤ 0}` have shapes bounded by the graph
/// `b = -F(a)`, so `r₋(a, f) = r₊(a, f) = F(a)`.
pub fn shape_values(a: &[f64], f: &HomogeneousHamiltonian) -> Result<ShapeValues> {
    if a.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroClass);
    }
    let v = f.eval(a)?;
    Ok(ShapeValues {
        a: a.to_vec(),
        r_minus: v,
        r_plus: v,
    })
}

/// Whether `(a, b)` lies in the shape of `{r + F ≥ 0}`.
pub fn in_shape_plus(a: &[f64], b: f64, f: &HomogeneousHamiltonian) -> Result<bool> {
    Ok(b + f.eval(a)? >= 0.0)
}

/// Whether `(a, b)` lies in the shape of `{r + F ≤ 0}`.
pub fn in_shape_minus(a: &[f64], b: f64, f: &HomogeneousHamiltonian) -> Result<bool> {
    Ok(b + f.eval(a)? <= 0.0)
}

/// A contactomorphism of `T*Tⁿ × S¹` preserving the momentum coordinate:
/// the cotangent lift of the shift `q ↦ q + t`, or the time-`s` flow of a
/// `p`-only Hamiltonian `H`, which moves `q` by `s ∇H(p)`.
#[derive(Clone, Debug)]
pub enum MomentumPreserving {
    Shift(Vec<f64>),
    Flow { h: HomogeneousHamiltonian, time: f64 },
}

impl MomentumPreserving {
    /// Image of the inverse map on `(q, p)`.
    pub fn inverse_apply(&self, q: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            Self::Shift(t) => (q.iter().zip(t).map(|(x, s)| x - s).collect(), p.to_vec()),
            Self::Flow { h, time } => {
                let eps = 1e-7;
                let grad: Vec<f64> = (0..p.len())
                    .map(|i| {
                        let mut hi = p.to_vec();
                        let mut lo = p.to_vec();
                        hi[i] += eps;
                        lo[i] -= eps;
                        (h.eval_unchecked(&hi) - h.eval_unchecked(&lo)) / (2.0 * eps)
                    })
                    .collect();
                (
                    q.iter().zip(&grad).map(|(x, g)| x - time * g).collect(),
                    p.to_vec(),
                )
            }
        }
    }

    /// Shape value of the conjugate `h f h⁻¹`, whose Hamiltonian is `F ∘ h⁻¹`,
    /// at the class `a` seen from base point `q`.
    pub fn conjugate_shape(&self, f: &HomogeneousHamiltonian, q: &[f64], a: &[f64]) -> Result<f64> {
        let (_, p) = self.inverse_apply(q, a);
        f.eval(&p)
    }
}

fn exact(report: &mut Report, name: &str, k: Option<i64>, lhs: f64, rhs: f64) {
    report.push(Record::new(name, k, lhs, rhs, lhs == rhs));
}

/// Check the properties of `r±` in the autonomous model:
///
/// 1. `(a, b)` lies in the `+` shape for `b > -r₋` and in the `-` shape for `b < -r₊`;
/// 2. `r₊ ≥ r₋`;
/// 3. `r±(a, 1) = 0`;
/// 4. `f ≥ g ⟹ r±(a, f) ≥ r±(a, g)`, with the order decided on `grid`;
/// 5. `r₋(a, fᵏ) ≥ k r₋(a, f)` and `r₊(a, fᵏ) ≤ k r₊(a, f)`;
/// 6. `r₊(a, f⁻¹) = -r₋(a, f)`;
/// 7. `r±(ca, f) = c r±(a, f)`, up to rounding of `F(ca)` against `c F(a)`;
/// 8. `r±(a, h f h⁻¹) = r±(a, f)` for momentum-preserving `h`.
pub fn check_shape_properties(
    f: &HomogeneousHamiltonian,
    g: &HomogeneousHamiltonian,
    a: &[f64],
    c: f64,
    k: u32,
    grid: &SphereGrid,
) -> Result<Report> {
    if !(c > 0.0) || k == 0 {
        return Err(Error::InvalidParameter(format!(
            "need c > 0 and k >= 1, got c = {c}, k = {k}"
        )));
    }
    let mut report = Report::default();
    let sf = shape_values(a, f)?;
    let sg = shape_values(a, g)?;
    let scale = sf.r_plus.abs().max(1.0);

    for delta in [1e-6 * scale, 1.0] {
        let b_in = -sf.r_minus + delta;
        report.push(Record::new(
            "shape_plus_membership",
            None,
            b_in,
            -sf.r_minus,
            in_shape_plus(a, b_in, f)?,
        ));
        let b_in = -sf.r_plus - delta;
        report.push(Record::new(
            "shape_minus_membership",
            None,
            b_in,
            -sf.r_plus,
            in_shape_minus(a, b_in, f)?,
        ));
    }

    report.push(Record::ge("r_plus_ge_r_minus", None, sf.r_plus, sf.r_minus, 0.0));

    let id = shape_values(a, &HomogeneousHamiltonian::zero(f.dim()))?;
    exact(&mut report, "normalization_r_minus", None, id.r_minus, 0.0);
    exact(&mut report, "normalization_r_plus", None, id.r_plus, 0.0);

    let model = TorusGroup::new(&[f.clone(), g.clone()], grid.clone(), 0.0)?;
    let order = model.dominates(&model.generator(0), &model.generator(1));
    match order.verdict {
        Verdict::Yes => {
            report.push(Record::ge("monotonicity_r_minus", None, sf.r_minus, sg.r_minus, 0.0));
            report.push(Record::ge("monotonicity_r_plus", None, sf.r_plus, sg.r_plus, 0.0));
        }
        v => report.note(format!("monotonicity vacuous: F >= G is {v:?}")),
    }

    let fk = shape_values(a, &f.scaled(k as f64))?;
    let kk = Some(k as i64);
    report.push(Record::ge("iteration_r_minus", kk, fk.r_minus, k as f64 * sf.r_minus, 0.0));
    report.push(Record::le("iteration_r_plus", kk, fk.r_plus, k as f64 * sf.r_plus, 0.0));

    let inv = shape_values(a, &f.scaled(-1.0))?;
    exact(&mut report, "inverse", None, inv.r_plus, -sf.r_minus);

    let ca: Vec<f64> = a.iter().map(|x| c * x).collect();
    let sc = shape_values(&ca, f)?;
    let tol = 8.0 * f64::EPSILON * (c * scale);
    report.push(Record::close("homogeneity_r_minus", None, sc.r_minus, c * sf.r_minus, tol));
    report.push(Record::close("homogeneity_r_plus", None, sc.r_plus, c * sf.r_plus, tol));

    let q: Vec<f64> = (0..f.dim()).map(|i| 0.1 + 0.23 * i as f64).collect();
    let shift = MomentumPreserving::Shift((0..f.dim()).map(|i| 0.37 + 0.11 * i as f64).collect());
    let flow = MomentumPreserving::Flow {
        h: g.clone(),
        time: 0.5,
    };
    for (name, h) in [("conjugation_shift", shift), ("conjugation_flow", flow)] {
        exact(&mut report, name, None, h.conjugate_shape(f, &q, a)?, sf.r_plus);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_examples() {
        assert_eq!(shape_values(&[1.0, 2.0], &HomogeneousHamiltonian::zero(2)).unwrap().r_plus, 0.0);
        let e = HomogeneousHamiltonian::euclidean(2);
        assert_eq!(shape_values(&[3.0, 4.0], &e).unwrap().r_minus, 5.0);
        let lin = HomogeneousHamiltonian::linear(vec![1.0, 0.0]).unwrap();
        assert_eq!(shape_values(&[2.0, 0.0], &lin).unwrap().r_plus, 2.0);
        assert!(matches!(shape_values(&[0.0, 0.0], &e), Err(Error::ZeroClass)));
    }

    #[test]
    fn iterate_scale_and_inverse_values() {
        let e = HomogeneousHamiltonian::euclidean(2);
        assert_eq!(shape_values(&[1.0, 0.0], &e.scaled(3.0)).unwrap().r_plus, 3.0);
        assert_eq!(shape_values(&[2.5, 0.0], &e).unwrap().r_plus, 2.5);
        assert_eq!(shape_values(&[0.0, 1.0], &e.scaled(-1.0)).unwrap().r_plus, -1.0);
    }

    #[test]
    fn all_properties_hold_for_a_dominated_pair() {
        let f = HomogeneousHamiltonian::weighted(vec![vec![2.0, 0.2], vec![0.2, 1.0]]).unwrap();
        let e = HomogeneousHamiltonian::euclidean(2);
        let g = HomogeneousHamiltonian::combination(&[(1.0, &f), (-0.3, &e)]).unwrap();
        let grid = SphereGrid::circle(512).unwrap();
        let r = check_shape_properties(&f, &g, &[0.3, -1.2], 2.5, 3, &grid).unwrap();
        assert!(r.passed(), "{:?}", r.violations().collect::<Vec<_>>());
        assert!(r.notes.is_empty());
        assert!(r.records.iter().any(|x| x.name == "monotonicity_r_plus"));
    }
}
