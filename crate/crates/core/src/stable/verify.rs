use super::dual::{dual_lower_bound, DualEstimate, DualSettings};
use super::metric::TorusMetric;
use super::primal::{stable_norm_primal, NormEstimate, PrimalSettings};
use crate::error::{Error, Result};
use crate::report::{Record, Report};
use crate::torus::{gamma_torus, HomogeneousHamiltonian, SphereGrid, TorusGrowth};
use serde::{Deserialize, Serialize};

/// Relative agreement required between the flat-torus values of `‖e‖`.
pub const FLAT_AGREEMENT: f64 = 0.01;

/// Mather's minimal action `β(e) = ½‖e‖²` from the primal estimate.
pub fn mather_beta(metric: &TorusMetric, e: &[i64], horizon: usize, resolution: usize) -> Result<f64> {
    let est = stable_norm_primal(metric, e, horizon, &PrimalSettings::new(resolution))?;
    Ok(BetaEstimate::from_norm(&est).beta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub e: Vec<i64>,
    pub beta: f64,
    /// `β((1 + s)² − 1)` for the relative primal slack `s`.
    pub tolerance: f64,
    pub norm: f64,
}

impl BetaEstimate {
    pub fn from_norm(est: &NormEstimate) -> Self {
        let beta = 0.5 * est.envelope * est.envelope;
        Self {
            e: est.e.clone(),
            beta,
            tolerance: beta * ((1.0 + est.slack).powi(2) - 1.0),
            norm: est.envelope,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Flat,
    NonFlat,
}

/// Outcome of comparing relative growth with the stable norm for the flow
/// of `F(p) = |p|_{g*}` against the class `e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthNormReport {
    pub branch: Branch,
    pub e: Vec<i64>,
    pub epsilon: f64,
    pub primal: NormEstimate,
    pub dual: DualEstimate,
    pub dual_lower_bound: f64,
    /// `γ(f, e)` from the sphere grid, flat branch only.
    pub gamma: Option<TorusGrowth>,
    /// `⟨a, e⟩ / ((1 + ε) max|α|)`, a lower bound for `γ(f, e)`.
    pub gamma_lower_bound: f64,
    pub report: Report,
}

/// Compare `γ(f, e)` with `‖e‖`.
///
/// For a constant metric `g`, `γ` is computed on the sphere grid with
/// `F(p) = |p|_{g*}` and `G(p) = ⟨p, e⟩`, and the primal, dual and growth
/// values of `‖e‖` must agree to [`FLAT_AGREEMENT`]. Otherwise `γ` is only
/// bounded from below by the best grid form `α`, and the bound must not
/// exceed the primal norm plus its slack.
pub fn verify_growth_bound(
    metric: &TorusMetric,
    e: &[i64],
    epsilon: f64,
    horizon: usize,
    resolution: usize,
) -> Result<GrowthNormReport> {
    if e.len() != metric.dim() {
        return Err(Error::DimensionMismatch {
            expected: metric.dim(),
            found: e.len(),
        });
    }
    if e.iter().all(|&x| x == 0) {
        return Err(Error::ZeroClass);
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let primal = stable_norm_primal(metric, e, horizon, &PrimalSettings::new(resolution))?;
    let dual = dual_lower_bound(metric, e, &DualSettings::new(resolution))?;
    let lower = dual.lower_bound(e);
    let gamma_lower_bound = lower / (1.0 + epsilon);
    let mut report = Report::default();
    let norm = primal.envelope;

    report.push(Record::le(
        "dual_le_primal",
        None,
        lower,
        norm * (1.0 + primal.slack),
        0.0,
    ));
    report.push(Record::le(
        "primal_subadditivity",
        None,
        primal.max_subadditivity_excess(),
        0.0,
        primal.slack * norm * horizon as f64,
    ));

    let (branch, gamma) = match metric.constant_matrix() {
        Some(g) => {
            let rows: Vec<Vec<f64>> = (0..g.nrows()).map(|i| g.row(i).iter().copied().collect()).collect();
            let f = HomogeneousHamiltonian::dual_metric_norm(&rows)?;
            let lin = HomogeneousHamiltonian::linear(e.iter().map(|&x| x as f64).collect())?;
            let grid = SphereGrid::default_for(metric.dim())?;
            let growth = gamma_torus(&f, &lin, &grid)?;
            let gv = growth.refined.unwrap_or(growth.value);
            let tol = FLAT_AGREEMENT * norm;
            report.push(Record::close("gamma_eq_primal", None, gv, norm, tol));
            report.push(Record::close("gamma_eq_dual", None, gv, lower, tol));
            report.push(Record::close("primal_eq_dual", None, norm, lower, tol));
            report.push(Record::ge("gamma_ge_bound", None, growth.upper, gamma_lower_bound, 0.0));
            (Branch::Flat, Some(growth))
        }
        None => {
            report.note("gamma is not computable for this metric; reported as >= the lower bound");
            (Branch::NonFlat, None)
        }
    };
    report.push(Record::le(
        "bound_le_primal",
        None,
        gamma_lower_bound,
        norm * (1.0 + primal.slack),
        0.0,
    ));

    Ok(GrowthNormReport {
        branch,
        e: e.to_vec(),
        epsilon,
        primal,
        dual,
        dual_lower_bound: lower,
        gamma,
        gamma_lower_bound,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_values() {
        let m = TorusMetric::euclidean(2);
        assert!((mather_beta(&m, &[1, 0], 2, 16).unwrap() - 0.5).abs() < 1e-12);
        // At R = 8 the shortest stencil path for (3,4) is (2,3) + (1,1).
        let l = 13f64.sqrt() + 2f64.sqrt();
        assert!((mather_beta(&m, &[3, 4], 1, 8).unwrap() - 0.5 * l * l).abs() < 1e-9);
    }

    #[test]
    fn flat_weighted_branch() {
        let g = nalgebra::DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let m = TorusMetric::constant(g).unwrap();
        let r = verify_growth_bound(&m, &[1, 0], 0.0, 2, 16).unwrap();
        assert_eq!(r.branch, Branch::Flat);
        assert!(r.report.passed(), "{:?}", r.report);
        assert!((r.gamma.unwrap().refined.unwrap() - 2.0).abs() < 1e-9);
    }
}
