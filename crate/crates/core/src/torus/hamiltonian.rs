use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// One summand of a [`HamiltonianExpr::Combination`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coef: f64,
    pub of: HamiltonianExpr,
}

/// Closed-form degree-1 homogeneous functions of `p` alone.
///
/// Every catalogue entry satisfies `F(cp) = c F(p)` for `c > 0` by
/// construction. Nothing in the catalogue depends on position or time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianExpr {
    /// `|p|₂`.
    EuclideanNorm,
    /// `⟨p, e⟩`.
    Linear { e: Vec<f64> },
    /// `sqrt(pᵀ A p)` for a symmetric positive-definite `A`.
    WeightedNorm { matrix: Vec<Vec<f64>> },
    Scale { factor: f64, of: Box<HamiltonianExpr> },
    Combination { terms: Vec<Term> },
    /// `max(F, 0)`.
    PositivePart { of: Box<HamiltonianExpr> },
    Zero,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn symmetric_spectrum(matrix: &[Vec<f64>], dim: usize) -> Result<(f64, f64)> {
    if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: matrix.len(),
        });
    }
    let m = DMatrix::from_fn(dim, dim, |i, j| matrix[i][j]);
    if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InvalidHamiltonian("weighted_norm matrix is not symmetric".into()));
    }
    let eig = m.symmetric_eigen().eigenvalues;
    let lo = eig.min();
    let hi = eig.max();
    if !(lo > 0.0) {
        return Err(Error::InvalidHamiltonian(format!(
            "weighted_norm matrix is not positive definite (smallest eigenvalue {lo})"
        )));
    }
    Ok((lo, hi))
}

impl HamiltonianExpr {
    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            Self::EuclideanNorm => norm(p),
            Self::Linear { e } => dot(p, e),
            Self::WeightedNorm { matrix } => {
                let q: f64 = matrix.iter().zip(p).map(|(row, pi)| pi * dot(row, p)).sum();
                q.max(0.0).sqrt()
            }
            Self::Scale { factor, of } => factor * of.eval(p),
            Self::Combination { terms } => terms.iter().map(|t| t.coef * t.of.eval(p)).sum(),
            Self::PositivePart { of } => of.eval(p).max(0.0),
            Self::Zero => 0.0,
        }
    }

    /// Check parameters against dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::EuclideanNorm | Self::Zero => Ok(()),
            Self::Linear { e } => {
                if e.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: e.len(),
                    });
                }
                if e.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidHamiltonian("non-finite linear coefficient".into()));
                }
                Ok(())
            }
            Self::WeightedNorm { matrix } => symmetric_spectrum(matrix, dim).map(|_| ()),
            Self::Scale { factor, of } => {
                if !factor.is_finite() {
                    return Err(Error::InvalidHamiltonian("non-finite scale factor".into()));
                }
                of.validate(dim)
            }
            Self::Combination { terms } => terms.iter().try_for_each(|t| {
                if !t.coef.is_finite() {
                    return Err(Error::InvalidHamiltonian("non-finite coefficient".into()));
                }
                t.of.validate(dim)
            }),
            Self::PositivePart { of } => of.validate(dim),
        }
    }

    /// Lipschitz constant of the restriction to the unit sphere with respect
    /// to great-circle distance, from bounds on the tangential gradient.
    pub fn sphere_lipschitz(&self, dim: usize) -> Result<f64> {
        Ok(match self {
            Self::EuclideanNorm | Self::Zero => 0.0,
            Self::Linear { e } => norm(e),
            Self::WeightedNorm { matrix } => {
                // |∇_T F|² = |Ap|²/F² - F² <= λmax - λmin on the sphere.
                let (lo, hi) = symmetric_spectrum(matrix, dim)?;
                (hi - lo).max(0.0).sqrt()
            }
            Self::Scale { factor, of } => factor.abs() * of.sphere_lipschitz(dim)?,
            Self::Combination { terms } => {
                let mut l = 0.0;
                for t in terms {
                    l += t.coef.abs() * t.of.sphere_lipschitz(dim)?;
                }
                l
            }
            Self::PositivePart { of } => of.sphere_lipschitz(dim)?,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHamiltonian {
    dim: usize,
    expr: HamiltonianExpr,
}

/// An autonomous, position-independent contact Hamiltonian `F(p)` on
/// `T*Tⁿ`, homogeneous of degree 1 in `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHamiltonian")]
pub struct HomogeneousHamiltonian {
    dim: usize,
    expr: HamiltonianExpr,
}

impl TryFrom<RawHamiltonian> for HomogeneousHamiltonian {
    type Error = Error;
    fn try_from(raw: RawHamiltonian) -> Result<Self> {
        Self::new(raw.dim, raw.expr)
    }
}

impl HomogeneousHamiltonian {
    pub fn new(dim: usize, expr: HamiltonianExpr) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidHamiltonian("dimension must be positive".into()));
        }
        expr.validate(dim)?;
        Ok(Self { dim, expr })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self {
            dim,
            expr: HamiltonianExpr::EuclideanNorm,
        }
    }

    pub fn linear(e: Vec<f64>) -> Result<Self> {
        Self::new(e.len(), HamiltonianExpr::Linear { e })
    }

    pub fn weighted(matrix: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(matrix.len(), HamiltonianExpr::WeightedNorm { matrix })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            expr: HamiltonianExpr::Zero,
        }
    }

    /// `|p|` in the dual metric `g⁻¹` of a constant metric `g`.
    pub fn dual_metric_norm(g: &[Vec<f64>]) -> Result<Self> {
        let n = g.len();
        let m = DMatrix::from_fn(n, n, |i, j| g.get(i).and_then(|r| r.get(j)).copied().unwrap_or(f64::NAN));
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::InvalidHamiltonian("singular metric matrix".into()))?;
        let rows = (0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect();
        Self::weighted(rows)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            expr: HamiltonianExpr::Scale {
                factor,
                of: Box::new(self.expr.clone()),
            },
        }
    }

    /// `Σ cᵢ Fᵢ`; all summands must share a dimension.
    pub fn combination(terms: &[(f64, &HomogeneousHamiltonian)]) -> Result<Self> {
        let dim = terms.first().map_or(0, |t| t.1.dim);
        let mut out = Vec::with_capacity(terms.len());
        for (c, h) in terms {
            if h.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: h.dim,
                });
            }
            out.push(Term {
                coef: *c,
                of: h.expr.clone(),
            });
        }
        Self::new(dim, HamiltonianExpr::Combination { terms: out })
    }

    pub fn positive_part(&self) -> Self {
        Self {
            dim: self.dim,
            expr: HamiltonianExpr::PositivePart {
                of: Box::new(self.expr.clone()),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn expr(&self) -> &HamiltonianExpr {
        &self.expr
    }

    /// `F(p)` for any `p`, extended homogeneously off the sphere.
    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.len(),
            });
        }
        Ok(self.expr.eval(p))
    }

    pub(crate) fn eval_unchecked(&self, p: &[f64]) -> f64 {
        self.expr.eval(p)
    }

    pub fn sphere_lipschitz(&self) -> f64 {
        self.expr
            .sphere_lipschitz(self.dim)
            .expect("validated at construction")
    }
}

/// `⟨a, e⟩`.
pub(crate) fn pairing(a: &[f64], e: &[f64]) -> f64 {
    dot(a, e)
}
