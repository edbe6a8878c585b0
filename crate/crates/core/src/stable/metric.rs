use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Read;

/// Catalogue of metrics that can be declared in a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean { dim: usize },
    Constant { matrix: Vec<Vec<f64>> },
    /// `λ(q)² Id` with `λ(q) = 1 + amplitude · cos(2π q[axis])`.
    ConformalCosine { dim: usize, amplitude: f64, axis: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Field {
    Constant(DMatrix<f64>),
    Conformal { amplitude: f64, axis: usize },
    /// Node values on a periodic `R^n` grid, interpolated multilinearly.
    Table {
        resolution: usize,
        nodes: Vec<DMatrix<f64>>,
        inverses: Vec<DMatrix<f64>>,
    },
}

/// A periodic Riemannian metric on `Tⁿ = ℝⁿ/ℤⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusMetric {
    dim: usize,
    field: Field,
}

fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InvalidMetric(format!("{what} is not symmetric")));
    }
    let lo = m.clone().symmetric_eigen().eigenvalues.min();
    if !(lo > 0.0) {
        return Err(Error::InvalidMetric(format!(
            "{what} is not positive definite (smallest eigenvalue {lo})"
        )));
    }
    Ok(lo)
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidMetric("matrix must be square and nonempty".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl TorusMetric {
    pub fn from_spec(spec: &MetricSpec) -> Result<Self> {
        match spec {
            MetricSpec::Euclidean { dim } => Self::constant(DMatrix::identity(*dim, *dim)),
            MetricSpec::Constant { matrix } => Self::constant(to_matrix(matrix)?),
            MetricSpec::ConformalCosine {
                dim,
                amplitude,
                axis,
            } => Self::conformal_cosine(*dim, *amplitude, *axis),
        }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self {
            dim,
            field: Field::Constant(DMatrix::identity(dim, dim)),
        }
    }

    pub fn constant(g: DMatrix<f64>) -> Result<Self> {
        if !g.is_square() || g.nrows() == 0 {
            return Err(Error::InvalidMetric("matrix must be square and nonempty".into()));
        }
        check_spd(&g, "metric matrix")?;
        Ok(Self {
            dim: g.nrows(),
            field: Field::Constant(g),
        })
    }

    pub fn conformal_cosine(dim: usize, amplitude: f64, axis: usize) -> Result<Self> {
        if dim == 0 || axis >= dim {
            return Err(Error::InvalidMetric(format!("axis {axis} out of range for dimension {dim}")));
        }
        if !(amplitude.abs() < 1.0) {
            return Err(Error::InvalidMetric(format!(
                "conformal amplitude {amplitude} must satisfy |A| < 1"
            )));
        }
        Ok(Self {
            dim,
            field: Field::Conformal { amplitude, axis },
        })
    }

    /// Metric given by its values at the nodes `i/R` of a periodic grid,
    /// listed with the first coordinate varying fastest.
    pub fn table(dim: usize, resolution: usize, nodes: Vec<DMatrix<f64>>) -> Result<Self> {
        if dim == 0 || resolution == 0 || nodes.len() != resolution.pow(dim as u32) {
            return Err(Error::InvalidMetric(format!(
                "table needs {}^{} nodes, got {}",
                resolution,
                dim,
                nodes.len()
            )));
        }
        for (i, m) in nodes.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.nrows(),
                });
            }
            check_spd(m, &format!("node {i}"))?;
        }
        let inverses = nodes
            .iter()
            .map(|m| m.clone().try_inverse().expect("positive definite"))
            .collect();
        Ok(Self {
            dim,
            field: Field::Table {
                resolution,
                nodes,
                inverses,
            },
        })
    }

    /// Read a table from CSV with header `q1..qn, g11, g12, …, gnn` (row-major
    /// matrix entries). Node coordinates must be multiples of `1/R`.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let cols = r.headers()?.len();
        let dim = (1..=4)
            .find(|d| d + d * d == cols)
            .ok_or_else(|| Error::InvalidMetric(format!("cannot infer dimension from {cols} columns")))?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let nums = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidMetric(format!("bad number {s:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(nums);
        }
        let resolution = (rows.len() as f64).powf(1.0 / dim as f64).round() as usize;
        if resolution.pow(dim as u32) != rows.len() {
            return Err(Error::InvalidMetric(format!(
                "{} rows do not form an R^{dim} grid",
                rows.len()
            )));
        }
        let mut nodes = vec![None; rows.len()];
        for row in rows {
            let mut idx = 0;
            let mut stride = 1;
            for &q in &row[..dim] {
                let i = q * resolution as f64;
                let ir = i.round();
                if (i - ir).abs() > 1e-9 || ir < 0.0 || ir >= resolution as f64 {
                    return Err(Error::InvalidMetric(format!("coordinate {q} is not a node of the 1/{resolution} grid")));
                }
                idx += ir as usize * stride;
                stride *= resolution;
            }
            let m = DMatrix::from_row_slice(dim, dim, &row[dim..]);
            if nodes[idx].replace(m).is_some() {
                return Err(Error::InvalidMetric(format!("duplicate node {idx}")));
            }
        }
        let nodes = nodes
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidMetric("missing nodes".into()))?;
        Self::table(dim, resolution, nodes)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The matrix when the metric is translation invariant.
    pub fn constant_matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.field {
            Field::Constant(g) => Some(g),
            _ => None,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.field, Field::Constant(_))
    }

    /// Whether `g(q)` is a multiple of the identity at every point.
    pub fn is_conformal(&self) -> bool {
        match &self.field {
            Field::Constant(g) => (g - DMatrix::identity(self.dim, self.dim) * g[(0, 0)]).amax() == 0.0,
            Field::Conformal { .. } => true,
            Field::Table { .. } => false,
        }
    }

    /// Axes along which the metric is invariant under translation.
    pub fn invariant_axes(&self) -> Vec<bool> {
        match &self.field {
            Field::Constant(_) => vec![true; self.dim],
            Field::Conformal { axis, .. } => (0..self.dim).map(|i| i != *axis).collect(),
            Field::Table { .. } => vec![false; self.dim],
        }
    }

    /// `g(q)`.
    pub fn tensor(&self, q: &[f64]) -> DMatrix<f64> {
        match &self.field {
            Field::Constant(g) => g.clone(),
            Field::Conformal { amplitude, axis } => {
                let l = 1.0 + amplitude * (TAU * q[*axis]).cos();
                DMatrix::identity(self.dim, self.dim) * (l * l)
            }
            Field::Table {
                resolution, nodes, ..
            } => {
                let mut out = DMatrix::zeros(self.dim, self.dim);
                self.for_corners(*resolution, q, |idx, w| out += &nodes[idx] * w);
                out
            }
        }
    }

    fn for_corners(&self, resolution: usize, q: &[f64], mut f: impl FnMut(usize, f64)) {
        let r = resolution as f64;
        let base: Vec<f64> = q.iter().map(|x| (x * r).floor()).collect();
        let frac: Vec<f64> = q.iter().zip(&base).map(|(x, b)| x * r - b).collect();
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut idx = 0;
            let mut stride = 1;
            for i in 0..self.dim {
                let bit = (corner >> i) & 1;
                w *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
                let c = (base[i] as i64 + bit as i64).rem_euclid(resolution as i64) as usize;
                idx += c * stride;
                stride *= resolution;
            }
            if w != 0.0 {
                f(idx, w);
            }
        }
    }

    /// `|v|_{g(q)}`.
    pub fn length(&self, q: &[f64], v: &[f64]) -> f64 {
        match &self.field {
            Field::Conformal { amplitude, axis } => {
                let l = 1.0 + amplitude * (TAU * q[*axis]).cos();
                l * v.iter().map(|x| x * x).sum::<f64>().sqrt()
            }
            _ => {
                let g = self.tensor(q);
                let v = nalgebra::DVector::from_column_slice(v);
                v.dot(&(&g * &v)).max(0.0).sqrt()
            }
        }
    }

    /// `c` with `g(q) >= c² Id` everywhere.
    pub fn lower_conformal_bound(&self) -> f64 {
        match &self.field {
            Field::Constant(g) => g.clone().symmetric_eigen().eigenvalues.min().sqrt(),
            Field::Conformal { amplitude, .. } => 1.0 - amplitude.abs(),
            // The smallest eigenvalue is concave in the matrix, so the corner
            // minimum bounds every interpolated value.
            Field::Table { nodes, .. } => nodes
                .iter()
                .map(|m| m.clone().symmetric_eigen().eigenvalues.min())
                .fold(f64::INFINITY, f64::min)
                .sqrt(),
        }
    }

    /// Matrices `M_j` with `|α|²_{g*(q)} <= max_j αᵀ M_j α` for every `q` in the
    /// grid cell with lower corner `z/R`.
    pub(crate) fn cell_dual_bounds(&self, z: &[usize], resolution: usize) -> Vec<DMatrix<f64>> {
        match &self.field {
            Field::Constant(g) => vec![g.clone().try_inverse().expect("positive definite")],
            Field::Conformal { amplitude, axis } => {
                let r = resolution as f64;
                let lo = z[*axis] as f64 / r;
                let hi = (z[*axis] + 1) as f64 / r;
                let lmin = 1.0 + amplitude * cos_extreme(lo, hi, amplitude.signum());
                vec![DMatrix::identity(self.dim, self.dim) / (lmin * lmin)]
            }
            Field::Table {
                resolution: t,
                inverses,
                ..
            } => {
                // α ↦ αᵀ g⁻¹ α is convex in g, and interpolated tensors are
                // convex combinations of the table nodes around them, so the
                // maximum over a cell is attained at one of those nodes.
                let (r, tf) = (resolution as f64, *t as f64);
                let ranges: Vec<(i64, i64)> = (0..self.dim)
                    .map(|i| {
                        let lo = (z[i] as f64 / r * tf).floor() as i64;
                        let hi = ((z[i] + 1) as f64 / r * tf).ceil() as i64;
                        (lo, hi)
                    })
                    .collect();
                let mut seen: Vec<usize> = Vec::new();
                let mut c: Vec<i64> = ranges.iter().map(|r| r.0).collect();
                loop {
                    let mut idx = 0;
                    let mut stride = 1;
                    for &ci in &c {
                        idx += ci.rem_euclid(*t as i64) as usize * stride;
                        stride *= *t;
                    }
                    if !seen.contains(&idx) {
                        seen.push(idx);
                    }
                    let mut i = 0;
                    loop {
                        if i == self.dim {
                            return seen.into_iter().map(|k| inverses[k].clone()).collect();
                        }
                        c[i] += 1;
                        if c[i] <= ranges[i].1 {
                            break;
                        }
                        c[i] = ranges[i].0;
                        i += 1;
                    }
                }
            }
        }
    }

    /// Bound on the relative midpoint-rule error of segment lengths for
    /// segments of Euclidean length at most `ell`.
    pub(crate) fn quadrature_slack(&self, ell: f64) -> f64 {
        match &self.field {
            Field::Constant(_) => 0.0,
            Field::Conformal { amplitude, .. } => {
                // |∫λ - ℓ λ(mid)| <= max|λ''| ℓ³/24 and λ >= 1 - |A|.
                amplitude.abs() * TAU * TAU * ell * ell / (24.0 * (1.0 - amplitude.abs()))
            }
            Field::Table {
                resolution, nodes, ..
            } => {
                // Second differences of node entries estimate the curvature of g.
                let r = *resolution;
                let h = 1.0 / r as f64;
                let mut second = 0.0f64;
                for axis in 0..self.dim {
                    let stride = r.pow(axis as u32);
                    for idx in 0..nodes.len() {
                        let coord = (idx / stride) % r;
                        let up = idx - coord * stride + ((coord + 1) % r) * stride;
                        let dn = idx - coord * stride + ((coord + r - 1) % r) * stride;
                        let d2 = (&nodes[up] - &nodes[idx] * 2.0 + &nodes[dn]).amax() / (h * h);
                        second = second.max(d2);
                    }
                }
                let c2 = self.lower_conformal_bound().powi(2);
                // |v|_g = sqrt(vᵀgv); relative curvature of the length is at most
                // |g''| / (2 λmin).
                second * ell * ell / (48.0 * c2)
            }
        }
    }
}

/// The extreme of `cos(2πx)` over `[lo, hi]`: minimum for `sign >= 0`,
/// maximum otherwise.
fn cos_extreme(lo: f64, hi: f64, sign: f64) -> f64 {
    let (a, b) = ((TAU * lo).cos(), (TAU * hi).cos());
    if sign >= 0.0 {
        // Minimum at odd multiples of π inside the interval.
        let k = ((lo - 0.5).ceil()) as i64;
        if (k as f64 + 0.5) <= hi {
            return -1.0;
        }
        a.min(b)
    } else {
        let k = lo.ceil() as i64;
        if (k as f64) <= hi {
            return 1.0;
        }
        a.max(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conformal_lengths_and_bounds() {
        let m = TorusMetric::conformal_cosine(2, 0.3, 0).unwrap();
        assert!((m.length(&[0.5, 0.2], &[0.0, 1.0]) - 0.7).abs() < 1e-15);
        assert!((m.length(&[0.0, 0.9], &[3.0, 4.0]) - 6.5).abs() < 1e-12);
        assert!((m.lower_conformal_bound() - 0.7).abs() < 1e-15);
        assert_eq!(m.invariant_axes(), vec![false, true]);
        assert!(TorusMetric::conformal_cosine(2, 1.0, 0).is_err());
    }

    #[test]
    fn cell_bound_uses_cell_minimum_of_lambda() {
        let m = TorusMetric::conformal_cosine(2, 0.3, 0).unwrap();
        let b = m.cell_dual_bounds(&[63, 5], 128);
        assert!((b[0][(0, 0)] - 1.0 / 0.49).abs() < 1e-12);
        let b = m.cell_dual_bounds(&[0, 5], 128);
        let l = 1.0 + 0.3 * (TAU / 128.0).cos();
        assert!((b[0][(0, 0)] - 1.0 / (l * l)).abs() < 1e-12);
    }

    #[test]
    fn table_round_trip_and_interpolation() {
        let r = 4;
        let mut csv = String::from("q1,q2,g11,g12,g21,g22\n");
        for j in 0..r {
            for i in 0..r {
                let s = 1.0 + 0.1 * i as f64;
                csv.push_str(&format!("{},{},{s},0,0,{s}\n", i as f64 / r as f64, j as f64 / r as f64));
            }
        }
        let m = TorusMetric::from_csv(csv.as_bytes()).unwrap();
        let g = m.tensor(&[0.125, 0.3]);
        assert!((g[(0, 0)] - 1.05).abs() < 1e-12);
        // Wraps periodically between the last and first node.
        let g = m.tensor(&[0.875, 0.0]);
        assert!((g[(0, 0)] - 0.5 * (1.3 + 1.0)).abs() < 1e-12);
        assert!(TorusMetric::from_csv("q1,q2,g11,g12,g21,g22\n0,0,1,2,2,1\n".as_bytes()).is_err());
    }

    #[test]
    fn spec_json_shapes() {
        let s: MetricSpec =
            serde_json::from_str(r#"{"kind":"conformal_cosine","dim":2,"amplitude":0.3,"axis":0}"#).unwrap();
        assert!(!TorusMetric::from_spec(&s).unwrap().is_flat());
        let s: MetricSpec = serde_json::from_str(r#"{"kind":"constant","matrix":[[4,0],[0,1]]}"#).unwrap();
        assert!(TorusMetric::from_spec(&s).unwrap().is_flat());
        assert!(serde_json::from_str::<MetricSpec>(r#"{"kind":"euclidean","dim":2,"time":1}"#).is_err());
    }
}
