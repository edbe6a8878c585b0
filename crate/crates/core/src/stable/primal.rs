use super::metric::TorusMetric;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

/// Search boxes above this many nodes are refused.
const MAX_BOX_NODES: usize = 200_000_000;

/// Neighbour offsets of the lattice graph: all primitive integer vectors of
/// sup-norm at most `radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stencil {
    pub radius: i64,
    pub vectors: Vec<Vec<i64>>,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Stencil {
    pub fn primitive(dim: usize, radius: i64) -> Result<Self> {
        if dim == 0 || radius < 1 {
            return Err(Error::InvalidParameter(format!(
                "stencil needs dim >= 1 and radius >= 1 (got {dim}, {radius})"
            )));
        }
        let side = 2 * radius + 1;
        let mut vectors = Vec::new();
        let mut v = vec![0i64; dim];
        for idx in 0..side.pow(dim as u32) {
            let mut r = idx;
            for c in v.iter_mut() {
                *c = r % side - radius;
                r /= side;
            }
            if v.iter().fold(0, |g, &c| gcd(g, c)) == 1 {
                vectors.push(v.clone());
            }
        }
        Ok(Self { radius, vectors })
    }

    /// Radius 3 (32 offsets) in the plane, radius 1 (26 offsets) otherwise.
    pub fn default_for(dim: usize) -> Self {
        let radius = if dim == 2 { 3 } else { 1 };
        Self::primitive(dim, radius).expect("valid default stencil")
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Worst relative excess of a stencil path over the straight segment, for
/// stencil vectors already mapped to Euclidean coordinates.
///
/// In the plane a direction between consecutive stencil directions at angle
/// `θ` costs at most `1/cos(θ/2)` times its length. In higher dimensions the
/// excess is estimated on a Fibonacci sample of directions, using the cheapest
/// nonnegative combination of three stencil vectors.
fn anisotropy(vectors: &[Vec<f64>]) -> f64 {
    let dim = vectors[0].len();
    if dim == 1 {
        return 0.0;
    }
    if dim == 2 {
        let mut angles: Vec<f64> = vectors.iter().map(|v| v[1].atan2(v[0])).collect();
        angles.sort_by(f64::total_cmp);
        let mut gap = angles[0] + std::f64::consts::TAU - angles[angles.len() - 1];
        for w in angles.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        return 1.0 / (0.5 * gap).cos() - 1.0;
    }
    let vs: Vec<Vector3<f64>> = vectors
        .iter()
        .map(|v| Vector3::new(v[0], v[1], v.get(2).copied().unwrap_or(0.0)))
        .collect();
    let samples = 1500;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut worst = 0.0f64;
    for i in 0..samples {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / samples as f64;
        let r = (1.0 - z * z).sqrt();
        let t = golden * i as f64;
        let u = Vector3::new(r * t.cos(), r * t.sin(), z);
        let mut best = f64::INFINITY;
        for a in 0..vs.len() {
            if vs[a].dot(&u) <= 0.0 {
                continue;
            }
            for b in (a + 1)..vs.len() {
                for c in (b + 1)..vs.len() {
                    let m = Matrix3::from_columns(&[vs[a], vs[b], vs[c]]);
                    if let Some(x) = m.lu().solve(&u) {
                        if x.iter().all(|&w| w >= -1e-12) {
                            let cost = x[0] * vs[a].norm() + x[1] * vs[b].norm() + x[2] * vs[c].norm();
                            best = best.min(cost);
                        }
                    }
                }
            }
        }
        worst = worst.max(best - 1.0);
    }
    worst
}

fn mapped_stencil(stencil: &Stencil, g: &DMatrix<f64>) -> Vec<Vec<f64>> {
    // |s|_g = |Lᵀ s| for g = L Lᵀ.
    let l = g.clone().cholesky().expect("positive definite").l();
    stencil
        .vectors
        .iter()
        .map(|s| {
            let v = nalgebra::DVector::from_iterator(s.len(), s.iter().map(|&x| x as f64));
            (l.transpose() * v).iter().copied().collect()
        })
        .collect()
}

/// Relative slack of the stencil for `metric`: the worst-case ratio of the
/// shortest stencil path to the straight segment, minus one.
pub fn stencil_slack(metric: &TorusMetric, stencil: &Stencil, resolution: usize) -> f64 {
    let dim = metric.dim();
    if let Some(g) = metric.constant_matrix() {
        return anisotropy(&mapped_stencil(stencil, g));
    }
    if metric.is_conformal() {
        let as_f64: Vec<Vec<f64>> = stencil
            .vectors
            .iter()
            .map(|s| s.iter().map(|&x| x as f64).collect())
            .collect();
        return anisotropy(&as_f64);
    }
    // General tables: worst node in the plane, most anisotropic node otherwise.
    let nodes = resolution.pow(dim as u32);
    let point = |idx: usize| -> Vec<f64> {
        (0..dim)
            .map(|i| ((idx / resolution.pow(i as u32)) % resolution) as f64 / resolution as f64)
            .collect()
    };
    if dim == 2 {
        (0..nodes)
            .into_par_iter()
            .map(|i| anisotropy(&mapped_stencil(stencil, &metric.tensor(&point(i)))))
            .reduce(|| 0.0, f64::max)
    } else {
        let cond = |i: usize| {
            let ev = metric.tensor(&point(i)).symmetric_eigen().eigenvalues;
            ev.max() / ev.min()
        };
        let worst = (0..nodes)
            .max_by(|&a, &b| cond(a).total_cmp(&cond(b)))
            .unwrap_or(0);
        anisotropy(&mapped_stencil(stencil, &metric.tensor(&point(worst))))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimalSettings {
    /// Grid nodes per unit length on each axis.
    pub resolution: usize,
    /// Stencil sup-norm radius; `None` picks the default for the dimension.
    pub stencil_radius: Option<i64>,
}

impl PrimalSettings {
    pub fn new(resolution: usize) -> Self {
        Self {
            resolution,
            stencil_radius: None,
        }
    }
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn atomic_min(cell: &AtomicU64, v: f64) {
    let mut cur = cell.load(AtomicOrdering::Relaxed);
    while v < f64::from_bits(cur) {
        match cell.compare_exchange_weak(cur, v.to_bits(), AtomicOrdering::Relaxed, AtomicOrdering::Relaxed) {
            Ok(_) => break,
            Err(actual) => cur = actual,
        }
    }
}

/// The lifted grid graph: nodes `ℤⁿ`, node `z` at `z/R`, edges along
/// stencil offsets weighted by the metric length of the straight segment
/// evaluated at its midpoint.
struct LatticeGraph<'a> {
    metric: &'a TorusMetric,
    dim: usize,
    r: usize,
    stencil: Stencil,
    /// `weights[node_mod_R * S + s]`, or just `weights[s]` for flat metrics.
    weights: Vec<f64>,
    flat: bool,
    c_low: f64,
    g_inv_chol: Option<DMatrix<f64>>,
}

impl<'a> LatticeGraph<'a> {
    fn new(metric: &'a TorusMetric, settings: &PrimalSettings) -> Result<Self> {
        let dim = metric.dim();
        let r = settings.resolution;
        if r < 2 {
            return Err(Error::ResolutionTooCoarse { resolution: r });
        }
        let stencil = match settings.stencil_radius {
            Some(rad) => Stencil::primitive(dim, rad)?,
            None => Stencil::default_for(dim),
        };
        let rf = r as f64;
        let flat = metric.is_flat();
        let seg = |base: &[f64], s: &[i64]| {
            let mid: Vec<f64> = base.iter().zip(s).map(|(b, &x)| b + 0.5 * x as f64 / rf).collect();
            let v: Vec<f64> = s.iter().map(|&x| x as f64 / rf).collect();
            metric.length(&mid, &v)
        };
        let weights = if flat {
            let zero = vec![0.0; dim];
            stencil.vectors.iter().map(|s| seg(&zero, s)).collect()
        } else {
            let nodes = r.pow(dim as u32);
            (0..nodes)
                .into_par_iter()
                .flat_map_iter(|idx| {
                    let base: Vec<f64> = (0..dim)
                        .map(|i| ((idx / r.pow(i as u32)) % r) as f64 / rf)
                        .collect();
                    stencil.vectors.iter().map(move |s| seg(&base, s)).collect::<Vec<_>>()
                })
                .collect()
        };
        let g_inv_chol = metric
            .constant_matrix()
            .map(|g| g.clone().cholesky().expect("positive definite").l().transpose());
        Ok(Self {
            metric,
            dim,
            r,
            stencil,
            weights,
            flat,
            c_low: metric.lower_conformal_bound(),
            g_inv_chol,
        })
    }

    fn weight(&self, z: &[i64], s: usize) -> f64 {
        if self.flat {
            return self.weights[s];
        }
        let mut idx = 0;
        let mut stride = 1;
        for &c in z {
            idx += c.rem_euclid(self.r as i64) as usize * stride;
            stride *= self.r;
        }
        self.weights[idx * self.stencil.len() + s]
    }

    /// Admissible and consistent lower bound on the distance between nodes.
    fn heuristic(&self, from: &[i64], to: &[i64]) -> f64 {
        let d: Vec<f64> = from.iter().zip(to).map(|(a, b)| (b - a) as f64).collect();
        let rf = self.r as f64;
        match &self.g_inv_chol {
            Some(lt) => {
                let v = nalgebra::DVector::from_column_slice(&d);
                (lt * v).norm() / rf
            }
            None => self.c_low * d.iter().map(|x| x * x).sum::<f64>().sqrt() / rf,
        }
    }

    /// Cost of the king-move path from `s` to `t`; an upper bound.
    fn king_path(&self, s: &[i64], t: &[i64]) -> f64 {
        let mut v = s.to_vec();
        let mut total = 0.0;
        loop {
            let step: Vec<i64> = v.iter().zip(t).map(|(a, b)| (b - a).signum()).collect();
            if step.iter().all(|&x| x == 0) {
                return total;
            }
            let si = self
                .stencil
                .vectors
                .iter()
                .position(|x| *x == step)
                .expect("unit steps are primitive");
            total += self.weight(&v, si);
            for (a, d) in v.iter_mut().zip(&step) {
                *a += d;
            }
        }
    }

    /// A* from `s` to `t` pruned at `min(upper, best)`; returns the distance if
    /// it is below the bound.
    fn search(&self, s: &[i64], t: &[i64], upper: f64, best: &AtomicU64) -> Result<Option<f64>> {
        let dim = self.dim;
        let rf = self.r as f64;
        let bound0 = upper.min(f64::from_bits(best.load(AtomicOrdering::Relaxed)));
        // Every node on a path of length <= bound lies in the ellipsoid with
        // foci s, t and Euclidean sum bound·R/c.
        let c = match &self.g_inv_chol {
            Some(_) => self
                .metric
                .constant_matrix()
                .map(|g| g.clone().symmetric_eigen().eigenvalues.min().sqrt())
                .unwrap_or(self.c_low),
            None => self.c_low,
        };
        let sum = bound0 * rf / c * (1.0 + 1e-9) + 1.0;
        let d: Vec<f64> = s.iter().zip(t).map(|(a, b)| (b - a) as f64).collect();
        let dist = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a = 0.5 * sum;
        let b2 = (a * a - 0.25 * dist * dist).max(0.0);
        let mut lo = vec![0i64; dim];
        let mut ext = vec![0usize; dim];
        for i in 0..dim {
            let di = if dist > 0.0 { d[i] / dist } else { 0.0 };
            let half = (a * a * di * di + b2 * (1.0 - di * di)).sqrt();
            let center = 0.5 * (s[i] + t[i]) as f64;
            lo[i] = (center - half).floor() as i64 - 1;
            let hi = (center + half).ceil() as i64 + 1;
            ext[i] = (hi - lo[i] + 1) as usize;
        }
        let volume = ext.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e));
        let volume = match volume {
            Some(v) if v <= MAX_BOX_NODES => v,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "search box {ext:?} exceeds {MAX_BOX_NODES} nodes; lower the resolution or horizon"
                )))
            }
        };
        let encode = |v: &[i64]| -> Option<usize> {
            let mut idx = 0;
            let mut stride = 1;
            for i in 0..dim {
                let c = v[i] - lo[i];
                if c < 0 || c as usize >= ext[i] {
                    return None;
                }
                idx += c as usize * stride;
                stride *= ext[i];
            }
            Some(idx)
        };
        let decode = |mut idx: usize, out: &mut [i64]| {
            for i in 0..dim {
                out[i] = (idx % ext[i]) as i64 + lo[i];
                idx /= ext[i];
            }
        };
        let (Some(si), Some(ti)) = (encode(s), encode(t)) else {
            return Ok(None);
        };
        let mut gdist = vec![f64::INFINITY; volume];
        let mut heap = BinaryHeap::new();
        gdist[si] = 0.0;
        heap.push(Entry {
            f: self.heuristic(s, t),
            g: 0.0,
            idx: si,
        });
        let mut v = vec![0i64; dim];
        let mut w = vec![0i64; dim];
        let mut pops = 0usize;
        let mut bound = bound0;
        while let Some(Entry { g, idx, .. }) = heap.pop() {
            if g > gdist[idx] {
                continue;
            }
            if idx == ti {
                return Ok(Some(g));
            }
            pops += 1;
            if pops % 4096 == 0 {
                bound = bound.min(f64::from_bits(best.load(AtomicOrdering::Relaxed)));
            }
            decode(idx, &mut v);
            for (k, sv) in self.stencil.vectors.iter().enumerate() {
                for i in 0..dim {
                    w[i] = v[i] + sv[i];
                }
                let Some(j) = encode(&w) else { continue };
                let ng = g + self.weight(&v, k);
                if ng >= gdist[j] {
                    continue;
                }
                let f = ng + self.heuristic(&w, t);
                if f > bound * (1.0 + 1e-12) {
                    continue;
                }
                gdist[j] = ng;
                heap.push(Entry { f, g: ng, idx: j });
            }
        }
        Ok(None)
    }
}

/// Start nodes that meet every closed loop in a class with `e[j] != 0`, up to
/// the symmetries of the metric: one window of stencil width along a slab
/// axis, the origin along invariant axes, and the full period elsewhere.
fn start_nodes(metric: &TorusMetric, e: &[i64], r: usize, radius: i64) -> Vec<Vec<i64>> {
    let inv = metric.invariant_axes();
    let dim = e.len();
    let slab = (0..dim)
        .filter(|&j| e[j] != 0)
        .max_by_key(|&j| (inv[j], std::cmp::Reverse(j)))
        .expect("nonzero class");
    let ranges: Vec<i64> = (0..dim)
        .map(|i| {
            if inv[i] {
                1
            } else if i == slab {
                radius.min(r as i64)
            } else {
                r as i64
            }
        })
        .collect();
    let total: i64 = ranges.iter().product();
    (0..total)
        .map(|mut idx| {
            ranges
                .iter()
                .map(|&n| {
                    let c = idx % n;
                    idx /= n;
                    c
                })
                .collect()
        })
        .collect()
}

/// `l(ke)`: the shortest closed lattice loop in the class `k e`, minimized
/// over start nodes. Converges from above as the resolution grows, up to
/// the stencil and quadrature slack.
pub fn loop_length(metric: &TorusMetric, e: &[i64], k: i64, settings: &PrimalSettings) -> Result<f64> {
    let graph = LatticeGraph::new(metric, settings)?;
    loop_length_on(&graph, e, k)
}

fn loop_length_on(graph: &LatticeGraph<'_>, e: &[i64], k: i64) -> Result<f64> {
    if e.len() != graph.dim {
        return Err(Error::DimensionMismatch {
            expected: graph.dim,
            found: e.len(),
        });
    }
    if e.iter().all(|&x| x == 0) || k < 1 {
        return Err(Error::ZeroClass);
    }
    let r = graph.r as i64;
    let offset: Vec<i64> = e.iter().map(|&x| x * k * r).collect();
    let mut starts: Vec<(f64, Vec<i64>)> = start_nodes(graph.metric, e, graph.r, graph.stencil.radius)
        .into_iter()
        .map(|s| {
            let t: Vec<i64> = s.iter().zip(&offset).map(|(a, b)| a + b).collect();
            (graph.king_path(&s, &t), s)
        })
        .collect();
    starts.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let best = AtomicU64::new(starts[0].0.to_bits());
    starts
        .par_iter()
        .map(|(upper, s)| -> Result<()> {
            let t: Vec<i64> = s.iter().zip(&offset).map(|(a, b)| a + b).collect();
            if let Some(d) = graph.search(s, &t, *upper, &best)? {
                atomic_min(&best, d);
            }
            Ok(())
        })
        .collect::<Result<()>>()?;
    let out = f64::from_bits(best.load(AtomicOrdering::Relaxed));
    if !out.is_finite() {
        return Err(Error::ResolutionTooCoarse {
            resolution: graph.r,
        });
    }
    Ok(out)
}

/// Convenience form of [`loop_length`] for `k = 1`.
pub fn loop_length_min(metric: &TorusMetric, e: &[i64], resolution: usize) -> Result<f64> {
    loop_length(metric, e, 1, &PrimalSettings::new(resolution))
}

/// Primal estimate of the stable norm `‖e‖ = lim l(ke)/k = inf l(ke)/k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub e: Vec<i64>,
    /// `l(ke)/k` for `k = 1..=K`.
    pub sequence: Vec<f64>,
    /// `min_k l(ke)/k`, the reported estimate.
    pub envelope: f64,
    pub resolution: usize,
    pub stencil_size: usize,
    /// Relative excess of stencil paths over straight segments.
    pub stencil_slack: f64,
    /// Relative midpoint-rule error bound of edge weights.
    pub quadrature_slack: f64,
    /// Combined relative slack `(1 + stencil)(1 + quadrature) - 1`.
    pub slack: f64,
}

impl NormEstimate {
    /// Largest `l((m+n)e) - l(me) - l(ne)` over the computed range.
    pub fn max_subadditivity_excess(&self) -> f64 {
        let l = |k: usize| self.sequence[k - 1] * k as f64;
        let kmax = self.sequence.len();
        let mut worst = f64::NEG_INFINITY;
        for m in 1..kmax {
            for n in 1..=(kmax - m).min(m) {
                worst = worst.max(l(m + n) - l(m) - l(n));
            }
        }
        worst
    }
}

pub fn stable_norm_primal(
    metric: &TorusMetric,
    e: &[i64],
    horizon: usize,
    settings: &PrimalSettings,
) -> Result<NormEstimate> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let graph = LatticeGraph::new(metric, settings)?;
    let sequence = (1..=horizon as i64)
        .map(|k| loop_length_on(&graph, e, k).map(|l| l / k as f64))
        .collect::<Result<Vec<_>>>()?;
    let envelope = sequence.iter().copied().fold(f64::INFINITY, f64::min);
    let stencil_slack = stencil_slack(metric, &graph.stencil, settings.resolution);
    let ell = graph.stencil.radius as f64 * (metric.dim() as f64).sqrt() / settings.resolution as f64;
    let quadrature_slack = metric.quadrature_slack(ell);
    Ok(NormEstimate {
        e: e.to_vec(),
        sequence,
        envelope,
        resolution: settings.resolution,
        stencil_size: graph.stencil.len(),
        stencil_slack,
        quadrature_slack,
        slack: (1.0 + stencil_slack) * (1.0 + quadrature_slack) - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_sizes() {
        assert_eq!(Stencil::primitive(2, 1).unwrap().len(), 8);
        assert_eq!(Stencil::primitive(2, 2).unwrap().len(), 16);
        assert_eq!(Stencil::primitive(2, 3).unwrap().len(), 32);
        assert_eq!(Stencil::primitive(3, 1).unwrap().len(), 26);
    }

    #[test]
    fn planar_anisotropy_of_radius_two_stencil() {
        // The widest gap of the radius-2 stencil is between (1,0) and (2,1).
        let s = Stencil::primitive(2, 2).unwrap();
        let v: Vec<Vec<f64>> = s.vectors.iter().map(|x| vec![x[0] as f64, x[1] as f64]).collect();
        let expected = 1.0 / (0.5 * 0.5f64.atan()).cos() - 1.0;
        assert!((anisotropy(&v) - expected).abs() < 1e-12);
    }

    #[test]
    fn flat_unit_classes() {
        let m = TorusMetric::euclidean(2);
        assert!((loop_length_min(&m, &[1, 0], 16).unwrap() - 1.0).abs() < 1e-12);
        let d = loop_length_min(&m, &[1, 1], 64).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(loop_length_min(&m, &[0, 0], 16), Err(Error::ZeroClass)));
    }

    #[test]
    fn flat_path_matches_best_stencil_decomposition() {
        // (3,4) = (2,3) + (1,1) with the radius-3 stencil.
        let m = TorusMetric::euclidean(2);
        let d = loop_length_min(&m, &[3, 4], 8).unwrap();
        let oracle = 8.0 * (13f64.sqrt() + 2f64.sqrt()) / 8.0;
        assert!((d - oracle).abs() < 1e-9, "{d} vs {oracle}");
    }

    #[test]
    fn conformal_vertical_class() {
        let m = TorusMetric::conformal_cosine(2, 0.3, 0).unwrap();
        let est = stable_norm_primal(&m, &[0, 1], 3, &PrimalSettings::new(32)).unwrap();
        for v in &est.sequence {
            assert!((v - 0.7).abs() < 1e-12, "{v}");
        }
        assert!(est.max_subadditivity_excess() <= 1e-12);
    }

    #[test]
    fn conformal_horizontal_class_is_mean_of_lambda() {
        // Horizontal loops have length ∫ λ = 1 for every height.
        let m = TorusMetric::conformal_cosine(2, 0.3, 0).unwrap();
        let d = loop_length_min(&m, &[1, 0], 64).unwrap();
        assert!((d - 1.0).abs() < 1e-3, "{d}");
    }

    #[test]
    fn three_dimensional_flat() {
        let m = TorusMetric::euclidean(3);
        let d = loop_length_min(&m, &[1, 1, 0], 8).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }
}
