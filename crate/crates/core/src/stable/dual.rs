use super::metric::TorusMetric;
use crate::error::{Error, Result};
use crate::torus::pairing;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualSettings {
    /// Potential grid nodes per unit length on each axis.
    pub resolution: usize,
    /// Budget of cyclic coordinate sweeps.
    pub sweeps: usize,
    /// Budget of gradient steps on the smoothed maximum.
    pub smoothing_steps: usize,
}

impl DualSettings {
    pub fn new(resolution: usize) -> Self {
        Self {
            resolution,
            sweeps: 20,
            smoothing_steps: 3000,
        }
    }
}

/// Result of minimizing `max_x |a + df|_{g*}` over piecewise-linear periodic
/// potentials `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualEstimate {
    pub a: Vec<f64>,
    /// Achieved maximum: an upper bound of the dual norm `‖a‖*`.
    pub value: f64,
    /// The value at `f = 0`.
    pub initial: f64,
    /// Set when the budget produced no improvement over `f = 0`; `value` is
    /// then the `f = 0` value, still a valid upper bound.
    pub no_descent: bool,
    pub resolution: usize,
}

impl DualEstimate {
    /// `⟨a, e⟩ / value`, a lower bound of the stable norm `‖e‖`.
    pub fn lower_bound(&self, e: &[i64]) -> f64 {
        let ef: Vec<f64> = e.iter().map(|&x| x as f64).collect();
        pairing(&self.a, &ef) / self.value
    }
}

/// Kuhn triangulation of the periodic grid with per-cell bounds of the dual
/// metric. Each cube `z` is split into `n!` simplices, one per permutation
/// `π`, with vertices `z, z + e_{π1}, z + e_{π1} + e_{π2}, …`.
struct DualProblem {
    dim: usize,
    r: usize,
    a: Vec<f64>,
    perms: Vec<Vec<usize>>,
    /// Flattened `n×n` matrices; cube `c` uses `pool[cube_mats[c].0 .. .1]`.
    pool: Vec<f64>,
    cube_mats: Vec<(usize, usize)>,
    /// For each corner offset `o` of a cube, the permutations whose simplex
    /// contains that corner.
    corner_perms: Vec<Vec<usize>>,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

impl DualProblem {
    fn new(metric: &TorusMetric, a: &[f64], r: usize) -> Result<Self> {
        let dim = metric.dim();
        let nodes = r.pow(dim as u32);
        let mut pool = Vec::new();
        let mut cube_mats = Vec::with_capacity(nodes);
        let shared = metric.is_flat();
        for c in 0..nodes {
            if shared && c > 0 {
                cube_mats.push(cube_mats[0]);
                continue;
            }
            let z: Vec<usize> = (0..dim).map(|i| (c / r.pow(i as u32)) % r).collect();
            let start = pool.len() / (dim * dim);
            let mats = metric.cell_dual_bounds(&z, r);
            for m in &mats {
                for i in 0..dim {
                    for j in 0..dim {
                        pool.push(m[(i, j)]);
                    }
                }
            }
            cube_mats.push((start, start + mats.len()));
        }
        let perms = permutations(dim);
        let corner_perms = (0..(1usize << dim))
            .map(|o| {
                let j = o.count_ones() as usize;
                (0..perms.len())
                    .filter(|&p| perms[p][..j].iter().all(|&ax| (o >> ax) & 1 == 1))
                    .collect()
            })
            .collect();
        Ok(Self {
            dim,
            r,
            a: a.to_vec(),
            perms,
            pool,
            cube_mats,
            corner_perms,
        })
    }

    fn nodes(&self) -> usize {
        self.r.pow(self.dim as u32)
    }

    fn node_index(&self, z: &[i64]) -> usize {
        let r = self.r as i64;
        let mut idx = 0;
        let mut stride = 1;
        for &c in z {
            idx += c.rem_euclid(r) as usize * stride;
            stride *= self.r;
        }
        idx
    }

    fn coords(&self, idx: usize) -> Vec<i64> {
        (0..self.dim)
            .map(|i| ((idx / self.r.pow(i as u32)) % self.r) as i64)
            .collect()
    }

    /// Vertex node indices of simplex `p` in cube `cube`.
    fn simplex(&self, cube: usize, p: usize, out: &mut Vec<usize>) {
        out.clear();
        let mut z = self.coords(cube);
        out.push(self.node_index(&z));
        for &ax in &self.perms[p] {
            z[ax] += 1;
            out.push(self.node_index(&z));
        }
    }

    /// `(cost, active matrix)` of the form `a + df` on a simplex.
    fn cost(&self, cube: usize, p: usize, verts: &[usize], u: &[f64], alpha: &mut [f64]) -> (f64, usize) {
        let rf = self.r as f64;
        let perm = &self.perms[p];
        for (i, &ax) in perm.iter().enumerate() {
            alpha[ax] = self.a[ax] + (u[verts[i + 1]] - u[verts[i]]) * rf;
        }
        let n = self.dim;
        let (s, e) = self.cube_mats[cube];
        let mut best = (f64::NEG_INFINITY, s);
        for m in s..e {
            let mat = &self.pool[m * n * n..(m + 1) * n * n];
            let mut q = 0.0;
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    row += mat[i * n + j] * alpha[j];
                }
                q += alpha[i] * row;
            }
            if q > best.0 {
                best = (q, m);
            }
        }
        (best.0.max(0.0).sqrt(), best.1)
    }

    fn objective(&self, u: &[f64]) -> f64 {
        let mut verts = Vec::with_capacity(self.dim + 1);
        let mut alpha = vec![0.0; self.dim];
        let mut worst = 0.0f64;
        for cube in 0..self.nodes() {
            for p in 0..self.perms.len() {
                self.simplex(cube, p, &mut verts);
                worst = worst.max(self.cost(cube, p, &verts, u, &mut alpha).0);
            }
        }
        worst
    }

    /// Maximum cost over simplices touching node `v`, with `u[v] = t`.
    fn local(&self, v: usize, t: f64, u: &mut [f64], verts: &mut Vec<usize>, alpha: &mut [f64]) -> f64 {
        let saved = u[v];
        u[v] = t;
        let zv = self.coords(v);
        let mut worst = 0.0f64;
        for o in 0..(1usize << self.dim) {
            let base: Vec<i64> = zv
                .iter()
                .enumerate()
                .map(|(i, &c)| c - ((o >> i) & 1) as i64)
                .collect();
            let cube = self.node_index(&base);
            for &p in &self.corner_perms[o] {
                self.simplex(cube, p, verts);
                worst = worst.max(self.cost(cube, p, verts, u, alpha).0);
            }
        }
        u[v] = saved;
        worst
    }

    fn coordinate_sweep(&self, u: &mut [f64], scale: f64) -> bool {
        let mut verts = Vec::with_capacity(self.dim + 1);
        let mut alpha = vec![0.0; self.dim];
        let mut moved = false;
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for v in 0..self.nodes() {
            let cur = self.local(v, u[v], u, &mut verts, &mut alpha);
            let (mut lo, mut hi) = (u[v] - scale, u[v] + scale);
            let mut c = hi - g * (hi - lo);
            let mut d = lo + g * (hi - lo);
            let mut fc = self.local(v, c, u, &mut verts, &mut alpha);
            let mut fd = self.local(v, d, u, &mut verts, &mut alpha);
            for _ in 0..40 {
                if fc < fd {
                    hi = d;
                    d = c;
                    fd = fc;
                    c = hi - g * (hi - lo);
                    fc = self.local(v, c, u, &mut verts, &mut alpha);
                } else {
                    lo = c;
                    c = d;
                    fc = fd;
                    d = lo + g * (hi - lo);
                    fd = self.local(v, d, u, &mut verts, &mut alpha);
                }
            }
            let (t, ft) = if fc < fd { (c, fc) } else { (d, fd) };
            if ft < cur * (1.0 - 1e-12) {
                u[v] = t;
                moved = true;
            }
        }
        moved
    }

    /// Soft maximum `(1/β) log Σ exp(β c_T)`, the true maximum, and the
    /// gradient of the soft maximum.
    fn smooth(&self, u: &[f64], beta: f64, grad: &mut [f64]) -> (f64, f64) {
        let n = self.dim;
        let rf = self.r as f64;
        let mut verts = Vec::with_capacity(n + 1);
        let mut alpha = vec![0.0; n];
        let count = self.nodes() * self.perms.len();
        let mut costs = Vec::with_capacity(count);
        for cube in 0..self.nodes() {
            for p in 0..self.perms.len() {
                self.simplex(cube, p, &mut verts);
                costs.push(self.cost(cube, p, &verts, u, &mut alpha));
            }
        }
        let cmax = costs.iter().map(|c| c.0).fold(0.0, f64::max);
        let mut z = 0.0;
        for c in &costs {
            z += (beta * (c.0 - cmax)).exp();
        }
        let soft = cmax + z.ln() / beta;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut k = 0;
        let mut mg = vec![0.0; n];
        for cube in 0..self.nodes() {
            for p in 0..self.perms.len() {
                let (c, m) = costs[k];
                k += 1;
                let w = (beta * (c - cmax)).exp() / z;
                if w < 1e-300 || c == 0.0 {
                    continue;
                }
                self.simplex(cube, p, &mut verts);
                self.cost(cube, p, &verts, u, &mut alpha);
                let mat = &self.pool[m * n * n..(m + 1) * n * n];
                for i in 0..n {
                    mg[i] = (0..n).map(|j| mat[i * n + j] * alpha[j]).sum::<f64>() / c;
                }
                for (i, &ax) in self.perms[p].iter().enumerate() {
                    let d = w * mg[ax] * rf;
                    grad[verts[i + 1]] += d;
                    grad[verts[i]] -= d;
                }
            }
        }
        (soft, cmax)
    }
}

/// Upper bound of the dual norm `‖a‖* = inf { max_x |α_x|_{g*} : [α] = a }`
/// over closed forms `α = a + df` with `f` piecewise linear on the Kuhn
/// triangulation of the `R`-grid.
///
/// Each simplex contributes a rigorous bound of `|α|_{g*}` over its points, so
/// every iterate is an upper bound of `‖a‖*`. Descent starts with cyclic
/// coordinate updates that minimize the local maximum around a node, and
/// continues with gradient steps on a soft maximum once those stall at a kink.
pub fn stable_norm_dual(metric: &TorusMetric, a: &[f64], settings: &DualSettings) -> Result<DualEstimate> {
    if a.len() != metric.dim() {
        return Err(Error::DimensionMismatch {
            expected: metric.dim(),
            found: a.len(),
        });
    }
    if a.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroClass);
    }
    if settings.resolution < 2 {
        return Err(Error::ResolutionTooCoarse {
            resolution: settings.resolution,
        });
    }
    let prob = DualProblem::new(metric, a, settings.resolution)?;
    let initial = zero_potential_value(&prob);
    let mut best = initial;

    if !metric.is_flat() {
        let mut levels = vec![settings.resolution];
        while let Some(&r) = levels.last() {
            if r % 2 != 0 || r / 2 < COARSEST {
                break;
            }
            levels.push(r / 2);
        }
        levels.reverse();
        let mut u = vec![0.0; levels[0].pow(prob.dim as u32)];
        for (i, &r) in levels.iter().enumerate() {
            if i > 0 {
                u = prolong(&u, prob.dim, levels[i - 1]);
            }
            let level = if r == settings.resolution {
                None
            } else {
                Some(DualProblem::new(metric, a, r)?)
            };
            let stages: &[f64] = if i == 0 { &STAGES } else { &STAGES[3..] };
            let value = descend(level.as_ref().unwrap_or(&prob), &mut u, settings, stages);
            if r == settings.resolution {
                best = best.min(value);
            }
        }
    }

    let no_descent = !(best < initial * (1.0 - 1e-12));
    Ok(DualEstimate {
        a: a.to_vec(),
        value: if no_descent { initial } else { best },
        initial,
        no_descent,
        resolution: settings.resolution,
    })
}

const COARSEST: usize = 8;

/// Consecutive steps with negligible decrease that end a smoothing stage.
const STALL_STEPS: usize = 10;

/// Grid used to score candidate directions before descent.
const SCAN_RESOLUTION: usize = 32;

/// Inverse temperatures of the soft maximum, in units of `1/J(0)`.
const STAGES: [f64; 6] = [10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0];

/// Multilinear interpolation of a periodic potential on the `r`-grid to the
/// `2r`-grid.
fn prolong(u: &[f64], dim: usize, r: usize) -> Vec<f64> {
    let fine = 2 * r;
    let count = fine.pow(dim as u32);
    (0..count)
        .map(|idx| {
            let z: Vec<usize> = (0..dim).map(|i| (idx / fine.pow(i as u32)) % fine).collect();
            let mut acc = 0.0;
            let mut weight = 0.0;
            for o in 0..(1usize << dim) {
                let mut coarse = 0;
                let mut stride = 1;
                let mut skip = false;
                for (i, &c) in z.iter().enumerate() {
                    let up = (o >> i) & 1;
                    if c % 2 == 0 && up == 1 {
                        skip = true;
                        break;
                    }
                    coarse += ((c / 2 + up) % r) * stride;
                    stride *= r;
                }
                if !skip {
                    acc += u[coarse];
                    weight += 1.0;
                }
            }
            acc / weight
        })
        .collect()
}

/// Minimize the maximum cell cost from `u`, leaving the best iterate in `u`
/// and returning its true maximum.
fn descend(prob: &DualProblem, u: &mut Vec<f64>, settings: &DualSettings, stages: &[f64]) -> f64 {
    let rf = prob.r as f64;
    let nodes = prob.nodes();
    let mut best = prob.objective(u);
    let mut best_u = u.clone();
    for _ in 0..settings.sweeps {
        if !prob.coordinate_sweep(u, best / rf) {
            break;
        }
        let j = prob.objective(u);
        if j < best {
            best = j;
            best_u.copy_from_slice(u);
        } else {
            break;
        }
    }

    let scale = best;
    let per_stage = settings.smoothing_steps / STAGES.len();
    let mut grad = vec![0.0; nodes];
    let mut trial_grad = vec![0.0; nodes];
    u.copy_from_slice(&best_u);
    for &s in stages {
        let beta = s / scale;
        let (mut soft, cmax) = prob.smooth(u, beta, &mut grad);
        if cmax < best {
            best = cmax;
            best_u.copy_from_slice(u);
        }
        let mut step = 1.0 / (rf * rf * scale.max(1e-12));
        let mut flat_steps = 0;
        for _ in 0..per_stage {
            if flat_steps >= STALL_STEPS {
                break;
            }
            let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
            if gnorm2 == 0.0 {
                break;
            }
            let mut accepted = false;
            for _ in 0..30 {
                let trial: Vec<f64> = u.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
                let (ts, tmax) = prob.smooth(&trial, beta, &mut trial_grad);
                if ts <= soft - 1e-4 * step * gnorm2 {
                    if tmax < best {
                        best = tmax;
                        best_u.copy_from_slice(&trial);
                    }
                    *u = trial;
                    if soft - ts < 1e-10 * scale {
                        flat_steps += 1;
                    } else {
                        flat_steps = 0;
                    }
                    soft = ts;
                    std::mem::swap(&mut grad, &mut trial_grad);
                    step *= 1.5;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
    u.copy_from_slice(&best_u);
    best
}

/// Evaluate `max_x |a|_{g*}` (the `f = 0` value) without descent.
fn zero_potential_value(prob: &DualProblem) -> f64 {
    prob.objective(&vec![0.0; prob.nodes()])
}

/// Choose a class `a` for the pairing with `e` and run the descent there.
///
/// Candidates are `e/|e|`, `ḡ e` for the node-averaged metric `ḡ`, and in the
/// plane the best angle of a coarse-grid scan of `⟨a, e⟩ / max|a|_{g*}` refined by golden
/// section. The candidate with the largest lower bound after descent wins.
pub fn dual_lower_bound(metric: &TorusMetric, e: &[i64], settings: &DualSettings) -> Result<DualEstimate> {
    let dim = metric.dim();
    if e.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: e.len(),
        });
    }
    if e.iter().all(|&x| x == 0) {
        return Err(Error::ZeroClass);
    }
    let ef: Vec<f64> = e.iter().map(|&x| x as f64).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let unit = |v: Vec<f64>| {
        let n = norm(&v);
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let mut candidates = vec![unit(ef.clone())];

    let r = settings.resolution;
    let nodes = r.pow(dim as u32);
    let mut gbar = nalgebra::DMatrix::zeros(dim, dim);
    for idx in 0..nodes {
        let q: Vec<f64> = (0..dim)
            .map(|i| ((idx / r.pow(i as u32)) % r) as f64 / r as f64)
            .collect();
        gbar += metric.tensor(&q);
    }
    let ge = gbar * nalgebra::DVector::from_column_slice(&ef);
    candidates.push(unit(ge.iter().copied().collect()));

    if dim == 2 {
        let score = |t: f64| -> Result<f64> {
            let a = [t.cos(), t.sin()];
            let prob = DualProblem::new(metric, &a, r.min(SCAN_RESOLUTION))?;
            Ok(pairing(&a, &ef) / zero_potential_value(&prob))
        };
        let steps = 72;
        let h = std::f64::consts::TAU / steps as f64;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..steps {
            let t = i as f64 * h;
            let s = score(t)?;
            if s > best.0 {
                best = (s, t);
            }
        }
        let (mut lo, mut hi) = (best.1 - h, best.1 + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..50 {
            let c = hi - g * (hi - lo);
            let d = lo + g * (hi - lo);
            if score(c)? > score(d)? {
                hi = d;
            } else {
                lo = c;
            }
        }
        let t = 0.5 * (lo + hi);
        candidates.push(vec![t.cos(), t.sin()]);
    }

    let mut best: Option<DualEstimate> = None;
    let mut tried: Vec<Vec<f64>> = Vec::new();
    for a in candidates {
        let seen = tried
            .iter()
            .any(|b| b.iter().zip(&a).all(|(x, y)| (x - y).abs() < 1e-6));
        if seen || pairing(&a, &ef) <= 0.0 {
            continue;
        }
        tried.push(a.clone());
        let est = stable_norm_dual(metric, &a, settings)?;
        if best.as_ref().is_none_or(|b| est.lower_bound(e) > b.lower_bound(e)) {
            best = Some(est);
        }
    }
    best.ok_or(Error::ZeroClass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kuhn_simplices_cover_corners() {
        assert_eq!(permutations(3).len(), 6);
        let m = TorusMetric::euclidean(2);
        let p = DualProblem::new(&m, &[1.0, 0.0], 4).unwrap();
        // The origin corner and the far corner lie in every simplex.
        assert_eq!(p.corner_perms[0].len(), 2);
        assert_eq!(p.corner_perms[3].len(), 2);
        assert_eq!(p.corner_perms[1].len(), 1);
    }

    #[test]
    fn flat_values() {
        let m = TorusMetric::euclidean(2);
        let d = stable_norm_dual(&m, &[1.0, 0.0], &DualSettings::new(8)).unwrap();
        assert_eq!(d.value, 1.0);
        let d = stable_norm_dual(&m, &[1.0, 1.0], &DualSettings::new(8)).unwrap();
        assert!((d.value - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn conformal_vertical_class_has_no_descent() {
        let m = TorusMetric::conformal_cosine(2, 0.3, 0).unwrap();
        let d = stable_norm_dual(&m, &[0.0, 1.0], &DualSettings::new(32)).unwrap();
        assert!(d.no_descent);
        assert!((d.value - 1.0 / 0.7).abs() < 1e-12);
        assert!((d.lower_bound(&[0, 1]) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn conformal_horizontal_class_descends_towards_one() {
        // The optimal form is λ(q₁) dq₁ with ‖(1,0)‖* = 1, while f = 0 gives 1/0.7.
        let m = TorusMetric::conformal_cosine(2, 0.3, 0).unwrap();
        let d = stable_norm_dual(&m, &[1.0, 0.0], &DualSettings::new(32)).unwrap();
        assert!(!d.no_descent);
        assert!(d.value >= 1.0 - 1e-9, "{}", d.value);
        assert!(d.value < 1.1, "{}", d.value);
    }

    #[test]
    fn direction_search_finds_metric_dual() {
        let m = TorusMetric::constant(nalgebra::DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0])).unwrap();
        let d = dual_lower_bound(&m, &[1, 1], &DualSettings::new(8)).unwrap();
        assert!((d.lower_bound(&[1, 1]) - 5f64.sqrt()).abs() < 1e-9);
    }
}
