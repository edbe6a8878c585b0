use super::hamiltonian::HomogeneousHamiltonian;
use super::sphere::{SphereGrid, SphereTable};
use crate::error::{Error, Result};
use crate::order::{GroupModel, OrderVerdict};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// `γ(F, G) = max_{|p|=1} G(p)/F(p)` with a Lipschitz enclosure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrowth {
    /// Largest grid value of `G/F`; a lower bound of the true maximum.
    pub value: f64,
    /// `value + enclosure`, an upper bound of the true maximum.
    pub upper: f64,
    pub enclosure: f64,
    pub argmax: Vec<f64>,
    /// Local maximization of the closed forms near the grid argmax (`n = 2`).
    pub refined: Option<f64>,
    pub grid_points: usize,
}

fn check_dims(f: &HomogeneousHamiltonian, g: &HomogeneousHamiltonian, grid: &SphereGrid) -> Result<()> {
    for d in [f.dim(), g.dim()] {
        if d != grid.dim {
            return Err(Error::DimensionMismatch {
                expected: grid.dim,
                found: d,
            });
        }
    }
    Ok(())
}

fn require_positive(t: &SphereTable, grid: &SphereGrid) -> Result<f64> {
    let lb = t.certified_min(grid);
    if lb > 0.0 {
        Ok(lb)
    } else {
        Err(Error::FNotPositive { lower_bound: lb })
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Relative growth of two autonomous contact flows generated
/// by `F` and `G`: `γ(f, g) = max_{p≠0} G(p)/F(p)`.
///
/// The grid maximum `m` satisfies `m <= γ <= m + r (L_G/F_min + G_max L_F/F_min²)`
/// where `r` is the covering radius, `L` are sphere Lipschitz constants and
/// `F_min`, `G_max` are certified bounds.
pub fn gamma_torus(
    f: &HomogeneousHamiltonian,
    g: &HomogeneousHamiltonian,
    grid: &SphereGrid,
) -> Result<TorusGrowth> {
    check_dims(f, g, grid)?;
    let ft = SphereTable::sample(f, grid)?;
    let gt = SphereTable::sample(g, grid)?;
    gamma_from_tables(f, g, &ft, &gt, grid)
}

pub(crate) fn gamma_from_tables(
    f: &HomogeneousHamiltonian,
    g: &HomogeneousHamiltonian,
    ft: &SphereTable,
    gt: &SphereTable,
    grid: &SphereGrid,
) -> Result<TorusGrowth> {
    let f_min = require_positive(ft, grid)?;
    if gt.max() <= 0.0 {
        return Err(Error::HypothesisFailed(
            "G is not positive anywhere on the sphere grid".into(),
        ));
    }
    let (imax, value) = ft
        .values
        .iter()
        .zip(&gt.values)
        .map(|(a, b)| b / a)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, q)| if q > best.1 { (i, q) } else { best });
    let g_max = gt.certified_abs_max(grid);
    let enclosure =
        grid.covering_radius * (gt.lipschitz / f_min + g_max * ft.lipschitz / (f_min * f_min));
    let argmax = grid.points[imax].clone();

    let refined = (grid.dim == 2).then(|| {
        let t0 = argmax[1].atan2(argmax[0]);
        let h = TAU / grid.len() as f64;
        let ratio = |t: f64| {
            let p = [t.cos(), t.sin()];
            g.eval_unchecked(&p) / f.eval_unchecked(&p)
        };
        golden_max(ratio, t0 - h, t0 + h, 80).1.max(value)
    });

    Ok(TorusGrowth {
        value,
        upper: value + enclosure,
        enclosure,
        argmax,
        refined,
        grid_points: grid.len(),
    })
}

/// `r_-(a, g) / r_+(a, f) = G(a)/F(a)`, a lower bound for `γ(f, g)` at every
/// direction `a` where `G(a) > 0`.
pub fn growth_lower_bound(
    f: &HomogeneousHamiltonian,
    g: &HomogeneousHamiltonian,
    a: &[f64],
) -> Result<f64> {
    if a.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroClass);
    }
    let fa = f.eval(a)?;
    let ga = g.eval(a)?;
    if !(fa > 0.0) {
        return Err(Error::FNotPositive { lower_bound: fa });
    }
    if !(ga > 0.0) {
        return Err(Error::HypothesisFailed(format!(
            "r_-(a, g) = G(a) = {ga} must be positive"
        )));
    }
    Ok(ga / fa)
}

/// `log(F/H)` on the grid: the image of `F` in the space of continuous
/// functions on the sphere with the sup norm.
pub fn zk_embed(
    f: &HomogeneousHamiltonian,
    h_ref: &HomogeneousHamiltonian,
    grid: &SphereGrid,
) -> Result<Vec<f64>> {
    check_dims(f, h_ref, grid)?;
    let ft = SphereTable::sample(f, grid)?;
    let ht = SphereTable::sample(h_ref, grid)?;
    require_positive(&ft, grid)?;
    require_positive(&ht, grid)?;
    Ok(ft.values.iter().zip(&ht.values).map(|(a, b)| (a / b).ln()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusKappa {
    /// `max(log γ(F,G), log γ(G,F))` from the grid maxima.
    pub kappa: f64,
    /// `max |log F - log G|` on the same grid.
    pub sup_log_difference: f64,
    pub forward: TorusGrowth,
    pub backward: TorusGrowth,
}

/// `κ` for two strictly positive Hamiltonians, alongside the sup-norm distance
/// of their embeddings.
pub fn kappa_torus(
    f: &HomogeneousHamiltonian,
    g: &HomogeneousHamiltonian,
    grid: &SphereGrid,
) -> Result<TorusKappa> {
    check_dims(f, g, grid)?;
    let ft = SphereTable::sample(f, grid)?;
    let gt = SphereTable::sample(g, grid)?;
    require_positive(&gt, grid)?;
    let forward = gamma_from_tables(f, g, &ft, &gt, grid)?;
    let backward = gamma_from_tables(g, f, &gt, &ft, grid)?;
    let sup_log_difference = ft
        .values
        .iter()
        .zip(&gt.values)
        .map(|(a, b)| (a.ln() - b.ln()).abs())
        .fold(0.0, f64::max);
    Ok(TorusKappa {
        kappa: forward.value.ln().max(backward.value.ln()),
        sup_log_difference,
        forward,
        backward,
    })
}

/// Autonomous `p`-only contact flows as a group: the time-one maps commute,
/// so products add Hamiltonians and `f ≥ g` iff `F ≥ G` on the sphere.
///
/// Elements are coefficient vectors over a fixed basis of Hamiltonians; this
/// keeps exact equalities exact and lets the oracle decide ties.
pub struct TorusGroup {
    grid: SphereGrid,
    basis: Vec<SphereTable>,
    tolerance: f64,
}

impl TorusGroup {
    pub fn new(basis: &[HomogeneousHamiltonian], grid: SphereGrid, tolerance: f64) -> Result<Self> {
        let basis = basis
            .iter()
            .map(|h| SphereTable::sample(h, &grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            basis,
            tolerance,
        })
    }

    /// The basis element `i` as a group element.
    pub fn generator(&self, i: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.basis.len()];
        c[i] = 1.0;
        c
    }
}

impl GroupModel for TorusGroup {
    type Element = Vec<f64>;

    fn identity(&self) -> Vec<f64> {
        vec![0.0; self.basis.len()]
    }

    fn multiply(&self, f: &Vec<f64>, g: &Vec<f64>) -> Vec<f64> {
        f.iter().zip(g).map(|(a, b)| a + b).collect()
    }

    fn invert(&self, f: &Vec<f64>) -> Vec<f64> {
        f.iter().map(|a| -a).collect()
    }

    fn power(&self, f: &Vec<f64>, p: i64) -> Vec<f64> {
        f.iter().map(|a| a * p as f64).collect()
    }

    fn dominates(&self, f: &Vec<f64>, g: &Vec<f64>) -> OrderVerdict {
        let c: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
        let n = self.grid.len();
        if c.iter().all(|&x| x == 0.0) {
            return OrderVerdict::yes(0.0, n);
        }
        let lip: f64 = c.iter().zip(&self.basis).map(|(x, t)| x.abs() * t.lipschitz).sum();
        let (imin, dmin) = (0..n)
            .map(|i| c.iter().zip(&self.basis).map(|(x, t)| x * t.values[i]).sum::<f64>())
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, d)| if d < best.1 { (i, d) } else { best });
        if dmin < -self.tolerance {
            return OrderVerdict::no(self.grid.points[imin].clone(), dmin, n);
        }
        let certified = dmin - lip * self.grid.covering_radius;
        if certified >= -self.tolerance {
            OrderVerdict::yes(certified, n)
        } else {
            OrderVerdict::inconclusive(dmin, n)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::{relative_growth, GrowthSettings};

    fn circle() -> SphereGrid {
        SphereGrid::circle(4096).unwrap()
    }

    #[test]
    fn catalogue_maxima() {
        let e = HomogeneousHamiltonian::euclidean(2);
        let lin = HomogeneousHamiltonian::linear(vec![1.0, 0.0]).unwrap();
        let r = gamma_torus(&e, &e.scaled(2.0), &circle()).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!(r.enclosure, 0.0);
        let r = gamma_torus(&e, &lin, &circle()).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.enclosure < 1e-3);
        let aff = HomogeneousHamiltonian::combination(&[(0.5, &e), (1.0, &lin)]).unwrap();
        let r = gamma_torus(&e, &aff, &circle()).unwrap();
        assert!(r.value <= 1.5 && 1.5 <= r.upper);
    }

    #[test]
    fn rejects_non_positive_base() {
        let lin = HomogeneousHamiltonian::linear(vec![1.0, 0.0]).unwrap();
        let e = HomogeneousHamiltonian::euclidean(2);
        assert!(matches!(gamma_torus(&lin, &e, &circle()), Err(Error::FNotPositive { .. })));
        let e3 = HomogeneousHamiltonian::euclidean(3);
        assert!(matches!(
            gamma_torus(&e, &e3, &circle()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lower_bound_cases() {
        let e = HomogeneousHamiltonian::euclidean(2);
        let lin = HomogeneousHamiltonian::linear(vec![1.0, 0.0]).unwrap();
        assert_eq!(growth_lower_bound(&e, &lin, &[1.0, 0.0]).unwrap(), 1.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let b = growth_lower_bound(&e, &lin, &[s, s]).unwrap();
        assert!((b - s).abs() < 1e-15);
        assert!(matches!(
            growth_lower_bound(&e, &lin, &[0.0, 1.0]),
            Err(Error::HypothesisFailed(_))
        ));
    }

    #[test]
    fn embedding_of_scaled_reference_is_constant() {
        let h = HomogeneousHamiltonian::weighted(vec![vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let z = zk_embed(&h, &h, &circle()).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let z = zk_embed(&h.scaled(2.0), &h, &circle()).unwrap();
        assert!(z.iter().all(|&v| (v - 2f64.ln()).abs() < 1e-15));
    }

    #[test]
    fn brute_force_gamma_k_matches_ceiling() {
        // γ = 0.5 + c irrational keeps k γ away from integers for small k.
        let c = 0.5 * (5f64.sqrt() - 1.0) - 0.5;
        let e = HomogeneousHamiltonian::euclidean(2);
        let lin = HomogeneousHamiltonian::linear(vec![1.0, 0.0]).unwrap();
        let g = HomogeneousHamiltonian::combination(&[(0.5, &e), (c, &lin)]).unwrap();
        let exact = 0.5 + c;
        let model = TorusGroup::new(&[e.clone(), g.clone()], circle(), 1e-12).unwrap();
        let est = relative_growth(
            &model,
            &model.generator(0),
            &model.generator(1),
            20,
            &GrowthSettings::default(),
        )
        .unwrap();
        for (i, &gk) in est.gammas.iter().enumerate() {
            let k = (i + 1) as f64;
            assert_eq!(gk, (k * exact).ceil() as i64, "k = {k}");
        }
        let grid_value = gamma_torus(&e, &g, &circle()).unwrap();
        assert!((grid_value.value - exact).abs() < 1e-12);
    }
}
