use super::hamiltonian::HomogeneousHamiltonian;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

pub const DEFAULT_CIRCLE_POINTS: usize = 4096;
pub const DEFAULT_LATTICE_RADIUS: i64 = 24;

/// A finite set of unit vectors together with its covering radius: every
/// point of the sphere lies within `covering_radius` (great-circle distance)
/// of some grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereGrid {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub covering_radius: f64,
    /// Angle count for `n = 2`, lattice radius for `n >= 3`.
    pub resolution: usize,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl SphereGrid {
    /// `N` equally spaced angles on the unit circle.
    pub fn circle(n_angles: usize) -> Result<Self> {
        if n_angles < 3 {
            return Err(Error::InvalidParameter(format!(
                "need at least 3 angles, got {n_angles}"
            )));
        }
        let points = (0..n_angles)
            .map(|i| {
                let t = TAU * i as f64 / n_angles as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        Ok(Self {
            dim: 2,
            points,
            covering_radius: PI / n_angles as f64,
            resolution: n_angles,
        })
    }

    /// Normalized primitive integer vectors of sup-norm at most `m`.
    ///
    /// Any unit `u` scaled to sup-norm `m` is within `√(n-1)/2` (Euclidean) of an
    /// integer vector whose largest coordinate is exact, so the angular gap is at
    /// most `asin(√(n-1)/(2m))`.
    pub fn lattice(dim: usize, m: i64) -> Result<Self> {
        if dim < 2 || m < 1 {
            return Err(Error::InvalidParameter(format!(
                "lattice grid needs dim >= 2 and radius >= 1 (got {dim}, {m})"
            )));
        }
        let side = (2 * m + 1) as usize;
        let total = side.pow(dim as u32);
        let mut points = Vec::new();
        let mut v = vec![0i64; dim];
        for idx in 0..total {
            let mut r = idx;
            for c in v.iter_mut() {
                *c = (r % side) as i64 - m;
                r /= side;
            }
            let g = v.iter().fold(0, |g, &c| gcd(g, c));
            if g != 1 {
                continue;
            }
            let len = (v.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt();
            points.push(v.iter().map(|&c| c as f64 / len).collect());
        }
        let s = ((dim - 1) as f64).sqrt() / (2.0 * m as f64);
        Ok(Self {
            dim,
            points,
            covering_radius: s.min(1.0).asin(),
            resolution: m as usize,
        })
    }

    /// The documented default grid for dimension `dim`.
    pub fn default_for(dim: usize) -> Result<Self> {
        match dim {
            2 => Self::circle(DEFAULT_CIRCLE_POINTS),
            d => Self::lattice(d, DEFAULT_LATTICE_RADIUS),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Values of a Hamiltonian on a sphere grid, with its sphere Lipschitz bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereTable {
    pub values: Vec<f64>,
    pub lipschitz: f64,
}

impl SphereTable {
    pub fn sample(h: &HomogeneousHamiltonian, grid: &SphereGrid) -> Result<Self> {
        if h.dim() != grid.dim {
            return Err(Error::DimensionMismatch {
                expected: grid.dim,
                found: h.dim(),
            });
        }
        Ok(Self {
            values: grid.points.iter().map(|p| h.eval_unchecked(p)).collect(),
            lipschitz: h.sphere_lipschitz(),
        })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Certified lower bound of the minimum over the whole sphere.
    pub fn certified_min(&self, grid: &SphereGrid) -> f64 {
        self.min() - self.lipschitz * grid.covering_radius
    }

    /// Certified upper bound of `sup |F|` over the whole sphere.
    pub fn certified_abs_max(&self, grid: &SphereGrid) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) + self.lipschitz * grid.covering_radius
    }

    /// CSV with columns `p1, …, pn, value`.
    pub fn write_csv<W: Write>(&self, grid: &SphereGrid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=grid.dim).map(|i| format!("p{i}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        for (p, v) in grid.points.iter().zip(&self.values) {
            let mut row: Vec<String> = p.iter().map(|x| format!("{x:.17e}")).collect();
            row.push(format!("{v:.17e}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a table written by [`write_csv`](Self::write_csv); the Lipschitz
    /// bound is not stored in the file and must be supplied.
    pub fn read_csv<R: Read>(input: R, lipschitz: f64) -> Result<(SphereGrid, Self)> {
        let mut r = csv::Reader::from_reader(input);
        let dim = r.headers()?.len().saturating_sub(1);
        let mut points = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let nums = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidParameter(format!("bad number {s:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            values.push(nums[dim]);
            points.push(nums[..dim].to_vec());
        }
        let n = points.len();
        let grid = SphereGrid {
            dim,
            covering_radius: if dim == 2 { PI / n as f64 } else { f64::NAN },
            points,
            resolution: n,
        };
        Ok((grid, Self { values, lipschitz }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_covering_radius_is_respected() {
        let g = SphereGrid::lattice(3, 6).unwrap();
        // Probe random-ish unit vectors and check the nearest grid angle.
        for i in 0..200 {
            let t = i as f64 * 0.7311;
            let s = i as f64 * 1.913;
            let u = [t.sin() * s.cos(), t.sin() * s.sin(), t.cos()];
            let best = g
                .points
                .iter()
                .map(|p| (p[0] * u[0] + p[1] * u[1] + p[2] * u[2]).clamp(-1.0, 1.0).acos())
                .fold(f64::INFINITY, f64::min);
            assert!(best <= g.covering_radius + 1e-12, "gap {best} > {}", g.covering_radius);
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = SphereGrid::circle(16).unwrap();
        let t = SphereTable::sample(&HomogeneousHamiltonian::linear(vec![1.0, 2.0]).unwrap(), &g).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&g, &mut buf).unwrap();
        let (g2, t2) = SphereTable::read_csv(buf.as_slice(), t.lipschitz).unwrap();
        assert_eq!(g2.points, g.points);
        assert_eq!(t2.values, t.values);
    }
}
