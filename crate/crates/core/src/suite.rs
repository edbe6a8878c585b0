//! The verification suite: twelve criteria covering both group models and
//! the stable norm, each reported as a list of [`Record`]s.
//!
//! Randomized instances come from a ChaCha generator seeded by
//! [`SuiteSettings::seed`]; the report contains no timings, so two runs with
//! the same seed serialize to identical bytes.

use crate::circle::{flow, rotation_number, translation_e, CircleGroup, CircleLift, TAU_EVAL};
use crate::error::Result;
use crate::order::{kappa, relative_growth, GrowthSettings, KappaEstimate};
use crate::report::{Record, Report};
use crate::stable::{mather_beta, verify_growth_bound, GrowthNormReport, TorusMetric};
use crate::torus::{
    check_shape_properties, gamma_torus, growth_lower_bound, kappa_torus, HomogeneousHamiltonian, SphereGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

pub const CRITERIA: usize = 12;

/// `(a, b, φ)` of the Arnold lifts `x + a + b sin(2πx + φ)` used by the
/// circle criteria. All satisfy `a > |b|`, so `f(x) > x`.
pub const ARNOLD_CATALOGUE: [(f64, f64, f64); 10] = [
    (0.30, 0.05, 0.0),
    (0.50, 0.10, 0.0),
    (0.70, 0.15, 0.5),
    (0.20, 0.03, 1.0),
    (0.45, 0.12, 0.3),
    (0.62, 0.08, 2.0),
    (0.85, 0.14, 1.5),
    (0.37, 0.02, 0.7),
    (0.25, 0.10, 2.5),
    (1.10, 0.15, 0.9),
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSettings {
    pub seed: u64,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        Self { seed: 20_240_601 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub records: Vec<Record>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Criterion {
    fn new(id: usize, name: &str, report: Report) -> Self {
        Self {
            id,
            name: name.into(),
            pass: report.passed() && !report.records.is_empty(),
            records: report.records,
            notes: report.notes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub pass: bool,
    pub criteria: Vec<Criterion>,
}

/// Shared state of one suite run; expensive computations used by several
/// criteria are done once.
pub struct Suite {
    settings: SuiteSettings,
    circle: CircleGroup,
    growth: GrowthSettings,
    pairs: OnceLock<Vec<Result<KappaEstimate>>>,
    flat: OnceLock<Vec<Result<GrowthNormReport>>>,
    conformal: OnceLock<Result<GrowthNormReport>>,
}

pub const CRITERION_NAMES: [&str; CRITERIA] = [
    "rotation_growth_identity",
    "rotation_ratio_and_flatness",
    "finite_product_bound",
    "torus_growth_maxima",
    "shape_properties",
    "shape_lower_bound",
    "sup_log_isometry",
    "flat_stable_norm",
    "conformal_stable_norm",
    "growth_vs_stable_norm",
    "reeb_flow_growth",
    "determinism",
];

fn arnold(i: usize) -> CircleLift {
    let (a, b, phi) = ARNOLD_CATALOGUE[i];
    CircleLift::arnold(a, b, phi).expect("catalogue lifts are valid")
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn failed(report: &mut Report, name: &str, err: &crate::Error) {
    report.push(Record::new(name, None, f64::NAN, f64::NAN, false));
    report.note(format!("{name}: {err}"));
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn spd(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    let b: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| (0..dim).map(|k| b[k][i] * b[k][j]).sum::<f64>() + if i == j { 0.2 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// A random Hamiltonian from the catalogue that is positive away from zero.
fn positive_hamiltonian(rng: &mut ChaCha8Rng, dim: usize) -> HomogeneousHamiltonian {
    match rng.gen_range(0..3) {
        0 => HomogeneousHamiltonian::euclidean(dim).scaled(rng.gen_range(0.5..2.0)),
        1 => HomogeneousHamiltonian::weighted(spd(rng, dim)).expect("spd"),
        _ => {
            // sqrt(0.2) bounds the smallest eigenvalue's root from below.
            let w = HomogeneousHamiltonian::weighted(spd(rng, dim)).expect("spd");
            let lin = HomogeneousHamiltonian::linear(unit_vector(rng, dim)).expect("linear");
            let c = rng.gen_range(-0.3..0.3) * 0.2f64.sqrt();
            HomogeneousHamiltonian::combination(&[(1.0, &w), (c, &lin)]).expect("combination")
        }
    }
}

fn catalogue_pairs() -> Vec<(HomogeneousHamiltonian, HomogeneousHamiltonian, f64)> {
    let e = HomogeneousHamiltonian::euclidean(2);
    let lin = HomogeneousHamiltonian::linear(vec![1.0, 0.0]).expect("linear");
    let aff = HomogeneousHamiltonian::combination(&[(0.5, &e), (1.0, &lin)]).expect("combination");
    vec![
        (e.clone(), e.scaled(2.0), 2.0),
        (e.clone(), lin, 1.0),
        (e, aff, 1.5),
    ]
}

fn circle_grid() -> SphereGrid {
    SphereGrid::circle(4096).expect("grid")
}

fn lattice_grid() -> SphereGrid {
    SphereGrid::lattice(3, 12).expect("grid")
}

const FLAT_CLASSES: [[i64; 2]; 3] = [[1, 0], [1, 1], [3, 4]];
const FLAT_METRICS: [[f64; 4]; 2] = [[1.0, 0.0, 0.0, 1.0], [4.0, 0.0, 0.0, 1.0]];
const STABLE_HORIZON: usize = 4;
const FLAT_RESOLUTION: usize = 64;
const CONFORMAL_RESOLUTION: usize = 128;
const CONFORMAL_AMPLITUDE: f64 = 0.3;
const CONFORMAL_EPSILON: f64 = 0.01;

impl Suite {
    pub fn new(settings: SuiteSettings) -> Self {
        Self {
            settings,
            circle: CircleGroup::default(),
            growth: GrowthSettings::default(),
            pairs: OnceLock::new(),
            flat: OnceLock::new(),
            conformal: OnceLock::new(),
        }
    }

    /// Run criterion `id` (1-based).
    pub fn criterion(&self, id: usize) -> Criterion {
        let report = match id {
            1 => self.rotation_growth_identity(),
            2 => self.rotation_ratio_and_flatness(),
            3 => self.finite_product_bound(),
            4 => self.torus_growth_maxima(),
            5 => self.shape_properties(),
            6 => self.shape_lower_bound(),
            7 => self.sup_log_isometry(),
            8 => self.flat_stable_norm(),
            9 => self.conformal_stable_norm(),
            10 => self.growth_vs_stable_norm(),
            11 => self.reeb_flow_growth(),
            12 => self.determinism(),
            _ => panic!("criterion ids run from 1 to {CRITERIA}"),
        };
        Criterion::new(id, CRITERION_NAMES[id - 1], report)
    }

    pub fn run(&self) -> SuiteReport {
        let criteria: Vec<Criterion> = (1..=CRITERIA).map(|i| self.criterion(i)).collect();
        SuiteReport {
            seed: self.settings.seed,
            pass: criteria.iter().all(|c| c.pass),
            criteria,
        }
    }

    fn rotation_growth_identity(&self) -> Report {
        let mut report = Report::default();
        let e = translation_e();
        for i in 0..ARNOLD_CATALOGUE.len() {
            let f = arnold(i);
            let name = format!("trend_times_rot[{i}]");
            let res = relative_growth(&self.circle, &f, &e, 100, &self.growth)
                .and_then(|g| Ok((g, rotation_number(&f, 100_000)?)));
            match res {
                Ok((g, rot)) => report.push(Record::close(name, Some(100), g.trend * rot.mid(), 1.0, 5e-2)),
                Err(err) => failed(&mut report, &name, &err),
            }
        }
        report
    }

    fn pairs(&self) -> &[Result<KappaEstimate>] {
        self.pairs.get_or_init(|| {
            (0..ARNOLD_CATALOGUE.len())
                .map(|i| {
                    let f = arnold(i);
                    let g = arnold((i + 1) % ARNOLD_CATALOGUE.len());
                    kappa(&self.circle, &f, &g, 100, &self.growth, 1e-1)
                })
                .collect()
        })
    }

    fn rotation_ratio_and_flatness(&self) -> Report {
        let mut report = Report::default();
        for (i, pair) in self.pairs().iter().enumerate() {
            let j = (i + 1) % ARNOLD_CATALOGUE.len();
            let rots = rotation_number(&arnold(i), 100_000).and_then(|a| Ok((a, rotation_number(&arnold(j), 100_000)?)));
            match (pair, rots) {
                (Ok(k), Ok((rf, rg))) => {
                    let (rf, rg) = (rf.mid(), rg.mid());
                    report.push(Record::close(format!("trend_vs_rot_ratio[{i},{j}]"), Some(100), k.forward.trend, rg / rf, 5e-2));
                    report.push(Record::close(
                        format!("kappa_vs_log_rot[{i},{j}]"),
                        Some(100),
                        k.value,
                        (rf.ln() - rg.ln()).abs(),
                        1e-1,
                    ));
                }
                (Err(err), _) => failed(&mut report, &format!("pair[{i},{j}]"), err),
                (_, Err(err)) => failed(&mut report, &format!("rot[{i},{j}]"), &err),
            }
        }
        report
    }

    fn finite_product_bound(&self) -> Report {
        let mut report = Report::default();
        for (i, pair) in self.pairs().iter().enumerate() {
            let j = (i + 1) % ARNOLD_CATALOGUE.len();
            match pair {
                Ok(k) => {
                    for kk in 1..=50usize {
                        let lhs = k.forward.gamma(kk) as i128 * k.backward.gamma(kk) as i128;
                        let rhs = (kk * kk) as i128;
                        report.push(Record::new(
                            format!("product[{i},{j}]"),
                            Some(kk as i64),
                            lhs as f64,
                            rhs as f64,
                            lhs >= rhs,
                        ));
                    }
                }
                Err(err) => failed(&mut report, &format!("pair[{i},{j}]"), err),
            }
        }
        report
    }

    fn torus_growth_maxima(&self) -> Report {
        let mut report = Report::default();
        let grid = circle_grid();
        for (i, (f, g, exact)) in catalogue_pairs().into_iter().enumerate() {
            match gamma_torus(&f, &g, &grid) {
                Ok(r) => {
                    report.push(Record::le(format!("grid_max_le_exact[{i}]"), None, r.value, exact, 0.0));
                    report.push(Record::ge(format!("exact_le_upper[{i}]"), None, r.upper, exact, 0.0));
                    report.push(Record::le(format!("enclosure[{i}]"), None, r.enclosure, 1e-3, 0.0));
                }
                Err(err) => failed(&mut report, &format!("gamma[{i}]"), &err),
            }
        }
        report
    }

    fn shape_properties(&self) -> Report {
        let mut report = Report::default();
        let mut rng = rng(self.settings.seed, 5);
        let grid = circle_grid();
        let e = HomogeneousHamiltonian::euclidean(2);
        for i in 0..20 {
            let f = positive_hamiltonian(&mut rng, 2);
            let s = rng.gen_range(0.2..0.5);
            let g = HomogeneousHamiltonian::combination(&[(1.0, &f), (-s, &e)]).expect("combination");
            let scale = rng.gen_range(0.5..3.0);
            let a: Vec<f64> = unit_vector(&mut rng, 2).into_iter().map(|x| x * scale).collect();
            let c = rng.gen_range(0.1..10.0);
            let k = rng.gen_range(1..=10);
            match check_shape_properties(&f, &g, &a, c, k, &grid) {
                Ok(r) => {
                    for mut rec in r.records {
                        rec.name = format!("{}[{i}]", rec.name);
                        report.push(rec);
                    }
                    for n in r.notes {
                        report.note(format!("instance {i}: {n}"));
                    }
                }
                Err(err) => failed(&mut report, &format!("instance[{i}]"), &err),
            }
        }
        report
    }

    fn shape_lower_bound(&self) -> Report {
        let mut report = Report::default();
        let mut rng = rng(self.settings.seed, 6);
        let grid = circle_grid();
        let mut pairs: Vec<_> = catalogue_pairs().into_iter().map(|(f, g, _)| (f, g)).collect();
        for _ in 0..5 {
            let f = positive_hamiltonian(&mut rng, 2);
            let g = positive_hamiltonian(&mut rng, 2);
            pairs.push((f, g));
        }
        for (i, (f, g)) in pairs.iter().enumerate() {
            let growth = match gamma_torus(f, g, &grid) {
                Ok(r) => r,
                Err(err) => {
                    failed(&mut report, &format!("gamma[{i}]"), &err);
                    continue;
                }
            };
            let mut worst = f64::NEG_INFINITY;
            let mut count = 0;
            while count < 100 {
                let a = unit_vector(&mut rng, 2);
                if g.eval_unchecked(&a) <= 0.0 {
                    continue;
                }
                count += 1;
                match growth_lower_bound(f, g, &a) {
                    Ok(b) => worst = worst.max(b),
                    Err(err) => {
                        failed(&mut report, &format!("bound[{i}]"), &err);
                        worst = f64::INFINITY;
                    }
                }
            }
            report.push(Record::le(format!("bound_le_gamma[{i}]"), Some(count), worst, growth.upper, 0.0));
            match growth_lower_bound(f, g, &growth.argmax) {
                Ok(b) => report.push(Record::close(format!("bound_at_argmax[{i}]"), None, b, growth.value, growth.enclosure)),
                Err(err) => failed(&mut report, &format!("argmax[{i}]"), &err),
            }
        }
        report
    }

    fn sup_log_isometry(&self) -> Report {
        let mut report = Report::default();
        let mut rng = rng(self.settings.seed, 7);
        for i in 0..20 {
            let dim = if i % 4 == 3 { 3 } else { 2 };
            let grid = if dim == 2 { circle_grid() } else { lattice_grid() };
            let f = positive_hamiltonian(&mut rng, dim);
            let g = positive_hamiltonian(&mut rng, dim);
            match kappa_torus(&f, &g, &grid) {
                Ok(k) => report.push(Record::close(format!("kappa[{i}]"), None, k.kappa, k.sup_log_difference, 1e-6)),
                Err(err) => failed(&mut report, &format!("kappa[{i}]"), &err),
            }
            if i < 5 {
                let m = rng.gen_range(2..=9) as f64;
                let res = gamma_torus(&f, &g, &grid)
                    .and_then(|base| Ok((base, gamma_torus(&f.scaled(m), &g.scaled(m), &grid)?)));
                match res {
                    Ok((base, it)) => report.push(Record::close(
                        format!("iterate_invariance[{i}]"),
                        Some(m as i64),
                        it.value,
                        base.value,
                        1e-12 * base.value.abs(),
                    )),
                    Err(err) => failed(&mut report, &format!("iterate_invariance[{i}]"), &err),
                }
            }
        }
        report
    }

    fn flat(&self) -> &[Result<GrowthNormReport>] {
        self.flat.get_or_init(|| {
            FLAT_METRICS
                .iter()
                .flat_map(|g| {
                    FLAT_CLASSES.iter().map(move |e| {
                        let m = TorusMetric::constant(nalgebra::DMatrix::from_row_slice(2, 2, g))?;
                        verify_growth_bound(&m, e, 0.0, STABLE_HORIZON, FLAT_RESOLUTION)
                    })
                })
                .collect()
        })
    }

    fn conformal(&self) -> &Result<GrowthNormReport> {
        self.conformal.get_or_init(|| {
            let m = TorusMetric::conformal_cosine(2, CONFORMAL_AMPLITUDE, 0)?;
            verify_growth_bound(&m, &[0, 1], CONFORMAL_EPSILON, STABLE_HORIZON, CONFORMAL_RESOLUTION)
        })
    }

    fn flat_label(i: usize) -> String {
        let g = FLAT_METRICS[i / FLAT_CLASSES.len()];
        let e = FLAT_CLASSES[i % FLAT_CLASSES.len()];
        format!("g=diag({},{}),e=({},{})", g[0], g[3], e[0], e[1])
    }

    fn flat_stable_norm(&self) -> Report {
        let mut report = Report::default();
        for (i, r) in self.flat().iter().enumerate() {
            let label = Self::flat_label(i);
            match r {
                Ok(r) => {
                    let norm = r.primal.envelope;
                    let gamma = r.gamma.as_ref().map_or(f64::NAN, |g| g.refined.unwrap_or(g.value));
                    let tol = 0.01 * norm;
                    report.push(Record::close(format!("primal_vs_dual[{label}]"), None, norm, r.dual_lower_bound, tol));
                    report.push(Record::close(format!("primal_vs_gamma[{label}]"), None, norm, gamma, tol));
                    report.push(Record::close(format!("dual_vs_gamma[{label}]"), None, r.dual_lower_bound, gamma, tol));
                }
                Err(err) => failed(&mut report, &label, err),
            }
        }
        report
    }

    fn conformal_stable_norm(&self) -> Report {
        let mut report = Report::default();
        match self.conformal() {
            Ok(r) => {
                let norm = r.primal.envelope;
                report.push(Record::close("primal_envelope", Some(STABLE_HORIZON as i64), norm, 0.7, 0.01));
                report.push(Record::ge("dual_lower_bound", None, r.dual_lower_bound, 0.65, 0.0));
                let metric = TorusMetric::conformal_cosine(2, CONFORMAL_AMPLITUDE, 0).expect("metric");
                match mather_beta(&metric, &[0, 1], STABLE_HORIZON, CONFORMAL_RESOLUTION) {
                    Ok(beta) => {
                        report.push(Record::close("beta_formula", None, beta, 0.5 * norm * norm, 0.0));
                        // |½x² − ½y²| ≤ y δ + ½δ² when |x − y| ≤ δ.
                        let tol = 0.7 * 0.01 + 0.5 * 0.01 * 0.01;
                        report.push(Record::close("beta_value", None, beta, 0.5 * 0.49, tol));
                    }
                    Err(err) => failed(&mut report, "beta", &err),
                }
            }
            Err(err) => failed(&mut report, "conformal", err),
        }
        report
    }

    fn growth_vs_stable_norm(&self) -> Report {
        let mut report = Report::default();
        for (i, r) in self.flat().iter().enumerate() {
            let label = Self::flat_label(i);
            match r {
                Ok(r) => {
                    let gamma = r.gamma.as_ref().map_or(f64::NAN, |g| g.refined.unwrap_or(g.value));
                    let norm = r.primal.envelope;
                    report.push(Record::close(format!("gamma_eq_norm[{label}]"), None, gamma, norm, 0.01 * norm));
                }
                Err(err) => failed(&mut report, &label, err),
            }
        }
        match self.conformal() {
            Ok(r) => {
                let norm = r.primal.envelope;
                report.push(Record::le("bound_le_primal", None, r.gamma_lower_bound, norm * (1.0 + r.primal.slack), 0.0));
                report.push(Record::ge("bound_ge_0.9_primal", None, r.gamma_lower_bound, 0.9 * norm, 0.0));
                report.note(format!(
                    "conformal e=(0,1): gamma >= {:.6}, primal {:.6}, slack {:.3e}",
                    r.gamma_lower_bound, norm, r.primal.slack
                ));
            }
            Err(err) => failed(&mut report, "conformal", err),
        }
        report
    }

    fn reeb_flow_growth(&self) -> Report {
        let mut report = Report::default();
        let e = translation_e();
        for t in [0.25, 0.37, 0.5] {
            match relative_growth(&self.circle, &e, &flow(t), 200, &self.growth) {
                Ok(g) => report.push(Record::le(format!("gamma_minus_t[{t}]"), Some(200), g.trend - t, 0.0, 2e-2)),
                Err(err) => failed(&mut report, &format!("flow[{t}]"), &err),
            }
        }
        let n = self.circle.settings().grid_points;
        for (p, q) in [(1i64, 4i64), (3, 8), (1, 2), (37, 100), (2, 3)] {
            let lhs = flow(p as f64 / q as f64).power(q);
            let mut worst = 0.0f64;
            for i in 0..n {
                let x = i as f64 / n as f64;
                match lhs.evaluate(x) {
                    Ok(y) => worst = worst.max((y - (x + p as f64)).abs()),
                    Err(_) => worst = f64::INFINITY,
                }
            }
            report.push(Record::le(format!("flow_power[{p}/{q}]"), Some(q), worst, 0.0, TAU_EVAL));
        }
        report
    }

    /// Rerun the other criteria on a fresh suite and compare serialized bytes.
    fn determinism(&self) -> Report {
        let mut report = Report::default();
        let fresh = Suite::new(self.settings);
        for id in 1..CRITERIA {
            let a = serde_json::to_vec(&self.criterion(id)).expect("serialize");
            let b = serde_json::to_vec(&fresh.criterion(id)).expect("serialize");
            report.push(Record::new(
                format!("identical_bytes[{}]", CRITERION_NAMES[id - 1]),
                None,
                a.len() as f64,
                b.len() as f64,
                a == b,
            ));
        }
        report
    }
}

/// Run all criteria with the given settings.
pub fn run_suite(settings: SuiteSettings) -> SuiteReport {
    Suite::new(settings).run()
}
