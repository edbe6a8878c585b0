use conegrowth::stable::{
    dual_lower_bound, mather_beta, stable_norm_dual, stable_norm_primal, verify_growth_bound, Branch, DualSettings,
    MetricSpec, PrimalSettings, TorusMetric,
};
use nalgebra::DMatrix;

fn constant(rows: &[f64], n: usize) -> TorusMetric {
    TorusMetric::constant(DMatrix::from_row_slice(n, n, rows)).unwrap()
}

/// `sqrt(eᵀ G e)`, the stable norm of a constant metric.
fn flat_norm(g: &[f64], e: &[i64]) -> f64 {
    let n = e.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[i * n + j] * (e[i] * e[j]) as f64;
        }
    }
    s.sqrt()
}

#[test]
fn flat_examples_within_slack() {
    for (g, e) in [
        (vec![1.0, 0.0, 0.0, 1.0], [3i64, 4]),
        (vec![4.0, 0.0, 0.0, 1.0], [1, 0]),
        (vec![2.0, 0.3, 0.3, 1.0], [1, -2]),
    ] {
        let m = constant(&g, 2);
        let est = stable_norm_primal(&m, &e, 4, &PrimalSettings::new(32)).unwrap();
        let exact = flat_norm(&g, &e);
        assert!(est.envelope >= exact - 1e-9, "{e:?}: {} < {exact}", est.envelope);
        assert!(est.envelope <= exact * (1.0 + est.slack) + 1e-9);
        let dual = dual_lower_bound(&m, &e, &DualSettings::new(16)).unwrap();
        let lower = dual.lower_bound(&e);
        assert!(lower <= exact + 1e-9 && lower >= exact * (1.0 - 1e-6), "{lower} vs {exact}");
    }
}

#[test]
fn flat_three_dimensional() {
    let m = TorusMetric::euclidean(3);
    let est = stable_norm_primal(&m, &[1, 2, 2], 2, &PrimalSettings::new(8)).unwrap();
    assert!(est.envelope >= 3.0 - 1e-9 && est.envelope <= 3.0 * (1.0 + est.slack) + 1e-9);
}

#[test]
fn conformal_vertical_loop_is_minimum_of_lambda() {
    let m = TorusMetric::conformal_cosine(2, 0.3, 0).unwrap();
    let est = stable_norm_primal(&m, &[0, 1], 3, &PrimalSettings::new(32)).unwrap();
    for v in &est.sequence {
        assert!((v - 0.7).abs() < 1e-9, "{v}");
    }
    let dual = dual_lower_bound(&m, &[0, 1], &DualSettings::new(32)).unwrap();
    assert!((dual.lower_bound(&[0, 1]) - 0.7).abs() < 1e-9);
}

#[test]
fn conformal_horizontal_class_is_mean_of_lambda() {
    let m = TorusMetric::conformal_cosine(2, 0.3, 0).unwrap();
    let est = stable_norm_primal(&m, &[1, 0], 2, &PrimalSettings::new(64)).unwrap();
    assert!(est.envelope >= 1.0 - 1e-6 && est.envelope <= 1.0 + est.slack + 1e-9);
    let dual = dual_lower_bound(&m, &[1, 0], &DualSettings::new(64)).unwrap();
    let lower = dual.lower_bound(&[1, 0]);
    assert!(lower <= 1.0 + 1e-9 && lower > 0.95, "{lower}");
}

#[test]
fn homogeneity_in_the_class() {
    let m = TorusMetric::conformal_cosine(2, 0.3, 0).unwrap();
    let s = PrimalSettings::new(32);
    let base = stable_norm_primal(&m, &[1, 1], 4, &s).unwrap();
    for k in [2i64, 3] {
        let scaled = stable_norm_primal(&m, &[k, k], 2, &s).unwrap();
        let tol = base.slack * base.envelope * k as f64;
        assert!((scaled.envelope - k as f64 * base.envelope).abs() <= tol + 1e-9);
    }
}

#[test]
fn beta_scales_quadratically() {
    let m = TorusMetric::euclidean(2);
    let b1 = mather_beta(&m, &[1, 0], 2, 16).unwrap();
    for k in [2i64, 3] {
        let bk = mather_beta(&m, &[k, 0], 2, 16).unwrap();
        assert!((bk - (k * k) as f64 * b1).abs() < 1e-9);
    }
}

#[test]
fn dual_value_is_upper_bound_of_dual_norm() {
    let g = [2.0, 0.3, 0.3, 1.0];
    let m = constant(&g, 2);
    let a = [0.4, -1.2];
    let gi = DMatrix::from_row_slice(2, 2, &g).try_inverse().unwrap();
    let av = nalgebra::DVector::from_row_slice(&a);
    let exact = (av.transpose() * gi * av)[(0, 0)].sqrt();
    let est = stable_norm_dual(&m, &a, &DualSettings::new(8)).unwrap();
    assert!(est.value >= exact - 1e-12 && est.value <= exact * (1.0 + 1e-9));
}

#[test]
fn table_metric_matches_closed_form() {
    let r = 16;
    let mut text = String::from("q1,q2,g11,g12,g21,g22\n");
    for j in 0..r {
        for i in 0..r {
            let (x, y) = (i as f64 / r as f64, j as f64 / r as f64);
            let l = 1.0 + 0.3 * (std::f64::consts::TAU * x).cos();
            text.push_str(&format!("{x},{y},{},0,0,{}\n", l * l, l * l));
        }
    }
    let table = TorusMetric::from_csv(text.as_bytes()).unwrap();
    let closed = TorusMetric::conformal_cosine(2, 0.3, 0).unwrap();
    for q in [[0.0, 0.0], [0.5, 0.25], [0.25, 0.9]] {
        let a = table.tensor(&q);
        let b = closed.tensor(&q);
        assert!((a - b).amax() < 1e-12, "{q:?}");
    }
    let v = stable_norm_primal(&table, &[0, 1], 2, &PrimalSettings::new(16)).unwrap();
    assert!((v.envelope - 0.7).abs() < 1e-9);
}

#[test]
fn growth_bound_branches() {
    let flat = TorusMetric::from_spec(&MetricSpec::Constant {
        matrix: vec![vec![2.0, 0.3], vec![0.3, 1.0]],
    })
    .unwrap();
    let r = verify_growth_bound(&flat, &[1, 1], 0.0, 2, 32).unwrap();
    assert_eq!(r.branch, Branch::Flat);
    assert!(r.report.passed(), "{:?}", r.report);

    let conf = TorusMetric::conformal_cosine(2, 0.3, 0).unwrap();
    let r = verify_growth_bound(&conf, &[0, 1], 0.01, 2, 32).unwrap();
    assert_eq!(r.branch, Branch::NonFlat);
    assert!(r.gamma.is_none());
    assert!(r.report.passed(), "{:?}", r.report);
}

#[test]
fn invalid_classes_are_rejected() {
    let m = TorusMetric::euclidean(2);
    assert!(stable_norm_primal(&m, &[0, 0], 2, &PrimalSettings::new(8)).is_err());
    assert!(stable_norm_primal(&m, &[1, 0, 0], 2, &PrimalSettings::new(8)).is_err());
    assert!(verify_growth_bound(&m, &[1, 0], -1.0, 2, 8).is_err());
}
