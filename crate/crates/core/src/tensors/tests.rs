use std::collections::BTreeMap;

use super::*;
use crate::dsl::SampleRegion;

fn spec(dim: usize, src: &str, params: &[(&str, f64)]) -> MetricSpec {
    let params: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    MetricSpec::build("t", dim, src, params, SampleRegion::centered_box(dim, 1.0)).unwrap()
}

fn bundle(s: &MetricSpec, x: &[f64], y: &[f64]) -> TensorBundle<f64> {
    TensorBundle::at(s, x, y, 1e-8).unwrap()
}

#[test]
fn euclidean_block() {
    let s = spec(3, "sqrt(y1^2 + y2^2 + y3^2)", &[]);
    let y = [1.0, -2.0, 0.5];
    let b = bundle(&s, &[0.1, 0.2, 0.3], &y);
    let id = DMatrix::<f64>::identity(3, 3);
    assert!((&b.g - &id).amax() < 1e-14);
    let norm = vec_norm(&y);
    for i in 0..3 {
        assert!((b.l_lo[i] - y[i] / norm).abs() < 1e-14);
    }
    let hy = &b.h * DVector::from_column_slice(&y);
    assert!(hy.amax() < 1e-14);
    assert!(b.c.max_abs() < 1e-14);
    assert!(b.gamma.max_abs() < 1e-14 && b.p.max_abs() < 1e-14 && b.t.max_abs() < 1e-14);
}

#[test]
fn riemannian_g_is_y_independent() {
    let s = spec(2, "sqrt((1 + x2^2)*y1^2 + x1*y1*y2 + 2*y2^2)", &[]);
    let x = [0.3, 0.7];
    let g0 = bundle(&s, &x, &[1.0, 0.0]).g;
    for y in [[0.3, 0.9], [-1.0, 2.0]] {
        assert!((&bundle(&s, &x, &y).g - &g0).amax() < 1e-12);
    }
    assert!((g0[(0, 0)] - 1.49).abs() < 1e-12);
    assert!((g0[(0, 1)] - 0.15).abs() < 1e-12);
}

#[test]
fn exp_metric_levi_civita() {
    let s = spec(2, "sqrt(y1^2 + exp(2*x1)*y2^2)", &[]);
    let x1 = 0.3;
    let b = bundle(&s, &[x1, -0.4], &[0.7, -1.1]);
    let e = (2.0 * x1).exp();
    let mut expected = Tensor3::<f64>::zeros(2);
    expected[[0, 1, 1]] = -e;
    expected[[1, 0, 1]] = 1.0;
    expected[[1, 1, 0]] = 1.0;
    assert!(b.gamma.sub(&expected).max_abs() < 1e-12, "{:?}", b.gamma);
    // Riemannian: Berwald coefficients coincide with Γ.
    assert!(b.g_berwald.sub(&expected).max_abs() < 1e-12);
    assert!(b.c.max_abs() < 1e-13 && b.c_hder.max_abs() < 1e-12);
}

#[test]
fn minkowski_randers_connections_vanish() {
    let s = spec(3, "sqrt(y1^2 + y2^2 + y3^2) + b*y1", &[("b", 0.1)]);
    let b = bundle(&s, &[0.2, -0.1, 0.5], &[0.3, 0.4, -0.8]);
    assert!(vec_norm(&b.g_spray) < 1e-15);
    assert!(mat_norm(&b.n_conn) < 1e-15);
    assert!(b.gamma.max_abs() < 1e-15 && b.g_berwald.max_abs() < 1e-15);
    assert!(b.c_hder.max_abs() < 1e-15 && b.p.max_abs() < 1e-15);
    assert!(b.c.max_abs() > 1e-3);
}

#[test]
fn spray_euler_and_symmetries() {
    let s = spec(
        3,
        "sqrt(y1^2 + y2^2 + y3^2) + 0.1*x1*y1 + 0.05*sin(x2)*y3",
        &[],
    );
    let y = [0.3, 0.4, -0.8];
    let b = bundle(&s, &[0.9, 0.2, -0.3], &y);
    let ny = &b.n_conn * DVector::from_column_slice(&y);
    for i in 0..3 {
        assert!((ny[i] - 2.0 * b.g_spray[i]).abs() < 1e-12);
    }
    assert!(vec_norm(&b.g_spray) > 1e-3);
    let n = 3;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                assert!((b.gamma[[i, j, k]] - b.gamma[[i, k, j]]).abs() < 1e-12);
                assert!((b.g_berwald[[i, j, k]] - b.g_berwald[[i, k, j]]).abs() < 1e-12);
            }
        }
    }
    // G^i_jh y^h = N^i_j
    for i in 0..n {
        for j in 0..n {
            let v: f64 = (0..n).map(|h| b.g_berwald[[i, j, h]] * y[h]).sum();
            assert!((v - b.n_conn[(i, j)]).abs() < 1e-12);
        }
    }
    assert!(b.c.symmetry_defect() < 1e-13);
    assert!(b.t.symmetry_defect() < 1e-12);
    assert!(b.t.contract_last(&y).max_abs() < 1e-12);
}

#[test]
fn rejects_indefinite_and_bad_dims() {
    let s = spec(2, "y1", &[]);
    let err = TensorBundle::<f64>::at(&s, &[0.0, 0.0], &[1.0, 1.0], 1e-8).unwrap_err();
    assert!(matches!(err, TensorError::NotPositiveDefinite { .. }));
    let s = spec(2, "sqrt(y1^2 + y2^2)", &[]);
    assert!(matches!(
        TensorBundle::<f64>::at(&s, &[0.0], &[1.0, 1.0], 1e-8),
        Err(TensorError::Dimension { .. })
    ));
    let err = TensorBundle::<f64>::at(&s, &[0.0, 0.0], &[0.0, 0.0], 1e-8).unwrap_err();
    assert!(
        matches!(
            err,
            TensorError::Evaluation(_) | TensorError::NonPositiveF { .. }
        ),
        "{err}"
    );
}

#[test]
fn fd_pipeline_agrees_on_perturbed_randers() {
    let s = spec(3, "sqrt(y1^2 + y2^2 + y3^2) + 0.1*x1*y1", &[]);
    let (x, y) = ([1.1, 0.2, -0.3], [0.5, 0.6, -0.62]);
    let a = bundle(&s, &x, &y);
    let b = TensorBundle::at_fd(&s, &x, &y, 1e-8, &FdSettings::default()).unwrap();
    let rel = |u: &Tensor4<f64>, v: &Tensor4<f64>| u.sub(v).norm() / (1.0 + v.norm());
    assert!(rel(&a.p, &b.p) < 1e-4, "{}", rel(&a.p, &b.p));
    assert!(rel(&a.c_hder, &b.c_hder) < 1e-4);
    assert!(a.gamma.sub(&b.gamma).norm() < 1e-5);
}

#[test]
fn works_in_f32() {
    let s = spec(2, "sqrt(y1^2 + exp(2*x1)*y2^2)", &[]);
    let b = TensorBundle::<f32>::at(&s, &[0.3, 0.0], &[1.0, 1.0], 1e-6).unwrap();
    assert!((b.gamma[[1, 0, 1]] - 1.0).abs() < 1e-4);
}
