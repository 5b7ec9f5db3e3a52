use super::*;
use crate::sampling::sample_bundles;
use crate::zoo::ZooMetric;

fn bundles(m: ZooMetric, n: usize) -> Vec<TensorBundle<f64>> {
    sample_bundles(&m.spec(), &Tolerances::default(), n, 11)
        .unwrap()
        .bundles
}

#[test]
fn riemannian_input_makes_everything_degenerate() {
    let tols = Tolerances::default();
    let b = bundles(ZooMetric::ExpRiemannian, 10);
    let r = is_riemannian(&b, &tols).unwrap();
    assert!(r.holds && r.residual_rel < 1e-12);
    for (c, v) in classify(&b, &tols) {
        let v = v.unwrap();
        assert!(v.holds, "{c}");
        if c != Condition::Riemannian {
            assert!(v.degenerate, "{c}");
        }
    }
}

#[test]
fn randers_is_c_reducible_not_quasi() {
    let tols = Tolerances::default();
    let b = bundles(ZooMetric::Randers, 20);
    let c = check_c_reducible(&b, &tols).unwrap();
    assert!(
        c.holds && !c.degenerate && c.residual_rel < 1e-10,
        "{}",
        c.residual_rel
    );
    let s = fit_semi_c_reducible(&b, &tols).unwrap();
    assert!(s.holds);
    for p in &s.per_sample {
        let (r, t) = (p.fitted["r"][0], p.fitted["t"][0]);
        assert!((r - 1.0).abs() < 1e-6);
        assert_eq!(r + t, 1.0);
    }
    let q = check_quasi_c_reducible(&b, &tols).unwrap();
    assert!(!q.holds && q.residual_rel > 1e-3);
    assert!(!is_riemannian(&b, &tols).unwrap().holds);
}

#[test]
fn c3_like_with_b_forced_zero_recovers_mean_cartan_over_n_plus_one() {
    let tols = Tolerances::default();
    let b = bundles(ZooMetric::Randers, 5);
    let v = fit_c3_like_with(&b, &tols, true).unwrap();
    assert!(v.holds);
    for (p, bu) in v.per_sample.iter().zip(&b) {
        let a = &p.fitted["a"];
        for k in 0..3 {
            assert!((a[k] - bu.c_mean[k] / 4.0).abs() < 1e-10);
        }
    }
    assert!(v.dimension_warning.is_some());
}

#[test]
fn quartic_fails_c_reducibility_and_t_condition() {
    let tols = Tolerances::default();
    let b = bundles(ZooMetric::Quartic, 10);
    assert!(check_c_reducible(&b, &tols).unwrap().residual_rel > 1e-2);
    assert!(!check_t_condition(&b, &tols).unwrap().holds);
    let c3 = fit_c3_like(&b, &tols).unwrap();
    assert!(c3.dimension_warning.is_none());
    assert!(c3.per_sample[0].fitted.contains_key("b"));
}

#[test]
fn minkowski_randers_landsberg_and_recurrent() {
    let tols = Tolerances::default();
    let b = bundles(ZooMetric::Randers, 10);
    let (pr, l) = check_p_reducible_landsberg(&b, &tols).unwrap();
    assert!(l.holds && !l.degenerate);
    assert!(pr.holds && pr.degenerate);
    let ch = check_ch_recurrent(&b, &tols).unwrap();
    assert!(ch.holds && ch.fitted["K_norm_max"] < 1e-12);
    let p2 = check_p2_like(&b, &tols).unwrap();
    assert!(p2.holds && p2.fitted["K_norm_max"] < 1e-12);
}

#[test]
fn small_dimension_is_an_error_unless_degenerate() {
    let tols = Tolerances::default();
    let s = crate::dsl::MetricSpec::build(
        "r2",
        2,
        "sqrt(y1^2 + y2^2) + 0.1*y1",
        Default::default(),
        crate::dsl::SampleRegion::centered_box(2, 1.0),
    )
    .unwrap();
    let b = sample_bundles::<f64>(&s, &tols, 3, 1).unwrap().bundles;
    assert!(matches!(
        check_c_reducible(&b, &tols),
        Err(SpaceError::Dimension { required: 3, .. })
    ));
    let e = bundles(ZooMetric::ExpRiemannian, 3);
    let v = check_quasi_c_reducible(&e, &tols).unwrap();
    assert!(v.holds && v.degenerate && v.dimension_warning.is_some());
}

#[test]
fn moor_frame_round_trip() {
    let b = bundles(ZooMetric::Randers, 10);
    for bu in &b {
        let f = moor_frame_3d(bu).unwrap();
        assert!(f.orthonormality_residual < 1e-10);
        assert!(f.angular_residual < 1e-9);
        assert!(
            f.reconstruction_residual < 1e-8,
            "{}",
            f.reconstruction_residual
        );
    }
    let e = bundles(ZooMetric::Euclidean, 1);
    assert!(matches!(
        moor_frame_3d(&e[0]),
        Err(MoorError::Degenerate { .. })
    ));
    let q = bundles(ZooMetric::Quartic, 1);
    assert!(matches!(moor_frame_3d(&q[0]), Err(MoorError::Dimension(4))));
}

#[test]
fn complement_basis_is_orthonormal_and_orthogonal_to_y() {
    for y in [
        [0.3, -0.4, 0.5, 0.1],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 2.0],
    ] {
        let z = complement_basis(&y);
        let ztz = z.transpose() * &z;
        assert!((ztz - DMatrix::<f64>::identity(3, 3)).amax() < 1e-14);
        let yz = DVector::from_column_slice(&y).transpose() * &z;
        assert!(yz.amax() < 1e-14);
    }
}
