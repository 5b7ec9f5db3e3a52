use std::sync::Arc;

use finsler_core::dsl::{parse_metric, BinOp, Expr, Func, Var, VarKind, VectorFieldSpec};
use finsler_core::fields::{check_sc, find_sc_field_with_bundles};
use finsler_core::jet::{Jet, Layout};
use finsler_core::sampling::sample_bundles;
use finsler_core::spaces::{classify, fit_semi_c_reducible};
use finsler_core::tolerance::Tolerances;
use finsler_core::zoo::ZooMetric;
use finsler_core::TensorBundle64;
use proptest::prelude::*;

fn layout() -> Arc<Layout> {
    Layout::finsler(2)
}

/// A jet with every kind of coefficient populated.
fn jet(v: [f64; 6]) -> Jet<f64> {
    let l = layout();
    let x = Jet::seed_x(&l, 0, v[0]);
    let y1 = Jet::seed_y(&l, 0, v[1]);
    let y2 = Jet::seed_y(&l, 1, v[2]);
    (y1.clone() * y2.clone()).scale(v[3])
        + x.sin() * y1.square()
        + y2.exp().scale(v[4])
        + Jet::constant(&l, v[5])
}

fn close(a: &Jet<f64>, b: &Jet<f64>, tol: f64) -> bool {
    a.coefficients()
        .iter()
        .zip(b.coefficients())
        .all(|(p, q)| (p - q).abs() <= tol * (1.0 + p.abs().max(q.abs())))
}

fn six() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-2.0f64..2.0)
}

proptest! {
    #[test]
    fn jet_add_mul_commute(a in six(), b in six()) {
        let (a, b) = (jet(a), jet(b));
        let (ab, ba) = (a.clone() + b.clone(), b.clone() + a.clone());
        prop_assert_eq!(ab.coefficients(), ba.coefficients());
        // products sum in layout order, so swapping factors may move the last ulp
        let (ab, ba) = (a.clone() * b.clone(), b * a);
        prop_assert!(close(&ab, &ba, 1e-14));
    }

    #[test]
    fn jet_add_mul_associate(a in six(), b in six(), c in six()) {
        let (a, b, c) = (jet(a), jet(b), jet(c));
        let l = (a.clone() + b.clone()) + c.clone();
        let r = a.clone() + (b.clone() + c.clone());
        prop_assert!(close(&l, &r, 1e-13));
        let l = (a.clone() * b.clone()) * c.clone();
        let r = a * (b * c);
        prop_assert!(close(&l, &r, 1e-12));
    }
}

fn var() -> impl Strategy<Value = Expr> {
    (prop::bool::ANY, 0usize..3).prop_map(|(x, index)| {
        Expr::Var(Var {
            kind: if x { VarKind::X } else { VarKind::Y },
            index,
        })
    })
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0f64..1e6).prop_map(Expr::Num),
        (0u32..20).prop_map(|v| Expr::Num(v as f64)),
        var(),
        prop::sample::select(vec!["a", "b", "k2"]).prop_map(|s| Expr::Param(s.to_string())),
    ]
}

fn exponent() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..6).prop_map(|v| Expr::Num(v as f64)),
        (1u32..5).prop_map(|v| Expr::Neg(Box::new(Expr::Num(v as f64)))),
        (1u32..5, 1u32..5).prop_map(|(p, q)| Expr::binary(
            BinOp::Div,
            Expr::Num(p as f64),
            Expr::Num(q as f64)
        )),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (inner.clone(), exponent()).prop_map(|(b, e)| Expr::Pow {
                base: Box::new(b),
                exponent: Box::new(e),
            }),
            (
                prop::sample::select(Func::ALL.to_vec()),
                inner.clone(),
                inner
            )
                .prop_map(|(func, a, b)| {
                    let args = if func.arity() == 2 {
                        vec![a, b]
                    } else {
                        vec![a]
                    };
                    Expr::Call { func, args }
                }),
        ]
    })
}

proptest! {
    #[test]
    fn parse_print_round_trip(e in expr()) {
        let printed = e.to_string();
        let parsed = parse_metric(&printed).map_err(|err| TestCaseError::fail(format!("{printed}: {err}")))?;
        prop_assert_eq!(&parsed, &e, "{}", printed);
        prop_assert_eq!(parsed.to_string(), printed);
    }
}

fn zoo_metric() -> impl Strategy<Value = ZooMetric> {
    prop::sample::select(ZooMetric::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// `y^i ∂̇_i F² = 2F²` at jet level, at any admissible support element.
    #[test]
    fn euler_homogeneity(m in zoo_metric(), seed in 0u64..10_000) {
        let spec = m.spec();
        let set = sample_bundles::<f64>(&spec, &Tolerances::default(), 1, seed).unwrap();
        let b = &set.bundles[0];
        let j = finsler_core::dsl::eval_jet(&spec.expr, b.x(), b.y(), &spec.params).unwrap().square();
        let euler: f64 = (0..spec.dim).map(|i| b.y()[i] * j.partial(&[], &[i])).sum();
        let f2 = j.value();
        prop_assert!((euler - 2.0 * f2).abs() <= 1e-10 * f2);
    }

    /// Raw SC residual scales with |c|; the normalized verdict does not move.
    #[test]
    fn sc_is_linear_in_the_field(
        comps in prop::array::uniform3(-1.0f64..1.0),
        c in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
        seed in 0u64..1000,
    ) {
        prop_assume!(comps.iter().any(|v| v.abs() > 1e-3));
        let tols = Tolerances::default();
        let b = sample_bundles::<f64>(&ZooMetric::Randers.spec(), &tols, 4, seed).unwrap().bundles;
        let scaled: Vec<f64> = comps.iter().map(|v| v * c).collect();
        let r1 = check_sc(&VectorFieldSpec::constant("b", &comps), &b, &tols).unwrap();
        let r2 = check_sc(&VectorFieldSpec::constant("cb", &scaled), &b, &tols).unwrap();
        prop_assert_eq!(r1.holds, r2.holds);
        prop_assert!((r1.residual_rel - r2.residual_rel).abs() <= 1e-12 * (1.0 + r1.residual_rel));
        for (s1, s2) in r1.per_sample.iter().zip(&r2.per_sample) {
            let (a, b) = (s1.extra["raw"] * c.abs(), s2.extra["raw"]);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    /// The (r, t) fit honours `r + t = 1` to the last bit.
    #[test]
    fn semi_c_fit_is_affine(m in prop::sample::select(vec![ZooMetric::Randers, ZooMetric::RandersPerturbed, ZooMetric::Quartic]), seed in 0u64..1000) {
        let b = sample_bundles::<f64>(&m.spec(), &Tolerances::default(), 5, seed).unwrap().bundles;
        let v = fit_semi_c_reducible(&b, &Tolerances::default()).unwrap();
        for s in &v.per_sample {
            if let (Some(r), Some(t)) = (s.fitted.get("r"), s.fitted.get("t")) {
                prop_assert!((r[0] + t[0] - 1.0).abs() <= f64::EPSILON, "{} + {}", r[0], t[0]);
            }
        }
    }

    /// Riemannian input makes every other condition a degenerate hold.
    #[test]
    fn riemannian_implies_everything_degenerate(seed in 0u64..1000) {
        let tols = Tolerances::default();
        for m in [ZooMetric::Euclidean, ZooMetric::ExpRiemannian] {
            let b = sample_bundles::<f64>(&m.spec(), &tols, 3, seed).unwrap().bundles;
            for (c, v) in classify(&b, &tols) {
                let v = v.unwrap();
                prop_assert!(v.holds, "{}", c);
                if c != finsler_core::spaces::Condition::Riemannian {
                    prop_assert!(v.degenerate, "{}", c);
                }
            }
        }
    }

    /// Every nullspace basis vector passes the SC check on the system it came from.
    #[test]
    fn nullspace_vectors_are_semi_concurrent(m in zoo_metric(), seed in 0u64..1000) {
        let spec = m.spec();
        let tols = Tolerances::default();
        let x = finsler_core::sampling::RegionSampler::new(&spec.region, seed).draw_x();
        let (ns, bundles) = find_sc_field_with_bundles::<f64>(&spec, &x, 4, seed, &tols).unwrap();
        for (k, u) in ns.basis.iter().enumerate() {
            let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            for w in &ns.basis[k + 1..] {
                let d: f64 = u.iter().zip(w).map(|(a, b)| a * b).sum();
                prop_assert!(d.abs() < 1e-12);
            }
            let r = check_sc(&VectorFieldSpec::constant("u", u), &bundles, &tols).unwrap();
            prop_assert!(r.holds && r.residual_rel <= ns.threshold, "{} > {}", r.residual_rel, ns.threshold);
        }
    }

    /// Homogeneity validation gives the same verdicts for F and 3F.
    #[test]
    fn validation_is_scale_invariant(m in zoo_metric(), seed in 0u64..1000) {
        let spec = m.spec();
        let a = finsler_core::dsl::validate_spec(&spec, 5, seed).unwrap();
        let b = finsler_core::dsl::validate_spec(&spec.scaled(3.0), 5, seed).unwrap();
        prop_assert_eq!(a.homogeneity.passed, b.homogeneity.passed);
        prop_assert_eq!(a.positive_definite.passed, b.positive_definite.passed);
    }

    /// `g y y = F²`, `h y = 0`, `C(·,·,y) = 0`, `T(·,·,·,y) = 0`, `N y = 2G`.
    #[test]
    fn homogeneity_and_indicatory_identities(m in zoo_metric(), seed in 0u64..10_000) {
        let spec = m.spec();
        let b: TensorBundle64 = sample_bundles(&spec, &Tolerances::default(), 1, seed).unwrap().bundles.remove(0);
        let y = nalgebra::DVector::from_column_slice(b.y());
        let f2 = b.f() * b.f();
        prop_assert!(((&b.g * &y).dot(&y) - f2).abs() <= 1e-10 * f2);
        prop_assert!((&b.h * &y).norm() <= 1e-9 * (1.0 + b.h.norm()) * y.norm());
        prop_assert!(b.c.contract_last(b.y()).norm() <= 1e-9 * (1.0 + b.c.norm()) * y.norm());
        prop_assert!(b.t.contract_last(b.y()).norm() <= 1e-9 * (1.0 + b.t.norm()) * y.norm());
        let g = nalgebra::DVector::from_column_slice(&b.g_spray);
        prop_assert!((&b.n_conn * &y - g.scale(2.0)).norm() <= 1e-9 * (1.0 + g.norm()));
    }
}
