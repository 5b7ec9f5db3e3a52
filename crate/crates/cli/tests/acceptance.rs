//! Acceptance criteria 1–10, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always print; exits
//! nonzero if any criterion fails. Every tolerance used is pinned below.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use finsler_core::dsl::{eval_jet, fd_oracle, parse_metric, MetricSpec};
use finsler_core::fields::find_sc_field;
use finsler_core::jet::{FdSettings, Layout};
use finsler_core::sampling::{sample_bundles, RegionSampler};
use finsler_core::spaces::{
    check_c_reducible, check_ch_recurrent, check_p_reducible_landsberg, fit_semi_c_reducible,
    moor_frame_3d,
};
use finsler_core::tensors::Tensor3;
use finsler_core::tolerance::Tolerances;
use finsler_core::verify::{
    identity_suite, run_theorem, FieldInput, SamplingConfig, TheoremId, Verdict,
};
use finsler_core::zoo::{standard_fields, ZooMetric};
use finsler_core::TensorBundle64;

const SEED: u64 = 20240611;

// criterion 1
const JET_FD_REL: f64 = 1e-5;
const JET_FD_SAMPLES: usize = 100;
const JET_FD_BUDGET: Duration = Duration::from_secs(60);
// criterion 2
const IDENTITY_REL: f64 = 1e-9;
// criterion 3
const RIEMANN_ZERO: f64 = 1e-10;
const LEVI_CIVITA_ABS: f64 = 1e-6;
// criterion 4
const C_RED_PASS: f64 = 1e-6;
const SEMI_R_TOL: f64 = 1e-6;
const C_RED_FAIL: f64 = 1e-2;
// criterion 5
const LANDSBERG_ZERO: f64 = 1e-10;
const RECURRENCE_K: f64 = 1e-6;
// criterion 6
const NULL_FULL: f64 = 1e-10;
const NULL_EMPTY: f64 = 1e-3;
// criterion 7
const T6_FORWARD: f64 = 1e-10;
// criterion 8
const MOOR_ORTHO: f64 = 1e-10;
const MOOR_ANGULAR: f64 = 1e-9;
const MOOR_RECON: f64 = 1e-8;
// criterion 10
const MIN_MALFORMED: usize = 20;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bundles(m: ZooMetric, n: usize) -> Vec<TensorBundle64> {
    sample_bundles(&m.spec(), &Tolerances::default(), n, SEED)
        .unwrap()
        .bundles
}

/// `|jet − fd| / (1 + |fd|)` over the whole truncation set.
fn derivative_correctness() -> Outcome {
    let start = Instant::now();
    let settings = FdSettings::default();
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for m in ZooMetric::ALL {
        let spec = m.spec();
        let layout = Layout::finsler(spec.dim);
        let indices: Vec<_> = layout
            .multi_indices()
            .into_iter()
            .filter(|mi| mi.order() > 0)
            .collect();
        for b in bundles(m, JET_FD_SAMPLES) {
            let jet = eval_jet(&spec.expr, b.x(), b.y(), &spec.params)
                .unwrap()
                .square();
            for mi in &indices {
                let exact = jet.derivative(mi).unwrap();
                let fd = fd_oracle(&spec.expr, &spec.params, b.x(), b.y(), mi, &settings)
                    .map_err(|e| format!("{}: {mi:?}: {e}", spec.name))?;
                let rel = (exact - fd).abs() / (1.0 + fd.abs());
                ensure(rel <= JET_FD_REL, || {
                    format!(
                        "{} {mi:?} at x={:?} y={:?}: rel {rel:.2e}",
                        spec.name,
                        b.x(),
                        b.y()
                    )
                })?;
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    let took = start.elapsed();
    ensure(took < JET_FD_BUDGET, || format!("took {took:.1?}"))?;
    Ok(format!(
        "{checked} coefficients, worst rel {worst:.1e}, {took:.1?}"
    ))
}

fn homogeneity_suite() -> Outcome {
    const ROWS: [&str; 5] = [
        "g_ij y^i y^j = F^2",
        "h_ij y^j = 0",
        "C_ijk y^k = 0",
        "T_hijk y^k = 0",
        "N^i_j y^j = 2 G^i",
    ];
    let mut worst: f64 = 0.0;
    for m in ZooMetric::ALL {
        let suite = identity_suite(
            &m.spec(),
            SamplingConfig {
                samples: 100,
                seed: SEED,
            },
            &Tolerances::default(),
        )
        .map_err(|e| e.to_string())?;
        for row in ROWS {
            let r = suite
                .identities
                .iter()
                .find(|r| r.name == row)
                .ok_or_else(|| format!("{}: no row '{row}'", suite.metric))?;
            ensure(r.max_residual <= IDENTITY_REL, || {
                format!("{}: {row} = {:.2e}", suite.metric, r.max_residual)
            })?;
            worst = worst.max(r.max_residual);
        }
    }
    Ok(format!("5 identities x 5 metrics, worst {worst:.1e}"))
}

fn riemannian_ground_truth() -> Outcome {
    let mut worst: f64 = 0.0;
    for m in [ZooMetric::Euclidean, ZooMetric::ExpRiemannian] {
        for b in bundles(m, 100) {
            let w = b.c.norm().max(b.p.norm()).max(b.t.norm());
            ensure(w <= RIEMANN_ZERO, || {
                format!("{m:?} at y={:?}: {w:.2e}", b.y())
            })?;
            worst = worst.max(w);
        }
    }
    let mut lc: f64 = 0.0;
    for b in bundles(ZooMetric::ExpRiemannian, 100) {
        let e = (2.0 * b.x()[0]).exp();
        let mut want = Tensor3::<f64>::zeros(2);
        want[[0, 1, 1]] = -e;
        want[[1, 0, 1]] = 1.0;
        want[[1, 1, 0]] = 1.0;
        lc = lc.max(b.gamma.sub(&want).max_abs());
    }
    ensure(lc <= LEVI_CIVITA_ABS, || format!("Gamma off by {lc:.2e}"))?;
    Ok(format!("|C|,|P|,|T| <= {worst:.1e}, Gamma err {lc:.1e}"))
}

fn c_reducibility() -> Outcome {
    let tols = Tolerances::default();
    let randers = bundles(ZooMetric::Randers, 100);
    let c = check_c_reducible(&randers, &tols).map_err(|e| e.to_string())?;
    ensure(c.holds && c.residual_rel <= C_RED_PASS, || {
        format!("Randers residual {:.2e}", c.residual_rel)
    })?;
    let s = fit_semi_c_reducible(&randers, &tols).map_err(|e| e.to_string())?;
    let (lo, hi) = (s.fitted["r_min"], s.fitted["r_max"]);
    ensure(
        (lo - 1.0).abs() <= SEMI_R_TOL && (hi - 1.0).abs() <= SEMI_R_TOL,
        || format!("r in [{lo}, {hi}]"),
    )?;
    let q =
        check_c_reducible(&bundles(ZooMetric::Quartic, 100), &tols).map_err(|e| e.to_string())?;
    ensure(!q.holds && q.residual_rel > C_RED_FAIL, || {
        format!("quartic residual {:.2e}", q.residual_rel)
    })?;
    Ok(format!(
        "Randers {:.1e}, r in [{lo:.9}, {hi:.9}]; quartic {:.2e}",
        c.residual_rel, q.residual_rel
    ))
}

fn landsberg_recurrence() -> Outcome {
    let tols = Tolerances::default();
    let b = bundles(ZooMetric::Randers, 100);
    let ch = b.iter().map(|b| b.c_hder.norm()).fold(0.0, f64::max);
    let p = b.iter().map(|b| b.p.norm()).fold(0.0, f64::max);
    ensure(ch <= LANDSBERG_ZERO && p <= LANDSBERG_ZERO, || {
        format!("|C_|h| {ch:.2e}, |P| {p:.2e}")
    })?;
    let (_, lands) = check_p_reducible_landsberg(&b, &tols).map_err(|e| e.to_string())?;
    ensure(lands.holds, || {
        format!("Landsberg residual {:.2e}", lands.residual_rel)
    })?;
    let rec = check_ch_recurrent(&b, &tols).map_err(|e| e.to_string())?;
    let k = rec.fitted["K_norm_max"];
    ensure(rec.holds && k <= RECURRENCE_K, || {
        format!("recurrence holds={} |K|={k:.2e}", rec.holds)
    })?;
    Ok(format!("|C_|h| {ch:.1e}, |P| {p:.1e}, |K| {k:.1e}"))
}

fn nullspace_search() -> Outcome {
    let tols = Tolerances::default();
    let mut lines = Vec::new();
    for m in ZooMetric::ALL {
        let spec = m.spec();
        let x = RegionSampler::new(&spec.region, SEED).draw_x();
        let ns = find_sc_field::<f64>(&spec, &x, 2 * spec.dim + 4, SEED, &tols)
            .map_err(|e| e.to_string())?;
        if m.is_riemannian() {
            let top = ns.singular_values.iter().copied().fold(0.0, f64::max);
            ensure(
                ns.basis.len() == spec.dim && top <= NULL_FULL * ns.scale,
                || {
                    format!(
                        "{}: basis {} of {}, sigma_max {top:.2e}",
                        spec.name,
                        ns.basis.len(),
                        spec.dim
                    )
                },
            )?;
        } else {
            let low = ns
                .singular_values
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            ensure(ns.basis.is_empty() && low >= NULL_EMPTY * ns.scale, || {
                format!(
                    "{}: basis {}, sigma_min/scale {:.2e}",
                    spec.name,
                    ns.basis.len(),
                    low / ns.scale
                )
            })?;
        }
        lines.push(format!("{}:{}", spec.name, ns.basis.len()));
    }
    Ok(lines.join(" "))
}

fn theorem_harness() -> Outcome {
    let tols = Tolerances::default();
    let cfg = SamplingConfig {
        samples: 40,
        seed: SEED,
    };
    let (mut runs, mut vacuous) = (0, 0);
    for m in ZooMetric::ALL {
        let spec = m.spec();
        let mut inputs = vec![FieldInput::None, FieldInput::FindField];
        inputs.extend(standard_fields(spec.dim).into_iter().map(FieldInput::Field));
        for id in TheoremId::ALL {
            for input in &inputs {
                if matches!(input, FieldInput::FindField) && id.takes_sigma() {
                    continue;
                }
                let rep = run_theorem::<f64>(id, &spec, input, cfg, &tols)
                    .map_err(|e| format!("{}: {e}", spec.name))?;
                runs += 1;
                for part in &rep.parts {
                    let tag = || format!("{} {} {}", id.name(), spec.name, part.name);
                    ensure(part.verdict != Verdict::Violated, || {
                        format!("{} violated", tag())
                    })?;
                    if part.verdict == Verdict::Vacuous {
                        vacuous += 1;
                        let named = !part.failing_hypotheses.is_empty()
                            || part.side_conditions.iter().any(|s| !s.determinate);
                        ensure(named, || {
                            format!("{} vacuous without a named reason", tag())
                        })?;
                    }
                }
                if id == TheoremId::T6 && m.is_riemannian() {
                    let fwd = &rep.parts[0];
                    let r = fwd.conclusion.residual.unwrap_or(f64::INFINITY);
                    ensure(
                        fwd.verdict == Verdict::Consistent && r <= T6_FORWARD,
                        || {
                            format!(
                                "T6 forward on {}: {:?} residual {r:.2e}",
                                spec.name, fwd.verdict
                            )
                        },
                    )?;
                }
            }
        }
    }
    Ok(format!(
        "{runs} runs, none violated, {vacuous} vacuous parts all named"
    ))
}

fn moor_frame() -> Outcome {
    let (mut o, mut a, mut r) = (0.0f64, 0.0f64, 0.0f64);
    for b in bundles(ZooMetric::Randers, 100) {
        let f = moor_frame_3d(&b).map_err(|e| e.to_string())?;
        o = o.max(f.orthonormality_residual);
        a = a.max(f.angular_residual);
        r = r.max(f.reconstruction_residual);
    }
    ensure(
        o <= MOOR_ORTHO && a <= MOOR_ANGULAR && r <= MOOR_RECON,
        || format!("ortho {o:.2e}, angular {a:.2e}, reconstruction {r:.2e}"),
    )?;
    Ok(format!(
        "ortho {o:.1e}, angular {a:.1e}, reconstruction {r:.1e}"
    ))
}

fn zoo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/zoo")
}

fn finsler(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_finsler"))
        .args(args)
        .output()
        .expect("run finsler")
}

fn determinism() -> Outcome {
    let randers = zoo_dir().join("randers.fml");
    let exp = zoo_dir().join("exp_riemannian.fml");
    let field = zoo_dir().join("position2.fml");
    let (randers, exp, field) = (
        randers.to_str().unwrap(),
        exp.to_str().unwrap(),
        field.to_str().unwrap(),
    );
    let runs: Vec<Vec<&str>> = vec![
        vec!["tensors", "--metric", randers, "--samples", "3"],
        vec![
            "tensors",
            "--metric",
            randers,
            "--at",
            "x=0,0,0;y=1,2,3",
            "--fd",
        ],
        vec![
            "classify",
            "--metric",
            randers,
            "--samples",
            "20",
            "--per-sample",
        ],
        vec![
            "fields",
            "--metric",
            exp,
            "--field",
            field,
            "--condition",
            "all",
        ],
        vec!["fields", "--metric", randers, "--find-field"],
        vec![
            "verify",
            "--metric",
            exp,
            "--samples",
            "15",
            "--field",
            field,
        ],
        vec!["validate", "--metric", randers, "--seed", "9"],
    ];
    for args in &runs {
        let a = finsler(args);
        let b = finsler(args);
        ensure(
            a.status.code() == b.status.code() && a.stdout == b.stdout,
            || format!("`finsler {}` differs between runs", args.join(" ")),
        )?;
        ensure(!a.stdout.is_empty(), || {
            format!("`finsler {}` wrote nothing", args.join(" "))
        })?;
    }
    Ok(format!("{} commands byte-identical", runs.len()))
}

fn has_position(stderr: &str) -> bool {
    // "...: F: <line>:<col>: ..."
    stderr.split("F: ").nth(1).is_some_and(|rest| {
        let mut it = rest.splitn(3, ':');
        let (l, c) = (it.next().unwrap_or(""), it.next().unwrap_or(""));
        !l.is_empty() && !c.is_empty() && l.chars().chain(c.chars()).all(|ch| ch.is_ascii_digit())
    })
}

fn parser_robustness() -> Outcome {
    let corpus: Vec<&str> = include_str!("data/malformed.txt")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect();
    ensure(corpus.len() >= MIN_MALFORMED, || {
        format!("corpus has {}", corpus.len())
    })?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (i, src) in corpus.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.fml"));
        let doc = format!(
            "name = \"bad{i}\"\ndim = 2\nF = '{src}'\n[params]\nb = 0.1\n[sample_region]\nx_min = [0.0, 0.0]\nx_max = [1.0, 1.0]\n"
        );
        std::fs::write(&path, doc).map_err(|e| e.to_string())?;
        let out = finsler(&["validate", "--metric", path.to_str().unwrap()]);
        let stderr = String::from_utf8_lossy(&out.stderr);
        ensure(
            out.status.code() == Some(2) && has_position(&stderr),
            || format!("'{src}': exit {:?}, stderr {stderr}", out.status.code()),
        )?;
    }
    for m in ZooMetric::ALL {
        let spec: MetricSpec = m.spec();
        let printed = spec.expr.to_string();
        let again = parse_metric(&printed).map_err(|e| format!("{printed}: {e}"))?;
        ensure(again == spec.expr && again.to_string() == printed, || {
            format!("{} does not round-trip", spec.name)
        })?;
    }
    Ok(format!(
        "{} malformed inputs exit 2 with a position; zoo round-trips",
        corpus.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("derivative correctness", derivative_correctness),
        ("homogeneity/indicatory identities", homogeneity_suite),
        ("Riemannian ground truth", riemannian_ground_truth),
        ("C-reducibility discrimination", c_reducibility),
        ("Landsberg/recurrence on Randers", landsberg_recurrence),
        ("semi-concurrent nullspace", nullspace_search),
        ("theorem harness", theorem_harness),
        ("Moor frame", moor_frame),
        ("CLI determinism", determinism),
        ("parser robustness", parser_robustness),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
