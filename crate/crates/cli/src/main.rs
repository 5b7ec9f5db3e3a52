mod at;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use finsler_core::dsl::{validate_spec, MetricSpec, SpecError, VectorFieldSpec};
use finsler_core::fields::{self, FieldCheckResult};
use finsler_core::sampling::{
    configure_workers_from_env, sample_bundles, RegionSampler, SampleSet, WORKERS_ENV,
};
use finsler_core::spaces::{classify, is_degenerate, moor_frame_3d};
use finsler_core::tolerance::{TolKey, Tolerances};
use finsler_core::verify::{
    build_report, identity_suite, run_theorem, FieldInput, ReportInputs, SamplingConfig, TheoremId,
    TheoremReport, Verdict,
};
use finsler_core::TensorBundle64;

use crate::at::{parse_at, At};

#[derive(Parser)]
#[command(
    name = "finsler",
    version,
    about = "Finsler geometry workbench: tensors, special-space classification, vector-field conditions and theorem checks",
    after_help = format!(
        "Exit codes: 0 success, 1 a checked invariant failed, 2 usage or input error.\n\
         Set {WORKERS_ENV}=N to size the worker pool."
    )
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Metric spec file
    #[arg(long, value_name = "FILE")]
    metric: PathBuf,
    /// Number of sampled support elements
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..=1_000_000))]
    samples: u64,
    /// Seed of the sampling generator
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Tolerance override NAME=VALUE (repeatable)
    #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = parse_tol)]
    tol: Vec<(String, f64)>,
    /// Write the JSON report here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Dump every tensor at one support element (--at) or at sampled ones
    Tensors {
        #[command(flatten)]
        common: Common,
        /// Support element "x=...;y=..."
        #[arg(long, value_parser = parse_at)]
        at: Option<At>,
        /// Use the finite-difference pipeline instead of jets
        #[arg(long)]
        fd: bool,
    },
    /// Decide every special-space condition over sampled support elements
    Classify {
        #[command(flatten)]
        common: Common,
        /// Include per-sample residuals and fits
        #[arg(long)]
        per_sample: bool,
    },
    /// Check SC / CC / concurrency conditions for a vector field, or search SC directions
    Fields {
        #[command(flatten)]
        common: Common,
        /// Vector field spec file (for cc: the covector sigma_h)
        #[arg(long, value_name = "FILE")]
        field: Option<PathBuf>,
        /// Search the semi-concurrent nullspace at one chart point
        #[arg(long, conflicts_with = "field")]
        find_field: bool,
        #[arg(long, value_enum, default_value = "all")]
        condition: FieldCond,
        /// Chart point for --find-field, "x=..." (y is ignored)
        #[arg(long, value_parser = parse_at)]
        at: Option<At>,
        /// Include per-sample residuals
        #[arg(long)]
        per_sample: bool,
    },
    /// Check the theorems' implications and the unconditional identities
    Verify {
        #[command(flatten)]
        common: Common,
        /// T1..T6, C1, L1, a comma-separated list, or "all"
        #[arg(long, default_value = "all")]
        theorem: String,
        /// Vector field B^h (T1-T5, L1) or covector sigma_h (T6, C1)
        #[arg(long, value_name = "FILE")]
        field: Option<PathBuf>,
        /// Use a semi-concurrent direction from the nullspace search as B
        #[arg(long, conflicts_with = "field")]
        find_field: bool,
    },
    /// Check positivity, homogeneity and positive-definiteness at samples
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FieldCond {
    Sc,
    Cc,
    Concurrent,
    Lemma,
    All,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, found '{s}'"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("'{}' is not a number", v.trim()))?;
    let mut t = Tolerances::default();
    t.set(k.trim(), v).map_err(|e| e.to_string())?;
    Ok((k.trim().to_string(), v))
}

/// Input and usage problems; reported with exit code 2.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type Outcome = Result<bool, InputError>;

fn main() -> ExitCode {
    configure_workers_from_env();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn spec_error(path: &Path, e: SpecError) -> InputError {
    match e {
        SpecError::Io { .. } => InputError(e.to_string()),
        _ => InputError(format!("{}: {e}", path.display())),
    }
}

fn load_metric(path: &Path) -> Result<MetricSpec, InputError> {
    MetricSpec::load(path).map_err(|e| spec_error(path, e))
}

fn load_field(path: &Path) -> Result<VectorFieldSpec, InputError> {
    VectorFieldSpec::load(path).map_err(|e| spec_error(path, e))
}

struct Ctx {
    spec: MetricSpec,
    /// Spec tolerances with the run overrides applied.
    tols: Tolerances,
    run_tols: Tolerances,
    samples: usize,
    seed: u64,
    out: Option<PathBuf>,
}

impl Ctx {
    fn new(common: Common) -> Result<Self, InputError> {
        let spec = load_metric(&common.metric)?;
        let run_tols = Tolerances::with_overrides(common.tol.iter().map(|(k, v)| (k.as_str(), *v)))
            .map_err(|e| InputError(format!("--tol: {e}")))?;
        Ok(Ctx {
            tols: spec.tolerances.merged(&run_tols),
            spec,
            run_tols,
            samples: common.samples as usize,
            seed: common.seed,
            out: common.out,
        })
    }

    fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            samples: self.samples,
            seed: self.seed,
        }
    }

    fn sample(&self) -> Result<SampleSet<f64>, InputError> {
        sample_bundles(&self.spec, &self.tols, self.samples, self.seed)
            .map_err(|e| InputError(format!("{}: {e}", self.spec.name)))
    }

    fn check_dim(&self, what: &str, len: usize) -> Result<(), InputError> {
        if len != self.spec.dim {
            return Err(InputError(format!(
                "--at: {what} has {len} coordinates, metric '{}' has dimension {}",
                self.spec.name, self.spec.dim
            )));
        }
        Ok(())
    }

    fn emit(
        &self,
        command: &str,
        field: Option<&VectorFieldSpec>,
        results: &Value,
    ) -> Result<(), InputError> {
        let inputs = ReportInputs {
            command,
            spec: &self.spec,
            field,
            seed: self.seed,
            samples: self.samples,
            run_tolerances: &self.run_tols,
        };
        let report = build_report(&inputs, results)?;
        match &self.out {
            Some(path) => report.write(path)?,
            None => {
                let s = report.to_json_string()?;
                std::io::stdout()
                    .write_all(s.as_bytes())
                    .map_err(|e| InputError(format!("stdout: {e}")))?;
            }
        }
        Ok(())
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Tensors { common, at, fd } => tensors(Ctx::new(common)?, at, fd),
        Command::Classify { common, per_sample } => classify_cmd(Ctx::new(common)?, per_sample),
        Command::Fields {
            common,
            field,
            find_field,
            condition,
            at,
            per_sample,
        } => fields_cmd(
            Ctx::new(common)?,
            field,
            find_field,
            condition,
            at,
            per_sample,
        ),
        Command::Verify {
            common,
            theorem,
            field,
            find_field,
        } => verify_cmd(Ctx::new(common)?, &theorem, field, find_field),
        Command::Validate { common } => validate_cmd(Ctx::new(common)?),
    }
}

fn tensors(ctx: Ctx, at: Option<At>, fd: bool) -> Outcome {
    let pd = ctx.tols.get(TolKey::PositiveDefinite);
    let eval = |x: &[f64], y: &[f64]| {
        if fd {
            TensorBundle64::at_fd(&ctx.spec, x, y, pd, &Default::default())
        } else {
            TensorBundle64::at(&ctx.spec, x, y, pd)
        }
    };
    let (bundles, sampling) = match at {
        Some(at) => {
            let y =
                at.y.ok_or_else(|| InputError("--at: tensors needs both x=... and y=...".into()))?;
            ctx.check_dim("x", at.x.len())?;
            ctx.check_dim("y", y.len())?;
            let b = eval(&at.x, &y).map_err(|e| InputError(format!("--at: {e}")))?;
            (vec![b], Value::Null)
        }
        None => {
            let set = ctx.sample()?;
            let meta = serde_json::to_value(set.meta())?;
            let bundles = if fd {
                set.bundles
                    .iter()
                    .map(|b| eval(b.x(), b.y()))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| InputError(format!("finite-difference pipeline: {e}")))?
            } else {
                set.bundles
            };
            (bundles, meta)
        }
    };
    eprintln!(
        "tensors: {} support element(s) of '{}' via the {} pipeline",
        bundles.len(),
        ctx.spec.name,
        if fd { "finite-difference" } else { "jet" }
    );
    let results = json!({
        "pipeline": if fd { "fd" } else { "jet" },
        "sampling": sampling,
        "bundles": bundles.iter().map(|b| b.to_json()).collect::<Vec<_>>(),
    });
    ctx.emit("tensors", None, &results)?;
    Ok(true)
}

fn classify_cmd(ctx: Ctx, per_sample: bool) -> Outcome {
    let set = ctx.sample()?;
    let verdicts: Vec<Value> = classify(&set.bundles, &ctx.tols)
        .into_iter()
        .map(|(c, r)| match r {
            Ok(mut v) => {
                let line = if v.degenerate {
                    "degenerate-holds"
                } else if v.holds {
                    "holds"
                } else {
                    "fails"
                };
                eprintln!(
                    "  {:<20} {:<17} residual {:.3e}",
                    c.name(),
                    line,
                    v.residual_rel
                );
                if !per_sample {
                    v.per_sample.clear();
                }
                serde_json::to_value(v).expect("verdicts serialize")
            }
            Err(e) => {
                eprintln!("  {:<20} error: {e}", c.name());
                json!({ "condition": c.name(), "error": e.to_string() })
            }
        })
        .collect();
    let deg = ctx.tols.get(TolKey::Degenerate);
    let moor = if ctx.spec.dim == 3 {
        set.bundles
            .iter()
            .find(|b| !is_degenerate(b, deg))
            .and_then(|b| moor_frame_3d(b).ok())
            .map(|f| serde_json::to_value(f).expect("frame serializes"))
    } else {
        None
    };
    eprintln!(
        "classify: '{}', {} of {} samples admissible",
        ctx.spec.name,
        set.bundles.len(),
        ctx.samples
    );
    let results = json!({
        "sampling": set.meta(),
        "verdicts": verdicts,
        "moor_frame_first_sample": moor,
    });
    ctx.emit("classify", None, &results)?;
    Ok(true)
}

fn summarize_field(r: &mut FieldCheckResult, per_sample: bool) -> Value {
    eprintln!(
        "  {:<16} {:<6} residual {:.3e}{}",
        r.condition.name(),
        if r.holds { "holds" } else { "fails" },
        r.residual_rel,
        if r.zero_field { " (zero field)" } else { "" }
    );
    if !per_sample {
        r.per_sample.clear();
    }
    serde_json::to_value(&*r).expect("field results serialize")
}

fn fields_cmd(
    ctx: Ctx,
    field: Option<PathBuf>,
    find_field: bool,
    condition: FieldCond,
    at: Option<At>,
    per_sample: bool,
) -> Outcome {
    if find_field {
        let x = match at {
            Some(at) => {
                ctx.check_dim("x", at.x.len())?;
                at.x
            }
            None => RegionSampler::new(&ctx.spec.region, ctx.seed).draw_x(),
        };
        let (ns, bundles) = fields::find_sc_field_with_bundles(
            &ctx.spec,
            &x,
            ctx.samples.max(2),
            ctx.seed,
            &ctx.tols,
        )?;
        let mut checks = Vec::new();
        for (k, v) in ns.basis.iter().enumerate() {
            let f = VectorFieldSpec::constant(format!("sc-nullspace-{}", k + 1), v);
            let mut r = fields::check_sc(&f, &bundles, &ctx.tols)?;
            checks.push(summarize_field(&mut r, per_sample));
        }
        eprintln!(
            "fields: SC nullspace of '{}' at x = {:?} has dimension {} (threshold {:.3e})",
            ctx.spec.name,
            ns.x,
            ns.basis.len(),
            ns.threshold
        );
        let results = json!({ "nullspace": ns, "basis_checks": checks });
        ctx.emit("fields", None, &results)?;
        return Ok(true);
    }
    let path =
        field.ok_or_else(|| InputError("fields: pass --field FILE or --find-field".into()))?;
    let f = load_field(&path)?;
    let set = ctx.sample()?;
    let b = &set.bundles;
    let want = |c: FieldCond| condition == c || condition == FieldCond::All;
    let mut checks = Vec::new();
    eprintln!("fields: '{}' on '{}'", f.name, ctx.spec.name);
    if want(FieldCond::Sc) {
        checks.push(summarize_field(
            &mut fields::check_sc(&f, b, &ctx.tols)?,
            per_sample,
        ));
    }
    if want(FieldCond::Cc) {
        checks.push(summarize_field(
            &mut fields::check_cc(&f, b, &ctx.tols)?,
            per_sample,
        ));
    }
    if want(FieldCond::Concurrent) {
        checks.push(summarize_field(
            &mut fields::check_concurrent(&f, b, &ctx.tols)?,
            per_sample,
        ));
    }
    let lemma = if want(FieldCond::Lemma) {
        let mut l = fields::lemma1_independence(&f, b, &ctx.tols)?;
        eprintln!(
            "  {:<16} {:?}, min margin {:.3e}",
            "Lemma 1", l.status, l.min_margin
        );
        if !per_sample {
            l.per_sample.clear();
            l.sc.per_sample.clear();
        }
        Some(l)
    } else {
        None
    };
    let results = json!({ "sampling": set.meta(), "checks": checks, "lemma": lemma });
    ctx.emit("fields", Some(&f), &results)?;
    Ok(true)
}

fn parse_theorems(s: &str) -> Result<Vec<TheoremId>, InputError> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(TheoremId::ALL.to_vec());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<TheoremId>()
                .map_err(|e| InputError(format!("--theorem: {e}")))
        })
        .collect()
}

fn verify_cmd(ctx: Ctx, theorem: &str, field: Option<PathBuf>, find_field: bool) -> Outcome {
    let ids = parse_theorems(theorem)?;
    let all = theorem.trim().eq_ignore_ascii_case("all");
    let field = field.as_deref().map(load_field).transpose()?;
    let mut reports: Vec<TheoremReport> = Vec::new();
    for id in ids {
        let input = match (&field, find_field) {
            (Some(f), _) => FieldInput::Field(f.clone()),
            // "all" with a nullspace search still runs the sigma theorems, without a field
            (None, true) if all && id.takes_sigma() => FieldInput::None,
            (None, true) => FieldInput::FindField,
            (None, false) => FieldInput::None,
        };
        let r = run_theorem::<f64>(id, &ctx.spec, &input, ctx.sampling(), &ctx.run_tols)
            .map_err(|e| InputError(format!("{id}: {e}")))?;
        let why = if r.verdict == Verdict::Vacuous {
            format!(" (fails: {})", r.failing_hypotheses().join(", "))
        } else {
            String::new()
        };
        eprintln!("  {:<3} {}{}", id.name(), r.verdict, why);
        reports.push(r);
    }
    let suite = identity_suite(&ctx.spec, ctx.sampling(), &ctx.run_tols)
        .map_err(|e| InputError(format!("{}: {e}", ctx.spec.name)))?;
    for i in suite.identities.iter().filter(|i| i.asserted && !i.passed) {
        eprintln!(
            "  identity failed: {} (residual {:.3e} > {:.1e})",
            i.name, i.max_residual, i.tolerance
        );
    }
    let violated = reports.iter().any(|r| r.verdict == Verdict::Violated);
    eprintln!(
        "verify: '{}', {} theorem(s), identities {}{}",
        ctx.spec.name,
        reports.len(),
        if suite.passed { "pass" } else { "FAIL" },
        if violated {
            ", VIOLATED verdicts present"
        } else {
            ""
        }
    );
    let results = json!({ "theorems": reports, "identities": suite });
    ctx.emit("verify", field.as_ref(), &results)?;
    Ok(suite.passed && !violated)
}

fn validate_cmd(ctx: Ctx) -> Outcome {
    let mut spec = ctx.spec.clone();
    spec.tolerances = ctx.tols.clone();
    let r = validate_spec(&spec, ctx.samples, ctx.seed)
        .map_err(|e| InputError(format!("{}: {e}", spec.name)))?;
    let line = |name: &str, s: &finsler_core::dsl::CheckSummary| {
        eprintln!(
            "  {:<20} {} passed, {} failed (worst {:.3e})",
            name, s.passed, s.failed, s.worst
        );
    };
    line("F > 0", &r.positivity);
    line("homogeneity", &r.homogeneity);
    line("positive-definite", &r.positive_definite);
    eprintln!(
        "validate: '{}' {}",
        spec.name,
        if r.passed() { "passes" } else { "FAILS" }
    );
    ctx.emit("validate", None, &serde_json::to_value(&r)?)?;
    Ok(r.passed())
}
