//! Implication-consistency checks for the semi-concurrent-field theorems.
//!
//! A theorem is never "proved" here. Each implication is evaluated on a
//! sample set and classified:
//! - `vacuous` when a hypothesis fails, or a "≠ 0" side condition sits
//!   inside its margin while the conclusion fails;
//! - `implication-consistent` when hypotheses and conclusion all hold;
//! - `violated` only when hypotheses hold, side conditions are clear of
//!   their margins, and the conclusion still fails.

mod identities;
mod report;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

pub use identities::{identity_suite, IdentityResult, IdentitySuite};
pub use report::{build_report, Report, ReportError, ReportInputs, SCHEMA};

use crate::dsl::{MetricSpec, VectorFieldSpec};
use crate::fields::{
    self, FieldCheckResult, FieldError, Lemma1Report, LemmaStatus, NullspaceResult,
};
use crate::sampling::{sample_bundles, RegionSampler, SampleError};
use crate::scalar::Scalar;
use crate::spaces::{self, is_degenerate, moor_frame_3d, ConditionVerdict, SpaceError};
use crate::tensors::{vec_norm, TensorBundle};
use crate::tolerance::{TolKey, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TheoremId {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    C1,
    L1,
}

impl TheoremId {
    pub const ALL: [TheoremId; 8] = [
        TheoremId::T1,
        TheoremId::T2,
        TheoremId::T3,
        TheoremId::T4,
        TheoremId::T5,
        TheoremId::T6,
        TheoremId::C1,
        TheoremId::L1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::T1 => "T1",
            TheoremId::T2 => "T2",
            TheoremId::T3 => "T3",
            TheoremId::T4 => "T4",
            TheoremId::T5 => "T5",
            TheoremId::T6 => "T6",
            TheoremId::C1 => "C1",
            TheoremId::L1 => "L1",
        }
    }

    pub fn statement(self) -> &'static str {
        match self {
            TheoremId::T1 => "quasi-C-reducible + semi-concurrent field => Riemannian",
            TheoremId::T2 => "C3-like + SC-condition + J = 0 => Riemannian",
            TheoremId::T3 => {
                "Ch-recurrent + semi-concurrent field + (1 + B^h K_h != 0) => Riemannian"
            }
            TheoremId::T4 => "P2-like + semi-concurrent field + (1 + B^h K_h != 0) => Riemannian",
            TheoremId::T5 => {
                "P-reducible + semi-concurrent field + (B^2 F^2 - B_0^2 != 0) => Landsberg"
            }
            TheoremId::T6 => "CC-condition: Riemannian <=> T_hijk = 0",
            TheoremId::C1 => "CC-condition: Riemannian <=> T_ij = 0",
            TheoremId::L1 => "nonzero semi-concurrent B => B and y independent",
        }
    }

    /// T6 and C1 take the covector `σ_h`; the others take `B^h`.
    pub fn takes_sigma(self) -> bool {
        matches!(self, TheoremId::T6 | TheoremId::C1)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = VerifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TheoremId::ALL
            .iter()
            .copied()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| VerifyError::UnknownTheorem(s.to_string()))
    }
}

impl Serialize for TheoremId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "implication-consistent")]
    Consistent,
    #[serde(rename = "vacuous")]
    Vacuous,
    #[serde(rename = "violated")]
    Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Consistent => "implication-consistent",
            Verdict::Vacuous => "vacuous",
            Verdict::Violated => "violated",
        })
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown theorem '{0}' (expected one of T1..T6, C1, L1)")]
    UnknownTheorem(String),
    #[error("{0} takes a covector sigma_h; --find-field searches semi-concurrent B^h and does not apply")]
    FindFieldUnsupported(TheoremId),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A hypothesis or conclusion evaluated over the sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// `None` when the check could not be evaluated (see `note`).
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub holds: bool,
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            residual: Some(residual),
            tolerance,
            holds: residual <= tolerance,
            degenerate: false,
            note: None,
        }
    }

    fn failed(name: &str, tolerance: f64, note: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            residual: None,
            tolerance,
            holds: false,
            degenerate: false,
            note: Some(note.into()),
        }
    }

    fn flag(name: &str, holds: bool, note: Option<String>) -> Self {
        Check {
            name: name.into(),
            residual: None,
            tolerance: 0.0,
            holds,
            degenerate: false,
            note,
        }
    }

    fn from_space(name: &str, r: &Result<ConditionVerdict, SpaceError>) -> Self {
        match r {
            Ok(v) => Check {
                name: name.into(),
                residual: Some(v.residual_rel),
                tolerance: v.tolerance,
                holds: v.holds,
                degenerate: v.degenerate,
                note: v.dimension_warning.clone(),
            },
            Err(e) => Check::failed(name, 0.0, e.to_string()),
        }
    }

    fn from_field(name: &str, r: &FieldCheckResult) -> Self {
        Check {
            name: name.into(),
            residual: Some(r.residual_rel),
            tolerance: r.tolerance,
            holds: r.holds,
            degenerate: r.zero_field,
            note: r
                .zero_field
                .then(|| "field vanishes at every sample".into()),
        }
    }
}

/// A "≠ 0" proviso: smallest normalized magnitude over the samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideCondition {
    pub name: String,
    /// `None` when no sample needed the condition (all degenerate).
    pub min_abs: Option<f64>,
    pub margin: f64,
    /// Clear of the margin at every sample.
    pub determinate: bool,
}

impl SideCondition {
    fn new(name: &str, values: impl IntoIterator<Item = f64>, margin: f64) -> Self {
        let min_abs = values.into_iter().map(f64::abs).reduce(f64::min);
        SideCondition {
            name: name.into(),
            min_abs,
            margin,
            determinate: min_abs.is_none_or(|v| v >= margin),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepLabel {
    /// Follows algebraically from the hypotheses.
    Implied,
    /// Needs more than the stated hypotheses (e.g. a concurrent-type field);
    /// evaluated for the supplied field, never asserted.
    HypothesisDependent,
    /// Printed intermediate whose derivation is not reproducible as written.
    Reported,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofStep {
    pub name: String,
    pub equation: String,
    /// Worst normalized residual over the non-degenerate samples.
    pub residual: f64,
    pub label: StepLabel,
}

fn step(
    name: &str,
    equation: &str,
    values: impl IntoIterator<Item = f64>,
    label: StepLabel,
) -> ProofStep {
    ProofStep {
        name: name.into(),
        equation: equation.into(),
        residual: values.into_iter().fold(0.0, f64::max),
        label,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Implication {
    pub name: String,
    pub hypotheses: Vec<Check>,
    pub side_conditions: Vec<SideCondition>,
    pub proof_steps: Vec<ProofStep>,
    pub conclusion: Check,
    pub verdict: Verdict,
    pub failing_hypotheses: Vec<String>,
    pub notes: Vec<String>,
}

impl Implication {
    fn decide(
        name: &str,
        hypotheses: Vec<Check>,
        side_conditions: Vec<SideCondition>,
        proof_steps: Vec<ProofStep>,
        conclusion: Check,
    ) -> Self {
        let failing: Vec<String> = hypotheses
            .iter()
            .filter(|h| !h.holds)
            .map(|h| h.name.clone())
            .collect();
        let mut notes = Vec::new();
        let verdict = if !failing.is_empty() {
            notes.push(format!("hypothesis fails: {}", failing.join(", ")));
            Verdict::Vacuous
        } else if conclusion.holds {
            Verdict::Consistent
        } else if let Some(s) = side_conditions.iter().find(|s| !s.determinate) {
            notes.push(format!("side condition indeterminate: {}", s.name));
            Verdict::Vacuous
        } else {
            Verdict::Violated
        };
        Implication {
            name: name.into(),
            hypotheses,
            side_conditions,
            proof_steps,
            conclusion,
            verdict,
            failing_hypotheses: failing,
            notes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    None,
    Supplied,
    Nullspace,
}

#[derive(Debug, Clone)]
pub enum FieldInput {
    None,
    Field(VectorFieldSpec),
    /// Search the semi-concurrent nullspace at a sampled chart point.
    FindField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SamplingConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            samples: 100,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleInfo {
    pub requested: usize,
    pub accepted: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub theorem: TheoremId,
    pub statement: &'static str,
    pub metric: String,
    pub field: Option<String>,
    pub field_source: FieldSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nullspace: Option<NullspaceResult>,
    pub samples: SampleInfo,
    pub parts: Vec<Implication>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma: Option<Lemma1Report>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl TheoremReport {
    /// The failing hypotheses of every vacuous part.
    pub fn failing_hypotheses(&self) -> Vec<&str> {
        self.parts
            .iter()
            .filter(|p| p.verdict == Verdict::Vacuous)
            .flat_map(|p| p.failing_hypotheses.iter().map(String::as_str))
            .collect()
    }
}

fn overall(parts: &[Implication]) -> Verdict {
    if parts.iter().any(|p| p.verdict == Verdict::Violated) {
        Verdict::Violated
    } else if parts.iter().any(|p| p.verdict == Verdict::Consistent) {
        Verdict::Consistent
    } else {
        Verdict::Vacuous
    }
}

/// Field available to a theorem run, or the reason it is missing.
pub enum FieldStatus<'a> {
    Supplied(&'a VectorFieldSpec),
    Missing(String),
}

/// Samples the metric (or searches the nullspace) and runs one theorem.
pub fn run_theorem<T: Scalar>(
    id: TheoremId,
    spec: &MetricSpec,
    input: &FieldInput,
    cfg: SamplingConfig,
    tols: &Tolerances,
) -> Result<TheoremReport, VerifyError> {
    let tols = spec.tolerances.merged(tols);
    let (bundles, field, source, nullspace, mut notes) = match input {
        FieldInput::FindField => {
            if id.takes_sigma() {
                return Err(VerifyError::FindFieldUnsupported(id));
            }
            let x: Vec<T> = RegionSampler::new(&spec.region, cfg.seed)
                .draw_x()
                .into_iter()
                .map(T::lit)
                .collect();
            let (ns, bundles) =
                fields::find_sc_field_with_bundles(spec, &x, cfg.samples.max(2), cfg.seed, &tols)?;
            let mut notes = vec![format!(
                "samples share the chart point x = {:?} used for the nullspace search",
                ns.x
            )];
            let field = ns.basis.first().map(|v| {
                notes.push("B is the first nullspace basis vector, held constant".into());
                VectorFieldSpec::constant("sc-nullspace-1", v)
            });
            (bundles, field, FieldSource::Nullspace, Some(ns), notes)
        }
        FieldInput::Field(f) => {
            let set = sample_bundles(spec, &tols, cfg.samples, cfg.seed)?;
            (
                set.bundles,
                Some(f.clone()),
                FieldSource::Supplied,
                None,
                Vec::new(),
            )
        }
        FieldInput::None => {
            let set = sample_bundles(spec, &tols, cfg.samples, cfg.seed)?;
            (set.bundles, None, FieldSource::None, None, Vec::new())
        }
    };
    let status = match (&field, &nullspace) {
        (Some(f), _) => FieldStatus::Supplied(f),
        (None, Some(_)) => FieldStatus::Missing(
            "no semi-concurrent direction exists at the sampled x (empty nullspace)".into(),
        ),
        (None, None) => FieldStatus::Missing("no field supplied".into()),
    };
    let (parts, lemma) = run_on(id, &bundles, &status, &tols)?;
    if bundles.len() < cfg.samples && source != FieldSource::Nullspace {
        notes.push(format!(
            "only {} of {} requested samples were admissible",
            bundles.len(),
            cfg.samples
        ));
    }
    Ok(TheoremReport {
        theorem: id,
        statement: id.statement(),
        metric: spec.name.clone(),
        field: field.map(|f| f.name),
        field_source: source,
        nullspace,
        samples: SampleInfo {
            requested: cfg.samples,
            accepted: bundles.len(),
            seed: cfg.seed,
        },
        verdict: overall(&parts),
        parts,
        lemma,
        notes,
    })
}

/// Runs one theorem on an existing sample set.
pub fn run_on<T: Scalar>(
    id: TheoremId,
    bundles: &[TensorBundle<T>],
    field: &FieldStatus<'_>,
    tols: &Tolerances,
) -> Result<(Vec<Implication>, Option<Lemma1Report>), VerifyError> {
    if bundles.is_empty() {
        return Err(FieldError::Empty.into());
    }
    let ctx = Ctx::new(bundles, tols);
    let f = match field {
        FieldStatus::Supplied(f) => Some(FieldValues::new(f, bundles)?),
        FieldStatus::Missing(_) => None,
    };
    let missing = |name: &str| match field {
        FieldStatus::Missing(reason) => Check::failed(name, 0.0, reason.clone()),
        FieldStatus::Supplied(_) => unreachable!(),
    };
    let parts = match id {
        TheoremId::T1 => vec![theorem1(&ctx, f.as_ref(), missing)?],
        TheoremId::T2 => vec![theorem2(&ctx, f.as_ref(), missing)?],
        TheoremId::T3 => vec![theorem34(&ctx, f.as_ref(), missing, false)?],
        TheoremId::T4 => vec![theorem34(&ctx, f.as_ref(), missing, true)?],
        TheoremId::T5 => vec![theorem5(&ctx, f.as_ref(), missing)?],
        TheoremId::T6 => theorem6(&ctx, f.as_ref(), missing, false)?,
        TheoremId::C1 => theorem6(&ctx, f.as_ref(), missing, true)?,
        TheoremId::L1 => {
            let Some(fv) = f else {
                let part = Implication::decide(
                    "nonzero SC field => B, y independent",
                    vec![missing("semi-concurrent field")],
                    vec![],
                    vec![],
                    Check::flag("B and y independent", true, Some("not evaluated".into())),
                );
                return Ok((vec![part], None));
            };
            let rep = fields::lemma1_independence(fv.spec, bundles, tols)?;
            return Ok((vec![lemma_part(&rep)], Some(rep)));
        }
    };
    Ok((parts, None))
}

struct Ctx<'a, T: Scalar> {
    bundles: &'a [TensorBundle<T>],
    tols: &'a Tolerances,
    deg: f64,
    margin: f64,
}

impl<'a, T: Scalar> Ctx<'a, T> {
    fn new(bundles: &'a [TensorBundle<T>], tols: &'a Tolerances) -> Self {
        Ctx {
            bundles,
            tols,
            deg: tols.get(TolKey::Degenerate),
            margin: tols.get(TolKey::SideMargin),
        }
    }

    /// Indices of samples where `C` does not vanish.
    fn live(&self) -> impl Iterator<Item = (usize, &'a TensorBundle<T>)> + '_ {
        let deg = self.deg;
        self.bundles
            .iter()
            .enumerate()
            .filter(move |(_, b)| !is_degenerate(b, deg))
    }

    fn riemannian_conclusion(&self) -> Check {
        let r = self
            .bundles
            .iter()
            .map(|b| rel(b.c_norm(), b.c_norm()))
            .fold(0.0, f64::max);
        Check::new("Riemannian (C = 0)", r, self.tols.get(TolKey::Conclusion))
    }
}

fn rel<T: Scalar>(raw: T, lhs: T) -> f64 {
    raw.to_f64_lossy() / (1.0 + lhs.to_f64_lossy())
}

struct FieldValues<'a, T: Scalar> {
    spec: &'a VectorFieldSpec,
    values: Vec<DVector<T>>,
}

impl<'a, T: Scalar> FieldValues<'a, T> {
    fn new(spec: &'a VectorFieldSpec, bundles: &[TensorBundle<T>]) -> Result<Self, FieldError> {
        if spec.dim() != bundles[0].dim() {
            return Err(FieldError::Dimension {
                name: spec.name.clone(),
                field: spec.dim(),
                metric: bundles[0].dim(),
            });
        }
        let values = bundles
            .iter()
            .enumerate()
            .map(|(index, b)| {
                spec.eval(b.x())
                    .map_err(|source| FieldError::Evaluation { index, source })
            })
            .collect::<Result<_, _>>()?;
        Ok(FieldValues { spec, values })
    }

    fn nonzero(&self) -> Check {
        let zero = self.values.iter().filter(|v| v.norm() == T::zero()).count();
        Check::flag(
            "B != 0",
            zero == 0,
            (zero > 0).then(|| format!("field vanishes at {zero} sample(s)")),
        )
    }
}

/// `g(B, B)`, `h(B, B)` and `B_0 = g(B, y)`.
fn b_scalars<T: Scalar>(b: &TensorBundle<T>, v: &DVector<T>) -> (T, T, T) {
    let gb = &b.g * v;
    let y = DVector::from_column_slice(b.y());
    let b_sq = gb.dot(v);
    let b_0 = gb.dot(&y);
    let h_bb = (&b.h * v).dot(v);
    (b_sq, h_bb, b_0)
}

/// `|h(B,B)| ‖C_k‖ / (g(B,B) (1 + ‖C_k‖))`, the contracted form shared by
/// Theorems 1 and 5.
fn bbhc<T: Scalar>(b: &TensorBundle<T>, v: &DVector<T>) -> f64 {
    let (b_sq, h_bb, _) = b_scalars(b, v);
    if b_sq == T::zero() {
        return 0.0;
    }
    let cn = vec_norm(&b.c_mean);
    (num_traits::Float::abs(h_bb) * cn / (b_sq * (T::one() + cn))).to_f64_lossy()
}

fn theorem1<T: Scalar>(
    ctx: &Ctx<'_, T>,
    f: Option<&FieldValues<'_, T>>,
    missing: impl Fn(&str) -> Check,
) -> Result<Implication, VerifyError> {
    let quasi = Check::from_space(
        "quasi-C-reducible",
        &spaces::check_quasi_c_reducible(ctx.bundles, ctx.tols),
    );
    let Some(f) = f else {
        return Ok(Implication::decide(
            "T1",
            vec![quasi, missing("SC-condition")],
            vec![],
            vec![],
            ctx.riemannian_conclusion(),
        ));
    };
    let sc = fields::check_sc(f.spec, ctx.bundles, ctx.tols)?;
    let side = SideCondition::new(
        "h_ij B^i B^j != 0 (L1)",
        ctx.live().map(|(i, b)| {
            let (b_sq, h_bb, _) = b_scalars(b, &f.values[i]);
            (h_bb / b_sq).to_f64_lossy()
        }),
        ctx.margin,
    );
    let contracted = step(
        "SC contracted with B",
        "B^i B^j h_ij C_k = 0",
        ctx.live().map(|(i, b)| bbhc(b, &f.values[i])),
        StepLabel::Implied,
    );
    Ok(Implication::decide(
        "T1",
        vec![quasi, Check::from_field("SC-condition", &sc), f.nonzero()],
        vec![side],
        vec![contracted],
        ctx.riemannian_conclusion(),
    ))
}

fn theorem2<T: Scalar>(
    ctx: &Ctx<'_, T>,
    f: Option<&FieldValues<'_, T>>,
    missing: impl Fn(&str) -> Check,
) -> Result<Implication, VerifyError> {
    let n = ctx.bundles[0].dim();
    let c3 = spaces::fit_c3_like(ctx.bundles, ctx.tols);
    let mut hyps = vec![
        Check::flag(
            "n = 3 (main scalar J)",
            n == 3,
            (n != 3).then(|| format!("J is defined through the 3-dimensional Moor frame; n = {n}")),
        ),
        Check::from_space("C3-like", &c3),
    ];
    let mut notes = Vec::new();
    let mut expansion = Vec::new();
    let mut main_scalar = Vec::new();
    if n == 3 {
        let mut j_res: f64 = 0.0;
        for (i, b) in ctx.live() {
            let Ok(frame) = moor_frame_3d(b) else {
                continue;
            };
            let scale = 1.0 + frame.h_scalar.abs() + frame.i_scalar.abs() + frame.j_scalar.abs();
            j_res = j_res.max(frame.j_scalar.abs() / scale);
            let Some(v) = f.map(|f| &f.values[i]) else {
                continue;
            };
            let (b_sq, h_bb, _) = b_scalars(b, v);
            let b_sq = b_sq.to_f64_lossy();
            if b_sq == 0.0 {
                continue;
            }
            let vf: Vec<f64> = v.iter().map(|x| x.to_f64_lossy()).collect();
            let h_b: Vec<f64> = (0..3)
                .map(|k| (0..3).map(|j| b.h[(k, j)].to_f64_lossy() * vf[j]).sum())
                .collect();
            if let Some(a) = c3
                .as_ref()
                .ok()
                .and_then(|v| v.per_sample.get(i))
                .and_then(|s| s.fitted.get("a"))
            {
                let a_b: f64 = a.iter().zip(&vf).map(|(x, y)| x * y).sum();
                let r: Vec<f64> = (0..3)
                    .map(|k| h_bb.to_f64_lossy() * a[k] + 2.0 * h_b[k] * a_b)
                    .collect();
                let an: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                expansion.push(vec_norm(&r) / (b_sq * (1.0 + an)));
            }
            let l = b.f().to_f64_lossy();
            let c = b.c_norm().to_f64_lossy();
            let r: Vec<f64> = (0..3)
                .map(|k| {
                    b_sq * frame.i_scalar / (l * c) * b.c_mean[k].to_f64_lossy()
                        + b_sq * frame.j_scalar / l * frame.nvec[k]
                })
                .collect();
            main_scalar.push(vec_norm(&r) / (b_sq * (1.0 + c)));
        }
        hyps.push(Check::new("J = 0", j_res, ctx.tols.get(TolKey::Conclusion)));
        notes.push(
            "the frame expansion and the main-scalar form are evaluated independently; the step between them is not asserted".into(),
        );
    }
    let sides = Vec::new();
    let steps = vec![
        step(
            "frame expansion contracted with B",
            "B^i B^j (h_ij a_k + h_jk a_i + h_ki a_j) = 0",
            expansion,
            StepLabel::Reported,
        ),
        step(
            "main-scalar form",
            "(B^2 I / (L C)) C_k + (B^2 J / L) n_k = 0",
            main_scalar,
            StepLabel::Reported,
        ),
    ];
    match f {
        Some(f) => {
            let sc = fields::check_sc(f.spec, ctx.bundles, ctx.tols)?;
            hyps.push(Check::from_field("SC-condition", &sc));
            hyps.push(f.nonzero());
        }
        None => hyps.push(missing("SC-condition")),
    }
    let mut imp = Implication::decide("T2", hyps, sides, steps, ctx.riemannian_conclusion());
    imp.notes.extend(notes);
    Ok(imp)
}

/// Theorems 3 (Ch-recurrent) and 4 (P2-like).
fn theorem34<T: Scalar>(
    ctx: &Ctx<'_, T>,
    f: Option<&FieldValues<'_, T>>,
    missing: impl Fn(&str) -> Check,
    p2: bool,
) -> Result<Implication, VerifyError> {
    let (name, class) = if p2 {
        ("T4", spaces::check_p2_like(ctx.bundles, ctx.tols))
    } else {
        ("T3", spaces::check_ch_recurrent(ctx.bundles, ctx.tols))
    };
    let class_check = Check::from_space(if p2 { "P2-like" } else { "Ch-recurrent" }, &class);
    let Some(f) = f else {
        return Ok(Implication::decide(
            name,
            vec![class_check, missing("SC-condition")],
            vec![],
            vec![],
            ctx.riemannian_conclusion(),
        ));
    };
    let sc = fields::check_sc(f.spec, ctx.bundles, ctx.tols)?;
    let k_of =
        |i: usize| -> Option<&Vec<f64>> { class.as_ref().ok()?.per_sample.get(i)?.fitted.get("K") };
    let side = SideCondition::new(
        "1 + B^h K_h != 0",
        ctx.live().filter_map(|(i, _)| {
            let k = k_of(i)?;
            let bk: f64 = k
                .iter()
                .zip(f.values[i].iter())
                .map(|(k, b)| k * b.to_f64_lossy())
                .sum();
            Some(1.0 + bk)
        }),
        ctx.margin,
    );
    let mut r3 = Vec::new();
    let mut r4 = Vec::new();
    for (i, b) in ctx.live() {
        let v = f.values[i].as_slice();
        let bn = vec_norm(v);
        if bn == T::zero() {
            continue;
        }
        let bp = b.p.contract_first(v);
        let bch = b.c_hder.contract_last(v);
        r3.push(
            (bp.sub(&bch).norm() / (bn * (T::one() + b.p.norm() + b.c_hder.norm()))).to_f64_lossy(),
        );
        r4.push(rel(bch.add(&b.c).norm(), b.c.norm()));
    }
    let steps = vec![
        step(
            "P contracted with B",
            "B^h P_hijk = B^h C_ijk|h",
            r3,
            StepLabel::HypothesisDependent,
        ),
        step(
            "concurrency along B",
            "B^h C_ijk|h = -C_ijk",
            r4,
            StepLabel::HypothesisDependent,
        ),
    ];
    let mut imp = Implication::decide(
        name,
        vec![
            class_check,
            Check::from_field("SC-condition", &sc),
            f.nonzero(),
        ],
        vec![side],
        steps,
        ctx.riemannian_conclusion(),
    );
    imp.notes.push(
        "the Ricci-identity step presupposes a concurrent-type field; its residual is reported for the supplied field only"
            .into(),
    );
    Ok(imp)
}

fn theorem5<T: Scalar>(
    ctx: &Ctx<'_, T>,
    f: Option<&FieldValues<'_, T>>,
    missing: impl Fn(&str) -> Check,
) -> Result<Implication, VerifyError> {
    let p_red = spaces::check_p_reducible_landsberg(ctx.bundles, ctx.tols).map(|(p, _)| p);
    let p_check = Check::from_space("P-reducible", &p_red);
    let conclusion = {
        let r = ctx
            .bundles
            .iter()
            .map(|b| rel(b.p_lo.norm(), b.p_lo.norm()))
            .fold(0.0, f64::max);
        Check::new("Landsberg (P_ijk = 0)", r, ctx.tols.get(TolKey::Conclusion))
    };
    let mut notes = Vec::new();
    if let Ok(v) = &p_red {
        if let Some(gap) = v.fitted.get("P_i_minus_C_i_norm_max") {
            notes.push(format!(
                "the proof uses P_i = C_i; max |P_i - C_i| = {gap:e}"
            ));
        }
    }
    let Some(f) = f else {
        let mut imp = Implication::decide(
            "T5",
            vec![p_check, missing("SC-condition")],
            vec![],
            vec![],
            conclusion,
        );
        imp.notes.extend(notes);
        return Ok(imp);
    };
    let sc = fields::check_sc(f.spec, ctx.bundles, ctx.tols)?;
    let mut side_vals = Vec::new();
    let mut reduction = Vec::new();
    for (i, b) in ctx.live() {
        let (b_sq, _, b_0) = b_scalars(b, &f.values[i]);
        let ff = b.f() * b.f();
        let denom = b_sq * ff;
        if denom == T::zero() {
            continue;
        }
        let s = (b_sq * ff - b_0 * b_0) / denom;
        side_vals.push(s.to_f64_lossy());
        let cn = vec_norm(&b.c_mean);
        reduction.push((num_traits::Float::abs(s) * cn / (T::one() + cn)).to_f64_lossy());
    }
    let steps = vec![
        step(
            "SC contracted with B",
            "B^i B^j h_ij C_k = 0",
            ctx.live().map(|(i, b)| bbhc(b, &f.values[i])),
            StepLabel::HypothesisDependent,
        ),
        step(
            "reduction to C_k",
            "(B^2 F^2 - B_0^2) C_k = 0",
            reduction,
            StepLabel::HypothesisDependent,
        ),
    ];
    let mut imp = Implication::decide(
        "T5",
        vec![p_check, Check::from_field("SC-condition", &sc), f.nonzero()],
        vec![SideCondition::new(
            "B^2 F^2 - B_0^2 != 0",
            side_vals,
            ctx.margin,
        )],
        steps,
        conclusion,
    );
    notes.push(
        "the proof identifies P_ijk with C_ijk; the steps are labeled hypothesis-dependent".into(),
    );
    imp.notes.extend(notes);
    Ok(imp)
}

/// Theorem 6 (`trace = false`, full `T_hijk`) and Corollary 1 (`T_ij`).
fn theorem6<T: Scalar>(
    ctx: &Ctx<'_, T>,
    f: Option<&FieldValues<'_, T>>,
    missing: impl Fn(&str) -> Check,
    trace: bool,
) -> Result<Vec<Implication>, VerifyError> {
    let (label, t_norm): (&str, Box<dyn Fn(&TensorBundle<T>) -> f64>) = if trace {
        (
            "T_ij = 0",
            Box::new(|b: &TensorBundle<T>| {
                rel(
                    crate::tensors::mat_norm(&b.t2),
                    crate::tensors::mat_norm(&b.t2),
                )
            }),
        )
    } else {
        (
            "T_hijk = 0",
            Box::new(|b: &TensorBundle<T>| rel(b.t.norm(), b.t.norm())),
        )
    };
    let t_res = ctx.bundles.iter().map(|b| t_norm(b)).fold(0.0, f64::max);
    let tid = if trace { "C1" } else { "T6" };

    let riem = Check::from_space("Riemannian", &spaces::is_riemannian(ctx.bundles, ctx.tols));
    let forward = Implication::decide(
        &format!("{tid} forward: Riemannian => {label}"),
        vec![riem],
        vec![],
        vec![],
        Check::new(label, t_res, ctx.tols.get(TolKey::Conclusion)),
    );

    let t_hyp = Check::new(label, t_res, ctx.tols.get(TolKey::TCondition));
    let converse_name = format!("{tid} converse: CC-condition + {label} => Riemannian");
    let Some(f) = f else {
        let converse = Implication::decide(
            &converse_name,
            vec![missing("CC-condition"), t_hyp],
            vec![],
            vec![],
            ctx.riemannian_conclusion(),
        );
        return Ok(vec![forward, converse]);
    };
    let cc = fields::check_cc(f.spec, ctx.bundles, ctx.tols)?;
    let mut sigma0 = Vec::new();
    let mut vder = Vec::new();
    let mut contracted = Vec::new();
    for (i, b) in ctx.live() {
        let s = &f.values[i];
        let sn = s.norm();
        if sn == T::zero() {
            continue;
        }
        let y = DVector::from_column_slice(b.y());
        let s0 = s.dot(&y);
        sigma0.push((s0 / (sn * y.norm())).to_f64_lossy());
        let s_up = &b.g_inv * s;
        let sv = b.c_vder.contract_first(s_up.as_slice());
        vder.push((sv.norm() / (sn * (T::one() + b.c_vder.norm()))).to_f64_lossy());
        let k = s0 / b.f();
        let r = if trace {
            vec_norm(&b.c_mean.iter().map(|&c| k * c).collect::<Vec<_>>())
                / (sn * (T::one() + vec_norm(&b.c_mean)))
        } else {
            b.c.scale(k).norm() / (sn * (T::one() + b.c.norm()))
        };
        contracted.push(r.to_f64_lossy());
    }
    let steps = if trace {
        vec![
            step(
                "sigma_h|k = 0",
                "sigma^h C_hij|k = 0",
                vder,
                StepLabel::Implied,
            ),
            step(
                "contraction",
                "(sigma_0 / F) C_j = 0",
                contracted,
                StepLabel::Implied,
            ),
        ]
    } else {
        vec![
            step(
                "sigma_h|k = 0",
                "sigma^h C_hij|k = 0",
                vder,
                StepLabel::Implied,
            ),
            step(
                "contraction",
                "(sigma_0 / F) C_ijk = 0",
                contracted,
                StepLabel::Implied,
            ),
        ]
    };
    let mut nz = f.nonzero();
    nz.name = "sigma != 0".into();
    let converse = Implication::decide(
        &converse_name,
        vec![Check::from_field("CC-condition", &cc), t_hyp, nz],
        vec![SideCondition::new("sigma_0 != 0", sigma0, ctx.margin)],
        steps,
        ctx.riemannian_conclusion(),
    );
    Ok(vec![forward, converse])
}

fn lemma_part(rep: &Lemma1Report) -> Implication {
    let mut hyps = vec![
        Check::from_field("SC-condition", &rep.sc),
        Check::flag(
            "B != 0",
            rep.zero_field_samples == 0,
            (rep.zero_field_samples > 0)
                .then(|| format!("B = 0 at {} sample(s)", rep.zero_field_samples)),
        ),
    ];
    if rep.status == LemmaStatus::NotAsserted {
        hyps.push(Check::flag(
            "C != 0",
            false,
            Some(
                "C vanishes at every sample; every B is semi-concurrent and may be parallel to y"
                    .into(),
            ),
        ));
    }
    let conclusion = Check {
        name: "B and y independent (min margin above tolerance)".into(),
        residual: Some(rep.min_margin),
        tolerance: rep.threshold,
        holds: rep.per_sample.iter().all(|s| s.independent),
        degenerate: false,
        note: None,
    };
    let mut imp = Implication::decide("L1", hyps, vec![], vec![], conclusion);
    imp.notes.extend(rep.notes.iter().cloned());
    imp
}
