//! Run configuration, stage runners and report bundles.
//!
//! Every command writes one JSON summary (`<command>.json`) into the output
//! directory. Summaries carry the verdicts, the raw residuals they were decided
//! from, and a list of re-checks that [`verify_dir`] replays from the emitted
//! CSV grids alone.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::congruence::{
    build_congruence, envelope_reconstruct, isothermal_reparam, m_chart, slab_region, tangency_residual, CongruenceReport,
    ExampleSurfaceSpec,
};
use crate::cs::{evaluate_candidate, membership_residual, BoundaryFn, Branch, CandidateSpec, CsCandidate, CsOptions, CsStatus};
use crate::deform::{build_bundle, project_deformation, structure_residuals, synthesize, check_box, DeformationReport, StructureResiduals};
use crate::error::{GeomError, Result};
use crate::grid::{max_over, Field, GridChart, MIN_SAMPLES};
use crate::hypersurface::{splitting_report, ShapeOptions, SplittingReport};
use crate::io::{read_field_csv, write_field_csv, write_json};
use crate::lorentz::{ldot, LightConeModel};
use crate::surface::{ConjugateKind, SurfaceGeometry};
use crate::triple::{
    flatness_check, genuineness_diagnostics, lift_to_m, reconstruct_bar_triple, triple_distance, verify_bar, verify_conditions,
    BarReport, BarTriple, Flatness, Genuineness, LiftedReport, TripleOptions,
};

// ---------------------------------------------------------------- config

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GalleryConfig {
    pub surface: ExampleSurfaceSpec,
    pub h: f64,
    /// Samples per axis at the base level.
    pub samples: usize,
    /// Number of halvings of h in the Christoffel convergence table.
    pub refine: usize,
}

impl Default for GalleryConfig {
    fn default() -> Self {
        GalleryConfig { surface: ExampleSurfaceSpec::planar(9), h: 0.025, samples: 64, refine: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub surface: ExampleSurfaceSpec,
    pub h: f64,
    pub samples: usize,
    /// Samples on each sphere angle t₁, …, t_{n−2}.
    pub leaf_counts: Vec<usize>,
    /// Name of the candidate carried through the deformation.
    pub member: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            surface: ExampleSurfaceSpec::twisted(9),
            h: 0.05,
            samples: 32,
            leaf_counts: vec![8, 5, 5, 5],
            member: "u_from_lambda".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedCandidate {
    pub name: String,
    pub spec: CandidateSpec,
    #[serde(default)]
    pub expect: Option<CsStatus>,
}

/// Tolerance constants. Discretisation bounds are `c·h²`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub c: f64,
    /// Algebraic identities.
    pub algebraic: f64,
    pub light_cone: f64,
    /// Genuineness and (d), (e), (viii), (ix) margins must exceed this.
    pub margin: f64,
    /// Span{I} distance below which a sample counts as surface-like.
    pub splitting: f64,
    /// Two members must give triples at least this far apart.
    pub distinct: f64,
    /// Accepted range of the error ratio per halving of h.
    pub ratio: [f64; 2],
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            c: 10.0,
            algebraic: 1e-10,
            light_cone: 1e-6,
            margin: 1e-10,
            splitting: 1e-3,
            distinct: 1e-3,
            ratio: [3.5, 4.5],
        }
    }
}

impl Tolerances {
    /// Scale the upper bounds (`c`, `algebraic`, `light_cone`).
    pub fn scaled(&self, x: f64) -> Self {
        Tolerances { c: self.c * x, algebraic: self.algebraic * x, light_cone: self.light_cone * x, ..self.clone() }
    }

    fn h2(&self, h: f64) -> f64 {
        self.c * h * h
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gallery: GalleryConfig,
    pub pipeline: PipelineConfig,
    pub candidates: Vec<NamedCandidate>,
    pub tolerances: Tolerances,
    pub out: PathBuf,
    pub emit_csv: bool,
}

fn poly(c: &[f64]) -> BoundaryFn {
    BoundaryFn::Polynomial { coeffs: c.to_vec() }
}

fn hyperbolic(u: BoundaryFn, v: BoundaryFn) -> CandidateSpec {
    CandidateSpec::Hyperbolic { u, v, normalize_by_conformal_factor: true }
}

pub fn default_candidates() -> Vec<NamedCandidate> {
    let named = |name: &str, spec, expect| NamedCandidate { name: name.into(), spec, expect: Some(expect) };
    vec![
        named("const_v", hyperbolic(poly(&[1.0, 0.0, 1.0]), BoundaryFn::ConstV { k: 1.0 }), CsStatus::Member),
        named(
            "u_from_lambda",
            hyperbolic(BoundaryFn::UFromLambda { c: 2.0, scale: 0.5 }, poly(&[1.0, 0.0, 1.0])),
            CsStatus::Member,
        ),
        named(
            "u_from_lambda_unscaled",
            hyperbolic(BoundaryFn::UFromLambda { c: 2.0, scale: 1.0 }, poly(&[1.0, 0.0, 1.0])),
            CsStatus::NonMember,
        ),
        named("polynomial", hyperbolic(poly(&[1.0, 0.0, 1.0]), poly(&[1.0, 0.0, 1.0])), CsStatus::NonMember),
    ]
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gallery: GalleryConfig::default(),
            pipeline: PipelineConfig::default(),
            candidates: default_candidates(),
            tolerances: Tolerances::default(),
            out: PathBuf::from("out"),
            emit_csv: false,
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(GeomError::Spec(format!("{name} must be positive, got {x}")))
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.gallery;
        let p = &self.pipeline;
        let t = &self.tolerances;
        g.surface.validate()?;
        p.surface.validate()?;
        positive("gallery.h", g.h)?;
        positive("pipeline.h", p.h)?;
        for (name, x) in [
            ("tolerances.c", t.c),
            ("tolerances.algebraic", t.algebraic),
            ("tolerances.light_cone", t.light_cone),
            ("tolerances.margin", t.margin),
            ("tolerances.splitting", t.splitting),
            ("tolerances.distinct", t.distinct),
            ("tolerances.ratio[0]", t.ratio[0]),
        ] {
            positive(name, x)?;
        }
        if t.ratio[1] < t.ratio[0] {
            return Err(GeomError::Spec("tolerances.ratio must be increasing".into()));
        }
        let counts = std::iter::once(g.samples).chain(std::iter::once(p.samples)).chain(p.leaf_counts.iter().copied());
        for c in counts {
            if c < MIN_SAMPLES {
                return Err(GeomError::Spec(format!("resolutions must be at least {MIN_SAMPLES} per axis, got {c}")));
            }
        }
        if p.leaf_counts.len() < 2 {
            return Err(GeomError::Spec("pipeline.leaf_counts needs n - 2 >= 2 entries".into()));
        }
        let n = p.leaf_counts.len() + 2;
        if p.surface.ambient_dim != n + 3 {
            return Err(GeomError::Spec(format!(
                "pipeline surface must live in dimension n + 3 = {}, got {}",
                n + 3,
                p.surface.ambient_dim
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &self.candidates {
            if c.name.is_empty() || !c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
                return Err(GeomError::Spec(format!("candidate name `{}` must be [A-Za-z0-9_-]+", c.name)));
            }
            if !seen.insert(c.name.clone()) {
                return Err(GeomError::Spec(format!("duplicate candidate name `{}`", c.name)));
            }
        }
        if !seen.contains(&p.member) {
            return Err(GeomError::Spec(format!("pipeline.member `{}` is not a candidate", p.member)));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn cs_options(&self) -> CsOptions {
        CsOptions { c: self.tolerances.c, ..CsOptions::default() }
    }
}

// ---------------------------------------------------------------- reports

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// residual ≤ bound.
    AtMost,
    /// residual > bound.
    Above,
    /// residual ∈ [bound, upper].
    Within,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub residual: f64,
    pub relation: Relation,
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub at: Option<Vec<usize>>,
    pub pass: bool,
}

#[derive(Default)]
struct Verdicts(Vec<Verdict>);

impl Verdicts {
    fn push(&mut self, name: String, residual: f64, relation: Relation, bound: f64, upper: Option<f64>, at: Option<Vec<usize>>) {
        let pass = match relation {
            Relation::AtMost => residual <= bound,
            Relation::Above => residual > bound,
            Relation::Within => residual >= bound && residual <= upper.unwrap_or(f64::INFINITY),
        };
        self.0.push(Verdict { name, residual, relation, bound, upper, at, pass });
    }

    fn le(&mut self, name: impl Into<String>, residual: f64, bound: f64) {
        self.push(name.into(), residual, Relation::AtMost, bound, None, None);
    }

    fn le_at(&mut self, name: impl Into<String>, residual: f64, bound: f64, at: &[usize]) {
        self.push(name.into(), residual, Relation::AtMost, bound, None, Some(at.to_vec()));
    }

    fn gt(&mut self, name: impl Into<String>, residual: f64, bound: f64) {
        self.push(name.into(), residual, Relation::Above, bound, None, None);
    }

    fn within(&mut self, name: impl Into<String>, residual: f64, range: [f64; 2]) {
        self.push(name.into(), residual, Relation::Within, range[0], Some(range[1]), None);
    }
}

/// A stage that could not complete, with the residual that stopped it if any.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub detail: String,
    pub residual: Option<f64>,
}

impl StageFailure {
    fn from_error(stage: &str, e: &GeomError) -> Self {
        let residual = match e {
            GeomError::Asymmetric { value, .. } | GeomError::PathDependence { value } | GeomError::NotTwoParameter { value } => Some(*value),
            _ => None,
        };
        StageFailure { stage: stage.into(), detail: e.to_string(), residual }
    }
}

/// Residuals that `verify` recomputes from emitted grids.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Recheck {
    Membership {
        name: String,
        rho: String,
        geometry: String,
        elliptic: bool,
        options: CsOptions,
        residual: f64,
        threshold: f64,
        member: bool,
    },
    Conformality {
        f: String,
        phi: String,
        metric: String,
        residual: f64,
        bound: f64,
    },
    LightCone {
        f_tilde: String,
        residual: f64,
        bound: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    /// No stage draws random numbers.
    pub seed: Option<u64>,
    pub version: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportBundle<T> {
    pub command: String,
    pub provenance: Provenance,
    pub passed: bool,
    pub failure: Option<StageFailure>,
    pub verdicts: Vec<Verdict>,
    pub report: T,
    pub rechecks: Vec<Recheck>,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChristoffelRow {
    pub h: f64,
    pub samples: usize,
    /// max |Γ¹|.
    pub gamma1: f64,
    /// max |Γ² − λ′|.
    pub gamma2: f64,
    pub gamma2_at: Vec<usize>,
    pub bound: f64,
    /// Previous row's Γ² error over this row's.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateRow {
    pub name: String,
    pub status: CsStatus,
    pub expected: Option<CsStatus>,
    pub branch: Option<Branch>,
    pub residual: f64,
    pub threshold: f64,
    pub at: Vec<usize>,
    pub sign_failures: usize,
}

impl CandidateRow {
    fn new(name: &str, expected: Option<CsStatus>, c: &CsCandidate) -> Self {
        CandidateRow {
            name: name.into(),
            status: c.status,
            expected,
            branch: c.signs.branch,
            residual: c.residual,
            threshold: c.threshold,
            at: c.residual_at.clone(),
            sign_failures: c.signs.failures,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GalleryReport {
    pub surface: ExampleSurfaceSpec,
    pub h: f64,
    pub samples: usize,
    pub christoffel: Vec<ChristoffelRow>,
    pub candidates: Vec<CandidateRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MembershipReport {
    pub h: f64,
    pub samples: usize,
    pub candidates: Vec<CandidateRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TripleRow {
    pub name: String,
    pub kind: ConjugateKind,
    pub conditions: BarReport,
    pub genuineness: Genuineness,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistanceRow {
    pub a: String,
    pub b: String,
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TripleReport {
    pub h: f64,
    pub samples: usize,
    pub candidates: Vec<CandidateRow>,
    pub triples: Vec<TripleRow>,
    pub distances: Vec<DistanceRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeReport {
    /// max |⟨Ψ∘f, s∘π⟩|.
    pub orthogonality: f64,
    pub tangency: f64,
    /// max |λ_shape − ⟨s, w⟩| / |⟨s, w⟩|.
    pub lambda_relative: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BundleReport {
    pub asymmetry: [f64; 2],
    pub compatibility: f64,
    pub leaf_parallel: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DeformStageReport {
    pub h: f64,
    pub samples: usize,
    pub leaf_counts: Vec<usize>,
    pub member: String,
    pub membership: Option<CandidateRow>,
    pub triple: Option<TripleRow>,
    pub envelope: Option<EnvelopeReport>,
    pub splitting: Option<SplittingReport>,
    pub congruence: Option<CongruenceReport>,
    pub conditions: Option<LiftedReport>,
    pub flatness: Option<Flatness>,
    pub bundle: Option<BundleReport>,
    pub structure: Option<StructureResiduals>,
    pub deformation: Option<DeformationReport>,
    pub conformality: Option<f64>,
    pub conformality_at: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineReport {
    pub gallery: GalleryReport,
    pub triple: TripleReport,
    pub deform: DeformStageReport,
}

// ---------------------------------------------------------------- stages

/// Shared state of a command: verdicts, re-checks, emitted files.
struct Ctx<'a> {
    cfg: &'a RunConfig,
    verdicts: Verdicts,
    rechecks: Vec<Recheck>,
    files: Vec<String>,
    failure: Option<StageFailure>,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Ctx { cfg, verdicts: Verdicts::default(), rechecks: Vec::new(), files: Vec::new(), failure: None }
    }

    fn csv(&mut self, name: &str, f: &Field, comps: &[&str]) -> Result<()> {
        write_field_csv(&self.cfg.out.join(name), f, comps)?;
        self.files.push(name.into());
        Ok(())
    }

    fn finish<T: Serialize>(self, command: &str, report: T) -> Result<Outcome> {
        let passed = self.failure.is_none() && self.verdicts.0.iter().all(|v| v.pass);
        let bundle = ReportBundle {
            command: command.into(),
            provenance: Provenance {
                config_hash: self.cfg.hash(),
                seed: None,
                version: env!("CARGO_PKG_VERSION").into(),
            },
            passed,
            failure: self.failure,
            verdicts: self.verdicts.0,
            report,
            rechecks: self.rechecks,
            files: self.files,
        };
        let summary = self.cfg.out.join(format!("{}.json", command.replace('-', "_")));
        write_json(&summary, &bundle)?;
        Ok(Outcome { passed, summary, table: render_table(&bundle.verdicts, bundle.failure.as_ref()) })
    }
}

/// What a command leaves behind.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub passed: bool,
    pub summary: PathBuf,
    /// One-screen verdict table.
    pub table: String,
}

pub fn render_table(verdicts: &[Verdict], failure: Option<&StageFailure>) -> String {
    let w = verdicts.iter().map(|v| v.name.len()).max().unwrap_or(0).max(5);
    let mut s = format!("{:<w$}  {:>12}  {:<8}  {:>12}  verdict\n", "check", "residual", "relation", "bound");
    for v in verdicts {
        let rel = match v.relation {
            Relation::AtMost => "<=",
            Relation::Above => ">",
            Relation::Within => "in",
        };
        let bound = match v.upper {
            Some(u) => format!("[{:.3},{:.3}]", v.bound, u),
            None => format!("{:.3e}", v.bound),
        };
        s += &format!(
            "{:<w$}  {:>12.4e}  {:<8}  {:>12}  {}\n",
            v.name,
            v.residual,
            rel,
            bound,
            if v.pass { "PASS" } else { "FAIL" }
        );
    }
    if let Some(f) = failure {
        s += &format!("stage `{}` failed: {}", f.stage, f.detail);
        if let Some(r) = f.residual {
            s += &format!(" (residual {r:.4e})");
        }
        s.push('\n');
    }
    s
}

fn surface_chart(samples: usize, h: f64) -> GridChart {
    GridChart::centered(&["u", "v"], &[samples, samples], h)
}

fn surface_geometry(spec: &ExampleSurfaceSpec, samples: usize, h: f64) -> Result<(SurfaceGeometry, crate::congruence::Isothermal<ExampleSurfaceSpec>)> {
    let (s, iso) = isothermal_reparam(spec.clone(), surface_chart(samples, h))?;
    Ok((s.geometry()?, iso))
}

/// Γ¹ against 0 and Γ² against λ′(ũ) on the chart interior.
fn christoffel_errors(geo: &SurfaceGeometry, iso: &crate::congruence::Isothermal<ExampleSurfaceSpec>) -> Result<(f64, f64, Vec<usize>)> {
    let chart = geo.chart();
    let delta = 1e-4;
    let us = &chart.axes[0];
    let mut dl = Vec::with_capacity(us.count);
    for i in 0..us.count {
        let x = us.value(i);
        dl.push((iso.lambda(x + delta)? - iso.lambda(x - delta)?) / (2.0 * delta));
    }
    let b = chart.interior(2);
    let g1 = max_over(&b, |idx| geo.gamma_real(idx).0.abs()).0;
    let (g2, at) = max_over(&b, |idx| (geo.gamma_real(idx).1 - dl[idx[0]]).abs());
    Ok((g1, g2, at))
}

struct Evaluated {
    name: String,
    expect: Option<CsStatus>,
    cand: CsCandidate,
}

fn evaluate_all(cx: &mut Ctx, geo: &SurfaceGeometry, emit: Option<&str>) -> Result<Vec<Evaluated>> {
    let opts = cx.cfg.cs_options();
    let mut out = Vec::new();
    if let Some(geom_file) = emit {
        cx.csv(geom_file, &geo.data, &GEOMETRY_COMPONENTS)?;
    }
    for nc in &cx.cfg.candidates {
        let cand = evaluate_candidate(&nc.spec, geo, &opts)?;
        if let Some(expect) = nc.expect {
            cx.verdicts.push(
                format!("membership.{}.{}", nc.name, status_name(expect)),
                cand.residual,
                if cand.status == CsStatus::Member { Relation::AtMost } else { Relation::Above },
                cand.threshold,
                None,
                Some(cand.residual_at.clone()),
            );
            let v = cx.verdicts.0.last_mut().unwrap();
            v.pass = cand.status == expect;
        }
        if let (Some(geom_file), Some(rho)) = (emit, &cand.rho) {
            let file = format!("rho_{}.csv", nc.name);
            cx.csv(&file, rho, &["rho"])?;
            cx.rechecks.push(Recheck::Membership {
                name: nc.name.clone(),
                rho: file,
                geometry: geom_file.into(),
                elliptic: cand.fields.is_elliptic(),
                options: opts,
                residual: cand.residual,
                threshold: cand.threshold,
                member: cand.is_member(),
            });
        }
        out.push(Evaluated { name: nc.name.clone(), expect: nc.expect, cand });
    }
    Ok(out)
}

fn status_name(s: CsStatus) -> &'static str {
    match s {
        CsStatus::Member => "member",
        CsStatus::NonMember => "non_member",
        CsStatus::SignFailure => "sign_failure",
        CsStatus::Degenerate => "degenerate",
    }
}

const GEOMETRY_COMPONENTS: [&str; 11] =
    ["E", "F", "G", "G1_11", "G1_12", "G1_21", "G1_22", "G2_11", "G2_12", "G2_21", "G2_22"];

fn gallery_stage(cx: &mut Ctx) -> Result<(GalleryReport, SurfaceGeometry, Vec<Evaluated>)> {
    let g = cx.cfg.gallery.clone();
    let tol = cx.cfg.tolerances.clone();
    let mut rows: Vec<ChristoffelRow> = Vec::new();
    let mut base = None;
    for level in 0..=g.refine {
        let h = g.h / f64::powi(2.0, level as i32);
        let samples = g.samples << level;
        let (geo, iso) = surface_geometry(&g.surface, samples, h)?;
        let (g1, g2, at) = christoffel_errors(&geo, &iso)?;
        let ratio = rows.last().map(|r| r.gamma2 / g2);
        let bound = tol.h2(h);
        cx.verdicts.le(format!("christoffel.gamma1.h{level}"), g1, bound);
        cx.verdicts.le_at(format!("christoffel.gamma2.h{level}"), g2, bound, &at);
        if let Some(r) = ratio {
            cx.verdicts.within(format!("christoffel.ratio.h{level}"), r, tol.ratio);
        }
        rows.push(ChristoffelRow { h, samples, gamma1: g1, gamma2: g2, gamma2_at: at, bound, ratio });
        if level == 0 {
            base = Some(geo);
        }
    }
    let geo = base.expect("level 0 is always evaluated");
    let emit = cx.cfg.emit_csv.then_some("gallery_geometry.csv");
    let evals = evaluate_all(cx, &geo, emit)?;
    let report = GalleryReport {
        surface: g.surface.clone(),
        h: g.h,
        samples: g.samples,
        christoffel: rows,
        candidates: evals.iter().map(|e| CandidateRow::new(&e.name, e.expect, &e.cand)).collect(),
    };
    Ok((report, geo, evals))
}

fn membership_stage(cx: &mut Ctx) -> Result<(MembershipReport, SurfaceGeometry, Vec<Evaluated>)> {
    let g = cx.cfg.gallery.clone();
    let (geo, _) = surface_geometry(&g.surface, g.samples, g.h)?;
    let emit = cx.cfg.emit_csv.then_some("gallery_geometry.csv");
    let evals = evaluate_all(cx, &geo, emit)?;
    let report = MembershipReport {
        h: g.h,
        samples: g.samples,
        candidates: evals.iter().map(|e| CandidateRow::new(&e.name, e.expect, &e.cand)).collect(),
    };
    Ok((report, geo, evals))
}

fn bar_verdicts(cx: &mut Ctx, name: &str, r: &BarReport, gen: &Genuineness, h: f64) {
    let t = cx.cfg.tolerances.clone();
    for i in 0..2 {
        cx.verdicts.le(format!("{name}.det_{}", i + 1), r.det[i], t.algebraic);
    }
    cx.verdicts.le(format!("{name}.vieta"), r.vieta, t.algebraic);
    for i in 0..2 {
        cx.verdicts.le_at(format!("{name}.b_{}", i + 1), r.b[i].residual, t.h2(h), &r.b[i].at);
    }
    cx.verdicts.le_at(format!("{name}.c"), r.c.residual, t.h2(h), &r.c.at);
    cx.verdicts.gt(format!("{name}.d_margin"), r.d_margin, t.margin);
    cx.verdicts.gt(format!("{name}.e_margin"), r.e_margin, t.margin);
    cx.verdicts.gt(format!("{name}.genuine_pm"), gen.pm_margin, t.margin);
    cx.verdicts.gt(format!("{name}.genuine_rank"), gen.rank_margin, t.margin);
}

fn genuineness_of(bar: &BarTriple, tol: f64) -> Genuineness {
    let pairs: Vec<(Matrix2<f64>, Matrix2<f64>)> =
        bar.chart().full_box().indices().iter().map(|idx| (bar.d_at(0, idx), bar.d_at(1, idx))).collect();
    genuineness_diagnostics(&pairs, tol)
}

fn triple_stage(cx: &mut Ctx, geo: &SurfaceGeometry, evals: &[Evaluated], h: f64, samples: usize) -> Result<TripleReport> {
    let opts = TripleOptions::default();
    let mut triples = Vec::new();
    let mut bars: Vec<(String, BarTriple)> = Vec::new();
    for e in evals.iter().filter(|e| e.cand.is_member()) {
        let bar = match reconstruct_bar_triple(&e.cand, geo, &opts) {
            Ok(b) => b,
            Err(err) => {
                cx.failure = Some(StageFailure::from_error("triple", &err));
                break;
            }
        };
        let r = verify_bar(&bar, geo, &opts);
        let gen = genuineness_of(&bar, cx.cfg.tolerances.margin);
        bar_verdicts(cx, &format!("triple.{}", e.name), &r, &gen, h);
        triples.push(TripleRow { name: e.name.clone(), kind: bar.kind, conditions: r, genuineness: gen });
        bars.push((e.name.clone(), bar));
    }
    let mut distances = Vec::new();
    for i in 0..bars.len() {
        for j in i + 1..bars.len() {
            let d = triple_distance(&bars[i].1, &bars[j].1);
            cx.verdicts.gt(format!("distinct.{}.{}", bars[i].0, bars[j].0), d, cx.cfg.tolerances.distinct);
            distances.push(DistanceRow { a: bars[i].0.clone(), b: bars[j].0.clone(), distance: d });
        }
    }
    Ok(TripleReport {
        h,
        samples,
        candidates: evals.iter().map(|e| CandidateRow::new(&e.name, e.expect, &e.cand)).collect(),
        triples,
        distances,
    })
}

/// Membership → triple → envelope → shape → congruence → lift → (i)–(ix) →
/// bundle → frame integration → projection, stopping at the first failure.
fn deform_stage(cx: &mut Ctx) -> Result<DeformStageReport> {
    let p = cx.cfg.pipeline.clone();
    let t = cx.cfg.tolerances.clone();
    let h = p.h;
    let bar_tol = t.h2(h);
    let mut rep = DeformStageReport {
        h,
        samples: p.samples,
        leaf_counts: p.leaf_counts.clone(),
        member: p.member.clone(),
        ..Default::default()
    };
    let n = p.leaf_counts.len() + 2;
    let model = LightConeModel::canonical(n + 1);
    let sc = surface_chart(p.samples, h);
    let (s, _) = isothermal_reparam(p.surface.clone(), sc.clone())?;
    let geo = s.geometry()?;
    let nc = cx.cfg.candidates.iter().find(|c| c.name == p.member).expect("validated member name").clone();
    let cand = evaluate_candidate(&nc.spec, &geo, &cx.cfg.cs_options())?;
    let row = CandidateRow::new(&nc.name, Some(CsStatus::Member), &cand);
    cx.verdicts.push(
        format!("membership.{}", nc.name),
        cand.residual,
        Relation::AtMost,
        cand.threshold,
        None,
        Some(cand.residual_at.clone()),
    );
    cx.verdicts.0.last_mut().unwrap().pass = cand.is_member();
    rep.membership = Some(row);
    if !cand.is_member() {
        cx.failure = Some(StageFailure {
            stage: "membership".into(),
            detail: format!("candidate `{}` is {}", nc.name, status_name(cand.status)),
            residual: cand.residual.is_finite().then_some(cand.residual),
        });
        return Ok(rep);
    }

    macro_rules! stage {
        ($name:expr, $e:expr) => {
            match $e {
                Ok(v) => v,
                Err(err) => {
                    cx.failure = Some(StageFailure::from_error($name, &err));
                    return Ok(rep);
                }
            }
        };
    }

    let topts = TripleOptions::default();
    let bar = stage!("triple", reconstruct_bar_triple(&cand, &geo, &topts));
    let br = verify_bar(&bar, &geo, &topts);
    let gen = genuineness_of(&bar, t.margin);
    bar_verdicts(cx, "triple", &br, &gen, h);
    let elliptic = bar.kind == ConjugateKind::Elliptic;
    rep.triple = Some(TripleRow { name: nc.name.clone(), kind: bar.kind, conditions: br, genuineness: gen });

    let mc = m_chart(&sc, &p.leaf_counts);
    let env = stage!("envelope", envelope_reconstruct(&s, &mc, &model));
    let region = slab_region(&mc, 1);
    let rc = mc.sub(&region);
    let mut core = rc.full_box();
    for d in 3..rc.dim() {
        core = core.pin(d, 1);
    }
    let sf = stage!("shape", env.hyper.geometry_with_core(&region, &core, &ShapeOptions::default()));
    let mut eval = core.clone();
    for d in 0..3 {
        eval.lo[d] = 2;
        eval.hi[d] = rc.axes[d].count - 2;
    }
    let mut glob = eval.clone();
    for d in 0..rc.dim() {
        glob.lo[d] += region.lo[d];
        glob.hi[d] += region.lo[d];
    }
    let tangency = tangency_residual(&env, &s, &model, &glob);
    let lambda_relative = max_over(&eval, |idx| {
        let l = env.lambda.get(&idx[..2], 0);
        (sf.lambda(idx) - l).abs() / l.abs()
    })
    .0;
    cx.verdicts.le("envelope.orthogonality", env.orthogonality, t.algebraic);
    cx.verdicts.le("envelope.tangency", tangency, bar_tol);
    cx.verdicts.le("envelope.lambda_relative", lambda_relative, bar_tol);
    rep.envelope = Some(EnvelopeReport { orthogonality: env.orthogonality, tangency, lambda_relative });

    let split = splitting_report(&sf, &eval, t.splitting, elliptic);
    cx.verdicts.gt("splitting.max_span_i_distance", split.max_span_i_distance, t.splitting);
    cx.verdicts.0.last_mut().unwrap().pass = !split.surface_like;
    rep.splitting = Some(split.clone());
    if split.surface_like {
        cx.failure = Some(StageFailure {
            stage: "splitting".into(),
            detail: "splitting tensor lies in span{I}: the input is conformally surface-like".into(),
            residual: Some(split.max_span_i_distance),
        });
        return Ok(rep);
    }

    let cg = stage!("congruence", build_congruence(&env.hyper, &sf, &model, &eval));
    cx.verdicts.le("congruence.unit", cg.report.unit_residual, t.algebraic);
    cx.verdicts.le("congruence.leaf_derivative", cg.report.leaf_derivative, bar_tol);
    cx.verdicts.le("congruence.metric", cg.report.metric_residual, bar_tol);
    cx.verdicts.le("congruence.pushforward", cg.report.pushforward_residual, bar_tol);
    rep.congruence = Some(cg.report);

    let lt = stage!("lift", lift_to_m(&bar, &sf));
    let pr = verify_conditions(&lt, &sf, &eval);
    cx.verdicts.le_at("conditions.i", pr.i.residual, t.algebraic, &pr.i.at);
    for k in 0..2 {
        cx.verdicts.le_at(format!("conditions.ii_{}", k + 1), pr.ii[k].residual, t.algebraic, &pr.ii[k].at);
    }
    for (name, it) in pr.differential() {
        cx.verdicts.le_at(format!("conditions.{name}"), it.residual, bar_tol, &it.at);
    }
    cx.verdicts.gt("conditions.viii_margin", pr.viii_margin, t.margin);
    cx.verdicts.gt("conditions.ix_margin", pr.ix_margin, t.margin);
    let fl = flatness_check(&lt, &sf, &eval, t.margin);
    cx.verdicts.le_at("conditions.flatness", fl.residual, t.algebraic, &fl.at);
    rep.conditions = Some(pr);
    rep.flatness = Some(fl);

    let b = stage!("bundle", build_bundle(&sf, &lt, bar_tol));
    for k in 0..2 {
        cx.verdicts.le(format!("bundle.asymmetry_{}", k + 1), b.asymmetry[k], bar_tol);
    }
    cx.verdicts.le("bundle.compatibility", b.compatibility, t.algebraic);
    cx.verdicts.le("bundle.leaf_parallel", b.leaf_parallel, bar_tol);
    rep.bundle = Some(BundleReport { asymmetry: b.asymmetry, compatibility: b.compatibility, leaf_parallel: b.leaf_parallel });
    let sr = structure_residuals(&b, &check_box(&b.chart));
    cx.verdicts.le("structure.gauss", sr.gauss, bar_tol);
    cx.verdicts.le_at("structure.codazzi", sr.codazzi, bar_tol, &sr.codazzi_at);
    cx.verdicts.le("structure.ricci", sr.ricci, bar_tol);
    rep.structure = Some(sr);

    let r = stage!("integrate", synthesize(&b, bar_tol));
    let dr = &r.report;
    cx.verdicts.le("deformation.light_cone", dr.light_cone, t.light_cone);
    cx.verdicts.le("deformation.gram_drift", dr.gram_drift, t.algebraic);
    cx.verdicts.le("deformation.path_mismatch", dr.path_mismatch, bar_tol);
    cx.verdicts.le("deformation.isometry", dr.isometry, bar_tol);
    cx.verdicts.le("deformation.normal_orthogonality", dr.normal_orthogonality, bar_tol);
    rep.deformation = Some(dr.clone());
    let big = LightConeModel::canonical(n + 2);
    let pj = stage!("project", project_deformation(&r, &b, &big));
    cx.verdicts.le_at("deformation.conformality", pj.conformality, bar_tol, &pj.conformality_at);
    rep.conformality = Some(pj.conformality);
    rep.conformality_at = Some(pj.conformality_at.clone());

    if cx.cfg.emit_csv {
        let names = |prefix: &str, k: usize| (0..k).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();
        let (xs, ys) = (names("x", pj.f.ncomp), names("y", r.f_tilde.ncomp));
        let gs: Vec<String> = (0..9).map(|k| format!("g{}{}", k % 3, k / 3)).collect();
        cx.csv("deformation_f.csv", &pj.f, &str_refs(&xs))?;
        cx.csv("deformation_phi.csv", &pj.phi, &["phi"])?;
        cx.csv("slab_metric.csv", &b.metric, &str_refs(&gs))?;
        cx.csv("f_tilde.csv", &r.f_tilde, &str_refs(&ys))?;
        cx.rechecks.push(Recheck::Conformality {
            f: "deformation_f.csv".into(),
            phi: "deformation_phi.csv".into(),
            metric: "slab_metric.csv".into(),
            residual: pj.conformality,
            bound: bar_tol,
        });
        cx.rechecks.push(Recheck::LightCone { f_tilde: "f_tilde.csv".into(), residual: dr.light_cone, bound: t.light_cone });
    }
    Ok(rep)
}

fn str_refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

// ---------------------------------------------------------------- commands

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Gallery,
    CsCheck,
    Triple,
    Deform,
    Pipeline,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gallery => "gallery",
            Command::CsCheck => "cs-check",
            Command::Triple => "triple",
            Command::Deform => "deform",
            Command::Pipeline => "pipeline",
        }
    }
}

/// Run a command and write its summary into `cfg.out`.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let mut cx = Ctx::new(cfg);
    match cmd {
        Command::Gallery => {
            let (r, _, _) = gallery_stage(&mut cx)?;
            cx.finish(cmd.name(), r)
        }
        Command::CsCheck => {
            let (r, _, _) = membership_stage(&mut cx)?;
            cx.finish(cmd.name(), r)
        }
        Command::Triple => {
            let (_, geo, evals) = membership_stage(&mut cx)?;
            let r = triple_stage(&mut cx, &geo, &evals, cfg.gallery.h, cfg.gallery.samples)?;
            cx.finish(cmd.name(), r)
        }
        Command::Deform => {
            let r = deform_stage(&mut cx)?;
            cx.finish(cmd.name(), r)
        }
        Command::Pipeline => {
            let (gallery, geo, evals) = gallery_stage(&mut cx)?;
            let triple = triple_stage(&mut cx, &geo, &evals, cfg.gallery.h, cfg.gallery.samples)?;
            let deform = deform_stage(&mut cx)?;
            cx.finish(cmd.name(), PipelineReport { gallery, triple, deform })
        }
    }
}

// ---------------------------------------------------------------- verify

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecheckResult {
    pub summary: String,
    pub kind: String,
    pub subject: String,
    pub stored: f64,
    pub recomputed: f64,
    /// Stored and recomputed values agree and lead to the same verdict.
    pub agrees: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub results: Vec<RecheckResult>,
    pub passed: bool,
}

#[derive(Deserialize)]
struct RecheckOnly {
    rechecks: Vec<Recheck>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300) || a == b
}

fn light_cone_max(f: &Field) -> f64 {
    (0..f.chart.len()).map(|k| ldot(f.at_flat(k), f.at_flat(k)).abs()).fold(0.0, f64::max)
}

/// Replay every re-check listed in the summaries of `dir` from its CSV grids.
pub fn verify_dir(dir: &Path) -> Result<VerifyReport> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "verify.json"))
        .collect();
    entries.sort();
    let mut results = Vec::new();
    for path in entries {
        let Ok(doc) = serde_json::from_str::<RecheckOnly>(&fs::read_to_string(&path)?) else { continue };
        let summary = path.file_name().unwrap().to_string_lossy().into_owned();
        for rc in doc.rechecks {
            results.push(match rc {
                Recheck::Membership { name, rho, geometry, elliptic, options, residual, threshold, member } => {
                    let (r, _) = read_field_csv(&dir.join(&rho))?;
                    let (g, _) = read_field_csv(&dir.join(&geometry))?;
                    if g.ncomp != 11 || r.chart != g.chart {
                        return Err(GeomError::Spec(format!("{rho} and {geometry} are not on one chart")));
                    }
                    let geo = SurfaceGeometry { data: g };
                    let (res, _, thr) = membership_residual(&r, &geo, elliptic, &options);
                    let agrees = close(res, residual) && close(thr, threshold) && (res <= thr) == member;
                    RecheckResult { summary: summary.clone(), kind: "membership".into(), subject: name, stored: residual, recomputed: res, agrees, pass: agrees }
                }
                Recheck::Conformality { f, phi, metric, residual, bound } => {
                    let (ff, _) = read_field_csv(&dir.join(&f))?;
                    let (pp, _) = read_field_csv(&dir.join(&phi))?;
                    let (mm, _) = read_field_csv(&dir.join(&metric))?;
                    let (res, _) = crate::deform::conformality_residual(&ff, &pp, &mm);
                    RecheckResult { summary: summary.clone(), kind: "conformality".into(), subject: f, stored: residual, recomputed: res, agrees: close(res, residual), pass: res <= bound }
                }
                Recheck::LightCone { f_tilde, residual, bound } => {
                    let (ff, _) = read_field_csv(&dir.join(&f_tilde))?;
                    let res = light_cone_max(&ff);
                    RecheckResult { summary: summary.clone(), kind: "light_cone".into(), subject: f_tilde, stored: residual, recomputed: res, agrees: close(res, residual), pass: res <= bound }
                }
            });
        }
    }
    let passed = !results.is_empty() && results.iter().all(|r| r.agrees && r.pass);
    Ok(VerifyReport { results, passed })
}

impl VerifyReport {
    pub fn table(&self) -> String {
        let mut s = format!("{:<14}  {:<28}  {:>12}  {:>12}  verdict\n", "kind", "subject", "stored", "recomputed");
        for r in &self.results {
            s += &format!(
                "{:<14}  {:<28}  {:>12.4e}  {:>12.4e}  {}\n",
                r.kind,
                r.subject,
                r.stored,
                r.recomputed,
                if r.agrees && r.pass { "PASS" } else { "FAIL" }
            );
        }
        if self.results.is_empty() {
            s += "no re-checks found (run with --emit-csv)\n";
        }
        s
    }
}
