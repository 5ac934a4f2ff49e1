//! Batch commands behind the `occlusion-bench` binary.
//!
//! Every command writes its data files plus a `manifest.json` into an
//! output directory. Per-item failures are collected into `errors.json`
//! and turn the exit code nonzero without stopping the run.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{load_ocr_layout, parse_annotation_file, serialize_annotations, WordAnnotation};
use crate::blanks::{
    blank_entries, extract_blanks, extract_scribble_blanks, finalize_blanks, group_lines, looks_multi_column,
    visibility_gate, BlankEntry, GateDecision, OcclusionPatch, TextMargins,
};
use crate::degrade::{
    apply_global_rotation, place_scribbles, place_stamp, place_standard, CoverageTarget, DegradationClass,
    GenerationRecord,
};
use crate::geometry::Aabb;
use crate::patches::{load_patch_library, PatchLibrary};
use crate::provider::{EmbeddingClient, LanguageModelClient, ProviderEndpoint};
use crate::refine::{refine_page, RefinementConfig, RefinementLogEntry};
use crate::rng::derive_seed;
use crate::ssim::{ssim, to_gray};
use crate::synthetic::WHITE;
use crate::ucsm::{
    summarize, ucsm, ContextCalibration, ContextProvider, FixedCosine, FixedLogProb, Providers, ScoreSummary,
    SemanticProvider, Source, UcsmReport, UcsmWeights,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ERRORS_FILE: &str = "errors.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn input(path: &Path, message: impl ToString) -> Self {
        CliError::Input { path: path.to_path_buf(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemError {
    pub item: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub out_dir: String,
    /// Paths relative to `out_dir`, sorted.
    pub outputs: Vec<String>,
    pub records: serde_json::Value,
}

#[derive(Debug)]
pub struct CommandOutcome {
    pub manifest: RunManifest,
    pub errors: Vec<ItemError>,
}

impl CommandOutcome {
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.errors.is_empty())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializable");
        out.push(b'\n');
    }
    out
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::input(path, e))
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let bytes = read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::input(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::input(path, format!("line {}: {e}", i + 1))))
        .collect()
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn display(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

/// Writes the manifest and, when there were item errors, the error summary.
fn finish(out: &Path, mut manifest: RunManifest, errors: Vec<ItemError>) -> Result<CommandOutcome, CliError> {
    if !errors.is_empty() {
        manifest.outputs.push(ERRORS_FILE.into());
        write(&out.join(ERRORS_FILE), &to_json(&serde_json::json!({ "command": manifest.command, "errors": errors })))?;
    }
    manifest.outputs.push(MANIFEST_FILE.into());
    manifest.outputs.sort();
    write(&out.join(MANIFEST_FILE), &to_json(&manifest))?;
    Ok(CommandOutcome { manifest, errors })
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageSpec {
    pub image: PathBuf,
    pub annotations: PathBuf,
    /// Boxes that scribbles must avoid, as `[x1, y1, x2, y2]`.
    #[serde(default)]
    pub exclusions: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default)]
    pub classes: Vec<DegradationClass>,
    #[serde(default)]
    pub class: Option<DegradationClass>,
    /// Coverage levels in percent, for standard classes only.
    #[serde(default)]
    pub levels: Vec<f64>,
    pub pages: Vec<PageSpec>,
    pub patch_manifest: PathBuf,
    /// Defaults to the manifest's directory.
    #[serde(default)]
    pub patch_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub level: Option<f64>,
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combo {
    pub class: DegradationClass,
    pub level: Option<f64>,
}

impl Combo {
    pub fn dir_name(&self) -> String {
        match self.level {
            Some(l) => format!("{}_t{l:.1}", self.class),
            None => self.class.to_string(),
        }
    }
}

/// Class-level combinations in config order; levels are rejected for the
/// simulation classes.
pub fn plan_combos(classes: &[DegradationClass], levels: &[f64]) -> Result<Vec<Combo>, CliError> {
    if classes.is_empty() {
        return Err(CliError::Usage("no degradation class given".into()));
    }
    let mut combos = Vec::new();
    for &class in classes {
        if class.is_standard() {
            if levels.is_empty() {
                return Err(CliError::Usage(format!("class {class} needs a coverage level")));
            }
            for &l in levels {
                if !CoverageTarget::LEVELS.contains(&l) {
                    return Err(CliError::Usage(format!("coverage level {l} is not one of {:?}", CoverageTarget::LEVELS)));
                }
                combos.push(Combo { class, level: Some(l) });
            }
        } else if !levels.is_empty() {
            return Err(CliError::Usage(format!("class {class} has no coverage target; drop the level")));
        } else {
            combos.push(Combo { class, level: None });
        }
    }
    Ok(combos)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PageRecord {
    pub index: usize,
    pub source: String,
    pub class: DegradationClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    pub seed: u64,
    pub image: String,
    pub annotations: String,
    pub rotation_deg: f64,
    pub words_in: usize,
    pub words_out: usize,
    pub generation: GenerationRecord,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refinement: Vec<RefinementLogEntry>,
}

struct PageJob<'a> {
    index: usize,
    spec: &'a PageSpec,
    combo: Combo,
    seed: u64,
}

fn load_page(base: &Path, spec: &PageSpec) -> Result<(RgbImage, Vec<WordAnnotation>), String> {
    let img_path = resolve(base, &spec.image);
    let img = image::open(&img_path).map_err(|e| format!("{}: {e}", display(&img_path)))?.to_rgb8();
    let ann_path = resolve(base, &spec.annotations);
    let bytes = std::fs::read(&ann_path).map_err(|e| format!("{}: {e}", display(&ann_path)))?;
    let words = parse_annotation_file(&bytes).map_err(|e| format!("{}: {e}", display(&ann_path)))?;
    Ok((img, words))
}

fn run_page(base: &Path, out: &Path, job: &PageJob<'_>, library: &PatchLibrary) -> Result<(PageRecord, Vec<String>), String> {
    let (page, words) = load_page(base, job.spec)?;
    let (w, h) = page.dimensions();
    let degrade_seed = derive_seed(job.seed, 0);
    let (degraded, kept, generation, refinement) = match job.combo.class {
        DegradationClass::Scribble => {
            let exclusions: Vec<Aabb> = job
                .spec
                .exclusions
                .iter()
                .map(|[x1, y1, x2, y2]| Aabb::new(*x1, *y1, *x2, *y2).map_err(|e| format!("exclusion zone: {e}")))
                .collect::<Result<_, _>>()?;
            let o = place_scribbles(&page, &words, &exclusions, library, degrade_seed).map_err(|e| e.to_string())?;
            let removed: BTreeSet<usize> = o.removed.iter().copied().collect();
            let kept = words.iter().enumerate().filter(|(i, _)| !removed.contains(i)).map(|(_, a)| a.clone()).collect();
            (o.image, kept, o.record, Vec::new())
        }
        DegradationClass::Stamp => {
            let o = place_stamp(&page, library, degrade_seed).map_err(|e| e.to_string())?;
            (o.image, words.clone(), o.record, Vec::new())
        }
        class => {
            let level = job.combo.level.expect("standard combos carry a level");
            let target = CoverageTarget::new(level, w, h).map_err(|e| e.to_string())?;
            let o = place_standard(&page, class, target, library, degrade_seed).map_err(|e| e.to_string())?;
            let refined = refine_page(&words, &o.masks.occlusion, class, &RefinementConfig::default());
            (o.image, refined.annotations, o.record, refined.log)
        }
    };
    let rotated = apply_global_rotation(&degraded, &kept, derive_seed(job.seed, 1)).map_err(|e| e.to_string())?;

    let stem = job.spec.image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "page".into());
    let rel = format!("{}/{:05}_{stem}", job.combo.dir_name(), job.index);
    let (png, txt, json) = (format!("{rel}.png"), format!("{rel}.txt"), format!("{rel}.json"));

    let mut png_bytes = Vec::new();
    rotated
        .image
        .write_to(&mut std::io::Cursor::new(&mut png_bytes), image::ImageFormat::Png)
        .map_err(|e| e.to_string())?;
    write(&out.join(&png), &png_bytes).map_err(|e| e.to_string())?;
    let ann = serialize_annotations(&rotated.annotations).map_err(|e| e.to_string())?;
    write(&out.join(&txt), &ann).map_err(|e| e.to_string())?;

    let record = PageRecord {
        index: job.index,
        source: display(&job.spec.image),
        class: job.combo.class,
        level: job.combo.level,
        seed: job.seed,
        image: png.clone(),
        annotations: txt.clone(),
        rotation_deg: rotated.angle_deg,
        words_in: words.len(),
        words_out: rotated.annotations.len(),
        generation,
        refinement,
    };
    write(&out.join(&json), &to_json(&record)).map_err(|e| e.to_string())?;
    Ok((record, vec![png, txt, json]))
}

/// Degrades, refines and rotates every configured page. Pages are dealt to
/// class-level combinations round-robin, so each source is used once.
pub fn cmd_generate(opts: &GenerateOptions) -> Result<CommandOutcome, CliError> {
    let cfg: GenerateConfig = parse_json(&opts.config)?;
    let base = opts.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let seed = opts.seed.or(cfg.seed).ok_or_else(|| CliError::Usage("no seed given".into()))?;
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(|o| resolve(&base, o)))
        .ok_or_else(|| CliError::Usage("no output directory given".into()))?;
    let mut classes = cfg.classes.clone();
    classes.extend(cfg.class);
    let levels = match opts.level {
        Some(l) => vec![l],
        None => cfg.levels.clone(),
    };
    let combos = plan_combos(&classes, &levels)?;

    let mut seen = BTreeSet::new();
    for p in &cfg.pages {
        if !seen.insert(resolve(&base, &p.image)) {
            return Err(CliError::Usage(format!("source page {} listed twice", display(&p.image))));
        }
    }
    let manifest_path = resolve(&base, &cfg.patch_manifest);
    let patch_dir = match &cfg.patch_dir {
        Some(d) => resolve(&base, d),
        None => manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    let library = load_patch_library(&read(&manifest_path)?, &patch_dir).map_err(|e| CliError::input(&manifest_path, e))?;

    let jobs: Vec<PageJob<'_>> = cfg
        .pages
        .iter()
        .enumerate()
        .map(|(index, spec)| PageJob { index, spec, combo: combos[index % combos.len()], seed: derive_seed(seed, index as u64) })
        .collect();
    log::info!("generating {} pages over {} combinations", jobs.len(), combos.len());
    let results = with_pool(opts.workers, || {
        jobs.par_iter().map(|job| (job.index, run_page(&base, &out, job, &library))).collect::<Vec<_>>()
    })?;

    let mut records = Vec::new();
    let mut outputs = Vec::new();
    let mut errors = Vec::new();
    for (index, r) in results {
        match r {
            Ok((rec, files)) => {
                records.push(rec);
                outputs.extend(files);
            }
            Err(message) => {
                log::error!("page {index}: {message}");
                errors.push(ItemError { item: format!("page {index} ({})", display(&cfg.pages[index].image)), message });
            }
        }
    }
    let mut inputs = vec![display(&opts.config), display(&cfg.patch_manifest)];
    for p in &cfg.pages {
        inputs.push(display(&p.image));
        inputs.push(display(&p.annotations));
    }
    let manifest = RunManifest {
        command: "generate".into(),
        tool_version: VERSION.into(),
        seed: Some(seed),
        inputs,
        out_dir: display(&out),
        outputs,
        records: serde_json::json!({ "combinations": combos, "pages": records }),
    };
    finish(&out, manifest, errors)
}

#[derive(Debug, Clone, Default)]
pub struct ExtractOptions {
    pub ocr: PathBuf,
    pub patches: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateRecord {
    pub patch: String,
    pub class: DegradationClass,
    pub decision: GateDecision,
}

pub const BLANKS_FILE: &str = "blanks.jsonl";

fn load_patches(path: &Path) -> Result<Vec<OcclusionPatch>, CliError> {
    let patches: Vec<OcclusionPatch> = parse_json(path)?;
    let mut ids = BTreeSet::new();
    for (i, p) in patches.iter().enumerate() {
        let b = p.bbox;
        Aabb::new(b.x1, b.y1, b.x2, b.y2).map_err(|e| CliError::input(path, format!("patch {i}: {e}")))?;
        if !ids.insert(p.id.as_str()) {
            return Err(CliError::input(path, format!("patch {i}: duplicate id {:?}", p.id)));
        }
    }
    Ok(patches)
}

/// Groups OCR words into lines, gates semi-transparent patches and writes
/// one JSON line per emitted blank.
pub fn cmd_extract_blanks(opts: &ExtractOptions) -> Result<CommandOutcome, CliError> {
    let words = load_ocr_layout(&read(&opts.ocr)?).map_err(|e| CliError::input(&opts.ocr, e))?;
    let patches = load_patches(&opts.patches)?;
    let lines = group_lines(&words);
    if looks_multi_column(&lines) {
        log::warn!("{}: layout looks multi-column; blanks assume a single column", display(&opts.ocr));
    }
    let mut gates = Vec::new();
    let mut active = Vec::new();
    for p in &patches {
        if matches!(p.class, DegradationClass::Dust | DegradationClass::Stamp) {
            let decision = visibility_gate(p, &lines);
            log::info!("patch {}: {:?}", p.id, decision);
            gates.push(GateRecord { patch: p.id.clone(), class: p.class, decision });
            if decision == GateDecision::InpaintOnly {
                continue;
            }
        }
        active.push(p.clone());
    }
    let mut blanks = Vec::new();
    if let Some(margins) = TextMargins::from_lines(&lines) {
        blanks = extract_blanks(&lines, &active, &margins);
        blanks.extend(extract_scribble_blanks(&lines, &active));
        blanks = finalize_blanks(blanks);
    }
    let entries = blank_entries(&blanks);
    write(&opts.out.join(BLANKS_FILE), &to_jsonl(&entries))?;
    let manifest = RunManifest {
        command: "extract-blanks".into(),
        tool_version: VERSION.into(),
        seed: None,
        inputs: vec![display(&opts.ocr), display(&opts.patches)],
        out_dir: display(&opts.out),
        outputs: vec![BLANKS_FILE.into()],
        records: serde_json::json!({ "lines": lines.len(), "blanks": entries.len(), "gate": gates }),
    };
    finish(&opts.out, manifest, Vec::new())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub alpha: usize,
    pub prediction: String,
    pub ground_truth: String,
    #[serde(default)]
    pub pre_text: Option<String>,
    #[serde(default)]
    pub post_text: Option<String>,
    /// Recorded embedding cosine, used instead of a live provider.
    #[serde(default)]
    pub cosine: Option<f64>,
    /// Recorded `log P(gt | pre, post)`, used instead of a live provider.
    #[serde(default)]
    pub logp_conditional: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreLine {
    pub alpha: usize,
    pub prediction: String,
    pub ground_truth: String,
    #[serde(flatten)]
    pub report: UcsmReport,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScoreRunSummary {
    #[serde(flatten)]
    pub summary: ScoreSummary,
    pub semantic_sources: BTreeMap<String, usize>,
    pub context_sources: BTreeMap<String, usize>,
    pub missing: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct ScoreOptions {
    pub predictions: PathBuf,
    pub blanks: Option<PathBuf>,
    pub out: PathBuf,
    pub embed_url: Option<String>,
    pub lm_url: Option<String>,
    pub offline: bool,
    pub workers: usize,
    pub weights: UcsmWeights,
    pub calibration: ContextCalibration,
}

pub const SCORES_FILE: &str = "scores.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

fn source_name(s: Source) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Scores predictions against ground truth. Blank ids that cannot be matched
/// are reported and skipped.
pub fn cmd_score(opts: &ScoreOptions) -> Result<CommandOutcome, CliError> {
    let preds: Vec<PredictionRecord> = parse_jsonl(&opts.predictions)?;
    let blanks: Option<HashMap<usize, BlankEntry>> = match &opts.blanks {
        Some(p) => Some(parse_jsonl::<BlankEntry>(p)?.into_iter().map(|b| (b.alpha, b)).collect()),
        None => None,
    };
    let (embed, lm) = if opts.offline {
        (None, None)
    } else {
        (
            opts.embed_url.as_deref().map(|u| EmbeddingClient::new(ProviderEndpoint::new(u))),
            opts.lm_url.as_deref().map(|u| LanguageModelClient::new(ProviderEndpoint::new(u))),
        )
    };
    opts.weights.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    opts.calibration.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let mut errors = Vec::new();
    let mut missing = Vec::new();
    let mut jobs = Vec::new();
    let mut seen = BTreeSet::new();
    for p in &preds {
        if !seen.insert(p.alpha) {
            errors.push(ItemError { item: format!("blank {}", p.alpha), message: "duplicate prediction".into() });
            continue;
        }
        let context = match &blanks {
            Some(map) => match map.get(&p.alpha) {
                Some(b) => (b.pre_text.clone(), b.post_text.clone()),
                None => {
                    missing.push(p.alpha);
                    errors.push(ItemError { item: format!("blank {}", p.alpha), message: "unknown blank id".into() });
                    continue;
                }
            },
            None => (p.pre_text.clone().unwrap_or_default(), p.post_text.clone().unwrap_or_default()),
        };
        jobs.push((p, context));
    }
    if let Some(map) = &blanks {
        let mut unscored: Vec<usize> = map.keys().filter(|a| !seen.contains(a)).copied().collect();
        unscored.sort_unstable();
        for a in unscored {
            missing.push(a);
            errors.push(ItemError { item: format!("blank {a}"), message: "no prediction".into() });
        }
    }

    let scored = with_pool(opts.workers, || {
        jobs.par_iter()
            .map(|(p, (pre, post))| {
                let cos = p.cosine.map(FixedCosine);
                let lp = p.logp_conditional.map(FixedLogProb);
                let providers = Providers {
                    semantic: cos.as_ref().map(|c| c as &dyn SemanticProvider).or(embed.as_ref().map(|c| c as _)),
                    context: lp.as_ref().map(|c| c as &dyn ContextProvider).or(lm.as_ref().map(|c| c as _)),
                };
                let r = ucsm(&p.prediction, &p.ground_truth, pre, post, &providers, &opts.weights, &opts.calibration);
                (p, r)
            })
            .collect::<Vec<_>>()
    })?;

    let mut lines = Vec::new();
    for (p, r) in scored {
        match r {
            Ok(report) => lines.push(ScoreLine {
                alpha: p.alpha,
                prediction: p.prediction.clone(),
                ground_truth: p.ground_truth.clone(),
                report,
            }),
            Err(e) => errors.push(ItemError { item: format!("blank {}", p.alpha), message: e.to_string() }),
        }
    }
    let reports: Vec<UcsmReport> = lines.iter().map(|l| l.report.clone()).collect();
    let mut summary = ScoreRunSummary { summary: summarize(&reports), missing, ..Default::default() };
    for r in &reports {
        *summary.semantic_sources.entry(source_name(r.provenance.semantic)).or_default() += 1;
        *summary.context_sources.entry(source_name(r.provenance.context)).or_default() += 1;
    }
    write(&opts.out.join(SCORES_FILE), &to_jsonl(&lines))?;
    write(&opts.out.join(SUMMARY_FILE), &to_json(&summary))?;
    let mut inputs = vec![display(&opts.predictions)];
    inputs.extend(opts.blanks.as_deref().map(display));
    let manifest = RunManifest {
        command: "score".into(),
        tool_version: VERSION.into(),
        seed: None,
        inputs,
        out_dir: display(&opts.out),
        outputs: vec![SCORES_FILE.into(), SUMMARY_FILE.into()],
        records: serde_json::to_value(&summary).expect("serializable"),
    };
    finish(&opts.out, manifest, errors)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRow {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub restored_dir: Option<PathBuf>,
    #[serde(default)]
    pub ground_truth_dir: Option<PathBuf>,
    /// A `scores.jsonl` file from the score command.
    #[serde(default)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default)]
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    #[serde(rename = "type")]
    pub kind: String,
    pub pairs: usize,
    pub ssim: Option<f64>,
    pub ucsm: Option<f64>,
}

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";

fn list_images(dir: &Path) -> Result<BTreeSet<String>, CliError> {
    let rd = std::fs::read_dir(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let mut names = BTreeSet::new();
    for entry in rd {
        let entry = entry.map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") {
            names.insert(name);
        }
    }
    Ok(names)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

/// CSV rendering, one row per type plus an `Average` row over types.
pub fn render_csv(rows: &[ReportLine]) -> String {
    let mut s = String::from("type,pairs,ssim,ucsm\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.kind, r.pairs, fmt_cell(r.ssim), fmt_cell(r.ucsm)));
    }
    s
}

pub fn render_table(rows: &[ReportLine]) -> String {
    let width = rows.iter().map(|r| r.kind.len()).chain([4]).max().unwrap_or(4);
    let mut s = format!("{:<width$}  {:>6}  {:>8}  {:>8}\n", "Type", "Pairs", "SSIM", "UCSM");
    s.push_str(&format!("{}\n", "-".repeat(width + 28)));
    for r in rows {
        s.push_str(&format!("{:<width$}  {:>6}  {:>8}  {:>8}\n", r.kind, r.pairs, fmt_cell(r.ssim), fmt_cell(r.ucsm)));
    }
    s
}

/// Adds the macro `Average` row over the rows that have each value.
pub fn with_average(mut rows: Vec<ReportLine>) -> Vec<ReportLine> {
    if rows.is_empty() {
        return rows;
    }
    let ssims: Vec<f64> = rows.iter().filter_map(|r| r.ssim).collect();
    let ucsms: Vec<f64> = rows.iter().filter_map(|r| r.ucsm).collect();
    let pairs = rows.iter().map(|r| r.pairs).sum();
    rows.push(ReportLine { kind: "Average".into(), pairs, ssim: mean(&ssims), ucsm: mean(&ucsms) });
    rows
}

/// Per-type SSIM over name-matched image pairs and mean UCSM from score
/// files.
pub fn cmd_report(opts: &ReportOptions) -> Result<CommandOutcome, CliError> {
    let cfg: ReportConfig = parse_json(&opts.config)?;
    let base = opts.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut errors = Vec::new();
    let mut rows = Vec::new();
    let mut inputs = vec![display(&opts.config)];
    for row in &cfg.rows {
        let mut pairs = Vec::new();
        if let (Some(r), Some(g)) = (&row.restored_dir, &row.ground_truth_dir) {
            let (rdir, gdir) = (resolve(&base, r), resolve(&base, g));
            inputs.extend([display(r), display(g)]);
            let (rn, gn) = (list_images(&rdir)?, list_images(&gdir)?);
            for name in rn.symmetric_difference(&gn) {
                let side = if rn.contains(name) { "ground truth" } else { "restored image" };
                errors.push(ItemError { item: format!("{}/{name}", row.kind), message: format!("no matching {side}") });
            }
            pairs = rn.intersection(&gn).map(|n| (n.clone(), rdir.join(n), gdir.join(n))).collect();
        }
        let results = with_pool(opts.workers, || {
            pairs
                .par_iter()
                .map(|(name, a, b)| {
                    let load = |p: &Path| image::open(p).map(|i| to_gray(&i.to_rgb8())).map_err(|e| format!("{}: {e}", display(p)));
                    let v = load(a).and_then(|ga| load(b).and_then(|gb| ssim(&ga, &gb).map_err(|e| e.to_string())));
                    (name.clone(), v)
                })
                .collect::<Vec<_>>()
        })?;
        let mut values = Vec::new();
        for (name, v) in results {
            match v {
                Ok(s) => values.push(s),
                Err(message) => errors.push(ItemError { item: format!("{}/{name}", row.kind), message }),
            }
        }
        let ucsm_mean = match &row.scores {
            Some(p) => {
                inputs.push(display(p));
                let lines: Vec<ScoreLine> = parse_jsonl(&resolve(&base, p))?;
                mean(&lines.iter().map(|l| l.report.ucsm).collect::<Vec<_>>())
            }
            None => None,
        };
        rows.push(ReportLine { kind: row.kind.clone(), pairs: values.len(), ssim: mean(&values), ucsm: ucsm_mean });
    }
    let rows = with_average(rows);
    write(&opts.out.join(REPORT_CSV), render_csv(&rows).as_bytes())?;
    write(&opts.out.join(REPORT_TXT), render_table(&rows).as_bytes())?;
    let manifest = RunManifest {
        command: "report".into(),
        tool_version: VERSION.into(),
        seed: None,
        inputs,
        out_dir: display(&opts.out),
        outputs: vec![REPORT_CSV.into(), REPORT_TXT.into()],
        records: serde_json::to_value(&rows).expect("serializable"),
    };
    finish(&opts.out, manifest, errors)
}

/// Writes a page image and its annotation file, for building configs in
/// examples and tests.
pub fn write_page_inputs(dir: &Path, stem: &str, image: &RgbImage, words: &[WordAnnotation]) -> Result<PageSpec, CliError> {
    let png = format!("{stem}.png");
    let txt = format!("{stem}.txt");
    let mut bytes = Vec::new();
    image
        .write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| CliError::input(&dir.join(&png), e))?;
    write(&dir.join(&png), &bytes)?;
    let ann = serialize_annotations(words).map_err(|e| CliError::input(&dir.join(&txt), e))?;
    write(&dir.join(&txt), &ann)?;
    Ok(PageSpec { image: png.into(), annotations: txt.into(), exclusions: Vec::new() })
}

/// Saves every asset of a library as PNG next to a manifest and returns the
/// manifest path.
pub fn write_patch_library(dir: &Path, library: &PatchLibrary) -> Result<PathBuf, CliError> {
    let mut manifest: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for class in DegradationClass::ALL {
        for asset in library.assets_for(class) {
            let file = format!("{}.png", asset.id);
            let mut bytes = Vec::new();
            asset
                .raster
                .write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
                .map_err(|e| CliError::input(&dir.join(&file), e))?;
            write(&dir.join(&file), &bytes)?;
            manifest.entry(class.as_str().into()).or_default().push(file);
        }
    }
    let path = dir.join("patches.json");
    write(&path, &to_json(&manifest))?;
    Ok(path)
}

/// A blank page of the given size.
pub fn white_page(w: u32, h: u32) -> RgbImage {
    RgbImage::from_pixel(w, h, WHITE)
}
