//! Benchmark manifests and the runner.
//!
//! A manifest is TOML:
//!
//! ```toml
//! seed = 1
//! seeds_per_scene = 5
//!
//! [pipeline]            # any PipelineConfig field
//! ransac = { max_iters = 2000 }
//!
//! [training]            # used when no [models] are given
//! count = 10
//! config = { unique_points = 3, repeat_groups = 40 }
//!
//! [[group]]             # `count` synthetic scenes sharing one config
//! name = "hard"
//! count = 20
//! config = { unique_points = 3, repeat_groups = 40, outliers = 1000 }
//!
//! [[scene]]             # one synthetic scene ...
//! name = "roll78"
//! config = { roll = 1.3614 }
//!
//! [[scene]]             # ... or a pair of feature files
//! name = "files"
//! features1 = "a.epf"
//! features2 = "b.epf"
//! fixed_dir = "fixed"
//! correspondences = "gt.txt"
//! ```
//!
//! Scene seeds are derived from the manifest seed and the scene's position,
//! so reports do not depend on thread scheduling.

use std::path::{Path, PathBuf};
use std::time::Instant;

use epiprep_core::bench::{
    evaluate_pair, gen_scene, train_on_scenes, Method, PairInput, ReportRow, SceneConfig, SceneOutcome, SyntheticScene,
};
use epiprep_core::dtree::TreeParams;
use epiprep_core::pipeline::{ImageSide, Models, PipelineConfig};
use epiprep_core::seed::indexed_seed;
use epiprep_core::FeatureSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv_io;
use crate::features_io::{self, find_fixed};
use crate::model_io;
use crate::parallel::par_count_sfm;

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds_per_scene: usize,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub models: Option<ModelPaths>,
    #[serde(default)]
    pub training: Option<TrainingSpec>,
    #[serde(default, rename = "group")]
    pub groups: Vec<GroupSpec>,
    #[serde(default, rename = "scene")]
    pub scenes: Vec<SceneSpec>,
}

fn default_seeds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPaths {
    pub two_kp: PathBuf,
    pub kpmd: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    pub count: usize,
    #[serde(default)]
    pub config: SceneConfig,
    /// Further training scenes with their own configs.
    #[serde(default)]
    pub extra: Vec<TrainingGroup>,
    #[serde(default)]
    pub min_leaf: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingGroup {
    pub count: usize,
    #[serde(default)]
    pub config: SceneConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    pub count: usize,
    #[serde(default)]
    pub config: SceneConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub name: String,
    #[serde(default)]
    pub config: Option<SceneConfig>,
    #[serde(default)]
    pub features1: Option<PathBuf>,
    #[serde(default)]
    pub features2: Option<PathBuf>,
    #[serde(default)]
    pub fixed_dir: Option<PathBuf>,
    #[serde(default)]
    pub correspondences: Option<PathBuf>,
}

/// A scene ready to run: generated from a config or read from files.
#[derive(Debug, Clone)]
pub enum Entry {
    Synthetic { name: String, group: String, config: SceneConfig },
    Files { name: String, features1: PathBuf, features2: PathBuf, fixed_dir: PathBuf, correspondences: PathBuf },
    /// A manifest entry that could not be interpreted.
    Broken { name: String, error: String },
}

impl Entry {
    pub fn name(&self) -> &str {
        match self {
            Entry::Synthetic { name, .. } | Entry::Files { name, .. } | Entry::Broken { name, .. } => name,
        }
    }

    pub fn group(&self) -> &str {
        match self {
            Entry::Synthetic { group, .. } => group,
            _ => self.name(),
        }
    }
}

impl Manifest {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ManifestError> {
        let m: Manifest = toml::from_str(text).map_err(|e| ManifestError::Toml { path: path.into(), source: e })?;
        if m.seeds_per_scene == 0 {
            return Err(ManifestError::Invalid("seeds_per_scene must be positive".into()));
        }
        if m.models.is_none() && m.training.is_none() {
            return Err(ManifestError::Invalid("manifest needs [models] or [training]".into()));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|e| ManifestError::Io { path: path.into(), source: e })?;
        let mut m = Self::parse(&text, path)?;
        m.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(m)
    }

    /// Makes relative file paths relative to the manifest's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(m) = &mut self.models {
            fix(&mut m.two_kp);
            fix(&mut m.kpmd);
        }
        for s in &mut self.scenes {
            for p in [&mut s.features1, &mut s.features2, &mut s.fixed_dir, &mut s.correspondences].into_iter().flatten() {
                fix(p);
            }
        }
    }

    /// Groups expanded into scenes, in manifest order: groups first, then
    /// single scenes.
    pub fn entries(&self) -> Vec<Entry> {
        let mut out = Vec::new();
        for g in &self.groups {
            for i in 0..g.count {
                let config = SceneConfig { seed: indexed_seed(self.seed, &format!("scene/{}", g.name), i as u64), ..g.config.clone() };
                let name = format!("{}-{i:03}", g.name);
                out.push(match config.validate() {
                    Ok(()) => Entry::Synthetic { name, group: g.name.clone(), config },
                    Err(e) => Entry::Broken { name, error: e.to_string() },
                });
            }
        }
        for (i, s) in self.scenes.iter().enumerate() {
            let name = s.name.clone();
            out.push(match (&s.config, &s.features1, &s.features2, &s.correspondences) {
                (Some(c), None, None, None) => {
                    let config = SceneConfig { seed: indexed_seed(self.seed, "scene/single", i as u64), ..c.clone() };
                    match config.validate() {
                        Ok(()) => Entry::Synthetic { name, group: s.name.clone(), config },
                        Err(e) => Entry::Broken { name, error: e.to_string() },
                    }
                }
                (None, Some(a), Some(b), Some(gt)) => Entry::Files {
                    name,
                    features1: a.clone(),
                    features2: b.clone(),
                    fixed_dir: s.fixed_dir.clone().unwrap_or_else(|| a.parent().unwrap_or(Path::new(".")).to_path_buf()),
                    correspondences: gt.clone(),
                },
                _ => Entry::Broken {
                    name,
                    error: "a scene needs either `config` or `features1`, `features2` and `correspondences`".into(),
                },
            });
        }
        out
    }

    /// Training scenes, seeded independently of the evaluation scenes.
    pub fn training_configs(&self) -> Vec<SceneConfig> {
        let Some(t) = &self.training else { return Vec::new() };
        let mut out = Vec::new();
        let groups = std::iter::once((t.count, &t.config)).chain(t.extra.iter().map(|g| (g.count, &g.config)));
        for (gi, (count, config)) in groups.enumerate() {
            for i in 0..count {
                let seed = indexed_seed(self.seed, &format!("train/{gi}"), i as u64);
                out.push(SceneConfig { seed, ..config.clone() });
            }
        }
        out
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.seeds_per_scene as u64).map(|i| indexed_seed(self.seed, "sampler", i)).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchRunError {
    #[error(transparent)]
    Model(#[from] model_io::ModelFileError),
    #[error("training failed: {0}")]
    Training(String),
}

/// Models named by the manifest, or trained on its training scenes.
pub fn obtain_models(manifest: &Manifest) -> Result<Models, BenchRunError> {
    if let Some(p) = &manifest.models {
        return Ok(Models { two_kp: model_io::load_model(&p.two_kp)?, kpmd: model_io::load_model(&p.kpmd)? });
    }
    let configs = manifest.training_configs();
    let scenes: Vec<SyntheticScene> = configs
        .par_iter()
        .map(gen_scene)
        .collect::<Result<_, _>>()
        .map_err(|e| BenchRunError::Training(e.to_string()))?;
    let mut params = TreeParams::default();
    if let Some(m) = manifest.training.as_ref().and_then(|t| t.min_leaf) {
        params.min_leaf = m;
    }
    train_on_scenes(&scenes, &manifest.pipeline, &params).map_err(|e| BenchRunError::Training(e.to_string()))
}

/// Outcome of one manifest entry.
#[derive(Debug, Clone)]
pub enum EntryResult {
    Done { group: String, outcome: SceneOutcome },
    Failed { name: String, error: String },
}

#[derive(Debug, Clone)]
pub struct Report {
    pub results: Vec<EntryResult>,
}

impl Report {
    pub fn outcomes(&self) -> impl Iterator<Item = &SceneOutcome> {
        self.results.iter().filter_map(|r| match r {
            EntryResult::Done { outcome, .. } => Some(outcome),
            EntryResult::Failed { .. } => None,
        })
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.outcomes().flat_map(|o| o.rows.iter().cloned()).collect()
    }

    /// Plain-text summary: per group, success counts averaged over seeds and
    /// mean precision of each method; then failed entries.
    pub fn summary(&self) -> String {
        let mut groups: Vec<(String, Vec<&SceneOutcome>)> = Vec::new();
        for r in &self.results {
            if let EntryResult::Done { group, outcome } = r {
                match groups.iter_mut().find(|(g, _)| g == group) {
                    Some((_, v)) => v.push(outcome),
                    None => groups.push((group.clone(), vec![outcome])),
                }
            }
        }
        let mut s = String::new();
        for (g, outs) in &groups {
            let n = outs.len() as f64;
            let lowe = outs.iter().map(|o| o.lowe_inlier_rate).sum::<f64>() / n;
            s.push_str(&format!("group {g}: {} scenes, mean distance-ratio inlier rate {lowe:.4}\n", outs.len()));
            for m in Method::ALL {
                let succ: f64 = outs.iter().map(|o| o.success_rate(m)).sum();
                let prec = outs.iter().map(|o| o.precision_of(m)).sum::<f64>() / n;
                s.push_str(&format!("  {:<9} success {succ:.1}/{}  precision@100 {prec:.4}\n", m.as_str(), outs.len()));
            }
        }
        for r in &self.results {
            if let EntryResult::Failed { name, error } = r {
                s.push_str(&format!("failed {name}: {error}\n"));
            }
        }
        s
    }
}

fn load_fixed(dir: &Path, image_id: &str, angle: f64) -> Option<FeatureSet> {
    let path = find_fixed(dir, image_id, angle).ok()??;
    features_io::load_features(&path).ok()
}

fn run_entry(entry: &Entry, models: &Models, cfg: &PipelineConfig, seeds: &[u64], timing: bool) -> EntryResult {
    let start = Instant::now();
    let clock_ms = || start.elapsed().as_millis() as u64;
    let zero = || 0u64;
    let clock: &dyn Fn() -> u64 = if timing { &clock_ms } else { &zero };
    let failed = |e: String| EntryResult::Failed { name: entry.name().into(), error: e };
    match entry {
        Entry::Broken { error, .. } => failed(error.clone()),
        Entry::Synthetic { name, group, config } => {
            let scene = match gen_scene(config) {
                Ok(s) => s,
                Err(e) => return failed(e.to_string()),
            };
            let label = |i: usize, j: usize| scene.label(i, j);
            let input = PairInput {
                name,
                f1: &scene.images[0].natural,
                f2: &scene.images[1].natural,
                gt_pairs: &scene.gt_pairs,
                label: Some(&label),
                clock,
            };
            match evaluate_pair(&input, |side, a| Some(scene.fixed_set(side, a)), models, cfg, seeds, &par_count_sfm) {
                Ok(outcome) => EntryResult::Done { group: group.clone(), outcome },
                Err(e) => failed(e.to_string()),
            }
        }
        Entry::Files { name, features1, features2, fixed_dir, correspondences } => {
            let loaded = (|| -> Result<_, String> {
                let f1 = features_io::load_features(features1).map_err(|e| e.to_string())?;
                let f2 = features_io::load_features(features2).map_err(|e| e.to_string())?;
                let gt = csv_io::load_correspondences(correspondences).map_err(|e| e.to_string())?;
                Ok((f1, f2, gt))
            })();
            let (f1, f2, gt) = match loaded {
                Ok(v) => v,
                Err(e) => return failed(e),
            };
            let ids = [f1.image_id.clone(), f2.image_id.clone()];
            let fixed = |side: ImageSide, a: f64| {
                let id = if side == ImageSide::First { &ids[0] } else { &ids[1] };
                load_fixed(fixed_dir, id, a)
            };
            let input = PairInput { name, f1: &f1, f2: &f2, gt_pairs: &gt, label: None, clock };
            match evaluate_pair(&input, fixed, models, cfg, seeds, &par_count_sfm) {
                Ok(outcome) => EntryResult::Done { group: name.clone(), outcome },
                Err(e) => failed(e.to_string()),
            }
        }
    }
}

/// Runs every entry (in parallel across entries) and assembles the results
/// in manifest order.
pub fn run_benchmark(manifest: &Manifest, models: &Models, timing: bool) -> Report {
    let seeds = manifest.seeds();
    let entries = manifest.entries();
    let results = entries.par_iter().map(|e| run_entry(e, models, &manifest.pipeline, &seeds, timing)).collect();
    Report { results }
}

/// Writes `report.csv`, `precision.csv` and `summary.txt` into `dir`.
pub fn write_report_files(report: &Report, dir: &Path) -> Result<(), csv_io::TableError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| csv_io::TableError::Io { path: p, source: e }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let p = dir.join("report.csv");
    csv_io::write_report(&report.rows(), std::fs::File::create(&p).map_err(io(&p))?)?;
    let p = dir.join("precision.csv");
    let outcomes: Vec<SceneOutcome> = report.outcomes().cloned().collect();
    csv_io::write_precision(&outcomes, std::fs::File::create(&p).map_err(io(&p))?)?;
    let p = dir.join("summary.txt");
    std::fs::write(&p, report.summary()).map_err(io(&p))?;
    Ok(())
}
