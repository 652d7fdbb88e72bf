//! The `epiprep` command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 malformed input, 3 extraction
//! request written, 4 not enough matches, 5 model schema or version error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use epiprep_core::bench::{baseline_ranking, gen_scene, Method, SceneConfig, TrainingScene};
use epiprep_core::dtree::{cross_validate, train_tree, DtreeError, LabeledDataset, TreeParams};
use epiprep_core::estimator::{guided_ransac, prepare_pipeline, select_branch, Branch, BranchOutcome, EstimateError};
use epiprep_core::global_rank::KPMD_SCHEMA;
use epiprep_core::pipeline::{
    kpmd_training_rows, preprocess, two_kp_training_rows, ImageSide, Models, PipelineConfig, PipelineError,
};
use epiprep_core::twokeypoint::TWO_KP_SCHEMA;
use epiprep_core::FeatureSet;

use crate::bench::{obtain_models, run_benchmark, write_report_files, BenchRunError, Manifest, ManifestError};
use crate::csv_io::{self, TableError};
use crate::features_io::{self, FeatureFileError};
use crate::model_io::{self, ModelFileError};
use crate::parallel::par_count_sfm;
use crate::records::{self, BranchRecord, ExtractionRequest, RecordError, ResultRecord, RollRecord};

pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_REQUEST: i32 = 3;
pub const EXIT_INSUFFICIENT: i32 = 4;
pub const EXIT_SCHEMA: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Parse(String),
    /// Fixed-orientation features are missing; the request files were written.
    #[error("extraction needed: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    Request(Vec<PathBuf>),
    #[error("{0}")]
    Insufficient(String),
    #[error("{0}")]
    Schema(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Request(_) => EXIT_REQUEST,
            CliError::Insufficient(_) => EXIT_INSUFFICIENT,
            CliError::Schema(_) => EXIT_SCHEMA,
        }
    }
}

impl From<FeatureFileError> for CliError {
    fn from(e: FeatureFileError) -> Self {
        match e {
            FeatureFileError::Io { .. } => CliError::Io(e.to_string()),
            FeatureFileError::Parse { .. } => CliError::Parse(e.to_string()),
        }
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        match e {
            ModelFileError::Io { .. } => CliError::Io(e.to_string()),
            ModelFileError::Json { .. } => CliError::Parse(e.to_string()),
            ModelFileError::Load { .. } => CliError::Schema(e.to_string()),
        }
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        match e {
            TableError::Io { .. } => CliError::Io(e.to_string()),
            TableError::Csv(ref c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => CliError::Io(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<RecordError> for CliError {
    fn from(e: RecordError) -> Self {
        match e {
            RecordError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Schema(_) => CliError::Schema(e.to_string()),
            PipelineError::Estimate(_) => CliError::Insufficient(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<DtreeError> for CliError {
    fn from(e: DtreeError) -> Self {
        CliError::Parse(e.to_string())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "epiprep", version, about = "Ranked putative correspondences for two-view geometry")]
pub struct Cli {
    /// TOML file with pipeline settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub tunables: Tunables,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides of individual pipeline settings.
#[derive(Debug, Clone, Default, Args)]
pub struct Tunables {
    /// Largest distance ratio kept in the ratio-test list.
    #[arg(long, global = true)]
    pub ratio_max: Option<f64>,
    /// Agglomerative clustering stops below this similarity.
    #[arg(long, global = true)]
    pub stop_sim: Option<f64>,
    /// Spatial neighbours per feature when forming 2keypoints.
    #[arg(long, global = true)]
    pub k1: Option<usize>,
    /// Neighbour radius in feature scales.
    #[arg(long, global = true)]
    pub k2: Option<f64>,
    /// Same-cluster neighbours per feature.
    #[arg(long, global = true)]
    pub k3: Option<usize>,
    /// 2keypoint matches kept for candidate matrices.
    #[arg(long = "k-2kp", global = true)]
    pub k_2kp: Option<usize>,
    /// Sampson threshold for candidate support, pixels.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Virtual-point offset in feature scales.
    #[arg(long, global = true)]
    pub offset_scale: Option<f64>,
    /// Roll density bandwidth, degrees.
    #[arg(long, global = true)]
    pub roll_bandwidth_deg: Option<f64>,
    /// Rolls smaller than this run only the zero branch, degrees.
    #[arg(long, global = true)]
    pub branch_dedup_deg: Option<f64>,
    /// Run both orientation branches even for a near-zero roll.
    #[arg(long, global = true)]
    pub always_two_branches: bool,
    /// RANSAC inlier threshold, pixels.
    #[arg(long, global = true)]
    pub inlier_tau: Option<f64>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, global = true)]
    pub lo_rounds: Option<usize>,
    /// Sampler seed; also seeds cross-validation folds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl Tunables {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        fn set<T: Copy>(dst: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *dst = v;
            }
        }
        set(&mut cfg.ratio_max, self.ratio_max);
        set(&mut cfg.stop_sim, self.stop_sim);
        set(&mut cfg.two_kp.k1, self.k1);
        set(&mut cfg.two_kp.k2, self.k2);
        set(&mut cfg.two_kp.k3, self.k3);
        set(&mut cfg.k_2kp, self.k_2kp);
        set(&mut cfg.tau, self.tau);
        set(&mut cfg.offset_scale, self.offset_scale);
        set(&mut cfg.roll.bandwidth, self.roll_bandwidth_deg.map(f64::to_radians));
        set(&mut cfg.branch_dedup, self.branch_dedup_deg.map(f64::to_radians));
        cfg.always_two_branches |= self.always_two_branches;
        set(&mut cfg.ransac.inlier_tau, self.inlier_tau);
        set(&mut cfg.ransac.max_iters, self.max_iters);
        set(&mut cfg.ransac.lo_rounds, self.lo_rounds);
        set(&mut cfg.ransac.seed, self.seed);
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank the putative matches of an image pair.
    Match(MatchArgs),
    /// Guided RANSAC on ranked match tables.
    Estimate(EstimateArgs),
    /// Train a classifier on a labelled table.
    Train(TrainArgs),
    /// Run a benchmark manifest.
    Bench(BenchArgs),
    /// Write a synthetic scene as feature files with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// 2kpmd classifier.
    #[arg(long)]
    pub two_kp_model: PathBuf,
    /// kpmd classifier.
    #[arg(long)]
    pub kpmd_model: PathBuf,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Natural-orientation features of image 1.
    #[arg(long)]
    pub features1: PathBuf,
    /// Natural-orientation features of image 2.
    #[arg(long)]
    pub features2: PathBuf,
    /// Where fixed-orientation files live; defaults to the directory of
    /// `features1`.
    #[arg(long)]
    pub fixed_dir: Option<PathBuf>,
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Ranked match tables. With two tables the first is the `alpha_exp`
    /// branch and the second the zero branch.
    #[arg(long, required = true, num_args = 1..=2)]
    pub ranked: Vec<PathBuf>,
    /// Result record (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemaKind {
    #[value(name = "2kpmd")]
    TwoKp,
    #[value(name = "kpmd")]
    Kpmd,
}

impl SchemaKind {
    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            SchemaKind::TwoKp => &TWO_KP_SCHEMA,
            SchemaKind::Kpmd => &KPMD_SCHEMA,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labelled table (feature columns then `label`).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub schema: SchemaKind,
    /// Model file (JSON).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Record wall-clock times (reports are then no longer reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene settings (TOML, any scene field).
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Overrides the scene seed.
    #[arg(long)]
    pub scene_seed: Option<u64>,
    /// Overrides the scene roll, degrees.
    #[arg(long)]
    pub roll_deg: Option<f64>,
    /// Also write image 2 fixed at these angles, radians.
    #[arg(long, allow_negative_numbers = true)]
    pub fixed_angle: Vec<f64>,
    /// Write fixed-orientation files at zero only, not at the estimated roll.
    #[arg(long)]
    pub only_zero: bool,
    /// With a 2kpmd model, also write kpmd training rows.
    #[arg(long)]
    pub two_kp_model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Pipeline settings from `--config` (if any) with flag overrides.
pub fn pipeline_config(config: Option<&Path>, base: PipelineConfig, tunables: &Tunables) -> Result<PipelineConfig, CliError> {
    let mut cfg = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?
        }
        None => base,
    };
    tunables.apply(&mut cfg);
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn load_models(args: &ModelArgs) -> Result<Models, CliError> {
    let models = Models { two_kp: model_io::load_model(&args.two_kp_model)?, kpmd: model_io::load_model(&args.kpmd_model)? };
    models.check().map_err(|e| CliError::Schema(e.to_string()))?;
    Ok(models)
}

/// Runs one command; messages for the user go to `out`.
pub fn run(cli: &Cli, out: &mut String) -> Result<(), CliError> {
    match &cli.command {
        Command::Match(a) => {
            let cfg = pipeline_config(cli.config.as_deref(), PipelineConfig::default(), &cli.tunables)?;
            cmd_match(a, &cfg, out)
        }
        Command::Estimate(a) => {
            let cfg = pipeline_config(cli.config.as_deref(), PipelineConfig::default(), &cli.tunables)?;
            cmd_estimate(a, &cfg, out)
        }
        Command::Train(a) => cmd_train(a, cli.tunables.seed.unwrap_or(0), out),
        Command::Bench(a) => cmd_bench(a, cli, out),
        Command::Synth(a) => {
            let cfg = pipeline_config(cli.config.as_deref(), PipelineConfig::default(), &cli.tunables)?;
            cmd_synth(a, &cfg, out)
        }
    }
}

fn branch_file(prefix: &str, branch: Branch) -> String {
    format!("{prefix}_{}.csv", branch.as_str())
}

pub fn cmd_match(a: &MatchArgs, cfg: &PipelineConfig, out: &mut String) -> Result<(), CliError> {
    let f1 = features_io::load_features(&a.features1)?;
    let f2 = features_io::load_features(&a.features2)?;
    let models = load_models(&a.models)?;
    let fixed_dir = a.fixed_dir.clone().unwrap_or_else(|| a.features1.parent().unwrap_or(Path::new(".")).to_path_buf());
    create_dir(&a.out)?;

    let pre = preprocess(&f1, &f2, cfg)?;
    let roll = RollRecord {
        roll: pre.roll,
        alpha_exp_deg: pre.roll.map(|r| r.alpha_exp.to_degrees()),
        branches: pre.branches.iter().map(|&(branch, angle_rad)| BranchRecord { branch, angle_rad }).collect(),
    };
    records::write_json(&roll, &a.out.join("roll.json"))?;

    // every fixed-orientation set the branches need, keyed by image and angle
    let mut needed = vec![(ImageSide::First, 0.0)];
    needed.extend(pre.branches.iter().map(|&(_, angle)| (ImageSide::Second, angle)));
    let mut found = Vec::new();
    let mut requests = Vec::new();
    for (side, angle) in needed {
        let id = if side == ImageSide::First { &f1.image_id } else { &f2.image_id };
        match features_io::find_fixed(&fixed_dir, id, angle)? {
            Some(p) => {
                found.push((side, angle, features_io::load_features(&p)?));
                // a request left by an earlier run is answered now
                let stale = a.out.join(format!("request.{}.json", features_io::fixed_file_name(id, angle).trim_end_matches(".epf")));
                let _ = std::fs::remove_file(stale);
            }
            None => {
                let name = features_io::fixed_file_name(id, angle);
                let req = ExtractionRequest { out: Some(fixed_dir.join(&name)), ..ExtractionRequest::fixed(id.clone(), angle) };
                let path = a.out.join(format!("request.{}.json", name.trim_end_matches(".epf")));
                records::write_json(&req, &path)?;
                let _ = writeln!(out, "request {}", path.display());
                requests.push(path);
            }
        }
    }
    if !requests.is_empty() {
        return Err(CliError::Request(requests));
    }
    for s in &found {
        check_fixed_matches(s.1, &s.2, if s.0 == ImageSide::First { &f1 } else { &f2 })?;
    }
    let lookup = |side: ImageSide, angle: f64| -> Option<FeatureSet> {
        found
            .iter()
            .find(|(s, a, _)| *s == side && epiprep_core::angle_diff(*a, angle).abs() < 1e-12)
            .map(|(_, _, f)| f.clone())
    };
    let prepared = prepare_pipeline(&f1, &f2, lookup, &models, cfg, &par_count_sfm)?;
    for (branch, ranking) in &prepared.branches {
        csv_io::save_ranked(&csv_io::ranked_rows(&ranking.ranked, &f1, &f2), &a.out.join(branch_file("ranked", *branch)))?;
        csv_io::save_two_kp(&ranking.top_2kp, &a.out.join(branch_file("two_kp", *branch)))?;
        let _ = writeln!(
            out,
            "branch {} at {:.2} deg: {} clusters / {} clusters, |X| = {}, {} 2keypoint matches, {} candidate matrices, {} ranked",
            branch.as_str(),
            ranking.angle.to_degrees(),
            ranking.clusters1.len(),
            ranking.clusters2.len(),
            ranking.x.len(),
            ranking.two_kp_total,
            ranking.candidate_count,
            ranking.ranked.len()
        );
    }
    for method in [Method::DistanceRatio, Method::SimilarityWeight] {
        let list = if method == Method::DistanceRatio { &pre.standard.lowe } else { &pre.standard.blogs };
        let rows = csv_io::match_rows(&baseline_ranking(list, method), &f1, &f2);
        csv_io::save_ranked(&rows, &a.out.join(format!("baseline_{}.csv", method.as_str())))?;
    }
    match pre.roll {
        Some(r) => {
            let _ = writeln!(out, "roll {:.2} deg", r.alpha_exp.to_degrees());
        }
        None => {
            let _ = writeln!(out, "roll undetermined");
        }
    }
    Ok(())
}

fn check_fixed_matches(angle: f64, fixed: &FeatureSet, natural: &FeatureSet) -> Result<(), CliError> {
    if fixed.len() != natural.len() || fixed.dim != natural.dim {
        return Err(CliError::Parse(format!(
            "fixed-orientation set of {} at {angle} rad has {} features of dimension {}, natural set {} of dimension {}",
            natural.image_id,
            fixed.len(),
            fixed.dim,
            natural.len(),
            natural.dim
        )));
    }
    Ok(())
}

pub fn cmd_estimate(a: &EstimateArgs, cfg: &PipelineConfig, out: &mut String) -> Result<(), CliError> {
    let branches: &[Branch] = if a.ranked.len() == 2 { &[Branch::AlphaExp, Branch::Zero] } else { &[Branch::Zero] };
    let mut outcomes = Vec::new();
    for (path, &branch) in a.ranked.iter().zip(branches) {
        let rows = csv_io::load_ranked(path)?;
        let pairs: Vec<_> = rows.iter().map(|r| r.pair()).collect();
        let probs: Vec<f64> = rows.iter().map(|r| r.prob).collect();
        let result = guided_ransac(&pairs, &probs, &cfg.ransac).map(|mut r| {
            r.branch = branch;
            r
        });
        outcomes.push(BranchOutcome { branch, angle: 0.0, result });
    }
    let Some(chosen) = select_branch(&outcomes) else {
        let reasons: Vec<String> = outcomes
            .iter()
            .map(|o| match &o.result {
                Err(e) => format!("{}: {e}", o.branch.as_str()),
                Ok(_) => unreachable!("a successful branch would be chosen"),
            })
            .collect();
        return Err(match outcomes.iter().all(|o| matches!(o.result, Err(EstimateError::Misaligned { .. }))) {
            true => CliError::Parse(reasons.join("; ")),
            false => CliError::Insufficient(reasons.join("; ")),
        });
    };
    let support = outcomes.iter().filter_map(|o| o.result.as_ref().ok().map(|r| (o.branch, r.support))).collect();
    let best = outcomes[chosen].result.as_ref().expect("chosen branch succeeded");
    records::write_json(&ResultRecord::new(best, support), &a.out)?;
    let _ = writeln!(out, "branch {}: {} inliers after {} iterations", best.branch.as_str(), best.support, best.iterations);
    Ok(())
}

pub fn cmd_train(a: &TrainArgs, seed: u64, out: &mut String) -> Result<(), CliError> {
    let data = csv_io::load_dataset(&a.data)?;
    let expected = a.schema.columns();
    if data.schema.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(CliError::Schema(format!("{} has columns {:?}, expected {:?}", a.data.display(), data.schema, expected)));
    }
    let mut params = TreeParams::default();
    if let Some(m) = a.min_leaf {
        params.min_leaf = m;
    }
    params.max_depth = a.max_depth.or(params.max_depth);
    let model = train_tree(&data, &params)?;
    model_io::save_model(&model, &a.out)?;
    let _ = writeln!(out, "{} rows, {} positive; tree depth {}, {} leaves", data.len(), data.positives(), model.depth(), model.leaf_count());
    match cross_validate(&data, a.folds, seed, &params) {
        Ok(m) => {
            let _ = writeln!(
                out,
                "{}-fold cross-validation: accuracy {:.4} precision {:.4} recall {:.4}",
                m.folds, m.accuracy, m.precision, m.recall
            );
        }
        Err(DtreeError::FoldError { k, rows }) => {
            let _ = writeln!(out, "cross-validation skipped: {k} folds over {rows} rows");
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs, cli: &Cli, out: &mut String) -> Result<(), CliError> {
    let mut manifest = Manifest::load(&a.manifest).map_err(|e| match e {
        ManifestError::Io { .. } => CliError::Io(e.to_string()),
        _ => CliError::Parse(e.to_string()),
    })?;
    manifest.pipeline = pipeline_config(cli.config.as_deref(), manifest.pipeline, &cli.tunables)?;
    let models = obtain_models(&manifest).map_err(|e| match e {
        BenchRunError::Model(m) => CliError::from(m),
        BenchRunError::Training(t) => CliError::Parse(t),
    })?;
    models.check().map_err(|e| CliError::Schema(e.to_string()))?;
    create_dir(&a.out)?;
    if manifest.models.is_none() {
        model_io::save_model(&models.two_kp, &a.out.join("two_kp_model.json"))?;
        model_io::save_model(&models.kpmd, &a.out.join("kpmd_model.json"))?;
    }
    let report = run_benchmark(&manifest, &models, a.timing);
    write_report_files(&report, &a.out)?;
    out.push_str(&report.summary());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn cmd_synth(a: &SynthArgs, cfg: &PipelineConfig, out: &mut String) -> Result<(), CliError> {
    let mut scene_cfg: SceneConfig = match &a.scene {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?
        }
        None => SceneConfig::default(),
    };
    if let Some(s) = a.scene_seed {
        scene_cfg.seed = s;
    }
    if let Some(r) = a.roll_deg {
        scene_cfg.roll = r.to_radians();
    }
    let scene = gen_scene(&scene_cfg).map_err(|e| CliError::Parse(e.to_string()))?;
    create_dir(&a.out)?;

    let [im1, im2] = &scene.images;
    features_io::save_features(&im1.natural, &a.out.join(format!("{}.epf", im1.natural.image_id)))?;
    features_io::save_features(&im2.natural, &a.out.join(format!("{}.epf", im2.natural.image_id)))?;
    let mut angles2: BTreeMap<String, f64> = BTreeMap::new();
    angles2.insert(features_io::fixed_file_name(&im2.natural.image_id, 0.0), 0.0);
    if !a.only_zero {
        let pre = preprocess(&im1.natural, &im2.natural, cfg)?;
        for &(_, angle) in &pre.branches {
            angles2.insert(features_io::fixed_file_name(&im2.natural.image_id, angle), angle);
        }
    }
    for &angle in &a.fixed_angle {
        angles2.insert(features_io::fixed_file_name(&im2.natural.image_id, angle), angle);
    }
    features_io::save_features(&im1.fixed_set(0.0), &a.out.join(features_io::fixed_file_name(&im1.natural.image_id, 0.0)))?;
    for (name, angle) in &angles2 {
        features_io::save_features(&im2.fixed_set(*angle), &a.out.join(name))?;
    }

    let f = scene.f_gt.to_row_major();
    let mut text = String::new();
    for r in 0..3 {
        let _ = writeln!(text, "{:?} {:?} {:?}", f[3 * r], f[3 * r + 1], f[3 * r + 2]);
    }
    write_text(&a.out.join("f_gt.txt"), &text)?;
    let p = a.out.join("correspondences.txt");
    let file = std::fs::File::create(&p).map_err(|e| io_error(&p, e))?;
    csv_io::write_correspondences(&scene.gt_pairs, std::io::BufWriter::new(file)).map_err(|e| io_error(&p, e))?;
    let mut truth = String::from("i1,i2\n");
    for (i, j) in scene.true_correspondences() {
        let _ = writeln!(truth, "{i},{j}");
    }
    write_text(&a.out.join("truth.csv"), &truth)?;

    let training = TrainingScene::new(&scene, cfg)?;
    let label = |i: usize, j: usize| scene.label(i, j);
    let pair = training.pair(&label);
    let rows: LabeledDataset = two_kp_training_rows(&pair, cfg)?;
    csv_io::save_dataset(&rows, &a.out.join("train_2kpmd.csv"))?;
    if let Some(m) = &a.two_kp_model {
        let model = model_io::load_model(m)?;
        let rows = kpmd_training_rows(&pair, &model, cfg)?;
        csv_io::save_dataset(&rows, &a.out.join("train_kpmd.csv"))?;
    }
    let _ = writeln!(
        out,
        "{} + {} features, {} true correspondences, {} fixed-orientation files",
        im1.natural.len(),
        im2.natural.len(),
        scene.gt_pairs.len(),
        angles2.len() + 1
    );
    Ok(())
}
