//! Subcommand implementations. Each one reads its inputs, writes its
//! outputs, copies them into the artifact store, appends a run record and
//! prints one summary line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use ndarray::Array2;
use rayon::prelude::*;

use faultsound::analysis::{self, AttentionStack, TsneConfig};
use faultsound::audio_io::{downmix, read_wav};
use faultsound::autoencoder::{self, AeTrainConfig, AutoencoderModel};
use faultsound::classifier_head::{self, build_head, ClassifierHead, EmbeddingSet, HeadTrainConfig, Label};
use faultsound::dsp::{frame_windows, FeatureConfig, FeatureExtractor, Spectrogram, WindowBatch};
use faultsound::eval::{self, roc_auc, Manifest, Partition, ScoreTable, Split, SplitConfig, SplitMode};
use faultsound::formats::{format_kv, parse_kv, Metadata};
use faultsound::lof::{fit_lof, predict_vote, score_lof, LofModel, VoteConfig};
use faultsound::neural::{layer_wise_decay, AdamConfig};
use faultsound::store::{ArtifactKind, FileRef, RunRecord, Store};
use faultsound::Error;

use crate::config::PipelineConfig;

type Result<T> = std::result::Result<T, Error>;

const INDEX_FILE: &str = "index.csv";
const SPECTROGRAM_EXT: &str = "lmsp";

pub struct Context {
    pub cfg: PipelineConfig,
    pub store: Store,
}

impl Context {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        let store = Store::open(&cfg.store_root)?;
        Ok(Self { cfg, store })
    }

    /// Copies outputs into the store and appends the run to the ledger.
    fn record(
        &self,
        stage: &str,
        seed: Option<u64>,
        extra: Metadata,
        inputs: &[&Path],
        outputs: &[(ArtifactKind, &Path)],
    ) -> Result<()> {
        let mut config = self.cfg.snapshot();
        for (k, v) in extra {
            config.insert(format!("args.{k}"), v);
        }
        let mut record = RunRecord::new(stage, config, seed);
        for path in inputs {
            record.inputs.push(FileRef::of(path)?);
        }
        for (kind, path) in outputs {
            let bytes = fs::read(path)?;
            let mut meta = Metadata::new();
            meta.insert("source_path".into(), path.display().to_string());
            meta.insert("stage".into(), stage.to_string());
            self.store.put_artifact(*kind, &bytes, &meta)?;
            record.outputs.push(FileRef::of(path)?);
        }
        record.finished_ms = faultsound::store::now_ms();
        self.store.record_run(record)?;
        Ok(())
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn args_meta(pairs: &[(&str, String)]) -> Metadata {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    let mut manifest = Manifest::read_csv(fs::File::open(path)?)?;
    // relative audio paths are relative to the manifest
    let base = path.parent().unwrap_or(Path::new("."));
    for r in &mut manifest.records {
        if r.path.is_relative() {
            r.path = base.join(&r.path);
        }
    }
    Ok(manifest)
}

fn read_split(path: &Path) -> Result<Split> {
    Split::read_csv(fs::File::open(path)?, SplitMode::Unsupervised)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn parse_partition(s: &str) -> Result<Partition> {
    s.parse().map_err(|_| usage(format!("unknown partition `{s}`")))
}

// ------------------------------------------------------------ preprocess

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// WAV files to process; clip ids are the file stems.
    #[arg(value_name = "WAV")]
    inputs: Vec<PathBuf>,
    /// Manifest listing clips (`clip_id,path,machine_type,machine_id,label`).
    #[arg(long, value_name = "FILE", conflicts_with = "inputs")]
    manifest: Option<PathBuf>,
    /// Directory for spectrogram files and their index.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Feature profile: ae, cnn or ast.
    #[arg(long)]
    profile: Option<String>,
    /// Also write mean+std pooled clip embeddings to this file.
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
}

struct ClipJob {
    clip_id: String,
    path: PathBuf,
    label: Label,
}

fn safe_file_stem(clip_id: &str) -> String {
    clip_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

pub fn preprocess(ctx: &Context, args: PreprocessArgs) -> Result<()> {
    let profile_name = args.profile.clone().unwrap_or_else(|| ctx.cfg.features.profile.clone());
    let profile = profile_name.parse().map_err(|_| usage(format!("unknown profile `{profile_name}`")))?;
    let fx = FeatureExtractor::new(FeatureConfig::for_profile(profile))?;
    let jobs: Vec<ClipJob> = match &args.manifest {
        Some(m) => read_manifest(m)?
            .records
            .into_iter()
            .map(|r| ClipJob {
                clip_id: r.clip_id,
                path: r.path,
                label: r.label,
            })
            .collect(),
        None => args
            .inputs
            .iter()
            .map(|p| ClipJob {
                clip_id: p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                path: p.clone(),
                label: Label::Unlabeled,
            })
            .collect(),
    };
    if jobs.is_empty() {
        return Err(usage("preprocess needs WAV files or --manifest"));
    }
    fs::create_dir_all(&args.out_dir)?;

    let sample_rate = fx.config().sample_rate_hz;
    let results: Vec<Result<(Spectrogram, PathBuf)>> = jobs
        .par_iter()
        .map(|job| {
            let clip = read_wav(&job.path)?;
            clip.require_rate(sample_rate)?;
            let mono = downmix(&clip);
            let spec = fx.spectrogram(mono.as_slice().expect("contiguous"))?;
            let file = args.out_dir.join(format!("{}.{SPECTROGRAM_EXT}", safe_file_stem(&job.clip_id)));
            let mut meta = spec.metadata();
            meta.insert("clip_id".into(), job.clip_id.clone());
            meta.insert("profile".into(), profile.to_string());
            write_file(&file, &spec.to_bytes())?;
            write_file(&sidecar(&file), format_kv(&meta).as_bytes())?;
            Ok((spec, file))
        })
        .collect();

    let mut index = csv::Writer::from_writer(Vec::new());
    index.write_record(["clip_id", "file"])?;
    let mut pooled = Vec::new();
    let mut files = Vec::new();
    let mut dims = Vec::new();
    for (job, res) in jobs.iter().zip(results) {
        let (spec, file) = res?;
        let name = file.file_name().expect("file name").to_string_lossy().into_owned();
        index.write_record([job.clip_id.as_str(), name.as_str()])?;
        dims.push((spec.n_mels(), spec.n_frames()));
        pooled.push(spec.pooled_stats());
        files.push(file);
    }
    let index_path = args.out_dir.join(INDEX_FILE);
    write_file(&index_path, &index.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;

    let mut outputs: Vec<(ArtifactKind, &Path)> = vec![(ArtifactKind::Table, index_path.as_path())];
    outputs.extend(files.iter().map(|f| (ArtifactKind::Spectrogram, f.as_path())));
    if let Some(path) = &args.embeddings {
        let dim = pooled[0].len();
        let vectors = Array2::from_shape_fn((pooled.len(), dim), |(i, j)| pooled[i][j]);
        let set = EmbeddingSet::new(
            vectors,
            jobs.iter().map(|j| j.clip_id.clone()).collect(),
            jobs.iter().map(|j| j.label).collect(),
            format!("pooled-{profile}"),
        )?;
        set.write_path(path)?;
        outputs.push((ArtifactKind::Embeddings, path.as_path()));
    }
    let inputs: Vec<&Path> = match &args.manifest {
        Some(m) => vec![m.as_path()],
        None => args.inputs.iter().map(PathBuf::as_path).collect(),
    };
    ctx.record(
        "preprocess",
        None,
        args_meta(&[("profile", profile.to_string()), ("out_dir", args.out_dir.display().to_string())]),
        &inputs,
        &outputs,
    )?;
    let dims_text = if dims.iter().all(|d| *d == dims[0]) {
        format!("{}x{}", dims[0].0, dims[0].1)
    } else {
        "mixed".into()
    };
    println!(
        "preprocessed clips={} profile={profile} dims={dims_text} out={}",
        jobs.len(),
        args.out_dir.display()
    );
    Ok(())
}

/// Maps clip id to spectrogram file through the index written by
/// `preprocess`.
fn read_feature_index(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut r = csv::Reader::from_path(dir.join(INDEX_FILE))?;
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        out.insert(rec[0].to_string(), dir.join(&rec[1]));
    }
    Ok(out)
}

fn load_spectrogram(path: &Path) -> Result<Spectrogram> {
    let meta = parse_kv(&fs::read_to_string(sidecar(path))?)?;
    Spectrogram::from_bytes(&fs::read(path)?, &meta)
}

fn load_windows(index: &BTreeMap<String, PathBuf>, ids: &[String], context: usize) -> Result<Vec<WindowBatch>> {
    ids.par_iter()
        .map(|id| {
            let path = index
                .get(id)
                .ok_or_else(|| Error::Parse(format!("clip `{id}` has no spectrogram in the feature index")))?;
            frame_windows(&load_spectrogram(path)?, context)
        })
        .collect()
}

fn profile_context(ctx: &Context) -> Result<usize> {
    Ok(FeatureConfig::for_profile(ctx.cfg.profile()?).context)
}

// ------------------------------------------------------------ split

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Output `clip_id,partition` file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// supervised or unsupervised.
    #[arg(long)]
    mode: Option<String>,
    /// Split all clips as one group instead of per (label, machine id).
    #[arg(long)]
    no_stratify: bool,
}

pub fn split(ctx: &Context, args: SplitArgs) -> Result<()> {
    let manifest = read_manifest(&args.manifest)?;
    let mode_name = args.mode.clone().unwrap_or_else(|| ctx.cfg.split.mode.clone());
    let mode: SplitMode = mode_name.parse().map_err(|_| usage(format!("unknown split mode `{mode_name}`")))?;
    let cfg = SplitConfig {
        seed: args.seed.unwrap_or(ctx.cfg.split.seed),
        mode,
        stratified: ctx.cfg.split.stratified && !args.no_stratify,
    };
    let parts = eval::split(&manifest, &cfg)?;
    let mut buf = Vec::new();
    parts.write_csv(&mut buf)?;
    write_file(&args.out, &buf)?;
    ctx.record(
        "split",
        Some(cfg.seed),
        args_meta(&[("mode", mode.to_string()), ("stratified", cfg.stratified.to_string())]),
        &[&args.manifest],
        &[(ArtifactKind::Split, &args.out)],
    )?;
    println!(
        "split train={} validation={} test={} discarded={}",
        parts.train.len(),
        parts.validation.len(),
        parts.test.len(),
        parts.discarded.len()
    );
    Ok(())
}

// ------------------------------------------------------------ autoencoder

#[derive(Debug, Args)]
pub struct TrainAeArgs {
    /// Directory written by `preprocess`.
    #[arg(long, value_name = "DIR")]
    features: PathBuf,
    #[arg(long, value_name = "FILE")]
    split: PathBuf,
    /// Labels; only normal clips of the train partition are used.
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train on raw dB windows instead of standardized ones.
    #[arg(long)]
    no_standardize: bool,
}

pub fn train_ae(ctx: &Context, args: TrainAeArgs) -> Result<()> {
    let manifest = read_manifest(&args.manifest)?;
    let parts = read_split(&args.split)?;
    let labels = manifest.labels();
    let ids: Vec<String> = parts
        .train
        .iter()
        .filter(|id| labels.get(id.as_str()) == Some(&Label::Normal))
        .cloned()
        .collect();
    if ids.is_empty() {
        return Err(Error::InsufficientData("no normal clips in the train partition".into()));
    }
    let index = read_feature_index(&args.features)?;
    let context = profile_context(ctx)?;
    let windows = load_windows(&index, &ids, context)?;
    let s = &ctx.cfg.autoencoder;
    let cfg = AeTrainConfig {
        input_dim: windows[0].width(),
        epochs: args.epochs.unwrap_or(s.epochs),
        batch_size: args.batch_size.unwrap_or(s.batch_size),
        adam: AdamConfig {
            learning_rate: args.lr.unwrap_or(s.learning_rate),
            ..AdamConfig::default()
        },
        seed: args.seed.unwrap_or(s.seed),
        standardize: s.standardize && !args.no_standardize,
    };
    let (model, report) = autoencoder::train_autoencoder(&windows, &cfg)?;
    write_file(&args.out, &model.to_bytes())?;
    ctx.record(
        "train-ae",
        Some(cfg.seed),
        args_meta(&[
            ("epochs", cfg.epochs.to_string()),
            ("batch_size", cfg.batch_size.to_string()),
            ("learning_rate", cfg.adam.learning_rate.to_string()),
            ("standardize", cfg.standardize.to_string()),
            ("input_dim", cfg.input_dim.to_string()),
        ]),
        &[&args.manifest, &args.split],
        &[(ArtifactKind::Model, &args.out)],
    )?;
    let n_windows: usize = windows.iter().map(WindowBatch::n_windows).sum();
    println!(
        "trained autoencoder clips={} windows={n_windows} epochs={} final_loss={:.6} out={}",
        ids.len(),
        cfg.epochs,
        report.loss_history.last().copied().unwrap_or(f64::NAN),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ScoreAeArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, value_name = "DIR")]
    features: PathBuf,
    /// Score only this split's partition; without it every indexed clip is scored.
    #[arg(long, value_name = "FILE")]
    split: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    partition: String,
    /// Output `clip_id,score` file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn score_ae(ctx: &Context, args: ScoreAeArgs) -> Result<()> {
    let model = AutoencoderModel::from_bytes(&fs::read(&args.model)?)?;
    let index = read_feature_index(&args.features)?;
    let ids: Vec<String> = match &args.split {
        Some(path) => read_split(path)?.ids(parse_partition(&args.partition)?).to_vec(),
        None => index.keys().cloned().collect(),
    };
    let context = profile_context(ctx)?;
    let windows = load_windows(&index, &ids, context)?;
    let scores = windows
        .par_iter()
        .map(|w| autoencoder::score_clip(&model, w))
        .collect::<Result<Vec<f64>>>()?;
    let table = ScoreTable::new(&ids, &scores, None)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_file(&args.out, &buf)?;
    let mut inputs: Vec<&Path> = vec![&args.model];
    if let Some(s) = &args.split {
        inputs.push(s);
    }
    ctx.record(
        "score-ae",
        None,
        args_meta(&[("partition", args.partition.clone())]),
        &inputs,
        &[(ArtifactKind::Scores, &args.out)],
    )?;
    println!("scored clips={} out={}", ids.len(), args.out.display());
    Ok(())
}

// ------------------------------------------------------------ head

#[derive(Debug, Args)]
pub struct TrainHeadArgs {
    /// Labeled `clip_id,label,e0,...` embeddings.
    #[arg(long, value_name = "FILE")]
    embeddings: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Standardize embedding dimensions with training statistics.
    #[arg(long)]
    standardize: bool,
    /// Divide the lower layer's learning rate by this factor.
    #[arg(long)]
    lr_decay: Option<f64>,
}

pub fn train_head(ctx: &Context, args: TrainHeadArgs) -> Result<()> {
    let set = EmbeddingSet::read_path(&args.embeddings)?;
    let s = &ctx.cfg.head;
    let seed = args.seed.unwrap_or(s.seed);
    let decay = args.lr_decay.or(s.lr_decay);
    let cfg = HeadTrainConfig {
        epochs: args.epochs.unwrap_or(s.epochs),
        batch_size: args.batch_size.unwrap_or(s.batch_size),
        adam: AdamConfig {
            learning_rate: args.lr.unwrap_or(s.learning_rate),
            ..AdamConfig::default()
        },
        seed,
        standardize: (s.standardize || args.standardize) && !ctx.cfg.strict_paper,
        lr_multipliers: decay.map(|f| layer_wise_decay(2, f, 2)),
    };
    let head = build_head(set.dim(), seed)?;
    let (head, history) = classifier_head::train_head(head, &set, &cfg)?;
    write_file(&args.out, &head.to_bytes())?;
    ctx.record(
        "train-head",
        Some(seed),
        args_meta(&[
            ("epochs", cfg.epochs.to_string()),
            ("batch_size", cfg.batch_size.to_string()),
            ("learning_rate", cfg.adam.learning_rate.to_string()),
            ("standardize", cfg.standardize.to_string()),
            ("lr_decay", decay.map(|d| d.to_string()).unwrap_or_default()),
        ]),
        &[&args.embeddings],
        &[(ArtifactKind::Model, &args.out)],
    )?;
    println!(
        "trained head rows={} dim={} epochs={} final_loss={:.6} out={}",
        set.len(),
        set.dim(),
        cfg.epochs,
        history.last().copied().unwrap_or(f64::NAN),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ScoreHeadArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, value_name = "FILE")]
    embeddings: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

pub fn score_head(ctx: &Context, args: ScoreHeadArgs) -> Result<()> {
    let head = ClassifierHead::from_bytes(&fs::read(&args.model)?)?;
    let set = EmbeddingSet::read_path(&args.embeddings)?;
    let scores = classifier_head::score(&head, &set)?;
    let table = ScoreTable::new(&set.clip_ids, &scores, None)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_file(&args.out, &buf)?;
    ctx.record(
        "score-head",
        None,
        Metadata::new(),
        &[&args.model, &args.embeddings],
        &[(ArtifactKind::Scores, &args.out)],
    )?;
    println!("scored clips={} out={}", set.len(), args.out.display());
    Ok(())
}

// ------------------------------------------------------------ LOF

#[derive(Debug, Args)]
pub struct LofFitArgs {
    /// Embeddings; rows labeled anomalous are left out of the fit.
    #[arg(long, value_name = "FILE")]
    embeddings: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long)]
    neighbors: Option<usize>,
    /// Minkowski order.
    #[arg(long)]
    p: Option<f64>,
}

pub fn lof_fit(ctx: &Context, args: LofFitArgs) -> Result<()> {
    let set = EmbeddingSet::read_path(&args.embeddings)?.filter(|_, _, label| label != Label::Anomalous);
    let k = args.neighbors.unwrap_or(ctx.cfg.lof.n_neighbors);
    let p = args.p.unwrap_or(ctx.cfg.lof.p);
    let model = fit_lof(&set.vectors, k, p)?;
    write_file(&args.out, &model.to_bytes())?;
    ctx.record(
        "lof-fit",
        None,
        args_meta(&[("n_neighbors", k.to_string()), ("p", p.to_string())]),
        &[&args.embeddings],
        &[(ArtifactKind::Model, &args.out)],
    )?;
    println!("fitted lof points={} dim={} k={k} p={p} out={}", set.len(), set.dim(), args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct LofScoreArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, value_name = "FILE")]
    embeddings: PathBuf,
    /// Output `clip_id,score,vote` file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Comma-separated contamination levels for the vote.
    #[arg(long, value_delimiter = ',')]
    contamination: Option<Vec<f64>>,
}

pub fn lof_score(ctx: &Context, args: LofScoreArgs) -> Result<()> {
    let model = LofModel::from_bytes(&fs::read(&args.model)?)?;
    let set = EmbeddingSet::read_path(&args.embeddings)?;
    let votes = VoteConfig::new(args.contamination.clone().unwrap_or_else(|| ctx.cfg.lof.contamination.clone()))?;
    let scores = score_lof(&model, &set.vectors)?;
    let flags = predict_vote(&model.training_scores(), &scores, &votes)?;
    let table = ScoreTable::new(&set.clip_ids, &scores, Some(&flags))?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_file(&args.out, &buf)?;
    let levels: Vec<String> = votes.levels.iter().map(f64::to_string).collect();
    ctx.record(
        "lof-score",
        None,
        args_meta(&[("contamination", levels.join(","))]),
        &[&args.model, &args.embeddings],
        &[(ArtifactKind::Scores, &args.out)],
    )?;
    println!(
        "scored clips={} flagged={} out={}",
        set.len(),
        flags.iter().filter(|&&f| f).count(),
        args.out.display()
    );
    Ok(())
}

// ------------------------------------------------------------ evaluation

#[derive(Debug, Args)]
pub struct EvalAucArgs {
    /// `clip_id,score[,vote]` file.
    #[arg(long, value_name = "FILE")]
    scores: PathBuf,
    /// Take labels from a manifest.
    #[arg(long, value_name = "FILE", required_unless_present = "labels")]
    manifest: Option<PathBuf>,
    /// Take labels from an embedding file.
    #[arg(long, value_name = "FILE", conflicts_with = "manifest")]
    labels: Option<PathBuf>,
    /// Write the ROC as `fpr,tpr` rows plus an `auc` line.
    #[arg(long, value_name = "FILE")]
    roc: Option<PathBuf>,
    /// Write the ROC curve as SVG.
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
}

pub fn eval_auc(ctx: &Context, args: EvalAucArgs) -> Result<()> {
    let table = ScoreTable::read_csv(fs::File::open(&args.scores)?)?;
    let (scores, flags) = match (&args.manifest, &args.labels) {
        (Some(m), _) => {
            let manifest = read_manifest(m)?;
            table.join_labels(&manifest.labels())?
        }
        (None, Some(l)) => {
            let set = EmbeddingSet::read_path(l)?;
            let labels = set.clip_ids.iter().map(String::as_str).zip(set.labels.iter().copied()).collect();
            table.join_labels(&labels)?
        }
        (None, None) => return Err(usage("eval-auc needs --manifest or --labels")),
    };
    let roc = roc_auc(&scores, &flags)?;
    let mut outputs: Vec<(ArtifactKind, &Path)> = Vec::new();
    if let Some(path) = &args.roc {
        let mut buf = Vec::new();
        roc.write_csv(&mut buf)?;
        write_file(path, &buf)?;
        outputs.push((ArtifactKind::Roc, path));
    }
    if let Some(path) = &args.svg {
        write_file(path, roc.to_svg("ROC").as_bytes())?;
        outputs.push((ArtifactKind::Plot, path));
    }
    let label_source = args.manifest.as_ref().or(args.labels.as_ref()).expect("checked above");
    ctx.record(
        "eval-auc",
        None,
        args_meta(&[("auc", format!("{}", roc.auc))]),
        &[&args.scores, label_source],
        &outputs,
    )?;
    println!("auc={:.4}", roc.auc);
    Ok(())
}

// ------------------------------------------------------------ analysis

#[derive(Debug, Args)]
pub struct TsneArgs {
    #[arg(long, value_name = "FILE")]
    embeddings: PathBuf,
    /// Output `clip_id,group,x,y` file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Scatter plot output.
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
    /// Color points by machine type from this manifest instead of by label.
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn tsne(ctx: &Context, args: TsneArgs) -> Result<()> {
    let set = EmbeddingSet::read_path(&args.embeddings)?;
    let s = &ctx.cfg.tsne;
    let cfg = TsneConfig {
        perplexity: args.perplexity.unwrap_or(s.perplexity),
        iterations: args.iterations.unwrap_or(s.iterations),
        learning_rate: s.learning_rate,
        seed: args.seed.unwrap_or(s.seed),
        ..TsneConfig::default()
    };
    let groups: Vec<String> = match &args.manifest {
        Some(m) => {
            let manifest = read_manifest(m)?;
            set.clip_ids
                .iter()
                .map(|id| manifest.get(id).map(|r| r.machine_type.to_string()).unwrap_or_else(|| "unknown".into()))
                .collect()
        }
        None => set.labels.iter().map(Label::to_string).collect(),
    };
    let result = analysis::tsne(&set.vectors, &cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["clip_id", "group", "x", "y"])?;
    for ((id, g), row) in set.clip_ids.iter().zip(&groups).zip(result.embedding.rows()) {
        w.write_record([id.clone(), g.clone(), row[0].to_string(), row[1].to_string()])?;
    }
    write_file(&args.out, &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;
    let mut outputs: Vec<(ArtifactKind, &Path)> = vec![(ArtifactKind::Table, &args.out)];
    if let Some(path) = &args.svg {
        write_file(path, analysis::embedding_svg(&result.embedding, &groups, "t-SNE of clip embeddings").as_bytes())?;
        outputs.push((ArtifactKind::Plot, path));
    }
    ctx.record(
        "tsne",
        Some(cfg.seed),
        args_meta(&[
            ("perplexity", cfg.perplexity.to_string()),
            ("iterations", cfg.iterations.to_string()),
        ]),
        &[&args.embeddings],
        &outputs,
    )?;
    let converged = result.bandwidths.iter().filter(|b| b.converged()).count();
    println!(
        "tsne points={} final_kl={:.6} bandwidths_converged={converged}/{} out={}",
        set.len(),
        result.final_kl(),
        result.bandwidths.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct AttnDistanceArgs {
    /// Attention tensor file; its sidecar is `<FILE>.meta`.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Output `layer,head,mean_distance_px` file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
}

pub fn attn_distance(ctx: &Context, args: AttnDistanceArgs) -> Result<()> {
    let stack = AttentionStack::read_path(&args.input)?;
    let rows = stack.distances()?;
    let mut buf = Vec::new();
    analysis::write_distances_csv(&rows, &mut buf)?;
    write_file(&args.out, &buf)?;
    let mut outputs: Vec<(ArtifactKind, &Path)> = vec![(ArtifactKind::Table, &args.out)];
    if let Some(path) = &args.svg {
        write_file(path, analysis::distances_svg(&rows).as_bytes())?;
        outputs.push((ArtifactKind::Plot, path));
    }
    ctx.record("attn-distance", None, Metadata::new(), &[&args.input], &outputs)?;
    let mean = rows.iter().map(|r| r.mean_distance_px).sum::<f64>() / rows.len() as f64;
    println!(
        "attention layers={} heads={} mean_distance_px={mean:.4} out={}",
        stack.layers.len(),
        stack.head_labels.len(),
        args.out.display()
    );
    Ok(())
}

// ------------------------------------------------------------ runs

pub fn runs_list(ctx: &Context) -> Result<()> {
    for run in ctx.store.list_runs()? {
        println!(
            "{}\t{}\tseed={}\tinputs={}\toutputs={}",
            run.run_id,
            run.stage,
            run.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
            run.inputs.len(),
            run.outputs.len()
        );
    }
    Ok(())
}
