//! End-to-end orchestration: manifold, autoencoder, prototypes, projection, evaluation.

use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};

use crate::autoencoder::{train, AutoencoderModel, TrainingConfig, TrainingReport, DEFAULT_ALPHA, DEFAULT_BETA};
use crate::data::{ClassId, Dataset, SeenDataset, UnseenDataset};
use crate::error::{Error, Result, Stage, StageExt};
use crate::manifold::EmbeddedManifold;
use crate::numerics::{l2_norm, DenseMatrix, Rng};
use crate::prototypes::{
    expand_seen_prototypes, synthesize_unseen_prototypes, NeighborCombination, PrototypeTable, SemanticView,
    DEFAULT_NEIGHBORS,
};
use crate::recognition::{evaluate, fit_projection, EvaluationReport, LinearProjection, Metric, DEFAULT_RIDGE_LAMBDA};

/// Benchmark presets: pre-defined dimension `n` and expanded dimension `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetPreset {
    Awa,
    Cub,
    Apy,
    Sun,
    ImageNet,
}

impl DatasetPreset {
    pub const ALL: [DatasetPreset; 5] = [
        DatasetPreset::Awa,
        DatasetPreset::Cub,
        DatasetPreset::Apy,
        DatasetPreset::Sun,
        DatasetPreset::ImageNet,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "awa" => Ok(DatasetPreset::Awa),
            "cub" => Ok(DatasetPreset::Cub),
            "apy" | "apay" | "a&y" => Ok(DatasetPreset::Apy),
            "sun" => Ok(DatasetPreset::Sun),
            "imagenet" => Ok(DatasetPreset::ImageNet),
            other => Err(Error::parameter(format!("unknown dataset preset '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetPreset::Awa => "awa",
            DatasetPreset::Cub => "cub",
            DatasetPreset::Apy => "apy",
            DatasetPreset::Sun => "sun",
            DatasetPreset::ImageNet => "imagenet",
        }
    }

    pub fn predefined_dim(self) -> usize {
        match self {
            DatasetPreset::Awa => 85,
            DatasetPreset::Cub => 312,
            DatasetPreset::Apy => 64,
            DatasetPreset::Sun => 102,
            DatasetPreset::ImageNet => 1000,
        }
    }

    pub fn expanded_dim(self) -> usize {
        match self {
            DatasetPreset::Awa => 65,
            DatasetPreset::Cub => 138,
            DatasetPreset::Apy => 26,
            DatasetPreset::Sun => 58,
            DatasetPreset::ImageNet => 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Expanded dimension.
    pub k: usize,
    /// Neighbor count cap; the effective value is `min(g, m)`.
    pub g: usize,
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub ridge_lambda: f64,
    pub metric: Metric,
    pub seed: u64,
    pub ablation: SemanticView,
    /// Largest `k` reported in Hit@k; clipped to the number of unseen classes.
    pub top_k: usize,
    /// Z-score features with seen-set statistics.
    pub standardize: bool,
    /// Scale each pre-defined prototype to unit L2 norm.
    pub normalize_predefined: bool,
    pub preset: Option<DatasetPreset>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 8,
            g: DEFAULT_NEIGHBORS,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            learning_rate: 1e-3,
            epochs: 500,
            batch_size: 64,
            ridge_lambda: DEFAULT_RIDGE_LAMBDA,
            metric: Metric::Cosine,
            seed: 0,
            ablation: SemanticView::Combined,
            top_k: 5,
            standardize: false,
            normalize_predefined: false,
            preset: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parameter(format!("bad value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::parameter(format!("bad boolean '{value}' for {key}"))),
    }
}

impl PipelineConfig {
    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            alpha: self.alpha,
            beta: self.beta,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::parameter("k must be >= 1"));
        }
        if self.g == 0 {
            return Err(Error::parameter("g must be >= 1"));
        }
        if self.top_k == 0 {
            return Err(Error::parameter("top_k must be >= 1"));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::parameter(format!("ridge_lambda must be >= 0, got {}", self.ridge_lambda)));
        }
        self.training().validate()
    }

    /// Applies one `key=value` setting. `dataset=<preset>` also sets `k`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "k" => self.k = parse_value(key, value)?,
            "g" => self.g = parse_value(key, value)?,
            "alpha" => self.alpha = parse_value(key, value)?,
            "beta" => self.beta = parse_value(key, value)?,
            "learning_rate" | "lr" => self.learning_rate = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "ridge_lambda" | "lambda" => self.ridge_lambda = parse_value(key, value)?,
            "metric" => self.metric = Metric::parse(value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "ablation" => self.ablation = SemanticView::parse(value)?,
            "top_k" => self.top_k = parse_value(key, value)?,
            "standardize" => self.standardize = parse_bool(key, value)?,
            "normalize_predefined" => self.normalize_predefined = parse_bool(key, value)?,
            "dataset" => {
                let preset = DatasetPreset::parse(value)?;
                self.k = preset.expanded_dim();
                self.preset = Some(preset);
            }
            other => return Err(Error::parameter(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Flat `key=value` lines; `#` starts a comment.
    pub fn parse_kv(text: &str) -> Result<Self> {
        let mut config = PipelineConfig::default();
        config.apply_kv(text)?;
        Ok(config)
    }

    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parameter(format!("config line {}: expected key=value", no + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::parameter(format!("config line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_kv(&text).map_err(|e| Error::ingestion(path, e.to_string()))
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        if let Some(p) = self.preset {
            let _ = writeln!(out, "dataset={}", p.name());
        }
        let _ = writeln!(out, "k={}", self.k);
        let _ = writeln!(out, "g={}", self.g);
        let _ = writeln!(out, "alpha={}", self.alpha);
        let _ = writeln!(out, "beta={}", self.beta);
        let _ = writeln!(out, "learning_rate={}", self.learning_rate);
        let _ = writeln!(out, "epochs={}", self.epochs);
        let _ = writeln!(out, "batch_size={}", self.batch_size);
        let _ = writeln!(out, "ridge_lambda={}", self.ridge_lambda);
        let _ = writeln!(out, "metric={}", self.metric);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "ablation={}", self.ablation);
        let _ = writeln!(out, "top_k={}", self.top_k);
        let _ = writeln!(out, "standardize={}", self.standardize);
        let _ = writeln!(out, "normalize_predefined={}", self.normalize_predefined);
        out
    }
}

/// Feature and prototype transforms fitted on the seen set.
#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessor {
    mean: Option<Vec<f64>>,
    scale: Option<Vec<f64>>,
    normalize_predefined: bool,
}

impl Preprocessor {
    pub fn fit(seen: &SeenDataset, config: &PipelineConfig) -> Self {
        let (mean, scale) = if config.standardize {
            let x = seen.features();
            let mean = x.row_mean();
            let n = x.rows() as f64;
            let scale = (0..x.cols())
                .map(|c| {
                    let var = x.row_iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / n;
                    if var > 0.0 {
                        1.0 / var.sqrt()
                    } else {
                        1.0
                    }
                })
                .collect();
            (Some(mean), Some(scale))
        } else {
            (None, None)
        };
        Preprocessor {
            mean,
            scale,
            normalize_predefined: config.normalize_predefined,
        }
    }

    pub fn apply_features(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut features = x.clone();
        if let (Some(mean), Some(scale)) = (&self.mean, &self.scale) {
            if x.cols() != mean.len() {
                return Err(Error::dimension("feature width", mean.len(), x.cols()));
            }
            for r in 0..features.rows() {
                for (c, v) in features.row_mut(r).iter_mut().enumerate() {
                    *v = (*v - mean[c]) * scale[c];
                }
            }
        }
        Ok(features)
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        let features = self.apply_features(dataset.features())?;
        let mut prototypes = dataset.prototypes().clone();
        if self.normalize_predefined {
            for r in 0..prototypes.rows() {
                let norm = l2_norm(prototypes.row(r));
                if norm == 0.0 {
                    return Err(Error::DegenerateVector("pre-defined prototype has zero norm"));
                }
                prototypes.row_mut(r).iter_mut().for_each(|v| *v /= norm);
            }
        }
        dataset.with_matrices(features, prototypes)
    }
}

/// Everything the full method produces for one semantic view.
#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub view: SemanticView,
    pub report: EvaluationReport,
    /// `None` in view `P`, which never builds the autoencoder.
    pub model: Option<AutoencoderModel>,
    pub training: Option<TrainingReport>,
    pub seen_table: PrototypeTable,
    pub unseen_table: PrototypeTable,
    pub combinations: Vec<NeighborCombination>,
    pub projection: LinearProjection,
    /// Transform to apply to new features before projecting them.
    pub preprocessor: Preprocessor,
}

/// Trained expansion shared by the `E` and `P+E` views.
#[derive(Clone, Debug)]
pub struct Expansion {
    pub model: AutoencoderModel,
    pub training: TrainingReport,
    pub seen_table: PrototypeTable,
    pub unseen_table: PrototypeTable,
    pub combinations: Vec<NeighborCombination>,
    /// Per-example codes of the seen set.
    pub seen_codes: DenseMatrix,
}

/// Validates the pair of splits and applies preprocessing fitted on the seen split.
pub fn prepare(
    config: &PipelineConfig,
    seen: &SeenDataset,
    unseen: &UnseenDataset,
) -> Result<(Preprocessor, SeenDataset, UnseenDataset)> {
    config.validate()?;
    unseen.check_disjoint(seen).stage(Stage::Ingest)?;
    if seen.feature_dim() != unseen.feature_dim() {
        return Err(Error::dimension("unseen feature dim", seen.feature_dim(), unseen.feature_dim()).at(Stage::Ingest));
    }
    if seen.semantic_dim() != unseen.semantic_dim() {
        return Err(Error::dimension("unseen prototype dim", seen.semantic_dim(), unseen.semantic_dim()).at(Stage::Ingest));
    }
    if let Some(p) = config.preset {
        if p.predefined_dim() != seen.semantic_dim() {
            warn!(
                "preset {} expects {} pre-defined dims, data has {}",
                p.name(),
                p.predefined_dim(),
                seen.semantic_dim()
            );
        }
    }
    let pre = Preprocessor::fit(seen, config);
    let s = SeenDataset::new(pre.apply(seen).stage(Stage::Preprocess)?).stage(Stage::Preprocess)?;
    let u = UnseenDataset::new(pre.apply(unseen).stage(Stage::Preprocess)?).stage(Stage::Preprocess)?;
    Ok((pre, s, u))
}

/// Manifold embedding and autoencoder training on a preprocessed seen split.
pub fn train_expansion_model(config: &PipelineConfig, seen: &SeenDataset) -> Result<(AutoencoderModel, TrainingReport)> {
    let target_dim = seen.semantic_dim() + config.k;
    let manifold = EmbeddedManifold::from_dataset(seen, target_dim).stage(Stage::Manifold)?;
    info!(
        "manifold: {} classes in {} dims (rank {})",
        manifold.class_ids.len(),
        target_dim,
        manifold.effective_rank
    );
    let (model, training) = train(seen, &manifold, &config.training()).stage(Stage::Training)?;
    if let Some(last) = training.total.last() {
        info!("training: {} epochs, final loss {last}", training.epochs());
    }
    Ok((model, training))
}

/// Both prototype tables from an already trained model.
pub fn expand_with_model(
    config: &PipelineConfig,
    model: AutoencoderModel,
    training: TrainingReport,
    seen: &SeenDataset,
    unseen: &UnseenDataset,
) -> Result<Expansion> {
    if model.input_dim() != seen.feature_dim() {
        return Err(Error::dimension("model input", seen.feature_dim(), model.input_dim()).at(Stage::Checkpoint));
    }
    let seen_table = expand_seen_prototypes(&model, seen).stage(Stage::Prototypes)?;
    let g = config.g.min(seen.num_classes());
    let (unseen_table, combinations) =
        synthesize_unseen_prototypes(&seen_table, unseen.class_ids(), unseen.prototypes(), g).stage(Stage::Prototypes)?;
    let seen_codes = model.encode_batch(seen.features()).stage(Stage::Prototypes)?;
    Ok(Expansion {
        model,
        training,
        seen_table,
        unseen_table,
        combinations,
        seen_codes,
    })
}

/// Manifold, autoencoder training and both prototype tables, on preprocessed data.
pub fn build_expansion(config: &PipelineConfig, seen: &SeenDataset, unseen: &UnseenDataset) -> Result<Expansion> {
    let (model, training) = train_expansion_model(config, seen)?;
    expand_with_model(config, model, training, seen, unseen)
}

/// Per-example regression targets `[S^p_{y_i} | z_i]`, restricted to `view`.
fn projection_targets(seen: &SeenDataset, codes: Option<&DenseMatrix>, view: SemanticView) -> Result<DenseMatrix> {
    let predefined = seen.example_prototypes();
    match (view, codes) {
        (SemanticView::Predefined, _) => Ok(predefined),
        (SemanticView::Expanded, Some(z)) => Ok(z.clone()),
        (SemanticView::Combined, Some(z)) => predefined.hconcat(z),
        (_, None) => Err(Error::parameter("expanded view requested without a trained expansion")),
    }
}

fn finish(
    config: &PipelineConfig,
    preprocessor: &Preprocessor,
    view: SemanticView,
    seen: &SeenDataset,
    unseen: &UnseenDataset,
    expansion: Option<&Expansion>,
) -> Result<PipelineOutcome> {
    let (seen_table, unseen_table, combinations) = match expansion {
        Some(e) => (
            e.seen_table.restrict(view),
            e.unseen_table.restrict(view),
            e.combinations.clone(),
        ),
        None => (PrototypeTable::predefined_only(seen), PrototypeTable::predefined_only(unseen), Vec::new()),
    };
    let targets = projection_targets(seen, expansion.map(|e| &e.seen_codes), view).stage(Stage::Projection)?;
    let projection = fit_projection(seen.features(), &targets, config.ridge_lambda).stage(Stage::Projection)?;
    let top_k = config.top_k.min(unseen_table.len());
    let report = evaluate(unseen, &projection, &unseen_table, config.metric, top_k).stage(Stage::Evaluation)?;
    info!("view {view}: Hit@1 = {:.4}", report.hit_at(1));
    Ok(PipelineOutcome {
        view,
        report,
        model: expansion.map(|e| e.model.clone()),
        training: expansion.map(|e| e.training.clone()),
        seen_table,
        unseen_table,
        combinations,
        projection,
        preprocessor: preprocessor.clone(),
    })
}

/// Runs the configured view end to end.
pub fn run_pipeline(config: &PipelineConfig, seen: &SeenDataset, unseen: &UnseenDataset) -> Result<PipelineOutcome> {
    let (pre, seen, unseen) = prepare(config, seen, unseen)?;
    let expansion = if config.ablation.uses_expansion() {
        Some(build_expansion(config, &seen, &unseen)?)
    } else {
        None
    };
    finish(config, &pre, config.ablation, &seen, &unseen, expansion.as_ref())
}

/// Like [`run_pipeline`] but reuses `model` instead of training one. The
/// model is ignored in view `P` and required otherwise.
pub fn run_with_model(
    config: &PipelineConfig,
    model: Option<AutoencoderModel>,
    seen: &SeenDataset,
    unseen: &UnseenDataset,
) -> Result<PipelineOutcome> {
    let (pre, seen, unseen) = prepare(config, seen, unseen)?;
    let expansion = match (config.ablation.uses_expansion(), model) {
        (false, _) => None,
        (true, Some(m)) => Some(expand_with_model(config, m, TrainingReport::default(), &seen, &unseen)?),
        (true, None) => {
            return Err(Error::parameter(format!("view {} needs a trained model", config.ablation)).at(Stage::Checkpoint))
        }
    };
    finish(config, &pre, config.ablation, &seen, &unseen, expansion.as_ref())
}

/// All three views; the autoencoder is trained once and shared by `E` and `P+E`.
pub fn run_ablation(config: &PipelineConfig, seen: &SeenDataset, unseen: &UnseenDataset) -> Result<Vec<PipelineOutcome>> {
    let (pre, seen, unseen) = prepare(config, seen, unseen)?;
    let expansion = build_expansion(config, &seen, &unseen)?;
    SemanticView::ALL
        .iter()
        .map(|&view| {
            let e = view.uses_expansion().then_some(&expansion);
            finish(config, &pre, view, &seen, &unseen, e)
        })
        .collect()
}

/// `k,P,E,P+E` table of Hit@k per view.
pub fn ablation_csv(outcomes: &[PipelineOutcome]) -> String {
    let mut out = String::from("k");
    for o in outcomes {
        let _ = write!(out, ",{}", o.view);
    }
    out.push('\n');
    let depth = outcomes.iter().map(|o| o.report.hit_at_k.len()).min().unwrap_or(0);
    for k in 0..depth {
        let _ = write!(out, "{}", k + 1);
        for o in outcomes {
            let _ = write!(out, ",{}", o.report.hit_at_k[k]);
        }
        out.push('\n');
    }
    out
}

/// Fraction of seen classes held out for validation during grid search.
pub const VALIDATION_FRACTION: f64 = 0.2;

/// Splits seen classes into training and pseudo-unseen validation classes.
pub fn class_holdout(seen: &SeenDataset, seed: u64) -> Result<(SeenDataset, UnseenDataset)> {
    let m = seen.num_classes();
    let held = ((m as f64 * VALIDATION_FRACTION).round() as usize).max(2);
    if m < held + 2 {
        return Err(Error::parameter(format!("{m} seen classes are too few for a class holdout")));
    }
    let mut ids: Vec<ClassId> = seen.class_ids().to_vec();
    Rng::new(seed).fork(7).shuffle(&mut ids);
    let (val, train) = ids.split_at(held);
    let train = SeenDataset::new(seen.subset(train)?)?;
    let val = UnseenDataset::new(seen.subset(val)?)?;
    Ok((train, val))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    pub hit_at_1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearchResult {
    pub best_alpha: f64,
    pub best_beta: f64,
    pub points: Vec<GridPoint>,
}

impl GridSearchResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,beta,hit_at_1\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.alpha, p.beta, p.hit_at_1);
        }
        out
    }
}

pub fn cartesian(alphas: &[f64], betas: &[f64]) -> Vec<(f64, f64)> {
    alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect()
}

/// Picks the `(α, β)` pair with the best held-out Hit@1; ties go to the
/// smaller `α`, then the smaller `β`.
pub fn grid_search(base: &PipelineConfig, pairs: &[(f64, f64)], seen: &SeenDataset) -> Result<GridSearchResult> {
    if pairs.is_empty() {
        return Err(Error::parameter("grid search needs at least one (alpha, beta) pair"));
    }
    let (train_split, val_split) = class_holdout(seen, base.seed)?;
    let mut points = Vec::with_capacity(pairs.len());
    for &(alpha, beta) in pairs {
        let config = PipelineConfig {
            alpha,
            beta,
            ablation: SemanticView::Combined,
            ..base.clone()
        };
        let outcome = run_pipeline(&config, &train_split, &val_split)?;
        info!("grid alpha={alpha} beta={beta}: Hit@1 {:.4}", outcome.report.hit_at(1));
        points.push(GridPoint {
            alpha,
            beta,
            hit_at_1: outcome.report.hit_at(1),
        });
    }
    let best = points
        .iter()
        .min_by(|a, b| {
            b.hit_at_1
                .total_cmp(&a.hit_at_1)
                .then(a.alpha.total_cmp(&b.alpha))
                .then(a.beta.total_cmp(&b.beta))
        })
        .expect("non-empty grid");
    Ok(GridSearchResult {
        best_alpha: best.alpha,
        best_beta: best.beta,
        points,
    })
}
