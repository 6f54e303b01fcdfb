//! Visual-to-semantic projection and nearest-prototype recognition.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{ClassId, UnseenDataset};
use crate::error::{Error, Result};
use crate::io::write_bytes;
use crate::numerics::{cosine_similarity, l2_norm, ridge_solve, squared_distance, DenseMatrix};
use crate::prototypes::PrototypeTable;

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0;

/// Linear map `s = W x`, `W` is `(semantic dim) × d`. No bias term.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProjection {
    pub w: DenseMatrix,
    pub ridge_lambda: f64,
}

impl LinearProjection {
    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.w.matvec(x)
    }

    pub fn project_batch(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::dimension("projection input", self.input_dim(), x.cols()));
        }
        x.matmul(&self.w.transpose())
    }

    /// `Σ‖W x_i − s_i‖² + λ‖W‖²_F`
    pub fn objective(&self, features: &DenseMatrix, targets: &DenseMatrix) -> Result<f64> {
        let pred = self.project_batch(features)?;
        if pred.shape() != targets.shape() {
            return Err(Error::dimension("projection targets", format!("{:?}", pred.shape()), format!("{:?}", targets.shape())));
        }
        let fit: f64 = pred.as_slice().iter().zip(targets.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
        let f = self.w.frobenius();
        Ok(fit + self.ridge_lambda * f * f)
    }
}

/// Closed-form ridge regression from features (`l × d`) to targets (`l × s`).
pub fn fit_projection(features: &DenseMatrix, targets: &DenseMatrix, ridge_lambda: f64) -> Result<LinearProjection> {
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(Error::parameter(format!("ridge lambda must be >= 0, got {ridge_lambda}")));
    }
    if features.rows() == 0 {
        return Err(Error::parameter("no examples to fit the projection"));
    }
    let w = ridge_solve(features, targets, ridge_lambda)?.transpose();
    Ok(LinearProjection { w, ridge_lambda })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl Metric {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cosine" | "cos" => Ok(Metric::Cosine),
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            other => Err(Error::parameter(format!("unknown metric '{other}' (expected cosine or euclidean)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        }
    }

    /// Smaller is closer. Cosine distance is `1 − cos`; Euclidean uses the squared norm.
    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            Metric::Cosine => Ok(1.0 - cosine_similarity(a, b)?),
            Metric::Euclidean => {
                if a.len() != b.len() {
                    return Err(Error::dimension("distance operands", a.len(), b.len()));
                }
                Ok(squared_distance(a, b))
            }
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Table positions ordered from closest to farthest, ties by ascending class id.
pub fn rank(projected: &[f64], table: &PrototypeTable, metric: Metric) -> Result<Vec<usize>> {
    if table.is_empty() {
        return Err(Error::parameter("empty prototype table"));
    }
    if projected.len() != table.combined().cols() {
        return Err(Error::dimension("projected vector", table.combined().cols(), projected.len()));
    }
    if metric == Metric::Cosine && l2_norm(projected) == 0.0 {
        return Err(Error::DegenerateVector("projected example has zero norm"));
    }
    let mut scored = Vec::with_capacity(table.len());
    for (i, proto) in table.combined().row_iter().enumerate() {
        let d = metric.distance(projected, proto)?;
        scored.push((d, table.class_ids()[i], i));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().map(|(_, _, i)| i).collect())
}

pub fn recognize(x: &[f64], projection: &LinearProjection, table: &PrototypeTable, metric: Metric) -> Result<ClassId> {
    let s = projection.project(x)?;
    Ok(table.class_ids()[rank(&s, table, metric)?[0]])
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub class_ids: Vec<ClassId>,
    /// `hit_at_k[i]` is Hit@(i+1).
    pub hit_at_k: Vec<f64>,
    /// Rows are true classes, columns predicted classes, both in `class_ids` order.
    pub confusion: DenseMatrix,
    pub per_class_accuracy: Vec<f64>,
    pub metric: Metric,
}

impl EvaluationReport {
    pub fn hit_at(&self, k: usize) -> f64 {
        self.hit_at_k[k - 1]
    }

    pub fn num_examples(&self) -> usize {
        self.confusion.as_slice().iter().sum::<f64>() as usize
    }

    pub fn is_monotone(&self) -> bool {
        self.hit_at_k.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn hit_at_k_csv(&self) -> String {
        let mut out = String::from("k,accuracy\n");
        for (i, a) in self.hit_at_k.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, a);
        }
        out
    }

    /// First column and header row carry the class ids.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for c in &self.class_ids {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for (r, c) in self.class_ids.iter().enumerate() {
            let _ = write!(out, "{c}");
            for v in self.confusion.row(r) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn per_class_csv(&self) -> String {
        let mut out = String::from("class_id,examples,accuracy\n");
        for (r, c) in self.class_ids.iter().enumerate() {
            let count: f64 = self.confusion.row(r).iter().sum();
            let _ = writeln!(out, "{c},{count},{}", self.per_class_accuracy[r]);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("metric: {}\nexamples: {}\n", self.metric, self.num_examples());
        for (i, a) in self.hit_at_k.iter().enumerate() {
            let _ = writeln!(out, "Hit@{:<3} {:>7.2}%", i + 1, 100.0 * a);
        }
        out.push_str("per-class accuracy:\n");
        for (c, a) in self.class_ids.iter().zip(&self.per_class_accuracy) {
            let _ = writeln!(out, "  class {c:>5}  {:>7.2}%", 100.0 * a);
        }
        out
    }

    /// Writes `<prefix>hit_at_k.csv`, `<prefix>confusion.csv`, `<prefix>per_class.csv`.
    pub fn save(&self, dir: impl AsRef<Path>, prefix: &str) -> Result<()> {
        let dir = dir.as_ref();
        write_bytes(&dir.join(format!("{prefix}hit_at_k.csv")), self.hit_at_k_csv().as_bytes())?;
        write_bytes(&dir.join(format!("{prefix}confusion.csv")), self.confusion_csv().as_bytes())?;
        write_bytes(&dir.join(format!("{prefix}per_class.csv")), self.per_class_csv().as_bytes())
    }
}

/// Hit@1..=K and the top-1 confusion matrix over `test`.
pub fn evaluate(
    test: &UnseenDataset,
    projection: &LinearProjection,
    table: &PrototypeTable,
    metric: Metric,
    top_k: usize,
) -> Result<EvaluationReport> {
    if top_k == 0 || top_k > table.len() {
        return Err(Error::parameter(format!("K = {top_k} must be in 1..={}", table.len())));
    }
    if test.is_empty() {
        return Err(Error::parameter("empty test set"));
    }
    let v = table.len();
    let projected = projection.project_batch(test.features())?;
    let mut hits = vec![0usize; top_k];
    let mut confusion = DenseMatrix::zeros(v, v);
    for (s, &label) in projected.row_iter().zip(test.labels()) {
        let truth = table.position(label).ok_or(Error::UnknownLabel(label))?;
        let order = rank(s, table, metric)?;
        confusion[(truth, order[0])] += 1.0;
        if let Some(p) = order.iter().take(top_k).position(|&i| i == truth) {
            hits[p] += 1;
        }
    }
    let n = test.len() as f64;
    let mut acc = 0usize;
    let hit_at_k = hits
        .iter()
        .map(|h| {
            acc += h;
            acc as f64 / n
        })
        .collect();
    let per_class_accuracy = (0..v)
        .map(|c| {
            let total: f64 = confusion.row(c).iter().sum();
            if total > 0.0 {
                confusion[(c, c)] / total
            } else {
                0.0
            }
        })
        .collect();
    Ok(EvaluationReport {
        class_ids: table.class_ids().to_vec(),
        hit_at_k,
        confusion,
        per_class_accuracy,
        metric,
    })
}
