//! Combined `(n+k)`-dimensional class prototypes.
//!
//! Seen classes take the mean code of their examples as the expanded part.
//! Unseen classes reconstruct their pre-defined prototype from the `g`
//! nearest seen pre-defined prototypes by least squares and reuse the same
//! coefficients on those neighbors' expanded parts.

use std::collections::HashSet;
use std::path::Path;

use crate::autoencoder::AutoencoderModel;
use crate::data::{ClassId, Dataset, SeenDataset};
use crate::error::{Error, Result};
use crate::io::{matrix_to_csv, read_matrix, write_bytes};
use crate::numerics::{axpy, least_squares, residual_norm, squared_distance, DenseMatrix};

/// Default neighborhood size cap for unseen-prototype synthesis.
pub const DEFAULT_NEIGHBORS: usize = 5;

/// Which part of the prototypes takes part in recognition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SemanticView {
    /// Pre-defined part only (`P`).
    Predefined,
    /// Expanded part only (`E`).
    Expanded,
    /// Both, concatenated (`P+E`).
    Combined,
}

impl SemanticView {
    pub const ALL: [SemanticView; 3] = [SemanticView::Predefined, SemanticView::Expanded, SemanticView::Combined];

    pub fn label(self) -> &'static str {
        match self {
            SemanticView::Predefined => "P",
            SemanticView::Expanded => "E",
            SemanticView::Combined => "P+E",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P" => Ok(SemanticView::Predefined),
            "E" => Ok(SemanticView::Expanded),
            "P+E" | "PE" | "BOTH" => Ok(SemanticView::Combined),
            other => Err(Error::parameter(format!("unknown ablation mode '{other}' (expected P, E or P+E)"))),
        }
    }

    pub fn uses_expansion(self) -> bool {
        self != SemanticView::Predefined
    }
}

impl std::fmt::Display for SemanticView {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Prototypes for one label space; `combined` row = `[predefined row | expanded row]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeTable {
    class_ids: Vec<ClassId>,
    predefined: DenseMatrix,
    expanded: DenseMatrix,
    combined: DenseMatrix,
}

impl PrototypeTable {
    pub fn new(class_ids: Vec<ClassId>, predefined: DenseMatrix, expanded: DenseMatrix) -> Result<Self> {
        if predefined.rows() != class_ids.len() || expanded.rows() != class_ids.len() {
            return Err(Error::dimension(
                "prototype table rows",
                class_ids.len(),
                format!("{} predefined / {} expanded", predefined.rows(), expanded.rows()),
            ));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = class_ids.iter().find(|c| !seen.insert(**c)) {
            return Err(Error::parameter(format!("duplicate class {dup} in prototype table")));
        }
        let combined = predefined.hconcat(&expanded)?;
        Ok(PrototypeTable {
            class_ids,
            predefined,
            expanded,
            combined,
        })
    }

    /// Table with an empty expanded part (`k = 0`).
    pub fn predefined_only(dataset: &Dataset) -> Self {
        Self::new(
            dataset.class_ids().to_vec(),
            dataset.prototypes().clone(),
            DenseMatrix::zeros(dataset.num_classes(), 0),
        )
        .expect("dataset class ids are unique")
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    pub fn predefined(&self) -> &DenseMatrix {
        &self.predefined
    }

    pub fn expanded(&self) -> &DenseMatrix {
        &self.expanded
    }

    pub fn combined(&self) -> &DenseMatrix {
        &self.combined
    }

    pub fn len(&self) -> usize {
        self.class_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_ids.is_empty()
    }

    pub fn predefined_dim(&self) -> usize {
        self.predefined.cols()
    }

    pub fn expanded_dim(&self) -> usize {
        self.expanded.cols()
    }

    pub fn position(&self, id: ClassId) -> Option<usize> {
        self.class_ids.iter().position(|&c| c == id)
    }

    /// Table holding only the parts selected by `view`; the dropped part becomes zero-width.
    pub fn restrict(&self, view: SemanticView) -> Self {
        let m = self.len();
        let (p, e) = match view {
            SemanticView::Predefined => (self.predefined.clone(), DenseMatrix::zeros(m, 0)),
            SemanticView::Expanded => (DenseMatrix::zeros(m, 0), self.expanded.clone()),
            SemanticView::Combined => (self.predefined.clone(), self.expanded.clone()),
        };
        Self::new(self.class_ids.clone(), p, e).expect("restriction keeps a valid table")
    }

    /// Header `class_id,p_0..p_{n-1},e_0..e_{k-1}`.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["class_id".to_string()];
        header.extend((0..self.predefined_dim()).map(|i| format!("p_{i}")));
        header.extend((0..self.expanded_dim()).map(|i| format!("e_{i}")));
        let ids = DenseMatrix::from_fn(self.len(), 1, |r, _| self.class_ids[r].0 as f64);
        let body = ids.hconcat(&self.combined).expect("row counts agree");
        matrix_to_csv(&body, &header)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_bytes(path.as_ref(), self.to_csv().as_bytes())
    }

    /// Reads a table written by [`save_csv`](Self::save_csv); the split between
    /// pre-defined and expanded columns comes from the `p_`/`e_` header names.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let header: Vec<&str> = text.lines().next().unwrap_or("").split(',').map(str::trim).collect();
        if header.first() != Some(&"class_id") {
            return Err(Error::ingestion(path, "prototype table header must start with class_id"));
        }
        let n = header.iter().filter(|h| h.starts_with("p_")).count();
        let k = header.iter().filter(|h| h.starts_with("e_")).count();
        if n + k + 1 != header.len() {
            return Err(Error::ingestion(path, "prototype table columns must be p_* then e_*"));
        }
        let m = read_matrix(path)?;
        let mut ids = Vec::with_capacity(m.rows());
        for r in 0..m.rows() {
            let v = m[(r, 0)];
            if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
                return Err(Error::ingestion(path, format!("row {r}: bad class id {v}")));
            }
            ids.push(ClassId(v as u32));
        }
        Self::new(ids, m.column_range(1, 1 + n), m.column_range(1 + n, 1 + n + k))
            .map_err(|e| Error::ingestion(path, e.to_string()))
    }
}

/// Coefficients reconstructing an unseen pre-defined prototype from its seen neighbors.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborCombination {
    pub neighbor_ids: Vec<ClassId>,
    pub theta: Vec<f64>,
    /// `‖P^p' − Σ θ_i P^p_i‖₂`
    pub residual: f64,
}

/// Seen table with `P^e` = mean code of each class's examples.
pub fn expand_seen_prototypes(model: &AutoencoderModel, dataset: &SeenDataset) -> Result<PrototypeTable> {
    let codes = model.encode_batch(dataset.features())?;
    let k = model.latent_dim();
    let mut expanded = DenseMatrix::zeros(dataset.num_classes(), k);
    for (c, members) in dataset.examples_by_class().iter().enumerate() {
        if members.is_empty() {
            return Err(Error::MissingClass(dataset.class_ids()[c]));
        }
        let row = expanded.row_mut(c);
        for &i in members {
            axpy(1.0, codes.row(i), row);
        }
        let inv = 1.0 / members.len() as f64;
        row.iter_mut().for_each(|v| *v *= inv);
    }
    PrototypeTable::new(dataset.class_ids().to_vec(), dataset.prototypes().clone(), expanded)
}

/// Positions (in `seen`) of the `g` pre-defined prototypes closest to `query`,
/// nearest first; equal distances resolve to the smaller class id.
pub fn find_neighbors(query: &[f64], seen: &PrototypeTable, g: usize) -> Result<Vec<usize>> {
    if g == 0 || g > seen.len() {
        return Err(Error::parameter(format!(
            "neighbor count g = {g} must be in 1..={}",
            seen.len()
        )));
    }
    if query.len() != seen.predefined_dim() {
        return Err(Error::dimension("neighbor query", seen.predefined_dim(), query.len()));
    }
    let mut ranked: Vec<(f64, ClassId, usize)> = seen
        .predefined()
        .row_iter()
        .enumerate()
        .map(|(i, row)| (squared_distance(query, row), seen.class_ids()[i], i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().take(g).map(|(_, _, i)| i).collect())
}

/// Least-squares `θ` with `query ≈ Σ θ_i neighbors_i` (neighbors as rows, `g × n`).
pub fn solve_combination(query: &[f64], neighbors: &DenseMatrix, neighbor_ids: Vec<ClassId>) -> Result<NeighborCombination> {
    if neighbors.cols() != query.len() {
        return Err(Error::dimension("neighbor prototypes", query.len(), neighbors.cols()));
    }
    if neighbor_ids.len() != neighbors.rows() {
        return Err(Error::dimension("neighbor ids", neighbors.rows(), neighbor_ids.len()));
    }
    // Design matrix n × g: column i is neighbor i.
    let design = neighbors.transpose();
    let theta = least_squares(&design, query)?;
    let residual = residual_norm(&design, &theta, query);
    Ok(NeighborCombination {
        neighbor_ids,
        theta,
        residual,
    })
}

/// Unseen table: `P^e'` = `Σ θ_i P^e_i` over the `g` nearest seen classes.
pub fn synthesize_unseen_prototypes(
    seen: &PrototypeTable,
    unseen_ids: &[ClassId],
    unseen_predefined: &DenseMatrix,
    g: usize,
) -> Result<(PrototypeTable, Vec<NeighborCombination>)> {
    if unseen_ids.len() != unseen_predefined.rows() {
        return Err(Error::dimension("unseen prototypes", unseen_ids.len(), unseen_predefined.rows()));
    }
    if let Some(c) = unseen_ids.iter().find(|c| seen.position(**c).is_some()) {
        return Err(Error::parameter(format!("class {c} is both seen and unseen")));
    }
    let k = seen.expanded_dim();
    let mut expanded = DenseMatrix::zeros(unseen_ids.len(), k);
    let mut combos = Vec::with_capacity(unseen_ids.len());
    for (u, query) in unseen_predefined.row_iter().enumerate() {
        let idx = find_neighbors(query, seen, g)?;
        let ids = idx.iter().map(|&i| seen.class_ids()[i]).collect();
        let combo = solve_combination(query, &seen.predefined().select_rows(&idx), ids)?;
        let row = expanded.row_mut(u);
        for (&i, &t) in idx.iter().zip(&combo.theta) {
            axpy(t, seen.expanded().row(i), row);
        }
        combos.push(combo);
    }
    let table = PrototypeTable::new(unseen_ids.to_vec(), unseen_predefined.clone(), expanded)?;
    Ok((table, combos))
}
