//! Labeled feature sets for the seen and unseen label spaces.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Class label. Ordering of ids is the canonical class order everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for ClassId {
    fn from(v: u32) -> Self {
        ClassId(v)
    }
}

/// Examples with labels plus one pre-defined semantic prototype per class.
///
/// Class ids are kept sorted ascending and `prototypes` row `i` belongs to
/// `class_ids[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: DenseMatrix,
    labels: Vec<ClassId>,
    label_index: Vec<usize>,
    class_ids: Vec<ClassId>,
    prototypes: DenseMatrix,
}

impl Dataset {
    /// Validates and canonicalizes: prototype rows are reordered by ascending
    /// class id.
    pub fn new(
        features: DenseMatrix,
        labels: Vec<ClassId>,
        class_ids: Vec<ClassId>,
        prototypes: DenseMatrix,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::dimension("dataset labels", features.rows(), labels.len()));
        }
        if class_ids.len() != prototypes.rows() {
            return Err(Error::dimension("dataset prototypes", class_ids.len(), prototypes.rows()));
        }
        let mut order: Vec<usize> = (0..class_ids.len()).collect();
        order.sort_by_key(|&i| class_ids[i]);
        let sorted_ids: Vec<ClassId> = order.iter().map(|&i| class_ids[i]).collect();
        if let Some(w) = sorted_ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::parameter(format!("duplicate prototype for class {}", w[0])));
        }
        let prototypes = prototypes.select_rows(&order);
        let lookup: BTreeMap<ClassId, usize> = sorted_ids.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let label_index = labels
            .iter()
            .map(|l| lookup.get(l).copied().ok_or(Error::UnknownLabel(*l)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            features,
            labels,
            label_index,
            class_ids: sorted_ids,
            prototypes,
        })
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    /// Position of each example's class in [`class_ids`](Self::class_ids).
    pub fn label_index(&self) -> &[usize] {
        &self.label_index
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    pub fn prototypes(&self) -> &DenseMatrix {
        &self.prototypes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    /// Visual feature dimension `d`.
    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Pre-defined semantic dimension `n`.
    pub fn semantic_dim(&self) -> usize {
        self.prototypes.cols()
    }

    pub fn class_position(&self, id: ClassId) -> Option<usize> {
        self.class_ids.binary_search(&id).ok()
    }

    /// Example indices grouped by class position.
    pub fn examples_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.class_ids.len()];
        for (i, &c) in self.label_index.iter().enumerate() {
            groups[c].push(i);
        }
        groups
    }

    /// Per-example pre-defined semantic vector `S^p_i`, as a matrix aligned with the examples.
    pub fn example_prototypes(&self) -> DenseMatrix {
        self.prototypes.select_rows(&self.label_index)
    }

    /// Same examples and classes with new feature and prototype matrices.
    pub fn with_matrices(&self, features: DenseMatrix, prototypes: DenseMatrix) -> Result<Self> {
        Dataset::new(features, self.labels.clone(), self.class_ids.clone(), prototypes)
    }

    /// Restricts to the given classes (ids not present are ignored), keeping their examples.
    pub fn subset(&self, classes: &[ClassId]) -> Result<Self> {
        let keep: HashSet<ClassId> = classes.iter().copied().collect();
        let examples: Vec<usize> = (0..self.len()).filter(|&i| keep.contains(&self.labels[i])).collect();
        let rows: Vec<usize> = (0..self.class_ids.len())
            .filter(|&i| keep.contains(&self.class_ids[i]))
            .collect();
        Dataset::new(
            self.features.select_rows(&examples),
            examples.iter().map(|&i| self.labels[i]).collect(),
            rows.iter().map(|&i| self.class_ids[i]).collect(),
            self.prototypes.select_rows(&rows),
        )
    }
}

/// Training data: examples from the `m` seen classes.
#[derive(Clone, Debug, PartialEq)]
pub struct SeenDataset(Dataset);

impl SeenDataset {
    /// Requires `l ≥ m ≥ 2`.
    pub fn new(dataset: Dataset) -> Result<Self> {
        if dataset.num_classes() < 2 {
            return Err(Error::parameter("a seen dataset needs at least 2 classes"));
        }
        if dataset.len() < dataset.num_classes() {
            return Err(Error::parameter(format!(
                "seen dataset has {} examples for {} classes",
                dataset.len(),
                dataset.num_classes()
            )));
        }
        Ok(SeenDataset(dataset))
    }

    pub fn into_inner(self) -> Dataset {
        self.0
    }
}

impl Deref for SeenDataset {
    type Target = Dataset;

    fn deref(&self) -> &Dataset {
        &self.0
    }
}

/// Test data: examples from the `v` unseen classes, disjoint from the seen ones.
#[derive(Clone, Debug, PartialEq)]
pub struct UnseenDataset(Dataset);

impl UnseenDataset {
    /// Requires `v ≥ 2`.
    pub fn new(dataset: Dataset) -> Result<Self> {
        if dataset.num_classes() < 2 {
            return Err(Error::parameter("an unseen dataset needs at least 2 classes"));
        }
        Ok(UnseenDataset(dataset))
    }

    pub fn into_inner(self) -> Dataset {
        self.0
    }

    /// Fails when any class id also appears in `seen`.
    pub fn check_disjoint(&self, seen: &SeenDataset) -> Result<()> {
        match self.class_ids().iter().find(|c| seen.class_position(**c).is_some()) {
            Some(c) => Err(Error::parameter(format!("class {c} is both seen and unseen"))),
            None => Ok(()),
        }
    }
}

impl Deref for UnseenDataset {
    type Target = Dataset;

    fn deref(&self) -> &Dataset {
        &self.0
    }
}
