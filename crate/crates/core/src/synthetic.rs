//! Synthetic zero-shot splits.
//!
//! Each class has a center in a small latent space. Visual features are a
//! random linear lift of the center plus Gaussian noise; pre-defined
//! prototypes are a second random linear view of the same center, perturbed
//! once per class.

use crate::data::{ClassId, Dataset, SeenDataset, UnseenDataset};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Rng};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub m_seen: usize,
    pub v_unseen: usize,
    /// Visual feature dimension.
    pub d: usize,
    /// Pre-defined semantic dimension.
    pub n: usize,
    pub examples_per_class: usize,
    /// Per-example visual noise; prototype noise is `prototype_noise_ratio × noise_sigma`.
    pub noise_sigma: f64,
    pub latent_dim: usize,
    pub prototype_noise_ratio: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            m_seen: 15,
            v_unseen: 5,
            d: 64,
            n: 16,
            examples_per_class: 50,
            noise_sigma: 0.5,
            latent_dim: 12,
            prototype_noise_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("m_seen", self.m_seen),
            ("v_unseen", self.v_unseen),
            ("d", self.d),
            ("n", self.n),
            ("examples_per_class", self.examples_per_class),
            ("latent_dim", self.latent_dim),
        ];
        if let Some((name, v)) = counts.iter().find(|(_, v)| *v < 2) {
            return Err(Error::parameter(format!("synthetic {name} must be >= 2, got {v}")));
        }
        for (name, v) in [("noise_sigma", self.noise_sigma), ("prototype_noise_ratio", self.prototype_noise_ratio)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::parameter(format!("synthetic {name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Ground-truth generator matrices, kept for oracle checks.
#[derive(Clone, Debug)]
pub struct SyntheticTruth {
    /// `d × latent_dim`
    pub visual_map: DenseMatrix,
    /// `n × latent_dim`
    pub semantic_map: DenseMatrix,
    /// `(m + v) × latent_dim`, seen classes first.
    pub centers: DenseMatrix,
}

/// Seen classes get ids `0..m`, unseen `m..m+v`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(SeenDataset, UnseenDataset)> {
    generate_with_truth(spec).map(|(s, u, _)| (s, u))
}

pub fn generate_with_truth(spec: &SyntheticSpec) -> Result<(SeenDataset, UnseenDataset, SyntheticTruth)> {
    spec.validate()?;
    let root = Rng::new(spec.seed);
    let q = spec.latent_dim;
    let classes = spec.m_seen + spec.v_unseen;

    let mut rng = root.fork(0);
    let centers = DenseMatrix::from_fn(classes, q, |_, _| rng.standard_normal());
    let mut rng = root.fork(1);
    let visual_scale = 1.0 / (q as f64).sqrt();
    let visual_map = DenseMatrix::from_fn(spec.d, q, |_, _| visual_scale * rng.standard_normal());
    let mut rng = root.fork(2);
    let semantic_map = DenseMatrix::from_fn(spec.n, q, |_, _| visual_scale * rng.standard_normal());

    let visual_centers = centers.matmul(&visual_map.transpose())?;
    let mut prototypes = centers.matmul(&semantic_map.transpose())?;
    let mut rng = root.fork(3);
    let proto_sigma = spec.noise_sigma * spec.prototype_noise_ratio;
    prototypes.as_mut_slice().iter_mut().for_each(|v| *v += proto_sigma * rng.standard_normal());

    let mut rng = root.fork(4);
    let mut build = |class_range: std::ops::Range<usize>| -> Result<Dataset> {
        let per = spec.examples_per_class;
        let count = class_range.len() * per;
        let mut features = DenseMatrix::zeros(count, spec.d);
        let mut labels = Vec::with_capacity(count);
        for (i, c) in class_range.clone().enumerate() {
            for e in 0..per {
                let row = features.row_mut(i * per + e);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = visual_centers[(c, j)] + spec.noise_sigma * rng.standard_normal();
                }
                labels.push(ClassId(c as u32));
            }
        }
        let idx: Vec<usize> = class_range.clone().collect();
        Dataset::new(
            features,
            labels,
            class_range.map(|c| ClassId(c as u32)).collect(),
            prototypes.select_rows(&idx),
        )
    };
    let seen = SeenDataset::new(build(0..spec.m_seen)?)?;
    let unseen = UnseenDataset::new(build(spec.m_seen..classes)?)?;
    Ok((
        seen,
        unseen,
        SyntheticTruth {
            visual_map,
            semantic_map,
            centers,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::least_squares;
    use crate::prototypes::PrototypeTable;
    use crate::recognition::{evaluate, LinearProjection, Metric};

    #[test]
    fn noiseless_classes_are_constant() {
        let spec = SyntheticSpec { noise_sigma: 0.0, m_seen: 3, v_unseen: 2, examples_per_class: 4, ..Default::default() };
        let (seen, unseen) = generate_synthetic(&spec).unwrap();
        for ds in [&*seen, &*unseen] {
            for members in ds.examples_by_class() {
                for &i in &members[1..] {
                    assert_eq!(ds.features().row(i), ds.features().row(members[0]));
                }
            }
        }
    }

    #[test]
    fn deterministic_and_disjoint() {
        let spec = SyntheticSpec { seed: 42, ..Default::default() };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        a.1.check_disjoint(&a.0).unwrap();
        assert_eq!(a.0.len(), 15 * 50);
        assert_eq!(a.1.num_classes(), 5);
        assert_eq!(a.0.semantic_dim(), 16);
        let c = generate_synthetic(&SyntheticSpec { seed: 43, ..Default::default() }).unwrap();
        assert_ne!(a.0.features(), c.0.features());
    }

    #[test]
    fn noiseless_oracle_projection_is_perfect() {
        let spec = SyntheticSpec { noise_sigma: 0.0, seed: 5, ..Default::default() };
        let (_, unseen, truth) = generate_with_truth(&spec).unwrap();
        // Oracle W = B A⁺, built column by column from least squares on A.
        let q = spec.latent_dim;
        let mut pinv = DenseMatrix::zeros(q, spec.d);
        for j in 0..spec.d {
            let e: Vec<f64> = (0..spec.d).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            let col = least_squares(&truth.visual_map, &e).unwrap();
            for r in 0..q {
                pinv[(r, j)] = col[r];
            }
        }
        let w = truth.semantic_map.matmul(&pinv).unwrap();
        let projection = LinearProjection { w, ridge_lambda: 0.0 };
        let table = PrototypeTable::predefined_only(&unseen);
        let report = evaluate(&unseen, &projection, &table, Metric::Euclidean, 1).unwrap();
        assert_eq!(report.hit_at(1), 1.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_synthetic(&SyntheticSpec { m_seen: 1, ..Default::default() }).is_err());
        assert!(generate_synthetic(&SyntheticSpec { noise_sigma: -1.0, ..Default::default() }).is_err());
    }
}
