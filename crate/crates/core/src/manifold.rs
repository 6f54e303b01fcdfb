//! Embedded manifold of the seen-class centers.
//!
//! Class centers in the visual space are turned into a pairwise distance
//! matrix, double-centered into the Gram matrix `B = OᵀO` of a centered
//! configuration, and factored by eigendecomposition (classical MDS) to give
//! one `(n+k)`-dimensional column `o_j` per seen class.

use crate::data::{ClassId, SeenDataset};
use crate::error::{Error, Result};
use crate::numerics::{euclidean_distance, symmetric_evd, DenseMatrix};

/// Eigenvalues below this fraction of the largest one are treated as zero.
pub const EIGENVALUE_CLAMP: f64 = 1e-10;

/// Mean visual feature vector of each seen class (row `i` ↔ `class_ids[i]`).
#[derive(Clone, Debug, PartialEq)]
pub struct ClassCenters {
    pub centers: DenseMatrix,
    pub class_ids: Vec<ClassId>,
}

/// Euclidean distances between class centers.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    pub d: DenseMatrix,
}

/// Embedding `O` with one column per seen class.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedManifold {
    /// `target_dim × m`
    pub o: DenseMatrix,
    pub class_ids: Vec<ClassId>,
    /// Number of leading rows carrying non-clamped eigenpairs; later rows are zero.
    pub effective_rank: usize,
}

impl EmbeddedManifold {
    pub fn dim(&self) -> usize {
        self.o.rows()
    }

    /// Column `o_j` for the class at position `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.o.column(j)
    }

    /// Columns as rows: `m × target_dim`.
    pub fn columns(&self) -> DenseMatrix {
        self.o.transpose()
    }

    /// Builds the manifold straight from a seen dataset.
    pub fn from_dataset(dataset: &SeenDataset, target_dim: usize) -> Result<Self> {
        let centers = compute_class_centers(dataset)?;
        let dist = pairwise_distances(&centers)?;
        embed(&double_center(&dist), target_dim, centers.class_ids)
    }
}

/// Per-class arithmetic mean of the visual features, classes in ascending id order.
pub fn compute_class_centers(dataset: &SeenDataset) -> Result<ClassCenters> {
    let groups = dataset.examples_by_class();
    let features = dataset.features();
    let mut centers = DenseMatrix::zeros(groups.len(), features.cols());
    for (c, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::MissingClass(dataset.class_ids()[c]));
        }
        let row = centers.row_mut(c);
        for &i in members {
            for (acc, v) in row.iter_mut().zip(features.row(i)) {
                *acc += v;
            }
        }
        let inv = 1.0 / members.len() as f64;
        row.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(ClassCenters {
        centers,
        class_ids: dataset.class_ids().to_vec(),
    })
}

pub fn pairwise_distances(centers: &ClassCenters) -> Result<DistanceMatrix> {
    let m = centers.centers.rows();
    if m < 2 {
        return Err(Error::parameter(format!("need at least 2 class centers, got {m}")));
    }
    let mut d = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let v = euclidean_distance(centers.centers.row(i), centers.centers.row(j));
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(DistanceMatrix { d })
}

/// `b_ij = −½(d_ij² − d_i·² − d_·j² + d_··²)` with row, column and grand means of the squared distances.
pub fn double_center(dist: &DistanceMatrix) -> DenseMatrix {
    let m = dist.d.rows();
    if m == 0 {
        return DenseMatrix::zeros(0, 0);
    }
    let sq = DenseMatrix::from_fn(m, m, |i, j| dist.d[(i, j)] * dist.d[(i, j)]);
    let inv = 1.0 / m as f64;
    let row_mean: Vec<f64> = (0..m).map(|i| sq.row(i).iter().sum::<f64>() * inv).collect();
    let col_mean: Vec<f64> = (0..m).map(|j| (0..m).map(|i| sq[(i, j)]).sum::<f64>() * inv).collect();
    let grand = row_mean.iter().sum::<f64>() * inv;
    let mut b = DenseMatrix::from_fn(m, m, |i, j| -0.5 * (sq[(i, j)] - row_mean[i] - col_mean[j] + grand));
    // Distances are symmetric, so B is too; remove rounding asymmetry.
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    b
}

/// Classical MDS coordinates from a double-centered Gram matrix.
///
/// Row `i < r` of `O` is `√λᵢ vᵢᵀ` for the `r = min(target_dim, #kept)` leading
/// eigenpairs, where eigenvalues `≤ 1e-10·λ_max` (and all negative ones) are
/// dropped. Remaining rows up to `target_dim` are zero.
pub fn embed(gram: &DenseMatrix, target_dim: usize, class_ids: Vec<ClassId>) -> Result<EmbeddedManifold> {
    if target_dim == 0 {
        return Err(Error::dimension("manifold embedding", "target dimension >= 1", 0));
    }
    if class_ids.len() != gram.rows() {
        return Err(Error::dimension("manifold class ids", gram.rows(), class_ids.len()));
    }
    let m = gram.rows();
    let evd = symmetric_evd(gram)?;
    let lambda_max = evd.eigenvalues.first().copied().unwrap_or(0.0);
    let cutoff = EIGENVALUE_CLAMP * lambda_max;
    let kept = evd
        .eigenvalues
        .iter()
        .take_while(|&&l| lambda_max > 0.0 && l > cutoff && l > 0.0)
        .count();
    let rank = kept.min(target_dim);
    let mut o = DenseMatrix::zeros(target_dim, m);
    for r in 0..rank {
        let s = evd.eigenvalues[r].sqrt();
        for j in 0..m {
            o[(r, j)] = s * evd.eigenvectors[(j, r)];
        }
    }
    Ok(EmbeddedManifold {
        o,
        class_ids,
        effective_rank: rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::numerics::Rng;

    fn ids(n: usize) -> Vec<ClassId> {
        (0..n as u32).map(ClassId).collect()
    }

    fn seen(features: &[&[f64]], labels: &[u32], classes: usize) -> SeenDataset {
        SeenDataset::new(
            Dataset::new(
                DenseMatrix::from_rows(features).unwrap(),
                labels.iter().map(|&l| ClassId(l)).collect(),
                ids(classes),
                DenseMatrix::zeros(classes, 1),
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn distances_of(points: &DenseMatrix) -> DistanceMatrix {
        pairwise_distances(&ClassCenters {
            centers: points.clone(),
            class_ids: ids(points.rows()),
        })
        .unwrap()
    }

    #[test]
    fn two_point_mean() {
        let ds = seen(&[&[1.0, 1.0], &[3.0, 3.0], &[5.0, 0.0]], &[0, 0, 1], 2);
        let c = compute_class_centers(&ds).unwrap();
        assert_eq!(c.centers.row(0), &[2.0, 2.0]);
        assert_eq!(c.centers.row(1), &[5.0, 0.0]);
    }

    #[test]
    fn empty_class_is_reported() {
        let ds = seen(&[&[1.0], &[2.0], &[3.0]], &[0, 0, 2], 3);
        assert!(matches!(compute_class_centers(&ds), Err(Error::MissingClass(ClassId(1)))));
    }

    #[test]
    fn centers_match_naive_accumulation() {
        let mut rng = Rng::new(3);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.normal(0.0, 2.0)).collect()).collect();
        let labels: Vec<u32> = (0..30).map(|i| (i % 3) as u32).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let ds = seen(&refs, &labels, 3);
        let c = compute_class_centers(&ds).unwrap();
        for class in 0..3u32 {
            let mut sum = [0.0; 4];
            let mut count = 0.0;
            for (row, &l) in rows.iter().zip(&labels) {
                if l == class {
                    for k in 0..4 {
                        sum[k] += row[k];
                    }
                    count += 1.0;
                }
            }
            for k in 0..4 {
                assert!((c.centers[(class as usize, k)] - sum[k] / count).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn distance_cases() {
        let d = distances_of(&DenseMatrix::from_rows(&[[0.0], [3.0]]).unwrap());
        assert_eq!(d.d, DenseMatrix::from_rows(&[[0.0, 3.0], [3.0, 0.0]]).unwrap());
        let d = distances_of(&DenseMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap());
        assert_eq!(d.d[(0, 2)], d.d[(0, 1)] + d.d[(1, 2)]);

        let mut rng = Rng::new(4);
        let pts = DenseMatrix::from_fn(12, 5, |_, _| rng.normal(0.0, 1.0));
        let d = distances_of(&pts).d;
        for i in 0..12 {
            assert_eq!(d[(i, i)], 0.0);
            for j in 0..12 {
                assert_eq!(d[(i, j)], d[(j, i)]);
                for k in 0..12 {
                    assert!(d[(i, k)] <= d[(i, j)] + d[(j, k)] + 1e-12);
                }
            }
        }
        assert!(pairwise_distances(&ClassCenters { centers: DenseMatrix::zeros(1, 2), class_ids: ids(1) }).is_err());
    }

    #[test]
    fn double_center_hand_cases() {
        let zero = DistanceMatrix { d: DenseMatrix::zeros(3, 3) };
        assert_eq!(double_center(&zero), DenseMatrix::zeros(3, 3));
        // d² = [[0,4],[4,0]], row/col means 2, grand mean 2:
        // b00 = -½(0-2-2+2) = 1, b01 = -½(4-2-2+2) = -1.
        let two = DistanceMatrix { d: DenseMatrix::from_rows(&[[0.0, 2.0], [2.0, 0.0]]).unwrap() };
        assert_eq!(double_center(&two), DenseMatrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap());
    }

    #[test]
    fn double_center_identities() {
        let mut rng = Rng::new(5);
        let pts = DenseMatrix::from_fn(9, 3, |_, _| rng.normal(0.0, 3.0));
        let d = distances_of(&pts);
        let b = double_center(&d);
        let m = 9.0;
        let trace: f64 = (0..9).map(|i| b[(i, i)]).sum();
        for i in 0..9 {
            assert!(b.row(i).iter().sum::<f64>().abs() < 1e-9);
            let col_sq: f64 = (0..9).map(|k| d.d[(k, i)].powi(2)).sum();
            assert!((col_sq - (trace + m * b[(i, i)])).abs() < 1e-8);
            for j in 0..9 {
                let lhs = b[(i, i)] + b[(j, j)] - 2.0 * b[(i, j)];
                assert!((lhs - d.d[(i, j)].powi(2)).abs() < 1e-8);
            }
        }
        let total: f64 = d.d.as_slice().iter().map(|v| v * v).sum();
        assert!((total - 2.0 * m * trace).abs() < 1e-8 * total.max(1.0));
    }

    #[test]
    fn embed_two_points() {
        let b = DenseMatrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap();
        let e = embed(&b, 1, ids(2)).unwrap();
        assert_eq!(e.effective_rank, 1);
        assert!((e.o[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((e.o[(0, 1)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn embed_pads_beyond_rank() {
        let b = DenseMatrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap();
        let e = embed(&b, 5, ids(2)).unwrap();
        assert_eq!(e.o.shape(), (5, 2));
        assert_eq!(e.effective_rank, 1);
        for r in 1..5 {
            assert_eq!(e.o.row(r), &[0.0, 0.0]);
        }
        assert!((euclidean_distance(&e.column(0), &e.column(1)) - 2.0).abs() < 1e-12);
        assert!(matches!(embed(&b, 0, ids(2)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn embed_recovers_distances_in_r4() {
        let mut rng = Rng::new(6);
        let pts = DenseMatrix::from_fn(10, 4, |_, _| rng.normal(0.0, 1.0));
        let d = distances_of(&pts);
        let e = embed(&double_center(&d), 4, ids(10)).unwrap();
        assert_eq!(e.effective_rank, 4);
        for i in 0..10 {
            for j in 0..10 {
                let got = euclidean_distance(&e.column(i), &e.column(j));
                assert!((got - d.d[(i, j)]).abs() < 1e-6);
            }
        }
        for r in 0..4 {
            assert!(e.o.row(r).iter().sum::<f64>().abs() < 1e-8);
        }
    }

    #[test]
    fn negative_eigenvalues_are_clamped() {
        // Violates the triangle inequality, so B has a negative eigenvalue.
        let d = DistanceMatrix {
            d: DenseMatrix::from_rows(&[[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]]).unwrap(),
        };
        let b = double_center(&d);
        let evd = symmetric_evd(&b).unwrap();
        assert!(evd.eigenvalues.iter().any(|&l| l < -1e-6));
        let e = embed(&b, 3, ids(3)).unwrap();
        let positive = evd.eigenvalues.iter().filter(|&&l| l > 1e-10 * evd.eigenvalues[0]).count();
        assert_eq!(e.effective_rank, positive);
        assert!(e.o.is_finite());
    }
}
