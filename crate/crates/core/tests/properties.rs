use ams_sfe::manifold::{double_center, embed, DistanceMatrix};
use ams_sfe::numerics::{euclidean_distance, least_squares, residual_norm, symmetric_evd, DenseMatrix, Rng};
use ams_sfe::ClassId;
use proptest::prelude::*;

fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = Rng::new(seed);
    let a = DenseMatrix::from_fn(n, n, |_, _| rng.normal(0.0, 1.0));
    DenseMatrix::from_fn(n, n, |r, c| a[(r, c)] + a[(c, r)])
}

fn points(m: usize, dim: usize, seed: u64) -> DenseMatrix {
    let mut rng = Rng::new(seed);
    DenseMatrix::from_fn(m, dim, |_, _| rng.uniform(-3.0, 3.0))
}

fn distances(p: &DenseMatrix) -> DistanceMatrix {
    let m = p.rows();
    DistanceMatrix {
        d: DenseMatrix::from_fn(m, m, |i, j| euclidean_distance(p.row(i), p.row(j))),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evd_reconstructs_and_is_orthonormal(n in 2usize..=32, seed in any::<u64>()) {
        let a = random_symmetric(n, seed);
        let evd = symmetric_evd(&a).unwrap();
        let scale = a.max_abs().max(1.0);
        prop_assert!(evd.reconstruct().max_abs_diff(&a) <= 1e-10 * scale);
        let v = &evd.eigenvectors;
        let vtv = v.transpose().matmul(v).unwrap();
        prop_assert!(vtv.max_abs_diff(&DenseMatrix::identity(n)) <= 1e-10);
        prop_assert!(evd.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn least_squares_is_locally_optimal(rows in 3usize..12, cols in 1usize..4, seed in any::<u64>()) {
        prop_assume!(rows >= cols);
        let mut rng = Rng::new(seed);
        let a = DenseMatrix::from_fn(rows, cols, |_, _| rng.normal(0.0, 1.0));
        let b: Vec<f64> = (0..rows).map(|_| rng.normal(0.0, 1.0)).collect();
        let theta = least_squares(&a, &b).unwrap();
        let best = residual_norm(&a, &theta, &b);
        for i in 0..cols {
            for step in [-1e-3, 1e-3] {
                let mut t = theta.clone();
                t[i] += step;
                prop_assert!(residual_norm(&a, &t, &b) >= best - 1e-9);
            }
        }
    }

    #[test]
    fn double_centering_identities(m in 2usize..20, dim in 1usize..6, seed in any::<u64>()) {
        let dist = distances(&points(m, dim, seed));
        let b = double_center(&dist);
        let scale = dist.d.max_abs().powi(2).max(1.0);
        for i in 0..m {
            for j in 0..m {
                let lhs = b[(i, i)] + b[(j, j)] - 2.0 * b[(i, j)];
                prop_assert!((lhs - dist.d[(i, j)].powi(2)).abs() <= 1e-10 * scale);
            }
            let row: f64 = b.row(i).iter().sum();
            prop_assert!(row.abs() <= 1e-10 * scale * m as f64);
        }
    }

    #[test]
    fn mds_recovers_distances(m in 3usize..16, dim in 1usize..5, extra in 0usize..3, seed in any::<u64>()) {
        let dist = distances(&points(m, dim, seed));
        let target = dim.min(m - 1) + extra;
        let e = embed(&double_center(&dist), target, (0..m as u32).map(ClassId).collect()).unwrap();
        let cols = e.columns();
        for i in 0..m {
            for j in 0..m {
                let got = euclidean_distance(cols.row(i), cols.row(j));
                prop_assert!((got - dist.d[(i, j)]).abs() <= 1e-7 * dist.d.max_abs().max(1.0));
            }
        }
    }
}
