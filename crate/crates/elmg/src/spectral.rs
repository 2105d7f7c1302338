//! Spectral view of the graph-regularized fit: the trained map acts on the
//! targets as a diagonal shrinkage in the joint basis built from the hidden
//! matrix SVD and the Laplacian eigenvectors.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::LaplacianEigen;
use crate::model::{Hyperparams, TrainingMatrices};

/// Singular values at or below `RANK_TOL * sigma_max` are treated as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("hidden matrix must be finite")]
    NonFiniteInput,
    #[error("targets span {targets} graph nodes but the graph has {graph}")]
    NodeMismatch { targets: usize, graph: usize },
    #[error(
        "shrinkage grid is {rows}x{cols} but the decomposition has rank {rank} and {nodes} nodes"
    )]
    GridMismatch {
        rows: usize,
        cols: usize,
        rank: usize,
        nodes: usize,
    },
    #[error("cannot write smoothing report: {0}")]
    Io(#[from] std::io::Error),
}

/// Reduced SVD of the hidden matrix `H = U diag(sigma) V^T`, truncated to
/// the numerical rank `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenSvd {
    left_vectors: DMatrix<f64>,
    singular_values: DVector<f64>,
    right_vectors: DMatrix<f64>,
}

impl HiddenSvd {
    /// `N x r`, orthonormal columns.
    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.left_vectors
    }

    /// Length `r`, strictly positive, descending.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    /// `K x r`, orthonormal columns.
    pub fn right_vectors(&self) -> &DMatrix<f64> {
        &self.right_vectors
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

/// Computes the reduced SVD of `H`, keeping only singular values above
/// `1e-10 * sigma_max`.
pub fn hidden_svd(h: &DMatrix<f64>) -> Result<HiddenSvd, SpectralError> {
    if h.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NonFiniteInput);
    }
    let mut svd = nalgebra::linalg::SVD::new(h.clone(), true, true);
    svd.sort_by_singular_values();
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma = svd.singular_values;

    let sigma_max = sigma.iter().cloned().fold(0.0f64, f64::max);
    let rank = sigma.iter().filter(|&&s| s > RANK_TOL * sigma_max).count();

    Ok(HiddenSvd {
        left_vectors: u.columns(0, rank).into_owned(),
        singular_values: DVector::from_iterator(rank, sigma.iter().take(rank).copied()),
        right_vectors: v_t.rows(0, rank).transpose(),
    })
}

/// The `r x M` grid of shrinkage coefficients together with the component
/// labels (Laplacian eigenvalue per column, squared singular value per row).
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageSpectrum {
    coefficients: DMatrix<f64>,
    lambdas: DVector<f64>,
    sigma_squared: DVector<f64>,
}

impl ShrinkageSpectrum {
    /// Entry `(i2, i1)` shrinks the component along singular direction `i2`
    /// and graph frequency `i1`.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    /// Laplacian eigenvalues labeling the columns.
    pub fn lambdas(&self) -> &DVector<f64> {
        &self.lambdas
    }

    /// Squared singular values labeling the rows.
    pub fn sigma_squared(&self) -> &DVector<f64> {
        &self.sigma_squared
    }
}

/// Evaluates `zeta(i2, i1) = 1 / ((1 + beta * lambda_i1) + alpha / sigma_i2^2)`
/// over the whole grid.
pub fn shrinkage_coefficients(
    svd: &HiddenSvd,
    eig: &LaplacianEigen,
    hp: &Hyperparams,
) -> ShrinkageSpectrum {
    let r = svd.rank();
    let m = eig.num_nodes();
    let sigma_squared = DVector::from_iterator(r, svd.singular_values().iter().map(|s| s * s));
    let coefficients = DMatrix::from_fn(r, m, |i2, i1| {
        1.0 / ((1.0 + hp.beta() * eig.eigenvalues()[i1]) + hp.alpha() / sigma_squared[i2])
    });
    ShrinkageSpectrum {
        coefficients,
        lambdas: eig.eigenvalues().clone(),
        sigma_squared,
    }
}

/// Fitted training output `Y = H W` computed without forming `W`: project
/// the targets into the joint basis, scale each component by its shrinkage
/// coefficient, and project back.
pub fn training_fit_spectral(
    tm: &TrainingMatrices,
    eig: &LaplacianEigen,
    hp: &Hyperparams,
) -> Result<DMatrix<f64>, SpectralError> {
    if tm.num_nodes() != eig.num_nodes() {
        return Err(SpectralError::NodeMismatch {
            targets: tm.num_nodes(),
            graph: eig.num_nodes(),
        });
    }
    let svd = hidden_svd(tm.h())?;
    let zeta = shrinkage_coefficients(&svd, eig, hp);
    let mut projected = svd.left_vectors().transpose() * tm.t() * eig.eigenvectors();
    projected.component_mul_assign(zeta.coefficients());
    Ok(svd.left_vectors() * projected * eig.eigenvectors().transpose())
}

/// One principal component of the fit: its graph frequency, signal strength
/// in the hidden basis, shrinkage factor, and energy before and after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingRow {
    pub lambda: f64,
    pub sigma2: f64,
    pub zeta: f64,
    pub input_energy: f64,
    pub retained_energy: f64,
}

/// Per-component shrinkage diagnostics, sorted by retained energy
/// descending (ties broken by eigenvalue, then squared singular value, so
/// the order is total).
pub fn smoothing_report(
    tm: &TrainingMatrices,
    eig: &LaplacianEigen,
    hp: &Hyperparams,
) -> Result<Vec<SmoothingRow>, SpectralError> {
    if tm.num_nodes() != eig.num_nodes() {
        return Err(SpectralError::NodeMismatch {
            targets: tm.num_nodes(),
            graph: eig.num_nodes(),
        });
    }
    let svd = hidden_svd(tm.h())?;
    let zeta = shrinkage_coefficients(&svd, eig, hp);
    let projected = svd.left_vectors().transpose() * tm.t() * eig.eigenvectors();

    let mut rows = Vec::with_capacity(svd.rank() * eig.num_nodes());
    for i1 in 0..eig.num_nodes() {
        for i2 in 0..svd.rank() {
            let z = zeta.coefficients()[(i2, i1)];
            let input_energy = projected[(i2, i1)] * projected[(i2, i1)];
            rows.push(SmoothingRow {
                lambda: eig.eigenvalues()[i1],
                sigma2: zeta.sigma_squared()[i2],
                zeta: z,
                input_energy,
                retained_energy: z * z * input_energy,
            });
        }
    }
    rows.sort_by(|a, b| {
        b.retained_energy
            .total_cmp(&a.retained_energy)
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.sigma2.total_cmp(&b.sigma2))
    });
    Ok(rows)
}

/// Writes the report as CSV with the fixed header
/// `lambda,sigma2,zeta,input_energy,retained_energy`.
pub fn write_smoothing_csv<W: Write>(
    rows: &[SmoothingRow],
    mut out: W,
) -> Result<(), SpectralError> {
    writeln!(out, "lambda,sigma2,zeta,input_energy,retained_energy")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.lambda, row.sigma2, row.zeta, row.input_energy, row.retained_energy
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, laplacian_eigendecomposition, Graph, LaplacianEigen};
    use crate::model::{train_elmg_dense, Hyperparams, TrainingMatrices};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn rng_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn two_node_eigen() -> LaplacianEigen {
        let graph =
            Graph::from_adjacency(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        laplacian_eigendecomposition(&laplacian(&graph)).unwrap()
    }

    fn triangle_eigen() -> LaplacianEigen {
        let adj = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.5, 1.0, 0.0, 2.0, 0.5, 2.0, 0.0]);
        laplacian_eigendecomposition(&laplacian(&Graph::from_adjacency(adj).unwrap())).unwrap()
    }

    #[test]
    fn identity_hidden_matrix_has_unit_spectrum() {
        let svd = hidden_svd(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(svd.rank(), 3);
        for s in svd.singular_values().iter() {
            assert_relative_eq!(*s, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn rank_one_matrix_has_single_singular_value() {
        let u = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let v = DVector::from_vec(vec![3.0, 4.0]);
        let h = &u * v.transpose();
        let svd = hidden_svd(&h).unwrap();
        assert_eq!(svd.rank(), 1);
        // sigma_1 = |u| * |v| = 3 * 5
        assert_relative_eq!(svd.singular_values()[0], 15.0, max_relative = 1e-12);
    }

    #[test]
    fn svd_reconstructs_and_is_orthonormal() {
        let h = rng_matrix(6, 4, 101);
        let svd = hidden_svd(&h).unwrap();
        let rebuilt = svd.left_vectors()
            * DMatrix::from_diagonal(svd.singular_values())
            * svd.right_vectors().transpose();
        assert!((&rebuilt - &h).norm() / h.norm() < 1e-8);

        let r = svd.rank();
        let gram_u = svd.left_vectors().transpose() * svd.left_vectors();
        let gram_v = svd.right_vectors().transpose() * svd.right_vectors();
        assert!((gram_u - DMatrix::identity(r, r)).norm() < 1e-10 * r as f64);
        assert!((gram_v - DMatrix::identity(r, r)).norm() < 1e-10 * r as f64);

        for i in 1..r {
            assert!(svd.singular_values()[i - 1] >= svd.singular_values()[i]);
        }
    }

    #[test]
    fn svd_truncates_rank_deficiency() {
        // two identical columns: numerical rank 2 in a 5x3 matrix
        let base = rng_matrix(5, 2, 102);
        let mut h = DMatrix::zeros(5, 3);
        h.set_column(0, &base.column(0));
        h.set_column(1, &base.column(1));
        h.set_column(2, &base.column(0));
        let svd = hidden_svd(&h).unwrap();
        assert_eq!(svd.rank(), 2);
    }

    #[test]
    fn shrinkage_hand_value() {
        // sigma = 1 from the identity hidden matrix; lambda = 2 on the unit
        // two-node graph; 1 / ((1 + 0.5 * 2) + 1 / 1) = 1/3
        let svd = hidden_svd(&DMatrix::identity(2, 2)).unwrap();
        let eig = two_node_eigen();
        let hp = Hyperparams::new(1.0, 0.5).unwrap();
        let zeta = shrinkage_coefficients(&svd, &eig, &hp);
        assert_eq!(zeta.coefficients().nrows(), 2);
        assert_eq!(zeta.coefficients().ncols(), 2);
        assert_relative_eq!(zeta.coefficients()[(0, 1)], 1.0 / 3.0, max_relative = 1e-14);
        // lambda = 0 column: 1 / (1 + 1) = 1/2
        assert_relative_eq!(zeta.coefficients()[(0, 0)], 0.5, max_relative = 1e-14);
    }

    #[test]
    fn shrinkage_is_identity_without_regularization() {
        let svd = hidden_svd(&rng_matrix(4, 3, 103)).unwrap();
        let eig = triangle_eigen();
        let hp = Hyperparams::new(0.0, 0.0).unwrap();
        let zeta = shrinkage_coefficients(&svd, &eig, &hp);
        assert!(zeta.coefficients().iter().all(|&z| z == 1.0));
    }

    #[test]
    fn shrinkage_bounds_and_monotonicity() {
        let svd = hidden_svd(&rng_matrix(5, 4, 104)).unwrap();
        let eig = triangle_eigen();
        let grid = [0.0, 0.01, 0.1, 1.0, 10.0];
        let mut previous_in_alpha: Option<DMatrix<f64>> = None;
        for &alpha in &grid {
            let mut previous_in_beta: Option<DMatrix<f64>> = None;
            for &beta in &grid {
                let zeta =
                    shrinkage_coefficients(&svd, &eig, &Hyperparams::new(alpha, beta).unwrap());
                for &z in zeta.coefficients().iter() {
                    assert!(z > 0.0 && z <= 1.0, "zeta {z} out of (0, 1]");
                }
                // lambda strictly increases along columns on this graph
                for i2 in 0..zeta.coefficients().nrows() {
                    for i1 in 1..zeta.coefficients().ncols() {
                        if beta > 0.0 {
                            assert!(
                                zeta.coefficients()[(i2, i1)] < zeta.coefficients()[(i2, i1 - 1)]
                            );
                        }
                    }
                }
                if let Some(prev) = &previous_in_beta {
                    for (now, before) in zeta.coefficients().iter().zip(prev.iter()) {
                        assert!(now <= before);
                    }
                }
                previous_in_beta = Some(zeta.coefficients().clone());
            }
            let at_zero_beta =
                shrinkage_coefficients(&svd, &eig, &Hyperparams::new(alpha, 0.0).unwrap());
            if let Some(prev) = &previous_in_alpha {
                for (now, before) in at_zero_beta.coefficients().iter().zip(prev.iter()) {
                    assert!(now <= before);
                }
            }
            previous_in_alpha = Some(at_zero_beta.coefficients().clone());
        }
    }

    #[test]
    fn spectral_fit_matches_dense_solver() {
        for seed in 0..5u64 {
            let tm =
                TrainingMatrices::new(rng_matrix(5, 3, 200 + seed), rng_matrix(5, 3, 300 + seed))
                    .unwrap();
            let adj = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.5, 1.0, 0.0, 2.0, 0.5, 2.0, 0.0]);
            let graph = Graph::from_adjacency(adj).unwrap();
            let l = laplacian(&graph);
            let eig = laplacian_eigendecomposition(&l).unwrap();
            let hp = Hyperparams::new(0.2, 0.8).unwrap();

            let w = train_elmg_dense(&tm, &l, &hp).unwrap();
            let dense_fit = tm.h() * w;
            let spectral_fit = training_fit_spectral(&tm, &eig, &hp).unwrap();
            assert!(
                (&dense_fit - &spectral_fit).norm() / dense_fit.norm() < 1e-6,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn spectral_fit_handles_rank_deficiency() {
        let base = rng_matrix(6, 2, 105);
        let mut h = DMatrix::zeros(6, 4);
        h.set_column(0, &base.column(0));
        h.set_column(1, &base.column(1));
        h.set_column(2, &(base.column(0) * 2.0));
        h.set_column(3, &(base.column(1) - base.column(0)));
        let tm = TrainingMatrices::new(h, rng_matrix(6, 3, 106)).unwrap();
        let adj = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.5, 1.0, 0.0, 2.0, 0.5, 2.0, 0.0]);
        let graph = Graph::from_adjacency(adj).unwrap();
        let l = laplacian(&graph);
        let eig = laplacian_eigendecomposition(&l).unwrap();
        let hp = Hyperparams::new(0.3, 1.5).unwrap();

        let dense_fit = tm.h() * train_elmg_dense(&tm, &l, &hp).unwrap();
        let spectral_fit = training_fit_spectral(&tm, &eig, &hp).unwrap();
        assert!((&dense_fit - &spectral_fit).norm() / dense_fit.norm() < 1e-6);
    }

    #[test]
    fn unregularized_full_rank_fit_reproduces_targets() {
        let h = rng_matrix(3, 3, 107);
        let t = rng_matrix(3, 3, 108);
        let tm = TrainingMatrices::new(h, t.clone()).unwrap();
        let eig = triangle_eigen();
        let fit = training_fit_spectral(&tm, &eig, &Hyperparams::new(0.0, 0.0).unwrap()).unwrap();
        assert_relative_eq!(fit, t, max_relative = 1e-8);
    }

    #[test]
    fn fit_shifts_linearly_along_a_component() {
        let tm = TrainingMatrices::new(rng_matrix(5, 3, 109), rng_matrix(5, 3, 110)).unwrap();
        let eig = triangle_eigen();
        let hp = Hyperparams::new(0.4, 1.1).unwrap();
        let svd = hidden_svd(tm.h()).unwrap();
        let zeta = shrinkage_coefficients(&svd, &eig, &hp);

        let (i2, i1) = (1usize, 2usize);
        let c = 0.75;
        let direction = svd.left_vectors().column(i2) * eig.eigenvectors().column(i1).transpose();
        let shifted = TrainingMatrices::new(tm.h().clone(), tm.t() + &direction * c).unwrap();

        let base_fit = training_fit_spectral(&tm, &eig, &hp).unwrap();
        let new_fit = training_fit_spectral(&shifted, &eig, &hp).unwrap();
        let expected = &base_fit + direction * (c * zeta.coefficients()[(i2, i1)]);
        assert_relative_eq!(new_fit, expected, max_relative = 1e-10);
    }

    #[test]
    fn report_energies_satisfy_parseval_and_match_fit() {
        let tm = TrainingMatrices::new(rng_matrix(3, 3, 111), rng_matrix(3, 3, 112)).unwrap();
        let eig = triangle_eigen();
        let hp = Hyperparams::new(0.2, 0.9).unwrap();
        let rows = smoothing_report(&tm, &eig, &hp).unwrap();

        // square full-rank H: the z_i span everything, so input energies sum
        // to the full target energy
        let input_total: f64 = rows.iter().map(|r| r.input_energy).sum();
        assert_relative_eq!(input_total, tm.t().norm_squared(), max_relative = 1e-10);

        let retained_total: f64 = rows.iter().map(|r| r.retained_energy).sum();
        let fit = training_fit_spectral(&tm, &eig, &hp).unwrap();
        assert_relative_eq!(retained_total, fit.norm_squared(), max_relative = 1e-10);

        for pair in rows.windows(2) {
            assert!(pair[0].retained_energy >= pair[1].retained_energy);
        }
    }

    #[test]
    fn report_without_regularization_retains_everything() {
        let tm = TrainingMatrices::new(rng_matrix(4, 3, 113), rng_matrix(4, 3, 114)).unwrap();
        let eig = triangle_eigen();
        let rows = smoothing_report(&tm, &eig, &Hyperparams::new(0.0, 0.0).unwrap()).unwrap();
        for row in &rows {
            assert_eq!(row.zeta, 1.0);
            assert_eq!(row.input_energy, row.retained_energy);
        }
    }

    #[test]
    fn joint_basis_is_orthonormal_and_fitted_map_is_psd() {
        let tm = TrainingMatrices::new(rng_matrix(4, 3, 115), rng_matrix(4, 3, 116)).unwrap();
        let eig = triangle_eigen();
        let hp = Hyperparams::new(0.15, 0.6).unwrap();
        let svd = hidden_svd(tm.h()).unwrap();
        let zeta = shrinkage_coefficients(&svd, &eig, &hp);

        let n = tm.h().nrows();
        let m = eig.num_nodes();
        let r = svd.rank();
        let mut z = DMatrix::<f64>::zeros(n * m, r * m);
        let mut zeta_flat = Vec::with_capacity(r * m);
        for i1 in 0..m {
            for i2 in 0..r {
                let v = eig.eigenvectors().column(i1).into_owned();
                let u = svd.left_vectors().column(i2).into_owned();
                z.set_column(i1 * r + i2, &v.kronecker(&u));
                zeta_flat.push(zeta.coefficients()[(i2, i1)]);
            }
        }

        let gram = z.transpose() * &z;
        assert!((gram - DMatrix::identity(r * m, r * m)).norm() < 1e-8);

        let operator =
            &z * DMatrix::from_diagonal(&DVector::from_vec(zeta_flat.clone())) * z.transpose();
        assert!((&operator - operator.transpose()).norm() < 1e-10);
        let mut eigenvalues: Vec<f64> = operator.symmetric_eigenvalues().iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        for &value in &eigenvalues {
            assert!(value > -1e-10 && value <= 1.0 + 1e-10);
        }
        // nonzero eigenvalues of the fitted map are exactly the zetas
        zeta_flat.sort_by(f64::total_cmp);
        let nonzero = &eigenvalues[eigenvalues.len() - zeta_flat.len()..];
        for (have, want) in nonzero.iter().zip(&zeta_flat) {
            assert!((have - want).abs() < 1e-8, "{have} vs {want}");
        }

        // the operator applied to vec(T) reproduces the spectral fit
        let t_vec = DVector::from_column_slice(tm.t().as_slice());
        let mapped = &operator * t_vec;
        let fit = training_fit_spectral(&tm, &eig, &hp).unwrap();
        let fit_vec = DVector::from_column_slice(fit.as_slice());
        assert!((mapped - fit_vec).norm() < 1e-8);
    }

    #[test]
    fn smoothing_csv_has_exact_header_and_rows() {
        let rows = vec![
            SmoothingRow {
                lambda: 0.0,
                sigma2: 2.25,
                zeta: 1.0,
                input_energy: 4.0,
                retained_energy: 4.0,
            },
            SmoothingRow {
                lambda: 1.5,
                sigma2: 0.5,
                zeta: 0.25,
                input_energy: 2.0,
                retained_energy: 0.125,
            },
        ];
        let mut buffer = Vec::new();
        write_smoothing_csv(&rows, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(
            text,
            "lambda,sigma2,zeta,input_energy,retained_energy\n0,2.25,1,4,4\n1.5,0.5,0.25,2,0.125\n"
        );
    }

    #[test]
    fn node_mismatch_is_reported() {
        let tm = TrainingMatrices::new(rng_matrix(4, 3, 117), rng_matrix(4, 2, 118)).unwrap();
        let eig = triangle_eigen();
        assert!(matches!(
            training_fit_spectral(&tm, &eig, &Hyperparams::new(0.1, 0.1).unwrap()),
            Err(SpectralError::NodeMismatch {
                targets: 2,
                graph: 3
            })
        ));
    }
}
