//! Undirected weighted graphs, their Laplacians, and the spectral
//! decomposition used by the graph-regularized solvers.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Mean Earth radius in kilometers for great-circle distances.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Eigenvalues in `[-EIGENVALUE_FLOOR, 0)` are clamped to zero so that
/// downstream shrinkage coefficients never see a negative graph frequency.
const EIGENVALUE_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("adjacency matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("adjacency is not symmetric at ({i},{j}): {forward} vs {backward}")]
    NotSymmetric {
        i: usize,
        j: usize,
        forward: f64,
        backward: f64,
    },
    #[error("adjacency entry ({i},{j}) = {value} must be finite and nonnegative")]
    InvalidWeight { i: usize, j: usize, value: f64 },
    #[error("adjacency diagonal entry {i} = {value} must be exactly zero")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("graph requires at least {required} nodes, got {got}")]
    TooFewNodes { required: usize, got: usize },
    #[error("coordinate {index} is invalid: latitude {lat} must be finite in [-90, 90], longitude {lon} finite")]
    InvalidCoordinate { index: usize, lat: f64, lon: f64 },
    #[error("degenerate geometry: all coordinates coincide, distance normalizer is zero")]
    DegenerateGeometry,
    #[error("signal has {got} entries, graph has {expected} nodes")]
    SignalLength { got: usize, expected: usize },
    #[error("matrix is not symmetric, cannot eigendecompose")]
    AsymmetricLaplacian,
}

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// An undirected weighted graph stored as a dense adjacency matrix.
///
/// Construction enforces the invariants once; afterwards the graph is
/// immutable, so readers can share it freely.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: DMatrix<f64>,
}

impl Graph {
    /// Builds a graph from a dense adjacency matrix, validating that it is
    /// square, exactly symmetric, nonnegative, finite, and hollow.
    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self, GraphError> {
        let (rows, cols) = adjacency.shape();
        if rows != cols {
            return Err(GraphError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(GraphError::TooFewNodes {
                required: 1,
                got: 0,
            });
        }
        for i in 0..rows {
            let diag = adjacency[(i, i)];
            if diag != 0.0 {
                return Err(GraphError::NonzeroDiagonal { i, value: diag });
            }
            for j in 0..cols {
                let w = adjacency[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(GraphError::InvalidWeight { i, j, value: w });
                }
                if adjacency[(j, i)] != w {
                    return Err(GraphError::NotSymmetric {
                        i,
                        j,
                        forward: w,
                        backward: adjacency[(j, i)],
                    });
                }
            }
        }
        Ok(Self { adjacency })
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }
}

/// The combinatorial Laplacian `L = D - A` of a graph together with the
/// degree vector used to form `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianView {
    matrix: DMatrix<f64>,
    degree: DVector<f64>,
}

impl LaplacianView {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn degree(&self) -> &DVector<f64> {
        &self.degree
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Eigendecomposition `L = V diag(lambda) V^T` with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct LaplacianEigen {
    eigenvectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl LaplacianEigen {
    /// Orthonormal eigenvector matrix; column `m` pairs with `eigenvalues()[m]`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Eigenvalues sorted ascending; the first is zero for every Laplacian.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn num_nodes(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Great-circle distance between two points, haversine on a sphere.
pub fn great_circle_km(p: GeoPoint, q: GeoPoint) -> f64 {
    let lat1 = p.lat.to_radians();
    let lat2 = q.lat.to_radians();
    let dlat = lat2 - lat1;
    let dlon = (q.lon - p.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Builds the dense geodesic-distance graph over a set of coordinates:
/// `a_ij = exp(-d_ij^2 / sum_{i,j} d_ij^2)` for `i != j` and `a_ii = 0`,
/// where the normalizing sum runs over all ordered pairs.
///
/// Self-loops would survive the formula as `exp(0) = 1`; they are forced to
/// zero because they cancel in `D - A` anyway.
pub fn build_geodesic_graph(coords: &[GeoPoint]) -> Result<Graph, GraphError> {
    let m = coords.len();
    if m < 2 {
        return Err(GraphError::TooFewNodes {
            required: 2,
            got: m,
        });
    }
    for (index, p) in coords.iter().enumerate() {
        if !p.lat.is_finite() || !p.lon.is_finite() || p.lat.abs() > 90.0 {
            return Err(GraphError::InvalidCoordinate {
                index,
                lat: p.lat,
                lon: p.lon,
            });
        }
    }

    let mut dist_sq = DMatrix::<f64>::zeros(m, m);
    let mut normalizer = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let d = great_circle_km(coords[i], coords[j]);
            let d2 = d * d;
            dist_sq[(i, j)] = d2;
            dist_sq[(j, i)] = d2;
            // ordered pairs: (i, j) and (j, i) both contribute
            normalizer += 2.0 * d2;
        }
    }
    if normalizer <= 0.0 {
        return Err(GraphError::DegenerateGeometry);
    }

    let mut adjacency = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                adjacency[(i, j)] = (-dist_sq[(i, j)] / normalizer).exp();
            }
        }
    }
    Graph::from_adjacency(adjacency)
}

/// Forms `L = D - A` with `D = diag(row sums of A)`.
pub fn laplacian(g: &Graph) -> LaplacianView {
    let m = g.num_nodes();
    let degree = DVector::from_iterator(m, g.adjacency().row_iter().map(|r| r.sum()));
    let mut matrix = -g.adjacency().clone();
    for i in 0..m {
        matrix[(i, i)] += degree[i];
    }
    LaplacianView { matrix, degree }
}

/// The smoothness quadratic form `y^T L y`.
///
/// Equal to the weighted edge sum `sum_{(i,j)} a_ij (y_i - y_j)^2` over
/// ordered node pairs (each undirected edge counted twice with the half
/// absorbed). Rounding can push the form a few ulps negative; such values
/// are clamped to zero since `L` is positive semidefinite.
pub fn smoothness(l: &LaplacianView, y: &DVector<f64>) -> Result<f64, GraphError> {
    if y.len() != l.num_nodes() {
        return Err(GraphError::SignalLength {
            got: y.len(),
            expected: l.num_nodes(),
        });
    }
    let value = y.dot(&(l.matrix() * y));
    Ok(value.max(0.0))
}

/// Symmetric eigendecomposition of the Laplacian with eigenvalues sorted
/// ascending. Eigenvalues in `[-1e-10, 0)` are clamped to zero.
pub fn laplacian_eigendecomposition(l: &LaplacianView) -> Result<LaplacianEigen, GraphError> {
    let m = l.matrix();
    if m != &m.transpose() {
        return Err(GraphError::AsymmetricLaplacian);
    }
    let decomp = m.clone().symmetric_eigen();

    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| decomp.eigenvalues[a].total_cmp(&decomp.eigenvalues[b]));

    let n = m.nrows();
    let mut eigenvalues = DVector::<f64>::zeros(n);
    let mut eigenvectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut lam = decomp.eigenvalues[src];
        if (-EIGENVALUE_FLOOR..0.0).contains(&lam) {
            lam = 0.0;
        }
        eigenvalues[dst] = lam;
        eigenvectors.set_column(dst, &decomp.eigenvectors.column(src));
    }
    Ok(LaplacianEigen {
        eigenvectors,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn graph_from_upper(m: usize, weights: &[f64]) -> Graph {
        let mut adj = DMatrix::zeros(m, m);
        let mut idx = 0;
        for i in 0..m {
            for j in (i + 1)..m {
                adj[(i, j)] = weights[idx];
                adj[(j, i)] = weights[idx];
                idx += 1;
            }
        }
        Graph::from_adjacency(adj).unwrap()
    }

    fn two_node_unit_graph() -> Graph {
        graph_from_upper(2, &[1.0])
    }

    #[test]
    fn adjacency_validation_rejects_bad_inputs() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(
            Graph::from_adjacency(asym),
            Err(GraphError::NotSymmetric { .. })
        ));

        let negative = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!(matches!(
            Graph::from_adjacency(negative),
            Err(GraphError::InvalidWeight { .. })
        ));

        let self_loop = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            Graph::from_adjacency(self_loop),
            Err(GraphError::NonzeroDiagonal { i: 0, .. })
        ));

        let rect = DMatrix::from_row_slice(1, 2, &[0.0, 0.0]);
        assert!(matches!(
            Graph::from_adjacency(rect),
            Err(GraphError::NotSquare { rows: 1, cols: 2 })
        ));
    }

    #[test]
    fn geodesic_two_points_gives_exp_half() {
        // two distinct cities: ordered-pair normalizer is 2 d^2, so the
        // off-diagonal weight is exp(-1/2)
        let coords = [
            GeoPoint::new(59.3293, 18.0686),
            GeoPoint::new(57.7089, 11.9746),
        ];
        let g = build_geodesic_graph(&coords).unwrap();
        let expected = 0.606_530_659_712_633_4_f64; // exp(-0.5)
        assert_relative_eq!(g.adjacency()[(0, 1)], expected, max_relative = 1e-12);
        assert_relative_eq!(g.adjacency()[(1, 0)], expected, max_relative = 1e-12);
        assert_eq!(g.adjacency()[(0, 0)], 0.0);
        assert_eq!(g.adjacency()[(1, 1)], 0.0);
    }

    #[test]
    fn geodesic_equilateral_triple_has_equal_weights() {
        // three points pairwise a quarter circumference apart
        let coords = [
            GeoPoint::new(0.0, 0.0),
            GeoPoint::new(0.0, 90.0),
            GeoPoint::new(90.0, 0.0),
        ];
        let g = build_geodesic_graph(&coords).unwrap();
        let w = g.adjacency()[(0, 1)];
        assert_relative_eq!(g.adjacency()[(0, 2)], w, max_relative = 1e-12);
        assert_relative_eq!(g.adjacency()[(1, 2)], w, max_relative = 1e-12);
        assert_relative_eq!(w, (-1.0f64 / 6.0).exp(), max_relative = 1e-12);
    }

    #[test]
    fn geodesic_adjacency_is_scale_invariant() {
        // distances along the equator scale linearly with longitude spacing
        let near = [GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 10.0)];
        let far = [GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 20.0)];
        let g_near = build_geodesic_graph(&near).unwrap();
        let g_far = build_geodesic_graph(&far).unwrap();
        assert_relative_eq!(
            g_near.adjacency()[(0, 1)],
            g_far.adjacency()[(0, 1)],
            max_relative = 1e-12
        );
    }

    #[test]
    fn geodesic_rejects_degenerate_inputs() {
        assert!(matches!(
            build_geodesic_graph(&[GeoPoint::new(0.0, 0.0)]),
            Err(GraphError::TooFewNodes {
                required: 2,
                got: 1
            })
        ));
        let coincident = [GeoPoint::new(10.0, 10.0); 3];
        assert!(matches!(
            build_geodesic_graph(&coincident),
            Err(GraphError::DegenerateGeometry)
        ));
        let bad_lat = [GeoPoint::new(95.0, 0.0), GeoPoint::new(0.0, 0.0)];
        assert!(matches!(
            build_geodesic_graph(&bad_lat),
            Err(GraphError::InvalidCoordinate { index: 0, .. })
        ));
    }

    #[test]
    fn laplacian_of_two_node_graph() {
        let l = laplacian(&two_node_unit_graph());
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(l.matrix(), &expected);
    }

    #[test]
    fn laplacian_of_edgeless_graph_is_zero() {
        let g = Graph::from_adjacency(DMatrix::zeros(3, 3)).unwrap();
        let l = laplacian(&g);
        assert_eq!(l.matrix(), &DMatrix::zeros(3, 3));
    }

    #[test]
    fn laplacian_of_weighted_triangle() {
        // a12 = 1, a13 = 2, a23 = 3; row sums 3, 4, 5
        let g = graph_from_upper(3, &[1.0, 2.0, 3.0]);
        let l = laplacian(&g);
        let expected =
            DMatrix::from_row_slice(3, 3, &[3.0, -1.0, -2.0, -1.0, 4.0, -3.0, -2.0, -3.0, 5.0]);
        assert_eq!(l.matrix(), &expected);
    }

    #[test]
    fn smoothness_matches_hand_values() {
        let l = laplacian(&two_node_unit_graph());
        let y = DVector::from_vec(vec![1.0, 0.0]);
        assert_abs_diff_eq!(smoothness(&l, &y).unwrap(), 1.0, epsilon = 1e-12);

        let constant = DVector::from_element(2, 3.25);
        assert_abs_diff_eq!(smoothness(&l, &constant).unwrap(), 0.0, epsilon = 1e-12);

        let wrong_len = DVector::from_vec(vec![1.0; 3]);
        assert!(matches!(
            smoothness(&l, &wrong_len),
            Err(GraphError::SignalLength {
                got: 3,
                expected: 2
            })
        ));
    }

    #[test]
    fn smoothness_is_invariant_under_constant_shift() {
        let g = graph_from_upper(4, &[0.4, 0.0, 1.2, 0.7, 0.0, 2.0]);
        let l = laplacian(&g);
        let y = DVector::from_vec(vec![0.3, -1.1, 2.0, 0.5]);
        let shifted = y.add_scalar(17.5);
        assert_relative_eq!(
            smoothness(&l, &y).unwrap(),
            smoothness(&l, &shifted).unwrap(),
            max_relative = 1e-8,
            epsilon = 1e-9
        );
    }

    #[test]
    fn eigendecomposition_of_two_node_path() {
        let eig = laplacian_eigendecomposition(&laplacian(&two_node_unit_graph())).unwrap();
        assert_abs_diff_eq!(eig.eigenvalues()[0], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eig.eigenvalues()[1], 2.0, epsilon = 1e-10);

        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = eig.eigenvectors().column(0);
        let v1 = eig.eigenvectors().column(1);
        // eigenvectors determined up to sign
        assert_abs_diff_eq!(v0[0].abs(), inv_sqrt2, epsilon = 1e-10);
        assert_abs_diff_eq!(v0[0], v0[1], epsilon = 1e-10);
        assert_abs_diff_eq!(v1[0].abs(), inv_sqrt2, epsilon = 1e-10);
        assert_abs_diff_eq!(v1[0], -v1[1], epsilon = 1e-10);
    }

    #[test]
    fn eigendecomposition_of_zero_matrix() {
        let g = Graph::from_adjacency(DMatrix::zeros(3, 3)).unwrap();
        let eig = laplacian_eigendecomposition(&laplacian(&g)).unwrap();
        for i in 0..3 {
            assert_eq!(eig.eigenvalues()[i], 0.0);
        }
        let vtv = eig.eigenvectors().transpose() * eig.eigenvectors();
        assert_relative_eq!(vtv, DMatrix::identity(3, 3), epsilon = 1e-10);
    }

    #[test]
    fn eigendecomposition_rejects_asymmetric_matrix() {
        let view = LaplacianView {
            matrix: DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 1.0]),
            degree: DVector::zeros(2),
        };
        assert!(matches!(
            laplacian_eigendecomposition(&view),
            Err(GraphError::AsymmetricLaplacian)
        ));
    }

    #[test]
    fn eigendecomposition_reconstructs_random_graph() {
        let g = graph_from_upper(5, &[0.5, 1.5, 0.0, 0.3, 2.2, 0.9, 0.0, 1.1, 0.4, 0.8]);
        let l = laplacian(&g);
        let eig = laplacian_eigendecomposition(&l).unwrap();

        let recon = eig.eigenvectors()
            * DMatrix::from_diagonal(eig.eigenvalues())
            * eig.eigenvectors().transpose();
        let rel = (&recon - l.matrix()).norm() / l.matrix().norm();
        assert!(rel < 1e-8, "reconstruction residual {rel}");
        assert_abs_diff_eq!(eig.eigenvalues()[0], 0.0, epsilon = 1e-10);
    }

    fn edge_sum(g: &Graph, y: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for i in 0..g.num_nodes() {
            for j in (i + 1)..g.num_nodes() {
                let diff = y[i] - y[j];
                total += g.adjacency()[(i, j)] * diff * diff;
            }
        }
        total
    }

    fn arb_graph(max_nodes: usize) -> impl Strategy<Value = Graph> {
        (2..=max_nodes).prop_flat_map(|m| {
            proptest::collection::vec(0.0..1.0f64, m * (m - 1) / 2).prop_map(move |raw| {
                let weights: Vec<f64> =
                    raw.iter().map(|&w| if w < 0.3 { 0.0 } else { w }).collect();
                graph_from_upper(m, &weights)
            })
        })
    }

    proptest! {
        #[test]
        fn generated_graphs_satisfy_invariants(g in arb_graph(20)) {
            let adj = g.adjacency();
            for i in 0..g.num_nodes() {
                prop_assert_eq!(adj[(i, i)], 0.0);
                for j in 0..g.num_nodes() {
                    prop_assert!(adj[(i, j)] >= 0.0);
                    prop_assert_eq!(adj[(i, j)], adj[(j, i)]);
                }
            }
        }

        #[test]
        fn smoothness_is_nonnegative_and_matches_edge_sum(
            g in arb_graph(20),
            raw in proptest::collection::vec(-5.0..5.0f64, 20),
        ) {
            let l = laplacian(&g);
            let y = DVector::from_vec(raw[..g.num_nodes()].to_vec());
            let quad = smoothness(&l, &y).unwrap();
            prop_assert!(quad >= 0.0);
            let edges = edge_sum(&g, &y);
            prop_assert!((quad - edges).abs() <= 1e-10 * edges.abs().max(1.0));
        }

        #[test]
        fn eigendecomposition_invariants(g in arb_graph(12)) {
            let l = laplacian(&g);
            let eig = laplacian_eigendecomposition(&l).unwrap();
            let m = g.num_nodes();

            let vtv = eig.eigenvectors().transpose() * eig.eigenvectors();
            prop_assert!((vtv - DMatrix::identity(m, m)).norm() < 1e-10 * (m as f64));

            let recon = eig.eigenvectors()
                * DMatrix::from_diagonal(eig.eigenvalues())
                * eig.eigenvectors().transpose();
            let scale = l.matrix().norm();
            let resid = (&recon - l.matrix()).norm();
            if scale > 0.0 {
                prop_assert!(resid / scale < 1e-8);
            } else {
                prop_assert!(resid < 1e-10);
            }

            prop_assert!(eig.eigenvalues()[0].abs() <= 1e-10);
            for i in 0..m {
                prop_assert!(eig.eigenvalues()[i] >= 0.0);
                if i > 0 {
                    prop_assert!(eig.eigenvalues()[i] >= eig.eigenvalues()[i - 1]);
                }
            }
        }
    }
}
