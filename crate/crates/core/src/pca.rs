//! PCA of last-layer weights, (even, odd) projection pairs, circularity
//! scoring, single-linkage clustering, and factorization inference for
//! non-prime moduli.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Eigenvalues this far below the largest (relatively) are treated as zero
/// when directions cannot be recovered from the Gram side.
const RANK_TOL: f64 = 1e-12;

/// Principal directions (rows), their variances, and the projections of the
/// mean-centered input rows.
#[derive(Debug, Clone)]
pub struct PcaResult {
    /// `k x dim`, orthonormal rows ordered by descending variance. The
    /// largest-magnitude coordinate of each row is positive.
    pub components: Array2<f64>,
    /// Nonincreasing, clamped at zero.
    pub explained_variance: Vec<f64>,
    /// `P x k`: row `i` holds the coordinates of input row `i`.
    pub projections: Array2<f64>,
}

impl PcaResult {
    pub fn num_components(&self) -> usize {
        self.explained_variance.len()
    }
}

/// Covariance PCA of the rows (centered, not scaled).
///
/// The eigenproblem is solved on the smaller of the `dim x dim` covariance
/// or the `P x P` Gram matrix. On the Gram side only directions with
/// numerically nonzero variance are recoverable, so rank-deficient inputs
/// yield fewer components there.
pub fn pca(rows: ArrayView2<f64>) -> Result<PcaResult> {
    let p = rows.nrows();
    let dim = rows.ncols();
    if p < 2 || dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "pca needs at least 2 rows and 1 column, got {p} x {dim}"
        )));
    }
    let mean = rows.mean_axis(ndarray::Axis(0)).expect("p >= 2");
    let centered = &rows - &mean.broadcast((p, dim)).expect("broadcast mean");
    let denom = (p - 1) as f64;

    let (mut directions, mut variances): (Vec<Array1<f64>>, Vec<f64>) = if dim <= p {
        let cov = centered.t().dot(&centered) / denom;
        let (vals, vecs) = symmetric_eigen_desc(&cov);
        let dirs = (0..dim).map(|i| vecs.column(i).to_owned()).collect();
        (dirs, vals.iter().map(|&v| v.max(0.0)).collect())
    } else {
        let gram = centered.dot(&centered.t());
        let (vals, vecs) = symmetric_eigen_desc(&gram);
        let max = vals.first().copied().unwrap_or(0.0).max(0.0);
        let mut dirs = Vec::new();
        let mut vars = Vec::new();
        for (i, &lambda) in vals.iter().enumerate() {
            if lambda <= max * RANK_TOL || lambda <= 0.0 {
                break;
            }
            let u = centered.t().dot(&vecs.column(i)) / lambda.sqrt();
            dirs.push(u);
            vars.push(lambda / denom);
        }
        (dirs, vars)
    };

    // Sign convention: make the largest-magnitude coordinate positive.
    for d in directions.iter_mut() {
        let lead = d
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .expect("nonempty direction");
        if d[lead] < 0.0 {
            d.mapv_inplace(|v| -v);
        }
    }

    let k = directions.len();
    let mut components = Array2::zeros((k, dim));
    for (i, d) in directions.iter().enumerate() {
        components.row_mut(i).assign(d);
    }
    let projections = centered.dot(&components.t());
    variances.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(PcaResult {
        components,
        explained_variance: variances,
        projections,
    })
}

/// Symmetric eigendecomposition sorted by descending eigenvalue.
fn symmetric_eigen_desc(m: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = m.nrows();
    let dm = nalgebra::DMatrix::from_fn(n, n, |r, c| m[(r, c)]);
    let se = dm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]).then(a.cmp(&b)));
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            vecs[(r, col)] = se.eigenvectors[(r, i)];
        }
    }
    (vals, vecs)
}

/// 2-D scatter of every class on components `(2m, 2m+1)`.
///
/// `points[label]` is the position of output class `label`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionPair {
    pub pair_index: usize,
    pub points: Vec<[f64; 2]>,
}

/// Pairs consecutive components: pair `m` plots `PC_{2m}` against
/// `PC_{2m+1}`.
pub fn projection_pairs(result: &PcaResult, count: usize) -> Result<Vec<ProjectionPair>> {
    if 2 * count > result.num_components() {
        return Err(Error::InvalidArgument(format!(
            "{count} pairs need {} components, only {} available",
            2 * count,
            result.num_components()
        )));
    }
    Ok((0..count)
        .map(|m| ProjectionPair {
            pair_index: m,
            points: result
                .projections
                .rows()
                .into_iter()
                .map(|r| [r[2 * m], r[2 * m + 1]])
                .collect(),
        })
        .collect())
}

/// How circle-like a point set is: 1 minus the relative spread of the radial
/// distances about the centroid, clamped to [0, 1].
pub fn circularity_score(points: &[[f64; 2]]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 points".into()));
    }
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let radii: Vec<f64> = points
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .collect();
    let mean = radii.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let var = radii.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok((1.0 - var.sqrt() / mean).clamp(0.0, 1.0))
}

/// Single-linkage clustering with a data-driven cutoff: points whose distance
/// is at most `link_factor` times the median nearest-neighbor distance end up
/// in the same cluster (connected components of the threshold graph).
///
/// Clusters are ordered by their smallest member; members are ascending.
pub fn cluster_points(points: &[[f64; 2]], link_factor: f64) -> Result<Vec<Vec<usize>>> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 points".into()));
    }
    if !(link_factor > 0.0) {
        return Err(Error::InvalidArgument("link_factor must be positive".into()));
    }
    let dist = |a: usize, b: usize| -> f64 {
        let dx = points[a][0] - points[b][0];
        let dy = points[a][1] - points[b][1];
        (dx * dx + dy * dy).sqrt()
    };
    let mut nn = vec![f64::INFINITY; n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                nn[a] = nn[a].min(dist(a, b));
            }
        }
    }
    let mut sorted = nn.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let threshold = link_factor * median;

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for a in 0..n {
        for b in a + 1..n {
            if dist(a, b) <= threshold {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for x in 0..n {
        let r = find(&mut parent, x);
        by_root.entry(r).or_default().push(x);
    }
    Ok(by_root.into_values().collect())
}

/// Equal-size cluster structure read as a factorization of the modulus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorizationResult {
    /// Cluster count.
    pub k: usize,
    /// Cluster size; `k * m == p`.
    pub m: usize,
    /// Which projection pair produced it (set by [`scan_factorization`]).
    pub pair_index: Option<usize>,
    /// Largest divisor `d > 1` of `p` such that each cluster's labels share a
    /// residue modulo `d`, when one exists.
    pub residue_modulus: Option<usize>,
}

/// Accepts the partition as a factorization only when every cluster has the
/// same size `m` with `k * m == p` and `1 < k < p`.
pub fn infer_factorization(clusters: &[Vec<usize>], p: usize) -> Option<FactorizationResult> {
    let k = clusters.len();
    if k <= 1 || k >= p {
        return None;
    }
    let m = clusters.first()?.len();
    if m == 0 || clusters.iter().any(|c| c.len() != m) || k * m != p {
        return None;
    }
    let residue_modulus = (2..=p)
        .rev()
        .filter(|d| p % d == 0)
        .find(|&d| {
            clusters.iter().all(|c| {
                let r0 = c[0] % d;
                c.iter().all(|&label| label % d == r0)
            })
        });
    Some(FactorizationResult {
        k,
        m,
        pair_index: None,
        residue_modulus,
    })
}

/// Clusters each projection pair and returns the factorization from the pair
/// with the highest circularity score, if any pair factors `p`.
pub fn scan_factorization(
    result: &PcaResult,
    p: usize,
    pair_count: usize,
    link_factor: f64,
) -> Result<Option<FactorizationResult>> {
    let pairs = projection_pairs(result, pair_count)?;
    let mut best: Option<(f64, FactorizationResult)> = None;
    for pair in &pairs {
        let clusters = cluster_points(&pair.points, link_factor)?;
        if let Some(mut fr) = infer_factorization(&clusters, p) {
            fr.pair_index = Some(pair.pair_index);
            let score = circularity_score(&pair.points).unwrap_or(f64::NEG_INFINITY);
            match &best {
                Some((s, _)) if *s >= score => {}
                _ => best = Some((score, fr)),
            }
        }
    }
    Ok(best.map(|(_, fr)| fr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::TAU;

    #[test]
    fn collinear_points_live_on_one_component() {
        let rows = array![[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let r = pca(rows.view()).unwrap();
        let total: f64 = r.explained_variance.iter().sum();
        assert!(r.explained_variance[0] / total >= 1.0 - 1e-9);
    }

    #[test]
    fn projections_reconstruct_centered_rows() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for (p, dim) in [(6, 3), (4, 9)] {
            let data: Vec<f64> = (0..p * dim).map(|_| rng.random::<f64>() - 0.5).collect();
            let rows = Array2::from_shape_vec((p, dim), data).unwrap();
            let r = pca(rows.view()).unwrap();
            let mean = rows.mean_axis(ndarray::Axis(0)).unwrap();
            let centered = &rows - &mean.broadcast((p, dim)).unwrap();
            let rebuilt = r.projections.dot(&r.components);
            for (a, b) in rebuilt.iter().zip(centered.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn three_by_two_matches_closed_form_eigensolve() {
        let rows = array![[1.0, 0.0], [0.0, 1.0], [2.0, 3.0]];
        let r = pca(rows.view()).unwrap();
        // brute-force oracle on the 2x2 covariance
        let mean = [1.0, 4.0 / 3.0];
        let c: Vec<[f64; 2]> = rows
            .rows()
            .into_iter()
            .map(|row| [row[0] - mean[0], row[1] - mean[1]])
            .collect();
        let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
        for p in &c {
            a += p[0] * p[0];
            b += p[0] * p[1];
            d += p[1] * p[1];
        }
        let (a, b, d) = (a / 2.0, b / 2.0, d / 2.0);
        let disc = ((a - d).powi(2) + 4.0 * b * b).sqrt();
        let l1 = 0.5 * (a + d + disc);
        let l2 = 0.5 * (a + d - disc);
        assert_abs_diff_eq!(r.explained_variance[0], l1, epsilon = 1e-10);
        assert_abs_diff_eq!(r.explained_variance[1], l2, epsilon = 1e-10);
        assert_abs_diff_eq!(
            r.explained_variance.iter().sum::<f64>(),
            a + d,
            epsilon = 1e-10
        );
    }

    #[test]
    fn components_are_orthonormal_with_positive_lead() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let rows =
            Array2::from_shape_fn((5, 8), |_| rng.random::<f64>() * 2.0 - 1.0);
        let r = pca(rows.view()).unwrap();
        let k = r.num_components();
        for i in 0..k {
            for j in 0..k {
                let dot = r.components.row(i).dot(&r.components.row(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot, expect, epsilon = 1e-8);
            }
            let row = r.components.row(i);
            let lead = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .unwrap();
            assert!(*lead.1 > 0.0);
        }
        // variances nonincreasing
        for w in r.explained_variance.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn rotation_leaves_variances_unchanged() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let rows = Array2::from_shape_fn((7, 2), |_| rng.random::<f64>() * 4.0 - 2.0);
        let theta: f64 = 0.83;
        let rot = array![[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]];
        let rotated = rows.dot(&rot);
        let a = pca(rows.view()).unwrap();
        let b = pca(rotated.view()).unwrap();
        for (x, y) in a.explained_variance.iter().zip(&b.explained_variance) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-8);
        }
    }

    #[test]
    fn pair_indices_follow_the_even_odd_convention() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let rows = Array2::from_shape_fn((10, 8), |_| rng.random::<f64>());
        let r = pca(rows.view()).unwrap();
        let pairs = projection_pairs(&r, 3).unwrap();
        assert_eq!(pairs.len(), 3);
        for (m, pair) in pairs.iter().enumerate() {
            assert_eq!(pair.pair_index, m);
            assert_eq!(pair.points.len(), 10);
            for (label, pt) in pair.points.iter().enumerate() {
                assert_abs_diff_eq!(pt[0], r.projections[(label, 2 * m)], epsilon = 1e-15);
                assert_abs_diff_eq!(pt[1], r.projections[(label, 2 * m + 1)], epsilon = 1e-15);
            }
        }
        assert!(projection_pairs(&r, 0).unwrap().is_empty());
        assert!(projection_pairs(&r, 5).is_err());
    }

    #[test]
    fn exact_circle_scores_one() {
        let points: Vec<[f64; 2]> = (0..12)
            .map(|i| {
                let t = TAU * i as f64 / 12.0;
                [3.0 * t.cos() + 5.0, 3.0 * t.sin() - 2.0]
            })
            .collect();
        assert_abs_diff_eq!(circularity_score(&points).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn line_through_centroid_scores_low() {
        let points: Vec<[f64; 2]> = (-5..=5).map(|i| [i as f64, 0.0]).collect();
        let s = circularity_score(&points).unwrap();
        assert!(s < 0.8, "score {s}");
    }

    #[test]
    fn noisy_circle_scores_near_one_minus_sigma() {
        // radial jitter of 5% should land the score near 0.95
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let n = 400;
        let points: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let t = TAU * i as f64 / n as f64;
                let r = 10.0 * (1.0 + 0.05 * normal(&mut rng));
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let s = circularity_score(&points).unwrap();
        assert!((s - 0.95).abs() < 0.01, "score {s}");
    }

    fn normal(rng: &mut ChaCha12Rng) -> f64 {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let points = vec![[1.0, 1.0]; 5];
        assert!(matches!(
            circularity_score(&points),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn five_separated_groups_of_four() {
        let mut points = Vec::new();
        for g in 0..5 {
            let t = TAU * g as f64 / 5.0;
            let (cx, cy) = (100.0 * t.cos(), 100.0 * t.sin());
            for q in 0..4 {
                points.push([cx + 0.1 * q as f64, cy - 0.1 * q as f64]);
            }
        }
        let clusters = cluster_points(&points, 2.0).unwrap();
        assert_eq!(clusters.len(), 5);
        assert!(clusters.iter().all(|c| c.len() == 4));
    }

    #[test]
    fn one_blob_is_one_cluster() {
        let points: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 * 0.01, 0.0]).collect();
        let clusters = cluster_points(&points, 2.0).unwrap();
        assert_eq!(clusters.len(), 1);
    }

    #[test]
    fn near_coincident_pairs_stay_pairs() {
        let mut points = Vec::new();
        for g in 0..10 {
            let t = TAU * g as f64 / 10.0;
            let (cx, cy) = (50.0 * t.cos(), 50.0 * t.sin());
            points.push([cx, cy]);
            points.push([cx + 1e-4, cy]);
        }
        let clusters = cluster_points(&points, 2.0).unwrap();
        assert_eq!(clusters.len(), 10);
        assert!(clusters.iter().all(|c| c.len() == 2));
    }

    #[test]
    fn clustering_is_deterministic() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let points: Vec<[f64; 2]> = (0..30)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let a = cluster_points(&points, 2.0).unwrap();
        let b = cluster_points(&points, 2.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn factorization_of_equal_clusters() {
        let clusters: Vec<Vec<usize>> = (0..5).map(|g| (0..4).map(|q| 4 * g + q).collect()).collect();
        let f = infer_factorization(&clusters, 20).unwrap();
        assert_eq!((f.k, f.m), (5, 4));
    }

    #[test]
    fn residue_structure_is_detected() {
        // pairs {q, q+10} for P=20: residues match modulo 10
        let clusters: Vec<Vec<usize>> = (0..10).map(|q| vec![q, q + 10]).collect();
        let f = infer_factorization(&clusters, 20).unwrap();
        assert_eq!((f.k, f.m), (10, 2));
        assert_eq!(f.residue_modulus, Some(10));
    }

    #[test]
    fn unequal_clusters_are_rejected() {
        let clusters = vec![vec![0, 1, 2], vec![3, 4], vec![5, 6, 7, 8, 9]];
        assert!(infer_factorization(&clusters, 10).is_none());
        // k = 1 and k = p are trivial
        let single: Vec<Vec<usize>> = vec![(0..6).collect()];
        assert!(infer_factorization(&single, 6).is_none());
        let singletons: Vec<Vec<usize>> = (0..6).map(|i| vec![i]).collect();
        assert!(infer_factorization(&singletons, 6).is_none());
    }

    /// Rows whose leading two directions carry an injected 5x4 ring: each
    /// group sits on a tight square grid so the clusters are unambiguous.
    fn structured_rows(p: usize, groups: usize, dim: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let offsets = [[-0.05, -0.05], [-0.05, 0.05], [0.05, -0.05], [0.05, 0.05]];
        let mut rows = Array2::zeros((p, dim));
        for label in 0..p {
            let g = label % groups;
            let o = offsets[(label / groups) % offsets.len()];
            let t = TAU * g as f64 / groups as f64;
            rows[(label, 0)] = 50.0 * t.cos() + o[0];
            rows[(label, 1)] = 50.0 * t.sin() + o[1];
            for c in 2..dim {
                rows[(label, c)] = 0.001 * normal(&mut rng);
            }
        }
        rows
    }

    #[test]
    fn scan_detects_injected_structure_in_first_pair() {
        let rows = structured_rows(20, 5, 16, 13);
        let r = pca(rows.view()).unwrap();
        let f = scan_factorization(&r, 20, 3, 2.0).unwrap().unwrap();
        assert_eq!((f.k, f.m), (5, 4));
        assert_eq!(f.pair_index, Some(0));
        assert_eq!(f.k * f.m, 20);
    }

    #[test]
    fn prime_modulus_yields_no_factorization() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let rows = Array2::from_shape_fn((7, 12), |_| normal(&mut rng));
        let r = pca(rows.view()).unwrap();
        assert!(scan_factorization(&r, 7, 3, 2.0).unwrap().is_none());
    }
}
