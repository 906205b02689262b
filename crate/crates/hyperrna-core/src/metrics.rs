//! Evaluation primitives: sequence recovery, Kabsch superposition RMSD,
//! distance-difference structure scoring, perplexity, and sample diversity.
//!
//! The superposition solves the orthogonal Procrustes problem with a
//! hand-rolled 3×3 SVD (Jacobi eigen-decomposition of the Gram matrix);
//! reflections are excluded by constructing right-handed singular bases, so
//! the result is always a proper rotation. An independent quaternion
//! grid-plus-refinement search is exported as a brute-force oracle.

use alloc::vec::Vec;
use core::fmt;

use crate::geom::{self, Mat3, Vec3, MAT3_IDENTITY};
use crate::mathf;
use crate::rng::Xoshiro256StarStar;
use crate::tensor::Tensor;

/// Neighborhood radius (Å) for distance-difference scoring.
pub const LDDT_RADIUS: f64 = 15.0;
/// The four canonical distance-difference thresholds (Å).
pub const LDDT_THRESHOLDS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricsError {
    LengthMismatch { expected: usize, got: usize },
    /// Superposition needs at least three points.
    TooFewPoints { got: usize },
    /// Point sets whose covariance has rank < 2 admit no unique rotation.
    DegenerateConfiguration,
    /// Diversity needs at least two samples.
    TooFewSamples { got: usize },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: {expected} vs {got}")
            }
            MetricsError::TooFewPoints { got } => {
                write!(f, "superposition needs >= 3 points, got {got}")
            }
            MetricsError::DegenerateConfiguration => {
                write!(f, "points are collinear or coincident")
            }
            MetricsError::TooFewSamples { got } => {
                write!(f, "diversity needs >= 2 samples, got {got}")
            }
        }
    }
}

impl core::error::Error for MetricsError {}

/// Fraction of positions where the two sequences agree.
pub fn recovery(truth: &str, predicted: &str) -> Result<f64, MetricsError> {
    let a: Vec<char> = truth.chars().collect();
    let b: Vec<char> = predicted.chars().collect();
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let matches = a.iter().zip(&b).filter(|(x, y)| x == y).count();
    Ok(matches as f64 / a.len() as f64)
}

/// Optimal rigid superposition of one point set onto another.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentResult {
    /// Proper rotation applied to the first (mobile) set.
    pub rotation: Mat3,
    /// Translation applied after the rotation.
    pub translation: Vec3,
    /// Root-mean-square deviation after superposition (Å).
    pub rmsd: f64,
}

fn centroid(points: &[Vec3]) -> Vec3 {
    let mut c = Vec3::ZERO;
    for &p in points {
        c = c + p;
    }
    c * (1.0 / points.len() as f64)
}

/// Jacobi eigen-decomposition of a symmetric 3×3 matrix. Returns
/// eigenvalues (descending) and the matching orthonormal eigenvectors as
/// matrix columns.
fn jacobi_eigen_sym3(m: &Mat3) -> ([f64; 3], Mat3) {
    let mut a = *m;
    let mut v = MAT3_IDENTITY;
    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off < 1e-30 {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq.abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = if theta >= 0.0 {
                1.0 / (theta + mathf::sqrt(theta * theta + 1.0))
            } else {
                -1.0 / (-theta + mathf::sqrt(theta * theta + 1.0))
            };
            let c = 1.0 / mathf::sqrt(t * t + 1.0);
            let s = t * c;
            let (app, aqq) = (a[p][p], a[q][q]);
            a[p][p] = app - t * apq;
            a[q][q] = aqq + t * apq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            for r in 0..3 {
                if r != p && r != q {
                    let (arp, arq) = (a[r][p], a[r][q]);
                    a[r][p] = c * arp - s * arq;
                    a[p][r] = a[r][p];
                    a[r][q] = s * arp + c * arq;
                    a[q][r] = a[r][q];
                }
            }
            for r in 0..3 {
                let (vrp, vrq) = (v[r][p], v[r][q]);
                v[r][p] = c * vrp - s * vrq;
                v[r][q] = s * vrp + c * vrq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    let evals = [a[0][0], a[1][1], a[2][2]];
    order.sort_by(|&i, &j| evals[j].total_cmp(&evals[i]));
    let sorted = [evals[order[0]], evals[order[1]], evals[order[2]]];
    let mut vecs = MAT3_IDENTITY;
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..3 {
            vecs[r][dst] = v[r][src];
        }
    }
    (sorted, vecs)
}

fn column(m: &Mat3, c: usize) -> Vec3 {
    Vec3::new(m[0][c], m[1][c], m[2][c])
}

fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
    [
        [c0.x(), c1.x(), c2.x()],
        [c0.y(), c1.y(), c2.y()],
        [c0.z(), c1.z(), c2.z()],
    ]
}

/// Least-squares rigid superposition of `p` onto `q` (Kabsch). The result
/// maps `p` as `rotation · p + translation`.
pub fn kabsch_align(p: &[Vec3], q: &[Vec3]) -> Result<AlignmentResult, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::LengthMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    if p.len() < 3 {
        return Err(MetricsError::TooFewPoints { got: p.len() });
    }
    let cp = centroid(p);
    let cq = centroid(q);
    // Covariance H = sum of outer products p'_i q'_i^T.
    let mut h: Mat3 = [[0.0; 3]; 3];
    for (&pi, &qi) in p.iter().zip(q) {
        let a = pi - cp;
        let b = qi - cq;
        let av = [a.x(), a.y(), a.z()];
        let bv = [b.x(), b.y(), b.z()];
        for r in 0..3 {
            for c in 0..3 {
                h[r][c] += av[r] * bv[c];
            }
        }
    }
    // Right singular vectors from the Gram matrix H^T H.
    let gram = geom::mat3_mul(&geom::mat3_transpose(&h), &h);
    let (evals, v) = jacobi_eigen_sym3(&gram);
    let sigma = [
        mathf::sqrt(evals[0].max(0.0)),
        mathf::sqrt(evals[1].max(0.0)),
        mathf::sqrt(evals[2].max(0.0)),
    ];
    if sigma[1] <= sigma[0] * 1e-9 || sigma[0] == 0.0 {
        return Err(MetricsError::DegenerateConfiguration);
    }
    // Right-handed bases: the third directions come from cross products, so
    // any reflection is absorbed as a sign flip of the smallest singular
    // direction and the product below is always a proper rotation.
    let v1 = column(&v, 0);
    let v2 = column(&v, 1);
    let v3 = v1.cross(v2);
    let u1 = geom::mat3_mul_vec(&h, v1) * (1.0 / sigma[0]);
    let u2 = geom::mat3_mul_vec(&h, v2) * (1.0 / sigma[1]);
    let u3 = u1.cross(u2);
    let v_mat = from_columns(v1, v2, v3);
    let u_mat = from_columns(u1, u2, u3);
    let rotation = geom::mat3_mul(&v_mat, &geom::mat3_transpose(&u_mat));
    let translation = cq - geom::mat3_mul_vec(&rotation, cp);
    let mut ss = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let moved = geom::mat3_mul_vec(&rotation, pi) + translation;
        ss += moved.dist(qi) * moved.dist(qi);
    }
    Ok(AlignmentResult {
        rotation,
        translation,
        rmsd: mathf::sqrt(ss / p.len() as f64),
    })
}

/// RMSD of `p` onto `q` under a fixed rotation with the optimal translation
/// (centroid matching).
fn rmsd_for_rotation(p: &[Vec3], q: &[Vec3], r: &Mat3) -> f64 {
    let cp = centroid(p);
    let cq = centroid(q);
    let mut ss = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let moved = geom::mat3_mul_vec(r, pi - cp);
        let target = qi - cq;
        ss += moved.dist(target) * moved.dist(target);
    }
    mathf::sqrt(ss / p.len() as f64)
}

fn quaternion_normalize(q: [f64; 4]) -> Option<[f64; 4]> {
    let n = mathf::sqrt(q.iter().map(|x| x * x).sum());
    if n < 1e-6 {
        return None;
    }
    Some([q[0] / n, q[1] / n, q[2] / n, q[3] / n])
}

/// Brute-force minimal RMSD: coarse quaternion grid followed by seeded
/// random refinement. Independent of the SVD path; used as an oracle.
pub fn grid_search_rmsd(
    p: &[Vec3],
    q: &[Vec3],
    rng: &mut Xoshiro256StarStar,
) -> Result<f64, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::LengthMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    if p.len() < 3 {
        return Err(MetricsError::TooFewPoints { got: p.len() });
    }
    const GRID: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut best_q = [1.0, 0.0, 0.0, 0.0];
    let mut best = rmsd_for_rotation(p, q, &geom::rotation_from_quaternion(best_q));
    for &w in &GRID {
        for &x in &GRID {
            for &y in &GRID {
                for &z in &GRID {
                    if let Some(unit) = quaternion_normalize([w, x, y, z]) {
                        let r = geom::rotation_from_quaternion(unit);
                        let val = rmsd_for_rotation(p, q, &r);
                        if val < best {
                            best = val;
                            best_q = unit;
                        }
                    }
                }
            }
        }
    }
    let mut scale = 0.3;
    for iter in 0..1200 {
        if iter % 100 == 99 {
            scale *= 0.5;
        }
        let cand = [
            best_q[0] + scale * rng.normal(),
            best_q[1] + scale * rng.normal(),
            best_q[2] + scale * rng.normal(),
            best_q[3] + scale * rng.normal(),
        ];
        if let Some(unit) = quaternion_normalize(cand) {
            let val = rmsd_for_rotation(p, q, &geom::rotation_from_quaternion(unit));
            if val < best {
                best = val;
                best_q = unit;
            }
        }
    }
    Ok(best)
}

/// Distance-difference score of a model against a reference.
///
/// Over all unordered reference pairs within `radius` and sequence
/// separation ≥ 2: the fraction whose model distance deviates by less than
/// each threshold, averaged across thresholds. No qualifying pairs scores a
/// vacuous 1.0.
pub fn lddt(
    reference: &[Vec3],
    model: &[Vec3],
    radius: f64,
    thresholds: &[f64],
) -> Result<f64, MetricsError> {
    if reference.len() != model.len() {
        return Err(MetricsError::LengthMismatch {
            expected: reference.len(),
            got: model.len(),
        });
    }
    let n = reference.len();
    let mut pairs = 0usize;
    let mut preserved = alloc::vec![0usize; thresholds.len()];
    for i in 0..n {
        for j in i + 1..n {
            if j - i < 2 {
                continue;
            }
            let d_ref = reference[i].dist(reference[j]);
            if d_ref >= radius {
                continue;
            }
            pairs += 1;
            let diff = (model[i].dist(model[j]) - d_ref).abs();
            for (t, &thr) in thresholds.iter().enumerate() {
                if diff < thr {
                    preserved[t] += 1;
                }
            }
        }
    }
    if pairs == 0 {
        return Ok(1.0);
    }
    let mut score = 0.0;
    for &count in &preserved {
        score += count as f64 / pairs as f64;
    }
    Ok(score / thresholds.len() as f64)
}

/// exp(mean per-position cross-entropy) of true bases under `[L, 4]` logits.
pub fn perplexity(logits: &Tensor, targets: &[usize]) -> Result<f64, MetricsError> {
    let rows = logits.shape()[0];
    if rows != targets.len() {
        return Err(MetricsError::LengthMismatch {
            expected: rows,
            got: targets.len(),
        });
    }
    if rows == 0 {
        return Ok(1.0);
    }
    let cols = logits.shape()[1];
    let mut total = 0.0;
    for (row, &t) in targets.iter().enumerate() {
        let vals: Vec<f64> = (0..cols).map(|c| logits.get2(row, c)).collect();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = vals.iter().map(|v| mathf::exp(v - max)).sum();
        total -= vals[t] - max - mathf::ln(z);
    }
    Ok(mathf::exp(total / rows as f64))
}

/// Mean pairwise normalized Hamming distance across equal-length samples.
pub fn sequence_diversity(samples: &[&str]) -> Result<f64, MetricsError> {
    if samples.len() < 2 {
        return Err(MetricsError::TooFewSamples {
            got: samples.len(),
        });
    }
    let seqs: Vec<Vec<char>> = samples.iter().map(|s| s.chars().collect()).collect();
    let len = seqs[0].len();
    for s in &seqs {
        if s.len() != len {
            return Err(MetricsError::LengthMismatch {
                expected: len,
                got: s.len(),
            });
        }
    }
    if len == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..seqs.len() {
        for j in i + 1..seqs.len() {
            let mismatches = seqs[i]
                .iter()
                .zip(&seqs[j])
                .filter(|(a, b)| a != b)
                .count();
            total += mismatches as f64 / len as f64;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Sample mean and standard error of the mean (n−1 variance; 0 for n ≤ 1).
pub fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, mathf::sqrt(var) / mathf::sqrt(n))
}
