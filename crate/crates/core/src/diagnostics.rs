//! Per-item PCA of response embeddings and a gaming/correct overlap measure,
//! emitted as plain data files for external plotting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{GoldLabel, Provenance};
use crate::embedding::EmbeddingVector;

/// One embedded response entering a projection.
#[derive(Debug, Clone)]
pub struct PcaInput {
    pub response_id: String,
    pub vector: EmbeddingVector,
    pub gold_label: GoldLabel,
    pub provenance: Provenance,
}

/// A point in the 2-component space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub response_id: String,
    pub x: f64,
    pub y: f64,
    pub gold_label: GoldLabel,
    pub provenance: Provenance,
}

/// Top-2 principal components of a response cloud.
#[derive(Debug, Clone)]
pub struct PcaProjection {
    /// Orthonormal directions, sign-fixed so the largest-magnitude entry is
    /// positive.
    pub components: [Vec<f64>; 2],
    pub explained_variance_ratio: [f64; 2],
    pub projected: Vec<ProjectedPoint>,
}

#[derive(Debug, thiserror::Error)]
pub enum PcaError {
    #[error("need at least 3 vectors, got {0}")]
    TooFewPoints(usize),
    #[error("need dimension >= 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("vectors have mixed dimensions")]
    MixedDimensions,
    #[error("all points are identical; covariance has rank 0")]
    DegenerateData,
    #[error("projection lacks a {0} group")]
    MissingGroup(&'static str),
}

/// Mean-center and extract the top-2 eigenvectors of the sample covariance by
/// power iteration with deflation.
#[allow(clippy::needless_range_loop)]
pub fn pca_fit(inputs: &[PcaInput]) -> Result<PcaProjection, PcaError> {
    let n = inputs.len();
    if n < 3 {
        return Err(PcaError::TooFewPoints(n));
    }
    let d = inputs[0].vector.dim();
    if d < 2 {
        return Err(PcaError::DimensionTooSmall(d));
    }
    if inputs.iter().any(|p| p.vector.dim() != d) {
        return Err(PcaError::MixedDimensions);
    }

    let mut mean = vec![0.0; d];
    for input in inputs {
        for (m, v) in mean.iter_mut().zip(&input.vector.values) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered: Vec<Vec<f64>> = inputs
        .iter()
        .map(|p| p.vector.values.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();

    // Sample covariance (divide by n - 1).
    let mut cov = vec![vec![0.0; d]; d];
    for row in &centered {
        for i in 0..d {
            if row[i] == 0.0 {
                continue;
            }
            for j in i..d {
                cov[i][j] += row[i] * row[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    let total_variance: f64 = (0..d).map(|i| cov[i][i]).sum();
    if total_variance <= 0.0 {
        return Err(PcaError::DegenerateData);
    }

    let (v1, lambda1) = dominant_eigenpair(&cov, None);
    let (v2, lambda2) = dominant_eigenpair(&cov, Some((&v1, lambda1)));
    let lambda1 = lambda1.max(0.0);
    let lambda2 = lambda2.max(0.0);

    let components = [fix_sign(v1), fix_sign(v2)];
    let ratio = [lambda1 / total_variance, lambda2 / total_variance];

    let projected = inputs
        .iter()
        .zip(&centered)
        .map(|(input, row)| ProjectedPoint {
            response_id: input.response_id.clone(),
            x: dot(row, &components[0]),
            y: dot(row, &components[1]),
            gold_label: input.gold_label,
            provenance: input.provenance,
        })
        .collect();

    Ok(PcaProjection { components, explained_variance_ratio: ratio, projected })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Power iteration on `cov`, deflating a previously found eigenpair when
/// given. Falls back to an arbitrary orthogonal unit vector with eigenvalue 0
/// when the deflated matrix is (numerically) zero, as happens for collinear
/// data.
fn dominant_eigenpair(cov: &[Vec<f64>], deflate: Option<(&[f64], f64)>) -> (Vec<f64>, f64) {
    let d = cov.len();
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; d];
        for i in 0..d {
            out[i] = dot(&cov[i], v);
        }
        if let Some((u, lambda)) = deflate {
            let proj = lambda * dot(u, v);
            for i in 0..d {
                out[i] -= proj * u[i];
            }
        }
        out
    };

    // Deterministic pseudo-random start, orthogonalized against the deflated
    // direction so the iteration cannot get stuck on it.
    let mut v: Vec<f64> = (0..d)
        .map(|i| {
            let h = crate::text::fnv1a(0xFACADE, &(i as u64).to_le_bytes());
            (h % 1000) as f64 / 1000.0 + 0.25
        })
        .collect();
    if let Some((u, _)) = deflate {
        let proj = dot(u, &v);
        for (vi, ui) in v.iter_mut().zip(u) {
            *vi -= proj * ui;
        }
    }
    normalize(&mut v);

    let mut eigenvalue = 0.0;
    for _ in 0..100_000 {
        let mut next = apply(&v);
        if let Some((u, _)) = deflate {
            // Re-orthogonalize to keep rounding error from reintroducing u.
            let proj = dot(u, &next);
            for (ni, ui) in next.iter_mut().zip(u) {
                *ni -= proj * ui;
            }
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-14 {
            // Deflated matrix is numerically zero: pick any unit vector
            // orthogonal to the deflated direction.
            let v = match deflate {
                Some((u, _)) => orthogonal_unit(u),
                None => {
                    let mut e = vec![0.0; d];
                    e[0] = 1.0;
                    e
                }
            };
            return (v, 0.0);
        }
        for x in &mut next {
            *x /= norm;
        }
        let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        // Sign flips between iterations mean a negative eigenvalue direction;
        // measure against the flipped vector too.
        let delta_flipped: f64 = next.iter().zip(&v).map(|(a, b)| (a + b).abs()).sum();
        v = next;
        eigenvalue = dot(&apply(&v), &v);
        if delta.min(delta_flipped) < 1e-15 {
            break;
        }
    }
    (v, eigenvalue)
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// A deterministic unit vector orthogonal to `u`.
fn orthogonal_unit(u: &[f64]) -> Vec<f64> {
    let d = u.len();
    // Start from the basis vector least aligned with u, then Gram-Schmidt.
    let k = (0..d).min_by(|&a, &b| u[a].abs().partial_cmp(&u[b].abs()).unwrap()).unwrap_or(0);
    let mut v = vec![0.0; d];
    v[k] = 1.0;
    let proj = dot(u, &v);
    for (vi, ui) in v.iter_mut().zip(u) {
        *vi -= proj * ui;
    }
    normalize(&mut v);
    v
}

/// Largest-magnitude entry made positive (first index on ties).
fn fix_sign(mut v: Vec<f64>) -> Vec<f64> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    v
}

/// Fraction of gaming points whose nearest real point in the projected plane
/// is a real correct response. Requires at least one gaming point and one
/// real correct point.
pub fn overlap_index(projection: &PcaProjection) -> Result<f64, PcaError> {
    let real: Vec<&ProjectedPoint> =
        projection.projected.iter().filter(|p| p.provenance == Provenance::Real).collect();
    let gaming: Vec<&ProjectedPoint> =
        projection.projected.iter().filter(|p| p.provenance.is_gaming()).collect();
    if gaming.is_empty() {
        return Err(PcaError::MissingGroup("gaming"));
    }
    if !real.iter().any(|p| p.gold_label == GoldLabel::Correct) {
        return Err(PcaError::MissingGroup("real-correct"));
    }

    let mut hits = 0usize;
    for g in &gaming {
        let mut nearest: Option<(f64, &ProjectedPoint)> = None;
        for r in &real {
            let d2 = (g.x - r.x).powi(2) + (g.y - r.y).powi(2);
            nearest = match nearest {
                None => Some((d2, r)),
                Some((best, _)) if d2 < best => Some((d2, r)),
                keep => keep,
            };
        }
        if nearest.expect("real group non-empty").1.gold_label == GoldLabel::Correct {
            hits += 1;
        }
    }
    Ok(hits as f64 / gaming.len() as f64)
}

/// CSV rows (`x,y,gold_label,provenance`) for one item's projection.
pub fn projection_to_csv(projection: &PcaProjection) -> String {
    let mut out = String::from("x,y,gold_label,provenance\n");
    for p in &projection.projected {
        let label = match p.gold_label {
            GoldLabel::Correct => "correct",
            GoldLabel::Incorrect => "incorrect",
        };
        out.push_str(&format!("{:?},{:?},{},{}\n", p.x, p.y, label, p.provenance.strategy_key()));
    }
    out
}

/// Sidecar payload stored next to each CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionSidecar {
    pub item_id: String,
    pub explained_variance_ratio: [f64; 2],
    pub overlap_index: Option<f64>,
    pub point_counts: BTreeMap<String, usize>,
}
