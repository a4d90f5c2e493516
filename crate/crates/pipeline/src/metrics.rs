//! Strand-matching metrics (precision/recall/F-score) and the unsupervised
//! geometry-consistency suite: length, curvature and direction statistics in
//! local (k-nearest-root) and global variants, plus tip coverage.

use fur_core::{knn::KdTree, sample, vec3, Mesh, Pcg32};

use crate::losses::bending_signature_set_variance;
use crate::strand::StrandSet;
use crate::{Error, Result};

/// A resampled strand point with its local (signed) direction.
#[derive(Clone, Copy, Debug)]
pub struct DirectedPoint {
    pub position: [f64; 3],
    pub direction: [f64; 3],
}

/// Uniform-by-arc-length resampling of a strand set into a point budget.
pub fn resample_directed_points(
    strands: &StrandSet,
    budget: usize,
    seed: u64,
) -> Result<Vec<DirectedPoint>> {
    if strands.is_empty() {
        return Err(Error::InvalidInput("empty strand set".into()));
    }
    if budget == 0 {
        return Err(Error::InvalidInput("zero point budget".into()));
    }
    // Cumulative arc-length table over all segments of all strands.
    let mut cumulative = Vec::new();
    let mut segments = Vec::new();
    let mut total = 0.0;
    for s in &strands.strands {
        for w in s.points.windows(2) {
            let len = vec3::dist(w[0], w[1]);
            if len <= 0.0 {
                continue;
            }
            total += len;
            cumulative.push(total);
            segments.push((w[0], w[1], len));
        }
    }
    if total <= 0.0 {
        return Err(Error::InvalidInput("strand set has zero total length".into()));
    }
    let mut rng = Pcg32::new(seed, 0x9e37);
    let mut out = Vec::with_capacity(budget);
    for _ in 0..budget {
        let target = rng.next_f64() * total;
        let idx = cumulative.partition_point(|&c| c <= target).min(segments.len() - 1);
        let (a, b, len) = segments[idx];
        let t = rng.next_f64();
        out.push(DirectedPoint {
            position: vec3::lerp(a, b, t),
            direction: vec3::scale(vec3::sub(b, a), 1.0 / len),
        });
    }
    Ok(out)
}

fn undirected_angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = vec3::dot(a, b).abs().clamp(0.0, 1.0);
    c.acos().to_degrees()
}

/// Precision/recall/F-score (percent) between directed point samples.
/// A predicted point is a true positive when some ground-truth point lies
/// within `dist_thresh_cm` and within `angle_thresh_deg` (undirected).
pub fn precision_recall_f(
    pred: &[DirectedPoint],
    gt: &[DirectedPoint],
    dist_thresh_cm: f64,
    angle_thresh_deg: f64,
) -> Result<(f64, f64, f64)> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::InvalidInput("empty point set".into()));
    }
    let matched_percent = |from: &[DirectedPoint], to: &[DirectedPoint]| -> f64 {
        let positions: Vec<[f64; 3]> = to.iter().map(|p| p.position).collect();
        let tree = KdTree::build(&positions);
        let r2 = dist_thresh_cm * dist_thresh_cm;
        let mut hits = 0usize;
        for p in from {
            let near = tree.within_radius2(p.position, r2);
            if near
                .iter()
                .any(|&i| undirected_angle_deg(p.direction, to[i].direction) <= angle_thresh_deg)
            {
                hits += 1;
            }
        }
        100.0 * hits as f64 / from.len() as f64
    };
    let precision = matched_percent(pred, gt);
    let recall = matched_percent(gt, pred);
    let f = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((precision, recall, f))
}

fn strand_roots(strands: &StrandSet) -> Vec<[f64; 3]> {
    strands.strands.iter().map(|s| s.points[0]).collect()
}

/// k nearest neighbor strands of every strand by root position, self
/// excluded.
fn root_knn(strands: &StrandSet, k: usize) -> Result<Vec<Vec<usize>>> {
    if k + 1 > strands.len() {
        return Err(Error::InvalidInput(format!(
            "k = {k} needs at least {} strands, have {}",
            k + 1,
            strands.len()
        )));
    }
    let roots = strand_roots(strands);
    let tree = KdTree::build(&roots);
    Ok((0..strands.len())
        .map(|i| {
            tree.nearest_k(roots[i], k + 1)
                .into_iter()
                .map(|(j, _)| j)
                .filter(|&j| j != i)
                .take(k)
                .collect()
        })
        .collect())
}

/// Length statistics: global mean and standard deviation plus the local
/// (k-nearest-root) length deviation.
pub struct LengthStats {
    pub mean: f64,
    pub std_dev: f64,
    pub local_sigma: f64,
}

pub fn length_stats(strands: &StrandSet, k: usize) -> Result<LengthStats> {
    if strands.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 strands".into()));
    }
    let lengths: Vec<f64> = strands.strands.iter().map(|s| s.arc_length()).collect();
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let var = lengths.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
    let neighbors = root_knn(strands, k)?;
    let mut acc = 0.0;
    for (i, ns) in neighbors.iter().enumerate() {
        let mut local = 0.0;
        for &j in ns {
            let d = lengths[i] - lengths[j];
            local += d * d;
        }
        acc += local / k as f64;
    }
    Ok(LengthStats {
        mean,
        std_dev: var.sqrt(),
        local_sigma: (acc / n).sqrt(),
    })
}

/// Curvature statistics: global signature variance (identical to the shape
/// loss), the k-nearest-neighbor pairwise signature variance, and the
/// maximum bending angle.
pub struct CurvatureStats {
    pub var_global: f64,
    pub var_local: f64,
    pub kappa_max: f64,
}

pub fn curvature_stats(strands: &StrandSet, k: usize) -> Result<CurvatureStats> {
    if strands.points_per_strand < 3 {
        return Err(Error::InvalidInput("strands need at least 3 points".into()));
    }
    let signatures: Vec<Vec<f64>> = strands
        .strands
        .iter()
        .map(|s| crate::losses::bending_signature(&s.points))
        .collect();
    let var_global = bending_signature_set_variance(&signatures);
    let kappa_max = signatures
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, &t| acc.max(t));
    let neighbors = root_knn(strands, k)?;
    let m = strands.points_per_strand - 2;
    let mut acc = 0.0;
    for (i, ns) in neighbors.iter().enumerate() {
        let mut local = 0.0;
        for &j in ns {
            let mut pair = 0.0;
            for l in 0..m {
                let d = signatures[i][l] - signatures[j][l];
                pair += d * d;
            }
            local += pair / m as f64;
        }
        acc += local / k as f64;
    }
    Ok(CurvatureStats {
        var_global,
        var_local: acc / strands.len() as f64,
        kappa_max,
    })
}

/// Normalized mean tangent of one strand.
fn mean_tangent(points: &[[f64; 3]]) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for w in points.windows(2) {
        if let Some(b) = vec3::normalized(vec3::sub(w[1], w[0])) {
            acc = vec3::add(acc, b);
        }
    }
    vec3::normalized(vec3::scale(acc, 1.0 / (points.len() - 1) as f64)).unwrap_or([0.0; 3])
}

/// Direction statistics: local variance of the whole-strand mean tangent and
/// of the first segment direction (both signed).
pub struct DirectionStats {
    pub var_local_mean: f64,
    pub var_local_first: f64,
}

pub fn direction_stats(strands: &StrandSet, k: usize) -> Result<DirectionStats> {
    let tangents: Vec<[f64; 3]> = strands
        .strands
        .iter()
        .map(|s| mean_tangent(&s.points))
        .collect();
    let firsts: Vec<[f64; 3]> = strands
        .strands
        .iter()
        .map(|s| {
            vec3::normalized(vec3::sub(s.points[1], s.points[0])).unwrap_or([0.0; 3])
        })
        .collect();
    let neighbors = root_knn(strands, k)?;
    let mut acc_mean = 0.0;
    let mut acc_first = 0.0;
    for (i, ns) in neighbors.iter().enumerate() {
        let mut local_mean = 0.0;
        let mut local_first = 0.0;
        for &j in ns {
            local_mean += vec3::dist2(tangents[i], tangents[j]);
            local_first += vec3::dist2(firsts[i], firsts[j]);
        }
        acc_mean += local_mean / k as f64;
        acc_first += local_first / k as f64;
    }
    let n = strands.len() as f64;
    Ok(DirectionStats {
        var_local_mean: acc_mean / n,
        var_local_first: acc_first / n,
    })
}

/// Two-way Chamfer between strand tips and area-weighted samples of the
/// outer surface (sum of the two directional mean squared distances).
pub fn tip_chamfer(
    strands: &StrandSet,
    outer_mesh: &Mesh,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if strands.is_empty() {
        return Err(Error::InvalidInput("empty strand set".into()));
    }
    let tips: Vec<[f64; 3]> = strands
        .strands
        .iter()
        .map(|s| *s.points.last().unwrap())
        .collect();
    let samples = sample::sample_surface(outer_mesh, n_samples, seed)?;
    let surface: Vec<[f64; 3]> = samples.iter().map(|s| s.position).collect();
    let tip_tree = KdTree::build(&tips);
    let surf_tree = KdTree::build(&surface);
    let forward = tips
        .iter()
        .map(|&t| surf_tree.nearest_one(t).unwrap().1)
        .sum::<f64>()
        / tips.len() as f64;
    let backward = surface
        .iter()
        .map(|&s| tip_tree.nearest_one(s).unwrap().1)
        .sum::<f64>()
        / surface.len() as f64;
    Ok(forward + backward)
}

/// The full unsupervised suite in one record (column order of the summary
/// table: length mean/std, local length sigma, global curvature variance,
/// local curvature variance, max bending, local direction variances, tip
/// Chamfer).
pub struct UnsupervisedReport {
    pub length: LengthStats,
    pub curvature: CurvatureStats,
    pub direction: DirectionStats,
    pub tip_cd: Option<f64>,
}

pub fn unsupervised_report(
    strands: &StrandSet,
    k: usize,
    outer_mesh: Option<&Mesh>,
    seed: u64,
) -> Result<UnsupervisedReport> {
    Ok(UnsupervisedReport {
        length: length_stats(strands, k)?,
        curvature: curvature_stats(strands, k)?,
        direction: direction_stats(strands, k)?,
        tip_cd: match outer_mesh {
            Some(mesh) => Some(tip_chamfer(strands, mesh, 20000, seed)?),
            None => None,
        },
    })
}
