//! Geometric loss terms over strand sets, with analytic gradients with
//! respect to the strand points.
//!
//! All reductions run in a fixed order (parallel maps land in indexed slots)
//! so loss values are bitwise reproducible.

use rayon::prelude::*;

use fur_core::{vec3, Grid, KdTree};

use crate::strand::StrandSet;
use crate::{Error, Result};

/// Loss weights of the combined objective.
#[derive(Clone, Copy, Debug)]
pub struct LossWeights {
    pub sil: f64,
    pub dir: f64,
    pub dir_ann: f64,
    pub chm: f64,
    pub penetr: f64,
    pub shape: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            sil: 0.1,
            dir: 1000.0,
            dir_ann: 1.0,
            chm: 20.0,
            penetr: 1.0,
            shape: 0.01,
        }
    }
}

/// Per-strand, per-point gradients.
pub type PointGrads = Vec<Vec<[f64; 3]>>;

pub fn zero_grads(strands: &StrandSet) -> PointGrads {
    strands
        .strands
        .iter()
        .map(|s| vec![[0.0; 3]; s.points.len()])
        .collect()
}

fn flatten_points(strands: &StrandSet) -> (Vec<[f64; 3]>, Vec<(usize, usize)>) {
    let mut points = Vec::new();
    let mut owners = Vec::new();
    for (i, s) in strands.strands.iter().enumerate() {
        for (l, &p) in s.points.iter().enumerate() {
            points.push(p);
            owners.push((i, l));
        }
    }
    (points, owners)
}

/// One-way Chamfer: mean squared distance from each surface sample to its
/// nearest strand point. The nearest point is treated as fixed within a step
/// (no gradient through the argmin).
pub fn chamfer_one_way(
    surface_samples: &[[f64; 3]],
    strands: &StrandSet,
) -> Result<(f64, PointGrads)> {
    if strands.is_empty() {
        return Err(Error::InvalidInput("empty strand set".into()));
    }
    if surface_samples.is_empty() {
        return Err(Error::InvalidInput("no surface samples".into()));
    }
    let (points, owners) = flatten_points(strands);
    let tree = KdTree::build(&points);
    let hits: Vec<(usize, f64)> = surface_samples
        .par_iter()
        .map(|&x| tree.nearest_one(x).expect("non-empty point set"))
        .collect();
    let inv_k = 1.0 / surface_samples.len() as f64;
    let mut value = 0.0;
    let mut grads = zero_grads(strands);
    for (sample, &(idx, d2)) in surface_samples.iter().zip(&hits) {
        value += d2 * inv_k;
        let (i, l) = owners[idx];
        let g = vec3::scale(vec3::sub(points[idx], *sample), 2.0 * inv_k);
        grads[i][l] = vec3::add(grads[i][l], g);
    }
    Ok((value, grads))
}

/// Hinge on the de-furred field: mean over all strand points of
/// max(0, -SDF_defur). Points outside the grid box are counted and evaluate
/// through the box-extended field (positive there, so the hinge is inactive).
pub fn penetration_loss(strands: &StrandSet, sdf: &Grid) -> Result<(f64, PointGrads, usize)> {
    if strands.is_empty() {
        return Err(Error::InvalidInput("empty strand set".into()));
    }
    let total_points: usize = strands.strands.iter().map(|s| s.points.len()).sum();
    let inv_n = 1.0 / total_points as f64;
    let per_strand: Vec<(f64, Vec<[f64; 3]>, usize)> = strands
        .strands
        .par_iter()
        .map(|s| {
            let mut value = 0.0;
            let mut grad = vec![[0.0; 3]; s.points.len()];
            let mut outside = 0;
            for (l, &p) in s.points.iter().enumerate() {
                if !sdf.contains(p) {
                    outside += 1;
                }
                let (v, g) = sdf.sample_with_gradient(p);
                if v < 0.0 {
                    value += -v * inv_n;
                    grad[l] = vec3::scale(g, -inv_n);
                }
            }
            (value, grad, outside)
        })
        .collect();
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(strands.len());
    let mut clamped = 0;
    for (v, g, o) in per_strand {
        value += v;
        grads.push(g);
        clamped += o;
    }
    Ok((value, grads, clamped))
}

/// Root-to-tip weighted hinge on segment alignment with the annotated growth
/// direction: (1/(N(L-1))) sum_i sum_l w_l max(0, -b_l . g_i) with
/// w_l = (l-1)/(L-1).
pub fn direction_consistency_loss(
    strands: &StrandSet,
    growth_dirs: &[[f64; 3]],
) -> Result<(f64, PointGrads)> {
    if strands.is_empty() {
        return Err(Error::InvalidInput("empty strand set".into()));
    }
    if growth_dirs.len() != strands.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} growth directions for {} strands",
            growth_dirs.len(),
            strands.len()
        )));
    }
    let n_pts = strands.points_per_strand;
    let n_segs = n_pts - 1;
    let norm = 1.0 / (strands.len() as f64 * n_segs as f64);
    let per_strand: Vec<(f64, Vec<[f64; 3]>)> = strands
        .strands
        .par_iter()
        .zip(growth_dirs.par_iter())
        .map(|(s, &g_dir)| {
            let mut value = 0.0;
            let mut grad = vec![[0.0; 3]; s.points.len()];
            for seg in 0..s.points.len() - 1 {
                let w = seg as f64 / n_segs as f64; // (l-1)/(L-1), l = seg+1
                if w == 0.0 {
                    continue;
                }
                let d = vec3::sub(s.points[seg + 1], s.points[seg]);
                let len = vec3::norm(d);
                if len <= 1e-300 {
                    continue;
                }
                let b = vec3::scale(d, 1.0 / len);
                let align = vec3::dot(b, g_dir);
                if align < 0.0 {
                    value += norm * w * (-align);
                    // d(-b.g)/dd = -(g - (b.g) b)/|d|
                    let coeff = norm * w / len;
                    let db = vec3::scale(vec3::sub(vec3::scale(b, align), g_dir), coeff);
                    grad[seg + 1] = vec3::add(grad[seg + 1], db);
                    grad[seg] = vec3::sub(grad[seg], db);
                }
            }
            (value, grad)
        })
        .collect();
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(strands.len());
    for (v, g) in per_strand {
        value += v;
        grads.push(g);
    }
    Ok((value, grads))
}

/// Bending-angle signatures per strand.
///
/// theta_l = arccos(clamp(b_{l-1} . b_l)) at each interior junction.
pub fn bending_signature(points: &[[f64; 3]]) -> Vec<f64> {
    let mut theta = Vec::with_capacity(points.len().saturating_sub(2));
    for j in 1..points.len() - 1 {
        let b0 = vec3::normalized(vec3::sub(points[j], points[j - 1])).unwrap_or([0.0; 3]);
        let b1 = vec3::normalized(vec3::sub(points[j + 1], points[j])).unwrap_or([0.0; 3]);
        let c = vec3::dot(b0, b1).clamp(-1.0, 1.0);
        theta.push(c.acos());
    }
    theta
}

/// Population variance of a set of bending signatures around their mean:
/// (1/N) sum_i (1/(L-2)) || theta_i - theta_mean ||^2.
pub fn bending_signature_set_variance(signatures: &[Vec<f64>]) -> f64 {
    if signatures.is_empty() || signatures[0].is_empty() {
        return 0.0;
    }
    let n = signatures.len() as f64;
    let m = signatures[0].len();
    let mut mean = vec![0.0; m];
    for sig in signatures {
        for (mu, t) in mean.iter_mut().zip(sig) {
            *mu += t / n;
        }
    }
    let mut acc = 0.0;
    for sig in signatures {
        for (t, mu) in sig.iter().zip(&mean) {
            acc += (t - mu) * (t - mu);
        }
    }
    acc / n / m as f64
}

/// Curvature consistency: population variance of bending signatures around
/// the per-step mean signature (treated as a constant during
/// differentiation).
pub fn curvature_consistency_loss(strands: &StrandSet) -> Result<(f64, PointGrads)> {
    if strands.is_empty() {
        return Err(Error::InvalidInput("empty strand set".into()));
    }
    let n_pts = strands.points_per_strand;
    if n_pts < 3 {
        return Err(Error::InvalidInput("strands need at least 3 points".into()));
    }
    let n_angles = n_pts - 2;
    let signatures: Vec<Vec<f64>> = strands
        .strands
        .par_iter()
        .map(|s| bending_signature(&s.points))
        .collect();
    let mut mean = vec![0.0; n_angles];
    for sig in &signatures {
        for (m, t) in mean.iter_mut().zip(sig) {
            *m += t;
        }
    }
    let inv_n = 1.0 / strands.len() as f64;
    for m in mean.iter_mut() {
        *m *= inv_n;
    }

    let mut value = 0.0;
    for sig in &signatures {
        for (t, m) in sig.iter().zip(&mean) {
            value += (t - m) * (t - m);
        }
    }
    value *= inv_n / n_angles as f64;

    let grads: Vec<Vec<[f64; 3]>> = strands
        .strands
        .par_iter()
        .zip(signatures.par_iter())
        .map(|(s, sig)| {
            let mut grad = vec![[0.0; 3]; s.points.len()];
            for j in 1..s.points.len() - 1 {
                let d_theta = 2.0 * inv_n / n_angles as f64 * (sig[j - 1] - mean[j - 1]);
                if d_theta == 0.0 {
                    continue;
                }
                let d0 = vec3::sub(s.points[j], s.points[j - 1]);
                let d1 = vec3::sub(s.points[j + 1], s.points[j]);
                let (l0, l1) = (vec3::norm(d0), vec3::norm(d1));
                if l0 <= 1e-300 || l1 <= 1e-300 {
                    continue;
                }
                let b0 = vec3::scale(d0, 1.0 / l0);
                let b1 = vec3::scale(d1, 1.0 / l1);
                let c = vec3::dot(b0, b1);
                // Clamp-aware masking: no gradient at or beyond the clamp.
                if c.abs() >= 1.0 - 1e-12 {
                    continue;
                }
                let dacos = -1.0 / (1.0 - c * c).sqrt();
                let coeff = d_theta * dacos;
                // dc/dd0 = (b1 - c b0)/l0 ; dc/dd1 = (b0 - c b1)/l1
                let dc_d0 = vec3::scale(vec3::sub(b1, vec3::scale(b0, c)), 1.0 / l0);
                let dc_d1 = vec3::scale(vec3::sub(b0, vec3::scale(b1, c)), 1.0 / l1);
                let g0 = vec3::scale(dc_d0, coeff);
                let g1 = vec3::scale(dc_d1, coeff);
                // d0 = p_j - p_{j-1}; d1 = p_{j+1} - p_j.
                grad[j - 1] = vec3::sub(grad[j - 1], g0);
                grad[j] = vec3::add(grad[j], vec3::sub(g0, g1));
                grad[j + 1] = vec3::add(grad[j + 1], g1);
            }
            grad
        })
        .collect();

    Ok((value, grads))
}

/// Inputs of the geometric objective.
pub struct GeometricInputs<'a> {
    /// Random points sampled from the full (furred) surface.
    pub surface_samples: &'a [[f64; 3]],
    /// De-furred signed-distance grid for the penetration hinge.
    pub defurred_sdf: &'a Grid,
    /// Per-strand annotated growth direction (unit).
    pub growth_dirs: &'a [[f64; 3]],
}

/// Per-term values of one evaluation, before weighting.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossBreakdown {
    pub chm: f64,
    pub penetr: f64,
    pub dir_ann: f64,
    pub shape: f64,
    pub sil: f64,
    pub dir: f64,
    pub total: f64,
    pub clamped_points: usize,
}

/// Weighted sum of the geometric terms; image-domain terms (silhouette and
/// orientation), when already evaluated by the rasterized path, are folded in
/// through `extra`.
pub fn total_geometric_loss(
    strands: &StrandSet,
    inputs: &GeometricInputs,
    weights: &LossWeights,
    extra: Option<(f64, f64, &PointGrads, &PointGrads)>,
) -> Result<(f64, PointGrads, LossBreakdown)> {
    let mut grads = zero_grads(strands);
    let mut breakdown = LossBreakdown::default();

    let accumulate = |value: f64, weight: f64, term: &PointGrads, grads: &mut PointGrads| {
        if weight == 0.0 {
            return 0.0;
        }
        for (gs, ts) in grads.iter_mut().zip(term) {
            for (g, t) in gs.iter_mut().zip(ts) {
                *g = vec3::add_scaled(*g, *t, weight);
            }
        }
        weight * value
    };

    let mut total = 0.0;
    if weights.chm != 0.0 {
        let (v, g) = chamfer_one_way(inputs.surface_samples, strands)?;
        breakdown.chm = v;
        total += accumulate(v, weights.chm, &g, &mut grads);
    }
    if weights.penetr != 0.0 {
        let (v, g, clamped) = penetration_loss(strands, inputs.defurred_sdf)?;
        breakdown.penetr = v;
        breakdown.clamped_points = clamped;
        total += accumulate(v, weights.penetr, &g, &mut grads);
    }
    if weights.dir_ann != 0.0 {
        let (v, g) = direction_consistency_loss(strands, inputs.growth_dirs)?;
        breakdown.dir_ann = v;
        total += accumulate(v, weights.dir_ann, &g, &mut grads);
    }
    if weights.shape != 0.0 {
        let (v, g) = curvature_consistency_loss(strands)?;
        breakdown.shape = v;
        total += accumulate(v, weights.shape, &g, &mut grads);
    }
    if let Some((sil, dir, sil_g, dir_g)) = extra {
        breakdown.sil = sil;
        breakdown.dir = dir;
        total += accumulate(sil, weights.sil, sil_g, &mut grads);
        total += accumulate(dir, weights.dir, dir_g, &mut grads);
    }
    breakdown.total = total;
    Ok((total, grads, breakdown))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strand::Strand;
    use fur_core::Pcg32;

    fn straight_strand(origin: [f64; 3], dir: [f64; 3], len: f64, n: usize) -> Strand {
        let points = (0..n)
            .map(|l| vec3::add_scaled(origin, dir, len * l as f64 / (n - 1) as f64))
            .collect();
        Strand {
            points,
            root_face: 0,
            label: 0,
        }
    }

    fn set_of(strands: Vec<Strand>) -> StrandSet {
        StrandSet {
            points_per_strand: strands[0].points.len(),
            strands,
        }
    }

    fn random_strand_set(rng: &mut Pcg32, n_strands: usize, n_pts: usize) -> StrandSet {
        let strands = (0..n_strands)
            .map(|_| {
                let mut points = vec![[
                    rng.next_f64() * 2.0 - 1.0,
                    rng.next_f64() * 2.0 - 1.0,
                    rng.next_f64() * 2.0 - 1.0,
                ]];
                for _ in 1..n_pts {
                    let last = *points.last().unwrap();
                    points.push([
                        last[0] + (rng.next_f64() - 0.3) * 0.2,
                        last[1] + (rng.next_f64() - 0.3) * 0.2,
                        last[2] + (rng.next_f64() - 0.3) * 0.2,
                    ]);
                }
                Strand {
                    points,
                    root_face: 0,
                    label: 0,
                }
            })
            .collect();
        StrandSet {
            points_per_strand: n_pts,
            strands,
        }
    }

    #[test]
    fn chamfer_zero_when_strand_hits_samples() {
        let strand = straight_strand([0.0; 3], [1.0, 0.0, 0.0], 1.0, 5);
        let samples: Vec<[f64; 3]> = strand.points.clone();
        let set = set_of(vec![strand]);
        let (v, _) = chamfer_one_way(&samples, &set).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn chamfer_single_sample_squared_distance() {
        let strand = straight_strand([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0], 2.0, 21);
        let set = set_of(vec![strand]);
        let (v, _) = chamfer_one_way(&[[0.0, 0.0, 1.0]], &set).unwrap();
        // Nearest polyline point is (0,0,0) (it lies on the sampling grid).
        assert!((v - 1.0).abs() < 1e-12, "v = {v}");
    }

    #[test]
    fn chamfer_ignores_remote_points() {
        let near = straight_strand([0.0; 3], [1.0, 0.0, 0.0], 1.0, 5);
        let far = straight_strand([100.0, 100.0, 100.0], [0.0, 1.0, 0.0], 1.0, 5);
        let samples = vec![[0.5, 0.2, 0.0], [0.9, -0.1, 0.3]];
        let (v1, _) = chamfer_one_way(&samples, &set_of(vec![near.clone()])).unwrap();
        let (v2, _) = chamfer_one_way(&samples, &set_of(vec![near, far])).unwrap();
        assert!((v1 - v2).abs() < 1e-15);
    }

    #[test]
    fn penetration_cases() {
        // Sphere SDF of radius 1: inside points penalized.
        let sdf = Grid::analytic_sphere(1.0, 2.0, 32);
        let outside = straight_strand([1.5, 0.0, 0.0], [1.0, 0.0, 0.0], 0.3, 4);
        let (v, _, _) = penetration_loss(&set_of(vec![outside]), &sdf).unwrap();
        assert_eq!(v, 0.0);

        // One point well inside among L points of one strand: value ~ depth/L.
        let n = 10;
        let mut pts: Vec<[f64; 3]> = (0..n)
            .map(|l| [1.2 + 0.1 * l as f64, 0.0, 0.0])
            .collect();
        pts[0] = [0.7, 0.0, 0.0]; // sdf = -0.3
        let set = set_of(vec![Strand {
            points: pts,
            root_face: 0,
            label: 0,
        }]);
        let (v, _, _) = penetration_loss(&set, &sdf).unwrap();
        assert!((v - 0.3 / n as f64).abs() < 0.02 / n as f64, "v = {v}");
    }

    #[test]
    fn direction_loss_formula_cases() {
        let g = [0.0, 0.0, 1.0];
        // Aligned: hinge inactive.
        let aligned = straight_strand([0.0; 3], g, 1.0, 6);
        let (v, _) = direction_consistency_loss(&set_of(vec![aligned]), &[g]).unwrap();
        assert_eq!(v, 0.0);

        // Three points, both segments anti-parallel: (1/2)(0*1 + 0.5*1).
        let anti = straight_strand([0.0; 3], [0.0, 0.0, -1.0], 1.0, 3);
        let (v, _) = direction_consistency_loss(&set_of(vec![anti]), &[g]).unwrap();
        assert!((v - 0.25).abs() < 1e-12, "v = {v}");
    }

    #[test]
    fn curvature_loss_zero_for_congruent() {
        let a = straight_strand([0.0; 3], [1.0, 0.0, 0.0], 1.0, 8);
        let b = straight_strand([5.0, 1.0, 2.0], [0.0, 1.0, 0.0], 1.0, 8);
        let (v, _) = curvature_consistency_loss(&set_of(vec![a, b])).unwrap();
        assert!(v.abs() < 1e-18);
    }

    #[test]
    fn curvature_loss_direct_formula() {
        // Two straight strands and one with a right-angle bend; compare to a
        // direct evaluation of the formula.
        let s1 = straight_strand([0.0; 3], [1.0, 0.0, 0.0], 1.0, 5);
        let s2 = straight_strand([2.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0, 5);
        let bent = Strand {
            points: vec![
                [0.0, 0.0, 5.0],
                [0.5, 0.0, 5.0],
                [1.0, 0.0, 5.0],
                [1.0, 0.5, 5.0],
                [1.0, 1.0, 5.0],
            ],
            root_face: 0,
            label: 0,
        };
        let set = set_of(vec![s1, s2, bent.clone()]);
        let (v, _) = curvature_consistency_loss(&set).unwrap();

        // Independent direct evaluation.
        let sigs: Vec<Vec<f64>> = set
            .strands
            .iter()
            .map(|s| bending_signature(&s.points))
            .collect();
        let n = sigs.len() as f64;
        let m = sigs[0].len();
        let mut mean = vec![0.0; m];
        for sig in &sigs {
            for (mu, t) in mean.iter_mut().zip(sig) {
                *mu += t / n;
            }
        }
        let mut expect = 0.0;
        for sig in &sigs {
            let mut acc = 0.0;
            for (t, mu) in sig.iter().zip(&mean) {
                acc += (t - mu) * (t - mu);
            }
            expect += acc / m as f64 / n;
        }
        assert!((v - expect).abs() < 1e-15, "{v} vs {expect}");
        // The bend contributes pi/2 at one junction.
        let bent_sig = bending_signature(&bent.points);
        assert!((bent_sig[1] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn curvature_loss_rigid_motion_invariant() {
        let mut rng = Pcg32::seeded(40);
        let set = random_strand_set(&mut rng, 6, 12);
        let (v0, _) = curvature_consistency_loss(&set).unwrap();
        // Rotate about z by 1.1 rad and translate.
        let (s, c) = (1.1_f64.sin(), 1.1_f64.cos());
        let mut moved = set.clone();
        for strand in &mut moved.strands {
            for p in &mut strand.points {
                *p = [
                    c * p[0] - s * p[1] + 10.0,
                    s * p[0] + c * p[1] - 3.0,
                    p[2] + 0.5,
                ];
            }
        }
        let (v1, _) = curvature_consistency_loss(&moved).unwrap();
        assert!((v0 - v1).abs() < 1e-9, "{v0} vs {v1}");
    }

    fn fd_check(
        set: &StrandSet,
        value_of: impl Fn(&StrandSet) -> f64,
        grads: &PointGrads,
        rng: &mut Pcg32,
        trials: usize,
        tol: f64,
    ) {
        for _ in 0..trials {
            let i = rng.next_below(set.len());
            let l = rng.next_below(set.points_per_strand);
            let d = rng.next_below(3);
            let h = 1e-6;
            let mut plus = set.clone();
            plus.strands[i].points[l][d] += h;
            let mut minus = set.clone();
            minus.strands[i].points[l][d] -= h;
            let fd = (value_of(&plus) - value_of(&minus)) / (2.0 * h);
            let g = grads[i][l][d];
            let denom = fd.abs().max(g.abs()).max(1e-7);
            assert!((g - fd).abs() / denom < tol, "({i},{l},{d}): {g} vs {fd}");
        }
    }

    #[test]
    fn gradients_match_fd() {
        let mut rng = Pcg32::seeded(50);
        let set = random_strand_set(&mut rng, 4, 8);
        let samples: Vec<[f64; 3]> = (0..30)
            .map(|_| {
                [
                    rng.next_f64() * 2.0 - 1.0,
                    rng.next_f64() * 2.0 - 1.0,
                    rng.next_f64() * 2.0 - 1.0,
                ]
            })
            .collect();
        let sdf = Grid::analytic_sphere(1.2, 4.0, 48);
        let dirs: Vec<[f64; 3]> = (0..set.len())
            .map(|_| {
                vec3::normalized([
                    rng.next_f64() - 0.5,
                    rng.next_f64() - 0.5,
                    rng.next_f64() - 0.5,
                ])
                .unwrap()
            })
            .collect();

        let (_, g) = chamfer_one_way(&samples, &set).unwrap();
        fd_check(
            &set,
            |s| chamfer_one_way(&samples, s).unwrap().0,
            &g,
            &mut rng,
            25,
            1e-4,
        );

        let (_, g, _) = penetration_loss(&set, &sdf).unwrap();
        fd_check(
            &set,
            |s| penetration_loss(s, &sdf).unwrap().0,
            &g,
            &mut rng,
            25,
            1e-4,
        );

        let (_, g) = direction_consistency_loss(&set, &dirs).unwrap();
        fd_check(
            &set,
            |s| direction_consistency_loss(s, &dirs).unwrap().0,
            &g,
            &mut rng,
            25,
            1e-4,
        );

        let (_, g) = curvature_consistency_loss(&set).unwrap();
        fd_check(
            &set,
            |s| curvature_consistency_loss(s).unwrap().0,
            &g,
            &mut rng,
            25,
            1e-4,
        );
    }

    #[test]
    fn total_loss_weighting() {
        let mut rng = Pcg32::seeded(60);
        let set = random_strand_set(&mut rng, 3, 6);
        let samples: Vec<[f64; 3]> = (0..10)
            .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
            .collect();
        let sdf = Grid::analytic_sphere(1.0, 3.0, 24);
        let dirs = vec![[0.0, 0.0, 1.0]; set.len()];
        let inputs = GeometricInputs {
            surface_samples: &samples,
            defurred_sdf: &sdf,
            growth_dirs: &dirs,
        };

        // Only the Chamfer weight: total = 20 * chamfer.
        let only_chm = LossWeights {
            sil: 0.0,
            dir: 0.0,
            dir_ann: 0.0,
            chm: 20.0,
            penetr: 0.0,
            shape: 0.0,
        };
        let (total, grads, bd) = total_geometric_loss(&set, &inputs, &only_chm, None).unwrap();
        let (chm, chm_g) = chamfer_one_way(&samples, &set).unwrap();
        assert!((total - 20.0 * chm).abs() < 1e-12);
        assert_eq!(bd.chm, chm);
        for (a, b) in grads.iter().flatten().zip(chm_g.iter().flatten()) {
            for d in 0..3 {
                assert!((a[d] - 20.0 * b[d]).abs() < 1e-12);
            }
        }

        // Linearity: gradient of the weighted sum is the weighted sum of
        // gradients.
        let w = LossWeights::default();
        let (_, g_total, _) = total_geometric_loss(&set, &inputs, &w, None).unwrap();
        let (_, g_chm) = chamfer_one_way(&samples, &set).unwrap();
        let (_, g_pen, _) = penetration_loss(&set, &sdf).unwrap();
        let (_, g_dir) = direction_consistency_loss(&set, &dirs).unwrap();
        let (_, g_shape) = curvature_consistency_loss(&set).unwrap();
        for i in 0..set.len() {
            for l in 0..set.points_per_strand {
                for d in 0..3 {
                    let expect = w.chm * g_chm[i][l][d]
                        + w.penetr * g_pen[i][l][d]
                        + w.dir_ann * g_dir[i][l][d]
                        + w.shape * g_shape[i][l][d];
                    assert!((g_total[i][l][d] - expect).abs() < 1e-12);
                }
            }
        }

        // All weights zero: total 0, gradients 0.
        let zero = LossWeights {
            sil: 0.0,
            dir: 0.0,
            dir_ann: 0.0,
            chm: 0.0,
            penetr: 0.0,
            shape: 0.0,
        };
        let (total, grads, _) = total_geometric_loss(&set, &inputs, &zero, None).unwrap();
        assert_eq!(total, 0.0);
        assert!(grads.iter().flatten().all(|g| *g == [0.0; 3]));
    }
}
