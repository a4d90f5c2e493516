//! Synthetic quadruped template: a watertight implicit body meshed at low
//! resolution, with hand-painted part labels, a 9-joint rig, smooth skinning
//! weights and 4 blendshapes. Drives the tests and the desk-scale demo.
//!
//! World frame follows the annotation convention: x right-to-left, y up
//! (opposite gravity), z back-to-front. Units are centimeters; the body is
//! panda-cub sized (~70 cm nose to tail) so the Panda annotation lengths are
//! geometrically reasonable.

use fur_core::{decimate, knn::KdTree, marching, repair, vec3, Grid, Mesh};

use super::LbsModel;
use crate::annotation::PartLabel;

/// Ground plane height: paw bottoms.
pub const GROUND_Y: f64 = -30.0;

const TORSO_A: [f64; 3] = [0.0, 0.0, -24.0];
const TORSO_B: [f64; 3] = [0.0, 0.0, 18.0];
const TORSO_R: f64 = 13.0;
const HEAD_C: [f64; 3] = [0.0, 6.0, 32.0];
const HEAD_R: f64 = 10.0;
const LEG_R: f64 = 4.0;
const LEG_X: f64 = 9.0;
const LEG_FRONT_Z: f64 = 14.0;
const LEG_REAR_Z: f64 = -19.0;
const LEG_TOP_Y: f64 = -6.0;
const TAIL_A: [f64; 3] = [0.0, 2.0, -26.0];
const TAIL_B: [f64; 3] = [0.0, 5.0, -38.0];
const TAIL_R: f64 = 3.0;
const EAR_R: f64 = 3.2;

fn ear_center(side: f64) -> [f64; 3] {
    [5.5 * side, 14.5, 29.0]
}

fn eye_center(side: f64) -> [f64; 3] {
    // On the front of the head.
    [4.2 * side, 9.5, 40.3]
}

fn sd_sphere(p: [f64; 3], c: [f64; 3], r: f64) -> f64 {
    vec3::dist(p, c) - r
}

fn sd_capsule(p: [f64; 3], a: [f64; 3], b: [f64; 3], r: f64) -> f64 {
    let ab = vec3::sub(b, a);
    let t = (vec3::dot(vec3::sub(p, a), ab) / vec3::norm2(ab)).clamp(0.0, 1.0);
    vec3::dist(p, vec3::add_scaled(a, ab, t)) - r
}

fn smooth_min(a: f64, b: f64, k: f64) -> f64 {
    let h = (0.5 + 0.5 * (b - a) / k).clamp(0.0, 1.0);
    b * (1.0 - h) + a * h - k * h * (1.0 - h)
}

/// Signed distance of the bald quadruped body (negative inside).
pub fn bald_body_sdf(p: [f64; 3]) -> f64 {
    let mut d = sd_capsule(p, TORSO_A, TORSO_B, TORSO_R);
    d = smooth_min(d, sd_sphere(p, HEAD_C, HEAD_R), 3.0);
    for (x, z) in [
        (LEG_X, LEG_FRONT_Z),
        (-LEG_X, LEG_FRONT_Z),
        (LEG_X, LEG_REAR_Z),
        (-LEG_X, LEG_REAR_Z),
    ] {
        let leg = sd_capsule(p, [x, LEG_TOP_Y, z], [x, GROUND_Y + LEG_R, z], LEG_R);
        d = smooth_min(d, leg, 2.0);
    }
    d = smooth_min(d, sd_capsule(p, TAIL_A, TAIL_B, TAIL_R), 2.0);
    for side in [1.0, -1.0] {
        d = smooth_min(d, sd_sphere(p, ear_center(side), EAR_R), 1.5);
    }
    d
}

/// Paint a part label from position and outward normal.
pub fn classify(p: [f64; 3], normal: [f64; 3]) -> PartLabel {
    // Ears first (small features win).
    for side in [1.0, -1.0] {
        let ec = ear_center(side);
        if vec3::dist(p, ec) < EAR_R + 1.2 {
            // The canal faces forward.
            if normal[2] > 0.55 && p[2] < ec[2] + 1.0 {
                return PartLabel::InnerEarcanal;
            }
            return PartLabel::Ears;
        }
    }
    // Head region.
    if vec3::dist(p, HEAD_C) < HEAD_R + 1.5 {
        if p[2] > HEAD_C[2] + HEAD_R - 1.4 && p[1] < HEAD_C[1] + 2.0 {
            return PartLabel::Nosetip;
        }
        for side in [1.0, -1.0] {
            if vec3::dist(p, eye_center(side)) < 2.1 {
                return PartLabel::Eyes;
            }
        }
        if p[2] > HEAD_C[2] + 2.0 {
            return PartLabel::Face;
        }
        return PartLabel::Neck;
    }
    // Tail region.
    if p[2] < TAIL_A[2] + 1.0 && sd_capsule(p, TAIL_A, TAIL_B, TAIL_R) < 2.5 {
        if normal[1] < -0.25 {
            return PartLabel::UnderTail;
        }
        return PartLabel::Tail;
    }
    // Legs.
    if p[1] < LEG_TOP_Y - 1.0 {
        let front = p[2] > 0.0;
        if p[1] < GROUND_Y + LEG_R + 0.9 && normal[1] < -0.55 {
            return PartLabel::PawPads;
        }
        if p[1] < GROUND_Y + 7.0 {
            return if front {
                PartLabel::FrontPaws
            } else {
                PartLabel::Paws
            };
        }
        return if front {
            PartLabel::LegFront
        } else {
            PartLabel::LegRear
        };
    }
    // Torso.
    if normal[1] < -0.45 && p[1] < -5.0 {
        return PartLabel::Belly;
    }
    if p[2] > 14.0 {
        return PartLabel::Neck;
    }
    PartLabel::Body
}

/// Mesh the bald implicit at `resolution` and keep about `target_faces`.
pub fn bald_body_mesh(resolution: usize, target_faces: usize) -> Mesh {
    let grid = implicit_grid(bald_body_sdf, resolution);
    let raw = marching::marching_cubes(&grid, 0.0).expect("body has an iso-surface");
    let kept = repair::largest_component(&raw);
    decimate::decimate(&kept, target_faces).expect("decimation of a closed body")
}

/// Sample an implicit on a grid sized to the body with padding.
pub fn implicit_grid(f: impl Fn([f64; 3]) -> f64 + Sync, resolution: usize) -> Grid {
    // Generous fixed bounds around the quadruped, fur included.
    let lo: [f64; 3] = [-26.0, -36.0, -50.0];
    let hi: [f64; 3] = [26.0, 26.0, 52.0];
    let longest = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(hi[2] - lo[2]);
    let spacing = longest / (resolution - 1) as f64;
    let dims = [
        ((hi[0] - lo[0]) / spacing).ceil() as usize + 1,
        ((hi[1] - lo[1]) / spacing).ceil() as usize + 1,
        ((hi[2] - lo[2]) / spacing).ceil() as usize + 1,
    ];
    let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let p = [
                    lo[0] + i as f64 * spacing,
                    lo[1] + j as f64 * spacing,
                    lo[2] + k as f64 * spacing,
                ];
                values.push(f(p));
            }
        }
    }
    Grid::new(lo, spacing, dims, values).expect("valid grid")
}

/// The furred ("as reconstructed") body: the bald implicit inflated outward
/// by the per-part thickness of the nearest labeled template vertex.
pub fn furred_body_mesh(
    template: &Mesh,
    thickness_of: impl Fn(PartLabel) -> f64 + Sync,
    resolution: usize,
) -> Mesh {
    let labels = template.labels.as_ref().expect("labeled template");
    let tree = KdTree::build(&template.vertices);
    let f = |p: [f64; 3]| -> f64 {
        let (nearest, _) = tree.nearest_one(p).unwrap();
        let part = PartLabel::from_id(labels[nearest]).unwrap();
        bald_body_sdf(p) - thickness_of(part)
    };
    let grid = implicit_grid(f, resolution);
    let raw = marching::marching_cubes(&grid, 0.0).expect("furred body iso-surface");
    repair::largest_component(&raw)
}

const N_JOINTS: usize = 9;

fn joint_positions() -> [[f64; 3]; N_JOINTS] {
    [
        [0.0, 0.0, -3.0],              // 0 root (torso center)
        [0.0, 4.0, 20.0],              // 1 neck
        HEAD_C,                        // 2 head
        [LEG_X, LEG_TOP_Y, LEG_FRONT_Z], // 3 front-left leg
        [-LEG_X, LEG_TOP_Y, LEG_FRONT_Z], // 4 front-right leg
        [LEG_X, LEG_TOP_Y, LEG_REAR_Z],  // 5 rear-left leg
        [-LEG_X, LEG_TOP_Y, LEG_REAR_Z], // 6 rear-right leg
        TAIL_A,                        // 7 tail base
        TAIL_B,                        // 8 tail tip
    ]
}

fn parents() -> [i64; N_JOINTS] {
    [-1, 0, 1, 0, 0, 0, 0, 0, 7]
}

/// Distance from a point to the "bone" of each joint (a segment from the
/// joint toward its influence region).
fn bone_distance(joint: usize, p: [f64; 3]) -> f64 {
    let joints = joint_positions();
    let seg = |a: [f64; 3], b: [f64; 3]| sd_capsule(p, a, b, 0.0);
    match joint {
        0 => seg([0.0, 0.0, -24.0], [0.0, 2.0, 18.0]),
        1 => seg(joints[1], vec3::lerp(joints[1], joints[2], 0.8)),
        2 => vec3::dist(p, joints[2]),
        3..=6 => seg(joints[joint], {
            let mut foot = joints[joint];
            foot[1] = GROUND_Y;
            foot
        }),
        7 => seg(joints[7], joints[8]),
        _ => seg(joints[8], vec3::add(TAIL_B, [0.0, 1.0, -3.0])),
    }
}

/// Smooth 0..1 window that is 1 below `lo` distance and 0 above `hi`.
fn smoothstep_window(d: f64, lo: f64, hi: f64) -> f64 {
    let t = ((hi - d) / (hi - lo)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Construct the full synthetic quadruped model.
pub fn synthetic_quadruped() -> LbsModel {
    let mut template = bald_body_mesh(40, 800);
    let normals = template.vertex_normals();
    template.labels = Some(
        template
            .vertices
            .iter()
            .zip(&normals)
            .map(|(&p, &n)| classify(p, n).id())
            .collect(),
    );

    let joints = joint_positions();
    // Skinning: the two nearest bones, Gaussian falloff, normalized rows.
    let sigma = 5.0;
    let weights: Vec<Vec<(usize, f64)>> = template
        .vertices
        .iter()
        .map(|&v| {
            let mut scored: Vec<(usize, f64)> = (0..N_JOINTS)
                .map(|j| {
                    let d = bone_distance(j, v);
                    (j, (-d * d / (2.0 * sigma * sigma)).exp())
                })
                .collect();
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            scored.truncate(2);
            let total: f64 = scored.iter().map(|(_, w)| w).sum();
            if total <= 1e-12 {
                vec![(0, 1.0)]
            } else {
                let mut row: Vec<(usize, f64)> =
                    scored.iter().map(|&(j, w)| (j, w / total)).collect();
                row.sort_by_key(|&(j, _)| j);
                row
            }
        })
        .collect();

    // Joint regressor: uniform over the 8 template vertices nearest each
    // designed joint position.
    let tree = KdTree::build(&template.vertices);
    let joint_regressor: Vec<Vec<(usize, f64)>> = joints
        .iter()
        .map(|&j| {
            tree.nearest_k(j, 8)
                .into_iter()
                .map(|(v, _)| (v, 1.0 / 8.0))
                .collect()
        })
        .collect();

    // Blendshapes: girth, body length, leg length, head size.
    let torso_axis_point = |p: [f64; 3]| -> [f64; 3] {
        let t = ((p[2] - TORSO_A[2]) / (TORSO_B[2] - TORSO_A[2])).clamp(0.0, 1.0);
        vec3::lerp(TORSO_A, TORSO_B, t)
    };
    let girth: Vec<[f64; 3]> = template
        .vertices
        .iter()
        .map(|&v| {
            let axis = torso_axis_point(v);
            let radial = vec3::sub(v, axis);
            let w = smoothstep_window(sd_capsule(v, TORSO_A, TORSO_B, TORSO_R).abs(), 1.0, 6.0);
            match vec3::normalized(radial) {
                Some(u) => vec3::scale(u, 2.0 * w),
                None => [0.0; 3],
            }
        })
        .collect();
    let lengthen: Vec<[f64; 3]> = template
        .vertices
        .iter()
        .map(|&v| [0.0, 0.0, 0.06 * (v[2] + 3.0)])
        .collect();
    let leg_length: Vec<[f64; 3]> = template
        .vertices
        .iter()
        .map(|&v| {
            if v[1] < LEG_TOP_Y {
                [0.0, -0.12 * (LEG_TOP_Y - v[1]), 0.0]
            } else {
                [0.0; 3]
            }
        })
        .collect();
    let head_size: Vec<[f64; 3]> = template
        .vertices
        .iter()
        .map(|&v| {
            let w = smoothstep_window(vec3::dist(v, HEAD_C), HEAD_R, HEAD_R + 5.0);
            match vec3::normalized(vec3::sub(v, HEAD_C)) {
                Some(u) => vec3::scale(u, 1.5 * w),
                None => [0.0; 3],
            }
        })
        .collect();

    LbsModel {
        template,
        blendshapes: vec![girth, lengthen, leg_length, head_size],
        weights,
        joint_regressor,
        parents: parents().to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_is_reasonable() {
        let model = synthetic_quadruped();
        model.validate().unwrap();
        let n_v = model.n_vertices();
        assert!((250..=650).contains(&n_v), "vertices {n_v}");
        assert_eq!(model.n_joints(), 9);
        assert_eq!(model.blendshapes.len(), 4);
        assert!(model.template.is_watertight());
    }

    #[test]
    fn labels_cover_key_parts() {
        let model = synthetic_quadruped();
        let labels = model.template.labels.as_ref().unwrap();
        for part in [
            PartLabel::Body,
            PartLabel::Belly,
            PartLabel::Face,
            PartLabel::Tail,
            PartLabel::PawPads,
            PartLabel::LegFront,
            PartLabel::LegRear,
            PartLabel::Neck,
        ] {
            assert!(
                labels.iter().any(|&l| l == part.id()),
                "part {part} missing from the template"
            );
        }
    }

    #[test]
    fn furred_body_contains_bald_body() {
        let model = synthetic_quadruped();
        let furred = furred_body_mesh(&model.template, |_| 1.5, 48);
        assert!(furred.is_watertight());
        // Every bald vertex is inside the furred surface.
        let bvh = fur_core::bvh::TriBvh::build(&furred);
        for v in model.template.vertices.iter().step_by(7) {
            let w = bvh.winding_number(*v);
            assert!(w > 0.5, "bald vertex outside furred body: {v:?}");
        }
    }
}
