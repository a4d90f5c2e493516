//! Per-part fur knowledge: lengths, effective thicknesses, growth directions.
//!
//! Annotations are ingested from a JSON file (the contract boundary with
//! whatever produced them), validated, and localized onto mesh vertices via
//! nearest-neighbor label transfer plus thickness smoothing.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use fur_core::{knn::KdTree, vec3, Mesh};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Body parts carrying fur annotations. `Mane` exists only on animals whose
/// annotation file declares it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartLabel {
    LegFront,
    LegRear,
    PawPads,
    Paws,
    FrontPaws,
    Belly,
    Neck,
    Face,
    Ears,
    InnerEarcanal,
    UnderTail,
    Eyes,
    Tail,
    Nosetip,
    Body,
    Mane,
}

impl PartLabel {
    pub const REQUIRED: [PartLabel; 15] = [
        PartLabel::LegFront,
        PartLabel::LegRear,
        PartLabel::PawPads,
        PartLabel::Paws,
        PartLabel::FrontPaws,
        PartLabel::Belly,
        PartLabel::Neck,
        PartLabel::Face,
        PartLabel::Ears,
        PartLabel::InnerEarcanal,
        PartLabel::UnderTail,
        PartLabel::Eyes,
        PartLabel::Tail,
        PartLabel::Nosetip,
        PartLabel::Body,
    ];

    pub fn id(self) -> u8 {
        match self {
            PartLabel::LegFront => 0,
            PartLabel::LegRear => 1,
            PartLabel::PawPads => 2,
            PartLabel::Paws => 3,
            PartLabel::FrontPaws => 4,
            PartLabel::Belly => 5,
            PartLabel::Neck => 6,
            PartLabel::Face => 7,
            PartLabel::Ears => 8,
            PartLabel::InnerEarcanal => 9,
            PartLabel::UnderTail => 10,
            PartLabel::Eyes => 11,
            PartLabel::Tail => 12,
            PartLabel::Nosetip => 13,
            PartLabel::Body => 14,
            PartLabel::Mane => 15,
        }
    }

    pub fn from_id(id: u8) -> Option<PartLabel> {
        use PartLabel::*;
        Some(match id {
            0 => LegFront,
            1 => LegRear,
            2 => PawPads,
            3 => Paws,
            4 => FrontPaws,
            5 => Belly,
            6 => Neck,
            7 => Face,
            8 => Ears,
            9 => InnerEarcanal,
            10 => UnderTail,
            11 => Eyes,
            12 => Tail,
            13 => Nosetip,
            14 => Body,
            15 => Mane,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            PartLabel::LegFront => "leg_front",
            PartLabel::LegRear => "leg_rear",
            PartLabel::PawPads => "paw_pads",
            PartLabel::Paws => "paws",
            PartLabel::FrontPaws => "front_paws",
            PartLabel::Belly => "belly",
            PartLabel::Neck => "neck",
            PartLabel::Face => "face",
            PartLabel::Ears => "ears",
            PartLabel::InnerEarcanal => "inner_earcanal",
            PartLabel::UnderTail => "under_tail",
            PartLabel::Eyes => "eyes",
            PartLabel::Tail => "tail",
            PartLabel::Nosetip => "nosetip",
            PartLabel::Body => "body",
            PartLabel::Mane => "mane",
        }
    }
}

impl fmt::Display for PartLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Annotation for one part: fur length, effective thickness (both cm) and a
/// unit growth direction in the world frame (x right-to-left, y opposite
/// gravity, z back-to-front).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PartAnnotation {
    pub length_cm: f64,
    pub thickness_cm: f64,
    pub direction: [f64; 3],
}

/// The validated per-part knowledge for one animal.
#[derive(Clone, Debug)]
pub struct AnnotationSet {
    pub parts: BTreeMap<PartLabel, PartAnnotation>,
    pub scale_cm_per_unit: f64,
    pub has_mane: bool,
}

/// Fully localized annotation at one mesh vertex.
#[derive(Clone, Copy, Debug)]
pub struct VertexAnnotation {
    pub label: PartLabel,
    pub length_cm: f64,
    pub thickness_cm: f64,
    pub direction: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    parts: serde_json::Map<String, serde_json::Value>,
    scale_cm_per_unit: f64,
    #[serde(default)]
    has_mane: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPart {
    length_cm: f64,
    thickness_cm: f64,
    direction: [f64; 3],
}

fn field_err(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Annotation {
        field: field.into(),
        reason: reason.into(),
    }
}

impl AnnotationSet {
    /// Parse and validate an annotation JSON document.
    pub fn from_json(text: &str) -> Result<AnnotationSet> {
        let raw: RawFile = serde_json::from_str(text).map_err(|e| Error::Annotation {
            field: "<document>".into(),
            reason: e.to_string(),
        })?;
        if !(raw.scale_cm_per_unit > 0.0) || !raw.scale_cm_per_unit.is_finite() {
            return Err(field_err(
                "scale_cm_per_unit",
                format!("must be positive and finite, got {}", raw.scale_cm_per_unit),
            ));
        }

        let mut parts = BTreeMap::new();
        for (name, value) in &raw.parts {
            let label: PartLabel = serde_json::from_value(serde_json::Value::String(name.clone()))
                .map_err(|_| field_err(format!("parts.{name}"), "unknown part name"))?;
            let part: RawPart = serde_json::from_value(value.clone())
                .map_err(|e| field_err(format!("parts.{name}"), e.to_string()))?;
            if !part.length_cm.is_finite() || part.length_cm < 0.0 {
                return Err(field_err(
                    format!("parts.{name}.length_cm"),
                    format!("length must be >= 0, got {}", part.length_cm),
                ));
            }
            if !part.thickness_cm.is_finite() || part.thickness_cm < 0.0 {
                return Err(field_err(
                    format!("parts.{name}.thickness_cm"),
                    format!("thickness must be >= 0, got {}", part.thickness_cm),
                ));
            }
            let direction = vec3::normalized(part.direction).ok_or_else(|| {
                field_err(
                    format!("parts.{name}.direction"),
                    "direction is not normalizable (zero norm)",
                )
            })?;
            if direction.iter().any(|c| !c.is_finite()) {
                return Err(field_err(
                    format!("parts.{name}.direction"),
                    "direction has non-finite components",
                ));
            }
            parts.insert(
                label,
                PartAnnotation {
                    length_cm: part.length_cm,
                    thickness_cm: part.thickness_cm,
                    direction,
                },
            );
        }

        for required in PartLabel::REQUIRED {
            if !parts.contains_key(&required) {
                return Err(field_err(
                    format!("parts.{required}"),
                    "required part is missing",
                ));
            }
        }
        match (raw.has_mane, parts.contains_key(&PartLabel::Mane)) {
            (true, false) => {
                return Err(field_err("parts.mane", "has_mane is set but mane is missing"))
            }
            (false, true) => {
                return Err(field_err(
                    "has_mane",
                    "mane annotated but has_mane is not set",
                ))
            }
            _ => {}
        }

        Ok(AnnotationSet {
            parts,
            scale_cm_per_unit: raw.scale_cm_per_unit,
            has_mane: raw.has_mane,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<AnnotationSet> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn part(&self, label: PartLabel) -> Option<&PartAnnotation> {
        self.parts.get(&label)
    }

    /// Serialize back to the schema (used by the demo to emit its inputs).
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            parts: BTreeMap<&'a str, &'a PartAnnotation>,
            scale_cm_per_unit: f64,
            has_mane: bool,
        }
        let parts = self.parts.iter().map(|(k, v)| (k.name(), v)).collect();
        serde_json::to_string_pretty(&Out {
            parts,
            scale_cm_per_unit: self.scale_cm_per_unit,
            has_mane: self.has_mane,
        })
        .expect("annotation serialization cannot fail")
    }
}

/// Copy labels from `labeled_mesh` to every vertex of `target_mesh` by
/// nearest labeled vertex.
pub fn transfer_labels(labeled_mesh: &Mesh, target_mesh: &Mesh) -> Result<Mesh> {
    let labels = labeled_mesh
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("source mesh carries no labels".into()))?;
    if labeled_mesh.vertices.is_empty() {
        return Err(Error::InvalidInput("source mesh is empty".into()));
    }
    let tree = KdTree::build(&labeled_mesh.vertices);
    let mut out = target_mesh.clone();
    out.labels = Some(
        target_mesh
            .vertices
            .iter()
            .map(|&v| {
                let (idx, _) = tree.nearest_one(v).expect("non-empty tree");
                labels[idx]
            })
            .collect(),
    );
    Ok(out)
}

/// Localize an annotation set onto a labeled mesh: per-vertex length and
/// direction verbatim from the part, thickness smoothed by `rounds` passes of
/// one-ring averaging.
pub fn smooth_vertex_thickness(
    mesh: &Mesh,
    ann: &AnnotationSet,
    rounds: usize,
) -> Result<Vec<VertexAnnotation>> {
    let labels = mesh
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("mesh carries no labels".into()))?;
    let parts: Vec<PartLabel> = labels
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            PartLabel::from_id(id).ok_or_else(|| {
                Error::InvalidInput(format!("vertex {i} carries unknown label id {id}"))
            })
        })
        .collect::<Result<_>>()?;
    for (i, part) in parts.iter().enumerate() {
        if ann.part(*part).is_none() {
            return Err(Error::InvalidInput(format!(
                "vertex {i} labeled `{part}` but the annotation set has no such part"
            )));
        }
    }

    let mut thickness: Vec<f64> = parts
        .iter()
        .map(|p| ann.part(*p).unwrap().thickness_cm)
        .collect();
    let rings = mesh.vertex_one_rings();
    for _ in 0..rounds {
        let prev = thickness.clone();
        for (i, ring) in rings.iter().enumerate() {
            if ring.is_empty() {
                continue;
            }
            let sum: f64 = ring.iter().map(|&j| prev[j]).sum();
            thickness[i] = sum / ring.len() as f64;
        }
    }

    Ok(parts
        .iter()
        .zip(&thickness)
        .map(|(&label, &t)| {
            let part = ann.part(label).unwrap();
            VertexAnnotation {
                label,
                length_cm: part.length_cm,
                thickness_cm: t,
                direction: part.direction,
            }
        })
        .collect())
}

/// True exactly where the annotated fur length is positive.
pub fn non_baldness_mask(vertex_ann: &[VertexAnnotation]) -> Vec<bool> {
    vertex_ann.iter().map(|v| v.length_cm > 0.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const PANDA_JSON: &str = include_str!("../fixtures/panda.json");
    pub const CAT_JSON: &str = include_str!("../fixtures/cat.json");

    #[test]
    fn panda_fixture_values() {
        let ann = AnnotationSet::from_json(PANDA_JSON).unwrap();
        assert_eq!(ann.part(PartLabel::Belly).unwrap().length_cm, 7.5);
        assert_eq!(ann.part(PartLabel::Neck).unwrap().length_cm, 7.0);
        assert_eq!(ann.part(PartLabel::Face).unwrap().length_cm, 3.0);
        assert_eq!(ann.part(PartLabel::PawPads).unwrap().length_cm, 0.0);
        assert_eq!(ann.part(PartLabel::Tail).unwrap().length_cm, 6.0);
        assert!(!ann.has_mane);
    }

    #[test]
    fn cat_fixture_values() {
        let ann = AnnotationSet::from_json(CAT_JSON).unwrap();
        assert_eq!(ann.part(PartLabel::Face).unwrap().length_cm, 0.5);
        assert_eq!(ann.part(PartLabel::Body).unwrap().length_cm, 1.0);
        assert_eq!(ann.part(PartLabel::PawPads).unwrap().length_cm, 0.1);
    }

    #[test]
    fn negative_length_rejected_naming_field() {
        let bad = PANDA_JSON.replacen("\"length_cm\": 7.5", "\"length_cm\": -1.0", 1);
        let err = AnnotationSet::from_json(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("belly.length_cm"), "{msg}");
    }

    #[test]
    fn unknown_part_rejected() {
        let bad = PANDA_JSON.replacen("\"belly\"", "\"wings\"", 1);
        let err = AnnotationSet::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("parts.wings"), "{err}");
    }

    #[test]
    fn directions_unit_norm_after_load() {
        let ann = AnnotationSet::from_json(PANDA_JSON).unwrap();
        for (_, part) in &ann.parts {
            assert!((vec3::norm(part.direction) - 1.0).abs() < 1e-9);
        }
    }

    fn two_part_sphere() -> Mesh {
        let mut mesh = fur_core::mesh::icosphere::<f64>(1.0, 2);
        let labels = mesh
            .vertices
            .iter()
            .map(|v| {
                if v[2] >= 0.0 {
                    PartLabel::Body.id()
                } else {
                    PartLabel::Belly.id()
                }
            })
            .collect();
        mesh.labels = Some(labels);
        mesh
    }

    #[test]
    fn transfer_identity_and_hemispheres() {
        let source = two_part_sphere();
        let same = transfer_labels(&source, &source).unwrap();
        assert_eq!(same.labels, source.labels);

        // Slightly offset target keeps hemisphere membership.
        let mut target = source.clone();
        for v in &mut target.vertices {
            *v = vec3::scale(*v, 1.01);
            v[0] += 1e-3;
        }
        target.labels = None;
        let labeled = transfer_labels(&source, &target).unwrap();
        for (v, &l) in target.vertices.iter().zip(labeled.labels.as_ref().unwrap()) {
            // Skip the equatorial band where nearest-vertex may legitimately
            // cross the boundary.
            if v[2].abs() > 0.05 {
                let expect = if v[2] >= 0.0 {
                    PartLabel::Body.id()
                } else {
                    PartLabel::Belly.id()
                };
                assert_eq!(l, expect, "vertex {v:?}");
            }
        }
    }

    #[test]
    fn transfer_single_label_and_idempotence() {
        let mut source = fur_core::mesh::icosphere::<f64>(1.0, 1);
        source.labels = Some(vec![PartLabel::Face.id(); source.vertices.len()]);
        let target = fur_core::mesh::icosphere::<f64>(1.3, 2);
        let once = transfer_labels(&source, &target).unwrap();
        assert!(once
            .labels
            .as_ref()
            .unwrap()
            .iter()
            .all(|&l| l == PartLabel::Face.id()));
        let twice = transfer_labels(&once, &target).unwrap();
        assert_eq!(once.labels, twice.labels);
    }

    #[test]
    fn thickness_smoothing_fixed_point_and_boundary_mean() {
        let ann = AnnotationSet::from_json(PANDA_JSON).unwrap();
        let mesh = two_part_sphere();

        // rounds = 0 keeps the raw per-part thickness.
        let raw = smooth_vertex_thickness(&mesh, &ann, 0).unwrap();
        for v in &raw {
            assert_eq!(v.thickness_cm, ann.part(v.label).unwrap().thickness_cm);
        }

        // A uniform profile is a fixed point of averaging.
        let mut uniform = ann.clone();
        for part in uniform.parts.values_mut() {
            part.thickness_cm = 1.5;
        }
        let smoothed = smooth_vertex_thickness(&mesh, &uniform, 10).unwrap();
        for v in &smoothed {
            assert!((v.thickness_cm - 1.5).abs() < 1e-12);
        }

        // One round equals the direct one-ring mean of the raw profile.
        let one = smooth_vertex_thickness(&mesh, &ann, 1).unwrap();
        let rings = mesh.vertex_one_rings();
        for (i, ring) in rings.iter().enumerate() {
            let direct: f64 = ring
                .iter()
                .map(|&j| ann.part(raw[j].label).unwrap().thickness_cm)
                .sum::<f64>()
                / ring.len() as f64;
            assert!((one[i].thickness_cm - direct).abs() < 1e-12, "vertex {i}");
        }

        // Maximum principle: smoothing stays inside the raw min/max range.
        let (lo, hi) = ann
            .parts
            .values()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.thickness_cm), hi.max(p.thickness_cm))
            });
        let many = smooth_vertex_thickness(&mesh, &ann, 25).unwrap();
        for v in &many {
            assert!(v.thickness_cm >= lo - 1e-12 && v.thickness_cm <= hi + 1e-12);
        }
    }

    #[test]
    fn mask_is_support_of_positive_length() {
        let ann = AnnotationSet::from_json(PANDA_JSON).unwrap();
        let mut mesh = two_part_sphere();
        // Relabel the lower hemisphere as paw pads (length 0 on the panda).
        for (v, l) in mesh
            .vertices
            .clone()
            .iter()
            .zip(mesh.labels.as_mut().unwrap())
        {
            if v[2] < 0.0 {
                *l = PartLabel::PawPads.id();
            }
        }
        let va = smooth_vertex_thickness(&mesh, &ann, 0).unwrap();
        let mask = non_baldness_mask(&va);
        for (v, m) in va.iter().zip(&mask) {
            assert_eq!(*m, v.length_cm > 0.0);
            match v.label {
                PartLabel::PawPads => assert!(!m),
                PartLabel::Body => assert!(m),
                _ => {}
            }
        }
    }
}
