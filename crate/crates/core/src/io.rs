//! Mesh interchange: ASCII OBJ (v/f records) and binary little-endian PLY
//! with optional per-vertex `label` (uchar) and `scalar` (float) properties.
//!
//! Coordinates are stored as float32 in both formats; round trips through a
//! file are byte-stable.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{Error, Real, Result, TriMesh};

pub fn write_obj<T: Real>(mesh: &TriMesh<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for v in &mesh.vertices {
        // Shortest round-trip f32 formatting keeps OBJ<->OBJ byte-stable.
        writeln!(
            w,
            "v {} {} {}",
            v[0].f64() as f32,
            v[1].f64() as f32,
            v[2].f64() as f32
        )?;
    }
    for f in &mesh.faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_obj<T: Real>(path: impl AsRef<Path>) -> Result<TriMesh<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let parse_err = |reason: &str| Error::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            reason: reason.to_string(),
        };
        match parts.next() {
            Some("v") => {
                let mut coord = [T::zero(); 3];
                for c in coord.iter_mut() {
                    let tok = parts.next().ok_or_else(|| parse_err("short v record"))?;
                    let value: f32 = tok.parse().map_err(|_| parse_err("bad coordinate"))?;
                    *c = T::of(value as f64);
                }
                vertices.push(coord);
            }
            Some("f") => {
                let mut idx = Vec::with_capacity(4);
                for tok in parts {
                    let first = tok.split('/').next().unwrap_or(tok);
                    let value: i64 = first.parse().map_err(|_| parse_err("bad face index"))?;
                    if value == 0 {
                        return Err(parse_err("face index 0"));
                    }
                    let resolved = if value > 0 {
                        value as usize - 1
                    } else {
                        // Negative indices count from the end.
                        let len = vertices.len() as i64;
                        (len + value) as usize
                    };
                    idx.push(resolved);
                }
                if idx.len() < 3 {
                    return Err(parse_err("face with fewer than 3 vertices"));
                }
                // Fan-triangulate polygons.
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriMesh::new(vertices, faces))
}

pub fn write_ply<T: Real>(mesh: &TriMesh<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "ply\nformat binary_little_endian 1.0\n")?;
    write!(w, "element vertex {}\n", mesh.vertices.len())?;
    write!(w, "property float x\nproperty float y\nproperty float z\n")?;
    if mesh.labels.is_some() {
        write!(w, "property uchar label\n")?;
    }
    if mesh.scalars.is_some() {
        write!(w, "property float scalar\n")?;
    }
    write!(w, "element face {}\n", mesh.faces.len())?;
    write!(w, "property list uchar uint vertex_indices\nend_header\n")?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        for d in 0..3 {
            w.write_all(&(v[d].f64() as f32).to_le_bytes())?;
        }
        if let Some(labels) = &mesh.labels {
            w.write_all(&[labels[i]])?;
        }
        if let Some(scalars) = &mesh.scalars {
            w.write_all(&(scalars[i].f64() as f32).to_le_bytes())?;
        }
    }
    for f in &mesh.faces {
        w.write_all(&[3u8])?;
        for &i in f {
            w.write_all(&(i as u32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Debug dump: a PLY point cloud with per-point direction attributes
/// (dx, dy, dz) and a `singular` flag.
pub fn write_ply_point_directions<T: Real>(
    points: &[[T; 3]],
    directions: &[[T; 3]],
    singular: &[bool],
    path: impl AsRef<Path>,
) -> Result<()> {
    if points.len() != directions.len() || points.len() != singular.len() {
        return Err(Error::InvalidArgument(format!(
            "mismatched point/direction/flag counts: {}/{}/{}",
            points.len(),
            directions.len(),
            singular.len()
        )));
    }
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "ply\nformat binary_little_endian 1.0\n")?;
    write!(w, "element vertex {}\n", points.len())?;
    write!(w, "property float x\nproperty float y\nproperty float z\n")?;
    write!(w, "property float dx\nproperty float dy\nproperty float dz\n")?;
    write!(w, "property uchar singular\nend_header\n")?;
    for i in 0..points.len() {
        for d in 0..3 {
            w.write_all(&(points[i][d].f64() as f32).to_le_bytes())?;
        }
        for d in 0..3 {
            w.write_all(&(directions[i][d].f64() as f32).to_le_bytes())?;
        }
        w.write_all(&[u8::from(singular[i])])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum PlyType {
    F32,
    F64,
    U8,
    I32,
    U32,
}

impl PlyType {
    fn parse(name: &str) -> Option<PlyType> {
        match name {
            "float" | "float32" => Some(PlyType::F32),
            "double" | "float64" => Some(PlyType::F64),
            "uchar" | "uint8" | "char" | "int8" => Some(PlyType::U8),
            "int" | "int32" => Some(PlyType::I32),
            "uint" | "uint32" => Some(PlyType::U32),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            PlyType::U8 => 1,
            PlyType::F32 | PlyType::I32 | PlyType::U32 => 4,
            PlyType::F64 => 8,
        }
    }

    fn read_f64(self, bytes: &[u8]) -> f64 {
        match self {
            PlyType::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyType::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
            PlyType::U8 => bytes[0] as f64,
            PlyType::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyType::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
        }
    }
}

pub fn read_ply<T: Real>(path: impl AsRef<Path>) -> Result<TriMesh<T>> {
    let path_str = path.as_ref().display().to_string();
    let mut file = std::fs::File::open(path.as_ref())?;
    let mut data = Vec::new();
    file.read_to_end(&mut data)?;

    let unsupported = |reason: &str| Error::Unsupported {
        path: path_str.clone(),
        reason: reason.to_string(),
    };

    // Header is ASCII lines up to and including "end_header".
    let header_end = data
        .windows(11)
        .position(|w| w == b"end_header\n")
        .ok_or_else(|| unsupported("missing end_header"))?
        + 11;
    let header = std::str::from_utf8(&data[..header_end])
        .map_err(|_| unsupported("non-utf8 header"))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(unsupported("missing ply magic"));
    }

    struct Prop {
        name: String,
        ty: PlyType,
    }
    let mut vertex_count = 0usize;
    let mut face_count = 0usize;
    let mut vertex_props: Vec<Prop> = Vec::new();
    let mut face_list: Option<(PlyType, PlyType)> = None;
    let mut current = "";
    for line in lines {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("binary_little_endian") {
                    return Err(unsupported("only binary_little_endian is supported"));
                }
            }
            Some("comment") => {}
            Some("element") => {
                let name = tok.next().unwrap_or("");
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| unsupported("bad element count"))?;
                match name {
                    "vertex" => {
                        vertex_count = count;
                        current = "vertex";
                    }
                    "face" => {
                        face_count = count;
                        current = "face";
                    }
                    _ => current = "other",
                }
            }
            Some("property") => {
                let t1 = tok.next().unwrap_or("");
                if t1 == "list" {
                    let count_ty = PlyType::parse(tok.next().unwrap_or(""))
                        .ok_or_else(|| unsupported("bad list count type"))?;
                    let item_ty = PlyType::parse(tok.next().unwrap_or(""))
                        .ok_or_else(|| unsupported("bad list item type"))?;
                    if current == "face" {
                        face_list = Some((count_ty, item_ty));
                    }
                } else if current == "vertex" {
                    let ty =
                        PlyType::parse(t1).ok_or_else(|| unsupported("unknown property type"))?;
                    let name = tok.next().unwrap_or("").to_string();
                    vertex_props.push(Prop { name, ty });
                }
            }
            Some("end_header") => break,
            _ => {}
        }
    }

    let stride: usize = vertex_props.iter().map(|p| p.ty.size()).sum();
    let mut cursor = header_end;
    let mut vertices = Vec::with_capacity(vertex_count);
    let mut labels: Option<Vec<u8>> = vertex_props
        .iter()
        .any(|p| p.name == "label")
        .then(Vec::new);
    let mut scalars: Option<Vec<T>> = vertex_props
        .iter()
        .any(|p| p.name == "scalar")
        .then(Vec::new);
    if data.len() < cursor + stride * vertex_count {
        return Err(unsupported("truncated vertex block"));
    }
    for _ in 0..vertex_count {
        let mut v = [T::zero(); 3];
        let mut offset = 0;
        for p in &vertex_props {
            let raw = &data[cursor + offset..];
            let value = p.ty.read_f64(raw);
            match p.name.as_str() {
                "x" => v[0] = T::of(value),
                "y" => v[1] = T::of(value),
                "z" => v[2] = T::of(value),
                "label" => {
                    if let Some(ls) = &mut labels {
                        ls.push(value as u8);
                    }
                }
                "scalar" => {
                    if let Some(ss) = &mut scalars {
                        ss.push(T::of(value));
                    }
                }
                _ => {}
            }
            offset += p.ty.size();
        }
        vertices.push(v);
        cursor += stride;
    }

    let (count_ty, item_ty) = face_list.ok_or_else(|| unsupported("no face list property"))?;
    let mut faces = Vec::with_capacity(face_count);
    for _ in 0..face_count {
        if data.len() < cursor + count_ty.size() {
            return Err(unsupported("truncated face block"));
        }
        let n = count_ty.read_f64(&data[cursor..]) as usize;
        cursor += count_ty.size();
        if data.len() < cursor + n * item_ty.size() {
            return Err(unsupported("truncated face block"));
        }
        let mut idx = Vec::with_capacity(n);
        for _ in 0..n {
            idx.push(item_ty.read_f64(&data[cursor..]) as usize);
            cursor += item_ty.size();
        }
        for k in 1..idx.len().saturating_sub(1) {
            faces.push([idx[0], idx[k], idx[k + 1]]);
        }
    }

    let mut mesh = TriMesh::new(vertices, faces);
    mesh.labels = labels;
    mesh.scalars = scalars;
    Ok(mesh)
}
