//! SFUR1 strand interchange plus OBJ polyline export.
//!
//! Layout, little-endian throughout: magic `SFUR`, version u32 (low bits 1,
//! bit 31 flags a trailing per-strand label block), strand count u32,
//! points-per-strand u32, then for each strand its points as float32
//! triples; when flagged, one u8 label per strand follows.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::strand::{Strand, StrandSet};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SFUR";
const VERSION: u32 = 1;
const FLAG_LABELS: u32 = 0x8000_0000;

pub fn write_sfur(set: &StrandSet, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write_sfur_to(set, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_sfur_to(set: &StrandSet, w: &mut impl Write) -> Result<()> {
    let has_labels = set.strands.iter().any(|s| s.label != 0);
    let version = VERSION | if has_labels { FLAG_LABELS } else { 0 };
    w.write_all(MAGIC)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(set.strands.len() as u32).to_le_bytes())?;
    w.write_all(&(set.points_per_strand as u32).to_le_bytes())?;
    for strand in &set.strands {
        if strand.points.len() != set.points_per_strand {
            return Err(Error::InvalidInput(format!(
                "strand has {} points, set declares {}",
                strand.points.len(),
                set.points_per_strand
            )));
        }
        for p in &strand.points {
            for d in 0..3 {
                w.write_all(&(p[d] as f32).to_le_bytes())?;
            }
        }
    }
    if has_labels {
        for strand in &set.strands {
            w.write_all(&[strand.label])?;
        }
    }
    Ok(())
}

pub fn read_sfur(path: impl AsRef<Path>) -> Result<StrandSet> {
    let path_str = path.as_ref().display().to_string();
    let mut data = Vec::new();
    std::fs::File::open(path.as_ref())?.read_to_end(&mut data)?;
    read_sfur_bytes(&data).map_err(|e| match e {
        Error::Format { reason, .. } => Error::Format {
            path: path_str.clone(),
            reason,
        },
        other => other,
    })
}

pub fn read_sfur_bytes(data: &[u8]) -> Result<StrandSet> {
    let fail = |reason: &str| Error::Format {
        path: "<bytes>".into(),
        reason: reason.to_string(),
    };
    if data.len() < 16 || &data[0..4] != MAGIC {
        return Err(fail("missing SFUR magic"));
    }
    let u32_at = |off: usize| u32::from_le_bytes(data[off..off + 4].try_into().unwrap());
    let version = u32_at(4);
    let has_labels = version & FLAG_LABELS != 0;
    if version & !FLAG_LABELS != VERSION {
        return Err(fail(&format!("unsupported version {}", version & !FLAG_LABELS)));
    }
    let n_strands = u32_at(8) as usize;
    let n_points = u32_at(12) as usize;
    if n_points < 2 {
        return Err(fail("points-per-strand must be at least 2"));
    }
    let body = 16 + n_strands * n_points * 12 + if has_labels { n_strands } else { 0 };
    if data.len() != body {
        return Err(fail(&format!(
            "size mismatch: expected {body} bytes, found {}",
            data.len()
        )));
    }
    let mut cursor = 16;
    let mut strands = Vec::with_capacity(n_strands);
    for _ in 0..n_strands {
        let mut points = Vec::with_capacity(n_points);
        for _ in 0..n_points {
            let mut p = [0.0f64; 3];
            for d in p.iter_mut() {
                *d = f32::from_le_bytes(data[cursor..cursor + 4].try_into().unwrap()) as f64;
                cursor += 4;
            }
            points.push(p);
        }
        strands.push(Strand {
            points,
            root_face: 0,
            label: 0,
        });
    }
    if has_labels {
        for strand in strands.iter_mut() {
            strand.label = data[cursor];
            cursor += 1;
        }
    }
    Ok(StrandSet {
        points_per_strand: n_points,
        strands,
    })
}

/// Strands as OBJ polylines (v records plus l records, 1-based).
pub fn write_obj_polylines(set: &StrandSet, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for strand in &set.strands {
        for p in &strand.points {
            // f32 shortest round-trip formatting: parsing gives the exact
            // float32 back.
            writeln!(w, "v {} {} {}", p[0] as f32, p[1] as f32, p[2] as f32)?;
        }
    }
    let mut base = 1usize;
    for strand in &set.strands {
        write!(w, "l")?;
        for k in 0..strand.points.len() {
            write!(w, " {}", base + k)?;
        }
        writeln!(w)?;
        base += strand.points.len();
    }
    w.flush()?;
    Ok(())
}

pub fn read_obj_polylines(path: impl AsRef<Path>) -> Result<StrandSet> {
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut lines: Vec<Vec<usize>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let fail = |reason: String| Error::Format {
            path: format!("{path_str}:{}", lineno + 1),
            reason,
        };
        match parts.next() {
            Some("v") => {
                let mut p = [0.0; 3];
                for c in p.iter_mut() {
                    let tok = parts.next().ok_or_else(|| fail("short v record".into()))?;
                    let v: f32 = tok
                        .parse()
                        .map_err(|_| fail(format!("bad coordinate `{tok}`")))?;
                    *c = v as f64;
                }
                vertices.push(p);
            }
            Some("l") => {
                let idx: std::result::Result<Vec<usize>, _> =
                    parts.map(|t| t.parse::<usize>().map(|i| i - 1)).collect();
                let idx = idx.map_err(|_| fail("bad polyline index".into()))?;
                if idx.len() < 2 {
                    return Err(fail("polyline with fewer than 2 points".into()));
                }
                lines.push(idx);
            }
            _ => {}
        }
    }
    if lines.is_empty() {
        return Err(Error::Format {
            path: path_str,
            reason: "no polylines (l records) found".into(),
        });
    }
    let n_points = lines[0].len();
    let mut strands = Vec::with_capacity(lines.len());
    for idx in &lines {
        if idx.len() != n_points {
            return Err(Error::Format {
                path: path_str,
                reason: "polylines with differing point counts".into(),
            });
        }
        let points = idx.iter().map(|&i| vertices[i]).collect();
        strands.push(Strand {
            points,
            root_face: 0,
            label: 0,
        });
    }
    Ok(StrandSet {
        points_per_strand: n_points,
        strands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fur_core::Pcg32;

    fn random_set(seed: u64, n: usize, pts: usize, labels: bool) -> StrandSet {
        let mut rng = Pcg32::seeded(seed);
        let strands = (0..n)
            .map(|i| Strand {
                points: (0..pts)
                    .map(|_| {
                        [
                            rng.next_f64() * 10.0 - 5.0,
                            rng.next_f64() * 10.0 - 5.0,
                            rng.next_f64() * 10.0 - 5.0,
                        ]
                    })
                    .collect(),
                root_face: 0,
                label: if labels { (i % 16) as u8 } else { 0 },
            })
            .collect();
        StrandSet {
            points_per_strand: pts,
            strands,
        }
    }

    #[test]
    fn sfur_round_trip_byte_stable() {
        let dir = std::env::temp_dir().join("fur_sfur_test");
        std::fs::create_dir_all(&dir).unwrap();
        for labels in [false, true] {
            let set = random_set(3, 20, 12, labels);
            let p1 = dir.join("a.sfur");
            let p2 = dir.join("b.sfur");
            write_sfur(&set, &p1).unwrap();
            let back = read_sfur(&p1).unwrap();
            write_sfur(&back, &p2).unwrap();
            assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
            if labels {
                assert_eq!(back.strands[5].label, set.strands[5].label);
            }
        }
    }

    #[test]
    fn obj_round_trip_exact_float32() {
        let dir = std::env::temp_dir().join("fur_sfur_test");
        std::fs::create_dir_all(&dir).unwrap();
        let set = random_set(9, 15, 8, false);
        let sfur1 = dir.join("r1.sfur");
        let obj = dir.join("r.obj");
        let sfur2 = dir.join("r2.sfur");
        write_sfur(&set, &sfur1).unwrap();
        let loaded = read_sfur(&sfur1).unwrap();
        write_obj_polylines(&loaded, &obj).unwrap();
        let back = read_obj_polylines(&obj).unwrap();
        write_sfur(&back, &sfur2).unwrap();
        // Coordinates must survive to float32 exactness: byte-equal files.
        assert_eq!(std::fs::read(&sfur1).unwrap(), std::fs::read(&sfur2).unwrap());
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = std::env::temp_dir().join("fur_sfur_test");
        std::fs::create_dir_all(&dir).unwrap();
        let set = random_set(1, 4, 6, false);
        let p = dir.join("t.sfur");
        write_sfur(&set, &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 5);
        assert!(read_sfur_bytes(&bytes).is_err());
    }
}
