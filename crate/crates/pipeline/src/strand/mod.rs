//! The neural fur representation: a root-conditioned latent field, the
//! analytic latent-to-polyline decoder, length normalization, world placement
//! and the Gaussian segment parametrization used for splat rendering.

pub mod mlp;

use fur_core::{vec3, Frame};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};
pub use mlp::{Mlp, MlpCache};

/// Points per strand.
pub const STRAND_POINTS: usize = 100;
/// Latent dimensionality of a strand code.
pub const LATENT_DIM: usize = 64;
/// Positional-encoding frequency bands.
pub const PE_BANDS: usize = 10;
/// Cosine modes per spatial channel in the decoder basis.
const MODES_PER_CHANNEL: usize = 20;
/// Latent coordinate that decodes to a straight unit polyline along the
/// local normal.
pub const STRAIGHT_UP_COEFF: usize = 2 * MODES_PER_CHANNEL;

/// One fur fiber: a world-space polyline with root metadata.
#[derive(Clone, Debug)]
pub struct Strand {
    pub points: Vec<[f64; 3]>,
    pub root_face: usize,
    pub label: u8,
}

impl Strand {
    pub fn arc_length(&self) -> f64 {
        polyline_arc_length(&self.points)
    }
}

/// A groom: N strands sharing a point count.
#[derive(Clone, Debug, Default)]
pub struct StrandSet {
    pub points_per_strand: usize,
    pub strands: Vec<Strand>,
}

impl StrandSet {
    pub fn new(points_per_strand: usize) -> Self {
        StrandSet {
            points_per_strand,
            strands: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.strands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strands.is_empty()
    }
}

pub fn polyline_arc_length(points: &[[f64; 3]]) -> f64 {
    points.windows(2).map(|w| vec3::dist(w[0], w[1])).sum()
}

/// Sinusoidal positional encoding: the raw coordinates followed by
/// sin/cos pairs at `bands` octave frequencies per axis.
pub fn positional_encoding(x: [f64; 3], bands: usize) -> Vec<f64> {
    assert!(bands >= 1, "need at least one frequency band");
    let mut out = Vec::with_capacity(3 + 6 * bands);
    out.extend_from_slice(&x);
    for k in 0..bands {
        let freq = (1u64 << k) as f64 * std::f64::consts::PI;
        for d in 0..3 {
            out.push((freq * x[d]).sin());
            out.push((freq * x[d]).cos());
        }
    }
    out
}

/// Jacobian of the positional encoding: d out[row] / d x[col].
pub fn positional_encoding_jacobian(x: [f64; 3], bands: usize) -> Vec<[f64; 3]> {
    let mut jac = vec![[0.0; 3]; 3 + 6 * bands];
    for d in 0..3 {
        jac[d][d] = 1.0;
    }
    let mut row = 3;
    for k in 0..bands {
        let freq = (1u64 << k) as f64 * std::f64::consts::PI;
        for d in 0..3 {
            jac[row][d] = freq * (freq * x[d]).cos();
            jac[row + 1][d] = -freq * (freq * x[d]).sin();
            row += 2;
        }
    }
    jac
}

/// Scalar basis profile for mode `m` at arc parameter `u`.
///
/// Mode 0 is linear; mode m >= 1 integrates the cosine `cos(m pi u)`, so the
/// polyline tangent carries a plain cosine spectrum and every basis curve
/// starts at the origin.
fn mode_profile(m: usize, u: f64) -> f64 {
    if m == 0 {
        u
    } else {
        let mp = m as f64 * std::f64::consts::PI;
        (mp * u).sin() / mp
    }
}

/// Decoder basis value: coefficient `j` contributes `value` along local
/// `channel` (0 = tangent, 1 = bitangent, 2 = normal).
fn basis(j: usize, u: f64) -> (usize, f64) {
    if j < 3 * MODES_PER_CHANNEL {
        (j / MODES_PER_CHANNEL, mode_profile(j % MODES_PER_CHANNEL, u))
    } else {
        // Reserved low-order polynomial modes.
        match j - 3 * MODES_PER_CHANNEL {
            0 => (0, u * u),
            1 => (1, u * u),
            2 => (2, u * u),
            _ => (2, u * u * u),
        }
    }
}

/// The full basis table for a strand of `points` samples: per point, per
/// coefficient, (channel, value).
#[derive(Debug)]
pub struct DecoderBasis {
    pub points: usize,
    values: Vec<[(usize, f64); LATENT_DIM]>,
}

impl DecoderBasis {
    pub fn new(points: usize) -> Self {
        assert!(points >= 2);
        let values = (0..points)
            .map(|l| {
                let u = l as f64 / (points - 1) as f64;
                std::array::from_fn(|j| basis(j, u))
            })
            .collect();
        DecoderBasis { points, values }
    }

    /// Decode a latent into a canonical polyline in local TBN coordinates.
    /// Linear in `z`; the first point is exactly the origin.
    pub fn decode(&self, z: &[f64; LATENT_DIM]) -> Vec<[f64; 3]> {
        self.values
            .iter()
            .map(|row| {
                let mut p = [0.0; 3];
                for (j, &(channel, value)) in row.iter().enumerate() {
                    p[channel] += z[j] * value;
                }
                p
            })
            .collect()
    }

    /// Adjoint of [`DecoderBasis::decode`].
    pub fn backward(&self, d_points: &[[f64; 3]]) -> [f64; LATENT_DIM] {
        let mut dz = [0.0; LATENT_DIM];
        for (row, dp) in self.values.iter().zip(d_points) {
            for (j, &(channel, value)) in row.iter().enumerate() {
                dz[j] += dp[channel] * value;
            }
        }
        dz
    }
}

/// Uniformly scale a canonical polyline so its arc length is exactly
/// `length_cm`. Zero target length means a bald region: no strand.
pub fn normalize_and_scale(polyline: &[[f64; 3]], length_cm: f64) -> Result<Option<Vec<[f64; 3]>>> {
    if length_cm == 0.0 {
        return Ok(None);
    }
    let arc = polyline_arc_length(polyline);
    if arc <= 1e-12 {
        return Err(Error::InvalidInput(format!(
            "cannot scale a zero-arc-length polyline to {length_cm} cm"
        )));
    }
    let s = length_cm / arc;
    Ok(Some(polyline.iter().map(|&p| vec3::scale(p, s)).collect()))
}

/// Rigid placement of a local polyline at a root with a TBN frame.
pub fn to_world(local: &[[f64; 3]], frame: &Frame, root: [f64; 3]) -> Vec<[f64; 3]> {
    local
        .iter()
        .map(|&p| vec3::add(root, frame.world_from_local(p)))
        .collect()
}

/// Anisotropic Gaussian attached to one strand segment.
#[derive(Clone, Copy, Debug)]
pub struct GaussianSegment {
    pub mean: [f64; 3],
    /// World covariance, symmetric.
    pub cov: [[f64; 3]; 3],
    /// Unit segment direction.
    pub direction: [f64; 3],
    pub seg_length: f64,
    pub opacity: f64,
}

/// Paper-pinned strand width (the transverse Gaussian sigma).
pub const STRAND_WIDTH: f64 = 0.0025;
/// Longitudinal sigma as a fraction of segment length: +-1 sigma spans the
/// segment.
pub const K_SCALE_DEFAULT: f64 = 0.5;

/// Gaussians along the segments of a strand: means at segment midpoints,
/// covariance rank-1 along the segment (sigma = k_scale * length) and
/// isotropic `width` across it.
pub fn gaussian_segments(
    strand: &Strand,
    width: f64,
    k_scale: f64,
    opacity: f64,
) -> Result<Vec<GaussianSegment>> {
    let mut out = Vec::with_capacity(strand.points.len().saturating_sub(1));
    for (l, w) in strand.points.windows(2).enumerate() {
        let d = vec3::sub(w[1], w[0]);
        let len = vec3::norm(d);
        if len <= 1e-12 {
            return Err(Error::InvalidInput(format!(
                "degenerate segment {l} (length {len})"
            )));
        }
        let b = vec3::scale(d, 1.0 / len);
        let f = k_scale * len;
        let aniso = f * f - width * width;
        let mut cov = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                cov[r][c] = aniso * b[r] * b[c];
            }
            cov[r][r] += width * width;
        }
        out.push(GaussianSegment {
            mean: vec3::scale(vec3::add(w[0], w[1]), 0.5),
            cov,
            direction: b,
            seg_length: len,
            opacity,
        });
    }
    Ok(out)
}

/// Architecture and normalization of the strand field; serialized alongside
/// the weights.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldSpec {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub bands: usize,
    pub points_per_strand: usize,
    /// Root positions are shifted/scaled into [-1, 1]^3 before encoding.
    pub center: [f64; 3],
    pub half_extent: f64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec {
            hidden_layers: 4,
            hidden_width: 128,
            bands: PE_BANDS,
            points_per_strand: STRAND_POINTS,
            center: [0.0; 3],
            half_extent: 1.0,
        }
    }
}

impl FieldSpec {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![3 + 6 * self.bands];
        sizes.extend(std::iter::repeat(self.hidden_width).take(self.hidden_layers));
        sizes.push(LATENT_DIM);
        sizes
    }
}

/// How the field's final-layer bias is seeded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldInit {
    /// Bias the straight-up coefficient so untrained strands grow along the
    /// surface normal.
    StraightUp,
    /// Leave the randomly initialized network as is.
    Random,
}

/// The root-conditioned latent field plus the fixed analytic decoder.
#[derive(Clone, Debug)]
pub struct StrandField {
    pub spec: FieldSpec,
    pub mlp: Mlp,
    pub basis: std::sync::Arc<DecoderBasis>,
}

impl StrandField {
    pub fn new(spec: FieldSpec, seed: u64, init: FieldInit) -> Self {
        let mut mlp = Mlp::init(&spec.layer_sizes(), seed);
        if init == FieldInit::StraightUp {
            // Damp the output layer so the bias dominates: untrained strands
            // then grow along the local normal instead of random directions.
            let sizes = mlp.sizes.clone();
            let last_in = sizes[sizes.len() - 2];
            let n = mlp.params.len();
            let tail = n - LATENT_DIM * (last_in + 1);
            for w in mlp.params[tail..n - LATENT_DIM].iter_mut() {
                *w *= 1e-2;
            }
            mlp.params[n - LATENT_DIM + STRAIGHT_UP_COEFF] = 1.0;
        }
        let basis = std::sync::Arc::new(DecoderBasis::new(spec.points_per_strand));
        StrandField { spec, mlp, basis }
    }

    fn normalized_root(&self, root: [f64; 3]) -> [f64; 3] {
        let inv = 1.0 / self.spec.half_extent;
        vec3::scale(vec3::sub(root, self.spec.center), inv)
    }

    pub fn encode_root(&self, root: [f64; 3]) -> Vec<f64> {
        positional_encoding(self.normalized_root(root), self.spec.bands)
    }

    /// Latent code at a root position (deterministic forward pass).
    pub fn query(&self, root: [f64; 3]) -> [f64; LATENT_DIM] {
        let (out, _) = self.mlp.forward(&self.encode_root(root));
        out.try_into().expect("latent width fixed by architecture")
    }

    /// Latent plus the cache needed to backpropagate through the query.
    pub fn query_cached(&self, root: [f64; 3]) -> ([f64; LATENT_DIM], MlpCache) {
        let (out, cache) = self.mlp.forward(&self.encode_root(root));
        (out.try_into().expect("latent width"), cache)
    }

    /// Jacobian of the latent with respect to the (unnormalized) root.
    pub fn query_jacobian(&self, root: [f64; 3]) -> Vec<[f64; 3]> {
        let x = self.normalized_root(root);
        let pe_jac = positional_encoding_jacobian(x, self.spec.bands);
        let inv = 1.0 / self.spec.half_extent;
        let (_, cache) = self.mlp.forward(&positional_encoding(x, self.spec.bands));
        let mut grad = vec![0.0; self.mlp.params.len()];
        (0..LATENT_DIM)
            .map(|row| {
                let mut probe = [0.0; LATENT_DIM];
                probe[row] = 1.0;
                grad.iter_mut().for_each(|g| *g = 0.0);
                let d_in = self.mlp.backward(&cache, &probe, &mut grad);
                let mut dx = [0.0; 3];
                for (di, jac_row) in d_in.iter().zip(&pe_jac) {
                    for c in 0..3 {
                        dx[c] += di * jac_row[c] * inv;
                    }
                }
                dx
            })
            .collect()
    }
}

const FIELD_MAGIC: &[u8; 4] = b"SFLD";
const FIELD_VERSION: u32 = 1;

/// Persist a trained field: magic, version, JSON spec header, then the flat
/// f64 parameters little-endian.
pub fn save_field(field: &StrandField, path: impl AsRef<std::path::Path>) -> Result<()> {
    let header = serde_json::to_vec(&field.spec).expect("spec serializes");
    let mut out = Vec::with_capacity(16 + header.len() + field.mlp.params.len() * 8);
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&(field.mlp.params.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for p in &field.mlp.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_field(path: impl AsRef<std::path::Path>) -> Result<StrandField> {
    let path_str = path.as_ref().display().to_string();
    let data = std::fs::read(path.as_ref())?;
    let fail = |reason: &str| Error::Format {
        path: path_str.clone(),
        reason: reason.to_string(),
    };
    if data.len() < 16 || &data[0..4] != FIELD_MAGIC {
        return Err(fail("missing SFLD magic"));
    }
    let u32_at = |off: usize| u32::from_le_bytes(data[off..off + 4].try_into().unwrap());
    if u32_at(4) != FIELD_VERSION {
        return Err(fail("unsupported field version"));
    }
    let header_len = u32_at(8) as usize;
    let n_params = u32_at(12) as usize;
    if data.len() != 16 + header_len + n_params * 8 {
        return Err(fail("size mismatch"));
    }
    let spec: FieldSpec = serde_json::from_slice(&data[16..16 + header_len])
        .map_err(|e| fail(&format!("bad spec header: {e}")))?;
    let mut field = StrandField::new(spec, 0, FieldInit::Random);
    if field.mlp.params.len() != n_params {
        return Err(fail(&format!(
            "parameter count {} does not match the architecture ({})",
            n_params,
            field.mlp.params.len()
        )));
    }
    let mut cursor = 16 + header_len;
    for p in field.mlp.params.iter_mut() {
        *p = f64::from_le_bytes(data[cursor..cursor + 8].try_into().unwrap());
        cursor += 8;
    }
    Ok(field)
}

/// Everything needed to grow one strand: where, which way, how long.
#[derive(Clone, Copy, Debug)]
pub struct RootSpec {
    pub position: [f64; 3],
    pub frame: Frame,
    pub face: usize,
    pub label: u8,
    pub length_cm: f64,
    /// Annotated growth direction for the direction-consistency loss.
    pub growth_dir: [f64; 3],
}

/// Forward evaluation of a batch of roots with caches for the backward pass.
pub struct StrandBatch {
    pub roots: Vec<RootSpec>,
    pub strands: StrandSet,
    caches: Vec<MlpCache>,
    locals: Vec<Vec<[f64; 3]>>,
    arcs: Vec<f64>,
    scales: Vec<f64>,
}

impl StrandField {
    /// Decode every root into a world-space strand. Roots on bald parts
    /// (length 0) are skipped, mirroring generation.
    pub fn grow_batch(&self, roots: &[RootSpec]) -> Result<StrandBatch> {
        let mut strands = StrandSet::new(self.spec.points_per_strand);
        let mut caches = Vec::with_capacity(roots.len());
        let mut locals = Vec::with_capacity(roots.len());
        let mut arcs = Vec::with_capacity(roots.len());
        let mut scales = Vec::with_capacity(roots.len());
        let mut kept_roots = Vec::with_capacity(roots.len());
        for root in roots {
            if root.length_cm == 0.0 {
                continue;
            }
            let (z, cache) = self.query_cached(root.position);
            let local = self.basis.decode(&z);
            let arc = polyline_arc_length(&local);
            if arc <= 1e-12 {
                return Err(Error::InvalidInput(
                    "decoded polyline has zero arc length".into(),
                ));
            }
            let scale = root.length_cm / arc;
            let points: Vec<[f64; 3]> = local
                .iter()
                .map(|&p| {
                    vec3::add(
                        root.position,
                        root.frame.world_from_local(vec3::scale(p, scale)),
                    )
                })
                .collect();
            strands.strands.push(Strand {
                points,
                root_face: root.face,
                label: root.label,
            });
            caches.push(cache);
            locals.push(local);
            arcs.push(arc);
            scales.push(scale);
            kept_roots.push(*root);
        }
        Ok(StrandBatch {
            roots: kept_roots,
            strands,
            caches,
            locals,
            arcs,
            scales,
        })
    }

    /// Backpropagate world-point adjoints through scaling, placement and the
    /// MLP, accumulating into the flat parameter gradient.
    pub fn backward_batch(
        &self,
        batch: &StrandBatch,
        d_world: &[Vec<[f64; 3]>],
        grad: &mut [f64],
    ) {
        debug_assert_eq!(d_world.len(), batch.strands.len());
        let n_points = self.spec.points_per_strand;
        for (i, d_strand) in d_world.iter().enumerate() {
            let root = &batch.roots[i];
            let local = &batch.locals[i];
            let scale = batch.scales[i];
            let arc = batch.arcs[i];

            // World -> scaled-local adjoint (rigid frame transpose).
            let mut d_scaled: Vec<[f64; 3]> = d_strand
                .iter()
                .map(|&d| root.frame.local_from_world(d))
                .collect();

            // scaled = scale * local; scale = length / arc(local).
            let mut d_scale = 0.0;
            for (ds, p) in d_scaled.iter().zip(local) {
                d_scale += vec3::dot(*ds, *p);
            }
            let d_arc = -root.length_cm / (arc * arc) * d_scale;
            for ds in d_scaled.iter_mut() {
                *ds = vec3::scale(*ds, scale);
            }
            // Arc-length adjoint distributes along unit chords.
            for l in 0..n_points - 1 {
                let d = vec3::sub(local[l + 1], local[l]);
                let len = vec3::norm(d);
                if len <= 1e-300 {
                    continue;
                }
                let u = vec3::scale(d, d_arc / len);
                d_scaled[l + 1] = vec3::add(d_scaled[l + 1], u);
                d_scaled[l] = vec3::sub(d_scaled[l], u);
            }

            let dz = self.basis.backward(&d_scaled);
            self.mlp.backward(&batch.caches[i], &dz, grad);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fur_core::Pcg32;

    #[test]
    fn encoding_at_zero_and_dimension() {
        let pe = positional_encoding([0.0; 3], 10);
        assert_eq!(pe.len(), 63);
        for k in 0..10 {
            for d in 0..3 {
                assert_eq!(pe[3 + 6 * k + 2 * d], 0.0); // sin
                assert_eq!(pe[3 + 6 * k + 2 * d + 1], 1.0); // cos
            }
        }
    }

    #[test]
    fn encoding_base_band_periodicity() {
        let a = positional_encoding([0.3, -0.7, 1.1], 4);
        let b = positional_encoding([2.3, 1.3, 3.1], 4);
        // Base band has period 2 in each coordinate.
        for d in 0..3 {
            assert!((a[3 + 2 * d] - b[3 + 2 * d]).abs() < 1e-9);
            assert!((a[3 + 2 * d + 1] - b[3 + 2 * d + 1]).abs() < 1e-9);
        }
    }

    #[test]
    fn straight_up_basis_coefficient() {
        let basis = DecoderBasis::new(STRAND_POINTS);
        let mut z = [0.0; LATENT_DIM];
        z[STRAIGHT_UP_COEFF] = 1.0;
        let pts = basis.decode(&z);
        assert_eq!(pts[0], [0.0; 3]);
        for (l, p) in pts.iter().enumerate() {
            let u = l as f64 / (STRAND_POINTS - 1) as f64;
            assert!(p[0].abs() < 1e-15 && p[1].abs() < 1e-15);
            assert!((p[2] - u).abs() < 1e-15);
        }
    }

    #[test]
    fn decode_is_linear() {
        let basis = DecoderBasis::new(40);
        let mut rng = Pcg32::seeded(5);
        let mut z1 = [0.0; LATENT_DIM];
        let mut z2 = [0.0; LATENT_DIM];
        for j in 0..LATENT_DIM {
            z1[j] = rng.next_f64() - 0.5;
            z2[j] = rng.next_f64() - 0.5;
        }
        let (a, b) = (0.7, -1.3);
        let mut zc = [0.0; LATENT_DIM];
        for j in 0..LATENT_DIM {
            zc[j] = a * z1[j] + b * z2[j];
        }
        let pc = basis.decode(&zc);
        let p1 = basis.decode(&z1);
        let p2 = basis.decode(&z2);
        for l in 0..40 {
            for c in 0..3 {
                let expect = a * p1[l][c] + b * p2[l][c];
                assert!((pc[l][c] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn arc_length_matches_dense_resampling() {
        // The polyline arc length is the length of its piecewise-linear
        // trace: dense resampling of every chord must reproduce it.
        let basis = DecoderBasis::new(STRAND_POINTS);
        let mut rng = Pcg32::seeded(9);
        let mut z = [0.0; LATENT_DIM];
        for v in z.iter_mut() {
            *v = rng.next_f64() - 0.5;
        }
        let pts = basis.decode(&z);
        let direct = polyline_arc_length(&pts);
        let mut dense = 0.0;
        let sub = 500;
        for w in pts.windows(2) {
            for s in 0..sub {
                let t0 = s as f64 / sub as f64;
                let t1 = (s + 1) as f64 / sub as f64;
                dense += vec3::dist(vec3::lerp(w[0], w[1], t0), vec3::lerp(w[0], w[1], t1));
            }
        }
        assert!((direct - dense).abs() < 1e-6 * direct.max(1.0));
    }

    #[test]
    fn normalize_and_scale_contract() {
        let line = vec![[0.0, 0.0, 0.0], [0.0, 0.0, 0.5], [0.0, 0.0, 1.0]];
        let scaled = normalize_and_scale(&line, 7.5).unwrap().unwrap();
        assert!((polyline_arc_length(&scaled) - 7.5).abs() < 1e-12);

        // Bald region: no strand.
        assert!(normalize_and_scale(&line, 0.0).unwrap().is_none());

        // Identity scale.
        let same = normalize_and_scale(&line, 1.0).unwrap().unwrap();
        for (a, b) in same.iter().zip(&line) {
            assert!(vec3::dist(*a, *b) < 1e-9);
        }

        // Degenerate input with positive target errors out.
        let degenerate = vec![[1.0, 2.0, 3.0]; 4];
        assert!(normalize_and_scale(&degenerate, 1.0).is_err());
    }

    #[test]
    fn to_world_identity_and_isometry() {
        let frame = Frame {
            tangent: [1.0, 0.0, 0.0],
            bitangent: [0.0, 1.0, 0.0],
            normal: [0.0, 0.0, 1.0],
        };
        let local = vec![[0.0, 0.0, 0.0], [0.1, 0.2, 0.3], [0.0, 0.5, 0.9]];
        let world = to_world(&local, &frame, [0.0; 3]);
        for (a, b) in world.iter().zip(&local) {
            assert_eq!(a, b);
        }
        // Rotated frame preserves arc length and matches the matrix oracle.
        let angle = std::f64::consts::FRAC_PI_2;
        let rot = Frame {
            tangent: [angle.cos(), angle.sin(), 0.0],
            bitangent: [-angle.sin(), angle.cos(), 0.0],
            normal: [0.0, 0.0, 1.0],
        };
        let world = to_world(&local, &rot, [1.0, 2.0, 3.0]);
        assert!(
            (polyline_arc_length(&world) - polyline_arc_length(&local)).abs() < 1e-9
        );
        for (w, l) in world.iter().zip(&local) {
            let expect = [
                1.0 + angle.cos() * l[0] - angle.sin() * l[1],
                2.0 + angle.sin() * l[0] + angle.cos() * l[1],
                3.0 + l[2],
            ];
            assert!(vec3::dist(*w, expect) < 1e-12);
        }
    }

    #[test]
    fn field_query_deterministic_and_zero_weight() {
        let field = StrandField::new(FieldSpec::default(), 42, FieldInit::Random);
        let a = field.query([0.3, -0.2, 0.9]);
        let b = field.query([0.3, -0.2, 0.9]);
        assert_eq!(a, b);

        let mut zeroed = field.clone();
        for p in zeroed.mlp.params.iter_mut() {
            *p = 0.0;
        }
        assert!(zeroed.query([1.0, 2.0, 3.0]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn query_jacobian_matches_fd() {
        let spec = FieldSpec {
            hidden_layers: 2,
            hidden_width: 32,
            bands: 4,
            points_per_strand: 16,
            center: [0.0; 3],
            half_extent: 2.0,
        };
        let field = StrandField::new(spec, 7, FieldInit::Random);
        let mut rng = Pcg32::seeded(21);
        for _ in 0..20 {
            let root = [
                rng.next_f64() * 2.0 - 1.0,
                rng.next_f64() * 2.0 - 1.0,
                rng.next_f64() * 2.0 - 1.0,
            ];
            let jac = field.query_jacobian(root);
            let h = 1e-6;
            for d in 0..3 {
                let mut rp = root;
                let mut rm = root;
                rp[d] += h;
                rm[d] -= h;
                let zp = field.query(rp);
                let zm = field.query(rm);
                for row in 0..LATENT_DIM {
                    let fd = (zp[row] - zm[row]) / (2.0 * h);
                    let denom = fd.abs().max(jac[row][d].abs()).max(1e-6);
                    assert!(
                        (jac[row][d] - fd).abs() / denom < 1e-4,
                        "row {row} d {d}: {} vs {}",
                        jac[row][d],
                        fd
                    );
                }
            }
        }
    }

    fn test_root(length: f64) -> RootSpec {
        RootSpec {
            position: [0.4, -0.1, 0.2],
            frame: Frame {
                tangent: [1.0, 0.0, 0.0],
                bitangent: [0.0, 1.0, 0.0],
                normal: [0.0, 0.0, 1.0],
            },
            face: 0,
            label: 3,
            length_cm: length,
            growth_dir: [0.0, 0.0, 1.0],
        }
    }

    #[test]
    fn grow_batch_respects_length_and_anchoring() {
        let field = StrandField::new(FieldSpec::default(), 3, FieldInit::StraightUp);
        let root = test_root(7.5);
        let batch = field.grow_batch(&[root]).unwrap();
        let strand = &batch.strands.strands[0];
        assert_eq!(strand.points.len(), STRAND_POINTS);
        assert!((strand.arc_length() - 7.5).abs() / 7.5 < 1e-9);
        assert_eq!(strand.points[0], root.position);

        // Bald root grows nothing.
        let bald = field.grow_batch(&[test_root(0.0)]).unwrap();
        assert!(bald.strands.is_empty());
    }

    #[test]
    fn world_gradient_wrt_weights_matches_fd() {
        let spec = FieldSpec {
            hidden_layers: 2,
            hidden_width: 24,
            bands: 3,
            points_per_strand: 12,
            center: [0.0; 3],
            half_extent: 1.5,
        };
        let field = StrandField::new(spec.clone(), 11, FieldInit::Random);
        let root = test_root(2.0);

        // Probe functional: deterministic random projection of world points.
        let mut rng = Pcg32::seeded(77);
        let probe: Vec<[f64; 3]> = (0..spec.points_per_strand)
            .map(|_| {
                [
                    rng.next_f64() - 0.5,
                    rng.next_f64() - 0.5,
                    rng.next_f64() - 0.5,
                ]
            })
            .collect();
        let eval = |f: &StrandField| -> f64 {
            let batch = f.grow_batch(&[root]).unwrap();
            batch.strands.strands[0]
                .points
                .iter()
                .zip(&probe)
                .map(|(p, q)| vec3::dot(*p, *q))
                .sum()
        };

        let batch = field.grow_batch(&[root]).unwrap();
        let mut grad = vec![0.0; field.mlp.params.len()];
        field.backward_batch(&batch, &[probe.clone()], &mut grad);

        let mut rng = Pcg32::seeded(78);
        for _ in 0..10 {
            let idx = rng.next_below(grad.len());
            let h = 1e-6;
            let mut plus = field.clone();
            plus.mlp.params[idx] += h;
            let mut minus = field.clone();
            minus.mlp.params[idx] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let denom = fd.abs().max(grad[idx].abs()).max(1e-7);
            assert!(
                (grad[idx] - fd).abs() / denom < 1e-3,
                "param {idx}: {} vs {}",
                grad[idx],
                fd
            );
        }
    }

    #[test]
    fn gaussian_segment_shapes() {
        let strand = Strand {
            points: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
            root_face: 0,
            label: 0,
        };
        let gs = gaussian_segments(&strand, 0.1, 0.5, 0.8).unwrap();
        assert_eq!(gs.len(), 1);
        let g = &gs[0];
        assert_eq!(g.mean, [0.5, 0.0, 0.0]);
        // Eigenvalues along/across the segment: f^2 = 0.25, eps^2 = 0.01.
        assert!((g.cov[0][0] - 0.25).abs() < 1e-12);
        assert!((g.cov[1][1] - 0.01).abs() < 1e-12);
        assert!((g.cov[2][2] - 0.01).abs() < 1e-12);
        assert!(g.cov[0][1].abs() < 1e-15);

        // A strand of L points yields exactly L-1 Gaussians, all PSD.
        let field = StrandField::new(FieldSpec::default(), 4, FieldInit::StraightUp);
        let batch = field.grow_batch(&[test_root(3.0)]).unwrap();
        let gs = gaussian_segments(&batch.strands.strands[0], STRAND_WIDTH, 0.5, 0.8).unwrap();
        assert_eq!(gs.len(), STRAND_POINTS - 1);
        for g in &gs {
            // Symmetric rank-1 + isotropic form: eigenvalues are
            // {k^2 len^2, width^2, width^2}, all positive.
            let quad = |v: [f64; 3]| -> f64 {
                let mut acc = 0.0;
                for r in 0..3 {
                    for c in 0..3 {
                        acc += v[r] * g.cov[r][c] * v[c];
                    }
                }
                acc
            };
            assert!(quad(g.direction) > 0.0);
            assert!(quad(vec3::any_orthogonal(g.direction)) > -1e-10);
        }
    }
}
