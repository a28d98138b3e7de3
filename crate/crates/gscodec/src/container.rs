//! Single-file container format and the static/dynamic codec pipelines.
//!
//! Layout (all integers little-endian, floats IEEE-754 binary32):
//! `magic "GSCS" (4) | version u16 | flavor u8 | header-length u32 | header |
//! chunk payloads`. The header carries the point/grid geometry, the GOF
//! table, and a chunk directory with per-chunk codec, quantization schemes,
//! payload offset/length (relative to the payload area), and CRC-32.
//!
//! Points are stored in plane (PLAS-sorted) order, so no permutation chunk
//! is needed: valid grid cells are exactly the first N in row-major order.

use std::collections::BTreeMap;

use crate::dynamics::{GofSegment, MotionModel, PolynomialMotion, TemporalOpacity};
use crate::entropy::fit_factorized;
use crate::error::{Error, Result};
use crate::plas::{
    decode_png, encode_png, pack_planes, sort_plas, sorting_features, unpack_planes, PlaneGrid,
    PlasConfig, SortWeights,
};
use crate::preprocess::{
    apply_mask, derive_sh_mask, prune_by_opacity, prune_by_scale, prune_outliers_kdtree,
};
use crate::quantize::{
    dequantize_scalar, fit_scheme, fit_vq_codebook, quantize_scalar, vq_decode, vq_encode,
    QuantizationScheme, Transform, VQCodebook,
};
use crate::splat::{DynamicGaussianCloud, GaussianCloud, FLAG_DIFFUSE_ONLY};

pub const MAGIC: [u8; 4] = *b"GSCS";
pub const VERSION: u16 = 1;

/// Fixed prefix before the header body: magic + version + flavor + length.
const PREFIX_LEN: usize = 4 + 2 + 1 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Static = 0,
    Dynamic = 1,
}

impl Flavor {
    fn from_tag(tag: u8) -> Result<Flavor> {
        match tag {
            0 => Ok(Flavor::Static),
            1 => Ok(Flavor::Dynamic),
            t => Err(Error::MalformedHeader(format!("unknown flavor {t}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChunkCodec {
    PngPlane = 0,
    Ans = 1,
    VqAns = 2,
    RawConstant = 3,
    Raw = 4,
}

impl ChunkCodec {
    fn from_tag(tag: u8) -> Result<ChunkCodec> {
        Ok(match tag {
            0 => ChunkCodec::PngPlane,
            1 => ChunkCodec::Ans,
            2 => ChunkCodec::VqAns,
            3 => ChunkCodec::RawConstant,
            4 => ChunkCodec::Raw,
            t => return Err(Error::MalformedHeader(format!("unknown codec {t}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkInfo {
    pub name: String,
    pub codec: ChunkCodec,
    pub channels: u8,
    /// One scheme per channel for scalar-quantized chunks; empty otherwise.
    pub schemes: Vec<QuantizationScheme>,
    /// Offset into the payload area (bytes after the header).
    pub offset: u64,
    pub length: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofEntry {
    pub index: u32,
    pub f_start: u32,
    pub f_end: u32,
    pub point_count: u32,
    pub grid_w: u32,
    pub grid_h: u32,
    pub t_start: f32,
    pub t_end: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerHeader {
    pub version: u16,
    pub flavor: Flavor,
    /// Static: point count. Dynamic: 0 (per-GOF counts live in the table).
    pub point_count: u32,
    pub sh_degree: u8,
    pub grid_w: u32,
    pub grid_h: u32,
    pub gofs: Vec<GofEntry>,
    pub chunks: Vec<ChunkInfo>,
}

/// Per-attribute coding route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    PngPlane,
    Ans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttrRoute {
    pub route: Route,
    pub bits: u8,
}

#[derive(Debug, Clone)]
pub struct EncodeConfig {
    /// Minimum sigmoid opacity; 0 disables opacity pruning.
    pub prune_opacity: f32,
    /// Optional (s_min, s_max) bounds on the largest axis scale.
    pub prune_scale: Option<(f32, f32)>,
    /// Optional (k, m) statistical outlier removal.
    pub prune_outliers: Option<(usize, f32)>,
    pub means: AttrRoute,
    pub rotations: AttrRoute,
    pub log_scales: AttrRoute,
    pub opacity: AttrRoute,
    pub sh0: AttrRoute,
    /// VQ codebook size for higher-order SH (<= 4096).
    pub sh_n_vq_k: usize,
    pub sh_n_vq_iters: usize,
    /// Energy threshold for the SH mask; points below store no SH-N.
    pub sh_mask_eps: f32,
    pub motion_bits: u8,
    pub temporal_bits: u8,
    /// Tail clip percentage for scheme fitting (0 keeps exact min/max and
    /// the Q_s/2 bound for all inputs).
    pub clip_pct: f32,
    pub plas: PlasConfig,
    pub sort_weights: SortWeights,
    /// Dynamic preset: frames per group-of-frames.
    pub gof_len: usize,
    pub seed: u64,
}

impl EncodeConfig {
    pub fn static_gscodec() -> EncodeConfig {
        EncodeConfig {
            prune_opacity: 0.005,
            prune_scale: None,
            prune_outliers: None,
            means: AttrRoute {
                route: Route::PngPlane,
                bits: 16,
            },
            rotations: AttrRoute {
                route: Route::PngPlane,
                bits: 8,
            },
            log_scales: AttrRoute {
                route: Route::PngPlane,
                bits: 8,
            },
            opacity: AttrRoute {
                route: Route::PngPlane,
                bits: 8,
            },
            sh0: AttrRoute {
                route: Route::PngPlane,
                bits: 8,
            },
            sh_n_vq_k: 4096,
            sh_n_vq_iters: 8,
            sh_mask_eps: 1e-8,
            motion_bits: 16,
            temporal_bits: 16,
            clip_pct: 0.0,
            plas: PlasConfig::default(),
            sort_weights: SortWeights::default(),
            gof_len: 50,
            seed: 0,
        }
    }

    pub fn dynamic_gscodec() -> EncodeConfig {
        EncodeConfig::static_gscodec()
    }

    pub fn preset(name: &str) -> Option<EncodeConfig> {
        match name {
            "static-gscodec" => Some(EncodeConfig::static_gscodec()),
            "dynamic-gscodec" => Some(EncodeConfig::dynamic_gscodec()),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Header serialization

fn write_scheme(out: &mut Vec<u8>, s: &QuantizationScheme) {
    out.push(s.transform.tag());
    out.push(s.bits);
    out.extend_from_slice(&s.v_min.to_le_bytes());
    out.extend_from_slice(&s.v_max.to_le_bytes());
}

impl ContainerHeader {
    fn body_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.point_count.to_le_bytes());
        out.push(self.sh_degree);
        out.extend_from_slice(&self.grid_w.to_le_bytes());
        out.extend_from_slice(&self.grid_h.to_le_bytes());
        out.extend_from_slice(&(self.gofs.len() as u32).to_le_bytes());
        for g in &self.gofs {
            out.extend_from_slice(&g.index.to_le_bytes());
            out.extend_from_slice(&g.f_start.to_le_bytes());
            out.extend_from_slice(&g.f_end.to_le_bytes());
            out.extend_from_slice(&g.point_count.to_le_bytes());
            out.extend_from_slice(&g.grid_w.to_le_bytes());
            out.extend_from_slice(&g.grid_h.to_le_bytes());
            out.extend_from_slice(&g.t_start.to_le_bytes());
            out.extend_from_slice(&g.t_end.to_le_bytes());
        }
        out.extend_from_slice(&(self.chunks.len() as u32).to_le_bytes());
        for c in &self.chunks {
            let name = c.name.as_bytes();
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name);
            out.push(c.codec as u8);
            out.push(c.channels);
            out.push(c.schemes.len() as u8);
            for s in &c.schemes {
                write_scheme(&mut out, s);
            }
            out.extend_from_slice(&c.offset.to_le_bytes());
            out.extend_from_slice(&c.length.to_le_bytes());
            out.extend_from_slice(&c.crc32.to_le_bytes());
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let body = self.body_bytes();
        let mut out = Vec::with_capacity(PREFIX_LEN + body.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.push(self.flavor as u8);
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    /// Parse the header and return it with the payload start offset.
    pub fn parse(bytes: &[u8]) -> Result<(ContainerHeader, usize)> {
        if bytes.len() < PREFIX_LEN {
            return Err(Error::Truncated(bytes.len()));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::BadVersion(version));
        }
        let flavor = Flavor::from_tag(bytes[6])?;
        let header_len =
            u32::from_le_bytes([bytes[7], bytes[8], bytes[9], bytes[10]]) as usize;
        let payload_start = PREFIX_LEN + header_len;
        if bytes.len() < payload_start {
            return Err(Error::Truncated(bytes.len()));
        }
        let mut r = Reader::new(&bytes[PREFIX_LEN..payload_start]);
        let point_count = r.u32()?;
        let sh_degree = r.u8()?;
        let grid_w = r.u32()?;
        let grid_h = r.u32()?;
        let gof_count = r.u32()? as usize;
        let mut gofs = Vec::with_capacity(gof_count);
        for _ in 0..gof_count {
            gofs.push(GofEntry {
                index: r.u32()?,
                f_start: r.u32()?,
                f_end: r.u32()?,
                point_count: r.u32()?,
                grid_w: r.u32()?,
                grid_h: r.u32()?,
                t_start: r.f32()?,
                t_end: r.f32()?,
            });
        }
        let chunk_count = r.u32()? as usize;
        let mut chunks = Vec::with_capacity(chunk_count);
        for _ in 0..chunk_count {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::MalformedHeader("chunk name is not UTF-8".into()))?;
            let codec = ChunkCodec::from_tag(r.u8()?)?;
            let channels = r.u8()?;
            let scheme_count = r.u8()? as usize;
            let mut schemes = Vec::with_capacity(scheme_count);
            for c in 0..scheme_count {
                let transform = Transform::from_tag(r.u8()?)
                    .ok_or_else(|| Error::MalformedHeader("unknown transform tag".into()))?;
                let bits = r.u8()?;
                let v_min = r.f32()?;
                let v_max = r.f32()?;
                schemes.push(QuantizationScheme {
                    attribute: format!("{name}.{c}"),
                    transform,
                    bits,
                    v_min,
                    v_max,
                });
            }
            let offset = r.u64()?;
            let length = r.u64()?;
            let crc32 = r.u32()?;
            chunks.push(ChunkInfo {
                name,
                codec,
                channels,
                schemes,
                offset,
                length,
                crc32,
            });
        }
        // Directory sanity: every chunk inside the payload area.
        let payload_len = (bytes.len() - payload_start) as u64;
        for c in &chunks {
            if c.offset + c.length > payload_len {
                return Err(Error::MalformedHeader(format!(
                    "chunk `{}` range {}..{} exceeds payload size {payload_len}",
                    c.name,
                    c.offset,
                    c.offset + c.length
                )));
            }
        }
        Ok((
            ContainerHeader {
                version,
                flavor,
                point_count,
                sh_degree,
                grid_w,
                grid_h,
                gofs,
                chunks,
            },
            payload_start,
        ))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Reader<'a> {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated(self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

// ---------------------------------------------------------------------------
// Scalar chunk coding

struct ChunkData {
    name: String,
    codec: ChunkCodec,
    channels: u8,
    schemes: Vec<QuantizationScheme>,
    payload: Vec<u8>,
}

fn is_degenerate(s: &QuantizationScheme) -> bool {
    s.v_min == s.v_max
}

fn fit_channel_scheme(
    attr: &str,
    values: &[f32],
    bits: u8,
    clip_pct: f32,
) -> Result<QuantizationScheme> {
    match fit_scheme(attr, values, Transform::Identity, bits, clip_pct) {
        Ok(s) => Ok(s),
        Err(Error::DegenerateRange(v)) => Ok(QuantizationScheme {
            attribute: attr.to_string(),
            transform: Transform::Identity,
            bits,
            v_min: v,
            v_max: v,
        }),
        Err(e) => Err(e),
    }
}

/// Append one `u32 len | model | u32 len | ans bytes` record.
fn write_one_stream(syms: &[u32], symbol_count: usize, out: &mut Vec<u8>) -> Result<()> {
    let model = fit_factorized(syms, symbol_count, 1.0)?;
    let mb = model.to_bytes();
    out.extend_from_slice(&(mb.len() as u32).to_le_bytes());
    out.extend_from_slice(&mb);
    let data = model.encode(syms)?;
    out.extend_from_slice(&(data.len() as u32).to_le_bytes());
    out.extend_from_slice(&data);
    Ok(())
}

/// Fit one model per (sub-)stream and append `u32 len | model | u32 len |
/// ans bytes` records. Streams wider than 8 bits split into hi/lo bytes.
fn write_symbol_streams(symbols: &[u32], bits: u8, out: &mut Vec<u8>) -> Result<()> {
    if bits <= 8 {
        out.push(1);
        write_one_stream(symbols, 1usize << bits, out)?;
    } else {
        out.push(2);
        let hi: Vec<u32> = symbols.iter().map(|&s| s >> 8).collect();
        let lo: Vec<u32> = symbols.iter().map(|&s| s & 0xFF).collect();
        write_one_stream(&hi, 1usize << (bits - 8), out)?;
        write_one_stream(&lo, 256, out)?;
    }
    Ok(())
}

fn read_symbol_streams(r: &mut Reader, n: usize) -> Result<Vec<u32>> {
    let read_one = |r: &mut Reader| -> Result<Vec<u32>> {
        let mlen = r.u32()? as usize;
        let model = crate::entropy::FactorizedHistogramModel::from_bytes(r.take(mlen)?)?;
        let dlen = r.u32()? as usize;
        model.decode(r.take(dlen)?, n)
    };
    match r.u8()? {
        1 => read_one(r),
        2 => {
            let hi = read_one(r)?;
            let lo = read_one(r)?;
            Ok(hi.iter().zip(&lo).map(|(&h, &l)| h * 256 + l).collect())
        }
        k => Err(Error::MalformedHeader(format!("bad stream count {k}"))),
    }
}

/// Quantize and code one scalar attribute (point-major, `channels` values
/// per point). Returns the chunk plus the encoder-side symbols.
fn build_scalar_chunk(
    name: &str,
    values: &[f32],
    channels: usize,
    route: Route,
    bits: u8,
    clip_pct: f32,
    grid: &PlaneGrid,
) -> Result<(ChunkData, Vec<u32>)> {
    let n = grid.len();
    if values.len() != n * channels {
        return Err(Error::DimensionMismatch(format!(
            "{name}: {} values != {n} x {channels}",
            values.len()
        )));
    }
    let mut schemes = Vec::with_capacity(channels);
    let mut symbols = vec![0u32; n * channels];
    let mut chan_syms: Vec<Vec<u32>> = Vec::with_capacity(channels);
    for c in 0..channels {
        let chan: Vec<f32> = values[c..].iter().step_by(channels).copied().collect();
        let scheme = fit_channel_scheme(&format!("{name}.{c}"), &chan, bits, clip_pct)?;
        let syms = if is_degenerate(&scheme) {
            vec![0u32; n]
        } else {
            quantize_scalar(&chan, &scheme)?
        };
        for (i, &s) in syms.iter().enumerate() {
            symbols[i * channels + c] = s;
        }
        schemes.push(scheme);
        chan_syms.push(syms);
    }

    if schemes.iter().all(is_degenerate) {
        // Constant attribute: store the channel values raw.
        let mut payload = Vec::with_capacity(channels * 4);
        for s in &schemes {
            payload.extend_from_slice(&s.v_min.to_le_bytes());
        }
        return Ok((
            ChunkData {
                name: name.to_string(),
                codec: ChunkCodec::RawConstant,
                channels: channels as u8,
                schemes,
                payload,
            },
            symbols,
        ));
    }

    let payload = match route {
        Route::PngPlane => {
            let planes = pack_planes(name, &symbols, channels, bits, grid)?;
            let mut out = vec![planes.len() as u8];
            for p in &planes {
                let png = encode_png(p)?;
                out.extend_from_slice(&(png.len() as u32).to_le_bytes());
                out.extend_from_slice(&png);
            }
            out
        }
        Route::Ans => {
            let mut out = Vec::new();
            for (c, syms) in chan_syms.iter().enumerate() {
                if is_degenerate(&schemes[c]) {
                    out.push(0);
                } else {
                    write_symbol_streams(syms, bits, &mut out)?;
                }
            }
            out
        }
    };
    Ok((
        ChunkData {
            name: name.to_string(),
            codec: match route {
                Route::PngPlane => ChunkCodec::PngPlane,
                Route::Ans => ChunkCodec::Ans,
            },
            channels: channels as u8,
            schemes,
            payload,
        },
        symbols,
    ))
}

/// Inverse of `build_scalar_chunk`: `(dequantized values, symbols)`.
fn decode_scalar_chunk(
    info: &ChunkInfo,
    payload: &[u8],
    grid: &PlaneGrid,
) -> Result<(Vec<f32>, Vec<u32>)> {
    let n = grid.len();
    let channels = info.channels as usize;
    if info.schemes.len() != channels {
        return Err(Error::MalformedHeader(format!(
            "chunk `{}`: {} schemes for {channels} channels",
            info.name,
            info.schemes.len()
        )));
    }
    let mut symbols = vec![0u32; n * channels];
    match info.codec {
        ChunkCodec::RawConstant => {}
        ChunkCodec::PngPlane => {
            let mut r = Reader::new(payload);
            let plane_count = r.u8()? as usize;
            let mut planes = Vec::with_capacity(plane_count);
            for _ in 0..plane_count {
                let len = r.u32()? as usize;
                planes.push(decode_png(r.take(len)?, &info.name)?);
            }
            symbols = unpack_planes(&planes, grid)?;
        }
        ChunkCodec::Ans => {
            let mut r = Reader::new(payload);
            for (c, scheme) in info.schemes.iter().enumerate() {
                if is_degenerate(scheme) {
                    let tag = r.u8()?;
                    if tag != 0 {
                        return Err(Error::MalformedHeader(format!(
                            "chunk `{}`: constant channel has streams",
                            info.name
                        )));
                    }
                    continue;
                }
                let syms = read_symbol_streams(&mut r, n)?;
                for (i, &s) in syms.iter().enumerate() {
                    symbols[i * channels + c] = s;
                }
            }
        }
        other => {
            return Err(Error::MalformedHeader(format!(
                "chunk `{}`: codec {other:?} is not scalar",
                info.name
            )))
        }
    }
    let mut values = vec![0.0f32; n * channels];
    for (c, scheme) in info.schemes.iter().enumerate() {
        if is_degenerate(scheme) {
            for i in 0..n {
                values[i * channels + c] = scheme.v_min;
            }
        } else {
            let chan: Vec<u32> = symbols[c..].iter().step_by(channels).copied().collect();
            let deq = dequantize_scalar(&chan, scheme)?;
            for (i, &v) in deq.iter().enumerate() {
                values[i * channels + c] = v;
            }
        }
    }
    Ok((values, symbols))
}

// ---------------------------------------------------------------------------
// SH-N VQ chunk

fn build_shn_chunk(
    cloud: &GaussianCloud,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<(ChunkData, Vec<u32>)> {
    if k > 4096 {
        return Err(Error::InvalidArgument(format!(
            "VQ codebook size {k} exceeds the coder alphabet (4096)"
        )));
    }
    let n = cloud.len();
    let dim = cloud.sh_coeffs() * 3;
    let active: Vec<usize> = (0..n)
        .filter(|&i| {
            cloud
                .flags
                .as_ref()
                .map_or(true, |f| f[i] & FLAG_DIFFUSE_ONLY == 0)
        })
        .collect();

    let mut payload = Vec::new();
    let mut mask = vec![0u8; n.div_ceil(8)];
    for &i in &active {
        mask[i / 8] |= 1 << (i % 8);
    }
    payload.extend_from_slice(&(active.len() as u32).to_le_bytes());
    payload.extend_from_slice(&mask);

    let mut symbols = Vec::new();
    if !active.is_empty() {
        let mut vectors = Vec::with_capacity(active.len() * dim);
        for &i in &active {
            vectors.extend_from_slice(&cloud.sh_n[i * dim..(i + 1) * dim]);
        }
        let codebook = fit_vq_codebook(&vectors, dim, k, iters, seed)?;
        payload.extend_from_slice(&(codebook.k as u32).to_le_bytes());
        payload.extend_from_slice(&(dim as u32).to_le_bytes());
        for v in &codebook.centroids {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        symbols = vq_encode(&vectors, &codebook)?;
        if codebook.k < 2 {
            payload.push(0);
        } else {
            payload.push(1);
            write_one_stream(&symbols, codebook.k, &mut payload)?;
        }
    }
    Ok((
        ChunkData {
            name: "shN".into(),
            codec: ChunkCodec::VqAns,
            channels: 0,
            schemes: Vec::new(),
            payload,
        },
        symbols,
    ))
}

fn decode_shn_chunk(
    payload: &[u8],
    n: usize,
    sh_degree: u8,
) -> Result<(Vec<f32>, Option<Vec<u8>>, Vec<u32>)> {
    let m = crate::splat::sh_coeff_count(sh_degree);
    let dim = m * 3;
    let mut r = Reader::new(payload);
    let active_count = r.u32()? as usize;
    let mask = r.take(n.div_ceil(8))?.to_vec();
    let active: Vec<usize> = (0..n).filter(|&i| mask[i / 8] & (1 << (i % 8)) != 0).collect();
    if active.len() != active_count {
        return Err(Error::MalformedHeader(format!(
            "shN mask has {} active bits, header says {active_count}",
            active.len()
        )));
    }
    let mut sh_n = vec![0.0f32; n * dim];
    let mut flags = vec![FLAG_DIFFUSE_ONLY; n];
    let mut symbols = Vec::new();
    if !active.is_empty() {
        let k = r.u32()? as usize;
        let stored_dim = r.u32()? as usize;
        if stored_dim != dim {
            return Err(Error::DimensionMismatch(format!(
                "shN dim {stored_dim} != {dim} for degree {sh_degree}"
            )));
        }
        let mut centroids = Vec::with_capacity(k * dim);
        for _ in 0..k * dim {
            centroids.push(r.f32()?);
        }
        let codebook = VQCodebook {
            centroids,
            dim,
            k,
            seed: 0,
            distortion_per_iter: Vec::new(),
        };
        symbols = if k < 2 {
            let tag = r.u8()?;
            if tag != 0 {
                return Err(Error::MalformedHeader("shN: k=1 chunk has streams".into()));
            }
            vec![0u32; active.len()]
        } else {
            read_symbol_streams(&mut r, active.len())?
        };
        let decoded = vq_decode(&symbols, &codebook)?;
        for (ai, &i) in active.iter().enumerate() {
            sh_n[i * dim..(i + 1) * dim].copy_from_slice(&decoded[ai * dim..(ai + 1) * dim]);
            flags[i] = 0;
        }
    }
    let flags = if active.len() == n { None } else { Some(flags) };
    Ok((sh_n, flags, symbols))
}

// ---------------------------------------------------------------------------
// Pipeline: prepare (prune + mask + sort)

struct Prepared {
    /// Pruned, masked, plane-ordered cloud.
    cloud: GaussianCloud,
    /// `order[plane_pos] = index into the pruned cloud`.
    order: Vec<usize>,
    /// Indices into the original cloud that survived pruning.
    kept: Vec<usize>,
    grid_w: usize,
    grid_h: usize,
}

fn drop_removed(indices: &mut Vec<usize>, removed: &[usize]) {
    let mut rm = vec![false; indices.len()];
    for &r in removed {
        rm[r] = true;
    }
    let mut pos = 0;
    indices.retain(|_| {
        let keep = !rm[pos];
        pos += 1;
        keep
    });
}

fn prepare_cloud(cloud: &GaussianCloud, config: &EncodeConfig) -> Result<Prepared> {
    let report = cloud.validate();
    let non_finite = report.non_finite_means
        + report.non_finite_rotations
        + report.non_finite_log_scales
        + report.non_finite_opacity
        + report.non_finite_sh0
        + report.non_finite_sh_n
        + report.non_finite_features;
    if non_finite > 0 || !report.dimension_mismatches.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "input cloud fails validation: {report:?}"
        ))
        .in_stage("validate"));
    }

    let mut kept: Vec<usize> = (0..cloud.len()).collect();
    let mut current = cloud.clone();
    if config.prune_opacity > 0.0 {
        let (next, rep) =
            prune_by_opacity(&current, config.prune_opacity).map_err(|e| e.in_stage("prune"))?;
        drop_removed(&mut kept, &rep.indices_removed);
        current = next;
    }
    if let Some((s_min, s_max)) = config.prune_scale {
        let (next, rep) =
            prune_by_scale(&current, s_min, s_max).map_err(|e| e.in_stage("prune"))?;
        drop_removed(&mut kept, &rep.indices_removed);
        current = next;
    }
    if let Some((k, m)) = config.prune_outliers {
        let (next, rep) =
            prune_outliers_kdtree(&current, k, m).map_err(|e| e.in_stage("prune"))?;
        drop_removed(&mut kept, &rep.indices_removed);
        current = next;
    }
    if current.is_empty() {
        return Err(Error::EmptyCloud.in_stage("prune"));
    }

    if current.sh_degree > 0 {
        let mask = derive_sh_mask(&current, config.sh_mask_eps).map_err(|e| e.in_stage("mask"))?;
        current = apply_mask(&current, &mask).map_err(|e| e.in_stage("mask"))?;
    }

    let n = current.len();
    let features = sorting_features(&current, &config.sort_weights);
    let dim = features.len() / n;
    let grid = PlaneGrid::square_for(n);
    let (grid_w, grid_h) = (grid.w, grid.h);
    let sorted =
        sort_plas(&features, n, dim, grid, &config.plas).map_err(|e| e.in_stage("plas"))?;
    let order: Vec<usize> = sorted.cell_to_point()[..n]
        .iter()
        .map(|&p| p as usize)
        .collect();
    let cloud = current.select(&order);
    Ok(Prepared {
        cloud,
        order,
        kept,
        grid_w,
        grid_h,
    })
}

// ---------------------------------------------------------------------------
// Static encode/decode

/// Everything the encoder produced, for bit-level verification.
pub struct EncodeReport {
    pub bytes: Vec<u8>,
    /// The cloud actually coded: pruned, SH-masked, in plane order.
    pub encoded_cloud: GaussianCloud,
    /// Encoder-side quantized symbols per chunk name.
    pub symbols: BTreeMap<String, Vec<u32>>,
    pub schemes: BTreeMap<String, Vec<QuantizationScheme>>,
}

fn scalar_attribute_values(cloud: &GaussianCloud) -> Vec<(&'static str, Vec<f32>, usize)> {
    let n = cloud.len();
    let mut means = Vec::with_capacity(n * 3);
    let mut quats = Vec::with_capacity(n * 4);
    let mut scales = Vec::with_capacity(n * 3);
    let mut sh0 = Vec::with_capacity(n * 3);
    for i in 0..n {
        means.extend_from_slice(&cloud.means[i]);
        quats.extend_from_slice(&cloud.rotations[i]);
        scales.extend_from_slice(&cloud.log_scales[i]);
        sh0.extend_from_slice(&cloud.sh0[i]);
    }
    vec![
        ("mean", means, 3),
        ("quat", quats, 4),
        ("scale", scales, 3),
        ("opa", cloud.opacity_logits.clone(), 1),
        ("sh0", sh0, 3),
    ]
}

fn route_for(name: &str, config: &EncodeConfig) -> AttrRoute {
    match name {
        "mean" => config.means,
        "quat" => config.rotations,
        "scale" => config.log_scales,
        "opa" => config.opacity,
        "sh0" => config.sh0,
        _ => unreachable!("unknown scalar attribute {name}"),
    }
}

fn encode_cloud_chunks(
    cloud: &GaussianCloud,
    config: &EncodeConfig,
    prefix: &str,
    grid: &PlaneGrid,
    chunks: &mut Vec<ChunkData>,
    symbols: &mut BTreeMap<String, Vec<u32>>,
    schemes: &mut BTreeMap<String, Vec<QuantizationScheme>>,
) -> Result<()> {
    for (name, values, channels) in scalar_attribute_values(cloud) {
        let route = route_for(name, config);
        let full = format!("{prefix}{name}");
        let (mut chunk, syms) = build_scalar_chunk(
            &full,
            &values,
            channels,
            route.route,
            route.bits,
            config.clip_pct,
            grid,
        )
        .map_err(|e| e.in_stage("code"))?;
        chunk.name = full.clone();
        symbols.insert(full.clone(), syms);
        schemes.insert(full, chunk.schemes.clone());
        chunks.push(chunk);
    }
    if cloud.sh_degree > 0 {
        let (mut chunk, syms) =
            build_shn_chunk(cloud, config.sh_n_vq_k, config.sh_n_vq_iters, config.seed)
                .map_err(|e| e.in_stage("code"))?;
        let full = format!("{prefix}shN");
        chunk.name = full.clone();
        symbols.insert(full, syms);
        chunks.push(chunk);
    }
    Ok(())
}

fn assemble(
    flavor: Flavor,
    point_count: u32,
    sh_degree: u8,
    grid_w: u32,
    grid_h: u32,
    gofs: Vec<GofEntry>,
    chunks: Vec<ChunkData>,
) -> Vec<u8> {
    let mut infos = Vec::with_capacity(chunks.len());
    let mut payload = Vec::new();
    for c in chunks {
        let offset = payload.len() as u64;
        let crc = crc32fast::hash(&c.payload);
        payload.extend_from_slice(&c.payload);
        infos.push(ChunkInfo {
            name: c.name,
            codec: c.codec,
            channels: c.channels,
            schemes: c.schemes,
            offset,
            length: (payload.len() as u64) - offset,
            crc32: crc,
        });
    }
    let header = ContainerHeader {
        version: VERSION,
        flavor,
        point_count,
        sh_degree,
        grid_w,
        grid_h,
        gofs,
        chunks: infos,
    };
    let mut out = header.to_bytes();
    out.extend_from_slice(&payload);
    out
}

pub fn encode_static_report(cloud: &GaussianCloud, config: &EncodeConfig) -> Result<EncodeReport> {
    let prepared = prepare_cloud(cloud, config)?;
    let n = prepared.cloud.len();
    let grid = PlaneGrid {
        w: prepared.grid_w,
        h: prepared.grid_h,
        perm: (0..n).collect(),
    };
    let mut chunks = Vec::new();
    let mut symbols = BTreeMap::new();
    let mut schemes = BTreeMap::new();
    encode_cloud_chunks(
        &prepared.cloud,
        config,
        "",
        &grid,
        &mut chunks,
        &mut symbols,
        &mut schemes,
    )?;
    let bytes = assemble(
        Flavor::Static,
        n as u32,
        prepared.cloud.sh_degree,
        prepared.grid_w as u32,
        prepared.grid_h as u32,
        Vec::new(),
        chunks,
    );
    Ok(EncodeReport {
        bytes,
        encoded_cloud: prepared.cloud,
        symbols,
        schemes,
    })
}

pub fn encode_static(cloud: &GaussianCloud, config: &EncodeConfig) -> Result<Vec<u8>> {
    encode_static_report(cloud, config).map(|r| r.bytes)
}

fn chunk_payload<'a>(bytes: &'a [u8], payload_start: usize, info: &ChunkInfo) -> Result<&'a [u8]> {
    let start = payload_start + info.offset as usize;
    let end = start + info.length as usize;
    if end > bytes.len() {
        return Err(Error::Truncated(bytes.len()));
    }
    let payload = &bytes[start..end];
    if crc32fast::hash(payload) != info.crc32 {
        return Err(Error::ChecksumMismatch(info.name.clone()));
    }
    Ok(payload)
}

fn decode_cloud_chunks(
    bytes: &[u8],
    payload_start: usize,
    header: &ContainerHeader,
    prefix: &str,
    n: usize,
    grid_w: usize,
    grid_h: usize,
) -> Result<(GaussianCloud, BTreeMap<String, Vec<u32>>)> {
    let grid = PlaneGrid {
        w: grid_w,
        h: grid_h,
        perm: (0..n).collect(),
    };
    grid.check(n)?;
    let find = |name: &str| -> Result<&ChunkInfo> {
        let full = format!("{prefix}{name}");
        header
            .chunks
            .iter()
            .find(|c| c.name == full)
            .ok_or(Error::MissingChunk(full))
    };
    let mut symbols = BTreeMap::new();
    let mut scalar = |name: &str| -> Result<Vec<f32>> {
        let info = find(name)?;
        let payload = chunk_payload(bytes, payload_start, info)?;
        let (values, syms) = decode_scalar_chunk(info, payload, &grid)?;
        symbols.insert(info.name.clone(), syms);
        Ok(values)
    };
    let means_v = scalar("mean")?;
    let quat_v = scalar("quat")?;
    let scale_v = scalar("scale")?;
    let opa_v = scalar("opa")?;
    let sh0_v = scalar("sh0")?;

    let mut cloud = GaussianCloud::empty(header.sh_degree);
    for i in 0..n {
        cloud.means.push([means_v[i * 3], means_v[i * 3 + 1], means_v[i * 3 + 2]]);
        cloud.rotations.push([
            quat_v[i * 4],
            quat_v[i * 4 + 1],
            quat_v[i * 4 + 2],
            quat_v[i * 4 + 3],
        ]);
        cloud
            .log_scales
            .push([scale_v[i * 3], scale_v[i * 3 + 1], scale_v[i * 3 + 2]]);
        cloud.opacity_logits.push(opa_v[i]);
        cloud.sh0.push([sh0_v[i * 3], sh0_v[i * 3 + 1], sh0_v[i * 3 + 2]]);
    }
    if header.sh_degree > 0 {
        let info = find("shN")?;
        let payload = chunk_payload(bytes, payload_start, info)?;
        let (sh_n, flags, syms) = decode_shn_chunk(payload, n, header.sh_degree)?;
        cloud.sh_n = sh_n;
        cloud.flags = flags;
        symbols.insert(info.name.clone(), syms);
    }
    Ok((cloud, symbols))
}

pub fn decode_static_report(bytes: &[u8]) -> Result<(GaussianCloud, BTreeMap<String, Vec<u32>>)> {
    let (header, payload_start) = ContainerHeader::parse(bytes)?;
    if header.flavor != Flavor::Static {
        return Err(Error::MalformedHeader(
            "expected a static container".into(),
        ));
    }
    decode_cloud_chunks(
        bytes,
        payload_start,
        &header,
        "",
        header.point_count as usize,
        header.grid_w as usize,
        header.grid_h as usize,
    )
}

pub fn decode_static(bytes: &[u8]) -> Result<GaussianCloud> {
    decode_static_report(bytes).map(|(c, _)| c)
}

// ---------------------------------------------------------------------------
// Dynamic encode/decode

fn subset_motion(motion: &MotionModel, idx: &[usize]) -> MotionModel {
    match motion {
        MotionModel::Polynomial(p) => {
            let kp = p.degree_pos + 1;
            let kr = p.degree_rot + 1;
            let mut pos = Vec::with_capacity(idx.len() * kp);
            let mut rot = Vec::with_capacity(idx.len() * kr);
            for &i in idx {
                pos.extend_from_slice(&p.pos_coeffs[i * kp..(i + 1) * kp]);
                rot.extend_from_slice(&p.rot_coeffs[i * kr..(i + 1) * kr]);
            }
            MotionModel::Polynomial(PolynomialMotion {
                degree_pos: p.degree_pos,
                degree_rot: p.degree_rot,
                time_center: p.time_center,
                pos_coeffs: pos,
                rot_coeffs: rot,
            })
        }
        MotionModel::Basis(b) => {
            let nb = b.basis.len();
            let mut coeffs = Vec::with_capacity(idx.len() * nb);
            for &i in idx {
                coeffs.extend_from_slice(&b.coeffs[i * nb..(i + 1) * nb]);
            }
            MotionModel::Basis(crate::dynamics::BasisMotion {
                basis: b.basis.clone(),
                coeffs,
            })
        }
    }
}

fn subset_temporal(t: &TemporalOpacity, idx: &[usize]) -> TemporalOpacity {
    TemporalOpacity {
        center: idx.iter().map(|&i| t.center[i]).collect(),
        scale: idx.iter().map(|&i| t.scale[i]).collect(),
    }
}

fn motion_coeff_values(motion: &MotionModel, n: usize) -> Vec<(String, Vec<f32>, usize)> {
    match motion {
        MotionModel::Polynomial(p) => {
            let kp = p.degree_pos + 1;
            let kr = p.degree_rot + 1;
            let mut pos = Vec::with_capacity(n * kp * 3);
            for c in &p.pos_coeffs {
                pos.extend_from_slice(c);
            }
            let mut rot = Vec::with_capacity(n * kr * 4);
            for c in &p.rot_coeffs {
                rot.extend_from_slice(c);
            }
            vec![
                ("motion.pos".to_string(), pos, kp * 3),
                ("motion.rot".to_string(), rot, kr * 4),
            ]
        }
        MotionModel::Basis(b) => {
            let nb = b.basis.len();
            let mut coeff = Vec::with_capacity(n * nb * 3);
            for c in &b.coeffs {
                coeff.extend_from_slice(c);
            }
            vec![("motion.coeff".to_string(), coeff, nb * 3)]
        }
    }
}

fn motion_metadata(motion: &MotionModel) -> Vec<u8> {
    let mut out = Vec::new();
    match motion {
        MotionModel::Polynomial(p) => {
            out.push(0);
            out.push(p.degree_pos as u8);
            out.push(p.degree_rot as u8);
            out.extend_from_slice(&p.time_center.to_le_bytes());
        }
        MotionModel::Basis(b) => {
            out.push(1);
            out.extend_from_slice(&(b.basis.len() as u32).to_le_bytes());
            let ctrl = b.basis.first().map_or(0, |c| c.len());
            out.extend_from_slice(&(ctrl as u32).to_le_bytes());
            for curve in &b.basis {
                for v in curve {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    out
}

/// Encode one group-of-frames per entry; each GOF's chunks are fully
/// self-contained (prefix `g{k}.`), so any GOF decodes in isolation.
pub fn encode_dynamic(
    clouds: &[DynamicGaussianCloud],
    segments: &[GofSegment],
    config: &EncodeConfig,
) -> Result<Vec<u8>> {
    if clouds.is_empty() || clouds.len() != segments.len() {
        return Err(Error::InvalidArgument(format!(
            "{} GOF clouds for {} segments",
            clouds.len(),
            segments.len()
        )));
    }
    let sh_degree = clouds[0].base.sh_degree;
    for d in clouds {
        d.validate()?;
        if d.base.sh_degree != sh_degree {
            return Err(Error::InvalidArgument(
                "inconsistent SH degree across GOFs".into(),
            ));
        }
    }
    let mut gofs = Vec::with_capacity(clouds.len());
    let mut chunks = Vec::new();
    let mut symbols = BTreeMap::new();
    let mut schemes = BTreeMap::new();
    for (gi, (dyncloud, seg)) in clouds.iter().zip(segments).enumerate() {
        let prefix = format!("g{gi}.");
        let prepared = prepare_cloud(&dyncloud.base, config)?;
        let n = prepared.cloud.len();
        // Final point order composed with pruning: plane position -> index
        // into the original GOF cloud.
        let final_idx: Vec<usize> = prepared.order.iter().map(|&o| prepared.kept[o]).collect();
        let motion = subset_motion(&dyncloud.motion, &final_idx);
        let temporal = subset_temporal(&dyncloud.temporal_opacity, &final_idx);

        let grid = PlaneGrid {
            w: prepared.grid_w,
            h: prepared.grid_h,
            perm: (0..n).collect(),
        };
        encode_cloud_chunks(
            &prepared.cloud,
            config,
            &prefix,
            &grid,
            &mut chunks,
            &mut symbols,
            &mut schemes,
        )?;
        chunks.push(ChunkData {
            name: format!("{prefix}motion"),
            codec: ChunkCodec::Raw,
            channels: 0,
            schemes: Vec::new(),
            payload: motion_metadata(&motion),
        });
        for (name, values, channels) in motion_coeff_values(&motion, n) {
            let full = format!("{prefix}{name}");
            let (mut chunk, syms) = build_scalar_chunk(
                &full,
                &values,
                channels,
                Route::Ans,
                config.motion_bits,
                config.clip_pct,
                &grid,
            )
            .map_err(|e| e.in_stage("code"))?;
            chunk.name = full.clone();
            symbols.insert(full, syms);
            chunks.push(chunk);
        }
        let mut temp_values = Vec::with_capacity(n * 2);
        for i in 0..n {
            temp_values.push(temporal.center[i]);
            temp_values.push(temporal.scale[i]);
        }
        let full = format!("{prefix}temp");
        let (mut chunk, syms) = build_scalar_chunk(
            &full,
            &temp_values,
            2,
            Route::Ans,
            config.temporal_bits,
            config.clip_pct,
            &grid,
        )
        .map_err(|e| e.in_stage("code"))?;
        chunk.name = full.clone();
        symbols.insert(full, syms);
        chunks.push(chunk);

        gofs.push(GofEntry {
            index: seg.index as u32,
            f_start: seg.f_start as u32,
            f_end: seg.f_end as u32,
            point_count: n as u32,
            grid_w: prepared.grid_w as u32,
            grid_h: prepared.grid_h as u32,
            t_start: dyncloud.time_range.0,
            t_end: dyncloud.time_range.1,
        });
    }
    Ok(assemble(
        Flavor::Dynamic,
        0,
        sh_degree,
        0,
        0,
        gofs,
        chunks,
    ))
}

fn decode_motion(
    bytes: &[u8],
    payload_start: usize,
    header: &ContainerHeader,
    prefix: &str,
    n: usize,
    grid: &PlaneGrid,
) -> Result<MotionModel> {
    let find = |name: &str| -> Result<&ChunkInfo> {
        let full = format!("{prefix}{name}");
        header
            .chunks
            .iter()
            .find(|c| c.name == full)
            .ok_or(Error::MissingChunk(full))
    };
    let meta = chunk_payload(bytes, payload_start, find("motion")?)?;
    let mut r = Reader::new(meta);
    let scalar = |name: &str| -> Result<Vec<f32>> {
        let info = find(name)?;
        let payload = chunk_payload(bytes, payload_start, info)?;
        Ok(decode_scalar_chunk(info, payload, grid)?.0)
    };
    match r.u8()? {
        0 => {
            let degree_pos = r.u8()? as usize;
            let degree_rot = r.u8()? as usize;
            let time_center = r.f32()?;
            let pos_v = scalar("motion.pos")?;
            let rot_v = scalar("motion.rot")?;
            let kp = degree_pos + 1;
            let kr = degree_rot + 1;
            let mut pos = Vec::with_capacity(n * kp);
            for i in 0..n * kp {
                pos.push([pos_v[i * 3], pos_v[i * 3 + 1], pos_v[i * 3 + 2]]);
            }
            let mut rot = Vec::with_capacity(n * kr);
            for i in 0..n * kr {
                rot.push([
                    rot_v[i * 4],
                    rot_v[i * 4 + 1],
                    rot_v[i * 4 + 2],
                    rot_v[i * 4 + 3],
                ]);
            }
            Ok(MotionModel::Polynomial(PolynomialMotion {
                degree_pos,
                degree_rot,
                time_center,
                pos_coeffs: pos,
                rot_coeffs: rot,
            }))
        }
        1 => {
            let nb = r.u32()? as usize;
            let ctrl = r.u32()? as usize;
            let mut basis = Vec::with_capacity(nb);
            for _ in 0..nb {
                let mut curve = Vec::with_capacity(ctrl);
                for _ in 0..ctrl {
                    curve.push(r.f32()?);
                }
                basis.push(curve);
            }
            let coeff_v = scalar("motion.coeff")?;
            let mut coeffs = Vec::with_capacity(n * nb);
            for i in 0..n * nb {
                coeffs.push([coeff_v[i * 3], coeff_v[i * 3 + 1], coeff_v[i * 3 + 2]]);
            }
            Ok(MotionModel::Basis(crate::dynamics::BasisMotion {
                basis,
                coeffs,
            }))
        }
        t => Err(Error::MalformedHeader(format!("unknown motion model {t}"))),
    }
}

/// Decode one GOF without touching any other GOF's bytes.
pub fn decode_dynamic_gof(bytes: &[u8], gof: usize) -> Result<DynamicGaussianCloud> {
    let (header, payload_start) = ContainerHeader::parse(bytes)?;
    if header.flavor != Flavor::Dynamic {
        return Err(Error::MalformedHeader(
            "expected a dynamic container".into(),
        ));
    }
    let entry = header
        .gofs
        .iter()
        .find(|g| g.index as usize == gof)
        .ok_or_else(|| Error::MissingChunk(format!("GOF {gof}")))?;
    let prefix = format!("g{gof}.");
    let n = entry.point_count as usize;
    let (base, _) = decode_cloud_chunks(
        bytes,
        payload_start,
        &header,
        &prefix,
        n,
        entry.grid_w as usize,
        entry.grid_h as usize,
    )?;
    let grid = PlaneGrid {
        w: entry.grid_w as usize,
        h: entry.grid_h as usize,
        perm: (0..n).collect(),
    };
    let motion = decode_motion(bytes, payload_start, &header, &prefix, n, &grid)?;
    let temp_info = header
        .chunks
        .iter()
        .find(|c| c.name == format!("{prefix}temp"))
        .ok_or_else(|| Error::MissingChunk(format!("{prefix}temp")))?;
    let temp_payload = chunk_payload(bytes, payload_start, temp_info)?;
    let (temp_v, _) = decode_scalar_chunk(temp_info, temp_payload, &grid)?;
    let temporal = TemporalOpacity {
        center: (0..n).map(|i| temp_v[i * 2]).collect(),
        scale: (0..n).map(|i| temp_v[i * 2 + 1]).collect(),
    };
    Ok(DynamicGaussianCloud {
        base,
        motion,
        temporal_opacity: temporal,
        time_range: (entry.t_start, entry.t_end),
        gof_index: gof,
    })
}

pub fn decode_dynamic(bytes: &[u8]) -> Result<Vec<DynamicGaussianCloud>> {
    let (header, _) = ContainerHeader::parse(bytes)?;
    if header.flavor != Flavor::Dynamic {
        return Err(Error::MalformedHeader(
            "expected a dynamic container".into(),
        ));
    }
    header
        .gofs
        .iter()
        .map(|g| decode_dynamic_gof(bytes, g.index as usize))
        .collect()
}

/// GOF table stored in a dynamic container.
pub fn gof_table(bytes: &[u8]) -> Result<Vec<GofSegment>> {
    let (header, _) = ContainerHeader::parse(bytes)?;
    Ok(header
        .gofs
        .iter()
        .map(|g| GofSegment {
            index: g.index as usize,
            f_start: g.f_start as usize,
            f_end: g.f_end as usize,
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Inspect

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownRow {
    pub label: String,
    pub bytes: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBreakdownReport {
    pub rows: Vec<BreakdownRow>,
    /// Total payload bytes (file minus prefix and header).
    pub total_bytes: u64,
}

const ROW_ORDER: [(&str, &str); 8] = [
    ("mean", "Mean"),
    ("quat", "Quat."),
    ("scale", "Scale"),
    ("opa", "Opa."),
    ("sh0", "SH 0"),
    ("shN", "SH N"),
    ("motion", "Motion"),
    ("temp", "Temp."),
];

fn attribute_label(chunk_name: &str) -> String {
    // Strip a `g<k>.` GOF prefix, then take the first dotted segment.
    let mut base = chunk_name;
    if let Some(rest) = base.strip_prefix('g') {
        if let Some(dot) = rest.find('.') {
            if rest[..dot].chars().all(|c| c.is_ascii_digit()) {
                base = &rest[dot + 1..];
            }
        }
    }
    let first = base.split('.').next().unwrap_or(base);
    for (key, label) in ROW_ORDER {
        if first == key {
            return label.to_string();
        }
    }
    first.to_string()
}

/// Per-attribute compressed sizes, Table-style: one row per attribute
/// group, percentages of the payload total.
pub fn inspect(bytes: &[u8]) -> Result<MemoryBreakdownReport> {
    let (header, payload_start) = ContainerHeader::parse(bytes)?;
    let mut sizes: BTreeMap<String, u64> = BTreeMap::new();
    let mut accounted = 0u64;
    for c in &header.chunks {
        chunk_payload(bytes, payload_start, c)?;
        *sizes.entry(attribute_label(&c.name)).or_insert(0) += c.length;
        accounted += c.length;
    }
    let total = (bytes.len() - payload_start) as u64;
    if accounted != total {
        return Err(Error::MalformedHeader(format!(
            "chunks cover {accounted} of {total} payload bytes"
        )));
    }
    let mut rows = Vec::new();
    let mut push = |label: &str, size: u64| {
        rows.push(BreakdownRow {
            label: label.to_string(),
            bytes: size,
            percent: if total == 0 {
                0.0
            } else {
                size as f64 * 100.0 / total as f64
            },
        });
    };
    for (_, label) in ROW_ORDER {
        if let Some(&size) = sizes.get(label) {
            push(label, size);
        }
    }
    for (label, &size) in &sizes {
        if !ROW_ORDER.iter().any(|(_, l)| *l == label) {
            push(label, size);
        }
    }
    Ok(MemoryBreakdownReport {
        rows,
        total_bytes: total,
    })
}

impl MemoryBreakdownReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("attribute,bytes,percent\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.1}\n", r.label, r.bytes, r.percent));
        }
        out.push_str(&format!("Total,{},100.0\n", self.total_bytes));
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<8} {:>12} {:>8}\n", "Attr.", "Size (KB)", "%"));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<8} {:>12.1} {:>8.1}\n",
                r.label,
                r.bytes as f64 / 1024.0,
                r.percent
            ));
        }
        out.push_str(&format!(
            "{:<8} {:>12.1} {:>8.1}\n",
            "Total",
            self.total_bytes as f64 / 1024.0,
            100.0
        ));
        out
    }
}
