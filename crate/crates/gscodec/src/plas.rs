//! 3D-to-2D attribute mapping: arrange unordered splats on a 2D grid so
//! neighboring cells carry similar attributes, then pack quantized
//! attributes into planes and code them losslessly as PNG.
//!
//! The sorter is a deterministic multi-scale greedy swap scheme: at radii
//! W/2, W/4, ..., 1 it proposes seeded-random swaps inside radius-r windows
//! and accepts only strict cost decreases. The objective is the sum over
//! valid 4-neighbor pairs of the squared L2 distance between normalized
//! attribute vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::splat::GaussianCloud;

/// 2D layout of N points on a W x H grid. Cells `0..N` (row-major) are
/// valid; the tail is padding and never read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneGrid {
    pub w: usize,
    pub h: usize,
    /// `perm[point] = cell`, injective into valid cells.
    pub perm: Vec<usize>,
}

impl PlaneGrid {
    /// Smallest square grid holding `n` points.
    pub fn square_for(n: usize) -> PlaneGrid {
        let w = (n as f64).sqrt().ceil() as usize;
        let w = w.max(1);
        PlaneGrid {
            w,
            h: w,
            perm: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn is_valid_cell(&self, cell: usize) -> bool {
        cell < self.len()
    }

    /// `cell_to_point[cell]`, `u32::MAX` for padding.
    pub fn cell_to_point(&self) -> Vec<u32> {
        let mut out = vec![u32::MAX; self.w * self.h];
        for (point, &cell) in self.perm.iter().enumerate() {
            out[cell] = point as u32;
        }
        out
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.w * self.h < n {
            return Err(Error::GridTooSmall {
                w: self.w,
                h: self.h,
                n,
            });
        }
        if self.perm.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "perm length {} != {n}",
                self.perm.len()
            )));
        }
        let mut seen = vec![false; self.w * self.h];
        for &c in &self.perm {
            if c >= n || seen[c] {
                return Err(Error::InvalidArgument(format!(
                    "perm is not injective into valid cells (cell {c})"
                )));
            }
            seen[c] = true;
        }
        Ok(())
    }
}

/// Per-point sorting features: normalized means + sh0 + opacity, with
/// configurable weights. Each channel is min/max normalized to [0, 1].
pub fn sorting_features(cloud: &GaussianCloud, weights: &SortWeights) -> Vec<f32> {
    let n = cloud.len();
    let mut channels: Vec<(Vec<f32>, f32)> = Vec::new();
    for a in 0..3 {
        channels.push((cloud.means.iter().map(|m| m[a]).collect(), weights.means));
    }
    for a in 0..3 {
        channels.push((cloud.sh0.iter().map(|s| s[a]).collect(), weights.sh0));
    }
    channels.push((cloud.opacity_logits.clone(), weights.opacity));
    let dim = channels.len();
    let mut out = vec![0.0f32; n * dim];
    for (c, (vals, weight)) in channels.iter().enumerate() {
        let lo = vals.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = vals.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let range = (hi - lo).max(1e-12);
        for i in 0..n {
            out[i * dim + c] = (vals[i] - lo) / range * weight;
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct SortWeights {
    pub means: f32,
    pub sh0: f32,
    pub opacity: f32,
}

impl Default for SortWeights {
    fn default() -> Self {
        SortWeights {
            means: 1.0,
            sh0: 1.0,
            opacity: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PlasConfig {
    /// Swap proposals per point at each radius level.
    pub proposals_per_point: usize,
    pub seed: u64,
}

impl Default for PlasConfig {
    fn default() -> Self {
        PlasConfig {
            proposals_per_point: 16,
            seed: 0,
        }
    }
}

#[inline]
fn feat_dist2(features: &[f32], dim: usize, a: u32, b: u32) -> f64 {
    let fa = &features[a as usize * dim..(a as usize + 1) * dim];
    let fb = &features[b as usize * dim..(b as usize + 1) * dim];
    let mut s = 0.0f64;
    for (x, y) in fa.iter().zip(fb) {
        let d = (*x - *y) as f64;
        s += d * d;
    }
    s
}

/// Total smoothness cost of a placement: squared feature distance summed
/// over valid 4-neighbor pairs (right and down, each pair once).
pub fn smoothness_cost(grid: &PlaneGrid, features: &[f32], dim: usize) -> f64 {
    let cell_to_point = grid.cell_to_point();
    cost_of_cells(grid, &cell_to_point, features, dim)
}

fn cost_of_cells(grid: &PlaneGrid, cell_to_point: &[u32], features: &[f32], dim: usize) -> f64 {
    let (w, h) = (grid.w, grid.h);
    par::chunked_sum_f64(h, 8, |y| {
        let mut s = 0.0;
        for x in 0..w {
            let c = y * w + x;
            let p = cell_to_point[c];
            if p == u32::MAX {
                continue;
            }
            if x + 1 < w {
                let q = cell_to_point[c + 1];
                if q != u32::MAX {
                    s += feat_dist2(features, dim, p, q);
                }
            }
            if y + 1 < h {
                let q = cell_to_point[c + w];
                if q != u32::MAX {
                    s += feat_dist2(features, dim, p, q);
                }
            }
        }
        s
    })
}

/// Cost of all neighbor pairs incident to `cell`.
fn local_cost(
    cell: usize,
    w: usize,
    h: usize,
    cell_to_point: &[u32],
    features: &[f32],
    dim: usize,
) -> f64 {
    let p = cell_to_point[cell];
    if p == u32::MAX {
        return 0.0;
    }
    let (x, y) = (cell % w, cell / w);
    let mut s = 0.0;
    let mut add = |nc: usize| {
        let q = cell_to_point[nc];
        if q != u32::MAX {
            s += feat_dist2(features, dim, p, q);
        }
    };
    if x > 0 {
        add(cell - 1);
    }
    if x + 1 < w {
        add(cell + 1);
    }
    if y > 0 {
        add(cell - w);
    }
    if y + 1 < h {
        add(cell + w);
    }
    s
}

fn pair_cost(
    c1: usize,
    c2: usize,
    w: usize,
    h: usize,
    cell_to_point: &[u32],
    features: &[f32],
    dim: usize,
) -> f64 {
    let mut s = local_cost(c1, w, h, cell_to_point, features, dim)
        + local_cost(c2, w, h, cell_to_point, features, dim);
    // The c1-c2 edge, if adjacent, was counted twice.
    let adjacent = {
        let (x1, y1) = (c1 % w, c1 / w);
        let (x2, y2) = (c2 % w, c2 / w);
        (x1 == x2 && y1.abs_diff(y2) == 1) || (y1 == y2 && x1.abs_diff(x2) == 1)
    };
    if adjacent {
        let (p, q) = (cell_to_point[c1], cell_to_point[c2]);
        if p != u32::MAX && q != u32::MAX {
            s -= feat_dist2(features, dim, p, q);
        }
    }
    s
}

/// Sort points onto the grid: space-filling-curve initialization followed by
/// greedy multi-scale swap refinement. Deterministic for a fixed seed; the
/// final cost never exceeds the cost of the initial placement.
pub fn sort_plas(
    features: &[f32],
    n: usize,
    dim: usize,
    grid: PlaneGrid,
    cfg: &PlasConfig,
) -> Result<PlaneGrid> {
    if n == 0 || dim == 0 || features.len() != n * dim {
        return Err(Error::DimensionMismatch(format!(
            "features {} != n {n} * dim {dim}",
            features.len()
        )));
    }
    grid.check(n)?;
    let (w, h) = (grid.w, grid.h);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Initial placement: order points by Morton code of the leading (up to
    // three) feature dims, laid serpentine across rows so curve neighbors
    // land in adjacent cells. Refinement below only ever improves on this.
    let key_dims = dim.min(3);
    let mut lo = vec![f32::INFINITY; key_dims];
    let mut hi = vec![f32::NEG_INFINITY; key_dims];
    for i in 0..n {
        for d in 0..key_dims {
            let v = features[i * dim + d];
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    let mut keyed: Vec<(u64, usize)> = (0..n)
        .map(|i| {
            let mut key = 0u64;
            for d in 0..key_dims {
                let range = (hi[d] - lo[d]).max(1e-12);
                let q = ((((features[i * dim + d] - lo[d]) / range) * 1023.0) as u64).min(1023);
                for b in 0..10u64 {
                    key |= ((q >> b) & 1) << (b * key_dims as u64 + d as u64);
                }
            }
            (key, i)
        })
        .collect();
    keyed.sort_unstable();
    let mut cell_to_point = vec![u32::MAX; w * h];
    for (rank, &(_, point)) in keyed.iter().enumerate() {
        let (row, col) = (rank / w, rank % w);
        // Reverse full odd rows only; a partial last row stays forward so
        // every occupied cell remains within the valid prefix.
        let cell = if row % 2 == 1 && (row + 1) * w <= n {
            row * w + (w - 1 - col)
        } else {
            row * w + col
        };
        cell_to_point[cell] = point as u32;
    }

    let mut radius = (w.max(h) / 2).max(1);
    loop {
        let proposals = cfg.proposals_per_point * n;
        for _ in 0..proposals {
            let c1 = rng.gen_range(0..n);
            let (x1, y1) = (c1 % w, c1 / w);
            let dx = rng.gen_range(-(radius as i64)..=radius as i64);
            let dy = rng.gen_range(-(radius as i64)..=radius as i64);
            let x2 = x1 as i64 + dx;
            let y2 = y1 as i64 + dy;
            if x2 < 0 || y2 < 0 || x2 >= w as i64 || y2 >= h as i64 {
                continue;
            }
            let c2 = y2 as usize * w + x2 as usize;
            if c2 == c1 || !grid_valid(c2, n) {
                continue;
            }
            let before = pair_cost(c1, c2, w, h, &cell_to_point, features, dim);
            cell_to_point.swap(c1, c2);
            let after = pair_cost(c1, c2, w, h, &cell_to_point, features, dim);
            if after >= before {
                cell_to_point.swap(c1, c2);
            }
        }
        if radius == 1 {
            break;
        }
        radius /= 2;
    }

    let mut out_perm = vec![0usize; n];
    for (cell, &p) in cell_to_point.iter().enumerate() {
        if p != u32::MAX {
            out_perm[p as usize] = cell;
        }
    }
    Ok(PlaneGrid {
        w,
        h,
        perm: out_perm,
    })
}

#[inline]
fn grid_valid(cell: usize, n: usize) -> bool {
    cell < n
}

/// One packed attribute plane. Samples are row-major, channel-interleaved,
/// with invalid cells zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributePlane {
    pub name: String,
    pub w: usize,
    pub h: usize,
    pub channels: usize,
    /// 8 or 16.
    pub bit_depth: u8,
    pub samples: Vec<u16>,
}

/// Scatter quantized symbols (point-major, `channels` per point) into
/// planes. Attributes wider than 8 bits are split into `<name>_hi` and
/// `<name>_lo` 8-bit planes with `symbol = hi * 256 + lo`.
pub fn pack_planes(
    name: &str,
    symbols: &[u32],
    channels: usize,
    bits: u8,
    grid: &PlaneGrid,
) -> Result<Vec<AttributePlane>> {
    let n = grid.len();
    if symbols.len() != n * channels {
        return Err(Error::DimensionMismatch(format!(
            "{name}: {} symbols != {n} x {channels}",
            symbols.len()
        )));
    }
    let (w, h) = (grid.w, grid.h);
    let make = |suffix: &str| AttributePlane {
        name: if suffix.is_empty() {
            name.to_string()
        } else {
            format!("{name}_{suffix}")
        },
        w,
        h,
        channels,
        bit_depth: 8,
        samples: vec![0u16; w * h * channels],
    };
    if bits <= 8 {
        let mut plane = make("");
        for (point, &cell) in grid.perm.iter().enumerate() {
            for c in 0..channels {
                plane.samples[cell * channels + c] = symbols[point * channels + c] as u16;
            }
        }
        Ok(vec![plane])
    } else {
        let mut hi = make("hi");
        let mut lo = make("lo");
        for (point, &cell) in grid.perm.iter().enumerate() {
            for c in 0..channels {
                let s = symbols[point * channels + c];
                hi.samples[cell * channels + c] = (s >> 8) as u16;
                lo.samples[cell * channels + c] = (s & 0xFF) as u16;
            }
        }
        Ok(vec![hi, lo])
    }
}

/// Exact inverse of `pack_planes` on valid cells.
pub fn unpack_planes(planes: &[AttributePlane], grid: &PlaneGrid) -> Result<Vec<u32>> {
    let first = planes
        .first()
        .ok_or_else(|| Error::InvalidArgument("unpack_planes: no planes".into()))?;
    let channels = first.channels;
    for p in planes {
        if p.w != grid.w || p.h != grid.h || p.channels != channels {
            return Err(Error::DimensionMismatch(format!(
                "plane `{}` is {}x{}x{}, grid is {}x{}",
                p.name, p.w, p.h, p.channels, grid.w, grid.h
            )));
        }
    }
    let n = grid.len();
    let mut out = vec![0u32; n * channels];
    match planes {
        [single] => {
            for (point, &cell) in grid.perm.iter().enumerate() {
                for c in 0..channels {
                    out[point * channels + c] = single.samples[cell * channels + c] as u32;
                }
            }
        }
        [hi, lo] => {
            for (point, &cell) in grid.perm.iter().enumerate() {
                for c in 0..channels {
                    out[point * channels + c] = (hi.samples[cell * channels + c] as u32) * 256
                        + lo.samples[cell * channels + c] as u32;
                }
            }
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "expected 1 or 2 planes, got {}",
                planes.len()
            )))
        }
    }
    Ok(out)
}

/// Encode a plane as standard PNG (lossless).
pub fn encode_png(plane: &AttributePlane) -> Result<Vec<u8>> {
    use image::codecs::png::PngEncoder;
    use image::{ExtendedColorType, ImageEncoder};
    let color = match (plane.channels, plane.bit_depth) {
        (1, 8) => ExtendedColorType::L8,
        (2, 8) => ExtendedColorType::La8,
        (3, 8) => ExtendedColorType::Rgb8,
        (4, 8) => ExtendedColorType::Rgba8,
        (1, 16) => ExtendedColorType::L16,
        (2, 16) => ExtendedColorType::La16,
        (3, 16) => ExtendedColorType::Rgb16,
        (4, 16) => ExtendedColorType::Rgba16,
        (c, d) => {
            return Err(Error::InvalidArgument(format!(
                "unsupported plane shape: {c} channels at {d} bit"
            )))
        }
    };
    let bytes: Vec<u8> = if plane.bit_depth == 8 {
        plane.samples.iter().map(|&s| s as u8).collect()
    } else {
        // The encoder takes 16-bit samples as native-endian byte pairs.
        plane.samples.iter().flat_map(|&s| s.to_ne_bytes()).collect()
    };
    let mut out = Vec::new();
    PngEncoder::new_with_quality(
        &mut out,
        image::codecs::png::CompressionType::Best,
        image::codecs::png::FilterType::Adaptive,
    )
    .write_image(&bytes, plane.w as u32, plane.h as u32, color)
    .map_err(|e| Error::Png(e.to_string()))?;
    Ok(out)
}

/// Decode a PNG back into a plane. `name` is restored by the caller.
pub fn decode_png(bytes: &[u8], name: &str) -> Result<AttributePlane> {
    use image::DynamicImage;
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Png(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, bit_depth, samples): (usize, u8, Vec<u16>) = match img {
        DynamicImage::ImageLuma8(b) => (1, 8, b.into_raw().iter().map(|&v| v as u16).collect()),
        DynamicImage::ImageLumaA8(b) => (2, 8, b.into_raw().iter().map(|&v| v as u16).collect()),
        DynamicImage::ImageRgb8(b) => (3, 8, b.into_raw().iter().map(|&v| v as u16).collect()),
        DynamicImage::ImageRgba8(b) => (4, 8, b.into_raw().iter().map(|&v| v as u16).collect()),
        DynamicImage::ImageLuma16(b) => (1, 16, b.into_raw()),
        DynamicImage::ImageLumaA16(b) => (2, 16, b.into_raw()),
        DynamicImage::ImageRgb16(b) => (3, 16, b.into_raw()),
        DynamicImage::ImageRgba16(b) => (4, 16, b.into_raw()),
        other => {
            return Err(Error::Png(format!(
                "unsupported decoded format: {other:?}"
            )))
        }
    };
    Ok(AttributePlane {
        name: name.to_string(),
        w,
        h,
        channels,
        bit_depth,
        samples,
    })
}
