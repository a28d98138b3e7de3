//! Rate-distortion sweep harness and the synthetic scene generators used
//! for end-to-end evaluation.
//!
//! Metrics are codec-relative: the decoded render is compared against a
//! render of the uncompressed input, so the numbers measure compression
//! loss only (not reconstruction quality of a trained scene).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::container::{
    decode_dynamic, decode_static, encode_dynamic, encode_static, EncodeConfig,
};
use crate::dynamics::{GofSegment, MotionModel, TemporalOpacity};
use crate::error::{Error, Result};
use crate::metrics::{psnr, ssim};
use crate::render::{render, render_at_time, Camera};
use crate::splat::{logit, DynamicGaussianCloud, GaussianCloud};

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub id: String,
    pub config: EncodeConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdRecord {
    pub config: String,
    pub bytes: u64,
    /// MB for static sweeps, Mbps for dynamic sweeps.
    pub rate: f64,
    pub psnr: f64,
    pub ssim: f64,
}

pub fn records_to_csv(records: &[RdRecord]) -> String {
    let mut out = String::from("config,bytes,rate,psnr,ssim\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{:.6},{:.3},{:.5}\n",
            r.config, r.bytes, r.rate, r.psnr, r.ssim
        ));
    }
    out
}

pub fn bytes_to_mb(bytes: u64) -> f64 {
    bytes as f64 / (1u64 << 20) as f64
}

/// Average bitrate of a sequence: `bytes * 8 / duration_seconds / 1e6`.
pub fn bytes_to_mbps(bytes: u64, duration_seconds: f64) -> f64 {
    bytes as f64 * 8.0 / duration_seconds / 1e6
}

fn mean_quality(
    references: &[crate::render::ImageBuffer],
    tests: &[crate::render::ImageBuffer],
) -> Result<(f64, f64)> {
    let mut p = 0.0;
    let mut s = 0.0;
    for (a, b) in references.iter().zip(tests) {
        p += psnr(a, b)?;
        s += ssim(a, b)?;
    }
    let n = references.len() as f64;
    Ok((p / n, s / n))
}

/// Encode/decode/render each config; quality is averaged over the cameras
/// against renders of the uncompressed input. Rate is file size in MB.
pub fn rd_sweep_static(
    cloud: &GaussianCloud,
    cameras: &[Camera],
    entries: &[SweepEntry],
    background: [f32; 3],
) -> Result<Vec<RdRecord>> {
    if cameras.is_empty() {
        return Err(Error::InvalidArgument("rd_sweep: no cameras".into()));
    }
    let references: Vec<_> = cameras
        .iter()
        .map(|c| render(cloud, c, background))
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(entries.len());
    for e in entries {
        let bytes = encode_static(cloud, &e.config)?;
        let decoded = decode_static(&bytes)?;
        let tests: Vec<_> = cameras
            .iter()
            .map(|c| render(&decoded, c, background))
            .collect::<Result<_>>()?;
        let (p, s) = mean_quality(&references, &tests)?;
        records.push(RdRecord {
            config: e.id.clone(),
            bytes: bytes.len() as u64,
            rate: bytes_to_mb(bytes.len() as u64),
            psnr: p,
            ssim: s,
        });
    }
    Ok(records)
}

/// Dynamic sweep: renders at `times` (normalized per GOF coverage) for each
/// camera; rate is Mbps over `duration_seconds`.
pub fn rd_sweep_dynamic(
    clouds: &[DynamicGaussianCloud],
    segments: &[GofSegment],
    cameras: &[Camera],
    times: &[f32],
    entries: &[SweepEntry],
    duration_seconds: f64,
    background: [f32; 3],
) -> Result<Vec<RdRecord>> {
    if cameras.is_empty() || times.is_empty() {
        return Err(Error::InvalidArgument(
            "rd_sweep: need at least one camera and one time".into(),
        ));
    }
    let gof_at = |t: f32, set: &[DynamicGaussianCloud]| -> usize {
        set.iter()
            .position(|d| t >= d.time_range.0 && t <= d.time_range.1)
            .unwrap_or(set.len() - 1)
    };
    let mut references = Vec::new();
    for cam in cameras {
        for &t in times {
            let d = &clouds[gof_at(t, clouds)];
            let local = (t - d.time_range.0) / (d.time_range.1 - d.time_range.0);
            references.push(render_at_time(d, cam, local, background)?);
        }
    }
    let mut records = Vec::with_capacity(entries.len());
    for e in entries {
        let bytes = encode_dynamic(clouds, segments, &e.config)?;
        let decoded = decode_dynamic(&bytes)?;
        let mut tests = Vec::new();
        for cam in cameras {
            for &t in times {
                let d = &decoded[gof_at(t, &decoded)];
                let local = (t - d.time_range.0) / (d.time_range.1 - d.time_range.0);
                tests.push(render_at_time(d, cam, local, background)?);
            }
        }
        let (p, s) = mean_quality(&references, &tests)?;
        records.push(RdRecord {
            config: e.id.clone(),
            bytes: bytes.len() as u64,
            rate: bytes_to_mbps(bytes.len() as u64, duration_seconds),
            psnr: p,
            ssim: s,
        });
    }
    Ok(records)
}

/// Clustered synthetic scene: points gathered around cluster centers with
/// spatially correlated colors, so sorting and entropy models have real
/// structure to exploit.
pub fn synthetic_scene(n: usize, sh_degree: u8, seed: u64) -> GaussianCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = crate::splat::sh_coeff_count(sh_degree);
    let num_clusters = (n / 256).clamp(4, 64);
    let centers: Vec<[f32; 3]> = (0..num_clusters)
        .map(|_| {
            [
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ]
        })
        .collect();
    let mut cloud = GaussianCloud::empty(sh_degree);
    for _ in 0..n {
        let c = centers[rng.gen_range(0..num_clusters)];
        let mean = [
            c[0] + rng.gen_range(-0.4..0.4f32),
            c[1] + rng.gen_range(-0.4..0.4f32),
            c[2] + rng.gen_range(-0.4..0.4f32),
        ];
        cloud.means.push(mean);
        let q = [
            rng.gen_range(0.2..1.0f32),
            rng.gen_range(-1.0..1.0f32),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let norm = q.iter().map(|v| v * v).sum::<f32>().sqrt();
        cloud
            .rotations
            .push([q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm]);
        cloud.log_scales.push([
            rng.gen_range(-4.5..-3.0),
            rng.gen_range(-4.5..-3.0),
            rng.gen_range(-4.5..-3.0),
        ]);
        cloud
            .opacity_logits
            .push(logit(rng.gen_range(0.3..0.98f32)));
        // Color follows a smooth positional field plus noise.
        cloud.sh0.push([
            0.3 * mean[0] + rng.gen_range(-0.1..0.1),
            0.3 * mean[1] + rng.gen_range(-0.1..0.1),
            0.3 * mean[2] + rng.gen_range(-0.1..0.1),
        ]);
        for _ in 0..m * 3 {
            cloud.sh_n.push(rng.gen_range(-0.05..0.05));
        }
    }
    cloud
}

/// Synthetic dynamic sequence: `static_fraction` of the points hold still,
/// the rest follow smooth low-degree polynomial trajectories.
pub fn synthetic_sequence(
    n: usize,
    sh_degree: u8,
    seed: u64,
    segments: &[GofSegment],
    frame_count: usize,
    static_fraction: f32,
) -> Vec<DynamicGaussianCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = synthetic_scene(n, sh_degree, seed.wrapping_add(1));
    let dynamic: Vec<bool> = (0..n).map(|_| rng.gen::<f32>() >= static_fraction).collect();
    let velocities: Vec<[f32; 3]> = (0..n)
        .map(|_| {
            [
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
            ]
        })
        .collect();
    segments
        .iter()
        .map(|seg| {
            // Segment-local base: positions advanced to the segment center.
            let t_mid = (seg.f_start as f32 + seg.f_end as f32) / 2.0 / frame_count as f32;
            let mut seg_base = base.clone();
            let mut motion = MotionModel::static_poly(&seg_base, 1, 0);
            if let MotionModel::Polynomial(p) = &mut motion {
                for i in 0..n {
                    if dynamic[i] {
                        let v = velocities[i];
                        let span = (seg.f_end - seg.f_start) as f32 / frame_count as f32;
                        for a in 0..3 {
                            seg_base.means[i][a] += v[a] * t_mid;
                        }
                        p.pos_coeffs[i * 2] = seg_base.means[i];
                        // Velocity in segment-normalized time.
                        p.pos_coeffs[i * 2 + 1] = [v[0] * span, v[1] * span, v[2] * span];
                    }
                }
            }
            DynamicGaussianCloud {
                temporal_opacity: TemporalOpacity::always_on(n),
                motion,
                base: seg_base,
                time_range: (
                    seg.f_start as f32 / frame_count as f32,
                    seg.f_end as f32 / frame_count as f32,
                ),
                gof_index: seg.index,
            }
        })
        .collect()
}
