//! Core data model for static and dynamic Gaussian Splat clouds.
//!
//! Quaternions are stored `(w, x, y, z)` matching the `rot_0..rot_3` PLY
//! convention. Scales live in natural-log space and opacity as pre-sigmoid
//! logits end to end; both conversions happen only at render/prune time.

use crate::dynamics::{MotionModel, TemporalOpacity};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud {
    /// N x 3 world-space positions.
    pub means: Vec<[f32; 3]>,
    /// N x 4 unit quaternions, scalar part first.
    pub rotations: Vec<[f32; 4]>,
    /// N x 3 natural-log per-axis scales.
    pub log_scales: Vec<[f32; 3]>,
    /// N pre-sigmoid opacities.
    pub opacity_logits: Vec<f32>,
    /// N x 3 degree-0 SH coefficients.
    pub sh0: Vec<[f32; 3]>,
    /// N x M x 3 higher-degree SH coefficients, flattened `(i*M + m)*3 + c`.
    /// M = (D+1)^2 - 1 for SH degree D.
    pub sh_n: Vec<f32>,
    pub sh_degree: u8,
    /// Optional N x F opaque feature channels, flattened row-major.
    pub features: Option<Vec<f32>>,
    pub feature_dim: usize,
    /// Optional per-point bit flags.
    pub flags: Option<Vec<u8>>,
}

/// Per-point flag bits.
pub const FLAG_DIFFUSE_ONLY: u8 = 1;
pub const FLAG_STATIC: u8 = 2;

pub fn sh_coeff_count(degree: u8) -> usize {
    (degree as usize + 1) * (degree as usize + 1) - 1
}

/// Inverse of `sh_coeff_count`; `None` for counts that match no degree <= 3.
pub fn sh_degree_from_coeff_count(m: usize) -> Option<u8> {
    (0..=3u8).find(|&d| sh_coeff_count(d) == m)
}

impl GaussianCloud {
    pub fn empty(sh_degree: u8) -> Self {
        GaussianCloud {
            means: Vec::new(),
            rotations: Vec::new(),
            log_scales: Vec::new(),
            opacity_logits: Vec::new(),
            sh0: Vec::new(),
            sh_n: Vec::new(),
            sh_degree,
            features: None,
            feature_dim: 0,
            flags: None,
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Number of higher-degree SH coefficients per point.
    pub fn sh_coeffs(&self) -> usize {
        sh_coeff_count(self.sh_degree)
    }

    /// SH-N coefficient (point, coeff index, channel).
    pub fn sh_n_at(&self, i: usize, m: usize, c: usize) -> f32 {
        self.sh_n[(i * self.sh_coeffs() + m) * 3 + c]
    }

    /// Keep only the points whose indices appear in `keep` (sorted, unique).
    pub fn select(&self, keep: &[usize]) -> GaussianCloud {
        let m = self.sh_coeffs();
        let f = self.feature_dim;
        GaussianCloud {
            means: keep.iter().map(|&i| self.means[i]).collect(),
            rotations: keep.iter().map(|&i| self.rotations[i]).collect(),
            log_scales: keep.iter().map(|&i| self.log_scales[i]).collect(),
            opacity_logits: keep.iter().map(|&i| self.opacity_logits[i]).collect(),
            sh0: keep.iter().map(|&i| self.sh0[i]).collect(),
            sh_n: keep
                .iter()
                .flat_map(|&i| self.sh_n[i * m * 3..(i + 1) * m * 3].iter().copied())
                .collect(),
            sh_degree: self.sh_degree,
            features: self.features.as_ref().map(|feat| {
                keep.iter()
                    .flat_map(|&i| feat[i * f..(i + 1) * f].iter().copied())
                    .collect()
            }),
            feature_dim: f,
            flags: self
                .flags
                .as_ref()
                .map(|fl| keep.iter().map(|&i| fl[i]).collect()),
        }
    }

    /// Reorder points by `perm`: output point `j` is input point `perm[j]`.
    pub fn permute(&self, perm: &[usize]) -> GaussianCloud {
        self.select(perm)
    }

    /// Normalize every quaternion and flip its sign so the scalar part is
    /// non-negative. All other fields are untouched.
    pub fn canonicalize(&self) -> Result<GaussianCloud> {
        let mut out = self.clone();
        for (i, q) in out.rotations.iter_mut().enumerate() {
            let norm =
                (q[0] as f64 * q[0] as f64 + q[1] as f64 * q[1] as f64 + q[2] as f64 * q[2] as f64
                    + q[3] as f64 * q[3] as f64)
                    .sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::ZeroQuaternion(i));
            }
            let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
            for v in q.iter_mut() {
                *v = (*v as f64 * sign / norm) as f32;
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.len();
        report.non_finite_means = count_non_finite(self.means.iter().flatten());
        report.non_finite_rotations = count_non_finite(self.rotations.iter().flatten());
        report.non_finite_log_scales = count_non_finite(self.log_scales.iter().flatten());
        report.non_finite_opacity = count_non_finite(self.opacity_logits.iter());
        report.non_finite_sh0 = count_non_finite(self.sh0.iter().flatten());
        report.non_finite_sh_n = count_non_finite(self.sh_n.iter());
        if let Some(feat) = &self.features {
            report.non_finite_features = count_non_finite(feat.iter());
        }
        for q in &self.rotations {
            let norm2: f32 = q.iter().map(|v| v * v).sum();
            if (norm2.sqrt() - 1.0).abs() > 1e-4 {
                report.non_unit_rotations += 1;
            }
        }
        let m = self.sh_coeffs();
        for (name, len) in [
            ("rotations", self.rotations.len()),
            ("log_scales", self.log_scales.len()),
            ("opacity_logits", self.opacity_logits.len()),
            ("sh0", self.sh0.len()),
        ] {
            if len != n {
                report.dimension_mismatches.push(format!("{name}: {len} != {n}"));
            }
        }
        if self.sh_n.len() != n * m * 3 {
            report
                .dimension_mismatches
                .push(format!("sh_n: {} != {}", self.sh_n.len(), n * m * 3));
        }
        if let Some(feat) = &self.features {
            if feat.len() != n * self.feature_dim {
                report
                    .dimension_mismatches
                    .push(format!("features: {} != {}", feat.len(), n * self.feature_dim));
            }
        }
        if let Some(fl) = &self.flags {
            if fl.len() != n {
                report
                    .dimension_mismatches
                    .push(format!("flags: {} != {n}", fl.len()));
            }
        }
        report
    }

    /// Axis-aligned bounding box of the means, `(min, max)`.
    pub fn aabb(&self) -> ([f32; 3], [f32; 3]) {
        let mut lo = [f32::INFINITY; 3];
        let mut hi = [f32::NEG_INFINITY; 3];
        for p in &self.means {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }
}

fn count_non_finite<'a>(values: impl Iterator<Item = &'a f32>) -> usize {
    values.filter(|v| !v.is_finite()).count()
}

/// Findings from `GaussianCloud::validate`; empty report means all
/// invariants hold. Validation never fails, it only reports.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub non_finite_means: usize,
    pub non_finite_rotations: usize,
    pub non_finite_log_scales: usize,
    pub non_finite_opacity: usize,
    pub non_finite_sh0: usize,
    pub non_finite_sh_n: usize,
    pub non_finite_features: usize,
    pub non_unit_rotations: usize,
    pub dimension_mismatches: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.non_finite_means == 0
            && self.non_finite_rotations == 0
            && self.non_finite_log_scales == 0
            && self.non_finite_opacity == 0
            && self.non_finite_sh0 == 0
            && self.non_finite_sh_n == 0
            && self.non_finite_features == 0
            && self.non_unit_rotations == 0
            && self.dimension_mismatches.is_empty()
    }
}

/// A static cloud plus a per-point motion model and temporal opacity,
/// covering one group-of-frames segment.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicGaussianCloud {
    /// Canonical state at the segment's time center.
    pub base: GaussianCloud,
    pub motion: MotionModel,
    pub temporal_opacity: TemporalOpacity,
    /// Normalized frame time covered by this segment, `t_start < t_end`.
    pub time_range: (f32, f32),
    pub gof_index: usize,
}

impl DynamicGaussianCloud {
    pub fn validate(&self) -> Result<()> {
        if self.time_range.0 >= self.time_range.1 {
            return Err(Error::InvalidArgument(format!(
                "time range [{}, {}] is empty",
                self.time_range.0, self.time_range.1
            )));
        }
        let n = self.base.len();
        if self.motion.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "motion has {} points, base has {n}",
                self.motion.len()
            )));
        }
        if self.temporal_opacity.center.len() != n || self.temporal_opacity.scale.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "temporal opacity has {} points, base has {n}",
                self.temporal_opacity.center.len()
            )));
        }
        Ok(())
    }
}

pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f32) -> f32 {
    let p = p.clamp(1e-7, 1.0 - 1e-7);
    (p / (1.0 - p)).ln()
}
