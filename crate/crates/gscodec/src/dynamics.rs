//! Dynamic representation: per-point motion models, temporal opacity with
//! lifespans, trajectory fitting, time slicing, and group-of-frames (GOF)
//! segmentation.
//!
//! Time is normalized to `[0, 1]` within each GOF. Frame `f` of a segment
//! covering `[f_start, f_end)` maps to `t = (f - f_start) / (len - 1)`,
//! with `t = 0` for a single-frame segment.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::splat::{logit, sigmoid, DynamicGaussianCloud, GaussianCloud};

/// Per-point motion over a segment's normalized time range.
///
/// The polynomial variant stores coefficients per point (time-shared for each
/// individual point); the basis variant shares a small set of curves across
/// all points, with per-point 3-vector coefficients. Rotation stays static
/// under the basis variant.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionModel {
    Polynomial(PolynomialMotion),
    Basis(BasisMotion),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMotion {
    /// Position polynomial degree Kp.
    pub degree_pos: usize,
    /// Rotation polynomial degree Kr.
    pub degree_rot: usize,
    /// Expansion center in normalized time.
    pub time_center: f32,
    /// N x (Kp+1) coefficients, `pos_coeffs[i*(Kp+1)+k]` = a_k for point i.
    /// a_0 is the position at the time center (the base mean).
    pub pos_coeffs: Vec<[f32; 3]>,
    /// N x (Kr+1) coefficients; r_0 is the base rotation.
    pub rot_coeffs: Vec<[f32; 4]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisMotion {
    /// B shared curves, each sampled at `ctrl` control points spanning
    /// t in [0, 1]; evaluated by linear interpolation.
    pub basis: Vec<Vec<f32>>,
    /// N x B 3-vector coefficients, `coeffs[i*B+b]`.
    pub coeffs: Vec<[f32; 3]>,
}

impl MotionModel {
    pub fn len(&self) -> usize {
        match self {
            MotionModel::Polynomial(p) => p.pos_coeffs.len() / (p.degree_pos + 1),
            MotionModel::Basis(b) => {
                if b.basis.is_empty() {
                    0
                } else {
                    b.coeffs.len() / b.basis.len()
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Static model: zero displacement, zero angular motion.
    pub fn static_poly(base: &GaussianCloud, degree_pos: usize, degree_rot: usize) -> MotionModel {
        let n = base.len();
        let mut pos = vec![[0.0f32; 3]; n * (degree_pos + 1)];
        let mut rot = vec![[0.0f32; 4]; n * (degree_rot + 1)];
        for i in 0..n {
            pos[i * (degree_pos + 1)] = base.means[i];
            rot[i * (degree_rot + 1)] = base.rotations[i];
        }
        MotionModel::Polynomial(PolynomialMotion {
            degree_pos,
            degree_rot,
            time_center: 0.5,
            pos_coeffs: pos,
            rot_coeffs: rot,
        })
    }

    /// Position of point `i` at normalized time `t`. `base_mean` is used by
    /// the basis variant; the polynomial variant carries its own a_0.
    pub fn position(&self, i: usize, t: f32, base_mean: [f32; 3]) -> [f32; 3] {
        match self {
            MotionModel::Polynomial(p) => {
                let dt = t - p.time_center;
                let k = p.degree_pos + 1;
                let mut out = [0.0f32; 3];
                let mut pow = 1.0f32;
                for c in &p.pos_coeffs[i * k..(i + 1) * k] {
                    for a in 0..3 {
                        out[a] += c[a] * pow;
                    }
                    pow *= dt;
                }
                out
            }
            MotionModel::Basis(b) => {
                let nb = b.basis.len();
                let mut out = base_mean;
                for (bi, curve) in b.basis.iter().enumerate() {
                    let v = lerp_curve(curve, t.clamp(0.0, 1.0));
                    let c = b.coeffs[i * nb + bi];
                    for a in 0..3 {
                        out[a] += c[a] * v;
                    }
                }
                out
            }
        }
    }

    /// Rotation of point `i` at time `t`, renormalized after summation.
    /// The basis variant keeps rotation static.
    pub fn rotation(&self, i: usize, t: f32, base_rot: [f32; 4]) -> Result<[f32; 4]> {
        match self {
            MotionModel::Polynomial(p) => {
                let dt = t - p.time_center;
                let k = p.degree_rot + 1;
                let mut q = [0.0f32; 4];
                let mut pow = 1.0f32;
                for c in &p.rot_coeffs[i * k..(i + 1) * k] {
                    for a in 0..4 {
                        q[a] += c[a] * pow;
                    }
                    pow *= dt;
                }
                let norm = (q.iter().map(|v| (*v as f64).powi(2)).sum::<f64>()).sqrt();
                if norm == 0.0 || !norm.is_finite() {
                    return Err(Error::ZeroQuaternion(i));
                }
                Ok([
                    (q[0] as f64 / norm) as f32,
                    (q[1] as f64 / norm) as f32,
                    (q[2] as f64 / norm) as f32,
                    (q[3] as f64 / norm) as f32,
                ])
            }
            MotionModel::Basis(_) => Ok(base_rot),
        }
    }
}

fn lerp_curve(curve: &[f32], t: f32) -> f32 {
    if curve.len() == 1 {
        return curve[0];
    }
    let x = t * (curve.len() - 1) as f32;
    let lo = (x.floor() as usize).min(curve.len() - 2);
    let frac = x - lo as f32;
    curve[lo] * (1.0 - frac) + curve[lo + 1] * frac
}

/// Gaussian-in-time opacity modulation giving each point a finite lifespan.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalOpacity {
    /// Per-point temporal center in normalized time.
    pub center: Vec<f32>,
    /// Per-point temporal scale, strictly positive.
    pub scale: Vec<f32>,
}

impl TemporalOpacity {
    /// Always-on opacity: centers at 0.5 with a very wide kernel.
    pub fn always_on(n: usize) -> TemporalOpacity {
        TemporalOpacity {
            center: vec![0.5; n],
            scale: vec![1e6; n],
        }
    }

    /// alpha_i(t) = base_opacity * exp(-(t - mu)^2 / (2 s^2)).
    pub fn alpha(&self, i: usize, base_opacity: f32, t: f32) -> f32 {
        let d = (t - self.center[i]) as f64;
        let s = self.scale[i] as f64;
        (base_opacity as f64 * (-d * d / (2.0 * s * s)).exp()) as f32
    }

    /// Closed-form interval where alpha(t) >= tau, or `None` if the peak
    /// never reaches tau.
    pub fn lifespan(&self, i: usize, base_opacity: f32, tau: f32) -> Result<Option<(f32, f32)>> {
        if tau <= 0.0 {
            return Err(Error::InvalidArgument("lifespan threshold must be > 0".into()));
        }
        if (base_opacity as f64) < tau as f64 {
            return Ok(None);
        }
        let half = self.scale[i] as f64 * (2.0 * (base_opacity as f64 / tau as f64).ln()).sqrt();
        let mu = self.center[i] as f64;
        Ok(Some(((mu - half) as f32, (mu + half) as f32)))
    }
}

/// Least-squares polynomial fit of `(t_j, p_j)` samples in powers of
/// `(t - time_center)`. Exact interpolation when the sample count equals
/// `degree + 1` with distinct times.
pub fn fit_poly_trajectory(
    samples: &[(f64, [f64; 3])],
    degree: usize,
    time_center: f64,
) -> Result<Vec<[f64; 3]>> {
    if samples.len() < degree + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples for degree {degree}, got {}",
            degree + 1,
            samples.len()
        )));
    }
    let mut times: Vec<f64> = samples.iter().map(|s| s.0).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    if times.len() < degree + 1 {
        return Err(Error::RankDeficient(format!(
            "{} distinct sample times for degree {degree}",
            times.len()
        )));
    }
    let rows = samples.len();
    let cols = degree + 1;
    let mut vander = DMatrix::zeros(rows, cols);
    for (j, (t, _)) in samples.iter().enumerate() {
        let dt = t - time_center;
        let mut pow = 1.0;
        for k in 0..cols {
            vander[(j, k)] = pow;
            pow *= dt;
        }
    }
    let svd = vander.svd(true, true);
    let mut coeffs = vec![[0.0f64; 3]; cols];
    for axis in 0..3 {
        let rhs = DVector::from_iterator(rows, samples.iter().map(|s| s.1[axis]));
        let sol = svd
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::RankDeficient(e.to_string()))?;
        for k in 0..cols {
            coeffs[k][axis] = sol[k];
        }
    }
    Ok(coeffs)
}

/// Result of a rank-B trajectory decomposition.
#[derive(Debug, Clone)]
pub struct BasisFit {
    /// Per-point temporal mean position (the centering offset).
    pub point_means: Vec<[f64; 3]>,
    /// B shared curves, each sampled at the T input times.
    pub basis: Vec<Vec<f64>>,
    /// `coeffs[(i*B + b)*3 + axis]`.
    pub coeffs: Vec<f64>,
    /// Sum of squared reconstruction errors over all samples.
    pub residual_sq: f64,
    /// Full singular-value spectrum of the centered matrix.
    pub singular_values: Vec<f64>,
}

/// Fit `num_basis` shared motion curves to N trajectories of T samples each
/// via SVD of the row-centered (3N x T) displacement matrix. The rank-B
/// truncation is optimal in the least-squares sense, and the residual equals
/// the sum of squared discarded singular values.
pub fn fit_basis_pca(trajectories: &[Vec<[f64; 3]>], num_basis: usize) -> Result<BasisFit> {
    if num_basis == 0 {
        return Err(Error::InvalidArgument("basis count must be >= 1".into()));
    }
    let n = trajectories.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no trajectories".into()));
    }
    let t_len = trajectories[0].len();
    if trajectories.iter().any(|tr| tr.len() != t_len) {
        return Err(Error::DimensionMismatch(
            "trajectories have differing lengths".into(),
        ));
    }
    let point_means: Vec<[f64; 3]> = trajectories
        .iter()
        .map(|tr| {
            let mut m = [0.0; 3];
            for p in tr {
                for a in 0..3 {
                    m[a] += p[a];
                }
            }
            for v in m.iter_mut() {
                *v /= t_len as f64;
            }
            m
        })
        .collect();

    // Rows are (point, axis) pairs, columns are time samples.
    let mut mat = DMatrix::zeros(3 * n, t_len);
    for (i, tr) in trajectories.iter().enumerate() {
        for (j, p) in tr.iter().enumerate() {
            for a in 0..3 {
                mat[(3 * i + a, j)] = p[a] - point_means[i][a];
            }
        }
    }
    let b = num_basis.min(3 * n).min(t_len);
    let svd = mat.svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();

    let basis: Vec<Vec<f64>> = (0..b).map(|k| vt.row(k).iter().copied().collect()).collect();
    let mut coeffs = vec![0.0; n * b * 3];
    for i in 0..n {
        for k in 0..b {
            for a in 0..3 {
                coeffs[(i * b + k) * 3 + a] = u[(3 * i + a, k)] * singular_values[k];
            }
        }
    }
    let residual_sq: f64 = singular_values.iter().skip(b).map(|s| s * s).sum();
    Ok(BasisFit {
        point_means,
        basis,
        coeffs,
        residual_sq,
        singular_values,
    })
}

/// Extract the static cloud visible at normalized time `t`. Means and
/// rotations come from the motion model; opacity becomes alpha(t) converted
/// back to a logit. Points with alpha below 1/255 are dropped.
pub fn slice_at_time(dyncloud: &DynamicGaussianCloud, t: f32) -> Result<GaussianCloud> {
    let t = t.clamp(0.0, 1.0);
    let base = &dyncloud.base;
    let n = base.len();
    let mut keep = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n);
    let mut rotations = Vec::with_capacity(n);
    let mut logits = Vec::with_capacity(n);
    for i in 0..n {
        let alpha = dyncloud
            .temporal_opacity
            .alpha(i, sigmoid(base.opacity_logits[i]), t);
        if alpha < 1.0 / 255.0 {
            continue;
        }
        keep.push(i);
        means.push(dyncloud.motion.position(i, t, base.means[i]));
        rotations.push(dyncloud.motion.rotation(i, t, base.rotations[i])?);
        logits.push(logit(alpha));
    }
    let mut out = base.select(&keep);
    out.means = means;
    out.rotations = rotations;
    out.opacity_logits = logits;
    Ok(out)
}

/// One group-of-frames segment; segments partition the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GofSegment {
    pub index: usize,
    /// Covered frames `[f_start, f_end)`.
    pub f_start: usize,
    pub f_end: usize,
}

impl GofSegment {
    pub fn frame_count(&self) -> usize {
        self.f_end - self.f_start
    }

    /// Normalized time of frame `f` within this segment.
    pub fn frame_time(&self, f: usize) -> f32 {
        let len = self.frame_count();
        if len <= 1 {
            0.0
        } else {
            (f - self.f_start) as f32 / (len - 1) as f32
        }
    }
}

/// Split `frame_count` frames into ceil(frames / gof_len) segments; all have
/// length `gof_len` except possibly the last.
pub fn segment_gof(frame_count: usize, gof_len: usize) -> Result<Vec<GofSegment>> {
    if gof_len == 0 {
        return Err(Error::InvalidArgument("gof_len must be >= 1".into()));
    }
    let mut out = Vec::new();
    let mut start = 0;
    let mut index = 0;
    while start < frame_count {
        let end = (start + gof_len).min(frame_count);
        out.push(GofSegment {
            index,
            f_start: start,
            f_end: end,
        });
        start = end;
        index += 1;
    }
    Ok(out)
}
