//! Fitted probability models and rate estimation for entropy coding.
//!
//! Two designs: a per-channel histogram (factorized) model, and a spatial
//! Gaussian model that gives every point its own mean/std taken from a
//! coarse voxel grid over the scene. Both drive the same rANS coder and the
//! same rate estimate: `P(v~) = F(v~ + Q_s/2) - F(v~ - Q_s/2)` and
//! `bits = sum(-log2 P)`.

pub mod ans;

use crate::error::{Error, Result};
use crate::par;
use crate::quantize::QuantizationScheme;

pub use ans::{ans_decode, ans_encode, quantize_cdf, AnsModel, QuantizedCdf, PROB_BITS, PROB_SCALE};

/// Probability floor; no coded symbol may fall below this mass.
pub const P_MIN: f64 = 1.0 / (1 << 24) as f64;

/// Histogram model for one symbol channel, Laplace-smoothed so unseen
/// symbols stay codable.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedHistogramModel {
    pub symbol_count: usize,
    pub alpha: f64,
    /// Smoothed probabilities, sum to 1.
    pub probs: Vec<f64>,
    /// Fixed-point table shared by encoder and decoder.
    pub cdf: QuantizedCdf,
}

/// Fit a histogram model: `p[s] = (count(s) + alpha) / (n + alpha*S)`.
pub fn fit_factorized(
    symbols: &[u32],
    symbol_count: usize,
    alpha: f64,
) -> Result<FactorizedHistogramModel> {
    if symbols.is_empty() {
        return Err(Error::InvalidArgument("fit_factorized: empty input".into()));
    }
    if symbol_count < 2 {
        return Err(Error::InvalidArgument(
            "fit_factorized: need at least 2 symbols".into(),
        ));
    }
    if alpha <= 0.0 {
        return Err(Error::InvalidArgument(
            "fit_factorized: alpha must be > 0 so unseen symbols stay codable".into(),
        ));
    }
    let mut counts = vec![0u64; symbol_count];
    for &s in symbols {
        if s as usize >= symbol_count {
            return Err(Error::SymbolOutOfRange {
                symbol: s,
                bits: 32,
            });
        }
        counts[s as usize] += 1;
    }
    let n = symbols.len() as f64;
    let denom = n + alpha * symbol_count as f64;
    let probs: Vec<f64> = counts.iter().map(|&c| (c as f64 + alpha) / denom).collect();
    let cdf = quantize_cdf(&probs)?;
    Ok(FactorizedHistogramModel {
        symbol_count,
        alpha,
        probs,
        cdf,
    })
}

impl FactorizedHistogramModel {
    /// Smoothed (continuous) probability, `(count + alpha) / (n + alpha*S)`.
    pub fn probability(&self, symbol: u32) -> f64 {
        self.probs
            .get(symbol as usize)
            .copied()
            .unwrap_or(P_MIN)
            .max(P_MIN)
    }

    /// Probability as the coder sees it: the fixed-point table entry. These
    /// sum to exactly 1 at the coder precision.
    pub fn coded_probability(&self, symbol: u32) -> f64 {
        self.cdf.prob(symbol)
    }

    /// Total bits to code `symbols` with the fixed-point table actually
    /// used by the ANS coder.
    pub fn rate_estimate_bits(&self, symbols: &[u32]) -> f64 {
        par::chunked_sum_f64(symbols.len(), 4096, |i| {
            -self.coded_probability(symbols[i]).log2()
        })
    }

    pub fn encode(&self, symbols: &[u32]) -> Result<Vec<u8>> {
        ans_encode(symbols, &AnsModel::Shared(&self.cdf))
    }

    pub fn decode(&self, bytes: &[u8], n: usize) -> Result<Vec<u32>> {
        ans_decode(bytes, &AnsModel::Shared(&self.cdf), n)
    }

    /// Serialize the coder-relevant state (S and the fixed-point table).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.symbol_count * 2);
        out.extend_from_slice(&(self.symbol_count as u32).to_le_bytes());
        out.extend_from_slice(&(self.alpha as f32).to_le_bytes());
        for s in 0..self.symbol_count {
            let (_, f) = self.cdf.start_freq(s as u32);
            out.extend_from_slice(&(f as u16).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<FactorizedHistogramModel> {
        if bytes.len() < 8 {
            return Err(Error::Truncated(bytes.len()));
        }
        let s = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let alpha = f32::from_le_bytes(bytes[4..8].try_into().unwrap()) as f64;
        if bytes.len() < 8 + 2 * s {
            return Err(Error::Truncated(bytes.len()));
        }
        let mut cdf = Vec::with_capacity(s + 1);
        let mut acc = 0u32;
        cdf.push(0);
        for j in 0..s {
            let f = u16::from_le_bytes(bytes[8 + 2 * j..10 + 2 * j].try_into().unwrap()) as u32;
            acc += f;
            cdf.push(acc);
        }
        if acc != PROB_SCALE {
            return Err(Error::MalformedHeader(format!(
                "entropy table sums to {acc}, expected {PROB_SCALE}"
            )));
        }
        let probs: Vec<f64> = (0..s)
            .map(|j| (cdf[j + 1] - cdf[j]) as f64 / PROB_SCALE as f64)
            .collect();
        Ok(FactorizedHistogramModel {
            symbol_count: s,
            alpha,
            probs,
            cdf: QuantizedCdf { cdf },
        })
    }
}

/// Per-point Gaussian model with parameters taken from a coarse voxel grid
/// over the scene bounding box. Voxels with fewer than two members fall back
/// to global statistics; all sigmas are clamped to a floor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGaussianModel {
    pub origin: [f32; 3],
    pub voxel_size: f32,
    pub dims: [u32; 3],
    /// Per-voxel mean/std, fallback already applied.
    pub mu: Vec<f32>,
    pub sigma: Vec<f32>,
    pub global_mu: f32,
    pub global_sigma: f32,
    pub sigma_floor: f32,
}

pub fn fit_spatial_gaussian(
    positions: &[[f32; 3]],
    values: &[f32],
    voxel_size: f32,
    sigma_floor: f32,
) -> Result<SpatialGaussianModel> {
    if voxel_size <= 0.0 {
        return Err(Error::InvalidArgument("voxel_size must be > 0".into()));
    }
    if positions.len() != values.len() || positions.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} positions vs {} values",
            positions.len(),
            values.len()
        )));
    }
    let sigma_floor = sigma_floor.max(1e-12);
    let mut lo = [f32::INFINITY; 3];
    let mut hi = [f32::NEG_INFINITY; 3];
    for p in positions {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let dims: [u32; 3] = std::array::from_fn(|a| {
        (((hi[a] - lo[a]) / voxel_size).floor() as u32 + 1).max(1)
    });
    let n_vox = (dims[0] * dims[1] * dims[2]) as usize;
    let voxel_of = |p: &[f32; 3]| -> usize {
        let mut idx = 0usize;
        for a in 0..3 {
            let i = (((p[a] - lo[a]) / voxel_size).floor() as i64)
                .clamp(0, dims[a] as i64 - 1) as usize;
            idx = idx * dims[a] as usize + i;
        }
        idx
    };
    let mut count = vec![0u64; n_vox];
    let mut sum = vec![0.0f64; n_vox];
    let mut sum2 = vec![0.0f64; n_vox];
    for (p, &v) in positions.iter().zip(values) {
        let j = voxel_of(p);
        count[j] += 1;
        sum[j] += v as f64;
        sum2[j] += v as f64 * v as f64;
    }
    let n = values.len() as f64;
    let g_sum: f64 = values.iter().map(|&v| v as f64).sum();
    let g_mu = g_sum / n;
    let g_var = (values.iter().map(|&v| (v as f64 - g_mu).powi(2)).sum::<f64>() / n).max(0.0);
    let global_sigma = (g_var.sqrt() as f32).max(sigma_floor);

    let mut mu = vec![0.0f32; n_vox];
    let mut sigma = vec![0.0f32; n_vox];
    for j in 0..n_vox {
        if count[j] >= 2 {
            let m = sum[j] / count[j] as f64;
            let var = (sum2[j] / count[j] as f64 - m * m).max(0.0);
            mu[j] = m as f32;
            sigma[j] = (var.sqrt() as f32).max(sigma_floor);
        } else {
            mu[j] = g_mu as f32;
            sigma[j] = global_sigma;
        }
    }
    Ok(SpatialGaussianModel {
        origin: lo,
        voxel_size,
        dims,
        mu,
        sigma,
        global_mu: g_mu as f32,
        global_sigma,
        sigma_floor,
    })
}

/// Standard normal CDF via an erf polynomial approximation (abs error
/// ~1.5e-7). Differences of this CDF telescope, so total mass is exact.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

impl SpatialGaussianModel {
    fn voxel_index(&self, p: &[f32; 3]) -> usize {
        let mut idx = 0usize;
        for a in 0..3 {
            let i = (((p[a] - self.origin[a]) / self.voxel_size).floor() as i64)
                .clamp(0, self.dims[a] as i64 - 1) as usize;
            idx = idx * self.dims[a] as usize + i;
        }
        idx
    }

    pub fn params_at(&self, p: &[f32; 3]) -> (f32, f32) {
        let j = self.voxel_index(p);
        (self.mu[j], self.sigma[j])
    }

    /// `P(v~) = Phi((v~ + Q_s/2 - mu)/sigma) - Phi((v~ - Q_s/2 - mu)/sigma)`,
    /// floored at `P_MIN`.
    pub fn probability(&self, p: &[f32; 3], v_tilde: f64, q_s: f64) -> f64 {
        let (mu, sigma) = self.params_at(p);
        gaussian_interval_prob(mu as f64, sigma as f64, v_tilde, q_s)
    }

    /// Total Shannon bits for per-point values under this model.
    pub fn rate_estimate_bits(&self, positions: &[[f32; 3]], values: &[f64], q_s: f64) -> f64 {
        par::chunked_sum_f64(values.len(), 1024, |i| {
            -self.probability(&positions[i], values[i], q_s).log2()
        })
    }

    /// Fixed-point CDF over all scheme symbols for the point at `p`, for
    /// driving the ANS coder. Encoder and decoder call this with identical
    /// (quantized) model state, so the tables agree.
    pub fn quantized_cdf(&self, p: &[f32; 3], scheme: &QuantizationScheme) -> QuantizedCdf {
        let (mu, sigma) = self.params_at(p);
        let q_s = scheme.step();
        let s = scheme.symbol_count() as usize;
        let probs: Vec<f64> = (0..s)
            .map(|sym| {
                let v = scheme.v_min as f64 + sym as f64 * q_s;
                gaussian_interval_prob(mu as f64, sigma as f64, v, q_s)
            })
            .collect();
        // Symbol count is bounded by the 12-bit coder precision on this
        // path; container routes wider attributes through byte planes.
        quantize_cdf(&probs).expect("scheme symbol count fits coder precision")
    }

    /// Serialize grid dims plus 16-bit quantized mu/sigma tables.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for a in 0..3 {
            out.extend_from_slice(&self.origin[a].to_le_bytes());
        }
        out.extend_from_slice(&self.voxel_size.to_le_bytes());
        for a in 0..3 {
            out.extend_from_slice(&self.dims[a].to_le_bytes());
        }
        out.extend_from_slice(&self.global_mu.to_le_bytes());
        out.extend_from_slice(&self.global_sigma.to_le_bytes());
        out.extend_from_slice(&self.sigma_floor.to_le_bytes());
        // 16-bit tables against the min/max of each field.
        let write_table = |vals: &[f32], out: &mut Vec<u8>| {
            let lo = vals.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = vals.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            out.extend_from_slice(&lo.to_le_bytes());
            out.extend_from_slice(&hi.to_le_bytes());
            let range = (hi - lo).max(1e-30);
            for &v in vals {
                let q = (((v - lo) / range) * 65535.0).round() as u16;
                out.extend_from_slice(&q.to_le_bytes());
            }
        };
        write_table(&self.mu, &mut out);
        write_table(&self.sigma, &mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SpatialGaussianModel> {
        struct Cursor<'a> {
            bytes: &'a [u8],
            pos: usize,
        }
        impl Cursor<'_> {
            fn f32(&mut self) -> Result<f32> {
                if self.pos + 4 > self.bytes.len() {
                    return Err(Error::Truncated(self.pos));
                }
                let v = f32::from_le_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
                self.pos += 4;
                Ok(v)
            }
            fn u32(&mut self) -> Result<u32> {
                if self.pos + 4 > self.bytes.len() {
                    return Err(Error::Truncated(self.pos));
                }
                let v = u32::from_le_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
                self.pos += 4;
                Ok(v)
            }
            fn table(&mut self, n: usize) -> Result<Vec<f32>> {
                let lo = self.f32()?;
                let hi = self.f32()?;
                let range = (hi - lo).max(1e-30);
                if self.pos + 2 * n > self.bytes.len() {
                    return Err(Error::Truncated(self.pos));
                }
                let base = self.pos;
                let out = (0..n)
                    .map(|j| {
                        let q = u16::from_le_bytes(
                            self.bytes[base + 2 * j..base + 2 * j + 2].try_into().unwrap(),
                        );
                        lo + q as f32 / 65535.0 * range
                    })
                    .collect();
                self.pos += 2 * n;
                Ok(out)
            }
        }
        let mut cur = Cursor { bytes, pos: 0 };
        let origin = [cur.f32()?, cur.f32()?, cur.f32()?];
        let voxel_size = cur.f32()?;
        let dims = [cur.u32()?, cur.u32()?, cur.u32()?];
        let global_mu = cur.f32()?;
        let global_sigma = cur.f32()?;
        let sigma_floor = cur.f32()?;
        let n_vox = (dims[0] as usize) * (dims[1] as usize) * (dims[2] as usize);
        let mu = cur.table(n_vox)?;
        let sigma = cur.table(n_vox)?;
        Ok(SpatialGaussianModel {
            origin,
            voxel_size,
            dims,
            mu,
            sigma,
            global_mu,
            global_sigma,
            sigma_floor,
        })
    }
}

fn gaussian_interval_prob(mu: f64, sigma: f64, v_tilde: f64, q_s: f64) -> f64 {
    let hi = normal_cdf((v_tilde + q_s / 2.0 - mu) / sigma);
    let lo = normal_cdf((v_tilde - q_s / 2.0 - mu) / sigma);
    (hi - lo).max(P_MIN)
}

/// Average bits per value under a per-point Gaussian model evaluated at the
/// continuous values (the training-time entropy-constraint surrogate).
pub fn entropy_loss_gaussian(
    model: &SpatialGaussianModel,
    positions: &[[f32; 3]],
    values: &[f64],
    q_s: f64,
) -> f64 {
    model.rate_estimate_bits(positions, values, q_s) / values.len().max(1) as f64
}

/// Average bits per value under a histogram model, with the CDF extended
/// piecewise-linearly over symbol space. On integer (pre-quantized) inputs
/// with `q_s = 1` this equals `rate_estimate_bits / n`.
pub fn entropy_loss_factorized(model: &FactorizedHistogramModel, values: &[f64], q_s: f64) -> f64 {
    // Built from the fixed-point table so this agrees with rate_estimate
    // on pre-quantized inputs.
    let probs: Vec<f64> = (0..model.symbol_count)
        .map(|s| model.coded_probability(s as u32))
        .collect();
    let cum: Vec<f64> = {
        let mut acc = 0.0;
        let mut c = Vec::with_capacity(model.symbol_count + 1);
        c.push(0.0);
        for &p in &probs {
            acc += p;
            c.push(acc);
        }
        c
    };
    // F is linear on [s - 0.5, s + 0.5] with F(s + 0.5) = cum[s + 1].
    let f = |x: f64| -> f64 {
        let s = model.symbol_count as f64;
        if x <= -0.5 {
            return 0.0;
        }
        if x >= s - 0.5 {
            return 1.0;
        }
        let k = (x + 0.5).floor() as usize;
        let frac = (x + 0.5) - k as f64;
        cum[k] + frac * probs[k]
    };
    let total: f64 = values
        .iter()
        .map(|&v| -(f(v + q_s / 2.0) - f(v - q_s / 2.0)).max(P_MIN).log2())
        .sum();
    total / values.len().max(1) as f64
}
