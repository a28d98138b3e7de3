//! Image quality metrics over linear-RGB buffers: PSNR (capped) and SSIM
//! with the standard 11x11 Gaussian window.

use crate::error::{Error, Result};
use crate::par;
use crate::render::ImageBuffer;

/// dB cap reported for identical images.
pub const PSNR_CAP: f64 = 99.0;

fn check_dims(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(format!(
            "image dims {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if a.width == 0 || a.height == 0 {
        return Err(Error::InvalidArgument("empty image".into()));
    }
    Ok(())
}

/// `10 log10(1 / MSE)` for [0,1] images, capped at 99 dB.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_dims(a, b)?;
    let n = a.data.len();
    let mse = par::chunked_sum_f64(n, 4096, |i| {
        let d = a.data[i] as f64 - b.data[i] as f64;
        d * d
    }) / n as f64;
    if mse <= 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn ssim_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0f64; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        *v = (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Mean SSIM over valid (fully interior) 11x11 windows, averaged across
/// channels. Requires images at least 11x11.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = (a.width, a.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "image {w}x{h} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let kernel = ssim_kernel();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);

    let mut total = 0.0f64;
    for ch in 0..3 {
        // Separable Gaussian filtering of the five moment maps.
        let plane = |img: &ImageBuffer, i: usize| img.data[i * 3 + ch] as f64;
        let maps: [Vec<f64>; 5] = {
            let mut ax = vec![0.0f64; w * h];
            let mut bx = vec![0.0f64; w * h];
            let mut axx = vec![0.0f64; w * h];
            let mut bxx = vec![0.0f64; w * h];
            let mut abx = vec![0.0f64; w * h];
            for i in 0..w * h {
                let (pa, pb) = (plane(a, i), plane(b, i));
                ax[i] = pa;
                bx[i] = pb;
                axx[i] = pa * pa;
                bxx[i] = pb * pb;
                abx[i] = pa * pb;
            }
            [ax, bx, axx, bxx, abx]
        };
        let filtered: Vec<Vec<f64>> = maps
            .iter()
            .map(|m| filter_valid(m, w, h, &kernel))
            .collect();

        let channel_sum = par::chunked_sum_f64(ow * oh, 1024, |i| {
            let (mu_a, mu_b) = (filtered[0][i], filtered[1][i]);
            let var_a = filtered[2][i] - mu_a * mu_a;
            let var_b = filtered[3][i] - mu_b * mu_b;
            let cov = filtered[4][i] - mu_a * mu_b;
            ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
        });
        total += channel_sum / (ow * oh) as f64;
    }
    Ok(total / 3.0)
}

/// Valid-mode separable convolution; output is (w-10) x (h-10).
fn filter_valid(data: &[f64], w: usize, h: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    // Horizontal pass.
    let mut tmp = vec![0.0f64; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let mut s = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                s += data[y * w + x + k] * kv;
            }
            tmp[y * ow + x] = s;
        }
    }
    // Vertical pass.
    let mut out = vec![0.0f64; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut s = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                s += tmp[(y + k) * ow + x] * kv;
            }
            out[y * ow + x] = s;
        }
    }
    out
}
