//! Reference CPU splatting renderer: EWA projection, global depth sort,
//! tile-bucketed front-to-back alpha compositing.
//!
//! Determinism contract: the depth sort breaks ties by point index, tile
//! lists are built sequentially in sorted order, and each pixel walks its
//! tile list in that order — so images are bit-identical across thread
//! counts and input permutations (for distinct depths).

use crate::dynamics::slice_at_time;
use crate::error::{Error, Result};
use crate::par;
use crate::splat::{sigmoid, DynamicGaussianCloud, GaussianCloud};

/// Pinhole camera with a world-to-camera rigid transform (+z forward).
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f32,
    pub fy: f32,
    pub cx: f32,
    pub cy: f32,
    pub width: usize,
    pub height: usize,
    /// Row-major 3x4 world-to-camera transform `[R | t]`.
    pub extrinsics: [[f32; 4]; 3],
    pub near: f32,
    pub far: f32,
}

impl Camera {
    /// Axis-aligned camera at `position` looking down +z.
    pub fn looking_forward(position: [f32; 3], fx: f32, width: usize, height: usize) -> Camera {
        Camera {
            fx,
            fy: fx,
            cx: width as f32 / 2.0,
            cy: height as f32 / 2.0,
            width,
            height,
            extrinsics: [
                [1.0, 0.0, 0.0, -position[0]],
                [0.0, 1.0, 0.0, -position[1]],
                [0.0, 0.0, 1.0, -position[2]],
            ],
            near: 0.01,
            far: 1000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidArgument("focal lengths must be positive".into()));
        }
        if !(self.near < self.far) {
            return Err(Error::InvalidArgument("near must be < far".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("zero image dimensions".into()));
        }
        Ok(())
    }

    fn to_camera(&self, p: [f32; 3]) -> [f32; 3] {
        let e = &self.extrinsics;
        [
            e[0][0] * p[0] + e[0][1] * p[1] + e[0][2] * p[2] + e[0][3],
            e[1][0] * p[0] + e[1][1] * p[1] + e[1][2] * p[2] + e[1][3],
            e[2][0] * p[0] + e[2][1] * p[1] + e[2][2] * p[2] + e[2][3],
        ]
    }

    /// Camera center in world coordinates, `-R^T t`.
    pub fn center(&self) -> [f32; 3] {
        let e = &self.extrinsics;
        let mut c = [0.0f32; 3];
        for a in 0..3 {
            c[a] = -(e[0][a] * e[0][3] + e[1][a] * e[1][3] + e[2][a] * e[2][3]);
        }
        c
    }
}

/// H x W x 3 linear RGB in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl ImageBuffer {
    pub fn filled(width: usize, height: usize, color: [f32; 3]) -> ImageBuffer {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&color);
        }
        ImageBuffer {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let o = (y * self.width + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    /// 8-bit sRGB-ready bytes (plain [0,1] -> [0,255] with rounding).
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }
}

/// Screen-space footprint of one splat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected {
    pub mu: [f32; 2],
    /// Upper triangle (a, b, c) of the symmetric 2x2 covariance.
    pub cov: [f32; 3],
    pub depth: f32,
}

/// Low-pass dilation added to both screen-space variances (px^2).
pub const COV_DILATION: f32 = 0.3;

/// EWA projection of one Gaussian. `None` marks a culled (outside the
/// near/far slab) point.
pub fn project_gaussian(
    mean: [f32; 3],
    rotation: [f32; 4],
    log_scales: [f32; 3],
    camera: &Camera,
) -> Option<Projected> {
    let t = camera.to_camera(mean);
    let tz = t[2];
    if !(tz > camera.near && tz <= camera.far) {
        return None;
    }
    let mu = [
        camera.fx * t[0] / tz + camera.cx,
        camera.fy * t[1] / tz + camera.cy,
    ];

    // Sigma_3d = R S S^T R^T from the unit quaternion (w, x, y, z).
    let [w, x, y, z] = rotation;
    let r = [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ];
    let s2 = [
        (2.0 * log_scales[0]).exp(),
        (2.0 * log_scales[1]).exp(),
        (2.0 * log_scales[2]).exp(),
    ];
    let mut sigma3 = [[0.0f32; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            sigma3[i][j] = (0..3).map(|k| r[i][k] * s2[k] * r[j][k]).sum();
        }
    }

    // M = J W, rows of the 2x3 perspective Jacobian times world-to-camera
    // rotation.
    let e = &camera.extrinsics;
    let j = [
        [camera.fx / tz, 0.0, -camera.fx * t[0] / (tz * tz)],
        [0.0, camera.fy / tz, -camera.fy * t[1] / (tz * tz)],
    ];
    let mut m = [[0.0f32; 3]; 2];
    for i in 0..2 {
        for c in 0..3 {
            m[i][c] = (0..3).map(|k| j[i][k] * e[k][c]).sum();
        }
    }
    // Sigma_2d = M Sigma_3d M^T + eps I.
    let mut cov = [0.0f32; 3];
    let mut tmp = [[0.0f32; 3]; 2];
    for i in 0..2 {
        for c in 0..3 {
            tmp[i][c] = (0..3).map(|k| m[i][k] * sigma3[k][c]).sum();
        }
    }
    cov[0] = (0..3).map(|k| tmp[0][k] * m[0][k]).sum::<f32>() + COV_DILATION;
    cov[1] = (0..3).map(|k| tmp[0][k] * m[1][k]).sum();
    cov[2] = (0..3).map(|k| tmp[1][k] * m[1][k]).sum::<f32>() + COV_DILATION;

    Some(Projected {
        mu,
        cov,
        depth: tz,
    })
}

// Real SH basis constants (degree 0..3).
const SH_C0: f32 = 0.282_094_79;
const SH_C1: f32 = 0.488_602_51;
const SH_C2: [f32; 5] = [
    1.092_548_4,
    -1.092_548_4,
    0.315_391_57,
    -1.092_548_4,
    0.546_274_2,
];
const SH_C3: [f32; 7] = [
    -0.590_043_6,
    2.890_611_4,
    -0.457_045_8,
    0.373_176_33,
    -0.457_045_8,
    1.445_305_7,
    -0.590_043_6,
];

/// View-dependent color from SH coefficients; `sh_n` holds M = (D+1)^2 - 1
/// higher-order triples laid out `[m][rgb]`. `dir` must be unit length.
pub fn eval_sh(sh0: [f32; 3], sh_n: &[f32], dir: [f32; 3]) -> [f32; 3] {
    let mut rgb = [
        0.5 + SH_C0 * sh0[0],
        0.5 + SH_C0 * sh0[1],
        0.5 + SH_C0 * sh0[2],
    ];
    let m = sh_n.len() / 3;
    if m >= 3 {
        let [x, y, z] = dir;
        let mut add = |mi: usize, w: f32| {
            for c in 0..3 {
                rgb[c] += w * sh_n[mi * 3 + c];
            }
        };
        add(0, -SH_C1 * y);
        add(1, SH_C1 * z);
        add(2, -SH_C1 * x);
        if m >= 8 {
            let (xx, yy, zz) = (x * x, y * y, z * z);
            add(3, SH_C2[0] * x * y);
            add(4, SH_C2[1] * y * z);
            add(5, SH_C2[2] * (2.0 * zz - xx - yy));
            add(6, SH_C2[3] * x * z);
            add(7, SH_C2[4] * (xx - yy));
            if m >= 15 {
                add(8, SH_C3[0] * y * (3.0 * xx - yy));
                add(9, SH_C3[1] * x * y * z);
                add(10, SH_C3[2] * y * (4.0 * zz - xx - yy));
                add(11, SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy));
                add(12, SH_C3[4] * x * (4.0 * zz - xx - yy));
                add(13, SH_C3[5] * z * (xx - yy));
                add(14, SH_C3[6] * x * (xx - 3.0 * yy));
            }
        }
    }
    [
        rgb[0].clamp(0.0, 1.0),
        rgb[1].clamp(0.0, 1.0),
        rgb[2].clamp(0.0, 1.0),
    ]
}

const TILE: usize = 16;
const ALPHA_MIN: f32 = 1.0 / 255.0;
const ALPHA_MAX: f32 = 0.999;
const T_MIN: f32 = 1e-4;

struct Drawable {
    mu: [f32; 2],
    /// Inverse 2x2 covariance, upper triangle.
    inv: [f32; 3],
    radius: f32,
    opacity: f32,
    color: [f32; 3],
}

/// Front-to-back alpha compositing over a global depth sort.
pub fn render(cloud: &GaussianCloud, camera: &Camera, background: [f32; 3]) -> Result<ImageBuffer> {
    camera.validate()?;
    let n = cloud.len();
    let m = cloud.sh_coeffs();
    let cam_center = camera.center();

    let projected: Vec<Option<(Projected, usize)>> = par::map_indexed(n, |i| {
        project_gaussian(
            cloud.means[i],
            cloud.rotations[i],
            cloud.log_scales[i],
            camera,
        )
        .map(|p| (p, i))
    });
    let mut visible: Vec<(Projected, usize)> = projected.into_iter().flatten().collect();
    visible.sort_by(|a, b| {
        a.0.depth
            .partial_cmp(&b.0.depth)
            .unwrap()
            .then(a.1.cmp(&b.1))
    });

    let drawables: Vec<Option<Drawable>> = par::map_indexed(visible.len(), |vi| {
        let (p, i) = visible[vi];
        let [a, b, c] = p.cov;
        let det = a * c - b * b;
        if det <= 0.0 {
            return None;
        }
        let opacity = sigmoid(cloud.opacity_logits[i]);
        if opacity < ALPHA_MIN {
            return None;
        }
        let mean = cloud.means[i];
        let mut dir = [
            mean[0] - cam_center[0],
            mean[1] - cam_center[1],
            mean[2] - cam_center[2],
        ];
        let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        if norm > 0.0 {
            for v in &mut dir {
                *v /= norm;
            }
        }
        let color = eval_sh(cloud.sh0[i], &cloud.sh_n[i * m * 3..(i + 1) * m * 3], dir);
        // 3-sigma screen radius from the larger covariance eigenvalue.
        let mid = 0.5 * (a + c);
        let lam = mid + (0.25 * (a - c) * (a - c) + b * b).sqrt();
        Some(Drawable {
            mu: p.mu,
            inv: [c / det, -b / det, a / det],
            radius: 3.0 * lam.max(0.0).sqrt(),
            opacity,
            color,
        })
    });
    let drawables: Vec<Drawable> = drawables.into_iter().flatten().collect();

    let (w, h) = (camera.width, camera.height);
    let tiles_x = w.div_ceil(TILE);
    let tiles_y = h.div_ceil(TILE);
    let mut tile_lists: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (di, d) in drawables.iter().enumerate() {
        let x0 = ((d.mu[0] - d.radius).floor().max(0.0) as usize).min(w.saturating_sub(1)) / TILE;
        let x1 = ((d.mu[0] + d.radius).ceil().max(0.0) as usize).min(w.saturating_sub(1)) / TILE;
        let y0 = ((d.mu[1] - d.radius).floor().max(0.0) as usize).min(h.saturating_sub(1)) / TILE;
        let y1 = ((d.mu[1] + d.radius).ceil().max(0.0) as usize).min(h.saturating_sub(1)) / TILE;
        if d.mu[0] + d.radius < 0.0
            || d.mu[1] + d.radius < 0.0
            || d.mu[0] - d.radius > w as f32
            || d.mu[1] - d.radius > h as f32
        {
            continue;
        }
        for ty in y0..=y1 {
            for tx in x0..=x1 {
                tile_lists[ty * tiles_x + tx].push(di as u32);
            }
        }
    }

    let tile_pixels: Vec<Vec<f32>> = par::map_indexed(tiles_x * tiles_y, |ti| {
        let (tx, ty) = (ti % tiles_x, ti / tiles_x);
        let (px0, py0) = (tx * TILE, ty * TILE);
        let (tw, th) = ((w - px0).min(TILE), (h - py0).min(TILE));
        let mut buf = vec![0.0f32; tw * th * 3];
        let list = &tile_lists[ti];
        for py in 0..th {
            for px in 0..tw {
                let (fx, fy) = ((px0 + px) as f32, (py0 + py) as f32);
                let mut color = [0.0f32; 3];
                let mut transmittance = 1.0f32;
                for &di in list {
                    let d = &drawables[di as usize];
                    let dx = fx - d.mu[0];
                    let dy = fy - d.mu[1];
                    let power =
                        -0.5 * (d.inv[0] * dx * dx + 2.0 * d.inv[1] * dx * dy + d.inv[2] * dy * dy);
                    if power < -12.0 {
                        continue;
                    }
                    let alpha = (d.opacity * power.exp()).clamp(0.0, ALPHA_MAX);
                    if alpha < ALPHA_MIN {
                        continue;
                    }
                    let weight = alpha * transmittance;
                    for c in 0..3 {
                        color[c] += d.color[c] * weight;
                    }
                    transmittance *= 1.0 - alpha;
                    if transmittance < T_MIN {
                        break;
                    }
                }
                let o = (py * tw + px) * 3;
                for c in 0..3 {
                    buf[o + c] = color[c] + background[c] * transmittance;
                }
            }
        }
        buf
    });

    let mut img = ImageBuffer::filled(w, h, [0.0; 3]);
    for ti in 0..tiles_x * tiles_y {
        let (tx, ty) = (ti % tiles_x, ti / tiles_x);
        let (px0, py0) = (tx * TILE, ty * TILE);
        let (tw, th) = ((w - px0).min(TILE), (h - py0).min(TILE));
        for py in 0..th {
            for px in 0..tw {
                let src = (py * tw + px) * 3;
                let dst = ((py0 + py) * w + px0 + px) * 3;
                img.data[dst..dst + 3].copy_from_slice(&tile_pixels[ti][src..src + 3]);
            }
        }
    }
    Ok(img)
}

/// Two-path invariant: this must equal `render(slice_at_time(..), ..)`
/// bit-exactly, which it does by construction.
pub fn render_at_time(
    dyncloud: &DynamicGaussianCloud,
    camera: &Camera,
    t: f32,
    background: [f32; 3],
) -> Result<ImageBuffer> {
    let sliced = slice_at_time(dyncloud, t)?;
    render(&sliced, camera, background)
}
