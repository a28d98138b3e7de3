use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use gscodec::container::{
    decode_dynamic_gof, decode_static, encode_dynamic, encode_static, gof_table, inspect,
    AttrRoute, ContainerHeader, EncodeConfig, Flavor, Route,
};
use gscodec::dynamics::{segment_gof, MotionModel, TemporalOpacity};
use gscodec::metrics::{psnr, ssim};
use gscodec::ply::{load_ply, save_ply};
use gscodec::render::{render, render_at_time, Camera, ImageBuffer};
use gscodec::sweep::{rd_sweep_static, records_to_csv, SweepEntry};
use gscodec::{DynamicGaussianCloud, GaussianCloud};

#[derive(Parser)]
#[command(name = "gscodec", about = "Gaussian-splat compression codec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InspectFormat {
    Csv,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a PLY splat cloud into a .gsc container.
    Encode {
        /// Pipeline preset: static-gscodec or dynamic-gscodec.
        #[arg(long, default_value = "static-gscodec")]
        preset: String,
        /// Key=value overrides, one per line.
        #[arg(long)]
        config: Option<PathBuf>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Decompress a .gsc container back to PLY.
    Decode { input: PathBuf, output: PathBuf },
    /// Per-attribute size breakdown of a container.
    Inspect {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = InspectFormat::Table)]
        format: InspectFormat,
    },
    /// Render a container or PLY from a camera.
    Render {
        input: PathBuf,
        /// Camera description (JSON, fields of the Camera type).
        #[arg(long)]
        camera: PathBuf,
        /// Normalized timestamp for dynamic containers.
        #[arg(long, default_value_t = 0.0)]
        time: f32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two directories of PNG images (paired by file name).
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Generate a clustered synthetic scene as PLY (for demos and sweeps).
    Synth {
        #[arg(long, default_value_t = 50_000)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        sh_degree: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        output: PathBuf,
    },
    /// Rate-distortion sweep over a set of encoder configs.
    RdSweep {
        input: PathBuf,
        /// Config list: `id: key=value key=value` per line.
        #[arg(long)]
        configs: PathBuf,
        #[arg(long)]
        camera: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Encode {
            preset,
            config,
            input,
            output,
        } => cmd_encode(&preset, config.as_deref(), &input, &output),
        Command::Decode { input, output } => cmd_decode(&input, &output),
        Command::Inspect { input, format } => cmd_inspect(&input, format),
        Command::Render {
            input,
            camera,
            time,
            out,
        } => cmd_render(&input, &camera, time, &out),
        Command::Eval {
            reference,
            test,
            format,
        } => cmd_eval(&reference, &test, &format),
        Command::Synth {
            points,
            sh_degree,
            seed,
            output,
        } => {
            let cloud = gscodec::sweep::synthetic_scene(points, sh_degree, seed);
            fs::write(&output, save_ply(&cloud)?)?;
            eprintln!("wrote {} points to {}", cloud.len(), output.display());
            Ok(())
        }
        Command::RdSweep {
            input,
            configs,
            camera,
            out,
        } => cmd_rd_sweep(&input, &configs, camera.as_deref(), &out),
    }
}

/// Apply `key=value` overrides (one per line, `#` comments) to a preset.
fn apply_overrides(config: &mut EncodeConfig, text: &str) -> Result<()> {
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key=value", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let routes: [(&str, &mut AttrRoute); 5] = [
            ("means", &mut config.means),
            ("rotations", &mut config.rotations),
            ("log_scales", &mut config.log_scales),
            ("opacity", &mut config.opacity),
            ("sh0", &mut config.sh0),
        ];
        let mut matched_route = false;
        for (name, route) in routes {
            if let Some(field) = key.strip_prefix(&format!("{name}.")) {
                match field {
                    "bits" => route.bits = value.parse()?,
                    "route" => {
                        route.route = match value {
                            "png-plane" => Route::PngPlane,
                            "ans" => Route::Ans,
                            other => bail!("unknown route `{other}`"),
                        }
                    }
                    other => bail!("unknown route field `{other}`"),
                }
                matched_route = true;
                break;
            }
        }
        if matched_route {
            continue;
        }
        match key {
            "prune_opacity" => config.prune_opacity = value.parse()?,
            "sh_n_vq_k" => config.sh_n_vq_k = value.parse()?,
            "sh_n_vq_iters" => config.sh_n_vq_iters = value.parse()?,
            "sh_mask_eps" => config.sh_mask_eps = value.parse()?,
            "motion_bits" => config.motion_bits = value.parse()?,
            "temporal_bits" => config.temporal_bits = value.parse()?,
            "clip_pct" => config.clip_pct = value.parse()?,
            "plas_proposals" => config.plas.proposals_per_point = value.parse()?,
            "gof_len" => config.gof_len = value.parse()?,
            "seed" => {
                config.seed = value.parse()?;
                config.plas.seed = config.seed;
            }
            other => bail!("unknown config key `{other}`"),
        }
    }
    Ok(())
}

fn load_cloud(path: &Path) -> Result<GaussianCloud> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(load_ply(&bytes)?)
}

fn cmd_encode(preset: &str, config: Option<&Path>, input: &Path, output: &Path) -> Result<()> {
    let mut cfg = EncodeConfig::preset(preset)
        .with_context(|| format!("unknown preset `{preset}`"))?;
    if let Some(path) = config {
        let text = fs::read_to_string(path)?;
        apply_overrides(&mut cfg, &text)?;
    }
    let cloud = load_cloud(input)?;
    let bytes = if preset == "dynamic-gscodec" {
        // A single PLY becomes a one-GOF still sequence over gof_len frames.
        let n = cloud.len();
        let dyncloud = DynamicGaussianCloud {
            motion: MotionModel::static_poly(&cloud, 1, 0),
            temporal_opacity: TemporalOpacity::always_on(n),
            base: cloud,
            time_range: (0.0, 1.0),
            gof_index: 0,
        };
        let segments = segment_gof(cfg.gof_len, cfg.gof_len)?;
        encode_dynamic(&[dyncloud], &segments, &cfg)?
    } else {
        encode_static(&cloud, &cfg)?
    };
    fs::write(output, &bytes)?;
    eprintln!(
        "encoded {} -> {} ({} bytes)",
        input.display(),
        output.display(),
        bytes.len()
    );
    Ok(())
}

fn cmd_decode(input: &Path, output: &Path) -> Result<()> {
    let bytes = fs::read(input)?;
    let (header, _) = ContainerHeader::parse(&bytes)?;
    let cloud = match header.flavor {
        Flavor::Static => decode_static(&bytes)?,
        Flavor::Dynamic => decode_dynamic_gof(&bytes, header.gofs[0].index as usize)?.base,
    };
    fs::write(output, save_ply(&cloud)?)?;
    eprintln!("decoded {} points to {}", cloud.len(), output.display());
    Ok(())
}

fn cmd_inspect(input: &Path, format: InspectFormat) -> Result<()> {
    let report = inspect(&fs::read(input)?)?;
    match format {
        InspectFormat::Csv => print!("{}", report.to_csv()),
        InspectFormat::Table => print!("{}", report.to_table()),
    }
    Ok(())
}

#[derive(Deserialize)]
struct CameraJson {
    fx: f32,
    fy: f32,
    cx: f32,
    cy: f32,
    width: usize,
    height: usize,
    extrinsics: [[f32; 4]; 3],
    near: f32,
    far: f32,
}

fn load_camera(path: &Path) -> Result<Camera> {
    let j: CameraJson = serde_json::from_str(&fs::read_to_string(path)?)
        .with_context(|| format!("parsing camera {}", path.display()))?;
    let camera = Camera {
        fx: j.fx,
        fy: j.fy,
        cx: j.cx,
        cy: j.cy,
        width: j.width,
        height: j.height,
        extrinsics: j.extrinsics,
        near: j.near,
        far: j.far,
    };
    camera.validate()?;
    Ok(camera)
}

fn write_png(img: &ImageBuffer, path: &Path) -> Result<()> {
    image::save_buffer(
        path,
        &img.to_rgb8(),
        img.width as u32,
        img.height as u32,
        image::ExtendedColorType::Rgb8,
    )?;
    Ok(())
}

fn cmd_render(input: &Path, camera_path: &Path, time: f32, out: &Path) -> Result<()> {
    let camera = load_camera(camera_path)?;
    let background = [0.0f32; 3];
    let img = if input.extension().is_some_and(|e| e == "ply") {
        render(&load_cloud(input)?, &camera, background)?
    } else {
        let bytes = fs::read(input)?;
        let (header, _) = ContainerHeader::parse(&bytes)?;
        match header.flavor {
            Flavor::Static => render(&decode_static(&bytes)?, &camera, background)?,
            Flavor::Dynamic => {
                // Pick the GOF covering the timestamp and render in its
                // local normalized time.
                let table = gof_table(&bytes)?;
                let mut chosen = None;
                for seg in &table {
                    let d = decode_dynamic_gof(&bytes, seg.index)?;
                    if time >= d.time_range.0 && time <= d.time_range.1 {
                        chosen = Some(d);
                        break;
                    }
                }
                let d = chosen.with_context(|| format!("no GOF covers t={time}"))?;
                let local = (time - d.time_range.0) / (d.time_range.1 - d.time_range.0);
                render_at_time(&d, &camera, local, background)?
            }
        }
    };
    write_png(&img, out)?;
    eprintln!("rendered {} to {}", input.display(), out.display());
    Ok(())
}

fn load_png_image(path: &Path) -> Result<ImageBuffer> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(ImageBuffer {
        width: w,
        height: h,
        data: img.into_raw().iter().map(|&v| v as f32 / 255.0).collect(),
    })
}

fn cmd_eval(reference: &Path, test: &Path, format: &str) -> Result<()> {
    if format != "csv" {
        bail!("unsupported eval format `{format}`");
    }
    let mut pairs: BTreeMap<String, PathBuf> = BTreeMap::new();
    for entry in fs::read_dir(reference)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "png") {
            pairs.insert(
                path.file_name().unwrap().to_string_lossy().into_owned(),
                path,
            );
        }
    }
    if pairs.is_empty() {
        bail!("no PNG files in {}", reference.display());
    }
    println!("image,psnr,ssim");
    let (mut sum_p, mut sum_s, mut count) = (0.0, 0.0, 0usize);
    for (name, ref_path) in &pairs {
        let test_path = test.join(name);
        if !test_path.exists() {
            bail!("missing test image {}", test_path.display());
        }
        let a = load_png_image(ref_path)?;
        let b = load_png_image(&test_path)?;
        let p = psnr(&a, &b)?;
        let s = ssim(&a, &b)?;
        println!("{name},{p:.3},{s:.5}");
        sum_p += p;
        sum_s += s;
        count += 1;
    }
    println!(
        "mean,{:.3},{:.5}",
        sum_p / count as f64,
        sum_s / count as f64
    );
    // Codec-relative metrics: these compare decoded renders against
    // uncompressed renders, not against ground-truth photographs.
    Ok(())
}

fn default_cameras(cloud: &GaussianCloud) -> Vec<Camera> {
    let (lo, hi) = cloud.aabb();
    let center = [
        (lo[0] + hi[0]) / 2.0,
        (lo[1] + hi[1]) / 2.0,
        (lo[2] + hi[2]) / 2.0,
    ];
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0f32, f32::max);
    let dist = extent * 1.5 + 1.0;
    vec![Camera::looking_forward(
        [center[0], center[1], center[2] - dist],
        256.0,
        256,
        256,
    )]
}

fn cmd_rd_sweep(
    input: &Path,
    configs: &Path,
    camera: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let cloud = load_cloud(input)?;
    let cameras = match camera {
        Some(path) => vec![load_camera(path)?],
        None => default_cameras(&cloud),
    };
    let mut entries = Vec::new();
    for (lineno, line) in fs::read_to_string(configs)?.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (id, rest) = line
            .split_once(':')
            .with_context(|| format!("line {}: expected `id: overrides`", lineno + 1))?;
        let mut config = EncodeConfig::static_gscodec();
        let overrides = rest.split_whitespace().collect::<Vec<_>>().join("\n");
        apply_overrides(&mut config, &overrides)?;
        entries.push(SweepEntry {
            id: id.trim().to_string(),
            config,
        });
    }
    if entries.is_empty() {
        bail!("no sweep configs in {}", configs.display());
    }
    let records = rd_sweep_static(&cloud, &cameras, &entries, [0.0; 3])?;
    fs::write(out, records_to_csv(&records))?;
    eprintln!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}
