//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them all).
//! Thresholds marked "frozen" were fixed from oracle runs of this suite.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gscodec::container::{
    decode_static, decode_static_report, encode_dynamic, encode_static, encode_static_report,
    inspect, AttrRoute, ContainerHeader, EncodeConfig, Route,
};
use gscodec::dynamics::{fit_basis_pca, fit_poly_trajectory, segment_gof, TemporalOpacity};
use gscodec::entropy::fit_factorized;
use gscodec::metrics::{psnr, ssim};
use gscodec::plas::{
    encode_png, pack_planes, smoothness_cost, sort_plas, sorting_features, PlaneGrid, PlasConfig,
    SortWeights,
};
use gscodec::preprocess::{prune_by_opacity, prune_by_scale, prune_outliers_kdtree};
use gscodec::quantize::{
    dequantize_value, fit_scheme, quantize_value, QuantizationScheme, Transform,
};
use gscodec::render::{render, render_at_time, Camera};
use gscodec::splat::logit;
use gscodec::sweep::{synthetic_scene, synthetic_sequence};
use gscodec::GaussianCloud;

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

fn random_cloud(n: usize, sh_degree: u8, seed: u64) -> GaussianCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = gscodec::splat::sh_coeff_count(sh_degree);
    let mut cloud = GaussianCloud::empty(sh_degree);
    for _ in 0..n {
        cloud.means.push([
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        ]);
        let q: [f32; 4] = [
            rng.gen_range(0.1..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let norm = q.iter().map(|v| v * v).sum::<f32>().sqrt();
        cloud
            .rotations
            .push([q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm]);
        cloud.log_scales.push([
            rng.gen_range(-6.0..0.0),
            rng.gen_range(-6.0..0.0),
            rng.gen_range(-6.0..0.0),
        ]);
        cloud.opacity_logits.push(rng.gen_range(-4.0..6.0));
        cloud.sh0.push([
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ]);
        for _ in 0..m * 3 {
            cloud.sh_n.push(rng.gen_range(-0.5..0.5));
        }
    }
    cloud
}

fn fast_config() -> EncodeConfig {
    let mut c = EncodeConfig::static_gscodec();
    c.sh_n_vq_k = 16;
    c.sh_n_vq_iters = 2;
    c.plas.proposals_per_point = 4;
    c
}

#[test]
fn criterion_01_symbol_lossless_codec() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut max_rel_err = 0.0f64;
    for trial in 0..50 {
        let n = (10f64.powf(rng.gen_range(3.0..5.0))) as usize;
        let degree = (trial % 4) as u8;
        let cloud = random_cloud(n, degree, 200 + trial);
        let report = encode_static_report(&cloud, &fast_config()).unwrap();
        let (decoded, dec_syms) = decode_static_report(&report.bytes).unwrap();
        for (name, syms) in &report.symbols {
            assert_eq!(&dec_syms[name], syms, "symbols differ for {name}");
        }
        // Dequantized scalars within Q_s/2 of the coded values.
        let src = &report.encoded_cloud;
        let mut check = |name: &str, orig: &dyn Fn(usize, usize) -> f32, dec: &dyn Fn(usize, usize) -> f32, ch: usize| {
            let schemes = &report.schemes[name];
            for i in 0..src.len() {
                for c in 0..ch {
                    let half = schemes[c].step() / 2.0;
                    let err = (orig(i, c) as f64 - dec(i, c) as f64).abs();
                    // Slack covers one f32 ulp at the reconstruction point.
                    let ulp = schemes[c].v_max.abs().max(schemes[c].v_min.abs()) as f64
                        * f32::EPSILON as f64;
                    assert!(
                        err <= half + ulp,
                        "{name}[{i}][{c}]: err {err} > {half} + {ulp}"
                    );
                    if half > 0.0 {
                        max_rel_err = max_rel_err.max(err / half);
                    }
                }
            }
        };
        check("mean", &|i, c| src.means[i][c], &|i, c| decoded.means[i][c], 3);
        check("quat", &|i, c| src.rotations[i][c], &|i, c| decoded.rotations[i][c], 4);
        check("scale", &|i, c| src.log_scales[i][c], &|i, c| decoded.log_scales[i][c], 3);
        check("opa", &|i, _| src.opacity_logits[i], &|i, _| decoded.opacity_logits[i], 1);
        check("sh0", &|i, c| src.sh0[i][c], &|i, c| decoded.sh0[i][c], 3);
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "criterion 1 (symbol-lossless codec)",
        elapsed < 120.0,
        &format!("50 clouds roundtripped exactly, max |err|/(Qs/2) = {max_rel_err:.4}, {elapsed:.1}s < 120s"),
    );
}

#[test]
fn criterion_02_ans_efficiency() {
    // Large streams from three distribution shapes.
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let mut worst_ratio = 0.0f64;
    for shape in 0..3 {
        let symbols: Vec<u32> = (0..1_000_000)
            .map(|_| match shape {
                0 => rng.gen_range(0..256),
                1 => {
                    // Zipf-ish: heavy head.
                    let u: f64 = rng.gen_range(0.0f64..1.0);
                    ((u.powi(4) * 255.0) as u32).min(255)
                }
                _ => {
                    let g: f64 = rng.gen_range(0.0f64..1.0);
                    let h: f64 = rng.gen_range(0.0f64..1.0);
                    let z = (-2.0 * g.ln()).sqrt() * (std::f64::consts::TAU * h).cos();
                    ((128.0 + 20.0 * z).clamp(0.0, 255.0)) as u32
                }
            })
            .collect();
        let model = fit_factorized(&symbols, 256, 1.0).unwrap();
        let bytes = model.encode(&symbols).unwrap();
        let bound = model.rate_estimate_bits(&symbols) / 8.0 * 1.01 + 64.0;
        assert!(
            (bytes.len() as f64) <= bound,
            "shape {shape}: {} > {bound}",
            bytes.len()
        );
        worst_ratio = worst_ratio.max(bytes.len() as f64 / bound);
        let back = model.decode(&bytes, symbols.len()).unwrap();
        assert_eq!(back, symbols);
    }
    // 10^4 random (model, stream) property cases.
    for case in 0..10_000 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + case);
        let s = rng.gen_range(2..300usize);
        let len = rng.gen_range(0..120usize);
        let symbols: Vec<u32> = (0..len).map(|_| rng.gen_range(0..s as u32)).collect();
        let fit_input: Vec<u32> = if symbols.is_empty() {
            vec![0]
        } else {
            symbols.clone()
        };
        let model = fit_factorized(&fit_input, s, 1.0).unwrap();
        let bytes = model.encode(&symbols).unwrap();
        assert_eq!(model.decode(&bytes, len).unwrap(), symbols, "case {case}");
    }
    verdict(
        "criterion 2 (ANS efficiency)",
        true,
        &format!("1e6-symbol streams within bound (worst bytes/bound = {worst_ratio:.4}); 1e4 roundtrips exact"),
    );
}

#[test]
fn criterion_03_entropy_constraint_compactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let n = 200_000;
    let uniform: Vec<f32> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let compact: Vec<f32> = (0..n)
        .map(|_| {
            let g: f64 = rng.gen_range(0.0f64..1.0);
            let h: f64 = rng.gen_range(0.0f64..1.0);
            let z = (-2.0 * g.ln()).sqrt() * (std::f64::consts::TAU * h).cos();
            (0.5 + z / 30.0).clamp(0.0, 1.0) as f32
        })
        .collect();
    // Both sources share one scheme over the full [0, 1] range; the gap
    // measured is purely distributional.
    let scheme = QuantizationScheme {
        attribute: "attr".into(),
        transform: Transform::Identity,
        bits: 8,
        v_min: 0.0,
        v_max: 1.0,
    };
    let code = |values: &[f32]| -> usize {
        let symbols: Vec<u32> = values
            .iter()
            .map(|&v| quantize_value(v, &scheme).unwrap())
            .collect();
        let model = fit_factorized(&symbols, 256, 1.0).unwrap();
        model.encode(&symbols).unwrap().len()
    };
    let b_uniform = code(&uniform);
    let b_compact = code(&compact);
    let reduction = 1.0 - b_compact as f64 / b_uniform as f64;
    // Frozen threshold: oracle run measures ~0.36 reduction for sigma =
    // range/30; the criterion requires >= 0.30.
    verdict(
        "criterion 3 (compact distribution rate gap)",
        reduction >= 0.30,
        &format!("compact {b_compact} B vs uniform {b_uniform} B: {:.1}% lower", reduction * 100.0),
    );
}

#[test]
fn criterion_04_plas_effectiveness() {
    // Spatially coherent cloud: tight clusters with attributes that vary
    // smoothly with position, as in captured scenes.
    let cloud = {
        let mut rng = ChaCha8Rng::seed_from_u64(500);
        let centers: Vec<[f32; 3]> = (0..40)
            .map(|_| {
                [
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                ]
            })
            .collect();
        let mut c = GaussianCloud::empty(0);
        for _ in 0..10_000 {
            let center = centers[rng.gen_range(0..centers.len())];
            let mean = [
                center[0] + rng.gen_range(-0.08..0.08),
                center[1] + rng.gen_range(-0.08..0.08),
                center[2] + rng.gen_range(-0.08..0.08),
            ];
            c.means.push(mean);
            c.rotations.push([1.0, 0.0, 0.0, 0.0]);
            c.log_scales.push([-4.0; 3]);
            c.opacity_logits.push(2.0);
            c.sh0.push([0.3 * mean[0], 0.3 * mean[1], 0.3 * mean[2]]);
        }
        c
    };
    let features = sorting_features(&cloud, &SortWeights::default());
    let n = cloud.len();
    let dim = features.len() / n;
    let grid = PlaneGrid::square_for(n);
    let sorted = sort_plas(
        &features,
        n,
        dim,
        grid,
        &PlasConfig {
            proposals_per_point: 16,
            seed: 0,
        },
    )
    .unwrap();
    // Random placement baseline (the sorter's own seeded start).
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let random = PlaneGrid {
        w: sorted.w,
        h: sorted.h,
        perm,
    };
    let cost_sorted = smoothness_cost(&sorted, &features, dim);
    let cost_random = smoothness_cost(&random, &features, dim);

    let mut means = Vec::with_capacity(n * 3);
    for v in &cloud.means {
        means.extend_from_slice(v);
    }
    let mut sh0 = Vec::with_capacity(n * 3);
    for v in &cloud.sh0 {
        sh0.extend_from_slice(v);
    }
    let png_size = |grid: &PlaneGrid| -> usize {
        let mut total = 0;
        // 8-bit planes: at 16 bits the low-order planes are quantization
        // noise and mask the spatial-coherence effect being measured.
        for (name, values, bits) in [("mean", &means, 8u8), ("sh0", &sh0, 8)] {
            let scheme = fit_scheme(name, values, Transform::Identity, bits, 0.0).unwrap();
            let symbols: Vec<u32> = values
                .iter()
                .map(|&v| quantize_value(v, &scheme).unwrap())
                .collect();
            let planes = pack_planes(name, &symbols, 3, bits, grid).unwrap();
            total += planes
                .iter()
                .map(|p| encode_png(p).unwrap().len())
                .sum::<usize>();
        }
        total
    };
    let bytes_sorted = png_size(&sorted);
    let bytes_random = png_size(&random);
    let byte_ratio = bytes_sorted as f64 / bytes_random as f64;
    let cost_ratio = cost_sorted / cost_random;
    // Frozen thresholds (oracle run: byte ratio ~0.5, cost ratio ~0.2).
    verdict(
        "criterion 4 (PLAS effectiveness)",
        byte_ratio <= 0.7 && cost_ratio <= 0.5,
        &format!("PNG {bytes_sorted}/{bytes_random} B = {byte_ratio:.3} (<= 0.7); cost ratio {cost_ratio:.3} (<= 0.5)"),
    );
}

#[test]
fn criterion_05_pruning_soundness() {
    // Zero-opacity points must not affect the render.
    let mut cloud = synthetic_scene(800, 0, 600);
    let mut rng = ChaCha8Rng::seed_from_u64(601);
    for _ in 0..200 {
        let i = rng.gen_range(0..800);
        cloud.means.push(cloud.means[i]);
        cloud.rotations.push(cloud.rotations[i]);
        cloud.log_scales.push(cloud.log_scales[i]);
        cloud.opacity_logits.push(logit(1e-5));
        cloud.sh0.push(cloud.sh0[i]);
    }
    let camera = Camera::looking_forward([0.0, 0.0, -10.0], 80.0, 128, 128);
    let full = render(&cloud, &camera, [0.1; 3]).unwrap();
    let (pruned, _) = prune_by_opacity(&cloud, 0.001).unwrap();
    assert_eq!(pruned.len(), 800);
    let pruned_img = render(&pruned, &camera, [0.1; 3]).unwrap();
    let renders_identical = full == pruned_img;

    // Exhaustive kept-set equality against brute-force predicates, N = 5000.
    let big = random_cloud(5000, 0, 602);
    let (_, rep_o) = prune_by_opacity(&big, 0.3).unwrap();
    let brute_o: Vec<usize> = (0..big.len())
        .filter(|&i| gscodec::splat::sigmoid(big.opacity_logits[i]) < 0.3)
        .collect();
    let (_, rep_s) = prune_by_scale(&big, 0.02, 0.5).unwrap();
    let brute_s: Vec<usize> = (0..big.len())
        .filter(|&i| {
            let s = big.log_scales[i].iter().copied().fold(f32::NEG_INFINITY, f32::max).exp();
            !(0.02..=0.5).contains(&s)
        })
        .collect();
    let (_, rep_k) = prune_outliers_kdtree(&big, 10, 2.0).unwrap();
    let brute_k = {
        let n = big.len();
        let dists: Vec<f64> = (0..n)
            .map(|i| {
                let mut d: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        (0..3)
                            .map(|a| (big.means[i][a] as f64 - big.means[j][a] as f64).powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect();
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                d[..10].iter().sum::<f64>() / 10.0
            })
            .collect();
        let mean = dists.iter().sum::<f64>() / n as f64;
        let std = (dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        (0..n).filter(|&i| dists[i] > mean + 2.0 * std).collect::<Vec<usize>>()
    };
    let sets_match =
        rep_o.indices_removed == brute_o && rep_s.indices_removed == brute_s && rep_k.indices_removed == brute_k;
    verdict(
        "criterion 5 (pruning soundness)",
        renders_identical && sets_match,
        &format!(
            "zero-opacity prune render identical: {renders_identical}; kept-sets equal brute force (removed {}/{}/{} pts)",
            brute_o.len(),
            brute_s.len(),
            brute_k.len()
        ),
    );
}

#[test]
fn criterion_06_quantization_bound_and_trend() {
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let mut worst = 0.0f64;
    for (lo, hi, bits) in [(-5.0f32, 5.0f32, 16u8), (-6.0, 0.0, 8), (-4.0, 6.0, 8), (0.0, 1.0, 6)] {
        let scheme = QuantizationScheme {
            attribute: "attr".into(),
            transform: Transform::Identity,
            bits,
            v_min: lo,
            v_max: hi,
        };
        let half = scheme.step() / 2.0;
        for _ in 0..1_000_000 {
            let v = rng.gen_range(lo..hi);
            let s = quantize_value(v, &scheme).unwrap();
            let d = dequantize_value(s, &scheme).unwrap();
            let err = (v as f64 - d as f64).abs();
            assert!(err <= half * 1.000_01, "{bits}-bit: {err} > {half}");
            worst = worst.max(err / half);
        }
    }
    let cloud = random_cloud(4000, 0, 701);
    let cfg8 = fast_config();
    let mut cfg6 = fast_config();
    for r in [
        &mut cfg6.rotations,
        &mut cfg6.log_scales,
        &mut cfg6.opacity,
        &mut cfg6.sh0,
    ] {
        *r = AttrRoute {
            route: Route::PngPlane,
            bits: 6,
        };
    }
    let b8 = encode_static(&cloud, &cfg8).unwrap().len();
    let b6 = encode_static(&cloud, &cfg6).unwrap().len();
    verdict(
        "criterion 6 (quantization bound and bit-width trend)",
        b6 < b8,
        &format!("4e6 samples within Qs/2 (worst {worst:.4}); 6-bit {b6} B < 8-bit {b8} B. QAT deltas (0.24/0.87 dB) require training and are out of scope"),
    );
}

#[test]
fn criterion_07_dynamic_correctness() {
    // Degree-3 trajectory recovery: exact interpolation to 1e-9 relative.
    let mut rng = ChaCha8Rng::seed_from_u64(800);
    let mut worst_traj = 0.0f64;
    for _ in 0..50 {
        let coeffs: Vec<[f64; 3]> = (0..4)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect();
        let samples: Vec<(f64, [f64; 3])> = (0..9)
            .map(|i| {
                let t = i as f64 / 8.0;
                let dt = t - 0.5;
                let mut p = [0.0f64; 3];
                for (k, c) in coeffs.iter().enumerate() {
                    for a in 0..3 {
                        p[a] += c[a] * dt.powi(k as i32);
                    }
                }
                (t, p)
            })
            .collect();
        let fit = fit_poly_trajectory(&samples, 3, 0.5).unwrap();
        for (k, c) in coeffs.iter().enumerate() {
            for a in 0..3 {
                let rel = (fit[k][a] - c[a]).abs() / c[a].abs().max(1e-6);
                worst_traj = worst_traj.max(rel);
            }
        }
    }

    // PCA: reconstruction residual recomputed from the factors must match the
    // Eckart-Young optimum (sum of squared discarded singular values).
    let t_count = 24;
    let trajectories: Vec<Vec<[f64; 3]>> = (0..40)
        .map(|_| {
            (0..t_count)
                .map(|_| {
                    [
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ]
                })
                .collect()
        })
        .collect();
    let k = 5;
    let fit = fit_basis_pca(&trajectories, k).unwrap();
    let tail: f64 = fit.singular_values.iter().skip(k).map(|s| s * s).sum();
    let mut recon_residual = 0.0f64;
    for (i, tr) in trajectories.iter().enumerate() {
        for (j, p) in tr.iter().enumerate() {
            for a in 0..3 {
                let mut v = fit.point_means[i][a];
                for b in 0..k {
                    v += fit.coeffs[(i * k + b) * 3 + a] * fit.basis[b][j];
                }
                recon_residual += (p[a] - v) * (p[a] - v);
            }
        }
    }
    let pca_rel = (recon_residual - tail).abs() / tail.max(1e-12);

    // Lifespan endpoints are exact kernel roots.
    let (mu, s, base, tau) = (0.4f32, 0.15f32, 0.9f32, 0.01f32);
    let top = TemporalOpacity {
        center: vec![mu],
        scale: vec![s],
    };
    let (t0, t1) = top.lifespan(0, base, tau).unwrap().unwrap();
    let root = |t: f64| {
        base as f64 * (-(t - mu as f64).powi(2) / (2.0 * (s as f64).powi(2))).exp() - tau as f64
    };
    let exact_t1 = mu as f64 + s as f64 * (2.0 * (base as f64 / tau as f64).ln()).sqrt();
    let exact_t0 = mu as f64 - s as f64 * (2.0 * (base as f64 / tau as f64).ln()).sqrt();
    let root_err = root(exact_t0).abs().max(root(exact_t1).abs());
    let endpoint_err = ((t0 as f64 - exact_t0).abs()).max((t1 as f64 - exact_t1).abs());

    // Two-path render equality.
    let segments = segment_gof(10, 10).unwrap();
    let clouds = synthetic_sequence(300, 0, 801, &segments, 10, 0.5);
    let camera = Camera::looking_forward([0.0, 0.0, -10.0], 60.0, 96, 96);
    let mut two_path_ok = true;
    for &t in &[0.0f32, 0.37, 0.81, 1.0] {
        let direct = render_at_time(&clouds[0], &camera, t, [0.0; 3]).unwrap();
        let sliced = render(
            &gscodec::dynamics::slice_at_time(&clouds[0], t).unwrap(),
            &camera,
            [0.0; 3],
        )
        .unwrap();
        two_path_ok &= direct == sliced;
    }

    let gof6 = segment_gof(300, 50).unwrap().len();

    let pass = worst_traj < 1e-9
        && pca_rel < 1e-8
        && root_err < 1e-12
        && endpoint_err < 1e-6
        && two_path_ok
        && gof6 == 6;
    verdict(
        "criterion 7 (dynamic correctness)",
        pass,
        &format!("poly fit rel {worst_traj:.2e} (<1e-9); PCA residual rel {pca_rel:.2e} (<1e-8); kernel root err {root_err:.2e} (<1e-12); two-path exact: {two_path_ok}; GOF(300,50) = {gof6} segments"),
    );
}

#[test]
fn criterion_08_gof_tradeoff_direction() {
    // 120-frame sequence, 80% static points.
    let seg_one = segment_gof(120, 120).unwrap();
    let one = synthetic_sequence(1500, 0, 900, &seg_one, 120, 0.8);
    let bytes_one = encode_dynamic(&one, &seg_one, &fast_config()).unwrap().len();
    let seg_four = segment_gof(120, 30).unwrap();
    let four = synthetic_sequence(1500, 0, 900, &seg_four, 120, 0.8);
    let bytes_four = encode_dynamic(&four, &seg_four, &fast_config()).unwrap().len();
    verdict(
        "criterion 8 (GOF trade-off direction)",
        bytes_one < bytes_four,
        &format!("gof_len=120: {bytes_one} B < sum of gof_len=30: {bytes_four} B"),
    );
}

#[test]
fn criterion_09_inspect_reconciliation() {
    let cloud = random_cloud(3000, 2, 1000);
    let bytes = encode_static(&cloud, &fast_config()).unwrap();
    let report = inspect(&bytes).unwrap();
    let (_, payload_start) = ContainerHeader::parse(&bytes).unwrap();
    let exact = report.rows.iter().map(|r| r.bytes).sum::<u64>() == report.total_bytes
        && report.total_bytes as usize == bytes.len() - payload_start;
    let pct: f64 = report.rows.iter().map(|r| r.percent).sum();
    let labels: Vec<&str> = report.rows.iter().map(|r| r.label.as_str()).collect();
    let schema_ok = labels == ["Mean", "Quat.", "Scale", "Opa.", "SH 0", "SH N"];
    verdict(
        "criterion 9 (inspect reconciliation)",
        exact && (pct - 100.0).abs() <= 0.1 && schema_ok,
        &format!("sizes sum exactly; percentages sum to {pct:.3}; rows {labels:?} + Total"),
    );
}

#[test]
fn criterion_10_end_to_end_synthetic_rd() {
    let start = Instant::now();
    let cloud = synthetic_scene(50_000, 0, 1100);
    let config = EncodeConfig::static_gscodec();
    let bytes = encode_static(&cloud, &config).unwrap();
    let decoded = decode_static(&bytes).unwrap();
    let camera = Camera::looking_forward([0.0, 0.0, -12.0], 200.0, 256, 256);
    let reference = render(&cloud, &camera, [0.0; 3]).unwrap();
    let test = render(&decoded, &camera, [0.0; 3]).unwrap();
    let p = psnr(&reference, &test).unwrap();
    let s = ssim(&reference, &test).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    // Frozen thresholds from the oracle run of this scene/preset
    // (measured ~59 dB / ~0.9998): require PSNR >= 50 dB, SSIM >= 0.995.
    verdict(
        "criterion 10 (end-to-end synthetic RD)",
        p >= 50.0 && s >= 0.995 && elapsed < 300.0,
        &format!("{} B, PSNR {p:.2} dB (>= 50), SSIM {s:.5} (>= 0.995), {elapsed:.1}s < 300s", bytes.len()),
    );
}

#[test]
fn criterion_11_determinism() {
    let cloud = synthetic_scene(5_000, 1, 1200);
    let config = fast_config();
    let camera = Camera::looking_forward([0.0, 0.0, -12.0], 120.0, 128, 128);

    let run = || {
        let bytes = encode_static(&cloud, &config).unwrap();
        let img = render(&decode_static(&bytes).unwrap(), &camera, [0.0; 3]).unwrap();
        (bytes, img)
    };
    let (bytes_a, img_a) = run();
    let (bytes_b, img_b) = run();

    #[cfg(feature = "parallel")]
    let (bytes_c, img_c) = {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        pool.install(run)
    };
    #[cfg(not(feature = "parallel"))]
    let (bytes_c, img_c) = run();

    let pass = bytes_a == bytes_b && bytes_a == bytes_c && img_a == img_b && img_a == img_c;
    verdict(
        "criterion 11 (determinism)",
        pass,
        &format!(
            "container {} B and {}x{} render byte-identical across runs and thread counts",
            bytes_a.len(),
            img_a.width,
            img_a.height
        ),
    );
}
