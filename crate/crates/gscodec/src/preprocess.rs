//! Test-time pruning (opacity / scale thresholds, kd-tree statistical
//! outliers) and post-hoc attribute masks.
//!
//! All pruning is predicate-based, so results are independent of thread
//! count and the kept set always equals a brute-force filter.

use crate::error::{Error, Result};
use crate::par;
use crate::splat::{sigmoid, DynamicGaussianCloud, GaussianCloud, FLAG_DIFFUSE_ONLY};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub removed_by_opacity: usize,
    pub removed_by_scale: usize,
    pub removed_by_outlier: usize,
    pub kept: usize,
    /// Sorted indices (into the input cloud) of removed points.
    pub indices_removed: Vec<usize>,
}

fn prune_with<F>(cloud: &GaussianCloud, keep_pred: F) -> (GaussianCloud, Vec<usize>, Vec<usize>)
where
    F: Fn(usize) -> bool,
{
    let mut keep = Vec::new();
    let mut removed = Vec::new();
    for i in 0..cloud.len() {
        if keep_pred(i) {
            keep.push(i);
        } else {
            removed.push(i);
        }
    }
    (cloud.select(&keep), keep, removed)
}

/// Remove points whose sigmoid opacity falls below `tau`.
pub fn prune_by_opacity(
    cloud: &GaussianCloud,
    tau: f32,
) -> Result<(GaussianCloud, PruneReport)> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!(
            "opacity threshold {tau} outside [0, 1)"
        )));
    }
    let (out, keep, removed) = prune_with(cloud, |i| sigmoid(cloud.opacity_logits[i]) >= tau);
    Ok((
        out,
        PruneReport {
            removed_by_opacity: removed.len(),
            kept: keep.len(),
            indices_removed: removed,
            ..Default::default()
        },
    ))
}

/// Keep points whose largest per-axis scale lies in `[s_min, s_max]`
/// (scene units; the cloud stores log scales).
pub fn prune_by_scale(
    cloud: &GaussianCloud,
    s_min: f32,
    s_max: f32,
) -> Result<(GaussianCloud, PruneReport)> {
    if !(s_min > 0.0 && s_min < s_max) {
        return Err(Error::InvalidArgument(format!(
            "scale bounds [{s_min}, {s_max}] invalid"
        )));
    }
    let (out, keep, removed) = prune_with(cloud, |i| {
        let max_scale = cloud.log_scales[i]
            .iter()
            .copied()
            .fold(f32::NEG_INFINITY, f32::max)
            .exp();
        max_scale >= s_min && max_scale <= s_max
    });
    Ok((
        out,
        PruneReport {
            removed_by_scale: removed.len(),
            kept: keep.len(),
            indices_removed: removed,
            ..Default::default()
        },
    ))
}

/// Statistical outlier removal: compute each point's mean distance to its
/// `k` nearest neighbors and remove points strictly above
/// `mean(d) + m * std(d)`.
pub fn prune_outliers_kdtree(
    cloud: &GaussianCloud,
    k: usize,
    m: f32,
) -> Result<(GaussianCloud, PruneReport)> {
    let n = cloud.len();
    if k < 1 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if n <= k {
        return Err(Error::InvalidArgument(format!(
            "need more than k={k} points, have {n}"
        )));
    }
    let tree = KdTree::build(&cloud.means);
    let mean_dists: Vec<f64> = par::map_indexed(n, |i| {
        // k+1 nearest includes the query point itself; drop it.
        let neighbors = tree.knn(&cloud.means[i], k + 1);
        let sum: f64 = neighbors
            .iter()
            .filter(|&&(idx, _)| idx != i)
            .take(k)
            .map(|&(_, d2)| d2.sqrt())
            .sum();
        sum / k as f64
    });
    let mean: f64 = mean_dists.iter().sum::<f64>() / n as f64;
    let var: f64 = mean_dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
    let threshold = mean + m as f64 * var.sqrt();
    let (out, keep, removed) = prune_with(cloud, |i| mean_dists[i] <= threshold);
    Ok((
        out,
        PruneReport {
            removed_by_outlier: removed.len(),
            kept: keep.len(),
            indices_removed: removed,
            ..Default::default()
        },
    ))
}

/// Binary per-point mask over one attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeMask {
    pub attribute: String,
    pub bits: Vec<bool>,
}

impl AttributeMask {
    pub fn ratio(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.bits.iter().filter(|&&b| b).count() as f64 / self.bits.len() as f64
        }
    }
}

/// Mark points whose higher-order SH energy `||shN||^2` reaches `eps`.
pub fn derive_sh_mask(cloud: &GaussianCloud, eps: f32) -> Result<AttributeMask> {
    let m = cloud.sh_coeffs();
    if m == 0 {
        return Err(Error::InvalidArgument(
            "cloud has no higher-order SH coefficients".into(),
        ));
    }
    let bits = (0..cloud.len())
        .map(|i| {
            let energy: f64 = cloud.sh_n[i * m * 3..(i + 1) * m * 3]
                .iter()
                .map(|&v| v as f64 * v as f64)
                .sum();
            energy >= eps as f64
        })
        .collect();
    Ok(AttributeMask {
        attribute: "sh_n".into(),
        bits,
    })
}

/// Mark points as dynamic when their displacement from the time-center
/// position reaches `eps` at any of `samples` uniformly spaced times.
pub fn derive_static_mask(
    dyncloud: &DynamicGaussianCloud,
    eps: f32,
    samples: usize,
) -> Result<AttributeMask> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 time samples".into()));
    }
    let n = dyncloud.base.len();
    let bits = par::map_indexed(n, |i| {
        let center = dyncloud.motion.position(i, 0.5, dyncloud.base.means[i]);
        (0..samples).any(|j| {
            let t = j as f32 / (samples - 1) as f32;
            let p = dyncloud.motion.position(i, t, dyncloud.base.means[i]);
            let d2: f32 = (0..3).map(|a| (p[a] - center[a]).powi(2)).sum();
            d2.sqrt() >= eps
        })
    });
    Ok(AttributeMask {
        attribute: "motion".into(),
        bits,
    })
}

/// Zero the target attribute for masked-out points and flag them, so the
/// container can store only the active entries plus the bitmask.
pub fn apply_mask(cloud: &GaussianCloud, mask: &AttributeMask) -> Result<GaussianCloud> {
    if mask.bits.len() != cloud.len() {
        return Err(Error::DimensionMismatch(format!(
            "mask length {} != {}",
            mask.bits.len(),
            cloud.len()
        )));
    }
    let mut out = cloud.clone();
    match mask.attribute.as_str() {
        "sh_n" => {
            let m = out.sh_coeffs();
            let mut flags = out.flags.take().unwrap_or_else(|| vec![0u8; out.len()]);
            for i in 0..out.len() {
                if !mask.bits[i] {
                    out.sh_n[i * m * 3..(i + 1) * m * 3].fill(0.0);
                    flags[i] |= FLAG_DIFFUSE_ONLY;
                }
            }
            out.flags = Some(flags);
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "apply_mask: unsupported target attribute `{other}`"
            )))
        }
    }
    Ok(out)
}

/// Static median-split kd-tree over 3D points.
pub struct KdTree {
    // Node layout: implicit binary tree over `order`; node stores the
    // splitting point index and axis.
    points: Vec<[f32; 3]>,
    nodes: Vec<KdNode>,
    root: Option<usize>,
}

struct KdNode {
    point: usize,
    axis: u8,
    left: Option<usize>,
    right: Option<usize>,
}

impl KdTree {
    pub fn build(points: &[[f32; 3]]) -> KdTree {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(points, &mut order[..], &mut nodes);
        KdTree {
            points: points.to_vec(),
            nodes,
            root,
        }
    }

    fn build_rec(
        points: &[[f32; 3]],
        order: &mut [usize],
        nodes: &mut Vec<KdNode>,
    ) -> Option<usize> {
        if order.is_empty() {
            return None;
        }
        // Split on the widest axis for balanced spatial cells.
        let mut lo = [f32::INFINITY; 3];
        let mut hi = [f32::NEG_INFINITY; 3];
        for &i in order.iter() {
            for a in 0..3 {
                lo[a] = lo[a].min(points[i][a]);
                hi[a] = hi[a].max(points[i][a]);
            }
        }
        let axis = (0..3).max_by(|&a, &b| {
            (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap()
        })
        .unwrap() as u8;
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis as usize]
                .partial_cmp(&points[b][axis as usize])
                .unwrap()
                .then(a.cmp(&b))
        });
        let point = order[mid];
        let node_idx = nodes.len();
        nodes.push(KdNode {
            point,
            axis,
            left: None,
            right: None,
        });
        let (left_slice, rest) = order.split_at_mut(mid);
        let right_slice = &mut rest[1..];
        let left = Self::build_rec(points, left_slice, nodes);
        let right = Self::build_rec(points, right_slice, nodes);
        nodes[node_idx].left = left;
        nodes[node_idx].right = right;
        Some(node_idx)
    }

    /// `k` nearest neighbors of `query` as `(point index, squared
    /// distance)`, nearest first; ties broken by lower index.
    pub fn knn(&self, query: &[f32; 3], k: usize) -> Vec<(usize, f64)> {
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1); // max-heap by (d2, index)
        if let Some(root) = self.root {
            self.search(root, query, k, &mut heap);
        }
        let mut out: Vec<(usize, f64)> = heap.into_iter().map(|(d, i)| (i, d)).collect();
        out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        out
    }

    fn search(&self, node_idx: usize, query: &[f32; 3], k: usize, heap: &mut Vec<(f64, usize)>) {
        let node = &self.nodes[node_idx];
        let p = &self.points[node.point];
        let d2: f64 = (0..3)
            .map(|a| (p[a] as f64 - query[a] as f64).powi(2))
            .sum();
        Self::heap_push(heap, k, (d2, node.point));
        let axis = node.axis as usize;
        let diff = query[axis] as f64 - p[axis] as f64;
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(n) = near {
            self.search(n, query, k, heap);
        }
        let worst = Self::heap_worst(heap, k);
        if let Some(f) = far {
            if diff * diff < worst || heap.len() < k {
                self.search(f, query, k, heap);
            }
        }
    }

    fn heap_push(heap: &mut Vec<(f64, usize)>, k: usize, item: (f64, usize)) {
        // Small k: a sorted vec beats a real heap.
        let pos = heap
            .binary_search_by(|probe| {
                probe
                    .0
                    .partial_cmp(&item.0)
                    .unwrap()
                    .then(probe.1.cmp(&item.1))
            })
            .unwrap_or_else(|p| p);
        heap.insert(pos, item);
        if heap.len() > k {
            heap.pop();
        }
    }

    fn heap_worst(heap: &[(f64, usize)], k: usize) -> f64 {
        if heap.len() < k {
            f64::INFINITY
        } else {
            heap.last().map(|&(d, _)| d).unwrap_or(f64::INFINITY)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{MotionModel, PolynomialMotion, TemporalOpacity};
    use crate::splat::logit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud_with_opacities(opacities: &[f32]) -> GaussianCloud {
        let n = opacities.len();
        GaussianCloud {
            means: (0..n).map(|i| [i as f32, 0.0, 0.0]).collect(),
            rotations: vec![[1.0, 0.0, 0.0, 0.0]; n],
            log_scales: vec![[0.0; 3]; n],
            opacity_logits: opacities.iter().map(|&o| logit(o)).collect(),
            sh0: vec![[0.0; 3]; n],
            sh_n: vec![],
            sh_degree: 0,
            features: None,
            feature_dim: 0,
            flags: None,
        }
    }

    fn random_cloud(n: usize, seed: u64) -> GaussianCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = cloud_with_opacities(
            &(0..n).map(|_| rng.gen_range(0.001..0.999)).collect::<Vec<f32>>(),
        );
        for i in 0..n {
            c.means[i] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            c.log_scales[i] = [
                rng.gen_range(-4.0..1.0),
                rng.gen_range(-4.0..1.0),
                rng.gen_range(-4.0..1.0),
            ];
        }
        c
    }

    #[test]
    fn opacity_prune_basic() {
        let c = cloud_with_opacities(&[0.9, 0.001]);
        let (out, report) = prune_by_opacity(&c, 0.005).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(report.removed_by_opacity, 1);
        assert_eq!(report.indices_removed, vec![1]);
    }

    #[test]
    fn opacity_prune_tau_zero_is_identity() {
        let c = cloud_with_opacities(&[0.5, 0.0001, 0.99]);
        let (out, report) = prune_by_opacity(&c, 0.0).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(report.removed_by_opacity, 0);
    }

    #[test]
    fn opacity_prune_rejects_bad_tau() {
        let c = cloud_with_opacities(&[0.5]);
        assert!(prune_by_opacity(&c, 1.0).is_err());
        assert!(prune_by_opacity(&c, -0.1).is_err());
    }

    #[test]
    fn scale_prune_bounds() {
        let mut c = cloud_with_opacities(&[0.5, 0.5, 0.5]);
        c.log_scales[1] = [1e6f32.ln(), 0.0, 0.0];
        let (out, report) = prune_by_scale(&c, 0.5, 1e3).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(report.removed_by_scale, 1);
        assert_eq!(report.indices_removed, vec![1]);

        let all_unit = cloud_with_opacities(&[0.5; 4]);
        let (out, report) = prune_by_scale(&all_unit, 0.5, 2.0).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(report.removed_by_scale, 0);
    }

    #[test]
    fn scale_prune_inverted_bounds_rejected() {
        let c = cloud_with_opacities(&[0.5]);
        assert!(prune_by_scale(&c, 2.0, 1.0).is_err());
    }

    #[test]
    fn scale_prune_matches_brute_force() {
        let c = random_cloud(10_000, 1);
        let (s_min, s_max) = (0.05f32, 1.5f32);
        let (_, report) = prune_by_scale(&c, s_min, s_max).unwrap();
        let brute: Vec<usize> = (0..c.len())
            .filter(|&i| {
                let s = c.log_scales[i].iter().copied().fold(f32::NEG_INFINITY, f32::max).exp();
                !(s >= s_min && s <= s_max)
            })
            .collect();
        assert_eq!(report.indices_removed, brute);
        assert_eq!(report.kept + report.indices_removed.len(), c.len());
    }

    #[test]
    fn outlier_prune_removes_far_point() {
        let mut c = random_cloud(101, 2);
        c.means[100] = [1000.0, 1000.0, 1000.0];
        let (out, report) = prune_outliers_kdtree(&c, 3, 3.0).unwrap();
        assert_eq!(report.indices_removed, vec![100]);
        assert_eq!(out.len(), 100);
    }

    #[test]
    fn outlier_prune_coincident_points_kept() {
        let mut c = cloud_with_opacities(&[0.5; 50]);
        for i in 0..50 {
            c.means[i] = [1.0, 2.0, 3.0];
        }
        let (out, report) = prune_outliers_kdtree(&c, 5, 3.0).unwrap();
        assert_eq!(out.len(), 50);
        assert!(report.indices_removed.is_empty());
    }

    #[test]
    fn outlier_prune_matches_brute_force_knn() {
        let c = random_cloud(2000, 3);
        let k = 4;
        let m = 1.5;
        let (_, report) = prune_outliers_kdtree(&c, k, m).unwrap();
        // O(N^2) oracle.
        let n = c.len();
        let mean_dists: Vec<f64> = (0..n)
            .map(|i| {
                let mut d: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        (0..3)
                            .map(|a| (c.means[i][a] as f64 - c.means[j][a] as f64).powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect();
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                d[..k].iter().sum::<f64>() / k as f64
            })
            .collect();
        let mean = mean_dists.iter().sum::<f64>() / n as f64;
        let std = (mean_dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let brute: Vec<usize> = (0..n)
            .filter(|&i| mean_dists[i] > mean + m as f64 * std)
            .collect();
        assert_eq!(report.indices_removed, brute);
    }

    #[test]
    fn outlier_prune_needs_enough_points() {
        let c = cloud_with_opacities(&[0.5; 3]);
        assert!(prune_outliers_kdtree(&c, 5, 3.0).is_err());
    }

    #[test]
    fn prune_order_commutes_on_kept_sets() {
        let c = random_cloud(500, 4);
        let (after_os, _) = {
            let (a, _) = prune_by_opacity(&c, 0.3).unwrap();
            prune_by_scale(&a, 0.05, 1.5).unwrap()
        };
        let (after_so, _) = {
            let (a, _) = prune_by_scale(&c, 0.05, 1.5).unwrap();
            prune_by_opacity(&a, 0.3).unwrap()
        };
        assert_eq!(after_os, after_so);
    }

    #[test]
    fn sh_mask_energy_filter() {
        let mut c = cloud_with_opacities(&[0.5; 4]);
        c.sh_degree = 1;
        c.sh_n = vec![0.0; 4 * 3 * 3];
        // Give point 2 some SH energy.
        c.sh_n[2 * 9] = 0.5;
        let mask = derive_sh_mask(&c, 0.1).unwrap();
        assert_eq!(mask.bits, vec![false, false, true, false]);
        assert_eq!(mask.ratio(), 0.25);
        // eps = 0: everything active (>= comparison).
        assert_eq!(derive_sh_mask(&c, 0.0).unwrap().ratio(), 1.0);
        // all zero + positive eps: nothing active.
        c.sh_n.fill(0.0);
        assert_eq!(derive_sh_mask(&c, 1e-9).unwrap().ratio(), 0.0);
    }

    #[test]
    fn sh_mask_requires_coeffs() {
        let c = cloud_with_opacities(&[0.5]);
        assert!(derive_sh_mask(&c, 0.1).is_err());
    }

    fn dyn_cloud_linear(n: usize, velocity: [f32; 3]) -> DynamicGaussianCloud {
        let base = cloud_with_opacities(&vec![0.8; n]);
        let mut pos = vec![[0.0f32; 3]; n * 2];
        for i in 0..n {
            pos[i * 2] = base.means[i];
            pos[i * 2 + 1] = velocity;
        }
        let motion = MotionModel::Polynomial(PolynomialMotion {
            degree_pos: 1,
            degree_rot: 0,
            time_center: 0.5,
            pos_coeffs: pos,
            rot_coeffs: base.rotations.clone(),
        });
        DynamicGaussianCloud {
            temporal_opacity: TemporalOpacity::always_on(n),
            motion,
            base,
            time_range: (0.0, 1.0),
            gof_index: 0,
        }
    }

    #[test]
    fn static_mask_zero_motion() {
        let d = dyn_cloud_linear(10, [0.0; 3]);
        let mask = derive_static_mask(&d, 0.01, 16).unwrap();
        assert_eq!(mask.ratio(), 0.0);
    }

    #[test]
    fn static_mask_linear_motion() {
        // Unit velocity over the range: displacement from center reaches 0.5.
        let d = dyn_cloud_linear(5, [1.0, 0.0, 0.0]);
        let mask = derive_static_mask(&d, 0.5, 16).unwrap();
        assert_eq!(mask.ratio(), 1.0);
    }

    #[test]
    fn static_mask_matches_dense_sampling() {
        // Degree-3 polynomial motions, sparse sampling (>= 4 points) must
        // agree with a dense 1000-sample oracle.
        let n = 50;
        let base = cloud_with_opacities(&vec![0.8; n]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pos = vec![[0.0f32; 3]; n * 4];
        for i in 0..n {
            pos[i * 4] = base.means[i];
            for kdx in 1..4 {
                pos[i * 4 + kdx] = [
                    rng.gen_range(-0.3..0.3),
                    rng.gen_range(-0.3..0.3),
                    rng.gen_range(-0.3..0.3),
                ];
            }
        }
        let motion = MotionModel::Polynomial(PolynomialMotion {
            degree_pos: 3,
            degree_rot: 0,
            time_center: 0.5,
            pos_coeffs: pos,
            rot_coeffs: base.rotations.clone(),
        });
        let d = DynamicGaussianCloud {
            temporal_opacity: TemporalOpacity::always_on(n),
            motion,
            base,
            time_range: (0.0, 1.0),
            gof_index: 0,
        };
        let eps = 0.12;
        let dense = derive_static_mask(&d, eps, 1000).unwrap();
        // A cubic's max displacement over [0,1] is very nearly attained on a
        // dense grid; compare against a mid-resolution sampling.
        let sparse = derive_static_mask(&d, eps, 101).unwrap();
        let disagreements = dense
            .bits
            .iter()
            .zip(&sparse.bits)
            .filter(|(a, b)| a != b)
            .count();
        assert!(disagreements <= 1, "{disagreements} disagreements");
    }

    #[test]
    fn apply_mask_zeroes_and_flags() {
        let mut c = cloud_with_opacities(&[0.5; 3]);
        c.sh_degree = 1;
        c.sh_n = vec![0.3; 3 * 9];
        let mask = AttributeMask {
            attribute: "sh_n".into(),
            bits: vec![true, false, true],
        };
        let out = apply_mask(&c, &mask).unwrap();
        assert!(out.sh_n[9..18].iter().all(|&v| v == 0.0));
        assert!(out.sh_n[..9].iter().all(|&v| v == 0.3));
        assert_eq!(out.flags.as_ref().unwrap()[1] & FLAG_DIFFUSE_ONLY, FLAG_DIFFUSE_ONLY);
        // Idempotent.
        assert_eq!(apply_mask(&out, &mask).unwrap(), out);
        // All-ones mask is the identity (modulo flags allocation).
        let ones = AttributeMask {
            attribute: "sh_n".into(),
            bits: vec![true; 3],
        };
        let id = apply_mask(&c, &ones).unwrap();
        assert_eq!(id.sh_n, c.sh_n);
    }

    #[test]
    fn apply_mask_length_mismatch() {
        let c = cloud_with_opacities(&[0.5; 3]);
        let mask = AttributeMask {
            attribute: "sh_n".into(),
            bits: vec![true; 2],
        };
        assert!(apply_mask(&c, &mask).is_err());
    }

    #[test]
    fn kdtree_knn_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let points: Vec<[f32; 3]> = (0..500)
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect();
        let tree = KdTree::build(&points);
        for qi in (0..500).step_by(37) {
            let got = tree.knn(&points[qi], 8);
            let mut brute: Vec<(usize, f64)> = (0..points.len())
                .map(|j| {
                    let d2: f64 = (0..3)
                        .map(|a| (points[qi][a] as f64 - points[j][a] as f64).powi(2))
                        .sum();
                    (j, d2)
                })
                .collect();
            brute.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            brute.truncate(8);
            assert_eq!(got, brute);
        }
    }
}
