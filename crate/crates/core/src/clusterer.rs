//! Cluster labels from terminal BMS configurations, plus the bandwidth sweep.

use serde::Serialize;

use crate::configuration::Configuration;
use crate::diagnostics::diameter;
use crate::engine::{objective, run_bms_with, IterationRecord, StepView, StopReason, StopRule};
use crate::error::{check_bandwidth, BmsError, Result};
use crate::graph::DisjointSet;
use crate::kernels::KernelSpec;

pub const DEFAULT_RELATIVE_MERGE_TOL: f64 = 1e-8;

/// `1e-8` times the diameter of the input points.
pub fn default_merge_tol(points: &Configuration) -> f64 {
    DEFAULT_RELATIVE_MERGE_TOL * diameter(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterResult {
    /// Cluster of each input point, `1..=M`, numbered by smallest member.
    pub labels: Vec<usize>,
    pub representatives: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub terminal_step: usize,
    #[serde(rename = "M")]
    pub n_clusters: usize,
    pub stop_reason: StopReason,
    pub h: f64,
    pub kernel: String,
    pub trace_summary: IterationRecord,
    #[serde(skip)]
    pub final_config: Configuration,
}

/// Groups indices whose points are within `tol` of each other, chaining
/// through intermediate points. Groups are ordered by smallest member.
pub fn single_linkage(cfg: &Configuration, tol: f64) -> Vec<Vec<usize>> {
    let n = cfg.n();
    let tol_sq = tol * tol;
    let mut dsu = DisjointSet::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if cfg.dist_sq(i, j) <= tol_sq {
                dsu.union(i, j);
            }
        }
    }
    dsu.groups()
}

fn group_mean(cfg: &Configuration, members: &[usize]) -> Vec<f64> {
    // offsets from the first member keep identical points exact
    let base = cfg.point(members[0]);
    let mut acc = vec![0.0; cfg.d()];
    for &j in &members[1..] {
        for ((a, y), b) in acc.iter_mut().zip(cfg.point(j)).zip(base) {
            *a += y - b;
        }
    }
    let m = members.len() as f64;
    base.iter().zip(&acc).map(|(b, a)| b + a / m).collect()
}

pub fn cluster(
    points: &Configuration,
    kernel: &KernelSpec,
    h: f64,
    stop: &StopRule,
    merge_tol: f64,
) -> Result<ClusterResult> {
    cluster_with(points, kernel, h, stop, merge_tol, |_| {})
}

/// [`cluster`] with every step of the underlying run passed to `sink`.
pub fn cluster_with<F>(
    points: &Configuration,
    kernel: &KernelSpec,
    h: f64,
    stop: &StopRule,
    merge_tol: f64,
    sink: F,
) -> Result<ClusterResult>
where
    F: FnMut(StepView<'_>),
{
    check_bandwidth(h)?;
    if !(merge_tol >= 0.0 && merge_tol.is_finite()) {
        return Err(BmsError::Parameter {
            name: "merge_tol",
            reason: format!("must be non-negative and finite, got {merge_tol}"),
        });
    }
    let summary = run_bms_with(points, kernel, h, stop, sink)?;
    let groups = single_linkage(&summary.final_config, merge_tol);
    let mut labels = vec![0; points.n()];
    for (m, g) in groups.iter().enumerate() {
        for &i in g {
            labels[i] = m + 1;
        }
    }
    let representatives = groups
        .iter()
        .map(|g| group_mean(&summary.final_config, g))
        .collect();
    Ok(ClusterResult {
        labels,
        representatives,
        terminal_step: summary.terminal_step,
        n_clusters: groups.len(),
        stop_reason: summary.stop_reason,
        h,
        kernel: kernel.name().to_string(),
        trace_summary: summary.last_record,
        final_config: summary.final_config,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub h: f64,
    #[serde(rename = "M")]
    pub n_clusters: usize,
    #[serde(rename = "T")]
    pub terminal_step: usize,
    #[serde(rename = "L_final")]
    pub final_objective: f64,
    pub stop_reason: StopReason,
}

/// One clustering run per bandwidth. No bandwidth is singled out as best.
pub fn bandwidth_sweep(
    points: &Configuration,
    kernel: &KernelSpec,
    h_grid: &[f64],
    stop: &StopRule,
    merge_tol: f64,
) -> Result<Vec<SweepRow>> {
    if h_grid.is_empty() {
        return Err(BmsError::Parameter {
            name: "h_grid",
            reason: "bandwidth grid is empty".into(),
        });
    }
    h_grid
        .iter()
        .map(|&h| {
            let res = cluster(points, kernel, h, stop, merge_tol)?;
            Ok(SweepRow {
                h,
                n_clusters: res.n_clusters,
                terminal_step: res.terminal_step,
                final_objective: objective(&res.final_config, kernel, h)?,
                stop_reason: res.stop_reason,
            })
        })
        .collect()
}

/// `min, min + step, ...` up to `max` inclusive (to within half a step).
pub fn h_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    let bad = |name: &'static str, reason: String| Err(BmsError::Parameter { name, reason });
    if !(min > 0.0 && min.is_finite()) {
        return bad("h_min", format!("must be positive, got {min}"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return bad("h_step", format!("must be positive, got {step}"));
    }
    if !(max >= min && max.is_finite()) {
        return bad("h_max", format!("must be at least h_min, got {max}"));
    }
    let count = ((max - min) / step + 0.5).floor() as usize + 1;
    Ok((0..count).map(|k| min + k as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Maps a standardized point back to input units.
    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| x * s + m)
            .collect()
    }
}

/// Per-axis z-scores using the population standard deviation.
pub fn standardize(points: &Configuration) -> Result<(Configuration, Standardization)> {
    let (n, d) = (points.n(), points.d());
    if n < 2 {
        return Err(BmsError::Configuration(format!(
            "standardizing needs at least 2 points, got {n}"
        )));
    }
    let mean = points.centroid();
    let mut var = vec![0.0; d];
    for p in points.points() {
        for ((v, x), m) in var.iter_mut().zip(p).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / n as f64).sqrt()).collect();
    if let Some(axis) = std.iter().position(|&s| !(s > 0.0)) {
        return Err(BmsError::Configuration(format!(
            "axis {axis} has zero variance and cannot be standardized"
        )));
    }
    let coords = points
        .points()
        .flat_map(|p| {
            p.iter()
                .zip(mean.iter().zip(&std))
                .map(|(x, (m, s))| (x - m) / s)
                .collect::<Vec<_>>()
        })
        .collect();
    Ok((Configuration::new(n, d, coords)?, Standardization { mean, std }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelId;

    fn kern(id: KernelId) -> KernelSpec {
        KernelSpec::builtin(id).unwrap()
    }

    fn two_blobs() -> (Configuration, Vec<usize>) {
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for k in 0..10 {
            let a = k as f64 * 0.6;
            rows.push([0.2 * a.cos(), 0.2 * a.sin()]);
            truth.push(1);
            rows.push([8.0 + 0.25 * a.sin(), 3.0 + 0.15 * a.cos()]);
            truth.push(2);
        }
        (Configuration::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn separated_blobs_give_two_clusters() {
        let (c, truth) = two_blobs();
        let res = cluster(&c, &kern(KernelId::Epanechnikov), 0.5, &StopRule::default_for(&c), default_merge_tol(&c)).unwrap();
        assert_eq!(res.n_clusters, 2);
        assert_eq!(res.labels, truth);
        assert_eq!(res.stop_reason, StopReason::ExactFixedPoint);
        assert!(res.trace_summary.singular);
    }

    #[test]
    fn huge_bandwidth_merges_everything() {
        let (c, _) = two_blobs();
        let res = cluster(&c, &kern(KernelId::Epanechnikov), 100.0, &StopRule::default_for(&c), default_merge_tol(&c)).unwrap();
        assert_eq!(res.n_clusters, 1);
        assert!(res.labels.iter().all(|&l| l == 1));
    }

    #[test]
    fn isolated_points_are_their_own_clusters() {
        let c = Configuration::from_rows(&[[0.0, 0.0], [5.0, 0.0], [0.0, 5.0], [5.0, 5.0]]).unwrap();
        let res = cluster(&c, &kern(KernelId::Epanechnikov), 1.0, &StopRule::default_for(&c), 0.0).unwrap();
        assert_eq!((res.n_clusters, res.terminal_step), (4, 1));
        assert_eq!(res.labels, vec![1, 2, 3, 4]);
        assert_eq!(res.representatives[3], vec![5.0, 5.0]);
    }

    #[test]
    fn result_json_fields() {
        let c = Configuration::from_rows(&[[0.0], [10.0]]).unwrap();
        let res = cluster(&c, &kern(KernelId::Biweight), 1.0, &StopRule::default_for(&c), 0.0).unwrap();
        let v = serde_json::to_value(&res).unwrap();
        for key in ["labels", "representatives", "T", "M", "stop_reason", "h", "kernel"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["stop_reason"], "exact_fixed_point");
        assert_eq!(v["kernel"], "biweight");
    }

    #[test]
    fn grid_and_sweep() {
        let g = h_grid(0.03, 3.0, 0.03).unwrap();
        assert_eq!(g.len(), 100);
        assert!((g[99] - 3.0).abs() < 1e-12);
        assert!(h_grid(0.0, 1.0, 0.1).is_err());
        assert!(h_grid(1.0, 0.5, 0.1).is_err());

        // every bandwidth below the smallest gap leaves the points alone
        let c = Configuration::from_rows(&[[0.0], [1.0], [2.5], [4.5]]).unwrap();
        let rows = bandwidth_sweep(&c, &kern(KernelId::Epanechnikov), &[0.1, 0.3, 0.6], &StopRule::default_for(&c), 0.0).unwrap();
        assert!(rows.iter().all(|r| r.n_clusters == 4 && r.terminal_step == 1));
        assert!(bandwidth_sweep(&c, &kern(KernelId::Epanechnikov), &[], &StopRule::exact(5), 0.0).is_err());
    }

    #[test]
    fn standardize_axes() {
        let c = Configuration::from_rows(&[[3.0, 0.0], [7.0, 1.0], [5.0, 2.0], [5.0, 3.0]]).unwrap();
        let (z, stats) = standardize(&c).unwrap();
        assert!((stats.mean[0] - 5.0).abs() < 1e-15);
        assert!((stats.std[0] - 2f64.sqrt()).abs() < 1e-15);
        let mean = z.centroid();
        assert!(mean.iter().all(|m| m.abs() < 1e-15));
        let (z2, _) = standardize(&z).unwrap();
        assert!(z.max_point_move(&z2).unwrap() < 1e-12);
        let back = stats.invert(z.point(1));
        assert!((back[0] - 7.0).abs() < 1e-12 && (back[1] - 1.0).abs() < 1e-12);

        let flat = Configuration::from_rows(&[[1.0, 2.0], [3.0, 2.0]]).unwrap();
        let err = standardize(&flat).unwrap_err();
        assert!(err.to_string().contains("axis 1"), "{err}");
    }
}
