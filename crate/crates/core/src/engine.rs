//! Mean shift and blurring mean shift updates, the configuration-space
//! objective `L(u) = sum_{i,j} K((u_i - u_j)/h)`, its gradient, and the
//! iteration driver.

use serde::{Deserialize, Serialize};

use crate::configuration::Configuration;
use crate::diagnostics::{component_diameter, diameter};
use crate::error::{check_bandwidth, BmsError, Result};
use crate::graph::{build_graph, classify, default_stability_tol, DisjointSet};
use crate::kernels::KernelSpec;

/// Symmetric `n x n` matrix of `G((y_i - y_j)/h)`, row-major, diagonal `g(0)`.
pub fn weight_matrix(cfg: &Configuration, kernel: &KernelSpec, h: f64) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    let n = cfg.n();
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        w[i * n + i] = kernel.g0();
        for j in i + 1..n {
            let g = kernel.g_of_sq(cfg.dist_sq(i, j), h);
            w[i * n + j] = g;
            w[j * n + i] = g;
        }
    }
    Ok(w)
}

/// One blurring mean shift update of every point.
///
/// Points are updated as `y_i + sum_j G_ij (y_j - y_i) / sum_j G_ij`, which
/// equals the weighted mean `sum_j G_ij y_j / sum_j G_ij` and returns a point
/// whose neighbours all coincide with it bit-for-bit unchanged.
///
/// Components whose pairwise weights are all at least `g(0)/2` are instead
/// updated around their shared mean `c` as
/// `c - sum_j (g(0) - G_ij)(y_j - c) / sum_j G_ij`, with the deficit
/// `g(0) - G_ij` taken from [`KernelSpec::g_deficit`]. Near collapse the plain
/// form loses the relative geometry to cancellation, while this one keeps it
/// to a few ulps; a component on which `G` is flat lands on a single point.
pub fn bms_step(cfg: &Configuration, kernel: &KernelSpec, h: f64) -> Result<Configuration> {
    let w = weight_matrix(cfg, kernel, h)?;
    let mut next = step_with_weights(cfg, &w)?;
    let n = cfg.n();
    let mut dsu = DisjointSet::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if w[i * n + j] != 0.0 {
                dsu.union(i, j);
            }
        }
    }
    for comp in dsu.groups() {
        recenter_tight_component(cfg, kernel, h, &w, &comp, &mut next);
    }
    Ok(next)
}

fn recenter_tight_component(
    cfg: &Configuration,
    kernel: &KernelSpec,
    h: f64,
    w: &[f64],
    comp: &[usize],
    next: &mut Configuration,
) {
    let (n, d, m) = (cfg.n(), cfg.d(), comp.len());
    let half = 0.5 * kernel.g0();
    let mut deficit = vec![0.0; m * m];
    for a in 0..m {
        for b in a + 1..m {
            let u = cfg.dist_sq(comp[a], comp[b]) / (2.0 * h * h);
            let dv = kernel.g_deficit(u);
            if !(dv <= half) {
                return;
            }
            deficit[a * m + b] = dv;
            deficit[b * m + a] = dv;
        }
    }
    let base = cfg.point(comp[0]);
    let mut center = vec![0.0; d];
    for &j in &comp[1..] {
        for ((c, y), b) in center.iter_mut().zip(cfg.point(j)).zip(base) {
            *c += y - b;
        }
    }
    for (c, b) in center.iter_mut().zip(base) {
        *c = b + *c / m as f64;
    }
    let mut pull = vec![0.0; d];
    for (a, &i) in comp.iter().enumerate() {
        let total: f64 = comp.iter().map(|&j| w[i * n + j]).sum();
        pull.iter_mut().for_each(|p| *p = 0.0);
        for (b, &j) in comp.iter().enumerate() {
            let dv = deficit[a * m + b];
            if dv == 0.0 {
                continue;
            }
            for ((p, y), c) in pull.iter_mut().zip(cfg.point(j)).zip(&center) {
                *p += dv * (y - c);
            }
        }
        let row = next.point_mut(i);
        for ((r, c), p) in row.iter_mut().zip(&center).zip(&pull) {
            *r = c - p / total;
        }
    }
}

pub(crate) fn step_with_weights(cfg: &Configuration, w: &[f64]) -> Result<Configuration> {
    let (n, d) = (cfg.n(), cfg.d());
    let mut out = Vec::with_capacity(n * d);
    let mut shift = vec![0.0; d];
    for i in 0..n {
        let yi = cfg.point(i);
        let row = &w[i * n..(i + 1) * n];
        shift.iter_mut().for_each(|s| *s = 0.0);
        let mut total = 0.0;
        for (j, &g) in row.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            total += g;
            if j != i {
                for ((s, a), b) in shift.iter_mut().zip(cfg.point(j)).zip(yi) {
                    *s += g * (a - b);
                }
            }
        }
        if !(total > 0.0) {
            return Err(BmsError::ZeroWeight { index: i });
        }
        out.extend(yi.iter().zip(&shift).map(|(y, s)| y + s / total));
    }
    Ok(Configuration::from_parts(n, d, out))
}

/// One mean shift update of `query` against fixed data points.
pub fn ms_step(query: &[f64], data: &Configuration, kernel: &KernelSpec, h: f64) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    if query.len() != data.d() {
        return Err(BmsError::Data(format!(
            "query has {} coordinates, data has d={}",
            query.len(),
            data.d()
        )));
    }
    if query.iter().any(|q| !q.is_finite()) {
        return Err(BmsError::Data("non-finite query coordinate".into()));
    }
    let mut num = vec![0.0; data.d()];
    let mut total = 0.0;
    for x in data.points() {
        let dist_sq: f64 = query.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let g = kernel.g_of_sq(dist_sq, h);
        if g == 0.0 {
            continue;
        }
        total += g;
        for (acc, xi) in num.iter_mut().zip(x) {
            *acc += g * xi;
        }
    }
    if !(total > 0.0) {
        return Err(BmsError::IsolatedQuery);
    }
    Ok(num.into_iter().map(|v| v / total).collect())
}

/// `L(u) = n k(0) + 2 sum_{i<j} K((u_i - u_j)/h)`, in unnormalized kernel units.
pub fn objective(cfg: &Configuration, kernel: &KernelSpec, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    let n = cfg.n();
    let mut cross = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            cross += kernel.k_of_sq(cfg.dist_sq(i, j), h);
        }
    }
    Ok(n as f64 * kernel.k(0.0) + 2.0 * cross)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// `dL/du` stacked as in the configuration.
    pub values: Vec<f64>,
    /// Some pair sits exactly at a radius where the kernel is not differentiable;
    /// the value there uses the left-derivative selection of `g`.
    pub nonsmooth: bool,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Block `i` is `-(2/h^2) sum_j (u_i - u_j) G((u_i - u_j)/h)`.
pub fn gradient(cfg: &Configuration, kernel: &KernelSpec, h: f64) -> Result<Gradient> {
    check_bandwidth(h)?;
    let (n, d) = (cfg.n(), cfg.d());
    let kink = kernel.kink();
    let mut values = vec![0.0; n * d];
    let mut nonsmooth = false;
    let scale = -2.0 / (h * h);
    for i in 0..n {
        for j in i + 1..n {
            let dist_sq = cfg.dist_sq(i, j);
            let u = dist_sq / (2.0 * h * h);
            if kink == Some(u) {
                nonsmooth = true;
            }
            let g = kernel.g(u);
            if g == 0.0 {
                continue;
            }
            for k in 0..d {
                let diff = cfg.point(i)[k] - cfg.point(j)[k];
                values[i * d + k] += scale * diff * g;
                values[j * d + k] -= scale * diff * g;
            }
        }
    }
    Ok(Gradient { values, nonsmooth })
}

/// `y + (h^2/2) S^{-1} grad L(y)` with `S = diag(sum_j G_ij) (x) I_d`: the
/// gradient-ascent reading of the blurring update.
pub fn gradient_ascent_step(cfg: &Configuration, kernel: &KernelSpec, h: f64) -> Result<Configuration> {
    let w = weight_matrix(cfg, kernel, h)?;
    let grad = gradient(cfg, kernel, h)?;
    let (n, d) = (cfg.n(), cfg.d());
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        let s: f64 = w[i * n..(i + 1) * n].iter().sum();
        for k in 0..d {
            out.push(cfg.point(i)[k] + 0.5 * h * h * grad.values[i * d + k] / s);
        }
    }
    Configuration::new(n, d, out)
}

/// `R(next | cur) - R(cur | cur)` for the quadratic minorizer of `L` built at `cur`:
/// `(1/h^2) sum_{i,j} (G_ij/2) (|cur_i - cur_j|^2 - |next_i - next_j|^2)`.
pub fn minorizer_gap(next: &Configuration, cur: &Configuration, kernel: &KernelSpec, h: f64) -> Result<f64> {
    cur.check_same_shape(next)?;
    check_bandwidth(h)?;
    let n = cur.n();
    let mut acc = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let g = kernel.g_of_sq(cur.dist_sq(i, j), h);
            if g != 0.0 {
                acc += g * (cur.dist_sq(i, j) - next.dist_sq(i, j));
            }
        }
    }
    // each unordered pair appears twice in the double sum, halved by G/2
    Ok(acc / (h * h))
}

/// `2 g(0) / h^2`, the ascent constant of one blurring step.
pub fn ascent_constant(kernel: &KernelSpec, h: f64) -> f64 {
    2.0 * kernel.g0() / (h * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_iter: usize,
    /// Stop when `y_{t+1} == y_t` exactly.
    pub exact_fixed_point: bool,
    /// Stop when the largest point move falls below this value (0 disables).
    pub move_tol: f64,
}

impl StopRule {
    pub const DEFAULT_MAX_ITER: usize = 10_000;
    pub const DEFAULT_RELATIVE_MOVE_TOL: f64 = 1e-12;

    /// Exact fixed point, `move_tol = 1e-12 * diameter(cfg)`, at most 10 000 steps.
    pub fn default_for(cfg: &Configuration) -> Self {
        Self {
            max_iter: Self::DEFAULT_MAX_ITER,
            exact_fixed_point: true,
            move_tol: Self::DEFAULT_RELATIVE_MOVE_TOL * diameter(cfg),
        }
    }

    pub fn exact(max_iter: usize) -> Self {
        Self {
            max_iter,
            exact_fixed_point: true,
            move_tol: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(BmsError::Parameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.move_tol >= 0.0) {
            return Err(BmsError::Parameter {
                name: "move_tol",
                reason: format!("must be non-negative, got {}", self.move_tol),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ExactFixedPoint,
    MoveTolerance,
    MaxIter,
}

/// Diagnostics of the configuration `y_t` and the step to `y_{t+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    #[serde(rename = "L")]
    pub objective: f64,
    #[serde(rename = "d")]
    pub diameter: f64,
    #[serde(rename = "rho")]
    pub comp_diameter: f64,
    pub max_move: f64,
    #[serde(rename = "M")]
    pub n_components: usize,
    pub closed: bool,
    pub singular: bool,
    pub stable: bool,
}

impl IterationRecord {
    pub fn compute(
        t: usize,
        cur: &Configuration,
        next: &Configuration,
        kernel: &KernelSpec,
        h: f64,
    ) -> Result<Self> {
        let graph = build_graph(cur, kernel, h)?;
        let class = classify(&graph, cur, kernel, h, default_stability_tol(kernel, h));
        Ok(Self {
            t,
            objective: objective(cur, kernel, h)?,
            diameter: diameter(cur),
            comp_diameter: component_diameter(cur, graph.components()),
            max_move: cur.max_point_move(next)?,
            n_components: graph.n_components(),
            closed: class.closed,
            singular: class.singular,
            stable: class.stable,
        })
    }
}

/// What the driver hands to a trace consumer after each step.
pub struct StepView<'a> {
    pub record: &'a IterationRecord,
    pub current: &'a Configuration,
    pub next: &'a Configuration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_config: Configuration,
    pub stop_reason: StopReason,
    /// Index of the last step taken; for an exact fixed point this is
    /// `T = min { t : y_{t+1} = y_t }` with `y_1` the input.
    pub terminal_step: usize,
    pub last_record: IterationRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub final_config: Configuration,
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    pub terminal_step: usize,
}

/// Iterates [`bms_step`] from `cfg0`, streaming one record per step to `sink`.
pub fn run_bms_with<F>(
    cfg0: &Configuration,
    kernel: &KernelSpec,
    h: f64,
    stop: &StopRule,
    mut sink: F,
) -> Result<RunSummary>
where
    F: FnMut(StepView<'_>),
{
    check_bandwidth(h)?;
    stop.validate()?;
    let mut cur = cfg0.clone();
    let mut t = 1;
    loop {
        let next = bms_step(&cur, kernel, h)?;
        let record = IterationRecord::compute(t, &cur, &next, kernel, h)?;
        sink(StepView {
            record: &record,
            current: &cur,
            next: &next,
        });
        let reason = if stop.exact_fixed_point && next == cur {
            Some(StopReason::ExactFixedPoint)
        } else if record.max_move < stop.move_tol {
            Some(StopReason::MoveTolerance)
        } else if t >= stop.max_iter {
            Some(StopReason::MaxIter)
        } else {
            None
        };
        if let Some(stop_reason) = reason {
            return Ok(RunSummary {
                final_config: next,
                stop_reason,
                terminal_step: t,
                last_record: record,
            });
        }
        cur = next;
        t += 1;
    }
}

/// [`run_bms_with`] collecting every record.
pub fn run_bms(cfg0: &Configuration, kernel: &KernelSpec, h: f64, stop: &StopRule) -> Result<RunOutcome> {
    let mut records = Vec::new();
    let summary = run_bms_with(cfg0, kernel, h, stop, |view| records.push(*view.record))?;
    Ok(RunOutcome {
        final_config: summary.final_config,
        records,
        stop_reason: summary.stop_reason,
        terminal_step: summary.terminal_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelId;
    use approx::assert_abs_diff_eq;

    fn kern(id: KernelId) -> KernelSpec {
        KernelSpec::builtin(id).unwrap()
    }

    fn line(xs: &[f64]) -> Configuration {
        Configuration::new(xs.len(), 1, xs.to_vec()).unwrap()
    }

    #[test]
    fn two_point_gaussian_step() {
        // (g(0) * 0.5 + g(0.5) * -0.5) / (g(0) + g(0.5)), g(0.5) = e^{-1/2}
        let e = (-0.5f64).exp();
        let expected = 0.5 * (1.0 - e) / (1.0 + e);
        let next = bms_step(&line(&[-0.5, 0.5]), &kern(KernelId::Gaussian), 1.0).unwrap();
        assert_abs_diff_eq!(next.point(1)[0], expected, epsilon = 1e-15);
        assert_abs_diff_eq!(next.point(1)[0], 0.12245, epsilon = 2e-5);
        assert_abs_diff_eq!(next.point(0)[0], -0.12245, epsilon = 2e-5);
    }

    #[test]
    fn fixed_configurations_are_unchanged() {
        let gauss = kern(KernelId::Gaussian);
        let same = Configuration::from_rows(&[[1.25, -3.0]; 4]).unwrap();
        assert_eq!(bms_step(&same, &gauss, 0.7).unwrap(), same);

        let far = line(&[0.0, 10.0]);
        assert_eq!(bms_step(&far, &kern(KernelId::Epanechnikov), 1.0).unwrap(), far);
        // an isolated point stays put even when g(0) is not a power of two
        let cos = kern(KernelId::Cosine);
        let iso = line(&[0.1, 7.3, 123.456_789]);
        assert_eq!(bms_step(&iso, &cos, 1.0).unwrap(), iso);
    }

    #[test]
    fn step_rejects_bad_bandwidth_and_inadmissible_kernel() {
        let c = line(&[0.0, 1.0]);
        assert!(bms_step(&c, &kern(KernelId::Gaussian), 0.0).is_err());
        let far = line(&[0.0, 10.0]);
        assert!(matches!(
            bms_step(&far, &kern(KernelId::Tricube), 1.0),
            Err(BmsError::ZeroWeight { index: 0 })
        ));
    }

    #[test]
    fn mean_shift_step() {
        let epa = kern(KernelId::Epanechnikov);
        let data = line(&[0.0, 10.0, 20.0]);
        assert_eq!(ms_step(&[10.0], &data, &epa, 1.0).unwrap(), vec![10.0]);
        let sym = line(&[-0.5, 0.5]);
        assert_abs_diff_eq!(ms_step(&[0.0], &sym, &kern(KernelId::Gaussian), 1.0).unwrap()[0], 0.0);
        let pair = line(&[0.0, 1.0]);
        assert_abs_diff_eq!(ms_step(&[0.25], &pair, &epa, 2.0).unwrap()[0], 0.5);
        assert_eq!(ms_step(&[100.0], &pair, &epa, 1.0), Err(BmsError::IsolatedQuery));
        assert!(ms_step(&[0.0, 0.0], &pair, &epa, 1.0).is_err());
    }

    #[test]
    fn objective_values() {
        let gauss = kern(KernelId::Gaussian);
        let h = 0.8;
        let l = objective(&line(&[0.0, h]), &gauss, h).unwrap();
        assert_abs_diff_eq!(l, 2.0 + 2.0 * (-0.5f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(l, 3.21306, epsilon = 1e-5);
        let same = line(&[2.0; 5]);
        assert_eq!(objective(&same, &gauss, 1.0).unwrap(), 25.0);
        assert_eq!(objective(&line(&[0.0, 10.0]), &kern(KernelId::Epanechnikov), 1.0).unwrap(), 2.0);
    }

    #[test]
    fn gradient_values() {
        let g = gradient(&line(&[-0.5, 0.5]), &kern(KernelId::Gaussian), 1.0).unwrap();
        let e = 2.0 * (-0.5f64).exp();
        assert_abs_diff_eq!(g.values[0], e, epsilon = 1e-15);
        assert_abs_diff_eq!(g.values[1], -e, epsilon = 1e-15);
        assert!(!g.nonsmooth);

        let singular = line(&[0.0, 0.0, 5.0]);
        let g = gradient(&singular, &kern(KernelId::Epanechnikov), 1.0).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));

        // squared distance 2 with h = 1 puts the pair exactly on the truncation sphere
        let edge = Configuration::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let g = gradient(&edge, &kern(KernelId::Epanechnikov), 1.0).unwrap();
        assert!(g.nonsmooth);
    }

    #[test]
    fn minorizer_gap_zero_for_identical_configs() {
        let c = line(&[0.0, 0.3, 1.1]);
        assert_eq!(minorizer_gap(&c, &c, &kern(KernelId::Biweight), 1.0).unwrap(), 0.0);
        assert!(minorizer_gap(&line(&[0.0]), &c, &kern(KernelId::Biweight), 1.0).is_err());
    }

    #[test]
    fn stop_rule_validation_and_single_step() {
        let c = line(&[0.0, 0.4, 1.0]);
        let gauss = kern(KernelId::Gaussian);
        let bad = StopRule { max_iter: 0, ..StopRule::exact(1) };
        assert!(run_bms(&c, &gauss, 1.0, &bad).is_err());
        let neg = StopRule { move_tol: -1.0, ..StopRule::exact(1) };
        assert!(run_bms(&c, &gauss, 1.0, &neg).is_err());

        let out = run_bms(&c, &gauss, 1.0, &StopRule::exact(1)).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.stop_reason, StopReason::MaxIter);
        assert_eq!(out.final_config, bms_step(&c, &gauss, 1.0).unwrap());
    }

    #[test]
    fn isolated_points_stop_immediately() {
        let c = line(&[0.0, 5.0, 10.0]);
        let out = run_bms(&c, &kern(KernelId::Epanechnikov), 1.0, &StopRule::default_for(&c)).unwrap();
        assert_eq!(out.stop_reason, StopReason::ExactFixedPoint);
        assert_eq!(out.terminal_step, 1);
        assert_eq!(out.records[0].n_components, 3);
        assert!(out.records[0].singular);
    }
}
