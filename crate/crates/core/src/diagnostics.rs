//! Per-step inequality checks and convergence-order estimation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::configuration::Configuration;
use crate::engine::{ascent_constant, gradient, minorizer_gap, objective};
use crate::error::{check_bandwidth, BmsError, Result};
use crate::graph::{build_graph, component_count_bound};
use crate::kernels::KernelSpec;

pub const DEFAULT_DIRECTION_SEED: u64 = 0x5EED;
pub const DEFAULT_DIRECTION_COUNT: usize = 256;

/// `(min_i <u, y_i>, max_i <u, y_i>)` for a unit vector `u`.
pub fn directional_extents(cfg: &Configuration, direction: &[f64]) -> Result<(f64, f64)> {
    if direction.len() != cfg.d() {
        return Err(BmsError::Dimension(format!(
            "direction has {} components, configuration has d={}",
            direction.len(),
            cfg.d()
        )));
    }
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(BmsError::Parameter {
            name: "direction",
            reason: format!("expected a unit vector, norm is {norm}"),
        });
    }
    Ok(extents_unchecked(cfg, direction))
}

fn extents_unchecked(cfg: &Configuration, direction: &[f64]) -> (f64, f64) {
    cfg.points()
        .map(|p| p.iter().zip(direction).map(|(a, b)| a * b).sum::<f64>())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Max pairwise distance.
pub fn diameter(cfg: &Configuration) -> f64 {
    let n = cfg.n();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            best = best.max(cfg.dist_sq(i, j));
        }
    }
    best.sqrt()
}

fn subset_diameter(cfg: &Configuration, members: &[usize]) -> f64 {
    let mut best = 0.0f64;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            best = best.max(cfg.dist_sq(i, j));
        }
    }
    best.sqrt()
}

/// Largest intra-component distance over a partition of the point indices.
pub fn component_diameter(cfg: &Configuration, partition: &[Vec<usize>]) -> f64 {
    partition
        .iter()
        .map(|c| subset_diameter(cfg, c))
        .fold(0.0, f64::max)
}

/// `1 - g((d/h)^2/2) / (4 g(0))`, the guaranteed per-step contraction of the diameter.
pub fn diam_rate_factor(d: f64, kernel: &KernelSpec, h: f64) -> f64 {
    let u = 0.5 * (d / h) * (d / h);
    1.0 - kernel.g(u) / (4.0 * kernel.g0())
}

pub fn diam_rate_check(d_t: f64, d_next: f64, kernel: &KernelSpec, h: f64) -> bool {
    d_next <= diam_rate_factor(d_t, kernel, h) * d_t + 1e-10 * d_t
}

/// Residuals below this are dominated by rounding.
pub fn residual_floor(initial_diameter: f64) -> f64 {
    1e3 * f64::EPSILON * initial_diameter
}

/// Seeded unit directions, Gaussian samples normalized.
pub fn direction_set(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClass {
    FiniteTime,
    Exponential,
    SuperlinearCubic,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Fitted `p` in `e_{t+1} ~ C e_t^p`; `None` with fewer than three usable pairs.
    pub order: Option<f64>,
    pub classification: RateClass,
    pub samples_used: usize,
}

/// Classifies a residual sequence `e_t = |y_t - y_final|`.
///
/// Finite-time means an exact zero is reached straight from a residual above
/// `floor`; otherwise `p` is the least-squares slope of `log e_{t+1}` against
/// `log e_t` over consecutive pairs that are both above `floor`.
pub fn estimate_rate(residuals: &[f64], floor: f64) -> RateEstimate {
    if residuals.windows(2).any(|w| w[0] > floor && w[1] == 0.0) {
        return RateEstimate {
            order: None,
            classification: RateClass::FiniteTime,
            samples_used: 0,
        };
    }
    let pairs: Vec<(f64, f64)> = residuals
        .windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| (w[0], w[1]))
        .collect();
    if pairs.len() < 3 {
        return RateEstimate {
            order: None,
            classification: RateClass::Inconclusive,
            samples_used: pairs.len(),
        };
    }
    let m = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return RateEstimate {
            order: None,
            classification: RateClass::Inconclusive,
            samples_used: pairs.len(),
        };
    }
    let p = sxy / sxx;
    let mean_ratio = pairs.iter().map(|(a, b)| b / a).sum::<f64>() / m;
    let classification = if (2.5..=3.5).contains(&p) {
        RateClass::SuperlinearCubic
    } else if (0.8..=1.2).contains(&p) && mean_ratio < 1.0 {
        RateClass::Exponential
    } else {
        RateClass::Inconclusive
    };
    RateEstimate {
        order: Some(p),
        classification,
        samples_used: pairs.len(),
    }
}

/// One inequality evaluated at one step. `slack >= 0` means it holds
/// (tolerance already included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub slack: f64,
}

impl InequalityCheck {
    pub fn passed(&self) -> bool {
        self.slack >= 0.0
    }
}

pub const CHECK_NAMES: [&str; 9] = [
    "ascent",
    "sufficient_ascent",
    "minorizer_sandwich",
    "interval_nesting",
    "diameter_monotone",
    "diameter_rate",
    "component_diameter_rate",
    "component_bound",
    "step_covers_gradient",
];

/// Evaluates every per-step inequality for the transition `prev -> next`.
///
/// `next` is normally `bms_step(prev)`; passing anything else is how the
/// harness is exercised against deliberate violations. The gradient check is
/// skipped when some pair sits exactly on the kink of a non-smooth kernel.
pub fn check_step(
    prev: &Configuration,
    next: &Configuration,
    kernel: &KernelSpec,
    h: f64,
    directions: &[Vec<f64>],
) -> Result<Vec<InequalityCheck>> {
    check_bandwidth(h)?;
    prev.check_same_shape(next)?;
    let mut out = Vec::with_capacity(CHECK_NAMES.len());

    let l0 = objective(prev, kernel, h)?;
    let l1 = objective(next, kernel, h)?;
    let gain = l1 - l0;
    let tol_l = 1e-10 * (1.0 + l0.abs());
    let step_sq = prev.distance_to(next)?.powi(2);
    let gap = minorizer_gap(next, prev, kernel, h)?;
    out.push(InequalityCheck { name: "ascent", slack: gain + tol_l });
    out.push(InequalityCheck {
        name: "sufficient_ascent",
        slack: gain - ascent_constant(kernel, h) * step_sq + tol_l,
    });
    out.push(InequalityCheck {
        name: "minorizer_sandwich",
        slack: gain - gap + tol_l,
    });

    let mut nest = f64::INFINITY;
    for u in directions {
        let (a0, b0) = directional_extents(prev, u)?;
        let (a1, b1) = extents_unchecked(next, u);
        let tol = 1e-12 * (1.0f64).max(a0.abs()).max(b0.abs());
        nest = nest.min(a1 - a0 + tol).min(b0 - b1 + tol);
    }
    out.push(InequalityCheck { name: "interval_nesting", slack: nest });

    let d0 = diameter(prev);
    let d1 = diameter(next);
    let tol_d = 1e-10 * d0 + 1e-14;
    out.push(InequalityCheck {
        name: "diameter_monotone",
        slack: d0 - d1 + tol_d,
    });
    out.push(InequalityCheck {
        name: "diameter_rate",
        slack: diam_rate_factor(d0, kernel, h) * d0 - d1 + tol_d,
    });

    // components evolve independently, so the contraction bound applies to each
    let graph = build_graph(prev, kernel, h)?;
    let mut comp = f64::INFINITY;
    for c in graph.components() {
        let c0 = subset_diameter(prev, c);
        let c1 = subset_diameter(next, c);
        comp = comp.min(diam_rate_factor(c0, kernel, h) * c0 - c1 + 1e-10 * c0 + 1e-14);
    }
    out.push(InequalityCheck {
        name: "component_diameter_rate",
        slack: comp,
    });

    let bound = component_count_bound(prev.n(), d0, kernel.beta(), h, prev.d());
    out.push(InequalityCheck {
        name: "component_bound",
        slack: bound as f64 - graph.n_components() as f64,
    });

    let grad = gradient(prev, kernel, h)?;
    if !grad.nonsmooth {
        let b_bar = h * h / (2.0 * prev.n() as f64 * kernel.g0());
        let lhs = step_sq.sqrt();
        let rhs = b_bar * grad.norm();
        out.push(InequalityCheck {
            name: "step_covers_gradient",
            slack: lhs - rhs + 1e-10 * rhs.max(lhs) + 1e-14,
        });
    }
    Ok(out)
}

/// Worst slack seen for one named check across a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: &'static str,
    pub evaluated: usize,
    pub violations: usize,
    pub worst_slack: f64,
    pub worst_step: Option<usize>,
}

impl CheckSummary {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Folds per-step checks into per-check summaries.
#[derive(Debug, Clone)]
pub struct InvariantTracker {
    summaries: Vec<CheckSummary>,
}

impl Default for InvariantTracker {
    fn default() -> Self {
        Self {
            summaries: CHECK_NAMES
                .iter()
                .map(|&name| CheckSummary {
                    name,
                    evaluated: 0,
                    violations: 0,
                    worst_slack: f64::INFINITY,
                    worst_step: None,
                })
                .collect(),
        }
    }
}

impl InvariantTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, t: usize, checks: &[InequalityCheck]) {
        for c in checks {
            let s = self
                .summaries
                .iter_mut()
                .find(|s| s.name == c.name)
                .expect("check names are fixed");
            s.evaluated += 1;
            if !c.passed() {
                s.violations += 1;
            }
            if c.slack < s.worst_slack {
                s.worst_slack = c.slack;
                s.worst_step = Some(t);
            }
        }
    }

    pub fn summaries(&self) -> &[CheckSummary] {
        &self.summaries
    }

    pub fn all_passed(&self) -> bool {
        self.summaries.iter().all(CheckSummary::passed)
    }

    pub fn total_violations(&self) -> usize {
        self.summaries.iter().map(|s| s.violations).sum()
    }
}
