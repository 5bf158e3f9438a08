//! Closed-form reference dynamics: the regular-simplex radius recurrence and
//! the Gaussian population-limit recurrence for per-axis spreads.

use std::io::Write;

use serde::Serialize;

use crate::configuration::Configuration;
use crate::diagnostics::residual_floor;
use crate::engine::bms_step;
use crate::error::{check_bandwidth, BmsError, Result};
use crate::kernels::KernelSpec;

/// Regular `(n-1)`-simplex centred at the origin with configuration norm `r`.
///
/// The first vertex is `(r / sqrt(n), 0, ..., 0)`.
pub fn simplex_vertices(n: usize, d: usize, r: f64) -> Result<Configuration> {
    if n < 2 {
        return Err(BmsError::Parameter {
            name: "n",
            reason: format!("a simplex needs at least 2 vertices, got {n}"),
        });
    }
    if n > d + 1 {
        return Err(BmsError::Dimension(format!(
            "{n} simplex vertices do not fit in dimension {d}"
        )));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(BmsError::Parameter {
            name: "r",
            reason: format!("radius must be positive and finite, got {r}"),
        });
    }
    let nf = n as f64;
    let centered = |i: usize, k: usize| if i == k { 1.0 - 1.0 / nf } else { -1.0 / nf };

    // orthonormal basis of the centred subspace from the first n-1 centred e_i
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let mut v: Vec<f64> = (0..n).map(|k| centered(i, k)).collect();
        for q in &basis {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }

    let scale = r / (nf - 1.0).sqrt();
    let mut coords = vec![0.0; n * d];
    for i in 0..n {
        for (k, q) in basis.iter().enumerate() {
            let dot: f64 = (0..n).map(|m| centered(i, m) * q[m]).sum();
            coords[i * d + k] = scale * dot;
        }
    }
    Configuration::new(n, d, coords)
}

/// Radius of a configuration that is (up to rounding) a regular simplex,
/// read off the distance between its first two points.
pub fn simplex_radius(cfg: &Configuration) -> f64 {
    let n = cfg.n() as f64;
    cfg.dist_sq(0, 1).sqrt() * ((n - 1.0) / 2.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimplexState {
    pub n: usize,
    pub d: usize,
    pub r: f64,
    pub h: f64,
}

impl SimplexState {
    pub fn new(n: usize, d: usize, r: f64, h: f64) -> Result<Self> {
        check_bandwidth(h)?;
        if n < 2 || n > d + 1 {
            return Err(BmsError::Dimension(format!(
                "need 2 <= n <= d + 1, got n={n}, d={d}"
            )));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(BmsError::Parameter {
                name: "r",
                reason: format!("radius must be non-negative and finite, got {r}"),
            });
        }
        Ok(Self { n, d, r, h })
    }

    /// Common pairwise distance `sqrt(2/(n-1)) r`.
    pub fn pair_distance(&self) -> f64 {
        (2.0 / (self.n as f64 - 1.0)).sqrt() * self.r
    }
}

/// `r' = [g(0) - g(x)] / [g(0) + (n-1) g(x)] r` with `x = (r/h)^2/(n-1)`.
pub fn simplex_recurrence_step(state: &SimplexState, kernel: &KernelSpec) -> SimplexState {
    let m = state.n as f64 - 1.0;
    let q = state.r / state.h;
    let x = q * q / m;
    let g = kernel.g(x);
    let factor = kernel.g_deficit(x) / (kernel.g0() + m * g);
    SimplexState {
        r: factor * state.r,
        ..*state
    }
}

/// `log r_t` for `t = 0..=steps`, iterated in the log domain so the sequence
/// can be followed far below the smallest double.
///
/// Once `x` is tiny the step is replaced by its leading-order form
/// `r' = c r^3 / (n (n-1) h^2 g(0))`, with `c` the slope of `g(0) - g(u)` at 0.
/// Kernels that are flat near the origin (`c = 0`) reach `-inf`.
pub fn simplex_log_trace(state: &SimplexState, kernel: &KernelSpec, steps: usize) -> Vec<f64> {
    let nf = state.n as f64;
    let m = nf - 1.0;
    let log_h = state.h.ln();
    let slope = kernel.deficit_slope().unwrap_or(0.0);
    let mut out = Vec::with_capacity(steps + 1);
    let mut lr = state.r.ln();
    out.push(lr);
    for _ in 0..steps {
        if lr == f64::NEG_INFINITY {
            out.push(lr);
            continue;
        }
        let log_x = 2.0 * (lr - log_h) - m.ln();
        lr = if log_x > -200.0 {
            let x = log_x.exp();
            let factor = kernel.g_deficit(x) / (kernel.g0() + m * kernel.g(x));
            if factor == 0.0 {
                f64::NEG_INFINITY
            } else {
                lr + factor.ln()
            }
        } else if slope > 0.0 {
            (slope / (nf * m * kernel.g0())).ln() + 3.0 * lr - 2.0 * log_h
        } else {
            f64::NEG_INFINITY
        };
        out.push(lr);
    }
    out
}

/// Least-squares slope of `log(-log r_t)` against `t` over entries with
/// `r_t < 1`; cubic convergence gives `log 3`.
pub fn loglog_slope(log_r: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = log_r
        .iter()
        .enumerate()
        .filter(|(_, &l)| l < 0.0 && l.is_finite())
        .map(|(t, &l)| (t as f64, (-l).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// `s' = s^3 / (s^2 + h^2)` per axis.
pub fn population_recurrence_step(s: &[f64], h: f64) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    s.iter()
        .map(|&x| {
            if x > 0.0 && x.is_finite() {
                Ok(x * x * x / (x * x + h * h))
            } else {
                Err(BmsError::Parameter {
                    name: "s",
                    reason: format!("spread must be positive and finite, got {x}"),
                })
            }
        })
        .collect()
}

/// `s_0, s_1, ..., s_steps` for a single axis. Stops early if the spread underflows to 0.
pub fn population_trace(s0: f64, h: f64, steps: usize) -> Result<Vec<f64>> {
    let mut out = vec![s0];
    let mut s = vec![s0];
    for _ in 0..steps {
        if s[0] == 0.0 {
            break;
        }
        s = match population_recurrence_step(&s, h) {
            Ok(v) => v,
            Err(e) if s[0] > 0.0 => return Err(e),
            Err(_) => break,
        };
        if s[0] == 0.0 {
            out.push(0.0);
            break;
        }
        out.push(s[0]);
    }
    Ok(out)
}

/// `log s_t` for `t = 0..=steps`, followed past the double range via
/// `log s' = 3 log s - log(h^2) - log(1 + s^2/h^2)`.
pub fn population_log_trace(s0: f64, h: f64, steps: usize) -> Result<Vec<f64>> {
    population_recurrence_step(&[s0], h)?;
    let log_h2 = 2.0 * h.ln();
    let mut l = s0.ln();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(l);
    for _ in 0..steps {
        let q = 2.0 * l - log_h2;
        l = 3.0 * l - log_h2 - if q > -700.0 { q.exp().ln_1p() } else { 0.0 };
        out.push(l);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub t: usize,
    pub r_oracle: f64,
    pub r_sim: f64,
    /// `r_t / r_{t-1}^3` of the simulated radii; absent at `t = 0`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub rows: Vec<OracleRow>,
    /// Max `|r_sim - r_oracle| / r_oracle` over steps with `r_oracle` above the floor.
    pub max_rel_err: f64,
    pub floor: f64,
    /// Largest relative deviation of any pairwise distance from the first one,
    /// over the same steps.
    pub max_asymmetry: f64,
}

impl OracleComparison {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,r_oracle,r_sim,ratio")?;
        for row in &self.rows {
            let ratio = row.ratio.map(|x| format!("{x:e}")).unwrap_or_default();
            writeln!(w, "{},{:e},{:e},{}", row.t, row.r_oracle, row.r_sim, ratio)?;
        }
        Ok(())
    }
}

/// Runs the engine from simplex vertices next to the scalar recurrence.
pub fn compare_sim_to_oracle(
    kernel: &KernelSpec,
    n: usize,
    d: usize,
    h: f64,
    r0: f64,
    steps: usize,
) -> Result<OracleComparison> {
    let mut state = SimplexState::new(n, d, r0, h)?;
    let mut cfg = simplex_vertices(n, d, r0)?;
    let floor = residual_floor(state.pair_distance());
    let mut rows = vec![OracleRow {
        t: 0,
        r_oracle: r0,
        r_sim: simplex_radius(&cfg),
        ratio: None,
    }];
    let mut max_rel_err = 0.0f64;
    let mut max_asymmetry = 0.0f64;
    for t in 1..=steps {
        state = simplex_recurrence_step(&state, kernel);
        cfg = bms_step(&cfg, kernel, h)?;
        let r_sim = simplex_radius(&cfg);
        if state.r > floor {
            max_rel_err = max_rel_err.max((r_sim - state.r).abs() / state.r);
            let d01 = cfg.dist_sq(0, 1).sqrt();
            for i in 0..n {
                for j in i + 1..n {
                    let dij = cfg.dist_sq(i, j).sqrt();
                    max_asymmetry = max_asymmetry.max((dij - d01).abs() / d01);
                }
            }
        }
        let prev = rows.last().map(|r| r.r_sim).unwrap_or(r0);
        let cube = prev * prev * prev;
        let ratio = (cube > 0.0).then(|| r_sim / cube);
        rows.push(OracleRow {
            t,
            r_oracle: state.r,
            r_sim,
            ratio,
        });
    }
    Ok(OracleComparison {
        rows,
        max_rel_err,
        floor,
        max_asymmetry,
    })
}
