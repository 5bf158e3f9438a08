//! Runs the per-step invariant suite over one run and over a fuzz corpus.

use bms_core::diagnostics::{check_step, diameter, direction_set, CheckSummary, InvariantTracker};
use bms_core::engine::{bms_step, run_bms_with, StopReason, StopRule};
use bms_core::graph::{build_graph, classify, component_count_bound, default_stability_tol, is_fixed_point};
use bms_core::{BmsError, Configuration, KernelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub stop: StopRule,
    pub seed: u64,
    pub directions: usize,
    pub fuzz: usize,
    /// Scale every proposed step outward by 1.5 before checking it.
    pub inject_descent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub n: usize,
    pub d: usize,
    pub steps: usize,
    pub stop_reason: StopReason,
    /// Whether the terminal graph is singular; only meaningful after an exact stop.
    pub terminal_singular: Option<bool>,
    pub checks: Vec<CheckSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzReport {
    pub cases: usize,
    /// Cases where the fixed-point residual test and graph singularity disagree.
    pub fixed_point_mismatches: usize,
    pub first_mismatch: Option<usize>,
    pub bound_violations: usize,
    pub stable_fraction: f64,
    pub checks: Vec<CheckSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub kernel: String,
    pub h: f64,
    pub seed: u64,
    pub directions: usize,
    pub injected_descent: bool,
    pub run: RunReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fuzz: Option<FuzzReport>,
    pub passed: bool,
}

/// Pushes every point of `cfg` away from the centroid by `factor`.
pub fn expand(cfg: &Configuration, factor: f64) -> Configuration {
    let c = cfg.centroid();
    let coords = cfg
        .points()
        .flat_map(|p| p.iter().zip(&c).map(|(x, m)| m + factor * (x - m)).collect::<Vec<_>>())
        .collect();
    Configuration::new(cfg.n(), cfg.d(), coords).expect("same shape")
}

/// Residual tolerance used when comparing fixed points with singular graphs.
pub fn fixed_point_tol(cfg: &Configuration, h: f64) -> f64 {
    1e-12 * diameter(cfg).max(h)
}

pub fn verify_run(
    points: &Configuration,
    kernel: &KernelSpec,
    h: f64,
    opts: &VerifyOptions,
) -> bms_core::Result<VerifyReport> {
    let dirs = direction_set(points.d(), opts.directions, opts.seed);
    let mut tracker = InvariantTracker::new();
    let mut failure: Option<BmsError> = None;
    let summary = run_bms_with(points, kernel, h, &opts.stop, |view| {
        if failure.is_some() {
            return;
        }
        let expanded;
        let next = if opts.inject_descent {
            expanded = expand(view.next, 1.5);
            &expanded
        } else {
            view.next
        };
        match check_step(view.current, next, kernel, h, &dirs) {
            Ok(checks) => tracker.record(view.record.t, &checks),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let terminal_singular = if summary.stop_reason == StopReason::ExactFixedPoint {
        let g = build_graph(&summary.final_config, kernel, h)?;
        Some(classify(&g, &summary.final_config, kernel, h, default_stability_tol(kernel, h)).singular)
    } else {
        None
    };
    let run = RunReport {
        n: points.n(),
        d: points.d(),
        steps: summary.terminal_step,
        stop_reason: summary.stop_reason,
        terminal_singular,
        checks: tracker.summaries().to_vec(),
    };
    let fuzz = (opts.fuzz > 0)
        .then(|| fuzz_corpus(kernel, h, opts))
        .transpose()?;
    let passed = tracker.all_passed()
        && terminal_singular != Some(false)
        && fuzz.as_ref().is_none_or(|f| {
            f.fixed_point_mismatches == 0 && f.bound_violations == 0 && f.checks.iter().all(CheckSummary::passed)
        });
    Ok(VerifyReport {
        kernel: kernel.name().to_string(),
        h,
        seed: opts.seed,
        directions: opts.directions,
        injected_descent: opts.inject_descent,
        run,
        fuzz,
        passed,
    })
}

/// Fuzzed configurations in 1 to 3 dimensions, each checked for the
/// fixed-point characterization, the component-count bound and one step of
/// the inequality suite.
pub fn fuzz_corpus(kernel: &KernelSpec, h: f64, opts: &VerifyOptions) -> bms_core::Result<FuzzReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let dir_sets: Vec<_> = (1..=3).map(|d| direction_set(d, opts.directions, opts.seed)).collect();
    let mut tracker = InvariantTracker::new();
    let mut mismatches = 0;
    let mut first_mismatch = None;
    let mut bound_violations = 0;
    let mut stable = 0;
    for case in 0..opts.fuzz {
        let d = rng.gen_range(1..=3);
        let cfg = bms_core::datasets::fuzz_configuration(&mut rng, kernel, h, d)?;
        let graph = build_graph(&cfg, kernel, h)?;
        let class = classify(&graph, &cfg, kernel, h, default_stability_tol(kernel, h));
        if is_fixed_point(&cfg, kernel, h, fixed_point_tol(&cfg, h))? != class.singular {
            mismatches += 1;
            first_mismatch.get_or_insert(case);
        }
        if graph.n_components() > component_count_bound(cfg.n(), diameter(&cfg), kernel.beta(), h, d) {
            bound_violations += 1;
        }
        if class.stable {
            stable += 1;
        }
        let mut next = bms_step(&cfg, kernel, h)?;
        if opts.inject_descent {
            next = expand(&next, 1.5);
        }
        tracker.record(case, &check_step(&cfg, &next, kernel, h, &dir_sets[d - 1])?);
    }
    Ok(FuzzReport {
        cases: opts.fuzz,
        fixed_point_mismatches: mismatches,
        first_mismatch,
        bound_violations,
        stable_fraction: stable as f64 / opts.fuzz as f64,
        checks: tracker.summaries().to_vec(),
    })
}
