//! Browser bindings for the interactive demo page in `www/`.
//!
//! Every export takes plain numbers and strings and returns a JSON string.
//! The functions in [`api`] do the work and are what the native tests call.

use wasm_bindgen::prelude::*;

pub mod api {
    use bms_core::clusterer::{cluster_with, default_merge_tol, standardize};
    use bms_core::datasets::{generate, Dataset};
    use bms_core::engine::{IterationRecord, StopRule};
    use bms_core::oracles::compare_sim_to_oracle;
    use bms_core::{Configuration, KernelId, KernelSpec};
    use serde::Serialize;

    pub type ApiResult = Result<String, String>;

    fn to_json<T: Serialize>(value: &T) -> ApiResult {
        serde_json::to_string(value).map_err(|e| e.to_string())
    }

    fn kernel(name: &str) -> Result<KernelSpec, String> {
        KernelSpec::from_name(name).map_err(|e| e.to_string())
    }

    #[derive(Serialize)]
    struct Points {
        points: Vec<Vec<f64>>,
        truth: Vec<usize>,
    }

    /// A standardized synthetic dataset.
    pub fn dataset(name: &str, n: usize, seed: u64) -> ApiResult {
        let ds: Dataset = name.parse().map_err(|e: bms_core::BmsError| e.to_string())?;
        let lp = generate(ds, n, seed).map_err(|e| e.to_string())?;
        let (z, _) = standardize(&lp.points).map_err(|e| e.to_string())?;
        to_json(&Points {
            points: z.to_rows(),
            truth: lp.truth,
        })
    }

    #[derive(Serialize)]
    struct Run {
        labels: Vec<usize>,
        #[serde(rename = "M")]
        n_clusters: usize,
        #[serde(rename = "T")]
        terminal_step: usize,
        stop_reason: bms_core::StopReason,
        /// `frames[t]` is the configuration before step `t + 1`; the last is terminal.
        frames: Vec<Vec<Vec<f64>>>,
        records: Vec<IterationRecord>,
    }

    /// Clusters `points_json` (an array of points) and keeps every iterate.
    pub fn run(points_json: &str, kernel_name: &str, h: f64, max_iter: usize) -> ApiResult {
        let rows: Vec<Vec<f64>> = serde_json::from_str(points_json).map_err(|e| e.to_string())?;
        let cfg = Configuration::from_rows(&rows).map_err(|e| e.to_string())?;
        let k = kernel(kernel_name)?;
        let mut stop = StopRule::default_for(&cfg);
        stop.max_iter = max_iter.max(1);
        let mut frames = Vec::new();
        let mut records = Vec::new();
        let res = cluster_with(&cfg, &k, h, &stop, default_merge_tol(&cfg), |v| {
            frames.push(v.current.to_rows());
            records.push(*v.record);
        })
        .map_err(|e| e.to_string())?;
        frames.push(res.final_config.to_rows());
        to_json(&Run {
            labels: res.labels,
            n_clusters: res.n_clusters,
            terminal_step: res.terminal_step,
            stop_reason: res.stop_reason,
            frames,
            records,
        })
    }

    /// Engine radius next to the scalar recurrence for a regular simplex.
    pub fn simplex(kernel_name: &str, n: usize, h: f64, r0: f64, steps: usize) -> ApiResult {
        let k = kernel(kernel_name)?;
        let cmp = compare_sim_to_oracle(&k, n, n.saturating_sub(1).max(1), h, r0, steps).map_err(|e| e.to_string())?;
        to_json(&cmp)
    }

    #[derive(Serialize)]
    struct Profile {
        name: String,
        beta: Option<f64>,
        u: Vec<f64>,
        k: Vec<f64>,
        g: Vec<f64>,
    }

    /// `k(u)` and `g(u)` sampled on `[0, u_max]`.
    pub fn profile(kernel_name: &str, u_max: f64, samples: usize) -> ApiResult {
        let k = kernel(kernel_name)?;
        if !(u_max > 0.0 && u_max.is_finite()) || samples < 2 {
            return Err("need u_max > 0 and at least 2 samples".into());
        }
        let u: Vec<f64> = (0..samples).map(|i| u_max * i as f64 / (samples - 1) as f64).collect();
        to_json(&Profile {
            name: k.name().to_string(),
            beta: k.is_truncated().then(|| k.beta()),
            k: u.iter().map(|&x| k.k(x)).collect(),
            g: u.iter().map(|&x| k.g(x)).collect(),
            u,
        })
    }

    pub fn kernels() -> ApiResult {
        to_json(&KernelId::ADMISSIBLE.iter().map(|k| k.name()).collect::<Vec<_>>())
    }

    pub fn datasets() -> ApiResult {
        to_json(&Dataset::ALL.iter().map(|d| d.name()).collect::<Vec<_>>())
    }
}

fn js(r: api::ApiResult) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn dataset(name: &str, n: usize, seed: u32) -> Result<String, JsValue> {
    js(api::dataset(name, n, u64::from(seed)))
}

#[wasm_bindgen]
pub fn run(points_json: &str, kernel: &str, h: f64, max_iter: usize) -> Result<String, JsValue> {
    js(api::run(points_json, kernel, h, max_iter))
}

#[wasm_bindgen]
pub fn simplex(kernel: &str, n: usize, h: f64, r0: f64, steps: usize) -> Result<String, JsValue> {
    js(api::simplex(kernel, n, h, r0, steps))
}

#[wasm_bindgen]
pub fn profile(kernel: &str, u_max: f64, samples: usize) -> Result<String, JsValue> {
    js(api::profile(kernel, u_max, samples))
}

#[wasm_bindgen]
pub fn kernels() -> Result<String, JsValue> {
    js(api::kernels())
}

#[wasm_bindgen]
pub fn datasets() -> Result<String, JsValue> {
    js(api::datasets())
}
