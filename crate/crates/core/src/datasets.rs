//! Seeded synthetic point sets: the usual 2-D clustering benchmarks and a
//! configuration fuzzer that plants pairs near the truncation radius.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::configuration::Configuration;
use crate::error::{BmsError, Result};
use crate::kernels::{KernelSpec, TruncationClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    NoisyCircles,
    NoisyMoons,
    Varied,
    Aniso,
    Blobs,
    NoStructure,
}

impl Dataset {
    pub const ALL: [Dataset; 6] = [
        Dataset::NoisyCircles,
        Dataset::NoisyMoons,
        Dataset::Varied,
        Dataset::Aniso,
        Dataset::Blobs,
        Dataset::NoStructure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::NoisyCircles => "noisy_circles",
            Dataset::NoisyMoons => "noisy_moons",
            Dataset::Varied => "varied",
            Dataset::Aniso => "aniso",
            Dataset::Blobs => "blobs",
            Dataset::NoStructure => "no_structure",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = BmsError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Dataset::ALL
            .into_iter()
            .find(|d| d.name() == key)
            .ok_or_else(|| BmsError::Parameter {
                name: "dataset",
                reason: format!("unknown dataset `{s}`"),
            })
    }
}

/// Points plus the generating component of each (0 for `no_structure`).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoints {
    pub points: Configuration,
    pub truth: Vec<usize>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn blobs(rng: &mut ChaCha8Rng, n: usize, centers: &[[f64; 2]], stds: &[f64]) -> (Vec<[f64; 2]>, Vec<usize>) {
    let k = centers.len();
    let mut rows = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for c in 0..k {
        let count = n / k + usize::from(c < n % k);
        for _ in 0..count {
            rows.push([
                centers[c][0] + stds[c] * normal(rng),
                centers[c][1] + stds[c] * normal(rng),
            ]);
            truth.push(c);
        }
    }
    (rows, truth)
}

/// Generates `n` points of the named benchmark from `seed`.
pub fn generate(dataset: Dataset, n: usize, seed: u64) -> Result<LabeledPoints> {
    if n < 2 {
        return Err(BmsError::Parameter {
            name: "n",
            reason: format!("need at least 2 points, got {n}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, truth) = match dataset {
        Dataset::NoisyCircles => {
            let outer = n / 2 + n % 2;
            let mut rows = Vec::with_capacity(n);
            let mut truth = Vec::with_capacity(n);
            for i in 0..n {
                let (count, idx, radius, label) = if i < outer {
                    (outer, i, 1.0, 0)
                } else {
                    (n - outer, i - outer, 0.5, 1)
                };
                let a = 2.0 * PI * idx as f64 / count as f64;
                rows.push([
                    radius * a.cos() + 0.05 * normal(&mut rng),
                    radius * a.sin() + 0.05 * normal(&mut rng),
                ]);
                truth.push(label);
            }
            (rows, truth)
        }
        Dataset::NoisyMoons => {
            let upper = n / 2 + n % 2;
            let mut rows = Vec::with_capacity(n);
            let mut truth = Vec::with_capacity(n);
            for i in 0..n {
                let (x, y, label) = if i < upper {
                    let a = PI * i as f64 / (upper - 1).max(1) as f64;
                    (a.cos(), a.sin(), 0)
                } else {
                    let a = PI * (i - upper) as f64 / (n - upper - 1).max(1) as f64;
                    (1.0 - a.cos(), 0.5 - a.sin(), 1)
                };
                rows.push([x + 0.05 * normal(&mut rng), y + 0.05 * normal(&mut rng)]);
                truth.push(label);
            }
            (rows, truth)
        }
        Dataset::Blobs => blobs(&mut rng, n, &[[-5.0, -5.0], [0.0, 4.0], [6.0, -1.0]], &[1.0; 3]),
        Dataset::Varied => blobs(&mut rng, n, &[[-5.0, -5.0], [0.0, 4.0], [6.0, -1.0]], &[1.0, 2.5, 0.5]),
        Dataset::Aniso => {
            let (rows, truth) = blobs(&mut rng, n, &[[-5.0, -5.0], [0.0, 4.0], [6.0, -1.0]], &[1.0; 3]);
            let rows = rows
                .into_iter()
                .map(|[x, y]| [0.6 * x - 0.4 * y, -0.6 * x + 0.8 * y])
                .collect();
            (rows, truth)
        }
        Dataset::NoStructure => {
            let rows = (0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
            (rows, vec![0; n])
        }
    };
    // shuffle so that labels are not ordered by generating component
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let rows: Vec<[f64; 2]> = order.iter().map(|&i| rows[i]).collect();
    let truth = order.iter().map(|&i| truth[i]).collect();
    Ok(LabeledPoints {
        points: Configuration::from_rows(&rows)?,
        truth,
    })
}

/// `n` points with independent `N(0, scale^2)` coordinates.
pub fn random_configuration<R: Rng>(rng: &mut R, n: usize, d: usize, scale: f64) -> Result<Configuration> {
    let dist = Normal::new(0.0, scale).map_err(|e| BmsError::Parameter {
        name: "scale",
        reason: e.to_string(),
    })?;
    Configuration::new(n, d, (0..n * d).map(|_| dist.sample(rng)).collect())
}

/// Offsets from `beta h` (in units of `h`) used for planted near-boundary pairs.
///
/// Non-smoothly truncated weights jump at the boundary, so any offset is a
/// clean test. Smoothly truncated weights vanish continuously there, so
/// pairs just inside the radius are only planted where the weight is still
/// well above rounding.
pub fn boundary_offsets(kernel: &KernelSpec) -> &'static [f64] {
    match kernel.truncation_class() {
        TruncationClass::NonSmoothlyTruncated => &[
            0.0, 1e-12, -1e-12, 1e-9, -1e-9, 1e-6, -1e-6, 1e-3, -1e-3, 1e-2, -1e-2,
        ],
        _ => &[1e-12, 1e-9, 1e-6, 1e-3, -1e-3, 1e-2, -1e-2],
    }
}

fn unit_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// A small random configuration mixing coincident groups, well-separated
/// groups, generic clouds and pairs planted at `beta h + offset`.
///
/// Distinct points that end up joined are at least about `1e-3 h` apart, so
/// a non-singular configuration never has a vanishing fixed-point residual
/// by accident.
pub fn fuzz_configuration<R: Rng>(rng: &mut R, kernel: &KernelSpec, h: f64, d: usize) -> Result<Configuration> {
    let reach = if kernel.is_truncated() { kernel.beta() * h } else { 3.0 * h };
    let mode = rng.gen_range(0..4);
    let groups = rng.gen_range(1..=5);
    let mut centers: Vec<Vec<f64>> = Vec::new();
    match mode {
        // generic cloud
        0 => {
            let spread = reach * [0.3, 1.0, 3.0][rng.gen_range(0..3)];
            for _ in 0..rng.gen_range(2..=12) {
                centers.push((0..d).map(|_| spread * rng.gen::<f64>()).collect());
            }
        }
        // groups far beyond each other's reach
        _ => {
            let box_side = 4.0 * reach * groups as f64;
            let mut attempts = 0;
            while centers.len() < groups && attempts < 1000 {
                attempts += 1;
                let c: Vec<f64> = (0..d).map(|_| box_side * rng.gen::<f64>()).collect();
                let clear = centers.iter().all(|o| {
                    o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() > 1.5 * reach
                });
                if clear {
                    centers.push(c);
                }
            }
        }
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for c in &centers {
        let copies = if mode == 0 { 1 } else { rng.gen_range(1..=3) };
        for _ in 0..copies {
            rows.push(c.clone());
        }
    }
    if mode >= 2 && kernel.is_truncated() {
        let offsets = boundary_offsets(kernel);
        let plants = rng.gen_range(1..=2).min(centers.len());
        for c in centers.iter().take(plants) {
            let delta = offsets[rng.gen_range(0..offsets.len())] * h;
            let u = unit_vector(rng, d);
            rows.push(c.iter().zip(&u).map(|(a, b)| a + (reach + delta) * b).collect());
        }
    }
    if mode == 3 && !kernel.is_truncated() {
        // a single coincident group is the only singular shape without truncation
        let c = rows[0].clone();
        rows.iter_mut().for_each(|r| r.clone_from(&c));
    }
    Configuration::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelId;

    #[test]
    fn generators_are_seeded_and_sized() {
        for ds in Dataset::ALL {
            let a = generate(ds, 500, 3).unwrap();
            assert_eq!((a.points.n(), a.points.d(), a.truth.len()), (500, 2, 500));
            assert_eq!(a, generate(ds, 500, 3).unwrap());
            assert_ne!(a.points, generate(ds, 500, 4).unwrap().points);
            assert_eq!(ds.name().parse::<Dataset>().unwrap(), ds);
        }
        assert!("spirals".parse::<Dataset>().is_err());
    }

    #[test]
    fn circles_have_two_radii() {
        let lp = generate(Dataset::NoisyCircles, 400, 1).unwrap();
        for (p, &t) in lp.points.points().zip(&lp.truth) {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let want = if t == 0 { 1.0 } else { 0.5 };
            assert!((r - want).abs() < 0.3);
        }
    }

    #[test]
    fn fuzz_cases_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for id in [KernelId::Epanechnikov, KernelId::Biweight, KernelId::Gaussian] {
            let k = KernelSpec::builtin(id).unwrap();
            for d in 1..=3 {
                for _ in 0..50 {
                    let c = fuzz_configuration(&mut rng, &k, 0.7, d).unwrap();
                    assert_eq!(c.d(), d);
                    assert!(c.n() >= 1);
                }
            }
        }
    }
}
