//! Synthetic ground truth and phase-transition sweeps.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64`. For one instance
//! the draws happen in a fixed order: the Gaussian factor entries (mode by
//! mode, row-major), then the corruption support, then the corruption values.

use std::time::Instant;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::orthonormalize;
use crate::metrics::{diagnostics_with_factors, Diagnostics};
use crate::rpca::{solve_order_n, SolverConfig, Threshold};
use crate::tensor::{DenseMatrix, DenseTensor};
use crate::tucker::{hosvd, TuckerFactors};

/// A low-rank truth, its corruption and their diagnostics.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub x_star: DenseTensor,
    pub s_star: DenseTensor,
    /// HOSVD of `x_star`.
    pub factors_star: TuckerFactors,
    pub diagnostics: Diagnostics,
    pub seed: u64,
}

impl GroundTruth {
    /// Wraps an existing pair, computing factors and diagnostics at `ranks`.
    pub fn from_parts(x_star: DenseTensor, s_star: DenseTensor, ranks: &[usize], seed: u64) -> Result<Self> {
        if x_star.dims() != s_star.dims() {
            return Err(Error::ShapeMismatch(format!(
                "low-rank {:?} vs sparse {:?}",
                x_star.dims(),
                s_star.dims()
            )));
        }
        let factors_star = hosvd(&x_star, ranks)?;
        let diagnostics = diagnostics_with_factors(&x_star, &factors_star, Some(&s_star), ranks)?;
        Ok(Self {
            x_star,
            s_star,
            factors_star,
            diagnostics,
            seed,
        })
    }

    /// Truth with no corruption.
    pub fn from_low_rank(x_star: DenseTensor, ranks: &[usize]) -> Result<Self> {
        let s = DenseTensor::zeros(x_star.dims());
        Self::from_parts(x_star, s, ranks, 0)
    }

    /// `Y = X⋆ + S⋆`.
    pub fn observation(&self) -> DenseTensor {
        &self.x_star + &self.s_star
    }
}

/// Magnitude `m` of corruption values drawn uniformly from `[−m, m]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionScale {
    /// Mean entry magnitude of `X⋆`.
    MeanAbs,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthSpec {
    pub dims: Vec<usize>,
    /// Multilinear rank; all entries must be equal (superdiagonal core).
    pub ranks: Vec<usize>,
    pub kappa: f64,
    /// Fraction of corrupted entries.
    pub alpha: f64,
    pub scale: CorruptionScale,
    /// Optional cap on the nonzero fraction of every fiber. When set, the
    /// support is redrawn (at most 100 times) until the cap holds.
    pub max_fiber_fraction: Option<f64>,
    pub seed: u64,
}

const RESAMPLE_ATTEMPTS: usize = 100;

impl TruthSpec {
    /// `n x n x n` tensor of rank `(r, r, r)`.
    pub fn cube(n: usize, r: usize, kappa: f64, alpha: f64, seed: u64) -> Self {
        Self::uniform(3, n, r, kappa, alpha, seed)
    }

    /// Order-`order` tensor with equal extents and ranks.
    pub fn uniform(order: usize, n: usize, r: usize, kappa: f64, alpha: f64, seed: u64) -> Self {
        Self {
            dims: vec![n; order],
            ranks: vec![r; order],
            kappa,
            alpha,
            scale: CorruptionScale::MeanAbs,
            max_fiber_fraction: None,
            seed,
        }
    }

    pub fn with_fiber_cap(mut self, cap: f64) -> Self {
        self.max_fiber_fraction = Some(cap);
        self
    }

    fn validate(&self) -> Result<usize> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.dims.is_empty() || self.dims.len() != self.ranks.len() {
            return bad(format!("dims {:?} and ranks {:?} disagree", self.dims, self.ranks));
        }
        let r = self.ranks[0];
        if self.ranks.iter().any(|&q| q != r) {
            return bad(format!("superdiagonal core needs equal ranks, got {:?}", self.ranks));
        }
        for (&n, &q) in self.dims.iter().zip(&self.ranks) {
            if q == 0 || q > n {
                return Err(Error::RankOutOfRange { rank: q, max: n });
            }
        }
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be a finite value >= 1, got {}", self.kappa));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if let CorruptionScale::Fixed(m) = self.scale {
            if !(m >= 0.0 && m.is_finite()) {
                return bad(format!("corruption magnitude must be finite and nonnegative, got {m}"));
            }
        }
        if let Some(c) = self.max_fiber_fraction {
            if !(0.0..=1.0).contains(&c) {
                return bad(format!("fiber cap must lie in [0, 1], got {c}"));
            }
        }
        Ok(r)
    }
}

/// Uniformly random `n x r` matrix with orthonormal columns.
fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, r: usize) -> Result<DenseMatrix> {
    let mut g = Array2::<f64>::zeros((n, r));
    for v in g.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    orthonormalize(&g)
}

/// Superdiagonal core with `[G]_{i..i} = κ^{−i/(r−1)}` (0-based `i`).
pub fn superdiagonal_core(order: usize, r: usize, kappa: f64) -> DenseTensor {
    DenseTensor::from_fn(&vec![r; order], |idx| {
        if idx.iter().all(|&i| i == idx[0]) {
            if r == 1 {
                1.0
            } else {
                kappa.powf(-(idx[0] as f64) / (r - 1) as f64)
            }
        } else {
            0.0
        }
    })
}

/// Per-mode strides of the row-major layout.
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Identifier of the mode-`k` fiber through each linear index.
fn fiber_id(lin: usize, k: usize, dims: &[usize], strides: &[usize]) -> usize {
    let hi = lin / (strides[k] * dims[k]);
    let lo = lin % strides[k];
    hi * strides[k] + lo
}

/// Greedy capped fill over a fresh permutation, retried up to the attempt limit.
fn capped_support(rng: &mut ChaCha8Rng, dims: &[usize], count: usize, cap: f64) -> Result<Vec<usize>> {
    let total: usize = dims.iter().product();
    let caps: Vec<usize> = dims.iter().map(|&n| (cap * n as f64 + 1e-9).floor() as usize).collect();
    let limit = dims
        .iter()
        .zip(&caps)
        .map(|(&n, &c)| c * (total / n))
        .min()
        .unwrap_or(0);
    if count > limit {
        return Err(Error::Infeasible(format!(
            "{count} corrupted entries exceed the {limit} allowed by a per-fiber cap of {cap}"
        )));
    }
    let st = strides(dims);
    let mut order: Vec<usize> = (0..total).collect();
    for _ in 0..RESAMPLE_ATTEMPTS {
        order.shuffle(rng);
        let mut used: Vec<Vec<usize>> = dims.iter().map(|&n| vec![0; total / n]).collect();
        let mut chosen = Vec::with_capacity(count);
        for &lin in &order {
            if chosen.len() == count {
                break;
            }
            let ids: Vec<usize> = (0..dims.len()).map(|k| fiber_id(lin, k, dims, &st)).collect();
            if ids.iter().enumerate().all(|(k, &f)| used[k][f] < caps[k]) {
                for (k, &f) in ids.iter().enumerate() {
                    used[k][f] += 1;
                }
                chosen.push(lin);
            }
        }
        if chosen.len() == count {
            chosen.sort_unstable();
            return Ok(chosen);
        }
    }
    Err(Error::Infeasible(format!(
        "no support of {count} entries met the per-fiber cap of {cap} after {RESAMPLE_ATTEMPTS} attempts"
    )))
}

/// Draws a random instance: orthonormal factors, superdiagonal core, and a
/// uniformly random corruption support of `round(α Π n)` entries.
pub fn gen_truth(spec: &TruthSpec) -> Result<GroundTruth> {
    let r = spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let factors = spec
        .dims
        .iter()
        .map(|&n| random_orthonormal(&mut rng, n, r))
        .collect::<Result<Vec<_>>>()?;
    let core = superdiagonal_core(spec.dims.len(), r, spec.kappa);
    let truth_factors = TuckerFactors::new(factors, core)?;
    let x_star = truth_factors.reconstruct()?;

    let total = x_star.len();
    let count = ((spec.alpha * total as f64).round() as usize).min(total);
    let support = match spec.max_fiber_fraction {
        Some(cap) => capped_support(&mut rng, &spec.dims, count, cap)?,
        None => {
            let mut s = sample(&mut rng, total, count).into_vec();
            s.sort_unstable();
            s
        }
    };
    let m = match spec.scale {
        CorruptionScale::MeanAbs => x_star.values().iter().map(|v| v.abs()).sum::<f64>() / total as f64,
        CorruptionScale::Fixed(m) => m,
    };
    let mut s_star = DenseTensor::zeros(&spec.dims);
    if m > 0.0 {
        let vals = s_star.values_mut();
        for &i in &support {
            vals[i] = rng.random_range(-m..=m);
        }
    }
    GroundTruth::from_parts(x_star, s_star, &spec.ranks, spec.seed)
}

/// Grid of synthetic experiments with `trials` instances per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub ranks: Vec<usize>,
    pub alphas: Vec<f64>,
    pub kappas: Vec<f64>,
    /// Extents `n`; each instance is `n x ... x n`.
    pub dims: Vec<usize>,
    pub order: usize,
    pub trials: usize,
    pub seed: u64,
    /// Solver settings; `rank` is replaced per cell.
    pub base: SolverConfig,
}

impl SweepSpec {
    pub fn new(ranks: Vec<usize>, alphas: Vec<f64>, kappas: Vec<f64>, dims: Vec<usize>) -> Self {
        Self {
            ranks,
            alphas,
            kappas,
            dims,
            order: 3,
            trials: 1,
            seed: crate::rpca::DEFAULT_SEED,
            base: SolverConfig::new(Vec::new()).with_thresholds(Threshold::Oracle, Threshold::Oracle),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranks.is_empty() || self.alphas.is_empty() || self.kappas.is_empty() || self.dims.is_empty() {
            return Err(Error::InvalidConfig("sweep grids must be nonempty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("sweep needs at least one trial".into()));
        }
        if self.order < 3 {
            return Err(Error::InvalidConfig(format!("sweep order must be >= 3, got {}", self.order)));
        }
        Ok(())
    }

    /// Parses the line-oriented sweep format.
    ///
    /// ```text
    /// # comment
    /// ranks  = 2, 3
    /// alphas = 0.05, 0.1
    /// kappas = 5
    /// n      = 30
    /// trials = 5
    /// ```
    ///
    /// Grid keys (`ranks`, `alphas`, `kappas`, `n` or `dims`) take
    /// comma-separated lists; scalar keys are `trials`, `seed`, `order`,
    /// `eta`, `rho`, `iters`, `stop_tol`, `zeta0` and `zeta1` (a number,
    /// `auto` or `oracle`). Keys may appear once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::new(Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |field: &str, message: String| Error::SpecParse {
                line,
                field: field.to_string(),
                message,
            };
            let Some((key, value)) = content.split_once('=') else {
                return Err(err("", format!("expected `key = value`, got `{content}`")));
            };
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(err(key, "missing value".into()));
            }
            let canonical = if key == "dims" { "n" } else { key };
            if seen.iter().any(|k| k == canonical) {
                return Err(err(key, "duplicate key".into()));
            }
            seen.push(canonical.to_string());

            let list = |parse: &dyn Fn(&str) -> Option<f64>| -> Result<Vec<f64>> {
                value
                    .split(',')
                    .map(|item| {
                        let item = item.trim();
                        parse(item).ok_or_else(|| err(key, format!("cannot parse `{item}`")))
                    })
                    .collect()
            };
            let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
            let uint = |s: &str| s.parse::<usize>().ok().map(|v| v as f64);
            let scalar = |parse: &dyn Fn(&str) -> Option<f64>| -> Result<f64> {
                parse(value).ok_or_else(|| err(key, format!("cannot parse `{value}`")))
            };
            let threshold = || -> Result<Threshold> {
                match value {
                    "auto" => Ok(Threshold::Auto),
                    "oracle" => Ok(Threshold::Oracle),
                    v => num(v)
                        .filter(|x| *x >= 0.0)
                        .map(Threshold::Value)
                        .ok_or_else(|| err(key, format!("expected a nonnegative number, `auto` or `oracle`, got `{v}`"))),
                }
            };
            match canonical {
                "ranks" => spec.ranks = list(&uint)?.into_iter().map(|v| v as usize).collect(),
                "alphas" => spec.alphas = list(&num)?,
                "kappas" => spec.kappas = list(&num)?,
                "n" => spec.dims = list(&uint)?.into_iter().map(|v| v as usize).collect(),
                "trials" => spec.trials = scalar(&uint)? as usize,
                "order" => spec.order = scalar(&uint)? as usize,
                "iters" => spec.base.max_iters = scalar(&uint)? as usize,
                "seed" => {
                    spec.seed = value
                        .parse::<u64>()
                        .map_err(|_| err(key, format!("cannot parse `{value}`")))?
                }
                "eta" => spec.base.eta = scalar(&num)?,
                "rho" => spec.base.rho = Some(scalar(&num)?),
                "stop_tol" => spec.base.stop_tol = scalar(&num)?,
                "zeta0" => spec.base.zeta0 = threshold()?,
                "zeta1" => spec.base.zeta1 = threshold()?,
                _ => return Err(err(key, "unknown key".into())),
            }
        }
        for (key, missing) in [
            ("ranks", spec.ranks.is_empty()),
            ("alphas", spec.alphas.is_empty()),
            ("kappas", spec.kappas.is_empty()),
            ("n", spec.dims.is_empty()),
        ] {
            if missing {
                return Err(Error::SpecParse {
                    line: text.lines().count(),
                    field: key.into(),
                    message: "required key is missing".into(),
                });
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Aggregated outcome of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellRecord {
    pub r: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub n: usize,
    pub trials: usize,
    /// Trials that ended in an error; excluded from the medians.
    pub failures: usize,
    pub median_rel_error: f64,
    pub median_log10_rel_error: f64,
    pub median_iterations: f64,
    pub median_seconds: f64,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub cells: Vec<CellRecord>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,alpha,kappa,median_log10_rel_error,median_iterations,median_seconds,n,trials,failures\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                c.r, c.alpha, c.kappa, c.median_log10_rel_error, c.median_iterations, c.median_seconds, c.n, c.trials, c.failures
            ));
        }
        out
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of a trial: the base seed folded with the cell's grid indices
/// `[rank, alpha, kappa, n]` and the trial index.
pub fn cell_seed(base: u64, coords: [usize; 4], trial: usize) -> u64 {
    coords
        .iter()
        .chain(std::iter::once(&trial))
        .fold(mix(base), |h, &c| mix(h ^ c as u64))
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

struct TrialOutcome {
    rel_error: f64,
    iterations: f64,
    seconds: f64,
}

/// Runs one trial of a cell: generate, solve with the truth as reference.
pub fn run_trial(spec: &SweepSpec, coords: [usize; 4], trial: usize) -> Result<(GroundTruth, crate::rpca::SolveOutput)> {
    let [ri, ai, ki, ni] = coords;
    let seed = cell_seed(spec.seed, coords, trial);
    let truth = gen_truth(&TruthSpec::uniform(
        spec.order,
        spec.dims[ni],
        spec.ranks[ri],
        spec.kappas[ki],
        spec.alphas[ai],
        seed,
    ))?;
    let mut cfg = spec.base.clone();
    cfg.rank = vec![spec.ranks[ri]; spec.order];
    cfg.seed = seed;
    let out = solve_order_n(&truth.observation(), &cfg, Some(&truth))?;
    Ok((truth, out))
}

/// Runs every trial of every cell in parallel. Errors are counted per cell.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for ri in 0..spec.ranks.len() {
        for ai in 0..spec.alphas.len() {
            for ki in 0..spec.kappas.len() {
                for ni in 0..spec.dims.len() {
                    for trial in 0..spec.trials {
                        jobs.push(([ri, ai, ki, ni], trial));
                    }
                }
            }
        }
    }
    let outcomes: Vec<std::result::Result<TrialOutcome, String>> = jobs
        .par_iter()
        .map(|&(coords, trial)| {
            let start = Instant::now();
            let (truth, out) = run_trial(spec, coords, trial).map_err(|e| e.to_string())?;
            let rel_error = (&out.low_rank - &truth.x_star).fro_norm() / truth.x_star.fro_norm();
            Ok(TrialOutcome {
                rel_error,
                iterations: out.iterations as f64,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect();

    let cells = jobs
        .chunks(spec.trials)
        .zip(outcomes.chunks(spec.trials))
        .map(|(job, results)| {
            let [ri, ai, ki, ni] = job[0].0;
            let ok: Vec<&TrialOutcome> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
            let errors: Vec<String> = results.iter().filter_map(|r| r.as_ref().err().cloned()).collect();
            let mut rel: Vec<f64> = ok.iter().map(|o| o.rel_error).collect();
            let mut iters: Vec<f64> = ok.iter().map(|o| o.iterations).collect();
            let mut secs: Vec<f64> = ok.iter().map(|o| o.seconds).collect();
            let median_rel_error = median(&mut rel);
            CellRecord {
                r: spec.ranks[ri],
                alpha: spec.alphas[ai],
                kappa: spec.kappas[ki],
                n: spec.dims[ni],
                trials: spec.trials,
                failures: errors.len(),
                median_rel_error,
                median_log10_rel_error: median_rel_error.max(1e-300).log10(),
                median_iterations: median(&mut iters),
                median_seconds: median(&mut secs),
                errors,
            }
        })
        .collect();
    Ok(SweepResult { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_defect;
    use crate::metrics::{entry_fraction, sparsity_fraction};

    #[test]
    fn no_corruption_at_alpha_zero() {
        let t = gen_truth(&TruthSpec::cube(10, 2, 3.0, 0.0, 1)).unwrap();
        assert_eq!(t.s_star.nnz(), 0);
    }

    #[test]
    fn kappa_one_core() {
        let core = superdiagonal_core(3, 2, 1.0);
        assert_eq!(core.get(&[0, 0, 0]), 1.0);
        assert_eq!(core.get(&[1, 1, 1]), 1.0);
        assert_eq!(core.get(&[0, 1, 1]), 0.0);
        let t = gen_truth(&TruthSpec::cube(12, 2, 1.0, 0.0, 4)).unwrap();
        assert!((t.diagnostics.kappa - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kappa_ten_core_values() {
        let core = superdiagonal_core(3, 3, 10.0);
        assert_eq!(core.get(&[0, 0, 0]), 1.0);
        assert!((core.get(&[1, 1, 1]) - 10f64.powf(-0.5)).abs() < 1e-15);
        assert!((core.get(&[2, 2, 2]) - 0.1).abs() < 1e-15);
        assert_eq!(superdiagonal_core(3, 1, 7.0).values(), &[1.0]);
    }

    #[test]
    fn seeded_instance_measurements() {
        let t = gen_truth(&TruthSpec::cube(30, 2, 10.0, 0.1, 7)).unwrap();
        assert!((t.diagnostics.kappa - 10.0).abs() < 1e-6);
        assert!((entry_fraction(&t.s_star) - 0.1).abs() < 0.002);
        assert!((&t.factors_star.reconstruct().unwrap() - &t.x_star).inf_norm() < 1e-10);
    }

    #[test]
    fn factors_orthonormal_and_seed_deterministic() {
        let spec = TruthSpec::cube(15, 3, 4.0, 0.05, 11);
        let a = gen_truth(&spec).unwrap();
        let b = gen_truth(&spec).unwrap();
        assert_eq!(a.x_star, b.x_star);
        assert_eq!(a.s_star, b.s_star);
        for u in &a.factors_star.factors {
            assert!(orthonormality_defect(u) < 1e-10);
        }
        let c = gen_truth(&TruthSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.x_star, c.x_star);
    }

    #[test]
    fn corruption_bounded_by_mean_magnitude() {
        let t = gen_truth(&TruthSpec::cube(12, 2, 2.0, 0.2, 3)).unwrap();
        let m = t.x_star.values().iter().map(|v| v.abs()).sum::<f64>() / t.x_star.len() as f64;
        assert!(t.s_star.inf_norm() <= m);
        assert_eq!(t.s_star.nnz(), (0.2 * 1728.0f64).round() as usize);
    }

    #[test]
    fn fiber_cap_holds_or_fails_cleanly() {
        let t = gen_truth(&TruthSpec::cube(20, 2, 2.0, 0.1, 5).with_fiber_cap(0.2)).unwrap();
        assert!(sparsity_fraction(&t.s_star) <= 0.2 + 1e-12);
        assert_eq!(t.s_star.nnz(), 800);
        let err = gen_truth(&TruthSpec::cube(30, 2, 5.0, 0.05, 1).with_fiber_cap(0.05)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn fiber_ids_cover_each_fiber_once() {
        let dims = [2, 3, 4];
        let st = strides(&dims);
        for k in 0..3 {
            let mut counts = vec![0; 24 / dims[k]];
            for lin in 0..24 {
                counts[fiber_id(lin, k, &dims, &st)] += 1;
            }
            assert!(counts.iter().all(|&c| c == dims[k]));
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(gen_truth(&TruthSpec::cube(5, 0, 2.0, 0.1, 0)).is_err());
        assert!(gen_truth(&TruthSpec::cube(5, 6, 2.0, 0.1, 0)).is_err());
        assert!(gen_truth(&TruthSpec::cube(5, 2, 0.5, 0.1, 0)).is_err());
        assert!(gen_truth(&TruthSpec::cube(5, 2, 2.0, 1.5, 0)).is_err());
        let mut s = TruthSpec::cube(5, 2, 2.0, 0.1, 0);
        s.ranks = vec![2, 1, 2];
        assert!(gen_truth(&s).is_err());
    }

    #[test]
    fn cell_seeds_distinct() {
        let a = cell_seed(1, [0, 0, 0, 0], 0);
        assert_ne!(a, cell_seed(1, [0, 0, 0, 0], 1));
        assert_ne!(a, cell_seed(1, [1, 0, 0, 0], 0));
        assert_ne!(a, cell_seed(2, [0, 0, 0, 0], 0));
        assert_eq!(a, cell_seed(1, [0, 0, 0, 0], 0));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn parse_spec() {
        let text = "# grid\nranks = 2, 3\nalphas = 0.05,0.1\nkappas = 5 # trailing\ndims = 30\ntrials = 4\nseed = 9\nzeta0 = oracle\nzeta1 = 0.5\neta = 0.3\n";
        let s = SweepSpec::parse(text).unwrap();
        assert_eq!(s.ranks, vec![2, 3]);
        assert_eq!(s.alphas, vec![0.05, 0.1]);
        assert_eq!(s.kappas, vec![5.0]);
        assert_eq!(s.dims, vec![30]);
        assert_eq!(s.trials, 4);
        assert_eq!(s.seed, 9);
        assert_eq!(s.base.zeta1, Threshold::Value(0.5));
        assert_eq!(s.base.eta, 0.3);
    }

    #[test]
    fn parse_errors_carry_context() {
        let e = SweepSpec::parse("ranks = 2\nalphas = 0.1, x\n").unwrap_err();
        assert!(matches!(e, Error::SpecParse { line: 2, ref field, .. } if field == "alphas"));
        let e = SweepSpec::parse("ranks = 2\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, Error::SpecParse { line: 2, ref field, .. } if field == "bogus"));
        let e = SweepSpec::parse("ranks = 2\nranks = 3\n").unwrap_err();
        assert!(matches!(e, Error::SpecParse { line: 2, .. }));
        let e = SweepSpec::parse("ranks 2\n").unwrap_err();
        assert!(matches!(e, Error::SpecParse { line: 1, .. }));
        let e = SweepSpec::parse("ranks = 2\nalphas = 0\nkappas = 1\n").unwrap_err();
        assert!(matches!(e, Error::SpecParse { ref field, .. } if field == "n"));
        assert!(SweepSpec::parse("ranks = 2\nalphas = 0\nkappas = 1\nn = 5\ntrials = 0\n").is_err());
    }

    #[test]
    fn trivial_sweep_recovers() {
        let mut spec = SweepSpec::new(vec![2], vec![0.0], vec![2.0], vec![10]);
        spec.base.max_iters = 100;
        let res = run_sweep(&spec).unwrap();
        assert_eq!(res.cells.len(), 1);
        assert_eq!(res.cells[0].failures, 0);
        assert!(res.cells[0].median_rel_error <= 1e-9);
        assert!(res.to_csv().starts_with("r,alpha,kappa,median_log10_rel_error"));
    }
}
