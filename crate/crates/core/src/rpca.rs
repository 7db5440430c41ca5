//! Scaled gradient descent for tensor robust PCA.
//!
//! Each iteration first re-estimates the corruption by soft-thresholding the
//! residual `Y − X_t` at `ζ_{t+1}`, then takes one preconditioned gradient
//! step on every Tucker factor and on the core:
//!
//! ```text
//! U^(k) <- (1−η) U^(k) − η M_k(S − Y) Ŭ^(k) (Ŭ^(k)ᵀŬ^(k))⁻¹
//! G     <- (1−η) G − η ((U^(1)ᵀU^(1))⁻¹U^(1)ᵀ, …) · (S − Y)
//! ```
//!
//! Thresholds follow `ζ_{t+1} = ρ ζ_t` for `t ≥ 1`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::metrics::entrywise_scale;
use crate::synth::GroundTruth;
use crate::tensor::{matricize, multilinear_mul, DenseMatrix, DenseTensor};
use crate::tucker::{hosvd, TuckerFactors};

/// How a threshold is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Data-driven rule (see [`ThresholdSchedule`]).
    Auto,
    /// Theory value computed from a supplied ground truth.
    Oracle,
    Value(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Multilinear rank.
    pub rank: Vec<usize>,
    /// Step size η.
    pub eta: f64,
    pub zeta0: Threshold,
    pub zeta1: Threshold,
    /// Threshold decay; `None` means `1 − 0.45η`.
    pub rho: Option<f64>,
    pub max_iters: usize,
    /// Stop when `‖X_{t+1} − X_t‖_F / ‖X_t‖_F` drops below this.
    pub stop_tol: f64,
    /// Modes whose factor is updated; `None` updates all.
    pub active_modes: Option<Vec<bool>>,
    /// Corruption fraction assumed by the automatic `ζ_0` rule.
    pub alpha_hat: f64,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 0x5eed;

impl SolverConfig {
    pub fn new(rank: Vec<usize>) -> Self {
        Self {
            rank,
            eta: 0.25,
            zeta0: Threshold::Auto,
            zeta1: Threshold::Auto,
            rho: None,
            max_iters: 200,
            stop_tol: 1e-12,
            active_modes: None,
            alpha_hat: 0.1,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_thresholds(mut self, zeta0: Threshold, zeta1: Threshold) -> Self {
        self.zeta0 = zeta0;
        self.zeta1 = zeta1;
        self
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn with_stop_tol(mut self, tol: f64) -> Self {
        self.stop_tol = tol;
        self
    }

    pub fn with_active_modes(mut self, mask: Vec<bool>) -> Self {
        self.active_modes = Some(mask);
        self
    }

    pub fn with_alpha_hat(mut self, alpha_hat: f64) -> Self {
        self.alpha_hat = alpha_hat;
        self
    }

    /// Effective decay rate.
    pub fn decay(&self) -> f64 {
        self.rho.unwrap_or(1.0 - 0.45 * self.eta)
    }

    pub fn is_active(&self, mode: usize) -> bool {
        self.active_modes.as_ref().is_none_or(|m| m[mode])
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.rank.len() != order {
            return bad(format!("rank has {} entries for an order-{order} tensor", self.rank.len()));
        }
        if self.rank.contains(&0) {
            return bad("rank entries must be at least 1".into());
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        let rho = self.decay();
        if !(rho > 0.0 && rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {rho}"));
        }
        if !(self.stop_tol >= 0.0) {
            return bad(format!("stop_tol must be nonnegative, got {}", self.stop_tol));
        }
        if !(0.0..=1.0).contains(&self.alpha_hat) {
            return bad(format!("alpha_hat must lie in [0, 1], got {}", self.alpha_hat));
        }
        for (name, t) in [("zeta0", self.zeta0), ("zeta1", self.zeta1)] {
            if let Threshold::Value(v) = t {
                if !(v >= 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be a finite nonnegative value, got {v}"));
                }
            }
        }
        if let Some(mask) = &self.active_modes {
            if mask.len() != order {
                return bad(format!("mode mask has {} entries for an order-{order} tensor", mask.len()));
            }
        }
        Ok(())
    }
}

/// Resolved thresholds: `ζ_0`, then `ζ_t = ζ_1 ρ^{t−1}` for `t ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdSchedule {
    pub zeta0: f64,
    pub zeta1: f64,
    pub rho: f64,
}

impl ThresholdSchedule {
    pub fn zeta(&self, t: usize) -> f64 {
        match t {
            0 => self.zeta0,
            _ => self.zeta1 * self.rho.powi(t as i32 - 1),
        }
    }

    /// First `len` thresholds.
    pub fn sequence(&self, len: usize) -> Vec<f64> {
        (0..len).map(|t| self.zeta(t)).collect()
    }

    /// Builds the schedule from a config, the observation, the initial state
    /// and (optionally) the truth.
    ///
    /// `ζ_0`: `Auto` is the `(1 − α̂)` quantile of `|y|` (or `‖y‖_∞` when
    /// `α̂ = 0`); `Oracle` is `‖X⋆‖_∞`.
    /// `ζ_1`: `Oracle` is `8 sqrt(μ^N Π r / Π n) σ_min(X⋆)`; `Auto` uses the
    /// oracle value when a truth is supplied and otherwise
    /// `2 ‖y − S_0 − X_0‖_∞` from the initialization.
    pub fn resolve(cfg: &SolverConfig, y: &DenseTensor, init: &SolverState, truth: Option<&GroundTruth>) -> Result<Self> {
        let zeta1 = match (cfg.zeta1, truth) {
            (Threshold::Value(v), _) => v,
            (Threshold::Oracle, None) => {
                return Err(Error::InvalidConfig("oracle zeta1 requires a ground truth".into()))
            }
            (Threshold::Oracle | Threshold::Auto, Some(t)) => oracle_zeta1(t),
            (Threshold::Auto, None) => {
                let x0 = init.factors.reconstruct()?;
                2.0 * (&(y - &init.sparse) - &x0).inf_norm()
            }
        };
        Ok(Self {
            zeta0: init.zeta,
            zeta1,
            rho: cfg.decay(),
        })
    }
}

/// `ζ_0` per the config rule.
pub fn resolve_zeta0(cfg: &SolverConfig, y: &DenseTensor, truth: Option<&GroundTruth>) -> Result<f64> {
    match (cfg.zeta0, truth) {
        (Threshold::Value(v), _) => Ok(v),
        (Threshold::Oracle, Some(t)) => Ok(t.x_star.inf_norm()),
        (Threshold::Oracle, None) => Err(Error::InvalidConfig("oracle zeta0 requires a ground truth".into())),
        (Threshold::Auto, _) => Ok(abs_quantile(y, 1.0 - cfg.alpha_hat)),
    }
}

/// `8 sqrt(μ^N Π r / Π n) σ_min`.
pub fn oracle_zeta1(truth: &GroundTruth) -> f64 {
    let d = &truth.diagnostics;
    8.0 * entrywise_scale(d.mu, &truth.factors_star.ranks(), truth.x_star.dims(), d.sigma_min)
}

/// Nearest-rank quantile of the entry magnitudes.
fn abs_quantile(y: &DenseTensor, q: f64) -> f64 {
    if q >= 1.0 {
        return y.inf_norm();
    }
    let mut mags: Vec<f64> = y.values().iter().map(|v| v.abs()).collect();
    let rank = ((q * mags.len() as f64).ceil() as usize).clamp(1, mags.len());
    let (_, v, _) = mags.select_nth_unstable_by(rank - 1, f64::total_cmp);
    *v
}

/// Entrywise `sgn(x) max(0, |x| − ζ)`. Entries with `|x| = ζ` become zero.
pub fn soft_shrink(t: &DenseTensor, zeta: f64) -> Result<DenseTensor> {
    if !(zeta >= 0.0) {
        return Err(Error::InvalidConfig(format!("threshold must be nonnegative, got {zeta}")));
    }
    Ok(t.map(|x| {
        let m = x.abs() - zeta;
        if m > 0.0 {
            x.signum() * m
        } else {
            0.0
        }
    }))
}

/// Solver state `(F_t, S_t, ζ_t, t)`.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub factors: TuckerFactors,
    pub sparse: DenseTensor,
    pub zeta: f64,
    pub iter: usize,
}

/// `S_0 = shrink(y, ζ_0)`, `F_0 = HOSVD_r(y − S_0)`.
pub fn spectral_init(y: &DenseTensor, cfg: &SolverConfig, truth: Option<&GroundTruth>) -> Result<SolverState> {
    let zeta0 = resolve_zeta0(cfg, y, truth)?;
    let sparse = soft_shrink(y, zeta0)?;
    let factors = hosvd(&(y - &sparse), &cfg.rank)?;
    Ok(SolverState {
        factors,
        sparse,
        zeta: zeta0,
        iter: 0,
    })
}

/// `S_{t+1} = shrink(y − reconstruct(F_t), ζ_{t+1})`.
pub fn update_sparse(factors: &TuckerFactors, y: &DenseTensor, zeta_next: f64) -> Result<DenseTensor> {
    soft_shrink(&(y - &factors.reconstruct()?), zeta_next)
}

/// One scaled gradient step on all factors and the core, given `S_{t+1}`.
///
/// Factors of inactive modes are carried over unchanged.
pub fn scaled_step(factors: &TuckerFactors, y: &DenseTensor, s_next: &DenseTensor, cfg: &SolverConfig) -> Result<TuckerFactors> {
    let order = factors.order();
    if let Some(mask) = &cfg.active_modes {
        if mask.len() != order {
            return Err(Error::InvalidConfig(format!(
                "mode mask has {} entries for an order-{order} tensor",
                mask.len()
            )));
        }
    }
    if y.dims() != s_next.dims() || y.dims() != factors.dims().as_slice() {
        return Err(Error::ShapeMismatch(format!(
            "observation {:?}, sparse {:?}, factors {:?}",
            y.dims(),
            s_next.dims(),
            factors.dims()
        )));
    }
    let eta = cfg.eta;
    let residual = s_next - y;

    let new_factors: Vec<DenseMatrix> = (0..order)
        .into_par_iter()
        .map(|k| -> Result<DenseMatrix> {
            let u = &factors.factors[k];
            if !cfg.is_active(k) {
                return Ok(u.clone());
            }
            let breve = factors.breve_factor(k)?;
            let gram_inv = spd_inverse(&breve.t().dot(&breve), k)?;
            let direction = matricize(&residual, k)?.dot(&breve).dot(&gram_inv);
            Ok(u * (1.0 - eta) - &(direction * eta))
        })
        .collect::<Result<_>>()?;

    let pseudo_inverses: Vec<DenseMatrix> = factors
        .factors
        .par_iter()
        .enumerate()
        .map(|(k, u)| Ok(spd_inverse(&u.t().dot(u), k)?.dot(&u.t())))
        .collect::<Result<_>>()?;
    let projected = multilinear_mul(&pseudo_inverses.iter().map(Some).collect::<Vec<_>>(), &residual)?;
    let core = &(&factors.core * (1.0 - eta)) - &(&projected * eta);

    Ok(TuckerFactors {
        factors: new_factors,
        core,
    })
}

/// Diagnostics for one iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Threshold used to form `S_t`.
    pub zeta: f64,
    /// `‖X_t − X⋆‖_F / ‖X⋆‖_F` when a truth is supplied.
    pub rel_fro: Option<f64>,
    /// `‖X_t − X⋆‖_∞` when a truth is supplied.
    pub inf_err: Option<f64>,
    /// `½ ‖X_t + S_t − Y‖²_F`.
    pub loss: f64,
    pub step_seconds: f64,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    /// First iteration whose relative error is at most `tol`.
    pub fn first_below(&self, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.rel_fro.is_some_and(|e| e <= tol))
            .map(|r| r.iter)
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub factors: TuckerFactors,
    pub sparse: DenseTensor,
    pub low_rank: DenseTensor,
    pub trace: IterationTrace,
    pub schedule: ThresholdSchedule,
    /// Iterations actually run.
    pub iterations: usize,
    pub stopped_early: bool,
}

/// Runs the solver on an order-3 observation.
pub fn solve(y: &DenseTensor, cfg: &SolverConfig, truth: Option<&GroundTruth>) -> Result<SolveOutput> {
    if y.order() != 3 {
        return Err(Error::InvalidConfig(format!("solve expects an order-3 tensor, got order {}", y.order())));
    }
    run(y, cfg, truth)
}

/// Runs the solver on an observation of any order `N ≥ 3`.
pub fn solve_order_n(y: &DenseTensor, cfg: &SolverConfig, truth: Option<&GroundTruth>) -> Result<SolveOutput> {
    if y.order() < 3 {
        return Err(Error::InvalidConfig(format!("solver needs order >= 3, got order {}", y.order())));
    }
    run(y, cfg, truth)
}

fn record(
    iter: usize,
    zeta: f64,
    x: &DenseTensor,
    s: &DenseTensor,
    y: &DenseTensor,
    truth: Option<&GroundTruth>,
    step_seconds: f64,
    start: Instant,
) -> IterationRecord {
    let fit = &(x + s) - y;
    let (rel_fro, inf_err) = match truth {
        Some(t) => {
            let diff = x - &t.x_star;
            (Some(diff.fro_norm() / t.x_star.fro_norm()), Some(diff.inf_norm()))
        }
        None => (None, None),
    };
    IterationRecord {
        iter,
        zeta,
        rel_fro,
        inf_err,
        loss: 0.5 * fit.fro_norm().powi(2),
        step_seconds,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    }
}

fn run(y: &DenseTensor, cfg: &SolverConfig, truth: Option<&GroundTruth>) -> Result<SolveOutput> {
    cfg.validate(y.order())?;
    for (k, (&r, &n)) in cfg.rank.iter().zip(y.dims()).enumerate() {
        if r > n {
            return Err(Error::InvalidConfig(format!("rank {r} exceeds extent {n} of mode {k}")));
        }
    }
    if let Some(t) = truth {
        if t.x_star.dims() != y.dims() {
            return Err(Error::ShapeMismatch(format!(
                "truth {:?} vs observation {:?}",
                t.x_star.dims(),
                y.dims()
            )));
        }
    }
    let start = Instant::now();
    let mut state = spectral_init(y, cfg, truth)?;
    let schedule = ThresholdSchedule::resolve(cfg, y, &state, truth)?;
    let mut x = state.factors.reconstruct()?;
    let mut trace = IterationTrace::default();
    trace.records.push(record(0, schedule.zeta0, &x, &state.sparse, y, truth, start.elapsed().as_secs_f64(), start));

    let mut stopped_early = false;
    for t in 0..cfg.max_iters {
        let step_start = Instant::now();
        let zeta_next = schedule.zeta(t + 1);
        let sparse = soft_shrink(&(y - &x), zeta_next)?;
        let factors = scaled_step(&state.factors, y, &sparse, cfg)?;
        let x_next = factors.reconstruct()?;
        let change = (&x_next - &x).fro_norm() / x.fro_norm().max(1e-300);
        state = SolverState {
            factors,
            sparse,
            zeta: zeta_next,
            iter: t + 1,
        };
        x = x_next;
        trace.records.push(record(
            t + 1,
            zeta_next,
            &x,
            &state.sparse,
            y,
            truth,
            step_start.elapsed().as_secs_f64(),
            start,
        ));
        if change < cfg.stop_tol {
            stopped_early = true;
            break;
        }
    }

    Ok(SolveOutput {
        iterations: state.iter,
        factors: state.factors,
        sparse: state.sparse,
        low_rank: x,
        trace,
        schedule,
        stopped_early,
    })
}
