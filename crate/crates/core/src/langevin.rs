//! Euler-Maruyama ensembles of the semiclassical Langevin equations and the
//! estimators that compare them with the phase Fokker-Planck results.
//!
//! Time is measured in units of `1 / gamma1`. Every trajectory draws from its
//! own ChaCha8 stream, keyed by the ensemble seed and the trajectory index,
//! so an ensemble is reproducible bit for bit regardless of how it is split.
//!
//! Complex noise convention: the amplitude equation carries increments
//! `dW = sqrt(3 dt / 4) (g1 + i g2)` with independent standard normals, so
//! `E[|dW|^2] = 2 (3/4) dt` and `E[dW^2] = 0`. This is the Ito form of the
//! diffusion term `(3/4) d_alpha d_alpha*` of the amplitude Fokker-Planck
//! equation (a drift-free term `D d_a d_a* W` corresponds to `E[|dW|^2] = 2D dt`).

use std::f64::consts::PI;

use faer::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ScaledParams;
use crate::spectral::linear_fit;

/// Hysteresis added beyond a potential maximum before a jump is counted.
pub const JUMP_HYSTERESIS: f64 = 0.2;

/// Largest admissible step: `1e-3 max(1, 1 / w)` with `w = max(|delta|, 2 eta)`
/// the fastest deterministic phase rate.
pub fn max_dt(params: &ScaledParams) -> f64 {
    let w = params.delta.abs().max(2.0 * params.eta.abs());
    1e-3 * if w > 0.0 { (1.0 / w).max(1.0) } else { 1.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LangevinConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub n_trajectories: usize,
    pub seed: u64,
    /// Samples are stored every `save_every` steps.
    pub save_every: usize,
}

impl LangevinConfig {
    pub fn new(dt: f64, n_steps: usize, n_trajectories: usize, seed: u64) -> Self {
        Self { dt, n_steps, n_trajectories, seed, save_every: 1 }
    }

    pub fn with_save_every(mut self, save_every: usize) -> Self {
        self.save_every = save_every;
        self
    }

    pub fn validate(&self, params: &ScaledParams) -> Result<()> {
        let max = max_dt(params);
        if !(self.dt > 0.0) || self.dt > max {
            return Err(Error::Resolution { dt: self.dt, max });
        }
        if self.n_trajectories == 0 || self.n_steps == 0 || self.save_every == 0 {
            return Err(Error::InvalidParams("n_steps, n_trajectories and save_every must be positive".into()));
        }
        Ok(())
    }

    fn times(&self) -> Vec<f64> {
        (0..=self.n_steps / self.save_every).map(|k| (k * self.save_every) as f64 * self.dt).collect()
    }

    fn rng(&self, trajectory: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trajectory as u64);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnsembleKind {
    /// Unwrapped phase `phi(t)`.
    Phase,
    /// Intensity deviation `dN(t)`.
    Intensity,
    /// Complex amplitude `alpha(t)`.
    Amplitude,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryEnsemble {
    pub kind: EnsembleKind,
    pub params: ScaledParams,
    pub config: LangevinConfig,
    pub times: Vec<f64>,
    /// Phase or intensity series, one per trajectory.
    pub real: Vec<Vec<f64>>,
    /// Amplitude series, one per trajectory.
    pub complex: Vec<Vec<c64>>,
    /// RNG stream index of each trajectory.
    pub streams: Vec<u64>,
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    fn expect_kind(&self, kind: EnsembleKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidState(format!("expected a {kind:?} ensemble, got {:?}", self.kind)));
        }
        Ok(())
    }

    /// Duration between stored samples.
    pub fn sample_dt(&self) -> f64 {
        self.config.dt * self.config.save_every as f64
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `phi' = -delta + 2 eta sin 2phi + xi`, `E[xi xi'] = 3 / (4 n_ex) delta(t - t')`.
pub fn simulate_phase(params: &ScaledParams, config: &LangevinConfig, phi0: f64) -> Result<TrajectoryEnsemble> {
    config.validate(params)?;
    let amp = (0.75 * config.dt / params.n_ex).sqrt();
    let mut real = Vec::with_capacity(config.n_trajectories);
    for t in 0..config.n_trajectories {
        let mut rng = config.rng(t);
        let mut phi = phi0;
        let mut series = Vec::with_capacity(config.n_steps / config.save_every + 1);
        series.push(phi);
        for k in 1..=config.n_steps {
            phi += (-params.delta + 2.0 * params.eta * (2.0 * phi).sin()) * config.dt + amp * normal(&mut rng);
            if k % config.save_every == 0 {
                series.push(phi);
            }
        }
        real.push(series);
    }
    Ok(finish(EnsembleKind::Phase, params, config, real, Vec::new()))
}

/// `dN' = -dN + xi`, `E[xi xi'] = 3 n_ex delta(t - t')`.
pub fn simulate_intensity(params: &ScaledParams, config: &LangevinConfig, delta_n0: f64) -> Result<TrajectoryEnsemble> {
    config.validate(params)?;
    let amp = (3.0 * params.n_ex * config.dt).sqrt();
    let mut real = Vec::with_capacity(config.n_trajectories);
    for t in 0..config.n_trajectories {
        let mut rng = config.rng(t);
        let mut x = delta_n0;
        let mut series = Vec::with_capacity(config.n_steps / config.save_every + 1);
        series.push(x);
        for k in 1..=config.n_steps {
            x += -x * config.dt + amp * normal(&mut rng);
            if k % config.save_every == 0 {
                series.push(x);
            }
        }
        real.push(series);
    }
    Ok(finish(EnsembleKind::Intensity, params, config, real, Vec::new()))
}

/// Drift of the amplitude equation with `gamma2 = 1 / (2 n_ex)`.
pub fn amplitude_drift(alpha: c64, params: &ScaledParams) -> c64 {
    let g2 = 0.5 / params.n_ex;
    c64::new(0.0, -params.delta) * alpha + alpha * 0.5 - alpha * (g2 * alpha.norm_sqr()) - alpha.conj() * (2.0 * params.eta)
}

/// Complex Euler-Maruyama for the amplitude equation. Fails once
/// `|alpha|^2 > 10 n_ex`.
pub fn simulate_amplitude(params: &ScaledParams, config: &LangevinConfig, alpha0: c64) -> Result<TrajectoryEnsemble> {
    config.validate(params)?;
    let amp = (0.75 * config.dt).sqrt();
    let limit = 10.0 * params.n_ex;
    let mut complex = Vec::with_capacity(config.n_trajectories);
    for t in 0..config.n_trajectories {
        let mut rng = config.rng(t);
        let mut a = alpha0;
        let mut series = Vec::with_capacity(config.n_steps / config.save_every + 1);
        series.push(a);
        for k in 1..=config.n_steps {
            let dw = c64::new(normal(&mut rng), normal(&mut rng)) * amp;
            a += amplitude_drift(a, params) * config.dt + dw;
            if !(a.norm_sqr() <= limit) {
                return Err(Error::Instability { t: k as f64 * config.dt, norm_sq: a.norm_sqr() });
            }
            if k % config.save_every == 0 {
                series.push(a);
            }
        }
        complex.push(series);
    }
    Ok(finish(EnsembleKind::Amplitude, params, config, Vec::new(), complex))
}

fn finish(
    kind: EnsembleKind,
    params: &ScaledParams,
    config: &LangevinConfig,
    real: Vec<Vec<f64>>,
    complex: Vec<Vec<c64>>,
) -> TrajectoryEnsemble {
    TrajectoryEnsemble {
        kind,
        params: *params,
        config: *config,
        times: config.times(),
        real,
        complex,
        streams: (0..config.n_trajectories as u64).collect(),
    }
}

/// Estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRates {
    pub right_jumps: usize,
    pub left_jumps: usize,
    pub total_time: f64,
    pub right: Estimate,
    pub left: Estimate,
    pub total: Estimate,
    /// Decay rate of the slowest odd mode implied by the jump rates,
    /// `2 (right + left)`; compare with the Kramers gap.
    pub gap_equivalent: Estimate,
}

/// Minimum of `V(phi) = delta phi + eta cos 2phi` in `(0, pi)`, and the
/// maxima on either side of it.
fn wells(params: &ScaledParams) -> (f64, f64, f64) {
    let s = (params.delta / (2.0 * params.eta)).asin();
    ((PI - s) / 2.0, s / 2.0, s / 2.0 + PI)
}

/// Counts well-to-well transitions of a phase ensemble. A jump out of the well
/// around `phi_min + w pi` is registered once the phase passes the adjacent
/// potential maximum by more than `hysteresis`. Each trajectory starts in the
/// well nearest to its first sample.
pub fn count_jumps(ensemble: &TrajectoryEnsemble, hysteresis: f64) -> Result<(usize, usize)> {
    ensemble.expect_kind(EnsembleKind::Phase)?;
    let p = &ensemble.params;
    if !(2.0 * p.eta > p.delta.abs()) {
        return Err(Error::WrongRegime("jump counting needs eta > eta_c".into()));
    }
    let (min0, left0, right0) = wells(p);
    let (mut right, mut left) = (0, 0);
    for series in &ensemble.real {
        let Some(&first) = series.first() else { continue };
        let mut w = ((first - min0) / PI).round();
        for &phi in &series[1..] {
            loop {
                if phi > right0 + w * PI + hysteresis {
                    w += 1.0;
                    right += 1;
                } else if phi < left0 + w * PI - hysteresis {
                    w -= 1.0;
                    left += 1;
                } else {
                    break;
                }
            }
        }
    }
    Ok((right, left))
}

/// Jump rates with Poisson standard errors.
pub fn estimate_jump_rate(ensemble: &TrajectoryEnsemble) -> Result<JumpRates> {
    estimate_jump_rate_with(ensemble, JUMP_HYSTERESIS)
}

pub fn estimate_jump_rate_with(ensemble: &TrajectoryEnsemble, hysteresis: f64) -> Result<JumpRates> {
    let (right_jumps, left_jumps) = count_jumps(ensemble, hysteresis)?;
    let total_jumps = right_jumps + left_jumps;
    if total_jumps == 0 {
        return Err(Error::InsufficientStatistics(
            "no jumps observed; raise n_steps or lower n_ex".into(),
        ));
    }
    let total_time = ensemble.len() as f64 * ensemble.times.last().copied().unwrap_or(0.0);
    let est = |n: usize| Estimate { value: n as f64 / total_time, stderr: (n as f64).sqrt() / total_time };
    let total = est(total_jumps);
    Ok(JumpRates {
        right_jumps,
        left_jumps,
        total_time,
        right: est(right_jumps),
        left: est(left_jumps),
        total,
        gap_equivalent: Estimate { value: 2.0 * total.value, stderr: 2.0 * total.stderr },
    })
}

/// Exponential decay rate of the coherence `|E[e^{i phi(t)}]|`, fitted in log
/// scale over the samples after `t_skip` whose magnitude exceeds three times
/// the ensemble noise floor `1 / sqrt(n_trajectories)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimeFit {
    pub rate: Estimate,
    pub times: Vec<f64>,
    pub coherence: Vec<f64>,
    /// Number of samples used by the fit.
    pub fitted: usize,
}

pub fn estimate_oscillation_lifetime(ensemble: &TrajectoryEnsemble, t_skip: f64) -> Result<LifetimeFit> {
    ensemble.expect_kind(EnsembleKind::Phase)?;
    let p = &ensemble.params;
    if !(2.0 * p.eta < p.delta.abs() || p.eta == 0.0) {
        return Err(Error::WrongRegime("oscillation lifetime needs eta < eta_c".into()));
    }
    coherence_decay(ensemble, t_skip)
}

/// The same fit without a regime check. In the locked regime `e^{i phi}` is
/// odd under `phi -> phi + pi`, so the fitted rate is the slowest odd-mode
/// decay rate of the phase Fokker-Planck operator.
pub fn coherence_decay(ensemble: &TrajectoryEnsemble, t_skip: f64) -> Result<LifetimeFit> {
    ensemble.expect_kind(EnsembleKind::Phase)?;
    let n = ensemble.len() as f64;
    let coherence: Vec<f64> = (0..ensemble.times.len())
        .map(|k| {
            let (c, s) = ensemble.real.iter().fold((0.0, 0.0), |(c, s), tr| (c + tr[k].cos(), s + tr[k].sin()));
            (c * c + s * s).sqrt() / n
        })
        .collect();
    let floor = 3.0 / n.sqrt();
    let (xs, ys): (Vec<f64>, Vec<f64>) = ensemble
        .times
        .iter()
        .zip(&coherence)
        .filter(|(t, c)| **t >= t_skip && **c > floor)
        .map(|(t, c)| (*t, c.ln()))
        .unzip();
    if xs.len() < 8 {
        return Err(Error::InsufficientStatistics(format!(
            "only {} coherence samples above the noise floor {floor:.3e}",
            xs.len()
        )));
    }
    let (slope, _, stderr) = linear_fit(&xs, &ys);
    Ok(LifetimeFit {
        rate: Estimate { value: -slope, stderr },
        fitted: xs.len(),
        times: ensemble.times.clone(),
        coherence,
    })
}

/// Pooled short-time phase diffusion `Var[d phi] / dt` from all increments
/// between consecutive stored samples, with the mean increment removed.
pub fn phase_diffusion_rate(ensemble: &TrajectoryEnsemble) -> Result<Estimate> {
    ensemble.expect_kind(EnsembleKind::Phase)?;
    let incs: Vec<f64> = ensemble.real.iter().flat_map(|s| s.windows(2).map(|w| w[1] - w[0])).collect();
    pooled_variance(&incs).map(|v| {
        let dt = ensemble.sample_dt();
        Estimate { value: v.value / dt, stderr: v.stderr / dt }
    })
}

/// Ensemble variance of `phi(t) - phi(0)` at every stored time.
pub fn phase_spread(ensemble: &TrajectoryEnsemble) -> Result<Vec<f64>> {
    ensemble.expect_kind(EnsembleKind::Phase)?;
    let n = ensemble.len() as f64;
    Ok((0..ensemble.times.len())
        .map(|k| {
            let d: Vec<f64> = ensemble.real.iter().map(|s| s[k] - s[0]).collect();
            let m = d.iter().sum::<f64>() / n;
            d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0)
        })
        .collect())
}

/// Stationary variance of an intensity ensemble, pooling every sample after
/// `burn_in`.
pub fn stationary_variance(ensemble: &TrajectoryEnsemble, burn_in: f64) -> Result<Estimate> {
    ensemble.expect_kind(EnsembleKind::Intensity)?;
    let start = ensemble.times.iter().position(|&t| t >= burn_in).unwrap_or(ensemble.times.len());
    let samples: Vec<f64> = ensemble.real.iter().flat_map(|s| s[start..].iter().copied()).collect();
    pooled_variance(&samples)
}

/// Correlation time of an intensity ensemble from a log-linear fit of the
/// pooled normalized autocorrelation over lags up to `max_lag` (time units),
/// using samples after `burn_in`.
pub fn autocorrelation_time(ensemble: &TrajectoryEnsemble, burn_in: f64, max_lag: f64) -> Result<Estimate> {
    ensemble.expect_kind(EnsembleKind::Intensity)?;
    let dt = ensemble.sample_dt();
    let start = ensemble.times.iter().position(|&t| t >= burn_in).unwrap_or(ensemble.times.len());
    let lags = (max_lag / dt).round() as usize;
    let len = ensemble.times.len().saturating_sub(start);
    if lags < 2 || len <= lags {
        return Err(Error::InsufficientStatistics("series too short for the requested lags".into()));
    }
    let corr = |lag: usize| -> f64 {
        let mut acc = 0.0;
        let mut cnt = 0usize;
        for s in &ensemble.real {
            for k in start..start + len - lag {
                acc += s[k] * s[k + lag];
                cnt += 1;
            }
        }
        acc / cnt as f64
    };
    let c0 = corr(0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..=lags).map(|l| (l as f64 * dt, (corr(l) / c0).ln())).unzip();
    let (slope, _, stderr) = linear_fit(&xs, &ys);
    Ok(Estimate { value: -1.0 / slope, stderr: stderr / (slope * slope) })
}

/// Mean `|alpha|^2` of an amplitude ensemble after `burn_in`. The error is
/// the spread of per-trajectory time averages, which are independent.
pub fn mean_intensity(ensemble: &TrajectoryEnsemble, burn_in: f64) -> Result<Estimate> {
    ensemble.expect_kind(EnsembleKind::Amplitude)?;
    let start = ensemble.times.iter().position(|&t| t >= burn_in).unwrap_or(ensemble.times.len());
    let means: Vec<f64> = ensemble
        .complex
        .iter()
        .filter(|s| s.len() > start)
        .map(|s| s[start..].iter().map(|a| a.norm_sqr()).sum::<f64>() / (s.len() - start) as f64)
        .collect();
    if means.len() < 2 {
        return Err(Error::InsufficientStatistics("need two trajectories past the burn-in".into()));
    }
    let n = means.len() as f64;
    let m = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    Ok(Estimate { value: m, stderr: (var / n).sqrt() })
}

fn pooled_variance(samples: &[f64]) -> Result<Estimate> {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return Err(Error::InsufficientStatistics("need at least two samples".into()));
    }
    let m = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    let m4 = samples.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    // Standard error of the sample variance for independent samples.
    let stderr = ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt();
    Ok(Estimate { value: var, stderr })
}
