//! Time evolution in the rotating and laboratory frames, and the
//! stroboscopic sampling that connects them.

use faer::c64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{cutoff_for, DensityMatrix, FockSpace};
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::liouvillian::{build_rotating_liouvillian, unvectorize, vectorize, LabGenerator, Parity, Superoperator};
use crate::meanfield::{fixed_points, mf_average_intensity};
use crate::params::ModelParams;
use crate::spectral::{diagonalize, steady_state_direct, SpectralDecomposition};

/// Modes whose weight in the initial state is below this are ignored by the
/// near-EP fallback check.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Rotating,
    Lab,
    LabStroboscopic,
}

impl Frame {
    pub fn label(self) -> &'static str {
        match self {
            Frame::Rotating => "rotating",
            Frame::Lab => "lab",
            Frame::LabStroboscopic => "lab_stroboscopic",
        }
    }
}

/// Expectation value of one operator along a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<c64>,
    pub frame: Frame,
    pub params: Option<ModelParams>,
    /// Free-form description of the initial state.
    pub initial: String,
}

impl ObservableTrajectory {
    /// `|<a>| <= ||a|| = sqrt(d - 1)` on a `d`-level truncation.
    pub fn within_operator_bound(&self, cutoff: usize) -> bool {
        let bound = ((cutoff - 1) as f64).sqrt() * (1.0 + 1e-9);
        self.values.iter().all(|v| v.norm() <= bound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Backend {
    /// Propagate the spectral decomposition.
    Spectral,
    /// Classical Runge-Kutta on the vectorized master equation.
    Rk4 {
        /// Largest step; `None` picks `0.25 / ||L||_1`, capped at `1e-2`.
        max_dt: Option<f64>,
    },
}

/// States along a time grid.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub states: Vec<CMat>,
    pub backend: Backend,
}

impl Evolution {
    pub fn expectation(&self, op: &CMat) -> Vec<c64> {
        self.states.iter().map(|s| linalg::expectation(op, s)).collect()
    }

    pub fn observable(&self, op: &CMat, frame: Frame, params: Option<ModelParams>, initial: &str) -> ObservableTrajectory {
        ObservableTrajectory {
            times: self.times.clone(),
            values: self.expectation(op),
            frame,
            params,
            initial: initial.to_string(),
        }
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] >= 0.0) {
        return Err(Error::InvalidParams("time grid must be non-empty, non-negative and increasing".into()));
    }
    Ok(())
}

/// Column-sum norm of the vectorized generator.
pub fn generator_norm(superop: &Superoperator) -> f64 {
    (0..superop.dim())
        .map(|j| superop.column(j).map(|(_, v)| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn default_step(superop: &Superoperator) -> f64 {
    (0.25 / generator_norm(superop).max(1e-300)).min(1e-2)
}

/// Evolves `rho0` under a time-independent generator. `Backend::Spectral`
/// diagonalizes once and falls back to RK4 when near-EP modes make the
/// expansion lose accuracy to roundoff.
pub fn evolve_rotating(rho0: &DensityMatrix, superop: &Superoperator, t_grid: &[f64], backend: Backend) -> Result<Evolution> {
    check_grid(t_grid)?;
    match backend {
        Backend::Spectral => {
            let dec = diagonalize(superop, true)?;
            match evolve_spectral(&dec, rho0, t_grid) {
                Err(Error::Numeric(msg)) if msg.contains("exceptional point") => {
                    evolve_rk4(rho0, superop, t_grid, default_step(superop))
                }
                other => other,
            }
        }
        Backend::Rk4 { max_dt } => evolve_rk4(rho0, superop, t_grid, max_dt.unwrap_or_else(|| default_step(superop))),
    }
}

/// Largest tolerated roundoff bound of a spectral expansion, relative to
/// the size of the result.
pub const SPECTRAL_ROUNDOFF_TOL: f64 = 1e-8;

/// Near an exceptional point the expansion coefficients of a mode pair grow
/// like the eigenvalue condition number and cancel in the sum, so the sum
/// loses about `eps |c_j| e^{Re lambda_j t}` to roundoff. Refuses the
/// expansion when that bound, taken at the earliest requested time, is not
/// small against `scale`.
fn check_near_ep(dec: &SpectralDecomposition, magnitudes: &[f64], t0: f64, scale: f64) -> Result<()> {
    let mut bound = 0.0;
    let mut worst: Option<(usize, f64)> = None;
    for (j, m) in dec.modes().iter().enumerate() {
        if !m.near_ep {
            continue;
        }
        let b = f64::EPSILON * magnitudes[j] * (m.eigenvalue.re * t0).exp();
        bound += b;
        if worst.map_or(true, |(_, w)| b > w) {
            worst = Some((j, b));
        }
    }
    match worst {
        Some((j, _)) if bound > SPECTRAL_ROUNDOFF_TOL * scale.max(1.0) => Err(Error::Numeric(format!(
            "mode {j} (lambda = {}) is near an exceptional point; spectral propagation is unreliable (roundoff bound {bound:.1e})",
            dec.mode(j).eigenvalue
        ))),
        _ => Ok(()),
    }
}

/// `rho(t) = sum_j Tr[l_j^dag rho0] e^{lambda_j t} r_j`.
pub fn evolve_spectral(dec: &SpectralDecomposition, rho0: &DensityMatrix, t_grid: &[f64]) -> Result<Evolution> {
    check_grid(t_grid)?;
    if !(dec.covers(Parity::Even) && dec.covers(Parity::Odd)) {
        return Err(Error::InvalidParams("state propagation needs both parity sectors".into()));
    }
    let d = dec.cutoff();
    let id = CMat::identity(d, d);
    let (w, _) = dec.mode_weights(rho0.matrix(), &id)?;
    let mags: Vec<f64> = w.iter().map(|z| z.norm()).collect();
    check_near_ep(dec, &mags, t_grid[0], 1.0)?;
    let active: Vec<(usize, CMat)> = (0..dec.len())
        .filter(|&j| w[j].norm() > WEIGHT_FLOOR)
        .map(|j| dec.right(j).map(|r| (j, r)))
        .collect::<Result<_>>()?;
    let states = t_grid
        .iter()
        .map(|&t| {
            let mut rho = CMat::zeros(d, d);
            for (j, r) in &active {
                let c = w[*j] * (dec.mode(*j).eigenvalue * t).exp();
                rho += linalg::scaled(r, c);
            }
            linalg::hermitize(&rho)
        })
        .collect();
    Ok(Evolution { times: t_grid.to_vec(), states, backend: Backend::Spectral })
}

/// `<op>(t)` from the spectral decomposition without forming states. A
/// decomposition of the odd sector alone suffices for parity-odd `op`.
pub fn observable_spectral(dec: &SpectralDecomposition, rho0: &DensityMatrix, op: &CMat, t_grid: &[f64]) -> Result<Vec<c64>> {
    check_grid(t_grid)?;
    let odd_op = is_parity_odd(op);
    let needed_ok = if odd_op { dec.covers(Parity::Odd) } else { dec.covers(Parity::Even) && dec.covers(Parity::Odd) };
    if !needed_ok {
        return Err(Error::InvalidParams("decomposition lacks the sectors this observable needs".into()));
    }
    let (w, obs) = dec.mode_weights(rho0.matrix(), op)?;
    let mags: Vec<f64> = w.iter().zip(&obs).map(|(a, b)| (a * b).norm()).collect();
    check_near_ep(dec, &mags, t_grid[0], linalg::max_abs(op))?;
    let terms: Vec<(c64, c64)> = (0..dec.len())
        .filter(|&j| (w[j] * obs[j]).norm() > 0.0)
        .map(|j| (dec.mode(j).eigenvalue, w[j] * obs[j]))
        .collect();
    Ok(t_grid
        .iter()
        .map(|&t| terms.iter().map(|&(l, c)| c * (l * t).exp()).sum())
        .collect())
}

fn is_parity_odd(op: &CMat) -> bool {
    let d = op.nrows();
    (0..d).all(|i| (0..d).all(|j| (i + j) % 2 == 1 || op[(i, j)] == ZERO))
}

fn rk4_step<F: Fn(f64, &[c64], &mut [c64])>(f: &F, t: f64, h: f64, v: &mut [c64], scratch: &mut [Vec<c64>; 5]) {
    let [k1, k2, k3, k4, tmp] = scratch;
    f(t, v, k1);
    for i in 0..v.len() {
        tmp[i] = v[i] + k1[i] * (0.5 * h);
    }
    f(t + 0.5 * h, tmp, k2);
    for i in 0..v.len() {
        tmp[i] = v[i] + k2[i] * (0.5 * h);
    }
    f(t + 0.5 * h, tmp, k3);
    for i in 0..v.len() {
        tmp[i] = v[i] + k3[i] * h;
    }
    f(t + h, tmp, k4);
    for i in 0..v.len() {
        v[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
    }
}

fn integrate<F: Fn(f64, &[c64], &mut [c64])>(rho0: &CMat, t_grid: &[f64], max_dt: f64, f: F) -> Vec<CMat> {
    let d = rho0.nrows();
    let mut v = vectorize(rho0);
    let n = v.len();
    let mut scratch = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / max_dt).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for k in 0..steps {
                rk4_step(&f, t + k as f64 * h, h, &mut v, &mut scratch);
            }
            t = target;
        }
        out.push(unvectorize(&v, d));
    }
    out
}

pub fn evolve_rk4(rho0: &DensityMatrix, superop: &Superoperator, t_grid: &[f64], max_dt: f64) -> Result<Evolution> {
    check_grid(t_grid)?;
    if !(max_dt > 0.0) {
        return Err(Error::InvalidParams(format!("step {max_dt} must be positive")));
    }
    let states = integrate(rho0.matrix(), t_grid, max_dt, |_, v, out| {
        out.iter_mut().for_each(|x| *x = ZERO);
        superop.apply_add(v, ONE, out);
    });
    Ok(Evolution { times: t_grid.to_vec(), states, backend: Backend::Rk4 { max_dt: Some(max_dt) } })
}

/// Number of steps per drive period below which [`evolve_lab`] refuses to run.
pub const MIN_STEPS_PER_PERIOD: f64 = 200.0;

/// RK4 in the laboratory frame with the generator evaluated at the stage
/// times. `dt` must resolve the drive, `dt <= T / 200`.
pub fn evolve_lab(rho0: &DensityMatrix, params: &ModelParams, space: &FockSpace, t_grid: &[f64], dt: f64) -> Result<Evolution> {
    check_grid(t_grid)?;
    let generator = LabGenerator::new(params, space)?;
    let period = generator.period();
    let max = period / MIN_STEPS_PER_PERIOD;
    if !(dt > 0.0) || dt > max {
        return Err(Error::Resolution { dt, max });
    }
    check_periodicity(&generator, rho0.matrix())?;
    let states = integrate(rho0.matrix(), t_grid, dt, |t, v, out| generator.apply(t, v, out));
    Ok(Evolution { times: t_grid.to_vec(), states, backend: Backend::Rk4 { max_dt: Some(dt) } })
}

fn check_periodicity(generator: &LabGenerator, probe: &CMat) -> Result<()> {
    let v = vectorize(probe);
    let mut a = vec![ZERO; v.len()];
    let mut b = vec![ZERO; v.len()];
    let t = 0.37 * generator.period();
    generator.apply(t, &v, &mut a);
    generator.apply(t + generator.period(), &v, &mut b);
    let scale = a.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if diff > 1e-9 * scale {
        return Err(Error::Numeric(format!("lab generator is not T-periodic (deviation {diff:.3e})")));
    }
    Ok(())
}

/// Lab-frame state at `t = nT` from the rotating-frame state at the same
/// time: `n` parity conjugations.
pub fn stroboscopic_map(rho_rotating: &DensityMatrix, n: u64) -> DensityMatrix {
    if n % 2 == 0 {
        rho_rotating.clone()
    } else {
        rho_rotating.parity_conjugate()
    }
}

/// `<a>_L(nT)` for `n = 0..=n_max`. Only odd modes contribute to `<a>`, so
/// a decomposition of the odd sector alone is enough.
pub fn stroboscopic_series(
    dec: &SpectralDecomposition,
    rho0: &DensityMatrix,
    space: &FockSpace,
    period: f64,
    n_max: u64,
    initial: &str,
) -> Result<ObservableTrajectory> {
    if !(period > 0.0) {
        return Err(Error::MissingDriveFrequency);
    }
    let times: Vec<f64> = (0..=n_max).map(|n| n as f64 * period).collect();
    let rot = observable_spectral(dec, rho0, space.a(), &times)?;
    let values = rot
        .iter()
        .enumerate()
        .map(|(n, v)| if n % 2 == 0 { *v } else { -*v })
        .collect();
    Ok(ObservableTrajectory { times, values, frame: Frame::LabStroboscopic, params: dec.params().copied(), initial: initial.into() })
}

/// Envelope decay rate of a sampled series from a log-linear fit of
/// `|value|` over samples with `t >= t_skip`.
pub fn envelope_decay_rate(traj: &ObservableTrajectory, t_skip: f64) -> Result<(f64, f64)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = traj
        .times
        .iter()
        .zip(&traj.values)
        .filter(|(t, v)| **t >= t_skip && v.norm() > 0.0)
        .map(|(t, v)| (*t, v.norm().ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientStatistics("too few samples for an envelope fit".into()));
    }
    let (slope, _, stderr) = crate::spectral::linear_fit(&xs, &ys);
    Ok((-slope, stderr))
}

/// Row of the stationary occupation table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccupationRow {
    pub eta_ratio: f64,
    pub n_ex: f64,
    pub cutoff: usize,
    /// `<n>_ss / n_ex` of the quantum steady state.
    pub quantum: f64,
    /// Period-averaged mean-field intensity over `n_ex`.
    pub meanfield: f64,
}

/// Mean-field occupation: the limit-cycle average below `eta_c`, the
/// fixed-point intensity `|alpha_+|^2` above it.
pub fn meanfield_occupation(p: &ModelParams) -> f64 {
    match fixed_points(p) {
        Ok((plus, _)) => plus.norm_sqr(),
        Err(_) => mf_average_intensity(p),
    }
}

/// Stationary occupation for each parameter point, with the cutoff chosen
/// by [`cutoff_for`] unless `cutoff` is given.
pub fn stationary_occupation_scan(params_grid: &[ModelParams], cutoff: Option<usize>) -> Result<Vec<OccupationRow>> {
    params_grid
        .iter()
        .map(|p| {
            let d = cutoff.unwrap_or_else(|| cutoff_for(p));
            let space = FockSpace::new(d)?;
            let rho = steady_state_direct(&build_rotating_liouvillian(p, &space))?;
            let n = rho.expect(space.n_op()).re;
            Ok(OccupationRow {
                eta_ratio: p.eta_ratio(),
                n_ex: p.n_ex(),
                cutoff: d,
                quantum: n / p.n_ex(),
                meanfield: meanfield_occupation(p) / p.n_ex(),
            })
        })
        .collect()
}
