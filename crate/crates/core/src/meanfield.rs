//! Classical amplitude equations: limit cycle, bistable fixed points and the
//! tilted-washboard phase potential.

use std::f64::consts::{PI, TAU};

use faer::c64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Amplitude in polar and Cartesian form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFieldState {
    pub alpha: c64,
}

impl MeanFieldState {
    pub fn from_polar(intensity: f64, phase: f64) -> Self {
        Self { alpha: c64::from_polar(intensity.max(0.0).sqrt(), phase) }
    }

    pub fn intensity(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// Phase in `[0, 2 pi)`.
    pub fn phase(&self) -> f64 {
        self.alpha.arg().rem_euclid(TAU)
    }
}

/// `d alpha / dt = -i delta alpha + gamma1/2 alpha - gamma2 |alpha|^2 alpha - 2 eta alpha^*`.
pub fn mf_rhs(alpha: c64, p: &ModelParams) -> c64 {
    c64::new(0.0, -p.delta) * alpha + alpha * (0.5 * p.gamma1) - alpha * (p.gamma2 * alpha.norm_sqr())
        - alpha.conj() * (2.0 * p.eta)
}

/// Phase velocity `-delta + 2 eta sin 2 phi`, independent of the intensity.
pub fn phase_velocity(phi: f64, p: &ModelParams) -> f64 {
    -p.delta + 2.0 * p.eta * (2.0 * phi).sin()
}

/// `dN/dt = gamma1 N - 2 gamma2 N^2 - 4 eta N cos 2 phi`.
pub fn intensity_velocity(n: f64, phi: f64, p: &ModelParams) -> f64 {
    p.gamma1 * n - 2.0 * p.gamma2 * n * n - 4.0 * p.eta * n * (2.0 * phi).cos()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldTrajectory {
    pub times: Vec<f64>,
    pub alpha: Vec<c64>,
}

/// Largest RK4 step in units of `1 / gamma1`.
pub const MAX_MF_STEP: f64 = 1e-2;

/// Fixed-step RK4 for the amplitude equation, storing every `stride`-th step.
pub fn integrate_mf(
    initial: MeanFieldState,
    p: &ModelParams,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<MeanFieldTrajectory> {
    if !(dt > 0.0) || dt > MAX_MF_STEP / p.gamma1 {
        return Err(Error::Resolution { dt, max: MAX_MF_STEP / p.gamma1 });
    }
    let stride = stride.max(1);
    let steps = (t_end / dt).round() as usize;
    let guard = 100.0 * p.n_ex().max(initial.intensity());
    let mut alpha = initial.alpha;
    let mut out = MeanFieldTrajectory { times: vec![0.0], alpha: vec![alpha] };
    for k in 1..=steps {
        let k1 = mf_rhs(alpha, p);
        let k2 = mf_rhs(alpha + k1 * (0.5 * dt), p);
        let k3 = mf_rhs(alpha + k2 * (0.5 * dt), p);
        let k4 = mf_rhs(alpha + k3 * dt, p);
        alpha += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let t = k as f64 * dt;
        if !(alpha.norm_sqr() <= guard) {
            return Err(Error::Instability { t, norm_sq: alpha.norm_sqr() });
        }
        if k % stride == 0 || k == steps {
            out.times.push(t);
            out.alpha.push(alpha);
        }
    }
    Ok(out)
}

/// `Omega = sqrt(delta^2 - 4 eta^2)`, the limit-cycle frequency.
pub fn limit_cycle_frequency(p: &ModelParams) -> Result<f64> {
    let disc = p.delta * p.delta - 4.0 * p.eta * p.eta;
    if disc > 0.0 {
        Ok(disc.sqrt())
    } else {
        Err(Error::WrongRegime(format!("no limit cycle for eta = {} >= eta_c = {}", p.eta, p.eta_c())))
    }
}

/// Stable fixed points `alpha_+- = +- sqrt(N_ss) e^{i phi_ss}` with
/// `N_ss = n_ex + sqrt(4 eta^2 - delta^2) / gamma2` and
/// `2 phi_ss = pi - asin(delta / 2 eta)`.
pub fn fixed_points(p: &ModelParams) -> Result<(c64, c64)> {
    let disc = 4.0 * p.eta * p.eta - p.delta * p.delta;
    if !(disc > 0.0) {
        return Err(Error::WrongRegime(format!("no fixed points for eta = {} <= eta_c = {}", p.eta, p.eta_c())));
    }
    let n_ss = p.n_ex() + disc.sqrt() / p.gamma2;
    let phi = 0.5 * (PI - (p.delta / (2.0 * p.eta)).asin());
    let plus = c64::from_polar(n_ss.sqrt(), phi);
    Ok((plus, -plus))
}

/// Period-averaged intensity on the limit cycle, `gamma1 / (2 gamma2)`.
pub fn mf_average_intensity(p: &ModelParams) -> f64 {
    p.n_ex()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    LimitCycle,
    Critical,
    Bistable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bifurcation {
    pub regime: Regime,
    pub eta_c: f64,
    pub omega: Option<f64>,
    pub fixed_points: Option<(c64, c64)>,
}

pub fn classify(p: &ModelParams) -> Bifurcation {
    let regime = match p.eta.partial_cmp(&p.eta_c()) {
        Some(std::cmp::Ordering::Less) => Regime::LimitCycle,
        Some(std::cmp::Ordering::Greater) => Regime::Bistable,
        _ => Regime::Critical,
    };
    Bifurcation {
        regime,
        eta_c: p.eta_c(),
        omega: limit_cycle_frequency(p).ok(),
        fixed_points: fixed_points(p).ok(),
    }
}

/// Tilted washboard `V(phi) = delta phi + eta cos 2 phi`, with
/// `d phi / dt = -V'(phi)` in the noiseless limit.
pub fn phase_potential(phi: f64, p: &ModelParams) -> f64 {
    p.delta * phi + p.eta * (2.0 * phi).cos()
}

pub fn phase_potential_curvature(phi: f64, p: &ModelParams) -> f64 {
    -4.0 * p.eta * (2.0 * phi).cos()
}

/// Critical points of `V` in `[0, 2 pi)`, ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialExtrema {
    pub minima: Vec<f64>,
    pub maxima: Vec<f64>,
}

/// Closed-form solutions of `sin 2 phi = delta / (2 eta)`; empty below the
/// bifurcation.
pub fn potential_extrema(p: &ModelParams) -> PotentialExtrema {
    if !(2.0 * p.eta > p.delta.abs()) {
        return PotentialExtrema { minima: vec![], maxima: vec![] };
    }
    let s = (p.delta / (2.0 * p.eta)).asin();
    let sorted = |base: f64| {
        let mut v = vec![base.rem_euclid(TAU), (base + PI).rem_euclid(TAU)];
        v.sort_by(f64::total_cmp);
        v
    };
    PotentialExtrema { minima: sorted(0.5 * (PI - s)), maxima: sorted(0.5 * s) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n_ex: f64, ratio: f64) -> ModelParams {
        ModelParams::from_ratios(1.0, n_ex, 0.1, ratio).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let q = p(20.0, 0.4);
        assert_eq!(mf_rhs(c64::new(0.0, 0.0), &q), c64::new(0.0, 0.0));
        let free = ModelParams::new(1.0, 0.05, 0.0, 0.0, 0.0).unwrap();
        assert!(mf_rhs(c64::new(free.n_ex().sqrt(), 0.0), &free).norm() < 1e-12);
        let b = p(20.0, 2.0);
        let (ap, am) = fixed_points(&b).unwrap();
        assert!(mf_rhs(ap, &b).norm() < 1e-12);
        assert!(mf_rhs(am, &b).norm() < 1e-12);
        assert_eq!(am, -ap);
    }

    #[test]
    fn polar_form_matches_amplitude_form() {
        let q = p(7.0, 1.7);
        let s = MeanFieldState::from_polar(5.0, 0.7);
        let da = mf_rhs(s.alpha, &q);
        let dn = 2.0 * (s.alpha.conj() * da).re;
        let dphi = (da / s.alpha).im;
        assert!((dn - intensity_velocity(5.0, 0.7, &q)).abs() < 1e-12);
        assert!((dphi - phase_velocity(0.7, &q)).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_occupation() {
        let q = p(20.0, 2.0);
        let (ap, _) = fixed_points(&q).unwrap();
        let want = 20.0 + (4.0 * q.eta * q.eta - q.delta * q.delta).sqrt() / q.gamma2;
        assert!((ap.norm_sqr() - want).abs() < 1e-10);
        let tiny = ModelParams::new(1.0, 0.05, 1e-9, 0.3, 0.0).unwrap();
        let (a, _) = fixed_points(&tiny).unwrap();
        assert!((2.0 * a.arg() - PI).abs() < 1e-8);
        assert!(matches!(fixed_points(&p(20.0, 0.9)), Err(Error::WrongRegime(_))));
    }

    #[test]
    fn frequency_examples() {
        assert!((limit_cycle_frequency(&p(5.0, 0.0)).unwrap() - 0.1).abs() < 1e-15);
        assert!((limit_cycle_frequency(&p(5.0, 0.4)).unwrap() - 0.1 * 0.84f64.sqrt()).abs() < 1e-15);
        assert!((0.1 * 0.84f64.sqrt() - 0.09165).abs() < 1e-5);
        assert!(matches!(limit_cycle_frequency(&p(5.0, 1.0)), Err(Error::WrongRegime(_))));
    }

    #[test]
    fn numeric_phase_period() {
        // RK4 on the phase equation through one full winding, with linear
        // interpolation of the crossing.
        let q = p(5.0, 0.8);
        let omega = limit_cycle_frequency(&q).unwrap();
        let dt = 1e-3;
        let (mut t, mut phi) = (0.0, 0.0f64);
        loop {
            let k1 = phase_velocity(phi, &q);
            let k2 = phase_velocity(phi + 0.5 * dt * k1, &q);
            let k3 = phase_velocity(phi + 0.5 * dt * k2, &q);
            let k4 = phase_velocity(phi + dt * k3, &q);
            let next = phi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if next <= -TAU {
                t += dt * (-TAU - phi) / (next - phi);
                break;
            }
            phi = next;
            t += dt;
        }
        assert!((t - TAU / omega).abs() / (TAU / omega) < 1e-6, "{t}");
    }

    #[test]
    fn trajectories() {
        let free = ModelParams::new(1.0, 0.05, 0.0, 0.0, 0.0).unwrap();
        let tr = integrate_mf(MeanFieldState { alpha: c64::new(2.0 * free.n_ex().sqrt(), 0.0) }, &free, 20.0, 1e-3, 10).unwrap();
        let ns: Vec<f64> = tr.alpha.iter().map(|a| a.norm_sqr()).collect();
        assert!(ns.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!((ns.last().unwrap() - free.n_ex()).abs() < 1e-6);

        let b = p(20.0, 2.0);
        let (ap, _) = fixed_points(&b).unwrap();
        let tr = integrate_mf(MeanFieldState { alpha: ap * 0.9 + c64::new(0.2, 0.0) }, &b, 400.0, 1e-2, 100).unwrap();
        assert!((tr.alpha.last().unwrap() - ap).norm() < 1e-6);

        let c = p(20.0, 0.4);
        let tr = integrate_mf(MeanFieldState { alpha: c64::new(20f64.sqrt(), 0.0) }, &c, 200.0, 1e-2, 1).unwrap();
        assert!(tr.alpha.iter().all(|a| a.norm_sqr() <= 4.0 * 20.0));
        assert!(matches!(
            integrate_mf(MeanFieldState { alpha: c64::new(1.0, 0.0) }, &c, 1.0, 0.1, 1),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn average_intensity_over_cycle() {
        let q = p(20.0, 0.4);
        assert_eq!(mf_average_intensity(&q), 20.0);
        let omega = limit_cycle_frequency(&q).unwrap();
        // Relax onto the cycle, then average over one period.
        let dt = 1e-3;
        let warm = integrate_mf(MeanFieldState { alpha: c64::new(20f64.sqrt(), 0.0) }, &q, 60.0, dt, 1000).unwrap();
        let start = MeanFieldState { alpha: *warm.alpha.last().unwrap() };
        let tr = integrate_mf(start, &q, TAU / omega, dt, 1).unwrap();
        let mean = tr.alpha[1..].iter().map(|a| a.norm_sqr()).sum::<f64>() / (tr.alpha.len() - 1) as f64;
        assert!((mean - 20.0).abs() / 20.0 < 0.02, "{mean}");
    }

    #[test]
    fn potential_extrema_classification() {
        let q = p(20.0, 2.0);
        let e = potential_extrema(&q);
        assert_eq!((e.minima.len(), e.maxima.len()), (2, 2));
        let (ap, am) = fixed_points(&q).unwrap();
        for m in &e.minima {
            assert!(phase_velocity(*m, &q).abs() < 1e-12);
            assert!(phase_potential_curvature(*m, &q) > 0.0);
            let hit = [ap.arg(), am.arg()].iter().any(|a| ((a - m).rem_euclid(PI)).min(PI - (a - m).rem_euclid(PI)) < 1e-10);
            assert!(hit);
        }
        for m in &e.maxima {
            assert!(phase_velocity(*m, &q).abs() < 1e-12);
            assert!(phase_potential_curvature(*m, &q) < 0.0);
        }
        let none = potential_extrema(&p(20.0, 0.5));
        assert!(none.minima.is_empty() && none.maxima.is_empty());
    }

    #[test]
    fn classifier() {
        assert_eq!(classify(&p(5.0, 0.5)).regime, Regime::LimitCycle);
        assert_eq!(classify(&p(5.0, 1.0)).regime, Regime::Critical);
        let b = classify(&p(5.0, 1.5));
        assert_eq!(b.regime, Regime::Bistable);
        assert!(b.omega.is_none() && b.fixed_points.is_some());
    }
}
