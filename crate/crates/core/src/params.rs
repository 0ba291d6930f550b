use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical rates and frequencies of the driven oscillator.
///
/// `delta` is the detuning between the bare frequency and half the drive
/// frequency; `omega_s` is only needed in the laboratory frame and may be
/// zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta: f64,
    pub eta: f64,
    pub omega_s: f64,
}

impl ModelParams {
    pub fn new(gamma1: f64, gamma2: f64, delta: f64, eta: f64, omega_s: f64) -> Result<Self> {
        let p = Self { gamma1, gamma2, delta, eta, omega_s };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from the dimensionless ratios used throughout:
    /// `delta = delta_ratio * gamma1`, `eta = eta_ratio * |delta| / 2` and
    /// `gamma2 = gamma1 / (2 n_ex)`.
    pub fn from_ratios(gamma1: f64, n_ex: f64, delta_ratio: f64, eta_ratio: f64) -> Result<Self> {
        if !(n_ex > 0.0) {
            return Err(Error::InvalidParams(format!("n_ex must be positive, got {n_ex}")));
        }
        let delta = delta_ratio * gamma1;
        Self::new(gamma1, gamma1 / (2.0 * n_ex), delta, eta_ratio * delta.abs() / 2.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.gamma1, self.gamma2, self.delta, self.eta, self.omega_s];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.gamma1 <= 0.0 || self.gamma2 <= 0.0 {
            return Err(Error::InvalidParams("gamma1 and gamma2 must be positive".into()));
        }
        if self.eta < 0.0 {
            return Err(Error::InvalidParams("eta must be non-negative".into()));
        }
        if self.omega_s < 0.0 {
            return Err(Error::InvalidParams("omega_s must be non-negative".into()));
        }
        Ok(())
    }

    /// Mean-field excitation number `gamma1 / (2 gamma2)`.
    pub fn n_ex(&self) -> f64 {
        self.gamma1 / (2.0 * self.gamma2)
    }

    /// Critical squeezing `|delta| / 2` separating limit cycle and bistability.
    pub fn eta_c(&self) -> f64 {
        self.delta.abs() / 2.0
    }

    pub fn eta_ratio(&self) -> f64 {
        self.eta / self.eta_c()
    }

    /// Bare oscillator frequency in the laboratory frame.
    pub fn omega0(&self) -> f64 {
        self.delta + self.omega_s
    }

    /// Drive period `pi / omega_s`.
    pub fn period(&self) -> Result<f64> {
        if self.omega_s > 0.0 {
            Ok(std::f64::consts::PI / self.omega_s)
        } else {
            Err(Error::MissingDriveFrequency)
        }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }

    pub fn with_omega_s(self, omega_s: f64) -> Self {
        Self { omega_s, ..self }
    }

    /// Rates in units of `gamma1`, as consumed by the phase-space operators.
    pub fn scaled(&self) -> ScaledParams {
        ScaledParams {
            delta: self.delta / self.gamma1,
            eta: self.eta / self.gamma1,
            n_ex: self.n_ex(),
        }
    }
}

/// Detuning and squeezing in units of `gamma1`, plus the excitation number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub delta: f64,
    pub eta: f64,
    pub n_ex: f64,
}

impl ScaledParams {
    pub fn new(delta: f64, eta: f64, n_ex: f64) -> Result<Self> {
        if !(n_ex > 0.0) || !delta.is_finite() || !(eta >= 0.0) || !n_ex.is_finite() || !eta.is_finite() {
            return Err(Error::InvalidParams(format!(
                "scaled parameters need finite delta, eta >= 0, n_ex > 0 (got {delta}, {eta}, {n_ex})"
            )));
        }
        Ok(Self { delta, eta, n_ex })
    }

    /// `eta_ratio` is measured in units of the critical value `|delta| / 2`.
    pub fn from_ratios(delta: f64, eta_ratio: f64, n_ex: f64) -> Result<Self> {
        Self::new(delta, eta_ratio * delta.abs() / 2.0, n_ex)
    }

    pub fn eta_c(&self) -> f64 {
        self.delta.abs() / 2.0
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }

    pub fn with_n_ex(self, n_ex: f64) -> Self {
        Self { n_ex, ..self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_round_trip() {
        let p = ModelParams::from_ratios(1.0, 20.0, 0.1, 2.0).unwrap();
        assert!((p.n_ex() - 20.0).abs() < 1e-12);
        assert!((p.eta_c() - 0.05).abs() < 1e-15);
        assert!((p.eta - 0.1).abs() < 1e-15);
        assert!((p.eta_ratio() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn period_needs_drive() {
        let p = ModelParams::from_ratios(1.0, 5.0, 0.1, 1.0).unwrap();
        assert_eq!(p.period(), Err(Error::MissingDriveFrequency));
        let q = p.with_omega_s(2.0);
        assert!((q.period().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((q.omega0() - 2.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(ModelParams::new(0.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, -1.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, f64::NAN, 0.0, 0.0, 0.0).is_err());
        assert!(ModelParams::from_ratios(1.0, 0.0, 0.1, 1.0).is_err());
    }
}
