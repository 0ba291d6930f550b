//! Truncated bosonic Hilbert space: ladder operators, parity and states.

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::params::ModelParams;

/// Ladder, number and parity operators on the span of `|0>, ..., |d-1>`.
#[derive(Debug, Clone)]
pub struct FockSpace {
    d: usize,
    a: CMat,
    a_dag: CMat,
    n_op: CMat,
    parity: CMat,
}

impl FockSpace {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let a = Mat::from_fn(d, d, |i, j| if j == i + 1 { c64::new((j as f64).sqrt(), 0.0) } else { ZERO });
        let a_dag = linalg::adjoint(&a);
        let n_op = Mat::from_fn(d, d, |i, j| if i == j { c64::new(i as f64, 0.0) } else { ZERO });
        let parity = Mat::from_fn(d, d, |i, j| if i == j { c64::new(parity_sign(i), 0.0) } else { ZERO });
        Ok(Self { d, a, a_dag, n_op, parity })
    }

    pub fn cutoff(&self) -> usize {
        self.d
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn a_dag(&self) -> &CMat {
        &self.a_dag
    }

    pub fn n_op(&self) -> &CMat {
        &self.n_op
    }

    pub fn parity(&self) -> &CMat {
        &self.parity
    }

    /// Projector onto the Fock state `|n>`.
    pub fn number_state(&self, n: usize) -> Result<DensityMatrix> {
        if n >= self.d {
            return Err(Error::InvalidParams(format!("Fock state {n} outside cutoff {}", self.d)));
        }
        Ok(DensityMatrix(Mat::from_fn(self.d, self.d, |i, j| if i == n && j == n { ONE } else { ZERO })))
    }

    /// Pure coherent state `|alpha><alpha|` from the truncated Poisson series,
    /// renormalized after truncation.
    ///
    /// Fails when the discarded tail weight exceeds [`COHERENT_TAIL_TOL`].
    pub fn coherent_state(&self, amplitude: c64) -> Result<DensityMatrix> {
        let norm_sq = amplitude.norm_sqr();
        let tail = poisson_tail(norm_sq, self.d);
        if tail > COHERENT_TAIL_TOL {
            return Err(Error::TruncationOverflow { norm_sq, cutoff: self.d, tail });
        }
        let mut psi = vec![ZERO; self.d];
        psi[0] = ONE;
        for n in 1..self.d {
            psi[n] = psi[n - 1] * amplitude / (n as f64).sqrt();
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut psi {
            *z /= norm;
        }
        Ok(DensityMatrix(Mat::from_fn(self.d, self.d, |i, j| psi[i] * psi[j].conj())))
    }
}

/// Largest tolerated Poisson weight above the cutoff for a coherent state.
pub const COHERENT_TAIL_TOL: f64 = 1e-8;

pub(crate) fn parity_sign(m: usize) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `P(N >= d)` for `N ~ Poisson(mean)`, summed directly to avoid cancellation.
fn poisson_tail(mean: f64, d: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut log_p = -mean + d as f64 * mean.ln() - ln_factorial(d);
    let mut tail = 0.0;
    let mut n = d;
    loop {
        let p = log_p.exp();
        tail += p;
        n += 1;
        log_p += mean.ln() - (n as f64).ln();
        if (n as f64) > mean && p < 1e-18 * tail.max(1e-300) {
            break;
        }
        if n > d + 100_000 {
            break;
        }
    }
    tail
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Cutoff heuristic `max(16, ceil(n + 8 sqrt(n) + 8))` for a state with mean
/// occupation `n`.
pub fn default_cutoff(n_ex: f64) -> usize {
    let d = (n_ex + 8.0 * n_ex.sqrt() + 8.0).ceil();
    (d as usize).max(16)
}

/// [`default_cutoff`] evaluated at the larger of `n_ex` and the bistable
/// fixed-point occupation, which exceeds `n_ex` deep in the bistable phase.
pub fn cutoff_for(params: &ModelParams) -> usize {
    let mut occupation = params.n_ex();
    let disc = 4.0 * params.eta * params.eta - params.delta * params.delta;
    if disc > 0.0 {
        occupation += disc.sqrt() / params.gamma2;
    }
    default_cutoff(occupation)
}

/// A state on the truncated space.
#[derive(Debug, Clone)]
pub struct DensityMatrix(CMat);

/// Tolerances of the density-matrix invariants.
pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-9;

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(rho: CMat) -> Result<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() < 2 {
            return Err(Error::InvalidState(format!("shape {}x{}", rho.nrows(), rho.ncols())));
        }
        let herm = linalg::max_abs_diff(&rho, &linalg::adjoint(&rho));
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("non-Hermitian by {herm:.2e}")));
        }
        let tr = linalg::trace(&rho);
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min = linalg::hermitian_eigenvalues(&rho)?[0];
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self(rho))
    }

    /// Hermitian part of `m` scaled to unit trace. Positivity is not checked;
    /// use for states produced by a trusted propagator.
    pub fn from_unnormalized(m: &CMat) -> Result<Self> {
        let h = linalg::hermitize(m);
        let tr = linalg::trace(&h).re;
        if !(tr.abs() > 0.0) || !tr.is_finite() {
            return Err(Error::InvalidState(format!("cannot normalize trace {tr}")));
        }
        Ok(Self(linalg::scaled(&h, c64::new(1.0 / tr, 0.0))))
    }

    pub fn cutoff(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    /// `Tr[op rho]`.
    pub fn expect(&self, op: &CMat) -> c64 {
        linalg::expectation(op, &self.0)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::hermitian_eigenvalues(&self.0)?[0])
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        linalg::trace_distance(&self.0, &other.0)
    }

    /// `P rho P` with the parity operator.
    pub fn parity_conjugate(&self) -> DensityMatrix {
        let d = self.cutoff();
        DensityMatrix(Mat::from_fn(d, d, |i, j| self.0[(i, j)] * (parity_sign(i) * parity_sign(j))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_space() {
        let f = FockSpace::new(2).unwrap();
        assert_eq!(f.a()[(0, 1)], ONE);
        assert_eq!(f.a()[(0, 0)], ZERO);
        assert_eq!(f.a()[(1, 0)], ZERO);
        assert_eq!(f.a()[(1, 1)], ZERO);
        assert!(matches!(FockSpace::new(1), Err(Error::InvalidDimension(1))));
    }

    #[test]
    fn ladder_and_parity_entries() {
        let f = FockSpace::new(3).unwrap();
        assert!((f.a()[(1, 2)].re - 1.41421356).abs() < 1e-8);
        let f = FockSpace::new(4).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| f.parity()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn operator_invariants() {
        let f = FockSpace::new(7).unwrap();
        let d = 7;
        let comm = &(f.a() * f.a_dag()) - &(f.a_dag() * f.a());
        for i in 0..d - 1 {
            for j in 0..d - 1 {
                let want = if i == j { ONE } else { ZERO };
                assert!((comm[(i, j)] - want).norm() < 1e-14);
            }
        }
        let pap = &(f.parity() * f.a()) * f.parity();
        assert_eq!(linalg::max_abs_diff(&pap, &linalg::scaled(f.a(), c64::new(-1.0, 0.0))), 0.0);
        let pp = f.parity() * f.parity();
        for i in 0..d {
            assert_eq!(pp[(i, i)], ONE);
            assert_eq!(f.n_op()[(i, i)].re, i as f64);
        }
        assert_eq!(linalg::max_abs_diff(f.a_dag(), &linalg::adjoint(f.a())), 0.0);
    }

    #[test]
    fn vacuum_and_unit_coherent_state() {
        let f = FockSpace::new(8).unwrap();
        let vac = f.coherent_state(ZERO).unwrap();
        assert_eq!(linalg::max_abs_diff(vac.matrix(), f.number_state(0).unwrap().matrix()), 0.0);

        let f = FockSpace::new(32).unwrap();
        let rho = f.coherent_state(ONE).unwrap();
        assert!((rho.expect(f.n_op()).re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn coherent_mean_matches_poisson_series() {
        // Independent evaluation of <a> = sum_n sqrt(n) c_{n-1} c_n over the
        // normalized truncated series, in plain floating point.
        let d = 64;
        let x: f64 = 10.0;
        let mut c = vec![0.0f64; d];
        let mut log_fact = 0.0;
        for n in 0..d {
            if n > 0 {
                log_fact += (n as f64).ln();
            }
            c[n] = (-x / 2.0 + n as f64 * x.sqrt().ln() - log_fact / 2.0).exp();
        }
        let norm: f64 = c.iter().map(|v| v * v).sum();
        let mean_a: f64 = (1..d).map(|n| (n as f64).sqrt() * c[n - 1] * c[n]).sum::<f64>() / norm;

        let f = FockSpace::new(d).unwrap();
        let rho = f.coherent_state(c64::new(x.sqrt(), 0.0)).unwrap();
        let got = rho.expect(f.a());
        assert!((got.re - mean_a).abs() < 1e-12);
        assert!((got.re - x.sqrt()).abs() < 1e-6);
        assert!(got.im.abs() < 1e-14);
    }

    #[test]
    fn coherent_state_rejects_large_amplitude() {
        let f = FockSpace::new(16).unwrap();
        assert!(matches!(
            f.coherent_state(c64::new(4.0, 0.0)),
            Err(Error::TruncationOverflow { cutoff: 16, .. })
        ));
    }

    #[test]
    fn cutoff_formula() {
        assert_eq!(default_cutoff(1.0), 17);
        assert_eq!(default_cutoff(10.0), 44);
        assert_eq!(default_cutoff(20.0), 64);
        assert_eq!(default_cutoff(0.01), 16);
    }

    #[test]
    fn params_aware_cutoff_grows_in_bistable_phase() {
        let p = ModelParams::from_ratios(1.0, 20.0, 0.1, 0.4).unwrap();
        assert_eq!(cutoff_for(&p), 64);
        let q = ModelParams::from_ratios(1.0, 20.0, 0.1, 2.0).unwrap();
        assert!(cutoff_for(&q) > 64);
    }

    #[test]
    fn density_matrix_validation() {
        let f = FockSpace::new(3).unwrap();
        assert!(DensityMatrix::new(f.n_op().clone()).is_err());
        let bad = Mat::from_fn(3, 3, |i, j| if i == j { c64::new([1.5, -0.5, 0.0][i], 0.0) } else { ZERO });
        assert!(matches!(DensityMatrix::new(bad), Err(Error::InvalidState(_))));
        let ok = FockSpace::new(12).unwrap().coherent_state(c64::new(0.3, 0.2)).unwrap();
        assert!(DensityMatrix::new(ok.into_matrix()).is_ok());
    }
}
