//! Phase-space theory in units of `gamma1`: Fourier-truncated phase
//! Fokker-Planck operators, the intensity Ornstein-Uhlenbeck spectrum,
//! first-order perturbative decay constants and Kramers activation rates.

use std::f64::consts::{FRAC_PI_2, PI};

use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ZERO};
use crate::params::ScaledParams;
use crate::spectral::{bisect_collision, EpSearch, ExceptionalPoint};

/// Default Fourier truncation.
pub const DEFAULT_TRUNCATION: usize = 64;
/// Smallest truncation accepted by [`build_phase_fp`].
pub const MIN_TRUNCATION: usize = 8;
/// Step used by the truncation convergence check.
pub const TRUNCATION_STEP: usize = 16;
/// Largest truncation the automatic enlargement will try.
pub const MAX_TRUNCATION: usize = 1024;

/// Intensity relaxation rates `mu_m = -m` for `m = 0..=m_max`.
pub fn intensity_eigenvalues(m_max: usize) -> Vec<f64> {
    (0..=m_max).map(|m| -(m as f64)).collect()
}

/// Standard deviation `sqrt(3 n_ex / 2)` of the stationary intensity
/// fluctuations.
pub fn intensity_stationary_std(n_ex: f64) -> f64 {
    (1.5 * n_ex).sqrt()
}

/// Right eigenfunction `psi_n(dN) = sqrt(w / (2^n n! pi)) e^{-w dN^2} H_n(dN sqrt w)`
/// of the intensity operator, with `w = 1 / (3 n_ex)` and `H_n` the
/// physicists' Hermite polynomials.
pub fn intensity_eigenfunction(n: usize, delta_n: f64, n_ex: f64) -> f64 {
    let w = 1.0 / (3.0 * n_ex);
    let x = delta_n * w.sqrt();
    // sqrt(w / pi) e^{-w dN^2} times the normalized Hermite recurrence
    // h_n = H_n / sqrt(2^n n!).
    let (mut h_prev, mut h) = (0.0, 1.0);
    for k in 0..n {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * x * h - (k as f64 / (k as f64 + 1.0)).sqrt() * h_prev;
        h_prev = h;
        h = next;
    }
    (w / PI).sqrt() * (-w * delta_n * delta_n).exp() * h
}

/// Fourier sector of the phase distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum PhaseSector {
    /// Even harmonics `e^{2iq phi}`, `q = 0..=M` (one conjugate half).
    EvenA,
    /// Odd harmonics `e^{i(2q+1) phi}`, `q = -M-1..=M`.
    OddB,
}

impl PhaseSector {
    pub fn label(self) -> &'static str {
        match self {
            PhaseSector::EvenA => "even",
            PhaseSector::OddB => "odd",
        }
    }

    /// Fourier harmonic carried by matrix index `j`.
    pub fn harmonic(self, j: usize, m: usize) -> i64 {
        match self {
            PhaseSector::EvenA => 2 * j as i64,
            PhaseSector::OddB => 2 * (j as i64 - m as i64 - 1) + 1,
        }
    }

    pub fn size(self, m: usize) -> usize {
        match self {
            PhaseSector::EvenA => m + 1,
            PhaseSector::OddB => 2 * m + 2,
        }
    }
}

/// Drift and diffusion parts of a phase operator, `Phi = H + V / n_ex`.
#[derive(Debug, Clone)]
pub struct PerturbationSplit {
    pub sector: PhaseSector,
    pub truncation: usize,
    /// Tridiagonal drift part.
    pub h: CMat,
    /// Diagonal of the diffusion part, `-3 k^2 / 8` for harmonic `k`.
    pub v: Vec<f64>,
    pub n_ex: f64,
}

impl PerturbationSplit {
    pub fn new(sector: PhaseSector, m: usize, params: &ScaledParams) -> Result<Self> {
        if m < MIN_TRUNCATION {
            return Err(Error::InvalidParams(format!("truncation M = {m} below minimum {MIN_TRUNCATION}")));
        }
        let size = sector.size(m);
        let k = |j: usize| sector.harmonic(j, m) as f64;
        // Row for harmonic k couples to k - 2 and k + 2 with -eta k and +eta k.
        let h = Mat::from_fn(size, size, |i, j| {
            let ki = k(i);
            if i == j {
                c64::new(0.0, params.delta * ki)
            } else if j + 1 == i {
                c64::new(-params.eta * ki, 0.0)
            } else if j == i + 1 {
                c64::new(params.eta * ki, 0.0)
            } else {
                ZERO
            }
        });
        let v = (0..size).map(|j| -3.0 * k(j) * k(j) / 8.0).collect();
        Ok(Self { sector, truncation: m, h, v, n_ex: params.n_ex })
    }

    pub fn assemble(&self) -> CMat {
        let mut m = self.h.clone();
        for (j, &v) in self.v.iter().enumerate() {
            m[(j, j)] += c64::new(v / self.n_ex, 0.0);
        }
        m
    }
}

/// Truncated tridiagonal phase Fokker-Planck operator of one sector.
#[derive(Debug, Clone)]
pub struct PhaseFPOperator {
    pub sector: PhaseSector,
    pub truncation: usize,
    pub params: ScaledParams,
    pub matrix: CMat,
}

pub fn build_phase_fp(sector: PhaseSector, m: usize, params: &ScaledParams) -> Result<PhaseFPOperator> {
    let split = PerturbationSplit::new(sector, m, params)?;
    Ok(PhaseFPOperator { sector, truncation: m, params: *params, matrix: split.assemble() })
}

impl PhaseFPOperator {
    /// Diagonal similarity `S^-1 Phi S` with `S_jj = sqrt|k_j|` (1 for
    /// `k = 0`). It equalizes the magnitudes of the coupling to `k - 2` and
    /// `k + 2`, which leaves the drift part anti-Hermitian away from the
    /// `k = -1, 1` link. Without it the strongly non-normal operator in the
    /// locked regime loses eigenvalue accuracy to roundoff.
    pub fn balanced(&self) -> CMat {
        let m = self.truncation;
        let s = |j: usize| (self.sector.harmonic(j, m).unsigned_abs().max(1) as f64).sqrt();
        let n = self.matrix.nrows();
        Mat::from_fn(n, n, |i, j| self.matrix[(i, j)] * (s(j) / s(i)))
    }

    /// The odd operator satisfies `conj(Phi) = P Phi P` for the index
    /// reversal `P` (harmonic `k -> -k`), so it is unitarily similar to a real
    /// matrix. Returns that real matrix in the basis
    /// `(e_j + e_Pj)/sqrt2, i(e_j - e_Pj)/sqrt2`, applied to [`Self::balanced`].
    pub fn odd_real_form(&self) -> Option<Mat<f64>> {
        if self.sector != PhaseSector::OddB {
            return None;
        }
        let n = self.matrix.nrows();
        let half = n / 2;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // Column c < half pairs j = c with P j = n-1-c.
        let q = Mat::<c64>::from_fn(n, n, |row, col| {
            let (c, anti) = if col < half { (col, false) } else { (col - half, true) };
            let pj = n - 1 - c;
            match (row == c, row == pj, anti) {
                (true, _, false) | (_, true, false) => c64::new(s, 0.0),
                (true, _, true) => c64::new(0.0, s),
                (_, true, true) => c64::new(0.0, -s),
                _ => ZERO,
            }
        });
        let r = &linalg::adjoint(&q) * &(&self.balanced() * &q);
        Some(Mat::from_fn(n, n, |i, j| r[(i, j)].re))
    }
}

/// Eigenvalues sorted slowest first. The even sector returns the stationary
/// zero, the positive-harmonic block and its complex conjugate (the
/// negative-harmonic block).
pub fn phase_spectrum(op: &PhaseFPOperator) -> Result<Vec<c64>> {
    let mut vals = match op.sector {
        PhaseSector::OddB => linalg::real_eigenvalues(&op.odd_real_form().expect("odd sector"))?,
        PhaseSector::EvenA => {
            // Row q = 0 vanishes: the spectrum is {0} plus the block q >= 1.
            let b = op.balanced();
            let n = b.nrows();
            let sub = Mat::from_fn(n - 1, n - 1, |i, j| b[(i + 1, j + 1)]);
            let pos = linalg::complex_eigenvalues(&sub)?;
            let mut v = vec![ZERO];
            v.extend(pos.iter().copied());
            v.extend(pos.iter().map(|z| z.conj()));
            v
        }
    };
    vals.sort_by(linalg::spectral_order);
    Ok(vals)
}

/// Spectrum with the truncation enlarged until the leading eigenvalues settle.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergedSpectrum {
    pub eigenvalues: Vec<c64>,
    pub truncation: usize,
    pub converged: bool,
    /// Largest change of the checked eigenvalues in the last enlargement.
    pub last_change: f64,
}

/// Number of leading eigenvalues compared by the convergence check.
pub const CONVERGENCE_MODES: usize = 6;

/// Largest change of the leading eigenvalues between two truncations and
/// whether every one is within `1e-12 + 1e-9 |z| + 1e-6 |z_6|`, with `z_6`
/// the last checked eigenvalue. The last term absorbs the square-root
/// roundoff sensitivity of nearly coalescent pairs. Eigenvalues are matched
/// to their nearest counterpart since close pairs may swap order.
fn leading_change(prev: &[c64], next: &[c64]) -> (f64, bool) {
    let n = CONVERGENCE_MODES.min(prev.len()).min(next.len());
    let floor = 1e-6 * next[n - 1].norm();
    let mut change = 0.0f64;
    let mut ok = true;
    for z in &next[..n] {
        let dz = prev[..n].iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min);
        change = change.max(dz);
        ok &= dz < 1e-12 + 1e-9 * z.norm() + floor;
    }
    (change, ok)
}

/// Truncation resolving the narrowest feature of the stationary phase
/// distribution. Its width is `sqrt(D / kappa)` with noise `D = 3 / (8 n_ex)`
/// and `kappa` the potential curvature at the locked minimum, floored by the
/// cubic bottleneck value `D^(1/3) (8 eta)^(2/3)` near the critical point.
/// Harmonics are kept up to `8 / width`.
pub fn suggested_truncation(params: &ScaledParams) -> usize {
    let d = 3.0 / (8.0 * params.n_ex);
    let curvature = 2.0 * (4.0 * params.eta * params.eta - params.delta * params.delta).max(0.0).sqrt();
    let bottleneck = d.cbrt() * (8.0 * params.eta.abs()).powf(2.0 / 3.0);
    let width = (d / curvature.max(bottleneck).max(d)).sqrt();
    let k_max = 8.0 / width;
    ((k_max / 2.0).ceil() as usize).clamp(MIN_TRUNCATION, MAX_TRUNCATION)
}

/// Repeats [`phase_spectrum`] at `M, M + 16, ...`, starting no lower than
/// [`suggested_truncation`], until the six leading
/// eigenvalues settle. Truncation error shrinks with `M` and roundoff does
/// not, so the search also stops (unconverged) once two enlargements in a row
/// fail to reduce the change.
pub fn converged_phase_spectrum(sector: PhaseSector, m_start: usize, params: &ScaledParams) -> Result<ConvergedSpectrum> {
    let mut m = m_start.max(suggested_truncation(params));
    let mut prev = phase_spectrum(&build_phase_fp(sector, m, params)?)?;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    loop {
        let next_m = m + TRUNCATION_STEP;
        let next = phase_spectrum(&build_phase_fp(sector, next_m, params)?)?;
        let (change, ok) = leading_change(&prev, &next);
        if change < best {
            best = change;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if ok || stalled >= 2 || next_m + TRUNCATION_STEP > MAX_TRUNCATION {
            return Ok(ConvergedSpectrum { eigenvalues: prev, truncation: m, converged: ok, last_change: change });
        }
        m = next_m;
        prev = next;
    }
}

/// First-order decay constant of one fundamental-band mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayConstant {
    /// Harmonic index `n` (frequency near `n Omega`).
    pub n: usize,
    /// `c_n = -Re nu^(1)`.
    pub c: f64,
    /// `Im nu^(1)`; expected to vanish, reported rather than asserted.
    pub imag: f64,
    /// Unperturbed eigenvalue of the drift part matched to `i n Omega`.
    pub nu0: c64,
}

/// `c_n` for `n = 1..=n_modes` from first-order perturbation theory in
/// `1 / n_ex` around the drift operator. Odd `n` come from the odd sector,
/// even `n` from the even sector.
pub fn perturbative_cn(params: &ScaledParams, m: usize, n_modes: usize) -> Result<Vec<DecayConstant>> {
    let disc = params.delta * params.delta - 4.0 * params.eta * params.eta;
    if !(disc > 0.0) {
        return Err(Error::WrongRegime("perturbative c_n needs eta < eta_c".into()));
    }
    // Unperturbed frequencies carry the sign of the detuning.
    let omega = disc.sqrt().copysign(params.delta);
    let mut out = Vec::with_capacity(n_modes);
    for sector in [PhaseSector::OddB, PhaseSector::EvenA] {
        let wanted: Vec<usize> = (1..=n_modes)
            .filter(|n| (n % 2 == 1) == (sector == PhaseSector::OddB))
            .collect();
        if wanted.is_empty() {
            continue;
        }
        let split = PerturbationSplit::new(sector, m, params)?;
        let (vals, right) = linalg::complex_eigen(&split.h)?;
        let left = linalg::inverse(&right)?;
        for n in wanted {
            let target = c64::new(0.0, n as f64 * omega);
            let (j, _) = vals
                .iter()
                .enumerate()
                .map(|(j, z)| (j, (z - target).norm()))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            let size = vals.len();
            let mut num = ZERO;
            let mut den = ZERO;
            for k in 0..size {
                num += left[(j, k)] * right[(k, j)] * split.v[k];
                den += left[(j, k)] * right[(k, j)];
            }
            let nu1 = num / den;
            out.push(DecayConstant { n, c: -nu1.re, imag: nu1.im, nu0: vals[j] });
        }
    }
    out.sort_by_key(|c| c.n);
    Ok(out)
}

/// Activation rates over the two barriers of the tilted washboard, in units
/// of `gamma1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KramersRates {
    /// Jumps towards increasing phase.
    pub right: f64,
    /// Jumps towards decreasing phase.
    pub left: f64,
    /// Decay rate of the slowest odd mode, twice the dominant direction.
    pub gap: f64,
    /// `right / left`.
    pub suppression: f64,
}

/// Barrier heights `(towards increasing phase, towards decreasing phase)`
/// measured from a minimum of `V(phi) = delta phi + eta cos 2 phi`.
pub fn barrier_heights(params: &ScaledParams) -> Result<(f64, f64)> {
    let disc = 4.0 * params.eta * params.eta - params.delta * params.delta;
    if !(disc > 0.0) {
        return Err(Error::WrongRegime("Kramers rates need eta > eta_c".into()));
    }
    let root = disc.sqrt();
    let tilt = params.delta * (params.delta / (2.0 * params.eta)).asin();
    Ok((root + tilt + params.delta * FRAC_PI_2, root + tilt - params.delta * FRAC_PI_2))
}

/// Kramers escape rates `(1/2pi) sqrt(|V''_max| V''_min) exp(-dV / D)` with
/// noise strength `D = 3 / (8 n_ex)`.
pub fn kramers_rates(params: &ScaledParams) -> Result<KramersRates> {
    let (up, down) = barrier_heights(params)?;
    let root = (4.0 * params.eta * params.eta - params.delta * params.delta).sqrt();
    // |V''| = 2 sqrt(4 eta^2 - delta^2) at both extrema.
    let attempt = root / PI;
    let inv_noise = 8.0 * params.n_ex / 3.0;
    let right = attempt * (-inv_noise * up).exp();
    let left = attempt * (-inv_noise * down).exp();
    Ok(KramersRates { right, left, gap: 2.0 * right.max(left), suppression: right / left })
}

/// Semiclassical exceptional point: collision of the two slowest odd-sector
/// eigenvalues of the phase operator, bisected in `eta`. The truncation is
/// chosen afresh at every evaluation, starting from `m`.
pub fn detect_ep_semiclassical(
    params_base: &ScaledParams,
    eta_bracket: (f64, f64),
    m: usize,
    search: &EpSearch,
) -> Result<ExceptionalPoint> {
    bisect_collision(eta_bracket, search, |eta| slowest_odd_pair(params_base, eta, m))
}

/// Brackets the semiclassical exceptional point from above the critical
/// point: the offset `eta - eta_c` starts at `first_offset` and doubles
/// until the slowest odd pair is real. Keeping the bracket tight keeps the
/// truncation small, since it grows quickly with `eta` at large `n_ex`.
pub fn bracket_ep_semiclassical(params_base: &ScaledParams, first_offset: f64, m: usize, search: &EpSearch) -> Result<(f64, f64)> {
    let eta_c = params_base.eta_c();
    if !(first_offset > 0.0) {
        return Err(Error::InvalidParams(format!("offset {first_offset} must be positive")));
    }
    let mut lo = eta_c;
    let mut offset = first_offset;
    for _ in 0..40 {
        let eta = eta_c + offset;
        let pair = slowest_odd_pair(params_base, eta, m)?;
        if pair[0].im.abs() <= search.imag_tol * (1.0 + pair[0].norm()) {
            return Ok((lo, eta));
        }
        lo = eta;
        offset *= 2.0;
    }
    Err(Error::Bracket { lo, hi: eta_c + offset })
}

fn slowest_odd_pair(params_base: &ScaledParams, eta: f64, m: usize) -> Result<[c64; 2]> {
    let spec = converged_phase_spectrum(PhaseSector::OddB, m, &params_base.with_eta(eta))?;
    Ok([spec.eigenvalues[0], spec.eigenvalues[1]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(delta: f64, ratio: f64, n_ex: f64) -> ScaledParams {
        ScaledParams::from_ratios(delta, ratio, n_ex).unwrap()
    }

    #[test]
    fn intensity_spectrum_and_eigenfunctions() {
        assert_eq!(intensity_eigenvalues(0), vec![0.0]);
        assert_eq!(intensity_eigenvalues(3)[3], -3.0);
        assert!((intensity_stationary_std(10.0) - 15f64.sqrt()).abs() < 1e-15);
        // Trapezoid quadrature of psi_0 and of the biorthogonality with the
        // left functions H_n(x sqrt w) / sqrt(2^n n!).
        let n_ex = 7.0;
        let w = 1.0 / (3.0 * n_ex);
        let h = 0.01;
        let grid: Vec<f64> = (-20000..=20000).map(|k| k as f64 * h).collect();
        let integral: f64 = grid.iter().map(|&x| intensity_eigenfunction(0, x, n_ex)).sum::<f64>() * h;
        assert!((integral - 1.0).abs() < 1e-8);
        let hermite2 = |x: f64| (4.0 * x * x - 2.0) / (8.0f64).sqrt();
        let ov: f64 = grid.iter().map(|&x| hermite2(x * w.sqrt()) * intensity_eigenfunction(2, x, n_ex)).sum::<f64>() * h;
        assert!((ov - 1.0).abs() < 1e-8);
        let cross: f64 = grid.iter().map(|&x| hermite2(x * w.sqrt()) * intensity_eigenfunction(1, x, n_ex)).sum::<f64>() * h;
        assert!(cross.abs() < 1e-8);
    }

    #[test]
    fn free_phase_operator_is_diagonal() {
        let p = sp(0.1, 0.0, 50.0);
        for sector in [PhaseSector::OddB, PhaseSector::EvenA] {
            let op = build_phase_fp(sector, 20, &p).unwrap();
            let n = op.matrix.nrows();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        assert_eq!(op.matrix[(i, j)], ZERO);
                    }
                }
                let k = sector.harmonic(i, 20) as f64;
                let want = c64::new(0.1 * k, -3.0 * k * k / 400.0);
                assert_eq!(op.matrix[(i, i)], c64::new(want.im, want.re));
            }
        }
    }

    #[test]
    fn structural_invariants() {
        let p = sp(0.1, 0.6, 30.0);
        for sector in [PhaseSector::OddB, PhaseSector::EvenA] {
            let op = build_phase_fp(sector, 16, &p).unwrap();
            let n = op.matrix.nrows();
            assert_eq!(n, sector.size(16));
            for i in 0..n {
                assert!(op.matrix[(i, i)].re <= 0.0);
                for j in 0..n {
                    if i.abs_diff(j) > 1 {
                        assert_eq!(op.matrix[(i, j)], ZERO);
                    }
                }
            }
            let split = PerturbationSplit::new(sector, 16, &p).unwrap();
            assert_eq!(linalg::max_abs_diff(&split.assemble(), &op.matrix), 0.0);
        }
        let even = build_phase_fp(PhaseSector::EvenA, 16, &p).unwrap();
        assert!((0..17).all(|j| even.matrix[(0, j)] == ZERO));
        assert!(build_phase_fp(PhaseSector::OddB, 4, &p).is_err());
    }

    #[test]
    fn real_form_preserves_spectrum() {
        let p = sp(0.1, 0.7, 40.0);
        let op = build_phase_fp(PhaseSector::OddB, 12, &p).unwrap();
        let a = linalg::complex_eigenvalues(&op.matrix).unwrap();
        let b = phase_spectrum(&op).unwrap();
        assert_eq!(a.len(), b.len());
        for x in &a {
            let nearest = b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-10, "{x}");
        }
    }

    #[test]
    fn spectra_are_stable_and_conjugate_closed() {
        for ratio in [0.4, 2.0] {
            let p = sp(0.1, ratio, 25.0);
            for sector in [PhaseSector::OddB, PhaseSector::EvenA] {
                let v = phase_spectrum(&build_phase_fp(sector, 32, &p).unwrap()).unwrap();
                for z in &v {
                    assert!(z.re <= 1e-10);
                    assert!(v.iter().any(|w| (w - z.conj()).norm() < 1e-9));
                }
                if sector == PhaseSector::EvenA {
                    assert_eq!(v.iter().filter(|z| z.norm() < 1e-12).count(), 1);
                    assert!(v.iter().filter(|z| z.norm() >= 1e-12).all(|z| z.re < 0.0));
                }
            }
        }
    }

    #[test]
    fn truncation_converges() {
        let p = sp(0.1, 0.4, 100.0);
        for sector in [PhaseSector::OddB, PhaseSector::EvenA] {
            let a = phase_spectrum(&build_phase_fp(sector, 64, &p).unwrap()).unwrap();
            let b = phase_spectrum(&build_phase_fp(sector, 80, &p).unwrap()).unwrap();
            for (x, y) in a.iter().zip(&b).take(6) {
                assert!((x - y).norm() < 1e-10);
            }
        }
        let c = converged_phase_spectrum(PhaseSector::OddB, 8, &p).unwrap();
        assert!(c.converged);
        assert!(c.truncation >= 8);
    }

    #[test]
    fn decay_constants_match_closed_form_first_mode() {
        // For the lowest odd mode the first-order correction has the closed
        // form c_1 = (3/8)(1 + e^2/2) / (1 - e^2) with e = eta / eta_c.
        for ratio in [0.0, 0.2, 0.4, 0.6, 0.8] {
            let p = sp(0.1, ratio, 50.0);
            let c = perturbative_cn(&p, 64, 1).unwrap();
            let e2: f64 = ratio * ratio;
            let want = 0.375 * (1.0 + e2 / 2.0) / (1.0 - e2);
            assert!((c[0].c - want).abs() < 1e-8 * want.max(1.0), "{ratio}: {} vs {want}", c[0].c);
            assert!(c[0].imag.abs() < 1e-8);
        }
    }

    #[test]
    fn free_decay_constants_are_quadratic() {
        let p = sp(0.1, 0.0, 50.0);
        let c = perturbative_cn(&p, 64, 4).unwrap();
        for (k, dc) in c.iter().enumerate() {
            let n = (k + 1) as f64;
            assert!((dc.c - 0.375 * n * n).abs() < 1e-12);
        }
        assert!(matches!(perturbative_cn(&sp(0.1, 1.5, 50.0), 64, 2), Err(Error::WrongRegime(_))));
    }

    #[test]
    fn kramers_symmetry_and_direction() {
        let p = sp(0.1, 2.0, 10.0);
        let k = kramers_rates(&p).unwrap();
        assert!(k.left > k.right);
        assert!((k.gap - 2.0 * k.left).abs() < 1e-18);
        let mirrored = kramers_rates(&sp(-0.1, 2.0, 10.0)).unwrap();
        assert!((mirrored.gap - k.gap).abs() < 1e-15 * k.gap);
        assert!((mirrored.right - k.left).abs() < 1e-15 * k.left);
        // Zero tilt: equal rates, gap = (4 eta / pi) exp(-16 n eta / 3).
        let flat = ScaledParams::new(0.0, 0.2, 10.0).unwrap();
        let k0 = kramers_rates(&flat).unwrap();
        assert_eq!(k0.left, k0.right);
        let want = 4.0 * 0.2 / PI * (-16.0 * 10.0 * 0.2 / 3.0f64).exp();
        assert!((k0.gap - want).abs() < 1e-14 * want);
        // Suppression exp(-8 n delta pi / 3).
        let ratio = (-8.0 * 10.0 * 0.1 * PI / 3.0f64).exp();
        assert!((k.suppression - ratio).abs() < 1e-12 * ratio);
        assert!(matches!(kramers_rates(&sp(0.1, 0.5, 10.0)), Err(Error::WrongRegime(_))));
    }

    #[test]
    fn barrier_heights_match_potential() {
        use crate::meanfield::{phase_potential, potential_extrema};
        let p = sp(0.1, 2.5, 10.0);
        let mp = crate::params::ModelParams::new(1.0, 0.05, 0.1, p.eta, 0.0).unwrap();
        let ext = potential_extrema(&mp);
        let phi_min = ext.minima[0];
        let v_min = phase_potential(phi_min, &mp);
        // The nearest maxima on each side.
        let right = ext.maxima.iter().map(|&m| if m > phi_min { m } else { m + 2.0 * PI }).fold(f64::INFINITY, f64::min);
        let left = ext.maxima.iter().map(|&m| if m < phi_min { m } else { m - 2.0 * PI }).fold(f64::NEG_INFINITY, f64::max);
        let (up, down) = barrier_heights(&p).unwrap();
        assert!((phase_potential(right, &mp) - v_min - up).abs() < 1e-12);
        assert!((phase_potential(left, &mp) - v_min - down).abs() < 1e-12);
    }

    #[test]
    fn semiclassical_ep_above_critical_point() {
        let p = sp(0.1, 1.0, 200.0);
        let ep = detect_ep_semiclassical(&p, (p.eta_c(), 2.0 * p.eta_c()), 64, &EpSearch::default()).unwrap();
        assert!(ep.eta_ep > p.eta_c());
        assert!(ep.below[0].im != 0.0);
        assert_eq!(ep.above[0].im, 0.0);
        let far = detect_ep_semiclassical(&p, (0.2 * p.eta_c(), 0.5 * p.eta_c()), 64, &EpSearch::default());
        assert!(matches!(far, Err(Error::Bracket { .. })));
    }

    #[test]
    fn kramers_gap_approaches_phase_operator_gap() {
        // The ratio crosses 1 near n_ex = 11, so the agreement is monotone
        // only from n_ex = 20 on.
        let rel: Vec<f64> = [10.0, 20.0, 40.0, 80.0]
            .iter()
            .map(|&n| {
                let p = sp(0.1, 2.0, n);
                let fp = -converged_phase_spectrum(PhaseSector::OddB, 64, &p).unwrap().eigenvalues[0].re;
                (kramers_rates(&p).unwrap().gap / fp - 1.0).abs()
            })
            .collect();
        assert!(rel.iter().all(|&r| r < 0.1), "{rel:?}");
        assert!(rel[1] > rel[2] && rel[2] > rel[3], "{rel:?}");
    }

    #[test]
    fn expanding_bracket_contains_the_ep() {
        let p = sp(0.1, 1.0, 200.0);
        let search = EpSearch::default();
        let (lo, hi) = bracket_ep_semiclassical(&p, 1e-4, 64, &search).unwrap();
        let ep = detect_ep_semiclassical(&p, (p.eta_c(), 2.0 * p.eta_c()), 64, &search).unwrap();
        assert!(lo < ep.eta_ep && ep.eta_ep <= hi, "{lo} {} {hi}", ep.eta_ep);
        assert!(hi - lo <= 0.5 * (hi - p.eta_c()) + 1e-15);
        assert!(bracket_ep_semiclassical(&p, 0.0, 64, &search).is_err());
    }
}
