//! Liouvillian eigensystems and the quantities derived from them: steady
//! state, gap, frequency bands, exceptional points and symmetry-broken states.

use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockSpace};
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::liouvillian::{build_rotating_liouvillian, unvectorize, HermitianBasis, Parity, Superoperator};
use crate::params::ModelParams;

/// Largest parity block handed to the dense eigensolver.
pub const MAX_SECTOR_DIM: usize = 8192;

/// Modes with `1 / (|l| |r|)` below this are flagged as close to an
/// exceptional point; their biorthonormal normalization is unreliable.
pub const NEAR_EP_THRESHOLD: f64 = 1e-6;

/// Which route [`diagonalize`] takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// One real eigenproblem per parity sector (default).
    SectorReduced,
    /// One complex eigenproblem on the full `d^2` space; parity from the
    /// expectation of the parity superoperator. Kept for cross-checks.
    Full,
}

#[derive(Debug, Clone)]
enum BlockBasis {
    Hermitian(HermitianBasis),
    /// Standard basis `|m><n|` of the whole space.
    Standard(usize),
}

impl BlockBasis {
    fn to_matrix<F: Fn(usize) -> c64>(&self, coeff: F) -> CMat {
        match self {
            BlockBasis::Hermitian(b) => b.to_matrix(coeff),
            BlockBasis::Standard(d) => {
                let v: Vec<c64> = (0..d * d).map(coeff).collect();
                unvectorize(&v, *d)
            }
        }
    }

    fn coords(&self, x: &CMat) -> Vec<c64> {
        match self {
            BlockBasis::Hermitian(b) => b.coords(x),
            BlockBasis::Standard(_) => crate::liouvillian::vectorize(x),
        }
    }
}

#[derive(Debug, Clone)]
struct Block {
    basis: BlockBasis,
    /// Right eigenvectors as unit-norm columns.
    right: Option<CMat>,
    /// Rows of the inverse of `right`: the dual (left) coordinates.
    left: Option<CMat>,
}

/// One eigenmode: eigenvalue, parity and where its vectors live.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode {
    pub eigenvalue: c64,
    pub parity: Parity,
    /// Set when the left/right pair is nearly orthogonal (see
    /// [`NEAR_EP_THRESHOLD`]); unknown (`false`) without vectors.
    pub near_ep: bool,
    #[serde(skip)]
    block: usize,
    #[serde(skip)]
    col: usize,
}

impl Mode {
    /// Decay rate `-Re lambda`.
    pub fn decay_rate(&self) -> f64 {
        -self.eigenvalue.re
    }

    pub fn frequency(&self) -> f64 {
        self.eigenvalue.im
    }
}

/// Sorted eigensystem of a Liouvillian.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    params: Option<ModelParams>,
    cutoff: usize,
    modes: Vec<Mode>,
    blocks: Vec<Block>,
}

/// What to compute in [`diagonalize_with`].
#[derive(Debug, Clone)]
pub struct DiagonalizeOptions {
    pub route: Route,
    pub vectors: bool,
    /// Sectors to diagonalize on the sector-reduced route.
    pub sectors: Vec<Parity>,
}

impl Default for DiagonalizeOptions {
    fn default() -> Self {
        Self { route: Route::SectorReduced, vectors: true, sectors: vec![Parity::Even, Parity::Odd] }
    }
}

impl DiagonalizeOptions {
    pub fn eigenvalues_only() -> Self {
        Self { vectors: false, ..Self::default() }
    }

    pub fn sector(parity: Parity, vectors: bool) -> Self {
        Self { route: Route::SectorReduced, vectors, sectors: vec![parity] }
    }
}

/// Full eigensystem with left and right modes.
pub fn diagonalize(superop: &Superoperator, sector_reduce: bool) -> Result<SpectralDecomposition> {
    let route = if sector_reduce { Route::SectorReduced } else { Route::Full };
    diagonalize_with(superop, &DiagonalizeOptions { route, ..Default::default() })
}

pub fn diagonalize_with(superop: &Superoperator, opts: &DiagonalizeOptions) -> Result<SpectralDecomposition> {
    let d = superop.cutoff();
    let mut modes = Vec::new();
    let mut blocks = Vec::new();
    match opts.route {
        Route::SectorReduced => {
            for &parity in &opts.sectors {
                let basis = HermitianBasis::new(d, parity);
                if basis.len() > MAX_SECTOR_DIM {
                    return Err(Error::TooLarge { size: basis.len(), max: MAX_SECTOR_DIM });
                }
                let block = superop.real_sector_block(&basis);
                let b = blocks.len();
                if opts.vectors {
                    let (vals, vecs) = linalg::real_eigen(&block)?;
                    let (right, left, near) = biorthonormalize(vecs)?;
                    for (col, &ev) in vals.iter().enumerate() {
                        modes.push(Mode { eigenvalue: ev, parity, near_ep: near[col], block: b, col });
                    }
                    blocks.push(Block { basis: BlockBasis::Hermitian(basis), right: Some(right), left: Some(left) });
                } else {
                    for (col, ev) in linalg::real_eigenvalues(&block)?.into_iter().enumerate() {
                        modes.push(Mode { eigenvalue: ev, parity, near_ep: false, block: b, col });
                    }
                    blocks.push(Block { basis: BlockBasis::Hermitian(basis), right: None, left: None });
                }
            }
        }
        Route::Full => {
            let dense = superop.to_dense()?;
            let (vals, vecs) = linalg::complex_eigen(&dense)?;
            let (right, left, near) = biorthonormalize(vecs)?;
            for (col, &ev) in vals.iter().enumerate() {
                let parity = standard_parity(&right, col, d);
                modes.push(Mode { eigenvalue: ev, parity, near_ep: near[col], block: 0, col });
            }
            let (right, left) = if opts.vectors { (Some(right), Some(left)) } else { (None, None) };
            blocks.push(Block { basis: BlockBasis::Standard(d), right, left });
        }
    }
    modes.sort_by(|a, b| linalg::spectral_order(&a.eigenvalue, &b.eigenvalue));
    Ok(SpectralDecomposition { params: superop.params().copied(), cutoff: d, modes, blocks })
}

/// Normalizes right vectors to unit norm and returns the inverse rows as the
/// dual basis, plus the near-EP flag per mode.
fn biorthonormalize(mut right: CMat) -> Result<(CMat, CMat, Vec<bool>)> {
    let n = right.ncols();
    for j in 0..n {
        let norm = (0..n).map(|i| right[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numeric(format!("degenerate eigenvector {j}")));
        }
        for i in 0..n {
            right[(i, j)] /= norm;
        }
    }
    let left = linalg::inverse(&right)?;
    let near = (0..n)
        .map(|j| {
            let l = (0..n).map(|k| left[(j, k)].norm_sqr()).sum::<f64>().sqrt();
            1.0 / l < NEAR_EP_THRESHOLD
        })
        .collect();
    Ok((right, left, near))
}

/// Parity of a mode from `<r|Z|r> / <r|r>` in the standard basis.
fn standard_parity(right: &CMat, col: usize, d: usize) -> Parity {
    let mut num = 0.0;
    let mut den = 0.0;
    for idx in 0..d * d {
        let w = right[(idx, col)].norm_sqr();
        den += w;
        if Parity::of(idx % d, idx / d) == Parity::Even {
            num += w;
        } else {
            num -= w;
        }
    }
    if num >= 0.0 * den {
        Parity::Even
    } else {
        Parity::Odd
    }
}

impl SpectralDecomposition {
    pub fn params(&self) -> Option<&ModelParams> {
        self.params.as_ref()
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, j: usize) -> &Mode {
        &self.modes[j]
    }

    pub fn eigenvalues(&self) -> Vec<c64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    pub fn has_vectors(&self) -> bool {
        self.blocks.iter().all(|b| b.right.is_some())
    }

    fn vectors(&self, j: usize) -> Result<(&Block, &CMat, &CMat, usize)> {
        let m = &self.modes[j];
        let b = &self.blocks[m.block];
        match (&b.right, &b.left) {
            (Some(r), Some(l)) => Ok((b, r, l, m.col)),
            _ => Err(Error::InvalidParams("decomposition was computed without eigenvectors".into())),
        }
    }

    /// Right mode `r_j` as a `d x d` matrix, unit Frobenius norm.
    pub fn right(&self, j: usize) -> Result<CMat> {
        let (b, r, _, col) = self.vectors(j)?;
        Ok(b.basis.to_matrix(|a| r[(a, col)]))
    }

    /// Left mode `l_j`, normalized so that `Tr[l_j^dag r_k] = delta_jk`.
    pub fn left(&self, j: usize) -> Result<CMat> {
        let (b, _, l, col) = self.vectors(j)?;
        Ok(b.basis.to_matrix(|a| l[(col, a)].conj()))
    }

    /// `Tr[l_j^dag x]`, the weight of mode `j` in `x`.
    pub fn overlap(&self, j: usize, x: &CMat) -> Result<c64> {
        let (b, _, l, col) = self.vectors(j)?;
        let c = b.basis.coords(x);
        Ok(c.iter().enumerate().map(|(a, &xa)| l[(col, a)] * xa).sum())
    }

    /// Weights `Tr[l_j^dag x]` for every mode, and `Tr[op r_j]` for every
    /// mode, computed blockwise in coordinates.
    pub fn mode_weights(&self, x: &CMat, op: &CMat) -> Result<(Vec<c64>, Vec<c64>)> {
        let mut block_data = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (Some(r), Some(l)) = (&b.right, &b.left) else {
                return Err(Error::InvalidParams("decomposition was computed without eigenvectors".into()));
            };
            let xc = b.basis.coords(x);
            // Tr[op B_a] is the coordinate of op^T along the conjugate basis.
            let op_t = linalg::adjoint(op);
            let oc: Vec<c64> = b.basis.coords(&op_t).iter().map(|z| z.conj()).collect();
            let n = xc.len();
            let weights: Vec<c64> = (0..n).map(|j| (0..n).map(|a| l[(j, a)] * xc[a]).sum()).collect();
            let obs: Vec<c64> = (0..n).map(|j| (0..n).map(|a| oc[a] * r[(a, j)]).sum()).collect();
            block_data.push((weights, obs));
        }
        Ok(self
            .modes
            .iter()
            .map(|m| (block_data[m.block].0[m.col], block_data[m.block].1[m.col]))
            .unzip())
    }

    /// Whether modes of this parity were diagonalized.
    pub fn covers(&self, parity: Parity) -> bool {
        self.modes.iter().any(|m| m.parity == parity)
    }

    /// Number of eigenvalues with `|lambda| < tol`.
    pub fn zero_multiplicity(&self, tol: f64) -> usize {
        self.modes.iter().filter(|m| m.eigenvalue.norm() < tol).count()
    }

    /// Largest real part, which must be (numerically) zero for a Liouvillian.
    pub fn max_real_part(&self) -> f64 {
        self.modes.iter().map(|m| m.eigenvalue.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Tolerance on `|lambda_0|` for the stationary mode.
pub const STEADY_STATE_TOL: f64 = 1e-8;

/// `rho_ss = r_0 / Tr r_0`, Hermitized.
pub fn steady_state(dec: &SpectralDecomposition) -> Result<DensityMatrix> {
    let m0 = dec.modes.first().ok_or_else(|| Error::Numeric("empty spectrum".into()))?;
    if m0.eigenvalue.norm() > STEADY_STATE_TOL {
        return Err(Error::Numeric(format!("no zero eigenvalue: lambda_0 = {}", m0.eigenvalue)));
    }
    if dec.zero_multiplicity(STEADY_STATE_TOL) > 1 {
        return Err(Error::Numeric("stationary eigenvalue is degenerate".into()));
    }
    DensityMatrix::from_unnormalized(&dec.right(0)?)
}

/// Steady state from a sparse direct solve in the even sector; the route for
/// cutoffs where a full eigensolve is too costly.
pub fn steady_state_direct(superop: &Superoperator) -> Result<DensityMatrix> {
    let d = superop.cutoff();
    let basis = HermitianBasis::new(d, Parity::Even);
    let n = basis.len();
    // Row 0 (the coordinate of |0><0|) is replaced by the trace functional.
    let diag_rows: Vec<usize> = basis
        .elems()
        .iter()
        .enumerate()
        .filter_map(|(k, e)| matches!(e, crate::liouvillian::BasisElem::Diag(_)).then_some(k))
        .collect();
    let mut trips: Vec<Triplet<usize, usize, f64>> = superop
        .real_sector_triplets(&basis)
        .into_iter()
        .filter(|&(i, _, _)| i != 0)
        .map(|(i, j, v)| Triplet::new(i, j, v))
        .collect();
    trips.extend(diag_rows.iter().map(|&k| Triplet::new(0, k, 1.0)));
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| Error::Numeric(format!("sparse assembly: {e:?}")))?;
    let lu = a.sp_lu().map_err(|e| Error::Numeric(format!("sparse LU: {e:?}")))?;
    let mut rhs = Mat::<f64>::zeros(n, 1);
    rhs[(0, 0)] = 1.0;
    use faer::prelude::Solve;
    lu.solve_in_place(rhs.as_mut());
    let rho = basis.to_matrix(|k| c64::new(rhs[(k, 0)], 0.0));
    DensityMatrix::from_unnormalized(&rho)
}

/// Eigenvalues of one parity block, sorted.
pub fn sector_eigenvalues(superop: &Superoperator, parity: Parity) -> Result<Vec<c64>> {
    let basis = HermitianBasis::new(superop.cutoff(), parity);
    if basis.len() > MAX_SECTOR_DIM {
        return Err(Error::TooLarge { size: basis.len(), max: MAX_SECTOR_DIM });
    }
    let mut vals = linalg::real_eigenvalues(&superop.real_sector_block(&basis))?;
    vals.sort_by(linalg::spectral_order);
    Ok(vals)
}

/// Right eigenmode for a known eigenvalue by shifted inverse iteration on the
/// sparse sector block. Returned with unit Frobenius norm.
pub fn sector_mode(superop: &Superoperator, parity: Parity, eigenvalue: c64) -> Result<CMat> {
    let basis = HermitianBasis::new(superop.cutoff(), parity);
    let n = basis.len();
    let scale = 1.0 + eigenvalue.norm();
    // Shift slightly off the eigenvalue so the factorization stays regular.
    let shift = eigenvalue + c64::new(1e-10 * scale, 0.0);
    let mut trips: Vec<Triplet<usize, usize, c64>> = superop
        .real_sector_triplets(&basis)
        .into_iter()
        .map(|(i, j, v)| Triplet::new(i, j, c64::new(v, 0.0)))
        .collect();
    trips.extend((0..n).map(|k| Triplet::new(k, k, -shift)));
    let a = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| Error::Numeric(format!("sparse assembly: {e:?}")))?;
    let lu = a.sp_lu().map_err(|e| Error::Numeric(format!("sparse LU: {e:?}")))?;
    use faer::prelude::Solve;
    let mut x = Mat::<c64>::from_fn(n, 1, |k, _| c64::new(1.0 / (1.0 + k as f64).sqrt(), 0.0));
    for _ in 0..4 {
        lu.solve_in_place(x.as_mut());
        let norm = (0..n).map(|k| x[(k, 0)].norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Numeric("inverse iteration diverged".into()));
        }
        for k in 0..n {
            x[(k, 0)] /= norm;
        }
    }
    // Fix the global phase so the largest coordinate is real and positive.
    let (kmax, _) = (0..n).map(|k| (k, x[(k, 0)].norm())).fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let phase = x[(kmax, 0)].conj() / x[(kmax, 0)].norm();
    Ok(basis.to_matrix(|k| x[(k, 0)] * phase))
}

/// Slowest nonstationary mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gap {
    /// `Gamma_1 = -Re lambda_1`.
    pub rate: f64,
    pub parity: Parity,
    pub lambda1: c64,
    pub lambda2: c64,
    /// Whether `lambda_1` and `lambda_2` are both real.
    pub real_pair: bool,
}

pub fn liouvillian_gap(dec: &SpectralDecomposition) -> Result<Gap> {
    if dec.len() < 3 {
        return Err(Error::Numeric("spectrum too short for a gap".into()));
    }
    gap_from_modes(dec.mode(1), dec.mode(2))
}

fn gap_from_modes(m1: &Mode, m2: &Mode) -> Result<Gap> {
    Ok(Gap {
        rate: m1.decay_rate(),
        parity: m1.parity,
        lambda1: m1.eigenvalue,
        lambda2: m2.eigenvalue,
        real_pair: m1.eigenvalue.im == 0.0 && m2.eigenvalue.im == 0.0,
    })
}

/// Leading modes of one sector, skipping the stationary eigenvalue.
pub fn leading_nonzero(vals: &[c64], count: usize) -> Vec<c64> {
    vals.iter().copied().filter(|z| z.norm() > STEADY_STATE_TOL).take(count).collect()
}

/// Eigenvalues clustered by frequency near multiples of `Omega`.
#[derive(Debug, Clone, Serialize)]
pub struct BandStructure {
    pub omega: f64,
    pub tolerance: f64,
    /// One cluster per harmonic `k` (frequency near `k Omega`), ordered by `k`.
    pub clusters: Vec<FrequencyCluster>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrequencyCluster {
    pub harmonic: i64,
    /// Mean frequency of the cluster.
    pub frequency: f64,
    /// Mode indices ordered by increasing decay rate.
    pub modes: Vec<usize>,
    pub decay_rates: Vec<f64>,
}

impl BandStructure {
    /// Modes forming band `b` (0 = fundamental): the `b`-th slowest mode of
    /// every cluster that has one.
    pub fn band(&self, b: usize) -> Vec<(i64, usize, f64)> {
        self.clusters
            .iter()
            .filter_map(|c| c.modes.get(b).map(|&m| (c.harmonic, m, c.decay_rates[b])))
            .collect()
    }

    pub fn fundamental(&self) -> Vec<(i64, usize, f64)> {
        self.band(0)
    }

    /// Decay-rate gap between the fundamental and second band, per harmonic.
    pub fn band_gaps(&self) -> Vec<(i64, f64)> {
        self.clusters
            .iter()
            .filter(|c| c.decay_rates.len() >= 2)
            .map(|c| (c.harmonic, c.decay_rates[1] - c.decay_rates[0]))
            .collect()
    }
}

/// Clusters the spectrum by `Im lambda` near `k Omega`, with tolerance
/// `max(Omega / 4, 3 gamma1 / n_ex)`. Modes farther than the tolerance from
/// every multiple are left out.
pub fn band_structure(dec: &SpectralDecomposition, omega: f64) -> Result<BandStructure> {
    if !(omega > 0.0) {
        return Err(Error::WrongRegime(format!("band structure needs Omega > 0, got {omega}")));
    }
    let p = dec.params().ok_or_else(|| Error::InvalidParams("decomposition carries no parameters".into()))?;
    let tolerance = (0.25 * omega).max(3.0 * p.gamma1 / p.n_ex());
    let mut clusters: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
    for (j, m) in dec.modes().iter().enumerate() {
        let k = (m.frequency() / omega).round();
        if (m.frequency() - k * omega).abs() < tolerance {
            clusters.entry(k as i64).or_default().push(j);
        }
    }
    let clusters = clusters
        .into_iter()
        .map(|(harmonic, mut modes)| {
            modes.sort_by(|&a, &b| dec.mode(a).decay_rate().total_cmp(&dec.mode(b).decay_rate()));
            let decay_rates: Vec<f64> = modes.iter().map(|&j| dec.mode(j).decay_rate()).collect();
            let frequency = modes.iter().map(|&j| dec.mode(j).frequency()).sum::<f64>() / modes.len() as f64;
            FrequencyCluster { harmonic, frequency, modes, decay_rates }
        })
        .collect();
    Ok(BandStructure { omega, tolerance, clusters })
}

/// Result of [`detect_ep`].
#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalPoint {
    pub eta_ep: f64,
    /// Final bracket.
    pub eta_lo: f64,
    pub eta_hi: f64,
    /// Two leading odd-sector eigenvalues at the bracket ends.
    pub below: [c64; 2],
    pub above: [c64; 2],
    pub iterations: usize,
    pub coalescence: Option<Coalescence>,
}

/// Eigenvector coalescence diagnostics at the two ends of the bracket.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Coalescence {
    /// `|<r_1|r_2>| / (|r_1| |r_2|)`, tending to 1 at the EP.
    pub overlap_below: f64,
    pub overlap_above: f64,
    /// `|l_1| |r_1|`, the eigenvalue condition number, diverging at the EP.
    pub condition_below: f64,
    pub condition_above: f64,
}

/// Settings for [`detect_ep`].
#[derive(Debug, Clone, Copy)]
pub struct EpSearch {
    /// Relative width of the final bracket.
    pub rel_width: f64,
    /// `|Im lambda|` below this (relative to `1 + |lambda|`) counts as real.
    pub imag_tol: f64,
    pub coalescence: bool,
}

impl Default for EpSearch {
    fn default() -> Self {
        Self { rel_width: 1e-4, imag_tol: 1e-10, coalescence: false }
    }
}

/// Squeezing at which the two slowest odd-parity eigenvalues collide and turn
/// real, by bisection on `|Im lambda_1|`.
pub fn detect_ep(
    params_base: &ModelParams,
    space: &FockSpace,
    eta_bracket: (f64, f64),
    search: &EpSearch,
) -> Result<ExceptionalPoint> {
    let leading = |eta: f64| -> Result<[c64; 2]> {
        let l = build_rotating_liouvillian(&params_base.with_eta(eta), space);
        let v = sector_eigenvalues(&l, Parity::Odd)?;
        Ok([v[0], v[1]])
    };
    bisect_collision(eta_bracket, search, leading).and_then(|mut ep| {
        if search.coalescence {
            let diag = |eta: f64| -> Result<(f64, f64)> {
                let l = build_rotating_liouvillian(&params_base.with_eta(eta), space);
                let dec = diagonalize_with(&l, &DiagonalizeOptions::sector(Parity::Odd, true))?;
                let r1 = dec.right(0)?;
                let r2 = dec.right(1)?;
                let l1 = dec.left(0)?;
                let overlap = linalg::expectation(&linalg::adjoint(&r1), &r2).norm();
                Ok((overlap / (linalg::frobenius(&r1) * linalg::frobenius(&r2)), linalg::frobenius(&l1)))
            };
            let (ob, cb) = diag(ep.eta_lo)?;
            let (oa, ca) = diag(ep.eta_hi)?;
            ep.coalescence = Some(Coalescence {
                overlap_below: ob,
                overlap_above: oa,
                condition_below: cb,
                condition_above: ca,
            });
        }
        Ok(ep)
    })
}

/// Shared bisection for Liouvillian and phase-space EP searches. `leading`
/// returns the two slowest eigenvalues of the relevant sector at a given eta.
pub(crate) fn bisect_collision<F>(eta_bracket: (f64, f64), search: &EpSearch, mut leading: F) -> Result<ExceptionalPoint>
where
    F: FnMut(f64) -> Result<[c64; 2]>,
{
    let (mut lo, mut hi) = eta_bracket;
    if !(lo < hi) || !(lo >= 0.0) {
        return Err(Error::Bracket { lo, hi });
    }
    let is_complex = |v: &[c64; 2]| v[0].im.abs() > search.imag_tol * (1.0 + v[0].norm());
    let mut below = leading(lo)?;
    let mut above = leading(hi)?;
    if !is_complex(&below) || is_complex(&above) {
        return Err(Error::Bracket { lo, hi });
    }
    let mut iterations = 0;
    while (hi - lo) > search.rel_width * 0.5 * (hi + lo) {
        let mid = 0.5 * (lo + hi);
        let v = leading(mid)?;
        if is_complex(&v) {
            lo = mid;
            below = v;
        } else {
            hi = mid;
            above = v;
        }
        iterations += 1;
    }
    Ok(ExceptionalPoint {
        eta_ep: 0.5 * (lo + hi),
        eta_lo: lo,
        eta_hi: hi,
        below,
        above,
        iterations,
        coalescence: None,
    })
}

/// Least-squares power law `y = prefactor * x^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub prefactor: f64,
    pub points: usize,
}

/// Fits `log y = log c + k log x`; needs positive data and at least 2 points
/// (3 for a finite standard error).
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(Error::Domain("power-law fit needs at least 2 points".into()));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::Domain("power-law fit needs positive data".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, stderr) = linear_fit(&xs, &ys);
    let _ = n;
    Ok(PowerLawFit { exponent: slope, exponent_stderr: stderr, prefactor: intercept.exp(), points: points.len() })
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, stderr(b))`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let stderr = if xs.len() > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (b, a, stderr)
}

/// Exponent `beta` in `eta_EP - eta_c ~ n_ex^{-beta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpScaling {
    pub beta: f64,
    pub beta_stderr: f64,
    pub prefactor: f64,
}

/// Fits `log(eta_EP - eta_c)` against `log n_ex` over `(n_ex, eta_EP)` pairs.
pub fn ep_scaling_fit(etas_ep: &[(f64, f64)], eta_c: f64) -> Result<EpScaling> {
    if etas_ep.len() < 4 {
        return Err(Error::Domain(format!("need at least 4 points, got {}", etas_ep.len())));
    }
    let pts: Vec<(f64, f64)> = etas_ep.iter().map(|&(n, e)| (n, e - eta_c)).collect();
    if let Some(&(n, diff)) = pts.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::Domain(format!("eta_EP - eta_c = {diff} is not positive at n_ex = {n}")));
    }
    let fit = fit_power_law(&pts)?;
    Ok(EpScaling { beta: -fit.exponent, beta_stderr: fit.exponent_stderr, prefactor: fit.prefactor })
}

/// Symmetry-broken pair built from the slowest odd mode.
#[derive(Debug, Clone)]
pub struct SymmetryBrokenPair {
    pub rho_plus: DensityMatrix,
    pub rho_minus: DensityMatrix,
    pub xi: DensityMatrix,
    pub trace_distance_ss_xi: f64,
    /// `Tr[a rho_plus]`.
    pub mean_a_plus: c64,
}

/// Splits the Hermitized slowest odd mode into positive and negative parts,
/// `r_1 = (rho_plus - rho_minus) / 2` with both parts unit-trace states, and
/// compares `xi = (rho_plus + rho_minus) / 2` with the steady state.
pub fn symmetry_broken_states(dec: &SpectralDecomposition) -> Result<SymmetryBrokenPair> {
    let gap = liouvillian_gap(dec)?;
    if gap.lambda1.im != 0.0 {
        return Err(Error::WrongRegime(format!("lambda_1 = {} is complex (below the EP)", gap.lambda1)));
    }
    if gap.parity != Parity::Odd {
        return Err(Error::WrongRegime("slowest mode is parity-even".into()));
    }
    let rho_ss = steady_state(dec)?;
    symmetry_broken_from_mode(&rho_ss, &dec.right(1)?, dec.params())
}

/// Same construction for large cutoffs: direct steady state, odd-sector
/// eigenvalues and inverse iteration for `r_1`.
pub fn symmetry_broken_states_sparse(superop: &Superoperator) -> Result<SymmetryBrokenPair> {
    let vals = sector_eigenvalues(superop, Parity::Odd)?;
    let lambda1 = vals[0];
    if lambda1.im != 0.0 {
        return Err(Error::WrongRegime(format!("lambda_1 = {lambda1} is complex (below the EP)")));
    }
    let rho_ss = steady_state_direct(superop)?;
    let r1 = sector_mode(superop, Parity::Odd, lambda1)?;
    symmetry_broken_from_mode(&rho_ss, &r1, superop.params())
}

fn symmetry_broken_from_mode(
    rho_ss: &DensityMatrix,
    r1: &CMat,
    params: Option<&ModelParams>,
) -> Result<SymmetryBrokenPair> {
    let d = rho_ss.cutoff();
    let h = linalg::hermitize(r1);
    let (vals, vecs) = linalg::hermitian_eigen(&h)?;
    let norm: f64 = vals.iter().map(|v| v.abs()).sum();
    if !(norm > 0.0) {
        return Err(Error::Numeric("slowest odd mode vanishes".into()));
    }
    // rho_plus = 2 (r_1)_+ and rho_minus = 2 (r_1)_- with Tr|r_1| = 1.
    let part = |positive: bool| -> CMat {
        Mat::from_fn(d, d, |i, j| {
            let mut acc = ZERO;
            for (k, &v) in vals.iter().enumerate() {
                let keep = if positive { v > 0.0 } else { v < 0.0 };
                if keep {
                    acc += vecs[(i, k)] * vecs[(j, k)].conj() * (2.0 * v.abs() / norm);
                }
            }
            acc
        })
    };
    let mut plus = part(true);
    let mut minus = part(false);
    let a = FockSpace::new(d)?.a().clone();
    let mut mean_plus = linalg::expectation(&a, &plus);
    // Orient rho_plus toward the mean-field fixed point alpha_+ when known.
    let reference = params
        .and_then(|p| crate::meanfield::fixed_points(p).ok())
        .map(|(ap, _)| ap)
        .unwrap_or(ONE);
    if (mean_plus * reference.conj()).re < 0.0 {
        std::mem::swap(&mut plus, &mut minus);
        mean_plus = -mean_plus;
    }
    let xi = Mat::from_fn(d, d, |i, j| (plus[(i, j)] + minus[(i, j)]) * 0.5);
    let rho_plus = DensityMatrix::from_unnormalized(&plus)?;
    let rho_minus = DensityMatrix::from_unnormalized(&minus)?;
    let xi = DensityMatrix::from_unnormalized(&xi)?;
    let trace_distance_ss_xi = rho_ss.trace_distance(&xi)?;
    Ok(SymmetryBrokenPair { rho_plus, rho_minus, xi, trace_distance_ss_xi, mean_a_plus: mean_plus })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(d: usize, p: &ModelParams) -> (FockSpace, Superoperator) {
        let f = FockSpace::new(d).unwrap();
        let l = build_rotating_liouvillian(p, &f);
        (f, l)
    }

    #[test]
    fn weak_amplification_has_unique_steady_state() {
        let p = ModelParams::new(0.01, 5.0, 0.0, 0.0, 0.0).unwrap();
        let (_, l) = small(4, &p);
        let dec = diagonalize(&l, true).unwrap();
        assert!(dec.mode(0).eigenvalue.norm() < 1e-9);
        assert_eq!(dec.zero_multiplicity(1e-8), 1);
        let rho = steady_state(&dec).unwrap();
        // Diagonal. Two-boson loss cannot empty |1>, so to leading order in
        // g1/g2 the balance 0 -> 1 (rate g1) against 1 -> 2 -> 0 (rate 2 g1)
        // gives p0 = 2 p1 = 2/3.
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(rho.matrix()[(i, j)].norm() < 1e-10);
                }
            }
        }
        assert!((rho.matrix()[(0, 0)].re - 2.0 / 3.0).abs() < 5e-3);
        assert!((rho.matrix()[(1, 1)].re - 1.0 / 3.0).abs() < 5e-3);
    }

    #[test]
    fn sector_and_full_routes_agree() {
        let p = ModelParams::new(1.0, 0.15, 0.3, 0.25, 0.0).unwrap();
        let (_, l) = small(8, &p);
        let a = diagonalize(&l, true).unwrap();
        let b = diagonalize(&l, false).unwrap();
        let mut unmatched: Vec<c64> = b.eigenvalues();
        for m in a.modes() {
            let (k, dist) = unmatched
                .iter()
                .enumerate()
                .map(|(k, z)| (k, (z - m.eigenvalue).norm()))
                .fold((0, f64::INFINITY), |x, y| if y.1 < x.1 { y } else { x });
            assert!(dist < 1e-8, "unmatched {}", m.eigenvalue);
            unmatched.swap_remove(k);
        }
        // Parities agree on isolated eigenvalues.
        for (ma, mb) in a.modes().iter().zip(b.modes()).take(6) {
            if (ma.eigenvalue - mb.eigenvalue).norm() < 1e-8 {
                assert_eq!(ma.parity, mb.parity);
            }
        }
    }

    #[test]
    fn biorthonormal_and_reconstructs() {
        let p = ModelParams::new(1.0, 0.3, 0.2, 0.05, 0.0).unwrap();
        let (_, l) = small(5, &p);
        let dec = diagonalize(&l, true).unwrap();
        let n = dec.len();
        let rights: Vec<CMat> = (0..n).map(|j| dec.right(j).unwrap()).collect();
        let lefts: Vec<CMat> = (0..n).map(|j| dec.left(j).unwrap()).collect();
        for j in 0..n {
            for k in 0..n {
                let ip = linalg::expectation(&linalg::adjoint(&lefts[j]), &rights[k]);
                let want = if j == k { ONE } else { ZERO };
                assert!((ip - want).norm() < 1e-8, "{j} {k} {ip}");
            }
        }
        // Sum rule: L = sum_j lambda_j |r_j>><<l_j|.
        let dense = l.to_dense().unwrap();
        let mut recon = Mat::<c64>::zeros(n, n);
        for j in 0..n {
            let r = crate::liouvillian::vectorize(&rights[j]);
            let lv = crate::liouvillian::vectorize(&lefts[j]);
            let ev = dec.mode(j).eigenvalue;
            for a in 0..n {
                for b in 0..n {
                    recon[(a, b)] += ev * r[a] * lv[b].conj();
                }
            }
        }
        assert!(linalg::max_abs_diff(&recon, &dense) < 1e-6);
    }

    #[test]
    fn eigenmodes_satisfy_eigen_equation() {
        let p = ModelParams::new(1.0, 0.2, 0.1, 0.2, 0.0).unwrap();
        let (_, l) = small(6, &p);
        let dec = diagonalize(&l, true).unwrap();
        for j in 0..dec.len() {
            let r = dec.right(j).unwrap();
            let lr = l.apply_matrix(&r);
            let ev = dec.mode(j).eigenvalue;
            assert!(linalg::max_abs_diff(&lr, &linalg::scaled(&r, ev)) < 1e-9);
        }
    }

    #[test]
    fn overlaps_and_weights_agree() {
        let p = ModelParams::new(1.0, 0.25, 0.1, 0.1, 0.0).unwrap();
        let (f, l) = small(6, &p);
        let dec = diagonalize(&l, true).unwrap();
        let rho = f.coherent_state(c64::new(0.2, 0.1)).ok();
        let x = match rho {
            Some(r) => r.into_matrix(),
            None => f.number_state(1).unwrap().into_matrix(),
        };
        let (w, o) = dec.mode_weights(&x, f.a()).unwrap();
        for j in 0..dec.len() {
            assert!((w[j] - dec.overlap(j, &x).unwrap()).norm() < 1e-10);
            let want = linalg::expectation(f.a(), &dec.right(j).unwrap());
            assert!((o[j] - want).norm() < 1e-10);
        }
    }

    #[test]
    fn direct_steady_state_matches_eigenvector() {
        let p = ModelParams::from_ratios(1.0, 3.0, 0.1, 2.0).unwrap();
        let (_, l) = small(14, &p);
        let a = steady_state(&diagonalize(&l, true).unwrap()).unwrap();
        let b = steady_state_direct(&l).unwrap();
        assert!(a.trace_distance(&b).unwrap() < 1e-9);
        let res = l.apply_matrix(b.matrix());
        assert!(linalg::max_abs(&res) < 1e-9);
    }

    #[test]
    fn inverse_iteration_recovers_mode() {
        let p = ModelParams::from_ratios(1.0, 3.0, 0.1, 2.0).unwrap();
        let (_, l) = small(12, &p);
        let vals = sector_eigenvalues(&l, Parity::Odd).unwrap();
        let r = sector_mode(&l, Parity::Odd, vals[0]).unwrap();
        let lr = l.apply_matrix(&r);
        assert!(linalg::max_abs_diff(&lr, &linalg::scaled(&r, vals[0])) < 1e-9);
        assert!((linalg::frobenius(&r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_law_recovers_exponent() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 10.0, 40.0].iter().map(|&x| (x, 2.0 * f64::powf(x, -0.5))).collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-10);
        assert!((fit.prefactor - 2.0).abs() < 1e-10);
        let sc = ep_scaling_fit(&pts.iter().map(|&(x, y)| (x, y + 0.3)).collect::<Vec<_>>(), 0.3).unwrap();
        assert!((sc.beta - 0.5).abs() < 1e-10);
    }

    #[test]
    fn ep_fit_rejects_bad_input() {
        assert!(matches!(ep_scaling_fit(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)], 0.5), Err(Error::Domain(_))));
        assert!(matches!(
            ep_scaling_fit(&[(1.0, 1.0), (2.0, 1.0), (3.0, 0.4), (4.0, 0.6)], 0.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bisection_on_model_collision() {
        // lambda = -1 +/- sqrt(eta - 0.3): complex below 0.3, real above.
        let search = EpSearch { rel_width: 1e-10, ..Default::default() };
        let f = |eta: f64| -> Result<[c64; 2]> {
            let s = c64::new(0.3 - eta, 0.0).sqrt();
            let mut v = [c64::new(-1.0, 0.0) + s * c64::new(0.0, 1.0), c64::new(-1.0, 0.0) - s * c64::new(0.0, 1.0)];
            if eta >= 0.3 {
                let r = (eta - 0.3).sqrt();
                v = [c64::new(-1.0 + r, 0.0), c64::new(-1.0 - r, 0.0)];
            }
            Ok(v)
        };
        let ep = bisect_collision((0.1, 0.5), &search, f).unwrap();
        assert!((ep.eta_ep - 0.3).abs() < 1e-9);
        assert!(matches!(bisect_collision((0.4, 0.5), &search, f), Err(Error::Bracket { .. })));
    }

    #[test]
    fn band_structure_clusters_by_harmonic() {
        let p = ModelParams::from_ratios(1.0, 4.0, 0.5, 0.4).unwrap();
        let (_, l) = small(16, &p);
        let dec = diagonalize_with(&l, &DiagonalizeOptions::eigenvalues_only()).unwrap();
        let omega = crate::meanfield::limit_cycle_frequency(&p).unwrap();
        let bands = band_structure(&dec, omega).unwrap();
        let mut seen = std::collections::HashSet::new();
        for c in &bands.clusters {
            for (&m, &g) in c.modes.iter().zip(&c.decay_rates) {
                assert!(seen.insert(m));
                assert!((dec.mode(m).frequency() - c.harmonic as f64 * omega).abs() < bands.tolerance);
                assert_eq!(dec.mode(m).decay_rate(), g);
            }
            assert!(c.decay_rates.windows(2).all(|w| w[0] <= w[1]));
        }
        assert!(matches!(band_structure(&dec, 0.0), Err(Error::WrongRegime(_))));
    }
}
