//! Lindblad generators of the driven oscillator as sparse superoperators.
//!
//! Vectorization is column-stacking throughout: the operator `|m><n|` maps to
//! index `m + n d`, and `A rho B` becomes `(B^T kron A) vec(rho)`. Every
//! superoperator in the crate is assembled through [`Assembler::sandwich`].

use std::f64::consts::FRAC_1_SQRT_2;

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::fock::{parity_sign, FockSpace};
use crate::linalg::{CMat, I, ONE, ZERO};
use crate::params::ModelParams;

/// Densest superoperator [`Superoperator::to_dense`] will materialize.
pub const MAX_DENSE_DIM: usize = 16384;

/// Index of `|m><n|` in a column-stacked vector.
#[inline]
pub fn vec_index(m: usize, n: usize, d: usize) -> usize {
    m + n * d
}

pub fn vectorize(rho: &CMat) -> Vec<c64> {
    let d = rho.nrows();
    let mut v = vec![ZERO; d * d];
    for n in 0..d {
        for m in 0..d {
            v[vec_index(m, n, d)] = rho[(m, n)];
        }
    }
    v
}

pub fn unvectorize(v: &[c64], d: usize) -> CMat {
    assert_eq!(v.len(), d * d);
    Mat::from_fn(d, d, |m, n| v[vec_index(m, n, d)])
}

/// Linear map on `d x d` matrices in compressed-column storage.
#[derive(Debug, Clone)]
pub struct Superoperator {
    d: usize,
    params: Option<ModelParams>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<c64>,
}

impl Superoperator {
    pub fn cutoff(&self) -> usize {
        self.d
    }

    /// Model parameters, when the map is a model Liouvillian.
    pub fn params(&self) -> Option<&ModelParams> {
        self.params.as_ref()
    }

    /// Dimension `d^2` of the vectorized space.
    pub fn dim(&self) -> usize {
        self.d * self.d
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzeros of column `j` as `(row, value)` pairs.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// `out += scale * S v`.
    pub fn apply_add(&self, v: &[c64], scale: c64, out: &mut [c64]) {
        debug_assert_eq!(v.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        for (j, &x) in v.iter().enumerate() {
            if x == ZERO {
                continue;
            }
            let sx = scale * x;
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                out[self.row_idx[k]] += self.vals[k] * sx;
            }
        }
    }

    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        let mut out = vec![ZERO; self.dim()];
        self.apply_add(v, ONE, &mut out);
        out
    }

    pub fn apply_matrix(&self, rho: &CMat) -> CMat {
        unvectorize(&self.apply(&vectorize(rho)), self.d)
    }

    /// `v^T S`, i.e. the action of the transpose.
    pub fn apply_transpose(&self, v: &[c64]) -> Vec<c64> {
        (0..self.dim()).map(|j| self.column(j).map(|(i, x)| x * v[i]).sum()).collect()
    }

    pub fn to_dense(&self) -> Result<CMat> {
        let n = self.dim();
        if n > MAX_DENSE_DIM {
            return Err(Error::TooLarge { size: n, max: MAX_DENSE_DIM });
        }
        let mut m = Mat::<c64>::zeros(n, n);
        for j in 0..n {
            for (i, x) in self.column(j) {
                m[(i, j)] += x;
            }
        }
        Ok(m)
    }

    /// Composition `self . other`.
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        assert_eq!(self.d, other.d);
        let mut asm = Assembler::new(self.d);
        for j in 0..other.dim() {
            for (k, y) in other.column(j) {
                for (i, x) in self.column(k) {
                    asm.push(i, j, x * y);
                }
            }
        }
        asm.finish()
    }

    /// Restriction to one parity sector, written in that sector's orthonormal
    /// Hermitian basis. Because the map preserves Hermiticity the block is real.
    pub fn real_sector_block(&self, basis: &HermitianBasis) -> Mat<f64> {
        let n = basis.len();
        let mut block = Mat::<f64>::zeros(n, n);
        for (i, j, v) in self.real_sector_triplets(basis) {
            block[(i, j)] = v;
        }
        block
    }

    /// Nonzeros of [`Self::real_sector_block`], column by column.
    pub fn real_sector_triplets(&self, basis: &HermitianBasis) -> Vec<(usize, usize, f64)> {
        let d = self.d;
        assert_eq!(basis.cutoff(), d);
        let mut out = Vec::new();
        let mut scratch = vec![ZERO; d * d];
        let mut touched: Vec<usize> = Vec::new();
        let mut col: Vec<(usize, f64)> = Vec::new();
        for (beta, elem) in basis.elems.iter().enumerate() {
            for (idx, w) in elem.vec_entries(d) {
                for (i, x) in self.column(idx) {
                    if scratch[i] == ZERO {
                        touched.push(i);
                    }
                    scratch[i] += x * w;
                }
            }
            for &i in &touched {
                let x = scratch[i];
                scratch[i] = ZERO;
                let (p, q) = (i % d, i / d);
                let Some(alpha) = basis.position(p, q) else { continue };
                if p == q {
                    col.push((alpha, x.re));
                } else {
                    let sign = if p < q { 1.0 } else { -1.0 };
                    col.push((alpha, x.re * FRAC_1_SQRT_2));
                    col.push((alpha + 1, sign * x.im * FRAC_1_SQRT_2));
                }
            }
            touched.clear();
            col.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < col.len() {
                let (r, mut v) = col[k];
                k += 1;
                while k < col.len() && col[k].0 == r {
                    v += col[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    out.push((r, beta, v));
                }
            }
            col.clear();
        }
        out
    }
}

/// Collects `(row, col, value)` contributions and compresses them.
#[derive(Debug)]
pub struct Assembler {
    d: usize,
    triplets: Vec<(usize, usize, c64)>,
}

impl Assembler {
    pub fn new(d: usize) -> Self {
        Self { d, triplets: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, val: c64) {
        if val != ZERO {
            self.triplets.push((row, col, val));
        }
    }

    /// Adds `rho -> coef * A rho B`, i.e. `coef * (B^T kron A)`.
    pub fn sandwich(&mut self, coef: c64, a: &SparseOp, b: &SparseOp) {
        let d = self.d;
        for &(i, j, x) in &a.0 {
            for &(k, l, y) in &b.0 {
                self.push(vec_index(i, l, d), vec_index(j, k, d), coef * x * y);
            }
        }
    }

    pub fn left(&mut self, coef: c64, a: &SparseOp) {
        self.sandwich(coef, a, &SparseOp::identity(self.d));
    }

    pub fn right(&mut self, coef: c64, b: &SparseOp) {
        self.sandwich(coef, &SparseOp::identity(self.d), b);
    }

    /// Adds `rate * (2 L rho L^dag - L^dag L rho - rho L^dag L)`.
    pub fn dissipator(&mut self, rate: f64, l: &SparseOp) {
        let ld = l.adjoint();
        let ldl = ld.mul(l, self.d);
        self.sandwich(c64::new(2.0 * rate, 0.0), l, &ld);
        self.left(c64::new(-rate, 0.0), &ldl);
        self.right(c64::new(-rate, 0.0), &ldl);
    }

    /// Adds `-i [h, rho]`.
    pub fn commutator(&mut self, h: &SparseOp) {
        self.left(-I, h);
        self.right(I, h);
    }

    pub fn finish(mut self) -> Superoperator {
        let n = self.d * self.d;
        self.triplets.sort_unstable_by_key(|t| (t.1, t.0));
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(self.triplets.len());
        let mut vals: Vec<c64> = Vec::with_capacity(self.triplets.len());
        let mut k = 0;
        let t = &self.triplets;
        while k < t.len() {
            let (r, c, mut v) = t[k];
            k += 1;
            while k < t.len() && t[k].0 == r && t[k].1 == c {
                v += t[k].2;
                k += 1;
            }
            if v != ZERO {
                row_idx.push(r);
                vals.push(v);
                col_ptr[c + 1] += 1;
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        Superoperator { d: self.d, params: None, col_ptr, row_idx, vals }
    }
}

/// Nonzero entries `(row, col, value)` of a `d x d` operator.
#[derive(Debug, Clone, Default)]
pub struct SparseOp(pub Vec<(usize, usize, c64)>);

impl SparseOp {
    pub fn from_dense(m: &CMat) -> Self {
        let mut v = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != ZERO {
                    v.push((i, j, m[(i, j)]));
                }
            }
        }
        Self(v)
    }

    pub fn identity(d: usize) -> Self {
        Self((0..d).map(|i| (i, i, ONE)).collect())
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.iter().map(|&(i, j, x)| (j, i, x.conj())).collect())
    }

    pub fn scale(&self, s: c64) -> Self {
        Self(self.0.iter().map(|&(i, j, x)| (i, j, x * s)).collect())
    }

    pub fn mul(&self, other: &SparseOp, d: usize) -> Self {
        let mut dense = Mat::<c64>::zeros(d, d);
        for &(i, k, x) in &self.0 {
            for &(k2, j, y) in &other.0 {
                if k == k2 {
                    dense[(i, j)] += x * y;
                }
            }
        }
        Self::from_dense(&dense)
    }

    pub fn add(&self, other: &SparseOp, d: usize) -> Self {
        let mut dense = Mat::<c64>::zeros(d, d);
        for &(i, j, x) in self.0.iter().chain(other.0.iter()) {
            dense[(i, j)] += x;
        }
        Self::from_dense(&dense)
    }
}

/// Rotating-frame Hamiltonian `delta a^dag a + i eta (a^2 - a^dag^2)`.
pub fn rotating_hamiltonian(params: &ModelParams, space: &FockSpace) -> CMat {
    let d = space.cutoff();
    let a2 = space.a() * space.a();
    let ad2 = space.a_dag() * space.a_dag();
    Mat::from_fn(d, d, |i, j| {
        space.n_op()[(i, j)] * params.delta + (a2[(i, j)] - ad2[(i, j)]) * c64::new(0.0, params.eta)
    })
}

/// Generator `rho -> -i[H, rho] + gamma1/2 D[a^dag] rho + gamma2/2 D[a^2] rho`.
pub fn build_rotating_liouvillian(params: &ModelParams, space: &FockSpace) -> Superoperator {
    let d = space.cutoff();
    let mut asm = Assembler::new(d);
    asm.commutator(&SparseOp::from_dense(&rotating_hamiltonian(params, space)));
    add_dissipators(&mut asm, params, space);
    let mut l = asm.finish();
    l.params = Some(*params);
    l
}

fn add_dissipators(asm: &mut Assembler, params: &ModelParams, space: &FockSpace) {
    let a = SparseOp::from_dense(space.a());
    let ad = SparseOp::from_dense(space.a_dag());
    asm.dissipator(params.gamma1 / 2.0, &ad);
    asm.dissipator(params.gamma2 / 2.0, &a.mul(&a, space.cutoff()));
}

/// Laboratory-frame Hamiltonian
/// `omega0 a^dag a + i eta (a^2 e^{2 i omega_s t} - a^dag^2 e^{-2 i omega_s t})`.
pub fn build_lab_hamiltonian(params: &ModelParams, space: &FockSpace, t: f64) -> Result<CMat> {
    if !(params.omega_s > 0.0) {
        return Err(Error::MissingDriveFrequency);
    }
    let d = space.cutoff();
    let a2 = space.a() * space.a();
    let ad2 = space.a_dag() * space.a_dag();
    let phase = c64::from_polar(1.0, 2.0 * params.omega_s * t);
    let ieta = c64::new(0.0, params.eta);
    Ok(Mat::from_fn(d, d, |i, j| {
        space.n_op()[(i, j)] * params.omega0() + ieta * (a2[(i, j)] * phase - ad2[(i, j)] * phase.conj())
    }))
}

/// Time-dependent laboratory-frame generator, split as
/// `L(t) = L_static + e^{2 i omega_s t} L_plus + e^{-2 i omega_s t} L_minus`.
#[derive(Debug, Clone)]
pub struct LabGenerator {
    omega_s: f64,
    static_part: Superoperator,
    plus: Superoperator,
    minus: Superoperator,
}

impl LabGenerator {
    pub fn new(params: &ModelParams, space: &FockSpace) -> Result<Self> {
        if !(params.omega_s > 0.0) {
            return Err(Error::MissingDriveFrequency);
        }
        let d = space.cutoff();
        let a = SparseOp::from_dense(space.a());
        let ad = SparseOp::from_dense(space.a_dag());

        let mut asm = Assembler::new(d);
        asm.commutator(&SparseOp::from_dense(space.n_op()).scale(c64::new(params.omega0(), 0.0)));
        add_dissipators(&mut asm, params, space);
        let static_part = asm.finish();

        let mut asm = Assembler::new(d);
        asm.commutator(&a.mul(&a, d).scale(c64::new(0.0, params.eta)));
        let plus = asm.finish();

        let mut asm = Assembler::new(d);
        asm.commutator(&ad.mul(&ad, d).scale(c64::new(0.0, -params.eta)));
        let minus = asm.finish();

        Ok(Self { omega_s: params.omega_s, static_part, plus, minus })
    }

    pub fn cutoff(&self) -> usize {
        self.static_part.cutoff()
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::PI / self.omega_s
    }

    /// `out = L(t) v`.
    pub fn apply(&self, t: f64, v: &[c64], out: &mut [c64]) {
        out.iter_mut().for_each(|x| *x = ZERO);
        let phase = c64::from_polar(1.0, 2.0 * self.omega_s * t);
        self.static_part.apply_add(v, ONE, out);
        self.plus.apply_add(v, phase, out);
        self.minus.apply_add(v, phase.conj(), out);
    }

    /// Dense matrix of `L(t)`, for small cutoffs only.
    pub fn at(&self, t: f64) -> Result<CMat> {
        let phase = c64::from_polar(1.0, 2.0 * self.omega_s * t);
        let s = self.static_part.to_dense()?;
        let p = self.plus.to_dense()?;
        let m = self.minus.to_dense()?;
        Ok(Mat::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] + p[(i, j)] * phase + m[(i, j)] * phase.conj()))
    }
}

/// The map `rho -> P rho P` with `P = exp(i pi a^dag a)`.
pub fn parity_superoperator(space: &FockSpace) -> Superoperator {
    let d = space.cutoff();
    let mut asm = Assembler::new(d);
    for n in 0..d {
        for m in 0..d {
            let i = vec_index(m, n, d);
            asm.push(i, i, c64::new(parity_sign(m) * parity_sign(n), 0.0));
        }
    }
    asm.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Eigenvalue `+1` or `-1` of the parity superoperator.
    pub fn sign(self) -> i8 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    pub fn of(m: usize, n: usize) -> Self {
        if (m + n) % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Vectorized indices of `|m><n|` split by the parity of `m - n`.
#[derive(Debug, Clone)]
pub struct ParitySectors {
    pub even: Vec<usize>,
    pub odd: Vec<usize>,
}

pub fn parity_sectors(space: &FockSpace) -> ParitySectors {
    let d = space.cutoff();
    let (mut even, mut odd) = (Vec::new(), Vec::new());
    for i in 0..d * d {
        match Parity::of(i % d, i / d) {
            Parity::Even => even.push(i),
            Parity::Odd => odd.push(i),
        }
    }
    ParitySectors { even, odd }
}

/// Element of the orthonormal Hermitian operator basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisElem {
    /// `|m><m|`
    Diag(usize),
    /// `(|m><n| + |n><m|) / sqrt2`, `m < n`
    Sym(usize, usize),
    /// `i (|m><n| - |n><m|) / sqrt2`, `m < n`
    Anti(usize, usize),
}

impl BasisElem {
    /// Nonzero vectorized entries of the basis matrix.
    fn vec_entries(self, d: usize) -> Vec<(usize, c64)> {
        let s = FRAC_1_SQRT_2;
        match self {
            BasisElem::Diag(m) => vec![(vec_index(m, m, d), ONE)],
            BasisElem::Sym(m, n) => vec![(vec_index(m, n, d), c64::new(s, 0.0)), (vec_index(n, m, d), c64::new(s, 0.0))],
            BasisElem::Anti(m, n) => vec![(vec_index(m, n, d), c64::new(0.0, s)), (vec_index(n, m, d), c64::new(0.0, -s))],
        }
    }
}

/// Orthonormal Hermitian basis of one parity sector. `Sym(m, n)` is always
/// immediately followed by `Anti(m, n)`.
#[derive(Debug, Clone)]
pub struct HermitianBasis {
    d: usize,
    parity: Parity,
    elems: Vec<BasisElem>,
    pos: Vec<usize>,
}

impl HermitianBasis {
    pub fn new(d: usize, parity: Parity) -> Self {
        let mut elems = Vec::new();
        let mut pos = vec![usize::MAX; d * d];
        for n in 0..d {
            for m in 0..=n {
                if Parity::of(m, n) != parity {
                    continue;
                }
                pos[vec_index(m, n, d)] = elems.len();
                if m == n {
                    elems.push(BasisElem::Diag(m));
                } else {
                    elems.push(BasisElem::Sym(m, n));
                    elems.push(BasisElem::Anti(m, n));
                }
            }
        }
        Self { d, parity, elems, pos }
    }

    pub fn cutoff(&self) -> usize {
        self.d
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elems(&self) -> &[BasisElem] {
        &self.elems
    }

    /// Index of `Diag(p)` or `Sym(min, max)` for the pair `(p, q)`.
    fn position(&self, p: usize, q: usize) -> Option<usize> {
        let (m, n) = if p <= q { (p, q) } else { (q, p) };
        let k = self.pos[vec_index(m, n, self.d)];
        (k != usize::MAX).then_some(k)
    }

    /// `sum_alpha coeffs[alpha] B_alpha`.
    pub fn to_matrix<F: Fn(usize) -> c64>(&self, coeff: F) -> CMat {
        let d = self.d;
        let mut m = Mat::<c64>::zeros(d, d);
        for (alpha, elem) in self.elems.iter().enumerate() {
            let c = coeff(alpha);
            if c == ZERO {
                continue;
            }
            for (idx, w) in elem.vec_entries(d) {
                m[(idx % d, idx / d)] += w * c;
            }
        }
        m
    }

    /// Coordinates `Tr[B_alpha x]`; exact for any `x` supported in the sector.
    pub fn coords(&self, x: &CMat) -> Vec<c64> {
        let s = FRAC_1_SQRT_2;
        self.elems
            .iter()
            .map(|e| match *e {
                BasisElem::Diag(m) => x[(m, m)],
                BasisElem::Sym(m, n) => (x[(m, n)] + x[(n, m)]) * s,
                BasisElem::Anti(m, n) => (x[(n, m)] - x[(m, n)]) * c64::new(0.0, s),
            })
            .collect()
    }
}
