//! Truncated Fock-space and tensor-product operator algebra.
//!
//! Every composite space is ordered `qubit ⊗ mode_a ⊗ mode_b` with row-major
//! basis indexing, so the full-space index of `|q; n_a; n_b⟩` is
//! `(q·(cutoff_a+1) + n_a)·(cutoff_b+1) + n_b`. The two-mode space drops the
//! qubit factor and keeps the same mode ordering. Qubit levels are indexed
//! `g = 0`, `r = 1`, `e = 2`.
//!
//! Operators pick their storage from their dimension: dense below
//! [`DENSE_BELOW`], compressed-column sparse at or above it. The choice is
//! invisible to callers; all arithmetic works across representations.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CscMatrix};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Number of qubit levels (g, r, e).
pub const QUBIT_DIM: usize = 3;

/// Operators with dimension below this are stored densely.
pub const DENSE_BELOW: usize = 64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    G,
    R,
    E,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::G, Level::R, Level::E];

    pub fn index(self) -> usize {
        match self {
            Level::G => 0,
            Level::R => 1,
            Level::E => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "g" | "G" => Ok(Level::G),
            "r" | "R" => Ok(Level::R),
            "e" | "E" => Ok(Level::E),
            other => Err(Error::invalid(format!(
                "unknown qubit level label {other:?} (expected g, r or e)"
            ))),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::G => "g",
            Level::R => "r",
            Level::E => "e",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Qubit,
    ModeA,
    ModeB,
}

/// Truncation of the qubit ⊗ two-mode Hilbert space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HilbertSpec {
    cutoff_a: usize,
    cutoff_b: usize,
}

impl HilbertSpec {
    /// `cutoff_a` and `cutoff_b` are the largest Fock indices kept for the
    /// second-harmonic mode `a` and the fundamental mode `b`.
    pub fn new(cutoff_a: usize, cutoff_b: usize) -> Result<Self> {
        if cutoff_a < 1 {
            return Err(Error::invalid(format!(
                "cutoff_a must be >= 1, got {cutoff_a}"
            )));
        }
        if cutoff_b < 2 {
            return Err(Error::invalid(format!(
                "cutoff_b must be >= 2, got {cutoff_b}"
            )));
        }
        Ok(Self { cutoff_a, cutoff_b })
    }

    pub fn cutoff_a(&self) -> usize {
        self.cutoff_a
    }

    pub fn cutoff_b(&self) -> usize {
        self.cutoff_b
    }

    pub fn qubit_dim(&self) -> usize {
        QUBIT_DIM
    }

    pub fn dim_a(&self) -> usize {
        self.cutoff_a + 1
    }

    pub fn dim_b(&self) -> usize {
        self.cutoff_b + 1
    }

    /// Dimension of the two-mode space `a ⊗ b`.
    pub fn mode_dim(&self) -> usize {
        self.dim_a() * self.dim_b()
    }

    /// Dimension of the full space `qubit ⊗ a ⊗ b`.
    pub fn dim(&self) -> usize {
        QUBIT_DIM * self.mode_dim()
    }

    pub fn mode_index(&self, n_a: usize, n_b: usize) -> usize {
        n_a * self.dim_b() + n_b
    }

    pub fn index(&self, q: Level, n_a: usize, n_b: usize) -> usize {
        (q.index() * self.dim_a() + n_a) * self.dim_b() + n_b
    }

    /// Inverse of [`HilbertSpec::index`].
    pub fn decompose(&self, index: usize) -> (Level, usize, usize) {
        let n_b = index % self.dim_b();
        let rest = index / self.dim_b();
        let n_a = rest % self.dim_a();
        let q = Level::from_index(rest / self.dim_a()).expect("index out of range");
        (q, n_a, n_b)
    }

    /// Inverse of [`HilbertSpec::mode_index`].
    pub fn decompose_mode(&self, index: usize) -> (usize, usize) {
        (index / self.dim_b(), index % self.dim_b())
    }
}

/// The space an operator or state lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Qubit,
    Mode { cutoff: usize },
    Full(HilbertSpec),
    Modes(HilbertSpec),
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Qubit => QUBIT_DIM,
            Space::Mode { cutoff } => cutoff + 1,
            Space::Full(s) => s.dim(),
            Space::Modes(s) => s.mode_dim(),
        }
    }
}

#[derive(Clone, Debug)]
enum Storage {
    Dense(DMatrix<C64>),
    Sparse(CscMatrix<C64>),
}

/// Complex square matrix on a truncated space.
#[derive(Clone, Debug)]
pub struct Operator {
    space: Space,
    storage: Storage,
}

fn csc_from_triplets(dim: usize, triplets: &[(usize, usize, C64)]) -> CscMatrix<C64> {
    let mut coo = CooMatrix::new(dim, dim);
    for &(i, j, v) in triplets {
        if v != ZERO {
            coo.push(i, j, v);
        }
    }
    // duplicates are summed by the conversion
    let csc = CscMatrix::from(&coo);
    csc.filter(|_, _, v| *v != ZERO)
}

fn dense_to_csc(m: &DMatrix<C64>) -> CscMatrix<C64> {
    let mut trip = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != ZERO {
                trip.push((i, j, v));
            }
        }
    }
    csc_from_triplets(m.nrows(), &trip)
}

fn csc_to_dense(m: &CscMatrix<C64>) -> DMatrix<C64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplet_iter() {
        d[(i, j)] += *v;
    }
    d
}

impl Operator {
    fn from_storage(space: Space, storage: Storage) -> Self {
        let dim = space.dim();
        let storage = match storage {
            Storage::Dense(d) if dim >= DENSE_BELOW => Storage::Sparse(dense_to_csc(&d)),
            Storage::Sparse(s) if dim < DENSE_BELOW => Storage::Dense(csc_to_dense(&s)),
            other => other,
        };
        Self { space, storage }
    }

    /// Builds an operator from `(row, col, value)` entries; repeated
    /// positions are summed.
    pub fn from_triplets(
        space: Space,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Result<Self> {
        let dim = space.dim();
        let trip: Vec<_> = triplets.into_iter().collect();
        if let Some(&(i, j, _)) = trip.iter().find(|(i, j, _)| *i >= dim || *j >= dim) {
            return Err(Error::invalid(format!(
                "entry ({i}, {j}) outside a {dim}-dimensional space"
            )));
        }
        if dim < DENSE_BELOW {
            let mut d = DMatrix::zeros(dim, dim);
            for (i, j, v) in trip {
                d[(i, j)] += v;
            }
            Ok(Self::from_storage(space, Storage::Dense(d)))
        } else {
            Ok(Self::from_storage(
                space,
                Storage::Sparse(csc_from_triplets(dim, &trip)),
            ))
        }
    }

    pub fn from_dense(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        let dim = space.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::invalid(format!(
                "matrix is {}x{} but the space has dimension {dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self::from_storage(space, Storage::Dense(matrix)))
    }

    pub fn zeros(space: Space) -> Self {
        Self::from_triplets(space, std::iter::empty()).expect("empty operator")
    }

    pub fn identity(space: Space) -> Self {
        let dim = space.dim();
        Self::from_triplets(space, (0..dim).map(|i| (i, i, ONE))).expect("identity in range")
    }

    /// Diagonal operator with the given real entries.
    pub fn diagonal_from(space: Space, entries: &[f64]) -> Result<Self> {
        if entries.len() != space.dim() {
            return Err(Error::invalid("diagonal length does not match the space"));
        }
        Self::from_triplets(
            space,
            entries
                .iter()
                .enumerate()
                .map(|(i, &x)| (i, i, C64::new(x, 0.0))),
        )
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match &self.storage {
            Storage::Dense(d) => d[(i, j)],
            Storage::Sparse(s) => s.get_entry(i, j).map(|e| e.into_value()).unwrap_or(ZERO),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Sparse(s) => csc_to_dense(s),
        }
    }

    /// Nonzero entries in column-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        match &self.storage {
            Storage::Dense(d) => {
                let mut out = Vec::new();
                for j in 0..d.ncols() {
                    for i in 0..d.nrows() {
                        let v = d[(i, j)];
                        if v != ZERO {
                            out.push((i, j, v));
                        }
                    }
                }
                out
            }
            Storage::Sparse(s) => s.triplet_iter().map(|(i, j, v)| (i, j, *v)).collect(),
        }
    }

    fn map_storage(
        &self,
        f: impl Fn(&DMatrix<C64>) -> DMatrix<C64>,
        g: impl Fn(&CscMatrix<C64>) -> CscMatrix<C64>,
    ) -> Self {
        let storage = match &self.storage {
            Storage::Dense(d) => Storage::Dense(f(d)),
            Storage::Sparse(s) => Storage::Sparse(g(s)),
        };
        Self {
            space: self.space,
            storage,
        }
    }

    pub fn adjoint(&self) -> Self {
        self.map_storage(
            |d| d.adjoint(),
            |s| {
                let mut t = s.transpose();
                t.values_mut().iter_mut().for_each(|v| *v = v.conj());
                t
            },
        )
    }

    pub fn transpose(&self) -> Self {
        self.map_storage(|d| d.transpose(), |s| s.transpose())
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map_storage(|d| d * c, |s| s * c)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        assert_eq!(v.len(), self.dim(), "vector length does not match operator");
        match &self.storage {
            Storage::Dense(d) => d * v,
            Storage::Sparse(s) => {
                let mut out = DVector::zeros(v.len());
                for (j, col) in s.col_iter().enumerate() {
                    let vj = v[j];
                    if vj == ZERO {
                        continue;
                    }
                    for (&i, &x) in col.row_indices().iter().zip(col.values()) {
                        out[i] += x * vj;
                    }
                }
                out
            }
        }
    }

    /// Largest entrywise modulus of `M − M†`.
    pub fn hermiticity_error(&self) -> f64 {
        let diff = self - &self.adjoint();
        diff.max_abs()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        self.triplets()
            .iter()
            .map(|t| t.2.norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.triplets()
            .iter()
            .map(|t| t.2.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().iter().all(|&(i, j, _)| i == j)
    }

    /// Sorted eigenvalues, treating the operator as Hermitian.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let eig = nalgebra::SymmetricEigen::new(self.to_dense());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    /// Dense submatrix on the given basis indices.
    pub fn restrict(&self, indices: &[usize]) -> DMatrix<C64> {
        let pos: std::collections::HashMap<usize, usize> =
            indices.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut out = DMatrix::zeros(indices.len(), indices.len());
        for (i, j, v) in self.triplets() {
            if let (Some(&r), Some(&c)) = (pos.get(&i), pos.get(&j)) {
                out[(r, c)] = v;
            }
        }
        out
    }

    fn binary(&self, rhs: &Operator, op: &str) -> (Storage, Storage) {
        assert_eq!(
            self.space, rhs.space,
            "operator {op} between different spaces"
        );
        (self.storage.clone(), rhs.storage.clone())
    }
}

fn as_sparse(s: Storage) -> CscMatrix<C64> {
    match s {
        Storage::Dense(d) => dense_to_csc(&d),
        Storage::Sparse(s) => s,
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        let storage = match self.binary(rhs, "sum") {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a + b),
            (a, b) => Storage::Sparse(&as_sparse(a) + &as_sparse(b)),
        };
        Operator::from_storage(self.space, storage)
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        let storage = match self.binary(rhs, "difference") {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a - b),
            (a, b) => Storage::Sparse(&as_sparse(a) - &as_sparse(b)),
        };
        Operator::from_storage(self.space, storage)
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        let storage = match self.binary(rhs, "product") {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a * b),
            (a, b) => Storage::Sparse(&as_sparse(a) * &as_sparse(b)),
        };
        Operator::from_storage(self.space, storage)
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;

    fn mul(self, c: C64) -> Operator {
        self.scale(c)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;

    fn mul(self, c: f64) -> Operator {
        self.scale(C64::new(c, 0.0))
    }
}

impl Neg for &Operator {
    type Output = Operator;

    fn neg(self) -> Operator {
        self.scale(C64::new(-1.0, 0.0))
    }
}

/// `[a, b] = ab − ba`.
pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    &(a * b) - &(b * a)
}

/// Truncated annihilation operator with `⟨n−1|a|n⟩ = √n`.
pub fn annihilation(cutoff: usize) -> Result<Operator> {
    if cutoff < 1 {
        return Err(Error::invalid(format!(
            "Fock cutoff must be >= 1, got {cutoff}"
        )));
    }
    Operator::from_triplets(
        Space::Mode { cutoff },
        (1..=cutoff).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))),
    )
}

pub fn creation(cutoff: usize) -> Result<Operator> {
    Ok(annihilation(cutoff)?.adjoint())
}

pub fn number(cutoff: usize) -> Result<Operator> {
    if cutoff < 1 {
        return Err(Error::invalid(format!(
            "Fock cutoff must be >= 1, got {cutoff}"
        )));
    }
    Operator::diagonal_from(
        Space::Mode { cutoff },
        &(0..=cutoff).map(|n| n as f64).collect::<Vec<_>>(),
    )
}

/// `|i⟩⟨j|` on the qubit.
pub fn qubit_transition(i: Level, j: Level) -> Operator {
    Operator::from_triplets(Space::Qubit, [(i.index(), j.index(), ONE)]).expect("3x3 projector")
}

/// Label-based form of [`qubit_transition`], e.g. `("e", "g")`.
pub fn qubit_transition_labels(i: &str, j: &str) -> Result<Operator> {
    Ok(qubit_transition(i.parse()?, j.parse()?))
}

fn local_space(slot: Slot, spec: &HilbertSpec) -> Space {
    match slot {
        Slot::Qubit => Space::Qubit,
        Slot::ModeA => Space::Mode {
            cutoff: spec.cutoff_a(),
        },
        Slot::ModeB => Space::Mode {
            cutoff: spec.cutoff_b(),
        },
    }
}

fn embed_into(
    op: &Operator,
    slot: Slot,
    spec: &HilbertSpec,
    factors: &[Slot],
    target: Space,
) -> Result<Operator> {
    let expected = local_space(slot, spec);
    if op.space() != expected {
        return Err(Error::invalid(format!(
            "cannot embed an operator on {:?} into the {slot:?} slot (expects {expected:?})",
            op.space()
        )));
    }
    let pos = factors
        .iter()
        .position(|&s| s == slot)
        .ok_or_else(|| Error::invalid(format!("slot {slot:?} is not part of {target:?}")))?;
    let dims: Vec<usize> = factors
        .iter()
        .map(|&s| local_space(s, spec).dim())
        .collect();
    let left: usize = dims[..pos].iter().product();
    let right: usize = dims[pos + 1..].iter().product();
    let d = dims[pos];
    let local = op.triplets();
    let mut trip = Vec::with_capacity(local.len() * left * right);
    for l in 0..left {
        for &(i, j, v) in &local {
            for r in 0..right {
                trip.push(((l * d + i) * right + r, (l * d + j) * right + r, v));
            }
        }
    }
    Operator::from_triplets(target, trip)
}

/// Embeds a single-factor operator into the full `qubit ⊗ a ⊗ b` space.
pub fn embed(op: &Operator, slot: Slot, spec: &HilbertSpec) -> Result<Operator> {
    embed_into(
        op,
        slot,
        spec,
        &[Slot::Qubit, Slot::ModeA, Slot::ModeB],
        Space::Full(*spec),
    )
}

/// Embeds a mode operator into the two-mode `a ⊗ b` space.
pub fn embed_modes(op: &Operator, slot: Slot, spec: &HilbertSpec) -> Result<Operator> {
    if slot == Slot::Qubit {
        return Err(Error::invalid("the two-mode space has no qubit factor"));
    }
    embed_into(
        op,
        slot,
        spec,
        &[Slot::ModeA, Slot::ModeB],
        Space::Modes(*spec),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: Space,
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(space: Space, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::invalid(format!(
                "{} amplitudes for a {}-dimensional space",
                amps.len(),
                space.dim()
            )));
        }
        Ok(Self { space, amps })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.space != other.space {
            return Err(Error::invalid("inner product between different spaces"));
        }
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }
}

/// `|q; n_a; n_b⟩` in the full space.
pub fn basis_state(q: Level, n_a: usize, n_b: usize, spec: &HilbertSpec) -> Result<StateVector> {
    check_occupation(n_a, n_b, spec)?;
    let mut amps = DVector::zeros(spec.dim());
    amps[spec.index(q, n_a, n_b)] = ONE;
    StateVector::new(Space::Full(*spec), amps)
}

/// `|n_a, n_b⟩` in the two-mode space.
pub fn mode_basis_state(n_a: usize, n_b: usize, spec: &HilbertSpec) -> Result<StateVector> {
    check_occupation(n_a, n_b, spec)?;
    let mut amps = DVector::zeros(spec.mode_dim());
    amps[spec.mode_index(n_a, n_b)] = ONE;
    StateVector::new(Space::Modes(*spec), amps)
}

fn check_occupation(n_a: usize, n_b: usize, spec: &HilbertSpec) -> Result<()> {
    if n_a > spec.cutoff_a() || n_b > spec.cutoff_b() {
        return Err(Error::invalid(format!(
            "occupation ({n_a}, {n_b}) exceeds cutoffs ({}, {})",
            spec.cutoff_a(),
            spec.cutoff_b()
        )));
    }
    Ok(())
}

/// Density matrix with trace, Hermiticity and positivity checked on
/// construction.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: Space,
    mat: DMatrix<C64>,
}

pub const TRACE_TOL: f64 = 1e-9;
pub const DENSITY_HERMITIAN_TOL: f64 = 1e-10;
pub const MIN_EIGENVALUE_TOL: f64 = -1e-8;

impl DensityMatrix {
    pub fn new(space: Space, mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != space.dim() || mat.ncols() != space.dim() {
            return Err(Error::invalid(
                "density matrix shape does not match the space",
            ));
        }
        let rho = Self { space, mat };
        let tr = rho.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::NumericalFailure(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let herm = rho.hermiticity_error();
        if herm > DENSITY_HERMITIAN_TOL {
            return Err(Error::NumericalFailure(format!(
                "density matrix is not Hermitian (deviation {herm:e})"
            )));
        }
        let min = rho.min_eigenvalue();
        if min < MIN_EIGENVALUE_TOL {
            return Err(Error::NumericalFailure(format!(
                "density matrix has eigenvalue {min:e} below {MIN_EIGENVALUE_TOL:e}"
            )));
        }
        Ok(rho)
    }

    pub fn pure(state: &StateVector) -> Result<Self> {
        let v = state.amplitudes();
        Self::new(state.space(), v * v.adjoint())
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.mat - self.mat.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0);
        nalgebra::SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn population(&self, index: usize) -> f64 {
        self.mat[(index, index)].re
    }
}

/// Readout of `⟨M⟩` on a pure or mixed state.
pub trait Expectation {
    fn expectation(&self, op: &Operator) -> Result<C64>;
}

impl Expectation for StateVector {
    fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.space() != self.space {
            return Err(Error::invalid(
                "operator and state live on different spaces",
            ));
        }
        Ok(self.amps.dotc(&op.apply(&self.amps)))
    }
}

impl Expectation for DensityMatrix {
    fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.space() != self.space {
            return Err(Error::invalid(
                "operator and density matrix live on different spaces",
            ));
        }
        // Tr(ρM) = Σ_ij M_ij ρ_ji
        Ok(op
            .triplets()
            .into_iter()
            .map(|(i, j, v)| v * self.mat[(j, i)])
            .sum())
    }
}

pub fn expectation<S: Expectation + ?Sized>(state: &S, op: &Operator) -> Result<C64> {
    state.expectation(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec() -> HilbertSpec {
        HilbertSpec::new(2, 4).unwrap()
    }

    #[test]
    fn annihilation_entries() {
        let a = annihilation(1).unwrap();
        assert_eq!(a.dim(), 2);
        assert_eq!(a.get(0, 1), ONE);
        assert_eq!(a.triplets().len(), 1);

        let a2 = annihilation(2).unwrap();
        assert!((a2.get(1, 2).re - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(annihilation(0).is_err());
    }

    #[test]
    fn number_from_ladder() {
        let a = annihilation(5).unwrap();
        let n = &a.adjoint() * &a;
        for k in 0..=5 {
            assert!((n.get(k, k) - C64::new(k as f64, 0.0)).norm() < 1e-14);
        }
        assert!(n.is_diagonal());
    }

    #[test]
    fn truncated_canonical_commutator() {
        let cutoff = 6;
        let a = annihilation(cutoff).unwrap();
        let c = commutator(&a, &a.adjoint());
        for i in 0..=cutoff {
            for j in 0..=cutoff {
                let expect = if i != j {
                    0.0
                } else if i == cutoff {
                    -(cutoff as f64)
                } else {
                    1.0
                };
                assert!(
                    (c.get(i, j) - C64::new(expect, 0.0)).norm() < 1e-14,
                    "({i},{j})"
                );
            }
        }
    }

    #[test]
    fn qubit_projectors() {
        let gg = qubit_transition(Level::G, Level::G);
        assert_eq!(gg.diagonal(), vec![ONE, ZERO, ZERO]);
        let eg = qubit_transition(Level::E, Level::G);
        assert_eq!(eg.get(2, 0), ONE);
        assert_eq!(eg.triplets().len(), 1);
        let er = qubit_transition(Level::E, Level::R);
        let rg = qubit_transition(Level::R, Level::G);
        let prod = &er * &rg;
        assert_eq!(prod.triplets(), eg.triplets());
        assert!(qubit_transition_labels("x", "g").is_err());
        assert_eq!(
            qubit_transition_labels("e", "g").unwrap().triplets(),
            eg.triplets()
        );
    }

    #[test]
    fn embed_identity_and_disjoint_factors() {
        let s = spec();
        let id = embed(
            &Operator::identity(Space::Mode { cutoff: 2 }),
            Slot::ModeA,
            &s,
        )
        .unwrap();
        assert_eq!(id.triplets(), Operator::identity(Space::Full(s)).triplets());
        let idq = embed(&Operator::identity(Space::Qubit), Slot::Qubit, &s).unwrap();
        assert_eq!(idq.triplets(), id.triplets());

        let a = embed(&annihilation(2).unwrap(), Slot::ModeA, &s).unwrap();
        let b = embed(&annihilation(4).unwrap(), Slot::ModeB, &s).unwrap();
        assert_eq!(commutator(&a, &b).max_abs(), 0.0);
        assert_eq!(a.is_sparse(), s.dim() >= DENSE_BELOW);
    }

    #[test]
    fn embed_rejects_mismatched_slot() {
        let s = spec();
        let a = annihilation(3).unwrap();
        assert!(embed(&a, Slot::ModeA, &s).is_err());
        assert!(embed(&qubit_transition(Level::G, Level::G), Slot::ModeB, &s).is_err());
        assert!(embed_modes(&qubit_transition(Level::G, Level::G), Slot::Qubit, &s).is_err());
    }

    #[test]
    fn basis_states_and_expectations() {
        let s = spec();
        let psi = basis_state(Level::G, 1, 0, &s).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-15);
        let other = basis_state(Level::E, 0, 0, &s).unwrap();
        assert_eq!(psi.inner(&other).unwrap(), ZERO);

        let n_a = embed(&number(2).unwrap(), Slot::ModeA, &s).unwrap();
        let n_b = embed(&number(4).unwrap(), Slot::ModeB, &s).unwrap();
        assert_eq!(expectation(&psi, &n_a).unwrap(), ONE);
        let two_b = basis_state(Level::G, 0, 2, &s).unwrap();
        assert_eq!(expectation(&two_b, &n_b).unwrap(), C64::new(2.0, 0.0));
        let vac = basis_state(Level::G, 0, 0, &s).unwrap();
        assert_eq!(expectation(&vac, &n_b).unwrap(), ZERO);
        let id = Operator::identity(Space::Full(s));
        assert_eq!(expectation(&psi, &id).unwrap(), ONE);

        let rho = DensityMatrix::pure(&psi).unwrap();
        assert_eq!(expectation(&rho, &n_a).unwrap(), ONE);

        assert!(basis_state(Level::G, 3, 0, &s).is_err());
        assert!(basis_state(Level::G, 0, 5, &s).is_err());
        let wrong = Operator::identity(Space::Modes(s));
        assert!(expectation(&psi, &wrong).is_err());
    }

    #[test]
    fn index_layout_is_row_major() {
        let s = spec();
        assert_eq!(s.index(Level::R, 2, 3), (3 + 2) * 5 + 3);
        for idx in 0..s.dim() {
            let (q, na, nb) = s.decompose(idx);
            assert_eq!(s.index(q, na, nb), idx);
        }
        assert_eq!(s.dim(), 3 * 3 * 5);
        assert!(HilbertSpec::new(0, 2).is_err());
        assert!(HilbertSpec::new(1, 1).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let space = Space::Mode { cutoff: 1 };
        let bad_trace = DMatrix::from_diagonal_element(2, 2, C64::new(0.6, 0.0));
        assert!(DensityMatrix::new(space, bad_trace).is_err());
        let mut negative = DMatrix::zeros(2, 2);
        negative[(0, 0)] = C64::new(1.1, 0.0);
        negative[(1, 1)] = C64::new(-0.1, 0.0);
        assert!(DensityMatrix::new(space, negative).is_err());
        let mixed = DMatrix::from_diagonal_element(2, 2, C64::new(0.5, 0.0));
        assert!(DensityMatrix::new(space, mixed).is_ok());
    }

    #[test]
    fn sparse_and_dense_agree() {
        let s = HilbertSpec::new(3, 6).unwrap();
        let a = embed(&annihilation(3).unwrap(), Slot::ModeA, &s).unwrap();
        let b = embed(&annihilation(6).unwrap(), Slot::ModeB, &s).unwrap();
        assert_eq!(a.is_sparse(), s.dim() >= DENSE_BELOW);
        let prod = &(&a.adjoint() * &b) + &a;
        let dense = a.adjoint().to_dense() * b.to_dense() + a.to_dense();
        assert_eq!(prod.to_dense(), dense);
    }

    fn hermitian(dim: usize, vals: &[f64]) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(dim, dim);
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                let z = C64::new(vals[k], if i == j { 0.0 } else { vals[k + 1] });
                k += 2;
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    proptest! {
        #[test]
        fn embedding_preserves_spectrum(vals in proptest::collection::vec(-1.0f64..1.0, 12)) {
            let s = HilbertSpec::new(1, 2).unwrap();
            let local = Operator::from_dense(Space::Qubit, hermitian(3, &vals)).unwrap();
            let local_eigs = local.hermitian_eigenvalues();
            let full = embed(&local, Slot::Qubit, &s).unwrap();
            let eigs = full.hermitian_eigenvalues();
            let mult = s.mode_dim();
            let mut expected: Vec<f64> = local_eigs.iter().flat_map(|&e| std::iter::repeat_n(e, mult)).collect();
            expected.sort_by(f64::total_cmp);
            for (x, y) in eigs.iter().zip(&expected) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn builders_are_pure(cutoff in 1usize..8) {
            let a1 = annihilation(cutoff).unwrap();
            let a2 = annihilation(cutoff).unwrap();
            prop_assert_eq!(a1.to_dense(), a2.to_dense());
        }
    }
}
