//! Bit-level Hilbert-space utilities shared by every other module.
//!
//! Computational basis states of `n` qubits are indexed by the integers
//! `0..2^n`, with bit `j` of the index holding the state of qubit `j`.
//! Everything here is a pure function of its inputs; values are immutable
//! after construction and safe to share across threads.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hard cap on dense-matrix operations (`2^14 = 16384`); a dense Hamiltonian
/// at this size is 2 GiB, which is the practical ceiling for exact
/// diagonalization on one node.
pub const DENSE_QUBIT_CAP: u32 = 14;

/// Hard cap on full energy tables and state vectors (`2^24` doubles is
/// 128 MiB per table).
pub const TABLE_QUBIT_CAP: u32 = 24;

/// Index of a computational basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex(pub usize);

impl BasisIndex {
    /// Checks `value < 2^n`.
    pub fn new(value: usize, n: u32) -> Result<Self> {
        if n == 0 || n > 63 {
            return Err(Error::InvalidInput(format!("qubit count {n} out of range")));
        }
        if value >> n != 0 {
            return Err(Error::InvalidInput(format!(
                "basis index {value} out of range for n={n}"
            )));
        }
        Ok(BasisIndex(value))
    }
}

/// Number of set bits.
pub fn hamming_weight(x: usize) -> u32 {
    x.count_ones()
}

/// The `j`-th codeword of the binary-reflected Gray code, `j ^ (j >> 1)`.
///
/// Consecutive codewords differ in exactly one bit, and the map is a
/// bijection on `[0, 2^n)` for every `n`.
pub fn gray_code(j: usize) -> usize {
    j ^ (j >> 1)
}

/// Spin value of qubit `j` in basis state `x`: `+1` for bit 0, `-1` for bit 1.
#[inline]
pub fn spin(x: usize, j: u32) -> f64 {
    1.0 - 2.0 * ((x >> j) & 1) as f64
}

/// Diagonal problem Hamiltonian: one energy per computational basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    entries: Vec<f64>,
}

impl DiagonalOperator {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() || !entries.len().is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "diagonal length {} is not a power of two",
                entries.len()
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidInput("non-finite diagonal entry".into()));
        }
        Ok(DiagonalOperator { entries })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn qubits(&self) -> u32 {
        self.entries.len().trailing_zeros()
    }

    /// Index of the smallest entry; ties resolve to the lowest index.
    pub fn ground_index(&self) -> BasisIndex {
        let mut best = 0;
        for (i, &e) in self.entries.iter().enumerate() {
            if e < self.entries[best] {
                best = i;
            }
        }
        BasisIndex(best)
    }

    pub fn min(&self) -> f64 {
        self.entries.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.entries
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max - min` of the energies.
    pub fn spread(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn mean(&self) -> f64 {
        self.entries.iter().sum::<f64>() / self.entries.len() as f64
    }
}

/// Complex amplitudes over the `2^n` computational basis states, or over the
/// `n+1` Hamming shells when `subspace` is set.
#[derive(Debug, Clone)]
pub struct StateVector {
    amps: Vec<Complex64>,
    n: u32,
    subspace: bool,
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>, n: u32, subspace: bool) -> Result<Self> {
        let expect = if subspace { n as usize + 1 } else { 1usize << n };
        if amps.len() != expect {
            return Err(Error::InvalidInput(format!(
                "state length {} does not match n={n} (expected {expect})",
                amps.len()
            )));
        }
        Ok(StateVector { amps, n, subspace })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn qubits(&self) -> u32 {
        self.n
    }

    pub fn is_subspace(&self) -> bool {
        self.subspace
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Rescale to unit norm. Errors on (numerically) zero input.
pub fn normalize(v: &StateVector) -> Result<StateVector> {
    let norm = v.norm();
    if norm <= 0.0 || !norm.is_finite() {
        return Err(Error::InvalidInput("cannot normalize zero vector".into()));
    }
    let amps = v.amps.iter().map(|a| a / norm).collect();
    StateVector::new(amps, v.n, v.subspace)
}

/// Equal superposition of all `2^n` basis states.
pub fn uniform_state(n: u32) -> Result<StateVector> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if n > TABLE_QUBIT_CAP {
        return Err(Error::Capacity(format!(
            "full-space state for n={n} exceeds cap n<={TABLE_QUBIT_CAP}"
        )));
    }
    let dim = 1usize << n;
    let amp = Complex64::new((dim as f64).powf(-0.5), 0.0);
    StateVector::new(vec![amp; dim], n, false)
}
