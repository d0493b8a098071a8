//! Walk-graph Hamiltonians and assembly of the full `H(gamma) = H_G + H_P`.
//!
//! Driver actions are matrix-free: the hypercube term costs `O(2^n n)` per
//! application and the complete graph `O(2^n)` via its rank-one projector
//! form. Dense matrices are materialized only for exact diagonalization, and
//! only up to [`DENSE_QUBIT_CAP`] qubits.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{uniform_state, DiagonalOperator, StateVector, DENSE_QUBIT_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Graph {
    Hypercube,
    Complete,
}

impl Graph {
    pub fn parse(s: &str) -> Result<Graph> {
        match s.to_ascii_lowercase().as_str() {
            "hypercube" => Ok(Graph::Hypercube),
            "complete" => Ok(Graph::Complete),
            other => Err(Error::InvalidInput(format!("unknown graph '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Graph::Hypercube => "hypercube",
            Graph::Complete => "complete",
        }
    }
}

impl std::fmt::Display for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Choice of walk graph and hopping rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverSpec {
    pub graph: Graph,
    pub gamma: f64,
}

impl DriverSpec {
    pub fn new(graph: Graph, gamma: f64) -> Result<Self> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "hopping rate must be positive, got {gamma}"
            )));
        }
        Ok(DriverSpec { graph, gamma })
    }
}

/// Matrix-free Hamiltonian action shared by the full-space walk operator and
/// the symmetric-subspace search operator.
pub trait Hamiltonian: Sync {
    fn dim(&self) -> usize;

    /// `out = H v`.
    fn apply_into(&self, v: &[C64], out: &mut [C64]);

    /// `out = H_G v` (driver term only).
    fn apply_driver_into(&self, v: &[C64], out: &mut [C64]);

    /// Diagonal of the problem term in this representation.
    fn problem_diagonal(&self) -> &[f64];

    /// A closed interval guaranteed to contain the spectrum.
    fn energy_bounds(&self) -> (f64, f64);

    /// Dense symmetric matrix, for exact diagonalization.
    fn dense(&self) -> Result<Array2<f64>>;

    /// The walk's natural start state (driver ground state).
    fn start_state(&self) -> StateVector;

    /// Position of the problem ground state in this representation.
    fn ground_position(&self) -> usize;
}

/// Full-space walk Hamiltonian `H(gamma) = H_G + H_P`.
#[derive(Debug, Clone)]
pub struct WalkHamiltonian {
    driver: DriverSpec,
    problem: DiagonalOperator,
    n: u32,
}

impl WalkHamiltonian {
    pub fn new(driver: DriverSpec, problem: DiagonalOperator) -> Result<Self> {
        let n = problem.qubits();
        if n == 0 {
            return Err(Error::InvalidInput("problem diagonal has n=0".into()));
        }
        Ok(WalkHamiltonian { driver, problem, n })
    }

    pub fn driver(&self) -> DriverSpec {
        self.driver
    }

    pub fn problem(&self) -> &DiagonalOperator {
        &self.problem
    }

    pub fn qubits(&self) -> u32 {
        self.n
    }
}

impl Hamiltonian for WalkHamiltonian {
    fn dim(&self) -> usize {
        1usize << self.n
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        let gamma = self.driver.gamma;
        let d = self.problem.entries();
        match self.driver.graph {
            Graph::Hypercube => {
                let n = self.n;
                let shift = gamma * n as f64;
                for (x, o) in out.iter_mut().enumerate() {
                    let mut hop = C64::new(0.0, 0.0);
                    for j in 0..n {
                        hop += v[x ^ (1usize << j)];
                    }
                    *o = (shift + d[x]) * v[x] - gamma * hop;
                }
            }
            Graph::Complete => {
                let dim = v.len() as f64;
                let total: C64 = v.iter().sum();
                let shift = gamma * dim;
                for (x, o) in out.iter_mut().enumerate() {
                    *o = (shift + d[x]) * v[x] - gamma * total;
                }
            }
        }
    }

    fn apply_driver_into(&self, v: &[C64], out: &mut [C64]) {
        let gamma = self.driver.gamma;
        match self.driver.graph {
            Graph::Hypercube => {
                let n = self.n;
                let shift = gamma * n as f64;
                for (x, o) in out.iter_mut().enumerate() {
                    let mut hop = C64::new(0.0, 0.0);
                    for j in 0..n {
                        hop += v[x ^ (1usize << j)];
                    }
                    *o = shift * v[x] - gamma * hop;
                }
            }
            Graph::Complete => {
                let dim = v.len() as f64;
                let total: C64 = v.iter().sum();
                let shift = gamma * dim;
                for (x, o) in out.iter_mut().enumerate() {
                    *o = shift * v[x] - gamma * total;
                }
            }
        }
    }

    fn problem_diagonal(&self) -> &[f64] {
        self.problem.entries()
    }

    fn energy_bounds(&self) -> (f64, f64) {
        let driver_top = match self.driver.graph {
            Graph::Hypercube => 2.0 * self.driver.gamma * self.n as f64,
            Graph::Complete => self.driver.gamma * self.dim() as f64,
        };
        (self.problem.min(), driver_top + self.problem.max())
    }

    fn dense(&self) -> Result<Array2<f64>> {
        if self.n > DENSE_QUBIT_CAP {
            return Err(Error::Capacity(format!(
                "dense Hamiltonian for n={} exceeds cap n<={DENSE_QUBIT_CAP}",
                self.n
            )));
        }
        let dim = self.dim();
        let gamma = self.driver.gamma;
        let d = self.problem.entries();
        let mut h = Array2::zeros((dim, dim));
        match self.driver.graph {
            Graph::Hypercube => {
                let shift = gamma * self.n as f64;
                for x in 0..dim {
                    h[[x, x]] = shift + d[x];
                    for j in 0..self.n {
                        h[[x, x ^ (1usize << j)]] = -gamma;
                    }
                }
            }
            Graph::Complete => {
                let shift = gamma * dim as f64;
                for x in 0..dim {
                    for y in 0..dim {
                        h[[x, y]] = -gamma;
                    }
                    h[[x, x]] = shift - gamma + d[x];
                }
            }
        }
        Ok(h)
    }

    fn start_state(&self) -> StateVector {
        uniform_state(self.n).expect("walk Hamiltonian fits the vector cap")
    }

    fn ground_position(&self) -> usize {
        self.problem.ground_index().0
    }
}

/// Apply the hypercube driver `gamma [n 1 - sum_j X_j]` to a full-space state.
pub fn apply_hypercube(n: u32, gamma: f64, v: &StateVector) -> Result<StateVector> {
    if v.is_subspace() || v.qubits() != n {
        return Err(Error::InvalidInput(
            "hypercube driver needs a full-space state of matching n".into(),
        ));
    }
    let dim = v.dim();
    let problem = DiagonalOperator::new(vec![0.0; dim])?;
    let h = WalkHamiltonian::new(DriverSpec::new(Graph::Hypercube, gamma)?, problem)?;
    let mut out = vec![C64::new(0.0, 0.0); dim];
    h.apply_into(v.amplitudes(), &mut out);
    StateVector::new(out, n, false)
}

/// Apply the complete-graph driver `gamma N [1 - |psi0><psi0|]`.
pub fn apply_complete(n: u32, gamma: f64, v: &StateVector) -> Result<StateVector> {
    if v.is_subspace() || v.qubits() != n {
        return Err(Error::InvalidInput(
            "complete-graph driver needs a full-space state of matching n".into(),
        ));
    }
    let dim = v.dim();
    let problem = DiagonalOperator::new(vec![0.0; dim])?;
    let h = WalkHamiltonian::new(DriverSpec::new(Graph::Complete, gamma)?, problem)?;
    let mut out = vec![C64::new(0.0, 0.0); dim];
    h.apply_into(v.amplitudes(), &mut out);
    StateVector::new(out, n, false)
}

/// Apply the full `H(gamma)` to a state.
pub fn apply_full(h: &WalkHamiltonian, v: &StateVector) -> Result<StateVector> {
    if v.is_subspace() || v.dim() != h.dim() {
        return Err(Error::InvalidInput("state dimension mismatch".into()));
    }
    let mut out = vec![C64::new(0.0, 0.0); v.dim()];
    h.apply_into(v.amplitudes(), &mut out);
    StateVector::new(out, h.qubits(), false)
}

/// Search dynamics on the hypercube restricted to the Hamming shells around
/// the marked state: an `(n+1)`-dimensional tridiagonal operator.
///
/// Shell `k` collects the `C(n,k)` states at Hamming distance `k` from the
/// marked state; the diagonal is `gamma n` (minus one unit at shell 0) and
/// the couplings are `-gamma sqrt((n-k)(k+1))`.
#[derive(Debug, Clone)]
pub struct SymmetricSearchHamiltonian {
    n: u32,
    gamma: f64,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
    problem_diag: Vec<f64>,
}

/// Build the symmetric-subspace search Hamiltonian.
pub fn build_search_symmetric(n: u32, gamma: f64) -> Result<SymmetricSearchHamiltonian> {
    if n == 0 || n > 64 {
        return Err(Error::InvalidInput(format!("unsupported qubit count n={n}")));
    }
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidInput("gamma must be positive".into()));
    }
    let nf = n as f64;
    let mut diag = vec![gamma * nf; n as usize + 1];
    diag[0] -= 1.0;
    let offdiag: Vec<f64> = (0..n)
        .map(|k| {
            let kf = k as f64;
            -gamma * ((nf - kf) * (kf + 1.0)).sqrt()
        })
        .collect();
    let mut problem_diag = vec![0.0; n as usize + 1];
    problem_diag[0] = -1.0;
    Ok(SymmetricSearchHamiltonian {
        n,
        gamma,
        diag,
        offdiag,
        problem_diag,
    })
}

impl SymmetricSearchHamiltonian {
    pub fn qubits(&self) -> u32 {
        self.n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// Amplitudes `sqrt(C(n,k)/2^n)` of the uniform state on the shells.
    pub fn shell_amplitudes(&self) -> Vec<f64> {
        let n = self.n as usize;
        let mut amps = Vec::with_capacity(n + 1);
        let mut a = 2.0f64.powf(-(self.n as f64) / 2.0);
        for k in 0..=n {
            amps.push(a);
            if k < n {
                a *= ((n - k) as f64 / (k + 1) as f64).sqrt();
            }
        }
        amps
    }
}

impl Hamiltonian for SymmetricSearchHamiltonian {
    fn dim(&self) -> usize {
        self.n as usize + 1
    }

    fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        let m = self.dim();
        for k in 0..m {
            let mut acc = self.diag[k] * v[k];
            if k > 0 {
                acc += self.offdiag[k - 1] * v[k - 1];
            }
            if k + 1 < m {
                acc += self.offdiag[k] * v[k + 1];
            }
            out[k] = acc;
        }
    }

    fn apply_driver_into(&self, v: &[C64], out: &mut [C64]) {
        let m = self.dim();
        let shift = self.gamma * self.n as f64;
        for k in 0..m {
            let mut acc = shift * v[k];
            if k > 0 {
                acc += self.offdiag[k - 1] * v[k - 1];
            }
            if k + 1 < m {
                acc += self.offdiag[k] * v[k + 1];
            }
            out[k] = acc;
        }
    }

    fn problem_diagonal(&self) -> &[f64] {
        &self.problem_diag
    }

    fn energy_bounds(&self) -> (f64, f64) {
        // Gershgorin enclosure of the tridiagonal matrix.
        let m = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..m {
            let mut radius = 0.0;
            if k > 0 {
                radius += self.offdiag[k - 1].abs();
            }
            if k + 1 < m {
                radius += self.offdiag[k].abs();
            }
            lo = lo.min(self.diag[k] - radius);
            hi = hi.max(self.diag[k] + radius);
        }
        (lo, hi)
    }

    fn dense(&self) -> Result<Array2<f64>> {
        let m = self.dim();
        let mut h = Array2::zeros((m, m));
        for k in 0..m {
            h[[k, k]] = self.diag[k];
            if k + 1 < m {
                h[[k, k + 1]] = self.offdiag[k];
                h[[k + 1, k]] = self.offdiag[k];
            }
        }
        Ok(h)
    }

    fn start_state(&self) -> StateVector {
        let amps = self
            .shell_amplitudes()
            .into_iter()
            .map(|a| C64::new(a, 0.0))
            .collect();
        StateVector::new(amps, self.n, true).expect("shell amplitudes have length n+1")
    }

    fn ground_position(&self) -> usize {
        0
    }
}
