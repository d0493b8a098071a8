//! The five problem families, generated as diagonal Hamiltonians with
//! reproducible seeds.
//!
//! * `Sk` — all-to-all Ising spin glass with Gaussian couplings and fields.
//!   The stored symmetric coupling for an unordered pair carries variance
//!   `omega^2 / 2` (the average of two independent ordered draws), fields
//!   carry variance `omega^2`, so the energy-eigenvalue standard deviation
//!   is `(omega/2) * sqrt(n(n+3))`.
//! * `Rem` — every basis state gets an independent `N(0, omega^2)` energy.
//! * `Ssk` — an SK spectrum scrambled over basis states by a seeded
//!   permutation: identical spectrum, no Hamming-distance correlations.
//! * `Remgc` — REM energies sorted and laid out along the binary-reflected
//!   Gray code, injecting single-bit-flip correlations.
//! * `Search` — one marked state at energy `-1`, everything else at `0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{gray_code, spin, BasisIndex, DiagonalOperator, TABLE_QUBIT_CAP};
use crate::rng::{splitmix64, Stream};

/// Default energy unit for SK ensembles.
pub const OMEGA_SK_DEFAULT: f64 = 5.0;
/// Default energy unit for REM ensembles.
pub const OMEGA_REM_DEFAULT: f64 = 1.0;

/// Multiplicative correction to the normal-tail spread estimate for SK,
/// accounting for the non-normal tails of its energy distribution. Valid
/// over the sizes exercised here (roughly 5..=20 qubits).
pub const SK_SPREAD_CORRECTION: f64 = 0.887;

const SSK_PERMUTATION_SALT: u64 = 0x73_73_6b_5f_70_65_72_6d; // "ssk_perm"

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Sk,
    Rem,
    Ssk,
    Remgc,
    Search,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Sk => "sk",
            Model::Rem => "rem",
            Model::Ssk => "ssk",
            Model::Remgc => "remgc",
            Model::Search => "search",
        }
    }

    pub fn parse(s: &str) -> Result<Model> {
        match s.to_ascii_lowercase().as_str() {
            "sk" => Ok(Model::Sk),
            "rem" => Ok(Model::Rem),
            "ssk" => Ok(Model::Ssk),
            "remgc" => Ok(Model::Remgc),
            "search" => Ok(Model::Search),
            other => Err(Error::InvalidInput(format!("unknown model '{other}'"))),
        }
    }

    /// Models whose couplings/fields are stored explicitly in archives.
    pub fn is_sk_family(&self) -> bool {
        matches!(self, Model::Sk | Model::Ssk)
    }

    pub fn default_omega(&self) -> f64 {
        match self {
            Model::Sk | Model::Ssk => OMEGA_SK_DEFAULT,
            Model::Rem | Model::Remgc => OMEGA_REM_DEFAULT,
            Model::Search => 1.0,
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Distribution parameters for coupling/field draws.
#[derive(Debug, Clone, Copy)]
pub struct GenerationParams {
    /// Mean of the coupling/field distribution.
    pub mu: f64,
    /// Energy unit; the field standard deviation.
    pub omega: f64,
    /// Force all fields to zero (restores exact spin-flip symmetry).
    pub zero_fields: bool,
}

impl GenerationParams {
    pub fn new(omega: f64) -> Self {
        GenerationParams {
            mu: 0.0,
            omega,
            zero_fields: false,
        }
    }
}

/// One sampled optimization problem plus its provenance.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub model: Model,
    pub n: u32,
    pub seed: u64,
    pub omega: f64,
    pub mu: f64,
    /// Symmetric couplings, upper triangle row-major: (0,1), (0,2), ...
    couplings: Option<Vec<f64>>,
    fields: Option<Vec<f64>>,
    pub marked: Option<BasisIndex>,
    pub permutation_seed: Option<u64>,
    energies: Option<DiagonalOperator>,
}

fn upper_index(n: u32, j: u32, k: u32) -> usize {
    debug_assert!(j < k && k < n);
    let (n, j, k) = (n as usize, j as usize, k as usize);
    j * n - j * (j + 1) / 2 + (k - j - 1)
}

fn check_table_capacity(n: u32) -> Result<()> {
    if n > TABLE_QUBIT_CAP {
        return Err(Error::Capacity(format!(
            "energy table for n={n} exceeds cap n<={TABLE_QUBIT_CAP}"
        )));
    }
    Ok(())
}

/// Generate an instance with `mu = 0`.
pub fn generate(model: Model, n: u32, seed: u64, omega: f64) -> Result<ProblemInstance> {
    generate_with(model, n, seed, GenerationParams::new(omega))
}

/// Generate an instance. The same `(model, n, seed, params)` always yields
/// the identical instance.
pub fn generate_with(
    model: Model,
    n: u32,
    seed: u64,
    params: GenerationParams,
) -> Result<ProblemInstance> {
    if params.omega <= 0.0 || !params.omega.is_finite() {
        return Err(Error::InvalidInput("omega must be positive".into()));
    }
    if n < 1 || n > 63 {
        return Err(Error::InvalidInput(format!("unsupported qubit count n={n}")));
    }
    let omega = params.omega;
    match model {
        Model::Sk => {
            if n < 2 {
                return Err(Error::InvalidInput("SK needs at least two spins".into()));
            }
            let mut stream = Stream::new(seed);
            let pairs = (n as usize) * (n as usize - 1) / 2;
            // The unordered coupling is the average of two ordered draws,
            // hence the sqrt(2) reduction of its standard deviation.
            let sigma_coupling = omega / std::f64::consts::SQRT_2;
            let couplings: Vec<f64> = (0..pairs)
                .map(|_| params.mu + sigma_coupling * stream.next_normal())
                .collect();
            let fields: Vec<f64> = (0..n)
                .map(|_| {
                    let z = stream.next_normal();
                    if params.zero_fields {
                        0.0
                    } else {
                        params.mu + omega * z
                    }
                })
                .collect();
            Ok(ProblemInstance {
                model,
                n,
                seed,
                omega,
                mu: params.mu,
                couplings: Some(couplings),
                fields: Some(fields),
                marked: None,
                permutation_seed: None,
                energies: None,
            })
        }
        Model::Rem => {
            check_table_capacity(n)?;
            let mut stream = Stream::new(seed);
            let dim = 1usize << n;
            let energies: Vec<f64> = (0..dim).map(|_| omega * stream.next_normal()).collect();
            Ok(ProblemInstance {
                model,
                n,
                seed,
                omega,
                mu: 0.0,
                couplings: None,
                fields: None,
                marked: None,
                permutation_seed: None,
                energies: Some(DiagonalOperator::new(energies)?),
            })
        }
        Model::Ssk => {
            check_table_capacity(n)?;
            let base = generate_with(Model::Sk, n, seed, params)?;
            let permutation_seed = splitmix64(seed ^ SSK_PERMUTATION_SALT);
            scramble(&base, permutation_seed)
        }
        Model::Remgc => {
            let base = generate_with(Model::Rem, n, seed, params)?;
            gray_order(&base)
        }
        Model::Search => {
            let mut stream = Stream::new(seed);
            let marked = (stream.next_u64() & ((1u64 << n) - 1)) as usize;
            Ok(ProblemInstance {
                model,
                n,
                seed,
                omega,
                mu: 0.0,
                couplings: None,
                fields: None,
                marked: Some(BasisIndex(marked)),
                permutation_seed: None,
                energies: None,
            })
        }
    }
}

/// Scramble an SK instance: permute which basis state carries which energy.
///
/// `permutation_seed == 0` is the identity permutation by convention.
pub fn scramble(base: &ProblemInstance, permutation_seed: u64) -> Result<ProblemInstance> {
    if base.model != Model::Sk {
        return Err(Error::InvalidInput(
            "scramble requires an SK base instance".into(),
        ));
    }
    let table = base.full_energy_table()?;
    let dim = table.len();
    let mut perm: Vec<usize> = (0..dim).collect();
    if permutation_seed != 0 {
        let mut stream = Stream::new(permutation_seed);
        stream.shuffle(&mut perm);
    }
    let entries = table.entries();
    let permuted: Vec<f64> = perm.iter().map(|&p| entries[p]).collect();
    Ok(ProblemInstance {
        model: Model::Ssk,
        n: base.n,
        seed: base.seed,
        omega: base.omega,
        mu: base.mu,
        couplings: base.couplings.clone(),
        fields: base.fields.clone(),
        marked: None,
        permutation_seed: Some(permutation_seed),
        energies: Some(DiagonalOperator::new(permuted)?),
    })
}

/// Sort a REM spectrum and reassign it along the binary-reflected Gray code,
/// so consecutive energies land on states one bit-flip apart.
pub fn gray_order(base: &ProblemInstance) -> Result<ProblemInstance> {
    if base.model != Model::Rem {
        return Err(Error::InvalidInput(
            "gray_order requires a REM base instance".into(),
        ));
    }
    let table = base.full_energy_table()?;
    let mut sorted: Vec<f64> = table.entries().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut entries = vec![0.0; sorted.len()];
    for (rank, &energy) in sorted.iter().enumerate() {
        entries[gray_code(rank)] = energy;
    }
    Ok(ProblemInstance {
        model: Model::Remgc,
        n: base.n,
        seed: base.seed,
        omega: base.omega,
        mu: base.mu,
        couplings: None,
        fields: None,
        marked: None,
        permutation_seed: None,
        energies: Some(DiagonalOperator::new(entries)?),
    })
}

impl ProblemInstance {
    pub fn couplings(&self) -> Option<&[f64]> {
        self.couplings.as_deref()
    }

    pub fn fields(&self) -> Option<&[f64]> {
        self.fields.as_deref()
    }

    /// Symmetric coupling between spins `j` and `k`.
    pub fn coupling(&self, j: u32, k: u32) -> f64 {
        if j == k {
            return 0.0;
        }
        let (a, b) = if j < k { (j, k) } else { (k, j) };
        self.couplings.as_ref().map_or(0.0, |c| c[upper_index(self.n, a, b)])
    }

    /// Diagonal entry `<x|H_P|x>`.
    ///
    /// For SK this is `-sum_{j<k} J_jk s_j s_k - sum_j h_j s_j` with
    /// `s_j = 1 - 2 bit_j(x)`, accumulated in a fixed order that
    /// [`full_energy_table`](Self::full_energy_table) reproduces exactly.
    pub fn energy_of(&self, x: BasisIndex) -> f64 {
        match self.model {
            Model::Sk => {
                let couplings = self.couplings.as_ref().expect("SK instance has couplings");
                let fields = self.fields.as_ref().expect("SK instance has fields");
                let mut acc = 0.0;
                for k in 0..self.n {
                    let mut g = fields[k as usize];
                    for j in 0..k {
                        g += couplings[upper_index(self.n, j, k)] * spin(x.0, j);
                    }
                    acc += spin(x.0, k) * g;
                }
                -acc
            }
            Model::Search => {
                if Some(x) == self.marked {
                    -1.0
                } else {
                    0.0
                }
            }
            Model::Rem | Model::Ssk | Model::Remgc => {
                self.energies.as_ref().expect("table-backed instance")[x]
            }
        }
    }

    /// All `2^n` energies.
    ///
    /// The SK table is built in `O(2^n n)` by tabulating, per spin `k`, the
    /// partial field `g_k(y) = h_k + sum_{j<k} J_jk s_j(y)` over the low
    /// `k` bits, then accumulating `s_k g_k` in the same order
    /// [`energy_of`](Self::energy_of) uses, so the two agree bit-for-bit.
    pub fn full_energy_table(&self) -> Result<DiagonalOperator> {
        check_table_capacity(self.n)?;
        match self.model {
            Model::Sk => {
                let couplings = self.couplings.as_ref().expect("SK instance has couplings");
                let fields = self.fields.as_ref().expect("SK instance has fields");
                let dim = 1usize << self.n;
                let mut acc = vec![0.0f64; dim];
                let mut gk: Vec<f64> = Vec::new();
                for k in 0..self.n {
                    let block = 1usize << k;
                    gk.clear();
                    gk.resize(block, 0.0);
                    for (y, slot) in gk.iter_mut().enumerate() {
                        let mut g = fields[k as usize];
                        for j in 0..k {
                            g += couplings[upper_index(self.n, j, k)] * spin(y, j);
                        }
                        *slot = g;
                    }
                    let mask = block - 1;
                    for (x, a) in acc.iter_mut().enumerate() {
                        *a += spin(x, k) * gk[x & mask];
                    }
                }
                for a in acc.iter_mut() {
                    *a = -*a;
                }
                DiagonalOperator::new(acc)
            }
            Model::Search => {
                let dim = 1usize << self.n;
                let mut entries = vec![0.0; dim];
                entries[self.marked.expect("search instance has a marked state").0] = -1.0;
                DiagonalOperator::new(entries)
            }
            Model::Rem | Model::Ssk | Model::Remgc => {
                Ok(self.energies.clone().expect("table-backed instance"))
            }
        }
    }

    /// The basis state carrying the lowest energy.
    pub fn ground_state(&self) -> Result<BasisIndex> {
        match self.model {
            Model::Search => Ok(self.marked.expect("search instance has a marked state")),
            _ => Ok(self.full_energy_table()?.ground_index()),
        }
    }
}

impl std::ops::Index<BasisIndex> for DiagonalOperator {
    type Output = f64;
    fn index(&self, idx: BasisIndex) -> &f64 {
        &self.entries()[idx.0]
    }
}

/// Analytic energy-eigenvalue statistics: the standard deviation and the
/// normal-tail estimate of the mean spread `<E_max - E_min>`,
/// `-2^{3/2} sigma erfinv(1/N - 1)`, with the 0.887 tail correction applied
/// for SK only.
pub fn spectrum_stats(model: Model, n: u32, omega: f64) -> Result<(f64, f64)> {
    let sigma = match model {
        Model::Sk => omega / 2.0 * ((n as f64) * (n as f64 + 3.0)).sqrt(),
        Model::Rem => omega,
        other => {
            return Err(Error::InvalidInput(format!(
                "spectrum_stats supports SK and REM, not {other}"
            )))
        }
    };
    let dim = (1u64 << n) as f64;
    let mut spread = -(2.0f64.powf(1.5)) * sigma * crate::rng::erf_inv(1.0 / dim - 1.0);
    if model == Model::Sk {
        spread *= SK_SPREAD_CORRECTION;
    }
    Ok((sigma, spread))
}

// ---------------------------------------------------------------------------
// Instance archive files
// ---------------------------------------------------------------------------

/// One JSON document per instance. Energies are never stored for the SK
/// family (they are recomputable from couplings and fields); REM-family
/// archives store only the seed.
#[derive(Debug, Serialize, Deserialize)]
struct ArchiveDoc {
    format_version: u32,
    model: Model,
    n: u32,
    seed: u64,
    omega: f64,
    mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    couplings: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fields: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    marked: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    permutation_seed: Option<u64>,
}

pub const ARCHIVE_FORMAT_VERSION: u32 = 1;

impl ProblemInstance {
    pub fn to_archive_json(&self) -> Result<String> {
        let doc = ArchiveDoc {
            format_version: ARCHIVE_FORMAT_VERSION,
            model: self.model,
            n: self.n,
            seed: self.seed,
            omega: self.omega,
            mu: self.mu,
            couplings: if self.model.is_sk_family() {
                self.couplings.clone()
            } else {
                None
            },
            fields: if self.model.is_sk_family() {
                self.fields.clone()
            } else {
                None
            },
            marked: self.marked.map(|m| m.0),
            permutation_seed: self.permutation_seed,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_archive_json(json: &str) -> Result<ProblemInstance> {
        let doc: ArchiveDoc = serde_json::from_str(json)?;
        if doc.format_version != ARCHIVE_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported archive format version {}",
                doc.format_version
            )));
        }
        if doc.omega <= 0.0 || !doc.omega.is_finite() {
            return Err(Error::InvalidInput("archive omega must be positive".into()));
        }
        if doc.n < 1 || doc.n > 63 {
            return Err(Error::InvalidInput(format!("archive n={} out of range", doc.n)));
        }
        let n = doc.n;
        let pairs = (n as usize) * (n as usize - 1) / 2;
        match doc.model {
            Model::Sk | Model::Ssk => {
                let couplings = doc.couplings.ok_or_else(|| {
                    Error::InvalidInput("SK-family archive lacks couplings".into())
                })?;
                let fields = doc
                    .fields
                    .ok_or_else(|| Error::InvalidInput("SK-family archive lacks fields".into()))?;
                if couplings.len() != pairs || fields.len() != n as usize {
                    return Err(Error::InvalidInput(
                        "archive coupling/field lengths do not match n".into(),
                    ));
                }
                let base = ProblemInstance {
                    model: Model::Sk,
                    n,
                    seed: doc.seed,
                    omega: doc.omega,
                    mu: doc.mu,
                    couplings: Some(couplings),
                    fields: Some(fields),
                    marked: None,
                    permutation_seed: None,
                    energies: None,
                };
                if doc.model == Model::Sk {
                    Ok(base)
                } else {
                    let perm_seed = doc.permutation_seed.ok_or_else(|| {
                        Error::InvalidInput("ssk archive lacks permutation_seed".into())
                    })?;
                    scramble(&base, perm_seed)
                }
            }
            Model::Rem | Model::Remgc => generate(doc.model, n, doc.seed, doc.omega),
            Model::Search => {
                let marked = doc
                    .marked
                    .ok_or_else(|| Error::InvalidInput("search archive lacks marked".into()))?;
                Ok(ProblemInstance {
                    model: Model::Search,
                    n,
                    seed: doc.seed,
                    omega: doc.omega,
                    mu: 0.0,
                    couplings: None,
                    fields: None,
                    marked: Some(BasisIndex::new(marked, n)?),
                    permutation_seed: None,
                    energies: None,
                })
            }
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_archive_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<ProblemInstance> {
        let text = std::fs::read_to_string(path)?;
        Self::from_archive_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::instance_seed;

    #[test]
    fn generation_is_deterministic() {
        let a = generate(Model::Sk, 5, 12345, 5.0).unwrap();
        let b = generate(Model::Sk, 5, 12345, 5.0).unwrap();
        assert_eq!(a.couplings(), b.couplings());
        assert_eq!(a.fields(), b.fields());
        let ra = generate(Model::Rem, 6, 999, 1.0).unwrap();
        let rb = generate(Model::Rem, 6, 999, 1.0).unwrap();
        assert_eq!(
            ra.full_energy_table().unwrap().entries(),
            rb.full_energy_table().unwrap().entries()
        );
    }

    #[test]
    fn search_energies_are_delta_at_marked() {
        // Find a seed whose marked state is 0b101 for the exact table check.
        let mut inst = None;
        for seed in 0..256 {
            let cand = generate(Model::Search, 3, seed, 1.0).unwrap();
            if cand.marked == Some(BasisIndex(0b101)) {
                inst = Some(cand);
                break;
            }
        }
        let inst = inst.expect("some seed marks state 5");
        let table = inst.full_energy_table().unwrap();
        assert_eq!(
            table.entries(),
            &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]
        );
        assert_eq!(inst.energy_of(BasisIndex(0b101)), -1.0);
        assert_eq!(inst.energy_of(BasisIndex(0b100)), 0.0);
    }

    #[test]
    fn sk_sample_standard_deviation_in_band() {
        // The n(n-1)/2 + n = 66 underlying draws at n=11 have sigma = omega;
        // stored couplings carry sigma/sqrt(2), so scale them back before
        // pooling. Chi-square bounds for 66 draws at sigma = 5 give [3.5, 6.5].
        for seed in [1u64, 77, 4242] {
            let inst = generate(Model::Sk, 11, seed, 5.0).unwrap();
            let mut draws: Vec<f64> = inst
                .couplings()
                .unwrap()
                .iter()
                .map(|c| c * std::f64::consts::SQRT_2)
                .collect();
            draws.extend_from_slice(inst.fields().unwrap());
            assert_eq!(draws.len(), 66);
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var =
                draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / draws.len() as f64;
            let sd = var.sqrt();
            assert!((3.5..=6.5).contains(&sd), "seed={seed} sd={sd}");
        }
    }

    /// Build an SK instance with explicit couplings/fields for hand checks.
    fn sk_fixture(n: u32, couplings: Vec<f64>, fields: Vec<f64>) -> ProblemInstance {
        ProblemInstance {
            model: Model::Sk,
            n,
            seed: 0,
            omega: 1.0,
            mu: 0.0,
            couplings: Some(couplings),
            fields: Some(fields),
            marked: None,
            permutation_seed: None,
            energies: None,
        }
    }

    #[test]
    fn sk_energy_hand_cases() {
        // All couplings zero, unit fields, all spins up: E = -n.
        let n = 4;
        let inst = sk_fixture(n, vec![0.0; 6], vec![1.0; 4]);
        assert_eq!(inst.energy_of(BasisIndex(0)), -(n as f64));

        // Two spins, J_01 = 1, no fields.
        let inst = sk_fixture(2, vec![1.0], vec![0.0, 0.0]);
        assert_eq!(inst.energy_of(BasisIndex(0b00)), -1.0);
        assert_eq!(inst.energy_of(BasisIndex(0b01)), 1.0);
        let table = inst.full_energy_table().unwrap();
        assert_eq!(table.entries(), &[-1.0, 1.0, 1.0, -1.0]);
    }

    #[test]
    fn sk_table_matches_energy_of_bitwise() {
        for n in [3u32, 6, 10] {
            let inst = generate(Model::Sk, n, 2024 + n as u64, 5.0).unwrap();
            let table = inst.full_energy_table().unwrap();
            for x in 0..(1usize << n) {
                let direct = inst.energy_of(BasisIndex(x));
                assert_eq!(
                    direct.to_bits(),
                    table.entries()[x].to_bits(),
                    "n={n} x={x}"
                );
            }
        }
    }

    #[test]
    fn sk_spin_flip_symmetry_with_and_without_fields() {
        for n in [4u32, 6, 8] {
            let params = GenerationParams {
                zero_fields: true,
                ..GenerationParams::new(5.0)
            };
            let sym = generate_with(Model::Sk, n, 7 + n as u64, params).unwrap();
            let full = 1usize << n;
            for x in 0..full {
                let e = sym.energy_of(BasisIndex(x));
                let flipped = sym.energy_of(BasisIndex(!x & (full - 1)));
                assert_eq!(e.to_bits(), flipped.to_bits(), "n={n} x={x}");
            }

            let generic = generate(Model::Sk, n, 7 + n as u64, 5.0).unwrap();
            let breaks = (0..full).any(|x| {
                generic.energy_of(BasisIndex(x)) != generic.energy_of(BasisIndex(!x & (full - 1)))
            });
            assert!(breaks, "fields should break the symmetry at n={n}");
        }
    }

    #[test]
    fn ssk_is_a_spectrum_permutation() {
        let base = generate(Model::Sk, 6, 31337, 5.0).unwrap();
        let scrambled = scramble(&base, 99).unwrap();
        let mut a = base.full_energy_table().unwrap().entries().to_vec();
        let mut b = scrambled.full_energy_table().unwrap().entries().to_vec();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);

        let identity = scramble(&base, 0).unwrap();
        assert_eq!(
            identity.full_energy_table().unwrap().entries(),
            base.full_energy_table().unwrap().entries()
        );
    }

    /// Correlation between E(x) and the mean energy over the Hamming-1
    /// neighbours of x.
    fn neighbour_correlation(table: &DiagonalOperator, n: u32) -> f64 {
        let dim = 1usize << n;
        let entries = table.entries();
        let neigh: Vec<f64> = (0..dim)
            .map(|x| {
                (0..n).map(|j| entries[x ^ (1 << j)]).sum::<f64>() / n as f64
            })
            .collect();
        let mean_e = entries.iter().sum::<f64>() / dim as f64;
        let mean_n = neigh.iter().sum::<f64>() / dim as f64;
        let mut cov = 0.0;
        let mut var_e = 0.0;
        let mut var_n = 0.0;
        for x in 0..dim {
            let de = entries[x] - mean_e;
            let dn = neigh[x] - mean_n;
            cov += de * dn;
            var_e += de * de;
            var_n += dn * dn;
        }
        cov / (var_e.sqrt() * var_n.sqrt())
    }

    #[test]
    fn hamming_neighbour_correlations_by_model() {
        // SK: positive for every instance tested; the pairwise terms make
        // single-flip neighbours energetically similar.
        for n in [5u32, 8, 10] {
            for idx in 0..10u64 {
                let inst = generate(Model::Sk, n, instance_seed(5150, idx), 5.0).unwrap();
                let r = neighbour_correlation(&inst.full_energy_table().unwrap(), n);
                assert!(r > 0.0, "SK n={n} idx={idx} r={r}");
            }
        }

        // sSK and REM: centred on zero across an ensemble.
        let n = 5;
        let bound = 4.0 / ((n as f64) * (1u64 << n) as f64).sqrt();
        for model in [Model::Ssk, Model::Rem] {
            let mut mean_r = 0.0;
            let count = 100;
            for idx in 0..count {
                let inst = generate(model, n, instance_seed(626, idx), 1.0).unwrap();
                mean_r += neighbour_correlation(&inst.full_energy_table().unwrap(), n);
            }
            mean_r /= count as f64;
            assert!(mean_r.abs() < bound, "{model} mean r={mean_r} bound={bound}");
        }
    }

    #[test]
    fn gray_order_hand_example() {
        // Base energies (3, -1, 0, 2): sorted (-1, 0, 2, 3) assigned along
        // gray order (0, 1, 3, 2) gives the state-indexed table (-1, 0, 3, 2).
        let base = ProblemInstance {
            model: Model::Rem,
            n: 2,
            seed: 0,
            omega: 1.0,
            mu: 0.0,
            couplings: None,
            fields: None,
            marked: None,
            permutation_seed: None,
            energies: Some(DiagonalOperator::new(vec![3.0, -1.0, 0.0, 2.0]).unwrap()),
        };
        let gc = gray_order(&base).unwrap();
        assert_eq!(
            gc.full_energy_table().unwrap().entries(),
            &[-1.0, 0.0, 3.0, 2.0]
        );
    }

    #[test]
    fn remgc_structure_properties() {
        let inst = generate(Model::Remgc, 7, 808, 1.0).unwrap();
        let table = inst.full_energy_table().unwrap();
        // Ground state lands on gray_code(0) = 0.
        assert_eq!(table.ground_index(), BasisIndex(0));
        // Consecutive sorted energies sit on single-bit-flip neighbours.
        let mut ranked: Vec<(f64, usize)> = table
            .entries()
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, e)| (e, i))
            .collect();
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in ranked.windows(2) {
            assert_eq!((w[0].1 ^ w[1].1).count_ones(), 1);
        }
        // Spectrum matches the underlying REM instance exactly.
        let rem = generate(Model::Rem, 7, 808, 1.0).unwrap();
        let mut a = rem.full_energy_table().unwrap().entries().to_vec();
        let mut b = table.entries().to_vec();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn spectrum_stats_reference_values() {
        let (sigma, _) = spectrum_stats(Model::Rem, 10, 2.5).unwrap();
        assert_eq!(sigma, 2.5);

        let (sigma, _) = spectrum_stats(Model::Sk, 5, 1.0).unwrap();
        assert!((sigma - 0.5 * 40.0f64.sqrt()).abs() < 1e-12);
        assert!((sigma - 3.1623).abs() < 1e-4);

        // REM n=1: spread = 2^{3/2} * omega * erfinv(1/2) = 1.3490 omega.
        let (_, spread) = spectrum_stats(Model::Rem, 1, 1.0).unwrap();
        assert!((spread - 2.0f64.powf(1.5) * 0.47693627620446987).abs() < 1e-10);
        assert!((spread - 1.3490).abs() < 1e-4);
    }

    #[test]
    fn sk_energy_variance_matches_formula() {
        // Sample variance over all 2^n energies, averaged over instances,
        // against (omega^2/4) n(n+3) within three combined standard errors.
        let omega = 5.0;
        for n in [5u32, 8] {
            let count = 120;
            let mut vars = Vec::with_capacity(count as usize);
            for idx in 0..count {
                let inst = generate(Model::Sk, n, instance_seed(424242, idx), omega).unwrap();
                let table = inst.full_energy_table().unwrap();
                let mean = table.mean();
                let dim = table.len() as f64;
                let var = table
                    .entries()
                    .iter()
                    .map(|e| (e - mean) * (e - mean))
                    .sum::<f64>()
                    / dim;
                vars.push(var);
            }
            let mean_var = vars.iter().sum::<f64>() / vars.len() as f64;
            let sd_var = (vars
                .iter()
                .map(|v| (v - mean_var) * (v - mean_var))
                .sum::<f64>()
                / (vars.len() as f64 - 1.0))
                .sqrt();
            let se = sd_var / (vars.len() as f64).sqrt();
            let target = omega * omega / 4.0 * (n as f64) * (n as f64 + 3.0);
            assert!(
                (mean_var - target).abs() <= 3.0 * se,
                "n={n}: mean_var={mean_var} target={target} se={se}"
            );
        }
    }

    #[test]
    fn archive_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        for (model, n) in [
            (Model::Sk, 5u32),
            (Model::Rem, 5),
            (Model::Ssk, 5),
            (Model::Remgc, 5),
            (Model::Search, 6),
        ] {
            let inst = generate(model, n, 4711, model.default_omega()).unwrap();
            let path = tmp.path().join(format!("{model}.json"));
            inst.save(&path).unwrap();
            let back = ProblemInstance::load(&path).unwrap();
            assert_eq!(back.model, model);
            assert_eq!(back.n, n);
            assert_eq!(
                inst.full_energy_table().unwrap().entries(),
                back.full_energy_table().unwrap().entries(),
                "{model}"
            );
        }
    }

    #[test]
    fn generate_rejects_bad_input() {
        assert!(generate(Model::Sk, 1, 0, 5.0).is_err());
        assert!(generate(Model::Sk, 5, 0, 0.0).is_err());
        assert!(generate(Model::Rem, 30, 0, 1.0).is_err()); // table capacity
    }
}
