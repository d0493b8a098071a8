//! Hopping-rate selection: the analytic search-problem optimum, brute-force
//! `P_inf` scans with peak and width analysis, and the heuristic
//! energy-balance rate.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::drivers::Graph;
use crate::error::{Error, Result};
use crate::problems::{generate, spectrum_stats, Model};
use crate::rng::instance_seed;
use crate::spectral::p_infinity_dataset;

/// Upper size limit for energy-spread measurement (full table enumeration).
pub const SPREAD_QUBIT_CAP: u32 = 20;

/// Optimal hopping rate for search on the hypercube:
/// `2 gamma = (1/N) sum_{r=1}^{n} C(n,r) / r`.
pub fn search_gamma_opt_hypercube(n: u32) -> f64 {
    // term_r = C(n,r) / 2^n, via the stable multiplicative recurrence.
    let mut term = 2.0f64.powi(-(n as i32));
    let mut sum = 0.0;
    for r in 1..=n {
        term *= (n - r + 1) as f64 / r as f64;
        sum += term / r as f64;
    }
    sum / 2.0
}

/// Optimal hopping rate for search on the complete graph, `1/N`.
pub fn search_gamma_opt_complete(n: u32) -> f64 {
    2.0f64.powi(-(n as i32))
}

/// Heuristic rate balancing the driver energy spread against a problem
/// energy spread: `spread / (2n)` on the hypercube (driver spread `2 gamma n`)
/// and `spread / N` on the complete graph (driver spread `gamma N`).
pub fn energy_balance_rate(graph: Graph, n: u32, spread: f64) -> f64 {
    match graph {
        Graph::Hypercube => spread / (2.0 * n as f64),
        Graph::Complete => spread / 2.0f64.powi(n as i32),
    }
}

/// Where the heuristic's energy spread comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadSource {
    /// Mean `max - min` over a seeded ensemble of instances.
    Measured { master_seed: u64, count: u64 },
    /// Normal-tail estimate from the analytic eigenvalue statistics.
    Analytic,
}

/// Mean energy spread `<E_max - E_min>` over a seeded ensemble.
pub fn measure_energy_spread(
    model: Model,
    n: u32,
    omega: f64,
    n_instances: u64,
    master_seed: u64,
) -> Result<f64> {
    if n > SPREAD_QUBIT_CAP {
        return Err(Error::Capacity(format!(
            "spread measurement enumerates 2^n energies; n={n} exceeds {SPREAD_QUBIT_CAP}"
        )));
    }
    if n_instances == 0 {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    use rayon::prelude::*;
    let spreads: Result<Vec<f64>> = (0..n_instances)
        .into_par_iter()
        .map(|idx| {
            let inst = generate(model, n, instance_seed(master_seed, idx), omega)?;
            Ok(inst.full_energy_table()?.spread())
        })
        .collect();
    let spreads = spreads?;
    Ok(spreads.iter().sum::<f64>() / spreads.len() as f64)
}

/// Heuristic hypercube hopping rate `gamma_heur = <spread> / (2n)`.
pub fn heuristic_gamma(model: Model, n: u32, omega: f64, source: SpreadSource) -> Result<f64> {
    let spread = match source {
        SpreadSource::Measured { master_seed, count } => {
            measure_energy_spread(model, n, omega, count, master_seed)?
        }
        SpreadSource::Analytic => spectrum_stats(model, n, omega)?.1,
    };
    Ok(energy_balance_rate(Graph::Hypercube, n, spread))
}

/// Grid layout for the brute-force scan: `coarse_points` log-spaced over
/// `[center/bracket, center*bracket]`, then one linear refinement of
/// `refine_points` spanning two coarse cells on each side of the argmax.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub coarse_points: usize,
    pub refine_points: usize,
    pub bracket: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            coarse_points: 200,
            refine_points: 100,
            bracket: 20.0,
        }
    }
}

/// A `P_inf`-vs-gamma curve with its peak and full-width-at-half-maximum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaScanResult {
    /// Scanned rates, ascending (coarse grid merged with the refinement).
    pub gammas: Vec<f64>,
    /// `P_inf` at each rate.
    pub p_inf: Vec<f64>,
    /// The scanned rate maximizing `P_inf`.
    pub gamma_opt: f64,
    /// `P_inf(gamma_opt)`.
    pub p_opt: f64,
    /// FWHM of the connected half-maximum region around the peak.
    pub width: f64,
    /// `width / gamma_opt`.
    pub fractional_width: f64,
}

impl GammaScanResult {
    /// CSV dump: `gamma, p_inf`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "gamma,p_inf")?;
        for (g, p) in self.gammas.iter().zip(&self.p_inf) {
            writeln!(w, "{g:.16e},{p:.16e}")?;
        }
        Ok(())
    }

    /// Summary JSON: peak location, width and grid metadata.
    pub fn summary_json(&self, grid: &GridSpec) -> serde_json::Value {
        serde_json::json!({
            "gamma_opt": self.gamma_opt,
            "p_opt": self.p_opt,
            "width": self.width,
            "fractional_width": self.fractional_width,
            "grid": {
                "coarse_points": grid.coarse_points,
                "refine_points": grid.refine_points,
                "bracket": grid.bracket,
                "points_evaluated": self.gammas.len(),
            },
        })
    }
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    (0..points)
        .map(|i| lo * (ratio * i as f64 / (points - 1) as f64).exp())
        .collect()
}

fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Half-maximum crossing positions by linear interpolation, walking outward
/// from the peak through the connected above-half region. Side lobes that
/// clear half maximum but are disconnected from the peak are excluded.
fn half_max_crossings(gammas: &[f64], p: &[f64], peak: usize) -> Result<(f64, f64)> {
    let half = p[peak] / 2.0;
    let mut left = None;
    for i in (0..peak).rev() {
        if p[i] < half {
            let t = (half - p[i]) / (p[i + 1] - p[i]);
            left = Some(gammas[i] + t * (gammas[i + 1] - gammas[i]));
            break;
        }
    }
    let mut right = None;
    for i in peak + 1..p.len() {
        if p[i] < half {
            let t = (half - p[i - 1]) / (p[i] - p[i - 1]);
            right = Some(gammas[i - 1] + t * (gammas[i] - gammas[i - 1]));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok((l, r)),
        _ => Err(Error::Numerical(
            "scan curve never crosses half maximum inside the bracket; width undefined".into(),
        )),
    }
}

/// Brute-force search for the optimal hopping rate of one instance.
///
/// The bracket is centred on the instance's own energy-balance rate
/// (its exact table spread fed through [`energy_balance_rate`]), which for
/// SK/REM ensembles tracks the heuristic rate the grid decision calls for.
pub fn scan_gamma(
    inst: &crate::problems::ProblemInstance,
    graph: Graph,
    grid: &GridSpec,
) -> Result<GammaScanResult> {
    if grid.coarse_points < 4 {
        return Err(Error::InvalidInput("coarse grid needs at least 4 points".into()));
    }
    if grid.bracket <= 1.0 {
        return Err(Error::InvalidInput("bracket factor must exceed 1".into()));
    }
    let spread = inst.full_energy_table()?.spread();
    if spread <= 0.0 {
        return Err(Error::Numerical(
            "instance has zero energy spread; scan is degenerate".into(),
        ));
    }
    let center = energy_balance_rate(graph, inst.n, spread);
    let coarse = log_grid(center / grid.bracket, center * grid.bracket, grid.coarse_points);
    let coarse_curve = p_infinity_dataset(inst, graph, &coarse)?;

    let mut best = 0usize;
    for (i, point) in coarse_curve.iter().enumerate() {
        if point.1 > coarse_curve[best].1 {
            best = i;
        }
    }
    let lo_idx = best.saturating_sub(2);
    let hi_idx = (best + 2).min(coarse.len() - 1);
    let refine = linear_grid(coarse[lo_idx], coarse[hi_idx], grid.refine_points.max(2));
    let refine_curve = p_infinity_dataset(inst, graph, &refine)?;

    let mut merged: Vec<(f64, f64)> = coarse_curve;
    merged.extend(refine_curve);
    merged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    merged.dedup_by(|a, b| a.0 == b.0);

    let gammas: Vec<f64> = merged.iter().map(|m| m.0).collect();
    let p_inf: Vec<f64> = merged.iter().map(|m| m.1).collect();
    let mut peak = 0usize;
    for (i, &p) in p_inf.iter().enumerate() {
        if p > p_inf[peak] {
            peak = i;
        }
    }
    let (left, right) = half_max_crossings(&gammas, &p_inf, peak)?;
    let gamma_opt = gammas[peak];
    let p_opt = p_inf[peak];
    let width = right - left;
    Ok(GammaScanResult {
        gammas,
        p_inf,
        gamma_opt,
        p_opt,
        width,
        fractional_width: width / gamma_opt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{generate, Model};
    use crate::rng::Stream;

    #[test]
    fn search_hypercube_rate_closed_form_values() {
        assert!((search_gamma_opt_hypercube(1) - 0.25).abs() < 1e-15);
        assert!((search_gamma_opt_hypercube(2) - 0.3125).abs() < 1e-15);
        // Large-n behaviour: 2 gamma -> 2/n within 10% by n=30.
        let g = search_gamma_opt_hypercube(30);
        assert!((2.0 * g * 30.0 / 2.0 - 1.0).abs() <= 0.10, "2 gamma n/2 = {}", 2.0 * g * 15.0);
    }

    #[test]
    fn search_complete_rate() {
        assert_eq!(search_gamma_opt_complete(1), 0.5);
        assert_eq!(search_gamma_opt_complete(10), 1.0 / 1024.0);
    }

    #[test]
    fn heuristic_identity_and_analytic_value() {
        // Synthetic spread 2 n omega gives gamma = omega exactly.
        let omega = 3.7;
        let n = 9u32;
        assert!(
            (energy_balance_rate(Graph::Hypercube, n, 2.0 * n as f64 * omega) - omega).abs()
                < 1e-15
        );

        // REM n=10 analytic: -2^{3/2} omega erfinv(1/1024 - 1) / 20.
        let omega = 1.0;
        let g = heuristic_gamma(Model::Rem, 10, omega, SpreadSource::Analytic).unwrap();
        let expect = -(2.0f64.powf(1.5)) * omega * crate::rng::erf_inv(1.0 / 1024.0 - 1.0) / 20.0;
        assert!((g - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn rem_analytic_spread_close_to_monte_carlo() {
        // Mean max-min of 1024 standard normals over 10^4 trials.
        let trials = 10_000usize;
        let mut stream = Stream::new(8899);
        let mut mean = 0.0;
        for _ in 0..trials {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for _ in 0..1024 {
                let z = stream.next_normal();
                lo = lo.min(z);
                hi = hi.max(z);
            }
            mean += hi - lo;
        }
        mean /= trials as f64;
        let (_, estimate) = spectrum_stats(Model::Rem, 10, 1.0).unwrap();
        assert!(
            (estimate - mean).abs() <= 0.05 * mean,
            "estimate {estimate} vs MC {mean}"
        );
    }

    #[test]
    fn search_spread_is_unit() {
        for seed in 0..5 {
            let inst = generate(Model::Search, 6, seed, 1.0).unwrap();
            assert_eq!(inst.full_energy_table().unwrap().spread(), 1.0);
        }
        let spread = measure_energy_spread(Model::Search, 6, 1.0, 10, 7).unwrap();
        assert_eq!(spread, 1.0);
    }

    #[test]
    fn measured_heuristic_is_deterministic() {
        let a = heuristic_gamma(
            Model::Sk,
            6,
            5.0,
            SpreadSource::Measured {
                master_seed: 42,
                count: 50,
            },
        )
        .unwrap();
        let b = heuristic_gamma(
            Model::Sk,
            6,
            5.0,
            SpreadSource::Measured {
                master_seed: 42,
                count: 50,
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scan_finds_search_optimum_on_hypercube() {
        // The symmetric-subspace path makes this scan cheap even at n=10.
        let n = 10u32;
        let inst = generate(Model::Search, n, 3, 1.0).unwrap();
        let scan = scan_gamma(&inst, Graph::Hypercube, &GridSpec::default()).unwrap();
        let formula = search_gamma_opt_hypercube(n);
        assert!(
            (scan.gamma_opt - formula).abs() <= 0.05 * formula,
            "scan {} vs formula {formula}",
            scan.gamma_opt
        );
        assert!(scan.width > 0.0);
        assert!(scan.gammas.windows(2).all(|w| w[0] < w[1]));
        // The reported optimum is one of the scanned points.
        assert!(scan.gammas.contains(&scan.gamma_opt));
    }

    #[test]
    fn scan_scale_covariance() {
        // REM energies scale linearly in omega, so the optimum scales and
        // the probability curve is unchanged.
        let a = generate(Model::Rem, 5, 21, 1.0).unwrap();
        let b = generate(Model::Rem, 5, 21, 2.0).unwrap();
        let grid = GridSpec {
            coarse_points: 60,
            refine_points: 20,
            bracket: 10.0,
        };
        let sa = scan_gamma(&a, Graph::Hypercube, &grid).unwrap();
        let sb = scan_gamma(&b, Graph::Hypercube, &grid).unwrap();
        assert!((sb.gamma_opt / sa.gamma_opt - 2.0).abs() < 1e-9);
        assert!((sb.fractional_width - sa.fractional_width).abs() < 1e-6);
        for (pa, pb) in sa.p_inf.iter().zip(&sb.p_inf) {
            assert!((pa - pb).abs() < 1e-9);
        }
    }

    #[test]
    fn sk_peaks_are_broad_rem_peaks_are_narrow() {
        // Desk-size spot check of the qualitative width contrast.
        let sk = generate(Model::Sk, 8, 5, 5.0).unwrap();
        let rem = generate(Model::Rem, 8, 5, 1.0).unwrap();
        let grid = GridSpec {
            coarse_points: 120,
            refine_points: 40,
            bracket: 20.0,
        };
        let s = scan_gamma(&sk, Graph::Hypercube, &grid).unwrap();
        let r = scan_gamma(&rem, Graph::Hypercube, &grid).unwrap();
        assert!(
            s.fractional_width > 2.0 * r.fractional_width,
            "SK {} vs REM {}",
            s.fractional_width,
            r.fractional_width
        );
    }

    #[test]
    fn spread_capacity_enforced() {
        assert!(matches!(
            measure_energy_spread(Model::Rem, 21, 1.0, 1, 0),
            Err(Error::Capacity(_))
        ));
        assert!(measure_energy_spread(Model::Rem, 5, 1.0, 0, 0).is_err());
    }
}
