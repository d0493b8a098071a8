//! Schrödinger propagation, window-averaged success probabilities,
//! energy-expectation traces, and mixing-time estimation.
//!
//! The propagator applies `exp(-i dt H)` as a short-step Chebyshev
//! polynomial of the matrix-free Hamiltonian action; no matrix exponential
//! is ever materialized. The step length is tied to the spectral-range
//! bound so the fastest oscillation of any observable is resolved by the
//! sample grid (`theta_max = 0.1` rad gives ~63 samples per period), which
//! is also what the trapezoid quadrature of the window averages relies on.

use num_complex::Complex64 as C64;

use crate::drivers::Hamiltonian;
use crate::error::{Error, Result};
use crate::hilbert::{BasisIndex, StateVector};

/// Time-step policy for the polynomial propagator.
#[derive(Debug, Clone, Copy)]
pub struct PropagationConfig {
    /// Maximum phase `(half spectral range) * dt` per step, in radians.
    pub theta_max: f64,
    /// Bound on the Chebyshev truncation error per step.
    pub step_tolerance: f64,
    /// Cap on the polynomial order per step.
    pub max_order: usize,
    /// Record every `sample_stride`-th step in traces.
    pub sample_stride: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            theta_max: 0.1,
            step_tolerance: 1e-13,
            max_order: 48,
            sample_stride: 1,
        }
    }
}

impl PropagationConfig {
    fn validate(&self) -> Result<()> {
        if !(self.theta_max > 0.0 && self.theta_max <= 1.0) {
            return Err(Error::InvalidInput("theta_max must lie in (0, 1]".into()));
        }
        if self.step_tolerance <= 0.0 {
            return Err(Error::InvalidInput("step tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Observables sampled along a propagation.
#[derive(Debug, Clone)]
pub struct Trace {
    pub times: Vec<f64>,
    /// `P(t) = |<ground|psi(t)>|^2`.
    pub success_prob: Vec<f64>,
    /// `<H_G>` at each sample.
    pub driver_expect: Vec<f64>,
    /// `<H_P>` at each sample.
    pub problem_expect: Vec<f64>,
    /// Accumulated |norm - 1| deviation produced by the propagator up to
    /// each sample (the state itself is renormalized every step).
    pub norm_drift: Vec<f64>,
}

impl Trace {
    /// CSV dump: `t, P, H_G_expect, H_P_expect, norm_drift`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,P,H_G_expect,H_P_expect,norm_drift")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i],
                self.success_prob[i],
                self.driver_expect[i],
                self.problem_expect[i],
                self.norm_drift[i]
            )?;
        }
        Ok(())
    }
}

/// Mixing-time estimation parameters.
#[derive(Debug, Clone, Copy)]
pub struct MixingConfig {
    /// Relative-fluctuation threshold.
    pub epsilon: f64,
    /// First probe time; probes double from here.
    pub t0: f64,
    /// Probe count cap: probes are `t0 * 2^k` for `k <= doubling_cap`.
    pub doubling_cap: u32,
}

impl MixingConfig {
    /// Defaults for a problem with energy unit `omega`: `epsilon = 0.05`,
    /// `t0 = 1/omega`, cap 24.
    pub fn for_omega(omega: f64) -> Self {
        MixingConfig {
            epsilon: 0.05,
            t0: 1.0 / omega,
            doubling_cap: 24,
        }
    }
}

/// Result of the successively-doubling mixing-time probe.
#[derive(Debug, Clone, Copy)]
pub struct MixingEstimate {
    /// Largest probe time that still violated the fluctuation condition
    /// (`t0` when no probe violated it).
    pub tau: f64,
    /// The probe interval bracketing the underlying continuous threshold.
    pub bracket: (f64, f64),
}

/// Squared amplitude magnitude at the problem ground state.
pub fn success_probability(psi: &StateVector, ground: BasisIndex) -> Result<f64> {
    psi.amplitudes()
        .get(ground.0)
        .map(|a| a.norm_sqr())
        .ok_or_else(|| Error::InvalidInput(format!("ground index {} out of range", ground.0)))
}

/// Bessel function of the first kind by its ascending series; adequate for
/// the small orders and small arguments the stepper uses.
fn bessel_j(k: usize, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    for i in 1..=k {
        term *= half / i as f64;
    }
    let mut sum = term;
    let x2 = half * half;
    for m in 1..60 {
        term *= -x2 / (m as f64 * (m + k) as f64);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

struct Stepper<'a, H: Hamiltonian + ?Sized> {
    h: &'a H,
    center: f64,
    half_range: f64,
    dt: f64,
    /// Chebyshev coefficients `J_k(theta)`, `k = 0..=order`.
    coeffs: Vec<f64>,
    phase: C64,
    phi_prev: Vec<C64>,
    phi_cur: Vec<C64>,
    phi_next: Vec<C64>,
    acc: Vec<C64>,
    /// Accumulated |norm - 1| over all steps taken.
    drift: f64,
}

impl<'a, H: Hamiltonian + ?Sized> Stepper<'a, H> {
    fn new(h: &'a H, dt: f64, config: &PropagationConfig) -> Result<Self> {
        let (lo, hi) = h.energy_bounds();
        let center = 0.5 * (lo + hi);
        let half_range = (0.5 * (hi - lo)).max(1e-300);
        let theta = half_range * dt;
        // Truncation order from the tail bound |J_k| <= (theta/2)^k / k!.
        let mut order = 0;
        let mut tail_term = 1.0; // (theta/2)^k / k! at k = 0
        let mut ok = false;
        for k in 0..=config.max_order {
            // Tail starting after k: bounded by twice the next term times a
            // geometric factor; theta <= 1 makes the next-term bound sharp.
            let next = tail_term * (theta / 2.0) / (k as f64 + 1.0);
            if 4.0 * next <= config.step_tolerance {
                order = k;
                ok = true;
                break;
            }
            tail_term = next;
        }
        if !ok {
            return Err(Error::Numerical(format!(
                "Chebyshev order cap {} too small for theta={theta}",
                config.max_order
            )));
        }
        let coeffs: Vec<f64> = (0..=order).map(|k| bessel_j(k, theta)).collect();
        let dim = h.dim();
        Ok(Stepper {
            h,
            center,
            half_range,
            dt,
            coeffs,
            phase: (-C64::i() * center * dt).exp(),
            phi_prev: vec![C64::new(0.0, 0.0); dim],
            phi_cur: vec![C64::new(0.0, 0.0); dim],
            phi_next: vec![C64::new(0.0, 0.0); dim],
            acc: vec![C64::new(0.0, 0.0); dim],
            drift: 0.0,
        })
    }

    /// One step: `psi <- exp(-i dt H) psi`, renormalized.
    fn step(&mut self, psi: &mut [C64]) {
        let dim = psi.len();
        // phi_0 = psi, phi_1 = Ht psi with Ht = (H - c)/rho.
        self.phi_prev.copy_from_slice(psi);
        self.h.apply_into(psi, &mut self.phi_cur);
        let inv_rho = 1.0 / self.half_range;
        for i in 0..dim {
            self.phi_cur[i] = (self.phi_cur[i] - self.center * psi[i]) * inv_rho;
        }
        // acc = J_0 phi_0 + 2 sum_k (-i)^k J_k phi_k.
        let mut ik = C64::new(1.0, 0.0);
        for i in 0..dim {
            self.acc[i] = self.coeffs[0] * self.phi_prev[i];
        }
        for k in 1..self.coeffs.len() {
            ik *= -C64::i();
            let c = 2.0 * self.coeffs[k] * ik;
            for i in 0..dim {
                self.acc[i] += c * self.phi_cur[i];
            }
            if k + 1 < self.coeffs.len() {
                self.h.apply_into(&self.phi_cur, &mut self.phi_next);
                for i in 0..dim {
                    self.phi_next[i] = 2.0 * (self.phi_next[i] - self.center * self.phi_cur[i])
                        * inv_rho
                        - self.phi_prev[i];
                }
                std::mem::swap(&mut self.phi_prev, &mut self.phi_cur);
                std::mem::swap(&mut self.phi_cur, &mut self.phi_next);
            }
        }
        let mut norm_sq = 0.0;
        for i in 0..dim {
            let v = self.phase * self.acc[i];
            norm_sq += v.norm_sqr();
            psi[i] = v;
        }
        let norm = norm_sq.sqrt();
        self.drift += (norm - 1.0).abs();
        let inv = 1.0 / norm;
        for a in psi.iter_mut() {
            *a *= inv;
        }
    }
}

fn step_count<H: Hamiltonian + ?Sized>(h: &H, t: f64, config: &PropagationConfig) -> usize {
    let (lo, hi) = h.energy_bounds();
    let half_range = (0.5 * (hi - lo)).max(1e-300);
    ((half_range * t / config.theta_max).ceil() as usize).max(1)
}

fn check_start<H: Hamiltonian + ?Sized>(h: &H, psi0: &StateVector) -> Result<()> {
    if psi0.dim() != h.dim() {
        return Err(Error::InvalidInput("state dimension mismatch".into()));
    }
    if (psi0.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput("initial state is not normalized".into()));
    }
    Ok(())
}

/// Propagate `psi0` under `H` for time `t_f`.
pub fn evolve<H: Hamiltonian + ?Sized>(
    h: &H,
    psi0: &StateVector,
    t_f: f64,
    config: &PropagationConfig,
) -> Result<StateVector> {
    config.validate()?;
    check_start(h, psi0)?;
    if t_f < 0.0 {
        return Err(Error::InvalidInput("negative evolution time".into()));
    }
    let mut amps = psi0.amplitudes().to_vec();
    if t_f > 0.0 {
        let steps = step_count(h, t_f, config);
        let dt = t_f / steps as f64;
        let mut stepper = Stepper::new(h, dt, config)?;
        for _ in 0..steps {
            stepper.step(&mut amps);
        }
    }
    StateVector::new(amps, psi0.qubits(), psi0.is_subspace())
}

/// Success probability averaged over a uniformly random measurement time in
/// `[t, t + delta_t]`; `delta_t = 0` gives the instantaneous `P(t)`.
pub fn window_average<H: Hamiltonian + ?Sized>(
    h: &H,
    psi0: &StateVector,
    t: f64,
    delta_t: f64,
    config: &PropagationConfig,
) -> Result<f64> {
    config.validate()?;
    check_start(h, psi0)?;
    if t < 0.0 || delta_t < 0.0 {
        return Err(Error::InvalidInput("window times must be non-negative".into()));
    }
    let ground = h.ground_position();
    let mut amps = psi0.amplitudes().to_vec();
    if t > 0.0 {
        let steps = step_count(h, t, config);
        let dt = t / steps as f64;
        let mut stepper = Stepper::new(h, dt, config)?;
        for _ in 0..steps {
            stepper.step(&mut amps);
        }
    }
    if delta_t == 0.0 {
        return Ok(amps[ground].norm_sqr());
    }
    let steps = step_count(h, delta_t, config);
    let dt = delta_t / steps as f64;
    let mut stepper = Stepper::new(h, dt, config)?;
    // Composite trapezoid over the step grid.
    let mut integral = 0.5 * amps[ground].norm_sqr();
    for k in 1..=steps {
        stepper.step(&mut amps);
        let p = amps[ground].norm_sqr();
        integral += if k == steps { 0.5 * p } else { p };
    }
    Ok(integral * dt / delta_t)
}

/// Propagate while recording `P(t)`, `<H_G>`, `<H_P>` and the accumulated
/// norm deviation.
pub fn energy_trace<H: Hamiltonian + ?Sized>(
    h: &H,
    psi0: &StateVector,
    t_f: f64,
    config: &PropagationConfig,
) -> Result<Trace> {
    config.validate()?;
    check_start(h, psi0)?;
    if t_f <= 0.0 {
        return Err(Error::InvalidInput("trace needs t_f > 0".into()));
    }
    let ground = h.ground_position();
    let dim = h.dim();
    let steps = step_count(h, t_f, config);
    let dt = t_f / steps as f64;
    let mut stepper = Stepper::new(h, dt, config)?;
    let mut amps = psi0.amplitudes().to_vec();
    let stride = config.sample_stride.max(1);

    let mut trace = Trace {
        times: Vec::new(),
        success_prob: Vec::new(),
        driver_expect: Vec::new(),
        problem_expect: Vec::new(),
        norm_drift: Vec::new(),
    };
    let mut scratch = vec![C64::new(0.0, 0.0); dim];
    let mut record = |time: f64, amps: &[C64], drift: f64, scratch: &mut Vec<C64>| {
        trace.times.push(time);
        trace.success_prob.push(amps[ground].norm_sqr());
        h.apply_driver_into(amps, scratch);
        let driver: f64 = amps
            .iter()
            .zip(scratch.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        trace.driver_expect.push(driver);
        let problem: f64 = amps
            .iter()
            .zip(h.problem_diagonal())
            .map(|(a, d)| a.norm_sqr() * d)
            .sum();
        trace.problem_expect.push(problem);
        trace.norm_drift.push(drift);
    };

    record(0.0, &amps, 0.0, &mut scratch);
    for k in 1..=steps {
        stepper.step(&mut amps);
        if k % stride == 0 || k == steps {
            record(k as f64 * dt, &amps, stepper.drift, &mut scratch);
        }
    }
    Ok(trace)
}

/// Mixing-time estimate by successive doubling.
///
/// Probes `t_k = t0 * 2^k` violate the condition while
/// `|Pbar(0, t_k) - Pbar(0, 2 t_k)| / Pbar(0, t_k) > epsilon`; probing stops
/// at the first satisfied probe and the last violating probe is returned
/// (`t0` when the first probe already satisfies it). The cumulative average
/// is a running trapezoid on the propagation grid, with probe times aligned
/// to grid points.
pub fn mixing_time<H: Hamiltonian + ?Sized>(
    h: &H,
    psi0: &StateVector,
    mixing: &MixingConfig,
    config: &PropagationConfig,
) -> Result<MixingEstimate> {
    config.validate()?;
    check_start(h, psi0)?;
    if !(mixing.epsilon > 0.0 && mixing.epsilon < 1.0) {
        return Err(Error::InvalidInput("epsilon must lie in (0, 1)".into()));
    }
    if mixing.t0 <= 0.0 {
        return Err(Error::InvalidInput("t0 must be positive".into()));
    }
    let ground = h.ground_position();
    // Align the grid so every probe lands exactly on a step boundary.
    let per_t0 = step_count(h, mixing.t0, config);
    let dt = mixing.t0 / per_t0 as f64;
    let mut stepper = Stepper::new(h, dt, config)?;
    let mut amps = psi0.amplitudes().to_vec();

    let mut integral = 0.0;
    let mut prev_p = amps[ground].norm_sqr();
    let mut steps_done: u64 = 0;
    let mut pbar_at = Vec::new(); // Pbar(0, t0 * 2^k) for k = 0, 1, ...

    let mut advance_to = |target_steps: u64,
                          stepper: &mut Stepper<'_, H>,
                          amps: &mut Vec<C64>,
                          integral: &mut f64,
                          prev_p: &mut f64,
                          steps_done: &mut u64| {
        while *steps_done < target_steps {
            stepper.step(amps);
            let p = amps[ground].norm_sqr();
            *integral += 0.5 * (*prev_p + p) * dt;
            *prev_p = p;
            *steps_done += 1;
        }
    };

    let mut last_violating: Option<u32> = None;
    for k in 0..=mixing.doubling_cap {
        // Ensure Pbar(0, t_k) and Pbar(0, t_{k+1}) are available.
        while pbar_at.len() <= k as usize + 1 {
            let idx = pbar_at.len() as u32;
            let target = per_t0 as u64 * (1u64 << idx);
            advance_to(
                target,
                &mut stepper,
                &mut amps,
                &mut integral,
                &mut prev_p,
                &mut steps_done,
            );
            let t = mixing.t0 * (1u64 << idx) as f64;
            pbar_at.push(integral / t);
        }
        let a: f64 = pbar_at[k as usize];
        let b: f64 = pbar_at[k as usize + 1];
        let violates = ((a - b) / a).abs() > mixing.epsilon;
        if violates {
            last_violating = Some(k);
        } else {
            let tau = match last_violating {
                Some(kv) => mixing.t0 * (1u64 << kv) as f64,
                None => mixing.t0,
            };
            let t_k = mixing.t0 * (1u64 << k) as f64;
            return Ok(MixingEstimate {
                tau,
                bracket: (tau, t_k),
            });
        }
    }
    Err(Error::Numerical(format!(
        "mixing condition still violated at probe cap 2^{} t0",
        mixing.doubling_cap
    )))
}
