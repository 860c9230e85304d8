//! Time-dependent Schrodinger evolution under `H(z) = z H_f - |phi><phi|`.
//!
//! The initial state `|phi>` lives in the symmetric subspace spanned by
//! the normalized shell states `|E_i>`, and `H(z)` never leaves it, so the
//! dynamics reduces to `m'` amplitudes regardless of `n`. [`evolve`]
//! integrates there; [`evolve_full`] integrates the same anneal over all
//! `2^n` basis states without assuming the shell structure, which makes it
//! an independent cross-check of the reduction.
//!
//! Both use an exponential midpoint rule: each step applies the exact
//! propagator of `H(z(t + h/2))` frozen over `[t, t + h]`, so unitarity is
//! exact up to roundoff and the only error is time discretization,
//! controlled by step doubling. The reduced integrator exponentiates by
//! dense eigendecomposition; the full one by a Lanczos subspace per step.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::instances::{DensityOfStates, Shells};
use crate::schedule::ScheduleTable;
use crate::spectrum::{reduced_matrix_from_shells, sorted_symmetric_eigen};

/// Allowed deviation of the state norm from 1 over a whole run.
pub const NORM_DRIFT_TOL: f64 = 1e-8;

/// State in the shell basis: `amplitudes[i]` multiplies the normalized
/// uniform superposition over shell `i`, whose energy is `energies[i]`.
#[derive(Debug, Clone)]
pub struct ReducedState {
    pub amplitudes: Vec<Complex64>,
    pub energies: Vec<f64>,
}

impl ReducedState {
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `|phi>` expressed in the shell basis: amplitude `sqrt(n_E)` on each
/// shell. Requires at least one solution state.
pub fn init_state(dos: &DensityOfStates) -> Result<ReducedState> {
    let shells = dos.shells();
    if shells.raw_energies[0] != 0 {
        return Err(Error::NoSolutions);
    }
    Ok(ReducedState {
        amplitudes: shells.fracs.iter().map(|&f| Complex64::new(f.sqrt(), 0.0)).collect(),
        energies: shells.energies.clone(),
    })
}

/// Weight on the solution shell, `|c_0|^2`.
pub fn success_prob(state: &ReducedState) -> f64 {
    if state.energies.first() == Some(&0.0) {
        state.amplitudes[0].norm_sqr()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Local (per-step) error tolerance in L2 norm.
    pub tol: f64,
    /// Cap on accepted steps.
    pub max_steps: usize,
    /// Trajectory sampling intervals; a run records `log_points + 1`
    /// rows including both endpoints. 0 disables logging.
    pub log_points: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_steps: 2_000_000, log_points: 0 }
    }
}

/// One recorded point along a run.
#[derive(Debug, Clone, Copy)]
pub struct LogRow {
    pub t: f64,
    pub z: f64,
    pub p: f64,
    pub norm_error: f64,
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub state: ReducedState,
    pub steps: usize,
    pub max_norm_error: f64,
    pub log: Vec<LogRow>,
}

/// Exact step for a Hamiltonian frozen at one `z`.
trait MidpointPropagator {
    fn apply_exp(&mut self, z: f64, h: f64, psi: &mut [Complex64]) -> Result<()>;
}

struct ReducedPropagator<'a> {
    shells: &'a Shells,
}

impl MidpointPropagator for ReducedPropagator<'_> {
    fn apply_exp(&mut self, z: f64, h: f64, psi: &mut [Complex64]) -> Result<()> {
        let m = reduced_matrix_from_shells(self.shells, z);
        let (vals, vecs) = sorted_symmetric_eigen(&m);
        let dim = psi.len();
        let mut y = vec![Complex64::ZERO; dim];
        for (j, yj) in y.iter_mut().enumerate() {
            let mut acc = Complex64::ZERO;
            for i in 0..dim {
                acc += vecs[(i, j)] * psi[i];
            }
            *yj = acc * Complex64::from_polar(1.0, -h * vals[j]);
        }
        for (i, p) in psi.iter_mut().enumerate() {
            let mut acc = Complex64::ZERO;
            for (j, yj) in y.iter().enumerate() {
                acc += vecs[(i, j)] * yj;
            }
            *p = acc;
        }
        Ok(())
    }
}

/// Shared adaptive midpoint driver: step doubling with third-order step
/// control, keeping the two-half-step result.
fn adaptive_evolve<P: MidpointPropagator>(
    prop: &mut P,
    table: &ScheduleTable,
    t_total: f64,
    psi0: Vec<Complex64>,
    energies: Vec<f64>,
    opts: &EvolveOptions,
) -> Result<EvolveOutcome> {
    if !(t_total >= 0.0) || !t_total.is_finite() {
        return Err(Error::OutOfRange(format!("t_total = {t_total} must be finite and >= 0")));
    }
    let mut state = ReducedState { amplitudes: psi0, energies };
    let mut log = Vec::new();
    let mut max_norm_error = 0.0f64;
    let record = |log: &mut Vec<LogRow>, t: f64, s: &ReducedState, ne: f64| {
        log.push(LogRow {
            t,
            z: table.z_at(if t_total > 0.0 { t / t_total } else { 0.0 }),
            p: success_prob(s),
            norm_error: ne,
        });
    };
    if opts.log_points > 0 {
        record(&mut log, 0.0, &state, 0.0);
    }
    if t_total == 0.0 {
        return Ok(EvolveOutcome { state, steps: 0, max_norm_error, log });
    }

    let mut t = 0.0f64;
    let mut h = (t_total / 64.0).min(0.25);
    let h_min = t_total * 1e-13;
    let mut steps = 0usize;
    let mut next_log = 1usize;
    while t < t_total {
        h = h.min(t_total - t);
        let z_of = |tt: f64| table.z_at(tt / t_total);
        let mut full = state.amplitudes.clone();
        prop.apply_exp(z_of(t + 0.5 * h), h, &mut full)?;
        let mut half = state.amplitudes.clone();
        prop.apply_exp(z_of(t + 0.25 * h), 0.5 * h, &mut half)?;
        prop.apply_exp(z_of(t + 0.75 * h), 0.5 * h, &mut half)?;
        let err: f64 = full
            .iter()
            .zip(&half)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let factor = if err > 0.0 {
            (0.9 * (opts.tol / err).powf(1.0 / 3.0)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        if err <= opts.tol {
            state.amplitudes = half;
            t += h;
            steps += 1;
            let ne = (state.norm() - 1.0).abs();
            max_norm_error = max_norm_error.max(ne);
            if steps > opts.max_steps {
                return Err(Error::StepLimit { steps: opts.max_steps });
            }
            if opts.log_points > 0 {
                while next_log <= opts.log_points
                    && t >= t_total * next_log as f64 / opts.log_points as f64 - 1e-12 * t_total
                {
                    record(&mut log, t, &state, ne);
                    next_log += 1;
                }
            }
        }
        h *= factor;
        if h < h_min {
            return Err(Error::StepUnderflow { t, h });
        }
    }
    if max_norm_error > NORM_DRIFT_TOL {
        return Err(Error::NormDrift { drift: max_norm_error, tol: NORM_DRIFT_TOL });
    }
    Ok(EvolveOutcome { state, steps, max_norm_error, log })
}

/// Integrates the anneal in the shell basis from `|phi>` at `t = 0` to
/// `t = t_total` with `z = z(t / t_total)` from the table.
pub fn evolve_with(
    dos: &DensityOfStates,
    table: &ScheduleTable,
    t_total: f64,
    opts: &EvolveOptions,
) -> Result<EvolveOutcome> {
    let init = init_state(dos)?;
    let shells = dos.shells();
    let mut prop = ReducedPropagator { shells: &shells };
    adaptive_evolve(&mut prop, table, t_total, init.amplitudes, init.energies, opts)
}

pub fn evolve(
    dos: &DensityOfStates,
    table: &ScheduleTable,
    t_total: f64,
) -> Result<ReducedState> {
    Ok(evolve_with(dos, table, t_total, &EvolveOptions::default())?.state)
}

// ---------------------------------------------------------------------------
// Full-space oracle
// ---------------------------------------------------------------------------

struct FullPropagator<'a> {
    energies: &'a [f64],
    /// Krylov dimension cap; per-step error is pushed below `inner_tol`
    /// by halving the substep when the subspace saturates.
    inner_tol: f64,
}

impl FullPropagator<'_> {
    /// `y = (z D - |phi><phi|) v` with `phi` uniform.
    fn apply_h(&self, z: f64, v: &[Complex64], y: &mut [Complex64]) {
        let dim = v.len() as f64;
        let sum: Complex64 = v.iter().sum();
        let proj = sum / dim;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = v[i] * (z * self.energies[i]) - proj;
        }
    }

    /// One Lanczos exponential `psi <- exp(-i h H(z)) psi`, recursing on
    /// halved steps if the subspace cannot certify the tolerance.
    fn krylov_step(&self, z: f64, h: f64, psi: &mut [Complex64], depth: u32) -> Result<()> {
        const K_MAX: usize = 40;
        let dim = psi.len();
        let norm0 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            return Ok(());
        }
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(K_MAX);
        basis.push(psi.iter().map(|a| a / norm0).collect());
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![Complex64::ZERO; dim];
        let mut converged_k = None;
        for k in 0..K_MAX {
            self.apply_h(z, &basis[k], &mut w);
            let a_k: f64 = basis[k]
                .iter()
                .zip(w.iter())
                .map(|(v, wi)| (v.conj() * wi).re)
                .sum();
            alpha.push(a_k);
            for (wi, vi) in w.iter_mut().zip(&basis[k]) {
                *wi -= vi * a_k;
            }
            if k > 0 {
                let b_prev = beta[k - 1];
                for (wi, vi) in w.iter_mut().zip(&basis[k - 1]) {
                    *wi -= vi * b_prev;
                }
            }
            // One reorthogonalization pass keeps the recurrence honest.
            for v in &basis {
                let c: Complex64 = v.iter().zip(w.iter()).map(|(vi, wi)| vi.conj() * wi).sum();
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= vi * c;
                }
            }
            let b_k = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            // Residual estimate: weight the recurrence tail by the
            // propagated coefficient on the last basis vector.
            let m = k + 1;
            let tri = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j || j + 1 == i {
                    beta[i.min(j)]
                } else {
                    0.0
                }
            });
            let (vals, vecs) = sorted_symmetric_eigen(&tri);
            let mut tail = Complex64::ZERO;
            let mut first = vec![Complex64::ZERO; m];
            for j in 0..m {
                let phase = Complex64::from_polar(1.0, -h * vals[j]);
                let coeff = phase * vecs[(0, j)];
                for (i, f) in first.iter_mut().enumerate() {
                    *f += coeff * vecs[(i, j)];
                }
                tail += coeff * vecs[(m - 1, j)];
            }
            let est = (b_k * h).abs() * tail.norm();
            if b_k < 1e-13 || est < self.inner_tol {
                // Assemble psi = norm0 * sum_i first[i] basis[i].
                for p in psi.iter_mut() {
                    *p = Complex64::ZERO;
                }
                for (i, v) in basis.iter().enumerate() {
                    let c = first[i] * norm0;
                    for (p, vi) in psi.iter_mut().zip(v) {
                        *p += vi * c;
                    }
                }
                converged_k = Some(m);
                break;
            }
            beta.push(b_k);
            basis.push(w.iter().map(|a| a / b_k).collect());
        }
        if converged_k.is_none() {
            if depth >= 24 {
                return Err(Error::Quadrature(
                    "Krylov exponential failed to converge after repeated halving".into(),
                ));
            }
            self.krylov_step(z, 0.5 * h, psi, depth + 1)?;
            self.krylov_step(z, 0.5 * h, psi, depth + 1)?;
        }
        Ok(())
    }
}

impl MidpointPropagator for FullPropagator<'_> {
    fn apply_exp(&mut self, z: f64, h: f64, psi: &mut [Complex64]) -> Result<()> {
        self.krylov_step(z, h, psi, 0)
    }
}

/// Full-space anneal over all basis states of an enumerated energy table,
/// starting from the uniform superposition. Independent of the shell
/// reduction; intended as an oracle for small `n`.
pub fn evolve_full(
    energies: &[f64],
    table: &ScheduleTable,
    t_total: f64,
    opts: &EvolveOptions,
) -> Result<Vec<Complex64>> {
    let dim = energies.len();
    if dim == 0 {
        return Err(Error::Dimension("empty energy table".into()));
    }
    let amp = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
    let psi0 = vec![amp; dim];
    let mut prop = FullPropagator { energies, inner_tol: (opts.tol * 1e-2).max(1e-14) };
    let out = adaptive_evolve(&mut prop, table, t_total, psi0, vec![f64::NAN], opts)?;
    Ok(out.state.amplitudes)
}

/// Ground-shell weight of a full-space state.
pub fn success_prob_full(psi: &[Complex64], energies: &[f64]) -> f64 {
    psi.iter()
        .zip(energies)
        .filter(|(_, &e)| e == 0.0)
        .map(|(a, _)| a.norm_sqr())
        .sum()
}

// ---------------------------------------------------------------------------
// Minimal run time for a target success probability
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct TStar {
    pub t_star: f64,
    pub p_at_t: f64,
    pub evaluations: usize,
}

/// Smallest `T` (to 5 percent) with `p(T) >= target_p`, by doubling from
/// `T = 1` and bisecting. A target at or below the initial weight `n_0`
/// returns zero time.
pub fn find_t_star(
    dos: &DensityOfStates,
    table: &ScheduleTable,
    target_p: f64,
    t_cap: f64,
) -> Result<TStar> {
    if !(target_p > 0.0 && target_p < 1.0) {
        return Err(Error::OutOfRange(format!("target_p = {target_p} must be in (0, 1)")));
    }
    let p0 = success_prob(&init_state(dos)?);
    if target_p <= p0 {
        return Ok(TStar { t_star: 0.0, p_at_t: p0, evaluations: 0 });
    }
    let opts = EvolveOptions::default();
    let mut evals = 0usize;
    let mut p_of = |t: f64| -> Result<f64> {
        evals += 1;
        Ok(success_prob(&evolve_with(dos, table, t, &opts)?.state))
    };
    let mut hi = 1.0f64;
    let mut p_hi = p_of(hi)?;
    let mut lo = 0.0f64;
    while p_hi < target_p {
        lo = hi;
        hi *= 2.0;
        if hi > t_cap {
            return Err(Error::TimeCap { cap: t_cap });
        }
        p_hi = p_of(hi)?;
    }
    while hi - lo > 0.05 * hi {
        let mid = 0.5 * (lo + hi);
        let p_mid = p_of(mid)?;
        if p_mid >= target_p {
            hi = mid;
            p_hi = p_mid;
        } else {
            lo = mid;
        }
    }
    Ok(TStar { t_star: hi, p_at_t: p_hi, evaluations: evals })
}
