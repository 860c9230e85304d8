//! Minimal spectral gaps of the transverse-field interpolation
//! `H(A) = (1 - A) H_0 + A H_f` with `H_0 = -sum_i sigma_i^x`, on the
//! full `2^n` space.
//!
//! Unlike the projector model there is no closed form for the gap here,
//! so everything is numerical: a matrix-free operator, a restarted
//! Lanczos solver for the three lowest levels, a coarse scan over `A`
//! with golden-section refinement of every local minimum, and batch
//! statistics over filtered random instances. Scans warm-start each
//! `A`-point with the previous ground vector, which is what makes the
//! larger sizes affordable.

use std::cell::Cell;

use rayon::prelude::*;

use crate::eig::{lowest_eigs_from, EigPair, LanczosOpts};
use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::instances::{
    energy_table, filter_unique, shift_to_nonneg, GeneratorSpec, ProblemInstance,
};
use crate::rng::split_seed;
use crate::roots::golden_min;

/// Hard cap on qubit count for full-space work (a few `2^n` vectors).
pub const MAX_QUBITS: u32 = 20;
/// Levels closer to the ground energy than this count as degenerate and
/// are stepped over when defining the gap.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Required absolute accuracy `|H v - e v|` of every reported eigenpair.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// `y = A E(s) v_s - (1 - A) sum_i v_{s xor 2^i}`, the matrix-free
/// action of `H(A)` on the computational basis.
pub fn transverse_apply(a: f64, energies: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
    let dim = energies.len();
    if !dim.is_power_of_two() || dim < 2 {
        return Err(Error::Dimension(format!(
            "energy table length {dim} is not a power of two"
        )));
    }
    if v.len() != dim || out.len() != dim {
        return Err(Error::Dimension(format!(
            "vector lengths {} / {} do not match table length {dim}",
            v.len(),
            out.len()
        )));
    }
    apply_unchecked(a, energies, v, out);
    Ok(())
}

fn apply_unchecked(a: f64, energies: &[f64], v: &[f64], out: &mut [f64]) {
    let dim = energies.len();
    let n = dim.trailing_zeros() as usize;
    let b = 1.0 - a;
    for s in 0..dim {
        let mut acc = a * energies[s] * v[s];
        for i in 0..n {
            acc -= b * v[s ^ (1usize << i)];
        }
        out[s] = acc;
    }
}

fn solver_opts(dim: usize) -> LanczosOpts {
    LanczosOpts {
        basis: 56.min(dim),
        // Relative to the spectral-radius estimate; comfortably inside
        // RESIDUAL_TOL for every size this module allows.
        tol: 5e-12,
        max_restarts: 600,
        seed: 0x7ab1e5,
    }
}

/// Three lowest eigenpairs of `H(A)`, warm-started when `start` is given.
fn levels_at(a: f64, energies: &[f64], start: Option<&[f64]>) -> Result<Vec<EigPair>> {
    let dim = energies.len();
    let k = 3.min(dim);
    let pairs = lowest_eigs_from(
        dim,
        k,
        |x: &[f64], y: &mut [f64]| apply_unchecked(a, energies, x, y),
        &solver_opts(dim),
        start,
    )?;
    let worst = pairs.iter().fold(0.0f64, |w, p| w.max(p.residual));
    if worst > RESIDUAL_TOL {
        return Err(Error::EigenNonConvergence { iterations: 0, residual: worst });
    }
    Ok(pairs)
}

/// Two lowest eigenvalues of `H(A)`, residuals certified below
/// [`RESIDUAL_TOL`].
pub fn lowest_two(a: f64, energies: &[f64]) -> Result<(f64, f64)> {
    let pairs = levels_at(a, energies, None)?;
    Ok((pairs[0].value, pairs[1].value))
}

/// Gap to the first level strictly above the (possibly degenerate)
/// ground energy.
fn gap_from_levels(pairs: &[EigPair]) -> Option<f64> {
    let e0 = pairs[0].value;
    pairs.iter().skip(1).map(|p| p.value - e0).find(|&g| g > DEGENERACY_TOL)
}

#[derive(Debug, Clone, Copy)]
pub struct GapSample {
    pub a: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct TransverseScanResult {
    /// Generator seed of the instance, when known.
    pub seed: Option<u64>,
    pub a_star: f64,
    pub g_star: f64,
    /// Coarse-grid samples that evaluated successfully.
    pub curve: Vec<GapSample>,
    /// Points dropped to solver failure or unresolved degeneracy.
    pub skipped: usize,
    /// More than 5 percent of points skipped.
    pub partial: bool,
    pub max_residual: f64,
    pub evaluations: usize,
}

/// Scans `A` over an open grid of `coarse_points` interior points, then
/// refines every local minimum of the sampled gap by golden section to
/// `refine_tol` in `A`. Failed points are skipped and counted.
pub fn min_gap_scan(
    inst: &ProblemInstance,
    coarse_points: usize,
    refine_tol: f64,
) -> Result<TransverseScanResult> {
    if coarse_points < 8 {
        return Err(Error::GridTooSmall { got: coarse_points, min: 8 });
    }
    let energies = energy_table(inst, MAX_QUBITS)?;

    let mut curve = Vec::with_capacity(coarse_points);
    let mut skipped = 0usize;
    let mut evaluations = 0usize;
    let mut max_residual = 0.0f64;
    let mut ground: Option<Vec<f64>> = None;
    let mut grounds_by_index: Vec<Option<Vec<f64>>> = Vec::with_capacity(coarse_points);
    let mut last_err = None;
    for k in 1..=coarse_points {
        let a = k as f64 / (coarse_points + 1) as f64;
        evaluations += 1;
        match levels_at(a, &energies, ground.as_deref()) {
            Ok(pairs) => {
                for p in &pairs {
                    max_residual = max_residual.max(p.residual);
                }
                ground = Some(pairs[0].vector.clone());
                match gap_from_levels(&pairs) {
                    Some(g) => {
                        curve.push(GapSample { a, gap: g });
                        grounds_by_index.push(ground.clone());
                    }
                    None => skipped += 1,
                }
            }
            Err(e) => {
                skipped += 1;
                last_err = Some(e);
            }
        }
    }
    if curve.len() < 3 {
        return Err(last_err.unwrap_or(Error::EigenNonConvergence {
            iterations: 0,
            residual: f64::NAN,
        }));
    }
    let partial = skipped * 20 > coarse_points;

    // Candidates: every successful sample, plus a golden-section refined
    // point around each local minimum of the curve.
    let (mut a_star, mut g_star) = (f64::NAN, f64::INFINITY);
    for s in &curve {
        if s.gap < g_star {
            g_star = s.gap;
            a_star = s.a;
        }
    }
    let spacing = 1.0 / (coarse_points + 1) as f64;
    let extra_skips = Cell::new(0usize);
    let extra_evals = Cell::new(0usize);
    for i in 0..curve.len() {
        let here = curve[i].gap;
        let left_ok = i == 0 || curve[i - 1].gap >= here;
        let right_ok = i + 1 == curve.len() || curve[i + 1].gap >= here;
        if !(left_ok && right_ok) {
            continue;
        }
        let lo = if i > 0 { curve[i - 1].a } else { (curve[i].a - spacing).max(1e-9) };
        let hi = if i + 1 < curve.len() {
            curve[i + 1].a
        } else {
            (curve[i].a + spacing).min(1.0 - 1e-9)
        };
        let warm = grounds_by_index[i].clone();
        let f = |a: f64| -> f64 {
            extra_evals.set(extra_evals.get() + 1);
            match levels_at(a, &energies, warm.as_deref()).map(|p| gap_from_levels(&p)) {
                Ok(Some(g)) => g,
                _ => {
                    extra_skips.set(extra_skips.get() + 1);
                    f64::INFINITY
                }
            }
        };
        if let Ok((x, fx)) = golden_min(&f, lo, hi, refine_tol, 0.0, 300) {
            if fx < g_star {
                g_star = fx;
                a_star = x;
            }
        }
    }
    Ok(TransverseScanResult {
        seed: inst.seed,
        a_star,
        g_star,
        curve,
        skipped: skipped + extra_skips.get(),
        partial,
        max_residual,
        evaluations: evaluations + extra_evals.get(),
    })
}

// ---------------------------------------------------------------------------
// Batch statistics over random instances
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub enum BatchModel {
    /// Random 3-SAT at clause density `alpha` (`m = round(alpha n)`).
    Sat3 { alpha: f64 },
    /// All-triples 3-spin model with random couplings.
    ThreeSpin,
}

impl BatchModel {
    fn spec(&self, n: u32) -> GeneratorSpec {
        match *self {
            BatchModel::Sat3 { alpha } => {
                GeneratorSpec::Sat3 { n, m: (alpha * n as f64).round() as usize }
            }
            BatchModel::ThreeSpin => GeneratorSpec::ThreeSpin { n },
        }
    }
}

#[derive(Debug, Clone)]
pub struct PerSizeStats {
    pub n: u32,
    pub requested: usize,
    pub found: usize,
    pub g_median: f64,
    pub g_min: f64,
    pub results: Vec<TransverseScanResult>,
}

#[derive(Debug, Clone)]
pub struct BatchStats {
    pub per_n: Vec<PerSizeStats>,
    /// Fit of `log2(g_median)` against `log2(n)` (polynomial trend).
    pub median_fit: Option<LinearFit>,
    /// Fit of `log2(g_min)` against `n` (exponential trend, bits/qubit).
    pub min_fit: Option<LinearFit>,
}

fn median(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

/// Runs [`min_gap_scan`] over `instances_per_n` unique-ground-state
/// instances at each size, in deterministic seed order. Sizes where the
/// generator cannot supply enough unique instances are reported with
/// `found = 0` and excluded from the fits.
pub fn batch_stats(
    model: BatchModel,
    ns: &[u32],
    instances_per_n: usize,
    seed: u64,
) -> Result<BatchStats> {
    const COARSE: usize = 64;
    const REFINE_TOL: f64 = 1e-6;
    let mut per_n = Vec::with_capacity(ns.len());
    for &n in ns {
        let cap = (instances_per_n as u64).saturating_mul(5000);
        let batch = match filter_unique(model.spec(n), instances_per_n, split_seed(seed, n as u64), cap)
        {
            Ok(b) => b,
            Err(Error::AttemptCap { .. }) => {
                per_n.push(PerSizeStats {
                    n,
                    requested: instances_per_n,
                    found: 0,
                    g_median: f64::NAN,
                    g_min: f64::NAN,
                    results: Vec::new(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let results: Vec<TransverseScanResult> = batch
            .instances
            .par_iter()
            .map(|(child, inst)| {
                // 3-spin energies are signed; the scan convention puts the
                // unique ground state at zero.
                let prepared = match model {
                    BatchModel::ThreeSpin => shift_to_nonneg(inst)?.0,
                    BatchModel::Sat3 { .. } => inst.clone(),
                };
                let mut r = min_gap_scan(&prepared, COARSE, REFINE_TOL)?;
                r.seed = Some(*child);
                Ok(r)
            })
            .collect::<Result<_>>()?;
        let mut gaps: Vec<f64> = results.iter().map(|r| r.g_star).collect();
        gaps.sort_by(f64::total_cmp);
        per_n.push(PerSizeStats {
            n,
            requested: instances_per_n,
            found: results.len(),
            g_median: median(&gaps),
            g_min: gaps[0],
            results,
        });
    }

    let usable: Vec<&PerSizeStats> =
        per_n.iter().filter(|s| s.found > 0 && s.g_min > 0.0).collect();
    let (median_fit, min_fit) = if usable.len() >= 2 {
        let xs_log: Vec<f64> = usable.iter().map(|s| (s.n as f64).log2()).collect();
        let ys_med: Vec<f64> = usable.iter().map(|s| s.g_median.log2()).collect();
        let xs_n: Vec<f64> = usable.iter().map(|s| s.n as f64).collect();
        let ys_min: Vec<f64> = usable.iter().map(|s| s.g_min.log2()).collect();
        (linear_fit(&xs_log, &ys_med).ok(), linear_fit(&xs_n, &ys_min).ok())
    } else {
        (None, None)
    };
    Ok(BatchStats { per_n, median_fit, min_fit })
}
