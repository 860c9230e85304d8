//! Statistics of the random-3-SAT density of states: the binomial mean
//! profile, the exact covariance of the shell fractions, the variance of
//! the partition sums it implies, and Gaussian surrogate densities drawn
//! from that covariance for sizes far beyond enumeration.
//!
//! The covariance comes from conditioning on the Hamming distance `d`
//! between two states: a violated clause stays violated only if it avoids
//! all `d` flipped variables (probability `p1 = C(n-d,3)/C(n,3)`), and a
//! satisfied one turns violated with probability `p0 = (1 - p1)/7`. The
//! energy of the second state is then a convolution of two binomials,
//!
//! ```text
//!   p(E'|E,d) = sum_x B(x | E, p1) B(E'-x | m-E, p0) ,
//!   <n_E n_E'> = (p_E / N) (delta_EE' + sum_d C(n,d) p(E'|E,d)) .
//! ```
//!
//! Everything binomial runs in log space; `m` up to a few hundred and `n`
//! up to ~100 stay well-conditioned.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instances::{compute_dos, gen_sat3, DensityOfStates};
use crate::quad::KahanSum;
use crate::rng::{rng_from, split_seed};

/// Violation probability of one uniform random clause on a fixed state.
pub const CLAUSE_P: f64 = 0.125;

fn ln_factorials(max: usize) -> Vec<f64> {
    let mut t = vec![0.0; max + 1];
    for k in 1..=max {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

fn ln_choose(t: &[f64], n: usize, k: usize) -> f64 {
    t[n] - t[k] - t[n - k]
}

/// Binomial pmf over `0..=n`, stable in log space; degenerate `p` gives
/// the exact point mass.
fn binom_row(t: &[f64], n: usize, p: f64) -> Vec<f64> {
    let mut row = vec![0.0; n + 1];
    if p <= 0.0 {
        row[0] = 1.0;
        return row;
    }
    if p >= 1.0 {
        row[n] = 1.0;
        return row;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    for (x, r) in row.iter_mut().enumerate() {
        *r = (ln_choose(t, n, x) + x as f64 * lp + (n - x) as f64 * lq).exp();
    }
    row
}

/// Mean shell probability `p_E = C(m,E) (1/8)^E (7/8)^(m-E)`.
pub fn binom_pe(m: usize, e: usize) -> Result<f64> {
    if e > m {
        return Err(Error::OutOfRange(format!("E = {e} exceeds m = {m}")));
    }
    let t = ln_factorials(m);
    Ok(binom_row(&t, m, CLAUSE_P)[e])
}

/// Probability that two states at Hamming distance `d` agree on all three
/// variables of a uniformly drawn triple: `C(n-d,3) / C(n,3)`.
pub fn p_same_triple(n: u32, d: u32) -> Result<f64> {
    if n < 3 {
        return Err(Error::OutOfRange(format!("need n >= 3, got {n}")));
    }
    if d == 0 || d > n {
        return Err(Error::OutOfRange(format!("need 1 <= d <= n, got d = {d}")));
    }
    let r = n - d;
    if r < 3 {
        return Ok(0.0);
    }
    let (n, r) = (n as f64, r as f64);
    Ok((r * (r - 1.0) * (r - 2.0)) / (n * (n - 1.0) * (n - 2.0)))
}

/// `(p1, p0)`: a violated clause stays violated with `p1`; a satisfied
/// one becomes violated with `p0 = (1 - p1)/7`.
pub fn cond_clause_probs(n: u32, d: u32) -> Result<(f64, f64)> {
    let p1 = p_same_triple(n, d)?;
    Ok((p1, (1.0 - p1) / 7.0))
}

fn convolve_binoms(t: &[f64], e: usize, m: usize, p1: f64, p0: f64) -> Vec<f64> {
    let a = binom_row(t, e, p1);
    let b = binom_row(t, m - e, p0);
    let mut out = vec![0.0; m + 1];
    for (x, &ax) in a.iter().enumerate() {
        if ax == 0.0 {
            continue;
        }
        for (y, &by) in b.iter().enumerate() {
            out[x + y] += ax * by;
        }
    }
    out
}

/// `p(E'|E,d)`: energy distribution of a state at distance `d` from one
/// with energy `E`, for `m` clauses over `n` variables.
pub fn cond_energy_dist(e_prime: usize, e: usize, d: u32, m: usize, n: u32) -> Result<f64> {
    if e > m || e_prime > m {
        return Err(Error::OutOfRange(format!(
            "energies ({e}, {e_prime}) must lie in 0..={m}"
        )));
    }
    let (p1, p0) = cond_clause_probs(n, d)?;
    let t = ln_factorials(m);
    Ok(convolve_binoms(&t, e, m, p1, p0)[e_prime])
}

/// Mean and covariance of the random-3-SAT shell fractions.
#[derive(Debug, Clone)]
pub struct DosStatistics {
    pub n: u32,
    pub m: usize,
    /// `p_E` for `E = 0..=m`.
    pub p_e: Vec<f64>,
    /// Second moments `<n_E n_E'>` for `E, E' = 0..=m`.
    pub second: DMatrix<f64>,
    /// Covariance over the excited sector `E, E' = 1..=m`.
    pub sigma: DMatrix<f64>,
}

/// Exact second moments and covariance of `n_E` by summing the
/// conditional energy distributions over Hamming distance.
pub fn dos_covariance(n: u32, m: usize) -> Result<DosStatistics> {
    if !(3..=120).contains(&n) {
        return Err(Error::OutOfRange(format!("n = {n} outside supported range 3..=120")));
    }
    if m == 0 {
        return Err(Error::OutOfRange("m must be positive".into()));
    }
    let nn = n as usize;
    let t = ln_factorials(m.max(nn));
    let p_e = binom_row(&t, m, CLAUSE_P);
    let ln2 = std::f64::consts::LN_2;

    // a[(e, e')] = 1/N delta + sum_d C(n,d)/2^n p(E'|E,d); rows sum to 1.
    let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
    // All d with p1 = 0 share one distribution; fold their weights.
    let mut tail_w = 0.0f64;
    for d in 1..=n {
        let w = (ln_choose(&t, nn, d as usize) - nn as f64 * ln2).exp();
        if p_same_triple(n, d)? == 0.0 {
            tail_w += w;
            continue;
        }
        let (p1, p0) = cond_clause_probs(n, d)?;
        for e in 0..=m {
            let row = convolve_binoms(&t, e, m, p1, p0);
            for (ep, &v) in row.iter().enumerate() {
                a[(e, ep)] += w * v;
            }
        }
    }
    if tail_w > 0.0 {
        let p0 = 1.0 / 7.0;
        for e in 0..=m {
            let row = convolve_binoms(&t, e, m, 0.0, p0);
            for (ep, &v) in row.iter().enumerate() {
                a[(e, ep)] += tail_w * v;
            }
        }
    }
    let inv_n = (-(nn as f64) * ln2).exp();
    for e in 0..=m {
        a[(e, e)] += inv_n;
    }

    let mut second = DMatrix::<f64>::zeros(m + 1, m + 1);
    for e in 0..=m {
        for ep in 0..=m {
            second[(e, ep)] = p_e[e] * a[(e, ep)];
        }
    }
    // The formula is symmetric in (E, E'); enforce it against roundoff.
    for e in 0..=m {
        for ep in e + 1..=m {
            let s = 0.5 * (second[(e, ep)] + second[(ep, e)]);
            second[(e, ep)] = s;
            second[(ep, e)] = s;
        }
    }
    let sigma = DMatrix::from_fn(m, m, |i, j| {
        second[(i + 1, j + 1)] - p_e[i + 1] * p_e[j + 1]
    });
    Ok(DosStatistics { n, m, p_e, second, sigma })
}

/// `(Var Z_1, Var Z_2)` from the covariance: quadratic forms with weights
/// `1/(E E')` and `1/(E^2 E'^2)`. Small negative results from roundoff
/// are clipped; anything below `-1e-12` is an error.
pub fn var_z(stats: &DosStatistics) -> Result<(f64, f64)> {
    let m = stats.m;
    let mut v1 = KahanSum::new();
    let mut v2 = KahanSum::new();
    for i in 1..=m {
        for j in 1..=m {
            let s = stats.sigma[(i - 1, j - 1)];
            let w = 1.0 / (i as f64 * j as f64);
            v1.add(s * w);
            v2.add(s * w * w);
        }
    }
    let clip = |v: f64| -> Result<f64> {
        if v < -1e-12 {
            Err(Error::NegativeVariance { value: v })
        } else {
            Ok(v.max(0.0))
        }
    };
    Ok((clip(v1.total())?, clip(v2.total())?))
}

/// How the solution count of a sampled density is chosen.
#[derive(Debug, Clone, Copy)]
pub enum N0Policy {
    Fixed(u128),
    /// `Poisson(N p_0)` conditioned on being at least 1.
    PoissonPositive,
}

/// What the sampling pipeline did to one draw.
#[derive(Debug, Clone, Copy)]
pub struct SampleReport {
    pub n0: u128,
    /// Gaussian components clipped at zero.
    pub clipped: usize,
    /// Factor applied to the excited sector to restore `1 - n_0`.
    pub renorm: f64,
    /// Count moved onto the largest bin to make the total exact.
    pub repair: i128,
}

/// One Gaussian surrogate density `n_E ~ N(p_E, Sigma)`: draw via the
/// symmetric square root of `Sigma`, clip negatives, renormalize the
/// excited sector, fix `N_0` by policy, and integerize with a repair on
/// the largest bin so the counts sum to `2^n` exactly.
pub fn sample_dos(
    stats: &DosStatistics,
    seed: u64,
    policy: N0Policy,
) -> Result<(DensityOfStates, SampleReport)> {
    let m = stats.m;
    // At large n the covariance entries span hundreds of orders of
    // magnitude and the dense eigensolver returns NaN. Factor
    // sigma = D C D with D = diag(sd) and decompose the O(1)-bounded
    // correlation matrix C instead; D C^{1/2} xi has the same
    // distribution as sigma^{1/2} xi.
    let diag: Vec<f64> = (0..m).map(|i| stats.sigma[(i, i)]).collect();
    let max_diag = diag.iter().fold(0.0f64, |a, &b| a.max(b));
    if let Some(&bad) = diag.iter().find(|&&d| d < -1e-10 * max_diag.max(1e-300)) {
        return Err(Error::NotPsd { min_eig: bad });
    }
    let sd: Vec<f64> = diag.iter().map(|&d| d.max(0.0).sqrt()).collect();
    let mut corr = DMatrix::<f64>::identity(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            if sd[i] > 0.0 && sd[j] > 0.0 {
                let c = stats.sigma[(i, j)] / (sd[i] * sd[j]);
                corr[(i, j)] = c;
                corr[(j, i)] = c;
            }
        }
    }
    let eig = corr.symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    // Cancellation in (second moment - p p') leaves the correlation
    // eigenvalues with a small negative roundoff floor; only reject
    // violations far above that scale.
    let tol = 1e-7 * max_eig.max(1.0);
    for &l in eig.eigenvalues.iter() {
        if l < -tol {
            return Err(Error::NotPsd { min_eig: l });
        }
    }
    let sqrt_vals: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();

    let mut rng = rng_from(seed);
    let xi: Vec<f64> = (0..m)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x
        })
        .collect();
    // C^{1/2} xi = V diag(sqrt l) V^T xi without forming the matrix.
    let mut coeffs = vec![0.0f64; m];
    for j in 0..m {
        let mut acc = 0.0;
        for i in 0..m {
            acc += eig.eigenvectors[(i, j)] * xi[i];
        }
        coeffs[j] = acc * sqrt_vals[j];
    }
    let mut g = vec![0.0f64; m];
    let mut clipped = 0usize;
    for i in 0..m {
        let mut acc = 0.0;
        for j in 0..m {
            acc += eig.eigenvectors[(i, j)] * coeffs[j];
        }
        let mut val = stats.p_e[i + 1] + sd[i] * acc;
        if val < 0.0 {
            clipped += 1;
            val = 0.0;
        }
        g[i] = val;
    }

    let total_f = (stats.n as f64).exp2();
    let want: u128 = 1u128 << stats.n;
    let n0: u128 = match policy {
        N0Policy::Fixed(k) => {
            if k >= want {
                return Err(Error::OutOfRange(format!("N_0 = {k} must be < 2^{}", stats.n)));
            }
            k
        }
        N0Policy::PoissonPositive => {
            let lambda = stats.p_e[0] * total_f;
            if lambda < 1e-6 {
                1
            } else {
                let pois = Poisson::new(lambda)
                    .map_err(|e| Error::OutOfRange(format!("Poisson({lambda}): {e}")))?;
                loop {
                    let draw: f64 = pois.sample(&mut rng);
                    if draw >= 1.0 {
                        break draw.round() as u128;
                    }
                }
            }
        }
    };

    let target = 1.0 - n0 as f64 / total_f;
    let s: f64 = g.iter().sum();
    if !(s > 0.0) {
        return Err(Error::InvalidDos("sampled excited sector has zero weight".into()));
    }
    let renorm = target / s;
    let mut counts = vec![0u128; m + 1];
    counts[0] = n0;
    for (i, &gi) in g.iter().enumerate() {
        counts[i + 1] = (gi * renorm * total_f).round().max(0.0) as u128;
    }
    let got: u128 = counts.iter().sum();
    let repair = want as i128 - got as i128;
    if repair != 0 {
        let (bin, _) = counts
            .iter()
            .enumerate()
            .skip(1)
            .max_by_key(|(_, &c)| c)
            .expect("m >= 1");
        let fixed = counts[bin] as i128 + repair;
        if fixed < 0 {
            return Err(Error::InvalidDos(format!(
                "integer repair of {repair} exceeds the largest bin"
            )));
        }
        counts[bin] = fixed as u128;
    }
    let dos = DensityOfStates::new(stats.n, counts)?;
    Ok((dos, SampleReport { n0, clipped, renorm, repair }))
}

/// Empirical covariance of the shell fractions over `num_instances`
/// generated 3-SAT instances (population normalization, so a single
/// instance gives the zero matrix). Instance `i` uses child seed
/// `split_seed(seed, i)`; chunked accumulation keeps the result
/// independent of thread count.
pub fn mc_covariance(
    n: u32,
    m: usize,
    num_instances: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if num_instances == 0 {
        return Err(Error::OutOfRange("need at least one instance".into()));
    }
    const CHUNK: usize = 64;
    let chunks: Vec<(usize, usize)> = (0..num_instances)
        .step_by(CHUNK)
        .map(|lo| (lo, (lo + CHUNK).min(num_instances)))
        .collect();
    let partials: Vec<Result<(Vec<f64>, DMatrix<f64>)>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut mean = vec![0.0f64; m];
            let mut op = DMatrix::<f64>::zeros(m, m);
            for i in lo..hi {
                let inst = gen_sat3(n, m, split_seed(seed, i as u64))?;
                let dos = compute_dos(&inst)?;
                let x: Vec<f64> = (1..=m).map(|e| dos.frac(e)).collect();
                for a in 0..m {
                    mean[a] += x[a];
                    for b in 0..m {
                        op[(a, b)] += x[a] * x[b];
                    }
                }
            }
            Ok((mean, op))
        })
        .collect();
    let mut mean = vec![0.0f64; m];
    let mut op = DMatrix::<f64>::zeros(m, m);
    for part in partials {
        let (pm, pop) = part?;
        for a in 0..m {
            mean[a] += pm[a];
        }
        op += pop;
    }
    let k = num_instances as f64;
    Ok(DMatrix::from_fn(m, m, |a, b| op[(a, b)] / k - (mean[a] / k) * (mean[b] / k)))
}
