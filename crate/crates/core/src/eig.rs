//! Restarted Lanczos for the lowest eigenpairs of large symmetric
//! operators given only matrix-vector products.
//!
//! The basis is kept fully orthonormal (two-pass reorthogonalization on
//! every step), the projected matrix is stored densely, and restarts keep
//! the lowest Ritz vectors plus the running residual direction (thick
//! restart). Convergence is certified by explicitly measured residual
//! norms `|A x - theta x|`, not by the projected-matrix shortcut.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::spectrum::sorted_symmetric_eigen;

#[derive(Debug, Clone, Copy)]
pub struct LanczosOpts {
    /// Basis size between restarts; raise for tightly clustered spectra.
    pub basis: usize,
    /// Absolute residual tolerance, scaled by the spectral radius estimate.
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOpts {
    fn default() -> Self {
        Self { basis: 48, tol: 1e-9, max_restarts: 400, seed: 0x1a2b3c4d }
    }
}

#[derive(Debug, Clone)]
pub struct EigPair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// Explicitly computed `|A x - theta x|`.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Removes the components of `v` along every basis vector, twice.
fn reorthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let d = dot(v, b);
            if d != 0.0 {
                axpy(v, -d, b);
            }
        }
    }
}

fn random_unit(dim: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = norm(&v);
    for x in &mut v {
        *x /= n;
    }
    v
}

/// Lowest `k` eigenpairs of the symmetric operator `apply` on `R^dim`,
/// ascending. `apply(x, y)` must write `A x` into `y`.
pub fn lowest_eigs<F>(dim: usize, k: usize, apply: F, opts: &LanczosOpts) -> Result<Vec<EigPair>>
where
    F: Fn(&[f64], &mut [f64]),
{
    lowest_eigs_from(dim, k, apply, opts, None)
}

/// As [`lowest_eigs`], seeding the first Krylov direction with `start`
/// when given (e.g. the ground vector from a nearby operator, which cuts
/// restarts sharply in parameter scans).
pub fn lowest_eigs_from<F>(
    dim: usize,
    k: usize,
    apply: F,
    opts: &LanczosOpts,
    start: Option<&[f64]>,
) -> Result<Vec<EigPair>>
where
    F: Fn(&[f64], &mut [f64]),
{
    if k == 0 || k > dim {
        return Err(Error::Dimension(format!("need 0 < k = {k} <= dim = {dim}")));
    }
    let m = opts.basis.clamp(k + 2, dim).min(dim);
    let keep = (k + 6).min(m.saturating_sub(2)).max(k);

    let mut rng = rng_from(opts.seed);
    let first = match start {
        Some(v) if v.len() == dim && norm(v) > 1e-12 => {
            let nv = norm(v);
            v.iter().map(|x| x / nv).collect()
        }
        _ => random_unit(dim, &mut rng),
    };
    let mut basis: Vec<Vec<f64>> = vec![first];
    let mut proj = DMatrix::<f64>::zeros(m, m);
    let mut scale = 1.0f64; // running spectral radius estimate
    let mut work = vec![0.0f64; dim];

    for restart in 0..opts.max_restarts {
        // Extend the basis with Krylov directions until it is full.
        let mut col = basis.len() - 1;
        loop {
            apply(&basis[col], &mut work);
            for j in 0..=col {
                let d = dot(&basis[j], &work);
                proj[(j, col)] = d;
                proj[(col, j)] = d;
                scale = scale.max(d.abs());
            }
            if col + 1 >= m {
                break;
            }
            let mut w = work.clone();
            reorthogonalize(&mut w, &basis);
            let nw = norm(&w);
            if nw < 1e-10 * scale.max(1.0) {
                // Invariant subspace hit; inject a fresh random direction.
                let mut r = random_unit(dim, &mut rng);
                reorthogonalize(&mut r, &basis);
                let nr = norm(&r);
                if nr < 1e-8 {
                    break; // basis already spans everything reachable
                }
                for x in &mut r {
                    *x /= nr;
                }
                basis.push(r);
            } else {
                for x in &mut w {
                    *x /= nw;
                }
                basis.push(w);
            }
            col += 1;
        }

        // Rayleigh-Ritz on the current span.
        let mcur = basis.len();
        let p = proj.view((0, 0), (mcur, mcur)).into_owned();
        let (theta, u) = sorted_symmetric_eigen(&p);

        let take = keep.min(mcur);
        let mut ritz: Vec<Vec<f64>> = Vec::with_capacity(take);
        for i in 0..take {
            let mut x = vec![0.0f64; dim];
            for (j, b) in basis.iter().enumerate() {
                axpy(&mut x, u[(j, i)], b);
            }
            let nx = norm(&x);
            for v in &mut x {
                *v /= nx;
            }
            ritz.push(x);
        }

        // Certify the k lowest pairs with true residuals.
        let mut pairs = Vec::with_capacity(k);
        let mut worst = 0.0f64;
        for (i, x) in ritz.iter().enumerate().take(k) {
            apply(x, &mut work);
            axpy(&mut work, -theta[i], x);
            let r = norm(&work);
            worst = worst.max(r);
            pairs.push(EigPair { value: theta[i], vector: x.clone(), residual: r });
        }
        if worst <= opts.tol * scale.max(1.0) || mcur >= dim {
            if worst > (opts.tol * scale.max(1.0)).max(1e-7 * scale.max(1.0)) {
                return Err(Error::EigenNonConvergence {
                    iterations: restart + 1,
                    residual: worst,
                });
            }
            return Ok(pairs);
        }

        // Thick restart: kept Ritz vectors plus one residual direction.
        let mut vres = {
            apply(&ritz[take - 1], &mut work);
            work.clone()
        };
        reorthogonalize(&mut vres, &ritz);
        let nres = norm(&vres);
        basis = ritz;
        if nres > 1e-10 * scale.max(1.0) {
            for x in &mut vres {
                *x /= nres;
            }
            basis.push(vres);
        } else {
            let mut r = random_unit(dim, &mut rng);
            reorthogonalize(&mut r, &basis);
            let nr = norm(&r);
            if nr > 1e-8 {
                for x in &mut r {
                    *x /= nr;
                }
                basis.push(r);
            }
        }
        proj.fill(0.0);
        for (i, &t) in theta.iter().enumerate().take(basis.len().min(take)) {
            proj[(i, i)] = t;
        }
    }
    Err(Error::EigenNonConvergence { iterations: opts.max_restarts, residual: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply(m: &DMatrix<f64>) -> impl Fn(&[f64], &mut [f64]) + '_ {
        move |x, y| {
            for i in 0..m.nrows() {
                y[i] = (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum();
            }
        }
    }

    #[test]
    fn matches_dense_eigensolver() {
        let dim = 60;
        let mut rng = rng_from(7);
        let a = DMatrix::from_fn(dim, dim, |_, _| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x
        });
        let sym = (&a + a.transpose()) * 0.5;
        let (vals, _) = sorted_symmetric_eigen(&sym);
        let pairs = lowest_eigs(dim, 3, dense_apply(&sym), &LanczosOpts::default()).unwrap();
        for (p, v) in pairs.iter().zip(&vals) {
            assert!((p.value - v).abs() < 1e-8, "{} vs {}", p.value, v);
            assert!(p.residual < 1e-7);
        }
    }

    #[test]
    fn large_diagonal_operator() {
        let dim = 5000;
        let diag: Vec<f64> = (0..dim).map(|i| (i as f64).sqrt() - 3.0).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..dim {
                y[i] = diag[i] * x[i];
            }
        };
        let pairs = lowest_eigs(dim, 2, apply, &LanczosOpts::default()).unwrap();
        assert!((pairs[0].value + 3.0).abs() < 1e-8);
        assert!((pairs[1].value + 2.0).abs() < 1e-8);
    }

    #[test]
    fn resolves_degenerate_lowest_pair() {
        let dim = 400;
        let mut diag: Vec<f64> = (0..dim).map(|i| 0.01 * i as f64).collect();
        diag[0] = -1.0;
        diag[1] = -1.0;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..dim {
                y[i] = diag[i] * x[i];
            }
        };
        let pairs = lowest_eigs(dim, 3, apply, &LanczosOpts::default()).unwrap();
        assert!((pairs[0].value + 1.0).abs() < 1e-8);
        assert!((pairs[1].value + 1.0).abs() < 1e-8);
        assert!((pairs[2].value - 0.02).abs() < 1e-7);
        let overlap: f64 = pairs[0]
            .vector
            .iter()
            .zip(&pairs[1].vector)
            .map(|(a, b)| a * b)
            .sum();
        assert!(overlap.abs() < 1e-6);
    }
}
