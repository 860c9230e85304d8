//! Spectral analysis of `H(z) = -|phi><phi| + z H_f` through its
//! characteristic equation.
//!
//! Every eigenvalue of `H(z)` off the diagonal levels `z E` solves
//!
//! ```text
//!     X(lambda) = 1 + (1/N) sum_E N_E / (lambda - z E) = 0 .
//! ```
//!
//! `X` decreases monotonically between consecutive poles `z E_i` (the
//! distinct occupied energies), so there is exactly one root below the
//! first pole and one root inside each gap between poles; each shell also
//! contributes `N_{E_i} - 1` eigenvalues pinned at `z E_i`. With solutions
//! present (`N_0 > 0`) the two lowest roots straddle zero and their
//! difference is the spectral gap that controls annealing.
//!
//! The partition sums `Z_p = sum_{E>=1} n_E / E^p` condense the density of
//! states into the closed-form gap approximation
//!
//! ```text
//!     g(z) ~ (z / Z_2) sqrt((z - Z_1)^2 + 4 n_0 Z_2) ,
//! ```
//!
//! accurate to relative error `delta` inside the validity window
//! `|z - Z_1| <= delta Z_2^2 / Z_3`, with the minimum
//! `g* = 2 Z_1 sqrt(n_0 / Z_2)` at `z* = Z_1` to leading order in `n_0`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::instances::{DensityOfStates, Shells};
use crate::quad::KahanSum;
use crate::roots::{brent, golden_min};

/// Poles are approached no closer than this relative offset.
const POLE_OFFSET_REL: f64 = 1e-13;
/// Below this, a root-finding gap is considered precision limited and the
/// closed-form value is the better estimate.
pub const GAP_PRECISION_FLOOR: f64 = 1e-13;

/// Partition sums `Z_p = sum_{E >= 1} n_E / E^p` and the solution fraction
/// `n_0 = N_0 / N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSums {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    pub n0: f64,
}

impl PartitionSums {
    /// True when every state is a solution, so all `Z_p` vanish.
    pub fn is_degenerate(&self) -> bool {
        self.z1 == 0.0
    }
}

pub fn partition_sums(dos: &DensityOfStates) -> Result<PartitionSums> {
    let shells = dos.shells();
    let (mut s1, mut s2, mut s3) = (KahanSum::new(), KahanSum::new(), KahanSum::new());
    for i in 0..shells.len() {
        let e = shells.energies[i];
        if e == 0.0 {
            continue;
        }
        let f = shells.fracs[i];
        s1.add(f / e);
        s2.add(f / (e * e));
        s3.add(f / (e * e * e));
    }
    Ok(PartitionSums {
        z1: s1.total(),
        z2: s2.total(),
        z3: s3.total(),
        n0: dos.frac(0),
    })
}

// ---------------------------------------------------------------------------
// Characteristic equation and exact roots
// ---------------------------------------------------------------------------

struct CharFn<'a> {
    poles: Vec<f64>,
    weights: &'a [f64],
}

impl<'a> CharFn<'a> {
    fn new(shells: &'a Shells, z: f64) -> Self {
        Self {
            poles: shells.energies.iter().map(|&e| z * e).collect(),
            weights: &shells.fracs,
        }
    }

    fn eval(&self, lambda: f64) -> f64 {
        let mut s = KahanSum::new();
        s.add(1.0);
        for (&p, &w) in self.poles.iter().zip(self.weights) {
            s.add(w / (lambda - p));
        }
        s.total()
    }

    /// `X` with shell `skip` removed; finite at that pole.
    fn eval_excluding(&self, lambda: f64, skip: usize) -> f64 {
        let mut s = KahanSum::new();
        s.add(1.0);
        for (i, (&p, &w)) in self.poles.iter().zip(self.weights).enumerate() {
            if i != skip {
                s.add(w / (lambda - p));
            }
        }
        s.total()
    }

    /// First-order estimate of the root adjacent to pole `i`, used when the
    /// true root is closer to the pole than floating point can bracket.
    fn residue_root(&self, i: usize) -> f64 {
        let p = self.poles[i];
        let rest = self.eval_excluding(p, i);
        if rest == 0.0 {
            return p;
        }
        p - self.weights[i] / rest
    }

    fn min_offset(&self, pole: f64) -> f64 {
        if pole == 0.0 {
            1e-290
        } else {
            POLE_OFFSET_REL * pole.abs()
        }
    }

    /// Root strictly below the first pole; `X` falls from 1 to -inf there.
    fn root_below_first(&self) -> Result<f64> {
        let p0 = self.poles[0];
        let lo = p0 - 1.0 - 1e-6;
        let mut a = lo;
        let width = if self.poles.len() > 1 {
            (self.poles[1] - p0).min(1.0)
        } else {
            1.0
        };
        let mut delta = 0.5 * width;
        let floor = self.min_offset(p0);
        loop {
            let b = p0 - delta;
            if self.eval(b) < 0.0 {
                return brent(|x| self.eval(x), a, b, 0.0, 1e-15, 200);
            }
            a = b;
            delta *= 0.0625;
            if delta < floor {
                return Ok(self.residue_root(0));
            }
        }
    }

    /// Root in the open interval between poles `i` and `i + 1`; `X` falls
    /// from +inf to -inf there.
    fn root_between(&self, i: usize) -> Result<f64> {
        let (pl, pr) = (self.poles[i], self.poles[i + 1]);
        let width = pr - pl;
        let (floor_l, floor_r) = (self.min_offset(pl), self.min_offset(pr));

        let mut a = None;
        let mut delta = 0.25 * width;
        while delta >= floor_l {
            let x = pl + delta;
            if self.eval(x) > 0.0 {
                a = Some(x);
                break;
            }
            delta *= 0.0625;
        }
        let Some(a) = a else {
            return Ok(pl + (self.residue_root(i) - pl).abs().max(floor_l));
        };

        let mut b = None;
        let mut delta = 0.25 * width;
        while delta >= floor_r {
            let x = pr - delta;
            if x <= a {
                b = Some(x.max(a));
                break;
            }
            if self.eval(x) < 0.0 {
                b = Some(x);
                break;
            }
            delta *= 0.0625;
        }
        let Some(b) = b else {
            return Ok(pr - (pr - self.residue_root(i + 1)).abs().max(floor_r));
        };
        if b <= a {
            return Ok(a);
        }
        brent(|x| self.eval(x), a, b, 0.0, 1e-15, 200)
    }
}

fn check_z(z: f64) -> Result<()> {
    if !z.is_finite() || z < 0.0 {
        return Err(Error::OutOfRange(format!("z = {z} must be finite and >= 0")));
    }
    Ok(())
}

/// Evaluates the characteristic function `X(lambda)` at one point.
pub fn char_eq(dos: &DensityOfStates, z: f64, lambda: f64) -> Result<f64> {
    check_z(z)?;
    let shells = dos.shells();
    let cf = CharFn::new(&shells, z);
    for &p in &cf.poles {
        if lambda == p {
            return Err(Error::AtPole { lambda, pole: p });
        }
    }
    Ok(cf.eval(lambda))
}

/// All `m'` roots of `X` at `z > 0`, ascending. Together with each pole
/// `z E_i` repeated `N_{E_i} - 1` times these are exactly the eigenvalues
/// of `H(z)`.
pub fn all_roots(dos: &DensityOfStates, z: f64) -> Result<Vec<f64>> {
    check_z(z)?;
    if z == 0.0 {
        return Err(Error::OutOfRange(
            "all_roots needs z > 0 (at z = 0 the poles coincide)".into(),
        ));
    }
    let shells = dos.shells();
    let cf = CharFn::new(&shells, z);
    let mut roots = Vec::with_capacity(shells.len());
    roots.push(cf.root_below_first()?);
    for i in 0..shells.len() - 1 {
        roots.push(cf.root_between(i)?);
    }
    Ok(roots)
}

/// The two lowest roots `(lambda_0, lambda_1)` with `lambda_0 < 0 <
/// lambda_1` (requires `N_0 > 0` and at least one unsatisfied shell).
pub fn exact_low_eigs(dos: &DensityOfStates, z: f64) -> Result<(f64, f64)> {
    check_z(z)?;
    if dos.ground_count() == 0 {
        return Err(Error::NoSolutions);
    }
    if dos.is_degenerate() {
        return Err(Error::DegenerateDos);
    }
    if z == 0.0 {
        // H(0) = -|phi><phi|: the projector state at -1, the rest at 0.
        return Ok((-1.0, 0.0));
    }
    let shells = dos.shells();
    let cf = CharFn::new(&shells, z);
    let l0 = cf.root_below_first()?;
    let l1 = cf.root_between(0)?;
    Ok((l0, l1))
}

/// How a gap value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMethod {
    RootFinding,
    Approximation,
}

#[derive(Debug, Clone, Copy)]
pub struct GapPoint {
    pub z: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub gap: f64,
    pub method: GapMethod,
    /// Set when the gap is below [`GAP_PRECISION_FLOOR`] and root finding
    /// cannot resolve it reliably.
    pub precision_limited: bool,
}

/// Exact gap `lambda_1 - lambda_0` at one `z`.
pub fn gap_exact(dos: &DensityOfStates, z: f64) -> Result<GapPoint> {
    let (l0, l1) = exact_low_eigs(dos, z)?;
    let gap = l1 - l0;
    Ok(GapPoint {
        z,
        lambda0: l0,
        lambda1: l1,
        gap,
        method: GapMethod::RootFinding,
        precision_limited: gap < GAP_PRECISION_FLOOR,
    })
}

// ---------------------------------------------------------------------------
// Reduced Hamiltonian in the energy-shell basis
// ---------------------------------------------------------------------------

/// `H(z)` restricted to the symmetric shell vectors
/// `|a_i> = N_{E_i}^{-1/2} sum_{E(s) = E_i} |s>`:
/// `H_a[i][j] = z E_i delta_ij - sqrt(n_i n_j)`.
#[derive(Debug, Clone)]
pub struct ReducedHamiltonian {
    pub z: f64,
    /// Distinct occupied energies `E_i`.
    pub energies: Vec<f64>,
    /// Shell fractions `n_{E_i}`.
    pub weights: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

/// Dense shell-basis matrix from precomputed shells.
pub fn reduced_matrix_from_shells(shells: &Shells, z: f64) -> DMatrix<f64> {
    let m = shells.len();
    let q: Vec<f64> = shells.fracs.iter().map(|&f| f.sqrt()).collect();
    DMatrix::from_fn(m, m, |i, j| {
        let diag = if i == j { z * shells.energies[i] } else { 0.0 };
        diag - q[i] * q[j]
    })
}

pub fn reduced_hamiltonian(dos: &DensityOfStates, z: f64) -> Result<ReducedHamiltonian> {
    check_z(z)?;
    let shells = dos.shells();
    let matrix = reduced_matrix_from_shells(&shells, z);
    Ok(ReducedHamiltonian {
        z,
        energies: shells.energies,
        weights: shells.fracs,
        matrix,
    })
}

impl ReducedHamiltonian {
    /// Eigenvalues ascending with matching orthonormal eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        sorted_symmetric_eigen(&self.matrix)
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let dim = m.nrows();
    let vecs = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

// ---------------------------------------------------------------------------
// Closed-form gap approximation
// ---------------------------------------------------------------------------

fn check_ps(ps: &PartitionSums) -> Result<()> {
    if ps.is_degenerate() {
        return Err(Error::DegenerateDos);
    }
    Ok(())
}

/// Approximate low eigenvalues
/// `lambda'_{1,0} = z (z - Z_1 +- sqrt((z - Z_1)^2 + 4 n_0 Z_2)) / (2 Z_2)`.
pub fn approx_low_eigs(ps: &PartitionSums, z: f64) -> Result<(f64, f64)> {
    check_z(z)?;
    check_ps(ps)?;
    let dz = z - ps.z1;
    let s = (dz * dz + 4.0 * ps.n0 * ps.z2).sqrt();
    let scale = z / (2.0 * ps.z2);
    Ok((scale * (dz - s), scale * (dz + s)))
}

/// Closed-form gap `g(z) = (z / Z_2) sqrt((z - Z_1)^2 + 4 n_0 Z_2)`.
///
/// Accuracy is only guaranteed inside [`validity_interval`]; the value is
/// still defined (and returned) everywhere.
pub fn gap_approx(ps: &PartitionSums, z: f64) -> Result<f64> {
    check_z(z)?;
    check_ps(ps)?;
    let dz = z - ps.z1;
    Ok(z / ps.z2 * (dz * dz + 4.0 * ps.n0 * ps.z2).sqrt())
}

/// [`gap_approx`] plus a flag telling whether `z` lies inside the
/// `delta`-validity window where the claimed accuracy holds.
pub fn gap_approx_checked(ps: &PartitionSums, z: f64, delta: f64) -> Result<(f64, bool)> {
    let g = gap_approx(ps, z)?;
    let (z0, z1) = validity_interval(ps, delta)?;
    Ok((g, (z0..=z1).contains(&z)))
}

#[derive(Debug, Clone, Copy)]
pub struct MinGap {
    pub z_star: f64,
    pub g_star: f64,
}

/// Leading-order minimum gap: `z* = Z_1`, `g* = 2 Z_1 sqrt(n_0 / Z_2)`.
pub fn min_gap(ps: &PartitionSums) -> Result<MinGap> {
    check_ps(ps)?;
    if ps.n0 <= 0.0 {
        return Err(Error::NoSolutions);
    }
    Ok(MinGap {
        z_star: ps.z1,
        g_star: 2.0 * ps.z1 * (ps.n0 / ps.z2).sqrt(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct RefinedMinGap {
    pub z_star: f64,
    pub g_star: f64,
    /// `z* - Z_1`: the subleading shift of the minimum location.
    pub shift_from_leading: f64,
    pub precision_limited: bool,
}

/// Minimum gap refined by golden-section search of the exact gap on
/// `Z_1 +- 10 sqrt(n_0 Z_2)`. Falls back to the closed form when the gap
/// sits below the root-finding precision floor.
pub fn min_gap_refined(dos: &DensityOfStates, ps: &PartitionSums) -> Result<RefinedMinGap> {
    let lead = min_gap(ps)?;
    let half = 10.0 * (ps.n0 * ps.z2).sqrt();
    if lead.g_star < GAP_PRECISION_FLOOR {
        return Ok(RefinedMinGap {
            z_star: lead.z_star,
            g_star: lead.g_star,
            shift_from_leading: 0.0,
            precision_limited: true,
        });
    }
    let lo = (ps.z1 - half).max(0.05 * half);
    let hi = ps.z1 + half;
    let (z_star, g_star) = golden_min(
        |z| match gap_exact(dos, z) {
            Ok(p) => p.gap,
            Err(_) => f64::INFINITY,
        },
        lo,
        hi,
        1e-4 * half,
        1e-14,
        300,
    )?;
    Ok(RefinedMinGap {
        z_star,
        g_star,
        shift_from_leading: z_star - ps.z1,
        precision_limited: g_star < GAP_PRECISION_FLOOR,
    })
}

/// `z` window `(Z_1 - delta Z_2^2 / Z_3, Z_1 + delta Z_2^2 / Z_3)` on which
/// the closed-form gap has relative error at most `delta`. Requires
/// `delta < Z_1 Z_3 / Z_2^2` so the window stays positive.
pub fn validity_interval(ps: &PartitionSums, delta: f64) -> Result<(f64, f64)> {
    check_ps(ps)?;
    if !(delta > 0.0) {
        return Err(Error::OutOfRange(format!("delta = {delta} must be > 0")));
    }
    let max_delta = ps.z1 * ps.z3 / (ps.z2 * ps.z2);
    if delta >= max_delta {
        return Err(Error::DeltaTooLarge { delta, max: max_delta });
    }
    let eps = delta * ps.z2 * ps.z2 / ps.z3;
    Ok((ps.z1 - eps, ps.z1 + eps))
}

#[derive(Debug, Clone, Copy)]
pub struct StopPoint {
    pub z_f: f64,
    /// `Delta = sqrt(4 n_0 Z_2 / delta)`: distance past the minimum.
    pub shift: f64,
    /// Whether `z_f` still lies inside the `delta`-validity window; false
    /// in small-`N` regimes where the asymptotic stopping rule is loose.
    pub within_validity: bool,
}

/// Annealing stop point `z_f = z* + sqrt(4 n_0 Z_2 / delta)`. Evolving to
/// `z_f` makes the ground state's solution weight dominate by `4 Z_2 /
/// delta` (see [`detection_ratio`]).
pub fn stop_point(ps: &PartitionSums, delta: f64) -> Result<StopPoint> {
    check_ps(ps)?;
    if ps.n0 <= 0.0 {
        return Err(Error::NoSolutions);
    }
    if !(delta > 0.0) {
        return Err(Error::OutOfRange(format!("delta = {delta} must be > 0")));
    }
    let shift = (4.0 * ps.n0 * ps.z2 / delta).sqrt();
    let within = shift <= delta * ps.z2 * ps.z2 / ps.z3;
    Ok(StopPoint { z_f: ps.z1 + shift, shift, within_validity: within })
}

/// Lower bound on the gap left of the validity window: for `0 <= z <= z_0`,
/// `g(z) > (z_0 Z_2 / Z_3) dz` with `dz = delta Z_2^2 / Z_3`.
pub fn gap_floor_below_z0(ps: &PartitionSums, delta: f64) -> Result<f64> {
    let (z0, _) = validity_interval(ps, delta)?;
    let dz = delta * ps.z2 * ps.z2 / ps.z3;
    Ok(z0 * ps.z2 / ps.z3 * dz)
}

// ---------------------------------------------------------------------------
// Eigenvectors and the detection ratio
// ---------------------------------------------------------------------------

/// Shell-basis eigenvector at a root `lambda` of `X`:
/// `v_i ~ sqrt(n_i) / (z E_i - lambda)`, unit norm, largest component
/// positive. Errors if `lambda` is not actually a root.
pub fn eigenvector(dos: &DensityOfStates, z: f64, lambda: f64) -> Result<Vec<f64>> {
    check_z(z)?;
    let shells = dos.shells();
    let cf = CharFn::new(&shells, z);
    let mut scale = 1.0;
    for (&p, &w) in cf.poles.iter().zip(cf.weights) {
        if lambda == p {
            return Err(Error::AtPole { lambda, pole: p });
        }
        scale += (w / (lambda - p)).abs();
    }
    let residual = cf.eval(lambda).abs();
    if residual > 1e-8 * scale {
        return Err(Error::NotARoot { lambda, residual });
    }
    let mut v: Vec<f64> = shells
        .fracs
        .iter()
        .zip(&cf.poles)
        .map(|(&w, &p)| w.sqrt() / (p - lambda))
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let lead = v.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
    let sign = if lead < 0.0 { -1.0 } else { 1.0 };
    for x in &mut v {
        *x *= sign / norm;
    }
    Ok(v)
}

/// Ground-state weight ratio `p(E = 0) / p(E > 0)` at `z`, from the exact
/// ground root: `p(E = 0) ~ N_0 / lambda_0^2`,
/// `p(E > 0) ~ sum_{E >= 1} N_E / (z E - lambda_0)^2`.
///
/// Meaningful as a detection guarantee only for `z >= z*`.
pub fn detection_ratio(dos: &DensityOfStates, z: f64) -> Result<f64> {
    let (l0, _) = exact_low_eigs(dos, z)?;
    let shells = dos.shells();
    let mut num = 0.0;
    let mut den = KahanSum::new();
    for i in 0..shells.len() {
        let w = shells.fracs[i];
        let p = z * shells.energies[i];
        let amp = w / ((p - l0) * (p - l0));
        if shells.energies[i] == 0.0 {
            num = amp;
        } else {
            den.add(amp);
        }
    }
    let den = den.total();
    if den == 0.0 {
        return Err(Error::DegenerateDos);
    }
    Ok(num / den)
}

/// Best available gap value for schedule construction: exact roots where
/// they are resolvable, the closed form inside the precision-limited
/// window. Returns NaN on invalid input so quadrature surfaces the error.
pub fn gap_value(dos: &DensityOfStates, ps: &PartitionSums, z: f64) -> f64 {
    if !z.is_finite() || z < 0.0 {
        return f64::NAN;
    }
    match gap_exact(dos, z) {
        Ok(p) if !p.precision_limited => p.gap,
        _ => gap_approx(ps, z).unwrap_or(f64::NAN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{compute_dos, gen_sat3};

    fn grover4() -> DensityOfStates {
        DensityOfStates::grover(2)
    }

    /// First satisfiable random instance at or after `seed`.
    fn sat_dos(n: u32, m: usize, seed: u64) -> DensityOfStates {
        for s in seed..seed + 50 {
            let dos = compute_dos(&gen_sat3(n, m, s).unwrap()).unwrap();
            if dos.ground_count() > 0 {
                return dos;
            }
        }
        panic!("no satisfiable instance found near seed {seed}");
    }

    #[test]
    fn partition_sums_of_grover4() {
        let ps = partition_sums(&grover4()).unwrap();
        assert_eq!(ps.z1, 0.75);
        assert_eq!(ps.z2, 0.75);
        assert_eq!(ps.z3, 0.75);
        assert_eq!(ps.n0, 0.25);
    }

    #[test]
    fn partition_sums_with_two_excited_shells() {
        // N = 4, counts {N_0 = 1, N_1 = 1, N_2 = 2}.
        let dos = DensityOfStates::new(2, vec![1, 1, 2]).unwrap();
        let ps = partition_sums(&dos).unwrap();
        assert!((ps.z1 - 0.5).abs() < 1e-15);
        assert!((ps.z2 - 0.375).abs() < 1e-15);
        assert!((ps.z3 - 0.3125).abs() < 1e-15);
    }

    #[test]
    fn partition_sum_ordering() {
        let dos = compute_dos(&gen_sat3(10, 42, 3).unwrap()).unwrap();
        let ps = partition_sums(&dos).unwrap();
        assert!(0.0 < ps.z3 && ps.z3 <= ps.z2 && ps.z2 <= ps.z1 && ps.z1 < 1.0);
    }

    #[test]
    fn char_eq_vanishes_at_grover_roots() {
        let dos = grover4();
        assert!(char_eq(&dos, 1.0, -0.5).unwrap().abs() < 1e-14);
        assert!(char_eq(&dos, 1.0, 0.5).unwrap().abs() < 1e-14);
        // Between the roots at -0.5 and 0.5, X is positive right of the
        // pole at zero and negative once past the upper root.
        assert!(char_eq(&dos, 1.0, 0.25).unwrap() > 0.0);
        assert!(char_eq(&dos, 1.0, 0.75).unwrap() < 0.0);
    }

    #[test]
    fn char_eq_rejects_poles() {
        assert!(matches!(
            char_eq(&grover4(), 1.0, 1.0),
            Err(Error::AtPole { .. })
        ));
        assert!(matches!(
            char_eq(&grover4(), 1.0, 0.0),
            Err(Error::AtPole { .. })
        ));
    }

    #[test]
    fn grover_low_eigs_at_unit_z() {
        let (l0, l1) = exact_low_eigs(&grover4(), 1.0).unwrap();
        assert!((l0 + 0.5).abs() < 1e-12);
        assert!((l1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn low_eigs_at_zero_z_are_projector_spectrum() {
        let (l0, l1) = exact_low_eigs(&grover4(), 0.0).unwrap();
        assert_eq!((l0, l1), (-1.0, 0.0));
    }

    #[test]
    fn reduced_hamiltonian_of_grover4() {
        let h = reduced_hamiltonian(&grover4(), 1.0).unwrap();
        let root3_4 = 3f64.sqrt() / 4.0;
        assert!((h.matrix[(0, 0)] + 0.25).abs() < 1e-15);
        assert!((h.matrix[(1, 1)] - 0.25).abs() < 1e-15);
        assert!((h.matrix[(0, 1)] + root3_4).abs() < 1e-15);
        assert!((h.matrix[(1, 0)] + root3_4).abs() < 1e-15);
        let (vals, _) = h.eigen();
        assert!((vals[0] + 0.5).abs() < 1e-12);
        assert!((vals[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn roots_match_reduced_diagonalization() {
        let dos = compute_dos(&gen_sat3(8, 34, 17).unwrap()).unwrap();
        for &z in &[0.02, 0.11, 0.5, 1.3] {
            let roots = all_roots(&dos, z).unwrap();
            let (vals, _) = reduced_hamiltonian(&dos, z).unwrap().eigen();
            assert_eq!(roots.len(), vals.len());
            for (r, v) in roots.iter().zip(&vals) {
                assert!(
                    (r - v).abs() < 1e-10 * (1.0 + v.abs()),
                    "z = {z}: root {r} vs eigenvalue {v}"
                );
            }
        }
    }

    #[test]
    fn roots_interlace_poles() {
        let dos = compute_dos(&gen_sat3(9, 38, 5).unwrap()).unwrap();
        let z = 0.2;
        let shells = dos.shells();
        let poles: Vec<f64> = shells.energies.iter().map(|&e| z * e).collect();
        let roots = all_roots(&dos, z).unwrap();
        assert!(roots[0] < poles[0]);
        for i in 0..poles.len() - 1 {
            assert!(
                poles[i] < roots[i + 1] && roots[i + 1] < poles[i + 1],
                "root {} = {} escapes ({}, {})",
                i + 1,
                roots[i + 1],
                poles[i],
                poles[i + 1]
            );
        }
    }

    #[test]
    fn roots_increase_with_z() {
        let dos = compute_dos(&gen_sat3(8, 34, 9).unwrap()).unwrap();
        for &z in &[0.05, 0.2, 0.8] {
            let r1 = all_roots(&dos, z).unwrap();
            let r2 = all_roots(&dos, z * 1.05).unwrap();
            for (a, b) in r1.iter().zip(&r2) {
                assert!(b > a, "root moved down: {a} -> {b} at z = {z}");
            }
        }
    }

    #[test]
    fn gap_approx_matches_exact_near_minimum() {
        let dos = sat_dos(12, 50, 1);
        let ps = partition_sums(&dos).unwrap();
        let exact = gap_exact(&dos, ps.z1).unwrap().gap;
        let approx = gap_approx(&ps, ps.z1).unwrap();
        assert!(
            ((exact - approx) / exact).abs() < 0.05,
            "exact {exact} vs approx {approx}"
        );
    }

    #[test]
    fn min_gap_of_grover4() {
        let ps = partition_sums(&grover4()).unwrap();
        let mg = min_gap(&ps).unwrap();
        assert_eq!(mg.z_star, 0.75);
        assert!((mg.g_star - 0.8660254037844386).abs() < 1e-15);
    }

    #[test]
    fn refined_min_gap_tracks_scan_minimum() {
        let dos = DensityOfStates::grover(10);
        let ps = partition_sums(&dos).unwrap();
        let refined = min_gap_refined(&dos, &ps).unwrap();
        // Brute scan oracle on a fine grid.
        let half = 10.0 * (ps.n0 * ps.z2).sqrt();
        let lo = (ps.z1 - half).max(0.05 * half);
        let mut best = (0.0, f64::INFINITY);
        for k in 0..4000 {
            let z = lo + (ps.z1 + half - lo) * k as f64 / 3999.0;
            let g = gap_exact(&dos, z).unwrap().gap;
            if g < best.1 {
                best = (z, g);
            }
        }
        assert!((refined.z_star - best.0).abs() < 2e-3 * half);
        // The grid minimum overshoots the true one by curvature * step^2.
        assert!(refined.g_star <= best.1 + 1e-12);
        assert!((refined.g_star - best.1).abs() < 1e-6);
        assert!(refined.g_star <= gap_exact(&dos, ps.z1).unwrap().gap + 1e-15);
        assert!(!refined.precision_limited);
    }

    #[test]
    fn validity_interval_of_grover4() {
        let ps = partition_sums(&grover4()).unwrap();
        let (z0, z1) = validity_interval(&ps, 0.01).unwrap();
        assert!((z0 - 0.7425).abs() < 1e-15);
        assert!((z1 - 0.7575).abs() < 1e-15);
        // delta >= Z_1 Z_3 / Z_2^2 = 1 collapses the window to z <= 0.
        assert!(matches!(
            validity_interval(&ps, 1.0),
            Err(Error::DeltaTooLarge { .. })
        ));
    }

    #[test]
    fn stop_point_of_grover4() {
        let ps = partition_sums(&grover4()).unwrap();
        let sp = stop_point(&ps, 0.01).unwrap();
        assert!((sp.z_f - 9.410254037844387).abs() < 1e-12);
        assert!(!sp.within_validity);
    }

    #[test]
    fn gap_floor_holds_left_of_window() {
        let dos = sat_dos(10, 42, 3);
        let ps = partition_sums(&dos).unwrap();
        let delta = 0.01;
        let floor = gap_floor_below_z0(&ps, delta).unwrap();
        let (z0, _) = validity_interval(&ps, delta).unwrap();
        for k in 0..=20 {
            let z = z0 * k as f64 / 20.0;
            let g = gap_exact(&dos, z).unwrap().gap;
            assert!(g > floor, "g({z}) = {g} <= floor {floor}");
        }
    }

    #[test]
    fn eigenvector_of_grover_ground_state() {
        let dos = grover4();
        let v = eigenvector(&dos, 1.0, -0.5).unwrap();
        assert!((v[0] - 0.8660254037844386).abs() < 1e-10);
        assert!((v[1] - 0.5).abs() < 1e-10);
        // Residual in the reduced matrix.
        let h = reduced_hamiltonian(&dos, 1.0).unwrap().matrix;
        let hv = [
            h[(0, 0)] * v[0] + h[(0, 1)] * v[1],
            h[(1, 0)] * v[0] + h[(1, 1)] * v[1],
        ];
        let res = ((hv[0] + 0.5 * v[0]).powi(2) + (hv[1] + 0.5 * v[1]).powi(2)).sqrt();
        assert!(res < 1e-12);
    }

    #[test]
    fn eigenvector_rejects_non_roots() {
        assert!(matches!(
            eigenvector(&grover4(), 1.0, 0.3),
            Err(Error::NotARoot { .. })
        ));
    }

    #[test]
    fn detection_ratio_matches_reduced_ground_vector() {
        let dos = sat_dos(12, 50, 1);
        let z = 0.4;
        let ratio = detection_ratio(&dos, z).unwrap();
        let (vals, vecs) = reduced_hamiltonian(&dos, z).unwrap().eigen();
        assert!(vals[0] < 0.0);
        let p0 = vecs[(0, 0)] * vecs[(0, 0)];
        let oracle = p0 / (1.0 - p0);
        assert!(
            ((ratio - oracle) / oracle).abs() < 1e-8,
            "{ratio} vs {oracle}"
        );
    }

    #[test]
    fn degenerate_dos_is_rejected() {
        let dos = DensityOfStates::new(3, vec![8]).unwrap();
        let ps = partition_sums(&dos).unwrap();
        assert!(ps.is_degenerate());
        assert!(matches!(min_gap(&ps), Err(Error::DegenerateDos)));
        assert!(matches!(exact_low_eigs(&dos, 0.5), Err(Error::DegenerateDos)));
    }
}
