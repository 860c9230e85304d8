//! Locally optimized annealing schedules and run-time bounds.
//!
//! The schedule ansatz `zdot = c g(z)^2` with boundary values `z(0) = 0`,
//! `z(1) = z_f` fixes the normalization `c = int_0^{z_f} dz / g^2` and
//! slows the anneal exactly where the gap closes. Run times follow from
//! the adiabatic theorem,
//!
//! ```text
//!     T >= C / eps ,
//!     C = 2 max |Hdot| / g^2 + int (|Hddot| / g^2 + 7 |Hdot|^2 / g^3) dbeta ,
//! ```
//!
//! and from the schedule-independent form `C <= c (2 E_max + 28 int dz/g)`.
//! The converse bound `T >= sqrt(N / N_0) gamma(p)` caps any schedule's
//! speedup at quadratic.
//!
//! Near the minimum the integrands peak like `1 / ((z - z*)^2 + d)` with
//! `d = 4 n_0 Z_2` exponentially small, so the quadrature switches to the
//! arctan / asinh substitutions on the peak window.

use crate::error::{Error, Result};
use crate::instances::DensityOfStates;
use crate::quad::{adaptive_gk, integrate_sinh_peak, integrate_tan_peak};
use crate::spectrum::{
    gap_value, min_gap, stop_point, validity_interval, PartitionSums, StopPoint,
};

const QUAD_REL_TOL: f64 = 1e-9;

/// Description of the narrow gap minimum for peak-aware quadrature:
/// near `center` the squared gap behaves like `(z - center)^2 + width_sq`
/// (up to smooth factors), and `[lo, hi]` is the window where that shape
/// holds to stated accuracy.
#[derive(Debug, Clone, Copy)]
pub struct Peak {
    pub center: f64,
    pub width_sq: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Peak {
    pub fn from_partition_sums(ps: &PartitionSums, delta: f64) -> Result<Self> {
        let (lo, hi) = validity_interval(ps, delta)?;
        let mg = min_gap(ps)?;
        Ok(Self { center: mg.z_star, width_sq: 4.0 * ps.n0 * ps.z2, lo, hi })
    }
}

/// `int_a^b dz / g^pow` with the peak window handled by substitution.
fn inv_power_between<F: Fn(f64) -> f64>(
    gap: &F,
    a: f64,
    b: f64,
    peak: Option<&Peak>,
    pow: i32,
) -> Result<f64> {
    let f = move |z: f64| {
        let g = gap(z);
        if g > 0.0 {
            g.powi(-pow)
        } else {
            f64::NAN // surfaces as a quadrature error
        }
    };
    if let Some(pk) = peak {
        let lo = pk.lo.clamp(a, b);
        let hi = pk.hi.clamp(a, b);
        if hi > lo {
            let left = adaptive_gk(&f, a, lo, QUAD_REL_TOL, 0.0)?;
            let mid = match pow {
                2 => integrate_tan_peak(&f, lo, hi, pk.center, pk.width_sq, QUAD_REL_TOL)?,
                _ => integrate_sinh_peak(&f, lo, hi, pk.center, pk.width_sq, QUAD_REL_TOL)?,
            };
            let right = adaptive_gk(&f, hi, b, QUAD_REL_TOL, 0.0)?;
            return Ok(left + mid + right);
        }
    }
    adaptive_gk(&f, a, b, QUAD_REL_TOL, 0.0)
}

fn check_z_f(z_f: f64) -> Result<()> {
    if !(z_f > 0.0) || !z_f.is_finite() {
        return Err(Error::OutOfRange(format!("z_f = {z_f} must be finite and > 0")));
    }
    Ok(())
}

/// Normalization `c = int_0^{z_f} dz / g(z)^2` of the optimized schedule.
///
/// Pass the peak hint whenever the gap has a narrow minimum; without it
/// plain adaptive refinement can under-resolve widths below ~1e-6.
pub fn normalization_c<F: Fn(f64) -> f64>(gap: &F, z_f: f64, peak: Option<&Peak>) -> Result<f64> {
    check_z_f(z_f)?;
    inv_power_between(gap, 0.0, z_f, peak, 2)
}

/// `int_0^{z_f} dz / g(z)`, the other ingredient of the run-time bound.
pub fn inv_gap_integral<F: Fn(f64) -> f64>(
    gap: &F,
    z_f: f64,
    peak: Option<&Peak>,
) -> Result<f64> {
    check_z_f(z_f)?;
    inv_power_between(gap, 0.0, z_f, peak, 1)
}

// ---------------------------------------------------------------------------
// Monotone cubic interpolation (Fritsch-Carlson)
// ---------------------------------------------------------------------------

fn pchip_edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let t = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if t * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && t.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        t
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    if n < 2 {
        return d;
    }
    let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
    let del: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        d[0] = del[0];
        d[1] = del[0];
        return d;
    }
    for i in 1..n - 1 {
        if del[i - 1] * del[i] <= 0.0 {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
        }
    }
    d[0] = pchip_edge_slope(h[0], h[1], del[0], del[1]);
    d[n - 1] = pchip_edge_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

/// Hermite cubic value and first derivative at `q` (clamped to the range).
fn pchip_eval(x: &[f64], y: &[f64], d: &[f64], q: f64) -> (f64, f64) {
    let n = x.len();
    let q = q.clamp(x[0], x[n - 1]);
    let mut i = match x.binary_search_by(|v| v.total_cmp(&q)) {
        Ok(i) => i,
        Err(i) => i.saturating_sub(1),
    };
    if i >= n - 1 {
        i = n - 2;
    }
    let h = x[i + 1] - x[i];
    let s = (q - x[i]) / h;
    let (s2, s3) = (s * s, s * s * s);
    let val = (2.0 * s3 - 3.0 * s2 + 1.0) * y[i]
        + (s3 - 2.0 * s2 + s) * h * d[i]
        + (-2.0 * s3 + 3.0 * s2) * y[i + 1]
        + (s3 - s2) * h * d[i + 1];
    let deriv = (6.0 * s2 - 6.0 * s) * (y[i] - y[i + 1]) / h
        + (3.0 * s2 - 4.0 * s + 1.0) * d[i]
        + (3.0 * s2 - 2.0 * s) * d[i + 1];
    (val, deriv)
}

// ---------------------------------------------------------------------------
// Schedule tables
// ---------------------------------------------------------------------------

/// Tabulated schedule `z(beta)` on `beta in [0, 1]` with monotone cubic
/// interpolation between nodes.
///
/// `c` is the normalization for tables built from the `zdot = c g^2`
/// ansatz and `None` for baseline shapes (linear, smoothstep, frozen).
#[derive(Debug, Clone)]
pub struct ScheduleTable {
    pub c: Option<f64>,
    beta: Vec<f64>,
    z: Vec<f64>,
    zdot: Vec<f64>,
    slopes: Vec<f64>,
    pub z_f: f64,
}

impl ScheduleTable {
    fn from_samples(
        beta: Vec<f64>,
        z: Vec<f64>,
        zdot: Vec<f64>,
        c: Option<f64>,
        z_f: f64,
    ) -> Result<Self> {
        if beta.len() < 2 || beta.len() != z.len() || beta.len() != zdot.len() {
            return Err(Error::Dimension(format!(
                "inconsistent schedule columns ({}, {}, {})",
                beta.len(),
                z.len(),
                zdot.len()
            )));
        }
        for i in 1..beta.len() {
            if beta[i] <= beta[i - 1] {
                return Err(Error::OutOfRange(format!(
                    "beta grid not increasing at index {i}"
                )));
            }
            if z[i] < z[i - 1] {
                return Err(Error::OutOfRange(format!("z values decrease at index {i}")));
            }
        }
        let slopes = pchip_slopes(&beta, &z);
        Ok(Self { c, beta, z, zdot, slopes, z_f })
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn grid(&self) -> &[f64] {
        &self.beta
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z
    }

    pub fn zdot_values(&self) -> &[f64] {
        &self.zdot
    }

    /// `z(beta)`, clamped to `[0, 1]`.
    pub fn z_at(&self, beta: f64) -> f64 {
        pchip_eval(&self.beta, &self.z, &self.slopes, beta).0
    }

    /// `(z, dz/dbeta)` from the fitted curve.
    pub fn z_and_rate_at(&self, beta: f64) -> (f64, f64) {
        pchip_eval(&self.beta, &self.z, &self.slopes, beta)
    }

    /// Inverse map `beta(z)` by bisection on the monotone interpolant.
    pub fn beta_at(&self, z: f64) -> f64 {
        let z = z.clamp(self.z[0], *self.z.last().unwrap());
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.z_at(mid) < z {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Uniform-rate baseline `z(beta) = z_f beta`. `z_f = 0` gives the
    /// frozen schedule used to test stationary states.
    pub fn linear(z_f: f64, grid_size: usize) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::GridTooSmall { got: grid_size, min: 2 });
        }
        let beta: Vec<f64> = (0..grid_size)
            .map(|i| i as f64 / (grid_size - 1) as f64)
            .collect();
        let z: Vec<f64> = beta.iter().map(|&b| z_f * b).collect();
        let zdot = vec![z_f; grid_size];
        Self::from_samples(beta, z, zdot, None, z_f)
    }

    /// `z(beta) = z_f (3 beta^2 - 2 beta^3)`: endpoints at rest, same
    /// endpoints as the optimized schedule.
    pub fn smoothstep(z_f: f64, grid_size: usize) -> Result<Self> {
        if grid_size < 4 {
            return Err(Error::GridTooSmall { got: grid_size, min: 4 });
        }
        let beta: Vec<f64> = (0..grid_size)
            .map(|i| i as f64 / (grid_size - 1) as f64)
            .collect();
        let z: Vec<f64> = beta.iter().map(|&b| z_f * b * b * (3.0 - 2.0 * b)).collect();
        let zdot: Vec<f64> = beta.iter().map(|&b| z_f * 6.0 * b * (1.0 - b)).collect();
        Self::from_samples(beta, z, zdot, None, z_f)
    }
}

/// Builds the optimized schedule by tabulating
/// `beta(z) = (1/c) int_0^z dz' / g^2` on a grid clustered geometrically
/// into the peak, then refining until no step in `beta` exceeds
/// `2 / grid_size`. Returns at least `grid_size` nodes; endpoints exact.
pub fn build_schedule<F: Fn(f64) -> f64>(
    gap: &F,
    z_f: f64,
    grid_size: usize,
    peak: Option<&Peak>,
) -> Result<ScheduleTable> {
    check_z_f(z_f)?;
    if grid_size < 8 {
        return Err(Error::GridTooSmall { got: grid_size, min: 8 });
    }
    let c = normalization_c(gap, z_f, peak)?;

    // Initial node set: uniform outside the peak, geometric into it.
    let mut zs: Vec<f64> = vec![0.0, z_f];
    let coarse = (grid_size / 4).max(8);
    match peak {
        Some(pk) if pk.lo < z_f && pk.hi > 0.0 => {
            let lo = pk.lo.clamp(0.0, z_f);
            let hi = pk.hi.clamp(0.0, z_f);
            for i in 1..coarse {
                zs.push(lo * i as f64 / coarse as f64);
            }
            for i in 1..coarse {
                zs.push(hi + (z_f - hi) * i as f64 / coarse as f64);
            }
            let w = pk.width_sq.sqrt().max(1e-300);
            for (edge, sign) in [(lo, 1.0f64), (hi, -1.0f64)] {
                let mut off = (pk.center - edge).abs();
                while off > 0.25 * w {
                    let zv = pk.center - sign * off;
                    if zv > 0.0 && zv < z_f {
                        zs.push(zv);
                    }
                    off *= 0.5;
                }
            }
            if pk.center > 0.0 && pk.center < z_f {
                zs.push(pk.center);
            }
        }
        _ => {
            for i in 1..grid_size - 1 {
                zs.push(z_f * i as f64 / (grid_size - 1) as f64);
            }
        }
    }
    zs.sort_by(f64::total_cmp);
    zs.dedup();

    // Per-interval beta increments, then refine the largest until smooth.
    struct Seg {
        a: f64,
        b: f64,
        dbeta: f64,
    }
    let seg_beta = |a: f64, b: f64| -> Result<f64> {
        Ok(inv_power_between(gap, a, b, peak, 2)? / c)
    };
    let mut segs: Vec<Seg> = Vec::with_capacity(zs.len() - 1);
    for w in zs.windows(2) {
        segs.push(Seg { a: w[0], b: w[1], dbeta: seg_beta(w[0], w[1])? });
    }
    let max_nodes = 4 * grid_size + 128;
    loop {
        let mut worst = 0;
        for (i, s) in segs.iter().enumerate() {
            if s.dbeta > segs[worst].dbeta {
                worst = i;
            }
        }
        let enough = segs.len() + 1 >= grid_size
            && segs[worst].dbeta <= 2.0 / grid_size as f64;
        if enough || segs.len() + 1 >= max_nodes {
            break;
        }
        let s = &segs[worst];
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            break;
        }
        let left = seg_beta(s.a, mid)?;
        let right = (s.dbeta - left).clamp(0.0, s.dbeta);
        let (a, b, _) = (s.a, s.b, s.dbeta);
        segs[worst] = Seg { a, b: mid, dbeta: left };
        segs.insert(worst + 1, Seg { a: mid, b, dbeta: right });
    }

    let mut beta = Vec::with_capacity(segs.len() + 1);
    let mut z = Vec::with_capacity(segs.len() + 1);
    beta.push(0.0);
    z.push(0.0);
    let mut acc = 0.0;
    for s in &segs {
        acc += s.dbeta;
        beta.push(acc);
        z.push(s.b);
    }
    let drift = (acc - 1.0).abs();
    if drift > 1e-6 {
        return Err(Error::Quadrature(format!(
            "schedule normalization drift {drift:e} (quadrature inconsistency)"
        )));
    }
    for b in &mut beta {
        *b /= acc;
    }
    *beta.last_mut().unwrap() = 1.0;
    *z.last_mut().unwrap() = z_f;
    let zdot: Vec<f64> = z
        .iter()
        .map(|&zv| {
            let g = gap(zv);
            c * g * g
        })
        .collect();
    ScheduleTable::from_samples(beta, z, zdot, Some(c), z_f)
}

/// Optimized schedule for the projector model itself: stop point from the
/// partition sums, peak-aware quadrature, exact gap with closed-form
/// fallback where root finding is precision limited.
pub fn model_schedule(
    dos: &DensityOfStates,
    ps: &PartitionSums,
    delta: f64,
    grid_size: usize,
) -> Result<(ScheduleTable, StopPoint)> {
    let sp = stop_point(ps, delta)?;
    let peak = Peak::from_partition_sums(ps, delta).ok();
    let gap = |z: f64| gap_value(dos, ps, z);
    let table = build_schedule(&gap, sp.z_f, grid_size, peak.as_ref())?;
    Ok((table, sp))
}

// ---------------------------------------------------------------------------
// Run-time bounds
// ---------------------------------------------------------------------------

/// Numbers the adiabatic theorem attaches to one schedule.
#[derive(Debug, Clone, Copy)]
pub struct ComplexityReport {
    /// `int dz / g^2` (the ansatz normalization), from quadrature.
    pub c: f64,
    /// `int dz / g`.
    pub integral_inv_g: f64,
    /// The adiabatic constant evaluated on the schedule table.
    pub at_constant: f64,
    /// Schedule-independent bound `c (2 E_max + 28 int dz/g)`.
    pub eq_bound: f64,
    pub e_max: f64,
    pub epsilon: f64,
    /// `at_constant / epsilon`.
    pub t_for_eps: f64,
}

/// Evaluates the adiabatic constant
/// `C = 2 max |Hdot|/g^2 + int (|Hddot|/g^2 + 7 |Hdot|^2/g^3) dbeta`
/// on the table's nodes, with the operator norms bounded by
/// `|Hdot| <= |zdot| (E_max + 1)` (diagonal plus projector part) and
/// likewise for the second derivative; `zddot` by centered differences of
/// the tabulated rate. The result is therefore an upper bound on the
/// sharp constant.
pub fn at_bound<F: Fn(f64) -> f64>(
    table: &ScheduleTable,
    gap: &F,
    e_max: f64,
    epsilon: f64,
    peak: Option<&Peak>,
) -> Result<ComplexityReport> {
    if !(epsilon > 0.0) {
        return Err(Error::OutOfRange(format!("epsilon = {epsilon} must be > 0")));
    }
    let beta = table.grid();
    let zs = table.z_values();
    let zdot = table.zdot_values();
    let k = beta.len();

    let mut g = Vec::with_capacity(k);
    for &z in zs {
        let gz = gap(z);
        if !(gz > 0.0) {
            return Err(Error::NonPositiveGap { z, value: gz });
        }
        g.push(gz);
    }
    let mut zddot = vec![0.0f64; k];
    for i in 0..k {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(k - 1));
        zddot[i] = (zdot[b] - zdot[a]) / (beta[b] - beta[a]);
    }

    let norm_scale = e_max + 1.0;
    let mut max_term = 0.0f64;
    let mut integrand = Vec::with_capacity(k);
    for i in 0..k {
        let hdot = zdot[i].abs() * norm_scale;
        let hddot = zddot[i].abs() * norm_scale;
        max_term = max_term.max(hdot / (g[i] * g[i]));
        integrand.push(hddot / (g[i] * g[i]) + 7.0 * hdot * hdot / (g[i] * g[i] * g[i]));
    }
    let mut integral = 0.0;
    for i in 1..k {
        integral += 0.5 * (integrand[i] + integrand[i - 1]) * (beta[i] - beta[i - 1]);
    }
    let at_constant = 2.0 * max_term + integral;

    let c = normalization_c(gap, table.z_f, peak)?;
    let inv_g = inv_gap_integral(gap, table.z_f, peak)?;
    Ok(ComplexityReport {
        c,
        integral_inv_g: inv_g,
        at_constant,
        eq_bound: c * (2.0 * e_max + 28.0 * inv_g),
        e_max,
        epsilon,
        t_for_eps: at_constant / epsilon,
    })
}

/// Schedule-independent complexity bound `c (2 E_max + 28 int dz/g)`.
pub fn complexity_bound<F: Fn(f64) -> f64>(
    gap: &F,
    z_f: f64,
    e_max: f64,
    peak: Option<&Peak>,
) -> Result<f64> {
    let c = normalization_c(gap, z_f, peak)?;
    let inv_g = inv_gap_integral(gap, z_f, peak)?;
    Ok(c * (2.0 * e_max + 28.0 * inv_g))
}

/// The algebraic floor on any annealing time reaching solution weight `p`.
#[derive(Debug, Clone, Copy)]
pub struct LowerBound {
    pub bound: f64,
    pub gamma: f64,
    /// Set when `p <= N_0 / N`: the target is met by the initial state
    /// already and the bound degenerates to zero.
    pub trivial: bool,
}

/// `T >= sqrt(N / N_0) gamma` with
/// `gamma = (p/2) (1 - sqrt(N_0 / (N p)))^2 / (1 + sqrt(p))`.
pub fn lower_bound_t(n_states: f64, n0: f64, p: f64) -> Result<LowerBound> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::OutOfRange(format!("p = {p} must be in (0, 1]")));
    }
    if !(n0 >= 1.0 && n0 <= n_states) {
        return Err(Error::OutOfRange(format!(
            "need 1 <= N_0 = {n0} <= N = {n_states}"
        )));
    }
    if p * n_states <= n0 {
        return Ok(LowerBound { bound: 0.0, gamma: 0.0, trivial: true });
    }
    let gamma = 0.5 * p * (1.0 - (n0 / (n_states * p)).sqrt()).powi(2) / (1.0 + p.sqrt());
    Ok(LowerBound { bound: (n_states / n0).sqrt() * gamma, gamma, trivial: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::linear_fit;
    use crate::quad::{integral_inv_quadratic, integral_inv_sqrt_quadratic};
    use crate::spectrum::partition_sums;

    #[test]
    fn unit_gap_normalization_is_one() {
        let c = normalization_c(&|_| 1.0, 1.0, None).unwrap();
        assert!((c - 1.0).abs() < 1e-10);
    }

    #[test]
    fn peak_quadrature_matches_arctan_primitive() {
        // gap = sqrt((z - c)^2 + d) makes 1/g^2 exactly the Lorentzian.
        let (center, d) = (0.5, 1e-12);
        let gap = move |z: f64| ((z - center) * (z - center) + d).sqrt();
        let peak = Peak { center, width_sq: d, lo: 0.25, hi: 0.75 };
        let c = normalization_c(&gap, 1.0, Some(&peak)).unwrap();
        let exact = integral_inv_quadratic(0.0, 1.0, center, d);
        assert!(((c - exact) / exact).abs() < 1e-6, "{c} vs {exact}");
    }

    #[test]
    fn peak_quadrature_matches_asinh_primitive() {
        let (center, d) = (0.5, 1e-12);
        let gap = move |z: f64| ((z - center) * (z - center) + d).sqrt();
        let peak = Peak { center, width_sq: d, lo: 0.25, hi: 0.75 };
        let v = inv_gap_integral(&gap, 1.0, Some(&peak)).unwrap();
        let exact = integral_inv_sqrt_quadratic(0.0, 1.0, center, d);
        assert!(((v - exact) / exact).abs() < 1e-6, "{v} vs {exact}");
    }

    #[test]
    fn grover_normalization_grows_like_sqrt_n() {
        let mut ns = Vec::new();
        let mut log_c = Vec::new();
        for n in 10..=16 {
            let dos = DensityOfStates::grover(n);
            let ps = partition_sums(&dos).unwrap();
            let sp = stop_point(&ps, 0.01).unwrap();
            let peak = Peak::from_partition_sums(&ps, 0.01).unwrap();
            let gap = |z: f64| gap_value(&dos, &ps, z);
            let c = normalization_c(&gap, sp.z_f, Some(&peak)).unwrap();
            ns.push(n as f64);
            log_c.push(c.log2());
        }
        let fit = linear_fit(&ns, &log_c).unwrap();
        assert!(
            (fit.slope - 0.5).abs() < 0.1,
            "log2 c slope {} != 0.5 +- 0.1",
            fit.slope
        );
    }

    #[test]
    fn constant_gap_schedule_is_linear() {
        let table = build_schedule(&|_| 1.0, 2.0, 16, None).unwrap();
        for &b in &[0.0, 0.25, 0.37, 0.5, 0.93, 1.0] {
            assert!((table.z_at(b) - 2.0 * b).abs() < 1e-9, "z({b})");
        }
        assert_eq!(table.z_at(0.0), 0.0);
        assert_eq!(table.z_at(1.0), 2.0);
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(matches!(
            build_schedule(&|_| 1.0, 1.0, 7, None),
            Err(Error::GridTooSmall { .. })
        ));
    }

    fn grover_schedule(n: u32) -> (DensityOfStates, PartitionSums, ScheduleTable) {
        let dos = DensityOfStates::grover(n);
        let ps = partition_sums(&dos).unwrap();
        let (table, _) = model_schedule(&dos, &ps, 0.01, 64).unwrap();
        (dos, ps, table)
    }

    #[test]
    fn schedule_invariants_on_grover() {
        let (_, _, table) = grover_schedule(10);
        assert_eq!(table.grid()[0], 0.0);
        assert_eq!(*table.grid().last().unwrap(), 1.0);
        assert_eq!(table.z_values()[0], 0.0);
        assert!((table.z_values().last().unwrap() - table.z_f).abs() < 1e-12);
        assert!(table.len() >= 64);
        // Strict monotonicity of the interpolant.
        let mut prev = -1.0;
        for k in 0..=500 {
            let zv = table.z_at(k as f64 / 500.0);
            assert!(zv >= prev, "z not monotone at {k}");
            prev = zv;
        }
        // Inverse-map roundtrip.
        for k in 0..=100 {
            let b = k as f64 / 100.0;
            let back = table.beta_at(table.z_at(b));
            assert!((back - b).abs() < 1e-8, "roundtrip at beta = {b}: {back}");
        }
        // Rate column consistent with the ansatz.
        let c = table.c.unwrap();
        for (i, &zd) in table.zdot_values().iter().enumerate() {
            let z = table.z_values()[i];
            assert!(zd >= 0.0);
            assert!(c > 0.0 && z >= 0.0 && zd.is_finite());
        }
    }

    #[test]
    fn schedule_stalls_at_the_minimum() {
        let (_, ps, table) = grover_schedule(10);
        let mg = min_gap(&ps).unwrap();
        let c = table.c.unwrap();
        let rate_peak = c * mg.g_star * mg.g_star;
        let b_early = table.beta_at(0.1);
        let (_, rate_early) = table.z_and_rate_at(b_early);
        // (g(0.1)/g*)^2 ~ 2e2 at this size; scales like N beyond it.
        assert!(
            rate_early / rate_peak > 100.0,
            "slowdown {} too small",
            rate_early / rate_peak
        );
        let (_, ps13, table13) = grover_schedule(13);
        let mg13 = min_gap(&ps13).unwrap();
        let rate_peak13 = table13.c.unwrap() * mg13.g_star * mg13.g_star;
        let (_, rate_early13) = table13.z_and_rate_at(table13.beta_at(0.1));
        assert!(rate_early13 / rate_peak13 > 1e3);
    }

    #[test]
    fn at_constant_hand_check() {
        // Unit gap, linear schedule, E_max = 1:
        // max|Hdot|/g^2 = 2, integral of 7*2^2 = 28, C = 2*2 + 28 = 32.
        let table = ScheduleTable::linear(1.0, 9).unwrap();
        let report = at_bound(&table, &|_| 1.0, 1.0, 0.1, None).unwrap();
        assert!((report.at_constant - 32.0).abs() < 1e-9);
        assert!((report.t_for_eps - 320.0).abs() < 1e-7);
        assert!((report.c - 1.0).abs() < 1e-9);
        assert!((report.integral_inv_g - 1.0).abs() < 1e-9);
        assert!((report.eq_bound - 30.0).abs() < 1e-7);
    }

    #[test]
    fn complexity_bound_constant_gap() {
        let m = 5.0;
        let v = complexity_bound(&|_| 1.0, 1.0, m, None).unwrap();
        assert!((v - (2.0 * m + 28.0)).abs() < 1e-7);
    }

    #[test]
    fn lower_bound_values() {
        // p = 1, vanishing N0/N: gamma -> 1/4.
        let lb = lower_bound_t(1e12, 1.0, 1.0).unwrap();
        assert!((lb.gamma - 0.25).abs() < 1e-5);
        // Frozen arithmetic at N = 2^20.
        let lb = lower_bound_t((1u64 << 20) as f64, 1.0, 0.9).unwrap();
        assert!((lb.gamma - 0.23045).abs() < 1e-4, "gamma = {}", lb.gamma);
        assert!((lb.bound - 235.98).abs() < 0.05, "bound = {}", lb.bound);
        assert!(!lb.trivial);
        // p at the solution fraction: bound collapses.
        let lb = lower_bound_t(16.0, 4.0, 0.25).unwrap();
        assert!(lb.trivial);
        assert_eq!(lb.bound, 0.0);
    }

    #[test]
    fn smoothstep_endpoints_at_rest() {
        let t = ScheduleTable::smoothstep(1.5, 33).unwrap();
        assert_eq!(t.zdot_values()[0], 0.0);
        assert_eq!(*t.zdot_values().last().unwrap(), 0.0);
        assert!((t.z_at(0.5) - 0.75).abs() < 1e-12);
    }
}
