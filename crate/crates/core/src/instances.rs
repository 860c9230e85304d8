//! Problem instances and their densities of states.
//!
//! Three instance kinds share one interface: random 3-SAT (energy = number
//! of violated clauses), the 3-spin model (energy = sum of three-body
//! couplings, possibly negative), and explicit energy tables. States are
//! spin vectors `s in {+1, -1}^n`; the packed-bit convention used throughout
//! is bit `i` of a state word set iff `s_i = -1`, so state word 0 is the
//! all-`+1` assignment.
//!
//! A clause with literals `(v_a, J_a)` is violated exactly when `s_{v_a} =
//! J_a` for all three literals, i.e. its violation indicator is
//! `prod_a (1 + J_a s_{v_a}) / 2`. A uniformly random assignment violates a
//! clause with probability 1/8.

use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from, split_seed};

/// Largest `n` for which full state enumeration is attempted by default.
pub const DEFAULT_ENUM_LIMIT: u32 = 30;

/// One 3-SAT clause: three `(variable, sign)` literals with distinct
/// variables and signs in `{+1, -1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub lits: [(u32, i8); 3],
}

/// One 3-spin coupling `J s_i s_j s_k` with `i < j < k` and `J` in
/// `{+1, -1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coupling {
    pub sites: [u32; 3],
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstanceKind {
    Sat3(Vec<Clause>),
    ThreeSpin(Vec<Coupling>),
    Explicit(Vec<u32>),
}

/// A diagonal cost Hamiltonian on `n` spins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemInstance {
    n: u32,
    kind: InstanceKind,
    /// Generator seed, recorded for provenance when the instance was drawn.
    pub seed: Option<u64>,
}

impl ProblemInstance {
    pub fn sat3(n: u32, clauses: Vec<Clause>) -> Result<Self> {
        let inst = Self { n, kind: InstanceKind::Sat3(clauses), seed: None };
        inst.validate()?;
        Ok(inst)
    }

    pub fn three_spin(n: u32, couplings: Vec<Coupling>) -> Result<Self> {
        let inst = Self { n, kind: InstanceKind::ThreeSpin(couplings), seed: None };
        inst.validate()?;
        Ok(inst)
    }

    pub fn explicit(n: u32, energies: Vec<u32>) -> Result<Self> {
        let inst = Self { n, kind: InstanceKind::Explicit(energies), seed: None };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn kind(&self) -> &InstanceKind {
        &self.kind
    }

    /// Number of clauses (`Sat3` only).
    pub fn num_clauses(&self) -> Option<usize> {
        match &self.kind {
            InstanceKind::Sat3(c) => Some(c.len()),
            _ => None,
        }
    }

    /// Largest energy the instance can produce.
    pub fn max_energy(&self) -> i64 {
        match &self.kind {
            InstanceKind::Sat3(c) => c.len() as i64,
            InstanceKind::ThreeSpin(c) => c.len() as i64,
            InstanceKind::Explicit(t) => t.iter().copied().max().unwrap_or(0) as i64,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 || n > 63 {
            return Err(Error::InvalidInstance(format!("n = {n} out of range 1..=63")));
        }
        match &self.kind {
            InstanceKind::Sat3(clauses) => {
                for cl in clauses {
                    let [(a, sa), (b, sb), (c, sc)] = cl.lits;
                    if a >= n || b >= n || c >= n {
                        return Err(Error::InvalidInstance(format!(
                            "clause variable out of range in {cl:?} (n = {n})"
                        )));
                    }
                    if a == b || a == c || b == c {
                        return Err(Error::InvalidInstance(format!(
                            "repeated variable in clause {cl:?}"
                        )));
                    }
                    for s in [sa, sb, sc] {
                        if s != 1 && s != -1 {
                            return Err(Error::InvalidInstance(format!(
                                "clause sign {s} is not +1/-1"
                            )));
                        }
                    }
                }
            }
            InstanceKind::ThreeSpin(couplings) => {
                if n < 3 {
                    return Err(Error::InvalidInstance("3-spin model needs n >= 3".into()));
                }
                for cp in couplings {
                    let [i, j, k] = cp.sites;
                    if !(i < j && j < k && k < n) {
                        return Err(Error::InvalidInstance(format!(
                            "coupling sites {:?} must satisfy i < j < k < n",
                            cp.sites
                        )));
                    }
                    if cp.sign != 1 && cp.sign != -1 {
                        return Err(Error::InvalidInstance(format!(
                            "coupling sign {} is not +1/-1",
                            cp.sign
                        )));
                    }
                }
            }
            InstanceKind::Explicit(table) => {
                if n > DEFAULT_ENUM_LIMIT {
                    return Err(Error::EnumerationLimit { n, limit: DEFAULT_ENUM_LIMIT });
                }
                let want = 1usize << n;
                if table.len() != want {
                    return Err(Error::InvalidInstance(format!(
                        "explicit table has {} entries, expected 2^{n} = {want}",
                        table.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Energy of a packed state word (bit `i` set iff `s_i = -1`).
    pub fn energy_bits(&self, state: u64) -> i64 {
        match &self.kind {
            InstanceKind::Sat3(clauses) => {
                let mut e = 0i64;
                for cl in clauses {
                    let (mask, target) = cl.mask_target();
                    e += (state & mask == target) as i64;
                }
                e
            }
            InstanceKind::ThreeSpin(couplings) => {
                let mut e = 0i64;
                for cp in couplings {
                    let mask = cp.mask();
                    let parity = (state & mask).count_ones() & 1;
                    let prod = 1 - 2 * parity as i64;
                    e += cp.sign as i64 * prod;
                }
                e
            }
            InstanceKind::Explicit(table) => table[state as usize] as i64,
        }
    }

    /// Energy of a `{+1, -1}` spin vector.
    pub fn energy_spins(&self, spins: &[i8]) -> Result<i64> {
        if spins.len() != self.n as usize {
            return Err(Error::SpinLength { expected: self.n as usize, got: spins.len() });
        }
        let mut state = 0u64;
        for (i, &s) in spins.iter().enumerate() {
            match s {
                1 => {}
                -1 => state |= 1 << i,
                other => return Err(Error::BadSpin(other)),
            }
        }
        Ok(self.energy_bits(state))
    }
}

impl Clause {
    /// `(mask, target)` such that the clause is violated iff
    /// `state & mask == target`.
    fn mask_target(&self) -> (u64, u64) {
        let mut mask = 0u64;
        let mut target = 0u64;
        for (v, s) in self.lits {
            mask |= 1 << v;
            if s < 0 {
                target |= 1 << v;
            }
        }
        (mask, target)
    }
}

impl Coupling {
    fn mask(&self) -> u64 {
        self.sites.iter().fold(0u64, |m, &v| m | (1 << v))
    }
}

/// Spin vector for a packed state word under the bit convention above.
pub fn spins_from_bits(n: u32, state: u64) -> Vec<i8> {
    (0..n).map(|i| if state >> i & 1 == 1 { -1 } else { 1 }).collect()
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Uniform random 3-SAT: each of the `m` clauses picks 3 distinct variables
/// and independent signs. Clauses may repeat across the instance.
pub fn gen_sat3(n: u32, m: usize, seed: u64) -> Result<ProblemInstance> {
    if n < 3 {
        return Err(Error::InvalidInstance("3-SAT needs n >= 3".into()));
    }
    let mut rng = rng_from(seed);
    let mut clauses = Vec::with_capacity(m);
    for _ in 0..m {
        let picked = rand::seq::index::sample(&mut rng, n as usize, 3);
        let mut vars: Vec<u32> = picked.iter().map(|v| v as u32).collect();
        vars.sort_unstable();
        let mut lits = [(0u32, 0i8); 3];
        for (slot, &v) in lits.iter_mut().zip(&vars) {
            let sign: i8 = if rng.random::<bool>() { 1 } else { -1 };
            *slot = (v, sign);
        }
        clauses.push(Clause { lits });
    }
    Ok(ProblemInstance::sat3(n, clauses)?.with_seed(seed))
}

/// 3-spin model with every triple `i < j < k` coupled by an independent
/// `J = +1/-1`.
pub fn gen_three_spin(n: u32, seed: u64) -> Result<ProblemInstance> {
    if n < 3 {
        return Err(Error::InvalidInstance("3-spin model needs n >= 3".into()));
    }
    let mut rng = rng_from(seed);
    let mut couplings = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let sign: i8 = if rng.random::<bool>() { 1 } else { -1 };
                couplings.push(Coupling { sites: [i, j, k], sign });
            }
        }
    }
    Ok(ProblemInstance::three_spin(n, couplings)?.with_seed(seed))
}

/// Unstructured-search energy table: 0 at `marked`, 1 elsewhere.
pub fn grover_explicit(n: u32, marked: u64) -> Result<ProblemInstance> {
    if n > DEFAULT_ENUM_LIMIT {
        return Err(Error::EnumerationLimit { n, limit: DEFAULT_ENUM_LIMIT });
    }
    let size = 1usize << n;
    if marked as usize >= size {
        return Err(Error::InvalidInstance(format!("marked state {marked} >= 2^{n}")));
    }
    let mut table = vec![1u32; size];
    table[marked as usize] = 0;
    ProblemInstance::explicit(n, table)
}

// ---------------------------------------------------------------------------
// Density of states
// ---------------------------------------------------------------------------

/// Shell counts `N_E` for `E = 0 ..= m`, with `sum_E N_E = 2^n`.
///
/// Counts are `u128` so that surrogate densities at `n` up to 127 qubits
/// keep the exact total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DosFile", into = "DosFile")]
pub struct DensityOfStates {
    n: u32,
    counts: Vec<u128>,
}

#[derive(Serialize, Deserialize, Clone)]
struct DosFile {
    n: u32,
    counts: Vec<u128>,
}

impl TryFrom<DosFile> for DensityOfStates {
    type Error = Error;
    fn try_from(f: DosFile) -> Result<Self> {
        DensityOfStates::new(f.n, f.counts)
    }
}

impl From<DensityOfStates> for DosFile {
    fn from(d: DensityOfStates) -> Self {
        DosFile { n: d.n, counts: d.counts }
    }
}

/// Non-empty energy shells of a density of states, sorted by energy.
#[derive(Debug, Clone)]
pub struct Shells {
    /// Distinct energies `E_i` with `N_{E_i} > 0`, ascending.
    pub energies: Vec<f64>,
    /// Integer energies matching `energies`.
    pub raw_energies: Vec<u32>,
    /// Shell counts `N_{E_i}`.
    pub counts: Vec<u128>,
    /// Shell fractions `n_{E_i} = N_{E_i} / 2^n`.
    pub fracs: Vec<f64>,
}

impl Shells {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

impl DensityOfStates {
    pub fn new(n: u32, counts: Vec<u128>) -> Result<Self> {
        if n == 0 || n > 127 {
            return Err(Error::InvalidDos(format!("n = {n} out of range 1..=127")));
        }
        if counts.is_empty() {
            return Err(Error::InvalidDos("empty count vector".into()));
        }
        let mut total: u128 = 0;
        for &c in &counts {
            total = total
                .checked_add(c)
                .ok_or_else(|| Error::InvalidDos("count total overflows".into()))?;
        }
        let want = 1u128 << n;
        if total != want {
            return Err(Error::InvalidDos(format!(
                "counts sum to {total}, expected 2^{n} = {want}"
            )));
        }
        Ok(Self { n, counts })
    }

    /// `N_0 = 1`, `N_1 = 2^n - 1`: the unstructured-search density.
    pub fn grover(n: u32) -> Self {
        let total = 1u128 << n;
        Self { n, counts: vec![1, total - 1] }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn counts(&self) -> &[u128] {
        &self.counts
    }

    pub fn total(&self) -> u128 {
        1u128 << self.n
    }

    pub fn max_energy(&self) -> usize {
        self.counts.len() - 1
    }

    /// `N_0`: number of zero-energy states.
    pub fn ground_count(&self) -> u128 {
        self.counts[0]
    }

    /// Shell fraction `n_E` as a float.
    pub fn frac(&self, e: usize) -> f64 {
        if e < self.counts.len() {
            self.counts[e] as f64 / self.total() as f64
        } else {
            0.0
        }
    }

    /// All states are solutions; every spectral quantity degenerates.
    pub fn is_degenerate(&self) -> bool {
        self.counts[0] == self.total()
    }

    pub fn shells(&self) -> Shells {
        let total = self.total() as f64;
        let mut energies = Vec::new();
        let mut raw = Vec::new();
        let mut counts = Vec::new();
        let mut fracs = Vec::new();
        for (e, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                energies.push(e as f64);
                raw.push(e as u32);
                counts.push(c);
                fracs.push(c as f64 / total);
            }
        }
        Shells { energies, raw_energies: raw, counts, fracs }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

/// Chunk width for parallel state enumeration.
const ENUM_CHUNK_BITS: u32 = 16;

fn enumerate_counts(inst: &ProblemInstance, limit: u32) -> Result<Vec<u128>> {
    let n = inst.n;
    if n > limit {
        return Err(Error::EnumerationLimit { n, limit });
    }
    let size = 1u64 << n;
    let e_max = inst.max_energy();
    let width = e_max as usize + 1;
    let chunk = 1u64 << ENUM_CHUNK_BITS.min(n);
    let num_chunks = size.div_ceil(chunk);
    // Per-chunk histograms merged in chunk order; counts are integers, so
    // the result is independent of thread scheduling.
    let partials: Vec<Result<Vec<u64>>> = (0..num_chunks)
        .into_par_iter()
        .map(|ci| {
            let start = ci * chunk;
            let end = (start + chunk).min(size);
            let mut local = vec![0u64; width];
            for state in start..end {
                let e = inst.energy_bits(state);
                if e < 0 {
                    return Err(Error::NegativeEnergy { state, energy: e });
                }
                local[e as usize] += 1;
            }
            Ok(local)
        })
        .collect();
    let mut counts = vec![0u128; width];
    for part in partials {
        let part = part?;
        for (acc, v) in counts.iter_mut().zip(part) {
            *acc += v as u128;
        }
    }
    Ok(counts)
}

/// Exact density of states by full enumeration of all `2^n` states.
///
/// Energies must be non-negative; shift 3-spin instances first.
pub fn compute_dos(inst: &ProblemInstance) -> Result<DensityOfStates> {
    compute_dos_with_limit(inst, DEFAULT_ENUM_LIMIT)
}

pub fn compute_dos_with_limit(inst: &ProblemInstance, limit: u32) -> Result<DensityOfStates> {
    if let InstanceKind::Explicit(table) = &inst.kind {
        // The table is the enumeration.
        let width = inst.max_energy() as usize + 1;
        let mut counts = vec![0u128; width];
        for &e in table {
            counts[e as usize] += 1;
        }
        return DensityOfStates::new(inst.n, counts);
    }
    DensityOfStates::new(inst.n, enumerate_counts(inst, limit)?)
}

/// Minimum energy and its degeneracy, by full enumeration.
pub fn ground_state_stats(inst: &ProblemInstance, limit: u32) -> Result<(i64, u64)> {
    let n = inst.n;
    if n > limit {
        return Err(Error::EnumerationLimit { n, limit });
    }
    let size = 1u64 << n;
    let chunk = 1u64 << ENUM_CHUNK_BITS.min(n);
    let num_chunks = size.div_ceil(chunk);
    let partials: Vec<(i64, u64)> = (0..num_chunks)
        .into_par_iter()
        .map(|ci| {
            let start = ci * chunk;
            let end = (start + chunk).min(size);
            let mut best = i64::MAX;
            let mut count = 0u64;
            for state in start..end {
                let e = inst.energy_bits(state);
                if e < best {
                    best = e;
                    count = 1;
                } else if e == best {
                    count += 1;
                }
            }
            (best, count)
        })
        .collect();
    let best = partials.iter().map(|&(e, _)| e).min().unwrap();
    let count = partials.iter().filter(|&&(e, _)| e == best).map(|&(_, c)| c).sum();
    Ok((best, count))
}

/// Rewrites an instance as an explicit table shifted so the minimum energy
/// is 0. Returns the shifted instance and the applied shift
/// (`shift = -min_s E(s)`).
pub fn shift_to_nonneg(inst: &ProblemInstance) -> Result<(ProblemInstance, i64)> {
    let n = inst.n;
    if n > DEFAULT_ENUM_LIMIT {
        return Err(Error::EnumerationLimit { n, limit: DEFAULT_ENUM_LIMIT });
    }
    let (min_e, _) = ground_state_stats(inst, DEFAULT_ENUM_LIMIT)?;
    let shift = -min_e;
    let size = 1u64 << n;
    let mut table = Vec::with_capacity(size as usize);
    for state in 0..size {
        let e = inst.energy_bits(state) + shift;
        debug_assert!(e >= 0);
        table.push(u32::try_from(e).map_err(|_| {
            Error::InvalidInstance(format!("shifted energy {e} exceeds u32 range"))
        })?);
    }
    let mut shifted = ProblemInstance::explicit(n, table)?;
    shifted.seed = inst.seed;
    Ok((shifted, shift))
}

/// Full energy table over all `2^n` packed states, as floats.
pub fn energy_table(inst: &ProblemInstance, limit: u32) -> Result<Vec<f64>> {
    let n = inst.n;
    if n > limit {
        return Err(Error::EnumerationLimit { n, limit });
    }
    let size = 1u64 << n;
    Ok((0..size).map(|s| inst.energy_bits(s) as f64).collect())
}

// ---------------------------------------------------------------------------
// Rejection sampling of unique-solution instances
// ---------------------------------------------------------------------------

/// What [`filter_unique`] should draw on each attempt.
#[derive(Debug, Clone, Copy)]
pub enum GeneratorSpec {
    Sat3 { n: u32, m: usize },
    ThreeSpin { n: u32 },
}

impl GeneratorSpec {
    fn generate(&self, seed: u64) -> Result<ProblemInstance> {
        match *self {
            GeneratorSpec::Sat3 { n, m } => gen_sat3(n, m, seed),
            GeneratorSpec::ThreeSpin { n } => gen_three_spin(n, seed),
        }
    }
}

/// Instances accepted by the unique-ground-state filter, with the child
/// seed that produced each one.
#[derive(Debug, Clone)]
pub struct UniqueBatch {
    pub instances: Vec<(u64, ProblemInstance)>,
    pub attempts: u64,
    pub acceptance_rate: f64,
}

/// Draws instances until `count` of them have a unique minimum-energy state
/// (for 3-SAT: exactly one satisfying assignment), or the attempt cap is
/// reached. Attempt `i` uses child seed `split_seed(seed, i)`; accepted
/// instances are returned in attempt order, so the result is deterministic.
pub fn filter_unique(
    spec: GeneratorSpec,
    count: usize,
    seed: u64,
    attempt_cap: u64,
) -> Result<UniqueBatch> {
    const BATCH: u64 = 32;
    let mut accepted = Vec::with_capacity(count);
    let mut attempt = 0u64;
    while accepted.len() < count && attempt < attempt_cap {
        let hi = (attempt + BATCH).min(attempt_cap);
        let batch: Vec<Result<Option<(u64, ProblemInstance)>>> = (attempt..hi)
            .into_par_iter()
            .map(|i| {
                let child = split_seed(seed, i);
                let inst = spec.generate(child)?;
                let (min_e, degeneracy) = ground_state_stats(&inst, DEFAULT_ENUM_LIMIT)?;
                // 3-SAT additionally demands that the unique minimum is a
                // satisfying assignment; 3-spin energies are unconstrained.
                let satisfiable_ok =
                    !matches!(spec, GeneratorSpec::Sat3 { .. }) || min_e == 0;
                Ok((degeneracy == 1 && satisfiable_ok).then_some((child, inst)))
            })
            .collect();
        for item in batch {
            attempt += 1;
            if let Some(hit) = item? {
                accepted.push(hit);
                if accepted.len() == count {
                    break;
                }
            }
        }
    }
    if accepted.len() < count {
        return Err(Error::AttemptCap {
            requested: count,
            found: accepted.len(),
            attempts: attempt,
        });
    }
    let rate = accepted.len() as f64 / attempt as f64;
    Ok(UniqueBatch { instances: accepted, attempts: attempt, acceptance_rate: rate })
}

// ---------------------------------------------------------------------------
// Instance serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    kind: String,
    n: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    clauses: Option<Vec<[(u32, i8); 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    couplings: Option<Vec<(u32, u32, u32, i8)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    energies: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl Serialize for ProblemInstance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut f = InstanceFile {
            kind: String::new(),
            n: self.n,
            clauses: None,
            couplings: None,
            energies: None,
            seed: self.seed,
        };
        match &self.kind {
            InstanceKind::Sat3(clauses) => {
                f.kind = "SAT3".into();
                f.clauses = Some(clauses.iter().map(|c| c.lits).collect());
            }
            InstanceKind::ThreeSpin(couplings) => {
                f.kind = "THREESPIN".into();
                f.couplings = Some(
                    couplings
                        .iter()
                        .map(|c| (c.sites[0], c.sites[1], c.sites[2], c.sign))
                        .collect(),
                );
            }
            InstanceKind::Explicit(table) => {
                f.kind = "EXPLICIT".into();
                f.energies = Some(table.clone());
            }
        }
        f.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProblemInstance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let f = InstanceFile::deserialize(d)?;
        let inst = match f.kind.as_str() {
            "SAT3" => {
                let clauses = f
                    .clauses
                    .ok_or_else(|| DeError::custom("SAT3 instance lacks `clauses`"))?
                    .into_iter()
                    .map(|lits| Clause { lits })
                    .collect();
                ProblemInstance::sat3(f.n, clauses)
            }
            "THREESPIN" => {
                let couplings = f
                    .couplings
                    .ok_or_else(|| DeError::custom("THREESPIN instance lacks `couplings`"))?
                    .into_iter()
                    .map(|(i, j, k, sign)| Coupling { sites: [i, j, k], sign })
                    .collect();
                ProblemInstance::three_spin(f.n, couplings)
            }
            "EXPLICIT" => {
                let energies =
                    f.energies.ok_or_else(|| DeError::custom("EXPLICIT instance lacks `energies`"))?;
                ProblemInstance::explicit(f.n, energies)
            }
            other => return Err(DeError::custom(format!("unknown instance kind `{other}`"))),
        };
        let mut inst = inst.map_err(DeError::custom)?;
        inst.seed = f.seed;
        Ok(inst)
    }
}

impl ProblemInstance {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clause(v: [u32; 3], s: [i8; 3]) -> Clause {
        Clause { lits: [(v[0], s[0]), (v[1], s[1]), (v[2], s[2])] }
    }

    #[test]
    fn clause_violation_follows_product_formula() {
        let inst = ProblemInstance::sat3(3, vec![clause([0, 1, 2], [1, 1, 1])]).unwrap();
        // All spins opposite to the clause signs: satisfied.
        assert_eq!(inst.energy_spins(&[-1, -1, -1]).unwrap(), 0);
        // All spins equal to the clause signs: violated.
        assert_eq!(inst.energy_spins(&[1, 1, 1]).unwrap(), 1);
        // Any single disagreeing spin satisfies the clause.
        assert_eq!(inst.energy_spins(&[1, 1, -1]).unwrap(), 0);
    }

    #[test]
    fn three_spin_energy_is_coupling_product() {
        let inst = ProblemInstance::three_spin(
            3,
            vec![Coupling { sites: [0, 1, 2], sign: 1 }],
        )
        .unwrap();
        assert_eq!(inst.energy_spins(&[1, 1, -1]).unwrap(), -1);
        assert_eq!(inst.energy_spins(&[1, 1, 1]).unwrap(), 1);
        assert_eq!(inst.energy_spins(&[-1, -1, 1]).unwrap(), 1);
    }

    #[test]
    fn spin_and_bit_energies_agree() {
        let inst = gen_sat3(8, 20, 11).unwrap();
        for state in [0u64, 1, 37, 255, 128] {
            let spins = spins_from_bits(8, state);
            assert_eq!(inst.energy_spins(&spins).unwrap(), inst.energy_bits(state));
        }
    }

    #[test]
    fn invalid_spins_are_rejected() {
        let inst = gen_sat3(5, 5, 1).unwrap();
        assert!(matches!(
            inst.energy_spins(&[1, 1, 1, 1]),
            Err(Error::SpinLength { .. })
        ));
        assert!(matches!(
            inst.energy_spins(&[1, 1, 0, 1, 1]),
            Err(Error::BadSpin(0))
        ));
    }

    #[test]
    fn generation_is_deterministic_in_seed() {
        assert_eq!(gen_sat3(12, 50, 99).unwrap(), gen_sat3(12, 50, 99).unwrap());
        assert_ne!(gen_sat3(12, 50, 99).unwrap(), gen_sat3(12, 50, 100).unwrap());
        assert_eq!(gen_three_spin(7, 3).unwrap(), gen_three_spin(7, 3).unwrap());
    }

    #[test]
    fn three_spin_has_all_triples() {
        let inst = gen_three_spin(7, 0).unwrap();
        match inst.kind() {
            InstanceKind::ThreeSpin(c) => assert_eq!(c.len(), 35), // C(7,3)
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn grover_dos_counts_marked_state() {
        let inst = grover_explicit(2, 0).unwrap();
        let dos = compute_dos(&inst).unwrap();
        assert_eq!(dos.counts(), &[1, 3]);
        assert_eq!(dos.ground_count(), 1);
    }

    #[test]
    fn dos_counts_match_naive_recount() {
        // Independent recount straight from the violation product formula,
        // without the packed mask/target path.
        let inst = gen_sat3(10, 42, 7).unwrap();
        let clauses = match inst.kind() {
            InstanceKind::Sat3(c) => c.clone(),
            _ => unreachable!(),
        };
        let mut naive = vec![0u128; 43];
        for state in 0u64..1 << 10 {
            let spins = spins_from_bits(10, state);
            let mut e = 0usize;
            for cl in &clauses {
                let mut prod = 1i64;
                for (v, s) in cl.lits {
                    prod *= (1 + s as i64 * spins[v as usize] as i64) / 2;
                }
                e += prod as usize;
            }
            naive[e] += 1;
        }
        let dos = compute_dos(&inst).unwrap();
        assert_eq!(dos.counts(), &naive[..]);
    }

    #[test]
    fn dos_total_is_state_count() {
        let dos = compute_dos(&gen_sat3(12, 50, 5).unwrap()).unwrap();
        assert_eq!(dos.counts().iter().sum::<u128>(), 1u128 << 12);
    }

    #[test]
    fn raw_three_spin_dos_reports_negative_energy() {
        let inst = gen_three_spin(6, 2).unwrap();
        assert!(matches!(compute_dos(&inst), Err(Error::NegativeEnergy { .. })));
    }

    #[test]
    fn shift_makes_three_spin_nonnegative() {
        let inst = gen_three_spin(6, 2).unwrap();
        let (shifted, shift) = shift_to_nonneg(&inst).unwrap();
        let (min_raw, _) = ground_state_stats(&inst, 30).unwrap();
        assert_eq!(shift, -min_raw);
        for state in [0u64, 5, 17, 63] {
            assert_eq!(
                shifted.energy_bits(state),
                inst.energy_bits(state) + shift
            );
        }
        let dos = compute_dos(&shifted).unwrap();
        assert!(dos.ground_count() >= 1);
    }

    #[test]
    fn violation_rate_approaches_one_eighth() {
        // Monte-Carlo check of the 1/8 violation probability.
        let mut rng = rng_from(123);
        let trials = 80_000;
        let mut violated = 0u64;
        for _ in 0..trials {
            let inst = gen_sat3(12, 1, rng.random()).unwrap();
            let state: u64 = rng.random_range(0..1 << 12);
            violated += (inst.energy_bits(state) == 1) as u64;
        }
        let rate = violated as f64 / trials as f64;
        let sigma = (0.125 * 0.875 / trials as f64).sqrt();
        assert!(
            (rate - 0.125).abs() < 3.0 * sigma,
            "rate {rate} outside 3 sigma of 1/8"
        );
    }

    #[test]
    fn filter_unique_returns_unique_solution_instances() {
        let batch = filter_unique(GeneratorSpec::Sat3 { n: 10, m: 43 }, 5, 4, 10_000).unwrap();
        assert_eq!(batch.instances.len(), 5);
        assert!(batch.acceptance_rate > 0.0 && batch.acceptance_rate <= 1.0);
        for (seed, inst) in &batch.instances {
            assert_eq!(inst.seed, Some(*seed));
            let dos = compute_dos(inst).unwrap();
            assert_eq!(dos.ground_count(), 1, "instance seed {seed} is not unique-solution");
        }
    }

    #[test]
    fn filter_unique_cap_errors_out() {
        // 3 variables, 1 clause: 7 satisfying assignments, never unique.
        let res = filter_unique(GeneratorSpec::Sat3 { n: 3, m: 1 }, 1, 0, 50);
        assert!(matches!(res, Err(Error::AttemptCap { .. })));
    }

    #[test]
    fn instance_json_roundtrip() {
        let dir = std::env::temp_dir();
        for inst in [
            gen_sat3(9, 38, 21).unwrap(),
            gen_three_spin(5, 8).unwrap(),
            grover_explicit(4, 11).unwrap(),
        ] {
            let path = dir.join(format!("qanneal_inst_{}.json", inst.seed.unwrap_or(0)));
            inst.save_json(&path).unwrap();
            let back = ProblemInstance::load_json(&path).unwrap();
            std::fs::remove_file(&path).ok();
            assert_eq!(inst, back);
        }
    }

    #[test]
    fn dos_json_roundtrip_with_wide_counts() {
        // 2^80 total exercises counts beyond u64 range.
        let counts = vec![1u128, (1u128 << 80) - 1];
        let dos = DensityOfStates::new(80, counts).unwrap();
        let path = std::env::temp_dir().join("qanneal_dos_wide.json");
        dos.save_json(&path).unwrap();
        let back = DensityOfStates::load_json(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(dos, back);
    }

    #[test]
    fn dos_validation_rejects_bad_totals() {
        assert!(DensityOfStates::new(3, vec![1, 2, 3]).is_err());
        assert!(DensityOfStates::new(3, vec![1, 3, 4]).is_ok());
    }
}
