//! Cylinder geometry on `X = [0,1]^d`.
//!
//! Every refined map is `x ↦ ½x + ½v` with `v ∈ {0,1}^d`, so a word of
//! length `m` maps `X` onto a dyadic cube of side `2^{-m}` whose corner
//! numerators are read off the word's bits.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::numerics::{scale_by_pow2, HybridNumber};
use crate::pressure::{refined_log_sum, BranchProfile, PressureError};

/// Default cap on the number of enumerated words.
pub const DEFAULT_BUDGET: u64 = 1 << 20;

/// Deepest level that enumeration will materialize.
pub const MAX_ENUMERATION_DEPTH: u64 = 1 << 24;

/// Point export covers `d <= 3`.
pub const MAX_EXPORT_DIMENSION: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoverError {
    #[error("combinatorial explosion: {required} cylinders exceed the budget of {budget}")]
    CombinatorialExplosion { required: HybridNumber, budget: u64 },
    #[error("depth {0} exceeds the enumeration limit of {MAX_ENUMERATION_DEPTH}")]
    DepthTooLarge(u64),
    #[error("cubes at mixed levels {0} and {1}")]
    MixedLevels(u64, u64),
    #[error("parent level {parent} is deeper than child level {child}")]
    LevelOrder { parent: u64, child: u64 },
    #[error("point export supports d <= 3, got d = {0}")]
    UnsupportedDimension(usize),
    #[error("invalid cylinder code: {0}")]
    InvalidCode(String),
    #[error(transparent)]
    Pressure(#[from] PressureError),
}

/// `corner/2^level + [0, 2^{-level}]^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicCube {
    pub level: u64,
    pub corner: Vec<BigUint>,
}

impl DyadicCube {
    /// The whole of `[0,1]^d`.
    pub fn unit(d: usize) -> Self {
        Self { level: 0, corner: vec![BigUint::zero(); d] }
    }

    pub fn d(&self) -> usize {
        self.corner.len()
    }

    pub fn side(&self) -> f64 {
        scale_by_pow2(1.0, -(self.level.min(i32::MAX as u64) as i32))
    }

    /// `true` if `other` lies inside `self`.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        if other.level < self.level || other.d() != self.d() {
            return false;
        }
        let shift = other.level - self.level;
        other.corner.iter().zip(&self.corner).all(|(c, p)| &(c >> shift) == p)
    }

    /// Corner coordinates as floats.
    pub fn corner_f64(&self) -> Vec<f64> {
        self.corner.iter().map(|c| dyadic_to_f64(c, self.level)).collect()
    }
}

fn dyadic_to_f64(numerator: &BigUint, level: u64) -> f64 {
    let bits = numerator.bits();
    let shift = bits.saturating_sub(64);
    let top = (numerator >> shift).to_u64().expect("at most 64 bits") as f64;
    let e = shift as i64 - level as i64;
    scale_by_pow2(top, e.clamp(i64::from(i32::MIN), i64::from(i32::MAX)) as i32)
}

/// A refined word: one `d`-bit vector per step (bit `ℓ` is coordinate `ℓ+1`),
/// plus a flag per step telling whether the full alphabet `{0,1}^d` was
/// available or only the corner `{0}^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CylinderCode {
    pub d: usize,
    pub word: Vec<u32>,
    pub full: Vec<bool>,
}

impl CylinderCode {
    pub fn new(d: usize, word: Vec<u32>, full: Vec<bool>) -> Result<Self, CoverError> {
        if d == 0 || d > 32 {
            return Err(CoverError::InvalidCode(format!("dimension {d} outside 1..=32")));
        }
        if word.len() != full.len() {
            return Err(CoverError::InvalidCode(format!("{} symbols but {} flags", word.len(), full.len())));
        }
        for (k, (&symbol, &full)) in word.iter().zip(&full).enumerate() {
            if d < 32 && symbol >> d != 0 {
                return Err(CoverError::InvalidCode(format!("symbol {symbol} at step {} has more than {d} bits", k + 1)));
            }
            if !full && symbol != 0 {
                return Err(CoverError::InvalidCode(format!("corner-only step {} carries symbol {symbol}", k + 1)));
            }
        }
        Ok(Self { d, word, full })
    }

    /// A word over the full alphabet at every step.
    pub fn full_word(d: usize, word: Vec<u32>) -> Result<Self, CoverError> {
        let full = vec![true; word.len()];
        Self::new(d, word, full)
    }

    pub fn depth(&self) -> usize {
        self.word.len()
    }
}

/// `φ_{τ_1} ∘ ... ∘ φ_{τ_m}(X)`.
pub fn cylinder_to_cube(code: &CylinderCode) -> DyadicCube {
    let mut corner = vec![BigUint::zero(); code.d];
    for &symbol in &code.word {
        for (l, c) in corner.iter_mut().enumerate() {
            *c = &*c << 1u32;
            if (symbol >> l) & 1 == 1 {
                *c += 1u32;
            }
        }
    }
    DyadicCube { level: code.depth() as u64, corner }
}

/// Per-step alphabet flags for the first `m` refined steps.
fn step_flags(profile: &BranchProfile, m: u64) -> Result<Vec<bool>, CoverError> {
    if m > MAX_ENUMERATION_DEPTH {
        return Err(CoverError::DepthTooLarge(m));
    }
    let mut flags = Vec::with_capacity(m as usize);
    for run in profile.runs() {
        if flags.len() as u64 == m {
            break;
        }
        for (len, full) in [(&run.u, false), (&run.v, true)] {
            let left = m - flags.len() as u64;
            let take = len.to_u64().map_or(left, |n| n.min(left));
            flags.extend(std::iter::repeat(full).take(take as usize));
        }
    }
    if (flags.len() as u64) < m {
        return Err(PressureError::Coverage { m: m.into(), coverage: profile.coverage() }.into());
    }
    Ok(flags)
}

fn check_budget(profile: &BranchProfile, m: u64, budget: u64) -> Result<(), CoverError> {
    let b = profile.b_at_u64(m)?;
    let exponent = b.mul_u64(u64::from(profile.d()));
    let required = HybridNumber::pow2(&exponent);
    if required > HybridNumber::from_u64(budget) {
        return Err(CoverError::CombinatorialExplosion { required, budget });
    }
    Ok(())
}

/// All refined words of length `m`, in lexicographic order.
pub fn enumerate_codes(profile: &BranchProfile, m: u64, budget: u64) -> Result<Vec<CylinderCode>, CoverError> {
    check_budget(profile, m, budget)?;
    let flags = step_flags(profile, m)?;
    let d = profile.d() as usize;
    let mut words: Vec<Vec<u32>> = vec![Vec::with_capacity(m as usize)];
    for &full in &flags {
        if full {
            words = words
                .into_iter()
                .flat_map(|w| {
                    (0..1u32 << d).map(move |s| {
                        let mut next = w.clone();
                        next.push(s);
                        next
                    })
                })
                .collect();
        } else {
            words.iter_mut().for_each(|w| w.push(0));
        }
    }
    words.into_iter().map(|w| CylinderCode::new(d, w, flags.clone())).collect()
}

/// All level-`m` cylinder cubes, in lexicographic code order.
pub fn enumerate_cylinders(profile: &BranchProfile, m: u64, budget: u64) -> Result<Vec<DyadicCube>, CoverError> {
    check_budget(profile, m, budget)?;
    let flags = step_flags(profile, m)?;
    let d = profile.d() as usize;
    let mut cubes = vec![DyadicCube::unit(d)];
    let mut pending: u64 = 0;
    for &full in &flags {
        if !full {
            pending += 1;
            continue;
        }
        let shift = pending + 1;
        pending = 0;
        cubes = cubes
            .into_iter()
            .flat_map(|cube| {
                let base: Vec<BigUint> = cube.corner.iter().map(|c| c << shift).collect();
                (0..1u32 << d).map(move |s| DyadicCube {
                    level: cube.level + shift,
                    corner: base
                        .iter()
                        .enumerate()
                        .map(|(l, c)| if (s >> l) & 1 == 1 { c + 1u32 } else { c.clone() })
                        .collect(),
                })
            })
            .collect();
    }
    if pending > 0 {
        for cube in &mut cubes {
            cube.level += pending;
            cube.corner.iter_mut().for_each(|c| *c = &*c << pending);
        }
    }
    Ok(cubes)
}

fn common_level(cubes: &[DyadicCube]) -> Result<Option<u64>, CoverError> {
    let Some(first) = cubes.first() else { return Ok(None) };
    match cubes.iter().find(|c| c.level != first.level) {
        Some(other) => Err(CoverError::MixedLevels(first.level, other.level)),
        None => Ok(Some(first.level)),
    }
}

/// Open set condition for one level: interiors are disjoint iff corners differ.
pub fn osc_check(cubes: &[DyadicCube]) -> Result<bool, CoverError> {
    common_level(cubes)?;
    let mut seen = HashSet::with_capacity(cubes.len());
    Ok(cubes.iter().all(|c| seen.insert(&c.corner)))
}

/// Every child lies in exactly one parent.
pub fn nesting_check(parents: &[DyadicCube], children: &[DyadicCube]) -> Result<bool, CoverError> {
    let (Some(p), Some(c)) = (common_level(parents)?, common_level(children)?) else {
        return Ok(true);
    };
    if p > c {
        return Err(CoverError::LevelOrder { parent: p, child: c });
    }
    let mut count: HashMap<&Vec<BigUint>, usize> = HashMap::new();
    for parent in parents {
        *count.entry(&parent.corner).or_default() += 1;
    }
    let shift = c - p;
    Ok(children.iter().all(|child| {
        let key: Vec<BigUint> = child.corner.iter().map(|x| x >> shift).collect();
        count.get(&key) == Some(&1)
    }))
}

/// `(m, d·B_m/m)` for each requested depth.
pub fn box_exponents(profile: &BranchProfile, depths: &[HybridNumber]) -> Result<Vec<(HybridNumber, f64)>, CoverError> {
    depths
        .iter()
        .map(|m| Ok((m.clone(), refined_log_sum(profile, m, 0.0)?.exponent())))
        .collect()
}

/// For each run `i`: the end of its corner-only part `j_{i−1} + U_{ω_i}` and
/// the run end `j_i`.
pub fn run_boundaries(profile: &BranchProfile) -> Vec<(usize, HybridNumber, HybridNumber)> {
    let mut start = HybridNumber::zero();
    profile
        .runs()
        .iter()
        .enumerate()
        .map(|(i, run)| {
            let corner_end = &start + &run.u;
            start = run.j_end.clone();
            (i + 1, corner_end, run.j_end.clone())
        })
        .collect()
}

/// Writes one CSV row per cube: `x[,y[,z]],side`. Returns the row count.
pub fn emit_points<W: Write>(out: W, cubes: &[DyadicCube]) -> Result<usize, CoverError> {
    let d = cubes.first().map_or(1, DyadicCube::d);
    if d > MAX_EXPORT_DIMENSION {
        return Err(CoverError::UnsupportedDimension(d));
    }
    let csv_err = |e: csv::Error| CoverError::InvalidCode(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = ["x", "y", "z"][..d].to_vec();
    header.push("side");
    w.write_record(&header).map_err(csv_err)?;
    for cube in cubes {
        let mut row: Vec<String> = cube.corner_f64().iter().map(f64::to_string).collect();
        row.push(cube.side().to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| csv_err(e.into()))?;
    Ok(cubes.len())
}
