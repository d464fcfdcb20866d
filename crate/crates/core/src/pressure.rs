//! The unrolled non-autonomous system along a scenery `ω`.
//!
//! Level `ω_i` of the frame family is refined into `U_{ω_i}` corner-only
//! steps followed by `V_{ω_i}` full-branching steps, each of ratio `½`. After
//! `m` refined steps there are `2^{d·B_m}` words, where `B_m` counts the
//! branching steps so far, so every partition sum has a closed form.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::bowen::linear_combination;
use crate::frame::{Frame, FrameError, FrameLevel};
use crate::numerics::HybridNumber;
use crate::sampler::{LemmaSequences, SceneryPath};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PressureError {
    #[error("frame level for symbol {symbol} unavailable: {source}")]
    Frame { symbol: u64, source: FrameError },
    #[error("time {m} lies beyond the covered schedule (coverage {coverage})")]
    Coverage { m: HybridNumber, coverage: HybridNumber },
    #[error("run {run} beyond the profile of {runs} runs")]
    NoSuchRun { run: usize, runs: usize },
    #[error("no special time computable")]
    NoSpecialTime,
    #[error("refined time must be positive")]
    ZeroTime,
}

/// One scenery position: `U` corner-only steps, then `V` branching steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Run {
    pub symbol: u64,
    pub u: HybridNumber,
    pub v: HybridNumber,
    /// `j_i = Σ_{k<=i} (U_{ω_k} + V_{ω_k})`.
    pub j_end: HybridNumber,
    /// Branching steps among the first `j_i`.
    pub b_end: HybridNumber,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchProfile {
    d: u32,
    runs: Vec<Run>,
    /// Frame levels for every symbol in the profile and its predecessor.
    levels: BTreeMap<u64, FrameLevel>,
}

/// Profile of the whole path.
pub fn build_branch_profile(path: &SceneryPath, frame: &Frame, d: u32) -> Result<BranchProfile, PressureError> {
    BranchProfile::from_symbols(&path.symbols, frame, d)
}

impl BranchProfile {
    pub fn from_symbols(symbols: &[u64], frame: &Frame, d: u32) -> Result<Self, PressureError> {
        assert!(d >= 1, "ambient dimension must be positive");
        let mut levels = BTreeMap::new();
        let mut fetch = |symbol: u64| -> Result<FrameLevel, PressureError> {
            if let Some(level) = levels.get(&symbol) {
                return Ok(Clone::clone(level));
            }
            let level = frame.level(symbol as usize).map_err(|source| PressureError::Frame { symbol, source })?;
            levels.insert(symbol, level.clone());
            Ok(level)
        };
        let mut runs = Vec::with_capacity(symbols.len());
        let mut j = HybridNumber::zero();
        let mut b = HybridNumber::zero();
        for &symbol in symbols {
            let FrameLevel { u, v } = fetch(symbol)?;
            if symbol > 1 {
                fetch(symbol - 1)?;
            }
            j = &(&j + &u) + &v;
            b = &b + &v;
            runs.push(Run { symbol, u, v, j_end: j.clone(), b_end: b.clone() });
        }
        Ok(Self { d, runs, levels })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// `j_i`, with `j_0 = 0`.
    pub fn j_of_run(&self, i: usize) -> Result<HybridNumber, PressureError> {
        match i {
            0 => Ok(HybridNumber::zero()),
            i if i <= self.runs.len() => Ok(self.runs[i - 1].j_end.clone()),
            run => Err(PressureError::NoSuchRun { run, runs: self.runs.len() }),
        }
    }

    fn b_of_run(&self, i: usize) -> HybridNumber {
        if i == 0 {
            HybridNumber::zero()
        } else {
            self.runs[i - 1].b_end.clone()
        }
    }

    /// Total number of refined steps covered.
    pub fn coverage(&self) -> HybridNumber {
        self.runs.last().map_or_else(HybridNumber::zero, |r| r.j_end.clone())
    }

    /// Frame level `(U_k, V_k)` for a symbol of the profile or its predecessor.
    pub fn frame_level(&self, symbol: u64) -> Option<&FrameLevel> {
        self.levels.get(&symbol)
    }

    /// `B_m`: the number of branching steps among the first `m`.
    pub fn b_at(&self, m: &HybridNumber) -> Result<HybridNumber, PressureError> {
        if m.is_zero() {
            return Ok(HybridNumber::zero());
        }
        let r = self.runs.partition_point(|run| &run.j_end < m);
        if r == self.runs.len() {
            return Err(PressureError::Coverage { m: m.clone(), coverage: self.coverage() });
        }
        let start = self.j_of_run(r)?;
        let offset = m.checked_sub(&start).expect("m exceeds the previous run end");
        let run = &self.runs[r];
        let before = self.b_of_run(r);
        if offset <= run.u {
            Ok(before)
        } else {
            let branched = offset.checked_sub(&run.u).expect("offset exceeds U");
            Ok(&before + &branched)
        }
    }

    pub fn b_at_u64(&self, m: u64) -> Result<HybridNumber, PressureError> {
        self.b_at(&HybridNumber::from_u64(m))
    }
}

/// `log Σ_{τ ∈ Σ̃^m} c_τ^t = (d·B_m − t·m)·ln 2`, kept in parts.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedLogSum {
    pub m: HybridNumber,
    /// `d·B_m`.
    pub d_b: HybridNumber,
    pub t: f64,
    /// Natural-log value; `±inf` when out of `f64` range.
    pub value: f64,
}

impl RefinedLogSum {
    /// `d·B_m / m`, computed in log space when the operands are large.
    pub fn exponent(&self) -> f64 {
        self.d_b.ratio_f64(&self.m)
    }

    /// `(1/m)·log Σ = (d·B_m/m − t)·ln 2`.
    pub fn per_step(&self) -> f64 {
        (self.exponent() - self.t) * std::f64::consts::LN_2
    }
}

pub fn refined_log_sum(profile: &BranchProfile, m: &HybridNumber, t: f64) -> Result<RefinedLogSum, PressureError> {
    assert!(t >= 0.0, "t must be nonnegative");
    if m.is_zero() {
        return Err(PressureError::ZeroTime);
    }
    let b = profile.b_at(m)?;
    Ok(refined_from_parts(profile.d, m.clone(), &b, t))
}

fn refined_from_parts(d: u32, m: HybridNumber, b: &HybridNumber, t: f64) -> RefinedLogSum {
    let d_b = b.mul_u64(u64::from(d));
    let value = linear_combination(&[(1.0, &d_b), (-t, &m)]) * std::f64::consts::LN_2;
    RefinedLogSum { m, d_b, t, value }
}

/// `m = j_{b_n−1} + U_{ω_{b_n}}`: the end of the corner-only part of run `b_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecialTime {
    pub n: usize,
    pub a: usize,
    pub b: usize,
    /// `ω_{b_n}`.
    pub symbol: u64,
    pub j_before: HybridNumber,
    pub m: HybridNumber,
    /// `B_m = Σ_{i<b_n} V_{ω_i}`.
    pub b_m: HybridNumber,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecialTimes {
    pub times: Vec<SpecialTime>,
    /// Some `b_n` fell outside the profile.
    pub truncated: bool,
}

pub fn special_times(profile: &BranchProfile, seqs: &LemmaSequences) -> SpecialTimes {
    let mut times = Vec::with_capacity(seqs.pairs.len());
    for (idx, pair) in seqs.pairs.iter().enumerate() {
        if pair.b > profile.len() {
            return SpecialTimes { times, truncated: true };
        }
        let run = &profile.runs[pair.b - 1];
        let j_before = profile.j_of_run(pair.b - 1).expect("b_n within profile");
        let m = &j_before + &run.u;
        times.push(SpecialTime {
            n: idx + 1,
            a: pair.a,
            b: pair.b,
            symbol: run.symbol,
            j_before,
            m,
            b_m: profile.b_of_run(pair.b - 1),
        });
    }
    SpecialTimes { times, truncated: false }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub n: usize,
    pub t: f64,
    /// `(1/m)·refined_log_sum(m, t)`.
    pub lhs: f64,
    /// `−t·ln 2 + j_{b_n−1}·ln 2 / m`.
    pub rhs: f64,
    pub holds: bool,
    /// `−t·ln 2 + d·j_{b_n−1}·ln 2 / m`; agrees with `rhs` when `d = 1`.
    pub rhs_scaled: f64,
    pub holds_scaled: bool,
    /// `log2(U_{ω_{b_n}} / j_{b_n−1})`; `+inf` when `j_{b_n−1} = 0`.
    pub ratio_log2: f64,
    /// `2·U_{ω_{b_n}} >= V_{ω_{b_n}−1}·j_{b_n−1}`, for `n >= 2` and `ω_{b_n} >= 2`.
    pub ratio_check: Option<bool>,
    /// `B_m·V_{ω_{b_n}−1} <= 2·m`, under the same conditions.
    pub exponent_check: Option<bool>,
}

const BOUND_SLACK: f64 = 1e-12;

pub fn subsequence_bound_check(profile: &BranchProfile, st: &SpecialTime, t: f64) -> BoundCheck {
    let ln2 = std::f64::consts::LN_2;
    let refined = refined_from_parts(profile.d, st.m.clone(), &st.b_m, t);
    let lhs = refined.per_step();
    let rhs = -t * ln2 + st.j_before.ratio_f64(&st.m) * ln2;
    let d_j = st.j_before.mul_u64(u64::from(profile.d));
    let rhs_scaled = -t * ln2 + d_j.ratio_f64(&st.m) * ln2;
    let u = &profile.runs[st.b - 1].u;
    let ratio_log2 = if st.j_before.is_zero() { f64::INFINITY } else { u.log2() - st.j_before.log2() };
    let prev = (st.n >= 2 && st.symbol >= 2).then(|| profile.frame_level(st.symbol - 1)).flatten();
    let ratio_check = prev.map(|level| &u.mul_u64(2) >= &(&level.v * &st.j_before));
    let exponent_check = prev.map(|level| &(&st.b_m * &level.v) <= &st.m.mul_u64(2));
    BoundCheck {
        n: st.n,
        t,
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_SLACK,
        rhs_scaled,
        holds_scaled: lhs <= rhs_scaled + BOUND_SLACK,
        ratio_log2,
        ratio_check,
        exponent_check,
    }
}

/// Subsequence upper-bound estimate: `d·B_m/m` along the special times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperEstimate {
    /// Minimum over all special times.
    pub estimate: f64,
    /// Minimum over special times with `n >= 2`; the first time is `0`
    /// whenever `b_1 = 1`, which is always the case from `a_1 = N_ω`.
    pub late_estimate: Option<f64>,
    pub exponents: Vec<f64>,
}

pub fn dim_upper_estimate(profile: &BranchProfile, times: &[SpecialTime]) -> Result<UpperEstimate, PressureError> {
    if times.is_empty() {
        return Err(PressureError::NoSpecialTime);
    }
    let exponents: Vec<f64> =
        times.iter().map(|st| refined_from_parts(profile.d, st.m.clone(), &st.b_m, 0.0).exponent()).collect();
    let min = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
    let late = times.iter().zip(&exponents).filter(|(st, _)| st.n >= 2).map(|(_, e)| *e).collect::<Vec<_>>();
    Ok(UpperEstimate {
        estimate: min(&exponents),
        late_estimate: (!late.is_empty()).then(|| min(&late)),
        exponents,
    })
}

/// CSV trace, one row per (special time, t).
pub fn write_trace<W: Write>(out: W, times: &[SpecialTime], checks: &[BoundCheck]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n", "b_n", "a_n", "omega_b", "t", "j_before", "m", "m_form", "exponent", "lhs", "bound_rhs", "holds",
        "holds_scaled", "ratio_check",
    ])?;
    for check in checks {
        let st = times.iter().find(|st| st.n == check.n).expect("check belongs to a listed time");
        let exponent = check.lhs / std::f64::consts::LN_2 + check.t;
        let ratio = check.ratio_check.map_or(String::new(), |b| b.to_string());
        w.write_record([
            st.n.to_string(),
            st.b.to_string(),
            st.a.to_string(),
            st.symbol.to_string(),
            check.t.to_string(),
            st.j_before.to_string(),
            st.m.to_string(),
            st.m.form().as_str().to_string(),
            exponent.to_string(),
            check.lhs.to_string(),
            check.rhs.to_string(),
            check.holds.to_string(),
            check.holds_scaled.to_string(),
            ratio,
        ])?;
    }
    w.flush()?;
    Ok(())
}
