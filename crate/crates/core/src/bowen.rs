//! Per-level log fitness, its expectation with a divergence classifier,
//! the Bowen parameter and Mauldin's random-recursive dimension.

use serde::Serialize;

use crate::numerics::{log_sum_exp2, CompensatedSum, HybridNumber, LogWeight};
use crate::rifs::{Family, IfsDescriptor, Origin, ProbVector, RifsSpec, SpecError};
use crate::SCHEMA;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_TRUNCATION: u64 = 50;

/// Bracket growth stops here; a root beyond it is reported as unbounded.
const T_GUARD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BowenError {
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("t must be nonnegative and finite, got {0}")]
    BadExponent(f64),
    #[error("expectation still positive at t = {t}: unbounded dimension")]
    Unbounded { t: f64 },
    #[error("divergence classification inconclusive at t = {t}")]
    Inconclusive { t: f64 },
    #[error("the Mauldin sum needs finitely supported probabilities")]
    MauldinUnsupported,
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// `log Σ_j c_j^t` (natural log) for one IFS.
///
/// Frame levels use the closed form `(−t·U + (d−t)·V)·ln 2`; the result
/// saturates to `±inf` once `U` or `V` leaves the `f64` range.
pub fn log_fitness(ifs: &IfsDescriptor, t: f64) -> f64 {
    assert!(t >= 0.0, "t must be nonnegative");
    match &ifs.origin {
        Origin::FrameLevel { level, d, u, v } => {
            let d = f64::from(*d);
            let raw = linear_combination(&[(-t, u), (d - t, v)]);
            if raw.is_finite() {
                return raw * std::f64::consts::LN_2;
            }
            // Saturated log-log magnitudes can tie, so take the sign from
            // U·((d−t)·V/U − t) with V/U >= level.
            let ratio = v.ratio_f64(u).max(*level as f64);
            match ((d - t) * ratio - t).partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => f64::INFINITY,
                Some(std::cmp::Ordering::Less) => f64::NEG_INFINITY,
                _ => raw,
            }
        }
        Origin::Explicit => {
            let weights: Vec<LogWeight> = ifs
                .maps
                .iter()
                .map(|m| LogWeight::from_log2(m.multiplicity.log2() + t * m.log2_ratio))
                .collect();
            log_sum_exp2(&weights).log2() * std::f64::consts::LN_2
        }
    }
}

/// `Σ c_k·x_k`, saturating to the sign of the dominant term when some `x_k`
/// does not fit an `f64`.
pub(crate) fn linear_combination(terms: &[(f64, &HybridNumber)]) -> f64 {
    let live: Vec<&(f64, &HybridNumber)> = terms.iter().filter(|(c, x)| *c != 0.0 && !x.is_zero()).collect();
    if live.iter().all(|(_, x)| x.log2() < 1000.0) {
        return live.iter().map(|(c, x)| c * x.to_f64()).sum();
    }
    let dominant = live
        .iter()
        .max_by(|a, b| {
            let ka = (a.1.log2_log2(), a.0.abs());
            let kb = (b.1.log2_log2(), b.0.abs());
            ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("an overflowing term exists");
    dominant.0.signum() * f64::INFINITY
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    ConvergesTo { value: f64 },
    DivergesPlus,
    DivergesMinus,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceVerdict {
    pub classification: Classification,
    pub terms_used: u64,
    /// Serialized as `"inf"` / `"-inf"` once it leaves the `f64` range.
    #[serde(serialize_with = "float_or_infinity")]
    pub partial_sum: f64,
    /// Index from which the tail terms are bounded below by `1/k`, when the
    /// `diverges_plus` certificate applies.
    pub m_t: Option<u64>,
}

fn float_or_infinity<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    match *x {
        f64::INFINITY => s.serialize_str("inf"),
        f64::NEG_INFINITY => s.serialize_str("-inf"),
        x => s.serialize_f64(x),
    }
}

/// Smallest `k >= 1` with `−t + (d−t)·k >= 1`; `None` when `t >= d`.
pub fn certificate_index(t: f64, d: f64) -> Option<u64> {
    if t >= d {
        return None;
    }
    let holds = |k: u64| -t + (d - t) * k as f64 >= 1.0;
    let guess = ((1.0 + t) / (d - t)).ceil();
    if !(guess < 9e15) {
        return None;
    }
    let mut k = (guess as u64).max(1);
    while k > 1 && holds(k - 1) {
        k -= 1;
    }
    while !holds(k) {
        k += 1;
    }
    Some(k)
}

/// `Σ_{k<=M} p_k · log_fitness(k, t)` with a certified classification.
///
/// Finitely supported specs sum their whole support and converge; the
/// inverse-square frame family diverges to `−inf` for `t >= d` and to `+inf`
/// below. Both tails are dominated by a harmonic series because every valid
/// frame has `U_k >= k` and `k·U_k <= V_k`.
pub fn expected_log_fitness(spec: &RifsSpec, t: f64, truncation: u64) -> Result<DivergenceVerdict, BowenError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(BowenError::BadExponent(t));
    }
    assert!(truncation >= 1, "truncation level must be positive");
    match &spec.probabilities {
        ProbVector::Finite(values) => {
            let mut acc = CompensatedSum::new();
            let mut used = 0;
            for (idx, &p) in values.iter().enumerate() {
                if p > 0.0 {
                    acc.add(p * log_fitness(&spec.ifs(idx + 1)?, t));
                    used += 1;
                }
            }
            let value = acc.value();
            Ok(DivergenceVerdict {
                classification: Classification::ConvergesTo { value },
                terms_used: used,
                partial_sum: value,
                m_t: None,
            })
        }
        ProbVector::InverseSquare => {
            let mut acc = CompensatedSum::new();
            for k in 1..=truncation {
                acc.add(spec.probabilities.p(k) * log_fitness(&spec.ifs(k as usize)?, t));
            }
            let d = match &spec.family {
                Family::Frame { d, .. } => f64::from(*d),
                Family::Explicit(_) => unreachable!("explicit families have finite support"),
            };
            let m_t = certificate_index(t, d);
            let classification = if t >= d {
                Classification::DivergesMinus
            } else if m_t.is_some() {
                Classification::DivergesPlus
            } else {
                Classification::Inconclusive
            };
            Ok(DivergenceVerdict { classification, terms_used: truncation, partial_sum: acc.value(), m_t })
        }
    }
}

fn check_tolerance(tol: f64) -> Result<(), BowenError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(BowenError::BadTolerance(tol))
    }
}

/// `inf{t : f(t) <= 0}` for a decreasing `f` with `f(0) > 0`.
fn bisect<F>(mut f: F, tol: f64) -> Result<f64, BowenError>
where
    F: FnMut(f64) -> Result<f64, BowenError>,
{
    let mut lo = 0.0;
    if f(lo)? <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while f(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > T_GUARD {
            return Err(BowenError::Unbounded { t: lo });
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `B(Ψ) = inf{t : E log Σ_j c_j^t <= 0}`.
pub fn bowen_parameter(spec: &RifsSpec, tol: f64) -> Result<f64, BowenError> {
    check_tolerance(tol)?;
    if let (ProbVector::InverseSquare, Family::Frame { d, .. }) = (&spec.probabilities, &spec.family) {
        let d = f64::from(*d);
        let at_d = expected_log_fitness(spec, d, DEFAULT_TRUNCATION)?;
        if at_d.classification != Classification::DivergesMinus {
            return Err(BowenError::Inconclusive { t: d });
        }
        let below = d * (1.0 - tol);
        let at_below = expected_log_fitness(spec, below, DEFAULT_TRUNCATION)?;
        if at_below.classification != Classification::DivergesPlus {
            return Err(BowenError::Inconclusive { t: below });
        }
        return Ok(d);
    }
    bisect(|t| Ok(expected_log_fitness(spec, t, DEFAULT_TRUNCATION)?.partial_sum), tol)
}

/// `log2 Σ_i p_i Σ_j c_j^t`, evaluated entirely in log space.
pub fn mauldin_log2_sum(spec: &RifsSpec, t: f64) -> Result<f64, BowenError> {
    let ProbVector::Finite(values) = &spec.probabilities else {
        return Err(BowenError::MauldinUnsupported);
    };
    let mut weights = Vec::new();
    for (idx, &p) in values.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let ifs = spec.ifs(idx + 1)?;
        let inner = match &ifs.origin {
            Origin::FrameLevel { d, u, v, .. } => {
                // 2^{dV} maps of ratio 2^{-(U+V)}
                linear_combination(&[(f64::from(*d) - t, v), (-t, u)])
            }
            Origin::Explicit => {
                let terms: Vec<LogWeight> = ifs
                    .maps
                    .iter()
                    .map(|m| LogWeight::from_log2(m.multiplicity.log2() + t * m.log2_ratio))
                    .collect();
                log_sum_exp2(&terms).log2()
            }
        };
        weights.push(LogWeight::from_log2(p.log2() + inner));
    }
    Ok(log_sum_exp2(&weights).log2())
}

/// `inf{t : Σ_i p_i Σ_j c_j^t <= 1}`.
pub fn mauldin_dimension(spec: &RifsSpec, tol: f64) -> Result<f64, BowenError> {
    check_tolerance(tol)?;
    bisect(|t| mauldin_log2_sum(spec, t), tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictAt {
    pub t: f64,
    pub verdict: DivergenceVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionReport {
    pub schema: &'static str,
    pub bowen: f64,
    pub mauldin: Option<f64>,
    pub verdicts: Vec<VerdictAt>,
    pub tolerance: f64,
    pub truncation: u64,
}

/// Bowen parameter, Mauldin dimension (when defined) and the verdicts at the
/// probe exponents: `d(1−tol)` and `d` for frame families, `0` and `B(Ψ)` otherwise.
pub fn dimension_report(spec: &RifsSpec, tol: f64, truncation: u64) -> Result<DimensionReport, BowenError> {
    let bowen = bowen_parameter(spec, tol)?;
    let mauldin = match mauldin_dimension(spec, tol) {
        Ok(x) => Some(x),
        Err(BowenError::MauldinUnsupported) => None,
        Err(e) => return Err(e),
    };
    let probes = match spec.dimension() {
        Some(d) if !spec.probabilities.is_finite() => {
            let d = f64::from(d);
            vec![d * (1.0 - tol), d]
        }
        _ => vec![0.0, bowen],
    };
    let verdicts = probes
        .into_iter()
        .map(|t| Ok(VerdictAt { t, verdict: expected_log_fitness(spec, t, truncation)? }))
        .collect::<Result<Vec<_>, BowenError>>()?;
    Ok(DimensionReport { schema: SCHEMA, bowen, mauldin, verdicts, tolerance: tol, truncation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Frame;
    use crate::rifs::counterexample_ifs;
    use std::f64::consts::LN_2;
    use std::sync::Arc;

    fn two_ifs() -> RifsSpec {
        RifsSpec::explicit(
            vec![0.5, 0.5],
            vec![IfsDescriptor::from_pairs(&[(-1.0, 2)]), IfsDescriptor::from_pairs(&[(-2.0, 2)])],
        )
        .unwrap()
    }

    fn halving() -> RifsSpec {
        RifsSpec::explicit(vec![1.0], vec![IfsDescriptor::from_pairs(&[(-1.0, 2)])]).unwrap()
    }

    #[test]
    fn log_fitness_examples() {
        let frame = Frame::minimal(4);
        let level1 = counterexample_ifs(&frame, 1, 1).unwrap();
        assert!((log_fitness(&level1, 0.0) - LN_2).abs() < 1e-15);
        assert!((log_fitness(&level1, 1.0) + LN_2).abs() < 1e-15);
        assert_eq!(log_fitness(&IfsDescriptor::from_pairs(&[(-1.0, 2)]), 1.0), 0.0);
        // level 3, d=2, t=1: (−13824 + 41472)·ln2
        let level3 = counterexample_ifs(&frame, 2, 3).unwrap();
        assert!((log_fitness(&level3, 1.0) - 27648.0 * LN_2).abs() < 1e-9);
        // overflowing levels saturate with the right sign
        let deep = counterexample_ifs(&frame, 1, 12).unwrap();
        assert_eq!(log_fitness(&deep, 0.5), f64::INFINITY);
        assert_eq!(log_fitness(&deep, 1.0), f64::NEG_INFINITY);
        assert_eq!(log_fitness(&deep, 1.5), f64::NEG_INFINITY);
        // minimal frame: V = kU, so the sign of 0.1·k − 0.9 decides, even
        // after both magnitudes saturate
        for level in (5..=50).filter(|&k| k != 9) {
            let ifs = counterexample_ifs(&frame, 1, level).unwrap();
            let z = log_fitness(&ifs, 0.9);
            if level < 9 {
                assert!(z < 0.0, "level {level}");
            } else {
                assert_eq!(z, f64::INFINITY, "level {level}");
            }
        }
    }

    #[test]
    fn expectation_examples() {
        let v = expected_log_fitness(&two_ifs(), 0.0, 1).unwrap();
        assert_eq!(v.terms_used, 2);
        match v.classification {
            Classification::ConvergesTo { value } => assert!((value - LN_2).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        let spec = RifsSpec::counterexample(Arc::new(Frame::minimal(32)), 1).unwrap();
        assert_eq!(expected_log_fitness(&spec, 1.0, 50).unwrap().classification, Classification::DivergesMinus);
        let plus = expected_log_fitness(&spec, 0.5, 50).unwrap();
        assert_eq!(plus.classification, Classification::DivergesPlus);
        assert_eq!(plus.m_t, Some(3));
    }

    #[test]
    fn certificate_index_is_minimal() {
        for &(t, d) in &[(0.5, 1.0), (0.0, 1.0), (1.0, 2.0), (2.97, 3.0), (0.99, 1.0), (1.98, 2.0)] {
            let k = certificate_index(t, d).unwrap();
            assert!(-t + (d - t) * k as f64 >= 1.0);
            assert!(k == 1 || -t + (d - t) * ((k - 1) as f64) < 1.0);
        }
        assert_eq!(certificate_index(0.0, 1.0), Some(1));
        assert_eq!(certificate_index(1.0, 1.0), None);
    }

    #[test]
    fn classifier_on_valid_frames() {
        let frames = [
            Frame::minimal(32),
            Frame::with_slack(8, vec![2, 1, 3]).unwrap(),
            Frame::from_levels(Frame::minimal(3).levels()).unwrap(),
        ];
        for frame in frames {
            let frame = Arc::new(frame);
            for d in 1..=3u32 {
                let spec = RifsSpec::counterexample(frame.clone(), d).unwrap();
                let d = f64::from(d);
                assert_eq!(expected_log_fitness(&spec, d, 50).unwrap().classification, Classification::DivergesMinus);
                assert_eq!(
                    expected_log_fitness(&spec, 0.99 * d, 50).unwrap().classification,
                    Classification::DivergesPlus
                );
            }
        }
    }

    #[test]
    fn bowen_examples() {
        let tol = DEFAULT_TOLERANCE;
        assert!((bowen_parameter(&two_ifs(), tol).unwrap() - 2.0 / 3.0).abs() <= tol);
        assert!((bowen_parameter(&halving(), tol).unwrap() - 1.0).abs() <= tol);
        let spec = RifsSpec::counterexample(Arc::new(Frame::minimal(32)), 2).unwrap();
        assert_eq!(bowen_parameter(&spec, tol).unwrap(), 2.0);
        assert_eq!(bowen_parameter(&spec, 0.0), Err(BowenError::BadTolerance(0.0)));
    }

    #[test]
    fn mauldin_examples() {
        let tol = DEFAULT_TOLERANCE;
        // x + x² = 1 with x = 2^{-t}
        let x = (5f64.sqrt() - 1.0) / 2.0;
        let oracle = -x.log2();
        assert!((oracle - 0.694_241_9).abs() < 1e-7);
        assert!((mauldin_dimension(&two_ifs(), tol).unwrap() - oracle).abs() <= tol);
        assert!((mauldin_dimension(&halving(), tol).unwrap() - 1.0).abs() <= tol);
        let spec = RifsSpec::counterexample(Arc::new(Frame::minimal(32)), 1).unwrap();
        assert_eq!(mauldin_dimension(&spec, tol), Err(BowenError::MauldinUnsupported));
    }

    #[test]
    fn degenerate_probabilities_agree() {
        let tol = 1e-9;
        let first = IfsDescriptor::from_pairs(&[(-2.0, 3)]);
        let sim = first.similarity_exponent().unwrap();
        let spec =
            RifsSpec::explicit(vec![1.0, 0.0], vec![first, IfsDescriptor::from_pairs(&[(-1.0, 5)])]).unwrap();
        let b = bowen_parameter(&spec, tol).unwrap();
        let m = mauldin_dimension(&spec, tol).unwrap();
        assert!((b - sim).abs() <= 2.0 * tol && (m - sim).abs() <= 2.0 * tol && (b - m).abs() <= 2.0 * tol);
    }

    #[test]
    fn jensen_gap() {
        let b = bowen_parameter(&two_ifs(), DEFAULT_TOLERANCE).unwrap();
        let m = mauldin_dimension(&two_ifs(), DEFAULT_TOLERANCE).unwrap();
        assert!(b + 0.02 < m);
    }

    #[test]
    fn strictly_decreasing_in_t() {
        let spec = two_ifs();
        let grid: Vec<f64> = (0..100).map(|i| (i as f64) * 0.02).collect();
        let fit: Vec<f64> = grid.iter().map(|&t| expected_log_fitness(&spec, t, 1).unwrap().partial_sum).collect();
        let sum: Vec<f64> = grid.iter().map(|&t| mauldin_log2_sum(&spec, t).unwrap()).collect();
        assert!(fit.windows(2).all(|w| w[1] < w[0]));
        assert!(sum.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn finite_frame_family_bisects() {
        // levels 1 and 2 of the minimal frame with weights (½, ½), d = 1:
        // E = ½[(−t + (1−t))] + ½[(−8t + 16(1−t))] in units of ln 2, zero at t = 17/26
        let frame = Arc::new(Frame::minimal(4));
        let doc = crate::rifs::SpecDocument {
            probabilities: crate::rifs::ProbDocument::Finite { values: vec![0.5, 0.5] },
            family: crate::rifs::FamilyDocument::Frame { frame: frame.to_document(), d: 1 },
            eta: None,
        };
        let spec = crate::rifs::validate_spec(&doc).unwrap();
        let b = bowen_parameter(&spec, 1e-10).unwrap();
        assert!((b - 17.0 / 26.0).abs() <= 1e-10);
        // Mauldin: ½ 2^{1−2t} + ½ 2^{16−24t} = 1
        let m = mauldin_dimension(&spec, 1e-10).unwrap();
        let g = |t: f64| 0.5 * (1.0 - 2.0 * t).exp2() + 0.5 * (16.0 - 24.0 * t).exp2() - 1.0;
        assert!(g(m - 1e-9) > 0.0 && g(m + 1e-9) < 0.0);
    }

    #[test]
    fn report_serializes() {
        let report = dimension_report(&two_ifs(), 1e-9, 50).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["schema"], "rifs-lab/1");
        assert_eq!(json["verdicts"][0]["verdict"]["classification"]["kind"], "converges_to");
        let frame = RifsSpec::counterexample(Arc::new(Frame::minimal(32)), 1).unwrap();
        let json = serde_json::to_value(dimension_report(&frame, 1e-9, 50).unwrap()).unwrap();
        assert_eq!(json["bowen"], 1.0);
        assert!(json["mauldin"].is_null());
        assert_eq!(json["verdicts"][1]["verdict"]["classification"]["kind"], "diverges_minus");
        assert_eq!(json["verdicts"][1]["verdict"]["partial_sum"], "-inf");
    }
}
