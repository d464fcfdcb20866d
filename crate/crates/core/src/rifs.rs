//! Random iterated function systems `(p, Ψ)` in ratio/multiplicity form.
//!
//! An IFS is stored as a list of map classes, each a contraction ratio
//! (as a base-2 log) with the number of maps sharing it. The frame-generated
//! systems have `2^{d·V_i}` maps per level, so nothing here ever enumerates
//! individual maps; all formulas consume the aggregates.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::frame::{Frame, FrameDocument, FrameError};
use crate::numerics::HybridNumber;

/// `Σ 1/n² = π²/6`.
pub const ZETA_TWO: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

/// `p_n = 1/(C n²)` with `C = π²/6`.
pub fn zeta_probability(n: u64) -> f64 {
    assert!(n >= 1, "symbols start at 1");
    let n = n as f64;
    1.0 / (ZETA_TWO * n * n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapClass {
    pub log2_ratio: f64,
    pub multiplicity: HybridNumber,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Explicit,
    /// Level `level` of the frame family in dimension `d`; the ratio is
    /// `2^{-(U+V)}` and the count `2^{d·V}`.
    FrameLevel { level: usize, d: u32, u: HybridNumber, v: HybridNumber },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfsDescriptor {
    pub maps: Vec<MapClass>,
    pub origin: Origin,
}

impl IfsDescriptor {
    pub fn explicit(maps: Vec<MapClass>) -> Self {
        Self { maps, origin: Origin::Explicit }
    }

    /// Convenience constructor from `(log2_ratio, multiplicity)` pairs.
    pub fn from_pairs(pairs: &[(f64, u64)]) -> Self {
        Self::explicit(
            pairs.iter().map(|&(r, m)| MapClass { log2_ratio: r, multiplicity: m.into() }).collect(),
        )
    }

    pub fn map_count(&self) -> HybridNumber {
        self.maps.iter().fold(HybridNumber::zero(), |acc, m| &acc + &m.multiplicity)
    }

    /// Largest log2 contraction ratio over all maps.
    pub fn max_log2_ratio(&self) -> f64 {
        match &self.origin {
            Origin::FrameLevel { u, v, .. } => -(u + v).to_f64(),
            Origin::Explicit => self.maps.iter().map(|m| m.log2_ratio).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// `log2(#maps) / (-log2 ratio)` for single-ratio systems: the exponent
    /// solving `#maps · c^t = 1`.
    pub fn similarity_exponent(&self) -> Option<f64> {
        match &self.origin {
            Origin::FrameLevel { d, u, v, .. } => Some(f64::from(*d) * v.ratio_f64(&(u + v))),
            Origin::Explicit if self.maps.len() == 1 => {
                let m = &self.maps[0];
                Some(m.multiplicity.log2() / -m.log2_ratio)
            }
            Origin::Explicit => None,
        }
    }
}

/// Level `i` of the frame family: `2^{d·V_i}` maps of ratio `2^{-(U_i+V_i)}`.
///
/// For levels whose `U_i + V_i` overflows an `f64`, `log2_ratio` saturates to
/// `-inf`; closed-form consumers read `origin` instead.
pub fn counterexample_ifs(frame: &Frame, d: u32, i: usize) -> Result<IfsDescriptor, FrameError> {
    assert!(d >= 1, "ambient dimension must be positive");
    let level = frame.level(i)?;
    let exponent = level.v.mul_u64(u64::from(d));
    let multiplicity = HybridNumber::pow2(&exponent);
    let log2_ratio = -(&level.u + &level.v).to_f64();
    Ok(IfsDescriptor {
        maps: vec![MapClass { log2_ratio, multiplicity }],
        origin: Origin::FrameLevel { level: i, d, u: level.u, v: level.v },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbVector {
    Finite(Vec<f64>),
    InverseSquare,
}

impl ProbVector {
    /// `p_n` for a 1-indexed symbol; zero outside a finite vector.
    pub fn p(&self, n: u64) -> f64 {
        match self {
            ProbVector::Finite(values) => values.get(n as usize - 1).copied().unwrap_or(0.0),
            ProbVector::InverseSquare => zeta_probability(n),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ProbVector::Finite(_))
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    Explicit(Vec<IfsDescriptor>),
    Frame { frame: Arc<Frame>, d: u32 },
}

#[derive(Debug, Clone)]
pub struct RifsSpec {
    pub probabilities: ProbVector,
    pub family: Family,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("probabilities sum ≠ 1 (sum = {0})")]
    ProbabilitySum(f64),
    #[error("probability {index} is negative or not finite: {value}")]
    BadProbability { index: usize, value: f64 },
    #[error("{probabilities} probabilities given for {systems} systems")]
    LengthMismatch { probabilities: usize, systems: usize },
    #[error("inverse-square probabilities need a frame family")]
    InfiniteSupport,
    #[error("IFS {ifs}: log2 ratio {log2_ratio} is not a contraction")]
    NotAContraction { ifs: usize, log2_ratio: f64 },
    #[error("IFS {ifs}: map count < 2")]
    TooFewMaps { ifs: usize },
    #[error("IFS {ifs}: multiplicity must be positive")]
    ZeroMultiplicity { ifs: usize },
    #[error("eta = {eta} must lie in (0,1) and exceed every ratio (max {max_ratio})")]
    BadEta { eta: f64, max_ratio: f64 },
    #[error("ambient dimension d must be at least 1")]
    ZeroDimension,
    #[error("pseudo-frames are not valid specs")]
    PseudoFrame,
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("no IFS at index {0}")]
    NoSuchIfs(usize),
}

impl RifsSpec {
    /// The counterexample: frame family in dimension `d` with `p_n = 1/(C n²)`.
    pub fn counterexample(frame: Arc<Frame>, d: u32) -> Result<Self, SpecError> {
        build_spec(ProbVector::InverseSquare, Family::Frame { frame, d }, None)
    }

    pub fn explicit(probabilities: Vec<f64>, systems: Vec<IfsDescriptor>) -> Result<Self, SpecError> {
        build_spec(ProbVector::Finite(probabilities), Family::Explicit(systems), None)
    }

    /// The IFS at 1-indexed position `i`.
    pub fn ifs(&self, i: usize) -> Result<IfsDescriptor, SpecError> {
        match &self.family {
            Family::Explicit(list) => {
                list.get(i.wrapping_sub(1)).cloned().ok_or(SpecError::NoSuchIfs(i))
            }
            Family::Frame { frame, d } => Ok(counterexample_ifs(frame, *d, i)?),
        }
    }

    pub fn is_frame_family(&self) -> bool {
        matches!(self.family, Family::Frame { .. })
    }

    pub fn dimension(&self) -> Option<u32> {
        match self.family {
            Family::Frame { d, .. } => Some(d),
            Family::Explicit(_) => None,
        }
    }

    /// Indices with positive probability, if finitely many.
    pub fn finite_support(&self) -> Option<Vec<usize>> {
        match &self.probabilities {
            ProbVector::Finite(values) => {
                Some(values.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, _)| i + 1).collect())
            }
            ProbVector::InverseSquare => None,
        }
    }

    pub fn to_document(&self) -> SpecDocument {
        let probabilities = match &self.probabilities {
            ProbVector::Finite(values) => ProbDocument::Finite { values: values.clone() },
            ProbVector::InverseSquare => ProbDocument::InverseSquare,
        };
        let family = match &self.family {
            Family::Explicit(list) => FamilyDocument::Explicit {
                ifs: list
                    .iter()
                    .map(|ifs| IfsDocument {
                        maps: ifs
                            .maps
                            .iter()
                            .map(|m| MapDocument {
                                log2_ratio: m.log2_ratio,
                                multiplicity: m.multiplicity.to_u64().expect("explicit multiplicities fit u64"),
                            })
                            .collect(),
                    })
                    .collect(),
            },
            Family::Frame { frame, d } => FamilyDocument::Frame { frame: frame.to_document(), d: *d },
        };
        SpecDocument { probabilities, family, eta: Some(self.eta) }
    }
}

fn build_spec(probabilities: ProbVector, family: Family, eta: Option<f64>) -> Result<RifsSpec, SpecError> {
    if let ProbVector::Finite(values) = &probabilities {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(SpecError::BadProbability { index: index + 1, value });
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(SpecError::ProbabilitySum(sum));
        }
    }
    let max_log2_ratio = match &family {
        Family::Explicit(list) => {
            if !probabilities.is_finite() {
                return Err(SpecError::InfiniteSupport);
            }
            if let ProbVector::Finite(values) = &probabilities {
                if values.len() != list.len() {
                    return Err(SpecError::LengthMismatch { probabilities: values.len(), systems: list.len() });
                }
            }
            for (idx, ifs) in list.iter().enumerate() {
                validate_ifs(idx + 1, ifs)?;
            }
            list.iter().map(IfsDescriptor::max_log2_ratio).fold(f64::NEG_INFINITY, f64::max)
        }
        Family::Frame { frame, d } => {
            if *d == 0 {
                return Err(SpecError::ZeroDimension);
            }
            if frame.is_pseudo() {
                return Err(SpecError::PseudoFrame);
            }
            let report = frame.validate();
            if !report.is_valid() {
                return Err(FrameError::Invalid(report).into());
            }
            // U_n + V_n increases with n, so level 1 carries the largest ratio.
            counterexample_ifs(frame, *d, 1)?.max_log2_ratio()
        }
    };
    let max_ratio = max_log2_ratio.exp2();
    let eta = match eta {
        Some(eta) => {
            if !(eta > max_ratio && eta < 1.0) {
                return Err(SpecError::BadEta { eta, max_ratio });
            }
            eta
        }
        None => 0.5 * (1.0 + max_ratio),
    };
    Ok(RifsSpec { probabilities, family, eta })
}

fn validate_ifs(idx: usize, ifs: &IfsDescriptor) -> Result<(), SpecError> {
    for m in &ifs.maps {
        if !(m.log2_ratio < 0.0) {
            return Err(SpecError::NotAContraction { ifs: idx, log2_ratio: m.log2_ratio });
        }
        if m.multiplicity.is_zero() {
            return Err(SpecError::ZeroMultiplicity { ifs: idx });
        }
    }
    if ifs.map_count() < HybridNumber::from_u64(2) {
        return Err(SpecError::TooFewMaps { ifs: idx });
    }
    Ok(())
}

/// Outcome of checking the shared-index-set hypothesis under which the
/// random Bowen formula is known to hold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HypothesisReport {
    pub holds: bool,
    pub reasons: Vec<String>,
    /// The bounded-distortion clause only concerns infinite index sets.
    pub ratio_condition: String,
}

pub fn check_bowen_hypothesis(spec: &RifsSpec) -> Result<HypothesisReport, SpecError> {
    let ratio_condition = "not applicable: every index set is finite".to_string();
    let mut reasons = Vec::new();
    match spec.finite_support() {
        Some(support) => {
            let mut reference: Option<(usize, HybridNumber)> = None;
            for i in support {
                let count = spec.ifs(i)?.map_count();
                match &reference {
                    None => reference = Some((i, count)),
                    Some((j, c)) if *c != count => {
                        reasons.push(format!("IFS {i} has {count} maps but IFS {j} has {c}"));
                    }
                    Some(_) => {}
                }
            }
        }
        None => {
            // Infinite support: every level is drawn with positive probability.
            // Index sets of a frame family differ already between levels 1 and 2.
            let first = spec.ifs(1)?.map_count();
            let second = spec.ifs(2)?.map_count();
            if first != second {
                reasons.push(format!("IFS 2 has {second} maps but IFS 1 has {first}"));
            }
        }
    }
    if reasons.is_empty() {
        reasons.push("all positive-probability systems share one index set".into());
        return Ok(HypothesisReport { holds: true, reasons, ratio_condition });
    }
    Ok(HypothesisReport { holds: false, reasons, ratio_condition })
}

/// Spec configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecDocument {
    pub probabilities: ProbDocument,
    pub family: FamilyDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbDocument {
    Finite { values: Vec<f64> },
    InverseSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyDocument {
    Explicit { ifs: Vec<IfsDocument> },
    Frame { frame: FrameDocument, d: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfsDocument {
    pub maps: Vec<MapDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub log2_ratio: f64,
    pub multiplicity: u64,
}

/// Builds a spec from a parsed document, enforcing every invariant.
pub fn validate_spec(doc: &SpecDocument) -> Result<RifsSpec, SpecError> {
    let probabilities = match &doc.probabilities {
        ProbDocument::Finite { values } => ProbVector::Finite(values.clone()),
        ProbDocument::InverseSquare => ProbVector::InverseSquare,
    };
    let family = match &doc.family {
        FamilyDocument::Explicit { ifs } => Family::Explicit(
            ifs.iter()
                .map(|i| IfsDescriptor::from_pairs(&i.maps.iter().map(|m| (m.log2_ratio, m.multiplicity)).collect::<Vec<_>>()))
                .collect(),
        ),
        FamilyDocument::Frame { frame, d } => Family::Frame { frame: Arc::new(Frame::from_document(frame)?), d: *d },
    };
    build_spec(probabilities, family, doc.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_ifs_doc(values: &str) -> SpecDocument {
        serde_json::from_str(&format!(
            r#"{{"probabilities": {{"kind": "finite", "values": {values}}},
                "family": {{"kind": "explicit", "ifs": [
                    {{"maps": [{{"log2_ratio": -1, "multiplicity": 1}}, {{"log2_ratio": -1, "multiplicity": 1}}]}},
                    {{"maps": [{{"log2_ratio": -2, "multiplicity": 1}}, {{"log2_ratio": -2, "multiplicity": 1}}]}}
                ]}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn counterexample_ifs_examples() {
        let f = Frame::minimal(3);
        let l1 = counterexample_ifs(&f, 1, 1).unwrap();
        assert_eq!(l1.map_count().to_u64(), Some(2));
        assert_eq!(l1.maps[0].log2_ratio, -2.0);
        let l2 = counterexample_ifs(&f, 1, 2).unwrap();
        assert_eq!(l2.map_count().to_u64(), Some(65536));
        assert_eq!(l2.maps[0].log2_ratio, -24.0);
        let l1d2 = counterexample_ifs(&f, 2, 1).unwrap();
        assert_eq!(l1d2.map_count().to_u64(), Some(4));
        assert_eq!(l1d2.maps[0].log2_ratio, -2.0);

        let fixed = Frame::minimal(3).without_extension();
        assert!(matches!(counterexample_ifs(&fixed, 1, 4), Err(FrameError::InsufficientDepth { .. })));
    }

    #[test]
    fn deep_levels_keep_aggregate_form() {
        let f = Frame::minimal(12);
        let ifs = counterexample_ifs(&f, 3, 12).unwrap();
        assert!(!ifs.map_count().is_exact());
        assert!(ifs.maps[0].log2_ratio < 0.0);
    }

    #[test]
    fn zeta_probability_examples() {
        // partial-sum oracle for C, with the integral tail bound added back
        let n = 1_000_000u64;
        let partial: f64 = (1..=n).rev().map(|k| 1.0 / (k as f64 * k as f64)).sum();
        let c_oracle = partial + 1.0 / n as f64 - 0.5 / (n as f64 * n as f64);
        assert!((c_oracle - ZETA_TWO).abs() < 1e-12);

        assert!((zeta_probability(1) - 0.60792710185).abs() < 1e-11);
        assert!((zeta_probability(2) - 0.15198177546).abs() < 1e-11);
        assert_eq!(zeta_probability(2), zeta_probability(1) / 4.0);

        // tail Σ_{k>n} p_k lies in (1/(C(n+1)), 1/(Cn))
        for n in [10u64, 100, 1000] {
            let head: f64 = (1..=n).map(zeta_probability).sum();
            let tail = 1.0 - head;
            assert!(tail > 1.0 / (ZETA_TWO * (n + 1) as f64), "n={n}");
            assert!(tail < 1.0 / (ZETA_TWO * n as f64), "n={n}");
        }
    }

    #[test]
    fn hypothesis_examples() {
        let spec = RifsSpec::explicit(
            vec![0.5, 0.5],
            vec![IfsDescriptor::from_pairs(&[(-1.0, 2)]), IfsDescriptor::from_pairs(&[(-2.0, 2)])],
        )
        .unwrap();
        assert!(check_bowen_hypothesis(&spec).unwrap().holds);

        let ce = RifsSpec::counterexample(Arc::new(Frame::minimal(4)), 1).unwrap();
        let report = check_bowen_hypothesis(&ce).unwrap();
        assert!(!report.holds);
        assert!(report.reasons[0].contains("65536") && report.reasons[0].contains('2'), "{:?}", report.reasons);
        assert!(report.ratio_condition.starts_with("not applicable"));

        let single = RifsSpec::explicit(vec![1.0], vec![IfsDescriptor::from_pairs(&[(-1.0, 2)])]).unwrap();
        assert!(check_bowen_hypothesis(&single).unwrap().holds);

        // zero-probability systems are ignored
        let masked = RifsSpec::explicit(
            vec![1.0, 0.0],
            vec![IfsDescriptor::from_pairs(&[(-1.0, 2)]), IfsDescriptor::from_pairs(&[(-1.0, 3)])],
        )
        .unwrap();
        assert!(check_bowen_hypothesis(&masked).unwrap().holds);
    }

    #[test]
    fn validate_spec_examples() {
        let spec = validate_spec(&two_ifs_doc("[0.5, 0.5]")).unwrap();
        assert_eq!(spec.probabilities, ProbVector::Finite(vec![0.5, 0.5]));
        assert_eq!(spec.eta, 0.75);

        let err = validate_spec(&two_ifs_doc("[0.6, 0.6]")).unwrap_err();
        assert!(matches!(err, SpecError::ProbabilitySum(_)));
        assert!(err.to_string().contains("probabilities sum ≠ 1"));

        let mut doc = two_ifs_doc("[0.5, 0.5]");
        if let FamilyDocument::Explicit { ifs } = &mut doc.family {
            ifs[0].maps[0].log2_ratio = 0.0;
        }
        let err = validate_spec(&doc).unwrap_err();
        assert!(err.to_string().contains("not a contraction"));

        let mut doc = two_ifs_doc("[0.5, 0.5]");
        if let FamilyDocument::Explicit { ifs } = &mut doc.family {
            ifs[1].maps.pop();
        }
        assert_eq!(validate_spec(&doc).unwrap_err(), SpecError::TooFewMaps { ifs: 2 });

        let mut doc = two_ifs_doc("[0.5, 0.5]");
        doc.eta = Some(0.4);
        assert!(matches!(validate_spec(&doc), Err(SpecError::BadEta { .. })));
        doc.eta = Some(0.9);
        assert_eq!(validate_spec(&doc).unwrap().eta, 0.9);

        assert!(matches!(validate_spec(&two_ifs_doc("[1.0]")), Err(SpecError::LengthMismatch { .. })));
    }

    #[test]
    fn frame_spec_documents() {
        let doc: SpecDocument = serde_json::from_str(
            r#"{"probabilities": {"kind": "inverse_square"},
                "family": {"kind": "frame", "frame": {"rule": "minimal", "levels": 5}, "d": 2}}"#,
        )
        .unwrap();
        let spec = validate_spec(&doc).unwrap();
        assert_eq!(spec.dimension(), Some(2));
        assert_eq!(spec.eta, 0.5 * (1.0 + 0.25));

        let bad: SpecDocument = serde_json::from_str(
            r#"{"probabilities": {"kind": "inverse_square"},
                "family": {"kind": "frame", "frame": [["1","1"],["7","16"]], "d": 1}}"#,
        )
        .unwrap();
        assert!(matches!(validate_spec(&bad), Err(SpecError::Frame(FrameError::Invalid(_)))));

        let explicit_infinite: SpecDocument = serde_json::from_str(
            r#"{"probabilities": {"kind": "inverse_square"},
                "family": {"kind": "explicit", "ifs": [{"maps": [{"log2_ratio": -1, "multiplicity": 2}]}]}}"#,
        )
        .unwrap();
        assert_eq!(validate_spec(&explicit_infinite).unwrap_err(), SpecError::InfiniteSupport);

        let pseudo = build_spec(
            ProbVector::InverseSquare,
            Family::Frame { frame: Arc::new(Frame::pseudo(&[(1, 1), (2, 2)])), d: 1 },
            None,
        );
        assert_eq!(pseudo.unwrap_err(), SpecError::PseudoFrame);
    }

    #[test]
    fn similarity_exponent_increases_towards_d() {
        let f = Frame::minimal(20);
        for d in 1..=3u32 {
            let mut prev = 0.0;
            for i in 1..=20 {
                let s = counterexample_ifs(&f, d, i).unwrap().similarity_exponent().unwrap();
                let expected = f64::from(d) * i as f64 / (i as f64 + 1.0);
                assert!(s > prev && s < f64::from(d), "d={d} i={i} s={s}");
                // log-form levels carry the rounding of log2 U_i into the quotient
                let lu = f.level(i).unwrap().u.log2().max(1.0);
                let tol = 1e-12 + 8.0 * f64::EPSILON * lu;
                assert!((s - expected).abs() < tol * f64::from(d), "d={d} i={i} s={s}");
                // closed form agrees with log2(count)/(-log2 ratio) while both fit f64
                if i <= 4 {
                    let ifs = counterexample_ifs(&f, d, i).unwrap();
                    let direct = ifs.map_count().log2() / -ifs.maps[0].log2_ratio;
                    assert!((direct - s).abs() < 1e-12);
                }
                prev = s;
            }
        }
    }

    fn arb_doc() -> impl Strategy<Value = SpecDocument> {
        let map = (-40.0f64..-1e-3, 1u64..5).prop_map(|(r, m)| MapDocument { log2_ratio: r, multiplicity: m });
        let ifs = prop::collection::vec(map, 2..4).prop_map(|maps| IfsDocument { maps });
        prop::collection::vec((ifs, 0.01f64..1.0), 1..5).prop_map(|systems| {
            let total: f64 = systems.iter().map(|(_, w)| w).sum();
            let mut values: Vec<f64> = systems.iter().map(|(_, w)| w / total).collect();
            let head: f64 = values[..values.len() - 1].iter().sum();
            *values.last_mut().unwrap() = 1.0 - head;
            SpecDocument {
                probabilities: ProbDocument::Finite { values },
                family: FamilyDocument::Explicit { ifs: systems.into_iter().map(|(i, _)| i).collect() },
                eta: None,
            }
        })
    }

    proptest! {
        #[test]
        fn spec_documents_round_trip(doc in arb_doc()) {
            let spec = validate_spec(&doc).unwrap();
            let first = spec.to_document();
            let json = serde_json::to_string(&first).unwrap();
            let reparsed: SpecDocument = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(&reparsed, &first);
            let again = validate_spec(&reparsed).unwrap();
            prop_assert_eq!(again.to_document(), first);
            prop_assert_eq!(again.eta.to_bits(), spec.eta.to_bits());
        }
    }
}
