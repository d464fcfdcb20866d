//! Frames: pairs of positive integer sequences `(U_n, V_n)` with
//! `U_1 >= 1`, `n·U_n <= V_n` and `(U_n + V_n)^3 <= U_{n+1}`.
//!
//! A [`Frame`] stores a materialized prefix of levels and, unless built as a
//! pseudo-frame or with extension disabled, grows on demand when a deeper
//! level is requested. Extension always uses the tight recursion, scaled by
//! the slack multiplier of the level when one is configured, so extended
//! levels satisfy the frame clauses by construction.

use std::fmt;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::numerics::{HybridNumber, ParseHybridError, DEFAULT_EXACT_BITS};

/// Levels materialized by default when a frame is generated.
pub const DEFAULT_FRAME_DEPTH: usize = 32;

/// Hard limit on on-demand extension.
pub const DEFAULT_MAX_EXTENSION: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLevel {
    pub u: HybridNumber,
    pub v: HybridNumber,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenerationRule {
    /// Levels supplied by the caller; deeper levels continue tightly.
    Explicit,
    /// Every inequality taken with equality.
    Minimal,
    /// Tight values scaled by a per-level multiplier (last one repeats).
    CustomSlack(Vec<u64>),
    /// Arbitrary pairs with validation bypassed; only for enumeration oracles.
    Pseudo,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("a frame needs at least one level")]
    Empty,
    #[error("level {requested} requested but the frame has {depth} levels and cannot be extended")]
    InsufficientDepth { requested: usize, depth: usize },
    #[error("level index must be at least 1")]
    ZeroLevel,
    #[error("invalid frame: {0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Parse(#[from] ParseHybridError),
    #[error("unknown frame rule {0:?} (expected \"minimal\" or \"slack\")")]
    UnknownRule(String),
    #[error("slack multipliers must be nonempty and positive")]
    BadMultipliers,
}

/// Clause of the frame definition that a level violates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// `U_n` or `V_n` is zero.
    NonPositive,
    /// `U_1 >= 1`.
    F1,
    /// `n·U_n <= V_n`.
    F2Ratio,
    /// `(U_n + V_n)^3 <= U_{n+1}`.
    F2Growth,
    /// `k + 1 <= V_k` for `k >= 2`.
    AuxiliaryGrowth,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Clause::NonPositive => "entries must be positive",
            Clause::F1 => "(F1) U_1 >= 1",
            Clause::F2Ratio => "(F2) n*U_n <= V_n",
            Clause::F2Growth => "(F2) (U_n+V_n)^3 <= U_{n+1}",
            Clause::AuxiliaryGrowth => "k+1 <= V_k for k >= 2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub level: usize,
    pub clause: Clause,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub levels: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "{} levels, no violations", self.levels);
        }
        let parts: Vec<String> =
            self.violations.iter().map(|v| format!("level {}: {} ({})", v.level, v.clause, v.detail)).collect();
        f.write_str(&parts.join("; "))
    }
}

/// `a <= b`, exact for exact operands and with a 2^-40 relative slack on
/// the log magnitude otherwise.
fn le_hybrid(a: &HybridNumber, b: &HybridNumber) -> bool {
    if a.is_exact() && b.is_exact() {
        return a <= b;
    }
    if a <= b {
        return true;
    }
    let slack = 2f64.powi(-40);
    let (la, lb) = if a.log2().is_finite() && b.log2().is_finite() {
        (a.log2(), b.log2())
    } else {
        (a.log2_log2(), b.log2_log2())
    };
    la <= lb + slack * lb.abs()
}

/// Checks every clause of the frame definition on the given pairs.
pub fn validate_frame(candidate: &[FrameLevel]) -> Result<ValidationReport, FrameError> {
    if candidate.is_empty() {
        return Err(FrameError::Empty);
    }
    let mut violations = Vec::new();
    for (idx, level) in candidate.iter().enumerate() {
        let n = idx + 1;
        if level.u.is_zero() || level.v.is_zero() {
            violations.push(Violation {
                level: n,
                clause: Clause::NonPositive,
                detail: format!("U_{n}={}, V_{n}={}", level.u, level.v),
            });
        }
        if n == 1 && level.u < HybridNumber::one() {
            violations.push(Violation { level: 1, clause: Clause::F1, detail: format!("U_1={}", level.u) });
        }
        let n_u = level.u.mul_u64(n as u64);
        if !le_hybrid(&n_u, &level.v) {
            violations.push(Violation {
                level: n,
                clause: Clause::F2Ratio,
                detail: format!("{n}*U_{n}={n_u} > V_{n}={}", level.v),
            });
        }
        if let Some(next) = candidate.get(idx + 1) {
            let cube = (&level.u + &level.v).pow3_capped(DEFAULT_EXACT_BITS);
            if !le_hybrid(&cube, &next.u) {
                violations.push(Violation {
                    level: n,
                    clause: Clause::F2Growth,
                    detail: format!("(U_{n}+V_{n})^3={cube} > U_{}={}", n + 1, next.u),
                });
            }
        }
        if n >= 2 && !le_hybrid(&HybridNumber::from_u64(n as u64 + 1), &level.v) {
            violations.push(Violation {
                level: n,
                clause: Clause::AuxiliaryGrowth,
                detail: format!("V_{n}={} < {}", level.v, n + 1),
            });
        }
    }
    Ok(ValidationReport { levels: candidate.len(), violations })
}

/// A frame with a materialized prefix of levels and optional lazy extension.
///
/// Extension takes a write lock; readers always observe a consistent prefix.
#[derive(Debug)]
pub struct Frame {
    rule: GenerationRule,
    levels: RwLock<Vec<FrameLevel>>,
    declared: usize,
    max_depth: usize,
    exact_bits: u64,
}

impl Clone for Frame {
    fn clone(&self) -> Self {
        Self {
            rule: self.rule.clone(),
            levels: RwLock::new(self.levels.read().unwrap().clone()),
            declared: self.declared,
            max_depth: self.max_depth,
            exact_bits: self.exact_bits,
        }
    }
}

impl Frame {
    /// The tight frame: `U_1 = 1`, `V_n = n·U_n`, `U_{n+1} = (U_n + V_n)^3`.
    pub fn minimal(levels: usize) -> Self {
        Self::generated(GenerationRule::Minimal, levels)
    }

    /// Tight values multiplied by `multipliers[n-1]` (the last one repeats).
    pub fn with_slack(levels: usize, multipliers: Vec<u64>) -> Result<Self, FrameError> {
        if multipliers.is_empty() || multipliers.contains(&0) {
            return Err(FrameError::BadMultipliers);
        }
        Ok(Self::generated(GenerationRule::CustomSlack(multipliers), levels))
    }

    fn generated(rule: GenerationRule, levels: usize) -> Self {
        let frame = Self {
            rule,
            levels: RwLock::new(Vec::new()),
            declared: levels.max(1),
            max_depth: DEFAULT_MAX_EXTENSION,
            exact_bits: DEFAULT_EXACT_BITS,
        };
        frame.extend_to(levels.max(1));
        frame
    }

    /// An explicit frame; rejected unless every clause holds.
    pub fn from_levels(levels: Vec<FrameLevel>) -> Result<Self, FrameError> {
        let report = validate_frame(&levels)?;
        if !report.is_valid() {
            return Err(FrameError::Invalid(report));
        }
        let declared = levels.len();
        Ok(Self {
            rule: GenerationRule::Explicit,
            levels: RwLock::new(levels),
            declared,
            max_depth: DEFAULT_MAX_EXTENSION,
            exact_bits: DEFAULT_EXACT_BITS,
        })
    }

    /// Small pairs that need not satisfy the frame clauses. Never extended.
    pub fn pseudo(pairs: &[(u64, u64)]) -> Self {
        let levels: Vec<FrameLevel> =
            pairs.iter().map(|&(u, v)| FrameLevel { u: u.into(), v: v.into() }).collect();
        let declared = levels.len();
        Self {
            rule: GenerationRule::Pseudo,
            levels: RwLock::new(levels),
            declared,
            max_depth: declared,
            exact_bits: DEFAULT_EXACT_BITS,
        }
    }

    /// Disables on-demand extension past the currently materialized levels.
    pub fn without_extension(mut self) -> Self {
        self.max_depth = self.depth();
        self
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth.max(self.depth());
        self
    }

    pub fn rule(&self) -> &GenerationRule {
        &self.rule
    }

    pub fn is_pseudo(&self) -> bool {
        self.rule == GenerationRule::Pseudo
    }

    /// Number of levels currently materialized.
    pub fn depth(&self) -> usize {
        self.levels.read().unwrap().len()
    }

    /// Number of levels declared at construction (file pairs or requested depth).
    pub fn declared_depth(&self) -> usize {
        self.declared
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Level `n` (1-indexed), extending the frame if needed and allowed.
    pub fn level(&self, n: usize) -> Result<FrameLevel, FrameError> {
        if n == 0 {
            return Err(FrameError::ZeroLevel);
        }
        if let Some(level) = self.levels.read().unwrap().get(n - 1) {
            return Ok(level.clone());
        }
        if n > self.max_depth {
            return Err(FrameError::InsufficientDepth { requested: n, depth: self.depth() });
        }
        self.extend_to(n);
        Ok(self.levels.read().unwrap()[n - 1].clone())
    }

    /// `(log2 U_n, log2 V_n)`; `+inf` for entries in the log-log tier.
    pub fn entry_log2(&self, n: usize) -> Result<(f64, f64), FrameError> {
        let level = self.level(n)?;
        Ok((level.u.log2(), level.v.log2()))
    }

    /// Snapshot of the materialized levels.
    pub fn levels(&self) -> Vec<FrameLevel> {
        self.levels.read().unwrap().clone()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_frame(&self.levels()).expect("frames are never empty")
    }

    fn multiplier(&self, n: usize) -> u64 {
        match &self.rule {
            GenerationRule::CustomSlack(m) => m[(n - 1).min(m.len() - 1)],
            _ => 1,
        }
    }

    fn extend_to(&self, n: usize) {
        let mut levels = self.levels.write().unwrap();
        while levels.len() < n {
            let k = levels.len() + 1;
            let s = self.multiplier(k);
            let tight_u = match levels.last() {
                None => HybridNumber::one(),
                Some(prev) => (&prev.u + &prev.v).pow3_capped(self.exact_bits),
            };
            let u = tight_u.mul_u64(s);
            let v = u.mul_u64(k as u64).mul_u64(s);
            levels.push(FrameLevel { u, v });
        }
    }

    pub fn to_document(&self) -> FrameDocument {
        match &self.rule {
            GenerationRule::Minimal => {
                FrameDocument::Rule { rule: "minimal".into(), levels: self.declared, multipliers: None }
            }
            GenerationRule::CustomSlack(m) => {
                FrameDocument::Rule { rule: "slack".into(), levels: self.declared, multipliers: Some(m.clone()) }
            }
            GenerationRule::Explicit | GenerationRule::Pseudo => FrameDocument::Pairs(
                self.levels()
                    .iter()
                    .take(self.declared)
                    .map(|l| [l.u.to_string(), l.v.to_string()])
                    .collect(),
            ),
        }
    }

    /// The materialized levels written out as decimal (or log-form) pairs.
    pub fn expanded_document(&self) -> FrameDocument {
        FrameDocument::Pairs(self.levels().iter().map(|l| [l.u.to_string(), l.v.to_string()]).collect())
    }

    pub fn from_document(doc: &FrameDocument) -> Result<Self, FrameError> {
        match doc {
            FrameDocument::Pairs(_) => Self::from_levels(doc.parse_levels()?),
            FrameDocument::Rule { rule, levels, multipliers } => match rule.as_str() {
                "minimal" => Ok(Self::minimal(*levels)),
                "slack" => Self::with_slack(*levels, multipliers.clone().unwrap_or_default()),
                other => Err(FrameError::UnknownRule(other.to_string())),
            },
        }
    }
}

/// Frame file format: an array of `[U, V]` decimal-string pairs, or a rule shorthand.
///
/// Entries too large for exact storage are written as `log2:<x>` or `loglog2:<x>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrameDocument {
    Pairs(Vec<[String; 2]>),
    Rule {
        rule: String,
        levels: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        multipliers: Option<Vec<u64>>,
    },
}

impl FrameDocument {
    pub fn parse_levels(&self) -> Result<Vec<FrameLevel>, FrameError> {
        match self {
            FrameDocument::Pairs(pairs) => pairs
                .iter()
                .map(|[u, v]| Ok(FrameLevel { u: u.parse()?, v: v.parse()? }))
                .collect(),
            FrameDocument::Rule { .. } => Ok(Frame::from_document(self)?.levels()),
        }
    }

    /// Validation report for the document, without rejecting invalid frames.
    pub fn validate(&self) -> Result<ValidationReport, FrameError> {
        validate_frame(&self.parse_levels()?)
    }
}
