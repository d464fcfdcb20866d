//! Exact/approximate hybrid arithmetic and log-space accumulation.
//!
//! Frame entries grow triple-exponentially, so a single number type has to
//! cover small integers that tests want to compare bit-exactly as well as
//! magnitudes whose base-2 logarithm no longer fits in an `f64`.
//! [`HybridNumber`] holds a value in one of three tiers:
//!
//! * exact: an arbitrary-precision integer with at most `T_bits` bits;
//! * log2: the base-2 logarithm of the magnitude;
//! * log-log2: `log2(log2(x))`, used once `log2(x)` itself exceeds `1e300`.
//!
//! Promotion is one-way: once a value leaves the exact tier it never comes
//! back, even if a later operation would make it small again.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// Default bit-length above which exact integers are promoted to log form.
pub const DEFAULT_EXACT_BITS: u64 = 4096;

/// log2 magnitudes above this value are stored in the log-log tier.
const LOG_LOG_THRESHOLD: f64 = 1e300;

/// Which tier a [`HybridNumber`] currently lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Form {
    Exact,
    Log2,
    LogLog2,
}

impl Form {
    pub fn as_str(self) -> &'static str {
        match self {
            Form::Exact => "exact",
            Form::Log2 => "log2",
            Form::LogLog2 => "loglog2",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Exact(BigUint),
    Log2(f64),
    LogLog2(f64),
}

/// A nonnegative quantity stored exactly or as a (possibly iterated) log2 magnitude.
#[derive(Clone, Debug)]
pub struct HybridNumber {
    repr: Repr,
}

impl HybridNumber {
    pub fn zero() -> Self {
        Self::from_u64(0)
    }

    pub fn one() -> Self {
        Self::from_u64(1)
    }

    pub fn from_u64(value: u64) -> Self {
        Self { repr: Repr::Exact(BigUint::from(value)) }
    }

    /// Wraps an integer, promoting it if it exceeds `DEFAULT_EXACT_BITS`.
    pub fn from_biguint(value: BigUint) -> Self {
        Self::from_biguint_capped(value, DEFAULT_EXACT_BITS)
    }

    pub fn from_biguint_capped(value: BigUint, cap_bits: u64) -> Self {
        Self { repr: Repr::Exact(value) }.normalized(cap_bits)
    }

    /// An approximate value with the given base-2 logarithm.
    ///
    /// `log2` must not be NaN; `-inf` is mapped to exact zero.
    pub fn from_log2(log2: f64) -> Self {
        assert!(!log2.is_nan(), "log2 magnitude must not be NaN");
        if log2 == f64::NEG_INFINITY {
            return Self::zero();
        }
        Self { repr: Repr::Log2(log2) }.normalized(DEFAULT_EXACT_BITS)
    }

    /// An approximate value `x` with `log2(log2(x)) = loglog2`.
    pub fn from_log2_log2(loglog2: f64) -> Self {
        assert!(loglog2.is_finite(), "log-log magnitude must be finite");
        if loglog2 < LOG_LOG_THRESHOLD.log2() {
            return Self::from_log2(loglog2.exp2());
        }
        Self { repr: Repr::LogLog2(loglog2) }
    }

    /// `2^exponent`, exact while the exponent is exact and at most `cap_bits`.
    pub fn pow2_capped(exponent: &HybridNumber, cap_bits: u64) -> Self {
        match &exponent.repr {
            Repr::Exact(e) => match e.to_u64() {
                Some(e) if e < cap_bits => Self { repr: Repr::Exact(BigUint::one() << e) },
                _ => Self::from_log2_or_tower(exponent),
            },
            _ => Self::from_log2_or_tower(exponent),
        }
    }

    pub fn pow2(exponent: &HybridNumber) -> Self {
        Self::pow2_capped(exponent, DEFAULT_EXACT_BITS)
    }

    fn from_log2_or_tower(exponent: &HybridNumber) -> Self {
        match exponent.repr {
            // Beyond a second level of exponentiation the magnitude saturates.
            Repr::LogLog2(t) => Self { repr: Repr::LogLog2(t.exp2().min(f64::MAX)) },
            _ => {
                let l = exponent.to_f64();
                if l.is_finite() {
                    Self::from_log2(l)
                } else {
                    Self::from_log2_log2(exponent.log2())
                }
            }
        }
    }

    pub fn form(&self) -> Form {
        match self.repr {
            Repr::Exact(_) => Form::Exact,
            Repr::Log2(_) => Form::Log2,
            Repr::LogLog2(_) => Form::LogLog2,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.repr, Repr::Exact(v) if v.is_zero())
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.repr, Repr::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigUint> {
        match &self.repr {
            Repr::Exact(v) => Some(v),
            _ => None,
        }
    }

    /// Base-2 logarithm of the magnitude; `-inf` for zero, `+inf` when the
    /// value lives in the log-log tier beyond `f64` range.
    pub fn log2(&self) -> f64 {
        match &self.repr {
            Repr::Exact(v) => biguint_log2(v),
            Repr::Log2(l) => *l,
            Repr::LogLog2(t) => t.exp2(),
        }
    }

    /// `log2(log2(x))`; `-inf` for values at most 1.
    pub fn log2_log2(&self) -> f64 {
        match &self.repr {
            Repr::LogLog2(t) => *t,
            _ => {
                let l = self.log2();
                if l > 0.0 {
                    l.log2()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Nearest `f64`, saturating to `+inf`.
    pub fn to_f64(&self) -> f64 {
        match &self.repr {
            Repr::Exact(v) => biguint_to_f64(v),
            Repr::Log2(l) => l.exp2(),
            Repr::LogLog2(_) => f64::INFINITY,
        }
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.as_exact().and_then(|v| v.to_u64())
    }

    pub fn add_capped(&self, rhs: &HybridNumber, cap_bits: u64) -> HybridNumber {
        if let (Repr::Exact(a), Repr::Exact(b)) = (&self.repr, &rhs.repr) {
            return Self { repr: Repr::Exact(a + b) }.normalized(cap_bits);
        }
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.form() == Form::LogLog2 || rhs.form() == Form::LogLog2 {
            // At this scale the smaller operand is below the resolution of the larger.
            return Self { repr: Repr::LogLog2(self.log2_log2().max(rhs.log2_log2())) };
        }
        Self { repr: Repr::Log2(log2_add(self.log2(), rhs.log2())) }.normalized(cap_bits)
    }

    pub fn mul_capped(&self, rhs: &HybridNumber, cap_bits: u64) -> HybridNumber {
        if let (Repr::Exact(a), Repr::Exact(b)) = (&self.repr, &rhs.repr) {
            return Self { repr: Repr::Exact(a * b) }.normalized(cap_bits);
        }
        if self.is_zero() || rhs.is_zero() {
            return Self::zero();
        }
        let (big, small) = if self >= rhs { (self, rhs) } else { (rhs, self) };
        if big.form() == Form::LogLog2 {
            // log2(x·y) = log2 x + log2 y, taken in the log-log tier.
            let t = big.log2_log2();
            let loglog = if small.form() == Form::LogLog2 {
                log2_add(t, small.log2_log2())
            } else {
                let l = small.log2();
                let frac = if l == 0.0 { 0.0 } else { l.signum() * (l.abs().log2() - t).exp2() };
                t + (1.0 + frac).log2()
            };
            return Self { repr: Repr::LogLog2(loglog) };
        }
        Self { repr: Repr::Log2(self.log2() + rhs.log2()) }.normalized(cap_bits)
    }

    pub fn pow3_capped(&self, cap_bits: u64) -> HybridNumber {
        match &self.repr {
            Repr::Exact(a) => Self { repr: Repr::Exact(a * a * a) }.normalized(cap_bits),
            Repr::Log2(l) => Self { repr: Repr::Log2(3.0 * l) }.normalized(cap_bits),
            Repr::LogLog2(t) => Self { repr: Repr::LogLog2(t + 3f64.log2()) },
        }
    }

    pub fn mul_u64(&self, rhs: u64) -> HybridNumber {
        self.mul_capped(&HybridNumber::from_u64(rhs), DEFAULT_EXACT_BITS)
    }

    /// `self - rhs` when `rhs <= self`. Exact operands subtract exactly; log
    /// forms subtract in log space and lose precision under cancellation.
    pub fn checked_sub(&self, rhs: &HybridNumber) -> Option<HybridNumber> {
        if rhs > self {
            return None;
        }
        if let (Repr::Exact(a), Repr::Exact(b)) = (&self.repr, &rhs.repr) {
            return Some(Self { repr: Repr::Exact(a - b) });
        }
        if rhs.is_zero() {
            return Some(self.clone());
        }
        if self.form() == Form::LogLog2 {
            if rhs.form() == Form::LogLog2 && rhs.log2_log2() == self.log2_log2() {
                return Some(Self::zero());
            }
            return Some(self.clone());
        }
        let (la, lb) = (self.log2(), rhs.log2());
        if la == lb {
            return Some(Self::zero());
        }
        let diff = la + (-(lb - la).exp2()).ln_1p() / std::f64::consts::LN_2;
        Some(Self { repr: Repr::Log2(diff) })
    }

    /// `self / den` as an `f64`, saturating to `0` or `+inf`.
    pub fn ratio_f64(&self, den: &HybridNumber) -> f64 {
        if den.is_zero() {
            return if self.is_zero() { f64::NAN } else { f64::INFINITY };
        }
        if self.is_zero() {
            return 0.0;
        }
        if let (Some(a), Some(b)) = (self.exact_f64(), den.exact_f64()) {
            return a / b;
        }
        if self.form() == Form::LogLog2 || den.form() == Form::LogLog2 {
            return match self.log2_log2().partial_cmp(&den.log2_log2()) {
                Some(Ordering::Less) => 0.0,
                Some(Ordering::Greater) => f64::INFINITY,
                _ => 1.0,
            };
        }
        (self.log2() - den.log2()).exp2()
    }

    /// The value as an `f64` if it is exact and representable without rounding.
    fn exact_f64(&self) -> Option<f64> {
        match &self.repr {
            Repr::Exact(v) if v.bits() <= 53 => v.to_u64().map(|x| x as f64),
            _ => None,
        }
    }

    fn normalized(self, cap_bits: u64) -> Self {
        match self.repr {
            Repr::Exact(v) if v.bits() > cap_bits => Self { repr: Repr::Log2(biguint_log2(&v)) }.normalized(cap_bits),
            Repr::Log2(l) if l > LOG_LOG_THRESHOLD => Self { repr: Repr::LogLog2(l.log2()) },
            repr => Self { repr },
        }
    }
}

impl From<u64> for HybridNumber {
    fn from(value: u64) -> Self {
        Self::from_u64(value)
    }
}

impl PartialEq for HybridNumber {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HybridNumber {}

impl PartialOrd for HybridNumber {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HybridNumber {
    fn cmp(&self, other: &Self) -> Ordering {
        if let (Repr::Exact(a), Repr::Exact(b)) = (&self.repr, &other.repr) {
            return a.cmp(b);
        }
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        if self.form() == Form::LogLog2 || other.form() == Form::LogLog2 {
            return self.log2_log2().total_cmp(&other.log2_log2());
        }
        self.log2().total_cmp(&other.log2())
    }
}

impl std::ops::Add for &HybridNumber {
    type Output = HybridNumber;
    fn add(self, rhs: &HybridNumber) -> HybridNumber {
        self.add_capped(rhs, DEFAULT_EXACT_BITS)
    }
}

impl std::ops::Mul for &HybridNumber {
    type Output = HybridNumber;
    fn mul(self, rhs: &HybridNumber) -> HybridNumber {
        self.mul_capped(rhs, DEFAULT_EXACT_BITS)
    }
}

/// Decimal for exact values, `log2:<x>` / `loglog2:<x>` otherwise.
impl fmt::Display for HybridNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Exact(v) => write!(f, "{v}"),
            Repr::Log2(l) => write!(f, "log2:{l}"),
            Repr::LogLog2(t) => write!(f, "loglog2:{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {0:?} as a nonnegative integer or log2:/loglog2: magnitude")]
pub struct ParseHybridError(pub String);

/// Serialized through its `Display` form: a decimal string, `log2:x` or `loglog2:x`.
impl serde::Serialize for HybridNumber {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for HybridNumber {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for HybridNumber {
    type Err = ParseHybridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseHybridError(s.to_string());
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("loglog2:") {
            let t: f64 = rest.parse().map_err(|_| err())?;
            if !t.is_finite() {
                return Err(err());
            }
            return Ok(Self::from_log2_log2(t));
        }
        if let Some(rest) = s.strip_prefix("log2:") {
            let l: f64 = rest.parse().map_err(|_| err())?;
            if !l.is_finite() {
                return Err(err());
            }
            return Ok(Self { repr: Repr::Log2(l) }.normalized(DEFAULT_EXACT_BITS));
        }
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        BigUint::from_str(s).map(Self::from_biguint).map_err(|_| err())
    }
}

/// log2 of an integer, rounded from its leading 64 bits.
pub fn biguint_log2(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return (v.to_u64().unwrap() as f64).log2();
    }
    let top = (v >> (bits - 64)).to_u64().unwrap();
    (bits - 64) as f64 + (top as f64).log2()
}

fn biguint_to_f64(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits <= 64 {
        return v.to_u64().unwrap() as f64;
    }
    if bits > 1024 {
        return f64::INFINITY;
    }
    let top = (v >> (bits - 64)).to_u64().unwrap();
    scale_by_pow2(top as f64, (bits - 64) as i32)
}

/// `x · 2^e` without intermediate overflow of `2^e`.
pub fn scale_by_pow2(x: f64, e: i32) -> f64 {
    let mut x = x;
    let mut e = e;
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e)
}

/// `log2(2^a + 2^b)` with a max shift.
pub fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY || hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp2().ln_1p() / std::f64::consts::LN_2
}

/// A nonnegative weight held as its base-2 logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogWeight {
    Zero,
    Positive(f64),
}

impl LogWeight {
    pub fn from_log2(log2: f64) -> Self {
        if log2 == f64::NEG_INFINITY {
            LogWeight::Zero
        } else {
            LogWeight::Positive(log2)
        }
    }

    pub fn from_value(x: f64) -> Self {
        if x == 0.0 {
            LogWeight::Zero
        } else {
            LogWeight::Positive(x.log2())
        }
    }

    pub fn log2(self) -> f64 {
        match self {
            LogWeight::Zero => f64::NEG_INFINITY,
            LogWeight::Positive(l) => l,
        }
    }

    pub fn exp2(self) -> f64 {
        match self {
            LogWeight::Zero => 0.0,
            LogWeight::Positive(l) => l.exp2(),
        }
    }

    pub fn is_zero(self) -> bool {
        matches!(self, LogWeight::Zero)
    }
}

/// log2 of `Σ 2^w` over the weights, shifted by the maximum.
///
/// Terms are accumulated left to right in input order, so the result is
/// reproducible bit for bit for a given input sequence.
pub fn log_sum_exp2(weights: &[LogWeight]) -> LogWeight {
    let max = weights
        .iter()
        .filter_map(|w| match w {
            LogWeight::Positive(l) => Some(*l),
            LogWeight::Zero => None,
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return LogWeight::Zero;
    }
    if max == f64::INFINITY {
        return LogWeight::Positive(f64::INFINITY);
    }
    let mut sum = 0.0;
    for w in weights {
        if let LogWeight::Positive(l) = w {
            sum += (l - max).exp2();
        }
    }
    LogWeight::Positive(max + sum.log2())
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if !t.is_finite() {
            // the correction term would turn into inf - inf
            self.sum = t;
            self.compensation = 0.0;
            return;
        }
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}
