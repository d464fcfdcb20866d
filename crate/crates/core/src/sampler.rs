//! Scenery sampling under the Bernoulli measure, Birkhoff prefix averages,
//! and the greedy record-time sequences `(a_n, b_n)`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::numerics::CompensatedSum;
use crate::rifs::{zeta_probability, ProbVector};

/// Largest symbol the inverse-CDF search will reach before giving up.
pub const DEFAULT_MAX_SYMBOL: u64 = 1_000_000;

/// Environment variable overriding [`DEFAULT_MAX_SYMBOL`].
pub const MAX_SYMBOL_ENV: &str = "RIFS_LAB_MAX_SYMBOL";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("rare tail draw: variate {variate} needs a symbol beyond the cap {max_symbol}")]
    RareTail { variate: f64, max_symbol: u64 },
    #[error("scenery length must be positive")]
    EmptyPath,
    #[error("invalid {MAX_SYMBOL_ENV} value {0:?}")]
    BadEnv(String),
    #[error("finite probability vector has no positive entry")]
    NoSupport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub max_symbol: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { max_symbol: DEFAULT_MAX_SYMBOL }
    }
}

impl SamplerConfig {
    /// Default configuration, with the tail cap taken from `RIFS_LAB_MAX_SYMBOL` if set.
    pub fn from_env() -> Result<Self, SamplerError> {
        match std::env::var(MAX_SYMBOL_ENV) {
            Ok(raw) => match raw.trim().parse::<u64>() {
                Ok(cap) if cap >= 1 => Ok(Self { max_symbol: cap }),
                _ => Err(SamplerError::BadEnv(raw)),
            },
            Err(_) => Ok(Self::default()),
        }
    }
}

/// Inverse-CDF sampler with a cached prefix-sum table.
///
/// For the inverse-square law the table is extended on demand (doubling)
/// until it covers the drawn variate or reaches the symbol cap.
#[derive(Debug, Clone)]
pub struct SymbolSampler {
    probs: ProbVector,
    cdf: Vec<f64>,
    acc: CompensatedSum,
    max_symbol: u64,
}

impl SymbolSampler {
    pub fn new(probs: &ProbVector, config: SamplerConfig) -> Result<Self, SamplerError> {
        let mut sampler =
            Self { probs: probs.clone(), cdf: Vec::new(), acc: CompensatedSum::new(), max_symbol: config.max_symbol };
        match probs {
            ProbVector::Finite(values) => {
                if !values.iter().any(|p| *p > 0.0) {
                    return Err(SamplerError::NoSupport);
                }
                for p in values {
                    sampler.acc.add(*p);
                    sampler.cdf.push(sampler.acc.value());
                }
            }
            ProbVector::InverseSquare => sampler.extend_to(1024.min(config.max_symbol as usize)),
        }
        Ok(sampler)
    }

    fn extend_to(&mut self, len: usize) {
        while self.cdf.len() < len {
            let k = self.cdf.len() as u64 + 1;
            self.acc.add(zeta_probability(k));
            self.cdf.push(self.acc.value());
        }
    }

    /// Smallest symbol `n` with `u < P(X <= n)`.
    pub fn symbol_for(&mut self, u: f64) -> Result<u64, SamplerError> {
        if let ProbVector::Finite(values) = &self.probs {
            let idx = self.cdf.partition_point(|&c| c <= u);
            if idx < self.cdf.len() {
                return Ok(idx as u64 + 1);
            }
            // rounding left the total just below 1: fall back to the last supported symbol
            let last = values.iter().rposition(|p| *p > 0.0).unwrap();
            return Ok(last as u64 + 1);
        }
        while *self.cdf.last().unwrap() <= u {
            let len = self.cdf.len() as u64;
            if len >= self.max_symbol {
                return Err(SamplerError::RareTail { variate: u, max_symbol: self.max_symbol });
            }
            self.extend_to((2 * len).min(self.max_symbol) as usize);
        }
        Ok(self.cdf.partition_point(|&c| c <= u) as u64 + 1)
    }

    pub fn draw<R: Rng>(&mut self, rng: &mut R) -> Result<u64, SamplerError> {
        let u: f64 = rng.gen();
        self.symbol_for(u)
    }

    /// Draws `length` i.i.d. symbols from the stream seeded by `seed`.
    pub fn sample_path(&mut self, length: usize, seed: u64) -> Result<SceneryPath, SamplerError> {
        if length == 0 {
            return Err(SamplerError::EmptyPath);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let symbols = (0..length).map(|_| self.draw(&mut rng)).collect::<Result<Vec<_>, _>>()?;
        Ok(SceneryPath { symbols, seed })
    }
}

/// A sampled prefix `(ω_1, ..., ω_L)` and the seed that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SceneryPath {
    pub symbols: Vec<u64>,
    pub seed: u64,
}

impl SceneryPath {
    /// A hand-written path, for tests and fixed-ω runs.
    pub fn from_symbols(symbols: Vec<u64>) -> Self {
        assert!(symbols.iter().all(|&s| s >= 1), "symbols start at 1");
        Self { symbols, seed: 0 }
    }

    pub fn horizon(&self) -> usize {
        self.symbols.len()
    }

    /// `X_i(ω) = ω_i`, 1-indexed.
    pub fn x(&self, i: usize) -> u64 {
        self.symbols[i - 1]
    }

    /// CSV with one row per prefix: `n, omega_n, prefix_sum, prefix_mean`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "omega_n", "prefix_sum", "prefix_mean"])?;
        let mut sum: u128 = 0;
        for (idx, &s) in self.symbols.iter().enumerate() {
            let n = idx + 1;
            sum += u128::from(s);
            let mean = sum as f64 / n as f64;
            w.write_record([n.to_string(), s.to_string(), sum.to_string(), mean.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sample_scenery(
    probs: &ProbVector,
    length: usize,
    seed: u64,
    config: SamplerConfig,
) -> Result<SceneryPath, SamplerError> {
    SymbolSampler::new(probs, config)?.sample_path(length, seed)
}

/// The index from which `Σ_{i<=n} X_i >= n` holds for every `n` up to the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NOmega {
    pub value: usize,
    /// The condition is only checked up to the sampled horizon.
    pub horizon_limited: bool,
}

/// Smallest `N` with `Σ_{i<=n} X_i >= n` for all `N <= n <= L`.
pub fn find_n_omega(path: &SceneryPath) -> NOmega {
    assert!(path.horizon() > 0, "path must be nonempty");
    let mut sum: u128 = 0;
    let mut last_failure = 0;
    for (idx, &s) in path.symbols.iter().enumerate() {
        sum += u128::from(s);
        if sum < (idx + 1) as u128 {
            last_failure = idx + 1;
        }
    }
    // Every symbol is at least 1, so the prefix sums can never fall short.
    debug_assert_eq!(last_failure, 0);
    NOmega { value: last_failure + 1, horizon_limited: true }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LemmaPair {
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaStatus {
    /// All requested pairs were produced.
    Complete,
    /// The next `a_n` lies beyond the sampled horizon.
    Truncated,
    /// The next record search returned the previous `b_n` (no new record
    /// inside `[1, a_{n+1}]`), so the recursion stalls.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaSequences {
    pub n_omega: usize,
    pub pairs: Vec<LemmaPair>,
    pub status: LemmaStatus,
}

/// `a_1 = N_ω`, `b_n` the first argmax of `X` over `[1, a_n]`, `a_{n+1} = X_{b_n} + 1`.
pub fn lemma_sequences(path: &SceneryPath, count: usize) -> LemmaSequences {
    lemma_sequences_from(path, find_n_omega(path).value, count)
}

/// The same recursion started from an arbitrary `a_1`.
pub fn lemma_sequences_from(path: &SceneryPath, a1: usize, count: usize) -> LemmaSequences {
    assert!(a1 >= 1, "a_1 must be positive");
    let horizon = path.horizon();
    let mut pairs: Vec<LemmaPair> = Vec::with_capacity(count);
    let mut scanned = 0;
    let mut best = 0;
    let mut a = a1;
    let status = loop {
        if pairs.len() == count {
            break LemmaStatus::Complete;
        }
        if a > horizon {
            break LemmaStatus::Truncated;
        }
        while scanned < a {
            scanned += 1;
            if best == 0 || path.x(scanned) > path.x(best) {
                best = scanned;
            }
        }
        let b = best;
        let stalled = match pairs.last() {
            Some(prev) => prev.b == b,
            None => path.x(b) < a as u64,
        };
        if stalled {
            break LemmaStatus::Degenerate;
        }
        pairs.push(LemmaPair { a, b });
        a = usize::try_from(path.x(b)).map_or(usize::MAX, |x| x.saturating_add(1));
    };
    LemmaSequences { n_omega: a1, pairs, status }
}

/// Prefix means `(1/n) Σ_{k<n} f(ω_{k+1})` for `n = 1..=L`.
pub fn birkhoff_average<F: Fn(u64) -> f64>(path: &SceneryPath, observable: F) -> Vec<f64> {
    let mut acc = CompensatedSum::new();
    path.symbols
        .iter()
        .enumerate()
        .map(|(idx, &s)| {
            acc.add(observable(s));
            acc.value() / (idx + 1) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(symbols: &[u64]) -> SceneryPath {
        SceneryPath::from_symbols(symbols.to_vec())
    }

    #[test]
    fn deterministic_finite_law() {
        let p = sample_scenery(&ProbVector::Finite(vec![1.0]), 50, 7, SamplerConfig::default()).unwrap();
        assert!(p.symbols.iter().all(|&s| s == 1));
        assert_eq!(
            sample_scenery(&ProbVector::InverseSquare, 0, 1, SamplerConfig::default()),
            Err(SamplerError::EmptyPath)
        );
    }

    #[test]
    fn zero_probability_symbols_are_never_drawn() {
        let probs = ProbVector::Finite(vec![0.5, 0.0, 0.5]);
        let p = sample_scenery(&probs, 2000, 3, SamplerConfig::default()).unwrap();
        assert!(p.symbols.iter().all(|&s| s == 1 || s == 3));
        assert!(p.symbols.contains(&1) && p.symbols.contains(&3));
    }

    #[test]
    fn inverse_cdf_boundaries() {
        let mut s = SymbolSampler::new(&ProbVector::InverseSquare, SamplerConfig::default()).unwrap();
        let p1 = zeta_probability(1);
        assert_eq!(s.symbol_for(0.0).unwrap(), 1);
        assert_eq!(s.symbol_for(p1 * 0.999_999).unwrap(), 1);
        assert_eq!(s.symbol_for(p1 * 1.000_001).unwrap(), 2);
        // beyond the initial table: P(X > 5000) ≈ 1/(5000 C)
        let deep = s.symbol_for(1.0 - 1.0 / (ZETA * 5000.5)).unwrap();
        assert!((4990..=5010).contains(&deep), "{deep}");

        let mut capped = SymbolSampler::new(&ProbVector::InverseSquare, SamplerConfig { max_symbol: 100 }).unwrap();
        let err = capped.symbol_for(0.999).unwrap_err();
        assert_eq!(err, SamplerError::RareTail { variate: 0.999, max_symbol: 100 });
    }

    const ZETA: f64 = crate::rifs::ZETA_TWO;

    #[test]
    fn sampling_is_reproducible() {
        let a = sample_scenery(&ProbVector::InverseSquare, 5000, 99, SamplerConfig::default()).unwrap();
        let b = sample_scenery(&ProbVector::InverseSquare, 5000, 99, SamplerConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = sample_scenery(&ProbVector::InverseSquare, 5000, 100, SamplerConfig::default()).unwrap();
        assert_ne!(a, c);
        // prefixes agree across horizons
        let short = sample_scenery(&ProbVector::InverseSquare, 100, 99, SamplerConfig::default()).unwrap();
        assert_eq!(short.symbols[..], a.symbols[..100]);
    }

    #[test]
    fn n_omega_examples() {
        assert_eq!(find_n_omega(&path(&[4, 1, 9, 2])), NOmega { value: 1, horizon_limited: true });
        let ones = path(&[1; 20]);
        assert_eq!(find_n_omega(&ones).value, 1);
        let sampled = sample_scenery(&ProbVector::InverseSquare, 2000, 5, SamplerConfig::default()).unwrap();
        // prefix-sum oracle
        let mut s = 0u64;
        for (i, x) in sampled.symbols.iter().enumerate() {
            s += x;
            assert!(s >= i as u64 + 1);
        }
        assert_eq!(find_n_omega(&sampled).value, 1);
    }

    #[test]
    fn lemma_hand_traces() {
        let seqs = lemma_sequences(&path(&[3, 1, 2, 5, 1, 1, 1]), 3);
        assert_eq!(seqs.n_omega, 1);
        assert_eq!(seqs.pairs, vec![LemmaPair { a: 1, b: 1 }, LemmaPair { a: 4, b: 4 }]);
        // a_3 = ω_4 + 1 = 6; the max over [1,6] is still ω_4
        assert_eq!(seqs.status, LemmaStatus::Degenerate);

        let stalled = lemma_sequences(&path(&[3, 1, 2, 1, 1]), 3);
        assert_eq!(stalled.pairs, vec![LemmaPair { a: 1, b: 1 }]);
        assert_eq!(stalled.status, LemmaStatus::Degenerate);

        let ones = lemma_sequences(&path(&[1; 10]), 3);
        assert_eq!(ones.pairs, vec![LemmaPair { a: 1, b: 1 }]);
        assert_eq!(ones.status, LemmaStatus::Degenerate);

        let full = lemma_sequences(&path(&[1, 2, 4, 1, 9, 1, 1, 1, 1, 12]), 3);
        assert_eq!(
            full.pairs,
            vec![LemmaPair { a: 1, b: 1 }, LemmaPair { a: 2, b: 2 }, LemmaPair { a: 3, b: 3 }]
        );
        assert_eq!(full.status, LemmaStatus::Complete);
        let more = lemma_sequences(&path(&[1, 2, 4, 1, 9, 1, 1, 1, 1, 12]), 6);
        // a_4 = 5 → b_4 = 5 (ω=9), a_5 = 10 → b_5 = 10 (ω=12), a_6 = 13 > horizon
        assert_eq!(more.pairs.len(), 5);
        assert_eq!(more.pairs[4], LemmaPair { a: 10, b: 10 });
        assert_eq!(more.status, LemmaStatus::Truncated);
    }

    #[test]
    fn lemma_from_later_start() {
        let p = path(&[1, 1, 3, 1, 1, 1]);
        let seqs = lemma_sequences_from(&p, 3, 1);
        assert_eq!(seqs.pairs, vec![LemmaPair { a: 3, b: 3 }]);
        // (S2) fails for the first pair when the start exceeds the prefix max
        let bad = lemma_sequences_from(&p, 5, 2);
        assert!(bad.pairs.is_empty());
        assert_eq!(bad.status, LemmaStatus::Degenerate);
    }

    #[test]
    fn birkhoff_examples() {
        let p = path(&[3, 1, 2, 7]);
        assert_eq!(birkhoff_average(&p, |_| 1.0), vec![1.0; 4]);
        assert_eq!(birkhoff_average(&p, |s| s as f64), vec![3.0, 2.0, 2.0, 3.25]);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        path(&[3, 1, 2]).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,omega_n,prefix_sum,prefix_mean\n1,3,3,3\n2,1,4,2\n3,2,6,2\n");
    }
}
