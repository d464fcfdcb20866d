//! Random iterated function systems, Bowen parameters and random-recursive
//! dimensions, together with the frame-generated family for which the random
//! Bowen formula fails: the Bowen parameter equals the ambient dimension `d`
//! while almost every limit set has Hausdorff dimension zero.
//!
//! Modules, bottom-up:
//!
//! * [`numerics`]: exact/log hybrid integers and log-space sums;
//! * [`frame`]: frame construction and validation;
//! * [`rifs`]: RIFS descriptors, probability vectors, config documents;
//! * [`sampler`]: scenery sampling, Birkhoff averages, lemma sequences;
//! * [`bowen`]: per-level fitness, divergence verdicts, Bowen and Mauldin dimensions;
//! * [`pressure`]: the unrolled branch schedule, special times, subsequence bounds;
//! * [`cover`]: dyadic-cube cylinders, OSC checks, box exponents, point export.

pub mod numerics;
pub mod frame;
pub mod rifs;
pub mod sampler;
pub mod bowen;
pub mod pressure;
pub mod cover;

/// Schema tag carried by every JSON document this crate emits.
pub const SCHEMA: &str = "rifs-lab/1";
