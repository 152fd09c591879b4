//! Synthetic micro-benchmarks with a timing side channel.
//!
//! Inputs are bit strings. Bit positions count from 0 at the least
//! significant bit; the string is written most-significant bit first, and
//! "leftmost" refers to that written order.
//!
//! * `LSB0` calls `F_p` for `p` the position of the least significant 0 and
//!   runs for `unit·(p+1)` on average.
//! * `MSB0` is the same with the most significant 0.
//! * `Pat(d)` finds the leftmost occurrence of `d` at string index `i` and
//!   calls `F_i … F_{i+|d|-1}`, where `F_j` costs `unit·j`.
//!
//! An input without a 0 bit (or without the pattern) calls `F_none`, which
//! costs one `unit`. Timings are sampled from `Normal(mean, noise)` rather
//! than measured.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::trace::{Corpus, TraceRecord};

pub const SENTINEL_METHOD: &str = "F_none";
/// Sampled timings are floored here so records stay valid.
const MIN_TIMING_S: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    Lsb0,
    Msb0,
    /// Pattern bits, most significant first.
    Pat(Vec<bool>),
}

impl Family {
    pub fn pattern(bits: &str) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::BenchSpec("empty pattern".into()));
        }
        bits.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::BenchSpec(format!("pattern bit {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Family::Pat)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Lsb0 => f.write_str("lsb0"),
            Family::Msb0 => f.write_str("msb0"),
            Family::Pat(d) => {
                f.write_str("pat")?;
                d.iter()
                    .try_for_each(|b| f.write_str(if *b { "1" } else { "0" }))
            }
        }
    }
}

/// How random inputs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSampling {
    /// Every bit independent and fair.
    Uniform,
    /// LSB0/MSB0 only: the position of the relevant 0 is uniform over all
    /// positions, bits on the near side are 1 and the rest are fair.
    Stratified,
}

impl FromStr for InputSampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "stratified" => Ok(Self::Stratified),
            other => Err(Error::BenchSpec(format!("unknown sampling {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub family: Family,
    pub input_bits: usize,
    pub num_inputs: usize,
    pub repeats: usize,
    pub time_unit_ms: f64,
    pub noise_std_ms: f64,
    pub sampling: InputSampling,
    pub seed: u64,
}

impl BenchSpec {
    /// Defaults: 10 repeats, 10 ms unit, 1 ms noise; stratified inputs for
    /// LSB0/MSB0 and uniform inputs for patterns.
    pub fn new(family: Family, input_bits: usize, num_inputs: usize, seed: u64) -> Self {
        let sampling = match family {
            Family::Pat(_) => InputSampling::Uniform,
            _ => InputSampling::Stratified,
        };
        Self {
            family,
            input_bits,
            num_inputs,
            repeats: 10,
            time_unit_ms: 10.0,
            noise_std_ms: 1.0,
            sampling,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BenchSpec(m.into()));
        if self.input_bits == 0 {
            return bad("input_bits must be positive");
        }
        if let Family::Pat(d) = &self.family {
            if d.len() > self.input_bits {
                return bad("pattern longer than the input");
            }
            if self.sampling == InputSampling::Stratified {
                return bad("stratified sampling applies to lsb0/msb0 only");
            }
        }
        if self.num_inputs == 0 {
            return bad("num_inputs must be positive");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if !(self.time_unit_ms > 0.0 && self.time_unit_ms.is_finite()) {
            return bad("time_unit_ms must be positive");
        }
        if !(self.noise_std_ms >= 0.0 && self.noise_std_ms.is_finite()) {
            return bad("noise_std_ms must be non-negative");
        }
        Ok(())
    }
}

/// What one input does: methods called and its mean running time.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub methods: Vec<String>,
    pub mean_ms: f64,
}

fn method(j: usize) -> String {
    format!("F{j}")
}

fn sentinel(unit: f64) -> Execution {
    Execution {
        methods: vec![SENTINEL_METHOD.to_string()],
        mean_ms: unit,
    }
}

/// `input[p]` is bit `p` (0 = least significant).
pub fn execute(family: &Family, input: &[bool], unit_ms: f64) -> Execution {
    let zero_at = |p: usize| Execution {
        methods: vec![method(p)],
        mean_ms: unit_ms * (p + 1) as f64,
    };
    match family {
        Family::Lsb0 => input
            .iter()
            .position(|b| !b)
            .map_or_else(|| sentinel(unit_ms), zero_at),
        Family::Msb0 => input
            .iter()
            .rposition(|b| !b)
            .map_or_else(|| sentinel(unit_ms), zero_at),
        Family::Pat(d) => {
            let written: Vec<bool> = input.iter().rev().copied().collect();
            match written.windows(d.len()).position(|w| w == d.as_slice()) {
                Some(i) => Execution {
                    methods: (i..i + d.len()).map(method).collect(),
                    mean_ms: (i..i + d.len()).map(|j| unit_ms * j as f64).sum(),
                },
                None => sentinel(unit_ms),
            }
        }
    }
}

fn draw_input(spec: &BenchSpec, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let n = spec.input_bits;
    let mut bits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    if spec.sampling == InputSampling::Stratified {
        let p = rng.random_range(0..n);
        match spec.family {
            Family::Lsb0 => bits[..p].iter_mut().for_each(|b| *b = true),
            Family::Msb0 => bits[p + 1..].iter_mut().for_each(|b| *b = true),
            Family::Pat(_) => unreachable!("rejected by validate"),
        }
        bits[p] = false;
    }
    bits
}

/// `repeats` timing draws in seconds for an execution.
pub fn sample_timings(exec: &Execution, spec: &BenchSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let noise = Normal::new(exec.mean_ms, spec.noise_std_ms).expect("validated noise");
    (0..spec.repeats)
        .map(|_| (noise.sample(rng) / 1000.0).max(MIN_TIMING_S))
        .collect()
}

/// Generates one trace per random input.
pub fn generate(spec: &BenchSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let width = (spec.num_inputs - 1).to_string().len();
    let traces = (0..spec.num_inputs)
        .map(|i| {
            let input = draw_input(spec, &mut rng);
            let exec = execute(&spec.family, &input, spec.time_unit_ms);
            let timings = sample_timings(&exec, spec, &mut rng);
            TraceRecord {
                id: format!("input-{i:0width$}"),
                counts: exec.methods.into_iter().map(|m| (m, 1)).collect(),
                timings_s: timings,
            }
        })
        .collect();
    Corpus::new(traces)
}
