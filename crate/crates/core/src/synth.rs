//! Gaussian benchmark problems with exactly known `P(Y = 1 | x)`.
//!
//! Class labels are fair coin flips. With `a` depending on the dimension `d`:
//!
//! * `twonorm`: class 1 ~ N(a·1, I), class 0 ~ N(-a·1, I), `a = 2/√d`.
//! * `threenorm`: class 0 is an equal mixture of N(a·1, I) and N(-a·1, I),
//!   class 1 ~ N((a, -a, a, ...), I), `a = 2/√d`.
//! * `ringnorm`: class 0 ~ N(0, 4I), class 1 ~ N(a·1, I), `a = 1/√d`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetTable, TrueConditionals};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Twonorm,
    Threenorm,
    Ringnorm,
}

impl SynthKind {
    pub fn id(self) -> &'static str {
        match self {
            SynthKind::Twonorm => "twonorm",
            SynthKind::Threenorm => "threenorm",
            SynthKind::Ringnorm => "ringnorm",
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "twonorm" => Ok(SynthKind::Twonorm),
            "threenorm" => Ok(SynthKind::Threenorm),
            "ringnorm" => Ok(SynthKind::Ringnorm),
            other => Err(Error::invalid(format!("unknown synthetic dataset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, n: usize, d: usize, seed: u64) -> Result<Self> {
        if n < 2 || d < 1 {
            return Err(Error::invalid(format!("synthetic spec needs n >= 2 and d >= 1 (got n={n}, d={d})")));
        }
        Ok(Self { kind, n, d, seed })
    }

    pub fn dataset_id(&self) -> String {
        format!("{}-n{}-d{}-s{}", self.kind, self.n, self.d, self.seed)
    }

    fn offset(&self) -> f64 {
        let d = self.d as f64;
        match self.kind {
            SynthKind::Twonorm | SynthKind::Threenorm => 2.0 / d.sqrt(),
            SynthKind::Ringnorm => 1.0 / d.sqrt(),
        }
    }
}

impl FromStr for SynthSpec {
    type Err = Error;

    /// Parses `kind:n:d:seed`, e.g. `twonorm:1000:20:7`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [kind, n, d, seed] = parts.as_slice() else {
            return Err(Error::invalid(format!("synthetic spec '{s}' is not kind:n:d:seed")));
        };
        let num = |field: &str, v: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| Error::invalid(format!("synthetic spec '{s}': {field} '{v}' is not a non-negative integer")))
        };
        SynthSpec::new(kind.parse()?, num("n", n)? as usize, num("d", d)? as usize, num("seed", seed)?)
    }
}

/// Isotropic Gaussian log-density without the shared `-d/2 · ln 2π` term.
fn log_density(x: &[f64], mean: impl Fn(usize) -> f64, sd: f64) -> f64 {
    let sq: f64 = x.iter().enumerate().map(|(j, v)| (v - mean(j)).powi(2)).sum();
    -0.5 * sq / (sd * sd) - x.len() as f64 * sd.ln()
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn alternating(a: f64) -> impl Fn(usize) -> f64 {
    move |j| if j % 2 == 0 { a } else { -a }
}

/// `P(Y = 1 | x)` under equal class priors.
pub fn true_conditional(kind: SynthKind, a: f64, x: &[f64]) -> f64 {
    let (l1, l0) = match kind {
        SynthKind::Twonorm => (log_density(x, |_| a, 1.0), log_density(x, |_| -a, 1.0)),
        SynthKind::Threenorm => (
            log_density(x, alternating(a), 1.0),
            log_sum_exp(log_density(x, |_| a, 1.0), log_density(x, |_| -a, 1.0)) - std::f64::consts::LN_2,
        ),
        SynthKind::Ringnorm => (log_density(x, |_| a, 1.0), log_density(x, |_| 0.0, 2.0)),
    };
    let z = l1 - l0;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn generate(spec: &SynthSpec) -> Result<(DatasetTable, TrueConditionals)> {
    SynthSpec::new(spec.kind, spec.n, spec.d, spec.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = spec.offset();
    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    let mut q = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let y = rng.random_bool(0.5);
        let (center, sd): (Box<dyn Fn(usize) -> f64>, f64) = match (spec.kind, y) {
            (SynthKind::Twonorm, true) => (Box::new(move |_| a), 1.0),
            (SynthKind::Twonorm, false) => (Box::new(move |_| -a), 1.0),
            (SynthKind::Threenorm, true) => (Box::new(alternating(a)), 1.0),
            (SynthKind::Threenorm, false) => {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                (Box::new(move |_| sign * a), 1.0)
            }
            (SynthKind::Ringnorm, true) => (Box::new(move |_| a), 1.0),
            (SynthKind::Ringnorm, false) => (Box::new(|_| 0.0), 2.0),
        };
        let x: Vec<f64> = (0..spec.d)
            .map(|j| center(j) + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        q.push(true_conditional(spec.kind, a, &x));
        rows.push(x);
        labels.push(u8::from(y));
    }
    Ok((DatasetTable::new(spec.dataset_id(), rows, labels)?, TrueConditionals::new(q)?))
}
