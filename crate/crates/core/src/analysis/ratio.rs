use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A utility ratio; `Infinite` when the denominator is zero and the numerator is not.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ratio {
    Finite(f64),
    Infinite,
}

impl Ratio {
    /// `num / den`, with `0 / 0 = 1`.
    pub fn of(num: f64, den: f64) -> Ratio {
        if den > 0.0 {
            Ratio::Finite(num / den)
        } else if num > 0.0 {
            Ratio::Infinite
        } else {
            Ratio::Finite(1.0)
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Ratio::Finite(x) => x,
            Ratio::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Ratio::Infinite)
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.as_f64().partial_cmp(&other.as_f64())
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Finite(x) => write!(f, "{x}"),
            Ratio::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Ratio::Finite(x) => s.serialize_f64(*x),
            Ratio::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Ratio::Finite(x)),
            Raw::Str(s) if s == "inf" => Ok(Ratio::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioReport {
    pub per_agent: Vec<Ratio>,
    pub max: Ratio,
    pub worst_agent: usize,
}

/// Benchmark utility over mechanism utility, per agent.
pub fn approx_ratio(mechanism_utilities: &[f64], benchmark_utilities: &[f64]) -> RatioReport {
    let per_agent: Vec<Ratio> =
        benchmark_utilities.iter().zip(mechanism_utilities).map(|(&b, &m)| Ratio::of(b, m)).collect();
    let mut worst_agent = 0;
    for (i, r) in per_agent.iter().enumerate() {
        if *r > per_agent[worst_agent] {
            worst_agent = i;
        }
    }
    let max = per_agent.get(worst_agent).copied().unwrap_or(Ratio::Finite(1.0));
    RatioReport { per_agent, max, worst_agent }
}
