//! Generator specs of the form `name:arg1,arg2`.

use std::fmt;
use std::str::FromStr;

use super::adversarial::{gen_ordinal_worst, gen_rsd_worst, table1};
use super::random::{gen_random, ValueDistribution};
use crate::error::{Error, Result};
use crate::model::Instance;

/// Default eps for the ordinal worst cases.
pub const DEFAULT_EPS: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GeneratorSpec {
    Random { n: usize, dist: ValueDistribution },
    RsdWorst { n: usize, eps: f64 },
    OrdinalWorst { n: usize, eps: f64 },
    Table1,
}

impl GeneratorSpec {
    /// Build the instance; only random families use the seed.
    pub fn generate(&self, seed: u64) -> Result<Instance> {
        match *self {
            GeneratorSpec::Random { n, dist } => gen_random(n, dist, seed),
            GeneratorSpec::RsdWorst { n, eps } => gen_rsd_worst(n, eps),
            GeneratorSpec::OrdinalWorst { n, eps } => gen_ordinal_worst(n, eps),
            GeneratorSpec::Table1 => Ok(table1()),
        }
    }
}

fn bad(spec: &str, why: &str) -> Error {
    Error::InvalidParameter(format!("bad generator spec {spec:?}: {why}"))
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
        let args: Vec<&str> = if args.is_empty() { Vec::new() } else { args.split(',').map(str::trim).collect() };
        let size = |s: Option<&&str>| -> Result<usize> {
            s.ok_or_else(|| bad(spec, "missing size"))?.parse().map_err(|_| bad(spec, "size is not an integer"))
        };
        let eps = |s: Option<&&str>| -> Result<f64> {
            match s {
                None => Ok(DEFAULT_EPS),
                Some(s) => s.parse().map_err(|_| bad(spec, "eps is not a number")),
            }
        };
        match name {
            "random" => {
                let n = size(args.first())?;
                let dist = match args.get(1) {
                    None => ValueDistribution::Uniform01,
                    Some(opt) => match opt.split_once('=') {
                        Some(("grid", k)) => ValueDistribution::Grid(k.parse().map_err(|_| bad(spec, "grid needs an integer"))?),
                        Some(("sparse", p)) => ValueDistribution::Sparse(p.parse().map_err(|_| bad(spec, "sparse needs a number"))?),
                        _ => return Err(bad(spec, "expected grid=K or sparse=P")),
                    },
                };
                if args.len() > 2 {
                    return Err(bad(spec, "too many arguments"));
                }
                Ok(GeneratorSpec::Random { n, dist })
            }
            "rsd-worst" | "ordinal-worst" => {
                if args.len() > 2 {
                    return Err(bad(spec, "too many arguments"));
                }
                let (n, eps) = (size(args.first())?, eps(args.get(1))?);
                Ok(if name == "rsd-worst" { GeneratorSpec::RsdWorst { n, eps } } else { GeneratorSpec::OrdinalWorst { n, eps } })
            }
            "table1" if args.is_empty() => Ok(GeneratorSpec::Table1),
            _ => Err(bad(spec, "unknown generator (random, rsd-worst, ordinal-worst, table1)")),
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Random { n, dist } => match dist {
                ValueDistribution::Uniform01 => write!(f, "random:{n}"),
                ValueDistribution::Grid(k) => write!(f, "random:{n},grid={k}"),
                ValueDistribution::Sparse(p) => write!(f, "random:{n},sparse={p}"),
            },
            GeneratorSpec::RsdWorst { n, eps } => write!(f, "rsd-worst:{n},{eps}"),
            GeneratorSpec::OrdinalWorst { n, eps } => write!(f, "ordinal-worst:{n},{eps}"),
            GeneratorSpec::Table1 => write!(f, "table1"),
        }
    }
}
