//! JSON box documents.
//!
//! ```json
//! {"kind": "mixture", "n": 2, "epsilon": "3/4",
//!  "components": [{"kind": "npr", "n": 2}, {"kind": "even_parity", "n": 2}]}
//! ```
//!
//! Bitstring keys put party 1 first. Unknown fields are rejected.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::anf::BooleanFunctionAnf;
use crate::boxes::{bits_to_string, parse_bits, ConditionalBox};
use crate::error::{Error, Result};
use crate::rational::{self, Q};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoxSpec {
    FullCorrelation {
        n: usize,
        /// Monomials as 1-based index lists; `[]` is the constant 1.
        anf: Vec<Vec<usize>>,
    },
    Npr {
        n: usize,
    },
    EvenParity {
        n: usize,
    },
    Mixture {
        n: usize,
        epsilon: String,
        components: Vec<BoxSpec>,
    },
    Table {
        n: usize,
        /// Input bitstring to output bitstring to probability; absent outputs are 0.
        probs: BTreeMap<String, BTreeMap<String, String>>,
    },
}

fn doc_err(msg: impl Into<String>) -> Error {
    Error::Document(msg.into())
}

impl BoxSpec {
    pub fn n(&self) -> usize {
        match self {
            Self::FullCorrelation { n, .. }
            | Self::Npr { n }
            | Self::EvenParity { n }
            | Self::Mixture { n, .. }
            | Self::Table { n, .. } => *n,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| doc_err(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    /// The function of a `full_correlation` document.
    pub fn function(&self) -> Result<BooleanFunctionAnf> {
        match self {
            Self::FullCorrelation { n, anf } => BooleanFunctionAnf::from_indices(*n, anf.clone()),
            _ => Err(doc_err("expected kind \"full_correlation\"")),
        }
    }

    pub fn to_box(&self) -> Result<ConditionalBox> {
        match self {
            Self::FullCorrelation { .. } => ConditionalBox::full_correlation(&self.function()?),
            Self::Npr { n } => ConditionalBox::npr(*n),
            Self::EvenParity { n } => ConditionalBox::even_parity(*n),
            Self::Mixture {
                n,
                epsilon,
                components,
            } => {
                let [first, second] = components.as_slice() else {
                    return Err(doc_err(format!(
                        "mixture needs exactly 2 components, found {}",
                        components.len()
                    )));
                };
                let e = rational::parse(epsilon)
                    .map_err(|_| doc_err(format!("field epsilon: invalid rational {epsilon:?}")))?;
                let (b1, b2) = (first.to_box()?, second.to_box()?);
                for b in [&b1, &b2] {
                    if b.n() != *n {
                        return Err(doc_err(format!(
                            "mixture declares n = {n} but a component has n = {}",
                            b.n()
                        )));
                    }
                }
                ConditionalBox::mix(&b1, &b2, &e)
            }
            Self::Table { n, probs } => table_box(*n, probs),
        }
    }

    /// A `table` document listing the nonzero entries of `b`.
    pub fn from_box(b: &ConditionalBox) -> Self {
        let n = b.n();
        let probs = (0..b.inputs())
            .map(|x| {
                let row = b
                    .support(x)
                    .map(|(a, p)| (bits_to_string(a, n), rational::format(p)))
                    .collect();
                (bits_to_string(x, n), row)
            })
            .collect();
        Self::Table { n, probs }
    }
}

fn table_box(n: usize, probs: &BTreeMap<String, BTreeMap<String, String>>) -> Result<ConditionalBox> {
    crate::boxes::check_parties(n)?;
    let size = 1usize << n;
    let mut table = vec![Q::zero(); size * size];
    let mut seen = vec![false; size];
    for (xs, row) in probs {
        let x = parse_bits(xs, n)
            .ok_or_else(|| doc_err(format!("probs: input key {xs:?} is not a {n}-bit string")))?;
        seen[x] = true;
        for (as_, p) in row {
            let a = parse_bits(as_, n).ok_or_else(|| {
                doc_err(format!("probs.{xs}: output key {as_:?} is not a {n}-bit string"))
            })?;
            table[(x << n) | a] = rational::parse(p)
                .map_err(|_| doc_err(format!("probs.{xs}.{as_}: invalid rational {p:?}")))?;
        }
    }
    if let Some(x) = seen.iter().position(|s| !s) {
        return Err(doc_err(format!("probs: missing input {}", bits_to_string(x, n))));
    }
    ConditionalBox::new(n, table)
}

pub fn parse_box(text: &str) -> Result<ConditionalBox> {
    BoxSpec::parse(text)?.to_box()
}
