//! Exact n-partite binary-input/binary-output boxes.
//!
//! A [`ConditionalBox`] stores `P(a|x)` as a dense `2^n × 2^n` table. Inputs and
//! outputs are packed words where bit `i` carries party `i + 1`.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::anf::BooleanFunctionAnf;
use crate::error::{Error, Result};
use crate::rational::{self, Q};
use crate::MAX_PARTIES;

/// A 1-based party index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Party(pub usize);

impl Party {
    /// Zero-based bit position of this party in a packed word.
    pub fn bit(self) -> usize {
        self.0 - 1
    }

    pub fn from_bit(bit: usize) -> Self {
        Party(bit + 1)
    }

    pub fn mask(self) -> usize {
        1 << self.bit()
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Renders a packed word with party 1 as the leftmost character.
pub fn bits_to_string(word: usize, n: usize) -> String {
    (0..n)
        .map(|i| if word >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Inverse of [`bits_to_string`].
pub fn parse_bits(s: &str, n: usize) -> Option<usize> {
    if s.len() != n {
        return None;
    }
    s.chars().enumerate().try_fold(0usize, |acc, (i, c)| match c {
        '0' => Some(acc),
        '1' => Some(acc | 1 << i),
        _ => None,
    })
}

pub(crate) fn parity(word: usize) -> bool {
    word.count_ones() % 2 == 1
}

pub(crate) fn check_parties(n: usize) -> Result<()> {
    if n == 0 || n > MAX_PARTIES {
        return Err(Error::PartyCount(n));
    }
    Ok(())
}

/// Exact conditional distribution `P(a|x)` of an n-party box.
#[derive(Clone, PartialEq, Eq)]
pub struct ConditionalBox {
    n: usize,
    table: Vec<Q>,
}

impl fmt::Debug for ConditionalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for x in 0..self.inputs() {
            let row: Vec<String> = self
                .support(x)
                .map(|(a, p)| format!("{}:{}", bits_to_string(a, self.n), rational::format(p)))
                .collect();
            m.entry(&bits_to_string(x, self.n), &row);
        }
        m.finish()
    }
}

/// First violation found by [`ConditionalBox::nonsignaling_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalingViolation {
    /// Parties whose marginal depends on inputs outside the set.
    pub subset: Vec<Party>,
    /// Two inputs agreeing on `subset` with different marginals.
    pub inputs: (usize, usize),
    pub n: usize,
}

impl fmt::Display for SignalingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parties: Vec<String> = self.subset.iter().map(|p| p.to_string()).collect();
        write!(
            f,
            "marginal of parties {{{}}} differs between inputs {} and {}",
            parties.join(","),
            bits_to_string(self.inputs.0, self.n),
            bits_to_string(self.inputs.1, self.n)
        )
    }
}

impl ConditionalBox {
    /// Builds a box from a row-major table (`table[x * 2^n + a]`), checking
    /// non-negativity and per-input normalization.
    pub fn new(n: usize, table: Vec<Q>) -> Result<Self> {
        check_parties(n)?;
        let expected = 1usize << (2 * n);
        if table.len() != expected {
            return Err(Error::TableSize {
                expected,
                found: table.len(),
            });
        }
        let b = Self { n, table };
        b.validate()?;
        Ok(b)
    }

    /// Builds a box from an entry function; the result is validated.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Q) -> Result<Self> {
        check_parties(n)?;
        let size = 1usize << n;
        let mut table = Vec::with_capacity(size * size);
        for x in 0..size {
            for a in 0..size {
                table.push(f(x, a));
            }
        }
        Self::new(n, table)
    }

    /// For internal constructors whose normalization holds by construction.
    pub(crate) fn from_table_unchecked(n: usize, table: Vec<Q>) -> Self {
        debug_assert_eq!(table.len(), 1 << (2 * n));
        let b = Self { n, table };
        debug_assert!(b.validate().is_ok(), "unnormalized box {b:?}");
        b
    }

    fn validate(&self) -> Result<()> {
        for x in 0..self.inputs() {
            let mut sum = Q::zero();
            for (a, p) in self.row(x).iter().enumerate() {
                if p.is_negative() {
                    return Err(Error::NegativeProbability {
                        input: bits_to_string(x, self.n),
                        output: bits_to_string(a, self.n),
                    });
                }
                sum += p;
            }
            if !sum.is_one() {
                return Err(Error::NotNormalized {
                    input: bits_to_string(x, self.n),
                    sum: rational::format(&sum),
                });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of input words, `2^n` (equal to the number of output words).
    pub fn inputs(&self) -> usize {
        1 << self.n
    }

    pub fn prob(&self, x: usize, a: usize) -> &Q {
        &self.table[(x << self.n) | a]
    }

    pub fn row(&self, x: usize) -> &[Q] {
        let w = self.inputs();
        &self.table[x * w..(x + 1) * w]
    }

    /// Nonzero entries of the row for input `x`.
    pub fn support(&self, x: usize) -> impl Iterator<Item = (usize, &Q)> + '_ {
        self.row(x)
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
    }

    pub fn support_size(&self, x: usize) -> usize {
        self.support(x).count()
    }

    pub fn table(&self) -> &[Q] {
        &self.table
    }

    /// Full-correlation box of `f`: uniform over the outputs whose parity equals `f(x)`.
    pub fn full_correlation(f: &BooleanFunctionAnf) -> Result<Self> {
        let n = f.n();
        check_parties(n)?;
        let weight = rational::inv_pow2(n - 1);
        let truth = f.truth_table();
        let size = 1usize << n;
        let mut table = vec![Q::zero(); size * size];
        for x in 0..size {
            for a in 0..size {
                if parity(a) == truth[x] {
                    table[(x << n) | a] = weight.clone();
                }
            }
        }
        Ok(Self::from_table_unchecked(n, table))
    }

    /// The n-partite PR box: output parity equals the product of all inputs.
    pub fn npr(n: usize) -> Result<Self> {
        check_parties(n)?;
        Self::full_correlation(&BooleanFunctionAnf::product(n, 1..=n)?)
    }

    /// The (local) even-parity box.
    pub fn even_parity(n: usize) -> Result<Self> {
        check_parties(n)?;
        Self::full_correlation(&BooleanFunctionAnf::zero(n))
    }

    /// Entrywise `epsilon * b1 + (1 - epsilon) * b2`.
    pub fn mix(b1: &Self, b2: &Self, epsilon: &Q) -> Result<Self> {
        if b1.n != b2.n {
            return Err(Error::DimensionMismatch {
                expected: b1.n,
                found: b2.n,
            });
        }
        if !rational::in_unit_interval(epsilon) {
            return Err(Error::EpsilonRange(rational::format(epsilon)));
        }
        let rest = Q::one() - epsilon;
        let table = b1
            .table
            .iter()
            .zip(&b2.table)
            .map(|(p, q)| epsilon * p + &rest * q)
            .collect();
        Ok(Self::from_table_unchecked(b1.n, table))
    }

    /// Marginal output distribution of the parties in `mask` at input `x`,
    /// indexed by the compressed word of those parties' outputs.
    pub fn marginal(&self, mask: usize, x: usize) -> Vec<Q> {
        let k = mask.count_ones() as usize;
        let mut out = vec![Q::zero(); 1 << k];
        for (a, p) in self.support(x) {
            out[compress(a, mask)] += p;
        }
        out
    }

    /// Checks every proper nonempty party subset, smallest subsets first.
    pub fn nonsignaling_report(&self) -> Option<SignalingViolation> {
        let full = self.inputs() - 1;
        let mut subsets: Vec<usize> = (1..full).collect();
        subsets.sort_by_key(|s| (s.count_ones(), *s));
        for s in subsets {
            for x in 0..self.inputs() {
                let base = x & s;
                if base == x {
                    continue;
                }
                if self.marginal(s, x) != self.marginal(s, base) {
                    return Some(SignalingViolation {
                        subset: parties_of(s),
                        inputs: (base, x),
                        n: self.n,
                    });
                }
            }
        }
        None
    }

    pub fn is_nonsignaling(&self) -> bool {
        self.nonsignaling_report().is_none()
    }

    /// True iff every subset of at most `k` parties sees uniformly random outputs
    /// at every input.
    pub fn subset_outputs_uniform(&self, k: usize) -> bool {
        let full = self.inputs() - 1;
        (1..=full)
            .filter(|s| (s.count_ones() as usize) <= k)
            .all(|s| {
                let uniform = rational::inv_pow2(s.count_ones() as usize);
                (0..self.inputs()).all(|x| self.marginal(s, x).iter().all(|p| *p == uniform))
            })
    }

    /// Recovers `epsilon` with `self = epsilon * target + (1 - epsilon) * local`.
    pub fn decompose_epsilon(&self, target: &Self, local: &Self) -> Result<Q> {
        for other in [target, local] {
            if other.n != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    found: other.n,
                });
            }
        }
        let mut epsilon: Option<Q> = None;
        for ((b, t), l) in self.table.iter().zip(&target.table).zip(&local.table) {
            let spread = t - l;
            if spread.is_zero() {
                if b != l {
                    return Err(Error::NotInFamily);
                }
                continue;
            }
            let e = (b - l) / spread;
            match &epsilon {
                None => epsilon = Some(e),
                Some(prev) if *prev == e => {}
                Some(_) => return Err(Error::NotInFamily),
            }
        }
        let e = epsilon.ok_or(Error::Unidentifiable)?;
        if !rational::in_unit_interval(&e) {
            return Err(Error::NotInFamily);
        }
        Ok(e)
    }

    /// Plain entrywise L1 distance summed over all inputs and outputs.
    pub fn l1_distance(&self, other: &Self) -> Result<Q> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(self
            .table
            .iter()
            .zip(&other.table)
            .map(|(p, q)| (p - q).abs())
            .fold(Q::zero(), |acc, d| acc + d))
    }
}

/// A member `epsilon * target + (1 - epsilon) * local` of a noisy box family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseFamilyMember {
    pub target: ConditionalBox,
    pub local: ConditionalBox,
    pub epsilon: Q,
}

impl NoiseFamilyMember {
    pub fn new(target: ConditionalBox, local: ConditionalBox, epsilon: Q) -> Result<Self> {
        if target.n() != local.n() {
            return Err(Error::DimensionMismatch {
                expected: target.n(),
                found: local.n(),
            });
        }
        if !rational::in_unit_interval(&epsilon) {
            return Err(Error::EpsilonRange(rational::format(&epsilon)));
        }
        Ok(Self {
            target,
            local,
            epsilon,
        })
    }

    /// The correlated non-local family `epsilon * P^PR_n + (1 - epsilon) * P^c_n`.
    pub fn correlated_pr(n: usize, epsilon: Q) -> Result<Self> {
        Self::new(ConditionalBox::npr(n)?, ConditionalBox::even_parity(n)?, epsilon)
    }

    pub fn realized(&self) -> ConditionalBox {
        ConditionalBox::mix(&self.target, &self.local, &self.epsilon)
            .expect("family invariants checked at construction")
    }
}

/// Packs the bits of `word` selected by `mask` into a dense word.
pub(crate) fn compress(word: usize, mask: usize) -> usize {
    let mut out = 0;
    let mut j = 0;
    let mut m = mask;
    while m != 0 {
        let bit = m.trailing_zeros() as usize;
        out |= (word >> bit & 1) << j;
        j += 1;
        m &= m - 1;
    }
    out
}

pub(crate) fn parties_of(mask: usize) -> Vec<Party> {
    (0..usize::BITS as usize)
        .filter(|i| mask >> i & 1 == 1)
        .map(Party::from_bit)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn anf(n: usize, monomials: &[&[usize]]) -> BooleanFunctionAnf {
        BooleanFunctionAnf::from_indices(n, monomials.iter().map(|m| m.to_vec())).unwrap()
    }

    fn w(s: &str) -> usize {
        parse_bits(s, s.len()).unwrap()
    }

    #[test]
    fn two_party_pr_box() {
        let b = ConditionalBox::full_correlation(&anf(2, &[&[1, 2]])).unwrap();
        assert_eq!(*b.prob(w("11"), w("00")), Q::zero());
        assert_eq!(*b.prob(w("11"), w("01")), ratio(1, 2));
        assert_eq!(b, ConditionalBox::npr(2).unwrap());
        // a1 xor a2 = x1 x2
        for x in 0..4 {
            for (a, _) in b.support(x) {
                assert_eq!(parity(a), x == 3);
            }
        }
    }

    #[test]
    fn even_parity_from_zero_function() {
        let b = ConditionalBox::full_correlation(&BooleanFunctionAnf::zero(3)).unwrap();
        assert_eq!(b, ConditionalBox::even_parity(3).unwrap());
        assert_eq!(*b.prob(5, 0), ratio(1, 4));
        let b2 = ConditionalBox::even_parity(2).unwrap();
        for x in 0..4 {
            assert_eq!(*b2.prob(x, 0), ratio(1, 2));
            assert_eq!(*b2.prob(x, 3), ratio(1, 2));
        }
    }

    #[test]
    fn npr_supports() {
        let b = ConditionalBox::npr(3).unwrap();
        let all: Vec<_> = b.support(w("111")).collect();
        assert_eq!(all.len(), 4);
        assert!(all.iter().all(|(a, p)| parity(*a) && **p == ratio(1, 4)));
        let some: Vec<_> = b.support(w("011")).collect();
        assert_eq!(some.len(), 4);
        assert!(some.iter().all(|(a, p)| !parity(*a) && **p == ratio(1, 4)));
    }

    #[test]
    fn mix_endpoints_and_midpoint() {
        let pr = ConditionalBox::npr(3).unwrap();
        let c = ConditionalBox::even_parity(3).unwrap();
        assert_eq!(ConditionalBox::mix(&pr, &c, &Q::one()).unwrap(), pr);
        assert_eq!(ConditionalBox::mix(&pr, &c, &Q::zero()).unwrap(), c);
        let pr2 = ConditionalBox::npr(2).unwrap();
        let c2 = ConditionalBox::even_parity(2).unwrap();
        let m = ConditionalBox::mix(&pr2, &c2, &ratio(1, 2)).unwrap();
        assert_eq!(*m.prob(w("11"), w("00")), ratio(1, 4));
    }

    #[test]
    fn mix_errors() {
        let pr2 = ConditionalBox::npr(2).unwrap();
        let pr3 = ConditionalBox::npr(3).unwrap();
        assert!(matches!(
            ConditionalBox::mix(&pr2, &pr3, &ratio(1, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            ConditionalBox::mix(&pr2, &pr2, &ratio(3, 2)),
            Err(Error::EpsilonRange(_))
        ));
    }

    #[test]
    fn constructor_rejects_bad_tables() {
        assert!(matches!(
            ConditionalBox::new(1, vec![Q::one(); 3]),
            Err(Error::TableSize { .. })
        ));
        let bad = vec![ratio(3, 2), ratio(-1, 2), Q::one(), Q::zero()];
        assert!(matches!(
            ConditionalBox::new(1, bad),
            Err(Error::NegativeProbability { .. })
        ));
        let bad = vec![ratio(1, 2), ratio(1, 4), Q::one(), Q::zero()];
        assert!(matches!(
            ConditionalBox::new(1, bad),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(ConditionalBox::npr(0), Err(Error::PartyCount(0))));
        assert!(matches!(ConditionalBox::npr(9), Err(Error::PartyCount(9))));
    }

    #[test]
    fn nonsignaling_checks() {
        assert!(ConditionalBox::npr(3).unwrap().is_nonsignaling());
        let target = ConditionalBox::full_correlation(&anf(
            5,
            &[&[1, 2, 3], &[1, 4], &[4, 5], &[3]],
        ))
        .unwrap();
        assert!(target.is_nonsignaling());

        // party 1 outputs party 2's input
        let signaling = ConditionalBox::from_fn(2, |x, a| {
            let a1 = a & 1;
            let x2 = x >> 1 & 1;
            if a1 == x2 && a >> 1 == 0 {
                Q::one()
            } else {
                Q::zero()
            }
        })
        .unwrap();
        let v = signaling.nonsignaling_report().unwrap();
        assert_eq!(v.subset, vec![Party(1)]);
        assert!(!signaling.is_nonsignaling());
    }

    #[test]
    fn subset_uniformity() {
        assert!(ConditionalBox::npr(3).unwrap().subset_outputs_uniform(2));
        assert!(ConditionalBox::even_parity(4).unwrap().subset_outputs_uniform(3));
        let zeros = ConditionalBox::from_fn(2, |_, a| if a == 0 { Q::one() } else { Q::zero() })
            .unwrap();
        assert!(!zeros.subset_outputs_uniform(1));
        // full set is never uniform for a full-correlation box
        assert!(!ConditionalBox::npr(3).unwrap().subset_outputs_uniform(3));
    }

    #[test]
    fn decompose_round_trip_and_errors() {
        let t = ConditionalBox::npr(3).unwrap();
        let l = ConditionalBox::even_parity(3).unwrap();
        let b = ConditionalBox::mix(&t, &l, &ratio(7, 18)).unwrap();
        assert_eq!(b.decompose_epsilon(&t, &l).unwrap(), ratio(7, 18));
        assert_eq!(t.decompose_epsilon(&t, &l).unwrap(), Q::one());
        let pr2 = ConditionalBox::npr(2).unwrap();
        assert!(matches!(
            pr2.decompose_epsilon(&t, &l),
            Err(Error::DimensionMismatch { .. })
        ));
        let other = ConditionalBox::full_correlation(&anf(3, &[&[1, 2]])).unwrap();
        assert_eq!(other.decompose_epsilon(&t, &l), Err(Error::NotInFamily));
        assert_eq!(t.decompose_epsilon(&t, &t), Err(Error::Unidentifiable));
    }

    #[test]
    fn equality_is_entrywise() {
        let t = ConditionalBox::npr(3).unwrap();
        let via_anf = ConditionalBox::full_correlation(&anf(3, &[&[3, 1, 2]])).unwrap();
        assert_eq!(t, via_anf);
        assert_ne!(t, ConditionalBox::even_parity(3).unwrap());
        let l = ConditionalBox::even_parity(3).unwrap();
        let m1 = ConditionalBox::mix(&t, &l, &ratio(1, 3)).unwrap();
        // same box assembled in reverse entry order
        let mut entries: Vec<(usize, usize, Q)> = Vec::new();
        for x in (0..8).rev() {
            for a in (0..8).rev() {
                entries.push((x, a, m1.prob(x, a).clone()));
            }
        }
        let mut table = vec![Q::zero(); 64];
        for (x, a, p) in entries {
            table[x * 8 + a] = p;
        }
        assert_eq!(ConditionalBox::new(3, table).unwrap(), m1);
    }

    #[test]
    fn bit_strings() {
        assert_eq!(bits_to_string(0b001, 3), "100");
        assert_eq!(parse_bits("100", 3), Some(1));
        assert_eq!(parse_bits("10", 3), None);
        assert_eq!(parse_bits("1x0", 3), None);
        assert_eq!(compress(0b10110, 0b10100), 0b11);
    }
}
