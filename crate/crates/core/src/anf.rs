//! Boolean functions in algebraic normal form and their monomial structure.
//!
//! A function is stored as the set of AND-monomials whose XOR it equals. Truth
//! tables are indexed by the packed input word, with `x_1` the least significant
//! bit.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// Largest variable count for ANF values (truth tables hold `2^n` bits).
pub const MAX_VARIABLES: usize = 16;

/// A set of variables `I ⊆ {1..n}`, stored as a bit mask (bit `i` = variable `i + 1`).
///
/// Ordered lexicographically by the ascending index list, so `{} < {1,2,3} < {1,4} < {4,5}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Monomial(u32);

impl Monomial {
    pub const CONSTANT: Monomial = Monomial(0);

    pub fn from_mask(mask: u32) -> Self {
        Monomial(mask)
    }

    /// Builds from 1-based indices; duplicates collapse.
    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = 0u32;
        for i in indices {
            if i == 0 || i > MAX_VARIABLES {
                return Err(Error::VariableIndex {
                    index: i,
                    n: MAX_VARIABLES,
                });
            }
            mask |= 1 << (i - 1);
        }
        Ok(Monomial(mask))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Ascending 1-based indices.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..32usize).filter(move |i| self.0 >> i & 1 == 1).map(|i| i + 1)
    }

    pub fn contains(self, index: usize) -> bool {
        index >= 1 && self.0 >> (index - 1) & 1 == 1
    }

    pub fn intersects(self, other: Monomial) -> bool {
        self.0 & other.0 != 0
    }

    /// Value of the monomial on a packed input word.
    pub fn eval(self, x: usize) -> bool {
        (x as u32) & self.0 == self.0
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.indices().cmp(other.indices())
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// XOR of AND-monomials over `n` variables.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BooleanFunctionAnf {
    n: usize,
    monomials: BTreeSet<Monomial>,
}

impl fmt::Debug for BooleanFunctionAnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Anf(n={}, {})", self.n, self)
    }
}

impl fmt::Display for BooleanFunctionAnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.monomials.is_empty() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .monomials
            .iter()
            .map(|m| {
                if m.degree() == 0 {
                    "1".to_string()
                } else {
                    m.indices().map(|i| format!("x{i}")).collect::<String>()
                }
            })
            .collect();
        write!(f, "{}", terms.join("+"))
    }
}

impl BooleanFunctionAnf {
    pub fn new(n: usize, monomials: impl IntoIterator<Item = Monomial>) -> Result<Self> {
        if n > MAX_VARIABLES {
            return Err(Error::VariableIndex {
                index: n,
                n: MAX_VARIABLES,
            });
        }
        let mut set = BTreeSet::new();
        for m in monomials {
            if let Some(bad) = m.indices().find(|&i| i > n) {
                return Err(Error::VariableIndex { index: bad, n });
            }
            // XOR semantics: a repeated monomial cancels
            if !set.insert(m) {
                set.remove(&m);
            }
        }
        Ok(Self { n, monomials: set })
    }

    /// Builds from 1-based index lists; the empty list is the constant term.
    pub fn from_indices<I, J>(n: usize, monomials: I) -> Result<Self>
    where
        I: IntoIterator<Item = J>,
        J: IntoIterator<Item = usize>,
    {
        let ms = monomials
            .into_iter()
            .map(Monomial::from_indices)
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, ms)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            monomials: BTreeSet::new(),
        }
    }

    /// The single monomial over the given 1-based indices.
    pub fn product(n: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::new(n, [Monomial::from_indices(indices)?])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn monomials(&self) -> &BTreeSet<Monomial> {
        &self.monomials
    }

    pub fn contains(&self, m: Monomial) -> bool {
        self.monomials.contains(&m)
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn eval(&self, x: usize) -> bool {
        self.monomials.iter().filter(|m| m.eval(x)).count() % 2 == 1
    }

    /// Evaluation at all `2^n` points.
    pub fn truth_table(&self) -> Vec<bool> {
        let mut tt = vec![false; 1 << self.n];
        for m in &self.monomials {
            tt[m.mask() as usize] ^= true;
        }
        mobius(&mut tt);
        tt
    }

    /// GF(2) Möbius transform of a truth table; `tt.len()` must be a power of two.
    pub fn from_truth_table(tt: &[bool]) -> Result<Self> {
        if !tt.len().is_power_of_two() {
            return Err(Error::TruthTableLength(tt.len()));
        }
        let n = tt.len().trailing_zeros() as usize;
        if n > MAX_VARIABLES {
            return Err(Error::TruthTableLength(tt.len()));
        }
        let mut coeffs = tt.to_vec();
        mobius(&mut coeffs);
        let monomials = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c)
            .map(|(mask, _)| Monomial(mask as u32))
            .collect();
        Ok(Self { n, monomials })
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let monomials = self
            .monomials
            .symmetric_difference(&other.monomials)
            .copied()
            .collect();
        Ok(Self {
            n: self.n,
            monomials,
        })
    }

    /// Splits into the degree-2+ part and the affine (degree ≤ 1) part; their XOR is `self`.
    pub fn strip_local_part(&self) -> (Self, Self) {
        let (nonlocal, local): (BTreeSet<_>, BTreeSet<_>) =
            self.monomials.iter().partition(|m| m.degree() >= 2);
        (
            Self {
                n: self.n,
                monomials: nonlocal,
            },
            Self {
                n: self.n,
                monomials: local,
            },
        )
    }

    pub fn is_affine(&self) -> bool {
        self.monomials.iter().all(|m| m.degree() <= 1)
    }

    /// Substitutes constants for the given 1-based variables; the variable count is kept.
    pub fn restrict(&self, constants: &BTreeMap<usize, bool>) -> Self {
        let mut fixed_one = 0u32;
        let mut fixed = 0u32;
        for (&i, &v) in constants {
            fixed |= 1 << (i - 1);
            if v {
                fixed_one |= 1 << (i - 1);
            }
        }
        let mut out = BTreeSet::new();
        for m in &self.monomials {
            if m.mask() & fixed & !fixed_one != 0 {
                continue;
            }
            let reduced = Monomial(m.mask() & !fixed);
            if !out.insert(reduced) {
                out.remove(&reduced);
            }
        }
        Self {
            n: self.n,
            monomials: out,
        }
    }

    /// Sorted list of sorted 1-based index lists.
    pub fn to_index_lists(&self) -> Vec<Vec<usize>> {
        self.monomials.iter().map(|m| m.indices().collect()).collect()
    }

    /// Variables the function actually depends on, as a mask.
    pub fn support_mask(&self) -> u32 {
        self.monomials.iter().fold(0, |acc, m| acc | m.mask())
    }

    /// The monomial structure used by the channel-counting results.
    pub fn structure(&self) -> MonomialStructure {
        MonomialStructure::of(self)
    }
}

/// In-place GF(2) Möbius transform; an involution.
fn mobius(v: &mut [bool]) {
    let len = v.len();
    let mut step = 1;
    while step < len {
        for block in (0..len).step_by(2 * step) {
            for i in block..block + step {
                let lo = v[i];
                v[i + step] ^= lo;
            }
        }
        step *= 2;
    }
}

/// Degree-2+ monomials of a function, grouped into variable-sharing components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialStructure {
    pub n: usize,
    /// Monomials with coefficient 1 and degree at least 2, ascending.
    pub j: Vec<Monomial>,
    /// Connected components of the variable-sharing graph on `j`.
    pub components: Vec<Vec<Monomial>>,
    /// For each member of `j`, the number of its variables that occur in no other member.
    pub m: BTreeMap<Monomial, usize>,
    /// Union of all members of `j`.
    pub support: Monomial,
}

impl MonomialStructure {
    pub fn of(f: &BooleanFunctionAnf) -> Self {
        let j: Vec<Monomial> = f
            .monomials
            .iter()
            .filter(|m| m.degree() >= 2)
            .copied()
            .collect();

        let mut sets = DisjointSet::new(j.len());
        let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
        for (k, mono) in j.iter().enumerate() {
            for var in mono.indices() {
                match owner.get(&var) {
                    Some(&first) => sets.union(first, k),
                    None => {
                        owner.insert(var, k);
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<Monomial>> = BTreeMap::new();
        for (k, mono) in j.iter().enumerate() {
            groups.entry(sets.find(k)).or_default().push(*mono);
        }
        let mut components: Vec<Vec<Monomial>> = groups.into_values().collect();
        components.sort();

        let m = j
            .iter()
            .map(|&mono| {
                let others = j
                    .iter()
                    .filter(|&&o| o != mono)
                    .fold(0u32, |acc, o| acc | o.mask());
                (mono, (mono.mask() & !others).count_ones() as usize)
            })
            .collect();
        let support = Monomial(j.iter().fold(0, |acc, m| acc | m.mask()));
        Self {
            n: f.n,
            j,
            components,
            m,
            support,
        }
    }

    /// Number of components (`0` for purely local functions).
    pub fn n_j(&self) -> usize {
        self.components.len()
    }

    pub fn max_m(&self) -> Option<usize> {
        self.m.values().copied().max()
    }

    /// Variables of `mono` that appear in no other member of `j`.
    pub fn exclusive(&self, mono: Monomial) -> Monomial {
        let others = self
            .j
            .iter()
            .filter(|&&o| o != mono)
            .fold(0u32, |acc, o| acc | o.mask());
        Monomial(mono.mask() & !others)
    }
}

/// Union-find with path compression and union by rank.
#[derive(Debug, Clone)]
struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        match self.rank[a].cmp(&self.rank[b]) {
            Ordering::Less => self.parent[a] = b,
            Ordering::Greater => self.parent[b] = a,
            Ordering::Equal => {
                self.parent[b] = a;
                self.rank[a] += 1;
            }
        }
    }
}
