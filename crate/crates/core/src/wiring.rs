//! Exact composition of boxes under local wirings.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::anf::BooleanFunctionAnf;
use crate::boxes::{check_parties, parity, ConditionalBox, Party};
use crate::error::{Error, Result};
use crate::rational::{self, Q};

/// Per-party local rules of a two-box adaptive wiring.
///
/// Party `i` feeds its input `x` to the first box, receives `a`, feeds
/// `y = second_input(x, a)` to the second box, receives `b` and outputs
/// `c = output(x, a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartyRule {
    /// Indexed by `x << 1 | a`.
    pub second_input: [bool; 4],
    /// Indexed by `x << 2 | a << 1 | b`.
    pub output: [bool; 8],
}

impl PartyRule {
    pub fn from_fns(g: impl Fn(bool, bool) -> bool, h: impl Fn(bool, bool, bool) -> bool) -> Self {
        let mut second_input = [false; 4];
        let mut output = [false; 8];
        for idx in 0..4 {
            second_input[idx] = g(idx & 2 != 0, idx & 1 != 0);
        }
        for idx in 0..8 {
            output[idx] = h(idx & 4 != 0, idx & 2 != 0, idx & 1 != 0);
        }
        Self {
            second_input,
            output,
        }
    }

    pub fn y(&self, x: bool, a: bool) -> bool {
        self.second_input[(x as usize) << 1 | a as usize]
    }

    pub fn c(&self, x: bool, a: bool, b: bool) -> bool {
        self.output[(x as usize) << 2 | (a as usize) << 1 | b as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WiringProtocol {
    rules: Vec<PartyRule>,
}

impl WiringProtocol {
    pub fn new(rules: Vec<PartyRule>) -> Result<Self> {
        check_parties(rules.len())?;
        Ok(Self { rules })
    }

    /// Every party applies the same rule.
    pub fn uniform(n: usize, rule: PartyRule) -> Result<Self> {
        Self::new(vec![rule; n])
    }

    /// The adaptive distillation wiring: `y = x · (1 - a)`, `c = a ⊕ b`.
    pub fn bs(n: usize) -> Result<Self> {
        Self::uniform(n, PartyRule::from_fns(|x, a| x && !a, |_, a, b| a ^ b))
    }

    pub fn n(&self) -> usize {
        self.rules.len()
    }

    pub fn rule(&self, party: Party) -> &PartyRule {
        &self.rules[party.bit()]
    }

    fn second_input(&self, x: usize, a: usize) -> usize {
        self.rules
            .iter()
            .enumerate()
            .fold(0, |acc, (i, r)| acc | (r.y(bit(x, i), bit(a, i)) as usize) << i)
    }

    fn output(&self, x: usize, a: usize, b: usize) -> usize {
        self.rules.iter().enumerate().fold(0, |acc, (i, r)| {
            acc | (r.c(bit(x, i), bit(a, i), bit(b, i)) as usize) << i
        })
    }
}

fn bit(word: usize, i: usize) -> bool {
    word >> i & 1 == 1
}

fn same_n(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Exact distribution of the wired outputs when `b2` is queried adaptively on the
/// outputs of `b1`.
pub fn compose_adaptive(
    b1: &ConditionalBox,
    b2: &ConditionalBox,
    w: &WiringProtocol,
) -> Result<ConditionalBox> {
    let n = w.n();
    same_n(n, b1.n())?;
    same_n(n, b2.n())?;
    let size = 1usize << n;
    let mut table = vec![Q::zero(); size * size];
    for x in 0..size {
        for (a, pa) in b1.support(x) {
            let y = w.second_input(x, a);
            for (b, pb) in b2.support(y) {
                let c = w.output(x, a, b);
                table[(x << n) | c] += pa * pb;
            }
        }
    }
    Ok(ConditionalBox::from_table_unchecked(n, table))
}

/// Runs two boxes on the same inputs and XORs their outputs party by party.
pub fn xor_combine(b1: &ConditionalBox, b2: &ConditionalBox) -> Result<ConditionalBox> {
    let n = b1.n();
    same_n(n, b2.n())?;
    let size = 1usize << n;
    let mut table = vec![Q::zero(); size * size];
    for x in 0..size {
        for (a, pa) in b1.support(x) {
            for (b, pb) in b2.support(x) {
                table[(x << n) | (a ^ b)] += pa * pb;
            }
        }
    }
    Ok(ConditionalBox::from_table_unchecked(n, table))
}

/// Assembles the full-correlation box of `f` from one n-PR box per monomial and
/// local shared randomness; returns the box and the number of PR boxes used.
pub fn build_from_prs(f: &BooleanFunctionAnf) -> Result<(ConditionalBox, usize)> {
    let n = f.n();
    let pr = ConditionalBox::npr(n)?;
    // shared randomness: the even-parity box costs no PR box
    let mut acc = ConditionalBox::even_parity(n)?;
    let all = (1usize << n) - 1;
    for mono in f.monomials() {
        let fixed = all & !(mono.mask() as usize);
        // n-PR box with constant inputs outside the monomial
        let instance = ConditionalBox::from_fn(n, |x, a| pr.prob(x | fixed, a).clone())?;
        acc = xor_combine(&acc, &instance)?;
    }
    Ok((acc, f.monomials().len()))
}

/// Parallel composition of a full-correlation box on parties `1..=k2` with a
/// product box on parties `k1..=n`; overlapping parties output the XOR.
pub fn lemma3_compose(
    p1: &ConditionalBox,
    g1: &BooleanFunctionAnf,
    p2: &ConditionalBox,
    k1: usize,
    k2: usize,
    k3: usize,
) -> Result<ConditionalBox> {
    let n = k1 + p2.n() - 1;
    if !(1 <= k1 && k1 <= k2 && k2 < k3 && k3 <= n) {
        return Err(Error::IndexRange { k1, k2, k3, n });
    }
    check_parties(n)?;
    if p1.n() != k2 || g1.n() != k2 {
        return Err(Error::ComponentMismatch(format!(
            "first box must cover parties 1..={k2}"
        )));
    }
    if *p1 != ConditionalBox::full_correlation(g1)? {
        return Err(Error::ComponentMismatch(
            "first box is not the full-correlation box of g1".into(),
        ));
    }
    let product = BooleanFunctionAnf::product(p2.n(), 1..=k3 - k1 + 1)?;
    if *p2 != ConditionalBox::full_correlation(&product)? {
        return Err(Error::ComponentMismatch(format!(
            "second box is not the product of x{k1}..x{k3}"
        )));
    }

    let size = 1usize << n;
    let low = (1usize << k2) - 1;
    let shift = k1 - 1;
    let mut table = vec![Q::zero(); size * size];
    for x in 0..size {
        let x1 = x & low;
        let x2 = x >> shift;
        for (a, pa) in p1.support(x1) {
            for (b, pb) in p2.support(x2) {
                // a occupies bits 0..k2, b occupies bits k1-1..n
                let c = a ^ (b << shift);
                table[(x << n) | c] += pa * pb;
            }
        }
    }
    Ok(ConditionalBox::from_table_unchecked(n, table))
}

/// XORs the affine function `local` into the outputs: party 1 takes the constant
/// term and party `i` takes `x_i` when `{i}` is present.
pub fn xor_local_part(b: &ConditionalBox, local: &BooleanFunctionAnf) -> Result<ConditionalBox> {
    same_n(b.n(), local.n())?;
    if let Some(m) = local.monomials().iter().find(|m| m.degree() > 1) {
        return Err(Error::NonLocalMonomial(m.to_string()));
    }
    let constant = local.contains(crate::anf::Monomial::CONSTANT) as usize;
    let linear = local
        .monomials()
        .iter()
        .filter(|m| m.degree() == 1)
        .fold(0usize, |acc, m| acc | m.mask() as usize);
    let n = b.n();
    let size = 1usize << n;
    let mut table = vec![Q::zero(); size * size];
    for x in 0..size {
        let flip = (x & linear) ^ constant;
        for (a, p) in b.support(x) {
            table[(x << n) | (a ^ flip)] = p.clone();
        }
    }
    Ok(ConditionalBox::from_table_unchecked(n, table))
}

/// Fixes the inputs in `constants`, removes the `absorbed` parties and XORs their
/// outputs into `receiver`. The result lists the remaining parties in ascending
/// order; parties with a constant that are not absorbed keep their slot but ignore
/// their input.
pub fn collapse_parties(
    b: &ConditionalBox,
    constants: &BTreeMap<Party, bool>,
    absorbed: &BTreeSet<Party>,
    receiver: Party,
) -> Result<ConditionalBox> {
    let n = b.n();
    let valid = |p: Party| p.0 >= 1 && p.0 <= n;
    for &p in constants.keys().chain(absorbed).chain([&receiver]) {
        if !valid(p) {
            return Err(Error::InvalidParty { party: p, n });
        }
    }
    if absorbed.contains(&receiver) {
        return Err(Error::ReceiverAbsorbed(receiver));
    }
    if let Some(&p) = absorbed.iter().find(|p| !constants.contains_key(p)) {
        return Err(Error::MissingConstant(p));
    }
    let kept: Vec<Party> = (1..=n).map(Party).filter(|p| !absorbed.contains(p)).collect();
    let m = kept.len();
    let receiver_slot = kept.iter().position(|&p| p == receiver).expect("receiver kept");

    let mut fixed_mask = 0usize;
    let mut fixed_bits = 0usize;
    for (&p, &v) in constants {
        fixed_mask |= p.mask();
        if v {
            fixed_bits |= p.mask();
        }
    }

    let out_size = 1usize << m;
    let mut table = vec![Q::zero(); out_size * out_size];
    for xs in 0..out_size {
        let mut x = 0usize;
        for (slot, p) in kept.iter().enumerate() {
            x |= (xs >> slot & 1) << p.bit();
        }
        x = (x & !fixed_mask) | fixed_bits;
        for (a, p) in b.support(x) {
            let mut c = 0usize;
            for (slot, q) in kept.iter().enumerate() {
                c |= (a >> q.bit() & 1) << slot;
            }
            let absorbed_parity = absorbed.iter().fold(false, |acc, q| acc ^ bit(a, q.bit()));
            c ^= (absorbed_parity as usize) << receiver_slot;
            table[(xs << m) | c] += p;
        }
    }
    Ok(ConditionalBox::from_table_unchecked(m, table))
}

/// Draws one output word for input `x`.
pub fn sample<R: Rng + ?Sized>(b: &ConditionalBox, x: usize, rng: &mut R) -> usize {
    let support: Vec<(usize, f64)> = b.support(x).map(|(a, p)| (a, rational::to_f64(p))).collect();
    let dist = WeightedIndex::new(support.iter().map(|(_, p)| *p))
        .expect("normalized rows have positive mass");
    support[dist.sample(rng)].0
}

/// Output parity check used by tests and reports.
pub fn output_parity(a: usize) -> bool {
    parity(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::parse_bits;
    use crate::rational::ratio;
    use num_traits::One;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn anf(n: usize, ms: &[&[usize]]) -> BooleanFunctionAnf {
        BooleanFunctionAnf::from_indices(n, ms.iter().map(|m| m.to_vec())).unwrap()
    }

    fn fc(n: usize, ms: &[&[usize]]) -> ConditionalBox {
        ConditionalBox::full_correlation(&anf(n, ms)).unwrap()
    }

    fn example_f() -> BooleanFunctionAnf {
        anf(5, &[&[1, 2, 3], &[1, 4], &[4, 5], &[3]])
    }

    #[test]
    fn bs_rules() {
        let w = WiringProtocol::bs(2).unwrap();
        let r = w.rule(Party(1));
        assert!(r.y(true, false));
        assert!(!r.y(true, true));
        assert!(!r.y(false, false) && !r.y(false, true));
        assert!(!r.c(false, true, true) && !r.c(true, true, true));
        assert!(r.c(true, true, false));
    }

    #[test]
    fn relations_under_bs_wiring() {
        for n in 2..=4 {
            let pr = ConditionalBox::npr(n).unwrap();
            let c = ConditionalBox::even_parity(n).unwrap();
            let w = WiringProtocol::bs(n).unwrap();
            assert_eq!(compose_adaptive(&pr, &pr, &w).unwrap(), pr);
            assert_eq!(compose_adaptive(&c, &c, &w).unwrap(), c);
        }
        let pr3 = ConditionalBox::npr(3).unwrap();
        let c3 = ConditionalBox::even_parity(3).unwrap();
        let w3 = WiringProtocol::bs(3).unwrap();
        let out = compose_adaptive(&c3, &pr3, &w3).unwrap();
        assert_eq!(out, ConditionalBox::mix(&pr3, &c3, &ratio(1, 4)).unwrap());
        assert!(out.is_nonsignaling());
    }

    #[test]
    fn compose_dimension_mismatch() {
        let w = WiringProtocol::bs(2).unwrap();
        let pr3 = ConditionalBox::npr(3).unwrap();
        assert!(matches!(
            compose_adaptive(&pr3, &pr3, &w),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn construction_from_pr_boxes() {
        let f = anf(3, &[&[], &[1, 2], &[1, 3]]);
        let (b, count) = build_from_prs(&f).unwrap();
        assert_eq!(count, 3);
        assert_eq!(b, ConditionalBox::full_correlation(&f).unwrap());

        let (b, count) = build_from_prs(&example_f()).unwrap();
        assert_eq!(count, 4);
        assert_eq!(
            example_f().monomials().iter().filter(|m| m.degree() <= 1).count(),
            1
        );
        assert_eq!(b, ConditionalBox::full_correlation(&example_f()).unwrap());

        let (b, count) = build_from_prs(&BooleanFunctionAnf::zero(3)).unwrap();
        assert_eq!(count, 0);
        assert_eq!(b, ConditionalBox::even_parity(3).unwrap());
    }

    #[test]
    fn lemma3_examples() {
        // g1 = x1x2 on {1,2}; product x2x3 on {2,3}
        let g1 = anf(2, &[&[1, 2]]);
        let p1 = ConditionalBox::full_correlation(&g1).unwrap();
        let p2 = ConditionalBox::npr(2).unwrap();
        let out = lemma3_compose(&p1, &g1, &p2, 2, 2, 3).unwrap();
        assert_eq!(out, fc(3, &[&[1, 2], &[2, 3]]));

        let zero = BooleanFunctionAnf::zero(2);
        let p1 = ConditionalBox::full_correlation(&zero).unwrap();
        let p2 = fc(3, &[&[1, 2]]);
        let out = lemma3_compose(&p1, &zero, &p2, 2, 2, 3).unwrap();
        assert_eq!(out, fc(4, &[&[2, 3]]));
    }

    #[test]
    fn lemma3_errors() {
        let g1 = anf(2, &[&[1, 2]]);
        let p1 = ConditionalBox::full_correlation(&g1).unwrap();
        let p2 = ConditionalBox::npr(2).unwrap();
        assert!(matches!(
            lemma3_compose(&p1, &g1, &p2, 2, 3, 3),
            Err(Error::IndexRange { .. })
        ));
        let wrong = ConditionalBox::even_parity(2).unwrap();
        assert!(matches!(
            lemma3_compose(&wrong, &g1, &p2, 2, 2, 3),
            Err(Error::ComponentMismatch(_))
        ));
        assert!(matches!(
            lemma3_compose(&p1, &g1, &wrong, 2, 2, 3),
            Err(Error::ComponentMismatch(_))
        ));
    }

    #[test]
    fn xor_local() {
        let target = ConditionalBox::full_correlation(&example_f()).unwrap();
        let out = xor_local_part(&target, &anf(5, &[&[3]])).unwrap();
        assert_eq!(out, fc(5, &[&[1, 2, 3], &[1, 4], &[4, 5]]));
        assert_eq!(xor_local_part(&target, &BooleanFunctionAnf::zero(5)).unwrap(), target);
        let local = anf(5, &[&[], &[2], &[5]]);
        let twice = xor_local_part(&xor_local_part(&target, &local).unwrap(), &local).unwrap();
        assert_eq!(twice, target);
        assert!(matches!(
            xor_local_part(&target, &anf(5, &[&[1, 2]])),
            Err(Error::NonLocalMonomial(_))
        ));
    }

    #[test]
    fn collapse_example_isolation() {
        let eps = ratio(2, 7);
        let target = ConditionalBox::full_correlation(&example_f()).unwrap();
        let closest = fc(5, &[&[3]]);
        let noisy = ConditionalBox::mix(&target, &closest, &eps).unwrap();
        let stripped = xor_local_part(&noisy, &anf(5, &[&[3]])).unwrap();
        let constants = BTreeMap::from([(Party(4), false), (Party(5), false)]);
        let absorbed = BTreeSet::from([Party(4), Party(5)]);
        let out = collapse_parties(&stripped, &constants, &absorbed, Party(1)).unwrap();
        let expected = ConditionalBox::mix(
            &ConditionalBox::npr(3).unwrap(),
            &ConditionalBox::even_parity(3).unwrap(),
            &eps,
        )
        .unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn collapse_identity_and_absorb() {
        let pr3 = ConditionalBox::npr(3).unwrap();
        let out = collapse_parties(&pr3, &BTreeMap::new(), &BTreeSet::new(), Party(1)).unwrap();
        assert_eq!(out, pr3);

        let constants = BTreeMap::from([(Party(3), true)]);
        let out =
            collapse_parties(&pr3, &constants, &BTreeSet::from([Party(3)]), Party(1)).unwrap();
        assert_eq!(out, ConditionalBox::npr(2).unwrap());

        // constant on a kept party: x3 = 0 kills the product
        let out = collapse_parties(
            &pr3,
            &BTreeMap::from([(Party(3), false)]),
            &BTreeSet::new(),
            Party(1),
        )
        .unwrap();
        assert_eq!(out, ConditionalBox::even_parity(3).unwrap());
    }

    #[test]
    fn collapse_errors() {
        let pr3 = ConditionalBox::npr(3).unwrap();
        let constants = BTreeMap::from([(Party(1), true)]);
        assert!(matches!(
            collapse_parties(&pr3, &constants, &BTreeSet::from([Party(1)]), Party(1)),
            Err(Error::ReceiverAbsorbed(_))
        ));
        assert!(matches!(
            collapse_parties(&pr3, &BTreeMap::new(), &BTreeSet::from([Party(2)]), Party(1)),
            Err(Error::MissingConstant(Party(2)))
        ));
        assert!(matches!(
            collapse_parties(&pr3, &BTreeMap::new(), &BTreeSet::new(), Party(4)),
            Err(Error::InvalidParty { .. })
        ));
    }

    #[test]
    fn sampling_respects_support() {
        let c2 = ConditionalBox::even_parity(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for x in 0..4 {
            for _ in 0..200 {
                let a = sample(&c2, x, &mut rng);
                assert!(!output_parity(a));
            }
        }
        let pr3 = ConditionalBox::npr(3).unwrap();
        let x = parse_bits("111", 3).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| sample(&pr3, x, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
    }

    #[test]
    fn deterministic_box_sampling() {
        let det = ConditionalBox::from_fn(1, |x, a| if x == a { Q::one() } else { Q::zero() })
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample(&det, 1, &mut rng), 1);
        assert_eq!(sample(&det, 0, &mut rng), 0);
    }
}
