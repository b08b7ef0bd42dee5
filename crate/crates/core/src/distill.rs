//! Two-copy adaptive distillation of the correlated PR family.
//!
//! One round wires two copies of `ε·P^PR_n + (1-ε)·P^c_n` with
//! [`WiringProtocol::bs`] and lands back in the family with weight
//! `T_n(ε) = ε(2^{n-1} + 1 - ε) / 2^{n-1}`.
//!
//! Iterating `T_n` exactly doubles the bit length of `ε` every round, so traces
//! keep exact rationals up to a bit budget and continue with outward-rounded
//! dyadic enclosures afterwards (`T_n` is increasing on `[0, 1]`).

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::boxes::{check_parties, ConditionalBox, NoiseFamilyMember};
use crate::error::{Error, Result};
use crate::rational::{self, Q};
use crate::wiring::{compose_adaptive, WiringProtocol};

/// Default total bit length (numerator + denominator) kept exact in traces.
pub const DEFAULT_EXACT_BITS: u64 = 1 << 16;

/// Binary digits kept by enclosure bounds.
const ENCLOSURE_BITS: usize = 256;

/// Guard against runaway iteration; convergence is geometric near 1.
const MAX_ROUNDS: usize = 100_000;

fn check_map_args(n: usize, epsilon: &Q) -> Result<()> {
    if n < 2 {
        return Err(Error::PartyCount(n));
    }
    check_parties(n)?;
    if !rational::in_unit_interval(epsilon) {
        return Err(Error::EpsilonRange(rational::format(epsilon)));
    }
    Ok(())
}

/// Polynomial `ε(c + 1 - ε)/c` with `c = 2^{n-1}`, evaluated without range checks.
fn t_poly(n: usize, epsilon: &Q) -> Q {
    let c = rational::pow2(n - 1);
    epsilon * (&c + Q::one() - epsilon) / c
}

/// The one-round map `T_n`.
pub fn t_map(n: usize, epsilon: &Q) -> Result<Q> {
    check_map_args(n, epsilon)?;
    Ok(t_poly(n, epsilon))
}

/// One exact box-level round: composes two copies of the realized box under the
/// distillation wiring and decomposes the result back into the family.
///
/// The decomposed weight must equal [`t_map`]; any other outcome is an error.
pub fn bs_round(member: &NoiseFamilyMember) -> Result<NoiseFamilyMember> {
    let n = member.target.n();
    if n < 2 {
        return Err(Error::PartyCount(n));
    }
    if member.target != ConditionalBox::npr(n)? || member.local != ConditionalBox::even_parity(n)? {
        return Err(Error::NotInFamily);
    }
    let realized = member.realized();
    let wiring = WiringProtocol::bs(n)?;
    let out = compose_adaptive(&realized, &realized, &wiring)?;
    let next = out
        .decompose_epsilon(&member.target, &member.local)
        .map_err(|e| Error::FamilyMismatch(e.to_string()))?;
    let expected = t_poly(n, &member.epsilon);
    if next != expected {
        return Err(Error::FamilyMismatch(format!(
            "composed weight {} differs from map value {}",
            rational::format(&next),
            rational::format(&expected)
        )));
    }
    NoiseFamilyMember::new(member.target.clone(), member.local.clone(), next)
}

/// A trace value: exact, or enclosed in `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Epsilon {
    Exact(Q),
    Bounded { lower: Q, upper: Q },
}

impl Epsilon {
    pub fn exact(&self) -> Option<&Q> {
        match self {
            Epsilon::Exact(q) => Some(q),
            Epsilon::Bounded { .. } => None,
        }
    }

    pub fn lower(&self) -> &Q {
        match self {
            Epsilon::Exact(q) => q,
            Epsilon::Bounded { lower, .. } => lower,
        }
    }

    pub fn upper(&self) -> &Q {
        match self {
            Epsilon::Exact(q) => q,
            Epsilon::Bounded { upper, .. } => upper,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Epsilon::Exact(q) => rational::to_f64(q),
            Epsilon::Bounded { lower, upper } => {
                (rational::to_f64(lower) + rational::to_f64(upper)) / 2.0
            }
        }
    }

    /// `"p/q"` for exact values, `"p/q..p/q"` for enclosures.
    pub fn render(&self) -> String {
        match self {
            Epsilon::Exact(q) => rational::format(q),
            Epsilon::Bounded { lower, upper } => {
                format!("{}..{}", rational::format(lower), rational::format(upper))
            }
        }
    }

    /// Decimal digits of the value (midpoint of an enclosure).
    pub fn decimal(&self, digits: usize) -> String {
        match self {
            Epsilon::Exact(q) => rational::to_decimal(q, digits),
            Epsilon::Bounded { lower, upper } => {
                rational::to_decimal(&((lower + upper) / rational::int(2)), digits)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistillationTrace {
    pub n: usize,
    /// `ε_0, ε_1, …, ε_m`.
    pub epsilons: Vec<Epsilon>,
    /// Number of leading rounds that were carried out on full box tables.
    pub box_level_rounds: usize,
}

impl DistillationTrace {
    pub fn rounds(&self) -> usize {
        self.epsilons.len() - 1
    }

    /// Boxes consumed to produce one output box, `2^m`.
    pub fn copies_used(&self) -> BigUint {
        BigUint::one() << self.rounds()
    }

    pub fn last(&self) -> &Epsilon {
        self.epsilons.last().expect("trace holds at least epsilon_0")
    }

    /// Checks `ε_{k+1} = T_n(ε_k)` for exact neighbours and enclosure soundness otherwise.
    pub fn is_consistent(&self) -> bool {
        self.epsilons.windows(2).all(|w| match (&w[0], &w[1]) {
            (Epsilon::Exact(a), Epsilon::Exact(b)) => t_poly(self.n, a) == *b,
            (prev, next) => {
                *next.lower() <= t_poly(self.n, prev.lower())
                    && t_poly(self.n, prev.upper()) <= *next.upper()
            }
        })
    }

    /// CSV rows `round,epsilon,epsilon_decimal,copies` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,epsilon,epsilon_decimal,copies\n");
        for (k, e) in self.epsilons.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                k,
                e.render(),
                e.decimal(20),
                BigUint::one() << k
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistillOptions {
    /// Run every exactly representable round on full box tables.
    pub box_level: bool,
    /// Total bit length above which exact iteration switches to enclosures.
    pub exact_bits: u64,
}

impl Default for DistillOptions {
    fn default() -> Self {
        Self {
            box_level: false,
            exact_bits: DEFAULT_EXACT_BITS,
        }
    }
}

fn bit_size(q: &Q) -> u64 {
    q.numer().bits() + q.denom().bits()
}

fn round_dyadic(q: &Q, bits: usize, up: bool) -> Q {
    let scale = BigInt::one() << bits;
    let scaled = q.numer() * &scale;
    let (quot, rem) = scaled.div_mod_floor(q.denom());
    let quot = if up && !rem.is_zero() { quot + 1 } else { quot };
    Q::new(quot, scale)
}

struct Stepper {
    n: usize,
    opts: DistillOptions,
    precision: usize,
    member: Option<NoiseFamilyMember>,
    box_rounds: usize,
}

impl Stepper {
    fn new(n: usize, epsilon0: &Q, opts: DistillOptions) -> Result<Self> {
        let member = if opts.box_level {
            Some(NoiseFamilyMember::correlated_pr(n, epsilon0.clone())?)
        } else {
            None
        };
        Ok(Self {
            n,
            opts,
            precision: ENCLOSURE_BITS,
            member,
            box_rounds: 0,
        })
    }

    fn step(&mut self, current: &Epsilon) -> Result<Epsilon> {
        match current {
            Epsilon::Exact(q) if bit_size(q) <= self.opts.exact_bits => {
                let next = t_poly(self.n, q);
                if let Some(member) = self.member.take() {
                    let advanced = bs_round(&member)?;
                    debug_assert_eq!(advanced.epsilon, next);
                    self.box_rounds += 1;
                    self.member = Some(advanced);
                }
                Ok(Epsilon::Exact(next))
            }
            other => {
                self.member = None;
                let lower = round_dyadic(&t_poly(self.n, other.lower()), self.precision, false);
                let upper = round_dyadic(&t_poly(self.n, other.upper()), self.precision, true);
                // clamp into [0, 1]; both fixed points are preserved exactly
                let lower = lower.max(Q::zero());
                let upper = upper.min(Q::one());
                Ok(Epsilon::Bounded { lower, upper })
            }
        }
    }
}

fn check_start(n: usize, epsilon0: &Q) -> Result<()> {
    check_map_args(n, epsilon0)?;
    if epsilon0.is_zero() || epsilon0.is_one() {
        return Err(Error::FixedPoint(rational::format(epsilon0)));
    }
    Ok(())
}

/// Runs exactly `rounds` rounds from `epsilon0`.
pub fn distill_rounds(
    n: usize,
    epsilon0: &Q,
    rounds: usize,
    opts: DistillOptions,
) -> Result<DistillationTrace> {
    check_start(n, epsilon0)?;
    let mut stepper = Stepper::new(n, epsilon0, opts)?;
    let mut epsilons = vec![Epsilon::Exact(epsilon0.clone())];
    for _ in 0..rounds {
        let next = stepper.step(epsilons.last().unwrap())?;
        epsilons.push(next);
    }
    Ok(DistillationTrace {
        n,
        epsilons,
        box_level_rounds: stepper.box_rounds,
    })
}

/// Iterates until `1 - ε_m < delta`.
pub fn distill_to(
    n: usize,
    epsilon0: &Q,
    delta: &Q,
    opts: DistillOptions,
) -> Result<DistillationTrace> {
    check_start(n, epsilon0)?;
    if !delta.is_positive() || *delta >= Q::one() {
        return Err(Error::DeltaRange(rational::format(delta)));
    }
    let threshold = Q::one() - delta;
    let mut stepper = Stepper::new(n, epsilon0, opts)?;
    let mut epsilons = vec![Epsilon::Exact(epsilon0.clone())];
    loop {
        let last = epsilons.last().unwrap();
        if *last.lower() > threshold {
            break;
        }
        if *last.upper() > threshold {
            // enclosure straddles the threshold: redo the inexact tail more finely
            let restart = epsilons
                .iter()
                .rposition(|e| e.exact().is_some())
                .expect("epsilon_0 is exact");
            epsilons.truncate(restart + 1);
            stepper.precision *= 2;
            stepper.opts.exact_bits = 0;
            continue;
        }
        if epsilons.len() > MAX_ROUNDS {
            return Err(Error::DeltaRange(format!(
                "{} not reached within {MAX_ROUNDS} rounds",
                rational::format(delta)
            )));
        }
        let next = stepper.step(last)?;
        epsilons.push(next);
    }
    Ok(DistillationTrace {
        n,
        epsilons,
        box_level_rounds: stepper.box_rounds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Attractive,
    Repulsive,
    Neutral,
}

impl Stability {
    fn classify(derivative: &Q) -> Self {
        match derivative.abs().cmp(&Q::one()) {
            std::cmp::Ordering::Less => Stability::Attractive,
            std::cmp::Ordering::Greater => Stability::Repulsive,
            std::cmp::Ordering::Equal => Stability::Neutral,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub n: usize,
    pub derivative_at_0: Q,
    pub derivative_at_1: Q,
    pub at_0: Stability,
    pub at_1: Stability,
    /// Central finite differences of the map in `f64`.
    pub finite_difference_at_0: f64,
    pub finite_difference_at_1: f64,
}

impl StabilityReport {
    pub fn finite_difference_error(&self) -> f64 {
        let e0 = (self.finite_difference_at_0 - rational::to_f64(&self.derivative_at_0)).abs();
        let e1 = (self.finite_difference_at_1 - rational::to_f64(&self.derivative_at_1)).abs();
        e0.max(e1)
    }
}

/// Step used by the finite-difference cross-check.
pub const FD_STEP: f64 = 1e-6;

/// Derivatives of `T_n` at both fixed points, from the polynomial coefficients
/// `T_n(ε) = (1 + 1/c) ε - ε²/c`.
pub fn stability_report(n: usize) -> Result<StabilityReport> {
    if n < 2 {
        return Err(Error::PartyCount(n));
    }
    check_parties(n)?;
    let c = rational::pow2(n - 1);
    let linear = Q::one() + c.recip();
    let quadratic = -c.recip();
    let derivative = |e: &Q| &linear + rational::int(2) * &quadratic * e;
    let derivative_at_0 = derivative(&Q::zero());
    let derivative_at_1 = derivative(&Q::one());

    let cf = (1u64 << (n - 1)) as f64;
    let t = |e: f64| e * (cf + 1.0 - e) / cf;
    let fd = |e: f64| (t(e + FD_STEP) - t(e - FD_STEP)) / (2.0 * FD_STEP);

    Ok(StabilityReport {
        n,
        at_0: Stability::classify(&derivative_at_0),
        at_1: Stability::classify(&derivative_at_1),
        derivative_at_0,
        derivative_at_1,
        finite_difference_at_0: fd(0.0),
        finite_difference_at_1: fd(1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationCheck {
    pub name: &'static str,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationsReport {
    pub n: usize,
    pub checks: Vec<RelationCheck>,
}

impl RelationsReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Checks the four two-copy composition rules under the distillation wiring.
pub fn verify_relations(n: usize) -> Result<RelationsReport> {
    verify_relations_with(n, &WiringProtocol::bs(n)?)
}

/// As [`verify_relations`] with a caller-supplied wiring.
pub fn verify_relations_with(n: usize, wiring: &WiringProtocol) -> Result<RelationsReport> {
    if n < 2 {
        return Err(Error::PartyCount(n));
    }
    let pr = ConditionalBox::npr(n)?;
    let c = ConditionalBox::even_parity(n)?;
    let weight = rational::inv_pow2(n - 1);
    let mixed = ConditionalBox::mix(&pr, &c, &weight)?;
    let cases: [(&'static str, &ConditionalBox, &ConditionalBox, &ConditionalBox); 4] = [
        ("PR.PR -> PR", &pr, &pr, &pr),
        ("PR.Pc -> PR", &pr, &c, &pr),
        ("Pc.PR -> 2^(1-n) PR + (1-2^(1-n)) Pc", &c, &pr, &mixed),
        ("Pc.Pc -> Pc", &c, &c, &c),
    ];
    let checks = cases
        .into_iter()
        .map(|(name, first, second, expected)| {
            let out = compose_adaptive(first, second, wiring)?;
            Ok(RelationCheck {
                name,
                passed: out == *expected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RelationsReport { n, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::wiring::PartyRule;

    #[test]
    fn map_values() {
        for n in 2..=6 {
            assert_eq!(t_map(n, &Q::zero()).unwrap(), Q::zero());
            assert_eq!(t_map(n, &Q::one()).unwrap(), Q::one());
        }
        assert_eq!(t_map(2, &ratio(1, 2)).unwrap(), ratio(5, 8));
        assert_eq!(t_map(3, &ratio(1, 3)).unwrap(), ratio(7, 18));
        assert!(t_map(1, &ratio(1, 2)).is_err());
        assert!(t_map(3, &ratio(-1, 2)).is_err());
        assert!(t_map(3, &ratio(3, 2)).is_err());
    }

    #[test]
    fn box_rounds_match_map() {
        let m = NoiseFamilyMember::correlated_pr(3, ratio(1, 3)).unwrap();
        assert_eq!(bs_round(&m).unwrap().epsilon, ratio(7, 18));
        let m = NoiseFamilyMember::correlated_pr(2, ratio(1, 2)).unwrap();
        assert_eq!(bs_round(&m).unwrap().epsilon, ratio(5, 8));
        let m = NoiseFamilyMember::correlated_pr(4, Q::one()).unwrap();
        assert_eq!(bs_round(&m).unwrap().epsilon, Q::one());
    }

    #[test]
    fn bs_round_rejects_foreign_family() {
        let target = ConditionalBox::npr(3).unwrap();
        let m = NoiseFamilyMember::new(target.clone(), target, ratio(1, 2)).unwrap();
        assert_eq!(bs_round(&m), Err(Error::NotInFamily));
    }

    #[test]
    fn distill_to_terminates() {
        let trace = distill_to(3, &ratio(1, 2), &ratio(1, 100), DistillOptions::default()).unwrap();
        assert!(trace.is_consistent());
        let last = trace.last();
        assert!(Q::one() - last.lower() < ratio(1, 100));
        for w in trace.epsilons.windows(2) {
            assert!(w[1].lower() > w[0].upper());
        }

        let trace = distill_to(2, &ratio(1, 10), &ratio(1, 10), DistillOptions::default()).unwrap();
        assert!(Q::one() - trace.last().lower() < ratio(1, 10));

        let trace = distill_to(3, &ratio(1, 2), &ratio(3, 5), DistillOptions::default()).unwrap();
        assert_eq!(trace.rounds(), 0);
        assert_eq!(trace.epsilons, vec![Epsilon::Exact(ratio(1, 2))]);
        assert_eq!(trace.copies_used(), BigUint::one());
    }

    #[test]
    fn distill_rejects_endpoints() {
        let opts = DistillOptions::default();
        assert!(matches!(
            distill_to(3, &Q::zero(), &ratio(1, 10), opts),
            Err(Error::FixedPoint(_))
        ));
        assert!(matches!(
            distill_to(3, &Q::one(), &ratio(1, 10), opts),
            Err(Error::FixedPoint(_))
        ));
        assert!(matches!(
            distill_to(3, &ratio(1, 2), &Q::zero(), opts),
            Err(Error::DeltaRange(_))
        ));
    }

    #[test]
    fn enclosures_take_over_past_the_budget() {
        let opts = DistillOptions {
            box_level: false,
            exact_bits: 64,
        };
        let trace = distill_rounds(3, &ratio(1, 10), 12, opts).unwrap();
        assert!(trace.epsilons.iter().any(|e| e.exact().is_none()));
        assert!(trace.is_consistent());
        // compare with the fully exact run
        let exact = distill_rounds(3, &ratio(1, 10), 12, DistillOptions::default()).unwrap();
        for (e, x) in trace.epsilons.iter().zip(&exact.epsilons) {
            let v = x.exact().unwrap();
            assert!(e.lower() <= v && v <= e.upper());
        }
    }

    #[test]
    fn box_level_audit_matches_scalar() {
        let opts = DistillOptions {
            box_level: true,
            ..DistillOptions::default()
        };
        let audited = distill_rounds(3, &ratio(1, 2), 3, opts).unwrap();
        let scalar = distill_rounds(3, &ratio(1, 2), 3, DistillOptions::default()).unwrap();
        assert_eq!(audited.box_level_rounds, 3);
        assert_eq!(audited.epsilons, scalar.epsilons);
    }

    #[test]
    fn stability_values() {
        let r = stability_report(2).unwrap();
        assert_eq!((r.derivative_at_0.clone(), r.derivative_at_1.clone()), (ratio(3, 2), ratio(1, 2)));
        let r = stability_report(3).unwrap();
        assert_eq!((r.derivative_at_0.clone(), r.derivative_at_1.clone()), (ratio(5, 4), ratio(3, 4)));
        for n in 2..=8 {
            let r = stability_report(n).unwrap();
            assert_eq!((r.at_0, r.at_1), (Stability::Repulsive, Stability::Attractive));
            assert!(r.finite_difference_error() < 1e-9);
        }
    }

    #[test]
    fn relations_hold_and_mutation_is_caught() {
        for n in [2, 3] {
            assert!(verify_relations(n).unwrap().all_passed());
        }
        // outputting a alone reproduces the first box: only the Pc.PR rule breaks
        let first_only =
            WiringProtocol::uniform(3, PartyRule::from_fns(|x, a| x && !a, |_, a, _| a)).unwrap();
        let report = verify_relations_with(3, &first_only).unwrap();
        let passed: Vec<bool> = report.checks.iter().map(|c| c.passed).collect();
        assert_eq!(passed, vec![true, true, false, true]);

        let second_only =
            WiringProtocol::uniform(3, PartyRule::from_fns(|x, a| x && !a, |_, _, b| b)).unwrap();
        let report = verify_relations_with(3, &second_only).unwrap();
        assert!(!report.checks[0].passed);
    }

    #[test]
    fn csv_export() {
        let trace = distill_rounds(2, &ratio(1, 2), 1, DistillOptions::default()).unwrap();
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "round,epsilon,epsilon_decimal,copies");
        assert!(lines[1].starts_with("0,1/2,0.5"));
        assert!(lines[2].starts_with("1,5/8,0.625"));
        assert!(lines[2].ends_with(",2"));
    }
}
