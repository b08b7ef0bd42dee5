//! One-way channel accounting, isolation plans and the partial-communication
//! distillation pipeline.
//!
//! A full-correlation box whose degree-2+ monomials form one connected component
//! can be simulated from scratch with `|support| - 1` one-way channels. When it is
//! only available with noise, one monomial `I*` can be isolated instead: parties
//! outside `I*` feed constant inputs and forward their outputs along a chain into a
//! receiver inside `I*`, which leaves a noisy `|I*|`-party PR box that distills
//! with the two-copy protocol. The remaining monomials are simulated perfectly
//! over the same channels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::anf::{BooleanFunctionAnf, Monomial, MonomialStructure};
use crate::boxes::{ConditionalBox, NoiseFamilyMember, Party};
use crate::distill::{bs_round, DistillOptions, DistillationTrace, Epsilon};
use crate::error::{Error, Result};
use crate::rational::{self, Q};
use crate::wiring::{collapse_parties, xor_combine, xor_local_part};

fn require_connected(s: &MonomialStructure) -> Result<()> {
    match s.n_j() {
        0 => Err(Error::NoNonLocalMonomial),
        1 => Ok(()),
        k => Err(Error::Hypothesis(k)),
    }
}

/// Channels needed to simulate the box from scratch: `|support| - 1`.
pub fn channels_scratch(s: &MonomialStructure) -> Result<usize> {
    require_connected(s)?;
    Ok(s.support.degree() - 1)
}

/// Upper bound on the channels needed when distilling from a noisy box.
pub fn channels_distill_bound(s: &MonomialStructure) -> Result<usize> {
    require_connected(s)?;
    let max_m = s.max_m().unwrap_or(0);
    Ok(if max_m == s.n { 0 } else { s.n - 1 - max_m })
}

/// Whether `max m_I > n - |support|`, the condition under which partial
/// communication beats simulation from scratch.
pub fn corollary_holds(s: &MonomialStructure) -> Result<bool> {
    require_connected(s)?;
    Ok(s.max_m().unwrap_or(0) > s.n - s.support.degree())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunicationPlan {
    /// Directed `(sender, receiver)` pairs, in chain order.
    pub channels: Vec<(Party, Party)>,
    pub isolated_monomial: Monomial,
    pub receiver: Party,
    /// Fixed inputs of the parties outside the isolated monomial.
    pub constant_assignment: BTreeMap<Party, bool>,
}

impl CommunicationPlan {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Parties whose outputs are folded into the receiver before distilling.
    pub fn absorbed(&self) -> BTreeSet<Party> {
        self.constant_assignment.keys().copied().collect()
    }
}

impl fmt::Display for CommunicationPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let chain: Vec<String> = self
            .channels
            .iter()
            .map(|(s, r)| format!("{}->{}", s.0, r.0))
            .collect();
        write!(
            f,
            "isolate {} at party {}; channels [{}]",
            self.isolated_monomial,
            self.receiver.0,
            chain.join(", ")
        )
    }
}

/// Picks `I*` with the largest exclusive count (lexicographically smallest on
/// ties), a receiver inside it, and a descending chain of senders into the receiver.
///
/// Senders are every party except the receiver and the exclusive members of `I*`.
/// When `I*` is the only non-local monomial and does not cover all parties, every
/// member is exclusive and the chain has `n - m` channels, one more than the bound
/// `n - 1 - m`; the plan is still returned.
pub fn make_isolation_plan(s: &MonomialStructure) -> Result<CommunicationPlan> {
    require_connected(s)?;
    let (&isolated, &best) = s
        .m
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .expect("connected structure has a monomial");
    if best == 0 {
        return Err(Error::IsolationFailed(
            "no monomial has a variable of its own".into(),
        ));
    }
    let exclusive = s.exclusive(isolated);
    let receiver = isolated
        .indices()
        .find(|&i| !exclusive.contains(i))
        .or_else(|| isolated.indices().next())
        .map(Party)
        .expect("monomial is non-empty");
    let senders: Vec<Party> = (1..=s.n)
        .rev()
        .map(Party)
        .filter(|&p| p != receiver && !exclusive.contains(p.0))
        .collect();
    let mut channels = Vec::with_capacity(senders.len());
    for (k, &from) in senders.iter().enumerate() {
        let to = senders.get(k + 1).copied().unwrap_or(receiver);
        channels.push((from, to));
    }
    let constant_assignment = (1..=s.n)
        .filter(|&i| !isolated.contains(i))
        .map(|i| (Party(i), false))
        .collect();
    Ok(CommunicationPlan {
        channels,
        isolated_monomial: isolated,
        receiver,
        constant_assignment,
    })
}

/// Places a box over `parties` (ascending) inside an `n`-party box whose other
/// parties ignore their inputs and output 0.
pub fn embed_box(b: &ConditionalBox, parties: &[Party], n: usize) -> Result<ConditionalBox> {
    if parties.len() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: b.n(),
            found: parties.len(),
        });
    }
    if let Some(&p) = parties.iter().find(|p| p.0 == 0 || p.0 > n) {
        return Err(Error::InvalidParty { party: p, n });
    }
    ConditionalBox::from_fn(n, |x, a| {
        let mut inner_x = 0;
        let mut inner_a = 0;
        let mut rest = a;
        for (slot, p) in parties.iter().enumerate() {
            inner_x |= (x >> p.bit() & 1) << slot;
            inner_a |= (a >> p.bit() & 1) << slot;
            rest &= !p.mask();
        }
        if rest != 0 {
            Q::zero()
        } else {
            b.prob(inner_x, inner_a).clone()
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOutcome {
    pub plan: CommunicationPlan,
    /// The collapsed box on the parties of `I*` before distilling.
    pub isolated: ConditionalBox,
    pub trace: DistillationTrace,
    /// `f` without the isolated monomial; what the noise falls back to.
    pub residual: BooleanFunctionAnf,
    pub epsilon_final: Q,
    pub final_box: ConditionalBox,
}

/// Runs the partial-communication pipeline on
/// `ε·FC(f) + (1-ε)·FC(local_noise)` for `rounds` exact two-copy rounds.
///
/// The returned box equals `ε_m·FC(f) + (1-ε_m)·FC(residual)` entrywise; this is
/// re-checked before returning.
pub fn partial_comm_distill(
    f: &BooleanFunctionAnf,
    local_noise: &BooleanFunctionAnf,
    epsilon: &Q,
    rounds: usize,
) -> Result<PipelineOutcome> {
    let n = f.n();
    if local_noise.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: local_noise.n(),
        });
    }
    if let Some(m) = local_noise.monomials().iter().find(|m| m.degree() > 1) {
        return Err(Error::NonLocalMonomial(m.to_string()));
    }
    if !rational::in_unit_interval(epsilon) {
        return Err(Error::EpsilonRange(rational::format(epsilon)));
    }
    if epsilon.is_zero() || epsilon.is_one() {
        return Err(Error::FixedPoint(rational::format(epsilon)));
    }
    let s = f.structure();
    let plan = make_isolation_plan(&s)?;

    let realized = ConditionalBox::mix(
        &ConditionalBox::full_correlation(f)?,
        &ConditionalBox::full_correlation(local_noise)?,
        epsilon,
    )?;
    let (_, local) = f.strip_local_part();
    let stripped = xor_local_part(&realized, &local)?;
    let isolated = collapse_parties(
        &stripped,
        &plan.constant_assignment,
        &plan.absorbed(),
        plan.receiver,
    )?;
    let k = plan.isolated_monomial.degree();
    let member = NoiseFamilyMember::correlated_pr(k, epsilon.clone())?;
    if isolated != member.realized() {
        return Err(Error::IsolationFailed(format!(
            "collapsed box on {} is not a noisy {k}-party PR box",
            plan.isolated_monomial
        )));
    }

    let mut epsilons = vec![Epsilon::Exact(epsilon.clone())];
    let mut current = member;
    for _ in 0..rounds {
        current = bs_round(&current)?;
        epsilons.push(Epsilon::Exact(current.epsilon.clone()));
        if current.epsilon.numer().bits() > DistillOptions::default().exact_bits {
            return Err(Error::SizeCap {
                what: "exact pipeline round count",
                needed: epsilons.len() - 1,
                cap: epsilons.len() - 2,
            });
        }
    }
    let trace = DistillationTrace {
        n: k,
        epsilons,
        box_level_rounds: rounds,
    };

    let isolated_parties: Vec<Party> = plan.isolated_monomial.indices().map(Party).collect();
    let isolated_function = BooleanFunctionAnf::new(n, [plan.isolated_monomial])?;
    let residual = f.xor(&isolated_function)?;
    let distilled = embed_box(&current.realized(), &isolated_parties, n)?;
    let final_box = xor_combine(&distilled, &ConditionalBox::full_correlation(&residual)?)?;

    let expected = ConditionalBox::mix(
        &ConditionalBox::full_correlation(f)?,
        &ConditionalBox::full_correlation(&residual)?,
        &current.epsilon,
    )?;
    if final_box != expected {
        return Err(Error::FamilyMismatch(
            "recombined box differs from the predicted mixture".into(),
        ));
    }
    Ok(PipelineOutcome {
        plan,
        isolated,
        trace,
        residual,
        epsilon_final: current.epsilon,
        final_box,
    })
}

/// Survey row for one 3-variable function with non-local monomials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurveyEntry {
    /// Truth table packed with `f(x)` at bit `x`.
    pub truth_table: u8,
    pub anf: String,
    pub class: usize,
    pub n_j: usize,
    pub m: BTreeMap<String, usize>,
    pub scratch: Option<usize>,
    pub distill_bound: Option<usize>,
    pub corollary_holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurveyClass {
    pub representative: String,
    pub members: usize,
    /// Members whose own ANF meets the corollary's condition.
    pub holding: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurveyReport {
    pub entries: Vec<SurveyEntry>,
    pub classes: Vec<SurveyClass>,
    /// Classes where no member meets the condition, contradicting a blanket claim
    /// that every genuinely three-party correlation is covered.
    pub discrepancies: Vec<String>,
}

impl SurveyReport {
    pub fn entry(&self, f: &BooleanFunctionAnf) -> Option<&SurveyEntry> {
        let tt = pack(f);
        self.entries.iter().find(|e| e.truth_table == tt)
    }
}

fn pack(f: &BooleanFunctionAnf) -> u8 {
    f.truth_table()
        .iter()
        .enumerate()
        .fold(0u8, |acc, (x, &v)| acc | (v as u8) << x)
}

fn unpack(tt: u8) -> BooleanFunctionAnf {
    let bits: Vec<bool> = (0..8).map(|x| tt >> x & 1 == 1).collect();
    BooleanFunctionAnf::from_truth_table(&bits).expect("length 8")
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Smallest packed table reachable by input flips, input permutations and
/// complementing the output.
fn canonical(tt: u8) -> u8 {
    let mut best = u8::MAX;
    for perm in PERMUTATIONS {
        for flip in 0..8usize {
            for complement in [0u8, 1] {
                let mut out = 0u8;
                for x in 0..8usize {
                    let y = (0..3).fold(0usize, |acc, i| acc | (x >> i & 1) << perm[i]) ^ flip;
                    out |= ((tt >> y & 1) ^ complement) << x;
                }
                best = best.min(out);
            }
        }
    }
    best
}

/// Channel counts for every Boolean function of three inputs that has a
/// non-local monomial, grouped into classes under local relabelings.
pub fn survey_three_party() -> SurveyReport {
    let mut entries = Vec::new();
    let mut class_index: BTreeMap<u8, usize> = BTreeMap::new();
    for tt in 0..=u8::MAX {
        let f = unpack(tt);
        let s = f.structure();
        if s.n_j() == 0 {
            continue;
        }
        let canon = canonical(tt);
        let next = class_index.len();
        let class = *class_index.entry(canon).or_insert(next);
        let connected = s.n_j() == 1;
        entries.push(SurveyEntry {
            truth_table: tt,
            anf: f.to_string(),
            class,
            n_j: s.n_j(),
            m: s.m.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            scratch: connected.then(|| channels_scratch(&s).expect("connected")),
            distill_bound: connected.then(|| channels_distill_bound(&s).expect("connected")),
            corollary_holds: connected.then(|| corollary_holds(&s).expect("connected")),
        });
    }
    let mut classes: Vec<SurveyClass> = class_index
        .iter()
        .map(|(&canon, _)| SurveyClass {
            representative: unpack(canon).to_string(),
            members: 0,
            holding: 0,
        })
        .collect();
    // class ids were assigned in discovery order; realign with the map order
    let order: BTreeMap<usize, usize> = class_index
        .values()
        .enumerate()
        .map(|(pos, &id)| (id, pos))
        .collect();
    for e in &mut entries {
        e.class = order[&e.class];
        let c = &mut classes[e.class];
        c.members += 1;
        c.holding += usize::from(e.corollary_holds == Some(true));
    }
    let discrepancies = classes
        .iter()
        .filter(|c| c.holding == 0)
        .map(|c| {
            format!(
                "class of {} ({} functions): condition fails for every member",
                c.representative, c.members
            )
        })
        .collect();
    SurveyReport {
        entries,
        classes,
        discrepancies,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::t_map;
    use crate::rational::ratio;

    fn anf(n: usize, ms: &[&[usize]]) -> BooleanFunctionAnf {
        BooleanFunctionAnf::from_indices(n, ms.iter().map(|m| m.to_vec())).unwrap()
    }

    fn example_f() -> BooleanFunctionAnf {
        anf(5, &[&[1, 2, 3], &[1, 4], &[4, 5], &[3]])
    }

    fn chain(pairs: &[(usize, usize)]) -> Vec<(Party, Party)> {
        pairs.iter().map(|&(a, b)| (Party(a), Party(b))).collect()
    }

    /// Grows a spanning set of channels monomial by monomial; each new monomial
    /// that touches the covered parties adds one channel per new party.
    fn inductive_scratch(s: &MonomialStructure) -> usize {
        let mut remaining: Vec<Monomial> = s.j.clone();
        let first = remaining.remove(0);
        let mut covered = first.mask();
        let mut channels = first.degree() - 1;
        while !remaining.is_empty() {
            let pos = remaining
                .iter()
                .position(|m| m.mask() & covered != 0)
                .expect("connected");
            let m = remaining.remove(pos);
            channels += (m.mask() & !covered).count_ones() as usize;
            covered |= m.mask();
        }
        channels
    }

    #[test]
    fn example_counts() {
        let s = example_f().structure();
        assert_eq!(channels_scratch(&s).unwrap(), 4);
        assert_eq!(channels_distill_bound(&s).unwrap(), 2);
        assert!(corollary_holds(&s).unwrap());
    }

    #[test]
    fn count_examples() {
        assert_eq!(channels_scratch(&anf(2, &[&[1, 2]]).structure()).unwrap(), 1);
        assert!(matches!(
            channels_scratch(&anf(4, &[&[1, 2], &[3, 4]]).structure()),
            Err(Error::Hypothesis(2))
        ));
        assert_eq!(channels_distill_bound(&anf(4, &[&[1, 2, 3, 4]]).structure()).unwrap(), 0);
        assert_eq!(channels_distill_bound(&anf(3, &[&[1, 2], &[2, 3]]).structure()).unwrap(), 1);
        assert!(!corollary_holds(&anf(3, &[&[1, 2], &[1, 3], &[2, 3]]).structure()).unwrap());
        assert!(corollary_holds(&anf(3, &[&[1, 2, 3]]).structure()).unwrap());
    }

    #[test]
    fn scratch_matches_induction() {
        for tt in 0..=u8::MAX {
            let s = unpack(tt).structure();
            if s.n_j() == 1 {
                assert_eq!(channels_scratch(&s).unwrap(), inductive_scratch(&s));
            }
        }
        for i in 1..=5 {
            for j in i + 1..=5 {
                let s = anf(5, &[&[i, j]]).structure();
                assert_eq!(channels_scratch(&s).unwrap(), 1);
            }
        }
    }

    #[test]
    fn plan_examples() {
        let plan = make_isolation_plan(&example_f().structure()).unwrap();
        assert_eq!(plan.isolated_monomial, Monomial::from_indices([1, 2, 3]).unwrap());
        assert_eq!(plan.receiver, Party(1));
        assert_eq!(plan.channels, chain(&[(5, 4), (4, 1)]));
        assert_eq!(plan.to_string(), "isolate {1,2,3} at party 1; channels [5->4, 4->1]");

        let plan = make_isolation_plan(&anf(3, &[&[1, 2, 3]]).structure()).unwrap();
        assert!(plan.channels.is_empty());

        let plan = make_isolation_plan(&anf(4, &[&[1, 2, 3], &[3, 4]]).structure()).unwrap();
        assert_eq!(plan.receiver, Party(3));
        assert_eq!(plan.channels, chain(&[(4, 3)]));

        assert!(matches!(
            make_isolation_plan(&anf(3, &[&[1]]).structure()),
            Err(Error::NoNonLocalMonomial)
        ));
        assert!(matches!(
            make_isolation_plan(&anf(3, &[&[1, 2], &[1, 3], &[2, 3]]).structure()),
            Err(Error::IsolationFailed(_))
        ));
    }

    #[test]
    fn lone_monomial_short_of_all_parties_exceeds_bound() {
        let s = anf(3, &[&[1, 2]]).structure();
        let plan = make_isolation_plan(&s).unwrap();
        assert_eq!(plan.channels, chain(&[(3, 1)]));
        assert_eq!(channels_distill_bound(&s).unwrap(), 0);
    }

    #[test]
    fn plan_bound_on_three_and_four_parties() {
        for n in [3usize, 4] {
            for tt in 0..1u32 << (1 << n) {
                let bits: Vec<bool> = (0..1 << n).map(|x| tt >> x & 1 == 1).collect();
                let f = BooleanFunctionAnf::from_truth_table(&bits).unwrap();
                let s = f.structure();
                if s.n_j() != 1 || s.max_m() == Some(0) {
                    continue;
                }
                let plan = make_isolation_plan(&s).unwrap();
                let bound = channels_distill_bound(&s).unwrap();
                let lone_short = s.j.len() == 1 && s.support.degree() < n;
                if lone_short {
                    assert_eq!(plan.channel_count(), bound + 1, "{f}");
                } else {
                    assert!(plan.channel_count() <= bound, "{f}");
                }
                if corollary_holds(&s).unwrap() {
                    assert!(bound < channels_scratch(&s).unwrap(), "{f}");
                }
                assert!(plan.channels.iter().all(|(a, b)| a != b));
            }
        }
    }

    #[test]
    fn example_pipeline() {
        let f = example_f();
        let noise = anf(5, &[&[3]]);
        let half = ratio(1, 2);
        let out = partial_comm_distill(&f, &noise, &half, 3).unwrap();
        assert_eq!(
            out.isolated,
            NoiseFamilyMember::correlated_pr(3, half.clone()).unwrap().realized()
        );
        let mut e = half.clone();
        for _ in 0..3 {
            e = t_map(3, &e).unwrap();
        }
        assert_eq!(out.epsilon_final, e);
        assert!(out.trace.is_consistent());
        assert_eq!(out.residual, anf(5, &[&[1, 4], &[4, 5], &[3]]));

        let zero = partial_comm_distill(&f, &noise, &half, 0).unwrap();
        let expected = ConditionalBox::mix(
            &ConditionalBox::full_correlation(&f).unwrap(),
            &ConditionalBox::full_correlation(&zero.residual).unwrap(),
            &half,
        )
        .unwrap();
        assert_eq!(zero.final_box, expected);
    }

    #[test]
    fn pipeline_distance_shrinks() {
        let f = example_f();
        let target = ConditionalBox::full_correlation(&f).unwrap();
        let noise = anf(5, &[&[3]]);
        let mut last = None;
        for rounds in 0..4 {
            let out = partial_comm_distill(&f, &noise, &ratio(1, 2), rounds).unwrap();
            let d = out.final_box.l1_distance(&target).unwrap();
            // f and the residual differ on the four inputs with x1x2x3 = 1, mass 2 each
            assert_eq!(d, rational::int(8) * (Q::one() - &out.epsilon_final));
            if let Some(prev) = last {
                assert!(d < prev);
            }
            last = Some(d);
        }
    }

    #[test]
    fn pipeline_rejects_bad_input() {
        let f = example_f();
        let noise = anf(5, &[&[3]]);
        assert!(matches!(
            partial_comm_distill(&f, &noise, &Q::one(), 1),
            Err(Error::FixedPoint(_))
        ));
        assert!(matches!(
            partial_comm_distill(&f, &anf(5, &[&[1, 2]]), &ratio(1, 2), 1),
            Err(Error::NonLocalMonomial(_))
        ));
        assert!(matches!(
            partial_comm_distill(&anf(4, &[&[1, 2], &[3, 4]]), &BooleanFunctionAnf::zero(4), &ratio(1, 2), 1),
            Err(Error::Hypothesis(2))
        ));
        // noise that stays visible on the isolated parties
        assert!(matches!(
            partial_comm_distill(&f, &anf(5, &[&[2]]), &ratio(1, 2), 1),
            Err(Error::IsolationFailed(_))
        ));
    }

    #[test]
    fn embed_round_trip() {
        let pr = ConditionalBox::npr(2).unwrap();
        let e = embed_box(&pr, &[Party(1), Party(3)], 3).unwrap();
        assert!(e.is_nonsignaling());
        assert_eq!(e.prob(0b111, 0b000), &ratio(0, 1));
        assert_eq!(e.prob(0b101, 0b001), &ratio(1, 2));
    }

    #[test]
    fn survey_flags() {
        let report = survey_three_party();
        let maj = report.entry(&anf(3, &[&[1, 2], &[1, 3], &[2, 3]])).unwrap();
        assert_eq!(maj.corollary_holds, Some(false));
        let pr = report.entry(&anf(3, &[&[1, 2, 3]])).unwrap();
        assert_eq!(pr.distill_bound, Some(0));
        assert_eq!(pr.scratch, Some(2));
        let h = report.entry(&anf(3, &[&[1, 2, 3], &[1, 2]])).unwrap();
        assert_eq!(h.m["{1,2,3}"], 1);
        assert_eq!(h.corollary_holds, Some(true));
        let rep = &report.classes[maj.class].representative;
        assert!(report.discrepancies.iter().any(|d| d.contains(rep.as_str())));
        let total: usize = report.classes.iter().map(|c| c.members).sum();
        assert_eq!(total, report.entries.len());
        // 256 functions minus the 16 affine ones
        assert_eq!(report.entries.len(), 240);
    }
}
