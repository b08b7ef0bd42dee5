//! Local deterministic strategies and the exact L1 distance to the local polytope.
//!
//! The distance `min_λ Σ_{x,a} |P(a|x) - Σ_v λ_v D_v(a|x)|` over mixtures of
//! deterministic vertices is solved through its dual
//!
//! ```text
//! max  w·P - max_v w·D_v      subject to  -1 ≤ w ≤ 1
//! ```
//!
//! by exact cutting planes: the restricted dual keeps one row per generated vertex,
//! the most violated vertices are added each round, and the row duals of the final
//! restricted problem are the optimal mixture weights. Both witnesses are checked
//! in exact arithmetic against all `4^n` vertices before a certificate is returned.

use num_traits::{One, Signed, Zero};

use crate::anf::{BooleanFunctionAnf, Monomial};
use crate::boxes::{check_parties, parity, ConditionalBox};
use crate::error::{Error, Result};
use crate::lp::{BoundedSimplex, Status};
use crate::rational::{self, Q};

/// Largest party count accepted by [`l1_distance_to_local`] unless overridden.
pub const DEFAULT_MAX_PARTIES: usize = 5;

/// A product of per-party deterministic strategies.
///
/// Encoded in an index where bits `2i` and `2i + 1` hold party `i + 1`'s outputs
/// for input 0 and input 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocalVertex {
    n: usize,
    index: usize,
}

impl LocalVertex {
    pub fn new(n: usize, index: usize) -> Self {
        debug_assert!(index < 1 << (2 * n));
        Self { n, index }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Party `party_bit + 1`'s output on `input`.
    pub fn strategy(&self, party_bit: usize, input: bool) -> bool {
        self.index >> (2 * party_bit + input as usize) & 1 == 1
    }

    /// Output word produced on input word `x`.
    pub fn output(&self, x: usize) -> usize {
        (0..self.n).fold(0, |acc, i| {
            acc | (self.strategy(i, x >> i & 1 == 1) as usize) << i
        })
    }

    pub fn to_box(&self) -> ConditionalBox {
        let size = 1usize << self.n;
        let mut table = vec![Q::zero(); size * size];
        for x in 0..size {
            table[(x << self.n) | self.output(x)] = Q::one();
        }
        ConditionalBox::from_table_unchecked(self.n, table)
    }
}

/// All `4^n` deterministic local strategies in index order.
pub fn enumerate_vertices(n: usize) -> Result<Vec<LocalVertex>> {
    check_parties(n)?;
    Ok((0..1usize << (2 * n)).map(|i| LocalVertex::new(n, i)).collect())
}

/// Exact optimum of the distance program with both witnesses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceCertificate {
    /// Plain L1 sum over all inputs and outputs.
    pub distance: Q,
    /// Sparse mixture weights over vertex indices, summing to 1.
    pub primal_witness: Vec<(usize, Q)>,
    /// Dual table `w[x * 2^n + a]` with entries in `[-1, 1]`.
    pub dual_witness: Vec<Q>,
    /// The witness mixture.
    pub closest_box: ConditionalBox,
}

impl DistanceCertificate {
    /// Re-derives both bounds from raw tables and checks they meet at `distance`.
    pub fn verify(&self, b: &ConditionalBox) -> Result<()> {
        let n = b.n();
        let fail = |m: String| Err(Error::Certificate(m));
        let mut total = Q::zero();
        for (v, weight) in &self.primal_witness {
            if weight.is_negative() {
                return fail(format!("negative weight on vertex {v}"));
            }
            if *v >= 1 << (2 * n) {
                return fail(format!("vertex {v} out of range"));
            }
            total += weight;
        }
        if !total.is_one() {
            return fail(format!("weights sum to {}", rational::format(&total)));
        }
        let rebuilt = mixture_box(n, &self.primal_witness);
        if rebuilt != self.closest_box {
            return fail("closest box is not the witness mixture".into());
        }
        let primal = b.l1_distance(&rebuilt)?;
        let dual = dual_bound(b, &self.dual_witness)?;
        if primal != self.distance || dual != self.distance {
            return fail(format!(
                "primal {} and dual {} do not meet at {}",
                rational::format(&primal),
                rational::format(&dual),
                rational::format(&self.distance)
            ));
        }
        Ok(())
    }
}

/// `Σ λ_v D_v` for sparse vertex weights.
pub fn mixture_box(n: usize, weights: &[(usize, Q)]) -> ConditionalBox {
    let size = 1usize << n;
    let mut table = vec![Q::zero(); size * size];
    for (v, w) in weights {
        let vertex = LocalVertex::new(n, *v);
        for x in 0..size {
            table[(x << n) | vertex.output(x)] += w;
        }
    }
    ConditionalBox::from_table_unchecked(n, table)
}

/// `w·P - max_v w·D_v`, a lower bound on the distance whenever `|w| ≤ 1`.
pub fn dual_bound(b: &ConditionalBox, w: &[Q]) -> Result<Q> {
    let n = b.n();
    let size = 1usize << n;
    if w.len() != size * size {
        return Err(Error::Certificate(format!(
            "dual table has {} entries, expected {}",
            w.len(),
            size * size
        )));
    }
    if w.iter().any(|v| v.abs() > Q::one()) {
        return Err(Error::Certificate("dual entry outside [-1, 1]".into()));
    }
    let value = w
        .iter()
        .zip(b.table())
        .filter(|(_, p)| !p.is_zero())
        .fold(Q::zero(), |acc, (w, p)| acc + w * p);
    let best = vertex_scores(n, w).into_iter().max().expect("vertices exist");
    Ok(value - best)
}

/// `Σ_x w[x, v(x)]` for every vertex `v`.
fn vertex_scores(n: usize, w: &[Q]) -> Vec<Q> {
    let size = 1usize << n;
    let vertices = 1usize << (2 * n);
    let mut scores = Vec::with_capacity(vertices);
    for v in 0..vertices {
        let vertex = LocalVertex::new(n, v);
        let mut s = Q::zero();
        for x in 0..size {
            let entry = &w[(x << n) | vertex.output(x)];
            if !entry.is_zero() {
                s += entry;
            }
        }
        scores.push(s);
    }
    scores
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceOptions {
    pub max_parties: usize,
    /// Vertices added per cutting-plane round.
    pub cuts_per_round: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            max_parties: DEFAULT_MAX_PARTIES,
            cuts_per_round: 16,
        }
    }
}

pub fn l1_distance_to_local(b: &ConditionalBox) -> Result<DistanceCertificate> {
    l1_distance_to_local_with(b, DistanceOptions::default())
}

pub fn l1_distance_to_local_with(
    b: &ConditionalBox,
    opts: DistanceOptions,
) -> Result<DistanceCertificate> {
    let n = b.n();
    if n > opts.max_parties {
        return Err(Error::SizeCap {
            what: "party count of the local-distance program",
            needed: n,
            cap: opts.max_parties,
        });
    }
    let size = 1usize << n;
    let entries = size * size;
    let vertices = 1usize << (2 * n);
    // columns: u = w + 1 in [0, 2] per entry, then z+ and z- (z = z+ - z-)
    let z_plus = entries;
    let z_minus = entries + 1;
    let two = rational::int(2);
    let mut cost: Vec<Q> = b.table().iter().map(|p| -p.clone()).collect();
    cost.push(Q::one());
    cost.push(-Q::one());
    let mut upper: Vec<Option<Q>> = vec![Some(two); entries];
    upper.push(None);
    upper.push(None);
    let mut lp = BoundedSimplex::new(cost, upper);

    let outputs: Vec<Vec<usize>> = (0..vertices)
        .map(|v| {
            let vertex = LocalVertex::new(n, v);
            (0..size).map(|x| vertex.output(x)).collect()
        })
        .collect();
    let mut row_vertex: Vec<usize> = Vec::new();
    let mut in_rows = vec![false; vertices];
    let add_cut = |lp: &mut BoundedSimplex, v: usize| {
        let mut coeffs: Vec<(usize, Q)> = outputs[v]
            .iter()
            .enumerate()
            .map(|(x, a)| ((x << n) | a, Q::one()))
            .collect();
        coeffs.push((z_plus, -Q::one()));
        coeffs.push((z_minus, Q::one()));
        lp.add_row(&coeffs, Q::zero());
    };

    let seed = best_response(b, &outputs);
    add_cut(&mut lp, seed);
    row_vertex.push(seed);
    in_rows[seed] = true;

    loop {
        match lp.solve() {
            Status::Optimal => {}
            other => return Err(Error::Lp(format!("restricted program ended {other:?}"))),
        }
        let sol = lp.solution();
        let z = &sol[z_plus] - &sol[z_minus];
        let mut violated: Vec<(Q, usize)> = (0..vertices)
            .filter(|&v| !in_rows[v])
            .filter_map(|v| {
                let score = outputs[v]
                    .iter()
                    .enumerate()
                    .map(|(x, a)| &sol[(x << n) | a])
                    .filter(|u| !u.is_zero())
                    .fold(Q::zero(), |acc, u| acc + u);
                (score > z).then(|| (score - &z, v))
            })
            .collect();
        if violated.is_empty() {
            break;
        }
        violated.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, v) in violated.iter().take(opts.cuts_per_round.max(1)) {
            add_cut(&mut lp, v);
            row_vertex.push(v);
            in_rows[v] = true;
        }
    }

    let sol = lp.solution();
    let distance = -lp.objective();
    let primal_witness: Vec<(usize, Q)> = lp
        .duals()
        .into_iter()
        .zip(&row_vertex)
        .filter(|(y, _)| !y.is_zero())
        .map(|(y, &v)| (v, -y))
        .collect();
    let mut primal_witness = primal_witness;
    primal_witness.sort_by_key(|(v, _)| *v);
    let dual_witness: Vec<Q> = sol[..entries].iter().map(|u| u - Q::one()).collect();
    let closest_box = mixture_box(n, &primal_witness);
    let cert = DistanceCertificate {
        distance,
        primal_witness,
        dual_witness,
        closest_box,
    };
    cert.verify(b)?;
    Ok(cert)
}

/// Vertex with the largest total probability `Σ_x P(v(x)|x)`.
fn best_response(b: &ConditionalBox, outputs: &[Vec<usize>]) -> usize {
    let mut best = (Q::zero(), 0usize);
    for (v, outs) in outputs.iter().enumerate() {
        let s = outs
            .iter()
            .enumerate()
            .fold(Q::zero(), |acc, (x, a)| acc + b.prob(x, *a));
        if s > best.0 {
            best = (s, v);
        }
    }
    best.1
}

/// Closest affine function to `f` in Hamming distance, by brute force over all
/// `2^{n+1}` affine functions. Ties go to the first in enumeration order
/// (linear part ascending, then constant 0 before 1).
pub fn nearest_affine_oracle(f: &BooleanFunctionAnf) -> (usize, BooleanFunctionAnf) {
    let n = f.n();
    let tt = f.truth_table();
    let mut best: Option<(usize, usize, bool)> = None;
    for linear in 0..1usize << n {
        for constant in [false, true] {
            let count = (0..1usize << n)
                .filter(|&x| tt[x] != (constant ^ parity(x & linear)))
                .count();
            if best.is_none_or(|(c, _, _)| count < c) {
                best = Some((count, linear, constant));
            }
        }
    }
    let (count, linear, constant) = best.expect("at least one affine function");
    let mut monomials: Vec<Monomial> = (0..n)
        .filter(|i| linear >> i & 1 == 1)
        .map(|i| Monomial::from_mask(1 << i))
        .collect();
    if constant {
        monomials.push(Monomial::CONSTANT);
    }
    let g = BooleanFunctionAnf::new(n, monomials).expect("indices within n");
    (count, g)
}

/// Uniform mixture of `2^{n-1}` vertices realizing the full-correlation box of an
/// affine `g`: party `i` outputs `r_i ⊕ L_i x_i` with `⊕ r_i` equal to the constant.
pub fn affine_box_mixture(g: &BooleanFunctionAnf) -> Result<Vec<(usize, Q)>> {
    if let Some(m) = g.monomials().iter().find(|m| m.degree() > 1) {
        return Err(Error::NonLocalMonomial(m.to_string()));
    }
    let n = g.n();
    check_parties(n)?;
    let constant = g.contains(Monomial::CONSTANT);
    let weight = rational::inv_pow2(n - 1);
    let mut out = Vec::new();
    for r in 0..1usize << n {
        if parity(r) != constant {
            continue;
        }
        let mut index = 0usize;
        for i in 0..n {
            let ri = r >> i & 1;
            let li = g.contains(Monomial::from_mask(1 << i)) as usize;
            index |= ri << (2 * i);
            index |= (ri ^ li) << (2 * i + 1);
        }
        out.push((index, weight.clone()));
    }
    out.sort_by_key(|(v, _)| *v);
    Ok(out)
}
