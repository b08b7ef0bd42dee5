use boxdistill::anf::{BooleanFunctionAnf, Monomial};
use boxdistill::comm::{make_isolation_plan, partial_comm_distill};
use boxdistill::rational::{self, Q};
use boxdistill::ConditionalBox;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn oracle_t(n: usize, e: &Q) -> Q {
    let c = rational::pow2(n - 1);
    e * (&c + Q::one() - e) / c
}

/// `e·FC(f) + (1-e)·FC(g)` straight from the truth tables.
fn oracle_mixture(f: &BooleanFunctionAnf, g: &BooleanFunctionAnf, e: &Q) -> ConditionalBox {
    let n = f.n();
    let w = rational::inv_pow2(n - 1);
    let (tf, tg) = (f.truth_table(), g.truth_table());
    ConditionalBox::from_fn(n, |x, a| {
        let odd = a.count_ones() % 2 == 1;
        let mut p = Q::zero();
        if odd == tf[x] {
            p += e * &w;
        }
        if odd == tg[x] {
            p += (Q::one() - e) * &w;
        }
        p
    })
    .unwrap()
}

/// Random connected function whose best monomial contains no other monomial,
/// with noise equal to its local part plus linear terms outside that monomial.
fn instance(rng: &mut ChaCha8Rng) -> Option<(BooleanFunctionAnf, BooleanFunctionAnf)> {
    let n = rng.gen_range(3..=5);
    let masks: Vec<u32> = (0..1u32 << n).filter(|_| rng.gen_bool(0.25)).collect();
    let f = BooleanFunctionAnf::new(n, masks.iter().map(|&m| Monomial::from_mask(m))).ok()?;
    let s = f.structure();
    if s.n_j() != 1 {
        return None;
    }
    let plan = make_isolation_plan(&s).ok()?;
    let star = plan.isolated_monomial.mask();
    if s.j.iter().any(|m| m.mask() != star && m.mask() & !star == 0) {
        return None;
    }
    let (_, local) = f.strip_local_part();
    let extra: Vec<Monomial> = (0..n)
        .filter(|i| star >> i & 1 == 0 && rng.gen_bool(0.5))
        .map(|i| Monomial::from_mask(1 << i))
        .collect();
    let noise = local.xor(&BooleanFunctionAnf::new(n, extra).ok()?).ok()?;
    Some((f, noise))
}

#[test]
fn pipeline_is_exact_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut done = 0;
    let mut tries = 0;
    while done < 10 {
        tries += 1;
        assert!(tries < 10_000, "too few admissible instances");
        let Some((f, noise)) = instance(&mut rng) else { continue };
        let d: i64 = rng.gen_range(2..=50);
        let e = rational::ratio(rng.gen_range(1..d), d);
        let rounds = rng.gen_range(0..=3);
        let out = partial_comm_distill(&f, &noise, &e, rounds).unwrap();

        let k = out.plan.isolated_monomial.degree();
        let mut em = e.clone();
        for _ in 0..rounds {
            em = oracle_t(k, &em);
        }
        assert_eq!(out.epsilon_final, em, "{f}");
        let star = BooleanFunctionAnf::new(f.n(), [out.plan.isolated_monomial]).unwrap();
        let residual = f.xor(&star).unwrap();
        assert_eq!(out.residual, residual);
        assert_eq!(out.final_box, oracle_mixture(&f, &residual, &em), "{f}");
        assert!(out.final_box.is_nonsignaling());
        done += 1;
    }
}
