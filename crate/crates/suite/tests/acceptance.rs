//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the libtest
//! harness so that every line is printed; exits nonzero if any line fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rmtest::adversary::{erasure_hit_rate, play_games, summarize, AdversarySpec, StrategyKind};
use rmtest::agreement::{
    agreement_pipeline, beta, build_consistency_graph, check_chebyshev_with,
    check_sampling_bounds_with, extrapolate, make_transitive, plant_agreement, random_instance,
};
use rmtest::bounds::{
    k_adv_size, query_lower_bound, rank_witness, sk_ratio, sk_ratio_check, sk_ratio_sweep,
};
use rmtest::exact::{rat_f64, Rational};
use rmtest::functab::{hamming_distance, plant, FunctionTable};
use rmtest::gf::{Field, FieldRef};
use rmtest::par::{count_trials, trial_rng};
use rmtest::rm::{rm_membership, s_k, CodeFamily, LiftedCode, ReedMuller};
use rmtest::space::{normalized_functionals, Space};
use rmtest::stats::RateEstimate;
use rmtest::testers::{soundness_cell, soundness_floor, Tester};

const SIGMA: f64 = 3.0;
const COMPLETENESS_TRIALS: u64 = 10_000;
const COMPLETENESS_BUDGET: Duration = Duration::from_secs(120);
const LEMMA_INSTANCES: usize = 1_000;
const LEMMA_BUDGET: Duration = Duration::from_secs(60);
const SOUNDNESS_TRIALS: u64 = 100_000;
const SOUNDNESS_QUERY_CAP: u64 = 512;
const SOUNDNESS_BUDGET: Duration = Duration::from_secs(600);
const BLR_GAMES: u64 = 10_000;
const BLR_ACCEPT: f64 = 0.99;
const SEMI_REJECT: f64 = 2.0 / 3.0;
const BLR_BUDGET: Duration = Duration::from_secs(300);
const HIT_GAMES: u64 = 10_000;
const HIT_QUERIES: usize = 16;
const PIPELINE_INSTANCES: usize = 40;
const LIFT_TRIALS: u64 = 10_000;

struct Line {
    ok: bool,
    detail: String,
}

fn line(ok: bool, detail: impl Into<String>) -> Line {
    Line {
        ok,
        detail: detail.into(),
    }
}

fn field(q: u32) -> FieldRef {
    Field::new(q).unwrap()
}

fn rm(q: u32, d: usize) -> Arc<dyn CodeFamily> {
    Arc::new(ReedMuller::new(field(q), d))
}

/// A random polynomial of total degree at most `d`, evaluated point by point.
fn random_poly_table(f: &FieldRef, n: usize, d: usize, rng: &mut impl Rng) -> FunctionTable {
    let q = f.size();
    let mut terms: Vec<(Vec<u8>, u8)> = Vec::new();
    let mut e = vec![0u8; n];
    loop {
        let deg: usize = e.iter().map(|&x| x as usize).sum();
        if deg <= d {
            terms.push((e.clone(), rng.gen_range(0..q) as u8));
        }
        let mut j = 0;
        while j < n {
            e[j] += 1;
            if (e[j] as usize) < q {
                break;
            }
            e[j] = 0;
            j += 1;
        }
        if j == n {
            break;
        }
    }
    let space = Space::new(f.clone(), n).unwrap();
    FunctionTable::from_fn(space, |x| {
        terms.iter().fold(0u8, |acc, (e, c)| {
            let m = x
                .iter()
                .zip(e)
                .fold(*c, |m, (&xi, &ei)| f.mul(m, f.pow(xi, ei as u64)));
            f.add(acc, m)
        })
    })
    .unwrap()
}

/// Relative distance of a Boolean function to the affine functions, by the
/// fast Walsh-Hadamard transform.
fn walsh_distance_to_affine(values: &[u8]) -> Rational {
    let mut w: Vec<i64> = values
        .iter()
        .map(|&v| if v == 0 { 1 } else { -1 })
        .collect();
    let mut h = 1;
    while h < w.len() {
        for i in (0..w.len()).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (w[j], w[j + h]);
                w[j] = a + b;
                w[j + h] = a - b;
            }
        }
        h *= 2;
    }
    let n = w.len() as i128;
    let peak = w.iter().map(|x| x.abs()).max().unwrap() as i128;
    Rational::new((n - peak) / 2, n)
}

fn c1_completeness() -> Line {
    // (q, n, d, k)
    let grid = [
        (2u32, 6usize, 1usize, 3usize),
        (2, 10, 1, 4),
        (2, 7, 2, 4),
        (3, 4, 1, 2),
        (3, 5, 2, 3),
    ];
    let mut rejects = 0u64;
    let mut runs = 0u64;
    let mut cells = 0;
    for (ci, &(q, n, d, k)) in grid.iter().enumerate() {
        let code = rm(q, d);
        let fq = field(q);
        let g = random_poly_table(&fq, n, d, &mut ChaCha8Rng::seed_from_u64(100 + ci as u64));
        assert!(code.contains(&g).unwrap());
        let semi = Tester::semi_sample(code.clone(), k, s_k(&fq, d, k).unwrap() as usize);
        let sample = Tester::sample(code.clone(), s_k(&fq, d, n).unwrap() as usize);
        for tester in [&semi, &sample] {
            let r = count_trials(COMPLETENESS_TRIALS, |t| {
                tester
                    .test_table(&g, &mut trial_rng(ci as u64, t))
                    .map(|v| v.rejected())
            })
            .unwrap();
            rejects += r;
            runs += COMPLETENESS_TRIALS;
            cells += 1;
            for s in StrategyKind::ERASERS {
                let spec = AdversarySpec::erasure(s, Rational::one()).unwrap();
                let records =
                    play_games(&g, tester, &spec, COMPLETENESS_TRIALS, ci as u64, false).unwrap();
                let sum = summarize(&records);
                rejects += sum.rejects + sum.forfeits;
                runs += COMPLETENESS_TRIALS;
                cells += 1;
            }
        }
    }
    line(
        rejects == 0,
        format!("{cells} cells, {runs} runs, {rejects} rejections"),
    )
}

fn c2_c3_lemmas() -> (Line, Line) {
    let cs = [
        Rational::new(1, 2),
        Rational::one(),
        Rational::from_integer(2),
    ];
    let (mut sampling_bad, mut cheb_bad, mut total) = (0usize, 0usize, 0usize);
    let mut min_slack: Option<Rational> = None;
    for q in [2u32, 3] {
        for n in 4..=8 {
            let space = Space::new(field(q), n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(((q as u64) << 8) | n as u64);
            for _ in 0..LEMMA_INSTANCES {
                let (coll, set) = random_instance(&space, &mut rng).unwrap();
                let counts = coll.all_counts();
                // Independent count of N(x) for one random point.
                let x = rng.gen_range(0..space.size());
                let direct = coll
                    .functionals()
                    .iter()
                    .filter(|&&a| space.dot(a, x) == 0)
                    .count();
                if direct != counts[x] as usize {
                    sampling_bad += 1;
                }
                match check_sampling_bounds_with(&coll, &counts, &set) {
                    Ok(r) => {
                        let s = r.slack_lower.min(r.slack_upper);
                        min_slack = Some(min_slack.map_or(s, |m: Rational| m.min(s)));
                    }
                    Err(_) => sampling_bad += 1,
                }
                for &c in &cs {
                    if check_chebyshev_with(&coll, &counts, c).is_err() {
                        cheb_bad += 1;
                    }
                }
                total += 1;
            }
        }
    }
    (
        line(
            sampling_bad == 0,
            format!(
                "{total} instances, {sampling_bad} violations, min slack {}",
                min_slack.unwrap_or_default()
            ),
        ),
        line(
            cheb_bad == 0,
            format!(
                "{} (instance, c) pairs, {cheb_bad} violations",
                total * cs.len()
            ),
        ),
    )
}

fn c4_soundness() -> Line {
    let mut detail = Vec::new();
    let mut ok = true;
    for (q, n, k) in [(2u32, 10usize, 5usize), (3, 6, 4)] {
        let code = rm(q, 1);
        let fq = field(q);
        let queries = s_k(&fq, 1, k).unwrap().min(SOUNDNESS_QUERY_CAP) as usize;
        let tester = Tester::semi_sample(code.clone(), k, queries);
        for w in [1usize, 2, 4] {
            let inst = plant(
                code.as_ref(),
                n,
                w,
                &mut ChaCha8Rng::seed_from_u64(w as u64 + 40 * q as u64),
            )
            .unwrap();
            let cell = soundness_cell(
                &inst.f,
                inst.certified_distance,
                &tester,
                SOUNDNESS_TRIALS,
                4,
                SIGMA,
            )
            .unwrap();
            ok &= cell.pass;
            detail.push(format!(
                "q={q} eps={} rate={:.4} lo={:.4} floor={:.4}",
                cell.eps,
                cell.estimate.rate,
                cell.estimate.lo,
                rat_f64(cell.bound)
            ));
        }
    }
    line(ok, detail.join("; "))
}

fn bent8() -> FunctionTable {
    let space = Space::new(field(2), 8).unwrap();
    FunctionTable::from_fn(space, |x| {
        (x[0] & x[1]) ^ (x[2] & x[3]) ^ (x[4] & x[5]) ^ (x[6] & x[7])
    })
    .unwrap()
}

fn c5_blr_defeat() -> (Line, Line) {
    let f = bent8();
    let dist = walsh_distance_to_affine(&f.values().unwrap());
    let code = rm(2, 1);
    let lib_dist = rmtest::rm::exact_distance(&f, code.as_ref()).unwrap();
    let blr = Tester::blr(code.clone()).repeated_for(dist).unwrap();
    let spec = AdversarySpec::erasure(StrategyKind::SumEraser, Rational::one()).unwrap();
    let sum = summarize(&play_games(&f, &blr, &spec, BLR_GAMES, 5, false).unwrap());
    let accept = RateEstimate::new(sum.accepts, BLR_GAMES, SIGMA);
    let a = line(
        dist == Rational::new(15, 32) && lib_dist == dist && accept.clears(BLR_ACCEPT),
        format!(
            "walsh distance {dist} (library {lib_dist}), BLR x{} accepts {}/{} (lo {:.4}), erasure seen {}",
            blr.reps, sum.accepts, BLR_GAMES, accept.lo, sum.erasure_seen
        ),
    );
    let fq = field(2);
    let b = match k_adv_size(&fq, 1, Rational::one(), dist, Rational::new(1, 5)) {
        Ok(kadv) if kadv.k <= f.n() => {
            let tester = Tester::semi_sample(code, kadv.k, kadv.s_k as usize).with_reps(kadv.reps);
            let sum = summarize(&play_games(&f, &tester, &spec, BLR_GAMES, 6, false).unwrap());
            let rej = RateEstimate::new(sum.rejects, BLR_GAMES, SIGMA);
            line(rej.clears(SEMI_REJECT), format!("k_adv={} rejects {}/{} (lo {:.4})", kadv.k, sum.rejects, BLR_GAMES, rej.lo))
        }
        Ok(kadv) => line(
            false,
            format!(
                "k_adv={} (s_k={}, reps={}, Q_total={}) exceeds n={}: no semi-sample tester at k_adv exists on F_2^8",
                kadv.k,
                kadv.s_k,
                kadv.reps,
                kadv.q_total,
                f.n()
            ),
        ),
        Err(e) => line(false, format!("k_adv unavailable: {e}")),
    };
    (a, b)
}

fn c6_hit_bound() -> (Line, Vec<(u128, usize)>) {
    let (n, k) = (14usize, 12usize);
    let code = rm(2, 1);
    let g = random_poly_table(&field(2), n, 1, &mut ChaCha8Rng::seed_from_u64(6));
    let tester = Tester::semi_sample(code, k, HIT_QUERIES);
    let mut ok = true;
    let mut detail = Vec::new();
    let mut configs = Vec::new();
    for t in [1i128, 4] {
        configs.push((t as u128, tester.total_queries()));
        for s in StrategyKind::ERASERS {
            let spec = AdversarySpec::erasure(s, Rational::from_integer(t)).unwrap();
            let r = erasure_hit_rate(&g, &tester, &spec, HIT_GAMES, 60 + t as u64, SIGMA).unwrap();
            ok &= r.within && !r.vacuous;
            detail.push(format!(
                "t={t} {}: {}/{} <= {:.4}",
                s.name(),
                r.estimate.hits,
                HIT_GAMES,
                r.bound
            ));
        }
    }
    (line(ok, detail.join("; ")), configs)
}

fn c7_ranks(configs: &[(usize, usize, u128, usize)]) -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cases = 0;
    let mut bad = Vec::new();
    for q in [2u32, 3] {
        let fq = field(q);
        for d in 1..=2 {
            for r in 1..=4 {
                for n in r.max(1)..=8 {
                    cases += 1;
                    if let Err(e) = rank_witness(&fq, n, d, r, &mut rng) {
                        bad.push(format!("rank q={q} n={n} d={d} r={r}: {e}"));
                    }
                }
            }
            for n in 1..=8 {
                for t in [1u128, 2, 3, 4, 8, 9, 27, 81, 100, 256]
                    .into_iter()
                    .filter(|&t| t <= (q as u128).pow(n as u32))
                {
                    let rep = query_lower_bound(q as usize, n, d, t).unwrap();
                    cases += 1;
                    if d <= q as usize && !rep.floor_holds() {
                        bad.push(format!("floor q={q} n={n} d={d} t={t}"));
                    }
                }
            }
        }
    }
    for &(q, n, t, total) in configs {
        let lb = query_lower_bound(q, n, 1, t).unwrap().lower_bound;
        cases += 1;
        if (total as u128) < lb {
            bad.push(format!(
                "tester with {total} queries below bound {lb} at q={q} n={n} t={t}"
            ));
        }
    }
    line(
        bad.is_empty(),
        format!("{cases} exact checks, failures: {bad:?}"),
    )
}

fn c8_pipeline() -> Line {
    let mut runs = 0;
    let mut bad = Vec::new();
    for (q, d, ns) in [
        (2u32, 1usize, vec![4usize, 5, 6]),
        (3, 1, vec![4, 5]),
        (3, 2, vec![4]),
    ] {
        let code = rm(q, d);
        for n in ns {
            let space = Space::new(field(q), n).unwrap();
            let total = normalized_functionals(&space).len();
            let cover = space.size() / space.q() + 1;
            // Largest weight with eps < delta0 / 6.
            let max_w = (0..space.size())
                .take_while(|&w| {
                    code.delta0()
                        .exceeds_scaled(6, Rational::new(w as i128, space.size() as i128))
                })
                .last()
                .unwrap();
            let mut rng =
                ChaCha8Rng::seed_from_u64(800 + q as u64 * 10 + n as u64 + d as u64 * 100);
            for i in 0..PIPELINE_INSTANCES {
                let w = i % (max_w + 1);
                let planted_n = rng.gen_range(cover..=total);
                let junk = rng.gen_range(0..=(total - planted_n));
                let alt = rng.gen_range(0..=(total - planted_n - junk));
                let p =
                    plant_agreement(code.as_ref(), n, (planted_n, alt, junk), w, &mut rng).unwrap();
                let g = build_consistency_graph(&p.collection).unwrap();
                let cc = make_transitive(&g).unwrap();
                let kept = cc.retained(g.vertices());
                let clique_edges: usize =
                    cc.cliques.iter().map(|c| c.len() * (c.len() - 1) / 2).sum();
                let mut seen = vec![false; g.vertices()];
                let disjoint = cc
                    .cliques
                    .iter()
                    .flatten()
                    .all(|&v| !std::mem::replace(&mut seen[v], true));
                let complete = cc.cliques.iter().all(|c| {
                    c.iter()
                        .all(|&a| c.iter().all(|&b| a == b || g.has_edge(a, b)))
                });
                let structural = beta(&kept).is_zero()
                    && disjoint
                    && complete
                    && clique_edges + cc.removed.len() == g.edge_count()
                    && kept.edge_count() == clique_edges;
                let big_f = extrapolate(&p.collection, &p.planted).unwrap();
                let dist = hamming_distance(&big_f, &p.f).unwrap();
                runs += 1;
                if !structural || dist > p.eps * 3 {
                    bad.push(format!(
                        "q={q} d={d} n={n} #{i}: structural={structural} dist={dist} eps={}",
                        p.eps
                    ));
                }
            }
            let rep = agreement_pipeline(code.as_ref(), n, max_w, &mut rng).unwrap();
            runs += 1;
            if !rep.pass {
                bad.push(format!(
                    "pipeline q={q} d={d} n={n}: dist={} eps={}",
                    rep.distance, rep.eps
                ));
            }
        }
    }
    line(
        bad.is_empty(),
        format!("{runs} planted instances, failures: {bad:?}"),
    )
}

fn c9_ratio() -> Line {
    let mut bad = Vec::new();
    let mut cases = 0;
    for q in [2u32, 3] {
        let fq = field(q);
        for d in 1..=2usize {
            for c in 1..=2u32 {
                let k = 8 * d + 3 * c as usize + 24;
                let rep = sk_ratio_check(&fq, d, c, k).unwrap();
                // Independent check: s_k * q^c <= q^k.
                let (s, ratio) = sk_ratio(&fq, d, k).unwrap();
                let oracle =
                    BigInt::from(s) * BigInt::from(q).pow(c) <= BigInt::from(q).pow(k as u32);
                let same =
                    ratio == BigRational::new(BigInt::from(s), BigInt::from(q).pow(k as u32));
                cases += 1;
                if !(rep.below_bound && oracle && same) {
                    bad.push(format!("q={q} d={d} c={c} k={k}"));
                }
                match sk_ratio_sweep(&fq, d, 2 * d, k) {
                    Ok(v) if v.windows(2).all(|w| w[1] < w[0]) => {}
                    _ => bad.push(format!("monotone q={q} d={d} c={c}")),
                }
            }
        }
    }
    line(
        bad.is_empty(),
        format!("{cases} (q,d,c) cells, failures: {bad:?}"),
    )
}

fn c10_lifted() -> Line {
    let base = ReedMuller::new(field(2), 1);
    let lifted = Arc::new(LiftedCode::lift_of(&base, 2, 4).unwrap());
    let space = Space::new(field(2), 3).unwrap();
    let mut mismatches = 0;
    for mask in 0u32..256 {
        let f = FunctionTable::from_values(
            space.clone(),
            (0..8).map(|i| ((mask >> i) & 1) as u8).collect(),
        )
        .unwrap();
        if lifted.contains(&f).unwrap() != rm_membership(&f, 1).unwrap() {
            mismatches += 1;
        }
    }
    let code: Arc<dyn CodeFamily> = lifted;
    let n = 4;
    let k = 3;
    let queries = rmtest::rm::q_k_parameter(code.as_ref(), k).unwrap() as usize;
    let tester = Tester::semi_sample(code.clone(), k, queries);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let g = code.random_codeword(n, &mut rng).unwrap();
    let complete = soundness_cell(&g, Rational::zero(), &tester, LIFT_TRIALS, 10, SIGMA).unwrap();
    let mut ok = mismatches == 0 && complete.pass;
    let mut detail = vec![format!(
        "{mismatches}/256 membership mismatches, codeword rejects {}",
        complete.estimate.hits
    )];
    for w in 1..=3 {
        let inst = plant(code.as_ref(), n, w, &mut rng).unwrap();
        let cell = soundness_cell(
            &inst.f,
            inst.certified_distance,
            &tester,
            LIFT_TRIALS,
            11,
            SIGMA,
        )
        .unwrap();
        ok &= cell.pass;
        detail.push(format!(
            "eps={} rate={:.4} lo={:.4} floor={:.4}",
            cell.eps,
            cell.estimate.rate,
            cell.estimate.lo,
            rat_f64(soundness_floor(queries, cell.eps))
        ));
    }
    line(ok, detail.join("; "))
}

fn report(id: &str, name: &str, l: &Line, elapsed: Duration, budget: Option<Duration>) -> bool {
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let ok = l.ok && in_time;
    let limit = budget
        .map(|b| format!(" / {}s", b.as_secs()))
        .unwrap_or_default();
    println!(
        "{} {id} {name}: {} [{:.1}s{limit}]",
        if ok { "PASS" } else { "FAIL" },
        l.detail,
        elapsed.as_secs_f64()
    );
    ok
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn main() {
    let mut all = true;
    let (l, e) = timed(c1_completeness);
    all &= report("1", "completeness", &l, e, Some(COMPLETENESS_BUDGET));
    let ((l2, l3), e) = timed(c2_c3_lemmas);
    all &= report("2", "sampling bounds", &l2, e, Some(LEMMA_BUDGET));
    all &= report("3", "chebyshev tail", &l3, e, None);
    let (l, e) = timed(c4_soundness);
    all &= report(
        "4",
        "small-distance soundness",
        &l,
        e,
        Some(SOUNDNESS_BUDGET),
    );
    let ((a, b), e) = timed(c5_blr_defeat);
    all &= report("5a", "BLR defeated by sum_eraser", &a, e, Some(BLR_BUDGET));
    all &= report(
        "5b",
        "semi-sample at k_adv rejects",
        &b,
        e,
        Some(BLR_BUDGET),
    );
    let ((l, hit_configs), e) = timed(c6_hit_bound);
    all &= report("6", "erasure-hit union bound", &l, e, None);
    let mut configs: Vec<(usize, usize, u128, usize)> = hit_configs
        .into_iter()
        .map(|(t, total)| (2, 14, t, total))
        .collect();
    let blr_total = Tester::blr(rm(2, 1))
        .repeated_for(Rational::new(15, 32))
        .unwrap()
        .total_queries();
    configs.push((2, 8, 1, blr_total));
    let (l, e) = timed(|| c7_ranks(&configs));
    all &= report("7", "rank and query lower bounds", &l, e, None);
    let (l, e) = timed(c8_pipeline);
    all &= report("8", "agreement pipeline", &l, e, None);
    let (l, e) = timed(c9_ratio);
    all &= report("9", "s_k / q^k ratio", &l, e, None);
    let (l, e) = timed(c10_lifted);
    all &= report("10", "lifted-code cross-validation", &l, e, None);
    if !all {
        std::process::exit(1);
    }
}
