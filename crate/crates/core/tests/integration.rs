use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rmtest::adversary::{run_game, Accounting, AdversarySpec, Mode, Outcome, StrategyKind};
use rmtest::agreement::{check_sampling_bounds, HyperplaneCollection};
use rmtest::exact::Rational;
use rmtest::functab::{hamming_distance, plant, FunctionTable};
use rmtest::gf::Field;
use rmtest::par::trial_rng;
use rmtest::rm::{exact_distance, CodeFamily, LiftedCode, ReedMuller};
use rmtest::space::Space;
use rmtest::testers::Tester;

fn rm(q: u32, d: usize) -> Arc<dyn CodeFamily> {
    Arc::new(ReedMuller::new(Field::new(q).unwrap(), d))
}

/// Distance to the nearest codeword by scanning every codeword.
fn brute_distance(f: &FunctionTable, code: &dyn CodeFamily) -> Rational {
    code.codewords(f.n(), 1 << 20)
        .unwrap()
        .iter()
        .map(|w| hamming_distance(f, w).unwrap())
        .min()
        .unwrap()
}

#[test]
fn table_file_round_trip_feeds_tester() {
    let dir = tempfile::tempdir().unwrap();
    let code = rm(3, 2);
    let g = code
        .random_codeword(3, &mut ChaCha8Rng::seed_from_u64(1))
        .unwrap();
    let path = dir.path().join("g.txt");
    g.write(&path).unwrap();
    let back = FunctionTable::read(&path).unwrap();
    assert_eq!(back, g);
    let tester = Tester::semi_sample(code, 3, 200);
    for t in 0..50 {
        assert!(tester
            .test_table(&back, &mut trial_rng(2, t))
            .unwrap()
            .accepted());
    }
}

#[test]
fn planted_distance_is_certified() {
    for (q, d, n, w) in [(2u32, 1usize, 4usize, 3usize), (3, 1, 3, 2), (2, 2, 4, 1)] {
        let code = rm(q, d);
        let mut rng = ChaCha8Rng::seed_from_u64(q as u64 * 31 + w as u64);
        let p = plant(code.as_ref(), n, w, &mut rng).unwrap();
        let oracle = brute_distance(&p.f, code.as_ref());
        assert_eq!(oracle, p.certified_distance);
        assert_eq!(exact_distance(&p.f, code.as_ref()).unwrap(), oracle);
    }
}

#[test]
fn lifted_base_survives_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let lifted = LiftedCode::lift_of(rm(2, 1).as_ref(), 2, 4).unwrap();
    lifted.save(dir.path()).unwrap();
    let back = LiftedCode::load(dir.path(), 4).unwrap();
    let space = Space::new(Field::new(2).unwrap(), 3).unwrap();
    for mask in 0u32..256 {
        let f = FunctionTable::from_values(
            space.clone(),
            (0..8).map(|i| ((mask >> i) & 1) as u8).collect(),
        )
        .unwrap();
        assert_eq!(lifted.contains(&f).unwrap(), back.contains(&f).unwrap());
    }
}

#[test]
fn collection_survives_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let space = Space::new(Field::new(3).unwrap(), 4).unwrap();
    let coll = HyperplaneCollection::random(space, 17, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    coll.save(dir.path()).unwrap();
    let back = HyperplaneCollection::load(dir.path()).unwrap();
    assert_eq!(back.functionals(), coll.functionals());
    let set: Vec<usize> = (0..40).collect();
    let a = check_sampling_bounds(&coll, &set).unwrap();
    let b = check_sampling_bounds(&back, &set).unwrap();
    assert_eq!((a.mu, a.nu), (b.mu, b.nu));
}

#[test]
fn games_replay_from_seed_and_trial() {
    let code = rm(2, 1);
    let p = plant(code.as_ref(), 6, 5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let tester = Tester::semi_sample(code, 3, 40).with_reps(3);
    for s in StrategyKind::ERASERS {
        let spec = AdversarySpec::erasure(s, Rational::new(3, 2)).unwrap();
        let a = run_game(&p.f, &tester, &spec, 5, 17, true).unwrap();
        let b = run_game(&p.f, &tester, &spec, 5, 17, true).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, serde_json::to_string(&b).unwrap());
    }
}

fn strategy() -> impl Strategy<Value = StrategyKind> {
    prop::sample::select(vec![
        StrategyKind::NoneAdv,
        StrategyKind::RandomEraser,
        StrategyKind::SumEraser,
        StrategyKind::SpanInferenceEraser,
        StrategyKind::RandomCorruptor,
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Codewords are never rejected in erasure mode, whatever the strategy.
    #[test]
    fn erasure_games_keep_completeness(s in strategy(), num in 0i128..8, den in 1i128..4, seed in 0u64..1000) {
        prop_assume!(s != StrategyKind::RandomCorruptor);
        let code = rm(3, 1);
        let g = code.random_codeword(3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let tester = Tester::semi_sample(code, 2, 30).with_reps(2);
        let spec = AdversarySpec::erasure(s, Rational::new(num, den)).unwrap();
        let r = run_game(&g, &tester, &spec, seed, 0, true).unwrap();
        prop_assert!(r.accepted());
    }

    /// Manipulations never exceed the cumulative cap and only touch points
    /// that were unqueried at the time.
    #[test]
    fn moves_respect_accounting(s in strategy(), num in 0i128..6, den in 1i128..4, budget in any::<bool>(), seed in 0u64..1000) {
        let mode = if s == StrategyKind::RandomCorruptor { Mode::Corruption } else { Mode::Erasure };
        let t = Rational::new(num, den);
        let accounting = if budget { Accounting::Budget(t) } else { Accounting::FixedRate(t) };
        let spec = AdversarySpec::new(s, mode, accounting).unwrap();
        let code = rm(2, 1);
        let g = code.random_codeword(5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let tester = Tester::semi_sample(code, 3, 25).with_reps(2);
        let r = run_game(&g, &tester, &spec, seed, 1, true).unwrap();
        prop_assert!(matches!(r.outcome, Outcome::Verdict(_)));
        let answers = r.trace.len() as u64;
        for (j, m) in r.timeline.iter().enumerate() {
            let spent = j as u64 + 1;
            prop_assert!(spent <= accounting.cumulative_cap(m.after));
            prop_assert!(r.trace[..m.after as usize].iter().all(|&(x, _)| x != m.point));
        }
        prop_assert!(r.timeline.len() as u64 <= accounting.cumulative_cap(answers.max(1)));
    }
}
