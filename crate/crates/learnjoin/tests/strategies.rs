mod common;

use common::{keyed, multiset, run, store};
use learnjoin::baselines::{run_bnl, run_nl, run_ripple, run_ucb_scan, OutOfMemory};
use learnjoin::collab::{run_cl, run_icl};
use learnjoin::engine::{CostWeights, Join, JoinPredicate, RunOutput, Side};
use learnjoin::osl::{exploit, n_failure, run_osl, ExploitOutcome, Learner, OslParams, RewardEntry};
use learnjoin::rosl::{rosl_exploit_draw, run_rosl, RoslParams};
use learnjoin::storage::{RelationStore, ScanCursor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EQ: JoinPredicate = JoinPredicate::KeyEquality;

fn join<'a>(r: &'a RelationStore, s: &'a RelationStore, k: usize) -> Join<'a> {
    Join::new(r, s, &EQ, k, CostWeights::for_partition_size(r.partition_size))
}

fn osl(n: usize, m: Option<usize>) -> OslParams {
    OslParams { n, m, ..OslParams::default() }
}

#[test]
fn n_failure_stops_after_first_miss() {
    let r = store("R", keyed(&[7]), 1);
    let s = store("S", keyed(&[7, 1, 7, 1]), 1);
    let mut j = join(&r, &s, usize::MAX);
    let e = n_failure(&mut j, Side::R, 0, &mut ScanCursor::wrapping(), 1);
    assert_eq!((e.trials, e.successes), (2, 1));
    assert!(e.joined.contains(0) && e.joined.contains(1) && !e.joined.contains(2));
}

#[test]
fn n_failure_without_matches_spends_exactly_n() {
    let r = store("R", keyed(&[7]), 1);
    let s = store("S", keyed(&[1, 2, 3, 4, 5]), 1);
    let mut j = join(&r, &s, usize::MAX);
    let e = n_failure(&mut j, Side::R, 0, &mut ScanCursor::wrapping(), 3);
    assert_eq!((e.trials, e.successes), (3, 0));
    assert_eq!(j.ledger.pairs(), 3);
}

#[test]
fn n_failure_stops_at_coverage() {
    let r = store("R", keyed(&[7]), 1);
    let s = store("S", keyed(&[7, 7, 7, 7]), 1);
    let mut j = join(&r, &s, usize::MAX);
    let mut cursor = ScanCursor::wrapping();
    let e = n_failure(&mut j, Side::R, 0, &mut cursor, 1);
    assert_eq!((e.trials, e.successes), (4, 4));
    assert!(e.joined.covers(4));
}

#[test]
fn covered_entry_exploits_for_free() {
    let r = store("R", keyed(&[7]), 1);
    let s = store("S", keyed(&[7, 1]), 1);
    let mut j = join(&r, &s, usize::MAX);
    let mut table = vec![RewardEntry::new(0)];
    table[0].joined.insert(0);
    table[0].joined.insert(1);
    assert_eq!(exploit(&mut j, Side::R, &mut table, 0, true), ExploitOutcome::Completed);
    assert!(table[0].exploited);
    assert_eq!(j.clock.probes, 0);
}

#[test]
fn exploit_without_swap_meets_every_remaining_partition() {
    let r = store("R", keyed(&[7]), 1);
    let s = store("S", keyed(&[7, 1, 7, 2, 9]), 1);
    let mut j = join(&r, &s, usize::MAX);
    let mut table = vec![RewardEntry::new(0)];
    table[0].joined.insert(3);
    assert_eq!(exploit(&mut j, Side::R, &mut table, 0, false), ExploitOutcome::Completed);
    assert_eq!(table[0].trials, 4);
    assert_eq!(table[0].successes, 2);
}

#[test]
fn barren_exploitation_swaps_to_richer_entry() {
    let r = store("R", keyed(&[1, 7]), 1);
    let s = store("S", keyed(&[7, 7, 7, 7]), 1);
    let mut j = join(&r, &s, usize::MAX);
    let mut rich = RewardEntry::new(1);
    rich.successes = 10;
    rich.trials = 2;
    let mut table = vec![RewardEntry::new(0), rich];
    // (0+1)/(1+2) < (10+1)/(2+2) right after the first empty probe
    assert_eq!(exploit(&mut j, Side::R, &mut table, 0, true), ExploitOutcome::Swapped(1));
    assert_eq!(table[0].trials, 1);
    assert!(!table[0].exploited);
}

#[test]
fn zero_k_does_nothing() {
    let r = store("R", keyed(&[1, 2]), 1);
    let s = store("S", keyed(&[1, 2]), 1);
    for m in common::METHODS {
        let out = run(m, &r, &s, &EQ, 0, 1);
        assert!(out.stream.is_empty(), "{m}");
        assert_eq!(out.clock.probes, 0, "{m}");
    }
}

#[test]
fn osl_first_exploitation_is_the_only_rewarding_partition() {
    let r = store("R", keyed(&[1, 5, 2, 3]), 1);
    let s = store("S", keyed(&[5, 5, 5, 5]), 1);
    let mut j = join(&r, &s, 4);
    let trace = run_osl(&mut j, &osl(1, Some(2)));
    assert_eq!(trace[0].exploited, Some(1));
    assert_eq!(j.sink.len(), 4);
}

#[test]
fn osl_explores_one_partition_per_later_round() {
    let g = learnjoin::datagen::generate(&learnjoin::datagen::GenConfig::new(200, 200, 200, 1.0, 3)).unwrap();
    let r = store("R", g.r, 4);
    let s = store("S", g.s, 4);
    let mut j = join(&r, &s, usize::MAX);
    let trace = run_osl(&mut j, &OslParams { early_commit: false, ..OslParams::default() });
    assert_eq!(trace[0].explored.len(), 8);
    assert!(trace[1..].iter().all(|t| t.explored.len() <= 1));
}

#[test]
fn nl_probes_every_partition_pair() {
    let r = store("R", keyed(&[1, 2, 3, 4, 5]), 2);
    let s = store("S", keyed(&[1, 9, 9, 3, 9, 9, 9]), 2);
    let mut j = join(&r, &s, usize::MAX);
    run_nl(&mut j);
    assert_eq!(j.ledger.pairs(), 3 * 4);
    assert_eq!(j.clock.probes, 5 * 7);
}

#[test]
fn nl_stops_inside_first_pair() {
    let r = store("R", keyed(&[4, 1, 2]), 3);
    let s = store("S", keyed(&[4, 8, 9]), 3);
    let mut j = join(&r, &s, 1);
    run_nl(&mut j);
    assert_eq!(j.sink.len(), 1);
    assert_eq!(j.clock.probes, 1);
}

#[test]
fn bnl_with_whole_r_block_scans_s_once() {
    let r = store("R", keyed(&[1, 2, 3, 4]), 1);
    let s = store("S", keyed(&[1, 2, 3]), 1);
    let mut j = join(&r, &s, usize::MAX);
    run_bnl(&mut j, 4);
    assert_eq!(j.clock.seq_pages, 4 + 3);
    let mut j = join(&r, &s, usize::MAX);
    run_nl(&mut j);
    assert_eq!(j.clock.seq_pages, 4 + 4 * 3);
}

#[test]
fn bnl_with_unit_block_is_nl() {
    let r = store("R", keyed(&[1, 2, 2, 3, 1]), 2);
    let s = store("S", keyed(&[2, 1, 3, 3]), 1);
    let mut a = join(&r, &s, usize::MAX);
    run_bnl(&mut a, 1);
    let mut b = join(&r, &s, usize::MAX);
    run_nl(&mut b);
    let (a, b): (RunOutput, RunOutput) = (a.into(), b.into());
    assert_eq!(a.stream, b.stream);
    assert_eq!(a.clock.total(), b.clock.total());
}

#[test]
fn ripple_runs_out_of_memory_on_deep_matches() {
    let mut rk: Vec<u64> = (100..110).collect();
    let mut sk: Vec<u64> = (200..210).collect();
    rk.push(1);
    sk.push(1);
    let r = store("R", keyed(&rk), 1);
    let s = store("S", keyed(&sk), 1);
    let mut j = join(&r, &s, 1);
    assert_eq!(run_ripple(&mut j, 2), Err(OutOfMemory { retained: 4, mem_cap: 2 }));
    assert!(j.sink.is_empty());
}

#[test]
fn ripple_probes_grow_quadratically() {
    let r = store("R", keyed(&[1, 2, 3, 4, 5, 6]), 1);
    let s = store("S", keyed(&[7, 8, 9, 10, 11, 12]), 1);
    for steps in 1..=5 {
        let mut j = join(&r, &s, usize::MAX);
        assert!(run_ripple(&mut j, 2 * steps).is_err());
        assert_eq!(j.ledger.pairs(), steps * steps);
    }
    let mut j = join(&r, &s, usize::MAX);
    run_ripple(&mut j, 12).unwrap();
    assert_eq!(j.ledger.pairs(), 36);
}

#[test]
fn ucb_on_single_r_partition_scans_s_in_order() {
    let r = store("R", keyed(&[1, 2]), 2);
    let s = store("S", keyed(&[2, 1, 9, 1, 2, 2]), 1);
    let mut a = join(&r, &s, usize::MAX);
    run_ucb_scan(&mut a);
    let mut b = join(&r, &s, usize::MAX);
    run_nl(&mut b);
    let ids = |o: &RunOutput| o.stream.rows.iter().map(|r| r.identity()).collect::<Vec<_>>();
    assert_eq!(ids(&a.into()), ids(&b.into()));
}

#[test]
fn ucb_first_pass_probes_each_r_partition_once() {
    let r = store("R", keyed(&[1, 2, 3, 4, 5]), 1);
    let s = store("S", keyed(&[7, 8, 9]), 1);
    let mut j = join(&r, &s, usize::MAX);
    let state = run_ucb_scan(&mut j);
    assert_eq!(state.arms.len(), 5);
    for (i, arm) in state.arms.iter().enumerate() {
        assert_eq!(arm.start, i % 3);
        assert_eq!(arm.trials, 3);
    }
    assert_eq!(state.t, 15);
}

#[test]
fn cl_alternates_explorer() {
    let g = learnjoin::datagen::generate(&learnjoin::datagen::GenConfig::new(300, 300, 300, 1.0, 5)).unwrap();
    let r = store("R", g.r, 4);
    let s = store("S", g.s, 4);
    let mut j = join(&r, &s, usize::MAX);
    let trace = run_cl(&mut j, &osl(2, None));
    assert!(trace.len() > 4);
    for t in &trace {
        let want = if t.round % 2 == 1 { Side::R } else { Side::S };
        assert_eq!(t.explorer, want, "round {}", t.round);
    }
}

#[test]
fn mirrored_learners_see_mirrored_rewards() {
    let keys = [3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7, 9, 3];
    let r = store("R", keyed(&keys), 2);
    let s = store("S", keyed(&keys), 2);
    let explore = |side| {
        let mut j = join(&r, &s, usize::MAX);
        let mut learner = Learner::new(side);
        for _ in 0..6 {
            learner.explore_next(&mut j, 2);
        }
        let mut rewards: Vec<u64> = learner.table.iter().map(|e| e.successes).collect();
        rewards.sort_unstable();
        rewards
    };
    assert_eq!(explore(Side::R), explore(Side::S));
}

#[test]
fn icl_learns_s_without_extra_joins() {
    let g = learnjoin::datagen::generate(&learnjoin::datagen::GenConfig {
        multiplicity: learnjoin::datagen::Multiplicity::ManyToMany,
        ..learnjoin::datagen::GenConfig::new(400, 400, 300, 0.5, 8)
    })
    .unwrap();
    let r = store("R", g.r, 4);
    let s = store("S", g.s, 4);
    let mut j = join(&r, &s, usize::MAX);
    let (_, stats) = run_icl(&mut j, &osl(3, None));
    assert_eq!(stats.s_learning_probes, 0);
    assert_eq!(j.phases.explore_s, 0);
    assert!(stats.s_exploitations > 0);
    assert_eq!(multiset(&j.into()), brute_force_of(&r, &s));
}

fn brute_force_of(r: &RelationStore, s: &RelationStore) -> std::collections::BTreeMap<common::Identity, usize> {
    let flat = |x: &RelationStore| x.partitions.iter().flat_map(|p| p.tuples.clone()).collect::<Vec<_>>();
    common::brute_force_sized(&flat(r), r.partition_size, &flat(s), s.partition_size, false)
}

#[test]
fn icl_first_s_exploitation_is_the_universal_partner() {
    let r = store("R", keyed(&[0, 1, 2, 3]), 1);
    let s = store("S", keyed(&[100, 101, 102, 103, 0, 1, 2, 3, 200, 201, 202, 203, 300, 301, 302, 303]), 4);
    let mut j = join(&r, &s, usize::MAX);
    let (trace, stats) = run_icl(&mut j, &osl(2, None));
    let first_s = trace.iter().find(|t| t.explorer == Side::S).expect("S exploited");
    assert_eq!(first_s.exploited, Some(1));
    assert!(stats.s_exploitations >= 1);
    assert_eq!(multiset(&j.into()), brute_force_of(&r, &s));
}

#[test]
fn rosl_is_deterministic_per_seed() {
    let g = learnjoin::datagen::generate(&learnjoin::datagen::GenConfig::new(160, 800, 160, 0.8, 2)).unwrap();
    let r = store("R", g.r, 8);
    let s = store("S", g.s, 8);
    let go = |seed| {
        let mut j = join(&r, &s, 300);
        let p = RoslParams::<f64> { osl: OslParams { seed, ..OslParams::default() }, ..RoslParams::default() };
        let out = run_rosl(&mut j, &p, 10);
        (out.log, RunOutput::from(j).stream)
    };
    let (a, b) = (go(4), go(4));
    assert_eq!(a, b);
    assert_ne!(a.0, go(5).0);
    assert!(a.0.iter().all(|rec| rec.e > 0.0 && rec.e <= 1.0));
}

#[test]
fn exploit_draw_matches_reward_share() {
    let mut a = RewardEntry::new(0);
    a.successes = 3;
    let mut b = RewardEntry::new(1);
    b.successes = 1;
    let table = [a, b];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let draws = 100_000;
    let hits = (0..draws).filter(|_| rosl_exploit_draw(&table, 0.5, &mut rng).unwrap().0 == 0).count();
    let sigma = (0.75f64 * 0.25 / draws as f64).sqrt();
    assert!((hits as f64 / draws as f64 - 0.75).abs() <= 3.0 * sigma);
}
