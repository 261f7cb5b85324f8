//! Property tests over whole episodes driven by the random baseline.

use std::collections::BTreeMap;

use econsim::action::TASK_DONE;
use econsim::episode::RESET_TOOL;
use econsim::harness::{count_tools, run_episode, RandomAgent, RunOptions, SlidingWindow};
use econsim::{ActionCall, EnvKind, Episode, EpisodeConfig, RngHub, StepOutcome};
use proptest::prelude::*;

fn env_strategy() -> impl Strategy<Value = EnvKind> {
    prop_oneof![Just(EnvKind::Vending), Just(EnvKind::Freelance), Just(EnvKind::Operation)]
}

fn random_run(env: EnvKind, seed: u64, days: u32) -> Episode {
    let cfg = EpisodeConfig::new(env, seed).with_horizon(days);
    let mut agent = RandomAgent::new(seed);
    let (_, ep) = run_episode(cfg, "prop", &mut agent, None, &RunOptions::default()).unwrap();
    ep
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn daily_budget_is_never_exceeded(env in env_strategy(), seed in 0u64..10_000, days in 1u32..25) {
        let ep = random_run(env, seed, days);
        let budget = env.default_daily_budget();
        let mut per_day: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
        for r in ep.records().iter().filter(|r| r.tool != RESET_TOOL) {
            let e = per_day.entry(r.day).or_default();
            if r.tool == TASK_DONE { e.1 += 1 } else { e.0 += 1 }
        }
        let last = per_day.keys().max().copied();
        for (day, (actions, ends)) in per_day {
            prop_assert!(actions <= budget, "day {day}: {actions} actions");
            // an action can end the episode mid-day, leaving the last day open
            let want = if Some(day) == last && ep.records().last().unwrap().tool != TASK_DONE { 0 } else { 1 };
            prop_assert_eq!(ends, want, "day {} closed {} times", day, ends);
        }
    }

    #[test]
    fn steps_increase_by_one(env in env_strategy(), seed in 0u64..10_000) {
        let ep = random_run(env, seed, 10);
        for (i, r) in ep.records().iter().enumerate() {
            prop_assert_eq!(r.step, i as u64);
        }
    }

    #[test]
    fn terminated_episodes_absorb_every_call(env in env_strategy(), seed in 0u64..10_000, days in 1u32..8) {
        let mut ep = random_run(env, seed, days);
        prop_assert!(!ep.is_running());
        let digest = ep.state_digest();
        let n = ep.records().len();
        for call in [ActionCall::task_done(), ActionCall::bare("tasks_browse"), ActionCall::bare("nope")] {
            prop_assert!(matches!(ep.act(&call), StepOutcome::Terminated));
        }
        prop_assert!(matches!(ep.task_done(), StepOutcome::Terminated));
        prop_assert_eq!(ep.records().len(), n);
        prop_assert_eq!(ep.state_digest(), digest);
    }

    #[test]
    fn replay_reproduces_every_digest(env in env_strategy(), seed in 0u64..10_000, days in 1u32..20) {
        let ep = random_run(env, seed, days);
        let (replayed, mismatch) = Episode::replay(ep.config().clone(), ep.records()).unwrap();
        prop_assert_eq!(mismatch, None);
        prop_assert_eq!(replayed.state_digest(), ep.state_digest());
    }

    #[test]
    fn tool_counts_conserve_records(env in env_strategy(), seed in 0u64..10_000, days in 1u32..20) {
        let ep = random_run(env, seed, days);
        let counts = count_tools(ep.records(), ep.tools());
        let total: u32 = counts.iter().flat_map(|m| m.values()).sum();
        let recorded = ep.records().iter().filter(|r| r.tool != RESET_TOOL).count();
        prop_assert_eq!(total as usize, recorded);
        let open_last_day = ep.records().last().unwrap().tool != TASK_DONE;
        for (i, m) in counts.iter().enumerate() {
            let want = if open_last_day && i + 1 == counts.len() { 0 } else { 1 };
            prop_assert_eq!(m[TASK_DONE], want);
            for t in ep.tools() {
                prop_assert!(m.contains_key(t.name));
            }
        }
    }

    #[test]
    fn window_never_exceeds_capacity(k in 1usize..40, seed in 0u64..10_000) {
        let ep = random_run(EnvKind::Freelance, seed, 15);
        let mut w = SlidingWindow::new(k);
        for r in ep.records() {
            w.push(r.clone());
            prop_assert!(w.len() <= k);
            prop_assert_eq!(w.last().map(|x| x.step), Some(r.step));
        }
        let tail: Vec<u64> = ep.records().iter().rev().take(k).rev().map(|r| r.step).collect();
        let kept: Vec<u64> = w.iter().map(|r| r.step).collect();
        prop_assert_eq!(kept, tail);
    }

    #[test]
    fn streams_do_not_interfere(seed in any::<u64>(), noise in proptest::collection::vec(0usize..3, 0..50)) {
        let mut alone = RngHub::new(seed);
        let expected: Vec<u64> = (0..20).map(|_| alone.next_u64("demand")).collect();
        let mut mixed = RngHub::new(seed);
        let mut got = Vec::new();
        for (i, pick) in noise.iter().chain(std::iter::repeat(&0)).take(40).enumerate() {
            match pick {
                1 => { mixed.next_u64("auditor"); }
                2 => { mixed.gaussian("ops-noise", 0.0, 1.0); }
                _ => {}
            }
            if i % 2 == 0 {
                got.push(mixed.next_u64("demand"));
            }
        }
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn freelance_state_stays_in_range(seed in 0u64..10_000) {
        let ep = random_run(EnvKind::Freelance, seed, 30);
        let econsim::episode::Economy::Freelance(f) = ep.economy() else { unreachable!() };
        let s = &f.state;
        let p = &f.params.physio;
        prop_assert!((0.0..=p.e_max).contains(&s.energy));
        prop_assert!((0.0..=p.st_max).contains(&s.stress));
        prop_assert!((0.0..=p.fail_prob_cap).contains(&s.fail_prob));
        // money moves only through payments and the three spend ledgers
        let drift = s.money - f.params.initial_money - f.income();
        prop_assert!(drift.abs() < 1e-9, "drift {drift}");
    }

    #[test]
    fn operation_state_stays_in_range(seed in 0u64..10_000) {
        let ep = random_run(EnvKind::Operation, seed, 60);
        let econsim::episode::Economy::Operation(o) = ep.economy() else { unreachable!() };
        let s = &o.state;
        prop_assert!(s.dau >= 0.0 && s.volume >= 1.0);
        for v in [s.quality, s.activity, s.engagement] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn vending_state_stays_in_range(seed in 0u64..10_000) {
        let ep = random_run(EnvKind::Vending, seed, 30);
        let econsim::episode::Economy::Vending(v) = ep.economy() else { unreachable!() };
        prop_assert!(v.state.inventory.values().all(|q| *q > 0));
        prop_assert!(v.state.prices.values().all(|p| *p > 0.0));
        prop_assert!(v.state.cash >= 0.0);
    }
}

#[test]
fn rejected_orders_leave_the_digest_unchanged() {
    let mut ep = Episode::new(EpisodeConfig::new(EnvKind::Vending, 3), "t").unwrap();
    let before = ep.state_digest();
    let unknown = serde_json::json!({"items": [{"name": "Nonexistent Thing", "quantity": 1}]});
    assert!(matches!(ep.act(&ActionCall::new("order_place", unknown)), StepOutcome::Rejected(_)));
    // only the budget slot moved; compare against a twin that burned a slot on a read
    let mut twin = Episode::new(EpisodeConfig::new(EnvKind::Vending, 3), "t").unwrap();
    let q = serde_json::json!({"query": "zzz-no-match"});
    assert!(matches!(twin.act(&ActionCall::new("products_research", q)), StepOutcome::Applied(_)));
    assert_eq!(ep.state_digest(), twin.state_digest());
    assert_ne!(ep.state_digest(), before);
}
