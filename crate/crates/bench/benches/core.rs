use autobalance::agents::{mcts_act, random_act, MctsConfig, RewardWeights};
use autobalance::seed;
use autobalance::warfare::{GameState, Player, Roster};
use autobalance_bench::sphere_state;
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

fn random_match(c: &mut Criterion) {
    let roster = Roster::table_fair();
    c.bench_function("engine/random_match", |b| {
        let mut game = 0u64;
        b.iter(|| {
            game += 1;
            let mut rng = seed::rng(game, &[]);
            let mut state = GameState::new(roster.saw, roster.nail, game).unwrap();
            while !state.is_terminal() {
                let mut actions = [None; 2];
                for p in Player::BOTH {
                    if state.is_awake(p) {
                        actions[p.index()] = Some(random_act(&state, p, &mut rng).unwrap());
                    }
                }
                state.advance(actions).unwrap();
            }
            black_box(state.outcome())
        })
    });
}

fn mcts_decision(c: &mut Criterion) {
    let roster = Roster::table_fair();
    let state = GameState::new(roster.torch, roster.saw, 7).unwrap();
    let weights = RewardWeights::default();
    for budget in [16, 625] {
        let cfg = MctsConfig::with_budget(budget);
        c.bench_function(&format!("mcts/act_{budget}"), |b| {
            let mut rng = seed::rng(1, &[]);
            b.iter(|| mcts_act(black_box(&state), Player::One, &cfg, &weights, &mut rng).unwrap())
        });
    }
}

fn tpe_ask(c: &mut Criterion) {
    for n in [20, 200] {
        c.bench_function(&format!("tpe/ask_after_{n}"), |b| {
            b.iter_batched(
                || sphere_state(n, 3),
                |mut s| black_box(s.ask()),
                BatchSize::SmallInput,
            )
        });
    }
}

criterion_group!(benches, random_match, mcts_decision, tpe_ask);
criterion_main!(benches);
