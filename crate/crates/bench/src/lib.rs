//! Fixtures shared by the benchmarks.

use autobalance::optimize::Backend;
use autobalance::{OptimizerState, ParameterSpace, ParameterSpec};

/// A TPE state on the 5-d sphere with `n` completed trials.
pub fn sphere_state(n: usize, seed: u64) -> OptimizerState {
    let specs = (0..5)
        .map(|i| ParameterSpec::real(format!("x{i}"), -5.0, 5.0).expect("valid bounds"))
        .collect();
    let space = ParameterSpace::new(specs).expect("distinct names");
    let mut state = OptimizerState::new(space, Backend::default(), seed).expect("valid backend");
    for _ in 0..n {
        let (id, theta) = state.ask();
        let loss = theta.values().iter().map(|v| v * v).sum();
        state.tell(id, loss).expect("pending trial");
    }
    state
}
