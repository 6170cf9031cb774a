//! Normal-form games whose payoffs are the parameters themselves.

use crate::metagame::{
    response_graph, EvaluationMatrix, MetagameError, ParameterSpace, ParameterSpec, ParameterVector,
};
use crate::optimize::{Evaluation, EvaluationError, Evaluator};

/// A k-strategy zero-sum game with one payoff parameter per unordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormSpec {
    labels: Vec<String>,
    space: ParameterSpace,
}

impl NormalFormSpec {
    /// Pair parameters named `"<row>.<col>"`, bounded to [-1, 1].
    pub fn new(labels: Vec<String>) -> Result<Self, MetagameError> {
        Self::with_bounds(labels, -1.0, 1.0)
    }

    pub fn with_bounds(labels: Vec<String>, min: f64, max: f64) -> Result<Self, MetagameError> {
        let specs = pairs(labels.len())
            .map(|(i, j)| ParameterSpec::real(format!("{}.{}", labels[i], labels[j]), min, max))
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_space(labels, ParameterSpace::new(specs)?)
    }

    /// Uses a caller-built space, e.g. one with fixed entries. Parameter
    /// `p` is the payoff of pair `p` in [`NormalFormSpec::pairs`] order.
    pub fn with_space(labels: Vec<String>, space: ParameterSpace) -> Result<Self, MetagameError> {
        if labels.len() < 2 {
            return Err(MetagameError::TooFewStrategies(labels.len()));
        }
        // Reuse the square-matrix label checks.
        EvaluationMatrix::new(labels.clone(), vec![vec![0.0; labels.len()]; labels.len()])?;
        let expected = labels.len() * (labels.len() - 1) / 2;
        if space.len() != expected {
            return Err(MetagameError::DimensionMismatch {
                expected,
                actual: space.len(),
            });
        }
        Ok(Self { labels, space })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    /// Unordered pairs `(i, j)`, `i < j`, in parameter order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        pairs(self.labels.len()).collect()
    }
}

fn pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |i| (i + 1..k).map(move |j| (i, j)))
}

/// `a_ij = theta_(i,j)` above the diagonal, `a_ji = -a_ij` below it.
pub fn nf_evaluation_matrix(
    spec: &NormalFormSpec,
    theta: &ParameterVector,
) -> Result<EvaluationMatrix, MetagameError> {
    spec.space.check(theta)?;
    let k = spec.labels.len();
    let mut rows = vec![vec![0.0; k]; k];
    for ((i, j), &v) in pairs(k).zip(theta.values()) {
        rows[i][j] = v;
        rows[j][i] = -v;
    }
    EvaluationMatrix::zero_sum(spec.labels.clone(), rows)
}

/// Deterministic evaluator for [`crate::optimize::balance`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormEvaluator {
    spec: NormalFormSpec,
}

impl NormalFormEvaluator {
    pub fn new(spec: NormalFormSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> &NormalFormSpec {
        &self.spec
    }
}

impl Evaluator for NormalFormEvaluator {
    fn evaluate(&self, theta: &ParameterVector) -> Result<Evaluation, EvaluationError> {
        let matrix =
            nf_evaluation_matrix(&self.spec, theta).map_err(|e| EvaluationError(e.to_string()))?;
        Ok(Evaluation {
            graph: response_graph(&matrix),
            aux: theta.values().to_vec(),
        })
    }

    fn columns(&self) -> Vec<String> {
        self.spec
            .pairs()
            .into_iter()
            .map(|(i, j)| format!("a_{}_{}", self.spec.labels[i], self.spec.labels[j]))
            .collect()
    }
}

/// Payoff to `row` when both players commit to fixed strategies.
pub fn play(matrix: &EvaluationMatrix, row: usize, col: usize) -> f64 {
    matrix.get(row, col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metagame::{DistanceMetric, TargetGraph};
    use crate::optimize::{balance, Backend, BalanceConfig, OptimizerState};
    use crate::{graph_distance, target_to_response_graph};
    use proptest::prelude::*;

    fn rps() -> NormalFormSpec {
        NormalFormSpec::new(vec!["R".into(), "P".into(), "S".into()]).unwrap()
    }

    #[test]
    fn antisymmetric_completion() {
        let a = nf_evaluation_matrix(&rps(), &ParameterVector::new(vec![1.0, -1.0, 1.0])).unwrap();
        assert_eq!(
            a.rows(),
            vec![
                vec![0.0, 1.0, -1.0],
                vec![-1.0, 0.0, 1.0],
                vec![1.0, -1.0, 0.0]
            ]
        );
        assert!(a.is_zero_sum());
    }

    #[test]
    fn zero_payoffs_are_fair() {
        let e = NormalFormEvaluator::new(rps());
        let g = e
            .evaluate(&ParameterVector::new(vec![0.0; 3]))
            .unwrap()
            .graph;
        assert!(g.rows().iter().flatten().all(|&w| w == 0.0));
    }

    #[test]
    fn classic_cycle() {
        let a = nf_evaluation_matrix(&rps(), &ParameterVector::new(vec![-1.0, 1.0, -1.0])).unwrap();
        let g = response_graph(&a);
        // P beats R, R beats S, S beats P.
        assert_eq!(
            g.rows(),
            vec![
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0]
            ]
        );
    }

    #[test]
    fn dimension_and_bounds_checked() {
        let spec = rps();
        assert!(nf_evaluation_matrix(&spec, &ParameterVector::new(vec![0.0; 2])).is_err());
        assert!(nf_evaluation_matrix(&spec, &ParameterVector::new(vec![0.0, 0.0, 1.5])).is_err());
        assert!(NormalFormSpec::new(vec!["R".into()]).is_err());
        assert_eq!(spec.space().len(), 3);
        assert_eq!(spec.space().specs()[0].name, "R.P");
        assert_eq!(
            NormalFormEvaluator::new(spec).columns(),
            vec!["a_R_P", "a_R_S", "a_P_S"]
        );
    }

    #[test]
    fn balances_to_the_cyclic_target() {
        let spec = rps();
        let target = TargetGraph::cycle(vec!["R".into(), "S".into(), "P".into()], 0.7).unwrap();
        let target = TargetGraph::new(spec.labels().to_vec(), target.edges().to_vec()).unwrap();
        let state = OptimizerState::new(spec.space().clone(), Backend::default(), 3).unwrap();
        let cfg = BalanceConfig {
            max_iterations: 200,
            ..BalanceConfig::default()
        };
        let eval = NormalFormEvaluator::new(spec);
        let res = balance(state, &target, &eval, DistanceMetric::MeanSquared, &cfg).unwrap();
        assert!(res.best_loss < 1e-3, "loss {}", res.best_loss);
        let found = eval.evaluate(&res.best_theta).unwrap().graph;
        let want = target_to_response_graph(&target).unwrap();
        let d = graph_distance(&found, &want, DistanceMetric::MeanSquared).unwrap();
        assert!((d - res.best_loss).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn always_zero_sum(theta in prop::collection::vec(-1.0f64..=1.0, 6)) {
            let spec = NormalFormSpec::new(vec!["A".into(), "B".into(), "C".into(), "D".into()]).unwrap();
            let a = nf_evaluation_matrix(&spec, &ParameterVector::new(theta)).unwrap();
            prop_assert!(a.is_zero_sum());
            for i in 0..4 {
                prop_assert_eq!(a.get(i, i), 0.0);
            }
        }

        #[test]
        fn sign_flip_transposes_edge(theta in prop::collection::vec(-1.0f64..=1.0, 3), p in 0usize..3) {
            let spec = rps();
            let mut flipped = theta.clone();
            flipped[p] = -flipped[p];
            let g = response_graph(&nf_evaluation_matrix(&spec, &ParameterVector::new(theta)).unwrap());
            let h = response_graph(&nf_evaluation_matrix(&spec, &ParameterVector::new(flipped)).unwrap());
            let (i, j) = spec.pairs()[p];
            prop_assert_eq!(g.weight(i, j), h.weight(j, i));
            prop_assert_eq!(g.weight(j, i), h.weight(i, j));
        }
    }
}
