//! Target-versus-found reports and aggregation of progression logs.

use autobalance::evalmat::MatchupStats;
use autobalance::{
    center_winrates, graph_distance, response_graph, target_to_response_graph, DistanceMetric,
    EvaluationMatrix, TargetGraph, WinRateMatrix,
};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Metagame(#[from] autobalance::metagame::MetagameError),
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: &'static str },
    #[error("{path} line {line}: `{value}` is not a number")]
    BadNumber {
        path: String,
        line: u64,
        value: String,
    },
    #[error("no progression files given")]
    NoInputs,
}

/// What the matrix entries measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// Empirical win-rates; targets are the designer's win-rates.
    WinRate,
    /// Signed payoffs; targets are win-rates centered on 0.5.
    Margin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub row: usize,
    pub col: usize,
    pub target: f64,
    pub found: f64,
    pub stats: Option<MatchupStats>,
}

impl PairRow {
    /// Absolute error in percentage points.
    pub fn error_pct(&self) -> f64 {
        (self.found - self.target).abs() * 100.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub labels: Vec<String>,
    pub quantity: Quantity,
    pub matrix: Vec<Vec<f64>>,
    pub pairs: Vec<PairRow>,
    pub metric: DistanceMetric,
    pub distance: f64,
}

impl Report {
    /// `stats` holds upper-triangle tallies `(i, j, stats)`, as produced by the simulator.
    pub fn winrates(
        target: &TargetGraph,
        found: &WinRateMatrix,
        stats: Option<&[(usize, usize, MatchupStats)]>,
        metric: DistanceMetric,
    ) -> Result<Self, ReportError> {
        let want = target.winrates();
        let graph = response_graph(&center_winrates(found)?);
        let distance = graph_distance(&graph, &target_to_response_graph(target)?, metric)?;
        let pairs = found
            .upper()
            .into_iter()
            .map(|(i, j, w)| PairRow {
                row: i,
                col: j,
                target: want.get(i, j),
                found: w,
                stats: stats
                    .and_then(|s| s.iter().find(|(a, b, _)| (*a, *b) == (i, j)))
                    .map(|(_, _, s)| *s),
            })
            .collect();
        Ok(Self {
            labels: found.labels().to_vec(),
            quantity: Quantity::WinRate,
            matrix: found.rows(),
            pairs,
            metric,
            distance,
        })
    }

    pub fn margins(
        target: &TargetGraph,
        found: &EvaluationMatrix,
        metric: DistanceMetric,
    ) -> Result<Self, ReportError> {
        let want = center_winrates(&target.winrates())?;
        let graph = response_graph(found);
        let distance = graph_distance(&graph, &target_to_response_graph(target)?, metric)?;
        let n = found.len();
        let pairs = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| PairRow {
                row: i,
                col: j,
                target: want.get(i, j),
                found: found.get(i, j),
                stats: None,
            })
            .collect();
        Ok(Self {
            labels: found.labels().to_vec(),
            quantity: Quantity::Margin,
            matrix: found.rows(),
            pairs,
            metric,
            distance,
        })
    }

    /// Aligned text for terminals and `report.txt`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let title = match self.quantity {
            Quantity::WinRate => "win-rate matrix (row vs column)",
            Quantity::Margin => "payoff matrix (row vs column)",
        };
        let width = self
            .labels
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(1)
            .max(8);
        writeln!(out, "{title}").unwrap();
        write!(out, "{:width$}", "").unwrap();
        for l in &self.labels {
            write!(out, " {l:>width$}").unwrap();
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.matrix) {
            write!(out, "{l:width$}").unwrap();
            for v in row {
                write!(out, " {v:>width$.4}").unwrap();
            }
            out.push('\n');
        }
        out.push('\n');

        let with_stats = self.pairs.iter().any(|p| p.stats.is_some());
        write!(
            out,
            "{:<12} {:>8} {:>8} {:>8}",
            "matchup", "target", "found", "error"
        )
        .unwrap();
        if with_stats {
            write!(out, "  {:<17} {:>11}", "95% CI", "W-L-D").unwrap();
        }
        out.push('\n');
        for p in &self.pairs {
            let name = format!("{}-{}", self.labels[p.row], self.labels[p.col]);
            write!(
                out,
                "{name:<12} {:>8.4} {:>8.4} {:>7.1}%",
                p.target,
                p.found,
                p.error_pct()
            )
            .unwrap();
            if let Some(s) = p.stats {
                let (lo, hi) = s.ci95();
                let ci = format!("[{lo:.3}, {hi:.3}]");
                let tally = format!("{}-{}-{}", s.wins, s.losses, s.draws);
                write!(out, "  {ci:<17} {tally:>11}").unwrap();
            }
            out.push('\n');
        }
        out.push('\n');
        let metric = match self.metric {
            DistanceMetric::MeanSquared => "mse",
            DistanceMetric::MeanAbsolute => "mae",
        };
        writeln!(out, "distance ({metric}): {:.4e}", self.distance).unwrap();
        out
    }

    /// One row per upper-triangle pair.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "row",
            "col",
            "target",
            "found",
            "error_pct",
            "wins",
            "losses",
            "draws",
            "ci_low",
            "ci_high",
        ])
        .expect("in-memory write");
        for p in &self.pairs {
            let mut rec = vec![
                self.labels[p.row].clone(),
                self.labels[p.col].clone(),
                p.target.to_string(),
                p.found.to_string(),
                p.error_pct().to_string(),
            ];
            match p.stats {
                Some(s) => {
                    let (lo, hi) = s.ci95();
                    rec.extend([s.wins, s.losses, s.draws].map(|v| v.to_string()));
                    rec.extend([lo, hi].map(|v| v.to_string()));
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 5)),
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

/// Per-iteration summary of `best_loss` across one or more progression logs.
///
/// Columns: `iteration,runs,best_loss_min,best_loss_median,best_loss_mean,best_loss_max`.
/// Runs of different length contribute only to the iterations they reached.
pub fn aggregate(inputs: &[(String, String)]) -> Result<String, ReportError> {
    if inputs.is_empty() {
        return Err(ReportError::NoInputs);
    }
    let mut by_iteration: Vec<Vec<f64>> = Vec::new();
    for (path, text) in inputs {
        let csv_err = |source| ReportError::Csv {
            path: path.clone(),
            source,
        };
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().map_err(csv_err)?.clone();
        let col = |column: &'static str| {
            headers
                .iter()
                .position(|h| h == column)
                .ok_or(ReportError::MissingColumn {
                    path: path.clone(),
                    column,
                })
        };
        let (it, best) = (col("iteration")?, col("best_loss")?);
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            let num = |i: usize| {
                let v = rec.get(i).unwrap_or("");
                v.parse::<f64>().map_err(|_| ReportError::BadNumber {
                    path: path.clone(),
                    line,
                    value: v.to_string(),
                })
            };
            let iteration = num(it)?;
            if iteration.fract() != 0.0 || iteration < 0.0 {
                return Err(ReportError::BadNumber {
                    path: path.clone(),
                    line,
                    value: rec.get(it).unwrap_or("").to_string(),
                });
            }
            let iteration = iteration as usize;
            if by_iteration.len() <= iteration {
                by_iteration.resize(iteration + 1, Vec::new());
            }
            by_iteration[iteration].push(num(best)?);
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "iteration",
        "runs",
        "best_loss_min",
        "best_loss_median",
        "best_loss_mean",
        "best_loss_max",
    ])
    .expect("in-memory write");
    for (i, values) in by_iteration.iter_mut().enumerate() {
        if values.is_empty() {
            continue;
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let median = if n % 2 == 1 {
            values[n / 2]
        } else {
            0.5 * (values[n / 2 - 1] + values[n / 2])
        };
        let mean = values.iter().sum::<f64>() / n as f64;
        w.write_record([
            i.to_string(),
            n.to_string(),
            values[0].to_string(),
            median.to_string(),
            mean.to_string(),
            values[n - 1].to_string(),
        ])
        .expect("in-memory write");
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use autobalance::TargetEdge;

    fn labels() -> Vec<String> {
        vec!["S".into(), "T".into(), "N".into()]
    }

    fn cyclic() -> TargetGraph {
        let e = |from: &str, to: &str| TargetEdge {
            from: from.into(),
            to: to.into(),
            winrate: 0.7,
        };
        TargetGraph::new(labels(), vec![e("S", "T"), e("T", "N"), e("N", "S")]).unwrap()
    }

    #[test]
    fn exact_fair_match_has_no_error() {
        let target = TargetGraph::fair(labels()).unwrap();
        let found = WinRateMatrix::from_upper(labels(), &[0.5, 0.5, 0.5]).unwrap();
        let r = Report::winrates(&target, &found, None, DistanceMetric::MeanSquared).unwrap();
        assert!(r.pairs.iter().all(|p| p.error_pct() == 0.0));
        assert_eq!(r.distance, 0.0);
    }

    #[test]
    fn cyclic_errors_in_percentage_points() {
        let found = WinRateMatrix::from_upper(labels(), &[0.68, 0.36, 0.69]).unwrap();
        let r = Report::winrates(&cyclic(), &found, None, DistanceMetric::MeanSquared).unwrap();
        let errs: Vec<f64> = r.pairs.iter().map(PairRow::error_pct).collect();
        for (e, want) in errs.iter().zip([2.0, 6.0, 1.0]) {
            assert!((e - want).abs() < 1e-9, "{errs:?}");
        }
    }

    #[test]
    fn distance_matches_graph_distance() {
        let found = WinRateMatrix::from_upper(labels(), &[0.68, 0.36, 0.69]).unwrap();
        for metric in [DistanceMetric::MeanSquared, DistanceMetric::MeanAbsolute] {
            let r = Report::winrates(&cyclic(), &found, None, metric).unwrap();
            let g = response_graph(&center_winrates(&found).unwrap());
            let want =
                graph_distance(&g, &target_to_response_graph(&cyclic()).unwrap(), metric).unwrap();
            assert_eq!(r.distance, want);
        }
    }

    #[test]
    fn render_and_csv_include_stats() {
        let found = WinRateMatrix::from_upper(labels(), &[0.64, 0.5, 0.5]).unwrap();
        let stats = [(
            0,
            1,
            MatchupStats {
                wins: 32,
                losses: 18,
                draws: 0,
            },
        )];
        let r =
            Report::winrates(&cyclic(), &found, Some(&stats), DistanceMetric::MeanSquared).unwrap();
        let text = r.render();
        assert!(text.contains("[0.501, 0.759]"), "{text}");
        assert!(text.contains("32-18-0"), "{text}");
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().starts_with("S,T,0.7,0.64,"));
        assert!(csv.lines().nth(2).unwrap().ends_with(",,,,,"));
    }

    #[test]
    fn aggregates_across_runs() {
        let a = "iteration,trial_id,loss,best_loss\n0,0,inf,inf\n1,1,0.5,0.5\n2,2,0.2,0.2\n";
        let b = "iteration,trial_id,loss,best_loss,w_S_T\n0,0,0.3,0.3,0.6\n1,1,0.4,0.3,0.5\n";
        let out = aggregate(&[("a".into(), a.into()), ("b".into(), b.into())]).unwrap();
        assert_eq!(
            out,
            "iteration,runs,best_loss_min,best_loss_median,best_loss_mean,best_loss_max\n\
             0,2,0.3,inf,inf,inf\n1,2,0.3,0.4,0.4,0.5\n2,1,0.2,0.2,0.2,0.2\n"
        );
    }

    #[test]
    fn aggregate_errors() {
        assert!(matches!(aggregate(&[]), Err(ReportError::NoInputs)));
        let missing = aggregate(&[("x".into(), "iteration,loss\n0,1\n".into())]);
        assert!(matches!(
            missing,
            Err(ReportError::MissingColumn {
                column: "best_loss",
                ..
            })
        ));
        let bad = aggregate(&[("x".into(), "iteration,best_loss\n0,abc\n".into())]);
        assert!(matches!(bad, Err(ReportError::BadNumber { line: 2, .. })));
    }
}
