//! Meta-game mathematics: parameter spaces, evaluation matrices, response
//! graphs and the distances between them.
//!
//! Matrices are stored row-major in flat vectors; entry `(i, j)` is the
//! score of strategy `i` against strategy `j`.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

/// Tolerance used when checking `w_ij + w_ji = 1` and `a_ij = -a_ji`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetagameError {
    #[error("parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),
    #[error("parameter vector has {actual} values, space has {expected} parameters")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("value {value} is not valid for parameter `{name}`: {reason}")]
    InvalidValue {
        name: String,
        value: f64,
        reason: String,
    },
    #[error("matrix must be square with {labels} rows and columns, got {rows}x{cols}")]
    NotSquare {
        labels: usize,
        rows: usize,
        cols: usize,
    },
    #[error("a game needs at least 2 strategies, got {0}")]
    TooFewStrategies(usize),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("entry ({row}, {col}) = {value} is outside [0, 1]")]
    WinRateOutOfRange { row: usize, col: usize, value: f64 },
    #[error("entries ({row}, {col}) and ({col}, {row}) violate the complement rule: {forward} + {backward} != 1")]
    ComplementViolation {
        row: usize,
        col: usize,
        forward: f64,
        backward: f64,
    },
    #[error(
        "entries ({row}, {col}) and ({col}, {row}) are not antisymmetric: {forward} vs {backward}"
    )]
    NotAntisymmetric {
        row: usize,
        col: usize,
        forward: f64,
        backward: f64,
    },
    #[error("negative edge weight {value} at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize, value: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("graphs differ at node {index}: `{left}` vs `{right}`")]
    LabelMismatch {
        index: usize,
        left: String,
        right: String,
    },
    #[error("graphs have different node counts: {left} vs {right}")]
    NodeCountMismatch { left: usize, right: usize },
    #[error("target edge refers to unknown node `{0}`")]
    UnknownNode(String),
    #[error("target edge {0} -> {0} is a self-loop")]
    SelfLoop(String),
    #[error("target edges {from}->{to} ({forward}) and {to}->{from} ({backward}) do not sum to 1")]
    InconsistentTarget {
        from: String,
        to: String,
        forward: f64,
        backward: f64,
    },
}

pub type Result<T, E = MetagameError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Integer,
    Real,
}

/// One designer-controllable game constant with box bounds.
///
/// A spec with `fixed` set is pinned to that value and excluded from search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub kind: ParamKind,
    pub min: f64,
    pub max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<f64>,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, kind: ParamKind, min: f64, max: f64) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            kind,
            min,
            max,
            fixed: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn integer(name: impl Into<String>, min: i64, max: i64) -> Result<Self> {
        Self::new(name, ParamKind::Integer, min as f64, max as f64)
    }

    pub fn real(name: impl Into<String>, min: f64, max: f64) -> Result<Self> {
        Self::new(name, ParamKind::Real, min, max)
    }

    pub fn with_fixed(mut self, value: f64) -> Result<Self> {
        self.fixed = Some(value);
        self.validate()?;
        Ok(self)
    }

    pub fn is_fixed(&self) -> bool {
        self.fixed.is_some()
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| MetagameError::InvalidParameter {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.is_empty() {
            return Err(bad("name must not be empty"));
        }
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(bad("bounds must be finite"));
        }
        if self.min > self.max {
            return Err(bad("min exceeds max"));
        }
        if self.kind == ParamKind::Integer && (self.min.fract() != 0.0 || self.max.fract() != 0.0) {
            return Err(bad("integer bounds must be whole numbers"));
        }
        if let Some(v) = self.fixed {
            self.check_value(v)
                .map_err(|_| bad("fixed value must lie within bounds and match the kind"))?;
        }
        Ok(())
    }

    /// Checks bounds and integrality, ignoring `fixed`.
    fn check_value(&self, value: f64) -> Result<()> {
        let bad = |reason: &str| MetagameError::InvalidValue {
            name: self.name.clone(),
            value,
            reason: reason.to_string(),
        };
        if !value.is_finite() {
            return Err(bad("not finite"));
        }
        if value < self.min || value > self.max {
            return Err(bad("out of bounds"));
        }
        if self.kind == ParamKind::Integer && value.fract() != 0.0 {
            return Err(bad("not a whole number"));
        }
        Ok(())
    }

    /// Full membership check including the fixed pin.
    pub fn check(&self, value: f64) -> Result<()> {
        self.check_value(value)?;
        match self.fixed {
            Some(f) if f != value => Err(MetagameError::InvalidValue {
                name: self.name.clone(),
                value,
                reason: format!("parameter is fixed to {f}"),
            }),
            _ => Ok(()),
        }
    }

    /// Clamps into bounds and rounds integer kinds to the nearest whole value.
    pub fn project(&self, value: f64) -> f64 {
        if let Some(f) = self.fixed {
            return f;
        }
        let v = value.clamp(self.min, self.max);
        match self.kind {
            ParamKind::Integer => v.round().clamp(self.min, self.max),
            ParamKind::Real => v,
        }
    }
}

/// An ordered set of parameter specs with unique names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParameterSpec>", into = "Vec<ParameterSpec>")]
pub struct ParameterSpace {
    specs: Vec<ParameterSpec>,
}

impl TryFrom<Vec<ParameterSpec>> for ParameterSpace {
    type Error = MetagameError;

    fn try_from(specs: Vec<ParameterSpec>) -> Result<Self> {
        Self::new(specs)
    }
}

impl From<ParameterSpace> for Vec<ParameterSpec> {
    fn from(space: ParameterSpace) -> Self {
        space.specs
    }
}

impl ParameterSpace {
    pub fn new(specs: Vec<ParameterSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for spec in &specs {
            spec.validate()?;
            if !seen.insert(spec.name.as_str()) {
                return Err(MetagameError::DuplicateParameter(spec.name.clone()));
            }
        }
        Ok(Self { specs })
    }

    pub fn specs(&self) -> &[ParameterSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Number of parameters left free for search.
    pub fn free_dims(&self) -> usize {
        self.specs.iter().filter(|s| !s.is_fixed()).count()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn check(&self, theta: &ParameterVector) -> Result<()> {
        if theta.len() != self.specs.len() {
            return Err(MetagameError::DimensionMismatch {
                expected: self.specs.len(),
                actual: theta.len(),
            });
        }
        self.specs
            .iter()
            .zip(theta.values())
            .try_for_each(|(spec, &v)| spec.check(v))
    }

    pub fn project(&self, values: &[f64]) -> ParameterVector {
        ParameterVector(
            self.specs
                .iter()
                .zip(values)
                .map(|(s, &v)| s.project(v))
                .collect(),
        )
    }
}

/// A point in a [`ParameterSpace`], one value per spec in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.0.get(index).copied()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn check_labels(labels: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(MetagameError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

fn flatten(labels: &[String], rows: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let n = labels.len();
    let cols = rows.iter().map(Vec::len).find(|&c| c != n).unwrap_or(n);
    if rows.len() != n || cols != n {
        return Err(MetagameError::NotSquare {
            labels: n,
            rows: rows.len(),
            cols,
        });
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    if let Some(k) = flat.iter().position(|v| !v.is_finite()) {
        return Err(MetagameError::NonFinite {
            row: k / n,
            col: k % n,
        });
    }
    Ok(flat)
}

/// Square matrix of signed margins between meta-strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationMatrix {
    labels: Vec<String>,
    entries: Vec<f64>,
    zero_sum: bool,
}

impl EvaluationMatrix {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        check_labels(&labels)?;
        let entries = flatten(&labels, rows)?;
        Ok(Self {
            labels,
            entries,
            zero_sum: false,
        })
    }

    /// Builds a matrix flagged zero-sum-symmetric, checking `a_ij = -a_ji`.
    pub fn zero_sum(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = Self::new(labels, rows)?;
        let n = m.len();
        for i in 0..n {
            for j in i..n {
                let (f, b) = (m.get(i, j), m.get(j, i));
                if (f + b).abs() > SYMMETRY_TOLERANCE {
                    return Err(MetagameError::NotAntisymmetric {
                        row: i,
                        col: j,
                        forward: f,
                        backward: b,
                    });
                }
            }
        }
        m.zero_sum = true;
        Ok(m)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.len() + col]
    }

    pub fn is_zero_sum(&self) -> bool {
        self.zero_sum
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .chunks(self.len().max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }
}

/// Directed weighted graph over strategies; `weight(i, j)` is the edge `i -> j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct ResponseGraph {
    labels: Vec<String>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    labels: Vec<String>,
    weights: Vec<Vec<f64>>,
}

impl TryFrom<RawGraph> for ResponseGraph {
    type Error = MetagameError;

    fn try_from(raw: RawGraph) -> Result<Self> {
        Self::new(raw.labels, raw.weights)
    }
}

impl From<ResponseGraph> for RawGraph {
    fn from(g: ResponseGraph) -> Self {
        Self {
            weights: g.rows(),
            labels: g.labels,
        }
    }
}

impl ResponseGraph {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        check_labels(&labels)?;
        let weights = flatten(&labels, rows)?;
        let n = labels.len();
        if let Some(k) = weights.iter().position(|&w| w < 0.0) {
            return Err(MetagameError::NegativeWeight {
                row: k / n,
                col: k % n,
                value: weights[k],
            });
        }
        Ok(Self { labels, weights })
    }

    pub fn zeros(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        Self::new(labels, vec![vec![0.0; n]; n])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[from * self.len() + to]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights
            .chunks(self.len().max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Multiplies every edge weight by `factor` (must be nonnegative).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.labels.clone(),
            self.rows()
                .into_iter()
                .map(|r| r.into_iter().map(|w| w * factor).collect())
                .collect(),
        )
    }
}

impl fmt::Display for ResponseGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                let w = self.weight(i, j);
                if w > 0.0 {
                    writeln!(f, "{} -> {}: {w:.4}", self.labels[i], self.labels[j])?;
                }
            }
        }
        Ok(())
    }
}

/// Empirical head-to-head win-rates; `get(i, j)` is the rate at which `i` beats `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WinRateMatrix {
    labels: Vec<String>,
    entries: Vec<f64>,
}

impl WinRateMatrix {
    /// Only checks shape. Range and complement are checked by [`center_winrates`].
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        check_labels(&labels)?;
        let entries = flatten(&labels, rows)?;
        Ok(Self { labels, entries })
    }

    /// Builds a matrix from upper-triangle rates `w_ij` (i < j, row-major order),
    /// filling the lower triangle by complement and the diagonal with 0.5.
    pub fn from_upper(labels: Vec<String>, upper: &[f64]) -> Result<Self> {
        let n = labels.len();
        let expected = n * n.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(MetagameError::DimensionMismatch {
                expected,
                actual: upper.len(),
            });
        }
        let mut rows = vec![vec![0.5; n]; n];
        let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        for ((i, j), &w) in pairs.zip(upper) {
            rows[i][j] = w;
            rows[j][i] = 1.0 - w;
        }
        Self::new(labels, rows)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.len() + col]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .chunks(self.len().max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Upper-triangle `(i, j, w_ij)` for `i < j` in row-major order.
    pub fn upper(&self) -> Vec<(usize, usize, f64)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, self.get(i, j)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum DistanceMetric {
    #[serde(rename = "mae")]
    MeanAbsolute,
    #[default]
    #[serde(rename = "mse")]
    MeanSquared,
}

/// Response graph of an evaluation matrix: negative entries become 0.
pub fn response_graph(matrix: &EvaluationMatrix) -> ResponseGraph {
    ResponseGraph {
        labels: matrix.labels.clone(),
        weights: matrix.entries.iter().map(|&a| a.max(0.0)).collect(),
    }
}

/// Mean over all `n^2` cells of the absolute or squared weight difference.
pub fn graph_distance(a: &ResponseGraph, b: &ResponseGraph, metric: DistanceMetric) -> Result<f64> {
    if let Some((index, (l, r))) = a
        .labels
        .iter()
        .zip(&b.labels)
        .enumerate()
        .find(|(_, (l, r))| l != r)
    {
        return Err(MetagameError::LabelMismatch {
            index,
            left: l.clone(),
            right: r.clone(),
        });
    }
    if a.len() != b.len() {
        return Err(MetagameError::NodeCountMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let cells = (a.len() * a.len()).max(1) as f64;
    let diffs = a.weights.iter().zip(&b.weights).map(|(x, y)| x - y);
    let total: f64 = match metric {
        DistanceMetric::MeanAbsolute => diffs.map(f64::abs).sum(),
        DistanceMetric::MeanSquared => diffs.map(|d| d * d).sum(),
    };
    Ok(total / cells)
}

/// Converts win-rates into zero-sum margins `a_ij = w_ij - 0.5`.
pub fn center_winrates(winrates: &WinRateMatrix) -> Result<EvaluationMatrix> {
    let n = winrates.len();
    for i in 0..n {
        for j in 0..n {
            let w = winrates.get(i, j);
            if !(0.0..=1.0).contains(&w) {
                return Err(MetagameError::WinRateOutOfRange {
                    row: i,
                    col: j,
                    value: w,
                });
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let (f, b) = (winrates.get(i, j), winrates.get(j, i));
            if (f + b - 1.0).abs() > SYMMETRY_TOLERANCE {
                return Err(MetagameError::ComplementViolation {
                    row: i,
                    col: j,
                    forward: f,
                    backward: b,
                });
            }
        }
    }
    Ok(EvaluationMatrix {
        labels: winrates.labels.clone(),
        entries: winrates.entries.iter().map(|w| w - 0.5).collect(),
        zero_sum: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEdge {
    pub from: String,
    pub to: String,
    pub winrate: f64,
}

/// Designer-authored balance target. Undeclared ordered pairs default to 50%.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTarget", into = "RawTarget")]
pub struct TargetGraph {
    labels: Vec<String>,
    edges: Vec<TargetEdge>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    nodes: Vec<String>,
    #[serde(default, rename = "edge")]
    edges: Vec<TargetEdge>,
}

impl TryFrom<RawTarget> for TargetGraph {
    type Error = MetagameError;

    fn try_from(raw: RawTarget) -> Result<Self> {
        Self::new(raw.nodes, raw.edges)
    }
}

impl From<TargetGraph> for RawTarget {
    fn from(t: TargetGraph) -> Self {
        Self {
            nodes: t.labels,
            edges: t.edges,
        }
    }
}

impl TargetGraph {
    pub fn new(labels: Vec<String>, edges: Vec<TargetEdge>) -> Result<Self> {
        check_labels(&labels)?;
        let target = Self { labels, edges };
        target.winrate_rows()?;
        Ok(target)
    }

    /// All pairs at 50%.
    pub fn fair(labels: Vec<String>) -> Result<Self> {
        Self::new(labels, Vec::new())
    }

    /// Dominance cycle: each label beats the next one (wrapping) at `winrate`.
    pub fn cycle(labels: Vec<String>, winrate: f64) -> Result<Self> {
        let n = labels.len();
        let edges = (0..n)
            .map(|i| TargetEdge {
                from: labels[i].clone(),
                to: labels[(i + 1) % n].clone(),
                winrate,
            })
            .collect();
        Self::new(labels, edges)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[TargetEdge] {
        &self.edges
    }

    fn index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| MetagameError::UnknownNode(label.to_string()))
    }

    fn winrate_rows(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.labels.len();
        let mut rows = vec![vec![0.5; n]; n];
        let mut declared = vec![vec![false; n]; n];
        for edge in &self.edges {
            let (i, j) = (self.index(&edge.from)?, self.index(&edge.to)?);
            if i == j {
                return Err(MetagameError::SelfLoop(edge.from.clone()));
            }
            if !(0.0..=1.0).contains(&edge.winrate) {
                return Err(MetagameError::WinRateOutOfRange {
                    row: i,
                    col: j,
                    value: edge.winrate,
                });
            }
            if declared[j][i] && (rows[j][i] + edge.winrate - 1.0).abs() > SYMMETRY_TOLERANCE {
                return Err(MetagameError::InconsistentTarget {
                    from: edge.from.clone(),
                    to: edge.to.clone(),
                    forward: edge.winrate,
                    backward: rows[j][i],
                });
            }
            if declared[i][j] && (rows[i][j] - edge.winrate).abs() > SYMMETRY_TOLERANCE {
                return Err(MetagameError::InconsistentTarget {
                    from: edge.from.clone(),
                    to: edge.to.clone(),
                    forward: edge.winrate,
                    backward: 1.0 - rows[i][j],
                });
            }
            rows[i][j] = edge.winrate;
            rows[j][i] = 1.0 - edge.winrate;
            declared[i][j] = true;
            declared[j][i] = true;
        }
        Ok(rows)
    }

    /// Target win-rate matrix with defaults filled in.
    pub fn winrates(&self) -> WinRateMatrix {
        let rows = self.winrate_rows().expect("validated on construction");
        WinRateMatrix::new(self.labels.clone(), rows).expect("square by construction")
    }

    /// Every edge `(i, j, w)` replaced by `(j, i, 1 - w)`.
    pub fn reversed_complement(&self) -> Self {
        Self {
            labels: self.labels.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| TargetEdge {
                    from: e.to.clone(),
                    to: e.from.clone(),
                    winrate: 1.0 - e.winrate,
                })
                .collect(),
        }
    }
}

pub fn target_to_response_graph(target: &TargetGraph) -> Result<ResponseGraph> {
    Ok(response_graph(&center_winrates(&target.winrates())?))
}
