//! Trajectory comparison: path lengths and the three RMSE alignments
//! (step-by-step, dynamic time warping, nearest neighbor), plus benchmark
//! aggregation in [`report`].
//!
//! Metric distances are planar: every point is projected with
//! [`local_xy_m`] around the first ground-truth point. Lengths use the
//! great-circle distance.

mod kdtree;
pub mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_m, local_xy_m, GeoError, GeoPoint};

use self::kdtree::KdTree;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("trajectory must contain at least one point")]
    EmptyTrajectory,
    #[error("trajectory repeats point {index} consecutively")]
    ConsecutiveDuplicate { index: usize },
    #[error("cannot project trajectory point: {0}")]
    Projection(#[from] GeoError),
    #[error("aggregation needs at least one evaluated sample")]
    NoSamples,
}

/// Ordered, non-empty sequence of positions with no two consecutive points
/// equal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    points: Vec<GeoPoint>,
}

impl Trajectory {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self, EvalError> {
        if points.is_empty() {
            return Err(EvalError::EmptyTrajectory);
        }
        if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(EvalError::ConsecutiveDuplicate { index: i + 1 });
        }
        Ok(Self { points })
    }

    /// Builds a trajectory, dropping points equal to their predecessor.
    pub fn collapsing(mut points: Vec<GeoPoint>) -> Result<Self, EvalError> {
        points.dedup();
        Self::new(points)
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> GeoPoint {
        self.points[0]
    }

    pub fn last(&self) -> GeoPoint {
        self.points[self.points.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sequential,
    Dtw,
    Knn,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Knn, Method::Dtw, Method::Sequential];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sequential => "sequential",
            Method::Dtw => "dtw",
            Method::Knn => "knn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sequential" | "seq" => Ok(Method::Sequential),
            "dtw" => Ok(Method::Dtw),
            "knn" => Ok(Method::Knn),
            other => Err(format!("unknown metric '{other}'")),
        }
    }
}

/// Outcome of one trajectory comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub method: Method,
    pub rmse_m: f64,
    /// Number of point pairs entering the mean.
    pub matched_pairs: usize,
    /// Sum of squared planar distances over the matched pairs, in m².
    pub total_sq_m2: f64,
    /// Set by the sequential method when the two trajectories differ in length.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub length_mismatch: bool,
    /// Alignment as `(generated index, truth index)` pairs, DTW only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<(usize, usize)>>,
}

impl MetricResult {
    fn from_sum(method: Method, total_sq_m2: f64, matched_pairs: usize) -> Self {
        Self {
            method,
            rmse_m: (total_sq_m2 / matched_pairs as f64).sqrt(),
            matched_pairs,
            total_sq_m2,
            length_mismatch: false,
            path: None,
        }
    }
}

/// Sum of great-circle distances between consecutive points.
pub fn trajectory_length_m(t: &Trajectory) -> f64 {
    t.points.windows(2).map(|w| haversine_m(w[0], w[1])).sum()
}

type Planar = Vec<(f64, f64)>;

fn project(t: &Trajectory, origin: GeoPoint) -> Result<Planar, GeoError> {
    t.points.iter().map(|&p| local_xy_m(p, origin)).collect()
}

fn projected_pair(
    generated: &Trajectory,
    truth: &Trajectory,
) -> Result<(Planar, Planar), EvalError> {
    let origin = truth.first();
    Ok((project(generated, origin)?, project(truth, origin)?))
}

#[inline]
fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

/// Pairs points by index up to the shorter trajectory's length.
pub fn sequential_rmse(
    generated: &Trajectory,
    truth: &Trajectory,
) -> Result<MetricResult, EvalError> {
    let (g, t) = projected_pair(generated, truth)?;
    let n = g.len().min(t.len());
    let total: f64 = g.iter().zip(&t).map(|(&a, &b)| sq_dist(a, b)).sum();
    let mut result = MetricResult::from_sum(Method::Sequential, total, n);
    result.length_mismatch = g.len() != t.len();
    Ok(result)
}

/// Dynamic time warping with squared planar distance as the step cost and
/// steps (1,0), (0,1), (1,1). The RMSE divides the optimal cost by the
/// number of cells on the warping path.
///
/// Among equally cheap predecessors the backtrack prefers the diagonal, then
/// advancing the generated index alone.
pub fn dtw_rmse(generated: &Trajectory, truth: &Trajectory) -> Result<MetricResult, EvalError> {
    let (g, t) = projected_pair(generated, truth)?;
    let (total, path) = dtw_planar(&g, &t);
    let mut result = MetricResult::from_sum(Method::Dtw, total, path.len());
    result.path = Some(path);
    Ok(result)
}

fn dtw_planar(g: &[(f64, f64)], t: &[(f64, f64)]) -> (f64, Vec<(usize, usize)>) {
    let (n, m) = (g.len(), t.len());
    let cols = m + 1;
    let mut acc = vec![f64::INFINITY; (n + 1) * cols];
    acc[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let best = acc[(i - 1) * cols + (j - 1)]
                .min(acc[(i - 1) * cols + j])
                .min(acc[i * cols + (j - 1)]);
            acc[i * cols + j] = best + sq_dist(g[i - 1], t[j - 1]);
        }
    }
    let total = acc[n * cols + m];

    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    loop {
        path.push((i - 1, j - 1));
        if i == 1 && j == 1 {
            break;
        }
        let diag = acc[(i - 1) * cols + (j - 1)];
        let up = acc[(i - 1) * cols + j];
        let left = acc[i * cols + (j - 1)];
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    path.reverse();
    (total, path)
}

/// Matches every generated point to its nearest ground-truth point,
/// ignoring order. Several generated points may share one truth point.
pub fn knn_rmse(generated: &Trajectory, truth: &Trajectory) -> Result<MetricResult, EvalError> {
    let (g, t) = projected_pair(generated, truth)?;
    let tree = KdTree::build(&t);
    let total: f64 = g.iter().map(|&p| tree.nearest_sq(p)).sum();
    Ok(MetricResult::from_sum(Method::Knn, total, g.len()))
}

pub fn compute(
    method: Method,
    generated: &Trajectory,
    truth: &Trajectory,
) -> Result<MetricResult, EvalError> {
    match method {
        Method::Sequential => sequential_rmse(generated, truth),
        Method::Dtw => dtw_rmse(generated, truth),
        Method::Knn => knn_rmse(generated, truth),
    }
}
