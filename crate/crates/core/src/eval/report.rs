//! Per-sample benchmark rows and their mean/median/max summary.

use std::io;

use serde::{Deserialize, Serialize};

use super::{
    dtw_rmse, knn_rmse, sequential_rmse, trajectory_length_m, EvalError, Method, MetricResult,
    Trajectory,
};

type Pick = fn(&Summary) -> f64;

/// Evaluation of one generated trajectory against its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub name: String,
    pub generated_length_m: f64,
    pub truth_length_m: f64,
    pub knn: MetricResult,
    pub dtw: MetricResult,
    pub sequential: MetricResult,
}

impl SampleResult {
    /// Runs every metric. The DTW alignment path is dropped to keep reports
    /// compact.
    pub fn evaluate(
        name: impl Into<String>,
        generated: &Trajectory,
        truth: &Trajectory,
    ) -> Result<Self, EvalError> {
        let mut dtw = dtw_rmse(generated, truth)?;
        dtw.path = None;
        Ok(Self {
            name: name.into(),
            generated_length_m: trajectory_length_m(generated),
            truth_length_m: trajectory_length_m(truth),
            knn: knn_rmse(generated, truth)?,
            dtw,
            sequential: sequential_rmse(generated, truth)?,
        })
    }

    pub fn metric(&self, method: Method) -> &MetricResult {
        match method {
            Method::Knn => &self.knn,
            Method::Dtw => &self.dtw,
            Method::Sequential => &self.sequential,
        }
    }
}

/// A sample that could not be evaluated, with the stage that failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub name: String,
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl Summary {
    /// Summary statistics over a non-empty slice. The median of an even count
    /// is the midpoint of the two middle values.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        };
        Some(Self {
            mean,
            median,
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sample_count: usize,
    pub knn: Summary,
    pub dtw: Summary,
    pub sequential: Summary,
    pub generated_total_m: f64,
    pub truth_total_m: f64,
    /// `(generated_total - truth_total) / truth_total * 100`.
    pub length_delta_pct: f64,
    /// Samples whose generated path is shorter than the ground truth.
    pub shorter_than_truth: usize,
}

impl Aggregate {
    pub fn summary(&self, method: Method) -> &Summary {
        match method {
            Method::Knn => &self.knn,
            Method::Dtw => &self.dtw,
            Method::Sequential => &self.sequential,
        }
    }
}

/// Relative length difference in percent.
pub fn percent_delta(generated_total: f64, truth_total: f64) -> f64 {
    (generated_total - truth_total) / truth_total * 100.0
}

pub fn aggregate(rows: &[SampleResult]) -> Result<Aggregate, EvalError> {
    let stats = |method: Method| {
        let values: Vec<f64> = rows.iter().map(|r| r.metric(method).rmse_m).collect();
        Summary::of(&values).ok_or(EvalError::NoSamples)
    };
    let generated_total_m: f64 = rows.iter().map(|r| r.generated_length_m).sum();
    let truth_total_m: f64 = rows.iter().map(|r| r.truth_length_m).sum();
    Ok(Aggregate {
        sample_count: rows.len(),
        knn: stats(Method::Knn)?,
        dtw: stats(Method::Dtw)?,
        sequential: stats(Method::Sequential)?,
        generated_total_m,
        truth_total_m,
        length_delta_pct: percent_delta(generated_total_m, truth_total_m),
        shorter_than_truth: rows
            .iter()
            .filter(|r| r.generated_length_m < r.truth_length_m)
            .count(),
    })
}

/// Full benchmark outcome. Rows are kept sorted by sample name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: Vec<SampleResult>,
    pub failures: Vec<SampleFailure>,
    pub aggregate: Option<Aggregate>,
}

impl EvalReport {
    pub fn new(mut samples: Vec<SampleResult>, mut failures: Vec<SampleFailure>) -> Self {
        samples.sort_by(|a, b| a.name.cmp(&b.name));
        failures.sort_by(|a, b| a.name.cmp(&b.name));
        let aggregate = aggregate(&samples).ok();
        Self {
            samples,
            failures,
            aggregate,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// Writes the Mean/Median/Max by KNN/DTW/Sequential table as CSV.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["metric", "knn_m", "dtw_m", "sequential_m"])?;
        if let Some(agg) = &self.aggregate {
            let rows: [(&str, Pick); 3] = [
                ("Mean", |s| s.mean),
                ("Median", |s| s.median),
                ("Max", |s| s.max),
            ];
            for (label, pick) in rows {
                let mut record = vec![label.to_string()];
                for method in Method::ALL {
                    record.push(format!("{:.2}", pick(agg.summary(method))));
                }
                out.write_record(&record)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    /// Human-readable summary table.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let Some(agg) = &self.aggregate else {
            s.push_str("no samples evaluated\n");
            return s;
        };
        s.push_str(&format!(
            "{:<14}{:>12}{:>12}{:>16}\n",
            "Metric (RMSE)", "KNN (m)", "DTW (m)", "Sequential (m)"
        ));
        for (label, pick) in [
            ("Mean", (|x: &Summary| x.mean) as fn(&Summary) -> f64),
            ("Median", |x| x.median),
            ("Max", |x| x.max),
        ] {
            s.push_str(&format!(
                "{:<14}{:>12.2}{:>12.2}{:>16.2}\n",
                label,
                pick(&agg.knn),
                pick(&agg.dtw),
                pick(&agg.sequential)
            ));
        }
        s.push_str(&format!(
            "samples: {} evaluated, {} failed\n",
            agg.sample_count,
            self.failures.len()
        ));
        s.push_str(&format!(
            "total length: generated {:.2} km, truth {:.2} km, delta {:+.2}%\n",
            agg.generated_total_m / 1000.0,
            agg.truth_total_m / 1000.0,
            agg.length_delta_pct
        ));
        s.push_str(&format!(
            "generated shorter than truth: {} of {}\n",
            agg.shorter_than_truth, agg.sample_count
        ));
        s
    }
}
