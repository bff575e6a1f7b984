use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;

/// JSON has no NaN or infinities; they are written as `null` and read back as NaN.
mod nullable {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Two results are equal if every number agrees bitwise or both are NaN.
fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Uncertainty {
    /// Exact arithmetic; the uncertainty is zero.
    Exact,
    /// One standard error.
    StdError,
    /// Standard deviation over bootstrap replicates.
    BootstrapStd,
    /// Bootstrap spread combined with the finite-depth spread.
    Combined,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Metric {
    #[serde(with = "nullable")]
    pub value: f64,
    #[serde(with = "nullable")]
    pub uncertainty: f64,
    pub method: Uncertainty,
}

impl PartialEq for Metric {
    fn eq(&self, o: &Self) -> bool {
        same(self.value, o.value) && same(self.uncertainty, o.uncertainty) && self.method == o.method
    }
}

impl Metric {
    pub fn new(value: f64, uncertainty: f64, method: Uncertainty) -> Self {
        Self {
            value,
            uncertainty,
            method,
        }
    }

    pub fn exact(value: f64) -> Self {
        Self::new(value, 0.0, Uncertainty::Exact)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    #[serde(with = "nullable")]
    pub y: f64,
    /// Symmetric error bar; zero draws none.
    #[serde(with = "nullable")]
    pub err: f64,
}

impl PartialEq for Point {
    fn eq(&self, o: &Self) -> bool {
        same(self.x, o.x) && same(self.y, o.y) && same(self.err, o.err)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesStyle {
    Markers,
    Line,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub style: SeriesStyle,
    pub points: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plot {
    /// File stem of the rendered SVG and CSV.
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl Plot {
    /// `series,x,y,err` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("series,x,y,err\n");
        for ser in &self.series {
            for p in &ser.points {
                s.push_str(&format!("{},{},{},{}\n", ser.label, p.x, p.y, p.err));
            }
        }
        s
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub walkers: u64,
    pub walkers_per_second: f64,
}

impl PartialEq for Timing {
    fn eq(&self, o: &Self) -> bool {
        same(self.wall_seconds, o.wall_seconds)
            && self.walkers == o.walkers
            && same(self.walkers_per_second, o.walkers_per_second)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub inputs: ExperimentConfig,
    pub metrics: BTreeMap<String, Metric>,
    /// Pass/fail verdicts derived from the metrics.
    pub checks: BTreeMap<String, bool>,
    pub plots: Vec<Plot>,
    pub notes: Vec<String>,
    pub timing: Timing,
}

impl ExperimentResult {
    pub fn new(kind: ExperimentKind, inputs: &ExperimentConfig) -> Self {
        Self {
            kind,
            inputs: inputs.clone(),
            metrics: BTreeMap::new(),
            checks: BTreeMap::new(),
            plots: Vec::new(),
            notes: Vec::new(),
            timing: Timing {
                wall_seconds: 0.0,
                walkers: 0,
                walkers_per_second: 0.0,
            },
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, m: Metric) {
        self.metrics.insert(name.into(), m);
    }

    pub fn check(&mut self, name: impl Into<String>, ok: bool) {
        self.checks.insert(name.into(), ok);
    }

    /// Equality ignoring wall-clock fields.
    pub fn same_metrics(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.inputs == other.inputs
            && self.metrics == other.metrics
            && self.checks == other.checks
            && self.plots == other.plots
            && self.notes == other.notes
            && self.timing.walkers == other.timing.walkers
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result is plain data")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_values_round_trip() {
        let mut r = ExperimentResult::new(ExperimentKind::Harnack, &ExperimentConfig::default());
        r.metric("r_squared", Metric::new(f64::NAN, 0.0, Uncertainty::Exact));
        r.metric("q_hat", Metric::new(0.1 + 0.2, 1e-17, Uncertainty::StdError));
        r.plots.push(Plot {
            name: "p".into(),
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: true,
            series: vec![Series {
                label: "s".into(),
                style: SeriesStyle::Markers,
                points: vec![Point {
                    x: 1.0,
                    y: f64::INFINITY,
                    err: 0.0,
                }],
            }],
        });
        let back = ExperimentResult::from_json(&r.to_json()).unwrap();
        assert!(back.metrics["r_squared"].value.is_nan());
        assert_eq!(back.metrics["q_hat"].value.to_bits(), (0.1f64 + 0.2).to_bits());
        assert!(back.plots[0].series[0].points[0].y.is_nan());
        assert!(back.same_metrics(&ExperimentResult::from_json(&back.to_json()).unwrap()));
    }
}
