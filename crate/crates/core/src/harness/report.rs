//! Report records, JSON/CSV emission and the determinism hash.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::{LabError, Result};

pub const SCHEMA: &str = "lyaplab-report/1";

/// An extended real: finite values as JSON numbers, infinities as `"-inf"`/`"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtReal(pub f64);

impl ExtReal {
    pub fn vec(values: &[f64]) -> Vec<ExtReal> {
        values.iter().map(|&v| ExtReal(v)).collect()
    }

    pub fn to_text(self) -> String {
        format_ext(self.0)
    }
}

pub fn format_ext(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v.is_nan() {
        "nan".into()
    } else {
        // ryu shortest form, identical to the JSON number text
        serde_json::to_string(&v).expect("finite float")
    }
}

pub fn parse_ext(s: &str) -> Result<f64> {
    match s {
        "-inf" => Ok(f64::NEG_INFINITY),
        "inf" => Ok(f64::INFINITY),
        "nan" => Ok(f64::NAN),
        _ => s.parse().map_err(|_| LabError::InvalidArgument(format!("not an extended real: `{s}`"))),
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&format_ext(self.0))
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ExtReal;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or one of \"-inf\", \"inf\", \"nan\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ExtReal, E> {
                Ok(ExtReal(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ExtReal, E> {
                parse_ext(v).map(ExtReal).map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self))
            }
        }
        d.deserialize_any(V)
    }
}

/// Spectrum of one periodic orbit, with optional discrepancy and property margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRow {
    pub word: String,
    pub period: usize,
    pub spectrum: Vec<ExtReal>,
    pub discrepancy: Option<f64>,
    /// Named quantities specific to the experiment (margins, δ, tails).
    pub extra: Vec<(String, ExtReal)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicRow {
    pub values: Vec<ExtReal>,
    pub std_err: Vec<Option<f64>>,
    pub deflated: Vec<usize>,
    pub n_steps: usize,
    pub samples: usize,
    pub seed: u64,
}

/// One recurrence level of the main-theorem pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: u32,
    pub rho: f64,
    pub return_time: u64,
    pub word_prefix: String,
    pub spectrum: Vec<ExtReal>,
    pub errors: Vec<ExtReal>,
    pub discrepancy: f64,
    pub closing_ratio: f64,
}

/// A labelled curve, e.g. truncated Kingman integrals against n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, ExtReal)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    /// Acceptance criterion this verdict belongs to.
    pub criterion: u8,
    pub passed: bool,
    pub margin: ExtReal,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, criterion: u8, passed: bool, margin: f64, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.into(),
            criterion,
            passed,
            // + 0.0 turns a -0.0 margin into 0.0
            margin: ExtReal(margin + 0.0),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub orbits: Vec<OrbitRow>,
    pub ergodic: Option<ErgodicRow>,
    pub convergence: Vec<ConvergenceRow>,
    pub series: Vec<Series>,
    pub witnesses: Vec<String>,
    pub verdicts: Vec<Verdict>,
    /// Excluded from the determinism hash.
    pub wall_clock_s: f64,
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        ExperimentReport {
            schema: SCHEMA.into(),
            kind: config.kind,
            seed: config.seed,
            config: config.clone(),
            orbits: Vec::new(),
            ergodic: None,
            convergence: Vec::new(),
            series: Vec::new(),
            witnesses: Vec::new(),
            verdicts: Vec::new(),
            wall_clock_s: 0.0,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ExperimentReport = serde_json::from_str(text).map_err(|e| LabError::Config(format!("report: {e}")))?;
        if r.schema != SCHEMA {
            return Err(LabError::Config(format!("unsupported report schema `{}`", r.schema)));
        }
        Ok(r)
    }

    /// SHA-256 of the JSON report with the wall-clock field zeroed.
    pub fn determinism_hash(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_s = 0.0;
        hex::encode(Sha256::digest(r.to_json().as_bytes()))
    }

    /// Long-form table: one record per reported number.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["section", "key", "field", "value"]);
        let mut push = |section: &str, key: &str, field: &str, value: String| {
            t.rows.push(vec![section.into(), key.into(), field.into(), value]);
        };
        push("meta", "schema", "", self.schema.clone());
        push("meta", "kind", "", self.kind.name().into());
        push("meta", "seed", "", self.seed.to_string());
        push("meta", "hash", "", self.determinism_hash());
        for o in &self.orbits {
            push("orbit", &o.word, "period", o.period.to_string());
            for (i, g) in o.spectrum.iter().enumerate() {
                push("orbit", &o.word, &format!("gamma_{}", i + 1), g.to_text());
            }
            if let Some(d) = o.discrepancy {
                push("orbit", &o.word, "discrepancy", format_ext(d));
            }
            for (name, v) in &o.extra {
                push("orbit", &o.word, name, v.to_text());
            }
        }
        if let Some(e) = &self.ergodic {
            for (i, g) in e.values.iter().enumerate() {
                push("ergodic", "estimate", &format!("gamma_{}", i + 1), g.to_text());
                push(
                    "ergodic",
                    "estimate",
                    &format!("se_{}", i + 1),
                    e.std_err[i].map(format_ext).unwrap_or_default(),
                );
            }
            push("ergodic", "estimate", "n_steps", e.n_steps.to_string());
            push("ergodic", "estimate", "samples", e.samples.to_string());
        }
        for c in &self.convergence {
            let key = format!("k{}", c.level);
            push("convergence", &key, "return_time", c.return_time.to_string());
            for (i, g) in c.spectrum.iter().enumerate() {
                push("convergence", &key, &format!("gamma_{}", i + 1), g.to_text());
                push("convergence", &key, &format!("error_{}", i + 1), c.errors[i].to_text());
            }
            push("convergence", &key, "discrepancy", format_ext(c.discrepancy));
            push("convergence", &key, "closing_ratio", format_ext(c.closing_ratio));
        }
        for s in &self.series {
            for (x, y) in &s.points {
                push("series", &s.label, &format_ext(*x), y.to_text());
            }
        }
        for (i, w) in self.witnesses.iter().enumerate() {
            push("witness", &i.to_string(), "", w.clone());
        }
        for v in &self.verdicts {
            push("verdict", &v.name, "criterion", v.criterion.to_string());
            push("verdict", &v.name, "passed", v.passed.to_string());
            push("verdict", &v.name, "margin", v.margin.to_text());
        }
        t
    }

    pub fn to_csv(&self) -> String {
        self.to_table().to_csv()
    }
}

/// Header plus string rows; the CSV form of every emitted record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let columns = r
            .headers()
            .map_err(|e| LabError::Config(format!("csv: {e}")))?
            .iter()
            .map(String::from)
            .collect();
        let rows = r
            .records()
            .map(|rec| {
                rec.map(|rec| rec.iter().map(String::from).collect())
                    .map_err(|e| LabError::Config(format!("csv: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(Table { columns, rows })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::CocycleSpec;

    fn sample() -> ExperimentReport {
        let cfg = ExperimentConfig::new(ExperimentKind::CorollaryScan, 9, CocycleSpec::diagonal(&[2.0, 0.0]));
        let mut r = ExperimentReport::new(&cfg);
        r.orbits.push(OrbitRow {
            word: "01".into(),
            period: 2,
            spectrum: ExtReal::vec(&[2f64.ln(), f64::NEG_INFINITY]),
            discrepancy: Some(0.25),
            extra: vec![("margin".into(), ExtReal(0.1))],
        });
        r.verdicts.push(Verdict::new("bounded", 2, false, f64::NEG_INFINITY, "min is -inf"));
        r.wall_clock_s = 1.5;
        r
    }

    #[test]
    fn minus_infinity_is_a_string() {
        let j = sample().to_json();
        assert!(j.contains("\"-inf\""));
        assert!(j.contains("\"schema\": \"lyaplab-report/1\""));
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let j = sample().to_json();
        assert_eq!(ExperimentReport::from_json(&j).unwrap().to_json(), j);
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let c = sample().to_csv();
        assert!(c.starts_with("section,key,field,value\n"));
        assert_eq!(Table::from_csv(&c).unwrap().to_csv(), c);
    }

    #[test]
    fn hash_ignores_wall_clock() {
        let a = sample();
        let mut b = a.clone();
        b.wall_clock_s = 99.0;
        assert_eq!(a.determinism_hash(), b.determinism_hash());
        b.seed = 10;
        assert_ne!(a.determinism_hash(), b.determinism_hash());
    }
}
