//! Output document shared by every subcommand, with JSON and CSV encodings
//! that round-trip exactly.

use std::io::{self, Write};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use serde_json::Value;

use evdom_core::io::format_f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub param: f64,
    pub margin: f64,
    pub pass: bool,
    pub series: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    /// What the run verifies, in words.
    pub anchor: String,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: Value,
    pub verdicts: Value,
    pub samples: Vec<SampleRow>,
    pub witnesses: Vec<Value>,
    pub provenance: ReportProvenance,
    pub sub_reports: Vec<Value>,
    pub data: Value,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Writes every float as 17 significant digits in lowercase scientific notation.
struct Sci<F>(F);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl<F: Formatter> Formatter for Sci<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

fn to_json_with<F: Formatter, T: Serialize>(value: &T, formatter: F) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sci(formatter));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf)?)
}

pub fn to_json_compact<T: Serialize>(value: &T) -> Result<String> {
    to_json_with(value, CompactFormatter)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    to_json_with(value, PrettyFormatter::new())
}

const PREAMBLE: [&str; 7] = [
    "config",
    "verdicts",
    "witnesses",
    "provenance",
    "sub_reports",
    "data",
    "pass",
];

impl Report {
    pub fn to_json(&self) -> Result<String> {
        let mut s = to_json_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("malformed JSON report")
    }

    /// `# section <json>` lines, then one CSV row per sample.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        let doc = serde_json::to_value(self)?;
        for key in PREAMBLE {
            out.push_str(&format!("# {key} {}\n", to_json_compact(&doc[key])?));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["param", "margin", "pass", "series"])?;
        for s in &self.samples {
            w.write_record([
                format_f64(s.param),
                format_f64(s.margin),
                s.pass.to_string(),
                s.series.clone(),
            ])?;
        }
        out.push_str(std::str::from_utf8(&w.into_inner()?)?);
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut doc = serde_json::Map::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (key, json) = rest
                    .split_once(' ')
                    .ok_or_else(|| anyhow!("malformed preamble line: {line}"))?;
                doc.insert(key.to_string(), serde_json::from_str(json)?);
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        for key in PREAMBLE {
            if !doc.contains_key(key) {
                bail!("CSV report lacks the {key} section");
            }
        }
        let mut samples = Vec::new();
        let mut r = csv::Reader::from_reader(body.as_bytes());
        for row in r.deserialize() {
            let row: SampleRow = row?;
            samples.push(row);
        }
        doc.insert("samples".into(), serde_json::to_value(samples)?);
        Ok(serde_json::from_value(Value::Object(doc))?)
    }

    pub fn encode(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample_report() -> Report {
        Report {
            config: json!({ "command": "check", "n": 64, "eps": 1e-10 }),
            verdicts: json!({ "verdict": "eventual_domination_observed", "earliest_pass": 0.1916714545788873 }),
            samples: vec![
                SampleRow { param: 0.01, margin: -0.25, pass: false, series: "uniform".into() },
                SampleRow { param: 1.0 / 3.0, margin: 1e-300, pass: true, series: "a,b".into() },
            ],
            witnesses: vec![json!({ "param": 0.01, "node_index": 3 })],
            provenance: ReportProvenance { anchor: "test".into(), tolerance: 1e-10 },
            sub_reports: vec![],
            data: Value::Null,
            pass: true,
        }
    }

    #[test]
    fn floats_use_scientific_notation() {
        let s = to_json_compact(&json!({ "x": 0.5, "n": 3 })).unwrap();
        assert_eq!(s, r#"{"n":3,"x":5.0000000000000000e-1}"#);
    }

    #[test]
    fn json_round_trip() {
        let r = sample_report();
        assert_eq!(Report::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn csv_round_trip() {
        let r = sample_report();
        let text = r.to_csv().unwrap();
        assert!(text.lines().any(|l| l == "param,margin,pass,series"));
        assert_eq!(Report::from_csv(&text).unwrap(), r);
    }
}
