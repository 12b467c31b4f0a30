//! Flat tabular form of estimator output: one CSV row or JSON object per
//! `(replicate, estimator)`, plus per-estimator summary tables.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::linear::{EstimateReport, Method};

pub const REPORT_COLUMNS: [&str; 12] = [
    "method",
    "sigma2",
    "tau2",
    "lambda",
    "h2",
    "converged",
    "log_objective",
    "wall_time_s",
    "seed",
    "replicate",
    "note",
    "alpha_hat",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(input(format!("unknown format '{other}'; expected csv or json"))),
        }
    }
}

/// Non-finite floats travel as the strings `inf`, `-inf` and `NaN` in JSON.
mod opt_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) if x.is_finite() => s.serialize_f64(*x),
            Some(x) => s.serialize_str(&x.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) => t.parse().map(Some).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    #[serde(with = "opt_f64")]
    pub sigma2: Option<f64>,
    #[serde(with = "opt_f64")]
    pub tau2: Option<f64>,
    #[serde(with = "opt_f64")]
    pub lambda: Option<f64>,
    #[serde(with = "opt_f64")]
    pub h2: Option<f64>,
    pub converged: bool,
    #[serde(with = "opt_f64")]
    pub log_objective: Option<f64>,
    pub wall_time_s: f64,
    pub seed: Option<u64>,
    pub replicate: Option<usize>,
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_hat: Option<Vec<f64>>,
}

impl ReportRow {
    pub fn from_report(r: &EstimateReport, seed: Option<u64>, replicate: Option<usize>) -> Self {
        Self {
            method: r.method,
            sigma2: r.sigma2(),
            tau2: r.tau2(),
            lambda: r.lambda,
            h2: r.h2,
            converged: r.converged,
            log_objective: r.log_objective,
            wall_time_s: r.wall_time_s,
            seed,
            replicate,
            note: r.note.clone(),
            alpha_hat: r.alpha_hat.clone(),
        }
    }

    /// Row recording an estimator that failed outright.
    pub fn failure(method: Method, err: &Error, seed: Option<u64>, replicate: Option<usize>) -> Self {
        Self {
            method,
            sigma2: None,
            tau2: None,
            lambda: None,
            h2: None,
            converged: false,
            log_objective: None,
            wall_time_s: 0.0,
            seed,
            replicate,
            note: Some(format!("error: {}", err.to_string().replace('\n', " "))),
            alpha_hat: None,
        }
    }

    pub fn value(&self, q: Quantity) -> Option<f64> {
        match q {
            Quantity::Sigma2 => self.sigma2,
            Quantity::Tau2 => self.tau2,
            Quantity::Lambda => self.lambda,
            Quantity::H2 => self.h2,
        }
    }

    fn value_mut(&mut self, q: Quantity) -> &mut Option<f64> {
        match q {
            Quantity::Sigma2 => &mut self.sigma2,
            Quantity::Tau2 => &mut self.tau2,
            Quantity::Lambda => &mut self.lambda,
            Quantity::H2 => &mut self.h2,
        }
    }

    /// Caps estimates above `20×truth` at `20×truth` and marks the row.
    pub fn truncate_20x(&mut self, truth: &Truth) {
        for q in Quantity::ALL {
            let Some(t) = truth.get(q) else { continue };
            let cap = 20.0 * t;
            let v = self.value_mut(q);
            if matches!(*v, Some(x) if x > cap) {
                *v = Some(cap);
                let note = format!("truncated_{}", q.as_str());
                self.note = Some(match self.note.take() {
                    Some(n) => format!("{n};{note}"),
                    None => note,
                });
            }
        }
    }

    /// Orders rows by replicate, then method.
    pub fn sort_key(&self) -> (usize, Method) {
        (self.replicate.unwrap_or(0), self.method)
    }
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// `α̂` as `[a;b;…]`; absent is the empty field.
fn fmt_alpha(v: &Option<Vec<f64>>) -> String {
    v.as_ref()
        .map(|a| format!("[{}]", a.iter().map(f64::to_string).collect::<Vec<_>>().join(";")))
        .unwrap_or_default()
}

fn parse_alpha(field: &str, line: u64) -> Result<Option<Vec<f64>>> {
    if field.is_empty() {
        return Ok(None);
    }
    let bad = || input(format!("line {line}, column alpha_hat: cannot parse '{field}'"));
    let inner = field.strip_prefix('[').and_then(|f| f.strip_suffix(']')).ok_or_else(bad)?;
    if inner.is_empty() {
        return Ok(Some(Vec::new()));
    }
    inner.split(';').map(|v| v.parse().map_err(|_| bad())).collect::<Result<Vec<f64>>>().map(Some)
}

fn parse_opt<T: FromStr>(field: &str, column: &str, line: u64) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| input(format!("line {line}, column {column}: cannot parse '{field}'")))
}

pub fn write_rows_csv<W: Write>(rows: &[ReportRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_COLUMNS).map_err(csv_err)?;
    for r in rows {
        out.write_record([
            r.method.to_string(),
            fmt_opt(&r.sigma2),
            fmt_opt(&r.tau2),
            fmt_opt(&r.lambda),
            fmt_opt(&r.h2),
            r.converged.to_string(),
            fmt_opt(&r.log_objective),
            r.wall_time_s.to_string(),
            fmt_opt(&r.seed),
            fmt_opt(&r.replicate),
            r.note.clone().unwrap_or_default(),
            fmt_alpha(&r.alpha_hat),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(r: R) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(REPORT_COLUMNS) {
        return Err(input(format!("unexpected header; expected {}", REPORT_COLUMNS.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i: usize| rec.get(i).unwrap_or("");
        rows.push(ReportRow {
            method: f(0).parse().map_err(|e: String| input(format!("line {line}: {e}")))?,
            sigma2: parse_opt(f(1), "sigma2", line)?,
            tau2: parse_opt(f(2), "tau2", line)?,
            lambda: parse_opt(f(3), "lambda", line)?,
            h2: parse_opt(f(4), "h2", line)?,
            converged: parse_opt(f(5), "converged", line)?.unwrap_or(false),
            log_objective: parse_opt(f(6), "log_objective", line)?,
            wall_time_s: parse_opt(f(7), "wall_time_s", line)?.unwrap_or(0.0),
            seed: parse_opt(f(8), "seed", line)?,
            replicate: parse_opt(f(9), "replicate", line)?,
            note: Some(f(10)).filter(|s| !s.is_empty()).map(str::to_string),
            alpha_hat: parse_alpha(f(11), line)?,
        });
    }
    Ok(rows)
}

pub fn write_rows_json<W: Write>(rows: &[ReportRow], mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, rows).map_err(|e| Error::Numeric(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

pub fn read_rows_json<R: Read>(r: R) -> Result<Vec<ReportRow>> {
    serde_json::from_reader(r).map_err(|e| input(format!("invalid report JSON: {e}")))
}

pub fn write_rows<W: Write>(rows: &[ReportRow], format: Format, w: W) -> Result<()> {
    match format {
        Format::Csv => write_rows_csv(rows, w),
        Format::Json => write_rows_json(rows, w),
    }
}

pub fn read_rows<R: Read>(format: Format, r: R) -> Result<Vec<ReportRow>> {
    match format {
        Format::Csv => read_rows_csv(r),
        Format::Json => read_rows_json(r),
    }
}

fn csv_err(e: csv::Error) -> Error {
    input(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Sigma2,
    Tau2,
    Lambda,
    H2,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Self::Sigma2, Self::Tau2, Self::Lambda, Self::H2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sigma2 => "sigma2",
            Self::Tau2 => "tau2",
            Self::Lambda => "lambda",
            Self::H2 => "h2",
        }
    }
}

/// True parameter values of a simulation, where defined.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Truth {
    pub sigma2: Option<f64>,
    pub tau2: Option<f64>,
    pub lambda: Option<f64>,
    pub h2: Option<f64>,
}

impl Truth {
    pub fn get(&self, q: Quantity) -> Option<f64> {
        match q {
            Quantity::Sigma2 => self.sigma2,
            Quantity::Tau2 => self.tau2,
            Quantity::Lambda => self.lambda,
            Quantity::H2 => self.h2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub quantity: Quantity,
    #[serde(with = "opt_f64")]
    pub truth: Option<f64>,
    #[serde(with = "opt_f64")]
    pub median: Option<f64>,
    #[serde(with = "opt_f64")]
    pub iqr: Option<f64>,
    #[serde(with = "opt_f64")]
    pub frac_above_20x: Option<f64>,
    /// Replicates with a usable value.
    pub count: usize,
    pub failures: usize,
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile(sorted: &[f64], prob: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

pub fn iqr(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    Some(quantile(&v, 0.75)? - quantile(&v, 0.25)?)
}

/// Median, IQR and fraction above `20×truth` of each quantity, per method.
/// Infinite values (e.g. `λ` at `τ² = 0`) count towards order statistics.
pub fn summarize(rows: &[ReportRow], truth: &Truth) -> Vec<SummaryRow> {
    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    let mut out = Vec::new();
    for m in methods {
        let mine: Vec<&ReportRow> = rows.iter().filter(|r| r.method == m).collect();
        for q in Quantity::ALL {
            let vals: Vec<f64> = mine.iter().filter_map(|r| r.value(q)).filter(|v| !v.is_nan()).collect();
            if vals.is_empty() && q != Quantity::Lambda {
                continue;
            }
            let t = truth.get(q);
            out.push(SummaryRow {
                method: m,
                quantity: q,
                truth: t,
                median: median(&vals),
                iqr: iqr(&vals),
                frac_above_20x: t
                    .filter(|_| !vals.is_empty())
                    .map(|t| vals.iter().filter(|&&v| v > 20.0 * t).count() as f64 / vals.len() as f64),
                count: vals.len(),
                failures: mine.len() - vals.len(),
            });
        }
    }
    out
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], format: Format, w: W) -> Result<()> {
    match format {
        Format::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, rows).map_err(|e| Error::Numeric(e.to_string()))?;
            writeln!(w)?;
        }
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["method", "quantity", "truth", "median", "iqr", "frac_above_20x", "count", "failures"])
                .map_err(csv_err)?;
            for r in rows {
                out.write_record([
                    r.method.to_string(),
                    r.quantity.as_str().to_string(),
                    fmt_opt(&r.truth),
                    fmt_opt(&r.median),
                    fmt_opt(&r.iqr),
                    fmt_opt(&r.frac_above_20x),
                    r.count.to_string(),
                    r.failures.to_string(),
                ])
                .map_err(csv_err)?;
            }
            out.flush()?;
        }
    }
    Ok(())
}
