//! Tabular experiment results and their CSV/JSON serializations.
//!
//! Every float is written twice: rounded to six significant digits under
//! the column name, and at full round-trip precision under `<name>_raw`.
//! Output depends only on the values, never on timing or worker count.

use std::fmt;
use std::str::FromStr;

use serde_json::{Map, Number, Value as Json};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Int(i64),
    Float(f64),
    Bool(bool),
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Int(x as i64)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Int(x)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}

/// Six significant digits, plain notation for moderate magnitudes.
pub fn fmt_sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding may carry into the next decade, so format once and re-check
    let s = format!("{:.5e}", x);
    let (_, e) = s.split_once('e').expect("exponent present");
    let exp = e.parse::<i32>().unwrap_or(exp);
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        s
    }
}

/// Shortest string that parses back to the same `f64`.
pub fn fmt_raw(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{:?}", x)
    }
}

impl Value {
    fn text(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Float(x) => fmt_sig6(*x),
            Value::Bool(b) => b.to_string(),
        }
    }

    fn raw_text(&self) -> String {
        match self {
            Value::Float(x) => fmt_raw(*x),
            other => other.text(),
        }
    }

    fn json(&self, rounded: bool) -> Json {
        match self {
            Value::Text(s) => Json::String(s.clone()),
            Value::Int(i) => Json::Number((*i).into()),
            Value::Bool(b) => Json::Bool(*b),
            Value::Float(x) => {
                let v = if rounded {
                    fmt_sig6(*x).parse::<f64>().unwrap_or(*x)
                } else {
                    *x
                };
                Number::from_f64(v).map_or(Json::Null, Json::Number)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width does not match table `{}`",
            self.name
        );
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    /// Looks up a cell by row index and column name.
    pub fn get(&self, row: usize, column: &str) -> Option<&Value> {
        let j = self.columns.iter().position(|c| c == column)?;
        self.rows.get(row)?.get(j)
    }

    /// Float cell by row label (first column) and column name.
    pub fn float(&self, label: &str, column: &str) -> Option<f64> {
        let i = self
            .rows
            .iter()
            .position(|r| matches!(&r[0], Value::Text(s) if s == label))?;
        match self.get(i, column)? {
            Value::Float(x) => Some(*x),
            Value::Int(k) => Some(*k as f64),
            _ => None,
        }
    }

    fn float_columns(&self) -> Vec<bool> {
        (0..self.columns.len())
            .map(|j| self.rows.iter().any(|r| matches!(r[j], Value::Float(_))))
            .collect()
    }

    fn header(&self) -> Vec<String> {
        let floats = self.float_columns();
        let mut h = Vec::new();
        for (c, f) in self.columns.iter().zip(floats) {
            h.push(c.clone());
            if f {
                h.push(format!("{c}_raw"));
            }
        }
        h
    }

    fn write_csv(&self, out: &mut Vec<u8>) -> Result<(), csv::Error> {
        out.extend_from_slice(format!("# {}\n", self.name).as_bytes());
        let floats = self.float_columns();
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(self.header())?;
        for row in &self.rows {
            let mut rec = Vec::new();
            for (v, &f) in row.iter().zip(&floats) {
                rec.push(v.text());
                if f {
                    rec.push(v.raw_text());
                }
            }
            w.write_record(rec)?;
        }
        out.extend(w.into_inner().map_err(|e| e.into_error())?);
        Ok(())
    }

    fn to_json(&self) -> Json {
        let floats = self.float_columns();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for ((c, v), &f) in self.columns.iter().zip(row).zip(&floats) {
                    m.insert(c.clone(), v.json(true));
                    if f {
                        m.insert(format!("{c}_raw"), v.json(false));
                    }
                }
                Json::Object(m)
            })
            .collect();
        Json::Array(rows)
    }
}

/// A named pass/fail assertion about a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown output format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: String,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            tables: Vec::new(),
            checks: Vec::new(),
        }
    }

    /// Adds a `parameter,value` table.
    pub fn with_params(mut self, params: Vec<(&str, Value)>) -> Self {
        let mut t = Table::new("parameters", &["parameter", "value"]);
        for (k, v) in params {
            t.push(vec![k.into(), v]);
        }
        self.tables.insert(0, t);
        self
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn checks_table(&self) -> Table {
        let mut t = Table::new("checks", &["check", "passed", "detail"]);
        for c in &self.checks {
            t.push(vec![c.name.as_str().into(), c.passed.into(), c.detail.as_str().into()]);
        }
        t
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# experiment: {}\n", self.experiment).into_bytes();
        let mut tables: Vec<&Table> = self.tables.iter().collect();
        let checks = self.checks_table();
        if !self.checks.is_empty() {
            tables.push(&checks);
        }
        for (k, t) in tables.iter().enumerate() {
            if k > 0 {
                out.push(b'\n');
            }
            t.write_csv(&mut out).expect("writing to memory cannot fail");
        }
        String::from_utf8(out).expect("CSV output is UTF-8")
    }

    pub fn to_json(&self) -> String {
        let mut root = Map::new();
        root.insert("experiment".into(), Json::String(self.experiment.clone()));
        let mut tables = Map::new();
        for t in &self.tables {
            tables.insert(t.name.clone(), t.to_json());
        }
        root.insert("tables".into(), Json::Object(tables));
        let checks = self
            .checks
            .iter()
            .map(|c| {
                let mut m = Map::new();
                m.insert("check".into(), Json::String(c.name.clone()));
                m.insert("passed".into(), Json::Bool(c.passed));
                m.insert("detail".into(), Json::String(c.detail.clone()));
                Json::Object(m)
            })
            .collect();
        root.insert("checks".into(), Json::Array(checks));
        let mut s = serde_json::to_string_pretty(&Json::Object(root)).expect("JSON values serialize");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig6(0.58331234), "0.583312");
        assert_eq!(fmt_sig6(3.3912345), "3.39123");
        assert_eq!(fmt_sig6(-0.84861), "-0.848610");
        assert_eq!(fmt_sig6(123456.7), "123457");
        assert_eq!(fmt_sig6(99999.97), "100000");
        assert_eq!(fmt_sig6(999999.7), "1.00000e6");
        assert_eq!(fmt_sig6(0.0000999999), "0.0000999999");
        assert_eq!(fmt_sig6(1.5e-7), "1.50000e-7");
        assert_eq!(fmt_sig6(0.0), "0");
        assert_eq!(fmt_sig6(f64::NAN), "NaN");
        assert_eq!(fmt_raw(0.1), "0.1");
    }

    fn sample() -> Report {
        let mut t = Table::new("observables", &["observable", "n", "mean"]);
        t.push(vec!["AB".into(), 10u64.into(), 0.123456789.into()]);
        t.push(vec!["A,B'".into(), 3u64.into(), (-1.0f64).into()]);
        let mut r = Report::new("demo").with_params(vec![("trials", 10u64.into()), ("s", 0.5.into())]);
        r.tables.push(t);
        r.checks.push(Check::new("ok", true, "fine"));
        r
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv();
        let expected = "# experiment: demo\n\
            # parameters\nparameter,value,value_raw\ntrials,10,10\ns,0.500000,0.5\n\n\
            # observables\nobservable,n,mean,mean_raw\nAB,10,0.123457,0.123456789\n\"A,B'\",3,-1.00000,-1.0\n\n\
            # checks\ncheck,passed,detail\nok,true,fine\n";
        assert_eq!(csv, expected);
    }

    #[test]
    fn json_has_rounded_and_raw_fields() {
        let v: Json = serde_json::from_str(&sample().to_json()).unwrap();
        let row = &v["tables"]["observables"][0];
        assert_eq!(row["mean"], 0.123457);
        assert_eq!(row["mean_raw"], 0.123456789);
        assert_eq!(row["n"], 10);
        assert_eq!(v["checks"][0]["passed"], true);
    }

    #[test]
    fn table_lookup() {
        let r = sample();
        let t = r.table("observables").unwrap();
        assert_eq!(t.float("AB", "mean"), Some(0.123456789));
        assert_eq!(t.float("AB", "n"), Some(10.0));
        assert!(t.float("XY", "mean").is_none());
    }
}
