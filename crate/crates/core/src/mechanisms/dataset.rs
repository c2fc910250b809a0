//! Tabular datasets and 1-Lipschitz query scripts.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numeric table with named columns. Adjacent datasets differ in one row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(r) = rows.iter().position(|r| r.len() != columns.len()) {
            return Err(Error::Dataset(format!("row {} has {} values for {} columns", r + 1, rows[r].len(), columns.len())));
        }
        Ok(Dataset { columns, rows })
    }

    /// Reads CSV with a header line, keeping the `numeric` columns (all
    /// columns when empty).
    pub fn from_csv_reader<R: Read>(reader: R, numeric: &[&str]) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        let wanted: Vec<String> = if numeric.is_empty() {
            header.iter().map(str::to_owned).collect()
        } else {
            numeric.iter().map(|s| s.to_string()).collect()
        };
        let idx: Vec<usize> = wanted
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| Error::Dataset(format!("missing column {c:?}")))
            })
            .collect::<Result<_>>()?;
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = idx
                .iter()
                .map(|&i| {
                    let cell = rec.get(i).unwrap_or("").trim();
                    cell.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Dataset(format!("line {}: {cell:?} in column {:?} is not a number", line + 2, header[i].to_string())))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Dataset::new(wanted, rows)
    }

    pub fn from_csv_path(path: &Path, numeric: &[&str]) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_csv_reader(f, numeric).map_err(|e| match e {
            Error::Dataset(m) => Error::Dataset(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Dataset(format!("unknown column {name:?}")))
    }

    /// Evaluates a statistic on this dataset.
    pub fn eval(&self, stat: &Statistic) -> Result<f64> {
        match stat {
            Statistic::Count { column, op, value } => {
                let c = self.column(column)?;
                Ok(self.rows.iter().filter(|r| op.holds(r[c], *value)).count() as f64)
            }
            Statistic::Sum { column, lo, hi } => {
                let c = self.column(column)?;
                let scale = stat.scale()?;
                Ok(self.rows.iter().map(|r| r[c].clamp(*lo, *hi)).sum::<f64>() / scale)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl Comparison {
    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Comparison::Lt => a < b,
            Comparison::Le => a <= b,
            Comparison::Gt => a > b,
            Comparison::Ge => a >= b,
            Comparison::Eq => a == b,
            Comparison::Ne => a != b,
        }
    }
}

/// A statistic with sensitivity at most 1 under adding, removing or
/// replacing one row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// Number of rows with `column op value`.
    Count { column: String, op: Comparison, value: f64 },
    /// `Σ clamp(x, lo, hi)`, divided by `max(|lo|, |hi|, hi - lo)` so that
    /// one row moves it by at most 1.
    Sum { column: String, lo: f64, hi: f64 },
}

impl Statistic {
    fn scale(&self) -> Result<f64> {
        match self {
            Statistic::Count { .. } => Ok(1.0),
            Statistic::Sum { lo, hi, .. } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::Dataset(format!("clamp range [{lo}, {hi}] is empty or unbounded")));
                }
                Ok(lo.abs().max(hi.abs()).max(hi - lo))
            }
        }
    }
}

/// One scripted query: a statistic and a guess of its value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedQuery {
    #[serde(flatten)]
    pub statistic: Statistic,
    pub guess: f64,
    /// When answered WRONG with estimate `v`, ask the same statistic again
    /// with guess `v` before moving on.
    #[serde(default)]
    pub retry: bool,
}

/// A deterministic adversary: the next query depends only on earlier
/// answers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryScript {
    pub format_version: u32,
    pub queries: Vec<ScriptedQuery>,
}

pub const SCRIPT_FORMAT_VERSION: u32 = 1;

impl QueryScript {
    pub fn new(queries: Vec<ScriptedQuery>) -> Self {
        QueryScript {
            format_version: SCRIPT_FORMAT_VERSION,
            queries,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: QueryScript = serde_json::from_str(text)
            .map_err(|e| Error::Dataset(format!("query script line {} column {}: {e}", e.line(), e.column())))?;
        if s.format_version != SCRIPT_FORMAT_VERSION {
            return Err(Error::Dataset(format!("unsupported query script format_version {}", s.format_version)));
        }
        for q in &s.queries {
            q.statistic.scale()?;
        }
        Ok(s)
    }

    /// Evaluates every statistic once per dataset.
    pub fn true_values(&self, data: &Dataset) -> Result<Vec<f64>> {
        let mut cache: HashMap<String, f64> = HashMap::new();
        self.queries
            .iter()
            .map(|q| {
                let key = format!("{:?}", q.statistic);
                if let Some(&v) = cache.get(&key) {
                    return Ok(v);
                }
                let v = data.eval(&q.statistic)?;
                cache.insert(key, v);
                Ok(v)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "age,income,name\n30,10,a\n45,20,b\n52,200,c\n";

    #[test]
    fn csv_and_queries() {
        let d = Dataset::from_csv_reader(CSV.as_bytes(), &["age", "income"]).unwrap();
        assert_eq!(d.len(), 3);
        let c = Statistic::Count {
            column: "age".into(),
            op: Comparison::Ge,
            value: 45.0,
        };
        assert_eq!(d.eval(&c).unwrap(), 2.0);
        let s = Statistic::Sum {
            column: "income".into(),
            lo: 0.0,
            hi: 50.0,
        };
        assert_eq!(d.eval(&s).unwrap(), 80.0 / 50.0);
    }

    #[test]
    fn non_numeric_column_is_reported_with_line() {
        let e = Dataset::from_csv_reader(CSV.as_bytes(), &[]).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn script_round_trip() {
        let text = r#"{"format_version":1,"queries":[
            {"kind":"count","column":"age","op":">=","value":40,"guess":2},
            {"kind":"sum","column":"income","lo":0,"hi":1,"guess":1.5,"retry":true}]}"#;
        let s = QueryScript::from_json(text).unwrap();
        assert_eq!(s.queries.len(), 2);
        assert!(s.queries[1].retry);
        let back = QueryScript::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn sensitivity_of_neighbors() {
        let d0 = Dataset::from_csv_reader(CSV.as_bytes(), &["age", "income"]).unwrap();
        let d1 = Dataset::from_csv_reader("age,income\n30,10\n45,20\n".as_bytes(), &[]).unwrap();
        let s = Statistic::Sum {
            column: "income".into(),
            lo: -5.0,
            hi: 50.0,
        };
        assert!((d0.eval(&s).unwrap() - d1.eval(&s).unwrap()).abs() <= 1.0);
    }
}
