//! CSV ingestion with one-hot encoding of categorical columns.
//!
//! A column is numeric when every value parses as a float, otherwise it is
//! categorical and expanded to one indicator per distinct value (sorted
//! lexicographically, `?` counts as its own value). Missing values in
//! numeric columns are an error; drop such columns with `drop_columns`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::task::RawDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Column name, or its 0-based index when there is no header.
    pub label_column: String,
    pub drop_columns: Vec<String>,
    /// Trailing characters stripped from label values (e.g. `"."`).
    #[serde(default)]
    pub label_trim: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
            label_column: "label".into(),
            drop_columns: vec![],
            label_trim: String::new(),
        }
    }
}

impl CsvOptions {
    /// UCI Adult (`adult.data` / `adult.test`, no header, income in column 14).
    pub fn adult() -> Self {
        Self {
            delimiter: b',',
            has_header: false,
            label_column: "14".into(),
            drop_columns: vec![],
            label_trim: ".".into(),
        }
    }

    /// UCI Internet Advertisements (`ad.data`, no header, class in column
    /// 1558, first four columns have missing values and are dropped).
    pub fn ads() -> Self {
        Self {
            delimiter: b',',
            has_header: false,
            label_column: "1558".into(),
            drop_columns: (0..4).map(|i| i.to_string()).collect(),
            label_trim: String::new(),
        }
    }
}

fn is_missing(v: &str) -> bool {
    v.is_empty() || v == "?"
}

/// Reads one or more CSV files sharing a schema. Categorical vocabularies are
/// built over all files so the encoding is identical across them.
pub fn load_csv(paths: &[&Path], options: &CsvOptions) -> Result<RawDataset> {
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for path in paths {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(options.delimiter)
            .has_headers(options.has_header)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let names: Vec<String> = if options.has_header {
            reader.headers()?.iter().map(str::to_string).collect()
        } else {
            Vec::new()
        };
        for rec in reader.records() {
            let rec = rec?;
            if rec.is_empty() || (rec.len() == 1 && rec[0].is_empty()) || rec[0].starts_with('|') {
                continue;
            }
            rows.push(rec.iter().map(str::to_string).collect());
        }
        let names = if options.has_header {
            names
        } else {
            (0..rows.first().map_or(0, Vec::len))
                .map(|i| i.to_string())
                .collect()
        };
        match &header {
            Some(h) if *h != names && options.has_header => {
                return Err(Error::Data(format!(
                    "{}: header differs from the first file",
                    path.display()
                )))
            }
            None => header = Some(names),
            _ => {}
        }
    }
    let header = header.ok_or_else(|| Error::Data("no CSV files given".into()))?;
    if rows.is_empty() {
        return Err(Error::Data("CSV input has no rows".into()));
    }
    if let Some((i, r)) = rows
        .iter()
        .enumerate()
        .find(|(_, r)| r.len() != header.len())
    {
        return Err(Error::Data(format!(
            "row {i} has {} fields, expected {}",
            r.len(),
            header.len()
        )));
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column {name:?} not found")))
    };
    let label_col = find(&options.label_column)?;
    let mut dropped = options
        .drop_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<BTreeSet<usize>>>()?;
    dropped.insert(label_col);

    enum Encoding {
        Numeric,
        Categories(Vec<String>),
    }
    let mut encodings = Vec::new();
    for c in (0..header.len()).filter(|c| !dropped.contains(c)) {
        let numeric = rows
            .iter()
            .all(|r| is_missing(&r[c]) || r[c].parse::<f64>().is_ok())
            && rows.iter().any(|r| !is_missing(&r[c]));
        if numeric {
            if rows.iter().any(|r| is_missing(&r[c])) {
                return Err(Error::Data(format!(
                    "numeric column {:?} has missing values",
                    header[c]
                )));
            }
            encodings.push((c, Encoding::Numeric));
        } else {
            let cats: BTreeSet<&str> = rows.iter().map(|r| r[c].as_str()).collect();
            encodings.push((
                c,
                Encoding::Categories(cats.into_iter().map(str::to_string).collect()),
            ));
        }
    }
    let dim: usize = encodings
        .iter()
        .map(|(_, e)| match e {
            Encoding::Numeric => 1,
            Encoding::Categories(c) => c.len(),
        })
        .sum();
    if dim == 0 {
        return Err(Error::Data("no feature columns left".into()));
    }
    let mut features = Vec::with_capacity(rows.len() * dim);
    for r in &rows {
        for (c, e) in &encodings {
            match e {
                Encoding::Numeric => features.push(r[*c].parse::<f64>().expect("checked numeric")),
                Encoding::Categories(cats) => {
                    features.extend(cats.iter().map(|v| if *v == r[*c] { 1.0 } else { 0.0 }))
                }
            }
        }
    }
    let classes = rows
        .iter()
        .map(|r| {
            r[label_col]
                .trim_end_matches(|ch| options.label_trim.contains(ch))
                .to_string()
        })
        .collect();
    Ok(RawDataset {
        features,
        dim,
        classes,
        sources: paths.iter().map(|p| p.display().to_string()).collect(),
    })
}
