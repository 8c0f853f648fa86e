//! Tabular classification datasets: loading (CSV / ARFF), holdout splits,
//! bootstrap samples and the missing-value policy.
//!
//! Categorical values and class labels are stored as indices into the
//! schema's category lists, which are ordered by first appearance unless an
//! ARFF header declares them explicitly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Token used for a missing categorical value; it becomes its own category.
pub const MISSING_TOKEN: &str = "?";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureDescriptor {
    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, FeatureKind::Numeric)
    }

    pub fn categories(&self) -> &[String] {
        match &self.kind {
            FeatureKind::Numeric => &[],
            FeatureKind::Categorical { categories } => categories,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureDescriptor>,
    pub class_name: String,
    pub class_labels: Vec<String>,
    /// Position of the class column in the source file.
    pub class_index: usize,
}

impl Schema {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn class_of(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|l| l == label)
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_labels.len() < 2 {
            return Err(Error::Schema(format!(
                "class column '{}' has {} distinct value(s), need at least 2",
                self.class_name,
                self.class_labels.len()
            )));
        }
        for f in &self.features {
            if let FeatureKind::Categorical { categories } = &f.kind {
                if categories.is_empty() {
                    return Err(Error::Schema(format!(
                        "categorical feature '{}' has no categories",
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One feature value. `Missing` only occurs for numeric features before
/// imputation; categorical gaps are mapped to the `?` category at load time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Numeric(f64),
    Categorical(u32),
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub values: Vec<Value>,
    /// Index into `Schema::class_labels`.
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    records: Vec<Record>,
}

impl Dataset {
    pub fn new(schema: Arc<Schema>, records: Vec<Record>) -> Result<Self> {
        schema.validate()?;
        for (i, r) in records.iter().enumerate() {
            check_record(&schema, r).map_err(|m| Error::Input(format!("record {i}: {m}")))?;
        }
        Ok(Self { schema, records })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn shared_schema(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &Record {
        &self.records[i]
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// New dataset with the given records (by index, repeats allowed),
    /// sharing this dataset's schema.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}

pub(crate) fn check_record(schema: &Schema, r: &Record) -> std::result::Result<(), String> {
    if r.values.len() != schema.n_features() {
        return Err(format!(
            "expected {} feature values, found {}",
            schema.n_features(),
            r.values.len()
        ));
    }
    if r.label >= schema.n_classes() {
        return Err(format!("class index {} out of range", r.label));
    }
    for (f, v) in schema.features.iter().zip(&r.values) {
        match (&f.kind, v) {
            (FeatureKind::Numeric, Value::Numeric(_) | Value::Missing) => {}
            (FeatureKind::Categorical { categories }, Value::Categorical(c))
                if (*c as usize) < categories.len() => {}
            _ => return Err(format!("value {v:?} does not fit feature '{}'", f.name)),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Arff,
}

impl DataFormat {
    pub fn from_path(path: &Path) -> DataFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("arff") => DataFormat::Arff,
            _ => DataFormat::Csv,
        }
    }
}

/// Which column holds the class. Defaults to the last column.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum ClassColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

impl ClassColumn {
    /// Parses a CLI value: a column name, or a 0-based index.
    pub fn parse(s: &str) -> ClassColumn {
        match s.parse::<usize>() {
            Ok(i) => ClassColumn::Index(i),
            Err(_) if s == "last" => ClassColumn::Last,
            Err(_) => ClassColumn::Name(s.to_string()),
        }
    }

    fn resolve(&self, names: &[String]) -> Result<usize> {
        match self {
            ClassColumn::Last => Ok(names.len() - 1),
            ClassColumn::Index(i) if *i < names.len() => Ok(*i),
            ClassColumn::Index(i) => Err(Error::Config(format!(
                "class column {i} out of range ({} columns)",
                names.len()
            ))),
            ClassColumn::Name(n) => names
                .iter()
                .position(|c| c == n)
                .ok_or_else(|| Error::Config(format!("no column named '{n}'"))),
        }
    }
}

pub fn load_path(path: &Path, class: &ClassColumn) -> Result<Dataset> {
    let file = File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    load_dataset(BufReader::new(file), DataFormat::from_path(path), class)
}

pub fn load_dataset<R: Read>(
    source: R,
    format: DataFormat,
    class: &ClassColumn,
) -> Result<Dataset> {
    let raw = match format {
        DataFormat::Csv => read_csv(source)?,
        DataFormat::Arff => read_arff(source)?,
    };
    build(raw, class)
}

/// Column declared in the source, before type inference.
struct RawColumn {
    name: String,
    declared: Declared,
}

enum Declared {
    Infer,
    Numeric,
    Nominal(Vec<String>),
}

struct RawTable {
    columns: Vec<RawColumn>,
    /// (source line, tokens)
    rows: Vec<(usize, Vec<String>)>,
}

fn read_csv<R: Read>(source: R) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| Error::Input(format!("unreadable CSV header: {e}")))?
        .clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(Error::Input("empty file".into()));
    }
    let columns: Vec<RawColumn> = header
        .iter()
        .map(|h| RawColumn {
            name: h.to_string(),
            declared: Declared::Infer,
        })
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != columns.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", columns.len(), rec.len()),
            });
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(RawTable { columns, rows })
}

fn read_arff<R: Read>(source: R) -> Result<RawTable> {
    let reader = BufReader::new(source);
    let mut columns = Vec::new();
    let mut rows = Vec::new();
    let mut in_data = false;
    let mut saw_anything = false;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        saw_anything = true;
        let parse_err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        if in_data {
            if t.starts_with('{') {
                return Err(parse_err("sparse ARFF rows are not supported".into()));
            }
            let fields = split_arff_list(t);
            if fields.len() != columns.len() {
                return Err(parse_err(format!(
                    "expected {} fields, found {}",
                    columns.len(),
                    fields.len()
                )));
            }
            rows.push((lineno, fields));
            continue;
        }
        let lower = t.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            continue;
        } else if lower.starts_with("@data") {
            in_data = true;
        } else if lower.starts_with("@attribute") {
            let rest = t["@attribute".len()..].trim();
            let (name, ty) = take_arff_name(rest)
                .ok_or_else(|| parse_err("malformed @attribute line".into()))?;
            let tyl = ty.to_ascii_lowercase();
            let declared = if ty.starts_with('{') {
                let inner = ty
                    .strip_prefix('{')
                    .and_then(|s| s.trim_end().strip_suffix('}'))
                    .ok_or_else(|| parse_err("unterminated nominal set".into()))?;
                Declared::Nominal(split_arff_list(inner))
            } else if ["numeric", "real", "integer"].contains(&tyl.as_str()) {
                Declared::Numeric
            } else if tyl == "string" {
                Declared::Infer
            } else {
                return Err(parse_err(format!("unsupported attribute type '{ty}'")));
            };
            columns.push(RawColumn { name, declared });
        } else {
            return Err(parse_err(format!("unexpected header line '{t}'")));
        }
    }
    if !saw_anything {
        return Err(Error::Input("empty file".into()));
    }
    if columns.is_empty() {
        return Err(Error::Input("ARFF file declares no attributes".into()));
    }
    Ok(RawTable { columns, rows })
}

fn take_arff_name(s: &str) -> Option<(String, &str)> {
    let s = s.trim_start();
    let q = s.chars().next()?;
    if q == '\'' || q == '"' {
        let end = s[1..].find(q)? + 1;
        Some((s[1..end].to_string(), s[end + 1..].trim()))
    } else {
        let end = s.find(char::is_whitespace)?;
        Some((s[..end].to_string(), s[end..].trim()))
    }
}

/// Splits a comma-separated ARFF list, honouring single and double quotes.
fn split_arff_list(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) if c == '\\' => {
                if let Some(n) = chars.next() {
                    cur.push(n);
                }
            }
            Some(_) => cur.push(c),
            None if c == '\'' || c == '"' => quote = Some(c),
            None if c == ',' => out.push(std::mem::take(&mut cur).trim().to_string()),
            None => cur.push(c),
        }
    }
    out.push(cur.trim().to_string());
    out
}

fn is_missing(tok: &str) -> bool {
    tok.is_empty() || tok == MISSING_TOKEN
}

fn build(raw: RawTable, class: &ClassColumn) -> Result<Dataset> {
    if raw.rows.is_empty() {
        return Err(Error::Input("no data rows".into()));
    }
    let names: Vec<String> = raw.columns.iter().map(|c| c.name.clone()).collect();
    let class_index = class.resolve(&names)?;

    // Class labels: first appearance, then any declared-but-unseen values.
    let mut class_labels: Vec<String> = Vec::new();
    let mut class_lookup: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::with_capacity(raw.rows.len());
    for (line, row) in &raw.rows {
        let tok = &row[class_index];
        if is_missing(tok) {
            return Err(Error::Parse {
                line: *line,
                message: "missing class label".into(),
            });
        }
        if let Declared::Nominal(decl) = &raw.columns[class_index].declared {
            if !decl.contains(tok) {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("class value '{tok}' not declared"),
                });
            }
        }
        let id = *class_lookup.entry(tok.clone()).or_insert_with(|| {
            class_labels.push(tok.clone());
            class_labels.len() - 1
        });
        labels.push(id);
    }
    if let Declared::Nominal(decl) = &raw.columns[class_index].declared {
        for d in decl {
            if !class_lookup.contains_key(d) {
                class_lookup.insert(d.clone(), class_labels.len());
                class_labels.push(d.clone());
            }
        }
    }

    let feature_cols: Vec<usize> = (0..raw.columns.len())
        .filter(|&c| c != class_index)
        .collect();
    let mut features = Vec::with_capacity(feature_cols.len());
    let mut columns: Vec<Vec<Value>> = Vec::with_capacity(feature_cols.len());
    for &c in &feature_cols {
        let col = &raw.columns[c];
        let numeric = match &col.declared {
            Declared::Numeric => true,
            Declared::Nominal(_) => false,
            Declared::Infer => {
                let mut any = false;
                let all = raw.rows.iter().all(|(_, r)| {
                    let t = &r[c];
                    if is_missing(t) {
                        return true;
                    }
                    any = true;
                    t.parse::<f64>().is_ok_and(f64::is_finite)
                });
                all && any
            }
        };
        if numeric {
            let mut values = Vec::with_capacity(raw.rows.len());
            for (line, r) in &raw.rows {
                let t = &r[c];
                if is_missing(t) {
                    values.push(Value::Missing);
                } else {
                    let v: f64 =
                        t.parse()
                            .ok()
                            .filter(|v: &f64| v.is_finite())
                            .ok_or_else(|| Error::Parse {
                                line: *line,
                                message: format!("'{t}' is not a number in column '{}'", col.name),
                            })?;
                    values.push(Value::Numeric(v));
                }
            }
            features.push(FeatureDescriptor {
                name: col.name.clone(),
                kind: FeatureKind::Numeric,
            });
            columns.push(values);
        } else {
            let mut categories: Vec<String> = match &col.declared {
                Declared::Nominal(d) => d.clone(),
                _ => Vec::new(),
            };
            let declared = matches!(col.declared, Declared::Nominal(_));
            let mut lookup: HashMap<String, u32> = categories
                .iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), i as u32))
                .collect();
            let mut values = Vec::with_capacity(raw.rows.len());
            for (line, r) in &raw.rows {
                let t = if is_missing(&r[c]) {
                    MISSING_TOKEN
                } else {
                    r[c].as_str()
                };
                let id = match lookup.get(t) {
                    Some(&id) => id,
                    None if declared && t != MISSING_TOKEN => {
                        return Err(Error::Parse {
                            line: *line,
                            message: format!("value '{t}' not declared for '{}'", col.name),
                        })
                    }
                    None => {
                        categories.push(t.to_string());
                        let id = (categories.len() - 1) as u32;
                        lookup.insert(t.to_string(), id);
                        id
                    }
                };
                values.push(Value::Categorical(id));
            }
            features.push(FeatureDescriptor {
                name: col.name.clone(),
                kind: FeatureKind::Categorical { categories },
            });
            columns.push(values);
        }
    }

    let schema = Schema {
        features,
        class_name: names[class_index].clone(),
        class_labels,
        class_index,
    };
    schema.validate()?;
    let records = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| Record {
            values: columns.iter().map(|col| col[i]).collect(),
            label,
        })
        .collect();
    let d = Dataset {
        schema: Arc::new(schema),
        records,
    };
    if d.n() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 records, found {}",
            d.n()
        )));
    }
    Ok(d)
}

/// Writes the dataset as CSV with the class column back in its source
/// position. Missing numeric values are written as `?`.
pub fn write_csv<W: Write>(d: &Dataset, out: W) -> Result<()> {
    let schema = d.schema();
    let mut w = csv::Writer::from_writer(out);
    let n_cols = schema.n_features() + 1;
    let feature_at = |col: usize| {
        if col < schema.class_index {
            col
        } else {
            col - 1
        }
    };
    let header: Vec<&str> = (0..n_cols)
        .map(|c| {
            if c == schema.class_index {
                schema.class_name.as_str()
            } else {
                schema.features[feature_at(c)].name.as_str()
            }
        })
        .collect();
    w.write_record(&header).map_err(csv_io)?;
    for r in d.records() {
        let row: Vec<String> = (0..n_cols)
            .map(|c| {
                if c == schema.class_index {
                    return schema.class_labels[r.label].clone();
                }
                let f = feature_at(c);
                match r.values[f] {
                    Value::Numeric(v) => v.to_string(),
                    Value::Missing => MISSING_TOKEN.to_string(),
                    Value::Categorical(id) => schema.features[f].categories()[id as usize].clone(),
                }
            })
            .collect();
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Record indices of a seeded holdout split: a Fisher–Yates shuffle, the
/// first `floor(fraction * n)` positions go to training.
pub fn holdout_indices(
    n: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    // The epsilon absorbs representation error, e.g. 0.66 * 50.
    let n_train = (train_fraction * n as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Split(format!(
            "fraction {train_fraction} of {n} records leaves an empty side"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, &[rng::TAG_SPLIT]));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

pub fn holdout_split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = holdout_indices(d.n(), train_fraction, seed)?;
    Ok((d.subset(&train), d.subset(&test)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapSample {
    /// `n` draws with replacement, in draw order.
    pub in_bag: Vec<usize>,
    /// Sorted indices never drawn.
    pub oob: Vec<usize>,
}

impl BootstrapSample {
    pub fn draw(n: usize, rng: &mut Rng) -> BootstrapSample {
        let in_bag: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut seen = vec![false; n];
        for &i in &in_bag {
            seen[i] = true;
        }
        let oob = (0..n).filter(|&i| !seen[i]).collect();
        BootstrapSample { in_bag, oob }
    }

    pub fn distinct_in_bag(&self) -> Vec<usize> {
        let mut v = self.in_bag.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

pub fn bootstrap_sample(d: &Dataset, rng: &mut Rng) -> BootstrapSample {
    BootstrapSample::draw(d.n(), rng)
}

/// Numeric missing-value imputation with medians learned on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianImputer {
    medians: Vec<Option<f64>>,
}

impl MedianImputer {
    pub fn fit(train: &Dataset) -> MedianImputer {
        let medians = train
            .schema()
            .features
            .iter()
            .enumerate()
            .map(|(f, desc)| {
                if !desc.is_numeric() {
                    return None;
                }
                let mut vals: Vec<f64> = train
                    .records()
                    .iter()
                    .filter_map(|r| match r.values[f] {
                        Value::Numeric(v) => Some(v),
                        _ => None,
                    })
                    .collect();
                if vals.is_empty() {
                    return Some(0.0);
                }
                vals.sort_by(f64::total_cmp);
                let m = vals.len() / 2;
                Some(if vals.len() % 2 == 1 {
                    vals[m]
                } else {
                    (vals[m - 1] + vals[m]) / 2.0
                })
            })
            .collect();
        MedianImputer { medians }
    }

    pub fn apply(&self, d: &mut Dataset) {
        for r in &mut d.records {
            for (v, m) in r.values.iter_mut().zip(&self.medians) {
                if let (Value::Missing, Some(m)) = (*v, m) {
                    *v = Value::Numeric(*m);
                }
            }
        }
    }

    pub fn median(&self, feature: usize) -> Option<f64> {
        self.medians[feature]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn csv(s: &str) -> Result<Dataset> {
        load_dataset(s.as_bytes(), DataFormat::Csv, &ClassColumn::Last)
    }

    #[test]
    fn loads_mixed_csv() {
        let d = csv("x,y,label\n1,a,Y\n2,b,N\n3,a,Y\n").unwrap();
        assert_eq!(d.n(), 3);
        let s = d.schema();
        assert!(s.features[0].is_numeric());
        assert_eq!(s.features[1].categories(), ["a", "b"]);
        assert_eq!(s.class_labels, ["Y", "N"]);
        assert_eq!(d.labels(), [0, 1, 0]);
    }

    #[test]
    fn arity_violation_names_line() {
        match csv("x,y,label\n1,a,Y\n2,b\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn single_class_is_schema_error() {
        assert!(matches!(csv("x,label\n1,Y\n2,Y\n"), Err(Error::Schema(_))));
    }

    #[test]
    fn empty_input_is_input_error() {
        assert!(matches!(csv(""), Err(Error::Input(_))));
        assert!(matches!(csv("x,label\n"), Err(Error::Input(_))));
    }

    #[test]
    fn class_column_override() {
        let d = load_dataset(
            "label,x\nY,1\nN,2\n".as_bytes(),
            DataFormat::Csv,
            &ClassColumn::Name("label".into()),
        )
        .unwrap();
        assert_eq!(d.schema().class_index, 0);
        assert_eq!(d.n_features(), 1);
        let d2 = load_dataset(
            "label,x\nY,1\nN,2\n".as_bytes(),
            DataFormat::Csv,
            &ClassColumn::Index(0),
        )
        .unwrap();
        assert_eq!(d, d2);
    }

    #[test]
    fn missing_values_policy() {
        let d = csv("x,c,label\n1,?,A\n?,b,B\n3,,A\n").unwrap();
        assert!(d.schema().features[0].is_numeric());
        assert_eq!(d.schema().features[1].categories(), ["?", "b"]);
        assert_eq!(d.record(1).values[0], Value::Missing);
        assert_eq!(d.record(2).values[1], Value::Categorical(0));
        let mut d = d;
        let imp = MedianImputer::fit(&d);
        assert_eq!(imp.median(0), Some(2.0));
        imp.apply(&mut d);
        assert_eq!(d.record(1).values[0], Value::Numeric(2.0));
    }

    #[test]
    fn non_numeric_token_makes_column_categorical() {
        let d = csv("x,label\n1,A\nfoo,B\n").unwrap();
        assert_eq!(d.schema().features[0].categories(), ["1", "foo"]);
    }

    #[test]
    fn arff_nominal_and_numeric() {
        let src =
            "% comment\n@relation t\n@attribute 'a b' numeric\n@attribute col {red, green,blue}\n\
                   @attribute class {yes,no}\n@data\n1.5,green,no\n?,'red',yes\n";
        let d = load_dataset(src.as_bytes(), DataFormat::Arff, &ClassColumn::Last).unwrap();
        assert_eq!(d.schema().features[0].name, "a b");
        assert_eq!(
            d.schema().features[1].categories(),
            ["red", "green", "blue"]
        );
        assert_eq!(d.schema().class_labels, ["no", "yes"]);
        assert_eq!(
            d.record(0).values,
            [Value::Numeric(1.5), Value::Categorical(1)]
        );
        assert_eq!(d.record(1).values[0], Value::Missing);
    }

    #[test]
    fn arff_rejects_sparse_and_undeclared() {
        let sparse = "@relation t\n@attribute a numeric\n@attribute c {x,y}\n@data\n{0 1, 1 x}\n";
        assert!(matches!(
            load_dataset(sparse.as_bytes(), DataFormat::Arff, &ClassColumn::Last),
            Err(Error::Parse { line: 5, .. })
        ));
        let bad = "@relation t\n@attribute a {p,q}\n@attribute c {x,y}\n@data\nr,x\np,y\n";
        assert!(matches!(
            load_dataset(bad.as_bytes(), DataFormat::Arff, &ClassColumn::Last),
            Err(Error::Parse { line: 5, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let d = csv("x,c,label\n1.25,p,A\n?,q,B\n-3,p,A\n").unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        assert_eq!(csv(std::str::from_utf8(&buf).unwrap()).unwrap(), d);
    }

    fn numbered(n: usize) -> Dataset {
        let mut s = String::from("x,label\n");
        for i in 0..n {
            s.push_str(&format!("{i},{}\n", if i % 2 == 0 { "A" } else { "B" }));
        }
        csv(&s).unwrap()
    }

    #[test]
    fn holdout_sizes() {
        let d = numbered(100);
        let (tr, te) = holdout_split(&d, 0.66, 3).unwrap();
        assert_eq!((tr.n(), te.n()), (66, 34));
        let (tr, te) = holdout_split(&numbered(3), 0.66, 3).unwrap();
        assert_eq!((tr.n(), te.n()), (1, 2));
        assert_eq!(tr.schema().class_labels, ["A", "B"]);
    }

    #[test]
    fn holdout_is_deterministic_and_partitions() {
        let (a, b) = holdout_indices(50, 0.66, 11).unwrap();
        assert_eq!(
            (a.clone(), b.clone()),
            holdout_indices(50, 0.66, 11).unwrap()
        );
        let mut all: Vec<usize> = a.into_iter().chain(b).collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn holdout_empty_side_is_error() {
        assert!(matches!(holdout_indices(2, 0.4, 1), Err(Error::Split(_))));
        assert!(matches!(holdout_indices(10, 1.0, 1), Err(Error::Config(_))));
    }

    #[test]
    fn bootstrap_single_record() {
        let mut r = Rng::seed_from_u64(1);
        let b = BootstrapSample::draw(1, &mut r);
        assert_eq!(b.in_bag, [0]);
        assert!(b.oob.is_empty());
    }

    #[test]
    fn bootstrap_deterministic() {
        let a = BootstrapSample::draw(40, &mut rng::stream(5, &[1]));
        let b = BootstrapSample::draw(40, &mut rng::stream(5, &[1]));
        assert_eq!(a, b);
        assert_eq!(a.in_bag.len(), 40);
        assert_eq!(a.oob.len(), 40 - a.distinct_in_bag().len());
    }
}
