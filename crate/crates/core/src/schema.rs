//! Feature schema inference and one-hot column expansion.
//!
//! The schema is the single source of truth for encoding: numeric features
//! carry the training-split minimum and maximum, categorical features carry
//! their sorted training vocabulary. Expanding a schema yields the ordered
//! list of encoded columns that the layout places on the canvas.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::record::FlowRecord;

pub const NORMAL_CLASS: &str = "Normal";

const SCHEMA_MAGIC: &str = "# flowpix-schema v1";

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    Numeric { min: f64, max: f64 },
    Categorical { vocab: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>, min: f64, max: f64) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Numeric { min, max },
        }
    }

    pub fn categorical<I, S>(name: impl Into<String>, vocab: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Categorical {
                vocab: vocab.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, FeatureKind::Numeric { .. })
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            FeatureKind::Numeric { min, max } => {
                if !(min.is_finite() && max.is_finite() && min <= max) {
                    return Err(Error::InvalidSchema(format!(
                        "feature `{}` has invalid range [{min}, {max}]",
                        self.name
                    )));
                }
            }
            FeatureKind::Categorical { vocab } => {
                if vocab.is_empty() {
                    return Err(Error::InvalidSchema(format!(
                        "feature `{}` has an empty vocabulary",
                        self.name
                    )));
                }
                if vocab.windows(2).any(|w| w[0].as_bytes() >= w[1].as_bytes()) {
                    return Err(Error::InvalidSchema(format!(
                        "vocabulary of `{}` is not strictly sorted",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
    label_column: String,
    class_names: Vec<String>,
}

impl FeatureSchema {
    pub fn new(
        features: Vec<FeatureSpec>,
        label_column: impl Into<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let label_column = label_column.into();
        let mut seen = HashSet::new();
        for f in &features {
            f.validate()?;
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate feature `{}`",
                    f.name
                )));
            }
        }
        if seen.contains(label_column.as_str()) {
            return Err(Error::InvalidSchema(format!(
                "label column `{label_column}` is also a feature"
            )));
        }
        let mut classes = HashSet::new();
        if let Some(dup) = class_names.iter().find(|c| !classes.insert(c.as_str())) {
            return Err(Error::InvalidSchema(format!("duplicate class `{dup}`")));
        }
        if class_names.iter().skip(1).any(|c| c == NORMAL_CLASS) {
            return Err(Error::InvalidSchema(
                "class `Normal` must take index 0".to_string(),
            ));
        }
        Ok(FeatureSchema {
            features,
            label_column,
            class_names,
        })
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == class)
    }

    /// Content checksum of the serialized schema, stable across runs.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_text().as_bytes());
        hex::encode(&hash[..8])
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(SCHEMA_MAGIC);
        out.push('\n');
        let _ = writeln!(out, "# label={}", self.label_column);
        let _ = writeln!(out, "# classes={}", self.class_names.join("|"));
        for f in &self.features {
            match &f.kind {
                FeatureKind::Numeric { min, max } => {
                    let _ = writeln!(out, "{},numeric,{},{}", f.name, min, max);
                }
                FeatureKind::Categorical { vocab } => {
                    let _ = writeln!(out, "{},categorical,{}", f.name, vocab.join("|"));
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidSchema(msg);
        let mut lines = text.lines();
        if lines.next() != Some(SCHEMA_MAGIC) {
            return Err(bad("missing schema header".into()));
        }
        let label = lines
            .next()
            .and_then(|l| l.strip_prefix("# label="))
            .ok_or_else(|| bad("missing label line".into()))?;
        let classes = lines
            .next()
            .and_then(|l| l.strip_prefix("# classes="))
            .ok_or_else(|| bad("missing classes line".into()))?;
        let class_names = if classes.is_empty() {
            Vec::new()
        } else {
            classes.split('|').map(str::to_string).collect()
        };
        let mut features = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let (name, kind, rest) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(bad(format!("feature line {} is malformed", n + 1))),
            };
            let spec = match kind {
                "numeric" => {
                    let (lo, hi) = rest
                        .split_once(',')
                        .ok_or_else(|| bad(format!("feature `{name}` lacks a max")))?;
                    let parse = |s: &str| {
                        s.parse::<f64>()
                            .map_err(|_| bad(format!("feature `{name}` has bad bound {s:?}")))
                    };
                    FeatureSpec::numeric(name, parse(lo)?, parse(hi)?)
                }
                "categorical" => FeatureSpec::categorical(name, rest.split('|')),
                other => return Err(bad(format!("unknown feature kind `{other}`"))),
            };
            features.push(spec);
        }
        FeatureSchema::new(features, label, class_names)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.check_serializable()?;
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(Error::at_path(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(Error::at_path(path))?;
        Self::from_text(&text)
    }

    fn check_serializable(&self) -> Result<()> {
        let clean = |s: &str| !s.contains([',', '|', '\n', '\r']);
        for f in &self.features {
            let ok = clean(&f.name)
                && match &f.kind {
                    FeatureKind::Categorical { vocab } => vocab.iter().all(|v| clean(v)),
                    FeatureKind::Numeric { .. } => true,
                };
            if !ok {
                return Err(Error::InvalidSchema(format!(
                    "feature `{}` contains a reserved character (',' '|' or newline)",
                    f.name
                )));
            }
        }
        Ok(())
    }
}

/// Which columns are categorical, which column is the label, and which
/// columns are neither features nor label (row ids, redundant labels).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaOptions {
    pub categorical: BTreeSet<String>,
    pub label_column: String,
    pub ignored: BTreeSet<String>,
}

impl SchemaOptions {
    pub fn new<I, S>(categorical: I, label_column: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SchemaOptions {
            categorical: categorical.into_iter().map(Into::into).collect(),
            label_column: label_column.into(),
            ignored: BTreeSet::new(),
        }
    }

    pub fn ignoring<I, S>(mut self, columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.ignored.extend(columns.into_iter().map(Into::into));
        self
    }

    /// UNSW-NB15 feature CSVs: `proto`, `service` and `state` are categorical,
    /// `attack_cat` is the family label, `id` and the binary `label` are not features.
    pub fn unsw() -> Self {
        SchemaOptions::new(["proto", "service", "state"], "attack_cat").ignoring(["id", "label"])
    }
}

/// Infers numeric ranges, category vocabularies and class names from the
/// training split. Feature order follows the source column order.
pub fn infer_schema(rows: &[FlowRecord], options: &SchemaOptions) -> Result<FeatureSchema> {
    let first = rows.first().ok_or(Error::SchemaEmpty)?;
    let header = &first.header;
    for name in &options.categorical {
        if header.position(name).is_none() {
            return Err(Error::InvalidSchema(format!(
                "categorical column `{name}` is not in the table"
            )));
        }
    }

    let mut features = Vec::new();
    for (col, name) in header.names().iter().enumerate() {
        if *name == options.label_column || options.ignored.contains(name) {
            continue;
        }
        if options.categorical.contains(name) {
            let vocab: BTreeSet<&str> = rows.iter().map(|r| r.values[col].trim()).collect();
            features.push(FeatureSpec::categorical(name.clone(), vocab));
        } else {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for r in rows {
                let v = parse_numeric(&r.values[col], r.record_id.row, name)?;
                min = min.min(v);
                max = max.max(v);
            }
            features.push(FeatureSpec::numeric(name.clone(), min, max));
        }
    }

    let labels: BTreeSet<&str> = rows.iter().map(|r| r.label.as_str()).collect();
    FeatureSchema::new(features, options.label_column.clone(), order_classes(labels))
}

/// `Normal` first, every other class in byte-wise sorted order.
pub fn order_classes<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let set: BTreeSet<&str> = labels.into_iter().collect();
    let mut out = Vec::with_capacity(set.len());
    if set.contains(NORMAL_CLASS) {
        out.push(NORMAL_CLASS.to_string());
    }
    out.extend(
        set.into_iter()
            .filter(|c| *c != NORMAL_CLASS)
            .map(str::to_string),
    );
    out
}

pub(crate) fn parse_numeric(raw: &str, row: usize, column: &str) -> Result<f64> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::MalformedCell {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        }),
    }
}

/// A column of the encoded feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedColumn {
    pub name: String,
    pub source: String,
    pub category: Option<String>,
}

pub(crate) fn group_rank(feature: &str) -> u8 {
    match feature {
        "service" => 0,
        "proto" | "protocol" => 1,
        "state" => 2,
        _ => 3,
    }
}

/// Numeric features in source order, then one-hot groups ordered service,
/// protocol, state, then remaining categoricals in source order. Categories
/// within a group follow vocabulary order.
pub fn expand_columns(schema: &FeatureSchema) -> Vec<EncodedColumn> {
    let mut out: Vec<EncodedColumn> = schema
        .features()
        .iter()
        .filter(|f| f.is_numeric())
        .map(|f| EncodedColumn {
            name: f.name.clone(),
            source: f.name.clone(),
            category: None,
        })
        .collect();

    let mut groups: Vec<(&FeatureSpec, &Vec<String>)> = schema
        .features()
        .iter()
        .filter_map(|f| match &f.kind {
            FeatureKind::Categorical { vocab } => Some((f, vocab)),
            FeatureKind::Numeric { .. } => None,
        })
        .collect();
    // stable: ties keep source order
    groups.sort_by_key(|(f, _)| group_rank(&f.name));

    for (f, vocab) in groups {
        out.extend(vocab.iter().map(|c| EncodedColumn {
            name: format!("{}_{}", f.name, c),
            source: f.name.clone(),
            category: Some(c.clone()),
        }));
    }
    out
}
