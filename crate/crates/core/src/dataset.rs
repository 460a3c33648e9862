//! Labeled feature tables: CSV loading, class counts, stratified and balanced
//! subsets, and synthetic fixtures shaped like the UNSW-NB15 tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::record::{FlowRecord, Header, RecordId, Split};
use crate::schema::{order_classes, NORMAL_CLASS};
use crate::seeds;

pub const ATTACK_CLASS: &str = "Attack";

/// The ten UNSW-NB15 classes in report order.
pub const UNSW_CLASSES: [&str; 10] = [
    "Normal",
    "Analysis",
    "Backdoor",
    "DoS",
    "Exploits",
    "Fuzzers",
    "Generic",
    "Reconnaissance",
    "Shellcode",
    "Worms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTable {
    pub header: Arc<Header>,
    pub records: Vec<FlowRecord>,
    pub split: Split,
    /// Classes in canonical order (Normal first, then sorted).
    pub class_names: Vec<String>,
    /// 0-based data rows that could not be parsed.
    pub malformed_rows: Vec<usize>,
}

impl LabeledTable {
    pub fn new(header: Arc<Header>, records: Vec<FlowRecord>, split: Split) -> Self {
        let class_names = order_classes(records.iter().map(|r| r.label.as_str()));
        LabeledTable {
            header,
            records,
            split,
            class_names,
            malformed_rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_counts(&self) -> ClassCounts {
        class_counts(self)
    }

    /// Same records with labels collapsed to Normal / Attack.
    pub fn to_binary(&self) -> LabeledTable {
        let records = self
            .records
            .iter()
            .map(|r| FlowRecord {
                label: binary_label(&r.label).to_string(),
                ..r.clone()
            })
            .collect();
        LabeledTable::new(self.header.clone(), records, self.split)
    }

    fn with_records(&self, records: Vec<FlowRecord>) -> LabeledTable {
        LabeledTable {
            header: self.header.clone(),
            records,
            split: self.split,
            class_names: self.class_names.clone(),
            malformed_rows: Vec::new(),
        }
    }

    /// Records grouped by class in canonical class order.
    fn by_class(&self) -> BTreeMap<usize, Vec<&FlowRecord>> {
        let mut groups: BTreeMap<usize, Vec<&FlowRecord>> = BTreeMap::new();
        for r in &self.records {
            let k = self
                .class_names
                .iter()
                .position(|c| *c == r.label)
                .expect("class_names covers every label");
            groups.entry(k).or_default().push(r);
        }
        groups
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header.names())?;
        for r in &self.records {
            w.write_record(&r.values)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?).map_err(Error::at_path(path))
    }
}

pub fn binary_label(class: &str) -> &'static str {
    if class == NORMAL_CLASS {
        NORMAL_CLASS
    } else {
        ATTACK_CLASS
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadOptions {
    /// Column holding the class label.
    pub label_column: String,
    /// Optional 0/1 attack flag cross-checked against the label.
    pub binary_column: Option<String>,
}

impl LoadOptions {
    pub fn unsw() -> Self {
        LoadOptions {
            label_column: "attack_cat".into(),
            binary_column: Some("label".into()),
        }
    }
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self::unsw()
    }
}

/// Loads a feature CSV. Rows with the wrong number of fields are reported
/// in `malformed_rows` and left out; a label that contradicts the binary
/// flag is an error.
pub fn load_csv(path: impl AsRef<Path>, split: Split, options: &LoadOptions) -> Result<LabeledTable> {
    let path = path.as_ref();
    let source: Arc<str> = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "table".to_string())
        .into();
    let file = File::open(path).map_err(Error::at_path(path))?;
    read_csv(file, source, split, options)
}

pub fn read_csv<R: std::io::Read>(
    input: R,
    source: Arc<str>,
    split: Split,
    options: &LoadOptions,
) -> Result<LabeledTable> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let names: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::Format("missing header row".into()));
    }
    let header = Arc::new(Header::new(names));
    let label_col = header.position(&options.label_column).ok_or_else(|| {
        Error::Format(format!("label column `{}` not in header", options.label_column))
    })?;
    let binary_col = match &options.binary_column {
        Some(c) => header.position(c),
        None => None,
    };

    let mut records = Vec::new();
    let mut malformed = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let rec = match result {
            Ok(r) if r.len() == header.len() => r,
            Ok(_) | Err(_) => {
                malformed.push(row);
                continue;
            }
        };
        let values: Vec<String> = rec.iter().map(str::to_string).collect();
        let mut label = values[label_col].trim().to_string();
        if let Some(b) = binary_col {
            let flag = values[b].trim();
            if label.is_empty() && flag == "0" {
                label = NORMAL_CLASS.to_string();
            }
            let consistent = match flag {
                "0" => label == NORMAL_CLASS,
                "1" => label != NORMAL_CLASS && !label.is_empty(),
                _ => false,
            };
            if !consistent {
                return Err(Error::MalformedRecord {
                    record_id: RecordId::new(source.clone(), row).to_string(),
                    reason: format!("label `{label}` contradicts binary flag `{flag}`"),
                });
            }
        }
        if label.is_empty() {
            malformed.push(row);
            continue;
        }
        records.push(FlowRecord {
            header: header.clone(),
            values,
            label,
            record_id: RecordId::new(source.clone(), row),
        });
    }
    let mut table = LabeledTable::new(header, records, split);
    table.malformed_rows = malformed;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    /// Canonical class order.
    pub per_class: Vec<(String, usize)>,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.per_class.iter().map(|(_, n)| n).sum()
    }

    pub fn get(&self, class: &str) -> usize {
        self.per_class
            .iter()
            .find(|(c, _)| c == class)
            .map_or(0, |(_, n)| *n)
    }

    /// (normal, attack) rollup.
    pub fn binary(&self) -> (usize, usize) {
        let normal = self.get(NORMAL_CLASS);
        (normal, self.total() - normal)
    }
}

pub fn class_counts(table: &LabeledTable) -> ClassCounts {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &table.records {
        *counts.entry(r.label.as_str()).or_default() += 1;
    }
    ClassCounts {
        per_class: order_classes(counts.keys().copied())
            .into_iter()
            .map(|c| {
                let n = counts[c.as_str()];
                (c, n)
            })
            .collect(),
    }
}

/// `class,train_count,test_count` CSV over the union of classes.
pub fn count_report(train: &ClassCounts, test: &ClassCounts) -> String {
    let classes = order_classes(
        train
            .per_class
            .iter()
            .chain(&test.per_class)
            .map(|(c, _)| c.as_str()),
    );
    let mut out = String::from("class,train_count,test_count\n");
    for c in classes {
        let _ = writeln!(out, "{c},{},{}", train.get(&c), test.get(&c));
    }
    out
}

/// Per-class sampling quota.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Quota {
    PerClass(usize),
    /// Classes not listed get no records.
    Explicit(BTreeMap<String, usize>),
}

impl Quota {
    fn for_class(&self, class: &str) -> usize {
        match self {
            Quota::PerClass(n) => *n,
            Quota::Explicit(m) => m.get(class).copied().unwrap_or(0),
        }
    }
}

/// Draws `min(quota, available)` records per class without replacement.
/// Output is grouped by class in canonical order, records in source order.
pub fn stratified_sample(table: &LabeledTable, quota: &Quota, seed: u64) -> Result<LabeledTable> {
    if let Quota::PerClass(0) = quota {
        return Err(Error::InvalidParam("per-class quota must be at least 1".into()));
    }
    let mut out = Vec::new();
    for (k, mut members) in table.by_class() {
        let class = &table.class_names[k];
        let mut rng = seeds::stream(seed, &format!("stratified/{class}"));
        members.shuffle(&mut rng);
        members.truncate(quota.for_class(class));
        members.sort_by(|a, b| a.record_id.cmp(&b.record_id));
        out.extend(members.into_iter().cloned());
    }
    Ok(table.with_records(out))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetPlan {
    pub per_class_cap: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl SubsetPlan {
    pub fn new(per_class_cap: usize, holdout_fraction: f64, seed: u64) -> Result<Self> {
        if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
            return Err(Error::InvalidParam(format!(
                "holdout fraction {holdout_fraction} is not in (0, 1)"
            )));
        }
        if per_class_cap == 0 {
            return Err(Error::InvalidParam("per-class cap must be at least 1".into()));
        }
        Ok(SubsetPlan {
            per_class_cap,
            holdout_fraction,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancedSubset {
    pub train: LabeledTable,
    pub holdout: LabeledTable,
    /// Classes with fewer than two records, kept whole in `train`.
    pub flagged: Vec<String>,
}

impl BalancedSubset {
    pub fn total(&self) -> usize {
        self.train.len() + self.holdout.len()
    }
}

/// Caps every class, then holds out a per-class fraction of the capped subset.
pub fn make_balanced_subset(table: &LabeledTable, plan: &SubsetPlan) -> Result<BalancedSubset> {
    let plan = SubsetPlan::new(plan.per_class_cap, plan.holdout_fraction, plan.seed)?;
    let capped = stratified_sample(table, &Quota::PerClass(plan.per_class_cap), plan.seed)?;
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    let mut flagged = Vec::new();
    for (k, mut members) in capped.by_class() {
        let class = &capped.class_names[k];
        if members.len() < 2 {
            flagged.push(class.clone());
            train.extend(members.into_iter().cloned());
            continue;
        }
        let n = members.len();
        let held = ((plan.holdout_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut rng = seeds::stream(plan.seed, &format!("holdout/{class}"));
        members.shuffle(&mut rng);
        let (h, t) = members.split_at(held);
        let mut h = h.to_vec();
        let mut t = t.to_vec();
        h.sort_by(|a, b| a.record_id.cmp(&b.record_id));
        t.sort_by(|a, b| a.record_id.cmp(&b.record_id));
        holdout.extend(h.into_iter().cloned());
        train.extend(t.into_iter().cloned());
    }
    Ok(BalancedSubset {
        train: capped.with_records(train),
        holdout: capped.with_records(holdout),
        flagged,
    })
}

/// Column layout and difficulty of a synthetic table.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureShape {
    pub numeric: Vec<String>,
    pub categorical: Vec<(String, Vec<String>)>,
    /// Numeric features whose class-conditional means are shifted.
    pub separated: Vec<String>,
    /// Shift between consecutive class means, in within-class standard
    /// deviations. Noise is uniform, so shifts above 2·√3 leave classes
    /// disjoint on every separated feature.
    pub separation: f64,
    /// Probability that a record takes its class's preferred category.
    pub category_affinity: f64,
    pub label_column: String,
    /// Emit UNSW-style `id` and binary `label` columns.
    pub unsw_extras: bool,
}

impl FixtureShape {
    /// Twelve numeric features (four separated by 8 sd) and two categoricals.
    pub fn small() -> Self {
        let numeric: Vec<String> = (0..12).map(|i| format!("f{i:02}")).collect();
        FixtureShape {
            separated: numeric[..4].to_vec(),
            numeric,
            categorical: vec![
                (
                    "proto".into(),
                    ["arp", "icmp", "ospf", "sctp", "tcp", "udp"].map(String::from).to_vec(),
                ),
                (
                    "service".into(),
                    ["-", "dns", "ftp", "http", "smtp"].map(String::from).to_vec(),
                ),
            ],
            separation: 8.0,
            category_affinity: 0.7,
            label_column: "attack_cat".into(),
            unsw_extras: false,
        }
    }

    /// Like [`FixtureShape::small`] but every numeric feature carries the
    /// class shift, so classes are disjoint on all of them.
    pub fn separable() -> Self {
        let mut shape = Self::small();
        shape.separated = shape.numeric.clone();
        shape
    }

    /// UNSW-NB15 column names and category vocabularies, with the class
    /// signal carried by `sttl`, `ct_state_ttl` and `ct_dst_src_ltm`.
    pub fn unsw_like() -> Self {
        FixtureShape {
            numeric: UNSW_NUMERIC.iter().map(|s| s.to_string()).collect(),
            categorical: vec![
                ("proto".into(), UNSW_PROTOCOLS.iter().map(|s| s.to_string()).collect()),
                ("service".into(), UNSW_SERVICES.iter().map(|s| s.to_string()).collect()),
                ("state".into(), UNSW_STATES.iter().map(|s| s.to_string()).collect()),
            ],
            separated: ["sttl", "ct_state_ttl", "ct_dst_src_ltm"]
                .map(String::from)
                .to_vec(),
            separation: 8.0,
            category_affinity: 0.7,
            label_column: "attack_cat".into(),
            unsw_extras: true,
        }
    }

    pub fn with_separation(mut self, separation: f64) -> Self {
        self.separation = separation;
        self
    }

    fn header(&self) -> Vec<String> {
        let mut cols = Vec::new();
        if self.unsw_extras {
            cols.push("id".to_string());
        }
        // UNSW order: dur, proto, service, state, then the remaining numerics
        let mut numeric = self.numeric.iter();
        if let Some(first) = numeric.next() {
            cols.push(first.clone());
        }
        cols.extend(self.categorical.iter().map(|(n, _)| n.clone()));
        cols.extend(numeric.cloned());
        cols.push(self.label_column.clone());
        if self.unsw_extras {
            cols.push("label".to_string());
        }
        cols
    }
}

/// UNSW-NB15 numeric feature columns in file order.
pub const UNSW_NUMERIC: [&str; 39] = [
    "dur", "spkts", "dpkts", "sbytes", "dbytes", "rate", "sttl", "dttl", "sload", "dload",
    "sloss", "dloss", "sinpkt", "dinpkt", "sjit", "djit", "swin", "stcpb", "dtcpb", "dwin",
    "tcprtt", "synack", "ackdat", "smean", "dmean", "trans_depth", "response_body_len",
    "ct_srv_src", "ct_state_ttl", "ct_dst_ltm", "ct_src_dport_ltm", "ct_dst_sport_ltm",
    "ct_dst_src_ltm", "is_ftp_login", "ct_ftp_cmd", "ct_flw_http_mthd", "ct_src_ltm",
    "ct_srv_dst", "is_sm_ips_ports",
];

pub const UNSW_SERVICES: [&str; 13] = [
    "-", "dhcp", "dns", "ftp", "ftp-data", "http", "irc", "pop3", "radius", "smtp", "snmp",
    "ssh", "ssl",
];

pub const UNSW_STATES: [&str; 7] = ["ACC", "CLO", "CON", "FIN", "INT", "REQ", "RST"];

/// A representative slice of the UNSW-NB15 protocol vocabulary.
pub const UNSW_PROTOCOLS: [&str; 24] = [
    "3pc", "a/n", "any", "arp", "egp", "ggp", "gre", "icmp", "igmp", "ip", "ipv6", "ospf",
    "pim", "rdp", "sctp", "sep", "tcp", "udp", "unas", "vrrp", "wsn", "xns-idp", "xtp", "zero",
];

pub fn fixture_class_names(n_classes: usize) -> Vec<String> {
    (0..n_classes)
        .map(|i| {
            UNSW_CLASSES
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("Class{i:02}"))
        })
        .collect()
}

/// `n_per_class` records for each of `n_classes` classes.
pub fn synth_fixture(
    seed: u64,
    n_per_class: usize,
    n_classes: usize,
    shape: &FixtureShape,
) -> Result<LabeledTable> {
    if n_per_class < 1 {
        return Err(Error::InvalidParam("n_per_class must be at least 1".into()));
    }
    synth_fixture_sized(seed, &vec![n_per_class; n_classes], shape)
}

/// Synthetic table with `class_sizes[k]` records of class `k`. Records are
/// emitted class by class; every draw comes from `seed`.
pub fn synth_fixture_sized(seed: u64, class_sizes: &[usize], shape: &FixtureShape) -> Result<LabeledTable> {
    if class_sizes.len() < 2 {
        return Err(Error::InvalidParam("a fixture needs at least two classes".into()));
    }
    let classes = fixture_class_names(class_sizes.len());
    let names = shape.header();
    let header = Arc::new(Header::new(names.iter().cloned()));
    let separated: BTreeSet<&str> = shape.separated.iter().map(String::as_str).collect();
    let half_width = 3f64.sqrt();
    let mut rng = seeds::stream(seed, "fixture");

    let mut records = Vec::with_capacity(class_sizes.iter().sum());
    let mut row = 0usize;
    for (k, &n) in class_sizes.iter().enumerate() {
        for _ in 0..n {
            let mut cells: BTreeMap<&str, String> = BTreeMap::new();
            for (j, name) in shape.numeric.iter().enumerate() {
                let noise: f64 = rng.gen_range(-half_width..half_width);
                let v = if separated.contains(name.as_str()) {
                    10.0 + k as f64 * shape.separation + noise
                } else {
                    // class-independent, with a per-feature offset and scale
                    (j as f64 + 1.0) * (5.0 + noise)
                };
                cells.insert(name, format!("{v:.6}"));
            }
            for (g, (name, vocab)) in shape.categorical.iter().enumerate() {
                let preferred = (k * (g + 2) + g) % vocab.len();
                let pick = if rng.gen_bool(shape.category_affinity) {
                    preferred
                } else {
                    rng.gen_range(0..vocab.len())
                };
                cells.insert(name, vocab[pick].clone());
            }
            let label = classes[k].clone();
            let values = names
                .iter()
                .map(|c| match c.as_str() {
                    "id" if shape.unsw_extras => (row + 1).to_string(),
                    "label" if shape.unsw_extras => {
                        if label == NORMAL_CLASS { "0" } else { "1" }.to_string()
                    }
                    c if c == shape.label_column => label.clone(),
                    c => cells[c].clone(),
                })
                .collect();
            records.push(FlowRecord {
                header: header.clone(),
                values,
                label,
                record_id: RecordId::new("synth", row),
            });
            row += 1;
        }
    }
    Ok(LabeledTable::new(header, records, Split::Train))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(t: &LabeledTable) -> Vec<usize> {
        t.records.iter().map(|r| r.record_id.row).collect()
    }

    #[test]
    fn fixture_is_deterministic() {
        let a = synth_fixture(5, 20, 3, &FixtureShape::small()).unwrap();
        let b = synth_fixture(5, 20, 3, &FixtureShape::small()).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        let c = synth_fixture(6, 20, 3, &FixtureShape::small()).unwrap();
        assert_ne!(a.to_csv().unwrap(), c.to_csv().unwrap());
    }

    #[test]
    fn counts_by_construction() {
        let t = synth_fixture(1, 10, 10, &FixtureShape::small()).unwrap();
        let counts = t.class_counts();
        assert_eq!(counts.per_class.len(), 10);
        assert!(counts.per_class.iter().all(|(_, n)| *n == 10));
        assert_eq!(counts.per_class[0].0, "Normal");
        assert_eq!(counts.binary(), (10, 90));
    }

    #[test]
    fn single_record_per_class() {
        let t = synth_fixture(1, 1, 2, &FixtureShape::small()).unwrap();
        assert_eq!(t.class_counts().total(), 2);
    }

    #[test]
    fn fixture_rejects_bad_sizes() {
        assert!(synth_fixture(1, 0, 2, &FixtureShape::small()).is_err());
        assert!(synth_fixture(1, 5, 1, &FixtureShape::small()).is_err());
    }

    #[test]
    fn csv_round_trip_through_loader() {
        let t = synth_fixture(2, 4, 3, &FixtureShape::unsw_like()).unwrap();
        let text = t.to_csv().unwrap();
        let back = read_csv(text.as_bytes(), "synth".into(), Split::Train, &LoadOptions::unsw()).unwrap();
        assert_eq!(back.records, t.records);
    }

    #[test]
    fn header_only_is_empty() {
        let t = read_csv(
            "id,dur,attack_cat,label\n".as_bytes(),
            "x".into(),
            Split::Test,
            &LoadOptions::unsw(),
        )
        .unwrap();
        assert!(t.is_empty());
        assert!(t.class_counts().per_class.is_empty());
    }

    #[test]
    fn missing_label_column_is_format_error() {
        let err = read_csv("a,b\n1,2\n".as_bytes(), "x".into(), Split::Test, &LoadOptions::unsw())
            .unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn inconsistent_binary_flag_errors() {
        let text = "dur,attack_cat,label\n1,Normal,0\n2,DoS,0\n";
        assert!(read_csv(text.as_bytes(), "x".into(), Split::Train, &LoadOptions::unsw()).is_err());
    }

    #[test]
    fn short_rows_are_reported() {
        let text = "dur,attack_cat,label\n1,Normal,0\n2,DoS\n3,DoS,1\n";
        let t = read_csv(text.as_bytes(), "x".into(), Split::Train, &LoadOptions::unsw()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.malformed_rows, vec![1]);
    }

    #[test]
    fn stratified_keeps_small_classes_whole() {
        let t = synth_fixture_sized(3, &[50, 7, 30], &FixtureShape::small()).unwrap();
        let s = stratified_sample(&t, &Quota::PerClass(10), 9).unwrap();
        let c = s.class_counts();
        assert_eq!(c.get("Normal"), 10);
        assert_eq!(c.get("Analysis"), 7);
        assert_eq!(c.get("Backdoor"), 10);
        assert_eq!(ids(&s), ids(&stratified_sample(&t, &Quota::PerClass(10), 9).unwrap()));
        assert_ne!(ids(&s), ids(&stratified_sample(&t, &Quota::PerClass(10), 10).unwrap()));
        assert!(stratified_sample(&t, &Quota::PerClass(0), 1).is_err());
    }

    #[test]
    fn stratified_one_per_class() {
        let t = synth_fixture(3, 5, 4, &FixtureShape::small()).unwrap();
        let s = stratified_sample(&t, &Quota::PerClass(1), 0).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.class_counts().per_class.iter().all(|(_, n)| *n == 1));
    }

    #[test]
    fn balanced_80_20() {
        let t = synth_fixture(4, 100, 3, &FixtureShape::small()).unwrap();
        let plan = SubsetPlan::new(1000, 0.2, 1).unwrap();
        let b = make_balanced_subset(&t, &plan).unwrap();
        for (_, n) in b.train.class_counts().per_class {
            assert_eq!(n, 80);
        }
        for (_, n) in b.holdout.class_counts().per_class {
            assert_eq!(n, 20);
        }
    }

    #[test]
    fn balanced_flags_singletons() {
        let t = synth_fixture_sized(4, &[10, 1], &FixtureShape::small()).unwrap();
        let b = make_balanced_subset(&t, &SubsetPlan::new(5, 0.2, 0).unwrap()).unwrap();
        assert_eq!(b.flagged, vec!["Analysis".to_string()]);
        assert_eq!(b.train.class_counts().get("Analysis"), 1);
        assert_eq!(b.total(), 6);
    }

    #[test]
    fn plan_validation() {
        assert!(SubsetPlan::new(10, 0.0, 0).is_err());
        assert!(SubsetPlan::new(10, 1.0, 0).is_err());
        assert!(SubsetPlan::new(0, 0.5, 0).is_err());
    }

    #[test]
    fn count_report_shape() {
        let train = synth_fixture_sized(1, &[3, 2], &FixtureShape::small()).unwrap();
        let test = synth_fixture_sized(1, &[1, 4, 5], &FixtureShape::small()).unwrap();
        let report = count_report(&train.class_counts(), &test.class_counts());
        assert_eq!(
            report,
            "class,train_count,test_count\nNormal,3,1\nAnalysis,2,4\nBackdoor,0,5\n"
        );
    }
}
