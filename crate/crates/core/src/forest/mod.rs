//! Random forest over encoded feature vectors.
//!
//! Trees are grown with Gini splits on bootstrap samples. Every tree draws
//! from its own seeded stream, so the trained model does not depend on how
//! many worker threads grew it. Feature importance is the mean decrease in
//! Gini impurity, normalized to sum to one.

mod data;
mod split;
mod tree;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::encode::with_workers;
use crate::error::{Error, Result};
use crate::seeds;

pub use data::{Columns, TrainingSet};
pub use split::{best_split, class_counts, gini, SplitChoice};
pub use tree::{majority, train_tree, GrowParams, Node, Tree};

const FOREST_MAGIC: &str = "flowpix-forest v1";

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means ⌈√d⌉.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub seed: u64,
    /// Draw a bootstrap sample per tree. Off only for tests and debugging.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            mtry: None,
            max_depth: None,
            min_samples_leaf: 1,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1))
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParam("n_trees must be at least 1".into()));
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > n_features {
                return Err(Error::InvalidParam(format!(
                    "mtry {m} outside 1..={n_features}"
                )));
            }
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParam("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub params: ForestParams,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub schema_digest: Option<String>,
    pub trees: Vec<Tree>,
}

/// Trains `params.n_trees` trees on `workers` threads (0 = all cores).
pub fn train_forest(
    data: &TrainingSet,
    params: &ForestParams,
    class_names: Vec<String>,
    feature_names: Vec<String>,
    workers: usize,
) -> Result<ForestModel> {
    let d = data.n_features();
    params.validate(d)?;
    if feature_names.len() != d {
        return Err(Error::InvalidParam(format!(
            "{} feature names for {d} features",
            feature_names.len()
        )));
    }
    if class_names.len() != data.n_classes() {
        return Err(Error::InvalidParam("class names do not match label range".into()));
    }
    let present = class_counts(data.labels(), &(0..data.n_rows()).collect::<Vec<_>>(), data.n_classes())
        .iter()
        .filter(|&&c| c > 0)
        .count();
    if present < 2 {
        return Err(Error::DegenerateTask(format!(
            "forest training needs two classes, found {present}"
        )));
    }
    let grow = GrowParams {
        mtry: params.resolved_mtry(d),
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
    };
    let n = data.n_rows();
    let trees = with_workers(workers, || {
        (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seeds::indexed_stream(params.seed, "forest/tree", t as u64);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                train_tree(data, &rows, &grow, &mut rng)
            })
            .collect::<Vec<_>>()
    })?;
    Ok(ForestModel {
        params: params.clone(),
        class_names,
        feature_names,
        schema_digest: None,
        trees,
    })
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Majority vote over trees, lowest class index on ties.
    pub fn predict_with(&self, value: impl Fn(usize) -> f64) -> usize {
        let mut votes = vec![0u32; self.n_classes()];
        for t in &self.trees {
            votes[t.predict(&value)] += 1;
        }
        majority(&votes)
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        self.check_len(features.len())?;
        Ok(self.predict_with(|f| features[f]))
    }

    pub fn predict_bytes(&self, features: &[u8]) -> Result<usize> {
        self.check_len(features.len())?;
        Ok(self.predict_with(|f| features[f] as f64))
    }

    pub fn predict_set(&self, data: &TrainingSet, workers: usize) -> Result<Vec<usize>> {
        self.check_len(data.n_features())?;
        with_workers(workers, || {
            (0..data.n_rows())
                .into_par_iter()
                .map(|r| self.predict_with(|f| data.value(f, r)))
                .collect()
        })
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_features() {
            return Err(Error::InvalidParam(format!(
                "feature vector has {len} values, model expects {}",
                self.n_features()
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        let opt = |o: Option<usize>| o.map_or("none".to_string(), |v| v.to_string());
        let mut out = String::new();
        let _ = writeln!(out, "{FOREST_MAGIC}");
        let _ = writeln!(out, "n_trees {}", p.n_trees);
        let _ = writeln!(out, "mtry {}", opt(p.mtry));
        let _ = writeln!(out, "max_depth {}", opt(p.max_depth));
        let _ = writeln!(out, "min_samples_leaf {}", p.min_samples_leaf);
        let _ = writeln!(out, "seed {}", p.seed);
        let _ = writeln!(out, "bootstrap {}", p.bootstrap);
        let _ = writeln!(
            out,
            "schema_digest {}",
            self.schema_digest.as_deref().unwrap_or("none")
        );
        let _ = writeln!(out, "classes {}", self.class_names.join("|"));
        let _ = writeln!(out, "features {}", self.feature_names.len());
        for f in &self.feature_names {
            let _ = writeln!(out, "{f}");
        }
        for (i, t) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "tree {i} {} {}", t.nodes.len(), t.n_samples);
            for node in &t.nodes {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                        impurity_decrease,
                        n_node_samples,
                    } => {
                        let _ = writeln!(
                            out,
                            "S {feature} {threshold} {left} {right} {impurity_decrease} {n_node_samples}"
                        );
                    }
                    Node::Leaf { class_counts } => {
                        out.push('L');
                        for c in class_counts {
                            let _ = write!(out, " {c}");
                        }
                        out.push('\n');
                    }
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("forest model: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some(FOREST_MAGIC) {
            return Err(bad("missing `flowpix-forest v1` header"));
        }
        let mut field = |key: &str| -> Result<String> {
            lines
                .next()
                .and_then(|l| l.strip_prefix(key))
                .and_then(|l| l.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| bad(&format!("expected `{key}` line")))
        };
        fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
            s.parse()
                .map_err(|_| Error::Format(format!("forest model: bad number {s:?}")))
        }
        let opt = |s: String| -> Result<Option<usize>> {
            if s == "none" {
                Ok(None)
            } else {
                num(&s).map(Some)
            }
        };
        let n_trees: usize = num(&field("n_trees")?)?;
        let mtry = opt(field("mtry")?)?;
        let max_depth = opt(field("max_depth")?)?;
        let min_samples_leaf = num(&field("min_samples_leaf")?)?;
        let seed = num(&field("seed")?)?;
        let bootstrap = num(&field("bootstrap")?)?;
        let digest = field("schema_digest")?;
        let classes = field("classes")?;
        let n_features: usize = num(&field("features")?)?;
        let feature_names: Vec<String> = (0..n_features)
            .map(|_| lines.next().map(str::to_string).ok_or_else(|| bad("truncated feature list")))
            .collect::<Result<_>>()?;
        let class_names: Vec<String> = classes.split('|').map(str::to_string).collect();

        let mut trees = Vec::with_capacity(n_trees);
        for i in 0..n_trees {
            let head = lines.next().ok_or_else(|| bad("missing tree"))?;
            let parts: Vec<&str> = head.split(' ').collect();
            if parts.len() != 4 || parts[0] != "tree" || num::<usize>(parts[1])? != i {
                return Err(bad(&format!("bad tree header {head:?}")));
            }
            let n_nodes: usize = num(parts[2])?;
            let n_samples: usize = num(parts[3])?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let line = lines.next().ok_or_else(|| bad("truncated tree"))?;
                let mut it = line.split(' ');
                let node = match it.next() {
                    Some("S") => {
                        let v: Vec<&str> = it.collect();
                        if v.len() != 6 {
                            return Err(bad("split node needs six fields"));
                        }
                        Node::Split {
                            feature: num(v[0])?,
                            threshold: num(v[1])?,
                            left: num(v[2])?,
                            right: num(v[3])?,
                            impurity_decrease: num(v[4])?,
                            n_node_samples: num(v[5])?,
                        }
                    }
                    Some("L") => Node::Leaf {
                        class_counts: it.map(num).collect::<Result<_>>()?,
                    },
                    _ => return Err(bad(&format!("bad node line {line:?}"))),
                };
                nodes.push(node);
            }
            for node in &nodes {
                match node {
                    Node::Split { feature, left, right, .. } => {
                        if *feature >= n_features || *left >= n_nodes || *right >= n_nodes {
                            return Err(bad("node index out of range"));
                        }
                    }
                    Node::Leaf { class_counts } => {
                        if class_counts.len() != class_names.len() {
                            return Err(bad("leaf class-count length mismatch"));
                        }
                    }
                }
            }
            trees.push(Tree { nodes, n_samples });
        }
        Ok(ForestModel {
            params: ForestParams {
                n_trees,
                mtry,
                max_depth,
                min_samples_leaf,
                seed,
                bootstrap,
            },
            class_names,
            feature_names,
            schema_digest: (digest != "none").then_some(digest),
            trees,
        })
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(Error::at_path(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&fs::read_to_string(path).map_err(Error::at_path(path))?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceEntry {
    pub feature: String,
    pub index: usize,
    pub importance: f64,
}

/// Mean-decrease-Gini importances, sorted descending (ties by feature index).
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceReport {
    pub fn top(&self, n: usize) -> &[ImportanceEntry] {
        &self.entries[..n.min(self.entries.len())]
    }

    pub fn get(&self, feature: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.feature == feature)
            .map(|e| e.importance)
    }

    pub fn to_text(&self, top: usize) -> String {
        let mut out = String::from("rank,feature,importance\n");
        for (i, e) in self.top(top).iter().enumerate() {
            let _ = writeln!(out, "{},{},{:.6}", i + 1, e.feature, e.importance);
        }
        out
    }
}

/// Per tree: `Σ (n_node / n_tree) · Δ` over the nodes splitting on each
/// feature; averaged over trees and normalized to sum to one.
pub fn importance(model: &ForestModel) -> ImportanceReport {
    let d = model.n_features();
    let mut totals = vec![0.0f64; d];
    for t in &model.trees {
        let n = t.n_samples.max(1) as f64;
        for node in &t.nodes {
            if let Node::Split {
                feature,
                impurity_decrease,
                n_node_samples,
                ..
            } = node
            {
                totals[*feature] += *n_node_samples as f64 / n * impurity_decrease;
            }
        }
    }
    let n_trees = model.trees.len().max(1) as f64;
    totals.iter_mut().for_each(|v| *v /= n_trees);
    let sum: f64 = totals.iter().sum();
    if sum > 0.0 {
        totals.iter_mut().for_each(|v| *v /= sum);
    }
    let mut entries: Vec<ImportanceEntry> = totals
        .into_iter()
        .enumerate()
        .map(|(index, importance)| ImportanceEntry {
            feature: model.feature_names[index].clone(),
            index,
            importance,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.importance
            .total_cmp(&a.importance)
            .then(a.index.cmp(&b.index))
    });
    ImportanceReport { entries }
}
