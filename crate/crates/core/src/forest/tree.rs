use rand::seq::index::sample;
use rand::Rng;

use super::data::TrainingSet;
use super::split::{best_split, class_counts};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        impurity_decrease: f64,
        n_node_samples: usize,
    },
    Leaf {
        class_counts: Vec<u32>,
    },
}

/// Nodes in a flat array; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Rows (with multiplicity) the tree was grown on.
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowParams {
    pub mtry: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

/// Majority class, lowest index on ties.
pub fn majority(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

impl Tree {
    pub fn leaf_for(&self, value: impl Fn(usize) -> f64) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class_counts } => return class_counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if value(*feature) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, value: impl Fn(usize) -> f64) -> usize {
        majority(self.leaf_for(value))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Grows a CART tree on `rows` (indices into `data`, repeats allowed).
/// Each node samples `mtry` candidate features without replacement from
/// `rng`; nodes are expanded depth-first, left before right.
pub fn train_tree<R: Rng>(data: &TrainingSet, rows: &[usize], params: &GrowParams, rng: &mut R) -> Tree {
    let d = data.n_features();
    let mtry = params.mtry.clamp(1, d.max(1));
    let min_leaf = params.min_samples_leaf.max(1);
    let mut rows = rows.to_vec();
    let n_samples = rows.len();
    let mut nodes = vec![Node::Leaf {
        class_counts: Vec::new(),
    }];
    // (node, start, end, depth)
    let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];

    while let Some((id, start, end, depth)) = stack.pop() {
        let slice = &mut rows[start..end];
        let counts = class_counts(data.labels(), slice, data.n_classes());
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = params.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_capped || slice.len() < 2 * min_leaf || d == 0 {
            nodes[id] = Node::Leaf { class_counts: counts };
            continue;
        }
        let candidates: Vec<usize> = sample(rng, d, mtry).into_vec();
        let Some(choice) = best_split(data, slice, &candidates, min_leaf) else {
            nodes[id] = Node::Leaf { class_counts: counts };
            continue;
        };

        // stable partition: left rows keep their relative order
        let (mut l, mut r): (Vec<usize>, Vec<usize>) = slice
            .iter()
            .partition(|&&row| data.value(choice.feature, row) <= choice.threshold);
        debug_assert_eq!(l.len(), choice.n_left);
        let mid = start + l.len();
        l.append(&mut r);
        slice.copy_from_slice(&l);

        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { class_counts: Vec::new() });
        nodes.push(Node::Leaf { class_counts: Vec::new() });
        nodes[id] = Node::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left,
            right,
            impurity_decrease: choice.impurity_decrease,
            n_node_samples: end - start,
        };
        stack.push((right, mid, end, depth + 1));
        stack.push((left, start, mid, depth + 1));
    }
    Tree { nodes, n_samples }
}
