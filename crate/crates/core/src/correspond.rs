//! Nearest-neighbor matching in descriptor space.

use rayon::prelude::*;

use crate::descriptors::FeatureSet;
use crate::error::{Error, Result};

/// Above this many target descriptors the matcher builds a kd-tree instead of
/// scanning. Both paths are exact and return identical results.
const EXHAUSTIVE_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: usize,
    pub target: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    /// Sorted by source index.
    pub pairs: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> CorrespondenceSet {
        CorrespondenceSet { pairs: indices.iter().map(|&i| self.pairs[i]).collect() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchPolicy {
    /// Every source feature takes its nearest target.
    #[default]
    Forward,
    /// Keep a pair only if each side is the other's nearest neighbor.
    Mutual,
}

/// Pairs features by L2 distance between descriptors. Invalid descriptors
/// neither match nor get matched. Equal distances resolve to the lower index.
pub fn match_nn(source: &FeatureSet, target: &FeatureSet, policy: MatchPolicy) -> Result<CorrespondenceSet> {
    if source.kind != target.kind {
        return Err(Error::KindMismatch { source_kind: source.kind.name(), target_kind: target.kind.name() });
    }
    let src = valid_rows(source);
    let tgt = valid_rows(target);
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::EmptyInput("no valid descriptors to match".into()));
    }

    let forward = nearest_all(&src, &tgt);
    let backward = match policy {
        MatchPolicy::Forward => None,
        MatchPolicy::Mutual => Some(nearest_all(&tgt, &src)),
    };
    let pairs = forward
        .iter()
        .enumerate()
        .filter(|(s, (t, _))| backward.as_ref().is_none_or(|b| b[*t].0 == *s))
        .map(|(s, &(t, d2))| Correspondence { source: src[s].0, target: tgt[t].0, distance: d2.sqrt() })
        .collect();
    Ok(CorrespondenceSet { pairs })
}

fn valid_rows(set: &FeatureSet) -> Vec<(usize, &[f64])> {
    set.descriptors
        .iter()
        .enumerate()
        .filter(|(_, d)| d.valid)
        .map(|(i, d)| (i, d.values.as_slice()))
        .collect()
}

/// For each query row, the position in `data` of its nearest row and the
/// squared distance.
fn nearest_all(queries: &[(usize, &[f64])], data: &[(usize, &[f64])]) -> Vec<(usize, f64)> {
    if data.len() <= EXHAUSTIVE_LIMIT {
        queries.par_iter().map(|(_, q)| scan(q, data)).collect()
    } else {
        let tree = VecTree::new(data.iter().map(|(_, v)| *v).collect());
        queries.par_iter().map(|(_, q)| tree.nearest(q)).collect()
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn scan(query: &[f64], data: &[(usize, &[f64])]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, (_, v)) in data.iter().enumerate() {
        let d = squared_distance(query, v);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

const LEAF: usize = 16;

enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Exact kd-tree over rows of equal dimension.
struct VecTree<'a> {
    rows: Vec<&'a [f64]>,
    order: Vec<usize>,
    root: Node,
}

impl<'a> VecTree<'a> {
    fn new(rows: Vec<&'a [f64]>) -> Self {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        let root = Self::build(&rows, &mut order, 0);
        Self { rows, order, root }
    }

    fn build(rows: &[&[f64]], order: &mut [usize], offset: usize) -> Node {
        let n = order.len();
        if n <= LEAF {
            return Node::Leaf { start: offset, end: offset + n };
        }
        let dims = rows[order[0]].len();
        let spread = |d: usize| {
            let (lo, hi) = order
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(rows[i][d]), hi.max(rows[i][d])));
            hi - lo
        };
        let dim = (0..dims).max_by(|&a, &b| spread(a).total_cmp(&spread(b))).unwrap_or(0);
        if spread(dim) == 0.0 {
            return Node::Leaf { start: offset, end: offset + n };
        }
        let mid = n / 2;
        order.select_nth_unstable_by(mid, |&a, &b| rows[a][dim].total_cmp(&rows[b][dim]));
        let value = rows[order[mid]][dim];
        let (l, r) = order.split_at_mut(mid);
        Node::Split {
            dim,
            value,
            left: Box::new(Self::build(rows, l, offset)),
            right: Box::new(Self::build(rows, r, offset + mid)),
        }
    }

    fn nearest(&self, query: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(&self.root, query, &mut best);
        best
    }

    fn search(&self, node: &Node, query: &[f64], best: &mut (usize, f64)) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let d = squared_distance(query, self.rows[i]);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = query[*dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, best);
                if diff * diff <= best.1 {
                    self.search(far, query, best);
                }
            }
        }
    }
}
