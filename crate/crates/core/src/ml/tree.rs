//! Regression trees grown by greedy variance reduction.
//!
//! One builder serves three split strategies: exhaustive search over every
//! feature (CART), exhaustive search over a random feature subset (random
//! forest), and one uniformly drawn threshold per sampled feature (extra
//! trees). Leaves predict the mean response of their rows.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::TreeParams;
use crate::domain::{Dataset, Predict};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    n_features: usize,
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }
}

impl Predict for RegressionTree {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Schema(format!(
                "expected {} features, found {}",
                self.n_features,
                x.len()
            )));
        }
        Ok(self.predict_row(x))
    }
}

/// Split search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Splitter {
    Best,
    /// Best split over `m` randomly chosen non-constant features.
    RandomSubset(usize),
    /// One random threshold for each of `m` randomly chosen features.
    ExtraRandom(usize),
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    /// `sum_l^2 / n_l + sum_r^2 / n_r` on node-centered responses; larger
    /// means lower child SSE.
    score: f64,
}

fn better(c: &Candidate, best: &Option<Candidate>) -> bool {
    match best {
        None => true,
        Some(b) => {
            c.score > b.score
                || (c.score == b.score
                    && (c.feature, c.threshold) < (b.feature, b.threshold))
        }
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a TreeParams,
    splitter: Splitter,
    n_features: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let y0 = self.y[idx[0]];
        let value = if idx.iter().all(|&i| self.y[i] == y0) {
            y0
        } else {
            idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
        };
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn build(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let y0 = self.y[idx[0]];
        let pure = idx.iter().all(|&i| self.y[i] == y0);
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || idx.len() < 2 * self.params.min_samples_leaf {
            return self.leaf(idx);
        }
        let Some(split) = self.find_split(idx, rng) else {
            return self.leaf(idx);
        };
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: f64::NAN });
        let mid = partition(idx, |i| self.x[i][split.feature] <= split.threshold);
        let (l, r) = idx.split_at_mut(mid);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot
    }

    fn is_constant(&self, idx: &[usize], f: usize) -> bool {
        let v = self.x[idx[0]][f];
        idx.iter().all(|&i| self.x[i][f] == v)
    }

    /// Up to `m` non-constant features in random order, returned ascending.
    fn sample_features(&self, idx: &[usize], m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_features).collect();
        order.shuffle(rng);
        let mut chosen: Vec<usize> = order
            .into_iter()
            .filter(|&f| !self.is_constant(idx, f))
            .take(m)
            .collect();
        chosen.sort_unstable();
        chosen
    }

    fn find_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let n = idx.len() as f64;
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n;
        let features: Vec<usize> = match self.splitter {
            Splitter::Best => (0..self.n_features).collect(),
            Splitter::RandomSubset(m) | Splitter::ExtraRandom(m) => self.sample_features(idx, m, rng),
        };
        let mut best = None;
        for f in features {
            let cand = match self.splitter {
                Splitter::ExtraRandom(_) => self.random_split(idx, f, mean, rng),
                _ => self.best_split(idx, f, mean),
            };
            if let Some(c) = cand {
                if better(&c, &best) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_split(&self, idx: &[usize], f: usize, mean: f64) -> Option<Candidate> {
        let mut pairs: Vec<(f64, f64)> = idx.iter().map(|&i| (self.x[i][f], self.y[i] - mean)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let msl = self.params.min_samples_leaf;
        let mut left_sum = 0.0;
        let mut best: Option<Candidate> = None;
        for p in 0..n - 1 {
            left_sum += pairs[p].1;
            let (lo, hi) = (pairs[p].0, pairs[p + 1].0);
            let n_left = p + 1;
            if lo == hi || n_left < msl || n - n_left < msl {
                continue;
            }
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / n_left as f64
                + right_sum * right_sum / (n - n_left) as f64;
            if best.is_none_or(|b| score > b.score) {
                best = Some(Candidate {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    score,
                });
            }
        }
        best
    }

    fn random_split(&self, idx: &[usize], f: usize, mean: f64, rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = self.x[i][f];
            (lo.min(v), hi.max(v))
        });
        if lo >= hi {
            return None;
        }
        let mut threshold = rng.random_range(lo..hi);
        if threshold >= hi {
            threshold = lo;
        }
        let (mut n_left, mut left_sum, mut right_sum) = (0usize, 0.0, 0.0);
        for &i in idx {
            let r = self.y[i] - mean;
            if self.x[i][f] <= threshold {
                n_left += 1;
                left_sum += r;
            } else {
                right_sum += r;
            }
        }
        let n_right = idx.len() - n_left;
        let msl = self.params.min_samples_leaf;
        if n_left < msl || n_right < msl {
            return None;
        }
        Some(Candidate {
            feature: f,
            threshold,
            score: left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64,
        })
    }
}

/// Threshold strictly separating `lo < hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi || m < lo {
        lo
    } else {
        m
    }
}

/// Stable in-place partition; returns the number of elements satisfying
/// `pred`, which are moved to the front.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let k = yes.len();
    idx[..k].copy_from_slice(&yes);
    idx[k..].copy_from_slice(&no);
    k
}

pub(crate) fn grow(
    x: &[Vec<f64>],
    y: &[f64],
    mut idx: Vec<usize>,
    params: &TreeParams,
    splitter: Splitter,
    rng: &mut ChaCha8Rng,
) -> Result<RegressionTree> {
    params.validate()?;
    if idx.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_features = x[idx[0]].len();
    let mut b = Builder {
        x,
        y,
        params,
        splitter,
        n_features,
        nodes: Vec::new(),
    };
    b.build(&mut idx, 0, rng);
    Ok(RegressionTree {
        n_features,
        nodes: b.nodes,
    })
}

/// Deterministic CART on the full training set.
pub fn fit_cart(train: &Dataset, params: &TreeParams) -> Result<RegressionTree> {
    use rand::SeedableRng;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    // Best-split search never draws from the generator.
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    grow(
        train.features(),
        train.responses(),
        (0..train.len()).collect(),
        params,
        Splitter::Best,
        &mut rng,
    )
}
