//! Random-forest donor imputation.
//!
//! `trees` CART trees are grown on bootstrap samples of the observed rows,
//! each split choosing among `ceil(sqrt(P))` random predictors. A missing
//! row is routed down one randomly chosen tree and takes the observed value
//! of a random training member of the leaf it lands in.

use rand::seq::index::sample;
use rand::Rng as _;

use crate::data::ColumnKind;
use crate::error::Result;
use crate::imputers::{ImputerConfig, Target};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub min_leaf: usize,
    /// Predictors tried per split.
    pub mtry: usize,
    /// Gini impurity on class codes instead of variance.
    pub classification: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        members: Vec<usize>,
    },
}

/// One CART tree. Leaves keep the indices of their training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Grower<'a> {
    x: &'a dyn Fn(usize, usize) -> f64,
    y: &'a [f64],
    n_features: usize,
    params: TreeParams,
    n_classes: usize,
}

fn impurity(y: &[f64], rows: &[usize], classification: bool, n_classes: usize) -> f64 {
    let n = rows.len() as f64;
    if classification {
        let mut counts = vec![0usize; n_classes];
        for &r in rows {
            counts[y[r] as usize] += 1;
        }
        1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
    } else {
        let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n;
        rows.iter().map(|&r| (y[r] - mean).powi(2)).sum::<f64>() / n
    }
}

impl Grower<'_> {
    /// Best (feature, threshold, weighted child impurity) over `mtry` features.
    fn best_split(&self, rows: &[usize], rng: &mut Rng) -> Option<(usize, f64, f64)> {
        let min_leaf = self.params.min_leaf;
        let n = rows.len();
        let mtry = self.params.mtry.min(self.n_features);
        let features = sample(rng, self.n_features, mtry);
        let mut best: Option<(usize, f64, f64)> = None;
        for f in features.iter() {
            let mut sorted: Vec<(f64, usize)> = rows.iter().map(|&r| ((self.x)(r, f), r)).collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            // running statistics for the left child
            let mut left_counts = vec![0usize; self.n_classes];
            let mut right_counts = vec![0usize; self.n_classes];
            let (mut ls, mut lss) = (0.0, 0.0);
            let (mut rs, mut rss) = (0.0, 0.0);
            for &(_, r) in &sorted {
                let v = self.y[r];
                if self.params.classification {
                    right_counts[v as usize] += 1;
                } else {
                    rs += v;
                    rss += v * v;
                }
            }
            for k in 0..n - 1 {
                let (xv, r) = sorted[k];
                let v = self.y[r];
                if self.params.classification {
                    left_counts[v as usize] += 1;
                    right_counts[v as usize] -= 1;
                } else {
                    ls += v;
                    lss += v * v;
                    rs -= v;
                    rss -= v * v;
                }
                let nl = k + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf || sorted[k + 1].0 == xv {
                    continue;
                }
                let score = if self.params.classification {
                    let gini = |c: &[usize], m: usize| {
                        1.0 - c.iter().map(|&x| (x as f64 / m as f64).powi(2)).sum::<f64>()
                    };
                    (nl as f64 * gini(&left_counts, nl) + nr as f64 * gini(&right_counts, nr))
                        / n as f64
                } else {
                    let sse_l = (lss - ls * ls / nl as f64).max(0.0);
                    let sse_r = (rss - rs * rs / nr as f64).max(0.0);
                    (sse_l + sse_r) / n as f64
                };
                if best.is_none_or(|b| score < b.2) {
                    best = Some((f, 0.5 * (xv + sorted[k + 1].0), score));
                }
            }
        }
        best
    }

    fn grow(&self, nodes: &mut Vec<Node>, rows: Vec<usize>, rng: &mut Rng) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf { members: Vec::new() });
        let parent = impurity(self.y, &rows, self.params.classification, self.n_classes);
        let split = if rows.len() >= 2 * self.params.min_leaf && parent > 1e-12 && self.n_features > 0
        {
            self.best_split(&rows, rng)
                .filter(|&(_, _, score)| score < parent - 1e-12 * (1.0 + parent))
        } else {
            None
        };
        match split {
            None => nodes[id] = Node::Leaf { members: rows },
            Some((feature, threshold, _)) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&i| (self.x)(i, feature) <= threshold);
                let left = self.grow(nodes, l, rng);
                let right = self.grow(nodes, r, rng);
                nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        id
    }
}

impl RegressionTree {
    /// Grow a tree on `rows`. `x(i, f)` reads predictor `f` of row `i`, and
    /// `y[i]` the response (a class code when classifying).
    pub fn fit(
        x: &dyn Fn(usize, usize) -> f64,
        n_features: usize,
        y: &[f64],
        rows: Vec<usize>,
        params: TreeParams,
        rng: &mut Rng,
    ) -> RegressionTree {
        let n_classes = if params.classification {
            rows.iter().map(|&r| y[r] as usize + 1).max().unwrap_or(1)
        } else {
            0
        };
        let grower = Grower {
            x,
            y,
            n_features,
            params,
            n_classes,
        };
        let mut nodes = Vec::new();
        grower.grow(&mut nodes, rows, rng);
        RegressionTree { nodes }
    }

    /// Training members of the leaf that `point` falls into.
    pub fn leaf_members(&self, point: &dyn Fn(usize) -> f64) -> &[usize] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { members } => return members,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if point(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

pub(crate) fn impute(t: &Target<'_>, cfg: &ImputerConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    t.require_donors(cfg.donors)?;
    let obs = t.observed_rows();
    let mis = t.missing_rows();
    let x = &t.predictors.data;
    let p = x.ncols();
    let params = TreeParams {
        min_leaf: cfg.min_leaf,
        mtry: ((p as f64).sqrt().ceil() as usize).max(1),
        classification: t.kind != ColumnKind::Continuous,
    };
    let read = |i: usize, f: usize| x[(i, f)];
    let trees: Vec<RegressionTree> = (0..cfg.trees)
        .map(|_| {
            let boot: Vec<usize> = (0..obs.len()).map(|_| obs[rng.random_range(0..obs.len())]).collect();
            RegressionTree::fit(&read, p, t.values, boot, params, rng)
        })
        .collect();
    Ok(mis
        .iter()
        .map(|&row| {
            let tree = &trees[rng.random_range(0..trees.len())];
            let members = tree.leaf_members(&|f| x[(row, f)]);
            t.values[members[rng.random_range(0..members.len())]]
        })
        .collect())
}
