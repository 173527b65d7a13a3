//! Bagged randomized decision trees split on Gini impurity. The match
//! probability is the share of trees voting "match".

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    /// `None` uses `round(sqrt(feature count))`.
    pub features_per_split: Option<usize>,
    pub min_samples_split: usize,
    pub positive_weight: f64,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            max_depth: None,
            features_per_split: None,
            min_samples_split: 2,
            positive_weight: 1.0,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        vote: bool,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn vote(&self, row: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { vote } => return *vote,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn votes(&self, row: &[f64]) -> usize {
        self.trees.iter().filter(|t| t.vote(row)).count()
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        self.votes(row) as f64 / self.trees.len() as f64
    }

    pub fn train(rows: &[Vec<f64>], labels: &[bool], params: &ForestParams) -> Forest {
        let d = rows.first().map_or(0, Vec::len);
        let mtry = params
            .features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().round() as usize)
            .clamp(1, d.max(1));
        let mut master = ChaCha8Rng::seed_from_u64(params.seed);
        let trees = (0..params.trees)
            .map(|_| {
                let mut rng = ChaCha8Rng::seed_from_u64(master.gen());
                let sample: Vec<usize> = (0..rows.len()).map(|_| rng.gen_range(0..rows.len())).collect();
                let mut builder = TreeBuilder {
                    rows,
                    labels,
                    params,
                    mtry,
                    rng,
                    nodes: Vec::new(),
                };
                builder.grow(sample, 0);
                Tree { nodes: builder.nodes }
            })
            .collect();
        Forest { n_features: d, trees }
    }
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [bool],
    params: &'a ForestParams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

fn gini(pos: f64, neg: f64) -> f64 {
    let n = pos + neg;
    if n <= 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

impl TreeBuilder<'_> {
    fn weight(&self, i: usize) -> (f64, f64) {
        if self.labels[i] {
            (self.params.positive_weight, 0.0)
        } else {
            (0.0, 1.0)
        }
    }

    fn counts(&self, idx: &[usize]) -> (f64, f64) {
        idx.iter().fold((0.0, 0.0), |(p, n), &i| {
            let (wp, wn) = self.weight(i);
            (p + wp, n + wn)
        })
    }

    /// Appends the subtree for `idx` and returns its node index.
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let (pos, neg) = self.counts(&idx);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { vote: pos > neg });
        let pure = pos == 0.0 || neg == 0.0;
        let depth_reached = self.params.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_reached || idx.len() < self.params.min_samples_split {
            return at;
        }
        let Some((feature, threshold)) = self.best_split(&idx, pos, neg) else {
            return at;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.rows[i][feature] <= threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left: l,
            right: r,
        };
        at
    }

    fn best_split(&mut self, idx: &[usize], pos: f64, neg: f64) -> Option<(usize, f64)> {
        let d = self.rows[0].len();
        let parent = gini(pos, neg);
        let total = pos + neg;
        let mut best: Option<(f64, usize, f64)> = None;
        let features = sample(&mut self.rng, d, self.mtry.min(d)).into_vec();
        let mut order: Vec<usize> = idx.to_vec();
        for f in features {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let (mut lp, mut ln) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let (wp, wn) = self.weight(order[k]);
                lp += wp;
                ln += wn;
                let here = self.rows[order[k]][f];
                let next = self.rows[order[k + 1]][f];
                if here == next {
                    continue;
                }
                let (rp, rn) = (pos - lp, neg - ln);
                let impurity = ((lp + ln) * gini(lp, ln) + (rp + rn) * gini(rp, rn)) / total;
                let gain = parent - impurity;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    let mut threshold = here + (next - here) / 2.0;
                    if threshold >= next {
                        threshold = here;
                    }
                    best = Some((gain, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}
