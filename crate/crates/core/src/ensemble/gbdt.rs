//! Multiclass gradient-boosted trees over sparse binary features.
//!
//! Each round fits one regression tree per class to the softmax gradient
//! (`p - y`) and hessian (`p(1-p)`) of that class's logit. Splits test a
//! single binary feature; split search is exact and greedy, with ties in gain
//! going to the lowest feature index. Leaf values are Newton steps
//! `-G / (H + lambda)` shrunk by the learning rate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};

/// Scores a sparse binary instance (sorted indices of set bits).
pub trait MetaClassifier: Send + Sync {
    fn n_classes(&self) -> usize;

    /// One score per class; the prediction is the first maximum.
    fn scores(&self, active: &[u32]) -> Vec<f64>;
}

/// Trains a [`MetaClassifier`].
pub trait MetaLearner: Sync {
    type Model: MetaClassifier;

    fn fit(
        &self,
        rows: &[&[u32]],
        labels: &[usize],
        n_classes: usize,
        n_features: usize,
    ) -> Result<Self::Model>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbdtParams {
    pub rounds: u32,
    pub max_depth: u32,
    pub learning_rate: f64,
    pub seed: u64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum hessian mass on each side of a split.
    pub min_child_weight: f64,
    /// Row sampling fraction per round; 1.0 disables sampling.
    pub subsample: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            rounds: 100,
            max_depth: 3,
            learning_rate: 0.3,
            seed: 1,
            lambda: 1.0,
            min_child_weight: 0.1,
            subsample: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: u32,
        absent: u32,
        present: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn eval(&self, active: &[u32]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    absent,
                    present,
                } => {
                    i = if active.binary_search(feature).is_ok() {
                        *present as usize
                    } else {
                        *absent as usize
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gbdt {
    params: GbdtParams,
    n_classes: usize,
    n_features: usize,
    /// `rounds[r][k]` is the tree for class `k` in round `r`.
    rounds: Vec<Vec<Tree>>,
}

impl Gbdt {
    pub fn params(&self) -> &GbdtParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn tree_count(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }
}

impl MetaClassifier for Gbdt {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn scores(&self, active: &[u32]) -> Vec<f64> {
        let mut s = vec![0.0; self.n_classes];
        for round in &self.rounds {
            for (k, tree) in round.iter().enumerate() {
                s[k] += tree.eval(active);
            }
        }
        s
    }
}

/// Scratch space for split search, reused across nodes.
struct SplitScratch {
    grad: Vec<f64>,
    hess: Vec<f64>,
    touched: Vec<u32>,
}

struct TreeBuilder<'a> {
    rows: &'a [&'a [u32]],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbdtParams,
    scratch: SplitScratch,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, members: Vec<usize>, depth: u32) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf(0.0));
        let (g, h) = members
            .iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + self.grad[i], h + self.hess[i]));
        let lambda = self.params.lambda;
        let leaf = -g / (h + lambda) * self.params.learning_rate;

        if depth >= self.params.max_depth || members.len() < 2 {
            self.nodes[id as usize] = Node::Leaf(leaf);
            return id;
        }
        let Some(feature) = self.best_split(&members, g, h) else {
            self.nodes[id as usize] = Node::Leaf(leaf);
            return id;
        };
        let (present, absent): (Vec<usize>, Vec<usize>) = members
            .into_iter()
            .partition(|&i| self.rows[i].binary_search(&feature).is_ok());
        let absent_id = self.build(absent, depth + 1);
        let present_id = self.build(present, depth + 1);
        self.nodes[id as usize] = Node::Split {
            feature,
            absent: absent_id,
            present: present_id,
        };
        id
    }

    fn best_split(&mut self, members: &[usize], g: f64, h: f64) -> Option<u32> {
        let s = &mut self.scratch;
        for &i in members {
            for &f in self.rows[i] {
                let fi = f as usize;
                if s.hess[fi] == 0.0 && s.grad[fi] == 0.0 {
                    s.touched.push(f);
                }
                s.grad[fi] += self.grad[i];
                s.hess[fi] += self.hess[i];
            }
        }
        s.touched.sort_unstable();
        s.touched.dedup();

        let lambda = self.params.lambda;
        let mcw = self.params.min_child_weight;
        let parent = g * g / (h + lambda);
        let mut best: Option<(u32, f64)> = None;
        for &f in &s.touched {
            let (g1, h1) = (s.grad[f as usize], s.hess[f as usize]);
            let (g0, h0) = (g - g1, h - h1);
            if h1 < mcw || h0 < mcw {
                continue;
            }
            let gain = g1 * g1 / (h1 + lambda) + g0 * g0 / (h0 + lambda) - parent;
            if gain > 1e-12 && best.is_none_or(|(_, b)| gain > b) {
                best = Some((f, gain));
            }
        }
        for &f in &s.touched {
            s.grad[f as usize] = 0.0;
            s.hess[f as usize] = 0.0;
        }
        s.touched.clear();
        best.map(|(f, _)| f)
    }
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

impl MetaLearner for GbdtParams {
    type Model = Gbdt;

    fn fit(
        &self,
        rows: &[&[u32]],
        labels: &[usize],
        n_classes: usize,
        n_features: usize,
    ) -> Result<Gbdt> {
        if rows.is_empty() || rows.len() != labels.len() {
            return Err(Error::Invalid(format!(
                "{} rows with {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if n_classes == 0 || labels.iter().any(|&y| y >= n_classes) {
            return Err(Error::Invalid("label out of class range".into()));
        }
        if rows
            .iter()
            .any(|r| r.windows(2).any(|w| w[0] >= w[1]) || r.last().is_some_and(|&f| f as usize >= n_features))
        {
            return Err(Error::Invalid("feature indices must be sorted, unique and in range".into()));
        }
        if !(0.0 < self.subsample && self.subsample <= 1.0) {
            return Err(Error::Invalid("subsample must be in (0, 1]".into()));
        }

        let mut model = Gbdt {
            params: *self,
            n_classes,
            n_features,
            rounds: Vec::new(),
        };
        // A single class needs no trees: every score is zero and argmax picks it.
        if n_classes == 1 {
            return Ok(model);
        }

        let n = rows.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut logits = vec![0.0; n * n_classes];
        let mut probs = vec![0.0; n * n_classes];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut scratch = Some(SplitScratch {
            grad: vec![0.0; n_features],
            hess: vec![0.0; n_features],
            touched: Vec::new(),
        });

        for _ in 0..self.rounds {
            probs.copy_from_slice(&logits);
            for row in probs.chunks_mut(n_classes) {
                softmax_in_place(row);
            }
            let members: Vec<usize> = if self.subsample < 1.0 {
                (0..n).filter(|_| rng.gen::<f64>() < self.subsample).collect()
            } else {
                (0..n).collect()
            };

            let mut trees = Vec::with_capacity(n_classes);
            for k in 0..n_classes {
                for i in 0..n {
                    let p = probs[i * n_classes + k];
                    let y = if labels[i] == k { 1.0 } else { 0.0 };
                    grad[i] = p - y;
                    hess[i] = (p * (1.0 - p)).max(1e-16);
                }
                let mut builder = TreeBuilder {
                    rows,
                    grad: &grad,
                    hess: &hess,
                    params: self,
                    scratch: scratch.take().expect("scratch"),
                    nodes: Vec::new(),
                };
                builder.build(members.clone(), 0);
                scratch = Some(builder.scratch);
                let tree = Tree {
                    nodes: builder.nodes,
                };
                for (i, row) in rows.iter().enumerate() {
                    logits[i * n_classes + k] += tree.eval(row);
                }
                trees.push(tree);
            }
            model.rounds.push(trees);
        }
        Ok(model)
    }
}

pub(crate) fn encode(model: &Gbdt, enc: &mut Encoder) {
    let p = &model.params;
    enc.u32(p.rounds);
    enc.u32(p.max_depth);
    enc.f64(p.learning_rate);
    enc.u64(p.seed);
    enc.f64(p.lambda);
    enc.f64(p.min_child_weight);
    enc.f64(p.subsample);
    enc.u64(model.n_classes as u64);
    enc.u64(model.n_features as u64);
    enc.u64(model.rounds.len() as u64);
    for round in &model.rounds {
        enc.u64(round.len() as u64);
        for tree in round {
            enc.u64(tree.nodes.len() as u64);
            for node in &tree.nodes {
                match node {
                    Node::Leaf(v) => {
                        enc.u8(0);
                        enc.f64(*v);
                    }
                    Node::Split {
                        feature,
                        absent,
                        present,
                    } => {
                        enc.u8(1);
                        enc.u32(*feature);
                        enc.u32(*absent);
                        enc.u32(*present);
                    }
                }
            }
        }
    }
}

pub(crate) fn decode(dec: &mut Decoder<'_>) -> Result<Gbdt> {
    let params = GbdtParams {
        rounds: dec.u32()?,
        max_depth: dec.u32()?,
        learning_rate: dec.f64()?,
        seed: dec.u64()?,
        lambda: dec.f64()?,
        min_child_weight: dec.f64()?,
        subsample: dec.f64()?,
    };
    let n_classes = dec.u64()? as usize;
    let n_features = dec.u64()? as usize;
    let n_rounds = dec.len(8)?;
    let mut rounds = Vec::with_capacity(n_rounds);
    for _ in 0..n_rounds {
        let n_trees = dec.len(8)?;
        if n_trees != n_classes {
            return Err(Error::Corrupt(format!("{n_trees} trees for {n_classes} classes")));
        }
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = dec.len(9)?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                nodes.push(match dec.u8()? {
                    0 => Node::Leaf(dec.f64()?),
                    1 => Node::Split {
                        feature: dec.u32()?,
                        absent: dec.u32()?,
                        present: dec.u32()?,
                    },
                    t => return Err(Error::Corrupt(format!("unknown node tag {t}"))),
                });
            }
            // Children must point forward so evaluation terminates.
            for (i, node) in nodes.iter().enumerate() {
                if let Node::Split { absent, present, .. } = node {
                    for &c in [absent, present] {
                        if c as usize <= i || c as usize >= nodes.len() {
                            return Err(Error::Corrupt("invalid tree structure".into()));
                        }
                    }
                }
            }
            if nodes.is_empty() {
                return Err(Error::Corrupt("empty tree".into()));
            }
            trees.push(Tree { nodes });
        }
        rounds.push(trees);
    }
    Ok(Gbdt {
        params,
        n_classes,
        n_features,
        rounds,
    })
}
