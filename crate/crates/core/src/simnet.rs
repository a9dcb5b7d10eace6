//! Co-retweet user-similarity network.
//!
//! Superspreaders are described by TF-IDF vectors over the tweet ids they
//! retweeted; pairwise cosine similarity gives a weighted undirected network,
//! which is then reduced to its multiscale backbone with the disparity filter.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::scalar::{format_significant, Scalar};

/// A user together with their retweet volume.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RankedUser {
    pub user_id: String,
    pub retweets: usize,
}

/// Top `ceil(fraction * R)` users by retweet count, where `R` counts users with
/// at least one retweet. Ties are ordered by user id.
pub fn select_superspreaders(corpus: &Corpus, fraction: f64) -> Result<Vec<RankedUser>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "superspreader fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in corpus.tweets().iter().filter(|t| t.is_retweet()) {
        *counts.entry(t.author_id.as_str()).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(Error::NoRetweetingUsers);
    }
    let mut ranked: Vec<RankedUser> = counts
        .into_iter()
        .map(|(u, n)| RankedUser {
            user_id: u.to_string(),
            retweets: n,
        })
        .collect();
    ranked.sort_by(|a, b| b.retweets.cmp(&a.retweets).then_with(|| a.user_id.cmp(&b.user_id)));
    let raw = fraction * ranked.len() as f64;
    // absorb representation error such as 0.07 * 100 = 7.000000000000001
    let take = ((raw - raw * 1e-12).ceil() as usize).clamp(1, ranked.len());
    ranked.truncate(take);
    Ok(ranked)
}

/// Sparse TF-IDF vector of retweeted tweet ids.
#[derive(Clone, Debug, PartialEq)]
pub struct RetweetVector<F> {
    pub user_id: String,
    /// `(tweet index, weight)` sorted by index; weights are strictly positive.
    pub entries: Vec<(usize, F)>,
}

impl<F: Scalar> RetweetVector<F> {
    pub fn norm(&self) -> F {
        self.entries.iter().map(|&(_, w)| w * w).sum::<F>().sqrt()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Retweet vectors of the selected users (sorted by user id) over an interned tweet-id table.
#[derive(Clone, Debug, PartialEq)]
pub struct RetweetVectors<F> {
    pub tweet_ids: Vec<String>,
    pub vectors: Vec<RetweetVector<F>>,
}

impl<F: Scalar> RetweetVectors<F> {
    pub fn get(&self, user: &str) -> Option<&RetweetVector<F>> {
        self.vectors
            .binary_search_by(|v| v.user_id.as_str().cmp(user))
            .ok()
            .map(|i| &self.vectors[i])
    }

    /// Weight of `tweet_id` in the vector of `user` (0 when absent).
    pub fn weight(&self, user: &str, tweet_id: &str) -> F {
        let Ok(t) = self.tweet_ids.binary_search_by(|id| id.as_str().cmp(tweet_id)) else {
            return F::zero();
        };
        self.get(user)
            .and_then(|v| v.entries.binary_search_by_key(&t, |e| e.0).ok().map(|i| v.entries[i].1))
            .unwrap_or_else(F::zero)
    }
}

/// `TF(u,t) * ln(N / df(t))` with `N` the number of selected users. Quote tweets
/// are not retweets and do not contribute.
pub fn build_retweet_vectors<F: Scalar, S: AsRef<str>>(corpus: &Corpus, users: &[S]) -> RetweetVectors<F> {
    let selected: BTreeSet<&str> = users.iter().map(AsRef::as_ref).collect();
    let mut tf: BTreeMap<&str, BTreeMap<&str, usize>> = selected.iter().map(|&u| (u, BTreeMap::new())).collect();
    for t in corpus.tweets() {
        if let (Some(target), Some(row)) = (t.retweeted_id.as_deref(), tf.get_mut(t.author_id.as_str())) {
            *row.entry(target).or_default() += 1;
        }
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for row in tf.values() {
        for &t in row.keys() {
            *df.entry(t).or_default() += 1;
        }
    }
    let tweet_ids: Vec<String> = df.keys().map(|s| s.to_string()).collect();
    let index: HashMap<&str, usize> = df.keys().enumerate().map(|(i, &t)| (t, i)).collect();
    let n = F::from_usize_lossy(selected.len());
    let idf: HashMap<&str, F> = df
        .iter()
        .map(|(&t, &d)| (t, (n / F::from_usize_lossy(d)).ln()))
        .collect();
    let vectors = tf
        .into_iter()
        .map(|(user, row)| {
            let entries = row
                .into_iter()
                .filter_map(|(t, count)| {
                    let w = F::from_usize_lossy(count) * idf[t];
                    (w > F::zero()).then(|| (index[t], w))
                })
                .collect();
            RetweetVector {
                user_id: user.to_string(),
                entries,
            }
        })
        .collect();
    RetweetVectors { tweet_ids, vectors }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge<F> {
    pub a: usize,
    pub b: usize,
    pub weight: F,
}

/// Weighted undirected graph over user ids.
///
/// Nodes are sorted by id; every edge has `a < b`, edges are sorted by `(a, b)`
/// and weights lie in `(0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityNetwork<F> {
    nodes: Vec<String>,
    edges: Vec<Edge<F>>,
}

impl<F: Scalar> SimilarityNetwork<F> {
    /// Builds a network from user-pair weights; nodes are the edge endpoints plus `extra_nodes`.
    pub fn from_edges<S: AsRef<str>>(
        weighted: impl IntoIterator<Item = (S, S, F)>,
        extra_nodes: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let weighted: Vec<(String, String, F)> = weighted
            .into_iter()
            .map(|(a, b, w)| (a.as_ref().to_string(), b.as_ref().to_string(), w))
            .collect();
        let mut names: BTreeSet<String> = extra_nodes.into_iter().map(|s| s.as_ref().to_string()).collect();
        for (a, b, _) in &weighted {
            names.insert(a.clone());
            names.insert(b.clone());
        }
        let nodes: Vec<String> = names.into_iter().collect();
        let pos = |name: &str| nodes.binary_search_by(|n| n.as_str().cmp(name)).expect("node present");
        let mut edges = Vec::with_capacity(weighted.len());
        for (a, b, w) in &weighted {
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop on {a}")));
            }
            if !(w.is_finite() && *w > F::zero() && *w <= F::one()) {
                return Err(Error::InvalidArgument(format!("edge {a}-{b} weight {w} outside (0,1]")));
            }
            let (i, j) = (pos(a), pos(b));
            edges.push(Edge {
                a: i.min(j),
                b: i.max(j),
                weight: *w,
            });
        }
        edges.sort_by_key(|e| (e.a, e.b));
        if let Some(w) = edges.windows(2).find(|w| (w[0].a, w[0].b) == (w[1].a, w[1].b)) {
            return Err(Error::InvalidArgument(format!(
                "duplicate edge {}-{}",
                nodes[w[0].a], nodes[w[0].b]
            )));
        }
        Ok(SimilarityNetwork { nodes, edges })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge<F>] {
        &self.edges
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_index(&self, user: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(user)).ok()
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<F> {
        let (i, j) = (self.node_index(a)?, self.node_index(b)?);
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.a, e.b).cmp(&key))
            .ok()
            .map(|k| self.edges[k].weight)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }

    pub fn strengths(&self) -> Vec<F> {
        let mut s = vec![F::zero(); self.nodes.len()];
        for e in &self.edges {
            s[e.a] = s[e.a] + e.weight;
            s[e.b] = s[e.b] + e.weight;
        }
        s
    }

    /// Neighbour lists `(node, weight)` sorted by neighbour index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, F)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.a].push((e.b, e.weight));
            adj[e.b].push((e.a, e.weight));
        }
        for list in &mut adj {
            list.sort_by_key(|&(n, _)| n);
        }
        adj
    }

    /// `(user_a, user_b, weight)` triples in canonical order.
    pub fn edge_list(&self) -> Vec<(&str, &str, F)> {
        self.edges
            .iter()
            .map(|e| (self.nodes[e.a].as_str(), self.nodes[e.b].as_str(), e.weight))
            .collect()
    }

    /// Same graph with all nodes relabeled through `rename`.
    pub fn relabel(&self, rename: impl Fn(&str) -> String) -> Result<Self> {
        let names: Vec<String> = self.nodes.iter().map(|n| rename(n)).collect();
        Self::from_edges(
            self.edges
                .iter()
                .map(|e| (names[e.a].clone(), names[e.b].clone(), e.weight)),
            names.clone(),
        )
    }

    /// Subgraph with the given edges; nodes left without edges are dropped.
    fn with_edges(&self, keep: impl Fn(usize) -> bool) -> Self {
        let kept: Vec<&Edge<F>> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, e)| e)
            .collect();
        let mut used = vec![false; self.nodes.len()];
        for e in &kept {
            used[e.a] = true;
            used[e.b] = true;
        }
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, name) in self.nodes.iter().enumerate() {
            if used[i] {
                remap[i] = nodes.len();
                nodes.push(name.clone());
            }
        }
        let edges = kept
            .into_iter()
            .map(|e| Edge {
                a: remap[e.a],
                b: remap[e.b],
                weight: e.weight,
            })
            .collect();
        SimilarityNetwork { nodes, edges }
    }

    /// CSV `user_a,user_b,weight`, weights to 10 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("user_a,user_b,weight\n");
        for (a, b, w) in self.edge_list() {
            let _ = writeln!(out, "{a},{b},{}", format_significant(w.as_f64(), 10));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let bad = |m: String| Error::Parse {
                path: "<edge list>".into(),
                line: i + 2,
                message: m,
            };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 3 {
                return Err(bad(format!("expected 3 fields, got {}", rec.len())));
            }
            let w: f64 = rec[2].parse().map_err(|e| bad(format!("weight: {e}")))?;
            rows.push((rec[0].to_string(), rec[1].to_string(), F::lit(w)));
        }
        Self::from_edges(rows, Vec::<String>::new())
    }
}

/// Cosine-similarity network over the non-empty vectors. Pairs are found through
/// an inverted index over tweet ids, so only users sharing a retweet are compared.
pub fn similarity_network<F: Scalar>(vectors: &RetweetVectors<F>) -> Result<SimilarityNetwork<F>> {
    let mut active: Vec<&RetweetVector<F>> = vectors.vectors.iter().filter(|v| !v.is_empty()).collect();
    active.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    if active.len() < 2 {
        return Err(Error::DegenerateNetwork(format!(
            "{} non-empty retweet vectors, need at least 2",
            active.len()
        )));
    }
    let norms: Vec<F> = active.iter().map(|v| v.norm()).collect();
    let mut postings: Vec<Vec<(usize, F)>> = vec![Vec::new(); vectors.tweet_ids.len()];
    for (u, v) in active.iter().enumerate() {
        for &(t, w) in &v.entries {
            postings[t].push((u, w));
        }
    }
    let rows: Vec<Vec<Edge<F>>> = (0..active.len())
        .into_par_iter()
        .map(|i| {
            let mut dots: BTreeMap<usize, F> = BTreeMap::new();
            for &(t, wi) in &active[i].entries {
                for &(j, wj) in &postings[t] {
                    if j > i {
                        let d = dots.entry(j).or_insert_with(F::zero);
                        *d = *d + wi * wj;
                    }
                }
            }
            dots.into_iter()
                .filter_map(|(j, dot)| {
                    let cos = (dot / (norms[i] * norms[j])).min(F::one());
                    (cos > F::zero()).then_some(Edge {
                        a: i,
                        b: j,
                        weight: cos,
                    })
                })
                .collect()
        })
        .collect();
    Ok(SimilarityNetwork {
        nodes: active.iter().map(|v| v.user_id.clone()).collect(),
        edges: rows.into_iter().flatten().collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackboneParams<F> {
    alpha: F,
}

impl<F: Scalar> BackboneParams<F> {
    pub fn new(alpha: F) -> Result<Self> {
        if !(alpha > F::zero() && alpha < F::one()) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0,1), got {alpha}")));
        }
        Ok(BackboneParams { alpha })
    }

    pub fn alpha(&self) -> F {
        self.alpha
    }
}

impl<F: Scalar> Default for BackboneParams<F> {
    fn default() -> Self {
        BackboneParams { alpha: F::lit(0.05) }
    }
}

/// Disparity statistics of one edge seen from each endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeDisparity<F> {
    /// Weight fraction `w / s` at endpoint a and b.
    pub fraction: [F; 2],
    pub degree: [usize; 2],
    /// `(1 - p)^(k - 1)`; `None` for degree-1 endpoints, where the null model is untestable.
    pub significance: [Option<F>; 2],
}

impl<F: Scalar> EdgeDisparity<F> {
    /// Kept iff significant at either endpoint, or attached to a degree-1 node.
    pub fn is_kept(&self, alpha: F) -> bool {
        self.significance.iter().any(|s| match s {
            None => true,
            Some(s) => *s < alpha,
        })
    }
}

/// Per-edge disparity statistics, aligned with [`SimilarityNetwork::edges`].
pub fn disparity<F: Scalar>(net: &SimilarityNetwork<F>) -> Vec<EdgeDisparity<F>> {
    let deg = net.degrees();
    let strength = net.strengths();
    net.edges
        .iter()
        .map(|e| {
            let ends = [e.a, e.b];
            let fraction = ends.map(|i| e.weight / strength[i]);
            let degree = ends.map(|i| deg[i]);
            let significance =
                [0, 1].map(|s| (degree[s] >= 2).then(|| (F::one() - fraction[s]).powi(degree[s] as i32 - 1)));
            EdgeDisparity {
                fraction,
                degree,
                significance,
            }
        })
        .collect()
}

/// Multiscale backbone: edges significant at level `alpha` under the disparity null
/// model at either endpoint. Isolated nodes are dropped.
pub fn backbone<F: Scalar>(net: &SimilarityNetwork<F>, params: BackboneParams<F>) -> Result<SimilarityNetwork<F>> {
    if net.edges.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    let disp = disparity(net);
    Ok(net.with_edges(|i| disp[i].is_kept(params.alpha)))
}
