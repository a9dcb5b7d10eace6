//! Coordination scores by threshold dismantling of the backbone.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simnet::SimilarityNetwork;

/// Per-user coordination score in `[0, 1]` plus the raw threshold it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinationScores<F> {
    raw: BTreeMap<String, F>,
    normalized: BTreeMap<String, F>,
}

impl<F: Scalar> CoordinationScores<F> {
    /// Min-max normalizes raw thresholds; all-equal raw values map to 1.
    pub fn from_raw(raw: BTreeMap<String, F>) -> Self {
        let lo = raw.values().copied().fold(F::infinity(), F::min);
        let hi = raw.values().copied().fold(F::neg_infinity(), F::max);
        let normalized = raw
            .iter()
            .map(|(u, &r)| {
                let s = if hi > lo { (r - lo) / (hi - lo) } else { F::one() };
                (u.clone(), s)
            })
            .collect();
        CoordinationScores { raw, normalized }
    }

    pub fn score(&self, user: &str) -> Option<F> {
        self.normalized.get(user).copied()
    }

    pub fn raw(&self, user: &str) -> Option<F> {
        self.raw.get(user).copied()
    }

    pub fn scores(&self) -> &BTreeMap<String, F> {
        &self.normalized
    }

    pub fn raw_scores(&self) -> &BTreeMap<String, F> {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// CSV `user_id,raw_threshold,coordination_score` at full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("user_id,raw_threshold,coordination_score\n");
        for (u, r) in &self.raw {
            let _ = writeln!(out, "{u},{},{}", r.as_f64(), self.normalized[u].as_f64());
        }
        out
    }

    /// Reads the CSV written by [`CoordinationScores::to_csv`]; scores are recomputed from the raw column.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut raw = BTreeMap::new();
        for (i, rec) in reader.records().enumerate() {
            let bad = |m: String| Error::Parse {
                path: "<coordination scores>".into(),
                line: i + 2,
                message: m,
            };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let r: f64 = rec.get(1).unwrap_or("").parse().map_err(|e| bad(format!("{e}")))?;
            raw.insert(rec[0].to_string(), F::lit(r));
        }
        Ok(Self::from_raw(raw))
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Iterates the distinct edge weights `t` in ascending order. At each step edges
/// lighter than `t` are deleted and every node outside the largest connected
/// component (ties: the component holding the smallest node id) is removed with
/// raw score `t`. Survivors of the last step get the largest weight.
pub fn dismantle<F: Scalar>(net: &SimilarityNetwork<F>) -> Result<CoordinationScores<F>> {
    if net.num_edges() == 0 {
        return Err(Error::EmptyNetwork);
    }
    let n = net.num_nodes();
    let mut edges: Vec<_> = net.edges().to_vec();
    edges.sort_by(|x, y| x.weight.partial_cmp(&y.weight).expect("finite weights"));
    let mut thresholds: Vec<F> = edges.iter().map(|e| e.weight).collect();
    thresholds.dedup();

    let mut alive = vec![true; n];
    let mut raw: Vec<Option<F>> = vec![None; n];
    let mut cut = 0;
    for (step, &t) in thresholds.iter().enumerate() {
        let mut changed = step == 0;
        while cut < edges.len() && edges[cut].weight < t {
            let e = &edges[cut];
            changed |= alive[e.a] && alive[e.b];
            cut += 1;
        }
        // the alive set is connected after every step, so components only change
        // when an edge between alive nodes goes away
        if !changed {
            continue;
        }
        let mut sets = DisjointSets::new(n);
        for e in &edges[cut..] {
            if alive[e.a] && alive[e.b] {
                sets.union(e.a, e.b);
            }
        }
        let mut best: Option<(usize, usize)> = None; // (size, root)
        for i in (0..n).filter(|&i| alive[i]) {
            let root = sets.find(i);
            let size = sets.size[root];
            // scanning ids in ascending order keeps the smallest-id component on ties
            if best.is_none_or(|(s, _)| size > s) {
                best = Some((size, root));
            }
        }
        let (_, lcc) = best.expect("at least one alive node");
        for i in 0..n {
            if alive[i] && sets.find(i) != lcc {
                alive[i] = false;
                raw[i] = Some(t);
            }
        }
    }
    let last = *thresholds.last().expect("non-empty");
    let raw = net
        .nodes()
        .iter()
        .zip(raw)
        .map(|(u, r)| (u.clone(), r.unwrap_or(last)))
        .collect();
    Ok(CoordinationScores::from_raw(raw))
}
