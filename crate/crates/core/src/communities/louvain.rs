//! Weighted Louvain modularity optimisation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CommunityAssignment;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simnet::SimilarityNetwork;

/// Minimum modularity gain for a move to count.
const MIN_GAIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LouvainParams<F> {
    pub resolution: F,
    pub seed: u64,
}

impl<F: Scalar> Default for LouvainParams<F> {
    fn default() -> Self {
        LouvainParams {
            resolution: F::one(),
            seed: 0,
        }
    }
}

/// One level of the aggregation hierarchy. Self-loops only matter through
/// `strength`, so adjacency lists exclude them.
struct Level<F> {
    adj: Vec<Vec<(usize, F)>>,
    strength: Vec<F>,
}

impl<F: Scalar> Level<F> {
    fn from_network(net: &SimilarityNetwork<F>) -> Self {
        Level {
            adj: net.adjacency(),
            strength: net.strengths(),
        }
    }

    fn len(&self) -> usize {
        self.strength.len()
    }

    /// Collapses each community of `part` (dense labels) into one node.
    fn aggregate(&self, part: &[usize], count: usize) -> Self {
        let mut strength = vec![F::zero(); count];
        let mut links: Vec<BTreeMap<usize, F>> = vec![BTreeMap::new(); count];
        for i in 0..self.len() {
            let ci = part[i];
            strength[ci] = strength[ci] + self.strength[i];
            for &(j, w) in &self.adj[i] {
                let cj = part[j];
                if ci != cj {
                    let e = links[ci].entry(cj).or_insert_with(F::zero);
                    *e = *e + w;
                }
            }
        }
        Level {
            adj: links.into_iter().map(|m| m.into_iter().collect()).collect(),
            strength,
        }
    }
}

/// Relabels to dense ids in order of first appearance; returns the count.
fn densify(part: &mut [usize]) -> usize {
    let mut map = BTreeMap::new();
    let mut next = 0;
    for c in part.iter_mut() {
        *c = *map.entry(*c).or_insert_with(|| {
            next += 1;
            next - 1
        });
    }
    next
}

/// Single-node moves until no move gains more than `MIN_GAIN`. `part` holds labels
/// in `0..level.len()`. Returns whether any node moved.
fn local_moves<F: Scalar>(level: &Level<F>, part: &mut [usize], resolution: F, rng: &mut ChaCha8Rng) -> bool {
    let n = level.len();
    let m2: F = level.strength.iter().copied().sum();
    if m2 <= F::zero() {
        return false;
    }
    // gains are compared in units of m * dQ
    let eps = F::lit(MIN_GAIN) * m2 / F::lit(2.0);
    let mut tot = vec![F::zero(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        tot[part[i]] = tot[part[i]] + level.strength[i];
        count[part[i]] += 1;
    }
    let mut free: Vec<usize> = (0..n).rev().filter(|&c| count[c] == 0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut moved_any = false;
    let mut links: BTreeMap<usize, F> = BTreeMap::new();
    loop {
        let mut moved = false;
        for &i in &order {
            let ci = part[i];
            let ki = level.strength[i];
            tot[ci] = tot[ci] - ki;
            count[ci] -= 1;

            links.clear();
            for &(j, w) in &level.adj[i] {
                let e = links.entry(part[j]).or_insert_with(F::zero);
                *e = *e + w;
            }
            let gain = |c: usize, w_to: F| w_to - resolution * tot[c] * ki / m2;

            let mut best = ci;
            let mut best_gain = gain(ci, links.get(&ci).copied().unwrap_or_else(F::zero));
            for (&c, &w_to) in &links {
                let g = gain(c, w_to);
                if g - best_gain > eps {
                    best = c;
                    best_gain = g;
                }
            }
            // an empty community: ci itself when i was alone, otherwise a free label
            if count[ci] > 0 && F::zero() - best_gain > eps {
                best = *free.last().expect("a free label exists while ci is non-empty");
            }

            if best != ci {
                if free.last() == Some(&best) {
                    free.pop();
                }
                if count[ci] == 0 {
                    free.push(ci);
                }
                moved = true;
                moved_any = true;
            }
            part[i] = best;
            tot[best] = tot[best] + ki;
            count[best] += 1;
        }
        if !moved {
            break;
        }
    }
    moved_any
}

/// Louvain community detection with a final single-node polishing pass on the
/// original graph, so the returned partition is single-move locally optimal.
/// Node visitation order is derived from `params.seed`.
pub fn louvain<F: Scalar>(net: &SimilarityNetwork<F>, params: LouvainParams<F>) -> Result<CommunityAssignment> {
    if net.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    let base = Level::from_network(net);
    let n = base.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut part: Vec<usize> = (0..n).collect();
    loop {
        let count = densify(&mut part);
        let mut level = base.aggregate(&part, count);
        loop {
            let mut comm: Vec<usize> = (0..level.len()).collect();
            if !local_moves(&level, &mut comm, params.resolution, &mut rng) {
                break;
            }
            let count = densify(&mut comm);
            for p in part.iter_mut() {
                *p = comm[*p];
            }
            level = level.aggregate(&comm, count);
        }
        if !local_moves(&base, &mut part, params.resolution, &mut rng) {
            break;
        }
    }
    Ok(CommunityAssignment::from_groups(
        net.nodes().iter().zip(part.iter().copied()),
    ))
}

/// Weighted modularity of `assignment` at the given resolution. Unassigned nodes
/// count as singletons.
pub fn modularity<F: Scalar>(net: &SimilarityNetwork<F>, assignment: &CommunityAssignment, resolution: F) -> F {
    let k = assignment.num_communities();
    let label = |i: usize| assignment.label(&net.nodes()[i]).unwrap_or(k + i);
    let m: F = net.edges().iter().map(|e| e.weight).sum();
    if m <= F::zero() {
        return F::zero();
    }
    let mut internal: BTreeMap<usize, F> = BTreeMap::new();
    for e in net.edges() {
        if label(e.a) == label(e.b) {
            let v = internal.entry(label(e.a)).or_insert_with(F::zero);
            *v = *v + e.weight;
        }
    }
    let mut tot: BTreeMap<usize, F> = BTreeMap::new();
    for (i, s) in net.strengths().into_iter().enumerate() {
        let v = tot.entry(label(i)).or_insert_with(F::zero);
        *v = *v + s;
    }
    let two_m = m + m;
    let lc: F = internal.values().map(|&w| w / m).sum();
    let deg: F = tot.values().map(|&t| (t / two_m) * (t / two_m)).sum();
    lc - resolution * deg
}
