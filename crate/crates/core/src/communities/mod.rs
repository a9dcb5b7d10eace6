//! Community detection on the backbone network and per-user coordination scores.

mod dismantle;
mod louvain;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

pub use dismantle::{dismantle, CoordinationScores};
pub use louvain::{louvain, modularity, LouvainParams};

use crate::error::{Error, Result};

/// Partition of users into communities.
///
/// Labels are dense in `0..num_communities()` and ordered by descending size;
/// equal sizes are ordered by their smallest member id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommunityAssignment {
    labels: BTreeMap<String, usize>,
    members: Vec<Vec<String>>,
}

impl CommunityAssignment {
    /// Builds an assignment from arbitrary group keys, relabeling them canonically.
    pub fn from_groups<S: AsRef<str>, K: Ord>(pairs: impl IntoIterator<Item = (S, K)>) -> Self {
        let mut groups: BTreeMap<K, BTreeSet<String>> = BTreeMap::new();
        for (user, key) in pairs {
            groups.entry(key).or_default().insert(user.as_ref().to_string());
        }
        let mut members: Vec<Vec<String>> = groups.into_values().map(|s| s.into_iter().collect()).collect();
        members.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
        let mut labels = BTreeMap::new();
        for (c, group) in members.iter().enumerate() {
            for u in group {
                labels.insert(u.clone(), c);
            }
        }
        CommunityAssignment { labels, members }
    }

    pub fn label(&self, user: &str) -> Option<usize> {
        self.labels.get(user).copied()
    }

    pub fn num_communities(&self) -> usize {
        self.members.len()
    }

    pub fn num_users(&self) -> usize {
        self.labels.len()
    }

    /// Members of community `c`, sorted by id.
    pub fn members(&self, c: usize) -> Vec<&str> {
        self.members
            .get(c)
            .map(|m| m.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn size(&self, c: usize) -> usize {
        self.members.get(c).map_or(0, Vec::len)
    }

    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.labels.iter().map(|(u, &c)| (u.as_str(), c))
    }
}

/// Assignment with a display name per community.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedAssignment {
    pub assignment: CommunityAssignment,
    names: Vec<String>,
}

impl NamedAssignment {
    pub fn name(&self, c: usize) -> &str {
        &self.names[c]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn label_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// CSV `user_id,community,coordination_score`, scores to six decimals.
    pub fn to_csv<F: crate::Scalar>(&self, scores: &CoordinationScores<F>) -> String {
        let mut out = String::from("user_id,community,coordination_score\n");
        for (user, c) in self.assignment.iter() {
            let score = scores
                .score(user)
                .map(|s| format!("{:.6}", s.as_f64()))
                .unwrap_or_default();
            let _ = writeln!(out, "{user},{},{score}", self.names[c]);
        }
        out
    }
}

/// Attaches names to community labels; communities without a name keep their number.
/// Names must be unique after defaulting. Entries for absent labels are ignored.
pub fn label_assignment(
    assignment: &CommunityAssignment,
    name_map: &BTreeMap<usize, String>,
) -> Result<NamedAssignment> {
    let names: Vec<String> = (0..assignment.num_communities())
        .map(|c| name_map.get(&c).cloned().unwrap_or_else(|| c.to_string()))
        .collect();
    let mut seen = BTreeSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(Error::DuplicateName(n.clone()));
        }
    }
    Ok(NamedAssignment {
        assignment: assignment.clone(),
        names,
    })
}
