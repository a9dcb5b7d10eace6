//! Propaganda measures: user-level (Ψ) and community-level (Φ) aggregation,
//! coordination-conditioned trends, informativeness and delta.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::communities::{CommunityAssignment, CoordinationScores};
use crate::error::{Error, Result};
use crate::scalar::{mean, median, Scalar};
use crate::stats::pearson_r;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Tweets,
    Articles,
}

/// User-level aggregation of item scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Psi {
    Median,
    Mean,
    MajorityVoting,
    Max,
}

/// Community-level aggregation of user scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi {
    Mean,
    Median,
    Ratio,
}

impl ItemKind {
    pub const ALL: [ItemKind; 2] = [ItemKind::Tweets, ItemKind::Articles];

    fn short(self) -> &'static str {
        match self {
            ItemKind::Tweets => "tw",
            ItemKind::Articles => "ar",
        }
    }
}

impl Psi {
    pub const ALL: [Psi; 4] = [Psi::Median, Psi::Mean, Psi::MajorityVoting, Psi::Max];
}

impl Phi {
    pub const ALL: [Phi; 3] = [Phi::Mean, Phi::Median, Phi::Ratio];
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ItemKind::Tweets => "tweets",
            ItemKind::Articles => "articles",
        })
    }
}

impl fmt::Display for Psi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Psi::Median => "median",
            Psi::Mean => "mean",
            Psi::MajorityVoting => "majority_voting",
            Psi::Max => "max",
        })
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phi::Mean => "mean",
            Phi::Median => "median",
            Phi::Ratio => "ratio",
        })
    }
}

/// One way to compute community propaganda: which items, Ψ and Φ.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MeasureSpec {
    pub id: String,
    pub item_kind: ItemKind,
    pub psi: Psi,
    pub phi: Phi,
}

impl MeasureSpec {
    /// Measure with the canonical id `<tw|ar>-<psi>-<phi>`, e.g. `tw-median-mean`.
    pub fn new(item_kind: ItemKind, psi: Psi, phi: Phi) -> Self {
        MeasureSpec {
            id: format!("{}-{}-{}", item_kind.short(), psi, phi),
            item_kind,
            psi,
            phi,
        }
    }

    /// Tweet chunks, median per user, mean per community.
    pub fn tweet_median_mean() -> Self {
        Self::new(ItemKind::Tweets, Psi::Median, Phi::Mean)
    }

    /// All 24 item × Ψ × Φ combinations.
    pub fn catalog() -> Vec<MeasureSpec> {
        let mut out = Vec::with_capacity(24);
        for kind in ItemKind::ALL {
            for psi in Psi::ALL {
                for phi in Phi::ALL {
                    out.push(Self::new(kind, psi, phi));
                }
            }
        }
        out
    }
}

impl FromStr for MeasureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::catalog()
            .into_iter()
            .find(|m| m.id == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown measure {s:?}")))
    }
}

/// Ψ over a user's item scores; `None` for no items.
pub fn aggregate_psi<F: Scalar>(scores: &[F], psi: Psi) -> Option<F> {
    if scores.is_empty() {
        return None;
    }
    Some(match psi {
        Psi::Median => median(scores)?,
        Psi::Mean => mean(scores)?,
        Psi::Max => scores.iter().copied().fold(F::neg_infinity(), F::max),
        Psi::MajorityVoting => {
            let half = F::lit(0.5);
            let positive = scores.iter().filter(|&&s| s > half).count();
            let negative = scores.len() - positive;
            match positive.cmp(&negative) {
                std::cmp::Ordering::Greater => F::one(),
                std::cmp::Ordering::Less => F::zero(),
                std::cmp::Ordering::Equal => half,
            }
        }
    })
}

/// Φ over user scores; `Ratio` is the fraction of users above 0.5.
pub fn aggregate_phi<F: Scalar>(values: &[F], phi: Phi) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    match phi {
        Phi::Mean => mean(values),
        Phi::Median => median(values),
        Phi::Ratio => {
            let above = values.iter().filter(|&&v| v > F::lit(0.5)).count();
            Some(F::from_usize_lossy(above) / F::from_usize_lossy(values.len()))
        }
    }
}

/// Per-user propaganda `P_u` and the number of items behind it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UserPropaganda<F> {
    pub scores: BTreeMap<String, F>,
    pub items: BTreeMap<String, usize>,
}

impl<F: Scalar> UserPropaganda<F> {
    pub fn get(&self, user: &str) -> Option<F> {
        self.scores.get(user).copied()
    }
}

/// Applies Ψ to each user's item scores. Users without items are left out.
pub fn user_propaganda<F: Scalar>(item_scores: &BTreeMap<String, Vec<F>>, psi: Psi) -> UserPropaganda<F> {
    let mut out = UserPropaganda {
        scores: BTreeMap::new(),
        items: BTreeMap::new(),
    };
    for (user, scores) in item_scores {
        if let Some(p) = aggregate_psi(scores, psi) {
            out.scores.insert(user.clone(), p);
            out.items.insert(user.clone(), scores.len());
        }
    }
    out
}

/// `P_c(c, k)` on a grid of coordination thresholds with support counts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendSeries<F> {
    pub community: String,
    pub grid: Vec<F>,
    /// `None` where no user qualifies.
    pub values: Vec<Option<F>>,
    pub users: Vec<usize>,
    pub items: Vec<usize>,
}

impl<F: Scalar> TrendSeries<F> {
    pub fn empty(community: &str, grid: &[F]) -> Self {
        TrendSeries {
            community: community.to_string(),
            grid: grid.to_vec(),
            values: vec![None; grid.len()],
            users: vec![0; grid.len()],
            items: vec![0; grid.len()],
        }
    }

    /// Value at the grid point within 1e-9 of `k`; outer `None` if `k` is not on the grid.
    pub fn at(&self, k: F) -> Option<Option<F>> {
        let tol = F::lit(1e-9);
        self.grid
            .iter()
            .position(|&g| (g - k).abs() <= tol)
            .map(|i| self.values[i])
    }

    pub fn is_defined(&self) -> bool {
        self.values.iter().any(Option::is_some)
    }

    /// Appends rows `community,k,value,users,items` (blank value where undefined).
    pub fn write_csv_rows(&self, out: &mut String) {
        for i in 0..self.grid.len() {
            let value = self.values[i].map(|v| format!("{}", v.as_f64())).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.community,
                self.grid[i].as_f64(),
                value,
                self.users[i],
                self.items[i]
            );
        }
    }
}

pub const TREND_CSV_HEADER: &str = "community,k,value,users,items\n";

/// `{0, 0.05, ..., 0.95}`.
pub fn default_grid<F: Scalar>() -> Vec<F> {
    (0..20).map(|i| F::from_usize_lossy(i) / F::lit(20.0)).collect()
}

pub fn validate_grid<F: Scalar>(grid: &[F]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty k grid".into()));
    }
    if grid.iter().any(|&k| !(k >= F::zero() && k <= F::one())) {
        return Err(Error::InvalidArgument("k grid values must lie in [0,1]".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("k grid must be strictly increasing".into()));
    }
    Ok(())
}

pub(crate) fn community_members(assignment: &CommunityAssignment, community: usize) -> Result<Vec<&str>> {
    if community >= assignment.num_communities() {
        return Err(Error::UnknownCommunity(community.to_string()));
    }
    Ok(assignment.members(community))
}

/// Φ over the `P_u` of members with `C_u >= k`, for each k of the grid.
pub fn community_trend<F: Scalar>(
    user_scores: &UserPropaganda<F>,
    coordination: &CoordinationScores<F>,
    assignment: &CommunityAssignment,
    community: usize,
    phi: Phi,
    grid: &[F],
) -> Result<TrendSeries<F>> {
    let members = community_members(assignment, community)?;
    trend_for(&community.to_string(), &members, user_scores, coordination, phi, grid)
}

/// [`community_trend`] over an explicit member list.
pub fn trend_for<F: Scalar>(
    name: &str,
    members: &[&str],
    user_scores: &UserPropaganda<F>,
    coordination: &CoordinationScores<F>,
    phi: Phi,
    grid: &[F],
) -> Result<TrendSeries<F>> {
    validate_grid(grid)?;
    let mut series = TrendSeries::empty(name, grid);
    for (i, &k) in grid.iter().enumerate() {
        let mut values = Vec::new();
        let mut items = 0;
        for u in members {
            if !coordination.score(u).is_some_and(|c| c >= k) {
                continue;
            }
            if let Some(p) = user_scores.get(u) {
                values.push(p);
                items += user_scores.items.get(*u).copied().unwrap_or(0);
            }
        }
        series.users[i] = values.len();
        series.items[i] = items;
        series.values[i] = aggregate_phi(&values, phi);
    }
    Ok(series)
}

/// A community pair left out of the informativeness average.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcludedPair {
    pub a: String,
    pub b: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InformativenessResult<F> {
    pub measure_id: String,
    /// Mean Pearson correlation over the community pairs used.
    pub r_bar: F,
    /// `(1 - r_bar) / 2`.
    pub informativeness: F,
    pub pairs_used: usize,
    pub excluded: Vec<ExcludedPair>,
}

/// Mean pairwise Pearson correlation between community trends, over unordered
/// pairs with at least three common defined grid points.
pub fn informativeness<F: Scalar>(measure_id: &str, trends: &[TrendSeries<F>]) -> Result<InformativenessResult<F>> {
    if trends.len() < 2 {
        return Err(Error::InvalidArgument(
            "informativeness needs at least two communities".into(),
        ));
    }
    if trends.windows(2).any(|w| w[0].grid != w[1].grid) {
        return Err(Error::InvalidArgument("trends must share one k grid".into()));
    }
    let mut rs = Vec::new();
    let mut excluded = Vec::new();
    for i in 0..trends.len() {
        for j in i + 1..trends.len() {
            let (x, y): (Vec<F>, Vec<F>) = trends[i]
                .values
                .iter()
                .zip(&trends[j].values)
                .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
                .unzip();
            let exclude = |reason: String| ExcludedPair {
                a: trends[i].community.clone(),
                b: trends[j].community.clone(),
                reason,
            };
            if x.len() < 3 {
                excluded.push(exclude(format!("{} common defined points", x.len())));
                continue;
            }
            match pearson_r(&x, &y) {
                Ok(r) => rs.push(r),
                Err(e) => excluded.push(exclude(e.to_string())),
            }
        }
    }
    let r_bar = mean(&rs).ok_or(Error::NoComparablePairs)?;
    Ok(InformativenessResult {
        measure_id: measure_id.to_string(),
        r_bar,
        informativeness: (F::one() - r_bar) / F::lit(2.0),
        pairs_used: rs.len(),
        excluded,
    })
}

/// CSV `measure_id,item_kind,psi,phi,I` sorted by informativeness, highest first.
pub fn informativeness_table<F: Scalar>(results: &[(MeasureSpec, InformativenessResult<F>)]) -> String {
    let mut rows: Vec<&(MeasureSpec, InformativenessResult<F>)> = results.iter().collect();
    rows.sort_by(|a, b| {
        b.1.informativeness
            .partial_cmp(&a.1.informativeness)
            .expect("finite")
            .then_with(|| a.0.id.cmp(&b.0.id))
    });
    let mut out = String::from("measure_id,item_kind,psi,phi,I\n");
    for (m, r) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4}",
            m.id,
            m.item_kind,
            m.psi,
            m.phi,
            r.informativeness.as_f64()
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaStat<F> {
    pub community: String,
    /// `P_c(c, 0.9) - P_c(c, 0)`.
    pub delta: F,
    /// `100 * delta / P_c(c, 0)`; `None` for a zero baseline.
    pub delta_pct: Option<F>,
}

pub fn delta<F: Scalar>(trend: &TrendSeries<F>) -> Result<DeltaStat<F>> {
    let value = |k: f64| match trend.at(F::lit(k)) {
        Some(Some(v)) => Ok(v),
        _ => Err(Error::UndefinedAt(k)),
    };
    let base = value(0.0)?;
    let top = value(0.9)?;
    Ok(delta_from(&trend.community, base, top))
}

/// Delta from the two endpoint values.
pub fn delta_from<F: Scalar>(community: &str, base: F, top: F) -> DeltaStat<F> {
    let d = top - base;
    DeltaStat {
        community: community.to_string(),
        delta: d,
        delta_pct: (base != F::zero()).then(|| F::lit(100.0) * d / base),
    }
}

/// An article with its propaganda score, frame and sharing users.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredArticle<F> {
    pub url: String,
    pub frame: Option<String>,
    pub score: F,
    pub sharers: BTreeSet<String>,
}

/// Fraction of flagged (score > 0.5) articles among those in `frame` shared by
/// members with `C_u >= k`.
pub fn frame_conditioned_trend<F: Scalar>(
    articles: &[ScoredArticle<F>],
    coordination: &CoordinationScores<F>,
    assignment: &CommunityAssignment,
    community: usize,
    frame: &str,
    grid: &[F],
) -> Result<TrendSeries<F>> {
    let members = community_members(assignment, community)?;
    frame_trend_for(&community.to_string(), &members, articles, coordination, frame, grid)
}

/// [`frame_conditioned_trend`] over an explicit member list.
pub fn frame_trend_for<F: Scalar>(
    name: &str,
    members: &[&str],
    articles: &[ScoredArticle<F>],
    coordination: &CoordinationScores<F>,
    frame: &str,
    grid: &[F],
) -> Result<TrendSeries<F>> {
    validate_grid(grid)?;
    if !articles.iter().any(|a| a.frame.as_deref() == Some(frame)) {
        return Err(Error::UnknownFrame(frame.to_string()));
    }
    let in_frame: Vec<&ScoredArticle<F>> = articles.iter().filter(|a| a.frame.as_deref() == Some(frame)).collect();
    let mut series = TrendSeries::empty(name, grid);
    for (i, &k) in grid.iter().enumerate() {
        let qualifying: BTreeSet<&str> = members
            .iter()
            .copied()
            .filter(|u| coordination.score(u).is_some_and(|c| c >= k))
            .collect();
        let shared: Vec<&&ScoredArticle<F>> = in_frame
            .iter()
            .filter(|a| a.sharers.iter().any(|s| qualifying.contains(s.as_str())))
            .collect();
        series.users[i] = qualifying.len();
        series.items[i] = shared.len();
        if !shared.is_empty() {
            let flagged = shared.iter().filter(|a| a.score > F::lit(0.5)).count();
            series.values[i] = Some(F::from_usize_lossy(flagged) / F::from_usize_lossy(shared.len()));
        }
    }
    Ok(series)
}
