//! Synthetic corpora with planted coordinated communities.
//!
//! Each community has a shared retweet pool; a member with coordination level
//! `rho_u` draws each retweet from it with probability `rho_u` and from the global
//! pool otherwise. Background users only use the global pool, which gives every
//! node a dense layer of weak similarities. Brokers copy half of the retweets of
//! the top-ranked member of two adjacent communities, so the communities stay in
//! one component of the backbone. Original tweets are 20-word texts from a
//! propaganda or a neutral vocabulary (disjoint apart from shared filler words),
//! grouped 20 per chunk so chunking at 400 tokens recovers the planted chunks.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Corpus, Tweet, UserSignal};
use crate::error::{Error, Result};
use crate::propaganda::LabeledText;

pub const WORDS_PER_TWEET: usize = 20;
pub const TWEETS_PER_CHUNK: usize = 20;
const BASE_TIME: u64 = 1_575_000_000;

const PROPAGANDA_WORDS: &[&str] = &[
    "traitors",
    "betrayal",
    "enemy",
    "invasion",
    "destroy",
    "corrupt",
    "elite",
    "puppets",
    "lies",
    "shameful",
    "disgrace",
    "treason",
    "crush",
    "surrender",
    "cowards",
    "rigged",
    "sabotage",
    "humiliation",
    "tyranny",
    "regime",
    "patriots",
    "fight",
    "victory",
    "never",
    "stolen",
    "brainwashed",
    "propaganda",
    "hoax",
    "scandal",
    "conspiracy",
    "radical",
    "extremist",
    "threat",
    "disaster",
    "catastrophe",
    "outrage",
    "criminal",
    "liars",
    "rotten",
    "vermin",
    "doom",
    "collapse",
    "evil",
    "wicked",
    "sellout",
    "hypocrites",
    "parasites",
    "mob",
    "chaos",
    "attack",
];

const NEUTRAL_WORDS: &[&str] = &[
    "weather",
    "garden",
    "recipe",
    "holiday",
    "music",
    "coffee",
    "library",
    "museum",
    "river",
    "village",
    "concert",
    "football",
    "bicycle",
    "morning",
    "breakfast",
    "painting",
    "walking",
    "family",
    "weekend",
    "teacher",
    "science",
    "report",
    "meeting",
    "schedule",
    "station",
    "market",
    "harvest",
    "festival",
    "community",
    "volunteer",
    "bakery",
    "theatre",
    "nature",
    "forest",
    "lecture",
    "research",
    "students",
    "nursing",
    "budget",
    "survey",
    "transport",
    "housing",
    "council",
    "project",
    "planning",
    "update",
    "season",
    "garage",
    "kitchen",
    "hospital",
];

const FILLER_WORDS: &[&str] = &[
    "the", "of", "and", "to", "in", "is", "for", "on", "with", "as", "this", "that", "we", "they", "it", "our",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagandaProfile {
    /// Every member has the community rate.
    #[default]
    Flat,
    /// Rate grows with the member's coordination rank.
    Increasing,
    /// Rate shrinks with the member's coordination rank.
    Decreasing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunitySpec {
    pub size: usize,
    /// Coordination level of the top-ranked member.
    pub rho: f64,
    /// Member levels are spread linearly over `[rho - spread, rho]` by rank.
    pub coordination_spread: f64,
    pub propaganda_rate: f64,
    pub profile: PropagandaProfile,
    /// Width of the linear rate ramp for non-flat profiles.
    pub propaganda_spread: f64,
    pub automation_level: f64,
    pub suspension_rate: f64,
}

impl Default for CommunitySpec {
    fn default() -> Self {
        CommunitySpec {
            size: 50,
            rho: 0.9,
            coordination_spread: 0.0,
            propaganda_rate: 0.5,
            profile: PropagandaProfile::Flat,
            propaganda_spread: 1.0,
            automation_level: 0.3,
            suspension_rate: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSpec {
    pub propaganda_rate: f64,
    pub automation_level: f64,
    pub suspension_rate: f64,
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        BackgroundSpec {
            propaganda_rate: 0.3,
            automation_level: 0.2,
            suspension_rate: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub communities: Vec<CommunitySpec>,
    /// All retweeting accounts: community members, brokers and background users.
    pub total_users: usize,
    pub background: BackgroundSpec,
    /// One broker between each pair of consecutive communities.
    pub brokers: bool,
    pub global_pool: usize,
    pub community_pool: usize,
    /// Inclusive range of retweets per user, drawn uniformly.
    pub retweets_min: usize,
    pub retweets_max: usize,
    pub chunks_per_user: usize,
    /// Accounts authoring the pool tweets.
    pub source_accounts: usize,
    pub articles_per_community: usize,
    pub global_articles: usize,
    /// Probability that an original tweet links an article.
    pub url_rate: f64,
    pub frames: Vec<String>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            communities: vec![
                CommunitySpec {
                    size: 60,
                    propaganda_rate: 0.8,
                    ..Default::default()
                },
                CommunitySpec {
                    size: 50,
                    propaganda_rate: 0.2,
                    ..Default::default()
                },
            ],
            total_users: 400,
            background: BackgroundSpec::default(),
            brokers: true,
            global_pool: 1200,
            community_pool: 300,
            retweets_min: 80,
            retweets_max: 120,
            chunks_per_user: 2,
            source_accounts: 40,
            articles_per_community: 10,
            global_articles: 20,
            url_rate: 0.1,
            frames: ["economy", "public_opinion", "politics", "security"]
                .map(String::from)
                .to_vec(),
            seed: 7,
        }
    }
}

impl ScenarioConfig {
    fn num_brokers(&self) -> usize {
        if self.brokers {
            self.communities.len().saturating_sub(1)
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        for (i, c) in self.communities.iter().enumerate() {
            if c.size < 2 {
                return bad(format!("community {i} has size {} < 2", c.size));
            }
            for (name, v) in [
                ("rho", c.rho),
                ("coordination_spread", c.coordination_spread),
                ("propaganda_rate", c.propaganda_rate),
                ("propaganda_spread", c.propaganda_spread),
                ("automation_level", c.automation_level),
                ("suspension_rate", c.suspension_rate),
            ] {
                if !unit(v) {
                    return bad(format!("community {i}: {name} = {v} is outside [0, 1]"));
                }
            }
            if c.coordination_spread > c.rho {
                return bad(format!("community {i}: coordination_spread exceeds rho"));
            }
        }
        let b = &self.background;
        for (name, v) in [
            ("propaganda_rate", b.propaganda_rate),
            ("automation_level", b.automation_level),
            ("suspension_rate", b.suspension_rate),
            ("url_rate", self.url_rate),
        ] {
            if !unit(v) {
                return bad(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if self.retweets_min == 0 || self.retweets_min > self.retweets_max {
            return bad(format!(
                "bad retweet range {}..={}",
                self.retweets_min, self.retweets_max
            ));
        }
        if self.global_pool < self.retweets_max {
            return bad("global_pool must be at least retweets_max".into());
        }
        if self.community_pool == 0 || self.source_accounts == 0 || self.chunks_per_user == 0 {
            return bad("community_pool, source_accounts and chunks_per_user must be positive".into());
        }
        if self.frames.is_empty() {
            return bad("at least one frame label is required".into());
        }
        let planted: usize = self.communities.iter().map(|c| c.size).sum::<usize>() + self.num_brokers();
        if planted > self.total_users {
            return Err(Error::InfeasibleScenario(format!(
                "communities and brokers need {planted} users but the budget is {}",
                self.total_users
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Member,
    Broker,
    Background,
    Source,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserTruth {
    pub role: Role,
    pub community: Option<usize>,
    pub rho: f64,
    pub propaganda_rate: f64,
    /// Rank by planted coordination within the community, in `[0, 1]`.
    pub coordination_rank: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub config: ScenarioConfig,
    /// Members of each planted community, sorted.
    pub communities: Vec<Vec<String>>,
    pub users: BTreeMap<String, UserTruth>,
}

impl GroundTruth {
    pub fn community_of(&self, user: &str) -> Option<usize> {
        self.users.get(user).and_then(|u| u.community)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("bad ground truth: {e}")))
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub corpus: Corpus,
    pub truth: GroundTruth,
}

impl Scenario {
    /// Writes `tweets.jsonl`, `articles.jsonl`, `signals.csv` and `ground_truth.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.corpus.write_files(
            &dir.join("tweets.jsonl"),
            Some(&dir.join("articles.jsonl")),
            Some(&dir.join("signals.csv")),
        )?;
        let p = dir.join("ground_truth.json");
        std::fs::write(&p, self.truth.to_json()).map_err(|e| Error::io(&p, e))
    }
}

fn words(rng: &mut ChaCha8Rng, propaganda: bool, n: usize) -> Vec<&'static str> {
    let vocab = if propaganda { PROPAGANDA_WORDS } else { NEUTRAL_WORDS };
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.25) {
                FILLER_WORDS[rng.gen_range(0..FILLER_WORDS.len())]
            } else {
                vocab[rng.gen_range(0..vocab.len())]
            }
        })
        .collect()
}

fn tweet_text(rng: &mut ChaCha8Rng, propaganda: bool) -> String {
    words(rng, propaganda, WORDS_PER_TWEET).join(" ")
}

/// Article-like text: sentences of 8 to 16 words.
fn document(rng: &mut ChaCha8Rng, propaganda: bool, num_words: usize) -> String {
    let mut out = String::new();
    let mut left = num_words;
    while left > 0 {
        let n = rng.gen_range(8..=16).min(left);
        let mut sentence = words(rng, propaganda, n).join(" ");
        if let Some(first) = sentence.get(..1) {
            sentence.replace_range(..1, &first.to_uppercase());
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&sentence);
        out.push('.');
        left -= n;
    }
    out
}

/// Labeled texts from the template vocabularies, alternating classes. Every
/// other pair is shaped like a tweet chunk (newline-separated tweets) rather
/// than an article.
pub fn training_corpus(n: usize, seed: u64) -> Vec<LabeledText> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7472_6169_6e00);
    (0..n)
        .map(|i| {
            let label = i % 2 == 0;
            let text = if (i / 2) % 2 == 0 {
                let len = rng.gen_range(150..=400);
                document(&mut rng, label, len)
            } else {
                (0..TWEETS_PER_CHUNK)
                    .map(|_| tweet_text(&mut rng, label))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            LabeledText { text, label }
        })
        .collect()
}

struct Account {
    truth: UserTruth,
    automation: f64,
    suspension: f64,
}

/// Generates a corpus and its planting. Deterministic in `config.seed`.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_members: usize = config.communities.iter().map(|c| c.size).sum();
    let n_brokers = config.num_brokers();
    let n_background = config.total_users - n_members - n_brokers;

    let mut ids: Vec<usize> = (0..config.total_users + config.source_accounts).collect();
    ids.shuffle(&mut rng);
    let width = ids.len().to_string().len();
    let mut next_id = ids.into_iter().map(|i| format!("u{i:0width$}"));
    let mut fresh = || next_id.next().expect("enough ids");

    let mut accounts: Vec<(String, Account)> = Vec::new();
    for (ci, c) in config.communities.iter().enumerate() {
        for j in 0..c.size {
            let rank = j as f64 / (c.size - 1) as f64;
            let rho = c.rho - c.coordination_spread * (1.0 - rank);
            let ramp = c.propaganda_spread * (rank - 0.5);
            let pi = match c.profile {
                PropagandaProfile::Flat => c.propaganda_rate,
                PropagandaProfile::Increasing => c.propaganda_rate + ramp,
                PropagandaProfile::Decreasing => c.propaganda_rate - ramp,
            }
            .clamp(0.0, 1.0);
            accounts.push((
                fresh(),
                Account {
                    truth: UserTruth {
                        role: Role::Member,
                        community: Some(ci),
                        rho,
                        propaganda_rate: pi,
                        coordination_rank: Some(rank),
                    },
                    automation: c.automation_level,
                    suspension: c.suspension_rate,
                },
            ));
        }
    }
    let plain = |role| Account {
        truth: UserTruth {
            role,
            community: None,
            rho: 0.0,
            propaganda_rate: config.background.propaganda_rate,
            coordination_rank: None,
        },
        automation: config.background.automation_level,
        suspension: config.background.suspension_rate,
    };
    for _ in 0..n_brokers {
        accounts.push((fresh(), plain(Role::Broker)));
    }
    for _ in 0..n_background {
        accounts.push((fresh(), plain(Role::Background)));
    }
    let sources: Vec<String> = (0..config.source_accounts).map(|_| fresh()).collect();

    let mut tweets: Vec<Tweet> = Vec::new();
    let mut tweet_no = 0usize;
    let mut new_tweet = |author: &str, ts: u64, text: String, rt: Option<String>, urls: Vec<String>| {
        tweet_no += 1;
        Tweet {
            id: format!("{}{tweet_no:08}", if rt.is_some() { "r" } else { "t" }),
            author_id: author.to_string(),
            timestamp: ts,
            text,
            retweeted_id: rt,
            quoted_id: None,
            urls,
        }
    };

    // pool tweets, authored round-robin by the source accounts
    let mut pool_tweet = |k: usize, rng: &mut ChaCha8Rng, tweets: &mut Vec<Tweet>| {
        let t = new_tweet(
            &sources[k % sources.len()],
            BASE_TIME + k as u64,
            tweet_text(rng, false),
            None,
            vec![],
        );
        let id = t.id.clone();
        tweets.push(t);
        id
    };
    let mut k = 0;
    let global: Vec<String> = (0..config.global_pool)
        .map(|_| {
            k += 1;
            pool_tweet(k, &mut rng, &mut tweets)
        })
        .collect();
    let pools: Vec<Vec<String>> = config
        .communities
        .iter()
        .map(|_| {
            (0..config.community_pool)
                .map(|_| {
                    k += 1;
                    pool_tweet(k, &mut rng, &mut tweets)
                })
                .collect()
        })
        .collect();

    // articles
    let mut articles: Vec<Article> = Vec::new();
    let mut article_sets: Vec<Vec<String>> = Vec::new();
    let rates: Vec<f64> = config
        .communities
        .iter()
        .map(|c| c.propaganda_rate)
        .chain([config.background.propaganda_rate])
        .collect();
    for (set, &rate) in rates.iter().enumerate() {
        let count = if set < config.communities.len() {
            config.articles_per_community
        } else {
            config.global_articles
        };
        let mut urls = Vec::new();
        for a in 0..count {
            let propaganda = rng.gen_bool(rate);
            let url = format!("https://news{set}.example.org/articles/{a:04}");
            let len = rng.gen_range(150..=400);
            articles.push(Article {
                url: url.clone(),
                title: words(&mut rng, propaganda, 6).join(" "),
                text: document(&mut rng, propaganda, len),
                frame: Some(config.frames[(articles.len()) % config.frames.len()].clone()),
            });
            urls.push(url);
        }
        article_sets.push(urls);
    }
    let global_articles = article_sets.pop().expect("global set");

    let mut retweet_targets: Vec<Vec<String>> = Vec::with_capacity(accounts.len());
    for (_, acc) in &accounts {
        let n = rng.gen_range(config.retweets_min..=config.retweets_max);
        let mut targets = Vec::with_capacity(n);
        if let (Role::Member, Some(c)) = (acc.truth.role, acc.truth.community) {
            let from_pool = (0..n)
                .filter(|_| rng.gen_bool(acc.truth.rho))
                .count()
                .min(config.community_pool);
            for i in index::sample(&mut rng, config.community_pool, from_pool) {
                targets.push(pools[c][i].clone());
            }
            for i in index::sample(&mut rng, config.global_pool, n - from_pool) {
                targets.push(global[i].clone());
            }
        } else {
            for i in index::sample(&mut rng, config.global_pool, n) {
                targets.push(global[i].clone());
            }
        }
        retweet_targets.push(targets);
    }
    // brokers copy half of each neighbouring community's top member
    let mut top = Vec::new();
    let mut offset = 0;
    for c in &config.communities {
        top.push(offset + c.size - 1);
        offset += c.size;
    }
    for b in 0..n_brokers {
        let mut targets = Vec::new();
        for &m in &[top[b], top[b + 1]] {
            let src = &retweet_targets[m];
            for i in index::sample(&mut rng, src.len(), src.len() / 2) {
                targets.push(src[i].clone());
            }
        }
        targets.sort();
        targets.dedup();
        retweet_targets[n_members + b] = targets;
    }

    let mut signals = Vec::new();
    let span = (config.chunks_per_user * TWEETS_PER_CHUNK) as u64;
    for ((user, acc), targets) in accounts.iter().zip(&retweet_targets) {
        let start = BASE_TIME + 100_000;
        // floor(pi * n + U) propagandistic chunks: unbiased, with the least spread
        let target = acc.truth.propaganda_rate * config.chunks_per_user as f64 + rng.gen::<f64>();
        let mut labels: Vec<bool> = (0..config.chunks_per_user)
            .map(|i| (i as f64) < target.floor())
            .collect();
        labels.shuffle(&mut rng);
        for (chunk, &propaganda) in labels.iter().enumerate() {
            for t in 0..TWEETS_PER_CHUNK {
                let ts = start + (chunk * TWEETS_PER_CHUNK + t) as u64 * 60;
                let mut urls = Vec::new();
                if rng.gen_bool(config.url_rate) {
                    let set = match acc.truth.community {
                        Some(c) if rng.gen_bool(acc.truth.rho.max(0.5)) => &article_sets[c],
                        _ => &global_articles,
                    };
                    if !set.is_empty() {
                        urls.push(set[rng.gen_range(0..set.len())].clone());
                    }
                }
                let text = tweet_text(&mut rng, propaganda);
                tweets.push(new_tweet(user, ts, text, None, urls));
            }
        }
        for (i, target) in targets.iter().enumerate() {
            let ts = start + span * 60 + i as u64 * 30;
            tweets.push(new_tweet(
                user,
                ts,
                format!("RT {target}"),
                Some(target.clone()),
                vec![],
            ));
        }
        let jitter: f64 = rng.gen_range(-0.1..=0.1);
        signals.push(UserSignal {
            user_id: user.clone(),
            automation_score: (acc.automation + jitter).clamp(0.0, 1.0),
            suspended: rng.gen_bool(acc.suspension),
        });
    }

    let corpus = Corpus::from_parts(tweets, articles, signals)?;
    let mut communities = vec![Vec::new(); config.communities.len()];
    let mut users = BTreeMap::new();
    for (user, acc) in accounts {
        if let Some(c) = acc.truth.community {
            communities[c].push(user.clone());
        }
        users.insert(user, acc.truth);
    }
    for s in sources {
        users.insert(
            s,
            UserTruth {
                role: Role::Source,
                community: None,
                rho: 0.0,
                propaganda_rate: 0.0,
                coordination_rank: None,
            },
        );
    }
    communities.iter_mut().for_each(|m| m.sort());
    Ok(Scenario {
        corpus,
        truth: GroundTruth {
            seed: config.seed,
            config: config.clone(),
            communities,
            users,
        },
    })
}

/// Vocabularies used for generated text; exposed for tests.
pub fn vocabularies() -> (BTreeSet<&'static str>, BTreeSet<&'static str>, BTreeSet<&'static str>) {
    (
        PROPAGANDA_WORDS.iter().copied().collect(),
        NEUTRAL_WORDS.iter().copied().collect(),
        FILLER_WORDS.iter().copied().collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            total_users: 150,
            global_pool: 600,
            retweets_min: 30,
            retweets_max: 40,
            communities: vec![
                CommunitySpec {
                    size: 20,
                    ..Default::default()
                },
                CommunitySpec {
                    size: 15,
                    ..Default::default()
                },
            ],
            ..Default::default()
        }
    }

    #[test]
    fn vocabularies_are_disjoint() {
        let (p, n, f) = vocabularies();
        assert!(p.is_disjoint(&n) && p.is_disjoint(&f) && n.is_disjoint(&f));
        assert_eq!(p.len(), PROPAGANDA_WORDS.len());
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.corpus.tweets(), b.corpus.tweets());
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn infeasible_budget() {
        let mut c = small();
        c.total_users = 30;
        assert!(matches!(generate(&c), Err(Error::InfeasibleScenario(_))));
        c.communities[0].size = 1;
        assert!(generate(&c).is_err());
    }

    #[test]
    fn shape() {
        let s = generate(&small()).unwrap();
        let c = small();
        assert_eq!(s.truth.communities[0].len(), 20);
        assert_eq!(s.truth.users.len(), c.total_users + c.source_accounts);
        let member = &s.truth.communities[1][0];
        let originals = s.corpus.tweets_by(member).filter(|t| !t.is_retweet()).count();
        assert_eq!(originals, c.chunks_per_user * TWEETS_PER_CHUNK);
        assert_eq!(s.corpus.signals().len(), c.total_users);
        assert_eq!(s.corpus.num_dangling_retweets(), 0);
    }

    #[test]
    fn training_corpus_balanced() {
        let t = training_corpus(10, 1);
        assert_eq!(t.iter().filter(|x| x.label).count(), 5);
        assert_eq!(t, training_corpus(10, 1));
    }
}
