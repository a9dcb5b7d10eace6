//! Tweet, article and user-signal data model plus file ingestion.
//!
//! Tweets and articles are JSON Lines; user signals are a CSV with header
//! `user_id,automation_score,suspended`. A loaded [`Corpus`] is immutable.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::communities::CommunityAssignment;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tweet {
    pub id: String,
    pub author_id: String,
    /// UTC epoch seconds.
    pub timestamp: u64,
    pub text: String,
    /// Present iff this tweet is a retweet.
    pub retweeted_id: Option<String>,
    /// Quote tweets are originals annotated with the quoted id.
    pub quoted_id: Option<String>,
    /// Canonicalized URLs.
    pub urls: Vec<String>,
}

impl Tweet {
    pub fn is_retweet(&self) -> bool {
        self.retweeted_id.is_some()
    }

    /// Id of the original content: the retweeted tweet for retweets, itself otherwise.
    pub fn root_id(&self) -> &str {
        self.retweeted_id.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Article {
    pub url: String,
    pub title: String,
    pub text: String,
    pub frame: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserSignal {
    pub user_id: String,
    pub automation_score: f64,
    pub suspended: bool,
}

/// On-disk tweet record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub author_id: String,
    pub ts: i64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweeted_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quoted_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub urls: Vec<String>,
}

/// On-disk article record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub url: String,
    pub title: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<String>,
}

#[derive(Debug, Deserialize)]
struct SignalRecord {
    user_id: String,
    automation_score: f64,
    suspended: u8,
}

impl TweetRecord {
    fn into_tweet(self) -> std::result::Result<Tweet, String> {
        if self.ts < 0 {
            return Err(format!("negative timestamp {}", self.ts));
        }
        if self.retweeted_id.as_deref() == Some(self.id.as_str()) {
            return Err(format!("tweet {} retweets itself", self.id));
        }
        Ok(Tweet {
            urls: self.urls.iter().map(|u| canonicalize_url(u)).collect(),
            id: self.id,
            author_id: self.author_id,
            timestamp: self.ts as u64,
            text: self.text,
            retweeted_id: self.retweeted_id,
            quoted_id: self.quoted_id,
        })
    }
}

impl From<&Tweet> for TweetRecord {
    fn from(t: &Tweet) -> Self {
        TweetRecord {
            id: t.id.clone(),
            author_id: t.author_id.clone(),
            ts: t.timestamp as i64,
            text: t.text.clone(),
            retweeted_id: t.retweeted_id.clone(),
            quoted_id: t.quoted_id.clone(),
            urls: t.urls.clone(),
        }
    }
}

impl From<&Article> for ArticleRecord {
    fn from(a: &Article) -> Self {
        ArticleRecord {
            url: a.url.clone(),
            title: a.title.clone(),
            text: a.text.clone(),
            frame: a.frame.clone(),
        }
    }
}

const TRACKING_PARAMS: &[&str] = &[
    "fbclid", "gclid", "dclid", "msclkid", "igshid", "mc_cid", "mc_eid", "ref_src", "ref_url", "_ga", "cmpid", "ocid",
    "smid",
];

fn is_tracking_param(key: &str) -> bool {
    let key = key.to_ascii_lowercase();
    key.starts_with("utm_") || TRACKING_PARAMS.contains(&key.as_str())
}

/// Lowercases scheme and host, drops the fragment and tracking query parameters.
/// Strings that do not parse as absolute URLs are only trimmed.
pub fn canonicalize_url(raw: &str) -> String {
    let trimmed = raw.trim();
    let Ok(mut url) = Url::parse(trimmed) else {
        return trimmed.to_string();
    };
    url.set_fragment(None);
    if url.query_pairs().any(|(k, _)| is_tracking_param(&k)) {
        let kept: Vec<(String, String)> = url
            .query_pairs()
            .filter(|(k, _)| !is_tracking_param(k))
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect();
        if kept.is_empty() {
            url.set_query(None);
        } else {
            url.query_pairs_mut().clear().extend_pairs(kept);
        }
    } else if url.query() == Some("") {
        url.set_query(None);
    }
    url.to_string()
}

/// Immutable in-memory corpus.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    tweets: Vec<Tweet>,
    index: HashMap<String, usize>,
    by_author: BTreeMap<String, Vec<usize>>,
    articles: BTreeMap<String, Article>,
    signals: BTreeMap<String, UserSignal>,
    /// Per tweet: canonical urls that resolve to a corpus article.
    links: Vec<Vec<String>>,
    duplicate_tweets: usize,
}

impl Corpus {
    /// Builds a corpus from already-parsed records. Later tweets with a repeated id
    /// replace earlier ones in place.
    pub fn from_parts(
        tweets: impl IntoIterator<Item = Tweet>,
        articles: impl IntoIterator<Item = Article>,
        signals: impl IntoIterator<Item = UserSignal>,
    ) -> Result<Self> {
        let mut builder = CorpusBuilder::default();
        for t in tweets {
            builder.push_tweet(t).map_err(Error::Integrity)?;
        }
        for a in articles {
            builder.push_article(a)?;
        }
        for s in signals {
            builder.push_signal(s).map_err(Error::Integrity)?;
        }
        Ok(builder.finish())
    }

    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    pub fn tweet(&self, id: &str) -> Option<&Tweet> {
        self.index.get(id).map(|&i| &self.tweets[i])
    }

    pub fn articles(&self) -> &BTreeMap<String, Article> {
        &self.articles
    }

    pub fn article(&self, url: &str) -> Option<&Article> {
        self.articles.get(url)
    }

    pub fn signals(&self) -> &BTreeMap<String, UserSignal> {
        &self.signals
    }

    /// Distinct author ids, sorted.
    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.by_author.keys().map(String::as_str)
    }

    pub fn num_users(&self) -> usize {
        self.by_author.len()
    }

    pub fn has_user(&self, user: &str) -> bool {
        self.by_author.contains_key(user)
    }

    /// Tweets authored by `user`, in load order.
    pub fn tweets_by(&self, user: &str) -> impl Iterator<Item = &Tweet> {
        self.by_author.get(user).into_iter().flatten().map(|&i| &self.tweets[i])
    }

    /// Article urls linked from the tweet at position `idx` of [`Corpus::tweets`].
    pub fn linked_articles(&self, idx: usize) -> &[String] {
        &self.links[idx]
    }

    /// Article urls linked from the given tweet.
    pub fn articles_of(&self, tweet: &Tweet) -> &[String] {
        self.index
            .get(&tweet.id)
            .map(|&i| self.links[i].as_slice())
            .unwrap_or(&[])
    }

    pub fn num_retweets(&self) -> usize {
        self.tweets.iter().filter(|t| t.is_retweet()).count()
    }

    /// Retweets whose target is not in the corpus.
    pub fn num_dangling_retweets(&self) -> usize {
        self.tweets
            .iter()
            .filter_map(|t| t.retweeted_id.as_deref())
            .filter(|id| !self.index.contains_key(*id))
            .count()
    }

    pub fn num_linked_articles(&self) -> usize {
        self.links.iter().flatten().collect::<BTreeSet<_>>().len()
    }

    pub fn duplicate_tweets(&self) -> usize {
        self.duplicate_tweets
    }

    /// Writes the corpus back out in the on-disk formats.
    pub fn write_files(
        &self,
        tweet_path: &Path,
        article_path: Option<&Path>,
        signal_path: Option<&Path>,
    ) -> Result<()> {
        write_jsonl(tweet_path, self.tweets.iter().map(TweetRecord::from))?;
        if let Some(path) = article_path {
            write_jsonl(path, self.articles.values().map(ArticleRecord::from))?;
        }
        if let Some(path) = signal_path {
            write_signals(path, self.signals.values())?;
        }
        Ok(())
    }

    pub fn summary(&self) -> CorpusSummary {
        CorpusSummary {
            tweets: self.tweets.len(),
            users: self.num_users(),
            retweets: self.num_retweets(),
            dangling_retweets: self.num_dangling_retweets(),
            articles: self.articles.len(),
            linked_articles: self.num_linked_articles(),
            signals: self.signals.len(),
            duplicate_tweets: self.duplicate_tweets,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub tweets: usize,
    pub users: usize,
    pub retweets: usize,
    pub dangling_retweets: usize,
    pub articles: usize,
    pub linked_articles: usize,
    pub signals: usize,
    pub duplicate_tweets: usize,
}

#[derive(Default)]
struct CorpusBuilder {
    tweets: Vec<Tweet>,
    index: HashMap<String, usize>,
    articles: BTreeMap<String, Article>,
    signals: BTreeMap<String, UserSignal>,
    duplicate_tweets: usize,
}

impl CorpusBuilder {
    fn push_tweet(&mut self, tweet: Tweet) -> std::result::Result<(), String> {
        if tweet.retweeted_id.as_deref() == Some(tweet.id.as_str()) {
            return Err(format!("tweet {} retweets itself", tweet.id));
        }
        match self.index.get(&tweet.id) {
            Some(&i) => {
                self.duplicate_tweets += 1;
                self.tweets[i] = tweet;
            }
            None => {
                self.index.insert(tweet.id.clone(), self.tweets.len());
                self.tweets.push(tweet);
            }
        }
        Ok(())
    }

    fn push_article(&mut self, mut article: Article) -> Result<()> {
        article.url = canonicalize_url(&article.url);
        if article.text.trim().is_empty() {
            return Err(Error::Integrity(format!("article {} has empty text", article.url)));
        }
        match self.articles.get(&article.url) {
            Some(existing) if existing.text != article.text => Err(Error::Integrity(format!(
                "duplicate article url {} with differing text",
                article.url
            ))),
            Some(_) => Ok(()),
            None => {
                self.articles.insert(article.url.clone(), article);
                Ok(())
            }
        }
    }

    fn push_signal(&mut self, signal: UserSignal) -> std::result::Result<(), String> {
        if !(0.0..=1.0).contains(&signal.automation_score) {
            return Err(format!(
                "automation score {} of {} outside [0,1]",
                signal.automation_score, signal.user_id
            ));
        }
        self.signals.insert(signal.user_id.clone(), signal);
        Ok(())
    }

    fn finish(self) -> Corpus {
        let mut by_author: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, t) in self.tweets.iter().enumerate() {
            by_author.entry(t.author_id.clone()).or_default().push(i);
        }
        let links = self
            .tweets
            .iter()
            .map(|t| {
                let mut linked: Vec<String> = t
                    .urls
                    .iter()
                    .filter(|u| self.articles.contains_key(*u))
                    .cloned()
                    .collect();
                linked.dedup();
                linked
            })
            .collect();
        Corpus {
            tweets: self.tweets,
            index: self.index,
            by_author,
            articles: self.articles,
            signals: self.signals,
            links,
            duplicate_tweets: self.duplicate_tweets,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Iterates non-blank lines with their 1-based line numbers.
fn jsonl_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<impl Iterator<Item = Result<(usize, T)>> + '_> {
    let reader = open(path)?;
    Ok(reader.lines().enumerate().filter_map(move |(i, line)| {
        let line_no = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(Error::io(path, e))),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(
            serde_json::from_str::<T>(&line)
                .map(|rec| (line_no, rec))
                .map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                }),
        )
    }))
}

/// Loads the tweet file and the optional article and signal files.
pub fn load_corpus(tweet_path: &Path, article_path: Option<&Path>, signal_path: Option<&Path>) -> Result<Corpus> {
    let mut builder = CorpusBuilder::default();
    for rec in jsonl_records::<TweetRecord>(tweet_path)? {
        let (line, rec) = rec?;
        let parse_err = |message: String| Error::Parse {
            path: tweet_path.to_path_buf(),
            line,
            message,
        };
        let tweet = rec.into_tweet().map_err(parse_err)?;
        builder.push_tweet(tweet).map_err(parse_err)?;
    }
    if let Some(path) = article_path {
        for rec in jsonl_records::<ArticleRecord>(path)? {
            let (_, rec) = rec?;
            builder.push_article(Article {
                url: rec.url,
                title: rec.title,
                text: rec.text,
                frame: rec.frame,
            })?;
        }
    }
    if let Some(path) = signal_path {
        for signal in read_signals(path)? {
            builder.push_signal(signal).map_err(Error::Integrity)?;
        }
    }
    Ok(builder.finish())
}

/// Reads a `user_id,automation_score,suspended` CSV.
pub fn read_signals(path: &Path) -> Result<Vec<UserSignal>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let mut out = Vec::new();
    for rec in reader.deserialize::<SignalRecord>() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let suspended = match rec.suspended {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Integrity(format!(
                    "suspended flag of {} must be 0 or 1, got {other}",
                    rec.user_id
                )))
            }
        };
        out.push(UserSignal {
            user_id: rec.user_id,
            automation_score: rec.automation_score,
            suspended,
        });
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for rec in records {
        let line = serde_json::to_string(&rec).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_signals<'a>(path: &Path, signals: impl IntoIterator<Item = &'a UserSignal>) -> Result<()> {
    let mut out = String::from("user_id,automation_score,suspended\n");
    for s in signals {
        out.push_str(&format!(
            "{},{},{}\n",
            s.user_id,
            s.automation_score,
            u8::from(s.suspended)
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Per-community sharing statistics.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CommunityStats {
    pub users: usize,
    pub article_shares: usize,
    pub distinct_articles: usize,
    pub tweets: usize,
    /// Distinct original tweets: each retweet counts towards its target.
    pub distinct_tweets: usize,
}

impl CommunityStats {
    pub fn pct_distinct_articles(&self) -> Option<f64> {
        distinct_percentage(self.distinct_articles, self.article_shares)
    }

    pub fn pct_distinct_tweets(&self) -> Option<f64> {
        distinct_percentage(self.distinct_tweets, self.tweets)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CommunityStatsTable {
    /// Indexed by community label.
    pub rows: Vec<CommunityStats>,
    pub overall: CommunityStats,
}

/// `100 * distinct / total`, undefined for an empty total.
pub fn distinct_percentage(distinct: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| 100.0 * distinct as f64 / total as f64)
}

/// One-decimal display; blank when undefined.
pub fn format_percentage(pct: Option<f64>) -> String {
    pct.map(|p| format!("{p:.1}")).unwrap_or_default()
}

pub fn community_stats(corpus: &Corpus, assignment: &CommunityAssignment) -> Result<CommunityStatsTable> {
    let unknown: Vec<String> = assignment
        .users()
        .filter(|u| !corpus.has_user(u))
        .map(str::to_string)
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownUsers(unknown));
    }
    let stats_for = |members: &mut dyn Iterator<Item = &str>| {
        let mut users = 0;
        let mut tweets = 0;
        let mut article_shares = 0;
        let mut roots = BTreeSet::new();
        let mut urls = BTreeSet::new();
        for user in members {
            users += 1;
            for t in corpus.tweets_by(user) {
                tweets += 1;
                roots.insert(t.root_id());
                for url in corpus.articles_of(t) {
                    article_shares += 1;
                    urls.insert(url.as_str());
                }
            }
        }
        CommunityStats {
            users,
            article_shares,
            distinct_articles: urls.len(),
            tweets,
            distinct_tweets: roots.len(),
        }
    };
    let rows = (0..assignment.num_communities())
        .map(|c| stats_for(&mut assignment.members(c).into_iter()))
        .collect();
    let overall = stats_for(&mut assignment.users());
    Ok(CommunityStatsTable { rows, overall })
}
