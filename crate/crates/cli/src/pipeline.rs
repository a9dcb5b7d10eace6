//! Pipeline stages. Each stage reads the original inputs and the artifacts of
//! earlier stages from the output directory and writes its own subdirectory,
//! so `run` is exactly the composition of the individual stage commands.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use coordprop::communities::{
    dismantle, label_assignment, louvain, modularity, CommunityAssignment, CoordinationScores, LouvainParams,
};
use coordprop::corpus::{community_stats, format_percentage, load_corpus, Corpus};
use coordprop::measures::{
    frame_trend_for, informativeness, informativeness_table, trend_for, user_propaganda, ItemKind, MeasureSpec,
    ScoredArticle, TrendSeries, TREND_CSV_HEADER,
};
use coordprop::propaganda::{
    article_items, chunk_tweets, load_lexicon, load_training_corpus, PropagandaModel, TextItem, TextKind, TrainerConfig,
};
use coordprop::simnet::{
    backbone, build_retweet_vectors, select_superspreaders, similarity_network, BackboneParams, SimilarityNetwork,
};
use coordprop::stats::{correlation_report, signal_trend_for, CommunitySeries};

use crate::config::PipelineConfig;
use crate::plot::line_plot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum)]
pub enum Stage {
    Ingest,
    Network,
    Communities,
    Propaganda,
    Trends,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Network,
        Stage::Communities,
        Stage::Propaganda,
        Stage::Trends,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Network => "network",
            Stage::Communities => "communities",
            Stage::Propaganda => "propaganda",
            Stage::Trends => "trends",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| anyhow!("unknown stage {s:?}"))
    }
}

/// A failure attributed to one stage.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {:#}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

pub fn stage_dir(cfg: &PipelineConfig, stage: Stage) -> PathBuf {
    cfg.paths.output.join(stage.name())
}

/// Runs `stage` into a staging directory and moves it into place on success.
/// Outputs of later stages are removed since they no longer match.
pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> Result<(), StageError> {
    let wrap = |source: anyhow::Error| StageError { stage, source };
    cfg.validate().map_err(wrap)?;
    let out = &cfg.paths.output;
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(wrap)?;
    let staging = out.join(format!(".{}.partial", stage.name()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| wrap(e.into()))?;
    }
    fs::create_dir_all(&staging).map_err(|e| wrap(e.into()))?;
    let result = match stage {
        Stage::Ingest => ingest(cfg, &staging),
        Stage::Network => network(cfg, &staging),
        Stage::Communities => communities(cfg, &staging),
        Stage::Propaganda => propaganda(cfg, &staging),
        Stage::Trends => trends(cfg, &staging),
        Stage::Report => report(cfg, &staging),
    };
    if let Err(e) = result {
        let _ = fs::remove_dir_all(&staging);
        return Err(wrap(e));
    }
    let commit = || -> Result<()> {
        for later in Stage::ALL.into_iter().filter(|s| *s >= stage) {
            let dir = stage_dir(cfg, later);
            if dir.exists() {
                fs::remove_dir_all(&dir).with_context(|| format!("removing {}", dir.display()))?;
            }
        }
        fs::rename(&staging, stage_dir(cfg, stage)).context("moving stage output into place")?;
        Ok(())
    };
    commit().map_err(|e| {
        let _ = fs::remove_dir_all(&staging);
        wrap(e)
    })
}

/// Runs every stage up to and including `until`.
pub fn run_pipeline(cfg: &PipelineConfig, until: Stage) -> Result<(), StageError> {
    for stage in Stage::ALL.into_iter().filter(|s| *s <= until) {
        run_stage(cfg, stage)?;
    }
    Ok(())
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {} (has the previous stage run?)", path.display()))
}

fn json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn corpus(cfg: &PipelineConfig) -> Result<Corpus> {
    let tweets = cfg
        .paths
        .tweets
        .as_deref()
        .ok_or_else(|| anyhow!("no tweet file configured (paths.tweets)"))?;
    Ok(load_corpus(
        tweets,
        cfg.paths.articles.as_deref(),
        cfg.paths.signals.as_deref(),
    )?)
}

fn ingest(cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    let corpus = corpus(cfg)?;
    write(&dir.join("corpus_summary.json"), json(&corpus.summary()))
}

fn network(cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    let corpus = corpus(cfg)?;
    let ranked = select_superspreaders(&corpus, cfg.simnet.superspreader_fraction)?;
    let mut ss = String::from("user_id,retweets\n");
    for r in &ranked {
        let _ = writeln!(ss, "{},{}", r.user_id, r.retweets);
    }
    write(&dir.join("superspreaders.csv"), ss)?;
    let users: Vec<&str> = ranked.iter().map(|r| r.user_id.as_str()).collect();
    let vectors = build_retweet_vectors::<f64, _>(&corpus, &users);
    let full = similarity_network(&vectors)?;
    write(&dir.join("similarity_edges.csv"), full.to_csv())?;
    let bb = backbone(&full, BackboneParams::new(cfg.simnet.alpha)?)?;
    write(&dir.join("backbone_edges.csv"), bb.to_csv())?;
    let summary = serde_json::json!({
        "superspreaders": ranked.len(),
        "similarity_nodes": full.num_nodes(),
        "similarity_edges": full.num_edges(),
        "alpha": cfg.simnet.alpha,
        "backbone_nodes": bb.num_nodes(),
        "backbone_edges": bb.num_edges(),
    });
    write(&dir.join("network_summary.json"), json(&summary))
}

fn load_backbone(cfg: &PipelineConfig) -> Result<SimilarityNetwork<f64>> {
    let text = read(&stage_dir(cfg, Stage::Network).join("backbone_edges.csv"))?;
    Ok(SimilarityNetwork::from_csv(&text)?)
}

fn communities(cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    let net = load_backbone(cfg)?;
    let params = LouvainParams {
        resolution: cfg.communities.resolution,
        seed: cfg.communities.seed,
    };
    let assignment = louvain(&net, params)?;
    let scores = dismantle(&net)?;
    let named = label_assignment(&assignment, &cfg.community_names()?)?;
    write(&dir.join("assignment.csv"), named.to_csv(&scores))?;
    write(&dir.join("coordination_scores.csv"), scores.to_csv())?;
    let mut membership = String::from("user_id,label\n");
    for (u, c) in assignment.iter() {
        let _ = writeln!(membership, "{u},{c}");
    }
    write(&dir.join("membership.csv"), membership)?;

    let corpus = corpus(cfg)?;
    let table = community_stats(&corpus, &assignment)?;
    let mut stats = String::from(
        "community,users,article_shares,distinct_articles,pct_distinct_articles,tweets,distinct_tweets,pct_distinct_tweets\n",
    );
    let rows = table
        .rows
        .iter()
        .enumerate()
        .map(|(c, r)| (named.name(c).to_string(), r))
        .chain([("overall".to_string(), &table.overall)]);
    for (name, r) in rows {
        let _ = writeln!(
            stats,
            "{name},{},{},{},{},{},{},{}",
            r.users,
            r.article_shares,
            r.distinct_articles,
            format_percentage(r.pct_distinct_articles()),
            r.tweets,
            r.distinct_tweets,
            format_percentage(r.pct_distinct_tweets())
        );
    }
    write(&dir.join("community_stats.csv"), stats)?;
    let list: Vec<_> = (0..assignment.num_communities())
        .map(|c| serde_json::json!({"label": c, "name": named.name(c), "size": assignment.size(c)}))
        .collect();
    let summary = serde_json::json!({
        "resolution": cfg.communities.resolution,
        "seed": cfg.communities.seed,
        "modularity": modularity(&net, &assignment, cfg.communities.resolution),
        "communities": list,
    });
    write(&dir.join("communities_summary.json"), json(&summary))
}

/// Assignment, names and coordination scores written by the communities stage.
struct Partition {
    assignment: CommunityAssignment,
    names: Vec<String>,
    scores: CoordinationScores<f64>,
}

impl Partition {
    fn load(cfg: &PipelineConfig) -> Result<Self> {
        let dir = stage_dir(cfg, Stage::Communities);
        let text = read(&dir.join("membership.csv"))?;
        let mut pairs = Vec::new();
        for rec in csv::Reader::from_reader(text.as_bytes()).records() {
            let rec = rec.context("reading membership.csv")?;
            let label: usize = rec[1].parse().context("membership label")?;
            pairs.push((rec[0].to_string(), label));
        }
        let assignment = CommunityAssignment::from_groups(pairs);
        let named = label_assignment(&assignment, &cfg.community_names()?)?;
        let scores = CoordinationScores::from_csv(&read(&dir.join("coordination_scores.csv"))?)?;
        Ok(Partition {
            names: named.names().to_vec(),
            assignment,
            scores,
        })
    }

    /// Communities large enough to analyse, as `(name, members)`.
    fn analysed(&self, min_size: usize) -> Vec<(String, Vec<&str>)> {
        (0..self.assignment.num_communities())
            .filter(|&c| self.assignment.size(c) >= min_size)
            .map(|c| (self.names[c].clone(), self.assignment.members(c)))
            .collect()
    }
}

fn load_model(cfg: &PipelineConfig, dir: &Path) -> Result<PropagandaModel<f64>> {
    if let Some(path) = cfg.paths.model.as_deref().filter(|p| p.exists()) {
        return PropagandaModel::load(path, vec![]).with_context(|| format!("loading model {}", path.display()));
    }
    let Some(training) = cfg.paths.training.as_deref() else {
        match cfg.paths.model.as_deref() {
            Some(p) => bail!(
                "model {} does not exist and no training corpus is configured",
                p.display()
            ),
            None => bail!("no model and no training corpus configured (paths.model / paths.training)"),
        }
    };
    let items = load_training_corpus(training)?;
    let lexicons = cfg
        .paths
        .lexicons
        .iter()
        .map(|p| load_lexicon(p))
        .collect::<coordprop::Result<Vec<_>>>()?;
    let mut trainer = TrainerConfig {
        lexicons,
        seed: cfg.propaganda.seed,
        ..Default::default()
    };
    trainer.options.lambda = cfg.propaganda.lambda;
    trainer.options.max_iter = cfg.propaganda.max_iter;
    let model = PropagandaModel::train(&items, &trainer)?;
    model.save(&dir.join("model.json"))?;
    Ok(model)
}

/// Articles linked from a user's own tweets, deduplicated.
fn shared_articles<'a>(corpus: &'a Corpus, user: &str) -> BTreeSet<&'a str> {
    corpus
        .tweets_by(user)
        .flat_map(|t| corpus.articles_of(t))
        .map(String::as_str)
        .collect()
}

fn propaganda(cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    let model = load_model(cfg, dir)?;
    let partition = Partition::load(cfg)?;
    let corpus = corpus(cfg)?;
    let mut items: Vec<TextItem> = Vec::new();
    let mut linked: BTreeSet<&str> = BTreeSet::new();
    for user in partition.assignment.users() {
        items.extend(chunk_tweets(&corpus, user, cfg.propaganda.chunk_tokens)?);
        linked.extend(shared_articles(&corpus, user));
    }
    items.extend(
        article_items(&corpus)
            .into_iter()
            .filter(|a| linked.contains(a.item_id.as_str())),
    );
    let scores = model.score_items(&items);
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["item_id", "kind", "owner", "score"])?;
    for (item, s) in items.iter().zip(&scores) {
        let kind = match item.kind {
            TextKind::Article => "article",
            TextKind::TweetChunk => "tweet_chunk",
        };
        out.write_record([item.item_id.as_str(), kind, item.owner.as_str(), &s.score.to_string()])?;
    }
    write(&dir.join("item_scores.csv"), out.into_inner()?)
}

/// Scored items from the propaganda stage, grouped for the measures.
struct Scores {
    /// Chunk scores by owning user.
    chunks: BTreeMap<String, Vec<f64>>,
    /// Article scores by url.
    articles: BTreeMap<String, f64>,
}

impl Scores {
    fn load(cfg: &PipelineConfig) -> Result<Self> {
        let text = read(&stage_dir(cfg, Stage::Propaganda).join("item_scores.csv"))?;
        let mut chunks: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut articles = BTreeMap::new();
        for rec in csv::Reader::from_reader(text.as_bytes()).records() {
            let rec = rec.context("reading item_scores.csv")?;
            let score: f64 = rec[3].parse().context("item score")?;
            match &rec[1] {
                "tweet_chunk" => chunks.entry(rec[2].to_string()).or_default().push(score),
                "article" => {
                    articles.insert(rec[0].to_string(), score);
                }
                other => bail!("unknown item kind {other:?} in item_scores.csv"),
            }
        }
        Ok(Scores { chunks, articles })
    }

    fn per_user(&self, kind: ItemKind, corpus: &Corpus, users: &[&str]) -> BTreeMap<String, Vec<f64>> {
        match kind {
            ItemKind::Tweets => self.chunks.clone(),
            ItemKind::Articles => users
                .iter()
                .map(|u| {
                    let v: Vec<f64> = shared_articles(corpus, u)
                        .into_iter()
                        .filter_map(|url| self.articles.get(url).copied())
                        .collect();
                    (u.to_string(), v)
                })
                .filter(|(_, v)| !v.is_empty())
                .collect(),
        }
    }
}

fn measure_trends(
    cfg: &PipelineConfig,
    measure: &MeasureSpec,
    partition: &Partition,
    scores: &Scores,
    corpus: &Corpus,
) -> Result<Vec<TrendSeries<f64>>> {
    let users: Vec<&str> = partition.assignment.users().collect();
    let up = user_propaganda(&scores.per_user(measure.item_kind, corpus, &users), measure.psi);
    partition
        .analysed(cfg.communities.min_size)
        .iter()
        .map(|(name, members)| {
            Ok(trend_for(
                name,
                members,
                &up,
                &partition.scores,
                measure.phi,
                &cfg.measures.grid,
            )?)
        })
        .collect()
}

fn trend_csv(trends: &[TrendSeries<f64>]) -> String {
    let mut out = String::from(TREND_CSV_HEADER);
    for t in trends {
        t.write_csv_rows(&mut out);
    }
    out
}

fn scored_articles(corpus: &Corpus, scores: &Scores, users: &[&str]) -> Vec<ScoredArticle<f64>> {
    let mut sharers: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for u in users {
        for url in shared_articles(corpus, u) {
            sharers.entry(url).or_default().insert(u.to_string());
        }
    }
    sharers
        .into_iter()
        .filter_map(|(url, sharers)| {
            Some(ScoredArticle {
                url: url.to_string(),
                frame: corpus.article(url)?.frame.clone(),
                score: *scores.articles.get(url)?,
                sharers,
            })
        })
        .collect()
}

fn frames_of(articles: &[ScoredArticle<f64>]) -> BTreeSet<String> {
    articles.iter().filter_map(|a| a.frame.clone()).collect()
}

fn trends(cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    let partition = Partition::load(cfg)?;
    let scores = Scores::load(cfg)?;
    let corpus = corpus(cfg)?;
    let mut results = Vec::new();
    let mut notes = Vec::new();
    for measure in cfg.measures()? {
        let trends = measure_trends(cfg, &measure, &partition, &scores, &corpus)?;
        write(&dir.join(format!("trend_{}.csv", measure.id)), trend_csv(&trends))?;
        match informativeness(&measure.id, &trends) {
            Ok(r) => {
                notes.push(serde_json::json!({
                    "measure_id": measure.id,
                    "r_bar": r.r_bar,
                    "I": r.informativeness,
                    "pairs_used": r.pairs_used,
                    "excluded": r.excluded,
                }));
                results.push((measure, r));
            }
            Err(e) => notes.push(serde_json::json!({"measure_id": measure.id, "error": e.to_string()})),
        }
    }
    write(&dir.join("informativeness.csv"), informativeness_table(&results))?;
    write(&dir.join("informativeness_details.json"), json(&notes))?;

    let users: Vec<&str> = partition.assignment.users().collect();
    let articles = scored_articles(&corpus, &scores, &users);
    let mut out = String::from("community,frame,k,value,users,items\n");
    for frame in frames_of(&articles) {
        for (name, members) in partition.analysed(cfg.communities.min_size) {
            let t = frame_trend_for(
                &name,
                &members,
                &articles,
                &partition.scores,
                &frame,
                &cfg.measures.grid,
            )?;
            let mut rows = String::new();
            t.write_csv_rows(&mut rows);
            for line in rows.lines() {
                let (community, rest) = line.split_at(name.len());
                let _ = writeln!(out, "{community},{frame}{rest}");
            }
        }
    }
    write(&dir.join("frame_trends.csv"), out)
}

fn report(cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    let partition = Partition::load(cfg)?;
    let scores = Scores::load(cfg)?;
    let corpus = corpus(cfg)?;
    let grid = &cfg.measures.grid;
    let primary = cfg.primary_measure()?;
    let users: Vec<&str> = partition.assignment.users().collect();
    let up = user_propaganda(&scores.per_user(primary.item_kind, &corpus, &users), primary.psi);

    let automation: BTreeMap<String, f64> = corpus
        .signals()
        .iter()
        .map(|(u, s)| (u.clone(), s.automation_score))
        .collect();
    let suspended: BTreeMap<String, f64> = corpus
        .signals()
        .iter()
        .map(|(u, s)| (u.clone(), if s.suspended { 1.0 } else { 0.0 }))
        .collect();
    let series_for = |name: &str, members: &[&str]| -> Result<CommunitySeries<f64>> {
        Ok(CommunitySeries {
            community: name.to_string(),
            propaganda: trend_for(name, members, &up, &partition.scores, primary.phi, grid)?,
            automation: signal_trend_for(name, members, &automation, &partition.scores, grid).ok(),
            suspensions: signal_trend_for(name, members, &suspended, &partition.scores, grid).ok(),
        })
    };
    let mut series = Vec::new();
    for (name, members) in partition.analysed(cfg.communities.min_size) {
        series.push(series_for(&name, &members)?);
    }
    let overall = series_for("overall", &users)?;
    let report = correlation_report(&series, &overall);
    write(&dir.join("correlation.csv"), report.to_csv())?;
    write(&dir.join("correlation.txt"), report.to_text())?;
    let mut deltas = String::from("community,delta,delta_pct\n");
    for row in &report.rows {
        if let Some(d) = &row.delta {
            let pct = d.delta_pct.map(|p| p.to_string()).unwrap_or_default();
            let _ = writeln!(deltas, "{},{},{pct}", d.community, d.delta);
        }
    }
    write(&dir.join("delta.csv"), deltas)?;

    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;
    let propaganda: Vec<_> = series.iter().map(|s| s.propaganda.clone()).collect();
    let title = format!("Propaganda ({}) by coordination threshold", primary.id);
    write(
        &plots.join("trends.svg"),
        line_plot(&title, "coordination threshold k", "P_c", &propaganda),
    )?;
    let automation: Vec<_> = series.iter().filter_map(|s| s.automation.clone()).collect();
    write(
        &plots.join("automation.svg"),
        line_plot(
            "Automation by coordination threshold",
            "coordination threshold k",
            "mean automation score",
            &automation,
        ),
    )?;
    let suspensions: Vec<_> = series.iter().filter_map(|s| s.suspensions.clone()).collect();
    write(
        &plots.join("suspensions.svg"),
        line_plot(
            "Suspensions by coordination threshold",
            "coordination threshold k",
            "suspended fraction",
            &suspensions,
        ),
    )?;
    let articles = scored_articles(&corpus, &scores, &users);
    let mut frames = Vec::new();
    for frame in frames_of(&articles) {
        frames.push(frame_trend_for(
            &frame,
            &users,
            &articles,
            &partition.scores,
            &frame,
            grid,
        )?);
    }
    write(
        &plots.join("frames.svg"),
        line_plot(
            "Flagged articles per frame",
            "coordination threshold k",
            "propagandistic fraction",
            &frames,
        ),
    )
}
