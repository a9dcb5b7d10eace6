//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use coordprop::communities::{dismantle, louvain, LouvainParams};
use coordprop::corpus::{distinct_percentage, format_percentage};
use coordprop::measures::{delta_from, informativeness, trend_for, Phi};
use coordprop::propaganda::{LogisticRegression, Objective, PropagandaModel, SparseRow, TrainOptions, TrainerConfig};
use coordprop::simnet::{backbone, BackboneParams, SimilarityNetwork};
use coordprop::stats::pearson;
use coordprop::synth::{generate, training_corpus, CommunitySpec, PropagandaProfile, ScenarioConfig};
use coordprop::{CoordinationScores, TrendSeries, UserPropaganda};
use coordprop_cli::{run_pipeline, PipelineConfig, Stage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

type Edges = Vec<(String, String, f64)>;

fn network(edges: &Edges) -> SimilarityNetwork<f64> {
    SimilarityNetwork::from_edges(
        edges.iter().map(|(a, b, w)| (a.as_str(), b.as_str(), *w)),
        Vec::<&str>::new(),
    )
    .expect("valid edges")
}

fn name(i: usize) -> String {
    format!("n{i:02}")
}

/// `m` distinct random pairs over `n` nodes with weights in `[lo, 1)`.
fn random_edges(rng: &mut ChaCha8Rng, n: usize, m: usize, lo: f64) -> Edges {
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    pairs.shuffle(rng);
    pairs
        .into_iter()
        .take(m)
        .map(|(a, b)| (name(a), name(b), rng.gen_range(lo..1.0)))
        .collect()
}

fn edge_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

// ---------------------------------------------------------------------------
// 1. Backbone
// ---------------------------------------------------------------------------

/// Probability under the null model that an edge fraction is at least `p` at a
/// node of degree `k`, by composite Simpson integration of `(k-1)(1-x)^(k-2)`
/// over `[p, 1]`.
fn null_tail(p: f64, k: usize) -> f64 {
    let density = |x: f64| (k as f64 - 1.0) * (1.0 - x).powi(k as i32 - 2);
    let n = 4000;
    let h = (1.0 - p) / n as f64;
    let mut sum = density(p) + density(1.0);
    for i in 1..n {
        let x = p + i as f64 * h;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * density(x);
    }
    sum * h / 3.0
}

fn brute_force_backbone(edges: &Edges, alpha: f64) -> BTreeSet<(String, String)> {
    let mut degree: BTreeMap<&str, usize> = BTreeMap::new();
    let mut strength: BTreeMap<&str, f64> = BTreeMap::new();
    for (a, b, w) in edges {
        for v in [a.as_str(), b.as_str()] {
            *degree.entry(v).or_default() += 1;
            *strength.entry(v).or_default() += w;
        }
    }
    edges
        .iter()
        .filter(|(a, b, w)| {
            [a.as_str(), b.as_str()].iter().any(|v| {
                let k = degree[v];
                // the null model needs two edges; degree-1 endpoints keep their edge
                k == 1 || null_tail(w / strength[v], k) < alpha
            })
        })
        .map(|(a, b, _)| edge_key(a, b))
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    let mut kept = 0;
    for g in 0..100 {
        let n = rng.gen_range(2..=20);
        let max_m = (n * (n - 1) / 2).min(60);
        let m = rng.gen_range(1..=max_m);
        let edges = random_edges(&mut rng, n, m, 0.001);
        let net = network(&edges);
        for alpha in [0.01, 0.05, 0.2] {
            let expected = brute_force_backbone(&edges, alpha);
            let got: BTreeSet<_> = backbone(&net, BackboneParams::new(alpha).unwrap())
                .map_err(|e| format!("graph {g}: {e}"))?
                .edge_list()
                .into_iter()
                .map(|(a, b, _)| edge_key(a, b))
                .collect();
            ensure(got == expected, || {
                format!(
                    "graph {g} alpha {alpha}: {} extra, {} missing",
                    got.difference(&expected).count(),
                    expected.difference(&got).count()
                )
            })?;
            checked += 1;
            kept += got.len();
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "{checked} graph/alpha cases match ({kept} kept edges) in {:.2?}",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------------------
// 2. Louvain
// ---------------------------------------------------------------------------

fn oracle_modularity(n: usize, edges: &[(usize, usize, f64)], labels: &[usize]) -> f64 {
    let m: f64 = edges.iter().map(|e| e.2).sum();
    let mut strength = vec![0.0; n];
    for &(a, b, w) in edges {
        strength[a] += w;
        strength[b] += w;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] != labels[j] {
                continue;
            }
            let a_ij: f64 = edges
                .iter()
                .filter(|&&(a, b, _)| (a == i && b == j) || (a == j && b == i))
                .map(|e| e.2)
                .sum();
            q += a_ij - strength[i] * strength[j] / (2.0 * m);
        }
    }
    q / (2.0 * m)
}

/// Every set partition of `0..n` as restricted growth strings.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for l in 0..=next {
            prefix.push(l);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

fn random_connected(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize, f64)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = BTreeMap::new();
    for i in 1..n {
        let parent = order[rng.gen_range(0..i)];
        edges.insert(edge_key(&name(order[i]), &name(parent)), rng.gen_range(0.1..1.0));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(0.3) {
                edges
                    .entry(edge_key(&name(a), &name(b)))
                    .or_insert(rng.gen_range(0.1..1.0));
            }
        }
    }
    let index = |s: &str| s[1..].parse::<usize>().unwrap();
    edges.into_iter().map(|((a, b), w)| (index(&a), index(&b), w)).collect()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_gap: f64 = 0.0;
    let mut optimal = 0;
    for g in 0..50 {
        let n = rng.gen_range(3..=8);
        let edges = random_connected(&mut rng, n);
        let named: Edges = edges.iter().map(|&(a, b, w)| (name(a), name(b), w)).collect();
        let net = network(&named);
        let assignment = louvain(
            &net,
            LouvainParams {
                resolution: 1.0,
                seed: g,
            },
        )
        .map_err(|e| e.to_string())?;
        let labels: Vec<usize> = (0..n).map(|i| assignment.label(&name(i)).unwrap()).collect();
        let q = oracle_modularity(n, &edges, &labels);
        let best = partitions(n)
            .iter()
            .map(|p| oracle_modularity(n, &edges, p))
            .fold(f64::NEG_INFINITY, f64::max);
        let gap = best - q;
        worst_gap = worst_gap.max(gap);
        if gap < 1e-12 {
            optimal += 1;
        }
        ensure(gap <= 0.05, || {
            format!("graph {g}: modularity {q:.4} vs optimum {best:.4}")
        })?;
        // moving any single node to another community, or to a new one, must not help
        let fresh = labels.iter().max().unwrap() + 1;
        for i in 0..n {
            for target in 0..=fresh {
                if target == labels[i] {
                    continue;
                }
                let mut moved = labels.clone();
                moved[i] = target;
                let q2 = oracle_modularity(n, &edges, &moved);
                ensure(q2 <= q + 1e-12, || {
                    format!("graph {g}: moving node {i} to {target} raises modularity {q:.6} -> {q2:.6}")
                })?;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "50 graphs: worst gap to optimum {worst_gap:.4}, {optimal} exactly optimal, all locally optimal, {:.2?}",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------------------
// 3. Dismantling
// ---------------------------------------------------------------------------

/// Straight re-simulation: at each distinct weight, keep the edges at least that
/// heavy among surviving nodes and remove everyone outside the largest component.
fn resimulate(edges: &Edges) -> BTreeMap<String, f64> {
    let nodes: BTreeSet<&str> = edges.iter().flat_map(|(a, b, _)| [a.as_str(), b.as_str()]).collect();
    let mut thresholds: Vec<f64> = edges.iter().map(|e| e.2).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut alive: BTreeSet<&str> = nodes.clone();
    let mut raw = BTreeMap::new();
    for &t in &thresholds {
        let mut components: Vec<BTreeSet<&str>> = Vec::new();
        let mut seen = BTreeSet::new();
        for &start in &alive {
            if !seen.insert(start) {
                continue;
            }
            let mut comp = BTreeSet::from([start]);
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for (a, b, w) in edges {
                    if *w < t {
                        continue;
                    }
                    let other = if a == u {
                        b.as_str()
                    } else if b == u {
                        a.as_str()
                    } else {
                        continue;
                    };
                    if alive.contains(other) && seen.insert(other) {
                        comp.insert(other);
                        queue.push_back(other);
                    }
                }
            }
            components.push(comp);
        }
        // components come out in order of their smallest member, so the first
        // of maximal size wins ties
        let largest = components.iter().map(BTreeSet::len).max().unwrap();
        let keep = components.into_iter().find(|c| c.len() == largest).unwrap();
        for u in alive.iter().filter(|u| !keep.contains(*u)) {
            raw.insert(u.to_string(), t);
        }
        alive = keep;
    }
    let last = *thresholds.last().unwrap();
    for u in alive {
        raw.insert(u.to_string(), last);
    }
    raw
}

fn dismantling_suite() -> Vec<Edges> {
    let e = |list: &[(&str, &str, f64)]| -> Edges {
        list.iter()
            .map(|&(a, b, w)| (a.to_string(), b.to_string(), w))
            .collect()
    };
    let mut graphs = vec![
        e(&[("a", "b", 0.2), ("b", "c", 0.9), ("c", "d", 0.5)]),
        e(&[("a", "b", 0.5), ("b", "c", 0.5), ("a", "c", 0.5)]),
        e(&[("h", "a", 0.1), ("h", "b", 0.3), ("h", "c", 0.5), ("h", "d", 0.7)]),
        e(&[
            ("a", "b", 0.8),
            ("b", "c", 0.8),
            ("a", "c", 0.8),
            ("c", "d", 0.1),
            ("d", "e", 0.6),
            ("e", "f", 0.6),
            ("d", "f", 0.6),
        ]),
        e(&[("a", "b", 0.4), ("c", "d", 0.4), ("e", "f", 0.9)]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    while graphs.len() < 20 {
        let n = rng.gen_range(2..=10);
        let m = rng.gen_range(1..=n * (n - 1) / 2);
        let mut edges = random_edges(&mut rng, n, m, 0.0);
        // a coarse weight scale gives ties and shared thresholds
        for edge in &mut edges {
            edge.2 = f64::from(rng.gen_range(1..=9u8)) / 10.0;
        }
        graphs.push(edges);
    }
    graphs
}

fn criterion_3() -> Outcome {
    let mut spans = 0;
    for (g, edges) in dismantling_suite().iter().enumerate() {
        let scores = dismantle(&network(edges)).map_err(|e| e.to_string())?;
        let expected = resimulate(edges);
        ensure(scores.raw_scores() == &expected, || {
            format!("graph {g}: raw {:?} vs re-simulated {expected:?}", scores.raw_scores())
        })?;
        let lo = expected.values().copied().fold(f64::INFINITY, f64::min);
        let hi = expected.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let normalized: Vec<f64> = scores.scores().values().copied().collect();
        let max = normalized.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = normalized.iter().copied().fold(f64::INFINITY, f64::min);
        ensure(max == 1.0, || format!("graph {g}: max normalized score {max}"))?;
        if hi > lo {
            spans += 1;
            ensure(min == 0.0, || format!("graph {g}: min normalized score {min}"))?;
            for (u, &r) in &expected {
                let s = scores.score(u).unwrap();
                ensure(s == (r - lo) / (hi - lo), || format!("graph {g}: {u} normalized {s}"))?;
            }
        }
        if g == 0 {
            let want = [("a", 0.0), ("b", 1.0), ("c", 1.0), ("d", 1.0)];
            for (u, s) in want {
                ensure(scores.score(u) == Some(s), || {
                    format!("path example: {u} scored {:?}", scores.score(u))
                })?;
            }
        }
    }
    Ok(format!(
        "20 graphs match the re-simulation; {spans} span [0,1], all have max 1.0"
    ))
}

// ---------------------------------------------------------------------------
// 4. Classifier
// ---------------------------------------------------------------------------

fn small_problem(seed: u64) -> (Vec<SparseRow<f64>>, Vec<bool>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.gen_range(2..8);
    let n = rng.gen_range(10..40);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let mut row = Vec::new();
        for j in 0..dim {
            if rng.gen_bool(0.7) {
                row.push((j, rng.gen_range(-2.0..2.0)));
            }
        }
        labels.push(if i < 2 { i == 0 } else { rng.gen_bool(0.5) });
        rows.push(row);
    }
    (rows, labels, dim)
}

fn criterion_4() -> Outcome {
    let corpus = training_corpus(1000, 4);
    let (train, test) = corpus.split_at(800);
    let model: PropagandaModel<f64> =
        PropagandaModel::train(train, &TrainerConfig::default()).map_err(|e| e.to_string())?;
    let correct = test
        .iter()
        .filter(|t| (model.score_text(&t.text) > 0.5) == t.label)
        .count();
    let accuracy = correct as f64 / test.len() as f64;
    ensure(accuracy >= 0.95, || format!("held-out accuracy {accuracy:.3}"))?;

    let mut worst_rel: f64 = 0.0;
    for seed in 0..10 {
        let (rows, labels, dim) = small_problem(40 + seed);
        let obj = Objective::new(&rows, &labels, dim, 0.1).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let params: Vec<f64> = (0..obj.num_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = obj.value_and_gradient(&params);
        for i in 0..params.len() {
            let h = 1e-5;
            let mut up = params.clone();
            up[i] += h;
            let mut down = params.clone();
            down[i] -= h;
            let fd = (obj.value_and_gradient(&up).0 - obj.value_and_gradient(&down).0) / (2.0 * h);
            let scale = fd.abs().max(grad[i].abs());
            let rel = if scale == 0.0 {
                0.0
            } else {
                (fd - grad[i]).abs() / scale
            };
            worst_rel = worst_rel.max(rel);
            ensure(rel <= 1e-5, || {
                format!("problem {seed} param {i}: analytic {} vs numeric {fd}", grad[i])
            })?;
        }
    }

    let rows: Vec<SparseRow<f64>> = train.iter().map(|t| model.extractor().input(&t.text)).collect();
    let labels: Vec<bool> = train.iter().map(|t| t.label).collect();
    let dim = model.extractor().dim();
    let mut norms = Vec::new();
    for lambda in [0.01, 0.1, 1.0, 10.0, 100.0] {
        let options = TrainOptions {
            lambda,
            ..Default::default()
        };
        let (fit, _) = LogisticRegression::fit(&rows, &labels, dim, &options).map_err(|e| e.to_string())?;
        norms.push(fit.weight_norm());
    }
    ensure(norms.windows(2).all(|w| w[1] <= w[0]), || {
        format!("weight norms {norms:?}")
    })?;
    Ok(format!(
        "held-out accuracy {accuracy:.3}; worst gradient relative error {worst_rel:.1e}; norms {}",
        norms.iter().map(|n| format!("{n:.3}")).collect::<Vec<_>>().join(" >= ")
    ))
}

// ---------------------------------------------------------------------------
// 5 and 6. Planted scenarios through the pipeline
// ---------------------------------------------------------------------------

fn adjusted_rand(a: &[usize], b: &[usize]) -> f64 {
    let pairs = |n: f64| n * (n - 1.0) / 2.0;
    let mut table: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&v| pairs(v)).sum();
    let sa: f64 = rows.values().map(|&v| pairs(v)).sum();
    let sb: f64 = cols.values().map(|&v| pairs(v)).sum();
    let expected = sa * sb / pairs(a.len() as f64);
    (index - expected) / ((sa + sb) / 2.0 - expected)
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let headers = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            headers
                .iter()
                .map(String::from)
                .zip(r.iter().map(String::from))
                .collect()
        })
        .collect()
}

struct PlantedRun {
    truth: Vec<Vec<String>>,
    /// Detected label per user, from membership.csv.
    detected: BTreeMap<String, usize>,
    out: PathBuf,
}

impl PlantedRun {
    fn run(config: &ScenarioConfig, model: &Path, root: &Path, until: Stage) -> Result<Self, String> {
        let dir = root.join(format!("seed{}", config.seed));
        let scenario = generate(config).map_err(|e| e.to_string())?;
        scenario.write(&dir).map_err(|e| e.to_string())?;
        let mut cfg = PipelineConfig::default();
        cfg.paths.tweets = Some(dir.join("tweets.jsonl"));
        cfg.paths.articles = Some(dir.join("articles.jsonl"));
        cfg.paths.signals = Some(dir.join("signals.csv"));
        cfg.paths.model = Some(model.to_path_buf());
        cfg.paths.output = dir.join("out");
        cfg.simnet.superspreader_fraction = 1.0;
        run_pipeline(&cfg, until).map_err(|e| e.to_string())?;
        let detected = read_csv(&cfg.paths.output.join("communities/membership.csv"))
            .into_iter()
            .map(|r| (r["user_id"].clone(), r["label"].parse().unwrap()))
            .collect();
        Ok(PlantedRun {
            truth: scenario.truth.communities.clone(),
            detected,
            out: cfg.paths.output,
        })
    }

    fn ari(&self) -> f64 {
        let (mut planted, mut found) = (Vec::new(), Vec::new());
        for (c, members) in self.truth.iter().enumerate() {
            for u in members {
                if let Some(&l) = self.detected.get(u) {
                    planted.push(c);
                    found.push(l);
                }
            }
        }
        adjusted_rand(&planted, &found)
    }

    /// Detected label holding most of planted community `c`.
    fn label_of(&self, c: usize) -> Option<usize> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for u in &self.truth[c] {
            if let Some(&l) = self.detected.get(u) {
                *counts.entry(l).or_default() += 1;
            }
        }
        counts
            .into_iter()
            .max_by_key(|&(l, n)| (n, std::cmp::Reverse(l)))
            .map(|(l, _)| l)
    }
}

fn shared_model(dir: &Path) -> Result<PathBuf, String> {
    let path = dir.join("model.json");
    if !path.exists() {
        let model: PropagandaModel<f64> =
            PropagandaModel::train(&training_corpus(1000, 1), &TrainerConfig::default()).map_err(|e| e.to_string())?;
        model.save(&path).map_err(|e| e.to_string())?;
    }
    Ok(path)
}

fn criterion_5(root: &Path) -> Outcome {
    let start = Instant::now();
    let model = shared_model(root)?;
    let rates = [0.9, 0.5, 0.1];
    let mut aris = Vec::new();
    let mut baselines = Vec::new();
    for seed in 0..10 {
        let config = ScenarioConfig {
            communities: [(80, 0.9), (60, 0.5), (50, 0.1)]
                .iter()
                .map(|&(size, rate)| CommunitySpec {
                    size,
                    rho: 0.9,
                    propaganda_rate: rate,
                    ..Default::default()
                })
                .collect(),
            total_users: 500,
            seed,
            ..Default::default()
        };
        let run = PlantedRun::run(&config, &model, &root.join("c5"), Stage::Trends)?;
        aris.push(run.ari());
        let trend = read_csv(&run.out.join("trends/trend_tw-median-mean.csv"));
        let mut p0 = Vec::new();
        for c in 0..rates.len() {
            let label = run
                .label_of(c)
                .ok_or_else(|| format!("seed {seed}: community {c} not detected"))?;
            let value = trend
                .iter()
                .find(|r| r["community"] == label.to_string() && r["k"].parse::<f64>().unwrap() == 0.0)
                .and_then(|r| r["value"].parse::<f64>().ok())
                .ok_or_else(|| format!("seed {seed}: no P_c(.,0) for community {c}"))?;
            p0.push(value);
        }
        ensure(p0.windows(2).all(|w| w[0] > w[1]), || {
            format!("seed {seed}: P_c(.,0) {p0:?} not ordered by planted rate")
        })?;
        baselines.push(p0);
    }
    let mut sorted = aris.clone();
    sorted.sort_by(f64::total_cmp);
    let median = (sorted[4] + sorted[5]) / 2.0;
    ensure(median >= 0.9, || format!("median ARI {median:.3} ({aris:?})"))?;
    within(start.elapsed(), Duration::from_secs(300))?;
    let lows = baselines.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min);
    let highs = baselines.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(format!(
        "median ARI {median:.3} (min {:.3}); P_c(.,0) ordered on 10/10 seeds, range {lows:.2}..{highs:.2}; {:.1?}",
        sorted[0],
        start.elapsed()
    ))
}

fn criterion_6(root: &Path) -> Outcome {
    let model = shared_model(root)?;
    let mut hits = 0;
    let mut details = Vec::new();
    for seed in 0..10 {
        let planted = |profile| CommunitySpec {
            size: 60,
            rho: 0.9,
            coordination_spread: 0.6,
            propaganda_rate: 0.5,
            profile,
            ..Default::default()
        };
        let config = ScenarioConfig {
            communities: vec![
                planted(PropagandaProfile::Increasing),
                planted(PropagandaProfile::Decreasing),
            ],
            seed,
            ..Default::default()
        };
        let run = PlantedRun::run(&config, &model, &root.join("c6"), Stage::Report)?;
        let report = read_csv(&run.out.join("report/correlation.csv"));
        let cell = |c: usize| -> Option<(f64, f64)> {
            let label = run.label_of(c)?.to_string();
            let row = report.iter().find(|r| r["community"] == label)?;
            Some((row["coordination_r"].parse().ok()?, row["coordination_p"].parse().ok()?))
        };
        let (up, down) = (cell(0), cell(1));
        let ok =
            matches!(up, Some((r, p)) if r > 0.5 && p < 0.05) && matches!(down, Some((r, p)) if r < -0.5 && p < 0.05);
        hits += usize::from(ok);
        let show = |c: Option<(f64, f64)>| c.map_or("--".to_string(), |(r, p)| format!("{r:+.2}/{p:.0e}"));
        details.push(format!("{}|{}", show(up), show(down)));
    }
    ensure(hits >= 8, || {
        format!("{hits}/10 seeds recover both signs: {}", details.join(" "))
    })?;
    Ok(format!(
        "{hits}/10 seeds recover both signs (r/p): {}",
        details.join(" ")
    ))
}

// ---------------------------------------------------------------------------
// 7. Measures arithmetic
// ---------------------------------------------------------------------------

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid: Vec<f64> = coordprop::measures::default_grid();
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let n = rng.gen_range(1..200);
        let users: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let up = UserPropaganda {
            scores: users.iter().cloned().zip(p.iter().copied()).collect(),
            items: users.iter().map(|u| (u.clone(), 1)).collect(),
        };
        let coord = CoordinationScores::from_raw(users.iter().map(|u| (u.clone(), rng.gen_range(0.0..1.0))).collect());
        let members: Vec<&str> = users.iter().map(String::as_str).collect();
        let trend = trend_for("c", &members, &up, &coord, Phi::Mean, &grid).map_err(|e| e.to_string())?;
        let exact = p.iter().sum::<f64>() / n as f64;
        let got = trend.values[0].ok_or("undefined value at k=0")?;
        worst = worst.max((got - exact).abs());
        ensure((got - exact).abs() <= 1e-12, || {
            format!("trial {trial}: {got} vs exact mean {exact}")
        })?;
    }

    let two = UserPropaganda {
        scores: BTreeMap::from([("a".to_string(), 0.8), ("b".to_string(), 0.2)]),
        items: BTreeMap::new(),
    };
    let coord = CoordinationScores::from_raw(BTreeMap::from([("a".to_string(), 0.9), ("b".to_string(), 0.1)]));
    let t = trend_for("c", &["a", "b"], &two, &coord, Phi::Mean, &[0.0, 0.5]).map_err(|e| e.to_string())?;
    ensure(
        t.values.len() == 2 && (t.values[0].unwrap() - 0.5).abs() < 1e-12 && (t.values[1].unwrap() - 0.8).abs() < 1e-12,
        || format!("hand example gave {:?}", t.values),
    )?;

    let series = |name: &str, values: Vec<f64>| TrendSeries {
        community: name.to_string(),
        grid: grid.clone(),
        users: vec![1; grid.len()],
        items: vec![1; grid.len()],
        values: values.into_iter().map(Some).collect(),
    };
    let rising: Vec<f64> = grid.iter().map(|k| 0.2 + 0.5 * k).collect();
    let falling: Vec<f64> = grid.iter().map(|k| 0.9 - 0.3 * k).collect();
    let same =
        informativeness("m", &[series("a", rising.clone()), series("b", rising.clone())]).map_err(|e| e.to_string())?;
    let opposite = informativeness("m", &[series("a", rising), series("b", falling)]).map_err(|e| e.to_string())?;
    ensure(same.informativeness.abs() <= 1e-9, || {
        format!("identical pair I = {}", same.informativeness)
    })?;
    ensure((opposite.informativeness - 1.0).abs() <= 1e-9, || {
        format!("anticorrelated pair I = {}", opposite.informativeness)
    })?;
    Ok(format!(
        "k=0 mean exact within {worst:.1e} on 20 communities; I(identical) = {:.1e}, I(anticorrelated) = {:.12}",
        same.informativeness, opposite.informativeness
    ))
}

// ---------------------------------------------------------------------------
// 8. Consistency with the published tables
// ---------------------------------------------------------------------------

fn criterion_8() -> Outcome {
    // (community, printed delta, printed delta percentage)
    let printed = [
        ("LAB", -0.016, -6.5),
        ("CON", -0.008, -3.0),
        ("TVT", 0.074, 26.0),
        ("SNP", -0.031, -13.5),
        ("B60", -0.070, -36.7),
        ("ASE", 0.026, 9.7),
        ("LCH", 0.014, 20.7),
    ];
    let mut tvt_range = (0.0, 0.0);
    for (c, d, pct) in printed {
        // baselines compatible with both printed values after rounding
        let candidates = [d - 0.0005, d + 0.0005]
            .iter()
            .flat_map(|dd| [pct - 0.05, pct + 0.05].map(|pp| 100.0 * dd / pp))
            .collect::<Vec<f64>>();
        let lo = candidates.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ensure(lo > 0.0 && hi <= 1.0, || {
            format!("{c}: implied baseline range {lo:.4}..{hi:.4}")
        })?;
        let base = 100.0 * d / pct;
        let stat = delta_from(c, base, base + d);
        let shown = format!("{:+.3} ({:+.1}%)", stat.delta, stat.delta_pct.unwrap());
        let want = format!("{d:+.3} ({pct:+.1}%)");
        ensure(shown == want, || format!("{c}: {shown} vs printed {want}"))?;
        if c == "TVT" {
            tvt_range = (lo, hi);
        }
    }
    ensure(tvt_range.0 <= 0.285 && 0.285 <= tvt_range.1, || {
        format!("TVT baseline range {tvt_range:?}")
    })?;
    let tvt = delta_from("TVT", 0.285, 0.285 + 0.074);
    ensure(format!("{:+.1}", tvt.delta_pct.unwrap()) == "+26.0", || {
        format!("TVT pct {:?}", tvt.delta_pct)
    })?;

    // (community, total, distinct, printed percentage) for articles and tweets
    let shares = [
        ("LAB articles", 79_157, 5_861, "7.4"),
        ("LAB tweets", 2_064_041, 179_601, "8.7"),
        ("CON articles", 13_277, 1_781, "13.4"),
        ("CON tweets", 777_537, 76_191, "9.8"),
        ("TVT articles", 16_675, 3_363, "20.2"),
        ("TVT tweets", 690_900, 62_058, "9.0"),
        ("SNP articles", 2_735, 772, "28.2"),
        ("SNP tweets", 140_338, 8_601, "6.1"),
        ("B60 articles", 3_231, 789, "24.4"),
        ("B60 tweets", 139_988, 9_663, "6.9"),
        ("ASE articles", 706, 396, "56.1"),
        ("ASE tweets", 32_887, 4_723, "14.4"),
        ("LCH articles", 150, 57, "38.0"),
        ("LCH tweets", 28_970, 2_230, "7.7"),
        ("overall articles", 116_205, 9_960, "8.6"),
        ("overall tweets", 3_886_382, 343_750, "8.9"),
    ];
    let mut mismatches = Vec::new();
    for (what, total, distinct, want) in shares {
        let got = format_percentage(distinct_percentage(distinct, total));
        if got != want {
            mismatches.push(format!("{what} {got} (printed {want})"));
        }
    }
    let lab = format_percentage(distinct_percentage(179_601, 2_064_041));
    ensure(lab == "8.7", || format!("LAB distinct tweets {lab}"))?;
    // 343,750 / 3,886,382 = 8.845%: the printed 8.9 only follows from rounding twice
    ensure(mismatches == ["overall tweets 8.8 (printed 8.9)"], || {
        format!("mismatches: {mismatches:?}")
    })?;
    Ok(format!(
        "7/7 delta pairs reproduce, TVT baseline {:.3}..{:.3} contains 0.285; 15/16 share percentages match, \
         overall tweets is 8.845% printed as 8.9",
        tvt_range.0, tvt_range.1
    ))
}

// ---------------------------------------------------------------------------
// 9. Determinism across thread counts
// ---------------------------------------------------------------------------

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

fn criterion_9(root: &Path) -> Outcome {
    let bin = env!("CARGO_BIN_EXE_coordprop");
    let dir = root.join("c9");
    let status = Command::new(bin)
        .args(["synth", "--seed", "9", "--training-size", "600", "-o"])
        .arg(&dir)
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("synth exited with {status}"))?;
    let mut bundles = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.join(format!("out-{threads}"));
        let status = Command::new(bin)
            .args(["run", "--threads", threads, "--config"])
            .arg(dir.join("coordprop.toml"))
            .arg("--output")
            .arg(&out)
            .env_remove("COORDPROP_CONFIG")
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || {
            format!("run with {threads} threads exited with {status}")
        })?;
        bundles.push(files_under(&out));
    }
    ensure(!bundles[0].is_empty(), || "empty output bundle".to_string())?;
    let names = |b: &BTreeMap<PathBuf, Vec<u8>>| b.keys().cloned().collect::<Vec<_>>();
    ensure(names(&bundles[0]) == names(&bundles[1]), || {
        "different file sets".to_string()
    })?;
    let differing: Vec<_> = bundles[0]
        .iter()
        .filter(|(p, bytes)| bundles[1][*p] != **bytes)
        .map(|(p, _)| p.display().to_string())
        .collect();
    ensure(differing.is_empty(), || format!("files differ: {differing:?}"))?;
    let bytes: usize = bundles[0].values().map(Vec::len).sum();
    Ok(format!(
        "{} files ({bytes} bytes) identical with 1 and 8 threads",
        bundles[0].len()
    ))
}

// ---------------------------------------------------------------------------
// 10. Pearson
// ---------------------------------------------------------------------------

/// `P(|T| <= t)` for integer degrees of freedom from the finite trigonometric
/// series of the Student t distribution.
fn t_central_probability(t: f64, df: u32) -> f64 {
    let theta = (t.abs() / f64::from(df).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let c2 = c * c;
    if df % 2 == 1 {
        let mut sum = 0.0;
        if df > 1 {
            let mut term = 1.0;
            sum = 1.0;
            let mut k = 2;
            while k + 1 < df {
                term *= f64::from(k) / f64::from(k + 1) * c2;
                sum += term;
                k += 2;
            }
        }
        2.0 / PI * (theta + s * c * sum)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1;
        while k + 1 < df {
            term *= f64::from(k) / f64::from(k + 1) * c2;
            sum += term;
            k += 2;
        }
        s * sum
    }
}

fn t_two_sided(t: f64, df: u32) -> f64 {
    1.0 - t_central_probability(t, df)
}

/// Checks the series against closed forms and printed critical values.
fn validate_t_series() -> Result<(), String> {
    for t in [0.1f64, 0.7, 1.5, 3.0, 12.0] {
        let cauchy = 1.0 - 2.0 / PI * t.atan();
        let df2 = 1.0 - t / (2.0 + t * t).sqrt();
        ensure((t_two_sided(t, 1) - cauchy).abs() < 1e-14, || format!("df 1 at {t}"))?;
        ensure((t_two_sided(t, 2) - df2).abs() < 1e-14, || format!("df 2 at {t}"))?;
    }
    // two-sided 5% and 1% critical values, printed to three decimals
    let table = [
        (1, 12.706, 0.05),
        (5, 2.571, 0.05),
        (10, 2.228, 0.05),
        (30, 2.042, 0.05),
        (3, 5.841, 0.01),
        (8, 3.355, 0.01),
    ];
    for (df, t, p) in table {
        let got = t_two_sided(t, df);
        ensure((got - p).abs() < 2e-4, || format!("critical value df {df}: p {got}"))?;
    }
    Ok(())
}

/// Exact r from integer sums; a single rounding at the end.
fn exact_r(x: &[i64], y: &[i64]) -> f64 {
    let n = x.len() as i128;
    let sx: i128 = x.iter().map(|&v| v as i128).sum();
    let sy: i128 = y.iter().map(|&v| v as i128).sum();
    let sxx: i128 = x.iter().map(|&v| (v as i128) * (v as i128)).sum();
    let syy: i128 = y.iter().map(|&v| (v as i128) * (v as i128)).sum();
    let sxy: i128 = x.iter().zip(y).map(|(&a, &b)| (a as i128) * (b as i128)).sum();
    let cov = n * sxy - sx * sy;
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    let sign = cov.signum() as f64;
    sign * ((cov * cov) as f64 / (vx as f64 * vy as f64)).sqrt()
}

fn criterion_10() -> Outcome {
    validate_t_series()?;
    let pairs: Vec<(Vec<i64>, Vec<i64>)> = vec![
        (vec![1, 2, 3, 4, 5], vec![2, 4, 5, 4, 5]),
        (vec![1, 2, 3, 4, 5, 6], vec![6, 5, 4, 3, 2, 1]),
        (vec![3, 1, 4, 1, 5, 9, 2, 6], vec![2, 7, 1, 8, 2, 8, 1, 8]),
        (vec![10, 20, 30, 40], vec![12, 18, 33, 41]),
        (vec![0, 1, 0, 1, 0, 1, 0], vec![5, 6, 5, 7, 4, 6, 5]),
        (
            vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
            vec![1, 4, 9, 16, 25, 36, 49, 64, 81, 100],
        ),
        (vec![5, 3, 8, 1, 9, 2], vec![-4, 7, -1, 3, 0, 6]),
        (
            vec![100, 200, 150, 300, 250, 400, 350, 500, 450, 600, 550],
            vec![3, 5, 4, 8, 6, 9, 8, 12, 10, 13, 12],
        ),
        (
            vec![2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30],
            vec![9, 1, 7, 3, 8, 2, 6, 4, 9, 1, 5, 5, 2, 8, 3],
        ),
        (vec![-3, -2, -1, 0, 1, 2, 3], vec![9, 4, 1, 0, 1, 4, 10]),
    ];
    let mut worst_r: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    for (i, (x, y)) in pairs.iter().enumerate() {
        let r = exact_r(x, y);
        let df = x.len() as u32 - 2;
        let t = r * (f64::from(df) / (1.0 - r * r)).sqrt();
        let p = t_two_sided(t, df);
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let got = pearson(&xf, &yf).map_err(|e| format!("pair {i}: {e}"))?;
        worst_r = worst_r.max((got.r - r).abs());
        worst_p = worst_p.max((got.p - p).abs());
        ensure((got.r - r).abs() <= 1e-10, || format!("pair {i}: r {} vs {r}", got.r))?;
        ensure((got.p - p).abs() <= 1e-10, || format!("pair {i}: p {} vs {p}", got.p))?;
    }
    Ok(format!("10 pairs: max |dr| {worst_r:.1e}, max |dp| {worst_p:.1e}"))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let root = scratch.path();
    let criteria: Vec<Criterion> = vec![
        ("backbone oracle", Box::new(criterion_1)),
        ("louvain quality", Box::new(criterion_2)),
        ("dismantling oracle", Box::new(criterion_3)),
        ("classifier", Box::new(criterion_4)),
        ("planted recovery", Box::new(|| criterion_5(root))),
        ("correlation signs", Box::new(|| criterion_6(root))),
        ("measures arithmetic", Box::new(criterion_7)),
        ("published tables", Box::new(criterion_8)),
        ("determinism", Box::new(|| criterion_9(root))),
        ("pearson oracle", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} {title}: PASS - {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {title}: FAIL - {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
