use coordprop::simnet::{backbone, build_retweet_vectors, select_superspreaders, similarity_network, BackboneParams};
use coordprop::synth::{generate, CommunitySpec, ScenarioConfig};
use coordprop::SimilarityNetwork;

fn network(config: &ScenarioConfig) -> (SimilarityNetwork, coordprop::synth::Scenario) {
    let scenario = generate(config).unwrap();
    let ranked = select_superspreaders(&scenario.corpus, 1.0).unwrap();
    let users: Vec<&str> = ranked.iter().map(|r| r.user_id.as_str()).collect();
    let net = similarity_network(&build_retweet_vectors(&scenario.corpus, &users)).unwrap();
    (net, scenario)
}

#[test]
fn full_coordination_separates_within_from_cross_similarity() {
    let config = ScenarioConfig {
        communities: vec![
            CommunitySpec {
                size: 50,
                rho: 1.0,
                ..Default::default()
            },
            CommunitySpec {
                size: 50,
                rho: 1.0,
                ..Default::default()
            },
        ],
        brokers: false,
        seed: 11,
        ..Default::default()
    };
    let (net, scenario) = network(&config);
    let (mut within, mut cross) = (Vec::new(), Vec::new());
    for (a, b, w) in net.edge_list() {
        match (scenario.truth.community_of(a), scenario.truth.community_of(b)) {
            (Some(x), Some(y)) if x == y => within.push(w),
            (Some(_), Some(_)) => cross.push(w),
            _ => {}
        }
    }
    let min_within = within.iter().copied().fold(f64::INFINITY, f64::min);
    let max_cross = cross.iter().copied().fold(0.0, f64::max);
    assert!(!within.is_empty());
    assert!(min_within > max_cross, "within {min_within} vs cross {max_cross}");
}

#[test]
fn no_coordination_leaves_an_almost_empty_backbone() {
    for seed in 0..10 {
        let config = ScenarioConfig {
            communities: vec![
                CommunitySpec {
                    size: 80,
                    rho: 0.0,
                    ..Default::default()
                },
                CommunitySpec {
                    size: 60,
                    rho: 0.0,
                    ..Default::default()
                },
            ],
            brokers: false,
            seed,
            ..Default::default()
        };
        let (net, _) = network(&config);
        let kept = backbone(&net, BackboneParams::new(0.05).unwrap()).map_or(0, |b| b.num_nodes());
        assert!(
            (kept as f64) < 0.05 * net.num_nodes() as f64,
            "seed {seed}: {kept} of {} nodes kept",
            net.num_nodes()
        );
    }
}

#[test]
fn same_seed_writes_identical_files() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let config = ScenarioConfig {
        seed: 5,
        ..Default::default()
    };
    for d in &dirs {
        generate(&config).unwrap().write(d.path()).unwrap();
    }
    for file in ["tweets.jsonl", "articles.jsonl", "signals.csv", "ground_truth.json"] {
        let a = std::fs::read(dirs[0].path().join(file)).unwrap();
        let b = std::fs::read(dirs[1].path().join(file)).unwrap();
        assert!(!a.is_empty(), "{file} empty");
        assert_eq!(a, b, "{file} differs");
    }
    let other = tempfile::tempdir().unwrap();
    generate(&ScenarioConfig { seed: 6, ..config })
        .unwrap()
        .write(other.path())
        .unwrap();
    assert_ne!(
        std::fs::read(dirs[0].path().join("tweets.jsonl")).unwrap(),
        std::fs::read(other.path().join("tweets.jsonl")).unwrap()
    );
}
