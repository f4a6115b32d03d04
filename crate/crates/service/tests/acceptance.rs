//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::Instant;

use oak_core::classify::{classify_image, weighted_f1, ConfusionMatrix, HistogramCentroidClassifier};
use oak_core::decision::{
    Action, CompareOp, ConformityRule, Decision, RuleBook, SessionBook, SessionState, Threshold, WorkflowContext,
};
use oak_core::embed::{cosine_similarity, embed_text, EmbeddingVector, HashedBagOfWords, VectorIndex};
use oak_core::eval::{
    generate_animal_benchmark, generate_defect_benchmark, generate_movie_benchmark, run_named_benchmark,
    top_n_accuracy, Rank, ANIMAL_COUNT, MOVIE_COUNT, PERSON_COUNT,
};
use oak_core::extract::Catalog;
use oak_core::graph::{Graph, NodeKind, Props};
use oak_core::media::MediaStore;
use oak_service::search::{IMAGE_CHANNEL, TEXT_CHANNEL};
use oak_service::{OakService, SearchRequest};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const WORDS: &[&str] = &[
    "dark", "round", "stain", "scratch", "dent", "long", "straight", "edge", "corner", "surface", "rough", "smooth",
    "shiny", "dull", "crack", "pit", "deep", "shallow", "mark", "spot", "line", "plate", "sheet", "metal", "rust",
    "oil", "white", "black", "grey", "blue", "wavy", "flat", "raised", "hole", "burr", "chip", "near", "center",
    "wide", "narrow", "small", "large", "burn", "heat", "tool", "roll", "press", "saw", "blade", "coating",
];

fn random_text(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let n = rng.gen_range(min..=max);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Independent cosine: plain dot product over the product of norms.
fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn retrieval_oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a11);
    let provider = HashedBagOfWords::default();
    let mut graph = Graph::new();
    let mut index = VectorIndex::for_provider(&provider);
    for i in 0..1000 {
        let node = format!("n{:03}", i % 250);
        graph.upsert_node(&node, NodeKind::Generic, Props::new()).unwrap();
        index.index_context(&graph, &node, &random_text(&mut rng, 3, 12), &provider).unwrap();
    }
    ensure(index.dim() == 256 && index.len() == 1000, || "index shape".into())?;

    let mut timed = started.elapsed();
    let mut max_delta: f64 = 0.0;
    for q in 0..100 {
        let text = random_text(&mut rng, 1, 6);
        let timer = Instant::now();
        let top = index.query_top_k(&text, 10, &provider, 0.0, &graph).map_err(|e| e.to_string())?;
        timed += timer.elapsed();
        let query = embed_text(&provider, &text).unwrap();
        let full = index.brute_force_rank(&query).map_err(|e| e.to_string())?;
        ensure(top.len() == 10, || format!("query {q}: {} results", top.len()))?;
        for (i, (a, b)) in top.iter().zip(&full).enumerate() {
            ensure(a.context_id == b.context_id, || format!("query {q}: position {i} differs"))?;
            ensure((a.score - b.score).abs() <= 1e-12, || format!("query {q}: score differs at {i}"))?;
        }
        // The full ranking itself against an independent scorer and sort.
        let mut oracle: Vec<(u64, f64)> = index
            .contexts()
            .map(|c| (c.context_id, oracle_cosine(c.vector.values(), query.values())))
            .collect();
        let by_id: BTreeMap<u64, f64> = oracle.iter().copied().collect();
        for hit in &full {
            let delta = (hit.score - by_id[&hit.context_id]).abs();
            max_delta = max_delta.max(delta);
            ensure(delta <= 1e-12, || format!("query {q}: context {} score off by {delta}", hit.context_id))?;
        }
        oracle.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (i, (o, hit)) in oracle.iter().zip(&full).enumerate() {
            // Positions may only disagree inside a group of equal scores.
            ensure(o.0 == hit.context_id || (o.1 - hit.score).abs() <= 1e-12, || {
                format!("query {q}: oracle order differs at {i}")
            })?;
        }
        for pair in full.windows(2) {
            let ordered = pair[0].score > pair[1].score
                || (pair[0].score == pair[1].score && pair[0].context_id < pair[1].context_id);
            ensure(ordered, || format!("query {q}: tie rule violated"))?;
        }
    }
    // Index build plus the 100 top-k queries; oracle work is not timed.
    let secs = timed.as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("100 queries x 1000 contexts, max score delta {max_delta:.1e}, {secs:.2} s"))
}

fn cosine_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc051);
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let dim = rng.gen_range(1..=64);
        let mut draw = || loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
            if let Ok(v) = EmbeddingVector::new(v) {
                break v;
            }
        };
        let a = draw();
        let b = draw();
        let cos = |x: &EmbeddingVector, y: &EmbeddingVector| cosine_similarity(x, y).unwrap();
        let self_sim = cos(&a, &a);
        let anti = cos(&a, &a.scaled(-1.0).unwrap());
        let ab = cos(&a, &b);
        let ba = cos(&b, &a);
        let factor = rng.gen_range(0.01..100.0);
        let scaled = cos(&a.scaled(factor).unwrap(), &b);
        for (what, err) in [
            ("self", (self_sim - 1.0).abs()),
            ("antipodal", (anti + 1.0).abs()),
            ("symmetry", (ab - ba).abs()),
            ("scale", (scaled - ab).abs()),
        ] {
            worst = worst.max(err);
            ensure(err <= 1e-9, || format!("pair {i}: {what} error {err:e}"))?;
        }
    }
    Ok(format!("10000 pairs, worst error {worst:.1e}"))
}

fn top_n_metric() -> Outcome {
    let ranks = [Rank::Hit(1), Rank::Hit(4), Rank::Hit(12)];
    let acc = |n| top_n_accuracy(&ranks, n).unwrap();
    ensure(acc(1) == 1.0 / 3.0 && acc(5) == 2.0 / 3.0 && acc(12) == 1.0, || {
        format!("[1,4,12] gave {} {} {}", acc(1), acc(5), acc(12))
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x70b);
    for i in 0..1000 {
        let len = rng.gen_range(1..50);
        let list: Vec<Rank> = (0..len)
            .map(|_| if rng.gen_bool(0.1) { Rank::Miss } else { Rank::Hit(rng.gen_range(1..40)) })
            .collect();
        let mut prev = 0.0;
        for n in 1..45 {
            let a = top_n_accuracy(&list, n).unwrap();
            ensure(a >= prev && (0.0..=1.0).contains(&a), || format!("list {i}: not monotone at n={n}"))?;
            prev = a;
        }
    }

    let provider = HashedBagOfWords::default();
    let ns = [1, 5, 10, 28];
    let report = run_named_benchmark("defect", 2024, &provider, &ns).map_err(|e| e.to_string())?;
    let again = run_named_benchmark("defect", 2024, &provider, &ns).map_err(|e| e.to_string())?;
    ensure(report.case_count == 88, || format!("{} cases", report.case_count))?;
    let t = &report.top_n;
    ensure(t[&1] <= t[&5] && t[&5] <= t[&10] && t[&10] <= t[&28] && t[&28] == 1.0, || format!("{t:?}"))?;
    ensure(report.to_json() == again.to_json(), || "reports differ across runs".into())?;
    Ok(format!(
        "[1,4,12] exact, 1000 monotone lists, defect seed 2024: top1 {:.4} top5 {:.4} top10 {:.4} top28 {:.4}",
        t[&1], t[&5], t[&10], t[&28]
    ))
}

fn matrix(labels: &[&str], counts: Vec<Vec<u64>>) -> ConfusionMatrix {
    ConfusionMatrix {
        labels: labels.iter().map(|s| s.to_string()).collect(),
        counts,
    }
}

fn weighted_f1_oracle() -> Outcome {
    // Rows are true labels. Class a: P 2/2, R 2/3, F1 0.8. Class b: P 3/4,
    // R 3/3, F1 6/7. Supports 3 and 3, so the weighted mean is (0.8 + 6/7) / 2.
    let hand = (0.8 + 6.0 / 7.0) / 2.0;
    let f1 = weighted_f1(&matrix(&["a", "b"], vec![vec![2, 1], vec![0, 3]])).unwrap();
    ensure((f1 - 0.82857).abs() <= 1e-4 && (f1 - hand).abs() <= 1e-12, || format!("got {f1}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0xf1);
    let labels = ["a", "b", "c", "d", "e"];
    for i in 0..200 {
        let n = rng.gen_range(1..=5);
        let mut diag = vec![vec![0u64; n]; n];
        for (j, row) in diag.iter_mut().enumerate() {
            row[j] = rng.gen_range(1..20);
        }
        let d = weighted_f1(&matrix(&labels[..n], diag)).unwrap();
        ensure(d == 1.0, || format!("diagonal {i}: {d}"))?;

        let counts: Vec<Vec<u64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(0..10)).collect()).collect();
        if counts.iter().flatten().sum::<u64>() == 0 {
            continue;
        }
        let base = weighted_f1(&matrix(&labels[..n], counts.clone())).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let permuted_labels: Vec<&str> = perm.iter().map(|p| labels[*p]).collect();
        let permuted: Vec<Vec<u64>> = perm.iter().map(|r| perm.iter().map(|c| counts[*r][*c]).collect()).collect();
        let p = weighted_f1(&matrix(&permuted_labels, permuted)).unwrap();
        ensure((p - base).abs() <= 1e-12, || format!("permutation {i}: {base} vs {p}"))?;
    }
    Ok(format!("[[2,1],[0,3]] = {f1:.5}, 200 diagonal and permuted matrices"))
}

fn media_dedup() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let store = MediaStore::open(dir.path()).map_err(|e| e.to_string())?;
    let image = common::blob(77, 4096);
    let ids: BTreeSet<String> = (0..100)
        .map(|_| store.put(&image, "image/png").unwrap().media_id.to_string())
        .collect();
    ensure(ids.len() == 1 && store.len() == 1, || format!("{} ids, {} objects", ids.len(), store.len()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0xb10b);
    for i in 0..1000 {
        let len = rng.gen_range(0..2048);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let id = store.put(&bytes, "application/octet-stream").unwrap().media_id;
        let (back, _) = store.get(id.as_str()).map_err(|e| e.to_string())?;
        ensure(back == bytes, || format!("blob {i} changed"))?;
    }
    Ok("100 puts -> 1 object; 1000 random blobs round-trip".into())
}

struct FixedContext;

impl WorkflowContext for FixedContext {
    fn defect_exists(&self, id: &str) -> bool {
        id == "stain" || id == "dent"
    }
    fn media_exists(&self, id: &str) -> bool {
        id == "m1"
    }
    fn node_exists(&self, id: &str) -> bool {
        self.defect_exists(id)
    }
    fn instruction(&self, _: &str) -> Option<String> {
        Some("measure the depth".into())
    }
    fn guide_media(&self, _: &str) -> Vec<String> {
        Vec::new()
    }
}

fn depth_rules() -> RuleBook {
    let mut rules = RuleBook::new();
    rules
        .register(ConformityRule {
            rule_id: "stain#p1".into(),
            defect_id: "stain".into(),
            metric: "depth".into(),
            op: CompareOp::Le,
            threshold: Threshold::Single(0.2),
            action: Action::Conform,
            priority: 1,
        })
        .unwrap();
    rules
}

/// Independent reading of a rule predicate.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn oracle_holds(rule: &ConformityRule, v: f64) -> bool {
    match (rule.op, rule.threshold) {
        (CompareOp::Le, Threshold::Single(t)) => !(v > t),
        (CompareOp::Lt, Threshold::Single(t)) => t - v > 0.0,
        (CompareOp::Ge, Threshold::Single(t)) => !(v < t),
        (CompareOp::Gt, Threshold::Single(t)) => v - t > 0.0,
        (CompareOp::Eq, Threshold::Single(t)) => v.to_bits() == t.to_bits() || (v == 0.0 && t == 0.0),
        (CompareOp::Between, Threshold::Range([lo, hi])) => !(v < lo) && !(v > hi),
        _ => false,
    }
}

fn workflow_soundness() -> Outcome {
    let ctx = FixedContext;
    let rules = depth_rules();

    let book = SessionBook::new();
    let s = book.start_session("P-1", "op").map_err(|e| e.to_string())?;
    book.attach_defect(&ctx, &s.session_id, "stain").map_err(|e| e.to_string())?;
    book.mark_assessed(&ctx, &s.session_id).map_err(|e| e.to_string())?;
    book.log_measurement(&ctx, &s.session_id, "depth", 0.1, "mm", None).map_err(|e| e.to_string())?;
    let suggestion = book.evaluate_conformity(&rules, &s.session_id).map_err(|e| e.to_string())?;
    ensure(suggestion.action == Action::Conform, || format!("suggested {:?}", suggestion.action))?;
    let done = book.record_decision(&s.session_id, Decision::Conform, None).map_err(|e| e.to_string())?;
    ensure(done.state == SessionState::DecisionRecorded, || format!("ended in {}", done.state))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5e55);
    let mut ops = 0usize;
    for seq in 0..10_000 {
        let book = SessionBook::new();
        let mut ids = vec!["s-missing".to_string()];
        for _ in 0..rng.gen_range(1..=14) {
            ops += 1;
            let sid = ids.choose(&mut rng).unwrap().clone();
            let _ = match rng.gen_range(0..6) {
                0 => book.start_session(if rng.gen_bool(0.9) { "P" } else { " " }, "op").map(|s| {
                    ids.push(s.session_id);
                }),
                1 => {
                    let d = ["stain", "dent", "ghost"].choose(&mut rng).unwrap();
                    book.attach_defect(&ctx, &sid, d).map(drop)
                }
                2 => book.mark_assessed(&ctx, &sid).map(drop),
                3 => {
                    let v = if rng.gen_bool(0.1) { f64::NAN } else { rng.gen_range(0.0..0.4) };
                    let metric = if rng.gen_bool(0.9) { "depth" } else { "" };
                    let media = rng.gen_bool(0.2).then_some(if rng.gen_bool(0.5) { "m1" } else { "m2" });
                    book.log_measurement(&ctx, &sid, metric, v, "mm", media).map(drop)
                }
                4 => book.evaluate_conformity(&rules, &sid).map(drop),
                _ => {
                    let d = [Decision::Conform, Decision::Scrap, Decision::Rework].choose(&mut rng).unwrap();
                    let comment = rng.gen_bool(0.5).then_some("operator judgement");
                    book.record_decision(&sid, *d, comment).map(drop)
                }
            };
            for session in book.sessions() {
                let state: SessionState = serde_json::from_value(serde_json::to_value(session.state).unwrap())
                    .map_err(|e| format!("sequence {seq}: state escaped the enum: {e}"))?;
                ensure(SessionState::ALL.contains(&state), || format!("sequence {seq}: unknown state"))?;
                session
                    .check_invariants()
                    .map_err(|e| format!("sequence {seq}, {}: {e}", session.session_id))?;
            }
        }
    }

    let metrics = ["depth", "width", "length"];
    let grid = |rng: &mut ChaCha8Rng| f64::from(rng.gen_range(0..=10u32)) / 10.0;
    for case in 0..1000 {
        let mut rules = RuleBook::new();
        let mut all = Vec::new();
        let mut priorities: Vec<i64> = (0..20).collect();
        priorities.shuffle(&mut rng);
        for p in priorities.into_iter().take(rng.gen_range(0..=6)) {
            let op = *[CompareOp::Le, CompareOp::Lt, CompareOp::Ge, CompareOp::Gt, CompareOp::Eq, CompareOp::Between]
                .choose(&mut rng)
                .unwrap();
            let threshold = if op == CompareOp::Between {
                let (a, b) = (grid(&mut rng), grid(&mut rng));
                Threshold::Range([a.min(b), a.max(b)])
            } else {
                Threshold::Single(grid(&mut rng))
            };
            let rule = ConformityRule {
                rule_id: format!("r{p}"),
                defect_id: "d".into(),
                metric: metrics.choose(&mut rng).unwrap().to_string(),
                op,
                threshold,
                action: *[Action::Conform, Action::Scrap, Action::Review].choose(&mut rng).unwrap(),
                priority: p,
            };
            rules.register(rule.clone()).map_err(|e| e.to_string())?;
            all.push(rule);
        }
        let mut measurements: BTreeMap<String, f64> = BTreeMap::new();
        for m in metrics {
            if rng.gen_bool(0.7) {
                let v = if rng.gen_bool(0.5) { grid(&mut rng) } else { rng.gen_range(-0.1..1.1) };
                measurements.insert(m.to_string(), v);
            }
        }
        let expected = all
            .iter()
            .filter(|r| measurements.get(&r.metric).is_some_and(|v| oracle_holds(r, *v)))
            .min_by_key(|r| r.priority);
        let got = rules.evaluate("d", &measurements);
        let want_action = expected.map_or(Action::Review, |r| r.action);
        let want_rule = expected.map(|r| r.rule_id.clone());
        ensure(got.action == want_action && got.matched_rule_id == want_rule, || {
            format!("case {case}: got {:?}/{:?}, oracle {want_action:?}/{want_rule:?}", got.action, got.matched_rule_id)
        })?;
    }
    Ok(format!("happy path Conform; 10000 sequences ({ops} ops) clean; 1000 rule sets match oracle"))
}

fn fusion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf05e);
    let provider = HashedBagOfWords::default();
    for fixture in 0..100 {
        let (_dir, svc) = common::service();
        let n = rng.gen_range(3..=8);
        let mut defects = Vec::new();
        let mut oracle_classifier = HistogramCentroidClassifier::new();
        for i in 0..n {
            let id = format!("d{i:02}");
            let bytes = common::blob(rng.gen(), rng.gen_range(64..512));
            let media = svc.put_media(&bytes, "image/raw").unwrap().media_id.to_string();
            oracle_classifier.register(&id, &bytes).unwrap();
            let descriptions: Vec<String> = (0..rng.gen_range(1..=3)).map(|_| random_text(&mut rng, 3, 8)).collect();
            let refs: Vec<&str> = descriptions.iter().map(String::as_str).collect();
            defects.push(common::defect(&id, &refs, vec![media]));
        }
        svc.ingest_catalog(&Catalog { defects }).map_err(|e| e.to_string())?;

        // Text channel against its own per-defect ranking.
        let text = random_text(&mut rng, 1, 4);
        let kn = svc.knowledge();
        let query = embed_text(&provider, &text).unwrap();
        let mut native = Vec::new();
        for hit in kn.index.brute_force_rank(&query).unwrap() {
            if !native.iter().any(|(id, _): &(String, f64)| *id == hit.node_id) {
                native.push((hit.node_id.clone(), hit.score));
            }
        }
        let out = svc.search(&SearchRequest { k: Some(n), ..SearchRequest::text(&text) }).map_err(|e| e.to_string())?;
        let got: Vec<(String, f64)> = out.results.iter().map(|r| (r.defect_id.clone(), r.fused_score)).collect();
        ensure(got == native, || format!("fixture {fixture}: text order {got:?} vs {native:?}"))?;
        ensure(out.results.iter().all(|r| r.channels.keys().eq([TEXT_CHANNEL])), || "text channel tag".into())?;

        // Image channel against the classifier's ranking.
        let probe = common::blob(rng.gen(), 256);
        let probe_id = svc.put_media(&probe, "image/raw").unwrap().media_id.to_string();
        let native: Vec<(String, f64)> = classify_image(&oracle_classifier, &probe).unwrap();
        let out = svc.search(&SearchRequest { k: Some(n), ..SearchRequest::image(&probe_id) }).map_err(|e| e.to_string())?;
        let got: Vec<(String, f64)> = out.results.iter().map(|r| (r.defect_id.clone(), r.fused_score)).collect();
        ensure(got == native, || format!("fixture {fixture}: image order {got:?} vs {native:?}"))?;
        ensure(out.results.iter().all(|r| r.channels.keys().eq([IMAGE_CHANNEL])), || "image channel tag".into())?;
    }

    // A is first in text and second in image; B the reverse.
    let expected = 1.0 / 61.0 + 1.0 / 62.0;
    for (text_first, image_first) in [("alpha", "beta"), ("beta", "alpha")] {
        let (_dir, svc) = common::service();
        let image_a = svc.put_media(&common::blob(10, 400), "image/raw").unwrap().media_id.to_string();
        let image_b = svc.put_media(&common::blob(200, 400), "image/raw").unwrap().media_id.to_string();
        let catalog = Catalog {
            defects: vec![
                common::defect(text_first, &["dark round stain spot"], vec![image_a]),
                common::defect(image_first, &["long straight scratch line"], vec![image_b.clone()]),
            ],
        };
        svc.ingest_catalog(&catalog).map_err(|e| e.to_string())?;
        let req = SearchRequest {
            text: Some("dark round stain spot".into()),
            image_media_id: Some(image_b),
            ..SearchRequest::default()
        };
        let out = svc.search(&req).map_err(|e| e.to_string())?;
        let r = &out.results;
        ensure(r.len() == 2, || format!("{} results", r.len()))?;
        ensure(r[0].channels[TEXT_CHANNEL].rank == if r[0].defect_id == text_first { 1 } else { 2 }, || {
            "fixture ranks not as designed".into()
        })?;
        ensure(r[0].fused_score == expected && r[1].fused_score == expected, || {
            format!("fused {} and {}, expected {expected}", r[0].fused_score, r[1].fused_score)
        })?;
        ensure(r[0].defect_id == "alpha" && r[1].defect_id == "beta", || "tie not broken by defect id".into())?;
    }
    Ok(format!("100 text and 100 image fixtures keep native order; tie fixture fused {expected:.6} twice"))
}

fn persistence_round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bench = generate_defect_benchmark(99);
    let mut queries: Vec<SearchRequest> = bench
        .cases
        .iter()
        .take(50)
        .enumerate()
        .map(|(i, c)| SearchRequest {
            rating_weight: Some(if i % 2 == 0 { 0.0 } else { 0.5 }),
            ..SearchRequest::text(&c.query)
        })
        .collect();
    queries[49].k = Some(28);

    let run = |svc: &OakService| -> Result<String, String> {
        let mut out = Vec::new();
        for q in &queries {
            out.push(svc.search(q).map_err(|e| e.to_string())?);
        }
        let sessions = svc.sessions().sessions();
        let ratings = svc.sessions().ratings().all();
        Ok(serde_json::to_string(&(out, sessions, ratings, svc.health())).unwrap())
    };

    let before = {
        let svc = OakService::open(common::config(&dir)).map_err(|e| e.to_string())?;
        let report = svc.ingest_catalog(&bench.catalog).map_err(|e| e.to_string())?;
        ensure(report.contexts_indexed == 84, || format!("{} contexts", report.contexts_indexed))?;
        for i in 0..20usize {
            let defect = &bench.catalog.defects[i % 28].id;
            let s = svc.start_session(&format!("P-{i:03}"), &format!("op-{}", i % 4)).map_err(|e| e.to_string())?;
            let sid = s.session_id;
            let stage = i % 7;
            if stage >= 1 {
                svc.attach_defect(&sid, defect).map_err(|e| e.to_string())?;
            }
            if stage >= 2 {
                svc.mark_assessed(&sid).map_err(|e| e.to_string())?;
            }
            if stage >= 3 {
                let note = (i % 2 == 0).then(|| {
                    svc.put_media(format!("voice note {i}").as_bytes(), "audio/ogg").unwrap().media_id.to_string()
                });
                svc.log_measurement(&sid, "depth", i as f64 * 0.03, "mm", note.as_deref())
                    .map_err(|e| e.to_string())?;
            }
            if stage >= 4 {
                svc.suggest(&sid).map_err(|e| e.to_string())?;
            }
            if stage >= 5 {
                svc.record_decision(&sid, Decision::Rework, Some("sent back for rework"))
                    .map_err(|e| e.to_string())?;
            }
            svc.rate(defect, &format!("op-{}", i % 3), (i % 5) as i64 + 1).map_err(|e| e.to_string())?;
        }
        svc.save_snapshot().map_err(|e| e.to_string())?;
        run(&svc)?
    };

    let svc = OakService::open(common::config(&dir)).map_err(|e| e.to_string())?;
    let after = run(&svc)?;
    ensure(before == after, || "results differ after restart".into())?;
    let dangling = svc.dangling_references();
    ensure(dangling.is_empty(), || format!("dangling references: {dangling:?}"))?;
    let next = svc.start_session("P-next", "op").map_err(|e| e.to_string())?;
    ensure(next.session_id == "s-000021", || format!("session counter resumed at {}", next.session_id))?;
    Ok(format!("28 defects, 20 sessions, 50 queries byte-identical ({} bytes)", before.len()))
}

fn benchmark_shapes() -> Outcome {
    let movie = generate_movie_benchmark(17);
    let movies = movie.nodes_with("type", "movie");
    let persons = movie.nodes_with("type", "person");
    ensure(movies == MOVIE_COUNT && movies == 38, || format!("{movies} movies"))?;
    ensure(persons == PERSON_COUNT && persons == 133, || format!("{persons} persons"))?;
    ensure(movie.to_json() == generate_movie_benchmark(17).to_json(), || "movie seed not reproducible".into())?;

    let animal = generate_animal_benchmark(17);
    let contexts = animal.dataset.contexts.len();
    ensure(contexts == ANIMAL_COUNT && contexts == 50, || format!("{contexts} animal contexts"))?;
    ensure(animal.dataset.to_json() == generate_animal_benchmark(17).dataset.to_json(), || {
        "animal seed not reproducible".into()
    })?;

    let defect = generate_defect_benchmark(17);
    ensure(defect.catalog.defects.len() == 28 && defect.cases.len() == 88, || "defect shape".into())?;
    ensure(defect.to_json() == generate_defect_benchmark(17).to_json(), || "defect seed not reproducible".into())?;
    Ok(format!("{movies} movies, {persons} persons, {contexts} animal contexts, seeds reproducible"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("retrieval oracle equivalence", retrieval_oracle_equivalence),
        ("cosine endpoint properties", cosine_properties),
        ("top-n metric correctness", top_n_metric),
        ("weighted-F1 oracle", weighted_f1_oracle),
        ("media dedup", media_dedup),
        ("workflow soundness", workflow_soundness),
        ("fusion degeneracy and RRF", fusion),
        ("persistence round-trip", persistence_round_trip),
        ("benchmark shape fidelity", benchmark_shapes),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
