//! Acceptance checks, one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line (visible with `--nocapture`).
//!
//! Criteria 1 and 10 need the public datasets in canonical form under
//! `$HOPCHECK_DATA_DIR/{politihop,liar_plus,fever}/dataset.jsonl` and are
//! ignored by default.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use hopcheck::autograd::Tape;
use hopcheck::baselines::random_predict;
use hopcheck::corpus::{self, split_chains, ArticleInstance, Example, Split, VeracityLabel};
use hopcheck::encoder::{Backend, EncoderConfig, Tokenizer};
use hopcheck::evaluate::{
    agreement, attention_ratios, evidence_metrics, fever_score, js_divergence, label_metrics,
    welch_ttest, AgreementMode, AnnotationRecord, GraphAttention,
};
use hopcheck::perturb::{
    build_adversarial, build_even_split, CapitalizationRecognizer, EntityRecognizer, EntitySet,
    FallbackKind, ReplacementPool,
};
use hopcheck::reasoner::{
    aggregate_label, forward, select_evidence, single_step, HopStackConfig, Model, ModelConfig,
    Prediction,
};
use hopcheck::rng::seeded;
use hopcheck::train::{tape_loss, Adam, LossMode};

fn report(n: usize, pass: bool, detail: &str, elapsed: Duration) {
    println!(
        "criterion {n}: {} {detail} ({:.2}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}

fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-12)
}

fn data_file(name: &str) -> PathBuf {
    let dir = std::env::var("HOPCHECK_DATA_DIR").unwrap_or_else(|_| {
        panic!("HOPCHECK_DATA_DIR is not set; criterion needs {name}/dataset.jsonl (run `hopcheck import` first)")
    });
    let path = PathBuf::from(dir).join(name).join("dataset.jsonl");
    assert!(path.exists(), "{} not found", path.display());
    path
}

#[test]
#[ignore = "needs the public PolitiHop train split"]
fn criterion_01_dataset_statistics() {
    let start = Instant::now();
    let train = corpus::load_canonical(&data_file("politihop")).unwrap();
    let train: Vec<ArticleInstance> = train
        .into_iter()
        .filter(|a| a.split != Split::Test)
        .collect();
    let stats = corpus::compute_stats(&train).unwrap();
    let counts: Vec<usize> = VeracityLabel::ALL
        .iter()
        .map(|l| stats.label_counts.get(l).copied().unwrap_or(0))
        .collect();
    let expected_hist = [27.4, 30.8, 22.4, 11.0, 5.3, 3.1];
    let hist_ok = stats
        .chain_length_histogram
        .iter()
        .zip(expected_hist)
        .all(|(a, b)| (a - b).abs() <= 0.1);
    let chains = split_chains(&train).len();
    let pass = counts == [216, 47, 37]
        && hist_ok
        && chains == 733
        && start.elapsed() < Duration::from_secs(30);
    report(
        1,
        pass,
        &format!(
            "labels {counts:?}, chain-length % {:?}, {chains} chain instances",
            stats.chain_length_histogram
        ),
        start.elapsed(),
    );
    assert!(pass);
}

fn brute_force_fever(pred: &Prediction, gold: &Example) -> bool {
    if pred.label() != gold.label {
        return false;
    }
    let evidence: Vec<usize> = pred.evidence.clone();
    let chains: Vec<BTreeSet<usize>> = gold
        .chains
        .iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    (0u32..1 << evidence.len()).any(|mask| {
        let subset: BTreeSet<usize> = (0..evidence.len())
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| evidence[b])
            .collect();
        chains.contains(&subset)
    })
}

#[test]
fn criterion_02_fever_score_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut preds, mut golds) = (Vec::new(), Vec::new());
    for i in 0..200 {
        let n = rng.random_range(1..=8);
        let chains: Vec<Vec<usize>> = (0..rng.random_range(1..=3))
            .map(|_| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng);
                let mut c = idx[..rng.random_range(1..=n)].to_vec();
                c.sort_unstable();
                c
            })
            .collect();
        let label = VeracityLabel::ALL[rng.random_range(0..3)];
        let mut dist = [0.1, 0.1, 0.1];
        dist[rng.random_range(0..3)] = 0.8;
        let mut evidence: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
        evidence.sort_unstable();
        golds.push(Example {
            id: format!("s{i}"),
            claim: String::new(),
            speaker: String::new(),
            label,
            sentences: vec![String::new(); n],
            chains,
            origin_map: (0..n).collect(),
        });
        preds.push(Prediction {
            label_dist: dist,
            importance: vec![1.0 / n as f64; n],
            evidence,
            hop_attention: None,
        });
    }
    let oracle = preds
        .iter()
        .zip(&golds)
        .filter(|(p, g)| brute_force_fever(p, g))
        .count() as f64
        / 200.0;
    let score = fever_score(&preds, &golds).unwrap();
    let pass = score == oracle && oracle > 0.0 && start.elapsed() < Duration::from_secs(5);
    report(
        2,
        pass,
        &format!("fever {score} vs brute force {oracle}"),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_03_metric_oracles() {
    use VeracityLabel::*;
    let start = Instant::now();
    let mut failures = Vec::new();
    fn check(failures: &mut Vec<String>, name: &str, got: f64, want: f64, tol: f64) {
        if !close_rel(got, want, tol) {
            failures.push(format!("{name}: {got} vs {want}"));
        }
    }

    // Per-class F1 from the confusion matrix: false P=1 R=1/2, true P=1/2 R=1, half-true 1.
    let lm = label_metrics(
        &[False, True, True, HalfTrue],
        &[False, False, True, HalfTrue],
    )
    .unwrap();
    let f1 = |p: f64, r: f64| 2.0 * p * r / (p + r);
    check(&mut failures, "accuracy", lm.accuracy, 0.75, 1e-6);
    check(
        &mut failures,
        "macro-F1",
        lm.macro_f1,
        (f1(1.0, 0.5) + f1(0.5, 1.0) + 1.0) / 3.0,
        1e-6,
    );

    let em = evidence_metrics(&[vec![0, 3]], &[vec![vec![0, 1, 2]]]).unwrap();
    check(&mut failures, "evidence P", em.precision, 1.0 / 2.0, 1e-6);
    check(&mut failures, "evidence R", em.recall, 1.0 / 3.0, 1e-6);
    check(
        &mut failures,
        "evidence F1",
        em.f1,
        f1(0.5, 1.0 / 3.0),
        1e-6,
    );

    let (t, p) = welch_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    check(&mut failures, "welch t", t, -1.0, 1e-6);
    if (p - 0.3466).abs() > 1e-4 {
        failures.push(format!("welch p: {p} vs 0.3466"));
    }

    // P = (1, 0), Q = (1/2, 1/2), M = (3/4, 1/4).
    let kl_pm = (1.0f64 / 0.75).log2();
    let kl_qm = 0.5 * (0.5f64 / 0.75).log2() + 0.5 * (0.5f64 / 0.25).log2();
    let jsd = js_divergence(&["taxes taxes"], &["taxes budget"]).unwrap();
    check(&mut failures, "jsd", jsd, 0.5 * kl_pm + 0.5 * kl_qm, 1e-6);
    check(&mut failures, "jsd value", jsd, 0.3113, 1e-3);

    let records: Vec<AnnotationRecord> = [["A", "A"], ["A", "B"], ["B", "B"], ["B", "A"]]
        .iter()
        .enumerate()
        .map(|(i, l)| AnnotationRecord {
            id: i.to_string(),
            labels: l.iter().map(|s| s.to_string()).collect(),
            num_sentences: 0,
            evidence: Vec::new(),
        })
        .collect();
    let ag = agreement(&records, AgreementMode::Label).unwrap();
    // Fleiss: mean item agreement 1/2, chance (1/2)^2 + (1/2)^2 = 1/2.
    let kappa = (0.5 - 0.5) / (1.0 - 0.5);
    // Krippendorff: 8 pairable values, 4 disagreeing ordered pairs, n_A = n_B = 4.
    let alpha = 1.0 - (8.0 - 1.0) * 4.0 / (2.0 * 4.0 * 4.0);
    match (ag.fleiss_kappa, ag.krippendorff_alpha) {
        (Some(k), Some(a)) => {
            if (k - kappa).abs() > 1e-9 {
                failures.push(format!("kappa {k} vs {kappa}"));
            }
            check(&mut failures, "alpha", a, alpha, 1e-6);
        }
        other => failures.push(format!("agreement undefined: {other:?}")),
    }

    let pass = failures.is_empty() && start.elapsed() < Duration::from_secs(5);
    report(3, pass, &failures.join("; "), start.elapsed());
    assert!(pass, "{failures:?}");
}

const NAMES: [&str; 8] = [
    "Texas", "Ohio", "Obama", "Biden", "Congress", "Medicare", "Florida", "Senate",
];

fn random_article(rng: &mut ChaCha8Rng, i: usize) -> ArticleInstance {
    let n = rng.random_range(4..=14);
    let sentences: Vec<String> = (0..n)
        .map(|j| {
            let a = NAMES[rng.random_range(0..NAMES.len())];
            let b = NAMES[rng.random_range(0..NAMES.len())];
            format!("Then {a} and {b} discussed item {j} of article {i}.")
        })
        .collect();
    let chains: Vec<Vec<usize>> = (0..rng.random_range(1..=3))
        .map(|_| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            let mut c = idx[..rng.random_range(1..=3)].to_vec();
            c.sort_unstable();
            c
        })
        .collect();
    let mut dedup: Vec<Vec<usize>> = Vec::new();
    for c in chains {
        if !dedup.contains(&c) {
            dedup.push(c);
        }
    }
    ArticleInstance {
        id: format!("art{i}"),
        claim: format!("Claim {i}"),
        speaker: "Someone".into(),
        label: VeracityLabel::ALL[i % 3],
        sentences,
        evidence_chains: dedup,
        split: Split::Train,
    }
}

#[test]
fn criterion_04_perturbation_invariants() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let articles: Vec<ArticleInstance> = (0..100).map(|i| random_article(&mut rng, i)).collect();
    let pool_articles: Vec<ArticleInstance> =
        (100..160).map(|i| random_article(&mut rng, i)).collect();
    let recognizer = CapitalizationRecognizer;
    let pool = ReplacementPool::from_articles(&pool_articles, &recognizer);
    let chains = split_chains(&articles);
    let mut failures = Vec::new();
    let mut replaced = 0;
    for (k, c) in chains.iter().enumerate().take(100) {
        let seed = 1000 + k as u64;
        let even = build_even_split(c, seed);
        if even != build_even_split(c, seed) {
            failures.push(format!("{}: even split not reproducible", c.id()));
        }
        let own: Vec<&String> = c.evidence.iter().map(|&i| &c.sentences[i]).collect();
        let kept: Vec<&String> = even.evidence.iter().map(|&i| &even.sentences[i]).collect();
        if own != kept {
            failures.push(format!("{}: evidence text changed", c.id()));
        }
        let total: usize = c.article_chains.iter().map(Vec::len).sum();
        let want = total.min(c.sentences.len() - c.evidence.len());
        let non_evidence = even.sentences.len() - even.evidence.len();
        if non_evidence != want {
            failures.push(format!(
                "{}: {non_evidence} non-evidence sentences, expected {want}",
                c.id()
            ));
        }

        let adv = build_adversarial(&even, &pool, &recognizer, seed);
        let again = build_adversarial(&even, &pool, &recognizer, seed);
        if serde_json::to_string(&adv.instance).unwrap()
            != serde_json::to_string(&again.instance).unwrap()
        {
            failures.push(format!("{}: adversarial not reproducible", c.id()));
        }
        let union = even.evidence_union();
        let mut ev_entities = EntitySet::new();
        for &i in &union {
            ev_entities.extend(&recognizer.recognize(&even.sentences[i]));
            if adv.instance.sentences[i] != even.sentences[i] {
                failures.push(format!("{}: evidence sentence {i} replaced", c.id()));
            }
        }
        for &(slot, pick) in &adv.replacements {
            replaced += 1;
            let shares = pool.entries[pick].entities.intersects(&ev_entities);
            let logged = adv
                .fallbacks
                .iter()
                .any(|f| f.sentence == slot && f.kind == FallbackKind::AnyEntity);
            if !shares && !logged {
                failures.push(format!(
                    "{}: slot {slot} shares no entity and is not logged",
                    c.id()
                ));
            }
        }
        let untouched = (0..even.sentences.len())
            .filter(|i| !union.contains(i))
            .count()
            - adv.replacements.len();
        let kept_logged = adv
            .fallbacks
            .iter()
            .filter(|f| f.kind == FallbackKind::KeptOriginal)
            .count();
        if untouched != kept_logged {
            failures.push(format!(
                "{}: {untouched} unreplaced slots, {kept_logged} logged",
                c.id()
            ));
        }
    }
    let pass = failures.is_empty() && replaced > 0 && start.elapsed() < Duration::from_secs(10);
    report(
        4,
        pass,
        &format!(
            "100 constructions, {replaced} replacements; {}",
            failures.join("; ")
        ),
        start.elapsed(),
    );
    assert!(pass, "{failures:?}");
}

fn fixture_example() -> Example {
    Example {
        id: "fx".into(),
        claim: "the governor raised taxes in ohio".into(),
        speaker: "jane doe".into(),
        label: VeracityLabel::HalfTrue,
        sentences: vec![
            "taxes rose in may".into(),
            "the governor signed the bill".into(),
            "critics objected to the plan".into(),
        ],
        chains: vec![vec![0, 1]],
        origin_map: vec![0, 1, 2],
    }
}

fn tiny_model(examples: &[Example], hops: usize, hop_hidden: usize) -> Model {
    let mut texts = Vec::new();
    for e in examples {
        texts.push(e.claim.clone());
        texts.push(e.speaker.clone());
        texts.extend(e.sentences.iter().cloned());
    }
    let tok = Tokenizer::build(&texts, 1000);
    let config = ModelConfig {
        backend: Backend::TinyTrainable,
        encoder: EncoderConfig::tiny(tok.len(), 32),
        hops: HopStackConfig {
            num_hops: hops,
            hidden: hop_hidden,
            heads: 1,
        },
        max_node_len: 32,
        sentence_ids: false,
    };
    Model::new(config, tok, 42).unwrap()
}

#[test]
fn criterion_05_model_identities() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let ex = fixture_example();
    let hop3 = tiny_model(&[ex.clone()], 3, 16);
    let hop0 = tiny_model(&[ex.clone()], 0, 16);
    let batch = hop3.nodes(&ex).unwrap();
    if forward(&hop0, &batch, 2).unwrap() != single_step(&hop3, &batch, 2).unwrap() {
        failures.push("L = 0 differs from the single-step model".to_string());
    }

    let mixed = aggregate_label(&[[0.6, 0.3, 0.1], [0.2, 0.2, 0.6]], &[0.5, 0.5]).unwrap();
    if mixed
        .iter()
        .zip([0.4, 0.25, 0.35])
        .any(|(a, b)| (a - b).abs() > 1e-6)
    {
        failures.push(format!("mixture {mixed:?}"));
    }
    if aggregate_label(&[[0.7, 0.2, 0.1]], &[1.0]).unwrap() != [0.7, 0.2, 0.1] {
        failures.push("single-node mixture".into());
    }
    let onehot = aggregate_label(&[[0.6, 0.3, 0.1], [0.2, 0.2, 0.6]], &[0.0, 1.0]).unwrap();
    if onehot != [0.2, 0.2, 0.6] {
        failures.push(format!("one-hot mixture {onehot:?}"));
    }

    let mut checked = 0;
    for values in [
        [0.1, 0.2, 0.2, 0.2, 0.3],
        [0.1, 0.1, 0.4, 0.4, 0.0],
        [0.2; 5],
        [0.1, 0.2, 0.3, 0.15, 0.25],
    ] {
        let mut perm: Vec<usize> = (0..5).collect();
        for_each_permutation(&mut perm, 0, &mut |p| {
            let imp: Vec<f64> = p.iter().map(|&i| values[i]).collect();
            for k in 1..=6 {
                let sel = select_evidence(&imp, k);
                checked += 1;
                let set: BTreeSet<usize> = sel.iter().copied().collect();
                let ok = sel.len() == k.min(5)
                    && sel.windows(2).all(|w| w[0] < w[1])
                    && set.iter().all(|&i| {
                        (0..5)
                            .filter(|j| !set.contains(j))
                            .all(|j| imp[i] > imp[j] || (imp[i] == imp[j] && i < j))
                    });
                if !ok {
                    failures.push(format!("select_evidence({imp:?}, {k}) = {sel:?}"));
                }
            }
        });
    }
    let pass = failures.is_empty();
    report(
        5,
        pass,
        &format!("{checked} selections checked; {}", failures.join("; ")),
        start.elapsed(),
    );
    assert!(pass, "{failures:?}");
}

fn for_each_permutation(v: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == v.len() {
        f(v);
        return;
    }
    for j in i..v.len() {
        v.swap(i, j);
        for_each_permutation(v, i + 1, f);
        v.swap(i, j);
    }
}

fn joint_loss(model: &Model, ex: &Example) -> f64 {
    let batch = model.nodes(ex).unwrap();
    let mut tape = Tape::new(&model.params);
    let out = model.forward_tape(&mut tape, &batch, true).unwrap();
    let loss = tape_loss(
        &mut tape,
        &out,
        ex.label,
        &ex.gold_evidence(),
        LossMode::Joint,
    )
    .unwrap()
    .unwrap();
    tape.scalar(loss.total)
}

#[test]
fn criterion_06_gradient_check() {
    let start = Instant::now();
    let ex = fixture_example();
    let mut model = tiny_model(&[ex.clone()], 2, 16);
    let batch = model.nodes(&ex).unwrap();
    // At initialisation the node summaries are nearly identical, hop attention is
    // uniform and the query/key gradients vanish; check at a generic point instead.
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for id in model.params.ids().collect::<Vec<_>>() {
        model
            .params
            .get_mut(id)
            .mapv_inplace(|x| x + noise.sample(&mut rng));
    }
    let grads = {
        let mut tape = Tape::new(&model.params);
        let out = model.forward_tape(&mut tape, &batch, true).unwrap();
        let loss = tape_loss(
            &mut tape,
            &out,
            ex.label,
            &ex.gold_evidence(),
            LossMode::Joint,
        )
        .unwrap()
        .unwrap();
        tape.backward(loss.total)
    };
    let h = 1e-5;
    let mut worst: (f64, String) = (0.0, String::new());
    let (mut zero_tensors, mut zero_mismatch) = (0, Vec::new());
    for id in model.reasoning_param_ids() {
        let analytic = grads
            .get(id)
            .expect("every reasoning tensor gets a gradient")
            .clone();
        let mut numeric = analytic.clone();
        for idx in 0..analytic.len() {
            let (r, c) = (idx / analytic.ncols(), idx % analytic.ncols());
            let orig = model.params.get(id)[[r, c]];
            model.params.get_mut(id)[[r, c]] = orig + h;
            let up = joint_loss(&model, &ex);
            model.params.get_mut(id)[[r, c]] = orig - h;
            let down = joint_loss(&model, &ex);
            model.params.get_mut(id)[[r, c]] = orig;
            numeric[[r, c]] = (up - down) / (2.0 * h);
        }
        let norm = |a: &ndarray::Array2<f64>| a.mapv(|x| x * x).sum().sqrt();
        let name = model.params.name(id).to_string();
        if norm(&analytic) < 1e-12 {
            // Key and importance biases shift every softmax logit of a row equally.
            if norm(&numeric) >= 1e-8 {
                zero_mismatch.push(format!("{name}: numeric {:.2e}", norm(&numeric)));
            }
            zero_tensors += 1;
            continue;
        }
        let rel = norm(&(&analytic - &numeric)) / (norm(&analytic) + norm(&numeric));
        if rel >= worst.0 {
            worst = (rel, name);
        }
    }
    let pass =
        worst.0 < 1e-4 && zero_mismatch.is_empty() && start.elapsed() < Duration::from_secs(60);
    report(
        6,
        pass,
        &format!(
            "max relative error {:.2e} ({}), {zero_tensors} zero-gradient tensors {}",
            worst.0,
            worst.1,
            if zero_mismatch.is_empty() {
                "confirmed".to_string()
            } else {
                zero_mismatch.join(", ")
            }
        ),
        start.elapsed(),
    );
    assert!(pass);
}

const KEYWORDS: [&str; 3] = ["pinocchio", "muddle", "verified"];
const FILLER: [&str; 16] = [
    "budget", "county", "school", "report", "voters", "meeting", "office", "policy", "market",
    "hospital", "river", "bridge", "council", "program", "survey", "station",
];

fn overfit_corpus() -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..30)
        .map(|i| {
            let label = VeracityLabel::ALL[i % 3];
            let n = 6;
            let filler = |rng: &mut ChaCha8Rng| {
                (0..5)
                    .map(|_| FILLER[rng.random_range(0..FILLER.len())])
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let mut sentences: Vec<String> = (0..n).map(|_| filler(&mut rng)).collect();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut chain = idx[..2].to_vec();
            chain.sort_unstable();
            for &j in &chain {
                sentences[j] = format!(
                    "{} {} {}",
                    filler(&mut rng),
                    KEYWORDS[label.index()],
                    filler(&mut rng)
                );
            }
            Example {
                id: format!("o{i}"),
                claim: format!("claim about the {}", FILLER[i % FILLER.len()]),
                speaker: "speaker".into(),
                label,
                sentences,
                chains: vec![chain],
                origin_map: (0..n).collect(),
            }
        })
        .collect()
}

#[test]
fn criterion_07_overfit() {
    let start = Instant::now();
    let data = overfit_corpus();
    let mut model = tiny_model(&data, 2, 32);
    let mut opt = Adam::new(&model.params, 1e-3);
    let batches: Vec<_> = data.iter().map(|e| model.nodes(e).unwrap()).collect();
    let golds: Vec<BTreeSet<usize>> = data.iter().map(Example::gold_evidence).collect();
    let mut rng = seeded(42);
    let (mut acc, mut recall, mut reached) = (0.0, 0.0, None);
    for epoch in 1..=200 {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        for &i in &order {
            let grads = {
                let mut tape = Tape::new(&model.params);
                let out = model.forward_tape(&mut tape, &batches[i], true).unwrap();
                let loss = tape_loss(&mut tape, &out, data[i].label, &golds[i], LossMode::Joint)
                    .unwrap()
                    .unwrap();
                tape.backward(loss.total)
            };
            opt.step(&mut model.params, &grads);
        }
        let preds: Vec<Prediction> = batches
            .iter()
            .map(|b| forward(&model, b, 2).unwrap())
            .collect();
        acc = label_metrics(
            &preds.iter().map(Prediction::label).collect::<Vec<_>>(),
            &data.iter().map(|e| e.label).collect::<Vec<_>>(),
        )
        .unwrap()
        .accuracy;
        recall = evidence_metrics(
            &preds.iter().map(|p| p.evidence.clone()).collect::<Vec<_>>(),
            &data.iter().map(|e| e.chains.clone()).collect::<Vec<_>>(),
        )
        .unwrap()
        .recall;
        if acc == 1.0 && recall >= 0.9 {
            reached = Some(epoch);
            break;
        }
    }
    let pass = reached.is_some() && start.elapsed() < Duration::from_secs(600);
    report(
        7,
        pass,
        &format!("epoch {reached:?}: train accuracy {acc:.3}, evidence recall@2 {recall:.3}"),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_08_attention_ratios() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let uniform = GraphAttention {
        attention: vec![vec![0.25; 4]; 4],
        evidence: vec![true, false, true, false],
    };
    let r = attention_ratios(&[uniform]).unwrap();
    for v in [
        r.evi_to_non_evi,
        r.evi_to_evi,
        r.non_evi_to_non_evi,
        r.non_evi_to_evi,
    ] {
        if v != Some(1.0) {
            failures.push(format!("uniform ratio {v:?}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let n = rng.random_range(2..=9);
        let attention: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let row: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
                let s: f64 = row.iter().sum();
                row.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let evidence: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let r = attention_ratios(&[GraphAttention {
            attention,
            evidence,
        }])
        .unwrap();
        let groups = [
            r.evi_to_non_evi,
            r.evi_to_evi,
            r.non_evi_to_non_evi,
            r.non_evi_to_evi,
        ];
        let total: f64 = groups
            .iter()
            .zip(r.edges)
            .map(|(m, e)| m.unwrap_or(0.0) * e as f64)
            .sum();
        let mean = total / (n * n) as f64;
        if (mean - 1.0).abs() > 1e-9 {
            failures.push(format!("per-graph mean ratio {mean}"));
        }
    }

    // Nodes 0 and 1 are evidence; the graph mean of a 3x3 row-stochastic matrix is 1/3.
    let a = vec![
        vec![0.5, 0.3, 0.2],
        vec![0.1, 0.6, 0.3],
        vec![0.4, 0.4, 0.2],
    ];
    let r = attention_ratios(&[GraphAttention {
        attention: a.clone(),
        evidence: vec![true, true, false],
    }])
    .unwrap();
    let ratio = |u: usize, v: usize| a[u][v] * 3.0;
    let want = [
        (ratio(0, 2) + ratio(1, 2)) / 2.0,
        (ratio(0, 0) + ratio(0, 1) + ratio(1, 0) + ratio(1, 1)) / 4.0,
        ratio(2, 2),
        (ratio(2, 0) + ratio(2, 1)) / 2.0,
    ];
    let got = [
        r.evi_to_non_evi,
        r.evi_to_evi,
        r.non_evi_to_non_evi,
        r.non_evi_to_evi,
    ];
    for (g, w) in got.iter().zip(want) {
        if g.is_none_or(|g| (g - w).abs() > 1e-12) {
            failures.push(format!("hand fixture {g:?} vs {w}"));
        }
    }
    let pass = failures.is_empty();
    report(8, pass, &failures.join("; "), start.elapsed());
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_09_random_baseline() {
    let start = Instant::now();
    let mut rng = seeded(42);
    let mut gold_rng = ChaCha8Rng::seed_from_u64(9);
    let (mut correct, mut bad_sizes) = (0usize, 0usize);
    let trials = 30_000;
    for _ in 0..trials {
        let n = gold_rng.random_range(1..=30);
        let gold = VeracityLabel::ALL[gold_rng.random_range(0..3)];
        let p = random_predict(n, &mut rng);
        correct += usize::from(p.label() == gold);
        let size = p.evidence.len();
        let distinct: BTreeSet<usize> = p.evidence.iter().copied().collect();
        if !(1..=n.min(10)).contains(&size)
            || distinct.len() != size
            || p.evidence.iter().any(|&i| i >= n)
        {
            bad_sizes += 1;
        }
    }
    let acc = correct as f64 / trials as f64;
    let pass = (acc - 1.0 / 3.0).abs() <= 0.01 && bad_sizes == 0;
    report(
        9,
        pass,
        &format!("accuracy {acc:.4}, {bad_sizes} malformed evidence sets"),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
#[ignore = "needs the public FEVER, LIAR-PLUS and PolitiHop data"]
fn criterion_10_corpus_divergence() {
    let start = Instant::now();
    let texts = |name: &str| -> Vec<String> {
        corpus::load_examples(&data_file(name))
            .unwrap()
            .into_iter()
            .flat_map(|e| e.sentences)
            .collect()
    };
    let politihop = texts("politihop");
    let liar = js_divergence(&texts("liar_plus"), &politihop).unwrap();
    let fever = js_divergence(&texts("fever"), &politihop).unwrap();
    let pass = liar < fever && (liar - 0.063).abs() <= 0.05 && (fever - 0.278).abs() <= 0.05;
    report(
        10,
        pass,
        &format!("JSD(LIAR-PLUS, PolitiHop) {liar:.3}, JSD(FEVER, PolitiHop) {fever:.3}"),
        start.elapsed(),
    );
    assert!(pass);
}
