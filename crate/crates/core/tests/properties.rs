use proptest::prelude::*;
use std::collections::BTreeSet;

use hopcheck::corpus::{split_chains, ArticleInstance, Example, Split, VeracityLabel};
use hopcheck::evaluate::{
    agreement, attention_ratios, chain_retrieved, js_divergence, sweep_top_k, welch_ttest,
    AgreementMode, AnnotationRecord, GraphAttention, MetricsReport,
};
use hopcheck::reasoner::{aggregate_label, select_evidence, Prediction};

fn label() -> impl Strategy<Value = VeracityLabel> {
    (0usize..3).prop_map(|i| VeracityLabel::ALL[i])
}

fn dist() -> impl Strategy<Value = [f64; 3]> {
    (0.01f64..1.0, 0.01f64..1.0, 0.01f64..1.0).prop_map(|(a, b, c)| {
        let s = a + b + c;
        [a / s, b / s, c / s]
    })
}

/// (gold, prediction) pairs over the same sentence count.
fn instance() -> impl Strategy<Value = (Example, Prediction)> {
    (1usize..9).prop_flat_map(|n| {
        (
            label(),
            prop::collection::vec(prop::collection::btree_set(0..n, 1..=n), 1..4),
            dist(),
            prop::collection::vec(0.001f64..1.0, n),
            prop::collection::btree_set(0..n, 0..=n),
        )
            .prop_map(move |(label, chains, label_dist, raw, evidence)| {
                let s: f64 = raw.iter().sum();
                let gold = Example {
                    id: String::new(),
                    claim: String::new(),
                    speaker: String::new(),
                    label,
                    sentences: vec![String::new(); n],
                    chains: chains
                        .into_iter()
                        .map(|c| c.into_iter().collect())
                        .collect(),
                    origin_map: (0..n).collect(),
                };
                let pred = Prediction {
                    label_dist,
                    importance: raw.iter().map(|x| x / s).collect(),
                    evidence: evidence.into_iter().collect(),
                    hop_attention: None,
                };
                (gold, pred)
            })
    })
}

fn unzip(v: Vec<(Example, Prediction)>) -> (Vec<Example>, Vec<Prediction>) {
    v.into_iter().unzip()
}

fn row_stochastic(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.001f64..1.0, n), n).prop_map(|rows| {
        rows.into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|x| x / s).collect()
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn fever_bounded_by_accuracy_and_retrieval(data in prop::collection::vec(instance(), 1..40)) {
        let (gold, preds) = unzip(data);
        let m = MetricsReport::compute(&preds, &gold, None).unwrap();
        let retrieved = preds.iter().zip(&gold).filter(|(p, g)| chain_retrieved(&p.evidence, &g.chains)).count();
        prop_assert!(m.fever_score <= m.label_accuracy + 1e-12);
        prop_assert!(m.fever_score <= retrieved as f64 / gold.len() as f64 + 1e-12);
        for v in [m.label_macro_f1, m.label_accuracy, m.evidence_f1, m.evidence_precision, m.evidence_recall, m.fever_score] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn metrics_invariant_under_instance_order(data in prop::collection::vec(instance(), 1..30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = data.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (g1, p1) = unzip(data);
        let (g2, p2) = unzip(shuffled);
        let a = MetricsReport::compute(&p1, &g1, None).unwrap();
        let b = MetricsReport::compute(&p2, &g2, None).unwrap();
        prop_assert!((a.label_macro_f1 - b.label_macro_f1).abs() < 1e-12);
        prop_assert!((a.evidence_f1 - b.evidence_f1).abs() < 1e-12);
        prop_assert!((a.evidence_recall - b.evidence_recall).abs() < 1e-12);
        prop_assert_eq!(a.fever_score, b.fever_score);
        prop_assert_eq!(a.label_accuracy, b.label_accuracy);
    }

    #[test]
    fn sweep_recall_is_monotone_in_k(data in prop::collection::vec(instance(), 1..20)) {
        let (gold, preds) = unzip(data);
        let rows = sweep_top_k(&preds, &gold, &(1..=10).collect::<Vec<_>>()).unwrap();
        for w in rows.windows(2) {
            prop_assert!(w[0].evidence_recall <= w[1].evidence_recall + 1e-12);
        }
        prop_assert!((rows[9].evidence_recall - 1.0).abs() < 1e-12);
    }

    #[test]
    fn select_evidence_takes_the_top_k(imp in prop::collection::vec(0u8..5, 1..12), k in 1usize..12, shift in -3.0f64..3.0) {
        let imp: Vec<f64> = imp.into_iter().map(f64::from).collect();
        let sel = select_evidence(&imp, k);
        prop_assert_eq!(sel.len(), k.min(imp.len()));
        prop_assert!(sel.windows(2).all(|w| w[0] < w[1]));
        let set: BTreeSet<usize> = sel.iter().copied().collect();
        for &i in &set {
            for j in (0..imp.len()).filter(|j| !set.contains(j)) {
                prop_assert!(imp[i] > imp[j] || (imp[i] == imp[j] && i < j));
            }
        }
        let shifted: Vec<f64> = imp.iter().map(|x| x + shift).collect();
        prop_assert_eq!(select_evidence(&shifted, k), sel);
    }

    #[test]
    fn aggregate_is_a_distribution(dists in prop::collection::vec(dist(), 1..8), raw in prop::collection::vec(0.001f64..1.0, 8)) {
        let w: Vec<f64> = raw[..dists.len()].to_vec();
        let s: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / s).collect();
        let out = aggregate_label(&dists, &w).unwrap();
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for c in 0..3 {
            let lo = dists.iter().map(|d| d[c]).fold(f64::INFINITY, f64::min);
            let hi = dists.iter().map(|d| d[c]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(out[c] >= lo - 1e-12 && out[c] <= hi + 1e-12);
        }
    }

    #[test]
    fn jsd_symmetric_and_bounded(a in prop::collection::vec("(taxes|budget|senate|voters|river) (taxes|budget|senate)", 1..6),
                                 b in prop::collection::vec("(taxes|budget|senate|voters|river) (voters|river)", 1..6)) {
        let ab = js_divergence(&a, &b).unwrap();
        let ba = js_divergence(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(js_divergence(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn per_graph_mean_ratio_is_one(a in (1usize..7).prop_flat_map(row_stochastic), bits in prop::collection::vec(any::<bool>(), 7)) {
        let n = a.len();
        let r = attention_ratios(&[GraphAttention { attention: a, evidence: bits[..n].to_vec() }]).unwrap();
        let groups = [r.evi_to_non_evi, r.evi_to_evi, r.non_evi_to_non_evi, r.non_evi_to_evi];
        let total: f64 = groups.iter().zip(r.edges).map(|(m, e)| m.unwrap_or(0.0) * e as f64).sum();
        prop_assert_eq!(r.edges.iter().sum::<usize>(), n * n);
        prop_assert!((total / (n * n) as f64 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn welch_swap_negates_t(a in prop::collection::vec(-10.0f64..10.0, 2..12), b in prop::collection::vec(-10.0f64..10.0, 2..12)) {
        if let (Ok((t1, p1)), Ok((t2, p2))) = (welch_ttest(&a, &b), welch_ttest(&b, &a)) {
            prop_assert!((t1 + t2).abs() < 1e-9 * t1.abs().max(1.0));
            prop_assert!((p1 - p2).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&p1));
        }
    }

    #[test]
    fn agreement_ignores_rater_order(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..20)) {
        let names = ["false", "half-true", "true"];
        let make = |swap: bool| -> Vec<AnnotationRecord> {
            pairs.iter().enumerate().map(|(i, &(x, y))| {
                let (x, y) = if swap { (y, x) } else { (x, y) };
                AnnotationRecord { id: i.to_string(), labels: vec![names[x].into(), names[y].into()], num_sentences: 0, evidence: Vec::new() }
            }).collect()
        };
        let a = agreement(&make(false), AgreementMode::Label).unwrap();
        let b = agreement(&make(true), AgreementMode::Label).unwrap();
        prop_assert_eq!(a.items, b.items);
        for (x, y) in [(a.fleiss_kappa, b.fleiss_kappa), (a.krippendorff_alpha, b.krippendorff_alpha)] {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }

    #[test]
    fn chain_split_yields_one_instance_per_chain(chains in prop::collection::vec(prop::collection::btree_set(0usize..6, 1..4), 1..5)) {
        let mut unique: Vec<Vec<usize>> = Vec::new();
        for c in chains {
            let c: Vec<usize> = c.into_iter().collect();
            if !unique.contains(&c) {
                unique.push(c);
            }
        }
        let article = ArticleInstance {
            id: "a".into(),
            claim: "c".into(),
            speaker: String::new(),
            label: VeracityLabel::True,
            sentences: (0..6).map(|i| format!("s{i}")).collect(),
            evidence_chains: unique.clone(),
            split: Split::Train,
        };
        let split = split_chains(&[article]);
        prop_assert_eq!(split.len(), unique.len());
        for (c, chain) in split.iter().zip(&unique) {
            prop_assert_eq!(c.evidence.iter().copied().collect::<Vec<_>>(), chain.clone());
        }
    }
}
