use hopcheck::corpus::{StatsReport, CHAIN_LENGTH_BUCKETS};
use hopcheck::evaluate::{AttentionRatios, MetricsReport, SweepRow};

fn pct(x: f64) -> String {
    format!("{:6.2}", 100.0 * x)
}

pub fn print_stats(s: &StatsReport) {
    println!("articles {}  chains {}", s.articles, s.chains);
    for (name, v) in [
        ("words/article", s.words_per_article),
        ("sentences/article", s.sentences_per_article),
        ("evidence/article", s.evidence_per_article),
        ("evidence/chain", s.evidence_per_chain),
        ("chains/article", s.chains_per_article),
    ] {
        println!("{name:<20}{:>10.2} ± {:.2}", v.mean, v.sd);
    }
    for (label, n) in &s.label_counts {
        println!("{:<20}{n:>10}", label.as_str());
    }
    let hist: Vec<String> = CHAIN_LENGTH_BUCKETS
        .iter()
        .zip(s.chain_length_histogram)
        .map(|(b, p)| format!("{b}: {p:.1}%"))
        .collect();
    println!("chain lengths       {}", hist.join("  "));
}

fn metrics_line(m: &MetricsReport) -> String {
    format!(
        "{:>6} {} {} {} {} {} {}",
        m.count,
        pct(m.label_macro_f1),
        pct(m.label_accuracy),
        pct(m.evidence_f1),
        pct(m.evidence_precision),
        pct(m.evidence_recall),
        pct(m.fever_score)
    )
}

pub fn print_metrics(title: &str, m: &MetricsReport) {
    let k = m.k.map_or("as given".to_string(), |k| k.to_string());
    println!("{title} (k = {k})");
    println!(
        "{:<22}{:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
        "", "n", "F1", "Acc", "EviF1", "EviP", "EviR", "FEVER"
    );
    println!("{:<22}{}", "all", metrics_line(m));
    for b in &m.buckets {
        match &b.metrics {
            Some(bm) => println!("{:<22}{}", b.name, metrics_line(bm)),
            None => println!("{:<22}{:>6}  (empty)", b.name, 0),
        }
    }
}

pub fn print_sweep(rows: &[SweepRow]) {
    println!(
        "{:>3} {:>6} {:>6} {:>6} {:>6}",
        "k", "EviF1", "EviP", "EviR", "FEVER"
    );
    for r in rows {
        println!(
            "{:>3} {} {} {} {}",
            r.k,
            pct(r.evidence_f1),
            pct(r.evidence_precision),
            pct(r.evidence_recall),
            pct(r.fever_score)
        );
    }
}

pub fn print_attention(r: &AttentionRatios) {
    let show = |v: Option<f64>| v.map_or("  n/a".to_string(), |x| format!("{x:.3}"));
    println!("attention ratios (source -> target)");
    println!("  evi -> non-evi      {}", show(r.evi_to_non_evi));
    println!("  evi -> evi          {}", show(r.evi_to_evi));
    println!("  non-evi -> non-evi  {}", show(r.non_evi_to_non_evi));
    println!("  non-evi -> evi      {}", show(r.non_evi_to_evi));
}
