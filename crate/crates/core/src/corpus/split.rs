use rand::seq::SliceRandom;
use std::collections::HashMap;

use super::{ArticleInstance, ChainInstance};
use crate::{rng, Error, Result};

/// One [`ChainInstance`] per (article, chain). Sentences are kept in full.
pub fn split_chains(dataset: &[ArticleInstance]) -> Vec<ChainInstance> {
    dataset
        .iter()
        .flat_map(|a| {
            a.evidence_chains
                .iter()
                .enumerate()
                .map(move |(ci, chain)| ChainInstance {
                    article_id: a.id.clone(),
                    chain_id: ci,
                    claim: a.claim.clone(),
                    speaker: a.speaker.clone(),
                    label: a.label,
                    sentences: a.sentences.clone(),
                    evidence: chain.iter().copied().collect(),
                    origin_map: (0..a.sentences.len()).collect(),
                    article_chains: a.evidence_chains.clone(),
                })
        })
        .collect()
}

/// Partitions chain instances into `(train, dev)` with exactly `dev_count`
/// dev instances, keeping all chains of one article on the same side.
///
/// Articles are shuffled with `seed`; an exact subset-sum over the shuffled
/// order then picks the dev articles, preferring earlier ones.
pub fn make_dev_split(
    instances: &[ChainInstance],
    dev_count: usize,
    seed: u64,
) -> Result<(Vec<ChainInstance>, Vec<ChainInstance>)> {
    if dev_count >= instances.len() && !(dev_count == 0 && instances.is_empty()) {
        return Err(Error::invalid(format!(
            "dev_count {dev_count} must be smaller than the {} instances",
            instances.len()
        )));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut sizes: HashMap<&str, usize> = HashMap::new();
    for c in instances {
        let e = sizes.entry(c.article_id.as_str()).or_insert_with(|| {
            order.push(c.article_id.as_str());
            0
        });
        *e += 1;
    }
    let mut shuffled = order.clone();
    shuffled.shuffle(&mut rng::seeded(seed));

    // reach[i][t]: some subset of the first i shuffled articles sums to t.
    let n = shuffled.len();
    let mut reach = vec![vec![false; dev_count + 1]; n + 1];
    reach[0][0] = true;
    for i in 0..n {
        let s = sizes[shuffled[i]];
        for t in 0..=dev_count {
            reach[i + 1][t] = reach[i][t] || (t >= s && reach[i][t - s]);
        }
    }
    if !reach[n][dev_count] {
        return Err(Error::invalid(format!(
            "no article-grouped partition puts exactly {dev_count} instances in dev"
        )));
    }
    let mut dev_articles = std::collections::HashSet::new();
    let mut t = dev_count;
    for i in (0..n).rev() {
        if reach[i][t] {
            continue;
        }
        dev_articles.insert(shuffled[i]);
        t -= sizes[shuffled[i]];
    }
    let (dev, train): (Vec<_>, Vec<_>) = instances
        .iter()
        .cloned()
        .partition(|c| dev_articles.contains(c.article_id.as_str()));
    Ok((train, dev))
}
