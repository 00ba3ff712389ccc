//! Oracles and helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use polarimeter::core::element::{normalize_handle, normalize_hashtag, normalize_url};
use polarimeter::core::{
    ElementKey, ElementKind, Labels, Stance, StanceLabel, Tweet, TweetAudience, UserProfile,
};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn truth_labels(truth: &BTreeMap<String, Stance>) -> Labels {
    truth
        .iter()
        .map(|(u, s)| (u.clone(), StanceLabel::seed(*s)))
        .collect()
}

pub fn swap(labels: &Labels) -> Labels {
    labels
        .iter()
        .filter_map(|(u, l)| l.stance().map(|s| (u.to_string(), StanceLabel::seed(s.other()))))
        .collect()
}

/// Element keys of one tweet, each at most once.
pub fn tweet_keys(t: &Tweet) -> BTreeSet<ElementKey> {
    let mut keys = BTreeSet::new();
    keys.extend(t.hashtags.iter().filter_map(|h| normalize_hashtag(h)));
    keys.extend(t.urls.iter().filter_map(|u| normalize_url(u).ok()));
    if let Some(rt) = &t.retweet_of {
        keys.extend(normalize_handle(&rt.user_handle));
    }
    keys
}

/// Literal valence formula over a recount straight from the tweets.
/// Returns key -> (tf_supp, tf_opp, valence) for every used element of `kind`.
pub fn valence_oracle(
    tweets: &[Tweet],
    stance_of: &BTreeMap<String, Stance>,
    kind: ElementKind,
) -> BTreeMap<String, (u64, u64, f64)> {
    let mut tf: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let (mut total_s, mut total_o) = (0u64, 0u64);
    for t in tweets {
        let Some(stance) = stance_of.get(&t.author_id) else {
            continue;
        };
        for k in tweet_keys(t).into_iter().filter(|k| k.kind == kind) {
            let slot = tf.entry(k.key).or_default();
            if *stance == Stance::Supp {
                slot.0 += 1;
                total_s += 1;
            } else {
                slot.1 += 1;
                total_o += 1;
            }
        }
    }
    tf.into_iter()
        .map(|(k, (s, o))| {
            let a = s as f64 / total_s as f64;
            let b = o as f64 / total_o as f64;
            (k, (s, o, 2.0 * a / (a + b) - 1.0))
        })
        .collect()
}

/// (S, O): retweeted originals whose audience holds a SUPP / OPP user under `stance_of`.
pub fn overlap_oracle(
    profile: &UserProfile,
    audiences: &BTreeMap<String, TweetAudience>,
    stance_of: &BTreeMap<String, Stance>,
) -> (u32, u32) {
    let (mut s, mut o) = (0, 0);
    for t in &profile.retweeted_tweet_ids {
        let Some(a) = audiences.get(t) else { continue };
        let side = |want| a.sharers.iter().any(|u| stance_of.get(u) == Some(&want));
        s += u32::from(side(Stance::Supp));
        o += u32::from(side(Stance::Opp));
    }
    (s, o)
}

pub fn seed_text(seeds: &[(String, Stance)]) -> String {
    seeds.iter().map(|(u, s)| format!("{u}\t{s}\n")).collect()
}

pub fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Means of `f` over same-stance and cross-stance pairs.
pub fn pair_means<T>(items: &[T], stance: impl Fn(&T) -> Stance, f: impl Fn(&T, &T) -> f64) -> (f64, f64) {
    let (mut intra, mut inter, mut ni, mut nx) = (0.0, 0.0, 0u64, 0u64);
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let v = f(&items[i], &items[j]);
            if stance(&items[i]) == stance(&items[j]) {
                intra += v;
                ni += 1;
            } else {
                inter += v;
                nx += 1;
            }
        }
    }
    (intra / ni as f64, inter / nx as f64)
}

/// Relative path -> bytes for every file below `root`.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}
