//! Per-user profiles and the retweet audience of every retweeted original.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;

use crate::element::{ElementKey, ElementKind};
use crate::tweet::{extract_elements, Tweet};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UserProfile {
    pub user_id: String,
    pub handle: String,
    pub tweet_count: u64,
    /// Number of the user's tweets containing each element (at most one per tweet).
    pub element_counts: BTreeMap<ElementKey, u64>,
    /// Distinct originals this user retweeted.
    pub retweeted_tweet_ids: BTreeSet<String>,
}

impl UserProfile {
    pub fn counts_of(&self, kind: ElementKind) -> impl Iterator<Item = (&ElementKey, u64)> {
        self.element_counts
            .iter()
            .filter(move |(k, _)| k.kind == kind)
            .map(|(k, c)| (k, *c))
    }

    pub fn distinct_of(&self, kind: ElementKind) -> usize {
        self.counts_of(kind).count()
    }
}

/// Users who authored or retweeted one original tweet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TweetAudience {
    pub original_tweet_id: String,
    pub sharers: BTreeSet<String>,
}

/// Raw spellings seen for each element, for display in reports.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DisplayForms {
    variants: BTreeMap<ElementKey, BTreeMap<String, u64>>,
}

impl DisplayForms {
    pub fn record(&mut self, key: &ElementKey, raw: &str) {
        *self
            .variants
            .entry(key.clone())
            .or_default()
            .entry(String::from(raw))
            .or_default() += 1;
    }

    pub fn merge(&mut self, other: DisplayForms) {
        for (key, vars) in other.variants {
            let slot = self.variants.entry(key).or_default();
            for (raw, n) in vars {
                *slot.entry(raw).or_default() += n;
            }
        }
    }

    /// Most frequent raw variant, ties broken lexicographically; the key itself if none was seen.
    pub fn display<'a>(&'a self, key: &'a ElementKey) -> &'a str {
        self.variants
            .get(key)
            .and_then(|vars| {
                // BTreeMap iterates lexicographically, so the first maximum wins ties.
                vars.iter()
                    .fold(None::<(&String, u64)>, |best, (raw, &n)| match best {
                        Some((_, b)) if b >= n => best,
                        _ => Some((raw, n)),
                    })
                    .map(|(raw, _)| raw.as_str())
            })
            .unwrap_or(&key.key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ElementKey, &BTreeMap<String, u64>)> {
        self.variants.iter()
    }
}

/// Accumulates tweets. Builders over disjoint shards can be merged in any order.
#[derive(Clone, Debug, Default)]
pub struct CorpusBuilder {
    profiles: BTreeMap<String, UserProfile>,
    // latest (created_at, handle) per user; decides the profile handle
    handles: BTreeMap<String, (i64, String)>,
    retweeters: BTreeMap<String, BTreeSet<String>>,
    referenced_handles: BTreeMap<String, BTreeSet<String>>,
    original_authors: BTreeMap<String, String>,
    display: DisplayForms,
    dropped: u64,
    tweets: u64,
}

impl CorpusBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, tweet: &Tweet) {
        self.tweets += 1;
        let profile = self
            .profiles
            .entry(tweet.author_id.clone())
            .or_insert_with(|| UserProfile {
                user_id: tweet.author_id.clone(),
                ..UserProfile::default()
            });
        profile.tweet_count += 1;

        let extraction = extract_elements(tweet);
        self.dropped += extraction.dropped as u64;
        let distinct: BTreeSet<&ElementKey> = extraction.occurrences.iter().collect();
        for key in distinct {
            *profile.element_counts.entry(key.clone()).or_default() += 1;
        }
        for (raw, key) in tweet
            .hashtags
            .iter()
            .filter_map(|raw| crate::element::normalize_hashtag(raw).map(|k| (raw, k)))
        {
            self.display.record(&key, raw.trim().trim_start_matches('#'));
        }

        match &tweet.retweet_of {
            Some(rt) => {
                profile.retweeted_tweet_ids.insert(rt.tweet_id.clone());
                if let Some(key) = crate::element::normalize_handle(&rt.user_handle) {
                    self.display
                        .record(&key, rt.user_handle.trim().trim_start_matches('@'));
                    self.referenced_handles
                        .entry(rt.tweet_id.clone())
                        .or_default()
                        .insert(key.key);
                }
                self.retweeters
                    .entry(rt.tweet_id.clone())
                    .or_default()
                    .insert(tweet.author_id.clone());
            }
            None => {
                self.original_authors
                    .insert(tweet.tweet_id.clone(), tweet.author_id.clone());
            }
        }

        let candidate = (tweet.created_at, tweet.author_handle.clone());
        match self.handles.get_mut(&tweet.author_id) {
            Some(current) if *current >= candidate => {}
            Some(current) => *current = candidate,
            None => {
                self.handles.insert(tweet.author_id.clone(), candidate);
            }
        }
    }

    pub fn merge(&mut self, other: CorpusBuilder) {
        self.tweets += other.tweets;
        self.dropped += other.dropped;
        for (id, p) in other.profiles {
            let mine = self.profiles.entry(id).or_insert_with(|| UserProfile {
                user_id: p.user_id.clone(),
                ..UserProfile::default()
            });
            mine.tweet_count += p.tweet_count;
            for (k, c) in p.element_counts {
                *mine.element_counts.entry(k).or_default() += c;
            }
            mine.retweeted_tweet_ids.extend(p.retweeted_tweet_ids);
        }
        for (id, h) in other.handles {
            match self.handles.get_mut(&id) {
                Some(current) if *current >= h => {}
                Some(current) => *current = h,
                None => {
                    self.handles.insert(id, h);
                }
            }
        }
        for (t, users) in other.retweeters {
            self.retweeters.entry(t).or_default().extend(users);
        }
        for (t, hs) in other.referenced_handles {
            self.referenced_handles.entry(t).or_default().extend(hs);
        }
        self.original_authors.extend(other.original_authors);
        self.display.merge(other.display);
    }

    pub fn finish(self) -> Corpus {
        let mut profiles = self.profiles;
        for (id, (_, handle)) in self.handles {
            if let Some(p) = profiles.get_mut(&id) {
                p.handle = handle;
            }
        }
        // casefolded handle -> smallest user id carrying it
        let mut by_handle: BTreeMap<String, &str> = BTreeMap::new();
        for p in profiles.values() {
            by_handle.entry(p.handle.to_lowercase()).or_insert(&p.user_id);
        }

        let mut audiences = BTreeMap::new();
        for (original, mut sharers) in self.retweeters {
            let author = self.original_authors.get(&original).cloned().or_else(|| {
                self.referenced_handles
                    .get(&original)
                    .and_then(|hs| hs.iter().find_map(|h| by_handle.get(h)))
                    .map(|id| String::from(*id))
            });
            if let Some(author) = author {
                sharers.insert(author);
            }
            audiences.insert(
                original.clone(),
                TweetAudience {
                    original_tweet_id: original,
                    sharers,
                },
            );
        }

        Corpus {
            profiles,
            audiences,
            display: self.display,
            dropped_elements: self.dropped,
            tweet_count: self.tweets,
        }
    }
}

/// Aggregated corpus: everything downstream stages need.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub profiles: BTreeMap<String, UserProfile>,
    pub audiences: BTreeMap<String, TweetAudience>,
    pub display: DisplayForms,
    pub dropped_elements: u64,
    pub tweet_count: u64,
}

/// Aggregates deduplicated tweets into profiles and audiences.
pub fn build_profiles<'a, I>(tweets: I) -> Corpus
where
    I: IntoIterator<Item = &'a Tweet>,
{
    let mut builder = CorpusBuilder::new();
    for t in tweets {
        builder.add(t);
    }
    builder.finish()
}

/// Finds a user by exact id, else by casefolded handle (a leading `@` is ignored).
pub fn lookup_user<'a>(profiles: &'a BTreeMap<String, UserProfile>, id_or_handle: &str) -> Option<&'a str> {
    if let Some(p) = profiles.get(id_or_handle) {
        return Some(&p.user_id);
    }
    let wanted = id_or_handle.trim_start_matches('@').to_lowercase();
    profiles
        .values()
        .find(|p| p.handle.to_lowercase() == wanted)
        .map(|p| p.user_id.as_str())
}
