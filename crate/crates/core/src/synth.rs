//! Deterministic two-community tweet corpora with known stances.
//!
//! Each group has its own hashtag and website vocabulary plus a pool shared by
//! both groups; every element draw comes from the shared pool with probability
//! `overlap_fraction`. The first `broadcasters_per_group` users of a group
//! author the originals everyone retweets, and a retweet targets the other
//! group's broadcasters with probability `overlap_fraction`. Usage within each
//! pool is Zipf-distributed.
//!
//! Broadcaster originals are not part of the emitted corpus, as with a keyword
//! stream that only catches the retweets. Their authors are still known through
//! the retweeted handle, and the pool is large so each original has a small
//! audience.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labeling::Stance;
use crate::tweet::{RetweetRef, Tweet, DEFAULT_KEYWORDS};

const SECONDS_PER_DAY: i64 = 86_400;
const TIMELINE_IDS: u64 = 1_000_000_000;
const ORIGINAL_IDS: u64 = 2_000_000_000;

/// (id, hashtags, urls) of a never-emitted original.
type Original = (String, Vec<String>, Vec<String>);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabConfig {
    /// Elements available to each group, shared ones included.
    pub size: usize,
    /// Elements common to both groups.
    pub shared: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub users_per_group: usize,
    pub seeds_per_group: usize,
    pub broadcasters_per_group: usize,
    pub originals_per_broadcaster: usize,
    /// Inclusive range of timeline tweets per user.
    pub tweets_per_user: (u32, u32),
    pub hashtags: VocabConfig,
    pub websites: VocabConfig,
    pub max_hashtags_per_tweet: u32,
    pub url_probability: f64,
    pub overlap_fraction: f64,
    pub retweet_probability: f64,
    pub zipf_exponent: f64,
    /// First day of the corpus, in days since the Unix epoch.
    pub start_day: i64,
    pub days: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users_per_group: 1000,
            seeds_per_group: 20,
            broadcasters_per_group: 40,
            originals_per_broadcaster: 200,
            tweets_per_user: (20, 60),
            hashtags: VocabConfig { size: 60, shared: 10 },
            websites: VocabConfig { size: 40, shared: 8 },
            max_hashtags_per_tweet: 3,
            url_probability: 0.4,
            overlap_fraction: 0.0,
            retweet_probability: 0.7,
            zipf_exponent: 1.0,
            // 2018-09-28
            start_day: 17_802,
            days: 7,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("{0} must lie in [0, 1]")]
    Probability(&'static str),
    #[error("{what}: shared vocabulary {shared} exceeds vocabulary {size}")]
    SharedVocab {
        what: &'static str,
        shared: usize,
        size: usize,
    },
    #[error("{0}: vocabulary pool needed by the overlap fraction is empty")]
    EmptyPool(&'static str),
    #[error("infeasible config: {0}")]
    Infeasible(&'static str),
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, p) in [
            ("url_probability", self.url_probability),
            ("overlap_fraction", self.overlap_fraction),
            ("retweet_probability", self.retweet_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::Probability(name));
            }
        }
        for (what, v) in [("hashtags", self.hashtags), ("websites", self.websites)] {
            if v.shared > v.size {
                return Err(SynthError::SharedVocab {
                    what,
                    shared: v.shared,
                    size: v.size,
                });
            }
            if self.overlap_fraction > 0.0 && v.shared == 0 {
                return Err(SynthError::EmptyPool(what));
            }
            if self.overlap_fraction < 1.0 && v.size == v.shared {
                return Err(SynthError::EmptyPool(what));
            }
        }
        if self.users_per_group == 0 {
            return Err(SynthError::Infeasible("users_per_group must be positive"));
        }
        if self.seeds_per_group > self.users_per_group {
            return Err(SynthError::Infeasible("more seeds than users"));
        }
        if self.broadcasters_per_group == 0 || self.broadcasters_per_group > self.users_per_group {
            return Err(SynthError::Infeasible(
                "broadcasters_per_group must be in 1..=users_per_group",
            ));
        }
        if self.originals_per_broadcaster == 0 {
            return Err(SynthError::Infeasible(
                "originals_per_broadcaster must be positive",
            ));
        }
        if self.tweets_per_user.0 > self.tweets_per_user.1 {
            return Err(SynthError::Infeasible("tweets_per_user range is empty"));
        }
        if self.days == 0 {
            return Err(SynthError::Infeasible("days must be positive"));
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0) {
            return Err(SynthError::Infeasible(
                "zipf_exponent must be finite and nonnegative",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub tweets: Vec<Tweet>,
    /// Stance of every generated user.
    pub truth: BTreeMap<String, Stance>,
    /// The seed users, handle and stance, in generation order.
    pub seeds: Vec<(String, Stance)>,
    /// Tweets per day (days since the epoch).
    pub daily_plan: BTreeMap<i64, u64>,
}

fn zipf(n: usize, exponent: f64) -> Option<WeightedIndex<f64>> {
    (n > 0).then(|| {
        WeightedIndex::new((1..=n).map(|r| 1.0 / libm::pow(r as f64, exponent)))
            .expect("zipf weights are positive")
    })
}

struct Pool {
    exclusive: [Vec<String>; 2],
    shared: Vec<String>,
    exclusive_dist: Option<WeightedIndex<f64>>,
    shared_dist: Option<WeightedIndex<f64>>,
}

impl Pool {
    fn new(v: VocabConfig, exponent: f64, name: impl Fn(Option<Stance>, usize) -> String) -> Self {
        let own = v.size - v.shared;
        Self {
            exclusive: [Stance::Supp, Stance::Opp].map(|s| (0..own).map(|i| name(Some(s), i)).collect()),
            shared: (0..v.shared).map(|i| name(None, i)).collect(),
            exclusive_dist: zipf(own, exponent),
            shared_dist: zipf(v.shared, exponent),
        }
    }

    fn draw(&self, group: Stance, overlap: f64, rng: &mut ChaCha8Rng) -> &str {
        let use_shared = rng.gen::<f64>() < overlap;
        match (use_shared, &self.shared_dist, &self.exclusive_dist) {
            (true, Some(d), _) | (false, Some(d), None) => &self.shared[d.sample(rng)],
            (_, _, Some(d)) => &self.exclusive[group_index(group)][d.sample(rng)],
            (_, None, None) => unreachable!("validated config has a nonempty pool"),
        }
    }
}

fn group_index(s: Stance) -> usize {
    match s {
        Stance::Supp => 0,
        Stance::Opp => 1,
    }
}

fn group_word(s: Stance) -> &'static str {
    match s {
        Stance::Supp => "Supp",
        Stance::Opp => "Opp",
    }
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    hashtags: Pool,
    websites: Pool,
    next_id: u64,
    tweets: Vec<Tweet>,
    daily: BTreeMap<i64, u64>,
}

impl Generator<'_> {
    fn user_id(group: Stance, i: usize) -> String {
        format!("{}{:06}", if group == Stance::Supp { 1 } else { 2 }, i)
    }

    fn handle(group: Stance, i: usize) -> String {
        format!("{}User{:04}", group_word(group), i)
    }

    fn stamp(&mut self) -> i64 {
        let day = self.cfg.start_day + i64::from(self.rng.gen_range(0..self.cfg.days));
        *self.daily.entry(day).or_default() += 1;
        day * SECONDS_PER_DAY + self.rng.gen_range(0..SECONDS_PER_DAY)
    }

    fn text(&mut self) -> String {
        let kw = DEFAULT_KEYWORDS[self.rng.gen_range(0..DEFAULT_KEYWORDS.len())];
        format!("{kw} update {}", self.next_id)
    }

    fn elements(&mut self, group: Stance) -> (Vec<String>, Vec<String>) {
        let overlap = self.cfg.overlap_fraction;
        let n_tags = self.rng.gen_range(0..=self.cfg.max_hashtags_per_tweet);
        let mut hashtags = Vec::new();
        for _ in 0..n_tags {
            let tag = self.hashtags.draw(group, overlap, &mut self.rng);
            // a fifth of the uses are typed in lower case
            let tag = if self.rng.gen_bool(0.2) {
                tag.to_lowercase()
            } else {
                String::from(tag)
            };
            hashtags.push(tag);
        }
        let mut urls = Vec::new();
        if self.rng.gen::<f64>() < self.cfg.url_probability {
            let host = String::from(self.websites.draw(group, overlap, &mut self.rng));
            let www = if self.rng.gen_bool(0.5) { "www." } else { "" };
            let path = self.rng.gen_range(0..1_000_000u32);
            urls.push(format!("https://{www}{host}/story/{path}"));
        }
        (hashtags, urls)
    }

    fn original(&mut self, group: Stance, user: usize) {
        let (hashtags, urls) = self.elements(group);
        self.push(group, user, None, hashtags, urls);
    }

    fn push(
        &mut self,
        group: Stance,
        user: usize,
        retweet_of: Option<RetweetRef>,
        hashtags: Vec<String>,
        urls: Vec<String>,
    ) {
        self.next_id += 1;
        let tweet_id = format!("{}", TIMELINE_IDS + self.next_id);
        let mut text = self.text();
        if let Some(rt) = &retweet_of {
            text = format!("RT @{}: {text}", rt.user_handle);
        }
        let created_at = self.stamp();
        self.tweets.push(Tweet {
            tweet_id: tweet_id.clone(),
            author_id: Self::user_id(group, user),
            author_handle: Self::handle(group, user),
            text,
            created_at,
            retweet_of,
            hashtags,
            urls,
        });
    }
}

/// Generates a corpus. The same config always yields the same corpus.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let exponent = cfg.zipf_exponent;
    let mut g = Generator {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        hashtags: Pool::new(cfg.hashtags, exponent, |s, i| match s {
            Some(s) => format!("{}Tag{i}", group_word(s)),
            None => format!("SharedTag{i}"),
        }),
        websites: Pool::new(cfg.websites, exponent, |s, i| match s {
            Some(s) => format!("{}-news-{i}.com", group_word(s).to_lowercase()),
            None => format!("shared-news-{i}.com"),
        }),
        next_id: 0,
        tweets: Vec::new(),
        daily: BTreeMap::new(),
    };
    let groups = [Stance::Supp, Stance::Opp];

    // originals[group][broadcaster] available for retweeting
    let mut originals: [Vec<Vec<Original>>; 2] = [Vec::new(), Vec::new()];
    let mut original_id = ORIGINAL_IDS;
    for group in groups {
        for _ in 0..cfg.broadcasters_per_group {
            let mut mine = Vec::new();
            for _ in 0..cfg.originals_per_broadcaster {
                original_id += 1;
                let (tags, urls) = g.elements(group);
                mine.push((format!("{original_id}"), tags, urls));
            }
            originals[group_index(group)].push(mine);
        }
    }

    let broadcaster_dist = zipf(cfg.broadcasters_per_group, exponent).expect("validated");
    for group in groups {
        for user in 0..cfg.users_per_group {
            let n = g.rng.gen_range(cfg.tweets_per_user.0..=cfg.tweets_per_user.1);
            for _ in 0..n {
                if g.rng.gen::<f64>() >= cfg.retweet_probability {
                    g.original(group, user);
                    continue;
                }
                let target = if g.rng.gen::<f64>() < cfg.overlap_fraction {
                    group.other()
                } else {
                    group
                };
                let mut b = broadcaster_dist.sample(&mut g.rng);
                if target == group && b == user {
                    if cfg.broadcasters_per_group == 1 {
                        g.original(group, user);
                        continue;
                    }
                    b = (b + 1) % cfg.broadcasters_per_group;
                }
                let pool = &originals[group_index(target)][b];
                let (id, tags, urls) = pool[g.rng.gen_range(0..pool.len())].clone();
                let rt = RetweetRef {
                    tweet_id: id,
                    user_handle: Generator::handle(target, b),
                };
                g.push(group, user, Some(rt), tags, urls);
            }
        }
    }

    let mut truth = BTreeMap::new();
    let mut seeds = Vec::new();
    for group in groups {
        for user in 0..cfg.users_per_group {
            truth.insert(Generator::user_id(group, user), group);
        }
        for user in 0..cfg.seeds_per_group {
            seeds.push((Generator::handle(group, user), group));
        }
    }

    Ok(SynthCorpus {
        tweets: g.tweets,
        truth,
        seeds,
        daily_plan: g.daily,
    })
}
