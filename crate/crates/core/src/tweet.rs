use alloc::string::String;
use alloc::vec::Vec;

use crate::element::{normalize_handle, normalize_hashtag, normalize_url, ElementKey};

/// The topical keywords used to select tweets about the confirmation.
pub const DEFAULT_KEYWORDS: [&str; 26] = [
    "Kavanaugh",
    "Ford",
    "Supreme",
    "judiciary",
    "Blasey",
    "Grassley",
    "Hatch",
    "Graham",
    "Cornyn",
    "Lee",
    "Cruz",
    "Sasse",
    "Flake",
    "Crapo",
    "Tillis",
    "Kennedy",
    "Feinstein",
    "Leahy",
    "Durbin",
    "Whitehouse",
    "Klobuchar",
    "Coons",
    "Blumenthal",
    "Hirono",
    "Booker",
    "Harris",
];

/// The original a retweet points at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RetweetRef {
    pub tweet_id: String,
    pub user_handle: String,
}

/// One ingested tweet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tweet {
    pub tweet_id: String,
    pub author_id: String,
    pub author_handle: String,
    pub text: String,
    /// Seconds since the Unix epoch, UTC.
    pub created_at: i64,
    pub retweet_of: Option<RetweetRef>,
    pub hashtags: Vec<String>,
    pub urls: Vec<String>,
}

impl Tweet {
    pub fn is_retweet(&self) -> bool {
        self.retweet_of.is_some()
    }
}

/// Casefolded keyword set for [`keyword_filter`].
#[derive(Clone, Debug)]
pub struct KeywordSet {
    folded: Vec<String>,
}

impl KeywordSet {
    /// Returns `None` when no non-blank keyword is given.
    pub fn new<I, S>(keywords: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut folded: Vec<String> = keywords
            .into_iter()
            .map(|k| k.as_ref().trim().to_lowercase())
            .filter(|k| !k.is_empty())
            .collect();
        folded.sort();
        folded.dedup();
        (!folded.is_empty()).then_some(Self { folded })
    }

    pub fn keywords(&self) -> &[String] {
        &self.folded
    }
}

impl Default for KeywordSet {
    fn default() -> Self {
        Self::new(DEFAULT_KEYWORDS).expect("default keyword list is nonempty")
    }
}

/// True iff the casefolded text contains any keyword as a substring.
pub fn keyword_filter(tweet: &Tweet, keywords: &KeywordSet) -> bool {
    let text = tweet.text.to_lowercase();
    keywords.folded.iter().any(|k| text.contains(k.as_str()))
}

/// Element occurrences of one tweet, one entry per occurrence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Extraction {
    pub occurrences: Vec<ElementKey>,
    /// URLs (and malformed hashtags) that could not be canonicalized.
    pub dropped: usize,
}

pub fn extract_elements(tweet: &Tweet) -> Extraction {
    let mut out = Extraction::default();
    for tag in &tweet.hashtags {
        match normalize_hashtag(tag) {
            Some(key) => out.occurrences.push(key),
            None => out.dropped += 1,
        }
    }
    for url in &tweet.urls {
        match normalize_url(url) {
            Ok(key) => out.occurrences.push(key),
            Err(_) => out.dropped += 1,
        }
    }
    if let Some(rt) = &tweet.retweet_of {
        match normalize_handle(&rt.user_handle) {
            Some(key) => out.occurrences.push(key),
            None => out.dropped += 1,
        }
    }
    out
}

#[cfg(test)]
pub(crate) fn test_tweet(id: &str, author: &str) -> Tweet {
    Tweet {
        tweet_id: id.into(),
        author_id: author.into(),
        author_handle: author.into(),
        text: String::from("Kavanaugh"),
        created_at: 1_538_092_800,
        retweet_of: None,
        hashtags: Vec::new(),
        urls: Vec::new(),
    }
}
