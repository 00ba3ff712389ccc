//! Line-delimited JSON tweet input.

use std::collections::BTreeSet;
use std::io::BufRead;

use chrono::{DateTime, SecondsFormat};
use polarimeter_core::tweet::{keyword_filter, KeywordSet, RetweetRef};
use polarimeter_core::Tweet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Twitter exports carry ids as numbers or strings.
#[derive(Deserialize)]
#[serde(untagged)]
enum Id {
    Text(String),
    Number(u64),
}

impl Id {
    fn into_string(self) -> String {
        match self {
            Id::Text(s) => s,
            Id::Number(n) => n.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct RawTweet {
    id: Id,
    user_id: Id,
    user_screen_name: String,
    text: String,
    created_at: String,
    retweeted_status_id: Option<Id>,
    retweeted_user_screen_name: Option<String>,
    hashtags: Option<Vec<String>>,
    urls: Option<Vec<String>>,
}

#[derive(Serialize)]
struct OutTweet<'a> {
    id: &'a str,
    user_id: &'a str,
    user_screen_name: &'a str,
    text: &'a str,
    created_at: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    retweeted_status_id: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    retweeted_user_screen_name: Option<&'a str>,
    hashtags: &'a [String],
    urls: &'a [String],
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineErrorKind {
    #[error("blank line")]
    Blank,
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("field `{0}` must be nonempty and free of whitespace")]
    BadId(&'static str),
    #[error("created_at `{0}` is not an RFC 3339 timestamp")]
    Timestamp(String),
    #[error("retweeted_status_id and retweeted_user_screen_name must be given together")]
    RetweetPair,
}

/// A rejected input line. Ingestion carries on past it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct LineError {
    pub line: usize,
    pub kind: LineErrorKind,
}

fn check_id(value: String, field: &'static str) -> Result<String, LineErrorKind> {
    if value.is_empty() || value.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(LineErrorKind::BadId(field));
    }
    Ok(value)
}

/// Parses one JSON line. `line` is the 1-based line number used in errors.
pub fn parse_tweet_line(text: &str, line: usize) -> Result<Tweet, LineError> {
    let err = |kind| LineError { line, kind };
    if text.trim().is_empty() {
        return Err(err(LineErrorKind::Blank));
    }
    let raw: RawTweet = serde_json::from_str(text).map_err(|e| err(LineErrorKind::Json(e.to_string())))?;
    let created_at = DateTime::parse_from_rfc3339(raw.created_at.trim())
        .map_err(|_| err(LineErrorKind::Timestamp(raw.created_at.clone())))?
        .timestamp();
    let retweet_of = match (raw.retweeted_status_id, raw.retweeted_user_screen_name) {
        (None, None) => None,
        (Some(id), Some(handle)) => Some(RetweetRef {
            tweet_id: check_id(id.into_string(), "retweeted_status_id").map_err(err)?,
            user_handle: check_id(handle, "retweeted_user_screen_name").map_err(err)?,
        }),
        _ => return Err(err(LineErrorKind::RetweetPair)),
    };
    Ok(Tweet {
        tweet_id: check_id(raw.id.into_string(), "id").map_err(err)?,
        author_id: check_id(raw.user_id.into_string(), "user_id").map_err(err)?,
        author_handle: check_id(raw.user_screen_name, "user_screen_name").map_err(err)?,
        text: raw.text,
        created_at,
        retweet_of,
        hashtags: raw.hashtags.unwrap_or_default(),
        urls: raw.urls.unwrap_or_default(),
    })
}

/// Serializes a tweet as one JSON line (without the newline) that
/// [`parse_tweet_line`] reads back unchanged.
pub fn tweet_to_line(t: &Tweet) -> String {
    let created_at = DateTime::from_timestamp(t.created_at, 0)
        .expect("timestamp in chrono range")
        .to_rfc3339_opts(SecondsFormat::Secs, true);
    let out = OutTweet {
        id: &t.tweet_id,
        user_id: &t.author_id,
        user_screen_name: &t.author_handle,
        text: &t.text,
        created_at,
        retweeted_status_id: t.retweet_of.as_ref().map(|r| r.tweet_id.as_str()),
        retweeted_user_screen_name: t.retweet_of.as_ref().map(|r| r.user_handle.as_str()),
        hashtags: &t.hashtags,
        urls: &t.urls,
    };
    serde_json::to_string(&out).expect("tweet serializes")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub total_lines: u64,
    pub parsed: u64,
    pub skipped: u64,
    /// Parsed lines repeating an earlier tweet id.
    pub duplicates: u64,
    /// Parsed, unique lines without any keyword.
    pub filtered: u64,
}

impl IngestStats {
    pub fn kept(&self) -> u64 {
        self.parsed - self.duplicates - self.filtered
    }
}

#[derive(Debug, Default)]
pub struct Ingested {
    /// Kept tweets in input order.
    pub tweets: Vec<Tweet>,
    pub stats: IngestStats,
    pub errors: Vec<LineError>,
}

/// Parses lines in parallel, then drops repeated ids (first one wins) and
/// tweets failing the keyword filter.
pub fn ingest_lines(lines: &[String], keywords: &KeywordSet) -> Ingested {
    let parsed: Vec<Result<Tweet, LineError>> = lines
        .par_iter()
        .enumerate()
        .map(|(i, l)| parse_tweet_line(l, i + 1))
        .collect();

    let mut out = Ingested::default();
    out.stats.total_lines = lines.len() as u64;
    let mut seen = BTreeSet::new();
    for r in parsed {
        match r {
            Err(e) => {
                out.stats.skipped += 1;
                out.errors.push(e);
            }
            Ok(t) => {
                out.stats.parsed += 1;
                if !seen.insert(t.tweet_id.clone()) {
                    out.stats.duplicates += 1;
                } else if !keyword_filter(&t, keywords) {
                    out.stats.filtered += 1;
                } else {
                    out.tweets.push(t);
                }
            }
        }
    }
    out
}

pub fn ingest_reader<R: BufRead>(reader: R, keywords: &KeywordSet) -> std::io::Result<Ingested> {
    let lines = reader.lines().collect::<Result<Vec<_>, _>>()?;
    Ok(ingest_lines(&lines, keywords))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r##"{"id":"11","user_id":"7","user_screen_name":"Alice","text":"Kavanaugh confirmed today","created_at":"2018-09-28T14:00:00Z","retweeted_status_id":"5","retweeted_user_screen_name":"FoxNews","hashtags":["#MAGA","maga"],"urls":["https://www.foxnews.com/a"],"lang":"en"}"##;

    #[test]
    fn full_record() {
        let t = parse_tweet_line(FULL, 1).unwrap();
        assert_eq!(t.tweet_id, "11");
        assert_eq!(t.author_handle, "Alice");
        assert_eq!(t.created_at, 1_538_143_200);
        assert_eq!(
            t.retweet_of,
            Some(RetweetRef {
                tweet_id: "5".into(),
                user_handle: "FoxNews".into()
            })
        );
        assert_eq!(t.hashtags, vec!["#MAGA", "maga"]);
        assert_eq!(parse_tweet_line(&tweet_to_line(&t), 1).unwrap(), t);
    }

    #[test]
    fn optional_fields_and_numeric_ids() {
        let line = r#"{"id":12,"user_id":7,"user_screen_name":"a","text":"x","created_at":"2018-09-28T16:00:00+02:00"}"#;
        let t = parse_tweet_line(line, 3).unwrap();
        assert_eq!((t.tweet_id.as_str(), t.author_id.as_str()), ("12", "7"));
        assert_eq!(t.created_at, 1_538_143_200);
        assert!(t.retweet_of.is_none() && t.hashtags.is_empty() && t.urls.is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let truncated = &FULL[..40];
        assert!(matches!(
            parse_tweet_line(truncated, 9),
            Err(LineError {
                line: 9,
                kind: LineErrorKind::Json(_)
            })
        ));
        let missing = r#"{"id":"1","user_id":"2","text":"x","created_at":"2018-09-28T00:00:00Z"}"#;
        assert!(matches!(
            parse_tweet_line(missing, 2).unwrap_err().kind,
            LineErrorKind::Json(_)
        ));
        let half = r#"{"id":"1","user_id":"2","user_screen_name":"u","text":"x","created_at":"2018-09-28T00:00:00Z","retweeted_status_id":"4"}"#;
        assert_eq!(
            parse_tweet_line(half, 4).unwrap_err().kind,
            LineErrorKind::RetweetPair
        );
        let bad_time =
            r#"{"id":"1","user_id":"2","user_screen_name":"u","text":"x","created_at":"yesterday"}"#;
        assert!(matches!(
            parse_tweet_line(bad_time, 5).unwrap_err().kind,
            LineErrorKind::Timestamp(_)
        ));
        let bad_id = r#"{"id":"1 2","user_id":"2","user_screen_name":"u","text":"x","created_at":"2018-09-28T00:00:00Z"}"#;
        assert_eq!(
            parse_tweet_line(bad_id, 6).unwrap_err().kind,
            LineErrorKind::BadId("id")
        );
    }

    #[test]
    fn stats_add_up() {
        let other = FULL
            .replace("\"11\"", "\"12\"")
            .replace("Kavanaugh confirmed today", "hello world");
        let lines: Vec<String> = vec![FULL.into(), FULL.into(), "{oops".into(), String::new(), other];
        let got = ingest_lines(&lines, &KeywordSet::default());
        assert_eq!(
            got.stats,
            IngestStats {
                total_lines: 5,
                parsed: 3,
                skipped: 2,
                duplicates: 1,
                filtered: 1
            }
        );
        assert_eq!(got.stats.kept(), 1);
        assert_eq!(got.tweets.len(), 1);
        assert_eq!(got.errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![3, 4]);
    }
}
