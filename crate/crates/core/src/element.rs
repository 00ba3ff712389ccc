//! Canonical element keys: hashtags, retweeted accounts and cited websites.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The three kinds of element a user can be characterised by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Hashtag,
    #[serde(rename = "account")]
    RetweetedAccount,
    Website,
}

impl ElementKind {
    pub const ALL: [ElementKind; 3] = [
        ElementKind::Hashtag,
        ElementKind::RetweetedAccount,
        ElementKind::Website,
    ];

    /// Name used in artifact file names and on the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Hashtag => "hashtag",
            ElementKind::RetweetedAccount => "account",
            ElementKind::Website => "website",
        }
    }

    /// One-letter tag used in compact serialized keys (`h:maga`).
    pub fn code(self) -> char {
        match self {
            ElementKind::Hashtag => 'h',
            ElementKind::RetweetedAccount => 'a',
            ElementKind::Website => 'w',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'h' => Some(ElementKind::Hashtag),
            'a' => Some(ElementKind::RetweetedAccount),
            'w' => Some(ElementKind::Website),
            _ => None,
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown element kind `{0}` (expected hashtag, account or website)")]
pub struct UnknownKind(pub String);

impl FromStr for ElementKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hashtag" | "hashtags" => Ok(ElementKind::Hashtag),
            "account" | "accounts" | "retweeted_account" | "retweet" => Ok(ElementKind::RetweetedAccount),
            "website" | "websites" | "url" => Ok(ElementKind::Website),
            _ => Err(UnknownKind(s.to_string())),
        }
    }
}

/// A canonicalized element. Ordering is by kind, then key.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementKey {
    pub kind: ElementKind,
    pub key: String,
}

impl ElementKey {
    /// Builds a key without normalizing. Callers must already hold a canonical key.
    pub fn new(kind: ElementKind, key: impl Into<String>) -> Self {
        Self {
            kind,
            key: key.into(),
        }
    }

    /// Parses the compact `h:key` form written by [`fmt::Display`].
    pub fn parse_compact(s: &str) -> Option<Self> {
        let mut chars = s.chars();
        let kind = ElementKind::from_code(chars.next()?)?;
        let rest = chars.as_str().strip_prefix(':')?;
        if rest.is_empty() {
            return None;
        }
        Some(Self::new(kind, rest))
    }
}

impl fmt::Display for ElementKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.code(), self.key)
    }
}

fn is_token_char(c: char) -> bool {
    !(c.is_whitespace() || c.is_control() || c == '=')
}

/// Casefolds a hashtag and strips its leading `#`.
///
/// Returns `None` for empty tags or tags containing whitespace or control
/// characters, which cannot come from a tokenized hashtag entity.
pub fn normalize_hashtag(raw: &str) -> Option<ElementKey> {
    let trimmed = raw.trim();
    let body = trimmed
        .strip_prefix('#')
        .or_else(|| trimmed.strip_prefix('\u{ff03}'))
        .unwrap_or(trimmed);
    if body.is_empty() || !body.chars().all(is_token_char) {
        return None;
    }
    Some(ElementKey::new(ElementKind::Hashtag, body.to_lowercase()))
}

/// Casefolds a screen name and strips its leading `@`.
pub fn normalize_handle(raw: &str) -> Option<ElementKey> {
    let trimmed = raw.trim();
    let body = trimmed.strip_prefix('@').unwrap_or(trimmed);
    if body.is_empty() || !body.chars().all(is_token_char) {
        return None;
    }
    Some(ElementKey::new(
        ElementKind::RetweetedAccount,
        body.to_lowercase(),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UrlError {
    #[error("url `{0}` has no http(s) scheme")]
    Scheme(String),
    #[error("url `{0}` has an empty or invalid host")]
    Host(String),
}

/// Reduces an expanded URL to a website key.
///
/// The scheme, userinfo, port and a leading `www.` are dropped and the host is
/// casefolded. For `twitter.com` the first path segment is kept, casefolded,
/// with a trailing slash (`twitter.com/thehill/`), since links to tweets
/// identify the account rather than the site. Shortener hosts such as
/// `wapo.st` are kept as-is.
pub fn normalize_url(url: &str) -> Result<ElementKey, UrlError> {
    let url = url.trim();
    let (scheme, rest) = url
        .split_once("://")
        .ok_or_else(|| UrlError::Scheme(url.to_string()))?;
    if !(scheme.eq_ignore_ascii_case("http") || scheme.eq_ignore_ascii_case("https")) {
        return Err(UrlError::Scheme(url.to_string()));
    }

    let authority_end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let (authority, tail) = rest.split_at(authority_end);
    let host_port = authority.rsplit_once('@').map_or(authority, |(_, h)| h);
    let host = if host_port.starts_with('[') {
        // bracketed IPv6 literal
        match host_port.find(']') {
            Some(end) => &host_port[..=end],
            None => return Err(UrlError::Host(url.to_string())),
        }
    } else {
        host_port.split(':').next().unwrap_or("")
    };

    let mut host = host.to_lowercase();
    while host.ends_with('.') {
        host.pop();
    }
    if let Some(stripped) = host.strip_prefix("www.") {
        host = stripped.to_string();
    }
    let valid = !host.is_empty()
        && !host.starts_with('.')
        && host
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '-' | '.' | '_' | '[' | ']' | ':'));
    if !valid {
        return Err(UrlError::Host(url.to_string()));
    }

    if host == "twitter.com" {
        let path = tail.split(['?', '#']).next().unwrap_or("");
        if let Some(segment) = path.split('/').find(|s| !s.is_empty()) {
            if segment.chars().all(is_token_char) {
                return Ok(ElementKey::new(
                    ElementKind::Website,
                    format!("twitter.com/{}/", segment.to_lowercase()),
                ));
            }
        }
    }
    Ok(ElementKey::new(ElementKind::Website, host))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn site(s: &str) -> String {
        normalize_url(s).unwrap().key
    }

    #[test]
    fn strips_scheme_and_www() {
        assert_eq!(
            site("https://www.washingtonpost.com/politics/x"),
            "washingtonpost.com"
        );
        assert_eq!(site("HTTP://WWW.Foxnews.COM:8080/a?b=c"), "foxnews.com");
        assert_eq!(site("https://user:pw@nytimes.com"), "nytimes.com");
    }

    #[test]
    fn twitter_keeps_handle_segment() {
        assert_eq!(
            site("https://twitter.com/thehill/status/123"),
            "twitter.com/thehill/"
        );
        assert_eq!(
            site("https://www.twitter.com/RealDonaldTrump"),
            "twitter.com/realdonaldtrump/"
        );
        assert_eq!(site("https://twitter.com/"), "twitter.com");
        assert_eq!(site("https://twitter.com?lang=en"), "twitter.com");
    }

    #[test]
    fn shorteners_are_not_expanded() {
        assert_eq!(site("http://wapo.st/2x"), "wapo.st");
        assert_eq!(site("https://hill.cm/abc"), "hill.cm");
    }

    #[test]
    fn rejects_bad_urls() {
        assert!(matches!(
            normalize_url("ftp://example.com"),
            Err(UrlError::Scheme(_))
        ));
        assert!(matches!(
            normalize_url("example.com/path"),
            Err(UrlError::Scheme(_))
        ));
        assert!(matches!(normalize_url("https:///x"), Err(UrlError::Host(_))));
        assert!(matches!(
            normalize_url("https://bad host/"),
            Err(UrlError::Host(_))
        ));
    }

    /// Host extraction agrees with the `url` crate's parser on ordinary URLs.
    #[test]
    fn host_matches_reference_parser() {
        let cases = [
            "https://www.washingtonpost.com/politics/x",
            "http://wapo.st/2x",
            "https://EDITION.cnn.com:443/2018/10/06/politics/index.html",
            "https://user@www.breitbart.com/?q=1#frag",
            "https://abcnews.go.com",
            "http://127.0.0.1:8000/x",
            "https://dailymail.co.uk./news",
        ];
        for case in cases {
            let parsed = url::Url::parse(case).unwrap();
            let mut host = parsed.host_str().unwrap().to_string();
            if let Some(h) = host.strip_suffix('.') {
                host = h.to_string();
            }
            let expected = host.strip_prefix("www.").unwrap_or(&host);
            assert_eq!(site(case), expected, "{case}");
        }
    }

    #[test]
    fn hashtags_and_handles_casefold() {
        let k = normalize_hashtag("#MAGA").unwrap();
        assert_eq!(k, ElementKey::new(ElementKind::Hashtag, "maga"));
        assert_eq!(normalize_hashtag("maga").unwrap(), k);
        assert_eq!(normalize_hashtag("#"), None);
        assert_eq!(normalize_hashtag("two words"), None);
        assert_eq!(normalize_handle("@FoxNews").unwrap().key, "foxnews");
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("hashtag".parse::<ElementKind>().unwrap(), ElementKind::Hashtag);
        assert_eq!(
            "Account".parse::<ElementKind>().unwrap(),
            ElementKind::RetweetedAccount
        );
        assert!("emoji".parse::<ElementKind>().is_err());
        let key = ElementKey::new(ElementKind::Website, "twitter.com/thehill/");
        assert_eq!(ElementKey::parse_compact(&key.to_string()), Some(key));
    }

    proptest! {
        #[test]
        fn url_normalization_is_idempotent(
            sub in prop::option::of("(www|news|m)"),
            host in "[a-zA-Z][a-zA-Z0-9-]{0,12}\\.(com|org|co\\.uk|st)",
            path in "(/[a-zA-Z0-9_]{0,8}){0,3}",
            tw in any::<bool>(),
        ) {
            let full = if tw {
                format!("https://twitter.com{path}")
            } else {
                match sub {
                    Some(s) => format!("https://{s}.{host}{path}"),
                    None => format!("http://{host}{path}"),
                }
            };
            let key = normalize_url(&full).unwrap();
            let again = normalize_url(&format!("https://{}", key.key)).unwrap();
            prop_assert_eq!(again, key);
        }

        #[test]
        fn hashtag_normalization_is_idempotent(raw in "#?[a-zA-Z0-9_ÄÖÜäöü]{1,20}") {
            let key = normalize_hashtag(&raw).unwrap();
            prop_assert_eq!(normalize_hashtag(&key.key).unwrap(), key.clone());
            prop_assert!(!key.key.starts_with('#'));
            prop_assert_eq!(key.key.to_lowercase(), key.key);
        }
    }
}
