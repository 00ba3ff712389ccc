//! Seed labels and retweet-overlap label propagation.
//!
//! A user is labeled when enough of the distinct originals they retweeted were
//! also shared (authored or retweeted) by users already on one side, and none
//! were shared by the other side. Updates are synchronous: every user in an
//! iteration is judged against the labels as they stood when it began.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{lookup_user, TweetAudience, UserProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stance {
    #[serde(rename = "SUPP")]
    Supp,
    #[serde(rename = "OPP")]
    Opp,
}

impl Stance {
    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Supp => "SUPP",
            Stance::Opp => "OPP",
        }
    }

    pub fn other(self) -> Stance {
        match self {
            Stance::Supp => Stance::Opp,
            Stance::Opp => Stance::Supp,
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which labeling stage produced a label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Seed,
    /// Propagation iteration, counted from 1.
    Propagation(u32),
    Classifier,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Seed => "seed",
            Provenance::Propagation(_) => "propagation",
            Provenance::Classifier => "classifier",
        }
    }

    pub fn iteration(self) -> u32 {
        match self {
            Provenance::Propagation(k) => k,
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StanceLabel {
    Labeled {
        stance: Stance,
        provenance: Provenance,
    },
    /// Barred from labeling; only seeds can be excluded.
    Excluded,
    #[default]
    Unlabeled,
}

impl StanceLabel {
    pub fn seed(stance: Stance) -> Self {
        StanceLabel::Labeled {
            stance,
            provenance: Provenance::Seed,
        }
    }

    pub fn stance(self) -> Option<Stance> {
        match self {
            StanceLabel::Labeled { stance, .. } => Some(stance),
            _ => None,
        }
    }

    pub fn provenance(self) -> Option<Provenance> {
        match self {
            StanceLabel::Labeled { provenance, .. } => Some(provenance),
            StanceLabel::Excluded => Some(Provenance::Seed),
            StanceLabel::Unlabeled => None,
        }
    }

    /// Token used in label files: SUPP, OPP, EXCLUDED or UNLABELED.
    pub fn token(self) -> &'static str {
        match self {
            StanceLabel::Labeled { stance, .. } => stance.as_str(),
            StanceLabel::Excluded => "EXCLUDED",
            StanceLabel::Unlabeled => "UNLABELED",
        }
    }
}

/// Label assignment; users without an entry are unlabeled.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Labels {
    map: BTreeMap<String, StanceLabel>,
}

impl Labels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, user: &str) -> StanceLabel {
        self.map.get(user).copied().unwrap_or_default()
    }

    pub fn stance(&self, user: &str) -> Option<Stance> {
        self.get(user).stance()
    }

    pub fn set(&mut self, user: impl Into<String>, label: StanceLabel) {
        let user = user.into();
        if label == StanceLabel::Unlabeled {
            self.map.remove(&user);
        } else {
            self.map.insert(user, label);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, StanceLabel)> {
        self.map.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn count(&self, stance: Stance) -> usize {
        self.map.values().filter(|l| l.stance() == Some(stance)).count()
    }
}

impl FromIterator<(String, StanceLabel)> for Labels {
    fn from_iter<T: IntoIterator<Item = (String, StanceLabel)>>(iter: T) -> Self {
        let mut labels = Labels::new();
        for (u, l) in iter {
            labels.set(u, l);
        }
        labels
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedStance {
    Supp,
    Opp,
    Excluded,
}

impl FromStr for SeedStance {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.to_ascii_uppercase().as_str() {
            "SUPP" => Ok(SeedStance::Supp),
            "OPP" => Ok(SeedStance::Opp),
            "EXCLUDED" => Ok(SeedStance::Excluded),
            _ => Err(()),
        }
    }
}

impl SeedStance {
    fn label(self) -> StanceLabel {
        match self {
            SeedStance::Supp => StanceLabel::seed(Stance::Supp),
            SeedStance::Opp => StanceLabel::seed(Stance::Opp),
            SeedStance::Excluded => StanceLabel::Excluded,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedRow {
    pub line: usize,
    pub user: String,
    pub stance: SeedStance,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeedError {
    #[error("seed line {line}: unknown stance `{token}` (expected SUPP, OPP or EXCLUDED)")]
    UnknownStance { line: usize, token: String },
    #[error("seed line {line}: expected `<user> <stance>`")]
    Malformed { line: usize },
    #[error("seed user `{user}` has conflicting stances (lines {first} and {second})")]
    Conflict {
        user: String,
        first: usize,
        second: usize,
    },
    #[error("seed file has no SUPP or OPP rows")]
    Empty,
}

/// Parses seed rows: `<handle-or-id> <SUPP|OPP|EXCLUDED>`, tab or space separated.
/// Blank lines and `#` comments are skipped.
pub fn parse_seeds(text: &str) -> Result<Vec<SeedRow>, SeedError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(user), Some(token), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(SeedError::Malformed { line: line_no });
        };
        let stance = token.parse().map_err(|_| SeedError::UnknownStance {
            line: line_no,
            token: token.to_string(),
        })?;
        rows.push(SeedRow {
            line: line_no,
            user: user.to_string(),
            stance,
        });
    }
    Ok(rows)
}

/// Result of resolving seed rows against the corpus.
#[derive(Clone, Debug, Default)]
pub struct SeedSet {
    pub labels: Labels,
    /// Rows whose user is not in the corpus; kept under their raw name.
    pub unresolved: Vec<String>,
}

/// Maps seed rows to user ids (by id first, then casefolded handle).
pub fn resolve_seeds(
    rows: &[SeedRow],
    profiles: &BTreeMap<String, UserProfile>,
) -> Result<SeedSet, SeedError> {
    let mut out = SeedSet::default();
    let mut first_line: BTreeMap<String, (usize, SeedStance)> = BTreeMap::new();
    for row in rows {
        let id = match lookup_user(profiles, &row.user) {
            Some(id) => String::from(id),
            None => {
                out.unresolved.push(row.user.clone());
                row.user.clone()
            }
        };
        match first_line.get(&id) {
            Some(&(line, stance)) if stance != row.stance => {
                return Err(SeedError::Conflict {
                    user: id,
                    first: line,
                    second: row.line,
                })
            }
            Some(_) => {}
            None => {
                first_line.insert(id.clone(), (row.line, row.stance));
                out.labels.set(id, row.stance.label());
            }
        }
    }
    if out.labels.count(Stance::Supp) + out.labels.count(Stance::Opp) == 0 {
        return Err(SeedError::Empty);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub supp_threshold: u32,
    pub opp_threshold: u32,
    pub max_iterations: u32,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            supp_threshold: 15,
            opp_threshold: 7,
            max_iterations: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropagationError {
    #[error("propagation thresholds and iteration cap must be at least 1")]
    InvalidConfig,
    #[error("propagation needs at least one SUPP or OPP seed")]
    NoSeeds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IterationStats {
    pub iteration: u32,
    pub added_supp: usize,
    pub added_opp: usize,
}

impl IterationStats {
    pub fn added(&self) -> usize {
        self.added_supp + self.added_opp
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropagationOutcome {
    pub labels: Labels,
    /// One entry per iteration run, including the final one that added nothing.
    pub trace: Vec<IterationStats>,
    /// False when `max_iterations` stopped the loop before a fixpoint.
    pub converged: bool,
}

/// Overlap counts (S, O) of one user against a label snapshot.
pub fn overlap_counts(
    profile: &UserProfile,
    audiences: &BTreeMap<String, TweetAudience>,
    labels: &Labels,
) -> (u32, u32) {
    let (mut supp, mut opp) = (0, 0);
    for t in &profile.retweeted_tweet_ids {
        let Some(aud) = audiences.get(t) else { continue };
        let (s, o) = audience_sides(aud, labels);
        supp += u32::from(s);
        opp += u32::from(o);
    }
    (supp, opp)
}

fn audience_sides(aud: &TweetAudience, labels: &Labels) -> (bool, bool) {
    let (mut s, mut o) = (false, false);
    for u in &aud.sharers {
        match labels.stance(u) {
            Some(Stance::Supp) => s = true,
            Some(Stance::Opp) => o = true,
            None => {}
        }
        if s && o {
            break;
        }
    }
    (s, o)
}

pub fn propagate(
    profiles: &BTreeMap<String, UserProfile>,
    audiences: &BTreeMap<String, TweetAudience>,
    seeds: &Labels,
    cfg: &PropagationConfig,
) -> Result<PropagationOutcome, PropagationError> {
    if cfg.supp_threshold == 0 || cfg.opp_threshold == 0 || cfg.max_iterations == 0 {
        return Err(PropagationError::InvalidConfig);
    }
    if seeds.count(Stance::Supp) + seeds.count(Stance::Opp) == 0 {
        return Err(PropagationError::NoSeeds);
    }

    let mut labels = seeds.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    for iteration in 1..=cfg.max_iterations {
        // which originals each side currently touches
        let sides: BTreeMap<&str, (bool, bool)> = audiences
            .iter()
            .map(|(t, aud)| (t.as_str(), audience_sides(aud, &labels)))
            .collect();

        let mut added = Vec::new();
        for (user, profile) in profiles {
            if labels.get(user) != StanceLabel::Unlabeled {
                continue;
            }
            let (mut s, mut o) = (0u32, 0u32);
            for t in &profile.retweeted_tweet_ids {
                if let Some(&(ts, to)) = sides.get(t.as_str()) {
                    s += u32::from(ts);
                    o += u32::from(to);
                }
            }
            let supp = s >= cfg.supp_threshold && o == 0;
            let opp = o >= cfg.opp_threshold && s == 0;
            let stance = match (supp, opp) {
                (true, false) => Stance::Supp,
                (false, true) => Stance::Opp,
                _ => continue,
            };
            added.push((user.clone(), stance));
        }

        let stats = IterationStats {
            iteration,
            added_supp: added.iter().filter(|(_, s)| *s == Stance::Supp).count(),
            added_opp: added.iter().filter(|(_, s)| *s == Stance::Opp).count(),
        };
        trace.push(stats);
        if added.is_empty() {
            converged = true;
            break;
        }
        for (user, stance) in added {
            labels.set(
                user,
                StanceLabel::Labeled {
                    stance,
                    provenance: Provenance::Propagation(iteration),
                },
            );
        }
    }

    Ok(PropagationOutcome {
        labels,
        trace,
        converged,
    })
}
