//! Valence scores and the five-way valence binning.
//!
//! The valence of an element is `2a/(a+b) - 1` where `a` and `b` are the
//! element's usage rates within SUPP and OPP tweets. It runs from -1 (only
//! OPP uses it) to +1 (only SUPP uses it).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::element::ElementKind;
use crate::graph::UserProfile;
use crate::labeling::{Labels, Stance};

/// Usage of one element in each group, with the per-group totals over the whole kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ElementCounts {
    pub tf_supp: u64,
    pub tf_opp: u64,
    pub total_supp: u64,
    pub total_opp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ValenceError {
    #[error("group totals must be positive (an empty SUPP or OPP group)")]
    EmptyGroup,
    #[error("element has zero usage in both groups")]
    Unused,
    #[error("element frequency exceeds its group total")]
    Inconsistent,
    #[error("valence {0} lies outside [-1, 1]")]
    OutOfRange(f64),
}

/// Valence in `[-1, 1]`.
///
/// Evaluated as `(a - b) / (a + b)`, which equals `2a/(a+b) - 1` and is exactly
/// antisymmetric in floating point: swapping the groups negates the result bit
/// for bit.
pub fn compute_valence(c: ElementCounts) -> Result<f64, ValenceError> {
    if c.total_supp == 0 || c.total_opp == 0 {
        return Err(ValenceError::EmptyGroup);
    }
    if c.tf_supp + c.tf_opp == 0 {
        return Err(ValenceError::Unused);
    }
    if c.tf_supp > c.total_supp || c.tf_opp > c.total_opp {
        return Err(ValenceError::Inconsistent);
    }
    let a = c.tf_supp as f64 / c.total_supp as f64;
    let b = c.tf_opp as f64 / c.total_opp as f64;
    Ok((a - b) / (a + b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValenceBin {
    StrongOpp,
    Opp,
    Neutral,
    Supp,
    StrongSupp,
}

impl ValenceBin {
    /// Strong OPP first, strong SUPP last.
    pub const ALL: [ValenceBin; 5] = [
        ValenceBin::StrongOpp,
        ValenceBin::Opp,
        ValenceBin::Neutral,
        ValenceBin::Supp,
        ValenceBin::StrongSupp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValenceBin::StrongOpp => "strong_opp",
            ValenceBin::Opp => "opp",
            ValenceBin::Neutral => "neutral",
            ValenceBin::Supp => "supp",
            ValenceBin::StrongSupp => "strong_supp",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_extreme(self) -> bool {
        matches!(self, ValenceBin::StrongOpp | ValenceBin::StrongSupp)
    }
}

impl fmt::Display for ValenceBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValenceBin {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        ValenceBin::ALL.into_iter().find(|b| b.as_str() == s).ok_or(())
    }
}

/// Half-open bins of width 0.4 from -1; the top bin also holds +1.
pub fn bin_of(v: f64) -> Result<ValenceBin, ValenceError> {
    if !(-1.0..=1.0).contains(&v) {
        return Err(ValenceError::OutOfRange(v));
    }
    Ok(if v < -0.6 {
        ValenceBin::StrongOpp
    } else if v < -0.2 {
        ValenceBin::Opp
    } else if v < 0.2 {
        ValenceBin::Neutral
    } else if v < 0.6 {
        ValenceBin::Supp
    } else {
        ValenceBin::StrongSupp
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValenceRow {
    pub key: String,
    pub tf_supp: u64,
    pub tf_opp: u64,
    pub valence: f64,
    pub bin: ValenceBin,
}

impl ValenceRow {
    pub fn usage(&self) -> u64 {
        self.tf_supp + self.tf_opp
    }
}

/// Scored elements of one kind, sorted by key.
#[derive(Clone, Debug, PartialEq)]
pub struct ValenceTable {
    pub kind: ElementKind,
    pub total_supp: u64,
    pub total_opp: u64,
    pub rows: Vec<ValenceRow>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("no {0} users are labeled")]
    MissingGroup(Stance),
    #[error("{group} users never used any {kind}")]
    NoUsage { group: Stance, kind: ElementKind },
    #[error(transparent)]
    Valence(#[from] ValenceError),
}

/// Counts element usage within SUPP and OPP users' tweets and scores every
/// element with combined usage of at least `min_support` tweets.
pub fn build_valence_table(
    profiles: &BTreeMap<String, UserProfile>,
    labels: &Labels,
    kind: ElementKind,
    min_support: u64,
) -> Result<ValenceTable, TableError> {
    for side in [Stance::Supp, Stance::Opp] {
        if labels.count(side) == 0 {
            return Err(TableError::MissingGroup(side));
        }
    }

    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    let (mut total_supp, mut total_opp) = (0u64, 0u64);
    for (user, profile) in profiles {
        let Some(stance) = labels.stance(user) else {
            continue;
        };
        for (key, c) in profile.counts_of(kind) {
            let slot = counts.entry(key.key.as_str()).or_default();
            match stance {
                Stance::Supp => {
                    slot.0 += c;
                    total_supp += c;
                }
                Stance::Opp => {
                    slot.1 += c;
                    total_opp += c;
                }
            }
        }
    }
    if total_supp == 0 {
        return Err(TableError::NoUsage {
            group: Stance::Supp,
            kind,
        });
    }
    if total_opp == 0 {
        return Err(TableError::NoUsage {
            group: Stance::Opp,
            kind,
        });
    }

    let mut rows = Vec::new();
    for (key, (tf_supp, tf_opp)) in counts {
        if tf_supp + tf_opp < min_support {
            continue;
        }
        let valence = compute_valence(ElementCounts {
            tf_supp,
            tf_opp,
            total_supp,
            total_opp,
        })?;
        rows.push(ValenceRow {
            key: String::from(key),
            tf_supp,
            tf_opp,
            valence,
            bin: bin_of(valence)?,
        });
    }
    Ok(ValenceTable {
        kind,
        total_supp,
        total_opp,
        rows,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BinStats {
    pub element_count: u64,
    pub usage: u64,
}

/// Element count and summed usage per bin, indexed like [`ValenceBin::ALL`].
pub fn bin_histogram(table: &ValenceTable) -> [BinStats; 5] {
    let mut out = [BinStats::default(); 5];
    for row in &table.rows {
        let slot = &mut out[row.bin.index()];
        slot.element_count += 1;
        slot.usage += row.usage();
    }
    out
}

/// Top `k` rows per bin by usage, ties broken by key.
pub fn top_k_per_bin(table: &ValenceTable, k: usize) -> [Vec<&ValenceRow>; 5] {
    let mut out: [Vec<&ValenceRow>; 5] = Default::default();
    for row in &table.rows {
        out[row.bin.index()].push(row);
    }
    for list in &mut out {
        list.sort_by(|a, b| b.usage().cmp(&a.usage()).then_with(|| a.key.cmp(&b.key)));
        list.truncate(k);
    }
    out
}
