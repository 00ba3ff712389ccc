//! Human-readable summary tables.

use std::collections::BTreeMap;

use chrono::DateTime;
use polarimeter_core::graph::DisplayForms;
use polarimeter_core::valence::{bin_histogram, top_k_per_bin, ValenceBin, ValenceTable};
use polarimeter_core::{ElementKey, Labels, Provenance, Stance, StanceLabel, Tweet, UserProfile};

use crate::formats::real;

pub const NOT_LISTED: &str = "not listed";

/// Tweets per UTC calendar day, ascending.
pub fn daily_counts<'a>(tweets: impl IntoIterator<Item = &'a Tweet>) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for t in tweets {
        let day = DateTime::from_timestamp(t.created_at, 0)
            .expect("timestamp in chrono range")
            .format("%Y-%m-%d")
            .to_string();
        *out.entry(day).or_default() += 1;
    }
    out
}

pub fn daily_counts_tsv(days: &BTreeMap<String, u64>) -> String {
    let mut out = String::from("date\tcount\n");
    for (day, n) in days {
        out.push_str(&format!("{day}\t{n}\n"));
    }
    out.push_str(&format!("total\t{}\n", days.values().sum::<u64>()));
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GroupSummary {
    pub seed: u64,
    pub propagation: u64,
    pub classifier: u64,
    /// Tweets written by the group's users.
    pub tweets: u64,
}

impl GroupSummary {
    pub fn users(&self) -> u64 {
        self.seed + self.propagation + self.classifier
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StageSummary {
    pub supp: GroupSummary,
    pub opp: GroupSummary,
    pub excluded: u64,
}

/// Labeled users by stance and provenance. Tweets count only users present in `profiles`.
pub fn stage_summary(labels: &Labels, profiles: &BTreeMap<String, UserProfile>) -> StageSummary {
    let mut out = StageSummary::default();
    for (user, label) in labels.iter() {
        let StanceLabel::Labeled { stance, provenance } = label else {
            if label == StanceLabel::Excluded {
                out.excluded += 1;
            }
            continue;
        };
        let g = match stance {
            Stance::Supp => &mut out.supp,
            Stance::Opp => &mut out.opp,
        };
        match provenance {
            Provenance::Seed => g.seed += 1,
            Provenance::Propagation(_) => g.propagation += 1,
            Provenance::Classifier => g.classifier += 1,
        }
        g.tweets += profiles.get(user).map_or(0, |p| p.tweet_count);
    }
    out
}

pub fn stage_summary_tsv(s: &StageSummary) -> String {
    let mut out = String::from("stance\tseed\tpropagation\tclassifier\tusers\ttweets\n");
    let total = GroupSummary {
        seed: s.supp.seed + s.opp.seed,
        propagation: s.supp.propagation + s.opp.propagation,
        classifier: s.supp.classifier + s.opp.classifier,
        tweets: s.supp.tweets + s.opp.tweets,
    };
    for (name, g) in [("SUPP", s.supp), ("OPP", s.opp), ("total", total)] {
        out.push_str(&format!(
            "{name}\t{}\t{}\t{}\t{}\t{}\n",
            g.seed,
            g.propagation,
            g.classifier,
            g.users(),
            g.tweets
        ));
    }
    out.push_str(&format!("EXCLUDED\t{}\t0\t0\t{}\t0\n", s.excluded, s.excluded));
    out
}

pub fn histogram_tsv(table: &ValenceTable) -> String {
    let mut out = String::from("bin\telement_count\tusage\n");
    for (bin, stats) in ValenceBin::ALL.iter().zip(bin_histogram(table)) {
        out.push_str(&format!("{bin}\t{}\t{}\n", stats.element_count, stats.usage));
    }
    out
}

/// Top `k` elements of every bin, strongest OPP bin first.
pub fn top_k_tsv(table: &ValenceTable, display: &DisplayForms, k: usize) -> String {
    let mut out = String::from("bin\trank\tkey\tdisplay\ttf_supp\ttf_opp\tvalence\n");
    for (bin, rows) in ValenceBin::ALL.iter().zip(top_k_per_bin(table, k)) {
        for (rank, r) in rows.iter().enumerate() {
            let key = ElementKey::new(table.kind, r.key.clone());
            out.push_str(&format!(
                "{bin}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                rank + 1,
                r.key,
                display.display(&key),
                r.tf_supp,
                r.tf_opp,
                real(r.valence)
            ));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub bias: String,
    pub credibility: String,
}

/// Parses `key<TAB>bias<TAB>credibility` rows. Blank lines, `#` comments and a
/// leading `key` header are skipped; other malformed rows become warnings.
pub fn parse_annotations(text: &str) -> (BTreeMap<String, Annotation>, Vec<String>) {
    let mut out = BTreeMap::new();
    let mut warnings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("key\t")) {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f.len() != 3 || f[0].is_empty() {
            warnings.push(format!(
                "annotation line {line_no}: expected `key<TAB>bias<TAB>credibility`"
            ));
            continue;
        }
        let key = f[0].to_lowercase();
        let key = key.strip_prefix("www.").unwrap_or(&key).to_string();
        let note = Annotation {
            bias: f[1].to_string(),
            credibility: f[2].to_string(),
        };
        if out.insert(key.clone(), note).is_some() {
            warnings.push(format!(
                "annotation line {line_no}: duplicate key `{key}`, later row wins"
            ));
        }
    }
    (out, warnings)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedReport {
    pub tsv: String,
    pub warnings: Vec<String>,
}

/// Left join of the website table with annotations; unmatched rows read "not listed".
pub fn join_annotations(table: &ValenceTable, annotations: &BTreeMap<String, Annotation>) -> AnnotatedReport {
    let mut tsv = String::from("key\ttf_supp\ttf_opp\tvalence\tbin\tbias\tcredibility\n");
    for r in &table.rows {
        let (bias, cred) = annotations.get(&r.key).map_or((NOT_LISTED, NOT_LISTED), |a| {
            (a.bias.as_str(), a.credibility.as_str())
        });
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{bias}\t{cred}\n",
            r.key,
            r.tf_supp,
            r.tf_opp,
            real(r.valence),
            r.bin
        ));
    }
    let warnings = annotations
        .keys()
        .filter(|k| table.rows.binary_search_by(|r| r.key.as_str().cmp(k)).is_err())
        .map(|k| format!("annotation for `{k}` matches no scored website"))
        .collect();
    AnnotatedReport { tsv, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use polarimeter_core::valence::ValenceRow;
    use polarimeter_core::ElementKind;

    fn at(day: i64, secs: i64) -> Tweet {
        Tweet {
            tweet_id: format!("{day}-{secs}"),
            author_id: "u".into(),
            author_handle: "u".into(),
            text: String::new(),
            created_at: day * 86_400 + secs,
            retweet_of: None,
            hashtags: vec![],
            urls: vec![],
        }
    }

    #[test]
    fn daily() {
        assert_eq!(daily_counts_tsv(&daily_counts(&[])), "date\tcount\ntotal\t0\n");
        let tweets = [at(17_802, 0), at(17_802, 86_399), at(17_803, 5)];
        let days = daily_counts(&tweets);
        assert_eq!(
            daily_counts_tsv(&days),
            "date\tcount\n2018-09-28\t2\n2018-09-29\t1\ntotal\t3\n"
        );
    }

    #[test]
    fn seed_only_summary() {
        let mut labels = Labels::new();
        for i in 0..29 {
            labels.set(format!("s{i}"), StanceLabel::seed(Stance::Supp));
        }
        for i in 0..12 {
            labels.set(format!("o{i}"), StanceLabel::seed(Stance::Opp));
        }
        let s = stage_summary(&labels, &BTreeMap::new());
        assert_eq!(
            (s.supp.seed, s.opp.seed, s.supp.users(), s.opp.users()),
            (29, 12, 29, 12)
        );
        assert!(stage_summary_tsv(&s).contains("total\t41\t0\t0\t41\t0\n"));
        assert_eq!(
            stage_summary(&Labels::new(), &BTreeMap::new()),
            StageSummary::default()
        );
    }

    fn sites() -> ValenceTable {
        let row = |k: &str, v: f64, bin| ValenceRow {
            key: k.into(),
            tf_supp: 100,
            tf_opp: 5,
            valence: v,
            bin,
        };
        ValenceTable {
            kind: ElementKind::Website,
            total_supp: 0,
            total_opp: 0,
            rows: vec![
                row("a.com", 0.9, ValenceBin::StrongSupp),
                row("b.com", -0.1, ValenceBin::Neutral),
            ],
        }
    }

    #[test]
    fn annotation_join() {
        let none = join_annotations(&sites(), &BTreeMap::new());
        assert_eq!(none.tsv.matches(NOT_LISTED).count(), 4);
        assert!(none.warnings.is_empty());

        let (notes, warnings) = parse_annotations(
            "key\tbias\tcredibility\nwww.A.com\tright\thigh\nbroken line\nzzz.com\tleft\tlow\n",
        );
        assert_eq!(warnings.len(), 1);
        let joined = join_annotations(&sites(), &notes);
        assert!(joined
            .tsv
            .contains("a.com\t100\t5\t0.900000000\tstrong_supp\tright\thigh\n"));
        assert!(joined
            .tsv
            .contains("b.com\t100\t5\t-0.100000000\tneutral\tnot listed\tnot listed\n"));
        assert_eq!(
            joined.warnings,
            vec!["annotation for `zzz.com` matches no scored website"]
        );
    }
}
