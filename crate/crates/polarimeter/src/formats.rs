//! On-disk artifact formats. Tables are TSV with a header row; reals use nine
//! decimal places.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use polarimeter_core::classifier::{ClassifierModel, Hyperparams};
use polarimeter_core::graph::DisplayForms;
use polarimeter_core::layout::LayoutPoint;
use polarimeter_core::similarity::{Edge, GraphNode, SimilarityGraph};
use polarimeter_core::valence::{ValenceBin, ValenceRow, ValenceTable};
use polarimeter_core::{
    ElementKey, ElementKind, Labels, Provenance, Stance, StanceLabel, TweetAudience, UserProfile,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

type Result<T> = std::result::Result<T, FormatError>;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    let io = |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

pub fn real(x: f64) -> String {
    format!("{x:.9}")
}

/// A parsed TSV body: (line number, fields) for every row after the header.
struct Tsv {
    path: PathBuf,
    rows: Vec<(usize, Vec<String>)>,
}

impl Tsv {
    fn read(path: &Path, header: &[&str]) -> Result<Self> {
        let text = read_text(path)?;
        let mut lines = text.lines().enumerate();
        let got = lines.next().map(|(_, l)| l).unwrap_or("");
        if got != header.join("\t") {
            return Err(FormatError::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("expected header `{}`", header.join(" | ")),
            });
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let fields: Vec<String> = line.split('\t').map(String::from).collect();
            if fields.len() != header.len() {
                return Err(FormatError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("expected {} fields, found {}", header.len(), fields.len()),
                });
            }
            rows.push((i + 1, fields));
        }
        Ok(Self {
            path: path.to_path_buf(),
            rows,
        })
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> FormatError {
        FormatError::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn num<T: std::str::FromStr>(&self, line: usize, field: &str) -> Result<T> {
        field
            .parse()
            .map_err(|_| self.err(line, format!("invalid number `{field}`")))
    }
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

const PROFILE_HEADER: [&str; 5] = ["user_id", "handle", "tweet_count", "elements", "retweeted"];

pub fn write_profiles(path: &Path, profiles: &BTreeMap<String, UserProfile>) -> Result<()> {
    let rows = profiles.values().map(|p| {
        let elements: Vec<String> = p.element_counts.iter().map(|(k, c)| format!("{k}={c}")).collect();
        let retweeted: Vec<&str> = p.retweeted_tweet_ids.iter().map(String::as_str).collect();
        vec![
            p.user_id.clone(),
            p.handle.clone(),
            p.tweet_count.to_string(),
            elements.join(" "),
            retweeted.join(" "),
        ]
    });
    write_file(path, table(&PROFILE_HEADER, rows))
}

pub fn read_profiles(path: &Path) -> Result<BTreeMap<String, UserProfile>> {
    let tsv = Tsv::read(path, &PROFILE_HEADER)?;
    let mut out = BTreeMap::new();
    for (line, f) in &tsv.rows {
        let mut element_counts = BTreeMap::new();
        for pair in f[3].split_whitespace() {
            let (key, count) = pair
                .rsplit_once('=')
                .ok_or_else(|| tsv.err(*line, format!("element `{pair}` lacks a count")))?;
            let key = ElementKey::parse_compact(key)
                .ok_or_else(|| tsv.err(*line, format!("invalid element `{key}`")))?;
            element_counts.insert(key, tsv.num(*line, count)?);
        }
        let profile = UserProfile {
            user_id: f[0].clone(),
            handle: f[1].clone(),
            tweet_count: tsv.num(*line, &f[2])?,
            element_counts,
            retweeted_tweet_ids: f[4].split_whitespace().map(String::from).collect(),
        };
        out.insert(profile.user_id.clone(), profile);
    }
    Ok(out)
}

const AUDIENCE_HEADER: [&str; 2] = ["tweet_id", "sharers"];

pub fn write_audiences(path: &Path, audiences: &BTreeMap<String, TweetAudience>) -> Result<()> {
    let rows = audiences.values().map(|a| {
        let sharers: Vec<&str> = a.sharers.iter().map(String::as_str).collect();
        vec![a.original_tweet_id.clone(), sharers.join(" ")]
    });
    write_file(path, table(&AUDIENCE_HEADER, rows))
}

pub fn read_audiences(path: &Path) -> Result<BTreeMap<String, TweetAudience>> {
    let tsv = Tsv::read(path, &AUDIENCE_HEADER)?;
    Ok(tsv
        .rows
        .iter()
        .map(|(_, f)| {
            let a = TweetAudience {
                original_tweet_id: f[0].clone(),
                sharers: f[1].split_whitespace().map(String::from).collect::<BTreeSet<_>>(),
            };
            (f[0].clone(), a)
        })
        .collect())
}

const DISPLAY_HEADER: [&str; 3] = ["element", "variant", "count"];

pub fn write_display(path: &Path, display: &DisplayForms) -> Result<()> {
    let rows = display.iter().flat_map(|(key, vars)| {
        vars.iter()
            .map(move |(raw, n)| vec![key.to_string(), raw.clone(), n.to_string()])
    });
    write_file(path, table(&DISPLAY_HEADER, rows))
}

pub fn read_display(path: &Path) -> Result<DisplayForms> {
    let tsv = Tsv::read(path, &DISPLAY_HEADER)?;
    let mut out = DisplayForms::default();
    for (line, f) in &tsv.rows {
        let key = ElementKey::parse_compact(&f[0])
            .ok_or_else(|| tsv.err(*line, format!("invalid element `{}`", f[0])))?;
        let n: u64 = tsv.num(*line, &f[2])?;
        for _ in 0..n {
            out.record(&key, &f[1]);
        }
    }
    Ok(out)
}

const LABEL_HEADER: [&str; 4] = ["user_id", "stance", "provenance", "iteration"];

pub fn write_labels(path: &Path, labels: &Labels) -> Result<()> {
    let rows = labels.iter().map(|(user, label)| {
        let prov = label.provenance().unwrap_or(Provenance::Seed);
        vec![
            user.to_string(),
            label.token().to_string(),
            prov.name().to_string(),
            prov.iteration().to_string(),
        ]
    });
    write_file(path, table(&LABEL_HEADER, rows))
}

pub fn read_labels(path: &Path) -> Result<Labels> {
    let tsv = Tsv::read(path, &LABEL_HEADER)?;
    let mut labels = Labels::new();
    for (line, f) in &tsv.rows {
        let iteration: u32 = tsv.num(*line, &f[3])?;
        let provenance = match f[2].as_str() {
            "seed" => Provenance::Seed,
            "propagation" => Provenance::Propagation(iteration),
            "classifier" => Provenance::Classifier,
            other => return Err(tsv.err(*line, format!("unknown provenance `{other}`"))),
        };
        let label = match f[1].as_str() {
            "SUPP" => StanceLabel::Labeled {
                stance: Stance::Supp,
                provenance,
            },
            "OPP" => StanceLabel::Labeled {
                stance: Stance::Opp,
                provenance,
            },
            "EXCLUDED" => StanceLabel::Excluded,
            other => return Err(tsv.err(*line, format!("unknown stance `{other}`"))),
        };
        labels.set(f[0].clone(), label);
    }
    Ok(labels)
}

/// Ground truth: `user_id<TAB>stance`.
pub fn write_truth<'a>(path: &Path, rows: impl IntoIterator<Item = (&'a str, Stance)>) -> Result<()> {
    let rows = rows
        .into_iter()
        .map(|(u, s)| vec![u.to_string(), s.as_str().to_string()]);
    write_file(path, table(&["user_id", "stance"], rows))
}

pub fn read_truth(path: &Path) -> Result<BTreeMap<String, Stance>> {
    let tsv = Tsv::read(path, &["user_id", "stance"])?;
    let mut out = BTreeMap::new();
    for (line, f) in &tsv.rows {
        let s = match f[1].as_str() {
            "SUPP" => Stance::Supp,
            "OPP" => Stance::Opp,
            other => return Err(tsv.err(*line, format!("unknown stance `{other}`"))),
        };
        out.insert(f[0].clone(), s);
    }
    Ok(out)
}

const MODEL_MAGIC: &[u8; 8] = b"PLMMODEL";
const MODEL_VERSION: u32 = 1;

/// Binary model: magic, version, d, |vocab| (u32 LE), then each vocabulary
/// entry as u32 length plus UTF-8 bytes, the embedding and output matrices as
/// row-major f64 LE, and finally epochs (u32), learning rate (f64) and seed (u64).
pub fn encode_model(m: &ClassifierModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    for n in [MODEL_VERSION, m.dim() as u32, m.vocab.len() as u32] {
        out.extend_from_slice(&n.to_le_bytes());
    }
    for word in &m.vocab {
        out.extend_from_slice(&(word.len() as u32).to_le_bytes());
        out.extend_from_slice(word.as_bytes());
    }
    for x in m.embeddings.iter().chain(&m.output) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let hp = m.hyperparams;
    out.extend_from_slice(&hp.epochs.to_le_bytes());
    out.extend_from_slice(&hp.learning_rate.to_le_bytes());
    out.extend_from_slice(&hp.seed.to_le_bytes());
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("not a model file")]
    Magic,
    #[error("unsupported model version {0}")]
    Version(u32),
    #[error("model file is truncated")]
    Truncated,
    #[error("model vocabulary is not UTF-8")]
    Utf8,
    #[error("trailing bytes after model")]
    Trailing,
    #[error("model shape mismatch")]
    Shape,
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], ModelError> {
        if self.0.len() < n {
            return Err(ModelError::Truncated);
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> std::result::Result<[u8; N], ModelError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> std::result::Result<u32, ModelError> {
        self.array().map(u32::from_le_bytes)
    }

    fn f64(&mut self) -> std::result::Result<f64, ModelError> {
        self.array().map(f64::from_le_bytes)
    }
}

pub fn decode_model(bytes: &[u8]) -> std::result::Result<ClassifierModel, ModelError> {
    let mut c = Cursor(bytes);
    if c.take(MODEL_MAGIC.len()).map_err(|_| ModelError::Magic)? != MODEL_MAGIC {
        return Err(ModelError::Magic);
    }
    let version = c.u32()?;
    if version != MODEL_VERSION {
        return Err(ModelError::Version(version));
    }
    let dim = c.u32()? as usize;
    let n = c.u32()? as usize;
    let mut vocab = Vec::new();
    for _ in 0..n {
        let len = c.u32()? as usize;
        let word = std::str::from_utf8(c.take(len)?).map_err(|_| ModelError::Utf8)?;
        vocab.push(word.to_string());
    }
    let embeddings = (0..n * dim)
        .map(|_| c.f64())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let output = (0..dim * 2)
        .map(|_| c.f64())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let epochs = c.u32()?;
    let learning_rate = c.f64()?;
    let seed = u64::from_le_bytes(c.array()?);
    if !c.0.is_empty() {
        return Err(ModelError::Trailing);
    }
    let hp = Hyperparams {
        dim,
        epochs,
        learning_rate,
        seed,
    };
    ClassifierModel::from_parts(vocab, embeddings, output, hp).map_err(|_| ModelError::Shape)
}

const VALENCE_HEADER: [&str; 5] = ["key", "tf_supp", "tf_opp", "valence", "bin"];

pub fn write_valence(path: &Path, table: &ValenceTable) -> Result<()> {
    let rows = table.rows.iter().map(|r| {
        vec![
            r.key.clone(),
            r.tf_supp.to_string(),
            r.tf_opp.to_string(),
            real(r.valence),
            r.bin.to_string(),
        ]
    });
    write_file(path, self::table(&VALENCE_HEADER, rows))
}

/// Reads a valence table back. Group totals are not stored and are left at zero;
/// valences are the rounded values from the file.
pub fn read_valence(path: &Path, kind: ElementKind) -> Result<ValenceTable> {
    let tsv = Tsv::read(path, &VALENCE_HEADER)?;
    let mut rows = Vec::new();
    for (line, f) in &tsv.rows {
        let bin: ValenceBin = f[4]
            .parse()
            .map_err(|_| tsv.err(*line, format!("unknown bin `{}`", f[4])))?;
        rows.push(ValenceRow {
            key: f[0].clone(),
            tf_supp: tsv.num(*line, &f[1])?,
            tf_opp: tsv.num(*line, &f[2])?,
            valence: tsv.num(*line, &f[3])?,
            bin,
        });
    }
    Ok(ValenceTable {
        kind,
        total_supp: 0,
        total_opp: 0,
        rows,
    })
}

const NODE_HEADER: [&str; 2] = ["user_id", "stance"];
const EDGE_HEADER: [&str; 3] = ["u", "v", "weight"];

/// Writes `nodes_<kind>.tsv` and `edges_<kind>.tsv`; edges name users by id.
pub fn write_graph(nodes_path: &Path, edges_path: &Path, g: &SimilarityGraph) -> Result<()> {
    let nodes = g
        .nodes
        .iter()
        .map(|n| vec![n.user_id.clone(), n.stance.as_str().to_string()]);
    write_file(nodes_path, table(&NODE_HEADER, nodes))?;
    let edges = g.edges.iter().map(|e| {
        vec![
            g.nodes[e.u].user_id.clone(),
            g.nodes[e.v].user_id.clone(),
            real(e.weight),
        ]
    });
    write_file(edges_path, table(&EDGE_HEADER, edges))
}

fn parse_stance(tsv: &Tsv, line: usize, s: &str) -> Result<Stance> {
    match s {
        "SUPP" => Ok(Stance::Supp),
        "OPP" => Ok(Stance::Opp),
        other => Err(tsv.err(line, format!("unknown stance `{other}`"))),
    }
}

pub fn read_graph(nodes_path: &Path, edges_path: &Path) -> Result<SimilarityGraph> {
    let tsv = Tsv::read(nodes_path, &NODE_HEADER)?;
    let mut nodes = Vec::new();
    let mut index = BTreeMap::new();
    for (line, f) in &tsv.rows {
        index.insert(f[0].clone(), nodes.len());
        nodes.push(GraphNode {
            user_id: f[0].clone(),
            stance: parse_stance(&tsv, *line, &f[1])?,
        });
    }
    let tsv = Tsv::read(edges_path, &EDGE_HEADER)?;
    let mut edges = Vec::new();
    for (line, f) in &tsv.rows {
        let node = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| tsv.err(*line, format!("unknown node `{id}`")))
        };
        edges.push(Edge {
            u: node(&f[0])?,
            v: node(&f[1])?,
            weight: tsv.num(*line, &f[2])?,
        });
    }
    Ok(SimilarityGraph { nodes, edges })
}

const COORD_HEADER: [&str; 4] = ["user_id", "x", "y", "stance"];

pub fn write_coords(path: &Path, points: &[LayoutPoint]) -> Result<()> {
    let rows = points.iter().map(|p| {
        vec![
            p.user_id.clone(),
            real(p.x),
            real(p.y),
            p.stance.as_str().to_string(),
        ]
    });
    write_file(path, table(&COORD_HEADER, rows))
}

pub fn read_coords(path: &Path) -> Result<Vec<LayoutPoint>> {
    let tsv = Tsv::read(path, &COORD_HEADER)?;
    tsv.rows
        .iter()
        .map(|(line, f)| {
            Ok(LayoutPoint {
                user_id: f[0].clone(),
                x: tsv.num(*line, &f[1])?,
                y: tsv.num(*line, &f[2])?,
                stance: parse_stance(&tsv, *line, &f[3])?,
            })
        })
        .collect()
}

pub const SUPP_COLOR: &str = "#d62728";
pub const OPP_COLOR: &str = "#1f77b4";
const MARGIN: f64 = 4.0;

/// Standalone SVG with one radius-2 circle per point. The unit square maps
/// onto the canvas inside a small margin, y pointing up.
pub fn render_svg(points: &[LayoutPoint], width: u32, height: u32) -> String {
    let (w, h) = (f64::from(width), f64::from(height));
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
    for p in points {
        let cx = MARGIN + p.x * (w - 2.0 * MARGIN);
        let cy = MARGIN + (1.0 - p.y) * (h - 2.0 * MARGIN);
        let fill = match p.stance {
            Stance::Supp => SUPP_COLOR,
            Stance::Opp => OPP_COLOR,
        };
        let _ = writeln!(
            out,
            "<circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"2\" fill=\"{fill}\"/>"
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use polarimeter_core::graph::build_profiles;
    use polarimeter_core::tweet::RetweetRef;
    use polarimeter_core::Tweet;

    fn tweet(id: &str, author: &str, rt: Option<(&str, &str)>, tags: &[&str]) -> Tweet {
        Tweet {
            tweet_id: id.into(),
            author_id: author.into(),
            author_handle: format!("H{author}"),
            text: "Kavanaugh".into(),
            created_at: 1_538_092_800,
            retweet_of: rt.map(|(t, u)| RetweetRef {
                tweet_id: t.into(),
                user_handle: u.into(),
            }),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            urls: vec!["https://twitter.com/TheHill/status/1".into()],
        }
    }

    #[test]
    fn corpus_tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let tweets = [
            tweet("1", "a", None, &["#MAGA", "#maga"]),
            tweet("2", "b", Some(("1", "Ha")), &["#MAGA"]),
            tweet("3", "c", Some(("1", "Ha")), &[]),
        ];
        let c = build_profiles(&tweets);
        let (p, a, d) = (dir.path().join("p"), dir.path().join("a"), dir.path().join("d"));
        write_profiles(&p, &c.profiles).unwrap();
        write_audiences(&a, &c.audiences).unwrap();
        write_display(&d, &c.display).unwrap();
        assert_eq!(read_profiles(&p).unwrap(), c.profiles);
        assert_eq!(read_audiences(&a).unwrap(), c.audiences);
        assert_eq!(read_display(&d).unwrap(), c.display);
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let labels: Labels = [
            ("a", StanceLabel::seed(Stance::Supp)),
            ("b", StanceLabel::Excluded),
            (
                "c",
                StanceLabel::Labeled {
                    stance: Stance::Opp,
                    provenance: Provenance::Propagation(3),
                },
            ),
            (
                "d",
                StanceLabel::Labeled {
                    stance: Stance::Supp,
                    provenance: Provenance::Classifier,
                },
            ),
        ]
        .into_iter()
        .map(|(u, l)| (u.to_string(), l))
        .collect();
        let path = dir.path().join("labels.tsv");
        write_labels(&path, &labels).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("c\tOPP\tpropagation\t3\n"));
        assert_eq!(read_labels(&path).unwrap(), labels);
    }

    #[test]
    fn model_round_trip_and_rejects_damage() {
        let m = ClassifierModel::from_parts(
            vec!["x".into(), "yé".into()],
            vec![0.1, -0.2, 0.3, 1e-300],
            vec![1.0, 2.0, 3.0, f64::MIN_POSITIVE],
            Hyperparams {
                dim: 2,
                epochs: 3,
                learning_rate: 0.5,
                seed: 99,
            },
        )
        .unwrap();
        let bytes = encode_model(&m);
        assert_eq!(decode_model(&bytes).unwrap(), m);
        assert_eq!(
            decode_model(&bytes[..bytes.len() - 1]),
            Err(ModelError::Truncated)
        );
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(decode_model(&extra), Err(ModelError::Trailing));
        assert_eq!(decode_model(b"nope"), Err(ModelError::Magic));
        let mut v2 = bytes;
        v2[8] = 2;
        assert_eq!(decode_model(&v2), Err(ModelError::Version(2)));
    }

    #[test]
    fn svg_has_one_circle_per_point() {
        let empty = render_svg(&[], 1000, 1000);
        assert!(empty.starts_with("<?xml") && empty.trim_end().ends_with("</svg>"));
        assert_eq!(empty.matches("<circle").count(), 0);
        let pts: Vec<LayoutPoint> = (0..3)
            .map(|i| LayoutPoint {
                user_id: i.to_string(),
                x: f64::from(i) / 2.0,
                y: 0.5,
                stance: if i == 0 { Stance::Supp } else { Stance::Opp },
            })
            .collect();
        let svg = render_svg(&pts, 1000, 1000);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches(SUPP_COLOR).count(), 1);
        assert_eq!(svg.matches(OPP_COLOR).count(), 2);
        assert!(svg.contains("r=\"2\""));
    }

    #[test]
    fn bad_rows_report_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.tsv");
        fs::write(
            &path,
            "user_id\tstance\tprovenance\titeration\na\tMAYBE\tseed\t0\n",
        )
        .unwrap();
        match read_labels(&path) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        fs::write(&path, "wrong\n").unwrap();
        assert!(matches!(
            read_labels(&path),
            Err(FormatError::Parse { line: 1, .. })
        ));
    }
}
