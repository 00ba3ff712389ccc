//! L1-normalized user vectors, cosine similarity and the sampled similarity graph.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::element::ElementKind;
use crate::graph::UserProfile;
use crate::labeling::{Labels, Stance};

/// A user's element frequencies scaled to sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct UserVector {
    pub user_id: String,
    pub kind: ElementKind,
    pub weights: BTreeMap<String, f64>,
    norm: f64,
}

impl UserVector {
    /// Normalizes raw counts. Returns `None` if there are no positive counts.
    pub fn from_counts<'a, I>(user_id: impl Into<String>, kind: ElementKind, counts: I) -> Option<Self>
    where
        I: IntoIterator<Item = (&'a str, u64)>,
    {
        let raw: BTreeMap<&str, u64> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        let total: u64 = raw.values().sum();
        if total == 0 {
            return None;
        }
        let weights: BTreeMap<String, f64> = raw
            .into_iter()
            .map(|(k, c)| (String::from(k), c as f64 / total as f64))
            .collect();
        let norm = libm::sqrt(weights.values().map(|w| w * w).sum());
        Some(Self {
            user_id: user_id.into(),
            kind,
            weights,
            norm,
        })
    }

    /// Euclidean norm, summed in key order.
    pub fn norm(&self) -> f64 {
        self.norm
    }
}

/// Vectors for users with at least `min_elements` distinct elements of `kind`.
pub fn build_vectors(
    profiles: &BTreeMap<String, UserProfile>,
    kind: ElementKind,
    min_elements: usize,
) -> Vec<UserVector> {
    profiles
        .values()
        .filter(|p| p.distinct_of(kind) >= min_elements.max(1))
        .filter_map(|p| {
            UserVector::from_counts(
                p.user_id.as_str(),
                kind,
                p.counts_of(kind).map(|(k, c)| (k.key.as_str(), c)),
            )
        })
        .collect()
}

/// Dot product over shared keys, accumulated in key order.
fn dot(u: &UserVector, v: &UserVector) -> f64 {
    let mut a = u.weights.iter().peekable();
    let mut b = v.weights.iter().peekable();
    let mut sum = 0.0;
    while let (Some((ka, wa)), Some((kb, wb))) = (a.peek(), b.peek()) {
        match ka.cmp(kb) {
            core::cmp::Ordering::Less => {
                a.next();
            }
            core::cmp::Ordering::Greater => {
                b.next();
            }
            core::cmp::Ordering::Equal => {
                sum += *wa * *wb;
                a.next();
                b.next();
            }
        }
    }
    sum
}

/// Cosine similarity in `[0, 1]`. Symmetric bit for bit.
pub fn cosine(u: &UserVector, v: &UserVector) -> f64 {
    debug_assert_eq!(u.kind, v.kind);
    let c = dot(u, v) / (u.norm * v.norm);
    c.clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledUser {
    pub vector: UserVector,
    pub stance: Stance,
}

/// Uniform sample without replacement of `min(n, eligible)` SUPP/OPP users,
/// returned in user id order.
pub fn sample_users(vectors: &[UserVector], labels: &Labels, n: usize, seed: u64) -> Vec<SampledUser> {
    let mut eligible: Vec<(&UserVector, Stance)> = vectors
        .iter()
        .filter_map(|v| labels.stance(&v.user_id).map(|s| (v, s)))
        .collect();
    eligible.sort_by(|a, b| a.0.user_id.cmp(&b.0.user_id));
    let amount = n.min(eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, eligible.len(), amount).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| SampledUser {
            vector: eligible[i].0.clone(),
            stance: eligible[i].1,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphNode {
    pub user_id: String,
    pub stance: Stance,
}

/// Undirected edge between node indices `u < v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimilarityGraph {
    pub nodes: Vec<GraphNode>,
    /// Sorted by `(u, v)`.
    pub edges: Vec<Edge>,
}

/// All pairs with positive cosine at or above `edge_floor`.
///
/// Pairs are found through an inverted index over element keys, so users with
/// disjoint supports are never compared. Each dot product still accumulates in
/// key order and so equals [`cosine`] exactly.
pub fn build_similarity_graph(users: &[SampledUser], edge_floor: f64) -> SimilarityGraph {
    let nodes: Vec<GraphNode> = users
        .iter()
        .map(|u| GraphNode {
            user_id: u.vector.user_id.clone(),
            stance: u.stance,
        })
        .collect();

    let mut postings: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
    for (i, u) in users.iter().enumerate() {
        for (k, w) in &u.vector.weights {
            postings.entry(k.as_str()).or_default().push((i, *w));
        }
    }

    let mut edges = Vec::new();
    let mut acc = vec![0.0f64; users.len()];
    let mut touched = Vec::new();
    for (i, u) in users.iter().enumerate() {
        for (k, w) in &u.vector.weights {
            for &(j, wj) in &postings[k.as_str()] {
                if j <= i {
                    continue;
                }
                if acc[j] == 0.0 {
                    touched.push(j);
                }
                acc[j] += *w * wj;
            }
        }
        touched.sort_unstable();
        for &j in &touched {
            let weight = (acc[j] / (u.vector.norm * users[j].vector.norm)).clamp(0.0, 1.0);
            acc[j] = 0.0;
            if weight > 0.0 && weight >= edge_floor {
                edges.push(Edge { u: i, v: j, weight });
            }
        }
        touched.clear();
    }
    SimilarityGraph { nodes, edges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::ElementKey;
    use crate::labeling::StanceLabel;
    use alloc::format;
    use proptest::prelude::*;

    fn vector(id: &str, counts: &[(&str, u64)]) -> UserVector {
        UserVector::from_counts(id, ElementKind::Hashtag, counts.iter().copied()).unwrap()
    }

    #[test]
    fn worked_normalization() {
        let v = vector("a", &[("a", 5), ("b", 100), ("c", 895)]);
        let w: Vec<f64> = v.weights.values().copied().collect();
        assert_eq!(w, vec![0.005, 0.100, 0.895]);
    }

    #[test]
    fn engagement_filter() {
        let mut profiles = BTreeMap::new();
        for (user, n) in [("nine", 9u64), ("ten", 10)] {
            let p = UserProfile {
                user_id: user.into(),
                element_counts: (0..n)
                    .map(|i| (ElementKey::new(ElementKind::Hashtag, format!("t{i}")), i + 1))
                    .collect(),
                ..UserProfile::default()
            };
            profiles.insert(String::from(user), p);
        }
        let vs = build_vectors(&profiles, ElementKind::Hashtag, 10);
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].user_id, "ten");
        assert!((vs[0].weights.values().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(build_vectors(&profiles, ElementKind::Website, 1).is_empty());
    }

    #[test]
    fn cosine_examples() {
        let u = vector("u", &[("a", 1), ("b", 1)]);
        let v = vector("v", &[("a", 1)]);
        let w = vector("w", &[("c", 3)]);
        assert!((cosine(&u, &v) - 1.0 / libm::sqrt(2.0)).abs() < 1e-15);
        assert_eq!(cosine(&u, &w), 0.0);
        assert!((cosine(&u, &u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_clamps_and_is_deterministic() {
        let vs: Vec<UserVector> = (0..100)
            .map(|i| vector(&format!("u{i:03}"), &[("a", 1)]))
            .collect();
        let mut labels = Labels::new();
        for v in &vs[..90] {
            labels.set(v.user_id.clone(), StanceLabel::seed(Stance::Supp));
        }
        labels.set("u095", StanceLabel::Excluded);
        let all = sample_users(&vs, &labels, 5000, 1);
        assert_eq!(all.len(), 90);
        let a = sample_users(&vs, &labels, 10, 7);
        let b = sample_users(&vs, &labels, 10, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0].vector.user_id < w[1].vector.user_id));
        assert_ne!(a, sample_users(&vs, &labels, 10, 8));
    }

    /// Hypergeometric bound: sample group share stays within 3 sigma of the population share.
    #[test]
    fn sampling_preserves_group_proportions() {
        let pop = 20_000usize;
        let supp = 6_000usize;
        let n = 5_000usize;
        let vs: Vec<UserVector> = (0..pop)
            .map(|i| vector(&format!("u{i:05}"), &[("a", 1)]))
            .collect();
        let labels: Labels = (0..pop)
            .map(|i| {
                let s = if i % 10 < 3 { Stance::Supp } else { Stance::Opp };
                (format!("u{i:05}"), StanceLabel::seed(s))
            })
            .collect();
        let p = supp as f64 / pop as f64;
        let var = n as f64 * p * (1.0 - p) * (pop - n) as f64 / (pop - 1) as f64;
        for seed in 0..5 {
            let sample = sample_users(&vs, &labels, n, seed);
            let got = sample.iter().filter(|s| s.stance == Stance::Supp).count() as f64;
            assert!(
                (got - n as f64 * p).abs() <= 3.0 * libm::sqrt(var),
                "seed {seed}: {got}"
            );
        }
    }

    fn sampled(vs: Vec<UserVector>) -> Vec<SampledUser> {
        vs.into_iter()
            .enumerate()
            .map(|(i, vector)| SampledUser {
                vector,
                stance: if i % 2 == 0 { Stance::Supp } else { Stance::Opp },
            })
            .collect()
    }

    #[test]
    fn graph_small_cases() {
        let g = build_similarity_graph(
            &sampled(vec![vector("a", &[("x", 2)]), vector("b", &[("x", 7)])]),
            0.1,
        );
        assert_eq!(
            g.edges,
            vec![Edge {
                u: 0,
                v: 1,
                weight: 1.0
            }]
        );
        let g = build_similarity_graph(
            &sampled(vec![
                vector("a", &[("x", 2)]),
                vector("b", &[("y", 7)]),
                vector("c", &[("z", 1)]),
            ]),
            0.0,
        );
        assert!(g.edges.is_empty());
        assert_eq!(g.nodes.len(), 3);
    }

    fn arb_vectors() -> impl Strategy<Value = Vec<UserVector>> {
        prop::collection::vec(prop::collection::btree_map(0u8..12, 1u64..50, 1..6), 1..25).prop_map(|users| {
            users
                .into_iter()
                .enumerate()
                .map(|(i, m)| {
                    let keys: Vec<(String, u64)> = m.into_iter().map(|(k, c)| (format!("k{k}"), c)).collect();
                    UserVector::from_counts(
                        format!("u{i:02}"),
                        ElementKind::Hashtag,
                        keys.iter().map(|(k, c)| (k.as_str(), *c)),
                    )
                    .unwrap()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn graph_matches_all_pairs_oracle(vs in arb_vectors(), floor in 0.0f64..0.8) {
            let users = sampled(vs);
            let g = build_similarity_graph(&users, floor);
            let mut expected = Vec::new();
            for i in 0..users.len() {
                for j in i + 1..users.len() {
                    let c = cosine(&users[i].vector, &users[j].vector);
                    if c > 0.0 && c >= floor {
                        expected.push(Edge { u: i, v: j, weight: c });
                    }
                }
            }
            prop_assert_eq!(g.edges, expected);
        }

        #[test]
        fn cosine_properties(vs in arb_vectors()) {
            for u in &vs {
                prop_assert!((u.weights.values().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!((cosine(u, u) - 1.0).abs() < 1e-12);
                for v in &vs {
                    let c = cosine(u, v);
                    prop_assert_eq!(c.to_bits(), cosine(v, u).to_bits());
                    prop_assert!((0.0..=1.0).contains(&c));
                }
            }
        }

        #[test]
        fn scaling_counts_leaves_vector_unchanged(m in prop::collection::btree_map(0u8..20, 1u64..1000, 1..10), k in 1u64..100) {
            let keys: Vec<(String, u64)> = m.into_iter().map(|(a, c)| (format!("k{a}"), c)).collect();
            let base = UserVector::from_counts("u", ElementKind::Website, keys.iter().map(|(a, c)| (a.as_str(), *c))).unwrap();
            let scaled = UserVector::from_counts("u", ElementKind::Website, keys.iter().map(|(a, c)| (a.as_str(), c * k))).unwrap();
            prop_assert_eq!(base, scaled);
        }
    }
}
