//! Two-class bag-of-features classifier used to expand stance labels.
//!
//! A user's retweeted accounts form a bag. The bag is embedded as the
//! count-weighted mean of per-account `d`-dimensional vectors, then mapped to
//! SUPP/OPP logits by a `d × 2` output matrix and a softmax. Training is plain
//! SGD on cross-entropy with a learning rate decaying linearly to zero.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::element::ElementKind;
use crate::graph::UserProfile;
use crate::labeling::{Labels, Provenance, Stance, StanceLabel};

const CLASSES: usize = 2;

fn class_index(s: Stance) -> usize {
    match s {
        Stance::Supp => 0,
        Stance::Opp => 1,
    }
}

/// Retweeted accounts of one user with their counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureBag {
    pub features: BTreeMap<String, u64>,
}

impl FeatureBag {
    pub fn from_profile(profile: &UserProfile) -> Self {
        Self {
            features: profile
                .counts_of(ElementKind::RetweetedAccount)
                .map(|(k, c)| (k.key.clone(), c))
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

impl<S: Into<String>> FromIterator<(S, u64)> for FeatureBag {
    fn from_iter<T: IntoIterator<Item = (S, u64)>>(iter: T) -> Self {
        let mut features = BTreeMap::new();
        for (k, c) in iter {
            if c > 0 {
                *features.entry(k.into()).or_default() += c;
            }
        }
        Self { features }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub dim: usize,
    pub epochs: u32,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            dim: 16,
            epochs: 20,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    /// Feature names in index order.
    pub vocab: Vec<String>,
    index: BTreeMap<String, usize>,
    /// Row-major `|vocab| × dim`.
    pub embeddings: Vec<f64>,
    /// Row-major `dim × 2`.
    pub output: Vec<f64>,
    pub hyperparams: Hyperparams,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifierError {
    #[error("training data must contain both SUPP and OPP examples")]
    SingleClass,
    #[error("training example {0} has an empty feature bag")]
    EmptyBag(usize),
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("model matrices do not match vocabulary size and dimension")]
    Shape,
    #[error("no feature of the bag is in the model vocabulary")]
    Unclassifiable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub stance: Stance,
    /// Probability of the predicted class, in `[0.5, 1]`.
    pub confidence: f64,
    /// SUPP, OPP probabilities.
    pub probabilities: [f64; 2],
}

/// Gradient of the loss with respect to every model parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub embeddings: Vec<f64>,
    pub output: Vec<f64>,
}

impl ClassifierModel {
    /// Assembles a model from its parts, checking shapes.
    pub fn from_parts(
        vocab: Vec<String>,
        embeddings: Vec<f64>,
        output: Vec<f64>,
        hyperparams: Hyperparams,
    ) -> Result<Self, ClassifierError> {
        let d = hyperparams.dim;
        if d == 0 {
            return Err(ClassifierError::ZeroDim);
        }
        if embeddings.len() != vocab.len() * d || output.len() != d * CLASSES {
            return Err(ClassifierError::Shape);
        }
        let index = vocab.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Ok(Self {
            vocab,
            index,
            embeddings,
            output,
            hyperparams,
        })
    }

    pub fn dim(&self) -> usize {
        self.hyperparams.dim
    }

    /// In-vocabulary (index, weight) pairs of a bag, weights summing to one.
    fn resolve(&self, bag: &FeatureBag) -> Option<Vec<(usize, f64)>> {
        let hits: Vec<(usize, u64)> = bag
            .features
            .iter()
            .filter_map(|(k, c)| self.index.get(k).map(|&i| (i, *c)))
            .collect();
        let total: u64 = hits.iter().map(|(_, c)| c).sum();
        (total > 0).then(|| {
            hits.into_iter()
                .map(|(i, c)| (i, c as f64 / total as f64))
                .collect()
        })
    }

    fn hidden(&self, feats: &[(usize, f64)]) -> Vec<f64> {
        let d = self.dim();
        let mut h = vec![0.0; d];
        for &(i, w) in feats {
            for (hj, ej) in h.iter_mut().zip(&self.embeddings[i * d..(i + 1) * d]) {
                *hj += w * ej;
            }
        }
        h
    }

    fn probabilities(&self, h: &[f64]) -> [f64; 2] {
        let mut z = [0.0; CLASSES];
        for (j, hj) in h.iter().enumerate() {
            for (c, zc) in z.iter_mut().enumerate() {
                *zc += hj * self.output[j * CLASSES + c];
            }
        }
        softmax(z)
    }

    pub fn predict(&self, bag: &FeatureBag) -> Result<Prediction, ClassifierError> {
        let feats = self.resolve(bag).ok_or(ClassifierError::Unclassifiable)?;
        let p = self.probabilities(&self.hidden(&feats));
        let (stance, confidence) = if p[0] >= p[1] {
            (Stance::Supp, p[0])
        } else {
            (Stance::Opp, p[1])
        };
        Ok(Prediction {
            stance,
            confidence,
            probabilities: p,
        })
    }

    /// Cross-entropy of one example and its gradient.
    pub fn loss_and_gradient(
        &self,
        bag: &FeatureBag,
        label: Stance,
    ) -> Result<(f64, Gradient), ClassifierError> {
        let feats = self.resolve(bag).ok_or(ClassifierError::Unclassifiable)?;
        let h = self.hidden(&feats);
        let p = self.probabilities(&h);
        let y = class_index(label);
        let loss = -libm::log(p[y]);
        let dz = output_error(p, y);

        let d = self.dim();
        let mut grad = Gradient {
            embeddings: vec![0.0; self.embeddings.len()],
            output: vec![0.0; self.output.len()],
        };
        let dh = self.hidden_error(&dz);
        for (row, hj) in grad.output.chunks_exact_mut(CLASSES).zip(&h) {
            for (g, z) in row.iter_mut().zip(&dz) {
                *g = hj * z;
            }
        }
        for &(i, w) in &feats {
            for (g, e) in grad.embeddings[i * d..(i + 1) * d].iter_mut().zip(&dh) {
                *g += w * e;
            }
        }
        Ok((loss, grad))
    }

    fn hidden_error(&self, dz: &[f64; 2]) -> Vec<f64> {
        (0..self.dim())
            .map(|j| (0..CLASSES).map(|c| self.output[j * CLASSES + c] * dz[c]).sum())
            .collect()
    }

    fn sgd_step(&mut self, feats: &[(usize, f64)], y: usize, lr: f64) {
        let d = self.dim();
        let h = self.hidden(feats);
        let p = self.probabilities(&h);
        let dz = output_error(p, y);
        let dh = self.hidden_error(&dz);
        for (row, hj) in self.output.chunks_exact_mut(CLASSES).zip(&h) {
            for (o, z) in row.iter_mut().zip(&dz) {
                *o -= lr * hj * z;
            }
        }
        for &(i, w) in feats {
            for (e, g) in self.embeddings[i * d..(i + 1) * d].iter_mut().zip(&dh) {
                *e -= lr * w * g;
            }
        }
    }
}

fn output_error(p: [f64; 2], y: usize) -> [f64; 2] {
    let mut dz = p;
    dz[y] -= 1.0;
    dz
}

fn softmax(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e = [libm::exp(z[0] - m), libm::exp(z[1] - m)];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

/// Trains on labeled bags. Same data and hyperparameters give a bit-identical model.
pub fn train(
    examples: &[(FeatureBag, Stance)],
    hyperparams: &Hyperparams,
) -> Result<ClassifierModel, ClassifierError> {
    if hyperparams.dim == 0 {
        return Err(ClassifierError::ZeroDim);
    }
    if let Some(i) = examples.iter().position(|(b, _)| b.is_empty()) {
        return Err(ClassifierError::EmptyBag(i));
    }
    let has = |s: Stance| examples.iter().any(|(_, l)| *l == s);
    if !(has(Stance::Supp) && has(Stance::Opp)) {
        return Err(ClassifierError::SingleClass);
    }

    let vocab: Vec<String> = examples
        .iter()
        .flat_map(|(b, _)| b.features.keys().cloned())
        .collect::<alloc::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let d = hyperparams.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(hyperparams.seed);
    let bound = 1.0 / d as f64;
    let embeddings = (0..vocab.len() * d)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    let mut model = ClassifierModel::from_parts(vocab, embeddings, vec![0.0; d * CLASSES], *hyperparams)?;

    let prepared: Vec<(Vec<(usize, f64)>, usize)> = examples
        .iter()
        .map(|(b, s)| {
            (
                model.resolve(b).expect("training vocabulary covers every bag"),
                class_index(*s),
            )
        })
        .collect();
    let total_steps = (hyperparams.epochs as usize * prepared.len()).max(1) as f64;
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut step = 0usize;
    for _ in 0..hyperparams.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let lr = hyperparams.learning_rate * (1.0 - step as f64 / total_steps);
            let (feats, y) = &prepared[i];
            model.sgd_step(feats, *y, lr);
            step += 1;
        }
    }
    Ok(model)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionConfig {
    pub min_distinct_accounts: usize,
    /// Strict lower bound on the winning probability.
    pub confidence_threshold: f64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            min_distinct_accounts: 20,
            confidence_threshold: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionOutcome {
    pub labels: Labels,
    /// Unlabeled users with enough distinct accounts to be classified.
    pub considered: usize,
    pub added: usize,
}

/// Training examples from every SUPP/OPP user with a nonempty account bag.
pub fn training_examples(
    profiles: &BTreeMap<String, UserProfile>,
    labels: &Labels,
) -> Vec<(FeatureBag, Stance)> {
    profiles
        .values()
        .filter_map(|p| {
            let stance = labels.stance(&p.user_id)?;
            let bag = FeatureBag::from_profile(p);
            (!bag.is_empty()).then_some((bag, stance))
        })
        .collect()
}

/// Labels unlabeled users with enough distinct retweeted accounts when the
/// classifier is confident enough. Existing labels are never touched.
pub fn expand_labels(
    model: &ClassifierModel,
    profiles: &BTreeMap<String, UserProfile>,
    labels: &Labels,
    cfg: &ExpansionConfig,
) -> ExpansionOutcome {
    let mut out = labels.clone();
    let (mut considered, mut added) = (0, 0);
    for p in profiles.values() {
        if labels.get(&p.user_id) != StanceLabel::Unlabeled
            || p.distinct_of(ElementKind::RetweetedAccount) < cfg.min_distinct_accounts
        {
            continue;
        }
        considered += 1;
        let Ok(pred) = model.predict(&FeatureBag::from_profile(p)) else {
            continue;
        };
        if pred.confidence > cfg.confidence_threshold {
            out.set(
                p.user_id.clone(),
                StanceLabel::Labeled {
                    stance: pred.stance,
                    provenance: Provenance::Classifier,
                },
            );
            added += 1;
        }
    }
    ExpansionOutcome {
        labels: out,
        considered,
        added,
    }
}
