//! Sparse logistic-regression baseline over sharer identities and title /
//! description tokens.
//!
//! Sign convention: a positive score means fake. Weights are stored on a
//! fixed 2^-24 grid, so any sum of weights is exact in `f64` (while the
//! running magnitude stays below 2^29) and the incremental score of an item
//! equals its batch score bit for bit, whatever order sharers arrive in.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{scrub_site_mentions, AliasTable, UrlBundle};
use crate::label::Label;

const WEIGHT_SCALE: f64 = (1u64 << 24) as f64;
/// Weights are clamped to this magnitude before quantization.
pub const MAX_WEIGHT: f64 = 4096.0;

/// Snaps a weight onto the model's fixed grid.
pub fn quantize(w: f64) -> f64 {
    if !w.is_finite() {
        return 0.0;
    }
    (w.clamp(-MAX_WEIGHT, MAX_WEIGHT) * WEIGHT_SCALE).round() / WEIGHT_SCALE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMode {
    /// Sharer identities only.
    U,
    /// Sharers plus title/description tokens.
    UT,
    /// Tokens only.
    T,
}

impl FeatureMode {
    pub fn uses_users(self) -> bool {
        matches!(self, FeatureMode::U | FeatureMode::UT)
    }

    pub fn uses_tokens(self) -> bool {
        matches!(self, FeatureMode::UT | FeatureMode::T)
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::U => "U",
            FeatureMode::UT => "UT",
            FeatureMode::T => "T",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "U" => Ok(FeatureMode::U),
            "UT" => Ok(FeatureMode::UT),
            "T" => Ok(FeatureMode::T),
            other => Err(Error::InvalidInput(format!(
                "unknown feature mode {other:?}"
            ))),
        }
    }
}

pub fn user_feature(handle: &str) -> String {
    format!("user:{handle}")
}

pub fn token_feature(token: &str) -> String {
    format!("token:{token}")
}

/// Binary sparse features of one URL.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureVector {
    pub features: BTreeSet<String>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Token features only; the starting point of an online score.
    pub fn without_users(&self) -> FeatureVector {
        FeatureVector {
            features: self
                .features
                .iter()
                .filter(|f| !f.starts_with("user:"))
                .cloned()
                .collect(),
        }
    }
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Builds the feature set of one URL. Title and description are scrubbed of
/// the URL's own site and its aliases before tokenizing.
pub fn featurize(bundle: &UrlBundle, mode: FeatureMode, aliases: &AliasTable) -> FeatureVector {
    let mut features = BTreeSet::new();
    if mode.uses_users() {
        features.extend(bundle.sharers().into_iter().map(user_feature));
    }
    if mode.uses_tokens() {
        let alias_list = aliases.get(&bundle.site);
        for text in [&bundle.title, &bundle.description].into_iter().flatten() {
            let clean = scrub_site_mentions(text, &bundle.site, alias_list);
            features.extend(tokenize(&clean).map(|t| token_feature(&t)));
        }
    }
    FeatureVector { features }
}

#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: u32,
    pub batch_size: usize,
    /// L2 penalty, applied to the weights a mini-batch touches.
    pub l2: f64,
    /// Weight each class by N / (2 * N_class).
    pub class_weighting: bool,
    pub rng_seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.5,
            epochs: 30,
            batch_size: 32,
            l2: 1e-4,
            class_weighting: true,
            rng_seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || !(self.l2 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bad hyperparameters {self:?}"
            )));
        }
        Ok(())
    }
}

/// Per-class weights `(fake, reliable)` = `N / (2 * N_class)`.
pub fn class_weights(n_fake: usize, n_reliable: usize) -> (f64, f64) {
    let n = (n_fake + n_reliable) as f64;
    (n / (2.0 * n_fake as f64), n / (2.0 * n_reliable as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel {
    weights: HashMap<String, f64>,
    bias: f64,
    pub mode: FeatureMode,
    pub hyperparams: Hyperparams,
}

impl SparseModel {
    /// Builds a model; weights and bias are snapped to the grid and zero
    /// weights are dropped.
    pub fn new(
        weights: impl IntoIterator<Item = (String, f64)>,
        bias: f64,
        mode: FeatureMode,
        hyperparams: Hyperparams,
    ) -> Self {
        SparseModel {
            weights: weights
                .into_iter()
                .map(|(k, w)| (k, quantize(w)))
                .filter(|&(_, w)| w != 0.0)
                .collect(),
            bias: quantize(bias),
            mode,
            hyperparams,
        }
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Weight of a feature; unknown features weigh zero.
    pub fn weight(&self, feature: &str) -> f64 {
        self.weights.get(feature).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sorted_weights(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<_> = self.weights.iter().map(|(k, &w)| (k.as_str(), w)).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let h = &self.hyperparams;
        writeln!(out, "#newsrep-logistic\t1")?;
        writeln!(out, "#bias\t{}", self.bias)?;
        writeln!(out, "#mode\t{}", self.mode)?;
        writeln!(out, "#learning_rate\t{}", h.learning_rate)?;
        writeln!(out, "#epochs\t{}", h.epochs)?;
        writeln!(out, "#batch_size\t{}", h.batch_size)?;
        writeln!(out, "#l2\t{}", h.l2)?;
        writeln!(out, "#class_weighting\t{}", h.class_weighting)?;
        writeln!(out, "#rng_seed\t{}", h.rng_seed)?;
        for (k, w) in self.sorted_weights() {
            writeln!(out, "{k}\t{w}")?;
        }
        out.flush()
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut header: BTreeMap<String, String> = BTreeMap::new();
        let mut weights = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let loc = || format!("model line {}", n + 1);
            let line = line.map_err(|e| Error::parse(loc(), e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(loc(), "expected key<TAB>value"))?;
            if let Some(name) = key.strip_prefix('#') {
                header.insert(name.to_owned(), value.to_owned());
            } else {
                let w: f64 = value
                    .parse()
                    .map_err(|_| Error::parse(loc(), "bad weight"))?;
                weights.push((key.to_owned(), w));
            }
        }
        if header.get("newsrep-logistic").map(String::as_str) != Some("1") {
            return Err(Error::parse("model header", "not a newsrep logistic model"));
        }
        let get = |k: &str| -> Result<&str> {
            header
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::parse("model header", format!("missing {k}")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::parse("model header", format!("bad {k}")))
        };
        let hyperparams = Hyperparams {
            learning_rate: num("learning_rate")?,
            epochs: num("epochs")? as u32,
            batch_size: num("batch_size")? as usize,
            l2: num("l2")?,
            class_weighting: get("class_weighting")? == "true",
            rng_seed: get("rng_seed")?
                .parse()
                .map_err(|_| Error::parse("model header", "bad rng_seed"))?,
        };
        Ok(SparseModel::new(
            weights,
            num("bias")?,
            get("mode")?.parse()?,
            hyperparams,
        ))
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Fits the weighted logistic loss with deterministic mini-batch gradient
/// descent. Target 1 is fake.
pub fn train(
    examples: &[LabeledExample],
    mode: FeatureMode,
    hyper: &Hyperparams,
) -> Result<SparseModel> {
    hyper.validate()?;
    let n_fake = examples.iter().filter(|e| e.label == Label::Fake).count();
    let n_reliable = examples.len() - n_fake;
    if n_fake == 0 || n_reliable == 0 {
        return Err(Error::DegenerateTraining(format!(
            "need both classes, got {n_fake} fake and {n_reliable} reliable"
        )));
    }
    let (w_fake, w_reliable) = if hyper.class_weighting {
        class_weights(n_fake, n_reliable)
    } else {
        (1.0, 1.0)
    };

    // dense feature indices in sorted key order
    let vocab: BTreeSet<&str> = examples
        .iter()
        .flat_map(|e| e.features.features.iter().map(String::as_str))
        .collect();
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let rows: Vec<Vec<usize>> = examples
        .iter()
        .map(|e| {
            e.features
                .features
                .iter()
                .map(|f| index[f.as_str()])
                .collect()
        })
        .collect();

    let mut weights = vec![0.0f64; vocab.len()];
    let mut bias = 0.0f64;
    let mut grad = vec![0.0f64; vocab.len()];
    let mut touched: Vec<usize> = Vec::new();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.rng_seed);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            let mut grad_bias = 0.0;
            for &ex in batch {
                let row = &rows[ex];
                let score = bias + row.iter().map(|&f| weights[f]).sum::<f64>();
                let (target, cw) = match examples[ex].label {
                    Label::Fake => (1.0, w_fake),
                    Label::Reliable => (0.0, w_reliable),
                };
                let err = cw * (sigmoid(score) - target);
                grad_bias += err;
                for &f in row {
                    if grad[f] == 0.0 {
                        touched.push(f);
                    }
                    grad[f] += err;
                }
            }
            let scale = hyper.learning_rate / batch.len() as f64;
            bias -= scale * grad_bias;
            touched.sort_unstable();
            touched.dedup();
            for &f in &touched {
                weights[f] -= scale * grad[f] + hyper.learning_rate * hyper.l2 * weights[f];
                grad[f] = 0.0;
            }
            touched.clear();
        }
    }

    Ok(SparseModel::new(
        vocab.iter().map(|k| k.to_string()).zip(weights),
        bias,
        mode,
        hyper.clone(),
    ))
}

/// Batch score `bias + sum of weights` and its label (positive = fake).
pub fn predict(model: &SparseModel, features: &FeatureVector) -> (f64, Label) {
    let score = features
        .features
        .iter()
        .fold(model.bias, |acc, f| acc + model.weight(f));
    (score, label_of_score(score))
}

pub fn label_of_score(score: f64) -> Label {
    if score > 0.0 {
        Label::Fake
    } else {
        Label::Reliable
    }
}

/// Adds one new sharer's weight to a running score.
pub fn online_update(model: &SparseModel, running_score: f64, new_sharer: &str) -> f64 {
    running_score + model.weight(&user_feature(new_sharer))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(site: &str, title: &str, users: &[&str]) -> UrlBundle {
        UrlBundle {
            url: format!("https://{site}/story"),
            site: site.into(),
            first_seen: 1,
            title: Some(title.into()),
            description: None,
            shares: users.iter().map(|u| (u.to_string(), 1)).collect(),
        }
    }

    fn fv(keys: &[&str]) -> FeatureVector {
        FeatureVector {
            features: keys.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn modes_select_features() {
        let b = bundle("daily.example", "Breaking News", &["a", "b", "a"]);
        let none = AliasTable::default();
        assert_eq!(
            featurize(&b, FeatureMode::U, &none),
            fv(&["user:a", "user:b"])
        );
        assert_eq!(
            featurize(&b, FeatureMode::T, &none),
            fv(&["token:breaking", "token:news"])
        );
        assert_eq!(featurize(&b, FeatureMode::UT, &none).len(), 4);
    }

    #[test]
    fn own_site_is_scrubbed() {
        let b = bundle(
            "sitename.com",
            "SiteName says: read sitename.com daily",
            &["u"],
        );
        let f = featurize(&b, FeatureMode::UT, &AliasTable::default());
        assert!(!f.features.contains("token:sitename"));
        assert!(!f.features.iter().any(|k| k.contains("sitename")));
        assert!(f.features.contains("token:daily"));
    }

    #[test]
    fn class_weight_formula() {
        let (fake, reliable) = class_weights(10, 90);
        assert!((fake - 5.0).abs() < 1e-12);
        assert_eq!(format!("{reliable:.4}"), "0.5556");
    }

    #[test]
    fn single_class_is_degenerate() {
        let ex = vec![LabeledExample {
            features: fv(&["user:a"]),
            label: Label::Fake,
        }];
        assert!(matches!(
            train(&ex, FeatureMode::U, &Hyperparams::default()),
            Err(Error::DegenerateTraining(_))
        ));
    }

    #[test]
    fn predict_arithmetic() {
        let m = SparseModel::new(
            [("user:a".to_string(), 0.3), ("user:b".to_string(), -0.5)],
            0.1,
            FeatureMode::U,
            Hyperparams::default(),
        );
        assert_eq!(predict(&m, &FeatureVector::default()).0, m.bias());
        let (score, label) = predict(&m, &fv(&["user:a", "user:b"]));
        assert!((score + 0.1).abs() < 1e-6);
        assert_eq!(label, Label::Reliable);
    }

    #[test]
    fn online_update_arithmetic() {
        let m = SparseModel::new(
            [("user:x".to_string(), -0.7)],
            0.0,
            FeatureMode::U,
            Hyperparams::default(),
        );
        assert_eq!(online_update(&m, 0.2, "nobody"), 0.2);
        assert!((online_update(&m, 0.2, "x") + 0.5).abs() < 1e-6);
    }

    #[test]
    fn model_text_round_trip() {
        let m = SparseModel::new(
            [
                ("user:a".to_string(), 1.25),
                ("token:x".to_string(), -1.0 / 3.0),
            ],
            0.125,
            FeatureMode::UT,
            Hyperparams {
                rng_seed: 99,
                ..Hyperparams::default()
            },
        );
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = SparseModel::read(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn quantization_is_idempotent_and_bounded() {
        for w in [0.1, -0.3333, 1e9, -1e9, f64::NAN, 1e-12] {
            let q = quantize(w);
            assert_eq!(quantize(q), q);
            assert!(q.abs() <= MAX_WEIGHT);
        }
    }
}
