//! Synthetic review corpus with matching "pretrained" vectors.
//!
//! Every aspect class owns a cluster of signal words and each polarity owns a
//! cluster of polarity words. A review mentions words from the clusters of
//! its labels plus neutral filler. The emitted vectors place every word near
//! its cluster prototype, so a model reading them starts out knowing which
//! words belong together; a self-trained table has to learn that from labels.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{write_jsonl, CorpusRow, Split};
use crate::embeddings::PretrainedVectors;
use crate::error::{Error, Result};
use crate::taxonomy::{Taxonomy, REVIEW_ASPECTS, REVIEW_ASPECT_TRAIN_COUNTS, SENTIMENTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    /// Rows (out of `n_samples`) marked with the validation split.
    pub validation_size: usize,
    pub aspect_classes: usize,
    /// Signal words per aspect class.
    pub words_per_class: usize,
    pub polarity_words: usize,
    pub filler_words: usize,
    /// Probability that a signal word is accompanied by a stray word of another class.
    pub noise_rate: f64,
    pub embedding_dim: usize,
    /// Spread of word vectors around their cluster prototype.
    pub cluster_spread: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_samples: 2400,
            validation_size: 400,
            aspect_classes: 13,
            words_per_class: 12,
            polarity_words: 10,
            filler_words: 80,
            noise_rate: 0.1,
            embedding_dim: 16,
            cluster_spread: 0.25,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub taxonomy: Taxonomy,
    pub rows: Vec<CorpusRow>,
    pub embeddings: PretrainedVectors,
}

impl SyntheticCorpus {
    /// Writes `corpus.jsonl`, `embeddings.txt` and `taxonomy.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut corpus = Vec::new();
        write_jsonl(&mut corpus, &self.rows)?;
        std::fs::write(dir.join("corpus.jsonl"), corpus)?;
        let mut emb = Vec::new();
        self.embeddings.write(&mut emb)?;
        std::fs::write(dir.join("embeddings.txt"), emb)?;
        std::fs::write(dir.join("taxonomy.json"), serde_json::to_vec_pretty(&self.taxonomy)?)?;
        Ok(())
    }
}

fn aspect_word(class: usize, j: usize) -> String {
    format!("a{class:02}w{j:02}")
}

fn polarity_word(polarity: usize, j: usize) -> String {
    let p = if polarity == 0 { "pos" } else { "neg" };
    format!("{p}{j:02}")
}

fn filler_word(j: usize) -> String {
    format!("f{j:03}")
}

fn taxonomy_for(classes: usize) -> Taxonomy {
    let aspects = if classes == REVIEW_ASPECTS.len() {
        REVIEW_ASPECTS.iter().map(|s| s.to_string()).collect()
    } else {
        (0..classes).map(|c| format!("Aspect {c:02}")).collect()
    };
    Taxonomy { aspects, sentiment: SENTIMENTS.iter().map(|s| s.to_string()).collect() }
}

/// Class prior follows the training counts of the review aspects, cycled
/// when the class count differs.
fn class_weights(classes: usize) -> Vec<f64> {
    (0..classes)
        .map(|c| REVIEW_ASPECT_TRAIN_COUNTS[c % REVIEW_ASPECT_TRAIN_COUNTS.len()] as f64)
        .collect()
}

fn weighted_pick<R: Rng>(weights: &[f64], excluded: &[usize], rng: &mut R) -> usize {
    let total: f64 = weights.iter().enumerate().filter(|(i, _)| !excluded.contains(i)).map(|(_, w)| w).sum();
    let mut x = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if excluded.contains(&i) {
            continue;
        }
        last = i;
        if x < w {
            return i;
        }
        x -= w;
    }
    last
}

fn gaussian_vec<R: Rng>(dim: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    }).collect::<Vec<f64>>()
}

fn round6(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| (x * 1e6).round() / 1e6).collect()
}

pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.aspect_classes < 2 {
        return Err(Error::Config("synthetic corpus needs at least 2 aspect classes".into()));
    }
    if spec.words_per_class == 0 || spec.polarity_words == 0 || spec.filler_words == 0 || spec.embedding_dim == 0 {
        return Err(Error::Config("word counts and embedding_dim must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.noise_rate) {
        return Err(Error::Config("noise_rate must be in [0, 1]".into()));
    }
    if spec.validation_size > spec.n_samples {
        return Err(Error::Config("validation_size exceeds n_samples".into()));
    }

    let classes = spec.aspect_classes;
    let taxonomy = taxonomy_for(classes);
    let weights = class_weights(classes);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut rows = Vec::with_capacity(spec.n_samples);
    let first_validation = spec.n_samples - spec.validation_size;
    for n in 0..spec.n_samples {
        let n_aspects = match rng.gen::<f64>() {
            x if x < 0.55 => 1,
            x if x < 0.85 => 2,
            _ => 3,
        }
        .min(classes);
        let mut aspects: Vec<usize> = Vec::with_capacity(n_aspects);
        for _ in 0..n_aspects {
            let c = weighted_pick(&weights, &aspects, &mut rng);
            aspects.push(c);
        }
        aspects.sort_unstable();
        let polarities: Vec<usize> = match rng.gen::<f64>() {
            x if x < 0.5 => vec![0],
            x if x < 0.8 => vec![1],
            _ => vec![0, 1],
        };

        let mut words = Vec::new();
        for &c in &aspects {
            for _ in 0..rng.gen_range(2..=3) {
                words.push(aspect_word(c, rng.gen_range(0..spec.words_per_class)));
                if rng.gen::<f64>() < spec.noise_rate {
                    let mut other = rng.gen_range(0..classes - 1);
                    if other >= c {
                        other += 1;
                    }
                    words.push(aspect_word(other, rng.gen_range(0..spec.words_per_class)));
                }
            }
        }
        for &p in &polarities {
            for _ in 0..rng.gen_range(1..=2) {
                words.push(polarity_word(p, rng.gen_range(0..spec.polarity_words)));
            }
        }
        for _ in 0..rng.gen_range(2..=5) {
            words.push(filler_word(rng.gen_range(0..spec.filler_words)));
        }
        words.shuffle(&mut rng);
        let mut text = words.join(" ");
        if let Some(first) = text.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        text.push('.');

        rows.push(CorpusRow {
            id: format!("r{n:06}"),
            text,
            aspects: Some(aspects.iter().map(|&c| taxonomy.aspects[c].clone()).collect()),
            sentiment: Some(polarities.iter().map(|&p| taxonomy.sentiment[p].clone()).collect()),
            split: Some(if n >= first_validation { Split::Validation } else { Split::Train }),
        });
    }

    // Vectors: a prototype per cluster, words scattered around it.
    let dim = spec.embedding_dim;
    let spread = spec.cluster_spread;
    let mut words = Vec::new();
    let mut vectors = Vec::new();
    for c in 0..classes {
        let proto = gaussian_vec(dim, 1.0, &mut rng);
        for j in 0..spec.words_per_class {
            let noise = gaussian_vec(dim, spread, &mut rng);
            words.push(aspect_word(c, j));
            vectors.push(round6(proto.iter().zip(noise).map(|(p, e)| p + e).collect()));
        }
    }
    for p in 0..2 {
        let proto = gaussian_vec(dim, 1.0, &mut rng);
        for j in 0..spec.polarity_words {
            let noise = gaussian_vec(dim, spread, &mut rng);
            words.push(polarity_word(p, j));
            vectors.push(round6(proto.iter().zip(noise).map(|(p, e)| p + e).collect()));
        }
    }
    for j in 0..spec.filler_words {
        words.push(filler_word(j));
        vectors.push(round6(gaussian_vec(dim, 0.3, &mut rng)));
    }
    words.push(".".into());
    vectors.push(vec![0.0; dim]);

    Ok(SyntheticCorpus { taxonomy, rows, embeddings: PretrainedVectors { dim, words, vectors } })
}
