//! Planted-topic corpora: documents whose embeddings come from well-separated
//! Gaussians and whose tokens come from per-topic signature vocabularies.
//! Used by tests, benchmarks, and the demo `generate` command.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::CorpusRecord;
use crate::embedding::EmbeddingSet;
use crate::{Error, Result};

const THEMES: [[&str; 8]; 8] = [
    ["loan", "credit", "interest", "bank", "mortgage", "payment", "debt", "account"],
    ["match", "goal", "league", "coach", "season", "striker", "stadium", "referee"],
    ["patient", "clinic", "vaccine", "doctor", "symptom", "therapy", "nurse", "dose"],
    ["storm", "rainfall", "forecast", "humidity", "drought", "wind", "flood", "cloud"],
    ["guitar", "album", "concert", "melody", "chorus", "drummer", "lyric", "tour"],
    ["orbit", "rocket", "satellite", "launch", "astronaut", "telescope", "lunar", "probe"],
    ["harvest", "wheat", "tractor", "soil", "irrigation", "orchard", "cattle", "barley"],
    ["court", "judge", "verdict", "lawyer", "appeal", "statute", "jury", "ruling"],
];

const BACKGROUND: [&str; 12] = [
    "report", "people", "today", "group", "local", "public", "recent", "number", "change", "plan", "issue", "level",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedSpec {
    pub n_docs: usize,
    pub n_topics: usize,
    pub dim: usize,
    pub sigma: f64,
    /// Distance between planted means, in units of `sigma`.
    pub separation: f64,
    pub doc_len: usize,
    /// Probability that a token comes from the topic's vocabulary rather
    /// than the shared background.
    pub topic_rate: f64,
    /// Extra near-copies of existing documents.
    pub duplicates: usize,
    /// Extra documents with a single token.
    pub short_docs: usize,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            n_docs: 300,
            n_topics: 3,
            dim: 16,
            sigma: 1.0,
            separation: 8.0,
            doc_len: 24,
            topic_rate: 0.7,
            duplicates: 0,
            short_docs: 0,
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub records: Vec<CorpusRecord>,
    pub embeddings: EmbeddingSet,
    /// Planted topic of each record.
    pub truth: Vec<usize>,
    /// The most frequent term of each planted topic.
    pub signatures: Vec<String>,
    pub means: Vec<Vec<f64>>,
}

/// Vocabulary of planted topic `t`; the first word is its signature.
pub fn topic_words(t: usize) -> Vec<String> {
    let theme = &THEMES[t % THEMES.len()];
    let round = t / THEMES.len();
    theme
        .iter()
        .map(|w| if round == 0 { (*w).to_owned() } else { format!("{w}{round}") })
        .collect()
}

pub fn planted_corpus(spec: &PlantedSpec) -> Result<PlantedCorpus> {
    if spec.n_topics < 1 || spec.dim < spec.n_topics || spec.n_docs < spec.n_topics {
        return Err(Error::Config(format!(
            "planted corpus needs n_docs >= n_topics >= 1 and dim >= n_topics (got {} docs, {} topics, dim {})",
            spec.n_docs, spec.n_topics, spec.dim
        )));
    }
    if !(spec.sigma > 0.0) || !(0.0..=1.0).contains(&spec.topic_rate) || spec.doc_len < 1 {
        return Err(Error::Config("planted corpus needs sigma > 0, topic_rate in [0, 1], doc_len >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.sigma).expect("positive sigma");
    // Means on scaled basis vectors are pairwise `separation * sigma` apart.
    let scale = spec.separation * spec.sigma / std::f64::consts::SQRT_2;
    let means: Vec<Vec<f64>> = (0..spec.n_topics)
        .map(|t| (0..spec.dim).map(|j| if j == t { scale } else { 0.0 }).collect())
        .collect();
    let vocab: Vec<Vec<String>> = (0..spec.n_topics).map(topic_words).collect();
    // Zipf-like weights so the signature dominates each topic.
    let weights: Vec<f64> = (0..8).map(|r| 1.0 / (r as f64 + 1.0)).collect();
    let wsum: f64 = weights.iter().sum();

    let mut records = Vec::new();
    let mut values: Vec<f32> = Vec::new();
    let mut truth = Vec::new();
    let mut ids = Vec::new();
    for i in 0..spec.n_docs {
        let t = i % spec.n_topics;
        let mut tokens = vec![vocab[t][0].clone()];
        while tokens.len() < spec.doc_len {
            if rng.random::<f64>() < spec.topic_rate {
                let mut u = rng.random::<f64>() * wsum;
                let mut r = 0;
                while r + 1 < weights.len() && u >= weights[r] {
                    u -= weights[r];
                    r += 1;
                }
                tokens.push(vocab[t][r].clone());
            } else {
                tokens.push(BACKGROUND[rng.random_range(0..BACKGROUND.len())].to_owned());
            }
        }
        let id = format!("doc{i:05}");
        values.extend(means[t].iter().map(|m| (m + noise.sample(&mut rng)) as f32));
        records.push(CorpusRecord {
            id: id.clone(),
            text: Some(tokens.join(" ")),
            tokens: None,
            label: Some(format!("topic{t}")),
        });
        ids.push(id);
        truth.push(t);
    }
    for j in 0..spec.duplicates {
        let src = j % spec.n_docs;
        let id = format!("dup{j:05}");
        let row: Vec<f32> = values[src * spec.dim..(src + 1) * spec.dim]
            .iter()
            .map(|v| v + (1e-4 * noise.sample(&mut rng)) as f32)
            .collect();
        values.extend(row);
        let mut rec = records[src].clone();
        rec.id = id.clone();
        records.push(rec);
        ids.push(id);
        truth.push(truth[src]);
    }
    for j in 0..spec.short_docs {
        let t = j % spec.n_topics;
        let id = format!("short{j:05}");
        values.extend(means[t].iter().map(|m| (m + noise.sample(&mut rng)) as f32));
        records.push(CorpusRecord {
            id: id.clone(),
            text: Some(vocab[t][0].clone()),
            tokens: None,
            label: Some(format!("topic{t}")),
        });
        ids.push(id);
        truth.push(t);
    }
    let embeddings = EmbeddingSet::new(ids, spec.dim, values, "planted-gaussian")?;
    Ok(PlantedCorpus {
        records,
        embeddings,
        truth,
        signatures: vocab.iter().map(|v| v[0].clone()).collect(),
        means,
    })
}

impl PlantedCorpus {
    /// Writes `corpus.jsonl`, `embeddings.json`, `embeddings.f32`,
    /// `embeddings.ids`, and a `config.json` with `k` topics using relative
    /// paths. Returns the config as written.
    pub fn write(&self, dir: &Path, k: usize) -> Result<RunConfig> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let corpus_path = dir.join("corpus.jsonl");
        let mut w = BufWriter::new(File::create(&corpus_path).map_err(|e| Error::io(&corpus_path, e))?);
        for r in &self.records {
            writeln!(w, "{}", serde_json::to_string(r)?).map_err(|e| Error::io(&corpus_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&corpus_path, e))?;
        self.embeddings.save(
            &dir.join("embeddings.json"),
            &dir.join("embeddings.f32"),
            &dir.join("embeddings.ids"),
        )?;
        let config = RunConfig::new("corpus.jsonl", "embeddings.json", "embeddings.f32", k);
        let config_path = dir.join("config.json");
        fs::write(&config_path, serde_json::to_string_pretty(&config)?).map_err(|e| Error::io(&config_path, e))?;
        Ok(config)
    }
}
