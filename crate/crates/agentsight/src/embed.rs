//! Text embeddings for the semantic detector.
//!
//! The default embedder hashes token n-grams into a fixed number of signed
//! buckets and L2-normalizes; it is a pure function of (text, dimension)
//! and needs no network. A remote client with the same interface can call
//! an embedding HTTP service instead.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Embedding = Vec<f64>;

pub const DEFAULT_DIMENSION: usize = 384;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding transport failed after {attempts} attempts: {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("embedding response violates the contract: {0}")]
    Contract(String),
    #[error("invalid embedder spec: {0}")]
    InvalidSpec(String),
}

pub trait TextEmbedder: Send + Sync {
    fn dimension(&self) -> usize;

    /// Embeds texts in order; output length equals input length and every
    /// vector has `dimension()` entries.
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError>;
}

/// Hash-based n-gram embedder. Tokens are lowercased alphanumeric words;
/// unigrams and bigrams are hashed into buckets with a sign bit, then the
/// bucket counts are L2-normalized. Empty text maps to the zero vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashingEmbedder {
    dimension: usize,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x100_0000_01b3;
/// Fixed salt so embeddings are stable across processes and platforms.
const HASH_SALT: u64 = 0x5eed_0e11_ab1e_0001;

fn fnv1a(seed: u64, data: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET ^ seed;
    for byte in data {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Result<Self, EmbedError> {
        if dimension == 0 {
            return Err(EmbedError::InvalidSpec("dimension must be >= 1".into()));
        }
        Ok(Self { dimension })
    }

    fn tokens(text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_lowercase())
            .collect()
    }

    fn embed_one(&self, text: &str) -> Embedding {
        let mut vector = vec![0.0; self.dimension];
        let tokens = Self::tokens(text);
        let mut add = |gram: &str| {
            let hash = fnv1a(HASH_SALT, gram.as_bytes());
            let bucket = (hash % self.dimension as u64) as usize;
            let sign = if hash & (1 << 63) == 0 { 1.0 } else { -1.0 };
            vector[bucket] += sign;
        };
        for token in &tokens {
            add(token);
        }
        for pair in tokens.windows(2) {
            add(&format!("{} {}", pair[0], pair[1]));
        }
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut vector {
                *v /= norm;
            }
        }
        vector
    }
}

impl TextEmbedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Client for an embedding endpoint speaking `{model, input}` requests and
/// `{data: [{embedding}]}` responses.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    dimension: usize,
    api_key: Option<String>,
    timeout: std::time::Duration,
    max_retries: u32,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        dimension: usize,
        api_key: Option<String>,
        timeout: std::time::Duration,
        max_retries: u32,
    ) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            dimension,
            api_key,
            timeout,
            max_retries,
        }
    }
}

impl TextEmbedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| EmbedError::Transport { attempts: 0, detail: e.to_string() })?;

        let mut last_detail = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(std::time::Duration::from_millis(50 << attempt.min(6)));
            }
            let mut request = client
                .post(&self.endpoint)
                .json(&EmbedRequest { model: &self.model, input: texts });
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Ok(response) if response.status().is_success() => {
                    let parsed: EmbedResponse = response
                        .json()
                        .map_err(|e| EmbedError::Contract(format!("bad response body: {e}")))?;
                    if parsed.data.len() != texts.len() {
                        return Err(EmbedError::Contract(format!(
                            "requested {} embeddings, got {}",
                            texts.len(),
                            parsed.data.len()
                        )));
                    }
                    let mut embeddings = Vec::with_capacity(parsed.data.len());
                    for (i, datum) in parsed.data.into_iter().enumerate() {
                        if datum.embedding.len() != self.dimension {
                            return Err(EmbedError::Contract(format!(
                                "embedding {i} has dimension {}, expected {}",
                                datum.embedding.len(),
                                self.dimension
                            )));
                        }
                        embeddings.push(datum.embedding);
                    }
                    return Ok(embeddings);
                }
                Ok(response) if response.status().is_server_error() => {
                    last_detail = format!("server status {}", response.status());
                }
                Ok(response) => {
                    return Err(EmbedError::Contract(format!(
                        "embedding endpoint returned {}",
                        response.status()
                    )));
                }
                Err(err) => last_detail = err.to_string(),
            }
        }
        Err(EmbedError::Transport { attempts: self.max_retries + 1, detail: last_detail })
    }
}

/// Serializable embedder selection stored in detector bundles and configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderSpec {
    Hashing {
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
    Remote {
        endpoint: String,
        model: String,
        #[serde(default = "default_dimension")]
        dimension: usize,
        /// Environment variable holding the bearer token.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default = "default_retries")]
        max_retries: u32,
    },
}

fn default_dimension() -> usize {
    DEFAULT_DIMENSION
}

fn default_timeout_secs() -> u64 {
    30
}

fn default_retries() -> u32 {
    2
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::Hashing { dimension: DEFAULT_DIMENSION }
    }
}

impl EmbedderSpec {
    pub fn dimension(&self) -> usize {
        match self {
            EmbedderSpec::Hashing { dimension } => *dimension,
            EmbedderSpec::Remote { dimension, .. } => *dimension,
        }
    }

    pub fn build(&self) -> Result<Box<dyn TextEmbedder>, EmbedError> {
        match self {
            EmbedderSpec::Hashing { dimension } => Ok(Box::new(HashingEmbedder::new(*dimension)?)),
            EmbedderSpec::Remote { endpoint, model, dimension, api_key_env, timeout_secs, max_retries } => {
                let api_key = match api_key_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        EmbedError::InvalidSpec(format!("api key env var {var} is not set"))
                    })?),
                    None => None,
                };
                Ok(Box::new(RemoteEmbedder::new(
                    endpoint.clone(),
                    model.clone(),
                    *dimension,
                    api_key,
                    std::time::Duration::from_secs(*timeout_secs),
                    *max_retries,
                )))
            }
        }
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn embedding_is_deterministic_and_normalized() {
        let embedder = HashingEmbedder::new(DEFAULT_DIMENSION).unwrap();
        let texts = strings(&["The planner compiled four options.", "totally different words"]);
        let a = embedder.embed(&texts).unwrap();
        let b = embedder.embed(&texts).unwrap();
        assert_eq!(a, b);
        for vector in &a {
            assert_eq!(vector.len(), DEFAULT_DIMENSION);
            let norm: f64 = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_text_embeds_to_zero() {
        let embedder = HashingEmbedder::new(64).unwrap();
        let out = embedder.embed(&strings(&[""])).unwrap();
        assert!(out[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn output_preserves_input_order() {
        let embedder = HashingEmbedder::new(128).unwrap();
        let texts = strings(&["alpha beta", "gamma delta", "alpha beta"]);
        let out = embedder.embed(&texts).unwrap();
        assert_eq!(out[0], out[2]);
        assert_ne!(out[0], out[1]);
    }

    #[test]
    fn identical_texts_have_unit_cosine() {
        let embedder = HashingEmbedder::new(DEFAULT_DIMENSION).unwrap();
        let out = embedder.embed(&strings(&["same text twice", "same text twice"])).unwrap();
        assert!((cosine(&out[0], &out[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_token_texts_stay_nearly_orthogonal() {
        let embedder = HashingEmbedder::new(DEFAULT_DIMENSION).unwrap();
        let pairs = [
            ("the planner ranked coastal options by cost", "erratic binary payload marker kv percent"),
            ("quarterly market analysis with fresh sources", "sealed directive steering sponsored vendor"),
            ("museum opening hours and transit options", "exclusive offer unlocked follow next link"),
        ];
        for (left, right) in pairs {
            let out = embedder.embed(&strings(&[left, right])).unwrap();
            let similarity = cosine(&out[0], &out[1]).abs();
            assert!(similarity < 0.2, "{left:?} vs {right:?}: {similarity}");
        }
    }

    #[test]
    fn casing_and_punctuation_do_not_change_tokens() {
        let embedder = HashingEmbedder::new(DEFAULT_DIMENSION).unwrap();
        let out = embedder.embed(&strings(&["Alpha, Beta!", "alpha beta"])).unwrap();
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn spec_round_trips_and_builds() {
        let spec = EmbedderSpec::default();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<EmbedderSpec>(&json).unwrap(), spec);
        assert_eq!(spec.build().unwrap().dimension(), DEFAULT_DIMENSION);

        let remote: EmbedderSpec = serde_json::from_str(
            r#"{"kind":"remote","endpoint":"http://localhost:9","model":"m"}"#,
        )
        .unwrap();
        assert_eq!(remote.dimension(), DEFAULT_DIMENSION);
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(HashingEmbedder::new(0).is_err());
    }
}
