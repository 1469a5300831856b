use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{mock_embed, EmbeddingError};
use crate::gateway::{EndpointConfig, HttpClient};

/// Raw vectors for a batch of texts, one per input, in input order.
pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbeddingError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Registered provider name: "mock" or "http".
    pub provider: String,
    pub model_id: String,
    /// Expected dimension; every returned vector must match.
    pub dim: usize,
    /// Mock only.
    pub seed: u64,
    pub endpoint: Option<EndpointConfig>,
    pub cache_dir: Option<PathBuf>,
    pub batch_size: usize,
    /// Embed "Agent k: content" instead of the raw turn content.
    pub role_prefix: bool,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            provider: "mock".into(),
            model_id: "mock-embed".into(),
            dim: 256,
            seed: 0,
            endpoint: None,
            cache_dir: None,
            batch_size: 64,
            role_prefix: false,
        }
    }
}

impl EmbeddingConfig {
    pub fn qwen(endpoint: EndpointConfig) -> Self {
        Self {
            provider: "http".into(),
            model_id: "Qwen/Qwen3-Embedding-0.6B".into(),
            dim: 1024,
            endpoint: Some(endpoint),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim < 2 {
            return Err(EmbeddingError::DimTooSmall(self.dim));
        }
        if self.batch_size == 0 {
            return Err(EmbeddingError::Config("batch_size must be positive".into()));
        }
        if self.model_id.is_empty() {
            return Err(EmbeddingError::Config("model_id is empty".into()));
        }
        Ok(())
    }
}

pub struct MockEmbeddingProvider {
    model_id: String,
    dim: usize,
    seed: u64,
}

impl MockEmbeddingProvider {
    pub fn new(model_id: impl Into<String>, dim: usize, seed: u64) -> Result<Self, EmbeddingError> {
        if dim < 2 {
            return Err(EmbeddingError::DimTooSmall(dim));
        }
        Ok(Self { model_id: model_id.into(), dim, seed })
    }
}

impl EmbeddingProvider for MockEmbeddingProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbeddingError> {
        texts
            .iter()
            .map(|t| Ok(mock_embed(t, self.dim, self.seed)?.values.iter().map(|&v| v as f32).collect()))
            .collect()
    }
}

/// OpenAI-style `/embeddings`: `{"model", "input": [..]}` in,
/// `{"data": [{"index", "embedding": [..]}]}` out.
pub struct HttpEmbeddingProvider {
    model_id: String,
    client: HttpClient,
}

impl HttpEmbeddingProvider {
    pub fn new(model_id: impl Into<String>, client: HttpClient) -> Self {
        Self { model_id: model_id.into(), client }
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, EmbeddingError> {
        let body = json!({ "model": self.model_id, "input": texts }).to_string();
        let (reply, _) = self.client.post("embeddings", &body)?;
        parse_embeddings(&reply, texts.len())
    }
}

fn parse_embeddings(body: &str, expected: usize) -> Result<Vec<Vec<f32>>, EmbeddingError> {
    let v: Value = serde_json::from_str(body).map_err(|e| EmbeddingError::Malformed(e.to_string()))?;
    let data = v["data"].as_array().ok_or_else(|| EmbeddingError::Malformed("missing data array".into()))?;
    if data.len() != expected {
        return Err(EmbeddingError::Malformed(format!("{} embeddings for {expected} inputs", data.len())));
    }
    let mut out: Vec<Option<Vec<f32>>> = vec![None; expected];
    for (pos, item) in data.iter().enumerate() {
        let idx = item["index"].as_u64().map(|i| i as usize).unwrap_or(pos);
        let values = item["embedding"]
            .as_array()
            .ok_or_else(|| EmbeddingError::Malformed(format!("item {pos} has no embedding")))?
            .iter()
            .map(|x| x.as_f64().map(|f| f as f32))
            .collect::<Option<Vec<f32>>>()
            .ok_or_else(|| EmbeddingError::Malformed(format!("item {pos} has a non-numeric value")))?;
        let slot = out.get_mut(idx).ok_or_else(|| EmbeddingError::Malformed(format!("index {idx} out of range")))?;
        if slot.replace(values).is_some() {
            return Err(EmbeddingError::Malformed(format!("index {idx} repeated")));
        }
    }
    Ok(out.into_iter().map(|v| v.expect("every slot filled")).collect())
}

type Builder = fn(&EmbeddingConfig) -> Result<Arc<dyn EmbeddingProvider>, EmbeddingError>;

/// Provider constructors by name.
#[derive(Clone)]
pub struct EmbedderRegistry {
    builders: BTreeMap<String, Builder>,
}

impl EmbedderRegistry {
    pub fn builtin() -> Self {
        let mut r = Self { builders: BTreeMap::new() };
        r.register("mock", |c| Ok(Arc::new(MockEmbeddingProvider::new(c.model_id.clone(), c.dim, c.seed)?)));
        r.register("http", |c| {
            let endpoint =
                c.endpoint.clone().ok_or_else(|| EmbeddingError::Config("http embedder needs an endpoint".into()))?;
            Ok(Arc::new(HttpEmbeddingProvider::new(c.model_id.clone(), HttpClient::from_env(endpoint)?)))
        });
        r
    }

    pub fn register(&mut self, name: &str, builder: Builder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn build(&self, config: &EmbeddingConfig) -> Result<Arc<dyn EmbeddingProvider>, EmbeddingError> {
        config.validate()?;
        let builder = self
            .builders
            .get(&config.provider)
            .ok_or_else(|| EmbeddingError::Config(format!("unknown embedding provider {:?}", config.provider)))?;
        builder(config)
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(String::as_str).collect()
    }
}
