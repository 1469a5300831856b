use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::{cache_key, EmbedderRegistry, EmbeddingCache, EmbeddingConfig, EmbeddingError, EmbeddingProvider, EmbeddingVector};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmbeddingStats {
    pub cache_hits: u64,
    pub network_requests: u64,
    pub texts_embedded: u64,
}

/// Cache-fronted provider with a fixed expected dimension. Safe to share
/// across threads.
pub struct EmbeddingService {
    provider: Arc<dyn EmbeddingProvider>,
    cache: EmbeddingCache,
    dim: usize,
    batch_size: usize,
    cache_hits: AtomicU64,
    network_requests: AtomicU64,
    texts_embedded: AtomicU64,
}

impl EmbeddingService {
    pub fn new(provider: Arc<dyn EmbeddingProvider>, cache: EmbeddingCache, dim: usize, batch_size: usize) -> Self {
        Self {
            provider,
            cache,
            dim,
            batch_size: batch_size.max(1),
            cache_hits: AtomicU64::new(0),
            network_requests: AtomicU64::new(0),
            texts_embedded: AtomicU64::new(0),
        }
    }

    pub fn from_config(config: &EmbeddingConfig) -> Result<Self, EmbeddingError> {
        let provider = EmbedderRegistry::builtin().build(config)?;
        let cache = match &config.cache_dir {
            Some(dir) => EmbeddingCache::open(dir, &config.model_id)?,
            None => EmbeddingCache::in_memory(),
        };
        Ok(Self::new(provider, cache, config.dim, config.batch_size))
    }

    pub fn model_id(&self) -> &str {
        self.provider.model_id()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stats(&self) -> EmbeddingStats {
        EmbeddingStats {
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            network_requests: self.network_requests.load(Ordering::Relaxed),
            texts_embedded: self.texts_embedded.load(Ordering::Relaxed),
        }
    }

    pub fn evict_memory(&self) {
        self.cache.evict_memory();
    }

    /// One vector per input text, in order. Cached texts skip the provider;
    /// duplicates within a batch are sent once.
    pub fn embed_batch<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if texts.is_empty() {
            return Err(EmbeddingError::EmptyInput);
        }
        let model_id = self.provider.model_id().to_string();
        let mut found: HashMap<[u8; 32], Vec<f32>> = HashMap::new();
        let mut missing: Vec<(&str, [u8; 32])> = Vec::new();
        for text in texts {
            let text = text.as_ref();
            let key = cache_key(&model_id, text);
            if found.contains_key(&key) || missing.iter().any(|(_, k)| *k == key) {
                continue;
            }
            match self.cache.get(&key)? {
                Some(v) => {
                    self.check_dim(v.len())?;
                    self.cache_hits.fetch_add(1, Ordering::Relaxed);
                    found.insert(key, v);
                }
                None => missing.push((text, key)),
            }
        }
        for chunk in missing.chunks(self.batch_size) {
            let batch: Vec<&str> = chunk.iter().map(|(t, _)| *t).collect();
            self.network_requests.fetch_add(1, Ordering::Relaxed);
            let vectors = self.provider.embed(&batch)?;
            if vectors.len() != batch.len() {
                return Err(EmbeddingError::Malformed(format!("{} vectors for {} texts", vectors.len(), batch.len())));
            }
            for ((_, key), v) in chunk.iter().zip(vectors) {
                self.check_dim(v.len())?;
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(EmbeddingError::NonFinite);
                }
                self.cache.put(key, &v)?;
                found.insert(*key, v);
            }
            self.texts_embedded.fetch_add(batch.len() as u64, Ordering::Relaxed);
        }
        texts
            .iter()
            .map(|t| {
                let v = &found[&cache_key(&model_id, t.as_ref())];
                EmbeddingVector::new(v.iter().map(|&x| x as f64).collect(), model_id.clone())
            })
            .collect()
    }

    fn check_dim(&self, got: usize) -> Result<(), EmbeddingError> {
        if got != self.dim {
            return Err(EmbeddingError::DimensionMismatch { expected: self.dim, got });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::MockEmbeddingProvider;

    fn mock_service(cache: EmbeddingCache) -> EmbeddingService {
        EmbeddingService::new(Arc::new(MockEmbeddingProvider::new("m", 8, 1).unwrap()), cache, 8, 16)
    }

    #[test]
    fn duplicates_share_vectors_and_second_call_hits_cache() {
        let s = mock_service(EmbeddingCache::in_memory());
        let v = s.embed_batch(&["x", "y", "x"]).unwrap();
        assert_eq!(v[0], v[2]);
        assert_ne!(v[0], v[1]);
        assert_eq!(s.stats(), EmbeddingStats { cache_hits: 0, network_requests: 1, texts_embedded: 2 });
        let again = s.embed_batch(&["x"]).unwrap();
        assert_eq!(again[0], v[0]);
        assert_eq!(s.stats().network_requests, 1);
        assert_eq!(s.stats().cache_hits, 1);
    }

    #[test]
    fn disk_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let s = mock_service(EmbeddingCache::open(tmp.path(), "m").unwrap());
        let first = s.embed_batch(&["hello", "world"]).unwrap();
        s.evict_memory();
        let second = s.embed_batch(&["hello", "world"]).unwrap();
        assert_eq!(first, second);
        assert_eq!(s.stats().network_requests, 1);
        let fresh = mock_service(EmbeddingCache::open(tmp.path(), "m").unwrap());
        assert_eq!(fresh.embed_batch(&["world"]).unwrap()[0], first[1]);
        assert_eq!(fresh.stats().network_requests, 0);
    }

    #[test]
    fn wrong_dimension_is_a_hard_error() {
        let provider = Arc::new(MockEmbeddingProvider::new("m", 4, 1).unwrap());
        let s = EmbeddingService::new(provider, EmbeddingCache::in_memory(), 8, 16);
        assert!(matches!(s.embed_batch(&["x"]), Err(EmbeddingError::DimensionMismatch { expected: 8, got: 4 })));
        assert!(matches!(s.embed_batch::<&str>(&[]), Err(EmbeddingError::EmptyInput)));
    }

    #[test]
    fn concurrent_batches_agree() {
        let tmp = tempfile::tempdir().unwrap();
        let s = mock_service(EmbeddingCache::open(tmp.path(), "m").unwrap());
        let texts: Vec<String> = (0..40).map(|i| format!("t{}", i % 10)).collect();
        let results: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..4).map(|_| scope.spawn(|| s.embed_batch(&texts).unwrap())).collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(results.windows(2).all(|w| w[0] == w[1]));
    }
}
