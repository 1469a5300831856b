use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use sha2::{Digest, Sha256};

use super::EmbeddingError;

/// SHA-256(model_id || 0x00 || text).
pub fn cache_key(model_id: &str, text: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(model_id.as_bytes());
    h.update([0u8]);
    h.update(text.as_bytes());
    h.finalize().into()
}

fn sanitize(model_id: &str) -> String {
    model_id.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

/// Vectors keyed by content digest. Memory first, then
/// `<root>/<model_id>/<first 2 hex>/<digest>.vec`. Each file holds one
/// record: digest (32 bytes), dim (u32 LE), dim little-endian f32 values.
/// `index.tsv` next to the shard directories lists digest and dim.
pub struct EmbeddingCache {
    dir: Option<PathBuf>,
    memory: RwLock<HashMap<[u8; 32], Vec<f32>>>,
    write_lock: Mutex<()>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self { dir: None, memory: RwLock::default(), write_lock: Mutex::new(()) }
    }

    pub fn open(root: &Path, model_id: &str) -> Result<Self, EmbeddingError> {
        let dir = root.join(sanitize(model_id));
        fs::create_dir_all(&dir)?;
        Ok(Self { dir: Some(dir), memory: RwLock::default(), write_lock: Mutex::new(()) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path_for(dir: &Path, key: &[u8; 32]) -> PathBuf {
        let hex = hex::encode(key);
        dir.join(&hex[..2]).join(format!("{hex}.vec"))
    }

    pub fn get(&self, key: &[u8; 32]) -> Result<Option<Vec<f32>>, EmbeddingError> {
        if let Some(v) = self.memory.read().unwrap().get(key) {
            return Ok(Some(v.clone()));
        }
        let Some(dir) = &self.dir else { return Ok(None) };
        let path = Self::path_for(dir, key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let values = decode_record(&bytes, key)
            .map_err(|e| EmbeddingError::Malformed(format!("{}: {e}", path.display())))?;
        self.memory.write().unwrap().insert(*key, values.clone());
        Ok(Some(values))
    }

    pub fn put(&self, key: &[u8; 32], values: &[f32]) -> Result<(), EmbeddingError> {
        self.memory.write().unwrap().insert(*key, values.to_vec());
        let Some(dir) = &self.dir else { return Ok(()) };
        let _guard = self.write_lock.lock().unwrap();
        let path = Self::path_for(dir, key);
        if path.exists() {
            return Ok(());
        }
        fs::create_dir_all(path.parent().expect("shard directory"))?;
        let tmp = path.with_extension("vec.tmp");
        fs::write(&tmp, encode_record(key, values))?;
        fs::rename(&tmp, &path)?;
        let mut index = fs::OpenOptions::new().create(true).append(true).open(dir.join("index.tsv"))?;
        writeln!(index, "{}\t{}", hex::encode(key), values.len())?;
        Ok(())
    }

    /// Drops the in-memory layer; disk entries stay.
    pub fn evict_memory(&self) {
        self.memory.write().unwrap().clear();
    }

    pub fn memory_len(&self) -> usize {
        self.memory.read().unwrap().len()
    }
}

fn encode_record(key: &[u8; 32], values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(36 + 4 * values.len());
    out.extend_from_slice(key);
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_record(bytes: &[u8], key: &[u8; 32]) -> Result<Vec<f32>, String> {
    if bytes.len() < 36 || &bytes[..32] != key {
        return Err("record header does not match its key".into());
    }
    let dim = u32::from_le_bytes(bytes[32..36].try_into().unwrap()) as usize;
    if bytes.len() != 36 + 4 * dim {
        return Err(format!("record length {} does not fit dim {dim}", bytes.len()));
    }
    Ok(bytes[36..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
}
