//! Persistent prompt cache.
//!
//! Entries are appended to segment files (`segment-NNNNNN.jsonl`) as one
//! JSON line each, together with the SHA-256 digest of the key and a
//! checksum of the entry. On open every segment is replayed into an
//! in-memory digest index; lines that fail to parse or verify are dropped
//! and the segment rewritten without them. Digest collisions are resolved
//! by comparing the full key.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub model: String,
    pub temperature: f64,
    pub prompt: String,
    pub response: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    digest: String,
    check: String,
    entry: CacheEntry,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub entries: usize,
    pub segments: usize,
    pub bytes: u64,
    pub evicted: usize,
}

type Key = [u8; 32];

pub fn key_digest(model: &str, temperature: f64, prompt: &str) -> Key {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0u8]);
    h.update(temperature.to_bits().to_le_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    h.finalize().into()
}

fn entry_check(entry: &CacheEntry) -> String {
    let bytes = serde_json::to_vec(entry).expect("cache entry serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub struct PromptCache {
    dir: Option<PathBuf>,
    index: RwLock<HashMap<Key, Vec<CacheEntry>>>,
    writer: Mutex<Option<File>>,
    evicted: usize,
}

impl std::fmt::Debug for PromptCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PromptCache").field("dir", &self.dir).finish()
    }
}

impl PromptCache {
    /// Process-local cache with no persistence.
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            index: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
            evicted: 0,
        }
    }

    pub fn open(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut index: HashMap<Key, Vec<CacheEntry>> = HashMap::new();
        let mut evicted = 0;
        for seg in segments(&dir)? {
            let mut good = Vec::new();
            let mut bad = 0;
            for line in BufReader::new(File::open(&seg)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match verify(&line) {
                    Some(rec) => {
                        good.push(line);
                        let key = key_digest(&rec.entry.model, rec.entry.temperature, &rec.entry.prompt);
                        let slot = index.entry(key).or_default();
                        if !slot.iter().any(|e| same_key(e, &rec.entry)) {
                            slot.push(rec.entry);
                        }
                    }
                    None => bad += 1,
                }
            }
            if bad > 0 {
                tracing::warn!(segment = %seg.display(), dropped = bad, "evicting corrupt prompt-cache entries");
                evicted += bad;
                let mut body = good.join("\n");
                if !body.is_empty() {
                    body.push('\n');
                }
                fs::write(&seg, body)?;
            }
        }
        Ok(Self {
            dir: Some(dir),
            index: RwLock::new(index),
            writer: Mutex::new(None),
            evicted,
        })
    }

    pub fn get(&self, model: &str, temperature: f64, prompt: &str) -> Option<CacheEntry> {
        let key = key_digest(model, temperature, prompt);
        let index = self.index.read();
        index.get(&key)?.iter().find(|e| {
            e.model == model && e.temperature.to_bits() == temperature.to_bits() && e.prompt == prompt
        }).cloned()
    }

    pub fn put(&self, entry: CacheEntry) {
        let key = key_digest(&entry.model, entry.temperature, &entry.prompt);
        {
            let mut index = self.index.write();
            let slot = index.entry(key).or_default();
            if slot.iter().any(|e| same_key(e, &entry)) {
                return;
            }
            slot.push(entry.clone());
        }
        if let Some(dir) = &self.dir {
            let rec = Record {
                digest: hex::encode(key),
                check: entry_check(&entry),
                entry,
            };
            let mut line = serde_json::to_string(&rec).expect("record serializes");
            line.push('\n');
            let mut w = self.writer.lock();
            if w.is_none() {
                match new_segment(dir) {
                    Ok(f) => *w = Some(f),
                    Err(e) => {
                        tracing::warn!(error = %e, "prompt cache segment unavailable");
                        return;
                    }
                }
            }
            let f = w.as_mut().expect("segment open");
            if let Err(e) = f.write_all(line.as_bytes()).and_then(|_| f.flush()) {
                tracing::warn!(error = %e, "prompt cache write failed");
            }
        }
    }

    pub fn len(&self) -> usize {
        self.index.read().values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        let (segments, bytes) = match &self.dir {
            Some(dir) => {
                let segs = segments(dir).unwrap_or_default();
                let bytes = segs
                    .iter()
                    .filter_map(|p| fs::metadata(p).ok())
                    .map(|m| m.len())
                    .sum();
                (segs.len(), bytes)
            }
            None => (0, 0),
        };
        CacheStats {
            entries: self.len(),
            segments,
            bytes,
            evicted: self.evicted,
        }
    }

    /// Drops every entry and deletes all segments.
    pub fn clear(&self) -> std::io::Result<()> {
        let mut w = self.writer.lock();
        *w = None;
        self.index.write().clear();
        if let Some(dir) = &self.dir {
            for seg in segments(dir)? {
                fs::remove_file(seg)?;
            }
        }
        Ok(())
    }
}

fn same_key(a: &CacheEntry, b: &CacheEntry) -> bool {
    a.model == b.model && a.temperature.to_bits() == b.temperature.to_bits() && a.prompt == b.prompt
}

fn verify(line: &str) -> Option<Record> {
    let rec: Record = serde_json::from_str(line).ok()?;
    let key = key_digest(&rec.entry.model, rec.entry.temperature, &rec.entry.prompt);
    (hex::encode(key) == rec.digest && entry_check(&rec.entry) == rec.check).then_some(rec)
}

fn segments(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut segs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("segment-") && n.ends_with(".jsonl"))
        })
        .collect();
    segs.sort();
    Ok(segs)
}

fn new_segment(dir: &Path) -> std::io::Result<File> {
    let next = segments(dir)?
        .iter()
        .filter_map(|p| {
            p.file_stem()?
                .to_str()?
                .strip_prefix("segment-")?
                .parse::<u64>()
                .ok()
        })
        .max()
        .map_or(0, |n| n + 1);
    OpenOptions::new()
        .create_new(true)
        .append(true)
        .open(dir.join(format!("segment-{next:06}.jsonl")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(prompt: &str, response: &str) -> CacheEntry {
        CacheEntry {
            model: "m".into(),
            temperature: 0.0,
            prompt: prompt.into(),
            response: response.into(),
            input_tokens: 3,
            output_tokens: 1,
        }
    }

    #[test]
    fn put_get_roundtrip_and_miss() {
        let c = PromptCache::in_memory();
        c.put(entry("p", "true"));
        assert_eq!(c.get("m", 0.0, "p").unwrap().response, "true");
        assert!(c.get("m", 0.0, "other").is_none());
        assert!(c.get("m", 0.5, "p").is_none());
        assert!(c.get("n", 0.0, "p").is_none());
    }

    #[test]
    fn durable_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        {
            let c = PromptCache::open(dir.path()).unwrap();
            c.put(entry("p1", "true"));
            c.put(entry("p2", "false"));
        }
        let c = PromptCache::open(dir.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get("m", 0.0, "p2").unwrap().response, "false");
        c.put(entry("p3", "x"));
        drop(c);
        let c = PromptCache::open(dir.path()).unwrap();
        assert_eq!(c.stats().segments, 2);
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn corrupt_entries_are_evicted() {
        let dir = tempfile::tempdir().unwrap();
        {
            let c = PromptCache::open(dir.path()).unwrap();
            c.put(entry("p1", "true"));
            c.put(entry("p2", "false"));
        }
        let seg = segments(dir.path()).unwrap().remove(0);
        let body = fs::read_to_string(&seg).unwrap();
        let tampered = body.replacen("\"false\"", "\"true\"", 1);
        fs::write(&seg, format!("{tampered}not json\n")).unwrap();
        let c = PromptCache::open(dir.path()).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c.get("m", 0.0, "p2").is_none());
        assert_eq!(c.stats().evicted, 2);
        let c2 = PromptCache::open(dir.path()).unwrap();
        assert_eq!(c2.stats().evicted, 0);
    }

    #[test]
    fn clear_removes_everything() {
        let dir = tempfile::tempdir().unwrap();
        let c = PromptCache::open(dir.path()).unwrap();
        c.put(entry("p", "r"));
        c.clear().unwrap();
        assert_eq!(c.stats(), CacheStats::default());
        assert!(PromptCache::open(dir.path()).unwrap().is_empty());
    }
}
