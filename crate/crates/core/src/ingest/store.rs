//! Content-addressed image store.
//!
//! Downloaded images are persisted once under their SHA-256, so re-runs
//! and duplicate URLs converge on a single stored copy. A sidecar index
//! maps source URL to stored file and spares the network on re-runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::ingest::transport::Transport;
use crate::manifest::sha256_hex;

const INDEX_FILE: &str = "url_index.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredImage {
    /// File name inside the store (hash + extension).
    pub file_name: String,
    pub sha256: String,
}

pub struct ImageStore {
    dir: PathBuf,
    index: Mutex<BTreeMap<String, String>>,
}

impl ImageStore {
    pub fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let index_path = dir.join(INDEX_FILE);
        let index = if index_path.exists() {
            serde_json::from_str(&std::fs::read_to_string(&index_path)?)?
        } else {
            BTreeMap::new()
        };
        Ok(ImageStore {
            dir: dir.to_path_buf(),
            index: Mutex::new(index),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_of(&self, file_name: &str) -> PathBuf {
        self.dir.join(file_name)
    }

    /// Fetch `url` and persist the body under its content hash.
    ///
    /// Non-image responses are rejected ([`Error::InvalidInput`], the
    /// record is skipped); transport failures stay retriable. Idempotent:
    /// a URL already in the index whose file still exists is not fetched
    /// again, and identical bytes land on the same path.
    pub fn download(&self, transport: &dyn Transport, url: &str) -> Result<StoredImage> {
        if let Some(file_name) = self.index.lock().unwrap().get(url).cloned() {
            let path = self.dir.join(&file_name);
            if path.exists() {
                let sha = file_name.split('.').next().unwrap_or("").to_string();
                return Ok(StoredImage { file_name, sha256: sha });
            }
        }

        let resp = transport.get(url)?;
        if resp.status != 200 {
            return Err(Error::InvalidInput(format!("HTTP {} for {url}", resp.status)));
        }
        let content_type = resp.content_type.as_deref().unwrap_or("");
        let ext = if content_type.starts_with("image/jpeg") {
            "jpg"
        } else if content_type.starts_with("image/png") {
            "png"
        } else {
            return Err(Error::InvalidInput(format!(
                "not an image (content type {content_type:?}) at {url}"
            )));
        };

        let sha256 = sha256_hex(&resp.body);
        let file_name = format!("{sha256}.{ext}");
        let path = self.dir.join(&file_name);
        if !path.exists() {
            std::fs::write(&path, &resp.body)?;
        }
        self.index
            .lock()
            .unwrap()
            .insert(url.to_string(), file_name.clone());
        Ok(StoredImage { file_name, sha256 })
    }

    /// Persist the URL index (sorted, deterministic).
    pub fn save_index(&self) -> Result<()> {
        let index = self.index.lock().unwrap();
        let json = serde_json::to_string_pretty(&*index)?;
        std::fs::write(self.dir.join(INDEX_FILE), json)?;
        Ok(())
    }
}
