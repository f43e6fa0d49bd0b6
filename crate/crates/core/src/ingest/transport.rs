//! HTTP transport with a fixture-backed twin for tests.
//!
//! Every network operation in the ingest stage goes through [`Transport`],
//! so the whole stage can run against recorded responses. The live
//! implementation applies a per-host rate limit and exponential backoff on
//! 429/5xx; the fixture implementation replays a directory of recorded
//! responses keyed by URL.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A completed HTTP exchange. Statuses in 200..=499 are returned as-is for
/// the caller to interpret; 5xx and connection failures become
/// [`Error::Transport`] after retries are exhausted.
#[derive(Debug, Clone)]
pub struct Response {
    pub status: u16,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl Response {
    pub fn body_str(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<Response>;
}

/// Live HTTP client with politeness controls.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    /// Minimum spacing between requests to the same host.
    min_interval: Duration,
    max_retries: u32,
    backoff_base: Duration,
    next_allowed: Mutex<HashMap<String, Instant>>,
}

impl HttpTransport {
    /// `rate_per_host` is the maximum requests per second per host.
    pub fn new(rate_per_host: f64, max_retries: u32) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(concat!("facespan/", env!("CARGO_PKG_VERSION")))
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Transport {
                url: String::new(),
                message: format!("client build failed: {e}"),
            })?;
        let rate = if rate_per_host > 0.0 { rate_per_host } else { 2.0 };
        Ok(HttpTransport {
            client,
            min_interval: Duration::from_secs_f64(1.0 / rate),
            max_retries,
            backoff_base: Duration::from_millis(500),
            next_allowed: Mutex::new(HashMap::new()),
        })
    }

    fn wait_for_slot(&self, host: &str) {
        let wait = {
            let mut table = self.next_allowed.lock().unwrap();
            let now = Instant::now();
            let slot = table.entry(host.to_string()).or_insert(now);
            if *slot <= now {
                *slot = now + self.min_interval;
                None
            } else {
                let at = *slot;
                *slot = at + self.min_interval;
                Some(at - now)
            }
        };
        if let Some(d) = wait {
            std::thread::sleep(d);
        }
    }

    fn host_of(url: &str) -> String {
        url.split("://")
            .nth(1)
            .unwrap_or(url)
            .split('/')
            .next()
            .unwrap_or("")
            .to_string()
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<Response> {
        let host = Self::host_of(url);
        let mut attempt = 0;
        loop {
            self.wait_for_slot(&host);
            let outcome = self
                .client
                .get(url)
                .header("Accept", "application/sparql-results+json, application/json, text/html, image/*")
                .send();
            match outcome {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    if (status == 429 || status >= 500) && attempt < self.max_retries {
                        attempt += 1;
                        std::thread::sleep(self.backoff_base * 2u32.pow(attempt - 1));
                        continue;
                    }
                    if status >= 500 {
                        return Err(Error::Transport {
                            url: url.to_string(),
                            message: format!("HTTP {status} after {attempt} retries"),
                        });
                    }
                    let content_type = resp
                        .headers()
                        .get(reqwest::header::CONTENT_TYPE)
                        .and_then(|v| v.to_str().ok())
                        .map(|s| s.to_string());
                    let body = resp
                        .bytes()
                        .map_err(|e| Error::Transport {
                            url: url.to_string(),
                            message: format!("body read failed: {e}"),
                        })?
                        .to_vec();
                    return Ok(Response {
                        status,
                        content_type,
                        body,
                    });
                }
                Err(e) => {
                    if attempt < self.max_retries {
                        attempt += 1;
                        std::thread::sleep(self.backoff_base * 2u32.pow(attempt - 1));
                        continue;
                    }
                    return Err(Error::Transport {
                        url: url.to_string(),
                        message: e.to_string(),
                    });
                }
            }
        }
    }
}

/// One recorded exchange in a fixture directory's `index.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub url: String,
    pub status: u16,
    pub content_type: Option<String>,
    /// Body file path, relative to the fixture directory.
    pub body_file: String,
}

/// Replays recorded responses from a directory.
pub struct FixtureTransport {
    dir: PathBuf,
    entries: HashMap<String, FixtureEntry>,
}

impl FixtureTransport {
    pub fn open(dir: &Path) -> Result<Self> {
        let index_path = dir.join("index.json");
        let data = std::fs::read_to_string(&index_path).map_err(|e| {
            Error::Config(format!("fixture index {} unreadable: {e}", index_path.display()))
        })?;
        let list: Vec<FixtureEntry> = serde_json::from_str(&data)?;
        let entries = list.into_iter().map(|e| (e.url.clone(), e)).collect();
        Ok(FixtureTransport {
            dir: dir.to_path_buf(),
            entries,
        })
    }
}

impl Transport for FixtureTransport {
    fn get(&self, url: &str) -> Result<Response> {
        let entry = self.entries.get(url).ok_or_else(|| Error::Transport {
            url: url.to_string(),
            message: "no fixture recorded for this URL".to_string(),
        })?;
        if entry.status >= 500 {
            return Err(Error::Transport {
                url: url.to_string(),
                message: format!("HTTP {} (recorded)", entry.status),
            });
        }
        let body = std::fs::read(self.dir.join(&entry.body_file))?;
        Ok(Response {
            status: entry.status,
            content_type: entry.content_type.clone(),
            body,
        })
    }
}

/// Helper used by tests and the synthetic-corpus generator to record a
/// fixture directory.
pub struct FixtureRecorder {
    dir: PathBuf,
    entries: Vec<FixtureEntry>,
    counter: usize,
}

impl FixtureRecorder {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(FixtureRecorder {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
            counter: 0,
        })
    }

    pub fn record(
        &mut self,
        url: &str,
        status: u16,
        content_type: Option<&str>,
        body: &[u8],
    ) -> Result<()> {
        let ext = match content_type {
            Some(ct) if ct.starts_with("image/jpeg") => "jpg",
            Some(ct) if ct.starts_with("image/png") => "png",
            Some(ct) if ct.contains("json") => "json",
            Some(ct) if ct.contains("html") => "html",
            _ => "bin",
        };
        let name = format!("body_{:04}.{ext}", self.counter);
        self.counter += 1;
        std::fs::write(self.dir.join(&name), body)?;
        self.entries.push(FixtureEntry {
            url: url.to_string(),
            status,
            content_type: content_type.map(|s| s.to_string()),
            body_file: name,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let index = serde_json::to_string_pretty(&self.entries)?;
        std::fs::write(self.dir.join("index.json"), index)?;
        Ok(self.dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let mut rec = FixtureRecorder::create(tmp.path()).unwrap();
        rec.record("http://x/a", 200, Some("text/html"), b"<p>hi</p>")
            .unwrap();
        rec.record("http://x/missing", 404, Some("text/html"), b"")
            .unwrap();
        rec.record("http://x/broken", 503, None, b"").unwrap();
        rec.finish().unwrap();

        let t = FixtureTransport::open(tmp.path()).unwrap();
        let ok = t.get("http://x/a").unwrap();
        assert_eq!(ok.status, 200);
        assert_eq!(ok.body, b"<p>hi</p>");

        let missing = t.get("http://x/missing").unwrap();
        assert_eq!(missing.status, 404);

        let err = t.get("http://x/broken").unwrap_err();
        assert!(err.is_retriable());

        let unrecorded = t.get("http://x/never").unwrap_err();
        assert!(unrecorded.is_retriable());
    }

    #[test]
    fn host_extraction() {
        assert_eq!(HttpTransport::host_of("https://en.wikipedia.org/wiki/X"), "en.wikipedia.org");
        assert_eq!(HttpTransport::host_of("http://h:8080/a/b"), "h:8080");
    }
}
