//! Stage 1: fetch candidate persons from the knowledge graph, find each
//! person's image and the year it was taken, and download images into a
//! content-addressed store.
//!
//! Image years come from two places, in order of trust: the graph's
//! point-in-time qualifier on the image claim, then a year parsed from
//! the encyclopedia page's image caption. The stage emits an append-only
//! JSONL manifest sorted by person id; re-running over identical fixtures
//! reproduces it byte for byte.

pub mod entity;
pub mod sparql;
pub mod store;
pub mod transport;
pub mod wiki;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::IngestConfig;
use crate::error::{Error, Result};
use crate::manifest::{write_jsonl, Provenance};
use sparql::{percent_encode, GraphClient, QueryDrops};
use store::ImageStore;
use transport::Transport;
use wiki::{parse_caption_year, scrape_page_image};

/// How the image year was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageYearSource {
    GraphPointInTime,
    CaptionParse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MannerOfDeath {
    Natural,
    Unspecified,
    Other(String),
}

/// One knowledge-graph person, as written to the ingest manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub person_id: String,
    pub name: String,
    pub birth_year: i32,
    pub death_year: i32,
    pub manner_of_death: MannerOfDeath,
    pub cause_of_death: Option<String>,
    /// Store-relative path once downloaded (e.g. "store/<sha>.jpg").
    pub image_ref: Option<String>,
    pub image_year: Option<i32>,
    pub image_year_source: Option<ImageYearSource>,
}

impl PersonRecord {
    /// Type invariants every yielded record must satisfy.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.birth_year > self.death_year {
            return Err(format!(
                "{}: birth {} after death {}",
                self.person_id, self.birth_year, self.death_year
            ));
        }
        if !(1990..=2022).contains(&self.death_year) {
            return Err(format!(
                "{}: death year {} outside 1990..=2022",
                self.person_id, self.death_year
            ));
        }
        if self.image_year.is_some() && self.image_year_source.is_none() {
            return Err(format!("{}: image year without source", self.person_id));
        }
        Ok(())
    }
}

#[derive(Debug, Default, Clone, Serialize)]
pub struct IngestSummary {
    pub persons: usize,
    pub with_graph_year: usize,
    pub with_caption_year: usize,
    pub without_image_year: usize,
    pub downloaded: usize,
    pub download_rejected: usize,
    pub enrich_errors: usize,
    pub contradictory_years: usize,
    pub sub_year_precision: usize,
    pub invalid_year_order: usize,
}

impl IngestSummary {
    fn absorb_query_drops(&mut self, drops: &QueryDrops) {
        self.contradictory_years = drops.contradictory_years;
        self.sub_year_precision = drops.sub_year_precision;
        self.invalid_year_order = drops.invalid_year_order;
    }
}

enum YearFinding {
    Graph { image_url: String, year: i32 },
    Caption { image_url: String, year: i32 },
    NoYear,
}

fn commons_file_url(commons_base: &str, file: &str) -> String {
    format!(
        "{}/wiki/Special:FilePath/{}",
        commons_base.trim_end_matches('/'),
        percent_encode(&file.replace(' ', "_"))
    )
}

fn wiki_page_url(wiki_base: &str, title: &str) -> String {
    format!(
        "{}/wiki/{}",
        wiki_base.trim_end_matches('/'),
        percent_encode(&title.replace(' ', "_"))
    )
}

/// Find the image + year for one person. Network problems degrade to
/// `NoYear`; the record is still written for audit.
fn find_image_year(
    cfg: &IngestConfig,
    transport: &dyn Transport,
    qid: &str,
) -> Result<YearFinding> {
    let entity = entity::fetch_entity(transport, &cfg.entity_base, qid)?;

    // Structured point-in-time beats any caption parse.
    if let Some((file, year)) = entity::image_with_year(&entity) {
        return Ok(YearFinding::Graph {
            image_url: commons_file_url(&cfg.commons_base, &file),
            year,
        });
    }

    if let Some(title) = entity.enwiki_title() {
        let page_url = wiki_page_url(&cfg.wiki_base, title);
        if let Some(page_image) = scrape_page_image(transport, &page_url, &cfg.wiki_base)? {
            let parse = parse_caption_year(&page_image.caption);
            if let Some(year) = parse.extracted_year {
                return Ok(YearFinding::Caption {
                    image_url: page_image.image_url,
                    year,
                });
            }
        }
    }
    Ok(YearFinding::NoYear)
}

/// Run the full ingest stage: query, enrich, download, write manifest.
pub fn run_ingest(
    cfg: &IngestConfig,
    transport: &dyn Transport,
    out_dir: &Path,
    config_sha256: &str,
) -> Result<IngestSummary> {
    std::fs::create_dir_all(out_dir)?;
    let client = GraphClient::new(transport, &cfg.endpoint, cfg.page_size);
    let (persons, drops) = client.query_persons(cfg.window)?;
    let mut summary = IngestSummary::default();
    summary.absorb_query_drops(&drops);

    let store = ImageStore::open(&out_dir.join("store"))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Structural(format!("thread pool: {e}")))?;

    #[derive(Default, Clone, Copy)]
    struct Counts {
        graph: usize,
        caption: usize,
        none: usize,
        downloaded: usize,
        rejected: usize,
        errors: usize,
    }

    let (mut records, counts): (Vec<PersonRecord>, Counts) = pool.install(|| {
        persons
            .into_par_iter()
            .map(|mut record| {
                let mut c = Counts::default();
                match find_image_year(cfg, transport, &record.person_id) {
                    Ok(YearFinding::Graph { image_url, year }) => {
                        c.graph = 1;
                        if attach_image(&mut record, &store, transport, &image_url, year,
                                        ImageYearSource::GraphPointInTime) {
                            c.downloaded = 1;
                        } else {
                            c.rejected = 1;
                        }
                    }
                    Ok(YearFinding::Caption { image_url, year }) => {
                        c.caption = 1;
                        if attach_image(&mut record, &store, transport, &image_url, year,
                                        ImageYearSource::CaptionParse) {
                            c.downloaded = 1;
                        } else {
                            c.rejected = 1;
                        }
                    }
                    Ok(YearFinding::NoYear) => c.none = 1,
                    Err(e) => {
                        log::warn!("enrich {} failed: {e}", record.person_id);
                        c.errors = 1;
                    }
                }
                (record, c)
            })
            .fold(
                || (Vec::new(), Counts::default()),
                |(mut v, mut acc), (r, c)| {
                    v.push(r);
                    acc.graph += c.graph;
                    acc.caption += c.caption;
                    acc.none += c.none;
                    acc.downloaded += c.downloaded;
                    acc.rejected += c.rejected;
                    acc.errors += c.errors;
                    (v, acc)
                },
            )
            .reduce(
                || (Vec::new(), Counts::default()),
                |(mut v1, mut a), (v2, b)| {
                    v1.extend(v2);
                    a.graph += b.graph;
                    a.caption += b.caption;
                    a.none += b.none;
                    a.downloaded += b.downloaded;
                    a.rejected += b.rejected;
                    a.errors += b.errors;
                    (v1, a)
                },
            )
    });

    summary.with_graph_year = counts.graph;
    summary.with_caption_year = counts.caption;
    summary.without_image_year = counts.none;
    summary.downloaded = counts.downloaded;
    summary.download_rejected = counts.rejected;
    summary.enrich_errors = counts.errors;

    records.sort_by(|a, b| a.person_id.cmp(&b.person_id));
    for r in &records {
        debug_assert!(r.validate().is_ok(), "{:?}", r.validate());
    }
    summary.persons = records.len();

    store.save_index()?;
    write_jsonl(&out_dir.join("manifest.jsonl"), &records)?;
    Provenance::new("ingest", config_sha256)
        .output("manifest.jsonl")
        .output("store/")
        .write(out_dir)?;
    log::info!("ingest: {} persons, {} downloaded", summary.persons, summary.downloaded);
    Ok(summary)
}

/// Download the image and point the record at its stored copy. Returns
/// false when the download was rejected; the record then carries no image.
fn attach_image(
    record: &mut PersonRecord,
    store: &ImageStore,
    transport: &dyn Transport,
    image_url: &str,
    year: i32,
    source: ImageYearSource,
) -> bool {
    match store.download(transport, image_url) {
        Ok(stored) => {
            record.image_ref = Some(format!("store/{}", stored.file_name));
            record.image_year = Some(year);
            record.image_year_source = Some(source);
            true
        }
        Err(e) => {
            log::warn!("download for {} rejected: {e}", record.person_id);
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn person_record_invariants() {
        let mut r = PersonRecord {
            person_id: "Q1".into(),
            name: "A".into(),
            birth_year: 1940,
            death_year: 2000,
            manner_of_death: MannerOfDeath::Natural,
            cause_of_death: None,
            image_ref: None,
            image_year: None,
            image_year_source: None,
        };
        assert!(r.validate().is_ok());
        r.image_year = Some(1970);
        assert!(r.validate().is_err());
        r.image_year_source = Some(ImageYearSource::CaptionParse);
        assert!(r.validate().is_ok());
        r.death_year = 1989;
        assert!(r.validate().is_err());
        r.death_year = 2000;
        r.birth_year = 2001;
        assert!(r.validate().is_err());
    }

    #[test]
    fn manner_serde_shape() {
        let natural = serde_json::to_string(&MannerOfDeath::Natural).unwrap();
        assert_eq!(natural, r#""natural""#);
        let other = serde_json::to_string(&MannerOfDeath::Other("accident".into())).unwrap();
        assert_eq!(other, r#"{"other":"accident"}"#);
    }
}
