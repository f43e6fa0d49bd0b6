//! Knowledge-graph entity documents.
//!
//! Parses the entity JSON served by the graph's EntityData endpoint:
//! claims keyed by property id, each with a main snak and optional
//! qualifiers. We read the image property (P18), its point-in-time
//! qualifier (P585), and the English-wiki sitelink.

use std::collections::HashMap;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::transport::Transport;

pub const PROP_IMAGE: &str = "P18";
pub const PROP_POINT_IN_TIME: &str = "P585";

/// Time precision codes: 9 = year, 10 = month, 11 = day. Anything below
/// 9 (decade, century, ...) does not resolve to a year.
pub const PRECISION_YEAR: u8 = 9;

#[derive(Debug, Deserialize)]
pub struct EntityDoc {
    pub entities: HashMap<String, Entity>,
}

#[derive(Debug, Deserialize)]
pub struct Entity {
    #[serde(default)]
    pub claims: HashMap<String, Vec<Claim>>,
    #[serde(default)]
    pub sitelinks: HashMap<String, Sitelink>,
}

#[derive(Debug, Deserialize)]
pub struct Sitelink {
    pub title: String,
}

#[derive(Debug, Deserialize)]
pub struct Claim {
    pub mainsnak: Snak,
    #[serde(default)]
    pub qualifiers: HashMap<String, Vec<Snak>>,
}

#[derive(Debug, Deserialize)]
pub struct Snak {
    /// Absent for `novalue` / `somevalue` snaks.
    pub datavalue: Option<DataValue>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", content = "value")]
pub enum DataValue {
    #[serde(rename = "string")]
    StringValue(String),
    #[serde(rename = "time")]
    Time(TimeValue),
    #[serde(other)]
    Other,
}

#[derive(Debug, Deserialize)]
pub struct TimeValue {
    /// ISO-ish timestamp, possibly signed: "+1945-06-01T00:00:00Z".
    pub time: String,
    pub precision: u8,
}

/// Pull the year out of a graph time literal ("+1945-06-01T00:00:00Z").
pub fn parse_time_year(time: &str) -> Option<i32> {
    let s = time.strip_prefix('+').unwrap_or(time);
    let (sign, s) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, s),
    };
    let digits: String = s.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    digits.parse::<i32>().ok().map(|y| sign * y)
}

impl Entity {
    /// First image claim's file name, if any.
    pub fn image_file(&self) -> Option<&str> {
        self.claims.get(PROP_IMAGE)?.iter().find_map(|c| {
            match &c.mainsnak.datavalue {
                Some(DataValue::StringValue(s)) => Some(s.as_str()),
                _ => None,
            }
        })
    }

    /// Title of the English-wiki article, if linked.
    pub fn enwiki_title(&self) -> Option<&str> {
        self.sitelinks.get("enwiki").map(|s| s.title.as_str())
    }
}

/// The point-in-time year attached to an entity's image claim.
///
/// Returns the year only when the qualifier exists at year precision or
/// finer; a coarser qualifier (decade, century) or none at all yields
/// `None`. When several image claims exist, the first one carrying a
/// usable qualifier wins, together with its own file name.
pub fn extract_graph_image_year(entity: &Entity) -> Option<i32> {
    image_with_year(entity).map(|(_, year)| year)
}

/// Image file name + point-in-time year, taken from the same claim.
pub fn image_with_year(entity: &Entity) -> Option<(String, i32)> {
    for claim in entity.claims.get(PROP_IMAGE)? {
        let file = match &claim.mainsnak.datavalue {
            Some(DataValue::StringValue(s)) => s.clone(),
            _ => continue,
        };
        let Some(quals) = claim.qualifiers.get(PROP_POINT_IN_TIME) else {
            continue;
        };
        for q in quals {
            if let Some(DataValue::Time(t)) = &q.datavalue {
                if t.precision >= PRECISION_YEAR {
                    if let Some(year) = parse_time_year(&t.time) {
                        return Some((file, year));
                    }
                }
            }
        }
    }
    None
}

/// Fetch and parse one entity document.
pub fn fetch_entity(transport: &dyn Transport, entity_base: &str, qid: &str) -> Result<Entity> {
    let url = format!(
        "{}/wiki/Special:EntityData/{qid}.json",
        entity_base.trim_end_matches('/')
    );
    let resp = transport.get(&url)?;
    if resp.status != 200 {
        return Err(Error::Parse {
            url,
            message: format!("HTTP {}", resp.status),
            payload: resp.body_str(),
        });
    }
    let text = resp.body_str();
    let mut doc: EntityDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
        url: url.clone(),
        message: e.to_string(),
        payload: text.clone(),
    })?;
    doc.entities.remove(qid).ok_or_else(|| Error::Parse {
        url,
        message: format!("entity {qid} not in document"),
        payload: text,
    })
}
