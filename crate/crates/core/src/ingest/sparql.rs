//! SPARQL person queries with transparent pagination.
//!
//! One query pulls every person whose death year falls inside the window,
//! with birth/death timestamps at full stated precision plus manner and
//! cause of death. Rows are grouped per person; a person whose recorded
//! birth or death years disagree at the year level is dropped, as is one
//! whose dates are coarser than year precision.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::config::YearWindow;
use crate::error::{Error, Result};
use crate::ingest::entity::parse_time_year;
use crate::ingest::transport::Transport;
use crate::ingest::{MannerOfDeath, PersonRecord};

/// Wikidata entity id for the "natural causes" manner of death.
const NATURAL_CAUSES_QID: &str = "Q3739104";

#[derive(Debug, Deserialize)]
struct SparqlResult {
    results: SparqlBindings,
}

#[derive(Debug, Deserialize)]
struct SparqlBindings {
    bindings: Vec<BTreeMap<String, SparqlValue>>,
}

#[derive(Debug, Deserialize)]
struct SparqlValue {
    value: String,
}

/// Per-person drop reasons counted during the query phase.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct QueryDrops {
    pub contradictory_years: usize,
    pub sub_year_precision: usize,
    pub invalid_year_order: usize,
}

pub struct GraphClient<'t> {
    transport: &'t dyn Transport,
    endpoint: String,
    page_size: usize,
}

impl<'t> GraphClient<'t> {
    pub fn new(transport: &'t dyn Transport, endpoint: &str, page_size: usize) -> Self {
        GraphClient {
            transport,
            endpoint: endpoint.trim_end_matches('/').to_string(),
            page_size: page_size.max(1),
        }
    }

    /// All persons who died inside the window, resolved to year precision.
    ///
    /// Pagination is internal: pages are fetched until a short page
    /// arrives. Returns records sorted by person id.
    pub fn query_persons(&self, window: YearWindow) -> Result<(Vec<PersonRecord>, QueryDrops)> {
        let mut rows = Vec::new();
        let mut offset = 0usize;
        loop {
            let page = self.fetch_page(window, offset)?;
            let n = page.len();
            rows.extend(page);
            if n < self.page_size {
                break;
            }
            offset += self.page_size;
        }
        Ok(group_rows(rows, window))
    }

    fn fetch_page(&self, window: YearWindow, offset: usize) -> Result<Vec<PersonRow>> {
        let query = person_query(window, self.page_size, offset);
        let url = format!(
            "{}?format=json&query={}",
            self.endpoint,
            percent_encode(&query)
        );
        let resp = self.transport.get(&url)?;
        if resp.status != 200 {
            return Err(Error::Parse {
                url,
                message: format!("HTTP {}", resp.status),
                payload: resp.body_str(),
            });
        }
        let text = resp.body_str();
        let parsed: SparqlResult = serde_json::from_str(&text).map_err(|e| Error::Parse {
            url,
            message: e.to_string(),
            payload: text.clone(),
        })?;
        Ok(parsed
            .results
            .bindings
            .into_iter()
            .filter_map(parse_row)
            .collect())
    }
}

/// The SPARQL text for one page. Kept deterministic (ORDER BY) so
/// pagination is stable and fixture URLs are reproducible.
pub fn person_query(window: YearWindow, limit: usize, offset: usize) -> String {
    format!(
        "SELECT ?person ?personLabel ?birth ?birthPrecision ?death ?deathPrecision ?manner ?mannerLabel ?cause ?causeLabel WHERE {{ \
?person wdt:P31 wd:Q5 . \
?person p:P569/psv:P569 ?b . ?b wikibase:timeValue ?birth ; wikibase:timePrecision ?birthPrecision . \
?person p:P570/psv:P570 ?d . ?d wikibase:timeValue ?death ; wikibase:timePrecision ?deathPrecision . \
FILTER(YEAR(?death) >= {from} && YEAR(?death) <= {to}) \
OPTIONAL {{ ?person wdt:P1196 ?manner . }} \
OPTIONAL {{ ?person wdt:P509 ?cause . }} \
SERVICE wikibase:label {{ bd:serviceParam wikibase:language \"en\". }} \
}} ORDER BY ?person LIMIT {limit} OFFSET {offset}",
        from = window.from,
        to = window.to
    )
}

/// RFC 3986 percent-encoding, leaving unreserved characters intact.
pub fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len() * 3);
    for b in s.as_bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(*b as char)
            }
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

#[derive(Debug, Clone)]
struct PersonRow {
    qid: String,
    label: Option<String>,
    birth_year: Option<i32>,
    birth_precise: bool,
    death_year: Option<i32>,
    death_precise: bool,
    manner: Option<(String, String)>,
    cause: Option<String>,
}

fn qid_of(uri: &str) -> String {
    uri.rsplit('/').next().unwrap_or(uri).to_string()
}

fn parse_row(binding: BTreeMap<String, SparqlValue>) -> Option<PersonRow> {
    let get = |k: &str| binding.get(k).map(|v| v.value.clone());
    let person = get("person")?;
    let birth = get("birth");
    let death = get("death");
    let birth_prec: u8 = get("birthPrecision").and_then(|p| p.parse().ok()).unwrap_or(0);
    let death_prec: u8 = get("deathPrecision").and_then(|p| p.parse().ok()).unwrap_or(0);
    let manner = match (get("manner"), get("mannerLabel")) {
        (Some(uri), label) => Some((qid_of(&uri), label.unwrap_or_default())),
        _ => None,
    };
    Some(PersonRow {
        qid: qid_of(&person),
        label: get("personLabel"),
        birth_year: birth.as_deref().and_then(parse_time_year),
        birth_precise: birth_prec >= 9,
        death_year: death.as_deref().and_then(parse_time_year),
        death_precise: death_prec >= 9,
        manner,
        cause: get("causeLabel").or_else(|| get("cause").map(|u| qid_of(&u))),
    })
}

/// Group per-person rows and apply the year-resolution rules.
fn group_rows(rows: Vec<PersonRow>, window: YearWindow) -> (Vec<PersonRecord>, QueryDrops) {
    let mut by_person: BTreeMap<String, Vec<PersonRow>> = BTreeMap::new();
    for row in rows {
        by_person.entry(row.qid.clone()).or_default().push(row);
    }

    let mut drops = QueryDrops::default();
    let mut records = Vec::new();
    'person: for (qid, rows) in by_person {
        let mut birth_years: Vec<i32> = Vec::new();
        let mut death_years: Vec<i32> = Vec::new();
        let mut any_imprecise = false;
        for row in &rows {
            match (row.birth_year, row.birth_precise) {
                (Some(y), true) => {
                    if !birth_years.contains(&y) {
                        birth_years.push(y);
                    }
                }
                _ => any_imprecise = true,
            }
            match (row.death_year, row.death_precise) {
                (Some(y), true) => {
                    if !death_years.contains(&y) {
                        death_years.push(y);
                    }
                }
                _ => any_imprecise = true,
            }
        }
        if birth_years.len() > 1 || death_years.len() > 1 {
            drops.contradictory_years += 1;
            continue 'person;
        }
        let (Some(&birth_year), Some(&death_year)) = (birth_years.first(), death_years.first())
        else {
            // No year-precision statement for one of the dates.
            if any_imprecise {
                drops.sub_year_precision += 1;
            }
            continue 'person;
        };
        if !(window.from..=window.to).contains(&death_year) {
            continue 'person;
        }
        if birth_year > death_year {
            drops.invalid_year_order += 1;
            continue 'person;
        }

        let first = &rows[0];
        let manner = match &first.manner {
            None => MannerOfDeath::Unspecified,
            Some((qid, label)) if qid == NATURAL_CAUSES_QID || label == "natural causes" => {
                MannerOfDeath::Natural
            }
            Some((qid, label)) => MannerOfDeath::Other(if label.is_empty() {
                qid.clone()
            } else {
                label.clone()
            }),
        };
        let mut causes: Vec<String> = rows.iter().filter_map(|r| r.cause.clone()).collect();
        causes.sort();
        causes.dedup();
        let cause_of_death = if causes.is_empty() {
            None
        } else {
            Some(causes.join("|"))
        };

        records.push(PersonRecord {
            person_id: qid,
            name: first.label.clone().unwrap_or_else(|| first.qid.clone()),
            birth_year,
            death_year,
            manner_of_death: manner,
            cause_of_death,
            image_ref: None,
            image_year: None,
            image_year_source: None,
        });
    }
    (records, drops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::transport::{FixtureRecorder, FixtureTransport};

    fn binding_row(
        qid: &str,
        label: &str,
        birth: (&str, u8),
        death: (&str, u8),
        manner: Option<(&str, &str)>,
        cause: Option<&str>,
    ) -> String {
        let mut fields = vec![
            format!(r#""person": {{"type":"uri","value":"http://www.wikidata.org/entity/{qid}"}}"#),
            format!(r#""personLabel": {{"type":"literal","value":"{label}"}}"#),
            format!(r#""birth": {{"type":"literal","value":"{}"}}"#, birth.0),
            format!(r#""birthPrecision": {{"type":"literal","value":"{}"}}"#, birth.1),
            format!(r#""death": {{"type":"literal","value":"{}"}}"#, death.0),
            format!(r#""deathPrecision": {{"type":"literal","value":"{}"}}"#, death.1),
        ];
        if let Some((mqid, mlabel)) = manner {
            fields.push(format!(
                r#""manner": {{"type":"uri","value":"http://www.wikidata.org/entity/{mqid}"}}"#
            ));
            fields.push(format!(r#""mannerLabel": {{"type":"literal","value":"{mlabel}"}}"#));
        }
        if let Some(c) = cause {
            fields.push(format!(r#""causeLabel": {{"type":"literal","value":"{c}"}}"#));
        }
        format!("{{ {} }}", fields.join(", "))
    }

    fn results_json(rows: &[String]) -> String {
        format!(
            r#"{{ "head": {{"vars": []}}, "results": {{ "bindings": [ {} ] }} }}"#,
            rows.join(", ")
        )
    }

    fn client_for(rows_json: String, window: YearWindow) -> (tempfile::TempDir, String) {
        let tmp = tempfile::tempdir().unwrap();
        let mut rec = FixtureRecorder::create(tmp.path()).unwrap();
        let query = person_query(window, 100, 0);
        let url = format!("https://sparql.test/sparql?format=json&query={}", percent_encode(&query));
        rec.record(&url, 200, Some("application/sparql-results+json"), rows_json.as_bytes())
            .unwrap();
        rec.finish().unwrap();
        (tmp, "https://sparql.test/sparql".to_string())
    }

    fn window() -> YearWindow {
        YearWindow { from: 1990, to: 2022 }
    }

    #[test]
    fn natural_death_in_window_is_yielded() {
        let rows = results_json(&[binding_row(
            "Q1",
            "Alice Example",
            ("+1942-03-01T00:00:00Z", 11),
            ("+2020-05-02T00:00:00Z", 11),
            Some(("Q3739104", "natural causes")),
            None,
        )]);
        let (tmp, endpoint) = client_for(rows, window());
        let t = FixtureTransport::open(tmp.path()).unwrap();
        let client = GraphClient::new(&t, &endpoint, 100);
        let (records, drops) = client.query_persons(window()).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.person_id, "Q1");
        assert_eq!(r.birth_year, 1942);
        assert_eq!(r.death_year, 2020);
        assert_eq!(r.manner_of_death, MannerOfDeath::Natural);
        assert_eq!(drops, QueryDrops::default());
    }

    #[test]
    fn death_outside_window_not_yielded() {
        let rows = results_json(&[binding_row(
            "Q2",
            "B",
            ("+1900-01-01T00:00:00Z", 11),
            ("+1989-01-01T00:00:00Z", 11),
            None,
            None,
        )]);
        let (tmp, endpoint) = client_for(rows, window());
        let t = FixtureTransport::open(tmp.path()).unwrap();
        let (records, _) = GraphClient::new(&t, &endpoint, 100)
            .query_persons(window())
            .unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn contradictory_death_years_dropped() {
        let rows = results_json(&[
            binding_row("Q3", "C", ("+1930-01-01T00:00:00Z", 11), ("+1995-01-01T00:00:00Z", 11), None, None),
            binding_row("Q3", "C", ("+1930-01-01T00:00:00Z", 11), ("+1997-01-01T00:00:00Z", 11), None, None),
        ]);
        let (tmp, endpoint) = client_for(rows, window());
        let t = FixtureTransport::open(tmp.path()).unwrap();
        let (records, drops) = GraphClient::new(&t, &endpoint, 100)
            .query_persons(window())
            .unwrap();
        assert!(records.is_empty());
        assert_eq!(drops.contradictory_years, 1);
    }

    #[test]
    fn same_year_different_day_not_contradictory() {
        let rows = results_json(&[
            binding_row("Q4", "D", ("+1930-01-01T00:00:00Z", 11), ("+1995-01-01T00:00:00Z", 11), None, None),
            binding_row("Q4", "D", ("+1930-06-15T00:00:00Z", 11), ("+1995-03-03T00:00:00Z", 11), None, None),
        ]);
        let (tmp, endpoint) = client_for(rows, window());
        let t = FixtureTransport::open(tmp.path()).unwrap();
        let (records, drops) = GraphClient::new(&t, &endpoint, 100)
            .query_persons(window())
            .unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(drops.contradictory_years, 0);
    }

    #[test]
    fn sub_year_precision_dropped() {
        let rows = results_json(&[binding_row(
            "Q5",
            "E",
            ("+1930-00-00T00:00:00Z", 8),
            ("+1995-01-01T00:00:00Z", 11),
            None,
            None,
        )]);
        let (tmp, endpoint) = client_for(rows, window());
        let t = FixtureTransport::open(tmp.path()).unwrap();
        let (records, drops) = GraphClient::new(&t, &endpoint, 100)
            .query_persons(window())
            .unwrap();
        assert!(records.is_empty());
        assert_eq!(drops.sub_year_precision, 1);
    }

    #[test]
    fn unspecified_manner_with_cause_is_kept_for_later_filtering() {
        let rows = results_json(&[binding_row(
            "Q6",
            "F",
            ("+1930-01-01T00:00:00Z", 11),
            ("+1995-01-01T00:00:00Z", 11),
            None,
            Some("airplane crash"),
        )]);
        let (tmp, endpoint) = client_for(rows, window());
        let t = FixtureTransport::open(tmp.path()).unwrap();
        let (records, _) = GraphClient::new(&t, &endpoint, 100)
            .query_persons(window())
            .unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].manner_of_death, MannerOfDeath::Unspecified);
        assert_eq!(records[0].cause_of_death.as_deref(), Some("airplane crash"));
    }

    #[test]
    fn malformed_response_is_parse_error_with_payload() {
        let (tmp, endpoint) = client_for("this is not json".to_string(), window());
        let t = FixtureTransport::open(tmp.path()).unwrap();
        let err = GraphClient::new(&t, &endpoint, 100)
            .query_persons(window())
            .unwrap_err();
        match err {
            Error::Parse { payload, .. } => assert!(payload.contains("not json")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn pagination_is_transparent() {
        let tmp = tempfile::tempdir().unwrap();
        let mut rec = FixtureRecorder::create(tmp.path()).unwrap();
        let w = window();
        // Page 0 full (2 rows at page size 2), page 1 short.
        let page0 = results_json(&[
            binding_row("Q1", "A", ("+1930-01-01T00:00:00Z", 11), ("+1995-01-01T00:00:00Z", 11), None, None),
            binding_row("Q2", "B", ("+1931-01-01T00:00:00Z", 11), ("+1996-01-01T00:00:00Z", 11), None, None),
        ]);
        let page1 = results_json(&[binding_row(
            "Q7",
            "G",
            ("+1932-01-01T00:00:00Z", 11),
            ("+1997-01-01T00:00:00Z", 11),
            None,
            None,
        )]);
        for (offset, body) in [(0, page0), (2, page1)] {
            let query = person_query(w, 2, offset);
            let url = format!("https://sparql.test/sparql?format=json&query={}", percent_encode(&query));
            rec.record(&url, 200, Some("application/sparql-results+json"), body.as_bytes())
                .unwrap();
        }
        rec.finish().unwrap();
        let t = FixtureTransport::open(tmp.path()).unwrap();
        let (records, _) = GraphClient::new(&t, "https://sparql.test/sparql", 2)
            .query_persons(w)
            .unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].person_id, "Q1");
        assert_eq!(records[2].person_id, "Q7");
    }
}
