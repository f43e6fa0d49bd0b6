//! Cause-of-death to manner mapping.
//!
//! The table is a plain editable text file (cause,manner per line). The
//! lookup is total: causes missing from the table are treated as
//! natural, matching how records with no cause at all are handled. A
//! starter table ships with the crate; a site-specific file can replace
//! it via config.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

const STARTER_TABLE: &str = include_str!("../../data/cause_manner.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CauseManner {
    Natural,
    Unnatural,
    PandemicCovid,
}

impl CauseManner {
    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "natural" => Some(CauseManner::Natural),
            "unnatural" => Some(CauseManner::Unnatural),
            "pandemic_covid" => Some(CauseManner::PandemicCovid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CauseMannerMap {
    entries: BTreeMap<String, CauseManner>,
}

impl CauseMannerMap {
    /// The built-in starter table.
    pub fn starter() -> Self {
        Self::parse(STARTER_TABLE).expect("starter table parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cause map {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((cause, manner)) = line.rsplit_once(',') else {
                return Err(Error::Config(format!(
                    "cause map line {}: expected `cause,manner`, got {line:?}",
                    i + 1
                )));
            };
            let Some(manner) = CauseManner::parse(manner) else {
                return Err(Error::Config(format!(
                    "cause map line {}: unknown manner {manner:?}",
                    i + 1
                )));
            };
            entries.insert(normalize(cause), manner);
        }
        Ok(CauseMannerMap { entries })
    }

    /// Total lookup: unknown causes count as natural.
    pub fn lookup(&self, cause: &str) -> CauseManner {
        self.entries
            .get(&normalize(cause))
            .copied()
            .unwrap_or(CauseManner::Natural)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serialize back to the text format (sorted; for the audit copy).
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (cause, manner) in &self.entries {
            let m = match manner {
                CauseManner::Natural => "natural",
                CauseManner::Unnatural => "unnatural",
                CauseManner::PandemicCovid => "pandemic_covid",
            };
            out.push_str(&format!("{cause},{m}\n"));
        }
        out
    }
}

fn normalize(cause: &str) -> String {
    cause.trim().to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starter_table_parses_and_covers_key_entries() {
        let map = CauseMannerMap::starter();
        assert!(map.len() > 50);
        assert_eq!(map.lookup("COVID-19"), CauseManner::PandemicCovid);
        assert_eq!(map.lookup("airplane crash"), CauseManner::Unnatural);
        assert_eq!(map.lookup("pneumonia"), CauseManner::Natural);
    }

    #[test]
    fn lookup_is_total_with_natural_default() {
        let map = CauseMannerMap::starter();
        assert_eq!(map.lookup("some disease nobody catalogued"), CauseManner::Natural);
        assert_eq!(map.lookup(""), CauseManner::Natural);
    }

    #[test]
    fn lookup_is_case_insensitive() {
        let map = CauseMannerMap::starter();
        assert_eq!(map.lookup("  Traffic Collision "), CauseManner::Unnatural);
    }

    #[test]
    fn bad_manner_is_rejected() {
        assert!(CauseMannerMap::parse("x,bogus").is_err());
    }

    #[test]
    fn table_round_trips() {
        let map = CauseMannerMap::starter();
        let again = CauseMannerMap::parse(&map.to_table()).unwrap();
        assert_eq!(map.len(), again.len());
        assert_eq!(again.lookup("covid-19"), CauseManner::PandemicCovid);
    }
}
