//! Stage 2: death-manner/cause filtering and label derivation.
//!
//! Keeps persons who died of natural or unspecified causes, diverts
//! pandemic deaths into the held-out cohort, validates the image year
//! against the lifespan, and derives the remaining-lifespan label plus
//! demographic covariates. Every drop is logged with a machine-readable
//! reason.

pub mod cause_map;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::LabelingConfig;
use crate::error::{Error, Result};
use crate::ingest::{MannerOfDeath, PersonRecord};
use crate::manifest::{read_jsonl, require_artifact, write_jsonl, Provenance};
use cause_map::{CauseManner, CauseMannerMap};

/// One training example before face processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub person_id: String,
    pub image_path: String,
    pub rl_years: i32,
    pub age_at_image: i32,
    pub age_at_death: i32,
}

impl LabeledRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.rl_years < 0 {
            return Err(format!("{}: negative rl {}", self.person_id, self.rl_years));
        }
        if self.rl_years + self.age_at_image != self.age_at_death {
            return Err(format!(
                "{}: rl {} + age_at_image {} != age_at_death {}",
                self.person_id, self.rl_years, self.age_at_image, self.age_at_death
            ));
        }
        Ok(())
    }
}

/// Outcome of one record-wise filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterOutcome {
    Keep,
    Drop(String),
    /// Diverted to the held-out pandemic cohort, not discarded.
    Covid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DropEntry {
    pub person_id: String,
    pub stage: String,
    pub reason: String,
}

/// Manner/cause filter.
///
/// Non-natural manners drop. Unspecified manners drop only when the
/// recorded cause maps to an unnatural manner. A pandemic cause diverts
/// the record to the cohort regardless of the stated manner.
pub fn filter_death_manner(record: &PersonRecord, map: &CauseMannerMap) -> FilterOutcome {
    let causes: Vec<&str> = record
        .cause_of_death
        .as_deref()
        .map(|s| s.split('|').collect())
        .unwrap_or_default();

    if causes.iter().any(|c| map.lookup(c) == CauseManner::PandemicCovid) {
        return FilterOutcome::Covid;
    }

    match &record.manner_of_death {
        MannerOfDeath::Natural => FilterOutcome::Keep,
        MannerOfDeath::Other(m) => FilterOutcome::Drop(format!("manner_not_natural:{m}")),
        MannerOfDeath::Unspecified => {
            if let Some(bad) = causes.iter().find(|c| map.lookup(c) == CauseManner::Unnatural) {
                FilterOutcome::Drop(format!("cause_unnatural:{bad}"))
            } else {
                FilterOutcome::Keep
            }
        }
    }
}

/// Keep iff birth_year <= image_year <= death_year.
pub fn validate_image_year(record: &PersonRecord) -> Result<FilterOutcome> {
    let year = record.image_year.ok_or_else(|| {
        Error::Structural(format!(
            "{}: validate_image_year called without an image year (filter ordering bug)",
            record.person_id
        ))
    })?;
    if year < record.birth_year {
        Ok(FilterOutcome::Drop(format!(
            "image_year_before_birth:{year}<{}",
            record.birth_year
        )))
    } else if year > record.death_year {
        Ok(FilterOutcome::Drop(format!(
            "image_year_after_death:{year}>{}",
            record.death_year
        )))
    } else {
        Ok(FilterOutcome::Keep)
    }
}

/// Age-at-death filter (the training corpus keeps 50+ only).
pub fn filter_min_age(record: &PersonRecord, min_age_at_death: i32) -> FilterOutcome {
    let age = record.death_year - record.birth_year;
    if age < min_age_at_death {
        FilterOutcome::Drop(format!("age_at_death_below_minimum:{age}<{min_age_at_death}"))
    } else {
        FilterOutcome::Keep
    }
}

/// Derive the label and covariates for a record that passed all filters.
pub fn derive_label(record: &PersonRecord, min_age_at_death: i32) -> Result<LabeledRecord> {
    if let FilterOutcome::Drop(reason) = filter_min_age(record, min_age_at_death) {
        return Err(Error::InvalidInput(reason));
    }
    derive_label_unfiltered(record)
}

/// Label derivation without the age gate; used for the diverted cohort,
/// whose construction does not state an age floor.
pub fn derive_label_unfiltered(record: &PersonRecord) -> Result<LabeledRecord> {
    let image_year = record.image_year.ok_or_else(|| {
        Error::Structural(format!(
            "{}: derive_label called without an image year (filter ordering bug)",
            record.person_id
        ))
    })?;
    let image_path = record.image_ref.clone().ok_or_else(|| {
        Error::Structural(format!(
            "{}: derive_label called without an image path (filter ordering bug)",
            record.person_id
        ))
    })?;
    let labeled = LabeledRecord {
        person_id: record.person_id.clone(),
        image_path,
        rl_years: record.death_year - image_year,
        age_at_image: image_year - record.birth_year,
        age_at_death: record.death_year - record.birth_year,
    };
    labeled.validate().map_err(Error::Structural)?;
    Ok(labeled)
}

/// Integer-year histogram of age at death, as a plot-ready table.
pub fn emit_age_at_death_histogram(records: &[LabeledRecord]) -> Result<BTreeMap<i32, usize>> {
    if records.is_empty() {
        return Err(Error::InvalidInput(
            "cannot emit age-at-death histogram for an empty record set".into(),
        ));
    }
    let mut hist = BTreeMap::new();
    for r in records {
        *hist.entry(r.age_at_death).or_insert(0) += 1;
    }
    Ok(hist)
}

#[derive(Debug, Default, Clone, Serialize)]
pub struct LabelSummary {
    pub input: usize,
    pub labeled: usize,
    pub covid: usize,
    pub dropped: usize,
}

/// Run the labeling stage over the ingest manifest.
pub fn run_labeling(
    cfg: &LabelingConfig,
    ingest_dir: &Path,
    out_dir: &Path,
    config_sha256: &str,
) -> Result<LabelSummary> {
    let manifest_path = ingest_dir.join("manifest.jsonl");
    require_artifact(&manifest_path, "ingest manifest", "ingest")?;
    let map = match &cfg.cause_map {
        Some(path) => CauseMannerMap::load(path)?,
        None => CauseMannerMap::starter(),
    };

    let mut records: Vec<PersonRecord> = read_jsonl(&manifest_path)?;
    records.sort_by(|a, b| a.person_id.cmp(&b.person_id));

    let mut labeled = Vec::new();
    let mut covid = Vec::new();
    let mut drops = Vec::new();
    let mut drop = |person_id: &str, reason: String| {
        drops.push(DropEntry {
            person_id: person_id.to_string(),
            stage: "labeling".to_string(),
            reason,
        });
    };

    for record in &records {
        if record.image_ref.is_none() || record.image_year.is_none() {
            drop(&record.person_id, "missing_image_or_year".into());
            continue;
        }
        match filter_death_manner(record, &map) {
            FilterOutcome::Drop(reason) => {
                drop(&record.person_id, reason);
                continue;
            }
            FilterOutcome::Covid => {
                match validate_image_year(record)? {
                    FilterOutcome::Drop(reason) => drop(&record.person_id, reason),
                    _ => covid.push(derive_label_unfiltered(record)?),
                }
                continue;
            }
            FilterOutcome::Keep => {}
        }
        match validate_image_year(record)? {
            FilterOutcome::Drop(reason) => {
                drop(&record.person_id, reason);
                continue;
            }
            _ => {}
        }
        match filter_min_age(record, cfg.min_age_at_death) {
            FilterOutcome::Drop(reason) => {
                drop(&record.person_id, reason);
                continue;
            }
            _ => {}
        }
        labeled.push(derive_label(record, cfg.min_age_at_death)?);
    }

    write_jsonl(&out_dir.join("labeled.jsonl"), &labeled)?;
    write_jsonl(&out_dir.join("covid.jsonl"), &covid)?;
    write_jsonl(&out_dir.join("drops.jsonl"), &drops)?;
    std::fs::write(out_dir.join("cause_manner_used.csv"), map.to_table())?;

    if !labeled.is_empty() {
        let hist = emit_age_at_death_histogram(&labeled)?;
        let mut w = csv::Writer::from_path(out_dir.join("age_at_death_histogram.csv"))?;
        w.write_record(["age_at_death", "count"])?;
        for (age, count) in &hist {
            w.write_record([age.to_string(), count.to_string()])?;
        }
        w.flush()?;
        crate::plot::bar_chart_png(
            &hist.iter().map(|(k, v)| (*k as f64, *v as f64)).collect::<Vec<_>>(),
            &out_dir.join("age_at_death_histogram.png"),
        )?;
    }

    Provenance::new("label", config_sha256)
        .input("ingest manifest", &manifest_path)?
        .output("labeled.jsonl")
        .output("covid.jsonl")
        .output("drops.jsonl")
        .output("age_at_death_histogram.csv")
        .write(out_dir)?;

    let summary = LabelSummary {
        input: records.len(),
        labeled: labeled.len(),
        covid: covid.len(),
        dropped: drops.len(),
    };
    log::info!(
        "label: {} in, {} labeled, {} covid, {} dropped",
        summary.input, summary.labeled, summary.covid, summary.dropped
    );
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ImageYearSource;

    fn person(birth: i32, death: i32, image: Option<i32>) -> PersonRecord {
        PersonRecord {
            person_id: "Q1".into(),
            name: "T".into(),
            birth_year: birth,
            death_year: death,
            manner_of_death: MannerOfDeath::Natural,
            cause_of_death: None,
            image_ref: image.map(|_| "store/x.jpg".into()),
            image_year: image,
            image_year_source: image.map(|_| ImageYearSource::CaptionParse),
        }
    }

    #[test]
    fn natural_manner_keeps() {
        let map = CauseMannerMap::starter();
        assert_eq!(filter_death_manner(&person(1940, 2000, None), &map), FilterOutcome::Keep);
    }

    #[test]
    fn other_manner_drops() {
        let map = CauseMannerMap::starter();
        let mut p = person(1940, 2000, None);
        p.manner_of_death = MannerOfDeath::Other("accident".into());
        assert!(matches!(filter_death_manner(&p, &map), FilterOutcome::Drop(_)));
    }

    #[test]
    fn unspecified_manner_with_unnatural_cause_drops() {
        let map = CauseMannerMap::starter();
        let mut p = person(1940, 2000, None);
        p.manner_of_death = MannerOfDeath::Unspecified;
        p.cause_of_death = Some("airplane crash".into());
        match filter_death_manner(&p, &map) {
            FilterOutcome::Drop(reason) => assert!(reason.contains("airplane crash")),
            other => panic!("expected drop, got {other:?}"),
        }
    }

    #[test]
    fn unspecified_manner_with_unknown_cause_keeps() {
        let map = CauseMannerMap::starter();
        let mut p = person(1940, 2000, None);
        p.manner_of_death = MannerOfDeath::Unspecified;
        p.cause_of_death = Some("rare uncatalogued disease".into());
        assert_eq!(filter_death_manner(&p, &map), FilterOutcome::Keep);
    }

    #[test]
    fn covid_cause_diverts_even_when_manner_natural() {
        let map = CauseMannerMap::starter();
        let mut p = person(1940, 2020, None);
        p.cause_of_death = Some("COVID-19".into());
        assert_eq!(filter_death_manner(&p, &map), FilterOutcome::Covid);
    }

    #[test]
    fn image_year_bounds() {
        // born 1930, image 1925 -> drop
        let p = person(1930, 2000, Some(1925));
        assert!(matches!(validate_image_year(&p).unwrap(), FilterOutcome::Drop(_)));
        // born 1930, died 2000, image 1999 -> keep
        let p = person(1930, 2000, Some(1999));
        assert_eq!(validate_image_year(&p).unwrap(), FilterOutcome::Keep);
        // image year == death year -> keep, rl 0
        let p = person(1930, 2000, Some(2000));
        assert_eq!(validate_image_year(&p).unwrap(), FilterOutcome::Keep);
        assert_eq!(derive_label(&p, 50).unwrap().rl_years, 0);
        // image year == birth year -> keep
        let p = person(1930, 2000, Some(1930));
        assert_eq!(validate_image_year(&p).unwrap(), FilterOutcome::Keep);
        // image year after death -> drop
        let p = person(1930, 2000, Some(2001));
        assert!(matches!(validate_image_year(&p).unwrap(), FilterOutcome::Drop(_)));
    }

    #[test]
    fn missing_image_year_is_structural() {
        let p = person(1930, 2000, None);
        assert!(matches!(validate_image_year(&p), Err(Error::Structural(_))));
        assert!(matches!(derive_label(&p, 50), Err(Error::Structural(_))));
    }

    #[test]
    fn label_arithmetic_matches_worked_example() {
        // image 1945, death 2020 -> rl 75
        let p = person(1900, 2020, Some(1945));
        let l = derive_label(&p, 50).unwrap();
        assert_eq!(l.rl_years, 75);
        assert_eq!(l.age_at_image, 45);
        assert_eq!(l.age_at_death, 120);
        assert_eq!(l.rl_years + l.age_at_image, l.age_at_death);
    }

    #[test]
    fn young_age_at_death_drops() {
        // born 1960, died 2005 (age 45)
        let p = person(1960, 2005, Some(2000));
        let err = derive_label(&p, 50).unwrap_err();
        assert!(err.to_string().contains("age_at_death_below_minimum"));
    }

    #[test]
    fn histogram_counts_and_empty_error() {
        let l = |age: i32| LabeledRecord {
            person_id: format!("Q{age}"),
            image_path: "p".into(),
            rl_years: 0,
            age_at_image: age,
            age_at_death: age,
        };
        let hist = emit_age_at_death_histogram(&[l(70), l(70)]).unwrap();
        assert_eq!(hist.len(), 1);
        assert_eq!(hist[&70], 2);
        assert!(emit_age_at_death_histogram(&[]).is_err());
    }

    #[test]
    fn filter_composition_is_order_independent() {
        use rand::{Rng, SeedableRng};
        let map = CauseMannerMap::starter();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let causes = [None, Some("covid-19"), Some("airplane crash"), Some("cancer")];
        let manners = [
            MannerOfDeath::Natural,
            MannerOfDeath::Unspecified,
            MannerOfDeath::Other("accident".into()),
        ];
        for _ in 0..500 {
            let birth = rng.gen_range(1890..1975);
            let death = rng.gen_range(1990..=2022);
            if birth > death {
                continue;
            }
            let mut p = person(birth, death, Some(rng.gen_range(birth - 2..death + 3)));
            p.manner_of_death = manners[rng.gen_range(0..manners.len())].clone();
            p.cause_of_death = causes[rng.gen_range(0..causes.len())].map(String::from);

            // The three filters as independent predicates.
            let manner_keep = filter_death_manner(&p, &map) == FilterOutcome::Keep;
            let year_keep = validate_image_year(&p).unwrap() == FilterOutcome::Keep;
            let age_keep = filter_min_age(&p, 50) == FilterOutcome::Keep;
            let outcomes = [manner_keep, year_keep, age_keep];

            // Every permutation short-circuits to the same kept decision.
            let expected = outcomes.iter().all(|&k| k);
            for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                let kept = perm.iter().all(|&i| outcomes[i]);
                assert_eq!(kept, expected);
            }
        }
    }

    #[test]
    fn covid_and_training_sets_are_disjoint_end_to_end() {
        let tmp = tempfile::tempdir().unwrap();
        let ingest_dir = tmp.path().join("ingest");
        std::fs::create_dir_all(&ingest_dir).unwrap();
        let mk = |id: &str, cause: Option<&str>| {
            let mut p = person(1940, 2021, Some(2000));
            p.person_id = id.into();
            p.cause_of_death = cause.map(String::from);
            p
        };
        let records = vec![
            mk("Q1", None),
            mk("Q2", Some("covid-19")),
            mk("Q3", Some("cancer")),
            mk("Q4", Some("traffic collision")),
        ];
        // Q4 has natural manner so the unnatural cause does not drop it.
        write_jsonl(&ingest_dir.join("manifest.jsonl"), &records).unwrap();
        let out = tmp.path().join("label");
        let summary = run_labeling(&LabelingConfig::default(), &ingest_dir, &out, "cfg").unwrap();
        assert_eq!(summary.labeled, 3);
        assert_eq!(summary.covid, 1);

        let labeled: Vec<LabeledRecord> = read_jsonl(&out.join("labeled.jsonl")).unwrap();
        let covid: Vec<LabeledRecord> = read_jsonl(&out.join("covid.jsonl")).unwrap();
        for c in &covid {
            assert!(labeled.iter().all(|l| l.person_id != c.person_id));
        }
    }
}
