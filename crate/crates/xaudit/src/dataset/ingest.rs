//! CSV ingest for match files and referee adjudication files.
//!
//! Match file contract (UTF-8, header required):
//! `match_id,domain,season,home_<event>...,away_<event>...` for all 19
//! events in [`super::EVENT_NAMES`]. `season` is optional; unknown columns
//! are rejected. Rows with non-integer or negative counts are excluded with
//! reason `unparseable`; repeated match ids keep the first row and exclude
//! later ones with reason `duplicate`. Excluded rows are reported, never
//! imputed.
//!
//! Adjudication file contract:
//! `match_id,perspective,event,count_ref1,count_ref2,count_ref3` with one row
//! per (match, side, event); the three referee counts are resolved by
//! [`super::adjudicate`].

use super::{adjudicate, FeatureSchema, MatchRecord, SideCounts, EVENT_NAMES};
use crate::error::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

/// A rejected input row and why it was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub match_id: String,
    pub reason: String,
}

/// Validated records plus the exclusion report.
#[derive(Debug, Clone)]
pub struct IngestReport {
    pub records: Vec<MatchRecord>,
    pub exclusions: Vec<Exclusion>,
}

fn required_columns(schema: &FeatureSchema) -> Vec<String> {
    let mut cols = Vec::with_capacity(2 + 2 * (schema.p() + 2));
    cols.push("match_id".to_string());
    cols.push("domain".to_string());
    for side in ["home", "away"] {
        for name in schema.feature_names() {
            cols.push(format!("{side}_{name}"));
        }
        cols.push(format!("{side}_{}", schema.target_pos()));
        cols.push(format!("{side}_{}", schema.target_neg()));
    }
    cols
}

/// Read and validate a match CSV against the schema column contract.
pub fn ingest_matches(path: &Path, schema: &FeatureSchema) -> Result<IngestReport> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Schema(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("missing header row: {e}")))?
        .clone();
    let header_names: Vec<&str> = headers.iter().collect();
    let header_set: BTreeSet<&str> = header_names.iter().copied().collect();
    if header_set.len() != header_names.len() {
        return Err(Error::Schema("duplicate column in header".into()));
    }

    let required = required_columns(schema);
    for col in &required {
        if !header_set.contains(col.as_str()) {
            return Err(Error::Schema(format!("missing required column: {col}")));
        }
    }
    let allowed: BTreeSet<&str> = required
        .iter()
        .map(|s| s.as_str())
        .chain(std::iter::once("season"))
        .collect();
    for name in &header_names {
        if !allowed.contains(name) {
            return Err(Error::Schema(format!("unknown column: {name}")));
        }
    }

    let col_index: BTreeMap<&str, usize> = header_names
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, i))
        .collect();
    let idx = |name: &str| col_index[name];
    let season_idx = col_index.get("season").copied();

    let mut records = Vec::new();
    let mut exclusions = Vec::new();
    let mut seen_ids = BTreeSet::new();

    for (row_no, row) in reader.records().enumerate() {
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                exclusions.push(Exclusion {
                    match_id: format!("row_{}", row_no + 2),
                    reason: "unparseable".into(),
                });
                continue;
            }
        };
        let get = |i: usize| row.get(i).unwrap_or("").trim();
        let match_id = get(idx("match_id")).to_string();
        if match_id.is_empty() {
            exclusions.push(Exclusion {
                match_id: format!("row_{}", row_no + 2),
                reason: "unparseable".into(),
            });
            continue;
        }
        if seen_ids.contains(&match_id) {
            exclusions.push(Exclusion {
                match_id,
                reason: "duplicate".into(),
            });
            continue;
        }

        let parse_count = |name: &str| -> std::result::Result<u32, ()> {
            let raw = get(idx(name));
            raw.parse::<u32>().map_err(|_| ())
        };
        let parse_side = |side: &str| -> std::result::Result<SideCounts, ()> {
            let mut features = Vec::with_capacity(schema.p());
            for name in schema.feature_names() {
                features.push(parse_count(&format!("{side}_{name}"))?);
            }
            Ok(SideCounts {
                features,
                goals: parse_count(&format!("{side}_{}", schema.target_pos()))?,
                enemy_goals: parse_count(&format!("{side}_{}", schema.target_neg()))?,
            })
        };

        match (parse_side("home"), parse_side("away")) {
            (Ok(home), Ok(away)) => {
                seen_ids.insert(match_id.clone());
                records.push(MatchRecord {
                    match_id,
                    domain: get(idx("domain")).to_string(),
                    season: season_idx
                        .map(|i| get(i).to_string())
                        .filter(|s| !s.is_empty()),
                    home,
                    away,
                });
            }
            _ => exclusions.push(Exclusion {
                match_id,
                reason: "unparseable".into(),
            }),
        }
    }

    Ok(IngestReport {
        records,
        exclusions,
    })
}

/// Adjudicated event counts grouped per (match, side).
#[derive(Debug, Clone)]
pub struct AdjudicatedMatches {
    /// match_id -> (home counts by event name, away counts by event name)
    pub matches: BTreeMap<String, (BTreeMap<String, u32>, BTreeMap<String, u32>)>,
    pub exclusions: Vec<Exclusion>,
}

impl AdjudicatedMatches {
    /// Assemble full match records; matches missing any of the 19 events on
    /// either side are excluded with reason `unparseable`.
    pub fn into_records(mut self, schema: &FeatureSchema, domain: &str) -> IngestReport {
        let mut records = Vec::new();
        let mut exclusions = std::mem::take(&mut self.exclusions);
        for (match_id, (home, away)) in self.matches {
            let build = |counts: &BTreeMap<String, u32>| -> Option<SideCounts> {
                let mut features = Vec::with_capacity(schema.p());
                for name in schema.feature_names() {
                    features.push(*counts.get(name)?);
                }
                Some(SideCounts {
                    features,
                    goals: *counts.get(schema.target_pos())?,
                    enemy_goals: *counts.get(schema.target_neg())?,
                })
            };
            match (build(&home), build(&away)) {
                (Some(home), Some(away)) => records.push(MatchRecord {
                    match_id,
                    domain: domain.to_string(),
                    season: None,
                    home,
                    away,
                }),
                _ => exclusions.push(Exclusion {
                    match_id,
                    reason: "unparseable".into(),
                }),
            }
        }
        IngestReport {
            records,
            exclusions,
        }
    }
}

/// Read a three-referee adjudication CSV and resolve each event count.
pub fn ingest_adjudication(path: &Path) -> Result<AdjudicatedMatches> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Schema(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("missing header row: {e}")))?
        .clone();
    let expected = [
        "match_id",
        "perspective",
        "event",
        "count_ref1",
        "count_ref2",
        "count_ref3",
    ];
    let names: Vec<&str> = headers.iter().collect();
    for col in expected {
        if !names.contains(&col) {
            return Err(Error::Schema(format!("missing required column: {col}")));
        }
    }
    let col: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();

    let mut matches: BTreeMap<String, (BTreeMap<String, u32>, BTreeMap<String, u32>)> =
        BTreeMap::new();
    let mut exclusions = Vec::new();
    let known_events: BTreeSet<&str> = EVENT_NAMES.iter().copied().collect();

    for (row_no, row) in reader.records().enumerate() {
        let reject = |exclusions: &mut Vec<Exclusion>, id: String| {
            exclusions.push(Exclusion {
                match_id: id,
                reason: "unparseable".into(),
            });
        };
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                reject(&mut exclusions, format!("row_{}", row_no + 2));
                continue;
            }
        };
        let get = |name: &str| row.get(col[name]).unwrap_or("").trim();
        let match_id = get("match_id").to_string();
        let event = get("event").to_string();
        let perspective = get("perspective");
        let counts: std::result::Result<Vec<u32>, _> = ["count_ref1", "count_ref2", "count_ref3"]
            .iter()
            .map(|c| get(c).parse::<u32>())
            .collect();
        if match_id.is_empty()
            || !known_events.contains(event.as_str())
            || !(perspective == "home" || perspective == "away")
        {
            reject(
                &mut exclusions,
                if match_id.is_empty() {
                    format!("row_{}", row_no + 2)
                } else {
                    match_id
                },
            );
            continue;
        }
        let Ok(counts) = counts else {
            reject(&mut exclusions, match_id);
            continue;
        };
        let value = adjudicate((counts[0], counts[1], counts[2]));
        let entry = matches.entry(match_id).or_default();
        let side = if perspective == "home" {
            &mut entry.0
        } else {
            &mut entry.1
        };
        side.insert(event, value);
    }

    Ok(AdjudicatedMatches {
        matches,
        exclusions,
    })
}

/// Write validated records back out in the canonical column order.
pub fn write_matches(path: &Path, records: &[MatchRecord], schema: &FeatureSchema) -> Result<()> {
    let mut out = Vec::new();
    let mut header = vec!["match_id".to_string(), "domain".to_string(), "season".to_string()];
    for side in ["home", "away"] {
        for name in schema.feature_names() {
            header.push(format!("{side}_{name}"));
        }
        header.push(format!("{side}_{}", schema.target_pos()));
        header.push(format!("{side}_{}", schema.target_neg()));
    }
    writeln!(out, "{}", header.join(",")).expect("write to vec");
    for rec in records {
        let mut row = vec![
            rec.match_id.clone(),
            rec.domain.clone(),
            rec.season.clone().unwrap_or_default(),
        ];
        for side in [&rec.home, &rec.away] {
            for &c in &side.features {
                row.push(c.to_string());
            }
            row.push(side.goals.to_string());
            row.push(side.enemy_goals.to_string());
        }
        writeln!(out, "{}", row.join(",")).expect("write to vec");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Write the exclusion report (`match_id,reason`).
pub fn write_exclusions(path: &Path, exclusions: &[Exclusion]) -> Result<()> {
    let mut out = String::from("match_id,reason\n");
    for e in exclusions {
        out.push_str(&format!("{},{}\n", e.match_id, e.reason));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}
