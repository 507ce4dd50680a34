//! Data model for match-event samples: schema, ingest, leakage-safe
//! splitting, perspective expansion, referee adjudication, and per-domain
//! statistics.
//!
//! A match is recorded as per-side counts for 19 event categories. Two of
//! them (`goal`, `enemy_goal`) define the regression target
//! `y = goal - enemy_goal`; the remaining 17 are model inputs. Splitting is
//! always performed at match level *before* each match is expanded into its
//! home and away perspective samples, so the two views of one match can never
//! straddle a split boundary.

mod ingest;

pub use ingest::{
    ingest_adjudication, ingest_matches, write_exclusions, write_matches, AdjudicatedMatches,
    Exclusion, IngestReport,
};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Event categories recorded per match side, in canonical column order.
/// The first 17 are input features; the last two are the target pair.
pub const EVENT_NAMES: [&str; 19] = [
    "shot_on_target",
    "shot_off_target",
    "blocked_shot",
    "pass_success",
    "pass_fail",
    "dribbles_success",
    "dribbles_fail",
    "offside",
    "corner",
    "tackle_success",
    "tackle_fail",
    "touch",
    "block",
    "interception",
    "clearance",
    "save",
    "foul",
    "goal",
    "enemy_goal",
];

/// Perturbation direction used by counterfactual construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Increase,
    Decrease,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Increase => 1.0,
            Direction::Decrease => -1.0,
        }
    }
}

/// Failure-type features are perturbed downward: the lowercased name contains
/// "fail" or equals one of "offside", "foul", "fouls".
pub fn direction_for(feature_name: &str) -> Direction {
    let lower = feature_name.to_lowercase();
    if lower.contains("fail") || lower == "offside" || lower == "foul" || lower == "fouls" {
        Direction::Decrease
    } else {
        Direction::Increase
    }
}

/// Ordered feature names plus the target-column pair and per-feature
/// perturbation directions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    feature_names: Vec<String>,
    target_pos: String,
    target_neg: String,
    direction: Vec<Direction>,
}

impl FeatureSchema {
    /// Build a schema from feature names and the own/opponent goal columns.
    /// Directions are derived from the feature names.
    pub fn new(
        feature_names: Vec<String>,
        target_pos: impl Into<String>,
        target_neg: impl Into<String>,
    ) -> Result<Self> {
        let target_pos = target_pos.into();
        let target_neg = target_neg.into();
        if feature_names.is_empty() {
            return Err(Error::Invalid("schema needs at least one feature".into()));
        }
        let mut seen = BTreeSet::new();
        for name in &feature_names {
            if !seen.insert(name.clone()) {
                return Err(Error::Invalid(format!("duplicate feature name: {name}")));
            }
            if *name == target_pos || *name == target_neg {
                return Err(Error::Invalid(format!(
                    "feature {name} collides with a target column"
                )));
            }
        }
        let direction = feature_names.iter().map(|n| direction_for(n)).collect();
        Ok(FeatureSchema {
            feature_names,
            target_pos,
            target_neg,
            direction,
        })
    }

    /// The default 17-feature match-event schema.
    pub fn default_events() -> Self {
        let features = EVENT_NAMES[..17].iter().map(|s| s.to_string()).collect();
        FeatureSchema::new(features, "goal", "enemy_goal").expect("static schema is valid")
    }

    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn target_pos(&self) -> &str {
        &self.target_pos
    }

    pub fn target_neg(&self) -> &str {
        &self.target_neg
    }

    pub fn direction(&self) -> &[Direction] {
        &self.direction
    }
}

/// Event counts for one side of a match, aligned to a schema:
/// `features[j]` matches `schema.feature_names()[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideCounts {
    pub features: Vec<u32>,
    pub goals: u32,
    pub enemy_goals: u32,
}

/// One match: id, domain label, and both sides' event counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub match_id: String,
    pub domain: String,
    pub season: Option<String>,
    pub home: SideCounts,
    pub away: SideCounts,
}

/// Which side of the match a sample views it from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Perspective {
    Home,
    Away,
}

impl Perspective {
    pub fn as_str(self) -> &'static str {
        match self {
            Perspective::Home => "home",
            Perspective::Away => "away",
        }
    }
}

/// One (match, perspective) sample. Counts stay integral here; they are
/// promoted to floating point at the model boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<u32>,
    pub y: i64,
    pub match_id: String,
    pub perspective: Perspective,
    pub domain: String,
}

impl Sample {
    pub fn features_f64(&self) -> Vec<f64> {
        self.x.iter().map(|&c| c as f64).collect()
    }
}

/// Whether a domain may contribute to training and reference statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    /// Source domain: usable for training, backgrounds, and reference stats.
    Elite,
    /// Target domain: inference and explanation only.
    Target,
}

/// Which stage of the pipeline a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataRole {
    Train,
    Val,
    Test,
    /// Unsplit data (e.g. an inference-only target domain).
    Full,
}

/// A set of samples sharing a schema and a domain label, with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDataset {
    pub schema: FeatureSchema,
    pub samples: Vec<Sample>,
    pub domain: String,
    pub kind: DomainKind,
    pub role: DataRole,
}

impl DomainDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature matrix promoted to floating point (model boundary).
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(Sample::features_f64).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y as f64).collect()
    }
}

/// Match-disjoint train/val/test datasets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: DomainDataset,
    pub val: DomainDataset,
    pub test: DomainDataset,
}

/// Match-id partition produced by `split_matches`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPartition {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Per-feature mean and population standard deviation of one dataset, with
/// the provenance needed to gate reference-statistic use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub source_domain: String,
    pub source_kind: DomainKind,
    pub source_role: DataRole,
}

impl DomainStats {
    /// True when the statistics were computed on elite training data, the
    /// only admissible source for counterfactual targets.
    pub fn is_elite_train(&self) -> bool {
        self.source_kind == DomainKind::Elite && self.source_role == DataRole::Train
    }
}

/// Resolve three referee counts for one event: majority value when at least
/// two agree, otherwise the median of the three.
pub fn adjudicate(counts: (u32, u32, u32)) -> u32 {
    let (a, b, c) = counts;
    if a == b || a == c {
        return a;
    }
    if b == c {
        return b;
    }
    let mut v = [a, b, c];
    v.sort_unstable();
    v[1]
}

/// Random match-level partition with the given proportions.
///
/// Ids are sorted before shuffling, so the partition depends only on the set
/// of matches and the seed, not on input order. Non-divisible counts use
/// largest-remainder rounding with ties resolved toward the earlier split
/// (train, then val, then test).
pub fn split_matches(
    records: &[MatchRecord],
    ratios: (u32, u32, u32),
    seed: u64,
) -> Result<MatchPartition> {
    let (rt, rv, rs) = ratios;
    if rt == 0 || rv == 0 || rs == 0 {
        return Err(Error::Invalid("split ratios must be positive".into()));
    }
    if records.len() < 3 {
        return Err(Error::Invalid(format!(
            "insufficient matches: {} for a 3-way split",
            records.len()
        )));
    }
    let mut ids: Vec<String> = records.iter().map(|r| r.match_id.clone()).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 3 {
        return Err(Error::Invalid(format!(
            "insufficient matches: {} distinct ids",
            ids.len()
        )));
    }
    let mut rng = stream_rng(seed, Stream::Split, 0);
    ids.shuffle(&mut rng);

    let counts = largest_remainder(ids.len(), [rt as u64, rv as u64, rs as u64]);
    let mut train: Vec<String> = ids.drain(..counts[0]).collect();
    let mut val: Vec<String> = ids.drain(..counts[1]).collect();
    let mut test: Vec<String> = ids;
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(MatchPartition { train, val, test })
}

/// Apportion `n` items over parts proportional to `weights` using the
/// largest-remainder method; remainder ties go to the earlier part.
fn largest_remainder(n: usize, weights: [u64; 3]) -> [usize; 3] {
    let total: u64 = weights.iter().sum();
    let mut counts = [0usize; 3];
    let mut remainders: Vec<(usize, u64)> = Vec::with_capacity(3);
    let mut assigned = 0usize;
    for (i, &w) in weights.iter().enumerate() {
        let exact_num = n as u64 * w;
        counts[i] = (exact_num / total) as usize;
        assigned += counts[i];
        remainders.push((i, exact_num % total));
    }
    // Stable sort keeps the earlier part first on equal remainders.
    remainders.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut leftover = n - assigned;
    for (i, _) in remainders {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    counts
}

/// Expand matches into two perspective samples each (home view and away
/// view) under an explicit dataset label and provenance.
pub fn expand_perspectives(
    records: &[MatchRecord],
    schema: &FeatureSchema,
    domain_label: &str,
    kind: DomainKind,
    role: DataRole,
) -> Result<DomainDataset> {
    let p = schema.p();
    let mut samples = Vec::with_capacity(records.len() * 2);
    for rec in records {
        for (side, perspective) in [(&rec.home, Perspective::Home), (&rec.away, Perspective::Away)]
        {
            if side.features.len() != p {
                return Err(Error::Invalid(format!(
                    "match {}: {} feature counts, schema expects {p}",
                    rec.match_id,
                    side.features.len()
                )));
            }
            samples.push(Sample {
                x: side.features.clone(),
                y: side.goals as i64 - side.enemy_goals as i64,
                match_id: rec.match_id.clone(),
                perspective,
                domain: rec.domain.clone(),
            });
        }
    }
    Ok(DomainDataset {
        schema: schema.clone(),
        samples,
        domain: domain_label.to_string(),
        kind,
        role,
    })
}

/// Expand a match partition into match-disjoint train/val/test datasets.
pub fn expand_partition(
    records: &[MatchRecord],
    partition: &MatchPartition,
    schema: &FeatureSchema,
    domain_label: &str,
    kind: DomainKind,
) -> Result<SplitDataset> {
    let select = |ids: &[String]| -> Vec<MatchRecord> {
        let idset: BTreeSet<&String> = ids.iter().collect();
        records
            .iter()
            .filter(|r| idset.contains(&r.match_id))
            .cloned()
            .collect()
    };
    Ok(SplitDataset {
        train: expand_perspectives(&select(&partition.train), schema, domain_label, kind, DataRole::Train)?,
        val: expand_perspectives(&select(&partition.val), schema, domain_label, kind, DataRole::Val)?,
        test: expand_perspectives(&select(&partition.test), schema, domain_label, kind, DataRole::Test)?,
    })
}

/// Per-feature mean and population (divisor-N) standard deviation.
pub fn compute_stats(ds: &DomainDataset) -> Result<DomainStats> {
    if ds.is_empty() {
        return Err(Error::Invalid("cannot compute stats of an empty dataset".into()));
    }
    let p = ds.schema.p();
    let n = ds.len() as f64;
    let mut mu = vec![0.0; p];
    for s in &ds.samples {
        for (j, &c) in s.x.iter().enumerate() {
            mu[j] += c as f64;
        }
    }
    for m in mu.iter_mut() {
        *m /= n;
    }
    let mut sigma = vec![0.0; p];
    for s in &ds.samples {
        for (j, &c) in s.x.iter().enumerate() {
            let d = c as f64 - mu[j];
            sigma[j] += d * d;
        }
    }
    for v in sigma.iter_mut() {
        *v = (*v / n).sqrt();
    }
    Ok(DomainStats {
        mu,
        sigma,
        source_domain: ds.domain.clone(),
        source_kind: ds.kind,
        source_role: ds.role,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn record(id: &str, home_goals: u32, away_goals: u32) -> MatchRecord {
        let schema = FeatureSchema::default_events();
        MatchRecord {
            match_id: id.to_string(),
            domain: "league_a".to_string(),
            season: None,
            home: SideCounts {
                features: vec![1; schema.p()],
                goals: home_goals,
                enemy_goals: away_goals,
            },
            away: SideCounts {
                features: vec![2; schema.p()],
                goals: away_goals,
                enemy_goals: home_goals,
            },
        }
    }

    #[test]
    fn default_schema_has_17_features_and_5_decrease_flags() {
        let schema = FeatureSchema::default_events();
        assert_eq!(schema.p(), 17);
        let decrease: Vec<&str> = schema
            .feature_names()
            .iter()
            .zip(schema.direction())
            .filter(|(_, d)| **d == Direction::Decrease)
            .map(|(n, _)| n.as_str())
            .collect();
        assert_eq!(
            decrease,
            vec!["pass_fail", "dribbles_fail", "offside", "tackle_fail", "foul"]
        );
    }

    #[test]
    fn schema_rejects_duplicates_and_target_collisions() {
        assert!(FeatureSchema::new(vec!["a".into(), "a".into()], "g", "eg").is_err());
        assert!(FeatureSchema::new(vec!["g".into()], "g", "eg").is_err());
        assert!(FeatureSchema::new(vec![], "g", "eg").is_err());
    }

    #[test]
    fn adjudicate_majority_and_median() {
        assert_eq!(adjudicate((3, 3, 5)), 3);
        assert_eq!(adjudicate((2, 4, 7)), 4);
        assert_eq!(adjudicate((5, 5, 5)), 5);
    }

    proptest! {
        #[test]
        fn adjudicate_is_permutation_invariant(a in 0u32..50, b in 0u32..50, c in 0u32..50) {
            let base = adjudicate((a, b, c));
            prop_assert_eq!(base, adjudicate((a, c, b)));
            prop_assert_eq!(base, adjudicate((b, a, c)));
            prop_assert_eq!(base, adjudicate((b, c, a)));
            prop_assert_eq!(base, adjudicate((c, a, b)));
            prop_assert_eq!(base, adjudicate((c, b, a)));
        }

        #[test]
        fn split_is_disjoint_and_exhaustive(n in 3usize..60, seed in 0u64..512) {
            let records: Vec<MatchRecord> =
                (0..n).map(|i| record(&format!("m{i:03}"), 1, 0)).collect();
            let part = split_matches(&records, (8, 1, 1), seed).unwrap();
            let all: BTreeSet<_> = part.train.iter()
                .chain(&part.val)
                .chain(&part.test)
                .cloned()
                .collect();
            prop_assert_eq!(all.len(), n);
            prop_assert_eq!(part.train.len() + part.val.len() + part.test.len(), n);
        }
    }

    #[test]
    fn split_exact_ratio_on_ten() {
        let records: Vec<MatchRecord> = (0..10).map(|i| record(&format!("m{i}"), 0, 0)).collect();
        let part = split_matches(&records, (8, 1, 1), 0).unwrap();
        assert_eq!((part.train.len(), part.val.len(), part.test.len()), (8, 1, 1));
    }

    #[test]
    fn split_seventeen_follows_largest_remainder() {
        // 17 * (8,1,1)/10 = (13.6, 1.7, 1.7): floors (13,1,1), remainders
        // (.6,.7,.7) hand out the two leftovers to val and test -> 13/2/2.
        let records: Vec<MatchRecord> = (0..17).map(|i| record(&format!("m{i:02}"), 0, 0)).collect();
        let part = split_matches(&records, (8, 1, 1), 3).unwrap();
        assert_eq!((part.train.len(), part.val.len(), part.test.len()), (13, 2, 2));
        // determinism across repeated calls
        let again = split_matches(&records, (8, 1, 1), 3).unwrap();
        assert_eq!(part, again);
    }

    #[test]
    fn split_ignores_input_order() {
        let mut records: Vec<MatchRecord> =
            (0..23).map(|i| record(&format!("m{i:02}"), 0, 0)).collect();
        let forward = split_matches(&records, (8, 1, 1), 11).unwrap();
        records.reverse();
        let backward = split_matches(&records, (8, 1, 1), 11).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn split_insufficient_matches_errors() {
        let records: Vec<MatchRecord> = (0..2).map(|i| record(&format!("m{i}"), 0, 0)).collect();
        assert!(split_matches(&records, (8, 1, 1), 0).is_err());
    }

    #[test]
    fn largest_remainder_tie_goes_to_train() {
        // 5 over (1,1,1): floors (1,1,1), remainders equal -> first parts win.
        assert_eq!(largest_remainder(5, [1, 1, 1]), [2, 2, 1]);
    }

    #[test]
    fn expansion_mirrors_goal_difference() {
        let ds = expand_perspectives(
            &[record("m0", 3, 1)],
            &FeatureSchema::default_events(),
            "league_a",
            DomainKind::Elite,
            DataRole::Full,
        )
        .unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.samples[0].y, 2);
        assert_eq!(ds.samples[1].y, -2);
        assert_eq!(ds.samples[0].perspective, Perspective::Home);
    }

    #[test]
    fn expansion_doubles_counts() {
        let records: Vec<MatchRecord> = (0..380).map(|i| record(&format!("m{i:03}"), 1, 1)).collect();
        let ds = expand_perspectives(
            &records,
            &FeatureSchema::default_events(),
            "league_a",
            DomainKind::Elite,
            DataRole::Full,
        )
        .unwrap();
        assert_eq!(ds.len(), 760);
    }

    #[test]
    fn partition_expansion_is_match_disjoint() {
        let records: Vec<MatchRecord> = (0..25).map(|i| record(&format!("m{i:02}"), 2, 1)).collect();
        let part = split_matches(&records, (8, 1, 1), 5).unwrap();
        let split = expand_partition(
            &records,
            &part,
            &FeatureSchema::default_events(),
            "league_a",
            DomainKind::Elite,
        )
        .unwrap();
        let train_ids: BTreeSet<_> = split.train.samples.iter().map(|s| &s.match_id).collect();
        let val_ids: BTreeSet<_> = split.val.samples.iter().map(|s| &s.match_id).collect();
        let test_ids: BTreeSet<_> = split.test.samples.iter().map(|s| &s.match_id).collect();
        assert!(train_ids.is_disjoint(&val_ids));
        assert!(train_ids.is_disjoint(&test_ids));
        assert!(val_ids.is_disjoint(&test_ids));
        assert_eq!(
            split.train.len() + split.val.len() + split.test.len(),
            records.len() * 2
        );
        assert_eq!(split.train.role, DataRole::Train);
    }

    #[test]
    fn stats_single_sample_zero_sigma() {
        let ds = expand_perspectives(
            &[record("m0", 1, 0)],
            &FeatureSchema::default_events(),
            "league_a",
            DomainKind::Elite,
            DataRole::Train,
        )
        .unwrap();
        let one = DomainDataset {
            samples: vec![ds.samples[0].clone()],
            ..ds
        };
        let stats = compute_stats(&one).unwrap();
        assert!(stats.sigma.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stats_two_point_arithmetic() {
        let schema = FeatureSchema::new(vec!["f".into()], "g", "eg").unwrap();
        let mk = |v: u32| Sample {
            x: vec![v],
            y: 0,
            match_id: "m".into(),
            perspective: Perspective::Home,
            domain: "d".into(),
        };
        let ds = DomainDataset {
            schema,
            samples: vec![mk(0), mk(2)],
            domain: "d".into(),
            kind: DomainKind::Elite,
            role: DataRole::Train,
        };
        let stats = compute_stats(&ds).unwrap();
        assert_eq!(stats.mu[0], 1.0);
        assert_eq!(stats.sigma[0], 1.0);
        assert!(stats.is_elite_train());
    }

    #[test]
    fn stats_empty_errors() {
        let ds = DomainDataset {
            schema: FeatureSchema::default_events(),
            samples: vec![],
            domain: "d".into(),
            kind: DomainKind::Elite,
            role: DataRole::Train,
        };
        assert!(compute_stats(&ds).is_err());
    }
}
