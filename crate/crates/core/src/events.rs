//! Event-table ingestion, waking-window filtering, and person-specific
//! likelihood bucketing.
//!
//! Bucketing is the debiasing step: each participant's events are ranked by
//! likelihood (average rank for ties), ranks are scaled to percentiles in
//! (0, 100], and percentiles fall into twenty left-open 5-point buckets
//! `(5j, 5(j+1)]`. A percentile exactly on a multiple of 5 belongs to the
//! lower bucket. Sampling (uniform bucket, uniform event within bucket)
//! then draws every likelihood stratum with equal probability regardless of
//! how lopsided the original prompt policy was.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::StressorCategory;

/// Number of percentile buckets per participant.
pub const BUCKET_COUNT: usize = 20;

/// Width of one bucket in percentile points.
pub const BUCKET_WIDTH_PCT: f64 = 100.0 / BUCKET_COUNT as f64;

/// Default waking sampling window, minutes since midnight: 08:00..20:00.
pub const DEFAULT_WINDOW: (f64, f64) = (480.0, 1200.0);

/// Upper bound (exclusive) for a time of day in minutes.
pub const MINUTES_PER_DAY: f64 = 1440.0;

/// Exact column set of the event-table contract.
pub const EVENT_COLUMNS: [&str; 5] =
    ["participant_id", "time_of_day_min", "likelihood", "responded", "category"];

/// Opaque participant identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParticipantId(pub String);

impl ParticipantId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ParticipantId {
    fn from(s: &str) -> Self {
        ParticipantId(s.to_string())
    }
}

/// One likelihood-rated event, optionally carrying a reported stressor.
#[derive(Debug, Clone, PartialEq)]
pub struct RatedEvent {
    pub participant_id: ParticipantId,
    /// Minutes since midnight, in [0, 1440).
    pub time_of_day_min: f64,
    /// Likelihood score in arbitrary monotone units; any finite value.
    pub likelihood: f64,
    /// Whether the prompt for this event was answered.
    pub responded: bool,
    /// Stressor category reported in the response; requires `responded`.
    pub category: Option<StressorCategory>,
}

impl RatedEvent {
    pub fn has_stressor(&self) -> bool {
        self.category.is_some()
    }
}

/// What went wrong with one rejected row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowErrorKind {
    Malformed,
    NonFinite,
    TimeOutOfRange,
    UnknownCategory,
    CategoryWithoutResponse,
    Duplicate,
}

/// Row-level rejection diagnostic. `line` is the 1-based CSV line (header is
/// line 1) or the 1-based array index for the structured-object variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDiagnostic {
    pub line: u64,
    pub kind: RowErrorKind,
    pub message: String,
}

impl fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.line, self.message)
    }
}

/// All parseable rows plus diagnostics for every rejected row.
#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub events: Vec<RatedEvent>,
    pub rejected: Vec<RowDiagnostic>,
}

impl IngestOutcome {
    /// Fail unless every row was accepted.
    pub fn require_clean(self) -> Result<Vec<RatedEvent>, EventsError> {
        if let Some(first) = self.rejected.first() {
            return Err(EventsError::RejectedRows {
                count: self.rejected.len(),
                first: first.to_string(),
            });
        }
        Ok(self.events)
    }
}

#[derive(Debug, Error)]
pub enum EventsError {
    #[error("failed to read event table: {0}")]
    Io(#[from] io::Error),
    #[error("malformed delimited input: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed structured input: {0}")]
    Json(#[from] serde_json::Error),
    #[error("event table header: {0}")]
    Header(String),
    #[error("{count} rows rejected during ingest; first: {first}")]
    RejectedRows { count: usize, first: String },
    #[error("invalid window [{start}, {end}): need 0 <= start < end <= {MINUTES_PER_DAY}")]
    InvalidWindow { start: f64, end: f64 },
    #[error("participant {participant_id} has no events to bucket")]
    NoEvents { participant_id: ParticipantId },
    #[error("participant {participant_id} leaves buckets {empty:?} empty")]
    EmptyBuckets { participant_id: ParticipantId, empty: Vec<usize> },
}

/// Un-validated row shared by both input encodings.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    participant_id: String,
    time_of_day_min: f64,
    likelihood: f64,
    responded: bool,
    #[serde(default)]
    category: Option<String>,
}

type SeenKey = (String, u64);

fn validate_record(
    raw: RawRecord,
    line: u64,
    seen: &mut HashSet<SeenKey>,
) -> Result<RatedEvent, RowDiagnostic> {
    let reject = |kind, message: String| RowDiagnostic { line, kind, message };
    if raw.participant_id.is_empty() {
        return Err(reject(RowErrorKind::Malformed, "participant_id is empty".into()));
    }
    if !raw.time_of_day_min.is_finite() || !raw.likelihood.is_finite() {
        return Err(reject(
            RowErrorKind::NonFinite,
            format!(
                "time_of_day_min = {} and likelihood = {} must be finite",
                raw.time_of_day_min, raw.likelihood
            ),
        ));
    }
    if !(0.0..MINUTES_PER_DAY).contains(&raw.time_of_day_min) {
        return Err(reject(
            RowErrorKind::TimeOutOfRange,
            format!("time_of_day_min = {} outside [0, {MINUTES_PER_DAY})", raw.time_of_day_min),
        ));
    }
    let category = match raw.category.as_deref() {
        None | Some("") => None,
        Some(label) => match StressorCategory::from_label(label) {
            Some(cat) => Some(cat),
            None => {
                return Err(reject(
                    RowErrorKind::UnknownCategory,
                    format!("unknown stressor category label {label:?}"),
                ))
            }
        },
    };
    if category.is_some() && !raw.responded {
        return Err(reject(
            RowErrorKind::CategoryWithoutResponse,
            "category present but responded = false".into(),
        ));
    }
    if !seen.insert((raw.participant_id.clone(), raw.time_of_day_min.to_bits())) {
        return Err(reject(
            RowErrorKind::Duplicate,
            format!(
                "duplicate event for participant {:?} at time_of_day_min = {}",
                raw.participant_id, raw.time_of_day_min
            ),
        ));
    }
    Ok(RatedEvent {
        participant_id: ParticipantId(raw.participant_id),
        time_of_day_min: raw.time_of_day_min,
        likelihood: raw.likelihood,
        responded: raw.responded,
        category,
    })
}

/// Ingest the delimited form of the event table.
///
/// The header must contain exactly the five contract columns (any order).
/// Every parseable row is returned; rows violating an invariant are rejected
/// with a line-numbered diagnostic instead of aborting the ingest.
pub fn ingest_csv<R: io::Read>(reader: R) -> Result<IngestOutcome, EventsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut col = [usize::MAX; 5];
    for (pos, name) in headers.iter().enumerate() {
        match EVENT_COLUMNS.iter().position(|c| *c == name) {
            Some(slot) if col[slot] == usize::MAX => col[slot] = pos,
            Some(_) => return Err(EventsError::Header(format!("duplicate column {name:?}"))),
            None => return Err(EventsError::Header(format!("unexpected column {name:?}"))),
        }
    }
    if let Some(missing) = EVENT_COLUMNS.iter().zip(col).find(|(_, p)| *p == usize::MAX) {
        return Err(EventsError::Header(format!("missing column {:?}", missing.0)));
    }

    let mut outcome = IngestOutcome::default();
    let mut seen: HashSet<SeenKey> = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |slot: usize| record.get(col[slot]).unwrap_or("");
        let malformed = |message: String| RowDiagnostic {
            line,
            kind: RowErrorKind::Malformed,
            message,
        };
        if record.len() != EVENT_COLUMNS.len() {
            outcome.rejected.push(malformed(format!(
                "expected {} fields, got {}",
                EVENT_COLUMNS.len(),
                record.len()
            )));
            continue;
        }
        let time_of_day_min = match field(1).parse::<f64>() {
            Ok(v) => v,
            Err(_) => {
                outcome.rejected.push(malformed(format!(
                    "time_of_day_min {:?} is not a number",
                    field(1)
                )));
                continue;
            }
        };
        let likelihood = match field(2).parse::<f64>() {
            Ok(v) => v,
            Err(_) => {
                outcome
                    .rejected
                    .push(malformed(format!("likelihood {:?} is not a number", field(2))));
                continue;
            }
        };
        let responded = match field(3) {
            "true" => true,
            "false" => false,
            other => {
                outcome.rejected.push(malformed(format!(
                    "responded must be \"true\" or \"false\", got {other:?}"
                )));
                continue;
            }
        };
        let raw = RawRecord {
            participant_id: field(0).to_string(),
            time_of_day_min,
            likelihood,
            responded,
            category: Some(field(4).to_string()),
        };
        match validate_record(raw, line, &mut seen) {
            Ok(event) => outcome.events.push(event),
            Err(diag) => outcome.rejected.push(diag),
        }
    }
    Ok(outcome)
}

/// Ingest the structured-object variant: an array of objects with exactly
/// the contract field names. Row diagnostics use the 1-based array index.
pub fn ingest_json<R: io::Read>(reader: R) -> Result<IngestOutcome, EventsError> {
    let raws: Vec<RawRecord> = serde_json::from_reader(reader)?;
    let mut outcome = IngestOutcome::default();
    let mut seen: HashSet<SeenKey> = HashSet::new();
    for (idx, raw) in raws.into_iter().enumerate() {
        match validate_record(raw, idx as u64 + 1, &mut seen) {
            Ok(event) => outcome.events.push(event),
            Err(diag) => outcome.rejected.push(diag),
        }
    }
    Ok(outcome)
}

/// Write events in the delimited contract form; output re-ingests losslessly.
pub fn write_events_csv<W: io::Write>(writer: W, events: &[RatedEvent]) -> Result<(), EventsError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(EVENT_COLUMNS)?;
    for event in events {
        wtr.write_record([
            event.participant_id.as_str(),
            &event.time_of_day_min.to_string(),
            &event.likelihood.to_string(),
            if event.responded { "true" } else { "false" },
            event.category.map(|c| c.label()).unwrap_or(""),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Keep events with `start_min <= t < end_min`.
pub fn filter_window(
    events: &[RatedEvent],
    start_min: f64,
    end_min: f64,
) -> Result<Vec<RatedEvent>, EventsError> {
    let valid = start_min.is_finite()
        && end_min.is_finite()
        && start_min >= 0.0
        && start_min < end_min
        && end_min <= MINUTES_PER_DAY;
    if !valid {
        return Err(EventsError::InvalidWindow { start: start_min, end: end_min });
    }
    Ok(events
        .iter()
        .filter(|e| e.time_of_day_min >= start_min && e.time_of_day_min < end_min)
        .cloned()
        .collect())
}

/// An event with its person-specific percentile and bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEvent {
    pub event: RatedEvent,
    /// Average-rank percentile in (0, 100].
    pub percentile: f64,
    /// Bucket index in 0..20.
    pub bucket: usize,
}

/// One participant's events split into twenty non-empty percentile buckets.
///
/// Constructed only by [`bucketize`], which guarantees: every event lands in
/// exactly one bucket, ties share a bucket, bucket membership is monotone in
/// likelihood, and every bucket is non-empty.
#[derive(Debug, Clone)]
pub struct ParticipantBuckets {
    participant_id: ParticipantId,
    buckets: Vec<Vec<RankedEvent>>,
    event_count: usize,
}

impl ParticipantBuckets {
    pub fn participant_id(&self) -> &ParticipantId {
        &self.participant_id
    }

    pub fn bucket(&self, idx: usize) -> &[RankedEvent] {
        &self.buckets[idx]
    }

    pub fn buckets(&self) -> &[Vec<RankedEvent>] {
        &self.buckets
    }

    pub fn event_count(&self) -> usize {
        self.event_count
    }

    /// Draw (uniform bucket, uniform event within bucket); the pair indexes
    /// into [`Self::bucket`]. This is the debiased sampling primitive.
    pub fn sample_slot<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let bucket = rng.gen_range(0..BUCKET_COUNT);
        let event = rng.gen_range(0..self.buckets[bucket].len());
        (bucket, event)
    }
}

/// Percentile of a tie group covering 1-based ranks `lo..=hi` out of `n`:
/// the average rank scaled to (0, 100].
pub(crate) fn group_percentile(lo: usize, hi: usize, n: usize) -> f64 {
    50.0 * (lo + hi) as f64 / n as f64
}

/// Bucket for that percentile under left-open intervals `(5j, 5(j+1)]`,
/// computed in integer arithmetic so "exactly on a multiple of 5" cannot be
/// lost to rounding: percentile/5 = 10*(lo+hi)/n.
pub(crate) fn group_bucket(lo: usize, hi: usize, n: usize) -> usize {
    let num = 10 * (lo + hi) as u64;
    let den = n as u64;
    let q = num / den;
    let exact = num % den == 0;
    let bucket = if exact { q - 1 } else { q };
    (bucket as usize).min(BUCKET_COUNT - 1)
}

/// Rank one participant's events into twenty percentile buckets.
///
/// Events in the slice belonging to other participants are ignored. Errors
/// if the participant has no events or if any bucket would be empty (for
/// example when heavy ties collapse many ranks onto one percentile); the
/// error lists the empty bucket indices so the caller can decide exclusion.
pub fn bucketize(
    events: &[RatedEvent],
    participant_id: &ParticipantId,
) -> Result<ParticipantBuckets, EventsError> {
    let mine: Vec<&RatedEvent> =
        events.iter().filter(|e| &e.participant_id == participant_id).collect();
    if mine.is_empty() {
        return Err(EventsError::NoEvents { participant_id: participant_id.clone() });
    }
    let n = mine.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        mine[a].likelihood.partial_cmp(&mine[b].likelihood).expect("finite likelihoods")
    });

    let mut buckets: Vec<Vec<RankedEvent>> = vec![Vec::new(); BUCKET_COUNT];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && mine[order[end]].likelihood == mine[order[start]].likelihood {
            end += 1;
        }
        // 1-based ranks of this tie group are start+1 ..= end.
        let percentile = group_percentile(start + 1, end, n);
        let bucket = group_bucket(start + 1, end, n);
        for &idx in &order[start..end] {
            buckets[bucket].push(RankedEvent { event: mine[idx].clone(), percentile, bucket });
        }
        start = end;
    }

    let empty: Vec<usize> =
        (0..BUCKET_COUNT).filter(|&j| buckets[j].is_empty()).collect();
    if !empty.is_empty() {
        return Err(EventsError::EmptyBuckets { participant_id: participant_id.clone(), empty });
    }
    Ok(ParticipantBuckets { participant_id: participant_id.clone(), buckets, event_count: n })
}

/// Group events by participant, preserving input order within each group.
pub fn group_by_participant(events: &[RatedEvent]) -> BTreeMap<ParticipantId, Vec<RatedEvent>> {
    let mut groups: BTreeMap<ParticipantId, Vec<RatedEvent>> = BTreeMap::new();
    for event in events {
        groups.entry(event.participant_id.clone()).or_default().push(event.clone());
    }
    groups
}

/// A participant excluded from the cohort and why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortExclusion {
    pub participant_id: ParticipantId,
    pub empty_buckets: Vec<usize>,
}

/// Eligible participants (all twenty buckets non-empty) plus exclusions.
#[derive(Debug)]
pub struct CohortSelection {
    pub cohort: Vec<ParticipantBuckets>,
    pub excluded: Vec<CohortExclusion>,
}

impl CohortSelection {
    /// One-line exclusion summary for logs and manifests.
    pub fn summary(&self) -> String {
        let total = self.cohort.len() + self.excluded.len();
        if self.excluded.is_empty() {
            format!("retained all {total} participants")
        } else {
            let names: Vec<String> = self
                .excluded
                .iter()
                .map(|e| format!("{} (empty buckets {:?})", e.participant_id, e.empty_buckets))
                .collect();
            format!(
                "retained {} of {total} participants; excluded {}",
                self.cohort.len(),
                names.join(", ")
            )
        }
    }
}

/// Bucketize every participant in the (already window-filtered) event list
/// and keep those whose twenty buckets are all non-empty.
pub fn eligible_cohort(events: &[RatedEvent]) -> CohortSelection {
    let mut cohort = Vec::new();
    let mut excluded = Vec::new();
    for (participant_id, group) in group_by_participant(events) {
        match bucketize(&group, &participant_id) {
            Ok(buckets) => cohort.push(buckets),
            Err(EventsError::EmptyBuckets { participant_id, empty }) => {
                excluded.push(CohortExclusion { participant_id, empty_buckets: empty });
            }
            Err(EventsError::NoEvents { participant_id }) => {
                excluded.push(CohortExclusion {
                    participant_id,
                    empty_buckets: (0..BUCKET_COUNT).collect(),
                });
            }
            Err(other) => unreachable!("bucketize returns only bucket errors: {other}"),
        }
    }
    CohortSelection { cohort, excluded }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn event(pid: &str, time: f64, likelihood: f64) -> RatedEvent {
        RatedEvent {
            participant_id: pid.into(),
            time_of_day_min: time,
            likelihood,
            responded: true,
            category: None,
        }
    }

    const WELL_FORMED: &str = "\
participant_id,time_of_day_min,likelihood,responded,category
p1,480,0.2,true,Work
p1,540,1.4,false,
p2,600,0.7,true,\"Health, Fatigue, or Pain\"
";

    #[test]
    fn ingests_well_formed_rows() {
        let outcome = ingest_csv(WELL_FORMED.as_bytes()).unwrap();
        assert!(outcome.rejected.is_empty());
        assert_eq!(outcome.events.len(), 3);
        assert_eq!(outcome.events[0].category, Some(StressorCategory::Work));
        assert!(!outcome.events[1].responded);
        assert_eq!(outcome.events[2].category, Some(StressorCategory::HealthFatiguePain));
    }

    #[test]
    fn rejects_category_without_response() {
        let input = "\
participant_id,time_of_day_min,likelihood,responded,category
p1,480,0.2,false,Work
";
        let outcome = ingest_csv(input.as_bytes()).unwrap();
        assert!(outcome.events.is_empty());
        assert_eq!(outcome.rejected.len(), 1);
        assert_eq!(outcome.rejected[0].kind, RowErrorKind::CategoryWithoutResponse);
        assert_eq!(outcome.rejected[0].line, 2);
        assert!(outcome.require_clean().is_err());
    }

    #[test]
    fn rejects_unknown_category_with_line_number() {
        let input = "\
participant_id,time_of_day_min,likelihood,responded,category
p1,480,0.2,true,Work
p1,500,0.4,true,Commute
";
        let outcome = ingest_csv(input.as_bytes()).unwrap();
        assert_eq!(outcome.events.len(), 1);
        let diag = &outcome.rejected[0];
        assert_eq!(diag.kind, RowErrorKind::UnknownCategory);
        assert_eq!(diag.line, 3);
        assert!(diag.message.contains("Commute"));
    }

    #[test]
    fn rejects_duplicates_and_bad_times() {
        let input = "\
participant_id,time_of_day_min,likelihood,responded,category
p1,480,0.2,true,
p1,480,0.9,true,
p1,1440,0.5,true,
p1,oops,0.5,true,
";
        let outcome = ingest_csv(input.as_bytes()).unwrap();
        assert_eq!(outcome.events.len(), 1);
        let kinds: Vec<RowErrorKind> = outcome.rejected.iter().map(|d| d.kind).collect();
        assert_eq!(
            kinds,
            vec![RowErrorKind::Duplicate, RowErrorKind::TimeOutOfRange, RowErrorKind::Malformed]
        );
    }

    #[test]
    fn rejects_unexpected_or_missing_columns() {
        let extra = "participant_id,time_of_day_min,likelihood,responded,category,mood\n";
        assert!(matches!(ingest_csv(extra.as_bytes()), Err(EventsError::Header(_))));
        let missing = "participant_id,time_of_day_min,likelihood,responded\n";
        assert!(matches!(ingest_csv(missing.as_bytes()), Err(EventsError::Header(_))));
    }

    #[test]
    fn ingests_structured_variant() {
        let input = r#"[
            {"participant_id": "p1", "time_of_day_min": 480, "likelihood": 0.2, "responded": true, "category": "Work"},
            {"participant_id": "p1", "time_of_day_min": 540, "likelihood": 0.4, "responded": false, "category": null},
            {"participant_id": "p1", "time_of_day_min": 600, "likelihood": 0.6, "responded": false, "category": "Chores"}
        ]"#;
        let outcome = ingest_json(input.as_bytes()).unwrap();
        assert_eq!(outcome.events.len(), 2);
        assert_eq!(outcome.rejected.len(), 1);
        assert_eq!(outcome.rejected[0].line, 3);
        assert_eq!(outcome.rejected[0].kind, RowErrorKind::CategoryWithoutResponse);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let original = ingest_csv(WELL_FORMED.as_bytes()).unwrap().require_clean().unwrap();
        let mut buf = Vec::new();
        write_events_csv(&mut buf, &original).unwrap();
        let reread = ingest_csv(buf.as_slice()).unwrap().require_clean().unwrap();
        assert_eq!(original, reread);
    }

    #[test]
    fn window_keeps_left_edge_drops_right_edge() {
        let events = vec![
            event("p1", 479.9, 0.1),
            event("p1", 480.0, 0.2),
            event("p1", 1199.9, 0.3),
            event("p1", 1200.0, 0.4),
        ];
        let kept = filter_window(&events, DEFAULT_WINDOW.0, DEFAULT_WINDOW.1).unwrap();
        let times: Vec<f64> = kept.iter().map(|e| e.time_of_day_min).collect();
        assert_eq!(times, vec![480.0, 1199.9]);
    }

    #[test]
    fn full_day_window_is_identity() {
        let events = vec![event("p1", 0.0, 0.1), event("p1", 1439.9, 0.2)];
        let kept = filter_window(&events, 0.0, MINUTES_PER_DAY).unwrap();
        assert_eq!(kept, events);
    }

    #[test]
    fn inverted_or_out_of_range_window_errors() {
        assert!(matches!(
            filter_window(&[], 1200.0, 480.0),
            Err(EventsError::InvalidWindow { .. })
        ));
        assert!(matches!(
            filter_window(&[], 0.0, 1441.0),
            Err(EventsError::InvalidWindow { .. })
        ));
        assert!(matches!(
            filter_window(&[], -1.0, 480.0),
            Err(EventsError::InvalidWindow { .. })
        ));
    }

    #[test]
    fn twenty_distinct_likelihoods_fill_one_per_bucket() {
        let pid: ParticipantId = "p1".into();
        let events: Vec<RatedEvent> =
            (0..20).map(|i| event("p1", 480.0 + i as f64, i as f64)).collect();
        let buckets = bucketize(&events, &pid).unwrap();
        for j in 0..BUCKET_COUNT {
            assert_eq!(buckets.bucket(j).len(), 1, "bucket {j}");
            // Rank i+1 of 20 puts percentile 5(i+1), an exact multiple of 5,
            // into the lower bucket i.
            let ranked = &buckets.bucket(j)[0];
            assert_eq!(ranked.event.likelihood, j as f64);
            assert!((ranked.percentile - 5.0 * (j + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn strictly_greatest_event_lands_in_top_bucket() {
        let pid: ParticipantId = "p1".into();
        let distinct: Vec<RatedEvent> =
            (0..40).map(|i| event("p1", 480.0 + i as f64, i as f64)).collect();
        let buckets = bucketize(&distinct, &pid).unwrap();
        let top = buckets.bucket(BUCKET_COUNT - 1);
        assert!(top.iter().any(|r| r.event.likelihood == 39.0));
        assert!(top.iter().all(|r| r.percentile > 95.0));
    }

    #[test]
    fn identical_likelihoods_leave_buckets_empty() {
        let pid: ParticipantId = "p1".into();
        let events: Vec<RatedEvent> =
            (0..40).map(|i| event("p1", 480.0 + i as f64, 2.5)).collect();
        match bucketize(&events, &pid).unwrap_err() {
            EventsError::EmptyBuckets { participant_id, empty } => {
                assert_eq!(participant_id, pid);
                assert_eq!(empty.len(), BUCKET_COUNT - 1);
                // All mass collapses to the average rank's bucket.
                assert!(!empty.contains(&10));
            }
            other => panic!("expected EmptyBuckets, got {other:?}"),
        }
    }

    #[test]
    fn no_events_is_an_error() {
        let pid: ParticipantId = "p1".into();
        assert!(matches!(bucketize(&[], &pid), Err(EventsError::NoEvents { .. })));
    }

    /// Partition property on random inputs: every event lands in exactly one
    /// bucket, the bucket matches its percentile under left-open intervals,
    /// ties share buckets, and bucket index is monotone in likelihood.
    #[test]
    fn random_inputs_partition_correctly() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pid: ParticipantId = "p1".into();
        for trial in 0..40 {
            let n = rng.gen_range(60..400);
            let events: Vec<RatedEvent> = (0..n)
                .map(|i| {
                    // Coarse grid of likelihood values forces plenty of ties.
                    event("p1", i as f64 * 0.01, rng.gen_range(0..200) as f64 * 0.5)
                })
                .collect();
            let Ok(buckets) = bucketize(&events, &pid) else { continue };
            let mut total = 0;
            let mut last_max = f64::NEG_INFINITY;
            for j in 0..BUCKET_COUNT {
                let lo = BUCKET_WIDTH_PCT * j as f64;
                let hi = BUCKET_WIDTH_PCT * (j + 1) as f64;
                for ranked in buckets.bucket(j) {
                    total += 1;
                    assert!(
                        ranked.percentile > lo - 1e-9 && ranked.percentile <= hi + 1e-9,
                        "trial {trial}: percentile {} outside ({lo}, {hi}]",
                        ranked.percentile
                    );
                    assert!(
                        ranked.event.likelihood >= last_max,
                        "trial {trial}: bucket order violates likelihood order"
                    );
                }
                if let Some(max_here) =
                    buckets.bucket(j).iter().map(|r| r.event.likelihood).reduce(f64::max)
                {
                    last_max = last_max.max(max_here);
                }
                // Ties share a bucket: same likelihood never spans buckets.
                for other in (j + 1)..BUCKET_COUNT {
                    for a in buckets.bucket(j) {
                        for b in buckets.bucket(other) {
                            assert_ne!(
                                a.event.likelihood, b.event.likelihood,
                                "trial {trial}: tie split across buckets {j} and {other}"
                            );
                        }
                    }
                }
            }
            assert_eq!(total, n, "trial {trial}: events lost or duplicated");
        }
    }

    #[test]
    fn eligible_cohort_excludes_incomplete_participants() {
        let mut events: Vec<RatedEvent> =
            (0..40).map(|i| event("full", 480.0 + i as f64, i as f64)).collect();
        events.extend((0..40).map(|i| event("tied", 480.0 + i as f64, 1.0)));
        let selection = eligible_cohort(&events);
        assert_eq!(selection.cohort.len(), 1);
        assert_eq!(selection.cohort[0].participant_id().as_str(), "full");
        assert_eq!(selection.excluded.len(), 1);
        assert_eq!(selection.excluded[0].participant_id.as_str(), "tied");
        let summary = selection.summary();
        assert!(summary.contains("retained 1 of 2"), "summary: {summary}");
        assert!(summary.contains("tied"), "summary: {summary}");
    }

    #[test]
    fn sample_slot_reaches_every_bucket() {
        let pid: ParticipantId = "p1".into();
        let events: Vec<RatedEvent> =
            (0..60).map(|i| event("p1", 480.0 + i as f64, i as f64)).collect();
        let buckets = bucketize(&events, &pid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = [0usize; BUCKET_COUNT];
        for _ in 0..2000 {
            let (bucket, idx) = buckets.sample_slot(&mut rng);
            assert!(idx < buckets.bucket(bucket).len());
            hits[bucket] += 1;
        }
        assert!(hits.iter().all(|&h| h > 0));
    }
}
