//! Fatigue-normalized Monte Carlo simulation of prompt delivery policies.
//!
//! For each target response frequency `k` the debiased policy solves the
//! prompt-budget identity for the delivery fraction rho, replays
//! `days_per_participant` synthetic days in which `events_per_day` candidate
//! events are drawn per day by (uniform bucket, uniform event within
//! bucket), delivers the candidates whose person-specific percentile clears
//! the `100*(1-rho)` threshold, answers each delivered prompt with
//! probability `alpha`, and converts the measured response efficiency into
//! stressors per day with the fatigue scale.
//!
//! The baseline policy replays the same candidate stream but selects prompts
//! with the historical stratified quota (1 at or below the 25th percentile,
//! 2 in (25, 75], 3 in (75, 95], and every candidate above the 95th); its
//! response frequency is implied by the quota rather than swept.
//!
//! Every (participant, day, k) cell owns a seed derived from the master
//! seed, so output is bit-identical regardless of worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::budget::{self, BudgetError, BudgetInputs};
use crate::events::{ParticipantBuckets, ParticipantId, BUCKET_COUNT};
use crate::seeding::stream_seed;
use crate::taxonomy::CATEGORY_COUNT;

/// Linear engagement trend used to normalize simulated efficiency for
/// prompt fatigue. The scale at `k` is
/// `(intercept + slope*k) / (intercept + slope*k_ref)`, exactly 1 at the
/// reference frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatigueModel {
    /// Engagement-trend intercept.
    pub intercept: f64,
    /// Engagement change per unit of response frequency (negative in the
    /// published fit: more prompts, less engagement).
    pub slope: f64,
    /// Response frequency at which the scale is exactly 1.
    pub k_ref: f64,
}

impl Default for FatigueModel {
    /// Published fit: engagement = 0.353 - 0.007*k, referenced to the
    /// observed mean of 3.89 responses per day.
    fn default() -> Self {
        FatigueModel { intercept: 0.353, slope: -0.007, k_ref: 3.89 }
    }
}

impl FatigueModel {
    /// Largest response frequency with a positive engagement term; the model
    /// is undefined at and beyond this point when the slope is negative.
    pub fn domain_limit(&self) -> f64 {
        if self.slope < 0.0 {
            -self.intercept / self.slope
        } else {
            f64::INFINITY
        }
    }
}

/// Fatigue normalization factor at `k`; exactly 1 at `k_ref`. Errors when
/// the engagement term `intercept + slope*k` is non-positive at `k` or at
/// the reference point.
pub fn fatigue_scale(k: f64, model: &FatigueModel) -> Result<f64, SimulationError> {
    if !k.is_finite() || k < 0.0 {
        return Err(SimulationError::InvalidConfig(format!("k = {k} must be finite and >= 0")));
    }
    let at_k = model.intercept + model.slope * k;
    let at_ref = model.intercept + model.slope * model.k_ref;
    if at_ref <= 0.0 {
        return Err(SimulationError::FatigueOutOfDomain {
            k: model.k_ref,
            engagement: at_ref,
            limit: model.domain_limit(),
        });
    }
    if at_k <= 0.0 {
        return Err(SimulationError::FatigueOutOfDomain {
            k,
            engagement: at_k,
            limit: model.domain_limit(),
        });
    }
    Ok(at_k / at_ref)
}

/// Which daily prompt-selection rule the simulator replays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingPolicy {
    /// Uniform-bucket candidate stream with top-rho percentile threshold.
    Debiased,
    /// Same candidate stream, historical stratified quota selection.
    MoodsBaseline,
}

impl SamplingPolicy {
    pub fn name(self) -> &'static str {
        match self {
            SamplingPolicy::Debiased => "debiased",
            SamplingPolicy::MoodsBaseline => "moods-baseline",
        }
    }
}

impl fmt::Display for SamplingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "debiased" => Ok(SamplingPolicy::Debiased),
            "moods-baseline" => Ok(SamplingPolicy::MoodsBaseline),
            other => Err(format!("unknown policy {other:?}; expected debiased or moods-baseline")),
        }
    }
}

/// Default master seed for simulation runs.
pub const DEFAULT_SEED: u64 = 42;

/// Guard added to the delivery threshold so a percentile mathematically
/// equal to it resolves to non-delivery despite f64 rounding. Far below any
/// gap between distinct percentiles of realistic cohorts.
pub const DEFAULT_TIE_GUARD: f64 = 1e-9;

/// Everything that determines one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    /// Synthetic days replayed per participant.
    pub days_per_participant: usize,
    /// Candidate events drawn per day; must equal `round(eta * omega)`.
    pub events_per_day: usize,
    /// Response frequencies to sweep (debiased policy only).
    pub k_values: Vec<f64>,
    /// Waking hours per day.
    pub omega: f64,
    /// Prompts deliverable per waking hour.
    pub eta: f64,
    /// Probability a delivered prompt is answered.
    pub alpha: f64,
    /// Master seed; every cell seed derives from it.
    pub seed: u64,
    /// Daily prompt-selection rule.
    pub policy: SamplingPolicy,
    /// Fatigue normalization constants.
    pub fatigue: FatigueModel,
    /// Threshold tie guard; ties break toward non-delivery.
    pub tie_guard: f64,
}

impl Default for SimulationConfig {
    /// Published run shape: 12 waking hours, 2.5 prompts/hour (30
    /// candidates/day), full response, 1000 days. The k sweep covers every
    /// feasible integer frequency: the identity caps k at
    /// `alpha * eta * omega = 30` per day.
    fn default() -> Self {
        SimulationConfig {
            days_per_participant: 1000,
            events_per_day: 30,
            k_values: (1..=30).map(f64::from).collect(),
            omega: 12.0,
            eta: 2.5,
            alpha: 1.0,
            seed: DEFAULT_SEED,
            policy: SamplingPolicy::Debiased,
            fatigue: FatigueModel::default(),
            tie_guard: DEFAULT_TIE_GUARD,
        }
    }
}

impl SimulationConfig {
    /// Delivery fraction for one target frequency via the budget identity.
    pub fn rho_for(&self, k: f64) -> Result<f64, SimulationError> {
        let inputs = BudgetInputs {
            rho: None,
            eta: Some(self.eta),
            omega: Some(self.omega),
            k: Some(k),
            alpha: Some(self.alpha),
        };
        budget::solve(&inputs)
            .map(|b| b.rho)
            .map_err(|source| SimulationError::InfeasibleK { k, source })
    }

    /// Check structural invariants and the feasibility of every k.
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.days_per_participant == 0 {
            return Err(SimulationError::InvalidConfig("days_per_participant must be >= 1".into()));
        }
        let capacity = (self.eta * self.omega).round();
        if !capacity.is_finite() || capacity < 1.0 || self.events_per_day != capacity as usize {
            return Err(SimulationError::InvalidConfig(format!(
                "events_per_day = {} must equal round(eta * omega) = {capacity}",
                self.events_per_day
            )));
        }
        if !(self.tie_guard.is_finite() && (0.0..1.0).contains(&self.tie_guard)) {
            return Err(SimulationError::InvalidConfig(format!(
                "tie_guard = {} must be finite and in [0, 1)",
                self.tie_guard
            )));
        }
        if self.policy == SamplingPolicy::Debiased {
            if self.k_values.is_empty() {
                return Err(SimulationError::InvalidConfig("k_values must be non-empty".into()));
            }
            for &k in &self.k_values {
                self.rho_for(k)?;
                fatigue_scale(k, &self.fatigue)?;
            }
        } else {
            // Baseline still needs valid budget fields for the candidate
            // stream; alpha/eta/omega ranges are checked via a probe solve.
            self.rho_for(self.alpha * self.eta * self.omega * 0.5)?;
        }
        Ok(())
    }
}

/// Cohort-level efficiency measurements at one response frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    /// Target responses per day (implied by the quota under the baseline).
    pub k: f64,
    /// Fraction of answered prompts reporting any stressor.
    pub base_efficiency: f64,
    /// Fraction of answered prompts reporting each category; sums to
    /// `base_efficiency`.
    pub category_efficiency: [f64; CATEGORY_COUNT],
    /// `k * base_efficiency * fatigue_scale(k)`.
    pub stressors_per_day: f64,
    /// Per-category counterpart; sums to `stressors_per_day`.
    pub category_stressors_per_day: [f64; CATEGORY_COUNT],
    /// Mean prompts delivered per day.
    pub prompts_delivered_per_day: f64,
    /// Mean prompts answered per day.
    pub responses_per_day: f64,
    /// Fatigue scale applied at this k.
    pub fatigue_scale: f64,
}

/// One participant's curve across the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantSeries {
    pub participant_id: ParticipantId,
    pub points: Vec<EfficiencyPoint>,
}

/// Cohort-averaged points plus per-participant breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationOutput {
    pub points: Vec<EfficiencyPoint>,
    pub per_participant: Vec<ParticipantSeries>,
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("k = {k} is infeasible under the prompt budget: {source}")]
    InfeasibleK { k: f64, source: BudgetError },
    #[error(
        "fatigue model undefined at k = {k}: engagement term {engagement} <= 0 \
         (domain limit ~{limit:.4})"
    )]
    FatigueOutOfDomain { k: f64, engagement: f64, limit: f64 },
}

/// Flattened per-participant lookup tables for the hot sampling loop.
struct ParticipantTables {
    id: String,
    /// Prefix offsets into the flat arrays; bucket j spans
    /// `offsets[j]..offsets[j+1]`.
    offsets: [usize; BUCKET_COUNT + 1],
    bucket_lens: [usize; BUCKET_COUNT],
    percentile: Vec<f64>,
    /// Category index (0..12) of the stressor, if the event carries one.
    category: Vec<Option<u8>>,
}

impl ParticipantTables {
    fn build(buckets: &ParticipantBuckets) -> Self {
        let mut offsets = [0usize; BUCKET_COUNT + 1];
        let mut bucket_lens = [0usize; BUCKET_COUNT];
        let mut percentile = Vec::with_capacity(buckets.event_count());
        let mut category = Vec::with_capacity(buckets.event_count());
        for j in 0..BUCKET_COUNT {
            offsets[j] = percentile.len();
            bucket_lens[j] = buckets.bucket(j).len();
            for ranked in buckets.bucket(j) {
                percentile.push(ranked.percentile);
                category.push(ranked.event.category.map(|c| c.index() as u8));
            }
        }
        offsets[BUCKET_COUNT] = percentile.len();
        ParticipantTables {
            id: buckets.participant_id().as_str().to_string(),
            offsets,
            bucket_lens,
            percentile,
            category,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct CellCounts {
    delivered: u64,
    answered: u64,
    with_stressor: u64,
    per_category: [u64; CATEGORY_COUNT],
}

impl CellCounts {
    fn absorb(&mut self, other: &CellCounts) {
        self.delivered += other.delivered;
        self.answered += other.answered;
        self.with_stressor += other.with_stressor;
        for c in 0..CATEGORY_COUNT {
            self.per_category[c] += other.per_category[c];
        }
    }

    fn base_efficiency(&self) -> f64 {
        if self.answered == 0 {
            0.0
        } else {
            self.with_stressor as f64 / self.answered as f64
        }
    }

    fn category_efficiency(&self) -> [f64; CATEGORY_COUNT] {
        let mut eff = [0.0; CATEGORY_COUNT];
        if self.answered > 0 {
            for c in 0..CATEGORY_COUNT {
                eff[c] = self.per_category[c] as f64 / self.answered as f64;
            }
        }
        eff
    }
}

fn point_from_counts(counts: &CellCounts, k: f64, fatigue: f64, days: usize) -> EfficiencyPoint {
    let base_efficiency = counts.base_efficiency();
    let category_efficiency = counts.category_efficiency();
    let mut category_stressors = [0.0; CATEGORY_COUNT];
    for c in 0..CATEGORY_COUNT {
        category_stressors[c] = k * category_efficiency[c] * fatigue;
    }
    EfficiencyPoint {
        k,
        base_efficiency,
        category_efficiency,
        stressors_per_day: k * base_efficiency * fatigue,
        category_stressors_per_day: category_stressors,
        prompts_delivered_per_day: counts.delivered as f64 / days as f64,
        responses_per_day: counts.answered as f64 / days as f64,
        fatigue_scale: fatigue,
    }
}

/// Cohort point: unweighted mean over participants of every field.
fn cohort_point(per_participant: &[EfficiencyPoint], k: f64, fatigue: f64) -> EfficiencyPoint {
    let n = per_participant.len() as f64;
    let mean = |f: &dyn Fn(&EfficiencyPoint) -> f64| {
        per_participant.iter().map(|p| f(p)).sum::<f64>() / n
    };
    let base_efficiency = mean(&|p| p.base_efficiency);
    let mut category_efficiency = [0.0; CATEGORY_COUNT];
    let mut category_stressors = [0.0; CATEGORY_COUNT];
    for c in 0..CATEGORY_COUNT {
        category_efficiency[c] = mean(&|p| p.category_efficiency[c]);
        category_stressors[c] = k * category_efficiency[c] * fatigue;
    }
    EfficiencyPoint {
        k,
        base_efficiency,
        category_efficiency,
        stressors_per_day: k * base_efficiency * fatigue,
        category_stressors_per_day: category_stressors,
        prompts_delivered_per_day: mean(&|p| p.prompts_delivered_per_day),
        responses_per_day: mean(&|p| p.responses_per_day),
        fatigue_scale: fatigue,
    }
}

fn run_debiased_participant(
    tables: &ParticipantTables,
    config: &SimulationConfig,
    k: f64,
    threshold: f64,
) -> CellCounts {
    let delivered_flag: Vec<bool> =
        tables.percentile.iter().map(|&p| p > threshold + config.tie_guard).collect();
    let mut totals = CellCounts::default();
    for day in 0..config.days_per_participant {
        let seed = stream_seed(config.seed, "cell", &tables.id, day as u64, k.to_bits());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..config.events_per_day {
            let bucket = rng.gen_range(0..BUCKET_COUNT);
            let slot = tables.offsets[bucket] + rng.gen_range(0..tables.bucket_lens[bucket]);
            if delivered_flag[slot] {
                totals.delivered += 1;
                if rng.gen_bool(config.alpha) {
                    totals.answered += 1;
                    if let Some(cat) = tables.category[slot] {
                        totals.with_stressor += 1;
                        totals.per_category[cat as usize] += 1;
                    }
                }
            }
        }
    }
    totals
}

/// Run the configured policy over an eligible cohort.
///
/// Under the debiased policy the output has one cohort point per entry of
/// `k_values` (in order); under the baseline it has a single point whose k
/// is the quota-implied mean responses per day. Deterministic for a given
/// config: cell seeds derive from (seed, participant, day, k).
pub fn simulate(
    cohort: &[ParticipantBuckets],
    config: &SimulationConfig,
) -> Result<SimulationOutput, SimulationError> {
    config.validate()?;
    if cohort.is_empty() {
        return Err(SimulationError::EmptyCohort);
    }
    match config.policy {
        SamplingPolicy::Debiased => simulate_debiased(cohort, config),
        SamplingPolicy::MoodsBaseline => simulate_moods_baseline(cohort, config),
    }
}

fn simulate_debiased(
    cohort: &[ParticipantBuckets],
    config: &SimulationConfig,
) -> Result<SimulationOutput, SimulationError> {
    let tables: Vec<ParticipantTables> = cohort.iter().map(ParticipantTables::build).collect();
    let mut per_participant: Vec<ParticipantSeries> = cohort
        .iter()
        .map(|b| ParticipantSeries { participant_id: b.participant_id().clone(), points: Vec::new() })
        .collect();
    let mut points = Vec::with_capacity(config.k_values.len());

    for &k in &config.k_values {
        let rho = config.rho_for(k)?;
        let fatigue = fatigue_scale(k, &config.fatigue)?;
        let threshold = 100.0 * (1.0 - rho);
        let cell_points: Vec<EfficiencyPoint> = tables
            .par_iter()
            .map(|t| {
                let counts = run_debiased_participant(t, config, k, threshold);
                point_from_counts(&counts, k, fatigue, config.days_per_participant)
            })
            .collect();
        points.push(cohort_point(&cell_points, k, fatigue));
        for (series, point) in per_participant.iter_mut().zip(cell_points) {
            series.points.push(point);
        }
    }
    Ok(SimulationOutput { points, per_participant })
}

/// Stratum quotas of the historical policy: 1 prompt at or below the 25th
/// percentile, 2 in (25, 75], 3 in (75, 95]; everything above the 95th is
/// always prompted.
pub const BASELINE_QUOTAS: [usize; 3] = [1, 2, 3];

/// Stratum boundaries in percentile points.
pub const BASELINE_STRATA: [f64; 3] = [25.0, 75.0, 95.0];

fn stratum_of(percentile: f64) -> usize {
    if percentile <= BASELINE_STRATA[0] {
        0
    } else if percentile <= BASELINE_STRATA[1] {
        1
    } else if percentile <= BASELINE_STRATA[2] {
        2
    } else {
        3
    }
}

/// Apply the stratified quota to one day's candidates. `strata[i]` is the
/// stratum (0..4) of candidate i; the returned flags mark delivered
/// candidates. When a stratum holds more candidates than its quota the
/// delivered ones are drawn uniformly without replacement.
pub fn moods_quota_selection<R: Rng + ?Sized>(strata: &[usize], rng: &mut R) -> Vec<bool> {
    let mut delivered = vec![false; strata.len()];
    let mut members: [Vec<usize>; 4] = Default::default();
    for (i, &s) in strata.iter().enumerate() {
        members[s].push(i);
    }
    for (stratum, quota) in BASELINE_QUOTAS.iter().enumerate() {
        let candidates = &members[stratum];
        if candidates.len() <= *quota {
            for &i in candidates {
                delivered[i] = true;
            }
        } else {
            for pick in rand::seq::index::sample(rng, candidates.len(), *quota) {
                delivered[candidates[pick]] = true;
            }
        }
    }
    for &i in &members[3] {
        delivered[i] = true;
    }
    delivered
}

fn run_baseline_participant(
    tables: &ParticipantTables,
    strata: &[usize],
    config: &SimulationConfig,
) -> CellCounts {
    let mut totals = CellCounts::default();
    let mut day_slots = Vec::with_capacity(config.events_per_day);
    let mut day_strata = Vec::with_capacity(config.events_per_day);
    for day in 0..config.days_per_participant {
        let seed = stream_seed(config.seed, "cell", &tables.id, day as u64, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        day_slots.clear();
        day_strata.clear();
        for _ in 0..config.events_per_day {
            let bucket = rng.gen_range(0..BUCKET_COUNT);
            let slot = tables.offsets[bucket] + rng.gen_range(0..tables.bucket_lens[bucket]);
            day_slots.push(slot);
            day_strata.push(strata[slot]);
        }
        let delivered = moods_quota_selection(&day_strata, &mut rng);
        for (i, &slot) in day_slots.iter().enumerate() {
            if delivered[i] {
                totals.delivered += 1;
                if rng.gen_bool(config.alpha) {
                    totals.answered += 1;
                    if let Some(cat) = tables.category[slot] {
                        totals.with_stressor += 1;
                        totals.per_category[cat as usize] += 1;
                    }
                }
            }
        }
    }
    totals
}

/// Replay the historical stratified-quota policy over the same candidate
/// stream. Produces a single point whose `k` is the quota-implied mean
/// responses per day (cohort level; each participant series uses its own
/// implied k).
pub fn simulate_moods_baseline(
    cohort: &[ParticipantBuckets],
    config: &SimulationConfig,
) -> Result<SimulationOutput, SimulationError> {
    if cohort.is_empty() {
        return Err(SimulationError::EmptyCohort);
    }
    let tables: Vec<ParticipantTables> = cohort.iter().map(ParticipantTables::build).collect();
    let strata: Vec<Vec<usize>> = tables
        .iter()
        .map(|t| t.percentile.iter().map(|&p| stratum_of(p)).collect())
        .collect();

    let counts: Vec<CellCounts> = tables
        .par_iter()
        .zip(&strata)
        .map(|(t, s)| run_baseline_participant(t, s, config))
        .collect();

    let days = config.days_per_participant;
    let mut per_participant = Vec::with_capacity(cohort.len());
    for (buckets, count) in cohort.iter().zip(&counts) {
        let implied_k = count.answered as f64 / days as f64;
        let fatigue = fatigue_scale(implied_k, &config.fatigue)?;
        per_participant.push(ParticipantSeries {
            participant_id: buckets.participant_id().clone(),
            points: vec![point_from_counts(count, implied_k, fatigue, days)],
        });
    }
    let mut cohort_counts = CellCounts::default();
    for count in &counts {
        cohort_counts.absorb(count);
    }
    let implied_k = cohort_counts.answered as f64 / (days * cohort.len()) as f64;
    let fatigue = fatigue_scale(implied_k, &config.fatigue)?;
    let cells: Vec<EfficiencyPoint> = counts
        .iter()
        .map(|c| point_from_counts(c, implied_k, fatigue, days))
        .collect();
    Ok(SimulationOutput {
        points: vec![cohort_point(&cells, implied_k, fatigue)],
        per_participant,
    })
}
