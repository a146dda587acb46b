//! Toolkit for recovering latent daily stressor frequency from sparse
//! prompt/response event data.
//!
//! The pipeline: `events` ingests likelihood-rated event tables and ranks
//! them into percentile buckets, `budget` solves the prompt-capacity
//! identity that turns a response target into a sampling fraction,
//! `simulator` sweeps response targets over a cohort with debiased
//! bucket-uniform sampling (or the quota baseline) and fatigue
//! normalization, `estimator` fits the saturating exponential
//! y(k) = S(1 - e^(-ak)) and projects weekly frequencies, `synth`
//! generates cohorts with closed-form ground truth for end-to-end
//! validation, and `formats` reads and writes every tabular artifact.

pub mod budget;
pub mod estimator;
pub mod events;
pub mod formats;
mod seeding;
pub mod simulator;
pub mod synth;
pub mod taxonomy;

pub use budget::{BudgetError, BudgetField, BudgetInputs, PromptBudget, Violation, ViolationReport};
pub use estimator::{
    extrapolate_observed, fit_all_categories, fit_exponential, weekly, CategoryReport, FitError,
    ReportRow, SaturationFit, WeeklyProjection,
};
pub use events::{
    bucketize, eligible_cohort, filter_window, group_by_participant, ingest_csv, ingest_json,
    write_events_csv, CohortSelection, EventsError, IngestOutcome, ParticipantBuckets,
    ParticipantId, RatedEvent, RowDiagnostic, RowErrorKind, BUCKET_COUNT, DEFAULT_WINDOW,
};
pub use formats::{
    plot_rows, points_to_rows, read_observed, read_points, read_report, series_from_rows,
    write_events_json, write_plot, write_points, write_report, FormatsError, ObservedRow, PlotRow,
    PointRow, TableFormat,
};
pub use simulator::{
    fatigue_scale, simulate, EfficiencyPoint, FatigueModel, SamplingPolicy, SimulationConfig,
    SimulationError, SimulationOutput, DEFAULT_SEED, DEFAULT_TIE_GUARD,
};
pub use synth::{
    generate, grid_fit, oracle_curve, GridFit, OracleCurve, OraclePoint, SynthError, SynthSpec,
};
pub use taxonomy::{CategoryScope, StressorCategory, ALL_CATEGORIES, CATEGORY_COUNT};
