//! Tabular file formats gluing the pipeline stages together.
//!
//! Simulator points, category reports, plot series, and observed-rate
//! tables each exist in a CSV and a JSON encoding with identical field
//! names, so artifacts flow between runs in either format. Column names
//! are part of the contract and covered by tests.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::CategoryReport;
use crate::events::RatedEvent;
use crate::simulator::EfficiencyPoint;
use crate::taxonomy::{CategoryScope, ALL_CATEGORIES};

#[derive(Debug, Error)]
pub enum FormatsError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unknown table format {0:?}, expected \"csv\" or \"json\"")]
    UnknownFormat(String),
    #[error("{0}")]
    Invalid(String),
}

/// Encoding for every tabular artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    pub fn name(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableFormat {
    type Err = FormatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(FormatsError::UnknownFormat(other.to_string())),
        }
    }
}

/// Serialize rows as CSV (header from the field names) or a JSON array.
pub fn write_table<W: io::Write, T: Serialize>(
    writer: W,
    rows: &[T],
    format: TableFormat,
) -> Result<(), FormatsError> {
    match format {
        TableFormat::Csv => {
            let mut out = csv::Writer::from_writer(writer);
            for row in rows {
                out.serialize(row)?;
            }
            out.flush()?;
        }
        TableFormat::Json => serde_json::to_writer_pretty(writer, rows)?,
    }
    Ok(())
}

/// Inverse of [`write_table`] for any row type.
pub fn read_table<R: io::Read, T: DeserializeOwned>(
    reader: R,
    format: TableFormat,
) -> Result<Vec<T>, FormatsError> {
    match format {
        TableFormat::Csv => {
            let mut input = csv::Reader::from_reader(reader);
            let rows: Result<Vec<T>, csv::Error> = input.deserialize().collect();
            Ok(rows?)
        }
        TableFormat::Json => Ok(serde_json::from_reader(reader)?),
    }
}

/// One simulator output row: the pooled ALL scope or one category at one
/// response target. `n_prompts` and `n_responses` are per-day means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRow {
    pub k: f64,
    pub category: CategoryScope,
    pub base_efficiency: f64,
    pub fatigue_scale: f64,
    pub stressors_per_day: f64,
    pub n_prompts: f64,
    pub n_responses: f64,
}

/// Flatten cohort points into rows: per k, one ALL row followed by the
/// twelve category rows.
pub fn points_to_rows(points: &[EfficiencyPoint]) -> Vec<PointRow> {
    let mut rows = Vec::with_capacity(points.len() * (1 + ALL_CATEGORIES.len()));
    for point in points {
        rows.push(PointRow {
            k: point.k,
            category: CategoryScope::All,
            base_efficiency: point.base_efficiency,
            fatigue_scale: point.fatigue_scale,
            stressors_per_day: point.stressors_per_day,
            n_prompts: point.prompts_delivered_per_day,
            n_responses: point.responses_per_day,
        });
        for category in ALL_CATEGORIES {
            let c = category.index();
            rows.push(PointRow {
                k: point.k,
                category: CategoryScope::Category(category),
                base_efficiency: point.category_efficiency[c],
                fatigue_scale: point.fatigue_scale,
                stressors_per_day: point.category_stressors_per_day[c],
                n_prompts: point.prompts_delivered_per_day,
                n_responses: point.responses_per_day,
            });
        }
    }
    rows
}

/// Group rows into per-scope (k, stressors/day) series, row order kept.
pub fn series_from_rows(rows: &[PointRow]) -> BTreeMap<CategoryScope, Vec<(f64, f64)>> {
    let mut map: BTreeMap<CategoryScope, Vec<(f64, f64)>> = BTreeMap::new();
    for row in rows {
        map.entry(row.category).or_default().push((row.k, row.stressors_per_day));
    }
    map
}

pub fn write_points<W: io::Write>(
    writer: W,
    rows: &[PointRow],
    format: TableFormat,
) -> Result<(), FormatsError> {
    write_table(writer, rows, format)
}

pub fn read_points<R: io::Read>(
    reader: R,
    format: TableFormat,
) -> Result<Vec<PointRow>, FormatsError> {
    read_table(reader, format)
}

pub fn write_report<W: io::Write>(
    writer: W,
    report: &CategoryReport,
    format: TableFormat,
) -> Result<(), FormatsError> {
    write_table(writer, &report.rows, format)
}

pub fn read_report<R: io::Read>(
    reader: R,
    format: TableFormat,
) -> Result<CategoryReport, FormatsError> {
    Ok(CategoryReport { rows: read_table(reader, format)? })
}

/// One plot-data row; `y_model` is empty when the category's fit failed
/// or did not converge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotRow {
    pub category: CategoryScope,
    pub k: f64,
    pub y_model: Option<f64>,
    pub y_simulated: f64,
}

/// Pair every simulated point with its fitted model value, in report row
/// order and ascending k, for external curve rendering.
pub fn plot_rows(points: &[PointRow], report: &CategoryReport) -> Vec<PlotRow> {
    let mut rows = Vec::new();
    for fit_row in &report.rows {
        let mut series: Vec<&PointRow> =
            points.iter().filter(|p| p.category == fit_row.category).collect();
        series.sort_by(|a, b| a.k.total_cmp(&b.k));
        for point in series {
            let y_model = match (fit_row.converged, fit_row.saturation, fit_row.rate) {
                (true, Some(s), Some(a)) => Some(s * (1.0 - (-a * point.k).exp())),
                _ => None,
            };
            rows.push(PlotRow {
                category: point.category,
                k: point.k,
                y_model,
                y_simulated: point.stressors_per_day,
            });
        }
    }
    rows
}

pub fn write_plot<W: io::Write>(
    writer: W,
    rows: &[PlotRow],
    format: TableFormat,
) -> Result<(), FormatsError> {
    write_table(writer, rows, format)
}

/// Observed daily rate for one scope, feeding the report's
/// `weekly_observed` column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservedRow {
    pub category: CategoryScope,
    pub observed_per_day: f64,
}

/// Read observed rates into a map, rejecting duplicate scopes.
pub fn read_observed<R: io::Read>(
    reader: R,
    format: TableFormat,
) -> Result<BTreeMap<CategoryScope, f64>, FormatsError> {
    let rows: Vec<ObservedRow> = read_table(reader, format)?;
    let mut map = BTreeMap::new();
    for row in rows {
        if map.insert(row.category, row.observed_per_day).is_some() {
            return Err(FormatsError::Invalid(format!(
                "duplicate observed rate for category {}",
                row.category.label()
            )));
        }
    }
    Ok(map)
}

#[derive(Serialize)]
struct EventOut<'a> {
    participant_id: &'a str,
    time_of_day_min: f64,
    likelihood: f64,
    responded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    category: Option<&'a str>,
}

/// Structured-object twin of the event-table CSV; `events::ingest_json`
/// reads it back.
pub fn write_events_json<W: io::Write>(
    writer: W,
    events: &[RatedEvent],
) -> Result<(), FormatsError> {
    let out: Vec<EventOut> = events
        .iter()
        .map(|e| EventOut {
            participant_id: e.participant_id.as_str(),
            time_of_day_min: e.time_of_day_min,
            likelihood: e.likelihood,
            responded: e.responded,
            category: e.category.map(|c| c.label()),
        })
        .collect();
    serde_json::to_writer_pretty(writer, &out)?;
    Ok(())
}
