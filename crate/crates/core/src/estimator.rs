//! Saturating exponential fits for stressor recovery curves.
//!
//! The model y(k) = S(1 - e^(-ak)) rises from zero and levels off at the
//! saturation S; the rate constant a controls how quickly additional daily
//! responses stop paying off. Fits run per category and feed the weekly
//! projection report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{CategoryScope, StressorCategory};

/// Gradient norm below this fraction of the total sum of squares counts as
/// stationary. Well-posed fits bottom out five or more orders below it.
const GRAD_REL_TOL: f64 = 1e-10;
/// Looser stationarity bound applied only after the step search exhausts
/// itself. On noisy data the loss hits its rounding floor while the
/// gradient is still near sqrt(ulp) of the loss scale, around 1e-9
/// relative; a gradient above this bound marks a genuine stall instead.
const STALL_GRAD_REL_TOL: f64 = 1e-7;
/// Iteration cap; hitting it leaves `converged` false.
const MAX_ITERATIONS: usize = 200;
/// |ln S| and |ln a| are confined to this box; a fit pinned to the wall is
/// reported unconverged rather than returned as a spurious optimum.
const LOG_PARAM_CLAMP: f64 = 45.0;
/// Minimum a * k_max for the rate to count as observed. Below this the data
/// deviate from a straight line by under 0.005% of signal, so S and a are
/// individually meaningless (only their product is pinned down) and the fit
/// is flagged. Runaway ridge fits on near-linear data land around 1e-8.
const MIN_RATE_SPAN: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("point {index} has non-finite coordinates (k = {k}, y = {y})")]
    NonFinitePoint { index: usize, k: f64, y: f64 },
    #[error("point {index} is out of range (k = {k}, y = {y}): {requirement}")]
    PointOutOfRange { index: usize, k: f64, y: f64, requirement: &'static str },
    #[error("need at least 3 points covering 2 distinct k values, got {n_points} points with {distinct_k} distinct k")]
    InsufficientPoints { n_points: usize, distinct_k: usize },
    #[error("fit for {category} did not converge, so its weekly projection is undefined")]
    Unconverged { category: CategoryScope },
    #[error("wear hours must be positive and finite, got {wear_hours}")]
    NonPositiveWearHours { wear_hours: f64 },
    #[error("observed daily rate must be finite and non-negative, got {value}")]
    InvalidObservedRate { value: f64 },
}

/// Fitted saturation curve for one category (or the pooled ALL scope).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit {
    pub category: CategoryScope,
    /// Asymptotic stressors per day.
    #[serde(rename = "S")]
    pub saturation: f64,
    /// Rate constant per daily response.
    #[serde(rename = "a")]
    pub rate: f64,
    /// Root-mean-square residual over the fitted points.
    pub rmse: f64,
    pub n_points: usize,
    pub converged: bool,
}

impl SaturationFit {
    /// Expected stressors/day recovered after k responses: S(1 - e^(-ak)).
    /// Defined for k >= 0; y(0) is exactly zero.
    pub fn evaluate(&self, k: f64) -> f64 {
        self.saturation * (1.0 - (-self.rate * k).exp())
    }
}

/// Weekly frequency derived from a fit, with an optional observed-rate
/// extrapolation alongside for comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyProjection {
    pub category: CategoryScope,
    pub weekly_model: f64,
    pub weekly_observed: Option<f64>,
}

/// Least-squares fit of y(k) = S(1 - e^(-ak)) by damped Gauss-Newton.
///
/// Parameters are iterated as (ln S, ln a) so positivity holds by
/// construction. The start point is S0 = 1.05 max(y) and a0 from a secant
/// through the two smallest distinct k (the slope near zero is about S*a).
/// All-zero observations return a flagged degenerate fit instead of an
/// error so batch reports never abort.
pub fn fit_exponential(
    category: CategoryScope,
    points: &[(f64, f64)],
) -> Result<SaturationFit, FitError> {
    for (index, &(k, y)) in points.iter().enumerate() {
        if !(k.is_finite() && y.is_finite()) {
            return Err(FitError::NonFinitePoint { index, k, y });
        }
        if k <= 0.0 {
            return Err(FitError::PointOutOfRange {
                index,
                k,
                y,
                requirement: "k must be positive",
            });
        }
        if y < 0.0 {
            return Err(FitError::PointOutOfRange {
                index,
                k,
                y,
                requirement: "y must be non-negative",
            });
        }
    }
    let mut pts = points.to_vec();
    // Canonical order makes the result independent of input permutation.
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let distinct_k = if pts.is_empty() {
        0
    } else {
        1 + pts.windows(2).filter(|w| w[0].0 != w[1].0).count()
    };
    if pts.len() < 3 || distinct_k < 2 {
        return Err(FitError::InsufficientPoints { n_points: pts.len(), distinct_k });
    }

    let y_max = pts.iter().map(|p| p.1).fold(0.0_f64, f64::max);
    if y_max == 0.0 {
        return Ok(SaturationFit {
            category,
            saturation: 0.0,
            rate: 0.0,
            rmse: 0.0,
            n_points: pts.len(),
            converged: false,
        });
    }

    let s0 = 1.05 * y_max;
    let (k_first, y_first) = pts[0];
    let &(k_next, y_next) = pts
        .iter()
        .find(|p| p.0 > k_first)
        .expect("distinct k count checked above");
    let mut a0 = (y_next - y_first) / (k_next - k_first) / s0;
    if !a0.is_finite() || a0 <= 0.0 {
        a0 = 0.5;
    }
    let a0 = a0.clamp(1e-3, 10.0);

    // Loss scale for the stationarity test: the sum of squares of y, i.e.
    // the loss of the flat zero model. The loss itself cannot serve as the
    // scale because noiseless fits drive it to the rounding floor.
    let y_scale: f64 = pts.iter().map(|p| p.1 * p.1).sum();
    let k_max = pts.last().expect("validated nonempty").0;

    let mut u = s0.ln();
    let mut v = a0.ln();
    let mut lambda = 0.0_f64;
    let mut converged = false;
    'outer: for _ in 0..MAX_ITERATIONS {
        let (sse, jtj, grad) = normal_equations(&pts, u, v);
        if grad[0].abs().max(grad[1].abs()) <= GRAD_REL_TOL * y_scale {
            converged = true;
            break 'outer;
        }
        loop {
            // Marquardt damping: inflate the diagonal until the step both
            // solves and shrinks the loss. At large lambda the step tends
            // to a short gradient step, so acceptance is guaranteed away
            // from a stationary point.
            let d00 = jtj[0] + lambda * jtj[0].max(1e-12);
            let d11 = jtj[2] + lambda * jtj[2].max(1e-12);
            let d01 = jtj[1];
            let det = d00 * d11 - d01 * d01;
            if det == 0.0 || !det.is_finite() {
                if !escalate(&mut lambda) {
                    break 'outer;
                }
                continue;
            }
            let du = (d11 * grad[0] - d01 * grad[1]) / det;
            let dv = (d00 * grad[1] - d01 * grad[0]) / det;
            let u_new = (u + du).clamp(-LOG_PARAM_CLAMP, LOG_PARAM_CLAMP);
            let v_new = (v + dv).clamp(-LOG_PARAM_CLAMP, LOG_PARAM_CLAMP);
            if !(u_new.is_finite() && v_new.is_finite()) {
                if !escalate(&mut lambda) {
                    break 'outer;
                }
                continue;
            }
            let sse_new = sse_at(&pts, u_new, v_new);
            if sse_new <= sse {
                u = u_new;
                v = v_new;
                lambda = if lambda < 1e-12 { 0.0 } else { lambda / 10.0 };
                break;
            }
            if !escalate(&mut lambda) {
                break 'outer;
            }
        }
    }
    if !converged {
        // The step search ran out (damping overflowed or iterations hit
        // the cap) without passing the sharp bound. When no representable
        // step shrinks the loss any further the iterate is the float
        // optimum; accept it if the gradient is small on the loose scale,
        // and let the wall and span checks below veto the degenerate ones.
        let (_, _, grad) = normal_equations(&pts, u, v);
        if grad[0].abs().max(grad[1].abs()) <= STALL_GRAD_REL_TOL * y_scale {
            converged = true;
        }
    }
    // A parameter parked on the clamp wall means the optimum ran away
    // (typically a -> 0 on nearly linear data); flag instead of trusting it.
    if u.abs() >= LOG_PARAM_CLAMP || v.abs() >= LOG_PARAM_CLAMP {
        converged = false;
    }
    // Ridge fits on near-linear data stall at the rounding floor of the
    // loss before reaching the clamp, with S and a individually absurd but
    // a small gradient; the vanishing curvature span exposes them.
    if v.exp() * k_max < MIN_RATE_SPAN {
        converged = false;
    }

    let n = pts.len();
    Ok(SaturationFit {
        category,
        saturation: u.exp(),
        rate: v.exp(),
        rmse: (sse_at(&pts, u, v) / n as f64).sqrt(),
        n_points: n,
        converged,
    })
}

fn escalate(lambda: &mut f64) -> bool {
    *lambda = if *lambda == 0.0 { 1e-4 } else { *lambda * 10.0 };
    *lambda <= 1e100
}

/// Loss, Gauss-Newton normal matrix [j00, j01, j11], and gradient J^T r in
/// (u, v) = (ln S, ln a) coordinates.
fn normal_equations(pts: &[(f64, f64)], u: f64, v: f64) -> (f64, [f64; 3], [f64; 2]) {
    let s = u.exp();
    let a = v.exp();
    let mut sse = 0.0;
    let mut jtj = [0.0_f64; 3];
    let mut grad = [0.0_f64; 2];
    for &(k, y) in pts {
        let e = (-a * k).exp();
        let r = y - s * (1.0 - e);
        let ju = s * (1.0 - e);
        let jv = s * a * k * e;
        sse += r * r;
        jtj[0] += ju * ju;
        jtj[1] += ju * jv;
        jtj[2] += jv * jv;
        grad[0] += ju * r;
        grad[1] += jv * r;
    }
    (sse, jtj, grad)
}

fn sse_at(pts: &[(f64, f64)], u: f64, v: f64) -> f64 {
    let s = u.exp();
    let a = v.exp();
    pts.iter()
        .map(|&(k, y)| {
            let r = y - s * (1.0 - (-a * k).exp());
            r * r
        })
        .sum()
}

/// Weekly projected frequency, 7 x S. Refuses unconverged fits.
pub fn weekly(fit: &SaturationFit) -> Result<WeeklyProjection, FitError> {
    if !fit.converged {
        return Err(FitError::Unconverged { category: fit.category });
    }
    Ok(WeeklyProjection {
        category: fit.category,
        weekly_model: 7.0 * fit.saturation,
        weekly_observed: None,
    })
}

/// Scale an observed daily rate up to a 12-hour waking day, then to a week:
/// observed x (12 / wear_hours) x 7.
pub fn extrapolate_observed(observed_per_day: f64, wear_hours: f64) -> Result<f64, FitError> {
    if !(wear_hours.is_finite() && wear_hours > 0.0) {
        return Err(FitError::NonPositiveWearHours { wear_hours });
    }
    if !observed_per_day.is_finite() || observed_per_day < 0.0 {
        return Err(FitError::InvalidObservedRate { value: observed_per_day });
    }
    Ok(observed_per_day * (12.0 / wear_hours) * 7.0)
}

/// One line of the category report. Fit failures keep their row, with the
/// numeric fields empty and the reason in `note`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub category: CategoryScope,
    #[serde(rename = "S")]
    pub saturation: Option<f64>,
    #[serde(rename = "a")]
    pub rate: Option<f64>,
    pub weekly_model: Option<f64>,
    pub weekly_observed: Option<f64>,
    pub rmse: Option<f64>,
    pub n_points: usize,
    pub converged: bool,
    pub note: String,
}

/// Category rows sorted by saturation descending, with `Other` and the
/// pooled ALL row pinned to the bottom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub rows: Vec<ReportRow>,
}

impl CategoryReport {
    /// Fill `weekly_observed` for every row whose scope appears in
    /// `observed` (daily rates), extrapolated from `wear_hours` of wear.
    pub fn attach_observed(
        &mut self,
        observed: &BTreeMap<CategoryScope, f64>,
        wear_hours: f64,
    ) -> Result<(), FitError> {
        for row in &mut self.rows {
            if let Some(&rate) = observed.get(&row.category) {
                row.weekly_observed = Some(extrapolate_observed(rate, wear_hours)?);
            }
        }
        Ok(())
    }
}

/// Fit every series independently and assemble the report. A failed or
/// unconverged category is annotated in its row and never aborts the rest.
pub fn fit_all_categories(series: &BTreeMap<CategoryScope, Vec<(f64, f64)>>) -> CategoryReport {
    let mut rows: Vec<ReportRow> = series
        .iter()
        .map(|(scope, pts)| row_for(*scope, pts))
        .collect();
    rows.sort_by(|x, y| {
        pin_rank(&x.category)
            .cmp(&pin_rank(&y.category))
            .then_with(|| {
                let sx = x.saturation.unwrap_or(f64::NEG_INFINITY);
                let sy = y.saturation.unwrap_or(f64::NEG_INFINITY);
                sy.total_cmp(&sx)
            })
            .then_with(|| x.category.label().cmp(y.category.label()))
    });
    CategoryReport { rows }
}

fn pin_rank(scope: &CategoryScope) -> u8 {
    match scope {
        CategoryScope::Category(StressorCategory::Other) => 1,
        CategoryScope::All => 2,
        CategoryScope::Category(_) => 0,
    }
}

fn row_for(category: CategoryScope, pts: &[(f64, f64)]) -> ReportRow {
    match fit_exponential(category, pts) {
        Ok(fit) => {
            let note = if fit.converged {
                String::new()
            } else if fit.saturation == 0.0 {
                "all observations zero; degenerate flat fit".to_string()
            } else {
                "fit did not converge".to_string()
            };
            ReportRow {
                category: fit.category,
                saturation: Some(fit.saturation),
                rate: Some(fit.rate),
                weekly_model: weekly(&fit).ok().map(|w| w.weekly_model),
                weekly_observed: None,
                rmse: Some(fit.rmse),
                n_points: fit.n_points,
                converged: fit.converged,
                note,
            }
        }
        Err(err) => ReportRow {
            category,
            saturation: None,
            rate: None,
            weekly_model: None,
            weekly_observed: None,
            rmse: None,
            n_points: pts.len(),
            converged: false,
            note: err.to_string(),
        },
    }
}
