//! Prompt-budget arithmetic tying delivery rate to response yield.
//!
//! The governing identity is `rho * (eta * omega) = k / alpha`: the fraction
//! of candidate events that trigger a prompt, times the daily prompt
//! capacity, must equal the answered-prompt target inflated by the response
//! rate. Any four fields determine the fifth; a target is feasible only when
//! `0 < k/alpha <= eta*omega`, i.e. the implied delivery fraction fits in
//! (0, 1].

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Relative tolerance when checking the identity on an assembled budget.
pub const IDENTITY_REL_TOL: f64 = 1e-9;

/// A fully determined prompt budget satisfying the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptBudget {
    /// Fraction of candidate events that trigger a prompt, in (0, 1].
    pub rho: f64,
    /// Prompts deliverable per waking hour (> 0).
    pub eta: f64,
    /// Waking hours per day (> 0).
    pub omega: f64,
    /// Target answered prompts per day (> 0).
    pub k: f64,
    /// Probability a delivered prompt is answered, in (0, 1].
    pub alpha: f64,
}

/// Names the five budget fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BudgetField {
    Rho,
    Eta,
    Omega,
    K,
    Alpha,
}

impl BudgetField {
    pub fn name(self) -> &'static str {
        match self {
            BudgetField::Rho => "rho",
            BudgetField::Eta => "eta",
            BudgetField::Omega => "omega",
            BudgetField::K => "k",
            BudgetField::Alpha => "alpha",
        }
    }
}

impl fmt::Display for BudgetField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Four known fields plus exactly one `None` to solve for.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetInputs {
    pub rho: Option<f64>,
    pub eta: Option<f64>,
    pub omega: Option<f64>,
    pub k: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetError {
    /// Exactly one field must be left unknown.
    #[error("exactly one budget field must be unknown, got {unknown_count}")]
    WrongUnknownCount { unknown_count: usize },
    /// A known field is non-finite, non-positive, or outside its range.
    #[error("degenerate input: {field} = {value} must be {requirement}")]
    DegenerateInput {
        field: BudgetField,
        value: f64,
        requirement: &'static str,
    },
    /// The solved field falls outside its feasible range.
    #[error("infeasible budget: solved {field} = {value} violates {requirement}")]
    InfeasibleBudget {
        field: BudgetField,
        value: f64,
        requirement: &'static str,
    },
}

/// One reason an assembled budget fails validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    NonFinite {
        field: BudgetField,
        value: f64,
    },
    OutOfRange {
        field: BudgetField,
        value: f64,
        requirement: &'static str,
    },
    /// `rho * eta * omega` and `k / alpha` disagree beyond tolerance.
    IdentityMismatch {
        delivered_per_day: f64,
        required_per_day: f64,
        rel_err: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { field, value } => {
                write!(f, "{field} = {value} is not finite")
            }
            Violation::OutOfRange { field, value, requirement } => {
                write!(f, "{field} = {value} must be {requirement}")
            }
            Violation::IdentityMismatch { delivered_per_day, required_per_day, rel_err } => write!(
                f,
                "identity violated: rho*eta*omega = {delivered_per_day} but k/alpha = {required_per_day} (rel err {rel_err:.3e})"
            ),
        }
    }
}

/// Outcome of [`validate`]: empty means the budget satisfies every invariant.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("budget ok");
        }
        let lines: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&lines.join("; "))
    }
}

fn check_known(field: BudgetField, value: f64) -> Result<(), BudgetError> {
    let (lo_ok, requirement) = match field {
        BudgetField::Rho | BudgetField::Alpha => (value > 0.0 && value <= 1.0, "in (0, 1]"),
        _ => (value > 0.0, "> 0"),
    };
    if !value.is_finite() || !lo_ok {
        return Err(BudgetError::DegenerateInput { field, value, requirement });
    }
    Ok(())
}

/// Solve the identity for the single unknown field.
///
/// The four known fields must be finite and in range; the solved field is
/// checked against its own range before the budget is returned, so a
/// returned budget always passes [`validate`].
pub fn solve(inputs: &BudgetInputs) -> Result<PromptBudget, BudgetError> {
    let fields = [
        (BudgetField::Rho, inputs.rho),
        (BudgetField::Eta, inputs.eta),
        (BudgetField::Omega, inputs.omega),
        (BudgetField::K, inputs.k),
        (BudgetField::Alpha, inputs.alpha),
    ];
    let unknowns: Vec<BudgetField> =
        fields.iter().filter(|(_, v)| v.is_none()).map(|(f, _)| *f).collect();
    if unknowns.len() != 1 {
        return Err(BudgetError::WrongUnknownCount { unknown_count: unknowns.len() });
    }
    let unknown = unknowns[0];
    for (field, value) in fields {
        if let Some(v) = value {
            check_known(field, v)?;
        }
    }

    let rho = inputs.rho.unwrap_or(f64::NAN);
    let eta = inputs.eta.unwrap_or(f64::NAN);
    let omega = inputs.omega.unwrap_or(f64::NAN);
    let k = inputs.k.unwrap_or(f64::NAN);
    let alpha = inputs.alpha.unwrap_or(f64::NAN);

    let budget = match unknown {
        BudgetField::Rho => {
            let solved = (k / alpha) / (eta * omega);
            if !(solved > 0.0 && solved <= 1.0) {
                return Err(BudgetError::InfeasibleBudget {
                    field: BudgetField::Rho,
                    value: solved,
                    requirement: "rho in (0, 1], i.e. k/alpha <= eta*omega",
                });
            }
            PromptBudget { rho: solved, eta, omega, k, alpha }
        }
        BudgetField::Eta => {
            let solved = k / (alpha * rho * omega);
            PromptBudget { rho, eta: solved, omega, k, alpha }
        }
        BudgetField::Omega => {
            let solved = k / (alpha * rho * eta);
            PromptBudget { rho, eta, omega: solved, k, alpha }
        }
        BudgetField::K => {
            let solved = rho * alpha * eta * omega;
            PromptBudget { rho, eta, omega, k: solved, alpha }
        }
        BudgetField::Alpha => {
            let solved = k / (rho * eta * omega);
            if !(solved > 0.0 && solved <= 1.0) {
                return Err(BudgetError::InfeasibleBudget {
                    field: BudgetField::Alpha,
                    value: solved,
                    requirement: "alpha in (0, 1]",
                });
            }
            PromptBudget { rho, eta, omega, k, alpha: solved }
        }
    };
    debug_assert!(validate(&budget).is_ok(), "solve postcondition: {}", validate(&budget));
    Ok(budget)
}

/// Check every range plus the identity at [`IDENTITY_REL_TOL`].
pub fn validate(budget: &PromptBudget) -> ViolationReport {
    let mut violations = Vec::new();
    let fields = [
        (BudgetField::Rho, budget.rho),
        (BudgetField::Eta, budget.eta),
        (BudgetField::Omega, budget.omega),
        (BudgetField::K, budget.k),
        (BudgetField::Alpha, budget.alpha),
    ];
    for (field, value) in fields {
        if !value.is_finite() {
            violations.push(Violation::NonFinite { field, value });
            continue;
        }
        match field {
            BudgetField::Rho | BudgetField::Alpha => {
                if !(value > 0.0 && value <= 1.0) {
                    violations.push(Violation::OutOfRange { field, value, requirement: "in (0, 1]" });
                }
            }
            _ => {
                if value <= 0.0 {
                    violations.push(Violation::OutOfRange { field, value, requirement: "> 0" });
                }
            }
        }
    }
    if violations.is_empty() {
        let delivered = budget.rho * budget.eta * budget.omega;
        let required = budget.k / budget.alpha;
        let rel_err = (delivered - required).abs() / required.abs().max(f64::MIN_POSITIVE);
        if rel_err > IDENTITY_REL_TOL {
            violations.push(Violation::IdentityMismatch {
                delivered_per_day: delivered,
                required_per_day: required,
                rel_err,
            });
        }
    }
    ViolationReport { violations }
}
