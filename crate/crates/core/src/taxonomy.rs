//! Stressor category labels shared by every table in the toolkit.
//!
//! The twelve labels below are a closed vocabulary: ingest rejects anything
//! else, and report rows are keyed by them. `CategoryScope` adds the `ALL`
//! pseudo-category used for cohort-level rows in points files and reports.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

/// Number of distinct stressor categories.
pub const CATEGORY_COUNT: usize = 12;

/// A stressor category attached to a responded prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StressorCategory {
    Work,
    HealthFatiguePain,
    Transportation,
    School,
    EmotionalTurmoil,
    SocialRelationships,
    FamilyIssues,
    EverydayDecisionMaking,
    PlayingGamesSports,
    Chores,
    FinancialProblem,
    Other,
}

/// Every category, in canonical order. `StressorCategory::index` is the
/// position in this array.
pub const ALL_CATEGORIES: [StressorCategory; CATEGORY_COUNT] = [
    StressorCategory::Work,
    StressorCategory::HealthFatiguePain,
    StressorCategory::Transportation,
    StressorCategory::School,
    StressorCategory::EmotionalTurmoil,
    StressorCategory::SocialRelationships,
    StressorCategory::FamilyIssues,
    StressorCategory::EverydayDecisionMaking,
    StressorCategory::PlayingGamesSports,
    StressorCategory::Chores,
    StressorCategory::FinancialProblem,
    StressorCategory::Other,
];

impl StressorCategory {
    /// The exact label used in CSV/JSON tables. Labels may contain commas;
    /// CSV writers quote them.
    pub fn label(self) -> &'static str {
        match self {
            StressorCategory::Work => "Work",
            StressorCategory::HealthFatiguePain => "Health, Fatigue, or Pain",
            StressorCategory::Transportation => "Transportation",
            StressorCategory::School => "School",
            StressorCategory::EmotionalTurmoil => "Emotional Turmoil",
            StressorCategory::SocialRelationships => "Social Relationships",
            StressorCategory::FamilyIssues => "Family Issues",
            StressorCategory::EverydayDecisionMaking => "Everyday Decision Making",
            StressorCategory::PlayingGamesSports => "Playing games/sports",
            StressorCategory::Chores => "Chores",
            StressorCategory::FinancialProblem => "Financial Problem",
            StressorCategory::Other => "Other",
        }
    }

    /// Position in [`ALL_CATEGORIES`].
    pub fn index(self) -> usize {
        ALL_CATEGORIES.iter().position(|c| *c == self).expect("category listed")
    }

    /// Parse an exact label; `None` for anything outside the vocabulary.
    pub fn from_label(label: &str) -> Option<Self> {
        ALL_CATEGORIES.iter().copied().find(|c| c.label() == label)
    }
}

impl fmt::Display for StressorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Error for a label outside the closed vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown stressor category label {label:?}")]
pub struct UnknownCategory {
    pub label: String,
}

impl FromStr for StressorCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_label(s).ok_or_else(|| UnknownCategory { label: s.to_string() })
    }
}

impl Serialize for StressorCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for StressorCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct LabelVisitor;
        impl Visitor<'_> for LabelVisitor {
            type Value = StressorCategory;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a stressor category label")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                StressorCategory::from_label(v)
                    .ok_or_else(|| E::custom(format!("unknown stressor category label {v:?}")))
            }
        }
        deserializer.deserialize_str(LabelVisitor)
    }
}

/// Label used for cohort-level (all categories pooled) rows.
pub const ALL_LABEL: &str = "ALL";

/// Either one category or the pooled `ALL` series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CategoryScope {
    All,
    Category(StressorCategory),
}

impl CategoryScope {
    pub fn label(self) -> &'static str {
        match self {
            CategoryScope::All => ALL_LABEL,
            CategoryScope::Category(c) => c.label(),
        }
    }
}

impl fmt::Display for CategoryScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CategoryScope {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == ALL_LABEL {
            Ok(CategoryScope::All)
        } else {
            StressorCategory::from_str(s).map(CategoryScope::Category)
        }
    }
}

impl Serialize for CategoryScope {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for CategoryScope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ScopeVisitor;
        impl Visitor<'_> for ScopeVisitor {
            type Value = CategoryScope;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a stressor category label or \"ALL\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                v.parse().map_err(|e: UnknownCategory| E::custom(e.to_string()))
            }
        }
        deserializer.deserialize_str(ScopeVisitor)
    }
}
