//! Live consultation sessions.
//!
//! A session tracks the rows consistent with the answers so far and asks the
//! chosen strategy for the next column on every step. In strict mode only the
//! recommended column may be answered, so the session walks exactly one
//! root-to-leaf path of the strategy's tree; free mode accepts any column not
//! yet inspected.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::ExactError;
use crate::heuristics::{EntropyRule, HeuristicConfig};
use crate::methods::{recommend, Method};
use crate::model::{Problem, SurvivorSet};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerMode {
    #[default]
    Strict,
    Free,
}

impl fmt::Display for AnswerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnswerMode::Strict => "strict",
            AnswerMode::Free => "free",
        })
    }
}

impl FromStr for AnswerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(AnswerMode::Strict),
            "free" => Ok(AnswerMode::Free),
            _ => Err(format!("unknown answer mode {s:?} (expected strict or free)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum Status {
    Active,
    Classified { label: String },
    NoMatch,
}

impl Status {
    pub fn is_settled(&self) -> bool {
        !matches!(self, Status::Active)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConsultError {
    #[error("session is already settled")]
    Settled,
    #[error("strict mode: column {column} answered but column {recommended} is recommended")]
    NotRecommended { column: usize, recommended: usize },
    #[error("column {0} was already inspected")]
    AlreadyObserved(usize),
    #[error("column {column} out of range (problem has {cols} columns)")]
    ColumnOutOfRange { column: usize, cols: usize },
    #[error("answers contradict every known pattern")]
    NoMatch,
    #[error(transparent)]
    Infeasible(#[from] ExactError),
}

/// One answered inspection. Columns are 0-based here; views convert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub column: usize,
    pub value: bool,
}

#[derive(Debug, Clone)]
pub struct Session {
    problem: Arc<Problem>,
    strategy: Method,
    mode: AnswerMode,
    config: HeuristicConfig,
    observed: Vec<Observation>,
    survivors: SurvivorSet,
    cost_so_far: f64,
    status: Status,
    recommendation: Option<usize>,
}

impl Session {
    /// Starts a session on the full problem. Fails when the strategy cannot
    /// run on this problem (the exact solver's size cap).
    pub fn new(
        problem: Arc<Problem>,
        strategy: Method,
        mode: AnswerMode,
        config: HeuristicConfig,
    ) -> Result<Self, ConsultError> {
        let survivors = problem.all_rows();
        let mut session = Session {
            problem,
            strategy,
            mode,
            config,
            observed: Vec::new(),
            survivors,
            cost_so_far: 0.0,
            status: Status::Active,
            recommendation: None,
        };
        session.settle()?;
        Ok(session)
    }

    fn settle(&mut self) -> Result<(), ConsultError> {
        self.recommendation = None;
        match self.survivors.len() {
            0 => self.status = Status::NoMatch,
            1 => {
                let row = self.survivors.first().expect("one survivor");
                self.status = Status::Classified {
                    label: self.problem.label(row).to_string(),
                };
            }
            _ => {
                self.recommendation =
                    recommend(&self.problem, &self.survivors, self.strategy, self.config)?;
                // Distinct rows always leave an informative column.
                debug_assert!(self.recommendation.is_some());
            }
        }
        Ok(())
    }

    /// Records `value` for `column` (0-based). Reaching an empty survivor set
    /// moves the session to [`Status::NoMatch`] and reports
    /// [`ConsultError::NoMatch`]; the answer is kept in the history.
    pub fn answer(&mut self, column: usize, value: bool) -> Result<(), ConsultError> {
        if self.status.is_settled() {
            return Err(ConsultError::Settled);
        }
        let cols = self.problem.num_cols();
        if column >= cols {
            return Err(ConsultError::ColumnOutOfRange { column, cols });
        }
        if self.observed.iter().any(|o| o.column == column) {
            return Err(ConsultError::AlreadyObserved(column));
        }
        if self.mode == AnswerMode::Strict {
            if let Some(recommended) = self.recommendation {
                if recommended != column {
                    return Err(ConsultError::NotRecommended {
                        column,
                        recommended,
                    });
                }
            }
        }
        self.observed.push(Observation { column, value });
        self.cost_so_far += self.problem.cost(column);
        self.survivors = self.problem.restrict(&self.survivors, column, value);
        self.settle()?;
        if self.status == Status::NoMatch {
            return Err(ConsultError::NoMatch);
        }
        Ok(())
    }

    pub fn problem(&self) -> &Arc<Problem> {
        &self.problem
    }

    pub fn strategy(&self) -> Method {
        self.strategy
    }

    pub fn mode(&self) -> AnswerMode {
        self.mode
    }

    pub fn config(&self) -> HeuristicConfig {
        self.config
    }

    pub fn observed(&self) -> &[Observation] {
        &self.observed
    }

    pub fn survivors(&self) -> &SurvivorSet {
        &self.survivors
    }

    pub fn cost_so_far(&self) -> f64 {
        self.cost_so_far
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    /// Next column to inspect (0-based); `None` once settled.
    pub fn recommendation(&self) -> Option<usize> {
        self.recommendation
    }

    /// Renormalized priors over the survivors, in row order. Empty after a
    /// no-match.
    pub fn posterior(&self) -> Vec<(usize, f64)> {
        if self.survivors.is_empty() {
            return Vec::new();
        }
        self.problem.conditional_weights(&self.survivors)
    }

    /// Serializable snapshot with 1-based columns.
    pub fn view(&self) -> SessionView {
        let problem = &self.problem;
        let column_label = |j: usize| {
            problem
                .column_names()
                .map_or_else(|| format!("property {}", j + 1), |names| names[j].clone())
        };
        SessionView {
            strategy: self.strategy,
            mode: self.mode,
            entropy_rule: self.config.entropy_rule,
            observed: self
                .observed
                .iter()
                .map(|o| ObservedView {
                    column: o.column + 1,
                    name: column_label(o.column),
                    value: o.value,
                    cost: problem.cost(o.column),
                })
                .collect(),
            posterior: self
                .posterior()
                .into_iter()
                .map(|(row, probability)| PosteriorEntry {
                    row: row + 1,
                    label: problem.label(row).to_string(),
                    probability,
                })
                .collect(),
            cost_so_far: self.cost_so_far,
            status: self.status.clone(),
            recommendation: self.recommendation.map(|j| Recommendation {
                column: j + 1,
                name: column_label(j),
                cost: problem.cost(j),
                prompt: format!("Is {} present?", column_label(j)),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    pub strategy: Method,
    pub mode: AnswerMode,
    pub entropy_rule: EntropyRule,
    pub observed: Vec<ObservedView>,
    pub posterior: Vec<PosteriorEntry>,
    pub cost_so_far: f64,
    pub status: Status,
    pub recommendation: Option<Recommendation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedView {
    pub column: usize,
    pub name: String,
    pub value: bool,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEntry {
    pub row: usize,
    pub label: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub column: usize,
    pub name: String,
    pub cost: f64,
    pub prompt: String,
}
