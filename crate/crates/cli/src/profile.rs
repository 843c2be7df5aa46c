//! Strategy profiles as explicit tables: an initial stop per outcome and a
//! reaction per observed stopping time(s) and outcome.

use serde::{Deserialize, Serialize};

use stopgame_core::strategy::validate_from;
use stopgame_core::{FilteredSpace, StopRule, StoppingTime, StrategyOrder2, StrategyOrder3};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategyTable {
    Order3 {
        initial: Vec<usize>,
        react_a: Vec<Vec<usize>>,
        react_b: Vec<Vec<usize>>,
        react_ab: Vec<Vec<Vec<usize>>>,
    },
    Order2 {
        initial: Vec<usize>,
        react: Vec<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub strategies: Vec<StrategyTable>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Profile {
    Two([StrategyOrder2; 2]),
    Three([StrategyOrder3; 3]),
}

fn raw(times: &[StoppingTime]) -> Vec<Vec<usize>> {
    times.iter().map(|t| t.values().to_vec()).collect()
}

fn cook(rows: Vec<Vec<usize>>) -> Vec<StoppingTime> {
    rows.into_iter().map(StoppingTime).collect()
}

impl Profile {
    pub fn players(&self) -> usize {
        match self {
            Profile::Two(_) => 2,
            Profile::Three(_) => 3,
        }
    }

    pub fn rules(&self) -> Vec<&dyn StopRule> {
        match self {
            Profile::Two(p) => p.iter().map(|s| s as &dyn StopRule).collect(),
            Profile::Three(p) => p.iter().map(|s| s as &dyn StopRule).collect(),
        }
    }

    pub fn to_file(&self) -> ProfileFile {
        let strategies = match self {
            Profile::Two(p) => p
                .iter()
                .map(|s| StrategyTable::Order2 { initial: s.initial.values().to_vec(), react: raw(&s.react) })
                .collect(),
            Profile::Three(p) => p
                .iter()
                .map(|s| StrategyTable::Order3 {
                    initial: s.initial.values().to_vec(),
                    react_a: raw(&s.react_a),
                    react_b: raw(&s.react_b),
                    react_ab: s.react_ab.iter().map(|row| raw(row)).collect(),
                })
                .collect(),
        };
        ProfileFile { strategies }
    }

    /// Checks table shapes and stopping-time properties from `start`.
    pub fn from_file(file: ProfileFile, space: &FilteredSpace, start: &StoppingTime) -> CliResult<Profile> {
        let n = space.num_outcomes();
        let times = space.num_times();
        let mut problems = Vec::new();
        let row_ok = |row: &Vec<usize>| row.len() == n && row.iter().all(|&k| k < times);
        for (i, s) in file.strategies.iter().enumerate() {
            let ok = match s {
                StrategyTable::Order2 { initial, react } => row_ok(initial) && react.len() == times && react.iter().all(row_ok),
                StrategyTable::Order3 { initial, react_a, react_b, react_ab } => {
                    row_ok(initial)
                        && react_a.len() == times
                        && react_b.len() == times
                        && react_a.iter().chain(react_b).all(row_ok)
                        && react_ab.len() == times
                        && react_ab.iter().all(|r| r.len() == times && r.iter().all(row_ok))
                }
            };
            if !ok {
                problems.push(format!("strategy {i}: tables must have {times} rows of {n} grid indices below {times}"));
            }
        }
        if !problems.is_empty() {
            return Err(CliError::Validation(problems));
        }
        let order2 = file.strategies.iter().all(|s| matches!(s, StrategyTable::Order2 { .. }));
        let order3 = file.strategies.iter().all(|s| matches!(s, StrategyTable::Order3 { .. }));
        let profile = match file.strategies.len() {
            2 if order2 => {
                let v: Vec<StrategyOrder2> = file
                    .strategies
                    .into_iter()
                    .map(|s| match s {
                        StrategyTable::Order2 { initial, react } => StrategyOrder2 { initial: StoppingTime(initial), react: cook(react) },
                        StrategyTable::Order3 { .. } => unreachable!(),
                    })
                    .collect();
                Profile::Two(v.try_into().expect("two strategies"))
            }
            3 if order3 => {
                let v: Vec<StrategyOrder3> = file
                    .strategies
                    .into_iter()
                    .map(|s| match s {
                        StrategyTable::Order3 { initial, react_a, react_b, react_ab } => StrategyOrder3 {
                            initial: StoppingTime(initial),
                            react_a: cook(react_a),
                            react_b: cook(react_b),
                            react_ab: react_ab.into_iter().map(cook).collect(),
                        },
                        StrategyTable::Order2 { .. } => unreachable!(),
                    })
                    .collect();
                Profile::Three(v.try_into().expect("three strategies"))
            }
            k => {
                return Err(CliError::Validation(vec![format!(
                    "profile: {k} strategies of mixed or wrong order; expected 2 order-2 or 3 order-3 tables"
                )]))
            }
        };
        for (i, v) in profile.violations(space, start).into_iter().enumerate() {
            if !v.is_empty() {
                problems.push(format!("strategy {i}: {v:?}"));
            }
        }
        if !problems.is_empty() {
            return Err(CliError::Validation(problems));
        }
        Ok(profile)
    }

    fn violations(&self, space: &FilteredSpace, start: &StoppingTime) -> Vec<Vec<stopgame_core::strategy::StrategyViolation>> {
        match self {
            Profile::Two(p) => p.iter().map(|s| validate_from(s, s.validate(space), start)).collect(),
            Profile::Three(p) => p.iter().map(|s| validate_from(s, s.validate(space), start)).collect(),
        }
    }
}
