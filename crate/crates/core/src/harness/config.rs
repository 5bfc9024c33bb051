use super::HarnessError;
use crate::chang::attacks::MAX_COUNTING_GROUP;
use crate::chang::ChangParams;
use crate::postprocess::Database;
use crate::rng::{stream, DATABASE_STREAM};
use crate::stats::Sidedness;
use crate::yu::protocol::check_quota;
use crate::yu::YuParams;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    YuHonest,
    YuBobTwoStep,
    YuAliceInconclusiveChecks,
    ChangHonest,
    ChangBobCounting,
    ChangAliceStoreFake,
    Discriminate,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::YuHonest,
        Scenario::YuBobTwoStep,
        Scenario::YuAliceInconclusiveChecks,
        Scenario::ChangHonest,
        Scenario::ChangBobCounting,
        Scenario::ChangAliceStoreFake,
        Scenario::Discriminate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::YuHonest => "yu-honest",
            Scenario::YuBobTwoStep => "yu-bob-two-step",
            Scenario::YuAliceInconclusiveChecks => "yu-alice-inconclusive-checks",
            Scenario::ChangHonest => "chang-honest",
            Scenario::ChangBobCounting => "chang-bob-counting",
            Scenario::ChangAliceStoreFake => "chang-alice-store-fake",
            Scenario::Discriminate => "discriminate",
        }
    }

    fn is_yu_session(self) -> bool {
        matches!(
            self,
            Scenario::YuHonest | Scenario::YuAliceInconclusiveChecks
        )
    }

    fn is_chang(self) -> bool {
        matches!(
            self,
            Scenario::ChangHonest | Scenario::ChangBobCounting | Scenario::ChangAliceStoreFake
        )
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown scenario {s:?}")))
    }
}

/// Everything a run depends on. Echoed verbatim into the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub trials: usize,
    pub seed: u64,
    pub db_size: usize,
    pub substrings: usize,
    pub check_fraction: f64,
    pub eta: f64,
    pub group_size: usize,
    /// Raw key length (Yu) or rounds per trial (two-step, discriminate).
    pub raw_length: usize,
    /// Groups per trial for the Chang scenarios.
    pub group_count: usize,
    pub significance: f64,
    pub step3_side: Sidedness,
    pub database: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults: N = 1000, k = 4, n = 6, η = 0.5, significance 0.01,
    /// check fraction 0.5 for the cheating user and 0.1 otherwise.
    pub fn new(scenario: Scenario) -> Self {
        let db_size = 1000;
        let substrings = 4;
        let raw_length = match scenario {
            Scenario::YuBobTwoStep | Scenario::Discriminate => 100_000,
            _ => substrings * db_size,
        };
        let group_count = match scenario {
            Scenario::ChangBobCounting => 10_000,
            _ => ChangParams::new(0.5, 6, db_size, substrings).group_count,
        };
        Self {
            scenario,
            trials: 10,
            seed: 0,
            db_size,
            substrings,
            check_fraction: match scenario {
                Scenario::YuAliceInconclusiveChecks => 0.5,
                _ => 0.1,
            },
            eta: 0.5,
            group_size: 6,
            raw_length,
            group_count,
            significance: 0.01,
            step3_side: Sidedness::TwoSided,
            database: None,
        }
    }

    /// Recomputes sizes that default from N, k, n and η: the raw length of
    /// the Yu sessions and the batch size of the Chang sessions.
    pub fn refresh_derived(&mut self) {
        if self.scenario.is_yu_session() {
            self.raw_length = self.substrings * self.db_size;
        }
        if self.scenario.is_chang() && self.scenario != Scenario::ChangBobCounting {
            self.group_count =
                ChangParams::new(self.eta, self.group_size, self.db_size, self.substrings)
                    .group_count;
        }
    }

    pub fn yu_params(&self) -> YuParams {
        YuParams {
            raw_length: self.raw_length,
            substring_count: self.substrings,
            database_size: self.db_size,
            check_fraction: self.check_fraction,
            max_restarts: crate::yu::protocol::DEFAULT_MAX_RESTARTS,
        }
    }

    pub fn chang_params(&self) -> ChangParams {
        let mut p = ChangParams::new(self.eta, self.group_size, self.db_size, self.substrings);
        p.group_count = self.group_count;
        p.significance = self.significance;
        p.step3_side = self.step3_side;
        p
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.db_size == 0 || self.substrings == 0 {
            return bad("database size and substring count must be positive".into());
        }
        if !(0.0..1.0).contains(&self.check_fraction) {
            return bad(format!(
                "check fraction must lie in [0, 1), got {}",
                self.check_fraction
            ));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return bad(format!(
                "significance must lie in (0, 1), got {}",
                self.significance
            ));
        }
        if self.raw_length == 0 {
            return bad("raw length must be positive".into());
        }
        if self.scenario.is_yu_session() {
            self.yu_params()
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let left = self.raw_length - check_quota(self.check_fraction, self.raw_length);
            if left < self.db_size {
                return bad(format!(
                    "raw length {} leaves {left} bits after checking, fewer than the database size {}",
                    self.raw_length, self.db_size
                ));
            }
        }
        if self.scenario.is_chang() {
            self.chang_params()
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            if self.group_count == 0 {
                return bad("group count must be positive".into());
            }
        }
        if self.scenario == Scenario::ChangBobCounting && self.group_size > MAX_COUNTING_GROUP {
            return bad(format!(
                "counting inference supports groups of at most {MAX_COUNTING_GROUP}, got {}",
                self.group_size
            ));
        }
        if self.database.is_some() {
            let db = self.load_database()?;
            if db.len() != self.db_size {
                return bad(format!(
                    "database file holds {} items but db-size is {}",
                    db.len(),
                    self.db_size
                ));
            }
        }
        Ok(())
    }

    /// The file contents if given, otherwise bits drawn from a reserved stream.
    pub fn load_database(&self) -> Result<Database, HarnessError> {
        match &self.database {
            Some(path) => Database::load(path)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display()))),
            None => Ok(Database::random(
                self.db_size,
                &mut stream(self.seed, DATABASE_STREAM),
            )?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
            let json = serde_json::to_string(&sc).unwrap();
            assert_eq!(json, format!("\"{}\"", sc.name()));
        }
        assert!("nope".parse::<Scenario>().is_err());
    }

    #[test]
    fn defaults_validate() {
        for sc in Scenario::ALL {
            ExperimentConfig::new(sc).validate().unwrap();
        }
    }

    #[test]
    fn rejections() {
        let mut c = ExperimentConfig::new(Scenario::YuHonest);
        c.trials = 0;
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
        let mut c = ExperimentConfig::new(Scenario::ChangHonest);
        c.group_size = 3;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(Scenario::ChangBobCounting);
        c.group_size = 9;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(Scenario::YuAliceInconclusiveChecks);
        c.check_fraction = 0.9;
        assert!(c.validate().is_err());
        c.check_fraction = 1.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(Scenario::Discriminate);
        c.database = Some("/nonexistent/db.txt".into());
        assert!(c.validate().is_err());
    }
}
