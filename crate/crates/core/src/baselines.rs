//! Comparison schemes, each a variation of the full pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::orchestrator::{
    random_reflection, run_pipeline, GroupingMode, OrderRule, Pipeline, PowerMode, ReflectionMode, RunOutput,
};
use crate::seeds::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    RandomPhase,
    PureNoma,
    RandomPairing,
    LocationSic,
    EqualPower,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Proposed,
        Scheme::RandomPhase,
        Scheme::PureNoma,
        Scheme::RandomPairing,
        Scheme::LocationSic,
        Scheme::EqualPower,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::RandomPhase => "random_phase",
            Scheme::PureNoma => "pure_noma",
            Scheme::RandomPairing => "random_pairing",
            Scheme::LocationSic => "location_sic",
            Scheme::EqualPower => "equal_power",
        }
    }

    pub fn pipeline(self, cfg: &SystemConfig) -> Pipeline {
        let base = Pipeline::default();
        match self {
            Scheme::Proposed => base,
            Scheme::RandomPhase => {
                let phi = random_reflection(cfg.ris_elements, &mut stream(cfg.seed, Purpose::RandomPhase, 0));
                Pipeline { reflection: ReflectionMode::Frozen(phi), ..base }
            }
            Scheme::PureNoma => Pipeline { grouping: GroupingMode::Single, ..base },
            Scheme::RandomPairing => Pipeline { grouping: GroupingMode::Pairs { repair: false }, ..base },
            Scheme::LocationSic => Pipeline { order: OrderRule::Proximity, ..base },
            Scheme::EqualPower => Pipeline { power: PowerMode::Equal, ..base },
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL.into_iter().find(|x| x.id() == s).ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

pub fn run_scheme(scheme: Scheme, cfg: &SystemConfig, ch: &ChannelRealization) -> Result<RunOutput> {
    run_pipeline(cfg, ch, &scheme.pipeline(cfg))
}
