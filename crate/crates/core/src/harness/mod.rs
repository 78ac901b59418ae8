//! Experiment orchestration: session building, the four experiment
//! families on both substrates, window ablation, cross-day transfer, chance
//! baselines, state export and PCA embedding.
//!
//! Every stochastic job draws from a named substream of the root seed, so
//! results do not depend on thread count or scheduling.

mod config;
mod experiments;
mod export;
mod pca;
mod session;

pub use config::{FamilyConfig, HarnessConfig, ProtocolConfig};
pub use experiments::{
    ablate_window, cross_day_eval, export_states, grow_summary, run_family, run_shuffle_baseline, CrossDayResult,
    CurvePoint, DayTransfer, ExperimentReport, GrowSummary, SessionResult, SubstrateResult, Summary, Timing,
};
pub use export::{read_states_csv, rows_of, strip_timing, write_report, write_run_config, write_states_csv, StateRow};
pub use pca::{pca_embed, Embedding};
pub use session::{
    ar_dataset, calibrate_noise, canonical_patterns, delivery_order, load_mnist_subset, n_classes, record_session,
    run_session, session_plan, SessionPlan, SessionRecord,
};

use crate::ar::ArError;
use crate::culture::CultureError;
use crate::dsp::DspError;
use crate::patterns::PatternError;
use crate::readout::ReadoutError;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Culture(#[from] CultureError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Readout(#[from] ReadoutError),
    #[error(transparent)]
    Ar(#[from] ArError),
    #[error("stimulus {index}: {source}")]
    Stimulus { index: usize, source: CultureError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Pointwise,
    Bars,
    Clock,
    Mnist,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Pointwise, Family::Bars, Family::Clock, Family::Mnist];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Pointwise => "pointwise",
            Family::Bars => "bars",
            Family::Clock => "clock",
            Family::Mnist => "mnist",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown family {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Substrate {
    Culture,
    Ar,
    Both,
}

impl Substrate {
    pub fn culture(&self) -> bool {
        matches!(self, Substrate::Culture | Substrate::Both)
    }

    pub fn ar(&self) -> bool {
        matches!(self, Substrate::Ar | Substrate::Both)
    }
}

impl FromStr for Substrate {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "culture" => Ok(Substrate::Culture),
            "ar" => Ok(Substrate::Ar),
            "both" => Ok(Substrate::Both),
            other => Err(HarnessError::Config(format!("unknown substrate {other:?}"))),
        }
    }
}
