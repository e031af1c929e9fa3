use std::fmt;
use std::str::FromStr;

use cgrl_agent::ArchFlags;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    Cgrl,
    GcnDqn,
    GcnDoubleDqn,
    GcnDuelingDqn,
    GcnD3qn,
    GatD3qn,
    GcnGatD3qn,
}

/// Architecture and trainer switches of one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelFlags {
    pub arch: ArchFlags,
    pub cdrl: bool,
}

const fn flags(use_gcn: bool, use_gat: bool, use_dueling: bool, use_double: bool, cdrl: bool) -> ModelFlags {
    ModelFlags { arch: ArchFlags { use_gcn, use_gat, use_dueling, use_double }, cdrl }
}

impl ModelId {
    pub const ALL: [ModelId; 7] = [
        ModelId::Cgrl,
        ModelId::GcnDqn,
        ModelId::GcnDoubleDqn,
        ModelId::GcnDuelingDqn,
        ModelId::GcnD3qn,
        ModelId::GatD3qn,
        ModelId::GcnGatD3qn,
    ];

    pub fn flags(self) -> ModelFlags {
        match self {
            ModelId::Cgrl => flags(true, true, true, true, true),
            ModelId::GcnDqn => flags(true, false, false, false, false),
            ModelId::GcnDoubleDqn => flags(true, false, false, true, false),
            ModelId::GcnDuelingDqn => flags(true, false, true, false, false),
            ModelId::GcnD3qn => flags(true, false, true, true, false),
            ModelId::GatD3qn => flags(false, true, true, true, false),
            ModelId::GcnGatD3qn => flags(true, true, true, true, false),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::Cgrl => "cgrl",
            ModelId::GcnDqn => "gcn-dqn",
            ModelId::GcnDoubleDqn => "gcn-double-dqn",
            ModelId::GcnDuelingDqn => "gcn-dueling-dqn",
            ModelId::GcnD3qn => "gcn-d3qn",
            ModelId::GatD3qn => "gat-d3qn",
            ModelId::GcnGatD3qn => "gcn-gat-d3qn",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown model id {s:?}")))
    }
}
