//! Transfer tool capability matrix.

use alloc::collections::BTreeSet;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    Blaster,
    Bid,
    Dataflow,
}

impl Tool {
    pub const ALL: [Tool; 3] = [Tool::Blaster, Tool::Bid, Tool::Dataflow];

    pub const fn as_str(self) -> &'static str {
        match self {
            Tool::Blaster => "blaster",
            Tool::Bid => "bid",
            Tool::Dataflow => "dataflow",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Parquet,
    Lzo,
    Csv,
    Tsv,
}

impl DataFormat {
    pub const ALL: [DataFormat; 4] = [
        DataFormat::Parquet,
        DataFormat::Lzo,
        DataFormat::Csv,
        DataFormat::Tsv,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            DataFormat::Parquet => "parquet",
            DataFormat::Lzo => "lzo",
            DataFormat::Csv => "csv",
            DataFormat::Tsv => "tsv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCapability {
    pub tool: Tool,
    pub formats: BTreeSet<DataFormat>,
    pub idempotent: bool,
    pub requires_slots: bool,
    pub backfill: bool,
    pub partitioned: bool,
}

impl ToolCapability {
    pub fn of(tool: Tool) -> Self {
        use DataFormat::*;
        let (formats, idempotent, partitioned): (&[DataFormat], bool, bool) = match tool {
            Tool::Blaster => (&[Parquet, Lzo], true, true),
            Tool::Bid => (&[Parquet, Csv, Tsv], true, true),
            Tool::Dataflow => (&[Lzo], false, false),
        };
        ToolCapability {
            tool,
            formats: formats.iter().copied().collect(),
            idempotent,
            requires_slots: true,
            backfill: true,
            partitioned,
        }
    }

    pub fn table() -> [ToolCapability; 3] {
        Tool::ALL.map(ToolCapability::of)
    }
}
