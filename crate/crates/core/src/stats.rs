//! Runtime event counters and the derived statistics report.

use std::collections::BTreeMap;
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::asm::AsmProgram;
use crate::config::CpuConfig;
use crate::isa::{InstructionType, IsaSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatEvent {
    Fetch,
    Decode,
    Commit,
    Flush,
    BranchResolved,
    BranchMispredicted,
    FuBusy,
    CacheHit,
    CacheMiss,
    BytesWritten,
    FpOpCommitted,
}

impl StatEvent {
    pub const ALL: [StatEvent; 11] = [
        Self::Fetch,
        Self::Decode,
        Self::Commit,
        Self::Flush,
        Self::BranchResolved,
        Self::BranchMispredicted,
        Self::FuBusy,
        Self::CacheHit,
        Self::CacheMiss,
        Self::BytesWritten,
        Self::FpOpCommitted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fetch => "fetch",
            Self::Decode => "decode",
            Self::Commit => "commit",
            Self::Flush => "flush",
            Self::BranchResolved => "branchResolved",
            Self::BranchMispredicted => "branchMispredicted",
            Self::FuBusy => "fuBusy",
            Self::CacheHit => "cacheHit",
            Self::CacheMiss => "cacheMiss",
            Self::BytesWritten => "bytesWritten",
            Self::FpOpCommitted => "fpOpCommitted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown statistics event `{0}`")]
pub struct UnknownEvent(pub String);

impl FromStr for StatEvent {
    type Err = UnknownEvent;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| UnknownEvent(s.to_string()))
    }
}

/// Extra data attached to an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Payload<'a> {
    #[default]
    None,
    /// Instruction type of a committed instruction.
    Type(InstructionType),
    /// Functional unit name.
    Unit(&'a str),
    Bytes(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct StatsCounters {
    pub cycles: u64,
    pub fetched: u64,
    pub decoded: u64,
    pub committed: u64,
    pub flushes: u64,
    pub branches_resolved: u64,
    pub branches_mispredicted: u64,
    pub fu_busy_cycles: BTreeMap<String, u64>,
    pub cache_accesses: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub bytes_written: u64,
    pub static_mix: BTreeMap<String, u64>,
    pub dynamic_mix: BTreeMap<String, u64>,
    pub fp_ops_committed: u64,
}

impl StatsCounters {
    pub fn new(static_mix: BTreeMap<String, u64>) -> Self {
        Self { static_mix, dynamic_mix: empty_mix(), ..Self::default() }
    }

    pub fn record(&mut self, event: StatEvent, payload: Payload<'_>) {
        match event {
            StatEvent::Fetch => self.fetched += 1,
            StatEvent::Decode => self.decoded += 1,
            StatEvent::Commit => {
                self.committed += 1;
                if let Payload::Type(kind) = payload {
                    *self.dynamic_mix.entry(kind.as_str().to_string()).or_default() += 1;
                }
            }
            StatEvent::Flush => self.flushes += 1,
            StatEvent::BranchResolved => self.branches_resolved += 1,
            StatEvent::BranchMispredicted => self.branches_mispredicted += 1,
            StatEvent::FuBusy => {
                if let Payload::Unit(name) = payload {
                    *self.fu_busy_cycles.entry(name.to_string()).or_default() += 1;
                }
            }
            StatEvent::CacheHit => {
                self.cache_accesses += 1;
                self.cache_hits += 1;
            }
            StatEvent::CacheMiss => {
                self.cache_accesses += 1;
                self.cache_misses += 1;
            }
            StatEvent::BytesWritten => {
                if let Payload::Bytes(n) = payload {
                    self.bytes_written += n;
                }
            }
            StatEvent::FpOpCommitted => self.fp_ops_committed += 1,
        }
    }

    /// Records an event given by name.
    pub fn record_named(&mut self, event: &str, payload: Payload<'_>) -> Result<(), UnknownEvent> {
        self.record(event.parse()?, payload);
        Ok(())
    }
}

fn empty_mix() -> BTreeMap<String, u64> {
    InstructionType::ALL.iter().map(|t| (t.as_str().to_string(), 0)).collect()
}

/// Instruction counts by type over the program text.
pub fn static_mix(program: &AsmProgram, isa: &IsaSet) -> BTreeMap<String, u64> {
    let mut mix = empty_mix();
    for instruction in &program.instructions {
        if let Some(def) = isa.get(&instruction.mnemonic) {
            *mix.entry(def.instruction_type.as_str().to_string()).or_default() += 1;
        }
    }
    mix
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct StatsReport {
    #[serde(flatten)]
    pub counters: StatsCounters,
    pub ipc: f64,
    pub prediction_accuracy: f64,
    pub hit_rate: f64,
    pub flops: f64,
    pub wall_time_seconds: f64,
    pub per_unit_utilization: BTreeMap<String, f64>,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn derive_report(counters: &StatsCounters, config: &CpuConfig) -> StatsReport {
    let wall_time = counters.cycles as f64 / config.core_hz as f64;
    StatsReport {
        ipc: ratio(counters.committed, counters.cycles),
        prediction_accuracy: 1.0 - counters.branches_mispredicted as f64 / counters.branches_resolved.max(1) as f64,
        hit_rate: ratio(counters.cache_hits, counters.cache_accesses.max(1)),
        flops: if wall_time > 0.0 { counters.fp_ops_committed as f64 / wall_time } else { 0.0 },
        wall_time_seconds: wall_time,
        per_unit_utilization: counters
            .fu_busy_cycles
            .iter()
            .map(|(unit, busy)| (unit.clone(), ratio(*busy, counters.cycles)))
            .collect(),
        counters: counters.clone(),
    }
}
