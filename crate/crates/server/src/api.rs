//! Request and response documents of the HTTP API.

use std::collections::BTreeMap;

use rvss_core::asm::program::abi_name;
use rvss_core::asm::{Diagnostic, Symbol, UserArray};
use rvss_core::config::{ConfigError, CpuConfig};
use rvss_core::pipeline::{HaltReason, LogEntry, SimState};
use rvss_core::stats::StatsReport;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimulateRequest {
    pub config: CpuConfig,
    /// Assembly source.
    pub program: String,
    /// Arrays placed after the program's own data.
    #[serde(default)]
    pub memory: Vec<UserArray>,
    /// Label to start at; the first instruction when absent.
    #[serde(default)]
    pub entry: Option<String>,
    /// Cycle to simulate to, or -1 to run until the program halts.
    #[serde(default)]
    pub tick: i64,
    /// Cycle budget; capped by the server limit.
    #[serde(default)]
    pub max_cycles: Option<u64>,
}

/// One architectural register with its renaming state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct RegisterView {
    pub name: String,
    pub abi: String,
    pub value: u32,
    /// Speculative register the next reader would use.
    pub mapped_to: Option<u32>,
    /// Live speculative registers targeting this register.
    pub renamed_copies: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct StateView {
    /// The complete machine: blocks, in-flight instructions, cache and memory.
    #[schemars(with = "serde_json::Map<String, serde_json::Value>")]
    pub machine: SimState,
    pub registers: Vec<RegisterView>,
    pub symbol_table: BTreeMap<String, Symbol>,
}

impl StateView {
    pub fn new(machine: SimState) -> Self {
        let registers = (0..32u8)
            .map(|r| RegisterView {
                name: format!("x{r}"),
                abi: abi_name(r).to_string(),
                value: machine.arch_regs[r as usize],
                mapped_to: machine.rename_map[r as usize],
                renamed_copies: machine
                    .spec_regs
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.in_use && s.arch == r)
                    .map(|(i, _)| i as u32)
                    .collect(),
            })
            .collect();
        let symbol_table = machine.program.labels.clone();
        Self { machine, registers, symbol_table }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct SimulateResponse {
    pub state: StateView,
    pub stats: StatsReport,
    pub log: Vec<LogEntry>,
    pub halted: bool,
    pub halt_reason: Option<HaltReason>,
    pub cycle: u64,
    /// Run-to-end stopped at the cycle budget.
    pub budget_exhausted: bool,
}

impl SimulateResponse {
    pub fn new(machine: SimState, budget_exhausted: bool) -> Self {
        Self {
            stats: machine.report(),
            log: machine.log.clone(),
            halted: machine.is_halted(),
            halt_reason: machine.halted.clone(),
            cycle: machine.cycle,
            budget_exhausted,
            state: StateView::new(machine),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum OptimizationLevel {
    O0,
    O1,
    O2,
    O3,
}

impl OptimizationLevel {
    pub fn flag(self) -> &'static str {
        match self {
            Self::O0 => "-O0",
            Self::O1 => "-O1",
            Self::O2 => "-O2",
            Self::O3 => "-O3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CompileRequest {
    pub c_code: String,
    pub optimization_level: OptimizationLevel,
}

/// Assembly lines produced by one line of C.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct LineMapping {
    pub c_line: u32,
    pub asm_lines: Vec<u32>,
}

/// Exactly one of `asm` and `errors` is populated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct CompileResponse {
    pub asm: Option<String>,
    pub errors: Vec<Diagnostic>,
    pub mapping: Vec<LineMapping>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ParseAsmRequest {
    pub program: String,
    /// Supplies stack and memory sizes; the default configuration otherwise.
    #[serde(default)]
    pub config: Option<CpuConfig>,
    #[serde(default)]
    pub memory: Vec<UserArray>,
    #[serde(default)]
    pub entry: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct ParseAsmResponse {
    pub ok: bool,
    pub errors: Vec<Diagnostic>,
    pub symbol_table: BTreeMap<String, Symbol>,
}

/// Body of every non-2xx response except budget exhaustion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", tag = "error")]
pub enum ApiError {
    /// The request body is not a valid document.
    BadRequest { path: String, message: String },
    InvalidConfig { errors: Vec<ConfigError> },
    Assembly { errors: Vec<Diagnostic> },
    Memory { message: String },
    Unsupported { mnemonic: String, line: u32 },
    CompilerUnavailable { message: String },
    CompilerTimeout { seconds: u64 },
    Internal { message: String },
}
