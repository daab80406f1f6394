//! The out-of-order engine and its step manager.
//!
//! A [`SimState`] is the whole machine at one cycle. [`SimState::step`]
//! advances it by one clock; backward stepping is a fresh replay
//! ([`state_at`]).

mod step;

use std::collections::VecDeque;
use std::sync::Arc;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::asm::{assemble, AsmError, AsmProgram, AssembleOptions, UserArray};
use crate::config::{ConfigError, CpuConfig};
use crate::isa::{ExceptionRecord, FuClass, InstructionType, IsaSet, SP};
use crate::memsys::{MemoryError, MemorySystem};
use crate::predictor::Predictor;
use crate::stats::{derive_report, static_mix, StatsCounters, StatsReport};

/// Cycle at which an instruction completed each phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct Stamps {
    pub fetch: Option<u64>,
    pub decode: Option<u64>,
    pub issue: Option<u64>,
    pub execute_start: Option<u64>,
    pub execute_done: Option<u64>,
    pub writeback: Option<u64>,
    pub commit: Option<u64>,
}

impl Stamps {
    /// Present stamps in pipeline order.
    pub fn present(&self) -> Vec<u64> {
        [self.fetch, self.decode, self.issue, self.execute_start, self.execute_done, self.writeback, self.commit]
            .into_iter()
            .flatten()
            .collect()
    }
}

/// One argument of an in-flight instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Source {
    Immediate { value: i32 },
    /// A register operand whose value has been captured.
    Value { reg: u8, value: u32 },
    /// Waiting for the speculative register `tag`.
    Pending { reg: u8, tag: u32 },
    /// The destination register.
    Dest { reg: u8 },
}

impl Source {
    pub fn is_ready(&self) -> bool {
        !matches!(self, Source::Pending { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct Destination {
    pub arch: u8,
    /// Speculative register, absent for x0.
    pub tag: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct MemAccess {
    pub address: u32,
    pub width: u8,
    pub signed: bool,
    pub store: bool,
    pub value: Option<u32>,
}

/// One in-flight instruction instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct SimCode {
    pub id: u64,
    pub pc: u32,
    pub mnemonic: String,
    pub source: String,
    pub line: u32,
    pub instruction_type: InstructionType,
    pub fu_class: FuClass,
    pub operands: Vec<Source>,
    pub dest: Option<Destination>,
    pub predicted_taken: bool,
    pub predicted_next: u32,
    pub taken: Option<bool>,
    pub actual_next: Option<u32>,
    pub result: Option<u32>,
    pub memory: Option<MemAccess>,
    pub exception: Option<ExceptionRecord>,
    pub mispredicted: bool,
    /// Ready to commit.
    pub done: bool,
    pub stamps: Stamps,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct SpecRegister {
    pub arch: u8,
    pub value: u32,
    pub valid: bool,
    pub ref_count: u32,
    pub in_use: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct IssueWindow {
    pub class: FuClass,
    /// Instruction ids in program order.
    pub entries: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct FunctionalUnit {
    pub name: String,
    pub class: FuClass,
    /// Index into the configuration's unit list.
    pub config_index: usize,
    pub busy_until: u64,
    pub current: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct LoadEntry {
    pub id: u64,
    pub address: Option<u32>,
    pub width: u8,
    pub issued: bool,
    pub completes: Option<u64>,
    pub value: Option<u32>,
    pub forwarded_from: Option<u64>,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct StoreEntry {
    pub id: u64,
    pub address: Option<u32>,
    pub width: u8,
    pub value: Option<u32>,
    pub committed: bool,
    pub completes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct LogEntry {
    pub cycle: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum HaltReason {
    /// Fetch left the program and the pipeline drained.
    EndOfCode,
    /// The outermost routine returned.
    MainReturned,
    /// A fatal exception reached commit.
    Fault { pc: u32, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InitError {
    #[error("invalid configuration: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Config(Vec<ConfigError>),
    #[error("{0}")]
    Assembly(#[from] AsmError),
    #[error("memory: {0}")]
    Memory(#[from] MemoryError),
    #[error("line {line}: no functional unit executes `{mnemonic}`")]
    Unsupported { mnemonic: String, line: u32 },
}

/// Outcome of [`SimState::run_to_end`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub enum RunOutcome {
    Halted,
    BudgetExhausted,
}

fn default_isa() -> Arc<IsaSet> {
    IsaSet::shared_default()
}

/// Full processor state at one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimState {
    pub config: CpuConfig,
    pub program: Arc<AsmProgram>,
    #[serde(skip, default = "default_isa")]
    isa: Arc<IsaSet>,
    pub cycle: u64,
    pub pc_fetch: u32,
    /// Fetch is stalled before this cycle.
    pub fetch_resume: u64,
    pub fetch_buffer: VecDeque<SimCode>,
    pub rob: VecDeque<SimCode>,
    pub windows: Vec<IssueWindow>,
    pub units: Vec<FunctionalUnit>,
    pub load_buffer: VecDeque<LoadEntry>,
    pub store_buffer: VecDeque<StoreEntry>,
    pub arch_regs: Vec<u32>,
    pub spec_regs: Vec<SpecRegister>,
    pub rename_map: Vec<Option<u32>>,
    pub memsys: MemorySystem,
    pub predictor: Predictor,
    pub stats: StatsCounters,
    pub log: Vec<LogEntry>,
    pub halted: Option<HaltReason>,
    pub call_depth: u64,
    pub next_id: u64,
    /// Instructions fetched and committed in the last step.
    pub last_fetched: u32,
    pub last_committed: u32,
}

/// Assembles `source` with the stack and memory sizes of `config`.
pub fn assemble_for(config: &CpuConfig, source: &str, entry: Option<&str>, arrays: &[UserArray]) -> Result<AsmProgram, AsmError> {
    let options = AssembleOptions {
        stack_size: config.call_stack_size,
        memory_capacity: config.memory_capacity,
        entry: entry.map(str::to_string),
        arrays: arrays.to_vec(),
    };
    assemble(source, &IsaSet::shared_default(), &options)
}

impl SimState {
    /// Builds the machine at cycle 0. `memory_image` is applied first, then
    /// the program's data segment.
    pub fn new(config: CpuConfig, program: Arc<AsmProgram>, memory_image: Option<&[u8]>) -> Result<Self, InitError> {
        let isa = IsaSet::shared_default();
        let errors = config.validate(&isa);
        if !errors.is_empty() {
            return Err(InitError::Config(errors));
        }
        for instruction in &program.instructions {
            let def = isa.get(&instruction.mnemonic).expect("assembled mnemonics are defined");
            if config.units_for(def.fu_class, &instruction.mnemonic).next().is_none() {
                return Err(InitError::Unsupported { mnemonic: instruction.mnemonic.clone(), line: instruction.line });
            }
        }

        let mut memsys = MemorySystem::new(&config);
        if let Some(image) = memory_image {
            memsys.memory.load_image(image)?;
        }
        memsys.memory.write(program.data_base as u64, &program.data)?;

        let mut per_class = std::collections::BTreeMap::new();
        let units = config
            .fu_list
            .iter()
            .enumerate()
            .map(|(i, fu)| {
                let n = per_class.entry(fu.class.as_str()).or_insert(0u32);
                let name = format!("{}{}", fu.class.as_str(), n);
                *n += 1;
                FunctionalUnit { name, class: fu.class, config_index: i, busy_until: 0, current: None }
            })
            .collect();

        let mut arch_regs = vec![0u32; 32];
        arch_regs[SP as usize] = program.stack_top;
        let spec = SpecRegister { arch: 0, value: 0, valid: false, ref_count: 0, in_use: false };
        Ok(Self {
            windows: FuClass::ALL.iter().map(|&class| IssueWindow { class, entries: Vec::new() }).collect(),
            units,
            spec_regs: vec![spec; config.rename_file_size as usize],
            rename_map: vec![None; 32],
            predictor: Predictor::new(&config.predictor),
            stats: StatsCounters::new(static_mix(&program, &isa)),
            pc_fetch: program.entry_point,
            memsys,
            arch_regs,
            cycle: 0,
            fetch_resume: 0,
            fetch_buffer: VecDeque::new(),
            rob: VecDeque::new(),
            load_buffer: VecDeque::new(),
            store_buffer: VecDeque::new(),
            log: Vec::new(),
            halted: None,
            call_depth: 0,
            next_id: 0,
            last_fetched: 0,
            last_committed: 0,
            isa,
            config,
            program,
        })
    }

    pub fn isa(&self) -> &IsaSet {
        &self.isa
    }

    pub fn is_halted(&self) -> bool {
        self.halted.is_some()
    }

    /// Steps until halted or `max_cycles` more cycles have elapsed.
    pub fn run_to_end(&mut self, max_cycles: u64) -> RunOutcome {
        let mut budget = max_cycles;
        while !self.is_halted() {
            if budget == 0 {
                return RunOutcome::BudgetExhausted;
            }
            self.step();
            budget -= 1;
        }
        RunOutcome::Halted
    }

    pub fn report(&self) -> StatsReport {
        derive_report(&self.stats, &self.config)
    }

    /// Data memory as the program observes it (dirty cache lines included).
    pub fn memory_snapshot(&self) -> Vec<u8> {
        self.memsys.snapshot()
    }

    /// Number of speculative registers currently allocated.
    pub fn live_spec_registers(&self) -> usize {
        self.spec_regs.iter().filter(|r| r.in_use).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Backward stepping primitive: a fresh machine advanced by `t` cycles
/// (or to its halt, whichever comes first).
pub fn state_at(config: &CpuConfig, program: Arc<AsmProgram>, memory_image: Option<&[u8]>, t: u64) -> Result<SimState, InitError> {
    let mut state = SimState::new(config.clone(), program, memory_image)?;
    while state.cycle < t && !state.is_halted() {
        state.step();
    }
    Ok(state)
}
