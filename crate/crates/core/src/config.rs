//! Architecture description: buffers, functional units, cache, predictor,
//! memory and clocks.

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::isa::{FuClass, IsaSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum Replacement {
    #[serde(rename = "LRU")]
    Lru,
    #[serde(rename = "FIFO")]
    Fifo,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub enum WritePolicy {
    WriteBack,
    WriteThrough,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CacheConfig {
    pub enabled: bool,
    pub line_count: u32,
    /// Bytes per line; a power of two.
    pub line_size: u32,
    pub associativity: u32,
    pub replacement: Replacement,
    pub write_policy: WritePolicy,
    /// Core cycles paid by every access.
    pub access_delay: u32,
    /// Extra core cycles paid when a line is replaced.
    pub line_replacement_delay: u32,
}

impl CacheConfig {
    pub fn set_count(&self) -> u32 {
        self.line_count / self.associativity.max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub enum PredictorType {
    ZeroBit,
    OneBit,
    TwoBit,
}

impl PredictorType {
    /// Largest counter value.
    pub fn max_state(self) -> u8 {
        match self {
            Self::ZeroBit | Self::OneBit => 1,
            Self::TwoBit => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub enum HistoryKind {
    Local,
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PredictorConfig {
    pub btb_size: u32,
    pub pht_size: u32,
    pub predictor_type: PredictorType,
    /// Initial counter value. For the zero-bit predictor: 0 = never taken, 1 = always taken.
    pub default_state: u8,
    pub history: HistoryKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FuConfig {
    pub class: FuClass,
    /// Latency in cycles for operations without a table entry.
    pub latency: u32,
    /// Mnemonics this unit executes; every mnemonic of its class when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supported_ops: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub latency_table: BTreeMap<String, u32>,
}

impl FuConfig {
    pub fn new(class: FuClass, latency: u32) -> Self {
        Self { class, latency, supported_ops: None, latency_table: BTreeMap::new() }
    }

    pub fn supports(&self, class: FuClass, mnemonic: &str) -> bool {
        self.class == class && self.supported_ops.as_ref().is_none_or(|ops| ops.iter().any(|o| o == mnemonic))
    }

    pub fn latency_of(&self, mnemonic: &str) -> u32 {
        self.latency_table.get(mnemonic).copied().unwrap_or(self.latency)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CpuConfig {
    pub name: String,
    pub core_hz: u64,
    pub mem_hz: u64,
    pub rob_size: u32,
    pub fetch_width: u32,
    pub commit_width: u32,
    pub flush_penalty: u32,
    /// Predicted-taken redirects fetch may follow in one cycle.
    pub jumps_per_cycle: u32,
    pub fu_list: Vec<FuConfig>,
    pub cache: CacheConfig,
    pub load_buffer_size: u32,
    pub store_buffer_size: u32,
    /// Main memory latencies in memory-clock cycles.
    pub load_latency: u32,
    pub store_latency: u32,
    /// Bytes reserved for the call stack at the bottom of memory.
    pub call_stack_size: u32,
    pub rename_file_size: u32,
    pub predictor: PredictorConfig,
    pub memory_capacity: u32,
    pub prng_seed: u64,
}

/// Largest memory the simulator accepts.
pub const MAX_MEMORY_CAPACITY: u32 = 16 * 1024 * 1024;

impl Default for CpuConfig {
    fn default() -> Self {
        let slow_ops = [("mul", 3), ("mulh", 3), ("mulhsu", 3), ("mulhu", 3), ("div", 10), ("divu", 10), ("rem", 10), ("remu", 10)];
        let fx = FuConfig {
            latency_table: slow_ops.iter().map(|(m, l)| (m.to_string(), *l)).collect(),
            ..FuConfig::new(FuClass::Fx, 1)
        };
        Self {
            name: "default".into(),
            core_hz: 100_000_000,
            mem_hz: 100_000_000,
            rob_size: 32,
            fetch_width: 2,
            commit_width: 2,
            flush_penalty: 1,
            jumps_per_cycle: 1,
            fu_list: vec![fx.clone(), fx, FuConfig::new(FuClass::Branch, 1), FuConfig::new(FuClass::Ls, 1)],
            cache: CacheConfig {
                enabled: true,
                line_count: 16,
                line_size: 32,
                associativity: 2,
                replacement: Replacement::Lru,
                write_policy: WritePolicy::WriteBack,
                access_delay: 1,
                line_replacement_delay: 10,
            },
            load_buffer_size: 8,
            store_buffer_size: 8,
            load_latency: 10,
            store_latency: 10,
            call_stack_size: 512,
            rename_file_size: 32,
            predictor: PredictorConfig {
                btb_size: 16,
                pht_size: 16,
                predictor_type: PredictorType::TwoBit,
                default_state: 1,
                history: HistoryKind::Global,
            },
            memory_capacity: 64 * 1024,
            prng_seed: 42,
        }
    }
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Document-level failure of [`CpuConfig::from_json`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, JsonSchema)]
#[error("{path}: {message}")]
pub struct ConfigParseError {
    /// Path of the offending field, `.` for the document root.
    pub path: String,
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl CpuConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigParseError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ConfigParseError { path, line: inner.line(), column: inner.column(), message: inner.to_string() }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Every constraint violation; empty iff the config is usable with `isa`.
    pub fn validate(&self, isa: &IsaSet) -> Vec<ConfigError> {
        let mut errors = Vec::new();
        let mut at_least_one = |field: &str, value: u64| {
            if value == 0 {
                errors.push(ConfigError::new(field, "must be at least 1"));
            }
        };
        at_least_one("coreHz", self.core_hz);
        at_least_one("memHz", self.mem_hz);
        at_least_one("robSize", self.rob_size.into());
        at_least_one("fetchWidth", self.fetch_width.into());
        at_least_one("commitWidth", self.commit_width.into());
        at_least_one("jumpsPerCycle", self.jumps_per_cycle.into());
        at_least_one("loadBufferSize", self.load_buffer_size.into());
        at_least_one("storeBufferSize", self.store_buffer_size.into());
        at_least_one("renameFileSize", self.rename_file_size.into());
        at_least_one("memoryCapacity", self.memory_capacity.into());
        at_least_one("predictor.btbSize", self.predictor.btb_size.into());
        at_least_one("predictor.phtSize", self.predictor.pht_size.into());
        at_least_one("cache.lineCount", self.cache.line_count.into());
        at_least_one("cache.associativity", self.cache.associativity.into());

        if self.memory_capacity > MAX_MEMORY_CAPACITY {
            errors.push(ConfigError::new("memoryCapacity", format!("must be at most {MAX_MEMORY_CAPACITY}")));
        }
        if self.call_stack_size > self.memory_capacity {
            errors.push(ConfigError::new("callStackSize", "exceeds memoryCapacity"));
        }
        if !self.cache.line_size.is_power_of_two() {
            errors.push(ConfigError::new("cache.lineSize", "must be a power of two"));
        }
        if self.cache.associativity > 0 && !self.cache.line_count.is_multiple_of(self.cache.associativity) {
            errors.push(ConfigError::new("cache.lineCount", "must be divisible by associativity"));
        }
        if self.predictor.default_state > self.predictor.predictor_type.max_state() {
            errors.push(ConfigError::new(
                "predictor.defaultState",
                format!("must be within 0..={}", self.predictor.predictor_type.max_state()),
            ));
        }

        if self.fu_list.is_empty() {
            errors.push(ConfigError::new("fuList", "at least one functional unit is required"));
        }
        for (i, fu) in self.fu_list.iter().enumerate() {
            let field = |f: &str| format!("fuList[{i}].{f}");
            if fu.latency == 0 {
                errors.push(ConfigError::new(field("latency"), "must be at least 1"));
            }
            let mnemonics = fu.supported_ops.iter().flatten().map(|m| ("supportedOps", m));
            for (list, mnemonic) in mnemonics.chain(fu.latency_table.keys().map(|m| ("latencyTable", m))) {
                match isa.get(mnemonic) {
                    None => errors.push(ConfigError::new(field(list), format!("unknown mnemonic `{mnemonic}`"))),
                    Some(def) if def.fu_class != fu.class => errors.push(ConfigError::new(
                        field(list),
                        format!("`{mnemonic}` executes on {} units, not {}", def.fu_class.as_str(), fu.class.as_str()),
                    )),
                    Some(_) => {}
                }
            }
            for (mnemonic, latency) in &fu.latency_table {
                if *latency == 0 {
                    errors.push(ConfigError::new(field("latencyTable"), format!("latency of `{mnemonic}` must be at least 1")));
                }
            }
        }
        errors
    }

    /// Index of the functional units able to run `mnemonic`.
    pub fn units_for(&self, class: FuClass, mnemonic: &str) -> impl Iterator<Item = usize> + '_ {
        let mnemonic = mnemonic.to_string();
        self.fu_list.iter().enumerate().filter(move |(_, fu)| fu.supports(class, &mnemonic)).map(|(i, _)| i)
    }

    /// Converts a memory-clock latency to core cycles, rounding up.
    pub fn to_core_cycles(&self, memory_cycles: u32) -> u64 {
        let scaled = memory_cycles as u128 * self.core_hz as u128;
        scaled.div_ceil(self.mem_hz.max(1) as u128) as u64
    }
}

/// A random valid configuration covering every unit class, cache policy
/// and predictor kind. Reproducible from `seed`.
pub fn random_config(seed: u64) -> CpuConfig {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let slow = ["mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem", "remu"];
    let mut fu_list = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        let mut fx = FuConfig::new(FuClass::Fx, rng.gen_range(1..=3));
        for op in slow {
            if rng.gen_bool(0.5) {
                fx.latency_table.insert(op.to_string(), rng.gen_range(1..=12));
            }
        }
        fu_list.push(fx);
    }
    for _ in 0..rng.gen_range(1..=2) {
        fu_list.push(FuConfig::new(FuClass::Branch, rng.gen_range(1..=2)));
    }
    for _ in 0..rng.gen_range(1..=2) {
        fu_list.push(FuConfig::new(FuClass::Ls, rng.gen_range(1..=3)));
    }
    let associativity = [1, 2, 4][rng.gen_range(0..3)];
    let predictor_type = [PredictorType::ZeroBit, PredictorType::OneBit, PredictorType::TwoBit][rng.gen_range(0..3)];
    CpuConfig {
        name: format!("random-{seed}"),
        core_hz: 100_000_000,
        mem_hz: [25_000_000, 50_000_000, 100_000_000][rng.gen_range(0..3)],
        rob_size: rng.gen_range(2..=64),
        fetch_width: rng.gen_range(1..=4),
        commit_width: rng.gen_range(1..=4),
        flush_penalty: rng.gen_range(0..=4),
        jumps_per_cycle: rng.gen_range(1..=2),
        fu_list,
        cache: CacheConfig {
            enabled: rng.gen_bool(0.75),
            line_count: associativity * [1, 2, 4, 8][rng.gen_range(0..4)],
            line_size: [4, 8, 16, 32, 64][rng.gen_range(0..5)],
            associativity,
            replacement: [Replacement::Lru, Replacement::Fifo, Replacement::Random][rng.gen_range(0..3)],
            write_policy: if rng.gen_bool(0.5) { WritePolicy::WriteBack } else { WritePolicy::WriteThrough },
            access_delay: rng.gen_range(0..=2),
            line_replacement_delay: rng.gen_range(0..=12),
        },
        load_buffer_size: rng.gen_range(1..=8),
        store_buffer_size: rng.gen_range(1..=8),
        load_latency: rng.gen_range(1..=10),
        store_latency: rng.gen_range(1..=10),
        call_stack_size: 4096,
        rename_file_size: rng.gen_range(1..=48),
        predictor: PredictorConfig {
            btb_size: rng.gen_range(1..=32),
            pht_size: rng.gen_range(1..=32),
            predictor_type,
            default_state: rng.gen_range(0..=predictor_type.max_state()),
            history: if rng.gen_bool(0.5) { HistoryKind::Local } else { HistoryKind::Global },
        },
        memory_capacity: 64 * 1024,
        prng_seed: rng.gen(),
    }
}
