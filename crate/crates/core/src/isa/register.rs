use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub const REGISTER_COUNT: usize = 32;

/// ABI names indexed by architectural register number.
pub const ABI_NAMES: [&str; REGISTER_COUNT] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4",
    "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4",
    "t5", "t6",
];

pub const ZERO: u8 = 0;
pub const RA: u8 = 1;
pub const SP: u8 = 2;

/// Resolves `x0`..`x31`, ABI aliases and `fp`.
pub fn parse_register(name: &str) -> Option<u8> {
    if let Some(rest) = name.strip_prefix('x') {
        if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) && (rest.len() == 1 || !rest.starts_with('0')) {
            return rest.parse::<u8>().ok().filter(|&i| (i as usize) < REGISTER_COUNT);
        }
    }
    if name == "fp" {
        return Some(8);
    }
    ABI_NAMES.iter().position(|&n| n == name).map(|i| i as u8)
}

/// How a register value should be presented. Never affects semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub enum DataTag {
    #[default]
    Int32,
    Uint32,
    Int64,
    Char,
    Bool,
}

/// A 64-bit register cell. RV32 instructions only look at the low word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct RegisterValue {
    pub raw: u64,
    pub tag: DataTag,
}

impl RegisterValue {
    pub fn new(raw: u64, tag: DataTag) -> Self {
        Self { raw, tag }
    }

    /// Stores a 32-bit result sign-extended into the 64-bit cell.
    pub fn from_word(word: u32, tag: DataTag) -> Self {
        Self { raw: word as i32 as i64 as u64, tag }
    }

    pub fn as_i32(self) -> i32 {
        self.raw as u32 as i32
    }

    pub fn as_u32(self) -> u32 {
        self.raw as u32
    }

    pub fn as_i64(self) -> i64 {
        self.raw as i64
    }

    pub fn as_char(self) -> char {
        char::from(self.raw as u8)
    }

    pub fn as_bool(self) -> bool {
        self.raw as u32 != 0
    }

    /// Human-readable rendering according to the tag.
    pub fn display(self) -> String {
        match self.tag {
            DataTag::Int32 => self.as_i32().to_string(),
            DataTag::Uint32 => self.as_u32().to_string(),
            DataTag::Int64 => self.as_i64().to_string(),
            DataTag::Char => format!("'{}'", self.as_char().escape_default()),
            DataTag::Bool => self.as_bool().to_string(),
        }
    }
}
