//! Two-pass assembler for RV32IM assembly text.
//!
//! Pass one parses statements and records labels, memory layout assigns
//! addresses to the stack, directive data and user arrays, and pass two
//! resolves every operand to a constant.

pub mod expr;
pub mod filter;
pub mod layout;
pub mod lexer;
pub mod parser;
pub mod program;

use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::isa::IsaSet;

pub use expr::{eval_operand_expression, ExprError, OperandExpr};
pub use filter::{filter_compiler_output, filter_with_origins, source_line_mapping};
pub use layout::{layout_memory, ArrayDataType, Layout, PlacedArray, UserArray};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{pass_one, PartialProgram};
pub use program::{pass_two, AsmInstruction, AsmProgram, Operand, ProgramImage};

pub const DEFAULT_STACK_SIZE: u32 = 512;
pub const DEFAULT_MEMORY_CAPACITY: u32 = 64 * 1024;

/// A positioned assembler message, suitable for editor markers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Diagnostic {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl Diagnostic {
    pub fn new(line: u32, column: u32, message: impl Into<String>) -> Self {
        Self { line, column, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

/// All diagnostics produced by a failed assembly, in source order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct AsmError {
    pub diagnostics: Vec<Diagnostic>,
}

impl AsmError {
    pub fn single(line: u32, column: u32, message: impl Into<String>) -> Self {
        Self { diagnostics: vec![Diagnostic::new(line, column, message)] }
    }
}

impl From<Diagnostic> for AsmError {
    fn from(d: Diagnostic) -> Self {
        Self { diagnostics: vec![d] }
    }
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "line {}", d)?;
        }
        Ok(())
    }
}

impl std::error::Error for AsmError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub enum Segment {
    Code,
    Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Symbol {
    pub segment: Segment,
    /// Byte address in the segment.
    pub value: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembleOptions {
    pub stack_size: u32,
    pub memory_capacity: u32,
    /// Label to start execution at; the first instruction when absent.
    pub entry: Option<String>,
    pub arrays: Vec<UserArray>,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            stack_size: DEFAULT_STACK_SIZE,
            memory_capacity: DEFAULT_MEMORY_CAPACITY,
            entry: None,
            arrays: Vec::new(),
        }
    }
}

/// Runs both passes and the memory layout in between.
pub fn assemble(source: &str, isa: &IsaSet, options: &AssembleOptions) -> Result<AsmProgram, AsmError> {
    let tokens = tokenize(source)?;
    let partial = pass_one(&tokens, isa)?;
    let layout = layout_memory(&partial, &options.arrays, options.stack_size, options.memory_capacity)?;
    pass_two(&partial, &layout, isa, options.entry.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembles_data_listing() {
        let src = include_str!("../../samples/data_directives.s");
        let program = assemble(src, &IsaSet::rv32im(), &AssembleOptions::default()).unwrap();
        let arr = program.labels["arr"].value;
        let hello = program.labels["hello"].value;
        let x = program.labels["x"].value;
        assert_eq!(arr % 16, 0);
        assert_eq!(x, DEFAULT_STACK_SIZE);
        assert_eq!(program.read_data(x, 4), Some(&[5u8, 0, 0, 0][..]));
        assert_eq!(program.read_data(hello, 12), Some(&b"Hello World\0"[..]));
        assert_eq!(program.stack_top, DEFAULT_STACK_SIZE);
    }

    #[test]
    fn display_lists_every_diagnostic() {
        let err = assemble("foo x1\nbar x2", &IsaSet::rv32im(), &AssembleOptions::default()).unwrap_err();
        assert_eq!(err.to_string(), "line 1:1: unknown mnemonic `foo`\nline 2:1: unknown mnemonic `bar`");
    }

    #[test]
    fn common_symbols_are_zeroed_and_aligned() {
        let src = ".data\nc: .byte 1\n.comm buf, 10, 8\n.lcomm tail, 3\n.text\nla a0, buf\n";
        let program = assemble(src, &IsaSet::rv32im(), &AssembleOptions::default()).unwrap();
        let (c, buf, tail) = (program.labels["c"].value, program.labels["buf"].value, program.labels["tail"].value);
        assert_eq!((buf % 8, buf > c, tail), (0, true, buf + 10));
        assert_eq!(program.read_data(buf, 13), Some(&[0u8; 13][..]));
        assert!(assemble(".comm 5, 4", &IsaSet::rv32im(), &AssembleOptions::default()).is_err());
    }
}
