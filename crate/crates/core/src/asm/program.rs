//! Second pass: operand resolution, data image emission and the final
//! program representation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use base64::Engine as _;
use schemars::JsonSchema;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::layout::{footprint, Layout, PlacedArray};
use super::parser::{DataArg, DirectiveKind, PartialProgram, PendingArg};
use super::{AsmError, Diagnostic, Segment, Symbol};
use crate::isa::{IsaSet, ABI_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub enum Operand {
    Register(u8),
    Immediate(i32),
}

impl Operand {
    /// Raw 64-bit operand value as seen by the interpreter.
    pub fn immediate_value(self) -> Option<u64> {
        match self {
            Operand::Immediate(v) => Some(v as i64 as u64),
            Operand::Register(_) => None,
        }
    }
}

/// An instruction with all operands resolved, in definition argument order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct AsmInstruction {
    pub mnemonic: String,
    pub operands: Vec<Operand>,
    pub line: u32,
    /// The statement as written.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expanded_from: Option<String>,
}

pub(crate) mod base64_bytes {
    use super::*;

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        base64::engine::general_purpose::STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

/// An assembled program: code, symbol table and initial data image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct AsmProgram {
    pub instructions: Vec<AsmInstruction>,
    pub labels: BTreeMap<String, Symbol>,
    /// Address of the first byte of `data`.
    pub data_base: u32,
    /// Initial contents of memory from `data_base` on (directives and arrays).
    #[serde(with = "base64_bytes")]
    #[schemars(with = "String")]
    pub data: Vec<u8>,
    pub arrays: Vec<PlacedArray>,
    /// Initial value of x2.
    pub stack_top: u32,
    pub entry_point: u32,
}

/// The parts of a program that determine its behaviour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramImage {
    pub code: Vec<(String, Vec<Operand>)>,
    pub labels: BTreeMap<String, Symbol>,
    pub data_base: u32,
    pub data: Vec<u8>,
    pub stack_top: u32,
    pub entry_point: u32,
}

impl AsmProgram {
    /// Number of code bytes (4 per instruction).
    pub fn code_size(&self) -> u32 {
        self.instructions.len() as u32 * 4
    }

    pub fn instruction_at(&self, address: u32) -> Option<&AsmInstruction> {
        if !address.is_multiple_of(4) {
            return None;
        }
        self.instructions.get((address / 4) as usize)
    }

    pub fn read_data(&self, address: u32, len: u32) -> Option<&[u8]> {
        let start = address.checked_sub(self.data_base)? as usize;
        self.data.get(start..start + len as usize)
    }

    pub fn image(&self) -> ProgramImage {
        ProgramImage {
            code: self.instructions.iter().map(|i| (i.mnemonic.clone(), i.operands.clone())).collect(),
            labels: self.labels.clone(),
            data_base: self.data_base,
            data: self.data.clone(),
            stack_top: self.stack_top,
            entry_point: self.entry_point,
        }
    }

    /// Renders the program as plain assembly that re-assembles to the same image.
    pub fn render(&self, isa: &IsaSet) -> String {
        let mut labels_at: BTreeMap<(Segment, u32), Vec<&str>> = BTreeMap::new();
        for (name, sym) in &self.labels {
            labels_at.entry((sym.segment, sym.value)).or_default().push(name);
        }
        let mut out = String::new();
        let emit_labels = |out: &mut String, segment, address| {
            for name in labels_at.get(&(segment, address)).into_iter().flatten() {
                let _ = writeln!(out, "{name}:");
            }
        };
        out.push_str(".text\n");
        for (i, instr) in self.instructions.iter().enumerate() {
            emit_labels(&mut out, Segment::Code, i as u32 * 4);
            let _ = writeln!(out, "    {}", render_instruction(instr, isa));
        }
        emit_labels(&mut out, Segment::Code, self.code_size());

        let data_labels: Vec<u32> =
            labels_at.keys().filter(|(s, _)| *s == Segment::Data).map(|&(_, a)| a).collect();
        if self.data.is_empty() && data_labels.is_empty() {
            return out;
        }
        out.push_str(".data\n");
        let end = self.data_base + self.data.len() as u32;
        // labels below the data base cannot be reproduced by layout
        let mut cuts: Vec<u32> = data_labels.iter().copied().filter(|a| (self.data_base..=end).contains(a)).collect();
        if cuts.last() != Some(&end) {
            cuts.push(end);
        }
        let mut address = self.data_base;
        for cut in cuts {
            if cut > address {
                let bytes = &self.data[(address - self.data_base) as usize..(cut - self.data_base) as usize];
                for chunk in bytes.chunks(16) {
                    let list: Vec<String> = chunk.iter().map(|b| b.to_string()).collect();
                    let _ = writeln!(out, "    .byte {}", list.join(", "));
                }
                address = cut;
            }
            emit_labels(&mut out, Segment::Data, cut);
        }
        out
    }
}

fn register_name(r: u8) -> String {
    format!("x{r}")
}

/// One instruction in source form, with `offset(base)` for memory operands.
pub fn render_instruction(instr: &AsmInstruction, isa: &IsaSet) -> String {
    let text = |op: &Operand| match op {
        Operand::Register(r) => register_name(*r),
        Operand::Immediate(v) => v.to_string(),
    };
    let memory = isa.get(&instr.mnemonic).is_some_and(|d| d.memory_access.is_some());
    let parts: Vec<String> = match (memory, instr.operands.as_slice()) {
        (true, [a, Operand::Immediate(off), Operand::Register(base)]) => {
            vec![text(a), format!("{off}({})", register_name(*base))]
        }
        (_, ops) => ops.iter().map(text).collect(),
    };
    if parts.is_empty() {
        instr.mnemonic.clone()
    } else {
        format!("{} {}", instr.mnemonic, parts.join(", "))
    }
}

/// ABI name of a register, for display.
pub fn abi_name(r: u8) -> &'static str {
    ABI_NAMES[r as usize]
}

fn to_immediate(value: i64) -> Option<i32> {
    if (i32::MIN as i64..=u32::MAX as i64).contains(&value) {
        Some(value as u32 as i32)
    } else {
        None
    }
}

fn emit_data(
    partial: &PartialProgram,
    layout: &Layout,
    errors: &mut Vec<Diagnostic>,
) -> Vec<u8> {
    let mut data = vec![0u8; (layout.data_end - layout.data_base) as usize];
    let directives = partial.data.iter().zip(&layout.item_addresses).filter_map(|(i, a)| i.directive.as_ref().map(|d| (d, *a)));
    for (directive, address) in directives {
        let mut offset = (address - layout.data_base) as usize;
        let kind = directive.kind;
        match kind {
            DirectiveKind::Byte | DirectiveKind::Hword | DirectiveKind::Word => {
                let size = kind.element_size() as usize;
                let (lo, hi) = match kind {
                    DirectiveKind::Byte => (i8::MIN as i64, u8::MAX as i64),
                    DirectiveKind::Hword => (i16::MIN as i64, u16::MAX as i64),
                    _ => (i32::MIN as i64, u32::MAX as i64),
                };
                for arg in &directive.args {
                    let DataArg::Expr(expr) = arg else { continue };
                    match expr.eval(&layout.symbols, 0, false) {
                        Ok(v) if (lo..=hi).contains(&v) => {
                            data[offset..offset + size].copy_from_slice(&(v as u32).to_le_bytes()[..size]);
                        }
                        Ok(v) => errors.push(Diagnostic::new(
                            directive.line,
                            directive.column,
                            format!("value {v} does not fit in {}", directive.name),
                        )),
                        Err(e) => errors.push(Diagnostic::new(directive.line, directive.column, e.to_string())),
                    }
                    offset += size;
                }
            }
            DirectiveKind::Ascii | DirectiveKind::Asciiz | DirectiveKind::String => {
                for arg in &directive.args {
                    let DataArg::Str(bytes) = arg else { continue };
                    data[offset..offset + bytes.len()].copy_from_slice(bytes);
                    offset += bytes.len() + usize::from(kind != DirectiveKind::Ascii);
                }
            }
            DirectiveKind::Skip | DirectiveKind::Zero => {
                if let (Some(DataArg::Expr(fill)), Ok((size, _))) = (directive.args.get(1), footprint(directive)) {
                    match fill.eval(&layout.symbols, 0, false) {
                        Ok(v) => data[offset..offset + size as usize].fill(v as u8),
                        Err(e) => errors.push(Diagnostic::new(directive.line, directive.column, e.to_string())),
                    }
                }
            }
            DirectiveKind::Align => {}
        }
    }
    for array in &layout.arrays {
        let offset = (array.address - layout.data_base) as usize;
        data[offset..offset + array.bytes.len()].copy_from_slice(&array.bytes);
    }
    data
}

/// Resolves operands against the laid-out symbol table.
pub fn pass_two(
    partial: &PartialProgram,
    layout: &Layout,
    isa: &IsaSet,
    entry: Option<&str>,
) -> Result<AsmProgram, AsmError> {
    let mut errors = Vec::new();
    let mut instructions = Vec::with_capacity(partial.instructions.len());
    for (index, pending) in partial.instructions.iter().enumerate() {
        let address = index as u32 * 4;
        let def = isa.get(&pending.mnemonic).expect("pass one links every instruction");
        let mut operands = Vec::with_capacity(pending.args.len());
        for (arg, spec) in pending.args.iter().zip(&def.arguments) {
            match arg {
                PendingArg::Register(r) => operands.push(Operand::Register(*r)),
                PendingArg::Expr(expr) => match expr.eval(&layout.symbols, address, spec.pc_relative) {
                    Ok(v) => match to_immediate(v) {
                        Some(imm) => operands.push(Operand::Immediate(imm)),
                        None => errors.push(Diagnostic::new(
                            pending.line,
                            pending.column,
                            format!("immediate {v} does not fit in 32 bits"),
                        )),
                    },
                    Err(e) => errors.push(Diagnostic::new(pending.line, pending.column, e.to_string())),
                },
            }
        }
        instructions.push(AsmInstruction {
            mnemonic: pending.mnemonic.clone(),
            operands,
            line: pending.line,
            source: pending.source.clone(),
            expanded_from: pending.pseudo.clone(),
        });
    }
    let data = emit_data(partial, layout, &mut errors);

    let entry_point = match entry {
        None => 0,
        Some(label) => match layout.symbols.get(label) {
            Some(Symbol { segment: Segment::Code, value }) => *value,
            Some(_) => {
                errors.push(Diagnostic::new(0, 0, format!("entry label `{label}` is not in the code segment")));
                0
            }
            None => {
                errors.push(Diagnostic::new(0, 0, format!("undefined entry label `{label}`")));
                0
            }
        },
    };
    if !errors.is_empty() {
        errors.sort_by_key(|d| (d.line, d.column));
        return Err(AsmError { diagnostics: errors });
    }
    Ok(AsmProgram {
        instructions,
        labels: layout.symbols.clone(),
        data_base: layout.data_base,
        data,
        arrays: layout.arrays.clone(),
        stack_top: layout.stack_top,
        entry_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::{assemble, AssembleOptions};

    fn asm(src: &str) -> AsmProgram {
        assemble(src, &IsaSet::rv32im(), &AssembleOptions::default()).unwrap()
    }

    #[test]
    fn branch_offsets_are_relative() {
        let p = asm("nop\nnop\ntarget: nop\nnop\nnop\nbeq x1, x2, target\nj target");
        assert_eq!(p.instructions[5].operands[2], Operand::Immediate(-12));
        assert_eq!(p.instructions[6].operands[1], Operand::Immediate(-16));
    }

    #[test]
    fn data_addresses_are_absolute() {
        let p = asm(".text\nlla x4, arr+64\nlui a0, %hi(arr)\naddi a0, a0, %lo(arr)\n.data\narr: .zero 128");
        assert_eq!(p.instructions[0].operands[2], Operand::Immediate(512 + 64));
        assert_eq!(p.instructions[1].operands[1], Operand::Immediate(0));
        assert_eq!(p.instructions[2].operands[2], Operand::Immediate(512));
    }

    #[test]
    fn entry_points() {
        let src = "nop\nmain: nop\nv: .word 1";
        let isa = IsaSet::rv32im();
        let with = |entry: Option<&str>| {
            let options = AssembleOptions { entry: entry.map(String::from), ..Default::default() };
            assemble(src, &isa, &options)
        };
        assert_eq!(with(None).unwrap().entry_point, 0);
        assert_eq!(with(Some("main")).unwrap().entry_point, 4);
        assert!(with(Some("missing")).is_err());
        assert!(with(Some("v")).is_err());
    }

    #[test]
    fn word_of_label_and_range_checks() {
        let p = asm("f: nop\ng: nop\ntable: .word f, g, table\n.hword -1\n.byte 255");
        assert_eq!(p.read_data(512, 12).unwrap(), [0, 0, 0, 0, 4, 0, 0, 0, 0, 2, 0, 0]);
        assert_eq!(p.read_data(524, 3).unwrap(), [255, 255, 255]);
        assert!(assemble(".byte 256", &IsaSet::rv32im(), &AssembleOptions::default()).is_err());
        assert!(assemble("li a0, 0x100000000", &IsaSet::rv32im(), &AssembleOptions::default()).is_err());
        assert!(assemble("j nowhere", &IsaSet::rv32im(), &AssembleOptions::default()).is_err());
    }

    #[test]
    fn render_round_trip() {
        let isa = IsaSet::rv32im();
        let src = "main: addi sp, sp, -16\n sw ra, 12(sp)\n lw a0, x\n call f\n j end\nf: ret\nend:\n.data\nx: .word 5\n.align 4\nbuf: .zero 20\ns: .asciiz \"hi\"\ntail:";
        let p = asm(src);
        let again = asm(&p.render(&isa));
        assert_eq!(p.image(), again.image());
        assert!(p.render(&isa).contains("sw x1, 12(x2)"));
    }

    #[test]
    fn serde_round_trip() {
        let p = asm("li a0, -5\nv: .byte 1, 2, 3");
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"data\":\"AQID\""));
        let back: AsmProgram = serde_json::from_str(&json).unwrap();
        assert_eq!(back.image(), p.image());
    }
}
