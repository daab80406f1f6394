//! Straight-line RV32IM reference interpreter.
//!
//! Executes an assembled program one instruction at a time with the
//! semantics written out directly from the RISC-V specification. It shares
//! nothing with the simulator except the assembled program format, so it
//! serves as the oracle for the out-of-order engine.

use rvss_core::asm::{AsmInstruction, AsmProgram, Operand};

pub mod branch_model;
pub mod cache_model;
pub mod cases;

const RA: usize = 1;
const SP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Halt {
    /// Fetch left the program.
    EndOfCode,
    /// The outermost routine returned.
    MainReturned,
    /// A load or store touched memory outside the capacity.
    MemoryFault { pc: u32, address: u32 },
    /// The step budget ran out.
    Budget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Machine {
    pub regs: [u32; 32],
    pub pc: u32,
    pub memory: Vec<u8>,
    pub retired: u64,
    call_depth: u64,
    stack_top: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub halt: Halt,
    pub regs: [u32; 32],
    pub memory: Vec<u8>,
    pub retired: u64,
}

fn reg(op: &Operand) -> usize {
    match op {
        Operand::Register(r) => *r as usize,
        Operand::Immediate(_) => panic!("register operand expected"),
    }
}

fn imm(op: &Operand) -> u32 {
    match op {
        Operand::Immediate(v) => *v as u32,
        Operand::Register(_) => panic!("immediate operand expected"),
    }
}

impl Machine {
    /// Memory of `capacity` bytes (optionally pre-filled from `preload`, then
    /// overlaid with the program's data image), x2 at the stack top.
    pub fn new(program: &AsmProgram, capacity: usize, preload: Option<&[u8]>) -> Self {
        let mut memory = vec![0u8; capacity];
        if let Some(bytes) = preload {
            let n = bytes.len().min(capacity);
            memory[..n].copy_from_slice(&bytes[..n]);
        }
        let base = program.data_base as usize;
        memory[base..base + program.data.len()].copy_from_slice(&program.data);
        let mut regs = [0u32; 32];
        regs[SP] = program.stack_top;
        Self { regs, pc: program.entry_point, memory, retired: 0, call_depth: 0, stack_top: program.stack_top }
    }

    fn load(&self, address: u32, width: u32) -> Option<u32> {
        let start = address as usize;
        let bytes = self.memory.get(start..start.checked_add(width as usize)?)?;
        Some(bytes.iter().rev().fold(0u32, |acc, b| (acc << 8) | *b as u32))
    }

    fn store(&mut self, address: u32, width: u32, value: u32) -> bool {
        let start = address as usize;
        let Some(end) = start.checked_add(width as usize) else { return false };
        let Some(slot) = self.memory.get_mut(start..end) else { return false };
        slot.copy_from_slice(&value.to_le_bytes()[..width as usize]);
        true
    }

    fn write(&mut self, rd: usize, value: u32) {
        if rd != 0 {
            self.regs[rd] = value;
        }
    }

    /// Executes one instruction; returns a halt reason when execution stops.
    pub fn step(&mut self, program: &AsmProgram) -> Option<Halt> {
        let Some(instr) = program.instruction_at(self.pc) else { return Some(Halt::EndOfCode) };
        let AsmInstruction { mnemonic, operands: o, .. } = instr;
        let pc = self.pc;
        let mut next = pc.wrapping_add(4);
        let x = |i: usize| self.regs[reg(&o[i])];
        match mnemonic.as_str() {
            "lui" => self.write(reg(&o[0]), imm(&o[1]) << 12),
            "auipc" => self.write(reg(&o[0]), pc.wrapping_add(imm(&o[1]) << 12)),
            "jal" | "jalr" => {
                let rd = reg(&o[0]);
                let target = if mnemonic == "jal" {
                    pc.wrapping_add(imm(&o[1]))
                } else {
                    x(1).wrapping_add(imm(&o[2])) & !1
                };
                let is_return = mnemonic == "jalr" && rd == 0 && reg(&o[1]) == RA && imm(&o[2]) == 0;
                self.write(rd, pc.wrapping_add(4));
                next = target;
                if rd == RA {
                    self.call_depth += 1;
                } else if is_return {
                    if self.call_depth == 0 && self.regs[SP] >= self.stack_top {
                        self.retired += 1;
                        self.pc = next;
                        return Some(Halt::MainReturned);
                    }
                    self.call_depth = self.call_depth.saturating_sub(1);
                }
            }
            "beq" | "bne" | "blt" | "bge" | "bltu" | "bgeu" => {
                let (a, b) = (x(0), x(1));
                let taken = match mnemonic.as_str() {
                    "beq" => a == b,
                    "bne" => a != b,
                    "blt" => (a as i32) < (b as i32),
                    "bge" => (a as i32) >= (b as i32),
                    "bltu" => a < b,
                    _ => a >= b,
                };
                if taken {
                    next = pc.wrapping_add(imm(&o[2]));
                }
            }
            "lb" | "lh" | "lw" | "lbu" | "lhu" => {
                let address = x(2).wrapping_add(imm(&o[1]));
                let width = match mnemonic.as_str() {
                    "lb" | "lbu" => 1,
                    "lh" | "lhu" => 2,
                    _ => 4,
                };
                let Some(raw) = self.load(address, width) else {
                    return Some(Halt::MemoryFault { pc, address });
                };
                let value = match mnemonic.as_str() {
                    "lb" => raw as u8 as i8 as i32 as u32,
                    "lh" => raw as u16 as i16 as i32 as u32,
                    _ => raw,
                };
                self.write(reg(&o[0]), value);
            }
            "sb" | "sh" | "sw" => {
                let address = x(2).wrapping_add(imm(&o[1]));
                let width = match mnemonic.as_str() {
                    "sb" => 1,
                    "sh" => 2,
                    _ => 4,
                };
                let value = x(0);
                if !self.store(address, width, value) {
                    return Some(Halt::MemoryFault { pc, address });
                }
            }
            op => {
                let a = x(1);
                let b = match o[2] {
                    Operand::Register(r) => self.regs[r as usize],
                    Operand::Immediate(v) => v as u32,
                };
                let value = alu(op, a, b).unwrap_or_else(|| panic!("unsupported mnemonic `{op}`"));
                self.write(reg(&o[0]), value);
            }
        }
        self.pc = next;
        self.retired += 1;
        None
    }
}

fn alu(op: &str, a: u32, b: u32) -> Option<u32> {
    let (sa, sb) = (a as i32, b as i32);
    let shamt = b & 31;
    Some(match op {
        "add" | "addi" => a.wrapping_add(b),
        "sub" => a.wrapping_sub(b),
        "sll" | "slli" => a << shamt,
        "slt" | "slti" => (sa < sb) as u32,
        "sltu" | "sltiu" => (a < b) as u32,
        "xor" | "xori" => a ^ b,
        "srl" | "srli" => a >> shamt,
        "sra" | "srai" => (sa >> shamt) as u32,
        "or" | "ori" => a | b,
        "and" | "andi" => a & b,
        "mul" => a.wrapping_mul(b),
        "mulh" => ((sa as i64 * sb as i64) >> 32) as u32,
        "mulhsu" => ((sa as i64 * b as i64) >> 32) as u32,
        "mulhu" => ((a as u64 * b as u64) >> 32) as u32,
        "div" => match (sa, sb) {
            (_, 0) => u32::MAX,
            (i32::MIN, -1) => i32::MIN as u32,
            _ => (sa / sb) as u32,
        },
        "divu" => a.checked_div(b).unwrap_or(u32::MAX),
        "rem" => match (sa, sb) {
            (_, 0) => a,
            (i32::MIN, -1) => 0,
            _ => (sa % sb) as u32,
        },
        "remu" => a.checked_rem(b).unwrap_or(a),
        _ => return None,
    })
}

/// Runs `program` until it halts or `max_steps` instructions have executed.
pub fn run(program: &AsmProgram, capacity: usize, preload: Option<&[u8]>, max_steps: u64) -> Outcome {
    let mut machine = Machine::new(program, capacity, preload);
    let mut halt = Halt::Budget;
    for _ in 0..max_steps {
        if let Some(h) = machine.step(program) {
            halt = h;
            break;
        }
    }
    Outcome { halt, regs: machine.regs, memory: machine.memory, retired: machine.retired }
}
