//! Small end-state programs exercising one mnemonic each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Real instructions covered by [`instruction_cases`].
pub const INSTRUCTIONS: [&str; 45] = [
    "add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and", "mul", "mulh", "mulhsu", "mulhu", "div",
    "divu", "rem", "remu", "addi", "slti", "sltiu", "xori", "ori", "andi", "slli", "srli", "srai", "lui", "auipc",
    "jal", "jalr", "beq", "bne", "blt", "bge", "bltu", "bgeu", "lb", "lh", "lw", "lbu", "lhu", "sb", "sh", "sw",
];

/// Pseudo-instructions covered by [`instruction_cases`].
pub const PSEUDOS: [&str; 29] = [
    "nop", "li", "la", "lla", "mv", "not", "neg", "seqz", "snez", "sltz", "sgtz", "zext.b", "j", "jal", "jr", "jalr",
    "ret", "call", "tail", "beqz", "bnez", "blez", "bgez", "bltz", "bgtz", "bgt", "ble", "bgtu", "bleu",
];

const DATA: &str = ".data\nbuf: .word 0x8081f00d, 0x7fff0102, -1, 0\n.text\n";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case {
    pub mnemonic: String,
    pub pseudo: bool,
    pub source: String,
}

fn value(rng: &mut ChaCha8Rng) -> i32 {
    const EDGES: [i32; 7] = [0, 1, -1, i32::MIN, i32::MAX, 2, -2];
    if rng.gen_bool(0.3) {
        EDGES[rng.gen_range(0..EDGES.len())]
    } else if rng.gen_bool(0.5) {
        rng.gen_range(-64..64)
    } else {
        rng.gen()
    }
}

fn immediate(rng: &mut ChaCha8Rng, m: &str) -> i32 {
    match m {
        "slli" | "srli" | "srai" => rng.gen_range(0..32),
        _ => rng.gen_range(-2048..2048),
    }
}

fn real(m: &str, rng: &mut ChaCha8Rng) -> String {
    let (a, b) = (value(rng), value(rng));
    let setup = format!("li x5, {a}\nli x6, {b}\n");
    match m {
        "lui" | "auipc" => format!("nop\n{m} x7, {}\n", rng.gen_range(0..0x100000)),
        "jal" => "jal x1, target\nli x7, 1\ntarget:\nli x8, 2\n".into(),
        "jalr" => format!("la x5, target\njalr x1, x5, {}\nli x7, 1\ntarget:\nli x8, 2\nli x9, 3\n", 4 * rng.gen_range(0..2)),
        "beq" | "bne" | "blt" | "bge" | "bltu" | "bgeu" => {
            let b = if rng.gen_bool(0.3) { a } else { b };
            format!("li x5, {a}\nli x6, {b}\n{m} x5, x6, skip\nli x7, 1\nskip:\nli x8, 2\n")
        }
        "lb" | "lh" | "lw" | "lbu" | "lhu" => {
            let align = match m {
                "lw" => 4,
                "lh" | "lhu" => 2,
                _ => 1,
            };
            let offset = align * rng.gen_range(0..12 / align);
            format!("{DATA}la x5, buf\n{m} x7, {offset}(x5)\n")
        }
        "sb" | "sh" | "sw" => {
            let offset = rng.gen_range(0..12);
            format!("{DATA}la x5, buf\nli x6, {a}\n{m} x6, {offset}(x5)\nlw x7, 0(x5)\nlw x8, 4(x5)\nlw x9, 8(x5)\n")
        }
        "addi" | "slti" | "sltiu" | "xori" | "ori" | "andi" | "slli" | "srli" | "srai" => {
            format!("{setup}{m} x7, x5, {}\n", immediate(rng, m))
        }
        _ => format!("{setup}{m} x7, x5, x6\n"),
    }
}

fn pseudo(m: &str, rng: &mut ChaCha8Rng) -> String {
    let (a, b) = (value(rng), value(rng));
    let setup = format!("li x5, {a}\nli x6, {b}\n");
    let jump_tail = "li x7, 1\ntarget:\nli x8, 2\n";
    match m {
        "nop" => "nop\nli x7, 1\n".into(),
        "li" => format!("li x7, {a}\n"),
        "la" | "lla" => format!("{DATA}{m} x7, buf\nlw x8, 0(x7)\n"),
        "mv" | "not" | "neg" | "seqz" | "snez" | "sltz" | "sgtz" | "zext.b" => format!("{setup}{m} x7, x5\n"),
        "j" | "jal" | "call" | "tail" => format!("{m} target\n{jump_tail}"),
        "jr" | "jalr" => format!("la x5, target\n{m} x5\n{jump_tail}"),
        "ret" => "li x7, 5\nret\nli x7, 6\n".into(),
        "beqz" | "bnez" | "blez" | "bgez" | "bltz" | "bgtz" => {
            let a = if rng.gen_bool(0.3) { 0 } else { a };
            format!("li x5, {a}\n{m} x5, skip\nli x7, 1\nskip:\nli x8, 2\n")
        }
        _ => {
            let b = if rng.gen_bool(0.3) { a } else { b };
            format!("li x5, {a}\nli x6, {b}\n{m} x5, x6, skip\nli x7, 1\nskip:\nli x8, 2\n")
        }
    }
}

/// `per_mnemonic` randomized programs for every real and pseudo instruction.
pub fn instruction_cases(seed: u64, per_mnemonic: usize) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for m in INSTRUCTIONS {
        for _ in 0..per_mnemonic {
            cases.push(Case { mnemonic: m.into(), pseudo: false, source: real(m, &mut rng) });
        }
    }
    for m in PSEUDOS {
        for _ in 0..per_mnemonic {
            cases.push(Case { mnemonic: m.into(), pseudo: true, source: pseudo(m, &mut rng) });
        }
    }
    cases
}

/// A random terminating program: ALU work, loads and stores into a small
/// buffer, forward branches and one counted loop around the whole body.
pub fn random_program(seed: u64, length: usize) -> String {
    const ALU: [&str; 18] = [
        "add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and", "mul", "mulh", "mulhu", "div", "divu",
        "rem", "remu", "mulhsu",
    ];
    const ALU_IMM: [&str; 6] = ["addi", "slti", "xori", "ori", "andi", "srai"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reg = |rng: &mut ChaCha8Rng| rng.gen_range(5..16);
    let mut out = String::from(".data\n.align 2\nbuf: .zero 64\n.text\nmain:\nla x20, buf\n");
    for r in 5..16 {
        out.push_str(&format!("li x{r}, {}\n", value(&mut rng)));
    }
    out.push_str(&format!("li x21, {}\nloop:\n", rng.gen_range(1..4)));
    let mut pending_label = None;
    for i in 0..length {
        if pending_label == Some(i) {
            out.push_str(&format!("skip{i}:\n"));
            pending_label = None;
        }
        let line = match rng.gen_range(0..10) {
            0..=3 => {
                let m = ALU[rng.gen_range(0..ALU.len())];
                format!("{m} x{}, x{}, x{}", reg(&mut rng), reg(&mut rng), reg(&mut rng))
            }
            4 | 5 => {
                let m = ALU_IMM[rng.gen_range(0..ALU_IMM.len())];
                let imm = if m == "srai" { rng.gen_range(0..32) } else { rng.gen_range(-2048..2048) };
                format!("{m} x{}, x{}, {imm}", reg(&mut rng), reg(&mut rng))
            }
            6 => {
                let (m, align) = [("lw", 4), ("lh", 2), ("lhu", 2), ("lb", 1), ("lbu", 1)][rng.gen_range(0..5)];
                format!("{m} x{}, {}(x20)", reg(&mut rng), align * rng.gen_range(0..64 / align))
            }
            7 => {
                let (m, align) = [("sw", 4), ("sh", 2), ("sb", 1)][rng.gen_range(0..3)];
                format!("{m} x{}, {}(x20)", reg(&mut rng), align * rng.gen_range(0..64 / align))
            }
            _ if pending_label.is_none() && i + 2 < length => {
                let target = rng.gen_range(i + 1..(i + 6).min(length));
                pending_label = Some(target);
                let m = ["beq", "bne", "blt", "bge", "bltu", "bgeu"][rng.gen_range(0..6)];
                format!("{m} x{}, x{}, skip{target}", reg(&mut rng), reg(&mut rng))
            }
            _ => format!("add x{}, x{}, x{}", reg(&mut rng), reg(&mut rng), reg(&mut rng)),
        };
        out.push_str(&line);
        out.push('\n');
    }
    if let Some(target) = pending_label {
        out.push_str(&format!("skip{target}:\n"));
    }
    out.push_str("addi x21, x21, -1\nbnez x21, loop\n");
    out
}
