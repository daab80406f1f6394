//! Instruction-set model: data-driven instruction definitions loaded from JSON
//! and evaluated by the postfix interpreter in [`expr`].

pub mod expr;
pub mod register;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, OnceLock};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use expr::{
    eval_expression, tokenize_expression, EvalError, ExceptionKind, ExceptionRecord, ExprToken, InterpretResult,
    Operator,
};
pub use register::{parse_register, DataTag, RegisterValue, ABI_NAMES, RA, REGISTER_COUNT, SP, ZERO};

/// The shipped RV32IM definition file (base integer, M extension and pseudo-instructions).
pub const RV32IM_DEFINITIONS: &str = include_str!("rv32im.json");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IsaError {
    #[error("malformed definition document: {0}")]
    Document(String),
    #[error("duplicate mnemonic `{0}`")]
    DuplicateMnemonic(String),
    #[error("`{instruction}`: operand \\{operand} is not declared")]
    UndeclaredOperand { instruction: String, operand: String },
    #[error("`{instruction}`: unknown instruction type `{value}`")]
    UnknownInstructionType { instruction: String, value: String },
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("malformed operand reference `{0}`")]
    MalformedOperand(String),
    #[error("`{instruction}`: {message}")]
    InvalidDefinition { instruction: String, message: String },
    #[error("`{instruction}` expects {expected} operands, got {got}")]
    OperandCount { instruction: String, expected: usize, got: usize },
    #[error("`{instruction}`: {source}")]
    Eval { instruction: String, source: EvalError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
pub enum InstructionType {
    #[serde(rename = "kArithmetic")]
    Arithmetic,
    #[serde(rename = "kLoadStore")]
    LoadStore,
    #[serde(rename = "kBranch")]
    Branch,
    #[serde(rename = "kJump")]
    Jump,
}

impl InstructionType {
    pub const ALL: [InstructionType; 4] =
        [InstructionType::Arithmetic, InstructionType::LoadStore, InstructionType::Branch, InstructionType::Jump];

    fn parse(value: &str) -> Option<Self> {
        match value {
            "kArithmetic" => Some(Self::Arithmetic),
            "kLoadStore" => Some(Self::LoadStore),
            "kBranch" => Some(Self::Branch),
            "kJump" => Some(Self::Jump),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Arithmetic => "kArithmetic",
            Self::LoadStore => "kLoadStore",
            Self::Branch => "kBranch",
            Self::Jump => "kJump",
        }
    }

    pub fn default_fu_class(self) -> FuClass {
        match self {
            Self::Arithmetic => FuClass::Fx,
            Self::LoadStore => FuClass::Ls,
            Self::Branch | Self::Jump => FuClass::Branch,
        }
    }
}

/// Functional unit classes an instruction can be issued to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
pub enum FuClass {
    #[serde(rename = "FX")]
    Fx,
    #[serde(rename = "FP")]
    Fp,
    #[serde(rename = "Branch")]
    Branch,
    #[serde(rename = "LS")]
    Ls,
}

impl FuClass {
    pub const ALL: [FuClass; 4] = [FuClass::Fx, FuClass::Fp, FuClass::Branch, FuClass::Ls];

    pub fn as_str(self) -> &'static str {
        match self {
            FuClass::Fx => "FX",
            FuClass::Fp => "FP",
            FuClass::Branch => "Branch",
            FuClass::Ls => "LS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, JsonSchema)]
pub enum ArgType {
    #[default]
    #[serde(rename = "kInt")]
    Int,
    #[serde(rename = "kUInt")]
    UInt,
    #[serde(rename = "kLong")]
    Long,
    #[serde(rename = "kChar")]
    Char,
    #[serde(rename = "kBool")]
    Bool,
}

impl ArgType {
    pub fn tag(self) -> DataTag {
        match self {
            ArgType::Int => DataTag::Int32,
            ArgType::UInt => DataTag::Uint32,
            ArgType::Long => DataTag::Int64,
            ArgType::Char => DataTag::Char,
            ArgType::Bool => DataTag::Bool,
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ArgumentSpec {
    pub name: String,
    #[serde(rename = "type", default)]
    pub arg_type: ArgType,
    #[serde(default, skip_serializing_if = "is_false")]
    pub write_back: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub is_immediate: bool,
    /// Label operands are turned into offsets from the instruction address.
    #[serde(default, skip_serializing_if = "is_false")]
    pub pc_relative: bool,
}

impl ArgumentSpec {
    pub fn is_register(&self) -> bool {
        !self.is_immediate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MemoryAccessSpec {
    /// Access width in bytes: 1, 2 or 4.
    pub width: u8,
    #[serde(default, skip_serializing_if = "is_false")]
    pub signed: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub store: bool,
}

/// Declarative description of one mnemonic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionDefinition {
    pub name: String,
    pub instruction_type: InstructionType,
    pub fu_class: FuClass,
    pub arguments: Vec<ArgumentSpec>,
    pub interpretable_as: String,
    /// Target expression of conditional branches.
    pub branch_target: Option<String>,
    pub memory_access: Option<MemoryAccessSpec>,
    tokens: Vec<ExprToken>,
    target_tokens: Option<Vec<ExprToken>>,
    direct_jump: bool,
    explicit_fu_class: bool,
}

/// Pseudo-instruction expanded textually into real instructions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoDefinition {
    pub name: String,
    pub arguments: Vec<ArgumentSpec>,
    pub expands_to: Vec<String>,
}

impl PseudoDefinition {
    /// Substitutes `\arg` placeholders with the given operand texts.
    pub fn expand(&self, operands: &[String]) -> Vec<String> {
        self.expands_to
            .iter()
            .map(|template| {
                let mut line = template.clone();
                // longest names first so `\rs1` is not clobbered by `\rs`
                let mut order: Vec<usize> = (0..self.arguments.len()).collect();
                order.sort_by_key(|&i| std::cmp::Reverse(self.arguments[i].name.len()));
                for i in order {
                    line = line.replace(&format!("\\{}", self.arguments[i].name), &operands[i]);
                }
                line
            })
            .collect()
    }
}

/// Wire form of one entry of the definition document.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RawDefinition {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fu_class: Option<FuClass>,
    #[serde(default)]
    pub arguments: Vec<ArgumentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpretable_as: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_access: Option<MemoryAccessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expands_to: Option<Vec<String>>,
}

fn invalid(instruction: &str, message: impl Into<String>) -> IsaError {
    IsaError::InvalidDefinition { instruction: instruction.to_string(), message: message.into() }
}

impl InstructionDefinition {
    fn from_raw(raw: RawDefinition) -> Result<Self, IsaError> {
        let name = raw.name;
        let type_text = raw.instruction_type.ok_or_else(|| invalid(&name, "missing instructionType"))?;
        let instruction_type = InstructionType::parse(&type_text)
            .ok_or_else(|| IsaError::UnknownInstructionType { instruction: name.clone(), value: type_text })?;
        let interpretable_as = raw.interpretable_as.ok_or_else(|| invalid(&name, "missing interpretableAs"))?;
        let tokens = tokenize_expression(&interpretable_as)?;

        let mut seen = BTreeSet::new();
        for arg in &raw.arguments {
            if !seen.insert(arg.name.as_str()) {
                return Err(invalid(&name, format!("argument `{}` declared twice", arg.name)));
            }
            if arg.name == expr::PC_OPERAND {
                return Err(invalid(&name, "`pc` is a builtin operand"));
            }
            if arg.write_back && arg.is_immediate {
                return Err(invalid(&name, format!("immediate `{}` cannot be written back", arg.name)));
            }
        }
        let declared = |operand: &str| operand == expr::PC_OPERAND || seen.contains(operand);
        let check_refs = |tokens: &[ExprToken]| -> Result<(), IsaError> {
            for token in tokens {
                if let ExprToken::OperandRef(operand) = token {
                    if !declared(operand) {
                        return Err(IsaError::UndeclaredOperand { instruction: name.clone(), operand: operand.clone() });
                    }
                }
            }
            Ok(())
        };
        check_refs(&tokens)?;

        // assignment targets must be exactly the writeBack arguments
        let mut targets = BTreeSet::new();
        let mut reads = BTreeSet::new();
        for (i, token) in tokens.iter().enumerate() {
            if let ExprToken::OperandRef(operand) = token {
                if matches!(tokens.get(i + 1), Some(ExprToken::Operator(Operator::Assign))) {
                    targets.insert(operand.as_str());
                } else {
                    reads.insert(operand.as_str());
                }
            }
        }
        for target in &targets {
            let arg = raw.arguments.iter().find(|a| a.name == *target);
            match arg {
                Some(a) if a.is_immediate => {
                    return Err(invalid(&name, format!("immediate `{target}` is an assignment target")))
                }
                Some(a) if !a.write_back => {
                    return Err(invalid(&name, format!("`{target}` is assigned but not flagged writeBack")))
                }
                None => return Err(invalid(&name, format!("`{target}` cannot be assigned"))),
                _ => {}
            }
        }
        let memory_access = raw.memory_access;
        for arg in raw.arguments.iter().filter(|a| a.write_back) {
            let loaded = memory_access.is_some_and(|m| !m.store);
            if !targets.contains(arg.name.as_str()) && !loaded {
                return Err(invalid(&name, format!("writeBack argument `{}` is never assigned", arg.name)));
            }
        }

        let target_tokens = match (&raw.branch_target, instruction_type) {
            (Some(text), InstructionType::Branch) => {
                let t = tokenize_expression(text)?;
                check_refs(&t)?;
                Some(t)
            }
            (None, InstructionType::Branch) => return Err(invalid(&name, "branches need a branchTarget")),
            (Some(_), _) => return Err(invalid(&name, "only branches take a branchTarget")),
            (None, _) => None,
        };
        if let Some(access) = memory_access {
            if instruction_type != InstructionType::LoadStore {
                return Err(invalid(&name, "memoryAccess is only valid for kLoadStore"));
            }
            if ![1, 2, 4].contains(&access.width) {
                return Err(invalid(&name, "memory width must be 1, 2 or 4"));
            }
            let writebacks = raw.arguments.iter().filter(|a| a.write_back).count();
            if access.store && writebacks != 0 {
                return Err(invalid(&name, "stores cannot write back"));
            }
            if !access.store && writebacks != 1 {
                return Err(invalid(&name, "loads need exactly one writeBack argument"));
            }
            if access.store && raw.arguments.first().is_none_or(|a| a.is_immediate) {
                return Err(invalid(&name, "the first argument of a store is the stored register"));
            }
        } else if instruction_type == InstructionType::LoadStore {
            return Err(invalid(&name, "kLoadStore needs memoryAccess"));
        }

        let direct_jump = instruction_type == InstructionType::Jump
            && reads.iter().all(|r| {
                *r == expr::PC_OPERAND || raw.arguments.iter().any(|a| a.name == *r && a.is_immediate)
            });

        Ok(Self {
            fu_class: raw.fu_class.unwrap_or_else(|| instruction_type.default_fu_class()),
            explicit_fu_class: raw.fu_class.is_some(),
            name,
            instruction_type,
            arguments: raw.arguments,
            interpretable_as,
            branch_target: raw.branch_target,
            memory_access,
            tokens,
            target_tokens,
            direct_jump,
        })
    }

    fn to_raw(&self) -> RawDefinition {
        RawDefinition {
            name: self.name.clone(),
            instruction_type: Some(self.instruction_type.as_str().to_string()),
            fu_class: self.explicit_fu_class.then_some(self.fu_class),
            arguments: self.arguments.clone(),
            interpretable_as: Some(self.interpretable_as.clone()),
            branch_target: self.branch_target.clone(),
            memory_access: self.memory_access,
            expands_to: None,
        }
    }

    pub fn tokens(&self) -> &[ExprToken] {
        &self.tokens
    }

    /// Jump whose target depends only on the pc and immediates.
    pub fn is_direct_jump(&self) -> bool {
        self.direct_jump
    }

    pub fn is_control_flow(&self) -> bool {
        matches!(self.instruction_type, InstructionType::Branch | InstructionType::Jump)
    }

    pub fn write_back_index(&self) -> Option<usize> {
        self.arguments.iter().position(|a| a.write_back)
    }

    pub fn argument_index(&self, name: &str) -> Option<usize> {
        self.arguments.iter().position(|a| a.name == name)
    }
}

/// Result of interpreting an instruction on concrete operand values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Execution {
    pub result: InterpretResult,
    pub control: Option<ControlOutcome>,
    pub memory: Option<MemoryRequest>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlOutcome {
    pub taken: bool,
    pub target: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryRequest {
    pub address: u32,
    pub width: u8,
    pub signed: bool,
    pub store: bool,
    /// Value to store, truncated to `width` by the memory unit.
    pub value: Option<u32>,
}

impl MemoryRequest {
    /// Extends raw loaded bytes to a register value.
    pub fn extend_loaded(&self, raw: u32) -> u32 {
        match (self.width, self.signed) {
            (1, true) => raw as u8 as i8 as i32 as u32,
            (1, false) => raw as u8 as u32,
            (2, true) => raw as u16 as i16 as i32 as u32,
            (2, false) => raw as u16 as u32,
            _ => raw,
        }
    }
}

/// Binds `operands` (one value per declared argument) and runs the definition.
pub fn interpret_instruction(def: &InstructionDefinition, operands: &[u64], pc: u32) -> Result<Execution, IsaError> {
    if operands.len() != def.arguments.len() {
        return Err(IsaError::OperandCount {
            instruction: def.name.clone(),
            expected: def.arguments.len(),
            got: operands.len(),
        });
    }
    let bindings = |name: &str| def.argument_index(name).map(|i| operands[i]);
    let eval_err = |source| IsaError::Eval { instruction: def.name.clone(), source };
    let result = eval_expression(&def.tokens, bindings, pc).map_err(eval_err)?;
    let mut execution = Execution::default();
    match def.instruction_type {
        InstructionType::Arithmetic => {}
        InstructionType::Branch => {
            let condition = result.leftover.ok_or_else(|| invalid(&def.name, "branch left no condition"))?;
            let target_tokens = def.target_tokens.as_deref().unwrap_or_default();
            let target = eval_expression(target_tokens, bindings, pc)
                .map_err(eval_err)?
                .leftover
                .ok_or_else(|| invalid(&def.name, "branch target left no value"))?;
            execution.control = Some(ControlOutcome { taken: condition as u32 != 0, target: target as u32 });
        }
        InstructionType::Jump => {
            let target = result.leftover.ok_or_else(|| invalid(&def.name, "jump left no target"))?;
            execution.control = Some(ControlOutcome { taken: true, target: target as u32 });
        }
        InstructionType::LoadStore => {
            let access = def.memory_access.expect("validated at load");
            let address = result.leftover.ok_or_else(|| invalid(&def.name, "memory access left no address"))?;
            execution.memory = Some(MemoryRequest {
                address: address as u32,
                width: access.width,
                signed: access.signed,
                store: access.store,
                value: access.store.then(|| operands[0] as u32),
            });
        }
    }
    execution.result = result;
    Ok(execution)
}

/// Static target of a direct jump, computable at fetch time.
pub fn direct_jump_target(def: &InstructionDefinition, operands: &[u64], pc: u32) -> Option<u32> {
    if !def.direct_jump {
        return None;
    }
    let bindings = |name: &str| {
        def.argument_index(name).filter(|&i| def.arguments[i].is_immediate).map(|i| operands[i])
    };
    eval_expression(&def.tokens, bindings, pc).ok()?.leftover.map(|t| t as u32)
}

/// A loaded instruction-set description.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IsaSet {
    definitions: BTreeMap<String, InstructionDefinition>,
    pseudos: Vec<PseudoDefinition>,
}

impl IsaSet {
    pub fn from_json(document: &str) -> Result<Self, IsaError> {
        let raw: Vec<RawDefinition> =
            serde_json::from_str(document).map_err(|e| IsaError::Document(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn from_raw(raw: Vec<RawDefinition>) -> Result<Self, IsaError> {
        let mut set = IsaSet::default();
        let mut pseudo_raw = Vec::new();
        for entry in raw {
            if entry.expands_to.is_some() {
                pseudo_raw.push(entry);
                continue;
            }
            let def = InstructionDefinition::from_raw(entry)?;
            if set.definitions.contains_key(&def.name) {
                return Err(IsaError::DuplicateMnemonic(def.name));
            }
            set.definitions.insert(def.name.clone(), def);
        }
        for entry in pseudo_raw {
            let name = entry.name.clone();
            if entry.instruction_type.is_some() || entry.interpretable_as.is_some() || entry.memory_access.is_some() {
                return Err(invalid(&name, "pseudo-instructions only declare arguments and expandsTo"));
            }
            let pseudo = PseudoDefinition {
                name: entry.name,
                arguments: entry.arguments,
                expands_to: entry.expands_to.unwrap_or_default(),
            };
            if pseudo.expands_to.is_empty() {
                return Err(invalid(&name, "empty expansion"));
            }
            let arity = pseudo.arguments.len();
            let clashes_real = set.definitions.get(&name).is_some_and(|d| d.arguments.len() == arity);
            if clashes_real || set.pseudo(&name, arity).is_some() {
                return Err(IsaError::DuplicateMnemonic(name));
            }
            for line in &pseudo.expands_to {
                let mnemonic = line.split_whitespace().next().unwrap_or_default();
                if !set.definitions.contains_key(mnemonic) {
                    return Err(invalid(&name, format!("expands to unknown instruction `{mnemonic}`")));
                }
                for piece in line.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '\\')) {
                    if let Some(operand) = piece.strip_prefix('\\') {
                        if !pseudo.arguments.iter().any(|a| a.name == operand) {
                            return Err(IsaError::UndeclaredOperand {
                                instruction: name.clone(),
                                operand: operand.to_string(),
                            });
                        }
                    }
                }
            }
            set.pseudos.push(pseudo);
        }
        Ok(set)
    }

    /// The shipped RV32IM definitions.
    pub fn rv32im() -> Self {
        Self::from_json(RV32IM_DEFINITIONS).expect("shipped ISA definitions are valid")
    }

    /// Process-wide shared copy of [`IsaSet::rv32im`].
    pub fn shared_default() -> Arc<IsaSet> {
        static SHARED: OnceLock<Arc<IsaSet>> = OnceLock::new();
        SHARED.get_or_init(|| Arc::new(IsaSet::rv32im())).clone()
    }

    pub fn to_raw(&self) -> Vec<RawDefinition> {
        let mut raw: Vec<RawDefinition> = self.definitions.values().map(InstructionDefinition::to_raw).collect();
        raw.extend(self.pseudos.iter().map(|p| RawDefinition {
            name: p.name.clone(),
            instruction_type: None,
            fu_class: None,
            arguments: p.arguments.clone(),
            interpretable_as: None,
            branch_target: None,
            memory_access: None,
            expands_to: Some(p.expands_to.clone()),
        }));
        raw
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("definitions serialize")
    }

    pub fn get(&self, mnemonic: &str) -> Option<&InstructionDefinition> {
        self.definitions.get(mnemonic)
    }

    pub fn pseudo(&self, mnemonic: &str, arity: usize) -> Option<&PseudoDefinition> {
        self.pseudos.iter().find(|p| p.name == mnemonic && p.arguments.len() == arity)
    }

    pub fn has_pseudo(&self, mnemonic: &str) -> bool {
        self.pseudos.iter().any(|p| p.name == mnemonic)
    }

    pub fn definitions(&self) -> impl Iterator<Item = &InstructionDefinition> {
        self.definitions.values()
    }

    pub fn pseudos(&self) -> &[PseudoDefinition] {
        &self.pseudos
    }

    pub fn len(&self) -> usize {
        self.definitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.definitions.is_empty() && self.pseudos.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING: &str = r#"[{
      "name": "add",
      "instructionType": "kArithmetic",
      "arguments": [
        { "name": "rd", "type": "kInt", "writeBack": true },
        { "name": "rs1", "type": "kInt" },
        { "name": "rs2", "type": "kInt" }
      ],
      "interpretableAs": "\\rs1 \\rs2 + \\rd ="
    }]"#;

    #[test]
    fn loads_add_definition() {
        let isa = IsaSet::from_json(LISTING).unwrap();
        let add = isa.get("add").unwrap();
        assert_eq!(add.arguments.len(), 3);
        assert!(add.arguments[0].write_back);
        assert_eq!(add.interpretable_as, "\\rs1 \\rs2 + \\rd =");
        assert_eq!(add.instruction_type, InstructionType::Arithmetic);
        assert_eq!(add.fu_class, FuClass::Fx);
    }

    #[test]
    fn empty_document() {
        assert!(IsaSet::from_json("[]").unwrap().is_empty());
    }

    #[test]
    fn duplicate_mnemonic() {
        let inner = LISTING.trim().trim_start_matches('[').trim_end_matches(']');
        let doc = format!("[{inner},{inner}]");
        assert_eq!(IsaSet::from_json(&doc), Err(IsaError::DuplicateMnemonic("add".into())));
    }

    #[test]
    fn undeclared_operand_and_unknown_type() {
        let doc = LISTING.replace("\\rs2 +", "\\rs3 +");
        assert!(matches!(IsaSet::from_json(&doc), Err(IsaError::UndeclaredOperand { operand, .. }) if operand == "rs3"));
        let doc = LISTING.replace("kArithmetic", "kVector");
        assert!(matches!(IsaSet::from_json(&doc), Err(IsaError::UnknownInstructionType { value, .. }) if value == "kVector"));
    }

    #[test]
    fn assignment_to_immediate_rejected() {
        let doc = r#"[{"name":"bad","instructionType":"kArithmetic",
            "arguments":[{"name":"imm","isImmediate":true},{"name":"rs1"}],
            "interpretableAs":"\\rs1 \\imm ="}]"#;
        assert!(matches!(IsaSet::from_json(doc), Err(IsaError::InvalidDefinition { .. })));
        let doc = r#"[{"name":"bad","instructionType":"kArithmetic",
            "arguments":[{"name":"rd"},{"name":"rs1"}],
            "interpretableAs":"\\rs1 \\rd ="}]"#;
        assert!(matches!(IsaSet::from_json(doc), Err(IsaError::InvalidDefinition { .. })));
    }

    #[test]
    fn shipped_definitions_round_trip() {
        let isa = IsaSet::rv32im();
        assert_eq!(isa.len(), 45);
        let again = IsaSet::from_json(&isa.to_json()).unwrap();
        assert_eq!(isa, again);
    }

    #[test]
    fn interprets_shipped_instructions() {
        let isa = IsaSet::rv32im();
        let addi = isa.get("addi").unwrap();
        let exec = interpret_instruction(addi, &[0, 0, 42], 0).unwrap();
        assert_eq!(exec.result.writes, vec![("rd".to_string(), 42)]);

        let beq = isa.get("beq").unwrap();
        let exec = interpret_instruction(beq, &[9, 9, (-8i64) as u64], 0x20).unwrap();
        assert_eq!(exec.control, Some(ControlOutcome { taken: true, target: 0x18 }));
        let exec = interpret_instruction(beq, &[9, 8, 16], 0x20).unwrap();
        assert_eq!(exec.control, Some(ControlOutcome { taken: false, target: 0x30 }));

        let lw = isa.get("lw").unwrap();
        let exec = interpret_instruction(lw, &[0, 8, 0x100], 0).unwrap();
        assert_eq!(exec.memory.unwrap().address, 0x108);
        assert!(exec.result.writes.is_empty());

        let sb = isa.get("sb").unwrap();
        let exec = interpret_instruction(sb, &[0x1ff, (-1i64) as u64, 0x100], 0).unwrap();
        let mem = exec.memory.unwrap();
        assert_eq!((mem.address, mem.width, mem.store, mem.value), (0xff, 1, true, Some(0x1ff)));

        assert!(isa.get("jal").unwrap().is_direct_jump());
        assert!(!isa.get("jalr").unwrap().is_direct_jump());
        assert_eq!(direct_jump_target(isa.get("jal").unwrap(), &[1, 12], 8), Some(20));
        assert!(matches!(interpret_instruction(addi, &[0, 1], 0), Err(IsaError::OperandCount { .. })));
    }

    #[test]
    fn pseudo_expansion() {
        let isa = IsaSet::rv32im();
        let li = isa.pseudo("li", 2).unwrap();
        assert_eq!(li.expand(&["a0".into(), "42".into()]), vec!["addi a0, x0, 42".to_string()]);
        assert!(isa.pseudo("jal", 1).is_some());
        assert!(isa.pseudo("ret", 0).is_some());
    }
}
