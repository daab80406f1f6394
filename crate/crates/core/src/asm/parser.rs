//! First assembler pass: statements are parsed, instructions are linked to
//! their definitions, pseudo-instructions expanded and labels recorded.
//! Operands that mention labels stay symbolic until the second pass.

use std::collections::BTreeMap;

use super::expr::OperandExpr;
use super::lexer::{tokenize, unescape_string, Token, TokenKind};
use super::{AsmError, Diagnostic};
use crate::isa::{parse_register, InstructionDefinition, IsaSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PendingArg {
    Register(u8),
    Expr(OperandExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingInstruction {
    pub mnemonic: String,
    pub args: Vec<PendingArg>,
    pub line: u32,
    pub column: u32,
    /// Statement as written (for pseudo-instructions, the original statement).
    pub source: String,
    pub pseudo: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectiveKind {
    Byte,
    Hword,
    Word,
    Align,
    Ascii,
    Asciiz,
    String,
    Skip,
    Zero,
}

impl DirectiveKind {
    /// Accepted spellings, including the GNU aliases compilers emit.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            ".byte" => Self::Byte,
            ".hword" | ".half" | ".short" | ".2byte" => Self::Hword,
            ".word" | ".long" | ".4byte" => Self::Word,
            ".align" | ".p2align" | ".balign" => Self::Align,
            ".ascii" => Self::Ascii,
            ".asciiz" | ".asciz" => Self::Asciiz,
            ".string" => Self::String,
            ".skip" | ".space" => Self::Skip,
            ".zero" => Self::Zero,
            _ => return None,
        })
    }

    pub fn element_size(self) -> u32 {
        match self {
            Self::Hword => 2,
            Self::Word => 4,
            _ => 1,
        }
    }
}

/// Directives that carry no meaning for the simulator and are skipped.
pub fn is_ignored_directive(name: &str) -> bool {
    name.starts_with(".cfi_")
        || matches!(
            name,
            ".globl"
                | ".global"
                | ".local"
                | ".weak"
                | ".hidden"
                | ".type"
                | ".size"
                | ".file"
                | ".ident"
                | ".option"
                | ".attribute"
                | ".loc"
                | ".addrsig"
                | ".addrsig_sym"
                | ".end"
        )
}

/// Section switching directives understood by the assembler.
pub fn section_of(name: &str, operands: &[Token]) -> Option<Section> {
    let classify = |section: &str| {
        if section.starts_with(".text") {
            Section::Text
        } else if [".data", ".rodata", ".bss", ".sdata", ".sbss", ".srodata"].iter().any(|p| section.starts_with(p)) {
            Section::Data
        } else {
            Section::Discarded
        }
    };
    match name {
        ".text" => Some(Section::Text),
        ".data" | ".rodata" | ".bss" => Some(Section::Data),
        ".section" => Some(operands.first().map_or(Section::Discarded, |t| classify(&t.text))),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Unspecified,
    Text,
    Data,
    /// Debug info and other sections whose contents are not loaded.
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataArg {
    Expr(OperandExpr),
    Str(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataDirective {
    pub kind: DirectiveKind,
    /// Spelling used in the source, e.g. `.balign`.
    pub name: String,
    pub args: Vec<DataArg>,
    pub line: u32,
    pub column: u32,
}

/// One entry of the data segment plan. `directive == None` marks a
/// zero-sized anchor carrying labels defined at the end of a data section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataItem {
    pub labels: Vec<String>,
    pub directive: Option<DataDirective>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PartialProgram {
    pub instructions: Vec<PendingInstruction>,
    /// Code labels with their byte addresses.
    pub code_labels: BTreeMap<String, u32>,
    pub data: Vec<DataItem>,
    /// Every label with its definition position.
    pub label_positions: BTreeMap<String, (u32, u32)>,
}

impl PartialProgram {
    pub fn data_directives(&self) -> impl Iterator<Item = &DataDirective> {
        self.data.iter().filter_map(|d| d.directive.as_ref())
    }
}

fn split_operands(tokens: &[Token]) -> Vec<&[Token]> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let mut groups = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        match (t.kind, t.text.as_str()) {
            (TokenKind::Paren, "(") => depth += 1,
            (TokenKind::Paren, ")") => depth -= 1,
            (TokenKind::Comma, _) if depth == 0 => {
                groups.push(&tokens[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    groups.push(&tokens[start..]);
    groups
}

fn group_text(group: &[Token]) -> String {
    group.iter().map(|t| t.text.as_str()).collect()
}

/// `offset(base)` operand split into its two halves.
fn memory_form(group: &[Token]) -> Option<(&[Token], u8)> {
    let n = group.len();
    if n < 3 || !group[n - 1].is(TokenKind::Paren, ")") || !group[n - 3].is(TokenKind::Paren, "(") {
        return None;
    }
    let base = &group[n - 2];
    if base.kind != TokenKind::Symbol {
        return None;
    }
    let reg = parse_register(&base.text)?;
    Some((&group[..n - 3], reg))
}

struct Pass<'a> {
    isa: &'a IsaSet,
    out: PartialProgram,
    errors: Vec<Diagnostic>,
    pending_labels: Vec<String>,
    section: Section,
    last_was_data: bool,
}

impl<'a> Pass<'a> {
    fn define_label(&mut self, token: &Token) {
        let name = token.label_name().to_string();
        if let Some((line, _)) = self.out.label_positions.get(&name) {
            self.errors.push(Diagnostic::new(
                token.line,
                token.column,
                format!("duplicate label `{name}` (first defined on line {line})"),
            ));
            return;
        }
        self.out.label_positions.insert(name.clone(), (token.line, token.column));
        self.pending_labels.push(name);
    }

    fn bind_pending_to_code(&mut self) {
        let address = self.out.instructions.len() as u32 * 4;
        for label in self.pending_labels.drain(..) {
            self.out.code_labels.insert(label, address);
        }
    }

    fn flush_pending(&mut self) {
        if self.pending_labels.is_empty() {
            return;
        }
        let data = match self.section {
            Section::Data => true,
            Section::Text => false,
            Section::Unspecified | Section::Discarded => self.last_was_data,
        };
        if data {
            let labels = std::mem::take(&mut self.pending_labels);
            self.out.data.push(DataItem { labels, directive: None });
        } else {
            self.bind_pending_to_code();
        }
    }

    fn statement(&mut self, tokens: &[Token]) {
        let mut rest = tokens;
        while let Some(first) = rest.first().filter(|t| t.kind == TokenKind::LabelDef) {
            if self.section != Section::Discarded {
                self.define_label(first);
            }
            rest = &rest[1..];
        }
        let Some(head) = rest.first() else { return };
        let operands = &rest[1..];
        match head.kind {
            TokenKind::Directive => {
                if let Some(section) = section_of(&head.text, operands) {
                    self.flush_pending();
                    self.section = section;
                } else if self.section == Section::Discarded || is_ignored_directive(&head.text) {
                } else if matches!(head.text.as_str(), ".comm" | ".lcomm") {
                    if let Err(e) = self.common_symbol(head, operands) {
                        self.errors.push(e);
                    }
                } else if let Some(kind) = DirectiveKind::from_name(&head.text) {
                    if let Err(e) = self.directive(head, kind, operands) {
                        self.errors.push(e);
                    }
                } else {
                    self.errors.push(Diagnostic::new(head.line, head.column, format!("unknown directive `{}`", head.text)));
                }
            }
            _ if self.section == Section::Discarded => {}
            TokenKind::Symbol => {
                if let Err(e) = self.instruction(head, operands) {
                    self.errors.push(e);
                }
            }
            _ => self.errors.push(Diagnostic::new(head.line, head.column, format!("unexpected `{}`", head.text.trim()))),
        }
    }

    fn directive(&mut self, head: &Token, kind: DirectiveKind, operands: &[Token]) -> Result<(), Diagnostic> {
        if kind == DirectiveKind::Align && self.section == Section::Text {
            // instructions are always 4-byte aligned
            return Ok(());
        }
        let err = |t: &Token, msg: String| Diagnostic::new(t.line, t.column, msg);
        let groups = split_operands(operands);
        let mut args = Vec::with_capacity(groups.len());
        for group in &groups {
            let first = group.first().ok_or_else(|| err(head, format!("empty argument to {}", head.text)))?;
            match kind {
                DirectiveKind::Ascii | DirectiveKind::Asciiz | DirectiveKind::String => {
                    if group.len() != 1 || first.kind != TokenKind::StringLit {
                        return Err(err(first, format!("{} expects string literals", head.text)));
                    }
                    args.push(DataArg::Str(unescape_string(first)?));
                }
                _ => args.push(DataArg::Expr(OperandExpr::parse(group).map_err(|e| err(first, e.to_string()))?)),
            }
        }
        let arity_ok = match kind {
            DirectiveKind::Align => !args.is_empty(),
            DirectiveKind::Skip | DirectiveKind::Zero => (1..=2).contains(&args.len()),
            _ => !args.is_empty(),
        };
        if !arity_ok {
            return Err(err(head, format!("wrong number of arguments to {}", head.text)));
        }
        let directive =
            DataDirective { kind, name: head.text.clone(), args, line: head.line, column: head.column };
        let labels = if kind == DirectiveKind::Align { Vec::new() } else { std::mem::take(&mut self.pending_labels) };
        self.out.data.push(DataItem { labels, directive: Some(directive) });
        self.last_was_data = true;
        Ok(())
    }

    /// `.comm name, size[, alignment]`: a zero-filled data object with its
    /// own label, alignment in bytes.
    fn common_symbol(&mut self, head: &Token, operands: &[Token]) -> Result<(), Diagnostic> {
        let groups = split_operands(operands);
        let name = match groups.first() {
            Some([t]) if t.kind == TokenKind::Symbol && (2..=3).contains(&groups.len()) => t,
            _ => return Err(Diagnostic::new(head.line, head.column, format!("{} expects name, size[, alignment]", head.text))),
        };
        let expr = |group: &[Token]| {
            OperandExpr::parse(group).map_err(|e| Diagnostic::new(head.line, head.column, e.to_string()))
        };
        let size = expr(groups[1])?;
        let data_item = |kind, name: &str, args| DataDirective { kind, name: name.into(), args, line: head.line, column: head.column };
        if let Some(alignment) = groups.get(2) {
            let directive = data_item(DirectiveKind::Align, ".balign", vec![DataArg::Expr(expr(alignment)?)]);
            self.out.data.push(DataItem { labels: Vec::new(), directive: Some(directive) });
        }
        let saved = std::mem::take(&mut self.pending_labels);
        self.define_label(name);
        let labels = std::mem::replace(&mut self.pending_labels, saved);
        let directive = data_item(DirectiveKind::Zero, ".zero", vec![DataArg::Expr(size)]);
        self.out.data.push(DataItem { labels, directive: Some(directive) });
        self.last_was_data = true;
        Ok(())
    }

    fn instruction(&mut self, head: &Token, operands: &[Token]) -> Result<(), Diagnostic> {
        let groups = split_operands(operands);
        let mnemonic = head.text.as_str();
        let source = if groups.is_empty() {
            mnemonic.to_string()
        } else {
            format!("{} {}", mnemonic, groups.iter().map(|g| group_text(g)).collect::<Vec<_>>().join(", "))
        };

        if let Some(def) = self.isa.get(mnemonic) {
            match bind_operands(def, &groups) {
                Ok(args) => {
                    self.push_instruction(PendingInstruction {
                        mnemonic: mnemonic.to_string(),
                        args,
                        line: head.line,
                        column: head.column,
                        source,
                        pseudo: None,
                    });
                    return Ok(());
                }
                Err(e) if !self.isa.has_pseudo(mnemonic) => return Err(e.at(head)),
                Err(_) => {}
            }
        }
        let Some(pseudo) = self.isa.pseudo(mnemonic, groups.len()) else {
            if self.isa.has_pseudo(mnemonic) || self.isa.get(mnemonic).is_some() {
                return Err(Diagnostic::new(
                    head.line,
                    head.column,
                    format!("wrong number of operands for `{mnemonic}`: got {}", groups.len()),
                ));
            }
            return Err(Diagnostic::new(head.line, head.column, format!("unknown mnemonic `{mnemonic}`")));
        };
        for (group, arg) in groups.iter().zip(&pseudo.arguments) {
            let first = group.first().unwrap_or(head);
            if group.is_empty() {
                return Err(Diagnostic::new(first.line, first.column, "empty operand"));
            }
            if arg.is_register() && !(group.len() == 1 && parse_register(&group[0].text).is_some()) {
                return Err(Diagnostic::new(first.line, first.column, format!("expected register, found `{}`", group_text(group))));
            }
        }
        let texts: Vec<String> = groups.iter().map(|g| group_text(g)).collect();
        for line in pseudo.expand(&texts) {
            let tokens = tokenize(&line).map_err(|d| Diagnostic::new(head.line, head.column, d.message))?;
            let (real, ops) = tokens.split_first().expect("expansion is not empty");
            let def = self.isa.get(&real.text).expect("expansion target validated at load");
            let args = bind_operands(def, &split_operands(ops)).map_err(|e| e.at(head))?;
            self.push_instruction(PendingInstruction {
                mnemonic: real.text.clone(),
                args,
                line: head.line,
                column: head.column,
                source: source.clone(),
                pseudo: Some(mnemonic.to_string()),
            });
        }
        Ok(())
    }

    fn push_instruction(&mut self, instruction: PendingInstruction) {
        self.bind_pending_to_code();
        self.out.instructions.push(instruction);
        self.last_was_data = false;
    }
}

/// Operand binding failure, positioned at a token when one is known.
struct BindError {
    token: Option<(u32, u32)>,
    message: String,
}

impl BindError {
    fn at(self, head: &Token) -> Diagnostic {
        let (line, column) = self.token.unwrap_or((head.line, head.column));
        Diagnostic::new(line, column, self.message)
    }
}

fn bind_operands(def: &InstructionDefinition, groups: &[&[Token]]) -> Result<Vec<PendingArg>, BindError> {
    let count_error = || BindError {
        token: None,
        message: format!("`{}` expects {} operands, got {}", def.name, def.arguments.len(), groups.len()),
    };
    let args = &def.arguments;
    let mut bound = Vec::with_capacity(args.len());
    let (mut ai, mut gi) = (0, 0);
    while ai < args.len() {
        let group = *groups.get(gi).ok_or_else(count_error)?;
        let Some(first) = group.first() else {
            return Err(BindError { token: None, message: "empty operand".into() });
        };
        let pos = Some((first.line, first.column));
        let expr = |tokens: &[Token]| -> Result<PendingArg, BindError> {
            if tokens.is_empty() {
                return Ok(PendingArg::Expr(OperandExpr::Number(0)));
            }
            OperandExpr::parse(tokens)
                .map(PendingArg::Expr)
                .map_err(|e| BindError { token: pos, message: e.to_string() })
        };
        let pair = args.get(ai + 1).map(|next| (args[ai].is_immediate, next.is_immediate));
        if let (Some((offset, base)), Some(kinds)) = (memory_form(group), pair) {
            match kinds {
                (true, false) => bound.extend([expr(offset)?, PendingArg::Register(base)]),
                (false, true) => bound.extend([PendingArg::Register(base), expr(offset)?]),
                _ => return Err(BindError { token: pos, message: format!("unexpected memory operand for `{}`", def.name) }),
            }
            ai += 2;
        } else if pair == Some((true, false))
            && def.memory_access.is_some()
            && groups.len() - gi == args.len() - ai - 1
        {
            // `lw rd, symbol` addresses memory absolutely
            bound.extend([expr(group)?, PendingArg::Register(0)]);
            ai += 2;
        } else if args[ai].is_immediate {
            if let ([single], Some(_)) = (group, parse_register(&first.text)) {
                return Err(BindError { token: pos, message: format!("expected immediate, found register `{}`", single.text) });
            }
            bound.push(expr(group)?);
            ai += 1;
        } else {
            match (group, parse_register(&first.text)) {
                ([_], Some(reg)) => bound.push(PendingArg::Register(reg)),
                _ => {
                    return Err(BindError {
                        token: pos,
                        message: format!("expected register, found `{}`", group_text(group)),
                    })
                }
            }
            ai += 1;
        }
        gi += 1;
    }
    if gi != groups.len() {
        return Err(count_error());
    }
    Ok(bound)
}

/// Runs the first pass over a token stream.
pub fn pass_one(tokens: &[Token], isa: &IsaSet) -> Result<PartialProgram, AsmError> {
    let mut pass = Pass {
        isa,
        out: PartialProgram::default(),
        errors: Vec::new(),
        pending_labels: Vec::new(),
        section: Section::Unspecified,
        last_was_data: false,
    };
    let statements = tokens
        .split(|t| t.kind == TokenKind::Newline)
        .map(|line| line.iter().filter(|t| t.kind != TokenKind::Comment).cloned().collect::<Vec<_>>());
    for statement in statements {
        pass.statement(&statement);
    }
    pass.flush_pending();
    if pass.errors.is_empty() {
        Ok(pass.out)
    } else {
        Err(AsmError { diagnostics: pass.errors })
    }
}
