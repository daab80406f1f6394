//! Stack-based postfix interpreter that gives instructions their semantics.
//!
//! An expression such as `\rs1 \rs2 + \rd =` is a whitespace separated list
//! of operand references (`\name`), integer literals and operators. Values
//! are 64-bit cells interpreted with RV32 semantics: every arithmetic result
//! is the 32-bit result sign-extended to 64 bits, comparisons push 1 or 0.
//!
//! The assignment operator `=` pops a register reference and a value and
//! records a write. Whatever value remains on the stack at the end is the
//! expression's leftover (a jump target, a branch condition or a memory
//! address).

use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::IsaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    Add,
    Sub,
    Mul,
    MulHigh,
    MulHighSignedUnsigned,
    MulHighUnsigned,
    Div,
    DivUnsigned,
    Rem,
    RemUnsigned,
    And,
    Or,
    Xor,
    ShiftLeft,
    ShiftRightLogical,
    ShiftRightArithmetic,
    Less,
    LessEqual,
    Greater,
    GreaterEqual,
    LessUnsigned,
    LessEqualUnsigned,
    GreaterUnsigned,
    GreaterEqualUnsigned,
    Equal,
    NotEqual,
    Not,
    Negate,
    SignExtend8,
    SignExtend16,
    ZeroExtend8,
    ZeroExtend16,
    Assign,
}

const OPERATORS: &[(&str, Operator)] = &[
    ("+", Operator::Add),
    ("-", Operator::Sub),
    ("*", Operator::Mul),
    ("mulh", Operator::MulHigh),
    ("mulhsu", Operator::MulHighSignedUnsigned),
    ("mulhu", Operator::MulHighUnsigned),
    ("/", Operator::Div),
    ("/u", Operator::DivUnsigned),
    ("%", Operator::Rem),
    ("%u", Operator::RemUnsigned),
    ("&", Operator::And),
    ("|", Operator::Or),
    ("^", Operator::Xor),
    ("<<", Operator::ShiftLeft),
    (">>>", Operator::ShiftRightLogical),
    (">>", Operator::ShiftRightArithmetic),
    ("<", Operator::Less),
    ("<=", Operator::LessEqual),
    (">", Operator::Greater),
    (">=", Operator::GreaterEqual),
    ("<u", Operator::LessUnsigned),
    ("<=u", Operator::LessEqualUnsigned),
    (">u", Operator::GreaterUnsigned),
    (">=u", Operator::GreaterEqualUnsigned),
    ("==", Operator::Equal),
    ("!=", Operator::NotEqual),
    ("~", Operator::Not),
    ("neg", Operator::Negate),
    ("sext8", Operator::SignExtend8),
    ("sext16", Operator::SignExtend16),
    ("zext8", Operator::ZeroExtend8),
    ("zext16", Operator::ZeroExtend16),
    ("=", Operator::Assign),
];

impl Operator {
    pub fn from_symbol(symbol: &str) -> Option<Self> {
        OPERATORS.iter().find(|(s, _)| *s == symbol).map(|(_, op)| *op)
    }

    pub fn symbol(self) -> &'static str {
        OPERATORS.iter().find(|(_, op)| *op == self).map(|(s, _)| *s).unwrap()
    }

    pub fn arity(self) -> usize {
        match self {
            Operator::Not
            | Operator::Negate
            | Operator::SignExtend8
            | Operator::SignExtend16
            | Operator::ZeroExtend8
            | Operator::ZeroExtend16 => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprToken {
    OperandRef(String),
    Literal(i64),
    Operator(Operator),
}

impl fmt::Display for ExprToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprToken::OperandRef(name) => write!(f, "\\{name}"),
            ExprToken::Literal(v) => write!(f, "{v}"),
            ExprToken::Operator(op) => f.write_str(op.symbol()),
        }
    }
}

/// Name of the builtin operand holding the instruction address.
pub const PC_OPERAND: &str = "pc";

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_literal(text: &str) -> Option<i64> {
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    if body.is_empty() || !body.starts_with(|c: char| c.is_ascii_digit()) {
        return None;
    }
    let magnitude = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        body.parse::<i64>().ok()?
    };
    Some(if negative { -magnitude } else { magnitude })
}

pub fn tokenize_expression(expr: &str) -> Result<Vec<ExprToken>, IsaError> {
    expr.split_whitespace()
        .map(|word| {
            if let Some(name) = word.strip_prefix('\\') {
                if is_identifier(name) {
                    Ok(ExprToken::OperandRef(name.to_string()))
                } else {
                    Err(IsaError::MalformedOperand(word.to_string()))
                }
            } else if let Some(value) = parse_literal(word) {
                Ok(ExprToken::Literal(value))
            } else if let Some(op) = Operator::from_symbol(word) {
                Ok(ExprToken::Operator(op))
            } else {
                Err(IsaError::UnknownOperator(word.to_string()))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub enum ExceptionKind {
    /// Integer division or remainder by zero. Reported, never fatal.
    DivideByZero,
    /// Access outside of data memory. Fatal when the instruction commits.
    MemoryFault,
    /// The instruction's semantics could not be evaluated. Fatal.
    IllegalInstruction,
}

impl ExceptionKind {
    pub fn is_fatal(self) -> bool {
        matches!(self, ExceptionKind::MemoryFault | ExceptionKind::IllegalInstruction)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct ExceptionRecord {
    pub kind: ExceptionKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InterpretResult {
    pub leftover: Option<u64>,
    pub writes: Vec<(String, u64)>,
    pub exception: Option<ExceptionRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("stack underflow at token {0}")]
    StackUnderflow(String),
    #[error("unresolvable operand \\{0}")]
    Unresolvable(String),
    #[error("assignment target must be an operand reference")]
    BadAssignTarget,
    #[error("{0} values left on the stack")]
    TooManyValues(usize),
}

enum Item<'a> {
    Value(u64),
    Ref(&'a str),
}

#[inline]
fn word(v: u64) -> u32 {
    v as u32
}

#[inline]
fn extend(v: u32) -> u64 {
    v as i32 as i64 as u64
}

fn binary(op: Operator, a: u64, b: u64, exception: &mut Option<ExceptionRecord>) -> u64 {
    let (ua, ub) = (word(a), word(b));
    let (sa, sb) = (ua as i32, ub as i32);
    let divide_by_zero = |exception: &mut Option<ExceptionRecord>, what: &str| {
        *exception = Some(ExceptionRecord {
            kind: ExceptionKind::DivideByZero,
            detail: format!("{what} by zero"),
        });
    };
    let bool_value = |c: bool| c as u64;
    match op {
        Operator::Add => extend(ua.wrapping_add(ub)),
        Operator::Sub => extend(ua.wrapping_sub(ub)),
        Operator::Mul => extend(ua.wrapping_mul(ub)),
        Operator::MulHigh => extend(((sa as i64 * sb as i64) >> 32) as u32),
        Operator::MulHighSignedUnsigned => extend(((sa as i64 * ub as i64) >> 32) as u32),
        Operator::MulHighUnsigned => extend(((ua as u64 * ub as u64) >> 32) as u32),
        Operator::Div => {
            if sb == 0 {
                divide_by_zero(exception, "division");
                extend(u32::MAX)
            } else {
                extend(sa.wrapping_div(sb) as u32)
            }
        }
        Operator::DivUnsigned => {
            if ub == 0 {
                divide_by_zero(exception, "division");
                extend(u32::MAX)
            } else {
                extend(ua / ub)
            }
        }
        Operator::Rem => {
            if sb == 0 {
                divide_by_zero(exception, "remainder");
                extend(ua)
            } else {
                extend(sa.wrapping_rem(sb) as u32)
            }
        }
        Operator::RemUnsigned => {
            if ub == 0 {
                divide_by_zero(exception, "remainder");
                extend(ua)
            } else {
                extend(ua % ub)
            }
        }
        Operator::And => extend(ua & ub),
        Operator::Or => extend(ua | ub),
        Operator::Xor => extend(ua ^ ub),
        Operator::ShiftLeft => extend(ua << (ub & 31)),
        Operator::ShiftRightLogical => extend(ua >> (ub & 31)),
        Operator::ShiftRightArithmetic => extend((sa >> (ub & 31)) as u32),
        Operator::Less => bool_value(sa < sb),
        Operator::LessEqual => bool_value(sa <= sb),
        Operator::Greater => bool_value(sa > sb),
        Operator::GreaterEqual => bool_value(sa >= sb),
        Operator::LessUnsigned => bool_value(ua < ub),
        Operator::LessEqualUnsigned => bool_value(ua <= ub),
        Operator::GreaterUnsigned => bool_value(ua > ub),
        Operator::GreaterEqualUnsigned => bool_value(ua >= ub),
        Operator::Equal => bool_value(ua == ub),
        Operator::NotEqual => bool_value(ua != ub),
        _ => unreachable!("{op:?} is not binary"),
    }
}

fn unary(op: Operator, a: u64) -> u64 {
    let ua = word(a);
    match op {
        Operator::Not => extend(!ua),
        Operator::Negate => extend(ua.wrapping_neg()),
        Operator::SignExtend8 => extend(ua as u8 as i8 as i32 as u32),
        Operator::SignExtend16 => extend(ua as u16 as i16 as i32 as u32),
        Operator::ZeroExtend8 => ua as u8 as u64,
        Operator::ZeroExtend16 => ua as u16 as u64,
        _ => unreachable!("{op:?} is not unary"),
    }
}

/// Evaluates a tokenized postfix expression.
///
/// `bindings` resolves operand names other than the builtin `\pc`. Bindings
/// are never mutated; assignments only show up in the returned writes.
pub fn eval_expression<F>(tokens: &[ExprToken], bindings: F, pc: u32) -> Result<InterpretResult, EvalError>
where
    F: Fn(&str) -> Option<u64>,
{
    let resolve = |name: &str| -> Result<u64, EvalError> {
        if name == PC_OPERAND {
            Ok(pc as u64)
        } else {
            bindings(name).ok_or_else(|| EvalError::Unresolvable(name.to_string()))
        }
    };
    let mut stack: Vec<Item<'_>> = Vec::with_capacity(8);
    let mut result = InterpretResult::default();

    for token in tokens {
        match token {
            ExprToken::OperandRef(name) => stack.push(Item::Ref(name)),
            ExprToken::Literal(v) => stack.push(Item::Value(*v as u64)),
            ExprToken::Operator(Operator::Assign) => {
                let target = stack.pop().ok_or_else(|| EvalError::StackUnderflow("=".into()))?;
                let value = stack.pop().ok_or_else(|| EvalError::StackUnderflow("=".into()))?;
                let Item::Ref(target) = target else {
                    return Err(EvalError::BadAssignTarget);
                };
                let value = match value {
                    Item::Value(v) => v,
                    Item::Ref(name) => resolve(name)?,
                };
                result.writes.push((target.to_string(), value));
            }
            ExprToken::Operator(op) => {
                let mut take = || -> Result<u64, EvalError> {
                    match stack.pop() {
                        Some(Item::Value(v)) => Ok(v),
                        Some(Item::Ref(name)) => resolve(name),
                        None => Err(EvalError::StackUnderflow(op.symbol().into())),
                    }
                };
                let value = if op.arity() == 1 {
                    unary(*op, take()?)
                } else {
                    let rhs = take()?;
                    let lhs = take()?;
                    binary(*op, lhs, rhs, &mut result.exception)
                };
                stack.push(Item::Value(value));
            }
        }
    }

    match stack.len() {
        0 => {}
        1 => {
            result.leftover = Some(match stack.pop().unwrap() {
                Item::Value(v) => v,
                Item::Ref(name) => resolve(name)?,
            })
        }
        n => return Err(EvalError::TooManyValues(n)),
    }
    Ok(result)
}
