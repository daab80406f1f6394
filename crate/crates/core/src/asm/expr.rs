//! Constant expressions in instruction operands and data directives,
//! e.g. `arr+64`, `-12`, `%hi(table)`, `(end - start) / 4`.

use std::collections::BTreeMap;

use super::lexer::{tokenize, Token, TokenKind};
use super::Symbol;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OperandExpr {
    Number(i64),
    Label(String),
    Neg(Box<OperandExpr>),
    Not(Box<OperandExpr>),
    Hi(Box<OperandExpr>),
    Lo(Box<OperandExpr>),
    Binary(BinOp, Box<OperandExpr>, Box<OperandExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    And,
    Or,
    Xor,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("expression is not a constant")]
    NotConstant,
    #[error("division by zero in expression")]
    DivisionByZero,
    #[error("{0}")]
    Syntax(String),
}

/// Value with its relocation class: `relocation` counts how many label
/// addresses are summed into the value (0 = plain constant).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Relocated {
    value: i64,
    relocation: i32,
}

impl OperandExpr {
    pub fn parse(tokens: &[Token]) -> Result<Self, ExprError> {
        if tokens.is_empty() {
            return Err(ExprError::Syntax("missing expression".into()));
        }
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.or()?;
        if let Some(t) = tokens.get(parser.pos) {
            return Err(ExprError::Syntax(format!("unexpected `{}` in expression", t.text)));
        }
        Ok(expr)
    }

    pub fn parse_text(text: &str) -> Result<Self, ExprError> {
        let tokens = tokenize(text).map_err(|d| ExprError::Syntax(d.message))?;
        Self::parse(&tokens)
    }

    pub fn labels(&self, out: &mut Vec<String>) {
        match self {
            OperandExpr::Number(_) => {}
            OperandExpr::Label(l) => out.push(l.clone()),
            OperandExpr::Neg(e) | OperandExpr::Not(e) | OperandExpr::Hi(e) | OperandExpr::Lo(e) => e.labels(out),
            OperandExpr::Binary(_, a, b) => {
                a.labels(out);
                b.labels(out);
            }
        }
    }

    fn eval_relocated(&self, symbols: &BTreeMap<String, Symbol>) -> Result<Relocated, ExprError> {
        let constant = |value| Ok(Relocated { value, relocation: 0 });
        match self {
            OperandExpr::Number(v) => constant(*v),
            OperandExpr::Label(name) => {
                let sym = symbols.get(name).ok_or_else(|| ExprError::UndefinedLabel(name.clone()))?;
                Ok(Relocated { value: sym.value as i64, relocation: 1 })
            }
            OperandExpr::Neg(e) => {
                let v = e.eval_relocated(symbols)?;
                Ok(Relocated { value: v.value.wrapping_neg(), relocation: -v.relocation })
            }
            OperandExpr::Not(e) => constant(!e.eval_relocated(symbols)?.constant()?),
            // %hi/%lo produce absolute halves of an address
            OperandExpr::Hi(e) => {
                let v = e.eval_relocated(symbols)?.value as i32;
                constant((((v as i64) + 0x800) >> 12) & 0xfffff)
            }
            OperandExpr::Lo(e) => {
                let v = e.eval_relocated(symbols)?.value as i32;
                constant(((v << 20) >> 20) as i64)
            }
            OperandExpr::Binary(op, a, b) => {
                let (a, b) = (a.eval_relocated(symbols)?, b.eval_relocated(symbols)?);
                match op {
                    BinOp::Add => Ok(Relocated {
                        value: a.value.wrapping_add(b.value),
                        relocation: a.relocation + b.relocation,
                    }),
                    BinOp::Sub => Ok(Relocated {
                        value: a.value.wrapping_sub(b.value),
                        relocation: a.relocation - b.relocation,
                    }),
                    _ => {
                        let (x, y) = (a.constant()?, b.constant()?);
                        let value = match op {
                            BinOp::Mul => x.wrapping_mul(y),
                            BinOp::Div | BinOp::Rem if y == 0 => return Err(ExprError::DivisionByZero),
                            BinOp::Div => x.wrapping_div(y),
                            BinOp::Rem => x.wrapping_rem(y),
                            BinOp::Shl => x.wrapping_shl(y as u32),
                            BinOp::Shr => x.wrapping_shr(y as u32),
                            BinOp::And => x & y,
                            BinOp::Or => x | y,
                            BinOp::Xor => x ^ y,
                            BinOp::Add | BinOp::Sub => unreachable!(),
                        };
                        constant(value)
                    }
                }
            }
        }
    }

    /// Absolute value of the expression, or the offset from `instr_address`
    /// when the operand is pc-relative and refers to a label.
    pub fn eval(
        &self,
        symbols: &BTreeMap<String, Symbol>,
        instr_address: u32,
        pc_relative: bool,
    ) -> Result<i64, ExprError> {
        let v = self.eval_relocated(symbols)?;
        match v.relocation {
            0 => Ok(v.value),
            1 if pc_relative => Ok(v.value - instr_address as i64),
            1 => Ok(v.value),
            _ => Err(ExprError::NotConstant),
        }
    }
}

impl Relocated {
    fn constant(self) -> Result<i64, ExprError> {
        if self.relocation == 0 {
            Ok(self.value)
        } else {
            Err(ExprError::NotConstant)
        }
    }
}

/// Evaluates operand text against a symbol table.
pub fn eval_operand_expression(
    expr: &str,
    symbols: &BTreeMap<String, Symbol>,
    instr_address: u32,
    is_pc_relative: bool,
) -> Result<i64, ExprError> {
    OperandExpr::parse_text(expr)?.eval(symbols, instr_address, is_pc_relative)
}

pub fn parse_number(text: &str) -> Option<i64> {
    if let Some(body) = text.strip_prefix('\'') {
        let body = body.strip_suffix('\'')?;
        let mut chars = body.chars();
        let value = match (chars.next()?, chars.next()) {
            ('\\', Some(e)) => match e {
                'n' => 10,
                't' => 9,
                'r' => 13,
                '0' => 0,
                '\\' => 92,
                '\'' => 39,
                '"' => 34,
                _ => return None,
            },
            (c, None) => c as i64,
            _ => return None,
        };
        return Some(value);
    }
    let lower = text.to_ascii_lowercase();
    if let Some(hex) = lower.strip_prefix("0x") {
        i64::from_str_radix(hex, 16).ok()
    } else if let Some(bin) = lower.strip_prefix("0b") {
        i64::from_str_radix(bin, 2).ok()
    } else {
        lower.parse().ok()
    }
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<&str> {
        self.tokens.get(self.pos).filter(|t| t.kind == TokenKind::Operator).map(|t| t.text.as_str())
    }

    fn binary_level(
        &mut self,
        ops: &[(&str, BinOp)],
        next: fn(&mut Self) -> Result<OperandExpr, ExprError>,
    ) -> Result<OperandExpr, ExprError> {
        let mut lhs = next(self)?;
        while let Some(op) = self.peek_op().and_then(|s| ops.iter().find(|(sym, _)| *sym == s)).map(|(_, op)| *op) {
            self.pos += 1;
            let rhs = next(self)?;
            lhs = OperandExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<OperandExpr, ExprError> {
        self.binary_level(&[("|", BinOp::Or), ("^", BinOp::Xor)], Self::and)
    }

    fn and(&mut self) -> Result<OperandExpr, ExprError> {
        self.binary_level(&[("&", BinOp::And)], Self::shift)
    }

    fn shift(&mut self) -> Result<OperandExpr, ExprError> {
        self.binary_level(&[("<<", BinOp::Shl), (">>", BinOp::Shr)], Self::additive)
    }

    fn additive(&mut self) -> Result<OperandExpr, ExprError> {
        self.binary_level(&[("+", BinOp::Add), ("-", BinOp::Sub)], Self::multiplicative)
    }

    fn multiplicative(&mut self) -> Result<OperandExpr, ExprError> {
        self.binary_level(&[("*", BinOp::Mul), ("/", BinOp::Div), ("%", BinOp::Rem)], Self::unary)
    }

    fn unary(&mut self) -> Result<OperandExpr, ExprError> {
        match self.peek_op() {
            Some("-") => {
                self.pos += 1;
                Ok(OperandExpr::Neg(Box::new(self.unary()?)))
            }
            Some("+") => {
                self.pos += 1;
                self.unary()
            }
            Some("~") => {
                self.pos += 1;
                Ok(OperandExpr::Not(Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn expect_close(&mut self) -> Result<(), ExprError> {
        match self.tokens.get(self.pos) {
            Some(t) if t.is(TokenKind::Paren, ")") => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ExprError::Syntax("expected `)`".into())),
        }
    }

    fn primary(&mut self) -> Result<OperandExpr, ExprError> {
        let token = self.tokens.get(self.pos).ok_or_else(|| ExprError::Syntax("unexpected end of expression".into()))?;
        self.pos += 1;
        match token.kind {
            TokenKind::Number => parse_number(&token.text)
                .map(OperandExpr::Number)
                .ok_or_else(|| ExprError::Syntax(format!("malformed number `{}`", token.text))),
            TokenKind::Paren if token.text == "(" => {
                let inner = self.or()?;
                self.expect_close()?;
                Ok(inner)
            }
            TokenKind::Symbol if token.text.starts_with('%') => {
                let wrap: fn(Box<OperandExpr>) -> OperandExpr = match token.text.as_str() {
                    "%hi" => OperandExpr::Hi,
                    "%lo" => OperandExpr::Lo,
                    other => return Err(ExprError::Syntax(format!("unsupported relocation `{other}`"))),
                };
                match self.tokens.get(self.pos) {
                    Some(t) if t.is(TokenKind::Paren, "(") => self.pos += 1,
                    _ => return Err(ExprError::Syntax(format!("expected `(` after {}", token.text))),
                }
                let inner = self.or()?;
                self.expect_close()?;
                Ok(wrap(Box::new(inner)))
            }
            TokenKind::Symbol => Ok(OperandExpr::Label(token.text.clone())),
            _ => Err(ExprError::Syntax(format!("unexpected `{}` in expression", token.text))),
        }
    }
}

#[cfg(test)]
pub(crate) fn symbol_table<'a>(entries: impl IntoIterator<Item = (&'a str, super::Segment, u32)>) -> BTreeMap<String, Symbol> {
    entries.into_iter().map(|(n, segment, value)| (n.to_string(), Symbol { segment, value })).collect()
}
