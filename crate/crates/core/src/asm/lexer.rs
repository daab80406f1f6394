use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub enum TokenKind {
    Symbol,
    Directive,
    LabelDef,
    Comma,
    Newline,
    Comment,
    StringLit,
    Number,
    Paren,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Token {
    pub kind: TokenKind,
    /// Exact source text of the token.
    pub text: String,
    pub line: u32,
    pub column: u32,
}

impl Token {
    /// Label name without the trailing colon.
    pub fn label_name(&self) -> &str {
        self.text.strip_suffix(':').unwrap_or(&self.text)
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || matches!(c, '_' | '.' | '$')
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$')
}

/// Splits assembly source into tokens. Whitespace is dropped; every other
/// character of the source belongs to exactly one token.
pub fn tokenize(source: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut column) = (0usize, 1u32, 1u32);
    let mut statement_start = true;

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_column, start) = (line, column, i);
        let advance = |n: usize, i: &mut usize, column: &mut u32| {
            *i += n;
            *column += n as u32;
        };
        let kind = match c {
            '\n' => {
                i += 1;
                line += 1;
                column = 1;
                statement_start = true;
                tokens.push(Token { kind: TokenKind::Newline, text: "\n".into(), line: start_line, column: start_column });
                continue;
            }
            ' ' | '\t' | '\r' => {
                advance(1, &mut i, &mut column);
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    advance(1, &mut i, &mut column);
                }
                TokenKind::Comment
            }
            ',' => {
                advance(1, &mut i, &mut column);
                TokenKind::Comma
            }
            '(' | ')' => {
                advance(1, &mut i, &mut column);
                TokenKind::Paren
            }
            '"' => {
                advance(1, &mut i, &mut column);
                loop {
                    match chars.get(i) {
                        None | Some('\n') => {
                            return Err(Diagnostic::new(start_line, start_column, "unterminated string literal"))
                        }
                        Some('\\') => advance(2, &mut i, &mut column),
                        Some('"') => {
                            advance(1, &mut i, &mut column);
                            break;
                        }
                        Some(_) => advance(1, &mut i, &mut column),
                    }
                }
                if i > chars.len() {
                    return Err(Diagnostic::new(start_line, start_column, "unterminated string literal"));
                }
                TokenKind::StringLit
            }
            '\'' => {
                advance(1, &mut i, &mut column);
                if chars.get(i) == Some(&'\\') {
                    advance(1, &mut i, &mut column);
                }
                advance(1, &mut i, &mut column);
                if chars.get(i) != Some(&'\'') {
                    return Err(Diagnostic::new(start_line, start_column, "unterminated character literal"));
                }
                advance(1, &mut i, &mut column);
                TokenKind::Number
            }
            c if c.is_ascii_digit() => {
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    advance(1, &mut i, &mut column);
                }
                TokenKind::Number
            }
            '%' if chars.get(i + 1).is_some_and(|c| c.is_ascii_alphabetic()) => {
                advance(1, &mut i, &mut column);
                while i < chars.len() && is_ident_char(chars[i]) {
                    advance(1, &mut i, &mut column);
                }
                TokenKind::Symbol
            }
            c if is_ident_start(c) => {
                while i < chars.len() && is_ident_char(chars[i]) {
                    advance(1, &mut i, &mut column);
                }
                if chars.get(i) == Some(&':') {
                    advance(1, &mut i, &mut column);
                    TokenKind::LabelDef
                } else if c == '.' && statement_start {
                    TokenKind::Directive
                } else {
                    TokenKind::Symbol
                }
            }
            '<' | '>' if chars.get(i + 1) == Some(&c) => {
                advance(2, &mut i, &mut column);
                TokenKind::Operator
            }
            _ => {
                advance(1, &mut i, &mut column);
                TokenKind::Operator
            }
        };
        statement_start = kind == TokenKind::LabelDef;
        let text: String = chars[start..i].iter().collect();
        tokens.push(Token { kind, text, line: start_line, column: start_column });
    }
    Ok(tokens)
}

/// Decodes a string literal token (including its quotes) into bytes.
pub fn unescape_string(token: &Token) -> Result<Vec<u8>, Diagnostic> {
    let body = &token.text[1..token.text.len() - 1];
    let err = |msg: &str| Diagnostic::new(token.line, token.column, msg);
    let mut out = Vec::new();
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            let mut buf = [0u8; 4];
            out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            continue;
        }
        match chars.next().ok_or_else(|| err("dangling escape"))? {
            'n' => out.push(b'\n'),
            't' => out.push(b'\t'),
            'r' => out.push(b'\r'),
            'b' => out.push(8),
            'f' => out.push(12),
            'v' => out.push(11),
            'a' => out.push(7),
            '\\' => out.push(b'\\'),
            '"' => out.push(b'"'),
            '\'' => out.push(b'\''),
            'x' => {
                let mut value = 0u32;
                let mut digits = 0;
                while let Some(d) = chars.peek().and_then(|c| c.to_digit(16)) {
                    value = value * 16 + d;
                    digits += 1;
                    chars.next();
                }
                if digits == 0 {
                    return Err(err("\\x needs hex digits"));
                }
                out.push(value as u8);
            }
            d @ '0'..='7' => {
                let mut value = d.to_digit(8).unwrap();
                for _ in 0..2 {
                    match chars.peek().and_then(|c| c.to_digit(8)) {
                        Some(d) => {
                            value = value * 8 + d;
                            chars.next();
                        }
                        None => break,
                    }
                }
                out.push(value as u8);
            }
            other => return Err(err(&format!("unknown escape \\{other}"))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn instruction_line() {
        use TokenKind::*;
        assert_eq!(
            kinds("add x1, x2, x3"),
            vec![
                (Symbol, "add".into()),
                (Symbol, "x1".into()),
                (Comma, ",".into()),
                (Symbol, "x2".into()),
                (Comma, ",".into()),
                (Symbol, "x3".into()),
            ]
        );
    }

    #[test]
    fn data_definition_with_comment() {
        use TokenKind::*;
        assert_eq!(
            kinds("x:\n .word 5 # integer variable x"),
            vec![
                (LabelDef, "x:".into()),
                (Newline, "\n".into()),
                (Directive, ".word".into()),
                (Number, "5".into()),
                (Comment, "# integer variable x".into()),
            ]
        );
    }

    #[test]
    fn empty_source() {
        assert!(tokenize("").unwrap().is_empty());
    }

    #[test]
    fn unterminated_string() {
        let err = tokenize("  .asciiz \"abc\n").unwrap_err();
        assert_eq!((err.line, err.column), (1, 11));
    }

    #[test]
    fn local_labels_operands_and_relocations() {
        use TokenKind::*;
        assert_eq!(
            kinds(".L2: lw a5, %lo(arr)(a4)"),
            vec![
                (LabelDef, ".L2:".into()),
                (Symbol, "lw".into()),
                (Symbol, "a5".into()),
                (Comma, ",".into()),
                (Symbol, "%lo".into()),
                (Paren, "(".into()),
                (Symbol, "arr".into()),
                (Paren, ")".into()),
                (Paren, "(".into()),
                (Symbol, "a4".into()),
                (Paren, ")".into()),
            ]
        );
        assert_eq!(kinds("j .L3")[1], (Symbol, ".L3".into()));
        assert_eq!(kinds("a<<2")[1], (Operator, "<<".into()));
    }

    #[test]
    fn positions_reproduce_source() {
        let src = "main:\n\taddi sp, sp, -16 # frame\n  .asciiz \"a\\\"b\"\n";
        let tokens = tokenize(src).unwrap();
        let lines: Vec<&str> = src.split('\n').collect();
        for t in &tokens {
            if t.kind == TokenKind::Newline {
                continue;
            }
            let line: Vec<char> = lines[t.line as usize - 1].chars().collect();
            let start = t.column as usize - 1;
            let slice: String = line[start..start + t.text.chars().count()].iter().collect();
            assert_eq!(slice, t.text);
        }
        let s = tokens.iter().find(|t| t.kind == TokenKind::StringLit).unwrap();
        assert_eq!(unescape_string(s).unwrap(), b"a\"b");
    }
}
