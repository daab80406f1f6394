//! Cleanup of compiler-emitted assembly: drops debug sections, no-op
//! directives and unreferenced local labels, keeping everything that
//! affects the assembled program.

use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{tokenize, Token, TokenKind};
use super::parser::{is_ignored_directive, section_of, DirectiveKind, Section};

/// Local labels are the only ones the filter may remove.
fn is_local_label(name: &str) -> bool {
    name.starts_with(".L")
}

struct Line<'a> {
    text: &'a str,
    origin: u32,
    tokens: Vec<Token>,
}

impl Line<'_> {
    fn labels(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().take_while(|t| t.kind == TokenKind::LabelDef)
    }

    fn body(&self) -> &[Token] {
        let n = self.labels().count();
        &self.tokens[n..]
    }
}

/// Filtered text plus, for every output line, the 1-based input line it came from.
pub fn filter_with_origins(asm: &str) -> (String, Vec<u32>) {
    let mut kept: Vec<Line> = Vec::new();
    let mut section = Section::Unspecified;
    for (i, text) in asm.lines().enumerate() {
        let origin = i as u32 + 1;
        let Ok(tokens) = tokenize(text) else {
            // leave malformed lines for the assembler to report
            kept.push(Line { text, origin, tokens: Vec::new() });
            continue;
        };
        let line = Line { text, origin, tokens };
        let body = line.body();
        let directive = body.first().filter(|t| t.kind == TokenKind::Directive);
        if let Some(d) = directive {
            if let Some(next) = section_of(&d.text, &body[1..]) {
                section = next;
                if section == Section::Discarded {
                    continue;
                }
                // `.section .text.x,"ax",@progbits` is kept verbatim
                kept.push(line);
                continue;
            }
        }
        if section == Section::Discarded {
            continue;
        }
        let drop_body = directive.is_some_and(|d| {
            is_ignored_directive(&d.text)
                || (section == Section::Text && DirectiveKind::from_name(&d.text) == Some(DirectiveKind::Align))
        });
        if drop_body {
            if line.labels().next().is_none() {
                continue;
            }
            let cut = line.tokens[line.labels().count()].column as usize - 1;
            let text = trim_to_chars(text, cut);
            kept.push(Line { text, origin, tokens: line.tokens[..line.labels().count()].to_vec() });
            continue;
        }
        kept.push(line);
    }

    let referenced: BTreeSet<&str> = kept
        .iter()
        .flat_map(|l| l.body().iter())
        .filter(|t| t.kind == TokenKind::Symbol)
        .map(|t| t.text.as_str())
        .collect();

    let mut out = String::new();
    let mut origins = Vec::new();
    for line in &kept {
        let dead: Vec<&Token> =
            line.labels().filter(|t| is_local_label(t.label_name()) && !referenced.contains(t.label_name())).collect();
        if dead.is_empty() {
            out.push_str(line.text);
        } else {
            let rebuilt = remove_tokens(line.text, &dead);
            if rebuilt.trim().is_empty() {
                continue;
            }
            out.push_str(&rebuilt);
        }
        out.push('\n');
        origins.push(line.origin);
    }
    (out, origins)
}

/// Filters compiler output; idempotent.
pub fn filter_compiler_output(asm: &str) -> String {
    filter_with_origins(asm).0
}

fn trim_to_chars(text: &str, chars: usize) -> &str {
    let end = text.char_indices().nth(chars).map_or(text.len(), |(i, _)| i);
    text[..end].trim_end()
}

/// Removes the given single-line tokens (and the blanks after them).
fn remove_tokens(text: &str, tokens: &[&Token]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut keep = vec![true; chars.len()];
    for t in tokens {
        let start = t.column as usize - 1;
        let mut end = start + t.text.chars().count();
        while end < chars.len() && matches!(chars[end], ' ' | '\t') {
            end += 1;
        }
        keep[start..end].iter_mut().for_each(|k| *k = false);
    }
    let rebuilt: String = chars.iter().zip(&keep).filter(|(_, k)| **k).map(|(c, _)| c).collect();
    let leading_ws = chars.iter().take_while(|c| matches!(c, ' ' | '\t')).count();
    if rebuilt.chars().all(char::is_whitespace) {
        String::new()
    } else if leading_ws == 0 && tokens.first().is_some_and(|t| t.column == 1) {
        // keep instruction indentation when a leading label disappears
        format!("\t{}", rebuilt.trim_start())
    } else {
        rebuilt
    }
}

/// Source line of each instruction line of compiler output, taken from
/// `.loc` debug markers. Keys are 1-based input lines.
pub fn source_line_mapping(asm: &str) -> BTreeMap<u32, u32> {
    let mut mapping = BTreeMap::new();
    let mut current: Option<u32> = None;
    let mut section = Section::Unspecified;
    for (i, text) in asm.lines().enumerate() {
        let Ok(tokens) = tokenize(text) else { continue };
        let body: Vec<&Token> = tokens
            .iter()
            .filter(|t| !matches!(t.kind, TokenKind::LabelDef | TokenKind::Comment))
            .collect();
        let Some(head) = body.first() else { continue };
        match head.kind {
            TokenKind::Directive if head.text == ".loc" => {
                current = body.get(2).and_then(|t| t.text.parse().ok()).filter(|&l| l > 0);
            }
            TokenKind::Directive => {
                let operands: Vec<Token> = body[1..].iter().map(|t| (*t).clone()).collect();
                if let Some(s) = section_of(&head.text, &operands) {
                    section = s;
                    current = None;
                }
            }
            TokenKind::Symbol if section != Section::Data && section != Section::Discarded => {
                if let Some(c) = current {
                    mapping.insert(i as u32 + 1, c);
                }
            }
            _ => {}
        }
    }
    mapping
}
