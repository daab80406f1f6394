//! C to assembly through an external cross-compiler.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use rvss_core::asm::{filter_with_origins, source_line_mapping, Diagnostic};
use tokio::process::Command;

use crate::api::{CompileResponse, LineMapping, OptimizationLevel};

/// Used when no template is configured.
pub const DEFAULT_TEMPLATE: &str = "clang --target=riscv32 -march=rv32im -mabi=ilp32 -S -g {opt} {input} -o -";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Compiler {
    /// Command line with `{opt}` and `{input}` placeholders, split on whitespace.
    pub template: String,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompileFailure {
    Unavailable(String),
    Timeout(Duration),
}

impl Default for Compiler {
    fn default() -> Self {
        Self { template: DEFAULT_TEMPLATE.into(), timeout: Duration::from_secs(10) }
    }
}

fn diagnostic_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"(?m)^[^\n:]*:(\d+):(\d+): (?:fatal )?error: (.*)$").unwrap())
}

/// Error lines of compiler stderr; a single unpositioned entry when none parse.
pub fn parse_diagnostics(stderr: &str) -> Vec<Diagnostic> {
    let found: Vec<Diagnostic> = diagnostic_pattern()
        .captures_iter(stderr)
        .map(|c| Diagnostic::new(c[1].parse().unwrap_or(0), c[2].parse().unwrap_or(0), c[3].trim_end()))
        .collect();
    if found.is_empty() {
        vec![Diagnostic::new(0, 0, stderr.trim())]
    } else {
        found
    }
}

/// Filtered assembly plus the C line each instruction line came from.
pub fn postprocess(raw: &str) -> (String, Vec<LineMapping>) {
    let (asm, origins) = filter_with_origins(raw);
    let source_lines = source_line_mapping(raw);
    let mut grouped: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (i, origin) in origins.iter().enumerate() {
        if let Some(c_line) = source_lines.get(origin) {
            grouped.entry(*c_line).or_default().push(i as u32 + 1);
        }
    }
    let mapping = grouped.into_iter().map(|(c_line, asm_lines)| LineMapping { c_line, asm_lines }).collect();
    (asm, mapping)
}

impl Compiler {
    pub async fn compile(&self, c_code: &str, level: OptimizationLevel) -> Result<CompileResponse, CompileFailure> {
        let dir = tempfile::tempdir().map_err(|e| CompileFailure::Unavailable(e.to_string()))?;
        let input = dir.path().join("input.c");
        tokio::fs::write(&input, c_code).await.map_err(|e| CompileFailure::Unavailable(e.to_string()))?;
        let input = input.to_string_lossy();
        let args: Vec<String> = self
            .template
            .split_whitespace()
            .map(|part| part.replace("{opt}", level.flag()).replace("{input}", &input))
            .collect();
        let Some((program, rest)) = args.split_first() else {
            return Err(CompileFailure::Unavailable("no compiler command configured".into()));
        };
        let mut command = Command::new(program);
        command.args(rest).current_dir(dir.path()).kill_on_drop(true);
        let output = match tokio::time::timeout(self.timeout, command.output()).await {
            Err(_) => return Err(CompileFailure::Timeout(self.timeout)),
            Ok(Err(e)) if e.kind() == ErrorKind::NotFound => {
                return Err(CompileFailure::Unavailable(format!("`{program}` not found")))
            }
            Ok(Err(e)) => return Err(CompileFailure::Unavailable(format!("`{program}`: {e}"))),
            Ok(Ok(output)) => output,
        };
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Ok(CompileResponse { asm: None, errors: parse_diagnostics(&stderr), mapping: Vec::new() });
        }
        let (asm, mapping) = postprocess(&String::from_utf8_lossy(&output.stdout));
        Ok(CompileResponse { asm: Some(asm), errors: Vec::new(), mapping })
    }
}
