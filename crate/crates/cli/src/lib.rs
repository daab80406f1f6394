//! Batch runner: assemble (or compile) a program, run it on a CPU
//! description and print the statistics report.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use rvss_core::asm::program::abi_name;
use rvss_core::asm::{filter_compiler_output, ArrayDataType, UserArray};
use rvss_core::config::CpuConfig;
use rvss_core::memsys::{export_image, import_image, DumpFormat};
use rvss_core::pipeline::{assemble_for, HaltReason, LogEntry, RunOutcome, SimState};
use rvss_core::stats::StatsReport;
use serde::Serialize;

/// Template used for `--c-source` when neither `--gcc` nor `RVSS_CC` is set.
pub const DEFAULT_COMPILER: &str = "clang --target=riscv32 -march=rv32im -mabi=ilp32 -S {opt} {input} -o -";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "rvss", version, about = "Run an RV32IM program on a simulated out-of-order CPU")]
pub struct Args {
    /// Assembly source file.
    #[arg(long, required_unless_present = "c_source", conflicts_with = "c_source")]
    pub program: Option<PathBuf>,
    /// CPU description (JSON).
    #[arg(long)]
    pub cpu: PathBuf,
    /// Label to start execution at.
    #[arg(long)]
    pub entry: Option<String>,
    /// Initial memory: a .csv or .bin image, a .json list of arrays, or an
    /// inline array `name:type[:align]=v1,v2,...`, `=fill:VALUE:COUNT` or
    /// `=random:SEED:COUNT`. Repeatable.
    #[arg(long)]
    pub memory: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// 0: statistics, 1: plus registers, 2: plus the simulation log.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=2))]
    pub verbosity: u8,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_cycles: u64,
    /// Write final memory here (.csv for CSV, binary otherwise).
    #[arg(long)]
    pub dump_memory: Option<PathBuf>,
    /// Compiler command template with `{input}` and `{opt}` placeholders.
    #[arg(long, requires = "c_source")]
    pub gcc: Option<String>,
    /// C source to compile instead of `--program`.
    #[arg(long)]
    pub c_source: Option<PathBuf>,
    /// Optimization level substituted for `{opt}`, e.g. `O0` or `-O3`.
    #[arg(long, default_value = "O2", allow_hyphen_values = true)]
    pub opt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Register {
    pub name: String,
    pub abi: &'static str,
    pub value: u32,
}

/// The JSON report; `stats` has the same shape as the API's.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub halted: bool,
    pub halt_reason: Option<HaltReason>,
    pub budget_exhausted: bool,
    pub cycle: u64,
    pub stats: StatsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub registers: Option<Vec<Register>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<Vec<LogEntry>>,
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, String> {
    String::from_utf8(read(path)?).map_err(|_| format!("{}: not UTF-8 text", path.display()))
}

fn data_type(name: &str) -> Result<ArrayDataType, String> {
    serde_json::from_value(serde_json::Value::String(name.into())).map_err(|_| format!("unknown data type `{name}`"))
}

/// Parses `name:type[:align]=...`.
pub fn parse_inline_array(spec: &str) -> Result<UserArray, String> {
    let (head, body) = spec.split_once('=').ok_or_else(|| format!("array `{spec}`: expected `name:type=values`"))?;
    let parts: Vec<&str> = head.split(':').collect();
    let (name, kind, alignment) = match parts[..] {
        [name, kind] => (name, kind, None),
        [name, kind, align] => (name, kind, Some(align.parse().map_err(|_| format!("array `{name}`: bad alignment `{align}`"))?)),
        _ => return Err(format!("array `{spec}`: expected `name:type[:align]`")),
    };
    let number = |text: &str| text.trim().parse::<i64>().map_err(|_| format!("array `{name}`: bad number `{text}`"));
    let mut array = UserArray::with_values(name, data_type(kind)?, Vec::new());
    array.alignment = alignment;
    let fields: Vec<&str> = body.split(':').collect();
    match fields[..] {
        ["fill", value, count] => {
            array.values = None;
            array.fill = Some(number(value)?);
            array.count = Some(number(count)? as u32);
        }
        ["random", seed, count] => {
            array.values = None;
            array.random_seed = Some(number(seed)? as u64);
            array.count = Some(number(count)? as u32);
        }
        [values] => array.values = Some(values.split(',').map(number).collect::<Result<_, _>>()?),
        _ => return Err(format!("array `{name}`: cannot parse `{body}`")),
    }
    Ok(array)
}

#[derive(Debug, Default)]
struct MemoryInputs {
    image: Option<Vec<u8>>,
    arrays: Vec<UserArray>,
}

fn extension(path: &Path) -> String {
    path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).unwrap_or_default()
}

fn memory_inputs(specs: &[String], capacity: usize) -> Result<MemoryInputs, String> {
    let mut inputs = MemoryInputs::default();
    for spec in specs {
        let path = Path::new(spec);
        let format = match extension(path).as_str() {
            "csv" => Some(DumpFormat::Csv),
            "bin" => Some(DumpFormat::Binary),
            _ => None,
        };
        if let Some(format) = format {
            if inputs.image.is_some() {
                return Err("only one memory image may be given".into());
            }
            let image = import_image(format, &read(path)?, capacity).map_err(|e| format!("{spec}: {e}"))?;
            inputs.image = Some(image);
        } else if extension(path) == "json" && path.exists() {
            let arrays: Vec<UserArray> =
                serde_json::from_str(&read_text(path)?).map_err(|e| format!("{spec}: {e}"))?;
            inputs.arrays.extend(arrays);
        } else {
            inputs.arrays.push(parse_inline_array(spec)?);
        }
    }
    Ok(inputs)
}

fn compile(template: &str, source: &Path, opt: &str) -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("input.c");
    std::fs::write(&input, read(source)?).map_err(|e| e.to_string())?;
    let input = input.to_string_lossy();
    let args: Vec<String> =
        template.split_whitespace().map(|p| p.replace("{opt}", opt).replace("{input}", &input)).collect();
    let (program, rest) = args.split_first().ok_or("empty compiler command")?;
    let output = Command::new(program).args(rest).output().map_err(|e| format!("cannot run `{program}`: {e}"))?;
    if !output.status.success() {
        return Err(format!("compilation failed:\n{}", String::from_utf8_lossy(&output.stderr).trim_end()));
    }
    Ok(filter_compiler_output(&String::from_utf8_lossy(&output.stdout)))
}

/// Exit status of a run.
pub const EXIT_HALTED: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;

/// Simulates according to `args`; returns the report or an input error.
pub fn simulate(args: &Args) -> Result<Report, String> {
    let config = CpuConfig::from_json(&read_text(&args.cpu)?).map_err(|e| format!("{}: {e}", args.cpu.display()))?;
    let source = match (&args.program, &args.c_source) {
        (Some(program), _) => read_text(program)?,
        (None, Some(c)) => {
            let template = args.gcc.clone().or_else(|| std::env::var("RVSS_CC").ok()).unwrap_or(DEFAULT_COMPILER.into());
            let opt = if args.opt.starts_with('-') { args.opt.clone() } else { format!("-{}", args.opt) };
            compile(&template, c, &opt)?
        }
        (None, None) => return Err("--program is required".into()),
    };
    let memory = memory_inputs(&args.memory, config.memory_capacity as usize)?;
    let program = assemble_for(&config, &source, args.entry.as_deref(), &memory.arrays).map_err(|e| e.to_string())?;
    let mut state = SimState::new(config, Arc::new(program), memory.image.as_deref()).map_err(|e| e.to_string())?;
    let outcome = state.run_to_end(args.max_cycles);
    if let Some(path) = &args.dump_memory {
        let format = if extension(path) == "csv" { DumpFormat::Csv } else { DumpFormat::Binary };
        std::fs::write(path, export_image(format, &state.memory_snapshot())).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let registers = (0..32u8)
        .map(|r| Register { name: format!("x{r}"), abi: abi_name(r), value: state.arch_regs[r as usize] })
        .collect();
    Ok(Report {
        halted: state.is_halted(),
        halt_reason: state.halted.clone(),
        budget_exhausted: outcome == RunOutcome::BudgetExhausted,
        cycle: state.cycle,
        stats: state.report(),
        registers: (args.verbosity >= 1).then_some(registers),
        log: (args.verbosity >= 2).then(|| state.log.clone()),
    })
}

pub fn render_text(report: &Report) -> String {
    let s = &report.stats;
    let c = &s.counters;
    let mut out = String::new();
    let status = match &report.halt_reason {
        Some(HaltReason::EndOfCode) => "halted (end of code)".to_string(),
        Some(HaltReason::MainReturned) => "halted (main returned)".to_string(),
        Some(HaltReason::Fault { pc, detail }) => format!("halted (fault at {pc:#x}: {detail})"),
        None => "cycle budget exhausted".to_string(),
    };
    out.push_str(&format!("status                {status}\n"));
    let rows: [(&str, String); 13] = [
        ("cycles", c.cycles.to_string()),
        ("committed", c.committed.to_string()),
        ("IPC", format!("{:.4}", s.ipc)),
        ("fetched", c.fetched.to_string()),
        ("decoded", c.decoded.to_string()),
        ("flushes", c.flushes.to_string()),
        ("branches resolved", c.branches_resolved.to_string()),
        ("branches mispredicted", c.branches_mispredicted.to_string()),
        ("prediction accuracy", format!("{:.4}", s.prediction_accuracy)),
        ("cache accesses", c.cache_accesses.to_string()),
        ("cache hit rate", format!("{:.4}", s.hit_rate)),
        ("bytes written", c.bytes_written.to_string()),
        ("wall time (s)", format!("{:e}", s.wall_time_seconds)),
    ];
    for (name, value) in rows {
        out.push_str(&format!("{name:<22}{value}\n"));
    }
    for (unit, busy) in &s.per_unit_utilization {
        out.push_str(&format!("{:<22}{busy:.4}\n", format!("{unit} utilization")));
    }
    for (kind, count) in &c.dynamic_mix {
        out.push_str(&format!("{:<22}{count}\n", format!("committed {kind}")));
    }
    if let Some(registers) = &report.registers {
        out.push('\n');
        for chunk in registers.chunks(4) {
            let line: Vec<String> =
                chunk.iter().map(|r| format!("{:>3}/{:<4} {:#010x}", r.name, r.abi, r.value)).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
    }
    if let Some(log) = &report.log {
        out.push('\n');
        for entry in log {
            out.push_str(&format!("[{:>6}] {}\n", entry.cycle, entry.message));
        }
    }
    out
}

/// Full command-line behavior; returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_HALTED };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match simulate(&args) {
        Ok(report) => {
            let text = match args.format {
                Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
                Format::Text => render_text(&report),
            };
            let _ = stdout.write_all(text.as_bytes());
            if report.budget_exhausted {
                EXIT_BUDGET
            } else {
                EXIT_HALTED
            }
        }
        Err(message) => {
            let _ = writeln!(stderr, "rvss: {message}");
            EXIT_INPUT
        }
    }
}
