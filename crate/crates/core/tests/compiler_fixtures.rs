//! Captured clang output (rv32im, ilp32, -g) for a few C programs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rvss_core::asm::filter::{filter_compiler_output, source_line_mapping};
use rvss_core::config::CpuConfig;
use rvss_core::pipeline::{assemble_for, HaltReason, RunOutcome, SimState};

/// Program, value `main` returns.
const PROGRAMS: [(&str, u32); 3] = [("sum", 39), ("fib", 6765 / 3 + b'f' as u32), ("sort", -96i32 as u32)];

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/compiler").join(name)
}

fn outputs() -> Vec<(String, u32, String)> {
    let mut out = Vec::new();
    for (program, result) in PROGRAMS {
        for level in 0..4 {
            let name = format!("{program}_O{level}.s");
            let text = std::fs::read_to_string(fixture(&name)).unwrap();
            out.push((name, result, text));
        }
    }
    out
}

#[test]
fn filter_is_idempotent() {
    for (name, _, raw) in outputs() {
        let once = filter_compiler_output(&raw);
        assert_eq!(filter_compiler_output(&once), once, "{name}");
        assert!(!once.contains(".cfi_"), "{name}");
        assert!(once.lines().count() < raw.lines().count() / 2, "{name}");
    }
}

#[test]
fn filtered_output_assembles_to_the_same_program() {
    let config = CpuConfig::default();
    for (name, _, raw) in outputs() {
        let original = assemble_for(&config, &raw, Some("main"), &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
        let filtered = assemble_for(&config, &filter_compiler_output(&raw), Some("main"), &[]).unwrap();
        let (a, b) = (original.image(), filtered.image());
        assert_eq!((&a.code, &a.data, a.data_base, a.stack_top, a.entry_point), (&b.code, &b.data, b.data_base, b.stack_top, b.entry_point), "{name}");
        // only unreferenced local labels may disappear
        for (label, symbol) in &a.labels {
            assert!(b.labels.get(label).map_or(label.starts_with(".L"), |s| s == symbol), "{name}: {label}");
        }
    }
}

#[test]
fn compiled_programs_compute_their_results() {
    // recursion depth 20 needs more than the default 512-byte stack
    let config = CpuConfig { call_stack_size: 4096, ..CpuConfig::default() };
    for (name, expected, raw) in outputs() {
        let program = assemble_for(&config, &filter_compiler_output(&raw), Some("main"), &[]).unwrap();
        let mut state = SimState::new(config.clone(), Arc::new(program), None).unwrap();
        assert_eq!(state.run_to_end(1_000_000), RunOutcome::Halted, "{name}");
        assert_eq!(state.halted, Some(HaltReason::MainReturned), "{name}");
        assert_eq!(state.arch_regs[10], expected, "{name}");
    }
}

#[test]
fn line_mapping_points_into_the_c_source() {
    for (name, _, raw) in outputs() {
        let c_lines = std::fs::read_to_string(fixture(&format!("{}.c", name.split('_').next().unwrap())))
            .unwrap()
            .lines()
            .count() as u32;
        let mapping = source_line_mapping(&raw);
        assert!(!mapping.is_empty(), "{name}");
        assert!(mapping.values().all(|l| (1..=c_lines).contains(l)), "{name}");
    }
}
