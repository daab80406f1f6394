//! The out-of-order engine must end in the same architectural state as the
//! in-order reference interpreter.

use std::sync::Arc;

use rvss_core::config::{random_config, CpuConfig};
use rvss_core::pipeline::{assemble_for, HaltReason, RunOutcome, SimState};
use rvss_golden::{run, Halt};

const QUICKSORT: &str = include_str!("../samples/quicksort.s");
const LINKED_LIST: &str = include_str!("../samples/linked_list.s");
const DISPATCH: &str = include_str!("../samples/dispatch.s");

fn compare(config: &CpuConfig, source: &str) -> SimState {
    let program = Arc::new(assemble_for(config, source, None, &[]).unwrap());
    let golden = run(&program, config.memory_capacity as usize, None, 1_000_000);
    let mut state = SimState::new(config.clone(), program, None).unwrap();
    assert_eq!(state.run_to_end(2_000_000), RunOutcome::Halted, "{}", config.name);
    let expected = match golden.halt {
        Halt::EndOfCode => HaltReason::EndOfCode,
        Halt::MainReturned => HaltReason::MainReturned,
        other => panic!("reference stopped with {other:?}"),
    };
    assert_eq!(state.halted, Some(expected), "{}", config.name);
    assert_eq!(state.arch_regs, golden.regs, "{}", config.name);
    assert!(state.memory_snapshot() == golden.memory, "{}: memory differs", config.name);
    assert_eq!(state.stats.committed, golden.retired, "{}", config.name);
    assert_eq!(state.live_spec_registers(), 0);
    state
}

#[test]
fn quicksort_sorts() {
    let state = compare(&CpuConfig { call_stack_size: 4096, ..CpuConfig::default() }, QUICKSORT);
    let base = state.program.labels["array"].value;
    let bytes = state.memsys.debug_read(base, 256).unwrap();
    let words: Vec<i32> = bytes.chunks(4).map(|c| i32::from_le_bytes(c.try_into().unwrap())).collect();
    assert!(words.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn samples_match_reference_under_random_configs() {
    for seed in 0..12 {
        let config = random_config(seed);
        for source in [QUICKSORT, LINKED_LIST, DISPATCH] {
            compare(&config, source);
        }
    }
}
