//! Release gate: every primary criterion, one PASS/FAIL line each.
//!
//! A criterion listed in `KNOWN_UNATTAINABLE` is reported as FAIL with its
//! measured value but does not fail the run; the gate instead checks that it
//! still measures exactly what was recorded, so any change surfaces.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvss_core::asm::filter_compiler_output;
use rvss_core::config::{
    random_config, CacheConfig, CpuConfig, FuConfig, HistoryKind, PredictorConfig, PredictorType, Replacement,
    WritePolicy,
};
use rvss_core::isa::{FuClass, IsaSet};
use rvss_core::memsys::{Cache, MainMemory, MemorySystem};
use rvss_core::pipeline::{assemble_for, state_at, HaltReason, RunOutcome, SimState};
use rvss_core::predictor::Predictor;
use rvss_golden::branch_model::{loop_outcomes, two_bit_mispredictions};
use rvss_golden::cache_model::{CacheModel, Policy};
use rvss_golden::cases::{instruction_cases, random_program, Case, INSTRUCTIONS, PSEUDOS};
use rvss_golden::Halt;
use tower::ServiceExt;

const QUICKSORT: &str = include_str!("../../core/samples/quicksort.s");
const LINKED_LIST: &str = include_str!("../../core/samples/linked_list.s");
const DISPATCH: &str = include_str!("../../core/samples/dispatch.s");
const LISTING: &str = include_str!("../../core/samples/data_directives.s");
const SAMPLES: [(&str, &str); 3] = [("quicksort", QUICKSORT), ("linked list", LINKED_LIST), ("dispatch", DISPATCH)];

/// Criteria that cannot hold as written, with the value they measure.
const KNOWN_UNATTAINABLE: [(&str, &str); 1] =
    [("predictor oracle: loop from state 0", "3 mispredictions for every n in 3..=64")];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    if ok {
        Ok(detail.into())
    } else {
        Err(detail.into())
    }
}

fn machine(config: &CpuConfig, source: &str) -> Result<SimState, String> {
    let program = assemble_for(config, source, None, &[]).map_err(|e| e.to_string())?;
    SimState::new(config.clone(), Arc::new(program), None).map_err(|e| e.to_string())
}

/// Runs `source` on both engines; `Err` describes the first difference.
fn against_reference(config: &CpuConfig, source: &str) -> Result<SimState, String> {
    let mut state = machine(config, source)?;
    let golden = rvss_golden::run(&state.program, config.memory_capacity as usize, None, 5_000_000);
    if state.run_to_end(10_000_000) != RunOutcome::Halted {
        return Err("did not halt".into());
    }
    let expected = match golden.halt {
        Halt::EndOfCode => HaltReason::EndOfCode,
        Halt::MainReturned => HaltReason::MainReturned,
        other => return Err(format!("reference stopped with {other:?}")),
    };
    if state.halted != Some(expected) {
        return Err(format!("halt {:?}, reference {:?}", state.halted, golden.halt));
    }
    if state.arch_regs != golden.regs {
        return Err("registers differ".into());
    }
    if state.memory_snapshot() != golden.memory {
        return Err("memory differs".into());
    }
    Ok(state)
}

fn golden_equivalence() -> Outcome {
    let start = Instant::now();
    let mut runs = 0;
    for seed in 0..24u64 {
        let config = random_config(seed);
        for (name, source) in SAMPLES {
            against_reference(&config, source).map_err(|e| format!("{name} on random config {seed}: {e}"))?;
            runs += 1;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), format!("{runs} runs (24 configs x 3 samples) exact in {elapsed:.2?}"))
}

fn per_instruction() -> Outcome {
    let isa = IsaSet::rv32im();
    let mut real: Vec<&str> = isa.definitions().map(|d| d.name.as_str()).collect();
    let mut pseudo: Vec<&str> = isa.pseudos().iter().map(|p| p.name.as_str()).collect();
    real.sort();
    real.dedup();
    pseudo.sort();
    pseudo.dedup();
    let (mut listed_real, mut listed_pseudo) = (INSTRUCTIONS.to_vec(), PSEUDOS.to_vec());
    listed_real.sort();
    listed_pseudo.sort();
    if real != listed_real || pseudo != listed_pseudo {
        return Err("test lists do not cover the instruction set".into());
    }
    let configs = [CpuConfig::default(), random_config(7), random_config(8)];
    let mut runs = 0;
    for case in instruction_cases(3, 2) {
        let Case { mnemonic, pseudo, source } = &case;
        for config in &configs {
            let state = against_reference(config, source).map_err(|e| format!("`{mnemonic}`: {e}\n{source}"))?;
            let exercised = state.program.instructions.iter().any(|i| match &i.expanded_from {
                Some(p) => *pseudo && p == mnemonic,
                None => !*pseudo && i.mnemonic == *mnemonic,
            });
            if !exercised {
                return Err(format!("`{mnemonic}` not exercised"));
            }
            runs += 1;
        }
    }
    Ok(format!("{} instructions + {} pseudo-instructions, {runs} end-state runs exact", real.len(), pseudo.len()))
}

fn replay() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..50 {
        let config = random_config(rng.gen());
        let source = random_program(rng.gen(), 25);
        let program = Arc::new(assemble_for(&config, &source, None, &[]).map_err(|e| e.to_string())?);
        let t = rng.gen_range(1..300);
        let direct = state_at(&config, program.clone(), None, t).map_err(|e| e.to_string())?.to_json();
        let mut previous = state_at(&config, program.clone(), None, t - 1).map_err(|e| e.to_string())?;
        previous.step();
        let again = state_at(&config, program, None, t).map_err(|e| e.to_string())?.to_json();
        if previous.to_json() != direct || again != direct {
            return Err(format!("triple {k} (t = {t}) differs"));
        }
    }
    Ok("50 (program, config, t) triples byte-identical".into())
}

fn random_geometry(rng: &mut ChaCha8Rng, replacement: Replacement, write_policy: WritePolicy) -> CacheConfig {
    let associativity = [1, 2, 4, 8][rng.gen_range(0..4)];
    CacheConfig {
        enabled: true,
        line_count: associativity * [1, 2, 4, 8, 16][rng.gen_range(0..5)],
        line_size: [4, 8, 16, 32, 64][rng.gen_range(0..5)],
        associativity,
        replacement,
        write_policy,
        access_delay: 1,
        line_replacement_delay: 3,
    }
}

fn cache_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut traces = 0;
    for (replacement, policy) in [(Replacement::Lru, Policy::Lru), (Replacement::Fifo, Policy::Fifo)] {
        for write_policy in [WritePolicy::WriteBack, WritePolicy::WriteThrough] {
            for _ in 0..5 {
                let g = random_geometry(&mut rng, replacement, write_policy);
                let mut memory = MainMemory::new(8192);
                let mut cache = Cache::new(&g, 1);
                let mut model =
                    CacheModel::new(g.line_count, g.line_size, g.associativity, policy, write_policy == WritePolicy::WriteBack);
                let span = rng.gen_range(64..8192);
                for i in 0..10_000 {
                    let address = rng.gen_range(0..span) & !3;
                    let store = rng.gen_bool(0.3);
                    let mut word = [0u8; 4];
                    let hit = cache.access(address, &mut word[..g.line_size.min(4) as usize], store, &mut memory).hit;
                    if hit != model.access(address, store) {
                        return Err(format!("{replacement:?} access {i} at {address:#x} differs for {g:?}"));
                    }
                }
                traces += 1;
            }
        }
    }
    for round in 0..6 {
        let g = random_geometry(&mut rng, [Replacement::Lru, Replacement::Fifo, Replacement::Random][round % 3], WritePolicy::WriteBack);
        let base = CpuConfig { memory_capacity: 4096, ..CpuConfig::default() };
        let mut systems: Vec<MemorySystem> = [WritePolicy::WriteBack, WritePolicy::WriteThrough]
            .into_iter()
            .map(|write_policy| MemorySystem::new(&CpuConfig { cache: CacheConfig { write_policy, ..g.clone() }, ..base.clone() }))
            .collect();
        for now in 0..10_000u64 {
            let width = [1u32, 2, 4][rng.gen_range(0..3)];
            let address = rng.gen_range(0..4096 - width);
            let store = rng.gen_bool(0.5);
            let data: Vec<u8> = (0..width).map(|_| rng.gen()).collect();
            for system in &mut systems {
                let mut tx = system.new_transaction(address, width, store, data.clone(), now);
                system.request(&mut tx, now).map_err(|e| e.to_string())?;
            }
        }
        for system in &mut systems {
            system.flush(10_000);
        }
        if systems[0].memory.bytes() != systems[1].memory.bytes() {
            return Err(format!("write-back and write-through memories differ after flush for {g:?}"));
        }
    }
    Ok(format!("{traces} LRU/FIFO traces of 10000 accesses exact; 6 write-back/write-through pairs equal after flush"))
}

fn loop_mispredictions(state: u8, n: usize) -> usize {
    let config = PredictorConfig {
        btb_size: 8,
        pht_size: 8,
        predictor_type: PredictorType::TwoBit,
        default_state: state,
        history: HistoryKind::Local,
    };
    let mut predictor = Predictor::new(&config);
    let mut wrong = 0;
    for taken in loop_outcomes(n) {
        wrong += usize::from(predictor.predict(32).taken != taken);
        predictor.update(32, taken, 8);
    }
    wrong
}

/// Mispredictions for every n in 3..=64, with the enumeration cross-check.
fn loop_counts(state: u8) -> Result<Vec<usize>, String> {
    (3..=64)
        .map(|n| {
            let measured = loop_mispredictions(state, n);
            let enumerated = two_bit_mispredictions(state, &loop_outcomes(n));
            if measured == enumerated {
                Ok(measured)
            } else {
                Err(format!("n = {n}: predictor {measured}, enumeration {enumerated}"))
            }
        })
        .collect()
}

fn predictor_from(state: u8, expected: usize) -> Outcome {
    let counts = loop_counts(state)?;
    let distinct: std::collections::BTreeSet<usize> = counts.iter().copied().collect();
    let measured = match distinct.len() {
        1 => format!("{} mispredictions for every n in 3..=64", counts[0]),
        _ => format!("mispredictions vary with n: {counts:?}"),
    };
    check(counts.iter().all(|&c| c == expected), format!("expected {expected}; {measured}"))
}

fn predictor_saturation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for predictor_type in [PredictorType::ZeroBit, PredictorType::OneBit, PredictorType::TwoBit] {
        for history in [HistoryKind::Local, HistoryKind::Global] {
            let config = PredictorConfig {
                btb_size: 16,
                pht_size: 16,
                predictor_type,
                default_state: rng.gen_range(0..=predictor_type.max_state()),
                history,
            };
            let mut predictor = Predictor::new(&config);
            for _ in 0..20_000 {
                let pc = rng.gen_range(0..256u32) * 4;
                predictor.update(pc, rng.gen_bool(0.6), rng.gen_range(0..256u32) * 4);
                if predictor.counters.iter().any(|&c| c > predictor_type.max_state()) {
                    return Err(format!("{predictor_type:?} counter out of range"));
                }
            }
        }
    }
    Ok("counters within bounds over 6 x 20000 random outcomes".into())
}

fn two_fx_config() -> CpuConfig {
    CpuConfig {
        fetch_width: 2,
        commit_width: 2,
        fu_list: vec![FuConfig::new(FuClass::Fx, 1), FuConfig::new(FuClass::Fx, 1), FuConfig::new(FuClass::Branch, 1), FuConfig::new(FuClass::Ls, 1)],
        ..CpuConfig::default()
    }
}

fn ipc_of(source: &str) -> Result<f64, String> {
    let mut state = machine(&two_fx_config(), source)?;
    if state.run_to_end(100_000) != RunOutcome::Halted || state.stats.committed != 200 {
        return Err("program did not commit 200 instructions".into());
    }
    Ok(state.report().ipc)
}

fn superscalar() -> Outcome {
    let independent: String = (0..200).map(|i| format!("add x{}, x{}, x{}\n", 5 + i % 20, 1 + i % 3, 2 + i % 2)).collect();
    let serial = "addi x5, x5, 1\n".repeat(200);
    let (wide, narrow) = (ipc_of(&independent)?, ipc_of(&serial)?);
    check(wide >= 1.8 && narrow <= 1.05, format!("independent IPC {wide:.3} (>= 1.8), serial IPC {narrow:.3} (<= 1.05)"))
}

fn structural_limits() -> Outcome {
    let mut cycles = 0u64;
    let mut runs = 0;
    let configs: Vec<CpuConfig> = (0..8).map(|s| random_config(100 + s)).chain([CpuConfig::default(), two_fx_config()]).collect();
    let mut sources: Vec<String> = SAMPLES.iter().map(|(_, s)| s.to_string()).collect();
    sources.extend((0..4).map(|s| random_program(s, 30)));
    for config in &configs {
        for source in &sources {
            let mut state = machine(config, source)?;
            while !state.is_halted() && state.cycle < 5_000_000 {
                state.step();
                cycles += 1;
                if state.rob.len() > config.rob_size as usize {
                    return Err(format!("ROB holds {} > {} at cycle {}", state.rob.len(), config.rob_size, state.cycle));
                }
                if state.last_committed > config.commit_width {
                    return Err(format!("{} commits in one cycle > {}", state.last_committed, config.commit_width));
                }
            }
            if state.report().ipc > config.commit_width as f64 {
                return Err(format!("IPC {} > commitWidth {}", state.report().ipc, config.commit_width));
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs, {cycles} cycles checked"))
}

fn compiler_fixtures() -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/compiler");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "s"))
        .collect();
    files.sort();
    files.into_iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap())).collect()
}

fn assembler() -> Outcome {
    let config = CpuConfig::default();
    let program = assemble_for(&config, LISTING, None, &[]).map_err(|e| e.to_string())?;
    let (x, arr, hello) = (program.labels["x"].value, program.labels["arr"].value, program.labels["hello"].value);
    if arr % 16 != 0 {
        return Err(format!("arr at {arr:#x} is not 16-byte aligned"));
    }
    if program.read_data(hello, 12) != Some(&b"Hello World\0"[..]) || program.data_base + program.data.len() as u32 != hello + 12 {
        return Err("hello is not the 12 bytes \"Hello World\\0\"".into());
    }
    if program.read_data(x, 4) != Some(&5u32.to_le_bytes()[..]) {
        return Err("x does not hold little-endian 5".into());
    }
    let fixtures = compiler_fixtures();
    for (name, raw) in &fixtures {
        let once = filter_compiler_output(raw);
        if filter_compiler_output(&once) != once {
            return Err(format!("{name}: filter not idempotent"));
        }
        let a = assemble_for(&config, raw, Some("main"), &[]).map_err(|e| format!("{name}: {e}"))?.image();
        let b = assemble_for(&config, &once, Some("main"), &[]).map_err(|e| format!("{name}: {e}"))?.image();
        if (&a.code, &a.data, a.entry_point) != (&b.code, &b.data, b.entry_point) {
            return Err(format!("{name}: filtered output assembles differently"));
        }
    }
    Ok(format!("arr {arr:#x}, hello 12 bytes, x = 5 LE; filter idempotent and equivalent on {} compiler outputs", fixtures.len()))
}

fn rvss(args: &[&str]) -> (i32, Vec<u8>, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rvss")).args(args).output().expect("run rvss");
    (out.status.code().unwrap_or(-1), out.stdout, String::from_utf8_lossy(&out.stderr).into_owned())
}

fn cli() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let write = |name: &str, text: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path.to_string_lossy().into_owned()
    };
    let cpu = write("cpu.json", &CpuConfig::default().to_json());
    let quicksort = write("quicksort.s", QUICKSORT);
    let forever = write("forever.s", "loop:\n    j loop\n");
    let bad = write("bad.s", "addd x1, x2, x3\n");

    let (code, _, stderr) = rvss(&["--cpu", &cpu]);
    if code != 1 || !stderr.contains("Usage") {
        return Err(format!("missing --program: exit {code}"));
    }
    let (code, _, stderr) = rvss(&["--program", &quicksort]);
    if code != 1 || !stderr.contains("--cpu") {
        return Err(format!("missing --cpu: exit {code}"));
    }
    for args in [vec!["--program", "/nonexistent.s", "--cpu", &cpu], vec!["--program", &bad, "--cpu", &cpu]] {
        let (code, _, _) = rvss(&args);
        if code != 1 {
            return Err(format!("input error {args:?}: exit {code}"));
        }
    }
    let (code, _, _) = rvss(&["--program", &forever, "--cpu", &cpu, "--max-cycles", "10"]);
    if code != 2 {
        return Err(format!("budget exhaustion: exit {code}"));
    }
    let json = ["--program", &quicksort, "--cpu", &cpu, "--format", "json", "--verbosity", "2"];
    let (code, first, _) = rvss(&json);
    let (_, second, _) = rvss(&json);
    if code != 0 {
        return Err(format!("quicksort: exit {code}"));
    }
    if first != second {
        return Err("JSON report differs between runs".into());
    }
    let report: serde_json::Value = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
    if report["halted"] != true {
        return Err("quicksort report not halted".into());
    }
    Ok("exit codes 1 (missing flag, bad input), 2 (budget), 0 (halt); JSON byte-identical".into())
}

fn server_latency() -> Outcome {
    let body = serde_json::json!({
        "config": CpuConfig::default(),
        "program": "    li t0, 6000\n    la t1, buf\nloop:\n    sw t0, 0(t1)\n    lw t2, 0(t1)\n    addi t0, t0, -1\n    bnez t0, loop\n    .data\nbuf: .word 0\n",
        "tick": 10_000,
    })
    .to_string();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let request = |body: String| async {
        let app = rvss_server::router(rvss_server::ServerConfig::default());
        let request = Request::post("/api/simulate").header(header::CONTENT_TYPE, "application/json").body(Body::from(body)).unwrap();
        let start = Instant::now();
        let response = app.oneshot(request).await.unwrap();
        let status = response.status();
        let bytes = response.into_body().collect().await.unwrap().to_bytes();
        (status, bytes, start.elapsed())
    };
    let (status, a, elapsed) = runtime.block_on(request(body.clone()));
    let (_, b, _) = runtime.block_on(request(body));
    if status != StatusCode::OK {
        return Err(format!("status {status}"));
    }
    let response: serde_json::Value = serde_json::from_slice(&a).map_err(|e| e.to_string())?;
    if response["cycle"] != 10_000 {
        return Err(format!("reached cycle {}", response["cycle"]));
    }
    check(elapsed < Duration::from_secs(1) && a == b, format!("tick 10000 in {elapsed:.2?}, bodies identical: {}", a == b))
}

#[test]
fn acceptance() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("golden-model equivalence", golden_equivalence),
        ("per-instruction tests", per_instruction),
        ("replay determinism", replay),
        ("cache oracle", cache_oracle),
        ("predictor oracle: loop from state 3", || predictor_from(3, 1)),
        ("predictor oracle: loop from state 0", || predictor_from(0, 2)),
        ("predictor oracle: saturation", predictor_saturation),
        ("superscalar sanity", superscalar),
        ("IPC <= commitWidth, ROB <= robSize", structural_limits),
        ("assembler listing and filter", assembler),
        ("CLI contract", cli),
        ("/api/simulate latency and determinism", server_latency),
    ];
    let mut unexpected = Vec::new();
    for (name, criterion) in criteria {
        let outcome = std::panic::catch_unwind(criterion).unwrap_or_else(|_| Err("panicked".into()));
        let known = KNOWN_UNATTAINABLE.iter().find(|(n, _)| *n == name);
        match (&outcome, known) {
            (Ok(detail), None) => println!("PASS  {name}: {detail}"),
            (Err(detail), Some((_, recorded))) if detail.ends_with(recorded) => {
                println!("FAIL  {name}: {detail} (known, see README)")
            }
            (Ok(detail), Some(_)) | (Err(detail), _) => {
                println!("FAIL  {name}: {detail}");
                unexpected.push(name);
            }
        }
    }
    assert!(unexpected.is_empty(), "unexpected results: {unexpected:?}");
}
