//! Cache and predictor against brute-force reference models.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvss_core::config::{CacheConfig, CpuConfig, HistoryKind, PredictorConfig, PredictorType, Replacement, WritePolicy};
use rvss_core::memsys::{Cache, MainMemory, MemorySystem};
use rvss_core::pipeline::{assemble_for, SimState};
use rvss_core::predictor::Predictor;
use rvss_golden::branch_model::{loop_outcomes, two_bit_mispredictions};
use rvss_golden::cache_model::{CacheModel, Policy};

fn geometry(rng: &mut ChaCha8Rng, replacement: Replacement, write_policy: WritePolicy) -> CacheConfig {
    let associativity = [1, 2, 4, 8][rng.gen_range(0..4)];
    CacheConfig {
        enabled: true,
        line_count: associativity * [1, 2, 4, 8, 16][rng.gen_range(0..5)],
        line_size: [4, 8, 16, 32, 64][rng.gen_range(0..5)],
        associativity,
        replacement,
        write_policy,
        access_delay: 1,
        line_replacement_delay: 4,
    }
}

#[test]
fn hit_miss_sequences_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for round in 0..24 {
        let replacement = if round % 2 == 0 { Replacement::Lru } else { Replacement::Fifo };
        let policy = if replacement == Replacement::Lru { Policy::Lru } else { Policy::Fifo };
        let write_policy = if round % 4 < 2 { WritePolicy::WriteBack } else { WritePolicy::WriteThrough };
        let g = geometry(&mut rng, replacement, write_policy);
        let mut memory = MainMemory::new(8192);
        let mut cache = Cache::new(&g, 3);
        let mut model = CacheModel::new(g.line_count, g.line_size, g.associativity, policy, write_policy == WritePolicy::WriteBack);
        let span = rng.gen_range(64..4096);
        for _ in 0..10_000 {
            let address = rng.gen_range(0..span) & !3;
            let store = rng.gen_bool(0.3);
            let mut buffer = [rng.gen(); 4];
            let event = cache.access(address, &mut buffer[..g.line_size.min(4) as usize], store, &mut memory);
            assert_eq!(event.hit, model.access(address, store), "round {round} {g:?}");
        }
    }
}

#[test]
fn write_policies_agree_after_flush() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..12 {
        let base = CpuConfig { memory_capacity: 4096, ..CpuConfig::default() };
        let g = geometry(&mut rng, [Replacement::Lru, Replacement::Fifo, Replacement::Random][round % 3], WritePolicy::WriteBack);
        let mut systems: Vec<MemorySystem> = [WritePolicy::WriteBack, WritePolicy::WriteThrough]
            .into_iter()
            .map(|write_policy| {
                let cache = CacheConfig { write_policy, ..g.clone() };
                MemorySystem::new(&CpuConfig { cache, ..base.clone() })
            })
            .collect();
        let mut flat = vec![0u8; 4096];
        for now in 0..10_000u64 {
            let width = [1u32, 2, 4][rng.gen_range(0..3)];
            let address = rng.gen_range(0..4096 - width);
            let store = rng.gen_bool(0.5);
            let data: Vec<u8> = (0..width).map(|_| rng.gen()).collect();
            if store {
                flat[address as usize..(address + width) as usize].copy_from_slice(&data);
            }
            for system in &mut systems {
                let mut tx = system.new_transaction(address, width, store, data.clone(), now);
                system.request(&mut tx, now).unwrap();
                if !store {
                    assert_eq!(tx.data, flat[address as usize..(address + width) as usize]);
                }
            }
        }
        for system in &mut systems {
            system.flush(10_000);
            assert!(system.memory.bytes() == flat.as_slice());
        }
    }
}

#[test]
fn loop_branch_counter_matches_enumeration() {
    for state in 0..=3u8 {
        for n in 1..12 {
            let config = PredictorConfig {
                btb_size: 4,
                pht_size: 4,
                predictor_type: PredictorType::TwoBit,
                default_state: state,
                history: HistoryKind::Local,
            };
            let mut predictor = Predictor::new(&config);
            let mut wrong = 0;
            for taken in loop_outcomes(n) {
                if predictor.predict(12).taken != taken {
                    wrong += 1;
                }
                predictor.update(12, taken, 4);
            }
            assert_eq!(wrong, two_bit_mispredictions(state, &loop_outcomes(n)), "state {state} n {n}");
        }
    }
}

#[test]
fn pipeline_counts_loop_mispredictions() {
    for state in [0u8, 3] {
        for n in 3..8 {
            let mut config = CpuConfig::default();
            config.predictor = PredictorConfig {
                btb_size: 16,
                pht_size: 16,
                predictor_type: PredictorType::TwoBit,
                default_state: state,
                history: HistoryKind::Local,
            };
            let source = format!("li x5, {n}\nloop:\naddi x5, x5, -1\nbnez x5, loop\n");
            let program = Arc::new(assemble_for(&config, &source, None, &[]).unwrap());
            let mut sim = SimState::new(config, program, None).unwrap();
            sim.run_to_end(10_000);
            let expected = two_bit_mispredictions(state, &loop_outcomes(n));
            // a first taken prediction still needs a BTB target
            let cold_btb = usize::from(state >= 2);
            assert_eq!(sim.stats.branches_mispredicted as usize, expected + cold_btb, "state {state} n {n}");
            assert_eq!(sim.stats.branches_resolved as usize, n);
        }
    }
}
