//! Main memory, L1 cache and the transactional timing model.
//!
//! A transaction's data effects happen when it is registered; its
//! completion cycle tells the requester when the result may be used.

pub mod cache;
pub mod memory;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use cache::{Cache, CacheLine, LineEvent};
pub use memory::{export_image, import_image, parse_csv, to_csv, DumpFormat, MainMemory, MemoryError};

use crate::asm::program::base64_bytes;
use crate::config::{CpuConfig, WritePolicy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct MemoryTransaction {
    pub id: u64,
    pub address: u32,
    pub size: u32,
    pub is_store: bool,
    /// Store payload, or the loaded bytes once registered.
    #[serde(with = "base64_bytes")]
    #[schemars(with = "String")]
    pub data: Vec<u8>,
    pub request_cycle: u64,
    pub completion_cycle: u64,
    pub is_cache_line_flush: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<u64>,
}

/// Timing and cache outcome of a registered transaction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AccessReport {
    pub completion: u64,
    /// One event per cache line touched (empty when the cache is disabled).
    pub lines: Vec<LineEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MemorySystem {
    pub memory: MainMemory,
    pub cache: Option<Cache>,
    write_policy: WritePolicy,
    access_delay: u64,
    replacement_delay: u64,
    /// Main memory latencies converted to core cycles.
    load_latency: u64,
    store_latency: u64,
    next_id: u64,
}

impl MemorySystem {
    pub fn new(config: &CpuConfig) -> Self {
        Self {
            memory: MainMemory::new(config.memory_capacity as usize),
            cache: config.cache.enabled.then(|| Cache::new(&config.cache, config.prng_seed)),
            write_policy: config.cache.write_policy,
            access_delay: config.cache.access_delay as u64,
            replacement_delay: config.cache.line_replacement_delay as u64,
            load_latency: config.to_core_cycles(config.load_latency),
            store_latency: config.to_core_cycles(config.store_latency),
            next_id: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.memory.capacity()
    }

    pub fn load_latency(&self) -> u64 {
        self.load_latency
    }

    pub fn store_latency(&self) -> u64 {
        self.store_latency
    }

    pub fn new_transaction(&mut self, address: u32, size: u32, is_store: bool, data: Vec<u8>, now: u64) -> MemoryTransaction {
        self.next_id += 1;
        MemoryTransaction {
            id: self.next_id,
            address,
            size,
            is_store,
            data: if is_store { data } else { vec![0; size as usize] },
            request_cycle: now,
            completion_cycle: now,
            is_cache_line_flush: false,
            owner: None,
        }
    }

    /// Registers a transaction: applies its data effect now and fills in
    /// its completion cycle (and, for loads, its data).
    pub fn request(&mut self, tx: &mut MemoryTransaction, now: u64) -> Result<AccessReport, MemoryError> {
        self.memory.check(tx.address as u64, tx.size as u64)?;
        tx.request_cycle = now;
        tx.data.resize(tx.size as usize, 0);
        let mut report = AccessReport::default();
        let Some(cache) = self.cache.as_mut() else {
            let latency = if tx.is_store {
                self.memory.write(tx.address as u64, &tx.data)?;
                self.store_latency
            } else {
                tx.data.copy_from_slice(self.memory.read(tx.address as u64, tx.size as u64)?);
                self.load_latency
            };
            report.completion = now + latency;
            tx.completion_cycle = report.completion;
            return Ok(report);
        };

        let line_size = cache.line_size();
        let mut cost = 0;
        let mut offset = 0usize;
        // accesses spanning lines pay for each line in turn
        while offset < tx.size as usize {
            let address = tx.address + offset as u32;
            let piece = ((line_size - address % line_size) as usize).min(tx.size as usize - offset);
            let event = cache.access(address, &mut tx.data[offset..offset + piece], tx.is_store, &mut self.memory);
            cost += self.access_delay;
            if event.filled {
                cost += self.replacement_delay + self.load_latency;
            }
            if event.written_back.is_some() {
                cost += self.store_latency;
            }
            if tx.is_store && self.write_policy == WritePolicy::WriteThrough {
                cost += self.store_latency;
            }
            report.lines.push(event);
            offset += piece;
        }
        report.completion = now + cost;
        tx.completion_cycle = report.completion;
        Ok(report)
    }

    /// Writes back and invalidates every line; one transaction per dirty line.
    pub fn flush(&mut self, now: u64) -> Vec<MemoryTransaction> {
        let Some(cache) = self.cache.as_mut() else { return Vec::new() };
        let line_size = cache.line_size();
        let written = cache.flush(&mut self.memory);
        let mut at = now;
        let mut txs = Vec::with_capacity(written.len());
        for base in written {
            at += self.store_latency;
            self.next_id += 1;
            txs.push(MemoryTransaction {
                id: self.next_id,
                address: base,
                size: line_size,
                is_store: true,
                data: self.memory.read(base as u64, line_size as u64).expect("line inside memory").to_vec(),
                request_cycle: now,
                completion_cycle: at,
                is_cache_line_flush: true,
                owner: None,
            });
        }
        txs
    }

    /// Reads without timing or statistics; dirty cache lines take precedence.
    pub fn debug_read(&self, address: u32, size: u32) -> Result<Vec<u8>, MemoryError> {
        let mut out = self.memory.read(address as u64, size as u64)?.to_vec();
        if let Some(cache) = &self.cache {
            let end = address as u64 + size as u64;
            for (base, data) in cache.dirty_lines() {
                for (k, byte) in data.iter().enumerate() {
                    let a = base as u64 + k as u64;
                    if (address as u64..end).contains(&a) {
                        out[(a - address as u64) as usize] = *byte;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Writes without timing; cached copies are updated too.
    pub fn debug_write(&mut self, address: u32, data: &[u8]) -> Result<(), MemoryError> {
        self.memory.write(address as u64, data)?;
        if let Some(cache) = self.cache.as_mut() {
            cache.update_cached(address, data);
        }
        Ok(())
    }

    /// The whole memory as a program would observe it.
    pub fn snapshot(&self) -> Vec<u8> {
        self.debug_read(0, self.capacity() as u32).expect("whole memory is in bounds")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Replacement;

    fn system(enabled: bool, policy: WritePolicy) -> MemorySystem {
        let mut config = CpuConfig::default();
        config.memory_capacity = 1024;
        config.cache.enabled = enabled;
        config.cache.write_policy = policy;
        config.cache.replacement = Replacement::Lru;
        config.load_latency = 8;
        config.store_latency = 6;
        MemorySystem::new(&config)
    }

    fn load(m: &mut MemorySystem, address: u32, size: u32, now: u64) -> (MemoryTransaction, AccessReport) {
        let mut tx = m.new_transaction(address, size, false, Vec::new(), now);
        let report = m.request(&mut tx, now).unwrap();
        (tx, report)
    }

    #[test]
    fn miss_then_hit_timing() {
        let mut m = system(true, WritePolicy::WriteBack);
        assert_eq!(load(&mut m, 64, 4, 100).1.completion, 119);
        assert_eq!(load(&mut m, 68, 4, 200).1.completion, 201);
        let mut off = system(false, WritePolicy::WriteBack);
        assert_eq!(load(&mut off, 64, 4, 5).1.completion, 13);
    }

    #[test]
    fn line_spanning_access_pays_both_lines() {
        let mut m = system(true, WritePolicy::WriteBack);
        m.debug_write(30, &[1, 2, 3, 4]).unwrap();
        let (tx, report) = load(&mut m, 30, 4, 0);
        assert_eq!(report.lines.len(), 2);
        assert_eq!(report.completion, 38);
        assert_eq!(tx.data, [1, 2, 3, 4]);
    }

    #[test]
    fn dirty_data_visible_to_debug_read_and_flush() {
        let mut m = system(true, WritePolicy::WriteBack);
        let mut tx = m.new_transaction(16, 4, true, vec![1, 2, 3, 4], 0);
        m.request(&mut tx, 0).unwrap();
        assert_eq!(m.memory.read(16, 4).unwrap(), [0, 0, 0, 0]);
        assert_eq!(m.debug_read(16, 4).unwrap(), [1, 2, 3, 4]);
        let flushed = m.flush(10);
        assert_eq!(flushed.len(), 1);
        assert!(flushed[0].is_cache_line_flush && flushed[0].completion_cycle >= 10);
        assert_eq!(m.memory.read(16, 4).unwrap(), [1, 2, 3, 4]);
        assert!(m.flush(20).is_empty());
    }

    #[test]
    fn write_through_flush_is_empty() {
        let mut m = system(true, WritePolicy::WriteThrough);
        for a in [0, 40, 80] {
            let mut tx = m.new_transaction(a, 4, true, vec![7; 4], 0);
            m.request(&mut tx, 0).unwrap();
        }
        assert!(m.flush(0).is_empty());
        assert_eq!(m.memory.read(40, 4).unwrap(), [7; 4]);
    }

    #[test]
    fn out_of_bounds() {
        let mut m = system(true, WritePolicy::WriteBack);
        let mut tx = m.new_transaction(1022, 4, false, Vec::new(), 0);
        assert!(m.request(&mut tx, 0).is_err());
        assert!(m.debug_read(1024, 1).is_err());
        assert_eq!(m.debug_read(1020, 4).unwrap(), [0; 4]);
    }
}
