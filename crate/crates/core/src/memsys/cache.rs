use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::memory::MainMemory;
use crate::asm::program::base64_bytes;
use crate::config::{CacheConfig, Replacement, WritePolicy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct CacheLine {
    pub tag: u32,
    pub valid: bool,
    pub dirty: bool,
    #[serde(with = "base64_bytes")]
    #[schemars(with = "String")]
    pub data: Vec<u8>,
    /// Last use (LRU) or insertion (FIFO) time.
    pub stamp: u64,
}

/// What happened to one cache line during an access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LineEvent {
    pub hit: bool,
    /// A line was brought in from memory.
    pub filled: bool,
    /// Base address of a dirty victim written back to memory.
    pub written_back: Option<u32>,
    /// Base address of any valid victim that was replaced.
    pub evicted: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Cache {
    pub geometry: CacheConfig,
    /// Lines stored set by set, `associativity` ways each.
    pub lines: Vec<CacheLine>,
    clock: u64,
    rng: ChaCha8Rng,
}

impl Cache {
    pub fn new(geometry: &CacheConfig, seed: u64) -> Self {
        let line = CacheLine { tag: 0, valid: false, dirty: false, data: vec![0; geometry.line_size as usize], stamp: 0 };
        Self {
            geometry: geometry.clone(),
            lines: vec![line; geometry.line_count as usize],
            clock: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn line_size(&self) -> u32 {
        self.geometry.line_size
    }

    fn ways(&self) -> usize {
        self.geometry.associativity as usize
    }

    /// (set index, tag) of an address.
    pub fn locate(&self, address: u32) -> (usize, u32) {
        let block = address / self.geometry.line_size;
        let sets = self.geometry.set_count();
        ((block % sets) as usize, block / sets)
    }

    fn base_address(&self, set: usize, tag: u32) -> u32 {
        (tag * self.geometry.set_count() + set as u32) * self.geometry.line_size
    }

    fn find(&self, address: u32) -> Option<usize> {
        let (set, tag) = self.locate(address);
        let ways = self.ways();
        (set * ways..(set + 1) * ways).find(|&i| self.lines[i].valid && self.lines[i].tag == tag)
    }

    pub fn contains(&self, address: u32) -> bool {
        self.find(address).is_some()
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn choose_victim(&mut self, set: usize) -> usize {
        let ways = self.ways();
        let range = set * ways..(set + 1) * ways;
        if let Some(i) = range.clone().find(|&i| !self.lines[i].valid) {
            return i;
        }
        match self.geometry.replacement {
            // LRU stamps track last use, FIFO stamps insertion
            Replacement::Lru | Replacement::Fifo => range.min_by_key(|&i| self.lines[i].stamp).expect("ways >= 1"),
            Replacement::Random => set * ways + self.rng.gen_range(0..ways),
        }
    }

    fn write_back(&mut self, index: usize, memory: &mut MainMemory) -> Option<u32> {
        let line = &self.lines[index];
        if !(line.valid && line.dirty) {
            return None;
        }
        let (set, tag) = (index / self.ways(), line.tag);
        let base = self.base_address(set, tag);
        memory.write(base as u64, &self.lines[index].data).expect("cached lines lie inside memory");
        self.lines[index].dirty = false;
        Some(base)
    }

    /// Accesses bytes that lie within a single line. Loads copy into
    /// `buffer`; stores copy from it. The caller checks bounds.
    pub fn access(&mut self, address: u32, buffer: &mut [u8], store: bool, memory: &mut MainMemory) -> LineEvent {
        let offset = (address % self.line_size()) as usize;
        debug_assert!(offset + buffer.len() <= self.line_size() as usize);
        let write_back = self.geometry.write_policy == WritePolicy::WriteBack;
        let mut event = LineEvent::default();
        let index = match self.find(address) {
            Some(i) => {
                event.hit = true;
                if self.geometry.replacement == Replacement::Lru {
                    self.lines[i].stamp = self.tick();
                }
                i
            }
            None if store && !write_back => {
                // write-through stores do not allocate
                memory.write(address as u64, buffer).expect("bounds checked by caller");
                return event;
            }
            None => {
                let (set, tag) = self.locate(address);
                let victim = self.choose_victim(set);
                if self.lines[victim].valid {
                    event.evicted = Some(self.base_address(set, self.lines[victim].tag));
                }
                event.written_back = self.write_back(victim, memory);
                let base = address - address % self.line_size();
                let fresh = memory.read(base as u64, self.line_size() as u64).expect("line inside memory").to_vec();
                let stamp = self.tick();
                let line = &mut self.lines[victim];
                *line = CacheLine { tag, valid: true, dirty: false, data: fresh, stamp };
                event.filled = true;
                victim
            }
        };
        let line = &mut self.lines[index];
        if store {
            line.data[offset..offset + buffer.len()].copy_from_slice(buffer);
            if write_back {
                line.dirty = true;
            } else {
                memory.write(address as u64, buffer).expect("bounds checked by caller");
            }
        } else {
            buffer.copy_from_slice(&line.data[offset..offset + buffer.len()]);
        }
        event
    }

    /// Writes every dirty line back and invalidates the cache.
    /// Returns the base addresses written.
    pub fn flush(&mut self, memory: &mut MainMemory) -> Vec<u32> {
        let mut written = Vec::new();
        for i in 0..self.lines.len() {
            if let Some(base) = self.write_back(i, memory) {
                written.push(base);
            }
            self.lines[i].valid = false;
        }
        written
    }

    /// Dirty lines as (base address, data).
    pub fn dirty_lines(&self) -> impl Iterator<Item = (u32, &[u8])> {
        let ways = self.ways();
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.valid && l.dirty)
            .map(move |(i, l)| (self.base_address(i / ways, l.tag), l.data.as_slice()))
    }

    /// Keeps cached copies coherent with a direct memory write.
    pub fn update_cached(&mut self, address: u32, data: &[u8]) {
        let size = self.line_size();
        for (k, byte) in data.iter().enumerate() {
            let a = address + k as u32;
            if let Some(i) = self.find(a) {
                self.lines[i].data[(a % size) as usize] = *byte;
            }
        }
    }

    /// Base address of every valid line with its set and way.
    pub fn valid_lines(&self) -> impl Iterator<Item = (usize, usize, u32, &CacheLine)> {
        let ways = self.ways();
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.valid)
            .map(move |(i, l)| (i / ways, i % ways, self.base_address(i / ways, l.tag), l))
    }
}
