//! Brute-force set-associative cache: each set is a list of resident
//! blocks ordered from next victim to most protected.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Lru,
    Fifo,
}

#[derive(Debug, Clone)]
pub struct CacheModel {
    line_size: u32,
    ways: usize,
    policy: Policy,
    /// Stores that miss bring the line in.
    allocate_on_store: bool,
    sets: Vec<Vec<u32>>,
}

impl CacheModel {
    pub fn new(line_count: u32, line_size: u32, ways: u32, policy: Policy, allocate_on_store: bool) -> Self {
        let set_count = (line_count / ways) as usize;
        Self { line_size, ways: ways as usize, policy, allocate_on_store, sets: vec![Vec::new(); set_count] }
    }

    /// Hit (true) or miss for one access to a single line.
    pub fn access(&mut self, address: u32, store: bool) -> bool {
        let block = address / self.line_size;
        let set_count = self.sets.len() as u32;
        let set = &mut self.sets[(block % set_count) as usize];
        if let Some(pos) = set.iter().position(|b| *b == block) {
            if self.policy == Policy::Lru {
                let b = set.remove(pos);
                set.push(b);
            }
            return true;
        }
        if store && !self.allocate_on_store {
            return false;
        }
        if set.len() == self.ways {
            set.remove(0);
        }
        set.push(block);
        false
    }
}
