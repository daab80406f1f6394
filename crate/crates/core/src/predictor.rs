//! Branch target buffer plus a pattern history table of 0/1/2-bit counters.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::config::{HistoryKind, PredictorConfig, PredictorType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct BtbEntry {
    pub tag: u32,
    pub target: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct Prediction {
    pub taken: bool,
    /// BTB target when the entry's tag matches.
    pub target: Option<u32>,
}

impl Prediction {
    /// Address to fetch after `pc`.
    pub fn next_pc(&self, pc: u32) -> u32 {
        match (self.taken, self.target) {
            (true, Some(target)) => target,
            _ => pc.wrapping_add(4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
pub struct Predictor {
    pub config: PredictorConfig,
    pub btb: Vec<Option<BtbEntry>>,
    pub counters: Vec<u8>,
    pub global_history: u32,
    /// One shift register per PHT slot; only kept for local history.
    pub local_history: Vec<u32>,
}

impl Predictor {
    pub fn new(config: &PredictorConfig) -> Self {
        let pht = config.pht_size.max(1) as usize;
        let initial = match config.predictor_type {
            PredictorType::ZeroBit => config.default_state.min(1),
            other => config.default_state.min(other.max_state()),
        };
        Self {
            config: config.clone(),
            btb: vec![None; config.btb_size.max(1) as usize],
            counters: vec![initial; pht],
            global_history: 0,
            local_history: match config.history {
                HistoryKind::Local => vec![0; pht],
                HistoryKind::Global => Vec::new(),
            },
        }
    }

    fn slot(&self, pc: u32) -> usize {
        let word = pc / 4;
        let raw = match self.config.history {
            HistoryKind::Global => word ^ self.global_history,
            HistoryKind::Local => word,
        };
        (raw % self.counters.len() as u32) as usize
    }

    fn btb_slot(&self, pc: u32) -> usize {
        ((pc / 4) % self.btb.len() as u32) as usize
    }

    pub fn btb_lookup(&self, pc: u32) -> Option<u32> {
        self.btb[self.btb_slot(pc)].filter(|e| e.tag == pc).map(|e| e.target)
    }

    pub fn counter(&self, pc: u32) -> u8 {
        self.counters[self.slot(pc)]
    }

    fn counter_taken(&self, counter: u8) -> bool {
        match self.config.predictor_type {
            PredictorType::ZeroBit => self.config.default_state != 0,
            PredictorType::OneBit => counter == 1,
            PredictorType::TwoBit => counter >= 2,
        }
    }

    pub fn predict(&self, pc: u32) -> Prediction {
        Prediction { taken: self.counter_taken(self.counter(pc)), target: self.btb_lookup(pc) }
    }

    /// Trains on a resolved conditional branch.
    pub fn update(&mut self, pc: u32, taken: bool, target: u32) {
        let slot = self.slot(pc);
        let counter = &mut self.counters[slot];
        match self.config.predictor_type {
            PredictorType::ZeroBit => {}
            PredictorType::OneBit => *counter = taken as u8,
            PredictorType::TwoBit => *counter = if taken { (*counter + 1).min(3) } else { counter.saturating_sub(1) },
        }
        match self.config.history {
            HistoryKind::Global => self.global_history = (self.global_history << 1) | taken as u32,
            HistoryKind::Local => self.local_history[slot] = (self.local_history[slot] << 1) | taken as u32,
        }
        if taken {
            self.record_target(pc, target);
        }
    }

    /// Writes a BTB entry without touching the counters (used for jumps).
    pub fn record_target(&mut self, pc: u32, target: u32) {
        let slot = self.btb_slot(pc);
        self.btb[slot] = Some(BtbEntry { tag: pc, target });
    }
}
