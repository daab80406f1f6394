//! The per-cycle block walk: commit, execute (two sub-steps), memory,
//! decode/rename, fetch.

use std::sync::Arc;

use super::{Destination, HaltReason, LoadEntry, LogEntry, MemAccess, SimCode, SimState, Source, Stamps, StoreEntry};
use crate::asm::Operand;
use crate::isa::{direct_jump_target, interpret_instruction, ExceptionKind, ExceptionRecord, InstructionType, RA, SP};
use crate::memsys::LineEvent;
use crate::stats::{Payload, StatEvent};

fn extend_loaded(raw: u32, width: u8, signed: bool) -> u32 {
    match (width, signed) {
        (1, true) => raw as u8 as i8 as i32 as u32,
        (1, false) => raw as u8 as u32,
        (2, true) => raw as u16 as i16 as i32 as u32,
        (2, false) => raw as u16 as u32,
        _ => raw,
    }
}

fn word_from_le(bytes: &[u8]) -> u32 {
    let mut buf = [0u8; 4];
    buf[..bytes.len()].copy_from_slice(bytes);
    u32::from_le_bytes(buf)
}

fn truncate(value: u32, width: u8) -> u32 {
    match width {
        1 => value & 0xff,
        2 => value & 0xffff,
        _ => value,
    }
}

enum Overlap {
    Exact { store: u64, value: u32 },
    Partial,
}

impl SimState {
    /// Advances the machine by one clock cycle. A halted state is left unchanged.
    pub fn step(&mut self) {
        if self.halted.is_some() {
            return;
        }
        self.last_fetched = 0;
        self.last_committed = 0;
        self.commit();
        if self.halted.is_none() {
            self.complete_units();
            self.issue_units();
            self.memory_unit();
            self.decode();
            self.fetch();
        }
        self.cycle += 1;
        self.stats.cycles = self.cycle;
        let drained = self.fetch_buffer.is_empty() && self.rob.is_empty() && self.store_buffer.is_empty();
        if self.halted.is_none() && drained && self.program.instruction_at(self.pc_fetch).is_none() {
            self.halt(HaltReason::EndOfCode, format!("fetch left the program at {:#x}; pipeline empty", self.pc_fetch));
        }
    }

    /// Stops the machine; anything still in flight is discarded.
    fn halt(&mut self, reason: HaltReason, message: String) {
        self.flush();
        self.log(message);
        self.halted = Some(reason);
    }

    fn log(&mut self, message: String) {
        self.log.push(LogEntry { cycle: self.cycle, message });
    }

    fn rob_index(&self, id: u64) -> usize {
        self.rob.binary_search_by_key(&id, |c| c.id).expect("in-flight instruction is in the ROB")
    }

    fn release(&mut self, tag: u32) {
        let reg = &mut self.spec_regs[tag as usize];
        reg.ref_count = reg.ref_count.saturating_sub(1);
        if reg.ref_count == 0 {
            reg.in_use = false;
            reg.valid = false;
        }
    }

    /// Publishes a result to the speculative register and every waiting operand.
    fn broadcast(&mut self, tag: u32, value: u32) {
        let mut captured = 0;
        for code in self.rob.iter_mut() {
            for source in code.operands.iter_mut() {
                if let Source::Pending { reg, tag: t } = *source {
                    if t == tag {
                        *source = Source::Value { reg, value };
                        captured += 1;
                    }
                }
            }
        }
        let reg = &mut self.spec_regs[tag as usize];
        reg.value = value;
        reg.valid = true;
        reg.ref_count -= captured;
    }

    fn record_lines(&mut self, lines: &[LineEvent]) {
        for line in lines {
            let event = if line.hit { StatEvent::CacheHit } else { StatEvent::CacheMiss };
            self.stats.record(event, Payload::None);
        }
    }

    fn commit(&mut self) {
        while self.last_committed < self.config.commit_width {
            let Some(head) = self.rob.front() else { break };
            if !head.done {
                break;
            }
            if let Some(exception) = head.exception.as_ref().filter(|e| e.kind.is_fatal()) {
                let (pc, detail) = (head.pc, exception.detail.clone());
                let message = format!("fatal exception at {pc:#x} ({}): {detail}", head.source);
                self.halt(HaltReason::Fault { pc, detail }, message);
                return;
            }
            let mut code = self.rob.pop_front().expect("head exists");
            code.stamps.commit = Some(self.cycle);
            if let Some(exception) = &code.exception {
                self.log(format!("exception at {:#x} ({}): {}", code.pc, code.source, exception.detail));
            }
            if let Some(Destination { arch, tag: Some(tag) }) = code.dest {
                self.arch_regs[arch as usize] = self.spec_regs[tag as usize].value;
                if self.rename_map[arch as usize] == Some(tag) {
                    self.rename_map[arch as usize] = None;
                }
                self.release(tag);
            }
            if let Some(access) = code.memory {
                if access.store {
                    self.commit_store(&code, access);
                } else if let Some(i) = self.load_buffer.iter().position(|e| e.id == code.id) {
                    self.load_buffer.remove(i);
                }
            }
            self.stats.record(StatEvent::Commit, Payload::Type(code.instruction_type));
            self.last_committed += 1;

            if matches!(code.instruction_type, InstructionType::Branch | InstructionType::Jump) {
                let taken = code.taken.expect("resolved");
                let next = code.actual_next.expect("resolved");
                if code.instruction_type == InstructionType::Branch {
                    self.predictor.update(code.pc, taken, next);
                } else {
                    self.predictor.record_target(code.pc, next);
                }
                self.stats.record(StatEvent::BranchResolved, Payload::None);
                if code.mispredicted {
                    self.stats.record(StatEvent::BranchMispredicted, Payload::None);
                }
            }
            if code.instruction_type == InstructionType::Jump && self.track_calls(&code) {
                let message = format!("main returned at {:#x}", code.pc);
                self.halt(HaltReason::MainReturned, message);
                return;
            }
            if code.mispredicted {
                let next = code.actual_next.expect("resolved");
                self.flush();
                self.pc_fetch = next;
                self.fetch_resume = self.cycle + self.config.flush_penalty as u64;
                self.stats.record(StatEvent::Flush, Payload::None);
                self.log(format!("misprediction at {:#x} ({}); fetch redirected to {next:#x}", code.pc, code.source));
                break;
            }
        }
    }

    /// Follows calls and returns; true when the outermost routine returns.
    fn track_calls(&mut self, code: &SimCode) -> bool {
        let rd = code.dest.map_or(0, |d| d.arch);
        if rd == RA {
            self.call_depth += 1;
            return false;
        }
        let is_return = code.mnemonic == "jalr"
            && rd == 0
            && matches!(code.operands.get(1), Some(Source::Value { reg: RA, .. }))
            && matches!(code.operands.get(2), Some(Source::Immediate { value: 0 }));
        if !is_return {
            return false;
        }
        if self.call_depth == 0 && self.arch_regs[SP as usize] >= self.program.stack_top {
            return true;
        }
        self.call_depth = self.call_depth.saturating_sub(1);
        false
    }

    fn commit_store(&mut self, code: &SimCode, access: MemAccess) {
        let value = access.value.expect("store data captured at execute");
        let bytes = value.to_le_bytes()[..access.width as usize].to_vec();
        let mut tx = self.memsys.new_transaction(access.address, access.width as u32, true, bytes, self.cycle);
        tx.owner = Some(code.id);
        let report = self.memsys.request(&mut tx, self.cycle).expect("store address checked at execute");
        self.record_lines(&report.lines);
        self.stats.record(StatEvent::BytesWritten, Payload::Bytes(access.width as u64));
        if let Some(entry) = self.store_buffer.iter_mut().find(|e| e.id == code.id) {
            entry.committed = true;
            entry.completes = Some(report.completion);
        }
    }

    /// Removes everything in flight. Committed stores keep draining.
    fn flush(&mut self) {
        self.fetch_buffer.clear();
        self.rob.clear();
        for window in &mut self.windows {
            window.entries.clear();
        }
        for unit in &mut self.units {
            unit.current = None;
            unit.busy_until = unit.busy_until.min(self.cycle);
        }
        self.load_buffer.clear();
        self.store_buffer.retain(|e| e.committed);
        for reg in &mut self.spec_regs {
            reg.in_use = false;
            reg.valid = false;
            reg.ref_count = 0;
            reg.value = 0;
            reg.arch = 0;
        }
        self.rename_map.iter_mut().for_each(|m| *m = None);
    }

    /// Sub-step A: units whose latency has elapsed produce their results.
    fn complete_units(&mut self) {
        for u in 0..self.units.len() {
            let unit = &self.units[u];
            let Some(id) = unit.current else { continue };
            if unit.busy_until > self.cycle {
                continue;
            }
            self.units[u].current = None;
            self.execute(id);
        }
    }

    fn execute(&mut self, id: u64) {
        let cycle = self.cycle;
        let capacity = self.memsys.capacity() as u64;
        let isa = Arc::clone(&self.isa);
        let idx = self.rob_index(id);
        let code = &self.rob[idx];
        let def = isa.get(&code.mnemonic).expect("decoded mnemonics are defined");
        let values: Vec<u64> = code
            .operands
            .iter()
            .map(|s| match *s {
                Source::Immediate { value } => value as i64 as u64,
                Source::Value { value, .. } => value as i32 as i64 as u64,
                Source::Dest { .. } => 0,
                Source::Pending { .. } => unreachable!("issued with pending operand"),
            })
            .collect();
        let execution = interpret_instruction(def, &values, code.pc);

        let code = &mut self.rob[idx];
        code.stamps.execute_done = Some(cycle);
        let execution = match execution {
            Ok(execution) => execution,
            Err(err) => {
                code.exception = Some(ExceptionRecord { kind: ExceptionKind::IllegalInstruction, detail: err.to_string() });
                code.done = true;
                code.stamps.writeback = Some(cycle);
                return;
            }
        };
        code.exception = execution.result.exception.clone();
        if let Some(control) = execution.control {
            let next = if control.taken { control.target } else { code.pc.wrapping_add(4) };
            code.taken = Some(control.taken);
            code.actual_next = Some(next);
            code.mispredicted = next != code.predicted_next;
        }
        if let Some(request) = execution.memory {
            let access = MemAccess {
                address: request.address,
                width: request.width,
                signed: request.signed,
                store: request.store,
                value: request.value.map(|v| truncate(v, request.width)),
            };
            code.memory = Some(access);
            let in_bounds = access.address as u64 + access.width as u64 <= capacity;
            if !in_bounds {
                code.exception = Some(ExceptionRecord {
                    kind: ExceptionKind::MemoryFault,
                    detail: format!("access of {} bytes at {:#x} is outside memory of {capacity} bytes", access.width, access.address),
                });
            }
            if access.store || !in_bounds {
                code.done = true;
                code.stamps.writeback = Some(cycle);
            }
            if access.store {
                if let Some(entry) = self.store_buffer.iter_mut().find(|e| e.id == id) {
                    entry.address = Some(access.address);
                    entry.value = access.value;
                }
            } else if let Some(entry) = self.load_buffer.iter_mut().find(|e| e.id == id) {
                entry.address = Some(access.address);
                entry.finished = !in_bounds;
            }
            return;
        }
        let result = execution.result.writes.first().map(|(_, v)| *v as u32);
        code.result = result;
        code.done = true;
        code.stamps.writeback = Some(cycle);
        if let Some(Destination { tag: Some(tag), .. }) = code.dest {
            self.broadcast(tag, result.unwrap_or(0));
        }
    }

    /// Sub-step B: each idle unit takes the oldest ready instruction it supports.
    fn issue_units(&mut self) {
        let cycle = self.cycle;
        for u in 0..self.units.len() {
            if self.units[u].current.is_some() {
                continue;
            }
            let class = self.units[u].class;
            let fu = &self.config.fu_list[self.units[u].config_index];
            let w = self.windows.iter().position(|w| w.class == class).expect("one window per class");
            let pick = self.windows[w].entries.iter().position(|&id| {
                let code = &self.rob[self.rob_index(id)];
                code.operands.iter().all(Source::is_ready) && fu.supports(class, &code.mnemonic)
            });
            let Some(p) = pick else { continue };
            let id = self.windows[w].entries.remove(p);
            let idx = self.rob_index(id);
            let latency = fu.latency_of(&self.rob[idx].mnemonic).max(1) as u64;
            let code = &mut self.rob[idx];
            code.stamps.issue = Some(cycle);
            code.stamps.execute_start = Some(cycle);
            self.units[u].current = Some(id);
            self.units[u].busy_until = cycle + latency;
        }
        for u in 0..self.units.len() {
            if self.units[u].current.is_some() {
                let name = self.units[u].name.clone();
                self.stats.record(StatEvent::FuBusy, Payload::Unit(&name));
            }
        }
    }

    fn memory_unit(&mut self) {
        let cycle = self.cycle;
        for i in 0..self.load_buffer.len() {
            let entry = &self.load_buffer[i];
            if entry.finished || !entry.issued || entry.completes.is_none_or(|c| c > cycle) {
                continue;
            }
            let (id, raw) = (entry.id, entry.value.expect("issued loads carry data"));
            self.load_buffer[i].finished = true;
            let idx = self.rob_index(id);
            let code = &mut self.rob[idx];
            let access = code.memory.expect("load address computed");
            let value = extend_loaded(raw, access.width, access.signed);
            code.result = Some(value);
            code.done = true;
            code.stamps.writeback = Some(cycle);
            if let Some(Destination { tag: Some(tag), .. }) = code.dest {
                self.broadcast(tag, value);
            }
        }

        self.store_buffer.retain(|e| !(e.committed && e.completes.is_some_and(|c| c <= cycle)));

        for i in 0..self.load_buffer.len() {
            let entry = &self.load_buffer[i];
            if entry.issued || entry.finished {
                continue;
            }
            let Some(address) = entry.address else { continue };
            let (id, width) = (entry.id, entry.width as u32);
            // the youngest overlapping older store decides; unknown addresses block
            let mut blocked = false;
            let mut last = None;
            for store in self.store_buffer.iter().filter(|s| s.id < id && !s.committed) {
                let Some(sa) = store.address else {
                    blocked = true;
                    break;
                };
                let sw = store.width as u32;
                if (sa as u64) < address as u64 + width as u64 && (address as u64) < sa as u64 + sw as u64 {
                    last = Some(if sa == address && sw == width {
                        Overlap::Exact { store: store.id, value: store.value.expect("store data with address") }
                    } else {
                        Overlap::Partial
                    });
                }
            }
            if blocked || matches!(last, Some(Overlap::Partial)) {
                continue;
            }
            let entry = &mut self.load_buffer[i];
            entry.issued = true;
            if let Some(Overlap::Exact { store, value }) = last {
                entry.value = Some(value);
                entry.forwarded_from = Some(store);
                entry.completes = Some(cycle + 1);
            } else {
                let mut tx = self.memsys.new_transaction(address, width, false, Vec::new(), cycle);
                tx.owner = Some(id);
                let report = self.memsys.request(&mut tx, cycle).expect("load address checked at execute");
                let entry = &mut self.load_buffer[i];
                entry.value = Some(word_from_le(&tx.data));
                entry.completes = Some(report.completion);
                self.record_lines(&report.lines);
            }
            break;
        }
    }

    fn decode(&mut self) {
        let isa = Arc::clone(&self.isa);
        let program = Arc::clone(&self.program);
        let mut decoded = 0;
        while decoded < self.config.fetch_width {
            let Some(front) = self.fetch_buffer.front() else { break };
            if self.rob.len() >= self.config.rob_size as usize {
                break;
            }
            let instr = program.instruction_at(front.pc).expect("fetched from the program");
            let def = isa.get(&instr.mnemonic).expect("assembled mnemonics are defined");
            let dest_reg = def.write_back_index().and_then(|i| match instr.operands[i] {
                Operand::Register(r) => Some(r),
                Operand::Immediate(_) => None,
            });
            let free = self.spec_regs.iter().position(|r| !r.in_use);
            if dest_reg.is_some_and(|r| r != 0) && free.is_none() {
                break;
            }
            let access = def.memory_access;
            match access {
                Some(a) if a.store && self.store_buffer.len() >= self.config.store_buffer_size as usize => break,
                Some(a) if !a.store && self.load_buffer.len() >= self.config.load_buffer_size as usize => break,
                _ => {}
            }

            let mut code = self.fetch_buffer.pop_front().expect("front exists");
            code.operands = def
                .arguments
                .iter()
                .zip(&instr.operands)
                .map(|(arg, op)| match *op {
                    Operand::Immediate(value) => Source::Immediate { value },
                    Operand::Register(reg) if arg.write_back => Source::Dest { reg },
                    Operand::Register(0) => Source::Value { reg: 0, value: 0 },
                    Operand::Register(reg) => match self.rename_map[reg as usize] {
                        Some(tag) if self.spec_regs[tag as usize].valid => {
                            Source::Value { reg, value: self.spec_regs[tag as usize].value }
                        }
                        Some(tag) => {
                            self.spec_regs[tag as usize].ref_count += 1;
                            Source::Pending { reg, tag }
                        }
                        None => Source::Value { reg, value: self.arch_regs[reg as usize] },
                    },
                })
                .collect();
            code.dest = dest_reg.map(|arch| {
                let tag = (arch != 0).then(|| {
                    let tag = free.expect("checked above");
                    let reg = &mut self.spec_regs[tag];
                    reg.arch = arch;
                    reg.value = 0;
                    reg.valid = false;
                    reg.ref_count = 1;
                    reg.in_use = true;
                    self.rename_map[arch as usize] = Some(tag as u32);
                    tag as u32
                });
                Destination { arch, tag }
            });
            code.stamps.decode = Some(self.cycle);
            if let Some(a) = access {
                if a.store {
                    self.store_buffer.push_back(StoreEntry {
                        id: code.id,
                        address: None,
                        width: a.width,
                        value: None,
                        committed: false,
                        completes: None,
                    });
                } else {
                    self.load_buffer.push_back(LoadEntry {
                        id: code.id,
                        address: None,
                        width: a.width,
                        issued: false,
                        completes: None,
                        value: None,
                        forwarded_from: None,
                        finished: false,
                    });
                }
            }
            let window = self.windows.iter_mut().find(|w| w.class == code.fu_class).expect("one window per class");
            window.entries.push(code.id);
            self.rob.push_back(code);
            self.stats.record(StatEvent::Decode, Payload::None);
            decoded += 1;
        }
    }

    fn fetch(&mut self) {
        if self.cycle < self.fetch_resume {
            return;
        }
        let isa = Arc::clone(&self.isa);
        let program = Arc::clone(&self.program);
        let mut jumps = 0;
        while (self.fetch_buffer.len() as u32) < self.config.fetch_width {
            let pc = self.pc_fetch;
            let Some(instr) = program.instruction_at(pc) else { break };
            let def = isa.get(&instr.mnemonic).expect("assembled mnemonics are defined");
            let target = match def.instruction_type {
                InstructionType::Jump if def.is_direct_jump() => {
                    let values: Vec<u64> = instr.operands.iter().map(|o| o.immediate_value().unwrap_or(0)).collect();
                    direct_jump_target(def, &values, pc)
                }
                InstructionType::Jump => self.predictor.btb_lookup(pc),
                InstructionType::Branch => {
                    let prediction = self.predictor.predict(pc);
                    prediction.target.filter(|_| prediction.taken)
                }
                _ => None,
            };
            if target.is_some() && jumps >= self.config.jumps_per_cycle {
                break;
            }
            let next = target.unwrap_or(pc.wrapping_add(4));
            self.next_id += 1;
            self.fetch_buffer.push_back(SimCode {
                id: self.next_id,
                pc,
                mnemonic: instr.mnemonic.clone(),
                source: instr.source.clone(),
                line: instr.line,
                instruction_type: def.instruction_type,
                fu_class: def.fu_class,
                operands: Vec::new(),
                dest: None,
                predicted_taken: target.is_some(),
                predicted_next: next,
                taken: None,
                actual_next: None,
                result: None,
                memory: None,
                exception: None,
                mispredicted: false,
                done: false,
                stamps: Stamps { fetch: Some(self.cycle), ..Stamps::default() },
            });
            self.stats.record(StatEvent::Fetch, Payload::None);
            self.last_fetched += 1;
            self.pc_fetch = next;
            if target.is_some() {
                jumps += 1;
            }
        }
    }
}
