use std::collections::{HashMap, HashSet, VecDeque};
use std::hash::Hash;

use log::warn;

use super::{apply_mode, rate_per_hour, rel_change, FeatureError, FeatureVector, WindowConfig, FEATURE_COUNT};
use crate::celog::{CeRecord, DimmId, CE_READ, CE_SCRUB};

/// `[bank, a, b]`: rows use `[bank, row, 0]`, columns `[bank, col, 0]`,
/// cells `[bank, row, col]`.
type Key = [u32; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Row,
    Column,
    Cell,
}

const FAMILIES: [Family; 3] = [Family::Row, Family::Column, Family::Cell];

impl Family {
    fn key(self, ev: &Event) -> Key {
        match self {
            Family::Row => [ev.bank, ev.row, 0],
            Family::Column => [ev.bank, ev.col, 0],
            Family::Cell => [ev.bank, ev.row, ev.col],
        }
    }

    /// Same-bank keys within `radius` of `key`, excluding `key` itself.
    fn neighbours(self, key: Key, radius: u32) -> Vec<Key> {
        let r = radius as i64;
        let mut out = Vec::new();
        let shift = |v: u32, d: i64| -> Option<u32> { u32::try_from(v as i64 + d).ok() };
        match self {
            Family::Row | Family::Column => {
                for d in (-r..=r).filter(|&d| d != 0) {
                    if let Some(a) = shift(key[1], d) {
                        out.push([key[0], a, 0]);
                    }
                }
            }
            Family::Cell => {
                for dr in -r..=r {
                    for dc in -r..=r {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        if let (Some(a), Some(b)) = (shift(key[1], dr), shift(key[2], dc)) {
                            out.push([key[0], a, b]);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Bank-agnostic position of a key.
fn position(key: Key) -> (u32, u32) {
    (key[1], key[2])
}

#[derive(Debug, Clone, Copy)]
struct Event {
    ts: i64,
    kind: Option<usize>,
    bank: u32,
    row: u32,
    col: u32,
}

fn type_slot(t: &str) -> Option<usize> {
    match t {
        CE_READ => Some(0),
        CE_SCRUB => Some(1),
        _ => None,
    }
}

/// Per-key counts supporting removal, with O(1) max and repeat tracking.
#[derive(Debug, Clone)]
struct WindowCounts<K> {
    counts: HashMap<K, u32>,
    // hist[c]: number of keys whose count is exactly c
    hist: Vec<u32>,
    max: u32,
    repeats: u32,
}

impl<K> Default for WindowCounts<K> {
    fn default() -> Self {
        WindowCounts { counts: HashMap::new(), hist: vec![0], max: 0, repeats: 0 }
    }
}

impl<K: Hash + Eq + Copy> WindowCounts<K> {
    /// Returns true when the key was absent before.
    fn add(&mut self, k: K, repeat_min: u32) -> bool {
        let c = self.counts.entry(k).or_insert(0);
        let old = *c;
        *c += 1;
        let new = old + 1;
        if old > 0 {
            self.hist[old as usize] -= 1;
        }
        if self.hist.len() <= new as usize {
            self.hist.resize(new as usize + 1, 0);
        }
        self.hist[new as usize] += 1;
        self.max = self.max.max(new);
        if new == repeat_min {
            self.repeats += 1;
        }
        old == 0
    }

    /// Returns true when the key's last occurrence was removed.
    fn remove(&mut self, k: K, repeat_min: u32) -> bool {
        let c = self.counts.get_mut(&k).expect("removing key absent from window");
        let old = *c;
        let new = old - 1;
        self.hist[old as usize] -= 1;
        if new > 0 {
            *c = new;
            self.hist[new as usize] += 1;
        } else {
            self.counts.remove(&k);
        }
        if old == self.max && self.hist[old as usize] == 0 {
            self.max = new;
        }
        if old == repeat_min {
            self.repeats -= 1;
        }
        new == 0
    }

    fn contains(&self, k: &K) -> bool {
        self.counts.contains_key(k)
    }

    fn len(&self) -> usize {
        self.counts.len()
    }
}

/// Append-only per-key counts with a key cap.
#[derive(Debug, Clone)]
struct CappedCounts<K> {
    counts: HashMap<K, u32>,
    repeats: u32,
    saturated: bool,
}

impl<K> Default for CappedCounts<K> {
    fn default() -> Self {
        CappedCounts { counts: HashMap::new(), repeats: 0, saturated: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Insert {
    New,
    Existing,
    Dropped,
}

impl<K: Hash + Eq + Copy> CappedCounts<K> {
    fn add(&mut self, k: K, repeat_min: u32, cap: usize, what: &str) -> Insert {
        let full = self.counts.len() >= cap;
        match self.counts.get_mut(&k) {
            Some(c) => {
                *c += 1;
                if *c == repeat_min {
                    self.repeats += 1;
                }
                Insert::Existing
            }
            None if full => {
                if !self.saturated {
                    warn!("{what} key set saturated at {cap} keys; cardinality features frozen");
                    self.saturated = true;
                }
                Insert::Dropped
            }
            None => {
                self.counts.insert(k, 1);
                if repeat_min == 1 {
                    self.repeats += 1;
                }
                Insert::New
            }
        }
    }

    fn contains(&self, k: &K) -> bool {
        self.counts.contains_key(k)
    }

    fn len(&self) -> usize {
        self.counts.len()
    }
}

#[derive(Debug, Clone, Default)]
struct WindowFamily {
    keys: WindowCounts<Key>,
    adjacent_pairs: u64,
    positions: HashMap<(u32, u32), u32>,
    multibank: u32,
    new_keys: u32,
}

impl WindowFamily {
    fn on_appear(&mut self, fam: Family, key: Key, radius: u32) {
        let present = fam.neighbours(key, radius).iter().filter(|n| self.keys.contains(n)).count();
        self.adjacent_pairs += present as u64;
        let banks = self.positions.entry(position(key)).or_insert(0);
        *banks += 1;
        if *banks == 2 {
            self.multibank += 1;
        }
    }

    fn on_disappear(&mut self, fam: Family, key: Key, radius: u32) {
        let present = fam.neighbours(key, radius).iter().filter(|n| self.keys.contains(n)).count();
        self.adjacent_pairs -= present as u64;
        let pos = position(key);
        let banks = self.positions.get_mut(&pos).expect("position tracked");
        *banks -= 1;
        if *banks == 1 {
            self.multibank -= 1;
        }
        if *banks == 0 {
            self.positions.remove(&pos);
        }
    }
}

#[derive(Debug, Clone, Default)]
struct HistoryFamily {
    keys: CappedCounts<Key>,
    with_neighbour: HashSet<Key>,
    positions: HashMap<(u32, u32), u32>,
    multibank: u32,
}

/// Append-only aggregates over a set of events (history or lifetime).
#[derive(Debug, Clone, Default)]
struct Aggregates {
    count: u64,
    type_counts: [u64; 2],
    first_ts: Option<i64>,
    last_ts: Option<i64>,
    banks: CappedCounts<u32>,
    families: [HistoryFamily; 3],
}

impl Aggregates {
    /// Folds one event in; reports which keys (bank, row, column, cell)
    /// entered the aggregate for the first time.
    fn fold(&mut self, ev: &Event, cfg: &WindowConfig) -> [bool; 4] {
        self.count += 1;
        if let Some(slot) = ev.kind {
            self.type_counts[slot] += 1;
        }
        self.first_ts.get_or_insert(ev.ts);
        self.last_ts = Some(ev.ts);
        let mut fresh = [false; 4];
        fresh[0] = self.banks.add(ev.bank, cfg.repeat_min, cfg.key_cap, "bank") == Insert::New;
        for (i, fam) in FAMILIES.iter().enumerate() {
            let key = fam.key(ev);
            let agg = &mut self.families[i];
            if agg.keys.add(key, cfg.repeat_min, cfg.key_cap, "address") != Insert::New {
                continue;
            }
            fresh[i + 1] = true;
            let mut any = false;
            for n in fam.neighbours(key, cfg.radius) {
                if agg.keys.contains(&n) {
                    agg.with_neighbour.insert(n);
                    any = true;
                }
            }
            if any {
                agg.with_neighbour.insert(key);
            }
            let banks = agg.positions.entry(position(key)).or_insert(0);
            *banks += 1;
            if *banks == 2 {
                agg.multibank += 1;
            }
        }
        fresh
    }
}

#[derive(Debug, Clone, Default)]
struct WindowAggregates {
    count: u64,
    type_counts: [u64; 2],
    banks: WindowCounts<u32>,
    new_banks: u32,
    families: [WindowFamily; 3],
}

/// Incremental per-DIMM state: the window event buffer plus append-only
/// history and lifetime aggregates.
#[derive(Debug, Clone)]
pub struct DimmState {
    dimm: DimmId,
    config: WindowConfig,
    window_secs: i64,
    buffer: VecDeque<Event>,
    window: WindowAggregates,
    history: Aggregates,
    lifetime: Aggregates,
    t_first: Option<i64>,
    t_last: Option<i64>,
    t_before_last: Option<i64>,
    now: Option<i64>,
}

impl DimmState {
    pub fn new(dimm: DimmId, config: WindowConfig) -> Result<Self, FeatureError> {
        config.validate()?;
        Ok(DimmState {
            dimm,
            window_secs: config.window_secs(),
            config,
            buffer: VecDeque::new(),
            window: WindowAggregates::default(),
            history: Aggregates::default(),
            lifetime: Aggregates::default(),
            t_first: None,
            t_last: None,
            t_before_last: None,
            now: None,
        })
    }

    pub fn dimm(&self) -> &DimmId {
        &self.dimm
    }

    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    /// Current observation time `t0`.
    pub fn now(&self) -> Option<i64> {
        self.now
    }

    pub fn first_ts(&self) -> Option<i64> {
        self.t_first
    }

    pub fn window_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn window_count(&self) -> u64 {
        self.window.count
    }

    pub fn history_count(&self) -> u64 {
        self.history.count
    }

    pub fn lifetime_count(&self) -> u64 {
        self.lifetime.count
    }

    /// Timestamps currently held in the window buffer, oldest first.
    pub fn window_timestamps(&self) -> Vec<i64> {
        self.buffer.iter().map(|e| e.ts).collect()
    }

    /// True when any append-only key set hit its cap.
    pub fn saturated(&self) -> bool {
        [&self.history, &self.lifetime]
            .iter()
            .any(|a| a.banks.saturated || a.families.iter().any(|f| f.keys.saturated))
    }

    /// Ingests one filtered CE of this DIMM. Events must arrive in
    /// non-decreasing timestamp order.
    pub fn ingest(&mut self, record: &CeRecord) -> Result<(), FeatureError> {
        if record.dimm != self.dimm {
            return Err(FeatureError::WrongDimm { expected: self.dimm.clone(), got: record.dimm.clone() });
        }
        let (Some(bank), Some(row), Some(col)) = (record.bank, record.row, record.col) else {
            return Err(FeatureError::MissingAddress { dimm: self.dimm.clone(), ts: record.ts });
        };
        if let Some(prev) = self.t_last {
            if record.ts < prev {
                return Err(FeatureError::OutOfOrder { dimm: self.dimm.clone(), previous: prev, got: record.ts });
            }
        }
        let ev = Event { ts: record.ts, kind: type_slot(&record.error_type), bank, row, col };
        self.expire_until(ev.ts);
        self.now = Some(ev.ts);
        self.enter_window(&ev);
        self.lifetime.fold(&ev, &self.config);
        self.buffer.push_back(ev);
        self.t_first.get_or_insert(ev.ts);
        self.t_before_last = self.t_last;
        self.t_last = Some(ev.ts);
        Ok(())
    }

    /// Moves the observation time forward without a new event, expiring
    /// window entries that fall out of `(t - w, t]`.
    pub fn advance_to(&mut self, t: i64) -> Result<(), FeatureError> {
        let floor = self.now.or(self.t_last);
        if let Some(prev) = floor {
            if t < prev {
                return Err(FeatureError::OutOfOrder { dimm: self.dimm.clone(), previous: prev, got: t });
            }
        }
        self.expire_until(t);
        self.now = Some(t);
        Ok(())
    }

    fn expire_until(&mut self, t0: i64) {
        let cutoff = t0 - self.window_secs;
        while self.buffer.front().is_some_and(|e| e.ts <= cutoff) {
            let ev = self.buffer.pop_front().expect("front checked");
            self.leave_window(&ev);
        }
    }

    fn enter_window(&mut self, ev: &Event) {
        let cfg = self.config;
        let w = &mut self.window;
        w.count += 1;
        if let Some(slot) = ev.kind {
            w.type_counts[slot] += 1;
        }
        if w.banks.add(ev.bank, cfg.repeat_min) && !self.history.banks.contains(&ev.bank) {
            w.new_banks += 1;
        }
        for (i, fam) in FAMILIES.iter().enumerate() {
            let key = fam.key(ev);
            let wf = &mut w.families[i];
            if wf.keys.add(key, cfg.repeat_min) {
                wf.on_appear(*fam, key, cfg.radius);
                if !self.history.families[i].keys.contains(&key) {
                    wf.new_keys += 1;
                }
            }
        }
    }

    fn leave_window(&mut self, ev: &Event) {
        let cfg = self.config;
        let w = &mut self.window;
        w.count -= 1;
        if let Some(slot) = ev.kind {
            w.type_counts[slot] -= 1;
        }
        if w.banks.remove(ev.bank, cfg.repeat_min) && !self.history.banks.contains(&ev.bank) {
            w.new_banks -= 1;
        }
        let mut gone = [false; 3];
        for (i, fam) in FAMILIES.iter().enumerate() {
            let key = fam.key(ev);
            let wf = &mut w.families[i];
            if wf.keys.remove(key, cfg.repeat_min) {
                gone[i] = true;
                wf.on_disappear(*fam, key, cfg.radius);
                if !self.history.families[i].keys.contains(&key) {
                    wf.new_keys -= 1;
                }
            }
        }
        let fresh = self.history.fold(ev, &cfg);
        // A key that just entered the history stops being "new" if it is
        // still present in the window.
        if fresh[0] && w.banks.contains(&ev.bank) {
            w.new_banks -= 1;
        }
        for (i, fam) in FAMILIES.iter().enumerate() {
            if fresh[i + 1] && !gone[i] && w.families[i].keys.contains(&fam.key(ev)) {
                w.families[i].new_keys -= 1;
            }
        }
    }

    /// Evaluates the catalog at the current observation time. Pure.
    pub fn snapshot(&self) -> Result<FeatureVector, FeatureError> {
        let (Some(now), Some(t_first), Some(t_last)) = (self.now, self.t_first, self.t_last) else {
            return Err(FeatureError::Empty(self.dimm.clone()));
        };
        let w = &self.window;
        let h = &self.history;
        let l = &self.lifetime;
        let rate_w = rate_per_hour(w.count, self.buffer.front().map(|e| e.ts), self.buffer.back().map(|e| e.ts));
        let rate_h = rate_per_hour(h.count, h.first_ts, h.last_ts);
        let banks_w = w.banks.len() as f64;

        let mut v = Vec::with_capacity(FEATURE_COUNT);
        v.extend([
            w.count as f64,
            h.count as f64,
            rate_w,
            rate_h,
            rel_change(rate_w, rate_h),
            w.type_counts[0] as f64,
            h.type_counts[0] as f64,
            w.type_counts[1] as f64,
            h.type_counts[1] as f64,
            rel_change(w.type_counts[0] as f64, h.type_counts[0] as f64),
            rel_change(w.type_counts[1] as f64, h.type_counts[1] as f64),
            (now - t_first) as f64 / 3600.0,
            self.t_before_last.map_or(0.0, |p| (t_last - p) as f64 / 3600.0),
        ]);
        v.extend([
            banks_w,
            h.banks.len() as f64,
            l.banks.len() as f64,
            w.new_banks as f64,
            w.banks.max as f64,
            if banks_w > 0.0 { w.count as f64 / banks_w } else { 0.0 },
        ]);
        for i in 0..FAMILIES.len() {
            let wf = &w.families[i];
            let lf = &l.families[i];
            v.extend([
                wf.keys.len() as f64,
                wf.keys.repeats as f64,
                lf.keys.repeats as f64,
                wf.keys.max as f64,
                wf.new_keys as f64,
                wf.adjacent_pairs as f64,
                lf.with_neighbour.len() as f64,
                wf.multibank as f64,
                lf.multibank as f64,
            ]);
        }
        debug_assert_eq!(v.len(), FEATURE_COUNT);
        apply_mode(&mut v, self.config.mode);
        Ok(FeatureVector(v))
    }
}
