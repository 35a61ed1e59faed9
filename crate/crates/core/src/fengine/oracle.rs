//! From-scratch recomputation of the catalog by literal interval
//! definitions. Re-aggregates every event on each call; exists to check the
//! incremental engine, not to be fast. Shares no aggregation code with it.

use super::{apply_mode, rate_per_hour, rel_change, FeatureError, FeatureVector, WindowConfig};
use crate::celog::{CeRecord, DimmId, CE_READ, CE_SCRUB};

struct Addr {
    bank: u32,
    row: u32,
    col: u32,
}

fn addr(r: &CeRecord) -> Result<Addr, FeatureError> {
    match (r.bank, r.row, r.col) {
        (Some(bank), Some(row), Some(col)) => Ok(Addr { bank, row, col }),
        _ => Err(FeatureError::MissingAddress { dimm: r.dimm.clone(), ts: r.ts }),
    }
}

/// Sorted `(key, count)` runs.
fn count_by<K: Ord + Copy>(events: &[&CeRecord], key: impl Fn(&Addr) -> K) -> Vec<(K, u64)> {
    let mut keys: Vec<K> = events.iter().map(|e| key(&addr(e).expect("checked"))).collect();
    keys.sort_unstable();
    let mut out: Vec<(K, u64)> = Vec::new();
    for k in keys {
        match out.last_mut() {
            Some((last, c)) if *last == k => *c += 1,
            _ => out.push((k, 1)),
        }
    }
    out
}

fn has<K: Ord>(m: &[(K, u64)], k: &K) -> bool {
    m.binary_search_by(|(x, _)| x.cmp(k)).is_ok()
}

fn repeats<K>(m: &[(K, u64)], min: u32) -> f64 {
    m.iter().filter(|(_, c)| *c >= min as u64).count() as f64
}

fn max_count<K>(m: &[(K, u64)]) -> f64 {
    m.iter().map(|(_, c)| *c).max().unwrap_or(0) as f64
}

fn new_keys<K: Ord>(w: &[(K, u64)], h: &[(K, u64)]) -> f64 {
    w.iter().filter(|(k, _)| !has(h, k)).count() as f64
}

type Triple = (u32, u32, u32);

/// Keys of `m` other than `k` in the same bank within Chebyshev distance
/// `radius` over `(a, b)`.
fn close_count(m: &[(Triple, u64)], k: &Triple, radius: u32, two_d: bool) -> usize {
    let r = radius as i64;
    let span_b = if two_d { r } else { 0 };
    let mut n = 0;
    for da in -r..=r {
        for db in -span_b..=span_b {
            if da == 0 && db == 0 {
                continue;
            }
            let (a, b) = (k.1 as i64 + da, k.2 as i64 + db);
            if a < 0 || b < 0 || a > u32::MAX as i64 || b > u32::MAX as i64 {
                continue;
            }
            if has(m, &(k.0, a as u32, b as u32)) {
                n += 1;
            }
        }
    }
    n
}

fn adjacent_pairs(m: &[(Triple, u64)], radius: u32, two_d: bool) -> f64 {
    let total: usize = m.iter().map(|(k, _)| close_count(m, k, radius, two_d)).sum();
    (total / 2) as f64
}

fn with_neighbour(m: &[(Triple, u64)], radius: u32, two_d: bool) -> f64 {
    m.iter().filter(|(k, _)| close_count(m, k, radius, two_d) > 0).count() as f64
}

fn multibank(m: &[(Triple, u64)]) -> f64 {
    let mut pos: Vec<(u32, u32, u32)> = m.iter().map(|(k, _)| (k.1, k.2, k.0)).collect();
    pos.sort_unstable();
    let mut n = 0;
    let mut i = 0;
    while i < pos.len() {
        let mut j = i;
        while j < pos.len() && (pos[j].0, pos[j].1) == (pos[i].0, pos[i].1) {
            j += 1;
        }
        if j - i >= 2 {
            n += 1;
        }
        i = j;
    }
    n as f64
}

fn type_count(events: &[&CeRecord], t: &str) -> f64 {
    events.iter().filter(|e| e.error_type == t).count() as f64
}

/// Recomputes the feature vector of one DIMM at observation time `t0` from
/// all of its events with timestamp `<= t0` (time-ordered).
pub fn batch_recompute(
    dimm: &DimmId,
    events: &[CeRecord],
    t0: i64,
    config: &WindowConfig,
) -> Result<FeatureVector, FeatureError> {
    config.validate()?;
    let all: Vec<&CeRecord> = events.iter().filter(|e| e.ts <= t0).collect();
    if all.is_empty() {
        return Err(FeatureError::Empty(dimm.clone()));
    }
    for e in &all {
        addr(e)?;
    }
    let boundary = t0 - config.window_secs();
    let win: Vec<&CeRecord> = all.iter().copied().filter(|e| e.ts > boundary).collect();
    let hist: Vec<&CeRecord> = all.iter().copied().filter(|e| e.ts <= boundary).collect();

    let span = |evs: &[&CeRecord]| -> (Option<i64>, Option<i64>) {
        (evs.iter().map(|e| e.ts).min(), evs.iter().map(|e| e.ts).max())
    };
    let (wf, wl) = span(&win);
    let (hf, hl) = span(&hist);
    let rate_w = rate_per_hour(win.len() as u64, wf, wl);
    let rate_h = rate_per_hour(hist.len() as u64, hf, hl);
    let read_w = type_count(&win, CE_READ);
    let read_h = type_count(&hist, CE_READ);
    let scrub_w = type_count(&win, CE_SCRUB);
    let scrub_h = type_count(&hist, CE_SCRUB);
    let first = all.iter().map(|e| e.ts).min().expect("non-empty");
    let since_prev = if all.len() >= 2 {
        (all[all.len() - 1].ts - all[all.len() - 2].ts) as f64 / 3600.0
    } else {
        0.0
    };

    let mut v = vec![
        win.len() as f64,
        hist.len() as f64,
        rate_w,
        rate_h,
        rel_change(rate_w, rate_h),
        read_w,
        read_h,
        scrub_w,
        scrub_h,
        rel_change(read_w, read_h),
        rel_change(scrub_w, scrub_h),
        (t0 - first) as f64 / 3600.0,
        since_prev,
    ];

    let bank_w = count_by(&win, |a| a.bank);
    let bank_h = count_by(&hist, |a| a.bank);
    let bank_l = count_by(&all, |a| a.bank);
    v.extend([
        bank_w.len() as f64,
        bank_h.len() as f64,
        bank_l.len() as f64,
        new_keys(&bank_w, &bank_h),
        max_count(&bank_w),
        if bank_w.is_empty() { 0.0 } else { win.len() as f64 / bank_w.len() as f64 },
    ]);

    let families: [(fn(&Addr) -> Triple, bool); 3] = [
        (|a| (a.bank, a.row, 0), false),
        (|a| (a.bank, a.col, 0), false),
        (|a| (a.bank, a.row, a.col), true),
    ];
    for (key, two_d) in families {
        let kw = count_by(&win, key);
        let kh = count_by(&hist, key);
        let kl = count_by(&all, key);
        v.extend([
            kw.len() as f64,
            repeats(&kw, config.repeat_min),
            repeats(&kl, config.repeat_min),
            max_count(&kw),
            new_keys(&kw, &kh),
            adjacent_pairs(&kw, config.radius, two_d),
            with_neighbour(&kl, config.radius, two_d),
            multibank(&kw),
            multibank(&kl),
        ]);
    }
    apply_mode(&mut v, config.mode);
    FeatureVector::from_values(v).map_err(FeatureError::InvalidConfig)
}
