use memfail::celog::{CeRecord, DimmId};
use memfail::fengine::{batch_recompute, catalog, DimmState, Mode, Scope, ValueKind, WindowConfig};
use proptest::prelude::*;

const HOUR: i64 = 3600;

fn dimm() -> DimmId {
    DimmId::new("D0").unwrap()
}

/// Random time-ordered stream over 0..2000h. Addresses come from a small
/// space so repeats, neighbours and shared positions actually occur.
fn arb_stream(max_len: usize) -> impl Strategy<Value = Vec<CeRecord>> {
    let event = (
        0i64..2000 * HOUR,
        0u32..4,
        0u32..12,
        0u32..12,
        prop_oneof![Just("ce.read"), Just("ce.scrub"), Just("ce.patrol")],
    );
    proptest::collection::vec(event, 1..=max_len).prop_map(|mut evs| {
        evs.sort_by_key(|e| e.0);
        evs.into_iter()
            .map(|(ts, bank, row, col, ty)| CeRecord {
                ts,
                dimm: dimm(),
                error_type: ty.to_string(),
                rank: None,
                bank: Some(bank),
                row: Some(row),
                col: Some(col),
            })
            .collect()
    })
}

fn arb_window() -> impl Strategy<Value = f64> {
    prop_oneof![Just(3.0), Just(168.0), Just(336.0), 1.0f64..500.0]
}

fn assert_matches(got: &[f64], want: &[f64], ctx: &str) {
    for ((spec, g), w) in catalog().iter().zip(got).zip(want) {
        match spec.kind {
            ValueKind::Count => assert_eq!(g, w, "{ctx}: {}", spec.name),
            ValueKind::Real => assert!((g - w).abs() <= 1e-9, "{ctx}: {} got {g} want {w}", spec.name),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn incremental_matches_batch_on_every_prefix(stream in arb_stream(200), w in arb_window(), fixed in any::<bool>()) {
        let mode = if fixed { Mode::Fixed } else { Mode::Overall };
        let cfg = WindowConfig::new(w, mode).unwrap();
        let mut state = DimmState::new(dimm(), cfg).unwrap();
        for (i, ev) in stream.iter().enumerate() {
            state.ingest(ev).unwrap();
            let inc = state.snapshot().unwrap();
            let batch = batch_recompute(&dimm(), &stream[..=i], ev.ts, &cfg).unwrap();
            assert_matches(inc.values(), batch.values(), &format!("prefix {i}"));
        }
    }

    #[test]
    fn intervals_stay_disjoint_and_history_grows(stream in arb_stream(150), w in arb_window()) {
        let cfg = WindowConfig::new(w, Mode::Overall).unwrap();
        let mut state = DimmState::new(dimm(), cfg).unwrap();
        let (mut prev_h, mut prev_l) = (0, 0);
        let mut prev_snap: Option<Vec<f64>> = None;
        for ev in &stream {
            state.ingest(ev).unwrap();
            prop_assert_eq!(state.window_count() + state.history_count(), state.lifetime_count());
            prop_assert!(state.history_count() >= prev_h);
            prop_assert!(state.lifetime_count() > prev_l);
            prev_h = state.history_count();
            prev_l = state.lifetime_count();
            let snap = state.snapshot().unwrap().values().to_vec();
            if let Some(p) = &prev_snap {
                for ((spec, now), before) in catalog().iter().zip(&snap).zip(p) {
                    let monotone = matches!(spec.scope, Scope::H | Scope::Lifetime) && spec.kind == ValueKind::Count;
                    if monotone {
                        prop_assert!(now >= before, "{} decreased", spec.name);
                    }
                }
            }
            prev_snap = Some(snap);
        }
    }

    #[test]
    fn fixed_mode_window_slots_equal_overall(stream in arb_stream(150), w in arb_window()) {
        let over = WindowConfig::new(w, Mode::Overall).unwrap();
        let fixed = WindowConfig::new(w, Mode::Fixed).unwrap();
        let mut a = DimmState::new(dimm(), over).unwrap();
        let mut b = DimmState::new(dimm(), fixed).unwrap();
        for ev in &stream {
            a.ingest(ev).unwrap();
            b.ingest(ev).unwrap();
            let (sa, sb) = (a.snapshot().unwrap(), b.snapshot().unwrap());
            for ((spec, x), y) in catalog().iter().zip(sa.values()).zip(sb.values()) {
                if spec.scope == Scope::W {
                    prop_assert_eq!(x, y, "{}", spec.name);
                } else {
                    prop_assert_eq!(*y, 0.0);
                }
            }
        }
    }

    #[test]
    fn snapshot_is_pure(stream in arb_stream(60)) {
        let cfg = WindowConfig::new(168.0, Mode::Overall).unwrap();
        let mut s = DimmState::new(dimm(), cfg).unwrap();
        for ev in &stream {
            s.ingest(ev).unwrap();
        }
        let first = s.snapshot().unwrap();
        prop_assert_eq!(first, s.snapshot().unwrap());
    }
}

fn rec(ts: i64, bank: u32, row: u32, col: u32) -> CeRecord {
    CeRecord {
        ts,
        dimm: dimm(),
        error_type: "ce.read".into(),
        rank: None,
        bank: Some(bank),
        row: Some(row),
        col: Some(col),
    }
}

#[test]
fn events_at_or_before_the_boundary_never_reach_window_slots() {
    let cfg = WindowConfig::new(10.0, Mode::Fixed).unwrap();
    // straddle the boundary: one event exactly w old, one a second inside
    let stream = vec![rec(0, 1, 1, 1), rec(1, 2, 2, 2), rec(10 * HOUR + 1, 3, 3, 3)];
    let mut s = DimmState::new(dimm(), cfg).unwrap();
    for e in &stream {
        s.ingest(e).unwrap();
    }
    let fv = s.snapshot().unwrap();
    // t0 - w = 1: the events at 0 and 1 are history
    assert_eq!(fv.get("general.ce_count_W"), Some(1.0));
    assert_eq!(fv.get("bank.distinct_banks_W"), Some(1.0));
    let batch = batch_recompute(&dimm(), &stream, 10 * HOUR + 1, &cfg).unwrap();
    assert_eq!(fv, batch);
}

#[test]
fn probe_after_quiet_period_matches_batch() {
    let cfg = WindowConfig::new(3.0, Mode::Overall).unwrap();
    let stream = vec![rec(0, 1, 1, 1), rec(HOUR, 1, 1, 2), rec(2 * HOUR, 1, 2, 2)];
    let mut s = DimmState::new(dimm(), cfg).unwrap();
    for e in &stream {
        s.ingest(e).unwrap();
    }
    let t0 = 50 * HOUR;
    s.advance_to(t0).unwrap();
    let fv = s.snapshot().unwrap();
    assert_eq!(fv.get("general.ce_count_W"), Some(0.0));
    assert_eq!(fv.get("general.ce_rate_W"), Some(0.0));
    assert_eq!(fv, batch_recompute(&dimm(), &stream, t0, &cfg).unwrap());
}

#[test]
fn single_bank_stream_has_no_new_banks_after_expiry() {
    let cfg = WindowConfig::new(5.0, Mode::Overall).unwrap();
    let stream = vec![rec(0, 7, 0, 0), rec(10 * HOUR, 7, 100, 100)];
    let fv = batch_recompute(&dimm(), &stream, 10 * HOUR, &cfg).unwrap();
    assert_eq!(fv.get("bank.new_banks_W"), Some(0.0));
    let mut s = DimmState::new(dimm(), cfg).unwrap();
    for e in &stream {
        s.ingest(e).unwrap();
    }
    assert_eq!(s.snapshot().unwrap(), fv);
}

#[test]
fn singleton_stream_values() {
    let cfg = WindowConfig::new(168.0, Mode::Overall).unwrap();
    let fv = batch_recompute(&dimm(), &[rec(1000 * HOUR, 0, 0, 0)], 1000 * HOUR, &cfg).unwrap();
    assert_eq!(fv.get("general.ce_count_W"), Some(1.0));
    assert_eq!(fv.get("general.ce_count_H"), Some(0.0));
    assert_eq!(fv.get("bank.new_banks_W"), Some(1.0));
    assert_eq!(fv.get("general.time_since_first_ce"), Some(0.0));
}

#[test]
fn ingest_work_is_linear_in_stream_length() {
    // every event is expired at most once; a long stream of closely spaced
    // events must not slow down as history grows
    let cfg = WindowConfig::new(1.0, Mode::Overall).unwrap();
    let mut s = DimmState::new(dimm(), cfg).unwrap();
    let n = 200_000i64;
    let start = std::time::Instant::now();
    for i in 0..n {
        s.ingest(&rec(i * 60, (i % 16) as u32, (i % 4096) as u32, (i % 1024) as u32)).unwrap();
    }
    assert_eq!(s.lifetime_count(), n as u64);
    assert!(s.window_len() <= 61);
    assert!(start.elapsed().as_secs() < 20);
}
