use fatigue_core::classifier::ClassLabel;
use fatigue_core::fatigue::{
    alert_step, level_of, simulate, step, ActuatorKind, AlertConfig, AlertState,
    FatigueAccumulator, FatigueLevel, Trace,
};
use proptest::prelude::*;

use ClassLabel::{Alert as N, Fatigued as P};

fn from_bits(bits: u32, len: usize) -> Vec<ClassLabel> {
    (0..len)
        .map(|i| if bits >> i & 1 == 1 { P } else { N })
        .collect()
}

/// r' = max(0, r + s) iterated from 0.
fn recurrence(labels: &[ClassLabel]) -> Vec<u64> {
    let mut r: i64 = 0;
    labels
        .iter()
        .map(|l| {
            r = (r + l.value()).max(0);
            r as u64
        })
        .collect()
}

/// Checks the actuator contract on one trace and returns a description of
/// the first breach.
fn event_discipline(trace: &Trace) -> Result<(), String> {
    let mut alarm_on = false;
    let mut in_high = false;
    let mut reduce = 0;
    let mut stop = 0;
    let mut spray = 0;
    let mut last_t = f64::NEG_INFINITY;
    let mut events = trace.events.iter().peekable();
    for tick in &trace.ticks {
        let high_now = matches!(tick.mode, AlertState::HighAlert { .. });
        if !high_now {
            in_high = false;
        }
        while let Some(e) = events.next_if(|e| e.t <= tick.t) {
            if e.t < last_t {
                return Err(format!("timestamps go back at {}", e.t));
            }
            last_t = e.t;
            match e.kind {
                ActuatorKind::AlarmOn => {
                    if alarm_on {
                        return Err(format!("AlarmOn twice at {}", e.t));
                    }
                    alarm_on = true;
                }
                ActuatorKind::AlarmOff => {
                    if !alarm_on {
                        return Err(format!("AlarmOff without AlarmOn at {}", e.t));
                    }
                    alarm_on = false;
                }
                ActuatorKind::ReduceSpeed
                | ActuatorKind::StopVehicle
                | ActuatorKind::WaterSpray => {
                    if !high_now {
                        return Err(format!("{:?} outside HighAlert at {}", e.kind, e.t));
                    }
                    if !in_high {
                        in_high = true;
                        (reduce, stop, spray) = (0, 0, 0);
                    }
                    match e.kind {
                        ActuatorKind::ReduceSpeed => reduce += 1,
                        ActuatorKind::StopVehicle => {
                            if reduce == 0 {
                                return Err(format!("StopVehicle before ReduceSpeed at {}", e.t));
                            }
                            stop += 1
                        }
                        _ => spray += 1,
                    }
                    if reduce > 1 || stop > 1 || spray > 1 {
                        return Err(format!("repeated {:?} in one episode at {}", e.kind, e.t));
                    }
                }
            }
        }
        if high_now {
            in_high = true;
        }
        match tick.mode {
            AlertState::LowAlarm { remaining } => {
                if !(remaining > 0.0 && remaining <= trace.config.alarm_duration) {
                    return Err(format!("LowAlarm remaining {remaining} out of range"));
                }
            }
            AlertState::HighAlert {
                elapsed_in_high,
                stop_issued,
            } => {
                if stop_issued && elapsed_in_high < trace.config.high_persist - 1e-9 {
                    return Err("stop issued too early".into());
                }
            }
            AlertState::Idle => {}
        }
    }
    if events.next().is_some() {
        return Err("event after the last tick".into());
    }
    Ok(())
}

#[test]
fn all_length_14_sequences_match_the_recurrence() {
    let configs = [
        AlertConfig::default(),
        AlertConfig {
            t_low: 2,
            t_high: 4,
            high_persist: 2.0,
            alarm_duration: 3.0,
            water_spray_enabled: true,
            ..Default::default()
        },
        AlertConfig {
            t_low: 1,
            t_high: 2,
            high_persist: 0.0,
            alarm_duration: 1.0,
            realarm_on_recheck: true,
            ..Default::default()
        },
    ];
    for cfg in &configs {
        for bits in 0..1u32 << 14 {
            let labels = from_bits(bits, 14);
            let trace = simulate(&labels, cfg).unwrap();
            assert_eq!(trace.r_values(), recurrence(&labels), "bits {bits:014b}");
            assert_eq!(trace.ticks.len(), 14);
            if let Err(e) = event_discipline(&trace) {
                panic!("bits {bits:014b} cfg {cfg:?}: {e}");
            }
        }
    }
}

#[test]
fn dominance_over_all_pairs_of_length_8() {
    let cfg = AlertConfig::default();
    for a in 0..1u32 << 8 {
        let ra = simulate(&from_bits(a, 8), &cfg).unwrap().r_values();
        // every b that is elementwise <= a is a sub-mask of a
        let mut b = a;
        loop {
            let rb = simulate(&from_bits(b, 8), &cfg).unwrap().r_values();
            assert!(
                ra.iter().zip(&rb).all(|(x, y)| x >= y),
                "{a:08b} vs {b:08b}"
            );
            if b == 0 {
                break;
            }
            b = (b - 1) & a;
        }
    }
}

#[test]
fn step_examples() {
    let cfg = AlertConfig::default();
    let acc = step(FatigueAccumulator::default(), N, &cfg);
    assert_eq!((acc.r, acc.t), (0, 1.0));
    let acc = step(FatigueAccumulator { r: 3, t: 7.0 }, P, &cfg);
    assert_eq!((acc.r, acc.t), (4, 8.0));
}

#[test]
fn level_bands() {
    let cfg = AlertConfig::default();
    assert_eq!(level_of(0, &cfg), FatigueLevel::None);
    assert_eq!(level_of(4, &cfg), FatigueLevel::None);
    assert_eq!(level_of(5, &cfg), FatigueLevel::Low);
    assert_eq!(level_of(14, &cfg), FatigueLevel::Low);
    assert_eq!(level_of(15, &cfg), FatigueLevel::High);
    assert!(FatigueLevel::None < FatigueLevel::Low && FatigueLevel::Low < FatigueLevel::High);
}

fn event_ticks(trace: &Trace, kind: ActuatorKind) -> Vec<f64> {
    trace
        .events
        .iter()
        .filter(|e| e.kind == kind)
        .map(|e| e.t)
        .collect()
}

#[test]
fn escalation_timing_under_constant_fatigue() {
    let cfg = AlertConfig::default();
    let trace = simulate(&[P; 30], &cfg).unwrap();
    assert_eq!(event_ticks(&trace, ActuatorKind::AlarmOn), vec![5.0]);
    assert_eq!(event_ticks(&trace, ActuatorKind::ReduceSpeed), vec![15.0]);
    assert_eq!(event_ticks(&trace, ActuatorKind::StopVehicle), vec![20.0]);
    assert!(event_ticks(&trace, ActuatorKind::WaterSpray).is_empty());
    let sprayed = simulate(
        &[P; 30],
        &AlertConfig {
            water_spray_enabled: true,
            ..cfg
        },
    )
    .unwrap();
    assert_eq!(event_ticks(&sprayed, ActuatorKind::WaterSpray), vec![15.0]);
}

#[test]
fn low_alarm_rings_for_the_full_duration() {
    let cfg = AlertConfig::default();
    let (state, events) = alert_step(AlertState::Idle, FatigueLevel::Low, 1.0, 1.0, &cfg);
    assert_eq!(state, AlertState::LowAlarm { remaining: 10.0 });
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].kind, ActuatorKind::AlarmOn);
    let mut state = state;
    for tick in 2..=11 {
        let (next, events) = alert_step(state, FatigueLevel::None, 1.0, tick as f64, &cfg);
        if tick < 11 {
            assert!(events.is_empty(), "tick {tick}");
            assert!(matches!(next, AlertState::LowAlarm { .. }));
        } else {
            assert_eq!(next, AlertState::Idle);
            assert_eq!(events.len(), 1);
            assert_eq!(events[0].kind, ActuatorKind::AlarmOff);
            assert_eq!(events[0].t, 11.0);
        }
        state = next;
    }
}

#[test]
fn low_alarm_restarts_quietly_while_still_low() {
    let cfg = AlertConfig::default();
    let mut state = AlertState::LowAlarm { remaining: 1.0 };
    let (next, events) = alert_step(state, FatigueLevel::Low, 1.0, 20.0, &cfg);
    assert_eq!(next, AlertState::LowAlarm { remaining: 10.0 });
    assert!(events.is_empty());
    state = AlertState::Idle;
    let (next, events) = alert_step(state, FatigueLevel::None, 1.0, 1.0, &cfg);
    assert_eq!(next, AlertState::Idle);
    assert!(events.is_empty());
}

#[test]
fn high_from_idle_stops_once() {
    let cfg = AlertConfig::default();
    let mut state = AlertState::Idle;
    let mut stops = Vec::new();
    let mut reduces = Vec::new();
    for tick in 1..=12 {
        let (next, events) = alert_step(state, FatigueLevel::High, 1.0, tick as f64, &cfg);
        for e in events {
            match e.kind {
                ActuatorKind::StopVehicle => stops.push(tick),
                ActuatorKind::ReduceSpeed => reduces.push(tick),
                _ => {}
            }
        }
        state = next;
    }
    assert_eq!(reduces, vec![1]);
    // time at High counts from the entering tick
    assert_eq!(stops, vec![6]);
}

#[test]
fn all_alert_input_is_silent() {
    let trace = simulate(&[N; 50], &AlertConfig::default()).unwrap();
    assert!(trace.r_values().iter().all(|&r| r == 0));
    assert!(trace.ticks.iter().all(|t| t.mode == AlertState::Idle));
    assert!(trace.events.is_empty());
}

#[test]
fn invalid_configs_are_rejected() {
    for cfg in [
        AlertConfig {
            t_low: 0,
            ..Default::default()
        },
        AlertConfig {
            t_low: 15,
            ..Default::default()
        },
        AlertConfig {
            alarm_duration: 0.0,
            ..Default::default()
        },
        AlertConfig {
            sample_period: -1.0,
            ..Default::default()
        },
    ] {
        assert!(simulate(&[P], &cfg).is_err(), "{cfg:?}");
    }
}

fn arb_config() -> impl Strategy<Value = AlertConfig> {
    (
        1u64..8,
        1u64..12,
        1u32..12,
        0u32..8,
        any::<bool>(),
        any::<bool>(),
        1u32..4,
    )
        .prop_map(
            |(t_low, gap, dur, persist, spray, realarm, period)| AlertConfig {
                t_low,
                t_high: t_low + gap,
                alarm_duration: dur as f64,
                high_persist: persist as f64,
                water_spray_enabled: spray,
                sample_period: period as f64 * 0.5,
                realarm_on_recheck: realarm,
            },
        )
}

fn arb_labels() -> impl Strategy<Value = Vec<ClassLabel>> {
    proptest::collection::vec(any::<bool>().prop_map(|b| if b { P } else { N }), 1..200)
}

proptest! {
    #[test]
    fn traces_obey_the_actuator_contract(cfg in arb_config(), labels in arb_labels()) {
        let trace = simulate(&labels, &cfg).unwrap();
        prop_assert_eq!(trace.ticks.len(), labels.len());
        prop_assert_eq!(trace.r_values(), recurrence(&labels));
        if let Err(e) = event_discipline(&trace) {
            prop_assert!(false, "{}", e);
        }
        for w in trace.ticks.windows(2) {
            prop_assert!(w[1].t > w[0].t);
        }
        prop_assert_eq!(simulate(&labels, &cfg).unwrap(), trace);
    }

    #[test]
    fn raising_any_label_never_lowers_later_sums(labels in arb_labels(), idx: prop::sample::Index) {
        let i = idx.index(labels.len());
        let mut raised = labels.clone();
        raised[i] = P;
        let a = recurrence(&labels);
        let cfg = AlertConfig::default();
        let b = simulate(&raised, &cfg).unwrap().r_values();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| y >= x));
    }

    #[test]
    fn every_sum_has_exactly_one_level(r in 0u64..1000, cfg in arb_config()) {
        let lvl = level_of(r, &cfg);
        let expected = [
            (r < cfg.t_low, FatigueLevel::None),
            (r >= cfg.t_low && r < cfg.t_high, FatigueLevel::Low),
            (r >= cfg.t_high, FatigueLevel::High),
        ];
        prop_assert_eq!(expected.iter().filter(|(hit, _)| *hit).count(), 1);
        prop_assert_eq!(expected.iter().find(|(hit, _)| *hit).unwrap().1, lvl);
    }
}
