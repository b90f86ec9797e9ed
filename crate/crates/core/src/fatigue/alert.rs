use std::fmt;

use super::{ActuatorEvent, ActuatorKind, AlertConfig, FatigueLevel};

/// Slack for floating-point timer comparisons.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AlertState {
    #[default]
    Idle,
    LowAlarm {
        remaining: f64,
    },
    HighAlert {
        elapsed_in_high: f64,
        stop_issued: bool,
    },
}

impl AlertState {
    pub fn alarm_on(&self) -> bool {
        !matches!(self, AlertState::Idle)
    }
}

impl fmt::Display for AlertState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlertState::Idle => f.write_str("Idle"),
            AlertState::LowAlarm { remaining } => write!(f, "LowAlarm({remaining})"),
            AlertState::HighAlert {
                elapsed_in_high,
                stop_issued,
            } => write!(
                f,
                "HighAlert({elapsed_in_high},{})",
                if *stop_issued { "stopped" } else { "moving" }
            ),
        }
    }
}

struct Emitter {
    t: f64,
    events: Vec<ActuatorEvent>,
}

impl Emitter {
    fn push(&mut self, kind: ActuatorKind) {
        self.events.push(ActuatorEvent { kind, t: self.t });
    }
}

/// Enter HighAlert: ReduceSpeed and optional WaterSpray once per episode,
/// StopVehicle straight away when no persistence is required.
fn enter_high(em: &mut Emitter, config: &AlertConfig) -> AlertState {
    em.push(ActuatorKind::ReduceSpeed);
    if config.water_spray_enabled {
        em.push(ActuatorKind::WaterSpray);
    }
    let stop = config.high_persist <= TIME_EPS;
    if stop {
        em.push(ActuatorKind::StopVehicle);
    }
    AlertState::HighAlert {
        elapsed_in_high: 0.0,
        stop_issued: stop,
    }
}

fn from_idle(level: FatigueLevel, em: &mut Emitter, config: &AlertConfig) -> AlertState {
    match level {
        FatigueLevel::None => AlertState::Idle,
        FatigueLevel::Low => {
            em.push(ActuatorKind::AlarmOn);
            AlertState::LowAlarm {
                remaining: config.alarm_duration,
            }
        }
        FatigueLevel::High => {
            em.push(ActuatorKind::AlarmOn);
            enter_high(em, config)
        }
    }
}

/// Advance the alert state machine by one tick of length `dt` ending at
/// time `t`. Returns the new state and the events it produced, in order.
///
/// * Idle: Low starts the alarm for `alarm_duration`; High starts the alarm
///   and escalates.
/// * LowAlarm: High escalates (the alarm is already on). Otherwise the timer
///   counts down; at expiry a Low level restarts it silently and a None
///   level switches the alarm off.
/// * HighAlert: time at High accumulates and StopVehicle fires once when it
///   reaches `high_persist`. Dropping below High switches the alarm off and
///   re-applies the Idle rules on the same tick.
pub fn alert_step(
    state: AlertState,
    level: FatigueLevel,
    dt: f64,
    t: f64,
    config: &AlertConfig,
) -> (AlertState, Vec<ActuatorEvent>) {
    let mut em = Emitter {
        t,
        events: Vec::new(),
    };
    let next = match state {
        AlertState::Idle => from_idle(level, &mut em, config),
        AlertState::LowAlarm { remaining } => {
            if level == FatigueLevel::High {
                enter_high(&mut em, config)
            } else {
                let remaining = remaining - dt;
                if remaining > TIME_EPS {
                    AlertState::LowAlarm { remaining }
                } else if level == FatigueLevel::Low {
                    if config.realarm_on_recheck {
                        em.push(ActuatorKind::AlarmOff);
                        em.push(ActuatorKind::AlarmOn);
                    }
                    AlertState::LowAlarm {
                        remaining: config.alarm_duration,
                    }
                } else {
                    em.push(ActuatorKind::AlarmOff);
                    AlertState::Idle
                }
            }
        }
        AlertState::HighAlert {
            elapsed_in_high,
            stop_issued,
        } => {
            if level == FatigueLevel::High {
                let elapsed = elapsed_in_high + dt;
                let stop = !stop_issued && elapsed >= config.high_persist - TIME_EPS;
                if stop {
                    em.push(ActuatorKind::StopVehicle);
                }
                AlertState::HighAlert {
                    elapsed_in_high: elapsed,
                    stop_issued: stop_issued || stop,
                }
            } else {
                em.push(ActuatorKind::AlarmOff);
                from_idle(level, &mut em, config)
            }
        }
    };
    (next, em.events)
}
