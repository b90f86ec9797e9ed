//! Alert unit.
//!
//! Classifier outputs (+1 fatigued, -1 alert) feed a running sum clamped at
//! zero. The sum is banded into a [`FatigueLevel`] by two thresholds, and the
//! level drives an alarm/escalation state machine that emits
//! [`ActuatorEvent`]s.
//!
//! The level is a function of the running sum alone; elapsed time only
//! drives the alarm timers.

mod alert;
mod trace;

pub use alert::{alert_step, AlertState};
pub use trace::{simulate, FatigueMonitor, TickRecord, Trace};

use std::fmt;

use thiserror::Error;

use crate::classifier::ClassLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FatigueError {
    #[error("invalid alert configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = FatigueError> = std::result::Result<T, E>;

/// Running sum `r` and elapsed time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FatigueAccumulator {
    pub r: u64,
    pub t: f64,
}

/// Thresholds and timers for the alert unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlertConfig {
    /// Lowest running sum that counts as low fatigue.
    pub t_low: u64,
    /// Lowest running sum that counts as high fatigue.
    pub t_high: u64,
    /// Seconds the low-fatigue alarm rings before the level is re-checked.
    pub alarm_duration: f64,
    /// Seconds spent at high fatigue before the vehicle is stopped.
    pub high_persist: f64,
    pub water_spray_enabled: bool,
    /// Seconds represented by one classifier output.
    pub sample_period: f64,
    /// Sound a fresh AlarmOn (preceded by AlarmOff) at every re-check while
    /// the level stays low, instead of keeping one continuous alarm.
    pub realarm_on_recheck: bool,
}

impl Default for AlertConfig {
    fn default() -> Self {
        Self {
            t_low: 5,
            t_high: 15,
            alarm_duration: 10.0,
            high_persist: 5.0,
            water_spray_enabled: false,
            sample_period: 1.0,
            realarm_on_recheck: false,
        }
    }
}

impl AlertConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FatigueError::InvalidConfig(m));
        if self.t_low < 1 || self.t_high <= self.t_low {
            return bad(format!(
                "need 1 <= t_low < t_high, got t_low={} t_high={}",
                self.t_low, self.t_high
            ));
        }
        if !(self.alarm_duration > 0.0 && self.alarm_duration.is_finite()) {
            return bad(format!(
                "alarm_duration must be positive, got {}",
                self.alarm_duration
            ));
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return bad(format!(
                "sample_period must be positive, got {}",
                self.sample_period
            ));
        }
        if !(self.high_persist >= 0.0 && self.high_persist.is_finite()) {
            return bad(format!(
                "high_persist must be non-negative, got {}",
                self.high_persist
            ));
        }
        Ok(())
    }

    /// One-line summary used as the trace header.
    pub fn describe(&self) -> String {
        format!(
            "t_low={} t_high={} alarm_duration={} high_persist={} water_spray={} sample_period={} realarm_on_recheck={}",
            self.t_low,
            self.t_high,
            self.alarm_duration,
            self.high_persist,
            self.water_spray_enabled,
            self.sample_period,
            self.realarm_on_recheck
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FatigueLevel {
    None,
    Low,
    High,
}

impl fmt::Display for FatigueLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FatigueLevel::None => "none",
            FatigueLevel::Low => "low",
            FatigueLevel::High => "high",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActuatorKind {
    AlarmOn,
    AlarmOff,
    ReduceSpeed,
    StopVehicle,
    WaterSpray,
}

impl fmt::Display for ActuatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorEvent {
    pub kind: ActuatorKind,
    /// End time of the tick that produced the event.
    pub t: f64,
}

/// `r' = max(0, r + label)`, `t' = t + sample_period`.
pub fn step(
    acc: FatigueAccumulator,
    label: ClassLabel,
    config: &AlertConfig,
) -> FatigueAccumulator {
    let r = match label {
        ClassLabel::Fatigued => acc.r + 1,
        ClassLabel::Alert => acc.r.saturating_sub(1),
    };
    FatigueAccumulator {
        r,
        t: acc.t + config.sample_period,
    }
}

/// Band the running sum; each threshold is inclusive at its lower edge.
pub fn level(acc: &FatigueAccumulator, config: &AlertConfig) -> FatigueLevel {
    level_of(acc.r, config)
}

pub fn level_of(r: u64, config: &AlertConfig) -> FatigueLevel {
    if r >= config.t_high {
        FatigueLevel::High
    } else if r >= config.t_low {
        FatigueLevel::Low
    } else {
        FatigueLevel::None
    }
}
