use std::fmt::Write as _;

use super::{
    alert_step, level, step, ActuatorEvent, AlertConfig, AlertState, FatigueAccumulator,
    FatigueLevel, Result,
};
use crate::classifier::ClassLabel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub r: u64,
    pub level: FatigueLevel,
    pub mode: AlertState,
    /// Classifier output for the tick; `None` when the frame was skipped.
    pub label: Option<ClassLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub config: AlertConfig,
    pub ticks: Vec<TickRecord>,
    pub events: Vec<ActuatorEvent>,
}

impl Trace {
    pub fn r_values(&self) -> Vec<u64> {
        self.ticks.iter().map(|t| t.r).collect()
    }

    /// Line-oriented rendering: a `#` header with the configuration, then
    /// `TICK <t> <r> <level> <mode>` per tick followed by that tick's
    /// `EVENT <t> <name>` lines.
    pub fn to_text(&self) -> String {
        self.render(|_| None)
    }

    /// Like [`Trace::to_text`], with an optional extra line before each tick.
    pub fn render(&self, prefix: impl Fn(usize) -> Option<String>) -> String {
        let mut out = format!("# {}\n", self.config.describe());
        let mut events = self.events.iter().peekable();
        for (i, tick) in self.ticks.iter().enumerate() {
            if let Some(line) = prefix(i) {
                out.push_str(&line);
                out.push('\n');
            }
            writeln!(
                out,
                "TICK {} {} {} {}",
                tick.t, tick.r, tick.level, tick.mode
            )
            .unwrap();
            while let Some(e) = events.next_if(|e| e.t <= tick.t) {
                writeln!(out, "EVENT {} {}", e.t, e.kind).unwrap();
            }
        }
        out
    }
}

/// Incremental driver for the alert unit: one call per classifier output.
#[derive(Debug, Clone)]
pub struct FatigueMonitor {
    config: AlertConfig,
    acc: FatigueAccumulator,
    state: AlertState,
    trace: Trace,
}

impl FatigueMonitor {
    pub fn new(config: AlertConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            acc: FatigueAccumulator::default(),
            state: AlertState::Idle,
            trace: Trace {
                config,
                ticks: Vec::new(),
                events: Vec::new(),
            },
        })
    }

    pub fn accumulator(&self) -> FatigueAccumulator {
        self.acc
    }

    pub fn state(&self) -> AlertState {
        self.state
    }

    /// Advance one sample period. A skipped frame (`None`) leaves the
    /// running sum untouched but still lets time and timers move.
    pub fn push(&mut self, label: Option<ClassLabel>) -> &[ActuatorEvent] {
        self.acc = match label {
            Some(l) => step(self.acc, l, &self.config),
            None => FatigueAccumulator {
                r: self.acc.r,
                t: self.acc.t + self.config.sample_period,
            },
        };
        let lvl = level(&self.acc, &self.config);
        let (state, events) = alert_step(
            self.state,
            lvl,
            self.config.sample_period,
            self.acc.t,
            &self.config,
        );
        self.state = state;
        self.trace.ticks.push(TickRecord {
            t: self.acc.t,
            r: self.acc.r,
            level: lvl,
            mode: state,
            label,
        });
        let start = self.trace.events.len();
        self.trace.events.extend(events);
        &self.trace.events[start..]
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }
}

/// Run the alert unit over a label sequence starting from `r = 0`, `t = 0`, Idle.
pub fn simulate(labels: &[ClassLabel], config: &AlertConfig) -> Result<Trace> {
    let mut m = FatigueMonitor::new(*config)?;
    for &l in labels {
        m.push(Some(l));
    }
    Ok(m.into_trace())
}
