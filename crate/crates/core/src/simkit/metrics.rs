use super::{SimError, Trajectory};

/// Piecewise-constant reference: `initial` until the first step, then each
/// `(time, value)` from its time on.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSchedule {
    pub initial: f64,
    pub steps: Vec<(f64, f64)>,
}

impl ReferenceSchedule {
    pub fn constant(value: f64) -> Self {
        Self {
            initial: value,
            steps: Vec::new(),
        }
    }

    pub fn step(initial: f64, time: f64, value: f64) -> Self {
        Self {
            initial,
            steps: vec![(time, value)],
        }
    }

    /// Reads the reference from the trajectory's recorded exogenous input,
    /// so event snapping is reproduced exactly.
    pub fn from_exogenous(traj: &Trajectory, input: usize) -> Self {
        let mut sched = Self::constant(traj.exogenous.first().map_or(0.0, |w| w[input]));
        let mut last = sched.initial;
        for (t, w) in traj.times.iter().zip(&traj.exogenous) {
            if w[input] != last {
                sched.steps.push((*t, w[input]));
                last = w[input];
            }
        }
        sched
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.steps
            .iter()
            .rev()
            .find(|(ts, _)| *ts <= t)
            .map_or(self.initial, |&(_, v)| v)
    }

    pub fn final_value(&self) -> f64 {
        self.steps.last().map_or(self.initial, |&(_, v)| v)
    }

    fn last_step_time(&self) -> f64 {
        self.steps.last().map_or(0.0, |&(t, _)| t)
    }

    /// Size of the last step (zero without steps).
    fn last_step_size(&self) -> f64 {
        let n = self.steps.len();
        match n {
            0 => 0.0,
            1 => self.steps[0].1 - self.initial,
            _ => self.steps[n - 1].1 - self.steps[n - 2].1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientMetrics {
    /// `∫ (y − r)² dt` over the whole run [unit²·s].
    pub ise: f64,
    /// Peak excursion beyond the final reference in the direction of the
    /// last step, in % of that step (zero without steps).
    pub overshoot_pct: f64,
    /// Time after the last step until the output stays within 2 % of the
    /// step size (2 % of the reference when there is no step); `None` when
    /// it never settles within the horizon.
    pub settling_time: Option<f64>,
}

/// Tracking metrics of state `tracked` against `reference`.
pub fn metrics(traj: &Trajectory, tracked: usize, reference: &ReferenceSchedule) -> TransientMetrics {
    let y = traj.component(tracked);
    let t = &traj.times;
    let err: Vec<f64> = t
        .iter()
        .zip(&y)
        .map(|(ti, yi)| yi - reference.value_at(*ti))
        .collect();
    let ise = t
        .windows(2)
        .zip(err.windows(2))
        .map(|(tw, ew)| 0.5 * (tw[1] - tw[0]) * (ew[0] * ew[0] + ew[1] * ew[1]))
        .sum();

    let t_step = reference.last_step_time();
    let r_final = reference.final_value();
    let start = t.iter().position(|&ti| ti >= t_step).unwrap_or(t.len());
    let delta = reference.last_step_size();

    let overshoot_pct = if delta == 0.0 {
        0.0
    } else {
        let peak = y[start..]
            .iter()
            .map(|yi| (yi - r_final) * delta.signum())
            .fold(0.0, f64::max);
        100.0 * peak / delta.abs()
    };

    let band = 0.02 * if delta != 0.0 { delta.abs() } else { r_final.abs() };
    let outside = (start..y.len()).rev().find(|&i| (y[i] - r_final).abs() > band);
    let settling_time = match outside {
        None => Some(0.0),
        Some(i) if i + 1 < y.len() => Some(t[i + 1] - t_step),
        Some(_) => None,
    };
    TransientMetrics {
        ise,
        overshoot_pct,
        settling_time,
    }
}

/// Paired metrics of two runs on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunComparison {
    pub a: TransientMetrics,
    pub b: TransientMetrics,
    /// `ise(b) − ise(a)`.
    pub ise_delta: f64,
    /// Per-component `max |a − b|`.
    pub max_state_deviation: Vec<f64>,
    /// Per-component deviation divided by the component's peak magnitude in
    /// `a` (or 1 when that is zero).
    pub max_normalized_deviation: Vec<f64>,
}

pub fn compare_runs(
    a: &Trajectory,
    b: &Trajectory,
    tracked: usize,
    reference: &ReferenceSchedule,
) -> Result<RunComparison, SimError> {
    if a.times != b.times || a.states.first().map(Vec::len) != b.states.first().map(Vec::len) {
        return Err(SimError::GridMismatch);
    }
    let n = a.states.first().map_or(0, Vec::len);
    let mut dev = vec![0.0f64; n];
    let mut peak = vec![0.0f64; n];
    for (sa, sb) in a.states.iter().zip(&b.states) {
        for i in 0..n {
            dev[i] = dev[i].max((sa[i] - sb[i]).abs());
            peak[i] = peak[i].max(sa[i].abs());
        }
    }
    let normalized = dev
        .iter()
        .zip(&peak)
        .map(|(d, p)| if *p > 0.0 { d / p } else { *d })
        .collect();
    let ma = metrics(a, tracked, reference);
    let mb = metrics(b, tracked, reference);
    Ok(RunComparison {
        ise_delta: mb.ise - ma.ise,
        a: ma,
        b: mb,
        max_state_deviation: dev,
        max_normalized_deviation: normalized,
    })
}
