//! Tracking metrics over trial telemetry.
//!
//! An excursion is a maximal run of samples with `P > 1`. Its sensitivity is
//! peak height over breadth, `s = h / b`, with the height measured above the
//! ROI boundary by default and the breadth in seconds. A trial set is
//! summarized by the mean per-peak sensitivity and by that mean divided by
//! the number of excursions per trial.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::trial::{Sample, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excursion<T> {
    /// Time of the first sample with `P > 1`.
    pub t_start: T,
    /// Time of the first later sample with `P <= 1`, or one step past the
    /// final sample when the trial ended outside the ROI.
    pub t_end: T,
    pub p_max: T,
    /// Still open when the record ended.
    pub open: bool,
}

impl<T: Scalar> Excursion<T> {
    pub fn breadth(&self) -> T {
        self.t_end - self.t_start
    }
}

/// Where peak height is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PeakBaseline {
    /// `h = p_max - 1`.
    #[default]
    Boundary,
    /// `h = p_max`.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsOptions {
    pub baseline: PeakBaseline,
    pub include_open: bool,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            baseline: PeakBaseline::Boundary,
            include_open: true,
        }
    }
}

/// Excursions in a `(t, P)` trace sampled every `dt`.
pub fn excursions_in<T: Scalar>(
    trace: impl IntoIterator<Item = (T, T)>,
    dt: T,
) -> Vec<Excursion<T>> {
    let mut out = Vec::new();
    let mut current: Option<Excursion<T>> = None;
    let mut last_t = None;
    for (t, p) in trace {
        last_t = Some(t);
        match (&mut current, p > T::one()) {
            (None, true) => {
                current = Some(Excursion {
                    t_start: t,
                    t_end: t,
                    p_max: p,
                    open: false,
                })
            }
            (Some(e), true) => e.p_max = e.p_max.max(p),
            (Some(e), false) => {
                e.t_end = t;
                out.push(*e);
                current = None;
            }
            (None, false) => {}
        }
    }
    if let (Some(mut e), Some(t)) = (current, last_t) {
        e.t_end = t + dt;
        e.open = true;
        out.push(e);
    }
    out
}

pub fn detect_excursions<T: Scalar>(record: &TrialRecord<T>) -> Vec<Excursion<T>> {
    excursions_in(samples_trace(&record.samples), record.dt())
}

fn samples_trace<T: Scalar>(samples: &[Sample<T>]) -> impl Iterator<Item = (T, T)> + '_ {
    samples.iter().map(|s| (s.t, s.p))
}

pub fn peak_sensitivity<T: Scalar>(e: &Excursion<T>, baseline: PeakBaseline) -> T {
    let h = match baseline {
        PeakBaseline::Boundary => e.p_max - T::one(),
        PeakBaseline::Zero => e.p_max,
    };
    h / e.breadth()
}

/// Mean sensitivity divided by the excursion count; absent when there were
/// no excursions.
pub fn normalize<T: Scalar>(mean_s: T, n: T) -> Option<T> {
    (n > T::zero()).then(|| mean_s / n)
}

/// Mean of per-arena normalized sensitivities.
pub fn cross_arena_normalized<T: Scalar>(per_arena: &[Option<T>]) -> Option<T> {
    let present: Vec<T> = per_arena.iter().flatten().copied().collect();
    if present.is_empty() {
        return None;
    }
    let sum = present.iter().fold(T::zero(), |a, &b| a + b);
    Some(sum / T::from_usize(present.len())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Expenditure<T> {
    pub yaw_active_s: T,
    pub pitch_active_s: T,
    pub overlap_s: T,
}

pub fn control_expenditure<T: Scalar>(record: &TrialRecord<T>) -> Expenditure<T> {
    expenditure_of(&record.samples, record.dt())
}

fn expenditure_of<T: Scalar>(samples: &[Sample<T>], dt: T) -> Expenditure<T> {
    let (mut yaw, mut pitch, mut both) = (0usize, 0usize, 0usize);
    for s in samples {
        let y = s.yaw_cmd != T::zero();
        let p = s.pitch_cmd != T::zero();
        yaw += usize::from(y);
        pitch += usize::from(p);
        both += usize::from(y && p);
    }
    let secs = |n: usize| T::from_usize(n).expect("count fits the scalar") * dt;
    Expenditure {
        yaw_active_s: secs(yaw),
        pitch_active_s: secs(pitch),
        overlap_s: secs(both),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport<T> {
    pub trials: usize,
    /// Excursions across all trials, ordered by `(t_start, t_end, p_max)`.
    pub excursions: Vec<Excursion<T>>,
    /// Total number of excursions.
    pub n: usize,
    /// Mean number of excursions per trial.
    pub n_per_trial: T,
    /// Sensitivities in the same order as `excursions`.
    pub per_peak_s: Vec<T>,
    pub mean_s: Option<T>,
    /// `mean_s / n_per_trial`.
    pub normalized_s: Option<T>,
    /// Every sample of every trial kept the target in frame.
    pub success: bool,
    pub yaw_active_s: T,
    pub pitch_active_s: T,
    pub overlap_s: T,
}

fn excursion_order<T: Scalar>(a: &Excursion<T>, b: &Excursion<T>) -> Ordering {
    let key = |e: &Excursion<T>| [e.t_start, e.t_end, e.p_max];
    key(a)
        .iter()
        .zip(key(b).iter())
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
        .then(a.open.cmp(&b.open))
}

fn sum<T: Scalar>(xs: impl IntoIterator<Item = T>) -> T {
    xs.into_iter().fold(T::zero(), |a, b| a + b)
}

/// Aggregates metrics over a set of trials. The result does not depend on
/// the order of `records`.
///
/// # Panics
/// If `records` is empty.
pub fn summarize<T: Scalar>(
    records: &[TrialRecord<T>],
    opts: MetricsOptions,
) -> SensitivityReport<T> {
    let traces: Vec<(&[Sample<T>], T)> = records
        .iter()
        .map(|r| (r.samples.as_slice(), r.dt()))
        .collect();
    summarize_traces(&traces, opts)
}

/// As [`summarize`], over bare sample traces with their timestep.
///
/// # Panics
/// If `traces` is empty.
pub fn summarize_traces<T: Scalar>(
    traces: &[(&[Sample<T>], T)],
    opts: MetricsOptions,
) -> SensitivityReport<T> {
    assert!(!traces.is_empty(), "summarize needs at least one trace");
    let mut excursions: Vec<Excursion<T>> = traces
        .iter()
        .flat_map(|&(s, dt)| excursions_in(samples_trace(s), dt))
        .filter(|e| opts.include_open || !e.open)
        .collect();
    excursions.sort_by(excursion_order);

    let per_peak_s: Vec<T> = excursions
        .iter()
        .map(|e| peak_sensitivity(e, opts.baseline))
        .collect();
    let n = excursions.len();
    let n_t = T::from_usize(n).expect("count fits the scalar");
    let trials_t = T::from_usize(traces.len()).expect("count fits the scalar");
    let mean_s = (n > 0).then(|| sum(per_peak_s.iter().copied()) / n_t);
    let n_per_trial = n_t / trials_t;

    // Expenditure is a count of active samples times dt per trace.
    let exps: Vec<Expenditure<T>> = traces
        .iter()
        .map(|&(s, dt)| expenditure_of(s, dt))
        .collect();
    let ordered = |f: fn(&Expenditure<T>) -> T| {
        let mut v: Vec<T> = exps.iter().map(f).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        sum(v)
    };
    let yaw_active_s = ordered(|e| e.yaw_active_s);
    let pitch_active_s = ordered(|e| e.pitch_active_s);
    let overlap_s = ordered(|e| e.overlap_s);

    SensitivityReport {
        trials: traces.len(),
        excursions,
        n,
        n_per_trial,
        per_peak_s,
        mean_s,
        normalized_s: mean_s.and_then(|m| normalize(m, n_per_trial)),
        success: traces.iter().all(|(s, _)| s.iter().all(|x| x.visible)),
        yaw_active_s,
        pitch_active_s,
        overlap_s,
    }
}
