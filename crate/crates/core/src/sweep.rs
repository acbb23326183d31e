//! Conversion-efficiency scans over free-bound detuning and pulse delay.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{IntegrationError, SweepError};
use crate::integrator::{default_window, evolve, EvolveOptions};
use crate::model::{Amplitudes, SystemParams};
use crate::scalar::{linspace, Scalar};

/// `η` for one parameter set: atomic start at `t = 0`, default window.
pub fn conversion_efficiency<T: Scalar>(params: &SystemParams<T>, opts: &EvolveOptions<T>) -> Result<T, IntegrationError> {
    let (t0, t_end) = default_window(params);
    // only the end point matters here; sample count does not affect stepping
    let opts = EvolveOptions { samples: 2, ..*opts };
    evolve(params, &params.pulses(), Amplitudes::atomic(), t0, t_end, &opts).map(|tr| tr.eta)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell<T> {
    pub delta1: T,
    pub t1: T,
    pub outcome: Result<T, IntegrationError>,
}

impl<T: Scalar> SweepCell<T> {
    pub fn eta(&self) -> Option<T> {
        self.outcome.as_ref().ok().copied()
    }

    /// `"ok"` or a short failure tag.
    pub fn status(&self) -> &'static str {
        match &self.outcome {
            Ok(_) => "ok",
            Err(IntegrationError::StepUnderflow { .. }) => "step_underflow",
            Err(IntegrationError::TooManySteps { .. }) => "too_many_steps",
            Err(IntegrationError::Model { .. }) => "non_finite",
            Err(_) => "invalid",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult<T> {
    pub delta1: Vec<T>,
    pub t1: Vec<T>,
    /// Row-major: `t1` index outer, `delta1` index inner.
    pub cells: Vec<SweepCell<T>>,
    /// Index into `cells` of the largest η, first one on ties.
    pub argmax: Option<usize>,
}

impl<T: Scalar> SweepResult<T> {
    pub fn cell(&self, t1_idx: usize, delta1_idx: usize) -> &SweepCell<T> {
        &self.cells[t1_idx * self.delta1.len() + delta1_idx]
    }

    /// `(Δ₁*, t₁*, η*)`.
    pub fn best(&self) -> Option<(T, T, T)> {
        self.argmax.map(|k| {
            let c = &self.cells[k];
            (c.delta1, c.t1, c.eta().expect("argmax points at a finished cell"))
        })
    }
}

fn argmax_of<T: Scalar>(etas: impl Iterator<Item = Option<T>>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (k, eta) in etas.enumerate() {
        if let Some(e) = eta {
            if best.is_none_or(|(_, b)| e > b) {
                best = Some((k, e));
            }
        }
    }
    best.map(|(k, _)| k)
}

/// η on the `(Δ₁, t₁)` grid with `t₂` fixed. Failed cells are recorded,
/// not fatal.
pub fn sweep_eta<T: Scalar>(
    template: &SystemParams<T>,
    delta1_axis: &[T],
    t1_axis: &[T],
    t2: T,
    opts: &EvolveOptions<T>,
) -> Result<SweepResult<T>, SweepError> {
    if delta1_axis.is_empty() {
        return Err(SweepError::EmptyAxis("delta1"));
    }
    if t1_axis.is_empty() {
        return Err(SweepError::EmptyAxis("t1"));
    }
    let nd = delta1_axis.len();
    let cells: Vec<SweepCell<T>> = (0..nd * t1_axis.len())
        .into_par_iter()
        .map(|k| {
            let mut p = *template;
            p.delta1 = delta1_axis[k % nd];
            p.t1 = t1_axis[k / nd];
            p.t2 = t2;
            SweepCell { delta1: p.delta1, t1: p.t1, outcome: conversion_efficiency(&p, opts) }
        })
        .collect();
    let argmax = argmax_of(cells.iter().map(SweepCell::eta));
    Ok(SweepResult { delta1: delta1_axis.to_vec(), t1: t1_axis.to_vec(), cells, argmax })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation<T> {
    pub delta1: T,
    pub delay: T,
    pub outcome: Result<T, IntegrationError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeResult<T> {
    pub delta1: T,
    pub delay: T,
    pub eta: T,
    /// Best η of the initial coarse grid.
    pub coarse_eta: T,
    /// Every distinct point evaluated, in evaluation order.
    pub evaluations: Vec<Evaluation<T>>,
}

const REFINE_POINTS: usize = 5;
const REFINE_ROUNDS: usize = 3;
const REFINE_SHRINK: f64 = 3.0;

/// Coarse grid over the bounds followed by up to three 5×5 local grids around
/// the incumbent, each a third the size of the previous one.
///
/// The budget counts distinct evaluations. Three refinement rounds cost 75,
/// and whatever is left goes to the largest square coarse grid (at least
/// 3×3). Fully deterministic.
pub fn optimize<T: Scalar>(
    template: &SystemParams<T>,
    delta1_bounds: (T, T),
    delay_bounds: (T, T),
    budget: usize,
    opts: &EvolveOptions<T>,
) -> Result<OptimizeResult<T>, SweepError> {
    if budget < 9 {
        return Err(SweepError::BudgetTooSmall(budget));
    }
    for (name, (lo, hi)) in [("delta1", delta1_bounds), ("delay", delay_bounds)] {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(SweepError::BadBounds(name));
        }
    }
    let rounds = REFINE_ROUNDS.min((budget - 9) / (REFINE_POINTS * REFINE_POINTS));
    let coarse = ((budget - rounds * REFINE_POINTS * REFINE_POINTS) as f64).sqrt().floor() as usize;

    let mut cache: HashMap<(u64, u64), usize> = HashMap::new();
    let mut evaluations: Vec<Evaluation<T>> = Vec::new();
    let mut run = |points: Vec<(T, T)>, evaluations: &mut Vec<Evaluation<T>>| {
        let fresh: Vec<(T, T)> = points
            .into_iter()
            .filter(|&(d, tt)| {
                let key = (d.as_f64().to_bits(), tt.as_f64().to_bits());
                if cache.contains_key(&key) {
                    false
                } else {
                    cache.insert(key, cache.len());
                    true
                }
            })
            .collect();
        let results: Vec<Evaluation<T>> = fresh
            .into_par_iter()
            .map(|(delta1, delay)| {
                let mut p = *template;
                p.delta1 = delta1;
                p.t1 = p.t2 + delay;
                Evaluation { delta1, delay, outcome: conversion_efficiency(&p, opts) }
            })
            .collect();
        evaluations.extend(results);
    };

    let grid = |(dlo, dhi): (T, T), (tlo, thi): (T, T), n: usize| -> Vec<(T, T)> {
        let ds = linspace(dlo, dhi, n);
        let ts = linspace(tlo, thi, n);
        ts.iter().flat_map(|&t| ds.iter().map(move |&d| (d, t))).collect()
    };

    run(grid(delta1_bounds, delay_bounds, coarse), &mut evaluations);
    let best_index = |evals: &[Evaluation<T>]| argmax_of(evals.iter().map(|e| e.outcome.as_ref().ok().copied()));
    let Some(mut best) = best_index(&evaluations) else {
        let first = evaluations[0].outcome.clone().unwrap_err();
        return Err(SweepError::AllFailed(first));
    };
    let coarse_eta = evaluations[best].outcome.clone().unwrap();

    let cells = T::from_usize(coarse.max(2) - 1).unwrap();
    let mut half_d = (delta1_bounds.1 - delta1_bounds.0) / cells;
    let mut half_t = (delay_bounds.1 - delay_bounds.0) / cells;
    for _ in 0..rounds {
        let (cd, ct) = (evaluations[best].delta1, evaluations[best].delay);
        let clamp = |x: T, (lo, hi): (T, T)| x.max(lo).min(hi);
        let d_range = (clamp(cd - half_d, delta1_bounds), clamp(cd + half_d, delta1_bounds));
        let t_range = (clamp(ct - half_t, delay_bounds), clamp(ct + half_t, delay_bounds));
        run(grid(d_range, t_range, REFINE_POINTS), &mut evaluations);
        best = best_index(&evaluations).expect("incumbent still present");
        half_d = half_d / T::lit(REFINE_SHRINK);
        half_t = half_t / T::lit(REFINE_SHRINK);
    }

    let b = &evaluations[best];
    Ok(OptimizeResult { delta1: b.delta1, delay: b.delay, eta: b.outcome.clone().unwrap(), coarse_eta, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_first_on_ties_and_skips_failures() {
        assert_eq!(argmax_of([None, Some(0.3), Some(0.5), Some(0.5)].into_iter()), Some(2));
        assert_eq!(argmax_of::<f64>([None, None].into_iter()), None);
    }

    #[test]
    fn rejects_small_budget_and_bad_bounds() {
        let p = SystemParams::<f64>::reference();
        let o = EvolveOptions::default();
        assert!(matches!(optimize(&p, (-1.0, 0.0), (1.0, 2.0), 8, &o), Err(SweepError::BudgetTooSmall(8))));
        assert!(matches!(optimize(&p, (1.0, 0.0), (1.0, 2.0), 9, &o), Err(SweepError::BadBounds("delta1"))));
        assert!(matches!(sweep_eta(&p, &[], &[1.0], 0.0, &o), Err(SweepError::EmptyAxis("delta1"))));
    }
}
