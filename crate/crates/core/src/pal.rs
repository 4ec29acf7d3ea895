//! ε-PAL: active learning of an ε-accurate Pareto set over a finite grid.
//!
//! Every objective is maximized. Each grid point carries a confidence
//! hyperrectangle built from per-objective GP posteriors; rectangles only
//! shrink over a run (intersection rule) and points are finalized as either
//! Pareto-optimal or discarded once the rectangles allow it.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{FitConfig, GpModel, Prediction};

/// Confidence hyperrectangle `[low, high]` in objective space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveRegion {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ObjectiveRegion {
    pub fn point(values: &[f64]) -> Self {
        Self {
            low: values.to_vec(),
            high: values.to_vec(),
        }
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.low.iter().zip(&self.high).map(|(l, h)| h - l)
    }

    /// Euclidean length of `high - low` with each objective divided by its range.
    pub fn diagonal(&self, ranges: &[(f64, f64)]) -> f64 {
        self.widths()
            .zip(ranges)
            .map(|(w, (lo, hi))| {
                let span = hi - lo;
                let w = if span > 0.0 { w / span } else { w };
                w * w
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Undecided,
    ParetoOptimal,
    Discarded,
}

impl Classification {
    pub const ALL: [Classification; 3] = [
        Classification::ParetoOptimal,
        Classification::Discarded,
        Classification::Undecided,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Classification::Undecided => "undecided",
            Classification::ParetoOptimal => "pareto optimal",
            Classification::Discarded => "discarded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointStatus {
    pub class: Classification,
    pub sampled: bool,
}

impl Default for PointStatus {
    fn default() -> Self {
        Self {
            class: Classification::Undecided,
            sampled: false,
        }
    }
}

/// Run parameters. `epsilon` holds one relative tolerance per objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PalConfig {
    pub epsilon: Vec<f64>,
    pub delta: f64,
    pub beta_scale: f64,
    pub batch_size: usize,
    /// Total evaluation budget, seed evaluations included. The seed set is
    /// always evaluated even when it alone exceeds the budget.
    pub max_evaluations: usize,
    pub initial_samples: usize,
    pub seed: u64,
    pub fit: FitConfig,
}

impl Default for PalConfig {
    fn default() -> Self {
        Self {
            epsilon: vec![0.01, 0.01],
            delta: 0.05,
            beta_scale: 1.0,
            batch_size: 1,
            max_evaluations: 100,
            initial_samples: 3,
            seed: 0,
            fit: FitConfig {
                lengthscale_bounds: (1e-3, 1.0),
                ..FitConfig::default()
            },
        }
    }
}

impl PalConfig {
    pub fn with_epsilon(mut self, epsilon: f64, n_objectives: usize) -> Self {
        self.epsilon = vec![epsilon; n_objectives];
        self
    }

    pub fn validate(&self, n_objectives: usize) -> Result<()> {
        if self.epsilon.len() != n_objectives {
            return Err(Error::invalid(format!(
                "{} epsilon values for {} objectives",
                self.epsilon.len(),
                n_objectives
            )));
        }
        if self.epsilon.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::invalid("epsilon must be nonnegative"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        if !(self.beta_scale >= 0.0) {
            return Err(Error::invalid("beta scale must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.initial_samples == 0 {
            return Err(Error::invalid("at least one initial sample is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalState {
    pub regions: Vec<ObjectiveRegion>,
    pub classes: Vec<PointStatus>,
    pub iteration: usize,
    pub sampled_ids: Vec<usize>,
    /// Per-objective (min, max) of the current predicted means.
    pub objective_ranges: Vec<(f64, f64)>,
    /// Intersections that came out empty and fell back to the fresh interval.
    pub disjoint_fallbacks: usize,
    pub region_updates: usize,
}

impl PalState {
    pub fn new(n_points: usize, n_objectives: usize) -> Self {
        Self {
            // filled by the first region update
            regions: Vec::new(),
            classes: vec![PointStatus::default(); n_points],
            iteration: 0,
            sampled_ids: Vec::new(),
            objective_ranges: vec![(0.0, 0.0); n_objectives],
            disjoint_fallbacks: 0,
            region_updates: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn counts(&self) -> ClassCounts {
        ClassCounts::of(&self.classes)
    }

    pub fn is_converged(&self) -> bool {
        self.iteration > 0 && self.counts().undecided == 0
    }

    pub fn mark_sampled(&mut self, index: usize) {
        if !self.classes[index].sampled {
            self.classes[index].sampled = true;
            self.sampled_ids.push(index);
        }
    }

    /// Absolute slack per objective, `epsilon_i · range_i`.
    pub fn slack(&self, epsilon: &[f64]) -> Vec<f64> {
        epsilon
            .iter()
            .zip(&self.objective_ranges)
            .map(|(e, (lo, hi))| e * (hi - lo))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub pareto_optimal: usize,
    pub discarded: usize,
    pub undecided: usize,
}

impl ClassCounts {
    pub fn of(classes: &[PointStatus]) -> Self {
        let mut c = Self::default();
        for s in classes {
            match s.class {
                Classification::ParetoOptimal => c.pareto_optimal += 1,
                Classification::Discarded => c.discarded += 1,
                Classification::Undecided => c.undecided += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.pareto_optimal + self.discarded + self.undecided
    }
}

/// Confidence multiplier `scale · 2 ln(m · n · π² · t² / (6δ))`.
pub fn beta_t(iteration: usize, n_designs: usize, n_objectives: usize, delta: f64, scale: f64) -> f64 {
    let t = iteration as f64;
    let arg = n_objectives as f64 * n_designs as f64 * PI * PI * t * t / (6.0 * delta);
    scale * 2.0 * arg.ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionUpdate {
    pub regions: Vec<ObjectiveRegion>,
    pub fallbacks: usize,
}

/// Builds `[μ - √β σ, μ + √β σ]` per objective and intersects it with the
/// previous region. An empty intersection keeps the fresh interval and is
/// counted in `fallbacks`.
pub fn update_regions(
    predictions: &[Vec<Prediction>],
    beta: f64,
    previous: Option<&[ObjectiveRegion]>,
) -> RegionUpdate {
    let root = beta.max(0.0).sqrt();
    let mut fallbacks = 0;
    let regions = predictions
        .iter()
        .enumerate()
        .map(|(i, preds)| {
            let mut low: Vec<f64> = preds.iter().map(|p| p.mean - root * p.std).collect();
            let mut high: Vec<f64> = preds.iter().map(|p| p.mean + root * p.std).collect();
            if let Some(prev) = previous.map(|p| &p[i]) {
                for j in 0..low.len() {
                    let lo = low[j].max(prev.low[j]);
                    let hi = high[j].min(prev.high[j]);
                    if lo <= hi {
                        low[j] = lo;
                        high[j] = hi;
                    } else {
                        fallbacks += 1;
                    }
                }
            }
            ObjectiveRegion { low, high }
        })
        .collect();
    RegionUpdate { regions, fallbacks }
}

/// `a ⪰ b` componentwise with at least one strict inequality.
#[inline]
fn dominates(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> bool {
    let mut strict = false;
    for (x, y) in a.zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

#[inline]
fn weakly_dominates(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> bool {
    a.zip(b).all(|(x, y)| x >= y)
}

/// One classification sweep.
///
/// With absolute slack `e_i = epsilon_i · range_i`:
/// - an undecided point `x` is discarded when a point `x'` of the pessimistic
///   Pareto set (non-discarded points whose lower corners are not dominated)
///   satisfies `low(x') + e ⪰ high(x)`; members of the pessimistic set are
///   never discarded, which keeps ε-dominance from being mutual;
/// - a surviving undecided point is promoted when no other non-discarded
///   point has `high(x') ⪰ low(x) + e` with one strict component.
///
/// Finalized classes are never reopened.
pub fn classify(
    regions: &[ObjectiveRegion],
    epsilon: &[f64],
    ranges: &[(f64, f64)],
    classes: &[PointStatus],
) -> Vec<PointStatus> {
    let slack: Vec<f64> = epsilon.iter().zip(ranges).map(|(e, (lo, hi))| e * (hi - lo)).collect();
    let n = regions.len();
    let mut out = classes.to_vec();

    let active: Vec<usize> = (0..n)
        .filter(|&i| classes[i].class != Classification::Discarded)
        .collect();
    let pessimistic: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&i| {
            !active.iter().any(|&j| {
                j != i && dominates(regions[j].low.iter().copied(), regions[i].low.iter().copied())
            })
        })
        .collect();
    let mut in_pessimistic = vec![false; n];
    for &i in &pessimistic {
        in_pessimistic[i] = true;
    }

    for &i in &active {
        if out[i].class != Classification::Undecided || in_pessimistic[i] {
            continue;
        }
        let high = &regions[i].high;
        let discard = pessimistic.iter().any(|&j| {
            weakly_dominates(
                regions[j].low.iter().zip(&slack).map(|(l, e)| l + e),
                high.iter().copied(),
            )
        });
        if discard {
            out[i].class = Classification::Discarded;
        }
    }

    let survivors: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&i| out[i].class != Classification::Discarded)
        .collect();
    for &i in &survivors {
        if out[i].class != Classification::Undecided {
            continue;
        }
        let floor: Vec<f64> = regions[i].low.iter().zip(&slack).map(|(l, e)| l + e).collect();
        let blocked = survivors
            .iter()
            .any(|&j| j != i && dominates(regions[j].high.iter().copied(), floor.iter().copied()));
        if !blocked {
            out[i].class = Classification::ParetoOptimal;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum Selection {
    Next(usize),
    /// No undecided points remain.
    Converged,
    /// Undecided points remain but none of them can be sampled.
    Exhausted,
}

pub fn select_next(state: &PalState) -> Selection {
    select_next_excluding(state, &[])
}

/// Picks the unsampled, non-discarded point with the largest normalized
/// region diagonal, skipping `excluded`; ties go to the lowest index.
pub fn select_next_excluding(state: &PalState, excluded: &[usize]) -> Selection {
    if state.counts().undecided == 0 {
        return Selection::Converged;
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, status) in state.classes.iter().enumerate() {
        if status.sampled || status.class == Classification::Discarded || excluded.contains(&i) {
            continue;
        }
        let d = state.regions[i].diagonal(&state.objective_ranges);
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((i, d));
        }
    }
    match best {
        Some((i, _)) => Selection::Next(i),
        None => Selection::Exhausted,
    }
}

/// Greedy batch selection with fantasy observations: each pick has its
/// region collapsed onto its predicted mean before the next pick.
pub fn select_batch(
    state: &PalState,
    means: &[Vec<f64>],
    epsilon: &[f64],
    batch_size: usize,
) -> (Vec<usize>, Selection) {
    let mut fantasy = state.clone();
    let mut picked = Vec::with_capacity(batch_size);
    let mut last = Selection::Converged;
    while picked.len() < batch_size {
        last = select_next_excluding(&fantasy, &picked);
        let Selection::Next(i) = last else { break };
        picked.push(i);
        let region = &fantasy.regions[i];
        let collapsed: Vec<f64> = means[i]
            .iter()
            .zip(region.low.iter().zip(&region.high))
            .map(|(m, (lo, hi))| m.clamp(*lo, *hi))
            .collect();
        fantasy.regions[i] = ObjectiveRegion::point(&collapsed);
        fantasy.classes = classify(&fantasy.regions, epsilon, &fantasy.objective_ranges, &fantasy.classes);
    }
    (picked, last)
}

/// Indices of points not dominated by any other point (brute force).
pub fn pareto_front(values: &[Vec<f64>]) -> Vec<usize> {
    (0..values.len())
        .filter(|&i| {
            !values
                .iter()
                .enumerate()
                .any(|(j, v)| j != i && dominates(v.iter().copied(), values[i].iter().copied()))
        })
        .collect()
}

/// `count` points chosen by greedy maximin distance, starting from a seeded
/// random point. Ties go to the lowest index.
pub fn maximin_indices(points: &[Vec<f64>], count: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    if n == 0 || count == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < count.min(n) {
        let mut best = None;
        for (i, d) in nearest.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            if best.is_none_or(|(_, bd)| *d > bd) {
                best = Some((i, *d));
            }
        }
        let Some((next, _)) = best else { break };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Per-objective GP fits on the observed points, predicted over the grid.
/// Restart seeds depend only on `seed`, the objective and the number of
/// observations, so refitting unchanged data reproduces the same model.
pub fn fit_and_predict(
    design: &[Vec<f64>],
    observations: &[(usize, Vec<f64>)],
    n_objectives: usize,
    fit: &FitConfig,
    seed: u64,
) -> Result<Vec<Vec<Prediction>>> {
    if observations.is_empty() {
        return Err(Error::State("no observations to fit".into()));
    }
    let inputs: Vec<Vec<f64>> = observations.iter().map(|(i, _)| design[*i].clone()).collect();
    let mut per_objective = Vec::with_capacity(n_objectives);
    for j in 0..n_objectives {
        let targets: Vec<f64> = observations.iter().map(|(_, v)| v[j]).collect();
        let cfg = FitConfig {
            seed: mix_seed(seed, j as u64, observations.len() as u64),
            ..fit.clone()
        };
        let model = GpModel::fit(&inputs, &targets, &cfg)?;
        per_objective.push(model.predict_many(design)?);
    }
    Ok((0..design.len())
        .map(|i| per_objective.iter().map(|p| p[i]).collect())
        .collect())
}

pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a simple combination
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-objective (min, max) of predicted means.
pub fn mean_ranges(predictions: &[Vec<Prediction>], n_objectives: usize) -> Vec<(f64, f64)> {
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); n_objectives];
    for preds in predictions {
        for (r, p) in ranges.iter_mut().zip(preds) {
            r.0 = r.0.min(p.mean);
            r.1 = r.1.max(p.mean);
        }
    }
    ranges
}

/// A finite grid with a (possibly expensive) evaluation callback. Objectives
/// are returned in maximization convention.
pub trait GridProblem {
    /// Design vectors normalized to `[0, 1]` per dimension.
    fn design(&self) -> &[Vec<f64>];
    fn n_objectives(&self) -> usize;
    fn evaluate(&mut self, index: usize) -> Result<Vec<f64>, String>;
}

/// One line of run history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    /// Points evaluated since the previous record.
    pub sampled: Vec<usize>,
    pub pareto_optimal: usize,
    pub discarded: usize,
    pub undecided: usize,
    pub evaluations: usize,
}

/// Renders history as line-delimited JSON.
pub fn history_to_jsonl(history: &[HistoryRecord]) -> String {
    let mut out = String::new();
    for h in history {
        out.push_str(&serde_json::to_string(h).expect("history record serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    Budget,
    Exhausted,
}

/// Resumable ε-PAL run over a [`GridProblem`].
///
/// A failed evaluation leaves the engine untouched; calling [`Epal::run`]
/// again resumes where it stopped.
#[derive(Debug, Clone)]
pub struct Epal {
    config: PalConfig,
    design: Vec<Vec<f64>>,
    n_objectives: usize,
    observations: Vec<(usize, Vec<f64>)>,
    state: PalState,
    predictions: Vec<Vec<Prediction>>,
    history: Vec<HistoryRecord>,
    pending: Vec<usize>,
}

impl Epal {
    pub fn new(design: Vec<Vec<f64>>, n_objectives: usize, config: PalConfig) -> Result<Self> {
        config.validate(n_objectives)?;
        if design.is_empty() {
            return Err(Error::invalid("empty design grid"));
        }
        let n = design.len();
        Ok(Self {
            config,
            design,
            n_objectives,
            observations: Vec::new(),
            state: PalState::new(n, n_objectives),
            predictions: Vec::new(),
            history: Vec::new(),
            pending: Vec::new(),
        })
    }

    pub fn state(&self) -> &PalState {
        &self.state
    }

    pub fn history(&self) -> &[HistoryRecord] {
        &self.history
    }

    pub fn predictions(&self) -> &[Vec<Prediction>] {
        &self.predictions
    }

    pub fn observations(&self) -> &[(usize, Vec<f64>)] {
        &self.observations
    }

    pub fn evaluations(&self) -> usize {
        self.observations.len()
    }

    pub fn seed_indices(&self) -> Vec<usize> {
        maximin_indices(&self.design, self.config.initial_samples, self.config.seed)
    }

    pub fn observe(&mut self, index: usize, values: Vec<f64>) -> Result<()> {
        if index >= self.design.len() {
            return Err(Error::NotFound(format!("grid index {index}")));
        }
        if values.len() != self.n_objectives || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observation must hold one finite value per objective"));
        }
        if let Some(slot) = self.observations.iter_mut().find(|(i, _)| *i == index) {
            slot.1 = values;
        } else {
            self.observations.push((index, values));
        }
        self.state.mark_sampled(index);
        self.pending.push(index);
        Ok(())
    }

    /// Refit, update regions and reclassify; advances the iteration counter.
    pub fn refresh(&mut self) -> Result<()> {
        let predictions = fit_and_predict(
            &self.design,
            &self.observations,
            self.n_objectives,
            &self.config.fit,
            self.config.seed,
        )?;
        let t = self.state.iteration + 1;
        let beta = beta_t(t, self.design.len(), self.n_objectives, self.config.delta, self.config.beta_scale);
        let previous = (self.state.iteration > 0).then_some(self.state.regions.as_slice());
        let update = update_regions(&predictions, beta, previous);
        self.state.regions = update.regions;
        self.state.disjoint_fallbacks += update.fallbacks;
        self.state.region_updates += self.design.len() * self.n_objectives;
        self.state.objective_ranges = mean_ranges(&predictions, self.n_objectives);
        self.state.classes = classify(
            &self.state.regions,
            &self.config.epsilon,
            &self.state.objective_ranges,
            &self.state.classes,
        );
        self.state.iteration = t;
        self.predictions = predictions;
        let counts = self.state.counts();
        self.history.push(HistoryRecord {
            iteration: t,
            sampled: std::mem::take(&mut self.pending),
            pareto_optimal: counts.pareto_optimal,
            discarded: counts.discarded,
            undecided: counts.undecided,
            evaluations: self.observations.len(),
        });
        Ok(())
    }

    fn evaluate<P: GridProblem>(&mut self, problem: &mut P, index: usize) -> Result<()> {
        let values = problem
            .evaluate(index)
            .map_err(|message| Error::Evaluation { index, message })?;
        self.observe(index, values)
    }

    fn next_batch(&self) -> (Vec<usize>, Selection) {
        let means: Vec<Vec<f64>> = self
            .predictions
            .iter()
            .map(|p| p.iter().map(|q| q.mean).collect())
            .collect();
        select_batch(&self.state, &means, &self.config.epsilon, self.config.batch_size)
    }

    /// Runs until convergence, budget exhaustion or no samplable point remains.
    pub fn run<P: GridProblem>(&mut self, problem: &mut P) -> Result<StopReason> {
        if problem.design().len() != self.design.len() || problem.n_objectives() != self.n_objectives {
            return Err(Error::invalid("problem does not match the engine's grid"));
        }
        for index in self.seed_indices() {
            if !self.state.classes[index].sampled {
                self.evaluate(problem, index)?;
            }
        }
        if self.state.iteration == 0 || !self.pending.is_empty() {
            self.refresh()?;
        }
        loop {
            if self.state.counts().undecided == 0 {
                return Ok(StopReason::Converged);
            }
            let budget = self.config.max_evaluations.saturating_sub(self.evaluations());
            if budget == 0 {
                return Ok(StopReason::Budget);
            }
            let (mut batch, selection) = self.next_batch();
            if batch.is_empty() {
                return Ok(match selection {
                    Selection::Converged => StopReason::Converged,
                    _ => StopReason::Exhausted,
                });
            }
            batch.truncate(budget);
            for index in batch {
                if !self.state.classes[index].sampled {
                    self.evaluate(problem, index)?;
                }
            }
            self.refresh()?;
        }
    }
}

/// Convenience wrapper: a fresh engine run to completion.
pub fn run_epal<P: GridProblem>(problem: &mut P, config: PalConfig) -> Result<Epal> {
    let mut engine = Epal::new(problem.design().to_vec(), problem.n_objectives(), config)?;
    engine.run(problem)?;
    Ok(engine)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_width(values: &[Vec<f64>]) -> Vec<ObjectiveRegion> {
        values.iter().map(|v| ObjectiveRegion::point(v)).collect()
    }

    #[test]
    fn beta_zero_scale() {
        assert_eq!(beta_t(7, 100, 2, 0.05, 0.0), 0.0);
    }

    #[test]
    fn beta_increases_with_iteration() {
        assert!(beta_t(2, 100, 2, 0.05, 1.0 / 9.0) > beta_t(1, 100, 2, 0.05, 1.0 / 9.0));
    }

    #[test]
    fn beta_reference_value() {
        // (1/9) · 2 · ln(2 · 100 · π² / 0.3)
        let expected = 2.0 / 9.0 * (200.0 * PI * PI / 0.3f64).ln();
        let got = beta_t(1, 100, 2, 0.05, 1.0 / 9.0);
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 1.954).abs() < 1e-3);
    }

    fn pred(mean: f64, std: f64) -> Prediction {
        Prediction { mean, std }
    }

    #[test]
    fn first_update_equals_candidate() {
        let u = update_regions(&[vec![pred(1.0, 0.5)]], 4.0, None);
        assert_eq!(u.regions[0].low, vec![0.0]);
        assert_eq!(u.regions[0].high, vec![2.0]);
        assert_eq!(u.fallbacks, 0);
    }

    #[test]
    fn update_intersects_previous() {
        let prev = vec![ObjectiveRegion {
            low: vec![0.0],
            high: vec![10.0],
        }];
        let u = update_regions(&[vec![pred(7.0, 5.0)]], 1.0, Some(&prev));
        assert_eq!(u.regions[0].low, vec![2.0]);
        assert_eq!(u.regions[0].high, vec![10.0]);
    }

    #[test]
    fn disjoint_intersection_falls_back() {
        let prev = vec![ObjectiveRegion {
            low: vec![0.0],
            high: vec![1.0],
        }];
        let u = update_regions(&[vec![pred(2.5, 0.5)]], 1.0, Some(&prev));
        assert_eq!(u.regions[0].low, vec![2.0]);
        assert_eq!(u.regions[0].high, vec![3.0]);
        assert_eq!(u.fallbacks, 1);
    }

    #[test]
    fn exact_dominance_with_zero_width() {
        let values = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let out = classify(
            &zero_width(&values),
            &[0.0, 0.0],
            &[(1.0, 2.0), (1.0, 2.0)],
            &[PointStatus::default(); 2],
        );
        assert_eq!(out[0].class, Classification::Discarded);
        assert_eq!(out[1].class, Classification::ParetoOptimal);
    }

    #[test]
    fn lone_point_is_pareto_optimal() {
        let regions = vec![ObjectiveRegion {
            low: vec![-100.0, -100.0],
            high: vec![100.0, 100.0],
        }];
        let out = classify(&regions, &[0.0, 0.0], &[(0.0, 0.0); 2], &[PointStatus::default()]);
        assert_eq!(out[0].class, Classification::ParetoOptimal);
    }

    #[test]
    fn finalized_classes_are_absorbing() {
        let values = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let mut classes = vec![PointStatus::default(); 2];
        classes[0].class = Classification::ParetoOptimal;
        let out = classify(&zero_width(&values), &[0.0, 0.0], &[(1.0, 2.0); 2], &classes);
        assert_eq!(out[0].class, Classification::ParetoOptimal);
    }

    #[test]
    fn duplicates_on_the_front_are_both_kept() {
        let values = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0]];
        let out = classify(&zero_width(&values), &[0.0, 0.0], &[(0.0, 1.0); 2], &[PointStatus::default(); 3]);
        assert_eq!(out[0].class, Classification::ParetoOptimal);
        assert_eq!(out[1].class, Classification::ParetoOptimal);
        assert_eq!(out[2].class, Classification::Discarded);
        assert_eq!(pareto_front(&values), vec![0, 1]);
    }

    fn state_with_diagonals(diags: &[f64]) -> PalState {
        let mut s = PalState::new(diags.len(), 1);
        s.iteration = 1;
        s.objective_ranges = vec![(0.0, 1.0)];
        s.regions = diags
            .iter()
            .map(|d| ObjectiveRegion {
                low: vec![0.0],
                high: vec![*d],
            })
            .collect();
        s
    }

    #[test]
    fn select_converged_when_nothing_undecided() {
        let mut s = state_with_diagonals(&[1.0, 2.0]);
        s.classes[0].class = Classification::ParetoOptimal;
        s.classes[1].class = Classification::Discarded;
        assert_eq!(select_next(&s), Selection::Converged);
    }

    #[test]
    fn select_single_eligible() {
        let mut s = state_with_diagonals(&[1.0, 2.0, 3.0]);
        s.mark_sampled(0);
        s.classes[2].class = Classification::Discarded;
        assert_eq!(select_next(&s), Selection::Next(1));
    }

    #[test]
    fn select_argmax_diagonal() {
        let s = state_with_diagonals(&[3.0, 5.0, 1.0]);
        assert_eq!(select_next(&s), Selection::Next(1));
        let tie = state_with_diagonals(&[5.0, 5.0]);
        assert_eq!(select_next(&tie), Selection::Next(0));
    }

    #[test]
    fn select_exhausted_when_undecided_are_sampled() {
        let mut s = state_with_diagonals(&[1.0]);
        s.mark_sampled(0);
        assert_eq!(select_next(&s), Selection::Exhausted);
    }

    #[test]
    fn pareto_front_small_cases() {
        assert_eq!(pareto_front(&[vec![3.0, 1.0]]), vec![0]);
        assert_eq!(pareto_front(&[vec![1.0, 2.0], vec![2.0, 1.0]]), vec![0, 1]);
        assert_eq!(pareto_front(&[vec![1.0, 1.0], vec![2.0, 2.0]]), vec![1]);
    }

    #[test]
    fn batch_of_one_matches_select_next() {
        let s = state_with_diagonals(&[3.0, 5.0, 1.0]);
        let means = vec![vec![1.5], vec![2.5], vec![0.5]];
        let (batch, _) = select_batch(&s, &means, &[0.0], 1);
        assert_eq!(batch, vec![1]);
    }

    #[test]
    fn maximin_is_deterministic_and_distinct() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![(i % 10) as f64, (i / 10) as f64]).collect();
        let a = maximin_indices(&pts, 3, 11);
        assert_eq!(a, maximin_indices(&pts, 3, 11));
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn config_validation() {
        let mut c = PalConfig::default();
        assert!(c.validate(2).is_ok());
        assert!(c.validate(3).is_err());
        c.delta = 1.0;
        assert!(c.validate(2).is_err());
    }
}
