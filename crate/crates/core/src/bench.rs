//! Benchmark problems and brute-force oracles: the Binh-Korn problem on a
//! feasible grid, a synthetic spin-coating surrogate that stands in for the
//! nanoindenter, ε-coverage checking and a 2-D hypervolume.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::campaign::{Campaign, CampaignConfig, DesignPoint, GridConfig, Measurement};
use crate::error::{Error, Result};
use crate::pal::{self, Classification, Epal, GridProblem, PalConfig, StopReason};

pub const BK_X_MAX: f64 = 5.0;
pub const BK_Y_MAX: f64 = 3.0;
pub const BK_STEP: f64 = 0.25;

pub fn binh_korn_feasible(x: f64, y: f64) -> bool {
    (0.0..=BK_X_MAX).contains(&x)
        && (0.0..=BK_Y_MAX).contains(&y)
        && (x - 5.0).powi(2) + y * y <= 25.0
        && (x - 8.0).powi(2) + (y + 3.0).powi(2) >= 7.7
}

/// `(4x² + 4y², (x-5)² + (y-5)²)`, both to be minimized.
pub fn binh_korn(x: f64, y: f64) -> Result<(f64, f64)> {
    if !binh_korn_feasible(x, y) {
        return Err(Error::Domain(format!("({x}, {y}) is outside the feasible Binh-Korn region")));
    }
    Ok((4.0 * x * x + 4.0 * y * y, (x - 5.0).powi(2) + (y - 5.0).powi(2)))
}

/// Feasible points of the 21 × 13 grid at step 0.25, x outer.
pub fn binh_korn_grid() -> Vec<(f64, f64)> {
    let nx = (BK_X_MAX / BK_STEP).round() as usize;
    let ny = (BK_Y_MAX / BK_STEP).round() as usize;
    (0..=nx)
        .flat_map(|i| (0..=ny).map(move |j| (i as f64 * BK_STEP, j as f64 * BK_STEP)))
        .filter(|&(x, y)| binh_korn_feasible(x, y))
        .collect()
}

/// The Binh-Korn grid as a maximization problem (both objectives negated).
#[derive(Debug, Clone)]
pub struct BinhKornProblem {
    pub points: Vec<(f64, f64)>,
    design: Vec<Vec<f64>>,
    pub evaluations: usize,
}

impl BinhKornProblem {
    pub fn new() -> Self {
        let points = binh_korn_grid();
        let design = points.iter().map(|&(x, y)| vec![x / BK_X_MAX, y / BK_Y_MAX]).collect();
        Self {
            points,
            design,
            evaluations: 0,
        }
    }

    /// Negated objective values for every grid point.
    pub fn values(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .map(|&(x, y)| {
                let (f1, f2) = binh_korn(x, y).expect("grid points are feasible");
                vec![-f1, -f2]
            })
            .collect()
    }
}

impl Default for BinhKornProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl GridProblem for BinhKornProblem {
    fn design(&self) -> &[Vec<f64>] {
        &self.design
    }

    fn n_objectives(&self) -> usize {
        2
    }

    fn evaluate(&mut self, index: usize) -> std::result::Result<Vec<f64>, String> {
        let &(x, y) = self.points.get(index).ok_or_else(|| format!("no grid point {index}"))?;
        self.evaluations += 1;
        let (f1, f2) = binh_korn(x, y).map_err(|e| e.to_string())?;
        Ok(vec![-f1, -f2])
    }
}

// Surrogate output bounds; all outputs are clamped into these.
pub const HARDNESS_BOUNDS: (f64, f64) = (0.001, 1.5);
pub const INVERSE_ELASTICITY_BOUNDS: (f64, f64) = (0.001, 0.4);
/// Nominal ranges that scale the measurement noise.
pub const HARDNESS_RANGE: f64 = 1.2;
pub const INVERSE_ELASTICITY_RANGE: f64 = 0.3;
pub const THIN_FILM_NOISE_FACTOR: f64 = 3.0;

/// Synthetic spin-coating response.
///
/// With normalized speed `s` and dilution `d`:
///
/// ```text
/// q  = 0.6·(s − 0.43)² + 0.8·(d − 0.25)² + 0.3·c40
/// H  = 0.1  + 0.8 · (1 − q + 0.5·c360)
/// IE = 0.03 + 0.2 · (1 − q + 0.5·c10)
/// ```
///
/// The noise-free front is the `c40 = 0` edge at 4000 rpm and dilution
/// 0.25. Noise is Gaussian with σ = `noise_fraction` times the nominal
/// range, tripled in the thin-film region (`s > 0.8` and `d < 0.2`); the
/// result is clamped to the output bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinCoatSurrogate {
    pub grid: GridConfig,
    pub noise_fraction: f64,
}

impl Default for SpinCoatSurrogate {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            noise_fraction: 0.002,
        }
    }
}

impl SpinCoatSurrogate {
    pub fn noise_free(grid: GridConfig) -> Self {
        Self {
            grid,
            noise_fraction: 0.0,
        }
    }

    fn normalized(&self, point: &DesignPoint) -> (f64, f64) {
        let (lo, hi) = self
            .grid
            .spin_speeds
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let s = if hi > lo { (point.spin_speed - lo) / (hi - lo) } else { 0.0 };
        (s, point.dilution)
    }

    pub fn in_thin_film_region(&self, point: &DesignPoint) -> bool {
        let (s, d) = self.normalized(point);
        s > 0.8 && d < 0.2
    }

    /// Noise-free response `(hardness, inverse_elasticity)`.
    pub fn mean(&self, point: &DesignPoint) -> (f64, f64) {
        let (s, d) = self.normalized(point);
        let q = 0.6 * (s - 0.43).powi(2) + 0.8 * (d - 0.25).powi(2) + 0.3 * point.c_pvp40;
        let h = 0.1 + 0.8 * (1.0 - q + 0.5 * point.c_pvp360);
        let ie = 0.03 + 0.2 * (1.0 - q + 0.5 * point.c_pvp10);
        (h, ie)
    }

    /// A noisy measurement, deterministic in `(point.id, seed)`.
    pub fn measure(&self, point: &DesignPoint, seed: u64) -> (f64, f64) {
        let (mut h, mut ie) = self.mean(point);
        if self.noise_fraction > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(pal::mix_seed(seed, point.id as u64, 0x5eed));
            let factor = if self.in_thin_film_region(point) { THIN_FILM_NOISE_FACTOR } else { 1.0 };
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            h += z1 * self.noise_fraction * factor * HARDNESS_RANGE;
            ie += z2 * self.noise_fraction * factor * INVERSE_ELASTICITY_RANGE;
        }
        (
            h.clamp(HARDNESS_BOUNDS.0, HARDNESS_BOUNDS.1),
            ie.clamp(INVERSE_ELASTICITY_BOUNDS.0, INVERSE_ELASTICITY_BOUNDS.1),
        )
    }
}

/// Exact Pareto front plus the data needed to judge ε-coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct EParetoOracle {
    pub front: Vec<usize>,
    values: Vec<Vec<f64>>,
    slack: Vec<f64>,
}

impl EParetoOracle {
    /// True iff every front point `y*` has a candidate `ŷ` with
    /// `ŷ + ε·range ⪰ y*` componentwise.
    pub fn covers(&self, candidates: &[usize]) -> bool {
        self.uncovered(candidates).is_empty()
    }

    /// Front points that no candidate covers.
    pub fn uncovered(&self, candidates: &[usize]) -> Vec<usize> {
        self.front
            .iter()
            .copied()
            .filter(|&f| {
                !candidates.iter().any(|&c| {
                    self.values[c]
                        .iter()
                        .zip(&self.values[f])
                        .zip(&self.slack)
                        .all(|((y, star), e)| y + e >= *star)
                })
            })
            .collect()
    }
}

/// Brute-force oracle over `values` (maximization). `ranges` default to the
/// per-objective spread of `values` when absent.
pub fn brute_force_epareto(values: &[Vec<f64>], epsilon: &[f64], ranges: Option<&[f64]>) -> EParetoOracle {
    let m = values.first().map_or(0, Vec::len);
    let spread: Vec<f64> = match ranges {
        Some(r) => r.to_vec(),
        None => (0..m)
            .map(|j| {
                let (lo, hi) = values
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v[j]), b.max(v[j])));
                hi - lo
            })
            .collect(),
    };
    let mut front = Vec::new();
    'outer: for (i, vi) in values.iter().enumerate() {
        for (j, vj) in values.iter().enumerate() {
            if i == j {
                continue;
            }
            let ge = vj.iter().zip(vi).all(|(a, b)| a >= b);
            let gt = vj.iter().zip(vi).any(|(a, b)| a > b);
            if ge && gt {
                continue 'outer;
            }
        }
        front.push(i);
    }
    EParetoOracle {
        front,
        values: values.to_vec(),
        slack: epsilon.iter().zip(&spread).map(|(e, r)| e * r).collect(),
    }
}

/// Area dominated by `points` and bounded below by `reference` (maximization).
pub fn hypervolume_2d(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| p[0] > reference[0] && p[1] > reference[1])
        .collect();
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
    let mut area = 0.0;
    let mut best_y = reference[1];
    for p in pts {
        if p[1] > best_y {
            area += (p[0] - reference[0]) * (p[1] - best_y);
            best_y = p[1];
        }
    }
    area
}

/// One benchmark run, emitted as a CSV row or JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub problem: String,
    pub seed: u64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    pub coverage: bool,
    pub pareto_count: usize,
    pub front_size: usize,
    pub hypervolume: f64,
    pub disjoint_fallbacks: usize,
    pub region_updates: usize,
    pub seconds: f64,
    /// Grid indices classified Pareto-optimal.
    pub pareto_ids: Vec<usize>,
}

/// CSV with one row per record; `pareto_ids` is `;`-separated.
pub fn records_to_csv(records: &[BenchRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "problem",
        "seed",
        "evaluations",
        "iterations",
        "converged",
        "coverage",
        "pareto_count",
        "front_size",
        "hypervolume",
        "disjoint_fallbacks",
        "region_updates",
        "seconds",
        "pareto_ids",
    ])
    .map_err(|e| Error::State(e.to_string()))?;
    for r in records {
        let ids: Vec<String> = r.pareto_ids.iter().map(|i| i.to_string()).collect();
        w.write_record([
            r.problem.clone(),
            r.seed.to_string(),
            r.evaluations.to_string(),
            r.iterations.to_string(),
            r.converged.to_string(),
            r.coverage.to_string(),
            r.pareto_count.to_string(),
            r.front_size.to_string(),
            r.hypervolume.to_string(),
            r.disjoint_fallbacks.to_string(),
            r.region_updates.to_string(),
            r.seconds.to_string(),
            ids.join(";"),
        ])
        .map_err(|e| Error::State(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::State(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn records_to_jsonl(records: &[BenchRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

/// Default ε-PAL settings for the Binh-Korn benchmark.
pub fn binh_korn_config(seed: u64, epsilon: f64) -> PalConfig {
    PalConfig {
        seed,
        max_evaluations: 40,
        ..PalConfig::default().with_epsilon(epsilon, 2)
    }
}

/// Full Binh-Korn run; coverage is judged on the exact objective values of
/// the points classified Pareto-optimal.
pub fn run_binh_korn(config: PalConfig) -> Result<(BenchRecord, Epal)> {
    let start = Instant::now();
    let mut problem = BinhKornProblem::new();
    let mut engine = Epal::new(problem.design().to_vec(), 2, config.clone())?;
    let stop = engine.run(&mut problem)?;
    let values = problem.values();
    let state = engine.state();
    let returned = indices_of(state.classes.iter().map(|c| c.class), Classification::ParetoOptimal);
    let oracle = brute_force_epareto(&values, &config.epsilon, None);
    let reference = [
        values.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min),
        values.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min),
    ];
    let record = BenchRecord {
        problem: "binh_korn".into(),
        seed: config.seed,
        evaluations: engine.evaluations(),
        iterations: state.iteration,
        converged: stop == StopReason::Converged,
        coverage: oracle.covers(&returned),
        pareto_count: returned.len(),
        front_size: oracle.front.len(),
        hypervolume: hypervolume_2d(&pairs(&values, &returned), reference),
        disjoint_fallbacks: state.disjoint_fallbacks,
        region_updates: state.region_updates,
        seconds: start.elapsed().as_secs_f64(),
        pareto_ids: returned,
    };
    Ok((record, engine))
}

fn indices_of(classes: impl Iterator<Item = Classification>, wanted: Classification) -> Vec<usize> {
    classes
        .enumerate()
        .filter(|(_, c)| *c == wanted)
        .map(|(i, _)| i)
        .collect()
}

fn pairs(values: &[Vec<f64>], ids: &[usize]) -> Vec<[f64; 2]> {
    ids.iter().map(|&i| [values[i][0], values[i][1]]).collect()
}

/// Options for [`simulate_campaign`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    pub seed: u64,
    pub surrogate: SpinCoatSurrogate,
    /// Stop after this many steps (for save/resume checks).
    pub max_steps: Option<usize>,
}

/// Drives a campaign with surrogate measurements: measure the suggested
/// batch, step, repeat until converged, out of budget or out of candidates.
pub fn drive_campaign(campaign: &mut Campaign, options: &SimulationOptions) -> Result<()> {
    let mut steps = 0;
    loop {
        if options.max_steps.is_some_and(|m| steps >= m) {
            return Ok(());
        }
        let suggestion = campaign.suggest_batch(campaign.config.pal.batch_size)?;
        if suggestion.points.is_empty() {
            return Ok(());
        }
        for p in &suggestion.points {
            let (h, ie) = options.surrogate.measure(p, options.seed);
            campaign.ingest(Measurement::new(p.id, h, ie))?;
        }
        campaign.step()?;
        steps += 1;
    }
}

/// A fresh campaign run end to end against the surrogate.
pub fn simulate_campaign(config: CampaignConfig, options: &SimulationOptions) -> Result<(BenchRecord, Campaign)> {
    let start = Instant::now();
    let mut campaign = Campaign::new(config, options.seed)?;
    drive_campaign(&mut campaign, options)?;
    let record = campaign_record(&campaign, &options.surrogate, start.elapsed().as_secs_f64());
    Ok((record, campaign))
}

/// Scores a campaign against the noise-free surrogate front.
pub fn campaign_record(campaign: &Campaign, surrogate: &SpinCoatSurrogate, seconds: f64) -> BenchRecord {
    let clean = SpinCoatSurrogate::noise_free(surrogate.grid.clone());
    let values: Vec<Vec<f64>> = campaign
        .points
        .iter()
        .map(|p| {
            let (h, ie) = clean.mean(p);
            vec![h, ie]
        })
        .collect();
    let returned = indices_of(campaign.pal.classes.iter().map(|c| c.class), Classification::ParetoOptimal);
    let oracle = brute_force_epareto(&values, &campaign.config.pal.epsilon, None);
    BenchRecord {
        problem: "spin_coat_surrogate".into(),
        seed: campaign.seed,
        evaluations: campaign.measurements.len(),
        iterations: campaign.pal.iteration,
        converged: campaign.is_converged(),
        coverage: oracle.covers(&returned),
        pareto_count: returned.len(),
        front_size: oracle.front.len(),
        hypervolume: hypervolume_2d(&pairs(&values, &returned), [0.0, 0.0]),
        disjoint_fallbacks: campaign.pal.disjoint_fallbacks,
        region_updates: campaign.pal.region_updates,
        seconds,
        pareto_ids: returned,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::build_grid;

    #[test]
    fn binh_korn_examples() {
        assert_eq!(binh_korn(0.0, 0.0).unwrap(), (0.0, 50.0));
        assert_eq!(binh_korn(5.0, 3.0).unwrap(), (136.0, 4.0));
        assert!(matches!(binh_korn(6.0, 0.0), Err(Error::Domain(_))));
        assert!(binh_korn(1.0, -0.5).is_err());
    }

    #[test]
    fn grid_is_feasible_subset() {
        let grid = binh_korn_grid();
        assert!(grid.len() > 200 && grid.len() <= 21 * 13);
        assert!(grid.iter().all(|&(x, y)| binh_korn_feasible(x, y)));
    }

    #[test]
    fn objectives_conflict() {
        let p = BinhKornProblem::new();
        let v = p.values();
        let best0 = v.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max);
        let best1 = v.iter().map(|x| x[1]).fold(f64::NEG_INFINITY, f64::max);
        assert!(!v.iter().any(|x| x[0] == best0 && x[1] == best1));
    }

    #[test]
    fn surrogate_is_deterministic_and_bounded() {
        let s = SpinCoatSurrogate::default();
        let grid = build_grid(&s.grid).unwrap();
        for p in &grid {
            let a = s.measure(p, 9);
            assert_eq!(a, s.measure(p, 9));
            assert!((HARDNESS_BOUNDS.0..=HARDNESS_BOUNDS.1).contains(&a.0));
            assert!((INVERSE_ELASTICITY_BOUNDS.0..=INVERSE_ELASTICITY_BOUNDS.1).contains(&a.1));
        }
    }

    #[test]
    fn coverage_edges() {
        let values = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![0.5, 0.5]];
        let o = brute_force_epareto(&values, &[0.0, 0.0], None);
        assert_eq!(o.front, vec![0, 1]);
        assert!(o.covers(&o.front.clone()));
        assert!(!o.covers(&[]));
        assert!(!o.covers(&[0]));
        let loose = brute_force_epareto(&values, &[1.0, 1.0], None);
        assert!(loose.covers(&[2]));
    }

    #[test]
    fn hypervolume_staircase() {
        let hv = hypervolume_2d(&[[1.0, 2.0], [2.0, 1.0], [0.5, 0.5]], [0.0, 0.0]);
        assert!((hv - 3.0).abs() < 1e-12);
        assert_eq!(hypervolume_2d(&[], [0.0, 0.0]), 0.0);
    }

    #[test]
    fn bench_records_export() {
        let r = BenchRecord {
            problem: "binh_korn".into(),
            seed: 1,
            evaluations: 20,
            iterations: 18,
            converged: true,
            coverage: true,
            pareto_count: 12,
            front_size: 30,
            hypervolume: 1.5,
            disjoint_fallbacks: 0,
            region_updates: 100,
            seconds: 0.25,
            pareto_ids: vec![3, 7],
        };
        let csv = records_to_csv(std::slice::from_ref(&r)).unwrap();
        assert!(csv.starts_with("problem,seed,evaluations"));
        assert!(csv.lines().nth(1).unwrap().ends_with(",3;7"));
        let line = records_to_jsonl(&[r.clone()]);
        let back: BenchRecord = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(back, r);
    }
}
