//! Self-checking benchmark suites behind `epal bench`.
//!
//! Each suite returns its raw material (problems, outputs) alongside the
//! summary numbers, so an external checker can recompute every verdict.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{self, BenchRecord, SimulationOptions, SpinCoatSurrogate};
use crate::campaign::{Campaign, CampaignConfig};
use crate::embed;
use crate::error::{Error, Result};
use crate::fls::{self, LinguisticStatement, LinguisticVariable, Qualifier, Quantifier, Record, Support};
use crate::gp::{self, GpModel, KernelParams, Standardization};
use crate::pal::{self, Classification, ObjectiveRegion, PointStatus};

// ---------------------------------------------------------------- gp

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpPredictionCase {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub params: KernelParams,
    pub queries: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpGradientCase {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub params: KernelParams,
    /// With respect to `[ln σf², ln ℓ.., ln σn²]`.
    pub analytic: Vec<f64>,
    pub finite_difference: Vec<f64>,
    /// `max |analytic − fd| / max(max |fd|, 1e-12)`.
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSuite {
    pub predictions: Vec<GpPredictionCase>,
    pub gradients: Vec<GpGradientCase>,
    pub max_prediction_error: f64,
    pub max_gradient_error: f64,
}

fn random_params(rng: &mut ChaCha8Rng, dim: usize) -> KernelParams {
    let lengthscales = (0..dim).map(|_| rng.random_range(0.2..1.5)).collect();
    KernelParams::new(rng.random_range(0.5..2.0), lengthscales, rng.random_range(1e-3..1e-1))
        .expect("sampled parameters are valid")
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Posterior mean and variance from an explicit linear solve (Gaussian
/// elimination with partial pivoting), no factorization reuse.
pub fn dense_posterior(inputs: &[Vec<f64>], targets: &[f64], params: &KernelParams, query: &[f64]) -> (f64, f64) {
    let k = |a: &[f64], b: &[f64]| {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&params.lengthscales)
            .map(|((x, y), l)| ((x - y) / l).powi(2))
            .sum();
        params.signal_variance * (-0.5 * r2).exp()
    };
    let n = inputs.len();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| k(&inputs[i], &inputs[j]) + if i == j { params.noise_variance } else { 0.0 })
                .collect()
        })
        .collect();
    let kq: Vec<f64> = inputs.iter().map(|x| k(x, query)).collect();
    // Solve A [w | v] = [y | kq] together.
    let mut rhs: Vec<[f64; 2]> = (0..n).map(|i| [targets[i], kq[i]]).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            rhs[row][0] -= f * rhs[col][0];
            rhs[row][1] -= f * rhs[col][1];
        }
    }
    let mut sol = vec![[0.0; 2]; n];
    for row in (0..n).rev() {
        for t in 0..2 {
            let s: f64 = (row + 1..n).map(|c| a[row][c] * sol[c][t]).sum();
            sol[row][t] = (rhs[row][t] - s) / a[row][row];
        }
    }
    let mean = kq.iter().zip(&sol).map(|(kv, s)| kv * s[0]).sum();
    let var = params.signal_variance - kq.iter().zip(&sol).map(|(kv, s)| kv * s[1]).sum::<f64>();
    (mean, var.max(0.0))
}

/// 50 random 10-point prediction problems in 3-D and 20 random 5-point
/// gradient problems in 2-D.
pub fn gp_suite(seed: u64) -> Result<GpSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut predictions = Vec::new();
    let mut max_prediction_error: f64 = 0.0;
    for _ in 0..50 {
        let inputs = random_points(&mut rng, 10, 3);
        let targets: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
        let params = random_params(&mut rng, 3);
        let queries = random_points(&mut rng, 5, 3);
        let model = GpModel::with_standardization(&inputs, &targets, params.clone(), Standardization::identity())?;
        let mut mean = Vec::new();
        let mut std = Vec::new();
        for q in &queries {
            let p = model.predict(q)?;
            let (m, v) = dense_posterior(&inputs, &targets, &params, q);
            max_prediction_error = max_prediction_error.max((p.mean - m).abs()).max((p.std - v.sqrt()).abs());
            mean.push(p.mean);
            std.push(p.std);
        }
        predictions.push(GpPredictionCase {
            inputs,
            targets,
            params,
            queries,
            mean,
            std,
        });
    }

    let mut gradients = Vec::new();
    let mut max_gradient_error: f64 = 0.0;
    let h = 1e-5;
    for _ in 0..20 {
        let inputs = random_points(&mut rng, 5, 2);
        let targets: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let params = random_params(&mut rng, 2);
        let (_, analytic) = gp::log_marginal_likelihood(&inputs, &targets, &params)?;
        let theta = params.to_log();
        let at = |t: &[f64]| -> Result<f64> {
            let d = t.len() - 2;
            let p = KernelParams::new(t[0].exp(), t[1..=d].iter().map(|x| x.exp()).collect(), t[d + 1].exp())?;
            Ok(gp::log_marginal_likelihood(&inputs, &targets, &p)?.0)
        };
        let mut finite_difference = Vec::with_capacity(theta.len());
        for i in 0..theta.len() {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[i] += h;
            down[i] -= h;
            finite_difference.push((at(&up)? - at(&down)?) / (2.0 * h));
        }
        let scale = finite_difference.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(1e-12);
        let relative_error = analytic
            .iter()
            .zip(&finite_difference)
            .fold(0.0f64, |m, (a, f)| m.max((a - f).abs()))
            / scale;
        max_gradient_error = max_gradient_error.max(relative_error);
        gradients.push(GpGradientCase {
            inputs,
            targets,
            params,
            analytic,
            finite_difference,
            relative_error,
        });
    }
    Ok(GpSuite {
        predictions,
        gradients,
        max_prediction_error,
        max_gradient_error,
    })
}

// ---------------------------------------------------------------- classify

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyCase {
    pub values: Vec<Vec<f64>>,
    /// Points classified Pareto-optimal from zero-width regions, ε = 0.
    pub pareto_optimal: Vec<usize>,
    /// [`pal::pareto_front`] of the same values.
    pub front: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifySuite {
    pub cases: Vec<ClassifyCase>,
    pub failures: usize,
}

/// 100 random 20-point instances in 2-D.
pub fn classify_suite(seed: u64) -> ClassifySuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    let mut failures = 0;
    for _ in 0..100 {
        let values = random_points(&mut rng, 20, 2);
        let regions: Vec<ObjectiveRegion> = values.iter().map(|v| ObjectiveRegion::point(v)).collect();
        let classes = pal::classify(&regions, &[0.0, 0.0], &[(0.0, 1.0), (0.0, 1.0)], &vec![PointStatus::default(); 20]);
        let pareto_optimal: Vec<usize> = (0..20)
            .filter(|&i| classes[i].class == Classification::ParetoOptimal)
            .collect();
        let front = pal::pareto_front(&values);
        let undecided = classes.iter().any(|c| c.class == Classification::Undecided);
        if pareto_optimal != front || undecided {
            failures += 1;
        }
        cases.push(ClassifyCase {
            values,
            pareto_optimal,
            front,
        });
    }
    ClassifySuite { cases, failures }
}

// ---------------------------------------------------------------- fls

pub const FLS_RECORDS: usize = 200;
pub const FLS_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlsSuite {
    pub variables: Vec<LinguisticVariable>,
    pub quantifiers: Vec<Quantifier>,
    pub qualifiers: Vec<Qualifier>,
    pub support: Support,
    pub dataset: Vec<Record>,
    /// Every enumerated statement with its truth.
    pub statements: Vec<LinguisticStatement>,
    pub simplified: Vec<LinguisticStatement>,
    pub report: fls::Report,
    /// Against a direct per-statement evaluation.
    pub max_truth_error: f64,
    /// Largest `|Σ μ − 1|` over 10,000 random points per variable.
    pub max_partition_error: f64,
    pub idempotent: bool,
    /// Survivors that specialize another survivor with equal (Q, R).
    pub redundant_survivors: usize,
}

/// Fixed synthetic dataset: five attributes on `[0, 1]`, an uncertainty
/// attribute and a class label (80 Pareto-optimal, 60 discarded, 60 undecided).
pub fn fls_dataset(seed: u64) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<Classification> = std::iter::repeat_n(Classification::ParetoOptimal, 80)
        .chain(std::iter::repeat_n(Classification::Discarded, 60))
        .chain(std::iter::repeat_n(Classification::Undecided, 60))
        .collect();
    for i in (1..labels.len()).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    labels
        .into_iter()
        .map(|class| {
            let mut values = std::collections::BTreeMap::new();
            for v in 0..5 {
                values.insert(format!("x{v}"), rng.random::<f64>());
            }
            values.insert("uncertainty".to_string(), rng.random::<f64>());
            Record {
                values,
                category: Some(class),
            }
        })
        .collect()
}

fn is_strict_subset(a: &[fls::SummarizerTerm], b: &[fls::SummarizerTerm]) -> bool {
    a.len() < b.len() && a.iter().all(|t| b.contains(t))
}

fn same_group(a: &LinguisticStatement, b: &LinguisticStatement) -> bool {
    a.quantifier == b.quantifier && a.qualifier == b.qualifier
}

pub fn fls_suite(seed: u64) -> Result<FlsSuite> {
    let variables: Vec<LinguisticVariable> = (0..5)
        .map(|v| LinguisticVariable::five_terms(format!("x{v}"), format!("x{v}"), (0.0, 1.0)))
        .collect::<Result<_>>()?;
    let unc = LinguisticVariable::new("uncertainty", "uncertainty", (0.0, 1.0), &["low", "high"])?;
    let qualifiers = vec![
        Qualifier::category(Classification::ParetoOptimal),
        Qualifier::category(Classification::Discarded),
        Qualifier::category(Classification::Undecided),
        Qualifier::fuzzy(unc, "high")?,
    ];
    let quantifiers = Quantifier::defaults();
    let dataset = fls_dataset(seed);
    let support = Support::Summarizer;

    let mut statements = fls::enumerate_statements(&variables, &quantifiers, &qualifiers, 3)?;
    fls::evaluate_all(&mut statements, &variables, &dataset, support)?;
    let mut max_truth_error: f64 = 0.0;
    for s in &statements {
        let direct = fls::truth(s, &variables, &dataset, support)?;
        max_truth_error = max_truth_error.max((direct - s.truth.unwrap_or(f64::NAN)).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut max_partition_error: f64 = 0.0;
    for v in &variables {
        for _ in 0..10_000 {
            let x = rng.random_range(v.domain.0..=v.domain.1);
            let total: f64 = v.memberships(x).iter().sum();
            max_partition_error = max_partition_error.max((total - 1.0).abs());
        }
    }

    let simplified = fls::simplify(&statements, FLS_THRESHOLD);
    let again = fls::simplify(&simplified, FLS_THRESHOLD);
    let idempotent = again == simplified;
    let redundant_survivors = simplified
        .iter()
        .filter(|s| {
            simplified
                .iter()
                .any(|a| same_group(a, s) && is_strict_subset(&a.summarizer, &s.summarizer))
        })
        .count();
    let report = fls::render_report(
        &simplified,
        &fls::ReportLabels {
            title: "Synthetic summary".into(),
            subject: "design points".into(),
            variables: variables.clone(),
        },
    );
    Ok(FlsSuite {
        variables,
        quantifiers,
        qualifiers,
        support,
        dataset,
        statements,
        simplified,
        report,
        max_truth_error,
        max_partition_error,
        idempotent,
        redundant_survivors,
    })
}

// ---------------------------------------------------------------- embed

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedSuite {
    pub seed: u64,
    pub coords: Vec<[f64; 2]>,
    pub trustworthiness: f64,
    pub median_label_agreement: f64,
    pub repeat_identical: bool,
    pub seconds: f64,
}

/// (spin speed, dilution) label of every default grid point.
pub fn process_labels(campaign: &Campaign) -> Vec<(u64, u64)> {
    campaign
        .points
        .iter()
        .map(|p| (p.spin_speed.round() as u64, (p.dilution * 1000.0).round() as u64))
        .collect()
}

/// Embeds the default 1375-point grid twice with the same seed.
pub fn embed_suite(seed: u64) -> Result<EmbedSuite> {
    let campaign = Campaign::new(CampaignConfig::default(), seed)?;
    let start = Instant::now();
    let first = campaign.compute_embedding()?;
    let seconds = start.elapsed().as_secs_f64();
    let second = campaign.compute_embedding()?;
    let repeat_identical = first
        .coords
        .iter()
        .zip(&second.coords)
        .all(|(a, b)| a[0].to_bits() == b[0].to_bits() && a[1].to_bits() == b[1].to_bits());
    let trustworthiness = embed::trustworthiness(&campaign.design(), &first, 15)?;
    let mut agreement = embed::neighbor_label_agreement(&first, &process_labels(&campaign), 10)?;
    agreement.sort_by(f64::total_cmp);
    let median_label_agreement = agreement[agreement.len() / 2];
    Ok(EmbedSuite {
        seed,
        coords: first.coords,
        trustworthiness,
        median_label_agreement,
        repeat_identical,
        seconds,
    })
}

// ---------------------------------------------------------------- campaigns

/// Default campaign settings used by the surrogate suite.
pub fn surrogate_options(seed: u64) -> SimulationOptions {
    SimulationOptions {
        seed,
        surrogate: SpinCoatSurrogate::default(),
        max_steps: None,
    }
}

pub fn surrogate_run(seed: u64, epsilon: f64) -> Result<(BenchRecord, Campaign)> {
    let mut config = CampaignConfig::default();
    config.pal.epsilon = vec![epsilon; 2];
    bench::simulate_campaign(config, &surrogate_options(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResumeCheck {
    pub seed: u64,
    pub saved_after_steps: usize,
    pub save_load_equal: bool,
    pub resumed_identical: bool,
}

/// Runs a campaign to `steps`, round-trips it through a file in `dir`,
/// finishes it and compares with an uninterrupted run.
pub fn resume_check(seed: u64, steps: usize, dir: &Path) -> Result<ResumeCheck> {
    let (_, full) = surrogate_run(seed, 0.01)?;
    let mut partial = Campaign::new(CampaignConfig::default(), seed)?;
    let mut options = surrogate_options(seed);
    options.max_steps = Some(steps);
    bench::drive_campaign(&mut partial, &options)?;
    let path = dir.join(format!("resume-{seed}.json"));
    partial.save(&path)?;
    let mut loaded = Campaign::load(&path)?;
    let save_load_equal = loaded == partial;
    options.max_steps = None;
    bench::drive_campaign(&mut loaded, &options)?;
    Ok(ResumeCheck {
        seed,
        saved_after_steps: steps,
        save_load_equal,
        resumed_identical: loaded == full,
    })
}

/// Errors when `dir` cannot hold scratch files.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::from)
}
