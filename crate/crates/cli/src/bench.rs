//! `epal bench`: runs the self-checking suites, writes their raw output and
//! prints one PASS/FAIL line per criterion.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;

use epal_core::bench::{self, BenchRecord};
use epal_core::suites;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    BinhKorn,
    Surrogate,
    Gp,
    Classify,
    Fls,
    Embed,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

pub struct BenchArgs {
    pub suite: Suite,
    pub seeds: u64,
    pub epsilon: f64,
    pub format: Format,
    pub out: PathBuf,
}

pub struct Verdicts {
    lines: Vec<(bool, String)>,
}

impl Verdicts {
    fn check(&mut self, ok: bool, name: &str, detail: String) {
        let line = format!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((ok, line));
    }

    pub fn all_passed(&self) -> bool {
        self.lines.iter().all(|(ok, _)| *ok)
    }
}

/// Smallest count that is at least `fraction` of `n`.
fn at_least(fraction: f64, n: u64) -> usize {
    (fraction * n as f64 - 1e-9).ceil() as usize
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_records(out: &Path, stem: &str, records: &[BenchRecord], format: Format) -> Result<PathBuf> {
    let (path, text) = match format {
        Format::Csv => (out.join(format!("{stem}.csv")), bench::records_to_csv(records)?),
        Format::Jsonl => (out.join(format!("{stem}.jsonl")), bench::records_to_jsonl(records)),
    };
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn fallback_rate(records: &[BenchRecord]) -> f64 {
    let fallbacks: usize = records.iter().map(|r| r.disjoint_fallbacks).sum();
    let updates: usize = records.iter().map(|r| r.region_updates).sum();
    if updates == 0 {
        0.0
    } else {
        fallbacks as f64 / updates as f64
    }
}

pub fn run(args: &BenchArgs) -> Result<Verdicts> {
    suites::ensure_dir(&args.out)?;
    let mut v = Verdicts { lines: Vec::new() };
    let want = |s: Suite| args.suite == s || args.suite == Suite::All;
    if want(Suite::BinhKorn) {
        binh_korn(args, &mut v)?;
    }
    if want(Suite::Gp) {
        gp(args, &mut v)?;
    }
    if want(Suite::Classify) {
        classify(args, &mut v)?;
    }
    if want(Suite::Fls) {
        fls(args, &mut v)?;
    }
    if want(Suite::Embed) {
        embed(args, &mut v)?;
    }
    if want(Suite::Surrogate) {
        surrogate(args, &mut v)?;
    }
    Ok(v)
}

fn binh_korn(args: &BenchArgs, v: &mut Verdicts) -> Result<()> {
    let mut records = Vec::new();
    for seed in 0..args.seeds {
        let (record, _) = bench::run_binh_korn(bench::binh_korn_config(seed, args.epsilon))?;
        tracing::info!(seed, evaluations = record.evaluations, "binh-korn run");
        records.push(record);
    }
    let path = write_records(&args.out, "binh_korn", &records, args.format)?;
    tracing::info!(path = %path.display(), "wrote records");

    let n = args.seeds;
    let converged = records.iter().filter(|r| r.converged && r.evaluations <= 40).count();
    let covered = records.iter().filter(|r| r.coverage).count();
    let slowest = records.iter().map(|r| r.seconds).fold(0.0, f64::max);
    let mean_evals = records.iter().map(|r| r.evaluations as f64).sum::<f64>() / n.max(1) as f64;
    v.check(
        converged >= at_least(0.9, n),
        "binh-korn convergence",
        format!(
            "{converged}/{n} converged within 40 evaluations (need {}), mean {mean_evals:.1} evaluations",
            at_least(0.9, n)
        ),
    );
    v.check(
        covered >= at_least(0.95, n),
        "binh-korn coverage",
        format!("{covered}/{n} runs cover the true front (need {})", at_least(0.95, n)),
    );
    v.check(slowest < 60.0, "binh-korn runtime", format!("slowest run {slowest:.2} s (limit 60 s)"));
    let rate = fallback_rate(&records);
    v.check(
        rate < 0.01,
        "binh-korn region fallbacks",
        format!("{:.3}% of region updates (limit 1%)", rate * 100.0),
    );
    Ok(())
}

fn gp(args: &BenchArgs, v: &mut Verdicts) -> Result<()> {
    let suite = suites::gp_suite(0)?;
    write_json(&args.out.join("gp.json"), &suite)?;
    v.check(
        suite.predictions.len() == 50 && suite.max_prediction_error <= 1e-8,
        "gp prediction oracle",
        format!(
            "{} problems, max error {:.3e} (limit 1e-8)",
            suite.predictions.len(),
            suite.max_prediction_error
        ),
    );
    v.check(
        suite.gradients.len() == 20 && suite.max_gradient_error < 1e-4,
        "gp likelihood gradient",
        format!(
            "{} problems, max relative error {:.3e} (limit 1e-4)",
            suite.gradients.len(),
            suite.max_gradient_error
        ),
    );
    Ok(())
}

fn classify(args: &BenchArgs, v: &mut Verdicts) -> Result<()> {
    let suite = suites::classify_suite(0);
    write_json(&args.out.join("classify.json"), &suite)?;
    v.check(
        suite.cases.len() == 100 && suite.failures == 0,
        "classification degeneracy",
        format!("{} instances, {} mismatches", suite.cases.len(), suite.failures),
    );
    Ok(())
}

fn report_shape_ok(markdown: &str) -> bool {
    let headings = markdown.lines().filter(|l| l.starts_with("- **") && l.ends_with(":**")).count();
    let sentences: Vec<&str> = markdown.lines().filter(|l| l.starts_with("  - ")).collect();
    headings > 0
        && !sentences.is_empty()
        && sentences.iter().all(|s| s.contains("Of the design points") && s.contains(" are "))
        && markdown.contains("some are pareto optimal points.")
}

fn fls(args: &BenchArgs, v: &mut Verdicts) -> Result<()> {
    let suite = suites::fls_suite(0)?;
    write_json(&args.out.join("fls.json"), &suite)?;
    fs::write(args.out.join("fls_report.md"), &suite.report.markdown)?;
    v.check(
        suite.max_truth_error <= 1e-12,
        "fls truth oracle",
        format!(
            "{} statements, max error {:.3e} (limit 1e-12)",
            suite.statements.len(),
            suite.max_truth_error
        ),
    );
    v.check(
        suite.max_partition_error <= 1e-9,
        "fls partition of unity",
        format!("max |sum - 1| {:.3e} (limit 1e-9)", suite.max_partition_error),
    );
    v.check(
        suite.idempotent && suite.redundant_survivors == 0,
        "fls simplification",
        format!(
            "{} survivors, idempotent {}, redundant {}",
            suite.simplified.len(),
            suite.idempotent,
            suite.redundant_survivors
        ),
    );
    v.check(
        report_shape_ok(&suite.report.markdown),
        "fls report shape",
        format!("{} reported statements", suite.report.records.len()),
    );
    Ok(())
}

fn embed(args: &BenchArgs, v: &mut Verdicts) -> Result<()> {
    let suite = suites::embed_suite(0)?;
    write_json(&args.out.join("embed.json"), &suite)?;
    v.check(
        suite.trustworthiness >= 0.9,
        "embedding trustworthiness",
        format!("{:.4} at k = 15 (need 0.90)", suite.trustworthiness),
    );
    v.check(
        suite.median_label_agreement >= 0.8,
        "embedding label agreement",
        format!("median {:.3} at k = 10 (need 0.8)", suite.median_label_agreement),
    );
    v.check(suite.repeat_identical, "embedding determinism", "repeat is bit-identical".into());
    v.check(
        suite.seconds < 120.0,
        "embedding runtime",
        format!("{:.2} s (limit 120 s)", suite.seconds),
    );
    Ok(())
}

fn surrogate(args: &BenchArgs, v: &mut Verdicts) -> Result<()> {
    let mut records = Vec::new();
    for seed in 0..args.seeds {
        let (record, _) = suites::surrogate_run(seed, args.epsilon)?;
        tracing::info!(seed, evaluations = record.evaluations, "surrogate run");
        records.push(record);
    }
    write_records(&args.out, "surrogate", &records, args.format)?;
    let resume = suites::resume_check(0, 5, &args.out)?;
    write_json(&args.out.join("resume.json"), &resume)?;

    let n = args.seeds;
    let converged = records.iter().filter(|r| r.converged && r.evaluations <= 120).count();
    let covered = records.iter().filter(|r| r.coverage).count();
    let most = records.iter().map(|r| r.evaluations).max().unwrap_or(0);
    v.check(
        converged as u64 == n,
        "surrogate convergence",
        format!("{converged}/{n} converged within 120 evaluations, most used {most}"),
    );
    v.check(
        covered >= at_least(0.9, n),
        "surrogate coverage",
        format!("{covered}/{n} runs cover the noise-free front (need {})", at_least(0.9, n)),
    );
    v.check(
        resume.save_load_equal && resume.resumed_identical,
        "campaign save and resume",
        format!(
            "saved after {} steps: round trip equal {}, resumed identical {}",
            resume.saved_after_steps, resume.save_load_equal, resume.resumed_identical
        ),
    );
    let rate = fallback_rate(&records);
    v.check(
        rate < 0.01,
        "surrogate region fallbacks",
        format!("{:.3}% of region updates (limit 1%)", rate * 100.0),
    );
    Ok(())
}
