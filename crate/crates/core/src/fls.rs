//! Fuzzy linguistic summaries of the form "Of the Ys that are P, Q are R".
//!
//! A statement combines a summarizer `P` (a conjunction of attribute/term
//! pairs, min t-norm), a qualifier `R` (a crisp class or a fuzzy predicate)
//! and a quantifier `Q` evaluated on the membership-weighted proportion
//! `Σ (μR ∧ μP) / D`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pal::Classification;

/// Term names of the default five-term partition.
pub const FIVE_TERMS: [&str; 5] = ["very small", "small", "medium", "large", "very large"];

/// A variable whose terms are evenly spaced triangular memberships forming a
/// Ruspini partition of `domain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticVariable {
    /// Attribute key used to look values up in a [`Record`].
    pub name: String,
    /// Human-readable phrase, e.g. "pvp360 concentration".
    pub label: String,
    pub domain: (f64, f64),
    pub terms: Vec<String>,
}

impl LinguisticVariable {
    pub fn new(name: impl Into<String>, label: impl Into<String>, domain: (f64, f64), terms: &[&str]) -> Result<Self> {
        if !(domain.0 < domain.1) || !domain.0.is_finite() || !domain.1.is_finite() {
            return Err(Error::invalid("variable domain must be a finite interval with min < max"));
        }
        if terms.len() < 2 {
            return Err(Error::invalid("a partition needs at least two terms"));
        }
        Ok(Self {
            name: name.into(),
            label: label.into(),
            domain,
            terms: terms.iter().map(|t| t.to_string()).collect(),
        })
    }

    /// Five evenly spaced terms from "very small" to "very large".
    pub fn five_terms(name: impl Into<String>, label: impl Into<String>, domain: (f64, f64)) -> Result<Self> {
        Self::new(name, label, domain, &FIVE_TERMS)
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    /// Membership of every term at `x` (clamped to the domain).
    pub fn memberships(&self, x: f64) -> Vec<f64> {
        (0..self.terms.len()).map(|k| self.membership_at(k, x)).collect()
    }

    fn membership_at(&self, k: usize, x: f64) -> f64 {
        let (lo, hi) = self.domain;
        let x = if x.is_nan() { lo } else { x.clamp(lo, hi) };
        let pos = (x - lo) / (hi - lo) * (self.terms.len() - 1) as f64;
        (1.0 - (pos - k as f64).abs()).max(0.0)
    }
}

pub fn term_membership(variable: &LinguisticVariable, term: &str, x: f64) -> Result<f64> {
    let k = variable
        .term_index(term)
        .ok_or_else(|| Error::invalid(format!("unknown term '{term}' for {}", variable.name)))?;
    Ok(variable.membership_at(k, x))
}

/// Trapezoidal quantifier over proportions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantifier {
    pub name: String,
    pub trapezoid: [f64; 4],
}

impl Quantifier {
    pub fn new(name: impl Into<String>, trapezoid: [f64; 4]) -> Result<Self> {
        let [a, b, c, d] = trapezoid;
        if !(a <= b && b <= c && c <= d) {
            return Err(Error::invalid("trapezoid corners must be nondecreasing"));
        }
        Ok(Self {
            name: name.into(),
            trapezoid,
        })
    }

    pub fn few() -> Self {
        Self::new("few", [0.0, 0.05, 0.20, 0.35]).expect("valid default")
    }

    pub fn some() -> Self {
        Self::new("some", [0.20, 0.35, 0.50, 0.65]).expect("valid default")
    }

    pub fn many() -> Self {
        Self::new("many", [0.50, 0.65, 1.0, 1.0]).expect("valid default")
    }

    pub fn defaults() -> Vec<Self> {
        vec![Self::few(), Self::some(), Self::many()]
    }

    pub fn membership(&self, p: f64) -> f64 {
        let [a, b, c, d] = self.trapezoid;
        if p < a || p > d {
            0.0
        } else if p >= b && p <= c {
            1.0
        } else if p < b {
            (p - a) / (b - a)
        } else {
            (d - p) / (d - c)
        }
    }
}

/// The `R` of a statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Qualifier {
    /// No qualifier: `μR = 1` and the proportion is taken over all records.
    None,
    Category { class: Classification },
    Fuzzy { variable: LinguisticVariable, term: String },
}

impl Qualifier {
    pub fn category(class: Classification) -> Self {
        Qualifier::Category { class }
    }

    pub fn fuzzy(variable: LinguisticVariable, term: &str) -> Result<Self> {
        if variable.term_index(term).is_none() {
            return Err(Error::invalid(format!("unknown term '{term}' for {}", variable.name)));
        }
        Ok(Qualifier::Fuzzy {
            variable,
            term: term.to_string(),
        })
    }

    pub fn membership(&self, record: &Record) -> Result<f64> {
        match self {
            Qualifier::None => Ok(1.0),
            Qualifier::Category { class } => Ok(if record.category == Some(*class) { 1.0 } else { 0.0 }),
            Qualifier::Fuzzy { variable, term } => {
                let x = record.get(&variable.name)?;
                term_membership(variable, term, x)
            }
        }
    }

    /// Plural noun phrase, e.g. "pareto optimal points".
    pub fn phrase(&self) -> String {
        match self {
            Qualifier::None => "design points".to_string(),
            Qualifier::Category { class } => format!("{} points", class.label()),
            Qualifier::Fuzzy { variable, term } => format!("{term} {} points", variable.label),
        }
    }

    fn rank(&self) -> (usize, String) {
        match self {
            Qualifier::Category { class } => (
                Classification::ALL.iter().position(|c| c == class).unwrap_or(0),
                String::new(),
            ),
            Qualifier::Fuzzy { variable, term } => (10, format!("{}:{}", variable.name, term)),
            Qualifier::None => (20, String::new()),
        }
    }

    fn key(&self) -> String {
        match self {
            Qualifier::None => "none".into(),
            Qualifier::Category { class } => format!("category:{}", class.label()),
            Qualifier::Fuzzy { variable, term } => format!("fuzzy:{}:{}", variable.name, term),
        }
    }
}

fn quantifier_rank(q: &Quantifier) -> (usize, String) {
    let pos = ["few", "some", "many"].iter().position(|n| *n == q.name).unwrap_or(3);
    (pos, q.name.clone())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SummarizerTerm {
    pub attribute: String,
    pub term: String,
}

/// One data sample: named attribute values plus an optional class label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Record {
    pub values: BTreeMap<String, f64>,
    pub category: Option<Classification>,
}

impl Record {
    pub fn get(&self, attribute: &str) -> Result<f64> {
        self.values
            .get(attribute)
            .copied()
            .ok_or_else(|| Error::invalid(format!("record has no attribute '{attribute}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticStatement {
    pub quantifier: Quantifier,
    pub summarizer: Vec<SummarizerTerm>,
    pub qualifier: Qualifier,
    pub truth: Option<f64>,
}

impl LinguisticStatement {
    pub fn new(quantifier: Quantifier, summarizer: Vec<SummarizerTerm>, qualifier: Qualifier) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &summarizer {
            if !seen.insert(s.attribute.as_str()) {
                return Err(Error::invalid(format!("attribute '{}' repeated in summarizer", s.attribute)));
            }
        }
        Ok(Self {
            quantifier,
            summarizer,
            qualifier,
            truth: None,
        })
    }

    fn summarizer_key(&self) -> Vec<SummarizerTerm> {
        let mut k = self.summarizer.clone();
        k.sort();
        k
    }
}

/// How the proportion's denominator is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// `D = Σ μP` when both summarizer and qualifier are present, else `N`.
    #[default]
    Summarizer,
    /// `D = N` always: proportions are relative to the whole population.
    Population,
}

fn find_variable<'a>(variables: &'a [LinguisticVariable], name: &str) -> Result<&'a LinguisticVariable> {
    variables
        .iter()
        .find(|v| v.name == name)
        .ok_or_else(|| Error::invalid(format!("no linguistic variable named '{name}'")))
}

/// `μP` of one sample: min over the summarizer's term memberships (1 if empty).
pub fn summarizer_membership(
    statement: &LinguisticStatement,
    variables: &[LinguisticVariable],
    sample: &Record,
) -> Result<f64> {
    let mut mu: f64 = 1.0;
    for s in &statement.summarizer {
        let var = find_variable(variables, &s.attribute)?;
        mu = mu.min(term_membership(var, &s.term, sample.get(&s.attribute)?)?);
    }
    Ok(mu)
}

fn proportion(numerator: f64, denominator: f64) -> f64 {
    if denominator > 0.0 {
        numerator / denominator
    } else {
        0.0
    }
}

fn denominator_mode(statement: &LinguisticStatement, support: Support) -> bool {
    // true: D = Σ μP
    support == Support::Summarizer
        && !statement.summarizer.is_empty()
        && !matches!(statement.qualifier, Qualifier::None)
}

/// Truth `μQ(Σ (μR ∧ μP) / D)`; zero support gives truth 0.
pub fn truth(
    statement: &LinguisticStatement,
    variables: &[LinguisticVariable],
    dataset: &[Record],
    support: Support,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::invalid("truth needs a nonempty dataset"));
    }
    let mut num = 0.0;
    let mut sum_p = 0.0;
    for r in dataset {
        let p = summarizer_membership(statement, variables, r)?;
        let q = statement.qualifier.membership(r)?;
        num += p.min(q);
        sum_p += p;
    }
    let d = if denominator_mode(statement, support) {
        sum_p
    } else {
        dataset.len() as f64
    };
    if d <= 0.0 {
        return Ok(0.0);
    }
    Ok(statement.quantifier.membership(proportion(num, d)).clamp(0.0, 1.0))
}

/// Evaluates many statements at once, sharing summarizer memberships across
/// statements with the same summarizer. Identical results to [`truth`].
pub fn evaluate_all(
    statements: &mut [LinguisticStatement],
    variables: &[LinguisticVariable],
    dataset: &[Record],
    support: Support,
) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::invalid("truth needs a nonempty dataset"));
    }
    let mut p_cache: HashMap<Vec<SummarizerTerm>, Vec<f64>> = HashMap::new();
    let mut r_cache: HashMap<String, Vec<f64>> = HashMap::new();
    for st in statements.iter_mut() {
        let key = st.summarizer.clone();
        if !p_cache.contains_key(&key) {
            let mut col: Vec<f64> = vec![1.0; dataset.len()];
            for s in &st.summarizer {
                let var = find_variable(variables, &s.attribute)?;
                let k = var
                    .term_index(&s.term)
                    .ok_or_else(|| Error::invalid(format!("unknown term '{}'", s.term)))?;
                for (c, r) in col.iter_mut().zip(dataset) {
                    *c = c.min(var.membership_at(k, r.get(&s.attribute)?));
                }
            }
            p_cache.insert(key.clone(), col);
        }
        let qkey = st.qualifier.key();
        if !r_cache.contains_key(&qkey) {
            let col = dataset
                .iter()
                .map(|r| st.qualifier.membership(r))
                .collect::<Result<Vec<_>>>()?;
            r_cache.insert(qkey.clone(), col);
        }
        let p = &p_cache[&key];
        let r = &r_cache[&qkey];
        let mut num = 0.0;
        let mut sum_p = 0.0;
        for (pi, ri) in p.iter().zip(r) {
            num += pi.min(*ri);
            sum_p += pi;
        }
        let d = if denominator_mode(st, support) {
            sum_p
        } else {
            dataset.len() as f64
        };
        st.truth = Some(if d <= 0.0 {
            0.0
        } else {
            st.quantifier.membership(proportion(num, d)).clamp(0.0, 1.0)
        });
    }
    Ok(())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// All summarizers of size `0..=max_summarizer_size` (one term per
/// attribute) crossed with every quantifier and qualifier.
pub fn enumerate_statements(
    variables: &[LinguisticVariable],
    quantifiers: &[Quantifier],
    qualifiers: &[Qualifier],
    max_summarizer_size: usize,
) -> Result<Vec<LinguisticStatement>> {
    if max_summarizer_size > variables.len() {
        return Err(Error::invalid(format!(
            "summarizer size {} exceeds {} variables",
            max_summarizer_size,
            variables.len()
        )));
    }
    let mut summarizers: Vec<Vec<SummarizerTerm>> = Vec::new();
    for size in 0..=max_summarizer_size {
        for combo in combinations(variables.len(), size) {
            let mut terms: Vec<Vec<SummarizerTerm>> = vec![Vec::new()];
            for &vi in &combo {
                let var = &variables[vi];
                terms = terms
                    .into_iter()
                    .flat_map(|prefix| {
                        var.terms.iter().map(move |t| {
                            let mut next = prefix.clone();
                            next.push(SummarizerTerm {
                                attribute: var.name.clone(),
                                term: t.clone(),
                            });
                            next
                        })
                    })
                    .collect();
            }
            summarizers.extend(terms);
        }
    }
    let mut out = Vec::with_capacity(summarizers.len() * quantifiers.len() * qualifiers.len());
    for s in &summarizers {
        for q in quantifiers {
            for r in qualifiers {
                out.push(LinguisticStatement::new(q.clone(), s.clone(), r.clone())?);
            }
        }
    }
    Ok(out)
}

type GroupKey = (String, String);

fn group_key(s: &LinguisticStatement) -> GroupKey {
    (s.quantifier.name.clone(), s.qualifier.key())
}

/// Thresholds statements, then drops every survivor that has a surviving
/// ancestor (a strict subset summarizer) with the same quantifier and
/// qualifier. Output: ascending summarizer size, then descending truth.
pub fn simplify(statements: &[LinguisticStatement], threshold: f64) -> Vec<LinguisticStatement> {
    let survivors: Vec<&LinguisticStatement> = statements
        .iter()
        .filter(|s| s.truth.unwrap_or(0.0) >= threshold)
        .collect();
    let present: HashSet<(GroupKey, Vec<SummarizerTerm>)> =
        survivors.iter().map(|s| (group_key(s), s.summarizer_key())).collect();

    let mut kept: Vec<LinguisticStatement> = survivors
        .into_iter()
        .filter(|s| {
            let key = s.summarizer_key();
            let g = group_key(s);
            let k = key.len();
            // every strict subset, encoded as a bit mask over the summarizer
            !(0..(1usize << k).saturating_sub(1)).any(|mask| {
                let subset: Vec<SummarizerTerm> = key
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, t)| t.clone())
                    .collect();
                present.contains(&(g.clone(), subset))
            })
        })
        .cloned()
        .collect();
    kept.sort_by(|a, b| {
        a.summarizer
            .len()
            .cmp(&b.summarizer.len())
            .then(b.truth.unwrap_or(0.0).total_cmp(&a.truth.unwrap_or(0.0)))
    });
    kept
}

/// Machine-readable form of one reported statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementRecord {
    pub quantifier: String,
    pub qualifier: String,
    pub summarizer: Vec<SummarizerTerm>,
    pub truth: f64,
    pub sentence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub markdown: String,
    pub records: Vec<StatementRecord>,
    pub prompt: String,
}

impl Report {
    pub fn records_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("statement record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Text used around the rendered statements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportLabels {
    pub title: String,
    /// Plural noun for the summarized objects, e.g. "design points".
    pub subject: String,
    pub variables: Vec<LinguisticVariable>,
}

pub const EMPTY_REPORT_SENTINEL: &str = "No statements exceeded the threshold.";

fn summarizer_phrase(summarizer: &[SummarizerTerm], variables: &[LinguisticVariable]) -> String {
    summarizer
        .iter()
        .map(|s| {
            let label = variables
                .iter()
                .find(|v| v.name == s.attribute)
                .map(|v| v.label.as_str())
                .unwrap_or(s.attribute.as_str());
            format!("{} {}", s.term, label)
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn render_sentence(statement: &LinguisticStatement, labels: &ReportLabels) -> String {
    let q = &statement.quantifier.name;
    let summ = summarizer_phrase(&statement.summarizer, &labels.variables);
    match (&statement.qualifier, statement.summarizer.is_empty()) {
        (Qualifier::None, true) => format!("Of the {}, {q} are {}.", labels.subject, labels.subject),
        (Qualifier::None, false) => format!("Of the {}, {q} are from {summ}.", labels.subject),
        (r, true) => format!("Of the {}, {q} are {}.", labels.subject, r.phrase()),
        (r, false) => format!("Of the {} from {summ}, {q} are {}.", labels.subject, r.phrase()),
    }
}

fn title_case(s: &str) -> String {
    s.split(' ')
        .map(|w| {
            let mut c = w.chars();
            match c.next() {
                Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Groups statements under "<Quantifier> <Qualifier>" headings and renders
/// markdown, statement records and a plain-text prompt for downstream
/// polishing. Output is byte-stable for identical input.
pub fn render_report(statements: &[LinguisticStatement], labels: &ReportLabels) -> Report {
    let mut groups: Vec<((usize, String), (usize, String), String, Vec<&LinguisticStatement>)> = Vec::new();
    for s in statements {
        let rank_r = s.qualifier.rank();
        let rank_q = quantifier_rank(&s.quantifier);
        let heading = format!("{} {}", title_case(&s.quantifier.name), title_case(&s.qualifier.phrase()));
        match groups.iter_mut().find(|g| g.2 == heading) {
            Some(g) => g.3.push(s),
            None => groups.push((rank_r, rank_q, heading, vec![s])),
        }
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut markdown = format!("# {}\n\n", labels.title);
    let mut records = Vec::new();
    if groups.is_empty() {
        markdown.push_str(EMPTY_REPORT_SENTINEL);
        markdown.push('\n');
    }
    for (_, _, heading, members) in &groups {
        let _ = writeln!(markdown, "- **{heading}:**");
        for s in members {
            let sentence = render_sentence(s, labels);
            let truth = s.truth.unwrap_or(0.0);
            let _ = writeln!(markdown, "  - {sentence} (truth {truth:.3})");
            records.push(StatementRecord {
                quantifier: s.quantifier.name.clone(),
                qualifier: s.qualifier.phrase(),
                summarizer: s.summarizer.clone(),
                truth,
                sentence,
            });
        }
    }

    let mut prompt = String::from(
        "Rewrite the following fuzzy linguistic summary of an optimization campaign as a short, \
         readable report for a materials scientist. Keep the grouping by heading, merge statements \
         that share a heading, and do not add claims that are not present below.\n\n",
    );
    if records.is_empty() {
        prompt.push_str(EMPTY_REPORT_SENTINEL);
        prompt.push('\n');
    }
    for (_, _, heading, members) in &groups {
        let _ = writeln!(prompt, "{heading}:");
        for s in members {
            let _ = writeln!(prompt, "- {}", render_sentence(s, labels));
        }
    }
    Report {
        markdown,
        records,
        prompt,
    }
}
