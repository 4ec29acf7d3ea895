use std::collections::BTreeMap;

use epal_core::fls::{
    self, LinguisticStatement, LinguisticVariable, Qualifier, Quantifier, Record, ReportLabels, Support,
    SummarizerTerm,
};
use epal_core::pal::Classification;
use proptest::prelude::*;

fn term(attribute: &str, term: &str) -> SummarizerTerm {
    SummarizerTerm {
        attribute: attribute.into(),
        term: term.into(),
    }
}

fn record(x: f64, class: Classification) -> Record {
    Record {
        values: BTreeMap::from([("x".to_string(), x)]),
        category: Some(class),
    }
}

#[test]
fn weighted_proportion_by_direct_summation() {
    // memberships of "very small" on [0, 1] at these x are 1, 0.5, 0, 0.25
    let var = LinguisticVariable::five_terms("x", "x", (0.0, 1.0)).unwrap();
    let xs = [0.0, 0.125, 0.5, 0.1875];
    let mu = [1.0, 0.5, 0.0, 0.25];
    for (x, m) in xs.iter().zip(mu) {
        assert!((fls::term_membership(&var, "very small", *x).unwrap() - m).abs() < 1e-12);
    }
    let classes = [
        Classification::ParetoOptimal,
        Classification::ParetoOptimal,
        Classification::Discarded,
        Classification::Discarded,
    ];
    let data: Vec<Record> = xs.iter().zip(classes).map(|(x, c)| record(*x, c)).collect();
    let proportion: f64 = (1.0 + 0.5) / (1.0 + 0.5 + 0.0 + 0.25);
    assert!((proportion - 0.857).abs() < 1e-3);

    for q in Quantifier::defaults() {
        let [a, b, c, d] = q.trapezoid;
        let want = if proportion < a || proportion > d {
            0.0
        } else if proportion < b {
            (proportion - a) / (b - a)
        } else if proportion <= c {
            1.0
        } else {
            (d - proportion) / (d - c)
        };
        let s = LinguisticStatement::new(
            q.clone(),
            vec![term("x", "very small")],
            Qualifier::category(Classification::ParetoOptimal),
        )
        .unwrap();
        let got = fls::truth(&s, std::slice::from_ref(&var), &data, Support::Summarizer).unwrap();
        assert!((got - want).abs() < 1e-12, "{}: {got} vs {want}", q.name);
    }
}

#[test]
fn enumeration_count_is_combinatorial() {
    let vars: Vec<LinguisticVariable> = ["a", "b"]
        .iter()
        .map(|n| LinguisticVariable::new(*n, *n, (0.0, 1.0), &["low", "high"]).unwrap())
        .collect();
    let qualifiers = vec![
        Qualifier::category(Classification::ParetoOptimal),
        Qualifier::category(Classification::Discarded),
        Qualifier::category(Classification::Undecided),
    ];
    let q = Quantifier::defaults();
    // (1 + 2·2) summarizers × 3 × 3
    assert_eq!(fls::enumerate_statements(&vars, &q, &qualifiers, 1).unwrap().len(), 45);
    assert_eq!(fls::enumerate_statements(&vars, &q, &qualifiers, 0).unwrap().len(), 9);
    // size 2 adds 2·2 pairs across the two attributes
    assert_eq!(fls::enumerate_statements(&vars, &q, &qualifiers, 2).unwrap().len(), (1 + 4 + 4) * 9);
}

#[test]
fn spin_coating_sentence() {
    let vars = vec![
        LinguisticVariable::five_terms("c_pvp360", "pvp360 concentration", (0.0, 1.0)).unwrap(),
        LinguisticVariable::five_terms("spin_speed", "spin speed", (1000.0, 8000.0)).unwrap(),
        LinguisticVariable::five_terms("dilution", "dilution", (0.0, 1.0)).unwrap(),
    ];
    let mut s = LinguisticStatement::new(
        Quantifier::some(),
        vec![
            term("c_pvp360", "very large"),
            term("spin_speed", "very large"),
            term("dilution", "medium"),
        ],
        Qualifier::category(Classification::ParetoOptimal),
    )
    .unwrap();
    s.truth = Some(0.97);
    let labels = ReportLabels {
        title: "Iteration 4".into(),
        subject: "design points".into(),
        variables: vars,
    };
    assert_eq!(
        fls::render_sentence(&s, &labels),
        "Of the design points from very large pvp360 concentration, very large spin speed, medium dilution, \
         some are pareto optimal points."
    );
    let report = fls::render_report(&[s], &labels);
    assert!(report.markdown.contains("- **Some Pareto Optimal Points:**"));
    assert_eq!(report.records.len(), 1);
    assert_eq!(report.records_jsonl().lines().count(), 1);
}

#[test]
fn simplify_keeps_exactly_the_unsubsumed_strong_statements() {
    let vars: Vec<LinguisticVariable> = (0..3)
        .map(|i| LinguisticVariable::five_terms(format!("x{i}"), format!("x{i}"), (0.0, 1.0)).unwrap())
        .collect();
    let data: Vec<Record> = (0..60)
        .map(|i| {
            let t = i as f64 / 59.0;
            Record {
                values: BTreeMap::from([
                    ("x0".to_string(), t),
                    ("x1".to_string(), (t * 7.3).fract()),
                    ("x2".to_string(), 1.0 - t),
                ]),
                category: Some(if t < 0.4 {
                    Classification::ParetoOptimal
                } else {
                    Classification::Discarded
                }),
            }
        })
        .collect();
    let qualifiers = vec![
        Qualifier::category(Classification::ParetoOptimal),
        Qualifier::category(Classification::Discarded),
    ];
    let mut all = fls::enumerate_statements(&vars, &Quantifier::defaults(), &qualifiers, 2).unwrap();
    fls::evaluate_all(&mut all, &vars, &data, Support::Summarizer).unwrap();
    let kept = fls::simplify(&all, 0.9);

    let subsumes = |a: &LinguisticStatement, b: &LinguisticStatement| {
        a.quantifier == b.quantifier
            && a.qualifier == b.qualifier
            && a.summarizer.len() < b.summarizer.len()
            && a.summarizer.iter().all(|t| b.summarizer.contains(t))
    };
    let strong: Vec<&LinguisticStatement> = all.iter().filter(|s| s.truth.unwrap() >= 0.9).collect();
    let expected: Vec<&LinguisticStatement> = strong
        .iter()
        .copied()
        .filter(|s| !strong.iter().any(|a| subsumes(a, s)))
        .collect();
    assert!(!expected.is_empty());
    assert_eq!(kept.len(), expected.len());
    for s in &expected {
        assert!(kept.contains(s));
    }
    assert_eq!(fls::simplify(&kept, 0.9), kept);
}

proptest! {
    #[test]
    fn memberships_form_a_partition(
        lo in -100.0f64..100.0,
        width in 0.01f64..500.0,
        n in 2usize..9,
        frac in 0.0f64..=1.0,
    ) {
        let terms: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let refs: Vec<&str> = terms.iter().map(String::as_str).collect();
        let v = LinguisticVariable::new("v", "v", (lo, lo + width), &refs).unwrap();
        let mu = v.memberships(lo + frac * width);
        let total: f64 = mu.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(mu.iter().filter(|m| **m > 0.0).count() <= 2);
    }

    #[test]
    fn truth_is_a_membership_degree(xs in prop::collection::vec(0.0f64..1.0, 1..40), pick in 0usize..5) {
        let var = LinguisticVariable::five_terms("x", "x", (0.0, 1.0)).unwrap();
        let data: Vec<Record> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| record(*x, if i % 3 == 0 { Classification::ParetoOptimal } else { Classification::Undecided }))
            .collect();
        for q in Quantifier::defaults() {
            let s = LinguisticStatement::new(
                q,
                vec![term("x", fls::FIVE_TERMS[pick])],
                Qualifier::category(Classification::ParetoOptimal),
            )
            .unwrap();
            for support in [Support::Summarizer, Support::Population] {
                let t = fls::truth(&s, std::slice::from_ref(&var), &data, support).unwrap();
                prop_assert!((0.0..=1.0).contains(&t));
            }
        }
    }
}
