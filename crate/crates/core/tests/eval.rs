mod common;

use common::oracle;
use proptest::prelude::*;
use spanshift::eval::{bleu, evaluate, exact_match, f1, BleuError, Predictions};
use spanshift::{AnswerSpan, Article, Dataset, Paragraph, QaItem};

#[test]
fn three_pair_bleu_by_hand() {
    let preds = ["a b c d", "e f", "g"];
    let refs = ["a b c e", "e f g", "h"];
    // unigrams 5/7, bigrams 3/4, candidate 7 tokens against 8
    let bp = (-1.0f64 / 7.0).exp();
    let b1: f64 = bleu(&preds, &refs, 1).unwrap();
    let b2: f64 = bleu(&preds, &refs, 2).unwrap();
    assert!((b1 - bp * 5.0 / 7.0).abs() < 1e-12);
    assert!((b2 - bp * (15.0f64 / 28.0).sqrt()).abs() < 1e-12);
    // longer candidates carry no brevity penalty
    let b: f64 = bleu(&["x y z"], &["x y"], 1).unwrap();
    assert!((b - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn bleu_edge_cases() {
    let empty: [&str; 0] = [];
    assert_eq!(bleu::<f64>(&empty, &empty, 2), Ok(1.0));
    assert_eq!(bleu::<f64>(&["", "."], &["", ""], 2), Ok(1.0));
    assert_eq!(bleu::<f64>(&["a"], &["a"], 2), Ok(0.0));
    assert_eq!(bleu::<f64>(&["a", "b"], &["a"], 1), Err(BleuError::LengthMismatch { predictions: 2, references: 1 }));
    assert_eq!(bleu::<f64>(&["a"], &["a"], 3), Err(BleuError::Order(3)));
    assert_eq!(bleu::<f64>(&["The Cat."], &["the cat"], 2), Ok(1.0));
}

fn gold(items: &[(&str, &[&str], bool)]) -> Dataset {
    let context = "x".repeat(64);
    let qas = items
        .iter()
        .map(|(id, answers, impossible)| {
            if *impossible {
                QaItem::impossible(*id, "?")
            } else {
                QaItem::answerable(*id, "?", answers.iter().map(|a| AnswerSpan::new(*a, 0)).collect())
            }
        })
        .collect();
    Dataset::new(vec![Article::new("t", vec![Paragraph::new(context, qas)])])
}

#[test]
fn report_breakdown() {
    let ds = gold(&[
        ("a", &["the red car"], false),
        ("b", &["blue", "dark blue"], false),
        ("c", &[], true),
        ("d", &[], true),
    ]);
    let preds: Predictions = [("a", "red car"), ("b", "Dark blue!"), ("c", ""), ("d", "something")]
        .map(|(k, v)| (k.into(), v.into()))
        .into();
    let r = evaluate::<f64>(&preds, &ds);
    assert_eq!((r.total, r.has_ans_count, r.no_ans_count), (4, 2, 2));
    assert_eq!((r.em_has_ans, r.em_no_ans, r.em), (50.0, 50.0, 50.0));
    // a: tokens "red car" vs "the red car" → 2·(1·2/3)/(1+2/3) = 0.8
    assert!((r.f1_has_ans - 90.0).abs() < 1e-9);
    assert!((r.f1 - (0.8 + 1.0 + 1.0 + 0.0) / 4.0 * 100.0).abs() < 1e-9);
    assert!(r.missing.is_empty());

    let partial: Predictions = [("a".to_owned(), "the red car".to_owned())].into();
    let r = evaluate::<f64>(&partial, &ds);
    assert_eq!(r.missing, ["b", "c", "d"]);
    assert_eq!((r.em_has_ans, r.em_no_ans), (50.0, 0.0));
}

fn arb_case() -> impl Strategy<Value = Vec<(String, Vec<String>, bool)>> {
    let text = "[a-cक]{1,2}( [a-cक.]{1,2}){0,3}";
    prop::collection::vec((text, prop::collection::vec(text, 1..3), any::<bool>(), any::<bool>()), 1..20).prop_map(
        |items| {
            items
                .into_iter()
                .map(|(pred, golds, impossible, blank)| {
                    let pred = if blank { String::new() } else { pred };
                    (pred, if impossible { vec![] } else { golds }, impossible)
                })
                .collect()
        },
    )
}

fn build(case: &[(String, Vec<String>, bool)]) -> (Predictions, Dataset) {
    let context = "x".repeat(64);
    let mut preds = Predictions::new();
    let qas = case
        .iter()
        .enumerate()
        .map(|(i, (pred, golds, impossible))| {
            let id = format!("q{i:03}");
            preds.insert(id.clone(), pred.clone());
            if *impossible {
                QaItem::impossible(id, "?")
            } else {
                QaItem::answerable(id, "?", golds.iter().map(|g| AnswerSpan::new(g.clone(), 0)).collect())
            }
        })
        .collect();
    (preds, Dataset::new(vec![Article::new("t", vec![Paragraph::new(context, qas)])]))
}

proptest! {
    #[test]
    fn em_never_exceeds_f1(pred in "[a-c ]{0,8}", golds in prop::collection::vec("[a-c ]{0,8}", 0..3)) {
        let em: f64 = exact_match(&pred, &golds);
        let f: f64 = f1(&pred, &golds);
        prop_assert!(em <= f);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(em, oracle::em(&pred, &golds));
        prop_assert!((f - oracle::f1(&pred, &golds)).abs() < 1e-12);
    }

    #[test]
    fn breakdown_is_consistent_and_matches_reference(case in arb_case()) {
        let (preds, ds) = build(&case);
        let r = evaluate::<f64>(&preds, &ds);
        let (h, n) = (r.has_ans_count as f64, r.no_ans_count as f64);
        prop_assert!((r.em * (h + n) - (r.em_has_ans * h + r.em_no_ans * n)).abs() < 1e-9);
        prop_assert!((r.f1 * (h + n) - (r.f1_has_ans * h + r.f1_no_ans * n)).abs() < 1e-9);
        prop_assert!(r.em <= r.f1 + 1e-9);
        let ps: Vec<String> = case.iter().map(|c| c.0.clone()).collect();
        let rs: Vec<String> = case.iter().map(|c| c.1.first().cloned().unwrap_or_default()).collect();
        prop_assert!((r.bleu1 - 100.0 * oracle::bleu(&ps, &rs, 1)).abs() < 1e-9);
        prop_assert!((r.bleu2 - 100.0 * oracle::bleu(&ps, &rs, 2)).abs() < 1e-9);
    }

    #[test]
    fn question_order_does_not_matter(case in arb_case(), rotate in 0usize..20) {
        let (preds, ds) = build(&case);
        let mut shuffled = ds.clone();
        let qas = &mut shuffled.data[0].paragraphs[0].qas;
        let k = rotate % qas.len();
        qas.rotate_left(k);
        qas.reverse();
        let (a, b) = (evaluate::<f64>(&preds, &ds), evaluate::<f64>(&preds, &shuffled));
        prop_assert!((a.em - b.em).abs() < 1e-9 && (a.f1 - b.f1).abs() < 1e-9);
        prop_assert!((a.bleu1 - b.bleu1).abs() < 1e-9 && (a.bleu2 - b.bleu2).abs() < 1e-9);
    }
}

#[test]
fn works_in_f32() {
    let ds = gold(&[("a", &["one two"], false)]);
    let preds: Predictions = [("a".to_owned(), "one two".to_owned())].into();
    let r = evaluate::<f32>(&preds, &ds);
    assert_eq!((r.em, r.f1, r.bleu1, r.bleu2), (100.0, 100.0, 100.0, 100.0));
}
