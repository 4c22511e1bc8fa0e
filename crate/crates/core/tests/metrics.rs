mod common;

use common::{random_fixture, tally_oracle};
use infotweet::corpus::{Label, Tweet};
use infotweet::ensemble::PredictionSet;
use infotweet::error::Error;
use infotweet::metrics::{self, ConfusionMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exact(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[test]
fn evaluate_matches_tally_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    for _ in 0..100 {
        let (pred, gold) = random_fixture(&mut rng, 1000);
        let report = metrics::evaluate(&pred, &gold).unwrap();
        let (tp, fp, fn_, tn) = tally_oracle(&pred, &gold);
        let m = report.matrix;
        assert_eq!(
            (m.true_positive, m.false_positive, m.false_negative, m.true_negative),
            (tp, fp, fn_, tn)
        );
        assert_eq!(report.accuracy, exact(tp + tn, tp + fp + fn_ + tn));
        assert_eq!(report.precision, exact(tp, tp + fp));
        assert_eq!(report.recall, exact(tp, tp + fn_));
        // F1 = 2tp / (2tp + fp + fn), compared in exact rationals.
        let f1 = m.f1_ratio();
        assert_eq!(f1.numerator * (2 * tp + fp + fn_), 2 * tp * f1.denominator);
        assert!((report.f1 - exact(2 * tp, 2 * tp + fp + fn_)).abs() < 1e-12);
    }
}

#[test]
fn hand_case() {
    let m = ConfusionMatrix {
        true_positive: 3,
        false_positive: 1,
        false_negative: 1,
        true_negative: 5,
    };
    assert_eq!((m.accuracy(), m.precision(), m.recall(), m.f1()), (0.8, 0.75, 0.75, 0.75));
    let kv = metrics::MetricsReport::from_matrix("m", m).to_key_values();
    assert!(kv.contains("accuracy=80.00\n") && kv.contains("f1=75.00\n"), "{kv}");
}

#[test]
fn swapping_classes_swaps_precision_and_recall_roles() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (pred, gold) = random_fixture(&mut rng, 300);
        let report = metrics::evaluate(&pred, &gold).unwrap();
        let flipped_pred = PredictionSet::from_pairs(
            pred.model_name.clone(),
            pred.predictions.iter().map(|(id, l)| (id.clone(), l.flip())),
        )
        .unwrap();
        let flipped_gold: Vec<Tweet> = gold
            .iter()
            .map(|t| Tweet::new(t.id.clone(), t.text.clone(), t.label.map(Label::flip)))
            .collect();
        let flipped = metrics::evaluate(&flipped_pred, &flipped_gold).unwrap();
        assert_eq!(flipped.matrix, report.matrix.swapped());
        assert_eq!(flipped.accuracy, report.accuracy);
        // UNINFORMATIVE-as-positive precision is tn / (tn + fn).
        let m = report.matrix;
        assert_eq!(flipped.precision, exact(m.true_negative, m.true_negative + m.false_negative));
    }
}

#[test]
fn f1_lies_between_min_and_max_of_precision_and_recall() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let (pred, gold) = random_fixture(&mut rng, 200);
        let r = metrics::evaluate(&pred, &gold).unwrap();
        let lo = r.precision.min(r.recall);
        let hi = r.precision.max(r.recall);
        assert!(r.f1 >= lo - 1e-12 && r.f1 <= hi + 1e-12, "{r:?}");
        assert!(r.f1 <= (r.precision + r.recall) / 2.0 + 1e-12);
    }
}

#[test]
fn gold_order_is_irrelevant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (pred, mut gold) = random_fixture(&mut rng, 500);
    let before = metrics::evaluate(&pred, &gold).unwrap();
    gold.reverse();
    assert_eq!(metrics::evaluate(&pred, &gold).unwrap(), before);
}

#[test]
fn id_universe_must_match() {
    let gold = vec![
        Tweet::new("1", "a", Some(Label::Informative)),
        Tweet::new("2", "b", Some(Label::Uninformative)),
    ];
    let pred = PredictionSet::from_pairs("m", [("1".to_string(), Label::Informative), ("9".into(), Label::Informative)]).unwrap();
    match metrics::evaluate(&pred, &gold).unwrap_err() {
        Error::IdMismatch { ids } => assert_eq!(ids, vec!["2", "9"]),
        other => panic!("{other:?}"),
    }
    let unlabeled = vec![Tweet::new("1", "a", None)];
    let one = PredictionSet::from_pairs("m", [("1".to_string(), Label::Informative)]).unwrap();
    assert!(matches!(metrics::evaluate(&one, &unlabeled), Err(Error::UnlabeledRecord { .. })));
}

#[test]
fn published_rows_are_bundled() {
    let test = metrics::published_results("test");
    let banana = test.iter().find(|r| r.system == "BANANA").unwrap();
    assert_eq!((banana.precision, banana.recall, banana.f1), (8853, 8909, 8881));
    let dev = metrics::published_results("dev");
    assert_eq!(dev.len(), 5);
    let table = metrics::comparison_table(&[], &test);
    let rows: Vec<&str> = table.lines().skip(1).filter(|l| l.contains(" *")).collect();
    assert_eq!(rows.len(), 7);
    assert!(rows[5].starts_with("BANANA *") && rows[6].starts_with("BASELINE-FASTTEXT *"), "{table}");
}
