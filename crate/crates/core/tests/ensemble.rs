mod common;

use common::{vote_oracle, votes_from_pattern};
use infotweet::corpus::Label;
use infotweet::ensemble::{self, decide, PredictionSet, TieBreak, VoteConfig};
use infotweet::error::Error;
use proptest::prelude::*;

/// One prediction set per member, one id per vote pattern.
fn pattern_sets(members: u32) -> Vec<PredictionSet> {
    (0..members)
        .map(|m| {
            PredictionSet::from_pairs(
                format!("m{m}"),
                (0..1u32 << members).map(|p| (format!("p{p}"), votes_from_pattern(p, members)[m as usize])),
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn all_vote_patterns_match_oracle() {
    for members in [3u32, 4, 5] {
        let sets = pattern_sets(members);
        let config = VoteConfig::new((0..members).map(|m| format!("m{m}")), TieBreak::Priority).unwrap();
        let outcome = ensemble::vote_detailed(&sets, &config).unwrap();
        assert_eq!(outcome.predictions.len(), 1 << members);
        for p in 0..1u32 << members {
            let (label, tie) = vote_oracle(p, members);
            assert_eq!(outcome.predictions.get(&format!("p{p}")), Some(label), "members={members} pattern={p:b}");
            assert_eq!(outcome.tie_broken.contains(&format!("p{p}")), tie);
        }
        if members % 2 == 1 {
            assert!(outcome.tie_broken.is_empty());
        } else {
            // C(4, 2) even splits.
            assert_eq!(outcome.tie_broken.len(), 6);
        }
    }
}

#[test]
fn toward_informative_rule() {
    for p in 0..16u32 {
        let votes = votes_from_pattern(p, 4);
        let d = decide(&votes, TieBreak::TowardInformative);
        let (label, tie) = vote_oracle(p, 4);
        if tie {
            assert_eq!(d.label, Label::Informative);
        } else {
            assert_eq!(d.label, label);
        }
        assert_eq!(d.tie_broken, tie);
    }
}

#[test]
fn mismatched_ids_are_listed() {
    let a = PredictionSet::from_pairs("xlnet", [("1".to_string(), Label::Informative), ("2".into(), Label::Informative)]).unwrap();
    let b = PredictionSet::from_pairs("bert", [("2".to_string(), Label::Informative), ("3".into(), Label::Uninformative)]).unwrap();
    let config = VoteConfig::new(["xlnet", "bert"], TieBreak::Priority).unwrap();
    match ensemble::vote(&[a, b], &config).unwrap_err() {
        Error::IdMismatch { ids } => assert_eq!(ids, vec!["1", "3"]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn member_names_must_match_order() {
    let sets = pattern_sets(3);
    let config = VoteConfig::new(["m0", "m1", "other"], TieBreak::Priority).unwrap();
    assert!(matches!(ensemble::vote(&sets, &config), Err(Error::Config(_))));
    assert!(VoteConfig::new(["solo"], TieBreak::Priority).is_err());
}

#[test]
fn prediction_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roberta.tsv");
    std::fs::write(&path, "a1\tINFORMATIVE\r\na2\tUNINFORMATIVE\n\n").unwrap();
    let set = PredictionSet::read(&path).unwrap();
    assert_eq!(set.model_name, "roberta");
    assert_eq!(set.render(), "a1\tINFORMATIVE\na2\tUNINFORMATIVE\n");
    set.write(&path).unwrap();
    assert_eq!(PredictionSet::read(&path).unwrap(), set);

    for bad in ["a1\tMAYBE\n", "a1\n", "a1\tINFORMATIVE\na1\tINFORMATIVE\n"] {
        assert!(PredictionSet::parse("x", bad).is_err(), "{bad:?}");
    }
}

fn label_strategy() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Informative), Just(Label::Uninformative)]
}

proptest! {
    #[test]
    fn input_order_of_sets_is_irrelevant(
        votes in prop::collection::vec(prop::collection::vec(label_strategy(), 4), 1..40),
        rotation in 0usize..4,
    ) {
        let names = ["xlnet", "roberta", "bert", "bigrucnn"];
        let sets: Vec<PredictionSet> = (0..4)
            .map(|m| PredictionSet::from_pairs(names[m], votes.iter().enumerate().map(|(i, v)| (format!("id{i}"), v[m]))).unwrap())
            .collect();
        let config = VoteConfig::new(names, TieBreak::Priority).unwrap();
        let mut rotated = sets.clone();
        rotated.rotate_left(rotation);
        let a = ensemble::vote(&sets, &config).unwrap();
        let b = ensemble::vote(&rotated, &config).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn unanimous_votes_pass_through(
        labels in prop::collection::vec(label_strategy(), 0..50),
        members in 2usize..6,
    ) {
        let sets: Vec<PredictionSet> = (0..members)
            .map(|m| PredictionSet::from_pairs(format!("m{m}"), labels.iter().enumerate().map(|(i, &l)| (format!("id{i}"), l))).unwrap())
            .collect();
        let config = VoteConfig::new((0..members).map(|m| format!("m{m}")), TieBreak::TowardInformative).unwrap();
        let outcome = ensemble::vote_detailed(&sets, &config).unwrap();
        prop_assert!(outcome.tie_broken.is_empty());
        prop_assert_eq!(outcome.predictions.predictions.values().copied().collect::<Vec<_>>(), labels);
        let report = ensemble::agreement_report(&sets).unwrap();
        prop_assert_eq!(report.unanimity, 1.0);
    }
}
