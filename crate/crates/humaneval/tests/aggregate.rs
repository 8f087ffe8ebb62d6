mod common;

use dyadic_humaneval::{
    aggregate, aggregate_with, export_deltas, CiMethod, MetricScores, Protocol, RatingRecord, StudyError, StudyItem,
};
use dyadic_metrics::correlate;
use proptest::prelude::*;

fn rating(item: &StudyItem, rater: usize, dim: u8, value: i8) -> RatingRecord {
    RatingRecord {
        item_id: item.item_id.clone(),
        rater_id: format!("r{rater}"),
        dimension_id: dim,
        value,
        timestamp: 0,
        flags: Default::default(),
    }
}

/// Items with a fixed layout: `first_left` says whether "A" is shown left.
fn pair_items(n: usize, first_left: bool) -> Vec<StudyItem> {
    let mut items = common::items(n, &["A", "B"], Protocol::BodyDyadic, 0);
    for it in &mut items {
        if (it.system_left == "A") != first_left {
            std::mem::swap(&mut it.system_left, &mut it.system_right);
            std::mem::swap(&mut it.candidate_left, &mut it.candidate_right);
        }
    }
    items
}

#[test]
fn item_mean_of_five_ratings() {
    let items = pair_items(1, true);
    let ratings: Vec<_> = [1, 1, 0, 2, 1].iter().enumerate().map(|(r, &v)| rating(&items[0], r, 1, v)).collect();
    let agg = aggregate(&ratings, &items).unwrap();
    let m = agg.item_mean(&items[0].item_id, 1).unwrap();
    assert_eq!(m.mean, 1.0);
    assert_eq!(m.n_ratings, 5);
    let d = agg.matchup("A", "B").unwrap().dimension(1).unwrap();
    assert_eq!((d.mean, d.ci95, d.n_items), (1.0, None, 1));
}

#[test]
fn opposite_items_give_zero_mean_and_ci_1_96() {
    let items = pair_items(2, true);
    let ratings = vec![rating(&items[0], 0, 1, 1), rating(&items[1], 0, 1, -1)];
    let d = aggregate(&ratings, &items).unwrap().matchups[0].dimensions[0].clone();
    assert_eq!(d.mean, 0.0);
    assert!((d.ci95.unwrap() - 1.96).abs() < 1e-9);
}

#[test]
fn all_zero_ratings_give_zero_mean_and_ci() {
    let items = pair_items(4, true);
    let ratings: Vec<_> = items.iter().flat_map(|it| (0..5).map(move |r| rating(it, r, 2, 0))).collect();
    let d = aggregate(&ratings, &items).unwrap().matchups[0].dimensions[0].clone();
    assert_eq!((d.mean, d.ci95), (0.0, Some(0.0)));
    assert_eq!(d.n_items, 4);
}

#[test]
fn hand_computed_matchup() {
    // Item means 1.0, 0.4, -0.2 (five ratings each); mean 0.4,
    // s = sqrt(((0.6)^2 + 0 + (0.6)^2) / 2) = 0.6, CI = 1.96 * 0.6 / sqrt(3).
    let items = pair_items(3, true);
    let values: [[i8; 5]; 3] = [[1, 1, 0, 2, 1], [0, 1, 0, 1, 0], [-1, 0, 0, 0, 0]];
    let ratings: Vec<_> = items
        .iter()
        .zip(values)
        .flat_map(|(it, vs)| vs.into_iter().enumerate().map(move |(r, v)| rating(it, r, 3, v)))
        .collect();
    let d = aggregate(&ratings, &items).unwrap().matchup("A", "B").unwrap().dimension(3).unwrap().clone();
    assert!((d.mean - 0.4).abs() < 1e-9);
    assert!((d.ci95.unwrap() - 1.96 * 0.6 / 3f64.sqrt()).abs() < 1e-9);
}

#[test]
fn orientation_is_canonical() {
    // Raters always prefer B. Whether B is shown left or right, the
    // summary reads positive for (A, B).
    let left = pair_items(1, true);
    let right = pair_items(1, false);
    let prefers_b_right = aggregate(&[rating(&left[0], 0, 1, 2)], &left).unwrap();
    let prefers_b_left = aggregate(&[rating(&right[0], 0, 1, -2)], &right).unwrap();
    for agg in [prefers_b_right, prefers_b_left] {
        let m = agg.matchup("B", "A").unwrap();
        assert_eq!((m.first.as_str(), m.second.as_str()), ("A", "B"));
        assert_eq!(m.dimensions[0].mean, 2.0);
    }
}

#[test]
fn empty_study_is_a_domain_error() {
    let items = pair_items(2, true);
    assert!(matches!(aggregate(&[], &items), Err(StudyError::Domain(_))));
}

#[test]
fn unknown_item_is_a_domain_error() {
    let items = pair_items(1, true);
    let mut r = rating(&items[0], 0, 1, 1);
    r.item_id = "nope".into();
    assert!(matches!(aggregate(&[r], &items), Err(StudyError::Domain(_))));
}

#[test]
fn bootstrap_interval_is_close_to_normal_one() {
    let items = pair_items(40, true);
    let ratings: Vec<_> = items.iter().enumerate().map(|(i, it)| rating(it, 0, 1, (i % 5) as i8 - 2)).collect();
    let normal = aggregate(&ratings, &items).unwrap().matchups[0].dimensions[0].ci95.unwrap();
    let boot = aggregate_with(&ratings, &items, CiMethod::Bootstrap { resamples: 4000, seed: 5 }).unwrap().matchups[0].dimensions[0]
        .ci95
        .unwrap();
    assert!((boot - normal).abs() / normal < 0.1, "normal {normal} bootstrap {boot}");
}

fn planted(items: &[StudyItem]) -> (Vec<RatingRecord>, MetricScores) {
    // System B's metric advantage grows with the sample index; the human
    // preference for B grows with it, so the deltas are strictly monotone.
    let mut scores = MetricScores::new();
    let mut ratings = Vec::new();
    for (k, it) in items.iter().enumerate() {
        scores.entry("A".into()).or_default().insert(it.sample_id.clone(), 10.0);
        scores.entry("B".into()).or_default().insert(it.sample_id.clone(), 10.0 + 0.5 * k as f64);
        // mean preference for B is (k - 4) / 5 over five ratings
        let total = k as i64 - 4;
        for r in 0..5 {
            let share = total.div_euclid(5) + i64::from((r as i64) < total.rem_euclid(5));
            let v = share as i8 * if it.system_right == "B" { 1 } else { -1 };
            ratings.push(rating(it, r, 1, v));
        }
    }
    (ratings, scores)
}

#[test]
fn planted_monotone_relation_gives_tau_one() {
    let items = common::items(12, &["A", "B"], Protocol::FaceDyadic, 21);
    let (ratings, scores) = planted(&items);
    let agg = aggregate(&ratings, &items).unwrap();
    let export = export_deltas(&agg, 1, &scores);
    assert!(export.exclusions.is_empty());
    assert_eq!(export.rows.len(), 12);
    let (human, metric) = export.columns();
    let c = correlate(&human, &metric).unwrap();
    assert_eq!(c.kendall.value, 1.0);
    assert!((c.spearman.value - 1.0).abs() < 1e-12);
}

#[test]
fn missing_scores_are_reported_not_dropped_silently() {
    let items = common::items(3, &["A", "B"], Protocol::FaceDyadic, 2);
    let (ratings, mut scores) = planted(&items);
    scores.get_mut("B").unwrap().remove(&items[1].sample_id);
    scores.get_mut("A").unwrap().insert(items[2].sample_id.clone(), f64::NAN);
    let export = export_deltas(&aggregate(&ratings, &items).unwrap(), 1, &scores);
    assert_eq!(export.rows.len(), 1);
    assert_eq!(export.exclusions.len(), 2);
    assert!(export.exclusions[0].reason.contains('B'));
}

#[test]
fn identical_systems_give_zero_metric_delta() {
    let items = common::items(2, &["A", "B"], Protocol::FaceDyadic, 2);
    let (ratings, mut scores) = planted(&items);
    let a = scores["A"].clone();
    scores.insert("B".into(), a);
    let export = export_deltas(&aggregate(&ratings, &items).unwrap(), 1, &scores);
    assert!(export.rows.iter().all(|r| r.metric == 0.0));
}

proptest! {
    #[test]
    fn aggregate_ignores_arrival_order(
        values in prop::collection::vec(-2i8..=2, 30),
        perm_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let items = common::items(3, &["GT", "A", "B"], Protocol::BodyDyadic, 4);
        let ratings: Vec<_> = values.iter().enumerate()
            .map(|(k, &v)| rating(&items[k % items.len()], k / items.len(), 1 + (k % 2) as u8, v))
            .collect();
        let mut shuffled = ratings.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));
        let a = aggregate(&ratings, &items).unwrap();
        let b = aggregate(&shuffled, &items).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn flipping_layout_negates_nothing_after_canonicalisation(v in -2i8..=2) {
        let left = pair_items(1, true);
        let right = pair_items(1, false);
        let a = aggregate(&[rating(&left[0], 0, 1, v)], &left).unwrap();
        let b = aggregate(&[rating(&right[0], 0, 1, -v)], &right).unwrap();
        prop_assert_eq!(a.matchups[0].dimensions[0].mean, b.matchups[0].dimensions[0].mean);
    }
}
