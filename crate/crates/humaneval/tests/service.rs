mod common;

use std::collections::{BTreeSet, HashSet};

use dyadic_humaneval::{
    read_events, Event, FlagCategory, FlagRecord, Protocol, RatingRecord, Study, StudyConfig, StudyError, StudyItem,
    StudyService,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn register(study: &mut Study, rater: &str) {
    study.apply(&Event::RaterRegistered { rater_id: rater.into(), timestamp: 0 }).unwrap();
}

fn full_rating(item: &StudyItem, rater: &str, value: i8) -> Vec<Event> {
    item.protocol
        .dimensions()
        .iter()
        .map(|d| {
            Event::Rating(RatingRecord {
                item_id: item.item_id.clone(),
                rater_id: rater.into(),
                dimension_id: d.id,
                value,
                timestamp: 1,
                flags: BTreeSet::new(),
            })
        })
        .collect()
}

fn rate(study: &mut Study, item: &StudyItem, rater: &str, value: i8) {
    for e in full_rating(item, rater, value) {
        study.apply(&e).unwrap();
    }
}

fn flag(item: &StudyItem, rater: &str, categories: &[FlagCategory], note: Option<&str>) -> Event {
    Event::Flag(FlagRecord {
        item_id: item.item_id.clone(),
        rater_id: rater.into(),
        categories: categories.iter().copied().collect(),
        note: note.map(str::to_string),
        timestamp: 2,
    })
}

#[test]
fn fresh_study_serves_an_unrated_item() {
    let mut s = common::study(3, &["GT", "A", "B"], 5);
    register(&mut s, "r1");
    let item = s.next_item("r1").unwrap().unwrap();
    assert_eq!(s.completed_ratings(&item.item_id), 0);
    // Asking again before rating returns the same outstanding item.
    assert_eq!(s.next_item("r1").unwrap().unwrap(), item);
}

#[test]
fn unknown_rater_is_an_auth_error() {
    let mut s = common::study(1, &["A", "B"], 5);
    assert!(matches!(s.next_item("ghost"), Err(StudyError::Auth(_))));
    let item = s.items()[0].clone();
    let err = s.apply(&full_rating(&item, "ghost", 1)[0]).unwrap_err();
    assert!(matches!(err, StudyError::Auth(_)));
}

#[test]
fn rater_who_rated_everything_gets_none() {
    let mut s = common::study(2, &["A", "B"], 5);
    register(&mut s, "r1");
    for _ in 0..2 {
        let item = s.next_item("r1").unwrap().unwrap();
        rate(&mut s, &item, "r1", 1);
    }
    assert_eq!(s.next_item("r1").unwrap(), None);
}

#[test]
fn item_with_full_quota_is_never_served() {
    let mut s = common::study(1, &["A", "B"], 5);
    for r in 0..6 {
        register(&mut s, &format!("r{r}"));
    }
    for r in 0..5 {
        let rater = format!("r{r}");
        let item = s.next_item(&rater).unwrap().unwrap();
        rate(&mut s, &item, &rater, 0);
    }
    assert_eq!(s.completed_ratings(&s.items()[0].item_id.clone()), 5);
    assert!(s.is_complete());
    assert_eq!(s.next_item("r5").unwrap(), None);
}

#[test]
fn outstanding_assignments_count_towards_the_cap() {
    let mut s = common::study(1, &["A", "B"], 2);
    for r in 0..3 {
        register(&mut s, &format!("r{r}"));
    }
    assert!(s.next_item("r0").unwrap().is_some());
    assert!(s.next_item("r1").unwrap().is_some());
    assert_eq!(s.next_item("r2").unwrap(), None);
}

#[test]
fn fewest_ratings_first() {
    let mut s = common::study(3, &["A", "B"], 5);
    for r in 0..3 {
        register(&mut s, &format!("r{r}"));
    }
    let served: HashSet<String> = (0..3).map(|r| s.next_item(&format!("r{r}")).unwrap().unwrap().item_id).collect();
    assert_eq!(served.len(), 3);
}

#[test]
fn out_of_range_value_is_rejected() {
    let mut s = common::study(1, &["A", "B"], 5);
    register(&mut s, "r1");
    let item = s.items()[0].clone();
    for v in [3, -3] {
        let mut e = full_rating(&item, "r1", 0).remove(0);
        if let Event::Rating(r) = &mut e {
            r.value = v;
        }
        assert!(matches!(s.apply(&e), Err(StudyError::Validation(_))));
    }
    // Dimension 11 exists only in the face protocol.
    let mut e = full_rating(&item, "r1", 0).remove(0);
    if let Event::Rating(r) = &mut e {
        r.dimension_id = 11;
    }
    assert!(matches!(s.apply(&e), Err(StudyError::Validation(_))));
}

#[test]
fn duplicate_submission_is_one_effective_record_with_audit() {
    let mut s = common::study(1, &["A", "B"], 5);
    register(&mut s, "r1");
    let item = s.items()[0].clone();
    rate(&mut s, &item, "r1", 1);
    rate(&mut s, &item, "r1", 1);
    let e = full_rating(&item, "r1", -2).remove(0);
    s.apply(&e).unwrap();
    let eff = s.effective_ratings();
    assert_eq!(eff.len(), Protocol::BodyDyadic.dimensions().len());
    assert_eq!(eff.iter().find(|r| r.dimension_id == 1).unwrap().value, -2);
    assert_eq!(s.audit().len(), 11);
    assert_eq!(s.audit().last().unwrap().previous.value, 1);
    assert_eq!(s.completed_ratings(&item.item_id), 1);
}

#[test]
fn other_flag_requires_a_note() {
    let mut s = common::study(1, &["A", "B"], 5);
    register(&mut s, "r1");
    let item = s.items()[0].clone();
    for note in [None, Some("  ")] {
        let err = s.apply(&flag(&item, "r1", &[FlagCategory::Other], note)).unwrap_err();
        assert!(matches!(err, StudyError::Validation(_)), "{err}");
    }
    assert!(matches!(s.apply(&flag(&item, "r1", &[], None)), Err(StudyError::Validation(_))));
    s.apply(&flag(&item, "r1", &[FlagCategory::Other], Some("avatar clips through the chair"))).unwrap();
    assert_eq!(s.flags().len(), 1);
}

#[test]
fn flagged_judgement_is_excluded_and_item_requeued() {
    let mut s = common::study(1, &["A", "B"], 1);
    for r in ["r1", "r2"] {
        register(&mut s, r);
    }
    let item = s.next_item("r1").unwrap().unwrap();
    rate(&mut s, &item, "r1", 2);
    assert_eq!(s.next_item("r2").unwrap(), None);
    s.apply(&flag(&item, "r1", &[FlagCategory::VideoFreezes], None)).unwrap();
    assert!(s.effective_ratings().is_empty());
    assert_eq!(s.completed_ratings(&item.item_id), 0);
    // The slot is free again, for another rater only.
    assert_eq!(s.next_item("r1").unwrap(), None);
    assert_eq!(s.next_item("r2").unwrap().unwrap().item_id, item.item_id);
    // The flagging rater cannot rate it any more.
    assert!(matches!(s.apply(&full_rating(&item, "r1", 0)[0]), Err(StudyError::Validation(_))));
}

#[test]
fn repeatedly_flagged_item_is_withdrawn() {
    let mut s = common::study(2, &["A", "B"], 5);
    for r in 0..4 {
        register(&mut s, &format!("r{r}"));
    }
    let item = s.items()[0].clone();
    rate(&mut s, &item, "r3", 1);
    for r in 0..3 {
        s.apply(&flag(&item, &format!("r{r}"), &[FlagCategory::Violent], None)).unwrap();
    }
    assert!(s.is_withdrawn(&item.item_id));
    assert!(s.effective_ratings().is_empty());
    let served = s.next_item("r3").unwrap().unwrap();
    assert_ne!(served.item_id, item.item_id);
}

#[test]
fn rating_with_flags_withdraws_that_judgement() {
    let mut s = common::study(1, &["A", "B"], 5);
    register(&mut s, "r1");
    let item = s.items()[0].clone();
    let mut e = full_rating(&item, "r1", 1).remove(0);
    if let Event::Rating(r) = &mut e {
        r.flags.insert(FlagCategory::AudioCutOut);
    }
    s.apply(&e).unwrap();
    assert!(s.effective_ratings().is_empty());
}

/// Simulated raters with random drop-out and flagging.
fn simulate(svc: &StudyService, raters: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut served = Vec::new();
    for r in 0..raters {
        let rater = format!("rater{r:04}");
        svc.register(&rater, r as u64).unwrap();
        let budget = rng.random_range(1..=8);
        for _ in 0..budget {
            let Some(item) = svc.next_item(&rater).unwrap() else { break };
            served.push((rater.clone(), item.item_id.clone()));
            if rng.random_bool(0.03) {
                let cats = [FlagCategory::AudioDistorted];
                let f = FlagRecord {
                    item_id: item.item_id,
                    rater_id: rater.clone(),
                    categories: cats.into_iter().collect(),
                    note: None,
                    timestamp: 0,
                };
                svc.record_flag(f).unwrap();
                continue;
            }
            let v = rng.random_range(-2..=2);
            let recs = full_rating(&item, &rater, v)
                .into_iter()
                .map(|e| match e {
                    Event::Rating(r) => r,
                    _ => unreachable!(),
                })
                .collect();
            svc.record_ratings(recs).unwrap();
        }
    }
    served
}

#[test]
fn thousand_raters_never_see_an_item_twice() {
    let cfg = StudyConfig::new("sim", Protocol::FaceDyadic, 3);
    let items = common::items(61, &["GT", "A", "B", "C", "D"], Protocol::FaceDyadic, 3);
    let svc = StudyService::in_memory(Study::new(cfg, items).unwrap());
    let served = simulate(&svc, 1000, 99);
    let mut seen = HashSet::new();
    for pair in &served {
        assert!(seen.insert(pair.clone()), "{pair:?} served twice");
    }
    svc.read(|s| {
        for it in s.items() {
            assert!(s.completed_ratings(&it.item_id) <= 5, "{} over quota", it.item_id);
        }
        // ~4500 servings against 3050 slots: the study fills up.
        assert!(s.is_complete());
    });
}

#[test]
fn replaying_the_log_reproduces_aggregates_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("study.jsonl");
    let cfg = StudyConfig::new("replay", Protocol::BodyDyadic, 5);
    let items = common::items(10, &["GT", "A", "B", "C"], Protocol::BodyDyadic, 5);
    let svc = StudyService::create(&path, cfg, items).unwrap();
    simulate(&svc, 60, 4);
    // A rejected event must not reach the log.
    assert!(svc.register("", 0).is_err());
    let live = svc.results().unwrap();
    let live_audit = svc.read(|s| s.audit().to_vec());
    drop(svc);

    let events = read_events(&path).unwrap();
    assert!(matches!(events[0], Event::StudyCreated { .. }));
    let replayed = StudyService::open(&path).unwrap();
    let again = replayed.results().unwrap();
    assert_eq!(serde_json::to_vec(&live).unwrap(), serde_json::to_vec(&again).unwrap());
    for (a, b) in live.item_means.iter().zip(&again.item_means) {
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }
    assert_eq!(replayed.read(|s| s.audit().to_vec()), live_audit);
}

#[test]
fn creating_over_an_existing_log_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("study.jsonl");
    let cfg = StudyConfig::new("x", Protocol::BodyDyadic, 0);
    let items = common::items(1, &["A", "B"], Protocol::BodyDyadic, 0);
    StudyService::create(&path, cfg.clone(), items.clone()).unwrap();
    assert!(matches!(StudyService::create(&path, cfg, items), Err(StudyError::Io(_))));
}

#[test]
fn batch_with_one_bad_record_writes_nothing() {
    let cfg = StudyConfig::new("x", Protocol::BodyDyadic, 0);
    let svc = StudyService::in_memory(Study::new(cfg, common::items(1, &["A", "B"], Protocol::BodyDyadic, 0)).unwrap());
    svc.register("r1", 0).unwrap();
    let item = svc.read(|s| s.items()[0].clone());
    let mut recs: Vec<RatingRecord> = full_rating(&item, "r1", 1)
        .into_iter()
        .map(|e| match e {
            Event::Rating(r) => r,
            _ => unreachable!(),
        })
        .collect();
    recs[4].value = 9;
    assert!(matches!(svc.record_ratings(recs), Err(StudyError::Validation(_))));
    assert!(svc.read(|s| s.effective_ratings().is_empty()));
}
