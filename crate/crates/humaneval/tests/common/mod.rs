#![allow(dead_code)]

use std::collections::BTreeMap;

use dyadic_humaneval::{build_items, Protocol, SampleMedia, Speaker, Study, StudyConfig, StudyItem, VadSegment};

pub fn systems(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn samples(n: usize, systems: &[String]) -> Vec<SampleMedia> {
    (0..n)
        .map(|i| SampleMedia {
            sample_id: format!("s{i:03}"),
            anchor: format!("anchor/s{i:03}.mp4"),
            candidates: systems.iter().map(|s| (s.clone(), format!("{s}/s{i:03}.mp4"))).collect::<BTreeMap<_, _>>(),
            vad_segments: vec![VadSegment { speaker: Speaker::Anchor, start_s: 0.0, end_s: 1.5 }],
        })
        .collect()
}

pub fn items(n_samples: usize, names: &[&str], protocol: Protocol, seed: u64) -> Vec<StudyItem> {
    let sys = systems(names);
    build_items(&samples(n_samples, &sys), &sys, protocol, seed).unwrap()
}

pub fn study(n_samples: usize, names: &[&str], ratings_per_item: usize) -> Study {
    let mut cfg = StudyConfig::new("demo", Protocol::BodyDyadic, 7);
    cfg.ratings_per_item = ratings_per_item;
    Study::new(cfg, items(n_samples, names, Protocol::BodyDyadic, 7)).unwrap()
}
