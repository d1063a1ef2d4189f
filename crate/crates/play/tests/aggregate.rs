//! Study aggregation over synthetic session logs.

use std::collections::BTreeMap;
use std::path::Path;

use ramhack::metrics::{human_aggregate, performance_change, ReferenceEntry, ReferenceScores};
use ramhack_play::study::{SessionLog, SessionLogRow};
use ramhack_play::{aggregate_study, Phase, Study};

fn write_session(dir: &Path, token: &str, eval1: &[i32], eval2: &[i32], complete: bool) {
    let mut log = SessionLog::open(dir, token).unwrap();
    let mut put = |phase, scores: &[i32]| {
        for (i, &score) in scores.iter().enumerate() {
            log.append(&SessionLogRow {
                token: token.into(),
                phase,
                episode: i as u32,
                score,
                steps: 100,
                timestamp: "2026-01-01T00:00:00Z".into(),
            })
            .unwrap();
        }
    };
    put(Phase::Train, &[-21, -3]);
    put(Phase::Eval1, eval1);
    put(Phase::Eval2, eval2);
    if complete {
        log.mark(true).unwrap();
    }
}

fn refs() -> ReferenceScores {
    let mut r = ReferenceScores::new();
    for (variant, random) in [("original", -7.0), ("lazy_enemy", -9.0)] {
        r.insert(ReferenceEntry {
            game: "paddleball".into(),
            variant: variant.into(),
            random,
            human: None,
            source: "in_house_random".into(),
        });
    }
    r
}

#[test]
fn two_sessions_match_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let study = Study::parse("token,game,variant\np1,paddleball,lazy_enemy\np2,paddleball,lazy_enemy\np3,paddleball,lazy_enemy\np4,crossing,stop_all_cars\n").unwrap();
    write_session(dir.path(), "p1", &[1, 2, 3, 4, 5, 6, 7, 8], &[0, 10, 20, 100], true);
    write_session(dir.path(), "p2", &[10, 10], &[-5], true);
    write_session(dir.path(), "p3", &[50], &[], false);
    let report = aggregate_study(dir.path(), &study, &refs()).unwrap();
    assert_eq!(report.excluded, 1);
    assert_eq!(report.cells.len(), 1);
    let cell = &report.cells[0];
    assert_eq!((cell.game.as_str(), cell.variant.as_str(), cell.participants), ("paddleball", "lazy_enemy", 2));
    // eval1: IQMs 4.5 and 10 → 7.25; eval2: IQMs 15 and −5 → 5.
    assert_eq!(cell.eval1, 7.25);
    assert_eq!(cell.eval2, 5.0);
    let mut e1 = BTreeMap::new();
    e1.insert("p1".to_string(), (1..=8).map(f64::from).collect::<Vec<_>>());
    e1.insert("p2".to_string(), vec![10.0, 10.0]);
    assert_eq!(cell.eval1, human_aggregate(&e1).unwrap());
    let pc = performance_change(5.0, -9.0, 7.25, -7.0).unwrap();
    assert_eq!(cell.performance_change, Some(pc));
}

#[test]
fn constant_single_participant() {
    let dir = tempfile::tempdir().unwrap();
    let study = Study::parse("token,game,variant\nsolo,paddleball,lazy_enemy\n").unwrap();
    write_session(dir.path(), "solo", &[3, 3, 3], &[3, 3], true);
    let report = aggregate_study(dir.path(), &study, &refs()).unwrap();
    assert_eq!((report.cells[0].eval1, report.cells[0].eval2), (3.0, 3.0));
    assert_eq!(report.excluded, 0);
    // Without baselines the change is left undefined.
    let bare = aggregate_study(dir.path(), &study, &ReferenceScores::new()).unwrap();
    assert_eq!(bare.cells[0].performance_change, None);
}
