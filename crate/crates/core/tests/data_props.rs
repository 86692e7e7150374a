use drawpass_core::data::{
    export_dataset, generate_synthetic, generate_synthetic_with_truth, import_dataset,
    load_dataset, make_split, DataError, Dataset, DelimitedSpec, FormatSpec, Provenance, SplitSpec,
    StrokeRule, SynthConfig,
};
use drawpass_core::evalproto::{run_protocol, ProtocolConfig, Scorer, ScorerKind};
use drawpass_core::signal::{prepare, Point, SampleSource, StrokeSample};
use drawpass_core::{dtw_multichannel, DtwConfig};
use std::collections::BTreeMap;
use std::path::Path;

fn sample(user: &str, label: &str, session: u32, rep: u32, times: &[f64]) -> StrokeSample {
    let pts: Vec<Point> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| Point::new(10.0 + 3.5 * i as f64, 20.0 - 0.25 * (i * i) as f64, t))
        .collect();
    let (a, b) = pts.split_at(pts.len() / 2);
    StrokeSample {
        user_id: user.into(),
        session,
        label: label.into(),
        repetition: rep,
        source: SampleSource::Imported,
        strokes: vec![a.to_vec(), b.to_vec()],
    }
}

fn times(n: usize) -> Vec<f64> {
    (0..n).map(|i| 10.0 * i as f64 + 0.1).collect()
}

fn fixture() -> Dataset {
    Dataset::new(
        vec![
            sample("u1", "3", 1, 1, &times(8)),
            sample("u1", "3", 2, 1, &times(9)),
            sample("u2", "A", 1, 2, &times(10)),
        ],
        Provenance {
            source_paths: vec!["fixture".into()],
            format: "canonical".into(),
            format_version: 1,
            options: serde_json::json!({"note": "constructed"}),
            content_digest: String::new(),
        },
    )
    .unwrap()
}

#[test]
fn canonical_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sub/fixture.jsonl");
    let ds = fixture();
    export_dataset(&ds, &path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.provenance, ds.provenance);

    let again = dir.path().join("again.jsonl");
    export_dataset(&back, &again).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&again).unwrap()
    );

    let report = import_dataset(&path, &FormatSpec::Canonical).unwrap();
    assert_eq!(report.dataset.samples(), ds.samples());
    assert_eq!(
        report.dataset.provenance.content_digest,
        ds.provenance.content_digest
    );
    assert_eq!(report.summary.imported, 3);
    assert!(report.summary.quarantined.is_empty());
}

#[test]
fn disordered_timestamps_are_quarantined() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mixed.jsonl");
    let good = Dataset::new(
        vec![
            sample("u1", "3", 1, 1, &times(8)),
            sample("u2", "3", 1, 1, &times(8)),
        ],
        Provenance::default(),
    )
    .unwrap();
    export_dataset(&good, &path).unwrap();
    let mut t = times(8);
    t.swap(3, 4);
    let bad = sample("u3", "3", 1, 1, &t);
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str(&serde_json::to_string(&bad).unwrap());
    text.push('\n');
    std::fs::write(&path, text).unwrap();

    let r = import_dataset(&path, &FormatSpec::Canonical).unwrap();
    assert_eq!(r.summary.parsed, 3);
    assert_eq!(r.summary.imported, 2);
    assert_eq!(r.summary.quarantined.len(), 1);
    assert_eq!(r.summary.quarantined[0].reason, "timestamp disorder");
    assert!(
        r.summary.quarantined[0].source.ends_with(":4"),
        "{}",
        r.summary.quarantined[0].source
    );
    assert_eq!(r.dataset.users(), vec!["u1", "u2"]);
    // the strict loader refuses the file outright
    assert!(load_dataset(&path).is_err());
}

#[test]
fn duplicates_and_malformed_lines_are_quarantined() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    export_dataset(&fixture(), &a).unwrap();
    export_dataset(&fixture(), &b).unwrap();
    let mut text = std::fs::read_to_string(&b).unwrap();
    text.push_str("{not json}\n");
    std::fs::write(&b, text).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();

    let r = import_dataset(dir.path(), &FormatSpec::Canonical).unwrap();
    let s = &r.summary;
    assert_eq!(s.files_scanned, 3);
    assert_eq!(s.files_skipped, 1);
    assert_eq!(s.parsed, 7);
    assert_eq!(s.imported, 3);
    assert_eq!(s.imported + s.quarantined.len(), s.parsed);
    let reasons: Vec<&str> = s.quarantined.iter().map(|q| q.reason.as_str()).collect();
    assert_eq!(reasons.iter().filter(|r| **r == "duplicate key").count(), 3);
    assert_eq!(reasons.iter().filter(|r| **r == "parse error").count(), 1);
    assert_eq!(r.inputs.len(), 3);
}

#[test]
fn empty_directory_gives_empty_dataset_and_warning() {
    let dir = tempfile::tempdir().unwrap();
    let r = import_dataset(dir.path(), &FormatSpec::Canonical).unwrap();
    assert!(r.dataset.is_empty());
    assert_eq!(r.summary.parsed, 0);
    assert!(r.summary.warnings.iter().any(|w| w.contains("no samples")));
}

#[test]
fn unreadable_path_is_an_error() {
    let err =
        import_dataset(Path::new("/nonexistent/drawpass"), &FormatSpec::Canonical).unwrap_err();
    assert!(matches!(err, DataError::Io { .. }));
}

fn write_rows(path: &Path, rows: &[&str]) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, rows.join("\n") + "\n").unwrap();
}

fn manual_spec() -> DelimitedSpec {
    DelimitedSpec {
        delimiter: Some(';'),
        skip_lines: 1,
        comment_prefix: Some("#".into()),
        x_column: 1,
        y_column: 2,
        t_column: 0,
        time_scale: 1000.0,
        stroke: StrokeRule::PenUp {
            column: 3,
            up_value: 0.0,
        },
        path_pattern: r"(?P<user>u\d+)/(?P<label>[a-z]+)_(?P<repetition>\d+)\.csv$".into(),
        repetitions_per_session: Some(2),
        label_map: BTreeMap::from([("seven".to_string(), "7".to_string())]),
        verified: true,
    }
}

#[test]
fn delimited_mapping_recovers_keys_and_strokes() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = vec!["t;x;y;pen"];
    let body: Vec<String> = (0..12)
        .map(|i| {
            let pen = if i == 6 { 0 } else { 1 };
            format!("{};{};{};{pen}", 0.01 * i as f64, 5 * i, 100 - 2 * i)
        })
        .collect();
    rows.push("# comment line");
    rows.extend(body.iter().map(String::as_str));
    for rep in 1..=3 {
        write_rows(&dir.path().join(format!("u7/seven_{rep}.csv")), &rows);
    }
    write_rows(&dir.path().join("u7/readme.md"), &["not data"]);

    let r = import_dataset(dir.path(), &FormatSpec::Delimited(manual_spec())).unwrap();
    assert_eq!(r.summary.imported, 3);
    assert_eq!(r.summary.files_skipped, 1);
    assert_eq!(r.summary.rows_without_ink, 3);
    let s = r.dataset.samples();
    assert_eq!(s[0].user_id, "u7");
    assert_eq!(s[0].label, "7");
    assert_eq!(
        s.iter()
            .map(|s| (s.session, s.repetition))
            .collect::<Vec<_>>(),
        vec![(1, 1), (1, 2), (2, 3)]
    );
    assert_eq!(s[0].strokes.len(), 2);
    assert_eq!(s[0].point_count(), 11);
    assert_eq!(s[0].strokes[1][0], Point::new(35.0, 86.0, 70.0));
}

#[test]
fn delimited_pattern_without_user_group_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = DelimitedSpec {
        path_pattern: r"(?P<label>\w)\.csv".into(),
        ..manual_spec()
    };
    let err = import_dataset(dir.path(), &FormatSpec::Delimited(spec)).unwrap_err();
    assert!(matches!(err, DataError::Schema(_)));
}

#[test]
fn presets_are_flagged_unverified() {
    let dir = tempfile::tempdir().unwrap();
    let r = import_dataset(dir.path(), &FormatSpec::ebiodigit()).unwrap();
    assert!(r.summary.warnings.iter().any(|w| w.contains("unverified")));
    assert!(matches!(
        FormatSpec::resolve("mobiletouch").unwrap(),
        FormatSpec::Delimited(_)
    ));
}

fn users_dataset(n: usize, sessions: u32) -> Dataset {
    generate_synthetic(&SynthConfig {
        n_users: n,
        characters: vec!["0".into()],
        sessions,
        samples_per_cell: 1,
        ..SynthConfig::easy(1)
    })
    .unwrap()
}

#[test]
fn ten_users_split_eight_two() {
    let ds = users_dataset(10, 2);
    let spec = SplitSpec::Fraction {
        dev_fraction: 1.0,
        required_sessions: vec![],
        train_fraction: 0.8,
    };
    let s = make_split(&ds, &spec, 42).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.eval.len()), (8, 2, 0));
    assert!(s.train.iter().all(|u| !s.val.contains(u)));
    assert_eq!(make_split(&ds, &spec, 42).unwrap(), s);
    assert_ne!(make_split(&ds, &spec, 43).unwrap().val, s.val);
}

#[test]
fn ebiodigit_split_takes_first_fifty() {
    let ds = users_dataset(93, 2);
    let s = make_split(&ds, &SplitSpec::ebiodigit(), 0).unwrap();
    let users = ds.users();
    assert_eq!(s.dev().len(), 50);
    assert_eq!(s.eval, users[50..].to_vec());
    let mut dev = s.dev();
    dev.sort();
    let mut want = users[..50].to_vec();
    want.sort();
    assert_eq!(dev, want);
}

#[test]
fn eval_users_need_every_required_session() {
    let full = users_dataset(6, 3);
    // drop session 3 of u005
    let kept: Vec<StrokeSample> = full
        .samples()
        .iter()
        .filter(|s| !(s.user_id == "u005" && s.session == 3))
        .cloned()
        .collect();
    let ds = Dataset::new(kept, Provenance::default()).unwrap();
    let spec = SplitSpec::ById {
        dev: 2,
        eval: None,
        required_sessions: vec![1, 2, 3],
        train_fraction: 0.5,
    };
    let s = make_split(&ds, &spec, 0).unwrap();
    assert_eq!(s.eval, vec!["u003", "u004", "u006"]);
    assert_eq!(s.excluded, vec!["u005"]);
    let capped = SplitSpec::ById {
        dev: 2,
        eval: Some(4),
        required_sessions: vec![1, 2, 3],
        train_fraction: 0.5,
    };
    assert!(make_split(&ds, &capped, 0).is_err());
}

#[test]
fn synthetic_generation_is_deterministic() {
    let cfg = SynthConfig {
        n_users: 5,
        ..SynthConfig::moderate(17)
    };
    let a = generate_synthetic(&cfg).unwrap();
    let b = generate_synthetic(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), cfg.sample_count());
    let c = generate_synthetic(&SynthConfig {
        seed: 18,
        ..cfg.clone()
    })
    .unwrap();
    assert_ne!(a.provenance.content_digest, c.provenance.content_digest);
    let dir = tempfile::tempdir().unwrap();
    export_dataset(&a, &dir.path().join("a.jsonl")).unwrap();
    export_dataset(&b, &dir.path().join("b.jsonl")).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("a.jsonl")).unwrap(),
        std::fs::read(dir.path().join("b.jsonl")).unwrap()
    );
}

#[test]
fn noiseless_samples_are_exact_copies() {
    let cfg = SynthConfig {
        n_users: 3,
        intra_user_noise: 0.0,
        session_drift: 0.0,
        sensor_jitter: 1.0,
        time_warp: 4.0,
        ..SynthConfig::easy(2)
    };
    let ds = generate_synthetic(&cfg).unwrap();
    for u in ds.users() {
        for l in ds.labels() {
            let cell = ds.user_label(&u, &l);
            let first = prepare(cell[0], 100.0).unwrap();
            for s in &cell[1..] {
                let d = dtw_multichannel(&first, &prepare(s, 100.0).unwrap(), &DtwConfig::plain())
                    .unwrap();
                assert_eq!(d.normalized_distance, 0.0);
            }
        }
    }
}

#[test]
fn truth_orders_users_by_spread() {
    let cfg = SynthConfig {
        n_users: 4,
        ..SynthConfig::easy(3)
    };
    let (ds, truth) = generate_synthetic_with_truth(&cfg).unwrap();
    assert_eq!(truth.prototype_distance("u001", "u001", "3"), Some(0.0));
    let d = truth.prototype_distance("u001", "u002", "3").unwrap();
    assert!(d > 0.0);
    assert!(truth.prototype_distance("u001", "nobody", "3").is_none());
    let zero = SynthConfig {
        inter_user_spread: 0.0,
        ..cfg
    };
    let (_, t0) = generate_synthetic_with_truth(&zero).unwrap();
    assert_eq!(t0.prototype_distance("u001", "u002", "3"), Some(0.0));
    assert_eq!(ds.len(), 4 * 10 * 2 * 2);
}

fn dtw_average_eer(cfg: &SynthConfig) -> f64 {
    let ds = generate_synthetic(cfg).unwrap();
    let r = run_protocol(
        &ds,
        &Scorer::build(ScorerKind::Dtw, None).unwrap(),
        &ProtocolConfig::basic(ScorerKind::Dtw),
    )
    .unwrap();
    r.average_eer
}

#[test]
fn wide_user_spread_is_separable_by_dtw() {
    let eer = dtw_average_eer(&SynthConfig {
        n_users: 30,
        inter_user_spread: 0.3,
        intra_user_noise: 0.01,
        session_drift: 0.005,
        ..SynthConfig::easy(2024)
    });
    assert!(eer < 0.02, "DTW EER {eer}");
}

#[test]
fn zero_user_spread_leaves_no_identity_signal() {
    let eer = dtw_average_eer(&SynthConfig {
        n_users: 30,
        inter_user_spread: 0.0,
        ..SynthConfig::easy(2025)
    });
    assert!((eer - 0.5).abs() <= 0.05, "DTW EER {eer}");
}
