use std::io::Write;

use cfee::dataset::{export_dataset, feature_count, parse_dataset, read_dataset, sample_seed, DatasetError};
use cfee::predictions::{evaluate_predictions, parse_predictions, read_predictions, save_predictions, PredictionError, PredictionRecord};
use cfee::ConfigFile;
use cfee_core::{run_algorithm1, sample_scenario, AlgorithmOptions, BeamMatrix, PhaseVector, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small() -> ScenarioConfig {
    ScenarioConfig::with_dims(3, 2, 1, 4)
}

#[test]
fn feature_count_formula() {
    assert_eq!(feature_count(4, 2, 16), 272);
    assert_eq!(feature_count(13, 3, 100), 2 * 13 * 100 * 3 + 2 * 13 * 3);
}

#[test]
fn two_sample_file_has_header_and_two_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let cfg = ScenarioConfig::desk();
    let header = export_dataset(&cfg, 2, 9, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(header.feature_count, 272);
    let data = read_dataset(&path).unwrap();
    assert_eq!(data.header, header);
    assert_eq!(data.samples.len(), 2);
    for s in &data.samples {
        assert_eq!((s.num_aps(), s.num_users(), s.num_elements()), (4, 2, 16));
    }
    let echoed = data.scenario().unwrap();
    assert_eq!(echoed.num_irs, 2);
    assert_eq!(echoed.ap_user.rician_db, f64::NEG_INFINITY);
}

#[test]
fn round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let cfg = small();
    export_dataset(&cfg, 5, 123, &path).unwrap();
    let data = read_dataset(&path).unwrap();
    for (i, s) in data.samples.iter().enumerate() {
        let fresh = sample_scenario(&cfg, sample_seed(123, i)).unwrap();
        let bits = |m: &cfee_core::CMatrix| m.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
        assert_eq!(bits(&s.direct), bits(&fresh.direct));
        for (a, b) in s.cascaded.iter().zip(&fresh.cascaded) {
            assert_eq!(bits(a), bits(b));
        }
    }
}

#[test]
fn same_seed_same_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    export_dataset(&small(), 3, 4, &a).unwrap();
    export_dataset(&small(), 3, 4, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn zero_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(export_dataset(&small(), 0, 0, &dir.path().join("x")), Err(DatasetError::EmptyRequest)));
}

fn dataset_text(count: usize) -> String {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    export_dataset(&small(), count, 1, &path).unwrap();
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn malformed_records_name_the_sample() {
    let text = dataset_text(3);
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // drop one AP column from sample 1
    let mut rec: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    rec["g_au"][0].as_array_mut().unwrap().pop();
    lines[2] = rec.to_string();
    let err = parse_dataset(lines.join("\n").as_bytes(), "d".as_ref()).unwrap_err();
    match err {
        DatasetError::Record { sample_index, message, .. } => {
            assert_eq!(sample_index, 1);
            assert!(message.contains("g_au"), "{message}");
        }
        other => panic!("{other}"),
    }
}

#[test]
fn truncated_and_garbled_files_are_errors() {
    let text = dataset_text(3);
    let lines: Vec<&str> = text.lines().collect();
    let short = lines[..3].join("\n");
    assert!(matches!(
        parse_dataset(short.as_bytes(), "d".as_ref()),
        Err(DatasetError::Count { expected: 3, found: 2, .. })
    ));
    let garbled = format!("{}\n{{not json\n", lines[0]);
    assert!(matches!(parse_dataset(garbled.as_bytes(), "d".as_ref()), Err(DatasetError::Json { line: 2, .. })));
    assert!(matches!(parse_dataset("".as_bytes(), "d".as_ref()), Err(DatasetError::Header { .. })));
    let mut header: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    header["feature_count"] = 7.into();
    let bad = format!("{}\n{}", header, lines[1..].join("\n"));
    assert!(matches!(parse_dataset(bad.as_bytes(), "d".as_ref()), Err(DatasetError::Header { .. })));
}

#[test]
fn prediction_layout_matches_beam_genes() {
    let w = BeamMatrix(cfee_core::CMatrix::from_fn(2, 3, |m, k| cfee_core::C64::new((m * 3 + k) as f64, -((m * 3 + k) as f64) - 0.5)));
    let rec = PredictionRecord::new(0, &w, &PhaseVector::zeros(2));
    assert_eq!(&rec.w_re_im[..6], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    assert_eq!(&rec.w_re_im[6..], &[-0.5, -1.5, -2.5, -3.5, -4.5, -5.5]);
    let json = serde_json::to_string(&rec).unwrap();
    assert!(json.contains("\"W_re_im\""));
    let lower: PredictionRecord = serde_json::from_str(&json.replace("W_re_im", "w_re_im")).unwrap();
    assert_eq!(lower, rec);
}

#[test]
fn stored_algorithm_solutions_evaluate_to_their_ee() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("d.jsonl");
    let cfg = ScenarioConfig::desk();
    export_dataset(&cfg, 6, 77, &ds).unwrap();
    let data = read_dataset(&ds).unwrap();
    let sols: Vec<_> = data
        .samples
        .iter()
        .enumerate()
        .map(|(i, ch)| run_algorithm1(ch, &cfg, &AlgorithmOptions::default(), i as u64))
        .collect();
    let preds: Vec<PredictionRecord> = sols.iter().enumerate().rev().map(|(i, s)| PredictionRecord::new(i, &s.w, &s.v)).collect();
    let pp = dir.path().join("p.jsonl");
    save_predictions(&pp, &preds).unwrap();
    let report = evaluate_predictions(&data, &read_predictions(&pp).unwrap(), &data.scenario().unwrap()).unwrap();
    for (score, sol) in report.scores.iter().zip(&sols) {
        assert!((score.raw.ee - sol.ee).abs() <= 1e-9 * sol.ee, "{} vs {}", score.raw.ee, sol.ee);
        assert_eq!(score.raw.feasible, sol.report.feasible);
        assert_eq!(score.projected.ee, score.raw.ee);
    }
}

#[test]
fn zero_beams_score_zero_and_violate_rates() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("d.jsonl");
    let cfg = small();
    export_dataset(&cfg, 4, 3, &ds).unwrap();
    let data = read_dataset(&ds).unwrap();
    let preds: Vec<PredictionRecord> = (0..4)
        .map(|i| PredictionRecord {
            sample_index: i,
            theta: vec![0.3; 4],
            w_re_im: vec![0.0; 12],
        })
        .collect();
    let report = evaluate_predictions(&data, &preds, &cfg).unwrap();
    for s in &report.scores {
        assert_eq!(s.raw.ee, 0.0);
        assert!(!s.raw.rates_ok);
        assert!(!s.raw.feasible);
        // 0 - beta1 * K * r_min
        assert!((s.raw.penalized + 100.0).abs() < 1e-12);
    }
    assert_eq!(report.raw.feasible_fraction, 0.0);
}

#[test]
fn projection_is_reported_separately() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("d.jsonl");
    let cfg = small();
    export_dataset(&cfg, 1, 3, &ds).unwrap();
    let data = read_dataset(&ds).unwrap();
    let preds = vec![PredictionRecord {
        sample_index: 0,
        theta: vec![0.0; 4],
        w_re_im: vec![2.0; 12],
    }];
    let s = &evaluate_predictions(&data, &preds, &cfg).unwrap().scores[0];
    assert!(!s.raw.power_ok);
    assert!(s.projected.power_ok);
    assert!(s.raw.penalized < s.raw.ee);
}

#[test]
fn optimized_predictions_beat_random_ones() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("d.jsonl");
    let cfg = ScenarioConfig::desk();
    export_dataset(&cfg, 100, 5, &ds).unwrap();
    let data = read_dataset(&ds).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let genes = 2 * cfg.num_aps * cfg.num_users;
    let scale = (cfg.p_max / cfg.num_users as f64).sqrt();
    let random: Vec<PredictionRecord> = (0..100)
        .map(|i| PredictionRecord {
            sample_index: i,
            theta: (0..16).map(|_| rng.random::<f64>() * 6.283).collect(),
            w_re_im: (0..genes).map(|_| (rng.random::<f64>() - 0.5) * scale).collect(),
        })
        .collect();
    let optimized: Vec<PredictionRecord> = data
        .samples
        .iter()
        .enumerate()
        .map(|(i, ch)| {
            let s = run_algorithm1(ch, &cfg, &AlgorithmOptions::default(), i as u64);
            PredictionRecord::new(i, &s.w, &s.v)
        })
        .collect();
    let a = evaluate_predictions(&data, &random, &cfg).unwrap();
    let b = evaluate_predictions(&data, &optimized, &cfg).unwrap();
    assert!(b.raw.mean_ee > a.raw.mean_ee);
}

#[test]
fn alignment_errors_carry_the_sample_index() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("d.jsonl");
    let cfg = small();
    export_dataset(&cfg, 3, 3, &ds).unwrap();
    let data = read_dataset(&ds).unwrap();
    let good = |i| PredictionRecord {
        sample_index: i,
        theta: vec![0.0; 4],
        w_re_im: vec![0.1; 12],
    };
    let short = vec![good(0), good(1)];
    assert!(matches!(evaluate_predictions(&data, &short, &cfg), Err(PredictionError::Length { dataset: 3, predictions: 2 })));
    let dup = vec![good(0), good(1), good(1)];
    assert!(matches!(evaluate_predictions(&data, &dup, &cfg), Err(PredictionError::Sample { sample_index: 1, .. })));
    let unknown = vec![good(0), good(1), good(7)];
    assert!(matches!(evaluate_predictions(&data, &unknown, &cfg), Err(PredictionError::Sample { sample_index: 7, .. })));
    let mut bad_theta = vec![good(0), good(1), good(2)];
    bad_theta[2].theta.pop();
    assert!(matches!(evaluate_predictions(&data, &bad_theta, &cfg), Err(PredictionError::Sample { sample_index: 2, .. })));
    let mut nan = vec![good(0), good(1), good(2)];
    nan[1].w_re_im[3] = f64::NAN;
    assert!(matches!(evaluate_predictions(&data, &nan, &cfg), Err(PredictionError::Sample { sample_index: 1, .. })));
    let other = ScenarioConfig::desk();
    assert!(matches!(evaluate_predictions(&data, &[good(0), good(1), good(2)], &other), Err(PredictionError::Dimensions { .. })));
}

#[test]
fn malformed_prediction_lines_report_the_line() {
    let mut buf = Vec::new();
    writeln!(buf, "{{\"sample_index\":0,\"theta\":[0.0],\"W_re_im\":[0.0,0.0]}}").unwrap();
    writeln!(buf).unwrap();
    writeln!(buf, "{{\"sample_index\":1,\"theta\":\"x\"}}").unwrap();
    assert!(matches!(parse_predictions(buf.as_slice(), "p".as_ref()), Err(PredictionError::Json { line: 3, .. })));
}

#[test]
fn theta_outside_one_turn_is_wrapped() {
    let rec = PredictionRecord {
        sample_index: 0,
        theta: vec![-1.0, 7.0],
        w_re_im: vec![0.0; 2],
    };
    let (_, v) = rec.decode(1, 1, 2).unwrap();
    let tau = std::f64::consts::TAU;
    assert!((v.angles()[0] - (tau - 1.0)).abs() < 1e-12);
    assert!((v.angles()[1] - (7.0 - tau)).abs() < 1e-12);
}

#[test]
fn config_echo_reproduces_the_scenario() {
    let cfg = ScenarioConfig::full_scale();
    let back = ConfigFile::from_scenario(&cfg).scenario().unwrap();
    assert_eq!(back.ap_positions, cfg.ap_positions);
    assert_eq!(back.num_aps, 13);
    for (a, b) in [(back.p_max, cfg.p_max), (back.sigma2, cfg.sigma2), (back.p_user, cfg.p_user), (back.p_irs, cfg.p_irs)] {
        assert!((a - b).abs() <= 1e-14 * b);
    }
}
