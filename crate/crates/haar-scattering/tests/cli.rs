//! End-to-end runs of the `haarscat` binary: the full learn → features →
//! select → train → evaluate → connectivity pipeline on a small dataset,
//! determinism of reruns, cache hits, the demo subcommands, report schema
//! validation and error exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn haarscat(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haarscat"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let config = serde_json::json!({
        "dataset": {
            "type": "synthetic-digits",
            "train": 120,
            "test": 60,
            "data_seed": 11
        },
        "depth": 6,
        "max_order": 3,
        "ensemble": 2,
        "ensemble_source": "learned",
        "dictionary_size": 40,
        "standardize": true,
        "lambda": 1e-3,
        "seed": 5,
        "output_dir": dir.join("out")
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

/// Minimal JSON-schema check covering the subset the published schema
/// uses: required keys, primitive types, numeric bounds.
fn validate_against_schema(schema: &serde_json::Value, value: &serde_json::Value) {
    let object = value.as_object().expect("report is an object");
    for key in schema["required"].as_array().expect("required list") {
        let key = key.as_str().unwrap();
        assert!(object.contains_key(key), "report misses required key {key}");
    }
    for (key, rules) in schema["properties"].as_object().expect("properties") {
        let Some(field) = object.get(key) else { continue };
        match rules["type"].as_str().unwrap() {
            "string" => assert!(field.is_string(), "{key} must be a string"),
            "integer" => assert!(field.is_u64() || field.is_i64(), "{key} must be an integer"),
            "number" => assert!(field.is_number(), "{key} must be a number"),
            "array" => assert!(field.is_array(), "{key} must be an array"),
            "object" => assert!(field.is_object(), "{key} must be an object"),
            other => panic!("schema uses unsupported type {other}"),
        }
        if let Some(min) = rules["minimum"].as_f64() {
            assert!(field.as_f64().unwrap() >= min, "{key} below minimum");
        }
        if let Some(max) = rules["maximum"].as_f64() {
            assert!(field.as_f64().unwrap() <= max, "{key} above maximum");
        }
        if let Some(min) = rules["exclusiveMinimum"].as_f64() {
            assert!(field.as_f64().unwrap() > min, "{key} at or below exclusive minimum");
        }
    }
}

#[test]
fn full_pipeline_runs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let config = config.to_str().unwrap();

    for step in ["learn", "features", "select", "train", "evaluate", "connectivity"] {
        let out = haarscat(&[step, "--config", config, "--threads", "2"], dir.path());
        assert_success(&out, step);
        // Machine output goes to files; stdout stays clean.
        assert!(out.stdout.is_empty(), "{step} wrote to stdout");
    }

    // Locate the run directory (content-addressed by config hash).
    let out_root = dir.path().join("out");
    let run_dir = std::fs::read_dir(&out_root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.join("reports").join("evaluate.json").exists())
        .expect("run directory with evaluate report");

    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run_dir.join("reports").join("evaluate.json")).unwrap(),
    )
    .unwrap();
    let schema: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas/evaluate_report.schema.json"),
        )
        .unwrap(),
    )
    .unwrap();
    validate_against_schema(&schema, &report);

    // Small learned ensemble on 120 digits will not be great, but it must
    // beat chance (90% error for 10 balanced classes) decisively.
    let error_rate = report["error_rate"].as_f64().unwrap();
    assert!(error_rate < 0.5, "error rate {error_rate} not better than chance");

    let connectivity: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run_dir.join("reports").join("connectivity.json")).unwrap(),
    )
    .unwrap();
    let average = connectivity["average"].as_array().unwrap();
    assert_eq!(average.len(), 6 + 1, "levels 0..=J");
    assert_eq!(average[0].as_f64().unwrap(), 1.0, "singletons are connected");

    // The ensemble manifest records per-level matching costs.
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run_dir.join("ensemble").join("manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["members"], 2);
    assert_eq!(manifest["level_costs"].as_array().unwrap().len(), 2);
    assert_eq!(
        manifest["level_costs"][0].as_array().unwrap().len(),
        6,
        "one cost per level"
    );
}

#[test]
fn rerun_is_cache_hit_and_clean_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let config = config.to_str().unwrap();

    let out = haarscat(&["learn", "--config", config], dir.path());
    assert_success(&out, "learn");
    let out_root = dir.path().join("out");
    let run_dir = std::fs::read_dir(&out_root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.join("ensemble").exists())
        .unwrap();
    let manifest_path = run_dir.join("ensemble").join("manifest.json");
    let first = std::fs::read(&manifest_path).unwrap();
    let member = std::fs::read(run_dir.join("ensemble").join("member_000.json")).unwrap();

    // Rerun: cache hit, artifacts untouched.
    let out = haarscat(&["learn", "--config", config], dir.path());
    assert_success(&out, "learn rerun");
    assert!(String::from_utf8_lossy(&out.stderr).contains("cache hit"));
    assert_eq!(first, std::fs::read(&manifest_path).unwrap());

    // Clean rerun: byte-identical outputs.
    std::fs::remove_dir_all(&out_root).unwrap();
    let out = haarscat(&["learn", "--config", config], dir.path());
    assert_success(&out, "clean rerun");
    assert_eq!(first, std::fs::read(&manifest_path).unwrap());
    assert_eq!(
        member,
        std::fs::read(run_dir.join("ensemble").join("member_000.json")).unwrap()
    );
}

#[test]
fn flag_overrides_change_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let config = config.to_str().unwrap();
    let out = haarscat(&["learn", "--config", config, "--seed", "99"], dir.path());
    assert_success(&out, "learn with override");
    // Different seed, different artifact directory.
    let out = haarscat(&["learn", "--config", config], dir.path());
    assert_success(&out, "learn base");
    let dirs = std::fs::read_dir(dir.path().join("out")).unwrap().count();
    assert_eq!(dirs, 2, "two distinct config hashes");
}

#[test]
fn reconstruct_demo_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = haarscat(
        &[
            "reconstruct-demo",
            "--d",
            "16",
            "--depth",
            "3",
            "--trials",
            "25",
            "--seed",
            "3",
            "--output-dir",
            "out",
        ],
        dir.path(),
    );
    assert_success(&out, "reconstruct-demo");
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/reports/reconstruct_d16_J3_t25_s3.json"))
            .unwrap(),
    )
    .unwrap();
    assert_eq!(report["ambiguous_count"], 0);
    assert!(report["max_abs_error"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["trials"], 25);

    // Degenerate direction: at full depth every signal reports ambiguous
    // rather than crashing.
    let out = haarscat(
        &[
            "reconstruct-demo",
            "--d",
            "16",
            "--depth",
            "4",
            "--trials",
            "5",
            "--seed",
            "3",
            "--output-dir",
            "out",
        ],
        dir.path(),
    );
    assert_success(&out, "reconstruct-demo full depth");
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/reports/reconstruct_d16_J4_t5_s3.json"))
            .unwrap(),
    )
    .unwrap();
    assert_eq!(report["ambiguous_count"], 5);
}

#[test]
fn bool_demo_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = haarscat(
        &["bool-demo", "--d", "8", "--depth", "3", "--output-dir", "out"],
        dir.path(),
    );
    assert_success(&out, "bool-demo");
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/reports/bool_d8_J3.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["inputs"], 256);
    assert_eq!(report["oracle_mismatches"], 0);
    assert_eq!(report["constant_inputs_have_false_xor"], true);
}

#[test]
fn idx_dataset_type_runs_with_limits_and_scramble() {
    // Stage IDX files on disk and drive the pipeline through the `idx`
    // dataset type with split limits and a scramble.
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = haar_scattering::datasets::synthetic_digits(150, 31);
    let ip = dir.path().join("images.idx3-ubyte");
    let lp = dir.path().join("labels.idx1-ubyte");
    haar_scattering::datasets::write_idx_images(&ip, &images, 28, 28).unwrap();
    haar_scattering::datasets::write_idx_labels(&lp, &labels).unwrap();

    let config = serde_json::json!({
        "dataset": {
            "type": "idx",
            "train_images": ip,
            "train_labels": lp,
            "test_images": ip,
            "test_labels": lp,
            "train_limit": 100,
            "test_limit": 40
        },
        "depth": 8,
        "max_order": 3,
        "ensemble": 2,
        "ensemble_source": "grid",
        "dictionary_size": 40,
        "seed": 2,
        "scramble_seed": 77,
        "output_dir": dir.path().join("out")
    });
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, config.to_string()).unwrap();
    let config = config_path.to_str().unwrap();

    for step in ["features", "select", "train", "evaluate", "connectivity"] {
        let out = haarscat(&[step, "--config", config], dir.path());
        assert_success(&out, step);
    }
    let run_dir = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.join("reports").join("evaluate.json").exists())
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run_dir.join("reports").join("evaluate.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["test_rows"], 40);
    // Test split equals the training file here, so the model has seen
    // every row; the point is the plumbing, but the score should still
    // crush chance.
    assert!(report["error_rate"].as_f64().unwrap() < 0.5);

    // Scrambling relabels the geometry, so connectivity of grid members
    // stays perfect.
    let connectivity: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run_dir.join("reports").join("connectivity.json")).unwrap(),
    )
    .unwrap();
    for level in connectivity["average"].as_array().unwrap() {
        assert_eq!(level.as_f64().unwrap(), 1.0);
    }
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    // Invalid config: max_order above depth.
    let config = dir.path().join("bad.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "dataset": {"type": "synthetic-digits", "train": 10, "test": 5, "data_seed": 1},
            "depth": 2,
            "max_order": 7
        })
        .to_string(),
    )
    .unwrap();
    let out = haarscat(&["learn", "--config", config.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    // Evaluate before features exists.
    let config = write_config(dir.path());
    let out = haarscat(&["evaluate", "--config", config.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
}

#[test]
fn shuffled_label_control_scores_near_chance() {
    // Statistical control: shuffling training labels must push the error
    // toward (C-1)/C. Run the library pipeline directly on a small digit
    // set with permuted labels.
    use haar_scattering::classify;
    use haar_scattering::features;
    use haar_scattering::multires::grid_multires;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let dir = tempfile::tempdir().unwrap();
    let train = haar_scattering::datasets::synthetic_digits_dataset(dir.path(), 300, 77).unwrap();
    let test = haar_scattering::datasets::synthetic_digits_dataset(dir.path(), 200, 78).unwrap();
    let members: Vec<_> = (0..2)
        .map(|v| grid_multires(32, 32, 8, v).unwrap())
        .collect();
    let train_matrix =
        features::scattering_feature_matrix(&train.signals, &members, 8, 3).unwrap();
    let test_matrix = features::scattering_feature_matrix(&test.signals, &members, 8, 3).unwrap();
    let mut labels = train.labels.clone().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
    labels.shuffle(&mut rng);
    let dictionary = features::build_dictionary(&train_matrix, &labels, 10).unwrap();
    let rows = features::project_matrix(&dictionary, &train_matrix).unwrap();
    let sigma = classify::median_distance(&rows, 500);
    let model = classify::train(&rows, &labels, sigma, 1e-3).unwrap();
    let test_rows = features::project_matrix(&dictionary, &test_matrix).unwrap();
    let error = classify::error_rate(&model, &test_rows, test.labels.as_ref().unwrap()).unwrap();
    // Binomial bounds around 0.9 for 200 draws: allow a wide window.
    assert!(
        (0.78..=1.0).contains(&error),
        "shuffled-label control error {error} should sit near 0.9"
    );
}
