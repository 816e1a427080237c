//! Parser entry points shared by the cargo-fuzz targets and the corpus
//! replay test. Each must return without panicking on any input.

use dshap::estimators::{read_values_csv, ValuationResult};
use dshap::models::ModelParams;
use dshap::{Dataset, SeedTree};

use crate::RunConfig;

pub const MAX_INPUT: usize = 64 * 1024;

pub fn csv_dataset(data: &[u8]) {
    if data.len() > MAX_INPUT {
        return;
    }
    if let Ok(ds) = Dataset::from_csv_reader(data, "fuzz", "label", 0.25, &SeedTree::new(0)) {
        assert!(ds.n_train() >= 1 && ds.n_eval() >= 1);
        assert!(ds.rows().flatten().all(|x| x.is_finite()));
        assert!(ds.train_labels().iter().all(|&y| y < ds.n_classes()));
    }
}

pub fn run_config(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_toml_str(text) {
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).expect("echoed config parses");
        assert_eq!(again, cfg);
    }
}

pub fn result_json(data: &[u8]) {
    if let Ok(r) = ValuationResult::from_json_slice(data) {
        assert_eq!(r.points.len(), r.values.len());
        let mut out = Vec::new();
        r.write_values_csv(&mut out).expect("in-memory write");
        let rows = read_values_csv(out.as_slice());
        if r.values.iter().all(|v| v.is_finite()) {
            assert_eq!(rows.expect("written values parse").len(), r.points.len());
        }
    }
}

pub fn model_params_json(data: &[u8]) {
    if let Ok(p) = ModelParams::from_json_slice(data) {
        if p.n_features <= 1024 {
            let y = p.predict(&vec![0.5; p.n_features]);
            assert!(y < p.n_classes);
        }
    }
}

pub fn values_csv(data: &[u8]) {
    if let Ok(rows) = read_values_csv(data) {
        assert!(rows.iter().all(|r| r.value.is_finite()));
    }
}

pub type EntryPoint = fn(&[u8]);

/// `(corpus directory, entry point)` for every target.
pub const TARGETS: [(&str, EntryPoint); 5] = [
    ("csv_dataset", csv_dataset),
    ("run_config", run_config),
    ("result_json", result_json),
    ("model_params_json", model_params_json),
    ("values_csv", values_csv),
];
