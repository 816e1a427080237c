#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| dshap_cli::fuzz::model_params_json(data));
