#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| dshap_cli::fuzz::csv_dataset(data));
