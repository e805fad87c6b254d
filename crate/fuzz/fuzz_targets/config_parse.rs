#![no_main]

use libfuzzer_sys::fuzz_target;
use qjh_cli::{parse_args, parse_config_str, resolve};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(file) = parse_config_str(text) {
            // Validation must reject or accept, never panic.
            let cli = parse_args(["qjh"]).unwrap();
            let _ = resolve(&cli, file, None);
        }
    }
});
