#![no_main]

use libfuzzer_sys::fuzz_target;
use qjh_cli::{parse_args, resolve, FileConfig};

fuzz_target!(|data: &[u8]| {
    // NUL-separated argv, program name prepended.
    let args: Vec<String> = std::iter::once("qjh".to_string())
        .chain(data.split(|&b| b == 0).map(|a| String::from_utf8_lossy(a).into_owned()))
        .collect();
    if let Ok(cli) = parse_args(&args) {
        let _ = resolve(&cli, FileConfig::default(), None);
    }
});
