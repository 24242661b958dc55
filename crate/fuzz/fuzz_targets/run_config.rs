#![no_main]

use causal_tensor::io::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(s) {
        let text = toml::to_string(&cfg).expect("config serializes");
        assert_eq!(parse_config(&text).expect("serialized config parses"), cfg);
    }
});
