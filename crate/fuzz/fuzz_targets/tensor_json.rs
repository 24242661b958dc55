#![no_main]

use causal_tensor::tensor::CausalTensor;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(t) = CausalTensor::from_json(s) {
        let back = CausalTensor::from_json(&t.to_json()).expect("encoded tensor decodes");
        assert_eq!(back, t);
    }
});
