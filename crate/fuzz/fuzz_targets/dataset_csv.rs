#![no_main]

use causal_tensor::io::{read_csv, write_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = read_csv(data, 1.0) {
        let mut buf = Vec::new();
        write_csv(&mut buf, &d).expect("parsed dataset writes");
        let back = read_csv(buf.as_slice(), 1.0).expect("written dataset parses");
        assert_eq!(back, d);
    }
});
