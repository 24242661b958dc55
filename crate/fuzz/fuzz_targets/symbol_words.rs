#![no_main]

use causal_tensor::alphabet::{pack_word, unpack_word};
use libfuzzer_sys::fuzz_target;

// Layout: radix byte, length byte, then a little-endian word.
fuzz_target!(|data: &[u8]| {
    let [radix, len, rest @ ..] = data else { return };
    let mut w = [0u8; 8];
    let n = rest.len().min(8);
    w[..n].copy_from_slice(&rest[..n]);
    let word = u64::from_le_bytes(w) as usize;
    let (radix, len) = (u32::from(*radix), usize::from(*len));
    if let Ok(window) = unpack_word(word, radix, len) {
        assert_eq!(window.len(), len);
        assert!(window.iter().all(|&s| s < radix));
        assert_eq!(pack_word(&window, radix), word);
    }
});
