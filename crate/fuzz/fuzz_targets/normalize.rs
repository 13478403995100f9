#![no_main]

//! Answer normalization: idempotent, reflexive equivalence, no panics.

use libfuzzer_sys::fuzz_target;
use memagent::verify::{is_equiv, normalize};

fuzz_target!(|data: &[u8]| {
    let input = String::from_utf8_lossy(data);
    let once = normalize(&input);
    assert_eq!(normalize(&once), once);
    assert!(is_equiv(&input, &input));
});
