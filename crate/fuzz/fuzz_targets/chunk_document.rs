#![no_main]

//! Chunking: byte-exact reassembly and budget bounds for any input text.

use libfuzzer_sys::fuzz_target;
use memagent::tokens::TokenCounter;
use memagent::workflow::chunk_document;

fuzz_target!(|data: &[u8]| {
    if data.is_empty() {
        return;
    }
    let budget = 1 + (data[0] as usize % 64);
    let text = String::from_utf8_lossy(&data[1..]);
    for counter in [TokenCounter::whitespace(), TokenCounter::chars_div_4()] {
        if let Ok(plan) = chunk_document(&text, budget, &counter) {
            assert_eq!(plan.chunks.concat(), text);
            for (chunk, count) in plan.chunks.iter().zip(&plan.token_counts) {
                assert_eq!(counter.count(chunk), *count);
                assert!(*count > 0 && *count <= budget);
            }
        }
    }
});
