#![no_main]

//! Token counting: spec parsing, near-additivity, and truncation bounds.

use libfuzzer_sys::fuzz_target;
use memagent::tokens::TokenCounter;

fuzz_target!(|data: &[u8]| {
    if data.is_empty() {
        return;
    }
    let budget = data[0] as usize % 32;
    let rest = String::from_utf8_lossy(&data[1..]).into_owned();
    let _ = TokenCounter::parse_spec(&rest);

    for counter in [TokenCounter::whitespace(), TokenCounter::chars_div_4()] {
        assert_eq!(counter.count(""), 0);
        let mid = (0..=rest.len() / 2)
            .rev()
            .find(|&i| rest.is_char_boundary(i))
            .unwrap_or(0);
        let (left, right) = rest.split_at(mid);
        let whole = counter.count(&rest);
        assert!(whole <= counter.count(left) + counter.count(right) + 1);

        let (kept, truncated) = counter.truncate(&rest, budget);
        assert!(counter.count(&kept) <= budget);
        assert_eq!(truncated, kept.len() < rest.len());
        assert!(rest.starts_with(&kept));
    }
});
