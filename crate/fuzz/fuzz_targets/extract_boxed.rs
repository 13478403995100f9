#![no_main]

//! Boxed-answer extraction on untrusted model completions: must never
//! panic, and a successful extraction must come from inside the input.

use libfuzzer_sys::fuzz_target;
use memagent::verify::extract_boxed;

fuzz_target!(|data: &[u8]| {
    let input = String::from_utf8_lossy(data);
    let (answer, ok) = extract_boxed(&input);
    assert!(answer.len() <= input.len());
    if ok {
        // The reported span really is a balanced boxed body in the input.
        assert!(input.contains(&format!("\\boxed{{{answer}}}")));
    } else {
        assert!(input.contains(&answer) || answer == input.trim());
    }
});
