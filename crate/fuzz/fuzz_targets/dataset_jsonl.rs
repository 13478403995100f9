#![no_main]

//! Dataset JSONL decoding plus instance validation on hostile input.

use libfuzzer_sys::fuzz_target;
use memagent::tasks::{read_instances, write_instances};
use memagent::tokens::TokenCounter;

fuzz_target!(|data: &[u8]| {
    let input = String::from_utf8_lossy(data).into_owned();
    if let Ok(instances) = read_instances(input.as_bytes()) {
        let counter = TokenCounter::whitespace();
        for instance in &instances {
            let _ = instance.validate(&counter);
            let _ = instance.answer_set();
        }
        let mut buf = Vec::new();
        write_instances(&mut buf, &instances).expect("in-memory serialize");
        let again = read_instances(buf.as_slice()).expect("own output must parse");
        assert_eq!(instances, again);
    }
});
