#![no_main]

//! Trace JSONL decoding: arbitrary bytes never panic; anything that parses
//! re-serializes and re-parses to the same trace set.

use libfuzzer_sys::fuzz_target;
use memagent::workflow::trace_io::{read_traces, write_traces};

fuzz_target!(|data: &[u8]| {
    let input = String::from_utf8_lossy(data).into_owned();
    if let Ok(traces) = read_traces(input.as_bytes()) {
        let mut buf = Vec::new();
        write_traces(&mut buf, &traces).expect("in-memory serialize");
        let again = read_traces(buf.as_slice()).expect("own output must parse");
        assert_eq!(traces.len(), again.len());
        for (a, b) in traces.iter().zip(&again) {
            assert_eq!(a.sample_id, b.sample_id);
            assert_eq!(a.final_answer, b.final_answer);
            assert_eq!(a.conversations.len(), b.conversations.len());
        }
    }
});
