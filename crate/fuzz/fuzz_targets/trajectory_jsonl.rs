#![no_main]

//! Trainer trajectory JSONL decoding with bit-exact round trips.

use libfuzzer_sys::fuzz_target;
use memagent::dapo::{read_trajectories, write_trajectories};

fuzz_target!(|data: &[u8]| {
    let input = String::from_utf8_lossy(data).into_owned();
    if let Ok(records) = read_trajectories(input.as_bytes()) {
        let finite = records
            .iter()
            .all(|r| r.advantage.is_finite() && r.reward.is_finite());
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &records).expect("in-memory serialize");
        let again = read_trajectories(buf.as_slice()).expect("own output must parse");
        if finite {
            assert_eq!(records, again);
        }
    }
});
