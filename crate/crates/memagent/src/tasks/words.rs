//! Word pools and the noise filler generator behind the synthetic tasks.
//!
//! Keys are adjective-noun pairs, filler comes from a disjoint pool so that
//! haystack prose never echoes key material, and none of the pools contain
//! the words used by the needle sentence template itself.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tokens::{CountAcc, TokenCounter};

pub(crate) const ADJECTIVES: &[&str] = &[
    "brave", "calm", "eager", "fancy", "gentle", "happy", "jolly", "kind", "lively", "merry",
    "nice", "proud", "quick", "silly", "witty", "zealous", "bright", "clever", "daring", "earnest",
    "fierce", "graceful", "humble", "keen", "loyal", "mighty", "noble", "polite", "quiet", "rapid",
    "sturdy", "tender", "upbeat", "vivid", "wise", "young", "agile", "bold", "cheerful", "dapper",
    "elegant", "faithful", "gallant", "hearty", "inventive", "joyful", "luminous", "modest",
    "nimble", "orderly", "patient", "radiant", "serene", "thrifty", "uncommon", "valiant",
    "warm", "exact", "youthful", "zesty", "ample", "breezy", "crisp", "dusty",
];

pub(crate) const NOUNS: &[&str] = &[
    "lion", "tiger", "falcon", "otter", "badger", "walrus", "heron", "medal", "lantern", "anchor",
    "beacon", "canyon", "dolphin", "engine", "forest", "garden", "harbor", "island", "jungle",
    "kettle", "ladder", "meadow", "needle", "orchard", "pillar", "quarry", "river", "saddle",
    "temple", "umbrella", "valley", "window", "yarn", "zephyr", "acorn", "bridge", "castle",
    "desert", "ember", "fountain", "glacier", "hammer", "iceberg", "jacket", "kite", "lighthouse",
    "mountain", "nest", "oasis", "palace", "quill", "reef", "summit", "tunnel", "urn", "volcano",
    "wagon", "crystal", "yacht", "zeppelin", "arrow", "basket", "compass", "drum",
];

/// Words used only for background noise; disjoint from the key pools and
/// from the needle/question templates.
pub(crate) const FILLER: &[&str] = &[
    "the", "a", "of", "and", "to", "in", "was", "it", "had", "were", "been", "over", "under",
    "near", "across", "between", "through", "grass", "sky", "sun", "rain", "wind", "cloud",
    "stone", "path", "field", "road", "town", "wall", "roof", "door", "floor", "light", "shade",
    "morning", "evening", "spring", "autumn", "winter", "summer", "slowly", "quietly", "again",
    "always", "often", "sometimes", "here", "there",
];

/// Deterministic stream of filler words with occasional sentence breaks.
pub(crate) struct FillerStream<'a> {
    rng: &'a mut ChaCha8Rng,
    until_period: usize,
}

impl<'a> FillerStream<'a> {
    pub(crate) fn new(rng: &'a mut ChaCha8Rng) -> Self {
        let until_period = rng.gen_range(6..14);
        FillerStream { rng, until_period }
    }

    pub(crate) fn next_word(&mut self) -> String {
        let word = *FILLER.choose(self.rng).expect("filler pool is non-empty");
        if self.until_period == 0 {
            self.until_period = self.rng.gen_range(6..14);
            format!("{word}.")
        } else {
            self.until_period -= 1;
            word.to_string()
        }
    }
}

/// Filler words totalling as close to `tokens_needed` as the counter allows
/// without exceeding it (exact for the whitespace counter).
pub(crate) fn fill_to_tokens(
    rng: &mut ChaCha8Rng,
    counter: &TokenCounter,
    tokens_needed: usize,
) -> Vec<String> {
    let mut stream = FillerStream::new(rng);
    let mut words = Vec::new();
    let mut acc: CountAcc = counter.accumulator();
    loop {
        let word = stream.next_word();
        let mut probe = acc;
        counter.accumulate(&mut probe, &format!("{word} "));
        if counter.total(&probe) > tokens_needed {
            return words;
        }
        acc = probe;
        words.push(word);
    }
}

/// A fresh `adjective-noun` key not present in `taken`. Bounded retries.
pub(crate) fn fresh_key(rng: &mut ChaCha8Rng, taken: &[String]) -> Option<String> {
    for _ in 0..64 {
        let adj = ADJECTIVES.choose(rng)?;
        let noun = NOUNS.choose(rng)?;
        let key = format!("{adj}-{noun}");
        if !taken.contains(&key) {
            return Some(key);
        }
    }
    None
}

/// A fresh n-digit number (no leading zero) not present in `taken`.
pub(crate) fn fresh_number(rng: &mut ChaCha8Rng, digits: u32, taken: &[String]) -> Option<String> {
    let low = 10u64.pow(digits - 1);
    let high = 10u64.pow(digits);
    for _ in 0..64 {
        let value = rng.gen_range(low..high).to_string();
        if !taken.contains(&value) {
            return Some(value);
        }
    }
    None
}

/// A fresh uppercase variable name of the given length.
pub(crate) fn fresh_var_name(rng: &mut ChaCha8Rng, len: usize, taken: &[String]) -> Option<String> {
    for _ in 0..64 {
        let name: String = (0..len)
            .map(|_| (b'A' + rng.gen_range(0..26u8)) as char)
            .collect();
        if !taken.contains(&name) {
            return Some(name);
        }
    }
    None
}

/// A fresh lowercase pseudo-word of 4..=8 letters.
pub(crate) fn fresh_pseudo_word(rng: &mut ChaCha8Rng, taken: &[String]) -> Option<String> {
    for _ in 0..256 {
        let len = rng.gen_range(4..=8);
        let word: String = (0..len)
            .map(|_| (b'a' + rng.gen_range(0..26u8)) as char)
            .collect();
        if !taken.contains(&word) && !FILLER.contains(&word.as_str()) {
            return Some(word);
        }
    }
    None
}
