#![no_main]

use libfuzzer_sys::fuzz_target;
use molrel::featurize::SubwordVocabulary;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let (text, probe) = s.split_once('\0').unwrap_or((s, "CCO"));
    if let Ok(v) = SubwordVocabulary::parse(text) {
        for (_, id) in v.segment(probe) {
            assert!(id.is_none_or(|i| i < v.len()));
        }
    }
});
