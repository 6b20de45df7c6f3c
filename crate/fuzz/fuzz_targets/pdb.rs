#![no_main]

use libfuzzer_sys::fuzz_target;
use molrel::molparse::parse_pdb;

fuzz_target!(|data: &[u8]| {
    let s = String::from_utf8_lossy(data);
    let _ = parse_pdb(&s);
});
