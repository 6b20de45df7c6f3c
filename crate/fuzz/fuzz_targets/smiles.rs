#![no_main]

use libfuzzer_sys::fuzz_target;
use molrel::molparse::parse_smiles;
use molrel::Error;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        match parse_smiles(s) {
            Ok(g) => assert!(g.bonds.iter().all(|b| b.a < g.atoms.len() && b.b < g.atoms.len())),
            Err(Error::Parse { position, .. }) => assert!(position <= s.len()),
            Err(_) => {}
        }
    }
});
