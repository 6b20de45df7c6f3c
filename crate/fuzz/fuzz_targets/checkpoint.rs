#![no_main]

use libfuzzer_sys::fuzz_target;
use molrel::train::checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(tensors) = checkpoint::decode(data) {
        let total: usize = tensors.iter().map(|(_, t)| t.len() * 8).sum();
        assert!(total <= data.len());
    }
});
