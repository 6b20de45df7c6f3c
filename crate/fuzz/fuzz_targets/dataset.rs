#![no_main]

use libfuzzer_sys::fuzz_target;
use molrel::compose::TaskKind;
use molrel::dataio::{parse_table, LoadOptions, Protocol};

fuzz_target!(|data: &[u8]| {
    let Some((&first, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let protocol = [Protocol::Dti, Protocol::Ddi, Protocol::Ppi][first as usize % 3];
    let task = [TaskKind::Binary, TaskKind::Regression, TaskKind::Multiclass { classes: 4 }][first as usize / 3 % 3];
    let opts = LoadOptions { task, structures: None };
    let _ = parse_table(text, protocol, &opts);
});
