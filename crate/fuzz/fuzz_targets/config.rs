#![no_main]

use libfuzzer_sys::fuzz_target;
use molrel::adapters::Adapters;
use molrel::compose::ModelSpec;
use molrel::experiment::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    for json in [false, true] {
        let _ = ExperimentConfig::from_str(s, json);
    }
    let spec = ModelSpec::from_yaml(s).or_else(|_| ModelSpec::from_json(s));
    if let Ok(spec) = spec {
        let _ = spec.infer_shapes(&Adapters::default());
    }
});
