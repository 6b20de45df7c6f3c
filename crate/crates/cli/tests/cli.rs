use std::process::Command;

fn molrel(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_molrel")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn enumerate_counts_models() {
    let (code, out, _) = molrel(&["enumerate", "--drug", "16", "--protein", "22", "--max", "4"]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "71368");
}

#[test]
fn registry_inventory_sizes() {
    let (code, out, _) = molrel(&["list-registry"]);
    assert_eq!(code, 0);
    let count = |prefix: &str| -> usize {
        out.lines()
            .filter(|l| l.starts_with(prefix))
            .map(|l| l[l.rfind('(').unwrap() + 1..l.rfind(')').unwrap()].parse::<usize>().unwrap())
            .sum()
    };
    assert!(count("drug encoders") >= 16);
    assert!(count("protein encoders (sequence)") >= 13);
    assert!(count("protein encoders (graph_3d)") >= 9);
    assert_eq!(count("interactions"), 7);
    assert_eq!(count("regression metrics") + count("binary metrics") + count("multiclass metrics"), 21);
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = molrel(&["run", "/no/such/config.yaml"]);
    assert_eq!(code, 2, "{err}");

    let cfg = dir.path().join("c.yaml");
    std::fs::write(&cfg, "data: {protocol: dti, path: missing.csv}\nmodel: {preset: exp-1.1}\noutput_dir: out\n").unwrap();
    let (code, _, err) = molrel(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("data.path"), "{err}");

    let (code, _, err) = molrel(&["ablate", cfg.to_str().unwrap(), "--drop", "nonexistent"]);
    assert_eq!(code, 2, "{err}");

    let data = dir.path().join("d.csv");
    std::fs::write(&data, "drug_smiles,label\nCCO,1\n").unwrap();
    let out = dir.path().join("f.csv");
    let (code, _, err) = molrel(&["featurize", "dti", data.to_str().unwrap(), "--featurizer", "Morgan", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn featurize_writes_one_row_per_entity() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(
        &data,
        "drug_smiles,protein_seq,label\nCCO,MKTAYIAKQR,1\nc1ccccc1,MKTAYIAKQR,0\nCCO,GSHMSLFDFF,0\n",
    )
    .unwrap();
    let out = dir.path().join("f.csv");
    let (code, _, err) = molrel(&["featurize", "dti", data.to_str().unwrap(), "--featurizer", "AAC", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0].split(',').count(), 8421);
    assert!(lines[1].starts_with("MKTAYIAKQR,"));
}
