//! Random strings from a loose SMILES grammar, some then mutated so that
//! both valid and malformed inputs reach the parser.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const ATOMS: [&str; 16] = [
    "C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "c", "n", "o", "s", "[NH4+]", "[O-]", "[13CH3]",
];
const BONDS: [&str; 5] = ["", "", "=", "#", "/"];
const NOISE: [char; 16] = ['(', ')', '[', ']', '1', '2', '%', '=', '#', '+', '-', '@', '.', 'X', '*', 'c'];

fn chain(rng: &mut ChaCha8Rng, depth: usize, out: &mut String, open_rings: &mut Vec<u8>) {
    let len = rng.gen_range(1..6);
    for i in 0..len {
        if i > 0 {
            out.push_str(BONDS.choose(rng).unwrap());
        }
        out.push_str(ATOMS.choose(rng).unwrap());
        if rng.gen_bool(0.15) {
            if let Some(d) = open_rings.pop() {
                out.push((b'0' + d) as char);
            } else {
                let d = rng.gen_range(1..10);
                open_rings.push(d);
                out.push((b'0' + d) as char);
            }
        }
        if depth < 3 && rng.gen_bool(0.2) {
            out.push('(');
            chain(rng, depth + 1, out, open_rings);
            out.push(')');
        }
    }
}

pub fn generate(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::new();
    let mut rings = Vec::new();
    chain(rng, 0, &mut s, &mut rings);
    for d in rings {
        s.push((b'0' + d) as char);
    }
    if rng.gen_bool(0.1) {
        s.push('.');
        chain(rng, 0, &mut s, &mut Vec::new());
    }
    if rng.gen_bool(0.5) {
        let mut chars: Vec<char> = s.chars().collect();
        for _ in 0..rng.gen_range(1..4) {
            let at = rng.gen_range(0..=chars.len());
            match rng.gen_range(0..3) {
                0 if at < chars.len() => {
                    chars.remove(at);
                }
                1 if at < chars.len() => chars[at] = *NOISE.choose(rng).unwrap(),
                _ => chars.insert(at, *NOISE.choose(rng).unwrap()),
            }
        }
        s = chars.into_iter().collect();
    }
    s
}

/// `(graphs, positioned errors, other outcomes)` over `n` generated strings;
/// panics count as other.
pub fn fuzz(n: usize, seed: u64) -> (usize, usize, Vec<String>) {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ok, mut positioned, mut other) = (0, 0, Vec::new());
    for _ in 0..n {
        let s = generate(&mut rng);
        match std::panic::catch_unwind(|| molrel::molparse::parse_smiles(&s)) {
            Ok(Ok(_)) => ok += 1,
            Ok(Err(molrel::Error::Parse { position, .. })) if position <= s.len() => positioned += 1,
            Ok(Err(e)) => other.push(format!("{s}: {e}")),
            Err(_) => other.push(format!("{s}: panic")),
        }
    }
    (ok, positioned, other)
}
