//! Direct-from-definition descriptor implementations over plain strings.
//! Slow on purpose: every count is a fresh scan of the sequence.

use molrel::featurize::tables::{tables, DistanceMatrix, AMINO_ACIDS};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_sequence(rng: &mut ChaCha8Rng, len: usize) -> String {
    let letters: Vec<char> = AMINO_ACIDS.chars().collect();
    (0..len).map(|_| letters[rng.gen_range(0..20)]).collect()
}

fn chars(seq: &str) -> Vec<char> {
    seq.chars().collect()
}

fn idx(c: char) -> usize {
    AMINO_ACIDS.find(c).unwrap()
}

fn kmers(k: usize) -> Vec<String> {
    if k == 0 {
        return vec![String::new()];
    }
    let mut out = Vec::new();
    for prefix in kmers(k - 1) {
        for c in AMINO_ACIDS.chars() {
            out.push(format!("{prefix}{c}"));
        }
    }
    out
}

pub fn aac(seq: &str) -> Vec<f64> {
    let s = chars(seq);
    let mut out = Vec::new();
    for k in 1..=3 {
        let total = (s.len() + 1).saturating_sub(k);
        for m in kmers(k) {
            if total == 0 {
                out.push(0.0);
                continue;
            }
            let m = chars(&m);
            let hits = (0..total).filter(|&i| s[i..i + k] == m[..]).count();
            out.push(hits as f64 / total as f64);
        }
    }
    out
}

const TRIAD_GROUPS: [&str; 7] = ["AGV", "ILFP", "YMTS", "HNQW", "RK", "DE", "C"];

fn group_of(groups: &[&str], c: char) -> usize {
    groups.iter().position(|g| g.contains(c)).unwrap()
}

pub fn conjoint_triad(seq: &str) -> Vec<f64> {
    let s = chars(seq);
    let mut counts = Vec::new();
    for a in 0..7 {
        for b in 0..7 {
            for c in 0..7 {
                let n = (0..s.len() - 2)
                    .filter(|&i| {
                        group_of(&TRIAD_GROUPS, s[i]) == a
                            && group_of(&TRIAD_GROUPS, s[i + 1]) == b
                            && group_of(&TRIAD_GROUPS, s[i + 2]) == c
                    })
                    .count();
                counts.push(n as f64);
            }
        }
    }
    let lo = counts.iter().cloned().fold(f64::MAX, f64::min);
    let hi = counts.iter().cloned().fold(f64::MIN, f64::max);
    counts
        .iter()
        .map(|&x| if hi == lo { 0.0 } else { (x - lo) / (hi - lo) })
        .collect()
}

fn qso_block(s: &[char], dist: &DistanceMatrix, maxlag: usize, w: f64) -> Vec<f64> {
    let n = s.len();
    let tau: Vec<f64> = (1..=maxlag)
        .map(|d| {
            let mut t = 0.0;
            for i in 0..n - d {
                let x = dist[idx(s[i])][idx(s[i + d])];
                t += x * x;
            }
            t
        })
        .collect();
    let freq: Vec<f64> = AMINO_ACIDS
        .chars()
        .map(|a| s.iter().filter(|&&c| c == a).count() as f64 / n as f64)
        .collect();
    let denom = freq.iter().sum::<f64>() + w * tau.iter().sum::<f64>();
    let mut out: Vec<f64> = freq.iter().map(|f| f / denom).collect();
    out.extend(tau.iter().map(|t| w * t / denom));
    out
}

pub fn quasi_seq_order(seq: &str) -> Vec<f64> {
    let s = chars(seq);
    let mut v = qso_block(&s, &tables().schneider_wrede, 30, 0.1);
    v.extend(qso_block(&s, &tables().grantham, 30, 0.1));
    v
}

fn standardized(name: &str) -> Vec<f64> {
    let raw = tables().properties.property(name);
    let mean = raw.iter().sum::<f64>() / 20.0;
    let var = raw.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 20.0;
    raw.iter().map(|x| (x - mean) / var.sqrt()).collect()
}

pub fn pseudo_aac(seq: &str) -> Vec<f64> {
    let (lambda, w) = (10, 0.05);
    let s = chars(seq);
    let n = s.len();
    let props: Vec<Vec<f64>> = ["pse_hydrophobicity", "pse_hydrophilicity", "pse_side_chain_mass"]
        .iter()
        .map(|p| standardized(p))
        .collect();
    let big_theta = |a: char, b: char| {
        let (i, j) = (idx(a), idx(b));
        (props[0][j] - props[0][i]).powi(2) / 3.0
            + (props[1][j] - props[1][i]).powi(2) / 3.0
            + (props[2][j] - props[2][i]).powi(2) / 3.0
    };
    let theta: Vec<f64> = (1..=lambda)
        .map(|d| {
            let mut t = 0.0;
            for i in 0..n - d {
                t += big_theta(s[i], s[i + d]);
            }
            t / (n - d) as f64
        })
        .collect();
    let freq: Vec<f64> = AMINO_ACIDS
        .chars()
        .map(|a| s.iter().filter(|&&c| c == a).count() as f64 / n as f64)
        .collect();
    let denom = freq.iter().sum::<f64>() + w * theta.iter().sum::<f64>();
    let mut out: Vec<f64> = freq.iter().map(|f| f / denom).collect();
    out.extend(theta.iter().map(|t| w * t / denom));
    out
}

const AUTOCORRELATION_PROPERTIES: [&str; 8] = [
    "hydrophobicity",
    "av_flexibility",
    "polarizability",
    "free_energy",
    "residue_asa",
    "residue_volume",
    "steric",
    "mutability",
];

pub fn autocorrelation(seq: &str) -> Vec<f64> {
    let s = chars(seq);
    let n = s.len();
    let (mut mb, mut moran, mut geary) = (Vec::new(), Vec::new(), Vec::new());
    for name in AUTOCORRELATION_PROPERTIES {
        let table = standardized(name);
        let p: Vec<f64> = s.iter().map(|&c| table[idx(c)]).collect();
        let mean = p.iter().sum::<f64>() / n as f64;
        let sq: f64 = p.iter().map(|x| (x - mean).powi(2)).sum();
        for d in 1..=30 {
            let pairs: Vec<(f64, f64)> = (0..n - d).map(|i| (p[i], p[i + d])).collect();
            let m = pairs.len() as f64;
            mb.push(pairs.iter().map(|(a, b)| a * b).sum::<f64>() / m);
            let cov = pairs.iter().map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / m;
            moran.push(cov / (sq / n as f64));
            let diff = pairs.iter().map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            geary.push((n - 1) as f64 * diff / (2.0 * m * sq));
        }
    }
    mb.into_iter().chain(moran).chain(geary).collect()
}

const CTD_GROUPS: [[&str; 3]; 7] = [
    ["RKEDQN", "GASTPHY", "CLVIMFW"],
    ["GASTPDC", "NVEQIL", "MHKFRYW"],
    ["LIFWCMVY", "PATGS", "HQRKNED"],
    ["KR", "ANCQGHILMFPSTWYV", "DE"],
    ["EALMQKRH", "VIYCWFT", "GNPSD"],
    ["ALFCGIVW", "RKQEND", "MPSTHY"],
    ["GASDT", "CPNVEQIL", "KMHFRYW"],
];

pub fn ctd(seq: &str) -> Vec<f64> {
    let s = chars(seq);
    let n = s.len();
    let mut out = Vec::new();
    for groups in CTD_GROUPS {
        let cls: Vec<usize> = s.iter().map(|&c| group_of(&groups, c)).collect();
        for c in 0..3 {
            out.push(cls.iter().filter(|&&x| x == c).count() as f64 / n as f64);
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let mut t = 0;
            for i in 0..n - 1 {
                if (cls[i], cls[i + 1]) == (a, b) || (cls[i], cls[i + 1]) == (b, a) {
                    t += 1;
                }
            }
            out.push(t as f64 / (n - 1) as f64);
        }
        for c in 0..3 {
            let total = cls.iter().filter(|&&x| x == c).count();
            if total == 0 {
                out.extend([0.0; 5]);
                continue;
            }
            // residue positions (1-based) of the 1st, 25%, 50%, 75% and last occurrence
            let targets = [1, (total / 4).max(1), (total / 2).max(1), (total * 3 / 4).max(1), total];
            for target in targets {
                let mut seen = 0;
                for (i, &x) in cls.iter().enumerate() {
                    if x == c {
                        seen += 1;
                        if seen == target {
                            out.push((i + 1) as f64 / n as f64);
                            break;
                        }
                    }
                }
            }
        }
    }
    out
}

type Pair = (&'static str, fn(&str) -> Vec<f64>, fn(&str) -> Vec<f64>);

fn library_aac(s: &str) -> Vec<f64> {
    molrel::featurize::protein::aac_kmer(s).unwrap().values
}
fn library_triad(s: &str) -> Vec<f64> {
    molrel::featurize::protein::conjoint_triad(s).unwrap().values
}
fn library_ctd(s: &str) -> Vec<f64> {
    molrel::featurize::protein::ctd(s).unwrap().values
}
fn library_qso(s: &str) -> Vec<f64> {
    molrel::featurize::protein::quasi_seq_order(s, 30, 0.1).unwrap().values
}
fn library_pseaac(s: &str) -> Vec<f64> {
    molrel::featurize::protein::pseudo_aac(s, 10, 0.05).unwrap().values
}
fn library_autocorrelation(s: &str) -> Vec<f64> {
    molrel::featurize::protein::autocorrelation(s, 30).unwrap().values
}

pub const PAIRS: [Pair; 6] = [
    ("AAC", library_aac, aac),
    ("Conjoint triad", library_triad, conjoint_triad),
    ("CTD", library_ctd, ctd),
    ("QSO", library_qso, quasi_seq_order),
    ("PseAAC", library_pseaac, pseudo_aac),
    ("Autocorrelation", library_autocorrelation, autocorrelation),
];

/// Largest elementwise difference per descriptor over `count` random
/// sequences of length 40 to 60.
pub fn max_errors(count: usize, seed: u64) -> Vec<(&'static str, f64)> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seqs: Vec<String> = (0..count)
        .map(|_| {
            let len = rng.gen_range(40..=60);
            random_sequence(&mut rng, len)
        })
        .collect();
    PAIRS
        .iter()
        .map(|(name, lib, oracle)| {
            let mut worst = 0.0f64;
            for s in &seqs {
                let (a, b) = (lib(s), oracle(s));
                if a.len() != b.len() {
                    return (*name, f64::INFINITY);
                }
                for (x, y) in a.iter().zip(&b) {
                    worst = worst.max((x - y).abs());
                }
            }
            (*name, worst)
        })
        .collect()
}
