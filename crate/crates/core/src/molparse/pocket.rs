//! Binding-pocket residue selection.

use super::{distance, ProteinStructure};
use crate::error::{Error, Result};

pub const DEFAULT_POCKET_RADIUS: f64 = 15.0;

pub trait PocketFinder: Send + Sync {
    /// Indices of pocket residues within `structure`.
    fn pocket(&self, structure: &ProteinStructure) -> Result<Vec<usize>>;
}

/// Pocket residues from `finder`, or every residue within `radius` Å of the
/// CA centroid when no finder is configured.
pub fn extract_pocket(
    structure: &ProteinStructure,
    finder: Option<&dyn PocketFinder>,
    radius: f64,
) -> Result<ProteinStructure> {
    let indices = match finder {
        Some(f) => {
            let idx = f.pocket(structure)?;
            if let Some(&bad) = idx.iter().find(|&&i| i >= structure.len()) {
                return Err(Error::Invalid(format!(
                    "pocket residue index {bad} out of range for {} residues",
                    structure.len()
                )));
            }
            idx
        }
        None => {
            let coords = structure.coords();
            let n = coords.len().max(1) as f64;
            let mut c = [0.0; 3];
            for p in &coords {
                for k in 0..3 {
                    c[k] += p[k] / n;
                }
            }
            coords
                .iter()
                .enumerate()
                .filter(|(_, p)| distance(p, &c) <= radius)
                .map(|(i, _)| i)
                .collect()
        }
    };
    if indices.is_empty() {
        return Err(Error::EmptyPocket);
    }
    Ok(structure.subset(&indices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molparse::Residue;

    fn structure(points: &[[f64; 3]]) -> ProteinStructure {
        ProteinStructure {
            residues: points
                .iter()
                .enumerate()
                .map(|(i, &ca)| Residue {
                    code: 'G',
                    chain: 'A',
                    seq_num: i as i32,
                    insertion: ' ',
                    ca,
                })
                .collect(),
            warnings: vec![],
        }
    }

    struct Fixed(Vec<usize>);
    impl PocketFinder for Fixed {
        fn pocket(&self, _: &ProteinStructure) -> Result<Vec<usize>> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn adapter_pass_through() {
        let pts: Vec<[f64; 3]> = (0..30).map(|i| [i as f64, 0.0, 0.0]).collect();
        let s = structure(&pts);
        let p = extract_pocket(&s, Some(&Fixed((5..17).collect())), 15.0).unwrap();
        assert_eq!(p.len(), 12);
    }

    #[test]
    fn fallback_identity_and_single() {
        let s = structure(&[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]);
        assert_eq!(extract_pocket(&s, None, 15.0).unwrap(), s.subset(&[0, 1, 2]));
        let one = structure(&[[3.0, 4.0, 5.0]]);
        assert_eq!(extract_pocket(&one, None, 15.0).unwrap().len(), 1);
    }

    #[test]
    fn empty_pocket() {
        let s = structure(&[[-20.0, 0.0, 0.0], [20.0, 0.0, 0.0]]);
        assert!(matches!(extract_pocket(&s, None, 15.0), Err(Error::EmptyPocket)));
    }
}
