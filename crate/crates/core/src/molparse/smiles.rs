//! SMILES reader for the organic subset, bracket atoms, branches and ring
//! closures. Stereo marks are consumed and dropped; aromaticity is taken
//! from lowercase symbols as written.

use std::collections::BTreeMap;

use super::elements::{atomic_number, default_valences};
use super::{bond_valence_sum, Atom, Bond, BondOrder, MolecularGraph};
use crate::error::{Error, Result};

struct RingOpen {
    atom: usize,
    order: Option<BondOrder>,
    position: usize,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    graph: MolecularGraph,
    /// Whether the atom's hydrogen count was written explicitly (bracket atom).
    bracket: Vec<bool>,
    rings: BTreeMap<u32, RingOpen>,
    branches: Vec<(usize, usize)>,
    prev: Option<usize>,
    pending_bond: Option<(BondOrder, usize)>,
}

pub fn parse_smiles(smiles: &str) -> Result<MolecularGraph> {
    let mut p = Parser {
        src: smiles.as_bytes(),
        pos: 0,
        graph: MolecularGraph::default(),
        bracket: Vec::new(),
        rings: BTreeMap::new(),
        branches: Vec::new(),
        prev: None,
        pending_bond: None,
    };
    p.run()?;
    Ok(p.graph)
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn err<T>(&self, position: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::parse(position, message))
    }

    fn run(&mut self) -> Result<()> {
        if self.src.is_empty() {
            return self.err(0, "empty SMILES");
        }
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    let Some(prev) = self.prev else {
                        return self.err(start, "branch opened before any atom");
                    };
                    if self.pending_bond.is_some() {
                        return self.err(start, "bond symbol before branch");
                    }
                    self.branches.push((prev, start));
                    self.pos += 1;
                }
                b')' => {
                    let Some((atom, _)) = self.branches.pop() else {
                        return self.err(start, "unbalanced ')'");
                    };
                    if self.pending_bond.is_some() {
                        return self.err(start, "bond symbol without a following atom");
                    }
                    if self.src.get(start.wrapping_sub(1)) == Some(&b'(') {
                        return self.err(start, "empty branch");
                    }
                    self.prev = Some(atom);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.pending_bond.is_some() {
                        return self.err(start, "consecutive bond symbols");
                    }
                    if self.prev.is_none() {
                        return self.err(start, "bond symbol before any atom");
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    // '/' and '\' only carry stereo; they bond like '-'.
                    self.pending_bond = Some((order, start));
                    self.pos += 1;
                }
                b'.' => {
                    if self.pending_bond.is_some() || self.prev.is_none() {
                        return self.err(start, "misplaced '.'");
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => self.bracket_atom()?,
                _ => self.organic_atom()?,
            }
        }
        if let Some((order, pos)) = self.pending_bond {
            let _ = order;
            return self.err(pos, "bond symbol at end of input");
        }
        if let Some(&(_, pos)) = self.branches.last() {
            return self.err(pos, "unclosed branch");
        }
        if let Some(open) = self.rings.values().next() {
            return self.err(open.position, "unclosed ring bond");
        }
        self.graph.refresh_topology();
        self.fill_hydrogens();
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<()> {
        let start = self.pos;
        let Some(prev) = self.prev else {
            return self.err(start, "ring closure before any atom");
        };
        let label = if self.src[start] == b'%' {
            let digits = self.src.get(start + 1..start + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    u32::from(d[0] - b'0') * 10 + u32::from(d[1] - b'0')
                }
                _ => return self.err(start, "'%' must be followed by two digits"),
            }
        } else {
            self.pos += 1;
            u32::from(self.src[start] - b'0')
        };
        let bond = self.pending_bond.take();
        match self.rings.remove(&label) {
            None => {
                self.rings.insert(
                    label,
                    RingOpen {
                        atom: prev,
                        order: bond.map(|b| b.0),
                        position: start,
                    },
                );
            }
            Some(open) => {
                let order = match (open.order, bond.map(|b| b.0)) {
                    (Some(a), Some(b)) if a != b => {
                        return self.err(start, "conflicting ring bond orders")
                    }
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => self.implicit_order(open.atom, prev),
                };
                self.add_bond(open.atom, prev, order, start)?;
            }
        }
        Ok(())
    }

    fn implicit_order(&self, a: usize, b: usize) -> BondOrder {
        if self.graph.atoms[a].aromatic && self.graph.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, order: BondOrder, pos: usize) -> Result<()> {
        if a == b {
            return self.err(pos, "ring closure onto the same atom");
        }
        let duplicate = self
            .graph
            .bonds
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a));
        if duplicate {
            return self.err(pos, "duplicate bond");
        }
        self.graph.bonds.push(Bond { a, b, order });
        Ok(())
    }

    fn push_atom(&mut self, atom: Atom, bracket: bool) -> Result<()> {
        let idx = self.graph.atoms.len();
        self.graph.atoms.push(atom);
        self.bracket.push(bracket);
        if let Some(prev) = self.prev {
            let order = match self.pending_bond.take() {
                Some((o, _)) => o,
                None => self.implicit_order(prev, idx),
            };
            self.add_bond(prev, idx, order, self.pos)?;
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<()> {
        let start = self.pos;
        let c = self.src[start];
        let next = self.src.get(start + 1).copied();
        let (symbol, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => ("Cl", false, 2),
            (b'B', Some(b'r')) => ("Br", false, 2),
            (b'B', _) => ("B", false, 1),
            (b'C', _) => ("C", false, 1),
            (b'N', _) => ("N", false, 1),
            (b'O', _) => ("O", false, 1),
            (b'P', _) => ("P", false, 1),
            (b'S', _) => ("S", false, 1),
            (b'F', _) => ("F", false, 1),
            (b'I', _) => ("I", false, 1),
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            _ => {
                let shown = String::from_utf8_lossy(&self.src[start..(start + 1).min(self.src.len())]);
                return self.err(start, format!("unexpected character '{shown}'"));
            }
        };
        self.pos += len;
        let atom = Atom {
            atomic_number: atomic_number(symbol).expect("organic subset symbol"),
            degree: 0,
            formal_charge: 0,
            aromatic,
            in_ring: false,
            implicit_h: 0,
        };
        self.push_atom(atom, false)
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) && self.pos - start < 4 {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
    }

    fn bracket_atom(&mut self) -> Result<()> {
        let open = self.pos;
        self.pos += 1;
        let _isotope = self.read_number();

        let sym_start = self.pos;
        let first = self.peek().ok_or_else(|| Error::parse(open, "unterminated bracket atom"))?;
        let (symbol, aromatic) = if first.is_ascii_uppercase() {
            let two = self
                .src
                .get(sym_start..sym_start + 2)
                .and_then(|s| std::str::from_utf8(s).ok())
                .filter(|s| s.as_bytes()[1].is_ascii_lowercase() && atomic_number(s).is_some());
            match two {
                Some(s) => (s.to_string(), false),
                None => ((first as char).to_string(), false),
            }
        } else if first.is_ascii_lowercase() {
            let two = self.src.get(sym_start..sym_start + 2);
            let name = match two {
                Some(b"se") => "Se",
                Some(b"as") => "As",
                Some(b"te") => "Te",
                _ => match first {
                    b'b' => "B",
                    b'c' => "C",
                    b'n' => "N",
                    b'o' => "O",
                    b'p' => "P",
                    b's' => "S",
                    _ => return self.err(sym_start, "unknown aromatic symbol"),
                },
            };
            (name.to_string(), true)
        } else {
            return self.err(sym_start, "expected element symbol in bracket atom");
        };
        let Some(z) = atomic_number(&symbol) else {
            return self.err(sym_start, format!("unknown element '{symbol}'"));
        };
        self.pos += symbol.len();

        // Chirality: '@', '@@', or '@' followed by a class tag like TH1/SP2/OH12.
        let mut chiral = false;
        while self.peek() == Some(b'@') {
            self.pos += 1;
            chiral = true;
        }
        if chiral {
            let tag = self.src.get(self.pos..self.pos + 2);
            if matches!(tag, Some(b"TH" | b"AL" | b"SP" | b"TB" | b"OH")) {
                self.pos += 2;
                self.read_number();
            }
        }

        let mut hydrogens = 0;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogens = self.read_number().unwrap_or(1);
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.read_number() {
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.read_number().is_none() {
                return self.err(self.pos, "atom class needs a number");
            }
        }

        if self.peek() != Some(b']') {
            return self.err(self.pos.min(self.src.len()), "expected ']'");
        }
        self.pos += 1;

        let atom = Atom {
            atomic_number: z,
            degree: 0,
            formal_charge: charge,
            aromatic,
            in_ring: false,
            implicit_h: hydrogens,
        };
        self.push_atom(atom, true)
    }

    fn fill_hydrogens(&mut self) {
        for i in 0..self.graph.atoms.len() {
            if self.bracket[i] {
                continue;
            }
            let atom = &self.graph.atoms[i];
            let valences = default_valences(atom.atomic_number);
            let used = bond_valence_sum(&self.graph, i);
            let h = if atom.aromatic {
                let lowest = valences.first().copied().unwrap_or(0);
                lowest.saturating_sub(used + 1)
            } else {
                valences
                    .iter()
                    .find(|&&v| v >= used)
                    .map_or(0, |&v| v - used)
            };
            self.graph.atoms[i].implicit_h = h;
        }
    }
}
