//! SMILES reader (OpenSMILES subset: organic and bracket atoms, branches,
//! ring closures including `%nn`, bond symbols, disconnected components).

use std::collections::BTreeMap;

use super::element::Element;
use super::molecule::{assemble, BondDirection, BondOrder, Chirality, Molecule, RawAtom, RawBond};
use super::ChemError;

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<RawAtom>,
    bonds: Vec<RawBond>,
    /// Bond symbol and direction waiting for the next atom or ring digit.
    pending: Option<(BondOrder, Option<BondDirection>, usize)>,
    /// ring number -> (atom, bond symbol, position)
    open_rings: BTreeMap<u32, (usize, Option<(BondOrder, Option<BondDirection>)>, usize)>,
}

fn syntax(pos: usize, msg: impl Into<String>) -> ChemError {
    ChemError::Syntax { pos, msg: msg.into() }
}

/// Parses a SMILES string into a normalized molecule.
pub fn parse_smiles(text: &str) -> Result<Molecule, ChemError> {
    if text.is_empty() {
        return Err(syntax(0, "empty SMILES"));
    }
    if !text.is_ascii() {
        return Err(syntax(0, "non-ASCII character"));
    }
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        pending: None,
        open_rings: BTreeMap::new(),
    };
    p.run()?;
    assemble(p.atoms, p.bonds)
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<(), ChemError> {
        let mut prev: Option<usize> = None;
        let mut branches: Vec<(Option<usize>, usize)> = Vec::new();
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if prev.is_none() {
                        return Err(syntax(start, "branch before any atom"));
                    }
                    if self.pending.is_some() {
                        return Err(syntax(start, "bond symbol before branch"));
                    }
                    branches.push((prev, start));
                    self.pos += 1;
                }
                b')' => {
                    let Some((p, _)) = branches.pop() else {
                        return Err(syntax(start, "unmatched ')'"));
                    };
                    if self.pending.is_some() {
                        return Err(syntax(start, "bond symbol without atom"));
                    }
                    prev = p;
                    self.pos += 1;
                }
                b'.' => {
                    if self.pending.is_some() {
                        return Err(syntax(start, "bond symbol before '.'"));
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.pending.is_some() {
                        return Err(syntax(start, "consecutive bond symbols"));
                    }
                    let (order, dir) = match c {
                        b'-' => (BondOrder::Single, None),
                        b'=' => (BondOrder::Double, None),
                        b'#' => (BondOrder::Triple, None),
                        b':' => (BondOrder::Aromatic, None),
                        b'/' => (BondOrder::Single, Some(BondDirection::Up)),
                        _ => (BondOrder::Single, Some(BondDirection::Down)),
                    };
                    self.pending = Some((order, dir, start));
                    self.pos += 1;
                }
                b'$' => return Err(syntax(start, "quadruple bonds are not supported")),
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return Err(syntax(start, "ring closure before any atom"));
                    };
                    let num = self.ring_number()?;
                    self.ring_closure(atom, num, start)?;
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.attach(prev, atom)?;
                    prev = Some(atom);
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.attach(prev, atom)?;
                    prev = Some(atom);
                }
            }
        }
        if let Some((_, pos)) = branches.last() {
            return Err(syntax(*pos, "unclosed '('"));
        }
        if let Some((_, _, pos)) = self.pending {
            return Err(syntax(pos, "bond symbol at end of input"));
        }
        if let Some((num, (_, _, pos))) = self.open_rings.iter().next() {
            return Err(syntax(*pos, format!("unclosed ring bond {num}")));
        }
        if self.atoms.is_empty() {
            return Err(syntax(0, "no atoms"));
        }
        Ok(())
    }

    fn implicit_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn attach(&mut self, prev: Option<usize>, atom: usize) -> Result<(), ChemError> {
        let pending = self.pending.take();
        match prev {
            Some(p) => {
                let (order, direction) = match pending {
                    Some((o, d, _)) => (o, d),
                    None => (self.implicit_order(p, atom), None),
                };
                self.bonds.push(RawBond { a: p, b: atom, order, direction });
            }
            None => {
                if let Some((_, _, pos)) = pending {
                    return Err(syntax(pos, "bond symbol without preceding atom"));
                }
            }
        }
        Ok(())
    }

    fn ring_number(&mut self) -> Result<u32, ChemError> {
        let start = self.pos;
        if self.peek() == Some(b'%') {
            let digits = self.text.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                }
                _ => Err(syntax(start, "'%' must be followed by two digits")),
            }
        } else {
            let d = self.peek().expect("digit");
            self.pos += 1;
            Ok((d - b'0') as u32)
        }
    }

    fn ring_closure(&mut self, atom: usize, num: u32, pos: usize) -> Result<(), ChemError> {
        let here = self.pending.take().map(|(o, d, _)| (o, d));
        match self.open_rings.remove(&num) {
            None => {
                self.open_rings.insert(num, (atom, here, pos));
            }
            Some((other, there, _)) => {
                if other == atom {
                    return Err(syntax(pos, "ring closure to the same atom"));
                }
                if self.bonds.iter().any(|b| {
                    (b.a == atom && b.b == other) || (b.a == other && b.b == atom)
                }) {
                    return Err(syntax(pos, "ring closure duplicates an existing bond"));
                }
                let (order, direction) = match (here, there) {
                    (Some(x), Some(y)) if x.0 != y.0 => {
                        return Err(syntax(pos, "conflicting ring closure bond orders"));
                    }
                    (Some(x), _) => x,
                    (None, Some(y)) => y,
                    (None, None) => (self.implicit_order(other, atom), None),
                };
                self.bonds.push(RawBond { a: other, b: atom, order, direction });
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<usize, ChemError> {
        let start = self.pos;
        let rest = &self.text[self.pos..];
        let (element, aromatic, len) = match rest {
            [b'C', b'l', ..] => (Element::Cl, false, 2),
            [b'B', b'r', ..] => (Element::Br, false, 2),
            [b'B', ..] => (Element::B, false, 1),
            [b'C', ..] => (Element::C, false, 1),
            [b'N', ..] => (Element::N, false, 1),
            [b'O', ..] => (Element::O, false, 1),
            [b'P', ..] => (Element::P, false, 1),
            [b'S', ..] => (Element::S, false, 1),
            [b'F', ..] => (Element::F, false, 1),
            [b'I', ..] => (Element::I, false, 1),
            [b'b', ..] => (Element::B, true, 1),
            [b'c', ..] => (Element::C, true, 1),
            [b'n', ..] => (Element::N, true, 1),
            [b'o', ..] => (Element::O, true, 1),
            [b'p', ..] => (Element::P, true, 1),
            [b's', ..] => (Element::S, true, 1),
            [b'*', ..] => return Err(ChemError::UnsupportedElement("*".into())),
            [c, ..] if c.is_ascii_alphabetic() => {
                let end = rest
                    .iter()
                    .skip(1)
                    .position(|x| !x.is_ascii_lowercase())
                    .map(|p| p + 1)
                    .unwrap_or(rest.len())
                    .min(2);
                return Err(ChemError::UnsupportedElement(
                    String::from_utf8_lossy(&rest[..end]).into_owned(),
                ));
            }
            _ => return Err(syntax(start, format!("unexpected character '{}'", rest[0] as char))),
        };
        self.pos += len;
        self.atoms.push(RawAtom {
            element,
            charge: 0,
            hydrogens: None,
            aromatic,
            isotope: None,
            chirality: None,
        });
        Ok(self.atoms.len() - 1)
    }

    fn number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().map(|c| c.is_ascii_digit()).unwrap_or(false) {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            std::str::from_utf8(&self.text[start..self.pos]).ok()?.parse().ok()
        }
    }

    fn bracket_atom(&mut self) -> Result<usize, ChemError> {
        let open = self.pos;
        self.pos += 1;
        let close = self.text[open..]
            .iter()
            .position(|&c| c == b']')
            .map(|p| open + p)
            .ok_or_else(|| syntax(open, "unclosed '['"))?;

        let isotope = self.number().map(|n| n as u16);

        let rest = &self.text[self.pos..close];
        let (element, aromatic, len) = match rest {
            [b's', b'e', ..] => (Element::Se, true, 2),
            [b'c', ..] => (Element::C, true, 1),
            [b'n', ..] => (Element::N, true, 1),
            [b'o', ..] => (Element::O, true, 1),
            [b'p', ..] => (Element::P, true, 1),
            [b's', ..] => (Element::S, true, 1),
            [b'b', ..] => (Element::B, true, 1),
            [u, l, ..] if u.is_ascii_uppercase() && l.is_ascii_lowercase() => {
                let sym = String::from_utf8_lossy(&rest[..2]).into_owned();
                (sym.parse::<Element>()?, false, 2)
            }
            [u, ..] if u.is_ascii_uppercase() => {
                let sym = (*u as char).to_string();
                (sym.parse::<Element>()?, false, 1)
            }
            [b'*', ..] => return Err(ChemError::UnsupportedElement("*".into())),
            _ => return Err(syntax(self.pos, "missing element symbol in bracket atom")),
        };
        self.pos += len;

        let mut chirality = None;
        if self.peek() == Some(b'@') {
            self.pos += 1;
            chirality = Some(Chirality::CounterClockwise);
            if self.peek() == Some(b'@') {
                self.pos += 1;
                chirality = Some(Chirality::Clockwise);
            } else {
                // @TH1, @AL2, ... : class letters and number, kept as plain @
                while self.peek().map(|c| c.is_ascii_uppercase()).unwrap_or(false) && self.pos < close {
                    self.pos += 1;
                }
                self.number();
            }
        }

        let mut hydrogens = 0u8;
        if self.peek() == Some(b'H') && self.pos < close {
            self.pos += 1;
            hydrogens = self.number().map(|n| n as u8).unwrap_or(1);
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.number() {
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.number().is_none() {
                return Err(syntax(self.pos, "atom class needs a number"));
            }
        }

        if self.pos != close {
            return Err(syntax(self.pos, "unexpected characters in bracket atom"));
        }
        self.pos = close + 1;
        if !(-7..=7).contains(&charge) {
            return Err(syntax(open, "formal charge out of range"));
        }
        self.atoms.push(RawAtom {
            element,
            charge: charge as i8,
            hydrogens: Some(hydrogens),
            aromatic,
            isotope,
            chirality,
        });
        Ok(self.atoms.len() - 1)
    }
}

/// One line of a SMILES file: the string and an optional name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmilesRecord {
    pub smiles: String,
    pub name: Option<String>,
}

/// Splits a SMILES file (one SMILES per line, optional tab-separated name).
/// Blank lines and lines starting with `#` are skipped.
pub fn read_smiles_lines(text: &str) -> Vec<SmilesRecord> {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut parts = l.splitn(2, '\t');
            let smiles = parts.next().unwrap_or("").trim().to_string();
            let name = parts.next().map(|n| n.trim().to_string()).filter(|n| !n.is_empty());
            SmilesRecord { smiles, name }
        })
        .collect()
}
