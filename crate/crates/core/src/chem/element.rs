use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ChemError;

/// Elements accepted anywhere in the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    H,
    B,
    C,
    N,
    O,
    F,
    Si,
    P,
    S,
    Cl,
    Se,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 13] = [
        Element::H,
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::Si,
        Element::P,
        Element::S,
        Element::Cl,
        Element::Se,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::Si => "Si",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Se => "Se",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::H => 1,
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::F => 9,
            Element::Si => 14,
            Element::P => 15,
            Element::S => 16,
            Element::Cl => 17,
            Element::Se => 34,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    fn valence_electrons(self) -> i32 {
        match self {
            Element::H => 1,
            Element::B => 3,
            Element::C | Element::Si => 4,
            Element::N | Element::P => 5,
            Element::O | Element::S | Element::Se => 6,
            Element::F | Element::Cl | Element::Br | Element::I => 7,
        }
    }

    /// Elements beyond the second period may expand their octet.
    fn hypervalent(self) -> bool {
        matches!(self, Element::P | Element::S | Element::Se)
    }

    /// Member of the SMILES organic subset (may be written without brackets).
    pub fn organic_subset(self) -> bool {
        matches!(
            self,
            Element::B
                | Element::C
                | Element::N
                | Element::O
                | Element::P
                | Element::S
                | Element::F
                | Element::Cl
                | Element::Br
                | Element::I
        )
    }

    /// May appear as a lowercase aromatic symbol outside brackets.
    pub fn aromatic_organic(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
        )
    }

    /// Permitted total valences (bond orders plus hydrogens), ascending,
    /// for the given formal charge.
    pub fn allowed_valences(self, charge: i8) -> Vec<u8> {
        if self == Element::H {
            return if charge == 0 { vec![1] } else { vec![0] };
        }
        let e = self.valence_electrons() - charge as i32;
        if e < 0 {
            return vec![0];
        }
        let base = if e <= 4 { e } else { 8 - e };
        let mut out = vec![base.max(0) as u8];
        if self.hypervalent() && e >= 5 {
            let mut v = base + 2;
            while v <= e {
                out.push(v as u8);
                v += 2;
            }
        }
        out
    }

    pub fn max_valence(self, charge: i8) -> u8 {
        *self.allowed_valences(charge).last().unwrap_or(&0)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Element {
    type Err = ChemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Element::ALL
            .iter()
            .copied()
            .find(|e| e.symbol() == s)
            .ok_or_else(|| ChemError::UnsupportedElement(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valences_follow_charge() {
        assert_eq!(Element::C.allowed_valences(0), vec![4]);
        assert_eq!(Element::N.allowed_valences(0), vec![3]);
        assert_eq!(Element::N.allowed_valences(1), vec![4]);
        assert_eq!(Element::O.allowed_valences(-1), vec![1]);
        assert_eq!(Element::O.allowed_valences(1), vec![3]);
        assert_eq!(Element::S.allowed_valences(0), vec![2, 4, 6]);
        assert_eq!(Element::P.allowed_valences(0), vec![3, 5]);
        assert_eq!(Element::C.allowed_valences(-1), vec![3]);
        assert_eq!(Element::B.allowed_valences(-1), vec![4]);
        assert_eq!(Element::Cl.allowed_valences(0), vec![1]);
    }

    #[test]
    fn parse_symbols() {
        assert_eq!("Cl".parse::<Element>().unwrap(), Element::Cl);
        assert!("Xe".parse::<Element>().is_err());
    }
}
