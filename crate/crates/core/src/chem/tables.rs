//! Versioned chemistry data shipped in `data/chem_tables.json`: the tokenizer
//! pattern, the bond-length table and covalent radii.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::Deserialize;

use super::element::Element;
use super::molecule::BondOrder;

const RAW: &str = include_str!("../../../../data/chem_tables.json");

#[derive(Debug, Deserialize)]
struct RawTables {
    version: u32,
    tokenizer_pattern: String,
    bond_lengths: Vec<(String, String, u8, f64)>,
    covalent_radii: HashMap<String, f64>,
}

#[derive(Debug)]
pub struct ChemTables {
    pub version: u32,
    pub tokenizer_pattern: String,
    bond_lengths: HashMap<(Element, Element, u8), f64>,
    radii: HashMap<Element, f64>,
}

impl ChemTables {
    /// Tabulated length for the element pair and bond order, falling back to
    /// the sum of covalent radii (shortened 0.1 Å per extra bond order).
    pub fn bond_length(&self, a: Element, b: Element, order: BondOrder) -> f64 {
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        if let Some(&l) = self.bond_lengths.get(&(x, y, order.code())) {
            return l;
        }
        if order == BondOrder::Aromatic {
            if let (Some(s), Some(d)) = (
                self.bond_lengths.get(&(x, y, 1)),
                self.bond_lengths.get(&(x, y, 2)),
            ) {
                return 0.5 * (s + d);
            }
        }
        let r = self.radius(a) + self.radius(b);
        match order {
            BondOrder::Single => r,
            BondOrder::Aromatic => r - 0.07,
            BondOrder::Double => r - 0.1,
            BondOrder::Triple => r - 0.2,
        }
    }

    pub fn radius(&self, e: Element) -> f64 {
        self.radii.get(&e).copied().unwrap_or(0.76)
    }
}

/// Parsed tables; the data file is compiled in, so parsing cannot fail at
/// runtime unless the file itself is broken.
pub fn tables() -> &'static ChemTables {
    static TABLES: OnceLock<ChemTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let raw: RawTables = serde_json::from_str(RAW).expect("chem_tables.json is valid");
        let mut bond_lengths = HashMap::new();
        for (a, b, order, len) in raw.bond_lengths {
            let a: Element = a.parse().expect("known element");
            let b: Element = b.parse().expect("known element");
            let key = if a <= b { (a, b, order) } else { (b, a, order) };
            bond_lengths.insert(key, len);
        }
        let radii = raw
            .covalent_radii
            .into_iter()
            .map(|(k, v)| (k.parse().expect("known element"), v))
            .collect();
        ChemTables {
            version: raw.version,
            tokenizer_pattern: raw.tokenizer_pattern,
            bond_lengths,
            radii,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_lookups() {
        let t = tables();
        assert_eq!(t.version, 1);
        assert_eq!(t.bond_length(Element::C, Element::C, BondOrder::Single), 1.54);
        assert_eq!(t.bond_length(Element::O, Element::C, BondOrder::Double), 1.22);
        assert_eq!(t.bond_length(Element::H, Element::N, BondOrder::Single), 1.01);
        let fallback = t.bond_length(Element::Br, Element::Br, BondOrder::Single);
        assert!((fallback - 2.40).abs() < 1e-12);
    }
}
