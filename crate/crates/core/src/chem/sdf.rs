//! V2000 molfile / SD file reading and writing.
//!
//! Hydrogen atoms in the atom block stay explicit graph nodes. Heavy atoms
//! receive implicit hydrogens from the same valence rule SMILES uses.
//! Bond type 4 is aromatic; the writer always emits Kekulé orders.

use std::fmt::Write as _;
use std::io::Read;

use super::molecule::{assemble, BondOrder, Molecule, RawAtom, RawBond};
use super::ChemError;

fn sdf_err(line: usize, msg: impl Into<String>) -> ChemError {
    ChemError::Sdf { line, msg: msg.into() }
}

/// Fixed-width integer field `[start, start+width)`, falling back to
/// whitespace splitting when the line is not column aligned.
fn field(line: &str, start: usize, width: usize) -> Option<i64> {
    line.get(start..(start + width).min(line.len()))
        .and_then(|s| s.trim().parse().ok())
}

fn parse_counts(line: &str, lineno: usize) -> Result<(usize, usize), ChemError> {
    let fixed = (field(line, 0, 3), field(line, 3, 3));
    let (a, b) = match fixed {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let mut it = line.split_whitespace().map(|t| t.parse::<i64>());
            match (it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b))) => (a, b),
                _ => return Err(sdf_err(lineno, "malformed counts line")),
            }
        }
    };
    if a < 0 || b < 0 {
        return Err(sdf_err(lineno, "negative atom or bond count"));
    }
    Ok((a as usize, b as usize))
}

fn charge_from_code(code: i64) -> i8 {
    match code {
        1 => 3,
        2 => 2,
        3 => 1,
        5 => -1,
        6 => -2,
        7 => -3,
        _ => 0,
    }
}

fn charge_code(charge: i8) -> u8 {
    match charge {
        3 => 1,
        2 => 2,
        1 => 3,
        -1 => 5,
        -2 => 6,
        -3 => 7,
        _ => 0,
    }
}

struct Lines<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, ChemError> {
        let l = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| sdf_err(self.pos + 1, format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok(l)
    }
    fn lineno(&self) -> usize {
        self.pos
    }
}

fn parse_record(lines: &mut Lines<'_>) -> Result<Molecule, ChemError> {
    let title = lines.next("title line")?.trim().to_string();
    lines.next("program line")?;
    lines.next("comment line")?;
    let counts = lines.next("counts line")?;
    let (n_atoms, n_bonds) = parse_counts(counts, lines.lineno())?;

    let mut atoms = Vec::with_capacity(n_atoms);
    let mut coords = Vec::with_capacity(n_atoms);
    for k in 0..n_atoms {
        let line = lines.next("atom line")?;
        let lineno = lines.lineno();
        let toks: Vec<&str> = line.split_whitespace().collect();
        let looks_like_atom = toks.len() >= 4
            && toks[3].starts_with(|c: char| c.is_ascii_alphabetic())
            && !line.starts_with("M  ");
        if !looks_like_atom {
            return Err(sdf_err(
                lineno,
                format!("counts line declares {n_atoms} atoms but atom line {} is missing or malformed", k + 1),
            ));
        }
        let mut p = [0.0; 3];
        for (d, t) in toks[..3].iter().enumerate() {
            p[d] = t.parse().map_err(|_| sdf_err(lineno, format!("bad coordinate '{t}'")))?;
        }
        let element = toks[3].parse()?;
        let charge = toks.get(5).and_then(|t| t.parse().ok()).map(charge_from_code).unwrap_or(0);
        coords.push(p);
        atoms.push(RawAtom {
            element,
            charge,
            hydrogens: None,
            aromatic: false,
            isotope: None,
            chirality: None,
        });
    }

    let mut bonds = Vec::with_capacity(n_bonds);
    for k in 0..n_bonds {
        let line = lines.next("bond line")?;
        let lineno = lines.lineno();
        let fixed = (field(line, 0, 3), field(line, 3, 3), field(line, 6, 3));
        let (a, b, t) = match fixed {
            (Some(a), Some(b), Some(t)) => (a, b, t),
            _ => {
                let v: Vec<i64> = line.split_whitespace().take(3).filter_map(|t| t.parse().ok()).collect();
                if v.len() < 3 {
                    return Err(sdf_err(
                        lineno,
                        format!("counts line declares {n_bonds} bonds but bond line {} is malformed", k + 1),
                    ));
                }
                (v[0], v[1], v[2])
            }
        };
        if a < 1 || b < 1 || a as usize > n_atoms || b as usize > n_atoms {
            return Err(sdf_err(lineno, format!("bond references atom outside 1..={n_atoms}")));
        }
        let order = match t {
            1 => BondOrder::Single,
            2 => BondOrder::Double,
            3 => BondOrder::Triple,
            4 => BondOrder::Aromatic,
            other => return Err(sdf_err(lineno, format!("unsupported bond type {other}"))),
        };
        bonds.push(RawBond { a: a as usize - 1, b: b as usize - 1, order, direction: None });
    }

    // Property block up to M  END; an M  CHG line resets atom-block charges.
    let mut chg_seen = false;
    loop {
        let line = lines.next("M  END")?;
        let lineno = lines.lineno();
        if line.starts_with("M  END") {
            break;
        }
        if line.starts_with("$$$$") {
            return Err(sdf_err(lineno, "record ended before M  END"));
        }
        if let Some(rest) = line.strip_prefix("M  CHG") {
            if !chg_seen {
                for a in atoms.iter_mut() {
                    a.charge = 0;
                }
                chg_seen = true;
            }
            let v: Vec<i64> = rest.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            let count = *v.first().ok_or_else(|| sdf_err(lineno, "empty M  CHG line"))? as usize;
            if v.len() < 1 + 2 * count {
                return Err(sdf_err(lineno, "truncated M  CHG line"));
            }
            for pair in v[1..1 + 2 * count].chunks(2) {
                let idx = pair[0];
                if idx < 1 || idx as usize > n_atoms {
                    return Err(sdf_err(lineno, "M  CHG references a missing atom"));
                }
                atoms[idx as usize - 1].charge = pair[1] as i8;
            }
        }
    }

    for b in &bonds {
        if b.order == BondOrder::Aromatic {
            atoms[b.a].aromatic = true;
            atoms[b.b].aromatic = true;
        }
    }
    let mut m = assemble(atoms, bonds)?.with_coords(coords)?;
    if !title.is_empty() {
        m = m.with_name(title);
    }
    Ok(m)
}

/// Parses every record of an SD file held in memory.
pub fn read_sdf_str(text: &str) -> Result<Vec<Molecule>, ChemError> {
    let mut lines = Lines { lines: text.lines().collect(), pos: 0 };
    let mut out = Vec::new();
    loop {
        // Titles may be blank, so only trailing whitespace ends the file.
        if lines.lines[lines.pos.min(lines.lines.len())..].iter().all(|l| l.trim().is_empty()) {
            break;
        }
        out.push(parse_record(&mut lines)?);
        // Data items until the record separator.
        while let Some(l) = lines.lines.get(lines.pos) {
            lines.pos += 1;
            if l.starts_with("$$$$") {
                break;
            }
        }
    }
    Ok(out)
}

/// Reads an SD stream. Non-UTF-8 bytes are replaced before parsing.
pub fn read_sdf<R: Read>(mut reader: R) -> Result<Vec<Molecule>, ChemError> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| sdf_err(0, format!("read failed: {e}")))?;
    read_sdf_str(&String::from_utf8_lossy(&bytes))
}

/// One molfile record terminated by `$$$$`.
pub fn write_sdf_record(m: &Molecule) -> Result<String, ChemError> {
    let coords = m.coords().ok_or(ChemError::MissingCoordinates)?;
    let mut s = String::new();
    let _ = writeln!(s, "{}", m.name().unwrap_or(""));
    let _ = writeln!(s, "  phvox");
    let _ = writeln!(s);
    let _ = writeln!(s, "{:>3}{:>3}  0  0  0  0  0  0  0  0999 V2000", m.atom_count(), m.bonds().len());
    for (a, p) in m.atoms().iter().zip(coords) {
        let _ = writeln!(
            s,
            "{:>10.4}{:>10.4}{:>10.4} {:<3} 0{:>3}  0  0  0  0  0  0  0  0  0  0",
            p[0],
            p[1],
            p[2],
            a.element.symbol(),
            charge_code(a.charge)
        );
    }
    for b in m.bonds() {
        let _ = writeln!(s, "{:>3}{:>3}{:>3}  0", b.a + 1, b.b + 1, b.kekule);
    }
    let charged: Vec<(usize, i8)> = m
        .atoms()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.charge != 0)
        .map(|(i, a)| (i + 1, a.charge))
        .collect();
    for chunk in charged.chunks(8) {
        let _ = write!(s, "M  CHG{:>3}", chunk.len());
        for (i, c) in chunk {
            let _ = write!(s, " {i:>3} {c:>3}");
        }
        let _ = writeln!(s);
    }
    s.push_str("M  END\n$$$$\n");
    Ok(s)
}

pub fn write_sdf(mols: &[Molecule]) -> Result<String, ChemError> {
    let mut s = String::new();
    for m in mols {
        s.push_str(&write_sdf_record(m)?);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{parse_smiles, write_canonical_smiles, Element};

    const WATER: &str = "water
  test

  3  2  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.1173 O   0  0  0  0  0  0  0  0  0  0  0  0
    0.0000    0.7572   -0.4692 H   0  0  0  0  0  0  0  0  0  0  0  0
    0.0000   -0.7572   -0.4692 H   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0
  1  3  1  0
M  END
$$$$
";

    #[test]
    fn water_coordinates_exact() {
        let mols = read_sdf_str(WATER).unwrap();
        assert_eq!(mols.len(), 1);
        let m = &mols[0];
        assert_eq!(m.atom_count(), 3);
        assert_eq!(m.name(), Some("water"));
        assert_eq!(m.atom(0).element, Element::O);
        assert_eq!(m.atom(0).hydrogens, 0);
        let c = m.coords().unwrap();
        assert_eq!(c[0], [0.0, 0.0, 0.1173]);
        assert_eq!(c[1], [0.0, 0.7572, -0.4692]);
        assert_eq!(c[2], [0.0, -0.7572, -0.4692]);
    }

    #[test]
    fn two_records() {
        let text = format!("{WATER}{WATER}");
        assert_eq!(read_sdf(text.as_bytes()).unwrap().len(), 2);
    }

    #[test]
    fn missing_atom_line_is_an_error() {
        let bad = WATER.replace("  3  2  0", "  5  2  0");
        assert!(matches!(read_sdf_str(&bad), Err(ChemError::Sdf { .. })));
        let bad = WATER.replace("  3  2  0  0", "  4  2  0  0");
        assert!(matches!(read_sdf_str(&bad), Err(ChemError::Sdf { .. })));
    }

    #[test]
    fn malformed_counts_line() {
        let bad = WATER.replace("  3  2  0  0  0  0  0  0  0  0999 V2000", "abc");
        assert!(matches!(read_sdf_str(&bad), Err(ChemError::Sdf { .. })));
    }

    #[test]
    fn unsupported_element() {
        let bad = WATER.replace(" O   0", " Xe  0");
        assert!(matches!(read_sdf_str(&bad), Err(ChemError::UnsupportedElement(_))));
    }

    #[test]
    fn charges_and_aromatic_round_trip() {
        for smi in ["C[NH3+]", "CC(=O)[O-]", "c1ccncc1", "c1cc[nH]c1"] {
            let m = parse_smiles(smi).unwrap();
            let coords = (0..m.atom_count()).map(|i| [i as f64 * 1.5, 0.0, 0.0]).collect();
            let m = m.with_coords(coords).unwrap().with_name("x");
            let text = write_sdf_record(&m).unwrap();
            let back = &read_sdf_str(&text).unwrap()[0];
            assert_eq!(write_canonical_smiles(back), write_canonical_smiles(&m), "{smi}");
            assert_eq!(back.coords(), m.coords());
        }
    }

    #[test]
    fn writing_without_coordinates_fails() {
        let m = parse_smiles("CC").unwrap();
        assert_eq!(write_sdf_record(&m), Err(ChemError::MissingCoordinates));
    }
}
