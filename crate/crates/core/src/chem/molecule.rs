//! Attributed molecular graph.
//!
//! A [`Molecule`] is immutable once built. Every constructor funnels through
//! [`assemble`], which assigns implicit hydrogens, kekulizes aromatic input,
//! checks valences, perceives rings (SSSR) and re-derives aromaticity from
//! the Kekulé structure with the Hückel 4n+2 rule. Aromaticity is therefore
//! a property of the graph, not of how it was written.

use serde::{Deserialize, Serialize};

use super::element::Element;
use super::rings::sssr;
use super::ChemError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's valence sum as used by SMILES implicit
    /// hydrogen rules (aromatic counts as one).
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

/// Tetrahedral parity annotation as written (`@` / `@@`). Carried along but
/// never interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chirality {
    CounterClockwise,
    Clockwise,
}

/// Directional single bond annotation (`/` or `\`). Never interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    /// Implicit plus bracket hydrogens; hydrogen atoms present as graph
    /// nodes are not included.
    pub hydrogens: u8,
    pub aromatic: bool,
    pub isotope: Option<u16>,
    pub chirality: Option<Chirality>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    /// Perceived order (aromatic ring bonds are [`BondOrder::Aromatic`]).
    pub order: BondOrder,
    /// Kekulé order, 1..=3.
    pub kekule: u8,
    pub direction: Option<BondDirection>,
}

impl Bond {
    pub fn other(&self, i: usize) -> usize {
        if self.a == i {
            self.b
        } else {
            self.a
        }
    }
}

/// Atom description before normalization. `hydrogens: None` requests the
/// implicit-hydrogen rule; `aromatic` is the written flag.
#[derive(Debug, Clone)]
pub(crate) struct RawAtom {
    pub element: Element,
    pub charge: i8,
    pub hydrogens: Option<u8>,
    pub aromatic: bool,
    pub isotope: Option<u16>,
    pub chirality: Option<Chirality>,
}

#[derive(Debug, Clone)]
pub(crate) struct RawBond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub direction: Option<BondDirection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    coords: Option<Vec<[f64; 3]>>,
    name: Option<String>,
    adjacency: Vec<Vec<(usize, usize)>>,
    rings: Vec<Vec<usize>>,
    ring_atom: Vec<bool>,
    ring_bond: Vec<bool>,
}

impl Molecule {
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element != Element::H).count()
    }

    pub fn coords(&self) -> Option<&[[f64; 3]]> {
        self.coords.as_deref()
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// `(neighbor, bond index)` pairs of atom `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn heavy_degree(&self, i: usize) -> usize {
        self.adjacency[i]
            .iter()
            .filter(|(j, _)| self.atoms[*j].element != Element::H)
            .count()
    }

    /// Hydrogens attached to atom `i`, implicit or explicit nodes.
    pub fn total_hydrogens(&self, i: usize) -> usize {
        self.atoms[i].hydrogens as usize
            + self.adjacency[i]
                .iter()
                .filter(|(j, _)| self.atoms[*j].element == Element::H)
                .count()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|(j, _)| *j == b).map(|(_, e)| *e)
    }

    /// SSSR rings as cyclically ordered atom index lists.
    pub fn rings(&self) -> &[Vec<usize>] {
        &self.rings
    }

    pub fn is_ring_atom(&self, i: usize) -> bool {
        self.ring_atom[i]
    }

    pub fn is_ring_bond(&self, b: usize) -> bool {
        self.ring_bond[b]
    }

    /// Aromatic SSSR rings.
    pub fn aromatic_rings(&self) -> Vec<&[usize]> {
        self.rings
            .iter()
            .filter(|r| {
                (0..r.len()).all(|k| {
                    let (a, b) = (r[k], r[(k + 1) % r.len()]);
                    self.bond_between(a, b)
                        .map(|e| self.bonds[e].order == BondOrder::Aromatic)
                        .unwrap_or(false)
                })
            })
            .map(|r| r.as_slice())
            .collect()
    }

    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut k = 0;
            while k < comp.len() {
                let u = comp[k];
                k += 1;
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    pub fn with_coords(mut self, coords: Vec<[f64; 3]>) -> Result<Self, ChemError> {
        if coords.len() != self.atoms.len() {
            return Err(ChemError::CoordinateCount {
                expected: self.atoms.len(),
                found: coords.len(),
            });
        }
        if coords.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ChemError::NonFiniteCoordinates);
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn without_coords(mut self) -> Self {
        self.coords = None;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Renumbers atoms so that old atom `i` becomes new atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length");
        let mut atoms = vec![None; self.atoms.len()];
        for (i, a) in self.atoms.iter().enumerate() {
            atoms[perm[i]] = Some(a.clone());
        }
        let atoms: Vec<Atom> = atoms.into_iter().map(|a| a.expect("bijection")).collect();
        let mut bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| Bond { a: perm[b.a], b: perm[b.b], ..b.clone() })
            .collect();
        bonds.sort_by_key(|b| (b.a.min(b.b), b.a.max(b.b)));
        let coords = self.coords.as_ref().map(|c| {
            let mut out = vec![[0.0; 3]; c.len()];
            for (i, p) in c.iter().enumerate() {
                out[perm[i]] = *p;
            }
            out
        });
        let raw_atoms = atoms
            .iter()
            .map(|a| RawAtom {
                element: a.element,
                charge: a.charge,
                hydrogens: Some(a.hydrogens),
                aromatic: false,
                isotope: a.isotope,
                chirality: a.chirality,
            })
            .collect();
        let raw_bonds = bonds
            .iter()
            .map(|b| RawBond {
                a: b.a,
                b: b.b,
                order: kekule_order(b.kekule),
                direction: b.direction,
            })
            .collect();
        let mut m = assemble(raw_atoms, raw_bonds).expect("permutation of a valid molecule");
        m.coords = coords;
        m.name = self.name.clone();
        m
    }

    /// Sub-molecule on the atoms where `keep[i]` is true, with hydrogens of
    /// kept atoms increased by the bond orders that were cut.
    pub fn induced_subgraph(&self, keep: &[bool]) -> Molecule {
        let mut new_index = vec![usize::MAX; self.atoms.len()];
        let mut raw_atoms = Vec::new();
        for (i, a) in self.atoms.iter().enumerate() {
            if keep[i] {
                new_index[i] = raw_atoms.len();
                let cut: u8 = self.adjacency[i]
                    .iter()
                    .filter(|(j, _)| !keep[*j])
                    .map(|(_, e)| self.bonds[*e].kekule)
                    .sum();
                raw_atoms.push(RawAtom {
                    element: a.element,
                    charge: a.charge,
                    hydrogens: Some(a.hydrogens + cut),
                    aromatic: false,
                    isotope: a.isotope,
                    chirality: None,
                });
            }
        }
        let raw_bonds = self
            .bonds
            .iter()
            .filter(|b| keep[b.a] && keep[b.b])
            .map(|b| RawBond {
                a: new_index[b.a],
                b: new_index[b.b],
                order: kekule_order(b.kekule),
                direction: None,
            })
            .collect();
        let mut m = assemble(raw_atoms, raw_bonds).expect("subgraph of a valid molecule");
        if let Some(c) = &self.coords {
            m.coords = Some(
                c.iter()
                    .enumerate()
                    .filter(|(i, _)| keep[*i])
                    .map(|(_, p)| *p)
                    .collect(),
            );
        }
        m
    }
}

fn kekule_order(k: u8) -> BondOrder {
    match k {
        2 => BondOrder::Double,
        3 => BondOrder::Triple,
        _ => BondOrder::Single,
    }
}

/// Builds a normalized molecule from raw atoms and bonds.
pub(crate) fn assemble(raw_atoms: Vec<RawAtom>, raw_bonds: Vec<RawBond>) -> Result<Molecule, ChemError> {
    let n = raw_atoms.len();
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, b) in raw_bonds.iter().enumerate() {
        if b.a >= n || b.b >= n {
            return Err(ChemError::InvalidBond(format!("bond {e} references a missing atom")));
        }
        if b.a == b.b {
            return Err(ChemError::InvalidBond(format!("bond {e} joins atom {} to itself", b.a)));
        }
        if adjacency[b.a].iter().any(|(j, _)| *j == b.b) {
            return Err(ChemError::InvalidBond(format!("duplicate bond between {} and {}", b.a, b.b)));
        }
        adjacency[b.a].push((b.b, e));
        adjacency[b.b].push((b.a, e));
    }

    // Implicit hydrogens and pi-electron demand of aromatic atoms.
    let mut hydrogens = vec![0u8; n];
    let mut needs_pi = vec![false; n];
    for (i, a) in raw_atoms.iter().enumerate() {
        let s: u32 = adjacency[i].iter().map(|(_, e)| raw_bonds[*e].order.valence() as u32).sum();
        let has_aromatic_bond = adjacency[i]
            .iter()
            .any(|(_, e)| raw_bonds[*e].order == BondOrder::Aromatic);
        let allowed = a.element.allowed_valences(a.charge);
        match a.hydrogens {
            Some(h) => {
                hydrogens[i] = h;
                if has_aromatic_bond {
                    let total = s + h as u32;
                    if let Some(&v) = allowed.iter().find(|&&v| v as u32 >= total) {
                        needs_pi[i] = v as u32 > total;
                    }
                }
            }
            None => {
                let lowest = allowed.iter().copied().find(|&v| v as u32 >= s);
                let Some(v) = lowest else {
                    return Err(ChemError::Valence { atom: i, element: a.element, valence: s });
                };
                let v = v as u32;
                if has_aromatic_bond {
                    if v > s {
                        needs_pi[i] = true;
                        hydrogens[i] = (v - s - 1) as u8;
                    } else {
                        hydrogens[i] = 0;
                    }
                } else {
                    hydrogens[i] = (v - s) as u8;
                }
            }
        }
    }

    let kekule = kekulize(n, &raw_bonds, &adjacency, &needs_pi)?;

    for (i, a) in raw_atoms.iter().enumerate() {
        let total: u32 = adjacency[i].iter().map(|(_, e)| kekule[*e] as u32).sum::<u32>()
            + hydrogens[i] as u32;
        if total > a.element.max_valence(a.charge) as u32 {
            return Err(ChemError::Valence { atom: i, element: a.element, valence: total });
        }
    }

    let rings = sssr(&adjacency, raw_bonds.len());
    let mut ring_atom = vec![false; n];
    let mut ring_bond = vec![false; raw_bonds.len()];
    for r in &rings {
        for k in 0..r.len() {
            let (a, b) = (r[k], r[(k + 1) % r.len()]);
            ring_atom[a] = true;
            if let Some((_, e)) = adjacency[a].iter().find(|(j, _)| *j == b) {
                ring_bond[*e] = true;
            }
        }
    }

    let mut atoms: Vec<Atom> = raw_atoms
        .iter()
        .enumerate()
        .map(|(i, a)| Atom {
            element: a.element,
            charge: a.charge,
            hydrogens: hydrogens[i],
            aromatic: false,
            isotope: a.isotope,
            chirality: a.chirality,
        })
        .collect();
    let mut bonds: Vec<Bond> = raw_bonds
        .iter()
        .enumerate()
        .map(|(e, b)| Bond {
            a: b.a,
            b: b.b,
            order: kekule_order(kekule[e]),
            kekule: kekule[e],
            direction: b.direction,
        })
        .collect();

    perceive_aromaticity(&mut atoms, &mut bonds, &adjacency, &rings, &ring_atom, &ring_bond);

    Ok(Molecule {
        atoms,
        bonds,
        coords: None,
        name: None,
        adjacency,
        rings,
        ring_atom,
        ring_bond,
    })
}

/// Assigns Kekulé orders: every pi-demanding atom receives exactly one
/// double bond among its aromatic bonds to other pi-demanding atoms.
fn kekulize(
    n: usize,
    bonds: &[RawBond],
    adjacency: &[Vec<(usize, usize)>],
    needs_pi: &[bool],
) -> Result<Vec<u8>, ChemError> {
    let mut order: Vec<u8> = bonds
        .iter()
        .map(|b| match b.order {
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            _ => 1,
        })
        .collect();
    let candidates: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|i| {
            if !needs_pi[i] {
                return Vec::new();
            }
            adjacency[i]
                .iter()
                .copied()
                .filter(|(j, e)| needs_pi[*j] && bonds[*e].order == BondOrder::Aromatic)
                .collect()
        })
        .collect();
    let mut mate = vec![usize::MAX; n];
    let mut budget = 200_000usize;
    if !match_all(&candidates, needs_pi, &mut mate, &mut budget) {
        return Err(ChemError::Kekulize);
    }
    for i in 0..n {
        let j = mate[i];
        if j != usize::MAX && i < j {
            let (_, e) = candidates[i].iter().find(|(k, _)| *k == j).expect("matched edge");
            order[*e] = 2;
        }
    }
    Ok(order)
}

/// Backtracking perfect matching of the pi-demanding atoms, always
/// branching on the unmatched atom with the fewest free partners.
fn match_all(cands: &[Vec<(usize, usize)>], needs: &[bool], mate: &mut [usize], budget: &mut usize) -> bool {
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    let mut best: Option<(usize, usize)> = None;
    for i in 0..needs.len() {
        if needs[i] && mate[i] == usize::MAX {
            let free = cands[i].iter().filter(|(j, _)| mate[*j] == usize::MAX).count();
            if free == 0 {
                return false;
            }
            if best.map(|(_, f)| free < f).unwrap_or(true) {
                best = Some((i, free));
            }
        }
    }
    let Some((i, _)) = best else {
        return true;
    };
    let options: Vec<usize> = cands[i]
        .iter()
        .filter(|(j, _)| mate[*j] == usize::MAX)
        .map(|(j, _)| *j)
        .collect();
    for j in options {
        mate[i] = j;
        mate[j] = i;
        if match_all(cands, needs, mate, budget) {
            return true;
        }
        mate[i] = usize::MAX;
        mate[j] = usize::MAX;
    }
    false
}

/// Pi electrons an atom donates to a ring, or `None` if it cannot be part of
/// an aromatic ring.
fn pi_electrons(
    i: usize,
    atoms: &[Atom],
    bonds: &[Bond],
    adjacency: &[Vec<(usize, usize)>],
    ring_bond: &[bool],
) -> Option<u32> {
    let a = &atoms[i];
    let mut doubles = adjacency[i].iter().filter(|(_, e)| bonds[*e].kekule == 2);
    let first = doubles.next();
    if doubles.next().is_some() || adjacency[i].iter().any(|(_, e)| bonds[*e].kekule == 3) {
        return None;
    }
    if let Some(&(j, e)) = first {
        if ring_bond[e] {
            return Some(1);
        }
        let partner = atoms[j].element;
        return if a.element == Element::C
            && matches!(partner, Element::O | Element::N | Element::S)
        {
            Some(0)
        } else {
            None
        };
    }
    let degree = adjacency[i].len() + a.hydrogens as usize;
    match (a.element, a.charge) {
        (Element::N | Element::P, 0) if degree == 3 => Some(2),
        (Element::N, -1) if degree == 2 => Some(2),
        (Element::O | Element::S | Element::Se, 0) if degree == 2 => Some(2),
        (Element::C, -1) if degree == 3 => Some(2),
        (Element::C, 1) if degree == 3 => Some(0),
        (Element::B, 0) if degree == 3 => Some(0),
        _ => None,
    }
}

fn perceive_aromaticity(
    atoms: &mut [Atom],
    bonds: &mut [Bond],
    adjacency: &[Vec<(usize, usize)>],
    rings: &[Vec<usize>],
    _ring_atom: &[bool],
    ring_bond: &[bool],
) {
    let electrons: Vec<Option<u32>> = (0..atoms.len())
        .map(|i| pi_electrons(i, atoms, bonds, adjacency, ring_bond))
        .collect();
    let candidate = |r: &[usize]| r.iter().all(|&a| electrons[a].is_some());
    let huckel = |atoms_in: &mut dyn Iterator<Item = usize>| {
        let total: u32 = atoms_in.map(|a| electrons[a].unwrap_or(0)).sum();
        total >= 2 && (total - 2) % 4 == 0
    };

    let mut aromatic_ring = vec![false; rings.len()];
    for (k, r) in rings.iter().enumerate() {
        if candidate(r) && huckel(&mut r.iter().copied()) {
            aromatic_ring[k] = true;
        }
    }
    // Fused pairs (azulene-like systems) that are only aromatic jointly.
    for p in 0..rings.len() {
        for q in (p + 1)..rings.len() {
            if aromatic_ring[p] && aromatic_ring[q] {
                continue;
            }
            let (rp, rq) = (&rings[p], &rings[q]);
            if !candidate(rp) || !candidate(rq) {
                continue;
            }
            let shared: Vec<usize> = rp.iter().copied().filter(|a| rq.contains(a)).collect();
            if shared.len() != 2 {
                continue;
            }
            let mut union: Vec<usize> = rp.iter().chain(rq.iter()).copied().collect();
            union.sort_unstable();
            union.dedup();
            if huckel(&mut union.into_iter()) {
                aromatic_ring[p] = true;
                aromatic_ring[q] = true;
            }
        }
    }

    for (k, r) in rings.iter().enumerate() {
        if !aromatic_ring[k] {
            continue;
        }
        for idx in 0..r.len() {
            let (a, b) = (r[idx], r[(idx + 1) % r.len()]);
            atoms[a].aromatic = true;
            if let Some((_, e)) = adjacency[a].iter().find(|(j, _)| *j == b) {
                bonds[*e].order = BondOrder::Aromatic;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn kekule_benzene_is_aromatic() {
        let m = parse_smiles("C1=CC=CC=C1").unwrap();
        assert!(m.atoms().iter().all(|a| a.aromatic));
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        let doubles = m.bonds().iter().filter(|b| b.kekule == 2).count();
        assert_eq!(doubles, 3);
    }

    #[test]
    fn heteroaromatics() {
        for s in ["c1ccncc1", "c1cc[nH]c1", "c1ccoc1", "c1ccsc1", "O=c1cccc[nH]1", "c1ccc2ccccc2c1", "c1ccc2[nH]ccc2c1"] {
            let m = parse_smiles(s).unwrap();
            let ring_atoms: Vec<usize> = (0..m.atom_count()).filter(|&i| m.is_ring_atom(i)).collect();
            assert!(ring_atoms.iter().all(|&i| m.atom(i).aromatic), "{s}");
        }
    }

    #[test]
    fn cyclohexane_and_cyclopentadiene_not_aromatic() {
        assert!(parse_smiles("C1CCCCC1").unwrap().atoms().iter().all(|a| !a.aromatic));
        assert!(parse_smiles("C1=CC=CC1").unwrap().atoms().iter().all(|a| !a.aromatic));
    }

    #[test]
    fn odd_aromatic_ring_fails_to_kekulize() {
        assert!(matches!(parse_smiles("c1cccc1"), Err(ChemError::Kekulize)));
    }

    #[test]
    fn azulene_is_aromatic_as_a_pair() {
        let m = parse_smiles("c1ccc2cccc2cc1").unwrap();
        assert!(m.atoms().iter().all(|a| a.aromatic));
    }

    #[test]
    fn implicit_hydrogens() {
        let m = parse_smiles("CC(=O)O").unwrap();
        let h: Vec<u8> = m.atoms().iter().map(|a| a.hydrogens).collect();
        assert_eq!(h, vec![3, 0, 0, 1]);
        let m = parse_smiles("c1ccncc1").unwrap();
        assert_eq!(m.atom(3).hydrogens, 0);
        assert_eq!(m.atom(0).hydrogens, 1);
    }

    #[test]
    fn permutation_preserves_structure() {
        let m = parse_smiles("CC(=O)Nc1ccccc1").unwrap();
        let perm: Vec<usize> = (0..m.atom_count()).rev().collect();
        let p = m.permuted(&perm);
        assert_eq!(p.atom_count(), m.atom_count());
        assert_eq!(p.atom(perm[3]).element, Element::N);
        assert_eq!(p.aromatic_rings().len(), 1);
    }

    #[test]
    fn subgraph_adds_hydrogens() {
        let m = parse_smiles("CCO").unwrap();
        let sub = m.induced_subgraph(&[true, true, false]);
        assert_eq!(sub.atom(1).hydrogens, 3);
    }
}
