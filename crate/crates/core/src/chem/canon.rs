//! Canonical atom ranking and canonical SMILES output.
//!
//! Ranks start from atom invariants (element, isotope, charge, degree,
//! hydrogen count, aromaticity, ring membership) and are refined by sorted
//! neighbor (bond, rank) lists until stable. Remaining ties are broken by
//! trying each atom of the lowest tied class, refining again, and keeping the
//! lexicographically smallest SMILES over all leaves. Ties between
//! automorphic atoms yield identical strings, so the search only matters
//! for graphs that refinement cannot separate.

use super::molecule::{BondOrder, Molecule};

/// Leaves explored before the tie-break search falls back to first choices.
const LEAF_BUDGET: usize = 64;

fn initial_ranks(m: &Molecule) -> Vec<usize> {
    let keys: Vec<_> = (0..m.atom_count())
        .map(|i| {
            let a = m.atom(i);
            (
                a.element.atomic_number(),
                a.isotope.unwrap_or(0),
                a.charge,
                m.degree(i),
                a.hydrogens,
                a.aromatic,
                m.is_ring_atom(i),
            )
        })
        .collect();
    dense_ranks(&keys)
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("present"))
        .collect()
}

fn class_count(ranks: &[usize]) -> usize {
    let mut r = ranks.to_vec();
    r.sort_unstable();
    r.dedup();
    r.len()
}

fn refine(m: &Molecule, mut ranks: Vec<usize>) -> Vec<usize> {
    let mut classes = class_count(&ranks);
    loop {
        let keys: Vec<(usize, Vec<(u8, usize)>)> = (0..m.atom_count())
            .map(|i| {
                let mut nb: Vec<(u8, usize)> = m
                    .neighbors(i)
                    .iter()
                    .map(|&(j, e)| (m.bonds()[e].order.code(), ranks[j]))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_classes = class_count(&next);
        ranks = next;
        if next_classes == classes {
            return ranks;
        }
        classes = next_classes;
    }
}

struct Search {
    leaves: usize,
    best: Option<(String, Vec<usize>)>,
}

fn search(m: &Molecule, ranks: Vec<usize>, state: &mut Search) {
    let ranks = refine(m, ranks);
    let n = ranks.len();
    let mut counts = vec![0usize; n.max(1)];
    for &r in &ranks {
        counts[r] += 1;
    }
    let tied = (0..n).find(|&r| counts[r] > 1);
    let Some(tied) = tied else {
        let s = write_with_ranks(m, &ranks);
        state.leaves += 1;
        if state.best.as_ref().map(|(b, _)| s < *b).unwrap_or(true) {
            state.best = Some((s, ranks));
        }
        return;
    };
    let candidates: Vec<usize> = (0..n).filter(|&i| ranks[i] == tied).collect();
    let take = if state.leaves >= LEAF_BUDGET { 1 } else { candidates.len() };
    for &c in candidates.iter().take(take) {
        let split: Vec<usize> = ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| 2 * r + usize::from(r == tied && i != c))
            .collect();
        search(m, split, state);
    }
}

fn best_leaf(m: &Molecule) -> (String, Vec<usize>) {
    if m.atom_count() == 0 {
        return (String::new(), Vec::new());
    }
    let mut state = Search { leaves: 0, best: None };
    search(m, initial_ranks(m), &mut state);
    state.best.expect("at least one leaf")
}

/// Canonical, all-distinct atom ranks (0 = first atom written).
pub fn canonical_ranks(m: &Molecule) -> Vec<usize> {
    best_leaf(m).1
}

/// Canonical SMILES: invariant under atom renumbering. Stereo annotations
/// are not written.
pub fn write_canonical_smiles(m: &Molecule) -> String {
    best_leaf(m).0
}

fn bond_symbol(m: &Molecule, e: usize) -> &'static str {
    let b = &m.bonds()[e];
    match b.order {
        BondOrder::Aromatic => "",
        BondOrder::Single => {
            if m.atom(b.a).aromatic && m.atom(b.b).aromatic {
                "-"
            } else {
                ""
            }
        }
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
    }
}

/// Hydrogen count a SMILES reader would assign to this atom if written
/// without brackets, or `None` if it cannot be written that way.
fn implied_hydrogens(m: &Molecule, i: usize) -> Option<u8> {
    let a = m.atom(i);
    if !a.element.organic_subset() || a.charge != 0 || a.isotope.is_some() {
        return None;
    }
    if a.aromatic && !a.element.aromatic_organic() {
        return None;
    }
    let s: u32 = m
        .neighbors(i)
        .iter()
        .map(|&(_, e)| m.bonds()[e].order.valence() as u32)
        .sum();
    let has_aromatic = m
        .neighbors(i)
        .iter()
        .any(|&(_, e)| m.bonds()[e].order == BondOrder::Aromatic);
    let v = a
        .element
        .allowed_valences(0)
        .into_iter()
        .find(|&v| v as u32 >= s)? as u32;
    Some(if has_aromatic {
        if v > s {
            (v - s - 1) as u8
        } else {
            0
        }
    } else {
        (v - s) as u8
    })
}

fn atom_text(m: &Molecule, i: usize) -> String {
    let a = m.atom(i);
    let symbol = if a.aromatic {
        a.element.symbol().to_ascii_lowercase()
    } else {
        a.element.symbol().to_string()
    };
    if implied_hydrogens(m, i) == Some(a.hydrogens) {
        return symbol;
    }
    let mut s = String::from("[");
    if let Some(iso) = a.isotope {
        s.push_str(&iso.to_string());
    }
    s.push_str(&symbol);
    match a.hydrogens {
        0 => {}
        1 => s.push('H'),
        h => {
            s.push('H');
            s.push_str(&h.to_string());
        }
    }
    match a.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => s.push_str(&format!("+{c}")),
        c => s.push_str(&format!("-{}", -c)),
    }
    s.push(']');
    s
}

struct Writer<'a> {
    m: &'a Molecule,
    ranks: &'a [usize],
    visited: Vec<bool>,
    children: Vec<Vec<(usize, usize)>>,
    closures: Vec<Vec<(usize, usize)>>,
    closure_bond: Vec<bool>,
    emitted: Vec<bool>,
    digit_of_bond: Vec<Option<u32>>,
    free_digits: Vec<bool>,
    out: String,
}

impl Writer<'_> {
    fn sorted_neighbors(&self, u: usize) -> Vec<(usize, usize)> {
        let mut nb = self.m.neighbors(u).to_vec();
        nb.sort_by_key(|&(j, _)| self.ranks[j]);
        nb
    }

    fn build_tree(&mut self, u: usize, parent_bond: Option<usize>) {
        self.visited[u] = true;
        for (v, e) in self.sorted_neighbors(u) {
            if Some(e) == parent_bond || self.closure_bond[e] {
                continue;
            }
            if self.visited[v] {
                self.closure_bond[e] = true;
                self.closures[u].push((v, e));
                self.closures[v].push((u, e));
            } else {
                self.children[u].push((v, e));
                self.build_tree(v, Some(e));
            }
        }
    }

    fn take_digit(&mut self) -> u32 {
        let d = self
            .free_digits
            .iter()
            .skip(1)
            .position(|&f| f)
            .map(|p| p + 1)
            .expect("fewer than 100 open rings");
        self.free_digits[d] = false;
        d as u32
    }

    fn emit(&mut self, u: usize) {
        self.emitted[u] = true;
        self.out.push_str(&atom_text(self.m, u));
        let mut closures = self.closures[u].clone();
        closures.sort_by_key(|&(v, _)| self.ranks[v]);
        let mut released = Vec::new();
        for (v, e) in closures {
            let digit = if self.emitted[v] {
                let d = self.digit_of_bond[e].expect("ring opened");
                released.push(d);
                d
            } else {
                let d = self.take_digit();
                self.digit_of_bond[e] = Some(d);
                self.out.push_str(bond_symbol(self.m, e));
                d
            };
            if digit < 10 {
                self.out.push_str(&digit.to_string());
            } else {
                self.out.push_str(&format!("%{digit:02}"));
            }
        }
        for d in released {
            self.free_digits[d as usize] = true;
        }
        let children = self.children[u].clone();
        let last = children.len().saturating_sub(1);
        for (k, (v, e)) in children.into_iter().enumerate() {
            if k < last {
                self.out.push('(');
            }
            self.out.push_str(bond_symbol(self.m, e));
            self.emit(v);
            if k < last {
                self.out.push(')');
            }
        }
    }
}

fn write_with_ranks(m: &Molecule, ranks: &[usize]) -> String {
    let n = m.atom_count();
    let mut w = Writer {
        m,
        ranks,
        visited: vec![false; n],
        children: vec![Vec::new(); n],
        closures: vec![Vec::new(); n],
        closure_bond: vec![false; m.bonds().len()],
        emitted: vec![false; n],
        digit_of_bond: vec![None; m.bonds().len()],
        free_digits: vec![true; 100],
        out: String::new(),
    };
    let mut comps = m.components();
    comps.sort_by_key(|c| c.iter().map(|&i| ranks[i]).min());
    for (k, comp) in comps.iter().enumerate() {
        let start = *comp.iter().min_by_key(|&&i| ranks[i]).expect("non-empty");
        w.build_tree(start, None);
        if k > 0 {
            w.out.push('.');
        }
        w.emit(start);
    }
    w.out
}
