//! Circular fingerprints, Tanimoto similarity, an exact-scan library index
//! and Bemis–Murcko scaffolds.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};
use std::ops::Range;

use thiserror::Error;

use crate::chem::{parse_smiles, write_canonical_smiles, BondOrder, ChemError, Element, Molecule};

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_NBITS: usize = 2048;
pub const MAX_RADIUS: u32 = 4;
pub const PHIX_VERSION: u32 = 1;
const PHIX_MAGIC: &[u8; 4] = b"PHIX";

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("fingerprint lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("fingerprint length {0} is not a power of two")]
    InvalidLength(usize),
    #[error("radius {0} outside 0..={MAX_RADIUS}")]
    InvalidRadius(u32),
    #[error("index is empty")]
    EmptyIndex,
    #[error("duplicate id {0}")]
    DuplicateId(u64),
    #[error("index format: {0}")]
    Format(String),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fixed-length bit vector packed into little-endian 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    nbits: usize,
    words: Vec<u64>,
}

impl Fingerprint {
    pub fn new(nbits: usize) -> Result<Self, SimilarityError> {
        if !nbits.is_power_of_two() || nbits < 64 {
            return Err(SimilarityError::InvalidLength(nbits));
        }
        Ok(Fingerprint { nbits, words: vec![0; nbits / 64] })
    }

    pub fn from_bits(nbits: usize, bits: impl IntoIterator<Item = usize>) -> Result<Self, SimilarityError> {
        let mut f = Fingerprint::new(nbits)?;
        for b in bits {
            f.set(b % nbits);
        }
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.nbits
    }

    pub fn is_empty(&self) -> bool {
        self.count_ones() == 0
    }

    pub fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(|&b| self.get(b))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.words.iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    pub fn from_bytes(nbits: usize, bytes: &[u8]) -> Result<Self, SimilarityError> {
        let mut f = Fingerprint::new(nbits)?;
        if bytes.len() != nbits / 8 {
            return Err(SimilarityError::Format(format!("expected {} fingerprint bytes, got {}", nbits / 8, bytes.len())));
        }
        for (w, chunk) in f.words.iter_mut().zip(bytes.chunks_exact(8)) {
            *w = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        Ok(f)
    }
}

/// `|a ∧ b| / |a ∨ b|`, 0 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, SimilarityError> {
    if a.nbits != b.nbits {
        return Err(SimilarityError::LengthMismatch(a.nbits, b.nbits));
    }
    let (mut and, mut or) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        and += (x & y).count_ones();
        or += (x | y).count_ones();
    }
    Ok(if or == 0 { 0.0 } else { f64::from(and) / f64::from(or) })
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-dependent hash of a sequence: `h ← mix64(h ⊕ (v + φ + (h≪6) + (h≫2)))`
/// starting from `seed`, with φ the 64-bit golden-ratio constant.
pub fn hash_sequence(seed: u64, values: impl IntoIterator<Item = u64>) -> u64 {
    values.into_iter().fold(seed, |h, v| {
        mix64(h ^ v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2))
    })
}

fn bond_code(order: BondOrder) -> u64 {
    match order {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

/// Radius-0 identifier: atomic number, charge, heavy degree, total H,
/// ring membership, aromaticity.
pub fn atom_invariant(m: &Molecule, i: usize) -> u64 {
    let a = m.atom(i);
    hash_sequence(
        0,
        [
            u64::from(a.element.atomic_number()),
            a.charge as i64 as u64,
            m.heavy_degree(i) as u64,
            m.total_hydrogens(i) as u64,
            u64::from(m.is_ring_atom(i)),
            u64::from(a.aromatic),
        ],
    )
}

/// Environment identifiers for radii `0..=radius`, indexed `[r][atom]`.
/// Hydrogen atoms are never centers or neighbors. At each radius an atom's
/// identifier hashes `(r, previous id, sorted (bond code, neighbor id) pairs)`.
pub fn environment_ids(m: &Molecule, radius: u32) -> Vec<Vec<Option<u64>>> {
    let n = m.atom_count();
    let heavy: Vec<bool> = m.atoms().iter().map(|a| a.element != Element::H).collect();
    let mut layers = Vec::with_capacity(radius as usize + 1);
    layers.push((0..n).map(|i| heavy[i].then(|| atom_invariant(m, i))).collect::<Vec<_>>());
    for r in 1..=radius {
        let prev = layers.last().expect("layer 0");
        let next: Vec<Option<u64>> = (0..n)
            .map(|i| {
                let own = prev[i]?;
                let mut nbrs: Vec<(u64, u64)> = m
                    .neighbors(i)
                    .iter()
                    .filter(|(j, _)| heavy[*j])
                    .map(|&(j, e)| (bond_code(m.bonds()[e].order), prev[j].expect("heavy neighbor")))
                    .collect();
                nbrs.sort_unstable();
                let flat = nbrs.into_iter().flat_map(|(b, id)| [b, id]);
                Some(hash_sequence(u64::from(r), std::iter::once(own).chain(flat)))
            })
            .collect();
        layers.push(next);
    }
    layers
}

/// Morgan-style fingerprint; each identifier sets bit `id mod nbits`.
pub fn circular_fingerprint(m: &Molecule, radius: u32, nbits: usize) -> Result<Fingerprint, SimilarityError> {
    if radius > MAX_RADIUS {
        return Err(SimilarityError::InvalidRadius(radius));
    }
    let mut f = Fingerprint::new(nbits)?;
    for layer in environment_ids(m, radius) {
        for id in layer.into_iter().flatten() {
            f.set((id % nbits as u64) as usize);
        }
    }
    Ok(f)
}

pub fn default_fingerprint(m: &Molecule) -> Fingerprint {
    circular_fingerprint(m, DEFAULT_RADIUS, DEFAULT_NBITS).expect("default parameters are valid")
}

/// Bemis–Murcko framework: terminal non-ring heavy atoms are stripped until
/// none remain; atom and bond types are kept. Acyclic molecules give "".
pub fn murcko_scaffold(m: &Molecule) -> String {
    if m.rings().is_empty() {
        return String::new();
    }
    let n = m.atom_count();
    let mut keep: Vec<bool> = m.atoms().iter().map(|a| a.element != Element::H).collect();
    let mut degree: Vec<usize> = (0..n).map(|i| m.heavy_degree(i)).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&i| keep[i] && !m.is_ring_atom(i) && degree[i] <= 1).collect();
    while let Some(i) = stack.pop() {
        if !keep[i] {
            continue;
        }
        keep[i] = false;
        for &(j, _) in m.neighbors(i) {
            if keep[j] {
                degree[j] -= 1;
                if !m.is_ring_atom(j) && degree[j] <= 1 {
                    stack.push(j);
                }
            }
        }
    }
    // Keep only components that contain a ring.
    let sub = m.induced_subgraph(&keep);
    let comps = sub.components();
    let keep_sub: Vec<bool> = {
        let mut k = vec![false; sub.atom_count()];
        for c in comps {
            if c.iter().any(|&i| sub.is_ring_atom(i)) {
                for i in c {
                    k[i] = true;
                }
            }
        }
        k
    };
    write_canonical_smiles(&sub.induced_subgraph(&keep_sub))
}

/// Distinct scaffold strings among `hits`; the acyclic "" counts as one.
pub fn count_unique_scaffold_hits(hits: &[Molecule]) -> usize {
    hits.iter().map(murcko_scaffold).collect::<HashSet<_>>().len()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub id: u64,
    pub smiles: String,
    pub fingerprint: Fingerprint,
}

/// Immutable library of canonical SMILES with radius-2 fingerprints,
/// searched by exact scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LibraryIndex {
    nbits: usize,
    entries: Vec<IndexEntry>,
}

impl LibraryIndex {
    /// Fingerprints are computed from the parsed canonical SMILES so that
    /// each entry is recomputable from its stored string.
    pub fn build(mols: &[(u64, Molecule)], nbits: usize) -> Result<Self, SimilarityError> {
        Fingerprint::new(nbits)?;
        let mut seen = BTreeSet::new();
        let mut entries = Vec::with_capacity(mols.len());
        for (id, m) in mols {
            if !seen.insert(*id) {
                return Err(SimilarityError::DuplicateId(*id));
            }
            let smiles = write_canonical_smiles(m);
            let fingerprint = circular_fingerprint(&parse_smiles(&smiles)?, DEFAULT_RADIUS, nbits)?;
            entries.push(IndexEntry { id: *id, smiles, fingerprint });
        }
        Ok(LibraryIndex { nbits, entries })
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Exact top-`k` by Tanimoto, ties by ascending id, skipping entries whose
    /// canonical SMILES equals the query's.
    pub fn top_k_analogs(&self, m: &Molecule, k: usize) -> Result<Vec<(u64, f64)>, SimilarityError> {
        let smiles = write_canonical_smiles(m);
        let fp = circular_fingerprint(m, DEFAULT_RADIUS, self.nbits)?;
        self.top_k_fingerprint(&fp, Some(&smiles), k)
    }

    pub fn top_k_fingerprint(
        &self,
        fp: &Fingerprint,
        exclude_smiles: Option<&str>,
        k: usize,
    ) -> Result<Vec<(u64, f64)>, SimilarityError> {
        if self.entries.is_empty() {
            return Err(SimilarityError::EmptyIndex);
        }
        let mut scored: Vec<(u64, f64)> = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            if exclude_smiles == Some(e.smiles.as_str()) {
                continue;
            }
            scored.push((e.id, tanimoto(fp, &e.fingerprint)?));
        }
        let rank = |a: &(u64, f64), b: &(u64, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if k < scored.len() {
            scored.select_nth_unstable_by(k, rank);
            scored.truncate(k);
        }
        scored.sort_unstable_by(rank);
        Ok(scored)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), SimilarityError> {
        w.write_all(PHIX_MAGIC)?;
        w.write_all(&PHIX_VERSION.to_le_bytes())?;
        w.write_all(&(self.nbits as u32).to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for e in &self.entries {
            w.write_all(&e.id.to_le_bytes())?;
            w.write_all(&(e.smiles.len() as u32).to_le_bytes())?;
            w.write_all(e.smiles.as_bytes())?;
            w.write_all(&e.fingerprint.to_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, SimilarityError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let mut cur = Cursor { buf: &buf, pos: 0 };
        if cur.take(4)? != PHIX_MAGIC {
            return Err(SimilarityError::Format("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != PHIX_VERSION {
            return Err(SimilarityError::Format(format!("unsupported version {version}")));
        }
        let nbits = cur.u32()? as usize;
        Fingerprint::new(nbits)?;
        let count = cur.u64()?;
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for _ in 0..count {
            let id = cur.u64()?;
            if !seen.insert(id) {
                return Err(SimilarityError::DuplicateId(id));
            }
            let len = cur.u32()? as usize;
            let smiles = String::from_utf8(cur.take(len)?.to_vec())
                .map_err(|_| SimilarityError::Format(format!("entry {id}: SMILES is not UTF-8")))?;
            let fingerprint = Fingerprint::from_bytes(nbits, cur.take(nbits / 8)?)?;
            entries.push(IndexEntry { id, smiles, fingerprint });
        }
        if cur.pos != buf.len() {
            return Err(SimilarityError::Format("trailing bytes".into()));
        }
        Ok(LibraryIndex { nbits, entries })
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SimilarityError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| SimilarityError::Format("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, SimilarityError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, SimilarityError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Conformers keyed by library id, held as SDF text with per-record byte
/// ranges; records are parsed on access. A record's title is its id.
#[derive(Debug, Clone, Default)]
pub struct ConformerStore {
    text: String,
    offsets: BTreeMap<u64, Vec<Range<usize>>>,
}

impl ConformerStore {
    pub fn from_conformers(items: &[(u64, Vec<Molecule>)]) -> Result<Self, SimilarityError> {
        let mut text = String::new();
        for (id, confs) in items {
            for c in confs {
                text.push_str(&crate::chem::write_sdf_record(&c.clone().with_name(id.to_string()))?);
            }
        }
        Self::from_sdf(text)
    }

    pub fn from_sdf(text: String) -> Result<Self, SimilarityError> {
        let mut offsets: BTreeMap<u64, Vec<Range<usize>>> = BTreeMap::new();
        let mut start = 0;
        let mut pos = 0;
        for line in text.split_inclusive('\n') {
            pos += line.len();
            if line.trim_end() == "$$$$" {
                let record = &text[start..pos];
                let title = record.lines().next().unwrap_or("").trim();
                let id: u64 = title
                    .parse()
                    .map_err(|_| SimilarityError::Format(format!("conformer title {title:?} is not an id")))?;
                offsets.entry(id).or_default().push(start..pos);
                start = pos;
            }
        }
        if !text[start..].trim().is_empty() {
            return Err(SimilarityError::Format("conformer file ends without $$$$".into()));
        }
        Ok(ConformerStore { text, offsets })
    }

    pub fn as_sdf(&self) -> &str {
        &self.text
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.offsets.keys().copied()
    }

    pub fn count(&self, id: u64) -> usize {
        self.offsets.get(&id).map_or(0, Vec::len)
    }

    pub fn conformers(&self, id: u64) -> Result<Vec<Molecule>, SimilarityError> {
        let mut out = Vec::new();
        for r in self.offsets.get(&id).into_iter().flatten() {
            out.extend(crate::chem::read_sdf_str(&self.text[r.clone()])?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mol(s: &str) -> Molecule {
        parse_smiles(s).unwrap()
    }

    #[test]
    fn methane_radius_zero_sets_one_bit() {
        let f = circular_fingerprint(&mol("C"), 0, 2048).unwrap();
        assert_eq!(f.count_ones(), 1);
    }

    /// Environment descriptor written out as a nested string, unrelated to
    /// the hashed identifiers.
    fn describe(m: &Molecule, i: usize, r: u32) -> String {
        let a = m.atom(i);
        let mut s = format!(
            "{}{}d{}h{}{}{}",
            a.element.symbol(),
            a.charge,
            m.heavy_degree(i),
            m.total_hydrogens(i),
            if m.is_ring_atom(i) { "R" } else { "" },
            if a.aromatic { "a" } else { "" }
        );
        if r > 0 {
            let mut parts: Vec<String> = m
                .neighbors(i)
                .iter()
                .filter(|(j, _)| m.atom(*j).element != Element::H)
                .map(|&(j, e)| format!("{:?}{}", m.bonds()[e].order, describe(m, j, r - 1)))
                .collect();
            parts.sort();
            s.push_str(&format!("({})", parts.join(",")));
        }
        s
    }

    fn distinct_environments(m: &Molecule, radius: u32) -> usize {
        let mut set = HashSet::new();
        for r in 0..=radius {
            for i in 0..m.atom_count() {
                if m.atom(i).element != Element::H {
                    set.insert((r, describe(m, i, r)));
                }
            }
        }
        set.len()
    }

    #[test]
    fn bit_count_matches_environment_enumeration() {
        let e = mol("CCO");
        assert_eq!(distinct_environments(&e, 1), 6);
        assert_eq!(circular_fingerprint(&e, 1, 2048).unwrap().count_ones(), 6);
        for s in ["c1ccccc1O", "CC(=O)Nc1ccc(O)cc1", "C1CC1C(N)=O", "OC(=O)c1nn[nH]n1"] {
            let m = mol(s);
            for r in 0..=3 {
                let bits = circular_fingerprint(&m, r, 1 << 16).unwrap().count_ones() as usize;
                assert_eq!(bits, distinct_environments(&m, r), "{s} r={r}");
            }
        }
    }

    #[test]
    fn tanimoto_examples() {
        let f = |b: &[usize]| Fingerprint::from_bits(64, b.iter().copied()).unwrap();
        assert_eq!(tanimoto(&f(&[1, 2, 3]), &f(&[2, 3, 4])).unwrap(), 0.5);
        assert_eq!(tanimoto(&f(&[1, 2]), &f(&[1, 2])).unwrap(), 1.0);
        assert_eq!(tanimoto(&f(&[1]), &f(&[2])).unwrap(), 0.0);
        assert_eq!(tanimoto(&f(&[]), &f(&[])).unwrap(), 0.0);
        let g = Fingerprint::new(128).unwrap();
        assert!(matches!(tanimoto(&f(&[1]), &g), Err(SimilarityError::LengthMismatch(64, 128))));
        assert!(Fingerprint::new(100).is_err());
        assert!(circular_fingerprint(&mol("C"), 5, 2048).is_err());
    }

    #[test]
    fn fingerprint_ignores_explicit_hydrogen_nodes() {
        let implicit = default_fingerprint(&mol("CCO"));
        let explicit = default_fingerprint(&mol("[H]OC([H])([H])C([H])([H])[H]"));
        assert_eq!(implicit, explicit);
    }

    #[test]
    fn scaffolds() {
        assert_eq!(murcko_scaffold(&mol("CCc1ccccc1")), "c1ccccc1");
        assert_eq!(murcko_scaffold(&mol("CCCCCC")), "");
        let dpm = murcko_scaffold(&mol("c1ccccc1Cc1ccc(CC)cc1"));
        assert_eq!(dpm, write_canonical_smiles(&mol("c1ccccc1Cc1ccccc1")));
        // Exocyclic carbonyl is stripped; ring carbon gains hydrogens.
        assert_eq!(murcko_scaffold(&mol("O=C1CCCCC1")), "C1CCCCC1");
        for s in ["O=c1cccc[nH]1", "CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21", "CC.c1ccccc1"] {
            let sc = murcko_scaffold(&mol(s));
            assert_eq!(murcko_scaffold(&mol(&sc)), sc, "{s}");
        }
        let hits = [mol("Cc1ccccc1"), mol("Oc1ccccc1"), mol("c1ccccc1N")];
        assert_eq!(count_unique_scaffold_hits(&hits), 1);
        assert_eq!(count_unique_scaffold_hits(&[]), 0);
        assert_eq!(count_unique_scaffold_hits(&[mol("CCO"), mol("CCN"), mol("C1CC1C")]), 2);
    }

    fn library() -> Vec<(u64, Molecule)> {
        ["CCO", "CCN", "CCCO", "c1ccccc1", "c1ccccc1O", "CC(=O)O", "OCCO", "c1ccncc1"]
            .iter()
            .enumerate()
            .map(|(i, s)| (10 + i as u64, mol(s)))
            .collect()
    }

    #[test]
    fn top_k_excludes_self_and_ranks() {
        let idx = LibraryIndex::build(&library(), 2048).unwrap();
        let hits = idx.top_k_analogs(&mol("OCC"), 1).unwrap();
        assert_ne!(hits[0].0, 10);
        let all = idx.top_k_analogs(&mol("c1ccccc1C"), idx.len()).unwrap();
        assert_eq!(all.len(), idx.len());
        assert!(all.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
        let empty = LibraryIndex::build(&[], 2048).unwrap();
        assert!(matches!(empty.top_k_analogs(&mol("C"), 1), Err(SimilarityError::EmptyIndex)));
        assert!(matches!(
            LibraryIndex::build(&[(1, mol("C")), (1, mol("N"))], 2048),
            Err(SimilarityError::DuplicateId(1))
        ));
    }

    #[test]
    fn phix_round_trip_and_recomputable() {
        let idx = LibraryIndex::build(&library(), 1024).unwrap();
        let mut bytes = Vec::new();
        idx.write(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"PHIX");
        let back = LibraryIndex::read(bytes.as_slice()).unwrap();
        assert_eq!(back, idx);
        for e in back.entries() {
            assert_eq!(circular_fingerprint(&mol(&e.smiles), 2, 1024).unwrap(), e.fingerprint);
        }
        assert!(LibraryIndex::read(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn conformer_store_offsets() {
        let a = crate::chem::embed_3d(&mol("CCO"), 1).unwrap();
        let b = crate::chem::embed_3d(&mol("c1ccccc1"), 1).unwrap();
        let store = ConformerStore::from_conformers(&[(7, vec![a.clone(), a]), (9, vec![b])]).unwrap();
        assert_eq!(store.count(7), 2);
        assert_eq!(store.count(9), 1);
        assert_eq!(store.count(8), 0);
        let c = store.conformers(9).unwrap();
        assert_eq!(write_canonical_smiles(&c[0]), "c1ccccc1");
        let reopened = ConformerStore::from_sdf(store.as_sdf().to_string()).unwrap();
        assert_eq!(reopened.ids().collect::<Vec<_>>(), vec![7, 9]);
    }

    proptest! {
        #[test]
        fn fingerprint_is_permutation_invariant(seed in 0u64..1000) {
            let smiles = ["CC(=O)Oc1ccccc1C(=O)O", "CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21", "C[N+](C)(C)CCO"];
            let m = mol(smiles[(seed % 3) as usize]);
            let mut perm: Vec<usize> = (0..m.atom_count()).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(default_fingerprint(&m), default_fingerprint(&m.permuted(&perm)));
        }

        #[test]
        fn self_similarity_is_maximal(i in 0usize..8, j in 0usize..8) {
            let lib = library();
            let a = default_fingerprint(&lib[i].1);
            let b = default_fingerprint(&lib[j].1);
            prop_assert!(tanimoto(&a, &a).unwrap() >= tanimoto(&a, &b).unwrap());
        }
    }
}
