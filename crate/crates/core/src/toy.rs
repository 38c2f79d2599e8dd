//! Deterministic toy corpora: a combinatorial drug-like library and a small
//! memorization fixture.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chem::{parse_smiles, write_canonical_smiles};

/// Ring cores; `{}` marks attachment points.
const CORES: &[&str] = &[
    "c1ccc({})cc1",
    "c1cc({})ccc1{}",
    "c1ccc({})c({})c1",
    "c1ccncc1{}",
    "c1cc({})ncc1{}",
    "c1ccc2[nH]ccc2c1{}",
    "c1ccc2ncccc2c1{}",
    "c1cc({})sc1",
    "c1cc({})oc1",
    "c1cn({})cn1",
    "C1CCN({})CC1",
    "C1CCC({})CC1",
    "C1COCCN1{}",
    "C1CCN({})C1",
    "c1cc({})n[nH]1",
    "O=C1CCC({})N1",
    "c1nc({})cc({})n1",
];

/// Substituents, including bare hydrogen.
const GROUPS: &[&str] = &[
    "", "C", "CC", "O", "OC", "N", "NC", "F", "Cl", "C(=O)O", "C(=O)N", "C(=O)NC", "C#N", "C(F)(F)F", "CO",
    "CN", "S(=O)(=O)N", "NC(=O)C", "C(C)C", "OCC",
];

/// Linkers joining two cores.
const LINKERS: &[&str] = &["", "C", "CC", "O", "N", "C(=O)N", "NC(=O)", "CO", "S(=O)(=O)N", "CNC"];

fn decorate(core: &str, rng: &mut ChaCha8Rng, groups: &[&str]) -> String {
    let mut out = String::new();
    let mut rest = core;
    while let Some(i) = rest.find("{}") {
        out.push_str(&rest[..i]);
        let g = *groups.choose(rng).expect("non-empty");
        out.push_str(g);
        rest = &rest[i + 2..];
    }
    out.push_str(rest);
    // "(…)" around an empty group leaves "()", which is not SMILES.
    out.replace("()", "")
}

/// Fills the first attachment point with `link + other` and the rest with
/// groups.
fn join(core: &str, link: &str, other: &str, rng: &mut ChaCha8Rng) -> String {
    let first = core.replacen("{}", &format!("{link}{other}"), 1);
    decorate(&first, rng, GROUPS)
}

/// `n` distinct canonical SMILES built from cores, linkers and substituents,
/// restricted to `min_heavy..=max_heavy` heavy atoms. Same seed, same list.
pub fn toy_library(n: usize, seed: u64, min_heavy: usize, max_heavy: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n && attempts < n * 200 {
        attempts += 1;
        let core = *CORES.choose(&mut rng).expect("non-empty");
        let raw = if rng.gen_bool(0.55) {
            let second = decorate(CORES.choose(&mut rng).expect("non-empty"), &mut rng, &["", "", "C", "F", "O", "Cl"]);
            // Ring-closure digits of the nested core must not collide with
            // rings still open in the outer one.
            let second = second.replace("{}", "").replace('1', "7").replace('2', "8");
            let link = *LINKERS.choose(&mut rng).expect("non-empty");
            join(core, link, &second, &mut rng)
        } else {
            decorate(core, &mut rng, GROUPS)
        };
        let Ok(m) = parse_smiles(&raw) else { continue };
        let heavy = m.heavy_atom_count();
        if heavy < min_heavy || heavy > max_heavy || !m.is_connected() {
            continue;
        }
        let canon = write_canonical_smiles(&m);
        if seen.insert(canon.clone()) {
            out.push(canon);
        }
    }
    out
}

/// Fifty small molecules whose profiles fit a 16 Å box.
pub const MEMORIZATION_FIXTURE: [&str; 50] = [
    "CCO", "CCN", "CC(=O)O", "CC(=O)N", "CCCO", "CCCN", "OCCO", "NCCO", "CC(C)O", "CC(C)N",
    "c1ccccc1", "Oc1ccccc1", "Nc1ccccc1", "Cc1ccccc1", "Fc1ccccc1", "Clc1ccccc1", "OC(=O)c1ccccc1",
    "NC(=O)c1ccccc1", "c1ccncc1", "Oc1ccncc1", "Nc1ccncc1", "Cc1ccncc1", "c1ccoc1", "c1ccsc1",
    "c1cc[nH]c1", "c1cn[nH]c1", "c1c[nH]cn1", "C1CCCCC1", "OC1CCCCC1", "NC1CCCCC1", "C1CCNCC1",
    "C1COCCN1", "C1CCOC1", "C1CCNC1", "O=C1CCCN1", "CC(=O)Nc1ccccc1", "COc1ccccc1", "CNC(=O)C",
    "CCOC(=O)C", "NCC(=O)O", "CC(N)C(=O)O", "OCC(O)CO", "N#Cc1ccccc1", "CS(=O)(=O)N", "CC#N",
    "OC(=O)CCC(=O)O", "c1ccc2ccccc2c1", "c1ccc2[nH]ccc2c1", "FC(F)(F)c1ccccc1", "CCN(CC)CC",
];
