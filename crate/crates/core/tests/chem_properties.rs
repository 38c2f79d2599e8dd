//! Canonicalization and round-trip properties checked against an
//! independent graph-isomorphism oracle.

use petgraph::algo::is_isomorphic_matching;
use petgraph::graph::UnGraph;
use phvox::chem::{
    build_vocabulary, embed_conformers, parse_smiles, tokenize, write_canonical_smiles, BondOrder, EmbedOptions,
    Element, Molecule,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Label = (Element, i8, u8, bool);

fn graph(m: &Molecule) -> UnGraph<Label, BondOrder> {
    let mut g = UnGraph::new_undirected();
    let nodes: Vec<_> = m
        .atoms()
        .iter()
        .map(|a| g.add_node((a.element, a.charge, a.hydrogens, a.aromatic)))
        .collect();
    for b in m.bonds() {
        g.add_edge(nodes[b.a], nodes[b.b], b.order);
    }
    g
}

fn isomorphic(a: &Molecule, b: &Molecule) -> bool {
    is_isomorphic_matching(&graph(a), &graph(b), |x, y| x == y, |x, y| x == y)
}

const FRAGMENTS: &[&str] = &["C", "C", "C", "N", "O", "S", "F", "Cl", "c1ccccc1", "c1ccncc1", "c1cc[nH]c1", "C1CC1"];

/// Random SMILES from a small grammar; callers keep the ones that parse.
fn random_smiles(rng: &mut ChaCha8Rng, budget: &mut usize, depth: usize) -> String {
    let mut s = String::new();
    let len = rng.gen_range(1..=4);
    let mut open_ring: Option<char> = None;
    for k in 0..len {
        if *budget == 0 {
            break;
        }
        if k > 0 {
            let r: f64 = rng.gen();
            if r < 0.12 {
                s.push('=');
            } else if r < 0.15 {
                s.push('#');
            }
        }
        let frag = FRAGMENTS.choose(rng).unwrap();
        *budget = budget.saturating_sub(frag.chars().filter(|c| c.is_ascii_alphabetic()).count());
        s.push_str(frag);
        if depth < 2 && rng.gen_bool(0.25) {
            s.push('(');
            s.push_str(&random_smiles(rng, budget, depth + 1));
            s.push(')');
        }
        if depth == 0 && frag.len() == 1 && open_ring.is_none() && rng.gen_bool(0.15) {
            open_ring = Some('9');
            s.push('9');
        }
    }
    if let Some(d) = open_ring {
        s.push('C');
        s.push(d);
    }
    s
}

fn random_molecules(count: usize, max_heavy: usize, seed: u64) -> Vec<Molecule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let mut budget = max_heavy;
        let s = random_smiles(&mut rng, &mut budget, 0);
        if let Ok(m) = parse_smiles(&s) {
            if m.heavy_atom_count() <= max_heavy && m.atom_count() >= 2 {
                out.push(m);
            }
        }
    }
    out
}

#[test]
fn canonical_form_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for m in random_molecules(50, 12, 1) {
        let reference = write_canonical_smiles(&m);
        for _ in 0..30 {
            let mut perm: Vec<usize> = (0..m.atom_count()).collect();
            perm.shuffle(&mut rng);
            let p = m.permuted(&perm);
            assert_eq!(write_canonical_smiles(&p), reference);
        }
    }
}

const CORPUS: &[&str] = &[
    "CC(=O)Oc1ccccc1C(=O)O",
    "CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21",
    "CC(C)Cc1ccc(C(C)C(=O)O)cc1",
    "O=C(O)c1ccccc1O",
    "c1ccc2[nH]ccc2c1",
    "CCN(CC)CCOC(=O)c1ccc(N)cc1",
    "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "NC(=N)NCCC[C@H](N)C(=O)O",
    "OC(=O)c1nn[nH]n1",
    "c1ccc(-c2ccccc2)cc1",
    "C1CCC2(CC1)OCCO2",
    "c1ccc2c(c1)ccc1ccccc12",
    "O=S(=O)(N)c1ccc(Cl)cc1",
    "C[N+](C)(C)CCO",
    "CC(=O)[O-]",
    "c1csc(C#N)c1",
    "FC(F)(F)c1ccc(Br)cc1I",
    "O=c1cccc[nH]1",
    "C1=CC=CC=CC=C1",
    "[2H]C([2H])([2H])O",
];

#[test]
fn canonical_round_trip_is_isomorphic() {
    let mut mols: Vec<Molecule> = CORPUS.iter().map(|s| parse_smiles(s).unwrap()).collect();
    mols.extend(random_molecules(100, 30, 2));
    for m in &mols {
        assert!(m.atom_count() <= 30);
        let s = write_canonical_smiles(m);
        let back = parse_smiles(&s).unwrap_or_else(|e| panic!("{s}: {e}"));
        assert!(isomorphic(m, &back), "{s}");
        assert_eq!(write_canonical_smiles(&back), s);
    }
}

#[test]
fn canonical_smiles_tokenize_without_unk() {
    let canon: Vec<String> = random_molecules(200, 20, 3)
        .iter()
        .chain(CORPUS.iter().map(|s| parse_smiles(s).unwrap()).collect::<Vec<_>>().iter())
        .map(write_canonical_smiles)
        .collect();
    let v = build_vocabulary(&canon);
    for s in &canon {
        assert_eq!(tokenize(s, &v).unk_count, 0, "{s}");
    }
}

#[test]
fn embeddings_satisfy_bounds() {
    let opts = EmbedOptions::default();
    let mut ok = 0;
    let mols: Vec<Molecule> = CORPUS
        .iter()
        .map(|s| parse_smiles(s).unwrap())
        .filter(|m| m.is_connected())
        .collect();
    for m in &mols {
        let confs = match embed_conformers(m, 3, 5, &opts) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{}: {e}", write_canonical_smiles(m));
                continue;
            }
        };
        ok += 1;
        for c in confs {
            let xyz = c.coords().unwrap();
            for b in c.bonds() {
                let d = dist(xyz[b.a], xyz[b.b]);
                let t = phvox::chem::bond_length(c.atom(b.a).element, c.atom(b.b).element, b.order);
                assert!((d - t).abs() <= 0.08);
            }
            for i in 0..c.atom_count() {
                for j in i + 1..c.atom_count() {
                    if c.bond_between(i, j).is_none() {
                        assert!(dist(xyz[i], xyz[j]) >= 1.2);
                    }
                }
            }
        }
    }
    assert_eq!(ok, mols.len(), "every corpus molecule embeds");
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}
