//! Pharmacophore and shape point clouds.
//!
//! Channel order is fixed: donor, acceptor, cation, anion, aromatic,
//! hydrophobe, shape. Aromatic points sit at ring centroids, hydrophobe
//! points at the centroid of each connected run of hydrophobic carbons,
//! guanidine cations at the central carbon, and every other feature at its
//! atom. The shape channel holds one point per heavy atom in atom order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{BondOrder, Element, Molecule};
use crate::geometry::RigidTransform;
use crate::scalar::{cast3, centroid, Real, Vec3};

pub const NUM_CHANNELS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Donor,
    Acceptor,
    Cation,
    Anion,
    Aromatic,
    Hydrophobe,
    Shape,
}

impl Channel {
    pub const ALL: [Channel; NUM_CHANNELS] = [
        Channel::Donor,
        Channel::Acceptor,
        Channel::Cation,
        Channel::Anion,
        Channel::Aromatic,
        Channel::Hydrophobe,
        Channel::Shape,
    ];

    /// The six pharmacophore channels, without shape.
    pub const FEATURES: [Channel; 6] = [
        Channel::Donor,
        Channel::Acceptor,
        Channel::Cation,
        Channel::Anion,
        Channel::Aromatic,
        Channel::Hydrophobe,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Donor => "donor",
            Channel::Acceptor => "acceptor",
            Channel::Cation => "cation",
            Channel::Anion => "anion",
            Channel::Aromatic => "aromatic",
            Channel::Hydrophobe => "hydrophobe",
            Channel::Shape => "shape",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PharmacophoreError {
    #[error("molecule has no 3D coordinates")]
    MissingCoordinates,
    #[error("non-finite coordinate in channel {0}")]
    NonFinite(&'static str),
    #[error("invalid profile JSON: {0}")]
    Json(String),
}

/// Seven labeled point clouds in Å.
#[derive(Debug, Clone, PartialEq)]
pub struct PharmacophoreProfile<T> {
    channels: [Vec<Vec3<T>>; NUM_CHANNELS],
}

impl<T: Real> PharmacophoreProfile<T> {
    pub fn new(channels: [Vec<Vec3<T>>; NUM_CHANNELS]) -> Result<Self, PharmacophoreError> {
        for (c, pts) in Channel::ALL.iter().zip(&channels) {
            if pts.iter().flatten().any(|x| !x.is_finite()) {
                return Err(PharmacophoreError::NonFinite(c.name()));
            }
        }
        Ok(PharmacophoreProfile { channels })
    }

    pub fn empty() -> Self {
        PharmacophoreProfile { channels: Default::default() }
    }

    pub fn channel(&self, c: Channel) -> &[Vec3<T>] {
        &self.channels[c.index()]
    }

    pub fn channels(&self) -> &[Vec<Vec3<T>>; NUM_CHANNELS] {
        &self.channels
    }

    /// Appends a point; used by tests and synthetic profiles.
    pub fn push(&mut self, c: Channel, p: Vec3<T>) -> Result<(), PharmacophoreError> {
        if p.iter().any(|x| !x.is_finite()) {
            return Err(PharmacophoreError::NonFinite(c.name()));
        }
        self.channels[c.index()].push(p);
        Ok(())
    }

    pub fn counts(&self) -> [usize; NUM_CHANNELS] {
        std::array::from_fn(|i| self.channels[i].len())
    }

    pub fn total_points(&self) -> usize {
        self.channels.iter().map(Vec::len).sum()
    }

    pub fn shape_centroid(&self) -> Option<Vec3<T>> {
        centroid(self.channel(Channel::Shape))
    }

    pub fn transformed(&self, t: &RigidTransform<T>) -> Self {
        PharmacophoreProfile {
            channels: std::array::from_fn(|i| t.apply_all(&self.channels[i])),
        }
    }

    pub fn cast<U: Real>(&self) -> PharmacophoreProfile<U> {
        PharmacophoreProfile {
            channels: std::array::from_fn(|i| self.channels[i].iter().map(|p| cast3(*p)).collect()),
        }
    }

    pub fn to_json(&self) -> String {
        let doc = ProfileJson::from(&self.cast::<f64>());
        serde_json::to_string_pretty(&doc).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PharmacophoreError> {
        let doc: ProfileJson = serde_json::from_str(text).map_err(|e| PharmacophoreError::Json(e.to_string()))?;
        let p = PharmacophoreProfile::<f64>::new([
            doc.donor,
            doc.acceptor,
            doc.cation,
            doc.anion,
            doc.aromatic,
            doc.hydrophobe,
            doc.shape,
        ])?;
        Ok(p.cast())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileJson {
    donor: Vec<[f64; 3]>,
    acceptor: Vec<[f64; 3]>,
    cation: Vec<[f64; 3]>,
    anion: Vec<[f64; 3]>,
    aromatic: Vec<[f64; 3]>,
    hydrophobe: Vec<[f64; 3]>,
    shape: Vec<[f64; 3]>,
}

impl From<&PharmacophoreProfile<f64>> for ProfileJson {
    fn from(p: &PharmacophoreProfile<f64>) -> Self {
        let c = |ch: Channel| p.channel(ch).to_vec();
        ProfileJson {
            donor: c(Channel::Donor),
            acceptor: c(Channel::Acceptor),
            cation: c(Channel::Cation),
            anion: c(Channel::Anion),
            aromatic: c(Channel::Aromatic),
            hydrophobe: c(Channel::Hydrophobe),
            shape: c(Channel::Shape),
        }
    }
}

/// Atom groups per channel; each group yields one point at its centroid.
pub type FeatureAtoms = [Vec<Vec<usize>>; NUM_CHANNELS];

fn is_heavy(m: &Molecule, i: usize) -> bool {
    m.atom(i).element != Element::H
}

fn is_hetero(e: Element) -> bool {
    !matches!(e, Element::C | Element::H)
}

fn has_double_to_hetero(m: &Molecule, c: usize) -> bool {
    m.neighbors(c)
        .iter()
        .any(|&(j, e)| m.bonds()[e].kekule == 2 && matches!(m.atom(j).element, Element::O | Element::S))
}

fn is_amide_like_n(m: &Molecule, n: usize) -> bool {
    m.neighbors(n).iter().any(|&(j, e)| {
        let b = &m.bonds()[e];
        b.kekule == 1
            && matches!(m.atom(j).element, Element::C | Element::S | Element::P)
            && !m.atom(j).aromatic
            && has_double_to_hetero(m, j)
    })
}

fn is_pyrrole_type_n(m: &Molecule, n: usize) -> bool {
    let a = m.atom(n);
    a.aromatic && m.degree(n) + a.hydrogens as usize >= 3
}

fn is_basic_amine(m: &Molecule, n: usize) -> bool {
    let a = m.atom(n);
    if a.element != Element::N || a.charge != 0 || a.aromatic {
        return false;
    }
    m.neighbors(n).iter().all(|&(j, e)| {
        let nb = m.atom(j);
        if m.bonds()[e].order != BondOrder::Single {
            return false;
        }
        if nb.element == Element::H {
            return true;
        }
        nb.element == Element::C
            && !nb.aromatic
            && m.neighbors(j).iter().all(|&(_, e2)| m.bonds()[e2].order == BondOrder::Single)
    })
}

fn guanidine_carbons(m: &Molecule) -> Vec<usize> {
    (0..m.atom_count())
        .filter(|&c| {
            let a = m.atom(c);
            if a.element != Element::C || a.aromatic || m.degree(c) != 3 {
                return false;
            }
            let ns: Vec<_> = m
                .neighbors(c)
                .iter()
                .filter(|&&(j, _)| m.atom(j).element == Element::N && !m.atom(j).aromatic)
                .collect();
            ns.len() == 3 && ns.iter().filter(|&&&(_, e)| m.bonds()[e].kekule == 2).count() == 1
        })
        .collect()
}

fn acid_oxygens(m: &Molecule) -> Vec<usize> {
    let mut out = Vec::new();
    for c in 0..m.atom_count() {
        let a = m.atom(c);
        if a.element != Element::C || a.aromatic {
            continue;
        }
        let mut double_o = Vec::new();
        let mut acid_o = Vec::new();
        for &(j, e) in m.neighbors(c) {
            let o = m.atom(j);
            if o.element != Element::O {
                continue;
            }
            match m.bonds()[e].kekule {
                2 => double_o.push(j),
                1 if m.degree(j) == 1 && (m.total_hydrogens(j) == 1 || o.charge < 0) => acid_o.push(j),
                _ => {}
            }
        }
        if double_o.len() == 1 && acid_o.len() == 1 {
            out.extend(double_o);
            out.extend(acid_o);
        }
    }
    out
}

fn tetrazole_nitrogens(m: &Molecule) -> Vec<usize> {
    let mut out = Vec::new();
    for ring in m.rings() {
        if ring.len() != 5 || !ring.iter().all(|&a| m.atom(a).aromatic) {
            continue;
        }
        let ns: Vec<usize> = ring.iter().copied().filter(|&a| m.atom(a).element == Element::N).collect();
        let acidic = ns.iter().any(|&n| m.total_hydrogens(n) > 0 || m.atom(n).charge < 0);
        if ns.len() == 4 && acidic {
            out.extend(ns);
        }
    }
    out
}

/// Applies the rule table and returns the atom groups of every channel.
pub fn feature_atoms(m: &Molecule) -> FeatureAtoms {
    let mut f: FeatureAtoms = Default::default();
    let n = m.atom_count();
    let single = |v: &mut Vec<Vec<usize>>, i: usize| v.push(vec![i]);

    for i in 0..n {
        let a = m.atom(i);
        let is_no = matches!(a.element, Element::N | Element::O);
        if is_no && m.total_hydrogens(i) > 0 {
            single(&mut f[Channel::Donor.index()], i);
        }
        let acceptor = match a.element {
            Element::O => a.charge <= 0,
            Element::N => a.charge <= 0 && !is_pyrrole_type_n(m, i) && !is_amide_like_n(m, i),
            _ => false,
        };
        if acceptor {
            single(&mut f[Channel::Acceptor.index()], i);
        }
    }

    // Cations.
    let mut cation_atoms: Vec<usize> = (0..n)
        .filter(|&i| {
            let a = m.atom(i);
            let charged = a.element == Element::N
                && a.charge > 0
                && !m.neighbors(i).iter().any(|&(j, _)| m.atom(j).charge < 0);
            charged || is_basic_amine(m, i)
        })
        .collect();
    cation_atoms.extend(guanidine_carbons(m));
    cation_atoms.sort_unstable();
    cation_atoms.dedup();
    for i in cation_atoms {
        single(&mut f[Channel::Cation.index()], i);
    }

    // Anions.
    let mut anion_atoms: Vec<usize> = (0..n)
        .filter(|&i| {
            let a = m.atom(i);
            matches!(a.element, Element::O | Element::S)
                && a.charge < 0
                && !m
                    .neighbors(i)
                    .iter()
                    .any(|&(j, _)| m.atom(j).element == Element::N && m.atom(j).charge > 0)
        })
        .collect();
    anion_atoms.extend(acid_oxygens(m));
    anion_atoms.extend(tetrazole_nitrogens(m));
    anion_atoms.sort_unstable();
    anion_atoms.dedup();
    for i in anion_atoms {
        single(&mut f[Channel::Anion.index()], i);
    }

    for ring in m.aromatic_rings() {
        f[Channel::Aromatic.index()].push(ring.to_vec());
    }

    // Hydrophobic carbons, clustered into connected runs.
    let hydrophobic: Vec<bool> = (0..n)
        .map(|i| {
            let a = m.atom(i);
            a.element == Element::C
                && !a.aromatic
                && a.charge == 0
                && !m.neighbors(i).iter().any(|&(j, _)| is_hetero(m.atom(j).element))
        })
        .collect();
    let mut seen = vec![false; n];
    for s in 0..n {
        if !hydrophobic[s] || seen[s] {
            continue;
        }
        let mut run = vec![s];
        seen[s] = true;
        let mut k = 0;
        while k < run.len() {
            let u = run[k];
            k += 1;
            for &(v, _) in m.neighbors(u) {
                if hydrophobic[v] && !seen[v] {
                    seen[v] = true;
                    run.push(v);
                }
            }
        }
        run.sort_unstable();
        f[Channel::Hydrophobe.index()].push(run);
    }

    f[Channel::Shape.index()] = (0..n).filter(|&i| is_heavy(m, i)).map(|i| vec![i]).collect();
    f
}

/// Perceives the seven point clouds of an embedded molecule.
pub fn perceive<T: Real>(m: &Molecule) -> Result<PharmacophoreProfile<T>, PharmacophoreError> {
    let coords = m.coords().ok_or(PharmacophoreError::MissingCoordinates)?;
    let xyz: Vec<Vec3<T>> = coords.iter().map(|p| [T::lit(p[0]), T::lit(p[1]), T::lit(p[2])]).collect();
    let groups = feature_atoms(m);
    let channels = std::array::from_fn(|c| {
        groups[c]
            .iter()
            .map(|g| {
                let pts: Vec<Vec3<T>> = g.iter().map(|&i| xyz[i]).collect();
                centroid(&pts).expect("non-empty group")
            })
            .collect()
    });
    PharmacophoreProfile::new(channels)
}
