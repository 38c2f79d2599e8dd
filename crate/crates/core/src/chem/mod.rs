//! Molecular graphs, SMILES/SDF I/O, canonicalization, tokenization and a
//! deterministic 3D embedder.

mod canon;
mod element;
mod embed;
mod molecule;
mod rings;
mod sdf;
mod smiles;
pub mod tables;
mod tokenize;

use thiserror::Error;

pub use canon::{canonical_ranks, write_canonical_smiles};
pub use element::Element;
pub use embed::{bond_length, embed_3d, embed_conformers, EmbedOptions};
pub use molecule::{Atom, Bond, BondDirection, BondOrder, Chirality, Molecule};
pub use sdf::{read_sdf, read_sdf_str, write_sdf, write_sdf_record};
pub use smiles::{parse_smiles, read_smiles_lines, SmilesRecord};
pub use tokenize::{
    build_vocabulary, detokenize, split_tokens, tokenize, TokenId, TokenSequence, Vocabulary, BOS, EOS, PAD, UNK,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChemError {
    #[error("SMILES syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unsupported element '{0}'")]
    UnsupportedElement(String),
    #[error("valence violation on atom {atom} ({element}): valence {valence}")]
    Valence { atom: usize, element: Element, valence: u32 },
    #[error("aromatic system cannot be kekulized")]
    Kekulize,
    #[error("invalid bond: {0}")]
    InvalidBond(String),
    #[error("SDF error on line {line}: {msg}")]
    Sdf { line: usize, msg: String },
    #[error("expected {expected} coordinates, found {found}")]
    CoordinateCount { expected: usize, found: usize },
    #[error("non-finite coordinates")]
    NonFiniteCoordinates,
    #[error("molecule has no coordinates")]
    MissingCoordinates,
    #[error("embedding failed: {0}")]
    Embedding(String),
}
