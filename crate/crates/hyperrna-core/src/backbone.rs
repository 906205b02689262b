//! The 3-bead coarse-grained chain representation.
//!
//! Each residue keeps exactly three backbone atom positions: for RNA the
//! slots are (P, C4′, N1/N9) — the glycosidic nitrogen is N9 for purines and
//! N1 for pyrimidines — and for protein they are (N, Cα, C). Residues missing
//! any of the three atoms never make it into this type; parsing drops them.

use alloc::string::String;
use alloc::vec::Vec;

use crate::geom::{mat3_mul_vec, Mat3, Vec3};

/// Ordered nucleotide vocabulary; the decoder emits class indices in this
/// order (A=0, G=1, C=2, U=3).
pub const NUCLEOTIDES: [char; 4] = ['A', 'G', 'C', 'U'];

/// One-letter amino-acid vocabulary accepted in protein sequences.
pub const AMINO_ACIDS: &str = "ACDEFGHIKLMNPQRSTVWY";

/// Class index of a nucleotide letter, per [`NUCLEOTIDES`] ordering.
pub fn nucleotide_index(letter: char) -> Option<usize> {
    NUCLEOTIDES.iter().position(|&c| c == letter)
}

/// Bead slot of the 5′-side atom: P for RNA, N for protein.
pub const SLOT_FIRST: usize = 0;
/// Bead slot of the chain-center atom: C4′ for RNA, Cα for protein. Node
/// positions and kNN distances use this slot.
pub const SLOT_CENTER: usize = 1;
/// Bead slot of the third atom: glycosidic nitrogen for RNA, carbonyl C for
/// protein.
pub const SLOT_THIRD: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChainKind {
    Rna,
    Protein,
}

impl ChainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChainKind::Rna => "rna",
            ChainKind::Protein => "protein",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BackboneError {
    /// atoms / sequence / residue_ids disagree in length.
    LengthMismatch {
        atoms: usize,
        sequence: usize,
        ids: usize,
    },
    /// residue_ids must be strictly increasing.
    NonIncreasingIds { position: usize },
    /// A coordinate is NaN or infinite.
    NonFiniteCoordinate { residue: usize },
    /// A sequence letter outside the chain kind's vocabulary.
    BadLetter { letter: char, kind: ChainKind },
}

impl core::fmt::Display for BackboneError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BackboneError::LengthMismatch { atoms, sequence, ids } => write!(
                f,
                "backbone arrays disagree: {atoms} residues, {sequence} letters, {ids} ids"
            ),
            BackboneError::NonIncreasingIds { position } => {
                write!(f, "residue ids not strictly increasing at position {position}")
            }
            BackboneError::NonFiniteCoordinate { residue } => {
                write!(f, "non-finite coordinate in residue {residue}")
            }
            BackboneError::BadLetter { letter, kind } => {
                write!(f, "letter '{letter}' invalid for {} chain", kind.as_str())
            }
        }
    }
}

impl core::error::Error for BackboneError {}

/// A validated 3-bead chain. `atoms[i]` holds the three bead positions of
/// residue `i` in slot order; `sequence` and `residue_ids` run parallel.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseBackbone {
    kind: ChainKind,
    atoms: Vec<[Vec3; 3]>,
    sequence: String,
    residue_ids: Vec<i64>,
}

impl CoarseBackbone {
    pub fn new(
        kind: ChainKind,
        atoms: Vec<[Vec3; 3]>,
        sequence: String,
        residue_ids: Vec<i64>,
    ) -> Result<Self, BackboneError> {
        let n_seq = sequence.chars().count();
        if atoms.len() != n_seq || atoms.len() != residue_ids.len() {
            return Err(BackboneError::LengthMismatch {
                atoms: atoms.len(),
                sequence: n_seq,
                ids: residue_ids.len(),
            });
        }
        for (i, w) in residue_ids.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(BackboneError::NonIncreasingIds { position: i + 1 });
            }
        }
        for (i, res) in atoms.iter().enumerate() {
            if res.iter().any(|p| !p.0.iter().all(|c| c.is_finite())) {
                return Err(BackboneError::NonFiniteCoordinate { residue: i });
            }
        }
        for letter in sequence.chars() {
            let ok = match kind {
                ChainKind::Rna => nucleotide_index(letter).is_some(),
                ChainKind::Protein => AMINO_ACIDS.contains(letter),
            };
            if !ok {
                return Err(BackboneError::BadLetter { letter, kind });
            }
        }
        Ok(CoarseBackbone {
            kind,
            atoms,
            sequence,
            residue_ids,
        })
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn sequence(&self) -> &str {
        &self.sequence
    }

    pub fn residue_ids(&self) -> &[i64] {
        &self.residue_ids
    }

    pub fn atoms(&self) -> &[[Vec3; 3]] {
        &self.atoms
    }

    /// Bead position by residue and slot.
    pub fn bead(&self, residue: usize, slot: usize) -> Vec3 {
        self.atoms[residue][slot]
    }

    /// The chain-center bead (C4′/Cα) used as the node position.
    pub fn center(&self, residue: usize) -> Vec3 {
        self.atoms[residue][SLOT_CENTER]
    }

    /// The same chain under a rigid motion `x -> R x + t`; used by the
    /// equivariance suites.
    pub fn transformed(&self, rotation: &Mat3, translation: Vec3) -> CoarseBackbone {
        let atoms = self
            .atoms
            .iter()
            .map(|res| {
                [
                    mat3_mul_vec(rotation, res[0]) + translation,
                    mat3_mul_vec(rotation, res[1]) + translation,
                    mat3_mul_vec(rotation, res[2]) + translation,
                ]
            })
            .collect();
        CoarseBackbone {
            kind: self.kind,
            atoms,
            sequence: self.sequence.clone(),
            residue_ids: self.residue_ids.clone(),
        }
    }

    /// Class indices of an RNA chain's sequence (A=0, G=1, C=2, U=3).
    pub fn nucleotide_indices(&self) -> Vec<usize> {
        self.sequence
            .chars()
            .filter_map(nucleotide_index)
            .collect()
    }
}
