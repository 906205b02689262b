//! Synthetic benchmark chains.
//!
//! Centers follow a smooth random walk; the two satellite beads sit at
//! random orientations, but the glycosidic bead's distance from the center
//! depends on the base identity. That makes base recovery from geometry
//! learnable by construction, which is what the end-to-end training checks
//! need from a desk-scale corpus.

use hyperrna_core::backbone::{ChainKind, CoarseBackbone, NUCLEOTIDES};
use hyperrna_core::geom::Vec3;
use hyperrna_core::rng::Xoshiro256StarStar;

use crate::pdb::AtomRecord;

/// Center-to-phosphate distance, identical for every base (Å).
pub const P_DISTANCE: f64 = 3.9;

/// Center-to-nitrogen distance per base (Å). The spread is wide relative
/// to the feature expansion's bin width, so the four bases are separable.
pub fn glycosidic_distance(letter: char) -> f64 {
    match letter {
        'A' => 4.5,
        'G' => 4.9,
        'C' => 5.3,
        _ => 5.7,
    }
}

fn random_unit(rng: &mut Xoshiro256StarStar) -> Vec3 {
    loop {
        let v = Vec3::new(rng.normal(), rng.normal(), rng.normal());
        if v.norm() > 1e-6 {
            return v * (1.0 / v.norm());
        }
    }
}

/// One chain of `len` residues with a fresh random sequence.
pub fn synthetic_chain(len: usize, rng: &mut Xoshiro256StarStar) -> CoarseBackbone {
    let mut direction = random_unit(rng);
    let mut center = Vec3::ZERO;
    let mut atoms = Vec::with_capacity(len);
    let mut sequence = String::with_capacity(len);
    for i in 0..len {
        if i > 0 {
            // Drift the walk direction, keeping steps smooth. The step
            // length varies so no two inter-residue distances tie exactly
            // (constant steps would make neighbor ranking degenerate).
            let drift = random_unit(rng) * 0.45;
            let next = direction + drift;
            direction = next * (1.0 / next.norm());
            center = center + direction * rng.uniform(5.4, 6.6);
        }
        let letter = NUCLEOTIDES[rng.below(4)];
        let p = center + random_unit(rng) * P_DISTANCE;
        let n = center + random_unit(rng) * glycosidic_distance(letter);
        atoms.push([p, center, n]);
        sequence.push(letter);
    }
    CoarseBackbone::new(ChainKind::Rna, atoms, sequence, (1..=len as i64).collect())
        .expect("synthetic chain construction is valid by design")
}

/// A corpus of named chains with lengths uniform in `[min_len, max_len]`.
/// Each chain draws from its own stream, so chain `i` is stable no matter
/// how many chains are requested.
pub fn synthetic_corpus(
    count: usize,
    min_len: usize,
    max_len: usize,
    seed: u64,
) -> Vec<(String, CoarseBackbone)> {
    (0..count)
        .map(|i| {
            let mut rng = Xoshiro256StarStar::stream(seed, i as u64);
            let len = min_len + rng.below(max_len - min_len + 1);
            (format!("chain_{i:03}"), synthetic_chain(len, &mut rng))
        })
        .collect()
}

/// Render a chain as fixed-column PDB text (chain id `A`).
pub fn to_pdb(bb: &CoarseBackbone) -> String {
    let letters: Vec<char> = bb.sequence().chars().collect();
    let mut records = Vec::with_capacity(bb.len() * 3);
    for i in 0..bb.len() {
        let letter = letters[i];
        let nitrogen = if letter == 'A' || letter == 'G' {
            "N9"
        } else {
            "N1"
        };
        let names = ["P", "C4'", nitrogen];
        for (slot, name) in names.iter().enumerate() {
            records.push(AtomRecord {
                chain_id: "A".to_string(),
                residue_index: bb.residue_ids()[i],
                insertion_code: ' ',
                residue_name: letter.to_string(),
                atom_name: name.to_string(),
                position: bb.bead(i, slot),
            });
        }
    }
    crate::pdb::write_pdb(&[("A".to_string(), records)])
}
