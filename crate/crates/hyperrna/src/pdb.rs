//! Fixed-column PDB parsing and reduction to validated 3-bead chains.
//!
//! Only the classic fixed-column format is handled (no mmCIF). Multi-model
//! files contribute their first model; alternate locations other than
//! blank or `A` are skipped; residues missing any of their three named
//! backbone atoms are dropped rather than imputed.

use hyperrna_core::backbone::{BackboneError, ChainKind, CoarseBackbone};
use hyperrna_core::geom::Vec3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PdbError {
    #[error("line {line}: coordinate field is not a finite number")]
    MalformedCoordinate { line: usize },
    #[error("no atom records parsed")]
    EmptyStructure,
    #[error("chain '{chain}': no residue has all three backbone atoms")]
    EmptyBackbone { chain: String },
    #[error(transparent)]
    Backbone(#[from] BackboneError),
}

/// One ATOM/HETATM record, already column-split.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomRecord {
    pub chain_id: String,
    /// Author residue numbering (column 23–26).
    pub residue_index: i64,
    /// Insertion code, `' '` when absent.
    pub insertion_code: char,
    pub residue_name: String,
    pub atom_name: String,
    pub position: Vec3,
}

fn column(line: &str, range: core::ops::Range<usize>) -> Option<&str> {
    line.get(range)
}

fn parse_coord(line: &str, range: core::ops::Range<usize>, lineno: usize) -> Result<f64, PdbError> {
    let field = column(line, range).ok_or(PdbError::MalformedCoordinate { line: lineno })?;
    let value: f64 = field
        .trim()
        .parse()
        .map_err(|_| PdbError::MalformedCoordinate { line: lineno })?;
    if !value.is_finite() {
        return Err(PdbError::MalformedCoordinate { line: lineno });
    }
    Ok(value)
}

/// Parse ATOM/HETATM records of the first model, grouped by chain in file
/// order. Lines shorter than the coordinate block are skipped; alternate
/// locations other than blank or `A` are skipped.
pub fn parse_pdb(text: &str) -> Result<Vec<(String, Vec<AtomRecord>)>, PdbError> {
    let mut chains: Vec<(String, Vec<AtomRecord>)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.starts_with("ENDMDL") {
            break;
        }
        if !(line.starts_with("ATOM  ") || line.starts_with("HETATM")) {
            continue;
        }
        if line.len() < 54 {
            continue;
        }
        let altloc = column(line, 16..17).unwrap_or(" ");
        if altloc != " " && altloc != "A" {
            continue;
        }
        let atom_name = column(line, 12..16).unwrap_or("").trim();
        if atom_name.is_empty() {
            continue;
        }
        let residue_name = column(line, 17..20).unwrap_or("").trim();
        let chain_id = column(line, 21..22).unwrap_or(" ").trim().to_string();
        let residue_index: i64 = match column(line, 22..26).and_then(|f| f.trim().parse().ok()) {
            Some(v) => v,
            None => continue,
        };
        let insertion_code = column(line, 26..27)
            .and_then(|s| s.chars().next())
            .unwrap_or(' ');
        let position = Vec3::new(
            parse_coord(line, 30..38, lineno)?,
            parse_coord(line, 38..46, lineno)?,
            parse_coord(line, 46..54, lineno)?,
        );
        let record = AtomRecord {
            chain_id: chain_id.clone(),
            residue_index,
            insertion_code,
            residue_name: residue_name.to_string(),
            atom_name: atom_name.to_string(),
            position,
        };
        match chains.iter_mut().find(|(id, _)| *id == chain_id) {
            Some((_, records)) => records.push(record),
            None => chains.push((chain_id, vec![record])),
        }
    }
    if chains.iter().all(|(_, r)| r.is_empty()) || chains.is_empty() {
        return Err(PdbError::EmptyStructure);
    }
    Ok(chains)
}

const PROTEIN_NAMES: [(&str, char); 20] = [
    ("ALA", 'A'),
    ("ARG", 'R'),
    ("ASN", 'N'),
    ("ASP", 'D'),
    ("CYS", 'C'),
    ("GLN", 'Q'),
    ("GLU", 'E'),
    ("GLY", 'G'),
    ("HIS", 'H'),
    ("ILE", 'I'),
    ("LEU", 'L'),
    ("LYS", 'K'),
    ("MET", 'M'),
    ("PHE", 'F'),
    ("PRO", 'P'),
    ("SER", 'S'),
    ("THR", 'T'),
    ("TRP", 'W'),
    ("TYR", 'Y'),
    ("VAL", 'V'),
];

fn residue_letter(name: &str, kind: ChainKind) -> Option<char> {
    match kind {
        ChainKind::Rna => match name {
            "A" => Some('A'),
            "G" => Some('G'),
            "C" => Some('C'),
            "U" => Some('U'),
            _ => None,
        },
        ChainKind::Protein => PROTEIN_NAMES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, c)| *c),
    }
}

/// Majority vote over recognized residue names; `None` when nothing in the
/// chain matches either vocabulary.
pub fn detect_chain_kind(records: &[AtomRecord]) -> Option<ChainKind> {
    let mut rna = 0usize;
    let mut protein = 0usize;
    for r in records {
        if residue_letter(&r.residue_name, ChainKind::Rna).is_some() {
            rna += 1;
        }
        if residue_letter(&r.residue_name, ChainKind::Protein).is_some() {
            protein += 1;
        }
    }
    if rna == 0 && protein == 0 {
        None
    } else if rna >= protein {
        Some(ChainKind::Rna)
    } else {
        Some(ChainKind::Protein)
    }
}

fn slot_names(kind: ChainKind, letter: char) -> [&'static str; 3] {
    match kind {
        // P, C4', and the glycosidic nitrogen: N9 for purines, N1 for
        // pyrimidines.
        ChainKind::Rna => {
            if letter == 'A' || letter == 'G' {
                ["P", "C4'", "N9"]
            } else {
                ["P", "C4'", "N1"]
            }
        }
        ChainKind::Protein => ["N", "CA", "C"],
    }
}

/// Reduce one chain's records to a 3-bead backbone. Residues with an
/// unrecognized name are dropped with a warning; residues missing any of
/// the three named atoms are dropped silently; duplicate atoms keep their
/// first occurrence. Returns the backbone plus the warnings.
pub fn coarse_grain(
    records: &[AtomRecord],
    kind: ChainKind,
) -> Result<(CoarseBackbone, Vec<String>), PdbError> {
    let chain_label = records
        .first()
        .map(|r| r.chain_id.clone())
        .unwrap_or_default();
    // Group by (residue_index, insertion_code) in first-appearance order.
    let mut residues: Vec<((i64, char), Vec<&AtomRecord>)> = Vec::new();
    for r in records {
        let key = (r.residue_index, r.insertion_code);
        match residues.iter_mut().find(|(k, _)| *k == key) {
            Some((_, group)) => group.push(r),
            None => residues.push((key, vec![r])),
        }
    }

    let mut warnings = Vec::new();
    let mut atoms: Vec<[Vec3; 3]> = Vec::new();
    let mut sequence = String::new();
    let mut ids: Vec<i64> = Vec::new();
    for ((res_id, _icode), group) in &residues {
        let name = &group[0].residue_name;
        let letter = match residue_letter(name, kind) {
            Some(l) => l,
            None => {
                warnings.push(format!(
                    "chain '{chain_label}' residue {res_id}: unknown residue name '{name}', dropped"
                ));
                continue;
            }
        };
        let slots = slot_names(kind, letter);
        let mut beads = [Vec3::ZERO; 3];
        let mut found = [false; 3];
        for atom in group {
            for (s, slot) in slots.iter().enumerate() {
                // First occurrence wins: duplicates never overwrite.
                if !found[s] && atom.atom_name == *slot {
                    beads[s] = atom.position;
                    found[s] = true;
                }
            }
        }
        if !found.iter().all(|&f| f) {
            continue;
        }
        atoms.push(beads);
        sequence.push(letter);
        // Author numbering, bumped just enough to stay strictly increasing
        // when insertion codes (or repeated numbers) collide.
        let id = match ids.last() {
            Some(&prev) if *res_id <= prev => prev + 1,
            _ => *res_id,
        };
        ids.push(id);
    }
    if atoms.is_empty() {
        return Err(PdbError::EmptyBackbone {
            chain: chain_label,
        });
    }
    let backbone = CoarseBackbone::new(kind, atoms, sequence, ids)?;
    Ok((backbone, warnings))
}

/// One text line per atom in fixed columns, reversing [`parse_pdb`].
pub fn write_pdb(chains: &[(String, Vec<AtomRecord>)]) -> String {
    let mut out = String::new();
    let mut serial = 1usize;
    for (chain_id, records) in chains {
        for r in records {
            let element = r.atom_name.chars().next().unwrap_or(' ');
            // Left-pad 1–3 character atom names into columns 14-16 as the
            // format convention expects (column 13 is for 4-char names).
            let name_field = if r.atom_name.len() >= 4 {
                r.atom_name.clone()
            } else {
                format!(" {:<3}", r.atom_name)
            };
            out.push_str(&format!(
                "ATOM  {:>5} {:<4}{}{:>3} {}{:>4}{}   {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}          {:>2}\n",
                serial % 100_000,
                name_field,
                ' ',
                r.residue_name,
                if chain_id.is_empty() { " ".to_string() } else { chain_id.clone() },
                r.residue_index,
                r.insertion_code,
                r.position.x(),
                r.position.y(),
                r.position.z(),
                1.00,
                0.00,
                element,
            ));
            serial += 1;
        }
        out.push_str("TER\n");
    }
    out.push_str("END\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom_line(
        name: &str,
        res_name: &str,
        chain: char,
        res_id: i64,
        x: f64,
        y: f64,
        z: f64,
    ) -> String {
        let name_field = if name.len() >= 4 {
            name.to_string()
        } else {
            format!(" {:<3}", name)
        };
        format!(
            "ATOM      1 {:<4} {:>3} {}{:>4}    {:>8.3}{:>8.3}{:>8.3}\n",
            name_field, res_name, chain, res_id, x, y, z
        )
    }

    #[test]
    fn single_atom_round_trips_fields() {
        let text = atom_line("C4'", "G", 'A', 7, 1.0, 2.0, 3.0);
        let chains = parse_pdb(&text).unwrap();
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].0, "A");
        let r = &chains[0].1[0];
        assert_eq!(r.atom_name, "C4'");
        assert_eq!(r.residue_name, "G");
        assert_eq!(r.residue_index, 7);
        assert_eq!(r.position, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn bad_coordinate_is_an_error_and_short_lines_are_skipped() {
        let mut text = atom_line("C4'", "G", 'A', 1, 1.0, 2.0, 3.0);
        text = text.replace("   1.000", "     abc");
        assert!(matches!(
            parse_pdb(&text),
            Err(PdbError::MalformedCoordinate { line: 1 })
        ));
        // A short line is not an error; with nothing else present the file
        // is simply empty.
        assert!(matches!(
            parse_pdb("ATOM      1  C4'\n"),
            Err(PdbError::EmptyStructure)
        ));
    }

    #[test]
    fn altloc_b_is_skipped() {
        let primary = atom_line("C4'", "G", 'A', 1, 1.0, 0.0, 0.0);
        let mut alt = atom_line("C4'", "G", 'A', 1, 9.0, 0.0, 0.0);
        alt.replace_range(16..17, "B");
        let chains = parse_pdb(&format!("{primary}{alt}")).unwrap();
        assert_eq!(chains[0].1.len(), 1);
        assert_eq!(chains[0].1[0].position.x(), 1.0);
    }

    #[test]
    fn first_model_only() {
        let m1 = atom_line("C4'", "G", 'A', 1, 1.0, 0.0, 0.0);
        let m2 = atom_line("C4'", "G", 'A', 1, 5.0, 0.0, 0.0);
        let text = format!("MODEL     1\n{m1}ENDMDL\nMODEL     2\n{m2}ENDMDL\n");
        let chains = parse_pdb(&text).unwrap();
        assert_eq!(chains[0].1.len(), 1);
        assert_eq!(chains[0].1[0].position.x(), 1.0);
    }

    fn rna_residue(letter: char, chain: char, res_id: i64, offset: f64) -> String {
        let nitrogen = if letter == 'A' || letter == 'G' {
            "N9"
        } else {
            "N1"
        };
        let name = letter.to_string();
        let mut out = String::new();
        out += &atom_line("P", &name, chain, res_id, offset, 0.0, 0.0);
        out += &atom_line("C4'", &name, chain, res_id, offset + 1.0, 0.0, 0.0);
        out += &atom_line(nitrogen, &name, chain, res_id, offset + 2.0, 0.0, 0.0);
        out
    }

    fn protein_residue(name: &str, chain: char, res_id: i64, offset: f64) -> String {
        let mut out = String::new();
        out += &atom_line("N", name, chain, res_id, offset, 10.0, 0.0);
        out += &atom_line("CA", name, chain, res_id, offset + 1.0, 10.0, 0.0);
        out += &atom_line("C", name, chain, res_id, offset + 2.0, 10.0, 0.0);
        out
    }

    #[test]
    fn two_chain_fixture_counts_residues_per_chain() {
        let mut text = String::new();
        text += &rna_residue('G', 'A', 1, 0.0);
        text += &rna_residue('C', 'A', 2, 6.0);
        text += &rna_residue('U', 'A', 3, 12.0);
        text += &protein_residue("ALA", 'B', 1, 0.0);
        text += &protein_residue("GLY", 'B', 2, 6.0);
        let chains = parse_pdb(&text).unwrap();
        assert_eq!(chains.len(), 2);
        assert_eq!(chains[0].1.len(), 9);
        assert_eq!(chains[1].1.len(), 6);

        let (rna, warn) = coarse_grain(&chains[0].1, ChainKind::Rna).unwrap();
        assert!(warn.is_empty());
        assert_eq!(rna.sequence(), "GCU");
        let (prot, _) = coarse_grain(&chains[1].1, ChainKind::Protein).unwrap();
        assert_eq!(prot.sequence(), "AG");
        assert_eq!(detect_chain_kind(&chains[0].1), Some(ChainKind::Rna));
        assert_eq!(detect_chain_kind(&chains[1].1), Some(ChainKind::Protein));
    }

    #[test]
    fn purine_takes_n9_and_pyrimidine_takes_n1() {
        let mut text = rna_residue('G', 'A', 1, 0.0);
        text += &rna_residue('C', 'A', 2, 6.0);
        let chains = parse_pdb(&text).unwrap();
        let (bb, _) = coarse_grain(&chains[0].1, ChainKind::Rna).unwrap();
        assert_eq!(bb.len(), 2);
        // The glycosidic bead of the G residue is its N9 atom.
        assert_eq!(bb.bead(0, 2), Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(bb.bead(1, 2), Vec3::new(8.0, 0.0, 0.0));
    }

    #[test]
    fn incomplete_residue_is_dropped_and_ids_keep_author_numbering() {
        let mut text = String::new();
        text += &rna_residue('G', 'A', 1, 0.0);
        text += &rna_residue('A', 'A', 2, 6.0);
        // Residue 3 lacks its C4' atom.
        text += &atom_line("P", "U", 'A', 3, 12.0, 0.0, 0.0);
        text += &atom_line("N1", "U", 'A', 3, 14.0, 0.0, 0.0);
        text += &rna_residue('C', 'A', 4, 18.0);
        let chains = parse_pdb(&text).unwrap();
        let (bb, warn) = coarse_grain(&chains[0].1, ChainKind::Rna).unwrap();
        assert!(warn.is_empty());
        assert_eq!(bb.sequence(), "GAC");
        assert_eq!(bb.residue_ids(), &[1, 2, 4]);
    }

    #[test]
    fn missing_phosphate_on_the_only_residue_is_an_empty_backbone() {
        let mut text = atom_line("C4'", "A", 'A', 1, 0.0, 0.0, 0.0);
        text += &atom_line("N9", "A", 'A', 1, 1.0, 0.0, 0.0);
        let chains = parse_pdb(&text).unwrap();
        assert!(matches!(
            coarse_grain(&chains[0].1, ChainKind::Rna),
            Err(PdbError::EmptyBackbone { .. })
        ));
    }

    #[test]
    fn unknown_residue_warns_and_drops() {
        let mut text = rna_residue('G', 'A', 1, 0.0);
        text += &atom_line("P", "1MA", 'A', 2, 6.0, 0.0, 0.0);
        text += &atom_line("C4'", "1MA", 'A', 2, 7.0, 0.0, 0.0);
        text += &atom_line("N9", "1MA", 'A', 2, 8.0, 0.0, 0.0);
        let chains = parse_pdb(&text).unwrap();
        let (bb, warn) = coarse_grain(&chains[0].1, ChainKind::Rna).unwrap();
        assert_eq!(bb.sequence(), "G");
        assert_eq!(warn.len(), 1);
        assert!(warn[0].contains("1MA"));
    }

    #[test]
    fn duplicate_atoms_keep_first_occurrence() {
        let mut text = rna_residue('G', 'A', 1, 0.0);
        // A second C4' for the same residue at a different position.
        text += &atom_line("C4'", "G", 'A', 1, 99.0, 0.0, 0.0);
        let chains = parse_pdb(&text).unwrap();
        let (bb, _) = coarse_grain(&chains[0].1, ChainKind::Rna).unwrap();
        assert_eq!(bb.bead(0, 1), Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn insertion_codes_bump_ids_to_stay_increasing() {
        let mut text = rna_residue('G', 'A', 100, 0.0);
        let mut inserted = rna_residue('A', 'A', 100, 6.0);
        // Mark the second residue 100 with insertion code A.
        inserted = inserted
            .lines()
            .map(|l| {
                let mut s = l.to_string();
                s.replace_range(26..27, "A");
                format!("{s}\n")
            })
            .collect();
        text += &inserted;
        text += &rna_residue('C', 'A', 101, 12.0);
        let chains = parse_pdb(&text).unwrap();
        let (bb, _) = coarse_grain(&chains[0].1, ChainKind::Rna).unwrap();
        assert_eq!(bb.sequence(), "GAC");
        assert_eq!(bb.residue_ids(), &[100, 101, 102]);
    }

    #[test]
    fn write_then_parse_round_trips_records() {
        let mut text = String::new();
        text += &rna_residue('G', 'A', 1, 0.0);
        text += &rna_residue('U', 'A', 2, 6.0);
        let chains = parse_pdb(&text).unwrap();
        let rewritten = write_pdb(&chains);
        let reparsed = parse_pdb(&rewritten).unwrap();
        assert_eq!(chains, reparsed);
    }
}
