//! FASTA reading and writing with per-alphabet validation.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FastaError {
    #[error("record '{id}': letter '{letter}' outside the {alphabet} alphabet")]
    InvalidAlphabet {
        id: String,
        letter: char,
        alphabet: &'static str,
    },
    #[error("sequence data before the first '>' header")]
    MissingHeader,
}

/// Validation mode. RNA uppercases and maps `T` to `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alphabet {
    Rna,
    Protein,
}

impl Alphabet {
    fn name(self) -> &'static str {
        match self {
            Alphabet::Rna => "RNA",
            Alphabet::Protein => "protein",
        }
    }

    fn normalize(self, id: &str, raw: char) -> Result<char, FastaError> {
        let upper = raw.to_ascii_uppercase();
        let mapped = match self {
            Alphabet::Rna => {
                if upper == 'T' {
                    'U'
                } else {
                    upper
                }
            }
            Alphabet::Protein => upper,
        };
        let ok = match self {
            Alphabet::Rna => hyperrna_core::backbone::nucleotide_index(mapped).is_some(),
            Alphabet::Protein => hyperrna_core::backbone::AMINO_ACIDS.contains(mapped),
        };
        if ok {
            Ok(mapped)
        } else {
            Err(FastaError::InvalidAlphabet {
                id: id.to_string(),
                letter: raw,
                alphabet: self.name(),
            })
        }
    }
}

/// Parse FASTA text into `(id, sequence)` records. The id is the first
/// whitespace-delimited token after `>`; sequence lines are concatenated,
/// uppercased and validated against the alphabet.
pub fn parse_fasta(text: &str, alphabet: Alphabet) -> Result<Vec<(String, String)>, FastaError> {
    let mut records: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            let id = header.split_whitespace().next().unwrap_or("").to_string();
            records.push((id, String::new()));
        } else {
            let (id, seq) = records.last_mut().ok_or(FastaError::MissingHeader)?;
            for raw in line.chars().filter(|c| !c.is_whitespace()) {
                seq.push(alphabet.normalize(id, raw)?);
            }
        }
    }
    Ok(records)
}

/// Write records with 60-column sequence wrapping.
pub fn write_fasta(records: &[(String, String)]) -> String {
    let mut out = String::new();
    for (id, seq) in records {
        out.push('>');
        out.push_str(id);
        out.push('\n');
        let chars: Vec<char> = seq.chars().collect();
        for chunk in chars.chunks(60) {
            out.extend(chunk.iter());
            out.push('\n');
        }
    }
    out
}
