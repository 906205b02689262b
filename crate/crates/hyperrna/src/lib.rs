//! File formats, synthetic data, the training loop and the command-line
//! surface for the coarse-grained sequence-design pipeline.
//!
//! All numerics live in `hyperrna-core`; this crate owns everything that
//! touches the filesystem: PDB/FASTA parsing ([`pdb`], [`fasta`]), the
//! graph-cache / checkpoint / config / split text formats ([`formats`]),
//! synthetic benchmark chains ([`synth`]), the epoch loop with
//! checkpointing ([`trainer`]) and the `hyperrna` binary ([`cli`]).

pub mod cli;
pub mod fasta;
pub mod formats;
pub mod pdb;
pub mod synth;
pub mod trainer;
