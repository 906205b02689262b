//! Geometric graph construction over coarse-grained backbones.
//!
//! Each residue becomes one node. Nodes carry a scalar feature row split into
//! five named blocks (forward-distance RBF, backward-distance RBF, center-to-third
//! RBF, center-to-first RBF, token) and a bank of 3-vector channels built from
//! backbone unit vectors and torsion-scaled copies of them. Directed k-nearest
//! neighbour adjacency over the center beads supplies the edges, each with its
//! own distance-RBF scalar row and a unit displacement vector.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::backbone::{ChainKind, CoarseBackbone, SLOT_FIRST, SLOT_THIRD};
use crate::geom::{dihedral, Rbf, Vec3};
use crate::mathf;
use crate::tensor::Tensor;

/// Number of vector channels with fixed semantics: four unit-vector families
/// plus sine- and cosine-scaled copies of each.
pub const VECTOR_CHANNELS_USED: usize = 12;

/// Errors raised while building a geometric graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureError {
    /// Fewer than two nodes: no neighbourhood structure exists.
    DegenerateGraph,
    /// Configuration violates a structural constraint.
    BadConfig(&'static str),
    /// The chain passed in a slot reserved for the other kind.
    WrongChainKind,
}

impl fmt::Display for FeatureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureError::DegenerateGraph => {
                write!(f, "graph is degenerate: fewer than two nodes")
            }
            FeatureError::BadConfig(msg) => write!(f, "bad feature config: {msg}"),
            FeatureError::WrongChainKind => {
                write!(f, "chain kind does not match the argument slot")
            }
        }
    }
}

impl core::error::Error for FeatureError {}

/// Knobs for featurization. `d_e` is derived: four RBF blocks of `rbf_bins`
/// plus the token block.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// Neighbours per node (clamped to n-1).
    pub k: usize,
    /// Centers per node-level RBF block.
    pub rbf_bins: usize,
    /// Width of the token block.
    pub token_width: usize,
    /// Vector channels; the first twelve have fixed meaning, the rest are zero.
    pub d_v: usize,
    /// Centers for the edge distance RBF.
    pub edge_rbf_bins: usize,
    /// Lower end of the RBF distance range, in Angstroms.
    pub d_min: f64,
    /// Upper end of the RBF distance range, in Angstroms.
    pub d_max: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            k: 16,
            rbf_bins: 24,
            token_width: 32,
            d_v: 16,
            edge_rbf_bins: 32,
            d_min: 0.0,
            d_max: 20.0,
        }
    }
}

impl FeatureConfig {
    /// Total scalar width: four RBF blocks plus the token block.
    pub fn d_e(&self) -> usize {
        4 * self.rbf_bins + self.token_width
    }

    /// Widths of the five scalar blocks in storage order:
    /// forward, backward, center-to-third, center-to-first, token.
    pub fn block_widths(&self) -> [usize; 5] {
        [
            self.rbf_bins,
            self.rbf_bins,
            self.rbf_bins,
            self.rbf_bins,
            self.token_width,
        ]
    }

    /// Column offset of each scalar block.
    pub fn block_offsets(&self) -> [usize; 5] {
        let w = self.block_widths();
        let mut off = [0usize; 5];
        for i in 1..5 {
            off[i] = off[i - 1] + w[i - 1];
        }
        off
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.k == 0 {
            return Err(FeatureError::BadConfig("k must be at least 1"));
        }
        if self.rbf_bins < 2 || self.edge_rbf_bins < 2 {
            return Err(FeatureError::BadConfig("RBF blocks need at least 2 centers"));
        }
        if self.token_width < 4 {
            return Err(FeatureError::BadConfig(
                "token block needs at least 4 slots (kind x parity)",
            ));
        }
        if self.d_v < VECTOR_CHANNELS_USED {
            return Err(FeatureError::BadConfig("d_v must be at least 12"));
        }
        if !(self.d_max > self.d_min) {
            return Err(FeatureError::BadConfig("distance range must be non-empty"));
        }
        Ok(())
    }
}

/// Directed k-nearest-neighbour adjacency over point positions.
///
/// For each node the `k` other nodes with the smallest Euclidean distance,
/// ties broken toward the lower index, `k` clamped to `n - 1`. The relation is
/// not symmetrized. Neighbour lists are ordered nearest-first.
pub fn knn_graph(positions: &[Vec3], k: usize) -> Result<Vec<Vec<usize>>, FeatureError> {
    let n = positions.len();
    if n < 2 {
        return Err(FeatureError::DegenerateGraph);
    }
    let k_eff = k.min(n - 1);
    let mut adjacency = Vec::with_capacity(n);
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| {
            let da = positions[i].dist(positions[a]);
            let db = positions[i].dist(positions[b]);
            da.total_cmp(&db).then(a.cmp(&b))
        });
        adjacency.push(order[..k_eff].to_vec());
    }
    Ok(adjacency)
}

/// The four per-residue unit-vector families. For nucleic chains `to_p` points
/// at the phosphate bead and `to_n` at the base nitrogen; for peptide chains
/// the same slots hold the amide nitrogen and carbonyl carbon.
#[derive(Debug, Clone)]
pub struct BackboneFrames {
    /// unit(center[i+1] - center[i]); zero at the chain's last residue.
    pub forward: Vec<Vec3>,
    /// unit(center[i-1] - center[i]); zero at the chain's first residue.
    pub reverse: Vec<Vec3>,
    /// unit(first_bead[i] - center[i]).
    pub to_p: Vec<Vec3>,
    /// unit(third_bead[i] - center[i]).
    pub to_n: Vec<Vec3>,
}

/// Compute the unit-vector families for one chain.
pub fn backbone_unit_vectors(bb: &CoarseBackbone) -> BackboneFrames {
    let n = bb.len();
    let mut forward = vec![Vec3::ZERO; n];
    let mut reverse = vec![Vec3::ZERO; n];
    let mut to_p = vec![Vec3::ZERO; n];
    let mut to_n = vec![Vec3::ZERO; n];
    for i in 0..n {
        let c = bb.center(i);
        if i + 1 < n {
            forward[i] = (bb.center(i + 1) - c).unit_or_zero();
        }
        if i >= 1 {
            reverse[i] = (bb.center(i - 1) - c).unit_or_zero();
        }
        to_p[i] = (bb.bead(i, SLOT_FIRST) - c).unit_or_zero();
        to_n[i] = (bb.bead(i, SLOT_THIRD) - c).unit_or_zero();
    }
    BackboneFrames {
        forward,
        reverse,
        to_p,
        to_n,
    }
}

/// Local backbone torsion per residue: the dihedral of
/// (center[i-1], first[i], center[i], first[i+1]).
///
/// `None` at both chain termini and wherever the four points are degenerate;
/// callers zero-fill the torsion-scaled channels in that case.
pub fn backbone_torsions(bb: &CoarseBackbone) -> Vec<Option<f64>> {
    let n = bb.len();
    let mut out = vec![None; n];
    for i in 1..n.saturating_sub(1) {
        out[i] = dihedral(
            bb.center(i - 1),
            bb.bead(i, SLOT_FIRST),
            bb.center(i),
            bb.bead(i + 1, SLOT_FIRST),
        )
        .ok();
    }
    out
}

/// A featurized structure: adjacency plus node and edge feature tensors.
///
/// Vector features are stored flattened as `[n, 3 * d_v]` with all x components
/// first, then all y, then all z; channel `c`'s coordinates live in columns
/// `c`, `d_v + c`, and `2 * d_v + c`.
#[derive(Debug, Clone)]
pub struct GeometricGraph {
    /// Node count.
    pub n: usize,
    /// Effective neighbour count (already clamped).
    pub k: usize,
    /// Vector channel count.
    pub d_v: usize,
    /// Ordered neighbour lists, nearest first.
    pub adjacency: Vec<Vec<usize>>,
    /// `[n, d_e]` scalar features.
    pub scalar: Tensor,
    /// `[n, 3 * d_v]` flattened vector features.
    pub vector: Tensor,
    /// `[n * k, edge_rbf_bins]` edge distance expansions, row per (node, rank).
    pub edge_scalar: Tensor,
    /// `[n * k, 3]` unit displacement per edge, same row order.
    pub edge_vector: Tensor,
    /// Chain kind per node.
    pub node_kind: Vec<ChainKind>,
    /// One letter per node (nucleotides then amino acids).
    pub sequence: String,
    /// Residue identifier per node, carried from the source chains.
    pub residue_ids: Vec<i64>,
    /// Number of leading nucleic-acid nodes.
    pub rna_len: usize,
}

impl GeometricGraph {
    /// The vector of channel `c` at node `i`.
    pub fn vector_channel(&self, i: usize, c: usize) -> Vec3 {
        Vec3::new(
            self.vector.get2(i, c),
            self.vector.get2(i, self.d_v + c),
            self.vector.get2(i, 2 * self.d_v + c),
        )
    }

    /// Scalar feature width.
    pub fn d_e(&self) -> usize {
        self.scalar.shape()[1]
    }

    /// Nucleotide indices of the nucleic nodes (the first `rna_len` letters).
    pub fn rna_indices(&self) -> Vec<usize> {
        self.sequence
            .chars()
            .take(self.rna_len)
            .filter_map(crate::backbone::nucleotide_index)
            .collect()
    }
}

fn write_channel(vector: &mut Tensor, d_v: usize, node: usize, channel: usize, v: Vec3) {
    vector.set2(node, channel, v.x());
    vector.set2(node, d_v + channel, v.y());
    vector.set2(node, 2 * d_v + channel, v.z());
}

/// Build the full geometric graph for one nucleic chain plus an optional
/// peptide chain. Nucleic nodes come first; sequential features never cross
/// the chain boundary, while the kNN graph and edge features span both chains.
pub fn build_features(
    rna: &CoarseBackbone,
    protein: Option<&CoarseBackbone>,
    cfg: &FeatureConfig,
) -> Result<GeometricGraph, FeatureError> {
    cfg.validate()?;
    if rna.kind() != ChainKind::Rna {
        return Err(FeatureError::WrongChainKind);
    }
    if let Some(p) = protein {
        if p.kind() != ChainKind::Protein {
            return Err(FeatureError::WrongChainKind);
        }
    }

    let chains: Vec<&CoarseBackbone> = core::iter::once(rna).chain(protein).collect();
    let n: usize = chains.iter().map(|c| c.len()).sum();
    if n < 2 {
        return Err(FeatureError::DegenerateGraph);
    }

    let mut positions = Vec::with_capacity(n);
    let mut node_kind = Vec::with_capacity(n);
    let mut sequence = String::with_capacity(n);
    let mut residue_ids = Vec::with_capacity(n);
    for chain in &chains {
        for i in 0..chain.len() {
            positions.push(chain.center(i));
            node_kind.push(chain.kind());
        }
        sequence.push_str(chain.sequence());
        residue_ids.extend_from_slice(chain.residue_ids());
    }

    let adjacency = knn_graph(&positions, cfg.k)?;
    let k_eff = adjacency[0].len();

    let d_e = cfg.d_e();
    let offsets = cfg.block_offsets();
    let node_rbf = Rbf::new(cfg.rbf_bins, cfg.d_min, cfg.d_max);
    let edge_rbf = Rbf::new(cfg.edge_rbf_bins, cfg.d_min, cfg.d_max);

    let mut scalar = Tensor::zeros(&[n, d_e]);
    let mut vector = Tensor::zeros(&[n, 3 * cfg.d_v]);

    let mut base = 0usize;
    for chain in &chains {
        let m = chain.len();
        let frames = backbone_unit_vectors(chain);
        let torsions = backbone_torsions(chain);
        let kind_index = match chain.kind() {
            ChainKind::Rna => 0usize,
            ChainKind::Protein => 1usize,
        };
        for t in 0..m {
            let node = base + t;
            let c = chain.center(t);
            // Scalar blocks; a missing neighbour leaves its block at zero.
            if t + 1 < m {
                let d = c.dist(chain.center(t + 1));
                node_rbf.expand_into(
                    d,
                    &mut scalar.row_mut(node)[offsets[0]..offsets[0] + cfg.rbf_bins],
                );
            }
            if t >= 1 {
                let d = c.dist(chain.center(t - 1));
                node_rbf.expand_into(
                    d,
                    &mut scalar.row_mut(node)[offsets[1]..offsets[1] + cfg.rbf_bins],
                );
            }
            let d_third = c.dist(chain.bead(t, SLOT_THIRD));
            node_rbf.expand_into(
                d_third,
                &mut scalar.row_mut(node)[offsets[2]..offsets[2] + cfg.rbf_bins],
            );
            let d_first = c.dist(chain.bead(t, SLOT_FIRST));
            node_rbf.expand_into(
                d_first,
                &mut scalar.row_mut(node)[offsets[3]..offsets[3] + cfg.rbf_bins],
            );
            // Token block: one-hot over (chain kind, chain-local parity).
            scalar.set2(node, offsets[4] + kind_index * 2 + (t % 2), 1.0);

            // Vector channels 0..4: the four unit families.
            write_channel(&mut vector, cfg.d_v, node, 0, frames.forward[t]);
            write_channel(&mut vector, cfg.d_v, node, 1, frames.reverse[t]);
            write_channel(&mut vector, cfg.d_v, node, 2, frames.to_p[t]);
            write_channel(&mut vector, cfg.d_v, node, 3, frames.to_n[t]);
            // Channels 4..12: the same four scaled by sin/cos of the local
            // torsion; zero where the torsion is undefined.
            if let Some(tau) = torsions[t] {
                let (s, co) = (mathf::sin(tau), mathf::cos(tau));
                let fam = [
                    frames.forward[t],
                    frames.reverse[t],
                    frames.to_p[t],
                    frames.to_n[t],
                ];
                for (fi, &v) in fam.iter().enumerate() {
                    write_channel(&mut vector, cfg.d_v, node, 4 + fi, v * s);
                    write_channel(&mut vector, cfg.d_v, node, 8 + fi, v * co);
                }
            }
        }
        base += m;
    }

    let mut edge_scalar = Tensor::zeros(&[n * k_eff, cfg.edge_rbf_bins]);
    let mut edge_vector = Tensor::zeros(&[n * k_eff, 3]);
    for i in 0..n {
        for (rank, &j) in adjacency[i].iter().enumerate() {
            let row = i * k_eff + rank;
            let delta = positions[j] - positions[i];
            edge_rbf.expand_into(delta.norm(), edge_scalar.row_mut(row));
            let u = delta.unit_or_zero();
            edge_vector.set2(row, 0, u.x());
            edge_vector.set2(row, 1, u.y());
            edge_vector.set2(row, 2, u.z());
        }
    }

    Ok(GeometricGraph {
        n,
        k: k_eff,
        d_v: cfg.d_v,
        adjacency,
        scalar,
        vector,
        edge_scalar,
        edge_vector,
        node_kind,
        sequence,
        residue_ids,
        rna_len: rna.len(),
    })
}
