//! Sequence-identity clustering and cluster-atomic dataset splitting.
//!
//! Identity is the length of the longest common subsequence (global
//! alignment with match = 1, mismatch = 0, zero gap penalty) normalized by
//! the shorter length. Clustering is greedy-incremental over sequences in
//! length-descending order; each sequence joins the first cluster whose
//! representative it matches at or above the threshold, else founds one.
//! Whole clusters are then shuffled into train/val/test targeting the
//! requested ratios, so no two near-identical sequences straddle a split.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::rng::Xoshiro256StarStar;

/// Default identity threshold for treating two sequences as redundant.
pub const DEFAULT_IDENTITY_THRESHOLD: f64 = 0.80;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClusterError {
    /// No sequences supplied.
    EmptyInput,
    /// Ratios must be nonnegative and sum to 1.
    BadRatios,
}

impl fmt::Display for ClusterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterError::EmptyInput => write!(f, "no sequences to cluster"),
            ClusterError::BadRatios => {
                write!(f, "split ratios must be nonnegative and sum to 1")
            }
        }
    }
}

impl core::error::Error for ClusterError {}

/// Longest common subsequence length via the classic quadratic DP,
/// rolling a single row.
fn lcs_len(a: &[u8], b: &[u8]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; b.len() + 1];
    for &ca in a {
        let mut diag = 0;
        for (j, &cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if ca == cb {
                diag + 1
            } else {
                up.max(row[j])
            };
            diag = up;
        }
    }
    row[b.len()]
}

/// Alignment identity in [0, 1]: LCS length over the shorter length.
/// Two empty sequences are identical; one empty sequence matches nothing.
pub fn sequence_identity(a: &str, b: &str) -> f64 {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    let min_len = a.len().min(b.len());
    if min_len == 0 {
        return if a.len() == b.len() { 1.0 } else { 0.0 };
    }
    lcs_len(a, b) as f64 / min_len as f64
}

/// One cluster: the founding (representative) sequence index and every
/// member, representative included, in admission order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub representative: usize,
    pub members: Vec<usize>,
}

/// Greedy-incremental clustering over indices into `sequences`.
pub fn greedy_clusters(sequences: &[&str], threshold: f64) -> Result<Vec<Cluster>, ClusterError> {
    if sequences.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    // Length-descending, ties by original index for determinism.
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    order.sort_by(|&i, &j| sequences[j].len().cmp(&sequences[i].len()).then(i.cmp(&j)));

    let mut clusters: Vec<Cluster> = Vec::new();
    for &idx in &order {
        let mut joined = false;
        for cluster in &mut clusters {
            let rep = sequences[cluster.representative];
            if sequence_identity(sequences[idx], rep) >= threshold {
                cluster.members.push(idx);
                joined = true;
                break;
            }
        }
        if !joined {
            clusters.push(Cluster {
                representative: idx,
                members: vec![idx],
            });
        }
    }
    Ok(clusters)
}

/// A cluster-atomic partition of sequence indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Cluster index per sequence, aligned with the input order.
    pub cluster_of: Vec<usize>,
}

impl DatasetSplit {
    /// 0 = train, 1 = val, 2 = test; None if the index is unknown.
    pub fn bucket_of(&self, idx: usize) -> Option<usize> {
        if self.train.contains(&idx) {
            Some(0)
        } else if self.val.contains(&idx) {
            Some(1)
        } else if self.test.contains(&idx) {
            Some(2)
        } else {
            None
        }
    }
}

/// Cluster sequences, then deal whole clusters into train/val/test.
///
/// Cluster order is shuffled by the caller's generator; each cluster lands
/// in the bucket with the largest remaining deficit against its target
/// sequence count (ties favor train, then val). Deterministic per seed.
pub fn cluster_split(
    sequences: &[&str],
    threshold: f64,
    ratios: [f64; 3],
    rng: &mut Xoshiro256StarStar,
) -> Result<DatasetSplit, ClusterError> {
    if ratios.iter().any(|&r| r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(ClusterError::BadRatios);
    }
    let clusters = greedy_clusters(sequences, threshold)?;
    let mut cluster_of = vec![0usize; sequences.len()];
    for (c, cluster) in clusters.iter().enumerate() {
        for &m in &cluster.members {
            cluster_of[m] = c;
        }
    }

    let mut order: Vec<usize> = (0..clusters.len()).collect();
    rng.shuffle(&mut order);

    let total = sequences.len() as f64;
    let targets = [ratios[0] * total, ratios[1] * total, ratios[2] * total];
    let mut counts = [0usize; 3];
    let mut buckets: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for &c in &order {
        let deficit = |b: usize| targets[b] - counts[b] as f64;
        let mut best = 0;
        for b in 1..3 {
            if deficit(b) > deficit(best) {
                best = b;
            }
        }
        for &m in &clusters[c].members {
            buckets[best].push(m);
        }
        counts[best] += clusters[c].members.len();
    }
    let [mut train, mut val, mut test] = buckets;
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(DatasetSplit {
        train,
        val,
        test,
        cluster_of,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::String;

    #[test]
    fn hand_alignment_identity_quarter() {
        // LCS("ACGU", "UGCA") = 1 (any single letter), shorter length 4.
        assert_eq!(sequence_identity("ACGU", "UGCA"), 0.25);
    }

    #[test]
    fn identity_basic_properties() {
        assert_eq!(sequence_identity("ACGU", "ACGU"), 1.0);
        assert_eq!(sequence_identity("", ""), 1.0);
        assert_eq!(sequence_identity("", "ACGU"), 0.0);
        // Normalized by the shorter sequence: a contained subsequence is 1.
        assert_eq!(sequence_identity("ACGU", "AC"), 1.0);
        assert_eq!(sequence_identity("AC", "ACGU"), 1.0);
        // Symmetry on a few random pairs.
        let mut rng = Xoshiro256StarStar::seeded(80);
        for _ in 0..20 {
            let (la, lb) = (5 + rng.below(10), 5 + rng.below(10));
            let a = random_seq(&mut rng, la);
            let b = random_seq(&mut rng, lb);
            let ab = sequence_identity(&a, &b);
            assert_eq!(ab, sequence_identity(&b, &a));
            assert!((0.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn lcs_matches_slow_recursive_oracle_on_short_strings() {
        fn slow(a: &[u8], b: &[u8]) -> usize {
            if a.is_empty() || b.is_empty() {
                0
            } else if a[0] == b[0] {
                1 + slow(&a[1..], &b[1..])
            } else {
                slow(&a[1..], b).max(slow(a, &b[1..]))
            }
        }
        let mut rng = Xoshiro256StarStar::seeded(81);
        for _ in 0..30 {
            let (la, lb) = (1 + rng.below(8), 1 + rng.below(8));
            let a = random_seq(&mut rng, la);
            let b = random_seq(&mut rng, lb);
            assert_eq!(
                lcs_len(a.as_bytes(), b.as_bytes()),
                slow(a.as_bytes(), b.as_bytes()),
                "{a} vs {b}"
            );
        }
    }

    fn random_seq(rng: &mut Xoshiro256StarStar, len: usize) -> String {
        const LETTERS: [char; 4] = ['A', 'C', 'G', 'U'];
        (0..len).map(|_| LETTERS[rng.below(4)]).collect()
    }

    #[test]
    fn identical_sequences_share_cluster_and_split() {
        let seqs = ["ACGUACGU", "ACGUACGU", "GGGGCCCC"];
        let clusters = greedy_clusters(&seqs, 0.8).unwrap();
        assert_eq!(clusters.len(), 2);
        let mut rng = Xoshiro256StarStar::seeded(1);
        let split = cluster_split(&seqs, 0.8, [0.8, 0.1, 0.1], &mut rng).unwrap();
        assert_eq!(split.cluster_of[0], split.cluster_of[1]);
        assert_eq!(split.bucket_of(0), split.bucket_of(1));
    }

    #[test]
    fn quarter_identity_pair_separates() {
        let seqs = ["ACGU", "UGCA"];
        let clusters = greedy_clusters(&seqs, 0.8).unwrap();
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn longest_sequence_founds_first_and_absorbs() {
        let seqs = ["AAAA", "AAAAA", "GGGG"];
        let clusters = greedy_clusters(&seqs, 0.8).unwrap();
        // Order: AAAAA (idx 1) first, AAAA joins it (LCS 4 / 4 = 1), GGGG
        // shares nothing.
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].representative, 1);
        assert_eq!(clusters[0].members, vec![1, 0]);
        assert_eq!(clusters[1].members, vec![2]);
    }

    #[test]
    fn random_corpus_members_match_their_representative() {
        let mut rng = Xoshiro256StarStar::seeded(82);
        // Mix of fresh sequences and single-point mutants to force joins.
        let mut seqs: Vec<String> = Vec::new();
        for _ in 0..40 {
            let len = 8 + rng.below(15);
            let base = random_seq(&mut rng, len);
            seqs.push(base.clone());
            if rng.below(2) == 0 {
                let mut mutant: Vec<char> = base.chars().collect();
                let pos = rng.below(mutant.len());
                mutant[pos] = ['A', 'C', 'G', 'U'][rng.below(4)];
                seqs.push(mutant.into_iter().collect());
            }
        }
        let refs: Vec<&str> = seqs.iter().map(|s| s.as_str()).collect();
        let clusters = greedy_clusters(&refs, 0.8).unwrap();
        // Post-hoc verification: every member meets the threshold against
        // its representative, and the clusters partition the input.
        let mut seen = vec![false; refs.len()];
        for cluster in &clusters {
            for &m in &cluster.members {
                assert!(!seen[m], "{m} assigned twice");
                seen[m] = true;
                assert!(
                    sequence_identity(refs[m], refs[cluster.representative]) >= 0.8,
                    "member {m} below threshold for its representative"
                );
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn split_is_a_cluster_atomic_partition_near_the_ratios() {
        let mut rng = Xoshiro256StarStar::seeded(83);
        let seqs: Vec<String> = (0..100)
            .map(|_| {
                let len = 12 + rng.below(12);
                random_seq(&mut rng, len)
            })
            .collect();
        let refs: Vec<&str> = seqs.iter().map(|s| s.as_str()).collect();
        let mut split_rng = Xoshiro256StarStar::seeded(9);
        let split = cluster_split(&refs, 0.8, [0.8, 0.1, 0.1], &mut split_rng).unwrap();

        // Partition: disjoint and covering.
        let mut seen = vec![0usize; refs.len()];
        for &i in split.train.iter().chain(&split.val).chain(&split.test) {
            seen[i] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));

        // Cluster-atomic: all members of a cluster share one bucket.
        for i in 0..refs.len() {
            for j in 0..refs.len() {
                if split.cluster_of[i] == split.cluster_of[j] {
                    assert_eq!(split.bucket_of(i), split.bucket_of(j));
                }
            }
        }

        // Ratio targeting within cluster granularity. Clusters here are
        // mostly singletons, so a slack of 5 sequences is generous.
        assert!((split.train.len() as i64 - 80).abs() <= 5, "{}", split.train.len());
        assert!((split.val.len() as i64 - 10).abs() <= 5, "{}", split.val.len());
        assert!((split.test.len() as i64 - 10).abs() <= 5, "{}", split.test.len());
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let seqs: Vec<String> = {
            let mut rng = Xoshiro256StarStar::seeded(84);
            (0..30)
                .map(|_| {
                    let len = 10 + rng.below(8);
                    random_seq(&mut rng, len)
                })
                .collect()
        };
        let refs: Vec<&str> = seqs.iter().map(|s| s.as_str()).collect();
        let run = |seed: u64| {
            let mut rng = Xoshiro256StarStar::seeded(seed);
            cluster_split(&refs, 0.8, [0.8, 0.1, 0.1], &mut rng).unwrap()
        };
        assert_eq!(run(5), run(5));
        // Different seeds shuffle clusters differently at least once.
        let base = run(5);
        assert!((6..12).any(|s| run(s) != base));
    }

    #[test]
    fn errors_are_reported() {
        assert_eq!(
            greedy_clusters(&[], 0.8).err(),
            Some(ClusterError::EmptyInput)
        );
        let mut rng = Xoshiro256StarStar::seeded(85);
        assert_eq!(
            cluster_split(&["ACGU"], 0.8, [0.5, 0.2, 0.2], &mut rng).err(),
            Some(ClusterError::BadRatios)
        );
        assert_eq!(
            cluster_split(&["ACGU"], 0.8, [-0.2, 0.6, 0.6], &mut rng).err(),
            Some(ClusterError::BadRatios)
        );
        let _ = format!("{} {}", ClusterError::EmptyInput, ClusterError::BadRatios);
    }
}
