//! Set partitions of operator positions and their diagram bookkeeping.
//!
//! Operators are numbered `1..=q`. Gap `g` (for `g` in `1..q`) sits between
//! operator `g` and `g + 1` and carries one inserted eigenstate. A block
//! covers gap `g` when `min B <= g < max B`; uncovered gaps hold scar
//! insertions and covered gaps hold thermal indices.

use std::ops::Range;

use crate::error::{Error, Result};

/// Blocks of 1-based positions; each block ascending, blocks ordered by
/// their smallest element.
pub type Partition = Vec<Vec<usize>>;

pub const MAX_ORDER: usize = 8;

/// Every set partition of `{1..n}`, in lexicographic order of restricted
/// growth strings.
pub fn set_partitions(n: usize) -> Vec<Partition> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    loop {
        let n_blocks = rgs.iter().max().unwrap() + 1;
        let mut blocks = vec![Vec::new(); n_blocks];
        for (pos, &b) in rgs.iter().enumerate() {
            blocks[b].push(pos + 1);
        }
        out.push(blocks);

        // next restricted growth string: rgs[k] <= 1 + max(rgs[..k])
        let mut k = n;
        loop {
            if k == 1 {
                return out;
            }
            k -= 1;
            let prefix_max = rgs[..k].iter().copied().max().unwrap();
            if rgs[k] <= prefix_max {
                rgs[k] += 1;
                for x in &mut rgs[k + 1..] {
                    *x = 0;
                }
                break;
            }
        }
    }
}

/// No `i < j < k < l` with `i, k` in one block and `j, l` in another.
pub fn is_noncrossing(p: &Partition) -> bool {
    for (x, bx) in p.iter().enumerate() {
        for by in p.iter().skip(x + 1) {
            for w in bx.windows(2) {
                let inside = by.iter().filter(|&&e| w[0] < e && e < w[1]).count();
                if inside > 0 && inside < by.len() {
                    return false;
                }
            }
            for w in by.windows(2) {
                let inside = bx.iter().filter(|&&e| w[0] < e && e < w[1]).count();
                if inside > 0 && inside < bx.len() {
                    return false;
                }
            }
        }
    }
    true
}

pub fn noncrossing_partitions(q: usize) -> Result<Vec<Partition>> {
    if !(1..=MAX_ORDER).contains(&q) {
        return Err(Error::UnsupportedOrder(q));
    }
    Ok(set_partitions(q).into_iter().filter(is_noncrossing).collect())
}

/// `(-1)^(n-1) (n-1)!` per block: the Möbius function of the partition
/// lattice between a partition and a coarsening that merges the given
/// numbers of blocks.
pub fn mobius_coefficient(merged_sizes: &[usize]) -> i64 {
    merged_sizes
        .iter()
        .map(|&n| {
            let fact: i64 = (1..n as i64).product();
            if n % 2 == 0 {
                -fact
            } else {
                fact
            }
        })
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gap {
    Scar,
    Thermal(usize),
}

/// A maximal run of operators between scar insertions, generated by one
/// outer block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    /// 0-based operator positions.
    pub ops: Range<usize>,
    /// The outer block, 0-based.
    pub outer: Vec<usize>,
    /// Blocks nested inside the outer one, 0-based.
    pub nested: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagram {
    pub q: usize,
    pub partition: Partition,
    /// One entry per gap `1..q`, stored 0-based. Thermal labels are dense
    /// and numbered in order of first appearance.
    pub gaps: Vec<Gap>,
    pub segments: Vec<Segment>,
}

fn covers(block: &[usize], gap: usize) -> bool {
    block[0] <= gap && gap < *block.last().unwrap()
}

impl Diagram {
    pub fn new(partition: Partition) -> Result<Self> {
        let q: usize = partition.iter().map(Vec::len).sum();
        let mut seen = vec![false; q + 1];
        for &e in partition.iter().flatten() {
            if e == 0 || e > q || seen[e] {
                return Err(Error::domain("not a partition of 1..q"));
            }
            seen[e] = true;
        }
        if !is_noncrossing(&partition) {
            return Err(Error::domain("partition is crossing"));
        }

        let mut keys: Vec<(usize, usize)> = Vec::new();
        let mut gaps = Vec::with_capacity(q.saturating_sub(1));
        for g in 1..q {
            let innermost = partition
                .iter()
                .enumerate()
                .filter(|(_, b)| covers(b, g))
                .min_by_key(|(_, b)| b.last().unwrap() - b[0]);
            gaps.push(match innermost {
                None => Gap::Scar,
                Some((id, b)) => {
                    let region = b.iter().filter(|&&e| e <= g).count();
                    let key = (id, region);
                    let label = keys.iter().position(|&k| k == key).unwrap_or_else(|| {
                        keys.push(key);
                        keys.len() - 1
                    });
                    Gap::Thermal(label)
                }
            });
        }

        let is_nested = |b: &Vec<usize>| {
            partition
                .iter()
                .any(|o| o != b && o[0] < b[0] && b[0] < *o.last().unwrap())
        };
        let mut segments = Vec::new();
        for outer in partition.iter().filter(|b| !is_nested(b)) {
            let (lo, hi) = (outer[0], *outer.last().unwrap());
            let nested = partition
                .iter()
                .filter(|b| *b != outer && b[0] > lo && b[0] < hi)
                .map(|b| b.iter().map(|e| e - 1).collect())
                .collect();
            segments.push(Segment {
                ops: lo - 1..hi,
                outer: outer.iter().map(|e| e - 1).collect(),
                nested,
            });
        }
        segments.sort_by_key(|s| s.ops.start);
        Ok(Self {
            q,
            partition,
            gaps,
            segments,
        })
    }

    pub fn scar_insertions(&self) -> usize {
        self.gaps.iter().filter(|g| **g == Gap::Scar).count()
    }

    /// Compact identifier such as `nc_13_2`.
    pub fn label(&self) -> String {
        let mut s = String::from("nc");
        for b in &self.partition {
            s.push('_');
            for e in b {
                s.push_str(&e.to_string());
            }
        }
        s
    }

    /// Term names used for the three-point decomposition.
    pub fn conventional_label(&self) -> String {
        let blocks: Vec<Vec<usize>> = self.partition.clone();
        let named = match blocks.as_slice() {
            [b] if b == &[1, 2, 3] => Some("k_sc_3"),
            [x, y] if x == &[1, 3] && y == &[2] => Some("term_a4"),
            [x, y] if x == &[1] && y == &[2, 3] => Some("term_3c"),
            [x, y] if x == &[1, 2] && y == &[3] => Some("term_3pc"),
            [x, y, z] if x == &[1] && y == &[2] && z == &[3] => Some("term_4cd"),
            _ => None,
        };
        named.map_or_else(|| self.label(), str::to_string)
    }
}

/// Diagrams for every non-crossing partition of `q` operators.
pub fn diagrams(q: usize) -> Result<Vec<Diagram>> {
    noncrossing_partitions(q)?
        .into_iter()
        .map(Diagram::new)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalan(n: usize) -> usize {
        let mut c = 1usize;
        for k in 0..n {
            c = c * 2 * (2 * k + 1) / (k + 2);
        }
        c
    }

    fn bell(n: usize) -> usize {
        // Bell triangle
        let mut row = vec![1usize];
        for _ in 0..n {
            let mut next = vec![*row.last().unwrap()];
            for &x in &row {
                let v = next.last().unwrap() + x;
                next.push(v);
            }
            row = next;
        }
        row[0]
    }

    #[test]
    fn counts() {
        for n in 0..=8 {
            assert_eq!(set_partitions(n).len(), bell(n), "n={n}");
        }
        for q in 1..=8 {
            assert_eq!(noncrossing_partitions(q).unwrap().len(), catalan(q), "q={q}");
        }
        assert_eq!(noncrossing_partitions(3).unwrap().len(), 5);
        assert!(noncrossing_partitions(0).is_err());
        assert!(noncrossing_partitions(9).is_err());
    }

    #[test]
    fn canonical_crossing_is_absent() {
        let nc = noncrossing_partitions(4).unwrap();
        assert_eq!(nc.len(), 14);
        assert!(!nc.contains(&vec![vec![1, 3], vec![2, 4]]));
        assert!(!is_noncrossing(&vec![vec![1, 3], vec![2, 4]]));
        assert!(is_noncrossing(&vec![vec![1, 4], vec![2, 3]]));
    }

    #[test]
    fn mobius_values() {
        assert_eq!(mobius_coefficient(&[1, 1, 1]), 1);
        assert_eq!(mobius_coefficient(&[2]), -1);
        assert_eq!(mobius_coefficient(&[3]), 2);
        assert_eq!(mobius_coefficient(&[2, 2]), 1);
        assert_eq!(mobius_coefficient(&[4]), -6);
    }

    #[test]
    fn gap_labels_for_three_points() {
        let d = Diagram::new(vec![vec![1, 3], vec![2]]).unwrap();
        assert_eq!(d.gaps, vec![Gap::Thermal(0), Gap::Thermal(0)]);
        assert_eq!(d.conventional_label(), "term_a4");
        let d = Diagram::new(vec![vec![1], vec![2, 3]]).unwrap();
        assert_eq!(d.gaps, vec![Gap::Scar, Gap::Thermal(0)]);
        let d = Diagram::new(vec![vec![1, 4], vec![2, 3]]).unwrap();
        assert_eq!(
            d.gaps,
            vec![Gap::Thermal(0), Gap::Thermal(1), Gap::Thermal(0)]
        );
        assert_eq!(d.segments.len(), 1);
        assert_eq!(d.segments[0].nested, vec![vec![1, 2]]);
        assert!(Diagram::new(vec![vec![1, 3], vec![2, 4]]).is_err());
    }

    /// Every equality pattern of the inserted states comes from exactly one
    /// non-crossing partition when there are at most three gaps. Thermal
    /// indices on opposite sides of a scar are summed independently.
    #[test]
    fn gap_patterns_are_exhaustive_up_to_four_points() {
        for q in 1..=4 {
            let mut seen: Vec<Vec<Gap>> = diagrams(q).unwrap().into_iter().map(|d| d.gaps).collect();
            let n = seen.len();
            seen.sort_by_key(|g| format!("{g:?}"));
            seen.dedup();
            assert_eq!(seen.len(), n, "duplicate pattern at q={q}");

            // count all patterns: choose scar gaps, then partition each run
            // of thermal gaps between scars (runs are summed independently)
            let gaps = q - 1;
            let total: usize = (0..1usize << gaps)
                .map(|mask| {
                    let mut product = 1;
                    let mut run = 0;
                    for g in 0..=gaps {
                        if g < gaps && mask & (1 << g) == 0 {
                            run += 1;
                        } else {
                            product *= set_partitions(run).len();
                            run = 0;
                        }
                    }
                    product
                })
                .sum();
            assert_eq!(n, total, "q={q}");
        }
    }

    /// Factor structure of the four-point diagrams: cumulant orders along
    /// the scar chain, then thermal loop orders, grouped by scar insertions.
    #[test]
    fn four_point_catalog() {
        let mut got: Vec<(usize, Vec<usize>, Vec<usize>)> = diagrams(4)
            .unwrap()
            .iter()
            .map(|d| {
                let chain = d.segments.iter().map(|s| s.outer.len()).collect();
                let mut loops: Vec<usize> = d
                    .segments
                    .iter()
                    .flat_map(|s| s.nested.iter().map(Vec::len))
                    .collect();
                loops.sort_unstable();
                (d.scar_insertions(), chain, loops)
            })
            .collect();
        got.sort();

        let mut expected = vec![
            (3, vec![1, 1, 1, 1], vec![]),
            (2, vec![1, 1, 2], vec![]),
            (2, vec![1, 2, 1], vec![]),
            (2, vec![2, 1, 1], vec![]),
            (1, vec![1, 3], vec![]),
            (1, vec![1, 2], vec![1]),
            (1, vec![2, 2], vec![]),
            (1, vec![3, 1], vec![]),
            (1, vec![2, 1], vec![1]),
            (0, vec![4], vec![]),
            (0, vec![2], vec![2]),
            (0, vec![2], vec![1, 1]),
            (0, vec![3], vec![1]),
            (0, vec![3], vec![1]),
        ];
        expected.sort();
        assert_eq!(got, expected);
    }
}
