//! Sparse symmetric matrices for program data.
//!
//! Constraint and objective matrices are sparse and symmetric. They are
//! stored as upper-triangle coordinate lists plus an expanded list with
//! both mirrors, which the inner products and the Schur-complement assembly
//! iterate over directly.

use faer::Mat;

/// A sparse symmetric matrix given by its upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    dim: usize,
    /// `(i, j, v)` with `i <= j`, sorted row-major, at most one per position.
    upper: Vec<(u32, u32, f64)>,
    /// Both mirrors of every off-diagonal entry, sorted row-major.
    expanded: Vec<(u32, u32, f64)>,
}

impl SparseSym {
    /// Builds from upper-triangle entries. Entries must satisfy `i <= j`;
    /// duplicates are summed.
    pub fn from_upper(dim: usize, mut entries: Vec<(u32, u32, f64)>) -> SparseSym {
        for &(i, j, _) in &entries {
            assert!(i <= j && (j as usize) < dim, "upper-triangle entry out of range");
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut upper: Vec<(u32, u32, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match upper.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => upper.push((i, j, v)),
            }
        }
        upper.retain(|&(_, _, v)| v != 0.0);
        let mut expanded = Vec::with_capacity(2 * upper.len());
        for &(i, j, v) in &upper {
            expanded.push((i, j, v));
            if i != j {
                expanded.push((j, i, v));
            }
        }
        expanded.sort_by_key(|&(i, j, _)| (i, j));
        SparseSym {
            dim,
            upper,
            expanded,
        }
    }

    pub fn identity(dim: usize) -> SparseSym {
        SparseSym::from_upper(dim, (0..dim as u32).map(|i| (i, i, 1.0)).collect())
    }

    pub fn zero(dim: usize) -> SparseSym {
        SparseSym::from_upper(dim, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn upper(&self) -> &[(u32, u32, f64)] {
        &self.upper
    }

    /// All entries, both mirrors of off-diagonal ones included.
    pub fn expanded(&self) -> &[(u32, u32, f64)] {
        &self.expanded
    }

    pub fn nnz_expanded(&self) -> usize {
        self.expanded.len()
    }

    pub fn is_zero(&self) -> bool {
        self.upper.is_empty()
    }

    /// `tr(S M)` for an arbitrary dense `M` (not necessarily symmetric):
    /// sums `v * M[j, i]` over expanded entries.
    pub fn inner(&self, m: &Mat<f64>) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.expanded {
            acc += v * m[(j as usize, i as usize)];
        }
        acc
    }

    /// `m += s * S`.
    pub fn add_scaled_to(&self, m: &mut Mat<f64>, s: f64) {
        for &(i, j, v) in &self.expanded {
            m[(i as usize, j as usize)] += s * v;
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.dim, self.dim);
        self.add_scaled_to(&mut m, 1.0);
        m
    }

    pub fn frob_norm(&self) -> f64 {
        self.expanded.iter().map(|&(_, _, v)| v * v).sum::<f64>().sqrt()
    }
}

/// Program data matrix over the two-block variable: a dense-side symmetric
/// block and a diagonal block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    pub sdp: SparseSym,
    /// Sparse entries of the diagonal block, `(index, value)`, sorted,
    /// at most one per index.
    pub lp: Vec<(u32, f64)>,
}

impl BlockMatrix {
    pub fn new(sdp: SparseSym, mut lp: Vec<(u32, f64)>) -> BlockMatrix {
        lp.sort_by_key(|&(k, _)| k);
        lp.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
        lp.retain(|&(_, v)| v != 0.0);
        BlockMatrix { sdp, lp }
    }

    pub fn sdp_only(sdp: SparseSym) -> BlockMatrix {
        BlockMatrix { sdp, lp: Vec::new() }
    }

    /// `tr(S M) + sum_k lp_k d_k` over the block pair.
    pub fn inner(&self, m: &Mat<f64>, d: &[f64]) -> f64 {
        let mut acc = self.sdp.inner(m);
        for &(k, v) in &self.lp {
            acc += v * d[k as usize];
        }
        acc
    }

    pub fn add_scaled_to(&self, m: &mut Mat<f64>, d: &mut [f64], s: f64) {
        self.sdp.add_scaled_to(m, s);
        for &(k, v) in &self.lp {
            d[k as usize] += s * v;
        }
    }

    pub fn frob_norm(&self) -> f64 {
        let lp: f64 = self.lp.iter().map(|&(_, v)| v * v).sum();
        (self.sdp.frob_norm().powi(2) + lp).sqrt()
    }

    pub fn nnz(&self) -> usize {
        self.sdp.nnz_expanded() + self.lp.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_and_mirror() {
        let s = SparseSym::from_upper(3, vec![(0, 1, 2.0), (0, 1, 3.0), (2, 2, 1.0), (0, 2, 0.0)]);
        assert_eq!(s.upper(), &[(0, 1, 5.0), (2, 2, 1.0)]);
        assert_eq!(s.expanded(), &[(0, 1, 5.0), (1, 0, 5.0), (2, 2, 1.0)]);
        assert_eq!(s.nnz_expanded(), 3);
    }

    #[test]
    fn inner_product_counts_mirrors() {
        let s = SparseSym::from_upper(2, vec![(0, 1, 1.0), (1, 1, 2.0)]);
        let m = Mat::from_fn(2, 2, |i, j| (1 + i + 2 * j) as f64);
        // tr(S M) with S = [[0,1],[1,2]]: row sums over products.
        let dense = s.to_dense();
        let mut expected = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                expected += dense[(i, j)] * m[(j, i)];
            }
        }
        assert_eq!(s.inner(&m), expected);
    }

    #[test]
    fn block_inner_and_accumulate() {
        let b = BlockMatrix::new(
            SparseSym::identity(2),
            vec![(1, 2.0), (0, 1.0), (1, 1.0)],
        );
        assert_eq!(b.lp, vec![(0, 1.0), (1, 3.0)]);
        let m = Mat::from_fn(2, 2, |i, j| if i == j { 4.0 } else { 0.0 });
        assert_eq!(b.inner(&m, &[2.0, 1.0]), 8.0 + 2.0 + 3.0);
        let mut acc = Mat::zeros(2, 2);
        let mut d = vec![0.0; 2];
        b.add_scaled_to(&mut acc, &mut d, -1.0);
        assert_eq!(acc[(0, 0)], -1.0);
        assert_eq!(d, vec![-1.0, -3.0]);
    }
}
