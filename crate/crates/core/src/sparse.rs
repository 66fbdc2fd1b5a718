//! Compressed sparse row matrices with a fixed pattern for finite element assembly.

use std::collections::BTreeSet;
use std::io::Write;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for (j, v) in r {
                if j == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = j;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Zero matrix whose pattern couples every pair of indices sharing an element.
    pub fn from_elements<'a>(
        nrows: usize,
        ncols: usize,
        elements: impl Iterator<Item = (&'a [usize], &'a [usize])>,
    ) -> Self {
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nrows];
        for (r, c) in elements {
            for &i in r {
                rows[i].extend(c.iter().copied());
            }
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in rows {
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn same_pattern(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    #[inline]
    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].binary_search(&j).ok().map(|p| s + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Adds `v` at `(i, j)`, which must be in the pattern.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        match self.position(i, j) {
            Some(p) => self.values[p] += v,
            None => panic!("entry ({i}, {j}) not in sparsity pattern"),
        }
    }

    /// Scatters a dense local block (row-major, `rows.len() x cols.len()`).
    pub fn add_local(&mut self, rows: &[usize], cols: &[usize], local: &[f64]) {
        let nc = cols.len();
        for (li, &i) in rows.iter().enumerate() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let row_cols = &self.col_idx[s..e];
            for (lj, &j) in cols.iter().enumerate() {
                let v = local[li * nc + lj];
                if v != 0.0 {
                    let p = row_cols
                        .binary_search(&j)
                        .unwrap_or_else(|_| panic!("entry ({i}, {j}) not in sparsity pattern"));
                    self.values[s + p] += v;
                }
            }
        }
    }

    pub fn fill_zero(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for p in s..e {
                acc += self.values[p] * x[self.col_idx[p]];
            }
            *yi = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut count = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            count[j + 1] += 1;
        }
        for j in 0..self.ncols {
            count[j + 1] += count[j];
        }
        let row_ptr = count.clone();
        let mut next = count;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let q = next[j];
                col_idx[q] = i;
                values[q] = self.values[p];
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `self + alpha * other` for matrices of equal shape (patterns may differ).
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        if self.row_ptr == other.row_ptr && self.col_idx == other.col_idx {
            let mut out = self.clone();
            for (v, w) in out.values.iter_mut().zip(&other.values) {
                *v += alpha * w;
            }
            return out;
        }
        let mut triplets = self.triplets();
        triplets.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, alpha * v)));
        Self::from_triplets(self.nrows, self.ncols, &triplets)
    }

    /// In-place `self += alpha * other`; `other`'s pattern must be contained in `self`'s.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        if self.row_ptr == other.row_ptr && self.col_idx == other.col_idx {
            for (v, w) in self.values.iter_mut().zip(&other.values) {
                *v += alpha * w;
            }
            return;
        }
        for i in 0..other.nrows {
            for p in other.row_ptr[i]..other.row_ptr[i + 1] {
                self.add(i, other.col_idx[p], alpha * other.values[p]);
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                t.push((i, self.col_idx[p], self.values[p]));
            }
        }
        t
    }

    pub fn norm_max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|` over all entries.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        self.add_scaled(-1.0, &t).norm_max()
    }

    /// Quadratic form `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }

    /// Assembles a block matrix; `None` blocks are zero. Block sizes come from the row and
    /// column size lists.
    pub fn block(blocks: &[Vec<Option<&CsrMatrix>>], row_sizes: &[usize], col_sizes: &[usize]) -> Self {
        let nrows: usize = row_sizes.iter().sum();
        let ncols: usize = col_sizes.iter().sum();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let col_off: Vec<usize> = col_sizes
            .iter()
            .scan(0, |s, &c| {
                let o = *s;
                *s += c;
                Some(o)
            })
            .collect();
        for (bi, &nr) in row_sizes.iter().enumerate() {
            for i in 0..nr {
                for (bj, blk) in blocks[bi].iter().enumerate() {
                    if let Some(m) = blk {
                        assert_eq!((m.nrows, m.ncols), (nr, col_sizes[bj]));
                        let (cols, vals) = m.row(i);
                        col_idx.extend(cols.iter().map(|c| c + col_off[bj]));
                        values.extend_from_slice(vals);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Writes the matrix in Matrix Market coordinate format.
    pub fn write_matrix_market(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_and_transpose() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 2.0), (0, 2, 3.0)]);
        assert_eq!(a.get(0, 2), 4.0);
        let t = a.transpose();
        assert_eq!(t.get(2, 0), 4.0);
        assert_eq!(t.get(0, 1), 2.0);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![4.0, 2.0]);
    }

    #[test]
    fn block_assembly() {
        let a = CsrMatrix::identity(2);
        let b = CsrMatrix::from_triplets(1, 2, &[(0, 1, 5.0)]);
        let bt = b.transpose();
        let k = CsrMatrix::block(
            &[vec![Some(&a), Some(&bt)], vec![Some(&b), None]],
            &[2, 1],
            &[2, 1],
        );
        assert_eq!(k.get(1, 2), 5.0);
        assert_eq!(k.get(2, 1), 5.0);
        assert_eq!(k.get(2, 2), 0.0);
        assert_eq!(k.asymmetry(), 0.0);
    }

    #[test]
    fn local_scatter() {
        let elems: Vec<[usize; 2]> = vec![[0, 1], [1, 2]];
        let mut m = CsrMatrix::from_elements(3, 3, elems.iter().map(|e| (&e[..], &e[..])));
        for e in &elems {
            m.add_local(e, e, &[1.0, -1.0, -1.0, 1.0]);
        }
        assert_eq!(m.get(1, 1), 2.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![0.0; 3]);
    }
}
