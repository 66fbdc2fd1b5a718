//! Sparse linear solves with a residual contract: direct LU up to a size limit, restarted
//! GMRES with ILU(0) above it.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Side};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

/// Systems with more unknowns than this use the iterative backend.
pub const DIRECT_LIMIT: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryHint {
    Symmetric,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub direct_limit: usize,
    pub gmres_restart: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            direct_limit: DIRECT_LIMIT,
            gmres_restart: 80,
            max_iterations: 4000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub wall_time: f64,
}

/// Sparse LU factorization of a square CSR matrix.
pub struct LuFactor {
    n: usize,
    symbolic: SymbolicLu<usize>,
    lu: Lu<usize, f64>,
}

impl LuFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Self::with_symbolic(a, None)
    }

    /// Factorizes `a`, reusing a symbolic analysis computed for the same sparsity pattern.
    pub fn with_symbolic(a: &CsrMatrix, symbolic: Option<&SymbolicLu<usize>>) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Solver(format!(
                "matrix is not square: {}x{}",
                a.nrows, a.ncols
            )));
        }
        // The CSR arrays of A are the CSC arrays of Aᵀ; factor Aᵀ and use transposed solves.
        let sym = SymbolicSparseColMatRef::new_checked(a.ncols, a.nrows, &a.row_ptr, None, &a.col_idx);
        let mat = SparseColMatRef::new(sym, &a.values);
        let symbolic = match symbolic {
            Some(s) => s.clone(),
            None => symbolic_lu(a)?,
        };
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), mat)
            .map_err(|e| Error::Solver(format!("numeric LU failed: {e:?}")))?;
        Ok(Self {
            n: a.nrows,
            symbolic,
            lu,
        })
    }

    pub fn symbolic(&self) -> &SymbolicLu<usize> {
        &self.symbolic
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let mut m = MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.lu.solve_transpose_in_place(m.as_mut());
    }
}

/// Symbolic LU analysis of the pattern of `a`.
pub fn symbolic_lu(a: &CsrMatrix) -> Result<SymbolicLu<usize>> {
    let sym = SymbolicSparseColMatRef::new_checked(a.ncols, a.nrows, &a.row_ptr, None, &a.col_idx);
    SymbolicLu::try_new(sym).map_err(|e| Error::Solver(format!("symbolic LU failed: {e:?}")))
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64], r: &mut [f64]) -> f64 {
    a.matvec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm2(r)
}

fn check_dims(a: &CsrMatrix, b: &[f64]) -> Result<()> {
    if a.nrows != a.ncols || a.nrows != b.len() {
        return Err(Error::Solver(format!(
            "dimension mismatch: matrix {}x{}, rhs {}",
            a.nrows,
            a.ncols,
            b.len()
        )));
    }
    Ok(())
}

/// Solves `A x = b`. The symmetry hint is accepted for interface stability; both backends
/// treat the matrix as general. Non-convergence is reported through `converged = false`; factorization
/// breakdown is an error.
pub fn solve(
    a: &CsrMatrix,
    b: &[f64],
    opts: &SolverOptions,
    _hint: SymmetryHint,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, b)?;
    if a.nrows <= opts.direct_limit {
        solve_direct(a, b, opts)
    } else {
        solve_gmres(a, b, opts)
    }
}

/// Direct LU solve followed by a few steps of iterative refinement.
pub fn solve_direct(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, b)?;
    if b.is_empty() {
        return Ok((Vec::new(), SolveReport { converged: true, ..Default::default() }));
    }
    let start = Instant::now();
    let lu = LuFactor::new(a)?;
    let (x, mut report) = solve_with_factor(a, b, &lu, opts);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// Solves with an existing factorization of `a` (or of a nearby matrix), refining against `a`.
pub fn solve_with_factor(a: &CsrMatrix, b: &[f64], lu: &LuFactor, opts: &SolverOptions) -> (Vec<f64>, SolveReport) {
    let start = Instant::now();
    let target = opts.rtol * norm2(b) + opts.atol;
    let mut x = b.to_vec();
    let mut r = vec![0.0; b.len()];
    lu.solve_in_place(&mut x);
    let mut res = residual(a, &x, b, &mut r);
    let mut iterations = 0;
    while res > target && iterations < 5 && res.is_finite() {
        lu.solve_in_place(&mut r);
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += di;
        }
        iterations += 1;
        res = residual(a, &x, b, &mut r);
    }
    let report = SolveReport {
        iterations,
        final_residual: res,
        converged: res <= target,
        wall_time: start.elapsed().as_secs_f64(),
    };
    (x, report)
}

/// Incomplete LU factorization with the sparsity pattern of `A`.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.nrows;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.col_idx[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::Solver(format!("ILU(0): missing diagonal in row {i}")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in s..e {
                pos[lu.col_idx[k]] = k;
            }
            for k in s..e {
                let j = lu.col_idx[k];
                if j >= i {
                    break;
                }
                let piv = lu.values[diag[j]];
                if piv == 0.0 {
                    return Err(Error::Solver(format!("ILU(0): zero pivot in row {j}")));
                }
                let f = lu.values[k] / piv;
                lu.values[k] = f;
                for kk in diag[j] + 1..lu.row_ptr[j + 1] {
                    let p = pos[lu.col_idx[kk]];
                    if p != usize::MAX {
                        lu.values[p] -= f * lu.values[kk];
                    }
                }
            }
            for k in s..e {
                pos[lu.col_idx[k]] = usize::MAX;
            }
            if lu.values[diag[i]] == 0.0 {
                return Err(Error::Solver(format!("ILU(0): zero pivot in row {i}")));
            }
        }
        Ok(Self { lu, diag })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        let lu = &self.lu;
        for i in 0..n {
            let mut s = r[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.values[k] * z[lu.col_idx[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.values[k] * z[lu.col_idx[k]];
            }
            z[i] = s / lu.values[self.diag[i]];
        }
    }
}

/// Right preconditioner `z ≈ A⁻¹ r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        Ilu0::apply(self, r, z)
    }
}

impl Preconditioner for LuFactor {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.solve_in_place(z);
    }
}

/// Right-preconditioned restarted GMRES with ILU(0).
pub fn solve_gmres(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, b)?;
    let ilu = Ilu0::new(a)?;
    Ok(gmres(a, b, None, &ilu, opts))
}

/// Right-preconditioned restarted GMRES (modified Gram-Schmidt, Givens rotations).
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    precond: &dyn Preconditioner,
    opts: &SolverOptions,
) -> (Vec<f64>, SolveReport) {
    let start = Instant::now();
    let n = b.len();
    let target = opts.rtol * norm2(b) + opts.atol;
    let m = opts.gmres_restart.max(1);
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    let mut res = residual(a, &x, b, &mut r);
    let mut iterations = 0;
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    while res > target && iterations < opts.max_iterations && res.is_finite() {
        v.clear();
        v.push(r.iter().map(|ri| ri / res).collect());
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = res;
        let mut k = 0;
        while k < m && iterations < opts.max_iterations {
            precond.apply(&v[k], &mut z);
            a.matvec_into(&z, &mut w);
            for (j, vj) in v.iter().enumerate() {
                let hjk = dot(&w, vj);
                hess[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= hjk * vi;
                }
            }
            let hn = norm2(&w);
            hess[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let d = hess[k][k].hypot(hess[k + 1][k]);
            if d == 0.0 {
                break;
            }
            cs[k] = hess[k][k] / d;
            sn[k] = hess[k + 1][k] / d;
            hess[k][k] = d;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            // Stop slightly below the target so the recomputed true residual passes.
            if g[k].abs() <= 0.5 * target || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        let mut dx = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            for (d, vv) in dx.iter_mut().zip(vi) {
                *d += yi * vv;
            }
        }
        precond.apply(&dx, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        res = residual(a, &x, b, &mut r);
        if k == 0 {
            break;
        }
    }
    let report = SolveReport {
        iterations,
        final_residual: res,
        converged: res <= target,
        wall_time: start.elapsed().as_secs_f64(),
    };
    (x, report)
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix (lower triangle
/// accessed).
pub struct CholeskyFactor {
    n: usize,
    symbolic: SymbolicLlt<usize>,
    llt: Llt<usize, f64>,
}

impl CholeskyFactor {
    pub fn new(a: &CsrMatrix, symbolic: Option<&SymbolicLlt<usize>>) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Solver("Cholesky of a non-square matrix".into()));
        }
        // For a symmetric matrix the CSR arrays are also valid CSC arrays.
        let sym = SymbolicSparseColMatRef::new_checked(a.nrows, a.ncols, &a.row_ptr, None, &a.col_idx);
        let mat = SparseColMatRef::new(sym, &a.values);
        let symbolic = match symbolic {
            Some(s) => s.clone(),
            None => SymbolicLlt::try_new(sym, Side::Lower)
                .map_err(|e| Error::Solver(format!("symbolic Cholesky failed: {e:?}")))?,
        };
        let llt = Llt::try_new_with_symbolic(symbolic.clone(), mat, Side::Lower)
            .map_err(|e| Error::Solver(format!("Cholesky failed: {e:?}")))?;
        Ok(Self {
            n: a.nrows,
            symbolic,
            llt,
        })
    }

    pub fn symbolic(&self) -> &SymbolicLlt<usize> {
        &self.symbolic
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let mut m = MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.llt.solve_in_place(m.as_mut());
    }
}

impl Preconditioner for CholeskyFactor {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.solve_in_place(z);
    }
}

/// Block upper-triangular preconditioner for `[A Bᵀ; B -S]`:
/// `z_p = -Ŝ⁻¹ r_p`, `z_u = Â⁻¹(r_u - Bᵀ z_p)`, with
/// `Ŝ⁻¹ = Mw⁻¹ + Lw⁻¹` (viscous and inertial Schur approximations, scaling folded into the
/// weighted matrices).
pub struct SaddlePreconditioner<'a> {
    pub a_hat: &'a CholeskyFactor,
    pub bt: &'a CsrMatrix,
    pub schur_mass: &'a CholeskyFactor,
    pub schur_lap: Option<&'a CholeskyFactor>,
    pub nu: usize,
}

impl Preconditioner for SaddlePreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (ru, rp) = r.split_at(self.nu);
        let (zu, zp) = z.split_at_mut(self.nu);
        let mut t = rp.to_vec();
        self.schur_mass.solve_in_place(&mut t);
        if let Some(l) = self.schur_lap {
            let mut q = rp.to_vec();
            l.solve_in_place(&mut q);
            for (ti, qi) in t.iter_mut().zip(&q) {
                *ti += qi;
            }
        }
        for (zi, ti) in zp.iter_mut().zip(&t) {
            *zi = -ti;
        }
        let btz = self.bt.matvec(zp);
        for ((zi, ri), bi) in zu.iter_mut().zip(ru).zip(&btz) {
            *zi = ri - bi;
        }
        self.a_hat.solve_in_place(zu);
    }
}

/// Removes the discrete mean: `p - (∫ p)/|Γ_h|` with `mean_weights[j] = ∫ ψ_j`.
pub fn fix_pressure_mean(p: &[f64], mean_weights: &[f64], area: f64) -> Vec<f64> {
    let mean = dot(p, mean_weights) / area;
    p.iter().map(|v| v - mean).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        let (x, rep) = solve(&a, &b, &SolverOptions::default(), SymmetryHint::Symmetric).unwrap();
        assert_eq!(x, b);
        assert!(rep.converged);
        assert!(rep.iterations <= 1);
    }

    #[test]
    fn diagonal_spd() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 3.0)]);
        let (x, _) = solve(&a, &[2.0, 3.0], &SolverOptions::default(), SymmetryHint::Symmetric).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    fn convection_diffusion(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.5));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.5));
            }
            if i + 7 < n {
                t.push((i, i + 7, -1.0));
                t.push((i + 7, i, -0.8));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn gmres_matches_direct() {
        let a = convection_diffusion(300);
        let b: Vec<f64> = (0..300).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let opts = SolverOptions::default();
        let (xd, rd) = solve_direct(&a, &b, &opts).unwrap();
        let (xg, rg) = solve_gmres(&a, &b, &opts).unwrap();
        assert!(rd.converged && rg.converged);
        for (p, q) in xd.iter().zip(&xg) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn nonsymmetric_direct_uses_correct_orientation() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0)]);
        let (x, _) = solve_direct(&a, &[5.0, 2.0], &SolverOptions::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pressure_mean() {
        let w = vec![0.5, 1.0, 0.5];
        let p = fix_pressure_mean(&[5.0, 5.0, 5.0], &w, 2.0);
        assert!(p.iter().all(|v| v.abs() < 1e-15));
        let q = vec![1.0, 0.0, -1.0];
        assert_eq!(fix_pressure_mean(&q, &w, 2.0), q);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let a = CsrMatrix::identity(3);
        assert!(solve(&a, &[1.0], &SolverOptions::default(), SymmetryHint::General).is_err());
    }
}
