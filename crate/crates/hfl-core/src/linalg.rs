//! Dense complex linear algebra: matrices, Hermitian eigendecomposition,
//! rank-revealing column-space bases.
//!
//! Rank decisions use a relative threshold plus a mandatory spectral-gap
//! check; an ambiguous gap is a hard error, never a silent guess.

use num_complex::Complex64;

use crate::error::ModuleError;

/// Relative singular-value threshold for rank decisions.
pub const RANK_REL_TOL: f64 = 1e-9;
/// Required ratio between the smallest kept and largest dropped singular value.
pub const RANK_GAP: f64 = 1e2;

pub type C64 = Complex64;

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl std::fmt::Debug for CMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CMat {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            for j in 0..self.cols.min(8) {
                let z = self.get(i, j);
                write!(f, "{:6.2}{:+6.2}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_assign_at(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn scale(&self, c: C64) -> CMat {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= c;
        }
        out
    }

    pub fn add(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
        out
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a -= *b;
        }
        out
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let row_out = i * out.cols;
                let row_b = k * other.cols;
                for j in 0..other.cols {
                    out.data[row_out + j] += a * other.data[row_b + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_identity_within(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        self.sub(&CMat::identity(self.rows)).max_abs() <= tol
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn from_columns(rows: usize, cols: &[Vec<C64>]) -> CMat {
        let mut m = CMat::zeros(rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for i in 0..rows {
                m.set(i, j, col[i]);
            }
        }
        m
    }

    /// Kronecker product (self ⊗ other).
    pub fn kron(&self, other: &CMat) -> CMat {
        let mut out = CMat::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order together with the matching
/// orthonormal eigenvectors (columns of the returned matrix). Determinism:
/// sweeps are in fixed (p,q) order and ties in the final sort are broken by
/// the original column index.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    // Symmetrize defensively against accumulated round-off.
    for i in 0..n {
        for j in 0..n {
            let v = (m.get(i, j) + m.get(j, i).conj()) * 0.5;
            m.set(i, j, v);
        }
    }
    let mut q = CMat::identity(n);
    let scale = m.frobenius_norm().max(1.0);
    let tol = 1e-14 * scale;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for r in (p + 1)..n {
                off += m.get(p, r).norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apq = m.get(p, r);
                if apq.norm() <= 1e-300 {
                    continue;
                }
                let app = m.get(p, p).re;
                let aqq = m.get(r, r).re;
                // Unitary 2x2 diagonalization of [[app, apq], [conj(apq), aqq]].
                let phase = apq / apq.norm();
                let b = apq.norm();
                let theta = 0.5 * (2.0 * b).atan2(app - aqq);
                let (c, s) = (theta.cos(), theta.sin());
                // Columns p,r of m (acting on the right by the rotation)
                for i in 0..n {
                    let vip = m.get(i, p);
                    let vir = m.get(i, r);
                    m.set(i, p, vip * c + vir * (phase.conj() * s));
                    m.set(i, r, vip * (-phase * s) + vir * c);
                }
                // Rows p,r (acting on the left by the adjoint rotation)
                for j in 0..n {
                    let vpj = m.get(p, j);
                    let vrj = m.get(r, j);
                    m.set(p, j, vpj * c + vrj * (phase * s));
                    m.set(r, j, vpj * (-phase.conj() * s) + vrj * c);
                }
                for i in 0..n {
                    let vip = q.get(i, p);
                    let vir = q.get(i, r);
                    q.set(i, p, vip * c + vir * (phase.conj() * s));
                    q.set(i, r, vip * (-phase * s) + vir * c);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let eigs: Vec<f64> = (0..n).map(|i| m.get(i, i).re).collect();
    order.sort_by(|&i, &j| {
        eigs[j]
            .partial_cmp(&eigs[i])
            .unwrap()
            .then(i.cmp(&j))
    });
    let vals: Vec<f64> = order.iter().map(|&i| eigs[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vecs.set(i, new_j, q.get(i, old_j));
        }
    }
    (vals, vecs)
}

/// Singular values and an orthonormal basis of the column space of `a`,
/// computed by one-sided Jacobi (pairwise column orthogonalization).
///
/// One-sided Jacobi keeps full relative accuracy on small singular values,
/// which the Gram-matrix route cannot (squaring floors null singular values
/// at ~1e-8 of the largest in f64). That accuracy is what makes the 1e-9
/// relative rank threshold meaningful.
///
/// Returns (singular values descending, column-space basis Q with
/// rank-many orthonormal columns). Rank is decided by `RANK_REL_TOL`
/// relative to the largest singular value, and the decision must be
/// separated by a factor of `RANK_GAP`.
pub fn column_space_basis(a: &CMat) -> Result<(Vec<f64>, CMat), ModuleError> {
    let rows = a.rows;
    let ncols = a.cols;
    let mut cols: Vec<Vec<C64>> = (0..ncols).map(|j| a.column(j)).collect();
    let tol = 1e-15;
    for _sweep in 0..60 {
        let mut converged = true;
        for i in 0..ncols {
            for j in (i + 1)..ncols {
                let aa: f64 = cols[i].iter().map(|z| z.norm_sqr()).sum();
                let bb: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum();
                if aa == 0.0 || bb == 0.0 {
                    continue;
                }
                let c: C64 = cols[i]
                    .iter()
                    .zip(cols[j].iter())
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                if c.norm() <= tol * (aa * bb).sqrt() {
                    continue;
                }
                converged = false;
                // Unitary rotation diagonalizing the 2x2 Gram [[aa, c], [c*, bb]].
                let phase = c / c.norm();
                let theta = 0.5 * (2.0 * c.norm()).atan2(aa - bb);
                let (co, si) = (theta.cos(), theta.sin());
                for r in 0..rows {
                    let vi = cols[i][r];
                    let vj = cols[j][r];
                    cols[i][r] = vi * co + vj * (phase.conj() * si);
                    cols[j][r] = vi * (-phase * si) + vj * co;
                }
            }
        }
        if converged {
            break;
        }
    }
    let mut norms: Vec<(usize, f64)> = cols
        .iter()
        .enumerate()
        .map(|(idx, c)| (idx, c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()))
        .collect();
    norms.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let svals: Vec<f64> = norms.iter().map(|&(_, n)| n).collect();
    let rank = decide_rank(&svals)?;
    let basis: Vec<Vec<C64>> = norms[..rank]
        .iter()
        .map(|&(idx, n)| cols[idx].iter().map(|&z| z / n).collect())
        .collect();
    // The rotated columns are orthogonal to sweep tolerance; one
    // re-orthonormalization pass cleans up the residual.
    let q = gram_schmidt(rows, &basis);
    debug_assert_eq!(q.cols, rank);
    Ok((svals, q))
}

/// Rank decision with gap check. Singular values must arrive sorted
/// descending.
pub fn decide_rank(svals: &[f64]) -> Result<usize, ModuleError> {
    let smax = svals.first().copied().unwrap_or(0.0);
    if smax <= 1e-12 {
        return Ok(0);
    }
    let thresh = smax * RANK_REL_TOL;
    let rank = svals.iter().take_while(|&&s| s > thresh).count();
    if rank < svals.len() && rank > 0 {
        let kept = svals[rank - 1];
        let dropped = svals[rank];
        if dropped > 0.0 && kept / dropped < RANK_GAP {
            return Err(ModuleError::RankAmbiguous {
                gap: kept / dropped,
                required: RANK_GAP,
            });
        }
    }
    Ok(rank)
}

fn gram_schmidt(rows: usize, cols: &[Vec<C64>]) -> CMat {
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(cols.len());
    for col in cols {
        let mut v = col.clone();
        for _ in 0..2 {
            for b in &basis {
                let proj: C64 = b.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
                for (vi, bi) in v.iter_mut().zip(b.iter()) {
                    *vi -= proj * bi;
                }
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            basis.push(v);
        }
    }
    CMat::from_columns(rows, &basis)
}

/// Orthonormal basis of the span of the given columns (used when the caller
/// already knows the columns are well-conditioned generators of the space).
pub fn orthonormalize_columns(rows: usize, cols: &[Vec<C64>]) -> CMat {
    gram_schmidt(rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn eigen_diagonal() {
        let mut m = CMat::zeros(3, 3);
        m.set(0, 0, C64::new(1.0, 0.0));
        m.set(1, 1, C64::new(3.0, 0.0));
        m.set(2, 2, C64::new(2.0, 0.0));
        let (vals, vecs) = hermitian_eigen(&m);
        assert!(approx(vals[0], 3.0, 1e-12));
        assert!(approx(vals[1], 2.0, 1e-12));
        assert!(approx(vals[2], 1.0, 1e-12));
        assert!(vecs.adjoint().matmul(&vecs).is_identity_within(1e-10));
    }

    #[test]
    fn eigen_hermitian_complex() {
        // [[2, i],[-i, 2]] has eigenvalues 3 and 1.
        let mut m = CMat::zeros(2, 2);
        m.set(0, 0, C64::new(2.0, 0.0));
        m.set(0, 1, C64::new(0.0, 1.0));
        m.set(1, 0, C64::new(0.0, -1.0));
        m.set(1, 1, C64::new(2.0, 0.0));
        let (vals, vecs) = hermitian_eigen(&m);
        assert!(approx(vals[0], 3.0, 1e-12));
        assert!(approx(vals[1], 1.0, 1e-12));
        // Check A v = lambda v for the top eigenvector.
        let v0 = vecs.column(0);
        for i in 0..2 {
            let mut av = C64::new(0.0, 0.0);
            for k in 0..2 {
                av += m.get(i, k) * v0[k];
            }
            assert!((av - v0[i] * vals[0]).norm() < 1e-10);
        }
    }

    #[test]
    fn rank_of_projection() {
        // Rank-1 projector onto span{(1,1)/sqrt2}.
        let mut p = CMat::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                p.set(i, j, C64::new(0.5, 0.0));
            }
        }
        let (svals, q) = column_space_basis(&p).unwrap();
        assert!(approx(svals[0], 1.0, 1e-12));
        assert_eq!(q.cols, 1);
        assert!(q.adjoint().matmul(&q).is_identity_within(1e-12));
    }

    #[test]
    fn ambiguous_rank_rejected() {
        // Singular values 1, 2e-9, 5e-10: the threshold keeps the first two
        // and drops the third, but the kept/dropped ratio 4 is far below the
        // required gap, so the decision must be refused.
        let mut m = CMat::zeros(3, 3);
        m.set(0, 0, C64::new(1.0, 0.0));
        m.set(1, 1, C64::new(2e-9, 0.0));
        m.set(2, 2, C64::new(5e-10, 0.0));
        let res = column_space_basis(&m);
        assert!(matches!(res, Err(ModuleError::RankAmbiguous { .. })));
    }

    #[test]
    fn tiny_singular_values_resolved() {
        // A numerically rank-1 matrix built from an exact outer product must
        // report rank 1: one-sided Jacobi keeps the null singular value at
        // round-off level, orders of magnitude below the threshold.
        let u = [C64::new(1.0, 0.5), C64::new(-0.3, 2.0), C64::new(0.7, 0.0)];
        let v = [C64::new(0.2, -1.0), C64::new(1.5, 0.4), C64::new(-0.6, 0.9)];
        let mut m = CMat::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, u[i] * v[j]);
            }
        }
        let (svals, q) = column_space_basis(&m).unwrap();
        assert_eq!(q.cols, 1);
        assert!(svals[1] < 1e-13 * svals[0]);
    }
}
