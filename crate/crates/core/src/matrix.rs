//! Dense real matrices and the determinant machinery everything else
//! is built on.

use std::ops::Index;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::SubsetMask;

/// Square, row-major, finite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != n * n {
            return Err(Error::ShapeMismatch { expected: n * n, got: data.len() });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::ShapeMismatch { expected: n, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `P A Pᵀ` where row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Result<Matrix> {
        let n = self.n;
        if perm.len() != n {
            return Err(Error::DimensionMismatch(perm.len(), n));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument(format!("not a permutation: {perm:?}")));
            }
        }
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = self[(perm[i], perm[j])];
            }
        }
        Ok(Matrix { n, data })
    }

    /// Rows and columns indexed by `alpha`, ascending.
    pub fn principal_submatrix(&self, alpha: &SubsetMask) -> Result<Matrix> {
        if alpha.n() != self.n {
            return Err(Error::DimensionMismatch(alpha.n(), self.n));
        }
        let idx: Vec<usize> = alpha.indices().collect();
        let k = idx.len();
        let mut data = Vec::with_capacity(k * k);
        for &i in &idx {
            for &j in &idx {
                data.push(self[(i, j)]);
            }
        }
        Ok(Matrix { n: k, data })
    }

    pub fn det(&self) -> f64 {
        let mut work = self.data.clone();
        lu_det_in_place(&mut work, self.n)
    }

    /// Determinant of the principal submatrix indexed by `bits`, using
    /// `scratch` as workspace. `bits` must be a valid nonempty mask.
    pub(crate) fn principal_det_with(&self, bits: u64, scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        let mut rows = bits;
        let mut k = 0;
        while rows != 0 {
            let i = rows.trailing_zeros() as usize;
            rows &= rows - 1;
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let mut cols = bits;
            while cols != 0 {
                let j = cols.trailing_zeros() as usize;
                cols &= cols - 1;
                scratch.push(row[j]);
            }
            k += 1;
        }
        lu_det_in_place(scratch, k)
    }

    pub fn principal_minor(&self, alpha: &SubsetMask) -> Result<f64> {
        if alpha.n() != self.n {
            return Err(Error::DimensionMismatch(alpha.n(), self.n));
        }
        Ok(self.principal_det_with(alpha.bits(), &mut Vec::new()))
    }

    pub fn lu(&self) -> Lu {
        Lu::factor(self.data.clone(), self.n)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.lu().solve(b)
    }

    /// `self + u vᵀ`.
    pub fn add_outer(&self, u: &[f64], v: &[f64]) -> Result<Matrix> {
        let n = self.n;
        if u.len() != n {
            return Err(Error::DimensionMismatch(u.len(), n));
        }
        if v.len() != n {
            return Err(Error::DimensionMismatch(v.len(), n));
        }
        let mut data = self.data.clone();
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] += u[i] * v[j];
            }
        }
        Matrix::new(n, data)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

/// Partial-pivoted LU determinant. Ties in pivot magnitude go to the
/// smallest row index, so the result is bit-stable.
fn lu_det_in_place(a: &mut [f64], n: usize) -> f64 {
    match n {
        1 => return a[0],
        2 => return a[0] * a[3] - a[1] * a[2],
        _ => {}
    }
    let mut det = 1.0;
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].abs();
        for i in k + 1..n {
            let v = a[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if p != k {
            for j in k..n {
                a.swap(k * n + j, p * n + j);
            }
            det = -det;
        }
        let pivot = a[k * n + k];
        det *= pivot;
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            if f != 0.0 {
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
    }
    det
}

/// Packed LU factorization with row permutation.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        Lu { n, lu: a, perm, sign, singular }
    }

    pub fn det(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        (0..self.n).fold(self.sign, |d, k| d * self.lu[k * self.n + k])
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch(b.len(), n));
        }
        if self.singular {
            return Err(Error::Singular);
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        Ok(x)
    }
}

/// Rectangular block, used for the off-diagonal parts of a block matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Block {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch { expected: rows * cols, got: data.len() });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// `det(M_α)·(1 + λ·⟨v_α, M_α⁻¹u_α⟩)`: the determinant of `M_α + λ u_α v_αᵀ`.
///
/// Panics if the two vectors differ in length.
pub fn det_lemma_update(det_ma: f64, minv_u: &[f64], v_alpha: &[f64], lambda: f64) -> f64 {
    assert_eq!(minv_u.len(), v_alpha.len(), "vector lengths differ");
    let s: f64 = v_alpha.iter().zip(minv_u).map(|(a, b)| a * b).sum();
    det_ma * (1.0 + lambda * s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SchurDet {
    /// Determinant of the assembled `[[C, D], [E, F]]`.
    pub det_full: f64,
    pub det_f: f64,
    /// Determinant of `C − D F⁻¹ E`.
    pub det_schur: f64,
}

impl SchurDet {
    pub fn relative_error(&self) -> f64 {
        let diff = (self.det_full - self.det_f * self.det_schur).abs();
        diff / self.det_full.abs().max(f64::MIN_POSITIVE)
    }
}

/// Singularity threshold for the `F` block, relative to `max|F_ij|^m`.
pub const SCHUR_SINGULAR_REL: f64 = 1e-12;

/// Block determinant of `[[C, D], [E, F]]` computed both directly and
/// through the Schur complement of `F`.
pub fn schur_det(c: &Matrix, d: &Block, e: &Block, f: &Matrix) -> Result<SchurDet> {
    let k = c.n();
    let m = f.n();
    if d.rows != k || d.cols != m {
        return Err(Error::DimensionMismatch(d.rows * d.cols, k * m));
    }
    if e.rows != m || e.cols != k {
        return Err(Error::DimensionMismatch(e.rows * e.cols, m * k));
    }

    let f_lu = f.lu();
    let det_f = f_lu.det();
    let threshold = SCHUR_SINGULAR_REL * f.max_abs().powi(m as i32);
    if det_f.abs() <= threshold || f_lu.is_singular() {
        return Err(Error::SingularBlock { det: det_f, threshold });
    }

    // X = F⁻¹ E, one column at a time.
    let mut x = vec![0.0; m * k];
    let mut col = vec![0.0; m];
    for j in 0..k {
        for (i, c) in col.iter_mut().enumerate() {
            *c = e.get(i, j);
        }
        let sol = f_lu.solve(&col)?;
        for i in 0..m {
            x[i * k + j] = sol[i];
        }
    }
    let mut schur = c.as_slice().to_vec();
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for l in 0..m {
                acc += d.get(i, l) * x[l * k + j];
            }
            schur[i * k + j] -= acc;
        }
    }
    let det_schur = Matrix::new(k, schur)?.det();

    let size = k + m;
    let mut full = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            full[i * size + j] = match (i < k, j < k) {
                (true, true) => c[(i, j)],
                (true, false) => d.get(i, j - k),
                (false, true) => e.get(i - k, j),
                (false, false) => f[(i - k, j - k)],
            };
        }
    }
    let det_full = Matrix::new(size, full)?.det();

    Ok(SchurDet { det_full, det_f, det_schur })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix_m() -> Matrix {
        crate::forge::appendix_b_fixture().m().clone()
    }

    #[test]
    fn submatrix_of_fixture() {
        let m = appendix_m();
        let a = SubsetMask::from_one_based(&[1, 5], 6).unwrap();
        let sub = m.principal_submatrix(&a).unwrap();
        assert_eq!(sub.rows(), vec![vec![2.3, 0.0], vec![-2.6, 4.9]]);
        assert!((sub.det() - 11.27).abs() < 1e-12);
    }

    #[test]
    fn full_mask_and_identity() {
        let m = appendix_m();
        let full = SubsetMask::full(6).unwrap();
        assert_eq!(m.principal_submatrix(&full).unwrap(), m);
        let id = Matrix::identity(6);
        let a = SubsetMask::from_one_based(&[2, 4], 6).unwrap();
        assert_eq!(id.principal_submatrix(&a).unwrap(), Matrix::identity(2));
        for n in 1..8 {
            assert_eq!(Matrix::identity(n).det(), 1.0);
        }
    }

    #[test]
    fn submatrix_dimension_mismatch() {
        let a = SubsetMask::from_one_based(&[1], 3).unwrap();
        assert!(Matrix::identity(4).principal_submatrix(&a).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(Matrix::new(1, vec![f64::NAN]), Err(Error::NonFinite(0))));
        assert!(Matrix::new(2, vec![1.0; 3]).is_err());
        assert!(Matrix::new(0, vec![]).is_err());
    }

    #[test]
    fn det_known_values() {
        let a = Matrix::from_rows(&[vec![2.0, 3.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(a.det(), 1.0);
        let singular = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap();
        assert!(singular.det().abs() < 1e-12);
        // Permutation matrix with one transposition.
        let p = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(p.det(), -1.0);
    }

    #[test]
    fn perturbed_fixture_minor() {
        let inst = crate::forge::appendix_b_fixture();
        let a = inst.perturbed();
        let w = SubsetMask::from_one_based(&[1, 5], 6).unwrap();
        let d = a.principal_minor(&w).unwrap();
        assert!((-0.0015..=-0.0005).contains(&d), "{d}");
    }

    #[test]
    fn lemma_edge_cases() {
        assert_eq!(det_lemma_update(3.5, &[1.0, 2.0], &[0.5, -1.0], 0.0), 3.5);
        let t = [1.0, 2.0];
        let v = [0.5, 1.0];
        let s = 2.5;
        assert!(det_lemma_update(3.5, &t, &v, -1.0 / s).abs() < 1e-15);
    }

    #[test]
    fn lemma_matches_fixture_direct_det() {
        // Appendix B vectors restricted to {1,5}.
        let inst = crate::forge::appendix_b_fixture();
        let w = SubsetMask::from_one_based(&[1, 5], 6).unwrap();
        let m_w = inst.m().principal_submatrix(&w).unwrap();
        let u_w = [inst.u()[0], inst.u()[4]];
        let v_w = [inst.v()[0], inst.v()[4]];
        let minv_u = m_w.solve(&u_w).unwrap();
        let via_lemma = det_lemma_update(m_w.det(), &minv_u, &v_w, 1.0);
        let direct = inst.perturbed().principal_minor(&w).unwrap();
        assert!((via_lemma - direct).abs() < 1e-12, "{via_lemma} vs {direct}");
        assert!((via_lemma + 0.001).abs() < 5e-4);
    }

    #[test]
    fn solve_roundtrip() {
        let m = appendix_m();
        let b = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let x = m.solve(&b).unwrap();
        for i in 0..6 {
            let r: f64 = (0..6).map(|j| m[(i, j)] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
        let z = Matrix::new(2, vec![0.0; 4]).unwrap();
        assert!(matches!(z.solve(&[1.0, 1.0]), Err(Error::Singular)));
    }

    #[test]
    fn schur_block_diagonal_and_identity_f() {
        let c = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.5, 3.0]]).unwrap();
        let f = Matrix::from_rows(&[vec![4.0, -1.0], vec![1.0, 1.5]]).unwrap();
        let r = schur_det(&c, &Block::zeros(2, 2), &Block::zeros(2, 2), &f).unwrap();
        assert_eq!(r.det_schur, c.det());
        assert!((r.det_full - c.det() * f.det()).abs() < 1e-12);

        let d = Block::new(2, 2, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        let e = Block::new(2, 2, vec![0.5, 0.0, 1.0, -1.0]).unwrap();
        let r = schur_det(&c, &d, &e, &Matrix::identity(2)).unwrap();
        // C − D E
        let de = [
            1.0 * 0.5 + 2.0 * 1.0,
            1.0 * 0.0 + 2.0 * -1.0,
            0.0 * 0.5 + 1.0 * 1.0,
            0.0 * 0.0 + 1.0 * -1.0,
        ];
        let cde = Matrix::new(2, vec![2.0 - de[0], 1.0 - de[1], 0.5 - de[2], 3.0 - de[3]]).unwrap();
        assert!((r.det_schur - cde.det()).abs() < 1e-12);
        assert_eq!(r.det_f, 1.0);
    }

    #[test]
    fn schur_scalar_case() {
        let (c, d, e, f) = (3.0, 2.0, -1.5, 0.7);
        let r = schur_det(
            &Matrix::new(1, vec![c]).unwrap(),
            &Block::new(1, 1, vec![d]).unwrap(),
            &Block::new(1, 1, vec![e]).unwrap(),
            &Matrix::new(1, vec![f]).unwrap(),
        )
        .unwrap();
        let expected = f * (c - d * e / f);
        assert!((r.det_full - expected).abs() < 1e-12);
        assert!((r.det_schur - (c - d * e / f)).abs() < 1e-12);
    }

    #[test]
    fn schur_singular_f() {
        let c = Matrix::identity(1);
        let f = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let r = schur_det(&c, &Block::zeros(1, 2), &Block::zeros(2, 1), &f);
        assert!(matches!(r, Err(Error::SingularBlock { .. })));
        let tiny = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-14]]).unwrap();
        let r = schur_det(&c, &Block::zeros(1, 2), &Block::zeros(2, 1), &tiny);
        assert!(matches!(r, Err(Error::SingularBlock { .. })));
    }

    #[test]
    fn schur_shape_errors() {
        let c = Matrix::identity(2);
        let f = Matrix::identity(2);
        assert!(schur_det(&c, &Block::zeros(1, 2), &Block::zeros(2, 2), &f).is_err());
        assert!(schur_det(&c, &Block::zeros(2, 2), &Block::zeros(2, 1), &f).is_err());
    }
}
