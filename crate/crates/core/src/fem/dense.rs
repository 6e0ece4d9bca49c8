//! Dense symmetric linear algebra: Cholesky, Householder tridiagonalization
//! and implicit-shift QL, combined into a generalized symmetric-definite
//! eigensolver.

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        Self::from_fn(n, |i, j| rows[i][j])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x^T M y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        let my = self.mul_vec(y);
        x.iter().zip(&my).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|M_ij - M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrized(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    pub fn scaled(&self, c: f64) -> DenseMatrix {
        DenseMatrix { n: self.n, data: self.data.iter().map(|v| v * c).collect() }
    }

    /// Lower Cholesky factor `L` with `M = L L^T` (lower triangle of `self` is read).
    pub fn cholesky(&self) -> Result<DenseMatrix> {
        let n = self.n;
        let mut l = DenseMatrix::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(l)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Eigenvalues in ascending order with eigenvectors stored as columns.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SymEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.vectors.dim()).map(|i| self.vectors[(i, k)]).collect()
    }
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// On return `v` holds the accumulated orthogonal transform, `d` the
/// diagonal and `e[1..]` the sub-diagonal.
fn tridiagonalize(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = v.dim();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    if n > 0 {
        v[(n - 1, n - 1)] = 1.0;
    }
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal `(d, e)`, accumulating into `v`,
/// followed by an ascending sort.
fn tridiagonal_ql(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = v.dim();
    if n == 0 {
        return Ok(());
    }
    let max_iter = 50 * n;
    let mut iterations = 0;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        let m = m.min(n - 1);
        if m > l {
            loop {
                iterations += 1;
                if iterations > max_iter {
                    return Err(Error::EigenNoConvergence(iterations));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in i + 1..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for j in 0..n {
                let tmp = v[(j, i)];
                v[(j, i)] = v[(j, k)];
                v[(j, k)] = tmp;
            }
        }
    }
    Ok(())
}

/// Standard symmetric eigenproblem (lower triangle of `a` is read).
pub fn sym_eig(a: &DenseMatrix) -> Result<SymEigen> {
    let n = a.dim();
    let mut v = a.symmetrized();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e)?;
    Ok(SymEigen { values: d, vectors: v })
}

/// Solves `K x = mu B x` for symmetric `K` and SPD `B` by the congruence
/// `L^{-1} K L^{-T}` with `B = L L^T`; eigenvectors are `B`-orthonormal.
pub fn dense_sym_eig(k: &DenseMatrix, b: &DenseMatrix) -> Result<SymEigen> {
    let n = k.dim();
    if b.dim() != n {
        return Err(Error::InvalidInput(format!("dimension mismatch {n} vs {}", b.dim())));
    }
    let l = b.cholesky()?;
    let k = k.symmetrized();

    // W = L^{-1} K, then C = W L^{-T} = L^{-1} (L^{-1} K)^T.
    let lower_solve = |m: &DenseMatrix| {
        let mut out = DenseMatrix::zeros(n);
        for col in 0..n {
            for i in 0..n {
                let mut s = m[(i, col)];
                for j in 0..i {
                    s -= l[(i, j)] * out[(j, col)];
                }
                out[(i, col)] = s / l[(i, i)];
            }
        }
        out
    };
    let w = lower_solve(&k);
    let wt = DenseMatrix::from_fn(n, |i, j| w[(j, i)]);
    let c = lower_solve(&wt).symmetrized();

    let SymEigen { values, vectors: y } = sym_eig(&c)?;

    // x = L^{-T} y
    let mut x = DenseMatrix::zeros(n);
    for col in 0..n {
        for i in (0..n).rev() {
            let mut s = y[(i, col)];
            for j in i + 1..n {
                s -= l[(j, i)] * x[(j, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
    }
    Ok(SymEigen { values, vectors: x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_pair() {
        let k = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
        let eig = dense_sym_eig(&k, &DenseMatrix::identity(2)).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_hand_diagonalization() {
        let k = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let eig = dense_sym_eig(&k, &DenseMatrix::identity(2)).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 3.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = eig.vector(0);
        let v1 = eig.vector(1);
        // up to sign
        assert!((v0[0] * v0[1] + 0.5).abs() < 1e-14 && (v0[0].abs() - s).abs() < 1e-14);
        assert!((v1[0] * v1[1] - 0.5).abs() < 1e-14 && (v1[0].abs() - s).abs() < 1e-14);
    }

    #[test]
    fn cholesky_failure_is_reported() {
        let b = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            dense_sym_eig(&DenseMatrix::identity(2), &b),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DenseMatrix {
        let g = DenseMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        DenseMatrix::from_fn(n, |i, j| {
            let mut s: f64 = (0..n).map(|k| g[(i, k)] * g[(j, k)]).sum();
            if i == j {
                s += shift;
            }
            s
        })
    }

    fn check_pair(k: &DenseMatrix, b: &DenseMatrix) {
        let n = k.dim();
        let eig = dense_sym_eig(k, b).unwrap();
        let knorm = k.max_abs() * n as f64;
        for p in 0..n {
            let x = eig.vector(p);
            let kx = k.mul_vec(&x);
            let bx = b.mul_vec(&x);
            let res = kx.iter().zip(&bx).map(|(a, c)| (a - eig.values[p] * c).powi(2)).sum::<f64>().sqrt();
            assert!(res <= 1e-8 * knorm, "pair {p}: residual {res}");
            for q in 0..n {
                let dotb = b.form(&x, &eig.vector(q));
                let expect = if p == q { 1.0 } else { 0.0 };
                assert!((dotb - expect).abs() < 1e-8);
            }
        }
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn random_fifty_by_fifty_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = random_spd(&mut rng, 50, 1.0);
        let g = DenseMatrix::from_fn(50, |_, _| rng.gen_range(-1.0..1.0));
        let k = g.symmetrized();
        check_pair(&k, &b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn generalized_residuals_are_small(seed in 0u64..10_000, n in 1usize..25) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = random_spd(&mut rng, n, 0.5);
            let k = random_spd(&mut rng, n, 0.0);
            check_pair(&k, &b);
        }
    }
}
