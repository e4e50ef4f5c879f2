//! Dense linear-algebra kernels used by the engines.
//!
//! Everything here is self-contained (no BLAS/LAPACK linkage): Householder
//! tridiagonalization + implicit-shift QL for symmetric eigenproblems,
//! complex Hermitian eigendecomposition through the standard 2n×2n real
//! embedding, Cholesky, partially pivoted LU, and a skew-symmetric
//! tridiagonalization used to extract symplectic spectra from covariance
//! matrices. Matrix products go through `ndarray::dot`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use thiserror::Error;

pub type RMat = Array2<f64>;
pub type CMat = Array2<C64>;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("eigensolver failed to converge after {0} iterations")]
    NoConvergence(usize),
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is singular to working precision at column {0}")]
    Singular(usize),
}

pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn trace(a: &CMat) -> C64 {
    a.diag().sum()
}

/// tr[A·B] without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[[i, j]] * b[[j, i]];
        }
    }
    acc
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn identity_c(n: usize) -> CMat {
    let mut m = CMat::zeros((n, n));
    for i in 0..n {
        m[[i, i]] = C64::new(1.0, 0.0);
    }
    m
}

/// Hermitize in place: A ← (A + A†)/2.
pub fn hermitize(a: &mut CMat) {
    let n = a.nrows();
    for i in 0..n {
        for j in i..n {
            let avg = 0.5 * (a[[i, j]] + a[[j, i]].conj());
            a[[i, j]] = avg;
            a[[j, i]] = avg.conj();
        }
    }
}

// ---------------------------------------------------------------------------
// Real symmetric eigendecomposition (Householder + implicit-shift QL)
// ---------------------------------------------------------------------------

/// Householder reduction of a real symmetric matrix to tridiagonal form.
/// On return `a` holds the accumulated orthogonal transform Q (if
/// `accumulate`), `d` the diagonal and `e` the subdiagonal (e[0] unused).
fn tred2(a: &mut RMat, d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let n = a.nrows();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[[i, k]].abs();
            }
            if scale == 0.0 {
                e[i] = a[[i, l]];
            } else {
                for k in 0..=l {
                    a[[i, k]] /= scale;
                    h += a[[i, k]] * a[[i, k]];
                }
                let f = a[[i, l]];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[[i, l]] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    if accumulate {
                        a[[j, i]] = a[[i, j]] / h;
                    }
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[[j, k]] * a[[i, k]];
                    }
                    for k in j + 1..=l {
                        g += a[[k, j]] * a[[i, k]];
                    }
                    e[j] = g / h;
                    f_acc += e[j] * a[[i, j]];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[[i, j]];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let delta = f * e[k] + g * a[[i, k]];
                        a[[j, k]] -= delta;
                    }
                }
            }
        } else {
            e[i] = a[[i, l]];
        }
        d[i] = h;
    }
    if accumulate {
        d[0] = 0.0;
    }
    e[0] = 0.0;
    if accumulate {
        for i in 0..n {
            if d[i] != 0.0 {
                for j in 0..i {
                    let mut g = 0.0;
                    for k in 0..i {
                        g += a[[i, k]] * a[[k, j]];
                    }
                    for k in 0..i {
                        let delta = g * a[[k, i]];
                        a[[k, j]] -= delta;
                    }
                }
            }
            d[i] = a[[i, i]];
            a[[i, i]] = 1.0;
            for j in 0..i {
                a[[i, j]] = 0.0;
                a[[j, i]] = 0.0;
            }
        }
    } else {
        for i in 0..n {
            d[i] = a[[i, i]];
        }
    }
}

/// Implicit-shift QL on a symmetric tridiagonal matrix. `z`, when present,
/// accumulates the rotations column-wise (input: transform from tred2).
fn tqli(d: &mut [f64], e: &mut [f64], mut z: Option<&mut RMat>) -> Result<(), LinalgError> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(LinalgError::NoConvergence(iter));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..z.nrows() {
                        f = z[[k, i + 1]];
                        z[[k, i + 1]] = s * z[[k, i]] + c * f;
                        z[[k, i]] = c * z[[k, i]] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigendecomposition of a real symmetric matrix. Returns eigenvalues in
/// ascending order with matching eigenvector columns.
pub fn sym_eig(a: &RMat) -> Result<(Array1<f64>, RMat), LinalgError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eig needs a square matrix");
    let mut q = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut q, &mut d, &mut e, true);
    tqli(&mut d, &mut e, Some(&mut q))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| d[i]));
    let mut vecs = RMat::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for r in 0..n {
            vecs[[r, col]] = q[[r, src]];
        }
    }
    Ok((vals, vecs))
}

/// Eigenvalues only, ascending.
pub fn sym_eigvals(a: &RMat) -> Result<Array1<f64>, LinalgError> {
    let n = a.nrows();
    let mut work = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut work, &mut d, &mut e, false);
    tqli(&mut d, &mut e, None)?;
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(Array1::from(d))
}

/// Eigenvalues of a symmetric tridiagonal matrix given diagonal `d` and
/// off-diagonal `e` (`e[i]` couples `i` and `i+1`; `e` has length n−1).
pub fn tridiag_eigvals(diag: &[f64], off: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = diag.len();
    let mut d = diag.to_vec();
    // tqli expects the subdiagonal shifted by one with e[0] unused.
    let mut e = vec![0.0; n];
    for i in 1..n {
        e[i] = off[i - 1];
    }
    tqli(&mut d, &mut e, None)?;
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(d)
}

// ---------------------------------------------------------------------------
// Complex Hermitian eigenproblems through the 2n×2n real embedding
// ---------------------------------------------------------------------------

/// Embed H = A + iB (Hermitian) as the real symmetric [[A, −B], [B, A]].
pub fn embed_hermitian(h: &CMat) -> RMat {
    let n = h.nrows();
    let mut m = RMat::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let z = h[[i, j]];
            m[[i, j]] = z.re;
            m[[n + i, n + j]] = z.re;
            m[[i, n + j]] = -z.im;
            m[[n + i, j]] = z.im;
        }
    }
    m
}

fn unembed(m: &RMat) -> CMat {
    let n = m.nrows() / 2;
    let mut out = CMat::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (m[[i, j]] + m[[n + i, n + j]]);
            let im = 0.5 * (m[[n + i, j]] - m[[i, n + j]]);
            out[[i, j]] = C64::new(re, im);
        }
    }
    out
}

/// Eigendecomposition of a complex Hermitian matrix, kept in embedded form.
///
/// Matrix functions are evaluated as f(H) = unembed(V·f(Λ)·Vᵀ), which avoids
/// reconstructing complex eigenvectors from the doubled real eigenspaces.
pub struct HermEig {
    dim: usize,
    vals: Array1<f64>,
    vecs: RMat,
}

impl HermEig {
    pub fn new(h: &CMat) -> Result<Self, LinalgError> {
        let dim = h.nrows();
        let m = embed_hermitian(h);
        let (vals, vecs) = sym_eig(&m)?;
        Ok(Self { dim, vals, vecs })
    }

    /// The n distinct eigenvalues, ascending. The embedding doubles each
    /// eigenvalue; adjacent pairs are averaged.
    pub fn eigvals(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|k| 0.5 * (self.vals[2 * k] + self.vals[2 * k + 1]))
            .collect()
    }

    pub fn min_eigval(&self) -> f64 {
        self.vals[0]
    }

    /// f(H) for a real-valued spectral function (result is Hermitian).
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        let m = self.vals.len();
        let mut scaled = self.vecs.clone();
        for (k, col) in scaled.axis_iter_mut(ndarray::Axis(1)).enumerate() {
            let fv = f(self.vals[k]);
            let mut col = col;
            col.mapv_inplace(|x| x * fv);
        }
        let _ = m;
        let w = scaled.dot(&self.vecs.t());
        let mut out = unembed(&w);
        hermitize(&mut out);
        out
    }

    /// f(H) for a complex-valued spectral function, e.g. exp(iλ).
    pub fn apply_complex(&self, f: impl Fn(f64) -> C64) -> CMat {
        let re = self.apply(|x| f(x).re);
        let im = self.apply(|x| f(x).im);
        re + im.mapv(|z| z * C64::new(0.0, 1.0))
    }
}

// ---------------------------------------------------------------------------
// Cholesky and LU
// ---------------------------------------------------------------------------

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky_lower(a: &RMat) -> Result<RMat, LinalgError> {
    let n = a.nrows();
    let mut l = RMat::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(LinalgError::NotPositiveDefinite { index: i, pivot: sum });
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// LU factorization with partial pivoting for real matrices.
pub struct LuReal {
    lu: RMat,
    piv: Vec<usize>,
    n: usize,
}

impl LuReal {
    pub fn new(a: &RMat) -> Result<Self, LinalgError> {
        let n = a.nrows();
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut maxval = lu[[k, k]].abs();
            for i in k + 1..n {
                let v = lu[[i, k]].abs();
                if v > maxval {
                    maxval = v;
                    p = i;
                }
            }
            if maxval == 0.0 {
                return Err(LinalgError::Singular(k));
            }
            if p != k {
                for j in 0..n {
                    lu.swap([k, j], [p, j]);
                }
                piv.swap(k, p);
            }
            let pivot = lu[[k, k]];
            for i in k + 1..n {
                let factor = lu[[i, k]] / pivot;
                lu[[i, k]] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        let delta = factor * lu[[k, j]];
                        lu[[i, j]] -= delta;
                    }
                }
            }
        }
        Ok(Self { lu, piv, n })
    }

    pub fn solve_vec(&self,ب: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = ب[self.piv[i]];
        }
        for i in 0..n {
            for k in 0..i {
                let delta = self.lu[[i, k]] * x[k];
                x[i] -= delta;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let delta = self.lu[[i, k]] * x[k];
                x[i] -= delta;
            }
            x[i] /= self.lu[[i, i]];
        }
        x
    }

    /// Solve A·X = B column by column.
    pub fn solve_mat(&self, b: &RMat) -> RMat {
        let n = self.n;
        let cols = b.ncols();
        let mut out = RMat::zeros((n, cols));
        let mut rhs = vec![0.0; n];
        for c in 0..cols {
            for i in 0..n {
                rhs[i] = b[[i, c]];
            }
            let x = self.solve_vec(&rhs);
            for i in 0..n {
                out[[i, c]] = x[i];
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Skew-symmetric tridiagonalization (symplectic spectra)
// ---------------------------------------------------------------------------

/// Householder reduction of a real skew-symmetric matrix to skew-tridiagonal
/// form; returns the subdiagonal entries e[i] = T[i+1, i].
///
/// Two-sided application simplifies for skew A because hᵀAh = 0:
/// HAH = A + h·uᵀ − u·hᵀ with u = τ·A·h.
pub fn skew_tridiag_subdiag(a: &RMat) -> Vec<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    let mut e = vec![0.0; n.saturating_sub(1)];
    if n < 2 {
        return e;
    }
    let mut v = vec![0.0; n];
    let mut u = vec![0.0; n];
    for k in 0..n - 2 {
        let x0 = a[[k + 1, k]];
        let mut sigma = 0.0;
        for i in k + 2..n {
            sigma += a[[i, k]] * a[[i, k]];
        }
        if sigma == 0.0 {
            e[k] = x0;
            continue;
        }
        let norm = (x0 * x0 + sigma).sqrt();
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        // v spans rows k+1..n
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = a[[i, k]];
        }
        let vtv = v[k + 1] * v[k + 1] + sigma;
        let beta = 2.0 / vtv;
        // u = beta * T * v on the trailing block
        for i in k + 1..n {
            let mut acc = 0.0;
            for j in k + 1..n {
                acc += a[[i, j]] * v[j];
            }
            u[i] = beta * acc;
        }
        // T += v uᵀ − u vᵀ
        for i in k + 1..n {
            let vi = v[i];
            let ui = u[i];
            for j in k + 1..n {
                a[[i, j]] += vi * u[j] - ui * v[j];
            }
        }
        // column k reduces to (alpha, 0, ..) below the diagonal
        a[[k + 1, k]] = alpha;
        for i in k + 2..n {
            a[[i, k]] = 0.0;
        }
        e[k] = alpha;
    }
    e[n - 2] = a[[n - 1, n - 2]];
    e
}

// ---------------------------------------------------------------------------
// Small-matrix exponential (scaling and squaring, Taylor)
// ---------------------------------------------------------------------------

/// exp(A) for small real matrices; used to build test symplectics and the
/// occasional propagator in low dimensions.
pub fn expm_real(a: &RMat) -> RMat {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).fold(0.0, f64::max) * n as f64;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.mapv(|x| x / f64::powi(2.0, squarings as i32));
    let mut result = RMat::eye(n);
    let mut term = RMat::eye(n);
    for k in 1..=18 {
        term = term.dot(&scaled).mapv(|x| x / k as f64);
        result = result + &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> RMat {
        let mut a = RMat::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = rng.gen_range(-1.0..1.0);
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        a
    }

    #[test]
    fn sym_eig_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[1usize, 2, 3, 10, 37] {
            let a = random_sym(n, &mut rng);
            let (vals, vecs) = sym_eig(&a).unwrap();
            let lam = RMat::from_diag(&vals);
            let recon = vecs.dot(&lam).dot(&vecs.t());
            let err = (&recon - &a).iter().map(|x| x.abs()).fold(0.0, f64::max);
            assert!(err < 1e-11, "n={n} reconstruction err {err:.3e}");
            let orth = vecs.t().dot(&vecs);
            let ierr = (&orth - &RMat::eye(n))
                .iter()
                .map(|x| x.abs())
                .fold(0.0, f64::max);
            assert!(ierr < 1e-11, "n={n} orthogonality err {ierr:.3e}");
            for k in 1..n {
                assert!(vals[k] >= vals[k - 1]);
            }
        }
    }

    #[test]
    fn sym_eigvals_matches_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_sym(24, &mut rng);
        let (vals, _) = sym_eig(&a).unwrap();
        let vals2 = sym_eigvals(&a).unwrap();
        for k in 0..24 {
            assert!((vals[k] - vals2[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn herm_eig_matrix_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 12;
        let mut h = CMat::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if i == j {
                    h[[i, j]] = C64::new(z.re, 0.0);
                } else {
                    h[[i, j]] = z;
                    h[[j, i]] = z.conj();
                }
            }
        }
        let eig = HermEig::new(&h).unwrap();
        let recon = eig.apply(|x| x);
        let err = (&recon - &h).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-11, "identity function err {err:.3e}");
        // exp(H)·exp(−H) = 1
        let ep = eig.apply(f64::exp);
        let em = eig.apply(|x| (-x).exp());
        let prod = ep.dot(&em);
        let ierr = (&prod - &identity_c(n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(ierr < 1e-9, "exp inverse err {ierr:.3e}");
        // unitary from complex spectral function
        let u = eig.apply_complex(|x| C64::from_polar(1.0, x));
        let uu = u.dot(&dagger(&u));
        let uerr = (&uu - &identity_c(n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(uerr < 1e-10, "unitarity err {uerr:.3e}");
    }

    #[test]
    fn cholesky_and_lu_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20;
        let g = random_sym(n, &mut rng);
        let spd = g.dot(&g.t()) + &(RMat::eye(n) * (n as f64));
        let l = cholesky_lower(&spd).unwrap();
        let recon = l.dot(&l.t());
        let err = (&recon - &spd).iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(err < 1e-10 * n as f64);

        let a = random_sym(n, &mut rng) + &(RMat::eye(n) * 3.0);
        let lu = LuReal::new(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = lu.solve_vec(&b);
        let xv = Array1::from(x);
        let resid = &a.dot(&xv) - &Array1::from(b);
        assert!(resid.iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn skew_tridiagonal_preserves_spectrum() {
        // eigenvalues of a skew matrix are ±i·κ; κ also equals the singular
        // values, which the subdiagonal reduction must preserve. Compare
        // через −K² (symmetric) eigenvalues.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 12;
        let mut k = RMat::zeros((n, n));
        for i in 0..n {
            for j in 0..i {
                let v = rng.gen_range(-1.0..1.0);
                k[[i, j]] = v;
                k[[j, i]] = -v;
            }
        }
        let m = k.dot(&k.t());
        let direct = sym_eigvals(&m).unwrap();
        let e = skew_tridiag_subdiag(&k);
        // build the reduced skew-tridiagonal K² spectrum via its own sym form
        let mut t = RMat::zeros((n, n));
        for i in 0..n - 1 {
            t[[i + 1, i]] = e[i];
            t[[i, i + 1]] = -e[i];
        }
        let m2 = t.dot(&t.t());
        let reduced = sym_eigvals(&m2).unwrap();
        for i in 0..n {
            assert!(
                (direct[i] - reduced[i]).abs() < 1e-10,
                "singular value mismatch at {i}: {} vs {}",
                direct[i],
                reduced[i]
            );
        }
    }

    #[test]
    fn expm_matches_series_identity() {
        let a = ndarray::array![[0.0, 1.0], [-1.0, 0.0]] * 0.3;
        let e = expm_real(&a);
        // rotation by 0.3 rad
        assert!((e[[0, 0]] - 0.3f64.cos()).abs() < 1e-12);
        assert!((e[[0, 1]] - 0.3f64.sin()).abs() < 1e-12);
    }
}
