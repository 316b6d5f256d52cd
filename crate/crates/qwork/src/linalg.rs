//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `ndarray::Array2<Complex64>` in row-major layout. Hermitian
//! eigendecompositions go through nalgebra's symmetric eigensolver; the
//! propagator's per-step exponentials use the dedicated real symmetric
//! tridiagonal QL solver in [`sym_tridiag_eigen`], which is much faster for
//! the Fock-basis Hamiltonians of this crate.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMat = Array2<C64>;

/// N×N identity.
pub fn identity(dim: usize) -> CMat {
    Array2::eye(dim)
}

/// Conjugate transpose.
pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

/// Max-norm ‖M‖_max = max |M_ij|.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-norm of the difference of two equally sized matrices.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// max |M_ij − conj(M_ji)|; zero for an exactly Hermitian matrix.
pub fn hermiticity_residual(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut r = 0.0f64;
    for i in 0..n {
        for j in i..n {
            r = r.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    r
}

/// ‖(U†U − 1)‖_max restricted to the leading `n_phys`×`n_phys` block.
pub fn unitarity_residual(u: &CMat, n_phys: usize) -> f64 {
    let p = dagger(u).dot(u);
    let n = n_phys.min(p.nrows());
    let mut r = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            r = r.max((p[[i, j]] - id).norm());
        }
    }
    r
}

/// tr M.
pub fn trace(m: &CMat) -> C64 {
    m.diag().iter().sum()
}

/// tr(AB) without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> C64 {
    let n = a.nrows();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            s += a[[i, k]] * b[[k, i]];
        }
    }
    s
}

/// Eigendecomposition M = Q Λ Q† of a Hermitian matrix, eigenvalues ascending,
/// eigenvectors in the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenH {
    pub values: Array1<f64>,
    pub vectors: CMat,
}

impl EigenH {
    /// Q f(Λ) Q† with `f` applied entrywise to the (real) eigenvalues.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> CMat {
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let fv = f(lam);
            scaled.column_mut(k).mapv_inplace(|z| z * fv);
        }
        scaled.dot(&dagger(&self.vectors))
    }

    /// Q† M Q: `m` expressed in the eigenbasis.
    pub fn to_eigenbasis(&self, m: &CMat) -> CMat {
        dagger(&self.vectors).dot(m).dot(&self.vectors)
    }
}

/// Dense Hermitian eigendecomposition. The input must be Hermitian; the
/// reconstruction residual is verified and reported on failure.
pub fn eigen_hermitian(m: &CMat) -> Result<EigenH> {
    let n = m.nrows();
    if n != m.ncols() || n == 0 {
        return Err(Error::DimensionMismatch {
            left: n,
            right: m.ncols(),
        });
    }
    let na = nalgebra::DMatrix::<C64>::from_fn(n, n, |i, j| m[[i, j]]);
    let se = nalgebra::SymmetricEigen::try_new(na, f64::EPSILON, 0).ok_or(
        Error::NumericalFailure {
            context: "hermitian eigendecomposition",
            residual: f64::INFINITY,
        },
    )?;

    // sort ascending, permuting eigenvector columns along
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let values = Array1::from_iter(order.iter().map(|&k| se.eigenvalues[k]));
    let vectors = CMat::from_shape_fn((n, n), |(i, j)| se.eigenvectors[(i, order[j])]);

    let eig = EigenH { values, vectors };
    let recon = eig.apply(|x| C64::new(x, 0.0));
    let residual = max_abs_diff(&recon, m);
    let scale = max_abs(m).max(1.0);
    if !residual.is_finite() || residual > 1e-8 * scale {
        return Err(Error::NumericalFailure {
            context: "hermitian eigendecomposition",
            residual,
        });
    }
    Ok(eig)
}

/// Eigendecomposition of a real symmetric tridiagonal matrix.
///
/// `row_vectors` stores eigenvector k in row k (transposed relative to the
/// usual column convention) so the QL rotations act on contiguous memory.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    pub values: Vec<f64>,
    pub row_vectors: Array2<f64>,
}

/// Implicit-shift QL with eigenvector accumulation (EISPACK `tql2` lineage).
///
/// `diag` has length n, `offdiag` length n−1. Eigenvalues are returned
/// unsorted; callers that need ordering sort on their own.
pub fn sym_tridiag_eigen(diag: &[f64], offdiag: &[f64]) -> Result<TridiagEigen> {
    let n = diag.len();
    if n < 1 || offdiag.len() + 1 != n {
        return Err(Error::InvalidDimension { dim: n, min: 1 });
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0f64; n];
    e[..n - 1].copy_from_slice(offdiag);
    let mut zt = vec![0.0f64; n * n];
    for i in 0..n {
        zt[i * n + i] = 1.0;
    }

    let eps = f64::EPSILON;
    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 64 {
                    return Err(Error::NumericalFailure {
                        context: "tridiagonal QL iteration",
                        residual: e[l].abs(),
                    });
                }
                // implicit shift from the 2×2 leading block
                let g = d[l];
                let p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                // QL sweep from m−1 down to l
                let mut p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    // rotate eigenvector rows i and i+1 (contiguous slices)
                    let (lo, hi) = zt.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for k in 0..n {
                        let h = zi1[k];
                        zi1[k] = s * zi[k] + c * h;
                        zi[k] = c * zi[k] - s * h;
                    }
                }
                let p = -s * s2 * c3 * el1 * e[l] / dl1;
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

    let row_vectors = Array2::from_shape_vec((n, n), zt)
        .expect("square buffer");
    Ok(TridiagEigen {
        values: d,
        row_vectors,
    })
}
