//! Cyclic Jacobi eigensolver for small dense symmetric matrices and the
//! spectral functions built on it (square root, inverse square root).

use crate::scalar::Scalar;

use super::{NumericsError, SymMatrix};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `m = V diag(values) V^T`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen<S> {
    pub values: Vec<S>,
    /// Column-major: column `k` is the unit eigenvector for `values[k]`.
    vectors: Vec<S>,
    dim: usize,
}

impl<S: Scalar> SymEigen<S> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, k: usize) -> &[S] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    /// Row-major dense copy of `V`.
    pub fn vectors_dense(&self) -> Vec<S> {
        let n = self.dim;
        let mut out = vec![S::zero(); n * n];
        for k in 0..n {
            for i in 0..n {
                out[i * n + k] = self.vectors[k * n + i];
            }
        }
        out
    }

    /// `V diag(f(values)) V^T`
    pub fn map(&self, f: impl Fn(S) -> S) -> SymMatrix<S> {
        let mapped: Vec<S> = self.values.iter().map(|&l| f(l)).collect();
        SymMatrix::from_fn(self.dim, |i, j| {
            (0..self.dim).fold(S::zero(), |acc, k| {
                acc + mapped[k] * self.vectors[k * self.dim + i] * self.vectors[k * self.dim + j]
            })
        })
    }

    /// Coordinates of `x` in the eigenbasis, `V^T x`.
    pub fn to_eigenbasis(&self, x: &[S]) -> Vec<S> {
        (0..self.dim)
            .map(|k| super::dot(self.vector(k), x))
            .collect()
    }

    /// Inverse of [`to_eigenbasis`](Self::to_eigenbasis), `V z`.
    pub fn from_eigenbasis(&self, z: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.dim];
        for (k, &zk) in z.iter().enumerate() {
            super::axpy(&mut out, zk, self.vector(k));
        }
        out
    }

    pub fn min_value(&self) -> S {
        self.values.first().copied().unwrap_or_else(S::zero)
    }

    pub fn max_value(&self) -> S {
        self.values.last().copied().unwrap_or_else(S::zero)
    }
}

pub fn eigh<S: Scalar>(m: &SymMatrix<S>) -> Result<SymEigen<S>, NumericsError> {
    if !m.is_finite() {
        return Err(NumericsError::InvalidMatrix);
    }
    let n = m.dim();
    let mut a = m.to_dense();
    let mut v = vec![S::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = S::one();
    }

    let frob_sq = {
        let f = m.frobenius_norm();
        f * f
    };
    let tol = S::epsilon() * S::epsilon() * frob_sq;

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: S = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(S::zero(), |acc, (i, j)| acc + a[i * n + j] * a[i * n + j]);
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == S::zero() {
                    continue;
                }
                let (c, s) = rotation(a[p * n + p], apq, a[q * n + q]);
                // A <- A J
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                // A <- J^T A
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = S::zero();
                a[q * n + p] = S::zero();
                // V <- V J
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(NumericsError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i * n + i]
            .partial_cmp(&a[j * n + j])
            .expect("finite eigenvalues")
    });
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        for i in 0..n {
            vectors.push(v[i * n + k]);
        }
    }
    Ok(SymEigen {
        values,
        vectors,
        dim: n,
    })
}

/// Symmetric Schur rotation `(c, s)` that annihilates the `(p, q)` entry.
fn rotation<S: Scalar>(app: S, apq: S, aqq: S) -> (S, S) {
    let two = S::lit(2.0);
    let theta = (aqq - app) / (two * apq);
    let t = if theta.is_infinite() {
        S::zero()
    } else {
        let sign = if theta >= S::zero() {
            S::one()
        } else {
            -S::one()
        };
        sign / (theta.abs() + (theta * theta + S::one()).sqrt())
    };
    let c = S::one() / (t * t + S::one()).sqrt();
    (c, t * c)
}

fn check_psd<S: Scalar>(m: &SymMatrix<S>, eig: &SymEigen<S>) -> Result<(), NumericsError> {
    let threshold = -S::lit(1e-8) * m.frobenius_norm();
    let min = eig.min_value();
    if min < threshold {
        return Err(NumericsError::NotPsd {
            min_eigenvalue: min.as_f64(),
        });
    }
    Ok(())
}

/// `V diag(1 / sqrt(max(lambda_i, floor))) V^T` for PSD `m`.
pub fn inv_sqrt<S: Scalar>(m: &SymMatrix<S>, floor: S) -> Result<SymMatrix<S>, NumericsError> {
    let eig = eigh(m)?;
    check_psd(m, &eig)?;
    Ok(eig.map(|l| S::one() / l.max(floor).sqrt()))
}

/// Principal square root of a PSD matrix; tiny negative eigenvalues clamp to 0.
pub fn sqrt_psd<S: Scalar>(m: &SymMatrix<S>) -> Result<SymMatrix<S>, NumericsError> {
    let eig = eigh(m)?;
    check_psd(m, &eig)?;
    Ok(eig.map(|l| l.max(S::zero()).sqrt()))
}

/// `tr(m^{1/2})`, the nuclear norm of `m^{1/2}` for PSD `m`.
pub fn trace_sqrt<S: Scalar>(m: &SymMatrix<S>) -> Result<S, NumericsError> {
    let eig = eigh(m)?;
    check_psd(m, &eig)?;
    Ok(eig
        .values
        .iter()
        .fold(S::zero(), |acc, &l| acc + l.max(S::zero()).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix<f64> {
        SymMatrix::from_fn(n, |_, _| rng.random_range(-5.0..5.0))
    }

    fn reconstruct(eig: &SymEigen<f64>) -> SymMatrix<f64> {
        eig.map(|l| l)
    }

    #[test]
    fn identity_eigenvalues() {
        let eig = eigh(&SymMatrix::<f64>::identity(2)).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_matrix_is_already_decomposed() {
        let eig = eigh(&SymMatrix::from_diag(&[3.0f64, 1.0])).unwrap();
        assert_eq!(eig.values, vec![1.0, 3.0]);
        assert_eq!(eig.vector(0)[1].abs(), 1.0);
        assert_eq!(eig.vector(1)[0].abs(), 1.0);
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let n = 1 + trial % 16;
            let m = random_sym(&mut rng, n);
            let eig = eigh(&m).unwrap();
            let err = reconstruct(&eig).sub(&m).frobenius_norm();
            assert!(err <= 1e-10 * (1.0 + m.frobenius_norm()), "n={n} err={err}");
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
            for i in 0..n {
                for j in 0..n {
                    let ip = crate::numerics::dot(eig.vector(i), eig.vector(j));
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut m = SymMatrix::<f64>::identity(2);
        m.set(0, 1, f64::NAN);
        assert!(matches!(eigh(&m), Err(NumericsError::InvalidMatrix)));
    }

    #[test]
    fn inv_sqrt_of_identity_and_diagonal() {
        let r = inv_sqrt(&SymMatrix::<f64>::identity(3), 1e-12).unwrap();
        assert_eq!(r, SymMatrix::identity(3));
        let r = inv_sqrt(&SymMatrix::from_diag(&[4.0f64, 9.0]), 1e-12).unwrap();
        assert!((r.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((r.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.get(0, 1), 0.0);
    }

    #[test]
    fn inv_sqrt_rank_one() {
        // ||g|| = 2, so g g^T has eigenvalue 4 along g and 0 elsewhere.
        let g = [1.2f64, -1.6];
        let m = SymMatrix::outer(&g);
        let floor = 1e-8;
        let r = inv_sqrt(&m, floor).unwrap();
        let u = [0.6, -0.8];
        let along = r.quad_form(&u);
        assert!((along - 0.5).abs() < 1e-9, "{along}");
        let w = [0.8, 0.6];
        let ortho = r.quad_form(&w);
        assert!((ortho - 1.0 / floor.sqrt()).abs() < 1e-3, "{ortho}");
        // (r^2) m equals the projector onto span(g).
        let r2 = SymMatrix::from_dense_upper(2, &r.mul(&r)).unwrap();
        let prod = r2.mul(&m);
        let proj = [0.36, -0.48, -0.48, 0.64];
        for (p, e) in prod.iter().zip(proj) {
            assert!((p - e).abs() < 1e-7, "{p} vs {e}");
        }
    }

    #[test]
    fn inv_sqrt_whitens_well_conditioned_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(1..8);
            let mut m = SymMatrix::scaled_identity(n, 0.5);
            for _ in 0..n + 2 {
                let g: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                m.add_outer(&g, 1.0);
            }
            let r = inv_sqrt(&m, 1e-8).unwrap();
            let rd = r.to_dense();
            let md = m.to_dense();
            let mut tmp = vec![0.0; n * n];
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    tmp[i * n + j] = (0..n).map(|k| rd[i * n + k] * md[k * n + j]).sum();
                }
            }
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] = (0..n).map(|k| tmp[i * n + k] * rd[k * n + j]).sum();
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((out[i * n + j] - e).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn negative_definite_rejected() {
        let m = SymMatrix::from_diag(&[1.0f64, -0.5]);
        assert!(matches!(
            inv_sqrt(&m, 1e-8),
            Err(NumericsError::NotPsd { .. })
        ));
    }

    #[test]
    fn sqrt_squares_back() {
        let mut m = SymMatrix::<f64>::zeros(3);
        m.add_outer(&[1.0, 2.0, 0.5], 1.0);
        m.add_outer(&[-0.3, 0.1, 2.0], 1.0);
        let r = sqrt_psd(&m).unwrap();
        let sq = r.mul(&r);
        for (a, b) in sq.iter().zip(m.to_dense()) {
            assert!((a - b).abs() < 1e-12);
        }
        let t = trace_sqrt(&m).unwrap();
        assert!((t - r.trace()).abs() < 1e-12);
    }

    #[test]
    fn single_precision_reconstruction() {
        let m = SymMatrix::<f32>::from_fn(3, |i, j| (1 + i + 2 * j) as f32 * 0.25);
        let eig = eigh(&m).unwrap();
        let err = eig.map(|l| l).sub(&m).frobenius_norm();
        assert!(err < 1e-5 * (1.0 + m.frobenius_norm()));
    }
}
