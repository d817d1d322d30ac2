//! Slice-level vector arithmetic.
//!
//! Points and gradients are plain `Vec<S>`; these helpers keep the call sites
//! free of index loops.

use crate::scalar::Scalar;

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm2<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

pub fn norm1<S: Scalar>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |acc, &x| acc + x.abs())
}

pub fn norm_inf<S: Scalar>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |acc, &x| acc.max(x.abs()))
}

pub fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn scaled<S: Scalar>(a: &[S], k: S) -> Vec<S> {
    a.iter().map(|&x| x * k).collect()
}

/// `y += k * x`
pub fn axpy<S: Scalar>(y: &mut [S], k: S, x: &[S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += k * xi;
    }
}

pub fn distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

pub fn all_finite<S: Scalar>(a: &[S]) -> bool {
    a.iter().all(|x| x.is_finite())
}

pub fn zeros<S: Scalar>(d: usize) -> Vec<S> {
    vec![S::zero(); d]
}

/// Unit basis vector `e_k` in dimension `d`.
pub fn basis<S: Scalar>(d: usize, k: usize) -> Vec<S> {
    let mut e = zeros(d);
    e[k] = S::one();
    e
}
