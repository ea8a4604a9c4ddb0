//! Dense reference implementations used as test oracles. Nothing here goes
//! through the engine's stride/layout code: operators are built as explicit
//! Kronecker products over a permuted register.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use wigner::Complex64 as C64;

pub type M = DMatrix<C64>;
pub type V = DVector<C64>;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Mixed-radix digits of `index`, most significant first.
pub fn digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
    out
}

pub fn undigits(ds: &[usize], dims: &[usize]) -> usize {
    ds.iter().zip(dims).fold(0, |acc, (d, n)| acc * n + d)
}

/// Permutation matrix sending the register's declared order to
/// `targets ++ rest` (rest in declared order).
pub fn permutation(dims: &[usize], targets: &[usize]) -> (M, Vec<usize>) {
    let mut order: Vec<usize> = targets.to_vec();
    order.extend((0..dims.len()).filter(|k| !targets.contains(k)));
    let pdims: Vec<usize> = order.iter().map(|&k| dims[k]).collect();
    let n: usize = dims.iter().product();
    let mut p = M::zeros(n, n);
    for i in 0..n {
        let d = digits(i, dims);
        let pd: Vec<usize> = order.iter().map(|&k| d[k]).collect();
        p[(undigits(&pd, &pdims), i)] = c(1.0);
    }
    (p, order)
}

/// `U` on `targets`, identity elsewhere, as a full matrix.
pub fn embed(dims: &[usize], targets: &[usize], u: &M) -> M {
    let (p, _) = permutation(dims, targets);
    let rest: usize = (0..dims.len()).filter(|k| !targets.contains(k)).map(|k| dims[k]).product();
    let full = u.kronecker(&M::identity(rest, rest));
    p.adjoint() * full * p
}

pub fn projector(v: &V) -> M {
    v * v.adjoint()
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> V {
    loop {
        let v = V::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let norm = v.norm();
        if norm > 1e-3 {
            return v / c(norm);
        }
    }
}

/// Haar-ish random unitary from the QR factor of a random complex matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> M {
    let a = M::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    a.qr().q()
}

pub fn max_abs_diff(a: &V, b: &V) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
