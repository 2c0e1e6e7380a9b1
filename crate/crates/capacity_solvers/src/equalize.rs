//! Equalizing distances over a working set of output points.
//!
//! Given a fixed set of outputs `w_i`, the inner problem is to choose
//! weights `p_i` so that every `D(w_i || v)` with `v = sum p_i w_i` is
//! equal; the common value is then the ensemble's Holevo quantity. A few
//! multiplicative reweighting sweeps (`ba_warm`) give a cheap warm start,
//! `newton_equalize` drives the pairwise distance differences to zero
//! with a damped Newton step, and `equalize_active` drops members whose
//! weight turns negative until the remaining support is feasible.

use bloch_core::{center_coefficients, BlochVector};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::LN_2;

use crate::surface::entropy_term;

/// Minimum-norm least-squares solve via SVD; singular values below
/// `rcond` times the largest are treated as zero.
pub(crate) fn lstsq(a: DMatrix<f64>, b: DVector<f64>, rcond: f64) -> DVector<f64> {
    let ncols = a.ncols();
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    if smax <= 0.0 {
        return DVector::zeros(ncols);
    }
    svd.solve(&b, rcond * smax)
        .unwrap_or_else(|_| DVector::zeros(ncols))
}

pub(crate) fn weighted_average(ws: &[BlochVector], p: &[f64]) -> BlochVector {
    ws.iter()
        .zip(p)
        .fold(BlochVector::ZERO, |acc, (&w, &pi)| acc + w * pi)
}

fn distances(ws: &[BlochVector], d1: &[f64], v: BlochVector) -> Vec<f64> {
    let (k0, k1) = center_coefficients(v);
    ws.iter()
        .zip(d1)
        .map(|(&w, &d)| d + k0 - k1 * w.dot(v))
        .collect()
}

/// Multiplicative reweighting sweeps: each member's weight is scaled by
/// `2^(D_i - max_j D_j)` and renormalized. Fixed points are exactly the
/// equal-distance weight vectors; convergence is monotone but slow, so
/// this only warms up the Newton stage.
pub(crate) fn ba_warm(ws: &[BlochVector], p0: &[f64], inners: usize) -> Vec<f64> {
    let d1: Vec<f64> = ws.iter().map(|&w| entropy_term(w)).collect();
    let mut p = p0.to_vec();
    for _ in 0..inners {
        let v = weighted_average(ws, &p);
        let ds = distances(ws, &d1, v);
        let dmax = ds.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d));
        let mut pn: Vec<f64> = p
            .iter()
            .zip(&ds)
            .map(|(&pi, &di)| pi * (di - dmax).exp2())
            .collect();
        let total: f64 = pn.iter().sum();
        for q in &mut pn {
            *q /= total;
        }
        let moved = pn
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        p = pn;
        if moved < 5e-17 {
            break;
        }
    }
    p
}

/// Gradient of `D(w_i || v)` with respect to the center `v`, one row per
/// member. At `v = 0` the smooth limit `-w_i / ln 2` applies.
fn center_gradients(ws: &[BlochVector], v: BlochVector) -> Vec<BlochVector> {
    let q = v.norm();
    if q < 1e-12 {
        return ws.iter().map(|&w| w * (-1.0 / LN_2)).collect();
    }
    let vh = v * (1.0 / q);
    let k1 = q.atanh() / (q * LN_2);
    let dk0 = q / ((1.0 - q * q) * LN_2);
    let dk1 = (q / (1.0 - q * q) - q.atanh()) / (q * q * LN_2);
    ws.iter()
        .map(|&w| vh * (dk0 - dk1 * w.dot(v)) - w * k1)
        .collect()
}

pub(crate) struct Equalized {
    pub p: Vec<f64>,
    /// Distances `D(w_i || v)` at the final weights.
    pub ds: Vec<f64>,
    /// Largest remaining pairwise distance difference.
    pub residual: f64,
}

/// Damped Newton iteration on the distance differences
/// `F_i = D(w_i || v) - D(w_m || v)` as a function of the free weights
/// `p_1 .. p_{m-1}` (the last weight absorbs the normalization).
pub(crate) fn newton_equalize(ws: &[BlochVector], p0: &[f64], iters: usize) -> Equalized {
    let m = ws.len();
    let total: f64 = p0.iter().sum();
    let mut p: Vec<f64> = p0.iter().map(|x| x / total).collect();
    if m == 1 {
        // a single member sits at its own average: distance zero
        return Equalized { p, ds: vec![0.0], residual: 0.0 };
    }
    let d1: Vec<f64> = ws.iter().map(|&w| entropy_term(w)).collect();
    let f_of = |p: &[f64]| -> (Vec<f64>, BlochVector, Vec<f64>) {
        let v = weighted_average(ws, p);
        let ds = distances(ws, &d1, v);
        let f: Vec<f64> = ds.iter().map(|d| d - ds[m - 1]).collect();
        (f, v, ds)
    };
    let fmax_of = |f: &[f64]| {
        f[..m - 1]
            .iter()
            .map(|x| x.abs())
            .fold(0.0_f64, f64::max)
    };
    for _ in 0..iters {
        let (f, v, _) = f_of(&p);
        let fmax = fmax_of(&f);
        if fmax < 1e-14 {
            break;
        }
        let g = center_gradients(ws, v);
        // J_ij = (grad_i - grad_m) . (w_j - w_m): moving weight j shifts
        // the average along w_j - w_m
        let mut jac = DMatrix::zeros(m - 1, m - 1);
        for i in 0..m - 1 {
            let gi = g[i] - g[m - 1];
            for j in 0..m - 1 {
                jac[(i, j)] = gi.dot(ws[j] - ws[m - 1]);
            }
        }
        let rhs = DVector::from_iterator(m - 1, f[..m - 1].iter().map(|x| -x));
        let step = lstsq(jac, rhs, 1e-9);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            let mut pn = p.clone();
            for i in 0..m - 1 {
                pn[i] += scale * step[i];
            }
            let head: f64 = pn[..m - 1].iter().sum();
            pn[m - 1] = 1.0 - head;
            let (fn_, _, _) = f_of(&pn);
            if fmax_of(&fn_) < fmax {
                p = pn;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let (f, _, ds) = f_of(&p);
    let residual = fmax_of(&f);
    Equalized { p, ds, residual }
}

/// Newton equalization with an active-set outer loop: whenever the
/// equalized weights go negative, the most negative member is dropped and
/// the rest are renormalized, until the support is feasible. Returns the
/// surviving indices, their clipped weights, the average, the achieved
/// common distance `chi = sum p_i D_i`, and the equalization residual.
pub(crate) fn equalize_active(
    ws: &[BlochVector],
    p0: &[f64],
) -> (Vec<usize>, Vec<f64>, BlochVector, f64, f64) {
    let mut idx: Vec<usize> = (0..ws.len()).collect();
    let mut weights = p0.to_vec();
    loop {
        let sub_ws: Vec<BlochVector> = idx.iter().map(|&i| ws[i]).collect();
        let sub_p: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
        let eq = newton_equalize(&sub_ws, &sub_p, 60);
        let pmin = eq.p.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        if pmin >= -1e-12 || idx.len() <= 1 {
            let mut p: Vec<f64> = eq.p.iter().map(|&x| x.max(0.0)).collect();
            let total: f64 = p.iter().sum();
            for q in &mut p {
                *q /= total;
            }
            let v = weighted_average(&sub_ws, &p);
            let chi: f64 = p.iter().zip(&eq.ds).map(|(a, b)| a * b).sum();
            return (idx, p, v, chi, eq.residual);
        }
        let worst = eq
            .p
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite weights"))
            .map(|(k, _)| k)
            .expect("nonempty support");
        idx.remove(worst);
        let total: f64 = idx.iter().map(|&i| weights[i]).sum();
        if total <= 0.0 {
            let uniform = 1.0 / idx.len() as f64;
            for &i in &idx {
                weights[i] = uniform;
            }
        } else {
            for &i in &idx {
                weights[i] /= total;
            }
        }
    }
}
