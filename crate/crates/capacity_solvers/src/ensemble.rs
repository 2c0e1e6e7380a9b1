//! Reconstructing an optimal signal ensemble from a converged center.
//!
//! At the optimum the center `v` is a convex combination of the farthest
//! surface points. Given those maximizers, nonnegative least squares on
//! the moment constraints `sum p_i w_i = v`, `sum p_i = 1` recovers the
//! weights; at most four states are ever needed for a qubit channel, so
//! oversized supports are trimmed to the four heaviest and re-solved.
//!
//! Symmetric channels can leave a whole curve of maximizers of which the
//! scan reports a single representative `w`; the center is then rescued
//! by intersecting the ray from `w` through `v` with the output surface
//! (`ray_partner`), giving the unique two-point ensemble through `v` as
//! long as the partner is itself a maximizer.

use bloch_core::{relative_entropy, BlochVector};
use channel_model::{invert_channel, ChannelParams};
use nalgebra::{DMatrix, DVector};

use crate::{EnsembleMember, SignalEnsemble, SolverError};

/// Nonnegative least squares `min |A p - b|` over `p >= 0` by the active
/// set method, where column `j` of `A` is `(w_j, 1)` and `b = (v, 1)`.
/// Returns the weights and the final residual norm.
pub(crate) fn nnls(outputs: &[BlochVector], v: BlochVector) -> (Vec<f64>, f64) {
    let m = outputs.len();
    let col = |j: usize| [outputs[j].x, outputs[j].y, outputs[j].z, 1.0];
    let b = [v.x, v.y, v.z, 1.0];
    let mut x = vec![0.0_f64; m];
    let mut passive = vec![false; m];
    let residual_vec = |x: &[f64]| -> [f64; 4] {
        let mut r = b;
        for (j, &xj) in x.iter().enumerate() {
            let c = col(j);
            for k in 0..4 {
                r[k] -= c[k] * xj;
            }
        }
        r
    };
    let solve_passive = |passive: &[bool]| -> Vec<(usize, f64)> {
        let idx: Vec<usize> = (0..m).filter(|&j| passive[j]).collect();
        if idx.is_empty() {
            return Vec::new();
        }
        let a = DMatrix::from_fn(4, idx.len(), |r, c| col(idx[c])[r]);
        let rhs = DVector::from_column_slice(&b);
        let svd = a.svd(true, true);
        let smax = svd.singular_values.iter().fold(0.0_f64, |mx, &s| mx.max(s));
        let z = svd
            .solve(&rhs, 1e-12 * smax.max(f64::MIN_POSITIVE))
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        idx.into_iter().zip(z.iter().cloned()).collect()
    };
    for _ in 0..(3 * m + 10) {
        let r = residual_vec(&x);
        // most positive dual coordinate among the clamped columns
        let mut best: Option<(usize, f64)> = None;
        for (j, _) in passive.iter().enumerate().filter(|(_, &held)| !held) {
            let c = col(j);
            let wj: f64 = (0..4).map(|k| c[k] * r[k]).sum();
            if best.is_none_or(|(_, w0)| wj > w0) {
                best = Some((j, wj));
            }
        }
        match best {
            Some((j, wj)) if wj > 1e-12 => passive[j] = true,
            _ => break,
        }
        // inner loop: keep the passive solution feasible
        for _ in 0..(3 * m + 10) {
            let z = solve_passive(&passive);
            let negs: Vec<&(usize, f64)> = z.iter().filter(|(_, zi)| *zi <= 0.0).collect();
            if negs.is_empty() {
                for &(j, zj) in &z {
                    x[j] = zj;
                }
                break;
            }
            let alpha = negs
                .iter()
                .map(|&&(j, zj)| x[j] / (x[j] - zj))
                .fold(f64::INFINITY, f64::min);
            for &(j, zj) in &z {
                x[j] += alpha * (zj - x[j]);
                if x[j] <= 1e-14 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    let r = residual_vec(&x);
    let norm = r.iter().map(|c| c * c).sum::<f64>().sqrt();
    (x, norm)
}

/// Second intersection of the output surface with the ray from `w`
/// through `v`: the unique point `w' = v + c (v - w)`, `c > 0`, whose
/// input direction is again a unit vector. Returns `(c, w')`; `None`
/// when the ray leaves the surface only at `w` itself.
pub(crate) fn ray_partner(
    params: &ChannelParams,
    v: BlochVector,
    w: BlochVector,
) -> Option<(f64, BlochVector)> {
    let t = params.t();
    let lam = params.lambda();
    let va = v.to_array();
    let wa = w.to_array();
    let (mut a2, mut a1) = (0.0_f64, 0.0_f64);
    let mut a0 = -1.0_f64;
    for k in 0..3 {
        if lam[k].abs() > 1e-12 {
            let base = (va[k] - t[k]) / lam[k];
            let dir = (va[k] - wa[k]) / lam[k];
            a2 += dir * dir;
            a1 += 2.0 * base * dir;
            a0 += base * base;
        } else if (va[k] - t[k]).abs() > 1e-9 {
            // the ray leaves the affine hull of the image: no surface
            // point can lie on it
            return None;
        }
    }
    if a2 < 1e-18 {
        return None;
    }
    let disc = a1 * a1 - 4.0 * a2 * a0;
    if disc < 0.0 {
        return None;
    }
    let c = (-a1 + disc.sqrt()) / (2.0 * a2);
    if c <= 1e-12 {
        return None;
    }
    Some((c, v + (v - w) * c))
}

fn member(
    params: &ChannelParams,
    probability: f64,
    output: BlochVector,
) -> Result<EnsembleMember, SolverError> {
    Ok(EnsembleMember { probability, input: invert_channel(params, output)?, output })
}

/// The recorded average is the exact weighted combination of the items,
/// so identities that hinge on the average being consistent (Donald's
/// decomposition, the two Holevo forms) hold to round-off.
fn ensemble_of(items: Vec<EnsembleMember>) -> SignalEnsemble {
    let average_output = items
        .iter()
        .fold(BlochVector::ZERO, |acc, m| acc + m.output * m.probability);
    SignalEnsemble { items, average_output }
}

/// Rebuilds the optimal ensemble from a converged center and the set of
/// farthest surface points, solving `sum p_i w_i = v`, `sum p_i = 1`,
/// `p_i >= 0` and inverting the channel for the inputs. A center that is
/// not (numerically) in the convex hull of the maximizers signals an
/// unconverged solve and is reported as such. The returned average is the
/// exact combination of the members, which can differ from `v` by the
/// residual of the hull solve.
pub fn recover_ensemble(
    params: &ChannelParams,
    v: BlochVector,
    argmax_set: &[BlochVector],
) -> Result<SignalEnsemble, SolverError> {
    if argmax_set.is_empty() {
        return Err(SolverError::NotInHull(f64::INFINITY));
    }
    // degenerate optimum: the center itself is the single farthest point
    if argmax_set.len() == 1 && argmax_set[0].distance(v) < 1e-9 {
        return Ok(ensemble_of(vec![member(params, 1.0, argmax_set[0])?]));
    }
    let (mut weights, residual) = nnls(argmax_set, v);
    if residual <= 1e-6 {
        let mut support: Vec<usize> = (0..argmax_set.len())
            .filter(|&j| weights[j] > 1e-9)
            .collect();
        if support.len() > 4 {
            // four states always suffice; keep the heaviest and re-solve
            support.sort_by(|&a, &b| {
                weights[b].partial_cmp(&weights[a]).expect("finite weights")
            });
            support.truncate(4);
            support.sort_unstable();
            let trimmed: Vec<BlochVector> = support.iter().map(|&j| argmax_set[j]).collect();
            let (tw, tres) = nnls(&trimmed, v);
            if tres <= 1e-6 {
                weights = vec![0.0; argmax_set.len()];
                for (slot, &j) in support.iter().enumerate() {
                    weights[j] = tw[slot];
                }
                support.retain(|&j| weights[j] > 1e-9);
            } else {
                return Err(SolverError::NotInHull(tres));
            }
        }
        let total: f64 = support.iter().map(|&j| weights[j]).sum();
        let mut items = Vec::with_capacity(support.len());
        for &j in &support {
            items.push(member(params, weights[j] / total, argmax_set[j])?);
        }
        return Ok(ensemble_of(items));
    }
    // a lone representative of a symmetric maximizer family: pair it with
    // the surface point straight across the center
    let w = argmax_set[0];
    let dmax = argmax_set
        .iter()
        .map(|&wi| relative_entropy(wi, v).unwrap_or(f64::NEG_INFINITY))
        .fold(f64::NEG_INFINITY, f64::max);
    if let Some((c, partner)) = ray_partner(params, v, w) {
        let d_partner = relative_entropy(partner, v).unwrap_or(f64::NEG_INFINITY);
        if d_partner >= dmax - 1e-6 {
            let p_w = c / (1.0 + c);
            return Ok(ensemble_of(vec![
                member(params, p_w, w)?,
                member(params, 1.0 - p_w, partner)?,
            ]));
        }
    }
    Err(SolverError::NotInHull(residual))
}
