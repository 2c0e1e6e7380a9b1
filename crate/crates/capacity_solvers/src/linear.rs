//! Capacity of channels whose image is a line segment.
//!
//! With a single surviving scaling (taken on z) the output set is the
//! segment between `W+ = (t_x, t_y, t_z + lambda_z)` and
//! `W- = (t_x, t_y, t_z - lambda_z)`, the optimal ensemble uses exactly
//! those endpoints, and the optimal center is the point of the segment
//! equidistant from both in relative entropy. On the z-axis that point
//! has the closed form
//!
//! `q = tanh( ln2 * (S(|z_lo|) - S(|z_hi|)) / (z_hi - z_lo) )`,
//!
//! a signed rewrite of the endpoint-radius formula that holds on both
//! sides of the center. Off axis the equal-distance condition is a
//! well-behaved one-dimensional root problem, solved by bisection.

use bloch_core::{relative_entropy, von_neumann_entropy, BlochVector};
use channel_model::{invert_channel, ChannelParams};
use std::f64::consts::LN_2;

use crate::{
    equal_distance_residual, CapacityResult, EnsembleMember, SignalEnsemble, SolverError,
    SolverMethod,
};

fn segment_lambda(params: &ChannelParams) -> Result<f64, SolverError> {
    let lam = params.lambda();
    if lam[0].abs() > 1e-12 || lam[1].abs() > 1e-12 {
        return Err(SolverError::NotSegment(
            "x and y scalings must vanish (relabel the axes first)",
        ));
    }
    if lam[2].abs() <= 1e-12 {
        return Err(SolverError::DegenerateSegment);
    }
    Ok(lam[2])
}

fn endpoint_members(
    params: &ChannelParams,
    p_plus: f64,
    w_plus: BlochVector,
    w_minus: BlochVector,
) -> Result<Vec<EnsembleMember>, SolverError> {
    Ok(vec![
        EnsembleMember {
            probability: p_plus,
            input: invert_channel(params, w_plus)?,
            output: w_plus,
        },
        EnsembleMember {
            probability: 1.0 - p_plus,
            input: invert_channel(params, w_minus)?,
            output: w_minus,
        },
    ])
}

/// Closed-form capacity for a segment centered on the z-axis
/// (`t_x = t_y = 0`).
pub fn linear_capacity_axis_aligned(
    params: &ChannelParams,
) -> Result<CapacityResult, SolverError> {
    let t = params.t();
    if t[0].abs() > 1e-12 || t[1].abs() > 1e-12 {
        return Err(SolverError::NotSegment("segment must lie on the z-axis"));
    }
    let lz = segment_lambda(params)?;
    let z_plus = t[2] + lz;
    let z_minus = t[2] - lz;
    let (hi, lo) = if z_plus >= z_minus { (z_plus, z_minus) } else { (z_minus, z_plus) };
    let s_hi = von_neumann_entropy(hi.abs())?;
    let s_lo = von_neumann_entropy(lo.abs())?;
    let q = (LN_2 * (s_lo - s_hi) / (hi - lo)).tanh();
    let v = BlochVector::new(0.0, 0.0, q);
    let w_plus = BlochVector::new(0.0, 0.0, z_plus);
    let w_minus = BlochVector::new(0.0, 0.0, z_minus);
    let capacity = relative_entropy(w_plus, v)?;
    let p_plus = (q - z_minus) / (z_plus - z_minus);
    let ensemble = SignalEnsemble {
        items: endpoint_members(params, p_plus, w_plus, w_minus)?,
        average_output: v,
    };
    let residual = equal_distance_residual(&ensemble, capacity);
    Ok(CapacityResult {
        capacity_bits: capacity,
        average_output: v,
        ensemble,
        iterations: 0,
        max_equal_distance_residual: residual,
        method: SolverMethod::LinearClosedForm,
    })
}

/// Capacity for a general segment parallel to the z-axis. The center is
/// `V(beta) = (t_x, t_y, t_z + beta lambda_z)` with `beta` the root of
/// the equal-distance condition `D(W+ || V) = D(W- || V)`; the endpoint
/// probabilities follow as `(1 +- beta) / 2`.
pub fn linear_capacity_general(params: &ChannelParams) -> Result<CapacityResult, SolverError> {
    let t = params.t();
    let lz = segment_lambda(params)?;
    let w_plus = BlochVector::new(t[0], t[1], t[2] + lz);
    let w_minus = BlochVector::new(t[0], t[1], t[2] - lz);
    if w_plus.norm() >= 1.0 - 1e-12 || w_minus.norm() >= 1.0 - 1e-12 {
        return Err(SolverError::EndpointPure);
    }
    let g = |beta: f64| -> f64 {
        let v = BlochVector::new(t[0], t[1], t[2] + beta * lz);
        let d_plus =
            relative_entropy(w_plus, v).expect("segment interior stays inside the ball");
        let d_minus =
            relative_entropy(w_minus, v).expect("segment interior stays inside the ball");
        d_plus - d_minus
    };
    let mut a = -1.0 + 1e-9;
    let mut b = 1.0 - 1e-9;
    let mut ga = g(a);
    let gb = g(b);
    if ga == 0.0 {
        b = a;
    } else if gb == 0.0 {
        a = b;
    } else if ga.signum() == gb.signum() {
        return Err(SolverError::NoBracket);
    }
    let mut beta = 0.5 * (a + b);
    let mut iterations = 0;
    for _ in 0..200 {
        iterations += 1;
        beta = 0.5 * (a + b);
        let gm = g(beta);
        if gm.abs() <= 1e-12 || (b - a) < 1e-16 {
            break;
        }
        if gm.signum() == ga.signum() {
            a = beta;
            ga = gm;
        } else {
            b = beta;
        }
    }
    let v = BlochVector::new(t[0], t[1], t[2] + beta * lz);
    let capacity = relative_entropy(w_plus, v)?;
    let p_plus = 0.5 * (1.0 + beta);
    let ensemble = SignalEnsemble {
        items: endpoint_members(params, p_plus, w_plus, w_minus)?,
        average_output: v,
    };
    let residual = equal_distance_residual(&ensemble, capacity);
    debug_assert!(residual <= 1e-9, "bisection left residual {residual}");
    Ok(CapacityResult {
        capacity_bits: capacity,
        average_output: v,
        ensemble,
        iterations,
        max_equal_distance_residual: residual,
        method: SolverMethod::LinearTranscendental,
    })
}
