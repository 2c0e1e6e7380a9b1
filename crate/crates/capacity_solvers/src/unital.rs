//! Closed-form capacity for unital channels.
//!
//! A unital channel (`t = 0`) maps the ball onto an ellipsoid centered at
//! the origin. The best average output is the origin itself: reflecting
//! any candidate ensemble through the origin leaves the channel image
//! invariant and averaging the two can only help. With `v = 0` the
//! distance reduces to `1 - S(|w|)`, maximized at the ends of the longest
//! semi-axis, so
//!
//! `C1 = 1 - S(max_k |lambda_k|)`
//!
//! achieved by the two antipodal inputs along that axis with equal
//! weights. When several axes tie, any of them works; the lowest index is
//! chosen so results are reproducible.

use bloch_core::{von_neumann_entropy, BlochVector};
use channel_model::ChannelParams;

use crate::{
    equal_distance_residual, CapacityResult, EnsembleMember, SignalEnsemble, SolverError,
    SolverMethod,
};

/// Capacity of a unital channel (`t = 0` within 1e-12).
pub fn unital_capacity(params: &ChannelParams) -> Result<CapacityResult, SolverError> {
    let shift = params.translation().norm();
    if shift > 1e-12 {
        return Err(SolverError::NotUnital(shift));
    }
    let lam = params.lambda();
    let mut axis = 0;
    for k in 1..3 {
        if lam[k].abs() > lam[axis].abs() {
            axis = k;
        }
    }
    let capacity = 1.0 - von_neumann_entropy(lam[axis].abs())?;
    let mut unit = [0.0; 3];
    unit[axis] = 1.0;
    let input = BlochVector::from_array(unit);
    let output = input * lam[axis];
    let ensemble = SignalEnsemble {
        items: vec![
            EnsembleMember { probability: 0.5, input, output },
            EnsembleMember { probability: 0.5, input: -input, output: -output },
        ],
        average_output: BlochVector::ZERO,
    };
    let residual = equal_distance_residual(&ensemble, capacity);
    Ok(CapacityResult {
        capacity_bits: capacity,
        average_output: BlochVector::ZERO,
        ensemble,
        iterations: 0,
        max_equal_distance_residual: residual,
        method: SolverMethod::Unital,
    })
}
