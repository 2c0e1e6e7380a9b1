//! Capacity solvers for qubit channels in the Bloch-ball picture.
//!
//! The product-state classical capacity of a channel equals the minimax
//! value
//!
//! `C1 = min_v max_w D(w || v)`
//!
//! where `w` ranges over the output surface and `v` over the ball. At the
//! optimum the candidate `v` is the average of an optimal signal ensemble
//! whose outputs all sit at distance `C1` from it. Three solvers cover the
//! channel zoo:
//!
//! * [`unital_capacity`]: channels that fix the maximally mixed state;
//!   `C1 = 1 - S(max_k |lambda_k|)` with an antipodal two-state ensemble.
//! * [`linear_capacity_axis_aligned`] / [`linear_capacity_general`]:
//!   channels whose image is a line segment; a closed form for the
//!   centered case and a one-dimensional equal-distance root otherwise.
//! * [`iterative_capacity`]: the general descent on `max_w D(w || v)`
//!   with ensemble bookkeeping, for full-dimensional ellipsoids.
//!
//! [`solve_auto`] dispatches among them; [`recover_ensemble`],
//! [`holevo_chi`] and [`max_relative_entropy_on_surface`] expose the
//! building blocks so results can be verified independently.

mod ensemble;
mod equalize;
mod iterative;
mod linear;
mod surface;
mod unital;

use bloch_core::{relative_entropy, von_neumann_entropy, BlochVector};
use channel_model::{invert_channel, orient_single_axis_to_z, AxisPermutation, ChannelParams};
use thiserror::Error;

pub use ensemble::recover_ensemble;
pub use iterative::iterative_capacity;
pub use linear::{linear_capacity_axis_aligned, linear_capacity_general};
pub use unital::unital_capacity;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("channel is not unital: |t| = {0:.3e}")]
    NotUnital(f64),
    #[error("channel image is not a segment on the z-axis: {0}")]
    NotSegment(&'static str),
    #[error("segment is degenerate: lambda_z = 0")]
    DegenerateSegment,
    #[error("equal-distance residual has one sign across the whole segment")]
    NoBracket,
    #[error("segment endpoint is pure; move it inside the ball")]
    EndpointPure,
    #[error("channel image is a single point; nothing to optimize")]
    PointChannel,
    #[error("iteration budget exhausted; best capacity so far {:.6}", .0.capacity_bits)]
    MaxItersExceeded(Box<CapacityResult>),
    #[error("center is not in the convex hull of the maximizers (residual {0:.3e})")]
    NotInHull(f64),
    #[error("bad solver configuration: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Entropy(#[from] bloch_core::BlochError),
    #[error(transparent)]
    Channel(#[from] channel_model::ChannelError),
}

/// Which solver produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    Unital,
    LinearClosedForm,
    LinearTranscendental,
    Iterative,
}

/// One signal state: its weight, the pure input on the Bloch sphere, and
/// the channel output.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleMember {
    pub probability: f64,
    pub input: BlochVector,
    pub output: BlochVector,
}

/// A weighted set of signal states together with its average output.
#[derive(Debug, Clone)]
pub struct SignalEnsemble {
    pub items: Vec<EnsembleMember>,
    pub average_output: BlochVector,
}

impl SignalEnsemble {
    /// Checks the defining constraints: weights form a distribution, the
    /// recorded average matches the weighted outputs, inputs are pure.
    pub fn validate(&self) -> Result<(), SolverError> {
        let mut total = 0.0;
        let mut avg = BlochVector::ZERO;
        for item in &self.items {
            if item.probability < -1e-12 {
                return Err(SolverError::BadConfig("negative ensemble probability"));
            }
            if (item.input.norm() - 1.0).abs() > 1e-9 {
                return Err(SolverError::BadConfig("ensemble input is not pure"));
            }
            total += item.probability;
            avg = avg + item.output * item.probability;
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(SolverError::BadConfig("ensemble probabilities do not sum to 1"));
        }
        if avg.distance(self.average_output) > 1e-8 {
            return Err(SolverError::BadConfig("average output mismatch"));
        }
        Ok(())
    }
}

/// Solver output: the capacity in bits, the optimal center, the ensemble
/// achieving it, and diagnostics.
///
/// `max_equal_distance_residual` is the largest deviation of a member's
/// distance `D(output_i || average)` from `capacity_bits`; at a true
/// optimum every member sits exactly at distance `C1`.
#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub capacity_bits: f64,
    pub average_output: BlochVector,
    pub ensemble: SignalEnsemble,
    pub iterations: usize,
    pub max_equal_distance_residual: f64,
    pub method: SolverMethod,
}

/// Tuning knobs for [`iterative_capacity`].
#[derive(Debug, Clone, Copy)]
pub struct IterConfig {
    /// Initial step length toward a farthest surface point, in (0, 1).
    pub step_epsilon: f64,
    /// Multiplier applied to the step whenever it fails to descend.
    pub shrink_factor: f64,
    /// Coarse surface grid resolution (polar x azimuth).
    pub surface_grid: usize,
    /// Golden-section rounds when refining a grid maximum.
    pub refine_iters: usize,
    /// Stop once the farthest distance settles within this tolerance.
    pub tol_dmax: f64,
    /// Hard cap on descent steps.
    pub max_iters: usize,
    /// Seed for the random choice among tied maximizers.
    pub seed: u64,
}

impl Default for IterConfig {
    fn default() -> Self {
        Self {
            step_epsilon: 0.5,
            shrink_factor: 0.5,
            surface_grid: 96,
            refine_iters: 40,
            tol_dmax: 1e-10,
            max_iters: 10_000,
            seed: 0,
        }
    }
}

impl IterConfig {
    pub(crate) fn check(&self) -> Result<(), SolverError> {
        if !(self.step_epsilon > 0.0 && self.step_epsilon < 1.0) {
            return Err(SolverError::BadConfig("step_epsilon must lie in (0, 1)"));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(SolverError::BadConfig("shrink_factor must lie in (0, 1)"));
        }
        if self.tol_dmax <= 0.0 {
            return Err(SolverError::BadConfig("tol_dmax must be positive"));
        }
        if self.surface_grid < 8 {
            return Err(SolverError::BadConfig("surface_grid below 8 cannot localize maxima"));
        }
        if self.refine_iters == 0 || self.max_iters == 0 {
            return Err(SolverError::BadConfig("iteration counts must be positive"));
        }
        Ok(())
    }
}

/// Farthest relative-entropy distance from `v` over the output surface,
/// plus every surface point attaining it (within 1e-9, deduplicated at
/// 1e-6). Coarse grid sweep followed by golden-section refinement.
pub fn max_relative_entropy_on_surface(
    params: &ChannelParams,
    v: BlochVector,
) -> (f64, Vec<BlochVector>) {
    let cfg = IterConfig::default();
    let sf = surface::Surface::new(params, cfg.surface_grid, cfg.refine_iters);
    let ms = sf.max_set(v);
    (ms.dmax, ms.args.iter().map(|a| a.0).collect())
}

/// Holevo quantity of an ensemble in bits,
/// `S(average) - sum_i p_i S(output_i)`.
///
/// Radii are clamped into [0, 1], so any finite ensemble evaluates; for
/// solver outputs this equals `sum_i p_i D(output_i || average)` to
/// addition round-off.
pub fn holevo_chi(ensemble: &SignalEnsemble) -> f64 {
    let s = |w: BlochVector| {
        von_neumann_entropy(w.norm().min(1.0)).expect("clamped radius is in domain")
    };
    let avg_entropy = s(ensemble.average_output);
    let mean_entropy: f64 = ensemble
        .items
        .iter()
        .map(|m| m.probability * s(m.output))
        .sum();
    avg_entropy - mean_entropy
}

pub(crate) fn equal_distance_residual(ensemble: &SignalEnsemble, capacity: f64) -> f64 {
    ensemble
        .items
        .iter()
        .map(|m| {
            relative_entropy(m.output, ensemble.average_output)
                .map(|d| (d - capacity).abs())
                .unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max)
}

fn permute_result(mut result: CapacityResult, perm: &AxisPermutation) -> CapacityResult {
    result.average_output = perm.unapply(result.average_output);
    result.ensemble.average_output = perm.unapply(result.ensemble.average_output);
    for item in &mut result.ensemble.items {
        item.input = perm.unapply(item.input);
        item.output = perm.unapply(item.output);
    }
    result
}

/// Capacity of a channel whose image is a single point: zero, carried by
/// a one-state ensemble.
fn point_channel_result(params: &ChannelParams) -> Result<CapacityResult, SolverError> {
    let output = params.translation();
    let input = invert_channel(params, output)?;
    let ensemble = SignalEnsemble {
        items: vec![EnsembleMember { probability: 1.0, input, output }],
        average_output: output,
    };
    Ok(CapacityResult {
        capacity_bits: 0.0,
        average_output: output,
        ensemble,
        iterations: 0,
        max_equal_distance_residual: 0.0,
        method: SolverMethod::Iterative,
    })
}

/// Capacity of a channel whose image is a segment along any single axis:
/// relabels that axis to z, runs the matching segment solver, and maps
/// the result back to the original axes.
pub fn linear_capacity(params: &ChannelParams) -> Result<CapacityResult, SolverError> {
    let (oriented, perm) = orient_single_axis_to_z(params)
        .ok_or(SolverError::NotSegment("channel must have exactly one nonzero scaling"))?;
    let t = oriented.t();
    let result = if t[0].abs() <= 1e-12 && t[1].abs() <= 1e-12 {
        linear_capacity_axis_aligned(&oriented)?
    } else {
        linear_capacity_general(&oriented)?
    };
    Ok(permute_result(result, &perm))
}

/// Picks the right solver for the channel shape: closed form for unital
/// channels, the segment solvers when exactly one scaling survives (after
/// relabeling that axis to z), the iterative descent otherwise.
pub fn solve_auto(
    params: &ChannelParams,
    cfg: &IterConfig,
) -> Result<CapacityResult, SolverError> {
    if params.is_point_channel() {
        return point_channel_result(params);
    }
    if params.is_unital() {
        return unital_capacity(params);
    }
    if orient_single_axis_to_z(params).is_some() {
        return linear_capacity(params);
    }
    iterative_capacity(params, cfg)
}

/// Capacity of a named channel family over a parameter grid, using the
/// cheapest applicable solver per point.
pub fn capacity_sweep(
    kind: channel_model::NamedKind,
    xs: &[f64],
) -> Result<Vec<(f64, f64)>, SolverError> {
    let cfg = IterConfig::default();
    xs.iter()
        .map(|&x| {
            let p = channel_model::named_channel(channel_model::NamedChannelSpec { kind, x })?;
            let c = if p.is_point_channel() {
                0.0
            } else {
                solve_auto(&p, &cfg)?.capacity_bits
            };
            Ok((x, c))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert!(IterConfig::default().check().is_ok());
        let mut cfg = IterConfig { step_epsilon: 1.5, ..IterConfig::default() };
        assert!(cfg.check().is_err());
        cfg.step_epsilon = 0.5;
        cfg.tol_dmax = 0.0;
        assert!(cfg.check().is_err());
    }

    #[test]
    fn ensemble_validation() {
        let w = BlochVector::new(0.0, 0.0, 0.5);
        let good = SignalEnsemble {
            items: vec![
                EnsembleMember {
                    probability: 0.5,
                    input: BlochVector::new(0.0, 0.0, 1.0),
                    output: w,
                },
                EnsembleMember {
                    probability: 0.5,
                    input: BlochVector::new(0.0, 0.0, -1.0),
                    output: -w,
                },
            ],
            average_output: BlochVector::ZERO,
        };
        assert!(good.validate().is_ok());
        let mut bad = good.clone();
        bad.average_output = w;
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.items[0].probability = 0.7;
        assert!(bad.validate().is_err());
        let mut bad = good;
        bad.items[0].input = w;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn chi_of_antipodal_pair() {
        let w = BlochVector::new(0.0, 0.0, 0.5);
        let ensemble = SignalEnsemble {
            items: vec![
                EnsembleMember {
                    probability: 0.5,
                    input: BlochVector::new(0.0, 0.0, 1.0),
                    output: w,
                },
                EnsembleMember {
                    probability: 0.5,
                    input: BlochVector::new(0.0, 0.0, -1.0),
                    output: -w,
                },
            ],
            average_output: BlochVector::ZERO,
        };
        let chi = holevo_chi(&ensemble);
        let direct = 1.0 - von_neumann_entropy(0.5).unwrap();
        assert!((chi - direct).abs() <= 1e-15);
        // single state carries nothing
        let single = SignalEnsemble {
            items: vec![EnsembleMember {
                probability: 1.0,
                input: BlochVector::new(0.0, 0.0, 1.0),
                output: w,
            }],
            average_output: w,
        };
        assert_eq!(holevo_chi(&single), 0.0);
    }

    #[test]
    fn point_channels_have_zero_capacity() {
        let p = ChannelParams::new([0.0, 0.0, 0.3], [0.0, 0.0, 0.0]).unwrap();
        let r = solve_auto(&p, &IterConfig::default()).unwrap();
        assert_eq!(r.capacity_bits, 0.0);
        assert_eq!(r.ensemble.items.len(), 1);
        assert!(r.ensemble.validate().is_ok());
    }
}
