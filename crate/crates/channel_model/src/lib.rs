//! Affine representation of qubit channels on the Bloch ball.
//!
//! Every qubit channel can be written, in a suitable product basis, as the
//! affine map
//!
//! `out_k = t_k + lambda_k * in_k`,  k = x, y, z,
//!
//! which carries the unit sphere onto an ellipsoid with semi-axes
//! `|lambda_k|` centered at `t`. This crate owns that six-parameter form
//! ([`ChannelParams`]), the three named example channels (depolarizing,
//! two-Pauli, amplitude damping) in both affine and operator-sum form, the
//! conversion from a Kraus set to the affine parameters, and the JSON spec
//! format the CLI consumes.
//!
//! Validation sticks to necessary conditions: `|lambda_k| <= 1`,
//! `|t_k| + |lambda_k| <= 1` per axis, and a numerical check that a sample
//! of the output ellipsoid stays inside the unit ball. The full complete
//! positivity inequalities are out of scope here; channels built from a
//! complete Kraus set satisfy them by construction.

use bloch_core::BlochVector;
use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

/// Tolerance for treating a scaling as zero (degenerate ellipsoid axis).
pub const AXIS_TOL: f64 = 1e-12;

/// Tolerance for the preimage consistency check on degenerate axes.
pub const PREIMAGE_TOL: f64 = 1e-9;

/// Number of sphere samples used by the numerical image-norm check.
const IMAGE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("scaling lambda_{axis} = {value} has magnitude above 1")]
    ScalingTooLarge { axis: usize, value: f64 },
    #[error("|t_{axis}| + |lambda_{axis}| = {sum} exceeds 1, ellipsoid leaves the ball")]
    AxisSumTooLarge { axis: usize, sum: f64 },
    #[error("channel image leaves the Bloch ball (sampled output norm {norm})")]
    ImageOutsideBall { norm: f64 },
    #[error("no preimage: output component {component} on the collapsed axis {axis} differs from t")]
    NoPreimage { axis: usize, component: f64 },
    #[error("not reachable: required input component magnitude {magnitude} exceeds 1")]
    NotReachable { magnitude: f64 },
    #[error("channel parameter {0} is outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("Kraus set is not trace preserving (completeness defect {0:.3e})")]
    IncompleteKraus(f64),
    #[error("Kraus channel is not diagonal in this basis (off-diagonal magnitude {0:.3e}); rotate the operators first")]
    NotDiagonal(f64),
    #[error("channel spec: {0}")]
    BadSpec(String),
}

/// Six-parameter affine form of a qubit channel: translation `t` and
/// per-axis scalings `lambda` (signs allowed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    t: [f64; 3],
    lambda: [f64; 3],
}

impl ChannelParams {
    /// Validates the necessary ellipsoid-in-ball conditions and a sampled
    /// image-norm check before accepting the parameters.
    pub fn new(t: [f64; 3], lambda: [f64; 3]) -> Result<Self, ChannelError> {
        for k in 0..3 {
            if lambda[k].abs() > 1.0 + bloch_core::NORM_TOL {
                return Err(ChannelError::ScalingTooLarge { axis: k, value: lambda[k] });
            }
            let sum = t[k].abs() + lambda[k].abs();
            if sum > 1.0 + bloch_core::NORM_TOL {
                return Err(ChannelError::AxisSumTooLarge { axis: k, sum });
            }
        }
        let p = Self { t, lambda };
        // deterministic Fibonacci-lattice sample of the output surface
        let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
        for i in 0..IMAGE_SAMPLES {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / IMAGE_SAMPLES as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let u = BlochVector::new(rho * phi.cos(), rho * phi.sin(), z);
            let norm = apply_channel(&p, u).norm();
            if norm > 1.0 + bloch_core::NORM_TOL {
                return Err(ChannelError::ImageOutsideBall { norm });
            }
        }
        Ok(p)
    }

    pub fn t(&self) -> [f64; 3] {
        self.t
    }

    pub fn lambda(&self) -> [f64; 3] {
        self.lambda
    }

    pub fn translation(&self) -> BlochVector {
        BlochVector::from_array(self.t)
    }

    /// True when the channel fixes the maximally mixed state (`t = 0`).
    pub fn is_unital(&self) -> bool {
        self.t.iter().all(|c| c.abs() <= bloch_core::NORM_TOL)
    }

    /// Indices of the axes with nonzero scaling.
    pub fn nonzero_axes(&self) -> Vec<usize> {
        (0..3).filter(|&k| self.lambda[k].abs() > AXIS_TOL).collect()
    }

    /// True when every scaling vanishes, so the image is the single
    /// point `t`.
    pub fn is_point_channel(&self) -> bool {
        self.nonzero_axes().is_empty()
    }
}

/// Forward affine action `out_k = t_k + lambda_k in_k`.
pub fn apply_channel(p: &ChannelParams, w_in: BlochVector) -> BlochVector {
    BlochVector::new(
        p.t[0] + p.lambda[0] * w_in.x,
        p.t[1] + p.lambda[1] * w_in.y,
        p.t[2] + p.lambda[2] * w_in.z,
    )
}

/// Output surface point for a unit input `direction` (the forward map
/// restricted to the sphere).
pub fn surface_point(p: &ChannelParams, direction: BlochVector) -> BlochVector {
    apply_channel(p, direction)
}

/// Componentwise inverse `in_k = (out_k - t_k) / lambda_k`.
///
/// On collapsed axes (`lambda_k = 0`) the output must already sit at `t_k`
/// (within `PREIMAGE_TOL`), and the free input component is chosen to make
/// the preimage pure when possible: the norm deficit is assigned to the
/// first collapsed axis, further free components are 0. Surface outputs
/// therefore invert to unit-norm inputs.
pub fn invert_channel(p: &ChannelParams, w_out: BlochVector) -> Result<BlochVector, ChannelError> {
    let out = w_out.to_array();
    let mut input = [0.0; 3];
    let mut fixed_norm2 = 0.0;
    let mut first_free: Option<usize> = None;
    for k in 0..3 {
        if p.lambda[k].abs() <= AXIS_TOL {
            if (out[k] - p.t[k]).abs() > PREIMAGE_TOL {
                return Err(ChannelError::NoPreimage { axis: k, component: out[k] });
            }
            first_free.get_or_insert(k);
        } else {
            let c = (out[k] - p.t[k]) / p.lambda[k];
            if c.abs() > 1.0 + PREIMAGE_TOL {
                return Err(ChannelError::NotReachable { magnitude: c.abs() });
            }
            input[k] = c.clamp(-1.0, 1.0);
            fixed_norm2 += input[k] * input[k];
        }
    }
    if fixed_norm2 > 1.0 + PREIMAGE_TOL {
        return Err(ChannelError::NotReachable { magnitude: fixed_norm2.sqrt() });
    }
    if let Some(k) = first_free {
        // deficits at round-off scale would purify into a spurious 1e-8
        // component through the square root; leave them be
        let deficit = 1.0 - fixed_norm2.min(1.0);
        if deficit > 1e-12 {
            input[k] = deficit.sqrt();
        }
    }
    Ok(BlochVector::from_array(input))
}

/// The three named example channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedKind {
    Depolarizing,
    TwoPauli,
    AmplitudeDamping,
}

impl NamedKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NamedKind::Depolarizing => "depolarizing",
            NamedKind::TwoPauli => "two_pauli",
            NamedKind::AmplitudeDamping => "amplitude_damping",
        }
    }
}

/// A named channel plus its single parameter in `[0, 1]` (the damping
/// channel reads `x` as the decay parameter xi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NamedChannelSpec {
    pub kind: NamedKind,
    pub x: f64,
}

/// Affine parameters of a named channel.
///
/// * depolarizing: `t = 0`, `lambda_k = (4x - 1)/3`,
/// * two-Pauli: `t = 0`, `lambda_x = lambda_y = x`, `lambda_z = 2x - 1`,
/// * amplitude damping: `t = (0, 0, 1 - xi)`,
///   `lambda = (sqrt(xi), sqrt(xi), xi)` (decay toward the north pole).
pub fn named_channel(spec: NamedChannelSpec) -> Result<ChannelParams, ChannelError> {
    if !(0.0..=1.0).contains(&spec.x) {
        return Err(ChannelError::ParameterOutOfRange(spec.x));
    }
    let x = spec.x;
    let (t, lambda) = match spec.kind {
        NamedKind::Depolarizing => {
            let l = (4.0 * x - 1.0) / 3.0;
            ([0.0; 3], [l, l, l])
        }
        NamedKind::TwoPauli => ([0.0; 3], [x, x, 2.0 * x - 1.0]),
        NamedKind::AmplitudeDamping => {
            let s = x.sqrt();
            ([0.0, 0.0, 1.0 - x], [s, s, x])
        }
    };
    ChannelParams::new(t, lambda)
}

/// Operator-sum form: a list of 2x2 complex Kraus matrices `A_i` with
/// `sum_i A_i^dag A_i = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    pub ops: Vec<[[Complex64; 2]; 2]>,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn ci(im: f64) -> Complex64 {
    Complex64::new(0.0, im)
}

impl KrausSet {
    /// Largest entry of `sum_i A_i^dag A_i - I`.
    pub fn completeness_defect(&self) -> f64 {
        let mut acc = [[Complex64::new(0.0, 0.0); 2]; 2];
        for a in &self.ops {
            for i in 0..2 {
                for j in 0..2 {
                    // (A^dag A)_{ij} = sum_k conj(A_{ki}) A_{kj}
                    acc[i][j] += a[0][i].conj() * a[0][j] + a[1][i].conj() * a[1][j];
                }
            }
        }
        let mut defect: f64 = 0.0;
        for (i, row) in acc.iter().enumerate() {
            for (j, entry) in row.iter().enumerate() {
                let expect = if i == j { c(1.0) } else { c(0.0) };
                defect = defect.max((entry - expect).norm());
            }
        }
        defect
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let defect = self.completeness_defect();
        if defect > bloch_core::EQ_TOL {
            Err(ChannelError::IncompleteKraus(defect))
        } else {
            Ok(())
        }
    }
}

/// Kraus matrices of a named channel.
///
/// * depolarizing: `sqrt(x) I` and `sqrt((1-x)/3) sigma_k` for each Pauli,
/// * two-Pauli: `sqrt(x) I`, `sqrt((1-x)/2) sigma_x`, `sqrt((1-x)/2) sigma_y`,
/// * amplitude damping: `[[1, 0], [0, sqrt(xi)]]` and
///   `[[0, sqrt(1 - xi)], [0, 0]]`, the set whose affine image matches
///   `named_channel` (excited population decays toward the north pole).
pub fn named_kraus(spec: NamedChannelSpec) -> Result<KrausSet, ChannelError> {
    if !(0.0..=1.0).contains(&spec.x) {
        return Err(ChannelError::ParameterOutOfRange(spec.x));
    }
    let x = spec.x;
    let zero = c(0.0);
    let ops = match spec.kind {
        NamedKind::Depolarizing => {
            let a = x.sqrt();
            let b = ((1.0 - x) / 3.0).sqrt();
            vec![
                [[c(a), zero], [zero, c(a)]],
                [[zero, c(b)], [c(b), zero]],       // sigma_x
                [[zero, ci(-b)], [ci(b), zero]],    // sigma_y
                [[c(b), zero], [zero, c(-b)]],      // sigma_z
            ]
        }
        NamedKind::TwoPauli => {
            let a = x.sqrt();
            let b = ((1.0 - x) / 2.0).sqrt();
            vec![
                [[c(a), zero], [zero, c(a)]],
                [[zero, c(b)], [c(b), zero]],       // sigma_x
                [[zero, ci(-b)], [ci(b), zero]],    // sigma_y
            ]
        }
        NamedKind::AmplitudeDamping => {
            vec![
                [[c(1.0), zero], [zero, c(x.sqrt())]],
                [[zero, c((1.0 - x).sqrt())], [zero, zero]],
            ]
        }
    };
    let set = KrausSet { ops };
    debug_assert!(set.completeness_defect() <= 1e-12);
    Ok(set)
}

fn kraus_apply(ops: &[[[Complex64; 2]; 2]], rho: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for a in ops {
        // A rho A^dag
        let mut ar = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                ar[i][j] = a[i][0] * rho[0][j] + a[i][1] * rho[1][j];
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += ar[i][0] * a[j][0].conj() + ar[i][1] * a[j][1].conj();
            }
        }
    }
    out
}

/// Affine parameters of a Kraus channel, obtained by applying the channel
/// to the Pauli basis. The linear part must come out diagonal (the affine
/// form is basis dependent and this crate does not guess rotations); the
/// translation is the image of the maximally mixed state.
pub fn kraus_to_krsw(k: &KrausSet) -> Result<ChannelParams, ChannelError> {
    k.validate()?;
    let zero = Complex64::new(0.0, 0.0);
    let paulis = [
        [[zero, c(1.0)], [c(1.0), zero]],
        [[zero, ci(-1.0)], [ci(1.0), zero]],
        [[c(1.0), zero], [zero, c(-1.0)]],
    ];
    // Bloch components of a (traceless or not) Hermitian matrix image
    let bloch_of = |m: [[Complex64; 2]; 2]| -> [f64; 3] {
        [
            (m[0][1] + m[1][0]).re,
            -(m[0][1] - m[1][0]).im,
            (m[0][0] - m[1][1]).re,
        ]
    };
    let half_id = [[c(0.5), zero], [zero, c(0.5)]];
    let t = bloch_of(kraus_apply(&k.ops, half_id));
    let mut linear = [[0.0; 3]; 3];
    for (col, sigma) in paulis.iter().enumerate() {
        // E(sigma_col)/... image Bloch components give column `col`,
        // halved because sigma has "radius" 2 in this parameterization
        let img = bloch_of(kraus_apply(&k.ops, *sigma));
        for row in 0..3 {
            linear[row][col] = 0.5 * img[row];
        }
    }
    let mut off: f64 = 0.0;
    for (i, row) in linear.iter().enumerate() {
        for (j, &entry) in row.iter().enumerate() {
            if i != j {
                off = off.max(entry.abs());
            }
        }
    }
    if off > 1e-9 {
        return Err(ChannelError::NotDiagonal(off));
    }
    ChannelParams::new(t, [linear[0][0], linear[1][1], linear[2][2]])
}

/// Axis relabeling that moves a chosen axis to z, used to put linear
/// channels in the solver's standard orientation. `map[i]` is the original
/// axis now sitting at position `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisPermutation {
    map: [usize; 3],
}

impl AxisPermutation {
    /// Identity relabeling.
    pub fn identity() -> Self {
        Self { map: [0, 1, 2] }
    }

    /// Relabeling that brings `axis` to the z slot (cyclic, so handedness
    /// is preserved).
    pub fn axis_to_z(axis: usize) -> Self {
        match axis {
            0 => Self { map: [1, 2, 0] },
            1 => Self { map: [2, 0, 1] },
            _ => Self { map: [0, 1, 2] },
        }
    }

    pub fn apply_array(&self, a: [f64; 3]) -> [f64; 3] {
        [a[self.map[0]], a[self.map[1]], a[self.map[2]]]
    }

    pub fn unapply_array(&self, a: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[self.map[i]] = a[i];
        }
        out
    }

    pub fn apply(&self, w: BlochVector) -> BlochVector {
        BlochVector::from_array(self.apply_array(w.to_array()))
    }

    pub fn unapply(&self, w: BlochVector) -> BlochVector {
        BlochVector::from_array(self.unapply_array(w.to_array()))
    }

    /// The channel expressed in the relabeled axes.
    pub fn apply_params(&self, p: &ChannelParams) -> ChannelParams {
        ChannelParams {
            t: self.apply_array(p.t),
            lambda: self.apply_array(p.lambda),
        }
    }
}

/// For a channel with exactly one nonzero scaling, returns the channel
/// relabeled so that scaling sits on z, plus the relabeling used.
pub fn orient_single_axis_to_z(p: &ChannelParams) -> Option<(ChannelParams, AxisPermutation)> {
    let axes = p.nonzero_axes();
    if axes.len() != 1 {
        return None;
    }
    let perm = AxisPermutation::axis_to_z(axes[0]);
    Some((perm.apply_params(p), perm))
}

/// On-disk channel description. Three shapes are accepted:
///
/// ```json
/// {"type": "krsw", "t": [0.0, 0.0, 0.2], "lambda": [0.0, 0.0, 0.4]}
/// {"type": "named", "name": "amplitude_damping", "x": 0.36}
/// {"type": "kraus", "ops": [[[[1.0, 0.0], [0.0, 0.0]], ...]]}
/// ```
///
/// Kraus entries are `[re, im]` pairs in row-major 2x2 order.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Krsw { t: [f64; 3], lambda: [f64; 3] },
    Named { name: NamedKind, x: f64 },
    Kraus { ops: Vec<[[[f64; 2]; 2]; 2]> },
}

impl ChannelSpec {
    pub fn from_json(json: &str) -> Result<Self, ChannelError> {
        serde_json::from_str(json).map_err(|e| ChannelError::BadSpec(e.to_string()))
    }

    /// Validated affine parameters of the described channel.
    pub fn to_params(&self) -> Result<ChannelParams, ChannelError> {
        match self {
            ChannelSpec::Krsw { t, lambda } => ChannelParams::new(*t, *lambda),
            ChannelSpec::Named { name, x } => {
                named_channel(NamedChannelSpec { kind: *name, x: *x })
            }
            ChannelSpec::Kraus { ops } => {
                let ops = ops
                    .iter()
                    .map(|m| {
                        [
                            [
                                Complex64::new(m[0][0][0], m[0][0][1]),
                                Complex64::new(m[0][1][0], m[0][1][1]),
                            ],
                            [
                                Complex64::new(m[1][0][0], m[1][0][1]),
                                Complex64::new(m[1][1][0], m[1][1][1]),
                            ],
                        ]
                    })
                    .collect();
                kraus_to_krsw(&KrausSet { ops })
            }
        }
    }
}

/// Parse a JSON channel spec directly into validated parameters.
pub fn parse_channel_spec(json: &str) -> Result<ChannelParams, ChannelError> {
    ChannelSpec::from_json(json)?.to_params()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(t: [f64; 3], lambda: [f64; 3]) -> ChannelParams {
        ChannelParams::new(t, lambda).expect("valid channel")
    }

    #[test]
    fn identity_passes_through() {
        let p = params([0.0; 3], [1.0; 3]);
        let w = BlochVector::new(0.3, 0.0, 0.0);
        assert_eq!(apply_channel(&p, w), w);
        assert_eq!(invert_channel(&p, w).unwrap(), w);
        assert!(p.is_unital());
    }

    #[test]
    fn segment_channel_endpoints() {
        let p = params([0.0, 0.0, 0.2], [0.0, 0.0, 0.4]);
        let north = apply_channel(&p, BlochVector::new(0.0, 0.0, 1.0));
        assert!(north.approx_eq(BlochVector::new(0.0, 0.0, 0.6), 1e-15));
        // preimage of the top endpoint is the pure north input
        let back = invert_channel(&p, north).unwrap();
        assert!(back.approx_eq(BlochVector::new(0.0, 0.0, 1.0), 1e-12));
    }

    #[test]
    fn damping_south_pole() {
        let p = params([0.0, 0.0, 0.64], [0.6, 0.6, 0.36]);
        let south = apply_channel(&p, BlochVector::new(0.0, 0.0, -1.0));
        assert!(south.approx_eq(BlochVector::new(0.0, 0.0, 0.28), 1e-15));
    }

    #[test]
    fn free_axis_preimage_is_purified() {
        let p = params([0.1, 0.2, 0.3], [0.0, 0.0, 0.4]);
        let back = invert_channel(&p, BlochVector::new(0.1, 0.2, -0.1)).unwrap();
        assert!(back.approx_eq(BlochVector::new(0.0, 0.0, -1.0), 1e-12));
        // interior output: residual goes to the first collapsed axis
        let mid = invert_channel(&p, BlochVector::new(0.1, 0.2, 0.3 + 0.4 * 0.5)).unwrap();
        assert!((mid.norm() - 1.0).abs() <= 1e-12);
        assert!((mid.z - 0.5).abs() <= 1e-12);
        assert!(mid.y.abs() <= 1e-15);
        // mismatched collapsed component has no preimage
        assert!(matches!(
            invert_channel(&p, BlochVector::new(0.0, 0.2, 0.3)),
            Err(ChannelError::NoPreimage { axis: 0, .. })
        ));
        // component beyond the segment end is not reachable
        assert!(matches!(
            invert_channel(&p, BlochVector::new(0.1, 0.2, 0.9)),
            Err(ChannelError::NotReachable { .. })
        ));
    }

    #[test]
    fn named_channel_parameters() {
        let depol = named_channel(NamedChannelSpec { kind: NamedKind::Depolarizing, x: 1.0 })
            .unwrap();
        assert_eq!(depol.lambda(), [1.0, 1.0, 1.0]);
        assert!(depol.is_unital());
        let tp = named_channel(NamedChannelSpec { kind: NamedKind::TwoPauli, x: 1.0 / 3.0 })
            .unwrap();
        assert!((tp.lambda()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((tp.lambda()[2] + 1.0 / 3.0).abs() < 1e-15);
        let ad = named_channel(NamedChannelSpec {
            kind: NamedKind::AmplitudeDamping,
            x: 0.36,
        })
        .unwrap();
        assert_eq!(ad.t(), [0.0, 0.0, 0.64]);
        assert!((ad.lambda()[0] - 0.6).abs() < 1e-15);
        assert!((ad.lambda()[2] - 0.36).abs() < 1e-15);
        assert!(!ad.is_unital());
        assert!(named_channel(NamedChannelSpec { kind: NamedKind::Depolarizing, x: 1.2 }).is_err());
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(matches!(
            ChannelParams::new([0.0; 3], [1.2, 0.0, 0.0]),
            Err(ChannelError::ScalingTooLarge { axis: 0, .. })
        ));
        assert!(matches!(
            ChannelParams::new([0.5, 0.0, 0.0], [0.6, 0.0, 0.0]),
            Err(ChannelError::AxisSumTooLarge { axis: 0, .. })
        ));
    }

    #[test]
    fn point_channel_detection() {
        let p = params([0.1, 0.0, 0.2], [0.0, 0.0, 0.0]);
        assert!(p.is_point_channel());
        assert!(p.nonzero_axes().is_empty());
    }

    #[test]
    fn axis_permutation_round_trip() {
        let p = params([0.0, 0.3, 0.0], [0.0, 0.5, 0.0]);
        let (q, perm) = orient_single_axis_to_z(&p).expect("single axis");
        assert_eq!(q.lambda()[2], 0.5);
        assert_eq!(q.t()[2], 0.3);
        assert_eq!(q.lambda()[0], 0.0);
        let w = BlochVector::new(0.1, -0.2, 0.3);
        assert_eq!(perm.unapply(perm.apply(w)), w);
        // forward map commutes with the relabeling
        let lhs = perm.apply(apply_channel(&p, w));
        let rhs = apply_channel(&q, perm.apply(w));
        assert!(lhs.approx_eq(rhs, 1e-15));
    }

    #[test]
    fn json_specs_parse() {
        let p = parse_channel_spec(r#"{"type":"krsw","t":[0.0,0.0,0.2],"lambda":[0.0,0.0,0.4]}"#)
            .unwrap();
        assert_eq!(p.t(), [0.0, 0.0, 0.2]);
        let p = parse_channel_spec(r#"{"type":"named","name":"two_pauli","x":0.25}"#).unwrap();
        assert_eq!(p.lambda(), [0.25, 0.25, -0.5]);
        let p = parse_channel_spec(
            r#"{"type":"kraus","ops":[
                [[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[0.6,0.0]]],
                [[[0.0,0.0],[0.8,0.0]],[[0.0,0.0],[0.0,0.0]]]
            ]}"#,
        )
        .unwrap();
        assert!((p.lambda()[2] - 0.36).abs() <= 1e-12);
        assert!((p.t()[2] - 0.64).abs() <= 1e-12);
        assert!(parse_channel_spec(r#"{"type":"krsw","t":[0,0,0]}"#).is_err());
        assert!(parse_channel_spec("not json").is_err());
    }
}
