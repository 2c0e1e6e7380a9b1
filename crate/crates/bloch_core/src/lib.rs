//! Bloch-vector qubit states and the closed-form quantum relative entropy.
//!
//! A qubit density matrix is determined by a real 3-vector `w` with
//! `norm(w) <= 1` through `rho = (I + w . sigma) / 2`, where `sigma` is the
//! vector of Pauli matrices. Its eigenvalues are `(1 +/- r) / 2` with
//! `r = norm(w)`, so every spectral quantity of a pair of states reduces to
//! the two radii and the angle between the vectors. This crate provides that
//! reduction for the two quantities the capacity solvers are built on:
//!
//! * the von Neumann entropy `S(r)` in bits, and
//! * the relative entropy `D(w || v) = Tr[rho (log2 rho - log2 phi)]`,
//!   evaluated as
//!   `1 - S(r) - (1/2) log2(1 - q^2) - (w . v / q) atanh(q) / ln 2`
//!   with `q = norm(v)`.
//!
//! When `q -> 0` the last two terms vanish and `D` degenerates to the
//! radially symmetric value `1 - S(r)`, which is also `D(w || I/2)`. When
//! the second argument is pure (`q = 1`) the divergence is genuine unless
//! `w = v`, where we define `D = 0` by continuity.
//!
//! All entropies are in bits. Guarded `x log2 x` evaluation keeps the
//! formulas finite at the sphere (`r = 1`), and the `1 - q^2` factor is
//! expanded as `(1 - q)(1 + q)` so second arguments within `1e-12` of the
//! sphere still produce full-precision values.
//!
//! ```
//! use bloch_core::{relative_entropy, BlochVector};
//!
//! let w = BlochVector::new(0.0, 0.0, 0.6);
//! let v = BlochVector::ZERO;
//! // distance from the maximally mixed state is 1 - S(w)
//! assert!((relative_entropy(w, v).unwrap() - 0.2780719051).abs() < 1e-9);
//! ```

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Agreement tolerance for identity-style checks (Donald decomposition,
/// dual entropy formulas, round trips).
pub const EQ_TOL: f64 = 1e-10;

/// Slack accepted on state norms before input is rejected outright.
pub const NORM_TOL: f64 = 1e-12;

const LN_2: f64 = std::f64::consts::LN_2;

/// Errors from state validation and entropy evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlochError {
    /// A vector claiming to be a state has norm above 1.
    #[error("Bloch vector norm {0} exceeds 1")]
    NormExceedsUnit(f64),
    /// The second argument of the relative entropy is pure and differs
    /// from the first, so the divergence is infinite.
    #[error("relative entropy diverges: second argument is pure and differs from the first")]
    DivergentSupport,
    /// A radius argument left `[0, 1]`.
    #[error("radius {0} is outside [0, 1]")]
    RadiusOutOfRange(f64),
    /// A matrix handed to `density_to_bloch` is not Hermitian.
    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),
    /// A matrix handed to `density_to_bloch` does not have unit trace.
    #[error("matrix trace {0} differs from 1")]
    NonUnitTrace(f64),
    /// Ensemble probabilities are negative or do not sum to 1.
    #[error("ensemble probabilities must be nonnegative and sum to 1 (sum {0})")]
    BadProbabilities(f64),
}

/// Real 3-vector representation of a qubit state, `rho = (I + w . sigma)/2`.
///
/// The components are dimensionless; `norm() <= 1` for physical states and
/// `norm() == 1` exactly for pure states.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    /// The maximally mixed state `I/2`.
    pub const ZERO: Self = Self { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn from_array(a: [f64; 3]) -> Self {
        Self { x: a[0], y: a[1], z: a[2] }
    }

    pub const fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// True when both states agree componentwise within `tol`.
    pub fn approx_eq(self, other: Self, tol: f64) -> bool {
        (self.x - other.x).abs() <= tol
            && (self.y - other.y).abs() <= tol
            && (self.z - other.z).abs() <= tol
    }
}

impl Add for BlochVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for BlochVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for BlochVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for BlochVector {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<BlochVector> for f64 {
    type Output = BlochVector;
    fn mul(self, v: BlochVector) -> BlochVector {
        v * self
    }
}

impl fmt::Display for BlochVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Explicit 2x2 complex density matrix, row-major `[[a, b], [c, d]]`.
///
/// Only the oracle tests and the Kraus conversion need this form; the
/// Bloch vector is the canonical state representation everywhere else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    pub m: [[Complex64; 2]; 2],
}

/// Geometric reduction of a state pair: the two radii and the cosine of
/// the angle between the vectors. The relative entropy depends on the pair
/// only through these three numbers, which is what makes it rotation
/// invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelEntropyGeometry {
    /// Radius of the first argument.
    pub r: f64,
    /// Radius of the second argument.
    pub q: f64,
    /// `cos(theta) = (w . v) / (r q)`; zero when either radius vanishes.
    pub cos_theta: f64,
}

impl RelEntropyGeometry {
    /// Reduce a vector pair to its rotation-invariant geometry.
    pub fn from_vectors(w: BlochVector, v: BlochVector) -> Result<Self, BlochError> {
        let r = check_norm(w)?;
        let q = check_norm(v)?;
        let cos_theta = if r > 0.0 && q > 0.0 {
            (w.dot(v) / (r * q)).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        Ok(Self { r, q, cos_theta })
    }

    /// Relative entropy in bits determined by the geometry alone.
    pub fn evaluate(&self) -> Result<f64, BlochError> {
        let r = self.r.min(1.0);
        let d1 = 1.0 - entropy_from_radius(r);
        if self.q >= 1.0 {
            // pure second argument: finite only on the diagonal
            if (r - 1.0).abs() <= EQ_TOL && (self.cos_theta - 1.0).abs() <= EQ_TOL {
                return Ok(0.0);
            }
            return Err(BlochError::DivergentSupport);
        }
        if self.q < NORM_TOL {
            return Ok(d1);
        }
        let (k0, k1) = center_coefficients_from_radius(self.q);
        Ok(d1 + k0 - k1 * (r * self.q * self.cos_theta))
    }
}

/// Guarded `x log2 x`, with the `0 log 0 = 0` limit.
fn xlog2(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

fn check_norm(w: BlochVector) -> Result<f64, BlochError> {
    let n = w.norm();
    if n > 1.0 + NORM_TOL {
        Err(BlochError::NormExceedsUnit(n))
    } else {
        Ok(n)
    }
}

fn entropy_from_radius(r: f64) -> f64 {
    let r = r.clamp(0.0, 1.0);
    -xlog2(0.5 * (1.0 + r)) - xlog2(0.5 * (1.0 - r))
}

fn center_coefficients_from_radius(q: f64) -> (f64, f64) {
    // (1 - q)(1 + q) instead of 1 - q^2: exact factors keep precision
    // when q sits within 1e-12 of the sphere
    let k0 = -0.5 * ((1.0 - q) * (1.0 + q)).log2();
    let k1 = q.atanh() / (q * LN_2);
    (k0, k1)
}

/// Von Neumann entropy in bits of a state of radius `r`:
/// `S = H2((1 + r)/2)`, with `S(0) = 1` and `S(1) = 0`.
pub fn von_neumann_entropy(r: f64) -> Result<f64, BlochError> {
    if !(-NORM_TOL..=1.0 + NORM_TOL).contains(&r) {
        return Err(BlochError::RadiusOutOfRange(r));
    }
    Ok(entropy_from_radius(r))
}

/// Relative entropy `D(w || v)` in bits.
///
/// Finite whenever `norm(v) < 1`; for a pure second argument the value is
/// 0 on the diagonal (by continuity) and an error otherwise, since the
/// support condition is violated and the divergence is infinite.
pub fn relative_entropy(w: BlochVector, v: BlochVector) -> Result<f64, BlochError> {
    let r = check_norm(w)?.min(1.0);
    let q = check_norm(v)?;
    if q >= 1.0 {
        return if w.distance(v) <= EQ_TOL {
            Ok(0.0)
        } else {
            Err(BlochError::DivergentSupport)
        };
    }
    let d1 = 1.0 - entropy_from_radius(r);
    if q < NORM_TOL {
        return Ok(d1);
    }
    let (k0, k1) = center_coefficients_from_radius(q);
    Ok(d1 + k0 - k1 * w.dot(v))
}

/// Distance from the maximally mixed state, `D(w || I/2) = 1 - S(w)`.
pub fn rel_entropy_vs_max_mixed(w: BlochVector) -> Result<f64, BlochError> {
    let r = check_norm(w)?;
    Ok(1.0 - entropy_from_radius(r))
}

/// Coefficients `(k0, k1)` of the part of `D(w || v)` that is affine in
/// `w` for a fixed center `v`:
///
/// `D(w || v) = (1 - S(norm(w))) + k0 - k1 * (w . v)`.
///
/// The solvers evaluate `D` against one center across thousands of surface
/// points, so the center-only terms are worth computing once. The norm of
/// `v` is clamped to `1 - 1e-12` (callers probing the boundary get large
/// finite values instead of infinities) and `(0, 0)` is returned for
/// `v = 0`, matching the radially symmetric limit.
pub fn center_coefficients(v: BlochVector) -> (f64, f64) {
    let q = v.norm().min(1.0 - 1e-12);
    if q < NORM_TOL {
        (0.0, 0.0)
    } else {
        center_coefficients_from_radius(q)
    }
}

/// Both sides of the average-state decomposition
///
/// `sum_i a_i D(w_i || phi)  =  D(s || phi) + sum_i a_i D(w_i || s)`
///
/// with `s = sum_i a_i w_i`. Returns `(lhs, rhs)`; the two agree to
/// `EQ_TOL` for any valid ensemble, which the property tests assert.
pub fn donald_decomposition(
    ensemble: &[(f64, BlochVector)],
    phi: BlochVector,
) -> Result<(f64, f64), BlochError> {
    let mut total = 0.0;
    for &(a, w) in ensemble {
        if a < 0.0 {
            return Err(BlochError::BadProbabilities(a));
        }
        check_norm(w)?;
        total += a;
    }
    if (total - 1.0).abs() > NORM_TOL {
        return Err(BlochError::BadProbabilities(total));
    }
    let mut sigma = BlochVector::ZERO;
    for &(a, w) in ensemble {
        sigma = sigma + w * a;
    }
    let mut lhs = 0.0;
    let mut spread = 0.0;
    for &(a, w) in ensemble {
        lhs += a * relative_entropy(w, phi)?;
        spread += a * relative_entropy(w, sigma)?;
    }
    let rhs = relative_entropy(sigma, phi)? + spread;
    Ok((lhs, rhs))
}

/// Density matrix of a Bloch vector: `(I + w . sigma) / 2`.
pub fn bloch_to_density(w: BlochVector) -> Result<DensityMatrix, BlochError> {
    check_norm(w)?;
    let half = 0.5;
    Ok(DensityMatrix {
        m: [
            [
                Complex64::new(half * (1.0 + w.z), 0.0),
                Complex64::new(half * w.x, -half * w.y),
            ],
            [
                Complex64::new(half * w.x, half * w.y),
                Complex64::new(half * (1.0 - w.z), 0.0),
            ],
        ],
    })
}

/// Bloch vector of a density matrix, `w_k = Tr(m sigma_k)`.
///
/// Rejects matrices that are not Hermitian or do not have unit trace
/// (tolerance `1e-10`), and vectors that land outside the ball.
pub fn density_to_bloch(m: &DensityMatrix) -> Result<BlochVector, BlochError> {
    let a = m.m[0][0];
    let b = m.m[0][1];
    let c = m.m[1][0];
    let d = m.m[1][1];
    let asym = (b - c.conj()).norm().max(a.im.abs()).max(d.im.abs());
    if asym > EQ_TOL {
        return Err(BlochError::NotHermitian(asym));
    }
    let tr = a.re + d.re;
    if (tr - 1.0).abs() > EQ_TOL {
        return Err(BlochError::NonUnitTrace(tr));
    }
    let w = BlochVector::new(b.re + c.re, -(b - c).im, a.re - d.re);
    check_norm(w)?;
    Ok(w)
}
