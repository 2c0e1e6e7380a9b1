//! Maximizing `D(w(theta, psi) || v)` over the output surface.
//!
//! The surface is parameterized by the input direction `u(theta, psi) =
//! (sin theta cos psi, sin theta sin psi, cos theta)`, which stays regular
//! even when the output ellipsoid degenerates to a disc, a segment, or a
//! point.
//! A `Surface` caches the grid outputs and their radial entropy terms once
//! per channel; for each center only the affine part `k0 - k1 (w . v)`
//! changes, so a full grid rescan costs one dot product per node.
//!
//! The search stack, bottom to top: coarse grid local maxima, alternating
//! golden-section refinement on each angle, a Newton polish driven by the
//! analytic angle gradient, and `slide`, which re-centers the refinement
//! bracket so a tracked peak can follow a moving center.

use bloch_core::{center_coefficients, von_neumann_entropy, BlochVector};
use channel_model::ChannelParams;
use std::f64::consts::{LN_2, PI, TAU};

use crate::equalize::lstsq;
use nalgebra::{DMatrix, DVector};

/// `D(w || I/2) = 1 - S(|w|)`, the part of the distance that ignores the
/// center. Radii a hair above 1 from accumulated round-off are clamped.
pub(crate) fn entropy_term(w: BlochVector) -> f64 {
    1.0 - von_neumann_entropy(w.norm().min(1.0)).expect("clamped radius is in domain")
}

/// Unit input direction for polar angle `theta`, azimuth `psi`.
pub(crate) fn direction(theta: f64, psi: f64) -> BlochVector {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    BlochVector::new(st * cp, st * sp, ct)
}

/// Difference of angles wrapped into (-pi, pi].
pub(crate) fn wrap_angle(d: f64) -> f64 {
    (d + PI).rem_euclid(TAU) - PI
}

/// Midpoint of two angles along the shorter arc.
pub(crate) fn angle_mid(a: f64, b: f64) -> f64 {
    a + 0.5 * wrap_angle(b - a)
}

/// A refined local maximum of the distance over the surface.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SurfacePeak {
    pub d: f64,
    pub w: BlochVector,
    pub theta: f64,
    pub psi: f64,
}

/// A fixed second argument of the distance bundled with its affine
/// coefficients, so the two can never drift out of sync.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Center {
    pub v: BlochVector,
    pub k0: f64,
    pub k1: f64,
}

impl Center {
    pub fn of(v: BlochVector) -> Self {
        let (k0, k1) = center_coefficients(v);
        Self { v, k0, k1 }
    }
}

/// Result of a full surface scan against one center.
#[derive(Debug, Clone)]
pub(crate) struct MaxSet {
    pub dmax: f64,
    /// Every maximizer within 1e-9 of `dmax`, as (output, input direction).
    pub args: Vec<(BlochVector, BlochVector)>,
    /// All distinct refined local maxima, best first.
    pub cands: Vec<SurfacePeak>,
}

pub(crate) struct Surface {
    t: BlochVector,
    lam: [f64; 3],
    n: usize,
    refine_rounds: usize,
    thetas: Vec<f64>,
    psis: Vec<f64>,
    points: Vec<BlochVector>,
    d1: Vec<f64>,
}

impl Surface {
    pub fn new(params: &ChannelParams, n: usize, refine_rounds: usize) -> Self {
        let t = params.translation();
        let lam = params.lambda();
        let thetas: Vec<f64> = (0..n).map(|i| PI * (i as f64 + 0.5) / n as f64).collect();
        let psis: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
        let mut points = Vec::with_capacity(n * n);
        let mut d1 = Vec::with_capacity(n * n);
        for &th in &thetas {
            for &ps in &psis {
                let u = direction(th, ps);
                let w = BlochVector::new(
                    t.x + lam[0] * u.x,
                    t.y + lam[1] * u.y,
                    t.z + lam[2] * u.z,
                );
                points.push(w);
                d1.push(entropy_term(w));
            }
        }
        Self { t, lam, n, refine_rounds, thetas, psis, points, d1 }
    }

    /// Output surface point for a unit input direction.
    pub fn output(&self, u: BlochVector) -> BlochVector {
        BlochVector::new(
            self.t.x + self.lam[0] * u.x,
            self.t.y + self.lam[1] * u.y,
            self.t.z + self.lam[2] * u.z,
        )
    }

    /// Distance to the center at the given angles.
    pub fn distance_at(&self, theta: f64, psi: f64, c: Center) -> (f64, BlochVector) {
        let w = self.output(direction(theta, psi));
        (entropy_term(w) + c.k0 - c.k1 * w.dot(c.v), w)
    }

    /// Alternating golden-section ascent on each angle inside the bracket
    /// `theta0 +- half_theta`, `psi0 +- half_psi`.
    pub fn refine(
        &self,
        theta0: f64,
        psi0: f64,
        c: Center,
        half_theta: f64,
        half_psi: f64,
    ) -> SurfacePeak {
        let gr = (5.0_f64.sqrt() - 1.0) / 2.0;
        let (mut at, mut bt) = (theta0 - half_theta, theta0 + half_theta);
        let (mut ap, mut bp) = (psi0 - half_psi, psi0 + half_psi);
        let mut theta = theta0;
        let mut psi = psi0;
        let f = |th: f64, ps: f64| self.distance_at(th, ps, c).0;
        for _ in 0..self.refine_rounds {
            let x1 = bt - gr * (bt - at);
            let x2 = at + gr * (bt - at);
            if f(x1, psi) > f(x2, psi) {
                bt = x2;
            } else {
                at = x1;
            }
            theta = 0.5 * (at + bt);
            let y1 = bp - gr * (bp - ap);
            let y2 = ap + gr * (bp - ap);
            if f(theta, y1) > f(theta, y2) {
                bp = y2;
            } else {
                ap = y1;
            }
            psi = 0.5 * (ap + bp);
        }
        let (d, w) = self.distance_at(theta, psi, c);
        SurfacePeak { d, w, theta, psi }
    }

    /// Full scan against `v`: grid local maxima (azimuth wraps, polar
    /// edges do not), deduplicated seeds refined to peaks, then the peak
    /// list deduplicated spatially at 1e-6 with the argmax window 1e-9.
    pub fn max_set(&self, v: BlochVector) -> MaxSet {
        let n = self.n;
        let c = Center::of(v);
        let dg: Vec<f64> = self
            .points
            .iter()
            .zip(&self.d1)
            .map(|(w, d)| d + c.k0 - c.k1 * w.dot(v))
            .collect();
        let mut grid_peaks: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n {
            let row = i * n;
            for j in 0..n {
                let c = dg[row + j];
                let left = dg[row + (j + n - 1) % n];
                let right = dg[row + (j + 1) % n];
                if c < left || c < right {
                    continue;
                }
                if i > 0 && c < dg[row - n + j] {
                    continue;
                }
                if i + 1 < n && c < dg[row + n + j] {
                    continue;
                }
                grid_peaks.push((c, i, j));
            }
        }
        grid_peaks.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite distances"));
        let mut seeds: Vec<(usize, usize)> = Vec::new();
        for &(_, i, j) in &grid_peaks {
            let mut fresh = true;
            for &(i0, j0) in &seeds {
                let dj = j.abs_diff(j0);
                let dj = dj.min(n - dj);
                if i.abs_diff(i0).max(dj) < 3 {
                    fresh = false;
                    break;
                }
                if self.points[i * n + j].distance(self.points[i0 * n + j0]) < 1e-6 {
                    fresh = false;
                    break;
                }
            }
            if fresh {
                seeds.push((i, j));
                if seeds.len() >= 24 {
                    break;
                }
            }
        }
        let half_theta = PI / n as f64;
        let half_psi = TAU / n as f64;
        let mut refined: Vec<SurfacePeak> = seeds
            .iter()
            .map(|&(i, j)| self.refine(self.thetas[i], self.psis[j], c, half_theta, half_psi))
            .collect();
        refined.sort_by(|a, b| b.d.partial_cmp(&a.d).expect("finite distances"));
        let dmax = refined[0].d;
        let mut cands: Vec<SurfacePeak> = Vec::new();
        let mut args: Vec<(BlochVector, BlochVector)> = Vec::new();
        for pk in refined {
            if cands.iter().any(|c| c.w.distance(pk.w) < 1e-6) {
                continue;
            }
            if pk.d >= dmax - 1e-9 {
                args.push((pk.w, direction(pk.theta, pk.psi)));
            }
            cands.push(pk);
        }
        MaxSet { dmax, args, cands }
    }

    /// Analytic gradient of the distance with respect to the angles.
    pub fn angle_gradient(&self, theta: f64, psi: f64, c: Center) -> [f64; 2] {
        let u = direction(theta, psi);
        let w = self.output(u);
        let r = w.norm();
        // d/dw of (1 - S(|w|)) is atanh(r)/(r ln 2) * w, with the smooth
        // w/ln2 limit at the center; the affine part contributes -k1 v
        let gw = if r < 1e-12 {
            w * (1.0 / LN_2) - c.v * c.k1
        } else {
            w * (r.min(1.0 - 1e-15).atanh() / (r * LN_2)) - c.v * c.k1
        };
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = psi.sin_cos();
        let dut = BlochVector::new(ct * cp, ct * sp, -st);
        let dup = BlochVector::new(-st * sp, st * cp, 0.0);
        let scaled = |d: BlochVector| {
            BlochVector::new(self.lam[0] * d.x, self.lam[1] * d.y, self.lam[2] * d.z)
        };
        [gw.dot(scaled(dut)), gw.dot(scaled(dup))]
    }

    /// Newton polish of a peak from the analytic gradient and a
    /// finite-difference Hessian. Steps are capped at half a grid cell;
    /// if the iterate drifts more than 1.5 cells from the start the
    /// starting point is returned unchanged (the peak was lost).
    pub fn peak_newton(&self, mut theta: f64, mut psi: f64, c: Center) -> SurfacePeak {
        let cap = TAU / self.n as f64;
        let (theta0, psi0) = (theta, psi);
        for _ in 0..25 {
            let g = self.angle_gradient(theta, psi, c);
            if g[0].abs().max(g[1].abs()) < 1e-15 {
                break;
            }
            let h = 1e-6;
            let gt = self.angle_gradient(theta + h, psi, c);
            let gp = self.angle_gradient(theta, psi + h, c);
            let hess = DMatrix::from_row_slice(
                2,
                2,
                &[
                    (gt[0] - g[0]) / h,
                    (gp[0] - g[0]) / h,
                    (gt[1] - g[1]) / h,
                    (gp[1] - g[1]) / h,
                ],
            );
            let rhs = DVector::from_column_slice(&[-g[0], -g[1]]);
            let step = lstsq(hess, rhs, 1e-12);
            let m = step[0].abs().max(step[1].abs());
            let (s0, s1) = if m > 0.5 * cap {
                (step[0] * 0.5 * cap / m, step[1] * 0.5 * cap / m)
            } else {
                (step[0], step[1])
            };
            theta += s0;
            psi += s1;
            if (theta - theta0).abs() > 1.5 * cap || wrap_angle(psi - psi0).abs() > 1.5 * cap {
                let (d, w) = self.distance_at(theta0, psi0, c);
                return SurfacePeak { d, w, theta: theta0, psi: psi0 };
            }
            if m < 1e-13 {
                break;
            }
        }
        let (d, w) = self.distance_at(theta, psi, c);
        SurfacePeak { d, w, theta, psi }
    }

    /// Tracks a peak from a stale angle estimate: re-centered golden
    /// refinement until the bracket stops moving, then the Newton polish,
    /// kept only if it does not lose value.
    pub fn slide(&self, mut theta: f64, mut psi: f64, c: Center) -> SurfacePeak {
        let bt = PI / self.n as f64;
        let bp = TAU / self.n as f64;
        let mut cur = SurfacePeak { d: f64::NEG_INFINITY, w: BlochVector::ZERO, theta, psi };
        for _ in 0..12 {
            let pk = self.refine(theta, psi, c, bt, bp);
            let dth = (pk.theta - theta).abs();
            let dps = wrap_angle(pk.psi - psi).abs();
            theta = pk.theta;
            psi = pk.psi;
            cur = pk;
            if dth < 0.45 * bt && dps < 0.45 * bp {
                break;
            }
        }
        let polished = self.peak_newton(theta, psi, c);
        if polished.d >= cur.d - 1e-12 {
            polished
        } else {
            cur
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bloch_core::relative_entropy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn surface(t: [f64; 3], lam: [f64; 3]) -> Surface {
        let p = ChannelParams::new(t, lam).expect("valid channel");
        Surface::new(&p, 96, 40)
    }

    #[test]
    fn angle_midpoints_wrap() {
        assert!((angle_mid(0.1, 0.3) - 0.2).abs() < 1e-15);
        // shorter arc across the 0/2pi seam
        let m = angle_mid(0.1, TAU - 0.1);
        assert!(wrap_angle(m).abs() < 1e-12);
    }

    #[test]
    fn identity_surface_is_equidistant_from_center() {
        let sf = surface([0.0; 3], [1.0; 3]);
        let ms = sf.max_set(BlochVector::ZERO);
        assert!((ms.dmax - 1.0).abs() <= 1e-12);
        assert!(!ms.args.is_empty());
    }

    #[test]
    fn grid_scan_matches_dense_sampling() {
        let sf = surface([0.0, 0.0, 0.64], [0.6, 0.6, 0.36]);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..5 {
            let v = BlochVector::new(
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(0.3..0.8),
            );
            let ms = sf.max_set(v);
            // dense unit-direction sampling must never beat the refined max
            let mut brute: f64 = f64::NEG_INFINITY;
            for _ in 0..20_000 {
                let z: f64 = rng.gen_range(-1.0..1.0);
                let ph: f64 = rng.gen_range(0.0..TAU);
                let r = (1.0 - z * z).sqrt();
                let w = sf.output(BlochVector::new(r * ph.cos(), r * ph.sin(), z));
                brute = brute.max(relative_entropy(w, v).unwrap());
            }
            assert!(
                brute <= ms.dmax + 1e-7,
                "dense sample {brute} exceeds refined max {}",
                ms.dmax
            );
        }
    }

    #[test]
    fn refined_peaks_sit_on_the_surface() {
        let sf = surface([0.3, 0.1, 0.0], [0.4, 0.5, 0.0]);
        let ms = sf.max_set(BlochVector::new(0.3, 0.1, 0.0));
        for pk in &ms.cands {
            let back = sf.output(direction(pk.theta, pk.psi));
            assert!(back.approx_eq(pk.w, 1e-12));
        }
        // the planar channel shows two distinct maximizers at its optimum
        let ms = sf.max_set(BlochVector::new(0.320_899, 0.111_229, 0.0));
        assert!(ms.args.len() >= 2 || ms.cands.len() >= 2);
    }

    #[test]
    fn newton_polish_does_not_lose_value() {
        let sf = surface([0.0, 0.0, 0.2], [0.3, 0.5, 0.4]);
        let c = Center::of(BlochVector::new(0.05, -0.02, 0.3));
        let ms = sf.max_set(c.v);
        for pk in ms.cands.iter().take(3) {
            let slid = sf.slide(pk.theta + 0.01, pk.psi - 0.01, c);
            assert!(slid.d >= pk.d - 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let sf = surface([0.1, 0.0, 0.3], [0.5, -0.4, 0.3]);
        let c = Center::of(BlochVector::new(0.1, 0.05, 0.35));
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..200 {
            let th: f64 = rng.gen_range(0.2..PI - 0.2);
            let ps: f64 = rng.gen_range(0.0..TAU);
            let g = sf.angle_gradient(th, ps, c);
            let h = 1e-7;
            let f0 = sf.distance_at(th, ps, c).0;
            let ft = sf.distance_at(th + h, ps, c).0;
            let fp = sf.distance_at(th, ps + h, c).0;
            assert!((g[0] - (ft - f0) / h).abs() <= 1e-5);
            assert!((g[1] - (fp - f0) / h).abs() <= 1e-5);
        }
    }
}
