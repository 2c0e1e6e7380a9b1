//! General iterative capacity solver.
//!
//! The capacity is the minimax value `min_v max_w D(w || v)`. The solver
//! runs in stages, each cheap where the previous one stalls:
//!
//! 1. Descent on `f(v) = max_w D(w || v)` from `v = t`: step toward a
//!    randomly chosen farthest point, halving the step whenever it fails
//!    to decrease `f`. This gets within coarse range of the optimum but
//!    crawls once several maximizers tie.
//! 2. For channels symmetric about the z-axis whose maximizers sit off
//!    it, the optimum center is on the axis and the whole problem is one
//!    dimensional: a secant iteration finds the height at which the
//!    tracked peak's own z equals the center, and the mirrored peak pair
//!    is the optimal ensemble. Accepted only if the duality gap vanishes.
//! 3. Otherwise, polish rounds: maintain a working set of candidate
//!    outputs, equalize their distances by a damped Newton method (which
//!    also yields the ensemble weights and the achievable rate chi),
//!    rescan the surface at the new center, and add any fresh maximizers.
//!    The gap `max_w D(w || v) - chi` bounds the distance from optimality
//!    and drives termination.
//! 4. When the gap is small but stuck, a stationarity finisher solves for
//!    the exact crossing of the top peaks: unknowns are the weights and
//!    the center, residuals are the peak-distance differences and the
//!    centering condition, with the peaks re-tracked at every probe.
//!
//! The best (lowest) scanned maximum seen anywhere is what is finally
//! returned, together with the ensemble reconstructed at its center.

use bloch_core::{center_coefficients, relative_entropy, BlochVector};
use channel_model::ChannelParams;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensemble::recover_ensemble;
use crate::equalize::{ba_warm, equalize_active, lstsq};
use crate::surface::{angle_mid, direction, entropy_term, Center, MaxSet, Surface, SurfacePeak};
use crate::{
    equal_distance_residual, CapacityResult, EnsembleMember, IterConfig, SignalEnsemble,
    SolverError, SolverMethod,
};

struct KktSolution {
    v: BlochVector,
    p: Vec<f64>,
    peaks: Vec<SurfacePeak>,
    chi: f64,
}

/// Newton iteration on the stationarity system of a k-peak optimum: the
/// unknowns are the free weights and the center, the residuals are the
/// distance differences between tracked peaks and the centering defect
/// `v - sum p_i w_i`. Peaks are re-slid at every residual evaluation, so
/// the system sees them move with the center. Solutions are accepted
/// only when the residual is tiny and the weights are strictly interior.
fn kkt_newton(sf: &Surface, v0: BlochVector, near: &[SurfacePeak]) -> Option<KktSolution> {
    let k = near.len();
    let mut angles: Vec<[f64; 2]> = near.iter().map(|c| [c.theta, c.psi]).collect();
    let residual = |x: &DVector<f64>,
                    angles: &[[f64; 2]]|
     -> (DVector<f64>, Vec<SurfacePeak>, Vec<f64>) {
        let mut p: Vec<f64> = x.iter().take(k - 1).cloned().collect();
        let head: f64 = p.iter().sum();
        p.push(1.0 - head);
        let v = BlochVector::new(x[k - 1], x[k], x[k + 1]);
        let c = Center::of(v);
        let peaks: Vec<SurfacePeak> = angles.iter().map(|a| sf.slide(a[0], a[1], c)).collect();
        let mut f = DVector::zeros(k + 2);
        for i in 0..k - 1 {
            f[i] = peaks[i].d - peaks[k - 1].d;
        }
        let avg = peaks
            .iter()
            .zip(&p)
            .fold(BlochVector::ZERO, |acc, (pk, &pi)| acc + pk.w * pi);
        f[k - 1] = v.x - avg.x;
        f[k] = v.y - avg.y;
        f[k + 1] = v.z - avg.z;
        (f, peaks, p)
    };
    let mut x = DVector::zeros(k + 2);
    for i in 0..k - 1 {
        x[i] = 1.0 / k as f64;
    }
    x[k - 1] = v0.x;
    x[k] = v0.y;
    x[k + 1] = v0.z;
    let (mut f, mut peaks, mut p) = residual(&x, &angles);
    for _ in 0..30 {
        let nf = f.amax();
        if nf < 1e-13 {
            break;
        }
        let h = 1e-7;
        let mut jac = DMatrix::zeros(k + 2, k + 2);
        for j in 0..k + 2 {
            let mut xp = x.clone();
            xp[j] += h;
            let (fp, _, _) = residual(&xp, &angles);
            for i in 0..k + 2 {
                jac[(i, j)] = (fp[i] - f[i]) / h;
            }
        }
        let step = lstsq(jac, -&f, 1e-9);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let xn = &x + &step * scale;
            let (fnew, pknew, pnew) = residual(&xn, &angles);
            if fnew.amax() < nf {
                x = xn;
                f = fnew;
                peaks = pknew;
                p = pnew;
                angles = peaks.iter().map(|q| [q.theta, q.psi]).collect();
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if f.amax() >= 1e-8 {
        return None;
    }
    let pmin = p.iter().fold(f64::INFINITY, |m, &q| m.min(q));
    let pmax = p.iter().fold(f64::NEG_INFINITY, |m, &q| m.max(q));
    if pmin < 1e-9 || pmax > 1.0 {
        return None;
    }
    let v = BlochVector::new(x[k - 1], x[k], x[k + 1]);
    let chi = p.iter().zip(&peaks).map(|(pi, q)| pi * q.d).sum();
    Some(KktSolution { v, p, peaks, chi })
}

fn assemble(
    params: &ChannelParams,
    v: BlochVector,
    capacity: f64,
    ms: &MaxSet,
    iterations: usize,
) -> Result<CapacityResult, SolverError> {
    let outputs: Vec<BlochVector> = ms.args.iter().map(|a| a.0).collect();
    let ensemble = match recover_ensemble(params, v, &outputs) {
        Ok(e) => e,
        // peaks a hair below the strict argmax window can carry the hull
        // when the center stopped just short of the exact crossing
        Err(SolverError::NotInHull(residual)) => {
            let mut rescued = None;
            for window in [1e-7, 1e-5, 1e-3] {
                let wider: Vec<BlochVector> = ms
                    .cands
                    .iter()
                    .filter(|c| c.d >= ms.dmax - window)
                    .map(|c| c.w)
                    .collect();
                if wider.len() <= outputs.len() {
                    continue;
                }
                if let Ok(e) = recover_ensemble(params, v, &wider) {
                    rescued = Some(e);
                    break;
                }
            }
            rescued.ok_or(SolverError::NotInHull(residual))?
        }
        Err(e) => return Err(e),
    };
    let residual = equal_distance_residual(&ensemble, capacity);
    Ok(CapacityResult {
        capacity_bits: capacity,
        average_output: v,
        ensemble,
        iterations,
        max_equal_distance_residual: residual,
        method: SolverMethod::Iterative,
    })
}

/// Best-effort result for an aborted run: weights are projected onto the
/// simplex of the scanned maximizers and the recorded average is their
/// actual combination, so the ensemble is internally consistent even
/// though it need not reproduce `average_output = v`.
fn partial_result(
    params: &ChannelParams,
    v: BlochVector,
    ms: &MaxSet,
    iterations: usize,
) -> Result<CapacityResult, SolverError> {
    let outputs: Vec<BlochVector> = ms.args.iter().map(|a| a.0).collect();
    let (weights, _) = crate::ensemble::nnls(&outputs, v);
    let total: f64 = weights.iter().sum();
    let mut items = Vec::new();
    let mut avg = BlochVector::ZERO;
    for (j, &w) in outputs.iter().enumerate() {
        let pr = if total > 0.0 { weights[j] / total } else { 1.0 / outputs.len() as f64 };
        if pr <= 1e-12 {
            continue;
        }
        avg = avg + w * pr;
        items.push(EnsembleMember {
            probability: pr,
            input: channel_model::invert_channel(params, w)?,
            output: w,
        });
    }
    let ensemble = SignalEnsemble { items, average_output: avg };
    let residual = equal_distance_residual(&ensemble, ms.dmax);
    Ok(CapacityResult {
        capacity_bits: ms.dmax,
        average_output: v,
        ensemble,
        iterations,
        max_equal_distance_residual: residual,
        method: SolverMethod::Iterative,
    })
}

/// Iterative minimax solver for channels with a full set of output
/// directions. See the module docs for the stage breakdown.
pub fn iterative_capacity(
    params: &ChannelParams,
    cfg: &IterConfig,
) -> Result<CapacityResult, SolverError> {
    cfg.check()?;
    if params.is_point_channel() {
        return Err(SolverError::PointChannel);
    }
    let sf = Surface::new(params, cfg.surface_grid, cfg.refine_iters);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut v = params.translation();
    let mut eps = cfg.step_epsilon;
    let mut ms = sf.max_set(v);
    let mut iterations = 0usize;
    let mut settled = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        let pick = rng.gen_range(0..ms.args.len());
        let target = ms.args[pick].0;
        let vn = v * (1.0 - eps) + target * eps;
        let next = sf.max_set(vn);
        if next.dmax < ms.dmax {
            let delta = ms.dmax - next.dmax;
            v = vn;
            ms = next;
            if delta <= cfg.tol_dmax {
                settled = true;
                break;
            }
        } else {
            eps *= cfg.shrink_factor;
            if eps < 1e-12 {
                settled = true;
                break;
            }
        }
    }
    if !settled {
        let result = partial_result(params, v, &ms, iterations)?;
        return Err(SolverError::MaxItersExceeded(Box::new(result)));
    }

    // stage 2: z-axis symmetric channels with off-axis maximizers reduce
    // to one dimension; secant on the tracked peak height
    let lam = params.lambda();
    let t = params.t();
    let symmetric = (lam[0].abs() - lam[1].abs()).abs() < 1e-14
        && t[0].abs() < 1e-14
        && t[1].abs() < 1e-14;
    if symmetric && ms.cands[0].w.x.hypot(ms.cands[0].w.y) > 1e-6 {
        let mut theta = ms.cands[0].theta;
        let mut psi = ms.cands[0].psi;
        let mut z = v.z;
        let mut prev: Option<(f64, f64)> = None;
        for _ in 0..60 {
            iterations += 1;
            let center = Center::of(BlochVector::new(0.0, 0.0, z));
            let pk = sf.slide(theta, psi, center);
            theta = pk.theta;
            psi = pk.psi;
            let defect = pk.w.z - z;
            if defect.abs() < 1e-15 {
                break;
            }
            let zn = match prev {
                Some((zp, dp)) if (defect - dp).abs() >= 1e-300 => {
                    z - defect * (z - zp) / (defect - dp)
                }
                _ => z + defect,
            };
            prev = Some((z, defect));
            z = zn;
        }
        let vr = BlochVector::new(0.0, 0.0, z);
        let msr = sf.max_set(vr);
        let w1 = msr.cands[0].w;
        let w2 = BlochVector::new(-w1.x, -w1.y, w1.z);
        let avg = BlochVector::new(0.0, 0.0, w1.z);
        let chi = match (relative_entropy(w1, avg), relative_entropy(w2, avg)) {
            (Ok(a), Ok(b)) => 0.5 * (a + b),
            // center numerically on the sphere: treat the guess as failed
            _ => f64::NEG_INFINITY,
        };
        let gap = msr.dmax - chi;
        if gap <= cfg.tol_dmax && w1.x.hypot(w1.y) > 1e-6 {
            let u1 = direction(msr.cands[0].theta, msr.cands[0].psi);
            let u2 = BlochVector::new(-u1.x, -u1.y, u1.z);
            let ensemble = SignalEnsemble {
                items: vec![
                    EnsembleMember { probability: 0.5, input: u1, output: w1 },
                    EnsembleMember { probability: 0.5, input: u2, output: w2 },
                ],
                average_output: avg,
            };
            let residual = equal_distance_residual(&ensemble, msr.dmax);
            return Ok(CapacityResult {
                capacity_bits: msr.dmax,
                average_output: avg,
                ensemble,
                iterations,
                max_equal_distance_residual: residual,
                method: SolverMethod::Iterative,
            });
        }
    }

    // stage 3: polish with a working candidate set
    let mut ws: Vec<BlochVector> = ms.cands.iter().take(24).map(|c| c.w).collect();
    let mut p: Vec<f64> = vec![1.0 / ws.len() as f64; ws.len()];
    let mut gap = f64::INFINITY;
    let mut seen_gap = f64::INFINITY;
    let mut dprev = f64::INFINITY;
    let mut settle = 0usize;
    let mut no_improvement = 0usize;
    let mut best_v = v;
    let mut best_ms = ms.clone();
    let mut best_gap = gap;
    let mut rounds = 0usize;
    while rounds < 120 {
        rounds += 1;
        // merge candidates that drifted together; radius shrinks with
        // the gap so late rounds cannot erase genuinely distinct peaks
        let merge_radius = if gap.is_finite() {
            (0.3 * gap.sqrt()).clamp(1e-3, 0.05)
        } else {
            0.05
        };
        let (k0v, k1v) = center_coefficients(v);
        let dcur: Vec<f64> = ws
            .iter()
            .map(|&w| entropy_term(w) + k0v - k1v * w.dot(v))
            .collect();
        let mut order: Vec<usize> = (0..ws.len()).collect();
        order.sort_by(|&a, &b| dcur[b].partial_cmp(&dcur[a]).expect("finite distances"));
        let mut kept: Vec<usize> = Vec::new();
        let mut merged_p: Vec<f64> = Vec::new();
        for i in order {
            match kept.iter().position(|&j| ws[i].distance(ws[j]) < merge_radius) {
                Some(slot) => merged_p[slot] += p[i],
                None => {
                    kept.push(i);
                    merged_p.push(p[i]);
                }
            }
        }
        ws = kept.iter().map(|&i| ws[i]).collect();
        p = merged_p;
        let total: f64 = p.iter().sum();
        let p0: Vec<f64> = p.iter().map(|x| x / total).collect();
        let warmed = ba_warm(&ws, &p0, 200);
        let (idx, pa, vn, chi, _res) = equalize_active(&ws, &warmed);
        ws = idx.iter().map(|&i| ws[i]).collect();
        p = pa;
        v = vn;
        ms = sf.max_set(v);
        gap = ms.dmax - chi;
        if (ms.dmax < best_ms.dmax - 1e-15)
            || (ms.dmax <= best_ms.dmax + 1e-12 && gap < best_gap)
        {
            best_v = v;
            best_ms = ms.clone();
            best_gap = gap;
            no_improvement = 0;
        } else if gap < seen_gap - 1e-12 {
            // the certificate is still tightening even though the scanned
            // maximum is not: the run is closing in on a peak crossing
            no_improvement = 0;
        } else {
            no_improvement += 1;
        }
        seen_gap = seen_gap.min(gap);
        if gap <= cfg.tol_dmax {
            break;
        }
        // stage 4: stationarity finisher once the gap is nearly closed;
        // the peak window widens with the gap so both sides of a crossing
        // are seen while the working center still favors one of them
        if gap < 3e-3 {
            let window = (10.0 * gap).max(1e-4);
            let mut near: Vec<SurfacePeak> = ms
                .cands
                .iter()
                .filter(|c| c.d >= ms.dmax - window)
                .cloned()
                .collect();
            let mut plateau = near.len() > 4;
            if !plateau && near.len() >= 2 {
                // a high midpoint between the two top peaks means a ridge,
                // not a set of isolated crossings
                let thm = angle_mid(near[0].theta, near[1].theta);
                let psm = angle_mid(near[0].psi, near[1].psi);
                let (dm, _) = sf.distance_at(thm, psm, Center::of(v));
                if ms.dmax - dm < 1e-4 {
                    plateau = true;
                }
            }
            if plateau && near.len() >= 2 {
                // a genuinely distant partner peak breaks the plateau:
                // keep just the extreme pair
                let mut far_idx = 1;
                let mut far_dist = near[1].w.distance(near[0].w);
                for (i, c) in near.iter().enumerate().skip(2) {
                    let d = c.w.distance(near[0].w);
                    if d > far_dist {
                        far_dist = d;
                        far_idx = i;
                    }
                }
                if far_dist > 1e-3 {
                    near = vec![near[0], near[far_idx]];
                    plateau = false;
                }
            }
            if !plateau && near.len() >= 2 {
                if let Some(fin) = kkt_newton(&sf, v, &near) {
                    let msf = sf.max_set(fin.v);
                    let gapf = msf.dmax - fin.chi;
                    if gapf < gap {
                        v = fin.v;
                        ms = msf;
                        gap = gapf;
                        if (ms.dmax < best_ms.dmax - 1e-15)
                            || (ms.dmax <= best_ms.dmax + 1e-12 && gap < best_gap)
                        {
                            best_v = v;
                            best_ms = ms.clone();
                            best_gap = gap;
                        }
                        if gap <= cfg.tol_dmax {
                            break;
                        }
                        ws = fin.peaks.iter().map(|q| q.w).collect();
                        p = fin.p;
                    }
                }
            }
        }
        if no_improvement >= 25 {
            break;
        }
        settle = if (ms.dmax - dprev).abs() <= cfg.tol_dmax { settle + 1 } else { 0 };
        if settle >= 6 && gap < 1e-6 {
            break;
        }
        dprev = ms.dmax;
        // adopt fresh maximizers with a token weight
        for c in ms.cands.iter().take(8) {
            if c.d < ms.dmax - 1e-7 {
                break;
            }
            if ws.iter().all(|&x| c.w.distance(x) > 1e-9) {
                for q in &mut p {
                    *q *= 1.0 - 1e-3;
                }
                ws.push(c.w);
                p.push(1e-3);
            }
        }
        if ws.len() > 64 {
            let (k0v, k1v) = center_coefficients(v);
            let dvals: Vec<f64> = ws
                .iter()
                .map(|&w| entropy_term(w) + k0v - k1v * w.dot(v))
                .collect();
            let mut order: Vec<usize> = (0..ws.len()).collect();
            order.sort_by(|&a, &b| {
                let za = p[a] <= 1e-12;
                let zb = p[b] <= 1e-12;
                za.cmp(&zb)
                    .then(dvals[b].partial_cmp(&dvals[a]).expect("finite distances"))
            });
            order.truncate(64);
            ws = order.iter().map(|&i| ws[i]).collect();
            p = order.iter().map(|&i| p[i]).collect();
        }
    }
    assemble(params, best_v, best_ms.dmax, &best_ms, iterations + rounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(t: [f64; 3], lam: [f64; 3], seed: u64) -> CapacityResult {
        let p = ChannelParams::new(t, lam).expect("valid channel");
        let cfg = IterConfig { seed, ..IterConfig::default() };
        iterative_capacity(&p, &cfg).expect("solver converges")
    }

    #[test]
    fn identity_channel_reaches_one_bit() {
        let r = solve([0.0; 3], [1.0, 1.0, 1.0], 5);
        assert!((r.capacity_bits - 1.0).abs() <= 1e-9);
        assert!(r.average_output.norm() <= 1e-6);
    }

    #[test]
    fn planar_channel_reference_point() {
        let r = solve([0.3, 0.1, 0.0], [0.4, 0.5, 0.0], 1);
        assert!((r.capacity_bits - 0.199_369_46).abs() <= 1e-6);
        assert!((r.average_output.x - 0.320_899_1).abs() <= 1e-5);
        assert!((r.average_output.y - 0.111_229_0).abs() <= 1e-5);
        assert!(r.average_output.z.abs() <= 1e-9);
        assert!(r.ensemble.validate().is_ok());
        assert!(r.max_equal_distance_residual <= 1e-8);
    }

    #[test]
    fn damping_channel_mirror_pair() {
        let r = solve([0.0, 0.0, 0.64], [0.6, 0.6, 0.36], 1);
        assert!((r.capacity_bits - 0.360_022_05).abs() <= 1e-6);
        assert!((r.average_output.z - 0.712_610_1).abs() <= 1e-5);
        assert!(r.average_output.x.abs() <= 1e-9);
        assert_eq!(r.ensemble.items.len(), 2);
        let a = r.ensemble.items[0].output;
        let b = r.ensemble.items[1].output;
        assert!((a.z - b.z).abs() <= 1e-9);
        assert!((a.x + b.x).abs() <= 1e-9);
        assert!((r.ensemble.items[0].probability - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn skewed_channel_with_competing_peaks_converges() {
        // two maximizers take turns as the scanned argmax while the
        // center closes in on their crossing; the finisher must solve
        // the crossing instead of stalling between them
        let r = solve(
            [0.060_182_411_664_595_925, 0.114_923_478_281_252_05, -0.319_350_553_270_688_84],
            [0.718_632_018_425_660_5, -0.749_017_325_967_537_7, 0.185_419_967_390_871_4],
            0,
        );
        assert!((r.capacity_bits - 0.501_503_005_073).abs() <= 1e-9);
        assert_eq!(r.ensemble.items.len(), 2);
        assert!(r.ensemble.validate().is_ok());
        assert!(r.max_equal_distance_residual <= 1e-8);
        let avg = r.ensemble.average_output;
        assert!(avg.approx_eq(r.average_output, 1e-6));
    }

    #[test]
    fn point_channels_are_refused() {
        let p = ChannelParams::new([0.0, 0.0, 0.3], [0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            iterative_capacity(&p, &IterConfig::default()),
            Err(SolverError::PointChannel)
        ));
    }

    #[test]
    fn tiny_budget_reports_best_effort() {
        let p = ChannelParams::new([0.3, 0.1, 0.0], [0.4, 0.5, 0.0]).unwrap();
        let cfg = IterConfig { max_iters: 3, ..IterConfig::default() };
        match iterative_capacity(&p, &cfg) {
            Err(SolverError::MaxItersExceeded(best)) => {
                assert!(best.capacity_bits > 0.19);
                assert_eq!(best.iterations, 3);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }
}
