//! Locating exceptional points: Newton on the 2x2 discriminant, a
//! cusp-aware simplex search plus Newton polish for N > 2, and loop
//! encircling to verify the exchange signature.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, ParameterPath, ParameterPoint, SystemSpec};
use crate::spectral::{
    eigendecompose_matrix, track_curve, EigenSystem, TrackOptions, TrajectorySet,
};
use crate::model::WidthSign;

const ZERO: C64 = C64::new(0.0, 0.0);

/// D = (eps1 - eps2)^2 + 4 omega^2; zero iff [[eps1, omega], [omega, eps2]]
/// has a double eigenvalue. Eigenvalues are (eps1 + eps2)/2 +- sqrt(D)/2.
pub fn discriminant_2x2(eps1: C64, eps2: C64, omega: C64) -> C64 {
    let d = eps1 - eps2;
    d * d + 4.0 * omega * omega
}

/// Direct two-level model [[eps1, omega], [omega, eps2]].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevel {
    pub eps1: C64,
    pub eps2: C64,
    pub omega: C64,
}

impl TwoLevel {
    pub fn matrix(&self) -> Array2<C64> {
        let mut m = Array2::<C64>::zeros((2, 2));
        m[[0, 0]] = self.eps1;
        m[[0, 1]] = self.omega;
        m[[1, 0]] = self.omega;
        m[[1, 1]] = self.eps2;
        m
    }

    fn with_unknown(&self, unknown: TwoLevelUnknown, z: C64) -> TwoLevel {
        let mut m = *self;
        match unknown {
            TwoLevelUnknown::Eps1 => m.eps1 = z,
            TwoLevelUnknown::Eps2 => m.eps2 = z,
            TwoLevelUnknown::Omega => m.omega = z,
        }
        m
    }
}

/// Which complex entry of the two-level model carries the two real search
/// unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoLevelUnknown {
    Eps1,
    Eps2,
    Omega,
}

/// A real search direction in (a, omega) parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "channel")]
pub enum Knob {
    SweepA,
    OmegaRe(usize),
    OmegaIm(usize),
}

impl Knob {
    pub fn apply(&self, p: &mut ParameterPoint, v: f64) {
        match *self {
            Knob::SweepA => p.a = v,
            Knob::OmegaRe(c) => p.omegas[c].re = v,
            Knob::OmegaIm(c) => p.omegas[c].im = v,
        }
    }

    pub fn get(&self, p: &ParameterPoint) -> f64 {
        match *self {
            Knob::SweepA => p.a,
            Knob::OmegaRe(c) => p.omegas[c].re,
            Knob::OmegaIm(c) => p.omegas[c].im,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpSearchOptions {
    pub max_iter: usize,
    /// min-gap acceptance, relative to ||H||_F.
    pub ep_gap_tol: f64,
    /// |phi^T phi| acceptance for the coalescing pair at unit norm.
    pub ep_so_tol: f64,
    /// Run the encircling verification after convergence.
    pub verify: bool,
    pub verify_radius: f64,
    pub verify_steps: usize,
}

impl Default for EpSearchOptions {
    fn default() -> Self {
        EpSearchOptions {
            max_iter: 50,
            ep_gap_tol: 1e-7,
            ep_so_tol: 1e-6,
            verify: true,
            verify_radius: 0.1,
            verify_steps: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub enum EpLocation {
    /// 2x2 direct mode: solved model plus which entry was searched.
    Direct { model: TwoLevel, unknown: TwoLevelUnknown },
    /// Spec mode: the parameter point, the two knobs, and their values.
    Spec { point: ParameterPoint, knobs: [Knob; 2], x: [f64; 2] },
}

#[derive(Debug, Clone)]
pub struct EpCandidate {
    pub location: EpLocation,
    pub pair: (usize, usize),
    pub min_gap: f64,
    pub self_orth: f64,
    pub verified: bool,
}

#[derive(Debug, Clone)]
pub struct EncircleResult {
    pub permutation: Vec<usize>,
    pub trajectories: TrajectorySet,
}

impl EncircleResult {
    pub fn is_transposition_of(&self, pair: (usize, usize)) -> bool {
        let p = &self.permutation;
        (0..p.len()).all(|l| {
            if l == pair.0 {
                p[l] == pair.1
            } else if l == pair.1 {
                p[l] == pair.0
            } else {
                p[l] == l
            }
        })
    }

    pub fn is_identity(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &p)| i == p)
    }
}

fn discriminant_derivative(m: &TwoLevel, unknown: TwoLevelUnknown) -> C64 {
    match unknown {
        TwoLevelUnknown::Eps1 => 2.0 * (m.eps1 - m.eps2),
        TwoLevelUnknown::Eps2 => -2.0 * (m.eps1 - m.eps2),
        TwoLevelUnknown::Omega => 8.0 * m.omega,
    }
}

fn self_orth_of_pair(es: &EigenSystem, pair: (usize, usize)) -> f64 {
    // |phi^T phi| at unit norm, regardless of the stored normalization
    let dot = |i: usize| {
        let v = es.vector(i);
        let s = v.iter().map(|z| z * z).sum::<C64>().norm();
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        s / n
    };
    dot(pair.0).min(dot(pair.1))
}

/// Index pair of the two closest eigenvalues.
fn closest_pair(es: &EigenSystem) -> (usize, usize) {
    let n = es.n();
    let mut best = (0usize, 1usize);
    let mut gap = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let g = (es.eigenvalues[i].value - es.eigenvalues[j].value).norm();
            if g < gap {
                gap = g;
                best = (i, j);
            }
        }
    }
    best
}

/// Newton iteration on D = 0 over one complex unknown of the two-level
/// model. Converges quadratically from any seed inside the root's basin;
/// a vanishing derivative or exhausted iterations is a no-convergence error.
pub fn find_ep_2x2(
    base: TwoLevel,
    unknown: TwoLevelUnknown,
    seed: C64,
    opts: &EpSearchOptions,
) -> Result<EpCandidate> {
    let scale = (base.eps1.norm() + base.eps2.norm() + base.omega.norm() + seed.norm()).powi(2);
    let scale = scale.max(1.0);
    let mut z = seed;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let m = base.with_unknown(unknown, z);
        let d = discriminant_2x2(m.eps1, m.eps2, m.omega);
        if d.norm() <= 1e-12 * scale {
            converged = true;
            break;
        }
        let dd = discriminant_derivative(&m, unknown);
        if dd.norm() < 1e-14 * scale.sqrt() {
            return Err(Error::NoConvergence {
                iterations: opts.max_iter,
                last: format!("{z} (singular derivative)"),
            });
        }
        z -= d / dd;
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NoConvergence { iterations: opts.max_iter, last: format!("{z}") });
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations: opts.max_iter, last: format!("{z}") });
    }

    let model = base.with_unknown(unknown, z);
    let es = eigendecompose_matrix(&model.matrix(), WidthSign::PhysicalMinus)?;
    let hnorm = model.matrix().iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
    let min_gap = es.min_gap();
    let self_orth = self_orth_of_pair(&es, (0, 1));

    let mut verified = min_gap <= opts.ep_gap_tol * hnorm.max(1.0) && self_orth <= opts.ep_so_tol;
    if verified && opts.verify {
        let loop_r = opts.verify_radius * z.norm().max(1.0);
        match encircle_direct(base, unknown, z, loop_r, opts.verify_steps) {
            Ok(res) => verified = res.is_transposition_of((0, 1)),
            Err(_) => verified = false,
        }
    }

    Ok(EpCandidate {
        location: EpLocation::Direct { model, unknown },
        pair: (0, 1),
        min_gap,
        self_orth,
        verified,
    })
}

/// Closed loop around `center` in the complex plane of the chosen two-level
/// unknown; returns the net label permutation and the loop trajectories.
pub fn encircle_direct(
    base: TwoLevel,
    unknown: TwoLevelUnknown,
    center: C64,
    radius: f64,
    steps: usize,
) -> Result<EncircleResult> {
    if radius <= 0.0 {
        return Err(Error::Encircle("radius must be positive".into()));
    }
    if steps < 16 {
        return Err(Error::Encircle("need at least 16 steps".into()));
    }
    let eval = move |t: f64| -> Result<Array2<C64>> {
        let th = 2.0 * std::f64::consts::PI * t / steps as f64;
        let z = center + C64::new(radius * th.cos(), radius * th.sin());
        Ok(base.with_unknown(unknown, z).matrix())
    };
    let ts: Vec<f64> = (0..=steps).map(|k| k as f64).collect();
    let points: Vec<ParameterPoint> = ts
        .iter()
        .map(|&t| {
            let th = 2.0 * std::f64::consts::PI * t / steps as f64;
            let z = center + C64::new(radius * th.cos(), radius * th.sin());
            ParameterPoint { a: th, omegas: vec![z] }
        })
        .collect();
    let mut path = ParameterPath { points, closed: true };
    // the loop closes in z even though the bookkeeping coordinate a = theta
    // runs 0..2pi
    path.points.last_mut().unwrap().a = 0.0;
    let trajectories = track_curve(&eval, &ts, path, WidthSign::PhysicalMinus, &TrackOptions::default())
        .map_err(remap_tracking)?;
    let permutation = trajectories.net_permutation();
    Ok(EncircleResult { permutation, trajectories })
}

/// Closed loop around `center_x` in the plane spanned by two knobs of a
/// SystemSpec parameter point.
pub fn encircle_spec(
    spec: &SystemSpec,
    base_point: &ParameterPoint,
    knobs: [Knob; 2],
    center_x: [f64; 2],
    radius: f64,
    steps: usize,
    opts: &TrackOptions,
) -> Result<EncircleResult> {
    if radius <= 0.0 {
        return Err(Error::Encircle("radius must be positive".into()));
    }
    if steps < 16 {
        return Err(Error::Encircle("need at least 16 steps".into()));
    }
    let sign = spec.conventions.width_sign;
    let spec_owned = spec.clone();
    let base = base_point.clone();
    let eval = move |t: f64| -> Result<Array2<C64>> {
        let th = 2.0 * std::f64::consts::PI * t / steps as f64;
        let mut p = base.clone();
        knobs[0].apply(&mut p, center_x[0] + radius * th.cos());
        knobs[1].apply(&mut p, center_x[1] + radius * th.sin());
        Ok(build_hamiltonian(&spec_owned, &p)?.entries)
    };
    let ts: Vec<f64> = (0..=steps).map(|k| k as f64).collect();
    let mut points = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let th = 2.0 * std::f64::consts::PI * (k % steps) as f64 / steps as f64;
        let mut p = base_point.clone();
        knobs[0].apply(&mut p, center_x[0] + radius * th.cos());
        knobs[1].apply(&mut p, center_x[1] + radius * th.sin());
        points.push(p);
    }
    let path = ParameterPath { points, closed: true };
    let trajectories = track_curve(&eval, &ts, path, sign, opts).map_err(remap_tracking)?;
    let permutation = trajectories.net_permutation();
    Ok(EncircleResult { permutation, trajectories })
}

fn remap_tracking(e: Error) -> Error {
    match e {
        Error::Tracking { step, detail } => Error::Encircle(format!(
            "tracking ambiguity at loop step {step} ({detail}); increase the radius or the step count"
        )),
        other => other,
    }
}

/// The two eigenvalues of `es` nearest to a reference pair (used for
/// continuation while the search point moves).
fn tracked_pair(es: &EigenSystem, reference: (C64, C64)) -> (C64, C64) {
    let vals: Vec<C64> = es.values().collect();
    let mut i_best = 0usize;
    for (i, v) in vals.iter().enumerate() {
        if (v - reference.0).norm() < (vals[i_best] - reference.0).norm() {
            i_best = i;
        }
    }
    let mut j_best = usize::MAX;
    for (j, v) in vals.iter().enumerate() {
        if j == i_best {
            continue;
        }
        if j_best == usize::MAX || (v - reference.1).norm() < (vals[j_best] - reference.1).norm() {
            j_best = j;
        }
    }
    (vals[i_best], vals[j_best])
}

struct NdObjective<'a> {
    spec: &'a SystemSpec,
    base: &'a ParameterPoint,
    knobs: [Knob; 2],
    reference: std::cell::Cell<(C64, C64)>,
}

impl NdObjective<'_> {
    fn point_at(&self, x: [f64; 2]) -> ParameterPoint {
        let mut p = self.base.clone();
        self.knobs[0].apply(&mut p, x[0]);
        self.knobs[1].apply(&mut p, x[1]);
        p
    }

    fn decompose(&self, x: [f64; 2]) -> Result<EigenSystem> {
        let h = build_hamiltonian(self.spec, &self.point_at(x))?;
        eigendecompose_matrix(&h.entries, self.spec.conventions.width_sign)
    }

    fn pair_at(&self, x: [f64; 2]) -> Result<(C64, C64)> {
        let es = self.decompose(x)?;
        Ok(tracked_pair(&es, self.reference.get()))
    }

    /// Complex effective discriminant of the tracked pair: (E_i - E_j)^2.
    fn pair_discriminant(&self, x: [f64; 2]) -> Result<C64> {
        let (a, b) = self.pair_at(x)?;
        Ok((a - b) * (a - b))
    }
}

/// Derivative-free simplex minimization of the min-gap^2 objective (which has
/// a square-root cusp at the solution), with shrink restarts.
fn nelder_mead(
    f: &dyn Fn([f64; 2]) -> Result<f64>,
    seed: [f64; 2],
    initial_scale: f64,
    target: f64,
    max_eval: usize,
) -> Result<([f64; 2], f64)> {
    let mut best = (seed, f(seed)?);
    let mut evals = 1usize;
    for restart in 0..4 {
        let h = initial_scale * 0.4f64.powi(restart);
        let mut simplex = vec![
            best.0,
            [best.0[0] + h, best.0[1]],
            [best.0[0], best.0[1] + h],
        ];
        let mut values = Vec::with_capacity(3);
        for &x in &simplex {
            values.push(f(x)?);
            evals += 1;
        }
        loop {
            if evals > max_eval {
                return Ok(best);
            }
            // order ascending
            let mut idx = [0usize, 1, 2];
            idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
            let (b, m, w) = (idx[0], idx[1], idx[2]);
            if values[b] < best.1 {
                best = (simplex[b], values[b]);
            }
            if best.1 <= target {
                return Ok(best);
            }
            let size = ((simplex[b][0] - simplex[w][0]).powi(2)
                + (simplex[b][1] - simplex[w][1]).powi(2))
            .sqrt()
            .max(
                ((simplex[b][0] - simplex[m][0]).powi(2)
                    + (simplex[b][1] - simplex[m][1]).powi(2))
                .sqrt(),
            );
            if size < 1e-12 * (1.0 + best.0[0].abs() + best.0[1].abs()) {
                break; // converged simplex, restart shrunk
            }
            let centroid = [
                0.5 * (simplex[b][0] + simplex[m][0]),
                0.5 * (simplex[b][1] + simplex[m][1]),
            ];
            let refl = [
                centroid[0] + (centroid[0] - simplex[w][0]),
                centroid[1] + (centroid[1] - simplex[w][1]),
            ];
            let f_refl = f(refl)?;
            evals += 1;
            if f_refl < values[b] {
                let exp = [
                    centroid[0] + 2.0 * (centroid[0] - simplex[w][0]),
                    centroid[1] + 2.0 * (centroid[1] - simplex[w][1]),
                ];
                let f_exp = f(exp)?;
                evals += 1;
                if f_exp < f_refl {
                    simplex[w] = exp;
                    values[w] = f_exp;
                } else {
                    simplex[w] = refl;
                    values[w] = f_refl;
                }
            } else if f_refl < values[m] {
                simplex[w] = refl;
                values[w] = f_refl;
            } else {
                let contr = [
                    centroid[0] + 0.5 * (simplex[w][0] - centroid[0]),
                    centroid[1] + 0.5 * (simplex[w][1] - centroid[1]),
                ];
                let f_contr = f(contr)?;
                evals += 1;
                if f_contr < values[w] {
                    simplex[w] = contr;
                    values[w] = f_contr;
                } else {
                    // shrink toward best
                    for k in 0..3 {
                        if k == b {
                            continue;
                        }
                        simplex[k] = [
                            simplex[b][0] + 0.5 * (simplex[k][0] - simplex[b][0]),
                            simplex[b][1] + 0.5 * (simplex[k][1] - simplex[b][1]),
                        ];
                        values[k] = f(simplex[k])?;
                        evals += 1;
                    }
                }
            }
        }
    }
    Ok(best)
}

/// EP search for N >= 2 systems over two designated real knobs: simplex
/// minimization of the hinted pair's gap, then Newton polish on the pair's
/// effective discriminant, then verification by encircling.
pub fn find_ep_nd(
    spec: &SystemSpec,
    pair_hint: (usize, usize),
    knobs: [Knob; 2],
    base_point: &ParameterPoint,
    seed: [f64; 2],
    opts: &EpSearchOptions,
) -> Result<EpCandidate> {
    let obj = NdObjective {
        spec,
        base: base_point,
        knobs,
        reference: std::cell::Cell::new((ZERO, ZERO)),
    };
    // seed the pair reference from the hint at the seed point
    {
        let es = obj.decompose(seed)?;
        let n = es.n();
        if pair_hint.0 >= n || pair_hint.1 >= n || pair_hint.0 == pair_hint.1 {
            return Err(Error::Precondition(format!("pair hint {pair_hint:?} invalid for N = {n}")));
        }
        obj.reference.set((
            es.eigenvalues[pair_hint.0].value,
            es.eigenvalues[pair_hint.1].value,
        ));
    }
    // tolerance anchored at the seed's scale so a diverging iterate cannot
    // inflate its own acceptance threshold
    let hnorm_seed = {
        let h = build_hamiltonian(spec, &obj.point_at(seed))?;
        h.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    };
    let gap_tol_abs = opts.ep_gap_tol * hnorm_seed.max(1.0);

    let best_gap = std::cell::Cell::new(f64::INFINITY);
    let scale0 = 0.1 * (1.0 + seed[0].abs() + seed[1].abs());
    let f = |x: [f64; 2]| -> Result<f64> {
        let (a, b) = obj.pair_at(x)?;
        let g = (a - b).norm();
        // advance the pair reference only along improvements, so far-flung
        // simplex trials cannot re-anchor it
        if g < best_gap.get() {
            best_gap.set(g);
            obj.reference.set((a, b));
        }
        Ok(g * g)
    };
    let (mut x, _) = nelder_mead(&f, seed, scale0, gap_tol_abs * gap_tol_abs, 2000)?;

    // damped Newton polish on the complex pair discriminant
    for _ in 0..opts.max_iter {
        let (va, vb) = obj.pair_at(x)?;
        if (va - vb).norm() <= gap_tol_abs {
            break;
        }
        obj.reference.set((va, vb));
        let d0 = (va - vb) * (va - vb);
        let h = 1e-6 * (1.0 + x[0].abs() + x[1].abs());
        let dx = obj.pair_discriminant([x[0] + h, x[1]])?
            - obj.pair_discriminant([x[0] - h, x[1]])?;
        let dy = obj.pair_discriminant([x[0], x[1] + h])?
            - obj.pair_discriminant([x[0], x[1] - h])?;
        let j = [
            [dx.re / (2.0 * h), dy.re / (2.0 * h)],
            [dx.im / (2.0 * h), dy.im / (2.0 * h)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let mut step = [
            (j[1][1] * d0.re - j[0][1] * d0.im) / det,
            (-j[1][0] * d0.re + j[0][0] * d0.im) / det,
        ];
        let len = (step[0] * step[0] + step[1] * step[1]).sqrt();
        let cap = 0.5 * (1.0 + x[0].abs() + x[1].abs());
        if len > cap {
            step = [step[0] * cap / len, step[1] * cap / len];
        }
        let mut accepted = false;
        let mut damp = 1.0;
        for _ in 0..8 {
            let trial = [x[0] - damp * step[0], x[1] - damp * step[1]];
            if obj.pair_discriminant(trial)?.norm() < d0.norm() {
                x = trial;
                accepted = true;
                break;
            }
            damp *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let es = obj.decompose(x)?;
    let pair = closest_pair(&es);
    let min_gap = (es.eigenvalues[pair.0].value - es.eigenvalues[pair.1].value).norm();
    let self_orth = self_orth_of_pair(&es, pair);
    if min_gap > gap_tol_abs {
        return Err(Error::EpNotFound {
            best_gap: min_gap,
            detail: format!("knobs at ({:.6}, {:.6})", x[0], x[1]),
        });
    }

    let mut verified = self_orth <= opts.ep_so_tol;
    if verified && opts.verify {
        let loop_r = opts.verify_radius * (1.0 + x[0].abs() + x[1].abs()) * 0.1;
        match encircle_spec(
            spec,
            base_point,
            knobs,
            x,
            loop_r,
            opts.verify_steps,
            &TrackOptions::default(),
        ) {
            Ok(res) => {
                let perm = &res.permutation;
                // the loop's own label order need not match `pair`; accept any
                // transposition that swaps exactly one pair
                let moved: Vec<usize> =
                    perm.iter().enumerate().filter(|&(i, &p)| i != p).map(|(i, _)| i).collect();
                verified = moved.len() == 2 && perm[moved[0]] == moved[1];
            }
            Err(_) => verified = false,
        }
    }

    Ok(EpCandidate {
        location: EpLocation::Spec { point: obj.point_at(x), knobs, x },
        pair,
        min_gap,
        self_orth,
        verified,
    })
}
