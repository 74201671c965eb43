//! Eigenvalue/eigenvector tracking along parameter paths: optimal bipartite
//! matching on |dE| with eigenvector-overlap tie-breaks and adaptive
//! bisection of ambiguous steps.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use super::eig::{eigendecompose_matrix, transpose_dot};
use super::{EigenSystem, TrajectorySet};
use crate::error::{Error, Result};
use crate::model::{ParameterPath, SystemSpec, WidthSign};

#[derive(Debug, Clone)]
pub struct TrackOptions {
    /// Assignment-cost tie threshold; default 1e-8 * max(1, |E|_max).
    pub match_tol: Option<f64>,
    /// Overlap difference below which a tie stays ambiguous.
    pub overlap_margin: f64,
    /// Maximum bisection depth per ambiguous step.
    pub max_refine: usize,
    /// Eigenvalue gap treated as coalescence (relative to max(1, |E|_max)).
    pub coalesce_tol: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions {
            match_tol: None,
            overlap_margin: 1e-6,
            max_refine: 12,
            coalesce_tol: 1e-8,
        }
    }
}

/// Minimum-cost assignment (Hungarian algorithm, potentials formulation).
/// Returns `assign` with `assign[row] = col`.
pub fn hungarian(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols());
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

struct StepEvents {
    refined: bool,
    coalescent: bool,
}

fn overlap(a: &Array1<C64>, b: &Array1<C64>) -> f64 {
    transpose_dot(a, b).norm()
}

/// Matches solver outputs of `es_a` (at curve coordinate `ta`) onto `es_b`,
/// bisecting through `eval` when the eigenvalue metric and the overlap
/// tie-break both fail to separate candidates.
fn match_step(
    eval: &dyn Fn(f64) -> Result<Array2<C64>>,
    sign: WidthSign,
    ta: f64,
    tb: f64,
    es_a: &EigenSystem,
    es_b: &EigenSystem,
    depth: usize,
    step: usize,
    opts: &TrackOptions,
    events: &mut StepEvents,
) -> Result<Vec<usize>> {
    let n = es_a.n();
    let va: Vec<C64> = es_a.values().collect();
    let vb: Vec<C64> = es_b.values().collect();
    let cost = Array2::from_shape_fn((n, n), |(i, j)| (va[i] - vb[j]).norm());
    let mut assign = hungarian(&cost);

    let scale = va
        .iter()
        .chain(vb.iter())
        .map(|z| z.norm())
        .fold(1.0f64, f64::max);
    let match_tol = opts.match_tol.unwrap_or(1e-8 * scale);

    let mut ambiguous: Option<(usize, usize)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let swap_delta = cost[[i, assign[j]]] + cost[[j, assign[i]]]
                - cost[[i, assign[i]]]
                - cost[[j, assign[j]]];
            if swap_delta < match_tol {
                let keep = overlap(&es_a.vector(i).to_owned(), &es_b.vector(assign[i]).to_owned())
                    + overlap(&es_a.vector(j).to_owned(), &es_b.vector(assign[j]).to_owned());
                let swap = overlap(&es_a.vector(i).to_owned(), &es_b.vector(assign[j]).to_owned())
                    + overlap(&es_a.vector(j).to_owned(), &es_b.vector(assign[i]).to_owned());
                if swap > keep + opts.overlap_margin {
                    assign.swap(i, j);
                } else if keep <= swap + opts.overlap_margin {
                    ambiguous = Some((i, j));
                }
            }
        }
    }

    let Some((i, j)) = ambiguous else {
        return Ok(assign);
    };

    if depth >= opts.max_refine {
        let gap = (va[i] - va[j])
            .norm()
            .min((vb[assign[i]] - vb[assign[j]]).norm());
        if gap <= opts.coalesce_tol * scale {
            // the step passes through a coalescence; any pairing of the
            // merged values is equivalent
            events.coalescent = true;
            return Ok(assign);
        }
        return Err(Error::Tracking {
            step,
            detail: format!(
                "refinement exhausted with gap {gap:.3e} between labels {i} and {j}"
            ),
        });
    }

    events.refined = true;
    let tm = 0.5 * (ta + tb);
    let hm = eval(tm)?;
    let es_m = eigendecompose_matrix(&hm, sign)?;
    let m1 = match_step(eval, sign, ta, tm, es_a, &es_m, depth + 1, step, opts, events)?;
    let m2 = match_step(eval, sign, tm, tb, &es_m, es_b, depth + 1, step, opts, events)?;
    Ok(m1.iter().map(|&k| m2[k]).collect())
}

/// Tracks eigen-trajectories along an arbitrary matrix curve. `ts` are the
/// sample coordinates handed to `eval`; bisection evaluates in between.
pub fn track_curve(
    eval: &dyn Fn(f64) -> Result<Array2<C64>>,
    ts: &[f64],
    path: ParameterPath,
    sign: WidthSign,
    opts: &TrackOptions,
) -> Result<TrajectorySet> {
    assert_eq!(ts.len(), path.points.len());
    let systems: Vec<EigenSystem> = ts
        .iter()
        .map(|&t| eigendecompose_matrix(&eval(t)?, sign))
        .collect::<Result<_>>()?;
    let n = systems[0].n();

    let mut labels: Vec<Vec<usize>> = Vec::with_capacity(ts.len());
    labels.push((0..n).collect());
    let mut ambiguous_steps = Vec::new();
    let mut coalescent_steps = Vec::new();

    for step in 0..ts.len() - 1 {
        let mut events = StepEvents { refined: false, coalescent: false };
        let m = match_step(
            eval,
            sign,
            ts[step],
            ts[step + 1],
            &systems[step],
            &systems[step + 1],
            0,
            step,
            opts,
            &mut events,
        )?;
        if events.refined {
            ambiguous_steps.push(step);
        }
        if events.coalescent {
            coalescent_steps.push(step);
        }
        let prev = &labels[step];
        labels.push((0..n).map(|label| m[prev[label]]).collect());
    }

    let values: Vec<Vec<C64>> = (0..n)
        .map(|label| {
            (0..ts.len())
                .map(|t| systems[t].eigenvalues[labels[t][label]].value)
                .collect()
        })
        .collect();
    let vectors: Vec<Vec<Vec<C64>>> = (0..n)
        .map(|label| {
            (0..ts.len())
                .map(|t| systems[t].vector(labels[t][label]).to_vec())
                .collect()
        })
        .collect();

    Ok(TrajectorySet {
        path,
        labels,
        values,
        vectors,
        ambiguous_steps,
        coalescent_steps,
        systems,
    })
}

/// Tracks the eigen-system of `spec` along `path`. Bisection interpolates
/// parameter points componentwise-linearly between consecutive samples.
pub fn track(spec: &SystemSpec, path: &ParameterPath, opts: &TrackOptions) -> Result<TrajectorySet> {
    path.validate(spec.n_channels())?;
    let points = path.points.clone();
    let sign = spec.conventions.width_sign;
    let eval = move |t: f64| -> Result<Array2<C64>> {
        let i = (t.floor() as usize).min(points.len() - 2);
        let frac = t - i as f64;
        let p = points[i].lerp(&points[i + 1], frac);
        Ok(crate::model::build_hamiltonian(spec, &p)?.entries)
    };
    let ts: Vec<f64> = (0..path.points.len()).map(|i| i as f64).collect();
    track_curve(&eval, &ts, path.clone(), sign, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingClass {
    /// Re(E) trades ordering across the closest approach, widths repel.
    EnergyExchange,
    /// Im(E) trades ordering, energies repel.
    WidthExchange,
    /// Both components trade (or the pair coalesces on the path).
    FullExchangeEp,
    Avoided,
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    pub w_steps: usize,
    pub approach_tol: f64,
    pub coalesce_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { w_steps: 5, approach_tol: 1.0, coalesce_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CrossingReport {
    pub class: CrossingClass,
    pub closest_step: usize,
    pub min_approach: f64,
}

/// Classifies how a label pair behaves at its point of closest approach,
/// comparing component orderings `w_steps` on each side.
pub fn classify_crossing(
    ts: &TrajectorySet,
    pair: (usize, usize),
    opts: &ClassifyOptions,
) -> Result<CrossingReport> {
    if ts.path.closed {
        return Err(Error::Precondition("classify_crossing needs an open path".into()));
    }
    let (l1, l2) = pair;
    let n_labels = ts.n_labels();
    if l1 >= n_labels || l2 >= n_labels || l1 == l2 {
        return Err(Error::Precondition(format!("label pair ({l1}, {l2}) invalid")));
    }
    let len = ts.len();
    let diff: Vec<C64> = (0..len).map(|t| ts.values[l1][t] - ts.values[l2][t]).collect();
    let mut closest = 0usize;
    let mut dmin = f64::INFINITY;
    for (t, d) in diff.iter().enumerate() {
        if d.norm() < dmin {
            dmin = d.norm();
            closest = t;
        }
    }
    if dmin > opts.approach_tol {
        return Ok(CrossingReport {
            class: CrossingClass::Avoided,
            closest_step: closest,
            min_approach: f64::INFINITY,
        });
    }
    let scale = ts.values[l1]
        .iter()
        .chain(ts.values[l2].iter())
        .map(|z| z.norm())
        .fold(1.0f64, f64::max);
    let coalesced = dmin <= opts.coalesce_tol * scale
        || ts
            .coalescent_steps
            .iter()
            .any(|&s| s + 1 >= closest && s <= closest + 1);
    if coalesced {
        return Ok(CrossingReport {
            class: CrossingClass::FullExchangeEp,
            closest_step: closest,
            min_approach: dmin,
        });
    }
    let lo = closest.saturating_sub(opts.w_steps);
    let hi = (closest + opts.w_steps).min(len - 1);
    let re_flip = diff[lo].re * diff[hi].re < 0.0;
    let im_flip = diff[lo].im * diff[hi].im < 0.0;
    let class = match (re_flip, im_flip) {
        (true, true) => CrossingClass::FullExchangeEp,
        (true, false) => CrossingClass::EnergyExchange,
        (false, true) => CrossingClass::WidthExchange,
        (false, false) => CrossingClass::Avoided,
    };
    Ok(CrossingReport { class, closest_step: closest, min_approach: dmin })
}
