//! Parameter sweeps and saturation analysis: evaluate the full observable
//! set along a path, detect entropy plateaus, and search for equilibrium.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, ParameterPath, ParameterPoint, SystemSpec};
use crate::observables::{
    detect_equilibrium, gram_defect, mixing_coefficients, phase_rigidity, EquilibriumVerdict,
    Thresholds,
};
use crate::spectral::{eigendecompose_matrix, hungarian, EigenSystem, EigenvalueRecord};

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub parallel: bool,
    pub thresholds: Thresholds,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { parallel: true, thresholds: Thresholds::default() }
    }
}

/// Everything evaluated at one sweep sample.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub a: f64,
    #[serde(with = "crate::cplx::vec")]
    pub omegas: Vec<C64>,
    pub energies: Vec<f64>,
    pub widths: Vec<f64>,
    pub rigidities: Vec<f64>,
    pub entropies: Vec<f64>,
    pub defect: f64,
    pub min_gap: f64,
    pub equilibrium: bool,
}

/// Uniform resampling of a path: `samples` points with the first and last
/// coinciding with the path's endpoints.
pub fn sample_path(path: &ParameterPath, samples: usize) -> Result<Vec<ParameterPoint>> {
    if samples < 2 {
        return Err(Error::Precondition("a sweep needs at least 2 samples".into()));
    }
    let segs = path.points.len() - 1;
    let mut out = Vec::with_capacity(samples);
    for i in 0..samples {
        let u = i as f64 / (samples - 1) as f64 * segs as f64;
        let k = (u.floor() as usize).min(segs - 1);
        out.push(path.points[k].lerp(&path.points[k + 1], u - k as f64));
    }
    Ok(out)
}

/// Full observable evaluation at a single parameter point.
pub fn evaluate_at(
    spec: &SystemSpec,
    index: usize,
    point: &ParameterPoint,
    thresholds: &Thresholds,
) -> Result<SweepRow> {
    evaluate_full(spec, index, point, thresholds).map(|(row, _, _)| row)
}

fn evaluate_full(
    spec: &SystemSpec,
    index: usize,
    point: &ParameterPoint,
    thresholds: &Thresholds,
) -> Result<(SweepRow, EigenSystem, EquilibriumVerdict)> {
    let h = build_hamiltonian(spec, point)
        .map_err(|e| Error::Domain(format!("sweep point {index}: {e}")))?;
    let es = eigendecompose_matrix(&h.entries, spec.conventions.width_sign)
        .map_err(|e| Error::Numerical {
            what: format!("sweep point {index}: {e}"),
            worst_residual: f64::NAN,
        })?;
    let n = es.n();
    // the unperturbed Hamiltonian is diagonal, so its eigenbasis is the
    // standard one
    let basis = Array2::<C64>::eye(n);
    let mix = mixing_coefficients(basis.view(), &es)?;
    let mut th = *thresholds;
    if th.t_gap <= 0.0 {
        th.t_gap = 0.1 * mean_spacing(&es.eigenvalues);
    }
    let verdict = detect_equilibrium(&es, basis.view(), &th)?;
    let row = SweepRow {
        index,
        a: point.a,
        omegas: point.omegas.clone(),
        energies: es.eigenvalues.iter().map(|e| e.energy).collect(),
        widths: es.eigenvalues.iter().map(|e| e.width).collect(),
        rigidities: (0..n).map(|i| phase_rigidity(es.vector(i))).collect(),
        entropies: mix.entropies,
        defect: gram_defect(&es),
        min_gap: es.min_gap(),
        equilibrium: verdict.passed,
    };
    Ok((row, es, verdict))
}

/// Reorders the per-state columns of each row so state `l` follows one
/// continuous trajectory along the path (nearest-eigenvalue assignment
/// between consecutive samples).
fn relabel_rows(rows: &mut [SweepRow], systems: &[EigenSystem]) {
    let n = match systems.first() {
        Some(es) => es.n(),
        None => return,
    };
    let mut labels: Vec<usize> = (0..n).collect();
    for t in 1..systems.len() {
        let prev: Vec<C64> = systems[t - 1].values().collect();
        let cur: Vec<C64> = systems[t].values().collect();
        let mut cost = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                cost[[i, j]] = (prev[i] - cur[j]).norm();
            }
        }
        let m = hungarian(&cost);
        labels = labels.iter().map(|&l| m[l]).collect();
        let row = &mut rows[t];
        for field in [
            &mut row.energies,
            &mut row.widths,
            &mut row.rigidities,
            &mut row.entropies,
        ] {
            let relabeled: Vec<f64> = labels.iter().map(|&l| field[l]).collect();
            *field = relabeled;
        }
    }
}

fn mean_spacing(values: &[EigenvalueRecord]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut re: Vec<f64> = values.iter().map(|e| e.energy).collect();
    re.sort_by(f64::total_cmp);
    let span = re[re.len() - 1] - re[0];
    if span > 0.0 {
        span / (re.len() - 1) as f64
    } else {
        // degenerate real parts: fall back to the full complex spread
        let mut worst: f64 = 0.0;
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                worst = worst.max((values[i].value - values[j].value).norm());
            }
        }
        worst / (values.len() - 1) as f64
    }
}

/// Evaluates every sample of the path. The parallel and serial schedules
/// produce identical rows; rayon only changes who computes each index.
pub fn run_sweep(
    spec: &SystemSpec,
    path: &ParameterPath,
    samples: usize,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    path.validate(spec.n_channels())?;
    let points = sample_path(path, samples)?;
    let full: Vec<(SweepRow, EigenSystem, EquilibriumVerdict)> = if opts.parallel {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| evaluate_full(spec, i, p, &opts.thresholds))
            .collect::<Result<_>>()?
    } else {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| evaluate_full(spec, i, p, &opts.thresholds))
            .collect::<Result<_>>()?
    };
    let (mut rows, systems): (Vec<SweepRow>, Vec<EigenSystem>) =
        full.into_iter().map(|(row, es, _)| (row, es)).unzip();
    relabel_rows(&mut rows, &systems);
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PlateauReport {
    pub onset_index: usize,
    pub saturated_value: f64,
}

/// Earliest index from which every length-`window` slice of the series stays
/// within `delta` of flat. `None` if the tail never settles.
pub fn detect_plateau(series: &[f64], window: usize, delta: f64) -> Result<Option<PlateauReport>> {
    if window < 2 {
        return Err(Error::Precondition("plateau window must be at least 2".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::Precondition("plateau delta must be positive".into()));
    }
    if series.len() < window {
        return Err(Error::Precondition(format!(
            "series of {} points is shorter than the window {window}",
            series.len()
        )));
    }
    // flat[s] = the window starting at s has range <= delta
    let last_start = series.len() - window;
    let mut onset = None;
    for s in (0..=last_start).rev() {
        let slice = &series[s..s + window];
        let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = slice.iter().copied().fold(f64::INFINITY, f64::min);
        if max - min <= delta {
            onset = Some(s);
        } else {
            break;
        }
    }
    Ok(onset.map(|s| PlateauReport {
        onset_index: s,
        saturated_value: series[s..].iter().sum::<f64>() / (series.len() - s) as f64,
    }))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EquilibriumFinding {
    pub index: usize,
    pub row: SweepRow,
    pub verdict: EquilibriumVerdict,
    /// Plateau of the mean per-sample entropy, when one exists.
    pub plateau: Option<PlateauReport>,
}

#[derive(Debug, Clone, Copy)]
pub struct EquilibriumSearchOptions {
    pub sweep: SweepOptions,
    pub plateau_window: usize,
    pub plateau_delta: f64,
}

impl Default for EquilibriumSearchOptions {
    fn default() -> Self {
        EquilibriumSearchOptions {
            sweep: SweepOptions::default(),
            plateau_window: 5,
            plateau_delta: 1e-3,
        }
    }
}

/// Sweeps the path and returns the first sample where the equilibrium
/// detector fires, together with the entropy plateau if the series has one.
pub fn find_equilibrium(
    spec: &SystemSpec,
    path: &ParameterPath,
    samples: usize,
    opts: &EquilibriumSearchOptions,
) -> Result<Option<EquilibriumFinding>> {
    let rows = run_sweep(spec, path, samples, &opts.sweep)?;
    let mean_entropy: Vec<f64> = rows
        .iter()
        .map(|r| r.entropies.iter().sum::<f64>() / r.entropies.len() as f64)
        .collect();
    let plateau = if mean_entropy.len() >= opts.plateau_window {
        detect_plateau(&mean_entropy, opts.plateau_window, opts.plateau_delta)?
    } else {
        None
    };
    let Some(row) = rows.into_iter().find(|r| r.equilibrium) else {
        return Ok(None);
    };
    let point = sample_path(path, samples)?.swap_remove(row.index);
    let (_, _, verdict) = evaluate_full(spec, row.index, &point, &opts.sweep.thresholds)?;
    Ok(Some(EquilibriumFinding { index: row.index, row, verdict, plateau }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Channel, Conventions, DiagEnergy};


    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Two levels pulled into degeneracy at a = 1, decaying through two
    /// channels whose couplings rotate the eigenvectors onto (1, +-1)/sqrt(2).
    pub(crate) fn convergence_spec() -> SystemSpec {
        SystemSpec {
            n_states: 2,
            diag_energies: vec![
                DiagEnergy { e0: 0.0, e1: 0.0, gamma0: 0.1 },
                DiagEnergy { e0: 0.5, e1: -0.5, gamma0: 0.1 },
            ],
            channels: vec![
                Channel { w: vec![c(1.0, 0.0), c(1.0, 0.0)], label: "sym".into() },
                Channel { w: vec![c(1.0, 0.0), c(-1.0, 0.0)], label: "antisym".into() },
            ],
            conventions: Conventions::default(),
        }
    }

    pub(crate) fn convergence_path() -> ParameterPath {
        ParameterPath::open(vec![
            ParameterPoint { a: 0.0, omegas: vec![c(0.6, 0.0), c(0.2, 0.0)] },
            ParameterPoint { a: 1.0, omegas: vec![c(0.6, 0.0), c(0.2, 0.0)] },
        ])
    }

    #[test]
    fn sample_path_hits_endpoints() {
        let pts = sample_path(&convergence_path(), 11).unwrap();
        assert_eq!(pts.len(), 11);
        assert_eq!(pts[0].a, 0.0);
        assert_eq!(pts[10].a, 1.0);
        assert!((pts[5].a - 0.5).abs() < 1e-15);
        assert!(sample_path(&convergence_path(), 1).is_err());
    }

    #[test]
    fn sweep_sees_equilibrium_at_degeneracy() {
        let rows = run_sweep(&convergence_spec(), &convergence_path(), 101,
            &SweepOptions::default()).unwrap();
        assert!(!rows[0].equilibrium);
        let last = rows.last().unwrap();
        assert!(last.equilibrium, "defect {} entropies {:?}", last.defect, last.entropies);
        // entropy climbs to its maximum log2(2) = 1
        let h_end = last.entropies.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((h_end - 1.0).abs() < 1e-9);
    }

    #[test]
    fn serial_and_parallel_sweeps_are_identical() {
        let spec = convergence_spec();
        let path = convergence_path();
        let serial = run_sweep(&spec, &path, 64,
            &SweepOptions { parallel: false, ..Default::default() }).unwrap();
        let parallel = run_sweep(&spec, &path, 64,
            &SweepOptions { parallel: true, ..Default::default() }).unwrap();
        for (s, p) in serial.iter().zip(&parallel) {
            assert_eq!(s.a, p.a);
            assert_eq!(s.energies, p.energies);
            assert_eq!(s.widths, p.widths);
            assert_eq!(s.rigidities, p.rigidities);
            assert_eq!(s.entropies, p.entropies);
            assert_eq!(s.defect, p.defect);
            assert_eq!(s.min_gap, p.min_gap);
            assert_eq!(s.equilibrium, p.equilibrium);
        }
    }

    #[test]
    fn sweep_labels_follow_trajectories_through_a_crossing() {
        // two levels with a width offset cross in energy at a = 0.5; weak
        // coupling keeps the crossing real (energy exchange), so sorted
        // per-point order would swap the labels mid-sweep
        let spec = SystemSpec {
            n_states: 2,
            diag_energies: vec![
                DiagEnergy { e0: -0.5, e1: 1.0, gamma0: 0.1 },
                DiagEnergy { e0: 0.5, e1: -1.0, gamma0: 0.7 },
            ],
            channels: vec![Channel { w: vec![c(1.0, 0.0), c(1.0, 0.0)], label: String::new() }],
            conventions: Conventions::default(),
        };
        let path = ParameterPath::open(vec![
            ParameterPoint { a: 0.0, omegas: vec![c(0.1, 0.0)] },
            ParameterPoint { a: 1.0, omegas: vec![c(0.1, 0.0)] },
        ]);
        let rows = run_sweep(&spec, &path, 101, &SweepOptions::default()).unwrap();
        let first = &rows[0];
        let last = rows.last().unwrap();
        assert!(first.energies[0] < first.energies[1]);
        // label 0 keeps following the rising level past the crossing
        assert!(last.energies[0] > last.energies[1], "labels were re-sorted: {:?}", last.energies);
        for w in rows.windows(2) {
            for l in 0..2 {
                assert!(
                    (w[1].energies[l] - w[0].energies[l]).abs() < 0.05,
                    "discontinuity at sample {}",
                    w[1].index
                );
            }
        }
    }

    #[test]
    fn plateau_constant_series() {
        let r = detect_plateau(&[2.0; 10], 3, 1e-6).unwrap().unwrap();
        assert_eq!(r.onset_index, 0);
        assert_eq!(r.saturated_value, 2.0);
    }

    #[test]
    fn plateau_after_ramp() {
        let mut s: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        s.extend([0.9; 10]);
        let r = detect_plateau(&s, 4, 1e-3).unwrap().unwrap();
        assert_eq!(r.onset_index, 9);
        assert!((r.saturated_value - 0.9).abs() < 1e-12);
    }

    #[test]
    fn plateau_absent_and_preconditions() {
        let ramp: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(detect_plateau(&ramp, 4, 0.5).unwrap().is_none());
        assert!(detect_plateau(&ramp, 1, 0.5).is_err());
        assert!(detect_plateau(&ramp, 4, 0.0).is_err());
        assert!(detect_plateau(&ramp[..2], 4, 0.5).is_err());
    }

    #[test]
    fn plateau_tolerates_noise_within_delta() {
        let s: Vec<f64> = (0..30)
            .map(|i| 1.0 + 1e-4 * ((i * 7) % 3) as f64)
            .collect();
        let r = detect_plateau(&s, 5, 1e-3).unwrap().unwrap();
        assert_eq!(r.onset_index, 0);
    }

    #[test]
    fn equilibrium_search_finds_onset() {
        let found = find_equilibrium(&convergence_spec(), &convergence_path(), 201,
            &EquilibriumSearchOptions::default()).unwrap().unwrap();
        assert!(found.index > 100, "fires too early at {}", found.index);
        assert!(found.row.equilibrium);
        if let Some(p) = found.plateau {
            assert!(p.saturated_value > 0.9);
        }
    }

    #[test]
    fn equilibrium_search_none_when_detuned() {
        // far from degeneracy the eigenvectors stay nearly aligned with the
        // basis states: no equilibrium anywhere on the path
        let spec = convergence_spec();
        let path = ParameterPath::open(vec![
            ParameterPoint { a: 0.0, omegas: vec![c(0.05, 0.0), c(0.01, 0.0)] },
            ParameterPoint { a: 0.2, omegas: vec![c(0.05, 0.0), c(0.01, 0.0)] },
        ]);
        let found = find_equilibrium(&spec, &path, 51,
            &EquilibriumSearchOptions::default()).unwrap();
        assert!(found.is_none());
    }
}
