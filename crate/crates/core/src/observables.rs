//! Per-state observables: phase rigidity, external-mixing norm, mixing
//! coefficients over an unperturbed basis, Shannon entropy, and the
//! equilibrium detector built from them.

use ndarray::{Array2, ArrayView1, ArrayView2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spectral::{EigenSystem, SO_TOL};

/// r = |phi^T phi| / <phi|phi>, in [0, 1]. One for a real (or globally
/// phased) vector, zero for a self-orthogonal one.
pub fn phase_rigidity(v: ArrayView1<C64>) -> f64 {
    let s: C64 = v.iter().map(|z| z * z).sum();
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    (s.norm() / n).min(1.0)
}

/// 1 / r; diverges as the state approaches an exceptional point.
pub fn em_norm(v: ArrayView1<C64>) -> Result<f64> {
    let r = phase_rigidity(v);
    if r < SO_TOL {
        return Err(Error::DivergingEm { self_overlap: r });
    }
    Ok(1.0 / r)
}

/// Largest deviation of the unit-normalized conjugated Gram matrix from the
/// identity: zero exactly when the eigenvectors are mutually orthogonal.
pub fn gram_defect(es: &EigenSystem) -> f64 {
    let n = es.n();
    let norms: Vec<f64> = (0..n)
        .map(|i| es.vector(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let g: C64 = es
                .vector(i)
                .iter()
                .zip(es.vector(j).iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            let g = g / (norms[i] * norms[j]);
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            defect = defect.max((g - target).norm());
        }
    }
    defect
}

/// H(p) = -sum p log2 p, with 0 log 0 = 0. `p` must be a probability
/// distribution to 1e-9.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::Domain("entropy of an empty distribution".into()));
    }
    let mut sum = 0.0;
    for (i, &q) in p.iter().enumerate() {
        if !(q >= 0.0) {
            return Err(Error::Domain(format!("probability {i} is negative or NaN: {q}")));
        }
        sum += q;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(p.iter().filter(|&&q| q > 0.0).map(|&q| -q * q.log2()).sum())
}

#[derive(Debug, Clone)]
pub struct MixingReport {
    /// b_ik = <basis_k | phi_i>, rows indexed by eigenstate.
    pub coefficients: Array2<C64>,
    /// Row-normalized |b_ik|^2.
    pub probabilities: Array2<f64>,
    /// Shannon entropy of each row.
    pub entropies: Vec<f64>,
    /// log2 N, the entropy of uniform mixing.
    pub max_entropy: f64,
}

/// Decomposes each eigenvector over the columns of `basis` (the unperturbed
/// eigenvectors, assumed orthonormal) and reports weights and entropies.
pub fn mixing_coefficients(basis: ArrayView2<C64>, es: &EigenSystem) -> Result<MixingReport> {
    let n = es.n();
    if basis.nrows() != n || basis.ncols() != n {
        return Err(Error::Dimension(format!(
            "basis is {}x{}, eigensystem has N = {n}",
            basis.nrows(),
            basis.ncols()
        )));
    }
    let mut coefficients = Array2::<C64>::zeros((n, n));
    let mut probabilities = Array2::<f64>::zeros((n, n));
    let mut entropies = Vec::with_capacity(n);
    for i in 0..n {
        let v = es.vector(i);
        let mut row_sum = 0.0;
        for k in 0..n {
            let b: C64 = basis.column(k).iter().zip(v.iter()).map(|(e, x)| e.conj() * x).sum();
            coefficients[[i, k]] = b;
            probabilities[[i, k]] = b.norm_sqr();
            row_sum += b.norm_sqr();
        }
        if row_sum <= 0.0 {
            return Err(Error::Domain(format!("eigenvector {i} has no overlap with the basis")));
        }
        for k in 0..n {
            probabilities[[i, k]] /= row_sum;
        }
        let row: Vec<f64> = (0..n).map(|k| probabilities[[i, k]]).collect();
        entropies.push(shannon_entropy(&row)?);
    }
    Ok(MixingReport { coefficients, probabilities, entropies, max_entropy: (n as f64).log2() })
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Gram-defect bound for "eigenfunctions orthogonal".
    pub t_orth: f64,
    /// Allowed deviation of each mixing probability from 1/N.
    pub t_prob: f64,
    /// Allowed per-state entropy shortfall below log2 N, in bits.
    pub t_ent: f64,
    /// Minimum eigenvalue gap; candidates closer to a coalescence are vetoed.
    pub t_gap: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { t_orth: 1e-3, t_prob: 0.05, t_ent: 0.05, t_gap: 0.0 }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EquilibriumVerdict {
    pub orthogonal: bool,
    pub uniform: bool,
    pub entropy_ok: bool,
    pub far_from_ep: bool,
    pub passed: bool,
    pub orthogonality_defect: f64,
    pub prob_deviation: f64,
    /// max_i (log2 N - H_i), in bits.
    pub entropy_gap: f64,
    pub min_gap: f64,
    pub thresholds: Thresholds,
}

/// Equilibrium per the detector contract: orthogonal eigenfunctions, uniform
/// mixing over the unperturbed basis, per-state entropy at its maximum, and
/// a veto when the spectrum is close to a coalescence.
pub fn detect_equilibrium(
    es: &EigenSystem,
    basis: ArrayView2<C64>,
    thresholds: &Thresholds,
) -> Result<EquilibriumVerdict> {
    let n = es.n();
    let mix = mixing_coefficients(basis, es)?;
    let defect = gram_defect(es);
    let uniform_target = 1.0 / n as f64;
    let prob_deviation = mix
        .probabilities
        .iter()
        .map(|&p| (p - uniform_target).abs())
        .fold(0.0, f64::max);
    let entropy_gap = mix
        .entropies
        .iter()
        .map(|&h| mix.max_entropy - h)
        .fold(0.0, f64::max);
    let min_gap = es.min_gap();

    let orthogonal = defect <= thresholds.t_orth;
    let uniform = prob_deviation <= thresholds.t_prob;
    let entropy_ok = entropy_gap <= thresholds.t_ent;
    let far_from_ep = min_gap >= thresholds.t_gap;
    Ok(EquilibriumVerdict {
        orthogonal,
        uniform,
        entropy_ok,
        far_from_ep,
        passed: orthogonal && uniform && entropy_ok && far_from_ep,
        orthogonality_defect: defect,
        prob_deviation,
        entropy_gap,
        min_gap,
        thresholds: *thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WidthSign;
    use crate::spectral::{eigendecompose_matrix, EigenvalueRecord, Normalization};
    use crate::testkit::{ep_fixture, TestRng};
    use ndarray::array;

    const I: C64 = C64::new(0.0, 1.0);

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn system_from_columns(vectors: Array2<C64>) -> EigenSystem {
        let n = vectors.nrows();
        EigenSystem {
            eigenvalues: (0..n)
                .map(|k| EigenvalueRecord::new(c(k as f64, 0.0), WidthSign::PhysicalMinus))
                .collect(),
            right_vectors: vectors,
            normalization: Normalization::Unit,
            self_orthogonal_flags: vec![false; n],
            residuals: vec![0.0; n],
        }
    }

    #[test]
    fn rigidity_bounds() {
        let real = array![c(0.6, 0.0), c(0.8, 0.0)];
        assert!((phase_rigidity(real.view()) - 1.0).abs() < 1e-15);
        let phased = array![c(0.0, 0.6), c(0.0, 0.8)];
        assert!((phase_rigidity(phased.view()) - 1.0).abs() < 1e-15);
        let selforth = array![c(1.0, 0.0), I];
        assert!(phase_rigidity(selforth.view()) < 1e-15);
    }

    #[test]
    fn em_norm_is_reciprocal_rigidity() {
        let v = array![c(1.0, 0.2), c(0.3, -0.5), c(-0.4, 0.1)];
        let r = phase_rigidity(v.view());
        let m = em_norm(v.view()).unwrap();
        assert!((r * m - 1.0).abs() < 1e-12);
        assert!(m >= 1.0);
    }

    #[test]
    fn em_norm_diverges_at_self_orthogonality() {
        let v = array![c(1.0, 0.0), I];
        assert!(matches!(em_norm(v.view()), Err(Error::DivergingEm { .. })));
    }

    #[test]
    fn em_norm_grows_near_fixture_ep() {
        // r must fall monotonically as omega -> 1/2 from below
        let mut last_r = f64::INFINITY;
        for &w in &[0.30, 0.40, 0.45, 0.49, 0.499, 0.49999] {
            let mut h = ep_fixture();
            h[[0, 1]] = c(w, 0.0);
            h[[1, 0]] = c(w, 0.0);
            let es = eigendecompose_matrix(&h, WidthSign::PhysicalMinus).unwrap();
            let r = phase_rigidity(es.vector(0));
            assert!(r < last_r, "r not decreasing at omega = {w}");
            last_r = r;
        }
        assert!(last_r < 0.05);
    }

    #[test]
    fn entropy_delta_and_uniform() {
        assert_eq!(shannon_entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        let h = shannon_entropy(&[0.25; 4]).unwrap();
        assert!((h - 2.0).abs() < 1e-15);
        let h2 = shannon_entropy(&[0.5, 0.5]).unwrap();
        assert!((h2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_rejects_bad_distributions() {
        assert!(shannon_entropy(&[]).is_err());
        assert!(shannon_entropy(&[0.7, -0.3, 0.6]).is_err());
        assert!(shannon_entropy(&[0.4, 0.4]).is_err());
    }

    #[test]
    fn entropy_bounded_by_log2_n() {
        let mut rng = TestRng::new(7);
        for _ in 0..500 {
            let n = 2 + (rng.next_u64() % 7) as usize;
            let mut p: Vec<f64> = (0..n).map(|_| rng.unit().abs() + 1e-12).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|q| *q /= s);
            let h = shannon_entropy(&p).unwrap();
            assert!(h <= (n as f64).log2() + 1e-12);
            assert!(h >= 0.0);
        }
    }

    fn hadamard2() -> Array2<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        array![[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]]
    }

    fn dft4() -> Array2<C64> {
        let mut f = Array2::<C64>::zeros((4, 4));
        for r in 0..4 {
            for k in 0..4 {
                let th = -2.0 * std::f64::consts::PI * (r * k) as f64 / 4.0;
                f[[r, k]] = c(th.cos(), th.sin()) * 0.5;
            }
        }
        f
    }

    #[test]
    fn hadamard_mixing_is_uniform() {
        let es = system_from_columns(hadamard2());
        let basis = Array2::<C64>::eye(2);
        let mix = mixing_coefficients(basis.view(), &es).unwrap();
        for p in mix.probabilities.iter() {
            assert!((p - 0.5).abs() < 1e-15);
        }
        for h in &mix.entropies {
            assert!((h - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mixing_in_own_basis_is_trivial() {
        let cols = hadamard2();
        let es = system_from_columns(cols.clone());
        let mix = mixing_coefficients(cols.view(), &es).unwrap();
        for i in 0..2 {
            assert!((mix.probabilities[[i, i]] - 1.0).abs() < 1e-15);
            assert!(mix.entropies[i].abs() < 1e-12);
        }
    }

    #[test]
    fn gram_defect_zero_for_unitary_columns() {
        assert!(gram_defect(&system_from_columns(dft4())) < 1e-14);
        let skew = array![[c(1.0, 0.0), c(0.8, 0.0)], [c(0.0, 0.0), c(0.6, 0.0)]];
        assert!((gram_defect(&system_from_columns(skew)) - 0.8).abs() < 1e-14);
    }

    #[test]
    fn equilibrium_passes_on_dft_columns() {
        let es = system_from_columns(dft4());
        let basis = Array2::<C64>::eye(4);
        let v = detect_equilibrium(&es, basis.view(), &Thresholds::default()).unwrap();
        assert!(v.passed, "{v:?}");
        assert!(v.entropy_gap.abs() < 1e-12);
    }

    #[test]
    fn equilibrium_fails_when_perturbed() {
        let mut cols = dft4();
        cols[[0, 0]] += c(0.35, 0.0);
        let es = system_from_columns(cols);
        let basis = Array2::<C64>::eye(4);
        let v = detect_equilibrium(&es, basis.view(), &Thresholds::default()).unwrap();
        assert!(!v.passed);
        assert!(!v.orthogonal || !v.uniform);
    }

    #[test]
    fn equilibrium_gap_veto() {
        let mut es = system_from_columns(dft4());
        // collapse two eigenvalues; structure otherwise perfect
        es.eigenvalues[1] = es.eigenvalues[0].clone();
        let basis = Array2::<C64>::eye(4);
        let th = Thresholds { t_gap: 0.1, ..Thresholds::default() };
        let v = detect_equilibrium(&es, basis.view(), &th).unwrap();
        assert!(v.orthogonal && v.uniform && v.entropy_ok);
        assert!(!v.far_from_ep);
        assert!(!v.passed);
    }
}
