//! Dense complex eigensolver: Householder reduction to Hessenberg form plus
//! single-shift QR with deflation, closed form for N = 2, inverse iteration
//! with Rayleigh refinement for the eigenvectors.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use num_complex::ComplexFloat;

use super::{EigenSystem, EigenvalueRecord, Normalization, SO_TOL};
use crate::error::{Error, Result};
use crate::model::{HamiltonianMatrix, WidthSign};

pub const MAX_N: usize = 64;

const ZERO: C64 = C64::new(0.0, 0.0);

pub fn eigendecompose(h: &HamiltonianMatrix) -> Result<EigenSystem> {
    eigendecompose_matrix(&h.entries, WidthSign::PhysicalMinus)
}

pub fn eigendecompose_with(h: &HamiltonianMatrix, sign: WidthSign) -> Result<EigenSystem> {
    eigendecompose_matrix(&h.entries, sign)
}

pub fn eigendecompose_matrix(a: &Array2<C64>, sign: WidthSign) -> Result<EigenSystem> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::Dimension(format!("matrix is {}x{}", n, a.ncols())));
    }
    if n > MAX_N {
        return Err(Error::Dimension(format!("N = {n} exceeds the dense cap {MAX_N}")));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let hnorm = frob(a);

    let mut values: Vec<C64>;
    let mut vectors: Vec<Array1<C64>>;

    if is_diagonal(a) {
        values = (0..n).map(|k| a[[k, k]]).collect();
        let order = sorted_order(&values);
        values = order.iter().map(|&k| a[[k, k]]).collect();
        vectors = order
            .iter()
            .map(|&k| Array1::from_shape_fn(n, |i| if i == k { C64::new(1.0, 0.0) } else { ZERO }))
            .collect();
    } else if n == 2 {
        let (l1, l2) = eig2(a[[0, 0]], a[[0, 1]], a[[1, 0]], a[[1, 1]]);
        values = vec![l1, l2];
        values.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        vectors = values.iter().map(|&l| vector2(a, l)).collect();
    } else {
        values = qr_eigenvalues(a.clone(), hnorm)?;
        let order = sorted_order(&values);
        values = order.iter().map(|&k| values[k]).collect();
        vectors = Vec::with_capacity(n);
        for (i, lam) in values.iter_mut().enumerate() {
            let (v, refined) = inverse_iteration(a, *lam, hnorm, i);
            *lam = refined;
            vectors.push(v);
        }
    }

    for v in &mut vectors {
        unit_normalize(v);
        fix_phase(v);
    }

    let mut residuals = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    for (lam, v) in values.iter().zip(&vectors) {
        let av = a.dot(v);
        let r = (&av - &v.mapv(|z| z * lam)).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(r);
        residuals.push(r);
    }
    if worst > 1e-10 * hnorm.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical { what: "eigendecompose".into(), worst_residual: worst });
    }

    let self_orthogonal_flags: Vec<bool> =
        vectors.iter().map(|v| transpose_dot(v, v).norm() < SO_TOL).collect();

    let mut right_vectors = Array2::<C64>::zeros((n, n));
    for (i, v) in vectors.iter().enumerate() {
        right_vectors.column_mut(i).assign(v);
    }

    Ok(EigenSystem {
        eigenvalues: values.iter().map(|&l| EigenvalueRecord::new(l, sign)).collect(),
        right_vectors,
        normalization: Normalization::Unit,
        self_orthogonal_flags,
        residuals,
    })
}

/// Rescales every unflagged column so that phi^T phi = 1. Vectors whose
/// unit-norm |phi^T phi| falls below `SO_TOL` are flagged self-orthogonal
/// and left unit-normalized.
pub fn biorthonormalize(es: &EigenSystem) -> EigenSystem {
    let mut out = es.clone();
    let n = out.n();
    for i in 0..n {
        let mut col = out.right_vectors.column(i).to_owned();
        unit_normalize(&mut col);
        let s = transpose_dot(&col, &col);
        if s.norm() < SO_TOL {
            out.self_orthogonal_flags[i] = true;
        } else {
            let scale = s.sqrt();
            col.mapv_inplace(|z| z / scale);
            out.self_orthogonal_flags[i] = false;
        }
        out.right_vectors.column_mut(i).assign(&col);
    }
    out.normalization = Normalization::Biorthogonal;
    out
}

pub(crate) fn transpose_dot(x: &Array1<C64>, y: &Array1<C64>) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

pub(crate) fn frob(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn is_diagonal(a: &Array2<C64>) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || a[[i, j]] == ZERO))
}

fn sorted_order(values: &[C64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[i].re.total_cmp(&values[j].re).then(values[i].im.total_cmp(&values[j].im))
    });
    order
}

fn unit_normalize(v: &mut Array1<C64>) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.mapv_inplace(|z| z / norm);
    }
}

/// Deterministic global phase: the largest-magnitude component is made real
/// and positive.
fn fix_phase(v: &mut Array1<C64>) {
    let mut best = 0usize;
    let mut mag = 0.0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > mag {
            mag = z.norm();
            best = i;
        }
    }
    if mag > 0.0 {
        let phase = v[best] / mag;
        v.mapv_inplace(|z| z / phase);
    }
}

/// Eigenvalues of [[a, b], [c, d]]: mean +- sqrt(D)/2, D = (a-d)^2 + 4bc.
fn eig2(a: C64, b: C64, c: C64, d: C64) -> (C64, C64) {
    let m = (a + d) * 0.5;
    let disc = ((a - d) * (a - d) + 4.0 * b * c).sqrt() * 0.5;
    (m + disc, m - disc)
}

/// Eigenvector of a 2x2 for a known eigenvalue; picks the better-conditioned
/// of the two null-space expressions.
fn vector2(a: &Array2<C64>, lam: C64) -> Array1<C64> {
    let c1 = [a[[0, 1]], lam - a[[0, 0]]];
    let c2 = [lam - a[[1, 1]], a[[1, 0]]];
    let n1 = c1[0].norm_sqr() + c1[1].norm_sqr();
    let n2 = c2[0].norm_sqr() + c2[1].norm_sqr();
    let scale = frob(a).max(1.0);
    if n1.max(n2) <= (f64::EPSILON * scale).powi(2) {
        // effectively diagonal: pick the basis vector of the closer entry
        let i = if (lam - a[[0, 0]]).norm() <= (lam - a[[1, 1]]).norm() { 0 } else { 1 };
        return Array1::from_shape_fn(2, |k| if k == i { C64::new(1.0, 0.0) } else { ZERO });
    }
    let c = if n1 >= n2 { c1 } else { c2 };
    Array1::from_vec(vec![c[0], c[1]])
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let (l1, l2) = eig2(a, b, c, d);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Givens rotation: G [x; y] = [r; 0] with G = [[c, s], [-conj(s), c]],
/// c real.
fn givens(x: C64, y: C64) -> (f64, C64) {
    if y == ZERO {
        return (1.0, ZERO);
    }
    if x == ZERO {
        return (0.0, y.conj() / y.norm());
    }
    let d = (x.norm_sqr() + y.norm_sqr()).sqrt();
    let c = x.norm() / d;
    let s = (x / x.norm()) * (y.conj() / d);
    (c, s)
}

fn hessenberg_inplace(h: &mut Array2<C64>) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let m = n - k - 1;
        let mut v: Vec<C64> = (0..m).map(|i| h[[k + 1 + i, k]]).collect();
        let xnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if v[0] == ZERO { C64::new(1.0, 0.0) } else { v[0] / v[0].norm() };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // rows k+1.. : H <- (I - beta v v^H) H
        for col in 0..n {
            let mut s = ZERO;
            for (i, vi) in v.iter().enumerate() {
                s += vi.conj() * h[[k + 1 + i, col]];
            }
            s *= beta;
            for (i, vi) in v.iter().enumerate() {
                h[[k + 1 + i, col]] -= vi * s;
            }
        }
        // cols k+1.. : H <- H (I - beta v v^H)
        for row in 0..n {
            let mut s = ZERO;
            for (i, vi) in v.iter().enumerate() {
                s += h[[row, k + 1 + i]] * vi;
            }
            s *= beta;
            for (i, vi) in v.iter().enumerate() {
                h[[row, k + 1 + i]] -= s * vi.conj();
            }
        }
        h[[k + 1, k]] = alpha;
        for i in k + 2..n {
            h[[i, k]] = ZERO;
        }
    }
}

/// One implicit single-shift QR sweep on the Hessenberg block [lo, hi].
fn single_shift_step(h: &mut Array2<C64>, lo: usize, hi: usize, sigma: C64) {
    let n = h.nrows();
    let mut x = h[[lo, lo]] - sigma;
    let mut y = h[[lo + 1, lo]];
    for k in lo..hi {
        let (c, s) = givens(x, y);
        let k0 = if k > lo { k - 1 } else { lo };
        for j in k0..n {
            let hkj = h[[k, j]];
            let hk1j = h[[k + 1, j]];
            h[[k, j]] = c * hkj + s * hk1j;
            h[[k + 1, j]] = -s.conj() * hkj + c * hk1j;
        }
        let i1 = (k + 2).min(hi);
        for i in 0..=i1 {
            let hik = h[[i, k]];
            let hik1 = h[[i, k + 1]];
            h[[i, k]] = c * hik + s.conj() * hik1;
            h[[i, k + 1]] = -s * hik + c * hik1;
        }
        if k + 2 <= hi {
            x = h[[k + 1, k]];
            y = h[[k + 2, k]];
        }
    }
}

fn qr_eigenvalues(mut h: Array2<C64>, hnorm: f64) -> Result<Vec<C64>> {
    let n = h.nrows();
    hessenberg_inplace(&mut h);
    let mut evals = vec![ZERO; n];
    let mut hi = n - 1;
    let mut its = 0usize;
    let eps = f64::EPSILON;
    loop {
        // locate the start of the active block ending at hi
        let mut lo = hi;
        while lo > 0 {
            let s = h[[lo - 1, lo - 1]].norm() + h[[lo, lo]].norm();
            let s = if s == 0.0 { hnorm.max(f64::MIN_POSITIVE) } else { s };
            if h[[lo, lo - 1]].norm() <= eps * s {
                h[[lo, lo - 1]] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            evals[hi] = h[[hi, hi]];
            if hi == 0 {
                break;
            }
            hi -= 1;
            its = 0;
            continue;
        }
        if lo + 1 == hi {
            let (l1, l2) = eig2(h[[lo, lo]], h[[lo, hi]], h[[hi, lo]], h[[hi, hi]]);
            evals[lo] = l1;
            evals[hi] = l2;
            if lo == 0 {
                break;
            }
            hi = lo - 1;
            its = 0;
            continue;
        }
        its += 1;
        if its > 80 * n {
            return Err(Error::Numerical {
                what: "qr eigenvalue iteration stalled".into(),
                worst_residual: h[[lo + 1, lo]].norm(),
            });
        }
        let sigma = if its % 16 == 0 {
            // exceptional shift to break limit cycles
            h[[hi, hi]] + C64::new(h[[hi, hi - 1]].norm() + h[[hi - 1, hi - 2]].norm(), 0.0)
        } else {
            wilkinson_shift(h[[hi - 1, hi - 1]], h[[hi - 1, hi]], h[[hi, hi - 1]], h[[hi, hi]])
        };
        single_shift_step(&mut h, lo, hi, sigma);
    }
    Ok(evals)
}

struct Lu {
    lu: Array2<C64>,
    piv: Vec<usize>,
}

fn lu_factor(mut m: Array2<C64>, pivot_floor: f64) -> Lu {
    let n = m.nrows();
    let mut piv = Vec::with_capacity(n);
    for k in 0..n {
        let mut imax = k;
        let mut vmax = m[[k, k]].norm();
        for i in k + 1..n {
            if m[[i, k]].norm() > vmax {
                vmax = m[[i, k]].norm();
                imax = i;
            }
        }
        piv.push(imax);
        if imax != k {
            for j in 0..n {
                let tmp = m[[k, j]];
                m[[k, j]] = m[[imax, j]];
                m[[imax, j]] = tmp;
            }
        }
        if m[[k, k]].norm() < pivot_floor {
            let phase =
                if m[[k, k]] == ZERO { C64::new(1.0, 0.0) } else { m[[k, k]] / m[[k, k]].norm() };
            m[[k, k]] = phase * pivot_floor;
        }
        let pivot = m[[k, k]];
        for i in k + 1..n {
            let f = m[[i, k]] / pivot;
            m[[i, k]] = f;
            for j in k + 1..n {
                let sub = f * m[[k, j]];
                m[[i, j]] -= sub;
            }
        }
    }
    Lu { lu: m, piv }
}

impl Lu {
    fn solve(&self, b: &mut Array1<C64>) {
        let n = b.len();
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for i in 1..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.lu[[i, j]] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.lu[[i, j]] * b[j];
            }
            b[i] = s / self.lu[[i, i]];
        }
    }
}

/// Inverse iteration on (A - lambda I) plus one Rayleigh-quotient refinement
/// of lambda; returns the unit vector and the refined eigenvalue.
fn inverse_iteration(a: &Array2<C64>, lambda: C64, hnorm: f64, idx: usize) -> (Array1<C64>, C64) {
    let n = a.nrows();
    let floor = f64::EPSILON * hnorm.max(f64::MIN_POSITIVE);
    let mut lam = lambda;
    let mut best_v: Option<Array1<C64>> = None;
    let mut best_res = f64::INFINITY;
    for round in 0..3 {
        let mut m = a.clone();
        for k in 0..n {
            m[[k, k]] -= lam;
        }
        let lu = lu_factor(m, floor);
        let mut v = Array1::from_shape_fn(n, |j| {
            let t = 0.754_877_666_2 * (j + 1) as f64 + 0.1123 * (idx + 1) as f64;
            C64::new(t.cos(), (1.618 * t).sin())
        });
        unit_normalize(&mut v);
        for _ in 0..3 {
            lu.solve(&mut v);
            unit_normalize(&mut v);
        }
        let av = a.dot(&v);
        let rayleigh: C64 = v.iter().zip(av.iter()).map(|(x, y)| x.conj() * y).sum();
        let res =
            (&av - &v.mapv(|z| z * rayleigh)).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if res < best_res {
            best_res = res;
            best_v = Some(v);
            lam = rayleigh;
        }
        if best_res <= 1e-13 * hnorm.max(f64::MIN_POSITIVE) || round == 2 {
            break;
        }
    }
    (best_v.unwrap(), lam)
}
