//! Dense eigen-decomposition of small complex symmetric matrices,
//! biorthogonal normalization, and trajectory tracking along parameter paths.

mod eig;
mod track;

pub use eig::{biorthonormalize, eigendecompose, eigendecompose_matrix, eigendecompose_with};
pub use track::{
    classify_crossing, hungarian, track, track_curve, ClassifyOptions, CrossingClass,
    CrossingReport, TrackOptions,
};

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64 as C64;

use crate::model::{ParameterPath, WidthSign};

/// Unit-norm |phi^T phi| below this flags a self-orthogonal (EP) vector.
pub const SO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenvalueRecord {
    pub value: C64,
    pub energy: f64,
    pub width: f64,
    pub lifetime: f64,
}

impl EigenvalueRecord {
    pub fn new(value: C64, sign: WidthSign) -> EigenvalueRecord {
        let width = match sign {
            WidthSign::PaperPlus => 2.0 * value.im,
            WidthSign::PhysicalMinus => -2.0 * value.im,
        };
        let lifetime = if width == 0.0 { f64::INFINITY } else { 1.0 / width.abs() };
        EigenvalueRecord { value, energy: value.re, width, lifetime }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Biorthogonal,
    Unit,
    Unnormalized,
}

/// All N eigenpairs of one Hamiltonian. Columns of `right_vectors` are the
/// right eigenvectors, ordered like `eigenvalues` (sorted by Re, then Im).
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<EigenvalueRecord>,
    pub right_vectors: Array2<C64>,
    pub normalization: Normalization,
    pub self_orthogonal_flags: Vec<bool>,
    pub residuals: Vec<f64>,
}

impl EigenSystem {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, i: usize) -> ArrayView1<'_, C64> {
        self.right_vectors.column(i)
    }

    pub fn values(&self) -> impl Iterator<Item = C64> + '_ {
        self.eigenvalues.iter().map(|r| r.value)
    }

    /// Smallest pairwise eigenvalue separation.
    pub fn min_gap(&self) -> f64 {
        let n = self.n();
        let mut g = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                g = g.min((self.eigenvalues[i].value - self.eigenvalues[j].value).norm());
            }
        }
        g
    }
}

/// Labeled eigenvalue/eigenvector paths over a parameter sweep.
///
/// `labels[t][l]` is the solver-output index carrying persistent label `l`
/// at point `t`; every `labels[t]` is a bijection on 0..N.
#[derive(Debug, Clone)]
pub struct TrajectorySet {
    pub path: ParameterPath,
    pub labels: Vec<Vec<usize>>,
    pub values: Vec<Vec<C64>>,
    pub vectors: Vec<Vec<Vec<C64>>>,
    pub ambiguous_steps: Vec<usize>,
    pub coalescent_steps: Vec<usize>,
    pub systems: Vec<EigenSystem>,
}

impl TrajectorySet {
    pub fn n_labels(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Net permutation over the whole path: label -> label it ends up as.
    ///
    /// For a closed path the first and last eigen-systems coincide, so the
    /// final label assignment read against the initial one is the monodromy.
    pub fn net_permutation(&self) -> Vec<usize> {
        let first = &self.labels[0];
        let last = self.labels.last().unwrap();
        // inverse of first: solver index -> label
        let n = first.len();
        let mut inv = vec![0usize; n];
        for (label, &idx) in first.iter().enumerate() {
            inv[idx] = label;
        }
        last.iter().map(|&idx| inv[idx]).collect()
    }
}
