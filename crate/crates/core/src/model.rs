//! Parameter-dependent non-Hermitian effective Hamiltonians for a system of
//! N internal states coupled to C decay channels (environments).
//!
//! The matrix is the standard Feshbach-projection effective form
//! H = diag(eps_k(a)) - (i/2) sum_c omega_c W_c W_c^T with a plain transpose,
//! so H is complex symmetric and left eigenvectors are unconjugated
//! transposes of the right ones.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign convention for intrinsic widths and for reporting Gamma.
///
/// `PaperPlus` stores eigenvalues as E + i Gamma/2 (Gamma = 2 Im E);
/// `PhysicalMinus` keeps decaying states in the lower half plane and
/// reports Gamma = -2 Im E >= 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthSign {
    PaperPlus,
    #[default]
    PhysicalMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagEnergy {
    pub e0: f64,
    #[serde(default)]
    pub e1: f64,
    #[serde(default)]
    pub gamma0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    #[serde(with = "crate::cplx::vec")]
    pub w: Vec<C64>,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conventions {
    #[serde(default)]
    pub width_sign: WidthSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub n_states: usize,
    pub diag_energies: Vec<DiagEnergy>,
    pub channels: Vec<Channel>,
    #[serde(default)]
    pub conventions: Conventions,
}

impl SystemSpec {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    fn validated(&self) -> Result<()> {
        let v = validate_spec(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Spec(v))
        }
    }
}

/// One point of a parameter sweep: the real knob `a` plus one complex
/// coupling strength per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterPoint {
    pub a: f64,
    #[serde(with = "crate::cplx::vec")]
    pub omegas: Vec<C64>,
}

impl ParameterPoint {
    /// Componentwise linear interpolation, t in [0, 1].
    pub fn lerp(&self, other: &ParameterPoint, t: f64) -> ParameterPoint {
        ParameterPoint {
            a: self.a + (other.a - self.a) * t,
            omegas: self
                .omegas
                .iter()
                .zip(&other.omegas)
                .map(|(x, y)| x + (y - x) * t)
                .collect(),
        }
    }

    pub fn max_component_distance(&self, other: &ParameterPoint) -> f64 {
        let mut d = (self.a - other.a).abs();
        for (x, y) in self.omegas.iter().zip(&other.omegas) {
            d = d.max((x - y).norm());
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterPath {
    pub points: Vec<ParameterPoint>,
    #[serde(default)]
    pub closed: bool,
}

impl ParameterPath {
    pub fn open(points: Vec<ParameterPoint>) -> ParameterPath {
        ParameterPath { points, closed: false }
    }

    pub fn validate(&self, n_channels: usize) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::Path("path needs at least 2 points".into()));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.omegas.len() != n_channels {
                return Err(Error::Path(format!(
                    "point {i}: {} omegas, spec has {n_channels} channels",
                    p.omegas.len()
                )));
            }
        }
        if self.closed {
            let first = &self.points[0];
            let last = self.points.last().unwrap();
            if first.max_component_distance(last) > 1e-12 {
                return Err(Error::Path(
                    "closed path must repeat its first point within 1e-12".into(),
                ));
            }
        }
        Ok(())
    }
}

/// The effective Hamiltonian at one parameter point. Complex symmetric by
/// construction: H_jk and H_kj are assembled from the same expression.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    pub entries: Array2<C64>,
    pub point: ParameterPoint,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Checks every SystemSpec invariant; returns an empty list iff the spec is
/// valid. Violations name the offending field and rule.
pub fn validate_spec(spec: &SystemSpec) -> Vec<String> {
    let mut v = Vec::new();
    if spec.n_states < 2 {
        v.push("n_states must be >= 2".to_string());
    }
    if spec.diag_energies.len() != spec.n_states {
        v.push(format!(
            "diag_energies: {} records, expected n_states = {}",
            spec.diag_energies.len(),
            spec.n_states
        ));
    }
    for (k, d) in spec.diag_energies.iter().enumerate() {
        if d.gamma0 < 0.0 {
            v.push(format!("diag_energies[{k}]: gamma0 must be >= 0"));
        }
        if !(d.e0.is_finite() && d.e1.is_finite() && d.gamma0.is_finite()) {
            v.push(format!("diag_energies[{k}]: non-finite entry"));
        }
    }
    if spec.channels.is_empty() {
        v.push("channels: at least one channel required".to_string());
    }
    let mut any_nonzero = false;
    for (c, ch) in spec.channels.iter().enumerate() {
        if ch.w.len() != spec.n_states {
            v.push(format!("channel {c}: w length != N"));
        }
        if ch.w.iter().any(|z| z.norm() > 0.0) {
            any_nonzero = true;
        }
    }
    if !spec.channels.is_empty() && !any_nonzero {
        v.push("channels: at least one w must be nonzero".to_string());
    }
    v
}

fn diag_energy(spec: &SystemSpec, k: usize, a: f64) -> C64 {
    let d = &spec.diag_energies[k];
    let width = match spec.conventions.width_sign {
        WidthSign::PhysicalMinus => -0.5 * d.gamma0,
        WidthSign::PaperPlus => 0.5 * d.gamma0,
    };
    C64::new(d.e0 + d.e1 * a, width)
}

/// Full effective Hamiltonian
/// H = diag(eps_k(a)) - (i/2) sum_c omega_c W_c W_c^T.
pub fn build_hamiltonian(spec: &SystemSpec, point: &ParameterPoint) -> Result<HamiltonianMatrix> {
    spec.validated()?;
    if point.omegas.len() != spec.channels.len() {
        return Err(Error::Dimension(format!(
            "point carries {} omegas, spec has {} channels",
            point.omegas.len(),
            spec.channels.len()
        )));
    }
    let n = spec.n_states;
    let mut h = Array2::<C64>::zeros((n, n));
    for k in 0..n {
        h[[k, k]] = diag_energy(spec, k, point.a);
    }
    let half_i = C64::new(0.0, 0.5);
    for (ch, &omega) in spec.channels.iter().zip(&point.omegas) {
        // symmetric rank-one update, j <= k assembled once and mirrored
        for j in 0..n {
            for k in j..n {
                let term = -half_i * omega * ch.w[j] * ch.w[k];
                h[[j, k]] += term;
                if k != j {
                    h[[k, j]] += term;
                }
            }
        }
    }
    Ok(HamiltonianMatrix { entries: h, point: point.clone() })
}

/// H0: the full Hamiltonian with every off-diagonal entry zeroed, i.e. the
/// unmixed-states operator whose eigenvectors are the standard basis.
pub fn build_h0(spec: &SystemSpec, point: &ParameterPoint) -> Result<HamiltonianMatrix> {
    let mut h = build_hamiltonian(spec, point)?;
    let n = h.dim();
    for j in 0..n {
        for k in 0..n {
            if j != k {
                h.entries[[j, k]] = C64::new(0.0, 0.0);
            }
        }
    }
    Ok(h)
}
