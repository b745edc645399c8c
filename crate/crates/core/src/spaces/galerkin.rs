use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Reference elliptic operator whose spectrum defines a truncated space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `-d²/dx²` on [0,1] with zero boundary values; sine eigenbasis.
    #[serde(rename = "dirichlet_laplacian_1d")]
    DirichletLaplacian1d,
    /// `-d²/dx²` on [0,1] with zero flux; cosine eigenbasis, constant mode shifted.
    #[serde(rename = "neumann_laplacian_1d")]
    NeumannLaplacian1d,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::DirichletLaplacian1d => "dirichlet_laplacian_1d",
            OperatorKind::NeumannLaplacian1d => "neumann_laplacian_1d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    H,
    V,
    VStar,
}

pub const DEFAULT_MASS_SHIFT: f64 = 1.0;

/// Spectral truncation of a Gelfand triple `V ⊂ H ⊂ V*`.
///
/// Coefficients are taken in the orthonormal eigenbasis of the reference operator, so
/// `‖u‖_H² = Σ u_k²`, `‖u‖_V² = Σ λ_k^s u_k²` and `‖u‖_{V*}² = Σ λ_k^{-s} u_k²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalerkinSpace {
    pub dim: usize,
    pub eigenvalues: Vec<f64>,
    pub v_exponent: f64,
    pub label: String,
    pub operator: OperatorKind,
}

impl GalerkinSpace {
    /// Analytic spectrum on [0,1]. The Neumann zero mode is replaced by `mass_shift`.
    pub fn new(dim: usize, operator: OperatorKind, v_exponent: f64, mass_shift: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("space dimension must be at least 1"));
        }
        if !v_exponent.is_finite() {
            return Err(invalid("v_exponent must be finite"));
        }
        let eigenvalues: Vec<f64> = match operator {
            OperatorKind::DirichletLaplacian1d => {
                (1..=dim).map(|k| (k as f64 * PI).powi(2)).collect()
            }
            OperatorKind::NeumannLaplacian1d => {
                if !(mass_shift > 0.0) || !mass_shift.is_finite() {
                    return Err(invalid("neumann mass shift must be a positive finite number"));
                }
                if dim > 1 && mass_shift > PI * PI {
                    return Err(invalid(format!(
                        "neumann mass shift {mass_shift} exceeds the first nonzero eigenvalue pi^2"
                    )));
                }
                (1..=dim)
                    .map(|k| if k == 1 { mass_shift } else { ((k - 1) as f64 * PI).powi(2) })
                    .collect()
            }
        };
        Ok(GalerkinSpace {
            dim,
            eigenvalues,
            v_exponent,
            label: format!("{}[{dim}]", operator.name()),
            operator,
        })
    }

    pub fn first_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(invalid(format!(
                "state of length {} does not conform to space {} of dim {}",
                u.len(),
                self.label,
                self.dim
            )));
        }
        Ok(())
    }

    pub fn norm(&self, u: &[f64], which: Norm) -> Result<f64> {
        self.check(u)?;
        Ok(self.norm_unchecked(u, which))
    }

    pub(crate) fn norm_unchecked(&self, u: &[f64], which: Norm) -> f64 {
        match which {
            Norm::H => u.iter().map(|c| c * c).sum::<f64>().sqrt(),
            Norm::V => self.weighted_sq(u, self.v_exponent).sqrt(),
            Norm::VStar => self.weighted_sq(u, -self.v_exponent).sqrt(),
        }
    }

    fn weighted_sq(&self, u: &[f64], power: f64) -> f64 {
        u.iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| l.powf(power) * c * c)
            .sum()
    }

    /// Embedding constant with `‖u‖_H ≤ C ‖u‖_V`.
    pub fn embedding_constant(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.powf(-self.v_exponent / 2.0))
            .fold(0.0, f64::max)
    }

    pub fn zero(&self) -> State {
        State::zeros(self.dim)
    }

    /// Pointwise evaluation and projection on a midpoint quadrature grid.
    pub fn projector(&self) -> Projector {
        Projector::new(self.operator, self.dim)
    }
}

/// Basis coefficients of an element of `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State {
    pub coeffs: Vec<f64>,
}

impl State {
    pub fn new(coeffs: Vec<f64>) -> Self {
        State { coeffs }
    }

    pub fn zeros(dim: usize) -> Self {
        State { coeffs: vec![0.0; dim] }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn norm_h(&self) -> f64 {
        norm2(&self.coeffs)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }
}

impl From<Vec<f64>> for State {
    fn from(coeffs: Vec<f64>) -> Self {
        State { coeffs }
    }
}

impl std::ops::Deref for State {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.coeffs
    }
}

impl std::ops::DerefMut for State {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }
}

pub(crate) fn norm2(u: &[f64]) -> f64 {
    u.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Copies the leading coefficients of `src` into a vector of length `dim`, zero padded.
pub(crate) fn transfer(src: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    let n = dim.min(src.len());
    out[..n].copy_from_slice(&src[..n]);
    out
}

/// Evaluates a state on quadrature nodes and projects nodal values back.
///
/// Midpoint nodes `x_j = (j + ½)/N` with weights `1/N` make the truncated sine and cosine
/// bases discretely orthonormal, so `P = Φᵀ W` is the exact left inverse of `Φ` and
/// `⟨P g(Φu) − P g(Φv), u − v⟩ = Σ_j w_j (g(U_j) − g(V_j))(U_j − V_j)`: monotone pointwise
/// nonlinearities stay monotone after truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub dim: usize,
    pub nodes: usize,
    pub weight: f64,
    /// Row-major `nodes × dim` basis values.
    basis: Vec<f64>,
}

impl Projector {
    pub fn new(operator: OperatorKind, dim: usize) -> Self {
        let nodes = (4 * dim).max(32);
        let mut basis = vec![0.0; nodes * dim];
        let s2 = 2f64.sqrt();
        for j in 0..nodes {
            let x = (j as f64 + 0.5) / nodes as f64;
            for k in 0..dim {
                basis[j * dim + k] = match operator {
                    OperatorKind::DirichletLaplacian1d => s2 * ((k + 1) as f64 * PI * x).sin(),
                    OperatorKind::NeumannLaplacian1d => {
                        if k == 0 {
                            1.0
                        } else {
                            s2 * (k as f64 * PI * x).cos()
                        }
                    }
                };
            }
        }
        Projector {
            dim,
            nodes,
            weight: 1.0 / nodes as f64,
            basis,
        }
    }

    pub fn to_nodes(&self, u: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.basis[j * self.dim..(j + 1) * self.dim];
            *o = dot(row, u);
        }
    }

    pub fn project(&self, values: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, v) in values.iter().enumerate() {
            let row = &self.basis[j * self.dim..(j + 1) * self.dim];
            let wv = self.weight * v;
            for (o, b) in out.iter_mut().zip(row) {
                *o += wv * b;
            }
        }
    }

    /// `P g(Φu)` for a pointwise map `g`.
    pub fn apply_pointwise(&self, u: &[f64], g: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut nodal = vec![0.0; self.nodes];
        self.to_nodes(u, &mut nodal);
        nodal.iter_mut().for_each(|v| *v = g(*v));
        let mut out = vec![0.0; self.dim];
        self.project(&nodal, &mut out);
        out
    }

    /// `Φᵀ W diag(d) Φ`, the Jacobian of `u ↦ P g(Φu)` for nodal derivatives `d`.
    pub fn weighted_gram(&self, nodal_derivative: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for (j, d) in nodal_derivative.iter().enumerate() {
            let row = &self.basis[j * n..(j + 1) * n];
            let wd = self.weight * d;
            for a in 0..n {
                let ra = wd * row[a];
                for b in 0..n {
                    out[a * n + b] += ra * row[b];
                }
            }
        }
        out
    }
}
