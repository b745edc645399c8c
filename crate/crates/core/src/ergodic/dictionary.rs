use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use super::MeasureEnsemble;
use crate::error::{invalid, Result};
use crate::spaces::{dot, norm2};

pub const DEFAULT_DICTIONARY_SIZE: usize = 256;

/// Finite family of test functions `φ_j(y) = tanh(⟨a_j, y⟩ + b_j)/(‖a_j‖ + 1)`.
///
/// Each member has sup norm below `1/(‖a‖+1)` and Lipschitz constant below
/// `‖a‖/(‖a‖+1)`, so its bounded-Lipschitz norm is at most 1 and the largest mean
/// difference over the family is a lower bound of `d_BL`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub dim: usize,
    pub directions: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
}

impl Dictionary {
    /// Directions uniform on the sphere with log-uniform norms in `[0.5, 20]`; offsets
    /// `‖a‖·U[-1, 1]·radius`.
    pub fn new(dim: usize, size: usize, seed: u64, radius: f64) -> Self {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0xd1c7_0000_0000_0001);
        let mut directions = Vec::with_capacity(size);
        let mut offsets = Vec::with_capacity(size);
        for _ in 0..size {
            let mut a: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = norm2(&a).max(1e-300);
            let len = (0.5f64.ln() + rng.gen::<f64>() * (40f64).ln()).exp();
            a.iter_mut().for_each(|v| *v *= len / n);
            offsets.push(len * rng.gen_range(-1.0..=1.0) * radius);
            directions.push(a);
        }
        Dictionary {
            dim,
            directions,
            offsets,
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn eval(&self, j: usize, y: &[f64]) -> f64 {
        let a = &self.directions[j];
        (dot(a, y) + self.offsets[j]).tanh() / (norm2(a) + 1.0)
    }

    /// Ensemble means of every dictionary function.
    pub fn means(&self, particles: &[Vec<f64>]) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|j| particles.iter().map(|y| self.eval(j, y)).sum::<f64>() / particles.len() as f64)
            .collect()
    }
}

/// Dictionary lower bound of the bounded-Lipschitz distance between two ensembles.
pub fn dbl_distance(
    e1: &MeasureEnsemble,
    e2: &MeasureEnsemble,
    dictionary_size: usize,
    seed: u64,
) -> Result<f64> {
    let dim = e1.dim();
    if dim != e2.dim() {
        return Err(invalid(format!(
            "ensembles live in different spaces (dim {dim} vs {})",
            e2.dim()
        )));
    }
    let dict = Dictionary::new(dim, dictionary_size, seed, 1.0);
    Ok(dictionary_distance(&dict, &e1.particle_vectors(), &e2.particle_vectors()))
}

pub fn dictionary_distance(dict: &Dictionary, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    dict.means(a)
        .iter()
        .zip(dict.means(b))
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}
