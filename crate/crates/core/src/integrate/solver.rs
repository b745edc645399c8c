use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spaces::{norm2, Projector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PointwiseMap {
    /// `v ↦ v³`
    Cube,
    /// `v ↦ |v|v`
    AbsSquare,
}

impl PointwiseMap {
    fn value(self, v: f64) -> f64 {
        match self {
            PointwiseMap::Cube => v * v * v,
            PointwiseMap::AbsSquare => v.abs() * v,
        }
    }

    fn derivative(self, v: f64) -> f64 {
        match self {
            PointwiseMap::Cube => 3.0 * v * v,
            PointwiseMap::AbsSquare => 2.0 * v.abs(),
        }
    }
}

pub(crate) struct Nonlinear<'a> {
    pub projector: &'a Projector,
    pub coef: f64,
    pub map: PointwiseMap,
}

/// Solves `(1 + d) ⊙ z + μ·P g(Φz) = rhs` for a monotone `g`.
///
/// The linear part is diagonal, so without a nonlinearity the solve is closed form.
/// Otherwise damped Newton: the step is halved while the residual grows.
pub(crate) fn solve_implicit(
    diag: &[f64],
    nonlinear: Option<&Nonlinear<'_>>,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let mut z: Vec<f64> = rhs.iter().zip(diag).map(|(r, d)| r / (1.0 + d)).collect();
    let nl = match nonlinear {
        Some(nl) if nl.coef != 0.0 => nl,
        _ => return Ok(z),
    };
    let n = z.len();
    let p = nl.projector;
    let mut nodal = vec![0.0; p.nodes];
    let residual = |z: &[f64], nodal: &mut Vec<f64>| -> Vec<f64> {
        p.to_nodes(z, nodal);
        nodal.iter_mut().for_each(|v| *v = nl.map.value(*v));
        let mut proj = vec![0.0; n];
        p.project(nodal, &mut proj);
        (0..n)
            .map(|k| (1.0 + diag[k]) * z[k] + nl.coef * proj[k] - rhs[k])
            .collect()
    };
    let target = tol * (1.0 + norm2(rhs));
    let mut r = residual(&z, &mut nodal);
    let mut rn = norm2(&r);
    for iter in 0..max_iter {
        if rn <= target {
            return Ok(z);
        }
        p.to_nodes(&z, &mut nodal);
        nodal.iter_mut().for_each(|v| *v = nl.coef * nl.map.derivative(*v));
        let gram = p.weighted_gram(&nodal);
        let mut jac = DMatrix::from_row_slice(n, n, &gram);
        for k in 0..n {
            jac[(k, k)] += 1.0 + diag[k];
        }
        let delta = jac
            .lu()
            .solve(&DVector::from_column_slice(&r))
            .ok_or(Error::StepFailure {
                iterations: iter + 1,
                residual: rn,
            })?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(delta.iter()).map(|(a, d)| a - alpha * d).collect();
            let rt = residual(&trial, &mut nodal);
            let rtn = norm2(&rt);
            if rtn < rn || alpha < 1e-6 {
                z = trial;
                r = rt;
                rn = rtn;
                break;
            }
            alpha *= 0.5;
        }
        if !rn.is_finite() {
            break;
        }
    }
    if rn <= target {
        return Ok(z);
    }
    Err(Error::StepFailure {
        iterations: max_iter,
        residual: rn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::OperatorKind;

    #[test]
    fn linear_solve_is_closed_form() {
        let z = solve_implicit(&[1.0, 3.0], None, &[2.0, 8.0], 1e-12, 5).unwrap();
        assert_eq!(z, vec![1.0, 2.0]);
    }

    #[test]
    fn cubic_solve_hits_residual() {
        let p = Projector::new(OperatorKind::DirichletLaplacian1d, 6);
        let nl = Nonlinear { projector: &p, coef: 0.7, map: PointwiseMap::Cube };
        let diag = [0.1, 0.4, 0.9, 1.6, 2.5, 3.6];
        let rhs = [5.0, -3.0, 2.0, 0.5, -1.0, 4.0];
        let z = solve_implicit(&diag, Some(&nl), &rhs, 1e-12, 50).unwrap();
        let cubed = p.apply_pointwise(&z, |v| v * v * v);
        for k in 0..6 {
            let r = (1.0 + diag[k]) * z[k] + 0.7 * cubed[k] - rhs[k];
            assert!(r.abs() < 1e-9);
        }
    }
}
