//! Small dense Hermitian eigen-solvers.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::transforms::{CMatrix, C64};

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Eigenvalues in ascending order.
    pub values: Array1<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: CMatrix,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigen-decomposition.
///
/// Eigenvalues are sorted ascending with a stable sort, so equal eigenvalues
/// keep the order in which the sweeps left them on the diagonal.
pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::shape(format!("eigen of non-square {:?}", a.dim())));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("eigen-decomposition of non-finite matrix".into()));
    }
    // symmetrize so tiny round-off asymmetries from callers do not leak in
    let mut m = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (a[[i, j]] + a[[j, i]].conj()));
    let mut v = Array2::<C64>::eye(n);

    let total: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let threshold = f64::EPSILON * total.max(f64::MIN_POSITIVE);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off = off_diagonal_norm(&m);
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&m) > 1e3 * threshold {
        return Err(Error::Numerical(
            "Jacobi eigen-solver did not converge".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].re.total_cmp(&m[[j, j]].re));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]].re));
    let vectors = Array2::from_shape_fn((n, n), |(r, k)| v[[r, order[k]]]);
    Ok(HermitianEigen { values, vectors })
}

fn off_diagonal_norm(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[[i, j]].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// One complex Jacobi rotation annihilating `m[p, q]`.
fn rotate(m: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = m[[p, q]];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let phase = apq / mag;
    let app = m[[p, p]].re;
    let aqq = m[[q, q]].re;
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // J = [[c, s·e^{iφ}], [−s·e^{−iφ}, c]] on the (p, q) plane; M ← Jᴴ M J
    let jpq = phase * s;
    let jqp = -phase.conj() * s;
    let n = m.nrows();
    for k in 0..n {
        let mkp = m[[k, p]];
        let mkq = m[[k, q]];
        m[[k, p]] = mkp * c + mkq * jqp;
        m[[k, q]] = mkp * jpq + mkq * c;
    }
    for k in 0..n {
        let mpk = m[[p, k]];
        let mqk = m[[q, k]];
        m[[p, k]] = mpk * c + mqk * jqp.conj();
        m[[q, k]] = mpk * jpq.conj() + mqk * c;
    }
    m[[p, q]] = C64::new(0.0, 0.0);
    m[[q, p]] = C64::new(0.0, 0.0);
    m[[p, p]] = C64::new(m[[p, p]].re, 0.0);
    m[[q, q]] = C64::new(m[[q, q]].re, 0.0);
    for k in 0..n {
        let vkp = v[[k, p]];
        let vkq = v[[k, q]];
        v[[k, p]] = vkp * c + vkq * jqp;
        v[[k, q]] = vkp * jpq + vkq * c;
    }
}

/// Largest eigenvalue of a Hermitian positive semi-definite matrix.
///
/// Power iteration from the all-ones vector; stops once the eigen-residual
/// `‖Av − ρv‖` drops below `tol·ρ`. Falls back to [`hermitian_eigen`] when
/// the iteration stalls or the start vector is orthogonal to the image.
pub fn lambda_max_psd(a: &CMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::shape(format!("λ_max of non-square {:?}", a.dim())));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let scale: f64 = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut x = Array1::from_elem(n, C64::new(1.0 / (n as f64).sqrt(), 0.0));
    for _ in 0..max_iter {
        let y = a.dot(&x);
        let rho = x.iter().zip(y.iter()).map(|(xi, yi)| xi.conj() * yi).sum::<C64>().re;
        let norm_y = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm_y <= f64::MIN_POSITIVE * scale {
            break;
        }
        let resid = y
            .iter()
            .zip(x.iter())
            .map(|(yi, xi)| (yi - xi * rho).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if rho > 0.0 && resid <= tol * rho {
            return Ok(rho);
        }
        x = y.mapv(|z| z / norm_y);
    }
    let eig = hermitian_eigen(a)?;
    Ok(eig.values[n - 1].max(0.0))
}
