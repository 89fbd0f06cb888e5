//! Sparse affine self-expression of the landmarks and its spectral compression.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::inner::{soft_threshold, InnerSolver, Subproblem};
use crate::landmarks::LandmarkSet;
use crate::linalg::{hermitian_eigen, lambda_max_psd};
use crate::transforms::{adjoint, CMatrix, C64};

#[derive(Clone, Debug)]
pub struct SelfExpression {
    /// `N_ℓ × N_ℓ`, zero diagonal, unit column sums.
    pub w: CMatrix,
    pub lambda_w: f64,
    /// `‖Λ − ΛW‖²_F + λ_W‖W‖₁` at the returned `W`.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct CompressedLandmarks {
    /// `d × N_ℓ` with orthonormal rows.
    pub lambda_check: CMatrix,
    pub d: usize,
    /// The `d` smallest eigenvalues of `(I−W)(I−W)ᴴ`, ascending.
    pub eigvals: Array1<f64>,
}

/// Euclidean projection onto `{W : 1ᵀW = 1ᵀ, diag(W) = 0}`.
pub fn project_affine_zero_diag(w: &CMatrix) -> Result<CMatrix> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::shape(format!("expected a square matrix, got {:?}", w.dim())));
    }
    if n < 2 {
        return Err(Error::config(
            "zero-diagonal affine constraint is infeasible for a single landmark",
        ));
    }
    let mut out = w.clone();
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        col[j] = C64::new(0.0, 0.0);
        let shift = (C64::new(1.0, 0.0) - col.sum()) / (n - 1) as f64;
        for (i, z) in col.iter_mut().enumerate() {
            if i != j {
                *z += shift;
            }
        }
    }
    Ok(out)
}

/// `‖Λ − ΛW‖²_F + λ_W‖W‖₁`.
pub fn w_objective(lambda: &CMatrix, w: &CMatrix, lambda_w: f64) -> f64 {
    let fit: f64 = (lambda - &lambda.dot(w)).iter().map(|z| z.norm_sqr()).sum();
    fit + lambda_w * l1_norm(w)
}

pub(crate) fn l1_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).sum()
}

/// `λ_W = 10⁻³·‖Λ‖²_F / N_ℓ`.
pub fn default_lambda_w(landmarks: &LandmarkSet) -> f64 {
    let energy: f64 = landmarks.lambda_mat.iter().map(|z| z.norm_sqr()).sum();
    1e-3 * energy / landmarks.len().max(1) as f64
}

struct SelfExpressionProblem<'a> {
    lambda: &'a CMatrix,
    gram: CMatrix,
    lambda_w: f64,
    lipschitz: f64,
}

impl Subproblem for SelfExpressionProblem<'_> {
    fn gradient(&self, h: &CMatrix) -> CMatrix {
        // 2Λᴴ(ΛW − Λ) = 2(ΛᴴΛ W − ΛᴴΛ)
        (&self.gram.dot(h) - &self.gram) * 2.0
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn prox(&self, h: &CMatrix, step: f64) -> CMatrix {
        soft_threshold(h, step * self.lambda_w)
    }

    fn t_map(&self, h: &CMatrix) -> CMatrix {
        project_affine_zero_diag(h).expect("square, N_ℓ ≥ 2 checked on entry")
    }
}

/// Sparse affine self-expression `Λ ≈ ΛW`.
pub fn solve_w(landmarks: &LandmarkSet, lambda_w: f64, solver: &InnerSolver) -> Result<SelfExpression> {
    solve_w_observed(landmarks, lambda_w, solver, |_, _| {})
}

/// [`solve_w`] reporting each inner iterate.
pub fn solve_w_observed(
    landmarks: &LandmarkSet,
    lambda_w: f64,
    solver: &InnerSolver,
    observe: impl FnMut(usize, &CMatrix),
) -> Result<SelfExpression> {
    let n = landmarks.len();
    if n < 2 {
        return Err(Error::config("self-expression needs at least two landmarks"));
    }
    if !(lambda_w > 0.0 && lambda_w.is_finite()) {
        return Err(Error::config(format!("lambda_w {lambda_w} must be > 0")));
    }
    let lambda = &landmarks.lambda_mat;
    let gram = adjoint(lambda).dot(lambda);
    let lmax = lambda_max_psd(&gram, 1e-10, 500)?;
    // a zero landmark cloud still needs a positive constant for the step
    let lipschitz = (2.0 * lmax).max(f64::MIN_POSITIVE.sqrt());
    let problem = SelfExpressionProblem {
        lambda,
        gram,
        lambda_w,
        lipschitz,
    };
    let w0 = project_affine_zero_diag(&Array2::zeros((n, n)))?;
    let h = solver.run_observed(&problem, &w0, observe)?;
    let w = project_affine_zero_diag(&h)?;
    let residual = w_objective(problem.lambda, &w, lambda_w);
    Ok(SelfExpression {
        w,
        lambda_w,
        residual,
    })
}

/// Rows of the result are the conjugated eigenvectors of `(I−W)(I−W)ᴴ` for
/// its `d` smallest eigenvalues. Each eigenvector is rotated so that its
/// first entry of largest magnitude is real and positive.
pub fn compress_landmarks(expr: &SelfExpression, d: usize) -> Result<CompressedLandmarks> {
    let n = expr.w.nrows();
    if d == 0 || d > n {
        return Err(Error::config(format!("embedding dimension {d} must lie in 1..={n}")));
    }
    let i_minus_w = &Array2::<C64>::eye(n) - &expr.w;
    let m = i_minus_w.dot(&adjoint(&i_minus_w));
    let eig = hermitian_eigen(&m)?;
    let mut lambda_check = Array2::zeros((d, n));
    for k in 0..d {
        let v = eig.vectors.column(k);
        let mut pivot = 0;
        for (i, z) in v.iter().enumerate() {
            if z.norm() > v[pivot].norm() * (1.0 + 1e-12) {
                pivot = i;
            }
        }
        let rot = if v[pivot].norm() > 0.0 {
            v[pivot].conj() / v[pivot].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            lambda_check[[k, i]] = (v[i] * rot).conj();
        }
    }
    Ok(CompressedLandmarks {
        lambda_check,
        d,
        eigvals: eig.values.slice(ndarray::s![..d]).to_owned(),
    })
}
