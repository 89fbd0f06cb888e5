//! Affinely constrained composite convex solver and the two bi-linear
//! subproblems it is applied to.
//!
//! [`InnerSolver`] runs the forward-backward iteration with a fixed-point map
//! `T` for the affine constraint; [`USubproblem`] and [`BSubproblem`] supply
//! gradients, Lipschitz constants, proximal maps and `T` for the `U`- and
//! `B`-updates of the outer loop. All gradients are real-pair gradients: the
//! returned `G` satisfies `d/dt g(H + tΔ)|₀ = Re⟨G, Δ⟩`.

use ndarray::Axis;

use crate::error::{Error, Result};
use crate::linalg::lambda_max_psd;
use crate::transforms::{
    adjoint, vectorize, CMatrix, Dft2Plan, DftTPlan, Direction, KSpaceSequence, SamplingMask, C64,
};

/// One convex subproblem `min g₁(H) + g₂(H)` over the fixed points of `T`.
pub trait Subproblem {
    fn gradient(&self, h: &CMatrix) -> CMatrix;
    /// Lipschitz constant of [`Subproblem::gradient`].
    fn lipschitz(&self) -> f64;
    /// `prox_{step·g₂}`.
    fn prox(&self, h: &CMatrix, step: f64) -> CMatrix;
    fn t_map(&self, h: &CMatrix) -> CMatrix;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerSolver {
    /// Relaxation of `T_α = αT + (1−α)Id`, in `[0.5, 1)`.
    pub alpha: f64,
    /// Step size; `None` picks `0.99·2(1−α)/L`.
    pub step: Option<f64>,
    pub k0: usize,
}

impl Default for InnerSolver {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            step: None,
            k0: 50,
        }
    }
}

impl InnerSolver {
    pub fn validate_alpha(&self) -> Result<()> {
        if !(0.5..1.0).contains(&self.alpha) {
            return Err(Error::config(format!(
                "alpha {} outside [0.5, 1)",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Step size admissible for Lipschitz constant `l`.
    pub fn step_for(&self, l: f64) -> Result<f64> {
        self.validate_alpha()?;
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Numerical(format!("invalid Lipschitz constant {l}")));
        }
        let upper = 2.0 * (1.0 - self.alpha) / l;
        match self.step {
            None => Ok(0.99 * upper),
            Some(s) if s > 0.0 && s < upper => Ok(s),
            Some(s) => Err(Error::config(format!(
                "step {s} outside the admissible interval (0, {upper})"
            ))),
        }
    }

    /// Returns `H_{K₀}` (or `H₁` when `K₀ ≤ 1`).
    pub fn run<P: Subproblem>(&self, problem: &P, h0: &CMatrix) -> Result<CMatrix> {
        self.run_observed(problem, h0, |_, _| {})
    }

    /// Like [`InnerSolver::run`], calling `observe(k, H_k)` on every prox
    /// output `H_1, H_2, …`.
    pub fn run_observed<P: Subproblem>(
        &self,
        problem: &P,
        h0: &CMatrix,
        mut observe: impl FnMut(usize, &CMatrix),
    ) -> Result<CMatrix> {
        let lambda = self.step_for(problem.lipschitz())?;
        let alpha = self.alpha;
        // a(H) = T_α(H) − λ∇g₁(H); keep a(H_k) and ∇g₁ reuse one gradient per step
        let relaxed = |h: &CMatrix, t_h: &CMatrix, grad: &CMatrix| -> CMatrix {
            t_h * alpha + h * (1.0 - alpha) - grad * lambda
        };

        let g0 = problem.gradient(h0);
        let t0 = problem.t_map(h0);
        let mut a_prev = relaxed(h0, &t0, &g0);
        let mut half = a_prev.clone();
        let mut h = problem.prox(&half, lambda);
        observe(1, &h);

        for k in 2..=self.k0 {
            let grad = problem.gradient(&h);
            let t_h = problem.t_map(&h);
            // H_{k+3/2} = H_{k+1/2} + T(H_{k+1}) − λ∇g₁(H_{k+1}) − T_α(H_k) + λ∇g₁(H_k)
            let step_term = &t_h - &(&grad * lambda);
            half = &(&half + &step_term) - &a_prev;
            a_prev = relaxed(&h, &t_h, &grad);
            h = problem.prox(&half, lambda);
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numerical(format!(
                    "inner iterate became non-finite at k = {k}"
                )));
            }
            observe(k, &h);
        }
        Ok(h)
    }
}

/// Generic entry point mirroring [`InnerSolver::run`].
pub fn run_inner<P: Subproblem>(solver: &InnerSolver, problem: &P, h0: &CMatrix) -> Result<CMatrix> {
    solver.run(problem, h0)
}

/// Column-wise projection onto the balls `‖U e_i‖ ≤ c_u`.
pub fn prox_u(u: &CMatrix, c_u: f64) -> CMatrix {
    let mut out = u.clone();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > c_u {
            let s = c_u / norm;
            col.iter_mut().for_each(|z| *z *= s);
        }
    }
    out
}

/// The `U`-subproblem is not affinely constrained.
pub fn t_map_u(u: &CMatrix) -> CMatrix {
    u.clone()
}

/// Entrywise complex soft-thresholding `b·(1 − t/max{t, |b|})`.
pub fn soft_threshold(b: &CMatrix, t: f64) -> CMatrix {
    b.mapv(|z| shrink(z, t))
}

#[inline]
pub(crate) fn shrink(z: C64, t: f64) -> C64 {
    let mag = z.norm();
    if mag <= t {
        C64::new(0.0, 0.0)
    } else {
        z * (1.0 - t / mag)
    }
}

/// `prox` of `λ₃‖·‖₁` at step `λ`, i.e. soft-thresholding at `λ·λ₃`.
pub fn prox_b(b: &CMatrix, step_times_lambda3: f64) -> CMatrix {
    soft_threshold(b, step_times_lambda3)
}

/// Projection onto `{B : 1ᵀB = 1ᵀ}`.
pub fn t_map_b(b: &CMatrix) -> CMatrix {
    let n = b.nrows() as f64;
    let mut out = b.clone();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let excess = (col.sum() - C64::new(1.0, 0.0)) / n;
        col.iter_mut().for_each(|z| *z -= excess);
    }
    out
}

/// Acquisition operators and data shared by every subproblem of a recovery.
#[derive(Clone)]
pub struct ForwardModel {
    pub(crate) n_p: usize,
    pub(crate) n_f: usize,
    pub(crate) n_fr: usize,
    pub(crate) mask: SamplingMask,
    pub(crate) dft2: Dft2Plan,
    pub(crate) dft_t: DftTPlan,
    pub(crate) lambda_check: CMatrix,
    /// `S(Y)` in Casorati form.
    pub(crate) sampled: CMatrix,
    /// `N_k·F⁻¹S(Y)`.
    pub(crate) backprojected: CMatrix,
}

impl ForwardModel {
    pub fn new(masked_y: &KSpaceSequence, mask: &SamplingMask, lambda_check: CMatrix) -> Result<Self> {
        if masked_y.shape() != mask.shape() {
            return Err(Error::shape(format!(
                "k-space {:?} and mask {:?} differ",
                masked_y.shape(),
                mask.shape()
            )));
        }
        let (n_p, n_f, n_fr) = masked_y.shape();
        if lambda_check.nrows() == 0 || lambda_check.ncols() == 0 {
            return Err(Error::shape("compressed landmarks are empty"));
        }
        let dft2 = Dft2Plan::new(n_p, n_f);
        let mut sampled = vectorize(masked_y);
        mask.apply_casorati(&mut sampled);
        let nk = (n_p * n_f) as f64;
        let backprojected = dft2.apply(&sampled, Direction::Inverse) * nk;
        Ok(Self {
            n_p,
            n_f,
            n_fr,
            mask: mask.clone(),
            dft2,
            dft_t: DftTPlan::new(n_fr),
            lambda_check,
            sampled,
            backprojected,
        })
    }

    pub fn n_k(&self) -> usize {
        self.n_p * self.n_f
    }

    pub fn n_fr(&self) -> usize {
        self.n_fr
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_p, self.n_f, self.n_fr)
    }

    pub fn lambda_check(&self) -> &CMatrix {
        &self.lambda_check
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    /// `S(Y)` as an `N_k × N_fr` matrix.
    pub fn sampled(&self) -> &CMatrix {
        &self.sampled
    }

    /// `S F(X)`.
    pub fn sample(&self, x: &CMatrix) -> CMatrix {
        let mut k = self.dft2.apply(x, Direction::Forward);
        self.mask.apply_casorati(&mut k);
        k
    }

    /// `N_k F⁻¹ S F(X) + λ₁ N_fr X`.
    pub fn normal(&self, x: &CMatrix, lambda1: f64) -> CMatrix {
        let nk = self.n_k() as f64;
        let back = self.dft2.apply(&self.sample(x), Direction::Inverse);
        back * nk + x * (lambda1 * self.n_fr as f64)
    }

    pub fn temporal(&self, x: &CMatrix, dir: Direction) -> CMatrix {
        self.dft_t.apply(x, dir)
    }

    /// `U Λ̌ B`.
    pub fn synthesize(&self, u: &CMatrix, b: &CMatrix) -> CMatrix {
        u.dot(&self.lambda_check).dot(b)
    }
}

/// Penalty weights the subproblems need.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubproblemWeights {
    pub lambda1: f64,
    pub lambda3: f64,
    pub tau_u: f64,
    pub tau_b: f64,
    pub c_u: f64,
}

/// Linearization point `(U_n, B_n, Z_n)` of one outer iteration.
pub struct RecoveryState<'a> {
    pub model: &'a ForwardModel,
    pub weights: SubproblemWeights,
    pub u: CMatrix,
    pub b: CMatrix,
    pub z: CMatrix,
    /// `N_k F⁻¹S(Y) + λ₁ N_fr F_t⁻¹(Z_n)`.
    rhs: CMatrix,
    /// `Λ̌ B_n`.
    lb: CMatrix,
    /// `U_n Λ̌`.
    ul: CMatrix,
}

impl<'a> RecoveryState<'a> {
    pub fn new(
        model: &'a ForwardModel,
        weights: SubproblemWeights,
        u: CMatrix,
        b: CMatrix,
        z: CMatrix,
    ) -> Result<Self> {
        let (nk, nfr) = (model.n_k(), model.n_fr());
        let (d, nl) = model.lambda_check.dim();
        if u.dim() != (nk, d) || b.dim() != (nl, nfr) || z.dim() != (nk, nfr) {
            return Err(Error::shape(format!(
                "state shapes U{:?} B{:?} Z{:?} inconsistent with N_k={nk}, d={d}, N_ℓ={nl}, N_fr={nfr}",
                u.dim(),
                b.dim(),
                z.dim()
            )));
        }
        let rhs = &model.backprojected
            + &(model.temporal(&z, Direction::Inverse) * (weights.lambda1 * nfr as f64));
        let lb = model.lambda_check.dot(&b);
        let ul = u.dot(&model.lambda_check);
        Ok(Self {
            model,
            weights,
            u,
            b,
            z,
            rhs,
            lb,
            ul,
        })
    }

    fn gain(&self) -> f64 {
        self.model.n_k() as f64 + self.weights.lambda1 * self.model.n_fr() as f64
    }

    /// Gradient of the smooth part of the `U`-subproblem.
    pub fn grad_g1_u(&self, u: &CMatrix) -> CMatrix {
        let x = u.dot(&self.lb);
        let resid = &self.model.normal(&x, self.weights.lambda1) - &self.rhs;
        resid.dot(&adjoint(&self.lb)) + &((u - &self.u) * self.weights.tau_u)
    }

    /// `(N_k + λ₁N_fr)·λ_max(Λ̌B_nB_nᴴΛ̌ᴴ) + τ_U`.
    pub fn lipschitz_u(&self) -> Result<f64> {
        let gram = self.lb.dot(&adjoint(&self.lb));
        Ok(self.gain() * lambda_max_psd(&gram, 1e-10, 500)? + self.weights.tau_u)
    }

    /// Smooth objective of the `U`-subproblem.
    pub fn g1_u(&self, u: &CMatrix) -> f64 {
        let x = u.dot(&self.lb);
        self.smooth_terms(&x) + 0.5 * self.weights.tau_u * sq_dist(u, &self.u)
    }

    /// Gradient of the smooth part of the `B`-subproblem.
    pub fn grad_g1_b(&self, b: &CMatrix) -> CMatrix {
        let x = self.ul.dot(b);
        let resid = &self.model.normal(&x, self.weights.lambda1) - &self.rhs;
        adjoint(&self.ul).dot(&resid) + &((b - &self.b) * self.weights.tau_b)
    }

    /// `(N_k + λ₁N_fr)·λ_max(Λ̌ᴴU_nᴴU_nΛ̌) + τ_B`.
    pub fn lipschitz_b(&self) -> Result<f64> {
        let gram = adjoint(&self.ul).dot(&self.ul);
        Ok(self.gain() * lambda_max_psd(&gram, 1e-10, 500)? + self.weights.tau_b)
    }

    /// Smooth objective of the `B`-subproblem.
    pub fn g1_b(&self, b: &CMatrix) -> f64 {
        let x = self.ul.dot(b);
        self.smooth_terms(&x) + 0.5 * self.weights.tau_b * sq_dist(b, &self.b)
    }

    /// `½‖S(Y) − SF(X)‖² + (λ₁/2)‖Z_n − F_t(X)‖²`.
    fn smooth_terms(&self, x: &CMatrix) -> f64 {
        let fit = 0.5 * sq_dist(&self.model.sample(x), &self.model.sampled);
        let temporal = self.model.temporal(x, Direction::Forward);
        fit + 0.5 * self.weights.lambda1 * sq_dist(&self.z, &temporal)
    }

    pub fn u_subproblem(&self) -> Result<USubproblem<'_, 'a>> {
        Ok(USubproblem {
            state: self,
            lipschitz: self.lipschitz_u()?,
        })
    }

    pub fn b_subproblem(&self) -> Result<BSubproblem<'_, 'a>> {
        Ok(BSubproblem {
            state: self,
            lipschitz: self.lipschitz_b()?,
        })
    }
}

fn sq_dist(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum()
}

pub struct USubproblem<'s, 'a> {
    state: &'s RecoveryState<'a>,
    lipschitz: f64,
}

impl Subproblem for USubproblem<'_, '_> {
    fn gradient(&self, h: &CMatrix) -> CMatrix {
        self.state.grad_g1_u(h)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn prox(&self, h: &CMatrix, _step: f64) -> CMatrix {
        prox_u(h, self.state.weights.c_u)
    }

    fn t_map(&self, h: &CMatrix) -> CMatrix {
        t_map_u(h)
    }
}

pub struct BSubproblem<'s, 'a> {
    state: &'s RecoveryState<'a>,
    lipschitz: f64,
}

impl Subproblem for BSubproblem<'_, '_> {
    fn gradient(&self, h: &CMatrix) -> CMatrix {
        self.state.grad_g1_b(h)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn prox(&self, h: &CMatrix, step: f64) -> CMatrix {
        prox_b(h, step * self.state.weights.lambda3)
    }

    fn t_map(&self, h: &CMatrix) -> CMatrix {
        t_map_b(h)
    }
}

/// Solves the `U`-subproblem and projects the result onto the column balls.
pub fn solve_u(state: &RecoveryState<'_>, solver: &InnerSolver) -> Result<CMatrix> {
    let problem = state.u_subproblem()?;
    let h = solver.run(&problem, &state.u)?;
    Ok(prox_u(&h, state.weights.c_u))
}

/// Solves the `B`-subproblem and projects the result onto `1ᵀB = 1ᵀ`.
pub fn solve_b(state: &RecoveryState<'_>, solver: &InnerSolver) -> Result<CMatrix> {
    let problem = state.b_subproblem()?;
    let h = solver.run(&problem, &state.b)?;
    Ok(t_map_b(&h))
}
