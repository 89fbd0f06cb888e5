//! Outer successive-convex-approximation loop for `X ≈ U Λ̌ B`.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embedding::{l1_norm, CompressedLandmarks};
use crate::error::{Error, Result};
use crate::inner::{
    prox_u, shrink, solve_b, solve_u, t_map_b, ForwardModel, InnerSolver, RecoveryState,
    SubproblemWeights,
};
use crate::sampling::extract_navigators;
use crate::transforms::{
    adjoint, devectorize, CMatrix, Direction, ImageSequence, KSpaceSequence, SamplingMask, C64,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `None` uses `0.05·‖Y_nav‖_∞`.
    pub lambda3: Option<f64>,
    pub c_u: f64,
    pub tau_u: f64,
    pub tau_b: f64,
    pub zeta: f64,
    pub gamma0: f64,
    /// `None` uses `⌈0.2·N_fr⌉`.
    pub n_landmarks: Option<usize>,
    pub embed_dim: usize,
    /// `None` uses `10⁻³·‖Λ‖²_F/N_ℓ`.
    pub lambda_w: Option<f64>,
    /// Inner iterations for the self-expression solve.
    pub w_iters: usize,
    pub outer_iters: usize,
    pub k0: usize,
    pub alpha: f64,
    /// Relative iterate change below which the outer loop stops.
    pub stop_tol: f64,
    /// Seed of the random perturbation added to `U₀`.
    pub seed: u64,
    /// Column-norm size of that perturbation relative to `C_U`.
    pub init_perturbation: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.05,
            lambda3: None,
            c_u: 1.0,
            tau_u: 1.0,
            tau_b: 1.0,
            zeta: 0.001,
            gamma0: 0.9,
            n_landmarks: None,
            embed_dim: 3,
            lambda_w: None,
            w_iters: 2000,
            outer_iters: 60,
            k0: 50,
            alpha: 0.5,
            stop_tol: 1e-3,
            seed: 0,
            init_perturbation: 0.1,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("c_u", self.c_u),
            ("tau_u", self.tau_u),
            ("tau_b", self.tau_b),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be a positive number, got {v}")));
            }
        }
        for (name, v) in [("lambda3", self.lambda3), ("lambda_w", self.lambda_w)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::config(format!("zeta {} outside (0, 1)", self.zeta)));
        }
        if !(self.gamma0 > 0.0 && self.gamma0 <= 1.0) {
            return Err(Error::config(format!("gamma0 {} outside (0, 1]", self.gamma0)));
        }
        if self.embed_dim == 0 {
            return Err(Error::config("embed_dim must be ≥ 1"));
        }
        if self.n_landmarks == Some(0) {
            return Err(Error::config("n_landmarks must be ≥ 1"));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::config("stop_tol must be ≥ 0"));
        }
        if !(self.init_perturbation >= 0.0 && self.init_perturbation.is_finite()) {
            return Err(Error::config("init_perturbation must be ≥ 0"));
        }
        self.inner_solver().validate_alpha()
    }

    pub fn inner_solver(&self) -> InnerSolver {
        InnerSolver {
            alpha: self.alpha,
            step: None,
            k0: self.k0,
        }
    }

    /// Landmark count for `n_fr` frames.
    pub fn landmark_count(&self, n_fr: usize) -> usize {
        self.n_landmarks
            .unwrap_or_else(|| ((0.2 * n_fr as f64).ceil() as usize).max(2))
            .min(n_fr)
    }
}

/// Per-iterate constraint check: largest `‖U e_i‖` and `‖1ᵀB − 1ᵀ‖_∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Feasibility {
    pub max_u_column_norm: f64,
    pub b_affine_violation: f64,
}

impl Feasibility {
    pub fn of(u: &CMatrix, b: &CMatrix) -> Self {
        let max_u_column_norm = u
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let b_affine_violation = b
            .columns()
            .into_iter()
            .map(|c| (c.sum() - C64::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max);
        Self {
            max_u_column_norm,
            b_affine_violation,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub x_hat: ImageSequence,
    pub u_star: CMatrix,
    pub b_star: CMatrix,
    pub z_star: CMatrix,
    pub objective_trace: Vec<f64>,
    pub gamma_trace: Vec<f64>,
    pub residual_trace: Vec<f64>,
    pub feasibility_trace: Vec<Feasibility>,
    /// `λ₃` actually used.
    pub lambda3: f64,
}

impl RecoveryResult {
    pub fn iterations(&self) -> usize {
        self.objective_trace.len()
    }
}

/// `γ_{n+1} = γ_n(1 − ζγ_n)`.
pub fn gamma_next(gamma: f64, zeta: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::config(format!("gamma {gamma} outside (0, 1]")));
    }
    if !(zeta >= 0.0 && zeta < 1.0) {
        return Err(Error::config(format!("zeta {zeta} outside [0, 1)")));
    }
    Ok(gamma * (1.0 - zeta * gamma))
}

/// Soft-thresholds the temporal spectrum `F_t(UΛ̌B)` at `λ₂/λ₁`.
pub fn update_z(model: &ForwardModel, u: &CMatrix, b: &CMatrix, lambda1: f64, lambda2: f64) -> Result<CMatrix> {
    if !(lambda1 > 0.0) {
        return Err(Error::config("lambda1 must be > 0"));
    }
    let spectrum = model.temporal(&model.synthesize(u, b), Direction::Forward);
    let t = lambda2 / lambda1;
    Ok(spectrum.mapv(|z| shrink(z, t)))
}

/// Scalar weights of the full recovery objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

/// `½‖S(Y) − SF(UΛ̌B)‖² + (λ₁/2)‖Z − F_t(UΛ̌B)‖² + λ₂‖Z‖₁ + λ₃‖B‖₁`.
pub fn objective(model: &ForwardModel, u: &CMatrix, b: &CMatrix, z: &CMatrix, w: ObjectiveWeights) -> f64 {
    let x = model.synthesize(u, b);
    let fit: f64 = (&model.sample(&x) - model.sampled())
        .iter()
        .map(|v| v.norm_sqr())
        .sum();
    let temporal: f64 = (z - &model.temporal(&x, Direction::Forward))
        .iter()
        .map(|v| v.norm_sqr())
        .sum();
    0.5 * fit + 0.5 * w.lambda1 * temporal + w.lambda2 * l1_norm(z) + w.lambda3 * l1_norm(b)
}

/// `0.05·‖Y_nav‖_∞`.
pub fn default_lambda3(masked_y: &KSpaceSequence, mask: &SamplingMask) -> Result<f64> {
    let nav = extract_navigators(masked_y, mask)?;
    let peak = nav.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak > 0.0 {
        Ok(0.05 * peak)
    } else {
        Err(Error::Numerical("navigator data are identically zero".into()))
    }
}

/// Deterministic, feasible starting point `(U₀, B₀, Z₀)`.
pub fn initial_state(model: &ForwardModel, cfg: &RecoveryConfig) -> (CMatrix, CMatrix, CMatrix) {
    let (d, nl) = model.lambda_check().dim();
    let nk = model.n_k();
    let b0 = t_map_b(&Array2::zeros((nl, model.n_fr())));
    // (1/N_k)·F⁻¹S(Y)·B₀ᴴΛ̌ᴴ, where model.backprojected = N_k F⁻¹S(Y)
    let zero_filled = &model.backprojected / nk as f64;
    let mut u0 = zero_filled.dot(&adjoint(&model.lambda_check().dot(&b0))) / nk as f64;
    if cfg.init_perturbation > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let sigma = cfg.init_perturbation * cfg.c_u / (2.0 * nk as f64).sqrt();
        for z in u0.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z += C64::new(re, im) * sigma;
        }
    }
    let u0 = prox_u(&u0, cfg.c_u);
    debug_assert_eq!(u0.ncols(), d);
    let z0 = model.temporal(&model.synthesize(&u0, &b0), Direction::Forward);
    (u0, b0, z0)
}

fn relative_change(old: [&CMatrix; 3], new: [&CMatrix; 3]) -> f64 {
    let mut diff = 0.0;
    let mut base = 0.0;
    for (o, n) in old.iter().zip(new.iter()) {
        diff += o.iter().zip(n.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        base += o.iter().map(|a| a.norm_sqr()).sum::<f64>();
    }
    if base > 0.0 {
        (diff / base).sqrt()
    } else {
        diff.sqrt()
    }
}

/// Runs the outer loop on already sampled data.
pub fn run_bilmdm(
    masked_y: &KSpaceSequence,
    mask: &SamplingMask,
    landmarks: &CompressedLandmarks,
    cfg: &RecoveryConfig,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    let model = ForwardModel::new(masked_y, mask, landmarks.lambda_check.clone())?;
    let lambda3 = match cfg.lambda3 {
        Some(v) => v,
        None => default_lambda3(masked_y, mask)?,
    };
    run_with_model(&model, cfg, lambda3)
}

/// Outer loop on a prepared [`ForwardModel`].
pub fn run_with_model(model: &ForwardModel, cfg: &RecoveryConfig, lambda3: f64) -> Result<RecoveryResult> {
    cfg.validate()?;
    let weights = SubproblemWeights {
        lambda1: cfg.lambda1,
        lambda3,
        tau_u: cfg.tau_u,
        tau_b: cfg.tau_b,
        c_u: cfg.c_u,
    };
    let obj_w = ObjectiveWeights {
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        lambda3,
    };
    let solver = cfg.inner_solver();
    let (mut u, mut b, mut z) = initial_state(model, cfg);
    let mut gamma = cfg.gamma0;

    let mut objective_trace = Vec::with_capacity(cfg.outer_iters);
    let mut gamma_trace = Vec::with_capacity(cfg.outer_iters);
    let mut residual_trace = Vec::with_capacity(cfg.outer_iters);
    let mut feasibility_trace = Vec::with_capacity(cfg.outer_iters);

    for n in 0..cfg.outer_iters {
        gamma = gamma_next(gamma, cfg.zeta)?;
        let state = RecoveryState::new(model, weights, u.clone(), b.clone(), z.clone())?;
        let (u_hat, b_hat) = rayon::join(|| solve_u(&state, &solver), || solve_b(&state, &solver));
        let (u_hat, b_hat) = (u_hat?, b_hat?);
        let z_hat = update_z(model, &u, &b, cfg.lambda1, cfg.lambda2)?;

        let u_next = &u * (1.0 - gamma) + &(u_hat * gamma);
        let b_next = &b * (1.0 - gamma) + &(b_hat * gamma);
        let z_next = &z * (1.0 - gamma) + &(z_hat * gamma);
        let change = relative_change([&u, &b, &z], [&u_next, &b_next, &z_next]);
        u = u_next;
        b = b_next;
        z = z_next;

        let value = objective(model, &u, &b, &z, obj_w);
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "objective became non-finite at outer iteration {n}"
            )));
        }
        objective_trace.push(value);
        gamma_trace.push(gamma);
        residual_trace.push(change);
        feasibility_trace.push(Feasibility::of(&u, &b));
        if change < cfg.stop_tol {
            break;
        }
    }

    let x = model.synthesize(&u, &b);
    let (n_p, n_f, _) = model.shape();
    let x_hat = devectorize(&x, n_p, n_f)?;
    Ok(RecoveryResult {
        x_hat,
        u_star: u,
        b_star: b,
        z_star: z,
        objective_trace,
        gamma_trace,
        residual_trace,
        feasibility_trace,
        lambda3,
    })
}
