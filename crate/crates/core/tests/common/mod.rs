//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the crate's numerical code: DFTs are direct
//! double sums, linear systems are solved by dense elimination and the
//! metrics are computed pixel by pixel.
#![allow(dead_code)]

use std::f64::consts::PI;

use bilmdm::transforms::{CMatrix, C64};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn rand_cvec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| randn(rng)).collect()
}

pub fn rand_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    Array2::from_shape_fn((r, c), |_| randn(rng))
}

pub fn sq_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(m: &CMatrix) -> f64 {
    sq_norm(m).sqrt()
}

pub fn dist(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// `Σ conj(a)·b`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn adjoint(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

/// Direct 2-D DFT of one column-major `n_p × n_f` frame. Forward is
/// unnormalized with `exp(−2πi·)`; inverse carries `1/(n_p n_f)`.
pub fn direct_dft2(frame: &[C64], n_p: usize, n_f: usize, inverse: bool) -> Vec<C64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut out = vec![C64::new(0.0, 0.0); n_p * n_f];
    for kr in 0..n_p {
        for kc in 0..n_f {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..n_p {
                for c in 0..n_f {
                    let phase = sign
                        * 2.0
                        * PI
                        * ((kr * r) as f64 / n_p as f64 + (kc * c) as f64 / n_f as f64);
                    acc += frame[r + n_p * c] * C64::from_polar(1.0, phase);
                }
            }
            out[kr + n_p * kc] = if inverse { acc / (n_p * n_f) as f64 } else { acc };
        }
    }
    out
}

/// Direct DFT along every row of `mat`.
pub fn direct_dft_rows(mat: &CMatrix, inverse: bool) -> CMatrix {
    let n = mat.ncols();
    let sign = if inverse { 1.0 } else { -1.0 };
    Array2::from_shape_fn(mat.dim(), |(i, k)| {
        let mut acc = C64::new(0.0, 0.0);
        for t in 0..n {
            acc += mat[[i, t]] * C64::from_polar(1.0, sign * 2.0 * PI * (k * t) as f64 / n as f64);
        }
        if inverse {
            acc / n as f64
        } else {
            acc
        }
    })
}

/// Direct DFT of every column of a Casorati matrix, each column being a
/// column-major `n_p × n_f` frame.
pub fn direct_dft2_cols(mat: &CMatrix, n_p: usize, n_f: usize, inverse: bool) -> CMatrix {
    let mut out = Array2::zeros(mat.dim());
    for t in 0..mat.ncols() {
        let col: Vec<C64> = mat.column(t).to_vec();
        for (i, v) in direct_dft2(&col, n_p, n_f, inverse).into_iter().enumerate() {
            out[[i, t]] = v;
        }
    }
    out
}

/// Gaussian elimination with partial pivoting on a dense complex system.
pub fn solve_complex(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Vec<C64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().partial_cmp(&a[j][col].norm()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col];
        assert!(p.norm() > 1e-300, "singular system");
        for row in col + 1..n {
            let f = a[row][col] / p;
            if f.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Euclidean projection of `v` onto `{x : Cx = d}` via `x = v − Cᴴ(CCᴴ)⁻¹(Cv − d)`.
pub fn project_affine_kkt(v: &[C64], c: &[Vec<C64>], d: &[C64]) -> Vec<C64> {
    let m = c.len();
    let resid: Vec<C64> = (0..m)
        .map(|i| c[i].iter().zip(v).map(|(a, b)| a * b).sum::<C64>() - d[i])
        .collect();
    let gram: Vec<Vec<C64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| c[i].iter().zip(&c[j]).map(|(a, b)| a * b.conj()).sum())
                .collect()
        })
        .collect();
    let y = solve_complex(gram, resid);
    v.iter()
        .enumerate()
        .map(|(k, &vk)| vk - (0..m).map(|i| c[i][k].conj() * y[i]).sum::<C64>())
        .collect()
}

/// Projection onto `{‖x‖ ≤ radius}` by bisection on the multiplier of
/// `min ‖x − v‖² + μ(‖x‖² − radius²)`.
pub fn ball_projection_bisection(v: &[C64], radius: f64) -> Vec<C64> {
    let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nv <= radius {
        return v.to_vec();
    }
    // x(μ) = v/(1+μ); ‖x(μ)‖ decreasing in μ
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while nv / (1.0 + hi) > radius {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if nv / (1.0 + mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    v.iter().map(|z| z / (1.0 + mu)).collect()
}

/// Greedy farthest-point selection recomputing every distance each round.
pub fn landmarks_brute_force(y: &CMatrix, n: usize) -> Vec<usize> {
    let cols = y.ncols();
    let d2 = |a: usize, b: usize| -> f64 {
        (0..y.nrows()).map(|r| (y[[r, a]] - y[[r, b]]).norm_sqr()).sum()
    };
    let norms: Vec<f64> = (0..cols)
        .map(|j| (0..y.nrows()).map(|r| y[[r, j]].norm_sqr()).sum())
        .collect();
    let mut first = 0;
    for j in 1..cols {
        if norms[j] > norms[first] {
            first = j;
        }
    }
    let mut chosen = vec![first];
    while chosen.len() < n {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..cols {
            if chosen.contains(&j) {
                continue;
            }
            let m = chosen.iter().map(|&s| d2(s, j)).fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(_, b)| m > b) {
                best = Some((j, m));
            }
        }
        chosen.push(best.unwrap().0);
    }
    chosen
}

/// Smooth part of the `U`-subproblem written out directly:
/// `½‖S(Y) − SF(UΛ̌B)‖² + (λ₁/2)‖Z − F_t(UΛ̌B)‖² + (τ/2)‖U − U_n‖²`,
/// with `mask` in Casorati layout and `sy` already sampled.
pub struct DirectSubproblem<'a> {
    pub n_p: usize,
    pub n_f: usize,
    pub mask: &'a [bool],
    pub sy: &'a CMatrix,
    pub lambda_check: &'a CMatrix,
    pub z: &'a CMatrix,
    pub lambda1: f64,
}

impl DirectSubproblem<'_> {
    fn smooth(&self, x: &CMatrix) -> f64 {
        let k = direct_dft2_cols(x, self.n_p, self.n_f, false);
        let mut fit = 0.0;
        for ((i, t), v) in k.indexed_iter() {
            if self.mask[i + k.nrows() * t] {
                fit += (self.sy[[i, t]] - v).norm_sqr();
            }
        }
        let ft = direct_dft_rows(x, false);
        let temporal: f64 = self.z.iter().zip(ft.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        0.5 * fit + 0.5 * self.lambda1 * temporal
    }

    pub fn g_u(&self, u: &CMatrix, b: &CMatrix, u_n: &CMatrix, tau: f64) -> f64 {
        let x = u.dot(self.lambda_check).dot(b);
        self.smooth(&x) + 0.5 * tau * dist(u, u_n).powi(2)
    }

    pub fn g_b(&self, u: &CMatrix, b: &CMatrix, b_n: &CMatrix, tau: f64) -> f64 {
        let x = u.dot(self.lambda_check).dot(b);
        self.smooth(&x) + 0.5 * tau * dist(b, b_n).powi(2)
    }
}

/// Zero-padded "same" size 2-D convolution by a direct quadruple loop.
pub fn conv_same(img: &Array2<f64>, k: &Array2<f64>) -> Array2<f64> {
    let (n_p, n_f) = img.dim();
    let (kr, kc) = k.dim();
    let (or, oc) = ((kr - 1) / 2, (kc - 1) / 2);
    Array2::from_shape_fn((n_p, n_f), |(r, c)| {
        let mut acc = 0.0;
        for i in 0..kr {
            for j in 0..kc {
                let rr = r as isize + or as isize - i as isize;
                let cc = c as isize + oc as isize - j as isize;
                if rr >= 0 && cc >= 0 && (rr as usize) < n_p && (cc as usize) < n_f {
                    acc += k[[i, j]] * img[[rr as usize, cc as usize]];
                }
            }
        }
        acc
    })
}

/// Single-pair SSIM map mean with an explicit 2-D Gaussian window that is
/// clipped at the border and renormalized; variances use centered sums.
pub fn ssim_windowed(a: &Array2<f64>, b: &Array2<f64>, range: f64) -> f64 {
    let (n_p, n_f) = a.dim();
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let mut total = 0.0;
    for r in 0..n_p {
        for c in 0..n_f {
            let mut pts = Vec::new();
            for dy in -5isize..=5 {
                for dx in -5isize..=5 {
                    let (rr, cc) = (r as isize + dy, c as isize + dx);
                    if rr >= 0 && cc >= 0 && (rr as usize) < n_p && (cc as usize) < n_f {
                        let w = (-((dx * dx + dy * dy) as f64) / (2.0 * 1.5 * 1.5)).exp();
                        pts.push((w, a[[rr as usize, cc as usize]], b[[rr as usize, cc as usize]]));
                    }
                }
            }
            let ws: f64 = pts.iter().map(|p| p.0).sum();
            let ma = pts.iter().map(|p| p.0 * p.1).sum::<f64>() / ws;
            let mb = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / ws;
            let va = pts.iter().map(|p| p.0 * (p.1 - ma).powi(2)).sum::<f64>() / ws;
            let vb = pts.iter().map(|p| p.0 * (p.2 - mb).powi(2)).sum::<f64>() / ws;
            let cov = pts.iter().map(|p| p.0 * (p.1 - ma) * (p.2 - mb)).sum::<f64>() / ws;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    total / (n_p * n_f) as f64
}

/// ADMM on `min ‖Λ − ΛW‖² + λ_W‖W‖₁` s.t. `1ᵀW = 1ᵀ`, `diag W = 0`, one
/// column at a time; the `W`-step solves the equality-constrained least
/// squares through its KKT system.
pub fn self_expression_admm(lambda: &CMatrix, lambda_w: f64, rho: f64, iters: usize) -> CMatrix {
    let n = lambda.ncols();
    let mut w_out = Array2::zeros((n, n));
    for j in 0..n {
        let free: Vec<usize> = (0..n).filter(|&i| i != j).collect();
        let m = free.len();
        let lf: Vec<Vec<C64>> = free.iter().map(|&i| lambda.column(i).to_vec()).collect();
        let target = lambda.column(j).to_vec();
        // Q = 2Λ_FᴴΛ_F + ρI, q0 = 2Λ_Fᴴλ_j
        let q: Vec<Vec<C64>> = (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| 2.0 * inner(&lf[a], &lf[b]) + if a == b { C64::new(rho, 0.0) } else { C64::new(0.0, 0.0) })
                    .collect()
            })
            .collect();
        let q0: Vec<C64> = (0..m).map(|a| 2.0 * inner(&lf[a], &target)).collect();
        let mut v = vec![C64::new(1.0 / m as f64, 0.0); m];
        let mut u = vec![C64::new(0.0, 0.0); m];
        let mut w = v.clone();
        for _ in 0..iters {
            let mut sys: Vec<Vec<C64>> = q.iter().map(|row| {
                let mut r = row.clone();
                r.push(C64::new(1.0, 0.0));
                r
            }).collect();
            let mut last = vec![C64::new(1.0, 0.0); m];
            last.push(C64::new(0.0, 0.0));
            sys.push(last);
            let mut rhs: Vec<C64> = (0..m).map(|a| q0[a] + rho * (v[a] - u[a])).collect();
            rhs.push(C64::new(1.0, 0.0));
            let sol = solve_complex(sys, rhs);
            w = sol[..m].to_vec();
            for a in 0..m {
                let s = w[a] + u[a];
                let mag = s.norm();
                let t = lambda_w / rho;
                v[a] = if mag <= t { C64::new(0.0, 0.0) } else { s * (1.0 - t / mag) };
                u[a] += w[a] - v[a];
            }
        }
        for (a, &i) in free.iter().enumerate() {
            w_out[[i, j]] = w[a];
        }
    }
    w_out
}

pub fn w_objective_direct(lambda: &CMatrix, w: &CMatrix, lambda_w: f64) -> f64 {
    let fit = dist(lambda, &lambda.dot(w)).powi(2);
    fit + lambda_w * w.iter().map(|z| z.norm()).sum::<f64>()
}
