//! End-to-end driver: phantom, sampling, landmarks, embedding, recovery,
//! evaluation and artifact emission.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{compress_landmarks, default_lambda_w, solve_w, CompressedLandmarks, SelfExpression};
use crate::error::{Error, Result, StageContext};
use crate::inner::InnerSolver;
use crate::io::{write_blmd, write_frame_nrmse_csv, write_mask, write_pgm, write_trace_csv};
use crate::landmarks::{select_landmarks, LandmarkSet};
use crate::metrics::{evaluate, MetricsReport};
use crate::recovery::{run_bilmdm, RecoveryConfig, RecoveryResult};
use crate::sampling::{build_mask, extract_navigators, generate_phantom, MaskConfig, PhantomConfig};
use crate::transforms::{
    apply_sampling, dft2_forward, dft2_inverse, ImageSequence, KSpaceSequence, SamplingMask,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub phantom: PhantomConfig,
    pub mask: MaskConfig,
    /// `recovery.seed` is replaced by `base_seed + trial` for each trial.
    pub recovery: RecoveryConfig,
    pub output_dir: PathBuf,
    pub emit_images: bool,
    pub emit_csv: bool,
    pub trials: usize,
    pub base_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            phantom: PhantomConfig::default(),
            mask: MaskConfig::default(),
            recovery: RecoveryConfig::default(),
            output_dir: PathBuf::from("out"),
            emit_images: false,
            emit_csv: true,
            trials: 1,
            base_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.phantom.validate()?;
        self.recovery.validate()?;
        if self.trials == 0 {
            return Err(Error::config("trials must be ≥ 1"));
        }
        if self.mask.nav_rows == 0 || self.mask.nav_rows > self.phantom.n_p {
            return Err(Error::config(format!(
                "nav_rows {} must lie in 1..={}",
                self.mask.nav_rows, self.phantom.n_p
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub bilmdm: MetricsReport,
    pub zero_filled: MetricsReport,
    pub acceleration_achieved: f64,
    pub trials: usize,
    pub nrmse_mean: f64,
    pub nrmse_std: f64,
    pub wall_clock_s: f64,
}

impl PipelineReport {
    /// The report as JSON with the wall-clock field zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_clock_s: 0.0,
            ..self.clone()
        }
    }
}

/// Everything computed before the outer loop; shared by all trials.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub truth: ImageSequence,
    pub mask: SamplingMask,
    pub masked_y: KSpaceSequence,
    pub landmarks: LandmarkSet,
    pub self_expression: SelfExpression,
    pub compressed: CompressedLandmarks,
}

/// `F⁻¹(S(Y))`.
pub fn zero_filled_baseline(masked_y: &KSpaceSequence) -> ImageSequence {
    dft2_inverse(masked_y)
}

pub fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate()?;
    let truth = generate_phantom(&cfg.phantom).stage("phantom")?;
    let (n_p, n_f, n_fr) = truth.shape();
    let mask = build_mask(n_p, n_f, n_fr, &cfg.mask).stage("sampling")?;
    let masked_y = apply_sampling(&dft2_forward(&truth), &mask).stage("sampling")?;
    let nav = extract_navigators(&masked_y, &mask).stage("landmarks")?;
    let landmarks = select_landmarks(&nav, cfg.recovery.landmark_count(n_fr)).stage("landmarks")?;
    let solver = InnerSolver {
        alpha: cfg.recovery.alpha,
        step: None,
        k0: cfg.recovery.w_iters,
    };
    let lambda_w = cfg.recovery.lambda_w.unwrap_or_else(|| default_lambda_w(&landmarks));
    let self_expression = solve_w(&landmarks, lambda_w, &solver).stage("embedding")?;
    let compressed = compress_landmarks(&self_expression, cfg.recovery.embed_dim).stage("embedding")?;
    Ok(Prepared {
        truth,
        mask,
        masked_y,
        landmarks,
        self_expression,
        compressed,
    })
}

/// One trial of the outer loop with the given `U₀` seed.
pub fn recover(prepared: &Prepared, recovery: &RecoveryConfig, seed: u64) -> Result<RecoveryResult> {
    let cfg = RecoveryConfig {
        seed,
        ..recovery.clone()
    };
    run_bilmdm(&prepared.masked_y, &prepared.mask, &prepared.compressed, &cfg).stage("recovery")
}

#[derive(Debug)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub prepared: Prepared,
    pub results: Vec<RecoveryResult>,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_frames(dir: &Path, prefix: &str, cube: &ImageSequence, scales: &mut String) -> Result<()> {
    for t in 0..cube.n_fr() {
        let name = format!("{prefix}_{t:03}.pgm");
        let s = write_pgm(&dir.join(&name), cube.n_p(), cube.n_f(), cube.frame(t))?;
        scales.push_str(&format!("{name} {s:e}\n"));
    }
    Ok(())
}

fn write_scales(dir: &Path, scales: &str) -> Result<()> {
    let path = dir.join("pgm_scales.txt");
    std::fs::write(&path, scales).map_err(|e| Error::io(&path, e))
}

/// Writes the ground truth (and its frames) only.
pub fn emit_phantom(cfg: &PipelineConfig) -> Result<ImageSequence> {
    cfg.validate()?;
    let truth = generate_phantom(&cfg.phantom).stage("phantom")?;
    create_dir(&cfg.output_dir).stage("output")?;
    write_blmd(&cfg.output_dir.join("truth.blmd"), &truth).stage("output")?;
    if cfg.emit_images {
        let mut scales = String::new();
        write_frames(&cfg.output_dir, "truth", &truth, &mut scales).stage("output")?;
        write_scales(&cfg.output_dir, &scales).stage("output")?;
    }
    Ok(truth)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Runs all trials and writes every artifact under `cfg.output_dir`.
///
/// With one trial the reconstruction artifacts sit next to the truth; with
/// several, trial `i` writes into `trial_{i:03}/`. `report.json` describes the
/// first trial and the NRMSE spread over all of them (sample std).
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun> {
    let start = Instant::now();
    let prepared = prepare(cfg)?;
    let out = &cfg.output_dir;
    create_dir(out).stage("output")?;

    let results: Vec<RecoveryResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| recover(&prepared, &cfg.recovery, cfg.base_seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let reports: Vec<MetricsReport> = results
        .iter()
        .map(|r| evaluate(&prepared.truth, &r.x_hat))
        .collect::<Result<_>>()
        .stage("metrics")?;
    let baseline = zero_filled_baseline(&prepared.masked_y);
    let zero_filled = evaluate(&prepared.truth, &baseline).stage("metrics")?;

    write_blmd(&out.join("truth.blmd"), &prepared.truth).stage("output")?;
    write_mask(&out.join("mask.blmd"), &prepared.mask).stage("output")?;
    write_blmd(&out.join("kspace.blmd"), &prepared.masked_y).stage("output")?;
    let mut root_scales = String::new();
    if cfg.emit_images {
        write_frames(out, "truth", &prepared.truth, &mut root_scales).stage("output")?;
    }
    for (i, (res, rep)) in results.iter().zip(&reports).enumerate() {
        let dir = if cfg.trials == 1 {
            out.clone()
        } else {
            let d = out.join(format!("trial_{i:03}"));
            create_dir(&d).stage("output")?;
            d
        };
        write_blmd(&dir.join("recon.blmd"), &res.x_hat).stage("output")?;
        if cfg.emit_images {
            let mut scales = String::new();
            write_frames(&dir, "recon", &res.x_hat, &mut scales).stage("output")?;
            if cfg.trials == 1 {
                root_scales.push_str(&scales);
            } else {
                write_scales(&dir, &scales).stage("output")?;
            }
        }
        if cfg.emit_csv {
            write_frame_nrmse_csv(&dir.join("frame_nrmse.csv"), &rep.nrmse_per_frame).stage("output")?;
            write_trace_csv(
                &dir.join("trace.csv"),
                &res.objective_trace,
                &res.gamma_trace,
                &res.residual_trace,
            )
            .stage("output")?;
        }
    }
    if cfg.emit_images {
        write_scales(out, &root_scales).stage("output")?;
    }

    let nrmses: Vec<f64> = reports.iter().map(|r| r.nrmse).collect();
    let (nrmse_mean, nrmse_std) = mean_std(&nrmses);
    let report = PipelineReport {
        bilmdm: reports[0].clone(),
        zero_filled,
        acceleration_achieved: prepared.mask.acceleration(),
        trials: cfg.trials,
        nrmse_mean,
        nrmse_std,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(&report)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e)).stage("output")?;
    Ok(PipelineRun {
        report,
        prepared,
        results,
    })
}

/// Scores an existing reconstruction against the configured phantom.
pub fn rescore(cfg: &PipelineConfig, recon: &Path) -> Result<MetricsReport> {
    cfg.validate()?;
    let truth = generate_phantom(&cfg.phantom).stage("phantom")?;
    let x_hat: ImageSequence = crate::io::read_blmd(recon).stage("input")?;
    evaluate(&truth, &x_hat).stage("metrics")
}
