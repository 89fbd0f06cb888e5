//! Dynamic phantom, Cartesian and radial undersampling masks, navigators.
//!
//! Masks are designed on the centered (display) grid, where DC sits at row
//! `n_p/2` and column `n_f/2`, and stored in the DFT-native order used by
//! [`crate::transforms`]. [`centered_to_native`] and [`native_to_centered`]
//! are the only place where that shift lives.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::{CasoratiMatrix, ImageSequence, KSpaceSequence, SamplingMask, C64};

/// Golden-angle spoke increment in degrees.
pub const GOLDEN_ANGLE_DEG: f64 = 111.246117975;

/// Native index of centered position `c` on an axis of length `n`.
#[inline]
pub fn centered_to_native(c: usize, n: usize) -> usize {
    (c + n - n / 2) % n
}

/// Centered position of native index `k` on an axis of length `n`.
#[inline]
pub fn native_to_centered(k: usize, n: usize) -> usize {
    (k + n / 2) % n
}

/// Centered row positions of `nu` navigator rows.
pub fn centered_nav_rows(n_p: usize, nu: usize) -> std::ops::Range<usize> {
    let start = (n_p - nu) / 2;
    start..start + nu
}

fn native_nav_rows(n_p: usize, nu: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = centered_nav_rows(n_p, nu)
        .map(|c| centered_to_native(c, n_p))
        .collect();
    rows.sort_unstable();
    rows
}

impl SamplingMask {
    /// Navigator rows in centered coordinates, ascending.
    pub fn nav_rows_centered(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .nav_rows
            .iter()
            .map(|&r| native_to_centered(r, self.n_p))
            .collect();
        rows.sort_unstable();
        rows
    }

    /// Frame `t` of the pattern on the centered grid, `n_p × n_f`.
    pub fn centered_frame(&self, t: usize) -> Array2<bool> {
        Array2::from_shape_fn((self.n_p, self.n_f), |(rc, cc)| {
            self.is_sampled(
                centered_to_native(rc, self.n_p),
                centered_to_native(cc, self.n_f),
                t,
            )
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EllipseConfig {
    /// Center `(row, col)` as fractions of the field of view.
    pub center: [f64; 2],
    /// Resting radii `(row, col)` as fractions of the field of view.
    pub radii: [f64; 2],
    /// Sinusoidal radius excursion, fraction of the field of view.
    pub amplitude: f64,
    pub intensity: f64,
}

impl Default for EllipseConfig {
    fn default() -> Self {
        Self {
            center: [0.5, 0.5],
            radii: [0.14, 0.18],
            amplitude: 0.06,
            intensity: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub n_p: usize,
    pub n_f: usize,
    pub n_fr: usize,
    /// Frames per cycle.
    pub period: usize,
    pub background_level: f64,
    pub ellipse: EllipseConfig,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            n_p: 32,
            n_f: 32,
            n_fr: 32,
            period: 8,
            background_level: 0.5,
            ellipse: EllipseConfig::default(),
            noise_std: 0.0,
            seed: 7,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_p == 0 || self.n_f == 0 || self.n_fr == 0 {
            return Err(Error::config("phantom dimensions must be positive"));
        }
        if self.period == 0 || self.n_fr % self.period != 0 {
            return Err(Error::config(format!(
                "period {} must divide n_fr {}",
                self.period, self.n_fr
            )));
        }
        if !(0.0..=1.0).contains(&self.background_level) {
            return Err(Error::config("background_level must lie in [0, 1]"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::config("noise_std must be ≥ 0"));
        }
        let e = &self.ellipse;
        if !(e.amplitude >= 0.0) {
            return Err(Error::config("ellipse amplitude must be ≥ 0"));
        }
        if !(0.0..=1.0).contains(&e.intensity) {
            return Err(Error::config("ellipse intensity must lie in [0, 1]"));
        }
        for axis in 0..2 {
            if e.radii[axis] <= e.amplitude {
                return Err(Error::config("ellipse radii must exceed the amplitude"));
            }
            let reach = e.radii[axis] + e.amplitude;
            if e.center[axis] - reach < 0.0 || e.center[axis] + reach > 1.0 {
                return Err(Error::config(
                    "ellipse geometry exceeds the field of view",
                ));
            }
        }
        Ok(())
    }
}

/// Real-valued dynamic phantom: a static textured body plus an ellipse whose
/// radii oscillate sinusoidally with the configured period.
pub fn generate_phantom(cfg: &PhantomConfig) -> Result<ImageSequence> {
    cfg.validate()?;
    let (n_p, n_f, n_fr) = (cfg.n_p, cfg.n_f, cfg.n_fr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // static background: elliptic body with a smooth seeded texture
    let waves: Vec<(f64, f64, f64)> = {
        use rand::Rng;
        (0..4)
            .map(|_| {
                (
                    rng.gen_range(1.0..3.0),
                    rng.gen_range(1.0..3.0),
                    rng.gen_range(0.0..2.0 * PI),
                )
            })
            .collect()
    };
    let mut background = vec![0.0; n_p * n_f];
    for c in 0..n_f {
        for r in 0..n_p {
            let y = (r as f64 + 0.5) / n_p as f64;
            let x = (c as f64 + 0.5) / n_f as f64;
            let body = ((y - 0.5) / 0.46).powi(2) + ((x - 0.5) / 0.42).powi(2);
            if body <= 1.0 {
                let tex: f64 = waves
                    .iter()
                    .map(|&(ky, kx, ph)| (2.0 * PI * (ky * y + kx * x) + ph).cos())
                    .sum::<f64>()
                    / waves.len() as f64;
                background[r + n_p * c] = cfg.background_level * (0.7 + 0.3 * tex);
            }
        }
    }

    let e = &cfg.ellipse;
    let noise = if cfg.noise_std > 0.0 {
        Some(Normal::new(0.0, cfg.noise_std).map_err(|e| Error::config(e.to_string()))?)
    } else {
        None
    };
    let mut data = Vec::with_capacity(n_p * n_f * n_fr);
    for t in 0..n_fr {
        let phase = 2.0 * PI * (t % cfg.period) as f64 / cfg.period as f64;
        let swing = e.amplitude * phase.sin();
        let (ry, rx) = (e.radii[0] + swing, e.radii[1] + swing);
        for c in 0..n_f {
            for r in 0..n_p {
                let y = (r as f64 + 0.5) / n_p as f64;
                let x = (c as f64 + 0.5) / n_f as f64;
                let inside = ((y - e.center[0]) / ry).powi(2) + ((x - e.center[1]) / rx).powi(2)
                    <= 1.0;
                let mut v = if inside {
                    e.intensity
                } else {
                    background[r + n_p * c]
                };
                if let Some(n) = &noise {
                    v = (v + n.sample(&mut rng)).max(0.0);
                }
                data.push(C64::new(v, 0.0));
            }
        }
    }
    ImageSequence::new(n_p, n_f, n_fr, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Cartesian,
    Radial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    pub kind: MaskKind,
    /// Target acceleration for the Cartesian pattern.
    pub acceleration: f64,
    /// Number of centered navigator rows (ν).
    pub nav_rows: usize,
    /// Width of the Cartesian row density as a fraction of `n_p`.
    pub gaussian_std_fraction: f64,
    pub spokes_per_frame: usize,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            kind: MaskKind::Cartesian,
            acceleration: 4.0,
            nav_rows: 4,
            gaussian_std_fraction: 0.15,
            spokes_per_frame: 2,
            seed: 11,
        }
    }
}

pub fn build_mask(n_p: usize, n_f: usize, n_fr: usize, cfg: &MaskConfig) -> Result<SamplingMask> {
    match cfg.kind {
        MaskKind::Cartesian => cartesian_mask(n_p, n_f, n_fr, cfg),
        MaskKind::Radial => radial_mask(n_p, n_f, n_fr, cfg),
    }
}

fn check_nav(n_p: usize, nu: usize) -> Result<()> {
    if nu == 0 || nu > n_p {
        return Err(Error::config(format!(
            "navigator row count {nu} must lie in 1..={n_p}"
        )));
    }
    Ok(())
}

/// Whole phase-encode rows per frame: the centered navigators plus rows drawn
/// without replacement from a centered Gaussian density.
pub fn cartesian_mask(n_p: usize, n_f: usize, n_fr: usize, cfg: &MaskConfig) -> Result<SamplingMask> {
    if n_p == 0 || n_f == 0 || n_fr == 0 {
        return Err(Error::config("mask dimensions must be positive"));
    }
    check_nav(n_p, cfg.nav_rows)?;
    if !(cfg.acceleration >= 1.0) {
        return Err(Error::config("acceleration must be ≥ 1"));
    }
    if !(cfg.gaussian_std_fraction > 0.0) {
        return Err(Error::config("gaussian_std_fraction must be > 0"));
    }
    let budget = ((n_p as f64 / cfg.acceleration).ceil() as usize).min(n_p);
    if budget < cfg.nav_rows {
        return Err(Error::config(format!(
            "row budget {budget} per frame cannot hold {} navigator rows",
            cfg.nav_rows
        )));
    }

    let nav_centered: Vec<usize> = centered_nav_rows(n_p, cfg.nav_rows).collect();
    let sigma = cfg.gaussian_std_fraction * n_p as f64;
    let dc = (n_p / 2) as f64;
    let weight = |c: usize| (-((c as f64 - dc).powi(2)) / (2.0 * sigma * sigma)).exp();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pattern = vec![false; n_p * n_f * n_fr];
    for t in 0..n_fr {
        let mut chosen: Vec<usize> = nav_centered.clone();
        let mut pool: Vec<usize> = (0..n_p).filter(|c| !nav_centered.contains(c)).collect();
        while chosen.len() < budget {
            let weights: Vec<f64> = pool.iter().map(|&c| weight(c)).collect();
            let pick = match WeightedIndex::new(&weights) {
                Ok(dist) => dist.sample(&mut rng),
                // far tails underflow to zero weight; fall back to uniform
                Err(_) => {
                    use rand::Rng;
                    rng.gen_range(0..pool.len())
                }
            };
            chosen.push(pool.swap_remove(pick));
        }
        for c in chosen {
            let r = centered_to_native(c, n_p);
            for col in 0..n_f {
                pattern[r + n_p * (col + n_f * t)] = true;
            }
        }
    }
    SamplingMask::new(n_p, n_f, n_fr, pattern, native_nav_rows(n_p, cfg.nav_rows))
}

/// Gridded golden-angle spokes through DC, plus the navigator rows.
pub fn radial_mask(n_p: usize, n_f: usize, n_fr: usize, cfg: &MaskConfig) -> Result<SamplingMask> {
    if n_p == 0 || n_f == 0 || n_fr == 0 {
        return Err(Error::config("mask dimensions must be positive"));
    }
    check_nav(n_p, cfg.nav_rows)?;
    if cfg.spokes_per_frame == 0 {
        return Err(Error::config("spokes_per_frame must be ≥ 1"));
    }
    let (cy, cx) = ((n_p / 2) as f64, (n_f / 2) as f64);
    let reach = ((n_p * n_p + n_f * n_f) as f64).sqrt();
    let step = 1.0 / 16.0;
    let n_steps = (reach / step).ceil() as i64;

    let mut pattern = vec![false; n_p * n_f * n_fr];
    let mut spoke = 0usize;
    for t in 0..n_fr {
        for _ in 0..cfg.spokes_per_frame {
            let theta = (spoke as f64 * GOLDEN_ANGLE_DEG).rem_euclid(360.0).to_radians();
            spoke += 1;
            let (dy, dx) = (theta.sin(), theta.cos());
            for k in -n_steps..=n_steps {
                let s = k as f64 * step;
                let rc = (cy + s * dy).round();
                let cc = (cx + s * dx).round();
                if rc < 0.0 || cc < 0.0 || rc >= n_p as f64 || cc >= n_f as f64 {
                    continue;
                }
                let r = centered_to_native(rc as usize, n_p);
                let c = centered_to_native(cc as usize, n_f);
                pattern[r + n_p * (c + n_f * t)] = true;
            }
        }
    }
    let nav = native_nav_rows(n_p, cfg.nav_rows);
    for t in 0..n_fr {
        for &r in &nav {
            for c in 0..n_f {
                pattern[r + n_p * (c + n_f * t)] = true;
            }
        }
    }
    SamplingMask::new(n_p, n_f, n_fr, pattern, nav)
}

/// `νn_f × n_fr` navigator matrix; within a frame the `ν × n_f` slab is
/// vectorized column-major with rows in ascending native order.
pub fn extract_navigators(y: &KSpaceSequence, m: &SamplingMask) -> Result<CasoratiMatrix> {
    if y.shape() != m.shape() {
        return Err(Error::shape(format!(
            "k-space {:?} and mask {:?} differ",
            y.shape(),
            m.shape()
        )));
    }
    let nav = m.nav_rows();
    if nav.is_empty() {
        return Err(Error::config("mask has no navigator rows"));
    }
    let nu = nav.len();
    let n_f = y.n_f();
    Ok(Array2::from_shape_fn((nu * n_f, y.n_fr()), |(i, t)| {
        let (slot, col) = (i % nu, i / nu);
        y.get(nav[slot], col, t)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{apply_sampling, dft2_forward, dft_t, vectorize, Direction};

    #[test]
    fn shift_maps_are_inverse() {
        for n in [1, 2, 5, 8, 31, 32] {
            for k in 0..n {
                assert_eq!(native_to_centered(centered_to_native(k, n), n), k);
            }
            assert_eq!(centered_to_native(n / 2, n), 0);
        }
    }

    #[test]
    fn periodic_phantom() {
        let cfg = PhantomConfig::default();
        let x = generate_phantom(&cfg).unwrap();
        for t in 0..cfg.n_fr - cfg.period {
            assert_eq!(x.frame(t), x.frame(t + cfg.period));
        }
        assert!(x.data().iter().all(|z| z.im == 0.0 && z.re >= 0.0 && z.re <= 1.0));
        assert_eq!(generate_phantom(&cfg).unwrap(), x);
    }

    #[test]
    fn static_phantom_without_amplitude() {
        let mut cfg = PhantomConfig::default();
        cfg.ellipse.amplitude = 0.0;
        let x = generate_phantom(&cfg).unwrap();
        for t in 1..cfg.n_fr {
            assert_eq!(x.frame(0), x.frame(t));
        }
    }

    #[test]
    fn phantom_rejects_bad_geometry() {
        let mut cfg = PhantomConfig::default();
        cfg.ellipse.center = [0.1, 0.5];
        assert!(generate_phantom(&cfg).is_err());
        let mut cfg = PhantomConfig::default();
        cfg.period = 5;
        assert!(generate_phantom(&cfg).is_err());
    }

    #[test]
    fn rim_pixel_spectrum_lives_on_cycle_harmonics() {
        let cfg = PhantomConfig::default();
        let x = generate_phantom(&cfg).unwrap();
        let cas = vectorize(&x);
        // a pixel whose value changes over the cycle sits on the rim
        let rim = (0..x.n_k())
            .find(|&i| {
                let row = cas.row(i);
                row.iter().any(|z| (z - row[0]).norm() > 0.1)
            })
            .expect("phantom has a moving rim");
        let profile = cas.slice(ndarray::s![rim..rim + 1, ..]).to_owned();
        let spec = dft_t(&profile, Direction::Forward);
        let peak = spec.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let support: Vec<usize> = (0..cfg.n_fr)
            .filter(|&k| spec[[0, k]].norm() > 1e-9 * peak)
            .collect();
        let stride = cfg.n_fr / cfg.period;
        assert!(support.iter().all(|k| k % stride == 0), "{support:?}");
        // pairs (k, n_fr−k) fold onto the same harmonic of the cycle
        let mut harmonics: Vec<usize> = support
            .iter()
            .map(|&k| (k.min(cfg.n_fr - k)) / stride)
            .collect();
        harmonics.dedup();
        harmonics.sort_unstable();
        harmonics.dedup();
        assert!(harmonics.len() <= cfg.period / 2 + 1);
        assert!(harmonics.len() >= 2);
    }

    fn cart(acc: f64, nu: usize) -> MaskConfig {
        MaskConfig {
            acceleration: acc,
            nav_rows: nu,
            ..MaskConfig::default()
        }
    }

    #[test]
    fn cartesian_navigators_centered() {
        let m = cartesian_mask(32, 32, 8, &cart(4.0, 4)).unwrap();
        assert_eq!(m.nav_rows_centered(), vec![14, 15, 16, 17]);
        for t in 0..8 {
            let frame = m.centered_frame(t);
            for r in 14..18 {
                assert!(frame.row(r).iter().all(|&b| b));
            }
        }
    }

    #[test]
    fn cartesian_row_budget() {
        let m = cartesian_mask(32, 32, 16, &cart(4.0, 4)).unwrap();
        for t in 0..16 {
            let rows = (0..32).filter(|&r| m.is_sampled(r, 0, t)).count();
            assert_eq!(rows, 8);
            for r in 0..32 {
                let first = m.is_sampled(r, 0, t);
                assert!((0..32).all(|c| m.is_sampled(r, c, t) == first));
            }
        }
        assert!((m.acceleration() - 4.0).abs() < 1e-12);
        let full = cartesian_mask(32, 32, 4, &cart(1.0, 4)).unwrap();
        assert_eq!(full.sample_count(), 32 * 32 * 4);
        assert!(cartesian_mask(32, 32, 4, &cart(16.0, 4)).is_err());
    }

    #[test]
    fn cartesian_prefers_low_frequencies() {
        let m = cartesian_mask(64, 8, 64, &cart(4.0, 2)).unwrap();
        let mut hits = vec![0usize; 64];
        for t in 0..64 {
            let frame = m.centered_frame(t);
            for r in 0..64 {
                hits[r] += frame[[r, 0]] as usize;
            }
        }
        let center: usize = hits[24..40].iter().sum();
        let edge: usize = hits[..8].iter().chain(&hits[56..]).sum();
        assert!(center > 3 * edge, "center {center} edge {edge}");
    }

    #[test]
    fn horizontal_spoke_marks_center_row() {
        let cfg = MaskConfig {
            kind: MaskKind::Radial,
            nav_rows: 1,
            spokes_per_frame: 1,
            ..MaskConfig::default()
        };
        let m = radial_mask(9, 9, 1, &cfg).unwrap();
        let frame = m.centered_frame(0);
        for r in 0..9 {
            let marked = frame.row(r).iter().filter(|&&b| b).count();
            assert_eq!(marked, if r == 4 { 9 } else { 0 }, "row {r}");
        }
    }

    #[test]
    fn radial_is_denser_at_center() {
        for spokes in [8, 13, 24] {
            let cfg = MaskConfig {
                kind: MaskKind::Radial,
                nav_rows: 1,
                spokes_per_frame: spokes,
                ..MaskConfig::default()
            };
            let m = radial_mask(32, 32, 3, &cfg).unwrap();
            assert_eq!(m, radial_mask(32, 32, 3, &cfg).unwrap());
            let (mut c_hit, mut c_all, mut o_hit, mut o_all) = (0, 0, 0, 0);
            for t in 0..3 {
                let f = m.centered_frame(t);
                for r in 0..32 {
                    for c in 0..32 {
                        let central = (8..24).contains(&r) && (8..24).contains(&c);
                        let dy = r as f64 - 16.0;
                        let dx = c as f64 - 16.0;
                        let outer = (dy * dy + dx * dx).sqrt() >= 12.0;
                        if central {
                            c_all += 1;
                            c_hit += f[[r, c]] as usize;
                        } else if outer {
                            o_all += 1;
                            o_hit += f[[r, c]] as usize;
                        }
                    }
                }
            }
            let (fc, fo) = (c_hit as f64 / c_all as f64, o_hit as f64 / o_all as f64);
            assert!(fc >= fo, "spokes {spokes}: {fc} < {fo}");
        }
    }

    #[test]
    fn navigator_extraction() {
        let x = generate_phantom(&PhantomConfig::default()).unwrap();
        let y = dft2_forward(&x);
        let m = cartesian_mask(32, 32, 32, &cart(4.0, 4)).unwrap();
        let nav = extract_navigators(&y, &m).unwrap();
        assert_eq!(nav.dim(), (4 * 32, 32));
        let ys = apply_sampling(&y, &m).unwrap();
        let rows = m.nav_rows();
        for t in 0..32 {
            for c in 0..32 {
                for (slot, &r) in rows.iter().enumerate() {
                    assert_eq!(nav[[slot + 4 * c, t]], ys.get(r, c, t));
                }
            }
        }
        let full = SamplingMask::full(32, 32, 32);
        assert_eq!(extract_navigators(&y, &full).unwrap(), vectorize(&y));
        let empty = SamplingMask::empty(32, 32, 32);
        assert!(extract_navigators(&y, &empty).is_err());
    }
}
