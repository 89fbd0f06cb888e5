//! Fourier operators, the sampling operator and the Casorati vectorization.
//!
//! Conventions used by every gradient in the crate:
//!
//! * the forward 2-D DFT is the plain double sum with kernel `exp(-2πi·/N)`,
//!   the inverse carries `1/(n_p·n_f)`, hence `F* = N_k·F⁻¹`;
//! * the temporal DFT acts on rows of a Casorati matrix with the same
//!   normalization, hence `F_t* = N_fr·F_t⁻¹`;
//! * DC sits at index 0 on every axis. Centering for display or for mask
//!   design is handled by the index maps in [`crate::sampling`].
//!
//! Cubes are stored frame-major and column-major within a frame, so frame `t`
//! occupies `data[t·N_k .. (t+1)·N_k]` and is already `Vec` of that frame.

use std::fmt;
use std::marker::PhantomData;
use std::sync::Arc;

use ndarray::{Array2, ArrayViewMut1, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix used for every Casorati-shaped quantity.
pub type CMatrix = Array2<C64>;

/// Pixels-by-frames matrix whose column `j` is `Vec` of frame `j`.
pub type CasoratiMatrix = CMatrix;

/// Image-domain marker for [`Cube`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Image {}

/// Frequency-domain marker for [`Cube`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KSpace {}

pub type ImageSequence = Cube<Image>;
pub type KSpaceSequence = Cube<KSpace>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// An `n_p × n_f × n_fr` complex cube.
pub struct Cube<D> {
    n_p: usize,
    n_f: usize,
    n_fr: usize,
    data: Vec<C64>,
    _domain: PhantomData<D>,
}

impl<D> Clone for Cube<D> {
    fn clone(&self) -> Self {
        Self {
            n_p: self.n_p,
            n_f: self.n_f,
            n_fr: self.n_fr,
            data: self.data.clone(),
            _domain: PhantomData,
        }
    }
}

impl<D> PartialEq for Cube<D> {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.data == other.data
    }
}

impl<D> fmt::Debug for Cube<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cube")
            .field("n_p", &self.n_p)
            .field("n_f", &self.n_f)
            .field("n_fr", &self.n_fr)
            .finish_non_exhaustive()
    }
}

impl<D> Cube<D> {
    pub fn new(n_p: usize, n_f: usize, n_fr: usize, data: Vec<C64>) -> Result<Self> {
        if n_p == 0 || n_f == 0 || n_fr == 0 {
            return Err(Error::shape(format!(
                "cube dimensions must be positive, got {n_p}×{n_f}×{n_fr}"
            )));
        }
        if data.len() != n_p * n_f * n_fr {
            return Err(Error::shape(format!(
                "cube {n_p}×{n_f}×{n_fr} needs {} entries, got {}",
                n_p * n_f * n_fr,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("cube contains non-finite entries".into()));
        }
        Ok(Self::from_raw(n_p, n_f, n_fr, data))
    }

    pub fn zeros(n_p: usize, n_f: usize, n_fr: usize) -> Self {
        Self::from_raw(n_p, n_f, n_fr, vec![C64::new(0.0, 0.0); n_p * n_f * n_fr])
    }

    pub(crate) fn from_raw(n_p: usize, n_f: usize, n_fr: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), n_p * n_f * n_fr);
        Self {
            n_p,
            n_f,
            n_fr,
            data,
            _domain: PhantomData,
        }
    }

    /// Reinterprets the cube in another domain without touching the data.
    pub(crate) fn retag<E>(self) -> Cube<E> {
        Cube::from_raw(self.n_p, self.n_f, self.n_fr, self.data)
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn n_fr(&self) -> usize {
        self.n_fr
    }

    /// Pixels per frame.
    pub fn n_k(&self) -> usize {
        self.n_p * self.n_f
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_p, self.n_f, self.n_fr)
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, frame: usize) -> usize {
        row + self.n_p * (col + self.n_f * frame)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, frame: usize) -> C64 {
        self.data[self.index(row, col, frame)]
    }

    pub fn frame(&self, t: usize) -> &[C64] {
        let nk = self.n_k();
        &self.data[t * nk..(t + 1) * nk]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [C64] {
        let nk = self.n_k();
        &mut self.data[t * nk..(t + 1) * nk]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks_exact(self.n_k())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn same_shape<E>(&self, other: &Cube<E>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "cube shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

/// Casorati form of a cube: column `j` is `Vec` of frame `j`.
pub fn vectorize<D>(cube: &Cube<D>) -> CasoratiMatrix {
    let nk = cube.n_k();
    Array2::from_shape_fn((nk, cube.n_fr()), |(i, j)| cube.data()[i + nk * j])
}

/// Inverse of [`vectorize`].
pub fn devectorize<D>(mat: &CMatrix, n_p: usize, n_f: usize) -> Result<Cube<D>> {
    let (rows, n_fr) = mat.dim();
    if rows != n_p * n_f {
        return Err(Error::shape(format!(
            "Casorati matrix has {rows} rows, expected {n_p}·{n_f} = {}",
            n_p * n_f
        )));
    }
    if n_fr == 0 || rows == 0 {
        return Err(Error::shape("empty Casorati matrix"));
    }
    let mut data = Vec::with_capacity(rows * n_fr);
    for col in mat.axis_iter(Axis(1)) {
        data.extend(col.iter().copied());
    }
    Ok(Cube::from_raw(n_p, n_f, n_fr, data))
}

/// Precomputed 2-D FFT plans for `n_p × n_f` frames.
#[derive(Clone)]
pub struct Dft2Plan {
    n_p: usize,
    n_f: usize,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
}

impl Dft2Plan {
    pub fn new(n_p: usize, n_f: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_p,
            n_f,
            col_fwd: planner.plan_fft_forward(n_p),
            col_inv: planner.plan_fft_inverse(n_p),
            row_fwd: planner.plan_fft_forward(n_f),
            row_inv: planner.plan_fft_inverse(n_f),
        }
    }

    pub fn n_k(&self) -> usize {
        self.n_p * self.n_f
    }

    /// Transforms every frame of a frame-major buffer in place.
    pub fn process_frames(&self, buf: &mut [C64], dir: Direction) {
        let nk = self.n_k();
        assert_eq!(buf.len() % nk, 0, "buffer is not a whole number of frames");
        let (col, row) = match dir {
            Direction::Forward => (&self.col_fwd, &self.row_fwd),
            Direction::Inverse => (&self.col_inv, &self.row_inv),
        };
        let mut transposed = vec![C64::new(0.0, 0.0); nk];
        for frame in buf.chunks_exact_mut(nk) {
            // along the phase-encode axis: columns are contiguous
            col.process(frame);
            for c in 0..self.n_f {
                for r in 0..self.n_p {
                    transposed[c + self.n_f * r] = frame[r + self.n_p * c];
                }
            }
            row.process(&mut transposed);
            for r in 0..self.n_p {
                for c in 0..self.n_f {
                    frame[r + self.n_p * c] = transposed[c + self.n_f * r];
                }
            }
        }
        if dir == Direction::Inverse {
            let scale = 1.0 / nk as f64;
            buf.iter_mut().for_each(|z| *z *= scale);
        }
    }

    /// Column-wise 2-D DFT of a Casorati matrix.
    pub fn apply(&self, mat: &CMatrix, dir: Direction) -> CMatrix {
        assert_eq!(mat.nrows(), self.n_k(), "Casorati rows must equal n_p·n_f");
        let mut out = mat.clone();
        let mut buf = vec![C64::new(0.0, 0.0); self.n_k()];
        for mut col in out.axis_iter_mut(Axis(1)) {
            buf.iter_mut().zip(col.iter()).for_each(|(b, z)| *b = *z);
            self.process_frames(&mut buf, dir);
            col.iter_mut().zip(buf.iter()).for_each(|(z, b)| *z = *b);
        }
        out
    }
}

/// Precomputed 1-D FFT plans along the temporal axis.
#[derive(Clone)]
pub struct DftTPlan {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl DftTPlan {
    pub fn new(n_fr: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n: n_fr,
            fwd: planner.plan_fft_forward(n_fr),
            inv: planner.plan_fft_inverse(n_fr),
        }
    }

    /// Row-wise temporal DFT of a Casorati matrix.
    pub fn apply(&self, mat: &CMatrix, dir: Direction) -> CMatrix {
        assert_eq!(mat.ncols(), self.n, "Casorati columns must equal n_fr");
        let mut out = mat.clone();
        let mut buf = vec![C64::new(0.0, 0.0); self.n];
        let scale = match dir {
            Direction::Forward => 1.0,
            Direction::Inverse => 1.0 / self.n as f64,
        };
        for mut row in out.axis_iter_mut(Axis(0)) {
            buf.iter_mut().zip(row.iter()).for_each(|(b, z)| *b = *z);
            match dir {
                Direction::Forward => self.fwd.process(&mut buf),
                Direction::Inverse => self.inv.process(&mut buf),
            }
            write_scaled(row.view_mut(), &buf, scale);
        }
        out
    }
}

fn write_scaled(mut dst: ArrayViewMut1<C64>, src: &[C64], scale: f64) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d = *s * scale);
}

/// Forward 2-D DFT of every frame.
pub fn dft2_forward(seq: &ImageSequence) -> KSpaceSequence {
    let plan = Dft2Plan::new(seq.n_p(), seq.n_f());
    let mut out = seq.clone();
    plan.process_frames(out.data_mut(), Direction::Forward);
    out.retag()
}

/// Inverse 2-D DFT of every frame, including the `1/N_k` factor.
pub fn dft2_inverse(seq: &KSpaceSequence) -> ImageSequence {
    let plan = Dft2Plan::new(seq.n_p(), seq.n_f());
    let mut out = seq.clone();
    plan.process_frames(out.data_mut(), Direction::Inverse);
    out.retag()
}

/// Row-wise temporal DFT of a Casorati matrix.
pub fn dft_t(mat: &CMatrix, dir: Direction) -> CMatrix {
    DftTPlan::new(mat.ncols()).apply(mat, dir)
}

/// Binary sampling pattern with its always-acquired navigator rows.
///
/// `pattern` uses the cube layout and the DFT-native frequency order (DC at
/// row 0). `nav_rows` are native row indices in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    pub(crate) n_p: usize,
    pub(crate) n_f: usize,
    pub(crate) n_fr: usize,
    pub(crate) pattern: Vec<bool>,
    pub(crate) nav_rows: Vec<usize>,
}

impl SamplingMask {
    pub fn new(
        n_p: usize,
        n_f: usize,
        n_fr: usize,
        pattern: Vec<bool>,
        mut nav_rows: Vec<usize>,
    ) -> Result<Self> {
        if n_p == 0 || n_f == 0 || n_fr == 0 {
            return Err(Error::shape("mask dimensions must be positive"));
        }
        if pattern.len() != n_p * n_f * n_fr {
            return Err(Error::shape(format!(
                "mask pattern has {} entries, expected {}",
                pattern.len(),
                n_p * n_f * n_fr
            )));
        }
        nav_rows.sort_unstable();
        nav_rows.dedup();
        if let Some(&r) = nav_rows.iter().find(|&&r| r >= n_p) {
            return Err(Error::shape(format!("navigator row {r} outside 0..{n_p}")));
        }
        let mask = Self {
            n_p,
            n_f,
            n_fr,
            pattern,
            nav_rows,
        };
        for &r in &mask.nav_rows {
            for t in 0..n_fr {
                if (0..n_f).any(|c| !mask.pattern[mask.index(r, c, t)]) {
                    return Err(Error::config(format!(
                        "navigator row {r} is not fully sampled in frame {t}"
                    )));
                }
            }
        }
        Ok(mask)
    }

    pub fn full(n_p: usize, n_f: usize, n_fr: usize) -> Self {
        Self {
            n_p,
            n_f,
            n_fr,
            pattern: vec![true; n_p * n_f * n_fr],
            nav_rows: (0..n_p).collect(),
        }
    }

    /// A mask that observes nothing. It has no navigator rows.
    pub fn empty(n_p: usize, n_f: usize, n_fr: usize) -> Self {
        Self {
            n_p,
            n_f,
            n_fr,
            pattern: vec![false; n_p * n_f * n_fr],
            nav_rows: Vec::new(),
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_p, self.n_f, self.n_fr)
    }

    pub fn pattern(&self) -> &[bool] {
        &self.pattern
    }

    pub fn nav_rows(&self) -> &[usize] {
        &self.nav_rows
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, frame: usize) -> usize {
        row + self.n_p * (col + self.n_f * frame)
    }

    #[inline]
    pub fn is_sampled(&self, row: usize, col: usize, frame: usize) -> bool {
        self.pattern[self.index(row, col, frame)]
    }

    pub fn sample_count(&self) -> usize {
        self.pattern.iter().filter(|&&b| b).count()
    }

    /// Total voxel count over acquired samples; infinite for an empty mask.
    pub fn acceleration(&self) -> f64 {
        self.pattern.len() as f64 / self.sample_count() as f64
    }

    /// Apply the mask to a Casorati-shaped matrix (`N_k × N_fr`).
    pub fn apply_casorati(&self, mat: &mut CMatrix) {
        assert_eq!(mat.dim(), (self.n_p * self.n_f, self.n_fr));
        let nk = self.n_p * self.n_f;
        for (j, mut col) in mat.axis_iter_mut(Axis(1)).enumerate() {
            let frame = &self.pattern[j * nk..(j + 1) * nk];
            col.iter_mut().zip(frame).for_each(|(z, &keep)| {
                if !keep {
                    *z = C64::new(0.0, 0.0);
                }
            });
        }
    }
}

/// Zeroes every k-space entry the mask does not observe.
pub fn apply_sampling(y: &KSpaceSequence, m: &SamplingMask) -> Result<KSpaceSequence> {
    if y.shape() != m.shape() {
        return Err(Error::shape(format!(
            "k-space {:?} and mask {:?} differ",
            y.shape(),
            m.shape()
        )));
    }
    let data = y
        .data()
        .iter()
        .zip(&m.pattern)
        .map(|(&z, &keep)| if keep { z } else { C64::new(0.0, 0.0) })
        .collect();
    Ok(Cube::from_raw(y.n_p(), y.n_f(), y.n_fr(), data))
}

/// `⟨A, B⟩ = trace(Aᴴ B)`.
pub fn frobenius_inner(a: &CMatrix, b: &CMatrix) -> Result<C64> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!(
            "inner product of {:?} and {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(inner_unchecked(a, b))
}

pub(crate) fn inner_unchecked(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Conjugate transpose.
pub fn adjoint(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}
