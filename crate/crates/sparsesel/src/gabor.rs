//! Gabor magnitude features on a fixed 64x64 face geometry.
//!
//! The bank holds 32 complex kernels: 8 orientations (`pi mu / 8`) times 4
//! scales (`nu` in {-1, 0, 1, 2}) of the DC-compensated kernel
//!
//! ```text
//! psi(z) = (k^2 / sigma^2) exp(-k^2 |z|^2 / (2 sigma^2)) [exp(i k.z) - exp(-sigma^2/2)]
//! ```
//!
//! with `sigma = 2 pi`, wavenumber `k = kmax / f^nu`, `kmax = pi/2`,
//! `f = sqrt(2)`. The subtraction term cancels the kernel's DC response, so
//! constant image regions map to (near) zero magnitude.
//!
//! Feature extraction convolves (plain convolution, zero padding) and keeps
//! magnitudes on a 4x4-strided lattice: 16x16 positions per kernel, 8192
//! values per image, a 16x reduction of the 131,072 full responses.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};

pub const IMAGE_SIZE: usize = 64;
/// Total down-sampling factor; 4x4 lattice stride.
pub const DOWNSAMPLE: u32 = 16;
pub const STRIDE: usize = 4;
/// Lattice points per image side.
pub const GRID: usize = IMAGE_SIZE / STRIDE;
pub const ORIENTATIONS: usize = 8;
pub const SCALES: [i32; 4] = [-1, 0, 1, 2];
pub const KERNEL_COUNT: usize = ORIENTATIONS * SCALES.len();
/// Length of one image's down-sampled feature vector.
pub const FEATURE_LEN: usize = KERNEL_COUNT * GRID * GRID;
/// Magnitude count before down-sampling.
pub const FULL_RESPONSE_COUNT: usize = KERNEL_COUNT * IMAGE_SIZE * IMAGE_SIZE;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborKernelSpec {
    /// Orientation index, 0..8.
    pub mu: usize,
    /// Scale index in {-1, 0, 1, 2}.
    pub nu: i32,
    pub sigma: f64,
    pub kmax: f64,
    pub f: f64,
}

impl GaborKernelSpec {
    /// The bank's standard parameterization.
    pub fn standard(mu: usize, nu: i32) -> Self {
        assert!(mu < ORIENTATIONS, "orientation index {mu} out of range");
        assert!(SCALES.contains(&nu), "scale index {nu} out of range");
        GaborKernelSpec {
            mu,
            nu,
            sigma: std::f64::consts::TAU,
            kmax: std::f64::consts::FRAC_PI_2,
            f: std::f64::consts::SQRT_2,
        }
    }

    /// `k = kmax / f^nu`.
    pub fn wavenumber(&self) -> f64 {
        self.kmax / self.f.powi(self.nu)
    }

    /// `phi = pi mu / 8`.
    pub fn orientation(&self) -> f64 {
        std::f64::consts::PI * self.mu as f64 / ORIENTATIONS as f64
    }

    /// Truncated kernel width: three Gaussian spans `sigma / k` on each side
    /// of the center, rounded up to whole pixels. Odd by construction; the
    /// standard scales give 19, 25, 35, 49. The small slack keeps exact
    /// integer spans (12 and 24 here) from ceiling up on float noise.
    pub fn width(&self) -> usize {
        let half = (3.0 * self.sigma / self.wavenumber() - 1e-9).ceil() as usize;
        2 * half + 1
    }
}

/// One complex kernel, stored as separate real and imaginary planes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborKernel {
    pub spec: GaborKernelSpec,
    pub re: Array2<f64>,
    pub im: Array2<f64>,
}

impl GaborKernel {
    pub fn width(&self) -> usize {
        self.re.nrows()
    }

    pub fn half_width(&self) -> usize {
        (self.width() - 1) / 2
    }

    /// Complex sum of all entries (the DC response).
    pub fn dc_sum(&self) -> (f64, f64) {
        (self.re.sum(), self.im.sum())
    }

    /// Sum of entry magnitudes.
    pub fn abs_sum(&self) -> f64 {
        self.re
            .iter()
            .zip(self.im.iter())
            .map(|(r, i)| (r * r + i * i).sqrt())
            .sum()
    }

    pub fn magnitude(&self) -> Array2<f64> {
        let mut out = Array2::zeros(self.re.raw_dim());
        ndarray::Zip::from(&mut out)
            .and(&self.re)
            .and(&self.im)
            .for_each(|o, r, i| *o = (r * r + i * i).sqrt());
        out
    }
}

/// Evaluates the kernel on its truncated grid. Grid index `(row, col)` maps
/// to the offset `z = (zx, zy) = (col - half, row - half)` from the center;
/// the phase is the planar dot product `k (cos phi, sin phi) . (zx, zy)`.
pub fn make_kernel(spec: &GaborKernelSpec) -> GaborKernel {
    let w = spec.width();
    let half = (w - 1) as isize / 2;
    let k = spec.wavenumber();
    let phi = spec.orientation();
    let (sin_phi, cos_phi) = phi.sin_cos();
    let coef = k * k / (spec.sigma * spec.sigma);
    let env_scale = -k * k / (2.0 * spec.sigma * spec.sigma);
    let dc = (-spec.sigma * spec.sigma / 2.0).exp();
    let mut re = Array2::zeros((w, w));
    let mut im = Array2::zeros((w, w));
    for row in 0..w {
        let zy = (row as isize - half) as f64;
        for col in 0..w {
            let zx = (col as isize - half) as f64;
            let env = coef * (env_scale * (zx * zx + zy * zy)).exp();
            let phase = k * (cos_phi * zx + sin_phi * zy);
            let (s, c) = phase.sin_cos();
            re[[row, col]] = env * (c - dc);
            im[[row, col]] = env * s;
        }
    }
    GaborKernel { spec: *spec, re, im }
}

/// The 32-kernel bank in scale-major order: all 8 orientations of scale -1,
/// then of scale 0, 1, 2.
#[derive(Debug, Clone)]
pub struct GaborBank {
    kernels: Vec<GaborKernel>,
}

impl GaborBank {
    pub fn standard() -> Self {
        let mut kernels = Vec::with_capacity(KERNEL_COUNT);
        for &nu in &SCALES {
            for mu in 0..ORIENTATIONS {
                kernels.push(make_kernel(&GaborKernelSpec::standard(mu, nu)));
            }
        }
        GaborBank { kernels }
    }

    pub fn kernels(&self) -> &[GaborKernel] {
        &self.kernels
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }
}

/// Magnitude of the plain convolution at one output pixel, zero padding
/// outside the image.
fn convolve_magnitude_at(image: &Array2<f64>, kernel: &GaborKernel, r: usize, c: usize) -> f64 {
    let (h_img, w_img) = image.dim();
    let w = kernel.width();
    let half = kernel.half_width() as isize;
    let mut acc_re = 0.0;
    let mut acc_im = 0.0;
    for kr in 0..w {
        let ir = r as isize + half - kr as isize;
        if ir < 0 || ir >= h_img as isize {
            continue;
        }
        for kc in 0..w {
            let ic = c as isize + half - kc as isize;
            if ic < 0 || ic >= w_img as isize {
                continue;
            }
            let px = image[[ir as usize, ic as usize]];
            acc_re += kernel.re[[kr, kc]] * px;
            acc_im += kernel.im[[kr, kc]] * px;
        }
    }
    (acc_re * acc_re + acc_im * acc_im).sqrt()
}

/// Full-resolution magnitude response, same size as the image.
pub fn convolve_magnitude(image: &Array2<f64>, kernel: &GaborKernel) -> Result<Array2<f64>> {
    let (h, w) = image.dim();
    if h == 0 || w == 0 {
        return Err(Error::input("cannot convolve an empty image"));
    }
    let mut out = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            out[[r, c]] = convolve_magnitude_at(image, kernel, r, c);
        }
    }
    Ok(out)
}

/// Down-sampled magnitude features of one image. `values` is ordered by
/// (kernel, lattice row, lattice col), kernels in bank order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborFeatureVector {
    pub values: Vec<f64>,
    pub downsample: u32,
}

/// Decoded coordinates of one feature index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeaturePosition {
    pub kernel: usize,
    pub scale_index: usize,
    pub orientation: usize,
    /// Pixel coordinates of the lattice point.
    pub row: usize,
    pub col: usize,
}

pub fn feature_position(index: usize) -> FeaturePosition {
    assert!(index < FEATURE_LEN, "feature index {index} out of range");
    let kernel = index / (GRID * GRID);
    let rest = index % (GRID * GRID);
    FeaturePosition {
        kernel,
        scale_index: kernel / ORIENTATIONS,
        orientation: kernel % ORIENTATIONS,
        row: rest / GRID * STRIDE,
        col: rest % GRID * STRIDE,
    }
}

/// Computes magnitudes only at the 4x4-strided lattice. The image must be
/// 64x64 and `downsample` must be 16 (the fixed pipeline geometry).
pub fn extract_features(
    image: &Array2<f64>,
    bank: &GaborBank,
    downsample: u32,
) -> Result<GaborFeatureVector> {
    if image.dim() != (IMAGE_SIZE, IMAGE_SIZE) {
        return Err(Error::shape(format!(
            "expected a {IMAGE_SIZE}x{IMAGE_SIZE} image, got {}x{}",
            image.dim().0,
            image.dim().1
        )));
    }
    if downsample != DOWNSAMPLE {
        return Err(Error::config(format!(
            "down-sampling factor is fixed at {DOWNSAMPLE}, got {downsample}"
        )));
    }
    let mut values = Vec::with_capacity(bank.len() * GRID * GRID);
    for kernel in bank.kernels() {
        for gr in 0..GRID {
            for gc in 0..GRID {
                values.push(convolve_magnitude_at(image, kernel, gr * STRIDE, gc * STRIDE));
            }
        }
    }
    Ok(GaborFeatureVector { values, downsample })
}

const GFV_MAGIC: &[u8; 4] = b"GFV1";

/// 16-byte header (magic, u32 length, u32 downsample, u32 reserved), then
/// little-endian f64 values.
pub fn write_gfv<W: Write>(mut w: W, fv: &GaborFeatureVector) -> Result<()> {
    w.write_all(GFV_MAGIC)?;
    w.write_all(&(fv.values.len() as u32).to_le_bytes())?;
    w.write_all(&fv.downsample.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for v in &fv.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_gfv<R: Read>(mut r: R) -> Result<GaborFeatureVector> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::format("GFV1 record", "truncated header"))?;
    if &header[0..4] != GFV_MAGIC {
        return Err(Error::format("GFV1 record", "bad magic"));
    }
    let len = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let downsample = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if len > 1 << 24 {
        return Err(Error::format("GFV1 record", format!("implausible length {len}")));
    }
    let mut buf = vec![0u8; len * 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format("GFV1 record", "truncated payload"))?;
    let values = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GaborFeatureVector { values, downsample })
}
