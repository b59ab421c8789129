//! Transforms between coefficient boxes and physical samples.
//!
//! Physical samples sit at `x_j = 2π j / n` on each axis. The 3-D transform
//! is done axis by axis with pruning: lines that are identically zero on the
//! way to physical space (or discarded on the way back) are skipped.

use super::{FourierField, SpectralGrid};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Real samples of a field on an `n³` grid (row-major, last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    n: usize,
    data: Vec<f64>,
}

impl PhysicalField {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                n * n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn([f64; 3]) -> f64) -> Self {
        let h = std::f64::consts::TAU / n as f64;
        let mut data = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    data.push(f([i as f64 * h, j as f64 * h, k as f64 * h]));
                }
            }
        }
        Self { n, data }
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Mean of `|u|^p` over the grid, i.e. `‖u‖^p_{L^p}` under the unit-mass measure.
    pub fn mean_abs_pow(&self, p: f64) -> f64 {
        let sum: f64 = if p == 2.0 {
            self.data.iter().map(|v| v * v).sum()
        } else if p == 4.0 {
            self.data.iter().map(|v| (v * v) * (v * v)).sum()
        } else {
            self.data.iter().map(|v| v.abs().powf(p)).sum()
        };
        sum / self.data.len() as f64
    }

    /// `‖u‖_{L^p}`; `p = ∞` returns the maximum modulus over the grid.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            self.max_abs()
        } else {
            self.mean_abs_pow(p).powf(1.0 / p)
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(mut self, f: impl Fn(f64) -> f64) -> Self {
        for v in &mut self.data {
            *v = f(*v);
        }
        self
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        }
    }
}

#[inline]
fn wrap(c: i32, n: usize) -> usize {
    c.rem_euclid(n as i32) as usize
}

/// Wrapped grid indices of the frequencies `-band..=band` along one axis.
fn band_indices(band: usize, n: usize) -> Vec<usize> {
    let b = band as i32;
    (-b..=b).map(|c| wrap(c, n)).collect()
}

/// Axis-by-axis 3-D FFT. `order` lists axes in processing order; `keep`
/// restricts which leading-axis slices need work at each stage.
struct Fft3 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    plane: Vec<Complex64>,
}

impl Fft3 {
    fn new(n: usize, inverse: bool) -> Self {
        let fft = plan(n, inverse);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Self {
            n,
            fft,
            scratch,
            plane: vec![Complex64::default(); n * n],
        }
    }

    /// Transform along the last (contiguous) axis for the given (x, y) lines.
    fn along_z(&mut self, data: &mut [Complex64], xs: &[usize], ys: &[usize]) {
        let n = self.n;
        for &x in xs {
            for &y in ys {
                let start = (x * n + y) * n;
                self.fft
                    .process_with_scratch(&mut data[start..start + n], &mut self.scratch);
            }
        }
    }

    /// Transform along y for every z, restricted to the x-slices in `xs`.
    fn along_y(&mut self, data: &mut [Complex64], xs: &[usize]) {
        let n = self.n;
        for &x in xs {
            let base = x * n * n;
            for y in 0..n {
                for z in 0..n {
                    self.plane[z * n + y] = data[base + y * n + z];
                }
            }
            self.fft.process_with_scratch(&mut self.plane, &mut self.scratch);
            for y in 0..n {
                for z in 0..n {
                    data[base + y * n + z] = self.plane[z * n + y];
                }
            }
        }
    }

    /// Transform along x for every z, restricted to the y-slices in `ys`.
    fn along_x(&mut self, data: &mut [Complex64], ys: &[usize]) {
        let n = self.n;
        for &y in ys {
            for x in 0..n {
                let row = (x * n + y) * n;
                for z in 0..n {
                    self.plane[z * n + x] = data[row + z];
                }
            }
            self.fft.process_with_scratch(&mut self.plane, &mut self.scratch);
            for x in 0..n {
                let row = (x * n + y) * n;
                for z in 0..n {
                    data[row + z] = self.plane[z * n + x];
                }
            }
        }
    }
}

/// Scatters (possibly non-Hermitian) band coefficients and synthesizes `Σ c(k) e^{ik·x}`.
pub(crate) fn synthesize(grid: SpectralGrid, coeffs: &[Complex64], n: usize) -> Vec<Complex64> {
    let kmax = grid.kmax() as i32;
    let mut buf = vec![Complex64::default(); n * n * n];
    let mut idx = 0;
    for x in -kmax..=kmax {
        let wx = wrap(x, n);
        for y in -kmax..=kmax {
            let wy = wrap(y, n);
            let row = (wx * n + wy) * n;
            for z in -kmax..=kmax {
                buf[row + wrap(z, n)] = coeffs[idx];
                idx += 1;
            }
        }
    }
    let band = band_indices(grid.kmax(), n);
    let all: Vec<usize> = (0..n).collect();
    let mut f = Fft3::new(n, true);
    f.along_z(&mut buf, &band, &band);
    f.along_y(&mut buf, &band);
    f.along_x(&mut buf, &all);
    buf
}

/// Analyzes complex samples and returns the band coefficients (not symmetrized).
pub(crate) fn analyze(mut buf: Vec<Complex64>, n: usize, grid: SpectralGrid) -> Vec<Complex64> {
    let band = band_indices(grid.kmax(), n);
    let all: Vec<usize> = (0..n).collect();
    let mut f = Fft3::new(n, false);
    f.along_x(&mut buf, &all);
    f.along_y(&mut buf, &band);
    f.along_z(&mut buf, &band, &band);
    let scale = 1.0 / (n * n * n) as f64;
    let kmax = grid.kmax() as i32;
    let mut out = Vec::with_capacity(grid.len());
    for x in -kmax..=kmax {
        let wx = wrap(x, n);
        for y in -kmax..=kmax {
            let row = (wx * n + wrap(y, n)) * n;
            for z in -kmax..=kmax {
                out.push(buf[row + wrap(z, n)] * scale);
            }
        }
    }
    out
}

fn check_resolution(grid: SpectralGrid, n: usize) -> Result<()> {
    if n < grid.side() {
        return Err(Error::BelowNyquist {
            resolution: n,
            required: grid.side(),
            kmax: grid.kmax(),
        });
    }
    Ok(())
}

/// Samples `u(x) = Σ_k û(k) e^{ik·x}` on an `n³` grid, `n >= 2·kmax + 1`.
pub fn to_physical(field: &FourierField, n: usize) -> Result<PhysicalField> {
    check_resolution(field.grid(), n)?;
    let buf = synthesize(field.grid(), field.coeffs(), n);
    Ok(PhysicalField {
        n,
        data: buf.into_iter().map(|c| c.re).collect(),
    })
}

/// Projects physical samples onto the band of `grid`, re-enforcing Hermitian symmetry.
pub fn to_spectral(phys: &PhysicalField, grid: SpectralGrid) -> Result<FourierField> {
    check_resolution(grid, phys.n)?;
    let buf = phys.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let coeffs = analyze(buf, phys.n, grid);
    let mut f = FourierField::from_raw(grid, coeffs);
    f.enforce_hermitian();
    Ok(f)
}

/// Physical samples of two real fields from a single complex transform.
pub(crate) fn to_physical_pair(
    a: &FourierField,
    b: &FourierField,
    n: usize,
) -> Result<(PhysicalField, PhysicalField)> {
    assert_eq!(a.grid(), b.grid());
    check_resolution(a.grid(), n)?;
    let packed: Vec<Complex64> = a
        .coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(&x, &y)| x + Complex64::i() * y)
        .collect();
    let buf = synthesize(a.grid(), &packed, n);
    let (re, im) = buf.into_iter().map(|c| (c.re, c.im)).unzip();
    Ok((PhysicalField { n, data: re }, PhysicalField { n, data: im }))
}

/// Spectral projection of two real sample sets from a single complex transform.
pub(crate) fn to_spectral_pair(
    a: &PhysicalField,
    b: &PhysicalField,
    grid: SpectralGrid,
) -> Result<(FourierField, FourierField)> {
    assert_eq!(a.n, b.n);
    check_resolution(grid, a.n)?;
    let buf = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| Complex64::new(x, y))
        .collect();
    let packed = analyze(buf, a.n, grid);
    let len = packed.len();
    let mut ca = Vec::with_capacity(len);
    let mut cb = Vec::with_capacity(len);
    for i in 0..len {
        let p = packed[i];
        let q = packed[len - 1 - i].conj();
        ca.push((p + q) * 0.5);
        cb.push((p - q) * Complex64::new(0.0, -0.5));
    }
    let mut fa = FourierField::from_raw(grid, ca);
    let mut fb = FourierField::from_raw(grid, cb);
    fa.enforce_hermitian();
    fb.enforce_hermitian();
    Ok((fa, fb))
}

/// Band-limited coefficients of `u³`, computed alias-free on the padded grid.
pub fn cubic_power(field: &FourierField) -> FourierField {
    cubic_power_with_quartic(field).0
}

/// `u³` together with `∫ u⁴` (exact on the padded grid).
pub(crate) fn cubic_power_with_quartic(field: &FourierField) -> (FourierField, f64) {
    let grid = field.grid();
    let mut phys = to_physical(field, grid.n_phys()).expect("padded grid resolves its band");
    let mut quartic = 0.0;
    for v in phys.data_mut() {
        let u = *v;
        let u3 = u * u * u;
        quartic += u3 * u;
        *v = u3;
    }
    quartic /= phys.data.len() as f64;
    let out = to_spectral(&phys, grid).expect("padded grid resolves its band");
    (out, quartic)
}

/// Band-limited coefficients of `w · f` for a physical weight `w`.
///
/// Alias-free when `w` has band at most `2·kmax` (e.g. `w = u²`).
pub fn multiply_physical(weight: &PhysicalField, field: &FourierField) -> Result<FourierField> {
    let grid = field.grid();
    let mut phys = to_physical(field, weight.n)?;
    for (v, w) in phys.data.iter_mut().zip(&weight.data) {
        *v *= w;
    }
    to_spectral(&phys, grid)
}
