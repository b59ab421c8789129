use super::{bracket, SpectralGrid, Wavevector};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// How externally supplied coefficients are interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CoefficientConvention {
    /// General complex coefficients; Hermitian symmetry makes the field real.
    #[default]
    Complex,
    /// Real-valued Fourier coefficients only (imaginary parts are dropped).
    RealOnly,
}

/// A real scalar field on T³ stored as Hermitian-symmetric Fourier coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField {
    grid: SpectralGrid,
    coeffs: Vec<Complex64>,
}

impl FourierField {
    pub fn zeros(grid: SpectralGrid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// The constant field `u ≡ c`.
    pub fn constant(grid: SpectralGrid, c: f64) -> Self {
        let mut f = Self::zeros(grid);
        let i0 = grid.index_unchecked([0, 0, 0]);
        f.coeffs[i0] = Complex64::new(c, 0.0);
        f
    }

    /// Field with coefficient `c` at `k` and `conj(c)` at `-k`.
    pub fn single_mode(grid: SpectralGrid, k: Wavevector, c: Complex64) -> Result<Self> {
        let idx = grid
            .index(k)
            .ok_or_else(|| Error::InvalidArgument(format!("mode {k:?} outside the resolved band")))?;
        let mut f = Self::zeros(grid);
        if k == [0, 0, 0] {
            f.coeffs[idx] = Complex64::new(c.re, 0.0);
        } else {
            f.coeffs[idx] = c;
            f.coeffs[grid.mirror_index(idx)] = c.conj();
        }
        Ok(f)
    }

    /// Builds a field from a coefficient rule; the result is symmetrized.
    pub fn from_fn(grid: SpectralGrid, mut rule: impl FnMut(Wavevector) -> Complex64) -> Self {
        let coeffs = (0..grid.len()).map(|i| rule(grid.wavevector(i))).collect();
        let mut f = Self { grid, coeffs };
        f.enforce_hermitian();
        f
    }

    pub fn from_coeffs(
        grid: SpectralGrid,
        mut coeffs: Vec<Complex64>,
        convention: CoefficientConvention,
    ) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} coefficients for kmax = {}, got {}",
                grid.len(),
                grid.kmax(),
                coeffs.len()
            )));
        }
        if convention == CoefficientConvention::RealOnly {
            for c in &mut coeffs {
                c.im = 0.0;
            }
        }
        let mut f = Self { grid, coeffs };
        f.enforce_hermitian();
        Ok(f)
    }

    /// Wraps coefficients that are already Hermitian (crate-internal fast path).
    pub(crate) fn from_raw(grid: SpectralGrid, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> SpectralGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient at `k`; zero outside the stored box.
    pub fn coeff(&self, k: Wavevector) -> Complex64 {
        self.grid.index(k).map(|i| self.coeffs[i]).unwrap_or_default()
    }

    /// Sets `coeff(k) = c` and `coeff(-k) = conj(c)`.
    pub fn set_mode(&mut self, k: Wavevector, c: Complex64) -> Result<()> {
        let idx = self
            .grid
            .index(k)
            .ok_or_else(|| Error::InvalidArgument(format!("mode {k:?} outside the resolved band")))?;
        if k == [0, 0, 0] {
            self.coeffs[idx] = Complex64::new(c.re, 0.0);
        } else {
            self.coeffs[idx] = c;
            let m = self.grid.mirror_index(idx);
            self.coeffs[m] = c.conj();
        }
        Ok(())
    }

    /// Replaces each pair `(c(k), c(-k))` by its Hermitian average.
    ///
    /// The averaged pair is conjugate coefficient-exactly in IEEE arithmetic.
    pub fn enforce_hermitian(&mut self) {
        let len = self.coeffs.len();
        let center = len / 2;
        for i in 0..center {
            let j = len - 1 - i;
            let a = self.coeffs[i];
            let b = self.coeffs[j];
            let avg = Complex64::new(0.5 * (a.re + b.re), 0.5 * (a.im - b.im));
            self.coeffs[i] = avg;
            self.coeffs[j] = avg.conj();
        }
        self.coeffs[center].im = 0.0;
    }

    pub fn is_hermitian(&self) -> bool {
        let len = self.coeffs.len();
        let center = len / 2;
        self.coeffs[center].im == 0.0
            && (0..center).all(|i| self.coeffs[i] == self.coeffs[len - 1 - i].conj())
    }

    /// Copy with the imaginary parts of all coefficients dropped.
    pub fn real_coefficients(&self) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| Complex64::new(c.re, 0.0)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Applies a real radial-or-not Fourier multiplier `m(k)`.
    ///
    /// A multiplier that is even in `k` preserves Hermitian symmetry exactly.
    pub fn apply_multiplier(&self, mut m: impl FnMut(Wavevector) -> f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * m(self.grid.wavevector(i)))
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    /// `(Σ_k ⟨k⟩^{2s} |û(k)|²)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.sobolev_norm_sq(s).sqrt()
    }

    pub fn sobolev_norm_sq(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .map(|(i, c)| weight(self.grid.wavevector(i), s) * c.norm_sqr())
            .fold(0.0, |acc, x| acc + x)
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.norm_sqr())
            .fold(0.0, |acc, x| acc + x)
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|&a| a * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b * c)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Self {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    /// Re-expresses the field on another grid, dropping modes outside the new box.
    pub fn resample(&self, grid: SpectralGrid) -> Self {
        if grid.kmax() == self.grid.kmax() {
            return Self {
                grid,
                coeffs: self.coeffs.clone(),
            };
        }
        let mut out = Self::zeros(grid);
        let m = grid.kmax().min(self.grid.kmax()) as i32;
        for x in -m..=m {
            for y in -m..=m {
                for z in -m..=m {
                    let k = [x, y, z];
                    out.coeffs[grid.index_unchecked(k)] = self.coeffs[self.grid.index_unchecked(k)];
                }
            }
        }
        out
    }

    /// Indices and wavevectors of the nonzero coefficients.
    pub fn support(&self) -> Vec<(Wavevector, Complex64)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .map(|(i, &c)| (self.grid.wavevector(i), c))
            .collect()
    }
}

/// Sobolev weight `⟨k⟩^{2s}`.
pub(crate) fn weight(k: Wavevector, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    let b2 = 1.0 + super::norm_sq(k) as f64;
    b2.powf(s)
}

/// A point `(u₀, u₁)` of the phase space `H^{1/2} × H^{-1/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub pos: FourierField,
    pub vel: FourierField,
}

impl PhasePoint {
    pub fn new(pos: FourierField, vel: FourierField) -> Result<Self> {
        if pos.grid() != vel.grid() {
            return Err(Error::GridMismatch(
                "position and velocity must share a grid".into(),
            ));
        }
        Ok(Self { pos, vel })
    }

    pub fn zeros(grid: SpectralGrid) -> Self {
        Self {
            pos: FourierField::zeros(grid),
            vel: FourierField::zeros(grid),
        }
    }

    pub fn grid(&self) -> SpectralGrid {
        self.pos.grid()
    }

    /// `(‖u₀‖²_{H^s} + ‖u₁‖²_{H^{s-1}})^{1/2}`.
    pub fn pair_norm(&self, s: f64) -> f64 {
        (self.pos.sobolev_norm_sq(s) + self.vel.sobolev_norm_sq(s - 1.0)).sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            pos: self.pos.add(&other.pos),
            vel: self.vel.add(&other.vel),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            pos: self.pos.sub(&other.pos),
            vel: self.vel.sub(&other.vel),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            pos: self.pos.scale(c),
            vel: self.vel.scale(c),
        }
    }

    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        Self {
            pos: self.pos.axpy(c, &other.pos),
            vel: self.vel.axpy(c, &other.vel),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.pos.is_zero() && self.vel.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.pos.is_finite() && self.vel.is_finite()
    }

    pub fn is_hermitian(&self) -> bool {
        self.pos.is_hermitian() && self.vel.is_hermitian()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.pos
            .max_abs_diff(&other.pos)
            .max(self.vel.max_abs_diff(&other.vel))
    }

    pub fn apply_multiplier(&self, mut m: impl FnMut(Wavevector) -> f64) -> Self {
        Self {
            pos: self.pos.apply_multiplier(&mut m),
            vel: self.vel.apply_multiplier(&mut m),
        }
    }

    pub fn resample(&self, grid: SpectralGrid) -> Self {
        Self {
            pos: self.pos.resample(grid),
            vel: self.vel.resample(grid),
        }
    }

    /// Frequency of mode `k` under the free flow.
    pub fn frequency(k: Wavevector) -> f64 {
        bracket(k)
    }
}
