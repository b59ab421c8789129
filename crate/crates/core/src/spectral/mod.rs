//! Fourier lattice on the 3-torus.
//!
//! Fields are real-valued functions on T³ = (R / 2πZ)³ stored through their
//! Fourier coefficients on the box `[-kmax, kmax]³`. The torus carries the
//! normalized Haar measure, so `‖u‖²_{L²} = Σ_k |û(k)|²` and no factors of
//! `(2π)³` appear anywhere in the crate.

pub(crate) mod fft;
mod field;
mod projector;
pub mod snapshot;

pub use fft::{cubic_power, multiply_physical, to_physical, to_spectral, PhysicalField};
pub use field::{CoefficientConvention, FourierField, PhasePoint};
pub use projector::{
    littlewood_paley_block, project, project_field, psi, sharp_multiplier, smooth_multiplier, ProjectionMode,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A lattice point of Z³.
pub type Wavevector = [i32; 3];

/// Squared Euclidean length of a lattice vector.
pub fn norm_sq(k: Wavevector) -> i64 {
    k.iter().map(|&c| (c as i64) * (c as i64)).sum()
}

/// Japanese bracket `⟨k⟩ = (1 + |k|²)^{1/2}`, the Klein-Gordon frequency of mode `k`.
pub fn bracket(k: Wavevector) -> f64 {
    (1.0 + norm_sq(k) as f64).sqrt()
}

/// Resolved band and physical resolution used for dealiased products.
///
/// `n_phys` is at least `2 · (2·kmax + 1)`, which makes products of three
/// band-limited fields exact on the resolved band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpectralGrid {
    kmax: usize,
    n_phys: usize,
}

impl SpectralGrid {
    /// Grid with the smallest 2-3-5-smooth resolution satisfying the padding invariant.
    pub fn new(kmax: usize) -> Result<Self> {
        let required = 2 * (2 * kmax + 1);
        Self::with_resolution(kmax, fft_friendly_size(required))
    }

    pub fn with_resolution(kmax: usize, n_phys: usize) -> Result<Self> {
        if kmax < 1 {
            return Err(Error::InvalidGrid("kmax must be at least 1".into()));
        }
        if kmax > i32::MAX as usize / 8 {
            return Err(Error::InvalidGrid(format!("kmax = {kmax} is too large")));
        }
        let required = 2 * (2 * kmax + 1);
        if n_phys < required {
            return Err(Error::InvalidGrid(format!(
                "n_phys = {n_phys} violates the zero-padding invariant n_phys >= {required}"
            )));
        }
        Ok(Self { kmax, n_phys })
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn n_phys(&self) -> usize {
        self.n_phys
    }

    /// Points per axis of the coefficient box, `2·kmax + 1`.
    pub fn side(&self) -> usize {
        2 * self.kmax + 1
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.side().pow(3)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pad_factor(&self) -> f64 {
        self.n_phys as f64 / self.side() as f64
    }

    pub fn contains(&self, k: Wavevector) -> bool {
        let m = self.kmax as i32;
        k.iter().all(|&c| -m <= c && c <= m)
    }

    /// Lexicographic position of `k` in the coefficient box.
    pub fn index(&self, k: Wavevector) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        Some(self.index_unchecked(k))
    }

    #[inline]
    pub(crate) fn index_unchecked(&self, k: Wavevector) -> usize {
        let m = self.kmax as i32;
        let s = self.side();
        (((k[0] + m) as usize) * s + (k[1] + m) as usize) * s + (k[2] + m) as usize
    }

    pub fn wavevector(&self, index: usize) -> Wavevector {
        let s = self.side();
        let m = self.kmax as i32;
        let z = (index % s) as i32 - m;
        let y = ((index / s) % s) as i32 - m;
        let x = (index / (s * s)) as i32 - m;
        [x, y, z]
    }

    /// Index of `-k` given the index of `k`.
    #[inline]
    pub(crate) fn mirror_index(&self, index: usize) -> usize {
        self.len() - 1 - index
    }

    pub fn wavevectors(&self) -> impl Iterator<Item = (usize, Wavevector)> + '_ {
        (0..self.len()).map(move |i| (i, self.wavevector(i)))
    }
}

/// Smallest integer `>= n` whose prime factors are 2, 3 and 5.
pub fn fft_friendly_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_enforces_padding() {
        assert!(SpectralGrid::new(0).is_err());
        assert!(SpectralGrid::with_resolution(4, 17).is_err());
        let g = SpectralGrid::with_resolution(4, 18).unwrap();
        assert_eq!(g.side(), 9);
        assert!(g.pad_factor() >= 2.0);
        let g = SpectralGrid::new(32).unwrap();
        assert!(g.n_phys() >= 130);
        assert_eq!(fft_friendly_size(g.n_phys()), g.n_phys());
    }

    #[test]
    fn index_roundtrip_and_mirror() {
        let g = SpectralGrid::new(3).unwrap();
        for (i, k) in g.wavevectors() {
            assert_eq!(g.index(k), Some(i));
            let mk = [-k[0], -k[1], -k[2]];
            assert_eq!(g.index(mk), Some(g.mirror_index(i)));
        }
        assert_eq!(g.index([4, 0, 0]), None);
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(fft_friendly_size(130), 135);
        assert_eq!(fft_friendly_size(18), 18);
        assert_eq!(fft_friendly_size(154), 160);
    }
}
