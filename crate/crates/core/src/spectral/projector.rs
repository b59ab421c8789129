//! Sharp and smooth frequency projectors.

use super::{norm_sq, FourierField, PhasePoint, Wavevector};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    /// Restriction to `|k| <= cutoff` (boundary included).
    Sharp,
    /// Multiplier `ψ(|k|² / cutoff²)`.
    Smooth,
}

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff: `1` on `[0, 1]`, `0` on `[4, ∞)`, C^∞ in between.
pub fn psi(x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else if x >= 4.0 {
        0.0
    } else {
        let a = bump((4.0 - x) / 3.0);
        let b = bump((x - 1.0) / 3.0);
        a / (a + b)
    }
}

pub fn smooth_multiplier(cutoff: f64) -> impl Fn(Wavevector) -> f64 {
    let inv = 1.0 / (cutoff * cutoff);
    move |k| psi(norm_sq(k) as f64 * inv)
}

pub fn sharp_multiplier(cutoff: f64) -> impl Fn(Wavevector) -> f64 {
    move |k| {
        if (norm_sq(k) as f64) <= cutoff * cutoff {
            1.0
        } else {
            0.0
        }
    }
}

/// Littlewood-Paley block at dyadic `n`: `P_1` for `n = 1`, else `P_n - P_{n/2}`.
pub fn littlewood_paley_block(n: f64) -> impl Fn(Wavevector) -> f64 {
    let hi = smooth_multiplier(n);
    let lo = smooth_multiplier(n / 2.0);
    let first = n <= 1.0;
    move |k| {
        if first {
            hi(k)
        } else {
            hi(k) - lo(k)
        }
    }
}

pub fn project_field(f: &FourierField, mode: ProjectionMode, cutoff: f64) -> Result<FourierField> {
    check_cutoff(cutoff)?;
    Ok(match mode {
        ProjectionMode::Sharp => f.apply_multiplier(sharp_multiplier(cutoff)),
        ProjectionMode::Smooth => f.apply_multiplier(smooth_multiplier(cutoff)),
    })
}

pub fn project(p: &PhasePoint, mode: ProjectionMode, cutoff: f64) -> Result<PhasePoint> {
    check_cutoff(cutoff)?;
    Ok(match mode {
        ProjectionMode::Sharp => p.apply_multiplier(sharp_multiplier(cutoff)),
        ProjectionMode::Smooth => p.apply_multiplier(smooth_multiplier(cutoff)),
    })
}

fn check_cutoff(cutoff: f64) -> Result<()> {
    if !(cutoff > 0.0) || !cutoff.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "projection cutoff must be positive, got {cutoff}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralGrid;
    use num_complex::Complex64;

    fn random_point(kmax: usize, seed: u64) -> PhasePoint {
        let g = SpectralGrid::new(kmax).unwrap();
        let mut s = seed;
        let mut r = move || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let pos = FourierField::from_fn(g, |_| Complex64::new(r(), r()));
        let vel = FourierField::from_fn(g, |_| Complex64::new(r(), r()));
        PhasePoint::new(pos, vel).unwrap()
    }

    #[test]
    fn psi_shape() {
        assert_eq!(psi(0.0), 1.0);
        assert_eq!(psi(1.0), 1.0);
        assert_eq!(psi(4.0), 0.0);
        assert!((psi(2.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=300 {
            let v = psi(1.0 + i as f64 * 0.01);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn sharp_cutoff_below_first_shell_kills_unit_modes() {
        let g = SpectralGrid::new(2).unwrap();
        let f = FourierField::single_mode(g, [0, 0, 1], Complex64::new(1.0, 0.3)).unwrap();
        let p = PhasePoint::new(f.clone(), f).unwrap();
        assert!(project(&p, ProjectionMode::Sharp, 0.5).unwrap().is_zero());
        assert!(!project(&p, ProjectionMode::Sharp, 1.0).unwrap().is_zero());
    }

    #[test]
    fn sharp_idempotent_and_composes_to_min() {
        let p = random_point(3, 5);
        let once = project(&p, ProjectionMode::Sharp, 2.3).unwrap();
        let twice = project(&once, ProjectionMode::Sharp, 2.3).unwrap();
        assert_eq!(once, twice);
        for (a, b) in [(1.5, 3.0), (3.0, 1.5), (2.0, 2.0)] {
            let ab = project(
                &project(&p, ProjectionMode::Sharp, a).unwrap(),
                ProjectionMode::Sharp,
                b,
            )
            .unwrap();
            let m = project(&p, ProjectionMode::Sharp, f64::min(a, b)).unwrap();
            assert_eq!(ab, m);
        }
    }

    #[test]
    fn smooth_is_identity_on_plateau() {
        let p = random_point(3, 9);
        // ψ = 1 for |k| <= N, and |k| <= √3·3 < 6 on the box.
        let q = project(&p, ProjectionMode::Smooth, 6.0).unwrap();
        assert_eq!(p, q);
        let r = project(&p, ProjectionMode::Smooth, 2.0).unwrap();
        assert_ne!(p, r);
        assert!(r.is_hermitian());
    }

    #[test]
    fn lp_blocks_telescope() {
        let g = SpectralGrid::new(4).unwrap();
        let dyadics = [1.0, 2.0, 4.0, 8.0];
        let blocks: Vec<_> = dyadics.iter().map(|&n| littlewood_paley_block(n)).collect();
        for (_, k) in g.wavevectors() {
            let s: f64 = blocks.iter().map(|b| b(k)).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_cutoff() {
        let p = random_point(1, 1);
        assert!(project(&p, ProjectionMode::Smooth, 0.0).is_err());
        assert!(project(&p, ProjectionMode::Sharp, -1.0).is_err());
    }
}
