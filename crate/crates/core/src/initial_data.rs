//! Initial-data generators: Gaussian bumps, wave-modulated Gaussians, and
//! seeded random draws with a prescribed Sobolev regularity. Every generator
//! is deterministic in its inputs (the random kind in its seed).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Space, SpectralField};
use crate::grid::Grid;

/// Which profile to generate, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataKind {
    /// A exp(-|x - x0|^2 / (2 w^2)), distance taken in the periodic metric.
    Gaussian {
        amplitude: f64,
        width: f64,
        /// Bump center; box center when omitted.
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// Gaussian envelope times the plane wave e^{2 pi i (k/L) . x}.
    ModulatedGaussian {
        amplitude: f64,
        width: f64,
        wave: Vec<i64>,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// Independent complex Gaussian coefficients with standard deviation
    /// proportional to <xi>^-(s + n/2 + delta), normalized so the bracket
    /// H^s norm equals `target_norm`. Lands in H^s but in no H^t for
    /// t > s + delta as the grid refines, so delta sets the roughness margin.
    RandomHs { s: f64, delta: f64, target_norm: f64 },
}

/// Build one field of the requested kind on `grid`. The seed only matters
/// for `RandomHs`; the result is returned in physical space.
pub fn make_initial_data(grid: Grid, kind: &DataKind, seed: u64) -> Result<SpectralField> {
    match kind {
        DataKind::Gaussian {
            amplitude,
            width,
            center,
        } => gaussian(grid, *amplitude, *width, center.as_deref(), None),
        DataKind::ModulatedGaussian {
            amplitude,
            width,
            wave,
            center,
        } => gaussian(grid, *amplitude, *width, center.as_deref(), Some(wave)),
        DataKind::RandomHs {
            s,
            delta,
            target_norm,
        } => random_hs(grid, *s, *delta, *target_norm, seed),
    }
}

fn gaussian(
    grid: Grid,
    amplitude: f64,
    width: f64,
    center: Option<&[f64]>,
    wave: Option<&[i64]>,
) -> Result<SpectralField> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::param("width", format!("must be finite and > 0, got {width}")));
    }
    if !amplitude.is_finite() {
        return Err(Error::param("amplitude", format!("must be finite, got {amplitude}")));
    }
    let dim = grid.dim();
    let c: Vec<f64> = match center {
        Some(c) => {
            if c.len() != dim {
                return Err(Error::param(
                    "center",
                    format!("needs {dim} coordinates, got {}", c.len()),
                ));
            }
            c.to_vec()
        }
        None => vec![grid.center(); dim],
    };
    let xi_wave: Option<Vec<f64>> = match wave {
        Some(k) => {
            if k.len() != dim {
                return Err(Error::param(
                    "wave",
                    format!("needs {dim} components, got {}", k.len()),
                ));
            }
            let half = grid.points_per_axis() as i64 / 2;
            for &ka in k {
                if ka < -half || ka >= half {
                    return Err(Error::param(
                        "wave",
                        format!("component {ka} outside representable range [{}, {})", -half, half),
                    ));
                }
            }
            Some(k.iter().map(|&ka| ka as f64 / grid.box_side()).collect())
        }
        None => None,
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let inv_two_w2 = 1.0 / (2.0 * width * width);
    Ok(SpectralField::from_fn_physical(grid, |x| {
        let mut r2 = 0.0;
        for (xa, ca) in x.iter().zip(&c) {
            let d = grid.min_image(*xa, *ca);
            r2 += d * d;
        }
        let env = amplitude * (-r2 * inv_two_w2).exp();
        match &xi_wave {
            Some(xi) => {
                let phase: f64 = x.iter().zip(xi).map(|(xa, xia)| xa * xia).sum();
                Complex64::from_polar(env, two_pi * phase)
            }
            None => Complex64::new(env, 0.0),
        }
    }))
}

fn random_hs(grid: Grid, s: f64, delta: f64, target_norm: f64, seed: u64) -> Result<SpectralField> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", format!("violates 0 < s < 1: got {s}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param("delta", format!("roughness margin must be > 0, got {delta}")));
    }
    if !(target_norm > 0.0 && target_norm.is_finite()) {
        return Err(Error::param(
            "target_norm",
            format!("must be finite and > 0, got {target_norm}"),
        ));
    }
    let decay = s + grid.dim() as f64 / 2.0 + delta;
    for attempt in 0..=3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut values = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let bracket_sq = 1.0 + grid.xi_norm_sq(idx);
            let std = bracket_sq.powf(-decay / 2.0);
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            values.push(Complex64::new(re * std, im * std));
        }
        // Bracket H^s norm in frequency space, under the pinned Parseval
        // convention sum |f_hat|^2 / L^n = ||f||_2^2.
        let mut hs_sq = 0.0;
        for (idx, v) in values.iter().enumerate() {
            hs_sq += (1.0 + grid.xi_norm_sq(idx)).powf(s) * v.norm_sqr();
        }
        hs_sq *= grid.freq_cell_volume();
        let hs = hs_sq.sqrt();
        if !(hs > 0.0 && hs.is_finite()) {
            continue;
        }
        let scale = target_norm / hs;
        for v in &mut values {
            *v *= scale;
        }
        let hat = SpectralField::from_values(grid, Space::Frequency, values)?;
        return Ok(hat.to_space(Space::Physical));
    }
    Err(Error::param(
        "seed",
        "random draw produced no normalizable field after 3 retries".to_string(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bracket_norm(field: &SpectralField, order: f64) -> f64 {
        let hat = field.to_space(Space::Frequency);
        let grid = hat.grid();
        let mut acc = 0.0;
        for (idx, v) in hat.values().iter().enumerate() {
            acc += (1.0 + grid.xi_norm_sq(idx)).powf(order) * v.norm_sqr();
        }
        (acc * grid.freq_cell_volume()).sqrt()
    }

    #[test]
    fn gaussian_peak_symmetry_and_zero_amplitude() {
        let grid = Grid::new(1, 64, 16.0).unwrap();
        let kind = DataKind::Gaussian {
            amplitude: 2.0,
            width: 1.5,
            center: None,
        };
        let f = make_initial_data(grid, &kind, 0).unwrap();
        // Peak value at the center sample.
        let peak = f.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!((peak - 2.0).abs() < 1e-12);
        // Real, nonnegative, symmetric about the center in the periodic metric.
        for (i, v) in f.values().iter().enumerate() {
            assert_eq!(v.im, 0.0);
            assert!(v.re >= 0.0);
            let mirror = (64 - i) % 64;
            assert!((v.re - f.values()[mirror].re).abs() < 1e-12);
        }
        let zero = DataKind::Gaussian {
            amplitude: 0.0,
            width: 1.0,
            center: None,
        };
        let z = make_initial_data(grid, &zero, 0).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn modulation_shifts_the_spectrum() {
        let grid = Grid::new(1, 128, 16.0).unwrap();
        let plain = make_initial_data(
            grid,
            &DataKind::Gaussian {
                amplitude: 1.0,
                width: 1.0,
                center: None,
            },
            0,
        )
        .unwrap();
        let modulated = make_initial_data(
            grid,
            &DataKind::ModulatedGaussian {
                amplitude: 1.0,
                width: 1.0,
                wave: vec![9],
                center: None,
            },
            0,
        )
        .unwrap();
        // Pointwise moduli agree; spectra are translates by 9 lattice steps.
        for (a, b) in plain.values().iter().zip(modulated.values()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        let ph = plain.to_space(Space::Frequency);
        let mh = modulated.to_space(Space::Frequency);
        let peak_plain = (0..128).max_by(|&i, &j| {
            ph.values()[i].norm().partial_cmp(&ph.values()[j].norm()).unwrap()
        });
        let peak_mod = (0..128).max_by(|&i, &j| {
            mh.values()[i].norm().partial_cmp(&mh.values()[j].norm()).unwrap()
        });
        assert_eq!(peak_plain, Some(0));
        assert_eq!(peak_mod, Some(9));
    }

    #[test]
    fn random_hs_hits_target_norm_and_is_deterministic() {
        let grid = Grid::new(2, 32, 8.0).unwrap();
        let kind = DataKind::RandomHs {
            s: 0.7,
            delta: 0.05,
            target_norm: 2.5,
        };
        let f = make_initial_data(grid, &kind, 11).unwrap();
        assert!((bracket_norm(&f, 0.7) - 2.5).abs() < 1e-10);
        let g = make_initial_data(grid, &kind, 11).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        let h = make_initial_data(grid, &kind, 12).unwrap();
        assert!(f.max_abs_diff(&h).unwrap() > 1e-6, "different seeds must differ");
    }

    #[test]
    fn random_hs_sample_is_genuinely_rough() {
        // On a fine one-dimensional grid the H^{0.95} norm of an H^{0.7}
        // draw (margin 0.05) dwarfs the H^{0.7} norm: the coefficient decay
        // puts the sample outside H^t for t > 0.75 in the refinement limit.
        let grid = Grid::new(1, 16384, 1.0).unwrap();
        let kind = DataKind::RandomHs {
            s: 0.7,
            delta: 0.05,
            target_norm: 1.0,
        };
        let f = make_initial_data(grid, &kind, 5).unwrap();
        let base = bracket_norm(&f, 0.7);
        assert!((base - 1.0).abs() < 1e-10);
        let rough = bracket_norm(&f, 0.95);
        assert!(rough > 3.0, "H^0.95 / H^0.7 = {rough}, expected > 3");
    }

    #[test]
    fn parameter_validation() {
        let grid = Grid::new(1, 32, 4.0).unwrap();
        let bad_width = DataKind::Gaussian {
            amplitude: 1.0,
            width: 0.0,
            center: None,
        };
        assert!(make_initial_data(grid, &bad_width, 0).is_err());
        let bad_center = DataKind::Gaussian {
            amplitude: 1.0,
            width: 1.0,
            center: Some(vec![1.0, 2.0]),
        };
        assert!(make_initial_data(grid, &bad_center, 0).is_err());
        let bad_wave = DataKind::ModulatedGaussian {
            amplitude: 1.0,
            width: 1.0,
            wave: vec![16],
            center: None,
        };
        assert!(make_initial_data(grid, &bad_wave, 0).is_err());
        let bad_s = DataKind::RandomHs {
            s: 1.0,
            delta: 0.05,
            target_norm: 1.0,
        };
        assert!(make_initial_data(grid, &bad_s, 0).is_err());
        let bad_delta = DataKind::RandomHs {
            s: 0.5,
            delta: 0.0,
            target_norm: 1.0,
        };
        assert!(make_initial_data(grid, &bad_delta, 0).is_err());
    }

    #[test]
    fn kinds_round_trip_through_json() {
        let kinds = vec![
            DataKind::Gaussian {
                amplitude: 1.0,
                width: 0.5,
                center: Some(vec![8.0]),
            },
            DataKind::ModulatedGaussian {
                amplitude: 0.3,
                width: 2.0,
                wave: vec![3],
                center: None,
            },
            DataKind::RandomHs {
                s: 0.8,
                delta: 0.1,
                target_norm: 1.0,
            },
        ];
        for kind in kinds {
            let json = serde_json::to_string(&kind).unwrap();
            let back: DataKind = serde_json::from_str(&json).unwrap();
            assert_eq!(kind, back);
        }
    }
}
