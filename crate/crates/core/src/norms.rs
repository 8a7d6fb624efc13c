//! Scalar diagnostics: mass, energy, the smoothed-field energy, Sobolev and
//! Lebesgue norms, mixed space-time norms over trajectories, the
//! sigma-indexed space-time norm and its negative-derivative companion, the
//! admissible-pair supremum, and the scattering Cauchy difference.
//!
//! Conventions pinned here: |grad|^s and <grad>^s are the multipliers
//! |xi|^s and (1 + |xi|^2)^{s/2}; the literal gradient (energy density,
//! propagator) carries the extra 2 pi per the transform convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Space, SpectralField};
use crate::multiplier::{apply_multiplier, i_operator, Symbol};
use crate::nonlinearity::Nonlinearity;
use crate::solver::{free_propagator, Trajectory};
use crate::thresholds::admissible_pair_check;

/// ||u||_2^2 by grid quadrature on a physical-space field.
pub fn mass(field: &SpectralField) -> Result<f64> {
    field.expect_space(Space::Physical)?;
    Ok(field.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * field.grid().cell_volume())
}

/// E(u) = integral of 1/2 |grad u|^2 + 1/(p+2) |u|^{p+2}. The kinetic part
/// is summed in frequency space (identical to quadrature of the spectral
/// gradient, by the discrete Parseval identity), the potential part on the
/// grid.
pub fn energy(field: &SpectralField, p: f64) -> Result<f64> {
    field.expect_space(Space::Physical)?;
    let nl = Nonlinearity::new(p)?;
    let hat = field.to_space(Space::Frequency);
    let grid = hat.grid();
    let mut kin = 0.0;
    for (idx, v) in hat.values().iter().enumerate() {
        kin += grid.xi_norm_sq(idx) * v.norm_sqr();
    }
    let two_pi_sq = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
    let kinetic = two_pi_sq * kin * grid.freq_cell_volume();
    let mut pot = 0.0;
    for v in field.values() {
        pot += nl.abs_pow(*v) * v.norm_sqr();
    }
    let potential = pot * grid.cell_volume() / (p + 2.0);
    Ok(kinetic + potential)
}

/// E(Iu): the energy of the smoothed field at cutoff N and strength s.
pub fn modified_energy(field: &SpectralField, p: f64, n_cut: f64, s: f64) -> Result<f64> {
    field.expect_space(Space::Physical)?;
    energy(&i_operator(field, n_cut, s)?, p)
}

/// Sobolev norm with bookkeeping about the zero mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevDetail {
    pub value: f64,
    /// True when a homogeneous negative order forced dropping xi = 0.
    pub zero_mode_dropped: bool,
    /// |f_hat(0)|^2 / sum |f_hat|^2 that was discarded (0 when kept).
    pub dropped_fraction: f64,
}

/// || |grad|^s f ||_2 (homogeneous) or || <grad>^s f ||_2 (bracket), under
/// the multiplier convention without 2 pi. Homogeneous negative orders are
/// singular at xi = 0, so that mode is excluded; the detail records how much
/// was dropped.
pub fn sobolev_norm_detailed(
    field: &SpectralField,
    s: f64,
    homogeneous: bool,
) -> Result<SobolevDetail> {
    if !s.is_finite() {
        return Err(Error::param("s", format!("order must be finite, got {s}")));
    }
    let hat = field.to_space(Space::Frequency);
    let grid = hat.grid();
    let drop_zero = homogeneous && s < 0.0;
    let mut acc = 0.0;
    let mut total = 0.0;
    let mut dropped = 0.0;
    for (idx, v) in hat.values().iter().enumerate() {
        let p2 = v.norm_sqr();
        total += p2;
        let r2 = grid.xi_norm_sq(idx);
        if drop_zero && r2 == 0.0 {
            dropped += p2;
            continue;
        }
        let weight = if homogeneous {
            if r2 == 0.0 {
                if s == 0.0 {
                    1.0
                } else {
                    0.0 // s > 0 vanishes at the origin
                }
            } else {
                r2.powf(s) // (|xi|^s)^2
            }
        } else {
            (1.0 + r2).powf(s)
        };
        acc += weight * p2;
    }
    Ok(SobolevDetail {
        value: (acc * grid.freq_cell_volume()).sqrt(),
        zero_mode_dropped: drop_zero,
        dropped_fraction: if total > 0.0 { dropped / total } else { 0.0 },
    })
}

pub fn sobolev_norm(field: &SpectralField, s: f64, homogeneous: bool) -> Result<f64> {
    Ok(sobolev_norm_detailed(field, s, homogeneous)?.value)
}

/// ||f||_{L^r} by grid quadrature; r = infinity takes the grid sup.
pub fn lebesgue_norm(field: &SpectralField, r: f64) -> Result<f64> {
    field.expect_space(Space::Physical)?;
    if !(r >= 1.0) {
        return Err(Error::param("r", format!("Lebesgue exponent must be >= 1, got {r}")));
    }
    if r.is_infinite() {
        return Ok(field.max_abs());
    }
    let mut acc = 0.0;
    if r == 2.0 {
        for v in field.values() {
            acc += v.norm_sqr();
        }
    } else if r == 4.0 {
        for v in field.values() {
            let p2 = v.norm_sqr();
            acc += p2 * p2;
        }
    } else {
        for v in field.values() {
            acc += v.norm().powf(r);
        }
    }
    Ok((acc * field.grid().cell_volume()).powf(1.0 / r))
}

/// A space-time norm L^q_t L^r_x of D^k u, with D either |grad|^k or
/// <grad>^k by the `bracket` flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    pub q: f64,
    pub r: f64,
    pub k: f64,
    pub bracket: bool,
}

impl MixedNormSpec {
    pub fn new(q: f64, r: f64, k: f64, bracket: bool) -> Result<MixedNormSpec> {
        let spec = MixedNormSpec { q, r, k, bracket };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 1.0) {
            return Err(Error::param("q", format!("time exponent must be >= 1, got {}", self.q)));
        }
        if !(self.r >= 1.0) {
            return Err(Error::param("r", format!("space exponent must be >= 1, got {}", self.r)));
        }
        if !self.k.is_finite() {
            return Err(Error::param("k", format!("derivative order must be finite, got {}", self.k)));
        }
        Ok(())
    }
}

/// Trapezoidal quadrature of sampled values over possibly uneven times.
pub fn trapezoid(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::param(
            "values",
            format!("{} values for {} times", values.len(), times.len()),
        ));
    }
    if times.len() < 2 {
        return Err(Error::param("times", "quadrature needs at least 2 samples".to_string()));
    }
    let mut acc = 0.0;
    for i in 1..times.len() {
        acc += (times[i] - times[i - 1]) * 0.5 * (values[i] + values[i - 1]);
    }
    Ok(acc)
}

/// (integral over the trajectory's time span of ||D^k u(t)||_{L^r}^q)^{1/q};
/// q = infinity takes the max over snapshots. Time integration is
/// trapezoidal over the snapshot times; there is no interpolation between
/// snapshots, so the snapshot stride is the time resolution.
pub fn mixed_norm(traj: &Trajectory, spec: &MixedNormSpec) -> Result<f64> {
    spec.validate()?;
    let needed = if spec.q.is_infinite() { 1 } else { 2 };
    if traj.len() < needed {
        return Err(Error::param(
            "traj",
            format!("needs at least {needed} snapshots, has {}", traj.len()),
        ));
    }
    let mut space_norms = Vec::with_capacity(traj.len());
    for snap in &traj.snapshots {
        let value = if spec.k == 0.0 {
            lebesgue_norm(snap, spec.r)?
        } else {
            let symbol = if spec.bracket {
                Symbol::bracket(spec.k)?
            } else {
                Symbol::fractional(spec.k)?
            };
            lebesgue_norm(&apply_multiplier(snap, &symbol)?, spec.r)?
        };
        space_norms.push(value);
    }
    if spec.q.is_infinite() {
        return Ok(space_norms.into_iter().fold(0.0, f64::max));
    }
    let powered: Vec<f64> = space_norms.iter().map(|g| g.powf(spec.q)).collect();
    Ok(trapezoid(&traj.times, &powered)?.powf(1.0 / spec.q))
}

/// Exponents of the sigma-indexed space-time norm:
/// q = (n-3+4 sigma)/sigma, r = 2(n-3+4 sigma)/(n-3+2 sigma). At n = 3 both
/// collapse to 4 for every sigma.
pub fn morawetz_exponents(n: u32, sigma: f64) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::param("n", format!("needs n >= 3, got {n}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("must be > 0, got {sigma}")));
    }
    let a = n as f64 - 3.0;
    Ok((
        (a + 4.0 * sigma) / sigma,
        2.0 * (a + 4.0 * sigma) / (a + 2.0 * sigma),
    ))
}

/// The sigma-indexed space-time norm of a trajectory (no derivative).
pub fn morawetz_norm(traj: &Trajectory, sigma: f64, n: u32) -> Result<f64> {
    let (q, r) = morawetz_exponents(n, sigma)?;
    if traj.config.grid.dim() != n as usize {
        return Err(Error::GridMismatch(format!(
            "norm indexed for n = {n} but trajectory lives in dimension {}",
            traj.config.grid.dim()
        )));
    }
    mixed_norm(traj, &MixedNormSpec::new(q, r, 0.0, false)?)
}

/// || |grad|^{-(n-3)/4} u ||_{L^4_{t,x}}; the multiplier degenerates to the
/// identity at n = 3, and for n > 3 its negative order drops the zero mode.
pub fn negative_deriv_morawetz(traj: &Trajectory, n: u32) -> Result<f64> {
    if n < 3 {
        return Err(Error::param("n", format!("needs n >= 3, got {n}")));
    }
    if traj.config.grid.dim() != n as usize {
        return Err(Error::GridMismatch(format!(
            "norm indexed for n = {n} but trajectory lives in dimension {}",
            traj.config.grid.dim()
        )));
    }
    let k = -(n as f64 - 3.0) / 4.0;
    mixed_norm(traj, &MixedNormSpec::new(4.0, 4.0, k, false)?)
}

/// Largest mixed norm over a finite list of admissible pairs, with
/// derivative order k in the homogeneous convention.
pub fn strichartz_sup(traj: &Trajectory, pairs: &[(f64, f64)], k: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::param("pairs", "need at least one admissible pair".to_string()));
    }
    let n = traj.config.grid.dim() as u32;
    for &(q, r) in pairs {
        if !admissible_pair_check(q, r, n) {
            return Err(Error::param(
                "pairs",
                format!("({q}, {r}) is not admissible in dimension {n}: needs 2/q + n/r = n/2 with q, r >= 2"),
            ));
        }
    }
    let mut worst = 0.0f64;
    for &(q, r) in pairs {
        worst = worst.max(mixed_norm(traj, &MixedNormSpec::new(q, r, k, false)?)?);
    }
    Ok(worst)
}

/// || e^{-i t Delta} u(t) - e^{-i tau Delta} u(tau) ||_{H^s}: the Cauchy
/// difference of the undone-free-evolution profiles at two snapshot times.
pub fn scattering_cauchy(traj: &Trajectory, s: f64, t: f64, tau: f64) -> Result<f64> {
    let a = traj.snapshot_at(t)?;
    let b = traj.snapshot_at(tau)?;
    let va = free_propagator(a, -t);
    let vb = free_propagator(b, -tau);
    let mut diff = va;
    for (v, w) in diff.values_mut().iter_mut().zip(vb.values()) {
        *v -= w;
    }
    sobolev_norm(&diff, s, false)
}
