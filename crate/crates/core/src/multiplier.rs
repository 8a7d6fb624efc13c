use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Space, SpectralField};

/// Quintic smoothstep: w(0)=0, w(1)=1, with first and second derivatives
/// vanishing at both ends, so interpolants built from it join C^2.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// Radial Fourier multiplier symbols. All are functions of |xi| only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Symbol {
    /// |xi|^order. Negative orders drop the zero mode (see `apply_multiplier`).
    Fractional { order: f64 },
    /// (1 + |xi|^2)^(order/2).
    Bracket { order: f64 },
    /// Low-frequency-preserving smoothing symbol of strength s and cutoff N:
    /// 1 below N, (|xi|/N)^(s-1) above 2N, C^2 monotone bridge between.
    Smoothing { n_cut: f64, s: f64 },
    /// Smooth low-pass bump: 1 below N, 0 above 2N, C^2 bridge between.
    LowPass { n_cut: f64 },
    /// Smooth annulus bump supported on [N/2, 2N].
    Band { n_cut: f64 },
}

impl Symbol {
    pub fn fractional(order: f64) -> Result<Symbol> {
        if !order.is_finite() {
            return Err(Error::param("order", format!("must be finite, got {order}")));
        }
        Ok(Symbol::Fractional { order })
    }

    pub fn bracket(order: f64) -> Result<Symbol> {
        if !order.is_finite() {
            return Err(Error::param("order", format!("must be finite, got {order}")));
        }
        Ok(Symbol::Bracket { order })
    }

    pub fn smoothing(n_cut: f64, s: f64) -> Result<Symbol> {
        if !(n_cut.is_finite() && n_cut > 1.0) {
            return Err(Error::param("n_cut", format!("cutoff must be > 1, got {n_cut}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::param(
                "s",
                format!("smoothing strength must lie in (0, 1), got {s}"),
            ));
        }
        Ok(Symbol::Smoothing { n_cut, s })
    }

    pub fn low_pass(n_cut: f64) -> Result<Symbol> {
        if !(n_cut.is_finite() && n_cut > 0.0) {
            return Err(Error::param("n_cut", format!("cutoff must be > 0, got {n_cut}")));
        }
        Ok(Symbol::LowPass { n_cut })
    }

    pub fn band(n_cut: f64) -> Result<Symbol> {
        if !(n_cut.is_finite() && n_cut > 0.0) {
            return Err(Error::param("n_cut", format!("cutoff must be > 0, got {n_cut}")));
        }
        Ok(Symbol::Band { n_cut })
    }

    /// Evaluate the symbol at radius |xi| = r >= 0.
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Symbol::Fractional { order } => {
                if r == 0.0 {
                    // order > 0 vanishes at the origin; order <= 0 is handled
                    // by the zero-mode policy in apply_multiplier.
                    if order > 0.0 {
                        0.0
                    } else if order == 0.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    r.powf(order)
                }
            }
            Symbol::Bracket { order } => (1.0 + r * r).powf(order / 2.0),
            Symbol::Smoothing { n_cut, s } => {
                let rho = r / n_cut;
                if rho <= 1.0 {
                    1.0
                } else if rho >= 2.0 {
                    rho.powf(s - 1.0)
                } else {
                    rho.powf((s - 1.0) * smoothstep(rho.log2()))
                }
            }
            Symbol::LowPass { n_cut } => low_pass_bump(r / n_cut),
            Symbol::Band { n_cut } => low_pass_bump(r / n_cut) - low_pass_bump(2.0 * r / n_cut),
        }
    }
}

/// C^2 cutoff profile: 1 on [0,1], 0 on [2,inf), smoothstep bridge between.
fn low_pass_bump(rho: f64) -> f64 {
    if rho <= 1.0 {
        1.0
    } else if rho >= 2.0 {
        0.0
    } else {
        smoothstep(2.0 - rho)
    }
}

/// Multiply the field's Fourier coefficients by a radial symbol.
///
/// The result is returned in the same space as the input. For negative
/// fractional orders the symbol is singular at xi = 0, so the zero mode is
/// discarded; if that mode was not already negligible a warning is recorded
/// on the result.
pub fn apply_multiplier(field: &SpectralField, symbol: &Symbol) -> Result<SpectralField> {
    let original = field.space();
    let mut hat = field.to_space(Space::Frequency);
    let grid = *hat.grid();
    let drops_zero_mode = matches!(symbol, Symbol::Fractional { order } if *order < 0.0);
    if drops_zero_mode {
        let scale = hat.max_abs();
        let zero = hat.values()[0];
        if zero.norm() > 1e-14 * scale.max(1e-300) {
            hat.warnings.push(format!(
                "negative-order multiplier discarded a nonzero mean (|coef| = {:.3e})",
                zero.norm()
            ));
        }
        hat.values_mut()[0] = num_complex::Complex64::default();
    }
    for (idx, v) in hat.values_mut().iter_mut().enumerate() {
        if drops_zero_mode && idx == 0 {
            continue;
        }
        let r = grid.xi_norm_sq(idx).sqrt();
        *v *= symbol.eval(r);
    }
    Ok(match original {
        Space::Frequency => hat,
        Space::Physical => {
            let warnings = hat.warnings.clone();
            let mut out = hat.to_space(Space::Physical);
            out.warnings = warnings;
            out
        }
    })
}

/// Which piece of the smooth dyadic decomposition to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpPiece {
    /// Frequencies up to ~N (smooth low-pass).
    Le,
    /// Complement of `Le`, formed by subtraction so Le + Gt == identity
    /// holds exactly, not just up to transform roundoff.
    Gt,
    /// Smooth annulus centered on N, supported in [N/2, 2N].
    Band,
}

/// Smooth Littlewood-Paley projection of `field` at cutoff `n_cut`.
pub fn littlewood_paley(field: &SpectralField, n_cut: f64, piece: LpPiece) -> Result<SpectralField> {
    match piece {
        LpPiece::Le => apply_multiplier(field, &Symbol::low_pass(n_cut)?),
        LpPiece::Band => apply_multiplier(field, &Symbol::band(n_cut)?),
        LpPiece::Gt => {
            let low = apply_multiplier(field, &Symbol::low_pass(n_cut)?)?;
            let mut out = field.clone();
            for (v, l) in out.values_mut().iter_mut().zip(low.values()) {
                *v -= l;
            }
            Ok(out)
        }
    }
}

/// The smoothing operator of strength s at cutoff N: identity on frequencies
/// below N, a fractional attenuation (|xi|/N)^(s-1) above 2N.
pub fn i_operator(field: &SpectralField, n_cut: f64, s: f64) -> Result<SpectralField> {
    apply_multiplier(field, &Symbol::smoothing(n_cut, s)?)
}

/// Spectral partial derivative along one axis: coefficients multiplied by
/// 2 pi i xi_axis, the literal-gradient convention shared by the energy
/// density and the propagator phase. The result keeps the input's space.
pub fn gradient_axis(field: &SpectralField, axis: usize) -> Result<SpectralField> {
    let grid = *field.grid();
    if axis >= grid.dim() {
        return Err(Error::GridMismatch(format!(
            "axis {axis} out of range for dimension {}",
            grid.dim()
        )));
    }
    let original = field.space();
    let mut hat = field.to_space(Space::Frequency);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut coords = vec![0usize; grid.dim()];
    for (idx, v) in hat.values_mut().iter_mut().enumerate() {
        grid.unravel(idx, &mut coords);
        let xi = grid.xi_of_index(coords[axis]);
        *v *= num_complex::Complex64::new(0.0, two_pi * xi);
    }
    Ok(match original {
        Space::Frequency => hat,
        Space::Physical => hat.to_space(Space::Physical),
    })
}

/// All partial derivatives, axis by axis.
pub fn gradient(field: &SpectralField) -> Result<Vec<SpectralField>> {
    (0..field.grid().dim()).map(|a| gradient_axis(field, a)).collect()
}
