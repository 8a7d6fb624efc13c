use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on the box [0, L)^n with M points per axis.
///
/// Physical nodes are x_j = j * dx with dx = L / M; frequency nodes are
/// xi_k = k / L with integer k in [-M/2, M/2), stored in FFT order
/// (k = i for i < M/2, k = i - M otherwise). Arrays are row-major with
/// axis 0 slowest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: u32,
    m: u32,
    l_box: f64,
}

impl Grid {
    /// Dimensions 1..=3, M a power of two >= 8, box side positive and finite.
    pub fn new(n: u32, m: u32, l_box: f64) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::param("n", format!("dimension must be 1..=3, got {n}")));
        }
        if m < 8 || !m.is_power_of_two() {
            return Err(Error::param(
                "m",
                format!("points per axis must be a power of two >= 8, got {m}"),
            ));
        }
        if !(l_box.is_finite() && l_box > 0.0) {
            return Err(Error::param(
                "l_box",
                format!("box side must be positive and finite, got {l_box}"),
            ));
        }
        Ok(Grid { n, m, l_box })
    }

    pub fn dim(&self) -> usize {
        self.n as usize
    }

    pub fn points_per_axis(&self) -> usize {
        self.m as usize
    }

    pub fn box_side(&self) -> f64 {
        self.l_box
    }

    pub fn dx(&self) -> f64 {
        self.l_box / self.m as f64
    }

    /// Physical cell volume dx^n, the weight of one node in Riemann sums.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.n as i32)
    }

    /// Frequency cell volume (1/L)^n.
    pub fn freq_cell_volume(&self) -> f64 {
        self.l_box.powi(-(self.n as i32))
    }

    /// Total number of nodes M^n.
    pub fn len(&self) -> usize {
        (self.m as usize).pow(self.n)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Signed integer frequency index for storage index i along one axis.
    #[inline]
    pub fn k_of_index(&self, i: usize) -> i64 {
        let m = self.m as usize;
        if i < m / 2 {
            i as i64
        } else {
            i as i64 - m as i64
        }
    }

    /// Frequency coordinate xi = k / L along one axis.
    #[inline]
    pub fn xi_of_index(&self, i: usize) -> f64 {
        self.k_of_index(i) as f64 / self.l_box
    }

    /// Largest per-axis |xi| represented: (M/2) / L.
    pub fn max_axis_freq(&self) -> f64 {
        (self.m as f64 / 2.0) / self.l_box
    }

    /// Largest |xi| over the full lattice: sqrt(n) * (M/2) / L.
    pub fn max_freq(&self) -> f64 {
        self.max_axis_freq() * (self.n as f64).sqrt()
    }

    /// Decompose a linear index into per-axis indices (axis 0 slowest).
    #[inline]
    pub fn unravel(&self, mut idx: usize, out: &mut [usize]) {
        let m = self.m as usize;
        for a in (0..self.dim()).rev() {
            out[a] = idx % m;
            idx /= m;
        }
    }

    /// |xi|^2 at a linear storage index.
    #[inline]
    pub fn xi_norm_sq(&self, idx: usize) -> f64 {
        let m = self.m as usize;
        let mut rem = idx;
        let mut s = 0.0;
        for _ in 0..self.dim() {
            let i = rem % m;
            rem /= m;
            let xi = self.xi_of_index(i);
            s += xi * xi;
        }
        s
    }

    /// Physical coordinate of a per-axis index.
    #[inline]
    pub fn x_of_index(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Box center coordinate along each axis (a grid node since M is even).
    pub fn center(&self) -> f64 {
        self.l_box / 2.0
    }

    /// Minimal-image displacement of coordinate x from coordinate c.
    #[inline]
    pub fn min_image(&self, x: f64, c: f64) -> f64 {
        let mut d = x - c;
        let l = self.l_box;
        d -= l * (d / l).round();
        d
    }
}
