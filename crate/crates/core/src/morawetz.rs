//! Interaction functionals against the singular radial kernels 1/|x-y|^3
//! and 1/|x-y| on the n = 3 torus.
//!
//! Kernel regularization: the kernels are tabulated at minimal-image
//! distance with the value at x = 0 set to zero. A cell-average value at the
//! origin does not exist for 1/|x|^3 (the ball average diverges), and zero
//! makes the FFT convolution agree identically with the diagonal-excluded
//! double sum that the brute-force oracle computes, so the two paths differ
//! only by transform roundoff.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Space, SpectralField};
use crate::grid::Grid;
use crate::nonlinearity::Nonlinearity;
use crate::norms::{mass, sobolev_norm, trapezoid};
use crate::solver::Trajectory;

/// Largest node count accepted by the O(len^2) brute-force oracle.
const BRUTE_FORCE_MAX_NODES: usize = 4096;

/// Time-integrated interaction functionals and the a priori right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionMorawetz {
    /// Integral of |u(y)|^2 |u(x)|^2 / |x-y|^3 over x, y, and t.
    pub term_cube: f64,
    /// Integral of |u(y)|^2 |u(x)|^{p+2} / |x-y| over x, y, and t.
    pub term_coulomb: f64,
    /// ||u0||_2^2 times the squared sup over snapshots of the homogeneous
    /// H^{1/2} norm.
    pub rhs_bound: f64,
}

fn expect_three_dim(grid: Grid) -> Result<()> {
    if grid.dim() != 3 {
        return Err(Error::param(
            "traj",
            format!(
                "interaction functionals use the 1/|x-y|^3, 1/|x-y| kernel pair and need an n = 3 grid, got n = {}",
                grid.dim()
            ),
        ));
    }
    Ok(())
}

/// Radial kernel dmin(x)^{-power} in frequency space, zero at the origin.
fn kernel_hat(grid: Grid, power: f64) -> Vec<Complex64> {
    let mut idx3 = vec![0usize; grid.dim()];
    let values: Vec<Complex64> = (0..grid.len())
        .map(|idx| {
            grid.unravel(idx, &mut idx3);
            let mut r2 = 0.0;
            for &j in idx3.iter() {
                let d = grid.min_image(grid.x_of_index(j), 0.0);
                r2 += d * d;
            }
            if r2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(r2.sqrt().powf(-power), 0.0)
            }
        })
        .collect();
    let kernel = SpectralField::from_values(grid, Space::Physical, values).unwrap();
    kernel.to_space(Space::Frequency).into_values()
}

/// Circular-convolution quadrature sum_x against(x) (K * density)(x) dV^2,
/// which equals the diagonal-excluded double sum because K(0) = 0.
fn convolution_quadrature(
    grid: Grid,
    k_hat: &[Complex64],
    density_hat: &[Complex64],
    against: &[f64],
) -> f64 {
    let prod: Vec<Complex64> = density_hat.iter().zip(k_hat).map(|(d, k)| d * k).collect();
    let conv = SpectralField::from_values(grid, Space::Frequency, prod)
        .unwrap()
        .to_space(Space::Physical);
    // Transform scaling: our forward carries dx^n and the inverse L^{-n}, so
    // this conv equals the plain count convolution times one dx^n; one more
    // cell volume completes the double quadrature.
    let mut acc = 0.0;
    for (f, c) in against.iter().zip(conv.values()) {
        acc += f * c.re;
    }
    acc * grid.cell_volume()
}

/// The two interaction integrals of a single physical-space snapshot,
/// evaluated by FFT convolution against the tabulated kernels.
pub fn interaction_terms_snapshot(field: &SpectralField, p: f64) -> Result<(f64, f64)> {
    field.expect_space(Space::Physical)?;
    let grid = *field.grid();
    expect_three_dim(grid)?;
    let k3 = kernel_hat(grid, 3.0);
    let k1 = kernel_hat(grid, 1.0);
    snapshot_terms_with_kernels(field, p, &k3, &k1)
}

fn snapshot_terms_with_kernels(
    field: &SpectralField,
    p: f64,
    k3_hat: &[Complex64],
    k1_hat: &[Complex64],
) -> Result<(f64, f64)> {
    let nl = Nonlinearity::new(p)?;
    let grid = *field.grid();
    let a: Vec<f64> = field.values().iter().map(|v| v.norm_sqr()).collect();
    let b: Vec<f64> = field
        .values()
        .iter()
        .map(|v| nl.abs_pow(*v) * v.norm_sqr())
        .collect();
    let a_field = SpectralField::from_values(
        grid,
        Space::Physical,
        a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
    )?;
    let a_hat = a_field.to_space(Space::Frequency).into_values();
    let cube = convolution_quadrature(grid, k3_hat, &a_hat, &a);
    let coulomb = convolution_quadrature(grid, k1_hat, &a_hat, &b);
    Ok((cube, coulomb))
}

/// Both interaction integrals of a trajectory (trapezoid in time over the
/// snapshots) plus the a priori bound built from mass and the sup of the
/// homogeneous H^{1/2} norm.
pub fn interaction_morawetz(traj: &Trajectory, p: f64) -> Result<InteractionMorawetz> {
    let grid = traj.config.grid;
    expect_three_dim(grid)?;
    if traj.len() < 2 {
        return Err(Error::param(
            "traj",
            format!(
                "time integration needs at least 2 snapshots, has {}; use interaction_terms_snapshot for instantaneous values",
                traj.len()
            ),
        ));
    }
    let k3 = kernel_hat(grid, 3.0);
    let k1 = kernel_hat(grid, 1.0);
    let mut cubes = Vec::with_capacity(traj.len());
    let mut coulombs = Vec::with_capacity(traj.len());
    let mut sup_half = 0.0f64;
    for snap in &traj.snapshots {
        let (c3, c1) = snapshot_terms_with_kernels(snap, p, &k3, &k1)?;
        cubes.push(c3);
        coulombs.push(c1);
        sup_half = sup_half.max(sobolev_norm(snap, 0.5, true)?);
    }
    Ok(InteractionMorawetz {
        term_cube: trapezoid(&traj.times, &cubes)?,
        term_coulomb: trapezoid(&traj.times, &coulombs)?,
        rhs_bound: mass(&traj.snapshots[0])? * sup_half * sup_half,
    })
}

/// Diagonal-excluded double-sum oracle for the snapshot integrals, O(len^2);
/// refuses grids beyond 4096 nodes.
pub fn interaction_brute_force(field: &SpectralField, p: f64) -> Result<(f64, f64)> {
    field.expect_space(Space::Physical)?;
    let grid = *field.grid();
    expect_three_dim(grid)?;
    if grid.len() > BRUTE_FORCE_MAX_NODES {
        return Err(Error::ResourceGuard(format!(
            "brute-force double sum over {} nodes squared; limit is {BRUTE_FORCE_MAX_NODES} nodes",
            grid.len()
        )));
    }
    let nl = Nonlinearity::new(p)?;
    let mut idx3 = vec![0usize; 3];
    let positions: Vec<[f64; 3]> = (0..grid.len())
        .map(|idx| {
            grid.unravel(idx, &mut idx3);
            [
                grid.x_of_index(idx3[0]),
                grid.x_of_index(idx3[1]),
                grid.x_of_index(idx3[2]),
            ]
        })
        .collect();
    let a: Vec<f64> = field.values().iter().map(|v| v.norm_sqr()).collect();
    let b: Vec<f64> = field
        .values()
        .iter()
        .map(|v| nl.abs_pow(*v) * v.norm_sqr())
        .collect();
    let mut cube = 0.0;
    let mut coulomb = 0.0;
    for j in 0..grid.len() {
        for l in 0..grid.len() {
            if j == l {
                continue;
            }
            let mut r2 = 0.0;
            for axis in 0..3 {
                let d = grid.min_image(positions[j][axis], positions[l][axis]);
                r2 += d * d;
            }
            let r = r2.sqrt();
            cube += a[j] * a[l] / (r2 * r);
            coulomb += b[j] * a[l] / r;
        }
    }
    let cv2 = grid.cell_volume() * grid.cell_volume();
    Ok((cube * cv2, coulomb * cv2))
}
