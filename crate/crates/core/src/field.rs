use std::cell::RefCell;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Which representation the value buffer currently holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Physical,
    Frequency,
}

/// A complex scalar field on a periodic grid, stored row-major (axis 0
/// slowest) in either physical or frequency representation.
///
/// Transform convention: the forward transform approximates
/// f_hat(xi) = integral of f(x) e^{-2 pi i x.xi} dx, so coefficients carry the
/// Riemann weight dx^n; the inverse carries the frequency weight (1/L)^n.
/// With x_j = j dx and xi_k = k / L the kernel reduces exactly to the DFT
/// kernel e^{-2 pi i jk / M}, so the pair is a bijection up to roundoff.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Grid,
    space: Space,
    values: Vec<Complex64>,
    /// Non-fatal notes attached by operations (e.g. a discarded zero mode).
    pub warnings: Vec<String>,
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"IMLB";
const SNAPSHOT_VERSION: u32 = 1;
/// Hard cap for the O(M^{2n}) direct-sum transform.
const DFT_ORACLE_MAX_POINTS: usize = 4096;

thread_local! {
    static PLAN_CACHE: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLAN_CACHE.with(|cache| {
        cache
            .borrow_mut()
            .entry((len, forward))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if forward {
                    planner.plan_fft_forward(len)
                } else {
                    planner.plan_fft_inverse(len)
                }
            })
            .clone()
    })
}

/// Unnormalized DFT along every axis of a row-major hypercube buffer.
fn dft_all_axes(values: &mut [Complex64], grid: &Grid, forward: bool) {
    let m = grid.points_per_axis();
    let n = grid.dim();
    let fft = plan(m, forward);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut line = vec![Complex64::default(); m];
    for axis in 0..n {
        let inner: usize = m.pow((n - 1 - axis) as u32);
        if inner == 1 {
            for chunk in values.chunks_exact_mut(m) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
        } else {
            let outer = values.len() / (m * inner);
            for o in 0..outer {
                let block = o * m * inner;
                for i in 0..inner {
                    let base = block + i;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = values[base + k * inner];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, slot) in line.iter().enumerate() {
                        values[base + k * inner] = *slot;
                    }
                }
            }
        }
    }
}

impl SpectralField {
    pub fn zeros(grid: Grid, space: Space) -> Self {
        SpectralField {
            grid,
            space,
            values: vec![Complex64::default(); grid.len()],
            warnings: Vec::new(),
        }
    }

    pub fn from_values(grid: Grid, space: Space, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "value buffer has {} entries, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(SpectralField {
            grid,
            space,
            values,
            warnings: Vec::new(),
        })
    }

    /// Build a physical-space field by evaluating f at every node.
    pub fn from_fn_physical(grid: Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let n = grid.dim();
        let mut idx = [0usize; 3];
        let mut x = [0.0f64; 3];
        let values = (0..grid.len())
            .map(|lin| {
                grid.unravel(lin, &mut idx[..n]);
                for a in 0..n {
                    x[a] = grid.x_of_index(idx[a]);
                }
                f(&x[..n])
            })
            .collect();
        SpectralField {
            grid,
            space: Space::Physical,
            values,
            warnings: Vec::new(),
        }
    }

    /// Plane wave c * e^{2 pi i k.x / L} sampled on the grid (physical space).
    pub fn plane_wave(grid: Grid, k: &[i64], amplitude: Complex64) -> Result<Self> {
        if k.len() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "wave vector has {} components, grid dimension is {}",
                k.len(),
                grid.dim()
            )));
        }
        let m = grid.points_per_axis() as i64;
        let half = m / 2;
        for &ka in k {
            if !(-half..half).contains(&ka) {
                return Err(Error::param(
                    "k",
                    format!("mode {ka} outside representable range [{}, {})", -half, half),
                ));
            }
        }
        let n = grid.dim();
        let mut idx = [0usize; 3];
        let values = (0..grid.len())
            .map(|lin| {
                grid.unravel(lin, &mut idx[..n]);
                let mut phase = 0.0;
                for a in 0..n {
                    phase += k[a] as f64 * idx[a] as f64 / m as f64;
                }
                amplitude * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase)
            })
            .collect();
        Ok(SpectralField {
            grid,
            space: Space::Physical,
            values,
            warnings: Vec::new(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn expect_space(&self, expected: Space) -> Result<()> {
        if self.space != expected {
            return Err(Error::WrongSpace {
                expected,
                found: self.space,
            });
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Physical -> frequency. Errors if already in frequency space.
    pub fn forward_transform(&self) -> Result<SpectralField> {
        self.expect_space(Space::Physical)?;
        let mut out = self.clone();
        out.forward_in_place();
        Ok(out)
    }

    /// Frequency -> physical. Errors if already in physical space.
    pub fn inverse_transform(&self) -> Result<SpectralField> {
        self.expect_space(Space::Frequency)?;
        let mut out = self.clone();
        out.inverse_in_place();
        Ok(out)
    }

    pub(crate) fn forward_in_place(&mut self) {
        debug_assert_eq!(self.space, Space::Physical);
        dft_all_axes(&mut self.values, &self.grid, true);
        let w = self.grid.cell_volume();
        for v in &mut self.values {
            *v *= w;
        }
        self.space = Space::Frequency;
    }

    pub(crate) fn inverse_in_place(&mut self) {
        debug_assert_eq!(self.space, Space::Frequency);
        dft_all_axes(&mut self.values, &self.grid, false);
        let w = self.grid.freq_cell_volume();
        for v in &mut self.values {
            *v *= w;
        }
        self.space = Space::Physical;
    }

    /// Return a copy in the requested space (no-op clone if already there).
    pub fn to_space(&self, target: Space) -> SpectralField {
        if self.space == target {
            self.clone()
        } else {
            let mut out = self.clone();
            match target {
                Space::Frequency => out.forward_in_place(),
                Space::Physical => out.inverse_in_place(),
            }
            out
        }
    }

    /// Direct O(M^{2n}) evaluation of the forward transform, for
    /// cross-validating the FFT path. Refuses grids above
    /// `DFT_ORACLE_MAX_POINTS` total nodes.
    pub fn dft_oracle(&self) -> Result<SpectralField> {
        self.expect_space(Space::Physical)?;
        let total = self.grid.len();
        if total > DFT_ORACLE_MAX_POINTS {
            return Err(Error::ResourceGuard(format!(
                "direct transform is O(M^2n); {total} nodes exceeds the {DFT_ORACLE_MAX_POINTS}-node cap"
            )));
        }
        let n = self.grid.dim();
        let m = self.grid.points_per_axis();
        let w = self.grid.cell_volume();
        let mut out = vec![Complex64::default(); total];
        let mut ki = [0usize; 3];
        let mut ji = [0usize; 3];
        for (kl, slot) in out.iter_mut().enumerate() {
            self.grid.unravel(kl, &mut ki[..n]);
            let mut acc = Complex64::default();
            for (jl, &v) in self.values.iter().enumerate() {
                self.grid.unravel(jl, &mut ji[..n]);
                let mut phase = 0.0;
                for a in 0..n {
                    // e^{-2 pi i j k / M}; signed k and raw index agree mod M.
                    phase += ji[a] as f64 * ki[a] as f64 / m as f64;
                }
                acc += v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * phase);
            }
            *slot = acc * w;
        }
        SpectralField::from_values(self.grid, Space::Frequency, out)
    }

    /// Largest |self - other| over all nodes (both must share grid and space).
    pub fn max_abs_diff(&self, other: &SpectralField) -> Result<f64> {
        self.same_grid(other)?;
        if self.space != other.space {
            return Err(Error::WrongSpace {
                expected: self.space,
                found: other.space,
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Write the field in the binary snapshot layout:
    /// magic "IMLB", version u32, n u32, M u32, L_box f64, space tag u8,
    /// then M^n little-endian (re, im) f64 pairs in storage order.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(4 + 4 + 4 + 4 + 8 + 1 + self.values.len() * 16);
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.grid.dim() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.grid.points_per_axis() as u32).to_le_bytes());
        buf.extend_from_slice(&self.grid.box_side().to_le_bytes());
        buf.push(match self.space {
            Space::Physical => 0,
            Space::Frequency => 1,
        });
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn read_snapshot(path: &Path) -> Result<SpectralField> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 25 {
            return Err(Error::SnapshotFormat("file shorter than header".into()));
        }
        if &bytes[0..4] != SNAPSHOT_MAGIC {
            return Err(Error::SnapshotFormat(format!(
                "bad magic {:?}, expected {:?}",
                &bytes[0..4],
                SNAPSHOT_MAGIC
            )));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != SNAPSHOT_VERSION {
            return Err(Error::SnapshotFormat(format!(
                "unsupported version {version}, expected {SNAPSHOT_VERSION}"
            )));
        }
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let m = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let l_box = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let space = match bytes[24] {
            0 => Space::Physical,
            1 => Space::Frequency,
            t => {
                return Err(Error::SnapshotFormat(format!("unknown space tag {t}")));
            }
        };
        let grid = Grid::new(n, m, l_box)?;
        let expected = 25 + grid.len() * 16;
        if bytes.len() != expected {
            return Err(Error::SnapshotFormat(format!(
                "payload is {} bytes, header implies {}",
                bytes.len(),
                expected
            )));
        }
        let mut values = Vec::with_capacity(grid.len());
        for chunk in bytes[25..].chunks_exact(16) {
            let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
            let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
            values.push(Complex64::new(re, im));
        }
        SpectralField::from_values(grid, space, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_field(n: u32, m: u32, l: f64) -> SpectralField {
        let grid = Grid::new(n, m, l).unwrap();
        SpectralField::from_fn_physical(grid, |x| {
            let s: f64 = x.iter().sum();
            Complex64::new((2.1 * s).sin() + 0.3, (1.3 * s).cos() * 0.7)
        })
    }

    #[test]
    fn roundtrip_recovers_field() {
        for (n, m, l) in [(1, 64, 5.0), (2, 16, 2.5), (3, 8, 1.0)] {
            let f = sample_field(n, m, l);
            let back = f.forward_transform().unwrap().inverse_transform().unwrap();
            assert!(f.max_abs_diff(&back).unwrap() < 1e-12 * f.max_abs().max(1.0));
        }
    }

    #[test]
    fn fft_matches_direct_sum() {
        for (n, m, l) in [(1, 16, 3.0), (2, 8, 1.5), (3, 8, 2.0)] {
            let f = sample_field(n, m, l);
            let fast = f.forward_transform().unwrap();
            let slow = f.dft_oracle().unwrap();
            let scale = fast.max_abs().max(1e-30);
            assert!(
                fast.max_abs_diff(&slow).unwrap() / scale < 1e-12,
                "n={n} m={m}"
            );
        }
    }

    #[test]
    fn dft_oracle_refuses_large_grids() {
        let grid = Grid::new(3, 32, 1.0).unwrap();
        let f = SpectralField::zeros(grid, Space::Physical);
        match f.dft_oracle() {
            Err(Error::ResourceGuard(_)) => {}
            other => panic!("expected resource guard, got {other:?}"),
        }
    }

    #[test]
    fn plane_wave_transforms_to_single_mode() {
        let grid = Grid::new(2, 16, 4.0).unwrap();
        let amp = Complex64::new(0.8, -0.3);
        let f = SpectralField::plane_wave(grid, &[3, -5], amp).unwrap();
        let hat = f.forward_transform().unwrap();
        // Coefficient of the (3, -5) mode is amp * L^n under this convention.
        let m = grid.points_per_axis();
        let target = (3 * m + (m as i64 - 5) as usize) * 1; // axis0 index 3, axis1 index M-5
        let expect = amp * grid.box_side().powi(2);
        for (i, v) in hat.values().iter().enumerate() {
            if i == target {
                assert!((v - expect).norm() < 1e-9 * expect.norm());
            } else {
                assert!(v.norm() < 1e-9 * expect.norm(), "leak at {i}: {v}");
            }
        }
    }

    #[test]
    fn transform_direction_guards() {
        let f = sample_field(1, 16, 1.0);
        let hat = f.forward_transform().unwrap();
        assert!(hat.forward_transform().is_err());
        assert!(f.inverse_transform().is_err());
    }

    #[test]
    fn snapshot_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.bin");
        let f = sample_field(3, 8, 2.0).forward_transform().unwrap();
        f.write_snapshot(&path).unwrap();
        let g = SpectralField::read_snapshot(&path).unwrap();
        assert_eq!(f.space(), g.space());
        assert_eq!(f.grid(), g.grid());
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn snapshot_rejects_corrupt_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(SpectralField::read_snapshot(&path).is_err());
        let f = sample_field(1, 8, 1.0);
        f.write_snapshot(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        match SpectralField::read_snapshot(&path) {
            Err(Error::SnapshotFormat(msg)) => assert!(msg.contains("magic")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn parseval_holds_between_spaces() {
        let f = sample_field(2, 16, 3.0);
        let hat = f.forward_transform().unwrap();
        let phys: f64 = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>()
            * f.grid().cell_volume();
        let freq: f64 = hat.values().iter().map(|v| v.norm_sqr()).sum::<f64>()
            * hat.grid().freq_cell_volume();
        assert!((phys - freq).abs() < 1e-12 * phys);
    }
}
