//! Transverse fields carrying orbital angular momentum, their intensity
//! images, and the image comparison metrics (visibility, similarity).
//!
//! Pixel `(row, col)` sits at
//! `x = (col - (width-1)/2) * pitch`, `y = ((height-1)/2 - row) * pitch`,
//! so the grid center falls between pixels on even-sized grids and the
//! azimuth `atan2(y, x)` is counter-clockwise as the image is displayed.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseGrid {
    pub width: usize,
    pub height: usize,
    /// Millimetres per pixel.
    pub pitch_mm: f64,
}

impl Default for TransverseGrid {
    fn default() -> Self {
        TransverseGrid { width: 128, height: 128, pitch_mm: 0.02 }
    }
}

impl TransverseGrid {
    pub fn new(width: usize, height: usize, pitch_mm: f64) -> Result<Self> {
        let grid = TransverseGrid { width, height, pitch_mm };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid(format!(
                "grid must be non-empty, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.pitch_mm > 0.0 && self.pitch_mm.is_finite()) {
            return Err(Error::invalid(format!("grid pitch must be > 0, got {}", self.pitch_mm)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Center in pixel coordinates `(col, row)`.
    pub fn center(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }

    /// Physical coordinates `(x, y)` in mm of pixel `(row, col)`.
    pub fn position(&self, row: usize, col: usize) -> (f64, f64) {
        let (cx, cy) = self.center();
        ((col as f64 - cx) * self.pitch_mm, (cy - row as f64) * self.pitch_mm)
    }

    /// Row closest to the grid center (the upper one on even grids).
    pub fn center_row(&self) -> usize {
        (self.height - 1) / 2
    }

    /// x coordinate in mm of every column.
    pub fn column_positions(&self) -> Vec<f64> {
        let (cx, _) = self.center();
        (0..self.width).map(|c| (c as f64 - cx) * self.pitch_mm).collect()
    }
}

/// Complex amplitude on a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    pub grid: TransverseGrid,
    pub amplitude: Vec<Complex64>,
    pub oam: Option<i32>,
}

impl SpatialField {
    pub fn new(grid: TransverseGrid, amplitude: Vec<Complex64>, oam: Option<i32>) -> Result<Self> {
        grid.validate()?;
        if amplitude.len() != grid.len() {
            return Err(Error::invalid(format!(
                "amplitude has {} entries, grid has {}",
                amplitude.len(),
                grid.len()
            )));
        }
        Ok(SpatialField { grid, amplitude, oam })
    }

    pub fn power(&self) -> f64 {
        self.amplitude.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other> = sum conj(self) * other`.
    pub fn overlap(&self, other: &SpatialField) -> Result<Complex64> {
        if self.grid.width != other.grid.width || self.grid.height != other.grid.height {
            return Err(Error::invalid("overlap of fields on different grids"));
        }
        Ok(self.amplitude.iter().zip(&other.amplitude).map(|(a, b)| a.conj() * b).sum())
    }

    /// Pointwise `alpha * self + beta * other`.
    pub fn superpose(&self, alpha: Complex64, other: &SpatialField, beta: Complex64) -> Result<SpatialField> {
        if self.grid != other.grid {
            return Err(Error::invalid("superposition of fields on different grids"));
        }
        let amplitude = self.amplitude.iter().zip(&other.amplitude).map(|(a, b)| alpha * a + beta * b).collect();
        Ok(SpatialField { grid: self.grid, amplitude, oam: None })
    }
}

/// Non-negative gray-scale image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    pub grid: TransverseGrid,
    pub pixels: Vec<f64>,
}

impl IntensityImage {
    pub fn new(grid: TransverseGrid, pixels: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if pixels.len() != grid.len() {
            return Err(Error::invalid(format!("image has {} pixels, grid has {}", pixels.len(), grid.len())));
        }
        if let Some(bad) = pixels.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid(format!("image pixels must be finite and >= 0, found {bad}")));
        }
        Ok(IntensityImage { grid, pixels })
    }

    pub fn uniform(grid: TransverseGrid, value: f64) -> Result<Self> {
        IntensityImage::new(grid, vec![value; grid.len()])
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.grid.width + col]
    }

    pub fn total(&self) -> f64 {
        self.pixels.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(0.0, f64::max)
    }

    /// Bilinear sample at fractional pixel coordinates; zero outside.
    pub fn sample(&self, col: f64, row: f64) -> f64 {
        let (w, h) = (self.grid.width as isize, self.grid.height as isize);
        let c0 = col.floor();
        let r0 = row.floor();
        let (fc, fr) = (col - c0, row - r0);
        let (c0, r0) = (c0 as isize, r0 as isize);
        let px = |r: isize, c: isize| {
            if r < 0 || c < 0 || r >= h || c >= w {
                0.0
            } else {
                self.pixels[(r * w + c) as usize]
            }
        };
        px(r0, c0) * (1.0 - fc) * (1.0 - fr)
            + px(r0, c0 + 1) * fc * (1.0 - fr)
            + px(r0 + 1, c0) * (1.0 - fc) * fr
            + px(r0 + 1, c0 + 1) * fc * fr
    }

    /// Rigid rotation about the grid center by `angle` (counter-clockwise,
    /// radians), bilinearly interpolated.
    pub fn rotated(&self, angle: f64) -> IntensityImage {
        let (cx, cy) = self.grid.center();
        let (s, c) = angle.sin_cos();
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in 0..self.grid.height {
            for col in 0..self.grid.width {
                // Output pixel at (x, y) takes the input value at R(-angle)(x, y).
                let x = col as f64 - cx;
                let y = cy - row as f64;
                let xs = c * x + s * y;
                let ys = -s * x + c * y;
                pixels.push(self.sample(xs + cx, cy - ys));
            }
        }
        IntensityImage { grid: self.grid, pixels }
    }
}

/// Laguerre-Gauss mode with radial index 0:
/// `a ∝ (r/w)^|l| exp(-r²/w²) exp(i l φ)`, normalized to unit power.
pub fn lg_mode(l: i32, waist_mm: f64, grid: TransverseGrid) -> Result<SpatialField> {
    grid.validate()?;
    if !(waist_mm > 0.0 && waist_mm.is_finite()) {
        return Err(Error::invalid(format!("waist must be > 0, got {waist_mm}")));
    }
    let order = l.unsigned_abs() as i32;
    let mut amplitude = Vec::with_capacity(grid.len());
    for row in 0..grid.height {
        for col in 0..grid.width {
            let (x, y) = grid.position(row, col);
            let rho = (x * x + y * y).sqrt() / waist_mm;
            let radial = rho.powi(order) * (-rho * rho).exp();
            let phase = l as f64 * y.atan2(x);
            amplitude.push(Complex64::from_polar(radial, phase));
        }
    }
    let norm = amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::invalid("mode has no power on this grid"));
    }
    amplitude.iter_mut().for_each(|a| *a /= norm);
    Ok(SpatialField { grid, amplitude, oam: Some(l) })
}

/// Radius in mm at which `lg_mode(l, waist)` has maximum intensity.
pub fn lg_ring_radius(l: i32, waist_mm: f64) -> f64 {
    waist_mm * (l.unsigned_abs() as f64 / 2.0).sqrt()
}

/// Phase-only spiral plate of charge `l`.
pub fn apply_spiral_phase(field: &SpatialField, l: i32) -> SpatialField {
    let grid = field.grid;
    let mut amplitude = field.amplitude.clone();
    if l != 0 {
        for row in 0..grid.height {
            for col in 0..grid.width {
                let (x, y) = grid.position(row, col);
                amplitude[row * grid.width + col] *= Complex64::from_polar(1.0, l as f64 * y.atan2(x));
            }
        }
    }
    SpatialField { grid, amplitude, oam: Some(field.oam.unwrap_or(0) + l) }
}

pub fn intensity(field: &SpatialField) -> IntensityImage {
    IntensityImage {
        grid: field.grid,
        pixels: field.amplitude.iter().map(|a| a.norm_sqr()).collect(),
    }
}

/// One row of the image: the fiber-tip scan along the transverse direction.
pub fn transverse_scan(image: &IntensityImage, row: usize) -> Result<Vec<f64>> {
    if row >= image.grid.height {
        return Err(Error::invalid(format!("row {row} out of range for height {}", image.grid.height)));
    }
    let w = image.grid.width;
    Ok(image.pixels[row * w..(row + 1) * w].to_vec())
}

/// `(max - min) / (max + min)` of a non-negative profile.
pub fn visibility(profile: &[f64]) -> Result<f64> {
    if profile.is_empty() {
        return Err(Error::invalid("visibility of an empty profile"));
    }
    if let Some(bad) = profile.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("profile entries must be finite and >= 0, found {bad}")));
    }
    let max = profile.iter().copied().fold(f64::MIN, f64::max);
    let min = profile.iter().copied().fold(f64::MAX, f64::min);
    if max == 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    Ok((max - min) / (max + min))
}

/// Normalized inner product of two gray-scale images.
pub fn similarity(a: &IntensityImage, b: &IntensityImage) -> Result<f64> {
    if a.grid.width != b.grid.width || a.grid.height != b.grid.height {
        return Err(Error::invalid(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            a.grid.width, a.grid.height, b.grid.width, b.grid.height
        )));
    }
    similarity_of(&a.pixels, &b.pixels)
}

/// [`similarity`] on raw gray-scale values (e.g. two scanned profiles).
pub fn similarity_of(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid("gray-scale values must be finite and >= 0"));
    }
    let aa: f64 = a.iter().map(|v| v * v).sum();
    let bb: f64 = b.iter().map(|v| v * v).sum();
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::UndefinedSimilarity("an image has no positive entry".into()));
    }
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((ab / (aa * bb).sqrt()).clamp(0.0, 1.0))
}

/// Separable convolution with a normalized Gaussian of width `sigma_mm`,
/// truncated at 4σ and renormalized. Edges are mirrored (half-sample
/// symmetric), which keeps both total power and uniform images unchanged.
pub fn gaussian_blur(image: &IntensityImage, sigma_mm: f64) -> IntensityImage {
    let sigma_px = sigma_mm / image.grid.pitch_mm;
    let half = (4.0 * sigma_px).floor() as isize;
    if !(sigma_px > 0.0) || half == 0 {
        return image.clone();
    }
    let mut kernel: Vec<f64> = (-half..=half).map(|k| (-0.5 * (k as f64 / sigma_px).powi(2)).exp()).collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);

    let (w, h) = (image.grid.width, image.grid.height);
    let mut tmp = vec![0.0; image.pixels.len()];
    for r in 0..h {
        for c in 0..w {
            let acc: f64 = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * image.pixels[r * w + mirror(c as isize + i as isize - half, w)])
                .sum();
            tmp[r * w + c] = acc;
        }
    }
    let mut out = vec![0.0; image.pixels.len()];
    for r in 0..h {
        for c in 0..w {
            let acc: f64 =
                kernel.iter().enumerate().map(|(i, k)| k * tmp[mirror(r as isize + i as isize - half, h) * w + c]).sum();
            out[r * w + c] = acc;
        }
    }
    IntensityImage { grid: image.grid, pixels: out }
}

fn mirror(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - 1 - m }) as usize
}

/// Intensity sampled on a circle of `radius_mm` about the grid center,
/// starting at azimuth 0 and going counter-clockwise.
pub fn azimuthal_profile(image: &IntensityImage, radius_mm: f64, samples: usize) -> Vec<f64> {
    let (cx, cy) = image.grid.center();
    let r = radius_mm / image.grid.pitch_mm;
    (0..samples)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / samples as f64;
            image.sample(cx + r * phi.cos(), cy - r * phi.sin())
        })
        .collect()
}

/// Number of lobes in a closed (circular) profile, counted as upward
/// crossings of the profile mean. A flat profile has zero lobes.
pub fn count_lobes(profile: &[f64]) -> usize {
    if profile.is_empty() {
        return 0;
    }
    let mean = profile.iter().sum::<f64>() / profile.len() as f64;
    let max = profile.iter().copied().fold(f64::MIN, f64::max);
    let min = profile.iter().copied().fold(f64::MAX, f64::min);
    if max - min <= 1e-9 * max.abs().max(1e-300) {
        return 0;
    }
    let above: Vec<bool> = profile.iter().map(|v| *v > mean).collect();
    (0..above.len())
        .filter(|&i| above[i] && !above[(i + above.len() - 1) % above.len()])
        .count()
}

/// `position_mm,value` rows.
pub fn profile_csv(positions_mm: &[f64], values: &[f64]) -> String {
    let mut out = String::from("position_mm,value\n");
    for (x, v) in positions_mm.iter().zip(values) {
        let _ = writeln!(out, "{x},{v}");
    }
    out
}
