//! Guided SH-wave scattering model for plate thinning.
//!
//! The forward map takes a defect depth profile d(x) to a reflection
//! coefficient spectrum
//!
//! ```text
//!     C(xi) = i (xi^2 + k^2) / (2 b xi) * integral d(x) e^{2 i xi x} dx
//! ```
//!
//! with k the bulk shear wavenumber at the frequency where mode n has
//! modal wavenumber xi. The integral makes C(xi) and d(x) a Fourier pair
//! in kappa = 2 xi, so the inverse map (`wnst_invert`) divides out the
//! prefactor, extends the spectrum Hermitianly and applies an inverse
//! DFT. The kappa = 0 bin is never measured (the prefactor is singular
//! there), so it is set to zero and reconstructions come back mean-free.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Plate and guided-mode parameters. The plate has total thickness `2 *
/// half_thickness`; mode n has cutoff wavenumber `n * pi / (2 *
/// half_thickness)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateSpec {
    /// Half the plate thickness b (m).
    pub half_thickness: f64,
    /// Shear wave speed c_T (m/s).
    pub shear_speed: f64,
    /// Guided SH mode index n (0 = fundamental, nondispersive).
    pub mode_index: u32,
}

impl PlateSpec {
    pub fn new(half_thickness: f64, shear_speed: f64, mode_index: u32) -> Result<Self> {
        if half_thickness <= 0.0 || !half_thickness.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "half_thickness must be > 0, got {half_thickness}"
            )));
        }
        if shear_speed <= 0.0 || !shear_speed.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "shear_speed must be > 0, got {shear_speed}"
            )));
        }
        Ok(Self { half_thickness, shear_speed, mode_index })
    }

    /// Fundamental-mode plate: the standard reconstruction carrier.
    pub fn sh0(half_thickness: f64, shear_speed: f64) -> Result<Self> {
        Self::new(half_thickness, shear_speed, 0)
    }

    /// Cutoff wavenumber beta_n = n pi / (2b) (rad/m).
    pub fn cutoff_beta(&self) -> f64 {
        self.mode_index as f64 * std::f64::consts::PI / (2.0 * self.half_thickness)
    }

    /// Bulk shear wavenumber k at the frequency where this mode has modal
    /// wavenumber `xi`: k^2 = xi^2 + beta_n^2.
    pub fn bulk_wavenumber(&self, xi: f64) -> f64 {
        if self.mode_index == 0 {
            xi
        } else {
            let beta = self.cutoff_beta();
            (xi * xi + beta * beta).sqrt()
        }
    }
}

/// Modal wavenumber xi_n = sqrt(k^2 - beta_n^2) at angular frequency
/// `angular_frequency`, with k = omega / c_T.
pub fn dispersion(plate: &PlateSpec, angular_frequency: f64) -> Result<f64> {
    if angular_frequency <= 0.0 || !angular_frequency.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "angular_frequency must be > 0, got {angular_frequency}"
        )));
    }
    let k = angular_frequency / plate.shear_speed;
    if plate.mode_index == 0 {
        return Ok(k);
    }
    let beta = plate.cutoff_beta();
    if k <= beta {
        return Err(Error::EvanescentMode { mode: plate.mode_index, k, beta });
    }
    Ok((k * k - beta * beta).sqrt())
}

/// Uniform spatial sampling of the detection range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub origin: f64,
    pub spacing: f64,
    pub point_count: usize,
}

impl SpatialGrid {
    pub fn new(origin: f64, spacing: f64, point_count: usize) -> Result<Self> {
        if spacing <= 0.0 || !spacing.is_finite() {
            return Err(Error::InvalidParameter(format!("spacing must be > 0, got {spacing}")));
        }
        if point_count < 2 {
            return Err(Error::InvalidParameter(format!(
                "point_count must be >= 2, got {point_count}"
            )));
        }
        Ok(Self { origin, spacing, point_count })
    }

    /// Grid spanning `[origin, origin + extent]` inclusive with `point_count` points.
    pub fn spanning(origin: f64, extent: f64, point_count: usize) -> Result<Self> {
        if point_count < 2 {
            return Err(Error::InvalidParameter(format!(
                "point_count must be >= 2, got {point_count}"
            )));
        }
        Self::new(origin, extent / (point_count - 1) as f64, point_count)
    }

    pub fn x(&self, index: usize) -> f64 {
        self.origin + index as f64 * self.spacing
    }

    /// Distance from the first to the last grid point.
    pub fn extent(&self) -> f64 {
        (self.point_count - 1) as f64 * self.spacing
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.point_count).map(move |i| self.x(i))
    }
}

/// Defect depth profile sampled on a spatial grid.
///
/// Geometry-sampled profiles have nonnegative depths; profiles produced
/// by `wnst_invert` are mean-free and may dip below zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectProfile {
    pub grid: SpatialGrid,
    pub depths: Vec<f64>,
}

impl DefectProfile {
    pub fn new(grid: SpatialGrid, depths: Vec<f64>) -> Result<Self> {
        if depths.len() != grid.point_count {
            return Err(Error::GridMismatch(format!(
                "depth vector has {} entries for a {}-point grid",
                depths.len(),
                grid.point_count
            )));
        }
        Ok(Self { grid, depths })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        let depths = vec![0.0; grid.point_count];
        Self { grid, depths }
    }

    /// Export as CSV with header `x_m,depth_m`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("x_m,depth_m\n");
        for (x, d) in self.grid.positions().zip(&self.depths) {
            writeln!(out, "{x},{d}").expect("string write");
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Strictly increasing positive wavenumbers (rad/m). The DC point is
/// excluded: the reflection prefactor is singular at xi = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavenumberGrid {
    values: Vec<f64>,
}

impl WavenumberGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        for &v in &values {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::SingularWavenumber(v));
            }
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "wavenumbers must be strictly increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    /// The canonical sweep for a spatial grid: xi_j = pi j / (N dx) for
    /// j = 1..=N/2, so that kappa = 2 xi lands exactly on the grid's
    /// positive DFT bins and `wnst_invert` is an exact inverse DFT.
    pub fn matched_to(grid: &SpatialGrid) -> Self {
        let n = grid.point_count;
        let period = n as f64 * grid.spacing;
        let values = (1..=n / 2)
            .map(|j| std::f64::consts::PI * j as f64 / period)
            .collect();
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Complex reflection coefficients sampled on a wavenumber grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSpectrum {
    pub grid: WavenumberGrid,
    pub coefficients: Vec<Complex64>,
}

impl ReflectionSpectrum {
    pub fn new(grid: WavenumberGrid, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a {}-point wavenumber grid",
                coefficients.len(),
                grid.len()
            )));
        }
        if coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite reflection coefficient".into()));
        }
        Ok(Self { grid, coefficients })
    }

    /// Export as CSV with header `xi_rad_per_m,re,im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("xi_rad_per_m,re,im\n");
        for (xi, c) in self.grid.values().iter().zip(&self.coefficients) {
            writeln!(out, "{xi},{},{}", c.re, c.im).expect("string write");
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Import a spectrum written by [`ReflectionSpectrum::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some("xi_rad_per_m,re,im") => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header 'xi_rad_per_m,re,im', found {other:?}"
                )))
            }
        }
        let mut xis = Vec::new();
        let mut coefficients = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected 3 fields, found {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
            };
            xis.push(parse(fields[0])?);
            coefficients.push(Complex64::new(parse(fields[1])?, parse(fields[2])?));
        }
        Self::new(WavenumberGrid::new(xis)?, coefficients)
    }
}

/// Reflection prefactor i (xi^2 + k^2) / (2 b xi).
fn prefactor(plate: &PlateSpec, xi: f64) -> Result<Complex64> {
    if xi <= 0.0 || xi.is_nan() {
        return Err(Error::SingularWavenumber(xi));
    }
    let k = plate.bulk_wavenumber(xi);
    Ok(Complex64::new(0.0, (xi * xi + k * k) / (2.0 * plate.half_thickness * xi)))
}

/// Born-model reflection spectrum of a depth profile: trapezoid
/// quadrature of d(x) e^{2 i xi x} on the profile grid, times the modal
/// prefactor. Exactly linear in the depth vector.
pub fn forward_reflection(
    defect: &DefectProfile,
    plate: &PlateSpec,
    grid: &WavenumberGrid,
) -> Result<ReflectionSpectrum> {
    let sg = &defect.grid;
    let n = sg.point_count;
    let dx = sg.spacing;
    let mut coefficients = Vec::with_capacity(grid.len());
    for &xi in grid.values() {
        let pre = prefactor(plate, xi)?;
        let mut integral = Complex64::new(0.0, 0.0);
        for (p, &d) in defect.depths.iter().enumerate() {
            let w = if p == 0 || p == n - 1 { 0.5 * dx } else { dx };
            let phase = 2.0 * xi * sg.x(p);
            integral += Complex64::from_polar(w * d, phase);
        }
        coefficients.push(pre * integral);
    }
    ReflectionSpectrum::new(grid.clone(), coefficients)
}

/// Closed-form reflection coefficient of an ideal rectangular defect of
/// depth `d0`, width `width`, centered at `center`:
/// i (xi^2 + k^2) / (2 b xi) * d0 e^{2 i xi center} sin(xi width) / xi.
pub fn analytic_rectangle_reflection(
    d0: f64,
    width: f64,
    center: f64,
    plate: &PlateSpec,
    xi: f64,
) -> Result<Complex64> {
    if width <= 0.0 || !width.is_finite() {
        return Err(Error::InvalidParameter(format!("width must be > 0, got {width}")));
    }
    let pre = prefactor(plate, xi)?;
    let envelope = d0 * (xi * width).sin() / xi;
    Ok(pre * Complex64::from_polar(1.0, 2.0 * xi * center) * envelope)
}

/// Wavenumber-space inversion: recover the (mean-free) depth profile
/// from a reflection spectrum sampled on the grid's Fourier bins.
pub fn wnst_invert(
    spectrum: &ReflectionSpectrum,
    plate: &PlateSpec,
    target: &SpatialGrid,
) -> Result<DefectProfile> {
    wnst_invert_detailed(spectrum, plate, target).map(|(profile, _)| profile)
}

/// As [`wnst_invert`], also returning the relative imaginary residue of
/// the inverse transform (norm of the discarded imaginary part over the
/// norm of the real part). Hermitian extension keeps it at rounding level.
pub fn wnst_invert_detailed(
    spectrum: &ReflectionSpectrum,
    plate: &PlateSpec,
    target: &SpatialGrid,
) -> Result<(DefectProfile, f64)> {
    let n = target.point_count;
    let dx = target.spacing;
    let period = n as f64 * dx;
    let half = n / 2;

    // Locate each required Fourier bin xi_j = pi j / (N dx) in the spectrum.
    let xis = spectrum.grid.values();
    let mut bins = Vec::with_capacity(half);
    for j in 1..=half {
        let expected = std::f64::consts::PI * j as f64 / period;
        let tol = 1e-9 * expected;
        let idx = xis.partition_point(|&v| v < expected - tol);
        if idx >= xis.len() || (xis[idx] - expected).abs() > tol {
            return Err(Error::CoverageError(format!(
                "missing wavenumber bin j={j} (xi = {expected} rad/m) for a {n}-point grid"
            )));
        }
        bins.push(idx);
    }

    // Divide out the prefactor and compensate the grid origin phase; the
    // result is the DFT of the origin-shifted profile.
    let mut f = vec![Complex64::new(0.0, 0.0); n];
    for (j, &idx) in bins.iter().enumerate() {
        let j = j + 1;
        let xi = xis[idx];
        let pre = prefactor(plate, xi)?;
        let d = spectrum.coefficients[idx] / pre;
        let g = d * Complex64::from_polar(1.0, -2.0 * xi * target.origin);
        if n.is_multiple_of(2) && j == half {
            // Nyquist bin is its own conjugate partner; realness forces Re only.
            f[j] = Complex64::new(g.re, 0.0);
        } else {
            f[j] = g;
            f[n - j] = g.conj();
        }
    }
    // f[0] stays 0: the DC bin is unmeasured, reconstructions are mean-free.

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    fft.process(&mut f);

    let scale = 1.0 / (n as f64 * dx);
    let depths: Vec<f64> = f.iter().map(|c| c.re * scale).collect();
    let re_norm: f64 = depths.iter().map(|v| v * v).sum::<f64>().sqrt();
    let im_norm: f64 = f.iter().map(|c| (c.im * scale).powi(2)).sum::<f64>().sqrt();
    let residue = if re_norm > 0.0 { im_norm / re_norm } else { im_norm };

    Ok((DefectProfile { grid: *target, depths }, residue))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn test_plate() -> PlateSpec {
        PlateSpec::sh0(0.005, 3200.0).unwrap()
    }

    fn test_grid() -> SpatialGrid {
        SpatialGrid::spanning(0.0, 0.1, 100).unwrap()
    }

    #[test]
    fn dispersion_sh0_is_k() {
        let plate = test_plate();
        let omega = plate.shear_speed * 1000.0;
        assert_eq!(dispersion(&plate, omega).unwrap(), 1000.0);
    }

    #[test]
    fn dispersion_sh1_matches_root() {
        // k = 2 beta_1 gives xi = beta_1 sqrt(3).
        let b = 0.005;
        let plate = PlateSpec::new(b, 3200.0, 1).unwrap();
        let beta = PI / (2.0 * b);
        let k = 2.0 * beta;
        let omega = k * plate.shear_speed;
        let xi = dispersion(&plate, omega).unwrap();
        let expected = beta * 3.0_f64.sqrt();
        assert!((xi - expected).abs() < 1e-9 * expected);
        // Independent check: xi^2 + beta^2 = k^2.
        assert!((xi * xi + beta * beta - k * k).abs() < 1e-6 * k * k);
    }

    #[test]
    fn dispersion_evanescent_below_cutoff() {
        let b = 0.005;
        let plate = PlateSpec::new(b, 3200.0, 1).unwrap();
        let beta = PI / (2.0 * b);
        let omega = 0.5 * beta * plate.shear_speed;
        match dispersion(&plate, omega) {
            Err(Error::EvanescentMode { mode: 1, .. }) => {}
            other => panic!("expected EvanescentMode, got {other:?}"),
        }
    }

    #[test]
    fn forward_of_zero_profile_is_zero() {
        let grid = test_grid();
        let wgrid = WavenumberGrid::matched_to(&grid);
        let spec = forward_reflection(&DefectProfile::zeros(grid), &test_plate(), &wgrid).unwrap();
        assert!(spec.coefficients.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn forward_is_linear() {
        let grid = test_grid();
        let wgrid = WavenumberGrid::matched_to(&grid);
        let plate = test_plate();
        let d1: Vec<f64> = (0..100).map(|i| 1e-3 * ((i as f64) * 0.11).sin().abs()).collect();
        let d2: Vec<f64> = (0..100).map(|i| 1e-3 * ((i as f64) * 0.07).cos().abs()).collect();
        let mix: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| 0.3 * a + 0.7 * b).collect();
        let s1 = forward_reflection(&DefectProfile::new(grid, d1).unwrap(), &plate, &wgrid).unwrap();
        let s2 = forward_reflection(&DefectProfile::new(grid, d2).unwrap(), &plate, &wgrid).unwrap();
        let sm = forward_reflection(&DefectProfile::new(grid, mix).unwrap(), &plate, &wgrid).unwrap();
        let scale = sm.coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for ((a, b), m) in s1.coefficients.iter().zip(&s2.coefficients).zip(&sm.coefficients) {
            let lin = 0.3 * a + 0.7 * b;
            assert!((lin - m).norm() <= 1e-12 * scale);
        }
    }

    /// Rectangle with midpoint-sampled edges: the trapezoid rule
    /// integrates its piecewise-linear interpolant exactly, which differs
    /// from the ideal rectangle transform by (sin(xi dx)/(xi dx))^2 - 1,
    /// about (xi dx)^2 / 3. At 200 points per width and xi*width <= 0.25
    /// that is below 1e-6.
    fn midpoint_rectangle(
        d0: f64,
        width: f64,
        center: f64,
        points_per_width: usize,
    ) -> DefectProfile {
        let dx = width / points_per_width as f64;
        let total = 2 * points_per_width + 1;
        let origin = center - width;
        let grid = SpatialGrid::new(origin, dx, total).unwrap();
        let a = points_per_width / 2;
        let bidx = a + points_per_width;
        let mut depths = vec![0.0; total];
        for d in depths.iter_mut().take(bidx + 1).skip(a) {
            *d = d0;
        }
        depths[a] = d0 / 2.0;
        depths[bidx] = d0 / 2.0;
        DefectProfile::new(grid, depths).unwrap()
    }

    #[test]
    fn quadrature_matches_rectangle_closed_form_at_200_points_per_width() {
        let plate = test_plate();
        let width = 0.01;
        let center = 0.05;
        let d0 = 1e-3;
        let profile = midpoint_rectangle(d0, width, center, 200);
        for xiw in [0.1, 0.2, 0.25] {
            let xi = xiw / width;
            let wgrid = WavenumberGrid::new(vec![xi]).unwrap();
            let q = forward_reflection(&profile, &plate, &wgrid).unwrap().coefficients[0];
            let cf = analytic_rectangle_reflection(d0, width, center, &plate, xi).unwrap();
            let rel = (q - cf).norm() / cf.norm();
            assert!(rel < 1e-6, "xi*w = {xiw}: rel error {rel}");
        }
    }

    #[test]
    fn quadrature_matches_closed_form_on_refined_grid() {
        // Generic point d0 = 1 mm, w = 10 mm, X0 = 50 mm, xi = k = 500 rad/m;
        // refine until xi*dx is small enough for 1e-6.
        let plate = test_plate();
        let (d0, width, center, xi) = (1e-3, 0.01, 0.05, 500.0);
        let cf = analytic_rectangle_reflection(d0, width, center, &plate, xi).unwrap();
        let mut last_rel = f64::INFINITY;
        for ppw in [200, 800, 3200] {
            let profile = midpoint_rectangle(d0, width, center, ppw);
            let wgrid = WavenumberGrid::new(vec![xi]).unwrap();
            let q = forward_reflection(&profile, &plate, &wgrid).unwrap().coefficients[0];
            let rel = (q - cf).norm() / cf.norm();
            assert!(rel < last_rel, "refinement must reduce the error");
            last_rel = rel;
        }
        assert!(last_rel < 1e-6, "refined rel error {last_rel}");
    }

    #[test]
    fn rectangle_closed_form_zeroes() {
        let plate = test_plate();
        let zero = analytic_rectangle_reflection(0.0, 0.01, 0.05, &plate, 300.0).unwrap();
        assert_eq!(zero.norm(), 0.0);
        // sin(xi w) = 0 at xi w = pi.
        let xi = PI / 0.01;
        let c = analytic_rectangle_reflection(1e-3, 0.01, 0.05, &plate, xi).unwrap();
        let scale = analytic_rectangle_reflection(1e-3, 0.01, 0.05, &plate, xi * 0.5)
            .unwrap()
            .norm();
        assert!(c.norm() < 1e-12 * scale);
    }

    #[test]
    fn rectangle_closed_form_rejects_nonpositive_xi() {
        let plate = test_plate();
        assert!(matches!(
            analytic_rectangle_reflection(1e-3, 0.01, 0.05, &plate, 0.0),
            Err(Error::SingularWavenumber(_))
        ));
    }

    #[test]
    fn invert_of_zero_spectrum_is_zero() {
        let grid = test_grid();
        let wgrid = WavenumberGrid::matched_to(&grid);
        let coeffs = vec![Complex64::new(0.0, 0.0); wgrid.len()];
        let spec = ReflectionSpectrum::new(wgrid, coeffs).unwrap();
        let profile = wnst_invert(&spec, &test_plate(), &grid).unwrap();
        assert!(profile.depths.iter().all(|&d| d == 0.0));
    }

    /// Interior-supported profiles round-trip to exactly their mean-free
    /// part: the trapezoid quadrature coincides with the DFT that the
    /// inversion undoes bin by bin.
    #[test]
    fn round_trip_recovers_mean_free_part_exactly() {
        let grid = test_grid();
        let wgrid = WavenumberGrid::matched_to(&grid);
        let plate = test_plate();

        // Gaussian bump, support well inside the range.
        let sigma = 5.0 * grid.spacing;
        let depths: Vec<f64> = grid
            .positions()
            .map(|x| 1e-3 * (-((x - 0.05) / sigma).powi(2) / 2.0).exp())
            .collect();
        let mean = depths.iter().sum::<f64>() / depths.len() as f64;
        let profile = DefectProfile::new(grid, depths.clone()).unwrap();
        let spec = forward_reflection(&profile, &plate, &wgrid).unwrap();
        let (rec, residue) = wnst_invert_detailed(&spec, &plate, &grid).unwrap();
        for (r, d) in rec.depths.iter().zip(&depths) {
            assert!((r - (d - mean)).abs() < 1e-12 * 1e-3, "recovered {r} vs {}", d - mean);
        }
        assert!(residue < 1e-9, "imaginary residue {residue}");
    }

    #[test]
    fn rectangle_round_trip_loses_only_the_mean() {
        let grid = test_grid();
        let wgrid = WavenumberGrid::matched_to(&grid);
        let plate = test_plate();
        let mut depths = vec![0.0; 100];
        for d in depths.iter_mut().take(60).skip(40) {
            *d = 1e-3;
        }
        let mean = depths.iter().sum::<f64>() / 100.0;
        let profile = DefectProfile::new(grid, depths.clone()).unwrap();
        let spec = forward_reflection(&profile, &plate, &wgrid).unwrap();
        let rec = wnst_invert(&spec, &plate, &grid).unwrap();
        for (r, d) in rec.depths.iter().zip(&depths) {
            assert!((r - (d - mean)).abs() < 1e-12 * 1e-3);
        }
    }

    #[test]
    fn invert_reports_missing_coverage() {
        let grid = test_grid();
        let full = WavenumberGrid::matched_to(&grid);
        let short = WavenumberGrid::new(full.values()[..10].to_vec()).unwrap();
        let coeffs = vec![Complex64::new(1.0, 0.0); 10];
        let spec = ReflectionSpectrum::new(short, coeffs).unwrap();
        assert!(matches!(
            wnst_invert(&spec, &test_plate(), &grid),
            Err(Error::CoverageError(_))
        ));
    }

    #[test]
    fn spectrum_csv_round_trips_exactly() {
        let grid = test_grid();
        let wgrid = WavenumberGrid::matched_to(&grid);
        let plate = test_plate();
        let depths: Vec<f64> = grid
            .positions()
            .map(|x| 2e-3 * (-((x - 0.04) / (4.0 * grid.spacing)).powi(2)).exp())
            .collect();
        let profile = DefectProfile::new(grid, depths).unwrap();
        let spec = forward_reflection(&profile, &plate, &wgrid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.csv");
        spec.write_csv(&path).unwrap();
        let back = ReflectionSpectrum::read_csv(&path).unwrap();
        assert_eq!(spec.grid.values(), back.grid.values());
        assert_eq!(spec.coefficients, back.coefficients);
    }

    #[test]
    fn profile_csv_has_contract_header() {
        let grid = SpatialGrid::spanning(0.0, 0.1, 5).unwrap();
        let profile = DefectProfile::new(grid, vec![0.0, 1e-3, 2e-3, 1e-3, 0.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.csv");
        profile.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x_m,depth_m\n"));
        assert_eq!(text.lines().count(), 6);
    }

    proptest! {
        /// Hermitian extension keeps the inverse transform real for any
        /// spectrum on the canonical bins.
        #[test]
        fn inversion_residue_stays_at_rounding_level(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let grid = test_grid();
            let wgrid = WavenumberGrid::matched_to(&grid);
            let coeffs: Vec<Complex64> = (0..wgrid.len())
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let spec = ReflectionSpectrum::new(wgrid, coeffs).unwrap();
            let (_, residue) = wnst_invert_detailed(&spec, &test_plate(), &grid).unwrap();
            prop_assert!(residue < 1e-9, "residue {}", residue);
        }

        /// Scaling the profile scales the spectrum (Born linearity).
        #[test]
        fn forward_scales_with_depth(scale in 0.1f64..5.0) {
            let grid = test_grid();
            let wgrid = WavenumberGrid::matched_to(&grid);
            let plate = test_plate();
            let base: Vec<f64> = (0..100)
                .map(|i| if (30..45).contains(&i) { 1e-3 } else { 0.0 })
                .collect();
            let scaled: Vec<f64> = base.iter().map(|d| d * scale).collect();
            let s1 = forward_reflection(&DefectProfile::new(grid, base).unwrap(), &plate, &wgrid).unwrap();
            let s2 = forward_reflection(&DefectProfile::new(grid, scaled).unwrap(), &plate, &wgrid).unwrap();
            let max_norm = s2.coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in s1.coefficients.iter().zip(&s2.coefficients) {
                prop_assert!((a * scale - b).norm() <= 1e-12 * max_norm);
            }
        }
    }
}
