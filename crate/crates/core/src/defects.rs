//! Parametric thinning-defect shapes and seeded randomization.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{DefectProfile, PlateSpec, SpatialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectClass {
    Triangle,
    Rect,
    Step,
}

impl DefectClass {
    pub const ALL: [DefectClass; 3] = [DefectClass::Triangle, DefectClass::Rect, DefectClass::Step];

    pub fn label(&self) -> &'static str {
        match self {
            DefectClass::Triangle => "triangle",
            DefectClass::Rect => "rect",
            DefectClass::Step => "step",
        }
    }
}

impl std::fmt::Display for DefectClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for DefectClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangle" => Ok(DefectClass::Triangle),
            "rect" => Ok(DefectClass::Rect),
            "step" => Ok(DefectClass::Step),
            other => Err(Error::InvalidParameter(format!("unknown defect class '{other}'"))),
        }
    }
}

/// One parametric defect. Serializes as a JSON object with snake_case keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectParams {
    pub class: DefectClass,
    /// Support center (m).
    pub center_x: f64,
    /// Support width (m).
    pub width: f64,
    /// Depth (m); for Step, the depth of the left section.
    pub depth: f64,
    /// Step only: fraction of the width at the left depth level.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub step_fraction: Option<f64>,
    /// Step only: depth of the right section (m).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub step_depth2: Option<f64>,
}

impl DefectParams {
    pub fn triangle(center_x: f64, width: f64, depth: f64) -> Result<Self> {
        Self { class: DefectClass::Triangle, center_x, width, depth, step_fraction: None, step_depth2: None }
            .validated()
    }

    pub fn rectangle(center_x: f64, width: f64, depth: f64) -> Result<Self> {
        Self { class: DefectClass::Rect, center_x, width, depth, step_fraction: None, step_depth2: None }
            .validated()
    }

    pub fn step(center_x: f64, width: f64, depth: f64, step_fraction: f64, step_depth2: f64) -> Result<Self> {
        Self {
            class: DefectClass::Step,
            center_x,
            width,
            depth,
            step_fraction: Some(step_fraction),
            step_depth2: Some(step_depth2),
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.width <= 0.0 || !self.width.is_finite() {
            return Err(Error::InvalidParameter(format!("width must be > 0, got {}", self.width)));
        }
        if self.depth <= 0.0 || !self.depth.is_finite() {
            return Err(Error::InvalidParameter(format!("depth must be > 0, got {}", self.depth)));
        }
        match self.class {
            DefectClass::Step => {
                let f = self.step_fraction.ok_or_else(|| {
                    Error::InvalidParameter("step defect needs step_fraction".into())
                })?;
                let d2 = self.step_depth2.ok_or_else(|| {
                    Error::InvalidParameter("step defect needs step_depth2".into())
                })?;
                if f <= 0.0 || f >= 1.0 || f.is_nan() {
                    return Err(Error::InvalidParameter(format!(
                        "step_fraction must be in (0,1), got {f}"
                    )));
                }
                if d2 <= 0.0 || !d2.is_finite() || d2 == self.depth {
                    return Err(Error::InvalidParameter(format!(
                        "step_depth2 must be > 0 and differ from depth, got {d2}"
                    )));
                }
            }
            _ => {
                if self.step_fraction.is_some() || self.step_depth2.is_some() {
                    return Err(Error::InvalidParameter(
                        "step_fraction/step_depth2 only apply to step defects".into(),
                    ));
                }
            }
        }
        Ok(self)
    }

    pub fn left(&self) -> f64 {
        self.center_x - self.width / 2.0
    }

    pub fn right(&self) -> f64 {
        self.center_x + self.width / 2.0
    }

    pub fn max_depth(&self) -> f64 {
        match self.class {
            DefectClass::Step => self.depth.max(self.step_depth2.unwrap_or(0.0)),
            _ => self.depth,
        }
    }
}

/// Randomization ranges for defect draws, expressed relative to the plate
/// and detection range so they stay in the weak-scatterer regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizationRanges {
    /// Depth range as a fraction of the half thickness b.
    pub depth_frac: (f64, f64),
    /// Width range as a fraction of the detection length.
    pub width_frac: (f64, f64),
    /// Step boundary fraction range (step defects only).
    pub step_fraction: (f64, f64),
}

impl Default for RandomizationRanges {
    fn default() -> Self {
        Self { depth_frac: (0.05, 0.3), width_frac: (0.1, 0.4), step_fraction: (0.2, 0.8) }
    }
}

impl RandomizationRanges {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo > 0.0 && lo <= hi;
        if !ordered(self.depth_frac) || !ordered(self.width_frac) || !ordered(self.step_fraction) {
            return Err(Error::InvalidParameter("randomization ranges must be 0 < lo <= hi".into()));
        }
        if self.depth_frac.1 > 0.3 {
            return Err(Error::InvalidParameter(format!(
                "max depth fraction {} exceeds the weak-scatterer bound 0.3 b",
                self.depth_frac.1
            )));
        }
        if self.step_fraction.1 >= 1.0 {
            return Err(Error::InvalidParameter("step_fraction range must stay below 1".into()));
        }
        Ok(())
    }
}

/// Rasterize a defect onto the grid. Membership uses half-open support
/// [left, right); points outside are exactly 0.
pub fn sample_profile(params: &DefectParams, grid: &SpatialGrid) -> Result<DefectProfile> {
    params.validated()?;
    let left = params.left();
    let right = params.right();
    let start = grid.x(0);
    let end = grid.x(grid.point_count - 1);
    if left <= start || right > end {
        return Err(Error::OutOfRange(format!(
            "support [{left}, {right}) must lie strictly inside ({start}, {end}]"
        )));
    }
    let mut depths = vec![0.0; grid.point_count];
    for (i, d) in depths.iter_mut().enumerate() {
        let x = grid.x(i);
        if x < left || x >= right {
            continue;
        }
        *d = match params.class {
            DefectClass::Rect => params.depth,
            DefectClass::Triangle => {
                // Clamp: rounding near the support edge can dip a hair below zero.
                (params.depth * (1.0 - (x - params.center_x).abs() / (params.width / 2.0))).max(0.0)
            }
            DefectClass::Step => {
                let boundary = left + params.step_fraction.unwrap() * params.width;
                if x < boundary {
                    params.depth
                } else {
                    params.step_depth2.unwrap()
                }
            }
        };
    }
    DefectProfile::new(*grid, depths)
}

/// Draw one defect uniformly within the ranges. Deterministic for a given
/// stream state; the caller derives one stream per sample.
pub fn random_defect(
    class: DefectClass,
    ranges: &RandomizationRanges,
    plate: &PlateSpec,
    grid: &SpatialGrid,
    rng: &mut ChaCha8Rng,
) -> Result<DefectParams> {
    ranges.validate()?;
    let b = plate.half_thickness;
    let detection = grid.extent();
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    };
    let depth = b * uniform(rng, ranges.depth_frac);
    let width = detection * uniform(rng, ranges.width_frac);
    // Keep a one-sample margin so the grid endpoints stay exactly zero.
    let lo = grid.x(0) + width / 2.0 + grid.spacing;
    let hi = grid.x(grid.point_count - 1) - width / 2.0 - grid.spacing;
    if hi <= lo {
        return Err(Error::OutOfRange(format!(
            "width {width} leaves no room for the defect center on this grid"
        )));
    }
    let center = rng.random_range(lo..hi);
    match class {
        DefectClass::Triangle => DefectParams::triangle(center, width, depth),
        DefectClass::Rect => DefectParams::rectangle(center, width, depth),
        DefectClass::Step => {
            let fraction = uniform(rng, ranges.step_fraction);
            let mut depth2 = b * uniform(rng, ranges.depth_frac);
            while depth2 == depth {
                depth2 = b * uniform(rng, ranges.depth_frac);
            }
            DefectParams::step(center, width, depth, fraction, depth2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::{stream, Domain};
    use proptest::prelude::*;

    fn grid100() -> SpatialGrid {
        SpatialGrid::spanning(0.0, 0.1, 100).unwrap()
    }

    fn plate() -> PlateSpec {
        PlateSpec::sh0(0.005, 3200.0).unwrap()
    }

    #[test]
    fn rectangle_covers_expected_points() {
        let grid = grid100();
        let dx = grid.spacing;
        // Support [x40, x60): points 40..=59 inside.
        let params = DefectParams::rectangle(grid.x(50), 20.0 * dx, 1e-3).unwrap();
        let profile = sample_profile(&params, &grid).unwrap();
        for (i, &d) in profile.depths.iter().enumerate() {
            if (40..60).contains(&i) {
                assert_eq!(d, 1e-3, "point {i}");
            } else {
                assert_eq!(d, 0.0, "point {i}");
            }
        }
    }

    #[test]
    fn triangle_peaks_at_apex_and_is_linear() {
        let grid = grid100();
        let dx = grid.spacing;
        let params = DefectParams::triangle(grid.x(50), 20.0 * dx, 2e-3).unwrap();
        let profile = sample_profile(&params, &grid).unwrap();
        assert!((profile.depths[50] - 2e-3).abs() < 1e-18);
        assert_eq!(profile.depths[40], 0.0);
        assert_eq!(profile.depths[60], 0.0);
        // Linear flanks: equal increments.
        let inc = profile.depths[46] - profile.depths[45];
        for i in 41..50 {
            let step = profile.depths[i + 1] - profile.depths[i];
            assert!((step - inc).abs() < 1e-15);
        }
        assert!((profile.depths[45] - 2e-3 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn step_splits_support_by_fraction() {
        let grid = grid100();
        let dx = grid.spacing;
        let params = DefectParams::step(grid.x(50), 30.0 * dx, 2e-3, 0.5, 1e-3).unwrap();
        let profile = sample_profile(&params, &grid).unwrap();
        for i in 35..50 {
            assert_eq!(profile.depths[i], 2e-3, "left point {i}");
        }
        for i in 50..65 {
            assert_eq!(profile.depths[i], 1e-3, "right point {i}");
        }
        assert_eq!(profile.depths[34], 0.0);
        assert_eq!(profile.depths[65], 0.0);
    }

    #[test]
    fn support_exceeding_grid_is_rejected() {
        let grid = grid100();
        let params = DefectParams::rectangle(0.01, 0.05, 1e-3).unwrap();
        assert!(matches!(sample_profile(&params, &grid), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn degenerate_depth_is_rejected() {
        assert!(DefectParams::rectangle(0.05, 0.02, 0.0).is_err());
        assert!(DefectParams::step(0.05, 0.02, 1e-3, 0.5, 1e-3).is_err());
    }

    #[test]
    fn random_defect_is_deterministic() {
        let ranges = RandomizationRanges::default();
        let (plate, grid) = (plate(), grid100());
        let a = random_defect(DefectClass::Step, &ranges, &plate, &grid, &mut stream(9, Domain::DefectParams, 4)).unwrap();
        let b = random_defect(DefectClass::Step, &ranges, &plate, &grid, &mut stream(9, Domain::DefectParams, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn draws_respect_ranges() {
        let ranges = RandomizationRanges::default();
        let (plate, grid) = (plate(), grid100());
        let mut rng = stream(3, Domain::DefectParams, 0);
        let mut min_d = f64::INFINITY;
        let mut max_d = f64::NEG_INFINITY;
        for i in 0..10_000 {
            let class = DefectClass::ALL[i % 3];
            let p = random_defect(class, &ranges, &plate, &grid, &mut rng).unwrap();
            min_d = min_d.min(p.depth);
            max_d = max_d.max(p.max_depth());
            assert!(p.width >= 0.1 * grid.extent() && p.width <= 0.4 * grid.extent());
            assert!(p.left() > grid.x(0) && p.right() <= grid.x(99));
            if class == DefectClass::Step {
                assert_ne!(p.step_depth2.unwrap(), p.depth);
            }
        }
        let b = plate.half_thickness;
        assert!(min_d >= 0.05 * b && max_d <= 0.3 * b);
        // The empirical extremes should come close to the configured range.
        assert!(min_d < 0.06 * b, "min depth {min_d}");
        assert!(max_d > 0.29 * b, "max depth {max_d}");
    }

    #[test]
    fn params_serialize_with_snake_case_keys() {
        let p = DefectParams::step(0.05, 0.02, 1e-3, 0.4, 5e-4).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"class\":\"step\""), "{json}");
        assert!(json.contains("\"center_x\":"), "{json}");
        assert!(json.contains("\"step_fraction\":"), "{json}");
        let back: DefectParams = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
        // Non-step params omit the step fields entirely.
        let r = DefectParams::rectangle(0.05, 0.02, 1e-3).unwrap();
        assert!(!serde_json::to_string(&r).unwrap().contains("step_fraction"));
    }

    proptest! {
        /// Sampled profiles are nonnegative and exactly zero outside support.
        #[test]
        fn profiles_are_contained_and_nonnegative(seed in 0u64..500) {
            let ranges = RandomizationRanges::default();
            let (plate, grid) = (plate(), grid100());
            let mut rng = stream(seed, Domain::DefectParams, 0);
            let class = DefectClass::ALL[(seed % 3) as usize];
            let p = random_defect(class, &ranges, &plate, &grid, &mut rng).unwrap();
            let profile = sample_profile(&p, &grid).unwrap();
            for (i, &d) in profile.depths.iter().enumerate() {
                prop_assert!(d >= 0.0);
                let x = grid.x(i);
                if x < p.left() || x >= p.right() {
                    prop_assert!(d == 0.0, "nonzero outside support at {}", i);
                }
                prop_assert!(d <= 0.3 * plate.half_thickness + 1e-18);
            }
            prop_assert_eq!(profile.depths[0], 0.0);
            prop_assert_eq!(profile.depths[99], 0.0);
        }
    }
}
