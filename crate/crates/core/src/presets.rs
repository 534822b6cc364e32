// SPDX-License-Identifier: Apache-2.0

//! Named reference configurations used by the verification suites.

use crate::error::Result;
use crate::fock::Geometry;
use crate::planner::{chain_geometry, plan_pattern, ExposurePlan, PixelLayout, Target};

/// A single grazing pair (`s = 1`) carrying `photons`.
pub fn grazing(photons: u32) -> Result<Geometry> {
    Geometry::from_spec(&[(photons, 1.0)])
}

/// Two pairs, `N₁ = N₂ = 3`, scalings 1 and 1/4 (16 pixels).
pub fn pairs_3_3() -> Result<Geometry> {
    Geometry::from_spec(&[(3, 1.0), (3, 0.25)])
}

/// Two pairs, `N₁ = 2, N₂ = 4`, scalings 1 and 1/5 (15 pixels).
pub fn pairs_2_4() -> Result<Geometry> {
    Geometry::from_spec(&[(2, 1.0), (4, 0.2)])
}

/// The product state with all pair phases zero.
pub fn unshifted(geometry: &Geometry) -> Result<ExposurePlan> {
    let phases = vec![0.0; geometry.pairs().len()];
    ExposurePlan::from_phases(geometry.clone(), vec![(1.0, phases)])
}

/// Equal-weight plan over `pixels`.
pub fn pattern(geometry: &Geometry, pixels: &[usize]) -> Result<ExposurePlan> {
    let targets: Vec<Target> = pixels.iter().map(|p| Target::from(*p)).collect();
    plan_pattern(geometry, &targets)
}

/// Ten-photon grazing pair exposing pixels {1,2,3,4,9,10,11}: a four-pixel
/// unexposed trench between two exposed regions.
pub fn trench() -> Result<ExposurePlan> {
    pattern(&grazing(10)?, &[1, 2, 3, 4, 9, 10, 11])
}

/// Plans compared against the brute-force engine.
pub fn oracle_cases() -> Result<Vec<(String, ExposurePlan)>> {
    let chain_3_6 = chain_geometry(3, 6)?;
    let chain_4_7 = chain_geometry(4, 7)?;
    Ok(vec![
        (
            "pairs(3,3) s=1,1/4 unshifted".into(),
            unshifted(&pairs_3_3()?)?,
        ),
        (
            "pairs(3,3) s=1,1/4 pixel 6".into(),
            pattern(&pairs_3_3()?, &[6])?,
        ),
        (
            "pairs(2,4) s=1,1/5 unshifted".into(),
            unshifted(&pairs_2_4()?)?,
        ),
        ("chain N=3 M=6 unshifted".into(), unshifted(&chain_3_6)?),
        (
            "chain N=3 M=6 pixels 13,15".into(),
            pattern(&chain_3_6, &[13, 15])?,
        ),
        ("chain N=4 M=7 unshifted".into(), unshifted(&chain_4_7)?),
    ])
}

/// Geometries whose full single-pixel families are checked for completeness
/// and zeros at the other pixel centers.
pub fn pixel_family_geometries() -> Result<Vec<(String, Geometry)>> {
    Ok(vec![
        ("pairs(3,3)".into(), pairs_3_3()?),
        ("pairs(2,4)".into(), pairs_2_4()?),
        ("chain N=3 M=6".into(), chain_geometry(3, 6)?),
        ("chain N=4 M=7".into(), chain_geometry(4, 7)?),
    ])
}

/// Pixel count of a geometry, for labels.
pub fn pixel_count(geometry: &Geometry) -> Result<usize> {
    Ok(PixelLayout::of(geometry)?.count)
}
