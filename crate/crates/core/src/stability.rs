//! Multi-mass zero moment point, support interval and stability margin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LinkComState, Point};

/// Normal force above which a contact point supports the robot, N.
pub const ACTIVE_CONTACT_THRESHOLD: f64 = 0.1;
/// Smallest accepted magnitude of the ZMP denominator, N.
pub const FREE_FALL_DENOMINATOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZmpRecord {
    pub t: f64,
    pub x_zmp: f64,
    /// `[x_min, x_max]` of the supporting contacts.
    pub polygon: [f64; 2],
    /// Distance to the nearer boundary, negative outside.
    pub margin: f64,
}

/// Actual ZMP of a set of point masses whose heights are measured from the
/// supporting plane, with the virtual-slope term `k Σ m ẍ` in the denominator.
pub fn zmp_actual(links: &[LinkComState], masses: &[f64], g: f64, k_slope: f64) -> Result<f64> {
    if links.len() != masses.len() {
        return Err(Error::InvalidParameter(format!(
            "{} link states for {} masses",
            links.len(),
            masses.len()
        )));
    }
    // accelerations in units of g, so a body at rest yields its COM bit for bit
    let scale = if g == 0.0 { 1.0 } else { g };
    let mut num = 0.0;
    let mut vertical = 0.0;
    let mut horizontal = 0.0;
    for (l, &m) in links.iter().zip(masses) {
        let lift = (l.acceleration.y + g) / scale;
        let push = l.acceleration.x / scale;
        num += m * l.position.x * lift - m * push * l.position.y;
        vertical += m * lift;
        horizontal += m * push;
    }
    let den = vertical - k_slope * horizontal;
    if !((den * scale).abs() >= FREE_FALL_DENOMINATOR) {
        return Err(Error::FreeFall(den * scale));
    }
    Ok(num / den)
}

/// x-interval spanned by the points whose normal force exceeds the
/// activity threshold.
pub fn support_polygon(points: &[Point], normals: &[f64]) -> Result<[f64; 2]> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (p, &fn_) in points.iter().zip(normals) {
        if fn_ > ACTIVE_CONTACT_THRESHOLD {
            lo = lo.min(p.x);
            hi = hi.max(p.x);
        }
    }
    if lo > hi {
        return Err(Error::Airborne);
    }
    Ok([lo, hi])
}

pub fn stability_margin(x_zmp: f64, polygon: [f64; 2]) -> f64 {
    (x_zmp - polygon[0]).min(polygon[1] - x_zmp)
}

/// Vertical reaction the fixed anchor must supply so that the link
/// accelerations balance gravity and the contact forces.
pub fn anchor_reaction(links: &[LinkComState], masses: &[f64], g: f64, contact_normals: &[f64]) -> f64 {
    let inertial: f64 = links
        .iter()
        .zip(masses)
        .map(|(l, m)| m * (l.acceleration.y + g))
        .sum();
    inertial - contact_normals.iter().sum::<f64>()
}

/// Ground contacts at one instant.
#[derive(Debug, Clone, Copy)]
pub struct Support<'a> {
    pub points: &'a [Point],
    pub normals: &'a [f64],
    pub anchor: Point,
    /// Points resting on the ground with the anchor, loaded through it.
    pub anchored: &'a [Point],
}

/// ZMP, support interval and margin at one instant. The anchor and the
/// points resting with it count as support when the anchor reaction exceeds
/// the activity threshold.
pub fn zmp_record(
    t: f64,
    links: &[LinkComState],
    masses: &[f64],
    g: f64,
    k_slope: f64,
    support: &Support,
) -> Result<ZmpRecord> {
    let x_zmp = zmp_actual(links, masses, g, k_slope)?;
    let mut points = support.points.to_vec();
    let mut forces = support.normals.to_vec();
    let reaction = anchor_reaction(links, masses, g, support.normals);
    for p in std::iter::once(&support.anchor).chain(support.anchored) {
        points.push(*p);
        forces.push(reaction);
    }
    let polygon = support_polygon(&points, &forces)?;
    Ok(ZmpRecord {
        t,
        x_zmp,
        polygon,
        margin: stability_margin(x_zmp, polygon),
    })
}
