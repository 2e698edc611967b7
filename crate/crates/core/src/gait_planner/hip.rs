//! Hip motion from the one-mass ZMP model, lifted onto a circular arc.

use serde::{Deserialize, Serialize};

use super::poly::Cubic;
use crate::error::{Error, Result};
use crate::model::Point;

/// Lower circular arc through two hip positions, centred above the start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HipArc {
    pub radius: f64,
    pub theta: f64,
    pub start: Point,
}

impl HipArc {
    pub fn height(&self, x: f64) -> f64 {
        let dx = x - self.start.x;
        let under = (self.radius * self.radius - dx * dx).max(0.0);
        self.start.y + self.radius - under.sqrt()
    }
}

/// Arc between `start` and `end`; `None` when the hip stays level.
pub fn fit_hip_arc(start: Point, end: Point) -> Result<Option<HipArc>> {
    let dx = end.x - start.x;
    let dz = end.y - start.y;
    if dz.abs() < 1e-12 {
        return Ok(None);
    }
    if !(dx > 0.0 && dz > 0.0 && dz <= dx) {
        return Err(Error::InvalidParameter(format!(
            "hip arc needs 0 < rise <= advance (advance {dx}, rise {dz})"
        )));
    }
    // R sin θ = dx and R (1 − cos θ) = dz reduce to dz cot(θ/2) = dx
    let f = |th: f64| dz / (0.5 * th).tan() - dx;
    let df = |th: f64| {
        let s = (0.5 * th).sin();
        -0.5 * dz / (s * s)
    };
    let (mut lo, mut hi) = (1e-9_f64, std::f64::consts::FRAC_PI_2);
    let mut th = 2.0 * dz / dx;
    th = th.clamp(lo, hi);
    let mut residual = f(th).abs();
    for _ in 0..100 {
        let v = f(th);
        residual = v.abs();
        if residual < 1e-12 * dx.max(1.0) {
            break;
        }
        if v > 0.0 {
            lo = th;
        } else {
            hi = th;
        }
        let step = th - v / df(th);
        th = if step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-14 {
            break;
        }
    }
    let radius = dx / th.sin();
    let end_err = (radius * (1.0 - th.cos()) - dz).abs();
    if end_err > 1e-10 {
        return Err(Error::NoConvergence {
            residual: residual.max(end_err),
            detail: "hip arc angle".into(),
        });
    }
    Ok(Some(HipArc {
        radius,
        theta: th,
        start,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HipPlan {
    /// ZMP polynomial `p_x(t)`.
    pub zmp: Cubic,
    pub c1: f64,
    pub c2: f64,
    pub omega: f64,
    pub z_ci: f64,
    pub gravity: f64,
    pub arc: Option<HipArc>,
    pub start: Point,
    pub end: Point,
    pub k_slope: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn plan_hip(
    x_zmp_initial: f64,
    x_zmp_final: f64,
    x_cog_initial: f64,
    x_cog_final: f64,
    hip_start: Point,
    hip_end: Point,
    z_ci: f64,
    t3: f64,
    g: f64,
) -> Result<HipPlan> {
    if !(t3 > 0.0 && z_ci > 0.0 && g > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "hip plan needs t3, z_Ci, g > 0 (t3 = {t3}, z_Ci = {z_ci}, g = {g})"
        )));
    }
    let zmp = Cubic::from_boundary(0.0, x_zmp_initial, 0.0, t3, x_zmp_final, 0.0)?;
    let omega = (g / z_ci).sqrt();
    let mut plan = HipPlan {
        zmp,
        c1: 0.0,
        c2: 0.0,
        omega,
        z_ci,
        gravity: g,
        arc: fit_hip_arc(hip_start, hip_end)?,
        start: hip_start,
        end: hip_end,
        k_slope: 0.0,
    };
    let a = x_cog_initial - plan.particular(0.0);
    let b = x_cog_final - plan.particular(t3);
    // C1 + C2 = a, C1 e^{ωT} + C2 e^{−ωT} = b
    let e = (-omega * t3).exp();
    let c1 = (b - a * e) * e / (1.0 - e * e);
    plan.c1 = c1;
    plan.c2 = a - c1;
    Ok(plan)
}

impl HipPlan {
    fn particular(&self, t: f64) -> f64 {
        let a = &self.zmp.a;
        self.zmp.eval(t) + self.z_ci / self.gravity * (6.0 * a[3] * t + 2.0 * a[2])
    }

    fn growing(&self, t: f64) -> f64 {
        self.c1 * (self.omega * t).exp()
    }

    fn decaying(&self, t: f64) -> f64 {
        self.c2 * (-self.omega * t).exp()
    }

    pub fn x_cog(&self, t: f64) -> f64 {
        self.growing(t) + self.decaying(t) + self.particular(t)
    }

    pub fn x_cog_rate(&self, t: f64) -> f64 {
        let a = &self.zmp.a;
        self.omega * (self.growing(t) - self.decaying(t))
            + self.zmp.rate(t)
            + self.z_ci / self.gravity * 6.0 * a[3]
    }

    pub fn x_cog_accel(&self, t: f64) -> f64 {
        self.omega * self.omega * (self.growing(t) + self.decaying(t)) + self.zmp.accel(t)
    }

    pub fn zmp(&self, t: f64) -> f64 {
        self.zmp.eval(t)
    }

    pub fn position(&self, t: f64) -> Point {
        let x = self.x_cog(t);
        let z = match &self.arc {
            Some(arc) => arc.height(x),
            None => self.start.y,
        };
        Point::new(x, z)
    }
}
