//! Swing-foot pieces: heel-lift polynomials, cycloid track and the Bézier
//! bridge between them. Positions are relative to the swing ankle's start.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::poly::Cubic;
use super::GaitParams;
use crate::error::{Error, Result};
use crate::model::{foot_points, Point};

/// Ankle, sole and toe of the swing foot with its two segment angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootPose {
    pub ankle: Point,
    pub sole: Point,
    pub toe: Point,
    pub theta_sole: f64,
    pub theta_toe: f64,
}

/// Heel lift about the sole point, then toe roll about the toe tip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DspPlan {
    pub t1: f64,
    pub t2: f64,
    pub l6: f64,
    pub l7: f64,
    pub sole_rise: Cubic,
    pub sole_fall: Cubic,
    pub toe_rise: Cubic,
}

pub fn plan_dsp(params: &GaitParams, l6: f64, l7: f64) -> Result<DspPlan> {
    let (t1, t2) = (params.t1, params.t2);
    if !(t1 > 0.0 && t1 < t2) {
        return Err(Error::InvalidParameter(format!(
            "heel-lift times need 0 < t1 < t2 (t1 = {t1}, t2 = {t2})"
        )));
    }
    Ok(DspPlan {
        t1,
        t2,
        l6,
        l7,
        sole_rise: Cubic::from_boundary(0.0, 0.0, 0.0, t1, params.theta_a, 0.0)?,
        sole_fall: Cubic::from_boundary(t1, params.theta_a, 0.0, t2, 0.0, 0.0)?,
        toe_rise: Cubic::from_boundary(t1, 0.0, 0.0, t2, params.theta_b, 0.0)?,
    })
}

impl DspPlan {
    /// Sole and toe angles with their rates.
    pub fn angles(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        if t <= self.t1 {
            let t = t.max(0.0);
            (
                [self.sole_rise.eval(t), 0.0],
                [self.sole_rise.rate(t), 0.0],
            )
        } else {
            let t = t.min(self.t2);
            (
                [self.sole_fall.eval(t), self.toe_rise.eval(t)],
                [self.sole_fall.rate(t), self.toe_rise.rate(t)],
            )
        }
    }

    pub fn pose(&self, t: f64) -> FootPose {
        let ([th6, th7], _) = self.angles(t);
        let ankle = Point::new(
            self.l6 * (1.0 - th6.cos()) + self.l7 * (1.0 - th7.cos()),
            self.l6 * th6.sin() + self.l7 * th7.sin(),
        );
        let (sole, toe) = foot_points(ankle, th6, th7, self.l6, self.l7);
        FootPose {
            ankle,
            sole,
            toe,
            theta_sole: th6,
            theta_toe: th7,
        }
    }

    pub fn ankle_velocity(&self, t: f64) -> Point {
        let ([th6, th7], [w6, w7]) = self.angles(t);
        Point::new(
            self.l6 * th6.sin() * w6 + self.l7 * th7.sin() * w7,
            self.l6 * th6.cos() * w6 + self.l7 * th7.cos() * w7,
        )
    }
}

/// Offset of a point on a cycloid of radius `r` from the cycloid origin.
#[inline]
pub fn cycloid_point(r: f64, theta: f64) -> Point {
    Point::new(r * (theta - theta.sin()), r * (1.0 - theta.cos()))
}

/// Geometric cycloid placed so that its apex is the landing ankle position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cycloid {
    pub r: f64,
    pub theta_c0: f64,
    pub origin: Point,
}

impl Cycloid {
    pub fn point(&self, theta: f64) -> Point {
        self.origin + cycloid_point(self.r, theta)
    }

    /// `d point / d theta`.
    pub fn tangent(&self, theta: f64) -> Point {
        Point::new(self.r * (1.0 - theta.cos()), self.r * theta.sin())
    }

    pub fn curvature_term(&self, theta: f64) -> Point {
        Point::new(self.r * theta.sin(), self.r * theta.cos())
    }
}

/// Starting cycloid angle that leaves exactly `dx_c` of horizontal travel to
/// the apex, or 0 when the full half-cycloid is no longer than `dx_c`.
pub fn solve_theta_c0(r: f64, dx_c: f64) -> f64 {
    let target = PI * r - dx_c;
    if target <= 0.0 {
        return 0.0;
    }
    if target >= PI * r {
        return PI;
    }
    let (mut lo, mut hi) = (0.0_f64, PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if r * (mid - mid.sin()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Cubic Bézier bridge from the end of double support onto the cycloid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatchBezier {
    pub control: [Point; 4],
    pub t2: f64,
    pub t_bc: f64,
    pub theta_c4: f64,
    pub theta_dot_bc: f64,
}

/// The second control point is the cycloid point at `theta_c0`, and the last
/// one sits `2 dtheta` further along. The third lies on the tangent at the
/// last, one `dtheta` step back, so the blend is C¹ in both coordinates.
pub fn plan_catch_bezier(
    dsp_end: Point,
    cycloid: &Cycloid,
    dtheta: f64,
    t2: f64,
    t_bc: f64,
) -> Result<CatchBezier> {
    if !(t_bc > t2) {
        return Err(Error::InvalidParameter(format!(
            "catch phase needs t_bc > t2 (t2 = {t2}, t_bc = {t_bc})"
        )));
    }
    let theta_c4 = cycloid.theta_c0 + 2.0 * dtheta;
    let s4 = theta_c4.sin();
    if !(s4 > 1e-9) {
        return Err(Error::DegenerateBlend(s4));
    }
    let p2 = cycloid.point(cycloid.theta_c0);
    let p4 = cycloid.point(theta_c4);
    let p3 = p4 - dtheta * cycloid.tangent(theta_c4);
    let control = [dsp_end, p2, p3, p4];
    let zdot = 3.0 * (p4.y - p3.y) / (t_bc - t2);
    Ok(CatchBezier {
        control,
        t2,
        t_bc,
        theta_c4,
        theta_dot_bc: zdot / (cycloid.r * s4),
    })
}

impl CatchBezier {
    fn s(&self, t: f64) -> f64 {
        (t - self.t2) / (self.t_bc - self.t2)
    }

    pub fn at_s(&self, s: f64) -> Point {
        let [p1, p2, p3, p4] = self.control;
        let u = 1.0 - s;
        u * u * u * p1 + 3.0 * u * u * s * p2 + 3.0 * u * s * s * p3 + s * s * s * p4
    }

    pub fn point(&self, t: f64) -> Point {
        self.at_s(self.s(t))
    }

    pub fn velocity(&self, t: f64) -> Point {
        let [p1, p2, p3, p4] = self.control;
        let s = self.s(t);
        let u = 1.0 - s;
        (3.0 * u * u * (p2 - p1) + 6.0 * u * s * (p3 - p2) + 3.0 * s * s * (p4 - p3))
            / (self.t_bc - self.t2)
    }
}

/// Cubic `theta_c(t)` through the blend state at `t_bc` and the apex at `t3`,
/// where the vertical acceleration of the cycloid equals `g`.
pub fn solve_theta_c_poly(
    theta_c4: f64,
    theta_dot_bc: f64,
    t_bc: f64,
    t3: f64,
    r: f64,
    g: f64,
) -> Result<Cubic> {
    Cubic::from_boundary(t_bc, theta_c4, theta_dot_bc, t3, PI, (g / r).sqrt())
}

/// Cycloid track with its time law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycloidSegment {
    pub cycloid: Cycloid,
    pub theta: Cubic,
    pub t_bc: f64,
    pub t3: f64,
}

impl CycloidSegment {
    pub fn point(&self, t: f64) -> Point {
        self.cycloid.point(self.theta.eval(t))
    }

    pub fn velocity(&self, t: f64) -> Point {
        self.cycloid.tangent(self.theta.eval(t)) * self.theta.rate(t)
    }

    pub fn acceleration(&self, t: f64) -> Point {
        let th = self.theta.eval(t);
        let w = self.theta.rate(t);
        self.cycloid.tangent(th) * self.theta.accel(t) + self.cycloid.curvature_term(th) * (w * w)
    }

    pub fn is_monotone(&self) -> bool {
        self.theta.min_rate(self.t_bc, self.t3) >= 0.0
    }
}

/// Foot segment angle during single support: a cubic through the given
/// values with zero rate at both ends.
pub fn foot_orientation_cubic(start: f64, end: f64, t2: f64, t3: f64) -> Result<Cubic> {
    Cubic::from_boundary(t2, start, 0.0, t3, end, 0.0)
}

/// Toe angle held at `theta_b` for the whole swing.
pub fn plan_swing_foot_orientation(theta_b: f64, t2: f64, t3: f64) -> Result<Cubic> {
    foot_orientation_cubic(theta_b, theta_b, t2, t3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    #[test]
    fn dsp_boundaries() {
        let p = GaitParams::default();
        let dsp = plan_dsp(&p, 0.12, 0.05).unwrap();
        let start = dsp.pose(0.0);
        assert_eq!(start.ankle, Point::zeros());
        assert_eq!((start.theta_sole, start.theta_toe), (0.0, 0.0));
        let (a, w) = dsp.angles(p.t1);
        assert_abs_diff_eq!(a[0], FRAC_PI_6, epsilon = 1e-12);
        assert_abs_diff_eq!(w[0], 0.0, epsilon = 1e-12);
        let (a, w) = dsp.angles(p.t2);
        assert_abs_diff_eq!(a[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1], FRAC_PI_6, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.0, epsilon = 1e-12);
        let end = dsp.pose(p.t2);
        let x = 0.12 * (1.0 - a[0].cos()) + 0.05 * (1.0 - a[1].cos());
        let z = 0.12 * a[0].sin() + 0.05 * a[1].sin();
        assert_abs_diff_eq!(end.ankle.x, x, epsilon = 1e-15);
        assert_abs_diff_eq!(end.ankle.y, z, epsilon = 1e-15);
    }

    #[test]
    fn dsp_keeps_toe_pinned() {
        let dsp = plan_dsp(&GaitParams::default(), 0.12, 0.05).unwrap();
        for i in 0..=140 {
            let pose = dsp.pose(i as f64 * 0.01);
            assert_abs_diff_eq!(pose.toe, Point::new(0.17, 0.0), epsilon = 1e-14);
            if i <= 50 {
                assert_abs_diff_eq!(pose.sole, Point::new(0.12, 0.0), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn dsp_rejects_bad_times() {
        let p = GaitParams {
            t1: 1.5,
            ..GaitParams::default()
        };
        assert!(plan_dsp(&p, 0.12, 0.05).is_err());
    }

    #[test]
    fn cycloid_reference_points() {
        assert_eq!(cycloid_point(0.1, 0.0), Point::zeros());
        let apex = cycloid_point(0.1, PI);
        assert_abs_diff_eq!(apex.x, 0.1 * PI, epsilon = 1e-15);
        assert_abs_diff_eq!(apex.y, 0.2, epsilon = 1e-15);
        let q = cycloid_point(0.1, FRAC_PI_2);
        assert_abs_diff_eq!(q.x, 0.1 * (FRAC_PI_2 - 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(q.y, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn theta_c0_limits() {
        assert_eq!(solve_theta_c0(0.1, PI * 0.1), 0.0);
        assert_eq!(solve_theta_c0(0.1, 0.5), 0.0);
        assert_abs_diff_eq!(solve_theta_c0(0.1, 0.0), PI, epsilon = 1e-12);
    }

    #[test]
    fn theta_c0_against_newton_oracle() {
        let (r, dx) = (0.085, 0.15);
        let target = PI * r - dx;
        let mut th: f64 = 1.0;
        for _ in 0..60 {
            th -= (r * (th - th.sin()) - target) / (r * (1.0 - th.cos()));
        }
        assert_abs_diff_eq!(solve_theta_c0(r, dx), th, epsilon = 1e-10);
    }

    #[test]
    fn theta_c_poly_boundaries() {
        let c = solve_theta_c_poly(0.7, 0.04, 2.2, 3.5, 0.085, 9.81).unwrap();
        assert_abs_diff_eq!(c.eval(2.2), 0.7, epsilon = 1e-9);
        assert_abs_diff_eq!(c.rate(2.2), 0.04, epsilon = 1e-9);
        assert_abs_diff_eq!(c.eval(3.5), PI, epsilon = 1e-9);
        assert_abs_diff_eq!(c.rate(3.5), 10.743, epsilon = 1e-3);
        assert!(solve_theta_c_poly(0.7, 0.04, 2.2, 2.2, 0.085, 9.81).is_err());
    }

    #[test]
    fn apex_vertical_acceleration_is_gravity() {
        let cyc = Cycloid {
            r: 0.09,
            theta_c0: 0.0,
            origin: Point::zeros(),
        };
        let theta = solve_theta_c_poly(0.3, 0.5, 0.0, 0.5, 0.09, 9.81).unwrap();
        let seg = CycloidSegment {
            cycloid: cyc,
            theta,
            t_bc: 0.0,
            t3: 0.5,
        };
        assert_abs_diff_eq!(seg.acceleration(0.5).y, -9.81, epsilon = 1e-9);
    }

    #[test]
    fn bezier_endpoints_and_blend() {
        let cyc = Cycloid {
            r: 0.09,
            theta_c0: 0.8,
            origin: Point::new(-0.01, 0.025),
        };
        let b = plan_catch_bezier(Point::new(0.0067, 0.025), &cyc, 0.01, 1.4, 2.2).unwrap();
        assert_eq!(b.at_s(0.0), b.control[0]);
        assert_abs_diff_eq!(b.at_s(1.0), b.control[3], epsilon = 1e-15);
        let v = b.velocity(2.2);
        let v_cyc = cyc.tangent(b.theta_c4) * b.theta_dot_bc;
        assert_abs_diff_eq!(v, v_cyc, epsilon = 1e-12);
    }

    #[test]
    fn flat_blend_is_rejected() {
        let cyc = Cycloid {
            r: 0.09,
            theta_c0: PI,
            origin: Point::zeros(),
        };
        assert!(matches!(
            plan_catch_bezier(Point::zeros(), &cyc, 0.0, 1.4, 2.2),
            Err(Error::DegenerateBlend(_))
        ));
    }

    #[test]
    fn held_foot_orientation_is_constant() {
        let c = plan_swing_foot_orientation(FRAC_PI_6, 1.4, 3.5).unwrap();
        assert_abs_diff_eq!(c.eval(1.4), FRAC_PI_6, epsilon = 1e-12);
        assert_abs_diff_eq!(c.rate(1.4), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.eval(2.45), FRAC_PI_6, epsilon = 1e-12);
    }

    #[test]
    fn foot_release_matches_hermite_ease_out() {
        let c = foot_orientation_cubic(FRAC_PI_6, 0.0, 1.4, 3.5).unwrap();
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            let t = 1.4 + 2.1 * s;
            let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
            assert_abs_diff_eq!(c.eval(t), FRAC_PI_6 * h00, epsilon = 1e-12);
        }
    }
}
