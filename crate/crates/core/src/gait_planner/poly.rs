use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `a0 + a1 t + a2 t² + a3 t³` in absolute time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cubic {
    pub a: [f64; 4],
}

impl Cubic {
    pub fn constant(c: f64) -> Self {
        Self { a: [c, 0.0, 0.0, 0.0] }
    }

    /// Solves the 4×4 boundary system for value and rate at `t0` and `t1`.
    pub fn from_boundary(t0: f64, p0: f64, v0: f64, t1: f64, p1: f64, v1: f64) -> Result<Self> {
        if !((t1 - t0).abs() > 1e-12) {
            return Err(Error::Singular(format!(
                "cubic boundary times coincide (t0 = {t0}, t1 = {t1})"
            )));
        }
        let m = Matrix4::new(
            1.0,
            t0,
            t0 * t0,
            t0 * t0 * t0,
            0.0,
            1.0,
            2.0 * t0,
            3.0 * t0 * t0,
            1.0,
            t1,
            t1 * t1,
            t1 * t1 * t1,
            0.0,
            1.0,
            2.0 * t1,
            3.0 * t1 * t1,
        );
        let rhs = Vector4::new(p0, v0, p1, v1);
        let a = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("cubic boundary system".into()))?;
        Ok(Self {
            a: [a[0], a[1], a[2], a[3]],
        })
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let a = &self.a;
        a[0] + t * (a[1] + t * (a[2] + t * a[3]))
    }

    #[inline]
    pub fn rate(&self, t: f64) -> f64 {
        let a = &self.a;
        a[1] + t * (2.0 * a[2] + 3.0 * t * a[3])
    }

    #[inline]
    pub fn accel(&self, t: f64) -> f64 {
        2.0 * self.a[2] + 6.0 * self.a[3] * t
    }

    #[inline]
    pub fn jerk(&self) -> f64 {
        6.0 * self.a[3]
    }

    /// Smallest value of the first derivative on `[t0, t1]`.
    pub fn min_rate(&self, t0: f64, t1: f64) -> f64 {
        let mut m = self.rate(t0).min(self.rate(t1));
        if self.a[3] > 0.0 {
            let tv = -self.a[2] / (3.0 * self.a[3]);
            if tv > t0 && tv < t1 {
                m = m.min(self.rate(tv));
            }
        }
        m
    }
}
