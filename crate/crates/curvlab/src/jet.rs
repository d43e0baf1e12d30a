//! Second-order forward-mode jets in two parameters.
//!
//! A `Jet2` carries a value together with its gradient and Hessian with
//! respect to chart parameters (u, v). Chart position functions are written
//! once over these and yield exact first and second derivatives, which the
//! frame pipeline turns into metric, normal, and shape data. Curves simply
//! never seed the v-slot.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub du: f64,
    pub dv: f64,
    pub duu: f64,
    pub duv: f64,
    pub dvv: f64,
}

impl Jet2 {
    pub const fn constant(v: f64) -> Self {
        Jet2 { v, du: 0.0, dv: 0.0, duu: 0.0, duv: 0.0, dvv: 0.0 }
    }

    /// Seed for the first chart parameter.
    pub const fn var_u(v: f64) -> Self {
        Jet2 { v, du: 1.0, dv: 0.0, duu: 0.0, duv: 0.0, dvv: 0.0 }
    }

    /// Seed for the second chart parameter.
    pub const fn var_v(v: f64) -> Self {
        Jet2 { v, du: 0.0, dv: 1.0, duu: 0.0, duv: 0.0, dvv: 0.0 }
    }

    /// Chain rule for a scalar function h with derivatives h', h'' at self.v.
    fn chain(self, h: f64, dh: f64, ddh: f64) -> Self {
        Jet2 {
            v: h,
            du: dh * self.du,
            dv: dh * self.dv,
            duu: ddh * self.du * self.du + dh * self.duu,
            duv: ddh * self.du * self.dv + dh * self.duv,
            dvv: ddh * self.dv * self.dv + dh * self.dvv,
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sinh(self) -> Self {
        let s = self.v.sinh();
        let c = self.v.cosh();
        self.chain(s, c, s)
    }

    pub fn cosh(self) -> Self {
        let s = self.v.sinh();
        let c = self.v.cosh();
        self.chain(c, s, c)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * r * r))
    }

    /// Integer power, n >= 1.
    pub fn powi(self, n: i32) -> Self {
        let p = self.v.powi(n);
        let dp = n as f64 * self.v.powi(n - 1);
        let ddp = (n * (n - 1)) as f64 * self.v.powi(n - 2);
        self.chain(p, dp, ddp)
    }

    /// Real power of a positive base.
    pub fn powf(self, a: f64) -> Self {
        let p = self.v.powf(a);
        let dp = a * self.v.powf(a - 1.0);
        let ddp = a * (a - 1.0) * self.v.powf(a - 2.0);
        self.chain(p, dp, ddp)
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            du: self.du + o.du,
            dv: self.dv + o.dv,
            duu: self.duu + o.duu,
            duv: self.duv + o.duv,
            dvv: self.dvv + o.dvv,
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v - o.v,
            du: self.du - o.du,
            dv: self.dv - o.dv,
            duu: self.duu - o.duu,
            duv: self.duv - o.duv,
            dvv: self.dvv - o.dvv,
        }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 {
            v: -self.v,
            du: -self.du,
            dv: -self.dv,
            duu: -self.duu,
            duv: -self.duv,
            dvv: -self.dvv,
        }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            du: self.du * o.v + self.v * o.du,
            dv: self.dv * o.v + self.v * o.dv,
            duu: self.duu * o.v + 2.0 * self.du * o.du + self.v * o.duu,
            duv: self.duv * o.v + self.du * o.dv + self.dv * o.du + self.v * o.duv,
            dvv: self.dvv * o.v + 2.0 * self.dv * o.dv + self.v * o.dvv,
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, s: f64) -> Jet2 {
        Jet2 {
            v: self.v * s,
            du: self.du * s,
            dv: self.dv * s,
            duu: self.duu * s,
            duv: self.duv * s,
            dvv: self.dvv * s,
        }
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(self, s: f64) -> Jet2 {
        Jet2 { v: self.v + s, ..self }
    }
}

/// A jet-valued ambient coordinate vector (4 padded slots).
pub type JetVec = [Jet2; 4];

pub fn jv_constant(x: &nalgebra::Vector4<f64>) -> JetVec {
    [
        Jet2::constant(x[0]),
        Jet2::constant(x[1]),
        Jet2::constant(x[2]),
        Jet2::constant(x[3]),
    ]
}

pub fn jv_add(a: &JetVec, b: &JetVec) -> JetVec {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

pub fn jv_scale(a: &JetVec, s: Jet2) -> JetVec {
    [a[0] * s, a[1] * s, a[2] * s, a[3] * s]
}

/// Euclidean dot product of jet vectors (padded slots contribute zero).
pub fn jv_dot(a: &JetVec, b: &JetVec) -> Jet2 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Minkowski product with signature (-, +, +, +) on the first n+1 slots.
pub fn jv_minkowski(a: &JetVec, b: &JetVec) -> Jet2 {
    a[1] * b[1] + a[2] * b[2] + a[3] * b[3] - a[0] * b[0]
}
