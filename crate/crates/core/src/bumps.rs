//! Plateau cutoffs `rho_eps` and the orthonormal unit bumps `kappa_n`.
//!
//! The transition of `rho_1` on `1/2 < |u| < 3/2` is the normalized tail
//! integral of `b(s) = exp(-1/((s - 1/2)(3/2 - s)))`. Cumulative integrals of
//! `b` are tabulated once on a fine panel grid; a point evaluation adds one
//! partial-panel Gauss-Legendre sum. Derivatives come from the Taylor series of
//! `b`, so `rho^(d)` is available in closed form for every order.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::funcrep::{l2_inner, FunctionRep};
use crate::quadrature::{gauss_legendre, QuadratureSpec};

pub const PLATEAU_HALF_WIDTH: f64 = 0.5;
pub const SUPPORT_HALF_WIDTH: f64 = 1.5;

/// Smallest plateau half-scale accepted by [`rho_eps`].
pub const MIN_EPS: f64 = 1e-250;

const TABLE_PANELS: usize = 1024;
const PANEL_POINTS: usize = 16;

struct ShapeTable {
    nodes: Vec<(f64, f64)>,
    /// `left[k] = int_{1/2}^{s_k} b`
    left: Vec<f64>,
    /// `right[k] = int_{s_k}^{3/2} b`
    right: Vec<f64>,
    total: f64,
}

fn b(s: f64) -> f64 {
    let q = (s - 0.5) * (1.5 - s);
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

fn knot(k: usize) -> f64 {
    0.5 + k as f64 / TABLE_PANELS as f64
}

impl ShapeTable {
    fn partial(&self, a: f64, c: f64) -> f64 {
        let m = 0.5 * (a + c);
        let h = 0.5 * (c - a);
        self.nodes.iter().map(|&(x, w)| w * b(m + h * x)).sum::<f64>() * h
    }
}

fn table() -> &'static ShapeTable {
    static TABLE: OnceLock<ShapeTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = ShapeTable {
            nodes: gauss_legendre(PANEL_POINTS),
            left: vec![0.0; TABLE_PANELS + 1],
            right: vec![0.0; TABLE_PANELS + 1],
            total: 0.0,
        };
        let panels: Vec<f64> = (0..TABLE_PANELS).map(|k| t.partial(knot(k), knot(k + 1))).collect();
        for k in 0..TABLE_PANELS {
            t.left[k + 1] = t.left[k] + panels[k];
        }
        for k in (0..TABLE_PANELS).rev() {
            t.right[k] = t.right[k + 1] + panels[k];
        }
        t.total = t.left[TABLE_PANELS];
        t
    })
}

/// `rho_1(u)` on the transition band, `1/2 < s = |u| < 3/2`.
fn transition(s: f64) -> f64 {
    let t = table();
    let k = (((s - 0.5) * TABLE_PANELS as f64) as usize).min(TABLE_PANELS - 1);
    if s < 1.0 {
        1.0 - (t.left[k] + t.partial(knot(k), s)) / t.total
    } else {
        (t.right[k + 1] + t.partial(s, knot(k + 1))) / t.total
    }
}

/// `b^(m)(s)` from the Taylor series of `exp(-1/q(s + h))`.
fn b_derivative(s: f64, m: usize) -> f64 {
    let q0 = (s - 0.5) * (1.5 - s);
    if q0 <= 0.0 {
        return 0.0;
    }
    let phi0 = -1.0 / q0;
    if phi0 < -700.0 {
        return 0.0;
    }
    let (q1, q2) = (2.0 - 2.0 * s, -1.0);
    let mut r = vec![0.0; m + 1];
    r[0] = 1.0 / q0;
    for n in 1..=m {
        let prev2 = if n >= 2 { r[n - 2] } else { 0.0 };
        r[n] = -(q1 * r[n - 1] + q2 * prev2) / q0;
    }
    let phi: Vec<f64> = r.iter().map(|v| -v).collect();
    let mut e = vec![0.0; m + 1];
    e[0] = phi0.exp();
    for n in 1..=m {
        let acc: f64 = (1..=n).map(|k| k as f64 * phi[k] * e[n - k]).sum();
        e[n] = acc / n as f64;
    }
    let fact: f64 = (1..=m).map(|k| k as f64).product();
    fact * e[m]
}

/// `rho_1^(order)(u)`.
pub(crate) fn plateau_shape(u: f64, order: u32) -> f64 {
    let s = u.abs();
    if order == 0 {
        return if s <= PLATEAU_HALF_WIDTH {
            1.0
        } else if s >= SUPPORT_HALF_WIDTH {
            0.0
        } else {
            transition(s)
        };
    }
    if s <= PLATEAU_HALF_WIDTH || s >= SUPPORT_HALF_WIDTH {
        return 0.0;
    }
    let sign = if u < 0.0 && order % 2 == 1 { -1.0 } else { 1.0 };
    -sign * b_derivative(s, order as usize - 1) / table().total
}

/// The cutoff `rho_eps`: 1 on `|x| <= eps/2`, 0 on `|x| >= 3 eps/2`.
#[derive(Debug, Clone)]
pub struct PlateauBump {
    pub eps: f64,
    pub profile: FunctionRep,
}

pub fn rho_eps(eps: f64) -> Result<PlateauBump> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidProfile(format!("plateau scale must be positive, got {eps}")));
    }
    if eps < MIN_EPS {
        return Err(Error::UnderflowRisk(format!("plateau scale {eps:e} below {MIN_EPS:e}")));
    }
    Ok(PlateauBump { eps, profile: FunctionRep::plateau().dilate(eps) })
}

/// `kappa_n = rho_{1/3}(x - n) / |rho_{1/3}|`, supported in `[n - 1/2, n + 1/2]`.
#[derive(Debug, Clone)]
pub struct UnitBump {
    pub n: i64,
    pub profile: FunctionRep,
}

/// `|rho_{1/3}|_{L^2}`, computed once.
pub fn rho_third_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| {
        let q = QuadratureSpec { rel_tol: 1e-14, abs_tol: 0.0, max_panels: 100_000 };
        let r = FunctionRep::plateau().dilate(1.0 / 3.0);
        l2_inner(&r, &r, &q).expect("norm of rho_1/3 converges").sqrt()
    })
}

fn unit_profile() -> &'static FunctionRep {
    static UNIT: OnceLock<FunctionRep> = OnceLock::new();
    UNIT.get_or_init(|| FunctionRep::plateau().dilate(1.0 / 3.0).scale(1.0 / rho_third_norm()))
}

pub fn kappa(n: i64) -> UnitBump {
    assert!(n.abs() <= 1_000_000, "kappa position out of range: {n}");
    let base = unit_profile();
    let profile = if n == 0 { base.clone() } else { base.translate(n as f64) };
    UnitBump { n, profile }
}
