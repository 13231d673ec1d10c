//! Momentum-space Schrödinger representation: `p` multiplies by the
//! coordinate, `q = i d/dp` differentiates. The factor `i` is carried as a
//! flag so every stored function stays real.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ext::Ext;
use crate::funcrep::{moment_estimate, FunctionRep};
use crate::krein::{embed, gram, v_basis_vector, GramMode};
use crate::neutral::NeutralSystem;
use crate::profile::{indefinite_inner, SingularityProfile};
use crate::quadrature::{gauss_legendre, integrate, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorTag {
    Momentum,
    Position,
}

/// `i^k * real`, with `k` taken mod 4.
#[derive(Debug, Clone)]
pub struct Tracked {
    pub real: FunctionRep,
    pub i_power: u8,
}

/// `x -> x f(x)`.
pub fn apply_momentum(f: &FunctionRep) -> FunctionRep {
    if f.is_structurally_zero() {
        return FunctionRep::zero();
    }
    f.monomial(1)
}

/// `i f'`.
pub fn apply_position(f: &FunctionRep) -> Result<Tracked> {
    Ok(Tracked { real: f.derivative()?, i_power: 1 })
}

/// `[q, p] f = q p f - p q f`. The derivative of `x f` is the sum of `f` and
/// `x f'`; the second term is cancelled structurally against `p q f`.
pub fn commutator(f: &FunctionRep) -> Result<Tracked> {
    let qp = apply_position(&apply_momentum(f))?;
    let pq = apply_momentum(&apply_position(f)?.real);
    let real = match qp.real.without_term(&pq) {
        Some(rest) => rest,
        None => FunctionRep::sum(vec![qp.real, pq.scale(-1.0)]),
    };
    Ok(Tracked { real, i_power: 1 })
}

/// `|<op f, g> - <f, op g>|` under the indefinite product. For `q` the form
/// is conjugate-linear in its first slot, so `i` flips sign across it and the
/// defect is `|<f', g> + <f, g'>|`.
pub fn symmetry_defect(op: OperatorTag, f: &FunctionRep, g: &FunctionRep, p: &SingularityProfile, q: &QuadratureSpec) -> Result<f64> {
    Ok(match op {
        OperatorTag::Momentum => {
            let lhs = indefinite_inner(&apply_momentum(f), g, p, q)?.value;
            let rhs = indefinite_inner(f, &apply_momentum(g), p, q)?.value;
            (lhs - rhs).abs()
        }
        OperatorTag::Position => {
            let lhs = indefinite_inner(&f.derivative()?, g, p, q)?.value;
            let rhs = indefinite_inner(f, &g.derivative()?, p, q)?.value;
            (lhs + rhs).abs()
        }
    })
}

/// The jet part of the momentum defect, `sum c_k^2 (f^(k) (pg)^(k) - (pf)^(k) g^(k))`
/// with `(pf)^(k)(0) = k f^(k-1)(0)`.
pub fn momentum_jet_mismatch(f: &FunctionRep, g: &FunctionRep, p: &SingularityProfile) -> Result<f64> {
    let (jf, jg) = (f.jet_at_zero_ext(p.n)?, g.jet_at_zero_ext(p.n)?);
    let shift = |j: &[Ext], k: usize| if k == 0 { Ext::ZERO } else { j[k - 1] * Ext::new(k as f64) };
    let s: Ext = (0..=p.n).map(|k| (jf[k] * shift(&jg, k) - shift(&jf, k) * jg[k]) * p.c_sq[k]).sum();
    Ok(s.to_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentIdentity {
    pub k: u32,
    pub lhs: f64,
    pub rhs: f64,
}

impl MomentIdentity {
    /// `|lhs - rhs| / max(1, |rhs|)`.
    pub fn defect(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.rhs.abs().max(1.0)
    }
}

/// Panels per smooth segment and nodes per panel of the fixed rule.
const FIXED_PANELS: usize = 64;
const FIXED_NODES: usize = 20;

/// `(re, im)` of `i^k`.
fn i_pow(k: u32) -> (f64, f64) {
    [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][(k % 4) as usize]
}

/// `i^k fhat^(k)(0)` with `fhat^(k)(0) = int (-i x)^k f(x) dx` by a fixed
/// composite Gauss rule, against the adaptive moment `mu_k`.
pub fn moment_identity_check(f: &FunctionRep, k: u32, q: &QuadratureSpec) -> Result<MomentIdentity> {
    let rule = gauss_legendre(FIXED_NODES);
    let mut real_integral = Ext::ZERO;
    for &(a, b) in f.pieces() {
        let mut pts = vec![a, b];
        pts.extend(f.breaks().iter().copied().filter(|x| *x > a && *x < b));
        pts.sort_by(f64::total_cmp);
        for w in pts.windows(2) {
            let h = (w[1] - w[0]) / FIXED_PANELS as f64;
            for panel in 0..FIXED_PANELS {
                let (lo, hi) = (w[0] + panel as f64 * h, w[0] + (panel + 1) as f64 * h);
                let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                for &(node, weight) in &rule {
                    let x = mid + half * node;
                    real_integral += f.eval_ext(x) * Ext::new(x).powi(k) * Ext::new(weight * half);
                }
            }
        }
    }
    // (-i)^k i^k = conj(i^k) i^k = |i^k|^2, which is real
    let (a, b) = i_pow(k);
    let lhs = (real_integral * Ext::new(a * a + b * b)).to_f64();
    let rhs = moment_estimate(f, k, q)?.value.to_f64();
    Ok(MomentIdentity { k, lhs, rhs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2ZeroMembership {
    pub moments: Vec<f64>,
    /// `int |x|^k |f|` per order, the scale of each moment.
    pub scales: Vec<f64>,
    pub member: bool,
}

/// Relative tolerance for a vanishing moment.
pub const MOMENT_TOLERANCE: f64 = 1e-9;

/// Whether all moments through `max_k` vanish.
pub fn l2_zero_membership(f: &FunctionRep, max_k: u32, q: &QuadratureSpec) -> Result<L2ZeroMembership> {
    let mut moments = Vec::new();
    let mut scales = Vec::new();
    for k in 0..=max_k {
        let m = moment_estimate(f, k, q)?;
        let scale = integrate(
            |x| f.eval_ext(x).abs() * Ext::new(x).powi(k).abs(),
            &breaks_of(f),
            q,
        )?;
        moments.push(m.value.to_f64());
        scales.push(scale.value.to_f64());
    }
    let member = moments.iter().zip(&scales).all(|(m, s)| m.abs() <= MOMENT_TOLERANCE * s.max(f64::MIN_POSITIVE));
    Ok(L2ZeroMembership { moments, scales, member })
}

fn breaks_of(f: &FunctionRep) -> Vec<f64> {
    let mut pts: Vec<f64> = f.pieces().iter().flat_map(|&(a, b)| [a, b]).collect();
    pts.extend(f.breaks().iter().copied());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.retain(|x| f.pieces().iter().any(|&(a, b)| *x >= a && *x <= b));
    pts
}

/// `<v_i, embed(p f)> - (pf)^i`, the second term from the jet shift
/// `(pf)^(i)(0) = i f^(i-1)(0)`.
pub fn delocalization_check(i: usize, f: &FunctionRep, sys: &NeutralSystem) -> Result<f64> {
    let n = sys.n();
    let v = v_basis_vector(i, n)?;
    let pf = apply_momentum(f);
    let pairing = gram(&v, &embed(&pf, sys)?, GramMode::Indefinite, &sys.quadrature)?;
    let shifted = if i == 0 { Ext::ZERO } else { f.jet_at_zero_ext(i - 1)?[i - 1] * Ext::new(i as f64) };
    Ok(pairing - (shifted / Ext::new(sys.profile.gamma[i])).to_f64())
}

/// `(f_-, f_+)`: the parts supported in `x <= 0` and `x >= 0`.
pub fn split_movers(f: &FunctionRep) -> Result<(FunctionRep, FunctionRep)> {
    f.split_at(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::bumps::{kappa, rho_eps};
    use crate::funcrep::{l2_inner, moment};
    use crate::neutral::build_chi_system;
    use crate::testfamily::{random_p_function, regression_family, rng};
    use std::sync::OnceLock;

    fn sys() -> &'static NeutralSystem {
        static SYS: OnceLock<NeutralSystem> = OnceLock::new();
        SYS.get_or_init(|| build_chi_system(&SingularityProfile::paper(6), &QuadratureSpec::default()).unwrap())
    }

    fn samples() -> impl Iterator<Item = f64> {
        (0..32).map(|i| -3.0 + 6.0 * i as f64 / 31.0)
    }

    #[test]
    fn momentum_action() {
        let s = sys();
        for k in 0..=5 {
            let jet = apply_momentum(&s.chi[k]).jet_at_zero(7).unwrap();
            for (j, v) in jet.iter().enumerate() {
                let expect = if j == k + 1 { (k + 1) as f64 * s.profile.gamma[k] } else { 0.0 };
                assert!((v - expect).abs() <= 1e-12 * expect.abs().max(1.0), "{k} {j} {v}");
            }
        }
        assert!(apply_momentum(&FunctionRep::zero()).is_structurally_zero());
        let f = rho_eps(0.7).unwrap().profile.translate(0.4).monomial(2);
        let pf = apply_momentum(&f);
        for x in samples() {
            assert_eq!(pf.eval(x), x * f.eval(x));
        }
    }

    #[test]
    fn momentum_preserves_p() {
        let mut g = rng(12);
        for _ in 0..30 {
            let pf = apply_momentum(&random_p_function(&mut g));
            assert!(pf.jet_at_zero(12).unwrap().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn position_action() {
        let f = rho_eps(1.0).unwrap().profile.translate(0.2).monomial(3);
        let t = apply_position(&f).unwrap();
        assert_eq!(t.i_power, 1);
        let (jf, jd) = (f.jet_at_zero(8).unwrap(), t.real.jet_at_zero(7).unwrap());
        for k in 0..7 {
            assert!((jd[k] - jf[k + 1]).abs() <= 1e-12 * jf[k + 1].abs().max(1.0));
        }
        let r = rho_eps(1.0).unwrap().profile.derivative().unwrap();
        for x in [-0.45, -0.2, 0.0, 0.3, 0.49] {
            assert_eq!(r.eval(x), 0.0);
        }
        let h = 1e-4;
        for x in samples() {
            let fd = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
            let d = t.real.eval(x);
            assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0), "{x} {fd} {d}");
        }
    }

    #[test]
    fn commutation_is_exact() {
        let mut g = rng(4);
        for f in regression_family().into_iter().chain((0..5).map(|_| random_p_function(&mut g))) {
            let c = commutator(&f).unwrap();
            assert_eq!(c.i_power, 1);
            for x in samples() {
                assert_eq!(c.real.eval(x), f.eval(x));
            }
            match (c.real.jet_at_zero(10), f.jet_at_zero(10)) {
                (Ok(a), Ok(b)) => assert_eq!(a, b),
                (a, b) => assert!(a.is_err() && b.is_err()),
            }
        }
    }

    #[test]
    fn symmetry_on_p() {
        let s = sys();
        let mut g = rng(31);
        for _ in 0..10 {
            let (f, h) = (random_p_function(&mut g), random_p_function(&mut g));
            for op in [OperatorTag::Momentum, OperatorTag::Position] {
                assert!(symmetry_defect(op, &f, &h, &s.profile, &s.quadrature).unwrap() <= 1e-8);
            }
            assert_eq!(symmetry_defect(OperatorTag::Momentum, &f, &f, &s.profile, &s.quadrature).unwrap(), 0.0);
        }
    }

    #[test]
    fn symmetry_fails_at_the_singularity() {
        let s = sys();
        // f(0) = f'(0) = 1, so the order-one jet terms no longer match
        let r = rho_eps(0.8).unwrap().profile;
        let f = FunctionRep::sum(vec![r.clone(), r.monomial(1)]);
        let d = symmetry_defect(OperatorTag::Momentum, &f, &s.chi[0], &s.profile, &s.quadrature).unwrap();
        let m = momentum_jet_mismatch(&f, &s.chi[0], &s.profile).unwrap();
        assert!(d > 1e-3);
        assert!((d - m.abs()).abs() <= 1e-9, "{d} {m}");
    }

    #[test]
    fn moment_identity() {
        let q = QuadratureSpec::default();
        for f in regression_family() {
            for k in 0..=8 {
                let m = moment_identity_check(&f, k, &q).unwrap();
                assert!(m.defect() <= 1e-6, "{k} {m:?}");
            }
        }
        let even = rho_eps(1.0).unwrap().profile;
        let m = moment_identity_check(&even, 1, &q).unwrap();
        assert!(m.lhs.abs() < 1e-14 && m.rhs.abs() < 1e-14);
        let m0 = moment_identity_check(&even, 0, &q).unwrap();
        assert!((m0.lhs - moment(&even, 0, &q).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn l2_zero_predicate() {
        let q = QuadratureSpec::default();
        let base = rho_eps(1.0).unwrap().profile.translate(0.3);
        let mut f = base.clone();
        for _ in 0..4 {
            f = f.derivative().unwrap();
        }
        assert!(l2_zero_membership(&f, 3, &q).unwrap().member);
        assert!(!l2_zero_membership(&f, 4, &q).unwrap().member);
        assert!(!l2_zero_membership(&base, 0, &q).unwrap().member);
    }

    #[test]
    fn delocalization() {
        let s = sys();
        let mut g = rng(17);
        for _ in 0..5 {
            let f = random_p_function(&mut g);
            for i in 0..=6 {
                assert!(delocalization_check(i, &f, s).unwrap().abs() <= 1e-8);
            }
        }
        for k in 0..=5 {
            for i in 0..=6 {
                assert!(delocalization_check(i, &s.chi[k], s).unwrap().abs() <= 1e-10);
            }
        }
        assert!(matches!(delocalization_check(7, &s.chi[0], s), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn movers() {
        let q = QuadratureSpec::default();
        let right = rho_eps(0.2).unwrap().profile.translate(1.5);
        let (m, p) = split_movers(&right).unwrap();
        assert!(m.is_structurally_zero() || m.support().is_none());
        assert_eq!(p.eval(1.5), right.eval(1.5));
        let f = FunctionRep::sum(vec![kappa(-2).profile, kappa(3).profile]);
        let (m, p) = split_movers(&f).unwrap();
        assert_eq!(l2_inner(&m, &p, &q).unwrap(), 0.0);
        for x in samples().chain([3.1, -1.9]) {
            assert_eq!(m.eval(x) + p.eval(x), f.eval(x));
            assert_eq!(m.eval(x), if x < 0.0 { f.eval(x) } else { 0.0 });
        }
        assert!(matches!(split_movers(&rho_eps(1.0).unwrap().profile), Err(Error::SupportStraddlesOrigin(..))));
    }
}
