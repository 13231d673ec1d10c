//! Finite decomposition `f = f^{N+} + sum f^i chi_i`, the majorant norm,
//! the Hilbert scalar product and the projection onto the positive part.

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::funcrep::{l2_inner_estimate, FunctionRep};
use crate::neutral::NeutralSystem;
use crate::profile::{indefinite_inner, InnerValue};

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub n: usize,
    /// `f^(i)(0)`.
    pub jet: Vec<Ext>,
    /// `f^i = f^(i)(0) / gamma_i`.
    pub coeffs: Vec<f64>,
    /// `f^{N+}`, with vanishing jet through `N`.
    pub remainder: FunctionRep,
    /// `<f, chi_i>`.
    pub pairings: Vec<InnerValue>,
}

pub fn decompose(f: &FunctionRep, sys: &NeutralSystem) -> Result<Decomposition> {
    let n = sys.n();
    let jet = f.jet_at_zero_ext(n)?;
    let mut terms = vec![f.clone()];
    for (i, a) in jet.iter().enumerate() {
        if !a.is_zero() {
            terms.push(sys.chi_hat[i].scale_ext(-*a));
        }
    }
    let remainder = if terms.len() == 1 { f.clone() } else { FunctionRep::sum(terms) };
    let coeffs = jet.iter().zip(&sys.profile.gamma).map(|(a, g)| (*a / Ext::new(*g)).to_f64()).collect();
    let pairings = sys
        .chi
        .iter()
        .map(|c| indefinite_inner(f, c, &sys.profile, &sys.quadrature))
        .collect::<Result<_>>()?;
    Ok(Decomposition { n, jet, coeffs, remainder, pairings })
}

/// `p(f)^2` split into its three parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Majorant {
    /// `<f^{N+}, f^{N+}>`, which equals the `L^2` norm since the jet vanishes.
    pub remainder_sq: f64,
    /// `sum |<f, chi_i>|^2`.
    pub pairing_sq: f64,
    /// `sum |f^i|^2`.
    pub coeff_sq: f64,
    /// Quadrature error of the whole square.
    pub error: f64,
}

impl Majorant {
    pub fn square(&self) -> f64 {
        self.remainder_sq + self.pairing_sq + self.coeff_sq
    }

    pub fn value(&self) -> f64 {
        self.square().max(0.0).sqrt()
    }
}

pub fn majorant_of(d: &Decomposition, f_norm_sq: f64, sys: &NeutralSystem) -> Result<Majorant> {
    let rem = l2_inner_estimate(&d.remainder, &d.remainder, &sys.quadrature)?;
    let pairing_sq: f64 = d.pairings.iter().map(|p| p.value * p.value).sum();
    let coeff_sq: f64 = d.coeffs.iter().map(|c| c * c).sum();
    let error = rem.error.to_f64() + d.pairings.iter().map(|p| 2.0 * p.value.abs() * p.quad_err).sum::<f64>();
    let m = Majorant { remainder_sq: rem.value.to_f64(), pairing_sq, coeff_sq, error };
    if m.square() < -1e-10 * (1.0 + f_norm_sq) {
        return Err(Error::NegativeSquare(m.square()));
    }
    Ok(m)
}

pub fn majorant(f: &FunctionRep, sys: &NeutralSystem) -> Result<Majorant> {
    let d = decompose(f, sys)?;
    let norm = l2_inner_estimate(f, f, &sys.quadrature)?.value.to_f64();
    majorant_of(&d, norm, sys)
}

/// `p(f)`.
pub fn majorant_norm(f: &FunctionRep, sys: &NeutralSystem) -> Result<f64> {
    Ok(majorant(f, sys)?.value())
}

/// Bound on the terms `i > N` of `p(f)^2`, from the three estimates of the
/// majorant proof with the exact jet where it is known.
pub fn majorant_tail(f: &FunctionRep, sys: &NeutralSystem, extra: usize) -> Result<f64> {
    let p = &sys.profile;
    let top = p.n + extra;
    let jet = f.jet_at_zero_ext(top.min(crate::funcrep::MAX_JET_ORDER))?;
    let norm = l2_inner_estimate(f, f, &sys.quadrature)?.value.to_f64();
    let mut tail = 0.0;
    for i in p.n + 1..jet.len() {
        let c = p.coefficient(i);
        let g = p.gamma_at(i);
        let d = jet[i].to_f64();
        tail += norm * c * g * g + c * c * g * g * d * d + d * d / (g * g);
    }
    Ok(tail)
}

pub fn hilbert_inner_of(a: &Decomposition, b: &Decomposition, sys: &NeutralSystem) -> Result<f64> {
    let rem = l2_inner_estimate(&a.remainder, &b.remainder, &sys.quadrature)?.value.to_f64();
    let pairs: f64 = a.pairings.iter().zip(&b.pairings).map(|(x, y)| x.value * y.value).sum();
    let coeffs: f64 = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y).sum();
    Ok(rem + pairs + coeffs)
}

/// `<f^{N+}, g^{N+}> + sum (<f, chi_i><chi_i, g> + f^i g^i)`.
pub fn hilbert_inner(f: &FunctionRep, g: &FunctionRep, sys: &NeutralSystem) -> Result<f64> {
    hilbert_inner_of(&decompose(f, sys)?, &decompose(g, sys)?, sys)
}

/// `P f = f^{N+}`.
pub fn project_plus(f: &FunctionRep, sys: &NeutralSystem) -> Result<FunctionRep> {
    Ok(decompose(f, sys)?.remainder)
}

/// `(1 + sum c_i^2 gamma_i^2)^{1/2}`.
pub fn projection_constant(sys: &NeutralSystem) -> f64 {
    (1.0 + sys.profile.weight_partial_sums.last().copied().unwrap_or(0.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bumps::kappa;
    use crate::funcrep::l2_inner;
    use crate::neutral::build_chi_system;
    use crate::profile::SingularityProfile;
    use crate::quadrature::QuadratureSpec;
    use crate::testfamily::{random_p_function, random_test_function, rng};
    use std::sync::OnceLock;

    fn sys() -> &'static NeutralSystem {
        static SYS: OnceLock<NeutralSystem> = OnceLock::new();
        SYS.get_or_init(|| build_chi_system(&SingularityProfile::paper(6), &QuadratureSpec::default()).unwrap())
    }

    #[test]
    fn zero_jet_leaves_function_alone() {
        let f = kappa(4).profile;
        let d = decompose(&f, sys()).unwrap();
        assert!(d.coeffs.iter().all(|c| *c == 0.0));
        for i in 0..32 {
            let x = 3.0 + i as f64 / 16.0;
            assert_eq!(d.remainder.eval(x), f.eval(x));
        }
    }

    #[test]
    fn chi_decomposes_to_a_unit_vector() {
        let s = sys();
        let d = decompose(&s.chi[3], s).unwrap();
        for (i, c) in d.coeffs.iter().enumerate() {
            assert_eq!(*c, if i == 3 { 1.0 } else { 0.0 });
        }
        for i in 0..64 {
            let x = -8.0 + 0.27 * i as f64;
            assert_eq!(d.remainder.eval(x), 0.0);
        }
        let p = majorant_norm(&s.chi[3], s).unwrap();
        assert!((p - 1.0).abs() < 1e-6);
    }

    #[test]
    fn remainder_is_exact() {
        let s = sys();
        let mut g = rng(11);
        for _ in 0..10 {
            let f = random_test_function(&mut g, &s.profile);
            let d = decompose(&f, s).unwrap();
            assert!(d.remainder.jet_at_zero_ext(6).unwrap().iter().all(|v| v.is_zero()));
            for j in 0..32 {
                let x = -3.0 + 0.2 * j as f64;
                let mut rhs = f.eval_ext(x);
                for (i, a) in d.jet.iter().enumerate() {
                    rhs -= *a * s.chi_hat[i].eval_ext(x);
                }
                assert_eq!(d.remainder.eval_ext(x), rhs);
            }
        }
    }

    #[test]
    fn majorant_on_p_and_zero() {
        let s = sys();
        assert_eq!(majorant_norm(&FunctionRep::zero(), s).unwrap(), 0.0);
        let mut g = rng(5);
        let f = random_p_function(&mut g);
        let m = majorant(&f, s).unwrap();
        let l2 = l2_inner(&f, &f, &s.quadrature).unwrap();
        let pairs: f64 = s.chi.iter().map(|c| l2_inner(&f, c, &s.quadrature).unwrap().powi(2)).sum();
        assert!((m.square() - (l2 + pairs)).abs() <= 1e-10 * (l2 + pairs).max(1e-12));
    }

    #[test]
    fn majorant_dominates_and_matches_hilbert() {
        let s = sys();
        let mut g = rng(21);
        for _ in 0..20 {
            let f = random_test_function(&mut g, &s.profile);
            let m = majorant(&f, s).unwrap();
            let ff = indefinite_inner(&f, &f, &s.profile, &s.quadrature).unwrap().value;
            assert!(m.square() >= ff.abs() - 1e-8);
            let h = hilbert_inner(&f, &f, s).unwrap();
            assert!((h - m.square()).abs() <= 1e-9 * m.square());
            // Pythagoras for the decomposition
            let d = decompose(&f, s).unwrap();
            let rem = l2_inner(&d.remainder, &d.remainder, &s.quadrature).unwrap();
            let cross: f64 = d.coeffs.iter().zip(&d.pairings).map(|(c, p)| 2.0 * c * p.value).sum();
            assert!((ff - (rem + cross)).abs() <= 1e-8 * (1.0 + ff.abs()));
        }
    }

    #[test]
    fn hilbert_on_chi_is_identity() {
        let s = sys();
        for i in 0..=6 {
            for j in 0..=6 {
                let h = hilbert_inner(&s.chi[i], &s.chi[j], s).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((h - expect).abs() < 1e-8, "({i},{j}) {h}");
            }
        }
    }

    #[test]
    fn projection_is_idempotent_and_bounded() {
        let s = sys();
        let c = projection_constant(s);
        let mut g = rng(8);
        for _ in 0..10 {
            let f = random_test_function(&mut g, &s.profile);
            let pf = project_plus(&f, s).unwrap();
            let ppf = project_plus(&pf, s).unwrap();
            for j in 0..32 {
                let x = -4.0 + 0.25 * j as f64;
                assert_eq!(pf.eval(x), ppf.eval(x));
            }
            assert!(majorant_norm(&pf, s).unwrap() <= c * majorant_norm(&f, s).unwrap() + 1e-8);
        }
    }

    #[test]
    fn truncation_stability() {
        let s4 = build_chi_system(&SingularityProfile::paper(4), &QuadratureSpec::default()).unwrap();
        let s6 = sys();
        let f = FunctionRep::sum(vec![kappa(2).profile, crate::bumps::rho_eps(0.5).unwrap().profile]);
        let p4 = majorant(&f, &s4).unwrap().square();
        let p6 = majorant(&f, s6).unwrap().square();
        let tail = majorant_tail(&f, &s4, 8).unwrap();
        assert!((p4 - p6).abs() <= tail + 1e-9, "{p4} {p6} {tail}");
    }
}
