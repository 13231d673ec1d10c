//! Singularity data of the kernel, the damping sequence and the indefinite
//! inner product `<f, g> = (f, g)_{L^2} - sum_k c_k^2 f^(k)(0) g^(k)(0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::funcrep::{l2_inner_estimate, FunctionRep, MAX_JET_ORDER};
use crate::quadrature::QuadratureSpec;

/// How the Taylor coefficients `c_k^2` of the symbol are generated.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientRule {
    /// `c_0^2 = 1/2`, `c_k^2 = k^(-2k delta) e^(-2k delta) 2^(-k)`.
    Paper,
    /// `c_k^2 = 2^(-k)`.
    Mild,
    /// `c_k^2 = ratio^k`.
    Geometric(f64),
    /// A fixed list; indices past its end fall back to the fitted envelope.
    Explicit(Vec<f64>),
}

impl CoefficientRule {
    fn value(&self, k: usize, delta: f64) -> Option<f64> {
        match self {
            CoefficientRule::Paper if k == 0 => Some(0.5),
            CoefficientRule::Paper => {
                let kf = k as f64;
                Some((-2.0 * kf * delta * kf.ln() - 2.0 * kf * delta - kf * std::f64::consts::LN_2).exp())
            }
            CoefficientRule::Mild => Some(0.5f64.powi(k as i32)),
            CoefficientRule::Geometric(r) => Some(r.powi(k as i32)),
            CoefficientRule::Explicit(v) => v.get(k).copied(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CoefficientRule::Paper => "paper",
            CoefficientRule::Mild => "mild",
            CoefficientRule::Geometric(_) => "geometric",
            CoefficientRule::Explicit(_) => "explicit",
        }
    }
}

/// `k^(k p)` with `0^0 = 1`, as a natural logarithm.
fn ln_power_tower(k: usize, p: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * p * (k as f64).ln()
    }
}

/// Least-squares fit of `log c_k^2` against the infra-exponential bound
/// `log(C theta^k / (D^k e^{2k delta} k^{2k delta}))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    /// Fitted `theta / D`.
    pub ratio: f64,
    /// Smallest `C` making the bound hold for every `k <= N` at the fitted ratio.
    pub constant: f64,
    /// Largest deviation of the normalized logs from the fitted line.
    pub max_residual: f64,
    pub compliant: bool,
}

impl ComplianceReport {
    fn fit(c_sq: &[f64], delta: f64) -> ComplianceReport {
        let y: Vec<f64> = c_sq
            .iter()
            .enumerate()
            .map(|(k, c)| c.ln() + 2.0 * k as f64 * delta + 2.0 * ln_power_tower(k, delta))
            .collect();
        let first = if y.len() > 2 { 1 } else { 0 };
        let pts: Vec<(f64, f64)> = y.iter().enumerate().skip(first).map(|(k, v)| (k as f64, *v)).collect();
        let (intercept, slope) = if pts.len() < 2 {
            (y[0], f64::NEG_INFINITY)
        } else {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let b = sxy / sxx;
            (my - b * mx, b)
        };
        let max_residual = pts
            .iter()
            .map(|(k, v)| if slope.is_finite() { (v - intercept - slope * k).abs() } else { 0.0 })
            .fold(0.0, f64::max);
        let shifted = |k: usize| if slope.is_finite() { y[k] - slope * k as f64 } else { y[k] };
        let constant = (0..y.len()).map(shifted).fold(f64::NEG_INFINITY, f64::max).exp();
        let ratio = slope.exp();
        ComplianceReport { ratio, constant, max_residual, compliant: ratio <= 1.0 && constant.is_finite() }
    }
}

/// Kernel data `c_k^2`, orders `delta > beta > 1`, damping `gamma_k = k^(k delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularityProfile {
    pub c_sq: Vec<f64>,
    pub delta: f64,
    pub beta: f64,
    /// Decay index of the test-function class; carried, never used.
    pub alpha: Option<f64>,
    /// Offset in the regularity estimate, `(2 delta)^-1` unless given.
    pub rho_param: f64,
    pub n: usize,
    pub gamma: Vec<f64>,
    pub rule: CoefficientRule,
    pub compliance: ComplianceReport,
    /// Partial sums of `c_k^2 gamma_k^2`.
    pub weight_partial_sums: Vec<f64>,
}

/// An indefinite inner product value with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerValue {
    pub value: f64,
    /// Bound on the neglected correction terms `k > N`.
    pub tail_bound: f64,
    pub quad_err: f64,
}

/// `SingularityProfile` from explicit coefficients `c_0^2 .. c_N^2`.
pub fn make_profile(
    c_sq: Vec<f64>,
    delta: f64,
    beta: f64,
    n: usize,
    alpha: Option<f64>,
    rho_param: Option<f64>,
) -> Result<SingularityProfile> {
    if c_sq.len() != n + 1 {
        return Err(Error::InvalidProfile(format!("expected {} coefficients, got {}", n + 1, c_sq.len())));
    }
    SingularityProfile::build(CoefficientRule::Explicit(c_sq), delta, beta, n, alpha, rho_param)
}

impl SingularityProfile {
    pub fn build(
        rule: CoefficientRule,
        delta: f64,
        beta: f64,
        n: usize,
        alpha: Option<f64>,
        rho_param: Option<f64>,
    ) -> Result<SingularityProfile> {
        if !(beta > 1.0) {
            return Err(Error::InvalidProfile(format!("beta must exceed 1, got {beta}")));
        }
        if !(delta > beta) {
            return Err(Error::InvalidProfile(format!("delta must exceed beta, got delta={delta}, beta={beta}")));
        }
        if !delta.is_finite() {
            return Err(Error::InvalidProfile("delta must be finite".into()));
        }
        if n > MAX_JET_ORDER {
            return Err(Error::InvalidProfile(format!("truncation {n} exceeds {MAX_JET_ORDER}")));
        }
        if let CoefficientRule::Geometric(r) = rule {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidProfile(format!("geometric ratio must be positive, got {r}")));
            }
        }
        let mut c_sq = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let c = rule
                .value(k, delta)
                .ok_or_else(|| Error::InvalidProfile(format!("no coefficient for k={k}")))?;
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidProfile(format!("c_{k}^2 must be positive, got {c}")));
            }
            c_sq.push(c);
        }
        let rho_param = rho_param.unwrap_or(1.0 / (2.0 * delta));
        let gamma: Vec<f64> = (0..=n).map(|k| ln_power_tower(k, delta).exp()).collect();
        let mut acc = 0.0;
        let weight_partial_sums = (0..=n)
            .map(|k| {
                acc += c_sq[k] * gamma[k] * gamma[k];
                acc
            })
            .collect();
        let compliance = ComplianceReport::fit(&c_sq, delta);
        Ok(SingularityProfile { c_sq, delta, beta, alpha, rho_param, n, gamma, rule, compliance, weight_partial_sums })
    }

    /// Paper-compliant default: `delta = 2`, `beta = 1.5`.
    pub fn paper(n: usize) -> SingularityProfile {
        SingularityProfile::build(CoefficientRule::Paper, 2.0, 1.5, n, None, None).expect("valid default")
    }

    /// `c_k^2 = 2^-k`, for the abstract path.
    pub fn mild(n: usize) -> SingularityProfile {
        SingularityProfile::build(CoefficientRule::Mild, 2.0, 1.5, n, None, None).expect("valid default")
    }

    /// The same kernel at another truncation.
    pub fn with_truncation(&self, n: usize) -> Result<SingularityProfile> {
        SingularityProfile::build(self.rule.clone(), self.delta, self.beta, n, self.alpha, Some(self.rho_param))
    }

    /// `c_k^2` for any `k`: the rule where it applies, else the fitted envelope.
    pub fn coefficient(&self, k: usize) -> f64 {
        if k <= self.n {
            return self.c_sq[k];
        }
        self.rule.value(k, self.delta).unwrap_or_else(|| self.envelope(k))
    }

    /// Fitted bound `C (theta/D)^k / (e^{2k delta} k^{2k delta})`.
    pub fn envelope(&self, k: usize) -> f64 {
        let c = &self.compliance;
        let ratio_term = if c.ratio == 0.0 { if k == 0 { 0.0 } else { f64::NEG_INFINITY } } else { k as f64 * c.ratio.ln() };
        (c.constant.ln() + ratio_term - 2.0 * k as f64 * self.delta - 2.0 * ln_power_tower(k, self.delta)).exp()
    }

    /// `gamma_k = k^(k delta)`, `gamma_0 = 1`.
    pub fn gamma_at(&self, k: usize) -> f64 {
        ln_power_tower(k, self.delta).exp()
    }

    /// `c_k^2 gamma_k^2`.
    pub fn damped_weight(&self, k: usize) -> f64 {
        self.c_sq[k] * self.gamma[k] * self.gamma[k]
    }

    /// Whether `gamma_k c_k` decreases from `k = 2` on.
    pub fn damped_weights_decrease(&self) -> bool {
        (2..self.n).all(|k| self.damped_weight(k + 1) < self.damped_weight(k))
    }

    /// Default jet order used for tail estimates.
    pub fn jet_order(&self) -> usize {
        self.n + 4
    }

    /// Truncated symbol `J(xi) = sum_{k<=N} c_k^2 xi^k`.
    pub fn symbol_eval(&self, xi: f64) -> f64 {
        self.c_sq.iter().rev().fold(0.0, |acc, c| acc * xi + c)
    }

    /// Smallest `C_eps` with `J(xi) <= C_eps exp(eps |xi|^{1/(2 delta)})` on the samples.
    pub fn infra_exponential_constant(&self, eps: f64, samples: &[f64]) -> f64 {
        samples
            .iter()
            .map(|&xi| self.symbol_eval(xi).abs() / (eps * xi.abs().powf(1.0 / (2.0 * self.delta))).exp())
            .fold(0.0, f64::max)
    }

    /// `eps_i = (1/(3e)) prod_{k<=i} min(1, c_k^2)`.
    pub fn eps_seq(&self) -> Result<Vec<f64>> {
        let mut acc = 1.0 / (3.0 * std::f64::consts::E);
        let mut out = Vec::with_capacity(self.n + 1);
        for (i, c) in self.c_sq.iter().enumerate() {
            acc *= c.min(1.0);
            if acc < crate::bumps::MIN_EPS {
                return Err(Error::UnderflowRisk(format!("eps_{i} = {acc:e}")));
            }
            out.push(acc);
        }
        Ok(out)
    }
}

/// Smallest `C_f` with `|jet_k| <= C_f (B + rho)^k k^(k beta)`.
pub fn regularity_fit(jet: &[f64], b: f64, rho: f64, beta: f64) -> f64 {
    let ext: Vec<Ext> = jet.iter().map(|&v| Ext::new(v)).collect();
    regularity_fit_ext(&ext, b, rho, beta)
}

pub fn regularity_fit_ext(jet: &[Ext], b: f64, rho: f64, beta: f64) -> f64 {
    jet.iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(k, v)| (v.ln_abs() - k as f64 * (b + rho).ln() - ln_power_tower(k, beta)).exp())
        .fold(0.0, f64::max)
}

/// Terms summed past the last available jet entry when extrapolating tails.
const EXTRAPOLATED_TERMS: usize = 64;

/// Bound on `|sum_{k>N} c_k^2 f^(k)(0) g^(k)(0)|`, summed exactly while jets
/// are available and extrapolated with regularity constants beyond.
fn tail_bound(jf: &[Ext], jg: &[Ext], degree: usize, p: &SingularityProfile) -> f64 {
    let mut tail = Ext::ZERO;
    for k in p.n + 1..jf.len().min(jg.len()) {
        tail += (jf[k] * jg[k]).abs() * p.coefficient(k);
    }
    let last = jf.len().min(jg.len()) - 1;
    if degree > last {
        let (b, rho, beta) = (1.0, p.rho_param, p.beta);
        let cf = regularity_fit_ext(jf, b, rho, beta);
        let cg = regularity_fit_ext(jg, b, rho, beta);
        for k in last + 1..=degree.min(last + EXTRAPOLATED_TERMS) {
            let ln_term = cf.ln() + cg.ln() + 2.0 * (k as f64 * (b + rho).ln() + ln_power_tower(k, beta));
            tail += Ext::exp(ln_term) * p.coefficient(k);
        }
    }
    tail.to_f64()
}

/// `<f, g>` at the profile's truncation, with tail and quadrature error.
pub fn indefinite_inner(
    f: &FunctionRep,
    g: &FunctionRep,
    p: &SingularityProfile,
    q: &QuadratureSpec,
) -> Result<InnerValue> {
    let l2 = l2_inner_estimate(f, g, q)?;
    let degree = f.polynomial_degree().min(g.polynomial_degree());
    let order = degree.clamp(p.n, MAX_JET_ORDER);
    let jf = f.jet_at_zero_ext(order)?;
    let jg = g.jet_at_zero_ext(order)?;
    let correction: Ext = (0..=p.n).map(|k| jf[k] * jg[k] * p.c_sq[k]).sum();
    Ok(InnerValue {
        value: (l2.value - correction).to_f64(),
        tail_bound: tail_bound(&jf, &jg, degree, p),
        quad_err: l2.error.to_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bumps::rho_eps;
    use crate::funcrep::l2_inner;

    #[test]
    fn damping_values() {
        let p = SingularityProfile::paper(6);
        assert_eq!(p.gamma[0], 1.0);
        assert_eq!(p.gamma[1], 1.0);
        assert!((p.gamma[2] - 16.0).abs() < 1e-12);
        assert!((p.gamma[3] - 729.0).abs() < 1e-9);
    }

    #[test]
    fn paper_profile_compliance() {
        let p = SingularityProfile::paper(6);
        let c = p.compliance;
        assert!((c.ratio - 0.5).abs() < 1e-12, "{c:?}");
        assert!((c.constant - 1.0).abs() < 1e-12, "{c:?}");
        assert!(c.compliant);
        for k in 0..=6 {
            // direct substitution into the bound with C = 1, theta/D = 1/2
            let kf = k as f64;
            let bound = 0.5f64.powi(k as i32) / (2.0 * kf * 2.0).exp() / if k == 0 { 1.0 } else { kf.powf(4.0 * kf) };
            assert!(p.c_sq[k] <= bound * (1.0 + 1e-12));
        }
        assert!(!SingularityProfile::mild(6).compliance.compliant);
        assert!(p.damped_weights_decrease());
    }

    #[test]
    fn invalid_profiles() {
        assert!(make_profile(vec![1.0, -1.0], 2.0, 1.5, 1, None, None).is_err());
        assert!(make_profile(vec![1.0], 1.5, 1.5, 0, None, None).is_err());
        assert!(make_profile(vec![1.0], 2.0, 1.0, 0, None, None).is_err());
        assert!(make_profile(vec![1.0], 2.0, 1.5, 1, None, None).is_err());
    }

    #[test]
    fn symbol() {
        let p = SingularityProfile::paper(6);
        assert_eq!(p.symbol_eval(0.0), 0.5);
        let only = make_profile(vec![0.7], 2.0, 1.5, 0, None, None).unwrap();
        assert_eq!(only.symbol_eval(3.0), 0.7);
        let xs: Vec<f64> = (0..=1000).map(|i| 0.1 * i as f64).collect();
        let c = p.infra_exponential_constant(0.1, &xs);
        for &x in &xs {
            assert!(p.symbol_eval(x) <= c * (0.1 * x.powf(0.25)).exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn regularity_constants() {
        assert_eq!(regularity_fit(&[0.0, 0.0, 0.0], 1.0, 0.25, 1.5), 0.0);
        assert_eq!(regularity_fit(&[1.0, 0.0, 0.0, 0.0], 3.0, 0.25, 1.5), 1.0);
        // jet 2^k: the k = 1 entry dominates against (1.25)^k k^(1.5k)
        let c = regularity_fit(&[1.0, 2.0, 4.0], 1.0, 0.25, 1.5);
        assert!((c - 1.6).abs() < 1e-12);
    }

    #[test]
    fn eps_sequences() {
        let base = 1.0 / (3.0 * std::f64::consts::E);
        let big = make_profile(vec![1.0, 2.0, 5.0], 2.0, 1.5, 2, None, None).unwrap();
        assert_eq!(big.eps_seq().unwrap(), vec![base; 3]);
        let quarter = SingularityProfile::build(CoefficientRule::Geometric(0.25), 2.0, 1.5, 5, None, None).unwrap();
        let e = quarter.eps_seq().unwrap();
        for (i, v) in e.iter().enumerate() {
            let expect = base * 0.25f64.powi((i * (i + 1) / 2) as i32);
            assert!((v - expect).abs() <= 1e-15 * expect);
        }
        let paper = SingularityProfile::paper(6).eps_seq().unwrap();
        assert!(paper.windows(2).all(|w| w[1] <= w[0]));
        assert!(SingularityProfile::paper(12).eps_seq().is_err());
    }

    #[test]
    fn inner_product_examples() {
        let q = QuadratureSpec::default();
        let p = make_profile(vec![0.5], 2.0, 1.5, 0, None, None).unwrap();
        let r = rho_eps(1.0).unwrap().profile;
        let v = indefinite_inner(&r, &r, &p, &q).unwrap();
        let n2 = l2_inner(&r, &r, &q).unwrap();
        assert!((v.value - (n2 - 0.5)).abs() < 1e-14);
        assert_eq!(v.tail_bound, 0.0);

        let far = r.translate(5.0);
        let w = indefinite_inner(&far, &far, &SingularityProfile::paper(6), &q).unwrap();
        assert!((w.value - l2_inner(&far, &far, &q).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn tail_is_exact_for_terminating_jets() {
        let q = QuadratureSpec::default();
        let p = SingularityProfile::paper(2);
        let f = rho_eps(0.1).unwrap().profile.monomial(4);
        let v = indefinite_inner(&f, &f, &p, &q).unwrap();
        assert!((v.tail_bound - p.coefficient(4)).abs() <= 1e-15 * p.coefficient(4));
        let full = indefinite_inner(&f, &f, &p.with_truncation(6).unwrap(), &q).unwrap();
        assert!((v.value - full.value).abs() <= v.tail_bound * (1.0 + 1e-9));
    }

    #[test]
    fn symmetric_and_bilinear() {
        let q = QuadratureSpec::default();
        let p = SingularityProfile::paper(6);
        let f = FunctionRep::sum(vec![rho_eps(0.3).unwrap().profile.monomial(1), crate::bumps::kappa(2).profile]);
        let g = rho_eps(0.5).unwrap().profile.monomial(2).translate(0.05);
        let h = crate::bumps::kappa(-1).profile.scale(0.4);
        let fg = indefinite_inner(&f, &g, &p, &q).unwrap().value;
        let gf = indefinite_inner(&g, &f, &p, &q).unwrap().value;
        assert!((fg - gf).abs() <= 2e-10 * fg.abs().max(1e-4));
        let lin = FunctionRep::combine(&[(2.0, f.clone()), (-3.0, h.clone())]).unwrap();
        let lhs = indefinite_inner(&lin, &g, &p, &q).unwrap().value;
        let rhs = 2.0 * fg - 3.0 * indefinite_inner(&h, &g, &p, &q).unwrap().value;
        assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }
}
