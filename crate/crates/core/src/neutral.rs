//! The neutral decomposition functions `chi_0 .. chi_N`.
//!
//! Each `chi_i` is `gamma_i (delta_i + K_i + nu_i)`: a monomial on a tiny
//! plateau carrying the jet, unit bumps at positive integers cancelling the
//! mutual `L^2` overlaps of the `delta`s, and a bump at a negative integer
//! topping the norm up to `c_i^2`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bumps::{kappa, rho_eps};
use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::funcrep::{l2_inner_estimate, FunctionRep};
use crate::profile::SingularityProfile;
use crate::quadrature::QuadratureSpec;

/// `n(i, j) = j(j-1)/2 + i + 1` for `i < j`, symmetric otherwise.
pub fn pair_index(i: usize, j: usize) -> Result<usize> {
    match i.cmp(&j) {
        std::cmp::Ordering::Equal => Err(Error::DiagonalIndex(i)),
        std::cmp::Ordering::Less => Ok(j * (j - 1) / 2 + i + 1),
        std::cmp::Ordering::Greater => pair_index(j, i),
    }
}

/// `delta_i = x^i / i! * rho_{eps_i}`.
pub fn build_delta(p: &SingularityProfile, i: usize) -> Result<FunctionRep> {
    let eps = p.eps_seq()?;
    let e = *eps.get(i).ok_or(Error::IndexOutOfRange { index: i, n: p.n })?;
    Ok(rho_eps(e)?.profile.monomial(i as u32))
}

/// Left side of the correction budget, evaluated two ways.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    /// `|delta_i + K_i|^2` by quadrature.
    pub lhs_direct: Ext,
    /// `sum_j |<delta_i, delta_j>|`.
    pub lhs_sum: Ext,
    /// `c_i^2`.
    pub rhs: f64,
}

impl Budget {
    pub fn relative_disagreement(&self) -> f64 {
        let d = (self.lhs_direct - self.lhs_sum).abs();
        if d.is_zero() {
            0.0
        } else {
            (d / self.lhs_sum.abs().max(self.lhs_direct.abs())).to_f64()
        }
    }

    pub fn holds(&self) -> bool {
        self.lhs_direct.max(self.lhs_sum) <= Ext::new(self.rhs)
    }
}

#[derive(Debug, Clone)]
pub struct NeutralSystem {
    pub profile: SingularityProfile,
    /// Tolerances used for construction and for the cached Gram matrices.
    pub quadrature: QuadratureSpec,
    pub eps: Vec<f64>,
    pub delta_fns: Vec<FunctionRep>,
    /// `<delta_i, delta_j>_{L^2}`.
    pub overlaps: Vec<Vec<Ext>>,
    /// `k_ij = sign(i - j) sqrt(<delta_j, delta_i>)`.
    pub k_coeff: Vec<Vec<Ext>>,
    /// `K_i`.
    pub correctives: Vec<FunctionRep>,
    /// Coefficient of `kappa_{-(i+1)}` in the unscaled `chi_i`.
    pub nu_coeff: Vec<Ext>,
    pub budgets: Vec<Budget>,
    /// `delta_i + K_i + nu_i`, with jet `e_i`.
    pub chi_hat: Vec<FunctionRep>,
    /// `gamma_i * chi_hat_i`.
    pub chi: Vec<FunctionRep>,
    pub gram_l2: DMatrix<f64>,
    pub gram_indef: DMatrix<f64>,
}

/// Construction needs overlaps far below any absolute floor.
fn construction_spec(q: &QuadratureSpec) -> QuadratureSpec {
    QuadratureSpec { rel_tol: q.rel_tol.min(1e-12), abs_tol: 0.0, max_panels: q.max_panels }
}

pub fn build_chi_system(p: &SingularityProfile, q: &QuadratureSpec) -> Result<NeutralSystem> {
    if let Some((k, c)) = p.c_sq.iter().enumerate().find(|(_, c)| **c > 1.0) {
        return Err(Error::InvalidProfile(format!(
            "c_{k}^2 = {c} exceeds 1; rescale the kernel so that every c_k^2 <= 1"
        )));
    }
    let qc = construction_spec(q);
    let n = p.n;
    let eps = p.eps_seq()?;
    let delta_fns: Vec<FunctionRep> = (0..=n).map(|i| build_delta(p, i)).collect::<Result<_>>()?;

    let mut overlaps = vec![vec![Ext::ZERO; n + 1]; n + 1];
    for i in 0..=n {
        for j in i..=n {
            // odd total degree integrates an odd function
            if (i + j) % 2 == 0 {
                let v = l2_inner_estimate(&delta_fns[i], &delta_fns[j], &qc)?.value;
                overlaps[i][j] = v;
                overlaps[j][i] = v;
            }
        }
    }

    let mut k_coeff = vec![vec![Ext::ZERO; n + 1]; n + 1];
    let mut correctives = Vec::with_capacity(n + 1);
    let mut budgets = Vec::with_capacity(n + 1);
    let mut nu_coeff = Vec::with_capacity(n + 1);
    let mut chi_hat = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut terms = Vec::new();
        for j in 0..=n {
            if j == i || overlaps[j][i].is_zero() {
                continue;
            }
            let k = if i > j { overlaps[j][i].sqrt() } else { -overlaps[j][i].sqrt() };
            k_coeff[i][j] = k;
            terms.push(kappa(pair_index(i, j)? as i64).profile.scale_ext(k));
        }
        let corrective = FunctionRep::sum(terms);
        let partial = FunctionRep::sum(vec![delta_fns[i].clone(), corrective.clone()]);
        let lhs_direct = l2_inner_estimate(&partial, &partial, &qc)?.value;
        let lhs_sum: Ext = overlaps[i].iter().map(|v| v.abs()).sum();
        let budget = Budget { lhs_direct, lhs_sum, rhs: p.c_sq[i] };
        if !budget.holds() {
            return Err(Error::BudgetExceeded {
                index: i,
                lhs: lhs_direct.max(lhs_sum).to_f64(),
                rhs: p.c_sq[i],
            });
        }
        let nu = (Ext::new(p.c_sq[i]) - lhs_direct).sqrt();
        chi_hat.push(FunctionRep::sum(vec![
            delta_fns[i].clone(),
            corrective.clone(),
            kappa(-(i as i64 + 1)).profile.scale_ext(nu),
        ]));
        correctives.push(corrective);
        budgets.push(budget);
        nu_coeff.push(nu);
    }
    let chi = chi_hat.iter().zip(&p.gamma).map(|(c, g)| c.scale(*g)).collect();
    let mut sys = NeutralSystem {
        profile: p.clone(),
        quadrature: qc,
        eps,
        delta_fns,
        overlaps,
        k_coeff,
        correctives,
        nu_coeff,
        budgets,
        chi_hat,
        chi,
        gram_l2: DMatrix::zeros(n + 1, n + 1),
        gram_indef: DMatrix::zeros(n + 1, n + 1),
    };
    sys.refresh_grams()?;
    Ok(sys)
}

impl NeutralSystem {
    pub fn n(&self) -> usize {
        self.profile.n
    }

    /// Recomputes both Gram matrices from the current `chi`.
    pub fn refresh_grams(&mut self) -> Result<()> {
        let n = self.n();
        let jets: Vec<Vec<Ext>> = self.chi.iter().map(|c| c.jet_at_zero_ext(n)).collect::<Result<_>>()?;
        for i in 0..=n {
            for l in i..=n {
                let l2 = l2_inner_estimate(&self.chi[i], &self.chi[l], &self.quadrature)?.value;
                let corr: Ext = (0..=n).map(|k| jets[i][k] * jets[l][k] * self.profile.c_sq[k]).sum();
                let (a, b) = (l2.to_f64(), (l2 - corr).to_f64());
                self.gram_l2[(i, l)] = a;
                self.gram_l2[(l, i)] = a;
                self.gram_indef[(i, l)] = b;
                self.gram_indef[(l, i)] = b;
            }
        }
        Ok(())
    }

    /// Tolerance for an entry pairing `chi_k` and `chi_l`.
    pub fn tolerance(&self, k: usize, l: usize) -> f64 {
        let scale = (self.profile.damped_weight(k) * self.profile.damped_weight(l)).sqrt();
        (1e-8 * scale).max(1e-12)
    }
}

/// `(|delta_i + K_i|^2, c_i^2)`, the first computed two ways.
pub fn correction_budget(sys: &NeutralSystem, i: usize) -> Result<Budget> {
    sys.budgets.get(i).copied().ok_or(Error::IndexOutOfRange { index: i, n: sys.n() })
}

/// Worst violation of one clause of the neutral-system properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseCheck {
    pub clause: String,
    pub index: (usize, usize),
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

fn worst(clause: &str, entries: impl Iterator<Item = ((usize, usize), f64, f64)>) -> ClauseCheck {
    let mut best: Option<((usize, usize), f64, f64)> = None;
    let mut pass = true;
    for (idx, measured, bound) in entries {
        pass &= measured <= bound;
        let score = if bound > 0.0 { measured / bound } else { measured };
        let better = match best {
            None => true,
            Some((_, m, b)) => score > if b > 0.0 { m / b } else { m },
        };
        if better {
            best = Some((idx, measured, bound));
        }
    }
    let (index, measured, bound) = best.unwrap_or(((0, 0), 0.0, 0.0));
    ClauseCheck { clause: clause.to_string(), index, measured, bound, pass }
}

/// Clauses: i norms, ii jets (exact), iii L^2 orthogonality, iv neutrality.
pub fn verify_neutral_system(sys: &NeutralSystem) -> Result<Vec<ClauseCheck>> {
    let n = sys.n();
    let p = &sys.profile;
    let norms = worst(
        "norm",
        (0..=n).map(|k| ((k, k), (sys.gram_l2[(k, k)] - p.damped_weight(k)).abs(), sys.tolerance(k, k))),
    );
    let mut jet_entries = Vec::new();
    for (k, c) in sys.chi.iter().enumerate() {
        let jet = c.jet_at_zero_ext(n)?;
        for (i, v) in jet.iter().enumerate() {
            let expect = if i == k { Ext::new(p.gamma[k]) } else { Ext::ZERO };
            jet_entries.push(((k, i), (*v - expect).abs().to_f64(), 0.0));
        }
    }
    let jets = worst("jet", jet_entries.into_iter());
    let orth = worst(
        "l2_orthogonality",
        (0..=n).flat_map(|k| (0..=n).filter(move |l| *l != k).map(move |l| (k, l))).map(|(k, l)| {
            ((k, l), sys.gram_l2[(k, l)].abs(), sys.tolerance(k, l))
        }),
    );
    let neutral = worst(
        "neutrality",
        (0..=n)
            .flat_map(|k| (0..=n).map(move |l| (k, l)))
            .map(|(k, l)| ((k, l), sys.gram_indef[(k, l)].abs(), sys.tolerance(k, l))),
    );
    Ok(vec![norms, jets, orth, neutral])
}
