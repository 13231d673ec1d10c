//! Sufficient conditions for regularizing a finite indefinite inner-product
//! space, the finite metric operator and the `beta~` estimate.
//!
//! Vectors are coordinate columns in a fixed basis; `G` holds the indefinite
//! form on that basis and the optional `H` a majorant Hilbert form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcrep::FunctionRep;
use crate::krein::{model_grams, GramMatrix};
use crate::neutral::NeutralSystem;
use crate::regularize::decompose;

/// Relative tolerance for entries of `G`.
pub const GRAM_TOLERANCE: f64 = 1e-10;
/// `maximality_check` threshold relative to the largest singular value.
pub const MAXIMALITY_THRESHOLD: f64 = 1e-8;
/// Fitted exponents are clamped here; finitely supported sequences sit on it.
pub const EXPONENT_FLOOR: f64 = -1000.0;

#[derive(Debug, Clone)]
pub struct AbstractSpace {
    pub gram: GramMatrix,
    /// Columns `chi~_i`.
    pub neutral: DMatrix<f64>,
    pub gamma: Vec<f64>,
    pub samples: Vec<DVector<f64>>,
    pub majorant: Option<GramMatrix>,
    /// Lower Cholesky factor of `X^T X`; its leading blocks factor every prefix.
    normal_factor: DMatrix<f64>,
}

/// On-disk form of an [`AbstractSpace`]; matrices are lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractInput {
    pub gram: Vec<Vec<f64>>,
    pub neutral: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub samples: Vec<Vec<f64>>,
    #[serde(default)]
    pub majorant: Option<Vec<Vec<f64>>>,
}

fn square_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::DimensionMismatch(format!("{what} is empty")));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!("{what} is not square")));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    check_finite(m.iter(), what)?;
    let scale = m.amax();
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::DimensionMismatch(format!("{what} is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(m)
}

fn check_finite<'a>(mut xs: impl Iterator<Item = &'a f64>, what: &str) -> Result<()> {
    if xs.any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("{what} has a non-finite entry")));
    }
    Ok(())
}

impl AbstractSpace {
    /// Validates dimensions, finiteness and independence of the neutral set.
    pub fn new(
        gram: GramMatrix,
        neutral: DMatrix<f64>,
        gamma: Vec<f64>,
        samples: Vec<DVector<f64>>,
        majorant: Option<GramMatrix>,
    ) -> Result<AbstractSpace> {
        let d = gram.dim();
        if neutral.nrows() != d || neutral.ncols() == 0 || neutral.ncols() > d {
            return Err(Error::DimensionMismatch(format!(
                "{} neutral vectors of length {} in dimension {d}",
                neutral.ncols(),
                neutral.nrows()
            )));
        }
        if gamma.len() != neutral.ncols() {
            return Err(Error::DimensionMismatch(format!("{} gammas for {} neutral vectors", gamma.len(), neutral.ncols())));
        }
        if let Some(g) = gamma.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::Config(format!("gamma must be positive, found {g}")));
        }
        if let Some(v) = samples.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch(format!("sample of length {} in dimension {d}", v.len())));
        }
        if let Some(h) = &majorant {
            if h.dim() != d {
                return Err(Error::DimensionMismatch(format!("majorant of dimension {} for {d}", h.dim())));
            }
        }
        let sv = neutral.clone().svd(false, false).singular_values;
        let top = sv.max();
        let rank = sv.iter().filter(|s| **s > 1e-12 * top).count();
        if top == 0.0 || rank < neutral.ncols() {
            return Err(Error::DependentNeutralSet { rank, count: neutral.ncols() });
        }
        let normal_factor = (neutral.transpose() * &neutral).cholesky().ok_or(Error::SingularDecomposition)?.l();
        Ok(AbstractSpace { gram, neutral, gamma, samples, majorant, normal_factor })
    }

    pub fn from_input(input: &AbstractInput) -> Result<AbstractSpace> {
        let g = square_matrix(&input.gram, "gram")?;
        let d = g.nrows();
        for (k, v) in input.neutral.iter().chain(&input.samples).enumerate() {
            if v.len() != d {
                return Err(Error::DimensionMismatch(format!("vector {k} has length {} in dimension {d}", v.len())));
            }
            check_finite(v.iter(), "vector")?;
        }
        if input.neutral.is_empty() {
            return Err(Error::DimensionMismatch("no neutral vectors".into()));
        }
        let neutral = DMatrix::from_fn(d, input.neutral.len(), |i, j| input.neutral[j][i]);
        let samples = input.samples.iter().map(|v| DVector::from_column_slice(v)).collect();
        let majorant = match &input.majorant {
            Some(h) => Some(GramMatrix::new(square_matrix(h, "majorant")?)?),
            None => None,
        };
        AbstractSpace::new(GramMatrix::new(g)?, neutral, input.gamma.clone(), samples, majorant)
    }

    /// Parses the TOML input format.
    pub fn from_toml_str(text: &str) -> Result<AbstractSpace> {
        let input: AbstractInput = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        AbstractSpace::from_input(&input)
    }

    pub fn to_input(&self) -> AbstractInput {
        let rows = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        AbstractInput {
            gram: rows(&self.gram.entries),
            neutral: self.neutral.column_iter().map(|c| c.iter().copied().collect()).collect(),
            gamma: self.gamma.clone(),
            samples: self.samples.iter().map(|v| v.iter().copied().collect()).collect(),
            majorant: self.majorant.as_ref().map(|h| rows(&h.entries)),
        }
    }

    pub fn dim(&self) -> usize {
        self.gram.dim()
    }

    /// Number of neutral vectors, `N + 1`.
    pub fn len(&self) -> usize {
        self.neutral.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.neutral.ncols() == 0
    }

    pub fn form(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&(&self.gram.entries * y))
    }

    fn tolerance(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (GRAM_TOLERANCE * self.gram.entries.amax() * x.norm() * y.norm()).max(1e-300)
    }

    /// `v = v~^{N+} + sum_{i<=N} v~^i chi~_i` using the first `N + 1`
    /// neutral vectors; coefficients solve the coordinate normal equations.
    pub fn decompose(&self, v: &DVector<f64>, n: usize) -> Result<(DVector<f64>, DVector<f64>)> {
        let x = self.neutral.columns(0, n + 1);
        let l = self.normal_factor.view((0, 0), (n + 1, n + 1));
        let y = l.solve_lower_triangular(&(x.transpose() * v)).ok_or(Error::SingularDecomposition)?;
        let coeffs = l.transpose().solve_upper_triangular(&y).ok_or(Error::SingularDecomposition)?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::SingularDecomposition);
        }
        let residue = v - x * &coeffs;
        Ok((coeffs, residue))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: u8,
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
    /// Per sample, `<v~^{N+}, v~^{N+}>` for `N = 0, 1, ..`.
    pub residue_trend: Vec<Vec<f64>>,
}

impl ConditionReport {
    pub fn passes(&self, condition: u8) -> bool {
        self.checks.iter().filter(|c| c.condition == condition).all(|c| c.pass)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Exponent `s` of the least-squares fit `|x_i| ~ (i+1)^s` over nonzero entries.
pub fn power_law_exponent(xs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, x)| (((i + 1) as f64).ln(), x.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return EXPONENT_FLOOR;
    }
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxy / sxx).max(EXPONENT_FLOOR)
}

/// Decay exponent `2s + 1` of the partial `l^2` tails of a sequence with
/// `|x_i| ~ (i+1)^s`; negative means the tails shrink.
pub fn tail_decay_exponent(xs: &[f64]) -> f64 {
    (2.0 * power_law_exponent(xs) + 1.0).max(EXPONENT_FLOOR)
}

/// `(gamma_i <chi~_i, v>, v~^i / gamma_i)` at the full truncation.
pub fn condition_sequences(s: &AbstractSpace, v: &DVector<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let (coeffs, _) = s.decompose(v, s.len() - 1)?;
    let gv = &s.gram.entries * v;
    let pair: Vec<f64> = (0..s.len()).map(|i| s.gamma[i] * s.neutral.column(i).dot(&gv)).collect();
    let coef: Vec<f64> = (0..s.len()).map(|i| coeffs[i] / s.gamma[i]).collect();
    Ok((pair, coef))
}

pub fn check_conditions(s: &AbstractSpace) -> Result<ConditionReport> {
    let mut checks = Vec::new();
    let n = s.len() - 1;

    let gx = &s.gram.entries * &s.neutral;
    let pairs = s.neutral.transpose() * &gx;
    let norms: Vec<f64> = s.neutral.column_iter().map(|c| c.norm()).collect();
    let scale = GRAM_TOLERANCE * s.gram.entries.amax();
    let (mut worst, mut bound, mut ratio, mut witness) = (0.0, 0.0, -1.0, None);
    for i in 0..=n {
        for j in i..=n {
            let (v, tol) = (pairs[(i, j)].abs(), (scale * norms[i] * norms[j]).max(1e-300));
            if witness.is_none() && v > tol {
                witness = Some(format!("<chi~_{i}, chi~_{j}> = {:e}", pairs[(i, j)]));
            }
            if v / tol > ratio {
                (worst, bound, ratio) = (v, tol, v / tol);
            }
        }
    }
    checks.push(ConditionCheck {
        condition: 0,
        name: "neutral_orthogonal".into(),
        measured: worst,
        bound,
        pass: witness.is_none(),
        witness,
    });

    let mut residue_trend = Vec::with_capacity(s.samples.len());
    let (mut worst, mut bound, mut witness) = (f64::INFINITY, 0.0, None);
    for (k, v) in s.samples.iter().enumerate() {
        // <r, r> = v^T G v - 2 c^T X^T G v + c^T (X^T G X) c for the prefixes
        let (vgv, xgv) = (s.form(v, v), gx.tr_mul(v));
        let mut trend = Vec::with_capacity(n + 1);
        for m in 0..n {
            let (c, _) = s.decompose(v, m)?;
            let p = pairs.view((0, 0), (m + 1, m + 1));
            trend.push(vgv - 2.0 * c.dot(&xgv.rows(0, m + 1)) + c.dot(&(p * &c)));
        }
        let (_, r) = s.decompose(v, n)?;
        let last = s.form(&r, &r);
        trend.push(last);
        let tol = s.tolerance(v, v);
        if last < worst {
            worst = last;
            bound = -tol;
        }
        if witness.is_none() && last < -tol {
            witness = Some(format!("sample {k}: <v~^(N+), v~^(N+)> = {last:e}"));
        }
        residue_trend.push(trend);
    }
    if s.samples.is_empty() {
        worst = 0.0;
    }
    checks.push(ConditionCheck {
        condition: 1,
        name: "residue_nonnegative".into(),
        measured: worst,
        bound,
        pass: witness.is_none(),
        witness,
    });

    let (mut worst, mut witness) = (EXPONENT_FLOOR, None);
    for (k, v) in s.samples.iter().enumerate() {
        let (pair, coef) = condition_sequences(s, v)?;
        for (label, seq) in [("gamma <chi~, v>", &pair), ("v~ / gamma", &coef)] {
            let e = tail_decay_exponent(seq);
            worst = worst.max(e);
            if witness.is_none() && e >= 0.0 {
                witness = Some(format!("sample {k}: {label} tail exponent {e}"));
            }
        }
    }
    checks.push(ConditionCheck {
        condition: 2,
        name: "l2_tail_decay".into(),
        measured: worst,
        bound: 0.0,
        pass: witness.is_none(),
        witness,
    });
    Ok(ConditionReport { checks, residue_trend })
}

/// `J = H^{-1} G`, so that `x^T G y = x^T H J y`.
pub fn finite_metric_solve(g: &GramMatrix, h: &GramMatrix) -> Result<DMatrix<f64>> {
    if g.dim() != h.dim() {
        return Err(Error::DimensionMismatch(format!("G is {} but H is {}", g.dim(), h.dim())));
    }
    let chol = h.entries.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(&g.entries))
}

/// Eigenvalues of `H^{-1} G`, through the congruent symmetric `L^{-1} G L^{-T}`.
pub fn metric_eigenvalues(g: &GramMatrix, h: &GramMatrix) -> Result<Vec<f64>> {
    if g.dim() != h.dim() {
        return Err(Error::DimensionMismatch(format!("G is {} but H is {}", g.dim(), h.dim())));
    }
    let l = h.entries.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.l();
    let li = l.clone().try_inverse().ok_or(Error::NotPositiveDefinite)?;
    let s = &li * &g.entries * li.transpose();
    Ok(GramMatrix::new(s)?.eigenvalues())
}

/// Largest deviation of `x^T G y - x^T H J y` over all basis pairs.
pub fn metric_identity_defect(g: &GramMatrix, h: &GramMatrix, j: &DMatrix<f64>) -> f64 {
    (&g.entries - &h.entries * j).amax()
}

/// Whether `J` is boundedly invertible at the given relative threshold.
pub fn maximality_check_with(j: &DMatrix<f64>, threshold: f64) -> bool {
    if !j.is_square() || j.is_empty() {
        return false;
    }
    let sv = j.clone().svd(false, false).singular_values;
    let top = sv.max();
    top > 0.0 && sv.min() >= threshold * top
}

pub fn maximality_check(j: &DMatrix<f64>) -> bool {
    maximality_check_with(j, MAXIMALITY_THRESHOLD)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaTilde {
    pub index: usize,
    pub radius: f64,
    pub value: f64,
    /// Number of sample lines that reach the radius.
    pub feasible: usize,
}

/// Sampled `sup |<chi~_i, v>|` over `v~^i = 1`, `|v|_H <= R`.
///
/// The affine set is searched along the lines through `u = chi~_i / v~^i(chi~_i)`
/// and each normalized sample `w`: on `u + t (w - u)` the pairing is
/// `|t <chi~_i, w>|` by neutrality, and the norm constraint is a quadratic in `t`.
pub fn beta_tilde_estimate(s: &AbstractSpace, i: usize, radius: f64) -> Result<BetaTilde> {
    if s.samples.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let h = s.majorant.as_ref().ok_or(Error::MissingMajorant)?;
    if i >= s.len() {
        return Err(Error::IndexOutOfRange { index: i, n: s.len() - 1 });
    }
    let n = s.len() - 1;
    let chi = s.neutral.column(i).into_owned();
    let (cu, _) = s.decompose(&chi, n)?;
    let u = &chi / cu[i];
    let gchi = &s.gram.entries * &chi;
    let hn = |x: &DVector<f64>, y: &DVector<f64>| x.dot(&(&h.entries * y));
    let (mut best, mut feasible) = (0.0f64, 0usize);
    for v in &s.samples {
        let (cv, _) = s.decompose(v, n)?;
        if cv[i].abs() <= 1e-14 * v.norm() {
            continue;
        }
        let w = v / cv[i];
        let slope = gchi.dot(&w).abs();
        let d = &w - &u;
        // |u + t d|^2 = a t^2 + 2 b t + c
        let (a, b, c) = (hn(&d, &d), hn(&u, &d), hn(&u, &u));
        let r2 = radius * radius;
        let t_max = if a <= 1e-300 {
            if c <= r2 { 0.0 } else { continue }
        } else {
            let disc = b * b - a * (c - r2);
            if disc < 0.0 {
                continue;
            }
            let root = disc.sqrt();
            ((-b + root) / a).abs().max(((-b - root) / a).abs())
        };
        feasible += 1;
        best = best.max(t_max * slope);
    }
    Ok(BetaTilde { index: i, radius, value: best, feasible })
}

/// Number of Hilbert-normalized coordinate vectors of the truncated model:
/// `N + 1` embedded top-up bumps, then the `v_i` axes, then the `chi_i` axes.
pub fn model_dimension(n: usize) -> usize {
    3 * (n + 1)
}

/// Coordinates `(0, a(f), b(f))` of `embed(f)` with the `H` part dropped.
pub fn model_coordinates(f: &FunctionRep, sys: &NeutralSystem) -> Result<DVector<f64>> {
    let n = sys.n();
    let d = decompose(f, sys)?;
    let mut x = DVector::zeros(model_dimension(n));
    for i in 0..=n {
        x[n + 1 + i] = d.pairings[i].value;
        x[2 * (n + 1) + i] = d.coeffs[i];
    }
    Ok(x)
}

/// Exports the truncated model with `chi~_i = chi_i / gamma_i` and samples
/// made of the bump basis vectors and the coordinates of `family`.
pub fn export_model(sys: &NeutralSystem, family: &[FunctionRep]) -> Result<AbstractSpace> {
    let n = sys.n();
    let (g, h) = model_grams(sys)?;
    let d = model_dimension(n);
    let gamma = sys.profile.gamma.clone();
    let neutral = DMatrix::from_fn(d, n + 1, |r, c| if r == 2 * (n + 1) + c { 1.0 / gamma[c] } else { 0.0 });
    let mut samples: Vec<DVector<f64>> = (0..=n)
        .map(|m| {
            let mut e = DVector::zeros(d);
            e[m] = 1.0;
            e
        })
        .collect();
    for f in family {
        samples.push(model_coordinates(f, sys)?);
    }
    AbstractSpace::new(g, neutral, gamma, samples, Some(h))
}

/// Hyperbolic pairs `(v_i, chi~_i)`, `i < m`, with samples satisfying
/// `|<chi~_i, v>| = C (i+1)^{-(1+delta)}` and bounded `v~^i`, and
/// `gamma_i = (i+1)^{sign (1/2 + eps)}`.
pub fn polynomial_example(m: usize, delta: f64, eps: f64, sign: f64, samples: usize, seed: u64) -> Result<AbstractSpace> {
    use rand::Rng;
    let mut rng = crate::testfamily::rng(seed);
    let d = 2 * m;
    let mut g = DMatrix::zeros(d, d);
    for i in 0..m {
        g[(i, m + i)] = 1.0;
        g[(m + i, i)] = 1.0;
    }
    let neutral = DMatrix::from_fn(d, m, |r, c| if r == m + c { 1.0 } else { 0.0 });
    let gamma = (0..m).map(|i| ((i + 1) as f64).powf(sign * (0.5 + eps))).collect();
    let family = (0..samples)
        .map(|_| {
            let c = rng.random_range(0.5..2.0);
            let mut v = DVector::zeros(d);
            for i in 0..m {
                v[i] = c * ((i + 1) as f64).powf(-(1.0 + delta));
                v[m + i] = rng.random_range(0.5..1.0);
            }
            v
        })
        .collect();
    AbstractSpace::new(GramMatrix::new(g)?, neutral, gamma, family, Some(GramMatrix::new(DMatrix::identity(d, d))?))
}
