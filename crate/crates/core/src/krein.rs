//! Coordinate model `K = H (+) span{v_i} (+) span{chi_i}` at truncation `N`.
//!
//! A vector is `(h, a, b)`: `h` a function with vanishing jet through `N`,
//! `a_i` its coordinate along `v_i` and `b_i` along `chi_i`. The indefinite
//! form pairs `a` with `b`; the Hilbert form is diagonal.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bumps::kappa;
use crate::error::{Error, Result};
use crate::funcrep::{l2_inner_estimate, FunctionRep};
use crate::neutral::NeutralSystem;
use crate::profile::indefinite_inner;
use crate::quadrature::QuadratureSpec;
use crate::regularize::decompose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GramMode {
    Indefinite,
    Hilbert,
}

#[derive(Debug, Clone)]
pub struct KreinVector {
    pub h: FunctionRep,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl KreinVector {
    /// Checks that `h` has vanishing jet through `N = a.len() - 1`.
    pub fn new(h: FunctionRep, a: Vec<f64>, b: Vec<f64>) -> Result<KreinVector> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::TruncationMismatch { expected: a.len(), found: b.len() });
        }
        for (order, v) in h.jet_at_zero_ext(a.len() - 1)?.into_iter().enumerate() {
            if !v.is_zero() {
                return Err(Error::NonzeroJet { order, value: v.to_f64() });
            }
        }
        Ok(KreinVector { h, a, b })
    }

    /// A vector with no `H` part.
    pub fn coordinates(a: Vec<f64>, b: Vec<f64>) -> KreinVector {
        assert_eq!(a.len(), b.len());
        KreinVector { h: FunctionRep::zero(), a, b }
    }

    pub fn n(&self) -> usize {
        self.a.len() - 1
    }
}

pub fn gram(x: &KreinVector, y: &KreinVector, mode: GramMode, q: &QuadratureSpec) -> Result<f64> {
    if x.a.len() != y.a.len() {
        return Err(Error::TruncationMismatch { expected: x.a.len(), found: y.a.len() });
    }
    let h = l2_inner_estimate(&x.h, &y.h, q)?.value.to_f64();
    let coords: f64 = match mode {
        GramMode::Indefinite => (0..x.a.len()).map(|i| x.a[i] * y.b[i] + x.b[i] * y.a[i]).sum(),
        GramMode::Hilbert => (0..x.a.len()).map(|i| x.a[i] * y.a[i] + x.b[i] * y.b[i]).sum(),
    };
    Ok(h + coords)
}

/// `J`: identity on `H`, swaps the `v_i` and `chi_i` axes.
pub fn metric_apply(x: &KreinVector) -> KreinVector {
    KreinVector { h: x.h.clone(), a: x.b.clone(), b: x.a.clone() }
}

/// `v_i = (0, e_i, 0)`.
pub fn v_basis_vector(i: usize, n: usize) -> Result<KreinVector> {
    if i > n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    let mut a = vec![0.0; n + 1];
    a[i] = 1.0;
    Ok(KreinVector::coordinates(a, vec![0.0; n + 1]))
}

/// `chi_i = (0, 0, e_i)`.
pub fn chi_axis_vector(i: usize, n: usize) -> Result<KreinVector> {
    Ok(metric_apply(&v_basis_vector(i, n)?))
}

/// `f -> (f^{N+}, <chi_i, f>, f^i)`.
pub fn embed(f: &FunctionRep, sys: &NeutralSystem) -> Result<KreinVector> {
    let d = decompose(f, sys)?;
    Ok(KreinVector { h: d.remainder, a: d.pairings.iter().map(|p| p.value).collect(), b: d.coeffs })
}

/// A symmetric matrix of pairings.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Symmetrizes `m` exactly by averaging with its transpose.
    pub fn new(m: DMatrix<f64>) -> Result<GramMatrix> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!("{}x{} Gram matrix", m.nrows(), m.ncols())));
        }
        let entries = (&m + m.transpose()) * 0.5;
        Ok(GramMatrix { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn from_vectors(vs: &[KreinVector], mode: GramMode, q: &QuadratureSpec) -> Result<GramMatrix> {
        let n = vs.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = gram(&vs[i], &vs[j], mode, q)?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(GramMatrix { entries: m })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// Degeneracy threshold relative to the largest eigenvalue magnitude.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Number of negative eigenvalues.
pub fn negativity_rank(g: &GramMatrix) -> Result<usize> {
    let ev = g.eigenvalues();
    let largest = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = DEGENERACY_THRESHOLD * largest;
    if let Some(v) = ev.iter().find(|v| v.abs() <= threshold) {
        return Err(Error::DegenerateGram { value: *v, threshold });
    }
    Ok(ev.iter().filter(|v| **v < 0.0).count())
}

/// Basis `{embed(kappa_{-1}) .. embed(kappa_{-(N+1)}), v_0 .. v_N, chi_0 .. chi_N}`
/// of the truncated model. The `kappa` carry the top-up bumps, so their
/// embeddings have nonzero `a` coordinates.
pub fn model_basis(sys: &NeutralSystem) -> Result<Vec<KreinVector>> {
    let n = sys.n();
    let mut basis = Vec::with_capacity(3 * (n + 1));
    for m in 1..=n + 1 {
        basis.push(embed(&kappa(-(m as i64)).profile, sys)?);
    }
    for i in 0..=n {
        basis.push(v_basis_vector(i, n)?);
    }
    for i in 0..=n {
        basis.push(chi_axis_vector(i, n)?);
    }
    Ok(basis)
}

/// Indefinite and Hilbert Gram matrices of [`model_basis`].
pub fn model_grams(sys: &NeutralSystem) -> Result<(GramMatrix, GramMatrix)> {
    let basis = model_basis(sys)?;
    Ok((
        GramMatrix::from_vectors(&basis, GramMode::Indefinite, &sys.quadrature)?,
        GramMatrix::from_vectors(&basis, GramMode::Hilbert, &sys.quadrature)?,
    ))
}

/// Matrix of `J` in orthonormal coordinates `(h_1..h_m, a_0..a_N, b_0..b_N)`.
pub fn coordinate_metric_matrix(h_dim: usize, n: usize) -> DMatrix<f64> {
    let d = h_dim + 2 * (n + 1);
    let mut j = DMatrix::zeros(d, d);
    for k in 0..h_dim {
        j[(k, k)] = 1.0;
    }
    for i in 0..=n {
        j[(h_dim + i, h_dim + n + 1 + i)] = 1.0;
        j[(h_dim + n + 1 + i, h_dim + i)] = 1.0;
    }
    j
}

/// One comparison of the embedded Gram form with the direct inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub pair: usize,
    pub n: usize,
    pub error: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
    /// Per pair: whether the error strictly decreases along the truncations.
    pub strictly_decreasing: Vec<bool>,
    pub reference_truncation: usize,
}

impl ConsistencyReport {
    pub fn within_bounds(&self) -> bool {
        self.rows.iter().all(|r| r.error <= r.bound)
    }
}

/// Truncations added on top of the largest system for the reference value.
pub const REFERENCE_EXTRA: usize = 8;

/// `|gram(embed f, embed g) - <f, g>|` per pair and truncation, against a
/// reference inner product at a higher truncation.
pub fn embedding_consistency(pairs: &[(FunctionRep, FunctionRep)], systems: &[&NeutralSystem]) -> Result<ConsistencyReport> {
    let top = systems.iter().map(|s| s.n()).max().ok_or(Error::EmptyFamily)?;
    let reference = systems[0].profile.with_truncation(top + REFERENCE_EXTRA)?;
    let mut rows = Vec::new();
    let mut strictly_decreasing = Vec::new();
    for (idx, (f, g)) in pairs.iter().enumerate() {
        let q = &systems[0].quadrature;
        let exact = indefinite_inner(f, g, &reference, q)?;
        let mut errors = Vec::new();
        for sys in systems {
            let (df, dg) = (decompose(f, sys)?, decompose(g, sys)?);
            let rem = l2_inner_estimate(&df.remainder, &dg.remainder, &sys.quadrature)?;
            let mut value = rem.value.to_f64();
            let mut quad = rem.error.to_f64();
            let mut scale = value.abs();
            for i in 0..=sys.n() {
                let (af, ag) = (&df.pairings[i], &dg.pairings[i]);
                let (bf, bg) = (df.coeffs[i], dg.coeffs[i]);
                value += af.value * bg + bf * ag.value;
                quad += af.quad_err * bg.abs() + ag.quad_err * bf.abs();
                scale += (af.value * bg).abs() + (bf * ag.value).abs();
            }
            let truncated = indefinite_inner(f, g, &sys.profile, &sys.quadrature)?;
            let error = (value - exact.value).abs();
            let bound = truncated.tail_bound
                + exact.tail_bound
                + quad
                + exact.quad_err
                + 64.0 * f64::EPSILON * (scale + exact.value.abs());
            errors.push(error);
            rows.push(ConsistencyRow { pair: idx, n: sys.n(), error, bound });
        }
        strictly_decreasing.push(errors.windows(2).all(|w| w[1] < w[0]));
    }
    Ok(ConsistencyReport { rows, strictly_decreasing, reference_truncation: top + REFERENCE_EXTRA })
}
