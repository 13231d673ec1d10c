//! Smooth compactly supported functions as expression trees.
//!
//! Leaves are the unit plateau bump `rho_1` (and its derivatives); inner nodes
//! translate, dilate, multiply by `x^i / i!`, scale, or sum. Every node knows
//! its support pieces and the break points where its smoothness class changes
//! (plateau joins), so quadrature panels can be aligned to them.
//!
//! Jets are exact wherever every bump is evaluated inside its plateau or
//! outside its support: there the tree is locally a polynomial and Leibniz'
//! rule reduces to polynomial differentiation.

use std::fmt;
use std::sync::Arc;

use crate::bumps::{plateau_shape, PLATEAU_HALF_WIDTH, SUPPORT_HALF_WIDTH};
use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::quadrature::{integrate_with_magnitude, Estimate, QuadratureSpec};

/// Largest supported jet order and derivative order of a bump leaf.
pub const MAX_JET_ORDER: usize = 40;

#[derive(Clone)]
enum Node {
    Zero,
    /// `order`-th derivative of `rho_1`.
    Bump { order: u32 },
    /// `x -> inner(x - shift)`
    Translate { shift: f64, inner: FunctionRep },
    /// `x -> inner(x / width)`
    Dilate { width: f64, inner: FunctionRep },
    /// `x -> x^degree / degree! * inner(x)`
    Monomial { degree: u32, inner: FunctionRep },
    Scalar { coeff: Ext, inner: FunctionRep },
    Sum(Vec<FunctionRep>),
}

struct Inner {
    node: Node,
    /// Disjoint sorted closed intervals covering the support.
    pieces: Vec<(f64, f64)>,
    /// Sorted points where the function may fail to be analytic.
    breaks: Vec<f64>,
}

/// An immutable, cheaply clonable function tree.
#[derive(Clone)]
pub struct FunctionRep(Arc<Inner>);

impl fmt::Debug for FunctionRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0.node {
            Node::Zero => write!(f, "0"),
            Node::Bump { order: 0 } => write!(f, "rho"),
            Node::Bump { order } => write!(f, "rho^({order})"),
            Node::Translate { shift, inner } => write!(f, "T[{shift}]{inner:?}"),
            Node::Dilate { width, inner } => write!(f, "D[{width:e}]{inner:?}"),
            Node::Monomial { degree, inner } => write!(f, "x^{degree}/{degree}!*{inner:?}"),
            Node::Scalar { coeff, inner } => write!(f, "{coeff}*{inner:?}"),
            Node::Sum(terms) => {
                write!(f, "(")?;
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{t:?}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn merge_pieces(mut pieces: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
    for p in pieces {
        match out.last_mut() {
            Some(last) if p.0 <= last.1 => last.1 = last.1.max(p.1),
            _ => out.push(p),
        }
    }
    out
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

fn factorial(n: u32) -> Ext {
    (1..=n).fold(Ext::ONE, |acc, k| acc * Ext::new(k as f64))
}

impl FunctionRep {
    fn from_node(node: Node) -> FunctionRep {
        let (pieces, breaks) = match &node {
            Node::Zero => (Vec::new(), Vec::new()),
            Node::Bump { .. } => (
                vec![(-SUPPORT_HALF_WIDTH, SUPPORT_HALF_WIDTH)],
                vec![-SUPPORT_HALF_WIDTH, -PLATEAU_HALF_WIDTH, PLATEAU_HALF_WIDTH, SUPPORT_HALF_WIDTH],
            ),
            Node::Translate { shift, inner } => (
                inner.pieces().iter().map(|&(a, b)| (a + shift, b + shift)).collect(),
                inner.0.breaks.iter().map(|x| x + shift).collect(),
            ),
            Node::Dilate { width, inner } => (
                inner.pieces().iter().map(|&(a, b)| (a * width, b * width)).collect(),
                inner.0.breaks.iter().map(|x| x * width).collect(),
            ),
            Node::Monomial { inner, .. } | Node::Scalar { inner, .. } => {
                (inner.0.pieces.clone(), inner.0.breaks.clone())
            }
            Node::Sum(terms) => (
                merge_pieces(terms.iter().flat_map(|t| t.0.pieces.iter().copied()).collect()),
                sorted_unique(terms.iter().flat_map(|t| t.0.breaks.iter().copied()).collect()),
            ),
        };
        FunctionRep(Arc::new(Inner { node, pieces, breaks }))
    }

    pub fn zero() -> FunctionRep {
        FunctionRep::from_node(Node::Zero)
    }

    /// The unit plateau bump `rho_1`: 1 on `[-1/2, 1/2]`, 0 outside `[-3/2, 3/2]`.
    pub fn plateau() -> FunctionRep {
        FunctionRep::from_node(Node::Bump { order: 0 })
    }

    pub fn translate(&self, shift: f64) -> FunctionRep {
        assert!(shift.is_finite());
        FunctionRep::from_node(Node::Translate { shift, inner: self.clone() })
    }

    /// `x -> self(x / width)`, `width > 0`.
    pub fn dilate(&self, width: f64) -> FunctionRep {
        assert!(width > 0.0 && width.is_finite(), "dilation width must be positive");
        FunctionRep::from_node(Node::Dilate { width, inner: self.clone() })
    }

    /// `x -> x^degree / degree! * self(x)`.
    pub fn monomial(&self, degree: u32) -> FunctionRep {
        FunctionRep::from_node(Node::Monomial { degree, inner: self.clone() })
    }

    pub fn scale(&self, coeff: f64) -> FunctionRep {
        self.scale_ext(Ext::new(coeff))
    }

    pub fn scale_ext(&self, coeff: Ext) -> FunctionRep {
        FunctionRep::from_node(Node::Scalar { coeff, inner: self.clone() })
    }

    pub fn sum(terms: Vec<FunctionRep>) -> FunctionRep {
        FunctionRep::from_node(Node::Sum(terms))
    }

    /// Linear combination `sum c_i f_i`.
    pub fn combine(terms: &[(f64, FunctionRep)]) -> Result<FunctionRep> {
        FunctionRep::combine_ext(&terms.iter().map(|(c, f)| (Ext::new(*c), f.clone())).collect::<Vec<_>>())
    }

    pub fn combine_ext(terms: &[(Ext, FunctionRep)]) -> Result<FunctionRep> {
        if terms.is_empty() {
            return Err(Error::EmptyCombination);
        }
        Ok(FunctionRep::sum(terms.iter().map(|(c, f)| f.scale_ext(*c)).collect()))
    }

    pub fn is_structurally_zero(&self) -> bool {
        self.0.pieces.is_empty()
    }

    /// Support pieces: disjoint sorted closed intervals.
    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.0.pieces
    }

    pub fn breaks(&self) -> &[f64] {
        &self.0.breaks
    }

    /// Convex hull of the support, `None` for the zero function.
    pub fn support(&self) -> Option<(f64, f64)> {
        let p = &self.0.pieces;
        Some((p.first()?.0, p.last()?.1))
    }

    fn outside(&self, x: f64) -> bool {
        match self.support() {
            None => true,
            Some((a, b)) => x < a || x > b,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_ext(x).to_f64()
    }

    pub fn eval_ext(&self, x: f64) -> Ext {
        if self.outside(x) {
            return Ext::ZERO;
        }
        match &self.0.node {
            Node::Zero => Ext::ZERO,
            Node::Bump { order } => Ext::new(plateau_shape(x, *order)),
            Node::Translate { shift, inner } => inner.eval_ext(x - shift),
            Node::Dilate { width, inner } => inner.eval_ext(x / width),
            Node::Monomial { degree, inner } => {
                let v = inner.eval_ext(x);
                if v.is_zero() {
                    return v;
                }
                v * Ext::new(x).powi(*degree) / factorial(*degree)
            }
            Node::Scalar { coeff, inner } => *coeff * inner.eval_ext(x),
            Node::Sum(terms) => terms.iter().map(|t| t.eval_ext(x)).sum(),
        }
    }

    /// Value together with the sum of the magnitudes of all terms, which
    /// bounds the rounding noise of the value.
    pub fn eval_with_magnitude(&self, x: f64) -> (Ext, Ext) {
        if self.outside(x) {
            return (Ext::ZERO, Ext::ZERO);
        }
        match &self.0.node {
            Node::Zero => (Ext::ZERO, Ext::ZERO),
            Node::Bump { order } => {
                let v = Ext::new(plateau_shape(x, *order));
                (v, v.abs())
            }
            Node::Translate { shift, inner } => inner.eval_with_magnitude(x - shift),
            Node::Dilate { width, inner } => inner.eval_with_magnitude(x / width),
            Node::Monomial { degree, inner } => {
                let (v, m) = inner.eval_with_magnitude(x);
                if m.is_zero() {
                    return (v, m);
                }
                let w = Ext::new(x).powi(*degree) / factorial(*degree);
                (v * w, m * w.abs())
            }
            Node::Scalar { coeff, inner } => {
                let (v, m) = inner.eval_with_magnitude(x);
                (*coeff * v, coeff.abs() * m)
            }
            Node::Sum(terms) => terms.iter().fold((Ext::ZERO, Ext::ZERO), |acc, t| {
                let (v, m) = t.eval_with_magnitude(x);
                (acc.0 + v, acc.1 + m)
            }),
        }
    }

    /// Derivatives `f^(k)(x0)` for `k = 0..=order`.
    pub fn jet_at_ext(&self, x0: f64, order: usize) -> Result<Vec<Ext>> {
        if order > MAX_JET_ORDER {
            return Err(Error::JetOrderTooLarge { requested: order, max: MAX_JET_ORDER });
        }
        if self.outside(x0) {
            return Ok(vec![Ext::ZERO; order + 1]);
        }
        Ok(match &self.0.node {
            Node::Zero => vec![Ext::ZERO; order + 1],
            Node::Bump { order: d } => {
                let u = x0.abs();
                if u <= PLATEAU_HALF_WIDTH {
                    (0..=order).map(|k| if *d == 0 && k == 0 { Ext::ONE } else { Ext::ZERO }).collect()
                } else if u >= SUPPORT_HALF_WIDTH {
                    vec![Ext::ZERO; order + 1]
                } else {
                    return Err(Error::UnsupportedNode(format!(
                        "plateau bump evaluated in its transition band at u = {x0}"
                    )));
                }
            }
            Node::Translate { shift, inner } => inner.jet_at_ext(x0 - shift, order)?,
            Node::Dilate { width, inner } => {
                let j = inner.jet_at_ext(x0 / width, order)?;
                let inv = Ext::new(*width).recip();
                j.into_iter().enumerate().map(|(k, v)| v * inv.powi(k as u32)).collect()
            }
            Node::Monomial { degree, inner } => {
                let f = inner.jet_at_ext(x0, order)?;
                let d = *degree as usize;
                // derivatives of x^d/d! at x0
                let g: Vec<Ext> = (0..=order.min(d))
                    .map(|m| Ext::new(x0).powi((d - m) as u32) / factorial((d - m) as u32))
                    .collect();
                (0..=order)
                    .map(|k| {
                        (0..=k.min(d))
                            .map(|m| g[m] * f[k - m] * binomial(k, m))
                            .sum()
                    })
                    .collect()
            }
            Node::Scalar { coeff, inner } => {
                inner.jet_at_ext(x0, order)?.into_iter().map(|v| *coeff * v).collect()
            }
            Node::Sum(terms) => {
                let mut acc = vec![Ext::ZERO; order + 1];
                for t in terms {
                    for (a, v) in acc.iter_mut().zip(t.jet_at_ext(x0, order)?) {
                        *a += v;
                    }
                }
                acc
            }
        })
    }

    /// Exact jet `f^(0)(0), ..., f^(order)(0)`.
    pub fn jet_at_zero(&self, order: usize) -> Result<Vec<f64>> {
        Ok(self.jet_at_ext(0.0, order)?.into_iter().map(Ext::to_f64).collect())
    }

    pub fn jet_at_zero_ext(&self, order: usize) -> Result<Vec<Ext>> {
        self.jet_at_ext(0.0, order)
    }

    /// Upper bound on the local polynomial degree near any plateau point, so
    /// every jet entry above it vanishes.
    pub fn polynomial_degree(&self) -> usize {
        match &self.0.node {
            Node::Zero | Node::Bump { .. } => 0,
            Node::Monomial { degree, inner } => *degree as usize + inner.polynomial_degree(),
            Node::Translate { inner, .. } | Node::Dilate { inner, .. } | Node::Scalar { inner, .. } => {
                inner.polynomial_degree()
            }
            Node::Sum(terms) => terms.iter().map(FunctionRep::polynomial_degree).max().unwrap_or(0),
        }
    }

    /// Symbolic derivative tree.
    pub fn derivative(&self) -> Result<FunctionRep> {
        Ok(match &self.0.node {
            Node::Zero => self.clone(),
            Node::Bump { order } => {
                if *order as usize >= MAX_JET_ORDER {
                    return Err(Error::JetOrderTooLarge { requested: *order as usize + 1, max: MAX_JET_ORDER });
                }
                FunctionRep::from_node(Node::Bump { order: order + 1 })
            }
            Node::Translate { shift, inner } => inner.derivative()?.translate(*shift),
            Node::Dilate { width, inner } => inner.derivative()?.dilate(*width).scale(1.0 / width),
            Node::Monomial { degree: 0, inner } => inner.derivative()?,
            Node::Monomial { degree, inner } => FunctionRep::sum(vec![
                inner.monomial(degree - 1),
                inner.derivative()?.monomial(*degree),
            ]),
            Node::Scalar { coeff, inner } => inner.derivative()?.scale_ext(*coeff),
            Node::Sum(terms) => {
                FunctionRep::sum(terms.iter().map(FunctionRep::derivative).collect::<Result<_>>()?)
            }
        })
    }

    /// Structural equality of trees; bitwise on parameters.
    pub fn same_tree(&self, other: &FunctionRep) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        match (&self.0.node, &other.0.node) {
            (Node::Zero, Node::Zero) => true,
            (Node::Bump { order: a }, Node::Bump { order: b }) => a == b,
            (Node::Translate { shift: s, inner: a }, Node::Translate { shift: t, inner: b }) => {
                s.to_bits() == t.to_bits() && a.same_tree(b)
            }
            (Node::Dilate { width: s, inner: a }, Node::Dilate { width: t, inner: b }) => {
                s.to_bits() == t.to_bits() && a.same_tree(b)
            }
            (Node::Monomial { degree: s, inner: a }, Node::Monomial { degree: t, inner: b }) => s == t && a.same_tree(b),
            (Node::Scalar { coeff: s, inner: a }, Node::Scalar { coeff: t, inner: b }) => s == t && a.same_tree(b),
            (Node::Sum(a), Node::Sum(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_tree(y)),
            _ => false,
        }
    }

    /// For a sum node, the sum of its terms with one copy of `term` removed.
    pub fn without_term(&self, term: &FunctionRep) -> Option<FunctionRep> {
        let Node::Sum(terms) = &self.0.node else {
            return None;
        };
        let k = terms.iter().position(|t| t.same_tree(term))?;
        let mut rest = terms.clone();
        rest.remove(k);
        Some(match rest.len() {
            0 => FunctionRep::zero(),
            1 => rest.pop().expect("one term"),
            _ => FunctionRep::sum(rest),
        })
    }

    /// Splits at `cut` into the parts supported left and right of it.
    /// Fails when a bump leaf straddles the cut.
    pub(crate) fn split_at(&self, cut: f64) -> Result<(FunctionRep, FunctionRep)> {
        let Some((a, b)) = self.support() else {
            return Ok((FunctionRep::zero(), FunctionRep::zero()));
        };
        if b <= cut {
            return Ok((self.clone(), FunctionRep::zero()));
        }
        if a >= cut {
            return Ok((FunctionRep::zero(), self.clone()));
        }
        Ok(match &self.0.node {
            Node::Zero => (self.clone(), self.clone()),
            Node::Bump { .. } => return Err(Error::SupportStraddlesOrigin(a, b)),
            Node::Translate { shift, inner } => {
                let (l, r) = inner.split_at(cut - shift)?;
                (l.translate(*shift), r.translate(*shift))
            }
            Node::Dilate { width, inner } => {
                let (l, r) = inner.split_at(cut / width)?;
                (l.dilate(*width), r.dilate(*width))
            }
            Node::Monomial { degree, inner } => {
                let (l, r) = inner.split_at(cut)?;
                (l.monomial(*degree), r.monomial(*degree))
            }
            Node::Scalar { coeff, inner } => {
                let (l, r) = inner.split_at(cut)?;
                (l.scale_ext(*coeff), r.scale_ext(*coeff))
            }
            Node::Sum(terms) => {
                let (mut ls, mut rs) = (Vec::new(), Vec::new());
                for t in terms {
                    let (l, r) = t.split_at(cut)?;
                    ls.push(l);
                    rs.push(r);
                }
                (FunctionRep::sum(ls), FunctionRep::sum(rs))
            }
        })
    }
}

fn intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo < hi {
            out.push((lo, hi));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

fn panel_breaks(region: &[(f64, f64)], extra: &[&[f64]]) -> Vec<f64> {
    let mut pts: Vec<f64> = region.iter().flat_map(|&(a, b)| [a, b]).collect();
    for list in extra {
        pts.extend(list.iter().copied().filter(|x| region.iter().any(|&(a, b)| *x > a && *x < b)));
    }
    sorted_unique(pts)
}

/// `int f g dx` with its error estimate; exactly zero for disjoint supports.
pub fn l2_inner_estimate(f: &FunctionRep, g: &FunctionRep, q: &QuadratureSpec) -> Result<Estimate> {
    let region = intersect(f.pieces(), g.pieces());
    if region.is_empty() {
        return Ok(Estimate::ZERO);
    }
    let breaks = panel_breaks(&region, &[f.breaks(), g.breaks()]);
    integrate_with_magnitude(
        |x| {
            let (fv, fm) = f.eval_with_magnitude(x);
            if fm.is_zero() {
                return (Ext::ZERO, Ext::ZERO);
            }
            let (gv, gm) = g.eval_with_magnitude(x);
            (fv * gv, fm * gm)
        },
        &breaks,
        q,
    )
}

pub fn l2_inner(f: &FunctionRep, g: &FunctionRep, q: &QuadratureSpec) -> Result<f64> {
    Ok(l2_inner_estimate(f, g, q)?.value.to_f64())
}

/// `int x^k f(x) dx`.
pub fn moment_estimate(f: &FunctionRep, k: u32, q: &QuadratureSpec) -> Result<Estimate> {
    if f.is_structurally_zero() {
        return Ok(Estimate::ZERO);
    }
    let breaks = panel_breaks(f.pieces(), &[f.breaks()]);
    integrate_with_magnitude(
        |x| {
            let (v, m) = f.eval_with_magnitude(x);
            let w = Ext::new(x).powi(k);
            (v * w, m * w.abs())
        },
        &breaks,
        q,
    )
}

pub fn moment(f: &FunctionRep, k: u32, q: &QuadratureSpec) -> Result<f64> {
    Ok(moment_estimate(f, k, q)?.value.to_f64())
}

/// `int f dx`.
pub fn integral(f: &FunctionRep, q: &QuadratureSpec) -> Result<Estimate> {
    moment_estimate(f, 0, q)
}
