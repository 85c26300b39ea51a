//! Search directions. Fields are plain coefficient arrays: the vector
//! transport is the identity on nodal coefficients, so fields from earlier
//! iterates are reused verbatim while every inner product is evaluated on the
//! current mesh.

use std::collections::VecDeque;

use super::NcgVariant;
use crate::shape::InnerProductOperator;

/// Relative size below which a β denominator counts as zero.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-30;

/// A symmetric bilinear form on coefficient arrays.
pub trait InnerProduct {
    fn inner(&self, v: &[f64], w: &[f64]) -> f64;

    fn norm_sq(&self, v: &[f64]) -> f64 {
        self.inner(v, v)
    }
}

impl InnerProduct for InnerProductOperator {
    fn inner(&self, v: &[f64], w: &[f64]) -> f64 {
        self.inner_values(v, w)
    }
}

/// A dense symmetric matrix as inner product; used for small synthetic
/// problems.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseInner(pub Vec<Vec<f64>>);

impl DenseInner {
    pub fn identity(n: usize) -> Self {
        Self((0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect())
    }
}

impl InnerProduct for DenseInner {
    fn inner(&self, v: &[f64], w: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(row, vi)| vi * row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).sum()
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

/// `D = -G`.
pub fn direction_gd(g: &[f64]) -> Vec<f64> {
    g.iter().map(|v| -v).collect()
}

/// One stored L-BFGS pair with its curvature at storage time.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsPair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub curvature: f64,
}

/// Up to `m` pairs `(s, y)`, newest last.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsMemory {
    m: usize,
    pairs: VecDeque<LbfgsPair>,
}

impl LbfgsMemory {
    pub fn new(m: usize) -> Self {
        Self { m: m.max(1), pairs: VecDeque::with_capacity(m) }
    }

    pub fn capacity(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    pub fn pairs(&self) -> impl Iterator<Item = &LbfgsPair> {
        self.pairs.iter()
    }

    /// Stores `(s, y)` if `a(s, y) > 0`; otherwise empties the memory so the
    /// next direction is a gradient step. Returns `a(s, y)`.
    pub fn update(&mut self, s: Vec<f64>, y: Vec<f64>, ip: &impl InnerProduct) -> f64 {
        let curvature = ip.inner(&s, &y);
        if curvature > 0.0 {
            if self.pairs.len() == self.m {
                self.pairs.pop_front();
            }
            self.pairs.push_back(LbfgsPair { s, y, curvature });
        } else {
            self.pairs.clear();
        }
        curvature
    }
}

/// Two-loop recursion with `a_Ω` inner products and initial scaling
/// `a(s, y) / a(y, y)` from the newest pair; `-G` for an empty memory.
pub fn direction_lbfgs(g: &[f64], memory: &LbfgsMemory, ip: &impl InnerProduct) -> Vec<f64> {
    let Some(newest) = memory.pairs.back() else {
        return direction_gd(g);
    };
    let mut q = g.to_vec();
    let mut alpha = Vec::with_capacity(memory.len());
    let mut rho = Vec::with_capacity(memory.len());
    for p in memory.pairs.iter().rev() {
        let r = 1.0 / ip.inner(&p.s, &p.y);
        let a = r * ip.inner(&p.s, &q);
        axpy(-a, &p.y, &mut q);
        alpha.push(a);
        rho.push(r);
    }
    let yy = ip.norm_sq(&newest.y);
    let gamma = if yy > 0.0 { ip.inner(&newest.s, &newest.y) / yy } else { 1.0 };
    let mut r: Vec<f64> = q.iter().map(|v| gamma * v).collect();
    for (i, p) in memory.pairs.iter().enumerate() {
        let j = memory.len() - 1 - i;
        let b = rho[j] * ip.inner(&p.y, &r);
        axpy(alpha[j] - b, &p.s, &mut r);
    }
    direction_gd(&r)
}

/// Previous gradient and direction, already transported to the current mesh.
#[derive(Debug, Clone, Copy)]
pub struct NcgPrevious<'a> {
    pub g: &'a [f64],
    pub d: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaOutcome {
    pub beta: f64,
    /// The denominator was degenerate and β fell back to zero.
    pub guarded: bool,
}

/// β of the given variant, with `Y = G - T̃G_prev`:
///
/// * FR: `‖G‖² / ‖T̃G_prev‖²`
/// * PR: `a(G, Y) / ‖T̃G_prev‖²`
/// * HS: `a(G, Y) / a(T̃D_prev, Y)`
/// * DY: `‖G‖² / a(T̃D_prev, Y)`
/// * HZ: `a(Y - 2 T̃D_prev ‖Y‖² / a(T̃D_prev, Y), G) / a(T̃D_prev, Y)`
pub fn ncg_beta(variant: NcgVariant, g: &[f64], prev: NcgPrevious<'_>, ip: &impl InnerProduct) -> BetaOutcome {
    let y: Vec<f64> = g.iter().zip(prev.g).map(|(a, b)| a - b).collect();
    let gg = ip.norm_sq(g);
    let degenerate = |den: f64, scale: f64| !(den.abs() > DEGENERATE_DENOMINATOR * scale) || !den.is_finite();
    let fallback = BetaOutcome { beta: 0.0, guarded: true };
    match variant {
        NcgVariant::FR | NcgVariant::PR => {
            let den = ip.norm_sq(prev.g);
            if degenerate(den, gg.max(f64::MIN_POSITIVE)) {
                return fallback;
            }
            let num = if variant == NcgVariant::FR { gg } else { ip.inner(g, &y) };
            BetaOutcome { beta: num / den, guarded: false }
        }
        NcgVariant::HS | NcgVariant::DY | NcgVariant::HZ => {
            let den = ip.inner(prev.d, &y);
            let yy = ip.norm_sq(&y);
            let scale = (ip.norm_sq(prev.d) * yy).sqrt();
            if degenerate(den, scale) {
                return fallback;
            }
            let beta = match variant {
                NcgVariant::HS => ip.inner(g, &y) / den,
                NcgVariant::DY => gg / den,
                _ => {
                    let mut w = y.clone();
                    axpy(-2.0 * yy / den, prev.d, &mut w);
                    ip.inner(&w, g) / den
                }
            };
            BetaOutcome { beta, guarded: false }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcgDirection {
    pub d: Vec<f64>,
    pub beta: f64,
    pub restarted: bool,
    pub guarded: bool,
}

/// `D = -G + β T̃D_prev`, or `-G` on the first iteration and on restarts.
///
/// A restart happens when `k` is a positive multiple of `k_cg` or when
/// `a(G, T̃G_prev) / ‖G‖² ≥ ε_cg`.
pub fn direction_ncg(
    g: &[f64],
    prev: Option<NcgPrevious<'_>>,
    variant: NcgVariant,
    ip: &impl InnerProduct,
    restart: &super::RestartPolicy,
    k: usize,
) -> NcgDirection {
    let Some(prev) = prev else {
        return NcgDirection { d: direction_gd(g), beta: 0.0, restarted: false, guarded: false };
    };
    let periodic = restart.k_cg.is_some_and(|kc| k > 0 && k % kc == 0);
    let orthogonality = restart.eps_cg.is_finite() && {
        let gg = ip.norm_sq(g);
        gg > 0.0 && ip.inner(g, prev.g) / gg >= restart.eps_cg
    };
    if periodic || orthogonality {
        return NcgDirection { d: direction_gd(g), beta: 0.0, restarted: true, guarded: false };
    }
    let BetaOutcome { beta, guarded } = ncg_beta(variant, g, prev, ip);
    let mut d = direction_gd(g);
    if beta != 0.0 {
        axpy(beta, prev.d, &mut d);
    }
    NcgDirection { d, beta, restarted: false, guarded }
}
