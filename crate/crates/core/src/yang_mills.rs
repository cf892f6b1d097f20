//! Yang-Mills criteria for focal submanifolds of OT-FKM type.
//!
//! Classical equations: `(δΩ^⊥)_αβ(e_k) = Σ_l ∇_l [h^α, h^β]_kl` for the
//! normal bundle and the Codazzi defect `∇_j Ric_ik - ∇_k Ric_ij` for the
//! tangent bundle. Variational criteria: for minimal `M₊` the Normal- and
//! Tangent-Yang-Mills Euler-Lagrange densities at normal index `α` reduce to
//! `-7 T_α` and `-8 T_α`, where `T_α` is the distinct-index quintuple sum of
//! [`PointProducts::obstruction_sum`].
//!
//! Each density is produced three ways: the finite-difference divergence
//! plus matrix traces (`fd_value`), the closed-form derivative plus the same
//! traces (`assembled_value`), and the coefficient times `T_α`
//! (`algebraic_value`).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{variant_classify, CliffordSystem, VariantTag};
use crate::curvature::{
    pairing_derivative, quintic_traces, shape_operators, trace_identity_suite, CliffordPairings, IdentityReport,
    PointGeometry, ShapeOperators, Tensor3, NORMAL_CURVATURE_CONVENTION,
};
use crate::error::{Error, Result};
use crate::focal::{adapted_frame, fd_covariant_derivative, sample_focal_point_with, AdaptedFrame, FdConfig, FocalPoint};
use crate::products::PointProducts;

pub const NYM_COEFFICIENT: f64 = -7.0;
pub const TYM_COEFFICIENT: f64 = -8.0;
/// Zero threshold per tangent dimension; the default threshold is this times `n`.
pub const ZERO_THRESHOLD_PER_DIM: f64 = 1e-9;
pub const FD_RELATIVE_TOL: f64 = 1e-3;
/// Agreement required between the quadruple sum and its collapsed `m = 4` form.
pub const COLLAPSED_TOL: f64 = 1e-10;
/// A classification fails outright when more than this fraction of samples error.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;
pub const REPORT_LABEL: &str = "numerical evidence";
const FRAME_ATTEMPTS: u64 = 4;

/// `|a - b| / (1 + |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

fn relative_error_max(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()));
    diff / (1.0 + scale)
}

/// `2m₂ - m₁ + 1 = n - 2m + 1`.
pub fn nym_sign_margin(n: usize, m: usize) -> i64 {
    n as i64 - 2 * m as i64 + 1
}

/// Closed form of `Σ_j ∇_j [h^α, h^β]_ij`:
/// `-2(n - 2m + 1) g_αβ(e_i) + 2 Σ_{γ≠α,β} Σ_{δ≠α,β,γ} g_γδ(e_i) ⟨P_δ P_β P_α P_γ x, x⟩`.
pub fn commutator_divergence(pairings: &CliffordPairings, m: usize, a: usize, b: usize) -> DVector<f64> {
    let n = pairings.n();
    let count = pairings.normal_count();
    let mut v = pairings.g2(a, b) * (-2.0 * nym_sign_margin(n, m) as f64);
    for c in (0..count).filter(|&c| c != a && c != b) {
        for d in (0..count).filter(|&d| d != a && d != b && d != c) {
            v += pairings.g2(c, d) * (2.0 * pairings.q(&[d, b, a, c]));
        }
    }
    v
}

/// `Σ_j ∇_j [h^α, h^β]_ij` by central differences of the commutator.
pub fn commutator_divergence_fd(
    s: &CliffordSystem,
    f: &AdaptedFrame,
    a: usize,
    b: usize,
    cfg: &FdConfig,
) -> Result<DVector<f64>> {
    let n = f.n();
    let mut div = DVector::zeros(n);
    for j in 0..n {
        let d: DMatrix<f64> = fd_covariant_derivative(s, f, j, cfg, |g| Ok(shape_operators(s, g)?.commutator(a, b)))?;
        div += d.column(j);
    }
    Ok(div)
}

/// `e_j(g_αβ(e_i))` for all `i` by central differences.
pub fn pairing_derivative_fd(
    s: &CliffordSystem,
    f: &AdaptedFrame,
    a: usize,
    b: usize,
    j: usize,
    cfg: &FdConfig,
) -> Result<DVector<f64>> {
    let ab = s.ordered_product(&[a, b]);
    fd_covariant_derivative(s, f, j, cfg, |g| Ok(&g.tangent * (&ab * g.x())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishedComponent {
    pub alpha: usize,
    pub beta: usize,
    /// Divergence vector paired with `P_α P_β x`.
    pub projected: f64,
    /// `-2(n - 2m + 1) - 2 Σ ⟨P_δ P_β P_α P_γ x, x⟩²`.
    pub closed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalNymResidual {
    pub components: Vec<DistinguishedComponent>,
    /// Largest `|Σ_l ∇_l [h^α, h^β]_kl|` over `α < β` and `k`.
    pub max_abs: f64,
    pub distinguished_max: f64,
    pub route_error: f64,
}

pub fn classical_nym_residual(geom: &PointGeometry) -> ClassicalNymResidual {
    let m = geom.m();
    let n = geom.n();
    let count = m + 1;
    let p = &geom.pairings;
    let mut components = Vec::new();
    let mut max_abs: f64 = 0.0;
    let mut route_error: f64 = 0.0;
    for a in 0..count {
        for b in (a + 1)..count {
            let div = commutator_divergence(p, m, a, b);
            max_abs = max_abs.max(div.amax());
            let projected = div.dot(p.g2(a, b));
            let mut correction = 0.0;
            for c in (0..count).filter(|&c| c != a && c != b) {
                for d in (0..count).filter(|&d| d != a && d != b && d != c) {
                    correction += p.q(&[d, b, a, c]).powi(2);
                }
            }
            let closed = -2.0 * nym_sign_margin(n, m) as f64 - 2.0 * correction;
            route_error = route_error.max((projected - closed).abs());
            components.push(DistinguishedComponent {
                alpha: a,
                beta: b,
                projected,
                closed,
            });
        }
    }
    let distinguished_max = components
        .iter()
        .map(|c| c.projected)
        .fold(f64::NEG_INFINITY, f64::max);
    ClassicalNymResidual {
        components,
        max_abs,
        distinguished_max,
        route_error,
    }
}

/// Closed form of `C_ijk = ∇_j Ric_ik - ∇_k Ric_ij`:
/// `Σ_{α≠β} 2⟨P_α P_β e_j, e_k⟩ g_αβ(e_i) + ⟨P_α P_β e_j, e_i⟩ g_αβ(e_k) - ⟨P_α P_β e_k, e_i⟩ g_αβ(e_j)`.
pub fn ricci_codazzi_closed(pairings: &CliffordPairings) -> Tensor3 {
    let n = pairings.n();
    let count = pairings.normal_count();
    let mut c = Tensor3::zeros(n);
    for a in 0..count {
        for b in (0..count).filter(|&b| b != a) {
            let s = pairings.skew(a, b);
            let g = pairings.g2(a, b);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        c[(i, j, k)] += 2.0 * s[(k, j)] * g[i] + s[(i, j)] * g[k] - s[(i, k)] * g[j];
                    }
                }
            }
        }
    }
    c
}

/// Ricci tensor from the Gauss equation, `(n - 1) I - Σ_α (h^α)²`.
pub fn ricci_gauss(shape: &ShapeOperators) -> DMatrix<f64> {
    let n = shape.n();
    shape
        .h
        .iter()
        .fold(DMatrix::identity(n, n) * (n as f64 - 1.0), |acc, h| acc - h * h)
}

/// `C_ijk` from finite differences of the Gauss-route Ricci tensor.
pub fn ricci_codazzi_fd(s: &CliffordSystem, f: &AdaptedFrame, cfg: &FdConfig) -> Result<Tensor3> {
    let n = f.n();
    let mut d_ric = Vec::with_capacity(n);
    for j in 0..n {
        let d: DMatrix<f64> = fd_covariant_derivative(s, f, j, cfg, |g| Ok(ricci_gauss(&shape_operators(s, g)?)))?;
        d_ric.push(d);
    }
    let mut c = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                c[(i, j, k)] = d_ric[j][(i, k)] - d_ric[k][(i, j)];
            }
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodazziResidual {
    pub tensor: Tensor3,
    pub max_abs: f64,
}

pub fn ricci_codazzi_residual(geom: &PointGeometry) -> CodazziResidual {
    let tensor = ricci_codazzi_closed(&geom.pairings);
    let max_abs = tensor.amax();
    CodazziResidual { tensor, max_abs }
}

/// `24 ⟨P_β P_γ P_δ P_ε x, x⟩ ⟨P_α P_β P_γ P_δ P_ε x, x⟩` for `m = 4`, with
/// `β < γ < δ < ε` the indices other than `α`, from dense matrix products.
pub fn collapsed_obstruction_m4(s: &CliffordSystem, x: &DVector<f64>, alpha: usize) -> f64 {
    assert_eq!(s.m, 4, "collapsed form exists only for m = 4");
    let others: Vec<usize> = (0..5).filter(|&i| i != alpha).collect();
    let mut with_alpha = vec![alpha];
    with_alpha.extend(&others);
    let q4 = x.dot(&(s.ordered_product(&others) * x));
    let q5 = x.dot(&(s.ordered_product(&with_alpha) * x));
    24.0 * q4 * q5
}

/// `T_α(x)`; for `m = 4` also checked against the collapsed form.
pub fn obstruction_t(s: &CliffordSystem, point: &FocalPoint, alpha: usize) -> Result<f64> {
    let products = PointProducts::new(s, &point.x);
    obstruction_checked(s, &products, alpha)
}

fn obstruction_checked(s: &CliffordSystem, products: &PointProducts, alpha: usize) -> Result<f64> {
    let t = products.obstruction_sum(alpha);
    if s.m == 4 {
        let collapsed = collapsed_obstruction_m4(s, products.x(), alpha);
        let err = (t - collapsed).abs();
        if err >= COLLAPSED_TOL {
            return Err(Error::invariant("collapsed m = 4 obstruction", err, COLLAPSED_TOL));
        }
    }
    Ok(t)
}

/// `⟨P_0 P_1 ⋯ P_m x, x⟩`.
pub fn full_product_form(s: &CliffordSystem, x: &DVector<f64>) -> f64 {
    x.dot(&(s.full_product() * x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPair {
    pub alpha: usize,
    pub fd_value: f64,
    pub algebraic_value: f64,
    pub assembled_value: f64,
    pub derivative_fd: f64,
    pub derivative_closed: f64,
    pub trace_terms: Vec<f64>,
}

impl DensityPair {
    pub fn fd_agrees(&self, rel_tol: f64) -> bool {
        (self.fd_value - self.algebraic_value).abs() < rel_tol * (1.0 + self.algebraic_value.abs())
    }

    fn enforce(self, rel_tol: f64) -> Result<Self> {
        if self.fd_agrees(rel_tol) {
            Ok(self)
        } else {
            Err(Error::DensityMismatch {
                alpha: self.alpha,
                fd_value: self.fd_value,
                algebraic_value: self.algebraic_value,
            })
        }
    }
}

/// `[Σ Tr(h^α h^β h^γ h^β h^γ), -Σ Tr(h^α h^β h^γ h^γ h^β)]`.
pub fn nym_trace_terms(shape: &ShapeOperators, alpha: usize) -> Vec<f64> {
    let (nested, alternating) = quintic_traces(shape, alpha);
    vec![alternating, -nested]
}

/// `W^α_i = Σ_{β≠α} Σ_k h^β_ik Σ_j ∇_j [h^α, h^β]_kj`, one column per `α`.
fn nym_vector_field(geom: &PointGeometry) -> DMatrix<f64> {
    let m = geom.m();
    let count = m + 1;
    let mut w = DMatrix::zeros(geom.n(), count);
    for a in 0..count {
        for b in (0..count).filter(|&b| b != a) {
            let d = commutator_divergence(&geom.pairings, m, a, b);
            let col = &geom.shape.h[b] * d;
            w.column_mut(a).add_assign(&col);
        }
    }
    w
}

trait AddAssignColumn {
    fn add_assign(&mut self, v: &DVector<f64>);
}

impl AddAssignColumn for nalgebra::DVectorViewMut<'_, f64> {
    fn add_assign(&mut self, v: &DVector<f64>) {
        for (a, b) in self.iter_mut().zip(v.iter()) {
            *a += b;
        }
    }
}

/// `Σ_{β≠α} Σ_{i,k} h^β_ik ∇_k (Σ_j ∇_j [h^α, h^β]_ij)` from the closed form
/// of the derivative of the commutator divergence.
pub fn nym_derivative_closed(geom: &PointGeometry, alpha: usize) -> f64 {
    let m = geom.m();
    let n = geom.n();
    let count = m + 1;
    let p = &geom.pairings;
    let margin = nym_sign_margin(n, m) as f64;
    let mut total = 0.0;
    for b in (0..count).filter(|&b| b != alpha) {
        // grad[(i, k)] = ∇_k D^{αβ}_i
        let mut grad = p.skew(alpha, b) * (-2.0 * margin);
        for c in (0..count).filter(|&c| c != alpha && c != b) {
            for d in (0..count).filter(|&d| d != alpha && d != b && d != c) {
                let word = [alpha, b, c, d];
                grad += p.skew(c, d) * (2.0 * p.q(&word));
                grad += p.g2(c, d) * p.word_components(&word).transpose() * 4.0;
            }
        }
        total += geom.shape.h[b].component_mul(&grad).sum();
    }
    total
}

fn nym_assembled(geom: &PointGeometry, alpha: usize) -> (f64, Vec<f64>) {
    (nym_derivative_closed(geom, alpha), nym_trace_terms(&geom.shape, alpha))
}

/// Normal-Yang-Mills densities for every normal index, sharing one
/// finite-difference sweep.
pub fn nym_densities(geom: &PointGeometry, cfg: &FdConfig) -> Result<Vec<DensityPair>> {
    let s = geom.system;
    let n = geom.n();
    let count = geom.m() + 1;
    let mut divergence = vec![0.0; count];
    for i in 0..n {
        let d: DMatrix<f64> = fd_covariant_derivative(s, &geom.frame, i, cfg, |g| {
            Ok(nym_vector_field(&PointGeometry::new(s, g.clone())?))
        })?;
        for (a, div) in divergence.iter_mut().enumerate() {
            *div += d[(i, a)];
        }
    }
    (0..count)
        .map(|a| {
            let t = obstruction_checked(s, &geom.pairings.products, a)?;
            let (derivative_closed, trace_terms) = nym_assembled(geom, a);
            let traces: f64 = trace_terms.iter().sum();
            DensityPair {
                alpha: a,
                fd_value: divergence[a] + traces,
                algebraic_value: NYM_COEFFICIENT * t,
                assembled_value: derivative_closed + traces,
                derivative_fd: divergence[a],
                derivative_closed,
                trace_terms,
            }
            .enforce(FD_RELATIVE_TOL)
        })
        .collect()
}

pub fn nym_density(geom: &PointGeometry, alpha: usize, cfg: &FdConfig) -> Result<DensityPair> {
    let mut all = nym_densities(geom, cfg)?;
    Ok(all.swap_remove(alpha))
}

/// `[-2 Σ_β Tr(h^α h^β h^β), Σ_{β,γ} Tr(h^α h^β h^γ) Tr(h^β h^γ), -Σ_{β,γ} Tr(h^α h^β h^γ h^β h^γ)]`.
pub fn tym_trace_terms(shape: &ShapeOperators, alpha: usize) -> Vec<f64> {
    let count = shape.h.len();
    let ha = &shape.h[alpha];
    let mut cubic = 0.0;
    let mut cubic_product = 0.0;
    for b in 0..count {
        cubic += (ha * &shape.h[b] * &shape.h[b]).trace();
        for c in 0..count {
            let bc = &shape.h[b] * &shape.h[c];
            cubic_product += (ha * &bc).trace() * bc.trace();
        }
    }
    let (_, alternating) = quintic_traces(shape, alpha);
    vec![-2.0 * cubic, cubic_product, -alternating]
}

/// `Σ_k ∇_k C_ijk` in closed form:
/// `-3m(m+1) δ_ij + 3(n-m+1) G_ij + 3 Σ g_αβγ(e_i) g_αβγ(e_j) - 3 Σ g_αβ(e_i) g_γδ(e_j) ⟨P_α P_β P_γ P_δ x, x⟩`.
pub fn codazzi_divergence_closed(pairings: &CliffordPairings, m: usize) -> DMatrix<f64> {
    let n = pairings.n();
    let count = m + 1;
    let mf = m as f64;
    let mut div = DMatrix::identity(n, n) * (-3.0 * mf * (mf + 1.0))
        + pairings.g_tensor() * (3.0 * (n as f64 - mf + 1.0));
    for a in 0..count {
        for b in (0..count).filter(|&b| b != a) {
            for c in (0..count).filter(|&c| c != a && c != b) {
                let g = pairings.g3(a, b, c);
                div += g * g.transpose() * 3.0;
                for d in (0..count).filter(|&d| d != a && d != b && d != c) {
                    div -= pairings.g2(a, b) * pairings.g2(c, d).transpose() * (3.0 * pairings.q(&[a, b, c, d]));
                }
            }
        }
    }
    div
}

/// Tangent-Yang-Mills densities for every normal index.
pub fn tym_densities(geom: &PointGeometry, cfg: &FdConfig) -> Result<Vec<DensityPair>> {
    let s = geom.system;
    let n = geom.n();
    let m = geom.m();
    let mut div_fd = DMatrix::zeros(n, n);
    for k in 0..n {
        let d: Tensor3 = fd_covariant_derivative(s, &geom.frame, k, cfg, |g| {
            Ok(ricci_codazzi_closed(&PointGeometry::new(s, g.clone())?.pairings))
        })?;
        div_fd += d.slice_last(k);
    }
    let div_closed = codazzi_divergence_closed(&geom.pairings, m);
    (0..=m)
        .map(|a| {
            let t = obstruction_checked(s, &geom.pairings.products, a)?;
            let ha = &geom.shape.h[a];
            let derivative_fd = ha.component_mul(&div_fd).sum();
            let derivative_closed = ha.component_mul(&div_closed).sum();
            let trace_terms = tym_trace_terms(&geom.shape, a);
            let traces: f64 = trace_terms.iter().sum();
            DensityPair {
                alpha: a,
                fd_value: derivative_fd + traces,
                algebraic_value: TYM_COEFFICIENT * t,
                assembled_value: derivative_closed + traces,
                derivative_fd,
                derivative_closed,
                trace_terms,
            }
            .enforce(FD_RELATIVE_TOL)
        })
        .collect()
}

pub fn tym_density(geom: &PointGeometry, alpha: usize, cfg: &FdConfig) -> Result<DensityPair> {
    let mut all = tym_densities(geom, cfg)?;
    Ok(all.swap_remove(alpha))
}

fn tym_assembled(geom: &PointGeometry, div_closed: &DMatrix<f64>, alpha: usize) -> f64 {
    geom.shape.h[alpha].component_mul(div_closed).sum() + tym_trace_terms(&geom.shape, alpha).iter().sum::<f64>()
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyId {
    pub m: usize,
    pub k: usize,
    pub block_signs: Vec<i8>,
    pub l: usize,
    pub n: usize,
}

impl FamilyId {
    pub fn of(s: &CliffordSystem) -> Self {
        FamilyId {
            m: s.m,
            k: s.k,
            block_signs: s.block_signs.clone(),
            l: s.l,
            n: s.n(),
        }
    }

    pub fn label(&self) -> String {
        if !self.m.is_multiple_of(4) {
            return format!("m{}k{}", self.m, self.k);
        }
        let signs: String = self.block_signs.iter().map(|s| if *s > 0 { '+' } else { '-' }).collect();
        format!("m{}k{}[{}]", self.m, self.k, signs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Algebraic quantities below this count as zero.
    pub zero_threshold: f64,
    /// Relative tolerance for finite-difference comparisons.
    pub fd_relative_tol: f64,
}

impl Thresholds {
    pub fn for_dimension(n: usize) -> Self {
        Thresholds {
            zero_threshold: ZERO_THRESHOLD_PER_DIM * n as f64,
            fd_relative_tol: FD_RELATIVE_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub samples: usize,
    pub seed: u64,
    pub thresholds: Thresholds,
    pub fd: FdConfig,
    pub fd_crosscheck: bool,
    #[serde(skip)]
    pub sequential: bool,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl ClassifyConfig {
    pub fn new(s: &CliffordSystem, samples: usize, seed: u64) -> Self {
        ClassifyConfig {
            samples,
            seed,
            thresholds: Thresholds::for_dimension(s.n()),
            fd: FdConfig::default(),
            fd_crosscheck: false,
            sequential: true,
            threads: None,
        }
    }

    /// Seed of the `index`-th sample point: `seed · 2^20 + index`.
    pub fn point_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_mul(1 << 20).wrapping_add(index as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub point_seed: u64,
    pub frame_seed: u64,
    pub x: Vec<f64>,
    pub residual: f64,
    /// `T_α` for every normal index.
    pub obstruction: Vec<f64>,
    pub classical_nym_max: f64,
    pub distinguished_max: f64,
    pub distinguished_route_error: f64,
    pub codazzi_max: f64,
    /// `⟨P_0 ⋯ P_m x, x⟩`, recorded for `m ≡ 0 (mod 4)`.
    pub full_product_form: Option<f64>,
    pub nym_assembled: Vec<f64>,
    pub tym_assembled: Vec<f64>,
    pub identity_worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: usize,
    pub point_seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationStats {
    pub samples_ok: usize,
    pub samples_failed: usize,
    pub max_abs_obstruction: f64,
    pub max_obstruction_sample: Option<usize>,
    pub max_obstruction_alpha: Option<usize>,
    pub classical_nym_max: f64,
    /// Largest distinguished component over samples and pairs.
    pub distinguished_max: f64,
    /// `-2(n - 2m + 1)`.
    pub distinguished_bound: f64,
    pub distinguished_route_error: f64,
    pub codazzi_max: f64,
    pub codazzi_min: f64,
    pub max_abs_full_product_form: Option<f64>,
    pub max_abs_nym_density: f64,
    pub max_abs_tym_density: f64,
    /// Largest `|assembled - coefficient · T_α|` over both densities.
    pub density_route_error: f64,
    pub identity_worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub label: String,
    pub is_nym_evidence: bool,
    pub is_tym_evidence: bool,
    pub classical_nym: bool,
    pub classical_tym: bool,
    /// `n - 2m + 1 <= 0`: the sign argument for classical NYM failure does
    /// not apply and the family is reported as an exception candidate.
    pub nym_sign_test_inconclusive: bool,
    /// Identity suite, density routes and (if run) finite differences within tolerance.
    pub checks_passed: bool,
}

impl Verdicts {
    /// Threshold functions of the stored statistics.
    pub fn from_stats(
        stats: &ClassificationStats,
        thresholds: &Thresholds,
        family: &FamilyId,
        fd_check: Option<&FdCheck>,
    ) -> Self {
        let zero = thresholds.zero_threshold;
        let fd_ok = fd_check.is_none_or(|c| c.max_relative_error < thresholds.fd_relative_tol);
        Verdicts {
            label: REPORT_LABEL.to_string(),
            is_nym_evidence: stats.max_abs_obstruction < zero,
            is_tym_evidence: stats.max_abs_tym_density < -TYM_COEFFICIENT * zero,
            classical_nym: stats.classical_nym_max < zero,
            classical_tym: stats.codazzi_max < zero,
            nym_sign_test_inconclusive: nym_sign_margin(family.n, family.m) <= 0,
            checks_passed: stats.identity_worst < zero
                && stats.density_route_error < zero
                && stats.distinguished_route_error < zero
                && fd_ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub sample: usize,
    pub point_seed: u64,
    pub alpha: usize,
    pub obstruction: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdCheck {
    pub sample: usize,
    pub pairing_derivative_error: f64,
    pub commutator_divergence_error: f64,
    pub codazzi_error: f64,
    pub nym: Vec<DensityPair>,
    pub tym: Vec<DensityPair>,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub normal_curvature: String,
    pub obstruction: String,
    pub densities: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            normal_curvature: NORMAL_CURVATURE_CONVENTION.to_string(),
            obstruction: "T_a = sum over distinct ordered (b,c,d,e) != a of <P_b P_c P_d P_e x,x><P_a P_b P_c P_d P_e x,x>"
                .to_string(),
            densities: "NYM = -7 T_a, TYM = -8 T_a".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub schema_version: u32,
    pub family: FamilyId,
    pub multiplicities: (usize, usize),
    pub variant: VariantTag,
    pub conventions: Conventions,
    pub config: ClassifyConfig,
    pub samples: Vec<SampleRecord>,
    pub failures: Vec<SampleFailure>,
    pub identities: IdentityReport,
    pub stats: ClassificationStats,
    pub witness: Option<Witness>,
    pub fd_check: Option<FdCheck>,
    pub verdicts: Verdicts,
}

impl ClassificationReport {
    /// Recompute verdicts from the stored statistics and thresholds.
    pub fn recomputed_verdicts(&self) -> Verdicts {
        Verdicts::from_stats(&self.stats, &self.config.thresholds, &self.family, self.fd_check.as_ref())
    }

    pub fn geometry_at<'a>(&self, s: &'a CliffordSystem, sample: usize) -> Result<PointGeometry<'a>> {
        let rec = self
            .samples
            .iter()
            .find(|r| r.index == sample)
            .ok_or_else(|| Error::InvalidInput(format!("no sample {sample} in report")))?;
        let point = FocalPoint::new(s, DVector::from_vec(rec.x.clone()))?;
        PointGeometry::new(s, adapted_frame(s, &point, rec.frame_seed)?)
    }
}

fn framed_point<'a>(s: &'a CliffordSystem, point: FocalPoint, seed: u64) -> Result<(PointGeometry<'a>, u64)> {
    let mut last = None;
    for attempt in 0..FRAME_ATTEMPTS {
        let frame_seed = seed.wrapping_add(attempt << 32);
        match adapted_frame(s, &point, frame_seed) {
            Ok(f) => return Ok((PointGeometry::new(s, f)?, frame_seed)),
            Err(e @ Error::DegenerateFrame { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("frame attempts > 0"))
}

fn evaluate_sample(s: &CliffordSystem, cfg: &ClassifyConfig, index: usize) -> Result<(SampleRecord, IdentityReport)> {
    let point_seed = cfg.point_seed(index);
    let point = sample_focal_point_with(s, point_seed, &cfg.fd)?;
    let (geom, frame_seed) = framed_point(s, point, point_seed)?;
    let m = s.m;
    let n = geom.n();

    let identities = trace_identity_suite(&geom.shape, &geom.pairings, n, m)?;
    let obstruction = (0..=m)
        .map(|a| obstruction_checked(s, &geom.pairings.products, a))
        .collect::<Result<Vec<_>>>()?;
    let nym = classical_nym_residual(&geom);
    let codazzi = ricci_codazzi_residual(&geom);
    let div_closed = codazzi_divergence_closed(&geom.pairings, m);
    let nym_assembled: Vec<f64> = (0..=m)
        .map(|a| {
            let (d, t) = nym_assembled(&geom, a);
            d + t.iter().sum::<f64>()
        })
        .collect();
    let tym_assembled: Vec<f64> = (0..=m).map(|a| tym_assembled(&geom, &div_closed, a)).collect();
    let full_product = m.is_multiple_of(4).then(|| full_product_form(s, geom.frame.x()));

    let record = SampleRecord {
        index,
        point_seed,
        frame_seed,
        x: geom.frame.x().as_slice().to_vec(),
        residual: geom.frame.point.residual,
        obstruction,
        classical_nym_max: nym.max_abs,
        distinguished_max: nym.distinguished_max,
        distinguished_route_error: nym.route_error,
        codazzi_max: codazzi.max_abs,
        full_product_form: full_product,
        nym_assembled,
        tym_assembled,
        identity_worst: identities.worst(),
    };
    Ok((record, identities))
}

fn fold_max(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0_f64, f64::max)
}

fn summarize(s: &CliffordSystem, samples: &[SampleRecord], failed: usize) -> ClassificationStats {
    let n = s.n();
    let mut max_abs_obstruction: f64 = 0.0;
    let mut argmax = None;
    for rec in samples {
        for (a, t) in rec.obstruction.iter().enumerate() {
            if argmax.is_none() || t.abs() > max_abs_obstruction {
                max_abs_obstruction = t.abs();
                argmax = Some((rec.index, a));
            }
        }
    }
    let density_route_error = fold_max(samples.iter().flat_map(|r| {
        r.obstruction.iter().enumerate().map(move |(a, t)| {
            (r.nym_assembled[a] - NYM_COEFFICIENT * t)
                .abs()
                .max((r.tym_assembled[a] - TYM_COEFFICIENT * t).abs())
        })
    }));
    let full_products: Vec<f64> = samples.iter().filter_map(|r| r.full_product_form).collect();
    ClassificationStats {
        samples_ok: samples.len(),
        samples_failed: failed,
        max_abs_obstruction,
        max_obstruction_sample: argmax.map(|(i, _)| i),
        max_obstruction_alpha: argmax.map(|(_, a)| a),
        classical_nym_max: fold_max(samples.iter().map(|r| r.classical_nym_max)),
        distinguished_max: samples
            .iter()
            .map(|r| r.distinguished_max)
            .fold(f64::NEG_INFINITY, f64::max),
        distinguished_bound: -2.0 * nym_sign_margin(n, s.m) as f64,
        distinguished_route_error: fold_max(samples.iter().map(|r| r.distinguished_route_error)),
        codazzi_max: fold_max(samples.iter().map(|r| r.codazzi_max)),
        codazzi_min: samples.iter().map(|r| r.codazzi_max).fold(f64::INFINITY, f64::min),
        max_abs_full_product_form: (!full_products.is_empty()).then(|| fold_max(full_products.iter().map(|v| v.abs()))),
        max_abs_nym_density: fold_max(samples.iter().flat_map(|r| r.nym_assembled.iter().map(|v| v.abs()))),
        max_abs_tym_density: fold_max(samples.iter().flat_map(|r| r.tym_assembled.iter().map(|v| v.abs()))),
        density_route_error,
        identity_worst: fold_max(samples.iter().map(|r| r.identity_worst)),
    }
}

/// Finite-difference cross-checks at one framed point.
pub fn fd_crosscheck(geom: &PointGeometry, sample: usize, cfg: &FdConfig) -> Result<FdCheck> {
    let s = geom.system;
    let m = geom.m();
    let n = geom.n();
    let mut pairing_err: f64 = 0.0;
    let mut comm_err: f64 = 0.0;
    for a in 0..=m {
        for b in 0..=m {
            for j in 0..n {
                let fd = pairing_derivative_fd(s, &geom.frame, a, b, j, cfg)?;
                let closed = pairing_derivative(&geom.pairings, a, b, j);
                pairing_err = pairing_err.max(relative_error_max(fd.as_slice(), closed.as_slice()));
            }
            if a < b {
                let fd = commutator_divergence_fd(s, &geom.frame, a, b, cfg)?;
                let closed = commutator_divergence(&geom.pairings, m, a, b);
                comm_err = comm_err.max(relative_error_max(fd.as_slice(), closed.as_slice()));
            }
        }
    }
    let codazzi_fd = ricci_codazzi_fd(s, &geom.frame, cfg)?;
    let codazzi_closed = ricci_codazzi_closed(&geom.pairings);
    let codazzi_err = (codazzi_fd - codazzi_closed.clone()).amax() / (1.0 + codazzi_closed.amax());
    let nym = nym_densities(geom, cfg)?;
    let tym = tym_densities(geom, cfg)?;
    let density_err = fold_max(
        nym.iter()
            .chain(&tym)
            .map(|d| relative_error(d.fd_value, d.algebraic_value)),
    );
    Ok(FdCheck {
        sample,
        pairing_derivative_error: pairing_err,
        commutator_divergence_error: comm_err,
        codazzi_error: codazzi_err,
        nym,
        tym,
        max_relative_error: pairing_err.max(comm_err).max(codazzi_err).max(density_err),
    })
}

/// Run the full pipeline over `cfg.samples` seeded points.
pub fn classify(s: &CliffordSystem, cfg: &ClassifyConfig) -> Result<ClassificationReport> {
    let run = |i: usize| evaluate_sample(s, cfg, i);
    let results: Vec<Result<(SampleRecord, IdentityReport)>> = if cfg.sequential {
        (0..cfg.samples).map(run).collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cfg.threads {
            builder = builder.num_threads(t);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| (0..cfg.samples).into_par_iter().map(run).collect())
    };

    let mut samples = Vec::new();
    let mut failures = Vec::new();
    let mut identities = IdentityReport::default();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok((rec, ids)) => {
                identities.merge(&ids);
                samples.push(rec);
            }
            Err(e) => failures.push(SampleFailure {
                index,
                point_seed: cfg.point_seed(index),
                error: e.to_string(),
            }),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * cfg.samples as f64 || samples.is_empty() {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: cfg.samples,
        });
    }

    let stats = summarize(s, &samples, failures.len());
    let family = FamilyId::of(s);
    let witness = match (stats.max_obstruction_sample, stats.max_obstruction_alpha) {
        (Some(i), Some(a)) if stats.max_abs_obstruction >= cfg.thresholds.zero_threshold => {
            let rec = samples.iter().find(|r| r.index == i).expect("argmax sample exists");
            Some(Witness {
                sample: i,
                point_seed: rec.point_seed,
                alpha: a,
                obstruction: rec.obstruction[a],
                x: rec.x.clone(),
            })
        }
        _ => None,
    };
    let fd_check = if cfg.fd_crosscheck {
        let i = stats.max_obstruction_sample.unwrap_or(samples[0].index);
        let rec = samples.iter().find(|r| r.index == i).expect("sample exists");
        let point = FocalPoint::new(s, DVector::from_vec(rec.x.clone()))?;
        let geom = PointGeometry::new(s, adapted_frame(s, &point, rec.frame_seed)?)?;
        Some(fd_crosscheck(&geom, i, &cfg.fd)?)
    } else {
        None
    };
    let verdicts = Verdicts::from_stats(&stats, &cfg.thresholds, &family, fd_check.as_ref());
    Ok(ClassificationReport {
        schema_version: SCHEMA_VERSION,
        multiplicities: s.multiplicities(),
        variant: variant_classify(s),
        family,
        conventions: Conventions::default(),
        config: cfg.clone(),
        samples,
        failures,
        identities,
        stats,
        witness,
        fd_check,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::focal::sample_focal_point;

    fn geometry(s: &CliffordSystem, seed: u64) -> PointGeometry<'_> {
        let p = sample_focal_point(s, seed).unwrap();
        let f = adapted_frame(s, &p, seed).unwrap();
        PointGeometry::new(s, f).unwrap()
    }

    #[test]
    fn m1_commutator_divergence_has_no_correction() {
        let s = CliffordSystem::new(1, 4, &[]).unwrap();
        let g = geometry(&s, 3);
        let d = commutator_divergence(&g.pairings, 1, 0, 1);
        let expect = g.pairings.g2(0, 1) * (-2.0 * (5.0 - 2.0 + 1.0));
        assert_eq!(d, expect);
    }

    #[test]
    fn one_two_family_distinguished_component_is_minus_eight() {
        let s = CliffordSystem::new(1, 4, &[]).unwrap();
        assert_eq!(s.multiplicities(), (1, 2));
        let g = geometry(&s, 8);
        let r = classical_nym_residual(&g);
        assert_eq!(r.components.len(), 1);
        assert!((r.components[0].projected + 8.0).abs() < 1e-10);
        assert_eq!(r.components[0].closed, -8.0);
    }

    #[test]
    fn obstruction_vanishes_for_small_m() {
        for (m, k) in [(1, 3), (2, 2), (3, 2)] {
            let s = CliffordSystem::new(m, k, &[]).unwrap();
            let p = sample_focal_point(&s, 4).unwrap();
            for a in 0..=m {
                assert_eq!(obstruction_t(&s, &p, a).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn definite_m4_obstruction_vanishes() {
        let s = CliffordSystem::new(4, 2, &[1, 1]).unwrap();
        for seed in 0..10 {
            let p = sample_focal_point(&s, seed).unwrap();
            for a in 0..5 {
                assert!(obstruction_t(&s, &p, a).unwrap().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tym_middle_terms_vanish() {
        let s = CliffordSystem::new(3, 2, &[]).unwrap();
        let g = geometry(&s, 6);
        for a in 0..4 {
            let t = tym_trace_terms(&g.shape, a);
            assert!(t[0].abs() < 1e-10 && t[1].abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_densities_match_obstruction() {
        let s = CliffordSystem::new(4, 4, &[1, 1, 1, -1]).unwrap();
        let g = geometry(&s, 2);
        let div = codazzi_divergence_closed(&g.pairings, 4);
        for a in 0..5 {
            let t = g.pairings.products.obstruction_sum(a);
            let (d, tr) = nym_assembled(&g, a);
            let nym = d + tr.iter().sum::<f64>();
            assert!((nym - NYM_COEFFICIENT * t).abs() < 1e-9 * 26.0, "nym {nym} vs T {t}");
            let tym = tym_assembled(&g, &div, a);
            assert!((tym - TYM_COEFFICIENT * t).abs() < 1e-9 * 26.0, "tym {tym} vs T {t}");
        }
    }

    #[test]
    fn small_classification_is_consistent() {
        let s = CliffordSystem::new(2, 2, &[]).unwrap();
        let cfg = ClassifyConfig::new(&s, 6, 1);
        let rep = classify(&s, &cfg).unwrap();
        assert_eq!(rep.samples.len(), 6);
        assert!(rep.verdicts.is_nym_evidence && rep.verdicts.is_tym_evidence);
        assert!(rep.verdicts.classical_tym);
        assert!(!rep.verdicts.classical_nym);
        assert!(rep.verdicts.checks_passed);
        assert_eq!(rep.recomputed_verdicts(), rep.verdicts);
        assert!(rep.witness.is_none());
    }
}
