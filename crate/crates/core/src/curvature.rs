//! Second fundamental form, Clifford pairings and curvature of `M₊`.
//!
//! Every identity here is evaluated twice: once by raw ambient or matrix
//! arithmetic on the frame, once by the corresponding closed form in the
//! pairings `g_αβ(v) = ⟨P_α P_β x, v⟩`, `g_αβγ(v) = ⟨P_α P_β P_γ x, v⟩` and the
//! scalar words `⟨P_S x, x⟩`. The reported numbers are the discrepancies.
//!
//! Sign convention for the normal curvature:
//! `Ω^⊥_αβ(e_i, e_j) = Σ_k (h^α_ki h^β_kj - h^α_kj h^β_ki) = [h^α, h^β]_ij`.

use std::ops::{Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::clifford::CliffordSystem;
use crate::error::{Error, Result};
use crate::focal::AdaptedFrame;
use crate::products::PointProducts;

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const MINIMALITY_TOL: f64 = 1e-9;
pub const RICCI_ROUTE_TOL: f64 = 1e-9;
pub const NORMAL_CURVATURE_CONVENTION: &str =
    "Omega_perp_ab(e_i,e_j) = sum_k (h^a_ki h^b_kj - h^a_kj h^b_ki) = [h^a,h^b]_ij";

/// `h^α_ij = -⟨P_α e_i, e_j⟩`, one symmetric `n × n` matrix per normal index.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeOperators {
    pub h: Vec<DMatrix<f64>>,
}

impl ShapeOperators {
    pub fn n(&self) -> usize {
        self.h.first().map_or(0, |h| h.nrows())
    }

    pub fn commutator(&self, a: usize, b: usize) -> DMatrix<f64> {
        &self.h[a] * &self.h[b] - &self.h[b] * &self.h[a]
    }
}

pub fn shape_operators(s: &CliffordSystem, f: &AdaptedFrame) -> Result<ShapeOperators> {
    let h: Vec<DMatrix<f64>> = s
        .matrices
        .iter()
        .map(|p| -(&f.tangent * p * f.tangent.transpose()))
        .collect();
    for (a, ha) in h.iter().enumerate() {
        let asym = (ha - ha.transpose()).amax();
        if asym >= SYMMETRY_TOL {
            return Err(Error::invariant(format!("h^{a} symmetric"), asym, SYMMETRY_TOL));
        }
        let tr = ha.trace().abs();
        if tr >= MINIMALITY_TOL {
            return Err(Error::invariant(format!("trace h^{a} = 0"), tr, MINIMALITY_TOL));
        }
    }
    Ok(ShapeOperators { h })
}

/// Frame components of the Clifford pairings at one point.
pub struct CliffordPairings<'a> {
    n: usize,
    count: usize,
    /// `g2[α·M + β][i] = g_αβ(e_i)`.
    g2: Vec<DVector<f64>>,
    /// `g3[(α·M + β)·M + γ][i] = g_αβγ(e_i)`.
    g3: Vec<DVector<f64>>,
    /// `pe[α]` has rows `(P_α e_i)ᵀ`.
    pe: Vec<DMatrix<f64>>,
    /// `skew[α·M + β][(i, k)] = ⟨P_α P_β e_k, e_i⟩`.
    skew: Vec<DMatrix<f64>>,
    pub products: PointProducts<'a>,
    tangent: DMatrix<f64>,
}

impl<'a> CliffordPairings<'a> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn normal_count(&self) -> usize {
        self.count
    }

    pub fn g2(&self, a: usize, b: usize) -> &DVector<f64> {
        &self.g2[a * self.count + b]
    }

    pub fn g3(&self, a: usize, b: usize, c: usize) -> &DVector<f64> {
        &self.g3[(a * self.count + b) * self.count + c]
    }

    /// Matrix with rows `(P_α e_i)ᵀ`.
    pub fn pe(&self, a: usize) -> &DMatrix<f64> {
        &self.pe[a]
    }

    /// `S^{αβ}_{ik} = ⟨P_α P_β e_k, e_i⟩`.
    pub fn skew(&self, a: usize, b: usize) -> &DMatrix<f64> {
        &self.skew[a * self.count + b]
    }

    /// `⟨P_{i_1} ⋯ P_{i_r} x, x⟩`.
    pub fn q(&self, word: &[usize]) -> f64 {
        self.products.quad(word)
    }

    /// `⟨P_{i_1} ⋯ P_{i_r} x, e_i⟩` for all `i`.
    pub fn word_components(&self, word: &[usize]) -> DVector<f64> {
        &self.tangent * self.products.apply(word)
    }

    /// `G_ij = Σ_γ Σ_{δ≠γ} g_γδ(e_i) g_γδ(e_j)`.
    pub fn g_tensor(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n, self.n);
        for c in 0..self.count {
            for d in (0..self.count).filter(|&d| d != c) {
                let v = self.g2(c, d);
                g += v * v.transpose();
            }
        }
        g
    }
}

pub fn clifford_pairings<'a>(s: &'a CliffordSystem, f: &AdaptedFrame) -> CliffordPairings<'a> {
    let count = s.m + 1;
    let products = PointProducts::new(s, f.x());
    let tangent = f.tangent.clone();
    let mut g2 = Vec::with_capacity(count * count);
    for a in 0..count {
        for b in 0..count {
            g2.push(&tangent * products.apply(&[a, b]));
        }
    }
    let mut g3 = Vec::with_capacity(count * count * count);
    for a in 0..count {
        for b in 0..count {
            for c in 0..count {
                g3.push(&tangent * products.apply(&[a, b, c]));
            }
        }
    }
    let pe: Vec<DMatrix<f64>> = s.matrices.iter().map(|p| &tangent * p).collect();
    let mut skew = Vec::with_capacity(count * count);
    for a in 0..count {
        for b in 0..count {
            // ⟨P_α P_β e_k, e_i⟩ = ⟨P_β e_k, P_α e_i⟩
            skew.push(&pe[a] * pe[b].transpose());
        }
    }
    CliffordPairings {
        n: tangent.nrows(),
        count,
        g2,
        g3,
        pe,
        skew,
        products,
        tangent,
    }
}

/// Everything computed once per framed point.
pub struct PointGeometry<'a> {
    pub system: &'a CliffordSystem,
    pub frame: AdaptedFrame,
    pub shape: ShapeOperators,
    pub pairings: CliffordPairings<'a>,
}

impl<'a> PointGeometry<'a> {
    pub fn new(system: &'a CliffordSystem, frame: AdaptedFrame) -> Result<Self> {
        let shape = shape_operators(system, &frame)?;
        let pairings = clifford_pairings(system, &frame);
        Ok(PointGeometry {
            system,
            frame,
            shape,
            pairings,
        })
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    pub fn m(&self) -> usize {
        self.system.m
    }
}

/// Dense rank-3 array indexed `(i, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn amax(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// The matrix `(i, j) ↦ self[(i, j, k)]` for fixed `k`.
    pub fn slice_last(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self[(i, j, k)])
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[(i * self.n + j) * self.n + k]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(i * self.n + j) * self.n + k]
    }
}

impl Sub for Tensor3 {
    type Output = Tensor3;
    fn sub(mut self, rhs: Tensor3) -> Tensor3 {
        for (a, b) in self.data.iter_mut().zip(rhs.data) {
            *a -= b;
        }
        self
    }
}

impl Mul<f64> for Tensor3 {
    type Output = Tensor3;
    fn mul(mut self, rhs: f64) -> Tensor3 {
        self.data.iter_mut().for_each(|v| *v *= rhs);
        self
    }
}

/// Dense rank-4 array for the Riemann tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    fn zeros(n: usize) -> Self {
        Tensor4 {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

impl Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (i, j, k, l): (usize, usize, usize, usize)) -> &f64 {
        &self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (i, j, k, l): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensors {
    /// `Ω_ijkl = δ_ki δ_lj - δ_kj δ_li + Σ_α (h^α_ki h^α_lj - h^α_kj h^α_li)`.
    pub riemann: Tensor4,
    /// `normal_curv[α·M + β]`, wedge form.
    pub normal_curv: Vec<DMatrix<f64>>,
    /// Contraction `Ric_ik = Σ_j Ω_ijkj`.
    pub ricci: DMatrix<f64>,
    /// `(n - m - 2) δ_ik + G_ik`.
    pub ricci_closed: DMatrix<f64>,
    pub ricci_route_error: f64,
    pub normal_route_error: f64,
    /// `Σ_{k,l} Σ_{i<j} Ω_ijkl²`.
    pub riemann_norm_sq: f64,
    /// `Σ_{α,β} Σ_{i<j} Ω^⊥_αβ(e_i, e_j)²`.
    pub normal_norm_sq: f64,
}

pub fn curvature_pack(shape: &ShapeOperators, pairings: &CliffordPairings, n: usize, m: usize) -> Result<CurvatureTensors> {
    let count = m + 1;
    if shape.h.len() != count || pairings.normal_count() != count {
        return Err(Error::DimensionMismatch(format!(
            "expected {count} normal directions, shape has {} and pairings {}",
            shape.h.len(),
            pairings.normal_count()
        )));
    }
    if shape.n() != n || pairings.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected n = {n}, shape has {} and pairings {}",
            shape.n(),
            pairings.n()
        )));
    }
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    let mut riemann = Tensor4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = delta(k, i) * delta(l, j) - delta(k, j) * delta(l, i);
                    for h in &shape.h {
                        v += h[(k, i)] * h[(l, j)] - h[(k, j)] * h[(l, i)];
                    }
                    riemann[(i, j, k, l)] = v;
                }
            }
        }
    }
    let ricci = DMatrix::from_fn(n, n, |i, k| (0..n).map(|j| riemann[(i, j, k, j)]).sum());
    let ricci_closed = DMatrix::<f64>::identity(n, n) * (n as f64 - m as f64 - 2.0) + pairings.g_tensor();
    let ricci_route_error = (&ricci - &ricci_closed).amax();
    if ricci_route_error >= RICCI_ROUTE_TOL {
        return Err(Error::invariant("Ricci tensor by two routes", ricci_route_error, RICCI_ROUTE_TOL));
    }

    let (normal_curv, normal_route_error) = normal_curvature(shape);

    let riemann_norm_sq = 0.5 * riemann.norm_squared();
    let normal_norm_sq = 0.5 * normal_curv.iter().map(|w| w.norm_squared()).sum::<f64>();
    Ok(CurvatureTensors {
        riemann,
        normal_curv,
        ricci,
        ricci_closed,
        ricci_route_error,
        normal_route_error,
        riemann_norm_sq,
        normal_norm_sq,
    })
}

/// Wedge-form normal curvature for every `(α, β)`, with its largest
/// deviation from the matrix commutator `[h^α, h^β]`.
pub fn normal_curvature(shape: &ShapeOperators) -> (Vec<DMatrix<f64>>, f64) {
    let count = shape.h.len();
    let n = shape.n();
    let mut normal_curv = Vec::with_capacity(count * count);
    let mut route_error: f64 = 0.0;
    for a in 0..count {
        for b in 0..count {
            let (ha, hb) = (&shape.h[a], &shape.h[b]);
            let wedge = DMatrix::from_fn(n, n, |i, j| {
                (0..n)
                    .map(|k| ha[(k, i)] * hb[(k, j)] - ha[(k, j)] * hb[(k, i)])
                    .sum()
            });
            route_error = route_error.max((&wedge - shape.commutator(a, b)).amax());
            normal_curv.push(wedge);
        }
    }
    (normal_curv, route_error)
}

/// Σ over `α, β, γ` of `Tr(h^α h^β h^γ h^γ h^β)` and `Tr(h^α h^β h^γ h^β h^γ)`,
/// by matrix products only.
pub fn quintic_traces(shape: &ShapeOperators, alpha: usize) -> (f64, f64) {
    let count = shape.h.len();
    let n = shape.n();
    let ha = &shape.h[alpha];
    let mut nested = 0.0;
    let mut alternating = 0.0;
    for b in 0..count {
        for c in 0..count {
            let hb = &shape.h[b];
            let hc = &shape.h[c];
            let bc = hb * hc;
            nested += (ha * &bc * hc * hb).trace();
            alternating += (ha * &bc * &bc).trace();
        }
    }
    debug_assert_eq!(ha.nrows(), n);
    (nested, alternating)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_abs_error: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    fn push(&mut self, name: &str, max_abs_error: f64) {
        self.checks.push(IdentityCheck {
            name: name.to_string(),
            max_abs_error,
            samples: 1,
        });
    }

    /// Combine per-point reports: maxima of errors, sums of sample counts.
    pub fn merge(&mut self, other: &IdentityReport) {
        for c in &other.checks {
            match self.checks.iter_mut().find(|d| d.name == c.name) {
                Some(d) => {
                    d.max_abs_error = d.max_abs_error.max(c.max_abs_error);
                    d.samples += c.samples;
                }
                None => self.checks.push(c.clone()),
            }
        }
    }

    pub fn worst(&self) -> f64 {
        self.checks.iter().fold(0.0_f64, |acc, c| acc.max(c.max_abs_error))
    }

    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self, tolerance: f64) -> Vec<&IdentityCheck> {
        self.checks
            .iter()
            .filter(|c| c.max_abs_error.is_nan() || c.max_abs_error >= tolerance)
            .collect()
    }
}

fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Two-route discrepancies of every pointwise identity on `M₊`.
pub fn trace_identity_suite(shape: &ShapeOperators, pairings: &CliffordPairings, n: usize, m: usize) -> Result<IdentityReport> {
    let count = m + 1;
    if shape.h.len() != count || shape.n() != n || pairings.n() != n {
        return Err(Error::DimensionMismatch("shape operators and pairings disagree".into()));
    }
    let mut report = IdentityReport::default();
    let id = DMatrix::<f64>::identity(n, n);

    report.push(
        "shape_symmetry",
        shape.h.iter().map(|h| (h - h.transpose()).amax()).fold(0.0, f64::max),
    );
    report.push("minimality", shape.h.iter().map(|h| h.trace().abs()).fold(0.0, f64::max));

    // ⟨P_α P_β x, x⟩ = δ_αβ and ⟨P_α P_β P_γ x, x⟩ = 0
    let mut quadratic: f64 = 0.0;
    let mut cubic: f64 = 0.0;
    for a in 0..count {
        for b in 0..count {
            let expect = if a == b { 1.0 } else { 0.0 };
            quadratic = quadratic.max((pairings.q(&[a, b]) - expect).abs());
            for c in 0..count {
                cubic = cubic.max(pairings.q(&[a, b, c]).abs());
            }
        }
    }
    report.push("quadratic_form_delta", quadratic);
    report.push("cubic_form_vanishes", cubic);

    let mut anti2: f64 = 0.0;
    let mut anti3: f64 = 0.0;
    for a in 0..count {
        anti2 = anti2.max(max_abs_vec(pairings.g2(a, a)));
        for b in 0..count {
            anti2 = anti2.max(max_abs_vec(&(pairings.g2(a, b) + pairings.g2(b, a))));
            for c in 0..count {
                let g = pairings.g3(a, b, c);
                anti3 = anti3
                    .max(max_abs_vec(&(g + pairings.g3(b, a, c))))
                    .max(max_abs_vec(&(g + pairings.g3(a, c, b))));
            }
        }
    }
    report.push("g2_antisymmetry", anti2);
    report.push("g3_antisymmetry", anti3);

    // Σ_j h^α_ij g_βγ(e_j) = -g_αβγ(e_i)
    let mut hg2: f64 = 0.0;
    for a in 0..count {
        for b in 0..count {
            for c in 0..count {
                let lhs = &shape.h[a] * pairings.g2(b, c);
                hg2 = hg2.max(max_abs_vec(&(lhs + pairings.g3(a, b, c))));
            }
        }
    }
    report.push("h_g2_equals_minus_g3", hg2);

    // Σ_j h^α_ij g_βγδ(e_j) = -⟨P_α P_β P_γ P_δ x, e_i⟩ + Σ_ε g_αε(e_i) ⟨P_ε P_β P_γ P_δ x, x⟩
    let mut hg3: f64 = 0.0;
    for a in 0..count {
        for b in 0..count {
            for c in 0..count {
                for d in 0..count {
                    let lhs = &shape.h[a] * pairings.g3(b, c, d);
                    let mut rhs = -pairings.word_components(&[a, b, c, d]);
                    for e in 0..count {
                        rhs += pairings.g2(a, e) * pairings.q(&[e, b, c, d]);
                    }
                    hg3 = hg3.max(max_abs_vec(&(lhs - rhs)));
                }
            }
        }
    }
    report.push("h_g3_expansion", hg3);

    // Σ_i g_αβ(e_i) g_γδε(e_i) = -⟨P_α P_β P_γ P_δ P_ε x, x⟩
    let mut g2g3: f64 = 0.0;
    for a in 0..count {
        for b in 0..count {
            let gab = pairings.g2(a, b);
            for c in 0..count {
                for d in 0..count {
                    for e in 0..count {
                        let lhs = gab.dot(pairings.g3(c, d, e));
                        g2g3 = g2g3.max((lhs + pairings.q(&[a, b, c, d, e])).abs());
                    }
                }
            }
        }
    }
    report.push("g2_g3_equals_minus_q5", g2g3);

    // (h^α h^β)_ij = ⟨P_α e_i, P_β e_j⟩ - Σ_{γ≠α,β} g_αγ(e_i) g_βγ(e_j)
    let mut hh: f64 = 0.0;
    let mut trace_pair: f64 = 0.0;
    for a in 0..count {
        for b in 0..count {
            let lhs = &shape.h[a] * &shape.h[b];
            let mut rhs = pairings.pe(a) * pairings.pe(b).transpose();
            for c in (0..count).filter(|&c| c != a && c != b) {
                rhs -= pairings.g2(a, c) * pairings.g2(b, c).transpose();
            }
            hh = hh.max((&lhs - rhs).amax());
            let expect = if a == b { n as f64 - m as f64 } else { 0.0 };
            trace_pair = trace_pair.max((lhs.trace() - expect).abs());
        }
    }
    report.push("h_alpha_h_beta", hh);
    report.push("trace_h_beta_h_gamma", trace_pair);

    // Σ_α (h^α)² = (m + 1) I - G
    let g = pairings.g_tensor();
    let sum_sq = shape.h.iter().fold(DMatrix::zeros(n, n), |acc, h| acc + h * h);
    report.push("sum_h_squared", (sum_sq - (&id * (count as f64) - &g)).amax());

    // Σ_i (h^α G)_ii = 0
    report.push(
        "trace_h_alpha_g",
        shape.h.iter().map(|h| (h * &g).trace().abs()).fold(0.0, f64::max),
    );

    // Ric by the Gauss contraction (n-1) I - Σ_α (h^α)² versus (n-m-2) I + G
    let ric_gauss = &id * (n as f64 - 1.0) - shape.h.iter().fold(DMatrix::zeros(n, n), |acc, h| acc + h * h);
    let ric_closed = &id * (n as f64 - m as f64 - 2.0) + &g;
    report.push("ricci_two_routes", (ric_gauss - ric_closed).amax());

    // quintic traces versus the distinct-index quintuple sum
    let mut nested_err: f64 = 0.0;
    let mut alternating_err: f64 = 0.0;
    for a in 0..count {
        let t = pairings.products.obstruction_sum(a);
        let (nested, alternating) = quintic_traces(shape, a);
        nested_err = nested_err.max((nested - 2.0 * t).abs());
        alternating_err = alternating_err.max((alternating + t).abs());
    }
    report.push("quintic_trace_nested", nested_err);
    report.push("quintic_trace_alternating", alternating_err);

    Ok(report)
}

/// `e_j(g_αβ(e_i)) = ⟨P_α P_β e_j, e_i⟩ - δ_ij δ_αβ` for all `i`.
pub fn pairing_derivative(pairings: &CliffordPairings, a: usize, b: usize, j: usize) -> DVector<f64> {
    let mut d = pairings.skew(a, b).column(j).into_owned();
    if a == b {
        d[j] -= 1.0;
    }
    d
}
