//! Points, frames and finite differences on the focal submanifold
//! `M₊ = { x ∈ S^{2l-1} : ⟨P_i x, x⟩ = 0 for all i }`.
//!
//! Points are obtained by Newton iteration on the constraint map
//! `F(x) = (|x|² - 1, ⟨P_0 x, x⟩, ..., ⟨P_m x, x⟩)` with the least-squares
//! pseudo-inverse of its Jacobian. Near `M₊` the gradients `2x, 2P_i x` are
//! orthogonal, so the normal equations are well conditioned there.
//!
//! Covariant derivatives are approximated by central differences of frame
//! components along retracted curves, with the frame carried by projection
//! transport. Projection transport has no tangential drift to first order,
//! so frame components differentiate like covariant components at the base
//! point.

use std::ops::{Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clifford::CliffordSystem;
use crate::error::{Error, Result};

/// Upper bound on the constraint residual of every emitted point.
pub const FOCAL_TOL: f64 = 1e-11;
/// Orthonormality tolerance for adapted frames.
pub const FRAME_TOL: f64 = 1e-10;
/// Gram-Schmidt pivots below this are treated as degenerate.
pub const PIVOT_TOL: f64 = 1e-8;
/// Jacobian condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e8;
/// Largest displacement accepted by [`transport_frame`].
pub const TRANSPORT_RADIUS: f64 = 1e-2;
/// Fresh draws attempted by [`sample_focal_point`].
pub const SAMPLE_RETRIES: usize = 8;

const TANGENCY_TOL: f64 = 1e-10;
const FRAME_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdConfig {
    pub step: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            step: 1e-5,
            newton_tol: 1e-13,
            newton_max_iter: 50,
        }
    }
}

impl FdConfig {
    pub fn with_step(step: f64) -> Self {
        FdConfig {
            step,
            ..FdConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1e-8..=1e-2).contains(&self.step) {
            return Err(Error::InvalidInput(format!(
                "finite-difference step {} outside [1e-8, 1e-2]",
                self.step
            )));
        }
        if self.newton_tol.is_nan() || self.newton_tol <= 0.0 || self.newton_max_iter == 0 {
            return Err(Error::InvalidInput("Newton tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// A unit vector satisfying every constraint `⟨P_i x, x⟩ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalPoint {
    pub x: DVector<f64>,
    pub residual: f64,
}

impl FocalPoint {
    /// Wrap `x` after checking its residual against [`FOCAL_TOL`].
    pub fn new(s: &CliffordSystem, x: DVector<f64>) -> Result<Self> {
        if x.len() != s.dim_ambient() {
            return Err(Error::DimensionMismatch(format!(
                "point has length {}, ambient dimension is {}",
                x.len(),
                s.dim_ambient()
            )));
        }
        let residual = constraint_residual(s, &x);
        if residual >= FOCAL_TOL {
            return Err(Error::invariant("focal point residual", residual, FOCAL_TOL));
        }
        Ok(FocalPoint { x, residual })
    }
}

/// `max(| |x|² - 1 |, max_i |⟨P_i x, x⟩|)`.
pub fn constraint_residual(s: &CliffordSystem, x: &DVector<f64>) -> f64 {
    constraint_values(s, x).amax()
}

fn constraint_values(s: &CliffordSystem, x: &DVector<f64>) -> DVector<f64> {
    let mut f = DVector::zeros(s.m + 2);
    f[0] = x.norm_squared() - 1.0;
    for (i, p) in s.matrices.iter().enumerate() {
        f[i + 1] = x.dot(&(p * x));
    }
    f
}

/// Result of a Newton projection together with its iteration count.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: FocalPoint,
    pub iterations: usize,
}

pub fn project_to_focal(s: &CliffordSystem, x0: &DVector<f64>, cfg: &FdConfig) -> Result<FocalPoint> {
    project_to_focal_counted(s, x0, cfg).map(|p| p.point)
}

/// Newton projection onto `M₊`, reporting the number of steps taken.
pub fn project_to_focal_counted(s: &CliffordSystem, x0: &DVector<f64>, cfg: &FdConfig) -> Result<Projection> {
    if x0.len() != s.dim_ambient() {
        return Err(Error::DimensionMismatch(format!(
            "start vector has length {}, ambient dimension is {}",
            x0.len(),
            s.dim_ambient()
        )));
    }
    if x0.norm() <= 0.5 {
        return Err(Error::InvalidInput(format!("start vector norm {} is not above 0.5", x0.norm())));
    }
    let rows = s.m + 2;
    let mut x = x0.clone();
    for iteration in 0..=cfg.newton_max_iter {
        let f = constraint_values(s, &x);
        let residual = f.amax();
        if residual < cfg.newton_tol {
            return Ok(Projection {
                point: FocalPoint { x, residual },
                iterations: iteration,
            });
        }
        if iteration == cfg.newton_max_iter {
            return Err(Error::NonConvergence {
                iterations: iteration,
                residual,
            });
        }
        let mut jac = DMatrix::zeros(rows, x.len());
        jac.row_mut(0).copy_from(&(&x * 2.0).transpose());
        for (i, p) in s.matrices.iter().enumerate() {
            jac.row_mut(i + 1).copy_from(&((p * &x) * 2.0).transpose());
        }
        let normal = &jac * jac.transpose();
        let eig = SymmetricEigen::new(normal.clone()).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let condition = if lo > 0.0 { (hi / lo).sqrt() } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(Error::SingularJacobian { condition });
        }
        let y = normal
            .cholesky()
            .ok_or(Error::SingularJacobian { condition })?
            .solve(&f);
        x -= jac.transpose() * y;
    }
    unreachable!("loop returns on its final iteration")
}

/// Draw a seeded Gaussian direction, normalize it and project onto `M₊`,
/// retrying with fresh draws from the same stream on solver failure.
pub fn sample_focal_point(s: &CliffordSystem, seed: u64) -> Result<FocalPoint> {
    sample_focal_point_with(s, seed, &FdConfig::default())
}

pub fn sample_focal_point_with(s: &CliffordSystem, seed: u64, cfg: &FdConfig) -> Result<FocalPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_err = None;
    for _ in 0..SAMPLE_RETRIES {
        let mut x0 = gaussian_vector(&mut rng, s.dim_ambient());
        x0 /= x0.norm();
        match project_to_focal(s, &x0, cfg) {
            Ok(p) => return Ok(p),
            Err(e) if e.is_solver_failure() => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one draw was attempted"))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Orthonormal tangent frame `e_1..e_n` and normal frame `P_α x` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedFrame {
    pub point: FocalPoint,
    /// `n × 2l`, row `i` is `e_i`.
    pub tangent: DMatrix<f64>,
    /// `(m + 1) × 2l`, row `α` is `P_α x`.
    pub normal: DMatrix<f64>,
}

impl AdaptedFrame {
    /// Build a frame from explicit tangent rows, checking orthonormality.
    pub fn from_tangent(s: &CliffordSystem, point: FocalPoint, tangent: DMatrix<f64>) -> Result<Self> {
        if tangent.nrows() != s.n() || tangent.ncols() != s.dim_ambient() {
            return Err(Error::DimensionMismatch(format!(
                "tangent block is {}x{}, expected {}x{}",
                tangent.nrows(),
                tangent.ncols(),
                s.n(),
                s.dim_ambient()
            )));
        }
        let frame = AdaptedFrame {
            normal: normal_rows(s, &point.x),
            point,
            tangent,
        };
        let err = frame.gram_error();
        if err >= FRAME_TOL {
            return Err(Error::invariant("adapted frame orthonormality", err, FRAME_TOL));
        }
        Ok(frame)
    }

    pub fn n(&self) -> usize {
        self.tangent.nrows()
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.point.x
    }

    pub fn e(&self, i: usize) -> DVector<f64> {
        self.tangent.row(i).transpose()
    }

    /// All `2l` frame vectors `x, P_0 x, .., P_m x, e_1, .., e_n` as rows.
    pub fn full_basis(&self) -> DMatrix<f64> {
        let dim = self.point.x.len();
        let mut basis = DMatrix::zeros(dim, dim);
        basis.row_mut(0).copy_from(&self.point.x.transpose());
        basis
            .view_mut((1, 0), (self.normal.nrows(), dim))
            .copy_from(&self.normal);
        basis
            .view_mut((1 + self.normal.nrows(), 0), (self.n(), dim))
            .copy_from(&self.tangent);
        basis
    }

    /// `max |B Bᵀ - I|` for the full basis `B`.
    pub fn gram_error(&self) -> f64 {
        let b = self.full_basis();
        let gram = &b * b.transpose();
        let dim = gram.nrows();
        (gram - DMatrix::<f64>::identity(dim, dim)).amax()
    }
}

fn normal_rows(s: &CliffordSystem, x: &DVector<f64>) -> DMatrix<f64> {
    let mut normal = DMatrix::zeros(s.m + 1, x.len());
    for (a, p) in s.matrices.iter().enumerate() {
        normal.row_mut(a).copy_from(&(p * x).transpose());
    }
    normal
}

/// Remove the components along `x`, `P_α x` and the accepted rows of
/// `tangent`, twice, returning the pivot norm of the first pass.
fn orthogonalize(
    v: &mut DVector<f64>,
    x: &DVector<f64>,
    normal: &DMatrix<f64>,
    tangent: &DMatrix<f64>,
    accepted: usize,
) -> f64 {
    let mut pivot = 0.0;
    for pass in 0..2 {
        *v -= x * x.dot(v);
        for a in 0..normal.nrows() {
            let nu = normal.row(a);
            let c = nu.dot(&v.transpose());
            *v -= nu.transpose() * c;
        }
        for j in 0..accepted {
            let e = tangent.row(j);
            let c = e.dot(&v.transpose());
            *v -= e.transpose() * c;
        }
        if pass == 0 {
            pivot = v.norm();
        }
    }
    pivot
}

/// Random orthonormal tangent frame at `p`, reproducible from `seed`.
pub fn adapted_frame(s: &CliffordSystem, p: &FocalPoint, seed: u64) -> Result<AdaptedFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FRAME_STREAM);
    let n = s.n();
    let dim = s.dim_ambient();
    let normal = normal_rows(s, &p.x);
    let mut tangent = DMatrix::zeros(n, dim);
    for i in 0..n {
        let mut v = gaussian_vector(&mut rng, dim);
        let pivot = orthogonalize(&mut v, &p.x, &normal, &tangent, i);
        if pivot < PIVOT_TOL {
            return Err(Error::DegenerateFrame { pivot });
        }
        v /= v.norm();
        tangent.row_mut(i).copy_from(&v.transpose());
    }
    AdaptedFrame::from_tangent(s, p.clone(), tangent)
}

/// Project `x + t v` back onto `M₊`.
pub fn retract(s: &CliffordSystem, p: &FocalPoint, v: &DVector<f64>, t: f64, cfg: &FdConfig) -> Result<FocalPoint> {
    let scale = v.norm().max(1.0);
    let mut off_tangent = p.x.dot(v).abs();
    for q in &s.matrices {
        off_tangent = off_tangent.max((q * &p.x).dot(v).abs());
    }
    if off_tangent > TANGENCY_TOL * scale {
        return Err(Error::InvalidInput(format!(
            "retraction direction is not tangent (normal component {off_tangent:.3e})"
        )));
    }
    if t.abs() * v.norm() >= 0.1 {
        return Err(Error::InvalidInput(format!(
            "retraction displacement {} is not below 0.1",
            t.abs() * v.norm()
        )));
    }
    if t == 0.0 {
        return Ok(p.clone());
    }
    project_to_focal(s, &(&p.x + v * t), cfg)
}

/// Carry a frame to a nearby point by projecting each tangent vector onto
/// `T_q M₊` and re-orthonormalizing in the original order.
pub fn transport_frame(s: &CliffordSystem, f: &AdaptedFrame, q: &FocalPoint) -> Result<AdaptedFrame> {
    let dist = (&q.x - &f.point.x).norm();
    if dist > TRANSPORT_RADIUS {
        return Err(Error::InvalidInput(format!(
            "transport distance {dist:.3e} exceeds {TRANSPORT_RADIUS:.0e}"
        )));
    }
    let normal = normal_rows(s, &q.x);
    let n = f.n();
    let mut tangent = DMatrix::zeros(n, q.x.len());
    for i in 0..n {
        let mut v = f.e(i);
        let pivot = orthogonalize(&mut v, &q.x, &normal, &tangent, i);
        if pivot < PIVOT_TOL {
            return Err(Error::DegenerateFrame { pivot });
        }
        v /= v.norm();
        tangent.row_mut(i).copy_from(&v.transpose());
    }
    Ok(AdaptedFrame {
        point: q.clone(),
        tangent,
        normal,
    })
}

/// Central difference of a frame-component field in the direction `e_j`.
///
/// `field` is evaluated on frames transported to `retract(±h e_j)`; the
/// quotient approximates `∇_{e_j}` of the tensor components.
pub fn fd_covariant_derivative<T, F>(
    s: &CliffordSystem,
    f: &AdaptedFrame,
    j: usize,
    cfg: &FdConfig,
    field: F,
) -> Result<T>
where
    F: Fn(&AdaptedFrame) -> Result<T>,
    T: Sub<Output = T> + Mul<f64, Output = T>,
{
    let h = cfg.step;
    let ej = f.e(j);
    let plus = transport_frame(s, f, &retract(s, &f.point, &ej, h, cfg)?)?;
    let minus = transport_frame(s, f, &retract(s, &f.point, &ej, -h, cfg)?)?;
    Ok((field(&plus)? - field(&minus)?) * (0.5 / h))
}
