//! Symmetric Clifford systems `(P_0, ..., P_m)` on `R^{2l}`.
//!
//! Systems are assembled from `m - 1` skew-symmetric orthogonal generators
//! `E_1, ..., E_{m-1}` on `R^l` that satisfy `E_a E_b + E_b E_a = -2 δ_ab I`.
//! The generators are `k` copies of an explicit irreducible real
//! representation of dimension `δ(m)`:
//!
//! | m      | irreducible module                          |
//! |--------|---------------------------------------------|
//! | 1      | `R^1`, no generators                        |
//! | 2      | `R^2`, rotation by a right angle            |
//! | 3, 4   | `R^4`, left multiplication by `i, j, k`      |
//! | 5 .. 8 | `R^8`, left multiplication by octonion units |
//! | 9      | `R^16 = R^8 ⊗ R^2`                          |
//!
//! For `m ≡ 0 (mod 4)` the sign of the first generator can be chosen per
//! block, which selects between definite and indefinite systems.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entrywise tolerance for the algebraic relations of generators and systems.
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance separating `|Tr(P_0 ⋯ P_m)| = 2l` from the indefinite case.
pub const VARIANT_TOL: f64 = 1e-9;
/// Largest `m` with an explicit generator construction.
pub const MAX_M: usize = 9;

/// Dimension `δ(m)` of the irreducible module of `Cl_{m-1}`.
///
/// Tabulated for `1 <= m <= 8` and extended by `δ(m + 8) = 16 δ(m)`.
pub fn irreducible_dimension(m: usize) -> usize {
    const TABLE: [usize; 8] = [1, 2, 4, 4, 8, 8, 8, 8];
    assert!(m >= 1, "irreducible_dimension requires m >= 1");
    let mut m = m;
    let mut factor = 1;
    while m > 8 {
        m -= 8;
        factor *= 16;
    }
    TABLE[m - 1] * factor
}

/// Skew-symmetric orthogonal generators `E_1 .. E_{m-1}` on `R^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSet {
    pub m: usize,
    pub k: usize,
    pub delta: usize,
    pub l: usize,
    pub generators: Vec<DMatrix<f64>>,
    pub block_signs: Vec<i8>,
}

impl GeneratorSet {
    /// Check skew-symmetry, orthogonality, the anti-commutation relations
    /// and the block structure.
    pub fn validate(&self) -> Result<()> {
        if self.generators.len() + 1 != self.m {
            return Err(Error::DimensionMismatch(format!(
                "expected {} generators, found {}",
                self.m - 1,
                self.generators.len()
            )));
        }
        if self.l != self.k * self.delta {
            return Err(Error::DimensionMismatch(format!(
                "l = {} but k * delta = {}",
                self.l,
                self.k * self.delta
            )));
        }
        let id = DMatrix::<f64>::identity(self.l, self.l);
        for (a, e) in self.generators.iter().enumerate() {
            if e.nrows() != self.l || e.ncols() != self.l {
                return Err(Error::DimensionMismatch(format!(
                    "generator {} is {}x{}, expected {}x{}",
                    a + 1,
                    e.nrows(),
                    e.ncols(),
                    self.l,
                    self.l
                )));
            }
            let skew = max_abs(&(e.transpose() + e));
            check(skew, format!("E_{} skew-symmetric", a + 1))?;
            let orth = max_abs(&(e.transpose() * e - &id));
            check(orth, format!("E_{} orthogonal", a + 1))?;
            for b in 0..self.l {
                for c in 0..self.l {
                    if b / self.delta != c / self.delta && e[(b, c)] != 0.0 {
                        return Err(Error::invariant(
                            format!("E_{} block-diagonal", a + 1),
                            e[(b, c)].abs(),
                            0.0,
                        ));
                    }
                }
            }
        }
        for (a, ea) in self.generators.iter().enumerate() {
            for (b, eb) in self.generators.iter().enumerate().skip(a) {
                let mut anti = ea * eb + eb * ea;
                if a == b {
                    anti += &id * 2.0;
                }
                check(max_abs(&anti), format!("E_{}E_{} + E_{}E_{}", a + 1, b + 1, b + 1, a + 1))?;
            }
        }
        Ok(())
    }
}

/// Build `m - 1` generators on `R^{k δ(m)}` from `k` irreducible blocks.
///
/// For `m ≡ 0 (mod 4)`, block `b` of `E_1` is multiplied by
/// `block_signs[b]`; an empty sign list means all blocks positive. Signs
/// are ignored for other `m`.
pub fn build_generators(m: usize, k: usize, block_signs: &[i8]) -> Result<GeneratorSet> {
    if m == 0 || m > MAX_M {
        return Err(Error::InvalidInput(format!("m must be in 1..={MAX_M}, got {m}")));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let delta = irreducible_dimension(m);
    let l = k * delta;
    if l < m + 2 {
        return Err(Error::InvalidInput(format!(
            "(m, k) = ({m}, {k}) gives l = {l} and m2 = l - m - 1 < 1: the focal submanifold is empty"
        )));
    }
    let signs = normalize_signs(m, k, block_signs)?;

    let irreducible = irreducible_generators(m);
    let generators = irreducible
        .iter()
        .enumerate()
        .map(|(a, block)| {
            let mut e = DMatrix::<f64>::zeros(l, l);
            for (b, &sign) in signs.iter().enumerate() {
                let s = if a == 0 && m.is_multiple_of(4) { f64::from(sign) } else { 1.0 };
                e.view_mut((b * delta, b * delta), (delta, delta))
                    .copy_from(&(block * s));
            }
            e
        })
        .collect();

    let set = GeneratorSet {
        m,
        k,
        delta,
        l,
        generators,
        block_signs: signs,
    };
    set.validate()?;
    Ok(set)
}

fn normalize_signs(m: usize, k: usize, block_signs: &[i8]) -> Result<Vec<i8>> {
    if !m.is_multiple_of(4) || block_signs.is_empty() {
        return Ok(vec![1; k]);
    }
    if block_signs.len() != k {
        return Err(Error::InvalidInput(format!(
            "expected {k} block signs, got {}",
            block_signs.len()
        )));
    }
    if let Some(bad) = block_signs.iter().find(|s| **s != 1 && **s != -1) {
        return Err(Error::InvalidInput(format!("block sign must be +1 or -1, got {bad}")));
    }
    Ok(block_signs.to_vec())
}

/// Irreducible generators of `Cl_{m-1}` on `R^{δ(m)}`.
fn irreducible_generators(m: usize) -> Vec<DMatrix<f64>> {
    match m {
        1 => Vec::new(),
        2 => vec![DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])],
        3 | 4 => (1..m).map(quaternion_left).collect(),
        5..=8 => (1..m).map(octonion_left).collect(),
        9 => {
            // E_a ⊗ diag(1, -1) for the seven octonion units, then I_8 ⊗ J.
            let sz = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
            let j = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
            let mut gens: Vec<_> = (1..8).map(|u| octonion_left(u).kronecker(&sz)).collect();
            gens.push(DMatrix::<f64>::identity(8, 8).kronecker(&j));
            gens
        }
        _ => unreachable!("m validated by caller"),
    }
}

type Quat = [f64; 4];

fn quat_mul(p: Quat, q: Quat) -> Quat {
    [
        p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3],
        p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2],
        p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1],
        p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0],
    ]
}

fn quat_conj(p: Quat) -> Quat {
    [p[0], -p[1], -p[2], -p[3]]
}

fn unit<const N: usize>(i: usize) -> [f64; N] {
    let mut v = [0.0; N];
    v[i] = 1.0;
    v
}

/// Matrix of `x ↦ u x` for the quaternion unit `u ∈ {i, j, k}`.
fn quaternion_left(u: usize) -> DMatrix<f64> {
    let q = unit::<4>(u);
    DMatrix::from_fn(4, 4, |r, c| quat_mul(q, unit::<4>(c))[r])
}

/// Cayley-Dickson product `(a, b)(c, d) = (ac - d̄b, da + bc̄)`.
fn octonion_mul(x: [f64; 8], y: [f64; 8]) -> [f64; 8] {
    let split = |o: [f64; 8]| -> (Quat, Quat) { ([o[0], o[1], o[2], o[3]], [o[4], o[5], o[6], o[7]]) };
    let (a, b) = split(x);
    let (c, d) = split(y);
    let ac = quat_mul(a, c);
    let db = quat_mul(quat_conj(d), b);
    let da = quat_mul(d, a);
    let bc = quat_mul(b, quat_conj(c));
    let mut out = [0.0; 8];
    for i in 0..4 {
        out[i] = ac[i] - db[i];
        out[i + 4] = da[i] + bc[i];
    }
    out
}

/// Matrix of left multiplication by the octonion unit `e_u`, `1 <= u <= 7`.
fn octonion_left(u: usize) -> DMatrix<f64> {
    let e = unit::<8>(u);
    DMatrix::from_fn(8, 8, |r, c| octonion_mul(e, unit::<8>(c))[r])
}

/// A symmetric Clifford system `P_0, ..., P_m` on `R^{2l}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordSystem {
    pub m: usize,
    pub k: usize,
    pub l: usize,
    pub block_signs: Vec<i8>,
    pub matrices: Vec<DMatrix<f64>>,
}

impl CliffordSystem {
    /// Convenience for `assemble_system(build_generators(m, k, signs)?)`.
    pub fn new(m: usize, k: usize, block_signs: &[i8]) -> Result<Self> {
        assemble_system(&build_generators(m, k, block_signs)?)
    }

    /// Wrap arbitrary matrices, validating every system invariant.
    pub fn from_matrices(m: usize, k: usize, block_signs: Vec<i8>, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if matrices.len() != m + 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} matrices, found {}",
                m + 1,
                matrices.len()
            )));
        }
        let dim = matrices[0].nrows();
        if !dim.is_multiple_of(2) {
            return Err(Error::DimensionMismatch(format!("ambient dimension {dim} is odd")));
        }
        let sys = CliffordSystem {
            m,
            k,
            l: dim / 2,
            block_signs,
            matrices,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn dim_ambient(&self) -> usize {
        2 * self.l
    }

    /// Dimension `n = 2l - m - 2` of the focal submanifold.
    pub fn n(&self) -> usize {
        2 * self.l - self.m - 2
    }

    /// Number of normal directions `m + 1`.
    pub fn normal_count(&self) -> usize {
        self.m + 1
    }

    /// `(m1, m2) = (m, l - m - 1)`.
    pub fn multiplicities(&self) -> (usize, usize) {
        (self.m, self.l - self.m - 1)
    }

    /// Largest entry of `P_i P_j + P_j P_i - 2 δ_ij I` over all pairs.
    pub fn max_anticommutator_error(&self) -> f64 {
        let id = DMatrix::<f64>::identity(self.dim_ambient(), self.dim_ambient());
        let mut worst: f64 = 0.0;
        for (i, pi) in self.matrices.iter().enumerate() {
            for (j, pj) in self.matrices.iter().enumerate().skip(i) {
                let mut anti = pi * pj + pj * pi;
                if i == j {
                    anti -= &id * 2.0;
                }
                worst = worst.max(max_abs(&anti));
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim_ambient();
        if self.l < self.m + 2 {
            return Err(Error::InvalidInput(format!(
                "m2 = l - m - 1 = {} < 1",
                self.l as i64 - self.m as i64 - 1
            )));
        }
        let id = DMatrix::<f64>::identity(dim, dim);
        for (i, p) in self.matrices.iter().enumerate() {
            if p.nrows() != dim || p.ncols() != dim {
                return Err(Error::DimensionMismatch(format!("P_{i} is not {dim}x{dim}")));
            }
            check(max_abs(&(p - p.transpose())), format!("P_{i} symmetric"))?;
            check(max_abs(&(p.transpose() * p - &id)), format!("P_{i} orthogonal"))?;
        }
        check(self.max_anticommutator_error(), "P_iP_j + P_jP_i = 2δ_ij I")
    }

    /// The product `P_0 P_1 ⋯ P_m`.
    pub fn full_product(&self) -> DMatrix<f64> {
        self.ordered_product(&(0..=self.m).collect::<Vec<_>>())
    }

    /// Dense product `P_{i_1} P_{i_2} ⋯ P_{i_r}` in the given order.
    pub fn ordered_product(&self, indices: &[usize]) -> DMatrix<f64> {
        let dim = self.dim_ambient();
        indices
            .iter()
            .fold(DMatrix::identity(dim, dim), |acc, &i| acc * &self.matrices[i])
    }

    /// Conjugate by an orthogonal matrix: `P_i ↦ R P_i Rᵀ`.
    pub fn conjugated(&self, rotation: &DMatrix<f64>) -> Result<Self> {
        let matrices = self
            .matrices
            .iter()
            .map(|p| rotation * p * rotation.transpose())
            .collect();
        CliffordSystem::from_matrices(self.m, self.k, self.block_signs.clone(), matrices)
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            m: self.m,
            k: self.k,
            block_signs: self.block_signs.clone(),
            matrices: self
                .matrices
                .iter()
                .map(|p| p.transpose().as_slice().to_vec())
                .collect(),
        }
    }

    pub fn from_file(file: &SystemFile) -> Result<Self> {
        let mut matrices = Vec::with_capacity(file.matrices.len());
        for (i, flat) in file.matrices.iter().enumerate() {
            let dim = (flat.len() as f64).sqrt().round() as usize;
            if dim * dim != flat.len() {
                return Err(Error::Schema(format!("matrix {i} has {} entries, not a square", flat.len())));
            }
            matrices.push(DMatrix::from_row_slice(dim, dim, flat));
        }
        CliffordSystem::from_matrices(file.m, file.k, file.block_signs.clone(), matrices)
    }
}

/// `P_0 = diag(I, -I)`, `P_1 = antidiag(I, I)`, `P_a = [[0, E], [-E, 0]]`.
pub fn assemble_system(g: &GeneratorSet) -> Result<CliffordSystem> {
    g.validate()?;
    let l = g.l;
    let id = DMatrix::<f64>::identity(l, l);
    let mut p0 = DMatrix::<f64>::zeros(2 * l, 2 * l);
    p0.view_mut((0, 0), (l, l)).copy_from(&id);
    p0.view_mut((l, l), (l, l)).copy_from(&(-&id));
    let mut p1 = DMatrix::<f64>::zeros(2 * l, 2 * l);
    p1.view_mut((0, l), (l, l)).copy_from(&id);
    p1.view_mut((l, 0), (l, l)).copy_from(&id);

    let mut matrices = vec![p0, p1];
    for e in &g.generators {
        let mut p = DMatrix::<f64>::zeros(2 * l, 2 * l);
        p.view_mut((0, l), (l, l)).copy_from(e);
        p.view_mut((l, 0), (l, l)).copy_from(&(-e));
        matrices.push(p);
    }
    let sys = CliffordSystem {
        m: g.m,
        k: g.k,
        l,
        block_signs: g.block_signs.clone(),
        matrices,
    };
    sys.validate()?;
    Ok(sys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariantKind {
    NotApplicable,
    Definite,
    Indefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantTag {
    pub kind: VariantKind,
    pub product_trace: f64,
}

/// Definite iff `|Tr(P_0 ⋯ P_m)| = 2l`; only meaningful for `m ≡ 0 (mod 4)`.
pub fn variant_classify(s: &CliffordSystem) -> VariantTag {
    let product_trace = s.full_product().trace();
    let kind = if !s.m.is_multiple_of(4) {
        VariantKind::NotApplicable
    } else if (product_trace.abs() - s.dim_ambient() as f64).abs() <= VARIANT_TOL {
        VariantKind::Definite
    } else {
        VariantKind::Indefinite
    };
    VariantTag { kind, product_trace }
}

/// On-disk form of a system: matrices flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub m: usize,
    pub k: usize,
    pub block_signs: Vec<i8>,
    pub matrices: Vec<Vec<f64>>,
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn check(value: f64, what: impl Into<String>) -> Result<()> {
    if value < ALGEBRA_TOL {
        Ok(())
    } else {
        Err(Error::invariant(what, value, ALGEBRA_TOL))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn irreducible_dimension_table() {
        let expected = [1, 2, 4, 4, 8, 8, 8, 8];
        for (m, d) in (1..=8).zip(expected) {
            assert_eq!(irreducible_dimension(m), d);
        }
        assert_eq!(irreducible_dimension(4), 4);
        assert_eq!(irreducible_dimension(7), 8);
        assert_eq!(irreducible_dimension(12), 64);
        for m in 1..=16 {
            assert_eq!(irreducible_dimension(m + 8), 16 * irreducible_dimension(m));
        }
    }

    #[test]
    fn m1_has_no_generators() {
        let g = build_generators(1, 3, &[]).unwrap();
        assert!(g.generators.is_empty());
        assert_eq!(g.l, 3);
    }

    #[test]
    fn m2_generator_squares_to_minus_identity() {
        let g = build_generators(2, 2, &[]).unwrap();
        assert_eq!(g.generators.len(), 1);
        let e = &g.generators[0];
        assert_eq!(e.shape(), (4, 4));
        // explicit product, entry by entry
        for r in 0..4 {
            for c in 0..4 {
                let v: f64 = (0..4).map(|t| e[(r, t)] * e[(t, c)]).sum();
                let expect = if r == c { -1.0 } else { 0.0 };
                assert_eq!(v, expect);
            }
        }
    }

    #[test]
    fn m4_generators_multiply_to_minus_identity() {
        // L_i L_j L_k v = (ijk) v = -v on each quaternion block.
        let g = build_generators(4, 2, &[1, 1]).unwrap();
        assert_eq!(g.generators.len(), 3);
        let a = &g.generators[0] * &g.generators[1] * &g.generators[2];
        assert!(max_abs(&(a + DMatrix::<f64>::identity(8, 8))) < 1e-15);
    }

    #[test]
    fn all_generator_sets_validate() {
        for m in 1..=9 {
            let delta = irreducible_dimension(m);
            let k = (m + 2).div_ceil(delta).max(1) + 1;
            let g = build_generators(m, k, &[]).unwrap();
            assert_eq!(g.generators.len(), m - 1);
            g.validate().unwrap();
        }
    }

    #[test]
    fn empty_focal_submanifold_is_rejected() {
        assert!(build_generators(1, 2, &[]).is_err());
        assert!(build_generators(3, 1, &[]).is_err());
        assert!(build_generators(4, 1, &[1]).is_err());
        assert!(build_generators(7, 1, &[]).is_err());
        assert!(build_generators(8, 1, &[1]).is_err());
        assert!(build_generators(5, 1, &[]).is_ok());
        assert!(build_generators(6, 1, &[]).is_ok());
        assert!(build_generators(10, 1, &[]).is_err());
    }

    #[test]
    fn bad_signs_are_rejected() {
        assert!(build_generators(4, 2, &[1]).is_err());
        assert!(build_generators(4, 2, &[1, 2]).is_err());
        // ignored when m is not a multiple of four
        assert!(build_generators(3, 2, &[1]).is_ok());
    }

    #[test]
    fn m1_system_blocks() {
        let s = CliffordSystem::new(1, 3, &[]).unwrap();
        assert_eq!(s.matrices.len(), 2);
        assert_eq!(s.n(), 3);
        assert_eq!(s.multiplicities(), (1, 1));
        assert_eq!(s.max_anticommutator_error(), 0.0);
        assert_eq!(s.matrices[0][(0, 0)], 1.0);
        assert_eq!(s.matrices[0][(3, 3)], -1.0);
        assert_eq!(s.matrices[1][(0, 3)], 1.0);
        assert_eq!(s.matrices[1][(3, 0)], 1.0);
    }

    #[test]
    fn m2_system_anticommutes() {
        let s = CliffordSystem::new(2, 2, &[]).unwrap();
        assert_eq!(s.matrices.len(), 3);
        assert!(s.max_anticommutator_error() < 1e-14);
    }

    #[test]
    fn m4_full_product_is_block_diagonal_a() {
        let g = build_generators(4, 2, &[1, 1]).unwrap();
        let a = &g.generators[0] * &g.generators[1] * &g.generators[2];
        let s = assemble_system(&g).unwrap();
        let q = s.full_product();
        let mut expected = DMatrix::<f64>::zeros(16, 16);
        expected.view_mut((0, 0), (8, 8)).copy_from(&a);
        expected.view_mut((8, 8), (8, 8)).copy_from(&a);
        assert!(max_abs(&(q.clone() - expected)) < 1e-14);
        let id = DMatrix::<f64>::identity(16, 16);
        assert!(max_abs(&(q.abs() - id.abs())) < 1e-14);
    }

    #[test]
    fn variant_tags() {
        let s3 = CliffordSystem::new(3, 2, &[]).unwrap();
        assert_eq!(variant_classify(&s3).kind, VariantKind::NotApplicable);

        let def = variant_classify(&CliffordSystem::new(4, 2, &[1, 1]).unwrap());
        assert_eq!(def.kind, VariantKind::Definite);
        assert!((def.product_trace.abs() - 16.0).abs() < 1e-12);

        let indef = variant_classify(&CliffordSystem::new(4, 2, &[1, -1]).unwrap());
        assert_eq!(indef.kind, VariantKind::Indefinite);
        assert!(indef.product_trace.abs() < 1e-12);

        let flipped = variant_classify(&CliffordSystem::new(4, 2, &[-1, -1]).unwrap());
        assert_eq!(flipped.kind, VariantKind::Definite);
        assert!((flipped.product_trace.abs() - def.product_trace.abs()).abs() < 1e-12);

        let def8 = variant_classify(&CliffordSystem::new(8, 2, &[1, 1]).unwrap());
        assert_eq!(def8.kind, VariantKind::Definite);
        let indef8 = variant_classify(&CliffordSystem::new(8, 2, &[1, -1]).unwrap());
        assert_eq!(indef8.kind, VariantKind::Indefinite);
    }

    #[test]
    fn file_round_trip() {
        let s = CliffordSystem::new(4, 2, &[1, -1]).unwrap();
        let back = CliffordSystem::from_file(&s.to_file()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn corrupted_file_is_rejected() {
        let s = CliffordSystem::new(2, 2, &[]).unwrap();
        let mut f = s.to_file();
        f.matrices[1][3] += 1e-6;
        assert!(CliffordSystem::from_file(&f).is_err());
        f.matrices[1].pop();
        assert!(matches!(CliffordSystem::from_file(&f), Err(Error::Schema(_))));
    }
}
