//! Memoized Clifford words applied to a fixed point.
//!
//! Any word `P_{i_1} ⋯ P_{i_r}` reduces, using `P_i P_j = -P_j P_i` for
//! `i ≠ j` and `P_i² = I`, to `±P_S` for a sorted index set `S`. Values of
//! `P_S x` are cached per set, so quadruple sums over permuted indices reuse
//! at most `2^{m+1}` vectors.

use std::sync::OnceLock;

use nalgebra::DVector;

use crate::clifford::CliffordSystem;

/// Reduce a word to `(sign, bitmask of surviving indices)`.
pub fn canonical_word(indices: &[usize]) -> (f64, u32) {
    let mut word: Vec<usize> = indices.to_vec();
    let mut sign = 1.0;
    // bubble sort, counting swaps of distinct generators
    for pass in 0..word.len() {
        for j in 0..word.len().saturating_sub(pass + 1) {
            if word[j] > word[j + 1] {
                word.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    let mut mask = 0u32;
    for i in word {
        mask ^= 1 << i;
    }
    (sign, mask)
}

/// Lazily evaluated `P_S x` for every index set `S ⊆ {0..m}`.
pub struct PointProducts<'a> {
    system: &'a CliffordSystem,
    x: DVector<f64>,
    cache: Vec<OnceLock<DVector<f64>>>,
}

impl<'a> PointProducts<'a> {
    pub fn new(system: &'a CliffordSystem, x: &DVector<f64>) -> Self {
        let sets = 1usize << (system.m + 1);
        PointProducts {
            system,
            x: x.clone(),
            cache: (0..sets).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn normal_count(&self) -> usize {
        self.system.m + 1
    }

    /// `P_{s_1} P_{s_2} ⋯ x` for the set `mask` in ascending order.
    fn set_vector(&self, mask: u32) -> &DVector<f64> {
        self.cache[mask as usize].get_or_init(|| {
            if mask == 0 {
                return self.x.clone();
            }
            let first = mask.trailing_zeros() as usize;
            &self.system.matrices[first] * self.set_vector(mask & !(1 << first))
        })
    }

    /// The vector `P_{i_1} ⋯ P_{i_r} x`.
    pub fn apply(&self, indices: &[usize]) -> DVector<f64> {
        let (sign, mask) = canonical_word(indices);
        self.set_vector(mask) * sign
    }

    /// `⟨P_{i_1} ⋯ P_{i_r} x, x⟩`.
    pub fn quad(&self, indices: &[usize]) -> f64 {
        let (sign, mask) = canonical_word(indices);
        sign * self.set_vector(mask).dot(&self.x)
    }

    /// `⟨P_{i_1} ⋯ P_{i_r} x, v⟩`.
    pub fn pair(&self, indices: &[usize], v: &DVector<f64>) -> f64 {
        let (sign, mask) = canonical_word(indices);
        sign * self.set_vector(mask).dot(v)
    }

    /// The distinct-index quintuple sum
    /// `T_α = Σ ⟨P_β P_γ P_δ P_ε x, x⟩ ⟨P_α P_β P_γ P_δ P_ε x, x⟩`
    /// over ordered `(β, γ, δ, ε)`, pairwise distinct and different from `α`.
    pub fn obstruction_sum(&self, alpha: usize) -> f64 {
        let count = self.normal_count();
        let mut total = 0.0;
        for b in (0..count).filter(|&b| b != alpha) {
            for c in (0..count).filter(|&c| c != alpha && c != b) {
                for d in (0..count).filter(|&d| d != alpha && d != b && d != c) {
                    for e in (0..count).filter(|&e| e != alpha && e != b && e != c && e != d) {
                        total += self.quad(&[b, c, d, e]) * self.quad(&[alpha, b, c, d, e]);
                    }
                }
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::focal::sample_focal_point;
    use proptest::prelude::*;

    #[test]
    fn canonical_examples() {
        assert_eq!(canonical_word(&[]), (1.0, 0));
        assert_eq!(canonical_word(&[2, 1]), (-1.0, 0b110));
        assert_eq!(canonical_word(&[3, 3]), (1.0, 0));
        assert_eq!(canonical_word(&[1, 2, 1]), (-1.0, 0b100));
        assert_eq!(canonical_word(&[3, 2, 1, 0]), (1.0, 0b1111));
    }

    #[test]
    fn quadratic_forms_on_the_sphere() {
        // ⟨P_i P_j x, x⟩ = δ_ij for unit x, any x
        let s = CliffordSystem::new(4, 2, &[1, -1]).unwrap();
        let p = sample_focal_point(&s, 11).unwrap();
        let prods = PointProducts::new(&s, &p.x);
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prods.quad(&[i, j]) - expect).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn cached_words_match_dense_products(word in proptest::collection::vec(0usize..5, 0..7), seed in 0u64..1000) {
            let s = CliffordSystem::new(4, 2, &[1, -1]).unwrap();
            let p = sample_focal_point(&s, seed).unwrap();
            let prods = PointProducts::new(&s, &p.x);
            let dense = s.ordered_product(&word) * &p.x;
            prop_assert!((prods.apply(&word) - dense).amax() < 1e-12);
        }
    }
}
