use clifford_ym::curvature::{quintic_traces, PointGeometry};
use clifford_ym::focal::{adapted_frame, sample_focal_point};
use clifford_ym::products::PointProducts;
use clifford_ym::yang_mills::{classical_nym_residual, obstruction_t};
use clifford_ym::{CliffordSystem, FocalPoint};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_rotation(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
    a.qr().q()
}

fn indefinite_l16() -> CliffordSystem {
    CliffordSystem::new(4, 4, &[1, 1, 1, -1]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn frame_choice_does_not_change_invariants(point_seed in 0u64..10_000, f1 in 0u64..1000, f2 in 1000u64..2000) {
        let s = CliffordSystem::new(4, 2, &[1, -1]).unwrap();
        let p = sample_focal_point(&s, point_seed).unwrap();
        let g1 = PointGeometry::new(&s, adapted_frame(&s, &p, f1).unwrap()).unwrap();
        let g2 = PointGeometry::new(&s, adapted_frame(&s, &p, f2).unwrap()).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let t1 = (&g1.shape.h[a] * &g1.shape.h[b]).trace();
                let t2 = (&g2.shape.h[a] * &g2.shape.h[b]).trace();
                prop_assert!((t1 - t2).abs() < 1e-10);
            }
            let (n1, a1) = quintic_traces(&g1.shape, a);
            let (n2, a2) = quintic_traces(&g2.shape, a);
            prop_assert!((n1 - n2).abs() < 1e-9 && (a1 - a2).abs() < 1e-9);
        }
        let r1 = classical_nym_residual(&g1);
        let r2 = classical_nym_residual(&g2);
        for (c1, c2) in r1.components.iter().zip(&r2.components) {
            prop_assert!((c1.projected - c2.projected).abs() < 1e-9);
        }
    }

    #[test]
    fn conjugation_preserves_obstruction(point_seed in 0u64..10_000, rot_seed in 0u64..10_000) {
        let s = indefinite_l16();
        let q = random_rotation(s.dim_ambient(), rot_seed);
        let sc = s.conjugated(&q).unwrap();
        let p = sample_focal_point(&s, point_seed).unwrap();
        let pc = FocalPoint::new(&sc, &q * &p.x).unwrap();
        for a in 0..5 {
            let t = obstruction_t(&s, &p, a).unwrap();
            let tc = obstruction_t(&sc, &pc, a).unwrap();
            prop_assert!((t - tc).abs() < 1e-10 * (1.0 + t.abs()), "{} vs {}", t, tc);
        }
    }

    #[test]
    fn relabeling_permutes_obstruction(point_seed in 0u64..10_000, perm in Just(vec![0usize, 1, 2, 3, 4]).prop_shuffle()) {
        let s = indefinite_l16();
        // P'_{perm[i]} = P_i
        let mut matrices = s.matrices.clone();
        for (i, &j) in perm.iter().enumerate() {
            matrices[j] = s.matrices[i].clone();
        }
        let sp = CliffordSystem::from_matrices(4, 4, s.block_signs.clone(), matrices).unwrap();
        let p = sample_focal_point(&s, point_seed).unwrap();
        let orig = PointProducts::new(&s, &p.x);
        let relabeled = PointProducts::new(&sp, &p.x);
        for (a, &pa) in perm.iter().enumerate() {
            let t = orig.obstruction_sum(a);
            let tp = relabeled.obstruction_sum(pa);
            prop_assert!((t - tp).abs() < 1e-10 * (1.0 + t.abs()));
        }
    }
}

#[test]
fn rotation_is_orthogonal() {
    let q = random_rotation(8, 3);
    assert!((q.transpose() * &q - DMatrix::identity(8, 8)).amax() < 1e-12);
}
