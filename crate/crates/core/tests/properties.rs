//! Randomized checks of the structural invariants, on small meshes.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use proptest::prelude::*;

use epod::coeff::{sample_params, CoeffFamily, ForceFamily};
use epod::fem::{FemSolver, MaskNorms, StiffnessAssembler, DEFAULT_TOL};
use epod::maps::{linear_scan, KdTree, LegendreMap};
use epod::mesh::{Mesh, Rect, SubdomainMask};
use epod::pod::{eig_sym, PodBasis, PodOptions, Truncation};
use epod::sensing::qr_pivoted;
use epod::snapshots::SnapshotSet;

const N: usize = 16;

struct Fixture {
    mesh: Mesh,
    set: SnapshotSet,
    norms: MaskNorms,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let family = CoeffFamily::parse("ex1", N).unwrap();
        let mesh = Mesh::new(N).unwrap();
        let set =
            SnapshotSet::generate(&family, family.default_force(), N, 24, 3, DEFAULT_TOL).unwrap();
        let norms = MaskNorms::new(&mesh, &SubdomainMask::full(&mesh)).unwrap();
        Fixture { mesh, set, norms }
    })
}

fn symmetric(dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-1.0..1.0f64, dim * dim).prop_map(move |v| {
        let a = DMatrix::from_vec(dim, dim, v);
        &a + a.transpose()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stiffness_is_symmetric_and_additive(c in 0.1..5.0f64, d in 0.1..5.0f64, w in 1.0..20.0f64) {
        let mesh = Mesh::new(8).unwrap();
        let asm = StiffnessAssembler::new(&mesh);
        let fa = move |x: f64, y: f64| c + (w * x).sin().abs() * y;
        let fb = move |x: f64, _y: f64| d * (1.0 + x);
        let a = asm.assemble(fa).unwrap();
        let b = asm.assemble(fb).unwrap();
        let ab = asm.assemble(move |x, y| fa(x, y) + fb(x, y)).unwrap();
        prop_assert!(a.asymmetry() <= 1e-12);
        let sum = a.add(&b);
        let scale = ab.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (s, t) in sum.values().iter().zip(ab.values()) {
            prop_assert!((s - t).abs() <= 1e-12 * scale);
        }
        // positive definite after elimination: x^T A x > 0 for a nonzero interior vector
        let x: Vec<f64> = (0..a.dim()).map(|i| ((i as f64) * w).cos() + 1.5).collect();
        prop_assert!(a.inner(&x, &a.mul_vec(&x)) > 0.0);
    }

    #[test]
    fn sampled_parameters_stay_in_range(seed in any::<u64>(), id in 0usize..4) {
        let family = CoeffFamily::parse(["ex1", "ex2", "ex3", "ex4"][id], N).unwrap();
        for force in [family.default_force(), ForceFamily::RandomTrig] {
            let (lo, hi) = family.range();
            for p in sample_params(&family, &force, seed, 8).unwrap() {
                prop_assert!(p.xi.iter().all(|v| (lo..=hi).contains(v)));
                for (t, (a, b)) in p.theta.iter().zip(force.param_ranges()) {
                    prop_assert!((a..=b).contains(t));
                }
            }
        }
    }

    #[test]
    fn jacobi_eigenpairs_are_ordered_and_orthonormal(a in symmetric(7)) {
        let s = eig_sym(&a).unwrap();
        prop_assert!(s.values.windows(2).all(|w| w[1] <= w[0]));
        let v = &s.vectors;
        prop_assert!((v.transpose() * v - DMatrix::identity(7, 7)).amax() <= 1e-10);
        let recon = v * DMatrix::from_diagonal(&s.values.clone().into()) * v.transpose();
        prop_assert!((recon - &a).amax() <= 1e-10 * a.amax().max(1.0));
    }

    #[test]
    fn kd_tree_matches_linear_scan(
        dim in 1usize..5,
        raw in proptest::collection::vec(0.0..1.0f64, 8..240),
        q in proptest::collection::vec(-0.5..1.5f64, 4),
        k in 1usize..12,
    ) {
        let count = raw.len() / dim;
        let pts = raw[..count * dim].to_vec();
        let k = k.min(count);
        let tree = KdTree::build(pts.clone(), dim).unwrap();
        prop_assert_eq!(tree.query(&q[..dim], k).unwrap(), linear_scan(&pts, dim, &q[..dim], k));
    }

    #[test]
    fn pivoted_qr_identity_and_decreasing_pivots(rows in 2usize..12, cols in 2usize..12, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0));
        let f = qr_pivoted(&a);
        let ap = DMatrix::from_fn(rows, cols, |i, j| a[(i, f.permutation()[j])]);
        prop_assert!((ap - f.q() * f.r()).norm() <= 1e-10 * a.norm());
        let piv = f.pivot_magnitudes();
        prop_assert!(piv.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn legendre_reproduces_its_own_span(c in proptest::collection::vec(-2.0..2.0f64, 10), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // quadratics in three variables live in the degree-2 space
        let target = |x: &[f64]| {
            c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[2] + c[4] * x[0] * x[1]
                + c[5] * x[1] * x[2] + c[6] * x[0] * x[2] + c[7] * x[0] * x[0] + c[8] * x[1] * x[1] + c[9] * x[2] * x[2]
        };
        let inputs = DMatrix::from_fn(40, 3, |_, _| rng.gen_range(0.0..3.0));
        let targets = DMatrix::from_fn(40, 1, |i, _| target(&[inputs[(i, 0)], inputs[(i, 1)], inputs[(i, 2)]]));
        let map = LegendreMap::fit(&inputs, &targets, vec![(0.0, 3.0); 3], 2).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..3.0)).collect();
            prop_assert!((map.eval(&x).unwrap().coeffs[0] - target(&x)).abs() <= 1e-8 * (1.0 + target(&x).abs()));
        }
    }

    #[test]
    fn projection_error_is_non_increasing_in_k(j in 0usize..24) {
        let f = fixture();
        let opts = PodOptions { truncation: Truncation::Fixed(12), subtract_mean: false };
        let basis = PodBasis::build(&f.set, f.norms.mass(), opts).unwrap();
        let u = f.set.column(j);
        let errs: Vec<f64> = (1..=12)
            .map(|k| {
                let b = basis.truncate(k).unwrap();
                let r = b.reconstruct(&b.project(&u, f.norms.mass()).unwrap()).unwrap();
                f.norms.relative_errors(&u, &r).0
            })
            .collect();
        prop_assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn basis_is_invariant_under_reordering(perm in Just((0..24).collect::<Vec<usize>>()).prop_shuffle()) {
        let f = fixture();
        let fields = DMatrix::from_fn(f.set.fields().nrows(), 24, |i, j| f.set.fields()[(i, perm[j])]);
        let params = perm.iter().map(|&j| f.set.params()[j].clone()).collect();
        let shuffled = SnapshotSet::from_parts(f.set.n(), params, fields, f.set.meta().clone()).unwrap();
        let opts = PodOptions { truncation: Truncation::Fixed(4), subtract_mean: false };
        let a = PodBasis::build(&f.set, f.norms.mass(), opts).unwrap();
        let b = PodBasis::build(&shuffled, f.norms.mass(), opts).unwrap();
        for k in 0..4 {
            let (x, y) = (a.phi().column(k), b.phi().column(k));
            let sign = x.dot(&y).signum();
            prop_assert!((x - y * sign).amax() <= 1e-8 * x.amax());
        }
    }

    #[test]
    fn nested_restriction_equals_direct(x0 in 0.0..0.4f64, y0 in 0.0..0.4f64, w in 0.3..0.6f64) {
        let f = fixture();
        let outer = Rect::new(x0, x0 + w, y0, y0 + w);
        let inner = Rect::new(x0 + 0.05, x0 + w - 0.05, y0 + 0.05, y0 + w - 0.05);
        let twice = f.set.restrict(&f.mesh, outer).unwrap().restrict(&f.mesh, inner).unwrap();
        let once = f.set.restrict(&f.mesh, inner).unwrap();
        prop_assert_eq!(twice.fields(), once.fields());
    }
}

#[test]
fn generation_is_a_pure_function_of_its_inputs() {
    let family = CoeffFamily::parse("ex3", 8).unwrap();
    let a = SnapshotSet::generate(&family, family.default_force(), 8, 6, 42, DEFAULT_TOL).unwrap();
    let b = SnapshotSet::generate(&family, family.default_force(), 8, 6, 42, DEFAULT_TOL).unwrap();
    assert_eq!(a.fields(), b.fields());
    assert_eq!(a.params(), b.params());
    let solver = FemSolver::new(Mesh::new(8).unwrap(), DEFAULT_TOL).unwrap();
    let u = solver
        .solve_params(&family, &family.default_force(), &a.params()[2])
        .unwrap();
    assert_eq!(u.values, a.column(2));
}
