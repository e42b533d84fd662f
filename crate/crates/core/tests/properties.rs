use std::sync::{Arc, OnceLock};

use partial_bgg::algebra::{AlgebraDescriptor, AlgebraElement};
use partial_bgg::flat::{FlatModel, PolyPartialForm};
use partial_bgg::linalg::{parse_rational, rat, ratio, Matrix, Rational};
use partial_bgg::normalization::{random_matrix, seeded_rng, Normalizer, TorsionCandidate};
use partial_bgg::{GradedLieAlgebra, KostantComplex, RepresentationKind};
use proptest::prelude::*;

fn complexes() -> &'static [Arc<KostantComplex>] {
    static CELL: OnceLock<Vec<Arc<KostantComplex>>> = OnceLock::new();
    CELL.get_or_init(|| {
        let so41 = Arc::new(GradedLieAlgebra::conformal(3).unwrap());
        let sl4 = Arc::new(GradedLieAlgebra::grassmannian(2, 2).unwrap());
        [
            (&so41, RepresentationKind::Standard),
            (&so41, RepresentationKind::Adjoint),
            (&sl4, RepresentationKind::DualStandard),
        ]
        .into_iter()
        .map(|(alg, kind)| Arc::new(KostantComplex::new(Arc::new(kind.build(alg.clone()).unwrap()))))
        .collect()
    })
}

fn flat_model() -> &'static FlatModel {
    static CELL: OnceLock<FlatModel> = OnceLock::new();
    CELL.get_or_init(|| FlatModel::new(complexes()[0].clone(), 1, 4).unwrap())
}

fn normalizer() -> &'static Normalizer {
    static CELL: OnceLock<Normalizer> = OnceLock::new();
    CELL.get_or_init(|| Normalizer::new(Arc::new(GradedLieAlgebra::conformal(4).unwrap())).unwrap())
}

fn to_rationals(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|&x| rat(x)).collect()
}

fn is_zero(v: &[Rational]) -> bool {
    v.iter().all(|x| *x == rat(0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn differential_squares_to_zero_on_vectors(which in 0usize..3, k in 0usize..2, seed in any::<u64>()) {
        let c = &complexes()[which];
        let dim = c.space(k).dim();
        let v = random_matrix(&mut seeded_rng(seed), dim, 1).column(0);
        let dv = c.differential_matrix(k).mul_vec(&v);
        prop_assert!(is_zero(&c.differential_matrix(k + 1).mul_vec(&dv)));
    }

    #[test]
    fn hodge_projectors_decompose_any_cochain(which in 0usize..3, k in 0usize..4, entries in prop::collection::vec(-4i64..=4, 200)) {
        let c = &complexes()[which];
        let dim = c.space(k).dim();
        let v = to_rationals(&entries[..dim.min(entries.len())]);
        prop_assume!(v.len() == dim);
        let h = c.hodge_decomposition(k).unwrap();
        let parts = [&h.proj_im_d, &h.proj_harmonic, &h.proj_im_dstar].map(|p| p.mul_vec(&v));
        let total: Vec<Rational> = (0..dim).map(|i| &parts[0][i] + &parts[1][i] + &parts[2][i]).collect();
        prop_assert_eq!(total, v);
        prop_assert!(is_zero(&c.differential_matrix(k).mul_vec(&parts[1])));
        if k > 0 {
            prop_assert!(is_zero(&c.codifferential_matrix(k).mul_vec(&parts[1])));
        }
        prop_assert!(is_zero(&c.laplacian_matrix(k).mul_vec(&parts[1])));
    }

    #[test]
    fn brackets_are_antisymmetric_and_satisfy_jacobi(a in prop::collection::vec(-3i64..=3, 10), b in prop::collection::vec(-3i64..=3, 10), c in prop::collection::vec(-3i64..=3, 10)) {
        let alg = complexes()[0].representation().algebra();
        let [x, y, z] = [a, b, c].map(|v| AlgebraElement(to_rationals(&v)));
        let xy = alg.bracket(&x, &y).unwrap();
        prop_assert_eq!(xy.scale(&rat(-1)), alg.bracket(&y, &x).unwrap());
        let j = alg.bracket(&x, &alg.bracket(&y, &z).unwrap()).unwrap()
            .add(&alg.bracket(&y, &alg.bracket(&z, &x).unwrap()).unwrap())
            .add(&alg.bracket(&z, &xy).unwrap());
        prop_assert!(j.is_zero());
        let kxy = alg.killing_form(&x, &y).unwrap();
        prop_assert_eq!(kxy, alg.killing_form(&y, &x).unwrap());
    }

    #[test]
    fn torsion_normalization_is_idempotent(seed in any::<u64>()) {
        let n = normalizer();
        let tau = n.random_torsion(&mut seeded_rng(seed));
        let (psi, normal) = n.normalize_torsion(&tau).unwrap();
        prop_assert!(n.codifferential_torsion(&normal).unwrap().is_zero());
        prop_assert_eq!(&tau.0 - &normal.0, n.differential_g0(&psi).unwrap().0);
        let (psi2, again) = n.normalize_torsion(&normal).unwrap();
        prop_assert!(psi2.is_zero());
        prop_assert_eq!(again, normal);
    }

    #[test]
    fn torsion_normalization_kills_exact_parts(entries in prop::collection::vec(-3i64..=3, 28)) {
        let n = normalizer();
        let psi = Matrix::from_fn(4, 7, |r, c| rat(entries[r * 7 + c]));
        let exact: TorsionCandidate = n.differential_g0(&psi).unwrap();
        let (_, normal) = n.normalize_torsion(&exact).unwrap();
        prop_assert!(normal.0.is_zero());
    }

    #[test]
    fn twisted_derivative_is_linear_and_squares_to_zero(seed in any::<u64>(), k in 0usize..2, s in -5i64..=5) {
        let m = flat_model();
        let mut rng = seeded_rng(seed);
        let phi = m.random_form(&mut rng, k, 3, 4);
        let psi = m.random_form(&mut rng, k, 3, 4);
        let d = |f: &PolyPartialForm| m.twisted_derivative(f).unwrap();
        let lhs = d(&phi.scale(&rat(s)).add(&psi));
        prop_assert_eq!(lhs, d(&phi).scale(&rat(s)).add(&d(&psi)));
        prop_assert!(d(&d(&phi)).is_zero());
    }

    #[test]
    fn rationals_round_trip_through_strings(p in -1000i64..1000, q in 1i64..1000) {
        let r = ratio(p, q);
        prop_assert_eq!(parse_rational(&r.to_string()), Some(r));
    }
}

#[test]
fn descriptor_survives_json() {
    let alg = GradedLieAlgebra::grassmannian(2, 3).unwrap();
    let text = serde_json::to_string(&alg.descriptor()).unwrap();
    let back: AlgebraDescriptor = serde_json::from_str(&text).unwrap();
    let rebuilt = GradedLieAlgebra::from_descriptor(&back).unwrap();
    assert_eq!(rebuilt.descriptor(), alg.descriptor());
    assert!(rebuilt.check_invariants().all_pass());
}
