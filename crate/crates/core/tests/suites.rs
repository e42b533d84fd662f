use std::sync::Arc;

use partial_bgg::flat::{FlatModel, VerifyOptions};
use partial_bgg::{Family, KostantComplex, RepresentationKind};

fn complex(family: Family, kind: RepresentationKind) -> Arc<KostantComplex> {
    let alg = Arc::new(family.build().unwrap());
    Arc::new(KostantComplex::new(Arc::new(kind.build(alg).unwrap())))
}

#[test]
fn dual_adjoint_homology_mirrors_adjoint() {
    let family = Family::Conformal { n: 4 };
    let adjoint = complex(family, RepresentationKind::Adjoint).homology_dimensions().unwrap();
    let dual = complex(family, RepresentationKind::DualAdjoint).suite_report();
    assert!(dual.all_pass);
    let mut dims: Vec<usize> = dual.rows.iter().map(|r| r.dim_harmonic).collect();
    dims.reverse();
    assert_eq!(dims, adjoint);
}

#[test]
fn transverse_variables_keep_the_suite_green() {
    let c = complex(Family::Conformal { n: 3 }, RepresentationKind::Standard);
    let model = FlatModel::new(c, 1, 4).unwrap();
    let report = model.verify_complex(&VerifyOptions {
        samples: 4,
        seed: 21,
        test_degree: 2,
    });
    assert!(report.all_pass, "{:#?}", report.checks);
    let counts = &report.check("parallel_sections").unwrap().detail["counts"];
    assert_eq!(counts[1]["transverse_degree"], 1);
    assert_eq!(counts[1]["by_solve"], 10);
}

#[test]
fn grassmannian_two_three_standard_homology() {
    let dims = complex(Family::Grassmannian { p: 2, q: 3 }, RepresentationKind::Standard)
        .homology_dimensions()
        .unwrap();
    let euler: i64 = dims.iter().enumerate().map(|(k, &d)| if k % 2 == 0 { d as i64 } else { -(d as i64) }).sum();
    assert_eq!(euler, 0);
    assert_eq!(dims.len(), 7);
}
