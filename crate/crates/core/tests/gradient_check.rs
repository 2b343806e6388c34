//! Analytic layer gradients against central finite differences.

mod common;

use amga::goodness::{GoodnessKind, LayerGoodness};
use common::{grad_case as case, grad_error as check, BATCHES, F32_EPS, SHAPES};

#[test]
fn gradients_match_finite_differences_f64() {
    for kind in [GoodnessKind::MultiScale, GoodnessKind::SumOfSquares] {
        for (in_dim, out_dim) in SHAPES {
            for batch in BATCHES {
                let c = case::<f64>(in_dim, out_dim, batch, kind, 0, 17);
                let err = check(&c, 1e-6);
                assert!(
                    err <= 1e-6,
                    "{kind:?} ({in_dim},{out_dim}) batch {batch}: {err:e}"
                );
            }
        }
    }
}

#[test]
fn gradients_match_finite_differences_f32() {
    for kind in [GoodnessKind::MultiScale, GoodnessKind::SumOfSquares] {
        for (in_dim, out_dim) in SHAPES {
            for batch in BATCHES {
                let c = case::<f32>(in_dim, out_dim, batch, kind, 1, 23);
                let err = check(&c, F32_EPS);
                assert!(
                    err <= 1e-3,
                    "{kind:?} ({in_dim},{out_dim}) batch {batch}: {err:e}"
                );
            }
        }
    }
}

#[test]
fn global_term_couples_the_batch() {
    // the gradient of one sample's loss share depends on the other samples only
    // through the global goodness term
    let c = case::<f64>(6, 12, 4, GoodnessKind::MultiScale, 2, 5);
    let err = check(&c, 1e-6);
    assert!(err <= 1e-6);
    let mut without_global = c;
    without_global.goodness = LayerGoodness::new(GoodnessKind::SumOfSquares, 2, 3, 12).unwrap();
    assert!(check(&without_global, 1e-6) <= 1e-6);
}
