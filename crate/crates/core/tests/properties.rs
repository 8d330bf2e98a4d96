use num_complex::Complex64;
use proptest::prelude::*;
use vwlab::dist_catalog::{CatalogSmooth, DistributionExpr, TestFunction};
use vwlab::gausspoly::GaussPoly;
use vwlab::grid_field::{fourier, Field, Grid};
use vwlab::mollifier::{regularize, EpsilonScale, MollifierPair};
use vwlab::pde_solver::{solve, CauchyProblem, CoefficientSet, RecordSpec};
use vwlab::psido::{quantize, SymbolSpec, XiFactor};
use vwlab::smooth::SmoothFunction;
use vwlab::vws_harness::{fit_powerlaw, VerdictThresholds};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn catalog_expr() -> impl Strategy<Value = DistributionExpr> {
    prop_oneof![
        (-1.0..1.0f64).prop_map(DistributionExpr::delta),
        ((-1.0..1.0f64), 1u32..3).prop_map(|(a, k)| DistributionExpr::delta_derivative(a, k)),
        (-1.0..1.0f64).prop_map(DistributionExpr::heaviside),
        (-1.0..1.0f64, 0.5..2.0f64)
            .prop_map(|(a, w)| DistributionExpr::catalog(CatalogSmooth::sech(a, w))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pairing_is_linear(u in catalog_expr(), v in catalog_expr(), a in -2.0..2.0f64) {
        let h = TestFunction::Closed(GaussPoly::gaussian(0.2, 1.3));
        let lhs = DistributionExpr::sum(vec![u.clone().scaled(c(a, 0.0)), v.clone()]).pair(&h).unwrap();
        let rhs = u.pair(&h).unwrap() * a + v.pair(&h).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn regularized_constant_is_the_cutoff(eps in 0.01..0.5f64, x in -10.0..10.0f64) {
        for pair in [MollifierPair::gaussian(), MollifierPair::flat()] {
            let r = regularize(&DistributionExpr::constant(1.0), &pair, &EpsilonScale::Identity, eps).unwrap();
            let expect = pair.cutoff.value(eps * x);
            prop_assert!((r.value(x).unwrap().re - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn parseval(seed in proptest::collection::vec(-1.0..1.0f64, 8)) {
        let grid = Grid::new(10.0, 256).unwrap();
        let f = Field::from_fn(grid, |x| {
            seed.iter().enumerate().map(|(k, a)| c(*a, 0.5 * a) * (-(x - k as f64 + 4.0).powi(2)).exp()).sum()
        });
        let s = fourier(&f);
        prop_assert!((s.l2_norm() - f.l2_norm()).abs() <= 1e-12 * f.l2_norm().max(1e-300));
    }

    #[test]
    fn quantization_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let grid = Grid::new(15.0, 128).unwrap();
        let u = Field::from_real_fn(grid, |x| (-x * x).exp());
        let v = Field::from_real_fn(grid, |x| x * (-(x - 1.0) * (x - 1.0)).exp());
        let p = SymbolSpec::term(SmoothFunction::Catalog(CatalogSmooth::sech(0.0, 1.0)), XiFactor::bracket(1.0), 1.0)
            .plus(SymbolSpec::xi_power(2));
        let w = u.scale(c(a, 0.0)).add(&v.scale(c(b, 0.0))).unwrap();
        let lhs = quantize(&p, &w).unwrap();
        let rhs = quantize(&p, &u).unwrap().scale(c(a, 0.0)).add(&quantize(&p, &v).unwrap().scale(c(b, 0.0))).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-10 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn solve_scales_with_the_data(alpha in 0.1..5.0f64) {
        let grid = Grid::new(20.0, 256).unwrap();
        let coeffs = CoefficientSet::time_independent(
            SmoothFunction::Catalog(CatalogSmooth::gaussian(0.0, 1.0)).scaled(c(0.0, 1.0)),
            SmoothFunction::Catalog(CatalogSmooth::sech(0.0, 1.0)),
        ).sample(grid).unwrap();
        let g = Field::from_real_fn(grid, |x| (-x * x).exp());
        let record = RecordSpec { t_nodes: vec![], norms: vec![(1.0, 1.0)] };
        let run = |g: Field| solve(&CauchyProblem::new(coeffs.clone(), g, 0.2).with_record(record.clone())).unwrap();
        let a = run(g.clone());
        let b = run(g.scale(c(alpha, 0.0)));
        let (na, nb) = (a.norm(0.2, 1.0, 1.0).unwrap(), b.norm(0.2, 1.0, 1.0).unwrap());
        prop_assert!((nb - alpha * na).abs() < 1e-11 * nb);
    }

    #[test]
    fn constructed_decay_is_negligible(q in 1.0..4.0f64, amp in 0.1..10.0f64) {
        let eps: Vec<f64> = (2..8).map(|k| 2f64.powi(-k)).collect();
        let values: Vec<Option<f64>> = eps.iter().map(|e| Some(amp * e.powf(q))).collect();
        let f = fit_powerlaw(&eps, &values, &VerdictThresholds::default()).unwrap();
        prop_assert!((f.verdict.negligible_order().unwrap() - q).abs() < 1e-9);
    }
}
