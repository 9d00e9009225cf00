use proptest::prelude::*;

use splitcorrect::correction::{CorrectionBuilder, CorrectionStrategy, Smoother};
use splitcorrect::discretization::{BoundaryData, BoundarySpec, DiscreteOperator, EdgeKinds};
use splitcorrect::flows::{diffusion_flow, reaction_flow, FlowTolerance};
use splitcorrect::grid::{prolong, restrict_inject, BoundaryIndexSet, Edge, GridFunction, GridLevel};
use splitcorrect::harness::observed_order;
use splitcorrect::problems::Reaction;

fn level(k: u32) -> GridLevel {
    GridLevel::new(k).unwrap()
}

fn field(k: u32, values: &[f64]) -> GridFunction<f64> {
    let l = level(k);
    GridFunction::from_index_fn(l, |i, j| values[l.index(i, j) % values.len()])
}

fn all_kinds() -> impl Strategy<Value = EdgeKinds> {
    prop_oneof![Just(EdgeKinds::dirichlet()), Just(EdgeKinds::neumann()), Just(EdgeKinds::neumann_sides_dirichlet_ends())]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grid_level_geometry(k in 1u32..12) {
        let l = level(k);
        prop_assert_eq!(l.m(), 1usize << k);
        prop_assert_eq!(l.h::<f64>() * l.m() as f64, 1.0);
        prop_assert_eq!(l.coord::<f64>(l.m()), 1.0);
    }

    #[test]
    fn boundary_sets_partition_the_boundary(k in 1u32..7) {
        let l = level(k);
        let mut owned = vec![0u8; l.node_count()];
        for edge in Edge::ALL {
            for (i, j) in BoundaryIndexSet::new(l, edge).nodes {
                owned[l.index(i, j)] += 1;
            }
        }
        for i in 0..=l.m() {
            for j in 0..=l.m() {
                prop_assert_eq!(owned[l.index(i, j)], u8::from(l.is_boundary(i, j)));
            }
        }
    }

    #[test]
    fn prolong_is_linear(
        k in 1u32..5,
        u in prop::collection::vec(-10.0f64..10.0, 17),
        v in prop::collection::vec(-10.0f64..10.0, 19),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let (u, v) = (field(k, &u), field(k, &v));
        let combo = u.zip_map(&v, |x, y| a * x + b * y);
        let lhs = prolong(&combo).unwrap();
        let rhs = prolong(&u).unwrap().zip_map(&prolong(&v).unwrap(), |x, y| a * x + b * y);
        prop_assert!(lhs.sub(&rhs).max_abs() <= 1e-12 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn inject_inverts_prolong(k in 0u32..5, u in prop::collection::vec(-10.0f64..10.0, 23)) {
        let coarse = field(k, &u);
        prop_assert_eq!(restrict_inject(&prolong(&coarse).unwrap()).unwrap(), coarse);
    }

    #[test]
    fn prolong_reproduces_bilinear(k in 1u32..5, c in prop::array::uniform4(-5.0f64..5.0)) {
        let f = |x: f64, y: f64| c[0] + c[1] * x + c[2] * y + c[3] * x * y;
        let coarse = GridFunction::from_fn(level(k), f);
        let fine = prolong(&coarse).unwrap();
        prop_assert!(fine.sub(&GridFunction::from_fn(level(k + 1), f)).max_abs() <= 1e-13);
    }

    #[test]
    fn dirichlet_operator_is_symmetric(
        k in 2u32..6,
        v in prop::collection::vec(-1.0f64..1.0, 31),
        w in prop::collection::vec(-1.0f64..1.0, 29),
    ) {
        let op = DiscreteOperator::<f64>::assemble(level(k), EdgeKinds::dirichlet()).unwrap();
        let n = op.unknown_count();
        let v: Vec<f64> = (0..n).map(|i| v[i % v.len()]).collect();
        let w: Vec<f64> = (0..n).map(|i| w[i % w.len()]).collect();
        let (avw, vaw) = (dot(&op.matvec(&v), &w), dot(&v, &op.matvec(&w)));
        prop_assert!((avw - vaw).abs() <= 1e-10 * (1.0 + avw.abs()));
    }

    #[test]
    fn neumann_constants_in_nullspace(k in 1u32..6, c in -100.0f64..100.0) {
        let op = DiscreteOperator::<f64>::assemble(level(k), EdgeKinds::neumann()).unwrap();
        let ones = vec![c; op.unknown_count()];
        prop_assert!(op.matvec(&ones).iter().all(|&r| r == 0.0));
    }

    #[test]
    fn solve_poisson_inverts_apply(
        k in 2u32..6,
        kinds in all_kinds(),
        v in prop::collection::vec(-1.0f64..1.0, 37),
        b in -2.0f64..2.0,
    ) {
        let l = level(k);
        let op = DiscreteOperator::<f64>::assemble(l, kinds).unwrap();
        let data = BoundaryData::from_fn(l, |_, x, y| b + x - y * y);
        let rhs = op.apply(&field(k, &v), &data);
        let q = op.solve_poisson(&rhs, &data).unwrap();
        let back = op.apply(&q, &data);
        let scale = rhs.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let err = back.iter().zip(&rhs).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(err <= 1e-10 * scale, "{} vs {}", err, scale);
    }

    #[test]
    fn symmetric_data_gives_symmetric_correction(k in 3u32..6, c in prop::array::uniform3(-1.0f64..1.0)) {
        let l = level(k);
        let spec = BoundarySpec::new(EdgeKinds::dirichlet(), move |_, _, x: f64, y: f64| c[0] + c[1] * (x + y) + c[2] * x * y);
        let u = GridFunction::from_fn(l, |x, y| 1.0 + x * y);
        for strategy in [
            CorrectionStrategy::ExactElliptic,
            CorrectionStrategy::GridAverage,
            CorrectionStrategy::half_vcycle(Smoother::jacobi(), 3),
        ] {
            let q = CorrectionBuilder::new(strategy, l, EdgeKinds::dirichlet())
                .unwrap()
                .build(&spec, &Reaction::quadratic(), &u, 0.0)
                .unwrap();
            prop_assert!(q.sub(&q.transpose()).max_abs() <= 1e-12 * (1.0 + q.max_abs()), "{}", strategy.label());
        }
    }

    #[test]
    fn constant_data_gives_constant_correction(k in 2u32..6, c in -3.0f64..3.0) {
        let l = level(k);
        let spec = BoundarySpec::new(EdgeKinds::dirichlet(), move |_, _, _, _| c);
        let u = GridFunction::constant(l, c);
        for strategy in [CorrectionStrategy::ExactElliptic, CorrectionStrategy::DirectF, CorrectionStrategy::GridAverage] {
            let q = CorrectionBuilder::new(strategy, l, EdgeKinds::dirichlet())
                .unwrap()
                .build(&spec, &Reaction::quadratic(), &u, 0.0)
                .unwrap();
            prop_assert!(q.values().iter().all(|&v| (v - c * c).abs() <= 1e-12 * (1.0 + c * c)), "{}", strategy.label());
        }
    }

    #[test]
    fn reaction_flow_is_node_local(
        w in prop::collection::vec(-1.0f64..1.0, 41),
        q in prop::collection::vec(-1.0f64..1.0, 43),
        dt in 0.0f64..0.3,
    ) {
        let (w, q) = (field(3, &w), field(3, &q));
        let tol = FlowTolerance::default();
        let direct = reaction_flow(&w, &Reaction::quadratic(), dt, Some(&q), &tol).unwrap();
        let swapped = reaction_flow(&w.transpose(), &Reaction::quadratic(), dt, Some(&q.transpose()), &tol).unwrap();
        prop_assert_eq!(swapped, direct.transpose());
    }

    #[test]
    fn reaction_flow_closed_form(w0 in -3.0f64..0.9, dt in 0.0f64..1.0) {
        prop_assume!(1.0 - dt * w0 > 0.1);
        let w = reaction_flow(&GridFunction::constant(level(1), w0), &Reaction::quadratic(), dt, None, &FlowTolerance::default()).unwrap();
        let exact = w0 / (1.0 - dt * w0);
        prop_assert!((w.get(1, 1) - exact).abs() <= 1e-8 * (1.0 + exact.abs()));
    }

    #[test]
    fn observed_order_of_power_law(e in 1e-8f64..1.0, p in 0.5f64..3.0) {
        let o = observed_order(e, e / 2f64.powf(p)).unwrap();
        prop_assert!((o - p).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn diffusion_flow_composes(kinds in all_kinds(), dt in 1e-3f64..0.05, a in -1.0f64..1.0) {
        let l = level(4);
        let op = DiscreteOperator::<f64>::assemble(l, kinds).unwrap();
        let spec = BoundarySpec::new(kinds, move |_, t, x, y| a + t * (x - y));
        let v0 = GridFunction::from_fn(l, |x: f64, y: f64| (3.0 * x).sin() + y * y);
        let tol = FlowTolerance::default();
        let whole = diffusion_flow(&op, &spec, &v0, 0.1, dt, None, &tol).unwrap();
        let half = diffusion_flow(&op, &spec, &v0, 0.1, dt / 2.0, None, &tol).unwrap();
        let twice = diffusion_flow(&op, &spec, &half, 0.1 + dt / 2.0, dt / 2.0, None, &tol).unwrap();
        let scale = v0.max_abs().max(whole.max_abs());
        prop_assert!(whole.sub(&twice).max_abs() <= 10.0 * tol.rel_tol * scale);
    }
}
