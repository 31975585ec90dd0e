use evdom_core::*;
use proptest::prelude::*;

fn grid(n: usize) -> GridSpec {
    GridSpec::new(0.0, 1.0, n, NodeScheme::EndpointsIncluded).unwrap()
}

fn gallery(index: usize) -> OperatorHandle {
    match index % 7 {
        0 => build_laplacian(BoundaryCondition::Neumann, None, 24).unwrap(),
        1 => build_laplacian(BoundaryCondition::Dirichlet, None, 24).unwrap(),
        2 => build_laplacian(BoundaryCondition::NonlocalSymmetric, None, 24).unwrap(),
        3 => build_laplacian(BoundaryCondition::NonlocalBeta(-0.3), None, 24).unwrap(),
        4 => build_laplacian(BoundaryCondition::Antisymmetric, None, 24).unwrap(),
        5 => build_odd_order(1, 16).unwrap(),
        _ => build_rank_one_example(24).unwrap().b,
    }
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

fn positive(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1..5.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauge_lower_is_positively_homogeneous(f in values(12), u in positive(12), alpha in 0.01..100.0f64) {
        let g = grid(12);
        let f = LatticeVector::new(g.clone(), f).unwrap();
        let u = LatticeVector::new(g, u).unwrap();
        let base = gauge(&f, &u).unwrap().lower;
        let scaled = gauge(&f.scaled(alpha), &u).unwrap().lower;
        prop_assert!((scaled - alpha * base).abs() <= 1e-12 * (alpha * base).abs().max(1.0));
    }

    #[test]
    fn gauge_lower_is_superadditive(f in values(12), h in values(12), u in positive(12)) {
        let g = grid(12);
        let f = LatticeVector::new(g.clone(), f).unwrap();
        let h = LatticeVector::new(g.clone(), h).unwrap();
        let u = LatticeVector::new(g, u).unwrap();
        let sum = gauge(&f.add(&h).unwrap(), &u).unwrap().lower;
        let parts = gauge(&f, &u).unwrap().lower + gauge(&h, &u).unwrap().lower;
        prop_assert!(sum >= parts - 1e-12 * parts.abs().max(1.0));
    }

    #[test]
    fn gauge_norm_is_a_norm(f in values(12), h in values(12), u in positive(12), alpha in -50.0..50.0f64) {
        let g = grid(12);
        let f = LatticeVector::new(g.clone(), f).unwrap();
        let h = LatticeVector::new(g.clone(), h).unwrap();
        let u = LatticeVector::new(g, u).unwrap();
        let nf = gauge(&f, &u).unwrap().upper;
        let nh = gauge(&h, &u).unwrap().upper;
        let nsum = gauge(&f.add(&h).unwrap(), &u).unwrap().upper;
        prop_assert!(nsum <= (nf + nh) * (1.0 + 1e-14));
        let nscaled = gauge(&f.scaled(alpha), &u).unwrap().upper;
        prop_assert!((nscaled - alpha.abs() * nf).abs() <= 1e-14 * (alpha.abs() * nf).max(f64::MIN_POSITIVE));
    }

    #[test]
    fn gauge_lower_below_upper(f in values(12), u in positive(12)) {
        let g = grid(12);
        let r = gauge(&LatticeVector::new(g.clone(), f.clone()).unwrap(), &LatticeVector::new(g, u.clone()).unwrap()).unwrap();
        prop_assert!(r.lower <= r.upper);
        let strict = f.iter().zip(&u).all(|(fi, ui)| fi / ui > 0.0);
        prop_assert_eq!(r.lower > 0.0, strict);
    }

    #[test]
    fn strong_positivity_implies_domination_of_zero(f in values(12), u in positive(12)) {
        let g = grid(12);
        let f = LatticeVector::new(g.clone(), f).unwrap();
        let u = LatticeVector::new(g.clone(), u).unwrap();
        if strongly_positive(&f, &u, 0.0).unwrap() {
            prop_assert!(dominates_vec(&f, &LatticeVector::zeros(&g), 0.0).unwrap());
        }
    }

    #[test]
    fn grid_weights_sum_to_length(a in -5.0..5.0f64, len in 0.1..10.0f64, n in 4usize..200, scheme in 0usize..4) {
        let scheme = [
            NodeScheme::EndpointsIncluded,
            NodeScheme::InteriorOnly,
            NodeScheme::PeriodicLeftClosed,
            NodeScheme::CellCentered,
        ][scheme];
        let g = GridSpec::new(a, a + len, n, scheme).unwrap();
        prop_assert!(g.weights().iter().all(|&w| w > 0.0));
        let sum: f64 = g.weights().iter().sum();
        prop_assert!((sum - len).abs() <= 1e-12 * len);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn semigroup_law(index in 0usize..7, s in 0.001..5.0f64, t in 0.001..5.0f64) {
        let op = gallery(index);
        let joint = expm(&op, s + t).unwrap().matrix;
        let prod = expm(&op, s).unwrap().matrix * expm(&op, t).unwrap().matrix;
        let err = (&prod - &joint).amax();
        prop_assert!(err < 1e-9 * joint.amax(), "{}: {err:e} vs {:e}", op.name(), joint.amax());
    }

    #[test]
    fn resolvent_identity(index in 0usize..7, dl in 0.05..20.0f64, dm in 0.05..20.0f64) {
        let op = gallery(index);
        let s = analyze(&op).unwrap().spectral_bound;
        let (l, m) = (s + dl, s + dm);
        let rl = resolvent(&op, l).unwrap().matrix;
        let rm = resolvent(&op, m).unwrap().matrix;
        let rhs = (&rl * &rm) * (m - l);
        let err = ((&rl - &rm) - &rhs).amax();
        prop_assert!(err <= 1e-9 * rl.amax().max(rm.amax()) * (m - l).abs().max(1e-3), "{}: {err:e}", op.name());
    }

    #[test]
    fn neumann_semigroup_is_positive(t in 0.0..20.0f64) {
        let op = build_laplacian(BoundaryCondition::Neumann, None, 32).unwrap();
        prop_assert!(expm(&op, t).unwrap().matrix.min() >= -1e-12);
    }

    #[test]
    fn uniform_domination_implies_individual(index in 0usize..3, f in values(24), t in 0.05..10.0f64) {
        let (a, b) = match index {
            0 => (
                build_laplacian(BoundaryCondition::NonlocalBeta(-0.4), None, 24).unwrap(),
                build_laplacian(BoundaryCondition::NonlocalBeta(-0.1), None, 24).unwrap(),
            ),
            1 => (
                build_laplacian(BoundaryCondition::NonlocalSymmetric, None, 24).unwrap(),
                build_laplacian(BoundaryCondition::Neumann, None, 24).unwrap(),
            ),
            _ => {
                let bundle = build_rank_one_example(24).unwrap();
                (bundle.a, bundle.b)
            }
        };
        let times = TimeGrid::explicit(vec![t, t * 1.5]).unwrap();
        let uni = check_uniform_semigroup_domination(&a, &b, &times, DEFAULT_EPS).unwrap();
        let f = LatticeVector::new(a.grid().clone(), f).unwrap();
        let u = LatticeVector::ones(a.grid());
        let ind = check_individual_semigroup_domination(&a, &b, &f, &u, &times, 0.0).unwrap();
        for (us, is) in uni.samples.iter().zip(&ind.samples) {
            if us.pass {
                prop_assert!(is.raw_margin >= -1e-9 * f.max_abs().max(1.0), "t={}: {}", us.param, is.raw_margin);
            }
        }
    }

    #[test]
    fn individual_margin_is_gauge_of_difference(f in values(24), t in 0.01..5.0f64) {
        let bundle = build_rank_one_example(24).unwrap();
        let g = bundle.space_grid.clone();
        let f = LatticeVector::new(g.clone(), f).unwrap();
        let u = LatticeVector::ones(&g);
        let times = TimeGrid::explicit(vec![t, t + 1.0]).unwrap();
        let r = check_individual_semigroup_domination(&bundle.a, &bundle.b, &f, &u, &times, DEFAULT_EPS).unwrap();
        let ea = expm(&bundle.a, t).unwrap().matrix;
        let eb = expm(&bundle.b, t).unwrap().matrix;
        let diff = eb * f.abs().to_dvector() - (ea * f.to_dvector()).abs();
        let expected = gauge(&LatticeVector::from_dvector(&g, &diff).unwrap(), &u).unwrap().lower;
        prop_assert!((r.samples[0].raw_margin - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(14))]

    #[test]
    fn projections_are_idempotent_and_commute(index in 0usize..7) {
        let op = gallery(index);
        let data = analyze(&op).unwrap();
        let proj = spectral_projection(&op, data.spectral_bound, None).unwrap();
        let (idem, comm, nil) = projection_residuals(&op, &proj);
        let pn = proj.p.amax().max(1.0);
        prop_assert!(idem < 1e-8 * pn, "{}: idempotence {idem:e}", op.name());
        prop_assert!(comm < 1e-8 * op.max_norm().max(1.0) * pn, "{}: commutation {comm:e}", op.name());
        prop_assert!(nil < 1e-6, "{}: nilpotency {nil:e}", op.name());
    }

    #[test]
    fn eigenvalues_come_in_conjugate_pairs(index in 0usize..7) {
        let op = gallery(index);
        let data = analyze(&op).unwrap();
        let scale = op.max_norm().max(1.0);
        for z in &data.eigenvalues {
            let partner = data.eigenvalues.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(partner <= 1e-8 * scale);
        }
        let max_re = data.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(max_re, data.spectral_bound);
    }

    #[test]
    fn lambda_resolvent_converges_to_projection(index in 0usize..7) {
        let op = gallery(index);
        let data = analyze(&op).unwrap();
        prop_assume!(data.dominant);
        let s = data.spectral_bound;
        let p = spectral_projection(&op, s, None).unwrap().p;
        let shifted = op.shifted(-s);
        let errors: Vec<f64> = (1..=20)
            .map(|j| {
                let l = 2f64.powi(-j);
                let r = resolvent_with_cap(&shifted, l, CHECKER_RESOLVENT_CAP).unwrap().matrix;
                (r * l - &p).amax()
            })
            .collect();
        prop_assert!(errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6) + 1e-9), "{}: {errors:?}", op.name());
        prop_assert!(errors[19] < 1e-5, "{}: {:e}", op.name(), errors[19]);
    }

    #[test]
    fn resolvent_set_point_gives_vanishing_limit(index in 0usize..7, offset in 0.3..2.0f64) {
        let op = gallery(index);
        let s = analyze(&op).unwrap().spectral_bound;
        let lambda0 = s + offset;
        let r = resolvent(&op, lambda0 + 2f64.powi(-20)).unwrap().matrix;
        prop_assert!((r * 2f64.powi(-20)).amax() < 1e-5);
    }

    #[test]
    fn odd_order_annihilates_constants(k in 0u32..4, half in 8usize..32) {
        let op = build_odd_order(k, 2 * half).unwrap();
        let ones = DVector::from_element(op.n(), 1.0);
        prop_assert!((op.matrix() * ones).amax() <= 1e-12 * op.max_norm().max(1.0));
    }

    #[test]
    fn symmetric_flag_matches_weighted_transpose(index in 0usize..7) {
        let op = gallery(index);
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(op.grid().weights()));
        let m = op.matrix();
        let asym = (&w * m - m.transpose() * &w).amax();
        prop_assert_eq!(op.is_symmetric(), asym < 1e-10 * m.amax());
    }

    #[test]
    fn window_samples_lie_on_the_requested_side(right in any::<bool>()) {
        let a = build_laplacian(BoundaryCondition::NonlocalBeta(-0.4), None, 24).unwrap();
        let b = build_laplacian(BoundaryCondition::NonlocalBeta(-0.1), None, 24).unwrap();
        let s = analyze(&b).unwrap().spectral_bound;
        let one = LatticeVector::ones(b.grid());
        let side = if right { Side::Right } else { Side::Left };
        let w = check_resolvent_domination_window(&a, &b, &one, &one, s, side, DEFAULT_EPS, &WindowOptions::default()).unwrap();
        let on_side = w.samples.iter().all(|x| if right { x.lambda > s } else { x.lambda < s });
        prop_assert!(on_side);
    }
}

#[test]
fn semigroup_at_zero_is_identity() {
    for i in 0..7 {
        let op = gallery(i);
        let e = expm(&op, 0.0).unwrap().matrix;
        assert!((e - DMatrix::identity(op.n(), op.n())).amax() <= 1e-14);
    }
}

#[test]
fn laplace_transform_matches_resolvent() {
    let neu = build_laplacian(BoundaryCondition::Neumann, None, 50).unwrap();
    assert!(laplace_transform_check(&neu, 1.0, None, DEFAULT_QUAD_POINTS).unwrap() < 1e-6);
    let b = build_rank_one_example(50).unwrap().b;
    assert!(laplace_transform_check(&b, 0.5, None, DEFAULT_QUAD_POINTS).unwrap() < 1e-6);
}

#[test]
fn lambda_resolvent_of_neumann_becomes_strongly_positive() {
    let op = build_laplacian(BoundaryCondition::Neumann, None, 40).unwrap();
    let one = LatticeVector::ones(op.grid());
    let f = LatticeVector::from_fn(op.grid(), |x| (-((x - 0.2) / 0.1).powi(2)).exp());
    let c = projection_margin(&op, &f, &one).unwrap();
    assert!(c > 0.0);
    let eps = 0.5 * c;
    let margins: Vec<f64> = (1..=20)
        .map(|j| {
            let l = 2f64.powi(-j);
            let r = resolvent_with_cap(&op, l, CHECKER_RESOLVENT_CAP).unwrap().matrix * l;
            let v = LatticeVector::from_dvector(op.grid(), &(r * f.to_dvector())).unwrap();
            gauge(&v, &one).unwrap().lower
        })
        .collect();
    let first = margins.iter().position(|&m| m >= eps).expect("never reaches eps");
    assert!(margins[first..].iter().all(|&m| m >= eps));
}
