use std::sync::OnceLock;

use nalgebra::DMatrix;
use proptest::prelude::*;

use kreinreg::config::{RawConfig, Scenario, ScenarioConfig};
use kreinreg::krein::{embed, gram, metric_apply, negativity_rank, GramMatrix, GramMode, KreinVector};
use kreinreg::neutral::{build_chi_system, NeutralSystem};
use kreinreg::profile::{indefinite_inner, SingularityProfile};
use kreinreg::regularize::{majorant, project_plus};
use kreinreg::sufficiency::{finite_metric_solve, metric_identity_defect, power_law_exponent, AbstractSpace};
use kreinreg::testfamily::{random_p_function, random_test_function, rng};
use kreinreg::{FunctionRep, QuadratureSpec};

fn system() -> &'static NeutralSystem {
    static SYS: OnceLock<NeutralSystem> = OnceLock::new();
    SYS.get_or_init(|| build_chi_system(&SingularityProfile::paper(3), &QuadratureSpec::default()).unwrap())
}

fn coords(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-10.0..10.0f64, n + 1), prop::collection::vec(-10.0..10.0f64, n + 1))
}

fn square(dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, dim * dim).prop_map(move |v| DMatrix::from_vec(dim, dim, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_is_an_isometric_involution((a, b) in coords(5), (c, d) in coords(5)) {
        let q = QuadratureSpec::default();
        let (x, y) = (KreinVector::coordinates(a, b), KreinVector::coordinates(c, d));
        let jj = metric_apply(&metric_apply(&x));
        prop_assert_eq!(&jj.a, &x.a);
        prop_assert_eq!(&jj.b, &x.b);
        let lhs = gram(&x, &metric_apply(&y), GramMode::Hilbert, &q).unwrap();
        let rhs = gram(&x, &y, GramMode::Indefinite, &q).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        prop_assert!(gram(&x, &x, GramMode::Hilbert, &q).unwrap() >= 0.0);
    }

    #[test]
    fn metric_solve_reproduces_the_form((a, b) in (2usize..9).prop_flat_map(|d| (square(d), square(d)))) {
        let dim = a.nrows();
        let h = GramMatrix::new(&a * a.transpose() + DMatrix::identity(dim, dim) * 0.25).unwrap();
        let g = GramMatrix::new(b).unwrap();
        let j = finite_metric_solve(&g, &h).unwrap();
        prop_assert!(metric_identity_defect(&g, &h, &j) <= 1e-10);
    }

    #[test]
    fn negativity_rank_counts_negative_diagonal(signs in prop::collection::vec(any::<bool>(), 1..12), scale in 0.1..100.0f64) {
        let dim = signs.len();
        let d = DMatrix::from_fn(dim, dim, |i, j| if i != j { 0.0 } else if signs[i] { -scale } else { scale * (1 + i) as f64 });
        let g = GramMatrix::new(d).unwrap();
        prop_assert_eq!(negativity_rank(&g).unwrap(), signs.iter().filter(|s| **s).count());
    }

    #[test]
    fn power_law_fit_recovers_exponents(s in -6.0..2.0f64, c in 0.01..100.0f64, len in 3usize..60) {
        let xs: Vec<f64> = (0..len).map(|i| c * ((i + 1) as f64).powf(s)).collect();
        prop_assert!((power_law_exponent(&xs) - s).abs() <= 1e-9);
    }

    #[test]
    fn scenario_lists_resolve_sorted(picks in prop::collection::vec(0usize..6, 1..10)) {
        let raw = RawConfig { scenarios: Some(picks.iter().map(|&i| Scenario::ALL[i]).collect()), ..Default::default() };
        let cfg = ScenarioConfig::resolve(&raw).unwrap();
        prop_assert!(cfg.scenarios.windows(2).all(|w| w[0] < w[1]));
        let back = ScenarioConfig::parse(&toml::to_string(&raw).unwrap()).unwrap();
        prop_assert_eq!(&back.scenarios, &cfg.scenarios);
        prop_assert_eq!(back.id().split('+').count(), back.scenarios.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn embedding_matches_truncated_form(seed in any::<u64>(), weights in prop::collection::vec(-1.0..1.0f64, 4)) {
        let sys = system();
        let mut g = rng(seed);
        let terms: Vec<(f64, FunctionRep)> = weights.iter().copied().zip(sys.chi.iter().cloned()).collect();
        let f = FunctionRep::sum(vec![FunctionRep::combine(&terms).unwrap(), random_p_function(&mut g)]);
        let h = random_test_function(&mut g, &sys.profile);
        let lhs = gram(&embed(&f, sys).unwrap(), &embed(&h, sys).unwrap(), GramMode::Indefinite, &sys.quadrature).unwrap();
        let rhs = indefinite_inner(&f, &h, &sys.profile, &sys.quadrature).unwrap();
        prop_assert!((lhs - rhs.value).abs() <= 1e-9 * (1.0 + rhs.value.abs()), "{lhs} vs {}", rhs.value);
    }

    #[test]
    fn projection_kills_the_jet_and_is_idempotent(seed in any::<u64>()) {
        let sys = system();
        let f = random_test_function(&mut rng(seed), &sys.profile);
        let pf = project_plus(&f, sys).unwrap();
        prop_assert!(pf.jet_at_zero_ext(sys.n()).unwrap().iter().all(|v| v.is_zero()));
        let ppf = project_plus(&pf, sys).unwrap();
        for k in 0..=40 {
            let x = -9.0 + 18.0 * k as f64 / 40.0;
            prop_assert_eq!(ppf.eval(x), pf.eval(x));
        }
        let m = majorant(&f, sys).unwrap();
        let ff = indefinite_inner(&f, &f, &sys.profile, &sys.quadrature).unwrap().value;
        prop_assert!(ff.abs() <= m.square() + 1e-8);
    }

    #[test]
    fn abstract_input_round_trips_through_toml(n in 1usize..5, g0 in 0.5..4.0f64) {
        let d = 2 * n;
        let gm = DMatrix::from_fn(d, d, |i, j| if (i + n == j) || (j + n == i) { 1.0 } else { 0.0 });
        let neutral = DMatrix::from_fn(d, n, |i, j| if i == n + j { 1.0 } else { 0.0 });
        let gamma: Vec<f64> = (0..n).map(|k| g0 * (k + 1) as f64).collect();
        let space = AbstractSpace::new(GramMatrix::new(gm).unwrap(), neutral, gamma, vec![], None).unwrap();
        let text = toml::to_string(&space.to_input()).unwrap();
        let back = AbstractSpace::from_toml_str(&text).unwrap();
        prop_assert_eq!(back.to_input(), space.to_input());
    }
}
