//! Property-based checks: order estimation on synthetic curves, arc algebra,
//! observable code round trips, sampler determinism, KL positivity, and a
//! config-corruption fuzz set.

use proptest::prelude::*;

use obschart::arc::{order_of_vanishing, Arc, GridSpec, Order};
use obschart::report::parse_config;
use obschart::zoo::GmmModel;
use obschart::{kl_divergence, Budget, Model, Observable, ParamVector};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monomial_curves_recover_their_exponent(
        k in 1u32..6,
        a in prop_oneof![0.01f64..100.0, -100.0f64..-0.01],
    ) {
        let est = order_of_vanishing(|t| Ok(vec![a * t.powi(k as i32)]), &GridSpec::default())?;
        prop_assert_eq!(est.order, Order::Finite(k as i64));
        prop_assert!((est.leading_coeff_mag - a.abs()).abs() / a.abs() < 1e-6);
    }

    #[test]
    fn square_reparameterization_doubles_monomial_orders(k in 1u32..4) {
        let theta0 = ParamVector::new(vec![0.0]).unwrap();
        let mut coeffs = vec![vec![0.0]; k as usize];
        coeffs[k as usize - 1] = vec![1.0];
        let arc = Arc::new(theta0, coeffs).unwrap();
        let grid = GridSpec::default();
        let order = |a: &Arc| {
            let a = a.clone();
            order_of_vanishing(move |t| Ok(a.eval(t).values().to_vec()), &grid).unwrap().order
        };
        prop_assert_eq!(order(&arc), Order::Finite(k as i64));
        prop_assert_eq!(order(&arc.reparameterized_square()), Order::Finite(2 * k as i64));
    }

    #[test]
    fn arc_eval_matches_direct_polynomial(
        base in -2.0f64..2.0,
        c1 in -2.0f64..2.0,
        c2 in -2.0f64..2.0,
        t in -1.0f64..1.0,
    ) {
        let arc = Arc::new(
            ParamVector::new(vec![base]).unwrap(),
            vec![vec![c1], vec![c2]],
        ).unwrap();
        let direct = base + c1 * t + c2 * t * t;
        prop_assert!((arc.eval(t).values()[0] - direct).abs() < 1e-12);
    }

    #[test]
    fn observable_codes_round_trip(degrees in prop::collection::vec(0u32..6, 1..4)) {
        let obs = Observable::monomial(degrees);
        let code = obs.serialize().unwrap();
        let back = Observable::parse(&code, 1).unwrap();
        prop_assert_eq!(back.id(), obs.id());
    }

    #[test]
    fn gmm_sampler_is_seed_deterministic(seed in 0u64..1000, n in 1usize..200) {
        let model = GmmModel::new(1.0).unwrap();
        let theta = ParamVector::new(vec![0.1, 0.5, 0.2]).unwrap();
        let a = model.sample_points(&theta, n, seed).unwrap();
        let b = model.sample_points(&theta, n, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gmm_kl_is_nonnegative_and_zero_iff_same_law(
        mu in -0.5f64..0.5,
        delta in 0.05f64..0.8,
        alpha in -0.3f64..0.3,
    ) {
        let model = GmmModel::new(1.0).unwrap();
        let theta0 = ParamVector::new(vec![0.0, 0.3, 0.1]).unwrap();
        let theta = ParamVector::new(vec![mu, delta, alpha]).unwrap();
        let kl = kl_divergence(&model, &theta0, &theta, &Budget::default()).unwrap();
        prop_assert!(kl.value >= 0.0);
        let same = kl_divergence(&model, &theta0, &theta0, &Budget::default()).unwrap();
        prop_assert!(same.value.abs() < 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Config corruption fuzz: 100 single-key mutations of a valid job document.
// Every mutant must either parse as a valid job or be rejected with an error;
// renaming a key must never be silently absorbed.
// ---------------------------------------------------------------------------

const BASE_JOB: &str = r#"schema_version = 1
seed = 3
theta0 = [0.0, 0.0, 0.0]

[model]
kind = "gmm"

[model.params]
sigma = 1.0

[chart]
observables = ["m1", "k2", "k3"]

[grid]
t0 = 0.1
count = 10

[[arcs]]
id = "e_mu"
coefficients = [[1.0, 0.0, 0.0]]
"#;

#[test]
fn base_job_is_valid() {
    parse_config(BASE_JOB).unwrap();
}

#[test]
fn hundred_single_key_corruptions_never_pass_silently() {
    // every line of the form `key = ...` gets its key renamed; the rest of the
    // budget goes to value-level mutations that may stay valid but must not
    // panic or silently produce a different schema
    let lines: Vec<&str> = BASE_JOB.lines().collect();
    let key_lines: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.contains('=') && !l.trim_start().starts_with('['))
        .map(|(i, _)| i)
        .collect();

    let mut cases = 0;
    // key renames: strict mode must reject (unknown key) or fail validation
    // (missing required key); silence would mean default substitution
    for (n, &i) in key_lines.iter().cycle().take(60).enumerate() {
        let mut mutated: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        mutated[i] = format!("zz{n}_{}", lines[i].trim_start());
        let doc = mutated.join("\n");
        let result = parse_config(&doc);
        assert!(
            result.is_err(),
            "corruption {n} (renamed key on line {i}) was silently accepted:\n{}",
            lines[i]
        );
        cases += 1;
    }
    // value mutations: outcome may be Ok or Err, but must be a clean verdict
    let value_mutants: Vec<String> = (0..40)
        .map(|n| match n % 5 {
            0 => BASE_JOB.replace("seed = 3", &format!("seed = {n}")),
            1 => BASE_JOB.replace("t0 = 0.1", "t0 = -0.1"),
            2 => BASE_JOB.replace("\"m1\"", "\"nonsense:7\""),
            3 => BASE_JOB.replace("schema_version = 1", "schema_version = 99"),
            _ => BASE_JOB.replace("kind = \"gmm\"", "kind = \"gmm\"\nextra = true"),
        })
        .collect();
    for (n, doc) in value_mutants.iter().enumerate() {
        // parse_config must return, not panic; both Ok and Err are acceptable
        // except the ones that are structurally wrong
        let result = parse_config(doc);
        match n % 5 {
            1 => assert!(result.is_err(), "negative grid.t0 accepted"),
            3 => assert!(result.is_err(), "wrong schema_version accepted"),
            4 => assert!(result.is_err(), "unknown model key accepted"),
            _ => {
                let _ = result;
            }
        }
        cases += 1;
    }
    assert_eq!(cases, 100);
}

// Observable code mutations follow the same contract at the chart level.
#[test]
fn unknown_observable_codes_are_rejected_at_use() {
    for bad in ["nonsense:7", "cumulant:0", "moment:", "cross:0,1", "k0"] {
        assert!(Observable::parse(bad, 1).is_err(), "`{bad}` accepted");
    }
}
