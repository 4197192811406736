use fluxcompose::{unify, State, Substitution, Term};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Term> {
    prop_oneof![
        prop::sample::select(vec!["a", "b", "c"]).prop_map(Term::constant),
        prop::sample::select(vec!["X", "Y", "Z", "W"]).prop_map(Term::var),
    ]
}

fn term() -> impl Strategy<Value = Term> {
    leaf().prop_recursive(3, 16, 3, |inner| {
        (prop::sample::select(vec!["f", "g"]), prop::collection::vec(inner, 1..=3))
            .prop_map(|(f, args)| Term::compound(f, args))
    })
}

fn ground() -> impl Strategy<Value = Term> {
    let c = prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(Term::constant);
    (prop::sample::select(vec!["p", "q", "r"]), prop::collection::vec(c, 0..=2))
        .prop_map(|(f, args)| Term::compound(f, args))
}

fn fluent_pattern() -> impl Strategy<Value = Term> {
    let arg = prop_oneof![
        prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(Term::constant),
        prop::sample::select(vec!["X", "Y"]).prop_map(Term::var),
    ];
    (prop::sample::select(vec!["p", "q", "r"]), prop::collection::vec(arg, 0..=2))
        .prop_map(|(f, args)| Term::compound(f, args))
}

/// Fluents including knowledge fluents.
fn fluents(max: usize) -> impl Strategy<Value = Vec<Term>> {
    prop::collection::vec((ground(), any::<bool>()).prop_map(|(t, k)| if k { Term::know(t) } else { t }), 0..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn unify_is_symmetric_and_sound(a in term(), b in term()) {
        let ab = unify(&a, &b, &Substitution::new());
        let ba = unify(&b, &a, &Substitution::new());
        prop_assert_eq!(ab.is_ok(), ba.is_ok());
        if let (Ok(s1), Ok(s2)) = (ab, ba) {
            prop_assert_eq!(s1.apply(&a), s1.apply(&b));
            prop_assert_eq!(s2.apply(&a), s2.apply(&b));
        }
    }

    #[test]
    fn unifiers_are_idempotent(a in term(), b in term()) {
        if let Ok(s) = unify(&a, &b, &Substitution::new()) {
            for t in [&a, &b] {
                let once = s.apply(t);
                prop_assert_eq!(s.apply(&once), once);
            }
            // No bound variable survives in any binding.
            for (_, t) in s.iter() {
                for v in t.variables() {
                    prop_assert!(!s.contains(&v));
                }
            }
        }
    }

    #[test]
    fn unify_with_self_is_trivial(a in term()) {
        let s = unify(&a, &a, &Substitution::new()).unwrap();
        prop_assert_eq!(s.apply(&a), a);
    }

    #[test]
    fn holds_matches_brute_force(fs in fluents(50), pat in fluent_pattern()) {
        let st = State::from_fluents(fs.clone()).unwrap();
        let mut got: Vec<Substitution> = st.holds(&pat).collect();
        // Oracle: every distinct non-knowledge fluent, unified one by one.
        let mut distinct: Vec<Term> = fs.into_iter().filter(|f| !f.is_knowledge()).collect();
        distinct.sort();
        distinct.dedup();
        let mut want: Vec<Substitution> =
            distinct.iter().filter_map(|f| unify(&pat, f, &Substitution::new()).ok()).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn knows_val_matches_brute_force(fs in fluents(50), pat in fluent_pattern()) {
        let st = State::from_fluents(fs.clone()).unwrap();
        let mut got: Vec<Substitution> = st.knows_val(&pat).collect();
        let mut inner: Vec<Term> = fs.iter().filter_map(|f| f.known_inner().cloned()).collect();
        inner.sort();
        inner.dedup();
        let mut want: Vec<Substitution> =
            inner.iter().filter_map(|f| unify(&pat, f, &Substitution::new()).ok()).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn canonicalize_ignores_insertion_order(fs in fluents(30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = fs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = State::from_fluents(fs).unwrap();
        let b = State::from_fluents(shuffled).unwrap();
        prop_assert_eq!(a.canonicalize(), b.canonicalize());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn shape_key_is_invariant_under_placeholder_renaming(fs in fluents(10), ids in prop::collection::vec(0u8..4, 1..4)) {
        // Wrap a few fluents around placeholders, then rename them all.
        let build = |prefix: &str| {
            let mut out = fs.clone();
            for (i, id) in ids.iter().enumerate() {
                out.push(Term::compound("h", vec![Term::placeholder(format!("{prefix}{id}")), Term::constant(format!("k{i}"))]));
            }
            State::from_fluents(out).unwrap()
        };
        prop_assert_eq!(build("x").shape_key(), build("y").shape_key());
    }
}
