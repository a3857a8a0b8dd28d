use openrates::maps::parse_map;
use openrates::real::{parse_real, Real};
use openrates::sft::parse_sft;
use proptest::prelude::*;

fn literal() -> impl Strategy<Value = String> {
    prop_oneof![
        (-1000i64..1000, 1i64..1000).prop_map(|(a, b)| format!("{a}/{b}")),
        (-20i64..20, -80i32..80).prop_map(|(b, e)| format!("{b}^{e}")),
        (-1e6f64..1e6).prop_map(|x| format!("{x}")),
        (-1e3f64..1e3, -30i32..30).prop_map(|(m, e)| format!("{m}e{e}")),
        "[-+0-9./^eE ]{0,24}",
    ]
}

fn json_real() -> impl Strategy<Value = String> {
    prop_oneof![literal().prop_map(|s| format!("{s:?}")), (-4i64..8).prop_map(|i| i.to_string())]
}

fn map_text() -> impl Strategy<Value = String> {
    let branch = (json_real(), json_real(), json_real(), json_real())
        .prop_map(|(lo, hi, a, b)| format!(r#"{{"lo": {lo}, "hi": {hi}, "a": {a}, "b": {b}}}"#));
    prop_oneof![
        prop::sample::select(vec!["doubling", "tent", "times", "skew-markov", "bogus"])
            .prop_flat_map(|p| (Just(p), prop::option::of(0u64..2000)))
            .prop_map(|(p, k)| match k {
                Some(k) => format!(r#"{{"preset": "{p}", "k": {k}}}"#),
                None => format!(r#"{{"preset": "{p}"}}"#),
            }),
        prop::collection::vec(branch, 0..5).prop_map(|bs| format!(r#"{{"branches": [{}]}}"#, bs.join(","))),
    ]
}

fn sft_text() -> impl Strategy<Value = String> {
    let word = prop_oneof!["[0-9]{0,6}".prop_map(|w| format!("{w:?}")), prop::collection::vec(0u32..12, 0..6).prop_map(|w| format!("{w:?}"))];
    let matrix = (1usize..5).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0u8..3, n), n));
    prop_oneof![
        (0usize..40, prop::collection::vec(word, 0..6))
            .prop_map(|(a, ws)| format!(r#"{{"alphabet": {a}, "forbidden_blocks": [{}]}}"#, ws.join(","))),
        (0usize..6, matrix).prop_map(|(a, m)| format!(r#"{{"alphabet": {a}, "matrix": {m:?}}}"#)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn real_literals_round_trip(s in literal()) {
        if let Ok(x) = parse_real(&s) {
            prop_assert_eq!(parse_real(&Real(x.clone()).to_string()).unwrap(), x);
        }
    }

    #[test]
    fn arbitrary_text_never_panics(s in "\\PC{0,64}") {
        let _ = parse_real(&s);
        let _ = parse_map(&s);
        let _ = parse_sft(&s);
    }

    #[test]
    fn accepted_maps_are_self_maps(text in map_text(), x in 0.0f64..1.0) {
        if let Ok(map) = parse_map(&text) {
            let y = map.eval(x);
            prop_assert!((0.0..=1.0).contains(&y), "{text}: T({x}) = {y}");
        }
    }

    #[test]
    fn sft_specs_never_panic(text in sft_text()) {
        if let Ok(sft) = parse_sft(&text) {
            prop_assert!(sft.alphabet() >= 1);
        }
    }
}
