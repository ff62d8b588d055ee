use proptest::prelude::*;

use super::*;

fn one_dim(sources: &[String]) -> UncertainProblem {
    let ids: Vec<String> = (1..=sources.len()).map(|i| format!("z{i}")).collect();
    let pairs: Vec<(&str, &str)> = ids.iter().map(String::as_str).zip(sources.iter().map(String::as_str)).collect();
    UncertainProblem::from_sources("props", vec![Interval::new(-2.0, 2.0)], &pairs).unwrap()
}

fn distinct_slopes(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-2.0f64..2.0, n)
        .prop_filter("slopes too close", |s| {
            s.iter().enumerate().all(|(i, a)| s[i + 1..].iter().all(|b| (a - b).abs() > 1e-2))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn untied_levels_have_the_realizer_derivative(
        params in proptest::collection::vec((0.1f64..3.0, -1.5f64..1.5, 0.0f64..2.0), 1..5),
        x in -1.9f64..1.9,
    ) {
        let sources: Vec<String> = params.iter().map(|(a, m, c)| format!("{a}*(x1 - ({m}))^2 + {c}")).collect();
        let problem = one_dim(&sources);
        let values = scenario_values(&problem, &[x]).unwrap();
        let separated = values.iter().enumerate().all(|(i, a)| values[i + 1..].iter().all(|b| (a - b).abs() > 1e-3));
        prop_assume!(separated);
        let levels = ordered_levels(&values);
        for level in 0..params.len() {
            let s = subdiff_level_1d(&problem, x, level, &SubdiffConfig::default()).unwrap();
            let (a, m, _) = params[levels.assignment[level]];
            let exact = 2.0 * a * (x - m);
            prop_assert!(s.interval.width() < 1e-6, "level {} gave {}", level, s.interval);
            prop_assert!((s.interval.midpoint() - exact).abs() < 1e-6, "level {} gave {}, want {}", level, s.interval, exact);
            prop_assert!(!s.boundary);
        }
    }

    #[test]
    fn lines_through_one_point(slopes in distinct_slopes(2..6), t in -1.0f64..1.0) {
        let sources: Vec<String> = slopes.iter().map(|a| format!("({a})*(x1 - ({t})) + 5")).collect();
        let problem = one_dim(&sources);
        let cfg = SubdiffConfig::default();
        let p = slopes.len();
        let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let levels = ordered_levels(&scenario_values(&problem, &[t]).unwrap());
        let groups = tie_groups(&levels, &cfg);
        prop_assert_eq!(groups.len(), 1);
        let group = &groups[0];
        for side in [Side::Left, Side::Right] {
            let a = side_assignment(&problem, t, group, side, &cfg).unwrap().unwrap();
            let mut seen = a.realizers.clone();
            seen.sort_unstable();
            prop_assert_eq!(&seen, &group.scenarios);
        }
        for level in 0..p {
            let sets = level_active_set(&problem, t, group, level, &cfg).unwrap();
            prop_assert_eq!(sets.left.unwrap().len(), p - level);
            prop_assert_eq!(sets.right.unwrap().len(), p - level);
        }

        // the largest and smallest of the lines have the full slope hull
        for level in [0, p - 1] {
            let s = subdiff_level_1d(&problem, t, level, &cfg).unwrap();
            prop_assert!((s.interval.lo - lo).abs() < 1e-6 && (s.interval.hi - hi).abs() < 1e-6,
                "level {} gave {}, want [{}, {}]", level, s.interval, lo, hi);
            for d in [1.0, -1.0] {
                let est = clarke_directional_estimate(&problem, level, &[t], &[d], &cfg).unwrap();
                prop_assert!(s.interval.lo * d <= est + 1e-2 && s.interval.hi * d <= est + 1e-2);
            }
        }
    }
}
