use proptest::prelude::*;

use super::*;

fn arb_leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..1000).prop_map(|v| Expr::num(v as f64)),
        (0.0f64..1e3).prop_map(Expr::num),
        (1e-9f64..1e-3).prop_map(Expr::num),
        (1usize..4).prop_map(Expr::var),
    ]
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let ops = prop_oneof![
        Just(BinOp::Add),
        Just(BinOp::Sub),
        Just(BinOp::Mul),
        Just(BinOp::Div),
        Just(BinOp::Pow),
    ];
    arb_leaf().prop_recursive(5, 48, 2, move |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::negate),
            (ops.clone(), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (proptest::sample::select(Func::ALL.to_vec()), inner).prop_map(|(f, a)| Expr::call(f, a)),
        ]
    })
}

fn bits_eq(a: &Result<f64, EvalError>, b: &Result<f64, EvalError>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x.to_bits() == y.to_bits(),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(e in arb_expr()) {
        let printed = e.to_string();
        let back = parse_expression(&printed).unwrap();
        prop_assert_eq!(&back, &e, "printed as {}", printed);
        prop_assert_eq!(back.to_string(), printed);
    }

    #[test]
    fn reparsed_expression_evaluates_identically(
        e in arb_expr(),
        x in proptest::collection::vec(-3.0f64..3.0, 3),
    ) {
        let back = parse_expression(&e.to_string()).unwrap();
        prop_assert!(bits_eq(&e.eval(&x), &back.eval(&x)));
    }

    #[test]
    fn arity_bounds_accepted_dimension(e in arb_expr()) {
        let printed = e.to_string();
        prop_assert!(parse_expression_in(&printed, e.arity().max(1)).is_ok());
        if e.arity() > 1 {
            let rejected = matches!(
                parse_expression_in(&printed, e.arity() - 1),
                Err(ParseError::UnknownVariable { .. })
            );
            prop_assert!(rejected);
        }
    }
}

/// Cubics at 1000 random points of [-10, 10] with the default step.
#[test]
fn cubic_derivatives_match_analytic_values() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let src = format!("({}) + ({})*x1 + ({})*x1^2 + ({})*x1^3", c[0], c[1], c[2], c[3]);
        let e = parse_expression(&src).unwrap();
        let x: f64 = rng.gen_range(-10.0..10.0);
        let exact = c[1] + 2.0 * c[2] * x + 3.0 * c[3] * x * x;
        for side in [Side::Left, Side::Right] {
            let d = one_sided_derivative(&e, &[x], 0, side, DEFAULT_STEP).unwrap();
            worst = worst.max((d - exact).abs());
        }
    }
    assert!(worst <= 1e-8, "largest error {worst:e}");
}
