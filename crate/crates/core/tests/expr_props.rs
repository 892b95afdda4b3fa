use proptest::prelude::*;

use riemann_core::expr::{parse_expr, Expr, Func};

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

fn one_plus_square(e: Expr) -> Expr {
    Expr::Add(b(Expr::Num(1.0)), b(Expr::Mul(b(e.clone()), b(e))))
}

/// Expressions that stay finite and smooth for x, y in [0.5, 1.5].
fn smooth_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.5..2.0f64).prop_map(Expr::Num),
        Just(Expr::Var("x".into())),
        Just(Expr::Var("y".into())),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(b(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, c)| Expr::Add(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(|(a, c)| Expr::Sub(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(|(a, c)| Expr::Mul(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(|(a, c)| Expr::Div(b(a), b(one_plus_square(c)))),
            (inner.clone(), 0..4i32).prop_map(|(a, n)| Expr::Pow(b(a), b(Expr::Num(n as f64)))),
            inner.clone().prop_map(|a| Expr::Pow(b(one_plus_square(a)), b(Expr::Num(0.5)))),
            (prop::sample::select(vec![Func::Sin, Func::Cos, Func::Tanh]), inner.clone())
                .prop_map(|(f, a)| Expr::Call(f, b(a))),
            inner.clone().prop_map(|a| Expr::Call(Func::Exp, b(Expr::Call(Func::Sin, b(a))))),
            inner.clone().prop_map(|a| Expr::Call(Func::Log, b(one_plus_square(a)))),
            inner.clone().prop_map(|a| Expr::Call(Func::Sqrt, b(one_plus_square(a)))),
            inner.prop_map(|a| Expr::Call(Func::Sinh, b(Expr::Call(Func::Cos, b(a))))),
        ]
    })
}

/// Anything the printer can produce, including negative literals and every
/// function.
fn any_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-1e6..1e6f64).prop_map(Expr::Num),
        (0u32..1000).prop_map(|n| Expr::Num(n as f64)),
        prop::sample::select(vec!["x", "y", "th1"]).prop_map(|s| Expr::Var(s.into())),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(b(a))),
            (prop::sample::select(Func::ALL.to_vec()), inner.clone()).prop_map(|(f, a)| Expr::Call(f, b(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, c)| Expr::Add(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(|(a, c)| Expr::Sub(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(|(a, c)| Expr::Mul(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(|(a, c)| Expr::Div(b(a), b(c))),
            (inner.clone(), inner).prop_map(|(a, c)| Expr::Pow(b(a), b(c))),
        ]
    })
}

fn at(e: &Expr, x: f64, y: f64) -> f64 {
    e.eval(&[("x", x), ("y", y)]).unwrap()
}

/// Five-point central difference.
fn fd(e: &Expr, x: f64, y: f64, h: f64) -> f64 {
    (-at(e, x + 2.0 * h, y) + 8.0 * at(e, x + h, y) - 8.0 * at(e, x - h, y) + at(e, x - 2.0 * h, y))
        / (12.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivative_matches_finite_differences(e in smooth_expr(), x in 0.5..1.5f64, y in 0.5..1.5f64) {
        let value = at(&e, x, y);
        prop_assume!(value.abs() < 1e6);
        let d = e.diff("x").eval(&[("x", x), ("y", y)]).unwrap();
        let coarse = fd(&e, x, y, 1e-3);
        let fine = fd(&e, x, y, 5e-4);
        // both stencils agreeing means the difference quotient has converged
        prop_assume!((coarse - fine).abs() <= 1e-8 * coarse.abs().max(1.0));
        prop_assert!(
            (d - fine).abs() <= 1e-6 * d.abs().max(1.0),
            "{e}: symbolic {d}, finite difference {fine}"
        );
    }

    #[test]
    fn derivative_of_unrelated_variable_is_zero(e in smooth_expr(), x in 0.5..1.5f64, y in 0.5..1.5f64) {
        let d = e.diff("z").eval(&[("x", x), ("y", y)]).unwrap();
        prop_assert_eq!(d, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn print_parse_round_trip(e in any_expr()) {
        let vars = ["x", "y", "th1"];
        let printed = e.to_string();
        let parsed = parse_expr(&printed, &vars).unwrap();
        prop_assert_eq!(&parsed.to_string(), &printed);
        let reparsed = parse_expr(&parsed.to_string(), &vars).unwrap();
        prop_assert_eq!(&reparsed, &parsed);
        let env = [("x", 0.7), ("y", 1.3), ("th1", 0.2)];
        match (e.eval(&env), parsed.eval(&env)) {
            (Ok(a), Ok(c)) => prop_assert_eq!(a.to_bits(), c.to_bits()),
            (Err(_), Err(_)) => {}
            (a, c) => prop_assert!(false, "{printed}: {a:?} vs {c:?}"),
        }
    }
}
