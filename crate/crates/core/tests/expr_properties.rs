use std::sync::Arc;
use std::thread;

use proptest::prelude::*;
use pwsc::expr::{BinOp, Bindings, Function, Variable};
use pwsc::Expression;

fn variable() -> impl Strategy<Value = Variable> {
    prop_oneof![
        Just(Variable::X),
        Just(Variable::Y),
        Just(Variable::Lambda),
        Just(Variable::Eps),
    ]
}

fn function() -> impl Strategy<Value = Function> {
    prop_oneof![
        Just(Function::Sin),
        Just(Function::Cos),
        Just(Function::Exp),
        Just(Function::Tanh),
        Just(Function::Sqrt),
    ]
}

fn binop() -> impl Strategy<Value = BinOp> {
    prop_oneof![
        Just(BinOp::Add),
        Just(BinOp::Sub),
        Just(BinOp::Mul),
        Just(BinOp::Div)
    ]
}

fn literal() -> impl Strategy<Value = f64> {
    prop_oneof![(0u32..100).prop_map(f64::from), 0.0f64..1e6, 1e-12f64..1e-3]
}

/// Any tree the grammar can express.
fn any_expression() -> impl Strategy<Value = Expression> {
    let leaf = prop_oneof![
        literal().prop_map(Expression::lit),
        variable().prop_map(Expression::var)
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expression::neg),
            (inner.clone(), 0u32..6).prop_map(|(e, n)| Expression::pow(e, n)),
            (function(), inner.clone()).prop_map(|(f, e)| Expression::call(f, e)),
            (binop(), inner.clone(), inner).prop_map(|(op, a, b)| Expression::binary(op, a, b)),
        ]
    })
}

/// Smooth trees in `x` and `y` without division or square roots.
fn smooth_expression() -> impl Strategy<Value = Expression> {
    let leaf = prop_oneof![
        (-2.0f64..2.0).prop_map(|v| if v < 0.0 {
            Expression::neg(Expression::lit(-v))
        } else {
            Expression::lit(v)
        }),
        Just(Expression::var(Variable::X)),
        Just(Expression::var(Variable::Y)),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        let smooth_fn = prop_oneof![
            Just(Function::Sin),
            Just(Function::Cos),
            Just(Function::Exp),
            Just(Function::Tanh)
        ];
        prop_oneof![
            inner.clone().prop_map(Expression::neg),
            (inner.clone(), 0u32..4).prop_map(|(e, n)| Expression::pow(e, n)),
            (smooth_fn, inner.clone()).prop_map(|(f, e)| Expression::call(f, e)),
            (
                prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul)],
                inner.clone(),
                inner
            )
                .prop_map(|(op, a, b)| Expression::binary(op, a, b)),
        ]
    })
}

fn at(x: f64, y: f64) -> Bindings {
    Bindings::new(x, y, 0.3, 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn printing_then_parsing_returns_the_same_tree(e in any_expression()) {
        let printed = e.to_string();
        let back = Expression::parse(&printed).map_err(|err| TestCaseError::fail(format!("{printed}: {err}")))?;
        prop_assert_eq!(back, e, "{}", printed);
    }

    #[test]
    fn parsing_arbitrary_text_never_panics(s in "\\PC{0,40}") {
        let _ = Expression::parse(&s);
    }

    #[test]
    fn parsing_token_soup_never_panics(
        toks in prop::collection::vec(
            prop_oneof![
                Just("x"), Just("y"), Just("lambda"), Just("eps"), Just("1"), Just("2.5e-3"),
                Just("+"), Just("-"), Just("*"), Just("/"), Just("^"), Just("("), Just(")"),
                Just("sin"), Just("sqrt"), Just("z"), Just("1e"), Just("."),
            ],
            0..20,
        )
    ) {
        let _ = Expression::parse(&toks.concat());
    }

    #[test]
    fn first_partials_match_central_differences(
        e in smooth_expression(),
        x in -1.0f64..1.0,
        y in -1.0f64..1.0,
    ) {
        let Ok(jet) = e.evaluate_jet(&at(x, y)) else { return Ok(()) };
        let h = 1e-5;
        let v = |x: f64, y: f64| e.evaluate(&at(x, y));
        let (Ok(xp), Ok(xm), Ok(yp), Ok(ym)) = (v(x + h, y), v(x - h, y), v(x, y + h), v(x, y - h)) else {
            return Ok(());
        };
        let fd = [(xp - xm) / (2.0 * h), (yp - ym) / (2.0 * h)];
        let scale = 1.0 + jet.value().abs();
        prop_assert!((fd[0] - jet.dx()).abs() <= 1e-6 * scale.max(jet.dx().abs()), "{}: {} vs {}", e, fd[0], jet.dx());
        prop_assert!((fd[1] - jet.dy()).abs() <= 1e-6 * scale.max(jet.dy().abs()), "{}: {} vs {}", e, fd[1], jet.dy());
    }

    #[test]
    fn shifted_monomials_have_exact_partials(
        c in -4.0f64..4.0,
        x0 in -2.0f64..2.0,
        y0 in -2.0f64..2.0,
        i in 0usize..4,
        j in 0usize..4,
    ) {
        prop_assume!(i + j <= 3);
        let src = format!("({c:e})*(x - ({x0:e}))^{i}*(y - ({y0:e}))^{j}");
        let e = Expression::parse(&src).unwrap();
        let jet = e.evaluate_jet(&at(x0, y0)).unwrap();
        let fact = |n: usize| (1..=n).product::<usize>() as f64;
        let want = c * fact(i) * fact(j);
        for a in 0..=3usize {
            for b in 0..=(3 - a) {
                let got = jet.partial(a, b);
                if (a, b) == (i, j) {
                    prop_assert!((got - want).abs() <= 4.0 * f64::EPSILON * want.abs(), "{} {} {}", src, got, want);
                } else {
                    prop_assert_eq!(got, 0.0, "{} ({}, {})", src, a, b);
                }
            }
        }
    }

    #[test]
    fn y_partials_vanish_without_y(e in smooth_expression(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        prop_assume!(!e.mentions(Variable::Y));
        if let Ok(jet) = e.evaluate_jet(&at(x, y)) {
            for (a, b) in [(0, 1), (1, 1), (0, 2), (2, 1), (1, 2), (0, 3)] {
                prop_assert_eq!(jet.partial(a, b), 0.0);
            }
        }
    }

    #[test]
    fn jet_value_agrees_with_plain_evaluation(e in smooth_expression(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        if let (Ok(v), Ok(jet)) = (e.evaluate(&at(x, y)), e.evaluate_jet(&at(x, y))) {
            prop_assert!((v - jet.value()).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }
}

#[test]
fn evaluation_is_safe_across_threads() {
    let e = Arc::new(Expression::parse("x*(1.9 - x) + sin(y)*exp(-x^2) - lambda/eps").unwrap());
    let expected: Vec<f64> = (0..200)
        .map(|k| {
            e.evaluate(&Bindings::new(k as f64 * 0.01, 0.5, 0.2, 0.1))
                .unwrap()
        })
        .collect();
    let expected = Arc::new(expected);
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let e = Arc::clone(&e);
            let expected = Arc::clone(&expected);
            thread::spawn(move || {
                for _ in 0..50 {
                    for (k, want) in expected.iter().enumerate() {
                        let b = Bindings::new(k as f64 * 0.01, 0.5, 0.2, 0.1);
                        assert_eq!(e.evaluate(&b).unwrap(), *want);
                        assert_eq!(e.evaluate_jet(&b).unwrap().value(), *want);
                    }
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
}

#[test]
fn fixture_jets_at_sample_points() {
    let e = Expression::parse("x*(1.9 - x)").unwrap();
    let jet = e.evaluate_jet(&at(0.5, 0.0)).unwrap();
    assert!((jet.value() - 0.7).abs() < 1e-15);
    assert!((jet.dx() - 0.9).abs() < 1e-15);
    assert_eq!(jet.dxx(), -2.0);
    assert_eq!(jet.dxxx(), 0.0);
    let g = Expression::parse("x - lambda + 2*y").unwrap();
    let jet = g.evaluate_jet(&Bindings::new(0.1, 0.2, 0.05, 0.1)).unwrap();
    assert!((jet.value() - 0.45).abs() < 1e-15);
    assert_eq!((jet.dx(), jet.dy()), (1.0, 2.0));
}
