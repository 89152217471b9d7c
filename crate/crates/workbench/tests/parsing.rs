use num_complex::Complex64;
use proptest::prelude::*;
use psido_workbench::config::{parse_operator, parse_problem, spec_from_expression, ConfigError, OperatorKind, Settings};
use psido_workbench::expr::{parse, BinOp, Env, Expr, Func, Var};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0f64..1e6).prop_map(Expr::Num),
        Just(Expr::Imag),
        Just(Expr::Pi),
        Just(Expr::Var(Var::N)),
        Just(Expr::Var(Var::X)),
        Just(Expr::Var(Var::Xi)),
    ]
}

fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 40, 2, |inner| {
        let op = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div), Just(BinOp::Pow)];
        let func = prop_oneof![Just(Func::Sqrt), Just(Func::Exp), Just(Func::Log), Just(Func::Sin), Just(Func::Cos)];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::Bin(o, Box::new(a), Box::new(b))),
            (func, inner).prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
        ]
    })
}

proptest! {
    #[test]
    fn display_parses_back_to_the_same_tree(e in tree()) {
        let text = e.to_string();
        prop_assert_eq!(parse(&text).expect(&text), e);
    }

    #[test]
    fn evaluation_is_deterministic(e in tree(), n in -5.0f64..5.0, x in 0.0f64..6.3) {
        let env = Env { n, x, xi: n };
        let (u, v) = (e.eval(&env), e.eval(&env));
        prop_assert!(u.re.to_bits() == v.re.to_bits() && u.im.to_bits() == v.im.to_bits());
    }
}

#[test]
fn precedence_and_signed_exponents() {
    let e = parse("(1+n^2)^-0.5").unwrap();
    let v = e.eval(&Env { n: 2.0, ..Env::default() });
    assert!((v - Complex64::new(5f64.powf(-0.5), 0.0)).norm() < 1e-15);
    assert_eq!(parse("-n^2").unwrap().eval(&Env { n: 3.0, ..Env::default() }), Complex64::new(-9.0, 0.0));
    assert_eq!(parse("2^3^2").unwrap().eval(&Env::default()), Complex64::new(512.0, 0.0));
    assert_eq!(parse("8/4/2").unwrap().eval(&Env::default()), Complex64::new(1.0, 0.0));
    let z = parse("exp(i*pi)").unwrap().eval(&Env::default());
    assert!((z + 1.0).norm() < 1e-15);
}

#[test]
fn unknown_identifier_is_reported_with_position() {
    let err = parse("1 + n^2\n  + foo(x)").unwrap_err();
    assert!(err.message.contains("foo"), "{err}");
    assert_eq!((err.line, err.column), (2, 5));
}

#[test]
fn unexpected_character_is_reported_with_position() {
    let err = parse("n + $").unwrap_err();
    assert_eq!((err.line, err.column), (1, 5));
}

#[test]
fn polynomial_coefficients() {
    let c = parse("2 + 3*n - n^2").unwrap().polynomial(Var::N).unwrap();
    let want = [2.0, 3.0, -1.0];
    assert_eq!(c.len(), 3);
    for (a, b) in c.iter().zip(want) {
        assert_eq!(*a, Complex64::new(b, 0.0));
    }
    assert!(parse("sqrt(n)").unwrap().polynomial(Var::N).is_none());
}

#[test]
fn power_multiplier_example_builds() {
    let spec = parse_operator(r#"{"kind":"power_multiplier","base":"1+n^2","exponent":0.5,"cut":3.14159265}"#).unwrap();
    assert!(matches!(spec.kind, OperatorKind::PowerMultiplier { .. }));
    let op = spec.build(&Settings::default()).unwrap();
    assert!((op.op.order() - 1.0).abs() < 1e-15);
    assert!(op.multiplier().is_some());
}

#[test]
fn shifted_first_order_example_builds() {
    let spec = parse_operator(r#"{"kind":"shifted_first_order","c":0.3,"cut":1.5707963}"#).unwrap();
    let op = spec.build(&Settings::default()).unwrap();
    assert!((op.op.order() - 1.0).abs() < 1e-15);
}

#[test]
fn malformed_exponent_names_the_field() {
    let err = parse_operator(r#"{"kind":"power_multiplier","base":"1+n^2","exponent":"½"}"#).unwrap_err();
    match &err {
        ConfigError::Expr { path, .. } => assert_eq!(path, "exponent"),
        other => panic!("unexpected error {other}"),
    }
    assert!(err.to_string().contains("exponent"));
}

#[test]
fn multipliers_reject_x() {
    let err = parse_operator(r#"{"kind":"power_multiplier","base":"1+x*n^2","exponent":1}"#).unwrap_err();
    assert!(matches!(err, ConfigError::Invalid { ref path, .. } if path == "base"), "{err}");
}

#[test]
fn syntax_errors_carry_line_and_column() {
    let err = parse_operator("{\"kind\": \"power_multiplier\",\n \"base\": }").unwrap_err();
    assert!(matches!(err, ConfigError::Json(ref e) if e.line() == 2), "{err}");
}

#[test]
fn inadmissible_operator_is_rejected() {
    // −(1+n²) has its whole spectrum on the cut π.
    let spec = parse_operator(r#"{"kind":"power_multiplier","base":"-1-n^2","exponent":1,"cut":3.141592653589793}"#).unwrap();
    assert!(matches!(spec.build(&Settings::default()), Err(ConfigError::Admissibility(_))));
}

#[test]
fn canonical_spec_round_trips() {
    let text = r#"{"name":"A","kind":"matrix_multiplier","order":"1","lead":[[2,"1/2"],[0.3,1]],"pert":[[0,1],[-1,"0.5"]],"eps":0.3,"cut":3.0}"#;
    let spec = parse_operator(text).unwrap().canonical().unwrap();
    let emitted = serde_json::to_string(&spec).unwrap();
    let again = parse_operator(&emitted).unwrap();
    assert_eq!(again, spec);
    assert_eq!(again.canonical().unwrap(), spec);

    let vs = parse_operator(r#"{"kind":"variable_symbol","order":-1,"components":[["1 + 0.3*cos(x)","(1+0.3*cos(x))"]]}"#).unwrap();
    let c = vs.canonical().unwrap();
    let OperatorKind::VariableSymbol { components, .. } = &c.kind else { panic!() };
    assert_eq!(components[0][0], components[0][1]);
    assert_eq!(parse_operator(&serde_json::to_string(&c).unwrap()).unwrap(), c);
}

#[test]
fn expression_shorthand() {
    let spec = spec_from_expression("(1+n^2)^-0.5").unwrap();
    let OperatorKind::PowerMultiplier { base, .. } = &spec.kind else { panic!() };
    assert_eq!(parse(base).unwrap(), parse("1+n^2").unwrap());
    assert!(spec_from_expression("sin(x)").is_err());
}

#[test]
fn problem_settings_default() {
    let p = parse_problem(r#"{"a":{"kind":"shifted_first_order","c":0.3},"settings":{"tol":1e-4}}"#).unwrap();
    assert_eq!(p.settings.tol, 1e-4);
    assert_eq!(p.settings.depth, Settings::default().depth);
    assert!(p.b.is_none() && p.weight.is_none());
}

#[test]
fn shipped_configs_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            parse_problem(&std::fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}
