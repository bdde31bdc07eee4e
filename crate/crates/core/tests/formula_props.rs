use handsoff_core::address::CellPos;
use handsoff_core::ast::{BinaryOp, CellRef, ExprKind, RangeRef, Span, UnaryOp};
use handsoff_core::calc::{evaluate, EvalContext};
use handsoff_core::{parse_formula, CellValue, ErrorCode, Expr, Workbook};
use proptest::prelude::*;

fn e(kind: ExprKind) -> Expr {
    Expr::new(kind, Span::default())
}

fn arb_pos() -> impl Strategy<Value = CellPos> {
    (1u32..200, 1u32..60).prop_map(|(r, c)| CellPos::new(r, c))
}

fn arb_sheet() -> impl Strategy<Value = Option<String>> {
    prop_oneof![3 => Just(None), 1 => Just(Some("MAIN".to_string())), 1 => Just(Some("RULES".to_string()))]
}

fn arb_leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..100_000, 0u32..4).prop_map(|(n, d)| e(ExprKind::Number(n as f64 / 10f64.powi(d as i32)))),
        "[a-zA-Z ,\"]{0,8}".prop_map(|s| e(ExprKind::Text(s))),
        any::<bool>().prop_map(|b| e(ExprKind::Boolean(b))),
        (arb_sheet(), arb_pos()).prop_map(|(sheet, pos)| e(ExprKind::Cell(CellRef { sheet, pos }))),
        (arb_sheet(), arb_pos(), arb_pos()).prop_map(|(sheet, a, b)| {
            let (start, end) = (
                CellPos::new(a.row.min(b.row), a.col.min(b.col)),
                CellPos::new(a.row.max(b.row), a.col.max(b.col)),
            );
            e(ExprKind::Range(RangeRef { sheet, start, end }))
        }),
        "[A-Z_]{1,3}_[A-Z]{0,3}".prop_map(|n| e(ExprKind::Name(n))),
    ]
}

const OPS: &[BinaryOp] = &[
    BinaryOp::Add,
    BinaryOp::Sub,
    BinaryOp::Mul,
    BinaryOp::Div,
    BinaryOp::Pow,
    BinaryOp::Concat,
    BinaryOp::Eq,
    BinaryOp::Ne,
    BinaryOp::Lt,
    BinaryOp::Le,
    BinaryOp::Gt,
    BinaryOp::Ge,
];

fn arb_expr() -> impl Strategy<Value = Expr> {
    arb_leaf().prop_recursive(5, 48, 4, |inner| {
        prop_oneof![
            (prop_oneof![Just(UnaryOp::Neg), Just(UnaryOp::Plus)], inner.clone())
                .prop_map(|(op, x)| e(ExprKind::Unary(op, Box::new(x)))),
            (0..OPS.len(), inner.clone(), inner.clone())
                .prop_map(|(i, a, b)| e(ExprKind::Binary(OPS[i], Box::new(a), Box::new(b)))),
            (prop_oneof![Just("SUM"), Just("IF"), Just("CONCATENATE"), Just("LOG10")], prop::collection::vec(inner, 0..4))
                .prop_map(|(f, args)| e(ExprKind::Call(f.to_string(), args))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn display_then_parse_is_identity(ast in arb_expr()) {
        let text = format!("={ast}");
        let back = parse_formula(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(&back, &ast, "{}", text);
        prop_assert_eq!(format!("={back}"), text);
    }
}

#[derive(Clone, Debug)]
enum Tok {
    Num(u32, usize),
    Op(char),
}

fn arb_arith() -> impl Strategy<Value = Vec<Tok>> {
    let operand = (0u32..10, 0usize..3).prop_map(|(n, negs)| Tok::Num(n, negs));
    let op = prop_oneof![Just('+'), Just('-'), Just('*'), Just('/'), Just('^')].prop_map(Tok::Op);
    (operand.clone(), prop::collection::vec((op, operand), 0..7)).prop_map(|(first, rest)| {
        let mut out = vec![first];
        for (o, n) in rest {
            out.push(o);
            out.push(n);
        }
        out
    })
}

fn source(toks: &[Tok]) -> String {
    let mut s = String::from("=");
    for t in toks {
        match t {
            Tok::Num(n, negs) => {
                s.push_str(&"-".repeat(*negs));
                s.push_str(&n.to_string());
            }
            Tok::Op(c) => s.push(*c),
        }
    }
    s
}

type Val = Result<f64, ErrorCode>;

fn apply(op: char, a: Val, b: Val) -> Val {
    let (a, b) = (a?, b?);
    let r = match op {
        '+' => a + b,
        '-' => a - b,
        '*' => a * b,
        '/' if b == 0.0 => return Err(ErrorCode::Div0),
        '/' => a / b,
        '^' if a == 0.0 && b == 0.0 => return Err(ErrorCode::Num),
        '^' if a == 0.0 && b < 0.0 => return Err(ErrorCode::Div0),
        '^' => a.powf(b),
        _ => unreachable!(),
    };
    if r.is_finite() {
        Ok(r)
    } else {
        Err(ErrorCode::Num)
    }
}

fn prec(op: char) -> u8 {
    match op {
        '+' | '-' => 1,
        '*' | '/' => 2,
        _ => 3,
    }
}

/// Shunting-yard over the flat token list: prefix minus folds into its
/// operand, every binary operator is left-associative.
fn reference(toks: &[Tok]) -> Val {
    let mut values: Vec<Val> = Vec::new();
    let mut ops: Vec<char> = Vec::new();
    let reduce = |values: &mut Vec<Val>, op: char| {
        let b = values.pop().unwrap();
        let a = values.pop().unwrap();
        values.push(apply(op, a, b));
    };
    for t in toks {
        match t {
            Tok::Num(n, negs) => values.push(Ok(if negs % 2 == 1 { -(*n as f64) } else { *n as f64 })),
            Tok::Op(o) => {
                while ops.last().is_some_and(|top| prec(*top) >= prec(*o)) {
                    let top = ops.pop().unwrap();
                    reduce(&mut values, top);
                }
                ops.push(*o);
            }
        }
    }
    while let Some(top) = ops.pop() {
        reduce(&mut values, top);
    }
    values.pop().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn precedence_matches_reference(toks in arb_arith()) {
        let mut wb = Workbook::new();
        wb.add_sheet("S").unwrap();
        let text = source(&toks);
        let ast = parse_formula(&text).unwrap();
        let got = evaluate(&ast, &EvalContext { workbook: &wb, sheet: "S" });
        match (reference(&toks), got) {
            (Ok(want), CellValue::Number(n)) => {
                let tol = 1e-12 * want.abs().max(1.0);
                prop_assert!((want - n).abs() <= tol, "{}: want {}, got {}", text, want, n);
            }
            (Err(code), CellValue::Error(got)) => prop_assert_eq!(code, got, "{}", text),
            (want, got) => prop_assert!(false, "{}: want {:?}, got {:?}", text, want, got),
        }
    }
}

#[test]
fn unary_minus_then_power() {
    let wb = {
        let mut wb = Workbook::new();
        wb.add_sheet("S").unwrap();
        wb
    };
    let ctx = EvalContext { workbook: &wb, sheet: "S" };
    let eval = |s: &str| evaluate(&parse_formula(s).unwrap(), &ctx);
    assert_eq!(eval("=-2^2"), CellValue::Number(4.0));
    assert_eq!(eval("=2^3^2"), CellValue::Number(64.0));
    assert_eq!(eval("=1+2*3"), CellValue::Number(7.0));
    assert_eq!(eval("=10-4-3"), CellValue::Number(3.0));
    assert_eq!(eval("=1+1&\"x\""), CellValue::Text("2x".into()));
    assert_eq!(eval("=1+1=2"), CellValue::Boolean(true));
}
