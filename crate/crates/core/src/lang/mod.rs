//! The modelling language: lexer, parser, syntax tree and pretty-printer.

pub mod ast;
mod lexer;
mod parser;
mod pretty;

pub use ast::*;
pub use lexer::{tokenize, Tok, Token};
pub use parser::parse_model;
pub use pretty::{expr as pretty_expr, pretty_print};

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::boxed::Box;
    use alloc::string::String;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    pub(crate) const WINDKESSEL: &str = include_str!("../../../../models/windkessel/Windkessel.bi");
    pub(crate) const LORENZ96: &str = include_str!("../../../../models/lorenz96/Lorenz96.bi");

    #[test]
    fn windkessel_shape() {
        let m = parse_model(WINDKESSEL).unwrap();
        assert_eq!(m.name, "Windkessel");
        let count = |r| m.vars_with_role(r).count();
        assert_eq!(count(Role::Param), 4);
        assert_eq!(count(Role::Input), 1);
        assert_eq!(count(Role::Noise), 1);
        assert_eq!(count(Role::State), 1);
        assert_eq!(count(Role::Obs), 1);
        assert_eq!(m.blocks.len(), 5);
        assert_eq!(m.consts, [ConstDecl { name: "h".into(), value: 0.01 }]);
        let t = m.block(BlockName::Transition).unwrap();
        assert!(matches!(t.arg("delta"), Some(ArgValue::Expr(Expr::Var(_)))));
    }

    #[test]
    fn lorenz96_shape() {
        let m = parse_model(LORENZ96).unwrap();
        assert_eq!(
            m.dims,
            [DimDecl {
                name: "n".into(),
                size: 8,
                boundary: Boundary::Cyclic
            }]
        );
        assert_eq!(m.vars_with_role(Role::Param).count(), 2);
        for name in ["x", "deltaW", "y"] {
            let v = m.vars.iter().find(|v| v.name == name).unwrap();
            assert_eq!(v.dims, ["n"]);
        }
        assert_eq!(m.blocks.len(), 6);
        let t = m.block(BlockName::Transition).unwrap();
        let Statement::Ode { args, equations } = &t.statements[1] else {
            panic!("expected ode block")
        };
        assert_eq!(args.len(), 2);
        assert_eq!(equations.len(), 1);
        assert_eq!(equations[0].lhs.name, "x");
        // truncated_gaussian with positional bounds
        let pp = m.block(BlockName::ProposalParameter).unwrap();
        let Statement::Sample { dist, .. } = &pp.statements[0] else {
            panic!()
        };
        assert_eq!(dist.args.len(), 4);
    }

    #[test]
    fn corpus_round_trips() {
        for src in [WINDKESSEL, LORENZ96, "model M {}"] {
            let a = parse_model(src).unwrap();
            let printed = pretty_print(&a);
            let b = parse_model(&printed).unwrap();
            assert_eq!(a, b, "{printed}");
            // printing is a fixed point
            assert_eq!(printed, pretty_print(&b));
        }
    }

    #[test]
    fn pretty_print_is_canonical() {
        let printed = pretty_print(&parse_model(WINDKESSEL).unwrap());
        assert!(printed.contains("\n  sub transition(delta = h) {\n    xi ~ gaussian(0.0, h * sqrt(sigma2))\n"));
        assert!(printed.contains("Pp <- exp(-h / (R * C)) * Pp + R * (1.0 - exp(-h / (R * C))) * (F + xi)"));
    }

    fn ident() -> impl Strategy<Value = String> {
        prop::sample::select(&["a", "b", "x", "Pp", "sigma2", "z_1"][..]).prop_map(String::from)
    }

    fn var_ref() -> impl Strategy<Value = VarRef> {
        let index = prop_oneof![
            (0i64..5).prop_map(IndexExpr::Literal),
            (-3i64..3).prop_map(|o| IndexExpr::Dim {
                name: "n".into(),
                offset: o
            }),
        ];
        (ident(), prop::collection::vec(index, 0..3)).prop_map(|(name, indices)| VarRef { name, indices })
    }

    fn expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expr::Number),
            (0u32..100).prop_map(|i| Expr::Number(i as f64)),
            var_ref().prop_map(Expr::Var),
        ];
        leaf.prop_recursive(5, 40, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop::sample::select(&[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][..]),
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::Binary {
                        op,
                        lhs: Box::new(l),
                        rhs: Box::new(r)
                    }),
                (
                    prop::sample::select(&["exp", "sqrt", "sin", "pow", "mod"][..]),
                    prop::collection::vec(inner, 0..3)
                )
                    .prop_map(|(f, args)| Expr::Call {
                        func: f.into(),
                        args
                    }),
            ]
        })
    }

    fn statement() -> impl Strategy<Value = Statement> {
        let arg = prop_oneof![
            expr().prop_map(Arg::Positional),
            (prop::sample::select(&["lower", "upper"][..]), expr()).prop_map(|(n, e)| Arg::Named(n.into(), e)),
        ];
        prop_oneof![
            (var_ref(), expr()).prop_map(|(lhs, rhs)| Statement::Assign { lhs, rhs }),
            (var_ref(), prop::collection::vec(arg, 0..4)).prop_map(|(lhs, args)| Statement::Sample {
                lhs,
                dist: DistCall {
                    name: "gaussian".into(),
                    args
                }
            }),
            (var_ref(), expr()).prop_map(|(lhs, rhs)| Statement::Ode {
                args: Vec::from([NamedArg {
                    name: "alg".into(),
                    value: ArgValue::Str("RK4".into())
                }]),
                equations: Vec::from([OdeEquation { lhs, rhs }]),
            }),
        ]
    }

    proptest! {
        #[test]
        fn generated_models_round_trip(
            stmts in prop::collection::vec(statement(), 0..6),
            delta in expr(),
        ) {
            let model = ModelAst {
                name: "M".into(),
                dims: Vec::from([DimDecl { name: "n".into(), size: 3, boundary: Boundary::Cyclic }]),
                consts: Vec::from([ConstDecl { name: "k".into(), value: 0.25 }]),
                vars: Vec::from([VarDecl { name: "x".into(), role: Role::State, dims: Vec::from(["n".into()]) }]),
                blocks: Vec::from([Block {
                    name: BlockName::Transition,
                    args: Vec::from([NamedArg { name: "delta".into(), value: ArgValue::Expr(delta) }]),
                    statements: stmts,
                }]),
            };
            let printed = pretty_print(&model);
            let reparsed = parse_model(&printed);
            prop_assert_eq!(reparsed.as_ref(), Ok(&model), "{}", printed);
        }

        #[test]
        fn parser_never_panics_on_bytes(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
            let src = String::from_utf8_lossy(&bytes);
            let _ = parse_model(&src);
        }

        #[test]
        fn parser_never_panics_on_token_soup(
            toks in prop::collection::vec(
                prop::sample::select(&[
                    "model", "M", "{", "}", "(", ")", "[", "]", "x", "n", "-", "+", "*", "/",
                    "~", "<-", "=", ";", "\n", "1", "2.5", "sub", "initial", "ode", "dx", "dt",
                    "param", "dim", "const", ",", "'cyclic'", "gaussian",
                ][..]),
                0..60,
            )
        ) {
            let src = toks.join(" ");
            let _ = parse_model(&src);
        }
    }
}
