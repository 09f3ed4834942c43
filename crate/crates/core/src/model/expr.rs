//! Resolved expressions and their compiled stack-machine form.
//!
//! After validation every variable reference is a concrete slot in the
//! model's flat frame (`[params | inputs | noise | states | obs]`), dimension
//! indices are folded to numbers and constants are inlined. The tree form
//! ([`RExpr`]) is what symbolic differentiation works on; [`Program`] is the
//! postfix translation that the simulators evaluate in the hot loops.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::lang::BinOp;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Abs,
    Pow,
    Mod,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            "pow" => Func::Pow,
            "mod" => Func::Mod,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Pow => "pow",
            Func::Mod => "mod",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Mod => 2,
            _ => 1,
        }
    }

    #[inline]
    pub fn apply1(self, x: f64) -> f64 {
        match self {
            Func::Exp => math::exp(x),
            Func::Log => math::ln(x),
            Func::Sqrt => math::sqrt(x),
            Func::Sin => libm::sin(x),
            Func::Cos => libm::cos(x),
            Func::Abs => math::abs(x),
            Func::Pow | Func::Mod => f64::NAN,
        }
    }

    #[inline]
    pub fn apply2(self, a: f64, b: f64) -> f64 {
        match self {
            Func::Pow => math::powf(a, b),
            // Floored modulus, so that mod(-0.1, 0.8) = 0.7.
            Func::Mod => a - b * math::floor(a / b),
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RExpr {
    Const(f64),
    Slot(usize),
    Neg(Box<RExpr>),
    Bin(BinOp, Box<RExpr>, Box<RExpr>),
    Call(Func, Vec<RExpr>),
}

impl RExpr {
    pub fn eval(&self, frame: &[f64]) -> f64 {
        match self {
            RExpr::Const(c) => *c,
            RExpr::Slot(s) => frame[*s],
            RExpr::Neg(e) => -e.eval(frame),
            RExpr::Bin(op, a, b) => binop(*op, a.eval(frame), b.eval(frame)),
            RExpr::Call(f, args) => match args.as_slice() {
                [a] => f.apply1(a.eval(frame)),
                [a, b] => f.apply2(a.eval(frame), b.eval(frame)),
                _ => f64::NAN,
            },
        }
    }

    /// Calls `f` on every slot the expression reads.
    pub fn visit_slots(&self, f: &mut impl FnMut(usize)) {
        match self {
            RExpr::Const(_) => {}
            RExpr::Slot(s) => f(*s),
            RExpr::Neg(e) => e.visit_slots(f),
            RExpr::Bin(_, a, b) => {
                a.visit_slots(f);
                b.visit_slots(f);
            }
            RExpr::Call(_, args) => args.iter().for_each(|a| a.visit_slots(f)),
        }
    }

    pub fn reads(&self, slot: usize) -> bool {
        let mut hit = false;
        self.visit_slots(&mut |s| hit |= s == slot);
        hit
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            RExpr::Const(c) => Some(*c),
            _ => None,
        }
    }
}

#[inline]
fn binop(op: BinOp, a: f64, b: f64) -> f64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Load(u32),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Call1(Func),
    Call2(Func),
}

const STACK: usize = 32;

/// Postfix program for one expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    depth: usize,
}

impl Program {
    pub fn compile(e: &RExpr) -> Program {
        let mut ops = Vec::new();
        let depth = emit(e, &mut ops);
        Program { ops, depth }
    }

    #[inline]
    pub fn eval(&self, frame: &[f64]) -> f64 {
        if self.depth <= STACK {
            let mut stack = [0.0f64; STACK];
            run(&self.ops, frame, &mut stack)
        } else {
            let mut stack = vec![0.0f64; self.depth];
            run(&self.ops, frame, &mut stack)
        }
    }
}

/// Emits `e` and returns the stack depth it needs.
fn emit(e: &RExpr, ops: &mut Vec<Op>) -> usize {
    match e {
        RExpr::Const(c) => {
            ops.push(Op::Const(*c));
            1
        }
        RExpr::Slot(s) => {
            ops.push(Op::Load(*s as u32));
            1
        }
        RExpr::Neg(a) => {
            let d = emit(a, ops);
            ops.push(Op::Neg);
            d
        }
        RExpr::Bin(op, a, b) => {
            let da = emit(a, ops);
            let db = emit(b, ops);
            ops.push(match op {
                BinOp::Add => Op::Add,
                BinOp::Sub => Op::Sub,
                BinOp::Mul => Op::Mul,
                BinOp::Div => Op::Div,
            });
            da.max(db + 1)
        }
        RExpr::Call(f, args) => {
            let mut depth = 0;
            for (i, a) in args.iter().enumerate() {
                depth = depth.max(emit(a, ops) + i);
            }
            match args.len() {
                1 => ops.push(Op::Call1(*f)),
                2 => ops.push(Op::Call2(*f)),
                _ => {
                    // arity is checked during validation; keep the stack balanced anyway
                    for _ in 0..args.len() {
                        ops.push(Op::Neg);
                    }
                    ops.push(Op::Const(f64::NAN));
                    return depth.max(1);
                }
            }
            depth.max(1)
        }
    }
}

#[inline]
fn run(ops: &[Op], frame: &[f64], stack: &mut [f64]) -> f64 {
    let mut sp = 0usize;
    for op in ops {
        match *op {
            Op::Const(c) => {
                stack[sp] = c;
                sp += 1;
            }
            Op::Load(s) => {
                stack[sp] = frame[s as usize];
                sp += 1;
            }
            Op::Neg => stack[sp - 1] = -stack[sp - 1],
            Op::Add => {
                sp -= 1;
                stack[sp - 1] += stack[sp];
            }
            Op::Sub => {
                sp -= 1;
                stack[sp - 1] -= stack[sp];
            }
            Op::Mul => {
                sp -= 1;
                stack[sp - 1] *= stack[sp];
            }
            Op::Div => {
                sp -= 1;
                stack[sp - 1] /= stack[sp];
            }
            Op::Call1(f) => stack[sp - 1] = f.apply1(stack[sp - 1]),
            Op::Call2(f) => {
                sp -= 1;
                stack[sp - 1] = f.apply2(stack[sp - 1], stack[sp]);
            }
        }
    }
    stack[0]
}

/// An expression in both of its forms.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    pub expr: RExpr,
    pub prog: Program,
}

impl Compiled {
    pub fn new(expr: RExpr) -> Compiled {
        let prog = Program::compile(&expr);
        Compiled { expr, prog }
    }

    #[inline]
    pub fn eval(&self, frame: &[f64]) -> f64 {
        self.prog.eval(frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_expr() -> impl Strategy<Value = RExpr> {
        let leaf = prop_oneof![
            (-5.0f64..5.0).prop_map(RExpr::Const),
            (0usize..4).prop_map(RExpr::Slot),
        ];
        leaf.prop_recursive(8, 64, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| RExpr::Neg(Box::new(e))),
                (
                    prop::sample::select(&[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][..]),
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| RExpr::Bin(op, Box::new(a), Box::new(b))),
                (prop::sample::select(&[Func::Exp, Func::Sin, Func::Abs][..]), inner.clone())
                    .prop_map(|(f, a)| RExpr::Call(f, vec![a])),
                (prop::sample::select(&[Func::Pow, Func::Mod][..]), inner.clone(), inner)
                    .prop_map(|(f, a, b)| RExpr::Call(f, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn program_matches_tree(e in arb_expr(), frame in prop::array::uniform4(-3.0f64..3.0)) {
            let a = e.eval(&frame);
            let b = Program::compile(&e).eval(&frame);
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()), "{a} vs {b}");
        }
    }

    #[test]
    fn deep_right_nesting_uses_heap_stack() {
        let mut e = RExpr::Slot(0);
        for _ in 0..100 {
            e = RExpr::Bin(BinOp::Add, Box::new(RExpr::Const(1.0)), Box::new(e));
        }
        let p = Program::compile(&e);
        assert!(p.depth > STACK);
        assert_eq!(p.eval(&[0.5]), 100.5);
    }

    #[test]
    fn floored_mod() {
        assert!((Func::Mod.apply2(0.9, 0.8) - 0.1).abs() < 1e-12);
        assert!((Func::Mod.apply2(-0.1, 0.8) - 0.7).abs() < 1e-12);
    }
}
