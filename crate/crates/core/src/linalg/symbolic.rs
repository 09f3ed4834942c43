//! Symbolic differentiation and simplification over resolved expressions.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;

use crate::lang::BinOp;
use crate::model::expr::{Func, RExpr};

fn c(v: f64) -> RExpr {
    RExpr::Const(v)
}

fn bin(op: BinOp, a: RExpr, b: RExpr) -> RExpr {
    RExpr::Bin(op, Box::new(a), Box::new(b))
}

fn is(e: &RExpr, v: f64) -> bool {
    e.as_const() == Some(v)
}

/// Constant folding plus the identities `0·a = 0`, `1·a = a`, `a ± 0 = a`,
/// `a/1 = a`, `0/a = 0` and `−(−a) = a`. Bottom-up, so a result of `Const(0)`
/// is a structural zero.
pub fn simplify(e: &RExpr) -> RExpr {
    match e {
        RExpr::Const(_) | RExpr::Slot(_) => e.clone(),
        RExpr::Neg(a) => match simplify(a) {
            RExpr::Const(v) => c(-v),
            RExpr::Neg(inner) => *inner,
            s => RExpr::Neg(Box::new(s)),
        },
        RExpr::Bin(op, a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
                return c(RExpr::Bin(*op, Box::new(c(x)), Box::new(c(y))).eval(&[]));
            }
            match op {
                BinOp::Add if is(&a, 0.0) => b,
                BinOp::Add if is(&b, 0.0) => a,
                BinOp::Sub if is(&b, 0.0) => a,
                BinOp::Sub if is(&a, 0.0) => simplify(&RExpr::Neg(Box::new(b))),
                BinOp::Mul if is(&a, 0.0) || is(&b, 0.0) => c(0.0),
                BinOp::Mul if is(&a, 1.0) => b,
                BinOp::Mul if is(&b, 1.0) => a,
                BinOp::Div if is(&a, 0.0) => c(0.0),
                BinOp::Div if is(&b, 1.0) => a,
                _ => bin(*op, a, b),
            }
        }
        RExpr::Call(f, args) => {
            let args: alloc::vec::Vec<RExpr> = args.iter().map(simplify).collect();
            if args.iter().all(|a| a.as_const().is_some()) {
                return c(RExpr::Call(*f, args).eval(&[]));
            }
            RExpr::Call(*f, args)
        }
    }
}

/// Replaces every slot for which `pred` holds with a constant zero.
pub fn zero_slots(e: &RExpr, pred: &impl Fn(usize) -> bool) -> RExpr {
    match e {
        RExpr::Slot(s) if pred(*s) => c(0.0),
        RExpr::Const(_) | RExpr::Slot(_) => e.clone(),
        RExpr::Neg(a) => RExpr::Neg(Box::new(zero_slots(a, pred))),
        RExpr::Bin(op, a, b) => bin(*op, zero_slots(a, pred), zero_slots(b, pred)),
        RExpr::Call(f, args) => RExpr::Call(*f, args.iter().map(|a| zero_slots(a, pred)).collect()),
    }
}

/// `∂e/∂slot`, simplified. Fails for functions without a usable derivative
/// (`abs`, `mod`) when their argument depends on `slot`.
pub fn diff(e: &RExpr, slot: usize) -> Result<RExpr, String> {
    Ok(simplify(&diff_raw(e, slot)?))
}

fn diff_raw(e: &RExpr, slot: usize) -> Result<RExpr, String> {
    if !e.reads(slot) {
        return Ok(c(0.0));
    }
    Ok(match e {
        RExpr::Const(_) => c(0.0),
        RExpr::Slot(s) => c(if *s == slot { 1.0 } else { 0.0 }),
        RExpr::Neg(a) => RExpr::Neg(Box::new(diff_raw(a, slot)?)),
        RExpr::Bin(op, a, b) => {
            let (da, db) = (diff_raw(a, slot)?, diff_raw(b, slot)?);
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add | BinOp::Sub => bin(*op, da, db),
                BinOp::Mul => bin(BinOp::Add, bin(BinOp::Mul, da, b), bin(BinOp::Mul, a, db)),
                // (a/b)' = a'/b − a·b'/b²
                BinOp::Div => bin(
                    BinOp::Sub,
                    bin(BinOp::Div, da, b.clone()),
                    bin(BinOp::Div, bin(BinOp::Mul, a, db), bin(BinOp::Mul, b.clone(), b)),
                ),
            }
        }
        RExpr::Call(f, args) => {
            let a = args[0].clone();
            let da = diff_raw(&a, slot)?;
            let chain = |outer: RExpr| bin(BinOp::Mul, outer, da.clone());
            match f {
                Func::Exp => chain(e.clone()),
                Func::Log => bin(BinOp::Div, da.clone(), a),
                Func::Sqrt => bin(BinOp::Div, da.clone(), bin(BinOp::Mul, c(2.0), e.clone())),
                Func::Sin => chain(RExpr::Call(Func::Cos, vec![a])),
                Func::Cos => chain(RExpr::Neg(Box::new(RExpr::Call(Func::Sin, vec![a])))),
                Func::Pow => {
                    let b = args[1].clone();
                    let db = diff_raw(&b, slot)?;
                    // d(a^b) = b·a^(b−1)·a' + a^b·log(a)·b'
                    let base_term = bin(
                        BinOp::Mul,
                        bin(
                            BinOp::Mul,
                            b.clone(),
                            RExpr::Call(Func::Pow, vec![a.clone(), bin(BinOp::Sub, b, c(1.0))]),
                        ),
                        da.clone(),
                    );
                    if is(&simplify(&db), 0.0) {
                        base_term
                    } else {
                        let exp_term = bin(BinOp::Mul, bin(BinOp::Mul, e.clone(), RExpr::Call(Func::Log, vec![a])), db);
                        bin(BinOp::Add, base_term, exp_term)
                    }
                }
                Func::Abs | Func::Mod => return Err(format!("{} is not differentiable here", f.name())),
            }
        }
    })
}
