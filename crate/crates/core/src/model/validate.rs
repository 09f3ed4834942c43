//! Checks the role rules of a parsed model and lowers it to a [`ModelIr`].

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::dist::DistKind;
use super::expr::{Compiled, Func, RExpr};
use super::ir::{role_index, AssignElem, BlockIr, ModelIr, SampleElem, StmtIr, VarInfo};
use crate::error::Diagnostics;
use crate::lang::*;

/// Validates `ast`, returning either the lowered model or every problem
/// found.
pub fn validate_model(ast: &ModelAst) -> Result<ModelIr, Diagnostics> {
    let mut cx = Lowering::new(ast);
    let blocks: Vec<BlockIr> = BlockName::ALL.iter().map(|&b| cx.block(b)).collect();
    cx.check_coverage(&blocks);
    let delta = cx.delta();
    if !cx.diags.is_empty() {
        return Err(cx.diags);
    }
    Ok(ModelIr {
        name: ast.name.clone(),
        dims: ast.dims.clone(),
        consts: ast.consts.clone(),
        vars: cx.vars,
        delta,
        offsets: cx.offsets,
        counts: cx.counts,
        blocks,
    })
}

struct Lowering<'a> {
    ast: &'a ModelAst,
    vars: Vec<VarInfo>,
    offsets: [usize; 5],
    counts: [usize; 5],
    diags: Diagnostics,
}

/// Which roles a block may read.
fn readable(block: BlockName, role: Role) -> bool {
    use BlockName::*;
    match role {
        Role::Param => true,
        Role::Input => !matches!(block, Parameter | ProposalParameter),
        Role::State => !matches!(block, Parameter | ProposalParameter),
        Role::Noise => block == Transition,
        Role::Obs => false,
    }
}

impl<'a> Lowering<'a> {
    fn new(ast: &'a ModelAst) -> Self {
        let mut diags = Diagnostics::default();
        let mut counts = [0usize; 5];
        let mut shapes = Vec::new();
        for v in &ast.vars {
            let mut dims = Vec::new();
            let mut shape = Vec::new();
            for d in &v.dims {
                match ast.dims.iter().position(|x| &x.name == d) {
                    Some(i) => {
                        dims.push(i);
                        shape.push(ast.dims[i].size);
                    }
                    None => diags.push(&v.name, "", format!("{} {} uses undeclared dim {d}", v.role, v.name)),
                }
            }
            let len = shape.iter().product::<usize>();
            counts[role_index(v.role)] += len;
            shapes.push((dims, shape, len));
        }
        let mut offsets = [0usize; 5];
        for i in 1..5 {
            offsets[i] = offsets[i - 1] + counts[i - 1];
        }
        let mut next = offsets;
        let vars = ast
            .vars
            .iter()
            .zip(shapes)
            .map(|(v, (dims, shape, len))| {
                let r = role_index(v.role);
                let offset = next[r];
                next[r] += len;
                VarInfo {
                    name: v.name.clone(),
                    role: v.role,
                    dims,
                    shape,
                    offset,
                    len,
                }
            })
            .collect();
        Lowering {
            ast,
            vars,
            offsets,
            counts,
            diags,
        }
    }

    fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    fn const_value(&self, name: &str) -> Option<f64> {
        self.ast.consts.iter().find(|c| c.name == name).map(|c| c.value)
    }

    fn dim_index(&self, name: &str) -> Option<usize> {
        self.ast.dims.iter().position(|d| d.name == name)
    }

    /// Evaluates an expression that may only involve literals and consts.
    fn constant(&mut self, e: &Expr, what: &str, block: BlockName) -> Option<f64> {
        let mut cx = ExprCx {
            block,
            loops: &BTreeMap::new(),
            constant_only: true,
        };
        let before = self.diags.0.len();
        let r = self.expr(e, &mut cx);
        if self.diags.0.len() != before {
            return None;
        }
        match r.as_const() {
            Some(v) if v.is_finite() => Some(v),
            _ => {
                self.diags.push(what, block.as_str(), format!("{what} must be a finite constant"));
                None
            }
        }
    }

    fn delta(&mut self) -> f64 {
        let Some(b) = self.ast.block(BlockName::Transition) else {
            return 1.0;
        };
        match b.arg("delta") {
            Some(ArgValue::Expr(e)) => match self.constant(e, "delta", BlockName::Transition) {
                Some(v) if v > 0.0 => v,
                Some(_) => {
                    self.diags.push("delta", "transition", "delta must be positive".into());
                    1.0
                }
                None => 1.0,
            },
            Some(ArgValue::Str(_)) => {
                self.diags.push("delta", "transition", "delta must be a number".into());
                1.0
            }
            None => 1.0,
        }
    }

    fn block(&mut self, name: BlockName) -> BlockIr {
        let Some(b) = self.ast.block(name) else {
            return BlockIr {
                name,
                present: false,
                stmts: Vec::new(),
            };
        };
        for a in &b.args {
            if !(name == BlockName::Transition && a.name == "delta") {
                self.diags.push(&a.name, name.as_str(), format!("unknown argument {} of block {name}", a.name));
            }
        }
        let mut stmts = Vec::new();
        for s in &b.statements {
            if let Some(ir) = self.statement(s, name) {
                stmts.push(ir);
            }
        }
        BlockIr {
            name,
            present: true,
            stmts,
        }
    }

    /// Every assignment of loop variables for a statement whose left-hand
    /// side is `lhs`, in declaration order of the dims.
    fn loops(&mut self, lhs: &VarRef, block: BlockName) -> Option<Vec<BTreeMap<String, usize>>> {
        let mut dims: Vec<usize> = Vec::new();
        for idx in &lhs.indices {
            if let IndexExpr::Dim { name, .. } = idx {
                match self.dim_index(name) {
                    Some(d) if !dims.contains(&d) => dims.push(d),
                    Some(_) => {}
                    None => {
                        self.diags.push(&lhs.name, block.as_str(), format!("unknown index {name} on {}", lhs.name));
                        return None;
                    }
                }
            }
        }
        dims.sort_unstable();
        let mut out = vec![BTreeMap::new()];
        for d in dims {
            let decl = &self.ast.dims[d];
            let mut next = Vec::with_capacity(out.len() * decl.size);
            for env in &out {
                for i in 0..decl.size {
                    let mut e = env.clone();
                    e.insert(decl.name.clone(), i);
                    next.push(e);
                }
            }
            out = next;
        }
        Some(out)
    }

    /// Resolves a reference to a concrete element, given loop values.
    fn element(&mut self, r: &VarRef, loops: &BTreeMap<String, usize>, block: BlockName) -> Option<(usize, usize)> {
        let Some(vi) = self.var_index(&r.name) else {
            self.diags.push(&r.name, block.as_str(), format!("unknown variable {}", r.name));
            return None;
        };
        let var = &self.vars[vi];
        if r.indices.len() != var.shape.len() {
            let msg = format!(
                "{} {} has {} dimension(s) but is indexed with {}",
                var.role,
                var.name,
                var.shape.len(),
                r.indices.len()
            );
            self.diags.push(&r.name, block.as_str(), msg);
            return None;
        }
        let mut index = Vec::with_capacity(r.indices.len());
        for (k, ix) in r.indices.iter().enumerate() {
            let dim = &self.ast.dims[var.dims[k]];
            let raw: i64 = match ix {
                IndexExpr::Literal(i) => *i,
                IndexExpr::Dim { name, offset } => match loops.get(name) {
                    Some(&v) => v as i64 + offset,
                    None => {
                        let msg = format!("index {name} on {} is not bound by the left-hand side", r.name);
                        self.diags.push(&r.name, block.as_str(), msg);
                        return None;
                    }
                },
            };
            let n = dim.size as i64;
            let i = match dim.boundary {
                Boundary::Cyclic => raw.rem_euclid(n),
                Boundary::None if (0..n).contains(&raw) => raw,
                Boundary::None => {
                    let msg = format!("index {raw} out of range for {} (dim {} has size {n})", r.name, dim.name);
                    self.diags.push(&r.name, block.as_str(), msg);
                    return None;
                }
            };
            index.push(i as usize);
        }
        let var = &self.vars[vi];
        Some((vi, var.slot(&index)))
    }

    fn statement(&mut self, s: &Statement, block: BlockName) -> Option<StmtIr> {
        match s {
            Statement::Sample { lhs, dist } => self.sample(lhs, dist, block),
            Statement::Assign { lhs, rhs } => {
                let vi = self.check_lhs(lhs, block, false)?;
                if matches!(block, BlockName::ProposalParameter | BlockName::ProposalInitial) {
                    self.diags.push(&lhs.name, block.as_str(), format!("{block} may only contain distribution statements"));
                    return None;
                }
                let mut elems = Vec::new();
                for env in self.loops(lhs, block)? {
                    let (_, slot) = self.element(lhs, &env, block)?;
                    let mut cx = ExprCx {
                        block,
                        loops: &env,
                        constant_only: false,
                    };
                    let rhs = self.expr(rhs, &mut cx);
                    elems.push(AssignElem {
                        slot,
                        rhs: Compiled::new(rhs),
                    });
                }
                Some(StmtIr::Assign { var: vi, elems })
            }
            Statement::Ode { args, equations } => {
                if block != BlockName::Transition {
                    self.diags.push("ode", block.as_str(), "ode block outside transition".into());
                    return None;
                }
                let mut h = None;
                for a in args {
                    match (a.name.as_str(), &a.value) {
                        ("h", ArgValue::Expr(e)) => h = self.constant(e, "h", block),
                        ("alg", ArgValue::Str(s)) if s.eq_ignore_ascii_case("rk4") => {}
                        ("alg", _) => {
                            self.diags.push("alg", block.as_str(), "unsupported ode algorithm (only 'RK4')".into());
                        }
                        (other, _) => {
                            self.diags.push(other, block.as_str(), format!("unknown ode argument {other}"));
                        }
                    }
                }
                let h = match h {
                    Some(h) if h > 0.0 => h,
                    Some(_) => {
                        self.diags.push("h", block.as_str(), "ode step h must be positive".into());
                        return None;
                    }
                    None => {
                        self.diags.push("h", block.as_str(), "ode block requires a step size h".into());
                        return None;
                    }
                };
                let mut eqs: Vec<AssignElem> = Vec::new();
                for eq in equations {
                    let Some(vi) = self.var_index(&eq.lhs.name) else {
                        self.diags.push(&eq.lhs.name, block.as_str(), format!("unknown variable {}", eq.lhs.name));
                        continue;
                    };
                    if self.vars[vi].role != Role::State {
                        let v = &self.vars[vi];
                        let msg = format!("{} {} cannot appear in an ode block", v.role, v.name);
                        self.diags.push(&eq.lhs.name, block.as_str(), msg);
                        continue;
                    }
                    let Some(envs) = self.loops(&eq.lhs, block) else { continue };
                    for env in envs {
                        let Some((_, slot)) = self.element(&eq.lhs, &env, block) else { continue };
                        if eqs.iter().any(|e| e.slot == slot) {
                            let msg = format!("state {} has more than one equation", eq.lhs.name);
                            self.diags.push(&eq.lhs.name, block.as_str(), msg);
                        }
                        let mut cx = ExprCx {
                            block,
                            loops: &env,
                            constant_only: false,
                        };
                        let rhs = self.expr(&eq.rhs, &mut cx);
                        eqs.push(AssignElem {
                            slot,
                            rhs: Compiled::new(rhs),
                        });
                    }
                }
                Some(StmtIr::Ode { h, eqs })
            }
        }
    }

    /// Applies the role rules for a left-hand side.
    fn check_lhs(&mut self, lhs: &VarRef, block: BlockName, sampled: bool) -> Option<usize> {
        let Some(vi) = self.var_index(&lhs.name) else {
            self.diags.push(&lhs.name, block.as_str(), format!("unknown variable {}", lhs.name));
            return None;
        };
        let role = self.vars[vi].role;
        let name = &lhs.name;
        let b = block.as_str();
        use BlockName::*;
        let msg = match (role, block) {
            (Role::Input, _) => Some(format!("input {name} cannot be assigned")),
            (Role::Param, Parameter | ProposalParameter) if sampled => None,
            (Role::Param, Parameter | ProposalParameter) => Some(format!("param {name} must be sampled, not assigned")),
            (Role::Param, _) => Some(format!("param {name} sampled outside parameter")),
            (Role::State, Initial) => None,
            (Role::State, ProposalInitial) if sampled => None,
            (Role::State, Transition) if !sampled => None,
            (Role::State, Transition) => Some(format!("state {name} must be defined by assignment or ode in transition")),
            (Role::State, _) => Some(format!("state {name} defined outside initial and transition")),
            (Role::Noise, Transition) if sampled => None,
            (Role::Noise, Transition) => Some(format!("noise {name} must be sampled, not assigned")),
            (Role::Noise, _) => Some(format!("noise {name} sampled outside transition")),
            (Role::Obs, Observation) if sampled => None,
            (Role::Obs, Observation) => Some(format!("obs {name} must be sampled, not assigned")),
            (Role::Obs, _) => Some(format!("obs {name} sampled outside observation")),
        };
        match msg {
            Some(m) => {
                self.diags.push(name, b, m);
                None
            }
            None => Some(vi),
        }
    }

    fn sample(&mut self, lhs: &VarRef, dist: &DistCall, block: BlockName) -> Option<StmtIr> {
        let vi = self.check_lhs(lhs, block, true);
        let Some(kind) = DistKind::from_name(&dist.name) else {
            self.diags.push(&lhs.name, block.as_str(), format!("unknown distribution {}", dist.name));
            return None;
        };
        if kind == DistKind::Wiener && block != BlockName::Transition {
            self.diags.push(&lhs.name, block.as_str(), "wiener() is only available in transition".into());
            return None;
        }
        // Canonical argument order: positional first, then named slots.
        let names = kind.params();
        let mut slots: Vec<Option<&Expr>> = vec![None; names.len()];
        let mut ok = true;
        let mut positional = 0;
        for a in &dist.args {
            match a {
                Arg::Positional(e) => {
                    if positional < slots.len() {
                        slots[positional] = Some(e);
                    } else {
                        ok = false;
                    }
                    positional += 1;
                }
                Arg::Named(n, e) => match names.iter().position(|x| x == n) {
                    Some(i) if slots[i].is_none() => slots[i] = Some(e),
                    Some(_) => {
                        self.diags.push(&lhs.name, block.as_str(), format!("argument {n} of {} given twice", dist.name));
                        return None;
                    }
                    None => {
                        self.diags.push(&lhs.name, block.as_str(), format!("{} has no argument {n}", dist.name));
                        return None;
                    }
                },
            }
        }
        if !ok || slots[..kind.required()].iter().any(|s| s.is_none()) {
            let msg = if kind.required() == names.len() {
                format!("{} expects {} argument(s), got {}", dist.name, names.len(), dist.args.len())
            } else {
                format!("{} expects {} to {} arguments, got {}", dist.name, kind.required(), names.len(), dist.args.len())
            };
            self.diags.push(&lhs.name, block.as_str(), msg);
            return None;
        }
        let vi = vi?;
        let mut elems = Vec::new();
        for env in self.loops(lhs, block)? {
            let (_, slot) = self.element(lhs, &env, block)?;
            let mut cx = ExprCx {
                block,
                loops: &env,
                constant_only: false,
            };
            let args = slots
                .iter()
                .enumerate()
                .map(|(i, s)| match s {
                    Some(e) => Compiled::new(self.expr(e, &mut cx)),
                    None => Compiled::new(RExpr::Const(kind.default_param(i))),
                })
                .collect();
            elems.push(SampleElem { slot, args });
        }
        Some(StmtIr::Sample { var: vi, kind, elems })
    }

    fn expr(&mut self, e: &Expr, cx: &mut ExprCx<'_>) -> RExpr {
        match e {
            Expr::Number(x) => RExpr::Const(*x),
            Expr::Neg(a) => match self.expr(a, cx) {
                RExpr::Const(c) => RExpr::Const(-c),
                r => RExpr::Neg(Box::new(r)),
            },
            Expr::Binary { op, lhs, rhs } => {
                let a = self.expr(lhs, cx);
                let b = self.expr(rhs, cx);
                match (&a, &b) {
                    (RExpr::Const(x), RExpr::Const(y)) => RExpr::Const(match op {
                        BinOp::Add => x + y,
                        BinOp::Sub => x - y,
                        BinOp::Mul => x * y,
                        BinOp::Div => x / y,
                    }),
                    _ => RExpr::Bin(*op, Box::new(a), Box::new(b)),
                }
            }
            Expr::Call { func, args } => {
                let b = cx.block.as_str();
                let Some(f) = Func::from_name(func) else {
                    self.diags.push(func, b, format!("unknown function {func}"));
                    return RExpr::Const(f64::NAN);
                };
                if args.len() != f.arity() {
                    let msg = format!("function {func} expects {} argument(s), got {}", f.arity(), args.len());
                    self.diags.push(func, b, msg);
                    return RExpr::Const(f64::NAN);
                }
                let args: Vec<RExpr> = args.iter().map(|a| self.expr(a, cx)).collect();
                match args.as_slice() {
                    [RExpr::Const(x)] => RExpr::Const(f.apply1(*x)),
                    [RExpr::Const(x), RExpr::Const(y)] => RExpr::Const(f.apply2(*x, *y)),
                    _ => RExpr::Call(f, args),
                }
            }
            Expr::Var(r) => self.reference(r, cx),
        }
    }

    fn reference(&mut self, r: &VarRef, cx: &mut ExprCx<'_>) -> RExpr {
        let b = cx.block.as_str();
        if r.indices.is_empty() {
            if let Some(c) = self.const_value(&r.name) {
                return RExpr::Const(c);
            }
            if self.dim_index(&r.name).is_some() {
                return match cx.loops.get(&r.name) {
                    Some(&i) => RExpr::Const(i as f64),
                    None => {
                        self.diags.push(&r.name, b, format!("index {} is not bound by the left-hand side", r.name));
                        RExpr::Const(f64::NAN)
                    }
                };
            }
        }
        let Some(vi) = self.var_index(&r.name) else {
            self.diags.push(&r.name, b, format!("unknown variable {}", r.name));
            return RExpr::Const(f64::NAN);
        };
        let role = self.vars[vi].role;
        if cx.constant_only {
            self.diags.push(&r.name, b, format!("{role} {} used where a constant is required", r.name));
            return RExpr::Const(f64::NAN);
        }
        if !readable(cx.block, role) {
            self.diags.push(&r.name, b, format!("{role} {} cannot be read in {}", r.name, cx.block));
            return RExpr::Const(f64::NAN);
        }
        match self.element(r, cx.loops, cx.block) {
            Some((_, slot)) => RExpr::Slot(slot),
            None => RExpr::Const(f64::NAN),
        }
    }

    /// Which slots each block defines, and whether that covers what the
    /// role rules demand.
    fn check_coverage(&mut self, blocks: &[BlockIr]) {
        let written = |b: &BlockIr| -> BTreeMap<usize, usize> {
            let mut m = BTreeMap::new();
            for s in &b.stmts {
                match s {
                    StmtIr::Sample { elems, .. } => elems.iter().for_each(|e| *m.entry(e.slot).or_insert(0) += 1),
                    StmtIr::Assign { elems, .. } => elems.iter().for_each(|e| *m.entry(e.slot).or_insert(0) += 1),
                    StmtIr::Ode { eqs, .. } => eqs.iter().for_each(|e| *m.entry(e.slot).or_insert(0) += 1),
                }
            }
            m
        };
        let sampled = |b: &BlockIr| -> BTreeMap<usize, usize> {
            let mut m = BTreeMap::new();
            for s in &b.stmts {
                if let StmtIr::Sample { elems, .. } = s {
                    elems.iter().for_each(|e| *m.entry(e.slot).or_insert(0) += 1);
                }
            }
            m
        };
        let by_name = |n: BlockName| &blocks[BlockName::ALL.iter().position(|b| *b == n).unwrap_or(0)];
        let param_w = written(by_name(BlockName::Parameter));
        let init_w = written(by_name(BlockName::Initial));
        let trans_w = written(by_name(BlockName::Transition));
        let obs_w = written(by_name(BlockName::Observation));
        let init_s = sampled(by_name(BlockName::Initial));

        let vars = self.vars.clone();
        for v in &vars {
            let slots = v.offset..v.offset + v.len;
            let missing = |m: &BTreeMap<usize, usize>| -> Option<String> {
                let absent: Vec<usize> = slots.clone().filter(|s| !m.contains_key(s)).collect();
                if absent.is_empty() {
                    None
                } else if absent.len() == v.len {
                    Some(v.name.clone())
                } else {
                    Some(v.element_name(absent[0] - v.offset))
                }
            };
            let repeated = |m: &BTreeMap<usize, usize>| slots.clone().any(|s| m.get(&s).copied().unwrap_or(0) > 1);
            match v.role {
                Role::Param => {
                    if let Some(n) = missing(&param_w) {
                        self.diags.push(&v.name, "parameter", format!("param {n} not sampled in parameter"));
                    }
                    if repeated(&param_w) {
                        self.diags.push(&v.name, "parameter", format!("param {} sampled more than once in parameter", v.name));
                    }
                }
                Role::State => {
                    if let Some(n) = missing(&init_w) {
                        self.diags.push(&v.name, "initial", format!("state {n} not defined in initial"));
                    }
                    if let Some(n) = missing(&trans_w) {
                        self.diags.push(&v.name, "transition", format!("state {n} not defined in transition"));
                    }
                }
                Role::Obs => {
                    if let Some(n) = missing(&obs_w) {
                        self.diags.push(&v.name, "observation", format!("obs {n} not sampled in observation"));
                    }
                    if repeated(&obs_w) {
                        let msg = format!("obs {} sampled more than once in observation", v.name);
                        self.diags.push(&v.name, "observation", msg);
                    }
                }
                Role::Input | Role::Noise => {}
            }
        }

        // proposal blocks sample exactly what their targets sample
        for (prop, target, target_set) in [
            (BlockName::ProposalParameter, BlockName::Parameter, &param_w),
            (BlockName::ProposalInitial, BlockName::Initial, &init_s),
        ] {
            let pb = by_name(prop);
            if !pb.present {
                continue;
            }
            let ps = sampled(pb);
            for v in &vars {
                let slots = v.offset..v.offset + v.len;
                for s in slots {
                    let in_target = target_set.contains_key(&s);
                    let in_prop = ps.contains_key(&s);
                    let name = v.element_name(s - v.offset);
                    if in_target && !in_prop {
                        self.diags.push(&v.name, prop.as_str(), format!("{} {name} sampled in {target} but not in {prop}", v.role));
                        break;
                    }
                    if in_prop && !in_target {
                        self.diags.push(&v.name, prop.as_str(), format!("{} {name} sampled in {prop} but not in {target}", v.role));
                        break;
                    }
                    if ps.get(&s).copied().unwrap_or(0) > 1 {
                        self.diags.push(&v.name, prop.as_str(), format!("{} {name} sampled more than once in {prop}", v.role));
                        break;
                    }
                }
            }
        }
    }
}

struct ExprCx<'a> {
    block: BlockName,
    loops: &'a BTreeMap<String, usize>,
    constant_only: bool,
}
