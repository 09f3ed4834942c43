//! Syntax tree for model files. Nodes carry no source positions so that
//! two trees compare equal whenever they mean the same thing.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelAst {
    pub name: String,
    pub dims: Vec<DimDecl>,
    pub consts: Vec<ConstDecl>,
    pub vars: Vec<VarDecl>,
    pub blocks: Vec<Block>,
}

impl ModelAst {
    pub fn block(&self, name: BlockName) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn block_mut(&mut self, name: BlockName) -> Option<&mut Block> {
        self.blocks.iter_mut().find(|b| b.name == name)
    }

    pub fn vars_with_role(&self, role: Role) -> impl Iterator<Item = &VarDecl> {
        self.vars.iter().filter(move |v| v.role == role)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    None,
    Cyclic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimDecl {
    pub name: String,
    pub size: usize,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Param,
    Input,
    Noise,
    State,
    Obs,
}

impl Role {
    pub const ALL: [Role; 5] = [Role::Param, Role::Input, Role::Noise, Role::State, Role::Obs];

    pub fn keyword(self) -> &'static str {
        match self {
            Role::Param => "param",
            Role::Input => "input",
            Role::Noise => "noise",
            Role::State => "state",
            Role::Obs => "obs",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.keyword() == s)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub role: Role,
    /// Names of the dimensions the variable extends over, outermost first.
    pub dims: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BlockName {
    Parameter,
    Initial,
    Transition,
    Observation,
    ProposalParameter,
    ProposalInitial,
}

impl BlockName {
    pub const ALL: [BlockName; 6] = [
        BlockName::Parameter,
        BlockName::Initial,
        BlockName::Transition,
        BlockName::Observation,
        BlockName::ProposalParameter,
        BlockName::ProposalInitial,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BlockName::Parameter => "parameter",
            BlockName::Initial => "initial",
            BlockName::Transition => "transition",
            BlockName::Observation => "observation",
            BlockName::ProposalParameter => "proposal_parameter",
            BlockName::ProposalInitial => "proposal_initial",
        }
    }

    pub fn from_name(s: &str) -> Option<BlockName> {
        BlockName::ALL.into_iter().find(|b| b.as_str() == s)
    }
}

impl fmt::Display for BlockName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: BlockName,
    pub args: Vec<NamedArg>,
    pub statements: Vec<Statement>,
}

impl Block {
    pub fn arg(&self, name: &str) -> Option<&ArgValue> {
        self.args.iter().find(|a| a.name == name).map(|a| &a.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArg {
    pub name: String,
    pub value: ArgValue,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArgValue {
    Expr(Expr),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    /// `lhs ~ dist(args...)`
    Sample { lhs: VarRef, dist: DistCall },
    /// `lhs <- expr`
    Assign { lhs: VarRef, rhs: Expr },
    /// `ode(h = ..., alg = 'RK4') { dx[n]/dt = ... }`
    Ode {
        args: Vec<NamedArg>,
        equations: Vec<OdeEquation>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeEquation {
    pub lhs: VarRef,
    pub rhs: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarRef {
    pub name: String,
    pub indices: Vec<IndexExpr>,
}

/// An index into a dimension: either a dimension variable with an integer
/// offset (`n`, `n-1`, `n+2`) or a literal position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexExpr {
    Dim { name: String, offset: i64 },
    Literal(i64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistCall {
    pub name: String,
    pub args: Vec<Arg>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Positional(Expr),
    Named(String, Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(VarRef),
    Neg(alloc::boxed::Box<Expr>),
    Binary {
        op: BinOp,
        lhs: alloc::boxed::Box<Expr>,
        rhs: alloc::boxed::Box<Expr>,
    },
    Call { func: String, args: Vec<Expr> },
}
