//! The validated, executable form of a model.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use super::dist::DistKind;
use super::expr::Compiled;
use crate::lang::{BlockName, ConstDecl, DimDecl, Role};

/// A declared variable and where its elements live in the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct VarInfo {
    pub name: String,
    pub role: Role,
    /// Indices into [`ModelIr::dims`].
    pub dims: Vec<usize>,
    pub shape: Vec<usize>,
    /// First frame slot of the variable; elements are row-major.
    pub offset: usize,
    pub len: usize,
}

impl VarInfo {
    pub fn slot(&self, index: &[usize]) -> usize {
        let mut flat = 0;
        for (i, n) in index.iter().zip(&self.shape) {
            flat = flat * n + i;
        }
        self.offset + flat
    }

    /// `x`, `x[3]` or `A[1,2]` for the element at `flat` within the variable.
    pub fn element_name(&self, flat: usize) -> String {
        if self.shape.is_empty() {
            return self.name.clone();
        }
        let mut idx = Vec::with_capacity(self.shape.len());
        let mut rest = flat;
        for n in self.shape.iter().rev() {
            idx.push(rest % n);
            rest /= n;
        }
        idx.reverse();
        let parts: Vec<String> = idx.iter().map(|i| format!("{i}")).collect();
        format!("{}[{}]", self.name, parts.join(","))
    }
}

/// One element of a distribution statement.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleElem {
    pub slot: usize,
    /// Arguments in the distribution's canonical order, defaults filled in.
    pub args: Vec<Compiled>,
}

/// One element of an assignment, or one ODE right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignElem {
    pub slot: usize,
    pub rhs: Compiled,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtIr {
    Sample {
        var: usize,
        kind: DistKind,
        elems: Vec<SampleElem>,
    },
    Assign {
        var: usize,
        elems: Vec<AssignElem>,
    },
    /// A system `dx/dt = f(x)` integrated with classic RK4 at step `h`.
    Ode { h: f64, eqs: Vec<AssignElem> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockIr {
    pub name: BlockName,
    pub present: bool,
    pub stmts: Vec<StmtIr>,
}

/// A validated model lowered onto a flat frame of slots laid out as
/// `[params | inputs | noise | states | obs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelIr {
    pub name: String,
    pub dims: Vec<DimDecl>,
    pub consts: Vec<ConstDecl>,
    pub vars: Vec<VarInfo>,
    /// Transition time step.
    pub delta: f64,
    pub(crate) offsets: [usize; 5],
    pub(crate) counts: [usize; 5],
    pub(crate) blocks: Vec<BlockIr>,
}

pub(crate) fn role_index(role: Role) -> usize {
    match role {
        Role::Param => 0,
        Role::Input => 1,
        Role::Noise => 2,
        Role::State => 3,
        Role::Obs => 4,
    }
}

impl ModelIr {
    pub fn count(&self, role: Role) -> usize {
        self.counts[role_index(role)]
    }

    /// Frame slots belonging to `role`.
    pub fn range(&self, role: Role) -> Range<usize> {
        let i = role_index(role);
        self.offsets[i]..self.offsets[i] + self.counts[i]
    }

    pub fn frame_len(&self) -> usize {
        self.counts.iter().sum()
    }

    /// A zeroed frame.
    pub fn frame(&self) -> Vec<f64> {
        alloc::vec![0.0; self.frame_len()]
    }

    pub fn block(&self, name: BlockName) -> &BlockIr {
        &self.blocks[BlockName::ALL.iter().position(|b| *b == name).unwrap_or(0)]
    }

    pub fn has_block(&self, name: BlockName) -> bool {
        self.block(name).present
    }

    pub fn var(&self, name: &str) -> Option<&VarInfo> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn vars_with_role(&self, role: Role) -> impl Iterator<Item = &VarInfo> {
        self.vars.iter().filter(move |v| v.role == role)
    }

    pub fn var_of_slot(&self, slot: usize) -> Option<&VarInfo> {
        self.vars.iter().find(|v| slot >= v.offset && slot < v.offset + v.len)
    }

    pub fn slot_name(&self, slot: usize) -> String {
        match self.var_of_slot(slot) {
            Some(v) => v.element_name(slot - v.offset),
            None => format!("#{slot}"),
        }
    }

    /// Element names of every slot of `role`, in slot order.
    pub fn slot_names(&self, role: Role) -> Vec<String> {
        self.range(role).map(|s| self.slot_name(s)).collect()
    }
}
