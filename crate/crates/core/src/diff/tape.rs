//! Wengert-list tape for reverse-mode differentiation.
//!
//! Every primitive operation on a [`Var`] pushes exactly one node holding the
//! ids of its parents and the local partial derivative with respect to each.
//! [`Tape::backward`] then sweeps the list once in reverse order, which is a
//! valid reverse topological order because parents are always recorded before
//! their children.

use std::cell::{Cell, RefCell};
use std::fmt;

use super::DiffError;

#[derive(Clone, Copy)]
struct Node {
    start: u32,
    len: u32,
}

#[derive(Default)]
struct TapeData {
    nodes: Vec<Node>,
    parents: Vec<u32>,
    partials: Vec<f64>,
}

/// Records operations on [`Var`]s for a single reverse sweep.
///
/// A tape is confined to one thread. Independent optimizations use
/// independent tapes.
#[derive(Default)]
pub struct Tape {
    data: RefCell<TapeData>,
    biased: Cell<usize>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        let tape = Self::default();
        {
            let mut d = tape.data.borrow_mut();
            d.nodes.reserve(nodes);
            d.parents.reserve(2 * nodes);
            d.partials.reserve(2 * nodes);
        }
        tape
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.data.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of nodes recorded through a deliberately biased derivative
    /// rule (the leaky branch of [`Var::leaky_min_zero`] with `alpha > 0`).
    pub fn biased_nodes(&self) -> usize {
        self.biased.get()
    }

    /// Drops all recorded nodes. Requires exclusive access, so no variable
    /// from the previous recording can outlive the reset.
    pub fn clear(&mut self) {
        let d = self.data.get_mut();
        d.nodes.clear();
        d.parents.clear();
        d.partials.clear();
        self.biased.set(0);
    }

    /// Creates an independent input.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(&[]);
        Var { tape: Some(self), index, value }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub(crate) fn mark_biased(&self) {
        self.biased.set(self.biased.get() + 1);
    }

    pub(crate) fn push(&self, deps: &[(u32, f64)]) -> u32 {
        let mut d = self.data.borrow_mut();
        let index = d.nodes.len() as u32;
        let start = d.parents.len() as u32;
        for &(p, w) in deps {
            d.parents.push(p);
            d.partials.push(w);
        }
        d.nodes.push(Node { start, len: deps.len() as u32 });
        index
    }

    /// Propagates adjoints from `output` back to every recorded node.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients, DiffError> {
        let tape = output.tape.ok_or(DiffError::ForeignVariable)?;
        if !std::ptr::eq(tape, self) {
            return Err(DiffError::ForeignVariable);
        }
        let d = self.data.borrow();
        let n = output.index as usize + 1;
        let mut adjoints = vec![0.0; d.nodes.len()];
        adjoints[output.index as usize] = 1.0;
        for i in (0..n).rev() {
            let a = adjoints[i];
            if a == 0.0 {
                continue;
            }
            let node = d.nodes[i];
            let s = node.start as usize;
            for k in s..s + node.len as usize {
                adjoints[d.parents[k] as usize] += a * d.partials[k];
            }
        }
        Ok(Gradients { adjoints })
    }
}

/// Adjoints produced by one reverse sweep, indexed by node id.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    /// d(output)/d(v). Constants have zero gradient.
    pub fn get(&self, v: Var<'_>) -> f64 {
        match v.tape {
            Some(_) => self.adjoints.get(v.index as usize).copied().unwrap_or(0.0),
            None => 0.0,
        }
    }

    pub fn wrt(&self, vars: &[Var<'_>]) -> Vec<f64> {
        vars.iter().map(|&v| self.get(v)).collect()
    }

    pub fn by_id(&self, id: usize) -> f64 {
        self.adjoints.get(id).copied().unwrap_or(0.0)
    }
}

/// A scalar that records its derivation on a [`Tape`].
///
/// Values not attached to a tape are constants: operating on them records
/// nothing and their gradient is zero.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: Option<&'t Tape>,
    pub(crate) index: u32,
    pub(crate) value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tape {
            Some(_) => write!(f, "Var#{}({})", self.index, self.value),
            None => write!(f, "Const({})", self.value),
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(value: f64) -> Self {
        Var { tape: None, index: u32::MAX, value }
    }

    pub fn value(self) -> f64 {
        self.value
    }

    /// Node id on the owning tape, `None` for constants.
    pub fn id(self) -> Option<usize> {
        self.tape.map(|_| self.index as usize)
    }

    pub fn is_constant(self) -> bool {
        self.tape.is_none()
    }

    pub(crate) fn unary(self, value: f64, d: f64) -> Self {
        match self.tape {
            Some(t) => Var { tape: Some(t), index: t.push(&[(self.index, d)]), value },
            None => Var::constant(value),
        }
    }

    pub(crate) fn binary(self, other: Self, value: f64, da: f64, db: f64) -> Self {
        match (self.tape, other.tape) {
            (Some(t), Some(u)) => {
                debug_assert!(std::ptr::eq(t, u), "mixing variables from two tapes");
                let index = t.push(&[(self.index, da), (other.index, db)]);
                Var { tape: Some(t), index, value }
            }
            (Some(_), None) => self.unary(value, da),
            (None, Some(_)) => other.unary(value, db),
            (None, None) => Var::constant(value),
        }
    }

    /// One node with an arbitrary number of parents and caller-supplied
    /// partials. This is how custom derivative rules enter the tape.
    pub fn custom(value: f64, deps: &[(Var<'t>, f64)]) -> Self {
        let tape = deps.iter().find_map(|(v, _)| v.tape);
        match tape {
            Some(t) => {
                let mut buf = [(0u32, 0.0f64); 8];
                let recorded: Vec<(u32, f64)>;
                let slice: &[(u32, f64)] = if deps.len() <= buf.len() {
                    let mut n = 0;
                    for (v, w) in deps {
                        if v.tape.is_some() {
                            buf[n] = (v.index, *w);
                            n += 1;
                        }
                    }
                    &buf[..n]
                } else {
                    recorded = deps
                        .iter()
                        .filter(|(v, _)| v.tape.is_some())
                        .map(|(v, w)| (v.index, *w))
                        .collect();
                    &recorded
                };
                Var { tape: Some(t), index: t.push(slice), value }
            }
            None => Var::constant(value),
        }
    }

    /// `min(x, 0)` whose recorded derivative is 1 for `x < 0` and `alpha`
    /// otherwise.
    pub fn leaky_min_zero(self, alpha: f64) -> Self {
        if self.value < 0.0 {
            self.unary(self.value, 1.0)
        } else {
            if alpha > 0.0 {
                if let Some(t) = self.tape {
                    t.mark_biased();
                }
            }
            self.unary(0.0, alpha)
        }
    }
}
