//! Minimal reverse-mode differentiation over scalars.
//!
//! Every operation appends one node holding its parents and the local
//! partial derivatives; `gradient` sweeps the list backwards. Values created
//! with [`Real::from_f64`] are constants and never touch the tape.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

use num_traits::{Num, One, Zero};

use super::Real;

#[derive(Default)]
struct Nodes {
    // parent range of node i is offsets[i]..offsets[i + 1]
    offsets: Vec<u32>,
    parents: Vec<u32>,
    partials: Vec<f64>,
}

pub struct Tape {
    nodes: RefCell<Nodes>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        let nodes = Nodes {
            offsets: vec![0],
            ..Nodes::default()
        };
        Self {
            nodes: RefCell::new(nodes),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// New independent variable.
    pub fn var(&self, val: f64) -> Var<'_> {
        let idx = self.push(std::iter::empty());
        Var {
            tape: Some(self),
            idx,
            val,
        }
    }

    pub fn vars(&self, vals: &[f64]) -> Vec<Var<'_>> {
        vals.iter().map(|&v| self.var(v)).collect()
    }

    fn push(&self, deps: impl Iterator<Item = (u32, f64)>) -> u32 {
        let mut n = self.nodes.borrow_mut();
        for (p, d) in deps {
            n.parents.push(p);
            n.partials.push(d);
        }
        let end = n.parents.len() as u32;
        n.offsets.push(end);
        (n.offsets.len() - 2) as u32
    }

    /// Adjoints of every node with respect to `output`.
    pub fn gradient(&self, output: Var<'_>) -> Gradient {
        let n = self.nodes.borrow();
        let count = n.offsets.len() - 1;
        let mut adj = vec![0.0; count];
        if output.tape.is_some() {
            adj[output.idx as usize] = 1.0;
            for i in (0..count).rev() {
                let a = adj[i];
                if a == 0.0 {
                    continue;
                }
                let (lo, hi) = (n.offsets[i] as usize, n.offsets[i + 1] as usize);
                for k in lo..hi {
                    adj[n.parents[k] as usize] += a * n.partials[k];
                }
            }
        }
        Gradient { adj }
    }
}

pub struct Gradient {
    adj: Vec<f64>,
}

impl Gradient {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        match v.tape {
            Some(_) => self.adj[v.idx as usize],
            None => 0.0,
        }
    }

    pub fn wrt_all(&self, vs: &[Var<'_>]) -> Vec<f64> {
        vs.iter().map(|&v| self.wrt(v)).collect()
    }
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl<'t> Var<'t> {
    pub fn constant(val: f64) -> Self {
        Self {
            tape: None,
            idx: 0,
            val,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.tape.is_none()
    }

    fn unary(self, val: f64, d: f64) -> Self {
        match self.tape {
            None => Self::constant(val),
            Some(t) => Self {
                tape: Some(t),
                idx: t.push(std::iter::once((self.idx, d))),
                val,
            },
        }
    }

    fn binary(self, other: Self, val: f64, da: f64, db: f64) -> Self {
        let tape = match (self.tape, other.tape) {
            (None, None) => return Self::constant(val),
            (Some(t), _) | (None, Some(t)) => t,
        };
        let deps = self
            .tape
            .map(|_| (self.idx, da))
            .into_iter()
            .chain(other.tape.map(|_| (other.idx, db)));
        Self {
            tape: Some(tape),
            idx: tape.push(deps),
            val,
        }
    }
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var({})", self.val)
    }
}

impl PartialEq for Var<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.val == other.val
    }
}

impl PartialOrd for Var<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.val.partial_cmp(&other.val)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.val / o.val;
        self.binary(o, q, 1.0 / o.val, -q / o.val)
    }
}

impl<'t> Rem for Var<'t> {
    type Output = Self;
    fn rem(self, o: Self) -> Self {
        self.binary(o, self.val % o.val, 1.0, -(self.val / o.val).trunc())
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl Zero for Var<'_> {
    fn zero() -> Self {
        Self::constant(0.0)
    }
    fn is_zero(&self) -> bool {
        self.val == 0.0
    }
}

impl One for Var<'_> {
    fn one() -> Self {
        Self::constant(1.0)
    }
}

impl Num for Var<'_> {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Self::constant)
    }
}

impl Real for Var<'_> {
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }
    fn value(self) -> f64 {
        self.val
    }
    fn sqrt(self) -> Self {
        let r = self.val.sqrt();
        self.unary(r, if r > 0.0 { 0.5 / r } else { 0.0 })
    }
    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn scale(self, s: f64) -> Self {
        self.unary(self.val * s, s)
    }

    fn sum(xs: &[Self]) -> Self {
        let val = xs.iter().map(|x| x.val).sum();
        match xs.iter().find_map(|x| x.tape) {
            None => Self::constant(val),
            Some(t) => Self {
                tape: Some(t),
                idx: t.push(xs.iter().filter(|x| x.tape.is_some()).map(|x| (x.idx, 1.0))),
                val,
            },
        }
    }

    fn dot(a: &[Self], b: &[Self]) -> Self {
        let val = a.iter().zip(b).map(|(x, y)| x.val * y.val).sum();
        let tape = a.iter().chain(b).find_map(|x| x.tape);
        match tape {
            None => Self::constant(val),
            Some(t) => {
                let deps = a.iter().zip(b).flat_map(|(x, y)| {
                    let dx = x.tape.map(|_| (x.idx, y.val));
                    let dy = y.tape.map(|_| (y.idx, x.val));
                    dx.into_iter().chain(dy)
                });
                Self {
                    tape: Some(t),
                    idx: t.push(deps),
                    val,
                }
            }
        }
    }
}
