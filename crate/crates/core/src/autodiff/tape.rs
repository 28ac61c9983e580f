use alloc::vec::Vec;
use core::cell::RefCell;
use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::math;
use crate::{Error, Result};

/// Arena of scalar nodes recorded in evaluation order.
///
/// Each node stores its value and the local partial derivative towards every
/// parent. Edges live in one flat buffer so n-ary nodes (sums, dot products)
/// cost one node plus one edge per operand.
#[derive(Debug, Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

#[derive(Debug, Default)]
struct Inner {
    values: Vec<f64>,
    // edges[spans[i].0 .. spans[i].1] are the parents of node i
    spans: Vec<(u32, u32)>,
    edges: Vec<(u32, f64)>,
    adjoints: Vec<f64>,
    swept: bool,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: u32,
}

impl core::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Var")
            .field("index", &self.index)
            .field("value", &self.value())
            .finish()
    }
}

impl Inner {
    fn push(&mut self, value: f64, parents: impl IntoIterator<Item = (u32, f64)>) -> u32 {
        let start = self.edges.len() as u32;
        self.edges.extend(parents);
        let end = self.edges.len() as u32;
        let index = self.values.len() as u32;
        self.values.push(value);
        self.spans.push((start, end));
        index
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops every node; capacity is kept so a tape can be reused per batch.
    pub fn clear(&self) {
        let mut inner = self.inner.borrow_mut();
        inner.values.clear();
        inner.spans.clear();
        inner.edges.clear();
        inner.adjoints.clear();
        inner.swept = false;
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn wrap(&self, index: u32) -> Var<'_> {
        Var { tape: self, index }
    }

    fn node(&self, value: f64, parents: impl IntoIterator<Item = (u32, f64)>) -> Var<'_> {
        let index = self.inner.borrow_mut().push(value, parents);
        self.wrap(index)
    }

    /// A leaf node: an input or parameter.
    pub fn var(&self, value: f64) -> Var<'_> {
        self.node(value, [])
    }

    /// Leaf nodes for every entry of `values`, in order.
    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        let mut inner = self.inner.borrow_mut();
        let first = inner.values.len() as u32;
        for &v in values {
            inner.push(v, []);
        }
        drop(inner);
        (0..values.len() as u32).map(|i| self.wrap(first + i)).collect()
    }

    /// A constant; indistinguishable from a leaf except by intent.
    pub fn constant(&self, value: f64) -> Var<'_> {
        self.var(value)
    }

    /// Σ xs
    pub fn sum<'t>(&'t self, xs: &[Var<'t>]) -> Var<'t> {
        let value = xs.iter().map(|x| x.value()).sum();
        self.node(value, xs.iter().map(|x| (x.index, 1.0)))
    }

    /// Σ coeffs[i] · xs[i] with constant coefficients.
    pub fn weighted_sum<'t>(&'t self, coeffs: &[f64], xs: &[Var<'t>]) -> Var<'t> {
        debug_assert_eq!(coeffs.len(), xs.len());
        let mut inner = self.inner.borrow_mut();
        let value = coeffs
            .iter()
            .zip(xs)
            .map(|(c, x)| c * inner.values[x.index as usize])
            .sum();
        let index = inner.push(value, coeffs.iter().zip(xs).map(|(&c, x)| (x.index, c)));
        drop(inner);
        self.wrap(index)
    }

    /// Σ a[i] · b[i] where both sides are differentiable.
    pub fn dot<'t>(&'t self, a: &[Var<'t>], b: &[Var<'t>]) -> Var<'t> {
        debug_assert_eq!(a.len(), b.len());
        let mut inner = self.inner.borrow_mut();
        let pairs: Vec<(u32, f64, u32, f64)> = a
            .iter()
            .zip(b)
            .map(|(x, y)| {
                (
                    x.index,
                    inner.values[x.index as usize],
                    y.index,
                    inner.values[y.index as usize],
                )
            })
            .collect();
        let value = pairs.iter().map(|&(_, xv, _, yv)| xv * yv).sum();
        let index = inner.push(value, pairs.iter().flat_map(|&(xi, xv, yi, yv)| [(xi, yv), (yi, xv)]));
        drop(inner);
        self.wrap(index)
    }

    /// Arithmetic mean of `xs`; `xs` must be non-empty.
    pub fn mean<'t>(&'t self, xs: &[Var<'t>]) -> Var<'t> {
        let w = 1.0 / xs.len() as f64;
        let value = xs.iter().map(|x| x.value()).sum::<f64>() * w;
        self.node(value, xs.iter().map(|x| (x.index, w)))
    }

    fn check_owner(&self, v: Var<'_>) -> Result<()> {
        if core::ptr::eq(self, v.tape) {
            Ok(())
        } else {
            Err(Error::ForeignVar)
        }
    }

    /// Reverse sweep from `root`, leaving ∂root/∂node in every accumulator.
    ///
    /// Fails if a previous sweep has not been cleared with [`Tape::zero_grad`].
    pub fn backward(&self, root: Var<'_>) -> Result<()> {
        self.check_owner(root)?;
        let mut inner = self.inner.borrow_mut();
        if inner.swept {
            return Err(Error::StaleAccumulators);
        }
        let n = inner.values.len();
        let mut adjoints = core::mem::take(&mut inner.adjoints);
        adjoints.clear();
        adjoints.resize(n, 0.0);
        adjoints[root.index as usize] = 1.0;
        for i in (0..=root.index as usize).rev() {
            let a = adjoints[i];
            if a == 0.0 {
                continue;
            }
            let (start, end) = inner.spans[i];
            for &(parent, partial) in &inner.edges[start as usize..end as usize] {
                adjoints[parent as usize] += a * partial;
            }
        }
        inner.adjoints = adjoints;
        inner.swept = true;
        Ok(())
    }

    /// [`Tape::backward`] for a root given as an output vector, which must
    /// have exactly one element.
    pub fn backward_outputs(&self, outputs: &[Var<'_>]) -> Result<()> {
        match outputs {
            [root] => self.backward(*root),
            _ => Err(Error::NonScalarRoot(outputs.len())),
        }
    }

    /// Resets all accumulators to zero so another sweep may run.
    pub fn zero_grad(&self) {
        let mut inner = self.inner.borrow_mut();
        inner.adjoints.iter_mut().for_each(|a| *a = 0.0);
        inner.swept = false;
    }

    /// Accumulated partial of the last sweep's root with respect to `v`.
    pub fn grad(&self, v: Var<'_>) -> f64 {
        self.inner
            .borrow()
            .adjoints
            .get(v.index as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// Accumulated partials for `vars`, in order.
    pub fn grads(&self, vars: &[Var<'_>]) -> Vec<f64> {
        let inner = self.inner.borrow();
        vars.iter()
            .map(|v| inner.adjoints.get(v.index as usize).copied().unwrap_or(0.0))
            .collect()
    }

    /// Adds the accumulated partials for `vars` into `out`.
    pub fn accumulate_grads(&self, vars: &[Var<'_>], out: &mut [f64]) {
        let inner = self.inner.borrow();
        for (o, v) in out.iter_mut().zip(vars) {
            *o += inner.adjoints.get(v.index as usize).copied().unwrap_or(0.0);
        }
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.tape.inner.borrow().values[self.index as usize]
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    /// Accumulator of the last backward sweep.
    pub fn grad(&self) -> f64 {
        self.tape.grad(*self)
    }

    fn unary(self, value: f64, partial: f64) -> Var<'t> {
        self.tape.node(value, [(self.index, partial)])
    }

    pub fn exp(self) -> Var<'t> {
        let y = math::exp(self.value());
        self.unary(y, y)
    }

    pub fn ln(self) -> Var<'t> {
        let x = self.value();
        self.unary(math::ln(x), 1.0 / x)
    }

    pub fn tanh(self) -> Var<'t> {
        let y = math::tanh(self.value());
        self.unary(y, 1.0 - y * y)
    }

    pub fn sqrt(self) -> Var<'t> {
        let y = math::sqrt(self.value());
        self.unary(y, 0.5 / y)
    }

    pub fn square(self) -> Var<'t> {
        let x = self.value();
        self.unary(x * x, 2.0 * x)
    }

    /// Clamps to `[lo, hi]`; the partial is 1 inside the interval
    /// (boundaries included) and 0 outside.
    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        let x = self.value();
        if x < lo {
            self.unary(lo, 0.0)
        } else if x > hi {
            self.unary(hi, 0.0)
        } else {
            self.unary(x, 1.0)
        }
    }

    /// Elementwise minimum; on ties the gradient flows into `self`.
    pub fn min(self, other: Var<'t>) -> Var<'t> {
        if other.value() < self.value() {
            other.unary(other.value(), 1.0)
        } else {
            self.unary(self.value(), 1.0)
        }
    }

    pub fn max(self, other: Var<'t>) -> Var<'t> {
        if other.value() > self.value() {
            other.unary(other.value(), 1.0)
        } else {
            self.unary(self.value(), 1.0)
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        let v = self.value() + rhs.value();
        self.tape.node(v, [(self.index, 1.0), (rhs.index, 1.0)])
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        let v = self.value() - rhs.value();
        self.tape.node(v, [(self.index, 1.0), (rhs.index, -1.0)])
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        let (a, b) = (self.value(), rhs.value());
        self.tape.node(a * b, [(self.index, b), (rhs.index, a)])
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let (a, b) = (self.value(), rhs.value());
        self.tape
            .node(a / b, [(self.index, 1.0 / b), (rhs.index, -a / (b * b))])
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.value(), -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary(self.value() + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary(self.value() - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary(self.value() * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.unary(self.value() / rhs, 1.0 / rhs)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(self - rhs.value(), -1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}
