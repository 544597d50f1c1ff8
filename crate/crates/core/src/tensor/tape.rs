//! Reverse-mode differentiation over vector-valued nodes.
//!
//! A [`Tape`] records every primitive in creation order, which is also a
//! topological order; [`Tape::backward`] walks it once in reverse. Parameter
//! nodes borrow their values from a [`ParamStore`] and route gradients into a
//! [`ParamGrads`] buffer aligned with that store.

use super::params::{ParamGrads, ParamId, ParamStore};
use super::{axpy, dot};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Input,
    Param(ParamId),
    Gather { table: ParamId, row: usize },
    MatVec { w: ParamId, x: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Affine { x: Var, scale: T },
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    Log(Var),
    Pow { x: Var, exp: T },
    ClampMin { x: Var, min: T },
    Sum(Var),
    Mask { x: Var, mask: Vec<T> },
}

#[derive(Debug)]
pub struct Tape<'p, T> {
    params: &'p ParamStore<T>,
    ops: Vec<Op<T>>,
    // Empty for parameter nodes, whose value lives in the store.
    values: Vec<Vec<T>>,
}

/// Result of a backward sweep.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    nodes: Vec<Option<Vec<T>>>,
    params: ParamGrads<T>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to a recorded node, if any flowed into it.
    pub fn wrt(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].as_deref()
    }

    pub fn params(&self) -> &ParamGrads<T> {
        &self.params
    }

    pub fn into_params(self) -> ParamGrads<T> {
        self.params
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self {
            params,
            ops: Vec::with_capacity(1024),
            values: Vec::with_capacity(1024),
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn push(&mut self, op: Op<T>, value: Vec<T>) -> Var {
        self.ops.push(op);
        self.values.push(value);
        Var(self.ops.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[T] {
        match &self.ops[v.0] {
            Op::Param(id) => self.params.get(*id).data(),
            _ => &self.values[v.0],
        }
    }

    /// First element of a node's value; meant for scalar losses.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[0]
    }

    pub fn dim(&self, v: Var) -> usize {
        self.value(v).len()
    }

    pub fn input(&mut self, value: Vec<T>) -> Var {
        self.push(Op::Input, value)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.input(vec![T::zero(); n])
    }

    /// Whole parameter tensor as a flat vector (biases).
    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(Op::Param(id), Vec::new())
    }

    /// Row `row` of a 2-D parameter (embedding lookup).
    pub fn gather(&mut self, table: ParamId, row: usize) -> Result<Var> {
        let t = self.params.get(table);
        if row >= t.rows() {
            return Err(Error::IndexOutOfRange {
                what: "embedding table",
                index: row,
                size: t.rows(),
            });
        }
        let v = t.row(row).to_vec();
        Ok(self.push(Op::Gather { table, row }, v))
    }

    /// `W x` for a parameter matrix `W` of shape `[out, in]`.
    pub fn matvec(&mut self, w: ParamId, x: Var) -> Result<Var> {
        let wt = self.params.get(w);
        let xv = self.value(x);
        if wt.cols() != xv.len() || wt.shape().len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "matvec `{}` {:?} with vector of length {}",
                self.params.name(w),
                wt.shape(),
                xv.len()
            )));
        }
        let out: Vec<T> = (0..wt.rows()).map(|r| dot(wt.row(r), xv)).collect();
        Ok(self.push(Op::MatVec { w, x }, out))
    }

    fn check_same(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (la, lb) = (self.dim(a), self.dim(b));
        if la != lb {
            return Err(Error::ShapeMismatch(format!("{what}: {la} vs {lb}")));
        }
        Ok(())
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Vec<T> {
        self.value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect()
    }

    fn map(&self, a: Var, f: impl Fn(T) -> T) -> Vec<T> {
        self.value(a).iter().map(|&x| f(x)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "add")?;
        let v = self.zip_with(a, b, |x, y| x + y);
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "sub")?;
        let v = self.zip_with(a, b, |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), v))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "mul")?;
        let v = self.zip_with(a, b, |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), v))
    }

    /// Element-wise quotient.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "div")?;
        let v = self.zip_with(a, b, |x, y| x / y);
        Ok(self.push(Op::Div(a, b), v))
    }

    /// `scale * x + shift`
    pub fn affine(&mut self, x: Var, scale: T, shift: T) -> Var {
        let v = self.map(x, |a| scale * a + shift);
        self.push(Op::Affine { x, scale }, v)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut v = Vec::with_capacity(parts.iter().map(|&p| self.dim(p)).sum());
        for &p in parts {
            v.extend_from_slice(self.value(p));
        }
        self.push(Op::Concat(parts.to_vec()), v)
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.dim(x);
        if start + len > n {
            return Err(Error::ShapeMismatch(format!(
                "slice [{start}, {}) of vector with length {n}",
                start + len
            )));
        }
        let v = self.value(x)[start..start + len].to_vec();
        Ok(self.push(Op::Slice { x, start }, v))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.map(x, sigmoid);
        self.push(Op::Sigmoid(x), v)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.map(x, T::tanh);
        self.push(Op::Tanh(x), v)
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
        let mut v: Vec<T> = xs.iter().map(|&a| (a - m).exp()).collect();
        let s: T = v.iter().copied().sum();
        v.iter_mut().for_each(|a| *a /= s);
        self.push(Op::Softmax(x), v)
    }

    pub fn log(&mut self, x: Var) -> Var {
        let v = self.map(x, T::ln);
        self.push(Op::Log(x), v)
    }

    pub fn pow(&mut self, x: Var, exp: T) -> Var {
        let v = self.map(x, |a| a.powf(exp));
        self.push(Op::Pow { x, exp }, v)
    }

    /// `max(x, min)` element-wise; the gradient is blocked where clamped.
    pub fn clamp_min(&mut self, x: Var, min: T) -> Var {
        let v = self.map(x, |a| a.max(min));
        self.push(Op::ClampMin { x, min }, v)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().copied().sum();
        self.push(Op::Sum(x), vec![s])
    }

    /// Multiplies by a fixed mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Vec<T>) -> Result<Var> {
        if mask.len() != self.dim(x) {
            return Err(Error::ShapeMismatch(format!(
                "mask of length {} for vector of length {}",
                mask.len(),
                self.dim(x)
            )));
        }
        let v = self.zip_mask(x, &mask);
        Ok(self.push(Op::Mask { x, mask }, v))
    }

    fn zip_mask(&self, x: Var, mask: &[T]) -> Vec<T> {
        self.value(x).iter().zip(mask).map(|(&a, &m)| a * m).collect()
    }

    /// Backward sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.dim(loss) != 1 {
            return Err(Error::ShapeMismatch(format!(
                "backward needs a scalar, node has {} elements",
                self.dim(loss)
            )));
        }
        self.backward_seeded(&[(loss, vec![T::one()])])
    }

    /// Backward sweep from arbitrary upstream gradients.
    pub fn backward_seeded(&self, seeds: &[(Var, Vec<T>)]) -> Result<Gradients<T>> {
        let mut params = self.params.zero_grads();
        let nodes = self.sweep(seeds, &mut params, true)?;
        Ok(Gradients { nodes, params })
    }

    /// Backward sweep that only accumulates parameter gradients into `acc`.
    pub fn backward_into(&self, seeds: &[(Var, Vec<T>)], acc: &mut ParamGrads<T>) -> Result<()> {
        self.sweep(seeds, acc, false).map(|_| ())
    }

    fn sweep(
        &self,
        seeds: &[(Var, Vec<T>)],
        pg: &mut ParamGrads<T>,
        keep: bool,
    ) -> Result<Vec<Option<Vec<T>>>> {
        if pg.len() != self.params.len() {
            return Err(Error::ShapeMismatch(
                "gradient buffer does not match the parameter store".into(),
            ));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.ops.len()];
        for (v, g) in seeds {
            if g.len() != self.dim(*v) {
                return Err(Error::ShapeMismatch(format!(
                    "seed of length {} for node with {} elements",
                    g.len(),
                    self.dim(*v)
                )));
            }
            accumulate(&mut grads, *v, g);
        }
        for i in (0..self.ops.len()).rev() {
            let Some(g) = (if keep { grads[i].clone() } else { grads[i].take() }) else {
                continue;
            };
            let out = &self.values[i];
            match &self.ops[i] {
                Op::Input => {}
                Op::Param(id) => {
                    let dst = pg.get_mut(*id).data_mut();
                    axpy(T::one(), &g, dst);
                }
                Op::Gather { table, row } => {
                    let cols = self.params.get(*table).cols();
                    let dst = &mut pg.get_mut(*table).data_mut()[row * cols..(row + 1) * cols];
                    axpy(T::one(), &g, dst);
                }
                Op::MatVec { w, x } => {
                    let wt = self.params.get(*w);
                    let xv = self.value(*x);
                    let cols = wt.cols();
                    {
                        let dw = pg.get_mut(*w).data_mut();
                        for (r, &gr) in g.iter().enumerate() {
                            if gr != T::zero() {
                                axpy(gr, xv, &mut dw[r * cols..(r + 1) * cols]);
                            }
                        }
                    }
                    let mut dx = vec![T::zero(); cols];
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != T::zero() {
                            axpy(gr, wt.row(r), &mut dx);
                        }
                    }
                    accumulate_owned(&mut grads, *x, dx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    let neg: Vec<T> = g.iter().map(|&v| -v).collect();
                    accumulate_owned(&mut grads, *b, neg);
                }
                Op::Mul(a, b) => {
                    let ga: Vec<T> = g.iter().zip(self.value(*b)).map(|(&u, &v)| u * v).collect();
                    let gb: Vec<T> = g.iter().zip(self.value(*a)).map(|(&u, &v)| u * v).collect();
                    accumulate_owned(&mut grads, *a, ga);
                    accumulate_owned(&mut grads, *b, gb);
                }
                Op::Div(a, b) => {
                    let bv = self.value(*b);
                    let ga: Vec<T> = g.iter().zip(bv).map(|(&u, &v)| u / v).collect();
                    let gb: Vec<T> = g
                        .iter()
                        .zip(out)
                        .zip(bv)
                        .map(|((&u, &q), &v)| -u * q / v)
                        .collect();
                    accumulate_owned(&mut grads, *a, ga);
                    accumulate_owned(&mut grads, *b, gb);
                }
                Op::Affine { x, scale } => {
                    let gx: Vec<T> = g.iter().map(|&u| u * *scale).collect();
                    accumulate_owned(&mut grads, *x, gx);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.dim(p);
                        accumulate(&mut grads, p, &g[off..off + n]);
                        off += n;
                    }
                }
                Op::Slice { x, start } => {
                    let n = self.dim(*x);
                    let slot = grads[x.0].get_or_insert_with(|| vec![T::zero(); n]);
                    for (d, &u) in slot[*start..*start + g.len()].iter_mut().zip(&g) {
                        *d += u;
                    }
                }
                Op::Sigmoid(x) => {
                    let gx: Vec<T> = g
                        .iter()
                        .zip(out)
                        .map(|(&u, &y)| u * y * (T::one() - y))
                        .collect();
                    accumulate_owned(&mut grads, *x, gx);
                }
                Op::Tanh(x) => {
                    let gx: Vec<T> = g
                        .iter()
                        .zip(out)
                        .map(|(&u, &y)| u * (T::one() - y * y))
                        .collect();
                    accumulate_owned(&mut grads, *x, gx);
                }
                Op::Softmax(x) => {
                    let gy = dot(&g, out);
                    let gx: Vec<T> = g.iter().zip(out).map(|(&u, &y)| y * (u - gy)).collect();
                    accumulate_owned(&mut grads, *x, gx);
                }
                Op::Log(x) => {
                    let gx: Vec<T> = g.iter().zip(self.value(*x)).map(|(&u, &a)| u / a).collect();
                    accumulate_owned(&mut grads, *x, gx);
                }
                Op::Pow { x, exp } => {
                    let e1 = *exp - T::one();
                    // x^0 is constant; avoid 0 * inf at x = 0
                    let gx: Vec<T> = g
                        .iter()
                        .zip(self.value(*x))
                        .map(|(&u, &a)| if *exp == T::zero() { T::zero() } else { u * *exp * a.powf(e1) })
                        .collect();
                    accumulate_owned(&mut grads, *x, gx);
                }
                Op::ClampMin { x, min } => {
                    let gx: Vec<T> = g
                        .iter()
                        .zip(self.value(*x))
                        .map(|(&u, &a)| if a >= *min { u } else { T::zero() })
                        .collect();
                    accumulate_owned(&mut grads, *x, gx);
                }
                Op::Sum(x) => {
                    let gx = vec![g[0]; self.dim(*x)];
                    accumulate_owned(&mut grads, *x, gx);
                }
                Op::Mask { x, mask } => {
                    let gx: Vec<T> = g.iter().zip(mask).map(|(&u, &m)| u * m).collect();
                    accumulate_owned(&mut grads, *x, gx);
                }
            }
            if keep {
                grads[i] = Some(g);
            }
        }
        Ok(grads)
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, g: &[T]) {
    match &mut grads[v.0] {
        Some(acc) => axpy(T::one(), g, acc),
        slot @ None => *slot = Some(g.to_vec()),
    }
}

fn accumulate_owned<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, g: Vec<T>) {
    match &mut grads[v.0] {
        Some(acc) => axpy(T::one(), &g, acc),
        slot @ None => *slot = Some(g),
    }
}
