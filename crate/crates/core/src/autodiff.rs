//! Reverse-mode automatic differentiation over a tape of dense matrix
//! operations.
//!
//! Every value is a 2-D array; scalars are `1x1` and vectors are columns or
//! rows. A tape records one forward evaluation and is differentiated once
//! with [`Tape::backward`]. Build a fresh tape per evaluation.

use crate::error::{Error, Result};
use ndarray::{Array2, Zip};

pub type Matrix = Array2<f64>;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    index: usize,
    rows: usize,
    cols: usize,
}

impl Var {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }
}

/// Row-wise sparse linear map applied along the columns of a `1 x n` row.
/// Output entry `j` is `sum(c * x[k] for (k, c) in rows[j])`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    pub input_len: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(k, c)| c * x[k]).sum()).collect()
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MulConst(usize, Matrix),
    Scale(usize, f64),
    Offset(usize),
    MatMul(usize, usize),
    AddBias(usize, usize),
    Broadcast(usize),
    Tanh(usize),
    Sigmoid(usize),
    Exp(usize),
    Sin(usize),
    Cos(usize),
    Sqrt(usize),
    Recip(usize),
    Square(usize),
    Select(Array2<bool>, usize, usize),
    Map(usize, Matrix),
    Sum(usize),
    Mean(usize),
    Linear(usize, SparseRows),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Primitive selector for [`Tape::record`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prim {
    Add,
    Sub,
    Mul,
    MatMul,
    AddBias,
    Tanh,
    Sigmoid,
    Exp,
    Sin,
    Cos,
    Sqrt,
    Recip,
    Square,
    Sum,
    Mean,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every node with respect to one scalar output.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Matrix> {
        self.adjoints[var.index].as_ref()
    }

    /// Gradient with respect to `var`, zero if the output does not depend on it.
    pub fn wrt(&self, var: Var) -> Matrix {
        match &self.adjoints[var.index] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.index];
                Matrix::zeros((r, c))
            }
        }
    }
}

fn mismatch(what: &str, a: Var, b: Var) -> Error {
    Error::ShapeMismatch(format!("{what}: {:?} vs {:?}", a.shape(), b.shape()))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        let (rows, cols) = value.dim();
        self.nodes.push(Node { value, op, requires_grad });
        Var { index: self.nodes.len() - 1, rows, cols }
    }

    fn grad_of(&self, inputs: &[usize]) -> bool {
        inputs.iter().any(|&i| self.nodes[i].requires_grad)
    }

    /// Trainable input.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn scalar_leaf(&mut self, value: f64) -> Var {
        self.leaf(Matrix::from_elem((1, 1), value))
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.index].value
    }

    pub fn scalar(&self, var: Var) -> f64 {
        self.nodes[var.index].value[[0, 0]]
    }

    /// Records a primitive by selector. Unary primitives use `inputs[0]`.
    pub fn record(&mut self, prim: Prim, inputs: &[Var]) -> Result<Var> {
        let arity = match prim {
            Prim::Add | Prim::Sub | Prim::Mul | Prim::MatMul | Prim::AddBias => 2,
            _ => 1,
        };
        if inputs.len() != arity {
            return Err(Error::ShapeMismatch(format!("{prim:?} expects {arity} inputs, got {}", inputs.len())));
        }
        let x = inputs[0];
        Ok(match prim {
            Prim::Add => self.add(x, inputs[1])?,
            Prim::Sub => self.sub(x, inputs[1])?,
            Prim::Mul => self.mul(x, inputs[1])?,
            Prim::MatMul => self.matmul(x, inputs[1])?,
            Prim::AddBias => self.add_bias(x, inputs[1])?,
            Prim::Tanh => self.tanh(x),
            Prim::Sigmoid => self.sigmoid(x),
            Prim::Exp => self.exp(x),
            Prim::Sin => self.sin(x),
            Prim::Cos => self.cos(x),
            Prim::Sqrt => self.sqrt(x),
            Prim::Recip => self.recip(x),
            Prim::Square => self.square(x),
            Prim::Sum => self.sum(x),
            Prim::Mean => self.mean(x),
        })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if a.shape() != b.shape() {
            return Err(mismatch("add", a, b));
        }
        let value = self.value(a) + self.value(b);
        let g = self.grad_of(&[a.index, b.index]);
        Ok(self.push(value, Op::Add(a.index, b.index), g))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        if a.shape() != b.shape() {
            return Err(mismatch("sub", a, b));
        }
        let value = self.value(a) - self.value(b);
        let g = self.grad_of(&[a.index, b.index]);
        Ok(self.push(value, Op::Sub(a.index, b.index), g))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if a.shape() != b.shape() {
            return Err(mismatch("mul", a, b));
        }
        let value = self.value(a) * self.value(b);
        let g = self.grad_of(&[a.index, b.index]);
        Ok(self.push(value, Op::Mul(a.index, b.index), g))
    }

    /// Element-wise product with a constant matrix.
    pub fn mul_const(&mut self, a: Var, c: &Matrix) -> Result<Var> {
        if a.shape() != c.dim() {
            return Err(Error::ShapeMismatch(format!("mul_const: {:?} vs {:?}", a.shape(), c.dim())));
        }
        let value = self.value(a) * c;
        let g = self.grad_of(&[a.index]);
        Ok(self.push(value, Op::MulConst(a.index, c.clone()), g))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a) * s;
        let g = self.grad_of(&[a.index]);
        self.push(value, Op::Scale(a.index, s), g)
    }

    /// Adds a constant to every element.
    pub fn offset(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a) + s;
        let g = self.grad_of(&[a.index]);
        self.push(value, Op::Offset(a.index), g)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        if a.cols != b.rows {
            return Err(mismatch("matmul", a, b));
        }
        let value = self.value(a).dot(self.value(b));
        let g = self.grad_of(&[a.index, b.index]);
        Ok(self.push(value, Op::MatMul(a.index, b.index), g))
    }

    /// Adds the column vector `bias` (`r x 1`) to every column of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        if bias.cols != 1 || bias.rows != a.rows {
            return Err(mismatch("add_bias", a, bias));
        }
        let value = self.value(a) + self.value(bias);
        let g = self.grad_of(&[a.index, bias.index]);
        Ok(self.push(value, Op::AddBias(a.index, bias.index), g))
    }

    /// Expands a `1x1` value to `rows x cols`.
    pub fn broadcast(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        if !a.is_scalar() {
            return Err(Error::ShapeMismatch(format!("broadcast needs a scalar, got {:?}", a.shape())));
        }
        let value = Matrix::from_elem((rows, cols), self.scalar(a));
        let g = self.grad_of(&[a.index]);
        Ok(self.push(value, Op::Broadcast(a.index), g))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(a).mapv(f);
        let g = self.grad_of(&[a.index]);
        self.push(value, op, g)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a.index))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a.index))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a.index))
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.unary(a, f64::sin, Op::Sin(a.index))
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(a, f64::cos, Op::Cos(a.index))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, f64::sqrt, Op::Sqrt(a.index))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        self.unary(a, f64::recip, Op::Recip(a.index))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a.index))
    }

    /// Picks `a` where `mask` is true and `b` elsewhere.
    pub fn select(&mut self, mask: &Array2<bool>, a: Var, b: Var) -> Result<Var> {
        if a.shape() != b.shape() || mask.dim() != a.shape() {
            return Err(mismatch("select", a, b));
        }
        let mut value = self.value(b).clone();
        Zip::from(&mut value)
            .and(mask)
            .and(self.value(a))
            .for_each(|v, &m, &x| {
                if m {
                    *v = x
                }
            });
        let g = self.grad_of(&[a.index, b.index]);
        Ok(self.push(value, Op::Select(mask.clone(), a.index, b.index), g))
    }

    /// Element-wise function given as `x -> (f(x), f'(x))`.
    pub fn map(&mut self, a: Var, f: impl Fn(f64) -> (f64, f64)) -> Var {
        let src = self.value(a);
        let mut value = Matrix::zeros(src.dim());
        let mut slope = Matrix::zeros(src.dim());
        Zip::from(&mut value).and(&mut slope).and(src).for_each(|v, s, &x| {
            let (fx, dfx) = f(x);
            *v = fx;
            *s = dfx;
        });
        let g = self.grad_of(&[a.index]);
        self.push(value, Op::Map(a.index, slope), g)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::from_elem((1, 1), self.value(a).sum());
        let g = self.grad_of(&[a.index]);
        self.push(value, Op::Sum(a.index), g)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = (a.rows * a.cols) as f64;
        let value = Matrix::from_elem((1, 1), self.value(a).sum() / n);
        let g = self.grad_of(&[a.index]);
        self.push(value, Op::Mean(a.index), g)
    }

    /// Applies a sparse linear map to a `1 x n` row.
    pub fn linear(&mut self, a: Var, map: &SparseRows) -> Result<Var> {
        if a.rows != 1 || a.cols != map.input_len {
            return Err(Error::ShapeMismatch(format!(
                "linear map over {} inputs applied to {:?}",
                map.input_len,
                a.shape()
            )));
        }
        let x = self.value(a).as_slice().expect("standard layout").to_vec();
        let y = map.apply(&x);
        let value = Matrix::from_shape_vec((1, y.len()), y).expect("row shape");
        let g = self.grad_of(&[a.index]);
        Ok(self.push(value, Op::Linear(a.index, map.clone()), g))
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if !output.is_scalar() {
            return Err(Error::NonScalarOutput { rows: output.rows, cols: output.cols });
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        adj[output.index] = Some(Matrix::ones((1, 1)));

        for i in (0..=output.index).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            self.propagate(node, &g, &mut adj);
            adj[i] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.dim()).collect();
        Ok(Gradients { adjoints: adj, shapes })
    }

    fn propagate(&self, node: &Node, g: &Matrix, adj: &mut [Option<Matrix>]) {
        let needs = |j: usize| self.nodes[j].requires_grad;
        let val = |j: usize| &self.nodes[j].value;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if needs(*a) {
                    accumulate(adj, *a, g.clone());
                }
                if needs(*b) {
                    accumulate(adj, *b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if needs(*a) {
                    accumulate(adj, *a, g.clone());
                }
                if needs(*b) {
                    accumulate(adj, *b, -g);
                }
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    accumulate(adj, *a, g * val(*b));
                }
                if needs(*b) {
                    accumulate(adj, *b, g * val(*a));
                }
            }
            Op::MulConst(a, c) => accumulate(adj, *a, g * c),
            Op::Scale(a, s) => accumulate(adj, *a, g * *s),
            Op::Offset(a) => accumulate(adj, *a, g.clone()),
            Op::MatMul(a, b) => {
                if needs(*a) {
                    accumulate(adj, *a, g.dot(&val(*b).t()));
                }
                if needs(*b) {
                    accumulate(adj, *b, val(*a).t().dot(g));
                }
            }
            Op::AddBias(a, bias) => {
                if needs(*a) {
                    accumulate(adj, *a, g.clone());
                }
                if needs(*bias) {
                    let col = g.sum_axis(ndarray::Axis(1)).insert_axis(ndarray::Axis(1));
                    accumulate(adj, *bias, col);
                }
            }
            Op::Broadcast(a) => accumulate(adj, *a, Matrix::from_elem((1, 1), g.sum())),
            Op::Tanh(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= 1.0 - y * y);
                accumulate(adj, *a, d);
            }
            Op::Sigmoid(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= y * (1.0 - y));
                accumulate(adj, *a, d);
            }
            Op::Exp(a) => accumulate(adj, *a, g * &node.value),
            Op::Sin(a) => accumulate(adj, *a, g * &val(*a).mapv(f64::cos)),
            Op::Cos(a) => accumulate(adj, *a, g * &val(*a).mapv(|x| -x.sin())),
            Op::Sqrt(a) => accumulate(adj, *a, g * &node.value.mapv(|y| 0.5 / y)),
            Op::Recip(a) => accumulate(adj, *a, g * &node.value.mapv(|y| -y * y)),
            Op::Square(a) => accumulate(adj, *a, g * &val(*a).mapv(|x| 2.0 * x)),
            Op::Select(mask, a, b) => {
                if needs(*a) {
                    let mut d = g.clone();
                    Zip::from(&mut d).and(mask).for_each(|d, &m| {
                        if !m {
                            *d = 0.0
                        }
                    });
                    accumulate(adj, *a, d);
                }
                if needs(*b) {
                    let mut d = g.clone();
                    Zip::from(&mut d).and(mask).for_each(|d, &m| {
                        if m {
                            *d = 0.0
                        }
                    });
                    accumulate(adj, *b, d);
                }
            }
            Op::Map(a, slope) => accumulate(adj, *a, g * slope),
            Op::Sum(a) => {
                let (r, c) = val(*a).dim();
                accumulate(adj, *a, Matrix::from_elem((r, c), g[[0, 0]]));
            }
            Op::Mean(a) => {
                let (r, c) = val(*a).dim();
                accumulate(adj, *a, Matrix::from_elem((r, c), g[[0, 0]] / (r * c) as f64));
            }
            Op::Linear(a, map) => {
                let mut d = Matrix::zeros((1, map.input_len));
                for (j, row) in map.rows.iter().enumerate() {
                    let gj = g[[0, j]];
                    for &(k, c) in row {
                        d[[0, k]] += c * gj;
                    }
                }
                accumulate(adj, *a, d);
            }
        }
    }
}

fn accumulate(adj: &mut [Option<Matrix>], index: usize, contribution: Matrix) {
    match &mut adj[index] {
        Some(existing) => *existing += &contribution,
        slot @ None => *slot = Some(contribution),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
