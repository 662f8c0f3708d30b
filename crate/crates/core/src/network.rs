//! Recurrent surrogates mapping time, sEMG and recent motion to the next
//! joint angle.
//!
//! Batches are laid out column-wise: a hidden state is `H x B`, an input is
//! `n_in x B` and a motion value is `1 x B`, one column per window. Each
//! window runs `m` history steps that see measured (or predicted) motion and
//! one current step that does not, followed by an affine readout.

use crate::autodiff::{sigmoid, Matrix, Tape, Var};
use crate::error::{Error, Result};
use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const PARAM_NAMES: [&str; 15] = [
    "w_hr", "w_xr", "w_qr", "w_hu", "w_xu", "w_qu", "w_hh", "w_xh", "w_qh", "w_hq", "b_r", "b_u", "b_hc", "b_h", "b_q",
];

/// Trainable GRU tensors. `b_hc` is the candidate bias and `b_h` the extra
/// bias added to the interpolated hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights {
    pub w_hr: Matrix,
    pub w_xr: Matrix,
    pub w_qr: Matrix,
    pub w_hu: Matrix,
    pub w_xu: Matrix,
    pub w_qu: Matrix,
    pub w_hh: Matrix,
    pub w_xh: Matrix,
    pub w_qh: Matrix,
    pub w_hq: Matrix,
    pub b_r: Matrix,
    pub b_u: Matrix,
    pub b_hc: Matrix,
    pub b_h: Matrix,
    pub b_q: Matrix,
    /// When false `b_h` is held at zero, giving the standard GRU.
    pub hidden_bias: bool,
}

/// Tape handles mirroring [`GruWeights`].
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w_hr: Var,
    pub w_xr: Var,
    pub w_qr: Var,
    pub w_hu: Var,
    pub w_xu: Var,
    pub w_qu: Var,
    pub w_hh: Var,
    pub w_xh: Var,
    pub w_qh: Var,
    pub w_hq: Var,
    pub b_r: Var,
    pub b_u: Var,
    pub b_hc: Var,
    pub b_h: Var,
    pub b_q: Var,
    pub hidden_bias: bool,
}

impl GruVars {
    pub fn tensors(&self) -> [Var; 15] {
        [
            self.w_hr, self.w_xr, self.w_qr, self.w_hu, self.w_xu, self.w_qu, self.w_hh, self.w_xh, self.w_qh,
            self.w_hq, self.b_r, self.b_u, self.b_hc, self.b_h, self.b_q,
        ]
    }
}

impl GruWeights {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let z = |r, c| Matrix::zeros((r, c));
        Self {
            w_hr: z(hidden, hidden),
            w_xr: z(hidden, input),
            w_qr: z(hidden, 1),
            w_hu: z(hidden, hidden),
            w_xu: z(hidden, input),
            w_qu: z(hidden, 1),
            w_hh: z(hidden, hidden),
            w_xh: z(hidden, input),
            w_qh: z(hidden, 1),
            w_hq: z(1, hidden),
            b_r: z(hidden, 1),
            b_u: z(hidden, 1),
            b_hc: z(hidden, 1),
            b_h: z(hidden, 1),
            b_q: z(1, 1),
            hidden_bias: true,
        }
    }

    /// Weight matrices drawn from `U(-1/sqrt(H), 1/sqrt(H))`, biases zero.
    pub fn init(hidden: usize, input: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (hidden as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let mut w = Self::zeros(hidden, input);
        for m in [
            &mut w.w_hr, &mut w.w_xr, &mut w.w_qr, &mut w.w_hu, &mut w.w_xu, &mut w.w_qu, &mut w.w_hh, &mut w.w_xh,
            &mut w.w_qh, &mut w.w_hq,
        ] {
            m.mapv_inplace(|_| dist.sample(&mut rng));
        }
        w
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hh.nrows()
    }

    pub fn input_size(&self) -> usize {
        self.w_xr.ncols()
    }

    pub fn tensors(&self) -> [&Matrix; 15] {
        [
            &self.w_hr, &self.w_xr, &self.w_qr, &self.w_hu, &self.w_xu, &self.w_qu, &self.w_hh, &self.w_xh, &self.w_qh,
            &self.w_hq, &self.b_r, &self.b_u, &self.b_hc, &self.b_h, &self.b_q,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 15] {
        [
            &mut self.w_hr, &mut self.w_xr, &mut self.w_qr, &mut self.w_hu, &mut self.w_xu, &mut self.w_qu,
            &mut self.w_hh, &mut self.w_xh, &mut self.w_qh, &mut self.w_hq, &mut self.b_r, &mut self.b_u,
            &mut self.b_hc, &mut self.b_h, &mut self.b_q,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|m| m.iter().all(|v| v.is_finite()))
    }

    pub fn validate(&self) -> Result<()> {
        let fresh = Self::zeros(self.hidden_size(), self.input_size());
        for ((name, a), b) in PARAM_NAMES.iter().zip(self.tensors()).zip(fresh.tensors()) {
            if a.dim() != b.dim() {
                return Err(Error::ShapeMismatch(format!("{name}: expected {:?}, got {:?}", b.dim(), a.dim())));
            }
        }
        if !self.is_finite() {
            return Err(Error::InvalidParameter("non-finite GRU weight".into()));
        }
        Ok(())
    }

    /// Records every tensor as a trainable leaf.
    pub fn record(&self, tape: &mut Tape) -> GruVars {
        let t = self.tensors();
        let mut leaf = |i: usize| tape.leaf(t[i].clone());
        GruVars {
            w_hr: leaf(0),
            w_xr: leaf(1),
            w_qr: leaf(2),
            w_hu: leaf(3),
            w_xu: leaf(4),
            w_qu: leaf(5),
            w_hh: leaf(6),
            w_xh: leaf(7),
            w_qh: leaf(8),
            w_hq: leaf(9),
            b_r: leaf(10),
            b_u: leaf(11),
            b_hc: leaf(12),
            b_h: leaf(13),
            b_q: leaf(14),
            hidden_bias: self.hidden_bias,
        }
    }

    pub fn to_checkpoint(&self) -> BTreeMap<String, TensorRecord> {
        PARAM_NAMES
            .iter()
            .zip(self.tensors())
            .map(|(name, m)| (name.to_string(), TensorRecord::from_matrix(m)))
            .collect()
    }

    pub fn from_checkpoint(map: &BTreeMap<String, TensorRecord>, hidden_bias: bool) -> Result<Self> {
        let get = |name: &str| -> Result<Matrix> {
            map.get(name)
                .ok_or_else(|| Error::InvalidConfig(format!("checkpoint is missing tensor {name}")))?
                .to_matrix()
        };
        let w = Self {
            w_hr: get("w_hr")?,
            w_xr: get("w_xr")?,
            w_qr: get("w_qr")?,
            w_hu: get("w_hu")?,
            w_xu: get("w_xu")?,
            w_qu: get("w_qu")?,
            w_hh: get("w_hh")?,
            w_xh: get("w_xh")?,
            w_qh: get("w_qh")?,
            w_hq: get("w_hq")?,
            b_r: get("b_r")?,
            b_u: get("b_u")?,
            b_hc: get("b_hc")?,
            b_h: get("b_h")?,
            b_q: get("b_q")?,
            hidden_bias,
        };
        w.validate()?;
        Ok(w)
    }
}

/// Row-major tensor with its shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl TensorRecord {
    pub fn from_matrix(m: &Matrix) -> Self {
        Self { shape: [m.nrows(), m.ncols()], data: m.iter().copied().collect() }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        Array2::from_shape_vec((self.shape[0], self.shape[1]), self.data.clone())
            .map_err(|e| Error::ShapeMismatch(e.to_string()))
    }
}

fn gate(w_h: &Matrix, h: &Matrix, w_x: &Matrix, x: &Matrix, qterm: Option<(&Matrix, &Matrix)>, b: &Matrix) -> Matrix {
    let mut s = w_h.dot(h) + w_x.dot(x);
    if let Some((w_q, q)) = qterm {
        s += &w_q.dot(q);
    }
    s + b
}

fn gru_step(h_prev: &Matrix, x: &Matrix, q: Option<&Matrix>, w: &GruWeights) -> Result<Matrix> {
    let hidden = w.hidden_size();
    if h_prev.nrows() != hidden || x.nrows() != w.input_size() || x.ncols() != h_prev.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "GRU step: hidden {:?}, input {:?} for H = {hidden}, n_in = {}",
            h_prev.dim(),
            x.dim(),
            w.input_size()
        )));
    }
    if let Some(q) = q {
        if q.dim() != (1, x.ncols()) {
            return Err(Error::ShapeMismatch(format!("GRU step: motion {:?}", q.dim())));
        }
    }
    let r = gate(&w.w_hr, h_prev, &w.w_xr, x, q.map(|q| (&w.w_qr, q)), &w.b_r).mapv(sigmoid);
    let u = gate(&w.w_hu, h_prev, &w.w_xu, x, q.map(|q| (&w.w_qu, q)), &w.b_u).mapv(sigmoid);
    let mut c = r * w.w_hh.dot(h_prev) + w.w_xh.dot(x);
    if let Some(q) = q {
        c += &w.w_qh.dot(q);
    }
    let candidate = (c + &w.b_hc).mapv(f64::tanh);
    let mut h = Matrix::zeros(h_prev.dim());
    Zip::from(&mut h).and(&u).and(h_prev).and(&candidate).for_each(|h, &u, &hp, &hc| {
        *h = u * hp + (1.0 - u) * hc;
    });
    if w.hidden_bias {
        h += &w.b_h;
    }
    Ok(h)
}

/// History step: sees the motion value `q`.
pub fn gru_history_step(h_prev: &Matrix, x: &Matrix, q: &Matrix, w: &GruWeights) -> Result<Matrix> {
    gru_step(h_prev, x, Some(q), w)
}

/// Current step: no motion input.
pub fn gru_current_step(h_prev: &Matrix, x: &Matrix, w: &GruWeights) -> Result<Matrix> {
    gru_step(h_prev, x, None, w)
}

pub fn readout(h: &Matrix, w: &GruWeights) -> Matrix {
    w.w_hq.dot(h) + &w.b_q
}

fn gate_tape(
    t: &mut Tape,
    w_h: Var,
    h: Var,
    w_x: Var,
    x: Var,
    qterm: Option<(Var, Var)>,
    b: Var,
) -> Result<Var> {
    let a = t.matmul(w_h, h)?;
    let bx = t.matmul(w_x, x)?;
    let mut s = t.add(a, bx)?;
    if let Some((w_q, q)) = qterm {
        let cq = t.matmul(w_q, q)?;
        s = t.add(s, cq)?;
    }
    t.add_bias(s, b)
}

/// Recorded GRU step; `q` is `Some` for history steps.
pub fn gru_step_tape(t: &mut Tape, v: &GruVars, h_prev: Var, x: Var, q: Option<Var>) -> Result<Var> {
    let r_pre = gate_tape(t, v.w_hr, h_prev, v.w_xr, x, q.map(|q| (v.w_qr, q)), v.b_r)?;
    let r = t.sigmoid(r_pre);
    let u_pre = gate_tape(t, v.w_hu, h_prev, v.w_xu, x, q.map(|q| (v.w_qu, q)), v.b_u)?;
    let u = t.sigmoid(u_pre);
    let hh = t.matmul(v.w_hh, h_prev)?;
    let z = t.mul(r, hh)?;
    let xh = t.matmul(v.w_xh, x)?;
    let mut c = t.add(z, xh)?;
    if let Some(q) = q {
        let qh = t.matmul(v.w_qh, q)?;
        c = t.add(c, qh)?;
    }
    let c = t.add_bias(c, v.b_hc)?;
    let candidate = t.tanh(c);
    // u*h + (1-u)*cand = cand + u*(h - cand)
    let diff = t.sub(h_prev, candidate)?;
    let gated = t.mul(u, diff)?;
    let h = t.add(candidate, gated)?;
    if v.hidden_bias {
        t.add_bias(h, v.b_h)
    } else {
        Ok(h)
    }
}

pub fn readout_tape(t: &mut Tape, v: &GruVars, h: Var) -> Result<Var> {
    let y = t.matmul(v.w_hq, h)?;
    t.add_bias(y, v.b_q)
}

/// One time sample of network input.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInput {
    pub t: f64,
    pub emg: Vec<f64>,
    /// Measured motion, present on history steps only.
    pub q: Option<f64>,
}

impl StepInput {
    fn features(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(1 + self.emg.len());
        f.push(self.t);
        f.extend_from_slice(&self.emg);
        f
    }
}

/// A batch of equally shaped windows in column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    /// `m` matrices of shape `n_in x B`.
    pub history_x: Vec<Matrix>,
    /// `m` matrices of shape `1 x B`.
    pub history_q: Vec<Matrix>,
    pub current_x: Matrix,
    /// Measured motion at the current step, `1 x B`.
    pub target: Matrix,
}

impl WindowBatch {
    pub fn history_steps(&self) -> usize {
        self.history_x.len()
    }

    pub fn len(&self) -> usize {
        self.current_x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stacks windows of `m` history inputs (with `q`) plus one current
    /// input. `targets` may be empty when no measurement is known.
    pub fn from_steps(windows: &[Vec<StepInput>], targets: &[f64]) -> Result<Self> {
        let first = windows.first().ok_or(Error::Empty("window batch"))?;
        let steps = first.len();
        if steps == 0 {
            return Err(Error::Empty("window"));
        }
        let m = steps - 1;
        let n_in = 1 + first[0].emg.len();
        let b = windows.len();
        if !targets.is_empty() && targets.len() != b {
            return Err(Error::ShapeMismatch(format!("{} targets for {b} windows", targets.len())));
        }
        let mut history_x = vec![Matrix::zeros((n_in, b)); m];
        let mut history_q = vec![Matrix::zeros((1, b)); m];
        let mut current_x = Matrix::zeros((n_in, b));
        for (col, w) in windows.iter().enumerate() {
            if w.len() != steps {
                return Err(Error::ShapeMismatch("windows differ in length".into()));
            }
            for (i, step) in w.iter().enumerate() {
                let f = step.features();
                if f.len() != n_in {
                    return Err(Error::ShapeMismatch("inconsistent sEMG channel count".into()));
                }
                let dst = if i < m { &mut history_x[i] } else { &mut current_x };
                for (r, v) in f.into_iter().enumerate() {
                    dst[[r, col]] = v;
                }
                if i < m {
                    history_q[i][[0, col]] =
                        step.q.ok_or_else(|| Error::InvalidParameter("history step without motion".into()))?;
                }
            }
        }
        let mut target = Matrix::zeros((1, b));
        for (col, v) in targets.iter().enumerate() {
            target[[0, col]] = *v;
        }
        Ok(Self { history_x, history_q, current_x, target })
    }
}

/// Teacher-forced prediction for every window in the batch (`1 x B`).
pub fn forward_teacher(batch: &WindowBatch, w: &GruWeights, h_init: Option<&Matrix>) -> Result<Matrix> {
    let b = batch.len();
    let mut h = match h_init {
        Some(h) => h.clone(),
        None => Matrix::zeros((w.hidden_size(), b)),
    };
    for (x, q) in batch.history_x.iter().zip(&batch.history_q) {
        h = gru_history_step(&h, x, q, w)?;
    }
    h = gru_current_step(&h, &batch.current_x, w)?;
    Ok(readout(&h, w))
}

/// Recorded teacher-forced prediction starting from a zero hidden state.
/// `history_q` overrides the batch motion (used for noise augmentation).
pub fn forward_teacher_tape(
    t: &mut Tape,
    v: &GruVars,
    batch: &WindowBatch,
    history_q: Option<&[Matrix]>,
) -> Result<Var> {
    let hidden = v.w_hh.shape().0;
    let qs = history_q.unwrap_or(&batch.history_q);
    if qs.len() != batch.history_steps() {
        return Err(Error::ShapeMismatch("history motion count".into()));
    }
    let mut h = t.constant(Matrix::zeros((hidden, batch.len())));
    for (x, q) in batch.history_x.iter().zip(qs) {
        let xv = t.constant(x.clone());
        let qv = t.constant(q.clone());
        h = gru_step_tape(t, v, h, xv, Some(qv))?;
    }
    let xv = t.constant(batch.current_x.clone());
    h = gru_step_tape(t, v, h, xv, None)?;
    readout_tape(t, v, h)
}

/// Autoregressive prediction over a whole sequence.
///
/// `inputs[k]` carries time and sEMG; `seed` holds the first `m` measured
/// motion values. Entry `k >= m` of the result is predicted from a window
/// whose history motions are earlier outputs of the model (or seed values).
pub fn rollout(inputs: &[StepInput], seed: &[f64], w: &GruWeights) -> Result<Vec<f64>> {
    let m = seed.len();
    if inputs.len() <= m {
        return Err(Error::InvalidParameter(format!("sequence of {} samples needs more than {m}", inputs.len())));
    }
    let col = |s: &StepInput| {
        let f = s.features();
        Matrix::from_shape_vec((f.len(), 1), f).expect("column")
    };
    let xs: Vec<Matrix> = inputs.iter().map(col).collect();
    let mut q: Vec<f64> = seed.to_vec();
    for k in m..inputs.len() {
        let mut h = Matrix::zeros((w.hidden_size(), 1));
        for i in k - m..k {
            let qi = Matrix::from_elem((1, 1), q[i]);
            h = gru_history_step(&h, &xs[i], &qi, w)?;
        }
        h = gru_current_step(&h, &xs[k], w)?;
        q.push(readout(&h, w)[[0, 0]]);
    }
    Ok(q)
}

/// Adds i.i.d. `N(0, sigma^2)` to every value.
pub fn augment_motion_noise<R: Rng + ?Sized>(q: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma == 0.0 {
        return q.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma >= 0");
    q.iter().map(|v| v + normal.sample(rng)).collect()
}

/// Plain Elman cell: `h = tanh(W_hh h + W_xh x + W_qh q + b_h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnWeights {
    pub w_hh: Matrix,
    pub w_xh: Matrix,
    pub w_qh: Matrix,
    pub w_hq: Matrix,
    pub b_h: Matrix,
    pub b_q: Matrix,
}

impl RnnWeights {
    pub fn init(hidden: usize, input: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (hidden as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let mut draw = |r, c| Matrix::from_shape_fn((r, c), |_| dist.sample(&mut rng));
        Self {
            w_hh: draw(hidden, hidden),
            w_xh: draw(hidden, input),
            w_qh: draw(hidden, 1),
            w_hq: draw(1, hidden),
            b_h: Matrix::zeros((hidden, 1)),
            b_q: Matrix::zeros((1, 1)),
        }
    }

    pub fn history_step(&self, h_prev: &Matrix, x: &Matrix, q: &Matrix) -> Matrix {
        (self.w_hh.dot(h_prev) + self.w_xh.dot(x) + self.w_qh.dot(q) + &self.b_h).mapv(f64::tanh)
    }

    pub fn current_step(&self, h_prev: &Matrix, x: &Matrix) -> Matrix {
        (self.w_hh.dot(h_prev) + self.w_xh.dot(x) + &self.b_h).mapv(f64::tanh)
    }

    pub fn readout(&self, h: &Matrix) -> Matrix {
        self.w_hq.dot(h) + &self.b_q
    }
}
