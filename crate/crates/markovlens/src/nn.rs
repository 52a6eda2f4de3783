//! Fixed-architecture dense network — input→64→64→output with tanh hidden
//! activations and a linear head — plus exact reverse-mode gradients and an
//! Adam optimizer. Everything is f64 and batch-first: rows are samples,
//! H1 = tanh(X·W1 + b1).

use ndarray::{Array1, Array2, Axis};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const HIDDEN: usize = 64;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

impl MlpParams {
    pub fn zeros(input_dim: usize, output_dim: usize) -> MlpParams {
        MlpParams {
            w1: Array2::zeros((input_dim, HIDDEN)),
            b1: Array1::zeros(HIDDEN),
            w2: Array2::zeros((HIDDEN, HIDDEN)),
            b2: Array1::zeros(HIDDEN),
            w3: Array2::zeros((HIDDEN, output_dim)),
            b3: Array1::zeros(output_dim),
        }
    }

    /// Orthogonal initialization: gain √2 on hidden layers, `head_gain` on
    /// the output layer, zero biases.
    pub fn orthogonal_init(
        input_dim: usize,
        output_dim: usize,
        head_gain: f64,
        rng: &mut ChaCha8Rng,
    ) -> MlpParams {
        let root2 = std::f64::consts::SQRT_2;
        MlpParams {
            w1: orthogonal(input_dim, HIDDEN, root2, rng),
            b1: Array1::zeros(HIDDEN),
            w2: orthogonal(HIDDEN, HIDDEN, root2, rng),
            b2: Array1::zeros(HIDDEN),
            w3: orthogonal(HIDDEN, output_dim, head_gain, rng),
            b3: Array1::zeros(output_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w3.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.for_each_all(|a| a.iter().all(|v| v.is_finite()))
    }

    fn for_each_all(&self, f: impl Fn(&[f64]) -> bool) -> bool {
        f(self.w1.as_slice().unwrap())
            && f(self.b1.as_slice().unwrap())
            && f(self.w2.as_slice().unwrap())
            && f(self.b2.as_slice().unwrap())
            && f(self.w3.as_slice().unwrap())
            && f(self.b3.as_slice().unwrap())
    }
}

/// Random matrix with orthonormal rows (rows ≤ cols) or columns (otherwise),
/// scaled by `gain`: twice-iterated Gram-Schmidt on a standard normal draw.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (n, m) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let mut q: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    for j in 0..m {
        for _ in 0..2 {
            for k in 0..j {
                let proj: f64 = q[j].iter().zip(&q[k]).map(|(a, b)| a * b).sum();
                let qk = q[k].clone();
                for (x, y) in q[j].iter_mut().zip(&qk) {
                    *x -= proj * y;
                }
            }
        }
        let norm: f64 = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        for x in q[j].iter_mut() {
            *x /= norm;
        }
    }
    let mut out = Array2::zeros((rows, cols));
    for j in 0..m {
        for i in 0..n {
            if rows >= cols {
                out[[i, j]] = gain * q[j][i];
            } else {
                out[[j, i]] = gain * q[j][i];
            }
        }
    }
    out
}

/// Activations saved by the batched forward pass for reuse in backward.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    x: Array2<f64>,
    h1: Array2<f64>,
    h2: Array2<f64>,
}

/// Batched forward pass: rows of `x` are samples. Returns outputs and the
/// cache needed for `mlp_backward`.
pub fn mlp_forward_batch(p: &MlpParams, x: Array2<f64>) -> (Array2<f64>, ForwardCache) {
    assert_eq!(
        x.ncols(),
        p.input_dim(),
        "input width {} does not match network input dim {}",
        x.ncols(),
        p.input_dim()
    );
    let h1 = (x.dot(&p.w1) + &p.b1).mapv(f64::tanh);
    let h2 = (h1.dot(&p.w2) + &p.b2).mapv(f64::tanh);
    let out = h2.dot(&p.w3) + &p.b3;
    (out, ForwardCache { x, h1, h2 })
}

/// Single-sample forward pass.
pub fn mlp_forward(p: &MlpParams, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != p.input_dim() {
        return Err(Error::Contract(format!(
            "mlp_forward: input length {} does not match network input dim {}",
            input.len(),
            p.input_dim()
        )));
    }
    let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).unwrap();
    let (out, _) = mlp_forward_batch(p, x);
    Ok(out.row(0).to_vec())
}

/// Parameter gradients; same shapes as [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

impl MlpGrads {
    pub fn zeros_like(p: &MlpParams) -> MlpGrads {
        MlpGrads {
            w1: Array2::zeros(p.w1.dim()),
            b1: Array1::zeros(p.b1.dim()),
            w2: Array2::zeros(p.w2.dim()),
            b2: Array1::zeros(p.b2.dim()),
            w3: Array2::zeros(p.w3.dim()),
            b3: Array1::zeros(p.b3.dim()),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in [&mut self.w1, &mut self.w2, &mut self.w3] {
            a.mapv_inplace(|v| v * factor);
        }
        for a in [&mut self.b1, &mut self.b2, &mut self.b3] {
            a.mapv_inplace(|v| v * factor);
        }
    }

    pub fn add(&mut self, other: &MlpGrads) {
        self.w1 += &other.w1;
        self.b1 += &other.b1;
        self.w2 += &other.w2;
        self.b2 += &other.b2;
        self.w3 += &other.w3;
        self.b3 += &other.b3;
    }

    /// Sum of squares of every gradient entry.
    pub fn squared_norm(&self) -> f64 {
        let m: f64 = [&self.w1, &self.w2, &self.w3]
            .iter()
            .map(|a| a.iter().map(|v| v * v).sum::<f64>())
            .sum();
        let b: f64 = [&self.b1, &self.b2, &self.b3]
            .iter()
            .map(|a| a.iter().map(|v| v * v).sum::<f64>())
            .sum();
        m + b
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1, &self.w2, &self.w3]
            .iter()
            .all(|a| a.iter().all(|v| v.is_finite()))
            && [&self.b1, &self.b2, &self.b3]
                .iter()
                .all(|a| a.iter().all(|v| v.is_finite()))
    }
}

/// Exact reverse-mode gradients of the batched forward map, summed over the
/// batch rows, given ∂L/∂output in `dout`.
pub fn mlp_backward(p: &MlpParams, cache: &ForwardCache, dout: &Array2<f64>) -> MlpGrads {
    assert_eq!(dout.dim(), (cache.x.nrows(), p.output_dim()));
    let dw3 = cache.h2.t().dot(dout);
    let db3 = dout.sum_axis(Axis(0));
    let dh2 = dout.dot(&p.w3.t());
    let dz2 = &dh2 * &cache.h2.mapv(|h| 1.0 - h * h);
    let dw2 = cache.h1.t().dot(&dz2);
    let db2 = dz2.sum_axis(Axis(0));
    let dh1 = dz2.dot(&p.w2.t());
    let dz1 = &dh1 * &cache.h1.mapv(|h| 1.0 - h * h);
    let dw1 = cache.x.t().dot(&dz1);
    let db1 = dz1.sum_axis(Axis(0));
    MlpGrads {
        w1: dw1,
        b1: db1,
        w2: dw2,
        b2: db2,
        w3: dw3,
        b3: db3,
    }
}

/// Adam moment accumulators for one [`MlpParams`].
#[derive(Debug, Clone)]
pub struct AdamState {
    m: MlpGrads,
    v: MlpGrads,
    t: u64,
}

impl AdamState {
    pub fn new(p: &MlpParams) -> AdamState {
        AdamState {
            m: MlpGrads::zeros_like(p),
            v: MlpGrads::zeros_like(p),
            t: 0,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }
}

fn adam_update_slice(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], t: u64, lr: f64) {
    let bc1 = 1.0 - BETA1.powi(t as i32);
    let bc2 = 1.0 - BETA2.powi(t as i32);
    for i in 0..p.len() {
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
}

/// One Adam update with bias correction. Errors on non-finite gradients.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &MlpGrads,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::Training(
            "adam_step: non-finite gradient encountered".into(),
        ));
    }
    state.t += 1;
    let t = state.t;
    let pairs: [(&mut Array2<f64>, &Array2<f64>, &mut Array2<f64>, &mut Array2<f64>); 3] = [
        (&mut params.w1, &grads.w1, &mut state.m.w1, &mut state.v.w1),
        (&mut params.w2, &grads.w2, &mut state.m.w2, &mut state.v.w2),
        (&mut params.w3, &grads.w3, &mut state.m.w3, &mut state.v.w3),
    ];
    for (p, g, m, v) in pairs {
        adam_update_slice(
            p.as_slice_mut().unwrap(),
            g.as_slice().unwrap(),
            m.as_slice_mut().unwrap(),
            v.as_slice_mut().unwrap(),
            t,
            lr,
        );
    }
    let bias_pairs: [(&mut Array1<f64>, &Array1<f64>, &mut Array1<f64>, &mut Array1<f64>); 3] = [
        (&mut params.b1, &grads.b1, &mut state.m.b1, &mut state.v.b1),
        (&mut params.b2, &grads.b2, &mut state.m.b2, &mut state.v.b2),
        (&mut params.b3, &grads.b3, &mut state.m.b3, &mut state.v.b3),
    ];
    for (p, g, m, v) in bias_pairs {
        adam_update_slice(
            p.as_slice_mut().unwrap(),
            g.as_slice().unwrap(),
            m.as_slice_mut().unwrap(),
            v.as_slice_mut().unwrap(),
            t,
            lr,
        );
    }
    Ok(())
}

/// Adam accumulators for a flat parameter vector (e.g. a log-std vector).
#[derive(Debug, Clone)]
pub struct VecAdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl VecAdamState {
    pub fn new(len: usize) -> VecAdamState {
        VecAdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

pub fn adam_step_vec(
    params: &mut [f64],
    grads: &[f64],
    state: &mut VecAdamState,
    lr: f64,
) -> Result<()> {
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Training(
            "adam_step: non-finite gradient encountered".into(),
        ));
    }
    state.t += 1;
    adam_update_slice(params, grads, &mut state.m, &mut state.v, state.t, lr);
    Ok(())
}
