//! Small fully connected networks with reverse-mode gradients and Adam.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::math::{exp, ln, sigmoid, sqrt, tanh};
use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu {
        slope: f64,
    },
    Tanh,
    Sigmoid,
    /// Softmax of `(z + g) / tau` over the block, `g` being Gumbel noise.
    GumbelSoftmax {
        tau: f64,
    },
    /// Different activations on consecutive column blocks.
    Segmented {
        segments: Vec<Segment>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub width: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkRole {
    Generator,
    Discriminator,
}

/// `y = act(x W + b)` with `W` stored `inputs x outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    pub role: NetworkRole,
    pub layers: Vec<Layer>,
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Matrix, Vec<f64>)>,
}

impl Gradients {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    input: Matrix,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
    /// Soft Gumbel-softmax values; differs from `post` under straight-through.
    soft: Vec<Matrix>,
}

impl Trace {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("network has layers")
    }

    /// Pre-activation values of the last layer.
    pub fn logits(&self) -> &Matrix {
        self.pre.last().expect("network has layers")
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions<'a> {
    /// Gumbel noise, same shape as the output; zero when absent.
    pub noise: Option<&'a Matrix>,
    /// Emit one-hot argmax from Gumbel-softmax blocks while differentiating
    /// the soft values (straight-through).
    pub hard: bool,
}

/// `c = op(a) * op(b) + beta * c`, `op` being an optional transpose.
/// `a` is logically `m x k`, `b` is `k x n`, all row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if b_t {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    // SAFETY: the lengths asserted above cover every index reachable from
    // the given dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn sample_gumbel(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let mut g = Matrix::zeros(rows, cols);
    for v in g.as_mut_slice() {
        let u: f64 = rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12);
        *v = -ln(-ln(u));
    }
    g
}

fn apply(
    act: &Activation,
    pre: &Matrix,
    c0: usize,
    width: usize,
    opts: &ForwardOptions,
    post: &mut Matrix,
    soft: &mut Matrix,
) {
    let n = pre.rows();
    match act {
        Activation::Segmented { segments } => {
            let mut c = c0;
            for s in segments {
                apply(&s.activation, pre, c, s.width, opts, post, soft);
                c += s.width;
            }
        }
        Activation::GumbelSoftmax { tau } => {
            for i in 0..n {
                let z = &pre.row(i)[c0..c0 + width];
                let s = &mut soft.row_mut(i)[c0..c0 + width];
                match opts.noise {
                    Some(g) => s
                        .iter_mut()
                        .zip(z.iter().zip(&g.row(i)[c0..c0 + width]))
                        .for_each(|(o, (a, b))| *o = (a + b) / tau),
                    None => s.iter_mut().zip(z).for_each(|(o, a)| *o = a / tau),
                }
                let top = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                s.iter_mut().for_each(|v| *v = exp(*v - top));
                let total: f64 = s.iter().sum();
                s.iter_mut().for_each(|v| *v /= total);
                let best = (0..width).fold(0, |b, j| if s[j] > s[b] { j } else { b });
                let out = &mut post.row_mut(i)[c0..c0 + width];
                for j in 0..width {
                    out[j] = if opts.hard {
                        (j == best) as u8 as f64
                    } else {
                        s[j]
                    };
                }
            }
        }
        simple => {
            for i in 0..n {
                let z = &pre.row(i)[c0..c0 + width];
                let out = &mut post.row_mut(i)[c0..c0 + width];
                for (o, &v) in out.iter_mut().zip(z) {
                    *o = match simple {
                        Activation::Identity => v,
                        Activation::Relu => v.max(0.0),
                        Activation::LeakyRelu { slope } => {
                            if v > 0.0 {
                                v
                            } else {
                                slope * v
                            }
                        }
                        Activation::Tanh => tanh(v),
                        Activation::Sigmoid => sigmoid(v),
                        _ => unreachable!(),
                    };
                }
            }
        }
    }
}

/// Turns `d loss / d output` into `d loss / d pre-activation` in place.
fn apply_backward(
    act: &Activation,
    pre: &Matrix,
    post: &Matrix,
    soft: &Matrix,
    c0: usize,
    width: usize,
    grad: &mut Matrix,
) {
    let n = pre.rows();
    match act {
        Activation::Segmented { segments } => {
            let mut c = c0;
            for s in segments {
                apply_backward(&s.activation, pre, post, soft, c, s.width, grad);
                c += s.width;
            }
        }
        Activation::GumbelSoftmax { tau } => {
            for i in 0..n {
                let y = &soft.row(i)[c0..c0 + width];
                let g = &mut grad.row_mut(i)[c0..c0 + width];
                let inner: f64 = y.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
                for (gj, &yj) in g.iter_mut().zip(y) {
                    *gj = yj * (*gj - inner) / tau;
                }
            }
        }
        simple => {
            for i in 0..n {
                let z = &pre.row(i)[c0..c0 + width];
                let a = &post.row(i)[c0..c0 + width];
                let g = &mut grad.row_mut(i)[c0..c0 + width];
                for j in 0..width {
                    g[j] *= match simple {
                        Activation::Identity => 1.0,
                        Activation::Relu => (z[j] > 0.0) as u8 as f64,
                        Activation::LeakyRelu { slope } => {
                            if z[j] > 0.0 {
                                1.0
                            } else {
                                *slope
                            }
                        }
                        Activation::Tanh => 1.0 - a[j] * a[j],
                        Activation::Sigmoid => a[j] * (1.0 - a[j]),
                        _ => unreachable!(),
                    };
                }
            }
        }
    }
}

fn segment_width(act: &Activation) -> Option<usize> {
    match act {
        Activation::Segmented { segments } => Some(segments.iter().map(|s| s.width).sum()),
        _ => None,
    }
}

impl MlpNetwork {
    /// Layers `input -> hidden[0] -> ... -> output`, initialized uniformly
    /// in `+-1/sqrt(fan_in)`.
    pub fn new(
        role: NetworkRole,
        input: usize,
        hidden: &[usize],
        hidden_activation: Activation,
        output: usize,
        output_activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        if let Some(w) = segment_width(&output_activation) {
            if w != output {
                bail!(
                    Shape,
                    "output segments cover {w} columns, output has {output}"
                );
            }
        }
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let bound = 1.0 / sqrt(w[0].max(1) as f64);
                let mut weights = Matrix::zeros(w[0], w[1]);
                for v in weights.as_mut_slice() {
                    *v = rng.random_range(-bound..bound);
                }
                let bias = (0..w[1]).map(|_| rng.random_range(-bound..bound)).collect();
                let activation = if l + 2 == dims.len() {
                    output_activation.clone()
                } else {
                    hidden_activation.clone()
                };
                Layer {
                    weights,
                    bias,
                    activation,
                }
            })
            .collect();
        Ok(Self { role, layers })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("network has layers").outputs()
    }

    pub fn n_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn forward(&self, x: &Matrix, opts: &ForwardOptions) -> Result<Trace> {
        if x.cols() != self.input_width() {
            bail!(
                Shape,
                "network takes {} inputs, got {}",
                self.input_width(),
                x.cols()
            );
        }
        let n = x.rows();
        let mut trace = Trace {
            input: x.clone(),
            pre: Vec::new(),
            post: Vec::new(),
            soft: Vec::new(),
        };
        for (l, layer) in self.layers.iter().enumerate() {
            let (fi, fo) = (layer.inputs(), layer.outputs());
            let current = if l == 0 {
                &trace.input
            } else {
                &trace.post[l - 1]
            };
            let mut pre = Matrix::zeros(n, fo);
            for i in 0..n {
                pre.row_mut(i).copy_from_slice(&layer.bias);
            }
            gemm(
                n,
                fi,
                fo,
                current.as_slice(),
                false,
                layer.weights.as_slice(),
                false,
                1.0,
                pre.as_mut_slice(),
            );
            let mut post = Matrix::zeros(n, fo);
            let mut soft = Matrix::zeros(
                n,
                if contains_gumbel(&layer.activation) {
                    fo
                } else {
                    0
                },
            );
            let last = l + 1 == self.layers.len();
            let layer_opts = ForwardOptions {
                noise: if last { opts.noise } else { None },
                hard: opts.hard,
            };
            if let Some(g) = layer_opts.noise {
                if g.rows() != n || g.cols() != fo {
                    bail!(
                        Shape,
                        "Gumbel noise is {}x{}, output is {n}x{fo}",
                        g.rows(),
                        g.cols()
                    );
                }
            }
            apply(
                &layer.activation,
                &pre,
                0,
                fo,
                &layer_opts,
                &mut post,
                &mut soft,
            );
            if let Some(bad) = post.as_slice().iter().position(|v| !v.is_finite()) {
                bail!(
                    Numerical,
                    "non-finite activation in layer {l} at flat index {bad}"
                );
            }
            trace.pre.push(pre);
            trace.post.push(post);
            trace.soft.push(soft);
        }
        Ok(trace)
    }

    /// Gradients of a scalar loss given `d loss / d output`. `extra_logit_grad`
    /// is added to the gradient at the last layer's pre-activations (for
    /// penalties defined on logits). Also returns `d loss / d input`.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_output: &Matrix,
        extra_logit_grad: Option<&Matrix>,
    ) -> Result<(Gradients, Matrix)> {
        let out = trace.output();
        if grad_output.rows() != out.rows() || grad_output.cols() != out.cols() {
            bail!(
                Shape,
                "output gradient {}x{} for output {}x{}",
                grad_output.rows(),
                grad_output.cols(),
                out.rows(),
                out.cols()
            );
        }
        let n = out.rows();
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut grad = grad_output.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (fi, fo) = (layer.inputs(), layer.outputs());
            apply_backward(
                &layer.activation,
                &trace.pre[l],
                &trace.post[l],
                &trace.soft[l],
                0,
                fo,
                &mut grad,
            );
            if l + 1 == self.layers.len() {
                if let Some(extra) = extra_logit_grad {
                    if extra.rows() != n || extra.cols() != fo {
                        bail!(Shape, "logit gradient has wrong shape");
                    }
                    for (g, e) in grad.as_mut_slice().iter_mut().zip(extra.as_slice()) {
                        *g += e;
                    }
                }
            }
            let mut dw = Matrix::zeros(fi, fo);
            let layer_input = if l == 0 {
                &trace.input
            } else {
                &trace.post[l - 1]
            };
            gemm(
                fi,
                n,
                fo,
                layer_input.as_slice(),
                true,
                grad.as_slice(),
                false,
                0.0,
                dw.as_mut_slice(),
            );
            let mut db = vec![0.0; fo];
            for row in grad.iter_rows() {
                for (b, g) in db.iter_mut().zip(row) {
                    *b += g;
                }
            }
            let mut dx = Matrix::zeros(n, fi);
            gemm(
                n,
                fo,
                fi,
                grad.as_slice(),
                false,
                layer.weights.as_slice(),
                true,
                0.0,
                dx.as_mut_slice(),
            );
            if dw.as_slice().iter().chain(&db).any(|v| !v.is_finite()) {
                bail!(Numerical, "non-finite gradient in layer {l}");
            }
            layers.push((dw, db));
            grad = dx;
        }
        layers.reverse();
        Ok((Gradients { layers }, grad))
    }
}

fn contains_gumbel(act: &Activation) -> bool {
    match act {
        Activation::GumbelSoftmax { .. } => true,
        Activation::Segmented { segments } => {
            segments.iter().any(|s| contains_gumbel(&s.activation))
        }
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(shapes: &[usize], learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_network(net: &MlpNetwork, learning_rate: f64) -> Self {
        let shapes: Vec<usize> = net
            .layers
            .iter()
            .flat_map(|l| [l.weights.as_slice().len(), l.bias.len()])
            .collect();
        Self::new(&shapes, learning_rate)
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState) -> Result<()> {
    let same = params.len() == grads.len()
        && params.len() == state.first_moment.len()
        && params
            .iter()
            .zip(grads)
            .zip(&state.first_moment)
            .all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
    if !same {
        bail!(
            Shape,
            "{}",
            format!(
                "Adam shapes differ: {} parameter blocks, {} gradient blocks",
                params.len(),
                grads.len()
            )
        );
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - crate::math::powi(state.beta1, t);
    let c2 = 1.0 - crate::math::powi(state.beta2, t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        for j in 0..p.len() {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            let mh = m[j] / c1;
            let vh = v[j] / c2;
            p[j] -= state.learning_rate * mh / (sqrt(vh) + state.epsilon);
        }
    }
    Ok(())
}

impl MlpNetwork {
    pub fn apply_adam(&mut self, grads: &Gradients, state: &mut AdamState) -> Result<()> {
        let g = grads.slices();
        adam_step(&mut self.parameters_mut(), &g, state)
    }
}
