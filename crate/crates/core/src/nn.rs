//! Dense tanh network `t -> x_pred` with second-order jets and reverse-mode
//! gradients.
//!
//! Each grid time is pushed through the network as a jet `(u, u', u'')`,
//! derivatives taken with respect to the input time. Affine layers act
//! linearly on all three slots and tanh obeys
//!
//! ```text
//! (tanh u, s u', s u'' - 2 tanh(u) s u'^2),   s = 1 - tanh^2 u
//! ```
//!
//! so one pass yields `x_pred`, `x_pred'` and `x_pred''` exactly. The batched
//! pass stores its intermediates and differentiates the jet slots with respect
//! to every weight and bias.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer widths `[1, K1, ..., K_{L-1}, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LayerSpec {
    sizes: Vec<usize>,
}

impl LayerSpec {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 3 {
            return Err(Error::InvalidConfig(
                "a network needs at least one hidden layer".into(),
            ));
        }
        if sizes[0] != 1 || sizes[sizes.len() - 1] != 1 {
            return Err(Error::InvalidConfig("input and output widths must be 1".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be >= 1".into()));
        }
        Ok(Self { sizes })
    }

    /// `depth` hidden layers of `width` neurons, the `depth x width` notation.
    pub fn hidden(depth: usize, width: usize) -> Result<Self> {
        let mut sizes = vec![1];
        sizes.extend(std::iter::repeat_n(width, depth));
        sizes.push(1);
        Self::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of affine maps.
    pub fn n_affine(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn hidden_layers(&self) -> &[usize] {
        &self.sizes[1..self.sizes.len() - 1]
    }

    /// `(depth, width)` when every hidden layer has the same width.
    pub fn uniform_shape(&self) -> Option<(usize, usize)> {
        let hidden = self.hidden_layers();
        let w = hidden[0];
        hidden.iter().all(|&k| k == w).then_some((hidden.len(), w))
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// Offset of layer `l`'s weight block in the flat vector; its bias follows
    /// the `out * in` weights.
    fn offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.n_affine());
        let mut acc = 0;
        for w in self.sizes.windows(2) {
            offs.push(acc);
            acc += w[1] * w[0] + w[1];
        }
        offs
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.uniform_shape() {
            Some((depth, width)) => write!(f, "{depth}x{width}"),
            None => {
                let parts: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

/// Accepts `6x30` or an explicit width list `1,30,30,1`.
impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidConfig(format!("cannot parse layer spec {s:?}"));
        if let Some((d, w)) = s.split_once(['x', 'X', '×']) {
            let depth = d.trim().parse().map_err(|_| bad())?;
            let width = w.trim().parse().map_err(|_| bad())?;
            return Self::hidden(depth, width);
        }
        let sizes = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        Self::new(sizes)
    }
}

impl TryFrom<Vec<usize>> for LayerSpec {
    type Error = Error;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Self::new(sizes)
    }
}

impl From<LayerSpec> for Vec<usize> {
    fn from(spec: LayerSpec) -> Self {
        spec.sizes
    }
}

/// Weights and biases stored as one flat vector, layer by layer: the
/// row-major `(K_l x K_{l-1})` weight matrix followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    spec: LayerSpec,
    offsets: Vec<usize>,
    flat: Vec<f64>,
}

impl NetworkParams {
    pub fn from_flat(spec: LayerSpec, flat: Vec<f64>) -> Result<Self> {
        crate::error::check_len(spec.param_count(), flat.len())?;
        if !flat.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("parameters must be finite".into()));
        }
        let offsets = spec.offsets();
        Ok(Self { spec, offsets, flat })
    }

    pub fn zeros(spec: LayerSpec) -> Self {
        let n = spec.param_count();
        Self::from_flat(spec, vec![0.0; n]).expect("zero vector has the right length")
    }

    /// Assemble from per-layer matrices and bias vectors.
    pub fn from_layers(spec: LayerSpec, weights: &[Array2<f64>], biases: &[Vec<f64>]) -> Result<Self> {
        crate::error::check_len(spec.n_affine(), weights.len())?;
        crate::error::check_len(spec.n_affine(), biases.len())?;
        let mut flat = Vec::with_capacity(spec.param_count());
        for (l, (w, b)) in weights.iter().zip(biases).enumerate() {
            let (rows, cols) = (spec.sizes[l + 1], spec.sizes[l]);
            if w.dim() != (rows, cols) {
                return Err(Error::InvalidConfig(format!(
                    "layer {l}: weight shape {:?}, expected {:?}",
                    w.dim(),
                    (rows, cols)
                )));
            }
            crate::error::check_len(rows, b.len())?;
            flat.extend(w.iter());
            flat.extend(b);
        }
        Self::from_flat(spec, flat)
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.flat
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (rows, cols) = (self.spec.sizes[layer + 1], self.spec.sizes[layer]);
        let off = self.offsets[layer];
        ArrayView2::from_shape((rows, cols), &self.flat[off..off + rows * cols])
            .expect("offsets match the layer spec")
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let (rows, cols) = (self.spec.sizes[layer + 1], self.spec.sizes[layer]);
        let off = self.offsets[layer] + rows * cols;
        &self.flat[off..off + rows]
    }

    pub fn to_layers(&self) -> (Vec<Array2<f64>>, Vec<Vec<f64>>) {
        (0..self.spec.n_affine())
            .map(|l| (self.weights(l).to_owned(), self.bias(l).to_vec()))
            .unzip()
    }

    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let sizes: Vec<String> = self.spec.sizes.iter().map(|s| s.to_string()).collect();
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "layers {}", sizes.join(","))?;
            for v in &self.flat {
                writeln!(out, "{v}")?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn read_checkpoint(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = std::io::BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, "empty checkpoint"))?
            .map_err(|e| Error::io(path, e))?;
        let sizes = header
            .strip_prefix("layers ")
            .ok_or_else(|| Error::parse(path, "missing `layers` header"))?;
        let spec: LayerSpec = sizes.parse()?;
        let mut flat = Vec::with_capacity(spec.param_count());
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let v = line
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, format!("line {}: not a number", i + 2)))?;
            flat.push(v);
        }
        Self::from_flat(spec, flat)
    }
}

/// Glorot-normal weights, zero biases.
pub fn init_params(spec: &LayerSpec, seed: u64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = Vec::with_capacity(spec.param_count());
    for w in spec.sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("std is positive and finite");
        flat.extend((0..fan_in * fan_out).map(|_| normal.sample(&mut rng)));
        flat.extend(std::iter::repeat_n(0.0, fan_out));
    }
    NetworkParams::from_flat(spec.clone(), flat).expect("init produces a consistent vector")
}

/// A value and its first two derivatives with respect to the input time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Jet2 {
    pub val: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 {
        val: 0.0,
        d1: 0.0,
        d2: 0.0,
    };

    pub fn new(val: f64, d1: f64, d2: f64) -> Self {
        Self { val, d1, d2 }
    }

    /// The identity jet at `t`.
    pub fn variable(t: f64) -> Self {
        Self::new(t, 1.0, 0.0)
    }

    #[inline]
    pub fn tanh(self) -> Self {
        let a = self.val.tanh();
        let s = 1.0 - a * a;
        Self {
            val: a,
            d1: s * self.d1,
            d2: s * self.d2 - 2.0 * a * s * self.d1 * self.d1,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.val.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }
}

/// `x_pred(t)`.
pub fn forward(params: &NetworkParams, t: f64) -> f64 {
    let n = params.spec.n_affine();
    let mut u = vec![t];
    for l in 0..n {
        let w = params.weights(l);
        let b = params.bias(l);
        let mut z: Vec<f64> = w
            .outer_iter()
            .zip(b)
            .map(|(row, &bi)| {
                let mut acc = 0.0;
                for (wij, uj) in row.iter().zip(&u) {
                    acc += wij * uj;
                }
                acc + bi
            })
            .collect();
        if l + 1 < n {
            z.iter_mut().for_each(|v| *v = v.tanh());
        }
        u = z;
    }
    u[0]
}

/// `(x_pred, x_pred', x_pred'')` at `t`; the value slot is bit-identical to
/// [`forward`].
pub fn forward_jet(params: &NetworkParams, t: f64) -> Jet2 {
    let n = params.spec.n_affine();
    let mut u = vec![Jet2::variable(t)];
    for l in 0..n {
        let w = params.weights(l);
        let b = params.bias(l);
        let mut z: Vec<Jet2> = w
            .outer_iter()
            .zip(b)
            .map(|(row, &bi)| {
                let mut acc = Jet2::ZERO;
                for (wij, uj) in row.iter().zip(&u) {
                    acc.val += wij * uj.val;
                    acc.d1 += wij * uj.d1;
                    acc.d2 += wij * uj.d2;
                }
                acc.val += bi;
                acc
            })
            .collect();
        if l + 1 < n {
            z.iter_mut().for_each(|j| *j = j.tanh());
        }
        u = z;
    }
    u[0]
}

/// A scalar loss of the jets at every grid point.
///
/// `evaluate` fills `adjoint[i]` with the partial derivatives of the loss with
/// respect to `jets[i].val`, `.d1` and `.d2`.
pub trait JetLoss {
    type Output;

    fn evaluate(&self, jets: &[Jet2], adjoint: &mut [Jet2]) -> (f64, Self::Output);
}

impl<F> JetLoss for F
where
    F: Fn(&[Jet2], &mut [Jet2]) -> f64,
{
    type Output = ();

    fn evaluate(&self, jets: &[Jet2], adjoint: &mut [Jet2]) -> (f64, ()) {
        (self(jets, adjoint), ())
    }
}

/// Intermediates of one batched jet pass. Every matrix is `(width, 3N)` with
/// the value, first- and second-derivative slots in consecutive column blocks.
struct Tape {
    n: usize,
    /// Layer inputs; `inputs[0]` is the seeded time jet.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of every affine map.
    pre: Vec<Array2<f64>>,
}

fn jet_pass(params: &NetworkParams, times: &[f64]) -> Tape {
    let n = times.len();
    let layers = params.spec.n_affine();
    let mut input = Array2::<f64>::zeros((1, 3 * n));
    {
        let mut row = input.row_mut(0);
        for (i, &t) in times.iter().enumerate() {
            row[i] = t;
            row[n + i] = 1.0;
        }
    }

    let mut inputs = Vec::with_capacity(layers);
    let mut pre = Vec::with_capacity(layers);
    for l in 0..layers {
        let w = params.weights(l);
        let mut z = w.dot(&input);
        for (mut row, &bi) in z.axis_iter_mut(Axis(0)).zip(params.bias(l)) {
            row.slice_mut(s![..n]).mapv_inplace(|v| v + bi);
        }
        inputs.push(input);
        if l + 1 < layers {
            let mut a = z.clone();
            for mut row in a.axis_iter_mut(Axis(0)) {
                let row = row.as_slice_mut().expect("standard layout");
                let (val, rest) = row.split_at_mut(n);
                let (d1, d2) = rest.split_at_mut(n);
                for k in 0..n {
                    let j = Jet2::new(val[k], d1[k], d2[k]).tanh();
                    val[k] = j.val;
                    d1[k] = j.d1;
                    d2[k] = j.d2;
                }
            }
            pre.push(z);
            input = a;
        } else {
            pre.push(z);
            input = Array2::zeros((0, 0));
        }
    }
    Tape { n, inputs, pre }
}

fn output_jets(tape: &Tape) -> Vec<Jet2> {
    let out = tape.pre.last().expect("at least one layer").row(0);
    let n = tape.n;
    (0..n)
        .map(|k| Jet2::new(out[k], out[n + k], out[2 * n + k]))
        .collect()
}

/// Batched [`forward_jet`] over a grid of times.
pub fn forward_jets(params: &NetworkParams, times: &[f64]) -> Vec<Jet2> {
    output_jets(&jet_pass(params, times))
}

/// Gradient of `loss(jets over times)` with respect to the flat parameter
/// vector, by reverse-mode through the jet pass.
pub fn loss_gradient<L: JetLoss>(
    params: &NetworkParams,
    times: &[f64],
    loss: &L,
) -> (f64, L::Output, Vec<f64>) {
    let tape = jet_pass(params, times);
    let n = tape.n;
    let jets = output_jets(&tape);
    let mut adjoint = vec![Jet2::ZERO; n];
    let (value, out) = loss.evaluate(&jets, &mut adjoint);

    let mut grad = vec![0.0; params.len()];
    let layers = params.spec.n_affine();

    // Adjoint of the last pre-activation (the network output).
    let mut g = Array2::<f64>::zeros((1, 3 * n));
    {
        let mut row = g.row_mut(0);
        for (k, adj) in adjoint.iter().enumerate() {
            row[k] = adj.val;
            row[n + k] = adj.d1;
            row[2 * n + k] = adj.d2;
        }
    }

    for l in (0..layers).rev() {
        if l + 1 < layers {
            tanh_jet_backward(&tape.pre[l], &mut g, n);
        }
        let (rows, cols) = (params.spec.sizes[l + 1], params.spec.sizes[l]);
        let off = params.offsets[l];
        let gw = g.dot(&tape.inputs[l].t());
        grad[off..off + rows * cols].copy_from_slice(gw.as_slice().expect("standard layout"));
        for (gb, row) in grad[off + rows * cols..off + rows * cols + rows]
            .iter_mut()
            .zip(g.axis_iter(Axis(0)))
        {
            *gb = row.slice(s![..n]).sum();
        }
        if l > 0 {
            g = params.weights(l).t().dot(&g);
        }
    }

    (value, out, grad)
}

/// Turns the adjoint of a tanh layer's output jets into the adjoint of its
/// pre-activation jets, in place.
fn tanh_jet_backward(pre: &Array2<f64>, g: &mut Array2<f64>, n: usize) {
    for (zrow, mut grow) in pre.axis_iter(Axis(0)).zip(g.axis_iter_mut(Axis(0))) {
        let zrow = zrow.as_slice().expect("standard layout");
        let grow = grow.as_slice_mut().expect("standard layout");
        let (gv, rest) = grow.split_at_mut(n);
        let (g1, g2) = rest.split_at_mut(n);
        for k in 0..n {
            let z = zrow[k];
            let z1 = zrow[n + k];
            let z2 = zrow[2 * n + k];
            let a = z.tanh();
            let s = 1.0 - a * a;
            let (ga, ga1, ga2) = (gv[k], g1[k], g2[k]);
            gv[k] = ga * s
                - ga1 * 2.0 * a * s * z1
                - ga2 * (2.0 * a * s * z2 + 2.0 * s * (1.0 - 3.0 * a * a) * z1 * z1);
            g1[k] = ga1 * s - ga2 * 4.0 * a * s * z1;
            g2[k] = ga2 * s;
        }
    }
}
