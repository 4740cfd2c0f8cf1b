use rand::Rng;

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gate blocks inside the `4H` rows of each weight matrix, in this order.
pub const GATE_ORDER: [&str; 4] = ["input", "forget", "cell", "output"];

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// `[4H×d_in]`
    pub w: Tensor,
    /// `[4H×H]`
    pub u: Tensor,
    /// `[4H]`
    pub b: Tensor,
}

/// Stacked unidirectional LSTM. The encoding of a sequence is the
/// concatenation of every layer's hidden state at the last real token.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    layers: Vec<LstmLayer>,
    hidden: usize,
}

impl Lstm {
    /// Weights uniform in `±1/√H`; forget-gate bias block set to 1.
    pub fn new<R: Rng>(input: usize, hidden: usize, num_layers: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut uniform = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-bound..bound)).collect()
        };
        let layers = (0..num_layers)
            .map(|l| {
                let d_in = if l == 0 { input } else { hidden };
                let w = Tensor::new(vec![4 * hidden, d_in], uniform(4 * hidden * d_in)).unwrap();
                let u = Tensor::new(vec![4 * hidden, hidden], uniform(4 * hidden * hidden)).unwrap();
                let mut b = Tensor::vector(uniform(4 * hidden));
                b.data_mut()[hidden..2 * hidden].fill(1.0);
                LstmLayer { w, u, b }
            })
            .collect();
        Lstm { layers, hidden }
    }

    pub fn from_layers(layers: Vec<LstmLayer>) -> Result<Self> {
        let first = layers.first().ok_or(Error::EmptyInput("lstm layers"))?;
        let hidden = first.u.cols();
        let mut d_in = first.w.cols();
        for layer in &layers {
            let ok = layer.w.shape() == [4 * hidden, d_in]
                && layer.u.shape() == [4 * hidden, hidden]
                && layer.b.shape() == [4 * hidden];
            if !ok {
                return Err(Error::dimension("lstm layer", layer.w.shape(), layer.u.shape()));
            }
            d_in = hidden;
        }
        Ok(Lstm { layers, hidden })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Width of the sequence encoding.
    pub fn output_dim(&self) -> usize {
        self.hidden * self.layers.len()
    }

    pub fn layers(&self) -> &[LstmLayer] {
        &self.layers
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.w, &l.u, &l.b]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.u, &mut l.b])
            .collect()
    }

    /// Registers the parameters as trainable leaves.
    pub fn bind(&self, g: &mut Graph) -> BoundLstm {
        let layers = self
            .layers
            .iter()
            .map(|l| (g.param(l.w.clone()), g.param(l.u.clone()), g.param(l.b.clone())))
            .collect();
        BoundLstm {
            layers,
            hidden: self.hidden,
        }
    }
}

/// LSTM parameters registered on a graph.
#[derive(Debug, Clone)]
pub struct BoundLstm {
    layers: Vec<(Var, Var, Var)>,
    hidden: usize,
}

impl BoundLstm {
    /// Wraps `(w, u, b)` leaves already on a graph, one triple per layer.
    pub fn from_vars(g: &Graph, layers: Vec<(Var, Var, Var)>) -> Result<Self> {
        let first = layers.first().ok_or(Error::EmptyInput("lstm layers"))?;
        let hidden = g.value(first.1).cols();
        for &(w, u, b) in &layers {
            let (tw, tu, tb) = (g.value(w), g.value(u), g.value(b));
            if tw.rows() != 4 * hidden || tu.shape() != [4 * hidden, hidden] || tb.shape() != [4 * hidden] {
                return Err(Error::dimension("lstm layer", tw.shape(), tu.shape()));
            }
        }
        Ok(BoundLstm { layers, hidden })
    }

    pub fn vars(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|&(w, u, b)| [w, u, b]).collect()
    }

    /// One cell step over a batch: returns `(h, c)`.
    pub fn step(
        &self,
        g: &mut Graph,
        layer: usize,
        x: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var)> {
        let (w, u, b) = self.layers[layer];
        let hd = self.hidden;
        let from_input = g.linear(x, w, Some(b))?;
        let from_state = g.linear(h, u, None)?;
        let gates = g.add(from_input, from_state)?;
        let i = g.columns(gates, 0, hd)?;
        let f = g.columns(gates, hd, hd)?;
        let cand = g.columns(gates, 2 * hd, hd)?;
        let o = g.columns(gates, 3 * hd, hd)?;
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let cand = g.tanh(cand);
        let o = g.sigmoid(o);
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cand)?;
        let c_next = g.add(keep, write)?;
        let squashed = g.tanh(c_next);
        let h_next = g.mul(o, squashed)?;
        Ok((h_next, c_next))
    }

    /// Encodes a padded batch. `inputs[t]` is `[B×d]`; row `i` is read at
    /// position `lengths[i] − 1`, so trailing padding never affects it.
    /// Returns `[B × layers·H]`.
    pub fn encode_batch(&self, g: &mut Graph, inputs: &[Var], lengths: &[usize]) -> Result<Var> {
        let batch = lengths.len();
        if batch == 0 {
            return Err(Error::EmptyInput("batch"));
        }
        if let Some(&bad) = lengths.iter().find(|&&l| l == 0 || l > inputs.len()) {
            return Err(if bad == 0 {
                Error::EmptyInput("sequence of true length 0")
            } else {
                Error::dimension("encode", &[inputs.len()], &[bad])
            });
        }
        let steps = *lengths.iter().max().expect("non-empty");
        let mut layer_inputs: Vec<Var> = inputs[..steps].to_vec();
        let mut finals = Vec::with_capacity(self.layers.len());
        for layer in 0..self.layers.len() {
            let mut h = g.constant(Tensor::zeros(&[batch, self.hidden]));
            let mut c = g.constant(Tensor::zeros(&[batch, self.hidden]));
            let mut outputs = Vec::with_capacity(steps);
            for &x in &layer_inputs {
                (h, c) = self.step(g, layer, x, h, c)?;
                outputs.push(h);
            }
            let picks: Vec<(Var, usize)> = lengths
                .iter()
                .enumerate()
                .map(|(i, &len)| (outputs[len - 1], i))
                .collect();
            finals.push(g.pick_rows(&picks));
            layer_inputs = outputs;
        }
        g.concat_cols(&finals)
    }

    /// Encodes one `[len×d]` sequence whose first `true_len` rows are real tokens.
    /// Returns `[1 × layers·H]`.
    pub fn encode(&self, g: &mut Graph, seq: Var, true_len: usize) -> Result<Var> {
        if true_len == 0 {
            return Err(Error::EmptyInput("sequence of true length 0"));
        }
        let rows = g.value(seq).rows();
        if true_len > rows {
            return Err(Error::dimension("encode", g.value(seq).shape(), &[true_len]));
        }
        let inputs = (0..true_len)
            .map(|t| g.row(seq, t))
            .collect::<Result<Vec<_>>>()?;
        self.encode_batch(g, &inputs, &[true_len])
    }
}
