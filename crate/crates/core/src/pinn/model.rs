//! Fully connected network `(t, ζ) → (ψ_R, ψ_I)` with tanh hidden layers and
//! a linear output layer.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (outputs × inputs, row-major) followed by the bias vector.
//!
//! File layout (little-endian):
//!
//! ```text
//! [u8; 4]  magic "FMLP"
//! u32      format version (1)
//! u32      number of layer sizes L
//! u32 × L  layer sizes
//! u64      initialization seed
//! u8       activation tag (1 = tanh hidden / linear output)
//! f64 × P  parameters in the flat order above
//! ```

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Jet, NodeId, Tape};
use crate::error::{invalid, Error, Result};

const MAGIC: &[u8; 4] = b"FMLP";
const VERSION: u32 = 1;
const ACTIVATION_TANH: u8 = 1;

/// Shape and parameter offsets of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<usize>,
    params: Vec<f64>,
    shapes: Vec<LayerShape>,
    seed: u64,
}

fn validate_layers(layers: &[usize]) -> Result<()> {
    if layers.len() < 2 {
        return Err(invalid("a network needs at least an input and an output layer"));
    }
    if layers.contains(&0) {
        return Err(invalid(format!("layer widths must be positive: {layers:?}")));
    }
    if layers[0] != 2 || layers[layers.len() - 1] != 2 {
        return Err(Error::DimensionMismatch(format!(
            "network must map 2 inputs to 2 outputs, got {layers:?}"
        )));
    }
    Ok(())
}

fn layer_shapes(layers: &[usize]) -> Vec<LayerShape> {
    let mut offset = 0;
    layers
        .windows(2)
        .map(|w| {
            let shape = LayerShape {
                inputs: w[0],
                outputs: w[1],
                weights: offset,
                bias: offset + w[0] * w[1],
            };
            offset += w[0] * w[1] + w[1];
            shape
        })
        .collect()
}

/// Xavier-uniform weights, zero biases; deterministic in `seed`.
pub fn init_model(layers: &[usize], seed: u64) -> Result<MlpModel> {
    validate_layers(layers)?;
    let shapes = layer_shapes(layers);
    let count = shapes.last().map(|s| s.bias + s.outputs).unwrap_or(0);
    let mut params = vec![0.0; count];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in &shapes {
        let bound = (6.0 / (s.inputs + s.outputs) as f64).sqrt();
        for w in &mut params[s.weights..s.bias] {
            *w = rng.gen_range(-bound..bound);
        }
    }
    Ok(MlpModel { layers: layers.to_vec(), params, shapes, seed })
}

impl MlpModel {
    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Tape nodes created by one [`MlpModel::record`] call.
    pub fn node_estimate(&self) -> usize {
        let hidden: usize = self.shapes[..self.shapes.len() - 1].iter().map(|s| s.outputs).sum();
        2 + hidden + self.shapes.iter().map(|s| s.outputs).sum::<usize>()
    }

    fn is_hidden(&self, layer: usize) -> bool {
        layer + 1 < self.shapes.len()
    }

    /// Plain forward pass.
    pub fn forward(&self, t: f64, zeta: f64) -> [f64; 2] {
        let mut h = vec![t, zeta];
        for (l, s) in self.shapes.iter().enumerate() {
            let w = &self.params[s.weights..s.bias];
            let b = &self.params[s.bias..s.bias + s.outputs];
            let mut next: Vec<f64> = (0..s.outputs)
                .map(|o| b[o] + w[o * s.inputs..(o + 1) * s.inputs].iter().zip(&h).map(|(w, x)| w * x).sum::<f64>())
                .collect();
            if self.is_hidden(l) {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            h = next;
        }
        [h[0], h[1]]
    }

    /// Forward pass carrying input-derivative jets.
    pub fn forward_jets(&self, t: f64, zeta: f64) -> [Jet; 2] {
        let mut h = vec![Jet::seed_t(t), Jet::seed_zeta(zeta)];
        for (l, s) in self.shapes.iter().enumerate() {
            let w = &self.params[s.weights..s.bias];
            let next = (0..s.outputs).map(|o| {
                let mut acc = Jet::constant(self.params[s.bias + o]);
                for (wi, x) in w[o * s.inputs..(o + 1) * s.inputs].iter().zip(&h) {
                    acc.add_scaled(*wi, x);
                }
                if self.is_hidden(l) {
                    acc.tanh()
                } else {
                    acc
                }
            });
            h = next.collect();
        }
        [h[0], h[1]]
    }

    /// Records the forward pass on `tape`; returns the `[ψ_R, ψ_I]` nodes.
    pub fn record(&self, tape: &mut Tape, t: f64, zeta: f64) -> [NodeId; 2] {
        let mut start = tape.leaf(Jet::seed_t(t));
        tape.leaf(Jet::seed_zeta(zeta));
        let mut width = 2;
        for (l, s) in self.shapes.iter().enumerate() {
            let mut first = None;
            for o in 0..s.outputs {
                let id = tape.affine(start, width, &self.params, s.weights + o * s.inputs, s.bias + o);
                first.get_or_insert(id);
            }
            let mut layer_start = first.expect("layer widths are positive");
            if self.is_hidden(l) {
                let mut act = None;
                for o in 0..s.outputs {
                    let pre = NodeId::from_index(layer_start.index() + o);
                    let id = tape.tanh(pre);
                    act.get_or_insert(id);
                }
                layer_start = act.expect("layer widths are positive");
            }
            start = layer_start;
            width = s.outputs;
        }
        [start, NodeId::from_index(start.index() + 1)]
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(32 + self.params.len() * 8);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for &l in &self.layers {
            buf.extend_from_slice(&(l as u32).to_le_bytes());
        }
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.push(ACTIVATION_TANH);
        for p in &self.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let fmt = |what: &str| Error::Format(format!("model file: {what}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| fmt("truncated header"))?;
        if &magic != MAGIC {
            return Err(fmt("bad magic"));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut u32buf).map_err(|_| fmt("truncated header"))?;
            Ok(u32::from_le_bytes(u32buf))
        };
        if read_u32(&mut r)? != VERSION {
            return Err(fmt("unsupported version"));
        }
        let n = read_u32(&mut r)? as usize;
        if n > 1024 {
            return Err(fmt("implausible layer count"));
        }
        let layers = (0..n).map(|_| read_u32(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let mut seed = [0u8; 8];
        r.read_exact(&mut seed).map_err(|_| fmt("truncated header"))?;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag).map_err(|_| fmt("truncated header"))?;
        if tag[0] != ACTIVATION_TANH {
            return Err(fmt("unknown activation tag"));
        }
        let mut model = init_model(&layers, u64::from_le_bytes(seed))?;
        let mut bytes = vec![0u8; model.params.len() * 8];
        r.read_exact(&mut bytes).map_err(|_| fmt("truncated parameters"))?;
        for (p, c) in model.params.iter_mut().zip(bytes.chunks_exact(8)) {
            *p = f64::from_le_bytes(c.try_into().unwrap());
        }
        Ok(model)
    }
}

/// Input-derivative jets of both outputs at `(t, ζ)`.
pub fn network_jets(model: &MlpModel, t: f64, zeta: f64) -> Result<[Jet; 2]> {
    validate_layers(&model.layers)?;
    if model.shapes != layer_shapes(&model.layers) || model.param_count() != expected_count(&model.layers) {
        return Err(Error::DimensionMismatch("parameter layout does not match layer sizes".into()));
    }
    Ok(model.forward_jets(t, zeta))
}

fn expected_count(layers: &[usize]) -> usize {
    layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}
