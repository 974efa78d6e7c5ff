use super::jet::{tanh_derivatives, Jet, Slot};

/// Index of a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub(crate) fn from_index(index: usize) -> NodeId {
        NodeId(index as u32)
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    /// `Σ_j w[weights + j] · node[start + j] + w[bias]` (bias feeds the value slot).
    Affine { start: u32, len: u32, weights: u32, bias: u32 },
    Tanh(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    /// A constant jet holding one slot of the operand as its value.
    Slot(NodeId, Slot),
}

/// Append-only record of jet operations.
///
/// Weights are referenced by offset into a flat parameter slice that is
/// passed to both [`Tape::affine`] and [`Tape::reverse`], so gradients come
/// out in the same flat layout.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    values: Vec<Jet>,
    ops: Vec<Op>,
    adjoints: Vec<Jet>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        Self {
            values: Vec::with_capacity(nodes),
            ops: Vec::with_capacity(nodes),
            adjoints: Vec::with_capacity(nodes),
        }
    }

    pub fn clear(&mut self) {
        self.values.clear();
        self.ops.clear();
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: NodeId) -> Jet {
        self.values[id.index()]
    }

    fn push(&mut self, value: Jet, op: Op) -> NodeId {
        let id = NodeId(self.values.len() as u32);
        self.values.push(value);
        self.ops.push(op);
        id
    }

    pub fn leaf(&mut self, value: Jet) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.leaf(Jet::constant(value))
    }

    /// Affine combination of the `len` consecutive nodes starting at `start`.
    pub fn affine(
        &mut self,
        start: NodeId,
        len: usize,
        params: &[f64],
        weights: usize,
        bias: usize,
    ) -> NodeId {
        let inputs = &self.values[start.index()..start.index() + len];
        let mut out = Jet::constant(params[bias]);
        for (x, w) in inputs.iter().zip(&params[weights..weights + len]) {
            out.add_scaled(*w, x);
        }
        self.push(
            out,
            Op::Affine { start: start.0, len: len as u32, weights: weights as u32, bias: bias as u32 },
        )
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).tanh();
        self.push(v, Op::Tanh(a))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let v = self.value(a).scale(k);
        self.push(v, Op::Scale(a, k))
    }

    pub fn slot(&mut self, a: NodeId, slot: Slot) -> NodeId {
        let v = Jet::constant(self.value(a).slot(slot));
        self.push(v, Op::Slot(a, slot))
    }

    /// Reverse sweep from the value slot of `output`, accumulating
    /// `∂ output.value / ∂ params` into `grad`.
    pub fn reverse(&mut self, output: NodeId, params: &[f64], grad: &mut [f64]) {
        let n = output.index() + 1;
        self.adjoints.clear();
        self.adjoints.resize(n, Jet::ZERO);
        self.adjoints[output.index()].value = 1.0;

        for k in (0..n).rev() {
            let adj = self.adjoints[k];
            if adj == Jet::ZERO {
                continue;
            }
            match self.ops[k] {
                Op::Leaf => {}
                Op::Affine { start, len, weights, bias } => {
                    let (start, len, weights) = (start as usize, len as usize, weights as usize);
                    grad[bias as usize] += adj.value;
                    for j in 0..len {
                        let x = self.values[start + j];
                        grad[weights + j] += adj.dot(&x);
                        self.adjoints[start + j].add_scaled(params[weights + j], &adj);
                    }
                }
                Op::Tanh(a) => {
                    let x = self.values[a.index()];
                    let [_, f1, f2, f3, f4] = tanh_derivatives(x.value);
                    let (t, tt, ttt) = (x.d_t, x.d_tt, x.d_ttt);
                    let target = &mut self.adjoints[a.index()];
                    target.value += adj.value * f1
                        + adj.d_t * f2 * t
                        + adj.d_zeta * f2 * x.d_zeta
                        + adj.d_tt * (f3 * t * t + f2 * tt)
                        + adj.d_ttt * (f4 * t * t * t + 3.0 * f3 * t * tt + f2 * ttt);
                    target.d_t += adj.d_t * f1
                        + adj.d_tt * 2.0 * f2 * t
                        + adj.d_ttt * (3.0 * f3 * t * t + 3.0 * f2 * tt);
                    target.d_tt += adj.d_tt * f1 + adj.d_ttt * 3.0 * f2 * t;
                    target.d_ttt += adj.d_ttt * f1;
                    target.d_zeta += adj.d_zeta * f1;
                }
                Op::Add(a, b) => {
                    self.adjoints[a.index()].add_scaled(1.0, &adj);
                    self.adjoints[b.index()].add_scaled(1.0, &adj);
                }
                Op::Sub(a, b) => {
                    self.adjoints[a.index()].add_scaled(1.0, &adj);
                    self.adjoints[b.index()].add_scaled(-1.0, &adj);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.values[a.index()], self.values[b.index()]);
                    let da = mul_pullback(&adj, &vb);
                    let db = mul_pullback(&adj, &va);
                    self.adjoints[a.index()].add_scaled(1.0, &da);
                    self.adjoints[b.index()].add_scaled(1.0, &db);
                }
                Op::Scale(a, s) => self.adjoints[a.index()].add_scaled(s, &adj),
                Op::Slot(a, slot) => *self.adjoints[a.index()].slot_mut(slot) += adj.value,
            }
        }
    }
}

/// Adjoint of one factor of a jet product given the other factor `other`.
fn mul_pullback(adj: &Jet, other: &Jet) -> Jet {
    Jet {
        value: adj.dot(other),
        d_t: adj.d_t * other.value + 2.0 * adj.d_tt * other.d_t + 3.0 * adj.d_ttt * other.d_tt,
        d_tt: adj.d_tt * other.value + 3.0 * adj.d_ttt * other.d_t,
        d_ttt: adj.d_ttt * other.value,
        d_zeta: adj.d_zeta * other.value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Builds `loss = Σ_s c_s · slot_s(tanh(w0 t + w1 ζ + b) * (w2 t + b2))`.
    fn build(tape: &mut Tape, p: &[f64], t: f64, z: f64, c: &[f64; 5]) -> NodeId {
        tape.clear();
        let start = tape.leaf(Jet::seed_t(t));
        tape.leaf(Jet::seed_zeta(z));
        let a = tape.affine(start, 2, p, 0, 2);
        let h = tape.tanh(a);
        let b = tape.affine(start, 1, p, 3, 4);
        let m = tape.mul(h, b);
        let mut acc = tape.constant(0.0);
        for (k, slot) in Slot::ALL.iter().enumerate() {
            let s = tape.slot(m, *slot);
            let s = tape.scale(s, c[k]);
            acc = tape.add(acc, s);
        }
        let sq = tape.mul(acc, acc);
        tape.sub(sq, acc)
    }

    #[test]
    fn reverse_matches_finite_differences_per_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut tape = Tape::new();
        for _ in 0..50 {
            let p: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let (t, z) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0));
            let out = build(&mut tape, &p, t, z, &c);
            let mut grad = vec![0.0; 5];
            tape.reverse(out, &p, &mut grad);
            for k in 0..5 {
                let h = 1e-6;
                let mut pp = p.clone();
                pp[k] += h;
                let up = { let o = build(&mut tape, &pp, t, z, &c); tape.value(o).value };
                pp[k] -= 2.0 * h;
                let dn = { let o = build(&mut tape, &pp, t, z, &c); tape.value(o).value };
                let fd = (up - dn) / (2.0 * h);
                assert!((grad[k] - fd).abs() < 1e-7 * (1.0 + fd.abs()), "k={k}: {} vs {fd}", grad[k]);
            }
        }
    }

    #[test]
    fn unused_weight_has_exactly_zero_gradient() {
        let p = [0.3, -0.2, 0.1, 0.7, 0.05, 123.0];
        let mut tape = Tape::new();
        let out = build(&mut tape, &p, 0.2, 0.4, &[1.0, 0.5, -0.3, 0.2, 0.9]);
        let mut grad = vec![0.0; 6];
        tape.reverse(out, &p, &mut grad);
        assert_eq!(grad[5], 0.0);
    }

    #[test]
    fn replay_is_bit_identical() {
        let p = [0.3, -0.2, 0.1, 0.7, 0.05];
        let c = [1.0, 0.5, -0.3, 0.2, 0.9];
        let run = || {
            let mut tape = Tape::new();
            let out = build(&mut tape, &p, 0.2, 0.4, &c);
            let mut grad = vec![0.0; 5];
            tape.reverse(out, &p, &mut grad);
            grad
        };
        assert_eq!(run(), run());
    }
}
