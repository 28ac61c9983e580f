use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Block, Layout, ParamVector};
use super::tape::{Tape, Var};
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => math::tanh(x),
            Activation::Identity => x,
        }
    }

    fn apply_var(self, x: Var<'_>) -> Var<'_> {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }
}

/// Layer widths (input first, output last) and activations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub layer_sizes: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
}

impl Architecture {
    /// `input → hidden… → output` with tanh hidden units and a linear head.
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(input);
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(output);
        Architecture {
            layer_sizes,
            hidden: Activation::Tanh,
            output: Activation::Identity,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes.first().copied().unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layer_sizes.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::invalid("an architecture needs at least input and output sizes"));
        }
        if let Some(layer) = self.layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::Shape {
                layer,
                expected: 1,
                actual: 0,
            });
        }
        Ok(())
    }

    /// Dense blocks in layer order.
    pub fn blocks(&self) -> Vec<Block> {
        self.layer_sizes
            .windows(2)
            .map(|w| Block::Dense {
                inputs: w[0],
                outputs: w[1],
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(Block::len).sum()
    }
}

/// A multilayer perceptron whose parameters occupy the first blocks of a
/// [`ParamVector`]; trailing blocks (for example a log-σ vector) are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    arch: Architecture,
}

impl Mlp {
    pub fn new(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        Ok(Mlp { arch })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.arch.blocks())
    }

    /// Checks that `layout` begins with this network's dense blocks.
    pub fn check_layout(&self, layout: &Layout) -> Result<()> {
        let blocks = self.arch.blocks();
        for (layer, want) in blocks.iter().enumerate() {
            match layout.blocks().get(layer) {
                Some(got) if got == want => {}
                Some(got) => {
                    return Err(Error::Shape {
                        layer,
                        expected: want.len(),
                        actual: got.len(),
                    })
                }
                None => {
                    return Err(Error::Shape {
                        layer,
                        expected: want.len(),
                        actual: 0,
                    })
                }
            }
        }
        Ok(())
    }

    /// Uniform `±1/√fan_in` weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, params: &mut ParamVector, rng: &mut R) -> Result<()> {
        self.check_layout(params.layout())?;
        let mut at = 0;
        let values = params.values_mut();
        for w in self.arch.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / math::sqrt(fan_in as f64);
            for v in &mut values[at..at + fan_in * fan_out] {
                *v = rng.random_range(-bound..=bound);
            }
            at += fan_in * fan_out;
            values[at..at + fan_out].iter_mut().for_each(|v| *v = 0.0);
            at += fan_out;
        }
        Ok(())
    }

    fn check_input(&self, input: usize) -> Result<()> {
        if input != self.arch.input_dim() {
            return Err(Error::Shape {
                layer: 0,
                expected: self.arch.input_dim(),
                actual: input,
            });
        }
        Ok(())
    }

    fn check_param_len(&self, len: usize) -> Result<()> {
        let need = self.arch.param_count();
        if len < need {
            return Err(Error::ParamCount {
                expected: need,
                actual: len,
            });
        }
        Ok(())
    }

    /// Forward pass recorded on a tape. `params` are the tape leaves for the
    /// whole parameter vector (this network reads the leading entries).
    pub fn forward<'t>(&self, tape: &'t Tape, params: &[Var<'t>], input: &[f64]) -> Result<Vec<Var<'t>>> {
        self.check_input(input.len())?;
        self.check_param_len(params.len())?;
        let layers = self.arch.layer_sizes.len() - 1;
        let mut at = 0;
        let mut acts: Vec<Var<'t>> = Vec::new();
        for (layer, w) in self.arch.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &params[at..at + fan_in * fan_out];
            let biases = &params[at + fan_in * fan_out..at + fan_in * fan_out + fan_out];
            at += fan_in * fan_out + fan_out;
            let activation = if layer + 1 == layers {
                self.arch.output
            } else {
                self.arch.hidden
            };
            let next: Vec<Var<'t>> = (0..fan_out)
                .map(|row| {
                    let row_w = &weights[row * fan_in..(row + 1) * fan_in];
                    let pre = if layer == 0 {
                        tape.weighted_sum(input, row_w)
                    } else {
                        tape.dot(row_w, &acts)
                    };
                    activation.apply_var(pre + biases[row])
                })
                .collect();
            acts = next;
        }
        Ok(acts)
    }

    /// Plain evaluation without a tape.
    pub fn eval(&self, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        self.check_param_len(params.len())?;
        let layers = self.arch.layer_sizes.len() - 1;
        let mut at = 0;
        let mut acts: Vec<f64> = input.to_vec();
        for (layer, w) in self.arch.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &params[at..at + fan_in * fan_out];
            let biases = &params[at + fan_in * fan_out..at + fan_in * fan_out + fan_out];
            at += fan_in * fan_out + fan_out;
            let activation = if layer + 1 == layers {
                self.arch.output
            } else {
                self.arch.hidden
            };
            acts = (0..fan_out)
                .map(|row| {
                    let row_w = &weights[row * fan_in..(row + 1) * fan_in];
                    let pre: f64 = row_w.iter().zip(&acts).map(|(w, x)| w * x).sum();
                    activation.apply(pre + biases[row])
                })
                .collect();
        }
        Ok(acts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamIndex;

    #[test]
    fn zero_weights_give_zero_output() {
        let mlp = Mlp::new(Architecture::new(3, &[5], 2)).unwrap();
        let p = ParamVector::zeros(mlp.layout());
        let tape = Tape::new();
        let vars = tape.vars(p.values());
        let out = mlp.forward(&tape, &vars, &[1.0, -2.0, 0.5]).unwrap();
        assert!(out.iter().all(|v| v.value() == 0.0));
        assert_eq!(mlp.eval(p.values(), &[7.0, 7.0, 7.0]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn identity_unit() {
        let mut arch = Architecture::new(1, &[], 1);
        arch.output = Activation::Identity;
        let mlp = Mlp::new(arch).unwrap();
        let mut p = ParamVector::zeros(mlp.layout());
        p.set(
            ParamIndex::Weight {
                block: 0,
                row: 0,
                col: 0,
            },
            1.0,
        )
        .unwrap();
        let tape = Tape::new();
        let vars = tape.vars(p.values());
        let out = mlp.forward(&tape, &vars, &[3.0]).unwrap();
        assert_eq!(out[0].value(), 3.0);
    }

    #[test]
    fn input_mismatch_names_layer() {
        let mlp = Mlp::new(Architecture::new(4, &[8], 2)).unwrap();
        let p = ParamVector::zeros(mlp.layout());
        assert_eq!(
            mlp.eval(p.values(), &[1.0, 2.0]),
            Err(Error::Shape {
                layer: 0,
                expected: 4,
                actual: 2
            })
        );
    }

    #[test]
    fn layout_mismatch_names_layer() {
        let mlp = Mlp::new(Architecture::new(4, &[8], 2)).unwrap();
        let other = Mlp::new(Architecture::new(4, &[7], 2)).unwrap();
        let err = mlp.check_layout(&other.layout()).unwrap_err();
        assert!(matches!(err, Error::Shape { layer: 0, .. }));
    }

    #[test]
    fn init_respects_fan_in_bound() {
        use rand::SeedableRng;
        let mlp = Mlp::new(Architecture::new(16, &[4], 1)).unwrap();
        let mut p = ParamVector::zeros(mlp.layout());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        mlp.init(&mut p, &mut rng).unwrap();
        let first = &p.values()[..64];
        assert!(first.iter().all(|w| w.abs() <= 0.25));
        assert!(first.iter().any(|w| *w != 0.0));
        assert!(p.values()[64..68].iter().all(|b| *b == 0.0));
    }
}
