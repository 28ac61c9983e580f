use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One contiguous group of parameters.
///
/// A dense block stores its weight matrix row-major (`[output][input]`)
/// followed by the bias vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Dense { inputs: usize, outputs: usize },
    Vector { len: usize },
}

impl Block {
    pub fn len(&self) -> usize {
        match *self {
            Block::Dense { inputs, outputs } => inputs * outputs + outputs,
            Block::Vector { len } => len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Structured position of a single parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamIndex {
    Weight { block: usize, row: usize, col: usize },
    Bias { block: usize, row: usize },
    Element { block: usize, index: usize },
}

/// Maps structured parameter positions onto offsets in a flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "LayoutRepr", into = "LayoutRepr")]
pub struct Layout {
    blocks: Vec<Block>,
    offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct LayoutRepr {
    blocks: Vec<Block>,
}

impl From<LayoutRepr> for Layout {
    fn from(r: LayoutRepr) -> Self {
        Layout::new(r.blocks)
    }
}

impl From<Layout> for LayoutRepr {
    fn from(l: Layout) -> Self {
        LayoutRepr { blocks: l.blocks }
    }
}

impl Layout {
    pub fn new(blocks: Vec<Block>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        let mut at = 0;
        offsets.push(0);
        for b in &blocks {
            at += b.len();
            offsets.push(at);
        }
        Layout { blocks, offsets }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat offset of a structured index, or `None` if it is out of range.
    pub fn offset(&self, index: ParamIndex) -> Option<usize> {
        match index {
            ParamIndex::Weight { block, row, col } => match self.blocks.get(block)? {
                Block::Dense { inputs, outputs } if row < *outputs && col < *inputs => {
                    Some(self.offsets[block] + row * inputs + col)
                }
                _ => None,
            },
            ParamIndex::Bias { block, row } => match self.blocks.get(block)? {
                Block::Dense { inputs, outputs } if row < *outputs => {
                    Some(self.offsets[block] + inputs * outputs + row)
                }
                _ => None,
            },
            ParamIndex::Element { block, index } => match self.blocks.get(block)? {
                Block::Vector { len } if index < *len => Some(self.offsets[block] + index),
                _ => None,
            },
        }
    }

    /// Inverse of [`Layout::offset`].
    pub fn index(&self, offset: usize) -> Option<ParamIndex> {
        if offset >= self.len() {
            return None;
        }
        let block = self.offsets.partition_point(|&o| o <= offset) - 1;
        let local = offset - self.offsets[block];
        Some(match self.blocks[block] {
            Block::Dense { inputs, outputs } => {
                if local < inputs * outputs {
                    ParamIndex::Weight {
                        block,
                        row: local / inputs,
                        col: local % inputs,
                    }
                } else {
                    ParamIndex::Bias {
                        block,
                        row: local - inputs * outputs,
                    }
                }
            }
            Block::Vector { .. } => ParamIndex::Element { block, index: local },
        })
    }
}

/// Flat parameter vector together with its layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamRepr", into = "ParamRepr")]
pub struct ParamVector {
    layout: Layout,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamRepr {
    layout: Layout,
    values: Vec<f64>,
}

impl TryFrom<ParamRepr> for ParamVector {
    type Error = Error;
    fn try_from(r: ParamRepr) -> Result<Self> {
        ParamVector::from_values(r.layout, r.values)
    }
}

impl From<ParamVector> for ParamRepr {
    fn from(p: ParamVector) -> Self {
        ParamRepr {
            layout: p.layout,
            values: p.values,
        }
    }
}

impl ParamVector {
    pub fn zeros(layout: Layout) -> Self {
        let values = vec![0.0; layout.len()];
        ParamVector { layout, values }
    }

    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::ParamCount {
                expected: layout.len(),
                actual: values.len(),
            });
        }
        Ok(ParamVector { layout, values })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: ParamIndex) -> Option<f64> {
        self.layout.offset(index).map(|o| self.values[o])
    }

    pub fn set(&mut self, index: ParamIndex, value: f64) -> Result<()> {
        let o = self
            .layout
            .offset(index)
            .ok_or_else(|| Error::invalid("parameter index outside layout"))?;
        self.values[o] = value;
        Ok(())
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ParamVector::from_values(self.layout.clone(), values)
    }
}
