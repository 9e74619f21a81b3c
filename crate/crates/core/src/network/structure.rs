//! Layer specifications, the triple syntax of structure tables, and weight
//! counting.

use serde::{Deserialize, Serialize};

use super::layers::Padding;
use crate::error::{Error, Result};

pub const DEFAULT_DROPOUT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvBlockSpec {
    pub in_planes: usize,
    pub kernel_size: usize,
    pub out_planes: usize,
    pub padding: Padding,
    pub pool_after: bool,
    pub batch_norm: bool,
    pub dropout_p: f64,
}

impl ConvBlockSpec {
    pub fn output_len(&self, len: usize) -> Option<usize> {
        let conv = self.padding.output_len(len, self.kernel_size)?;
        if conv == 0 {
            return None;
        }
        Some(if self.pool_after { conv.div_ceil(2) } else { conv })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub blocks: Vec<ConvBlockSpec>,
    pub input_len: usize,
    pub output_dim: usize,
}

impl NetworkSpec {
    pub fn input_planes(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.in_planes)
    }

    /// Temporal length entering each block, plus the final length.
    pub fn lengths(&self) -> Result<Vec<usize>> {
        let mut out = vec![self.input_len];
        let mut len = self.input_len;
        for (i, b) in self.blocks.iter().enumerate() {
            len = b.output_len(len).ok_or_else(|| Error::Block {
                block: i,
                message: format!("kernel {} does not fit length {len}", b.kernel_size),
            })?;
            out.push(len);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::InvalidConfig("network has no blocks".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.in_planes == 0 || b.kernel_size == 0 || b.out_planes == 0 {
                return Err(Error::Block {
                    block: i,
                    message: "plane counts and kernel size must be >= 1".into(),
                });
            }
            if !(0.0..1.0).contains(&b.dropout_p) {
                return Err(Error::Block {
                    block: i,
                    message: format!("dropout {} outside [0, 1)", b.dropout_p),
                });
            }
            if let Some(next) = self.blocks.get(i + 1) {
                if next.in_planes != b.out_planes {
                    return Err(Error::Block {
                        block: i + 1,
                        message: format!("expects {} input planes but block {i} produces {}", next.in_planes, b.out_planes),
                    });
                }
            }
        }
        let lengths = self.lengths()?;
        let last = self.blocks.len() - 1;
        let flat = lengths[lengths.len() - 1] * self.blocks[last].out_planes;
        if flat != self.output_dim {
            return Err(Error::Block {
                block: last,
                message: format!("flatten length {flat} differs from output dimension {}", self.output_dim),
            });
        }
        Ok(())
    }

    /// Sets batch norm and dropout on every block except the final one.
    pub fn with_regularization(mut self, batch_norm: bool, dropout_p: f64) -> Self {
        let last = self.blocks.len().saturating_sub(1);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            let hidden = i < last;
            b.batch_norm = batch_norm && hidden;
            b.dropout_p = if hidden { dropout_p } else { 0.0 };
        }
        self
    }
}

/// Parses `in,k,out` triples separated by `/`, `;` or newlines. Every block
/// but the last is same-padded and pooled; the last is a valid convolution
/// that must collapse the temporal axis to length 1.
pub fn parse_structure(text: &str, input_channels: usize, input_len: usize, output_dim: usize) -> Result<NetworkSpec> {
    let groups: Vec<&str> = text
        .split(['/', ';', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if groups.is_empty() {
        return Err(Error::InvalidConfig("empty network structure".into()));
    }
    let mut blocks = Vec::with_capacity(groups.len());
    for (i, g) in groups.iter().enumerate() {
        let nums: Vec<usize> = g
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>().map_err(|_| Error::Block {
                    block: i,
                    message: format!("'{s}' is not a non-negative integer"),
                })
            })
            .collect::<Result<_>>()?;
        if nums.len() != 3 {
            return Err(Error::Block {
                block: i,
                message: format!("expected 3 values, found {} in '{g}'", nums.len()),
            });
        }
        let last = i + 1 == groups.len();
        blocks.push(ConvBlockSpec {
            in_planes: nums[0],
            kernel_size: nums[1],
            out_planes: nums[2],
            padding: if last { Padding::Valid } else { Padding::Same },
            pool_after: !last,
            batch_norm: !last,
            dropout_p: if last { 0.0 } else { DEFAULT_DROPOUT },
        });
    }
    if blocks[0].in_planes != input_channels {
        return Err(Error::Block {
            block: 0,
            message: format!("declares {} input planes, data has {input_channels} channels", blocks[0].in_planes),
        });
    }
    let spec = NetworkSpec {
        blocks,
        input_len,
        output_dim,
    };
    spec.validate()?;
    let lengths = spec.lengths()?;
    if lengths[lengths.len() - 1] != 1 {
        return Err(Error::Block {
            block: spec.blocks.len() - 1,
            message: format!("final length is {}, expected 1", lengths[lengths.len() - 1]),
        });
    }
    Ok(spec)
}

pub fn render_structure(spec: &NetworkSpec) -> String {
    spec.blocks
        .iter()
        .map(|b| format!("{},{},{}", b.in_planes, b.kernel_size, b.out_planes))
        .collect::<Vec<_>>()
        .join(" / ")
}

/// Kernel weights of every block plus the `M * C` classifier weights;
/// biases and normalization parameters are not counted.
pub fn count_weights(spec: &NetworkSpec, num_classes: usize) -> u64 {
    spec.blocks
        .iter()
        .map(|b| (b.in_planes * b.kernel_size * b.out_planes) as u64)
        .sum::<u64>()
        + (spec.output_dim * num_classes) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv2dLayer {
    pub in_planes: u64,
    pub kernel_h: u64,
    pub kernel_w: u64,
    pub out_planes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: u64,
    pub outputs: u64,
}

pub fn count_conv2d_weights(layers: &[Conv2dLayer]) -> u64 {
    layers.iter().map(|l| l.in_planes * l.kernel_h * l.kernel_w * l.out_planes).sum()
}

pub fn count_dense_weights(layers: &[DenseLayer]) -> u64 {
    layers.iter().map(|l| l.inputs * l.outputs).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s1_chain() {
        let spec = parse_structure("2,7,40 / 40,7,40 / 40,7,40 / 40,7,40 / 40,16,16", 2, 251, 16).unwrap();
        assert_eq!(spec.lengths().unwrap(), vec![251, 126, 63, 32, 16, 1]);
        assert_eq!(count_weights(&spec, 2), 44_432);
        assert_eq!(parse_structure(&render_structure(&spec), 2, 251, 16).unwrap(), spec);
    }

    #[test]
    fn broken_chain_and_bad_final() {
        let e = parse_structure("2,7,40 / 60,7,40 / 40,16,16", 2, 64, 16).unwrap_err();
        assert!(matches!(e, Error::Block { block: 1, .. }), "{e}");
        assert!(parse_structure("2,7,40 / 40,7,16", 2, 100, 16).is_err());
        assert!(parse_structure("2,7", 2, 100, 16).is_err());
        assert!(parse_structure("3,7,16", 2, 7, 16).is_err());
    }

    #[test]
    fn smallest_count() {
        let spec = parse_structure("1,3,1", 1, 3, 1).unwrap();
        assert_eq!(count_weights(&spec, 1), 4);
    }

    #[test]
    fn newline_and_semicolon_separators() {
        let a = parse_structure("4,7,8\n8,7,8;8,16,16", 4, 64, 16).unwrap();
        assert_eq!(render_structure(&a), "4,7,8 / 8,7,8 / 8,16,16");
    }
}
