//! Checkpoint format: a named tensor list in plain text.
//!
//! ```text
//! goalgan-tensors 1
//! attr policy.layer0.activation tanh
//! tensor policy.layer0.weight 32 6
//! 3fb999999999999a bfe0000000000000 ...
//! ```
//!
//! Each `tensor` line gives a name and its shape; the following line holds
//! the row-major values as 16-digit hexadecimal IEEE-754 bit patterns, so a
//! save/load cycle reproduces every value bit for bit. `attr` lines carry
//! string metadata such as activation tags.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::mlp::{Activation, Dense, Mlp};

const MAGIC: &str = "goalgan-tensors 1";

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorList {
    pub attrs: Vec<(String, String)>,
    pub tensors: Vec<Tensor>,
}

impl TensorList {
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push(Tensor {
            name: name.into(),
            shape,
            data,
        });
    }

    pub fn set_attr(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.attrs.push((key.into(), value.into()));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        for (k, v) in &self.attrs {
            let _ = writeln!(out, "attr {k} {v}");
        }
        for t in &self.tensors {
            let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "tensor {} {}", t.name, dims.join(" "));
            let vals: Vec<String> = t.data.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let bad = |message: String| Error::TensorFormat {
            path: origin.to_path_buf(),
            message,
        };
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing header line".into()));
        }
        let mut list = TensorList::default();
        while let Some(line) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("attr") => {
                    let key = parts.next().ok_or_else(|| bad("attr without key".into()))?;
                    let value: Vec<&str> = parts.collect();
                    list.set_attr(key, value.join(" "));
                }
                Some("tensor") => {
                    let name = parts.next().ok_or_else(|| bad("tensor without name".into()))?;
                    let shape = parts
                        .map(|d| d.parse::<usize>().map_err(|e| bad(format!("bad dim `{d}`: {e}"))))
                        .collect::<Result<Vec<_>>>()?;
                    let count: usize = shape.iter().product();
                    let values = lines
                        .next()
                        .ok_or_else(|| bad(format!("tensor {name} has no data line")))?;
                    let data = values
                        .split_whitespace()
                        .map(|h| {
                            u64::from_str_radix(h, 16)
                                .map(f64::from_bits)
                                .map_err(|e| bad(format!("bad value `{h}`: {e}")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    if data.len() != count {
                        return Err(bad(format!(
                            "tensor {name}: shape holds {count} values, found {}",
                            data.len()
                        )));
                    }
                    list.push(name, shape, data);
                }
                Some(other) => return Err(bad(format!("unexpected record `{other}`"))),
                None => {}
            }
        }
        Ok(list)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Append the layers of `net` as `<prefix>.layer<i>.{weight,bias}`.
pub fn push_mlp(list: &mut TensorList, prefix: &str, net: &Mlp) {
    list.set_attr(format!("{prefix}.layers"), net.layers().len().to_string());
    for (i, layer) in net.layers().iter().enumerate() {
        list.set_attr(
            format!("{prefix}.layer{i}.activation"),
            layer.activation().name(),
        );
        list.push(
            format!("{prefix}.layer{i}.weight"),
            vec![layer.out_dim(), layer.in_dim()],
            layer.weight().to_vec(),
        );
        list.push(
            format!("{prefix}.layer{i}.bias"),
            vec![layer.out_dim()],
            layer.bias().to_vec(),
        );
    }
}

pub fn read_mlp(list: &TensorList, prefix: &str) -> Result<Mlp> {
    let missing = |what: String| Error::TensorFormat {
        path: Default::default(),
        message: format!("missing {what}"),
    };
    let count: usize = list
        .attr(&format!("{prefix}.layers"))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| missing(format!("{prefix}.layers")))?;
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let act_key = format!("{prefix}.layer{i}.activation");
        let act = list
            .attr(&act_key)
            .and_then(Activation::from_name)
            .ok_or_else(|| missing(act_key.clone()))?;
        let w = list
            .get(&format!("{prefix}.layer{i}.weight"))
            .ok_or_else(|| missing(format!("{prefix}.layer{i}.weight")))?;
        let b = list
            .get(&format!("{prefix}.layer{i}.bias"))
            .ok_or_else(|| missing(format!("{prefix}.layer{i}.bias")))?;
        if w.shape.len() != 2 {
            return Err(missing(format!("2-d shape for {}", w.name)));
        }
        layers.push(Dense::new(w.shape[1], w.shape[0], w.data.clone(), b.data.clone(), act)?);
    }
    Mlp::from_layers(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{SeedStreams, Stream};

    #[test]
    fn mlp_round_trip_is_bit_exact() {
        let mut rng = SeedStreams::new(5).stream(Stream::GanInit);
        let net = Mlp::new(&[4, 7, 3], Activation::Relu, Activation::Linear, &mut rng);
        let mut list = TensorList::default();
        push_mlp(&mut list, "gen", &net);
        list.push("extra", vec![3], vec![f64::MIN_POSITIVE, -0.0, 1.0 / 3.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.tensors");
        list.save(&path).unwrap();
        let back = TensorList::load(&path).unwrap();
        assert_eq!(back, list);
        let net2 = read_mlp(&back, "gen").unwrap();
        assert_eq!(net2, net);
        let extra = back.get("extra").unwrap();
        assert_eq!(extra.data[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn truncated_data_is_rejected() {
        let text = "goalgan-tensors 1\ntensor x 2\n3ff0000000000000\n";
        assert!(TensorList::parse(text, Path::new("mem")).is_err());
        assert!(TensorList::parse("nope", Path::new("mem")).is_err());
    }
}
