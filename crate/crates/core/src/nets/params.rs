use std::io::{Read, Write};

use rand::Rng as _;
use serde::{de::DeserializeOwned, Serialize};

use crate::gradcore::{Graph, NodeRef};
use crate::rng::{derive_seed, rng_from, stream};
use crate::{Error, Result, Scalar};

const MAGIC: &[u8; 8] = b"SECBEAMP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// Uniform on `+-sqrt(6 / (fan_in + fan_out))`.
    Glorot,
    Zeros,
    Ones,
}

/// Ordered collection of named tensors. Layers refer to entries by index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<T> {
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// Adds every tensor as a leaf of `g`, trainable or constant.
    pub fn bind(&self, g: &mut Graph<T>, trainable: bool) -> Result<Bound> {
        let nodes = self
            .tensors
            .iter()
            .map(|t| {
                if trainable {
                    g.param(t.data.clone(), &t.shape)
                } else {
                    g.constant(t.data.clone(), &t.shape)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Bound(nodes))
    }

    /// Gradients of a bound copy, in tensor order. Constants yield zeros.
    pub fn gradients(&self, g: &Graph<T>, bound: &Bound) -> Result<Vec<Vec<T>>> {
        self.tensors
            .iter()
            .zip(&bound.0)
            .map(|(t, &n)| {
                if g.requires_grad(n)? {
                    Ok(g.grad(n)?.to_vec())
                } else {
                    Ok(vec![T::zero(); t.data.len()])
                }
            })
            .collect()
    }

    fn check_layout(&self, other: &ParamSet<T>) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::Format(format!(
                "expected {} tensors, found {}",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            if a.name != b.name || a.shape != b.shape {
                return Err(Error::Format(format!(
                    "tensor {} {:?} does not match {} {:?}",
                    b.name, b.shape, a.name, a.shape
                )));
            }
        }
        Ok(())
    }

    /// Replaces values after checking names and shapes agree.
    pub fn load_from(&mut self, other: ParamSet<T>) -> Result<()> {
        self.check_layout(&other)?;
        *self = other;
        Ok(())
    }
}

/// Graph handles for a bound [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Bound(Vec<NodeRef>);

impl Bound {
    pub fn nodes(&self) -> &[NodeRef] {
        &self.0
    }
}

impl std::ops::Index<usize> for Bound {
    type Output = NodeRef;
    fn index(&self, i: usize) -> &NodeRef {
        &self.0[i]
    }
}

/// Allocates tensors in construction order. Without a seed every tensor is zero,
/// which is enough to recover the layout when loading from disk.
pub struct Builder<T> {
    set: ParamSet<T>,
    seed: Option<u64>,
}

impl<T: Scalar> Builder<T> {
    pub fn new(seed: Option<u64>) -> Self {
        Self {
            set: ParamSet::default(),
            seed,
        }
    }

    pub fn add(&mut self, name: &str, shape: &[usize], init: Init) -> usize {
        let n: usize = shape.iter().product();
        let index = self.set.tensors.len();
        let data = match (init, self.seed) {
            (_, None) | (Init::Zeros, _) => vec![T::zero(); n],
            (Init::Ones, _) => vec![T::one(); n],
            (Init::Glorot, Some(seed)) => {
                let (fan_out, fan_in) = match shape {
                    [o, i] => (*o, *i),
                    _ => (n, n),
                };
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut rng = rng_from(derive_seed(seed, stream::INIT, index as u64));
                (0..n).map(|_| T::of(rng.random_range(-limit..limit))).collect()
            }
        };
        self.set.tensors.push(Tensor {
            name: name.to_string(),
            shape: shape.to_vec(),
            data,
        });
        index
    }

    pub fn finish(self) -> ParamSet<T> {
        self.set
    }
}

fn write_u32(w: &mut impl Write, x: u32) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_bytes(r: &mut impl Read, n: usize) -> Result<Vec<u8>> {
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    Ok(b)
}

/// Writes `magic, version, tag, config json, shape table, f64 values`.
pub(crate) fn write_params<T: Scalar, C: Serialize>(
    w: &mut impl Write,
    tag: u8,
    config: &C,
    set: &ParamSet<T>,
) -> Result<()> {
    w.write_all(MAGIC)?;
    write_u32(w, VERSION)?;
    w.write_all(&[tag])?;
    let json = serde_json::to_vec(config)?;
    write_u32(w, json.len() as u32)?;
    w.write_all(&json)?;
    write_u32(w, set.tensors.len() as u32)?;
    for t in &set.tensors {
        write_u32(w, t.name.len() as u32)?;
        w.write_all(t.name.as_bytes())?;
        write_u32(w, t.shape.len() as u32)?;
        for &d in &t.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
    }
    for t in &set.tensors {
        for &x in &t.data {
            w.write_all(&x.as_f64().to_le_bytes())?;
        }
    }
    Ok(())
}

pub(crate) fn read_params<T: Scalar, C: DeserializeOwned>(
    r: &mut impl Read,
) -> Result<(u8, C, ParamSet<T>)> {
    if read_bytes(r, 8)? != MAGIC {
        return Err(Error::Format("bad magic; not a parameter file".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let tag = read_bytes(r, 1)?[0];
    let len = read_u32(r)? as usize;
    let config = serde_json::from_slice(&read_bytes(r, len)?)?;
    let count = read_u32(r)? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u32(r)? as usize;
        let name = String::from_utf8(read_bytes(r, len)?)
            .map_err(|_| Error::Format("tensor name is not utf-8".into()))?;
        let rank = read_u32(r)? as usize;
        let shape = (0..rank)
            .map(|_| read_u64(r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        tensors.push(Tensor {
            name,
            shape,
            data: Vec::new(),
        });
    }
    for t in &mut tensors {
        let n: usize = t.shape.iter().product();
        let raw = read_bytes(r, 8 * n)?;
        t.data = raw
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
            .collect();
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    Ok((tag, config, ParamSet { tensors }))
}
