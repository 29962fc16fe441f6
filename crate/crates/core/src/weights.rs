//! The FGSN weight container.
//!
//! Little-endian layout: magic `FGSN`, u32 version (1), u32 tensor count,
//! then per tensor: u16 name length, UTF-8 name, u8 dtype (0 = f32,
//! 1 = f64), u8 ndim, u32 dims, u8 trainable, f32 l2, row-major data.
//! Layers are stored as `<layer>.weight` and `<layer>.bias`.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{EncoderSource, LayerParams, ModelParams, ARCHITECTURE};
use crate::tensor::{Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"FGSN";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    fn dtype(&self) -> u8 {
        match self {
            Self::F32(_) => 0,
            Self::F64(_) => 1,
        }
    }

    fn len(&self) -> usize {
        match self {
            Self::F32(v) => v.len(),
            Self::F64(v) => v.len(),
        }
    }

    fn to_tensor<T: Scalar>(&self, shape: &[usize]) -> Result<Tensor<T>> {
        let data = match self {
            Self::F32(v) => v.iter().map(|&x| T::from_f64_lossy(x as f64)).collect(),
            Self::F64(v) => v.iter().map(|&x| T::from_f64_lossy(x)).collect(),
        };
        Tensor::new(shape.to_vec(), data)
    }

    fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Self {
        if T::NAME == "f64" {
            Self::F64(t.data().iter().map(|x| x.to_f64().unwrap()).collect())
        } else {
            Self::F32(t.data().iter().map(|x| x.to_f32().unwrap()).collect())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
    pub l2: f32,
    pub data: TensorData,
}

/// Parsed container contents in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightContainer {
    pub records: Vec<TensorRecord>,
}

fn cerr(detail: impl Into<String>) -> Error {
    Error::Container(detail.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(cerr(format!("truncated while reading {what} at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

impl WeightContainer {
    pub fn get(&self, name: &str) -> Option<&TensorRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(cerr("bad magic, not an FGSN weight file"));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(cerr(format!("unsupported version {version}")));
        }
        let count = r.u32("tensor count")? as usize;
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for _ in 0..count {
            let len = r.u16("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| cerr("tensor name is not UTF-8"))?
                .to_string();
            if !seen.insert(name.clone()) {
                return Err(cerr(format!("duplicate tensor `{name}`")));
            }
            let dtype = r.u8("dtype")?;
            let ndim = r.u8("ndim")? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u32("dims")? as usize);
            }
            let trainable = match r.u8("trainable flag")? {
                0 => false,
                1 => true,
                v => return Err(cerr(format!("`{name}`: trainable flag {v}"))),
            };
            let l2 = f32::from_le_bytes(r.take(4, "l2")?.try_into().unwrap());
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| cerr(format!("`{name}`: shape overflow")))?;
            let data = match dtype {
                0 => {
                    let raw = r.take(n.checked_mul(4).ok_or_else(|| cerr("size overflow"))?, &name)?;
                    TensorData::F32(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
                }
                1 => {
                    let raw = r.take(n.checked_mul(8).ok_or_else(|| cerr("size overflow"))?, &name)?;
                    TensorData::F64(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
                }
                d => return Err(cerr(format!("`{name}`: unknown dtype {d}"))),
            };
            records.push(TensorRecord { name, shape, trainable, l2, data });
        }
        if r.pos != bytes.len() {
            return Err(cerr(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { records })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&u32::try_from(self.records.len()).map_err(|_| cerr("too many tensors"))?.to_le_bytes());
        for rec in &self.records {
            let name = rec.name.as_bytes();
            let len = u16::try_from(name.len()).map_err(|_| cerr(format!("name `{}` too long", rec.name)))?;
            if rec.shape.iter().product::<usize>() != rec.data.len() {
                return Err(cerr(format!("`{}`: shape does not match data", rec.name)));
            }
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(name);
            out.push(rec.data.dtype());
            out.push(u8::try_from(rec.shape.len()).map_err(|_| cerr("too many dims"))?);
            for &d in &rec.shape {
                out.extend_from_slice(&u32::try_from(d).map_err(|_| cerr("dim too large"))?.to_le_bytes());
            }
            out.push(rec.trainable as u8);
            out.extend_from_slice(&rec.l2.to_le_bytes());
            match &rec.data {
                TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            }
        }
        Ok(out)
    }

    pub fn from_params<T: Scalar>(params: &ModelParams<T>) -> Self {
        let mut records = Vec::with_capacity(2 * params.layers.len());
        for l in &params.layers {
            for (suffix, t) in [("weight", &l.weights), ("bias", &l.bias)] {
                records.push(TensorRecord {
                    name: format!("{}.{suffix}", l.name),
                    shape: t.shape().to_vec(),
                    trainable: l.trainable,
                    l2: l.l2,
                    data: TensorData::from_tensor(t),
                });
            }
        }
        Self { records }
    }

    fn layer<T: Scalar>(&self, layer: &str) -> Result<Option<(Tensor<T>, Tensor<T>, &TensorRecord)>> {
        let w = self.get(&format!("{layer}.weight"));
        let b = self.get(&format!("{layer}.bias"));
        match (w, b) {
            (None, None) => Ok(None),
            (Some(w), Some(b)) => Ok(Some((w.data.to_tensor(&w.shape)?, b.data.to_tensor(&b.shape)?, w))),
            (w, _) => Err(Error::Layer {
                layer: layer.into(),
                detail: format!("container lacks its {}", if w.is_none() { "weight" } else { "bias" }),
            }),
        }
    }

    /// Strict conversion: every layer present, nothing extra, shapes match.
    pub fn into_params<T: Scalar>(&self) -> Result<ModelParams<T>> {
        let expected: HashSet<String> = ARCHITECTURE
            .iter()
            .flat_map(|d| [format!("{}.weight", d.name), format!("{}.bias", d.name)])
            .collect();
        if let Some(extra) = self.records.iter().find(|r| !expected.contains(&r.name)) {
            return Err(cerr(format!("unexpected tensor `{}`", extra.name)));
        }
        let mut layers = Vec::with_capacity(ARCHITECTURE.len());
        for def in &ARCHITECTURE {
            let (weights, bias, rec) = self.layer(def.name)?.ok_or_else(|| Error::Layer {
                layer: def.name.into(),
                detail: "missing from weight container".into(),
            })?;
            layers.push(LayerParams {
                name: def.name.to_string(),
                weights,
                bias,
                trainable: rec.trainable,
                l2: rec.l2,
            });
        }
        let params = ModelParams { layers };
        params.validate()?;
        Ok(params)
    }
}

impl<T: Scalar> EncoderSource<T> for WeightContainer {
    fn encoder_layer(&self, name: &str) -> Option<(Tensor<T>, Tensor<T>)> {
        self.layer(name).ok().flatten().map(|(w, b, _)| (w, b))
    }
}

pub fn save_weights<T: Scalar>(params: &ModelParams<T>, path: &Path) -> Result<()> {
    std::fs::write(path, WeightContainer::from_params(params).to_bytes()?)?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<WeightContainer> {
    let bytes = std::fs::read(path).map_err(|e| cerr(format!("{}: {e}", path.display())))?;
    WeightContainer::from_bytes(&bytes)
}

pub fn load_weights<T: Scalar>(path: &Path) -> Result<ModelParams<T>> {
    read_container(path)?.into_params()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;

    fn small_container() -> WeightContainer {
        WeightContainer {
            records: vec![
                TensorRecord {
                    name: "a".into(),
                    shape: vec![2, 3],
                    trainable: true,
                    l2: 5e-4,
                    data: TensorData::F32(vec![1.0, -2.5, 3.0, f32::MIN_POSITIVE, 0.0, -0.0]),
                },
                TensorRecord {
                    name: "b".into(),
                    shape: vec![],
                    trainable: false,
                    l2: 0.0,
                    data: TensorData::F64(vec![std::f64::consts::PI]),
                },
            ],
        }
    }

    #[test]
    fn hand_built_layout() {
        let bytes = small_container().to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"FGSN");
        assert_eq!(&bytes[4..12], &[1, 0, 0, 0, 2, 0, 0, 0]);
        // first record header: len 1, 'a', dtype 0, ndim 2, dims 2 3, trainable 1, l2
        assert_eq!(&bytes[12..15], &[1, 0, b'a']);
        assert_eq!(&bytes[15..17], &[0, 2]);
        assert_eq!(&bytes[17..25], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(bytes[25], 1);
        assert_eq!(&bytes[26..30], &5e-4f32.to_le_bytes());
        assert_eq!(&bytes[30..34], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 12 + (3 + 2 + 8 + 1 + 4 + 24) + (3 + 2 + 1 + 4 + 8));
        assert_eq!(WeightContainer::from_bytes(&bytes).unwrap(), small_container());
    }

    #[test]
    fn rejects_corruption() {
        let bytes = small_container().to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(WeightContainer::from_bytes(&bad).unwrap_err().to_string().contains("magic"));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(WeightContainer::from_bytes(&bad).unwrap_err().to_string().contains("version"));
        for cut in [3, 11, 20, bytes.len() - 1] {
            assert!(WeightContainer::from_bytes(&bytes[..cut]).is_err());
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(WeightContainer::from_bytes(&extra).is_err());
        let mut dup = small_container();
        dup.records[1].name = "a".into();
        let err = WeightContainer::from_bytes(&dup.to_bytes().unwrap()).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn model_round_trip_is_byte_identical() {
        let params = build_model::<f32>(None, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.fgsn"), dir.path().join("b.fgsn"));
        save_weights(&params, &p1).unwrap();
        let loaded: ModelParams<f32> = load_weights(&p1).unwrap();
        assert_eq!(loaded, params);
        save_weights(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn strict_layer_checks() {
        let params = build_model::<f32>(None, 3).unwrap();
        let full = WeightContainer::from_params(&params);

        let mut missing = full.clone();
        missing.records.retain(|r| !r.name.starts_with("dec.b9.t1x1"));
        let err = missing.into_params::<f32>().unwrap_err().to_string();
        assert!(err.contains("dec.b9.t1x1"), "{err}");

        let mut extra = full.clone();
        extra.records.push(TensorRecord { name: "stray".into(), ..full.records[0].clone() });
        assert!(extra.into_params::<f32>().unwrap_err().to_string().contains("stray"));

        let mut reshaped = full.clone();
        reshaped.records[0].shape = vec![64, 3, 9];
        let err = reshaped.into_params::<f32>().unwrap_err().to_string();
        assert!(err.contains("enc.b1.c1"), "{err}");
    }

    #[test]
    fn encoder_source_from_container() {
        let donor = build_model::<f32>(None, 11).unwrap();
        let container = WeightContainer::from_params(&donor);
        let built = build_model::<f32>(Some(&container), 5).unwrap();
        assert_eq!(built.layers[..10], donor.layers[..10]);
        assert_ne!(built.layers[10], donor.layers[10]);

        let mut partial = container.clone();
        partial.records.retain(|r| !r.name.starts_with("enc.b4.c3"));
        let err = build_model::<f32>(Some(&partial), 5).unwrap_err().to_string();
        assert!(err.contains("enc.b4.c3"), "{err}");
    }
}
