//! Self-describing binary checkpoint container, bit-exact across platforms.
//!
//! Byte layout (all integers and floats little-endian):
//!
//! ```text
//! magic            8 bytes  "MERCKPT1"
//! version          u32      currently 1
//! feature_dim      u32
//! cnn_filters      u32
//! fc_units         u32
//! gru_units        u32
//! maxout_pieces    u32
//! branched         u8       0 or 1
//! dropout_rate     f64
//! bn_eps           f64
//! bn_momentum      f64
//! tensor_count     u32
//! per tensor, in lexicographic name order:
//!   name_len       u32
//!   name           name_len bytes, UTF-8
//!   rank           u32
//!   dims           rank x u32
//!   data           product(dims) x f64
//! ```
//!
//! Running batch-norm statistics are stored like any other tensor, so a
//! round-trip is lossless.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{parameter_plan, Model, ModelSpec, ParamMap};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MAGIC: &[u8; 8] = b"MERCKPT1";
const VERSION: u32 = 1;

/// Name -> shape map a valid checkpoint for `spec` must contain exactly.
pub(crate) fn expected_shapes(spec: &ModelSpec) -> BTreeMap<String, Vec<usize>> {
    parameter_plan(spec)
        .into_iter()
        .map(|(name, shape, _, _)| (name, shape))
        .collect()
}

pub(crate) fn save(model: &Model, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let spec = model.spec();
    for v in [
        spec.feature_dim,
        spec.cnn_filters,
        spec.fc_units,
        spec.gru_units,
        spec.maxout_pieces,
    ] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&[u8::from(spec.branched)])?;
    for v in [spec.dropout_rate, spec.bn_eps, spec.bn_momentum] {
        w.write_all(&v.to_le_bytes())?;
    }
    let count = model.params().iter().count() as u32;
    w.write_all(&count.to_le_bytes())?;
    for (name, tensor) in model.params().iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(tensor.rank() as u32).to_le_bytes())?;
        for &d in tensor.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in tensor.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Checkpoint("file truncated".into()))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>()?))
    }

    fn string(&mut self, len: usize) -> Result<String> {
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Checkpoint("file truncated".into()))?;
        String::from_utf8(buf).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))
    }
}

pub(crate) fn load(path: &Path) -> Result<Model> {
    let file = File::open(path)?;
    let mut r = Reader {
        inner: BufReader::new(file),
    };
    let magic = r.bytes::<8>()?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let feature_dim = r.u32()? as usize;
    let cnn_filters = r.u32()? as usize;
    let fc_units = r.u32()? as usize;
    let gru_units = r.u32()? as usize;
    let maxout_pieces = r.u32()? as usize;
    let branched = r.bytes::<1>()?[0] != 0;
    let dropout_rate = r.f64()?;
    let bn_eps = r.f64()?;
    let bn_momentum = r.f64()?;
    let spec = ModelSpec {
        feature_dim,
        cnn_filters,
        fc_units,
        gru_units,
        branched,
        dropout_rate,
        maxout_pieces,
        bn_eps,
        bn_momentum,
    };
    spec.validate()
        .map_err(|e| Error::Checkpoint(format!("stored spec invalid: {e}")))?;

    let mut expected = expected_shapes(&spec);
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(Error::Checkpoint(format!(
            "tensor count {count} does not match spec (expected {})",
            expected.len()
        )));
    }
    let mut map = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        if name_len > 4096 {
            return Err(Error::Checkpoint("implausible name length".into()));
        }
        let name = r.string(name_len)?;
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(Error::Checkpoint(format!("implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        match expected.remove(&name) {
            None => {
                return Err(Error::Checkpoint(format!("unexpected tensor {name}")));
            }
            Some(want) if want != shape => {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {shape:?}, spec wants {want:?}"
                )));
            }
            Some(_) => {}
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(r.f64()?);
        }
        map.insert(name, Tensor::new(&shape, data));
    }
    if let Some(missing) = expected.keys().next() {
        return Err(Error::Checkpoint(format!("tensor {missing} missing")));
    }
    Ok(Model {
        spec,
        params: ParamMap { map },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{uniform_init, Rng};

    fn temp_path(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("mer-ckpt-test-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn save_load_is_bitwise_identical() {
        let mut rng = Rng::new(77);
        let model = Model::build(ModelSpec::new(12), &mut rng).unwrap();
        let path = temp_path("roundtrip");
        model.save(&path).unwrap();
        let loaded = Model::load(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(model, loaded);
    }

    #[test]
    fn functional_round_trip() {
        let mut rng = Rng::new(78);
        let model = Model::build(ModelSpec::new(9), &mut rng).unwrap();
        let x = uniform_init(&mut rng, &[2, 4, 9], 1.0);
        let path = temp_path("functional");
        model.save(&path).unwrap();
        let loaded = Model::load(&path).unwrap();
        std::fs::remove_file(&path).ok();
        let a = model.forward_infer(&x).unwrap();
        let b = loaded.forward_infer(&x).unwrap();
        assert_eq!(a, b, "forward after round-trip must be bit-exact");
    }

    #[test]
    fn truncated_file_is_a_checkpoint_error_not_a_crash() {
        let mut rng = Rng::new(79);
        let model = Model::build(ModelSpec::new(5), &mut rng).unwrap();
        let path = temp_path("truncated");
        model.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        let err = Model::load(&path).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(matches!(err, Error::Checkpoint(_)), "{err}");
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let path = temp_path("magic");
        std::fs::write(&path, b"NOTACKPTxxxxxxxxxxxxxxxx").unwrap();
        let err = Model::load(&path).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(matches!(err, Error::Checkpoint(_)));
    }
}
