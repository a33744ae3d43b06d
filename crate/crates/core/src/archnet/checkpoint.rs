use super::{ArchSpec, Model, ModelError};
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"CXRW";
const VERSION: u32 = 1;

/// `b"CXRW" | u32 version | [u8; 32] sha256(spec toml) | u32 len | spec toml |
/// u64 n | f64 params[n]`, all little-endian.
pub fn write_checkpoint<W: Write>(model: &Model, mut w: W) -> Result<(), ModelError> {
    let spec = model.spec();
    let text = spec.to_toml();
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&spec.hash())?;
    w.write_all(&(text.len() as u32).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    w.write_all(&(model.num_params() as u64).to_le_bytes())?;
    for p in model.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Model, ModelError> {
    let bad = |m: &str| ModelError::Checkpoint(m.to_string());
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    if word != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    r.read_exact(&mut word)?;
    if u32::from_le_bytes(word) != VERSION {
        return Err(bad("unsupported version"));
    }
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash)?;
    r.read_exact(&mut word)?;
    let mut text = vec![0u8; u32::from_le_bytes(word) as usize];
    r.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|_| bad("spec is not UTF-8"))?;
    let spec = ArchSpec::from_toml(&text)?;
    if spec.hash() != hash {
        return Err(bad("spec hash mismatch"));
    }
    let mut n = [0u8; 8];
    r.read_exact(&mut n)?;
    let n = u64::from_le_bytes(n) as usize;
    let mut model = Model::new(spec, 0)?;
    if n != model.num_params() {
        return Err(bad("parameter count does not match spec"));
    }
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    let params = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    model.set_params(params)?;
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<(), ModelError> {
    let mut buf = Vec::new();
    write_checkpoint(model, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model, ModelError> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_tamper() {
        let m = Model::new(ArchSpec::cxr2_tiny().with_input(super::super::Shape::new(1, 32, 32)), 7).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.spec(), m.spec());
        // flip a byte inside the spec text
        buf[4 + 4 + 32 + 4 + 10] ^= 0x01;
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
