//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "POSASCK1"
//! count   u32
//! repeated count times:
//!   name_len u32, name (UTF-8, `<module>.<layer>.<tensor>`)
//!   rank     u32, extents u64 × rank
//!   values   f64 × product(extents)
//! ```

use std::io::{Read, Write};

use super::{NumError, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"POSASCK1";

pub type NamedTensor = (String, Tensor);

pub fn write_checkpoint<W: Write>(mut w: W, tensors: &[NamedTensor]) -> Result<(), NumError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &e in t.shape() {
            w.write_all(&(e as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NumError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, NumError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<NamedTensor>, NumError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NumError::Checkpoint("bad magic".into()));
    }
    let count = read_u32(&mut r)?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| NumError::Checkpoint("tensor name is not UTF-8".into()))?;
        let rank = read_u32(&mut r)? as usize;
        if rank != 2 {
            return Err(NumError::Checkpoint(format!("{name}: rank {rank}, expected 2")));
        }
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let mut buf = vec![0u8; rows * cols * 8];
        r.read_exact(&mut buf)?;
        let data = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push((name, Tensor::from_vec(rows, cols, data)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let tensors = vec![
            ("lstm.encoder_fwd.w_ih".to_string(), Tensor::row(&[0.1, -0.0, f64::MIN_POSITIVE])),
            ("lstm.classifier.bias".to_string(), Tensor::zeros(1, 3)),
        ];
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &tensors).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for ((na, ta), (nb, tb)) in tensors.iter().zip(&back) {
            assert_eq!(na, nb);
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(ta), bits(tb));
        }
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &[("a.b.c".into(), Tensor::scalar(1.5))]).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(&buf[12..16], &5u32.to_le_bytes());
        assert_eq!(&buf[16..21], b"a.b.c");
        assert_eq!(&buf[21..25], &2u32.to_le_bytes());
        assert_eq!(&buf[41..49], &1.5f64.to_le_bytes());
    }

    #[test]
    fn truncated_file_is_an_error() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &[("x.y.z".into(), Tensor::zeros(2, 2))]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(buf.as_slice()).is_err());
        assert!(read_checkpoint(&b"NOTACKPT"[..]).is_err());
    }
}
