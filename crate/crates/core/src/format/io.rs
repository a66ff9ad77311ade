//! Binary weight files: ASCII magic `KCPW1`, little-endian `u32` header
//! (`d`, `K`, `m_i`, `n_i`, `CA_k`, `CB_k`), then the factors as
//! little-endian `f64`, branch-major, alternating `A_k^(i)`, `B_k^(i)` per
//! mode, each matrix row-major.

use crate::error::{KcpError, Result};
use crate::tensor::DenseTensor;

use super::{FactorSet, KcpConfig, KcpWeight};

pub const MAGIC: &[u8; 5] = b"KCPW1";

pub fn serialize(w: &KcpWeight) -> Vec<u8> {
    let cfg = w.config();
    let mut out = Vec::with_capacity(
        5 + 4 * (2 + 2 * cfg.order() + 2 * cfg.kt_rank()) + 8 * cfg.stored_scalars(),
    );
    out.extend_from_slice(MAGIC);
    let header = [cfg.order(), cfg.kt_rank()]
        .into_iter()
        .chain(cfg.m().iter().copied())
        .chain(cfg.n().iter().copied())
        .chain(cfg.ca().iter().copied())
        .chain(cfg.cb().iter().copied());
    for v in header {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in w.flat_factors() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &'static str) -> Result<&'a [u8]> {
        let rest = self.bytes.len() - self.pos;
        if rest < len {
            return Err(KcpError::Truncated {
                what,
                expected: len,
                actual: rest,
            });
        }
        let bytes: &'a [u8] = self.bytes;
        let out = &bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u32s(&mut self, count: usize, what: &'static str) -> Result<Vec<usize>> {
        let start = self.pos;
        let raw = self.take(4 * count, what)?;
        let vals: Vec<usize> = raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")) as usize)
            .collect();
        if let Some(j) = vals.iter().position(|&v| v == 0) {
            return Err(KcpError::InconsistentShape {
                position: start + 4 * j,
                detail: format!("{what} entry {j} is 0"),
            });
        }
        Ok(vals)
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<KcpWeight> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r
        .take(MAGIC.len(), "magic")
        .map_err(|_| KcpError::MagicMismatch {
            expected: MAGIC.to_vec(),
            found: bytes[..bytes.len().min(MAGIC.len())].to_vec(),
        })?;
    if magic != MAGIC {
        return Err(KcpError::MagicMismatch {
            expected: MAGIC.to_vec(),
            found: magic.to_vec(),
        });
    }
    let head = r.u32s(2, "order and KT rank")?;
    let (d, kk) = (head[0], head[1]);
    let m = r.u32s(d, "input mode sizes")?;
    let n = r.u32s(d, "output mode sizes")?;
    let ca = r.u32s(kk, "A ranks")?;
    let header_end = r.pos;
    let cb = r.u32s(kk, "B ranks")?;
    let cfg = KcpConfig::new(m, n, ca, cb).map_err(|e| KcpError::InconsistentShape {
        position: header_end,
        detail: e.to_string(),
    })?;

    let payload_len =
        cfg.stored_scalars()
            .checked_mul(8)
            .ok_or_else(|| KcpError::InconsistentShape {
                position: r.pos,
                detail: "payload size overflows".into(),
            })?;
    let payload = r.take(payload_len, "factor payload")?;
    if r.pos != bytes.len() {
        return Err(KcpError::TrailingBytes(bytes.len() - r.pos));
    }
    let mut vals = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut next = |rows: usize, cols: usize| -> DenseTensor {
        let data: Vec<f64> = vals.by_ref().take(rows * cols).collect();
        DenseTensor::from_vec([rows, cols], data).expect("payload sized from header")
    };
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in 0..kk {
        let mut ak = Vec::new();
        let mut bk = Vec::new();
        for i in 0..d {
            ak.push(next(cfg.m()[i], cfg.ca()[k]));
            bk.push(next(cfg.n()[i], cfg.cb()[k]));
        }
        a.push(ak);
        b.push(bk);
    }
    Ok(KcpWeight::new(FactorSet::from_owned(cfg, a, b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::random_init;

    fn sample() -> KcpWeight {
        let cfg = KcpConfig::new(vec![2, 3, 2], vec![3, 2, 2], vec![1, 2], vec![2, 1]).unwrap();
        random_init(&cfg, 5)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let w = sample();
        let bytes = serialize(&w);
        let back = deserialize(&bytes).unwrap();
        assert_eq!(back, w);
        let bits = |w: &KcpWeight| {
            w.flat_factors()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&back), bits(&w));
    }

    #[test]
    fn header_layout() {
        let w = sample();
        let bytes = serialize(&w);
        assert_eq!(&bytes[..5], b"KCPW1");
        assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[9..13].try_into().unwrap()), 2);
        let first = f64::from_le_bytes(bytes[5 + 4 * 12..5 + 4 * 12 + 8].try_into().unwrap());
        assert_eq!(first, w.a(0, 0).data()[0]);
    }

    #[test]
    fn corrupted_magic() {
        let mut bytes = serialize(&sample());
        bytes[0] = b'X';
        assert!(matches!(
            deserialize(&bytes),
            Err(KcpError::MagicMismatch { .. })
        ));
        assert!(matches!(
            deserialize(b"KC"),
            Err(KcpError::MagicMismatch { .. })
        ));
    }

    #[test]
    fn truncated_payload_names_sizes() {
        let bytes = serialize(&sample());
        let cut = &bytes[..bytes.len() - 3];
        let payload = 8 * sample().config().stored_scalars();
        match deserialize(cut) {
            Err(KcpError::Truncated {
                expected, actual, ..
            }) => {
                assert_eq!(expected, payload);
                assert_eq!(actual, payload - 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_mode_and_trailing_bytes() {
        let mut bytes = serialize(&sample());
        bytes[13..17].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            deserialize(&bytes),
            Err(KcpError::InconsistentShape { position: 13, .. })
        ));
        let mut bytes = serialize(&sample());
        bytes.push(0);
        assert!(matches!(
            deserialize(&bytes),
            Err(KcpError::TrailingBytes(1))
        ));
    }
}
