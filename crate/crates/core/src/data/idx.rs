//! IDX container (the MNIST distribution format).
//!
//! Big-endian: a 4-byte magic `0x0000_08TT_0D` where `TT = 0x08` means
//! unsigned bytes and `D` is the number of dimensions, then `D` u32 sizes,
//! then the raw payload.

use crate::error::{Error, Result};

pub const MAGIC_LABELS: u32 = 0x0000_0801;
pub const MAGIC_IMAGES: u32 = 0x0000_0803;

#[derive(Clone, Debug, PartialEq)]
pub enum IdxTensor {
    Labels(Vec<u8>),
    /// Row-major `n x (rows * cols)` pixels scaled to `[0, 1]`.
    Images {
        n: usize,
        rows: usize,
        cols: usize,
        pixels: Vec<f64>,
    },
}

impl IdxTensor {
    pub fn len(&self) -> usize {
        match self {
            IdxTensor::Labels(l) => l.len(),
            IdxTensor::Images { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("IDX header truncated at byte {at}")))
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    let magic = read_u32(bytes, 0)?;
    let dims = match magic {
        MAGIC_LABELS => 1,
        MAGIC_IMAGES => 3,
        other => return Err(Error::Format(format!("bad IDX magic {other:#010x}"))),
    };
    let sizes = (0..dims)
        .map(|i| read_u32(bytes, 4 + 4 * i).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let count = sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .ok_or_else(|| Error::Format(format!("IDX dimensions {sizes:?} overflow")))?;
    let start = 4 + 4 * dims;
    let payload = &bytes[start.min(bytes.len())..];
    if payload.len() < count {
        return Err(Error::Format(format!(
            "IDX payload truncated: {} of {count} bytes",
            payload.len()
        )));
    }
    let payload = &payload[..count];
    Ok(if dims == 1 {
        IdxTensor::Labels(payload.to_vec())
    } else {
        IdxTensor::Images {
            n: sizes[0],
            rows: sizes[1],
            cols: sizes[2],
            pixels: payload.iter().map(|&b| f64::from(b) / 255.0).collect(),
        }
    })
}

/// Inverse of [`parse_idx`]; pixels are rounded back to bytes.
pub fn encode_idx(tensor: &IdxTensor) -> Vec<u8> {
    let mut out = Vec::new();
    match tensor {
        IdxTensor::Labels(l) => {
            out.extend_from_slice(&MAGIC_LABELS.to_be_bytes());
            out.extend_from_slice(&(l.len() as u32).to_be_bytes());
            out.extend_from_slice(l);
        }
        IdxTensor::Images {
            n,
            rows,
            cols,
            pixels,
        } => {
            out.extend_from_slice(&MAGIC_IMAGES.to_be_bytes());
            for s in [n, rows, cols] {
                out.extend_from_slice(&(*s as u32).to_be_bytes());
            }
            out.extend(
                pixels
                    .iter()
                    .map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_images() -> Vec<u8> {
        let mut b = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        b.extend_from_slice(&[0, 255, 51, 102, 0, 0, 0, 0]);
        b
    }

    #[test]
    fn hand_built_images() {
        let t = parse_idx(&two_images()).unwrap();
        let IdxTensor::Images {
            n,
            rows,
            cols,
            ref pixels,
        } = t
        else {
            panic!()
        };
        assert_eq!((n, rows, cols), (2, 2, 2));
        assert_eq!(&pixels[..4], &[0.0, 1.0, 0.2, 0.4]);
        assert!(pixels[4..].iter().all(|&p| p == 0.0));
        assert_eq!(encode_idx(&t), two_images());
    }

    #[test]
    fn labels_roundtrip() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 3, 7, 1, 9];
        let t = parse_idx(&bytes).unwrap();
        assert_eq!(t, IdxTensor::Labels(vec![7, 1, 9]));
        assert_eq!(encode_idx(&t), bytes);
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(
            parse_idx(&[0, 0, 8, 0x99, 0, 0, 0, 0]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn truncated_payload() {
        let mut b = two_images();
        b.pop();
        assert!(matches!(parse_idx(&b), Err(Error::Format(_))));
        assert!(parse_idx(&[0, 0, 8]).is_err());
    }

    #[test]
    fn overflowing_dimensions() {
        let b = [
            0, 0, 8, 3, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255,
        ];
        assert!(matches!(parse_idx(&b), Err(Error::Format(_))));
    }
}
