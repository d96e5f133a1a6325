//! FMAP multi-channel float raster: `"FMAP"`, LE u32 height, width, channels,
//! then channel-major LE f32 samples.

use std::path::Path;

use crate::error::{Error, Result};
use crate::imgproc::ImagePlane;
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"FMAP";
const HEADER_LEN: usize = 16;

fn corrupt(message: impl Into<String>) -> Error {
    Error::Corrupt {
        format: "FMAP",
        message: message.into(),
    }
}

pub fn encode_fmap<T: Scalar>(planes: &[ImagePlane<T>]) -> Result<Vec<u8>> {
    let first = planes
        .first()
        .ok_or_else(|| Error::InvalidArgument("fmap needs at least one channel".into()))?;
    let (w, h) = first.dims();
    for p in planes {
        first.check_same_dims(p)?;
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * w * h * planes.len());
    out.extend_from_slice(MAGIC);
    for v in [h, w, planes.len()] {
        let v = u32::try_from(v).map_err(|_| Error::InvalidArgument("fmap too large".into()))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for p in planes {
        for &v in p.data() {
            out.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_fmap<T: Scalar>(bytes: &[u8]) -> Result<Vec<ImagePlane<T>>> {
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (h, w, c) = (word(0), word(1), word(2));
    if w == 0 || h == 0 || c == 0 {
        return Err(corrupt(format!("zero extent {h}x{w}x{c}")));
    }
    let n = w
        .checked_mul(h)
        .filter(|n| n.checked_mul(c).and_then(|m| m.checked_mul(4)).is_some())
        .ok_or_else(|| corrupt("extent overflows"))?;
    let expected = HEADER_LEN + 4 * n * c;
    if bytes.len() != expected {
        return Err(corrupt(format!(
            "payload is {} bytes, header implies {}",
            bytes.len() - HEADER_LEN,
            expected - HEADER_LEN
        )));
    }
    let payload = &bytes[HEADER_LEN..];
    (0..c)
        .map(|k| {
            let data: Vec<T> = payload[4 * n * k..4 * n * (k + 1)]
                .chunks_exact(4)
                .map(|b| T::lit(f32::from_le_bytes(b.try_into().unwrap()) as f64))
                .collect();
            ImagePlane::new(w, h, data).map_err(|_| corrupt(format!("non-finite sample in channel {k}")))
        })
        .collect()
}

pub fn read_fmap<T: Scalar>(path: &Path) -> Result<Vec<ImagePlane<T>>> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode_fmap(&bytes)
}

pub fn write_fmap<T: Scalar>(path: &Path, planes: &[ImagePlane<T>]) -> Result<()> {
    std::fs::write(path, encode_fmap(planes)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_channel_major() {
        let a = ImagePlane::from_fn(3, 2, |x, y| (x + 10 * y) as f64);
        let b = a.map(|v| -v * 0.5);
        let bytes = encode_fmap(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(&bytes[..4], b"FMAP");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 16 + 4 * 12);
        // second sample of channel 0 is pixel (1, 0)
        assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), 1.0);
        let back = decode_fmap::<f64>(&bytes).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn corrupt_inputs() {
        let good = encode_fmap(&[ImagePlane::filled(2, 2, 1.0f32)]).unwrap();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        for bytes in [&good[..10], &bad_magic[..], &good[..good.len() - 1]] {
            assert!(matches!(decode_fmap::<f32>(bytes), Err(Error::Corrupt { .. })));
        }
        let mut nan = good.clone();
        nan[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode_fmap::<f32>(&nan).is_err());
    }
}
