//! PNG and binary PPM (P6) decoding, PNG encoding.

use std::io::Cursor;

use super::{ColorImage, ImagePlane};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

pub fn decode_image<T: Scalar>(bytes: &[u8]) -> Result<ColorImage<T>> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else if bytes.len() < 2 {
        Err(Error::MalformedHeader("empty input".into()))
    } else {
        Err(Error::MalformedHeader(
            "neither a PNG signature nor a P6 magic number".into(),
        ))
    }
}

fn map_png_error(e: png::DecodingError, stage: &str) -> Error {
    match e {
        png::DecodingError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::TruncatedPayload(format!("png {stage}: {io}"))
        }
        png::DecodingError::Format(f) if stage == "header" => {
            Error::MalformedHeader(format!("png: {f}"))
        }
        other if stage == "header" => Error::MalformedHeader(format!("png: {other}")),
        other => Error::TruncatedPayload(format!("png {stage}: {other}")),
    }
}

fn decode_png<T: Scalar>(bytes: &[u8]) -> Result<ColorImage<T>> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| map_png_error(e, "header"))?;
    let info = reader.info();
    let (w, h) = (info.width as usize, info.height as usize);
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(format!(
            "png bit depth {:?}, only 8-bit supported",
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Indexed => {
            return Err(Error::UnsupportedFormat("indexed png".into()));
        }
    };
    if w == 0 || h == 0 {
        return Err(Error::MalformedHeader("zero png dimension".into()));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::MalformedHeader("png too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| map_png_error(e, "payload"))?;
    let data = &buf[..frame.buffer_size()];
    let stride = frame.line_size;
    let scale = T::one() / T::lit(255.0);
    Ok(ColorImage::from_fn(w, h, |x, y| {
        let px = &data[y * stride + x * channels..];
        let (r, g, b) = if channels >= 3 {
            (px[0], px[1], px[2])
        } else {
            (px[0], px[0], px[0])
        };
        [
            T::from_u8(r).unwrap() * scale,
            T::from_u8(g).unwrap() * scale,
            T::from_u8(b).unwrap() * scale,
        ]
    }))
}

/// Parses `P6 <w> <h> <maxval>` with `#` comments; returns the payload offset.
fn ppm_header(bytes: &[u8]) -> Result<(usize, usize, u32, usize)> {
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&c) = bytes.get(pos) {
                        pos += 1;
                        if c == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::MalformedHeader("ppm header ends early".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| c.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader("ppm header field is not a number".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| Error::MalformedHeader(format!("ppm header value {text} too large")))?;
    }
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::MalformedHeader("ppm header not terminated".into())),
    }
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 {
        return Err(Error::MalformedHeader("zero ppm dimension".into()));
    }
    if maxval == 0 {
        return Err(Error::MalformedHeader("ppm maxval is zero".into()));
    }
    if maxval > 65535 {
        return Err(Error::UnsupportedFormat(format!("ppm maxval {maxval}")));
    }
    Ok((w as usize, h as usize, maxval as u32, pos))
}

fn decode_ppm<T: Scalar>(bytes: &[u8]) -> Result<ColorImage<T>> {
    let (w, h, maxval, offset) = ppm_header(bytes)?;
    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(3 * bytes_per_sample))
        .ok_or_else(|| Error::MalformedHeader("ppm dimensions overflow".into()))?;
    let payload = &bytes[offset..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload(format!(
            "ppm expected {expected} bytes, got {}",
            payload.len()
        )));
    }
    let scale = T::one() / T::from_u32(maxval).unwrap();
    let sample = |i: usize| -> T {
        let v = if bytes_per_sample == 1 {
            payload[i] as u32
        } else {
            u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as u32
        };
        T::from_u32(v.min(maxval)).unwrap() * scale
    };
    Ok(ColorImage::from_fn(w, h, |x, y| {
        let base = (y * w + x) * 3;
        [sample(base), sample(base + 1), sample(base + 2)]
    }))
}

fn to_byte<T: Scalar>(v: T) -> u8 {
    (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8
}

fn write_png(w: usize, h: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Encode(e.to_string()))?;
        writer
            .write_image_data(data)
            .map_err(|e| Error::Encode(e.to_string()))?;
    }
    Ok(out)
}

/// Encodes a plane whose values already lie in [0, 1] as 8-bit grayscale.
pub fn encode_gray_png<T: Scalar>(plane: &ImagePlane<T>) -> Result<Vec<u8>> {
    let data: Vec<u8> = plane.data().iter().map(|&v| to_byte(v)).collect();
    write_png(plane.width(), plane.height(), png::ColorType::Grayscale, &data)
}

pub fn encode_rgb_png<T: Scalar>(img: &ColorImage<T>) -> Result<Vec<u8>> {
    let mut data = Vec::with_capacity(img.width() * img.height() * 3);
    for i in 0..img.width() * img.height() {
        for p in img.channels() {
            data.push(to_byte(p.data()[i]));
        }
    }
    write_png(img.width(), img.height(), png::ColorType::Rgb, &data)
}

pub fn encode_ppm<T: Scalar>(img: &ColorImage<T>) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    for i in 0..img.width() * img.height() {
        for p in img.channels() {
            out.push(to_byte(p.data()[i]));
        }
    }
    out
}

/// Decodes an 8-bit grayscale PNG into [0, 1] values.
pub fn decode_gray_png<T: Scalar>(bytes: &[u8]) -> Result<ImagePlane<T>> {
    Ok(decode_png::<T>(bytes)?.red)
}
