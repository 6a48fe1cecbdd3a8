//! Binary PGM (`P5`), PPM (`P6`) and PFM (`PF`/`Pf`) reading and writing.
//!
//! 8-bit samples are mapped to `[0, 1]` by dividing by 255. On output they
//! are clamped to `[0, 1]` and quantized with round-half-up. PFM files are
//! written little-endian (scale `-1.0`) with rows stored bottom-to-top, and
//! both byte orders are accepted on input.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{ChannelStack, ImagePlane};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Ppm,
    Pfm,
}

impl ImageFormat {
    /// Guesses the format from a file extension (`pgm`, `ppm`, `pfm`).
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" => Some(Self::Pgm),
            "ppm" => Some(Self::Ppm),
            "pfm" => Some(Self::Pfm),
            _ => None,
        }
    }
}

impl std::str::FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pgm" => Ok(Self::Pgm),
            "ppm" => Ok(Self::Ppm),
            "pfm" => Ok(Self::Pfm),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ChannelStack> {
    let file = File::open(path.as_ref())?;
    read_image(&mut BufReader::new(file))
}

pub fn save_image(stack: &ChannelStack, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    check_plane_count(stack, format)?;
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write_image(stack, &mut w, format)?;
    w.flush()?;
    Ok(())
}

pub fn read_image<R: BufRead>(r: &mut R) -> Result<ChannelStack> {
    let mut magic = [0u8; 2];
    r.read_exact(&mut magic).map_err(truncated)?;
    match &magic {
        b"P5" => read_netpbm(r, 1),
        b"P6" => read_netpbm(r, 3),
        b"PF" => read_pfm(r, 3),
        b"Pf" => read_pfm(r, 1),
        _ => Err(Error::UnsupportedFormat(format!(
            "magic number {:?}",
            String::from_utf8_lossy(&magic)
        ))),
    }
}

pub fn write_image<W: Write>(stack: &ChannelStack, w: &mut W, format: ImageFormat) -> Result<()> {
    check_plane_count(stack, format)?;
    let (width, height) = stack.dims();
    match format {
        ImageFormat::Pgm | ImageFormat::Ppm => {
            let magic = if format == ImageFormat::Pgm { "P5" } else { "P6" };
            write!(w, "{magic}\n{width} {height}\n255\n")?;
            let mut bytes = Vec::with_capacity(width * height * stack.len());
            for i in 0..width * height {
                for plane in stack {
                    bytes.push(quantize(plane.data()[i]));
                }
            }
            w.write_all(&bytes)?;
        }
        ImageFormat::Pfm => {
            let magic = if stack.len() == 3 { "PF" } else { "Pf" };
            write!(w, "{magic}\n{width} {height}\n-1.0\n")?;
            let mut bytes = Vec::with_capacity(width * height * stack.len() * 4);
            for y in (0..height).rev() {
                for x in 0..width {
                    for plane in stack {
                        let v = plane.get(x, y) as f32;
                        if !v.is_finite() {
                            return Err(Error::NonFinite("PFM single-precision conversion"));
                        }
                        bytes.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
            w.write_all(&bytes)?;
        }
    }
    Ok(())
}

/// Clamps to `[0, 1]` and rounds half up onto `0..=255`.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

fn check_plane_count(stack: &ChannelStack, format: ImageFormat) -> Result<()> {
    let ok = match format {
        ImageFormat::Pgm => stack.len() == 1,
        ImageFormat::Ppm => stack.len() == 3,
        ImageFormat::Pfm => stack.len() == 1 || stack.len() == 3,
    };
    if !ok {
        return Err(Error::InvalidParameter(format!(
            "{format:?} cannot hold {} planes",
            stack.len()
        )));
    }
    Ok(())
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Malformed("truncated file".into())
    } else {
        Error::Io(e)
    }
}

/// Reads one whitespace-delimited header token, skipping `#` comments.
/// Consumes exactly one trailing whitespace byte.
fn header_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte).map_err(truncated)?;
        let b = byte[0];
        if b == b'#' && token.is_empty() {
            let mut rest = Vec::new();
            r.read_until(b'\n', &mut rest)?;
            continue;
        }
        if b.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(b);
    }
    String::from_utf8(token).map_err(|_| Error::Malformed("non-ASCII header".into()))
}

fn header_usize<R: BufRead>(r: &mut R, what: &str) -> Result<usize> {
    let tok = header_token(r)?;
    let v: usize = tok
        .parse()
        .map_err(|_| Error::Malformed(format!("bad {what}: {tok:?}")))?;
    if v == 0 {
        return Err(Error::Malformed(format!("{what} must be positive")));
    }
    Ok(v)
}

fn read_netpbm<R: BufRead>(r: &mut R, channels: usize) -> Result<ChannelStack> {
    let width = header_usize(r, "width")?;
    let height = header_usize(r, "height")?;
    let maxval = header_usize(r, "maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "maxval {maxval}, only 255 is supported"
        )));
    }
    let mut bytes = vec![0u8; width * height * channels];
    r.read_exact(&mut bytes).map_err(truncated)?;
    let planes = (0..channels)
        .map(|c| {
            let data = bytes
                .iter()
                .skip(c)
                .step_by(channels)
                .map(|&b| b as f64 / 255.0)
                .collect();
            ImagePlane::from_vec_unchecked(width, height, data)
        })
        .collect();
    ChannelStack::new(planes)
}

fn read_pfm<R: BufRead>(r: &mut R, channels: usize) -> Result<ChannelStack> {
    let width = header_usize(r, "width")?;
    let height = header_usize(r, "height")?;
    let tok = header_token(r)?;
    let scale: f64 = tok
        .parse()
        .map_err(|_| Error::Malformed(format!("bad PFM scale: {tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Malformed(format!("bad PFM scale: {tok:?}")));
    }
    let little_endian = scale < 0.0;
    let mut bytes = vec![0u8; width * height * channels * 4];
    r.read_exact(&mut bytes).map_err(truncated)?;
    let mut planes: Vec<Vec<f64>> = (0..channels).map(|_| vec![0.0; width * height]).collect();
    for (k, chunk) in bytes.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let c = k % channels;
        let pixel = k / channels;
        let (x, file_row) = (pixel % width, pixel / width);
        let y = height - 1 - file_row;
        planes[c][y * width + x] = v as f64;
    }
    let planes = planes
        .into_iter()
        .map(|d| ImagePlane::new(width, height, d))
        .collect::<Result<Vec<_>>>()?;
    ChannelStack::new(planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn decode(bytes: &[u8]) -> Result<ChannelStack> {
        read_image(&mut Cursor::new(bytes))
    }

    fn encode(stack: &ChannelStack, format: ImageFormat) -> Vec<u8> {
        let mut out = Vec::new();
        write_image(stack, &mut out, format).unwrap();
        out
    }

    #[test]
    fn pgm_bytes_scale_to_unit_range() {
        let mut file = b"P5\n2 2\n255\n".to_vec();
        file.extend_from_slice(&[0, 255, 0, 255]);
        let s = decode(&file).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.plane(0).data(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn ppm_splits_channels() {
        let mut file = b"P6 3 1 255\n".to_vec();
        file.extend_from_slice(&[255, 0, 0].repeat(3));
        let s = decode(&file).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.plane(0).data().iter().all(|&v| v == 1.0));
        assert!(s.plane(1).data().iter().all(|&v| v == 0.0));
        assert!(s.plane(2).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut file = b"P5\n# made by hand\n1 1\n# depth\n255\n".to_vec();
        file.push(51);
        assert_eq!(decode(&file).unwrap().plane(0).get(0, 0), 0.2);
    }

    #[test]
    fn quantization_rounds_half_up_and_clamps() {
        let s = ChannelStack::single(ImagePlane::new(3, 1, vec![0.5, 1.7, -0.2]).unwrap());
        let bytes = encode(&s, ImageFormat::Pgm);
        assert_eq!(&bytes[..11], b"P5\n3 1\n255\n");
        assert_eq!(&bytes[11..], &[128, 255, 0]);
    }

    #[test]
    fn pfm_header_and_row_order() {
        let plane = ImagePlane::new(1, 2, vec![1.0, 2.0]).unwrap();
        let bytes = encode(&ChannelStack::single(plane), ImageFormat::Pfm);
        assert_eq!(&bytes[..12], b"Pf\n1 2\n-1.0\n");
        // bottom row first
        assert_eq!(&bytes[12..16], &2.0f32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
    }

    #[test]
    fn big_endian_pfm_accepted() {
        let mut file = b"Pf\n2 1\n1.0\n".to_vec();
        file.extend_from_slice(&0.25f32.to_be_bytes());
        file.extend_from_slice(&(-3.5f32).to_be_bytes());
        assert_eq!(decode(&file).unwrap().plane(0).data(), &[0.25, -3.5]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(decode(b"P3\n1 1\n255\n0"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(decode(b"P5\n2 2\n255\n\x00\x01"), Err(Error::Malformed(_))));
        assert!(matches!(decode(b"P5\n1 1\n65535\n\x00\x00"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(decode(b"PF\n1 1\n-1.0\n\x00"), Err(Error::Malformed(_))));
        assert!(matches!(decode(b"P5\n0 1\n255\n"), Err(Error::Malformed(_))));
        assert!(matches!(decode(b"P"), Err(Error::Malformed(_))));
    }

    #[test]
    fn plane_count_enforced() {
        let one = ChannelStack::single(ImagePlane::zeros(1, 1));
        let two = ChannelStack::new(vec![ImagePlane::zeros(1, 1), ImagePlane::zeros(1, 1)]).unwrap();
        let mut sink = Vec::new();
        assert!(write_image(&one, &mut sink, ImageFormat::Ppm).is_err());
        assert!(write_image(&two, &mut sink, ImageFormat::Pfm).is_err());
        assert!(write_image(&two, &mut sink, ImageFormat::Pgm).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ppm");
        let stack = ChannelStack::new(
            (0..3)
                .map(|c| ImagePlane::from_fn(4, 3, |x, y| ((x + 4 * y + c) % 256) as f64 / 255.0))
                .collect(),
        )
        .unwrap();
        save_image(&stack, &path, ImageFormat::Ppm).unwrap();
        assert_eq!(load_image(&path).unwrap(), stack);
        assert!(save_image(&stack, dir.path().join("missing/x.ppm"), ImageFormat::Ppm).is_err());
        assert_eq!(ImageFormat::from_path(&path), Some(ImageFormat::Ppm));
    }

    proptest! {
        #[test]
        fn pfm_round_trip_is_bit_exact(
            vals in prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 12),
            color in any::<bool>(),
        ) {
            let channels = if color { 3 } else { 1 };
            let w = 4 / channels.min(2);
            let h = 12 / channels / w;
            let planes: Vec<ImagePlane> = (0..channels)
                .map(|c| {
                    let d = vals[c * w * h..(c + 1) * w * h].iter().map(|&v| v as f64).collect();
                    ImagePlane::new(w, h, d).unwrap()
                })
                .collect();
            let stack = ChannelStack::new(planes).unwrap();
            let back = decode(&encode(&stack, ImageFormat::Pfm)).unwrap();
            prop_assert!(back.bit_eq(&stack));
        }

        #[test]
        fn eight_bit_error_bounded(vals in prop::collection::vec(0.0f64..=1.0, 6)) {
            let stack = ChannelStack::single(ImagePlane::new(3, 2, vals.clone()).unwrap());
            let back = decode(&encode(&stack, ImageFormat::Pgm)).unwrap();
            for (a, b) in vals.iter().zip(back.plane(0).data()) {
                prop_assert!((a - b).abs() <= 1.0 / 255.0 + 1.0 / 510.0);
            }
        }
    }
}
