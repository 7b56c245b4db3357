//! Image and ground-truth files.
//!
//! Raw-float images: `b"IMGF"`, then width, height, channels as `u32` LE,
//! then `w·h·c` pixels as `f32` LE, row-major, channel-interleaved.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::pose::EstimateSet;

pub const RAW_MAGIC: &[u8; 4] = b"IMGF";

/// Ground truth keyed by input id.
pub type GroundTruth = BTreeMap<String, EstimateSet<f64>>;

pub fn write_raw_image<W: Write>(img: &Image<f64>, mut w: W) -> Result<()> {
    w.write_all(RAW_MAGIC)?;
    for d in [img.width(), img.height(), img.channels()] {
        let d = u32::try_from(d).map_err(|_| Error::Format("image dimension exceeds u32".into()))?;
        w.write_all(&d.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(img.len() * 4);
    for &v in img.as_slice() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_raw_image<R: Read>(mut r: R) -> Result<Image<f64>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != RAW_MAGIC {
        return Err(Error::Format("not a raw-float image (bad magic)".into()));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *d = u32::from_le_bytes(b) as usize;
    }
    let n = dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("raw-float image is truncated".into()))?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Image::new(dims[0], dims[1], dims[2], data).map_err(|e| Error::Format(e.to_string()))
}

/// Reads a raw-float image or an 8-bit PNG (scaled by 1/255), by content.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image<f64>> {
    let path = path.as_ref();
    let mut head = [0u8; 4];
    {
        let mut f = File::open(path)?;
        f.read_exact(&mut head)
            .map_err(|_| Error::Format(format!("{}: file too short", path.display())))?;
    }
    if &head == RAW_MAGIC {
        return read_raw_image(BufReader::new(File::open(path)?));
    }
    let decoded = image::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, bytes) = match decoded {
        image::DynamicImage::ImageLuma8(g) => (1, g.into_raw()),
        image::DynamicImage::ImageRgb8(c) => (3, c.into_raw()),
        other => (3, other.to_rgb8().into_raw()),
    };
    let data = bytes.iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(w, h, channels, data)
}

pub fn save_raw_image(img: &Image<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_raw_image(img, &mut w)?;
    w.flush()?;
    Ok(())
}

/// 8-bit PNG export (1 or 3 channels). Quantizes to 1/255 steps, which
/// erases perturbations smaller than that.
pub fn save_png(img: &Image<f64>, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = img
        .as_slice()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let color = match img.channels() {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => return Err(Error::Unsupported(format!("PNG export of {c}-channel images"))),
    };
    image::save_buffer(path, &bytes, img.width() as u32, img.height() as u32, color)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn save_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, gt)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Input id: the file name without its extension.
pub fn input_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::GaussianSource;

    fn sample(w: usize, h: usize, c: usize) -> Image<f64> {
        let mut g = GaussianSource::new(5);
        let data = (0..w * h * c).map(|_| g.next_uniform() as f32 as f64).collect();
        Image::new(w, h, c, data).unwrap()
    }

    #[test]
    fn raw_round_trip_is_exact_at_f32() {
        let img = sample(5, 3, 3);
        let mut buf = Vec::new();
        write_raw_image(&img, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"IMGF");
        assert_eq!(buf.len(), 16 + 45 * 4);
        assert_eq!(read_raw_image(buf.as_slice()).unwrap(), img);
    }

    #[test]
    fn raw_header_layout() {
        let img = Image::filled(2, 1, 1, 0.5);
        let mut buf = Vec::new();
        write_raw_image(&img, &mut buf).unwrap();
        assert_eq!(
            buf,
            [b'I', b'M', b'G', b'F', 2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0x3f, 0, 0, 0, 0x3f]
        );
    }

    #[test]
    fn truncated_and_foreign_files_fail() {
        let mut buf = Vec::new();
        write_raw_image(&sample(2, 2, 1), &mut buf).unwrap();
        assert!(read_raw_image(&buf[..buf.len() - 1]).is_err());
        assert!(read_raw_image(&b"PNG\0rest"[..]).is_err());
    }

    #[test]
    fn png_round_trip_quantizes() {
        let dir = tempfile::tempdir().unwrap();
        let img = sample(4, 4, 3);
        let p = dir.path().join("a.png");
        save_png(&img, &p).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!((back.width(), back.height(), back.channels()), (4, 4, 3));
        for (a, b) in img.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        let q = dir.path().join("a.imgf");
        save_raw_image(&img, &q).unwrap();
        assert_eq!(load_image(&q).unwrap(), img);
    }

    #[test]
    fn ground_truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut gt = GroundTruth::new();
        let flat = GaussianSource::new(1).gaussian_vec::<f64>(179);
        gt.insert("img_000".into(), EstimateSet::from_flat(&flat).unwrap());
        let p = dir.path().join("gt.json");
        save_ground_truth(&gt, &p).unwrap();
        assert_eq!(load_ground_truth(&p).unwrap(), gt);
    }

    #[test]
    fn ids_drop_extensions() {
        assert_eq!(input_id(Path::new("/a/b/img_003.imgf")), "img_003");
    }
}
