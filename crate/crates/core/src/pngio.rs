//! 8-bit grayscale 16×16 PNG files.

use std::fs::File;
use std::io::{BufWriter, Cursor, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::layout::{CELLS, HEIGHT, WIDTH};

pub type PixelGrid = [u8; CELLS];

/// Writes a non-interlaced, single-channel, 8-bit PNG.
pub fn write_png_to<W: Write>(pixels: &PixelGrid, out: W) -> Result<()> {
    let mut encoder = png::Encoder::new(out, WIDTH as u32, HEIGHT as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Format(format!("png header: {e}")))?;
    writer
        .write_image_data(pixels)
        .map_err(|e| Error::Format(format!("png data: {e}")))?;
    writer
        .finish()
        .map_err(|e| Error::Format(format!("png finish: {e}")))
}

pub fn encode_png(pixels: &PixelGrid) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(128);
    write_png_to(pixels, &mut buf)?;
    Ok(buf)
}

pub fn write_png(pixels: &PixelGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(Error::at_path(path))?;
    let mut out = BufWriter::new(file);
    write_png_to(pixels, &mut out)?;
    out.flush().map_err(Error::at_path(path))
}

/// Reads a PNG, rejecting anything but 16×16 8-bit grayscale.
pub fn read_png_from<R: Read>(mut input: R) -> Result<PixelGrid> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let info = reader.info();
    if info.width as usize != WIDTH || info.height as usize != HEIGHT {
        return Err(Error::Format(format!(
            "expected {WIDTH}x{HEIGHT} image, found {}x{}",
            info.width, info.height
        )));
    }
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "expected 8-bit grayscale, found {:?} at {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let mut pixels = [0u8; CELLS];
    reader
        .next_frame(&mut pixels)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    Ok(pixels)
}

pub fn read_png(path: impl AsRef<Path>) -> Result<PixelGrid> {
    let path = path.as_ref();
    let file = File::open(path).map_err(Error::at_path(path))?;
    read_png_from(file)
}
