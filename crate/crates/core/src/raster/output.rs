//! Image output and diagnostic renderings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{Rgb, RgbImage};

use super::{PixelGrid, PixelKind, RasterGrids, NO_PATCH};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::graph::EdgeGraph;
use crate::scene::ColorRGB;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Ppm,
    Pfm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        match ext.as_str() {
            "png" => Ok(ImageFormat::Png),
            "ppm" => Ok(ImageFormat::Ppm),
            "pfm" => Ok(ImageFormat::Pfm),
            _ => Err(Error::Config(format!("unsupported output extension '{ext}' (use png, ppm or pfm)"))),
        }
    }
}

fn srgb(v: f64) -> u8 {
    let v = v.clamp(0.0, 1.0);
    let s = if v <= 0.003_130_8 { 12.92 * v } else { 1.055 * v.powf(1.0 / 2.4) - 0.055 };
    (s * 255.0).round() as u8
}

/// Clamps linear color to `[0, 1]` and applies the sRGB transfer curve.
pub fn encode_srgb8(c: ColorRGB) -> [u8; 3] {
    [srgb(c.r), srgb(c.g), srgb(c.b)]
}

fn to_image(width: usize, height: usize, pixels: &[ColorRGB]) -> RgbImage {
    RgbImage::from_fn(width as u32, height as u32, |i, j| Rgb(encode_srgb8(pixels[j as usize * width + i as usize])))
}

fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::Image(e.to_string()))
}

/// Writes linear colors, row 0 at the top, in the format given by the
/// file extension.
pub fn write_image(path: &Path, width: usize, height: usize, pixels: &[ColorRGB]) -> Result<()> {
    match ImageFormat::from_path(path)? {
        ImageFormat::Png => save_png(&to_image(width, height, pixels), path),
        ImageFormat::Ppm => {
            let mut w = BufWriter::new(File::create(path)?);
            write!(w, "P6\n{width} {height}\n255\n")?;
            for c in pixels {
                w.write_all(&encode_srgb8(*c))?;
            }
            w.flush()?;
            Ok(())
        }
        ImageFormat::Pfm => write_pfm(path, width, height, pixels),
    }
}

/// Unclamped linear floats; PFM stores rows bottom to top.
pub fn write_pfm(path: &Path, width: usize, height: usize, pixels: &[ColorRGB]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "PF\n{width} {height}\n-1.0\n")?;
    for j in (0..height).rev() {
        for c in &pixels[j * width..(j + 1) * width] {
            for v in c.to_array() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Interior gray, Dirichlet red, Neumann blue, outside black.
pub fn write_masks_png(path: &Path, grids: &RasterGrids) -> Result<()> {
    let g = &grids.grid;
    let img = RgbImage::from_fn(g.width as u32, g.height as u32, |i, j| {
        Rgb(match grids.kind[g.index(i as usize, j as usize)] {
            PixelKind::Interior => [128, 128, 128],
            PixelKind::Dirichlet => [230, 40, 40],
            PixelKind::Neumann => [40, 80, 230],
            PixelKind::Outside => [0, 0, 0],
        })
    });
    save_png(&img, path)
}

/// Closed horizontal links in red, closed vertical links in green, drawn
/// on the pixel to the left of or above the link.
pub fn write_flags_png(path: &Path, grids: &RasterGrids) -> Result<()> {
    let g = &grids.grid;
    let img = RgbImage::from_fn(g.width as u32, g.height as u32, |i, j| {
        let (i, j) = (i as usize, j as usize);
        let hc = i + 1 < g.width && grids.hlinks[g.hlink(i, j)].closed;
        let vc = j + 1 < g.height && grids.vlinks[g.vlink(i, j)].closed;
        Rgb([if hc { 255 } else { 20 }, if vc { 255 } else { 20 }, 20])
    });
    save_png(&img, path)
}

/// Signed source magnitude on a log scale: red positive, blue negative.
pub fn write_source_png(path: &Path, grids: &RasterGrids) -> Result<()> {
    let g = &grids.grid;
    let lum = |c: ColorRGB| (c.r + c.g + c.b) / 3.0;
    let peak = grids.source.iter().map(|c| lum(*c).abs().ln_1p()).fold(0.0, f64::max);
    let img = RgbImage::from_fn(g.width as u32, g.height as u32, |i, j| {
        let v = lum(grids.source[g.index(i as usize, j as usize)]);
        let m = if peak > 0.0 { (v.abs().ln_1p() / peak * 255.0).round() as u8 } else { 0 };
        Rgb(if v >= 0.0 { [m, 0, 0] } else { [0, 0, m] })
    });
    save_png(&img, path)
}

fn patch_color(p: u32) -> [u8; 3] {
    if p == NO_PATCH {
        return [0, 0, 0];
    }
    // golden-ratio hue walk
    let h = (p as f64 * 0.618_033_988_75).fract() * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [(60.0 + 180.0 * r) as u8, (60.0 + 180.0 * g) as u8, (60.0 + 180.0 * b) as u8]
}

pub fn write_patch_map_png(path: &Path, grids: &RasterGrids) -> Result<()> {
    let g = &grids.grid;
    let img = RgbImage::from_fn(g.width as u32, g.height as u32, |i, j| {
        Rgb(patch_color(grids.owner[g.index(i as usize, j as usize)]))
    });
    save_png(&img, path)
}

fn plot(img: &mut RgbImage, g: &PixelGrid, p: Point2, c: [u8; 3]) {
    let i = ((p.x - g.xmin) / g.h).floor();
    let j = ((g.ymax - p.y) / g.h).floor();
    if i >= 0.0 && j >= 0.0 && (i as usize) < g.width && (j as usize) < g.height {
        img.put_pixel(i as u32, j as u32, Rgb(c));
    }
}

/// Edge polylines in white and vertices in red over the rendered image.
pub fn write_graph_png(path: &Path, grids: &RasterGrids, graph: &EdgeGraph) -> Result<()> {
    let g = &grids.grid;
    let dim: Vec<ColorRGB> = grids.color.iter().map(|c| *c * 0.5).collect();
    let mut img = to_image(g.width, g.height, &dim);
    for e in &graph.edges {
        if graph.is_border(e) {
            continue;
        }
        for s in 0..e.polyline.segment_count() {
            let (a, b) = e.polyline.segment(s);
            let steps = ((a.dist(b) / (0.5 * g.h)).ceil() as usize).max(1);
            for k in 0..=steps {
                plot(&mut img, g, a.lerp(b, k as f64 / steps as f64), [255, 255, 255]);
            }
        }
    }
    for v in &graph.vertices {
        if v.incident.iter().all(|&(e, _)| graph.is_border(&graph.edges[e])) {
            continue;
        }
        for dx in -1..=1 {
            for dy in -1..=1 {
                plot(&mut img, g, v.position + Point2::new(dx as f64, dy as f64) * g.h, [255, 30, 30]);
            }
        }
    }
    save_png(&img, path)
}
