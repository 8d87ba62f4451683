//! Measure and instance files, image ingestion, and rendering.
//!
//! Measures and instances serialize as versioned JSON documents; floats
//! survive the round trip exactly (shortest-round-trip decimal encoding).
//! Images come in as portable pixmaps (PGM/PPM, ASCII or binary) or CSV
//! intensity grids and leave as binary PGM/PPM rasters. A small generator
//! produces the nested-ellipse test datasets used by the bench harness.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{BarycenterInstance, DiscreteMeasure, MeasureError, Point};
use crate::rng;

/// Version tag written into every measure and instance file.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format version {got}, expected {expected}")]
    Version { got: u32, expected: u32 },
    #[error("atom {index} has dimension {got}, header says {expected}")]
    AtomDimension { index: usize, expected: usize, got: usize },
    #[error("instance lists {measures} measures but {weights} weights")]
    WeightCount { measures: usize, weights: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("image has no positive intensity")]
    BlankImage,
    #[error("malformed image: {0}")]
    MalformedImage(String),
    #[error("rendering in {mode:?} mode needs dimension {expected}, measure has {got}")]
    RenderDimension { mode: RenderMode, expected: usize, got: usize },
    #[error("grid side must be at least 8, got {0}")]
    GridTooSmall(usize),
    #[error("no valid ellipse pair after {0} attempts")]
    EllipseRetries(usize),
}

#[derive(Debug, Serialize, Deserialize)]
struct AtomRecord {
    coords: Vec<f64>,
    mass: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasureFile {
    version: u32,
    d: usize,
    atoms: Vec<AtomRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Map<String, serde_json::Value>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum MeasureRef {
    Path { path: String },
    Inline(MeasureFile),
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    version: u32,
    weights: Vec<f64>,
    measures: Vec<MeasureRef>,
}

fn measure_to_file(
    measure: &DiscreteMeasure,
    meta: Option<serde_json::Map<String, serde_json::Value>>,
) -> MeasureFile {
    MeasureFile {
        version: FORMAT_VERSION,
        d: measure.dim(),
        atoms: measure
            .atoms()
            .iter()
            .zip(measure.masses())
            .map(|(p, &m)| AtomRecord { coords: p.coords.clone(), mass: m })
            .collect(),
        meta,
    }
}

fn file_to_measure(file: MeasureFile) -> Result<DiscreteMeasure, IoError> {
    if file.version != FORMAT_VERSION {
        return Err(IoError::Version { got: file.version, expected: FORMAT_VERSION });
    }
    let mut atoms = Vec::with_capacity(file.atoms.len());
    let mut masses = Vec::with_capacity(file.atoms.len());
    for (index, record) in file.atoms.into_iter().enumerate() {
        if record.coords.len() != file.d {
            return Err(IoError::AtomDimension {
                index,
                expected: file.d,
                got: record.coords.len(),
            });
        }
        atoms.push(Point::new(record.coords));
        masses.push(record.mass);
    }
    Ok(DiscreteMeasure::new(atoms, masses)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes a measure file, attaching optional free-form metadata.
pub fn write_measure_with_meta(
    path: &Path,
    measure: &DiscreteMeasure,
    meta: Option<serde_json::Map<String, serde_json::Value>>,
) -> Result<(), IoError> {
    write_json(path, &measure_to_file(measure, meta))
}

pub fn write_measure(path: &Path, measure: &DiscreteMeasure) -> Result<(), IoError> {
    write_measure_with_meta(path, measure, None)
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure, IoError> {
    let file: MeasureFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    file_to_measure(file)
}

/// Writes an instance with every measure inlined, so the file is
/// self-contained.
pub fn write_instance(path: &Path, inst: &BarycenterInstance) -> Result<(), IoError> {
    let file = InstanceFile {
        version: FORMAT_VERSION,
        weights: inst.weights().to_vec(),
        measures: inst
            .measures()
            .iter()
            .map(|m| MeasureRef::Inline(measure_to_file(m, None)))
            .collect(),
    };
    write_json(path, &file)
}

/// Reads an instance file; measure references resolve relative to the
/// instance file's directory.
pub fn read_instance(path: &Path) -> Result<BarycenterInstance, IoError> {
    let file: InstanceFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    if file.version != FORMAT_VERSION {
        return Err(IoError::Version { got: file.version, expected: FORMAT_VERSION });
    }
    if file.weights.len() != file.measures.len() {
        return Err(IoError::WeightCount {
            measures: file.measures.len(),
            weights: file.weights.len(),
        });
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut measures = Vec::with_capacity(file.measures.len());
    for reference in file.measures {
        measures.push(match reference {
            MeasureRef::Inline(inline) => file_to_measure(inline)?,
            MeasureRef::Path { path: rel } => read_measure(&base.join(rel))?,
        });
    }
    Ok(BarycenterInstance::new(measures, file.weights)?)
}

/// Row-major grid of nonnegative intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityGrid {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

/// Row-major RGB image with channels already scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<[f64; 3]>,
}

/// Empirical measure of a grayscale grid: one atom per positive pixel at
/// the pixel center, coordinates scaled by the longer side so the image
/// sits in the unit box, masses proportional to intensity.
pub fn ingest_grayscale(grid: &IntensityGrid) -> Result<DiscreteMeasure, IoError> {
    if grid.data.len() != grid.height * grid.width {
        return Err(IoError::MalformedImage(format!(
            "{}x{} grid carries {} samples",
            grid.height,
            grid.width,
            grid.data.len()
        )));
    }
    let side = grid.height.max(grid.width) as f64;
    let mut atoms = Vec::new();
    let mut masses = Vec::new();
    let mut total = 0.0;
    for r in 0..grid.height {
        for c in 0..grid.width {
            let v = grid.data[r * grid.width + c];
            if !v.is_finite() || v < 0.0 {
                return Err(IoError::MalformedImage(format!(
                    "intensity {v} at row {r}, column {c}"
                )));
            }
            if v > 0.0 {
                atoms.push(Point::new(vec![
                    (c as f64 + 0.5) / side,
                    (r as f64 + 0.5) / side,
                ]));
                masses.push(v);
                total += v;
            }
        }
    }
    if atoms.is_empty() {
        return Err(IoError::BlankImage);
    }
    for m in &mut masses {
        *m /= total;
    }
    Ok(DiscreteMeasure::new(atoms, masses)?)
}

/// Point-cloud measure of an RGB image: one 5-D atom per pixel, spatial
/// coordinates as in [`ingest_grayscale`], channels in `[0, 1]`, uniform
/// masses.
pub fn ingest_rgb(img: &RgbImage) -> Result<DiscreteMeasure, IoError> {
    if img.height == 0 || img.width == 0 || img.data.len() != img.height * img.width {
        return Err(IoError::MalformedImage(format!(
            "{}x{} image carries {} pixels",
            img.height,
            img.width,
            img.data.len()
        )));
    }
    let side = img.height.max(img.width) as f64;
    let n = img.height * img.width;
    let mut atoms = Vec::with_capacity(n);
    for r in 0..img.height {
        for c in 0..img.width {
            let [red, green, blue] = img.data[r * img.width + c];
            atoms.push(Point::new(vec![
                (c as f64 + 0.5) / side,
                (r as f64 + 0.5) / side,
                red,
                green,
                blue,
            ]));
        }
    }
    Ok(DiscreteMeasure::new(atoms, vec![1.0 / n as f64; n])?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    Gray,
    Rgb,
}

fn pixel_of(coord: f64, grid: usize) -> usize {
    let p = (coord * grid as f64 - 0.5).round();
    (p.max(0.0) as usize).min(grid - 1)
}

/// Rasterizes a measure onto a `G x G` grid.
///
/// Gray mode (d = 2) splats mass to the nearest pixel and scales the
/// result so the brightest pixel is full white, returning binary PGM
/// bytes. RGB mode (d = 5) writes the mass-weighted mean color per pixel
/// (empty pixels black) as binary PPM bytes.
pub fn render_measure(
    measure: &DiscreteMeasure,
    grid: usize,
    mode: RenderMode,
) -> Result<Vec<u8>, IoError> {
    if grid == 0 {
        return Err(IoError::GridTooSmall(grid));
    }
    match mode {
        RenderMode::Gray => {
            if measure.dim() != 2 {
                return Err(IoError::RenderDimension {
                    mode,
                    expected: 2,
                    got: measure.dim(),
                });
            }
            let mut mass = vec![0.0f64; grid * grid];
            for (p, &m) in measure.atoms().iter().zip(measure.masses()) {
                let c = pixel_of(p.coords[0], grid);
                let r = pixel_of(p.coords[1], grid);
                mass[r * grid + c] += m;
            }
            let peak = mass.iter().cloned().fold(0.0f64, f64::max);
            if peak <= 0.0 {
                // Unreachable through validated measures (total mass one),
                // kept as a defensive check.
                return Err(IoError::BlankImage);
            }
            let mut out = format!("P5\n{grid} {grid}\n255\n").into_bytes();
            out.extend(mass.iter().map(|&m| (255.0 * m / peak).round() as u8));
            Ok(out)
        }
        RenderMode::Rgb => {
            if measure.dim() != 5 {
                return Err(IoError::RenderDimension {
                    mode,
                    expected: 5,
                    got: measure.dim(),
                });
            }
            let mut mass = vec![0.0f64; grid * grid];
            let mut color = vec![[0.0f64; 3]; grid * grid];
            for (p, &m) in measure.atoms().iter().zip(measure.masses()) {
                let c = pixel_of(p.coords[0], grid);
                let r = pixel_of(p.coords[1], grid);
                let at = r * grid + c;
                mass[at] += m;
                for ch in 0..3 {
                    color[at][ch] += m * p.coords[2 + ch];
                }
            }
            let mut out = format!("P6\n{grid} {grid}\n255\n").into_bytes();
            for (at, &m) in mass.iter().enumerate() {
                for ch in 0..3 {
                    let value = if m > 0.0 { color[at][ch] / m } else { 0.0 };
                    out.push((255.0 * value.clamp(0.0, 1.0)).round() as u8);
                }
            }
            Ok(out)
        }
    }
}

/// Renders straight to a file; see [`render_measure`].
pub fn write_render(
    path: &Path,
    measure: &DiscreteMeasure,
    grid: usize,
    mode: RenderMode,
) -> Result<(), IoError> {
    fs::write(path, render_measure(measure, grid, mode)?)?;
    Ok(())
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Tokens { bytes, pos: 0 }
    }

    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a str, IoError> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !matches!(self.bytes[self.pos], b' ' | b'\t' | b'\r' | b'\n' | b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(IoError::MalformedImage("unexpected end of header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| IoError::MalformedImage("non-ASCII header token".into()))
    }

    fn number(&mut self) -> Result<usize, IoError> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| IoError::MalformedImage(format!("expected an integer, got {tok:?}")))
    }

    /// Binary raster starts after exactly one separator byte past the
    /// maxval token.
    fn raster(mut self) -> Result<&'a [u8], IoError> {
        if self.pos >= self.bytes.len() {
            return Err(IoError::MalformedImage("missing raster data".into()));
        }
        self.pos += 1;
        Ok(&self.bytes[self.pos..])
    }
}

fn read_header(tokens: &mut Tokens) -> Result<(usize, usize, usize), IoError> {
    let width = tokens.number()?;
    let height = tokens.number()?;
    let maxval = tokens.number()?;
    if width == 0 || height == 0 {
        return Err(IoError::MalformedImage("zero image dimension".into()));
    }
    if !(1..=65_535).contains(&maxval) {
        return Err(IoError::MalformedImage(format!("maxval {maxval} out of range")));
    }
    Ok((width, height, maxval))
}

fn binary_samples(raster: &[u8], count: usize, maxval: usize) -> Result<Vec<f64>, IoError> {
    let wide = maxval > 255;
    let need = if wide { 2 * count } else { count };
    if raster.len() < need {
        return Err(IoError::MalformedImage(format!(
            "raster holds {} bytes, needs {need}",
            raster.len()
        )));
    }
    let samples = if wide {
        raster[..need]
            .chunks_exact(2)
            .map(|pair| f64::from(u16::from_be_bytes([pair[0], pair[1]])))
            .collect()
    } else {
        raster[..need].iter().map(|&b| f64::from(b)).collect()
    };
    Ok(samples)
}

fn ascii_samples(tokens: &mut Tokens, count: usize) -> Result<Vec<f64>, IoError> {
    (0..count).map(|_| tokens.number().map(|v| v as f64)).collect()
}

/// Parses an ASCII (P2) or binary (P5) portable graymap.
pub fn parse_pgm(bytes: &[u8]) -> Result<IntensityGrid, IoError> {
    let mut tokens = Tokens::new(bytes);
    let magic = tokens.token()?;
    let binary = match magic {
        "P2" => false,
        "P5" => true,
        other => {
            return Err(IoError::MalformedImage(format!("expected P2 or P5, got {other:?}")))
        }
    };
    let (width, height, maxval) = read_header(&mut tokens)?;
    let count = width * height;
    let data = if binary {
        binary_samples(tokens.raster()?, count, maxval)?
    } else {
        ascii_samples(&mut tokens, count)?
    };
    Ok(IntensityGrid { height, width, data })
}

/// Parses an ASCII (P3) or binary (P6) portable pixmap into `[0,1]`
/// channels.
pub fn parse_ppm(bytes: &[u8]) -> Result<RgbImage, IoError> {
    let mut tokens = Tokens::new(bytes);
    let magic = tokens.token()?;
    let binary = match magic {
        "P3" => false,
        "P6" => true,
        other => {
            return Err(IoError::MalformedImage(format!("expected P3 or P6, got {other:?}")))
        }
    };
    let (width, height, maxval) = read_header(&mut tokens)?;
    let count = 3 * width * height;
    let flat = if binary {
        binary_samples(tokens.raster()?, count, maxval)?
    } else {
        ascii_samples(&mut tokens, count)?
    };
    let scale = maxval as f64;
    let data = flat
        .chunks_exact(3)
        .map(|px| [px[0] / scale, px[1] / scale, px[2] / scale])
        .collect();
    Ok(RgbImage { height, width, data })
}

/// Parses a comma-separated intensity grid; every row must have the same
/// number of columns.
pub fn parse_csv_grid(text: &str) -> Result<IntensityGrid, IoError> {
    let mut width = None;
    let mut data = Vec::new();
    let mut height = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            let value: f64 = cell.trim().parse().map_err(|_| {
                IoError::MalformedImage(format!("line {}: bad number {cell:?}", lineno + 1))
            })?;
            if !value.is_finite() || value < 0.0 {
                return Err(IoError::MalformedImage(format!(
                    "line {}: negative or non-finite intensity {value}",
                    lineno + 1
                )));
            }
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(IoError::MalformedImage(format!(
                    "line {}: {} columns, expected {w}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        data.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| IoError::MalformedImage("empty grid".into()))?;
    Ok(IntensityGrid { height, width, data })
}

/// Reads a grayscale source, `.pgm` or `.csv` by extension.
pub fn read_intensity_grid(path: &Path) -> Result<IntensityGrid, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => parse_pgm(&fs::read(path)?),
        Some("csv") => parse_csv_grid(&fs::read_to_string(path)?),
        other => Err(IoError::MalformedImage(format!(
            "unsupported grayscale extension {other:?}"
        ))),
    }
}

pub fn read_rgb_image(path: &Path) -> Result<RgbImage, IoError> {
    parse_ppm(&fs::read(path)?)
}

/// Synthetic dataset of nested-ellipse outlines: each measure rasterizes
/// two concentric ellipse rings (random center, axes, inner scale and
/// rotation from one ChaCha8 stream) on a `G x G` grid with equal-mass
/// atoms at pixel centers. A draw is accepted when it lights between
/// `ceil(1.5 G)` and `floor(0.75 G^2)` pixels; up to 64 redraws per
/// measure. Deterministic per seed.
pub fn generate_nested_ellipses(
    count: usize,
    grid: usize,
    seed: u64,
) -> Result<Vec<DiscreteMeasure>, IoError> {
    const MAX_ATTEMPTS: usize = 64;
    if grid < 8 {
        return Err(IoError::GridTooSmall(grid));
    }
    let g = grid as f64;
    let min_atoms = (1.5 * g).ceil() as usize;
    let max_atoms = (0.75 * g * g).floor() as usize;
    let steps = (16 * grid).max(256);
    let mut stream = rng::stream(seed);
    let mut measures = Vec::with_capacity(count);
    for _ in 0..count {
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let cx = (0.3 + 0.4 * rng::unit_f64(&mut stream)) * g;
            let cy = (0.3 + 0.4 * rng::unit_f64(&mut stream)) * g;
            let ax = (0.15 + 0.3 * rng::unit_f64(&mut stream)) * g;
            let ay = (0.15 + 0.3 * rng::unit_f64(&mut stream)) * g;
            let inner = 0.4 + 0.3 * rng::unit_f64(&mut stream);
            let phi = std::f64::consts::PI * rng::unit_f64(&mut stream);
            let (sin_phi, cos_phi) = phi.sin_cos();
            let mut pixels: BTreeSet<(i64, i64)> = BTreeSet::new();
            for scale in [1.0, inner] {
                let (a, b) = (scale * ax, scale * ay);
                for step in 0..steps {
                    let theta = 2.0 * std::f64::consts::PI * step as f64 / steps as f64;
                    let (sin_t, cos_t) = theta.sin_cos();
                    let x = cx + a * cos_t * cos_phi - b * sin_t * sin_phi;
                    let y = cy + a * cos_t * sin_phi + b * sin_t * cos_phi;
                    let (px, py) = (x.floor() as i64, y.floor() as i64);
                    if (0..grid as i64).contains(&px) && (0..grid as i64).contains(&py) {
                        pixels.insert((py, px));
                    }
                }
            }
            if (min_atoms..=max_atoms).contains(&pixels.len()) {
                accepted = Some(pixels);
                break;
            }
        }
        let pixels = accepted.ok_or(IoError::EllipseRetries(MAX_ATTEMPTS))?;
        let n = pixels.len();
        let atoms: Vec<Point> = pixels
            .iter()
            .map(|&(r, c)| {
                Point::new(vec![(c as f64 + 0.5) / g, (r as f64 + 0.5) / g])
            })
            .collect();
        measures.push(DiscreteMeasure::new(atoms, vec![1.0 / n as f64; n])?);
    }
    Ok(measures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::eval_objective;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn measure_round_trip_is_exact() {
        let dir = tmp();
        let path = dir.path().join("m.json");
        let measure = DiscreteMeasure::new(
            vec![Point::new(vec![0.1, 0.2]), Point::new(vec![1.0 / 3.0, 0.7])],
            vec![0.25, 0.75],
        )
        .unwrap();
        write_measure(&path, &measure).unwrap();
        let back = read_measure(&path).unwrap();
        assert_eq!(back.len(), measure.len());
        for (p, q) in back.atoms().iter().zip(measure.atoms()) {
            for (a, b) in p.coords.iter().zip(&q.coords) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        for (a, b) in back.masses().iter().zip(measure.masses()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn mass_drift_in_files_is_rejected() {
        let dir = tmp();
        let path = dir.path().join("bad.json");
        fs::write(
            &path,
            r#"{"version":1,"d":1,"atoms":[{"coords":[0.0],"mass":0.4},{"coords":[1.0],"mass":0.5}]}"#,
        )
        .unwrap();
        match read_measure(&path) {
            Err(IoError::Measure(MeasureError::MassDrift { drift, .. })) => {
                assert!((drift - 0.1).abs() < 1e-12);
            }
            other => panic!("expected mass drift error, got {other:?}"),
        }
    }

    #[test]
    fn mixed_dimensions_in_files_are_rejected() {
        let dir = tmp();
        let path = dir.path().join("bad.json");
        fs::write(
            &path,
            r#"{"version":1,"d":2,"atoms":[{"coords":[0.0,0.0],"mass":0.5},{"coords":[1.0],"mass":0.5}]}"#,
        )
        .unwrap();
        match read_measure(&path) {
            Err(IoError::AtomDimension { index: 1, expected: 2, got: 1 }) => {}
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn future_versions_are_rejected() {
        let dir = tmp();
        let path = dir.path().join("v2.json");
        fs::write(
            &path,
            r#"{"version":2,"d":1,"atoms":[{"coords":[0.0],"mass":1.0}]}"#,
        )
        .unwrap();
        assert!(matches!(read_measure(&path), Err(IoError::Version { got: 2, .. })));
    }

    #[test]
    fn instance_round_trip_preserves_objective() {
        let dir = tmp();
        let path = dir.path().join("inst.json");
        let mut stream = rng::stream(5);
        let measures: Vec<DiscreteMeasure> = (0..3)
            .map(|_| {
                let atoms = (0..3)
                    .map(|_| {
                        Point::new(vec![
                            rng::unit_f64(&mut stream),
                            rng::unit_f64(&mut stream),
                        ])
                    })
                    .collect();
                DiscreteMeasure::new(atoms, vec![0.2, 0.3, 0.5]).unwrap()
            })
            .collect();
        let inst = BarycenterInstance::new(measures, vec![0.2, 0.5, 0.3]).unwrap();
        write_instance(&path, &inst).unwrap();
        let back = read_instance(&path).unwrap();
        let probe = DiscreteMeasure::dirac(Point::new(vec![0.4, 0.6]));
        let before = eval_objective(&inst, &probe).unwrap();
        let after = eval_objective(&back, &probe).unwrap();
        assert!((before - after).abs() <= 1e-12);
    }

    #[test]
    fn instance_files_resolve_measure_paths() {
        let dir = tmp();
        let m = DiscreteMeasure::dirac(Point::new(vec![0.5]));
        write_measure(&dir.path().join("a.json"), &m).unwrap();
        let text = r#"{
            "version": 1,
            "weights": [0.5, 0.5],
            "measures": [
                {"path": "a.json"},
                {"version": 1, "d": 1, "atoms": [{"coords": [1.5], "mass": 1.0}]}
            ]
        }"#;
        let path = dir.path().join("inst.json");
        fs::write(&path, text).unwrap();
        let inst = read_instance(&path).unwrap();
        assert_eq!(inst.k(), 2);
        assert_eq!(inst.measure(0).atoms()[0].coords[0], 0.5);
        assert_eq!(inst.measure(1).atoms()[0].coords[0], 1.5);
    }

    #[test]
    fn weight_count_mismatch_is_rejected() {
        let dir = tmp();
        let path = dir.path().join("inst.json");
        fs::write(
            &path,
            r#"{"version":1,"weights":[1.0],"measures":[
                {"version":1,"d":1,"atoms":[{"coords":[0.0],"mass":1.0}]},
                {"version":1,"d":1,"atoms":[{"coords":[1.0],"mass":1.0}]}
            ]}"#,
        )
        .unwrap();
        assert!(matches!(
            read_instance(&path),
            Err(IoError::WeightCount { measures: 2, weights: 1 })
        ));
    }

    #[test]
    fn grayscale_ingestion_frozen_examples() {
        let one = ingest_grayscale(&IntensityGrid { height: 1, width: 1, data: vec![5.0] })
            .unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.atoms()[0].coords, vec![0.5, 0.5]);
        assert_eq!(one.masses(), &[1.0]);

        let two = ingest_grayscale(&IntensityGrid {
            height: 1,
            width: 2,
            data: vec![1.0, 1.0],
        })
        .unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two.atoms()[0].coords, vec![0.25, 0.25]);
        assert_eq!(two.atoms()[1].coords, vec![0.75, 0.25]);
        assert_eq!(two.masses(), &[0.5, 0.5]);

        let square = ingest_grayscale(&IntensityGrid {
            height: 2,
            width: 2,
            data: vec![1.0, 0.0, 0.0, 3.0],
        })
        .unwrap();
        assert_eq!(square.len(), 2);
        assert_eq!(square.masses(), &[0.25, 0.75]);
        let total: f64 = square.masses().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);

        assert!(matches!(
            ingest_grayscale(&IntensityGrid { height: 1, width: 2, data: vec![0.0, 0.0] }),
            Err(IoError::BlankImage)
        ));
    }

    #[test]
    fn rgb_ingestion_frozen_examples() {
        let white = ingest_rgb(&RgbImage { height: 1, width: 1, data: vec![[1.0, 1.0, 1.0]] })
            .unwrap();
        assert_eq!(white.atoms()[0].coords, vec![0.5, 0.5, 1.0, 1.0, 1.0]);
        assert_eq!(white.masses(), &[1.0]);

        let pair = ingest_rgb(&RgbImage {
            height: 1,
            width: 2,
            data: vec![[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]],
        })
        .unwrap();
        assert_eq!(pair.len(), 2);
        assert_eq!(pair.masses(), &[0.5, 0.5]);
        assert_eq!(pair.atoms()[0].coords[2..], [0.0, 0.0, 0.0]);
        assert_eq!(pair.atoms()[1].coords[2..], [1.0, 1.0, 1.0]);

        let four = ingest_rgb(&RgbImage {
            height: 2,
            width: 2,
            data: vec![[0.1; 3], [0.2; 3], [0.3; 3], [0.4; 3]],
        })
        .unwrap();
        assert_eq!(four.len(), 4);
        assert!(four.masses().iter().all(|&m| m == 0.25));
    }

    #[test]
    fn pgm_parsers_accept_ascii_and_binary() {
        let ascii = b"P2 # comment\n2 2\n255\n0 128\n255 64\n";
        let grid = parse_pgm(ascii).unwrap();
        assert_eq!(grid.data, vec![0.0, 128.0, 255.0, 64.0]);

        let mut binary = b"P5\n2 2\n255\n".to_vec();
        binary.extend([0u8, 128, 255, 64]);
        assert_eq!(parse_pgm(&binary).unwrap(), grid);

        let mut wide = b"P5\n1 1\n65535\n".to_vec();
        wide.extend(300u16.to_be_bytes());
        assert_eq!(parse_pgm(&wide).unwrap().data, vec![300.0]);

        assert!(parse_pgm(b"P7\n1 1\n255\n\x00").is_err());
    }

    #[test]
    fn ppm_parsers_scale_channels() {
        let ascii = b"P3\n1 2\n255\n255 0 0\n0 0 255\n";
        let img = parse_ppm(ascii).unwrap();
        assert_eq!(img.data, vec![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);

        let mut binary = b"P6\n1 2\n255\n".to_vec();
        binary.extend([255u8, 0, 0, 0, 0, 255]);
        assert_eq!(parse_ppm(&binary).unwrap(), img);
    }

    #[test]
    fn csv_grids_parse_and_validate() {
        let grid = parse_csv_grid("0, 1.5, 2\n3, 0, 0.25\n").unwrap();
        assert_eq!((grid.height, grid.width), (2, 3));
        assert_eq!(grid.data[1], 1.5);
        assert!(parse_csv_grid("1, 2\n3\n").is_err());
        assert!(parse_csv_grid("1, -2\n").is_err());
        assert!(parse_csv_grid("").is_err());
    }

    #[test]
    fn render_centers_a_dirac() {
        let m = DiscreteMeasure::dirac(Point::new(vec![0.5, 0.5]));
        let bytes = render_measure(&m, 3, RenderMode::Gray).unwrap();
        let (header, raster) = bytes.split_at(bytes.len() - 9);
        assert_eq!(header, b"P5\n3 3\n255\n");
        assert_eq!(raster, &[0, 0, 0, 0, 255, 0, 0, 0, 0]);
    }

    #[test]
    fn render_inverts_ingestion_on_exact_ratios() {
        let data = vec![255.0, 85.0, 170.0, 0.0];
        let grid = IntensityGrid { height: 2, width: 2, data };
        let measure = ingest_grayscale(&grid).unwrap();
        let bytes = render_measure(&measure, 2, RenderMode::Gray).unwrap();
        let raster = &bytes[bytes.len() - 4..];
        assert_eq!(raster, &[255, 85, 170, 0]);
    }

    #[test]
    fn render_rejects_wrong_dimensions() {
        let m = DiscreteMeasure::dirac(Point::new(vec![0.5, 0.5]));
        assert!(matches!(
            render_measure(&m, 4, RenderMode::Rgb),
            Err(IoError::RenderDimension { expected: 5, got: 2, .. })
        ));
        let m5 = DiscreteMeasure::dirac(Point::new(vec![0.5, 0.5, 1.0, 0.0, 0.0]));
        assert!(matches!(
            render_measure(&m5, 4, RenderMode::Gray),
            Err(IoError::RenderDimension { expected: 2, got: 5, .. })
        ));
    }

    #[test]
    fn rgb_render_uses_mass_weighted_colors() {
        let m = DiscreteMeasure::new(
            vec![
                Point::new(vec![0.25, 0.25, 1.0, 0.0, 0.0]),
                Point::new(vec![0.25, 0.25, 0.0, 0.0, 1.0]),
            ],
            vec![0.75, 0.25],
        )
        .unwrap();
        let bytes = render_measure(&m, 2, RenderMode::Rgb).unwrap();
        let raster = &bytes[bytes.len() - 12..];
        assert_eq!(&raster[0..3], &[191, 0, 64]);
        assert_eq!(&raster[3..], &[0u8; 9]);
    }

    #[test]
    fn ellipse_dataset_is_deterministic_and_in_range() {
        let a = generate_nested_ellipses(10, 20, 7).unwrap();
        let b = generate_nested_ellipses(10, 20, 7).unwrap();
        assert_eq!(a.len(), 10);
        for (m1, m2) in a.iter().zip(&b) {
            assert_eq!(m1, m2);
        }
        for m in &a {
            assert!((30..=300).contains(&m.len()), "atom count {}", m.len());
            let first = m.masses()[0];
            assert!(m.masses().iter().all(|&x| x == first), "unequal masses");
            assert!(m
                .atoms()
                .iter()
                .all(|p| p.coords.iter().all(|&c| (0.0..=1.0).contains(&c))));
        }
        let c = generate_nested_ellipses(3, 20, 8).unwrap();
        assert_ne!(a[0], c[0]);
    }

    #[test]
    fn small_grids_are_rejected() {
        assert!(matches!(
            generate_nested_ellipses(1, 7, 0),
            Err(IoError::GridTooSmall(7))
        ));
    }
}
