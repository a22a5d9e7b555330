//! Heightmap terrain, line-of-sight viewsheds and derived visibility fields.
//!
//! Cells are addressed by a flat row-major index; row 0 is the north edge.
//! Geometry works in cell units with cell `(r, c)` covering
//! `[c, c + 1) x [r, r + 1)`, and heights in meters. Each cell is a flat-topped
//! column (2.5-D), so a sight line is blocked when it passes below the top of
//! any intermediate column.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Flat row-major cell index.
pub type CellIndex = usize;

/// Default observer eye height above ground, meters.
pub const DEFAULT_EYE_HEIGHT: f64 = 1.5;
/// Default viewing range for robots and targets, meters.
pub const DEFAULT_RANGE_MAX: f64 = 300.0;
/// Fraction at or above which a target is considered to see a cell.
pub const TARGET_VIEW_THRESHOLD: f64 = 0.5;

const BLOCK_EPS: f64 = 1e-9;
const T_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainGrid {
    rows: usize,
    cols: usize,
    cell_size: f64,
    elevation: Vec<f64>,
    traversable: Vec<bool>,
    eye_height: f64,
}

impl TerrainGrid {
    /// Builds a grid from row-major elevations. Every cell starts traversable.
    pub fn new(rows: usize, cols: usize, cell_size: f64, elevation: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Structure(format!("grid must be at least 1x1, got {rows}x{cols}")));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(domain(format!("cell size must be positive, got {cell_size}")));
        }
        if elevation.len() != rows * cols {
            return Err(Error::Structure(format!(
                "expected {} elevations for a {rows}x{cols} grid, got {}",
                rows * cols,
                elevation.len()
            )));
        }
        if let Some(i) = elevation.iter().position(|h| !h.is_finite()) {
            return Err(domain(format!(
                "non-finite elevation at row {}, column {}",
                i / cols,
                i % cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            cell_size,
            traversable: vec![true; rows * cols],
            elevation,
            eye_height: DEFAULT_EYE_HEIGHT,
        })
    }

    pub fn flat(rows: usize, cols: usize, cell_size: f64) -> Result<Self> {
        Self::new(rows, cols, cell_size, vec![0.0; rows * cols])
    }

    pub fn with_eye_height(mut self, eye_height: f64) -> Result<Self> {
        if !(eye_height >= 0.0 && eye_height.is_finite()) {
            return Err(domain(format!("eye height must be >= 0, got {eye_height}")));
        }
        self.eye_height = eye_height;
        Ok(self)
    }

    /// Replaces the traversability overlay.
    pub fn with_traversable(mut self, traversable: Vec<bool>) -> Result<Self> {
        if traversable.len() != self.len() {
            return Err(Error::Structure(format!(
                "traversability overlay has {} cells, grid has {}",
                traversable.len(),
                self.len()
            )));
        }
        self.traversable = traversable;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Total cell count `rows * cols`.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn eye_height(&self) -> f64 {
        self.eye_height
    }

    pub fn elevation(&self) -> &[f64] {
        &self.elevation
    }

    pub fn height(&self, cell: CellIndex) -> f64 {
        self.elevation[cell]
    }

    pub fn set_height(&mut self, cell: CellIndex, height: f64) {
        assert!(height.is_finite(), "elevation must be finite");
        self.elevation[cell] = height;
    }

    pub fn traversable(&self) -> &[bool] {
        &self.traversable
    }

    pub fn is_traversable(&self, cell: CellIndex) -> bool {
        self.traversable[cell]
    }

    pub fn set_traversable(&mut self, cell: CellIndex, value: bool) {
        self.traversable[cell] = value;
    }

    pub fn index(&self, row: usize, col: usize) -> CellIndex {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    /// `(row, col)` of a flat index.
    pub fn coords(&self, cell: CellIndex) -> (usize, usize) {
        (cell / self.cols, cell % self.cols)
    }

    pub fn contains(&self, cell: CellIndex) -> bool {
        cell < self.len()
    }

    /// Checked conversion from signed coordinates.
    pub fn checked_index(&self, row: isize, col: isize) -> Option<CellIndex> {
        (row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols)
            .then(|| row as usize * self.cols + col as usize)
    }

    pub(crate) fn check_cell(&self, cell: CellIndex) -> Result<()> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(domain(format!("cell {cell} outside {}x{} grid", self.rows, self.cols)))
        }
    }

    /// Center-to-center distance in meters.
    pub fn distance(&self, a: CellIndex, b: CellIndex) -> f64 {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        let dr = ra as f64 - rb as f64;
        let dc = ca as f64 - cb as f64;
        dr.hypot(dc) * self.cell_size
    }

    /// 4-connected neighbors inside the grid.
    pub fn neighbors4(&self, cell: CellIndex) -> impl Iterator<Item = CellIndex> + '_ {
        let (r, c) = self.coords(cell);
        let (r, c) = (r as isize, c as isize);
        [(-1, 0), (0, 1), (1, 0), (0, -1)]
            .into_iter()
            .filter_map(move |(dr, dc)| self.checked_index(r + dr, c + dc))
    }
}

// ---------------------------------------------------------------------------
// DEM input/output
// ---------------------------------------------------------------------------

/// On-disk heightmap encodings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DemFormat {
    /// Text header `<rows> <cols> <cell_size_m>` followed by rows of heights.
    AsciiGrid,
    /// Binary P5 graymap with 16-bit big-endian samples, `height = sample * scale`.
    Pgm16 { scale: f64 },
}

/// Parses a heightmap.
///
/// For [`DemFormat::AsciiGrid`] the header carries the cell size; a supplied
/// `cell_size` must agree with it. PGM has no cell size field, so it is required.
pub fn load_dem<R: Read>(source: R, format: DemFormat, cell_size: Option<f64>) -> Result<TerrainGrid> {
    match format {
        DemFormat::AsciiGrid => {
            let grid = read_ascii_grid(source)?;
            if let Some(cs) = cell_size {
                if (cs - grid.cell_size).abs() > 1e-9 * cs.abs().max(1.0) {
                    return Err(Error::Structure(format!(
                        "header cell size {} disagrees with requested {cs}",
                        grid.cell_size
                    )));
                }
            }
            Ok(grid)
        }
        DemFormat::Pgm16 { scale } => {
            let cs = cell_size
                .ok_or_else(|| Error::Structure("PGM heightmaps need an explicit cell size".into()))?;
            read_pgm16(source, scale, cs)
        }
    }
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Splits a line into (1-based column, token) pairs.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let start = rest.find(|c: char| !c.is_whitespace())?;
        let tail = &rest[start..];
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        let tok = &tail[..len];
        let col = offset + start + 1;
        offset += start + len;
        rest = &tail[len..];
        Some((col, tok))
    })
}

fn read_ascii_grid<R: Read>(source: R) -> Result<TerrainGrid> {
    let reader = BufReader::new(source);
    let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });

    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, 1, "empty stream, expected header"))?;
    let header = header?;
    let htoks: Vec<_> = tokens(&header).collect();
    if htoks.len() != 3 {
        return Err(parse_err(hline, 1, "header must be `<rows> <cols> <cell_size_m>`"));
    }
    let rows: usize = htoks[0]
        .1
        .parse()
        .map_err(|_| parse_err(hline, htoks[0].0, format!("bad row count `{}`", htoks[0].1)))?;
    let cols: usize = htoks[1]
        .1
        .parse()
        .map_err(|_| parse_err(hline, htoks[1].0, format!("bad column count `{}`", htoks[1].1)))?;
    let cell_size: f64 = htoks[2]
        .1
        .parse()
        .map_err(|_| parse_err(hline, htoks[2].0, format!("bad cell size `{}`", htoks[2].1)))?;
    if rows == 0 || cols == 0 {
        return Err(Error::Structure(format!("grid must be at least 1x1, got {rows}x{cols}")));
    }

    let mut elevation = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| Error::Structure(format!("expected {rows} rows, found {r}")))?;
        let line = line?;
        let mut n = 0;
        for (col, tok) in tokens(&line) {
            let h: f64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, col, format!("bad height `{tok}`")))?;
            if !h.is_finite() {
                return Err(parse_err(lineno, col, format!("non-finite height `{tok}`")));
            }
            elevation.push(h);
            n += 1;
        }
        if n != cols {
            return Err(Error::Structure(format!(
                "row {r} (line {lineno}) has {n} values, expected {cols}"
            )));
        }
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(Error::Structure(format!("unexpected data after {rows} rows at line {lineno}")));
    }
    TerrainGrid::new(rows, cols, cell_size, elevation)
}

/// Writes the ascii-grid format; `load_dem` reads it back exactly.
pub fn write_ascii_grid<W: Write>(grid: &TerrainGrid, mut out: W) -> Result<()> {
    writeln!(out, "{} {} {}", grid.rows, grid.cols, grid.cell_size)?;
    for r in 0..grid.rows {
        let row = &grid.elevation[r * grid.cols..(r + 1) * grid.cols];
        let line: Vec<String> = row.iter().map(|h| h.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

fn read_pgm16<R: Read>(mut source: R, scale: f64, cell_size: f64) -> Result<TerrainGrid> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(domain(format!("PGM scale must be positive, got {scale}")));
    }
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;

    // Header: magic, width, height, maxval separated by whitespace/comments,
    // then exactly one whitespace byte before the raster.
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(1, start + 1, "truncated PGM header"));
        }
        fields.push((start, String::from_utf8_lossy(&bytes[start..pos]).into_owned()));
    }
    pos += 1;

    if fields[0].1 != "P5" {
        return Err(parse_err(1, 1, format!("expected magic `P5`, got `{}`", fields[0].1)));
    }
    let num = |i: usize, what: &str| -> Result<usize> {
        fields[i]
            .1
            .parse()
            .map_err(|_| parse_err(1, fields[i].0 + 1, format!("bad {what} `{}`", fields[i].1)))
    };
    let cols = num(1, "width")?;
    let rows = num(2, "height")?;
    let maxval = num(3, "maxval")?;
    if rows == 0 || cols == 0 {
        return Err(Error::Structure(format!("grid must be at least 1x1, got {rows}x{cols}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(1, fields[3].0 + 1, format!("maxval {maxval} out of range")));
    }
    let wide = maxval > 255;
    let bpp = if wide { 2 } else { 1 };
    let need = rows * cols * bpp;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != need {
        return Err(Error::Structure(format!(
            "PGM raster has {} bytes, expected {need} for {cols}x{rows}",
            raster.len()
        )));
    }
    let elevation = if wide {
        raster
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 * scale)
            .collect()
    } else {
        raster.iter().map(|&b| b as f64 * scale).collect()
    };
    TerrainGrid::new(rows, cols, cell_size, elevation)
}

/// Writes a 16-bit P5 graymap, quantizing `height / scale` to the nearest sample.
pub fn write_pgm16<W: Write>(grid: &TerrainGrid, scale: f64, mut out: W) -> Result<()> {
    if !(scale > 0.0) {
        return Err(domain(format!("PGM scale must be positive, got {scale}")));
    }
    write!(out, "P5\n{} {}\n65535\n", grid.cols, grid.rows)?;
    for &h in &grid.elevation {
        let q = (h / scale).round();
        if !(0.0..=65535.0).contains(&q) {
            return Err(domain(format!("height {h} not representable at scale {scale}")));
        }
        out.write_all(&(q as u16).to_be_bytes())?;
    }
    Ok(())
}

/// Reads a same-shape grid of `0`/`1` flags (no header).
pub fn load_traversability<R: Read>(source: R, rows: usize, cols: usize) -> Result<Vec<bool>> {
    let reader = BufReader::new(source);
    let mut out = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if seen_rows == rows {
            return Err(Error::Structure(format!("more than {rows} rows in traversability overlay")));
        }
        let mut n = 0;
        for (col, tok) in tokens(&line) {
            out.push(match tok {
                "0" => false,
                "1" => true,
                _ => return Err(parse_err(i + 1, col, format!("expected 0 or 1, got `{tok}`"))),
            });
            n += 1;
        }
        if n != cols {
            return Err(Error::Structure(format!(
                "overlay row {seen_rows} has {n} values, expected {cols}"
            )));
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(Error::Structure(format!("overlay has {seen_rows} rows, expected {rows}")));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Line of sight
// ---------------------------------------------------------------------------

/// Angular limits of a viewshed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FieldOfView {
    Omni,
    /// Compass bearing in degrees (0 = north, clockwise) and full angular width.
    Sector { heading_deg: f64, width_deg: f64 },
}

impl FieldOfView {
    /// Whether a compass bearing falls inside the field of view.
    pub fn admits(&self, bearing_deg: f64) -> bool {
        match *self {
            FieldOfView::Omni => true,
            FieldOfView::Sector { heading_deg, width_deg } => {
                let diff = (bearing_deg - heading_deg).rem_euclid(360.0);
                let diff = diff.min(360.0 - diff);
                diff <= width_deg / 2.0 + 1e-9
            }
        }
    }
}

/// Cells visible from an origin, with the fraction of each cell that is seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityMask {
    pub origin: CellIndex,
    /// `(cell, fraction)` sorted by cell; fractions lie in `(0, 1]`.
    pub entries: Vec<(CellIndex, f64)>,
    pub fov: FieldOfView,
    pub range_min: f64,
    pub range_max: f64,
}

impl VisibilityMask {
    pub fn fraction(&self, cell: CellIndex) -> f64 {
        self.entries
            .binary_search_by_key(&cell, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    /// Keeps cells seen with at least `threshold`, reporting them as fully seen.
    pub fn binarized(&self, threshold: f64) -> VisibilityMask {
        VisibilityMask {
            entries: self
                .entries
                .iter()
                .filter(|e| e.1 >= threshold)
                .map(|&(c, _)| (c, 1.0))
                .collect(),
            ..self.clone()
        }
    }
}

/// Compass bearing in degrees from the center of `from` to the center of `to`.
pub fn bearing_deg(grid: &TerrainGrid, from: CellIndex, to: CellIndex) -> f64 {
    let (r0, c0) = grid.coords(from);
    let (r1, c1) = grid.coords(to);
    let dx = c1 as f64 - c0 as f64;
    let dy = r1 as f64 - r0 as f64;
    dx.atan2(-dy).to_degrees().rem_euclid(360.0)
}

/// The five ground-level sample points of a cell: center, then the north,
/// east, south and west edge midpoints, in cell units `(x, y)`.
pub fn sample_points(grid: &TerrainGrid, cell: CellIndex) -> [(f64, f64); 5] {
    let (r, c) = grid.coords(cell);
    let (x, y) = (c as f64, r as f64);
    [
        (x + 0.5, y + 0.5),
        (x + 0.5, y),
        (x + 1.0, y + 0.5),
        (x + 0.5, y + 1.0),
        (x, y + 0.5),
    ]
}

/// Whether the sight line from the observer eye over `origin` to ground level
/// at `point` on `target` clears every intermediate column.
///
/// Walks the exact sequence of cells the 2-D segment crosses; a column blocks
/// when its top is above the lower end of the sight line over that column.
/// Cells touched only at a corner or edge are ignored, as are the origin and
/// target columns themselves.
pub fn line_of_sight(grid: &TerrainGrid, origin: CellIndex, target: CellIndex, point: (f64, f64)) -> bool {
    let (or, oc) = grid.coords(origin);
    let x0 = oc as f64 + 0.5;
    let y0 = or as f64 + 0.5;
    let z0 = grid.height(origin) + grid.eye_height;
    let (x1, y1) = point;
    let z1 = grid.height(target);
    let dx = x1 - x0;
    let dy = y1 - y0;
    let z_at = |t: f64| z0 + (z1 - z0) * t;

    let mut cx = oc as isize;
    let mut cy = or as isize;
    let step_x: isize = if dx > 0.0 { 1 } else { -1 };
    let step_y: isize = if dy > 0.0 { 1 } else { -1 };
    let t_delta_x = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
    let mut t_max_x = if dx > 0.0 {
        (cx as f64 + 1.0 - x0) / dx
    } else if dx < 0.0 {
        (cx as f64 - x0) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy > 0.0 {
        (cy as f64 + 1.0 - y0) / dy
    } else if dy < 0.0 {
        (cy as f64 - y0) / dy
    } else {
        f64::INFINITY
    };

    let mut t = 0.0;
    loop {
        let t_next = t_max_x.min(t_max_y).min(1.0);
        if let Some(cell) = grid.checked_index(cy, cx) {
            if cell != origin && cell != target && t_next - t > T_EPS {
                let lowest = z_at(t).min(z_at(t_next));
                if grid.height(cell) > lowest + BLOCK_EPS {
                    return false;
                }
            }
        }
        if t_next >= 1.0 - T_EPS {
            return true;
        }
        if (t_max_x - t_max_y).abs() <= T_EPS {
            cx += step_x;
            cy += step_y;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        } else if t_max_x < t_max_y {
            cx += step_x;
            t_max_x += t_delta_x;
        } else {
            cy += step_y;
            t_max_y += t_delta_y;
        }
        t = t_next;
    }
}

/// Fraction of the five sample points of `target` visible from `origin`,
/// ignoring range and field of view. A cell always sees itself fully.
pub fn visible_fraction(grid: &TerrainGrid, origin: CellIndex, target: CellIndex) -> f64 {
    if origin == target {
        return 1.0;
    }
    let seen = sample_points(grid, target)
        .into_iter()
        .filter(|&p| line_of_sight(grid, origin, target, p))
        .count();
    seen as f64 / 5.0
}

/// Viewshed of `origin` under the given angular and range limits.
pub fn viewshed(
    grid: &TerrainGrid,
    origin: CellIndex,
    fov: FieldOfView,
    range_min: f64,
    range_max: f64,
) -> Result<VisibilityMask> {
    grid.check_cell(origin)?;
    if !(range_min >= 0.0 && range_min < range_max) {
        return Err(domain(format!("need 0 <= range_min < range_max, got {range_min}..{range_max}")));
    }
    let (or, oc) = grid.coords(origin);
    let reach = (range_max / grid.cell_size).floor() as isize + 1;
    let mut entries = Vec::new();
    for r in (or as isize - reach)..=(or as isize + reach) {
        for c in (oc as isize - reach)..=(oc as isize + reach) {
            let Some(cell) = grid.checked_index(r, c) else { continue };
            if cell == origin {
                entries.push((cell, 1.0));
                continue;
            }
            let d = grid.distance(origin, cell);
            if d > range_max + 1e-9 || d < range_min - 1e-9 {
                continue;
            }
            if !fov.admits(bearing_deg(grid, origin, cell)) {
                continue;
            }
            let f = visible_fraction(grid, origin, cell);
            if f > 0.0 {
                entries.push((cell, f));
            }
        }
    }
    Ok(VisibilityMask {
        origin,
        entries,
        fov,
        range_min,
        range_max,
    })
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    AverageVisibility,
    Risk,
}

/// One non-negative value per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub kind: FieldKind,
}

impl ScalarField {
    pub fn zeros(len: usize, kind: FieldKind) -> Self {
        Self {
            values: vec![0.0; len],
            kind,
        }
    }

    pub fn get(&self, cell: CellIndex) -> f64 {
        self.values[cell]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// The field divided by its maximum, so the largest value is 1 (an
    /// all-zero field is returned unchanged).
    pub fn normalized_to_unit_max(&self) -> ScalarField {
        let max = self.max();
        if !(max > 0.0) {
            return self.clone();
        }
        ScalarField {
            values: self.values.iter().map(|v| v / max).collect(),
            kind: self.kind,
        }
    }

    /// Median of the values at the selected cells (lower middle for even counts).
    pub fn median_over(&self, cells: impl Iterator<Item = CellIndex>) -> Option<f64> {
        let mut v: Vec<f64> = cells.map(|c| self.values[c]).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
    }
}

/// Mean over all cells `o` of the fraction with which `o` sees each cell.
pub fn average_visibility_map(grid: &TerrainGrid, range_min: f64, range_max: f64) -> Result<ScalarField> {
    let mut values = vec![0.0; grid.len()];
    for origin in 0..grid.len() {
        let mask = viewshed(grid, origin, FieldOfView::Omni, range_min, range_max)?;
        for (cell, f) in mask.entries {
            values[cell] += f;
        }
    }
    let m = grid.len() as f64;
    values.iter_mut().for_each(|v| *v /= m);
    Ok(ScalarField {
        values,
        kind: FieldKind::AverageVisibility,
    })
}

/// Binarized omnidirectional viewsheds of every cell, as seen by a target
/// standing there. Built once per terrain and shared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetViews {
    /// `seen_by[i]` lists the cells a target at `i` sees, sorted.
    seen_by: Vec<Vec<CellIndex>>,
}

impl TargetViews {
    pub fn build(grid: &TerrainGrid, range_max: f64) -> Result<Self> {
        let seen_by = (0..grid.len())
            .map(|i| {
                viewshed(grid, i, FieldOfView::Omni, 0.0, range_max)
                    .map(|m| m.binarized(TARGET_VIEW_THRESHOLD).cells().collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self { seen_by })
    }

    pub fn len(&self) -> usize {
        self.seen_by.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen_by.is_empty()
    }

    /// Cells a target at `cell` sees.
    pub fn view(&self, cell: CellIndex) -> &[CellIndex] {
        &self.seen_by[cell]
    }

    /// `value(l) = sum_i weights[i] * [target at i sees l]`.
    pub fn risk_landscape(&self, weights: &[f64]) -> Result<ScalarField> {
        if weights.len() != self.seen_by.len() {
            return Err(domain(format!(
                "risk weights have {} entries, grid has {}",
                weights.len(),
                self.seen_by.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(domain(format!("risk weight at cell {i} is {}, must be finite and >= 0", weights[i])));
        }
        let mut values = vec![0.0; weights.len()];
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for &l in &self.seen_by[i] {
                values[l] += w;
            }
        }
        Ok(ScalarField {
            values,
            kind: FieldKind::Risk,
        })
    }
}

/// Risk landscape for per-cell threat weights using the target sensing model
/// (omnidirectional, default range, binarized fractions).
pub fn risk_landscape(grid: &TerrainGrid, weights: &[f64]) -> Result<ScalarField> {
    TargetViews::build(grid, DEFAULT_RANGE_MAX)?.risk_landscape(weights)
}

// ---------------------------------------------------------------------------
// Built-in maps
// ---------------------------------------------------------------------------

/// Synthetic terrains used by the experiments and the demo.
pub mod maps {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::TerrainGrid;
    use crate::error::Result;

    /// Period of the corridor lattice: one open lane, then a 4-cell block.
    const PERIOD: usize = 5;

    /// A lattice of one-cell-wide perpendicular corridors between raised,
    /// impassable blocks. Every block has one ground-level alcove opening onto
    /// a corridor; alcoves are the least visible traversable cells.
    pub fn corridors(size: usize, cell_size: f64) -> Result<TerrainGrid> {
        let n = size;
        let mut elevation = vec![0.0; n * n];
        let mut traversable = vec![true; n * n];
        let lane = |i: usize| i.is_multiple_of(PERIOD);
        for r in 0..n {
            for c in 0..n {
                if !lane(r) && !lane(c) {
                    let (br, bc) = (r / PERIOD, c / PERIOD);
                    elevation[r * n + c] = 12.0 + 4.0 * ((3 * br + bc) % 4) as f64;
                    traversable[r * n + c] = false;
                }
            }
        }
        // Alcoves: for block (br, bc) carve the cell on side (br + 2bc) % 4 at
        // offset (br + bc) % 4 along that side.
        let blocks = n.div_ceil(PERIOD);
        for br in 0..blocks {
            for bc in 0..blocks {
                let r0 = br * PERIOD + 1;
                let c0 = bc * PERIOD + 1;
                let off = (br + bc) % (PERIOD - 1);
                let (r, c) = match (br + 2 * bc) % 4 {
                    0 => (r0, c0 + off),
                    1 => (r0 + off, c0 + PERIOD - 2),
                    2 => (r0 + PERIOD - 2, c0 + off),
                    _ => (r0 + off, c0),
                };
                if r < n && c < n && !traversable[r * n + c] {
                    // Only keep alcoves that touch an open lane.
                    let touches = [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)].iter().any(|&(dr, dc)| {
                        let (rr, cc) = (r as isize + dr, c as isize + dc);
                        rr >= 0
                            && cc >= 0
                            && (rr as usize) < n
                            && (cc as usize) < n
                            && (lane(rr as usize) || lane(cc as usize))
                    });
                    if touches {
                        elevation[r * n + c] = 0.0;
                        traversable[r * n + c] = true;
                    }
                }
            }
        }
        TerrainGrid::new(n, n, cell_size, elevation)?.with_traversable(traversable)
    }

    /// Smooth rolling hills from a handful of random Gaussian bumps.
    pub fn hills(rows: usize, cols: usize, cell_size: f64, seed: u64) -> Result<TerrainGrid> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bumps: Vec<(f64, f64, f64, f64)> = (0..(rows * cols / 24).max(3))
            .map(|_| {
                (
                    rng.random_range(0.0..rows as f64),
                    rng.random_range(0.0..cols as f64),
                    rng.random_range(1.0..3.5),
                    rng.random_range(5.0..40.0),
                )
            })
            .collect();
        let mut elevation = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
                let h: f64 = bumps
                    .iter()
                    .map(|&(by, bx, w, amp)| {
                        let d2 = (y - by).powi(2) + (x - bx).powi(2);
                        amp * (-d2 / (2.0 * w * w)).exp()
                    })
                    .sum();
                elevation.push((h * 10.0).round() / 10.0);
            }
        }
        TerrainGrid::new(rows, cols, cell_size, elevation)
    }
}
