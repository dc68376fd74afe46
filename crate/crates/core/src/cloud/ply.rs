//! PLY point exchange.
//!
//! Reads ASCII and binary little-endian files. Only the `vertex` element is
//! consumed: `x`, `y`, `z` must be `float`/`double`, and `red`, `green`,
//! `blue` (all three, `uchar`) become per-point colors. Other scalar vertex
//! properties are skipped. Any other element (faces, edges, ...) is parsed
//! past and dropped with a warning. Coordinates are widened to `f64`.
//!
//! The writer always emits `double` coordinates, so a binary round trip is
//! bit-exact.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CloudError, Point3, PointCloud, Rgb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Where in the input a parse error was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// 1-based line number.
    Line(usize),
    ByteOffset(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::ByteOffset(o) => write!(f, "byte offset {o}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("PLY I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("PLY parse error at {location}: {message}")]
    Parse { location: Location, message: String },
    #[error("PLY data is not a valid point cloud: {0}")]
    Cloud(#[from] CloudError),
}

fn parse_err<T>(location: Location, message: impl Into<String>) -> Result<T, PlyError> {
    Err(PlyError::Parse {
        location,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, Self::F32 | Self::F64)
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => f64::from(b[0] as i8),
            Self::U8 => f64::from(b[0]),
            Self::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            Self::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            Self::I32 => f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Self::U32 => f64::from(u32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Self::F32 => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Self::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }

    /// Parse an ASCII token, rejecting values outside the declared type.
    fn parse_token(self, tok: &str) -> Option<f64> {
        match self {
            Self::F32 | Self::F64 => tok.parse::<f64>().ok(),
            Self::I8 => tok.parse::<i8>().ok().map(f64::from),
            Self::U8 => tok.parse::<u8>().ok().map(f64::from),
            Self::I16 => tok.parse::<i16>().ok().map(f64::from),
            Self::U16 => tok.parse::<u16>().ok().map(f64::from),
            Self::I32 => tok.parse::<i32>().ok().map(f64::from),
            Self::U32 => tok.parse::<u32>().ok().map(f64::from),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: ScalarType },
    List { count_ty: ScalarType, item_ty: ScalarType },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
    line: usize,
}

#[derive(Debug)]
struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    /// Byte offset of the first body byte.
    body_offset: usize,
    /// Number of header lines (the body starts on the next line).
    lines: usize,
}

fn parse_header(data: &[u8]) -> Result<Header, PlyError> {
    let mut offset = 0usize;
    let mut line_no = 0usize;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();

    loop {
        if offset >= data.len() {
            return parse_err(Location::Line(line_no + 1), "missing end_header");
        }
        let end = data[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(data.len(), |p| offset + p);
        line_no += 1;
        let raw = &data[offset..end];
        offset = (end + 1).min(data.len());
        let Ok(line) = std::str::from_utf8(raw) else {
            return parse_err(Location::Line(line_no), "header line is not valid UTF-8");
        };
        let line = line.trim_end_matches('\r');
        let loc = Location::Line(line_no);
        let mut toks = line.split_whitespace();
        let keyword = toks.next().unwrap_or("");

        if line_no == 1 {
            if line.trim() != "ply" {
                return parse_err(loc, "file does not start with 'ply'");
            }
            continue;
        }
        match keyword {
            "" | "comment" | "obj_info" => {}
            "format" => {
                let f = match (toks.next(), toks.next()) {
                    (Some("ascii"), Some("1.0")) => PlyFormat::Ascii,
                    (Some("binary_little_endian"), Some("1.0")) => PlyFormat::BinaryLittleEndian,
                    (Some(other), _) => {
                        return parse_err(loc, format!("unsupported format '{other}'"))
                    }
                    _ => return parse_err(loc, "malformed format line"),
                };
                format = Some(f);
            }
            "element" => {
                let (Some(name), Some(count)) = (toks.next(), toks.next()) else {
                    return parse_err(loc, "malformed element line");
                };
                let Ok(count) = count.parse::<usize>() else {
                    return parse_err(loc, format!("invalid element count '{count}'"));
                };
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    line: line_no,
                });
            }
            "property" => {
                let Some(el) = elements.last_mut() else {
                    return parse_err(loc, "property declared before any element");
                };
                let rest: Vec<&str> = toks.collect();
                let prop = match rest.as_slice() {
                    ["list", ct, it, _name] => {
                        let (Some(count_ty), Some(item_ty)) =
                            (ScalarType::parse(ct), ScalarType::parse(it))
                        else {
                            return parse_err(loc, format!("unsupported list types '{ct} {it}'"));
                        };
                        if count_ty.is_float() {
                            return parse_err(loc, "list count type must be an integer");
                        }
                        Property::List { count_ty, item_ty }
                    }
                    [ty, name] => {
                        let Some(ty) = ScalarType::parse(ty) else {
                            return parse_err(loc, format!("unsupported property type '{ty}'"));
                        };
                        Property::Scalar {
                            name: name.to_string(),
                            ty,
                        }
                    }
                    _ => return parse_err(loc, "malformed property line"),
                };
                el.properties.push(prop);
            }
            "end_header" => break,
            other => return parse_err(loc, format!("unknown header keyword '{other}'")),
        }
    }

    let Some(format) = format else {
        return parse_err(Location::Line(2), "missing format line");
    };
    Ok(Header {
        format,
        elements,
        body_offset: offset,
        lines: line_no,
    })
}

/// Column layout of the vertex element.
struct VertexLayout {
    xyz: [usize; 3],
    rgb: Option<[usize; 3]>,
}

fn vertex_layout(el: &Element) -> Result<VertexLayout, PlyError> {
    let loc = Location::Line(el.line);
    let find = |wanted: &str| {
        el.properties.iter().position(
            |p| matches!(p, Property::Scalar { name, .. } if name == wanted),
        )
    };
    let ty_of = |i: usize| match &el.properties[i] {
        Property::Scalar { ty, .. } => *ty,
        Property::List { .. } => unreachable!(),
    };
    if el.properties.iter().any(|p| matches!(p, Property::List { .. })) {
        return parse_err(loc, "list properties are not supported on vertex elements");
    }
    let mut xyz = [0usize; 3];
    for (k, axis) in ["x", "y", "z"].iter().enumerate() {
        let Some(i) = find(axis) else {
            return parse_err(loc, format!("vertex element has no '{axis}' property"));
        };
        if !ty_of(i).is_float() {
            return parse_err(loc, format!("vertex '{axis}' must be float or double"));
        }
        xyz[k] = i;
    }
    let color_idx: Vec<Option<usize>> = ["red", "green", "blue"].iter().map(|c| find(c)).collect();
    let rgb = match color_idx.as_slice() {
        [Some(r), Some(g), Some(b)] => {
            if [*r, *g, *b].iter().any(|&i| ty_of(i) != ScalarType::U8) {
                return parse_err(loc, "vertex colors must be uchar");
            }
            Some([*r, *g, *b])
        }
        [None, None, None] => None,
        _ => return parse_err(loc, "vertex colors need all of red, green and blue"),
    };
    Ok(VertexLayout { xyz, rgb })
}

/// Read a PLY file into a point cloud.
pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud, PlyError> {
    let data = fs::read(path)?;
    parse_ply(&data)
}

/// Parse an in-memory PLY document.
pub fn parse_ply(data: &[u8]) -> Result<PointCloud, PlyError> {
    let header = parse_header(data)?;
    let vertex_pos = header.elements.iter().position(|e| e.name == "vertex");
    let layout = match vertex_pos {
        Some(i) => Some(vertex_layout(&header.elements[i])?),
        None => {
            log::warn!("PLY has no vertex element; returning an empty cloud");
            None
        }
    };
    for el in &header.elements {
        if el.name != "vertex" && el.count > 0 {
            log::warn!("ignoring {} '{}' elements in PLY", el.count, el.name);
        }
    }
    let body = &data[header.body_offset..];
    let rows = match header.format {
        PlyFormat::Ascii => read_ascii_body(&header, body, vertex_pos)?,
        PlyFormat::BinaryLittleEndian => read_binary_body(&header, body, vertex_pos)?,
    };
    let Some(layout) = layout else {
        return Ok(PointCloud::empty());
    };
    let points: Vec<Point3> = rows
        .iter()
        .map(|r| Point3::new(r[layout.xyz[0]], r[layout.xyz[1]], r[layout.xyz[2]]))
        .collect();
    match layout.rgb {
        Some(idx) => {
            let colors: Vec<Rgb> = rows
                .iter()
                .map(|r| [r[idx[0]] as u8, r[idx[1]] as u8, r[idx[2]] as u8])
                .collect();
            Ok(PointCloud::with_colors(points, colors)?)
        }
        None => Ok(PointCloud::new(points)?),
    }
}

/// Returns the scalar values of every vertex row; other elements are
/// validated and discarded.
fn read_ascii_body(
    header: &Header,
    body: &[u8],
    vertex_pos: Option<usize>,
) -> Result<Vec<Vec<f64>>, PlyError> {
    let Ok(text) = std::str::from_utf8(body) else {
        return parse_err(
            Location::Line(header.lines + 1),
            "ASCII body is not valid UTF-8",
        );
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (header.lines + 1 + i, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let mut last_line = header.lines;
    let mut vertices = Vec::new();

    for (ei, el) in header.elements.iter().enumerate() {
        let keep = Some(ei) == vertex_pos;
        if keep {
            vertices.reserve(el.count);
        }
        for row in 0..el.count {
            let Some((line_no, line)) = lines.next() else {
                return parse_err(
                    Location::Line(last_line + 1),
                    format!(
                        "expected {} '{}' rows, found only {row}",
                        el.count, el.name
                    ),
                );
            };
            last_line = line_no;
            let loc = Location::Line(line_no);
            let mut toks = line.split_whitespace();
            let mut values = Vec::with_capacity(el.properties.len());
            for prop in &el.properties {
                match prop {
                    Property::Scalar { name, ty } => {
                        let Some(tok) = toks.next() else {
                            return parse_err(loc, format!("missing value for '{name}'"));
                        };
                        let Some(v) = ty.parse_token(tok) else {
                            return parse_err(loc, format!("invalid value '{tok}' for '{name}'"));
                        };
                        values.push(v);
                    }
                    Property::List { count_ty, item_ty } => {
                        let n = toks
                            .next()
                            .and_then(|t| count_ty.parse_token(t))
                            .filter(|n| *n >= 0.0);
                        let Some(n) = n else {
                            return parse_err(loc, "invalid list length");
                        };
                        for _ in 0..n as usize {
                            if toks.next().and_then(|t| item_ty.parse_token(t)).is_none() {
                                return parse_err(loc, "invalid or missing list item");
                            }
                        }
                    }
                }
            }
            if toks.next().is_some() {
                return parse_err(loc, format!("too many values in '{}' row", el.name));
            }
            if keep {
                vertices.push(values);
            }
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return parse_err(
            Location::Line(line_no),
            "unexpected data after the declared elements",
        );
    }
    Ok(vertices)
}

fn read_binary_body(
    header: &Header,
    body: &[u8],
    vertex_pos: Option<usize>,
) -> Result<Vec<Vec<f64>>, PlyError> {
    let base = header.body_offset;
    let mut pos = 0usize;
    let mut vertices = Vec::new();

    let take = |pos: &mut usize, n: usize, what: &str| -> Result<&[u8], PlyError> {
        if body.len() - *pos < n {
            return parse_err(
                Location::ByteOffset(base + *pos),
                format!("unexpected end of data while reading {what}"),
            );
        }
        let s = &body[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };

    for (ei, el) in header.elements.iter().enumerate() {
        let keep = Some(ei) == vertex_pos;
        if keep {
            vertices.reserve(el.count);
        }
        for _ in 0..el.count {
            let mut values = Vec::with_capacity(el.properties.len());
            for prop in &el.properties {
                match prop {
                    Property::Scalar { ty, name } => {
                        let b = take(&mut pos, ty.size(), name)?;
                        values.push(ty.decode_le(b));
                    }
                    Property::List { count_ty, item_ty } => {
                        let at = pos;
                        let n = count_ty.decode_le(take(&mut pos, count_ty.size(), "list length")?);
                        if n < 0.0 {
                            return parse_err(Location::ByteOffset(base + at), "negative list length");
                        }
                        take(&mut pos, n as usize * item_ty.size(), "list items")?;
                    }
                }
            }
            if keep {
                vertices.push(values);
            }
        }
    }
    if pos != body.len() {
        return parse_err(
            Location::ByteOffset(base + pos),
            format!("{} trailing bytes after the declared elements", body.len() - pos),
        );
    }
    Ok(vertices)
}

/// Serialize a cloud as PLY into any writer.
pub fn write_ply_to<W: Write>(cloud: &PointCloud, mut w: W, format: PlyFormat) -> io::Result<()> {
    let fmt_name = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply")?;
    writeln!(w, "format {fmt_name} 1.0")?;
    writeln!(w, "comment written by stemfit")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property double {axis}")?;
    }
    let colors = cloud.colors();
    if colors.is_some() {
        for c in ["red", "green", "blue"] {
            writeln!(w, "property uchar {c}")?;
        }
    }
    writeln!(w, "end_header")?;

    match format {
        PlyFormat::Ascii => {
            for (i, p) in cloud.points().iter().enumerate() {
                write!(w, "{} {} {}", p.x, p.y, p.z)?;
                if let Some(c) = colors {
                    write!(w, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
                }
                writeln!(w)?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let stride = 24 + if colors.is_some() { 3 } else { 0 };
            let mut buf = Vec::with_capacity(stride * cloud.len());
            for (i, p) in cloud.points().iter().enumerate() {
                buf.extend_from_slice(&p.x.to_le_bytes());
                buf.extend_from_slice(&p.y.to_le_bytes());
                buf.extend_from_slice(&p.z.to_le_bytes());
                if let Some(c) = colors {
                    buf.extend_from_slice(&c[i]);
                }
            }
            w.write_all(&buf)?;
        }
    }
    w.flush()
}

pub fn write_ply(cloud: &PointCloud, path: impl AsRef<Path>, format: PlyFormat) -> io::Result<()> {
    let file = fs::File::create(path)?;
    write_ply_to(cloud, io::BufWriter::new(file), format)
}
