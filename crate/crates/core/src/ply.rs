//! PLY 1.0 reader and writer (ASCII and binary little-endian).
//!
//! Only the `vertex` element is interpreted. Its `x`, `y`, `z` properties are
//! required; `red`, `green`, `blue` become colors and `nx`, `ny`, `nz`
//! become normals. Any other property or element is parsed and discarded.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cloud::{infer_bit_depth, Point3, PointCloud, Rgb};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLittleEndian,
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

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: ScalarType },
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    body_offset: usize,
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedHeader(msg.into())
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if !bytes.starts_with(b"ply") {
        return Err(malformed("missing `ply` magic"));
    }
    let mut offset = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_end = false;
    let mut first = true;
    while offset < bytes.len() {
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| offset + p)
            .ok_or_else(|| malformed("header not terminated by `end_header`"))?;
        let line = std::str::from_utf8(&bytes[offset..end])
            .map_err(|_| malformed("header is not valid UTF-8"))?
            .trim_end_matches('\r')
            .trim();
        offset = end + 1;
        let mut words = line.split_whitespace();
        let Some(keyword) = words.next() else {
            continue;
        };
        if first {
            if keyword != "ply" {
                return Err(malformed("missing `ply` magic"));
            }
            first = false;
            continue;
        }
        match keyword {
            "format" => {
                let fmt = words.next().ok_or_else(|| malformed("empty format line"))?;
                encoding = Some(match fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(Error::UnsupportedFormat("binary_big_endian".into()))
                    }
                    other => return Err(Error::UnsupportedFormat(other.to_string())),
                });
                match words.next() {
                    Some("1.0") => {}
                    Some(v) => return Err(Error::UnsupportedFormat(format!("version {v}"))),
                    None => return Err(malformed("format line without version")),
                }
            }
            "comment" | "obj_info" => {}
            "element" => {
                let name = words.next().ok_or_else(|| malformed("element without name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| malformed(format!("bad count for element `{name}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| malformed("property before any element"))?;
                let ty = words.next().ok_or_else(|| malformed("property without type"))?;
                let property = if ty == "list" {
                    let count = words
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| malformed("bad list count type"))?;
                    let item = words
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| malformed("bad list item type"))?;
                    Property::List { count, item }
                } else {
                    let ty = ScalarType::parse(ty)
                        .ok_or_else(|| malformed(format!("unknown property type `{ty}`")))?;
                    let name = words.next().ok_or_else(|| malformed("property without name"))?;
                    Property::Scalar {
                        name: name.to_string(),
                        ty,
                    }
                };
                element.properties.push(property);
            }
            "end_header" => {
                saw_end = true;
                break;
            }
            other => return Err(malformed(format!("unexpected header keyword `{other}`"))),
        }
    }
    if !saw_end {
        return Err(malformed("header not terminated by `end_header`"));
    }
    let encoding = encoding.ok_or_else(|| malformed("missing format line"))?;
    Ok(Header {
        encoding,
        elements,
        body_offset: offset,
    })
}

/// Column slots of the vertex properties we care about.
#[derive(Default)]
struct VertexLayout {
    xyz: [Option<usize>; 3],
    rgb: [Option<usize>; 3],
    normal: [Option<usize>; 3],
}

impl VertexLayout {
    fn of(element: &Element) -> Result<Self> {
        let mut layout = Self::default();
        for (slot, prop) in element.properties.iter().enumerate() {
            let Property::Scalar { name, .. } = prop else {
                continue;
            };
            let target = match name.as_str() {
                "x" => &mut layout.xyz[0],
                "y" => &mut layout.xyz[1],
                "z" => &mut layout.xyz[2],
                "red" => &mut layout.rgb[0],
                "green" => &mut layout.rgb[1],
                "blue" => &mut layout.rgb[2],
                "nx" => &mut layout.normal[0],
                "ny" => &mut layout.normal[1],
                "nz" => &mut layout.normal[2],
                _ => continue,
            };
            *target = Some(slot);
        }
        if layout.xyz.iter().any(Option::is_none) {
            return Err(malformed("vertex element lacks x, y or z"));
        }
        Ok(layout)
    }

    fn has_colors(&self) -> bool {
        self.rgb.iter().all(Option::is_some)
    }

    fn has_normals(&self) -> bool {
        self.normal.iter().all(Option::is_some)
    }
}

struct VertexData {
    positions: Vec<Point3>,
    colors: Option<Vec<Rgb>>,
    normals: Option<Vec<Point3>>,
}

impl VertexData {
    fn with_capacity(n: usize, layout: &VertexLayout) -> Self {
        Self {
            positions: Vec::with_capacity(n),
            colors: layout.has_colors().then(|| Vec::with_capacity(n)),
            normals: layout.has_normals().then(|| Vec::with_capacity(n)),
        }
    }

    fn push(&mut self, layout: &VertexLayout, values: &[f64]) {
        let pick = |slots: &[Option<usize>; 3]| {
            [
                values[slots[0].unwrap()],
                values[slots[1].unwrap()],
                values[slots[2].unwrap()],
            ]
        };
        self.positions.push(pick(&layout.xyz));
        if let Some(colors) = self.colors.as_mut() {
            let c = pick(&layout.rgb);
            colors.push(c.map(|v| v.round().clamp(0.0, 255.0) as u8));
        }
        if let Some(normals) = self.normals.as_mut() {
            normals.push(pick(&layout.normal));
        }
    }
}

fn read_ascii(header: &Header, body: &[u8]) -> Result<VertexData> {
    let text = String::from_utf8_lossy(body);
    let mut tokens = text.split_ascii_whitespace();
    for element in &header.elements {
        let is_vertex = element.name == "vertex";
        let layout = if is_vertex {
            Some(VertexLayout::of(element)?)
        } else {
            None
        };
        let mut data = layout
            .as_ref()
            .map(|l| VertexData::with_capacity(element.count, l));
        let mut values = Vec::with_capacity(element.properties.len());
        for row in 0..element.count {
            values.clear();
            for prop in &element.properties {
                let next = |tokens: &mut std::str::SplitAsciiWhitespace| -> Result<f64> {
                    let Some(tok) = tokens.next() else {
                        return Err(if is_vertex {
                            Error::CountMismatch {
                                declared: element.count,
                                found: row,
                            }
                        } else {
                            Error::MalformedBody {
                                vertex: row,
                                reason: format!("truncated element `{}`", element.name),
                            }
                        });
                    };
                    tok.parse::<f64>().map_err(|_| Error::MalformedBody {
                        vertex: row,
                        reason: format!("cannot parse `{tok}` as a number"),
                    })
                };
                match prop {
                    Property::Scalar { .. } => values.push(next(&mut tokens)?),
                    Property::List { .. } => {
                        let n = next(&mut tokens)?;
                        for _ in 0..n as usize {
                            next(&mut tokens)?;
                        }
                        values.push(f64::NAN);
                    }
                }
            }
            if let (Some(data), Some(layout)) = (data.as_mut(), layout.as_ref()) {
                data.push(layout, &values);
            }
        }
        if let Some(data) = data {
            return Ok(data);
        }
    }
    Err(malformed("no `vertex` element"))
}

fn read_binary_le(header: &Header, body: &[u8]) -> Result<VertexData> {
    let mut pos = 0usize;
    for element in &header.elements {
        let is_vertex = element.name == "vertex";
        let layout = if is_vertex {
            Some(VertexLayout::of(element)?)
        } else {
            None
        };
        let mut data = layout
            .as_ref()
            .map(|l| VertexData::with_capacity(element.count, l));
        let mut values = Vec::with_capacity(element.properties.len());
        for row in 0..element.count {
            values.clear();
            let truncated = || {
                if is_vertex {
                    Error::CountMismatch {
                        declared: element.count,
                        found: row,
                    }
                } else {
                    Error::MalformedBody {
                        vertex: row,
                        reason: format!("truncated element `{}`", element.name),
                    }
                }
            };
            for prop in &element.properties {
                match prop {
                    Property::Scalar { ty, .. } => {
                        let bytes = body.get(pos..pos + ty.size()).ok_or_else(truncated)?;
                        values.push(ty.read_le(bytes));
                        pos += ty.size();
                    }
                    Property::List { count, item } => {
                        let bytes = body.get(pos..pos + count.size()).ok_or_else(truncated)?;
                        let n = count.read_le(bytes) as usize;
                        pos += count.size() + n * item.size();
                        if pos > body.len() {
                            return Err(truncated());
                        }
                        values.push(f64::NAN);
                    }
                }
            }
            if let (Some(data), Some(layout)) = (data.as_mut(), layout.as_ref()) {
                data.push(layout, &values);
            }
        }
        if let Some(data) = data {
            return Ok(data);
        }
    }
    Err(malformed("no `vertex` element"))
}

/// Parses PLY bytes. `bit_depth` overrides inference from the coordinates.
pub fn parse_ply(bytes: &[u8], bit_depth: Option<u32>) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let body = &bytes[header.body_offset..];
    let data = match header.encoding {
        Encoding::Ascii => read_ascii(&header, body)?,
        Encoding::BinaryLittleEndian => read_binary_le(&header, body)?,
    };
    let inferred = infer_bit_depth(&data.positions);
    let mut cloud = PointCloud::new(data.positions)?;
    if let Some(colors) = data.colors {
        cloud = cloud.with_colors(colors)?;
    }
    if let Some(normals) = data.normals {
        cloud = cloud.with_normals(normals)?;
    }
    match bit_depth {
        Some(bits) => cloud.with_bit_depth(bits),
        None => {
            log::info!("bit depth not supplied; inferred {inferred} bits from coordinates");
            Ok(cloud)
        }
    }
}

/// Loads a PLY file, inferring the bit depth from its coordinates.
pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    load_ply_with_bit_depth(path, None)
}

pub fn load_ply_with_bit_depth(path: impl AsRef<Path>, bit_depth: Option<u32>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes, bit_depth)
}

/// Serializes a cloud. Coordinates and normals are written as `double` so a
/// reload reproduces them exactly.
pub fn write_ply<W: Write>(cloud: &PointCloud, binary: bool, mut out: W) -> std::io::Result<()> {
    let format = if binary { "binary_little_endian" } else { "ascii" };
    writeln!(out, "ply")?;
    writeln!(out, "format {format} 1.0")?;
    writeln!(out, "comment bit_depth {}", cloud.bit_depth())?;
    writeln!(out, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(out, "property double {axis}")?;
    }
    if cloud.colors().is_some() {
        for ch in ["red", "green", "blue"] {
            writeln!(out, "property uchar {ch}")?;
        }
    }
    if cloud.normals().is_some() {
        for axis in ["nx", "ny", "nz"] {
            writeln!(out, "property double {axis}")?;
        }
    }
    writeln!(out, "end_header")?;
    for i in 0..cloud.len() {
        let p = cloud.positions()[i];
        let c = cloud.colors().map(|c| c[i]);
        let n = cloud.normals().map(|n| n[i]);
        if binary {
            for v in p {
                out.write_all(&v.to_le_bytes())?;
            }
            if let Some(c) = c {
                out.write_all(&c)?;
            }
            if let Some(n) = n {
                for v in n {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        } else {
            write!(out, "{} {} {}", p[0], p[1], p[2])?;
            if let Some(c) = c {
                write!(out, " {} {} {}", c[0], c[1], c[2])?;
            }
            if let Some(n) = n {
                write!(out, " {} {} {}", n[0], n[1], n[2])?;
            }
            writeln!(out)?;
        }
    }
    out.flush()
}

pub fn save_ply(cloud: &PointCloud, path: impl AsRef<Path>, binary: bool) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_ply(cloud, binary, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
