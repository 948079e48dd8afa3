//! PLY point-cloud reader/writer (ASCII and binary little-endian).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::{Point3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    /// float32 x/y/z (and normals), little-endian.
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    F32,
    F64,
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
}

impl ScalarType {
    fn parse(token: &str) -> Option<Self> {
        Some(match token {
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::F32 | ScalarType::I32 | ScalarType::U32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            ScalarType::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
            ScalarType::I8 => bytes[0] as i8 as f64,
            ScalarType::U8 => bytes[0] as f64,
            ScalarType::I16 => i16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            ScalarType::U16 => u16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            ScalarType::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            ScalarType::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
        }
    }
}

struct VertexLayout {
    /// (name slot, type) per property, in declaration order. Slot indices:
    /// 0..3 xyz, 3..6 normals, usize::MAX = skipped.
    properties: Vec<(usize, ScalarType)>,
    count: usize,
}

const SLOT_NAMES: [&str; 6] = ["x", "y", "z", "nx", "ny", "nz"];

fn parse_header(path: &Path, text: &[u8]) -> Result<(PlyFormat, VertexLayout, usize)> {
    let loc = |line: usize| format!("{}:{}", path.display(), line);

    let mut offset = 0usize;
    let mut line_no = 0usize;
    let mut next_line = |offset: &mut usize, line_no: &mut usize| -> Result<String> {
        if *offset >= text.len() {
            return Err(Error::parse(loc(*line_no), "unexpected end of header"));
        }
        let start = *offset;
        while *offset < text.len() && text[*offset] != b'\n' {
            *offset += 1;
        }
        let line = String::from_utf8_lossy(&text[start..*offset]).trim().to_string();
        *offset += 1; // consume newline
        *line_no += 1;
        Ok(line)
    };

    if next_line(&mut offset, &mut line_no)? != "ply" {
        return Err(Error::parse(loc(1), "not a PLY file (missing magic)"));
    }

    let mut format = None;
    let mut layout: Option<VertexLayout> = None;
    let mut seen_vertex_element = false;
    let mut in_vertex_element = false;

    loop {
        let line = next_line(&mut offset, &mut line_no)?;
        if line.is_empty() || line.starts_with("comment") || line.starts_with("obj_info") {
            continue;
        }
        if line == "end_header" {
            break;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", fmt, "1.0"] => {
                format = Some(match *fmt {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => {
                        return Err(Error::UnsupportedFormat(format!(
                            "PLY format {other} (only ascii and binary_little_endian)"
                        )))
                    }
                });
            }
            ["element", "vertex", count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| Error::parse(loc(line_no), "invalid vertex count"))?;
                layout = Some(VertexLayout {
                    properties: Vec::new(),
                    count,
                });
                seen_vertex_element = true;
                in_vertex_element = true;
            }
            ["element", name, _count] => {
                if !seen_vertex_element {
                    return Err(Error::UnsupportedFormat(format!(
                        "PLY element '{name}' before the vertex element"
                    )));
                }
                in_vertex_element = false;
            }
            ["property", "list", ..] => {
                if in_vertex_element {
                    return Err(Error::UnsupportedFormat(
                        "list property in vertex element".into(),
                    ));
                }
            }
            ["property", ty, name] => {
                if in_vertex_element {
                    let layout = layout.as_mut().expect("inside vertex element");
                    let ty = ScalarType::parse(ty).ok_or_else(|| {
                        Error::parse(loc(line_no), format!("unknown property type '{ty}'"))
                    })?;
                    let slot = SLOT_NAMES
                        .iter()
                        .position(|n| n == name)
                        .unwrap_or(usize::MAX);
                    layout.properties.push((slot, ty));
                }
            }
            _ => {
                return Err(Error::parse(
                    loc(line_no),
                    format!("unrecognized header line '{line}'"),
                ));
            }
        }
    }

    let format =
        format.ok_or_else(|| Error::parse(loc(line_no), "header has no format line"))?;
    let layout = layout
        .ok_or_else(|| Error::parse(loc(line_no), "header has no vertex element"))?;

    let mut have = [false; 6];
    for (slot, _) in &layout.properties {
        if *slot < 6 {
            have[*slot] = true;
        }
    }
    for (i, name) in SLOT_NAMES.iter().enumerate().take(3) {
        if !have[i] {
            return Err(Error::parse(
                loc(line_no),
                format!("missing required property '{name}'"),
            ));
        }
    }
    let normal_count = have[3..].iter().filter(|h| **h).count();
    if normal_count != 0 && normal_count != 3 {
        return Err(Error::parse(
            loc(line_no),
            "normal properties must appear as all of nx, ny, nz",
        ));
    }

    Ok((format, layout, offset))
}

/// Reads a point cloud with optional normals.
pub fn read_ply(path: &Path) -> Result<PointCloud<f64>> {
    let bytes = fs::read(path)?;
    let (format, layout, body_offset) = parse_header(path, &bytes)?;
    let has_normals = layout.properties.iter().any(|(slot, _)| *slot == 3);

    let mut points = Vec::with_capacity(layout.count);
    let mut normals = if has_normals {
        Some(Vec::with_capacity(layout.count))
    } else {
        None
    };

    match format {
        PlyFormat::Ascii => {
            let body = String::from_utf8_lossy(&bytes[body_offset..]);
            let mut lines = body.lines();
            let header_lines = bytes[..body_offset].iter().filter(|b| **b == b'\n').count();
            for i in 0..layout.count {
                let line_no = header_lines + i + 1;
                let line = lines.next().ok_or_else(|| {
                    Error::parse(
                        format!("{}:{}", path.display(), line_no),
                        "unexpected end of file",
                    )
                })?;
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.len() < layout.properties.len() {
                    return Err(Error::parse(
                        format!("{}:{}", path.display(), line_no),
                        format!(
                            "expected {} values, found {}",
                            layout.properties.len(),
                            tokens.len()
                        ),
                    ));
                }
                let mut slots = [0.0f64; 6];
                for ((slot, _), token) in layout.properties.iter().zip(&tokens) {
                    if *slot < 6 {
                        slots[*slot] = token.parse().map_err(|_| {
                            Error::parse(
                                format!("{}:{}", path.display(), line_no),
                                format!("invalid number '{token}'"),
                            )
                        })?;
                    }
                }
                points.push(Point3::new(slots[0], slots[1], slots[2]));
                if let Some(ns) = normals.as_mut() {
                    ns.push(Vector3::new(slots[3], slots[4], slots[5]));
                }
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = layout.properties.iter().map(|(_, ty)| ty.size()).sum();
            let body = &bytes[body_offset..];
            if body.len() < stride * layout.count {
                return Err(Error::parse(
                    path.display().to_string(),
                    format!(
                        "binary body too short: {} bytes for {} vertices of {} bytes",
                        body.len(),
                        layout.count,
                        stride
                    ),
                ));
            }
            for i in 0..layout.count {
                let mut cursor = i * stride;
                let mut slots = [0.0f64; 6];
                for (slot, ty) in &layout.properties {
                    if *slot < 6 {
                        slots[*slot] = ty.read_le(&body[cursor..]);
                    }
                    cursor += ty.size();
                }
                points.push(Point3::new(slots[0], slots[1], slots[2]));
                if let Some(ns) = normals.as_mut() {
                    ns.push(Vector3::new(slots[3], slots[4], slots[5]));
                }
            }
        }
    }

    let mut cloud = PointCloud::from_points(points);
    cloud.normals = normals;
    Ok(cloud)
}

/// Writes a point cloud (points plus normals when present). ASCII output
/// prints shortest round-trip decimals; binary output stores float32.
pub fn write_ply(cloud: &PointCloud<f64>, path: &Path, format: PlyFormat) -> Result<()> {
    let mut out = Vec::new();
    let format_line = match format {
        PlyFormat::Ascii => "format ascii 1.0",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0",
    };
    let scalar = match format {
        PlyFormat::Ascii => "double",
        PlyFormat::BinaryLittleEndian => "float",
    };
    writeln!(out, "ply")?;
    writeln!(out, "{format_line}")?;
    writeln!(out, "element vertex {}", cloud.len())?;
    for name in ["x", "y", "z"] {
        writeln!(out, "property {scalar} {name}")?;
    }
    if cloud.normals.is_some() {
        for name in ["nx", "ny", "nz"] {
            writeln!(out, "property {scalar} {name}")?;
        }
    }
    writeln!(out, "end_header")?;

    match format {
        PlyFormat::Ascii => {
            for (i, p) in cloud.points.iter().enumerate() {
                write!(out, "{} {} {}", p.x, p.y, p.z)?;
                if let Some(ns) = &cloud.normals {
                    write!(out, " {} {} {}", ns[i].x, ns[i].y, ns[i].z)?;
                }
                writeln!(out)?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for (i, p) in cloud.points.iter().enumerate() {
                for v in [p.x, p.y, p.z] {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
                if let Some(ns) = &cloud.normals {
                    for v in [ns[i].x, ns[i].y, ns[i].z] {
                        out.extend_from_slice(&(v as f32).to_le_bytes());
                    }
                }
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}
