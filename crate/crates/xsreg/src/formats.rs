//! PLY and OFF readers and writers.
//!
//! Reading keeps vertex positions and triangulated faces; every other
//! property is parsed and dropped. Polygons with more than three corners are
//! fan-triangulated.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use xsreg_core::{Point3, PointCloud};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("PLY header: {0}")]
    PlyHeader(String),
    #[error("PLY body: {0}")]
    PlyBody(String),
    #[error("big-endian PLY is not supported")]
    BigEndian,
    #[error("OFF line {line}: {msg}")]
    Off { line: usize, msg: String },
    #[error("unknown file extension `{0}` (expected .ply or .off)")]
    Extension(String),
    #[error(transparent)]
    Invalid(#[from] xsreg_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone, PartialEq)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
}

fn header_error(msg: impl Into<String>) -> FormatError {
    FormatError::PlyHeader(msg.into())
}

fn read_header(reader: &mut impl BufRead) -> Result<Header> {
    let mut line = String::new();
    let mut next_line = |line: &mut String| -> Result<bool> {
        line.clear();
        Ok(reader.read_line(line)? > 0)
    };
    if !next_line(&mut line)? || line.trim_end() != "ply" {
        return Err(header_error("missing `ply` magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        if !next_line(&mut line)? {
            return Err(header_error("missing `end_header`"));
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", kind, _version] => {
                format = Some(match *kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => return Err(FormatError::BigEndian),
                    other => return Err(header_error(format!("unknown format `{other}`"))),
                });
            }
            ["element", name, count] => {
                let count = count.parse().map_err(|_| header_error(format!("bad element count `{count}`")))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            ["property", "list", count, item, name] => {
                let element = elements.last_mut().ok_or_else(|| header_error("property before any element"))?;
                let count = Scalar::parse(count).ok_or_else(|| header_error(format!("unknown type `{count}`")))?;
                let item = Scalar::parse(item).ok_or_else(|| header_error(format!("unknown type `{item}`")))?;
                element.properties.push(Property::List { name: name.to_string(), count, item });
            }
            ["property", ty, name] => {
                let element = elements.last_mut().ok_or_else(|| header_error("property before any element"))?;
                let ty = Scalar::parse(ty).ok_or_else(|| header_error(format!("unknown type `{ty}`")))?;
                element.properties.push(Property::Scalar { name: name.to_string(), ty });
            }
            ["end_header"] => break,
            _ => return Err(header_error(format!("unrecognized line `{}`", line.trim_end()))),
        }
    }
    let format = format.ok_or_else(|| header_error("missing `format` line"))?;
    Ok(Header { format, elements })
}

trait ValueSource {
    fn value(&mut self, ty: Scalar) -> Result<f64>;
}

struct AsciiSource<'a> {
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl ValueSource for AsciiSource<'_> {
    fn value(&mut self, _ty: Scalar) -> Result<f64> {
        let token = self.tokens.next().ok_or_else(|| FormatError::PlyBody("unexpected end of data".into()))?;
        token.parse().map_err(|_| FormatError::PlyBody(format!("bad number `{token}`")))
    }
}

struct BinarySource<'a> {
    bytes: &'a [u8],
}

impl ValueSource for BinarySource<'_> {
    fn value(&mut self, ty: Scalar) -> Result<f64> {
        let n = ty.size();
        if self.bytes.len() < n {
            return Err(FormatError::PlyBody("unexpected end of data".into()));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(match ty {
            Scalar::I8 => head[0] as i8 as f64,
            Scalar::U8 => head[0] as f64,
            Scalar::I16 => i16::from_le_bytes([head[0], head[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([head[0], head[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(head.try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(head.try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(head.try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(head.try_into().unwrap()),
        })
    }
}

fn index_value(v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(FormatError::PlyBody(format!("bad index {v}")))
    }
}

fn fan(polygon: &[usize], faces: &mut Vec<[usize; 3]>) {
    for k in 1..polygon.len().saturating_sub(1) {
        faces.push([polygon[0], polygon[k], polygon[k + 1]]);
    }
}

fn read_body(header: &Header, source: &mut impl ValueSource) -> Result<(Vec<Point3>, Vec<[usize; 3]>, bool)> {
    let mut points = Vec::new();
    let mut faces = Vec::new();
    let mut has_faces = false;
    for element in &header.elements {
        let is_vertex = element.name == "vertex";
        let is_face = element.name == "face";
        let axis = |name: &str| match name {
            "x" => Some(0),
            "y" => Some(1),
            "z" => Some(2),
            _ => None,
        };
        if is_vertex {
            let found: Vec<usize> = element
                .properties
                .iter()
                .filter_map(|p| match p {
                    Property::Scalar { name, .. } => axis(name),
                    Property::List { .. } => None,
                })
                .collect();
            if !(0..3).all(|a| found.contains(&a)) {
                return Err(header_error("vertex element lacks x, y or z"));
            }
            points.reserve(element.count);
        }
        has_faces |= is_face;
        let mut polygon = Vec::new();
        for _ in 0..element.count {
            let mut xyz = [0.0; 3];
            for property in &element.properties {
                match property {
                    Property::Scalar { name, ty } => {
                        let v = source.value(*ty)?;
                        if let (true, Some(a)) = (is_vertex, axis(name)) {
                            xyz[a] = v;
                        }
                    }
                    Property::List { name, count, item } => {
                        let n = index_value(source.value(*count)?)?;
                        let keep = is_face && (name == "vertex_indices" || name == "vertex_index");
                        polygon.clear();
                        for _ in 0..n {
                            let v = source.value(*item)?;
                            if keep {
                                polygon.push(index_value(v)?);
                            }
                        }
                        if keep {
                            fan(&polygon, &mut faces);
                        }
                    }
                }
            }
            if is_vertex {
                points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
            }
        }
    }
    Ok((points, faces, has_faces))
}

fn finish(id: &str, points: Vec<Point3>, faces: Vec<[usize; 3]>, has_faces: bool) -> Result<PointCloud> {
    let cloud = if has_faces && !faces.is_empty() {
        PointCloud::with_faces(id, points, faces)
    } else {
        PointCloud::new(id, points)
    };
    cloud.validate()?;
    Ok(cloud)
}

pub fn read_ply_from(reader: impl Read, id: &str) -> Result<PointCloud> {
    let mut reader = BufReader::new(reader);
    let header = read_header(&mut reader)?;
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    let (points, faces, has_faces) = match header.format {
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(&body).map_err(|_| FormatError::PlyBody("ASCII body is not UTF-8".into()))?;
            read_body(&header, &mut AsciiSource { tokens: text.split_ascii_whitespace() })?
        }
        PlyFormat::BinaryLittleEndian => read_body(&header, &mut BinarySource { bytes: &body })?,
    };
    finish(id, points, faces, has_faces)
}

/// Writes `cloud` and its faces, with optional per-vertex RGB colors.
pub fn write_ply_to(mut w: impl Write, cloud: &PointCloud, colors: Option<&[[u8; 3]]>, format: PlyFormat) -> Result<()> {
    if let Some(c) = colors {
        if c.len() != cloud.len() {
            return Err(xsreg_core::Error::Dimension(format!("{} colors for {} points", c.len(), cloud.len())).into());
        }
    }
    let faces = cloud.faces.as_deref().unwrap_or(&[]);
    let mut header = String::from("ply\n");
    header += match format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    };
    header += &format!("element vertex {}\nproperty double x\nproperty double y\nproperty double z\n", cloud.len());
    if colors.is_some() {
        header += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    }
    if !faces.is_empty() {
        header += &format!("element face {}\nproperty list uchar int vertex_indices\n", faces.len());
    }
    header += "end_header\n";
    w.write_all(header.as_bytes())?;
    match format {
        PlyFormat::Ascii => {
            for (i, p) in cloud.points.iter().enumerate() {
                write!(w, "{} {} {}", p.x, p.y, p.z)?;
                if let Some(c) = colors {
                    write!(w, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
                }
                writeln!(w)?;
            }
            for f in faces {
                writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            for (i, p) in cloud.points.iter().enumerate() {
                for v in [p.x, p.y, p.z] {
                    w.write_all(&v.to_le_bytes())?;
                }
                if let Some(c) = colors {
                    w.write_all(&c[i])?;
                }
            }
            for f in faces {
                w.write_all(&[3])?;
                for &v in f {
                    let v = i32::try_from(v).map_err(|_| FormatError::PlyBody(format!("vertex index {v} exceeds int")))?;
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn off_error(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Off { line, msg: msg.into() }
}

pub fn read_off_from(reader: impl Read, id: &str) -> Result<PointCloud> {
    let reader = BufReader::new(reader);
    // (line number, tokens) of non-empty lines with comments stripped
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("");
        let tokens: Vec<String> = content.split_whitespace().map(str::to_string).collect();
        if !tokens.is_empty() {
            lines.push((i + 1, tokens));
        }
    }
    let mut it = lines.into_iter();
    let (first_no, mut first) = it.next().ok_or_else(|| off_error(1, "empty file"))?;
    let magic = first.remove(0);
    if magic != "OFF" {
        return Err(off_error(first_no, format!("expected `OFF`, found `{magic}`")));
    }
    let (counts_no, counts) = if first.is_empty() { it.next().ok_or_else(|| off_error(first_no, "missing counts"))? } else { (first_no, first) };
    let parse_count = |t: Option<&String>| -> Result<usize> {
        t.and_then(|s| s.parse().ok()).ok_or_else(|| off_error(counts_no, "expected `vertices faces edges` counts"))
    };
    let nv = parse_count(counts.first())?;
    let nf = parse_count(counts.get(1))?;
    let mut points = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, t) = it.next().ok_or_else(|| off_error(counts_no, "fewer vertices than declared"))?;
        let xyz: Vec<f64> = t.iter().take(3).map(|s| s.parse().map_err(|_| off_error(no, format!("bad coordinate `{s}`")))).collect::<Result<_>>()?;
        if xyz.len() < 3 {
            return Err(off_error(no, "vertex needs three coordinates"));
        }
        points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (no, t) = it.next().ok_or_else(|| off_error(counts_no, "fewer faces than declared"))?;
        let k: usize = t[0].parse().map_err(|_| off_error(no, "bad polygon size"))?;
        if t.len() < k + 1 {
            return Err(off_error(no, format!("polygon declares {k} vertices but lists {}", t.len() - 1)));
        }
        let polygon: Vec<usize> = t[1..=k].iter().map(|s| s.parse().map_err(|_| off_error(no, format!("bad index `{s}`")))).collect::<Result<_>>()?;
        fan(&polygon, &mut faces);
    }
    finish(id, points, faces, nf > 0)
}

pub fn write_off_to(mut w: impl Write, cloud: &PointCloud) -> Result<()> {
    let faces = cloud.faces.as_deref().unwrap_or(&[]);
    writeln!(w, "OFF\n{} {} 0", cloud.len(), faces.len())?;
    for p in &cloud.points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    for f in faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    w.flush()?;
    Ok(())
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("cloud").to_string()
}

/// Reads a `.ply` or `.off` file; the cloud id is the file stem.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let file = fs::File::open(path)?;
    match extension(path).as_str() {
        "ply" => read_ply_from(file, &stem(path)),
        "off" => read_off_from(file, &stem(path)),
        other => Err(FormatError::Extension(other.into())),
    }
}

/// Writes a `.ply` (binary) or `.off` file chosen by extension.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let ext = extension(path);
    if ext != "ply" && ext != "off" {
        return Err(FormatError::Extension(ext));
    }
    let file = io::BufWriter::new(fs::File::create(path)?);
    if ext == "ply" {
        write_ply_to(file, cloud, None, PlyFormat::BinaryLittleEndian)
    } else {
        write_off_to(file, cloud)
    }
}

pub fn write_colored_ply(path: &Path, cloud: &PointCloud, colors: &[[u8; 3]]) -> Result<()> {
    write_ply_to(io::BufWriter::new(fs::File::create(path)?), cloud, Some(colors), PlyFormat::BinaryLittleEndian)
}
