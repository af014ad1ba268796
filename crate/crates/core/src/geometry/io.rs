//! Mesh file formats: ASCII OBJ (read/write) and PLY (binary little-endian
//! and ASCII read, binary write). Polygons are fan-triangulated on load.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{TriMesh, Vec3};
use crate::error::{Error, Result};

/// Reads an OBJ or PLY file, chosen by extension, and drops degenerate triangles.
pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let mesh = match ext.as_deref() {
        Some("obj") => parse_obj(&fs::read_to_string(path)?)?,
        Some("ply") => parse_ply(&fs::read(path)?)?,
        _ => {
            return Err(Error::Parse(format!(
                "unsupported mesh extension: {}",
                path.display()
            )))
        }
    };
    Ok(mesh.cleaned())
}

pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    *slot = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Parse(format!("line {}: bad vertex", lineno + 1)))?;
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in it {
                    let head = tok.split('/').next().unwrap_or("");
                    let idx: i64 = head.parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad face index {tok:?}", lineno + 1))
                    })?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else {
                        vertices.len() as i64 + idx
                    };
                    if resolved < 0 {
                        return Err(Error::Parse(format!(
                            "line {}: face index {idx} out of range",
                            lineno + 1
                        )));
                    }
                    poly.push(resolved as u32);
                }
                fan(&poly, &mut triangles);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, triangles)
}

fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for k in 1..poly.len().saturating_sub(1) {
        out.push([poly[0], poly[k], poly[k + 1]]);
    }
}

/// OBJ text with shortest round-trip float formatting; deterministic.
pub fn obj_string(mesh: &TriMesh, header: Option<&str>) -> String {
    let mut s = String::with_capacity(mesh.vertices.len() * 40 + mesh.triangles.len() * 24);
    if let Some(h) = header {
        for line in h.lines() {
            let _ = writeln!(s, "# {line}");
        }
    }
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

pub fn write_obj(path: &Path, mesh: &TriMesh, header: Option<&str>) -> Result<()> {
    fs::write(path, obj_string(mesh, header))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            other => return Err(Error::Parse(format!("unknown PLY type {other}"))),
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

#[derive(Debug)]
enum Property {
    Scalar {
        name: String,
        ty: Scalar,
    },
    List {
        name: String,
        count: Scalar,
        item: Scalar,
    },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

pub fn parse_ply(bytes: &[u8]) -> Result<TriMesh> {
    let mut reader = BufReader::new(bytes);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(Error::Parse("missing ply magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Parse("unterminated PLY header".into()));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", f, _] => format = Some(f.to_string()),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::Parse("bad element count".into()))?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Parse("property before element".into()))?
                .props
                .push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(c)?,
                    item: Scalar::parse(i)?,
                }),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Parse("property before element".into()))?
                .props
                .push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty)?,
                }),
            ["end_header"] => break,
            _ => {}
        }
    }
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    match format.as_deref() {
        Some("binary_little_endian") => parse_ply_binary(&elements, &body),
        Some("ascii") => parse_ply_ascii(&elements, &String::from_utf8_lossy(&body)),
        Some(other) => Err(Error::Parse(format!("unsupported PLY format {other}"))),
        None => Err(Error::Parse("PLY header without format".into())),
    }
}

fn parse_ply_binary(elements: &[Element], body: &[u8]) -> Result<TriMesh> {
    let truncated = || Error::Parse("truncated PLY body".into());
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = body.get(pos..pos + n).ok_or_else(truncated)?;
        pos += n;
        Ok(s)
    };
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for el in elements {
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            for prop in &el.props {
                match prop {
                    Property::Scalar { name, ty } => {
                        let v = ty.read_le(take(ty.size())?);
                        if let Some(k) = ["x", "y", "z"].iter().position(|n| n == name) {
                            xyz[k] = v;
                        }
                    }
                    Property::List { name, count, item } => {
                        let n = count.read_le(take(count.size())?) as usize;
                        let mut poly = Vec::with_capacity(n);
                        for _ in 0..n {
                            poly.push(item.read_le(take(item.size())?) as u32);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index")
                        {
                            fan(&poly, &mut triangles);
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
        }
    }
    TriMesh::new(vertices, triangles)
}

fn parse_ply_ascii(elements: &[Element], body: &str) -> Result<TriMesh> {
    let mut toks = body.split_whitespace();
    let mut next = || -> Result<f64> {
        toks.next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("truncated PLY body".into()))
    };
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for el in elements {
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            for prop in &el.props {
                match prop {
                    Property::Scalar { name, .. } => {
                        let v = next()?;
                        if let Some(k) = ["x", "y", "z"].iter().position(|n| n == name) {
                            xyz[k] = v;
                        }
                    }
                    Property::List { name, .. } => {
                        let n = next()? as usize;
                        let mut poly = Vec::with_capacity(n);
                        for _ in 0..n {
                            poly.push(next()? as u32);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index")
                        {
                            fan(&poly, &mut triangles);
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Binary little-endian PLY with float vertices and `uchar`/`int` faces.
pub fn ply_binary_bytes(mesh: &TriMesh) -> Vec<u8> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    );
    let mut out = header.into_bytes();
    for v in &mesh.vertices {
        for c in v.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        out.push(3);
        for &i in t {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    #[test]
    fn obj_roundtrip_and_fan() {
        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n";
        let mesh = parse_obj(text).unwrap();
        assert_eq!(mesh.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        let again = parse_obj(&obj_string(&mesh, Some("hdr"))).unwrap();
        assert_eq!(again, mesh);
    }

    #[test]
    fn obj_negative_indices() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(mesh.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn obj_rejects_out_of_range() {
        assert!(parse_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }

    #[test]
    fn ply_binary_roundtrip() {
        let mesh = shapes::icosphere(1.0, 1);
        let back = parse_ply(&ply_binary_bytes(&mesh)).unwrap();
        assert_eq!(back.triangles, mesh.triangles);
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn ply_binary_quads_with_extra_properties() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 4\nproperty double x\nproperty double y\nproperty double z\nproperty uchar red\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n".to_vec();
        for (x, y) in [(0.0f64, 0.0f64), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)] {
            for c in [x, y, 0.5] {
                bytes.extend_from_slice(&c.to_le_bytes());
            }
            bytes.push(255);
        }
        bytes.push(4);
        for i in 0u32..4 {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        let mesh = parse_ply(&bytes).unwrap();
        assert_eq!(mesh.vertices[2], Vec3::new(1.0, 1.0, 0.5));
        assert_eq!(mesh.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn ply_truncated_body_is_error() {
        let bytes = ply_binary_bytes(&shapes::icosphere(1.0, 0));
        assert!(parse_ply(&bytes[..bytes.len() - 3]).is_err());
    }
}
