use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Point3, TriMesh};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

/// Reads and validates a mesh. When `format` is `None` it is inferred from
/// the file extension.
pub fn load_mesh(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<TriMesh> {
    let path = path.as_ref();
    let format = match format.or_else(|| MeshFormat::from_path(path)) {
        Some(f) => f,
        None => {
            return Err(Error::InvalidArgument(format!(
                "cannot infer mesh format of {}",
                path.display()
            )))
        }
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, format)
}

pub fn parse_mesh(text: &str, format: MeshFormat) -> Result<TriMesh> {
    let (vertices, faces) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::Obj => parse_obj(text)?,
        MeshFormat::Ply => parse_ply(text)?,
    };
    if vertices.len() < 4 {
        return Err(Error::parse(0, format!("need at least 4 vertices, found {}", vertices.len())));
    }
    let mut triangles = Vec::with_capacity(faces.len());
    for face in faces {
        // fan triangulation of polygons
        for k in 1..face.len() - 1 {
            triangles.push([face[0], face[k], face[k + 1]]);
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Lines with comments stripped and blanks skipped, tagged with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::parse(line, "missing number"))?;
    tok.parse::<f64>()
        .map_err(|_| Error::parse(line, format!("invalid number {tok:?}")))
}

fn parse_usize(tok: Option<&str>, line: usize) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::parse(line, "missing integer"))?;
    tok.parse::<usize>()
        .map_err(|_| Error::parse(line, format!("invalid integer {tok:?}")))
}

fn read_face<'a>(
    count: usize,
    toks: &mut impl Iterator<Item = &'a str>,
    line: usize,
) -> Result<Vec<usize>> {
    if count < 3 {
        return Err(Error::parse(line, format!("face with {count} vertices")));
    }
    (0..count).map(|_| parse_usize(toks.next(), line)).collect()
}

type Parsed = (Vec<Point3>, Vec<Vec<usize>>);

fn parse_off(text: &str) -> Result<Parsed> {
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or_else(|| Error::parse(0, "empty file"))?;
    let mut toks = header.split_whitespace();
    let first = toks.next().unwrap_or("");
    if !first.ends_with("OFF") {
        return Err(Error::parse(line, "missing OFF header"));
    }
    // counts may follow the keyword on the same line
    let mut rest: Vec<&str> = toks.collect();
    let mut count_line = line;
    if rest.is_empty() {
        let (l, c) = lines.next().ok_or_else(|| Error::parse(line, "missing counts"))?;
        rest = c.split_whitespace().collect();
        count_line = l;
    }
    let mut counts = rest.into_iter();
    let nv = parse_usize(counts.next(), count_line)?;
    let nf = parse_usize(counts.next(), count_line)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| Error::parse(count_line, "truncated vertex list"))?;
        let mut t = s.split_whitespace();
        vertices.push([parse_f64(t.next(), l)?, parse_f64(t.next(), l)?, parse_f64(t.next(), l)?]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, s) = lines.next().ok_or_else(|| Error::parse(count_line, "truncated face list"))?;
        let mut t = s.split_whitespace();
        let k = parse_usize(t.next(), l)?;
        faces.push(read_face(k, &mut t, l)?);
    }
    Ok((vertices, faces))
}

fn parse_obj(text: &str) -> Result<Parsed> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (l, s) in content_lines(text) {
        let mut t = s.split_whitespace();
        match t.next() {
            Some("v") => {
                vertices.push([parse_f64(t.next(), l)?, parse_f64(t.next(), l)?, parse_f64(t.next(), l)?]);
            }
            Some("f") => {
                let mut face = Vec::new();
                for tok in t {
                    let idx = tok.split('/').next().unwrap_or("");
                    let i: i64 = idx
                        .parse()
                        .map_err(|_| Error::parse(l, format!("invalid face index {tok:?}")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        return Err(Error::parse(l, "face index 0"));
                    };
                    if resolved < 0 {
                        return Err(Error::parse(l, format!("face index {i} before first vertex")));
                    }
                    face.push(resolved as usize);
                }
                if face.len() < 3 {
                    return Err(Error::parse(l, "face with fewer than 3 vertices"));
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

fn parse_ply(text: &str) -> Result<Parsed> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(1, "missing ply magic")),
    }

    struct Element {
        name: String,
        count: usize,
        props: Vec<String>,
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut header_end = None;
    for (l, s) in lines.by_ref() {
        let mut t = s.split_whitespace();
        match t.next() {
            Some("format") => {
                if t.next() != Some("ascii") {
                    return Err(Error::parse(l, "only ascii PLY is supported"));
                }
            }
            Some("element") => {
                let name = t.next().unwrap_or("").to_string();
                let count = parse_usize(t.next(), l)?;
                elements.push(Element {
                    name,
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(l, "property before element"))?;
                let name = s.split_whitespace().last().unwrap_or("").to_string();
                el.props.push(name);
            }
            Some("end_header") => {
                header_end = Some(l);
                break;
            }
            _ => {}
        }
    }
    let header_end = header_end.ok_or_else(|| Error::parse(0, "missing end_header"))?;

    let mut body = lines.filter(|(_, s)| !s.is_empty());
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        match el.name.as_str() {
            "vertex" => {
                let pos = |name: &str| el.props.iter().position(|p| p == name);
                let (xi, yi, zi) = match (pos("x"), pos("y"), pos("z")) {
                    (Some(x), Some(y), Some(z)) => (x, y, z),
                    _ => return Err(Error::parse(header_end, "vertex element lacks x/y/z")),
                };
                for _ in 0..el.count {
                    let (l, s) = body.next().ok_or_else(|| Error::parse(header_end, "truncated vertices"))?;
                    let vals: Vec<&str> = s.split_whitespace().collect();
                    let get = |i: usize| parse_f64(vals.get(i).copied(), l);
                    vertices.push([get(xi)?, get(yi)?, get(zi)?]);
                }
            }
            "face" => {
                for _ in 0..el.count {
                    let (l, s) = body.next().ok_or_else(|| Error::parse(header_end, "truncated faces"))?;
                    let mut t = s.split_whitespace();
                    let k = parse_usize(t.next(), l)?;
                    faces.push(read_face(k, &mut t, l)?);
                }
            }
            _ => {
                for _ in 0..el.count {
                    body.next();
                }
            }
        }
    }
    Ok((vertices, faces))
}

/// Writes an OFF file; coordinates use shortest round-trip formatting.
pub fn write_off(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str("OFF\n");
    out.push_str(&format!("{} {} 0\n", mesh.n_vertices(), mesh.n_triangles()));
    for p in mesh.vertices() {
        out.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
    }
    for t in mesh.triangles() {
        out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
