use std::collections::HashMap;

use super::Vec3;
use crate::error::StlError;

/// Vertex weld tolerance in meters.
pub const WELD_TOLERANCE: f64 = 1e-9;

const HEADER_LEN: usize = 80;
const RECORD_LEN: usize = 50;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh from raw triangles, welding coincident corners and
    /// dropping faces that collapse to zero area.
    pub fn from_triangles(triangles: impl IntoIterator<Item = [Vec3; 3]>) -> Self {
        let mut welder = Welder::default();
        let mut faces = Vec::new();
        for tri in triangles {
            let face = [
                welder.index(tri[0]),
                welder.index(tri[1]),
                welder.index(tri[2]),
            ];
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                continue;
            }
            let v = &welder.vertices;
            let area2 = (v[face[1] as usize] - v[face[0] as usize])
                .cross(&(v[face[2] as usize] - v[face[0] as usize]))
                .norm();
            if area2 == 0.0 {
                continue;
            }
            faces.push(face);
        }
        Self {
            vertices: welder.vertices,
            faces,
        }
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn triangles(&self) -> impl Iterator<Item = [Vec3; 3]> + '_ {
        (0..self.faces.len()).map(|i| self.triangle(i))
    }

    /// Axis-aligned bounds `(min, max)`; `None` for an empty mesh.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v + offset).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Signed enclosed volume (positive for outward-facing winding).
    pub fn signed_volume(&self) -> f64 {
        self.triangles()
            .map(|[a, b, c]| a.dot(&b.cross(&c)) / 6.0)
            .sum()
    }
}

#[derive(Default)]
struct Welder {
    vertices: Vec<Vec3>,
    lookup: HashMap<[i64; 3], u32>,
}

impl Welder {
    fn index(&mut self, v: Vec3) -> u32 {
        let key = [
            (v.x / WELD_TOLERANCE).round() as i64,
            (v.y / WELD_TOLERANCE).round() as i64,
            (v.z / WELD_TOLERANCE).round() as i64,
        ];
        let next = self.vertices.len() as u32;
        *self.lookup.entry(key).or_insert_with(|| {
            self.vertices.push(v);
            next
        })
    }
}

/// Parses a binary or ASCII STL payload.
///
/// A payload whose length matches the binary layout exactly is read as binary
/// even if its header starts with `solid`, since many exporters write that.
pub fn parse_stl(bytes: &[u8]) -> Result<TriangleMesh, StlError> {
    if let Some(count) = binary_count(bytes) {
        if HEADER_LEN + 4 + count as usize * RECORD_LEN == bytes.len() {
            return parse_binary(bytes);
        }
    }
    if looks_ascii(bytes) {
        return parse_ascii(bytes);
    }
    parse_binary(bytes)
}

fn binary_count(bytes: &[u8]) -> Option<u32> {
    let raw = bytes.get(HEADER_LEN..HEADER_LEN + 4)?;
    Some(u32::from_le_bytes(raw.try_into().ok()?))
}

fn looks_ascii(bytes: &[u8]) -> bool {
    let head = &bytes[..bytes.len().min(512)];
    let trimmed = head.iter().position(|b| !b.is_ascii_whitespace()).unwrap_or(0);
    head[trimmed..].starts_with(b"solid") && std::str::from_utf8(bytes).is_ok()
}

fn parse_binary(bytes: &[u8]) -> Result<TriangleMesh, StlError> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(StlError::TruncatedHeader { len: bytes.len() });
    }
    let count = binary_count(bytes).expect("length checked");
    if (count as u64) * 3 > u32::MAX as u64 {
        return Err(StlError::VertexCountOverflow {
            offset: HEADER_LEN,
            facets: count as u64,
        });
    }
    let mut triangles = Vec::with_capacity(count as usize);
    for facet in 0..count as usize {
        let offset = HEADER_LEN + 4 + facet * RECORD_LEN;
        let Some(record) = bytes.get(offset..offset + RECORD_LEN) else {
            return Err(StlError::TruncatedFacet {
                facet: facet + 1,
                declared: count as usize,
                offset,
            });
        };
        let read = |i: usize| {
            let s = 12 + i * 4;
            f32::from_le_bytes(record[s..s + 4].try_into().unwrap()) as f64
        };
        triangles.push([
            Vec3::new(read(0), read(1), read(2)),
            Vec3::new(read(3), read(4), read(5)),
            Vec3::new(read(6), read(7), read(8)),
        ]);
    }
    Ok(TriangleMesh::from_triangles(triangles))
}

fn parse_ascii(bytes: &[u8]) -> Result<TriangleMesh, StlError> {
    let text = std::str::from_utf8(bytes).map_err(|e| StlError::Syntax {
        offset: e.valid_up_to(),
        message: "invalid UTF-8".into(),
    })?;
    let mut triangles = Vec::new();
    let mut corners: Vec<Vec3> = Vec::with_capacity(3);
    let mut line_offset = 0usize;
    for line in text.split_inclusive('\n') {
        let offset = line_offset;
        line_offset += line.len();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("vertex") => {
                let mut xyz = [0.0; 3];
                for slot in xyz.iter_mut() {
                    let tok = tokens.next().ok_or_else(|| StlError::Syntax {
                        offset,
                        message: "vertex needs three coordinates".into(),
                    })?;
                    *slot = tok.parse().map_err(|_| StlError::Syntax {
                        offset,
                        message: format!("bad coordinate `{tok}`"),
                    })?;
                }
                if corners.len() == 3 {
                    return Err(StlError::Syntax {
                        offset,
                        message: "facet has more than three vertices".into(),
                    });
                }
                corners.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("endfacet") => {
                if corners.len() != 3 {
                    return Err(StlError::Syntax {
                        offset,
                        message: format!("facet has {} vertices", corners.len()),
                    });
                }
                triangles.push([corners[0], corners[1], corners[2]]);
                corners.clear();
            }
            _ => {}
        }
    }
    if !corners.is_empty() {
        return Err(StlError::Syntax {
            offset: text.len(),
            message: "unterminated facet".into(),
        });
    }
    Ok(TriangleMesh::from_triangles(triangles))
}

/// Serializes to little-endian binary STL with per-face normals.
pub fn write_stl_binary(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + mesh.faces.len() * RECORD_LEN);
    let mut header = [b' '; HEADER_LEN];
    header[..14].copy_from_slice(b"binary markers");
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.faces.len() as u32).to_le_bytes());
    for [a, b, c] in mesh.triangles() {
        let n = (b - a).cross(&(c - a));
        let n = if n.norm() > 0.0 { n.normalize() } else { n };
        for v in [n, a, b, c] {
            for k in 0..3 {
                out.extend_from_slice(&(v[k] as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}
