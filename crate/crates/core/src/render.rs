//! Depth-only z-buffer rasterizer, mesh loading and synthetic view generation.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{
    inplane_rotations, project, view_rotation_obj2cam, CameraIntrinsics, Pose, Rotation3, Vec2, Vec3, ViewSphere,
};
use crate::image::Image;
use crate::rng::Rng;

/// Near clipping plane in mm.
pub const NEAR_PLANE: f64 = 10.0;

/// Vertex count above which the diameter is taken over a strided sample.
const EXACT_DIAMETER_LIMIT: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    diameter: f64,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::EmptyGeometry("mesh has no triangles".into()));
        }
        if let Some(t) = triangles
            .iter()
            .find(|t| t.iter().any(|&i| i as usize >= vertices.len()))
        {
            return Err(Error::bounds(
                "triangle index",
                format!("{t:?} with {} vertices", vertices.len()),
            ));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::EmptyGeometry("non-finite vertex".into()));
        }
        let diameter = diameter_of(&vertices);
        if !(diameter > 0.0) {
            return Err(Error::EmptyGeometry("mesh has zero extent".into()));
        }
        Ok(TriangleMesh {
            vertices,
            triangles,
            diameter,
        })
    }

    /// Max pairwise vertex distance (mm).
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Axis-aligned box centered at the origin.
    pub fn cuboid(sx: f64, sy: f64, sz: f64) -> Self {
        let (hx, hy, hz) = (sx / 2.0, sy / 2.0, sz / 2.0);
        let vertices = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { -hx } else { hx },
                    if i & 2 == 0 { -hy } else { hy },
                    if i & 4 == 0 { -hz } else { hz },
                )
            })
            .collect();
        let quads = [
            [0, 2, 3, 1],
            [4, 5, 7, 6],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 4, 6, 2],
            [1, 3, 7, 5],
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        TriangleMesh::new(vertices, triangles).expect("cuboid is valid")
    }

    pub fn cube(side: f64) -> Self {
        Self::cuboid(side, side, side)
    }

    /// Closed cylinder around the z-axis, centered at the origin.
    pub fn cylinder(radius: f64, height: f64, segments: usize) -> Self {
        let segments = segments.max(3);
        let h = height / 2.0;
        let mut vertices = Vec::with_capacity(2 * segments + 2);
        for i in 0..segments {
            let a = 2.0 * std::f64::consts::PI * i as f64 / segments as f64;
            let (s, c) = a.sin_cos();
            vertices.push(Vec3::new(radius * c, radius * s, -h));
            vertices.push(Vec3::new(radius * c, radius * s, h));
        }
        let bottom = vertices.len() as u32;
        vertices.push(Vec3::new(0.0, 0.0, -h));
        vertices.push(Vec3::new(0.0, 0.0, h));
        let top = bottom + 1;
        let mut triangles = Vec::with_capacity(4 * segments);
        for i in 0..segments as u32 {
            let j = (i + 1) % segments as u32;
            let (b0, t0, b1, t1) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
            triangles.push([b0, b1, t1]);
            triangles.push([b0, t1, t0]);
            triangles.push([bottom, b1, b0]);
            triangles.push([top, t0, t1]);
        }
        TriangleMesh::new(vertices, triangles).expect("cylinder is valid")
    }

    /// Rigidly moved copy of the mesh.
    pub fn transformed(&self, pose: &Pose) -> Self {
        let vertices = self.vertices.iter().map(|v| pose.transform_point(v)).collect();
        TriangleMesh {
            vertices,
            triangles: self.triangles.clone(),
            diameter: self.diameter,
        }
    }

    /// Union of two meshes (no vertex welding).
    pub fn merged(&self, other: &TriangleMesh) -> Self {
        let offset = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut triangles = self.triangles.clone();
        triangles.extend(
            other
                .triangles
                .iter()
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
        );
        TriangleMesh::new(vertices, triangles).expect("union of valid meshes")
    }

    /// Asymmetric test object: a 100 x 60 x 40 mm block with a 40 mm post
    /// and a side tab, so every view pins down the full rotation.
    pub fn bracket() -> Self {
        let block = TriangleMesh::cuboid(100.0, 60.0, 40.0);
        let post = TriangleMesh::cuboid(20.0, 20.0, 40.0)
            .transformed(&Pose::new(Rotation3::identity(), Vec3::new(30.0, 10.0, 40.0)));
        let tab = TriangleMesh::cuboid(30.0, 20.0, 10.0)
            .transformed(&Pose::new(Rotation3::identity(), Vec3::new(-35.0, -40.0, -15.0)));
        block.merged(&post).merged(&tab)
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let t = self.triangles[i];
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                (b - a).cross(&(c - a)).norm() / 2.0
            })
            .sum()
    }

    /// `n` points sampled uniformly by area, with their face normals.
    pub fn sample_surface(&self, n: usize, rng: &mut Rng) -> (Vec<Vec3>, Vec<Vec3>) {
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for i in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(i);
            total += (b - a).cross(&(c - a)).norm() / 2.0;
            cumulative.push(total);
        }
        let mut points = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        for _ in 0..n {
            let target = rng.next_f64() * total;
            let i = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
            let [a, b, c] = self.triangle(i);
            let (mut u, mut v) = (rng.next_f64(), rng.next_f64());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            points.push(a + (b - a) * u + (c - a) * v);
            let nrm = (b - a).cross(&(c - a));
            normals.push(if nrm.norm() > 0.0 { nrm.normalize() } else { Vec3::z() });
        }
        (points, normals)
    }
}

fn max_pairwise(points: &[Vec3]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max((a - b).norm_squared());
        }
    }
    best.sqrt()
}

fn diameter_of(vertices: &[Vec3]) -> f64 {
    if vertices.len() <= EXACT_DIAMETER_LIMIT {
        max_pairwise(vertices)
    } else {
        let stride = vertices.len() as f64 / EXACT_DIAMETER_LIMIT as f64;
        let sample: Vec<Vec3> = (0..EXACT_DIAMETER_LIMIT)
            .map(|i| vertices[(i as f64 * stride) as usize])
            .collect();
        max_pairwise(&sample)
    }
}

/// Writes `v`/`f` records; vertex coordinates use Rust's shortest round-trip formatting.
pub fn write_obj(mesh: &TriangleMesh, mut w: impl Write) -> Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn save_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    write_obj(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Loads an ASCII OBJ (`v`/`f` records) or ASCII PLY mesh; polygons are fan-triangulated.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    if ext == "ply" || text.starts_with("ply") {
        parse_ply(&text, path)
    } else {
        parse_obj(&text, path)
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for k in 1..poly.len() - 1 {
        out.push([poly[0], poly[k], poly[k + 1]]);
    }
}

pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let coords: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(path, line_no, format!("bad vertex: {e}")))?;
                if coords.len() != 3 {
                    return Err(parse_err(path, line_no, "vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<i64> = it
                    .map(|tok| tok.split('/').next().unwrap_or("").parse::<i64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(path, line_no, format!("bad face index: {e}")))?;
                if idx.len() < 3 {
                    return Err(parse_err(path, line_no, "face needs at least 3 vertices"));
                }
                faces.push((line_no, idx));
            }
            _ => {}
        }
    }
    let n = vertices.len() as i64;
    let mut triangles = Vec::new();
    for (line_no, idx) in faces {
        let poly = idx
            .iter()
            .map(|&i| {
                let resolved = if i < 0 { n + i } else { i - 1 };
                if i == 0 || resolved < 0 || resolved >= n {
                    Err(parse_err(
                        path,
                        line_no,
                        format!("vertex index {i} out of range (1..={n})"),
                    ))
                } else {
                    Ok(resolved as u32)
                }
            })
            .collect::<Result<Vec<u32>>>()?;
        fan(&poly, &mut triangles);
    }
    if triangles.is_empty() {
        return Err(Error::EmptyGeometry(format!("{}: no faces", path.display())));
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn parse_ply(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut n_vertices = None;
    let mut n_faces = 0usize;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut current = "";
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_err(path, 1, "missing 'ply' magic")),
    }
    for (line_no, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", fmt, ..] if *fmt != "ascii" => {
                return Err(parse_err(path, line_no, format!("unsupported PLY format '{fmt}'")))
            }
            ["element", "vertex", n] => {
                current = "vertex";
                n_vertices = Some(n.parse().map_err(|_| parse_err(path, line_no, "bad vertex count"))?);
            }
            ["element", "face", n] => {
                current = "face";
                n_faces = n.parse().map_err(|_| parse_err(path, line_no, "bad face count"))?;
            }
            ["element", ..] => current = "other",
            ["property", .., name] if current == "vertex" => vertex_props.push(name.to_string()),
            ["end_header"] => break,
            _ => {}
        }
    }
    let n_vertices = n_vertices.ok_or_else(|| parse_err(path, 0, "no vertex element"))?;
    let axis = |name: &str| {
        vertex_props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| parse_err(path, 0, format!("vertex property '{name}' missing")))
    };
    let (ix, iy, iz) = (axis("x")?, axis("y")?, axis("z")?);
    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| parse_err(path, 0, "truncated vertex list"))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(path, line_no, format!("bad vertex: {e}")))?;
        if vals.len() < vertex_props.len() {
            return Err(parse_err(path, line_no, "vertex record too short"));
        }
        vertices.push(Vec3::new(vals[ix], vals[iy], vals[iz]));
    }
    let mut triangles = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let (line_no, line) = lines.next().ok_or_else(|| parse_err(path, 0, "truncated face list"))?;
        let vals: Vec<usize> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(path, line_no, format!("bad face: {e}")))?;
        let count = *vals.first().ok_or_else(|| parse_err(path, line_no, "empty face"))?;
        if count < 3 || vals.len() < count + 1 {
            return Err(parse_err(path, line_no, "malformed face record"));
        }
        let poly: Vec<u32> = vals[1..=count].iter().map(|&i| i as u32).collect();
        if let Some(bad) = poly.iter().find(|&&i| i as usize >= n_vertices) {
            return Err(parse_err(path, line_no, format!("vertex index {bad} out of range")));
        }
        fan(&poly, &mut triangles);
    }
    if triangles.is_empty() {
        return Err(Error::EmptyGeometry(format!("{}: no faces", path.display())));
    }
    TriangleMesh::new(vertices, triangles)
}

/// Depth map in mm; `0` marks pixels without surface.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize) -> Self {
        DepthImage {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::bounds("depth value", "depth must be finite and >= 0"));
        }
        Ok(DepthImage { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d > 0.0).count()
    }

    /// Single-channel float image holding the raw depth values.
    pub fn to_image(&self) -> Image {
        Image::gray(self.width, self.height, self.data.clone()).expect("matching size")
    }

    /// 16-bit grayscale PNG, value = round(mm) clamped to `[0, 65535]`.
    pub fn save_png16(&self, path: impl AsRef<Path>) -> Result<()> {
        let buf: Vec<u16> = self
            .data
            .iter()
            .map(|&d| d.round().clamp(0.0, 65535.0) as u16)
            .collect();
        let img =
            image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(self.width as u32, self.height as u32, buf)
                .ok_or_else(|| Error::Image("buffer size mismatch".into()))?;
        img.save(path).map_err(|e| Error::Image(e.to_string()))
    }

    pub fn load_png16(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image(e.to_string()))?.to_luma16();
        let (w, h) = (img.width() as usize, img.height() as usize);
        DepthImage::from_data(w, h, img.into_raw().into_iter().map(|v| v as f32).collect())
    }

    /// Raw dump: `u32 width, u32 height` (LE) followed by `width*height` LE f32.
    pub fn write_raw(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_raw(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; 8];
        r.read_exact(&mut header)?;
        let width = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let mut bytes = vec![0u8; width * height * 4];
        r.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        DepthImage::from_data(width, height, data)
    }

    pub fn save_raw(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(fs::File::create(path)?);
        self.write_raw(f)
    }

    pub fn load_raw(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_raw(std::io::BufReader::new(fs::File::open(path)?))
    }

    /// Loads `.png` as 16-bit depth, anything else as a raw dump.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("png") => Self::load_png16(path),
            _ => Self::load_raw(path),
        }
    }
}

/// Renders `mesh` placed at `pose` into a depth image with intrinsics `k`.
///
/// A pixel is covered when its center lies inside the projected triangle
/// (top-left rule on shared edges); depth is interpolated perspective-correctly
/// through `1/z`. No culling.
pub fn render_depth(mesh: &TriangleMesh, pose: &Pose, k: &CameraIntrinsics) -> DepthImage {
    let mut depth = DepthImage::new(k.width as usize, k.height as usize);
    render_into(mesh, pose, k, &mut depth);
    depth
}

/// Renders into an existing buffer (cleared first), reusing its allocation.
pub fn render_into(mesh: &TriangleMesh, pose: &Pose, k: &CameraIntrinsics, depth: &mut DepthImage) {
    depth.width = k.width as usize;
    depth.height = k.height as usize;
    depth.data.clear();
    depth.data.resize(depth.width * depth.height, 0.0);
    render_over(mesh, pose, k, depth);
}

/// Adds `mesh` to an existing z-buffer of the camera's size, keeping the nearer surface.
pub fn render_over(mesh: &TriangleMesh, pose: &Pose, k: &CameraIntrinsics, depth: &mut DepthImage) {
    assert_eq!(
        (depth.width, depth.height),
        (k.width as usize, k.height as usize),
        "depth buffer must match the camera"
    );
    let cam: Vec<Vec3> = mesh.vertices.iter().map(|v| pose.transform_point(v)).collect();
    let mut poly: Vec<Vec3> = Vec::with_capacity(4);
    for t in &mesh.triangles {
        let tri = [cam[t[0] as usize], cam[t[1] as usize], cam[t[2] as usize]];
        clip_near(&tri, &mut poly);
        if poly.len() < 3 {
            continue;
        }
        let projected: Vec<(Vec2, f64)> = poly
            .iter()
            .map(|p| (project(k, p).expect("clipped to near plane"), 1.0 / p.z))
            .collect();
        for i in 1..projected.len() - 1 {
            rasterize(projected[0], projected[i], projected[i + 1], depth);
        }
    }
}

fn clip_near(tri: &[Vec3; 3], out: &mut Vec<Vec3>) {
    out.clear();
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let a_in = a.z >= NEAR_PLANE;
        let b_in = b.z >= NEAR_PLANE;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let s = (NEAR_PLANE - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * s;
            p.z = NEAR_PLANE;
            out.push(p);
        }
    }
}

#[inline]
fn edge(a: &Vec2, b: &Vec2, px: f64, py: f64) -> f64 {
    (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
}

#[inline]
fn is_top_left(a: &Vec2, b: &Vec2) -> bool {
    let d = b - a;
    (d.y == 0.0 && d.x > 0.0) || d.y < 0.0
}

fn rasterize(v0: (Vec2, f64), v1: (Vec2, f64), v2: (Vec2, f64), depth: &mut DepthImage) {
    let (p0, w0) = v0;
    let (mut p1, mut w1) = v1;
    let (mut p2, mut w2) = v2;
    let mut area = edge(&p0, &p1, p2.x, p2.y);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    if area < 0.0 {
        std::mem::swap(&mut p1, &mut p2);
        std::mem::swap(&mut w1, &mut w2);
        area = -area;
    }
    let (w, h) = (depth.width as f64, depth.height as f64);
    let min_x = p0.x.min(p1.x).min(p2.x).floor().max(0.0);
    let max_x = p0.x.max(p1.x).max(p2.x).ceil().min(w);
    let min_y = p0.y.min(p1.y).min(p2.y).floor().max(0.0);
    let max_y = p0.y.max(p1.y).max(p2.y).ceil().min(h);
    if min_x >= max_x || min_y >= max_y {
        return;
    }
    let tl = [is_top_left(&p1, &p2), is_top_left(&p2, &p0), is_top_left(&p0, &p1)];
    let inv_area = 1.0 / area;
    for y in min_y as usize..max_y as usize {
        let py = y as f64 + 0.5;
        let row = y * depth.width;
        for x in min_x as usize..max_x as usize {
            let px = x as f64 + 0.5;
            let e0 = edge(&p1, &p2, px, py);
            let e1 = edge(&p2, &p0, px, py);
            let e2 = edge(&p0, &p1, px, py);
            let inside = (e0 > 0.0 || (e0 == 0.0 && tl[0]))
                && (e1 > 0.0 || (e1 == 0.0 && tl[1]))
                && (e2 > 0.0 || (e2 == 0.0 && tl[2]));
            if !inside {
                continue;
            }
            let inv_z = (e0 * w0 + e1 * w1 + e2 * w2) * inv_area;
            let z = (1.0 / inv_z) as f32;
            let slot = &mut depth.data[row + x];
            if *slot == 0.0 || z < *slot {
                *slot = z;
            }
        }
    }
}

/// Tight box around the nonzero pixels of a depth image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SilhouetteBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl SilhouetteBox {
    pub fn diagonal(&self) -> f64 {
        ((self.w as f64).powi(2) + (self.h as f64).powi(2)).sqrt()
    }

    /// Continuous-pixel center of the box.
    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }
}

pub fn silhouette_bbox(d: &DepthImage) -> Option<SilhouetteBox> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0usize, 0usize);
    let mut any = false;
    for (y, row) in d.data.chunks_exact(d.width.max(1)).enumerate() {
        let first = row.iter().position(|&v| v > 0.0);
        if let Some(first) = first {
            let last = row.iter().rposition(|&v| v > 0.0).unwrap_or(first);
            any = true;
            x0 = x0.min(first);
            x1 = x1.max(last);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    any.then(|| SilhouetteBox {
        x: x0 as u32,
        y: y0 as u32,
        w: (x1 - x0 + 1) as u32,
        h: (y1 - y0 + 1) as u32,
    })
}

/// One rendered codebook view.
#[derive(Debug, Clone)]
pub struct SyntheticView {
    pub depth: DepthImage,
    /// Camera-to-object rotation.
    pub rotation: Rotation3,
    pub bbox: SilhouetteBox,
}

/// Lazily renders views in viewpoint-major, in-plane-minor order.
pub struct CodebookViews<'a> {
    mesh: &'a TriangleMesh,
    sphere: &'a ViewSphere,
    inplane: Vec<Rotation3>,
    k: CameraIntrinsics,
    t_syn_z: f64,
    next: usize,
}

impl<'a> CodebookViews<'a> {
    /// Number of views over the whole sequence, independent of progress.
    pub fn total(&self) -> usize {
        self.sphere.len() * self.inplane.len()
    }

    /// Render and pose for view `index` without advancing.
    pub fn render(&self, index: usize) -> Result<SyntheticView> {
        let n = self.inplane.len();
        let v = &self.sphere.viewpoints[index / n];
        let obj2cam = view_rotation_obj2cam(v, &self.inplane[index % n]);
        let pose = Pose::new(obj2cam, Vec3::new(0.0, 0.0, self.t_syn_z));
        let depth = render_depth(self.mesh, &pose, &self.k);
        let bbox = silhouette_bbox(&depth).ok_or(Error::EmptySilhouette { index })?;
        Ok(SyntheticView {
            depth,
            rotation: obj2cam.transpose(),
            bbox,
        })
    }
}

impl Iterator for CodebookViews<'_> {
    type Item = Result<SyntheticView>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.total() {
            return None;
        }
        let out = self.render(self.next);
        self.next += 1;
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.total() - self.next;
        (rest, Some(rest))
    }
}

impl ExactSizeIterator for CodebookViews<'_> {}

pub fn codebook_views<'a>(
    mesh: &'a TriangleMesh,
    sphere: &'a ViewSphere,
    n_inplane: usize,
    k_syn: &CameraIntrinsics,
    t_syn_z: f64,
) -> Result<CodebookViews<'a>> {
    if sphere.is_empty() {
        return Err(Error::EmptyInput("view sphere"));
    }
    Ok(CodebookViews {
        mesh,
        sphere,
        inplane: inplane_rotations(n_inplane)?,
        k: *k_syn,
        t_syn_z,
        next: 0,
    })
}

/// Eagerly renders all views; fails on the first empty silhouette.
pub fn generate_codebook_views(
    mesh: &TriangleMesh,
    sphere: &ViewSphere,
    n_inplane: usize,
    k_syn: &CameraIntrinsics,
    t_syn_z: f64,
) -> Result<Vec<SyntheticView>> {
    codebook_views(mesh, sphere, n_inplane, k_syn, t_syn_z)?.collect()
}
