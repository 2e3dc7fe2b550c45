//! ASCII PLY / PCD v0.7 / XYZ reading and writing.
//!
//! Coordinates are written with Rust's shortest round-trip float formatting,
//! so a write/parse cycle reproduces every coordinate bit for bit.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{Normal, Point, PointCloud, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Ply,
    Pcd,
    Xyz,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "ply" => Ok(CloudFormat::Ply),
            "pcd" => Ok(CloudFormat::Pcd),
            "xyz" | "txt" => Ok(CloudFormat::Xyz),
            other => Err(Error::UnsupportedFormat(format!("unknown cloud extension '{other}'"))),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

pub fn parse_cloud(bytes: &[u8], format: CloudFormat) -> Result<PointCloud> {
    let text = std::str::from_utf8(bytes).map_err(|_| {
        Error::UnsupportedFormat("cloud data is not valid UTF-8 (binary encodings are not supported)".into())
    })?;
    match format {
        CloudFormat::Ply => parse_ply(text),
        CloudFormat::Pcd => parse_pcd(text),
        CloudFormat::Xyz => parse_xyz(text),
    }
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let format = CloudFormat::from_path(path)?;
    let bytes = std::fs::read(path)?;
    parse_cloud(&bytes, format)
}

/// Column layout shared by the PLY and PCD readers.
#[derive(Default)]
struct Layout {
    xyz: [Option<usize>; 3],
    normal: [Option<usize>; 3],
    rgb: [Option<usize>; 3],
    packed_rgb: Option<usize>,
    columns: usize,
}

impl Layout {
    fn assign(&mut self, name: &str, column: usize) {
        let slot = match name {
            "x" => &mut self.xyz[0],
            "y" => &mut self.xyz[1],
            "z" => &mut self.xyz[2],
            "nx" | "normal_x" => &mut self.normal[0],
            "ny" | "normal_y" => &mut self.normal[1],
            "nz" | "normal_z" => &mut self.normal[2],
            "red" | "r" => &mut self.rgb[0],
            "green" | "g" => &mut self.rgb[1],
            "blue" | "b" => &mut self.rgb[2],
            "rgb" | "rgba" => &mut self.packed_rgb,
            _ => return,
        };
        *slot = Some(column);
    }

    fn check(&self, line: usize) -> Result<()> {
        if self.xyz.iter().any(Option::is_none) {
            return Err(parse_err(line, "header does not declare x, y and z"));
        }
        Ok(())
    }

    fn has_normals(&self) -> bool {
        self.normal.iter().all(Option::is_some)
    }

    fn has_rgb(&self) -> bool {
        self.rgb.iter().all(Option::is_some)
    }

    fn record(&self, tokens: &[&str], line: usize, packed_rgb_is_float: bool) -> Result<Point> {
        if tokens.len() != self.columns {
            return Err(parse_err(
                line,
                format!("expected {} values, found {}", self.columns, tokens.len()),
            ));
        }
        let num = |col: usize| -> Result<f64> {
            tokens[col]
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("invalid number '{}'", tokens[col])))
        };
        let mut position = Vec3::zeros();
        for k in 0..3 {
            let v = num(self.xyz[k].expect("checked"))?;
            if !v.is_finite() {
                return Err(parse_err(line, "non-finite coordinate"));
            }
            position[k] = v;
        }
        let normal = if self.has_normals() {
            let mut n = Vec3::zeros();
            for k in 0..3 {
                n[k] = num(self.normal[k].expect("checked"))?;
            }
            Some(Normal::from_vector(n))
        } else {
            None
        };
        let color = if self.has_rgb() {
            let mut c = [0u8; 3];
            for (slot, field) in c.iter_mut().zip(self.rgb) {
                let v = num(field.expect("checked"))?;
                if !(0.0..=255.0).contains(&v) {
                    return Err(parse_err(line, format!("color component {v} outside [0, 255]")));
                }
                *slot = v.round() as u8;
            }
            Some(c)
        } else if let Some(col) = self.packed_rgb {
            let bits = if packed_rgb_is_float {
                tokens[col]
                    .parse::<f32>()
                    .map_err(|_| parse_err(line, format!("invalid rgb '{}'", tokens[col])))?
                    .to_bits()
            } else {
                tokens[col]
                    .parse::<u32>()
                    .map_err(|_| parse_err(line, format!("invalid rgb '{}'", tokens[col])))?
            };
            Some([(bits >> 16) as u8, (bits >> 8) as u8, bits as u8])
        } else {
            None
        };
        Ok(Point { position, normal, color })
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
}

fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = data_lines(text);
    if !matches!(lines.next(), Some((_, "ply"))) {
        return Err(parse_err(1, "missing 'ply' magic"));
    }
    let mut frame_id = String::new();
    // (name, count, property names)
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut saw_format = false;
    let mut header_end = None;
    for (n, line) in lines.by_ref() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first().copied() {
            None => continue,
            Some("format") => {
                match tokens.get(1).copied() {
                    Some("ascii") => {}
                    Some(enc @ ("binary_little_endian" | "binary_big_endian")) => {
                        return Err(Error::UnsupportedFormat(format!("PLY encoding '{enc}'")))
                    }
                    _ => return Err(parse_err(n, "malformed format line")),
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") => {
                if tokens.get(1) == Some(&"frame_id") {
                    frame_id = tokens[2..].join(" ");
                }
            }
            Some("element") => {
                if tokens.len() != 3 {
                    return Err(parse_err(n, "malformed element line"));
                }
                let count = tokens[2]
                    .parse::<usize>()
                    .map_err(|_| parse_err(n, format!("invalid element count '{}'", tokens[2])))?;
                elements.push((tokens[1].to_string(), count, Vec::new()));
            }
            Some("property") => {
                let Some(element) = elements.last_mut() else {
                    return Err(parse_err(n, "property before any element"));
                };
                let name = match tokens.get(1).copied() {
                    Some("list") if tokens.len() == 5 => tokens[4],
                    Some(_) if tokens.len() == 3 => tokens[2],
                    _ => return Err(parse_err(n, "malformed property line")),
                };
                element.2.push(name.to_string());
            }
            Some("end_header") => {
                header_end = Some(n);
                break;
            }
            Some(other) => return Err(parse_err(n, format!("unexpected header keyword '{other}'"))),
        }
    }
    let Some(header_line) = header_end else {
        return Err(parse_err(text.lines().count().max(1), "missing end_header"));
    };
    if !saw_format {
        return Err(parse_err(header_line, "missing format line"));
    }
    let Some(vertex_pos) = elements.iter().position(|e| e.0 == "vertex") else {
        return Err(parse_err(header_line, "no vertex element"));
    };
    let mut layout = Layout::default();
    for (col, name) in elements[vertex_pos].2.iter().enumerate() {
        layout.assign(name, col);
    }
    layout.columns = elements[vertex_pos].2.len();
    layout.check(header_line)?;

    let mut body = lines.filter(|(_, l)| !l.is_empty());
    let skip: usize = elements[..vertex_pos].iter().map(|e| e.1).sum();
    for _ in 0..skip {
        if body.next().is_none() {
            return Err(parse_err(text.lines().count(), "unexpected end of file"));
        }
    }
    let count = elements[vertex_pos].1;
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let Some((n, line)) = body.next() else {
            return Err(parse_err(
                text.lines().count(),
                format!("expected {count} vertices, found {}", points.len()),
            ));
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        points.push(layout.record(&tokens, n, false)?);
    }
    Ok(PointCloud { points, frame_id })
}

fn parse_pcd(text: &str) -> Result<PointCloud> {
    let mut lines = data_lines(text);
    let mut frame_id = String::new();
    let mut layout = Layout::default();
    let mut fields: Option<Vec<String>> = None;
    let mut types: Option<Vec<String>> = None;
    let mut declared_points: Option<usize> = None;
    let mut data_line = None;
    for (n, line) in lines.by_ref() {
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let tokens: Vec<&str> = comment.split_whitespace().collect();
            if tokens.first() == Some(&"frame_id") {
                frame_id = tokens[1..].join(" ");
            }
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0].to_ascii_uppercase().as_str() {
            "VERSION" | "SIZE" | "COUNT" | "WIDTH" | "HEIGHT" | "VIEWPOINT" => {}
            "FIELDS" => fields = Some(tokens[1..].iter().map(|s| s.to_string()).collect()),
            "TYPE" => types = Some(tokens[1..].iter().map(|s| s.to_string()).collect()),
            "POINTS" => {
                let v = tokens
                    .get(1)
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(n, "malformed POINTS line"))?;
                declared_points = Some(v);
            }
            "DATA" => {
                match tokens.get(1).copied() {
                    Some("ascii") => {}
                    Some(enc) => return Err(Error::UnsupportedFormat(format!("PCD encoding '{enc}'"))),
                    None => return Err(parse_err(n, "malformed DATA line")),
                }
                data_line = Some(n);
                break;
            }
            other => return Err(parse_err(n, format!("unexpected header keyword '{other}'"))),
        }
    }
    let Some(header_line) = data_line else {
        return Err(parse_err(text.lines().count().max(1), "missing DATA line"));
    };
    let fields = fields.ok_or_else(|| parse_err(header_line, "missing FIELDS line"))?;
    for (col, name) in fields.iter().enumerate() {
        layout.assign(name, col);
    }
    layout.columns = fields.len();
    layout.check(header_line)?;
    let packed_is_float = match (layout.packed_rgb, &types) {
        (Some(col), Some(types)) => types.get(col).map(|t| t == "F").unwrap_or(true),
        _ => true,
    };
    let mut points = Vec::new();
    for (n, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        points.push(layout.record(&tokens, n, packed_is_float)?);
    }
    if let Some(declared) = declared_points {
        if declared != points.len() {
            return Err(parse_err(
                text.lines().count(),
                format!("POINTS declares {declared}, found {}", points.len()),
            ));
        }
    }
    Ok(PointCloud { points, frame_id })
}

fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut layout = Layout { columns: 3, ..Default::default() };
    layout.xyz = [Some(0), Some(1), Some(2)];
    let mut points = Vec::new();
    let mut frame_id = String::new();
    for (n, line) in data_lines(text) {
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let tokens: Vec<&str> = comment.split_whitespace().collect();
            if tokens.first() == Some(&"frame_id") {
                frame_id = tokens[1..].join(" ");
            }
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        points.push(layout.record(&tokens, n, true)?);
    }
    Ok(PointCloud { points, frame_id })
}

fn normal_values(p: &Point) -> Vec3 {
    p.valid_normal().unwrap_or_else(Vec3::zeros)
}

/// Serializes a cloud; infallible because it writes to memory.
pub fn write_cloud(cloud: &PointCloud, format: CloudFormat) -> Vec<u8> {
    let normals = cloud.has_normals();
    let colors = cloud.has_colors();
    let mut out = String::new();
    match format {
        CloudFormat::Ply => {
            out.push_str("ply\nformat ascii 1.0\n");
            if !cloud.frame_id.is_empty() {
                let _ = writeln!(out, "comment frame_id {}", cloud.frame_id);
            }
            let _ = writeln!(out, "element vertex {}", cloud.len());
            out.push_str("property double x\nproperty double y\nproperty double z\n");
            if normals {
                out.push_str("property double nx\nproperty double ny\nproperty double nz\n");
            }
            if colors {
                out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
            }
            out.push_str("end_header\n");
            for p in &cloud.points {
                push_record(&mut out, p, normals, colors.then_some(ColorStyle::Separate));
            }
        }
        CloudFormat::Pcd => {
            let mut fields = vec!["x", "y", "z"];
            if normals {
                fields.extend(["normal_x", "normal_y", "normal_z"]);
            }
            if colors {
                fields.push("rgb");
            }
            let n = fields.len();
            out.push_str("# .PCD v0.7 - Point Cloud Data file format\n");
            if !cloud.frame_id.is_empty() {
                let _ = writeln!(out, "# frame_id {}", cloud.frame_id);
            }
            out.push_str("VERSION 0.7\n");
            let _ = writeln!(out, "FIELDS {}", fields.join(" "));
            let sizes: Vec<&str> = fields.iter().map(|f| if *f == "rgb" { "4" } else { "8" }).collect();
            let _ = writeln!(out, "SIZE {}", sizes.join(" "));
            let _ = writeln!(out, "TYPE {}", vec!["F"; n].join(" "));
            let _ = writeln!(out, "COUNT {}", vec!["1"; n].join(" "));
            let _ = writeln!(out, "WIDTH {}", cloud.len());
            out.push_str("HEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\n");
            let _ = writeln!(out, "POINTS {}", cloud.len());
            out.push_str("DATA ascii\n");
            for p in &cloud.points {
                push_record(&mut out, p, normals, colors.then_some(ColorStyle::PackedFloat));
            }
        }
        CloudFormat::Xyz => {
            if !cloud.frame_id.is_empty() {
                let _ = writeln!(out, "# frame_id {}", cloud.frame_id);
            }
            for p in &cloud.points {
                push_record(&mut out, p, false, None);
            }
        }
    }
    out.into_bytes()
}

enum ColorStyle {
    Separate,
    PackedFloat,
}

fn push_record(out: &mut String, p: &Point, normals: bool, color: Option<ColorStyle>) {
    let v = p.position;
    let _ = write!(out, "{} {} {}", v.x, v.y, v.z);
    if normals {
        let n = normal_values(p);
        let _ = write!(out, " {} {} {}", n.x, n.y, n.z);
    }
    if let (Some(style), Some([r, g, b])) = (color, p.color) {
        match style {
            ColorStyle::Separate => {
                let _ = write!(out, " {r} {g} {b}");
            }
            ColorStyle::PackedFloat => {
                let bits = ((r as u32) << 16) | ((g as u32) << 8) | b as u32;
                let _ = write!(out, " {:e}", f32::from_bits(bits));
            }
        }
    }
    out.push('\n');
}

pub fn write_cloud_to(mut writer: impl Write, cloud: &PointCloud, format: CloudFormat) -> std::io::Result<()> {
    writer.write_all(&write_cloud(cloud, format))
}

pub fn write_cloud_file(path: &Path, cloud: &PointCloud) -> Result<()> {
    let format = CloudFormat::from_path(path)?;
    std::fs::write(path, write_cloud(cloud, format))?;
    Ok(())
}
