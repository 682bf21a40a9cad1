//! Point clouds: loading, voxel filtering and spacing statistics.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kdtree::KdTree;
use crate::{Error, Result, Vec3};

/// Positions in millimetres with optional colors and target masses.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vec3>,
    colors: Option<Vec<[u8; 3]>>,
    target: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    Csv,
    PlyAscii,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" | "txt" => Some(CloudFormat::Csv),
            "ply" => Some(CloudFormat::PlyAscii),
            _ => None,
        }
    }
}

impl PointCloud {
    pub fn new(positions: Vec<Vec3>) -> Result<Self> {
        Self::with_attributes(positions, None, None)
    }

    pub fn with_attributes(
        positions: Vec<Vec3>,
        colors: Option<Vec<[u8; 3]>>,
        target: Option<Vec<f64>>,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::domain("point cloud is empty"));
        }
        if let Some(i) = positions
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::domain(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        if let Some(c) = &colors {
            if c.len() != positions.len() {
                return Err(Error::domain("color count differs from point count"));
            }
        }
        if let Some(t) = &target {
            check_target(t, positions.len())?;
        }
        Ok(PointCloud {
            positions,
            colors,
            target,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    pub fn set_target(&mut self, target: Vec<f64>) -> Result<()> {
        check_target(&target, self.len())?;
        self.target = Some(target);
        Ok(())
    }

    pub fn spatial_index(&self) -> KdTree {
        KdTree::new(&self.positions)
    }

    /// Applies a rigid transform `x ↦ R x + t`.
    pub fn transformed(&self, rotation: &nalgebra::Rotation3<f64>, translation: &Vec3) -> Self {
        PointCloud {
            positions: self
                .positions
                .iter()
                .map(|p| rotation * p + translation)
                .collect(),
            colors: self.colors.clone(),
            target: self.target.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let format = CloudFormat::from_path(path).ok_or_else(|| {
            Error::domain(format!("cannot infer cloud format from {}", path.display()))
        })?;
        load_cloud(path, format)
    }

    /// Writes `x,y,z[,r,g,b][,p]` rows with a header line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = fs::File::create(path)?;
        out.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("x,y,z");
        if self.colors.is_some() {
            s.push_str(",r,g,b");
        }
        if self.target.is_some() {
            s.push_str(",p");
        }
        s.push('\n');
        for i in 0..self.len() {
            let p = &self.positions[i];
            s.push_str(&format!("{},{},{}", p.x, p.y, p.z));
            if let Some(c) = &self.colors {
                s.push_str(&format!(",{},{},{}", c[i][0], c[i][1], c[i][2]));
            }
            if let Some(t) = &self.target {
                s.push_str(&format!(",{}", t[i]));
            }
            s.push('\n');
        }
        s
    }
}

fn check_target(t: &[f64], n: usize) -> Result<()> {
    if t.len() != n {
        return Err(Error::domain("target length differs from point count"));
    }
    if t.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::domain(
            "target masses must be finite and nonnegative",
        ));
    }
    if t.iter().sum::<f64>() <= 0.0 {
        return Err(Error::domain("target masses sum to zero"));
    }
    Ok(())
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    match format {
        CloudFormat::Csv => parse_csv(&text),
        CloudFormat::PlyAscii => parse_ply(&text),
    }
}

/// Parses `x,y,z[,r,g,b][,p]` rows. A leading non-numeric row is a header.
pub fn parse_csv(text: &str) -> Result<PointCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let mut positions = Vec::new();
    let mut colors = Vec::new();
    let mut target = Vec::new();
    let mut width = None;

    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(row + 1, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(row + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let values: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) if positions.is_empty() && width.is_none() && row == 0 => {
                // header row
                continue;
            }
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("invalid number: {e}"),
                })
            }
        };
        if !matches!(values.len(), 3 | 4 | 6 | 7) {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3, 4, 6 or 7 columns, found {}", values.len()),
            });
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {w} columns, found {}", values.len()),
                })
            }
            _ => {}
        }
        positions.push(Vec3::new(values[0], values[1], values[2]));
        if values.len() >= 6 {
            let mut rgb = [0u8; 3];
            for (k, v) in values[3..6].iter().enumerate() {
                if !(0.0..=255.0).contains(v) || v.fract() != 0.0 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("color component {v} outside 0..255"),
                    });
                }
                rgb[k] = *v as u8;
            }
            colors.push(rgb);
        }
        if values.len() == 4 || values.len() == 7 {
            target.push(values[values.len() - 1]);
        }
    }
    if positions.is_empty() {
        return Err(Error::domain("point cloud file contains no points"));
    }
    let n = positions.len();
    PointCloud::with_attributes(
        positions,
        (colors.len() == n).then_some(colors),
        (target.len() == n).then_some(target),
    )
}

/// ASCII PLY with a `vertex` element holding `x y z` and optionally
/// `red green blue` and a scalar `p` (or `probability`) property.
pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing 'ply' magic".into(),
            })
        }
    }

    let mut vertex_count = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut header_done = false;
    for (no, line) in lines.by_ref() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(Error::Parse {
                        line: no + 1,
                        msg: format!("unsupported PLY format '{fmt}'"),
                    });
                }
            }
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(count.parse::<usize>().map_err(|e| Error::Parse {
                        line: no + 1,
                        msg: e.to_string(),
                    })?);
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(Error::Parse {
                    line: no + 1,
                    msg: "list properties on vertices are not supported".into(),
                })
            }
            ["property", _ty, name] if in_vertex => props.push(name.to_string()),
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => {}
        }
    }
    if !header_done {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: "missing end_header".into(),
        });
    }
    let n = vertex_count.ok_or_else(|| Error::Parse {
        line: 1,
        msg: "no vertex element".into(),
    })?;
    if n == 0 {
        return Err(Error::domain("PLY file contains no vertices"));
    }
    let col = |name: &str| props.iter().position(|p| p == name);
    let (ix, iy, iz) = match (col("x"), col("y"), col("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "vertex element lacks x/y/z".into(),
            })
        }
    };
    let rgb = match (col("red"), col("green"), col("blue")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let ip = col("p").or_else(|| col("probability"));

    let mut positions = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for (no, line) in lines {
        if positions.len() == n {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| Error::Parse {
            line: no + 1,
            msg: e.to_string(),
        })?;
        if vals.len() != props.len() {
            return Err(Error::Parse {
                line: no + 1,
                msg: format!("expected {} values, found {}", props.len(), vals.len()),
            });
        }
        positions.push(Vec3::new(vals[ix], vals[iy], vals[iz]));
        if let Some([r, g, b]) = rgb {
            colors.push([vals[r] as u8, vals[g] as u8, vals[b] as u8]);
        }
        if let Some(p) = ip {
            target.push(vals[p]);
        }
    }
    if positions.len() != n {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: format!("expected {n} vertices, found {}", positions.len()),
        });
    }
    PointCloud::with_attributes(positions, rgb.map(|_| colors), ip.map(|_| target))
}

/// One point per occupied voxel: the member centroid, with averaged colors
/// and summed target masses. Output is ordered by voxel key.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> Result<PointCloud> {
    if !(voxel > 0.0) || !voxel.is_finite() {
        return Err(Error::domain(format!(
            "voxel size must be positive, got {voxel}"
        )));
    }
    #[derive(Default)]
    struct Cell {
        sum: Vec3,
        rgb: [f64; 3],
        mass: f64,
        count: usize,
    }
    let mut cells: BTreeMap<[i64; 3], Cell> = BTreeMap::new();
    for (i, p) in cloud.positions.iter().enumerate() {
        let key = [
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        ];
        let cell = cells.entry(key).or_default();
        cell.sum += p;
        cell.count += 1;
        if let Some(c) = &cloud.colors {
            for k in 0..3 {
                cell.rgb[k] += c[i][k] as f64;
            }
        }
        if let Some(t) = &cloud.target {
            cell.mass += t[i];
        }
    }
    let mut positions = Vec::with_capacity(cells.len());
    let mut colors = Vec::with_capacity(cells.len());
    let mut target = Vec::with_capacity(cells.len());
    for cell in cells.values() {
        let n = cell.count as f64;
        positions.push(cell.sum / n);
        colors.push(cell.rgb.map(|c| (c / n).round().clamp(0.0, 255.0) as u8));
        target.push(cell.mass);
    }
    PointCloud::with_attributes(
        positions,
        cloud.colors.as_ref().map(|_| colors),
        cloud.target.as_ref().map(|_| target),
    )
}

/// Mean distance from each point to its nearest other point.
pub fn mean_spacing(cloud: &PointCloud) -> Result<f64> {
    mean_spacing_with(cloud, &cloud.spatial_index())
}

pub fn mean_spacing_with(cloud: &PointCloud, index: &KdTree) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::domain("mean spacing needs at least two points"));
    }
    let mut total = 0.0;
    for (i, p) in cloud.positions.iter().enumerate() {
        let nn = index.knn_with_distances(p, 2)?;
        // a duplicate of `p` may be listed before `p` itself
        let d = nn
            .iter()
            .find(|&&(j, _)| j != i)
            .map(|&(_, d)| d)
            .expect("two neighbours requested");
        total += d;
    }
    let h = total / cloud.len() as f64;
    if !(h > 0.0) {
        return Err(Error::domain("all points coincide; spacing is zero"));
    }
    Ok(h)
}
