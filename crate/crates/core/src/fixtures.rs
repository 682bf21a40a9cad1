//! Generated test clouds and targets.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pointcloud::{voxel_downsample, PointCloud};
use crate::{Error, Result, Vec3};

/// Flat `nx × ny` grid in the `z = 0` plane, row-major (`j * nx + i`).
pub fn grid(nx: usize, ny: usize, spacing: f64) -> PointCloud {
    let pts = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0)))
        .collect();
    PointCloud::new(pts).expect("grid is nonempty")
}

/// Grid with seeded in-plane jitter and a smooth height field.
pub fn wavy_sheet(nx: usize, ny: usize, spacing: f64, amplitude: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lx = nx as f64 * spacing;
    let ly = ny as f64 * spacing;
    let mut pts = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = (i as f64 + rng.random_range(-0.2..0.2)) * spacing;
            let y = (j as f64 + rng.random_range(-0.2..0.2)) * spacing;
            let z = amplitude
                * spacing
                * ((2.0 * std::f64::consts::PI * x / lx).sin()
                    + (std::f64::consts::PI * y / ly).cos());
            pts.push(Vec3::new(x, y, z));
        }
    }
    PointCloud::new(pts).expect("sheet is nonempty")
}

/// Subdivided icosahedron projected onto a sphere: `10·4^s + 2` points.
pub fn icosphere(subdivisions: u32, radius: f64) -> PointCloud {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    PointCloud::new(verts.into_iter().map(|v| v * radius).collect()).expect("nonempty")
}

/// Quasi-uniform sphere sampling along a golden-angle spiral.
pub fn fibonacci_sphere(n: usize, radius: f64) -> PointCloud {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let pts = (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z) * radius
        })
        .collect();
    PointCloud::new(pts).expect("n > 0")
}

/// Target density painted as uniform disks `(center, radius, weight)`;
/// points covered by no disk get zero.
pub fn painted_disks(cloud: &PointCloud, disks: &[(Vec3, f64, f64)]) -> Vec<f64> {
    cloud
        .positions()
        .iter()
        .map(|p| {
            disks
                .iter()
                .filter(|(c, r, _)| (p - c).norm() <= *r)
                .fold(0.0, |acc, (_, _, w)| acc + w)
        })
        .collect()
}

/// Voxel-filters `base` to approximately `n` points, bisecting on the voxel
/// size. The result is within 2% of `n` or the closest found.
pub fn downsample_to(base: &PointCloud, n: usize) -> Result<PointCloud> {
    if n == 0 || n > base.len() {
        return Err(Error::domain(format!(
            "cannot reach {n} points from a cloud of {}",
            base.len()
        )));
    }
    if n == base.len() {
        return Ok(base.clone());
    }
    let pts = base.positions();
    let lo_c = pts.iter().fold(pts[0], |a, p| a.inf(p));
    let hi_c = pts.iter().fold(pts[0], |a, p| a.sup(p));
    let (mut lo, mut hi) = (1e-9, (hi_c - lo_c).max() * 2.0 + 1e-9);
    let mut best: Option<PointCloud> = None;
    for _ in 0..60 {
        let v = (lo * hi).sqrt();
        let out = voxel_downsample(base, v)?;
        let m = out.len();
        let better = best
            .as_ref()
            .is_none_or(|b| m.abs_diff(n) < b.len().abs_diff(n));
        let done = m.abs_diff(n) * 50 <= n;
        if m > n {
            lo = v;
        } else {
            hi = v;
        }
        if better {
            best = Some(out);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one iteration"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(grid(20, 20, 1.0).len(), 400);
        assert_eq!(icosphere(4, 1.0).len(), 2562);
        assert_eq!(icosphere(3, 1.0).len(), 642);
        assert_eq!(fibonacci_sphere(1000, 2.0).len(), 1000);
    }

    #[test]
    fn sphere_points_on_radius() {
        for p in icosphere(2, 3.0).positions() {
            assert!((p.norm() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_painting() {
        let cloud = grid(5, 5, 1.0);
        let t = painted_disks(&cloud, &[(Vec3::new(2.0, 2.0, 0.0), 1.0, 1.0)]);
        assert_eq!(t.iter().filter(|&&v| v > 0.0).count(), 5);
    }

    #[test]
    fn downsample_hits_target() {
        let base = fibonacci_sphere(8000, 100.0);
        let out = downsample_to(&base, 2000).unwrap();
        assert!(out.len().abs_diff(2000) <= 100, "{}", out.len());
    }
}
