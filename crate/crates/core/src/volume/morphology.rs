use rayon::prelude::*;

use super::edt::{squared_edt, squared_edt_to_background};
use super::{FuzzyVolume, Geometry};
use crate::error::{Error, Result};
use crate::lattice::TNorm;

/// A fuzzy structuring element: a small volume with a designated center
/// holding the element's maximal membership. Offsets are in voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuringElement {
    volume: FuzzyVolume,
    center: [usize; 3],
}

impl StructuringElement {
    pub fn new(volume: FuzzyVolume, center: [usize; 3]) -> Result<Self> {
        let dims = volume.geometry().dims;
        if (0..3).any(|a| center[a] >= dims[a]) {
            return Err(Error::InvalidArgument(format!(
                "structuring element center {center:?} outside dims {dims:?}"
            )));
        }
        let c = volume.get(center[0], center[1], center[2]);
        if volume.values().iter().any(|&v| v > c) {
            return Err(Error::InvalidArgument(
                "structuring element must be maximal at its center".into(),
            ));
        }
        Ok(StructuringElement { volume, center })
    }

    /// Crisp ball of the given radius (mm) on a grid with `spacing`.
    pub fn ball(radius_mm: f64, spacing: [f64; 3]) -> Result<Self> {
        if !(radius_mm >= 0.0) {
            return Err(Error::InvalidArgument("ball radius must be >= 0".into()));
        }
        let half: Vec<usize> = spacing
            .iter()
            .map(|s| (radius_mm / s).floor() as usize)
            .collect();
        let dims = [2 * half[0] + 1, 2 * half[1] + 1, 2 * half[2] + 1];
        let geometry = Geometry::new(dims, spacing, [0.0; 3])?;
        let volume = FuzzyVolume::from_fn(geometry, |c| {
            let r2: f64 = (0..3)
                .map(|a| {
                    let d = (c[a] as f64 - half[a] as f64) * spacing[a];
                    d * d
                })
                .sum();
            if r2 <= radius_mm * radius_mm {
                1.0
            } else {
                0.0
            }
        })?;
        StructuringElement::new(volume, [half[0], half[1], half[2]])
    }

    pub fn volume(&self) -> &FuzzyVolume {
        &self.volume
    }

    pub fn center(&self) -> [usize; 3] {
        self.center
    }

    /// Nonzero entries as (offset relative to center, membership).
    fn entries(&self) -> Vec<([isize; 3], f64)> {
        let g = self.volume.geometry();
        self.volume
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, &v)| {
                let c = g.coords(i);
                (
                    [
                        c[0] as isize - self.center[0] as isize,
                        c[1] as isize - self.center[1] as isize,
                        c[2] as isize - self.center[2] as isize,
                    ],
                    v,
                )
            })
            .collect()
    }
}

fn ensure_same_spacing(mu: &FuzzyVolume, se: &StructuringElement) -> Result<()> {
    if mu.geometry().same_spacing(se.volume.geometry()) {
        Ok(())
    } else {
        Err(Error::GeometryMismatch(format!(
            "structuring element spacing {:?} differs from image spacing {:?}",
            se.volume.geometry().spacing,
            mu.geometry().spacing
        )))
    }
}

/// Fuzzy dilation `d(k) = sup_k' C(se(k - k'), mu(k'))`.
///
/// Scatters every support voxel of `mu` through the nonzero entries of the
/// structuring element. Work is split by output z-plane; each plane is
/// written by exactly one task, so the result does not depend on the
/// number of threads.
pub fn dilate(mu: &FuzzyVolume, se: &StructuringElement, t: TNorm) -> Result<FuzzyVolume> {
    ensure_same_spacing(mu, se)?;
    let g = mu.geometry();
    let [nx, ny, nz] = g.dims;
    let plane = nx * ny;

    // Support voxels bucketed by z.
    let mut support_by_z: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); nz];
    for (i, &v) in mu.values().iter().enumerate() {
        if v > 0.0 {
            let [x, y, z] = g.coords(i);
            support_by_z[z].push((x, y, v));
        }
    }
    let entries = se.entries();

    let mut out = vec![0.0; g.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        for &([ox, oy, oz], nu) in &entries {
            let src_z = z as isize - oz;
            if src_z < 0 || src_z >= nz as isize {
                continue;
            }
            for &(sx, sy, m) in &support_by_z[src_z as usize] {
                let x = sx as isize + ox;
                let y = sy as isize + oy;
                if x < 0 || y < 0 || x >= nx as isize || y >= ny as isize {
                    continue;
                }
                let k = x as usize + nx * y as usize;
                let c = t.conj(nu, m);
                if c > slab[k] {
                    slab[k] = c;
                }
            }
        }
    });
    Ok(FuzzyVolume::from_raw(g.clone(), out))
}

/// Literal evaluation of the dilation over every pair of voxels.
pub fn dilate_bruteforce(mu: &FuzzyVolume, se: &StructuringElement, t: TNorm) -> Result<FuzzyVolume> {
    ensure_same_spacing(mu, se)?;
    let g = mu.geometry();
    let sg = se.volume.geometry();
    let n = g.len();
    let mut out = vec![0.0; n];
    for (k, slot) in out.iter_mut().enumerate() {
        let ck = g.coords(k);
        let mut best: f64 = 0.0;
        for kp in 0..n {
            let cp = g.coords(kp);
            let off = [
                ck[0] as isize - cp[0] as isize + se.center[0] as isize,
                ck[1] as isize - cp[1] as isize + se.center[1] as isize,
                ck[2] as isize - cp[2] as isize + se.center[2] as isize,
            ];
            let nu = match sg.checked_index(off) {
                Some(j) => se.volume.values()[j],
                None => continue,
            };
            best = best.max(t.conj(nu, mu.values()[kp]));
        }
        *slot = best;
    }
    Ok(FuzzyVolume::from_raw(g.clone(), out))
}

/// Crisp erosion by a Euclidean ball: a voxel survives iff its distance to
/// the nearest 0-voxel exceeds `radius_mm`. Space outside the grid counts
/// as 0 (except along axes of extent 1).
pub fn erode_crisp(mask: &FuzzyVolume, radius_mm: f64) -> Result<FuzzyVolume> {
    mask.ensure_crisp("erode_crisp")?;
    if !(radius_mm >= 0.0) {
        return Err(Error::InvalidArgument("erosion radius must be >= 0".into()));
    }
    if radius_mm == 0.0 {
        return Ok(mask.clone());
    }
    let r2 = radius_mm * radius_mm;
    let out = squared_edt_to_background(mask)
        .into_iter()
        .map(|d| if d > r2 { 1.0 } else { 0.0 })
        .collect();
    Ok(FuzzyVolume::from_raw(mask.geometry().clone(), out))
}

/// Crisp dilation by a Euclidean ball: a voxel is set iff it lies within
/// `radius_mm` of a 1-voxel. Nothing is imported from outside the grid.
pub fn dilate_crisp(mask: &FuzzyVolume, radius_mm: f64) -> Result<FuzzyVolume> {
    mask.ensure_crisp("dilate_crisp")?;
    if !(radius_mm >= 0.0) {
        return Err(Error::InvalidArgument("dilation radius must be >= 0".into()));
    }
    let targets: Vec<bool> = mask.values().iter().map(|&v| v == 1.0).collect();
    let sq = squared_edt(&targets, mask.geometry());
    let r2 = radius_mm * radius_mm;
    let out = sq.iter().map(|&d| if d <= r2 { 1.0 } else { 0.0 }).collect();
    Ok(FuzzyVolume::from_raw(mask.geometry().clone(), out))
}
