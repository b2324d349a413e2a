//! Exact Euclidean distance transform by separable lower envelopes of
//! parabolas (one pass per axis), honoring anisotropic spacing.

use super::{FuzzyVolume, Geometry, ScalarField};
use crate::error::{Error, Result};

/// Distance in mm from every 1-voxel to the nearest 0-voxel; 0 on 0-voxels.
pub fn distance_transform(mask: &FuzzyVolume) -> Result<ScalarField> {
    mask.ensure_crisp("distance_transform")?;
    let ones = mask.values().iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == mask.values().len() {
        return Err(Error::InvalidArgument(
            "distance_transform needs both 0 and 1 voxels".into(),
        ));
    }
    let targets: Vec<bool> = mask.values().iter().map(|&v| v == 0.0).collect();
    let sq = squared_edt(&targets, mask.geometry());
    Ok(ScalarField::from_raw(
        mask.geometry().clone(),
        sq.into_iter().map(f64::sqrt).collect(),
    ))
}

/// Distance in mm from every voxel to the nearest voxel of a crisp region
/// (0 inside the region). Infinite everywhere when the region is empty.
pub fn distance_to_region(region: &FuzzyVolume) -> Result<ScalarField> {
    region.ensure_crisp("distance_to_region")?;
    let targets: Vec<bool> = region.values().iter().map(|&v| v == 1.0).collect();
    let sq = squared_edt(&targets, region.geometry());
    Ok(ScalarField::from_raw(
        region.geometry().clone(),
        sq.into_iter().map(f64::sqrt).collect(),
    ))
}

/// Squared distance from each 1-voxel of a crisp mask to the nearest
/// 0-voxel, where space outside the grid counts as 0. Axes of extent 1 are
/// not padded, so single-slice masks behave as planar images.
pub(crate) fn squared_edt_to_background(mask: &FuzzyVolume) -> Vec<f64> {
    let g = mask.geometry();
    let pad: [usize; 3] = std::array::from_fn(|a| usize::from(g.dims[a] > 1));
    let dims: [usize; 3] = std::array::from_fn(|a| g.dims[a] + 2 * pad[a]);
    let padded = Geometry {
        dims,
        spacing: g.spacing,
        origin: [0.0; 3],
    };
    let mut targets = vec![true; padded.len()];
    let inner = |c: [usize; 3]| padded.index(c[0] + pad[0], c[1] + pad[1], c[2] + pad[2]);
    for (i, &v) in mask.values().iter().enumerate() {
        if v == 1.0 {
            targets[inner(g.coords(i))] = false;
        }
    }
    let sq = squared_edt(&targets, &padded);
    (0..g.len()).map(|i| sq[inner(g.coords(i))]).collect()
}

/// Squared distance from each voxel to the nearest target voxel.
///
/// Sums are accumulated as `(dx^2 + dy^2) + dz^2`, the same order a direct
/// scan uses, so results agree exactly with brute force whenever the
/// spacing products are exact.
pub(crate) fn squared_edt(targets: &[bool], g: &Geometry) -> Vec<f64> {
    let [nx, ny, nz] = g.dims;
    let mut f: Vec<f64> = targets
        .iter()
        .map(|&t| if t { 0.0 } else { f64::INFINITY })
        .collect();
    let mut scratch = Envelope::with_capacity(nx.max(ny).max(nz));

    // x lines
    for z in 0..nz {
        for y in 0..ny {
            let start = g.index(0, y, z);
            scratch.transform_line(&mut f, start, 1, nx, g.spacing[0]);
        }
    }
    // y lines
    for z in 0..nz {
        for x in 0..nx {
            let start = g.index(x, 0, z);
            scratch.transform_line(&mut f, start, nx, ny, g.spacing[1]);
        }
    }
    // z lines
    for y in 0..ny {
        for x in 0..nx {
            let start = g.index(x, y, 0);
            scratch.transform_line(&mut f, start, nx * ny, nz, g.spacing[2]);
        }
    }
    f
}

struct Envelope {
    line: Vec<f64>,
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Envelope {
            line: Vec::with_capacity(n),
            sites: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    fn transform_line(&mut self, data: &mut [f64], start: usize, stride: usize, n: usize, s: f64) {
        self.line.clear();
        self.line
            .extend((0..n).map(|q| data[start + q * stride]));
        self.sites.clear();
        self.bounds.clear();

        let f = &self.line;
        let key = |q: usize| f[q] + sq(q as f64 * s);
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            loop {
                let Some(&v) = self.sites.last() else {
                    self.sites.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let cross = (key(q) - key(v)) / (2.0 * s * (q - v) as f64);
                if cross <= *self.bounds.last().unwrap() {
                    self.sites.pop();
                    self.bounds.pop();
                } else {
                    self.sites.push(q);
                    self.bounds.push(cross);
                    break;
                }
            }
        }

        if self.sites.is_empty() {
            return;
        }
        let eval = |v: usize, q: usize| {
            let d = (q as f64 - v as f64) * s;
            f[v] + d * d
        };
        let mut k = 0;
        for q in 0..n {
            let pos = q as f64 * s;
            while k + 1 < self.sites.len() && self.bounds[k + 1] < pos {
                k += 1;
            }
            // Neighboring parabolas guard against rounding in the breakpoints.
            let mut best = eval(self.sites[k], q);
            if k > 0 {
                best = best.min(eval(self.sites[k - 1], q));
            }
            if k + 1 < self.sites.len() {
                best = best.min(eval(self.sites[k + 1], q));
            }
            data[start + q * stride] = best;
        }
    }
}

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    fn brute(mask: &FuzzyVolume) -> Vec<f64> {
        let g = mask.geometry();
        let zeros: Vec<[usize; 3]> = (0..g.len())
            .filter(|&i| mask.values()[i] == 0.0)
            .map(|i| g.coords(i))
            .collect();
        (0..g.len())
            .map(|i| {
                if mask.values()[i] == 0.0 {
                    return 0.0;
                }
                let c = g.coords(i);
                zeros
                    .iter()
                    .map(|z| {
                        let dx = (c[0] as f64 - z[0] as f64) * g.spacing[0];
                        let dy = (c[1] as f64 - z[1] as f64) * g.spacing[1];
                        let dz = (c[2] as f64 - z[2] as f64) * g.spacing[2];
                        dx * dx + dy * dy + dz * dz
                    })
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .collect()
    }

    #[test]
    fn single_voxel_gets_min_spacing() {
        let g = Geometry::new([3, 3, 3], [2.0, 0.5, 1.0], [0.0; 3]).unwrap();
        let v = FuzzyVolume::from_fn(g, |c| if c == [1, 1, 1] { 1.0 } else { 0.0 }).unwrap();
        let d = distance_transform(&v).unwrap();
        assert_eq!(d.get(1, 1, 1), 0.5);
        assert_eq!(d.get(0, 0, 0), 0.0);
    }

    #[test]
    fn row_of_five() {
        let g = Geometry::unit([7, 1, 1]).unwrap();
        let v = FuzzyVolume::new(g, vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        let d = distance_transform(&v).unwrap();
        assert_eq!(d.values(), &[0.0, 1.0, 2.0, 3.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_degenerate_masks() {
        let g = Geometry::unit([2, 2, 2]).unwrap();
        assert!(distance_transform(&FuzzyVolume::zeros(g.clone())).is_err());
        let ones = FuzzyVolume::new(g.clone(), vec![1.0; 8]).unwrap();
        assert!(distance_transform(&ones).is_err());
        let fuzzy = FuzzyVolume::new(g, vec![0.5; 8]).unwrap();
        assert!(distance_transform(&fuzzy).is_err());
    }

    #[test]
    fn matches_brute_force_anisotropic() {
        let g = Geometry::new([6, 5, 4], [1.5, 0.5, 2.0], [0.0; 3]).unwrap();
        let v = FuzzyVolume::from_fn(g, |[x, y, z]| {
            if (x * 7 + y * 3 + z * 5) % 11 == 0 {
                0.0
            } else {
                1.0
            }
        })
        .unwrap();
        assert_eq!(distance_transform(&v).unwrap().values(), brute(&v).as_slice());
    }

    #[test]
    fn distance_to_empty_region_is_infinite() {
        let g = Geometry::unit([2, 2, 1]).unwrap();
        let d = distance_to_region(&FuzzyVolume::zeros(g)).unwrap();
        assert!(d.values().iter().all(|v| v.is_infinite()));
    }
}
